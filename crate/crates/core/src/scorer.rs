//! Yes/No logit scoring of rendered candidates and best-of-k selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ImageAttachment, LogitMode, ModelRequest, Role, Sampling};
use crate::harness::Screenshot;
use crate::plan::ModulePlanEntry;

pub const YES: &str = "Yes";
pub const NO: &str = "No";

/// How logits become the ranking key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringFunction {
    /// ℓ_yes − ℓ_no.
    #[default]
    Difference,
    /// ℓ_yes / ℓ_no, defined only for ℓ_no > 0.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    Raw,
    LogProb,
    /// The backend had no logits; the key is +1 for a Yes reply, −1 otherwise.
    Text,
    /// The candidate never rendered; the key is −∞.
    BuildFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub logit_yes: Option<f64>,
    pub logit_no: Option<f64>,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub ranking_key: f64,
    pub paper_ratio: Option<f64>,
    pub mode: ScoreMode,
    pub function: ScoringFunction,
}

impl QualityScore {
    pub fn from_logits(yes: f64, no: f64, function: ScoringFunction, mode: ScoreMode) -> Self {
        let ratio = (no > 0.0).then(|| yes / no);
        let ranking_key = match function {
            ScoringFunction::Difference => yes - no,
            // Undefined ratios rank below every defined one but above build failures.
            ScoringFunction::Ratio => ratio.unwrap_or(f64::MIN),
        };
        Self { logit_yes: Some(yes), logit_no: Some(no), ranking_key, paper_ratio: ratio, mode, function }
    }

    pub fn from_text_verdict(yes: bool, function: ScoringFunction) -> Self {
        Self {
            logit_yes: None,
            logit_no: None,
            ranking_key: if yes { 1.0 } else { -1.0 },
            paper_ratio: None,
            mode: ScoreMode::Text,
            function,
        }
    }

    pub fn build_failed(function: ScoringFunction) -> Self {
        Self {
            logit_yes: None,
            logit_no: None,
            ranking_key: f64::NEG_INFINITY,
            paper_ratio: None,
            mode: ScoreMode::BuildFailed,
            function,
        }
    }

    pub fn is_scoreable(&self) -> bool {
        self.mode != ScoreMode::BuildFailed
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("invalid scoring request: {0}")]
    InvalidRequest(String),
    #[error("unreadable Yes/No reply: {0:?}")]
    UnreadableVerdict(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringOptions {
    pub model: String,
    pub function: ScoringFunction,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self { model: "scorer".into(), function: ScoringFunction::Difference }
    }
}

pub fn build_scoring_prompt(entry: &ModulePlanEntry, screenshot: Option<&Screenshot>, model: &str) -> Result<ModelRequest, ScoreError> {
    let shot = screenshot.ok_or_else(|| ScoreError::InvalidRequest("a screenshot is required".into()))?;
    let mut p = String::new();
    p.push_str("The attached image is a screenshot of one rendered block of an interactive explainer website.\n\n");
    p.push_str(&format!("Block: {}\n", entry.title));
    p.push_str(&format!("Mechanism: {}\n", entry.mechanism));
    p.push_str("Controls it must show:\n");
    for c in &entry.controls {
        p.push_str(&format!("- {} `{}` ({})\n", c.kind, c.parameter, c.range));
    }
    p.push_str("Outputs it must show:\n");
    for o in &entry.outputs {
        p.push_str(&format!("- {o}\n"));
    }
    p.push_str(
        "\nDoes the screenshot show a working, fully drawn version of this block, with every control present and \
         every output visible with real content? Answer with one word: Yes or No.\n",
    );
    Ok(ModelRequest::new(Role::Scorer, model, p)
        .with_sampling(Sampling::greedy(1))
        .with_image(ImageAttachment::png(shot.label.clone(), shot.png.to_vec()))
        .with_targets([YES, NO]))
}

/// Reads a leading Yes/No from free text.
pub fn parse_verdict(text: &str) -> Option<bool> {
    let word: String = text.trim_start().chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    match word.to_ascii_lowercase().as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Scores a request carrying Yes/No targets. Falls back to a text verdict
/// when the backend reports no logits.
pub fn yes_no_score(req: &ModelRequest, gateway: &Gateway, function: ScoringFunction) -> Result<QualityScore, ScoreError> {
    let targets = [YES.to_string(), NO.to_string()];
    match gateway.logits_for_tokens(req, &targets) {
        Ok(l) => {
            let mode = match l.mode {
                LogitMode::Raw => ScoreMode::Raw,
                LogitMode::LogProb => ScoreMode::LogProb,
            };
            let yes = l.get(YES).expect("resolved targets are complete");
            let no = l.get(NO).expect("resolved targets are complete");
            Ok(QualityScore::from_logits(yes, no, function, mode))
        }
        Err(GatewayError::LogitsUnsupported(who)) => {
            tracing::warn!(backend = %who, "no logits available, scoring from a text verdict");
            let reply = gateway.complete(req)?;
            let verdict = parse_verdict(&reply).ok_or(ScoreError::UnreadableVerdict(reply))?;
            Ok(QualityScore::from_text_verdict(verdict, function))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn score(entry: &ModulePlanEntry, screenshot: Option<&Screenshot>, gateway: &Gateway, options: &ScoringOptions) -> Result<QualityScore, ScoreError> {
    let req = build_scoring_prompt(entry, screenshot, &options.model)?;
    yes_no_score(&req, gateway, options.function)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub variant: u32,
    pub score: QualityScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub module_id: u32,
    pub scores: Vec<VariantScore>,
    /// `None` when every candidate failed to build.
    pub selected: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("module {0} has no candidates")]
    NoCandidates(u32),
}

/// Argmax over ranking keys; ties go to the lowest variant index.
pub fn select_best(module_id: u32, scores: &[VariantScore]) -> Result<SelectionRecord, SelectError> {
    if scores.is_empty() {
        return Err(SelectError::NoCandidates(module_id));
    }
    let mut ordered = scores.to_vec();
    ordered.sort_by_key(|s| s.variant);
    let best = ordered
        .iter()
        .filter(|s| s.score.is_scoreable())
        .map(|s| s.score.ranking_key)
        .fold(None, |acc: Option<f64>, k| Some(acc.map_or(k, |a| a.max(k))));
    let (selected, tie_break) = match best {
        None => (None, None),
        Some(best) => {
            let tied: Vec<u32> = ordered
                .iter()
                .filter(|s| s.score.is_scoreable() && s.score.ranking_key == best)
                .map(|s| s.variant)
                .collect();
            let note = (tied.len() > 1).then(|| format!("variants {tied:?} tie at {best}; lowest index kept"));
            (tied.first().copied(), note)
        }
    };
    Ok(SelectionRecord { module_id, scores: ordered, selected, tie_break })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FixtureResponse, Operation};
    use proptest::prelude::*;

    fn entry() -> ModulePlanEntry {
        let spec = crate::plan::parse_spec(
            &std::fs::read_to_string(crate::testkit::assets_dir().join("benchmark/specs/ML-GD.spec")).unwrap(),
        )
        .unwrap();
        spec.module(2).unwrap().clone()
    }

    fn shot() -> Screenshot {
        Screenshot::from_rgb(&image::RgbImage::from_pixel(8, 6, image::Rgb([10, 20, 30])), "landing")
    }

    fn vs(keys: &[f64]) -> Vec<VariantScore> {
        keys.iter()
            .zip(1..)
            .map(|(&k, variant)| VariantScore { variant, score: QualityScore::from_logits(k, 0.0, ScoringFunction::Difference, ScoreMode::Raw) })
            .collect()
    }

    #[test]
    fn arithmetic_examples() {
        let s = QualityScore::from_logits(2.0, 1.0, ScoringFunction::Difference, ScoreMode::Raw);
        assert_eq!((s.paper_ratio, s.ranking_key), (Some(2.0), 1.0));
        let s = QualityScore::from_logits(3.5, 3.5, ScoringFunction::Difference, ScoreMode::Raw);
        assert_eq!((s.paper_ratio, s.ranking_key), (Some(1.0), 0.0));
        let s = QualityScore::from_logits(0.5, -0.2, ScoringFunction::Difference, ScoreMode::Raw);
        assert_eq!(s.paper_ratio, None);
        assert!((s.ranking_key - 0.7).abs() < 1e-12);
        let r = QualityScore::from_logits(0.5, -0.2, ScoringFunction::Ratio, ScoreMode::Raw);
        assert_eq!(r.ranking_key, f64::MIN);
        assert!(r.ranking_key > QualityScore::build_failed(ScoringFunction::Ratio).ranking_key);
    }

    #[test]
    fn prompt_quotes_the_mechanism_and_is_pure() {
        let e = entry();
        let req = build_scoring_prompt(&e, Some(&shot()), "scorer").unwrap();
        assert!(req.prompt.contains(&e.mechanism));
        assert_eq!(req.images.len(), 1);
        assert_eq!(req.targets, vec!["Yes".to_string(), "No".to_string()]);
        assert_eq!(req, build_scoring_prompt(&e, Some(&shot()), "scorer").unwrap());
        assert!(matches!(build_scoring_prompt(&e, None, "scorer"), Err(ScoreError::InvalidRequest(_))));
    }

    #[test]
    fn scores_from_replayed_logits_and_degraded_text() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path());
        let e = entry();
        let req = build_scoring_prompt(&e, Some(&shot()), "scorer").unwrap();
        let values = [(" Yes".to_string(), 2.0), (" No".to_string(), 1.0)].into_iter().collect();
        gw.record(Operation::Logits, &req, FixtureResponse::Logits { mode: LogitMode::Raw, values }).unwrap();
        let s = score(&e, Some(&shot()), &gw, &ScoringOptions::default()).unwrap();
        assert_eq!((s.logit_yes, s.logit_no, s.ranking_key), (Some(2.0), Some(1.0), 1.0));

        let other = build_scoring_prompt(&e, Some(&shot()), "text-only").unwrap();
        gw.record(Operation::Logits, &other, FixtureResponse::LogitsUnsupported("text-only".into())).unwrap();
        gw.record(Operation::Completion, &other, FixtureResponse::Text("No, the chart is empty.".into())).unwrap();
        let opts = ScoringOptions { model: "text-only".into(), ..ScoringOptions::default() };
        let s = score(&e, Some(&shot()), &gw, &opts).unwrap();
        assert_eq!((s.mode, s.ranking_key), (ScoreMode::Text, -1.0));
    }

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict(" Yes."), Some(true));
        assert_eq!(parse_verdict("no"), Some(false));
        assert_eq!(parse_verdict("Nope"), None);
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_best(1, &vs(&[-0.5, 1.2, 0.3])).unwrap().selected, Some(2));
        let tie = select_best(1, &vs(&[0.7, 0.7])).unwrap();
        assert_eq!(tie.selected, Some(1));
        assert!(tie.tie_break.is_some());
        let failed: Vec<_> = (1..=3).map(|v| VariantScore { variant: v, score: QualityScore::build_failed(ScoringFunction::Difference) }).collect();
        assert_eq!(select_best(1, &failed).unwrap().selected, None);
        assert_eq!(select_best(4, &[]), Err(SelectError::NoCandidates(4)));
        let mut mixed = vs(&[-3.0]);
        mixed.push(VariantScore { variant: 2, score: QualityScore::build_failed(ScoringFunction::Difference) });
        assert_eq!(select_best(1, &mixed).unwrap().selected, Some(1));
    }

    #[test]
    fn infinite_key_round_trips_through_json() {
        let s = QualityScore::build_failed(ScoringFunction::Difference);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"-inf\""));
        assert_eq!(serde_json::from_str::<QualityScore>(&json).unwrap(), s);
    }

    proptest! {
        #[test]
        fn difference_key_is_shift_invariant(y in -50.0f64..50.0, n in -50.0f64..50.0, c in -50.0f64..50.0) {
            let a = QualityScore::from_logits(y, n, ScoringFunction::Difference, ScoreMode::Raw).ranking_key;
            let b = QualityScore::from_logits(y + c, n + c, ScoringFunction::Difference, ScoreMode::Raw).ranking_key;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn ratio_defined_exactly_for_positive_no(y in -5.0f64..5.0, n in -5.0f64..5.0) {
            let s = QualityScore::from_logits(y, n, ScoringFunction::Difference, ScoreMode::Raw);
            prop_assert_eq!(s.paper_ratio.is_some(), n > 0.0);
        }
    }
}
