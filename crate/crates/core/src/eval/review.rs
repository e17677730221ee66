//! Trajectory review: a vision judge sees a budgeted sample of trajectory
//! frames and answers whether the site works as planned.

use serde::{Deserialize, Serialize};

use super::{EvalError, Judge};
use crate::gateway::{ModelRequest, Role};
use crate::harness::{sample_screenshots, InteractionTrajectory, Screenshot};
use crate::plan::GenerationSpec;
use crate::scorer::{yes_no_score, QualityScore, ScoreMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualReview {
    /// `None` means the whole trajectory.
    pub budget: Option<usize>,
    pub screenshots_used: usize,
    pub score: QualityScore,
    /// Probability-like summary in [0, 1]: the logistic of the Yes/No key,
    /// or 1/0 for a text verdict.
    pub vlm_visual: f64,
}

pub fn review_prompt(spec: &GenerationSpec, frames: usize) -> String {
    let mut p = format!(
        "These {frames} screenshots were taken in order while a tester clicked through an interactive website about: {}.\n\
         The website was planned with these modules:\n",
        spec.topic
    );
    for m in &spec.modules {
        p.push_str(&format!("- {}: {}\n", m.title, m.mechanism));
    }
    p.push_str(
        "\nJudging only from the screenshots, does the website implement the planned modules and react visibly to \
         the tester's actions? Answer with one word: Yes or No.\n",
    );
    p
}

pub fn review_request(spec: &GenerationSpec, frames: &[Screenshot], judge: &Judge<'_>) -> ModelRequest {
    judge.request(Role::Prober, review_prompt(spec, frames.len()), frames)
}

pub fn review_trajectory(
    spec: &GenerationSpec,
    trajectory: &InteractionTrajectory,
    budget: Option<usize>,
    judge: &Judge<'_>,
) -> Result<VisualReview, EvalError> {
    let frames = sample_screenshots(trajectory, budget.unwrap_or(trajectory.len()));
    let score = yes_no_score(&review_request(spec, &frames, judge), judge.gateway, judge.function)?;
    let vlm_visual = match score.mode {
        ScoreMode::Text => f64::from(score.ranking_key > 0.0),
        _ => 1.0 / (1.0 + (-score.ranking_key).exp()),
    };
    Ok(VisualReview { budget, screenshots_used: frames.len(), score, vlm_visual })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::gateway::{FixtureResponse, Gateway, LogitMode, Operation};
    use crate::testkit::fake_trajectory;

    #[test]
    fn budget_caps_the_frames_shown() {
        let text = std::fs::read_to_string(crate::testkit::assets_dir().join("benchmark/specs/ML-GD.spec")).unwrap();
        let spec = crate::plan::parse_spec(&text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path());
        let judge = Judge::new(&gw, "reviewer");
        let t = fake_trajectory(8, 0.1);
        for budget in 0..=6usize {
            let frames = sample_screenshots(&t, budget);
            let values = BTreeMap::from([("Yes".into(), budget as f64), ("No".into(), 2.0)]);
            gw.record(Operation::Logits, &review_request(&spec, &frames, &judge), FixtureResponse::Logits { mode: LogitMode::Raw, values })
                .unwrap();
            let r = review_trajectory(&spec, &t, Some(budget), &judge).unwrap();
            assert_eq!(r.screenshots_used, budget.min(8));
            let expected = 1.0 / (1.0 + (2.0 - budget as f64).exp());
            assert!((r.vlm_visual - expected).abs() < 1e-12);
        }
        let frames = sample_screenshots(&t, 8);
        let values = BTreeMap::from([("Yes".into(), 0.0), ("No".into(), 0.0)]);
        gw.record(Operation::Logits, &review_request(&spec, &frames, &judge), FixtureResponse::Logits { mode: LogitMode::Raw, values }).unwrap();
        let all = review_trajectory(&spec, &t, None, &judge).unwrap();
        assert_eq!((all.screenshots_used, all.vlm_visual), (8, 0.5));
    }
}
