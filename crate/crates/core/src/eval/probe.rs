//! Seeded random interaction with a rendered site.
//!
//! Each step draws one element uniformly from the extracted list, derives an
//! action for its kind from the element's current state, and records the
//! before/after capture. An element counts as working when any of its probes
//! changed the frame by more than ε.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::diff::DEFAULT_EPSILON;
use crate::harness::raster::behavior::format_number;
use crate::harness::{Action, ActionKind, ElementKind, InteractionTrajectory, InteractiveElement, Renderer};

pub const PROBE_TEXT: &str = "probe";
pub const DRAG_DELTA: (f64, f64) = (40.0, 25.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub seed: u64,
    /// Steps to take; `None` means twice the element count.
    pub budget: Option<usize>,
    pub epsilon: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { seed: 0, budget: None, epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementVerdict {
    pub locator: String,
    pub kind: ElementKind,
    pub module: Option<String>,
    pub probes: usize,
    pub changed: bool,
    pub max_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleRollup {
    pub elements: usize,
    pub failed: usize,
    pub failure_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub budget: usize,
    pub epsilon: f64,
    /// Elements drawn at least once, in extraction order.
    pub verdicts: Vec<ElementVerdict>,
    pub elements_probed: usize,
    /// Probed elements that never changed the frame, over elements probed.
    pub failure_ratio: f64,
    /// Individual probes without a visible change, over all probes.
    pub probe_failure_ratio: f64,
    /// Same ratio grouped by owning module; unattributed elements under "-".
    pub per_module: BTreeMap<String, ModuleRollup>,
    /// Every step's diff was at most ε (false when no step ran).
    pub all_near_zero: bool,
}

/// Derives the action for `el` given its current state.
pub fn synthesize_action(el: &InteractiveElement, rng: &mut ChaCha8Rng) -> Action {
    let kind = match el.kind {
        ElementKind::Button | ElementKind::Toggle => ActionKind::Click,
        ElementKind::Slider => ActionKind::SetValue { value: slider_value(el, rng) },
        ElementKind::Dropdown => {
            let others: Vec<&String> = el.options.iter().filter(|o| Some(*o) != el.value.as_ref()).collect();
            match others.choose(rng) {
                Some(o) => ActionKind::Select { option: (*o).clone() },
                None => ActionKind::Select { option: el.value.clone().unwrap_or_default() },
            }
        }
        ElementKind::DragSurface => ActionKind::Drag { dx: DRAG_DELTA.0, dy: DRAG_DELTA.1 },
        ElementKind::TextInput => ActionKind::Type { text: PROBE_TEXT.into() },
    };
    Action { kind, locator: el.locator.clone() }
}

/// A value in `[min, max]` different from the current one when the range allows.
fn slider_value(el: &InteractiveElement, rng: &mut ChaCha8Rng) -> String {
    let (min, max) = (el.min.unwrap_or(0.0), el.max.unwrap_or(100.0));
    let current = el.value.as_deref().and_then(|v| v.parse::<f64>().ok());
    // NaN bounds fall here too.
    if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return format_number(min);
    }
    if min.fract() == 0.0 && max.fract() == 0.0 && max - min <= 1e6 {
        let (lo, hi) = (min as i64, max as i64);
        let choices: Vec<i64> = (lo..=hi).filter(|v| Some(*v as f64) != current).collect();
        return format_number(*choices.choose(rng).unwrap_or(&lo) as f64);
    }
    loop {
        let v = (min + rng.gen::<f64>() * (max - min) * 1000.0).round() / 1000.0;
        let v = v.clamp(min, max);
        if Some(v) != current {
            return format_number(v);
        }
    }
}

pub fn probe(
    renderer: &Renderer,
    site: &Path,
    elements: &[InteractiveElement],
    options: &ProbeOptions,
) -> Result<(ProbeReport, InteractionTrajectory), EvalError> {
    let budget = options.budget.unwrap_or(2 * elements.len());
    if options.budget == Some(0) {
        return Err(EvalError::InvalidRequest("probe budget must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut trajectory = InteractionTrajectory::default();
    let mut stats: Vec<(usize, f64)> = vec![(0, 0.0); elements.len()];
    if !elements.is_empty() {
        let mut session = renderer.session(site)?;
        for index in 0..budget {
            let pick = rng.gen_range(0..elements.len());
            let chosen = &elements[pick];
            let live = session.elements()?.into_iter().find(|e| e.locator == chosen.locator);
            let action = synthesize_action(live.as_ref().unwrap_or(chosen), &mut rng);
            let step = session.step(&action, index)?;
            stats[pick].0 += 1;
            stats[pick].1 = stats[pick].1.max(step.diff);
            trajectory.steps.push(step);
        }
    }
    Ok((report(elements, &stats, &trajectory, budget, options), trajectory))
}

fn report(elements: &[InteractiveElement], stats: &[(usize, f64)], t: &InteractionTrajectory, budget: usize, options: &ProbeOptions) -> ProbeReport {
    let verdicts: Vec<ElementVerdict> = elements
        .iter()
        .zip(stats)
        .filter(|(_, (n, _))| *n > 0)
        .map(|(el, &(probes, max_diff))| ElementVerdict {
            locator: el.locator.clone(),
            kind: el.kind,
            module: el.module.clone(),
            probes,
            changed: max_diff > options.epsilon,
            max_diff,
        })
        .collect();
    let ratio = |failed: usize, total: usize| if total == 0 { 0.0 } else { failed as f64 / total as f64 };
    let mut per_module: BTreeMap<String, ModuleRollup> = BTreeMap::new();
    for v in &verdicts {
        let r = per_module
            .entry(v.module.clone().unwrap_or_else(|| "-".into()))
            .or_insert(ModuleRollup { elements: 0, failed: 0, failure_ratio: 0.0 });
        r.elements += 1;
        r.failed += usize::from(!v.changed);
    }
    for r in per_module.values_mut() {
        r.failure_ratio = ratio(r.failed, r.elements);
    }
    let failed = verdicts.iter().filter(|v| !v.changed).count();
    let quiet = t.steps.iter().filter(|s| s.diff <= options.epsilon).count();
    ProbeReport {
        seed: options.seed,
        budget,
        epsilon: options.epsilon,
        elements_probed: verdicts.len(),
        failure_ratio: ratio(failed, verdicts.len()),
        probe_failure_ratio: ratio(quiet, t.len()),
        verdicts,
        per_module,
        all_near_zero: !t.is_empty() && quiet == t.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{compile, BuildOptions, TemplateKind};
    use crate::testkit::{fixture_html, raster_renderer, static_scaffold};

    fn site(name: &str, dir: &Path) -> std::path::PathBuf {
        compile(&fixture_html(name), &static_scaffold(), TemplateKind::BlockHost, &dir.join("site"), &BuildOptions::default())
            .unwrap()
            .site_dir
            .unwrap()
    }

    #[test]
    fn zero_budget_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let s = site("probe-app.html", dir.path());
        let r = raster_renderer();
        let els = r.extract_interactive_elements(&s).unwrap();
        let opts = ProbeOptions { budget: Some(0), ..ProbeOptions::default() };
        assert!(matches!(probe(&r, &s, &els, &opts), Err(EvalError::InvalidRequest(_))));
    }

    #[test]
    fn probe_app_has_two_dead_elements() {
        let dir = tempfile::tempdir().unwrap();
        let s = site("probe-app.html", dir.path());
        let r = raster_renderer();
        let els = r.extract_interactive_elements(&s).unwrap();
        assert_eq!(els.len(), 10);
        let opts = ProbeOptions { seed: 11, budget: Some(60), ..ProbeOptions::default() };
        let (rep, t) = probe(&r, &s, &els, &opts).unwrap();
        assert_eq!(t.len(), 60);
        assert_eq!(rep.elements_probed, 10);
        let dead: Vec<&str> = rep.verdicts.iter().filter(|v| !v.changed).map(|v| v.locator.as_str()).collect();
        assert_eq!(dead, ["#inert", "#same"]);
        assert_eq!(rep.failure_ratio, 0.2);
        assert!(!rep.all_near_zero);
        assert_eq!(rep.per_module["1"].elements, 10);
    }

    #[test]
    fn default_budget_is_twice_the_element_count() {
        let dir = tempfile::tempdir().unwrap();
        let s = site("counter-app.html", dir.path());
        let r = raster_renderer();
        let els = r.extract_interactive_elements(&s).unwrap();
        let (rep, t) = probe(&r, &s, &els, &ProbeOptions::default()).unwrap();
        assert_eq!((rep.budget, t.len()), (10, 10));
        let (none, t) = probe(&r, &s, &[], &ProbeOptions::default()).unwrap();
        assert_eq!((none.elements_probed, none.failure_ratio, t.len()), (0, 0.0, 0));
    }

    #[test]
    fn same_seed_same_actions() {
        let dir = tempfile::tempdir().unwrap();
        let s = site("probe-app.html", dir.path());
        let r = raster_renderer();
        let els = r.extract_interactive_elements(&s).unwrap();
        let opts = ProbeOptions { seed: 5, budget: Some(25), ..ProbeOptions::default() };
        let (a, ta) = probe(&r, &s, &els, &opts).unwrap();
        let (b, tb) = probe(&r, &s, &els, &opts).unwrap();
        let actions = |t: &InteractionTrajectory| t.steps.iter().map(|s| s.action.clone()).collect::<Vec<_>>();
        assert_eq!(actions(&ta), actions(&tb));
        assert_eq!(a, b);
        let (_, tc) = probe(&r, &s, &els, &ProbeOptions { seed: 6, ..opts }).unwrap();
        assert_ne!(actions(&ta), actions(&tc));
    }

    #[test]
    fn slider_values_stay_in_range_and_move() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let el = InteractiveElement {
            kind: ElementKind::Slider,
            locator: "#s".into(),
            module: None,
            label: "s".into(),
            rect: crate::harness::Rect { x: 0.0, y: 0.0, width: 1.0, height: 1.0 },
            value: Some("0.5".into()),
            min: Some(0.001),
            max: Some(1.0),
            options: vec![],
        };
        for _ in 0..200 {
            let ActionKind::SetValue { value } = synthesize_action(&el, &mut rng).kind else { panic!() };
            let v: f64 = value.parse().unwrap();
            assert!((0.001..=1.0).contains(&v) && v != 0.5);
        }
    }
}
