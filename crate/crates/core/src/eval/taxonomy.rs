//! Rule-first failure classification.
//!
//! Rules fire in a fixed order and the first one wins:
//! navigation-stuck, visual-grounding, prompt-misalignment, hallucination.
//! Model judgments are only requested for rules that are reached.

use serde::{Deserialize, Serialize};

use super::checklist::ChecklistResult;
use super::probe::ProbeReport;
use super::Judge;
use crate::harness::{sample_screenshots, InteractionTrajectory, Screenshot};
use crate::plan::GenerationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCategory {
    PromptMisalignment,
    VisualGrounding,
    Hallucination,
    NavigationStuck,
    None,
}

impl FailureCategory {
    pub const ALL: [FailureCategory; 5] = [
        FailureCategory::PromptMisalignment,
        FailureCategory::VisualGrounding,
        FailureCategory::Hallucination,
        FailureCategory::NavigationStuck,
        FailureCategory::None,
    ];
}

/// Which rules fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CascadeSignals {
    pub navigation_stuck: bool,
    pub visual_grounding: bool,
    pub prompt_misalignment: bool,
    pub hallucination: bool,
}

pub fn classify(s: &CascadeSignals) -> FailureCategory {
    if s.navigation_stuck {
        FailureCategory::NavigationStuck
    } else if s.visual_grounding {
        FailureCategory::VisualGrounding
    } else if s.prompt_misalignment {
        FailureCategory::PromptMisalignment
    } else if s.hallucination {
        FailureCategory::Hallucination
    } else {
        FailureCategory::None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOptions {
    /// Checklist completion below this marks prompt misalignment.
    pub misalignment_floor: f64,
    /// Trajectory frames shown to the visual-grounding judge, besides the landing capture.
    pub frames: usize,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self { misalignment_floor: 0.5, frames: 4 }
    }
}

pub struct FailureInputs<'a> {
    pub spec: &'a GenerationSpec,
    pub checklist: Option<&'a ChecklistResult>,
    pub probe: &'a ProbeReport,
    pub trajectory: &'a InteractionTrajectory,
    pub landing: Option<&'a Screenshot>,
    /// The merged site built and rendered.
    pub renders_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureAnalysis {
    pub category: FailureCategory,
    pub signals: CascadeSignals,
    /// Judgments that could not be obtained and counted as No.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn grounding_prompt(spec: &GenerationSpec) -> String {
    format!(
        "These screenshots come from an interactive website about: {}.\n\
         Do any of them show placeholder text, empty chart or canvas areas, blank panels, overlapping elements or \
         other visibly broken rendering? Answer with one word: Yes or No.\n",
        spec.topic
    )
}

pub fn hallucination_prompt(spec: &GenerationSpec, extras: &[&str]) -> String {
    let mut p = format!("An interactive website about \"{}\" was planned with these modules:\n", spec.topic);
    for m in &spec.modules {
        p.push_str(&format!("- {}: {}\n", m.title, m.mechanism));
    }
    p.push_str("\nThe generated site also contains these modules, which match no required item:\n");
    for e in extras {
        p.push_str(&format!("- {e}\n"));
    }
    p.push_str("\nDo these extra modules present content that is not part of the plan or not grounded in the topic? Answer with one word: Yes or No.\n");
    p
}

pub fn classify_failure(inputs: &FailureInputs<'_>, judge: &Judge<'_>, options: &CascadeOptions) -> FailureAnalysis {
    let mut signals = CascadeSignals::default();
    let mut notes = Vec::new();
    let mut ask = |what: &str, prompt: String, images: &[Screenshot]| match judge.ask(prompt, images) {
        Ok(v) => v,
        Err(e) => {
            notes.push(format!("{what} judgment unavailable: {e}"));
            false
        }
    };

    let probe = inputs.probe;
    signals.navigation_stuck = probe.elements_probed > 0 && (probe.failure_ratio >= 1.0 || probe.all_near_zero);
    if !signals.navigation_stuck && inputs.renders_ok {
        let mut shots: Vec<Screenshot> = inputs.landing.cloned().into_iter().collect();
        shots.extend(sample_screenshots(inputs.trajectory, options.frames));
        if !shots.is_empty() {
            signals.visual_grounding = ask("visual-grounding", grounding_prompt(inputs.spec), &shots);
        }
    }
    if let Some(c) = inputs.checklist {
        signals.prompt_misalignment = inputs.renders_ok && c.completion_rate < options.misalignment_floor;
        let reached = !(signals.navigation_stuck || signals.visual_grounding || signals.prompt_misalignment);
        if reached && !c.unmatched_descriptions.is_empty() {
            let extras: Vec<&str> = c.unmatched_descriptions.iter().map(|&i| c.descriptions[i].text.as_str()).collect();
            signals.hallucination = ask("hallucination", hallucination_prompt(inputs.spec, &extras), &[]);
        }
    }
    FailureAnalysis { category: classify(&signals), signals, notes }
}
