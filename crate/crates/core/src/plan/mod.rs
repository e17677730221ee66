//! Generation specification: the numbered Module Plan produced by the planner
//! model, its text wire layout, and its validation.

mod wire;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ModelRequest, Role};
use crate::ingest::{build_planning_prompt, PaperDocument, PlanningPromptOptions};

pub use self::wire::{parse_spec, serialize_spec, SPEC_FENCE, MODULE_FENCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    Slider,
    Button,
    Dropdown,
    DragSurface,
    Toggle,
    TextInput,
}

impl ControlKind {
    pub const ALL: [ControlKind; 6] = [
        ControlKind::Slider,
        ControlKind::Button,
        ControlKind::Dropdown,
        ControlKind::DragSurface,
        ControlKind::Toggle,
        ControlKind::TextInput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControlKind::Slider => "slider",
            ControlKind::Button => "button",
            ControlKind::Dropdown => "dropdown",
            ControlKind::DragSurface => "drag-surface",
            ControlKind::Toggle => "toggle",
            ControlKind::TextInput => "text-input",
        }
    }
}

impl fmt::Display for ControlKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControlKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        ControlKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| format!("unknown control kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub kind: ControlKind,
    pub parameter: String,
    /// Value range or option list, free text.
    pub range: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulePlanEntry {
    /// 1-based ordinal; equals the entry's position in the plan.
    pub id: u32,
    pub title: String,
    pub mechanism: String,
    pub controls: Vec<Control>,
    pub outputs: Vec<String>,
    pub narrative: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub topic: String,
    pub navigation: String,
    pub shell: String,
    pub modules: Vec<ModulePlanEntry>,
}

impl GenerationSpec {
    pub fn module(&self, id: u32) -> Option<&ModulePlanEntry> {
        self.modules.iter().find(|m| m.id == id)
    }

    pub fn module_ids(&self) -> Vec<u32> {
        self.modules.iter().map(|m| m.id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub module: Option<u32>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.module {
            Some(id) => write!(f, "module {id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every broken invariant of `spec`; empty exactly when it is valid.
pub fn validate_spec(spec: &GenerationSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |module: Option<u32>, message: String| out.push(Violation { module, message });
    if spec.topic.trim().is_empty() {
        push(None, "topic is empty".into());
    }
    if spec.modules.is_empty() {
        push(None, "plan has no modules".into());
    }
    let mut seen = BTreeSet::new();
    for (pos, m) in spec.modules.iter().enumerate() {
        let expected = pos as u32 + 1;
        if !seen.insert(m.id) {
            push(Some(m.id), "duplicate module id".into());
        } else if m.id != expected {
            push(Some(m.id), format!("ordinal {} at position {expected}", m.id));
        }
        if m.title.trim().is_empty() {
            push(Some(m.id), "title is empty".into());
        }
        if m.controls.is_empty() {
            push(Some(m.id), "no user controls".into());
        }
        if m.outputs.iter().all(|o| o.trim().is_empty()) {
            push(Some(m.id), "no visual outputs".into());
        }
        for c in &m.controls {
            if c.parameter.trim().is_empty() {
                push(Some(m.id), format!("{} control without a parameter", c.kind));
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("planner output is not a valid specification: {0}")]
    SpecParse(String),
    #[error("planner returned zero modules")]
    EmptyPlan,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

const REFORMAT_TEMPLATE: &str = "\
Your previous reply could not be used as a specification ({problem}).
Rewrite it using exactly one fenced block tagged `spec` (fields topic, navigation, shell) followed by one fenced block tagged `module` per module (fields id, title, mechanism, control, output, narrative). Control lines read `control: <kind> | <parameter> | <range>` with kind one of slider, button, dropdown, drag-surface, toggle, text-input. Module ids run 1, 2, 3, ... in order.

Previous reply:
{previous}
";

/// The follow-up request sent once when the first planner reply is unusable.
pub fn reformat_request(original: &ModelRequest, previous: &str, problem: &str) -> ModelRequest {
    let prompt = REFORMAT_TEMPLATE.replace("{problem}", problem).replace("{previous}", previous);
    ModelRequest::new(Role::Planner, original.model.clone(), prompt).with_sampling(original.sampling.clone())
}

fn parse_checked(text: &str) -> Result<GenerationSpec, PlanError> {
    let spec = parse_spec(text).map_err(PlanError::SpecParse)?;
    if spec.modules.is_empty() {
        return Err(PlanError::EmptyPlan);
    }
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        let joined = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(PlanError::SpecParse(joined));
    }
    Ok(spec)
}

/// Asks the planner for a specification. An unparseable or invalid reply gets
/// one reformat retry; a parseable plan with zero modules is final.
pub fn plan_modules(doc: &PaperDocument, gateway: &Gateway, options: &PlanningPromptOptions) -> Result<GenerationSpec, PlanError> {
    let request = build_planning_prompt(doc, options);
    let reply = gateway.complete(&request)?;
    match parse_checked(&reply) {
        Err(PlanError::SpecParse(problem)) => {
            tracing::warn!(%problem, "planner reply unusable, asking for a reformat");
            let retry = reformat_request(&request, &reply, &problem);
            parse_checked(&gateway.complete(&retry)?)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests;
