//! Evaluation of a generated site: checklist coverage, seeded interaction
//! probing, failure analysis, complexity and trajectory review.

pub mod checklist;
pub mod complexity;
pub mod describe;
pub mod probe;
pub mod review;
pub mod taxonomy;

use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ImageAttachment, ModelRequest, Role, Sampling};
use crate::harness::{RenderError, Screenshot};
use crate::scorer::{yes_no_score, QualityScore, ScoreError, ScoringFunction, NO, YES};

pub use self::checklist::{match_checklist, Checklist, ChecklistItem, ChecklistResult, ExactMatcher, ItemMatch, Matcher, ModelMatcher};
pub use self::complexity::{measure_complexity, ComplexityMetrics};
pub use self::describe::{extract_module_descriptions, marker_descriptions, Extractor, ModuleDescription};
pub use self::probe::{probe, ElementVerdict, ProbeOptions, ProbeReport};
pub use self::review::{review_trajectory, VisualReview};
pub use self::taxonomy::{classify, classify_failure, CascadeOptions, CascadeSignals, FailureAnalysis, FailureCategory, FailureInputs};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checklist has no items")]
    EmptyChecklist,
    #[error("checklist item id {0:?} repeats")]
    DuplicateItem(String),
    #[error("checklist unreadable: {0}")]
    ChecklistFormat(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Yes/No questions answered by a judge model.
#[derive(Debug, Clone)]
pub struct Judge<'a> {
    pub gateway: &'a Gateway,
    pub model: String,
    pub function: ScoringFunction,
}

impl<'a> Judge<'a> {
    pub fn new(gateway: &'a Gateway, model: impl Into<String>) -> Self {
        Self { gateway, model: model.into(), function: ScoringFunction::Difference }
    }

    pub fn request(&self, role: Role, prompt: String, images: &[Screenshot]) -> ModelRequest {
        let mut req = ModelRequest::new(role, self.model.clone(), prompt).with_sampling(Sampling::greedy(1)).with_targets([YES, NO]);
        for shot in images {
            req = req.with_image(ImageAttachment::png(shot.label.clone(), shot.png.to_vec()));
        }
        req
    }

    /// The score of a Yes answer; positive keys mean Yes.
    pub fn score(&self, prompt: String, images: &[Screenshot]) -> Result<QualityScore, EvalError> {
        Ok(yes_no_score(&self.request(Role::Judge, prompt, images), self.gateway, self.function)?)
    }

    pub fn ask(&self, prompt: String, images: &[Screenshot]) -> Result<bool, EvalError> {
        Ok(self.score(prompt, images)?.ranking_key > 0.0)
    }
}

/// Lowercase alphanumeric words joined by single spaces.
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}
