//! Source document ingestion: paged document to [`PaperDocument`], and the
//! planning prompt built from it.

mod pdf;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::pdf::parse_document;
pub use self::prompt::{build_planning_prompt, PlanningPromptOptions, PLANNING_TEMPLATE, PAPER_PLACEHOLDER, TRUNCATION_MARKER};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("unreadable document: {0}")]
    UnreadableDocument(String),
    #[error("document is encrypted")]
    EncryptedDocument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionKind {
    Abstract,
    Method,
    Other,
}

const METHOD_WORDS: &[&str] = &[
    "method", "approach", "model", "algorithm", "framework", "architecture", "design", "system", "technique",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

impl Section {
    /// Classifies by heading words; drives truncation priority.
    pub fn kind(&self) -> SectionKind {
        let h = self.heading.to_lowercase();
        if h.contains("abstract") {
            SectionKind::Abstract
        } else if METHOD_WORDS.iter().any(|w| h.contains(w)) {
            SectionKind::Method
        } else {
            SectionKind::Other
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureImage {
    pub media_type: String,
    pub width: u32,
    pub height: u32,
    pub digest: String,
    #[serde(with = "crate::serde_ext::base64_bytes")]
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub page: u32,
    pub caption: Option<String>,
    pub image: Option<FigureImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperDocument {
    pub title: String,
    /// Text between the title and the first heading (authors, affiliations).
    pub front_matter: String,
    pub sections: Vec<Section>,
    pub figures: Vec<Figure>,
    pub page_count: u32,
    /// SHA-256 of the source bytes.
    pub digest: String,
}

impl PaperDocument {
    pub fn is_empty(&self) -> bool {
        self.title.trim().is_empty() && self.sections.is_empty() && self.front_matter.trim().is_empty()
    }
}
