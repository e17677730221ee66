//! Compile, serve, render and interact: everything between a source unit and
//! the screenshots the scorer and evaluator consume.

mod build;
pub mod cdp;
mod engine;
pub mod raster;
mod serve;
mod trajectory;

use std::fmt;
use std::io::Cursor;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::build::{check_tag_balance, compile, BuildError, BuildOptions, BuildResult, BuildStatus, Scaffold, ScaffoldConfig, TemplateKind};
pub use self::engine::{BrowserEngine, Page, RenderOptions, Renderer, Session};
pub use self::serve::StaticServer;
pub use self::trajectory::{read_trajectory, write_trajectory};
pub use crate::plan::ControlKind as ElementKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Viewport {
    pub width: u32,
    pub height: u32,
}

impl Default for Viewport {
    fn default() -> Self {
        Self { width: 1024, height: 768 }
    }
}

impl fmt::Display for Viewport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("page did not load within {0} ms")]
    PageLoadTimeout(u64),
    #[error("renderer crashed: {0}")]
    RendererCrash(String),
    #[error("screenshot is {actual}, expected {expected}")]
    ViewportMismatch { expected: Viewport, actual: Viewport },
    #[error("site has no entry page at {0}")]
    MissingEntry(String),
}

/// A lossless capture of the viewport.
#[derive(Clone, PartialEq, Eq)]
pub struct Screenshot {
    pub png: Arc<[u8]>,
    pub width: u32,
    pub height: u32,
    pub captured_ms: u64,
    pub label: String,
}

impl fmt::Debug for Screenshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Screenshot")
            .field("label", &self.label)
            .field("size", &format_args!("{}x{}", self.width, self.height))
            .field("bytes", &self.png.len())
            .finish()
    }
}

impl Screenshot {
    pub fn from_rgb(image: &RgbImage, label: impl Into<String>) -> Self {
        let mut png = Vec::new();
        image
            .write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
            .expect("PNG encoding into memory cannot fail");
        Self {
            png: png.into(),
            width: image.width(),
            height: image.height(),
            captured_ms: crate::gateway::now_ms() as u64,
            label: label.into(),
        }
    }

    pub fn from_png(png: Vec<u8>, label: impl Into<String>) -> image::ImageResult<Self> {
        let (width, height) = image::load_from_memory_with_format(&png, image::ImageFormat::Png)?.to_rgb8().dimensions();
        Ok(Self { png: png.into(), width, height, captured_ms: crate::gateway::now_ms() as u64, label: label.into() })
    }

    pub fn viewport(&self) -> Viewport {
        Viewport { width: self.width, height: self.height }
    }

    pub fn to_rgb(&self) -> RgbImage {
        image::load_from_memory_with_format(&self.png, image::ImageFormat::Png)
            .expect("screenshots hold valid PNG")
            .to_rgb8()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }
}

/// A rendered element that accepts user input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractiveElement {
    pub kind: ElementKind,
    /// CSS selector resolving to exactly this element.
    pub locator: String,
    /// Nearest enclosing `data-module` value.
    pub module: Option<String>,
    pub label: String,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ActionKind {
    Click,
    SetValue { value: String },
    Select { option: String },
    Drag { dx: f64, dy: f64 },
    Type { text: String },
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Click => f.write_str("click"),
            ActionKind::SetValue { value } => write!(f, "set {value}"),
            ActionKind::Select { option } => write!(f, "select {option}"),
            ActionKind::Drag { dx, dy } => write!(f, "drag ({dx}, {dy})"),
            ActionKind::Type { text } => write!(f, "type {text:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub locator: String,
}

impl Action {
    pub fn click(locator: impl Into<String>) -> Self {
        Self { kind: ActionKind::Click, locator: locator.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub action: Action,
    /// Snapshot of the target at action time; `None` when unresolved.
    pub target: Option<InteractiveElement>,
    pub resolved: bool,
    pub pre: Screenshot,
    pub post: Screenshot,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionTrajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl InteractionTrajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One frame per step: the state after the action.
    pub fn frames(&self) -> Vec<&Screenshot> {
        self.steps.iter().map(|s| &s.post).collect()
    }
}

/// Indices of the frames kept for a budget: all of them when the budget
/// covers the trajectory, otherwise an evenly strided subset that keeps the
/// first and last frame.
pub fn sample_indices(available: usize, budget: usize) -> Vec<usize> {
    match (available, budget) {
        (_, 0) | (0, _) => Vec::new(),
        (n, b) if b >= n => (0..n).collect(),
        (_, 1) => vec![0],
        (n, b) => (0..b).map(|i| ((i * (n - 1)) as f64 / (b - 1) as f64).round() as usize).collect(),
    }
}

pub fn sample_screenshots(trajectory: &InteractionTrajectory, budget: usize) -> Vec<Screenshot> {
    let frames = trajectory.frames();
    sample_indices(frames.len(), budget).into_iter().map(|i| frames[i].clone()).collect()
}
