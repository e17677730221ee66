//! Engine-neutral rendering: a browser engine opens pages, a [`Renderer`]
//! pairs each page with its own static server and a pooled session slot.

use std::path::Path;
use std::sync::Arc;

use super::serve::StaticServer;
use super::{Action, InteractionTrajectory, InteractiveElement, RenderError, Screenshot, TrajectoryStep, Viewport};
use crate::diff::pixel_diff;
use crate::sync::{Limiter, Permit};

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub viewport: Viewport,
    /// Quiet period after network idle before capture.
    pub settle_ms: u64,
    pub load_timeout_ms: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { viewport: Viewport::default(), settle_ms: 1500, load_timeout_ms: 30_000 }
    }
}

pub trait BrowserEngine: Send + Sync {
    fn name(&self) -> &str;

    /// Loads `url` and waits for the settle condition.
    fn open(&self, url: &str, options: &RenderOptions) -> Result<Box<dyn Page>, RenderError>;
}

pub trait Page: Send {
    fn screenshot(&mut self, label: &str) -> Result<Screenshot, RenderError>;

    /// Visible interactive elements, deduplicated by locator, in document order.
    fn elements(&mut self) -> Result<Vec<InteractiveElement>, RenderError>;

    /// Performs `action`; `Ok(false)` when its locator matches nothing.
    fn perform(&mut self, action: &Action) -> Result<bool, RenderError>;

    fn console_errors(&self) -> Vec<String>;
}

pub struct Renderer {
    engine: Arc<dyn BrowserEngine>,
    pool: Limiter,
    options: RenderOptions,
}

impl std::fmt::Debug for Renderer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Renderer")
            .field("engine", &self.engine.name())
            .field("sessions", &self.pool.capacity())
            .field("options", &self.options)
            .finish()
    }
}

impl Renderer {
    pub fn new(engine: Arc<dyn BrowserEngine>, options: RenderOptions, sessions: usize) -> Self {
        Self { engine, pool: Limiter::new(sessions), options }
    }

    pub fn engine_name(&self) -> &str {
        self.engine.name()
    }

    pub fn options(&self) -> &RenderOptions {
        &self.options
    }

    pub fn sessions_in_use(&self) -> usize {
        self.pool.in_use()
    }

    /// Serves `site` and opens its entry page. Blocks while the pool is full.
    pub fn session(&self, site: &Path) -> Result<Session<'_>, RenderError> {
        if !site.join("index.html").is_file() {
            return Err(RenderError::MissingEntry(site.display().to_string()));
        }
        let permit = self.pool.acquire();
        let server = StaticServer::start(site).map_err(|e| RenderError::RendererCrash(format!("static server: {e}")))?;
        let page = self.engine.open(server.url(), &self.options)?;
        Ok(Session { page, viewport: self.options.viewport, _server: server, _permit: permit })
    }

    pub fn render_screenshot(&self, site: &Path, label: &str) -> Result<(Screenshot, Vec<String>), RenderError> {
        let mut session = self.session(site)?;
        let shot = session.screenshot(label)?;
        Ok((shot, session.console_errors()))
    }

    pub fn extract_interactive_elements(&self, site: &Path) -> Result<Vec<InteractiveElement>, RenderError> {
        self.session(site)?.elements()
    }

    pub fn execute_actions(&self, site: &Path, actions: &[Action]) -> Result<InteractionTrajectory, RenderError> {
        let mut session = self.session(site)?;
        let mut trajectory = InteractionTrajectory::default();
        for action in actions {
            trajectory.steps.push(session.step(action, trajectory.steps.len())?);
        }
        Ok(trajectory)
    }
}

pub struct Session<'a> {
    page: Box<dyn Page>,
    viewport: Viewport,
    _server: StaticServer,
    _permit: Permit<'a>,
}

impl Session<'_> {
    pub fn screenshot(&mut self, label: &str) -> Result<Screenshot, RenderError> {
        let shot = self.page.screenshot(label)?;
        if shot.viewport() != self.viewport {
            return Err(RenderError::ViewportMismatch { expected: self.viewport, actual: shot.viewport() });
        }
        Ok(shot)
    }

    pub fn elements(&mut self) -> Result<Vec<InteractiveElement>, RenderError> {
        self.page.elements()
    }

    pub fn console_errors(&self) -> Vec<String> {
        self.page.console_errors()
    }

    /// Captures before and after `action`. Unresolved targets leave the page
    /// untouched and record a zero diff against a repeated pre-capture.
    pub fn step(&mut self, action: &Action, index: usize) -> Result<TrajectoryStep, RenderError> {
        let pre = self.screenshot(&format!("step-{index:03}-pre"))?;
        let target = self.page.elements()?.into_iter().find(|e| e.locator == action.locator);
        let resolved = self.page.perform(action)?;
        let (post, diff) = if resolved {
            let post = self.screenshot(&format!("step-{index:03}-post"))?;
            let diff = pixel_diff(&pre.to_rgb(), &post.to_rgb()).map_err(|e| RenderError::RendererCrash(e.to_string()))?;
            (post, diff)
        } else {
            let mut post = pre.clone();
            post.label = format!("step-{index:03}-post");
            (post, 0.0)
        };
        Ok(TrajectoryStep { action: action.clone(), target, resolved, pre, post, diff })
    }
}
