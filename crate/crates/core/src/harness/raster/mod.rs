//! Deterministic built-in engine: parses the served entry page, lays it out
//! in a single column and paints it with a bitmap font. Scripts are not
//! executed; interactivity comes from the declarative attributes described in
//! [`behavior`]. Identical DOM state always yields identical pixels.

pub mod behavior;
pub mod dom;
mod paint;

use std::sync::atomic::{AtomicU64, Ordering};

use self::behavior::{apply_ops, format_number, parse_ops, show_view};
use self::dom::Dom;
use self::paint::paint;
use super::engine::{BrowserEngine, Page, RenderOptions};
use super::serve::fetch_local;
use super::{Action, ActionKind, ElementKind, InteractiveElement, RenderError, Screenshot, Viewport};

pub use self::paint::SIDEBAR_WIDTH;

/// Layout boxes by node id, as painted at `viewport`.
pub fn paint_boxes(dom: &Dom, viewport: Viewport) -> std::collections::HashMap<usize, super::Rect> {
    paint(dom, viewport).boxes
}

pub const SCRIPT_UNSUPPORTED: &str = "script not executed: the raster engine has no JavaScript runtime";

#[derive(Debug, Default)]
pub struct RasterEngine {
    /// Logical clock stamped on captures so timestamps are reproducible.
    clock: AtomicU64,
}

impl RasterEngine {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BrowserEngine for RasterEngine {
    fn name(&self) -> &str {
        "raster"
    }

    fn open(&self, url: &str, options: &RenderOptions) -> Result<Box<dyn Page>, RenderError> {
        let html = fetch_local(url).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => RenderError::MissingEntry(url.to_string()),
            _ => RenderError::PageLoadTimeout(options.load_timeout_ms),
        })?;
        let base = self.clock.fetch_add(1_000_000, Ordering::Relaxed);
        Ok(Box::new(RasterPage::from_html(&html, options.viewport, base)))
    }
}

#[derive(Debug, Clone)]
pub struct RasterPage {
    dom: Dom,
    viewport: Viewport,
    console: Vec<String>,
    clock: u64,
}

impl RasterPage {
    pub fn from_html(html: &str, viewport: Viewport, clock: u64) -> Self {
        let dom = Dom::parse(html);
        let console = dom
            .elements()
            .filter(|&id| dom.tag(id) == Some("script"))
            .map(|id| match dom.attr(id, "src") {
                Some(src) => format!("{SCRIPT_UNSUPPORTED} ({src})"),
                None => SCRIPT_UNSUPPORTED.to_string(),
            })
            .collect();
        Self { dom, viewport, console, clock }
    }

    pub fn dom(&self) -> &Dom {
        &self.dom
    }

    fn kind_of(&self, id: usize) -> Option<ElementKind> {
        let dom = &self.dom;
        let tag = dom.tag(id)?;
        let input_type = || dom.attr(id, "type").unwrap_or("text").to_ascii_lowercase();
        let kind = match tag {
            "button" => ElementKind::Button,
            "select" => ElementKind::Dropdown,
            "textarea" => ElementKind::TextInput,
            "canvas" => ElementKind::DragSurface,
            "input" => match input_type().as_str() {
                "range" => ElementKind::Slider,
                "checkbox" | "radio" => ElementKind::Toggle,
                "button" | "submit" | "reset" => ElementKind::Button,
                "hidden" => return None,
                _ => ElementKind::TextInput,
            },
            _ if dom.has_attr(id, "data-drag") => ElementKind::DragSurface,
            _ if dom.has_attr(id, "data-click") => ElementKind::Button,
            "a" if dom.has_attr(id, "href") || dom.has_attr(id, "data-nav") => ElementKind::Button,
            _ => return None,
        };
        Some(kind)
    }

    fn element_ids(&self) -> Vec<(usize, ElementKind)> {
        self.dom
            .elements()
            .filter(|&id| self.dom.is_visible(id) && !self.dom.has_attr(id, "disabled"))
            .filter_map(|id| self.kind_of(id).map(|k| (id, k)))
            .collect()
    }

    fn bind(&mut self, id: usize, value: &str) {
        if let Some(target) = self.dom.attr(id, "data-bind").and_then(|t| self.dom.by_id(t)) {
            self.dom.set_text(target, value.to_string());
        }
        self.run_ops(id, "data-change");
    }

    fn run_ops(&mut self, id: usize, attr: &str) {
        if let Some(spec) = self.dom.attr(id, attr) {
            // Malformed ops are inert; the static build rejects them earlier.
            if let Ok(ops) = parse_ops(spec) {
                apply_ops(&mut self.dom, &ops);
            }
        }
    }

    fn options(&self, id: usize) -> Vec<usize> {
        self.dom.elements_under(id).filter(|&o| self.dom.tag(o) == Some("option")).collect()
    }

    fn option_value(&self, option: usize) -> String {
        self.dom
            .attr(option, "value")
            .map(str::to_string)
            .unwrap_or_else(|| self.dom.text_content(option).trim().to_string())
    }
}

impl Page for RasterPage {
    fn screenshot(&mut self, label: &str) -> Result<Screenshot, RenderError> {
        let painted = paint(&self.dom, self.viewport);
        let mut shot = Screenshot::from_rgb(&painted.image, label);
        self.clock += 1;
        shot.captured_ms = self.clock;
        Ok(shot)
    }

    fn elements(&mut self) -> Result<Vec<InteractiveElement>, RenderError> {
        let painted = paint(&self.dom, self.viewport);
        let mut out: Vec<InteractiveElement> = Vec::new();
        for (id, kind) in self.element_ids() {
            let locator = self.dom.locator(id);
            if out.iter().any(|e| e.locator == locator) {
                continue;
            }
            let dom = &self.dom;
            let text = dom.text_content(id).split_whitespace().collect::<Vec<_>>().join(" ");
            let label = [Some(text), dom.attr(id, "aria-label").map(str::to_string), dom.attr(id, "name").map(str::to_string), dom.attr(id, "id").map(str::to_string)]
                .into_iter()
                .flatten()
                .find(|s| !s.is_empty())
                .unwrap_or_else(|| dom.tag(id).unwrap_or_default().to_string());
            let options: Vec<String> = if kind == ElementKind::Dropdown {
                self.options(id).into_iter().map(|o| self.option_value(o)).collect()
            } else {
                Vec::new()
            };
            let value = match kind {
                ElementKind::Toggle => Some(if dom.has_attr(id, "checked") { "on" } else { "off" }.to_string()),
                ElementKind::Dropdown => {
                    let opts = self.options(id);
                    opts.iter().copied().find(|&o| dom.has_attr(o, "selected")).or(opts.first().copied()).map(|o| self.option_value(o))
                }
                _ => dom.attr(id, "value").map(str::to_string),
            };
            let num = |name: &str| dom.attr(id, name).and_then(|v| v.trim().parse::<f64>().ok());
            let (min, max) = match kind {
                ElementKind::Slider => (Some(num("min").unwrap_or(0.0)), Some(num("max").unwrap_or(100.0))),
                _ => (None, None),
            };
            out.push(InteractiveElement {
                kind,
                locator,
                module: dom.ancestor_attr(id, "data-module").map(str::to_string),
                label,
                rect: painted.boxes.get(&id).copied().unwrap_or(super::Rect { x: 0.0, y: 0.0, width: 0.0, height: 0.0 }),
                value,
                min,
                max,
                options,
            });
        }
        Ok(out)
    }

    fn perform(&mut self, action: &Action) -> Result<bool, RenderError> {
        let Some(id) = self.dom.resolve(&action.locator).filter(|&id| self.dom.is_visible(id)) else {
            return Ok(false);
        };
        if self.dom.has_attr(id, "disabled") {
            return Ok(true);
        }
        let kind = self.kind_of(id);
        match &action.kind {
            ActionKind::Click => match kind {
                Some(ElementKind::Toggle) => {
                    if self.dom.has_attr(id, "checked") {
                        self.dom.remove_attr(id, "checked");
                    } else {
                        self.dom.set_attr(id, "checked", "");
                    }
                    let v = if self.dom.has_attr(id, "checked") { "on" } else { "off" };
                    self.bind(id, v);
                    self.run_ops(id, "data-click");
                }
                _ => {
                    if let Some(view) = self.dom.attr(id, "data-nav").map(str::to_string) {
                        show_view(&mut self.dom, &view);
                    }
                    self.run_ops(id, "data-click");
                }
            },
            ActionKind::SetValue { value } => {
                let mut v = value.clone();
                if kind == Some(ElementKind::Slider) {
                    let num = |name: &str, d: f64| self.dom.attr(id, name).and_then(|s| s.trim().parse::<f64>().ok()).unwrap_or(d);
                    let parsed: f64 = value.trim().parse().unwrap_or(num("min", 0.0));
                    v = format_number(parsed.clamp(num("min", 0.0), num("max", 100.0)));
                }
                self.dom.set_attr(id, "value", v.clone());
                self.bind(id, &v);
            }
            ActionKind::Select { option } => {
                let opts = self.options(id);
                let Some(chosen) = opts.iter().copied().find(|&o| self.option_value(o) == *option) else {
                    return Ok(true);
                };
                for o in opts {
                    self.dom.remove_attr(o, "selected");
                }
                self.dom.set_attr(chosen, "selected", "");
                self.bind(id, option);
            }
            ActionKind::Drag { dx, dy } => {
                if kind == Some(ElementKind::DragSurface) {
                    let painted = paint(&self.dom, self.viewport);
                    let rect = painted.boxes.get(&id).copied().unwrap_or(super::Rect { x: 0.0, y: 0.0, width: 300.0, height: 150.0 });
                    if self.dom.has_attr(id, "data-drag") {
                        let cur = |n: &str, d: f64| self.dom.attr(id, n).and_then(|s| s.parse::<f64>().ok()).unwrap_or(d);
                        let x = (cur("data-x", rect.width / 2.0) + dx).clamp(6.0, (rect.width - 6.0).max(6.0));
                        let y = (cur("data-y", rect.height / 2.0) + dy).clamp(6.0, (rect.height - 6.0).max(6.0));
                        self.dom.set_attr(id, "data-x", format_number(x.round()));
                        self.dom.set_attr(id, "data-y", format_number(y.round()));
                        self.bind(id, &format!("{},{}", format_number(x.round()), format_number(y.round())));
                    }
                }
            }
            ActionKind::Type { text } => {
                if kind == Some(ElementKind::TextInput) {
                    let tag = self.dom.tag(id).unwrap_or_default().to_string();
                    let cur = if tag == "textarea" {
                        self.dom.text_content(id)
                    } else {
                        self.dom.attr(id, "value").unwrap_or_default().to_string()
                    };
                    let next = format!("{cur}{text}");
                    if tag == "textarea" {
                        self.dom.set_text(id, next.clone());
                    } else {
                        self.dom.set_attr(id, "value", next.clone());
                    }
                    self.bind(id, &next);
                }
            }
        }
        Ok(true)
    }

    fn console_errors(&self) -> Vec<String> {
        self.console.clone()
    }
}
