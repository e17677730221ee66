//! A deterministic stand-in for every model role, used to record the
//! end-to-end fixture bundle and to drive benchmark tests offline.
//!
//! - planner: a fixed three-module gradient-descent plan
//! - block generator: one of three block styles chosen by the sampling seed;
//!   styles differ in how much they draw, and `broken` pairs get an unclosed tag
//! - scorer and prober: Yes/No logits from the ink fraction of the images
//! - merger: wraps the blocks in the sidebar navigation contract
//! - extractor: lists the `@module` markers
//! - judge: checklist pairs match on word overlap; every other question is No

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::eval::{marker_descriptions, normalize};
use crate::gateway::{Backend, BackendError, LogitCapability, ModelRequest, Role};

pub const SCRIPTED_PLAN: &str = "\
```spec
topic: Gradient descent and its adaptive variants
navigation: sidebar
shell: single page, left sidebar with one entry per module, content area on the right
```

```module
id: 1
title: Learning rate
mechanism: step size and divergence
control: slider | learning rate | 0.001..1.0
control: button | run | iterate
output: trajectory over contours
output: loss curve
narrative: Large rates overshoot; small rates crawl.
```

```module
id: 2
title: Momentum vs Adam
mechanism: velocity accumulation versus adaptive moments
control: slider | momentum | 0..0.99
control: button | race | start both
output: two trajectories
output: steps to converge
narrative: Racing shows both optimizers side by side.
```

```module
id: 3
title: Update rule
mechanism: step-by-step arithmetic of one update
control: button | step | one update
control: toggle | show gradient | on/off
output: parameter table
output: gradient arrow
narrative: Stepping applies one update and shows the arithmetic.
```
";

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    /// (module id, variant) pairs whose block fails the static build.
    pub broken: Vec<(u32, u32)>,
    pub capability: LogitCapability,
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        Self { broken: vec![(2, 3)], capability: LogitCapability::Raw }
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

impl ScriptedBackend {
    fn block(&self, req: &ModelRequest) -> Result<String, BackendError> {
        static TARGET: OnceLock<Regex> = OnceLock::new();
        static MECHANISM: OnceLock<Regex> = OnceLock::new();
        let target = re(&TARGET, r"Block to build: module (\d+), ([^\n]+)")
            .captures(&req.prompt)
            .ok_or_else(|| BackendError::Content("no block target in prompt".into()))?;
        let id: u32 = target[1].parse().map_err(|_| BackendError::Content("bad module id".into()))?;
        let title = target[2].trim().to_string();
        let mechanism = re(&MECHANISM, r"Mechanism: ([^\n]+)").captures(&req.prompt).map(|c| c[1].trim().to_string()).unwrap_or_default();
        let seed = req.sampling.seed.unwrap_or(0);
        let variant = u32::try_from(seed).unwrap_or(0);
        let broken = self.broken.contains(&(id, variant));
        Ok(format!("Here is the block.\n\n```html\n{}```\n", block_html(id, &title, &mechanism, seed % 3, broken)))
    }

    fn merged(&self, req: &ModelRequest) -> String {
        static BLOCK: OnceLock<Regex> = OnceLock::new();
        let blocks: Vec<(String, String, String)> = re(&BLOCK, r"(?s)### Block for module (\d+): ([^\n]*)\n```\n(.*?)\n```")
            .captures_iter(&req.prompt)
            .map(|c| (c[1].to_string(), c[2].trim().to_string(), c[3].to_string()))
            .collect();
        let mut out = String::from("<nav style=\"background: #e8e8e8\">\n");
        for (id, title, _) in &blocks {
            out.push_str(&format!("  <a data-nav=\"{id}\">{title}</a>\n"));
        }
        out.push_str("</nav>\n<main>\n");
        for (i, (id, _, source)) in blocks.iter().enumerate() {
            let hidden = if i == 0 { "" } else { " hidden" };
            out.push_str(&format!("<div data-view=\"{id}\"{hidden}>\n{}\n</div>\n", source.trim_end()));
        }
        out.push_str("</main>\n");
        format!("```html\n{out}```\n")
    }

    fn judge(&self, req: &ModelRequest) -> (f64, f64) {
        static PAIR: OnceLock<Regex> = OnceLock::new();
        match re(&PAIR, r"Checklist item: ([^\n]*)\nModule description: ([^\n]*)").captures(&req.prompt) {
            Some(c) => {
                let overlap = word_overlap(&c[1], &c[2]);
                if overlap >= 0.5 {
                    (1.0 + overlap, 0.0)
                } else {
                    (-1.0, 0.0)
                }
            }
            None => (-1.0, 1.0),
        }
    }
}

/// Jaccard index of the normalized word sets.
fn word_overlap(a: &str, b: &str) -> f64 {
    let (a, b) = (normalize(a), normalize(b));
    let sa: std::collections::BTreeSet<&str> = a.split(' ').filter(|w| !w.is_empty()).collect();
    let sb: std::collections::BTreeSet<&str> = b.split(' ').filter(|w| !w.is_empty()).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        0.0
    } else {
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

/// Share of pixels that are not near-white, averaged over the images.
fn ink(req: &ModelRequest) -> f64 {
    let fractions: Vec<f64> = req
        .images
        .iter()
        .filter_map(|i| image::load_from_memory(i.data()).ok())
        .map(|img| {
            let rgb = img.to_rgb8();
            let inked = rgb.pixels().filter(|p| p.0.iter().any(|&c| c < 240)).count();
            inked as f64 / (rgb.width() as f64 * rgb.height() as f64).max(1.0)
        })
        .collect();
    if fractions.is_empty() {
        0.0
    } else {
        fractions.iter().sum::<f64>() / fractions.len() as f64
    }
}

/// Style 1 is sparse, style 2 rich, style 0 in between.
pub fn block_html(id: u32, title: &str, mechanism: &str, style: u64, broken: bool) -> String {
    let p = format!("m{id}");
    let mut h = format!("<!-- @module {id}: {title}: {mechanism} -->\n<section data-module=\"{id}\">\n  <h2>{title}</h2>\n");
    match style {
        1 => {
            h.push_str(&format!("  <meter id=\"{p}-level\" min=\"0\" max=\"10\">2</meter>\n"));
            h.push_str(&format!("  <button id=\"{p}-step\" data-click=\"inc:{p}-level\">Step</button>\n"));
        }
        2 => {
            h.push_str(&format!("  <p>{mechanism}</p>\n"));
            h.push_str("  <div style=\"height: 80px; background: #dce6f5\">Outputs update as the controls move.</div>\n");
            h.push_str(&format!("  <meter id=\"{p}-level\" min=\"0\" max=\"10\" style=\"height: 60px\">5</meter>\n"));
            h.push_str(&format!("  <input type=\"range\" id=\"{p}-rate\" min=\"0\" max=\"10\" value=\"5\" data-bind=\"{p}-level\">\n"));
            h.push_str(&format!("  <button id=\"{p}-up\" data-click=\"inc:{p}-level\">Increase</button>\n"));
            h.push_str(&format!("  <button id=\"{p}-down\" data-click=\"dec:{p}-level\">Decrease</button>\n"));
            h.push_str(&format!("  <input type=\"checkbox\" id=\"{p}-show\" data-change=\"toggle:{p}-panel\">\n"));
            h.push_str(&format!("  <div id=\"{p}-panel\" hidden style=\"height: 60px; background: #c87850\"></div>\n"));
            h.push_str(&format!("  <button id=\"{p}-note\">About</button>\n"));
        }
        _ => {
            h.push_str(&format!("  <p>{mechanism}</p>\n"));
            h.push_str(&format!("  <meter id=\"{p}-level\" min=\"0\" max=\"10\" style=\"height: 40px\">4</meter>\n"));
            h.push_str(&format!(
                "  <select id=\"{p}-mode\" data-bind=\"{p}-level\"><option value=\"4\">low</option><option value=\"8\">high</option></select>\n"
            ));
            h.push_str(&format!("  <button id=\"{p}-more\" data-click=\"toggle:{p}-panel\">Details</button>\n"));
            h.push_str(&format!("  <div id=\"{p}-panel\" hidden style=\"height: 60px; background: #50a078\"></div>\n"));
        }
    }
    if broken {
        h.push_str("  <div style=\"height: 40px\">\n");
    }
    h.push_str("</section>\n");
    h
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, req: &ModelRequest) -> Result<String, BackendError> {
        match req.role {
            Role::Planner => Ok(SCRIPTED_PLAN.to_string()),
            Role::BlockGenerator => self.block(req),
            Role::Merger => Ok(self.merged(req)),
            Role::Extractor => {
                let lines: Vec<String> = marker_descriptions(&req.prompt)
                    .into_iter()
                    .filter_map(|d| d.module.map(|m| format!("{m}: {}", d.text)))
                    .collect();
                Ok(if lines.is_empty() { "none".into() } else { lines.join("\n") })
            }
            Role::Scorer | Role::Prober => Ok(if ink(req) > 0.05 { "Yes" } else { "No" }.into()),
            Role::Judge => Ok(if self.judge(req).0 > self.judge(req).1 { "Yes" } else { "No" }.into()),
        }
    }

    fn token_logits(&self, req: &ModelRequest, _surfaces: &[String]) -> Result<BTreeMap<String, f64>, BackendError> {
        let (yes, no) = match req.role {
            Role::Scorer | Role::Prober => (20.0 * ink(req), 1.0),
            Role::Judge => self.judge(req),
            _ => return Err(BackendError::Content(format!("no logits for the {} role", req.role))),
        };
        Ok(BTreeMap::from([("Yes".to_string(), yes), ("No".to_string(), no)]))
    }

    fn logit_capability(&self) -> LogitCapability {
        self.capability
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{check_tag_balance, compile, BuildOptions, TemplateKind};
    use crate::testkit::{raster_renderer, static_scaffold};

    #[test]
    fn plan_parses_into_three_valid_modules() {
        let spec = crate::plan::parse_spec(SCRIPTED_PLAN).unwrap();
        assert_eq!(spec.module_ids(), vec![1, 2, 3]);
        assert!(crate::plan::validate_spec(&spec).is_empty());
    }

    #[test]
    fn styles_build_and_differ_in_ink() {
        let dir = tempfile::tempdir().unwrap();
        let r = raster_renderer();
        let mut inks = Vec::new();
        for style in [1, 0, 2] {
            let html = block_html(1, "Learning rate", "step size and divergence", style, false);
            assert!(check_tag_balance(&html).is_empty());
            let out = dir.path().join(format!("s{style}"));
            let site = compile(&html, &static_scaffold(), TemplateKind::BlockHost, &out, &BuildOptions::default()).unwrap().site_dir.unwrap();
            let (shot, _) = r.render_screenshot(&site, "x").unwrap();
            let req = ModelRequest::new(Role::Scorer, "s", "p").with_image(crate::gateway::ImageAttachment::png("x", shot.png.to_vec()));
            inks.push(ink(&req));
        }
        assert!(inks[0] < inks[1] && inks[1] < inks[2], "{inks:?}");
        let broken = block_html(2, "Momentum", "m", 0, true);
        assert!(!check_tag_balance(&broken).is_empty());
    }

    #[test]
    fn overlap_decides_checklist_pairs() {
        assert_eq!(word_overlap("Learning rate: step size", "learning rate step size"), 1.0);
        assert!(word_overlap("Learning rate", "Update rule") < 0.5);
    }
}
