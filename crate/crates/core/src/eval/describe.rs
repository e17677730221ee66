//! Module descriptions recovered from generated source.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, ModelRequest, Role, Sampling};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleDescription {
    pub module: Option<u32>,
    pub text: String,
}

#[derive(Debug, Clone)]
pub enum Extractor<'a> {
    /// Reads `@module N: text` comments; no model involved.
    Markers,
    Model { gateway: &'a Gateway, model: String },
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@module\s+(\d+)\s*:\s*(.*?)\s*(?:-->|\*/|\*\}|\}|$)").expect("valid regex"))
}

fn listing_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*]\s*)?(\d+)\s*[:.)]\s*(\S.*?)\s*$").expect("valid regex"))
}

/// One description per marker comment, in source order.
pub fn marker_descriptions(source: &str) -> Vec<ModuleDescription> {
    source
        .lines()
        .filter_map(|line| marker_re().captures(line))
        .filter(|c| !c[2].is_empty())
        .map(|c| ModuleDescription { module: c[1].parse().ok(), text: c[2].to_string() })
        .collect()
}

pub fn extraction_request(source: &str, model: &str) -> ModelRequest {
    let prompt = format!(
        "Below is the source of an interactive website built from several modules. List every module it implements, \
         one per line, as `N: description`, where N is the module number and the description says what the module \
         shows and lets the user do. Reply `none` if there are no modules.\n\nSource:\n```\n{}\n```\n",
        source.trim_end()
    );
    ModelRequest::new(Role::Extractor, model, prompt).with_sampling(Sampling::greedy(2048))
}

pub fn parse_listing(reply: &str) -> Vec<ModuleDescription> {
    reply
        .lines()
        .filter_map(|line| listing_re().captures(line))
        .map(|c| ModuleDescription { module: c[1].parse().ok(), text: c[2].to_string() })
        .collect()
}

pub fn extract_module_descriptions(source: &str, extractor: &Extractor<'_>) -> Result<Vec<ModuleDescription>, GatewayError> {
    if source.trim().is_empty() {
        return Ok(Vec::new());
    }
    match extractor {
        Extractor::Markers => Ok(marker_descriptions(source)),
        Extractor::Model { gateway, model } => Ok(parse_listing(&gateway.complete(&extraction_request(source, model))?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FixtureResponse, Operation};

    fn six() -> String {
        (1..=6)
            .map(|i| format!("<!-- @module {i}: part {i} of the demo -->\n<section><p>body {i}</p></section>\n"))
            .collect::<String>()
            + "// @module 7 has no colon so it is not a marker\n"
    }

    #[test]
    fn markers_in_several_comment_styles() {
        let d = marker_descriptions(&six());
        assert_eq!(d.len(), 6);
        assert_eq!(d[3], ModuleDescription { module: Some(4), text: "part 4 of the demo".into() });
        let tsx = "// @module 2: Learning rate: step size\n{/* @module 3: Momentum */}\n/* @module 4: Noise */";
        let texts: Vec<String> = marker_descriptions(tsx).into_iter().map(|d| d.text).collect();
        assert_eq!(texts, ["Learning rate: step size", "Momentum", "Noise"]);
        assert!(extract_module_descriptions("<p>nothing here</p>", &Extractor::Markers).unwrap().is_empty());
        assert!(extract_module_descriptions("", &Extractor::Markers).unwrap().is_empty());
    }

    #[test]
    fn model_mode_replays_the_same_descriptions() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path());
        let src = six();
        let listing: String = (1..=6).map(|i| format!("{i}: part {i} of the demo\n")).collect();
        gw.record(Operation::Completion, &extraction_request(&src, "extractor"), FixtureResponse::Text(format!("Modules:\n{listing}"))).unwrap();
        let model = extract_module_descriptions(&src, &Extractor::Model { gateway: &gw, model: "extractor".into() }).unwrap();
        assert_eq!(model, marker_descriptions(&src));
        assert!(parse_listing("none").is_empty());
    }
}
