//! Text layout of a [`GenerationSpec`]: one fenced `spec` block with the
//! global fields, then one fenced `module` block per plan entry. Each field is
//! a `key: value` line; `control` and `output` repeat. A line without a
//! recognised key continues the previous field.

use super::{Control, ControlKind, GenerationSpec, ModulePlanEntry};
use crate::text::fenced_regions;

pub const SPEC_FENCE: &str = "spec";
pub const MODULE_FENCE: &str = "module";

fn fields(body: &str, keys: &[&str]) -> Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for raw in body.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let keyed = line.split_once(':').and_then(|(k, v)| {
            let k = k.trim().to_ascii_lowercase();
            keys.contains(&k.as_str()).then(|| (k, v.trim().to_string()))
        });
        match (keyed, out.last_mut()) {
            (Some(kv), _) => out.push(kv),
            (None, Some((_, v))) => {
                if !v.is_empty() {
                    v.push(' ');
                }
                v.push_str(line);
            }
            (None, None) => return Err(format!("unexpected line {line:?} before any field")),
        }
    }
    Ok(out)
}

fn parse_control(value: &str) -> Result<Control, String> {
    let mut parts = value.splitn(3, '|').map(str::trim);
    let kind: ControlKind = parts.next().unwrap_or_default().parse()?;
    let parameter = parts.next().unwrap_or_default().to_string();
    let range = parts.next().unwrap_or_default().to_string();
    Ok(Control { kind, parameter, range })
}

fn parse_module(body: &str) -> Result<ModulePlanEntry, String> {
    let keys = ["id", "title", "mechanism", "control", "output", "narrative"];
    let mut id = None;
    let mut entry = ModulePlanEntry {
        id: 0,
        title: String::new(),
        mechanism: String::new(),
        controls: Vec::new(),
        outputs: Vec::new(),
        narrative: String::new(),
    };
    for (key, value) in fields(body, &keys)? {
        match key.as_str() {
            "id" => {
                let digits = value.trim_start_matches('#');
                id = Some(digits.parse::<u32>().map_err(|_| format!("module id {value:?} is not a positive integer"))?);
            }
            "title" => entry.title = value,
            "mechanism" => entry.mechanism = value,
            "control" => entry.controls.push(parse_control(&value)?),
            "output" => entry.outputs.push(value),
            "narrative" => entry.narrative = value,
            _ => unreachable!("fields() only yields listed keys"),
        }
    }
    entry.id = id.ok_or("module block without an id")?;
    Ok(entry)
}

/// Parses the first `spec` block and every `module` block, in order. Text
/// outside fences is ignored.
pub fn parse_spec(text: &str) -> Result<GenerationSpec, String> {
    let regions = fenced_regions(text);
    let header = regions
        .iter()
        .find(|r| r.info.eq_ignore_ascii_case(SPEC_FENCE))
        .ok_or("no `spec` block found")?;
    let mut spec = GenerationSpec {
        topic: String::new(),
        navigation: String::new(),
        shell: String::new(),
        modules: Vec::new(),
    };
    for (key, value) in fields(header.body, &["topic", "navigation", "shell"])? {
        match key.as_str() {
            "topic" => spec.topic = value,
            "navigation" => spec.navigation = value,
            _ => spec.shell = value,
        }
    }
    for region in regions.iter().filter(|r| r.info.eq_ignore_ascii_case(MODULE_FENCE)) {
        spec.modules.push(parse_module(region.body)?);
    }
    Ok(spec)
}

pub fn serialize_spec(spec: &GenerationSpec) -> String {
    let mut out = format!(
        "```{SPEC_FENCE}\ntopic: {}\nnavigation: {}\nshell: {}\n```\n",
        spec.topic, spec.navigation, spec.shell
    );
    for m in &spec.modules {
        out.push_str(&format!("\n```{MODULE_FENCE}\nid: {}\ntitle: {}\nmechanism: {}\n", m.id, m.title, m.mechanism));
        for c in &m.controls {
            out.push_str(&format!("control: {} | {} | {}\n", c.kind, c.parameter, c.range).replace(" \n", "\n"));
        }
        for o in &m.outputs {
            out.push_str(&format!("output: {o}\n"));
        }
        out.push_str(&format!("narrative: {}\n```\n", m.narrative));
    }
    out
}
