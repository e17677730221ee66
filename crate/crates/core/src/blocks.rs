//! Best-of-k generation of standalone blocks, one block per planned module.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, ModelRequest, Role, Sampling};
use crate::plan::{GenerationSpec, ModulePlanEntry};
use crate::text::largest_code_region;

/// Marker every block and merged app carries once per module, inside a
/// comment: `@module <id>: <one-line description>`.
pub const MODULE_MARKER: &str = "@module";

pub const DEFAULT_ATTEMPTS: u32 = 3;
pub const MAX_ATTEMPTS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockStatus {
    Generated,
    GeneratedFailed,
    Built,
    BuildFailed,
    Scored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCandidate {
    pub module_id: u32,
    /// 1-based; pre-assigned so results do not depend on completion order.
    pub variant: u32,
    /// Extracted code region; empty when generation failed.
    pub source: String,
    /// Raw model reply, kept for inspection.
    pub response: String,
    pub model: String,
    pub seed: u64,
    pub status: BlockStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("module {0} is not in the plan")]
    UnknownModule(u32),
    #[error("attempts must be between 1 and {MAX_ATTEMPTS}, got {0}")]
    InvalidAttempts(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOptions {
    pub model: String,
    pub attempts: u32,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Variant `n` samples with seed `base_seed + n`.
    pub base_seed: u64,
    /// Output stack description, taken from the scaffold.
    pub target_stack: String,
}

impl Default for BlockOptions {
    fn default() -> Self {
        Self {
            model: "block-generator".into(),
            attempts: DEFAULT_ATTEMPTS,
            temperature: 0.8,
            max_tokens: 4096,
            base_seed: 0,
            target_stack: "A single self-contained HTML fragment.".into(),
        }
    }
}

/// Renders the generation prompt for one module. Only that module's plan
/// entry is included.
pub fn build_block_prompt(spec: &GenerationSpec, module_id: u32, target_stack: &str) -> Result<String, BlockError> {
    let entry = spec.module(module_id).ok_or(BlockError::UnknownModule(module_id))?;
    let mut p = String::new();
    p.push_str("Write one standalone building block of an interactive explainer website.\n\n");
    p.push_str(&format!("Website topic: {}\n", spec.topic));
    p.push_str(&format!("Block to build: module {}, {}\n\n", entry.id, entry.title));
    push_entry(&mut p, entry);
    p.push_str(&format!("\nTarget stack:\n{}\n\n", target_stack.trim()));
    p.push_str("Rules:\n");
    p.push_str(&format!("- Implement module {} only. Do not import, mention or depend on any other module or file.\n", entry.id));
    p.push_str("- Every listed control must be operable and every listed output must visibly react to it.\n");
    p.push_str(&format!(
        "- The first line of the source is a comment containing `{MODULE_MARKER} {}: <one-line description of what the block shows>`.\n",
        entry.id
    ));
    p.push_str("- Reply with the complete source in a single fenced code block.\n");
    Ok(p)
}

fn push_entry(p: &mut String, entry: &ModulePlanEntry) {
    p.push_str(&format!("Mechanism: {}\n", entry.mechanism));
    p.push_str("Controls:\n");
    for c in &entry.controls {
        p.push_str(&format!("- {} `{}`: {}\n", c.kind, c.parameter, c.range));
    }
    p.push_str("Outputs:\n");
    for o in &entry.outputs {
        p.push_str(&format!("- {o}\n"));
    }
    if !entry.narrative.trim().is_empty() {
        p.push_str(&format!("Interaction: {}\n", entry.narrative));
    }
}

pub fn block_request(spec: &GenerationSpec, module_id: u32, variant: u32, options: &BlockOptions) -> Result<ModelRequest, BlockError> {
    let prompt = build_block_prompt(spec, module_id, &options.target_stack)?;
    let sampling = Sampling {
        temperature: options.temperature,
        max_tokens: options.max_tokens,
        seed: Some(options.base_seed + u64::from(variant)),
    };
    Ok(ModelRequest::new(Role::BlockGenerator, options.model.clone(), prompt).with_sampling(sampling))
}

/// Generates `options.attempts` candidates in parallel. Per-variant failures
/// are recorded on the candidate; the result always has exactly k entries.
pub fn generate_candidates(
    spec: &GenerationSpec,
    module_id: u32,
    gateway: &Gateway,
    options: &BlockOptions,
) -> Result<Vec<BlockCandidate>, BlockError> {
    if !(1..=MAX_ATTEMPTS).contains(&options.attempts) {
        return Err(BlockError::InvalidAttempts(options.attempts));
    }
    let requests: Vec<ModelRequest> = (1..=options.attempts)
        .map(|v| block_request(spec, module_id, v, options))
        .collect::<Result<_, _>>()?;
    let candidates = std::thread::scope(|s| {
        let handles: Vec<_> = requests
            .iter()
            .zip(1..)
            .map(|(req, variant)| s.spawn(move || candidate_from(module_id, variant, req, gateway.complete(req))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("generation thread panicked")).collect()
    });
    Ok(candidates)
}

fn candidate_from(
    module_id: u32,
    variant: u32,
    req: &ModelRequest,
    reply: Result<String, crate::gateway::GatewayError>,
) -> BlockCandidate {
    let mut c = BlockCandidate {
        module_id,
        variant,
        source: String::new(),
        response: String::new(),
        model: req.model.clone(),
        seed: req.sampling.seed.unwrap_or_default(),
        status: BlockStatus::GeneratedFailed,
        error: None,
    };
    match reply {
        Ok(text) => {
            match largest_code_region(&text) {
                Some(code) => {
                    c.source = format!("{code}\n");
                    c.status = BlockStatus::Generated;
                }
                None => c.error = Some("reply has no fenced code region".into()),
            }
            c.response = text;
        }
        Err(e) => c.error = Some(e.to_string()),
    }
    c
}

fn module_reference_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:@module\s+|\bmodule[-_ ]?)(\d+)\b").expect("valid regex"))
}

/// References in `source` to plan modules other than `own`.
pub fn foreign_module_references(source: &str, spec: &GenerationSpec, own: u32) -> Vec<u32> {
    let ids = spec.module_ids();
    let mut out: Vec<u32> = module_reference_re()
        .captures_iter(source)
        .filter_map(|c| c[1].parse::<u32>().ok())
        .filter(|id| *id != own && ids.contains(id))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FixtureResponse, Operation};
    use crate::plan::parse_spec;

    fn gd_spec() -> GenerationSpec {
        let text = std::fs::read_to_string(crate::testkit::assets_dir().join("benchmark/specs/ML-GD.spec")).unwrap();
        parse_spec(&text).unwrap()
    }

    fn record(gw: &Gateway, spec: &GenerationSpec, module: u32, variant: u32, opts: &BlockOptions, reply: &str) {
        let req = block_request(spec, module, variant, opts).unwrap();
        gw.record(Operation::Completion, &req, FixtureResponse::Text(reply.into())).unwrap();
    }

    #[test]
    fn unknown_module_is_rejected() {
        assert_eq!(build_block_prompt(&gd_spec(), 99, "html"), Err(BlockError::UnknownModule(99)));
    }

    #[test]
    fn prompt_mentions_only_its_own_module() {
        let spec = gd_spec();
        let p = build_block_prompt(&spec, 3, "html").unwrap();
        let own = spec.module(3).unwrap();
        for c in &own.controls {
            assert!(p.contains(&c.parameter), "missing {}", c.parameter);
        }
        assert!(p.contains(&own.mechanism));
        for other in spec.modules.iter().filter(|m| m.id != 3) {
            assert!(!p.contains(&other.title), "leaks {}", other.title);
            for c in other.controls.iter().filter(|c| !own.controls.iter().any(|o| o.parameter == c.parameter)) {
                assert!(!p.contains(&format!("`{}`", c.parameter)), "leaks control {}", c.parameter);
            }
        }
        assert!(p.contains("@module 3:"));
        assert_eq!(p, build_block_prompt(&spec, 3, "html").unwrap());
    }

    #[test]
    fn seeds_differ_per_variant() {
        let spec = gd_spec();
        let opts = BlockOptions { base_seed: 40, ..BlockOptions::default() };
        let a = block_request(&spec, 1, 1, &opts).unwrap();
        let b = block_request(&spec, 1, 2, &opts).unwrap();
        assert_eq!((a.sampling.seed, b.sampling.seed), (Some(41), Some(42)));
        assert_eq!(a.prompt, b.prompt);
    }

    #[test]
    fn k_candidates_with_failures_in_place() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path());
        let spec = gd_spec();
        let opts = BlockOptions::default();
        record(&gw, &spec, 2, 1, &opts, "```html\n<p>one</p>\n```");
        record(&gw, &spec, 2, 2, &opts, "Sorry, I can only describe it in words.");
        // Variant 3 has no fixture: a replay miss.
        let cands = generate_candidates(&spec, 2, &gw, &opts).unwrap();
        assert_eq!(cands.len(), 3);
        assert_eq!(cands.iter().map(|c| c.variant).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(cands[0].status, BlockStatus::Generated);
        assert_eq!(cands[0].source, "<p>one</p>\n");
        assert_eq!(cands[1].status, BlockStatus::GeneratedFailed);
        assert!(cands[1].source.is_empty());
        assert_eq!(cands[2].status, BlockStatus::GeneratedFailed);
        assert!(cands[2].error.as_deref().unwrap().contains("fixture"));
    }

    #[test]
    fn distinct_fixtures_give_distinct_sources() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(dir.path());
        let spec = gd_spec();
        let opts = BlockOptions::default();
        for v in 1..=3 {
            record(&gw, &spec, 1, v, &opts, &format!("```html\n<p>variant {v}</p>\n```"));
        }
        let cands = generate_candidates(&spec, 1, &gw, &opts).unwrap();
        let mut sources: Vec<_> = cands.iter().map(|c| c.source.clone()).collect();
        sources.dedup();
        assert_eq!(sources.len(), 3);

        let one = generate_candidates(&spec, 1, &gw, &BlockOptions { attempts: 1, ..opts.clone() }).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].variant, 1);
        assert!(matches!(
            generate_candidates(&spec, 1, &gw, &BlockOptions { attempts: 0, ..opts }),
            Err(BlockError::InvalidAttempts(0))
        ));
    }

    #[test]
    fn foreign_references_are_found() {
        let spec = gd_spec();
        let src = "<!-- @module 2: lr --><div id=\"module-2\"></div><span class=\"module_5\"></span><p>module 42</p>";
        assert_eq!(foreign_module_references(src, &spec, 2), vec![5]);
        assert!(foreign_module_references("<!-- @module 2: x -->", &spec, 2).is_empty());
    }
}
