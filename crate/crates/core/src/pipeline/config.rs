//! Declarative pipeline configuration, stored as TOML and snapshotted into
//! every run manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocks::{DEFAULT_ATTEMPTS, MAX_ATTEMPTS};
use crate::diff::DEFAULT_EPSILON;
use crate::harness::Viewport;
use crate::scorer::ScoringFunction;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    /// `@module N: ...` comments in the merged source.
    Markers,
    /// An extractor-role model reads the merged source.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatcherKind {
    /// Normalized string equality.
    Exact,
    /// A judge model decides each (item, description) pair.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    /// Built-in deterministic rasterizer for the static scaffold dialect.
    Raster,
    /// Headless Chrome over the DevTools protocol; needs `DEMOFORGE_CHROME`.
    Chrome,
}

/// Model name per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelRoles {
    pub planner: String,
    pub block_generator: String,
    /// The highest-capacity model available.
    pub merger: String,
    pub scorer: String,
    pub extractor: String,
    pub prober: String,
    pub judge: String,
}

impl Default for ModelRoles {
    fn default() -> Self {
        Self {
            planner: "planner".into(),
            block_generator: "block-generator".into(),
            merger: "merger".into(),
            scorer: "scorer".into(),
            extractor: "extractor".into(),
            prober: "prober".into(),
            judge: "judge".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timeouts {
    pub build_secs: u64,
    pub load_ms: u64,
    /// Quiet period after load before each capture.
    pub settle_ms: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self { build_secs: 180, load_ms: 30_000, settle_ms: 1500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Generation {
    pub temperature: f64,
    /// Variant `n` samples with seed `base_seed + n`.
    pub base_seed: u64,
    pub max_tokens: u32,
}

impl Default for Generation {
    fn default() -> Self {
        Self { temperature: 0.8, base_seed: 0, max_tokens: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Planning {
    /// Tokens of document text in the planning prompt.
    pub token_budget: usize,
    pub attach_figures: bool,
    pub max_tokens: u32,
}

impl Default for Planning {
    fn default() -> Self {
        Self { token_budget: 6000, attach_figures: false, max_tokens: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Candidates per module, 1..=6.
    pub attempts: u32,
    /// Trajectory frames shown to the reviewer; absent means all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_budget: Option<usize>,
    pub epsilon: f64,
    pub scoring: ScoringFunction,
    pub probe_seed: u64,
    /// Probe steps; absent means twice the element count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_budget: Option<usize>,
    /// Checklist completion below this is prompt misalignment.
    pub misalignment_floor: f64,
    /// Frames shown to the visual-grounding judge besides the landing page.
    pub grounding_frames: usize,
    pub extractor: ExtractorKind,
    pub matcher: MatcherKind,
    pub engine: EngineKind,
    /// Concurrent browser sessions.
    pub render_sessions: usize,
    /// Scaffold directory; absent selects the built-in static scaffold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaffold: Option<PathBuf>,
    pub viewport: Viewport,
    pub models: ModelRoles,
    pub timeouts: Timeouts,
    pub generation: Generation,
    pub planning: Planning,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            attempts: DEFAULT_ATTEMPTS,
            screenshot_budget: None,
            epsilon: DEFAULT_EPSILON,
            scoring: ScoringFunction::Difference,
            probe_seed: 0,
            probe_budget: None,
            misalignment_floor: 0.5,
            grounding_frames: 4,
            extractor: ExtractorKind::Model,
            matcher: MatcherKind::Model,
            engine: EngineKind::Raster,
            render_sessions: 2,
            scaffold: None,
            viewport: Viewport::default(),
            models: ModelRoles::default(),
            timeouts: Timeouts::default(),
            generation: Generation::default(),
            planning: Planning::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let config: Self = toml::from_str(text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if !(1..=MAX_ATTEMPTS).contains(&self.attempts) {
            return bad(format!("attempts must be 1..={MAX_ATTEMPTS}, got {}", self.attempts));
        }
        if !(self.epsilon.is_finite() && (0.0..1.0).contains(&self.epsilon)) {
            return bad(format!("epsilon must be in [0, 1), got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.misalignment_floor) {
            return bad(format!("misalignment_floor must be in [0, 1], got {}", self.misalignment_floor));
        }
        if self.probe_budget == Some(0) {
            return bad("probe_budget must be at least 1".into());
        }
        if self.viewport.width == 0 || self.viewport.height == 0 {
            return bad(format!("viewport {} has no area", self.viewport));
        }
        if self.render_sessions == 0 {
            return bad("render_sessions must be at least 1".into());
        }
        // TOML integers are signed 64-bit.
        let max_seed = i64::MAX as u64;
        if self.probe_seed > max_seed || self.generation.base_seed > max_seed {
            return bad(format!("seeds must be at most {max_seed}"));
        }
        if !(self.generation.temperature.is_finite() && self.generation.temperature >= 0.0) {
            return bad(format!("generation.temperature must be >= 0, got {}", self.generation.temperature));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid_and_documented_values() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.attempts, c.epsilon, c.viewport), (3, 0.002, Viewport { width: 1024, height: 768 }));
        assert_eq!(c.screenshot_budget, None);
        assert_eq!(PipelineConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_files_take_defaults_and_typos_fail() {
        let c = PipelineConfig::parse("attempts = 1\n[timeouts]\nsettle_ms = 0\n").unwrap();
        assert_eq!((c.attempts, c.timeouts.settle_ms, c.timeouts.build_secs), (1, 0, 180));
        assert!(PipelineConfig::parse("atempts = 1").is_err());
        assert!(PipelineConfig::parse("[timeouts]\nsettle = 0").is_err());
    }

    #[test]
    fn bounds_are_enforced() {
        for text in [
            "attempts = 0",
            "attempts = 7",
            "epsilon = 1.5",
            "probe_budget = 0",
            "misalignment_floor = 2.0",
            "render_sessions = 0",
        ] {
            let mut c = PipelineConfig::default().to_toml();
            let key = text.split(" = ").next().unwrap();
            c = c.lines().filter(|l| !l.starts_with(&format!("{key} ="))).collect::<Vec<_>>().join("\n");
            let c = format!("{text}\n{c}\n");
            assert!(matches!(PipelineConfig::parse(&c), Err(PipelineError::InvalidConfig(_))), "{text} accepted");
        }
        assert!(PipelineConfig::parse("bogus = 1").is_err());
    }

    fn arb_config() -> impl Strategy<Value = PipelineConfig> {
        (
            (1u32..=6, proptest::option::of(0usize..20), 0.0f64..0.5, any::<bool>(), 0..=i64::MAX as u64, proptest::option::of(1usize..500)),
            (0.0f64..=1.0, 0usize..10, any::<bool>(), any::<bool>(), 1usize..8, proptest::option::of("[a-z/]{1,12}")),
            (1u32..4000, 1u32..4000, "[a-z0-9-]{1,10}", 0.0f64..2.0, 0..=i64::MAX as u64, 1u32..100_000),
            (1u64..1000, 0u64..100_000, 0u64..5000, 1usize..100_000, any::<bool>()),
        )
            .prop_map(|(a, b, c, d)| {
                let mut cfg = PipelineConfig {
                    attempts: a.0,
                    screenshot_budget: a.1,
                    epsilon: a.2,
                    scoring: if a.3 { ScoringFunction::Ratio } else { ScoringFunction::Difference },
                    probe_seed: a.4,
                    probe_budget: a.5,
                    misalignment_floor: b.0,
                    grounding_frames: b.1,
                    extractor: if b.2 { ExtractorKind::Markers } else { ExtractorKind::Model },
                    matcher: if b.3 { MatcherKind::Exact } else { MatcherKind::Model },
                    render_sessions: b.4,
                    scaffold: b.5.map(PathBuf::from),
                    viewport: Viewport { width: c.0, height: c.1 },
                    ..PipelineConfig::default()
                };
                cfg.models.merger = c.2;
                cfg.generation = Generation { temperature: c.3, base_seed: c.4, max_tokens: c.5 };
                cfg.timeouts = Timeouts { build_secs: d.0, load_ms: d.1, settle_ms: d.2 };
                cfg.planning.token_budget = d.3;
                cfg.planning.attach_figures = d.4;
                cfg
            })
    }

    proptest! {
        #[test]
        fn serialization_round_trips_byte_identically(cfg in arb_config()) {
            let first = cfg.to_toml();
            let parsed = PipelineConfig::parse(&first).unwrap();
            prop_assert_eq!(&parsed, &cfg);
            prop_assert_eq!(parsed.to_toml(), first);
        }
    }
}
