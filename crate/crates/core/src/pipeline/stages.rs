use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{ExtractorKind, MatcherKind, PipelineConfig};
use super::manifest::{CandidateRecord, EvalRecord, EvalSummary, MergedRecord, ModuleRecord, RunManifest, RunStatus, Stage, ERROR_LOG, MANIFEST_FILE};
use super::{Environment, PipelineError};
use crate::blocks::{generate_candidates, BlockOptions, BlockStatus};
use crate::digest::sha256_hex;
use crate::eval::{
    classify_failure, extract_module_descriptions, match_checklist, measure_complexity, probe, review_trajectory, CascadeOptions, Checklist,
    ExactMatcher, Extractor, FailureInputs, Judge, Matcher, ModelMatcher, ProbeOptions,
};
use crate::gateway::{Gateway, Sampling};
use crate::harness::{compile, write_trajectory, BuildOptions, Screenshot, TemplateKind};
use crate::ingest::{parse_document, IngestError, PaperDocument, PlanningPromptOptions};
use crate::merger::{disallowed_imports, merge, package, MergeOptions, SelectedBlock};
use crate::plan::{parse_spec, plan_modules, serialize_spec, GenerationSpec};
use crate::scorer::{score, select_best, QualityScore, ScoringOptions, VariantScore};

pub const DOCUMENT_FILE: &str = "document.json";
pub const SPEC_FILE: &str = "spec";
pub const CHECKLIST_FILE: &str = "checklist.toml";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunInputs {
    pub paper: PathBuf,
    /// Checklist for the evaluation; without one only the probe runs.
    pub checklist: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Stop after this stage, leaving a resumable run.
    pub stop_after: Option<Stage>,
}

/// Runs the whole pipeline into `run_dir`, which must not hold a run yet.
/// Only an unreadable document or an unusable plan is fatal; an unreadable
/// document leaves nothing but `error.log` behind.
pub fn run_pipeline(
    inputs: &RunInputs,
    config: &PipelineConfig,
    env: &Environment<'_>,
    run_dir: &Path,
    options: &RunOptions,
) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    if run_dir.join(MANIFEST_FILE).exists() {
        return Err(PipelineError::RunExists(run_dir.display().to_string()));
    }
    let checklist = match &inputs.checklist {
        Some(p) => Some(Checklist::load(p).map_err(|e| PipelineError::InvalidConfig(format!("checklist {}: {e}", p.display())))?),
        None => None,
    };
    let (document, digest) = match ingest(&inputs.paper) {
        Ok(d) => d,
        Err(e) => {
            fs::create_dir_all(run_dir)?;
            fs::write(run_dir.join(ERROR_LOG), format!("{}: {e}\n", inputs.paper.display()))?;
            return Err(e.into());
        }
    };
    fs::create_dir_all(run_dir)?;
    let run_id = run_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut manifest = RunManifest::new(run_id, config.clone(), inputs.paper.display().to_string(), digest);
    manifest.document = Some(write_json(run_dir, DOCUMENT_FILE, &document)?);
    if let Some(c) = &checklist {
        let text = toml::to_string(c).expect("checklist serializes");
        manifest.checklist = Some(write_file(run_dir, CHECKLIST_FILE, text.as_bytes())?);
    }
    manifest.save(run_dir)?;
    continue_run(manifest, env, run_dir, options)
}

/// Continues a run from its first incomplete stage.
pub fn resume(env: &Environment<'_>, run_dir: &Path, options: &RunOptions) -> Result<RunManifest, PipelineError> {
    let manifest = RunManifest::load(run_dir)?;
    continue_run(manifest, env, run_dir, options)
}

/// Reruns one stage; later stages are marked incomplete.
pub fn run_stage(env: &Environment<'_>, run_dir: &Path, stage: Stage) -> Result<RunManifest, PipelineError> {
    let mut manifest = RunManifest::load(run_dir)?;
    if let Some(prev) = stage.previous() {
        if !manifest.completed(prev) {
            return Err(PipelineError::StageOrder { stage: stage.as_str(), needs: prev.as_str() });
        }
    }
    manifest.stages_completed.retain(|s| *s < stage);
    execute(&mut manifest, env, run_dir, stage)?;
    Ok(manifest)
}

fn continue_run(mut manifest: RunManifest, env: &Environment<'_>, run_dir: &Path, options: &RunOptions) -> Result<RunManifest, PipelineError> {
    for stage in Stage::ALL {
        if manifest.completed(stage) {
            continue;
        }
        execute(&mut manifest, env, run_dir, stage)?;
        if options.stop_after == Some(stage) {
            break;
        }
    }
    Ok(manifest)
}

fn execute(manifest: &mut RunManifest, env: &Environment<'_>, run_dir: &Path, stage: Stage) -> Result<(), PipelineError> {
    let started = Instant::now();
    tracing::info!(stage = stage.as_str(), run = %manifest.run_id, "stage started");
    let result = match stage {
        Stage::Plan => stage_plan(manifest, env, run_dir),
        Stage::Generate => stage_generate(manifest, env, run_dir),
        Stage::Build => stage_build(manifest, env, run_dir),
        Stage::Score => stage_score(manifest, env, run_dir),
        Stage::Merge => stage_merge(manifest, env, run_dir),
        Stage::Eval => stage_eval(manifest, env, run_dir),
    };
    if let Err(e) = result {
        manifest.status = RunStatus::Failed;
        manifest.errors.push(format!("{}: {e}", stage.as_str()));
        manifest.save(run_dir)?;
        return Err(e);
    }
    manifest.timings.insert(stage, started.elapsed().as_secs_f64());
    manifest.stages_completed.push(stage);
    manifest.stages_completed.sort();
    manifest.status = status_of(manifest);
    manifest.save(run_dir)?;
    tracing::info!(stage = stage.as_str(), secs = started.elapsed().as_secs_f64(), "stage finished");
    Ok(())
}

fn status_of(m: &RunManifest) -> RunStatus {
    if !m.completed(Stage::Eval) {
        return if m.completed(Stage::Merge) && m.merged.as_ref().and_then(|x| x.site.as_ref()).is_none() {
            RunStatus::Failed
        } else {
            RunStatus::InProgress
        };
    }
    match (&m.merged, &m.evaluation) {
        (Some(merged), Some(eval)) if merged.site.is_some() => {
            let clean = m.dropped_modules.is_empty() && m.errors.is_empty() && eval.checklist.is_some() && eval.review.is_some();
            if clean {
                RunStatus::Complete
            } else {
                RunStatus::Partial
            }
        }
        _ => RunStatus::Failed,
    }
}

fn ingest(paper: &Path) -> Result<(PaperDocument, String), IngestError> {
    let bytes = fs::read(paper).map_err(|e| IngestError::UnreadableDocument(e.to_string()))?;
    let doc = parse_document(&bytes)?;
    if doc.is_empty() {
        return Err(IngestError::UnreadableDocument("no text could be extracted".into()));
    }
    Ok((doc, sha256_hex(&bytes)))
}

fn write_file(run_dir: &Path, rel: &str, bytes: &[u8]) -> Result<String, PipelineError> {
    let path = run_dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, bytes)?;
    Ok(rel.to_string())
}

fn write_json<T: Serialize + ?Sized>(run_dir: &Path, rel: &str, value: &T) -> Result<String, PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::Io(e.to_string()))?;
    bytes.push(b'\n');
    write_file(run_dir, rel, &bytes)
}

fn read_json<T: serde::de::DeserializeOwned>(run_dir: &Path, rel: &str) -> Result<T, PipelineError> {
    let text = fs::read_to_string(run_dir.join(rel))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::CorruptManifest(format!("{rel}: {e}")))
}

fn load_spec(m: &RunManifest, run_dir: &Path) -> Result<GenerationSpec, PipelineError> {
    let rel = m.spec.as_deref().ok_or(PipelineError::StageOrder { stage: "generate", needs: "plan" })?;
    parse_spec(&fs::read_to_string(run_dir.join(rel))?).map_err(|e| PipelineError::CorruptManifest(format!("{rel}: {e}")))
}

fn candidate_dir(module: u32, variant: u32) -> String {
    format!("blocks/{module}/candidate-{variant}")
}

fn stage_plan(m: &mut RunManifest, env: &Environment<'_>, run_dir: &Path) -> Result<(), PipelineError> {
    let rel = m.document.clone().ok_or_else(|| PipelineError::CorruptManifest("no document recorded".into()))?;
    let document: PaperDocument = read_json(run_dir, &rel)?;
    let c = &m.config;
    let options = PlanningPromptOptions {
        model: c.models.planner.clone(),
        token_budget: c.planning.token_budget,
        attach_figures: c.planning.attach_figures,
        sampling: Sampling::greedy(c.planning.max_tokens),
    };
    let spec = plan_modules(&document, env.gateway, &options)?;
    m.spec = Some(write_file(run_dir, SPEC_FILE, serialize_spec(&spec).as_bytes())?);
    m.modules = spec
        .modules
        .iter()
        .map(|e| ModuleRecord { module_id: e.id, title: e.title.clone(), candidates: Vec::new(), selection: None })
        .collect();
    Ok(())
}

fn stage_generate(m: &mut RunManifest, env: &Environment<'_>, run_dir: &Path) -> Result<(), PipelineError> {
    let spec = load_spec(m, run_dir)?;
    let c = &m.config;
    let options = BlockOptions {
        model: c.models.block_generator.clone(),
        attempts: c.attempts,
        temperature: c.generation.temperature,
        max_tokens: c.generation.max_tokens,
        base_seed: c.generation.base_seed,
        target_stack: env.scaffold.config().target_stack.clone(),
    };
    let per_module = std::thread::scope(|s| {
        let handles: Vec<_> = spec
            .modules
            .iter()
            .map(|e| {
                let (spec, options) = (&spec, &options);
                s.spawn(move || generate_candidates(spec, e.id, env.gateway, options))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generation thread panicked")).collect::<Vec<_>>()
    });
    for (entry, result) in spec.modules.iter().zip(per_module) {
        let candidates = result.map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        let mut records = Vec::new();
        for cand in candidates {
            let dir = candidate_dir(entry.id, cand.variant);
            let response = write_file(run_dir, &format!("{dir}/response"), cand.response.as_bytes())?;
            let source = match cand.status {
                BlockStatus::Generated => Some(write_file(run_dir, &format!("{dir}/source"), cand.source.as_bytes())?),
                _ => None,
            };
            records.push(CandidateRecord {
                variant: cand.variant,
                seed: cand.seed,
                status: cand.status,
                source,
                response,
                build_log: None,
                site: None,
                site_digest: None,
                screenshot: None,
                viewport: None,
                console_errors: Vec::new(),
                score: None,
                error: cand.error,
            });
        }
        let module = m.module_mut(entry.id).ok_or_else(|| PipelineError::CorruptManifest(format!("module {} missing", entry.id)))?;
        module.candidates = records;
        module.selection = None;
    }
    Ok(())
}

fn stage_build(m: &mut RunManifest, env: &Environment<'_>, run_dir: &Path) -> Result<(), PipelineError> {
    let build = BuildOptions { timeout: std::time::Duration::from_secs(m.config.timeouts.build_secs), work_root: None };
    let jobs: Vec<(u32, usize)> = m
        .modules
        .iter()
        .flat_map(|md| md.candidates.iter().enumerate().filter(|(_, c)| c.source.is_some()).map(move |(i, _)| (md.module_id, i)))
        .collect();
    let snapshot = m.modules.clone();
    let outcomes = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(module, i)| {
                let cand = snapshot.iter().find(|x| x.module_id == module).map(|x| &x.candidates[i]).expect("job from manifest");
                let build = &build;
                s.spawn(move || build_candidate(module, cand, env, run_dir, build))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("build thread panicked")).collect::<Vec<_>>()
    });
    for (&(module, i), outcome) in jobs.iter().zip(outcomes) {
        let record = outcome?;
        m.module_mut(module).expect("job from manifest").candidates[i] = record;
    }
    Ok(())
}

fn build_candidate(module: u32, cand: &CandidateRecord, env: &Environment<'_>, run_dir: &Path, build: &BuildOptions) -> Result<CandidateRecord, PipelineError> {
    let mut rec = CandidateRecord {
        build_log: None,
        site: None,
        site_digest: None,
        screenshot: None,
        viewport: None,
        console_errors: Vec::new(),
        score: None,
        ..cand.clone()
    };
    let dir = candidate_dir(module, cand.variant);
    let source = fs::read_to_string(run_dir.join(cand.source.as_deref().expect("job has source")))?;
    let site_rel = format!("{dir}/site");
    match compile(&source, &env.scaffold, TemplateKind::BlockHost, &run_dir.join(&site_rel), build) {
        Ok(result) => {
            rec.build_log = Some(write_file(run_dir, &format!("{dir}/build.log"), result.log.as_bytes())?);
            rec.site = Some(site_rel.clone());
            rec.site_digest = result.digest;
            match env.renderer.render_screenshot(&run_dir.join(&site_rel), &format!("module-{module}-candidate-{}", cand.variant)) {
                Ok((shot, console)) => {
                    rec.screenshot = Some(write_file(run_dir, &format!("{dir}/screenshot.png"), &shot.png)?);
                    rec.viewport = Some(shot.viewport());
                    rec.console_errors = console;
                    rec.status = BlockStatus::Built;
                    rec.error = None;
                }
                Err(e) => {
                    rec.status = BlockStatus::BuildFailed;
                    rec.error = Some(format!("render: {e}"));
                }
            }
        }
        Err(e) => {
            let _ = fs::remove_dir_all(run_dir.join(&site_rel));
            rec.build_log = Some(write_file(run_dir, &format!("{dir}/build.log"), e.log().as_bytes())?);
            rec.status = BlockStatus::BuildFailed;
            rec.error = Some(e.to_string());
        }
    }
    Ok(rec)
}

fn stage_score(m: &mut RunManifest, env: &Environment<'_>, run_dir: &Path) -> Result<(), PipelineError> {
    let spec = load_spec(m, run_dir)?;
    let options = ScoringOptions { model: m.config.models.scorer.clone(), function: m.config.scoring };
    let jobs: Vec<(u32, usize)> = m
        .modules
        .iter()
        .flat_map(|md| (0..md.candidates.len()).map(move |i| (md.module_id, i)))
        .collect();
    let snapshot = m.modules.clone();
    let scores = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(module, i)| {
                let cand = snapshot.iter().find(|x| x.module_id == module).map(|x| &x.candidates[i]).expect("job from manifest");
                let (spec, options) = (&spec, &options);
                s.spawn(move || score_candidate(spec, module, cand, env.gateway, run_dir, options))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scoring thread panicked")).collect::<Vec<_>>()
    });
    for (&(module, i), result) in jobs.iter().zip(scores) {
        let (score, note) = result?;
        let cand = &mut m.module_mut(module).expect("job from manifest").candidates[i];
        let rel = write_json(run_dir, &format!("{}/score.json", candidate_dir(module, cand.variant)), &score)?;
        cand.score = Some(rel);
        if score.is_scoreable() {
            cand.status = BlockStatus::Scored;
        }
        if let Some(n) = note {
            cand.error = Some(n);
        }
    }
    m.dropped_modules.clear();
    for module in &mut m.modules {
        let mut variant_scores = Vec::new();
        for c in &module.candidates {
            let rel = c.score.as_deref().expect("scored above");
            variant_scores.push(VariantScore { variant: c.variant, score: read_json(run_dir, rel)? });
        }
        let selection = select_best(module.module_id, &variant_scores).ok();
        if selection.as_ref().and_then(|s| s.selected).is_none() {
            m.dropped_modules.push(module.module_id);
        }
        module.selection = selection;
    }
    Ok(())
}

/// Unbuilt candidates score as build failures; a scoring error leaves the
/// candidate unscoreable with a note.
fn score_candidate(
    spec: &GenerationSpec,
    module: u32,
    cand: &CandidateRecord,
    gateway: &Gateway,
    run_dir: &Path,
    options: &ScoringOptions,
) -> Result<(QualityScore, Option<String>), PipelineError> {
    let Some(rel) = cand.screenshot.as_deref().filter(|_| matches!(cand.status, BlockStatus::Built | BlockStatus::Scored)) else {
        return Ok((QualityScore::build_failed(options.function), None));
    };
    let entry = spec.module(module).ok_or_else(|| PipelineError::CorruptManifest(format!("module {module} not in spec")))?;
    let png = fs::read(run_dir.join(rel))?;
    let shot = Screenshot::from_png(png, format!("module-{module}-candidate-{}", cand.variant)).map_err(|e| PipelineError::Io(e.to_string()))?;
    match score(entry, Some(&shot), gateway, options) {
        Ok(s) => Ok((s, None)),
        Err(e) => Ok((QualityScore::build_failed(options.function), Some(format!("scoring: {e}")))),
    }
}

fn stage_merge(m: &mut RunManifest, env: &Environment<'_>, run_dir: &Path) -> Result<(), PipelineError> {
    let spec = load_spec(m, run_dir)?;
    m.merged = None;
    m.errors.retain(|e| !e.starts_with("merge:"));
    let mut blocks = Vec::new();
    for module in &m.modules {
        let Some(variant) = module.selection.as_ref().and_then(|s| s.selected) else { continue };
        let cand = module.candidates.iter().find(|c| c.variant == variant).expect("selected variant exists");
        let source = fs::read_to_string(run_dir.join(cand.source.as_deref().expect("selected candidate has source")))?;
        blocks.push(SelectedBlock { module_id: module.module_id, variant, source });
    }
    let options = MergeOptions {
        model: m.config.models.merger.clone(),
        max_tokens: m.config.generation.max_tokens.max(MergeOptions::default().max_tokens),
        target_stack: env.scaffold.config().target_stack.clone(),
    };
    let merged = match merge(&blocks, &spec, env.gateway, &options) {
        Ok(app) => app,
        Err(e) => {
            m.errors.push(format!("merge: {e}"));
            return Ok(());
        }
    };
    let source = write_file(run_dir, "merged/app-source", merged.source.as_bytes())?;
    let site_rel = "merged/site";
    let mut record = MergedRecord {
        source,
        registry: merged.registry.clone(),
        layout: merged.layout.clone(),
        site: None,
        entry: None,
        site_digest: None,
        build_log: String::new(),
        disallowed_imports: disallowed_imports(&merged.source, &env.scaffold.config().allowed_dependencies),
    };
    let build = BuildOptions { timeout: std::time::Duration::from_secs(m.config.timeouts.build_secs), work_root: None };
    let log = match package(&merged, &env.scaffold, &run_dir.join(site_rel), &build) {
        Ok(site) => {
            record.site = Some(site_rel.into());
            record.entry = Some(format!("{site_rel}/index.html"));
            record.site_digest = Some(site.digest);
            site.build_log
        }
        Err(e) => {
            let _ = fs::remove_dir_all(run_dir.join(site_rel));
            m.errors.push(format!("merge: packaging failed: {e}"));
            e.log()
        }
    };
    record.build_log = write_file(run_dir, "merged/build.log", log.as_bytes())?;
    if !record.disallowed_imports.is_empty() {
        m.errors.push(format!("merge: imports outside the allowed list: {:?}", record.disallowed_imports));
    }
    m.merged = Some(record);
    Ok(())
}

fn stage_eval(m: &mut RunManifest, env: &Environment<'_>, run_dir: &Path) -> Result<(), PipelineError> {
    m.evaluation = None;
    m.errors.retain(|e| !e.starts_with("eval:"));
    let Some(merged) = m.merged.clone().filter(|x| x.site.is_some()) else {
        m.errors.push("eval: no merged site to evaluate".into());
        return Ok(());
    };
    let spec = load_spec(m, run_dir)?;
    let c = m.config.clone();
    let site = run_dir.join(merged.site.as_deref().expect("filtered"));
    let source = fs::read_to_string(run_dir.join(&merged.source))?;
    let mut errors = Vec::new();
    let render = |e: crate::harness::RenderError| PipelineError::Io(format!("rendering merged site: {e}"));

    let (landing, _) = env.renderer.render_screenshot(&site, "landing").map_err(render)?;
    let landing_rel = write_file(run_dir, "eval/landing.png", &landing.png)?;
    let elements = env.renderer.extract_interactive_elements(&site).map_err(render)?;
    let probe_options = ProbeOptions { seed: c.probe_seed, budget: c.probe_budget, epsilon: c.epsilon };
    let (report, trajectory) = probe(&env.renderer, &site, &elements, &probe_options).map_err(|e| PipelineError::Io(format!("probe: {e}")))?;
    let probe_rel = write_json(run_dir, "eval/probe.json", &report)?;
    let trajectory_rel = "eval/trajectory".to_string();
    let _ = fs::remove_dir_all(run_dir.join(&trajectory_rel));
    write_trajectory(&run_dir.join(&trajectory_rel), &trajectory)?;

    let extractor = match c.extractor {
        ExtractorKind::Markers => Extractor::Markers,
        ExtractorKind::Model => Extractor::Model { gateway: env.gateway, model: c.models.extractor.clone() },
    };
    let descriptions = extract_module_descriptions(&source, &extractor).unwrap_or_else(|e| {
        errors.push(format!("eval: module descriptions unavailable: {e}"));
        Vec::new()
    });
    let descriptions_rel = write_json(run_dir, "eval/descriptions.json", &descriptions)?;

    let judge = Judge { gateway: env.gateway, model: c.models.judge.clone(), function: c.scoring };
    let checklist_result = match &m.checklist {
        Some(rel) => {
            let list = Checklist::load(&run_dir.join(rel)).map_err(|e| PipelineError::CorruptManifest(format!("{rel}: {e}")))?;
            let model_matcher = ModelMatcher { judge: judge.clone() };
            let matcher: &dyn Matcher = match c.matcher {
                MatcherKind::Exact => &ExactMatcher,
                MatcherKind::Model => &model_matcher,
            };
            match match_checklist(&descriptions, &list, matcher) {
                Ok(r) => Some(r),
                Err(e) => {
                    errors.push(format!("eval: checklist matching failed: {e}"));
                    None
                }
            }
        }
        None => None,
    };
    let checklist_rel = checklist_result.as_ref().map(|r| write_json(run_dir, "eval/checklist.json", r)).transpose()?;

    let reviewer = Judge { model: c.models.prober.clone(), ..judge.clone() };
    let review = match review_trajectory(&spec, &trajectory, c.screenshot_budget, &reviewer) {
        Ok(r) => Some(r),
        Err(e) => {
            errors.push(format!("eval: trajectory review failed: {e}"));
            None
        }
    };
    let review_rel = review.as_ref().map(|r| write_json(run_dir, "eval/review.json", r)).transpose()?;

    let inputs = FailureInputs {
        spec: &spec,
        checklist: checklist_result.as_ref(),
        probe: &report,
        trajectory: &trajectory,
        landing: Some(&landing),
        renders_ok: true,
    };
    let cascade = CascadeOptions { misalignment_floor: c.misalignment_floor, frames: c.grounding_frames };
    let failure = classify_failure(&inputs, &judge, &cascade);
    let failure_rel = write_json(run_dir, "eval/failure.json", &failure)?;
    let complexity = measure_complexity(&source, &elements);
    let complexity_rel = write_json(run_dir, "eval/complexity.json", &complexity)?;

    let summary = EvalSummary {
        completion_rate: checklist_result.as_ref().map(|r| r.completion_rate),
        failure_ratio: report.failure_ratio,
        probe_failure_ratio: report.probe_failure_ratio,
        elements: complexity.interactive_elements,
        code_tokens: complexity.code_tokens,
        category: failure.category,
        vlm_visual: review.as_ref().map(|r| r.vlm_visual),
        screenshots_used: review.as_ref().map(|r| r.screenshots_used),
    };
    write_json(run_dir, "eval/summary.json", &summary)?;
    m.errors.extend(errors);
    m.evaluation = Some(EvalRecord {
        checklist: checklist_rel,
        probe: probe_rel,
        trajectory: trajectory_rel,
        landing: landing_rel,
        review: review_rel,
        failure: failure_rel,
        complexity: complexity_rel,
        descriptions: descriptions_rel,
        summary,
    });
    Ok(())
}
