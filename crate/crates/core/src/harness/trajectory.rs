//! On-disk trajectory: `steps.jsonl` with one record per step, beside the
//! PNG captures it references.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Action, InteractionTrajectory, InteractiveElement, Screenshot, TrajectoryStep};

pub const STEPS_FILE: &str = "steps.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct StepRecord {
    index: usize,
    action: Action,
    target: Option<InteractiveElement>,
    resolved: bool,
    pre: String,
    post: String,
    pre_ms: u64,
    post_ms: u64,
    diff: f64,
}

pub fn write_trajectory(dir: &Path, trajectory: &InteractionTrajectory) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut lines = Vec::new();
    for (index, step) in trajectory.steps.iter().enumerate() {
        let pre = format!("step-{index:03}-pre.png");
        let post = format!("step-{index:03}-post.png");
        fs::write(dir.join(&pre), &step.pre.png[..])?;
        fs::write(dir.join(&post), &step.post.png[..])?;
        let record = StepRecord {
            index,
            action: step.action.clone(),
            target: step.target.clone(),
            resolved: step.resolved,
            pre,
            post,
            pre_ms: step.pre.captured_ms,
            post_ms: step.post.captured_ms,
            diff: step.diff,
        };
        serde_json::to_writer(&mut lines, &record)?;
        lines.write_all(b"\n")?;
    }
    crate::fsutil::write_atomic(&dir.join(STEPS_FILE), &lines)
}

pub fn read_trajectory(dir: &Path) -> io::Result<InteractionTrajectory> {
    let file = fs::File::open(dir.join(STEPS_FILE))?;
    let mut steps = Vec::new();
    for line in io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: StepRecord = serde_json::from_str(&line)?;
        let load = |name: &str, ms: u64| -> io::Result<Screenshot> {
            let label = name.trim_end_matches(".png").to_string();
            let mut shot = Screenshot::from_png(fs::read(dir.join(name))?, label)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
            shot.captured_ms = ms;
            Ok(shot)
        };
        steps.push(TrajectoryStep {
            pre: load(&r.pre, r.pre_ms)?,
            post: load(&r.post, r.post_ms)?,
            action: r.action,
            target: r.target,
            resolved: r.resolved,
            diff: r.diff,
        });
    }
    Ok(InteractionTrajectory { steps })
}
