//! Rewrites `tests/fixtures/e2e` by recording a scripted run.
//! `cargo test -p demoforge-cli --test regen_e2e_fixtures -- --ignored`

use std::path::PathBuf;
use std::sync::Arc;

use demoforge::pipeline::{run_pipeline, Environment, RunInputs, RunOptions};
use demoforge::testkit::pdf::gradient_descent_paper;
use demoforge::testkit::scripted::ScriptedBackend;
use demoforge::{Gateway, GatewayConfig, GatewayMode, PipelineConfig, RunStatus};

#[test]
#[ignore = "rewrites committed fixtures"]
fn regenerate_e2e_bundle() {
    let bundle = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e");
    let fixtures = bundle.join("fixtures");
    let _ = std::fs::remove_dir_all(&fixtures);
    std::fs::create_dir_all(&fixtures).unwrap();
    std::fs::write(bundle.join("paper.pdf"), gradient_descent_paper()).unwrap();
    std::fs::copy(demoforge::testkit::assets_dir().join("benchmark/checklists/ML-GD.toml"), bundle.join("checklist.toml")).unwrap();
    let config = PipelineConfig::load(&bundle.join("config.toml")).unwrap();

    let gw_config = GatewayConfig { mode: GatewayMode::Record, fixtures_dir: fixtures, ..GatewayConfig::default() };
    let gateway = Gateway::new(gw_config, Some(Arc::new(ScriptedBackend::default()))).unwrap();
    let env = Environment::new(&config, &gateway).unwrap();
    let run_dir = tempfile::tempdir().unwrap();
    let inputs = RunInputs { paper: bundle.join("paper.pdf"), checklist: Some(bundle.join("checklist.toml")) };
    let manifest = run_pipeline(&inputs, &config, &env, &run_dir.path().join("run"), &RunOptions::default()).unwrap();
    assert_eq!(manifest.status, RunStatus::Complete, "{:?}", manifest.errors);
}
