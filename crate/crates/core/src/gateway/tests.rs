use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::*;

fn req(prompt: &str) -> ModelRequest {
    ModelRequest::new(Role::Planner, "planner-model", prompt)
}

fn scorer_req() -> ModelRequest {
    ModelRequest::new(Role::Scorer, "vlm-small", "Is this a complete implementation?")
        .with_image(ImageAttachment::png("landing", vec![9, 9, 9]))
        .with_targets(["Yes", "No"])
}

/// Backend double with scripted failures and a call counter.
struct Mock {
    transport_failures: AtomicUsize,
    content_error: bool,
    capability: LogitCapability,
    logits: BTreeMap<String, f64>,
    calls: AtomicUsize,
    active: AtomicUsize,
    peak: AtomicUsize,
}

impl Mock {
    fn ok() -> Self {
        Self {
            transport_failures: AtomicUsize::new(0),
            content_error: false,
            capability: LogitCapability::LogProbs,
            logits: BTreeMap::from([(" Yes".to_string(), -0.2), (" No".to_string(), -1.8)]),
            calls: AtomicUsize::new(0),
            active: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        }
    }
}

impl Backend for Mock {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &ModelRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(3));
        self.active.fetch_sub(1, Ordering::SeqCst);
        if self
            .transport_failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            return Err(BackendError::Transport("connection reset".into()));
        }
        if self.content_error {
            return Err(BackendError::Content("refused".into()));
        }
        Ok(format!("echo: {}", req.prompt))
    }

    fn token_logits(&self, _req: &ModelRequest, _s: &[String]) -> Result<BTreeMap<String, f64>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.logits.clone())
    }

    fn logit_capability(&self) -> LogitCapability {
        self.capability
    }
}

fn gateway_with(mock: Mock, mode: GatewayMode, dir: &std::path::Path) -> (Gateway, Arc<Mock>) {
    let mock = Arc::new(mock);
    let config = GatewayConfig {
        mode,
        fixtures_dir: dir.to_path_buf(),
        retry: RetryPolicy { max_retries: 3, base_delay_ms: 1 },
        concurrency: 2,
        ..GatewayConfig::default()
    };
    (Gateway::new(config, Some(mock.clone() as Arc<dyn Backend>)).unwrap(), mock)
}

#[test]
fn empty_prompt_is_invalid_not_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Gateway::replay(dir.path());
    assert!(matches!(gw.complete(&req("")), Err(GatewayError::InvalidRequest(_))));
}

#[test]
fn replay_hit_and_miss() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Gateway::replay(dir.path());
    gw.record(Operation::Completion, &req("plan this"), FixtureResponse::Text("the plan".into()))
        .unwrap();
    assert_eq!(gw.complete(&req("plan this")).unwrap(), "the plan");
    match gw.complete(&req("plan this!")) {
        Err(GatewayError::FixtureMiss { role, .. }) => assert_eq!(role, Role::Planner),
        other => panic!("expected FixtureMiss, got {other:?}"),
    }
}

#[test]
fn replay_is_byte_identical_across_calls() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Gateway::replay(dir.path());
    let text = "line one\n  indented \u{00e9}\n\n";
    gw.record(Operation::Completion, &req("p"), FixtureResponse::Text(text.into())).unwrap();
    let outs: Vec<String> = (0..5).map(|_| gw.complete(&req("p")).unwrap()).collect();
    assert!(outs.iter().all(|o| o == text));
}

#[test]
fn logits_replay_returns_stored_values() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Gateway::replay(dir.path());
    let r = scorer_req();
    gw.record(
        Operation::Logits,
        &r,
        FixtureResponse::Logits {
            mode: LogitMode::Raw,
            values: BTreeMap::from([("Yes".into(), 2.0), ("No".into(), 1.0)]),
        },
    )
    .unwrap();
    let targets = vec!["Yes".to_string(), "No".to_string()];
    let l = gw.logits_for_tokens(&r, &targets).unwrap();
    assert_eq!(l.get("Yes"), Some(2.0));
    assert_eq!(l.get("No"), Some(1.0));
    assert_eq!(l.mode, LogitMode::Raw);
    assert!(l.floored.is_empty());
}

#[test]
fn empty_targets_are_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Gateway::replay(dir.path());
    assert!(matches!(gw.logits_for_tokens(&scorer_req(), &[]), Err(GatewayError::InvalidRequest(_))));
}

/// The fixture carries the surface forms a byte-BPE vision model emits for
/// the first answer position (space-prefixed "Yes"/"No"). Pinning the
/// canonical mapping in config must recover the canonical targets.
#[test]
fn resolves_configured_surface_forms() {
    let dir = tempfile::tempdir().unwrap();
    let surfaces = BTreeMap::from([
        ("Yes".to_string(), vec![" Yes".to_string()]),
        ("No".to_string(), vec![" No".to_string()]),
    ]);
    let config = GatewayConfig { fixtures_dir: dir.path().into(), surfaces, ..GatewayConfig::default() };
    let gw = Gateway::new(config, None).unwrap();
    let r = scorer_req();
    gw.record(
        Operation::Logits,
        &r,
        FixtureResponse::Logits {
            mode: LogitMode::Raw,
            values: BTreeMap::from([
                ("Yes".into(), -5.0),
                (" Yes".into(), 3.25),
                (" No".into(), 0.5),
                ("No".into(), 7.0),
            ]),
        },
    )
    .unwrap();
    let l = gw.logits_for_tokens(&r, &["Yes".into(), "No".into()]).unwrap();
    assert_eq!(l.get("Yes"), Some(3.25));
    assert_eq!(l.get("No"), Some(0.5));
}

#[test]
fn missing_target_is_floored_only_for_logprobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut mock = Mock::ok();
    mock.logits = BTreeMap::from([("Yes".into(), -0.1), ("Maybe".into(), -4.0)]);
    let (gw, _) = gateway_with(mock, GatewayMode::Live, dir.path());
    let l = gw.logits_for_tokens(&scorer_req(), &["Yes".into(), "No".into()]).unwrap();
    assert_eq!(l.get("No"), Some(-4.0));
    assert_eq!(l.floored, vec!["No".to_string()]);

    let mut mock = Mock::ok();
    mock.capability = LogitCapability::Raw;
    mock.logits = BTreeMap::from([("Yes".into(), 1.0)]);
    let (gw, _) = gateway_with(mock, GatewayMode::Live, dir.path());
    assert!(matches!(
        gw.logits_for_tokens(&scorer_req(), &["Yes".into(), "No".into()]),
        Err(GatewayError::Content(_))
    ));
}

#[test]
fn unsupported_backend_reports_logits_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let mut mock = Mock::ok();
    mock.capability = LogitCapability::None;
    let (gw, mock) = gateway_with(mock, GatewayMode::Live, dir.path());
    assert!(matches!(
        gw.logits_for_tokens(&scorer_req(), &["Yes".into(), "No".into()]),
        Err(GatewayError::LogitsUnsupported(_))
    ));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 0);
}

#[test]
fn unsupported_logits_are_recorded_and_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let mut mock = Mock::ok();
    mock.capability = LogitCapability::None;
    let (gw, _) = gateway_with(mock, GatewayMode::Record, dir.path());
    let targets = ["Yes".to_string(), "No".to_string()];
    assert!(matches!(gw.logits_for_tokens(&scorer_req(), &targets), Err(GatewayError::LogitsUnsupported(_))));
    assert_eq!(gw.store().len(), 1);
    let replay = Gateway::replay(dir.path());
    assert!(matches!(replay.logits_for_tokens(&scorer_req(), &targets), Err(GatewayError::LogitsUnsupported(_))));
}

#[test]
fn record_then_replay_without_backend() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, _) = gateway_with(Mock::ok(), GatewayMode::Record, dir.path());
    let live = gw.complete(&req("hello")).unwrap();
    let live_logits = gw.logits_for_tokens(&scorer_req(), &["Yes".into(), "No".into()]).unwrap();
    assert_eq!(gw.store().len(), 2);

    let replay = Gateway::replay(dir.path());
    assert_eq!(replay.complete(&req("hello")).unwrap(), live);
    assert_eq!(replay.logits_for_tokens(&scorer_req(), &["Yes".into(), "No".into()]).unwrap(), live_logits);
}

#[test]
fn transport_errors_retry_up_to_three_times() {
    let dir = tempfile::tempdir().unwrap();
    let mock = Mock::ok();
    mock.transport_failures.store(3, Ordering::SeqCst);
    let (gw, mock) = gateway_with(mock, GatewayMode::Live, dir.path());
    assert!(gw.complete(&req("x")).is_ok());
    assert_eq!(mock.calls.load(Ordering::SeqCst), 4);

    let mock = Mock::ok();
    mock.transport_failures.store(4, Ordering::SeqCst);
    let (gw, mock) = gateway_with(mock, GatewayMode::Live, dir.path());
    assert!(matches!(gw.complete(&req("x")), Err(GatewayError::BackendUnavailable(_))));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 4);
}

#[test]
fn content_errors_are_not_retried() {
    let dir = tempfile::tempdir().unwrap();
    let mut mock = Mock::ok();
    mock.content_error = true;
    let (gw, mock) = gateway_with(mock, GatewayMode::Live, dir.path());
    assert!(matches!(gw.complete(&req("x")), Err(GatewayError::Content(_))));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn live_calls_respect_the_concurrency_limit() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, mock) = gateway_with(Mock::ok(), GatewayMode::Live, dir.path());
    std::thread::scope(|s| {
        for i in 0..10 {
            let gw = &gw;
            s.spawn(move || gw.complete(&req(&format!("p{i}"))).unwrap());
        }
    });
    assert!(mock.peak.load(Ordering::SeqCst) <= 2);
}

#[test]
fn replay_never_reaches_an_unroutable_backend() {
    let dir = tempfile::tempdir().unwrap();
    let backend = OpenAiCompatBackend::new("http://10.255.255.1:9/v1", None, LogitCapability::LogProbs, Duration::from_millis(200)).unwrap();
    let config = GatewayConfig { mode: GatewayMode::Replay, fixtures_dir: dir.path().into(), ..GatewayConfig::default() };
    let gw = Gateway::new(config, Some(Arc::new(backend))).unwrap();
    gw.record(Operation::Completion, &req("covered"), FixtureResponse::Text("ok".into())).unwrap();
    let started = std::time::Instant::now();
    for _ in 0..3 {
        assert_eq!(gw.complete(&req("covered")).unwrap(), "ok");
    }
    assert!(started.elapsed() < Duration::from_millis(200));
}

#[test]
fn replay_mode_toggle() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, mock) = gateway_with(Mock::ok(), GatewayMode::Record, dir.path());
    gw.replay_mode(true);
    assert_eq!(gw.mode(), GatewayMode::Replay);
    assert!(matches!(gw.complete(&req("new")), Err(GatewayError::FixtureMiss { .. })));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 0);
    gw.replay_mode(false);
    assert_eq!(gw.mode(), GatewayMode::Record);
    assert!(gw.complete(&req("new")).is_ok());
}

#[test]
fn request_log_has_one_record_per_call() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("logs/requests.jsonl");
    let config = GatewayConfig {
        fixtures_dir: dir.path().join("fx"),
        log_path: Some(log_path.clone()),
        ..GatewayConfig::default()
    };
    let gw = Gateway::new(config, None).unwrap();
    gw.record(Operation::Completion, &req("a"), FixtureResponse::Text("b".into())).unwrap();
    gw.complete(&req("a")).unwrap();
    let _ = gw.complete(&req("missing"));
    let text = std::fs::read_to_string(log_path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["ok"], true);
    assert_eq!(lines[1]["ok"], false);
    assert_eq!(lines[1]["source"], "replay");
}

#[test]
fn concurrent_record_and_replay_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let gw = Gateway::replay(dir.path());
    let seen = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for i in 0..8 {
            let gw = &gw;
            let seen = &seen;
            s.spawn(move || {
                let r = req(&format!("prompt {i}"));
                gw.record(Operation::Completion, &r, FixtureResponse::Text(format!("answer {i}"))).unwrap();
                seen.lock().unwrap().push(gw.complete(&r).unwrap());
            });
        }
    });
    assert_eq!(seen.into_inner().unwrap().len(), 8);
}
