//! Chrome over the DevTools protocol. Each page gets its own headless browser
//! process and profile directory, so sessions share nothing.

use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::engine::{BrowserEngine, Page, RenderOptions};
use super::{Action, ActionKind, InteractiveElement, RenderError, Screenshot};

pub const CHROME_ENV: &str = "DEMOFORGE_CHROME";

/// Mirrors the raster engine's element classification and locator rules.
const EXTRACT_JS: &str = r#"(() => {
  const visible = el => {
    for (let n = el; n && n.nodeType === 1; n = n.parentElement) {
      if (n.hidden) return false;
      const s = getComputedStyle(n);
      if (s.display === 'none' || s.visibility === 'hidden') return false;
    }
    return true;
  };
  const kindOf = el => {
    const tag = el.tagName.toLowerCase();
    const type = (el.getAttribute('type') || 'text').toLowerCase();
    if (tag === 'button') return 'button';
    if (tag === 'select') return 'dropdown';
    if (tag === 'textarea') return 'text-input';
    if (tag === 'canvas') return 'drag-surface';
    if (tag === 'input') {
      if (type === 'range') return 'slider';
      if (type === 'checkbox' || type === 'radio') return 'toggle';
      if (['button', 'submit', 'reset'].includes(type)) return 'button';
      if (type === 'hidden') return null;
      return 'text-input';
    }
    if (el.hasAttribute('data-drag') || el.getAttribute('draggable') === 'true') return 'drag-surface';
    if (el.hasAttribute('data-click') || el.getAttribute('role') === 'button' || el.onclick) return 'button';
    if (tag === 'a' && (el.hasAttribute('href') || el.hasAttribute('data-nav'))) return 'button';
    return null;
  };
  const locator = el => {
    const id = el.id;
    if (id && /^[A-Za-z][A-Za-z0-9_-]*$/.test(id) && document.querySelectorAll('[id="' + id + '"]').length === 1) return '#' + id;
    const parts = [];
    for (let n = el; n; n = n.parentElement) {
      const tag = n.tagName.toLowerCase();
      if (tag === 'body' || tag === 'html') { parts.push(tag); break; }
      let nth = 1;
      for (let s = n.previousElementSibling; s; s = s.previousElementSibling) if (s.tagName === n.tagName) nth++;
      parts.push(tag + ':nth-of-type(' + nth + ')');
    }
    return parts.reverse().join(' > ');
  };
  const out = [];
  const seen = new Set();
  for (const el of document.body ? document.body.querySelectorAll('*') : []) {
    const kind = kindOf(el);
    if (!kind || el.disabled || !visible(el)) continue;
    const loc = locator(el);
    if (seen.has(loc)) continue;
    seen.add(loc);
    const r = el.getBoundingClientRect();
    const text = (el.innerText || el.textContent || '').trim().split(/\s+/).join(' ');
    const mod = el.closest('[data-module]');
    const item = {
      kind, locator: loc,
      module: mod ? mod.getAttribute('data-module') : null,
      label: text || el.getAttribute('aria-label') || el.getAttribute('name') || el.id || el.tagName.toLowerCase(),
      rect: { x: r.x, y: r.y, width: r.width, height: r.height },
    };
    if (kind === 'toggle') item.value = el.checked ? 'on' : 'off';
    else if (el.value !== undefined && el.value !== '') item.value = String(el.value);
    if (kind === 'slider') { item.min = Number(el.min || 0); item.max = Number(el.max || 100); }
    if (kind === 'dropdown') item.options = Array.from(el.options).map(o => o.value);
    out.push(item);
  }
  return out;
})()"#;

#[derive(Debug, Clone)]
pub struct CdpEngine {
    chrome: PathBuf,
    extra_args: Vec<String>,
}

impl CdpEngine {
    pub fn new(chrome: impl Into<PathBuf>) -> Self {
        Self { chrome: chrome.into(), extra_args: Vec::new() }
    }

    /// The browser named by `DEMOFORGE_CHROME`, when set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CHROME_ENV).filter(|v| !v.is_empty()).map(Self::new)
    }

    pub fn with_args(mut self, args: impl IntoIterator<Item = String>) -> Self {
        self.extra_args.extend(args);
        self
    }
}

impl BrowserEngine for CdpEngine {
    fn name(&self) -> &str {
        "cdp"
    }

    fn open(&self, url: &str, options: &RenderOptions) -> Result<Box<dyn Page>, RenderError> {
        let mut page = CdpPage::launch(self, options)?;
        page.navigate(url)?;
        Ok(Box::new(page))
    }
}

fn crash(e: impl std::fmt::Display) -> RenderError {
    RenderError::RendererCrash(e.to_string())
}

pub struct CdpPage {
    child: Child,
    _profile: tempfile::TempDir,
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
    session: String,
    next_id: u64,
    events: Vec<Value>,
    console: Vec<String>,
    options: RenderOptions,
}

impl CdpPage {
    fn launch(engine: &CdpEngine, options: &RenderOptions) -> Result<Self, RenderError> {
        let profile = tempfile::Builder::new().prefix("demoforge-chrome-").tempdir().map_err(crash)?;
        let mut child = Command::new(&engine.chrome)
            .args([
                "--headless=new",
                "--remote-debugging-port=0",
                "--no-first-run",
                "--no-default-browser-check",
                "--disable-gpu",
                "--hide-scrollbars",
                "--mute-audio",
                "--force-device-scale-factor=1",
            ])
            .arg(format!("--user-data-dir={}", profile.path().display()))
            .arg(format!("--window-size={},{}", options.viewport.width, options.viewport.height))
            .args(&engine.extra_args)
            .arg("about:blank")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| crash(format!("cannot start {}: {e}", engine.chrome.display())))?;

        let stderr = child.stderr.take().expect("stderr is piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                if let Some(pos) = line.find("ws://") {
                    let _ = tx.send(line[pos..].trim().to_string());
                }
            }
        });
        let ws_url = match rx.recv_timeout(Duration::from_millis(options.load_timeout_ms)) {
            Ok(u) => u,
            Err(_) => {
                let _ = child.kill();
                return Err(RenderError::PageLoadTimeout(options.load_timeout_ms));
            }
        };
        let (socket, _) = tungstenite::connect(ws_url.as_str()).map_err(crash)?;
        let mut page = Self {
            child,
            _profile: profile,
            socket,
            session: String::new(),
            next_id: 0,
            events: Vec::new(),
            console: Vec::new(),
            options: options.clone(),
        };
        let target = page.call("Target.createTarget", json!({ "url": "about:blank" }))?;
        let target_id = target["targetId"].as_str().ok_or_else(|| crash("createTarget returned no targetId"))?.to_string();
        let attached = page.call("Target.attachToTarget", json!({ "targetId": target_id, "flatten": true }))?;
        page.session = attached["sessionId"].as_str().ok_or_else(|| crash("attachToTarget returned no sessionId"))?.to_string();
        page.call("Page.enable", json!({}))?;
        page.call("Runtime.enable", json!({}))?;
        page.call("Page.setLifecycleEventsEnabled", json!({ "enabled": true }))?;
        page.call(
            "Emulation.setDeviceMetricsOverride",
            json!({
                "width": options.viewport.width,
                "height": options.viewport.height,
                "deviceScaleFactor": 1,
                "mobile": false,
            }),
        )?;
        Ok(page)
    }

    fn set_read_timeout(&mut self, timeout: Duration) {
        if let MaybeTlsStream::Plain(s) = self.socket.get_mut() {
            let _ = s.set_read_timeout(Some(timeout.max(Duration::from_millis(1))));
        }
    }

    fn read_message(&mut self, deadline: Instant) -> Result<Option<Value>, RenderError> {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Ok(None);
        }
        self.set_read_timeout(left);
        match self.socket.read() {
            Ok(Message::Text(t)) => serde_json::from_str(&t).map(Some).map_err(crash),
            Ok(_) => Ok(Some(Value::Null)),
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(crash(e)),
        }
    }

    fn note_event(&mut self, msg: Value) {
        match msg["method"].as_str() {
            Some("Runtime.exceptionThrown") => {
                let d = &msg["params"]["exceptionDetails"];
                let text = d["exception"]["description"].as_str().or(d["text"].as_str()).unwrap_or("uncaught exception");
                self.console.push(text.to_string());
            }
            Some("Runtime.consoleAPICalled") if msg["params"]["type"] == "error" => {
                let args = msg["params"]["args"].as_array().cloned().unwrap_or_default();
                let text: Vec<String> = args
                    .iter()
                    .map(|a| a["value"].as_str().map(str::to_string).unwrap_or_else(|| a["description"].to_string()))
                    .collect();
                self.console.push(text.join(" "));
            }
            _ => {}
        }
        self.events.push(msg);
    }

    fn call(&mut self, method: &str, params: Value) -> Result<Value, RenderError> {
        self.next_id += 1;
        let id = self.next_id;
        let mut msg = json!({ "id": id, "method": method, "params": params });
        if !self.session.is_empty() {
            msg["sessionId"] = json!(self.session);
        }
        self.socket.send(Message::Text(msg.to_string())).map_err(crash)?;
        let deadline = Instant::now() + Duration::from_millis(self.options.load_timeout_ms);
        loop {
            let Some(reply) = self.read_message(deadline)? else {
                return Err(RenderError::PageLoadTimeout(self.options.load_timeout_ms));
            };
            if reply["id"].as_u64() == Some(id) {
                if let Some(err) = reply.get("error") {
                    return Err(crash(format!("{method}: {err}")));
                }
                return Ok(reply["result"].clone());
            }
            if reply.get("method").is_some() {
                self.note_event(reply);
            }
        }
    }

    fn wait_for(&mut self, deadline: Instant, pred: impl Fn(&Value) -> bool) -> Result<bool, RenderError> {
        if self.events.iter().any(&pred) {
            return Ok(true);
        }
        while let Some(msg) = self.read_message(deadline)? {
            let hit = pred(&msg);
            if msg.get("method").is_some() {
                self.note_event(msg);
            }
            if hit {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn settle(&mut self) -> Result<(), RenderError> {
        // Drain events during the settle delay so console errors are kept.
        let deadline = Instant::now() + Duration::from_millis(self.options.settle_ms);
        while self.read_message(deadline)?.map(|m| self.note_event(m)).is_some() {}
        Ok(())
    }

    fn navigate(&mut self, url: &str) -> Result<(), RenderError> {
        self.events.clear();
        let nav = self.call("Page.navigate", json!({ "url": url }))?;
        if let Some(err) = nav["errorText"].as_str() {
            return Err(crash(format!("navigation to {url} failed: {err}")));
        }
        let deadline = Instant::now() + Duration::from_millis(self.options.load_timeout_ms);
        let loaded = self.wait_for(deadline, |m| m["method"] == "Page.loadEventFired")?;
        let idle = loaded && self.wait_for(deadline, |m| m["method"] == "Page.lifecycleEvent" && m["params"]["name"] == "networkIdle")?;
        if !idle {
            return Err(RenderError::PageLoadTimeout(self.options.load_timeout_ms));
        }
        self.events.clear();
        self.settle()
    }

    fn evaluate(&mut self, expression: &str) -> Result<Value, RenderError> {
        let r = self.call("Runtime.evaluate", json!({ "expression": expression, "returnByValue": true, "awaitPromise": true }))?;
        if let Some(ex) = r.get("exceptionDetails") {
            return Err(crash(format!("evaluate: {}", ex["text"])));
        }
        Ok(r["result"]["value"].clone())
    }

    fn mouse(&mut self, kind: &str, x: f64, y: f64) -> Result<(), RenderError> {
        let buttons = if kind == "mouseReleased" { 0 } else { 1 };
        self.call(
            "Input.dispatchMouseEvent",
            json!({ "type": kind, "x": x, "y": y, "button": "left", "buttons": buttons, "clickCount": 1 }),
        )?;
        Ok(())
    }
}

fn js_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

impl Page for CdpPage {
    fn screenshot(&mut self, label: &str) -> Result<Screenshot, RenderError> {
        let r = self.call("Page.captureScreenshot", json!({ "format": "png", "captureBeyondViewport": false }))?;
        let data = r["data"].as_str().ok_or_else(|| crash("captureScreenshot returned no data"))?;
        let png = base64::engine::general_purpose::STANDARD.decode(data).map_err(crash)?;
        Screenshot::from_png(png, label).map_err(crash)
    }

    fn elements(&mut self) -> Result<Vec<InteractiveElement>, RenderError> {
        serde_json::from_value(self.evaluate(EXTRACT_JS)?).map_err(crash)
    }

    fn perform(&mut self, action: &Action) -> Result<bool, RenderError> {
        let sel = js_str(&action.locator);
        let rect = self.evaluate(&format!(
            "(() => {{ const el = document.querySelector({sel}); if (!el) return null; \
             el.scrollIntoView({{block: 'center'}}); const r = el.getBoundingClientRect(); \
             return [r.x + r.width / 2, r.y + r.height / 2]; }})()"
        ))?;
        let Some([x, y]) = rect.as_array().and_then(|a| Some([a.first()?.as_f64()?, a.get(1)?.as_f64()?])) else {
            return Ok(false);
        };
        match &action.kind {
            ActionKind::Click => {
                self.mouse("mouseMoved", x, y)?;
                self.mouse("mousePressed", x, y)?;
                self.mouse("mouseReleased", x, y)?;
            }
            ActionKind::SetValue { value } | ActionKind::Select { option: value } => {
                let proto = if matches!(action.kind, ActionKind::Select { .. }) { "HTMLSelectElement" } else { "HTMLInputElement" };
                self.evaluate(&format!(
                    "(() => {{ const el = document.querySelector({sel}); \
                     const set = Object.getOwnPropertyDescriptor({proto}.prototype, 'value').set; \
                     set.call(el, {v}); \
                     el.dispatchEvent(new Event('input', {{bubbles: true}})); \
                     el.dispatchEvent(new Event('change', {{bubbles: true}})); }})()",
                    v = js_str(value)
                ))?;
            }
            ActionKind::Drag { dx, dy } => {
                self.mouse("mouseMoved", x, y)?;
                self.mouse("mousePressed", x, y)?;
                for i in 1..=5 {
                    let f = i as f64 / 5.0;
                    self.mouse("mouseMoved", x + dx * f, y + dy * f)?;
                }
                self.mouse("mouseReleased", x + dx, y + dy)?;
            }
            ActionKind::Type { text } => {
                self.evaluate(&format!("document.querySelector({sel}).focus()"))?;
                self.call("Input.insertText", json!({ "text": text }))?;
            }
        }
        self.settle()?;
        Ok(true)
    }

    fn console_errors(&self) -> Vec<String> {
        self.console.clone()
    }
}

impl Drop for CdpPage {
    fn drop(&mut self) {
        let _ = self.socket.close(None);
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
