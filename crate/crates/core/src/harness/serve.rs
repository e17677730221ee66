//! Static file server on an ephemeral loopback port, one per render.

use std::io;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

pub struct StaticServer {
    url: String,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for StaticServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StaticServer").field("url", &self.url).finish()
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or_default() {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "svg" => "image/svg+xml",
        "wasm" => "application/wasm",
        _ => "application/octet-stream",
    }
}

/// Maps a request path onto `root`, refusing anything that escapes it.
fn resolve(root: &Path, url: &str) -> Option<PathBuf> {
    let path = url.split(['?', '#']).next().unwrap_or("/");
    let mut out = root.to_path_buf();
    for comp in Path::new(path.trim_start_matches('/')).components() {
        match comp {
            Component::Normal(c) => out.push(c),
            Component::CurDir => {}
            _ => return None,
        }
    }
    if out.is_dir() {
        out.push("index.html");
    }
    out.is_file().then_some(out)
}

impl StaticServer {
    pub fn start(root: &Path) -> io::Result<Self> {
        let root = root.canonicalize()?;
        let server = Arc::new(Server::http("127.0.0.1:0").map_err(|e| io::Error::other(e.to_string()))?);
        let port = server.server_addr().to_ip().map(|a| a.port()).unwrap_or_default();
        let stop = Arc::new(AtomicBool::new(false));
        let worker = {
            let server = Arc::clone(&server);
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                while !stop.load(Ordering::Acquire) {
                    let Ok(Some(request)) = server.recv_timeout(Duration::from_millis(100)) else { continue };
                    let response = match resolve(&root, request.url()).and_then(|p| std::fs::read(&p).ok().map(|b| (p, b))) {
                        Some((path, bytes)) => {
                            let header = Header::from_bytes("Content-Type", content_type(&path)).expect("static header");
                            Response::from_data(bytes).with_header(header).boxed()
                        }
                        None => Response::from_string("not found").with_status_code(404).boxed(),
                    };
                    let _ = request.respond(response);
                }
            })
        };
        Ok(Self { url: format!("http://127.0.0.1:{port}/"), server, stop, worker: Some(worker) })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Drop for StaticServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

/// GET over loopback, bypassing any proxy configured in the environment.
pub fn fetch_local(url: &str) -> io::Result<String> {
    let err = |e: reqwest::Error| io::Error::other(e.to_string());
    let client = reqwest::blocking::Client::builder().no_proxy().timeout(Duration::from_secs(30)).build().map_err(err)?;
    let response = client.get(url).send().map_err(err)?;
    if !response.status().is_success() {
        return Err(io::Error::new(io::ErrorKind::NotFound, format!("{url}: HTTP {}", response.status())));
    }
    response.text().map_err(err)
}
