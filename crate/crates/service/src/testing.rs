//! A local web server for integration tests.
//!
//! Serves fixed pages (optionally loaded from a directory), can answer with
//! redirects, error statuses or slow responses, and records every request
//! it receives so tests can assert what was, and was not, fetched.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::Response;
use axum::Router;
use tokio::task::JoinHandle;

#[derive(Debug, Clone)]
pub struct FixturePage {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
    pub location: Option<String>,
    pub delay: Option<Duration>,
}

impl FixturePage {
    pub fn html(body: impl Into<String>) -> Self {
        Self::with_type("text/html; charset=utf-8", body.into().into_bytes())
    }

    pub fn text(body: impl Into<String>) -> Self {
        Self::with_type("text/plain; charset=utf-8", body.into().into_bytes())
    }

    pub fn with_type(content_type: &str, body: Vec<u8>) -> Self {
        FixturePage {
            status: 200,
            content_type: content_type.to_string(),
            body,
            location: None,
            delay: None,
        }
    }

    pub fn redirect(status: u16, location: &str) -> Self {
        FixturePage {
            status,
            content_type: "text/plain".into(),
            body: Vec::new(),
            location: Some(location.to_string()),
            delay: None,
        }
    }

    pub fn status(status: u16) -> Self {
        FixturePage {
            status,
            ..Self::text(format!("status {status}"))
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestRecord {
    /// Path plus query string.
    pub path: String,
    pub at: Instant,
    pub user_agent: Option<String>,
}

#[derive(Clone)]
struct FixtureState {
    pages: Arc<BTreeMap<String, FixturePage>>,
    log: Arc<Mutex<Vec<RequestRecord>>>,
}

/// Builder for [`FixtureServer`]. Keys are request paths such as `/a.html`.
#[derive(Default)]
pub struct FixtureSite {
    pages: BTreeMap<String, FixturePage>,
}

impl FixtureSite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn page(mut self, path: &str, page: FixturePage) -> Self {
        self.pages.insert(path.to_string(), page);
        self
    }

    pub fn robots(self, body: &str) -> Self {
        self.page("/robots.txt", FixturePage::text(body))
    }

    /// Adds every file under `dir`. `index.html` is also served at its
    /// directory's path.
    pub fn dir(mut self, dir: &Path) -> std::io::Result<Self> {
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d)? {
                let path = entry?.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                let content_type = match path.extension().and_then(|e| e.to_str()) {
                    Some("html") | Some("htm") => "text/html; charset=utf-8",
                    Some("txt") => "text/plain; charset=utf-8",
                    _ => "application/octet-stream",
                };
                let page = FixturePage::with_type(content_type, std::fs::read(&path)?);
                if let Some(parent) = rel.strip_suffix("index.html") {
                    self.pages.insert(format!("/{parent}"), page.clone());
                }
                self.pages.insert(format!("/{rel}"), page);
            }
        }
        Ok(self)
    }

    pub async fn start(self) -> std::io::Result<FixtureServer> {
        let state = FixtureState {
            pages: Arc::new(self.pages),
            log: Arc::new(Mutex::new(Vec::new())),
        };
        let log = state.log.clone();
        let app = Router::new().fallback(serve).with_state(state);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let handle = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(FixtureServer { addr, log, handle })
    }
}

async fn serve(State(state): State<FixtureState>, req: Request) -> Response {
    let path = req
        .uri()
        .path_and_query()
        .map(|p| p.as_str().to_string())
        .unwrap_or_else(|| "/".into());
    let user_agent = req
        .headers()
        .get(header::USER_AGENT)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    state.log.lock().unwrap().push(RequestRecord {
        path: path.clone(),
        at: Instant::now(),
        user_agent,
    });
    let Some(page) = state.pages.get(&path).or_else(|| state.pages.get(req.uri().path())) else {
        return Response::builder()
            .status(StatusCode::NOT_FOUND)
            .body(Body::from("not found"))
            .unwrap();
    };
    if let Some(d) = page.delay {
        tokio::time::sleep(d).await;
    }
    let mut resp = Response::builder()
        .status(page.status)
        .header(header::CONTENT_TYPE, page.content_type.as_str());
    if let Some(loc) = &page.location {
        resp = resp.header(header::LOCATION, HeaderValue::from_str(loc).unwrap());
    }
    resp.body(Body::from(page.body.clone())).unwrap()
}

/// A running fixture server. Stops when dropped.
pub struct FixtureServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<RequestRecord>>>,
    handle: JoinHandle<()>,
}

impl FixtureServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn requests(&self) -> Vec<RequestRecord> {
        self.log.lock().unwrap().clone()
    }

    /// Requests for `path`, in arrival order.
    pub fn requests_for(&self, path: &str) -> Vec<RequestRecord> {
        self.requests().into_iter().filter(|r| r.path == path).collect()
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap().clear();
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

/// Seeded toy bilingual world built on [`crowdmine::synth`]: a language
/// identifier for the two toy languages, an in-domain development set and
/// a general corpus.
pub struct SyntheticWorld {
    pub words: Vec<String>,
    /// The in-domain slice of `words`.
    pub domain_words: Vec<String>,
    pub lid: crowdmine::LidModel,
    pub dev: Vec<String>,
    pub general: Vec<String>,
    rng: rand_chacha::ChaCha8Rng,
}

impl SyntheticWorld {
    pub fn new(seed: u64) -> Self {
        use crowdmine::synth::{lexicon, sentence, translate, LANG_E, LANG_F};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let words = lexicon(&mut rng, 1200);
        let domain_words = words[..150].to_vec();
        let lid_e: Vec<String> = (0..300).map(|_| sentence(&mut rng, &words, 6, 14)).collect();
        let lid_f: Vec<String> = lid_e.iter().map(|s| translate(s)).collect();
        let mut corpora = BTreeMap::new();
        corpora.insert(LANG_E.to_string(), lid_e);
        corpora.insert(LANG_F.to_string(), lid_f);
        let lid = crowdmine::textkit::train_lid(&corpora, 3).expect("two non-empty corpora");
        let dev = (0..200).map(|_| sentence(&mut rng, &domain_words, 8, 16)).collect();
        let general = (0..600).map(|_| sentence(&mut rng, &words, 8, 16)).collect();
        SyntheticWorld {
            words,
            domain_words,
            lid,
            dev,
            general,
            rng,
        }
    }

    /// `n` in-domain sentences and their translations.
    pub fn parallel(&mut self, n: usize) -> (Vec<String>, Vec<String>) {
        use crowdmine::synth::{sentence, translate};
        let e: Vec<String> = (0..n).map(|_| sentence(&mut self.rng, &self.domain_words, 10, 16)).collect();
        let f = e.iter().map(|s| translate(s)).collect();
        (e, f)
    }

    /// `n` unrelated language-e sentences.
    pub fn monolingual(&mut self, n: usize) -> Vec<String> {
        (0..n)
            .map(|_| crowdmine::synth::sentence(&mut self.rng, &self.words, 10, 16))
            .collect()
    }
}

/// An HTML page with one paragraph per sentence plus some boilerplate.
pub fn html_page(title: &str, sentences: &[String]) -> String {
    let mut body = String::new();
    for s in sentences {
        body.push_str(&format!("<p>{s}</p>\n"));
    }
    format!(
        "<!doctype html><html><head><title>{title}</title><style>p {{ margin: 0 }}</style></head>\
         <body><nav><a href=\"/\">Home</a></nav><main>\n{body}</main>\
         <script>var x = \"<p>not text</p>\";</script></body></html>"
    )
}
