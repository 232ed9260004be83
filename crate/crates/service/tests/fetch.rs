use std::time::Duration;

use crowdmine::web::{canonicalize_url, FetchPolicy};
use crowdmine_service::testing::{FixturePage, FixtureServer, FixtureSite};
use crowdmine_service::{FetchError, Fetcher};

fn policy(interval: f64) -> FetchPolicy {
    FetchPolicy {
        per_host_min_interval_secs: interval,
        timeout_secs: 5.0,
        ..FetchPolicy::default()
    }
}

async fn fetch(f: &Fetcher, server: &FixtureServer, path: &str) -> Result<crowdmine_service::Document, FetchError> {
    f.fetch(&canonicalize_url(&server.url(path)).unwrap()).await
}

#[tokio::test]
async fn html_page_is_extracted() {
    let server = FixtureSite::new()
        .robots("User-agent: *\nDisallow:\n")
        .page("/a.html", FixturePage::html("<html><body><h1>Title</h1><p>Hello <b>world</b>.</p><script>x()</script></body></html>"))
        .start()
        .await
        .unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    let doc = fetch(&f, &server, "/a.html").await.unwrap();
    assert_eq!(doc.status, 200);
    assert_eq!(doc.text.as_deref(), Some("Title\nHello world."));
    let reqs = server.requests_for("/a.html");
    assert_eq!(reqs.len(), 1);
    assert!(reqs[0].user_agent.as_deref().unwrap().starts_with("crowdmine/"));
}

#[tokio::test]
async fn disallowed_path_is_never_requested() {
    let server = FixtureSite::new()
        .robots("User-agent: *\nDisallow: /private/\n")
        .page("/private/p.html", FixturePage::html("<p>secret</p>"))
        .start()
        .await
        .unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    let err = fetch(&f, &server, "/private/p.html").await.unwrap_err();
    assert!(matches!(err, FetchError::RobotsDenied(_)));
    assert_eq!(err.code(), "robots_denied");
    let paths: Vec<String> = server.requests().into_iter().map(|r| r.path).collect();
    assert_eq!(paths, vec!["/robots.txt"]);
}

#[tokio::test]
async fn same_host_requests_are_spaced() {
    let server = FixtureSite::new()
        .page("/a.txt", FixturePage::text("a"))
        .page("/b.txt", FixturePage::text("b"))
        .start()
        .await
        .unwrap();
    let interval = 1.0;
    let f = Fetcher::new(policy(interval)).unwrap();
    let (a, b) = tokio::join!(fetch(&f, &server, "/a.txt"), fetch(&f, &server, "/b.txt"));
    a.unwrap();
    b.unwrap();
    let reqs = server.requests();
    // robots.txt (404 -> allow all), then the two pages, all spaced.
    assert_eq!(reqs.len(), 3);
    for w in reqs.windows(2) {
        let gap = w[1].at.duration_since(w[0].at).as_secs_f64();
        assert!(gap >= interval - 0.05, "gap {gap}");
        assert!(gap <= interval + 0.5, "gap {gap}");
    }
}

#[tokio::test]
async fn crawl_delay_extends_spacing() {
    let server = FixtureSite::new()
        .robots("User-agent: *\nCrawl-delay: 1\n")
        .page("/a.txt", FixturePage::text("a"))
        .page("/b.txt", FixturePage::text("b"))
        .start()
        .await
        .unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    fetch(&f, &server, "/a.txt").await.unwrap();
    fetch(&f, &server, "/b.txt").await.unwrap();
    let a = &server.requests_for("/a.txt")[0];
    let b = &server.requests_for("/b.txt")[0];
    assert!(b.at.duration_since(a.at) >= Duration::from_millis(950));
}

#[tokio::test]
async fn different_hosts_are_independent() {
    let s1 = FixtureSite::new().page("/a.txt", FixturePage::text("a")).start().await.unwrap();
    let s2 = FixtureSite::new().page("/a.txt", FixturePage::text("a")).start().await.unwrap();
    let f = Fetcher::new(policy(2.0)).unwrap();
    let started = std::time::Instant::now();
    let (a, b) = tokio::join!(fetch(&f, &s1, "/a.txt"), fetch(&f, &s2, "/a.txt"));
    a.unwrap();
    b.unwrap();
    // robots + page on each host: one interval each, in parallel
    let took = started.elapsed().as_secs_f64();
    assert!(took < 3.5, "took {took}");
}

#[tokio::test]
async fn redirect_to_another_host_rechecks_robots() {
    let other = FixtureSite::new()
        .robots("User-agent: *\nDisallow: /private\n")
        .page("/private/x.html", FixturePage::html("<p>x</p>"))
        .page("/open.html", FixturePage::html("<p>open</p>"))
        .start()
        .await
        .unwrap();
    let first = FixtureSite::new()
        .page("/go-private", FixturePage::redirect(302, &other.url("/private/x.html")))
        .page("/go-open", FixturePage::redirect(301, &other.url("/open.html")))
        .start()
        .await
        .unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    let err = fetch(&f, &first, "/go-private").await.unwrap_err();
    assert!(matches!(err, FetchError::RobotsDenied(_)));
    assert!(other.requests_for("/private/x.html").is_empty());
    let doc = fetch(&f, &first, "/go-open").await.unwrap();
    assert_eq!(doc.url.as_str(), other.url("/open.html"));
    assert_eq!(doc.text.as_deref(), Some("open"));
}

#[tokio::test]
async fn redirect_loops_stop() {
    let server = FixtureSite::new()
        .page("/a", FixturePage::redirect(302, "/b"))
        .page("/b", FixturePage::redirect(302, "/a"))
        .start()
        .await
        .unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    let err = fetch(&f, &server, "/a").await.unwrap_err();
    assert!(matches!(err, FetchError::TooManyRedirects(_)));
    // 1 + max_redirects page requests
    assert_eq!(server.requests().iter().filter(|r| r.path != "/robots.txt").count(), 6);
}

#[tokio::test]
async fn robots_status_semantics() {
    // 4xx: no restrictions
    let missing = FixtureSite::new().page("/p.txt", FixturePage::text("p")).start().await.unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    assert!(fetch(&f, &missing, "/p.txt").await.is_ok());
    // 5xx: treated as complete disallow
    let broken = FixtureSite::new()
        .page("/robots.txt", FixturePage::status(503))
        .page("/p.txt", FixturePage::text("p"))
        .start()
        .await
        .unwrap();
    let err = fetch(&f, &broken, "/p.txt").await.unwrap_err();
    assert!(matches!(err, FetchError::RobotsDenied(_)));
    assert!(broken.requests_for("/p.txt").is_empty());
}

#[tokio::test]
async fn robots_is_cached_per_origin() {
    let server = FixtureSite::new()
        .robots("User-agent: *\nAllow: /\n")
        .page("/a.txt", FixturePage::text("a"))
        .page("/b.txt", FixturePage::text("b"))
        .start()
        .await
        .unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    fetch(&f, &server, "/a.txt").await.unwrap();
    fetch(&f, &server, "/b.txt").await.unwrap();
    assert_eq!(server.requests_for("/robots.txt").len(), 1);
}

#[tokio::test]
async fn errors_are_distinct() {
    let big = "x".repeat(4096);
    let server = FixtureSite::new()
        .page("/big.txt", FixturePage::text(big))
        .page("/slow.txt", FixturePage::text("slow").delayed(Duration::from_secs(3)))
        .page("/gone", FixturePage::status(410))
        .page("/doc.pdf", FixturePage::with_type("application/pdf", b"%PDF-1.4".to_vec()))
        .start()
        .await
        .unwrap();
    let f = Fetcher::new(FetchPolicy {
        max_bytes: 1024,
        timeout_secs: 0.5,
        per_host_min_interval_secs: 0.0,
        ..FetchPolicy::default()
    })
    .unwrap();
    let e = fetch(&f, &server, "/big.txt").await.unwrap_err();
    assert!(matches!(e, FetchError::Oversize { limit: 1024, .. }), "{e:?}");
    let e = fetch(&f, &server, "/slow.txt").await.unwrap_err();
    assert!(matches!(e, FetchError::Timeout(_)), "{e:?}");
    let e = fetch(&f, &server, "/gone").await.unwrap_err();
    assert!(matches!(e, FetchError::Status { status: 410, .. }), "{e:?}");
    let doc = fetch(&f, &server, "/doc.pdf").await.unwrap();
    assert_eq!(doc.text, None);
    let e = fetch(&f, &server, "/nowhere").await.unwrap_err();
    assert_eq!(e.code(), "http_status");
}

#[tokio::test]
async fn network_failure() {
    // Bind and drop to find a port with nothing listening.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let f = Fetcher::new(policy(0.0)).unwrap();
    let url = canonicalize_url(&format!("http://127.0.0.1:{port}/x")).unwrap();
    // robots.txt is unreachable, which is treated as a full disallow
    let e = f.fetch(&url).await.unwrap_err();
    assert!(matches!(e, FetchError::RobotsDenied(_)), "{e:?}");
}

#[tokio::test]
async fn serves_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("en")).unwrap();
    std::fs::write(dir.path().join("en/index.html"), "<p>Index page.</p>").unwrap();
    std::fs::write(dir.path().join("robots.txt"), "User-agent: *\nDisallow: /x\n").unwrap();
    let server = FixtureSite::new().dir(dir.path()).unwrap().start().await.unwrap();
    let f = Fetcher::new(policy(0.0)).unwrap();
    let doc = fetch(&f, &server, "/en/").await.unwrap();
    assert_eq!(doc.text.as_deref(), Some("Index page."));
    assert!(matches!(fetch(&f, &server, "/x/y").await, Err(FetchError::RobotsDenied(_))));
}

#[test]
fn invalid_policy_rejected() {
    let p = FetchPolicy {
        timeout_secs: 0.0,
        ..FetchPolicy::default()
    };
    assert!(matches!(Fetcher::new(p), Err(FetchError::InvalidPolicy(_))));
}
