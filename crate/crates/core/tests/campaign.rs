use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use prism_core::agents::AgentSpec;
use prism_core::bank::{build_bank, Bank, BankConfig};
use prism_core::gateway::{
    dedupe_latest, run_campaign, CampaignPlan, DecodeParams, RemoteConfig, RemoteRespondent, Respondent,
    RespondentKind, RetryPolicy, SimulatedRespondent, Transcript, TRANSCRIPTS_FILE,
};
use prism_core::bank::Scenario;
use prism_core::records::read_jsonl;
use prism_core::taxonomy::LayerId;
use prism_core::Error;

fn small_bank() -> Bank {
    let mut cfg = BankConfig::default();
    cfg.layers = vec![LayerId::Source];
    cfg.domains.truncate(1);
    cfg.instantiations = 2;
    cfg.perspectives = 1;
    cfg.pcs_pairs = 0;
    build_bank(&cfg).unwrap()
}

/// Serves scripted responses; `script(n)` gives status and body for request n.
fn serve<F>(script: F) -> (String, Arc<AtomicUsize>, Arc<Mutex<Vec<String>>>)
where
    F: Fn(usize) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let count = Arc::new(AtomicUsize::new(0));
    let headers = Arc::new(Mutex::new(Vec::new()));
    let (c, h) = (count.clone(), headers.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
                if lower.starts_with("authorization:") {
                    h.lock().unwrap().push(line.trim().to_string());
                }
            }
            let mut body = vec![0u8; length];
            let _ = reader.read_exact(&mut body);
            let n = c.fetch_add(1, Ordering::SeqCst);
            let (status, text) = script(n);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    (url, count, headers)
}

fn answer(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn remote(url: &str, key_env: Option<&str>) -> RemoteRespondent {
    RemoteRespondent::new(RemoteConfig {
        id: "remote".into(),
        base_url: url.into(),
        model: "m".into(),
        api_key_env: key_env.map(str::to_string),
        auth_header: "Authorization".into(),
        auth_prefix: "Bearer ".into(),
        system_prompt: None,
        decode: DecodeParams::default(),
        retry: RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 1,
            max_delay_ms: 4,
        },
        timeout_s: 5,
    })
    .unwrap()
}

fn sequential() -> CampaignPlan {
    CampaignPlan {
        concurrency: Some(1),
        ..CampaignPlan::default()
    }
}

fn logged(dir: &Path) -> Vec<Transcript> {
    dedupe_latest(read_jsonl(&dir.join(TRANSCRIPTS_FILE)).unwrap())
}

#[test]
fn rate_limited_requests_are_retried() {
    let bank = small_bank();
    let (url, count, _) = serve(|n| if n % 2 == 0 { (429, "{}".into()) } else { (200, answer("A")) });
    let dir = tempfile::tempdir().unwrap();
    let out = run_campaign(&bank, &remote(&url, None), serde_json::Value::Null, &sequential(), dir.path(), None)
        .unwrap();
    assert!(out.complete);
    assert_eq!(out.transport_errors, 0);
    assert_eq!(count.load(Ordering::SeqCst), 2 * out.presentations);
    let t = logged(dir.path());
    assert_eq!(t.len(), 180);
    assert!(t.iter().all(|t| t.parse_ok && t.raw_text == "A"));
}

#[test]
fn credential_comes_from_the_environment() {
    let bank = small_bank();
    std::env::set_var("PRISM_TEST_KEY", "k-123");
    let (url, _, headers) = serve(|_| (200, answer("B")));
    let dir = tempfile::tempdir().unwrap();
    run_campaign(
        &bank,
        &remote(&url, Some("PRISM_TEST_KEY")),
        serde_json::Value::Null,
        &sequential(),
        dir.path(),
        None,
    )
    .unwrap();
    let seen = headers.lock().unwrap();
    assert!(!seen.is_empty());
    assert!(seen.iter().all(|h| h.ends_with("Bearer k-123")));
    let log = std::fs::read_to_string(dir.path().join(TRANSCRIPTS_FILE)).unwrap();
    assert!(!log.contains("k-123"));
}

#[test]
fn missing_credential_variable_is_a_config_error() {
    let mut cfg = remote("http://127.0.0.1:9", None).config().clone();
    cfg.api_key_env = Some("PRISM_TEST_UNSET_VARIABLE".into());
    assert!(matches!(RemoteRespondent::new(cfg), Err(Error::Config(_))));
}

#[test]
fn rejected_credential_aborts() {
    let bank = small_bank();
    let (url, count, _) = serve(|_| (401, "{}".into()));
    let dir = tempfile::tempdir().unwrap();
    let err = run_campaign(&bank, &remote(&url, None), serde_json::Value::Null, &sequential(), dir.path(), None)
        .err()
        .unwrap();
    assert!(matches!(err, Error::Auth(_)));
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_exhausts_the_failure_budget() {
    let bank = small_bank();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}");
    let dir = tempfile::tempdir().unwrap();
    let plan = CampaignPlan {
        chunk_size: 4,
        ..sequential()
    };
    let err = run_campaign(&bank, &remote(&url, None), serde_json::Value::Null, &plan, dir.path(), None)
        .err()
        .unwrap();
    assert!(matches!(err, Error::BudgetExceeded { .. }), "{err:?}");
    let t = logged(dir.path());
    assert!(!t.is_empty());
    assert!(t.iter().all(|t| t.is_transport_error() && !t.parse_ok));
}

#[test]
fn transport_errors_are_retried_on_resume() {
    let bank = small_bank();
    let fail = Arc::new(AtomicUsize::new(1));
    let f = fail.clone();
    let (url, _, _) = serve(move |_| {
        if f.load(Ordering::SeqCst) == 1 {
            (503, "{}".into())
        } else {
            (200, answer("A"))
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let plan = CampaignPlan {
        failure_budget: 1.0,
        ..sequential()
    };
    let first = run_campaign(&bank, &remote(&url, None), serde_json::Value::Null, &plan, dir.path(), None).unwrap();
    assert_eq!(first.transport_errors, 180);
    assert!(!first.complete);
    fail.store(0, Ordering::SeqCst);
    let second = run_campaign(&bank, &remote(&url, None), serde_json::Value::Null, &plan, dir.path(), None).unwrap();
    assert!(second.complete);
    assert_eq!(second.submitted, 180);
    assert!(logged(dir.path()).iter().all(|t| t.parse_ok));
}

struct Counting {
    inner: SimulatedRespondent,
    calls: AtomicUsize,
}

impl Respondent for Counting {
    fn id(&self) -> &str {
        self.inner.id()
    }
    fn kind(&self) -> RespondentKind {
        self.inner.kind()
    }
    fn decode(&self) -> &DecodeParams {
        self.inner.decode()
    }
    fn submit(&self, scenario: &Scenario, prompt: &str, repeat: u8) -> prism_core::Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.submit(scenario, prompt, repeat)
    }
}

fn counting() -> Counting {
    Counting {
        inner: SimulatedRespondent::new(AgentSpec::bradley_terry_reference("bt", 0.8, 9).unwrap()).unwrap(),
        calls: AtomicUsize::new(0),
    }
}

#[test]
fn interrupted_campaign_resumes_without_resubmitting() {
    let bank = small_bank();
    let full = tempfile::tempdir().unwrap();
    let r = counting();
    run_campaign(&bank, &r, serde_json::Value::Null, &sequential(), full.path(), None).unwrap();
    let reference = std::fs::read(full.path().join(TRANSCRIPTS_FILE)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let r = counting();
    run_campaign(&bank, &r, serde_json::Value::Null, &sequential(), dir.path(), None).unwrap();
    let log = dir.path().join(TRANSCRIPTS_FILE);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let kept = 30;
    let mut cut = lines[..kept].join("\n");
    cut.push('\n');
    cut.push_str(&lines[kept][..lines[kept].len() / 2]);
    std::fs::write(&log, cut).unwrap();

    let r = counting();
    let out = run_campaign(&bank, &r, serde_json::Value::Null, &sequential(), dir.path(), None).unwrap();
    assert!(out.complete);
    assert_eq!(out.resumed, kept);
    assert_eq!(r.calls.load(Ordering::SeqCst), 180 - kept);
    assert_eq!(std::fs::read(&log).unwrap(), reference);
}

#[test]
fn cache_answers_a_fresh_run() {
    let bank = small_bank();
    let cache = tempfile::tempdir().unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_campaign(&bank, &counting(), serde_json::Value::Null, &sequential(), a.path(), Some(cache.path())).unwrap();
    let r = counting();
    let out = run_campaign(&bank, &r, serde_json::Value::Null, &sequential(), b.path(), Some(cache.path())).unwrap();
    assert_eq!(out.cache_hits, 180);
    assert_eq!(r.calls.load(Ordering::SeqCst), 0);
    assert_eq!(logged(a.path()), logged(b.path()));
}

#[test]
fn run_directory_of_another_respondent_is_refused() {
    let bank = small_bank();
    let dir = tempfile::tempdir().unwrap();
    run_campaign(&bank, &counting(), serde_json::Value::Null, &sequential(), dir.path(), None).unwrap();
    let other = SimulatedRespondent::new(AgentSpec::strict("other", 0.0, 0)).unwrap();
    let err = run_campaign(&bank, &other, serde_json::Value::Null, &sequential(), dir.path(), None)
        .err()
        .unwrap();
    assert!(matches!(err, Error::Config(_)));
}
