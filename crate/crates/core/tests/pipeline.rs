use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use rti_core::detector::{detect_all, TokenizationMode};
use rti_core::evalkit::threshold_sweep;
use rti_core::extract::{ContainerKind, FilterConfig};
use rti_core::gateway::{FaultKind, FaultSpec, Gateway, MockBackend, TokenSelector, TranslationCache};
use rti_core::pipeline::{self, prepare, translate_pairs, PipelineConfig, PipelineError};
use rti_core::synth;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/worked-example")
}

fn worked_example(threshold: usize) -> pipeline::RunOutput {
    let mut cfg = PipelineConfig::load(&data_dir().join("config.toml")).unwrap();
    cfg.threshold = threshold;
    let corpus = pipeline::load_corpus(&data_dir().join("corpus.jsonl")).unwrap();
    pipeline::run(&cfg, &corpus).unwrap()
}

#[test]
fn worked_example_replay() {
    let out = worked_example(0);
    assert_eq!(out.report.summary.sentences, 2);
    assert_eq!(out.report.summary.rtis, 3);
    assert_eq!(out.report.summary.pairs, 4);
    assert_eq!(out.report.issues.len(), 1);
    let issue = &out.report.issues[0];
    assert_eq!(issue.pair.rti.text, "chummy bilateral talks");
    assert_eq!(issue.pair.container_kind, ContainerKind::FullSentence);
    assert_eq!(issue.distance, 2);
    assert_eq!(worked_example(1).report.issues.len(), 1);
    assert!(worked_example(2).report.issues.is_empty());
}

#[test]
fn worked_example_report_is_stable() {
    assert_eq!(worked_example(0).report.to_json(), worked_example(0).report.to_json());
    let json = worked_example(0).report.to_json();
    let parsed = pipeline::Report::from_json(&json).unwrap();
    assert_eq!(parsed.to_json(), json);
}

fn mock_gateway(faults: &[(String, FaultSpec)]) -> Gateway {
    let mut backend = MockBackend::new(synth::dictionary());
    for (text, f) in faults {
        backend.inject(text, f.clone());
    }
    Gateway::new("mock", Box::new(backend), TranslationCache::default()).with_concurrency(4)
}

#[test]
fn clean_mock_corpus_has_no_issues() {
    let corpus = synth::generate_corpus(80, 11);
    let prepared = prepare(&corpus, &FilterConfig::default()).unwrap();
    let pairs = translate_pairs(&prepared, &mock_gateway(&[]), "en", "zh").unwrap();
    assert!(
        pairs.len() > 80,
        "corpus should produce plenty of pairs, got {}",
        pairs.len()
    );
    let mode = TokenizationMode::for_language("zh");
    for tp in &pairs {
        assert_eq!(tp.distance(mode), 0);
    }
    assert!(detect_all(&pairs, 0, mode).unwrap().is_empty());
}

#[test]
fn single_injected_fault_sweep() {
    // drop two RTI-only target tokens from one container; the pair then
    // sits at distance 2
    let corpus = synth::generate_corpus(30, 5);
    let prepared = prepare(&corpus, &FilterConfig::default()).unwrap();
    let mode = TokenizationMode::for_language("zh");
    let clean = translate_pairs(&prepared, &mock_gateway(&[]), "en", "zh").unwrap();

    let victim = clean
        .iter()
        .find(|tp| {
            let rti_tokens: Vec<&str> = tp.pair.rti.text.split(' ').collect();
            let container: Vec<&str> = tp.pair.container_text.split(' ').collect();
            let off = tp.pair.rti.span.start - tp.pair.container_span.start;
            let rest: Vec<&str> = container[..off]
                .iter()
                .chain(&container[off + rti_tokens.len()..])
                .copied()
                .collect();
            // first two RTI words unique in the container and distinct
            rti_tokens.len() >= 2
                && rti_tokens[0] != rti_tokens[1]
                && !rest.contains(&rti_tokens[0])
                && !rest.contains(&rti_tokens[1])
                && rti_tokens[2..].iter().all(|w| w != &rti_tokens[0] && w != &rti_tokens[1])
                // the container text must not be an RTI side anywhere
                && clean.iter().all(|o| o.pair.rti.text != tp.pair.container_text)
        })
        .expect("a suitable pair");
    let off = victim.pair.rti.span.start - victim.pair.container_span.start;
    let fault = FaultSpec::new(
        FaultKind::UnderTranslation,
        TokenSelector::Span {
            start: off,
            end: off + 2,
        },
        1,
    );
    let faulty = translate_pairs(
        &prepared,
        &mock_gateway(&[(victim.pair.container_text.clone(), fault)]),
        "en",
        "zh",
    )
    .unwrap();

    let affected: Vec<_> = faulty.iter().filter(|tp| tp.distance(mode) > 0).collect();
    assert!(affected
        .iter()
        .any(|tp| tp.pair == victim.pair && tp.distance(mode) == 2));

    let rows = threshold_sweep(&faulty, &[0, 1, 2], mode, None).unwrap();
    let counts: Vec<usize> = rows.iter().map(|r| r.suspicious_count).collect();
    let at = |d: usize| affected.iter().filter(|tp| tp.distance(mode) > d).count();
    assert_eq!(counts, [at(0), at(1), at(2)]);
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(counts[2], 0);

    let clean_rows = threshold_sweep(&clean, &[0], mode, None).unwrap();
    assert_eq!(clean_rows[0].suspicious_count, 0);
}

#[test]
fn yield_mismatch_is_reported() {
    let corpus = pipeline::parse_corpus(
        r#"{"id":"bad","text":"The dog barked","tree":"(S (NP (DT The) (NN cat)) (VP (VBD barked)))"}"#,
    )
    .unwrap();
    let err = pipeline::run(&PipelineConfig::default(), &corpus).err().unwrap();
    assert!(matches!(err, PipelineError::YieldMismatch { ref sentence_id, .. } if sentence_id == "bad"));
}

/// Minimal HTTP server: answers each request with `{"t": "<upper-cased q>"}`
/// and counts requests.
fn echo_server() -> (String, std::sync::Arc<std::sync::atomic::AtomicUsize>) {
    use std::sync::atomic::{AtomicUsize, Ordering};
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let hits = std::sync::Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let stream = stream.unwrap();
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream);
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let target = request_line.split(' ').nth(1).unwrap_or("");
            let q = url::form_urlencoded::parse(target.split_once('?').map(|x| x.1).unwrap_or("").as_bytes())
                .find(|(k, _)| k == "q")
                .map(|(_, v)| v.to_uppercase())
                .unwrap_or_default();
            let body = serde_json::json!({ "t": q }).to_string();
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (base, hits)
}

#[test]
fn rest_backend_writes_through_to_cache_file() {
    use std::sync::atomic::Ordering;
    let (base, hits) = echo_server();
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"
threshold = 0
tgt_lang = "de"
[backend]
kind = "rest"
id = "echo"
cache = "cache.json"
[backend.rest]
url_template = "{base}/t?q={{text}}&from={{src}}&to={{tgt}}"
response_path = "/t"
backoff_ms = 1
"#
    );
    let cfg_path = dir.path().join("config.toml");
    std::fs::write(&cfg_path, config).unwrap();
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    let corpus = pipeline::load_corpus(&data_dir().join("corpus.jsonl")).unwrap();

    let first = pipeline::run(&cfg, &corpus).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 5, "one call per distinct text");
    assert!(first.report.issues.is_empty());
    let cache = TranslationCache::load(&dir.path().join("cache.json")).unwrap();
    assert_eq!(cache.len(), 5);

    // replay-only against the written cache: no further network traffic
    let mut replay = cfg.clone();
    replay.backend.replay_only = true;
    let second = pipeline::run(&replay, &corpus).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 5);
    assert_eq!(second.report.summary, first.report.summary);
}
