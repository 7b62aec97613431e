use std::path::PathBuf;

use onfly::adapters::protocol::{handle_line, Response};
use onfly::adapters::*;
use onfly::corpus::{planted_bias, source};
use onfly::metrics::perplexity;
use serde_json::{json, Value};

#[test]
fn planted_bias_separability() {
    let mut m = MockClassifier::default();
    let corpus = planted_bias(200, 1);
    let (mut b_ok, mut b_n, mut u_ok, mut u_n) = (0, 0, 0, 0);
    for l in &corpus {
        let p = m.classify(&source(l)).unwrap();
        let correct = p.argmax() == l.label;
        if l.biased {
            b_n += 1;
            b_ok += usize::from(correct);
        } else {
            u_n += 1;
            u_ok += usize::from(correct);
            assert!(p.probs()[l.label] >= 0.9);
        }
    }
    assert_eq!(b_n, 100);
    assert!(b_ok as f64 / b_n as f64 <= 0.2, "biased accuracy {b_ok}/{b_n}");
    assert!(u_ok as f64 / u_n as f64 >= 0.95, "unbiased accuracy {u_ok}/{u_n}");
}

#[test]
fn greedy_beats_samples_on_perplexity() {
    let m = NgramModel::bundled();
    let greedy = perplexity(&m.greedy("fn main(", 64).unwrap()).unwrap().raw;
    let samples = m.sample_many("fn main(", 100, 1.0, 5, 64).unwrap();
    let mean = samples.iter().map(|s| perplexity(s).unwrap().raw).sum::<f64>() / 100.0;
    assert!(greedy <= mean, "greedy {greedy} vs mean sample {mean}");
}

#[test]
fn step_distributions_cover_the_vocabulary() {
    let mut m = NgramModel::bundled();
    let vocab = m.capabilities().unwrap().vocab;
    for s in m.sample_many("", 10, 1.0, 2, 40).unwrap() {
        for d in s.step_dists.unwrap() {
            assert_eq!(d.len(), vocab.len());
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(s.logprobs.iter().all(|&l| l <= 0.0));
    }
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_transcript.jsonl")
}

const NESTED: &str = "fn main(limit) { let total = 0; let outer = 0; while (outer < limit) { let inner = 0; \
    while (inner < limit) { total = total + inner; inner = inner + 1; } outer = outer + 1; } return total; }";

/// The scripted session the transcript records.
fn script() -> Vec<(&'static str, Value)> {
    vec![
        ("classifier", json!({"id": 1, "op": "capabilities"})),
        (
            "classifier",
            json!({"id": 2, "op": "classify", "payload": {"source": NESTED}}),
        ),
        (
            "classifier",
            json!({"id": 3, "op": "classify", "payload": {"source": "fn main(n) { return n / 2; }"}}),
        ),
        (
            "classifier",
            json!({"id": 4, "op": "classify_stochastic", "payload": {"source": NESTED, "seed": 7}}),
        ),
        (
            "classifier",
            json!({"id": 5, "op": "embed", "payload": {"source": NESTED}}),
        ),
        (
            "classifier",
            json!({"id": 6, "op": "classify_embedding", "payload": {"z": [1, 1, 2, 0, 2, 0.25, 2, 1.5]}}),
        ),
        (
            "classifier",
            json!({"id": 7, "op": "classify", "payload": {"source": "fn main( {"}}),
        ),
        ("classifier", json!({"id": 8, "op": "explode", "payload": {}})),
        (
            "classifier",
            json!({"id": 9, "op": "classify", "payload": {"text": "x"}}),
        ),
        ("classifier", json!({"id": 10, "op": "step", "payload": {"prefix": []}})),
        (
            "ngram",
            json!({"id": 11, "op": "generate", "payload": {"prompt": "fn main(", "max_len": 12}}),
        ),
        (
            "ngram",
            json!({"id": 12, "op": "sample", "payload": {"prompt": "Compute the sum.", "n": 2, "temperature": 1.0, "seed": 3, "max_len": 10}}),
        ),
        (
            "ngram",
            json!({"id": 13, "op": "step", "payload": {"prefix": ["fn", "main"]}}),
        ),
        (
            "ngram",
            json!({"id": 14, "op": "generate", "payload": {"prompt": "fn nowhere_seen(", "max_len": 4}}),
        ),
        (
            "ngram",
            json!({"id": 15, "op": "classify", "payload": {"source": NESTED}}),
        ),
    ]
}

fn adapter(name: &str) -> Box<dyn Adapter> {
    format!("builtin:{name}")
        .parse::<AdapterSpec>()
        .unwrap()
        .connect()
        .unwrap()
}

fn record() -> Vec<Value> {
    script()
        .into_iter()
        .map(|(name, req)| {
            let resp = handle_line(adapter(name).as_mut(), &req.to_string());
            json!({"adapter": name, "request": req, "response": resp})
        })
        .collect()
}

/// Set `ONFLY_BLESS=1` to rewrite the fixture after an intended change.
#[test]
fn golden_transcript_replays_identically() {
    let fresh = record();
    if std::env::var_os("ONFLY_BLESS").is_some() {
        let text: String = fresh.iter().map(|v| format!("{v}\n")).collect();
        std::fs::create_dir_all(fixture().parent().unwrap()).unwrap();
        std::fs::write(fixture(), text).unwrap();
    }
    let golden = std::fs::read_to_string(fixture()).expect("golden transcript present");
    let golden: Vec<Value> = golden.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(golden.len(), fresh.len());
    for (g, f) in golden.iter().zip(&fresh) {
        assert_eq!(g, f);
        let resp: Response = serde_json::from_value(g["response"].clone()).unwrap();
        assert_eq!(resp.id, g["request"]["id"].as_u64());
        assert_eq!(resp.ok, resp.error.is_none());
        assert_eq!(resp.ok, resp.result.is_some());
    }
    let codes: Vec<&str> = golden
        .iter()
        .filter_map(|g| g["response"]["error"]["code"].as_str())
        .collect();
    for code in [
        "parse_error",
        "unknown_op",
        "bad_request",
        "missing_capability",
        "unknown_token",
    ] {
        assert!(codes.contains(&code), "transcript lacks {code}");
    }
}

#[test]
fn subprocess_client_checks_ids_and_errors() {
    let ok = r#"while read l; do id=$(echo "$l" | sed 's/.*"id":\([0-9]*\).*/\1/'); echo "{\"id\":$id,\"ok\":true,\"result\":{\"probs\":[0.25,0.75]}}"; done"#;
    let mut a = SubprocessAdapter::spawn(ok).unwrap();
    assert_eq!(a.classify("fn main() { return 1; }").unwrap().probs(), &[0.25, 0.75]);
    assert_eq!(a.classify("again").unwrap().probs(), &[0.25, 0.75]);

    let wrong_id = r#"while read l; do echo '{"id":99,"ok":true,"result":{}}'; done"#;
    let err = SubprocessAdapter::spawn(wrong_id).unwrap().classify("x").unwrap_err();
    assert!(err.to_string().contains("does not echo"), "{err}");

    let refuses =
        r#"while read l; do echo '{"id":1,"ok":false,"error":{"code":"missing_capability","message":"embed"}}'; done"#;
    let err = SubprocessAdapter::spawn(refuses).unwrap().embed("x").unwrap_err();
    assert_eq!(err, AdapterError::MissingCapability("embed".into()));

    let err = SubprocessAdapter::spawn("exit 0").unwrap().classify("x").unwrap_err();
    assert_eq!(err.code(), "internal");
}
