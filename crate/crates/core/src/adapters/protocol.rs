//! Line-delimited JSON request/response protocol.
//!
//! Request: `{"id": n, "op": "...", "payload": {...}}`. Response:
//! `{"id": n, "ok": true, "result": ...}` or
//! `{"id": n, "ok": false, "error": {"code": "...", "message": "..."}}`.

use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Adapter, AdapterError};
use crate::metrics::ProbVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// `None` only when the request line could not be read at all.
    pub id: Option<u64>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl Response {
    pub fn from_result(id: Option<u64>, r: Result<Value, AdapterError>) -> Self {
        match r {
            Ok(v) => Response {
                id,
                ok: true,
                result: Some(v),
                error: None,
            },
            Err(e) => Response {
                id,
                ok: false,
                result: None,
                error: Some(WireError {
                    code: e.code().to_string(),
                    message: e.message(),
                }),
            },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcePayload {
    pub source: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticPayload {
    pub source: String,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingPayload {
    pub z: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratePayload {
    pub prompt: String,
    pub max_len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePayload {
    pub prompt: String,
    pub n: usize,
    pub temperature: f64,
    pub seed: u64,
    pub max_len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPayload {
    pub prefix: Vec<String>,
}

fn payload<T: DeserializeOwned>(v: Value) -> Result<T, AdapterError> {
    // an absent payload is an empty object
    let v = if v.is_null() { json!({}) } else { v };
    serde_json::from_value(v).map_err(|e| AdapterError::BadRequest(e.to_string()))
}

fn to_value<T: Serialize>(v: T) -> Result<Value, AdapterError> {
    serde_json::to_value(v).map_err(|e| AdapterError::Internal(e.to_string()))
}

fn probs(p: ProbVector) -> Value {
    json!({ "probs": Vec::<f64>::from(p) })
}

/// Executes one operation against an in-process adapter.
pub fn dispatch(adapter: &mut dyn Adapter, op: &str, body: Value) -> Result<Value, AdapterError> {
    match op {
        "capabilities" => to_value(adapter.capabilities()?),
        "classify" => {
            let p: SourcePayload = payload(body)?;
            Ok(probs(adapter.classify(&p.source)?))
        }
        "classify_stochastic" => {
            let p: StochasticPayload = payload(body)?;
            Ok(probs(adapter.classify_stochastic(&p.source, p.seed)?))
        }
        "embed" => {
            let p: SourcePayload = payload(body)?;
            Ok(json!({ "embedding": adapter.embed(&p.source)? }))
        }
        "classify_embedding" => {
            let p: EmbeddingPayload = payload(body)?;
            Ok(probs(adapter.classify_embedding(&p.z)?))
        }
        "generate" => {
            let p: GeneratePayload = payload(body)?;
            to_value(adapter.generate(&p.prompt, p.max_len)?)
        }
        "sample" => {
            let p: SamplePayload = payload(body)?;
            let samples = adapter.sample(&p.prompt, p.n, p.temperature, p.seed, p.max_len)?;
            Ok(json!({ "samples": to_value(samples)? }))
        }
        "step" => {
            let p: StepPayload = payload(body)?;
            Ok(json!({ "dist": adapter.step(&p.prefix)? }))
        }
        other => Err(AdapterError::UnknownOp(other.to_string())),
    }
}

/// Answers one request line.
pub fn handle_line(adapter: &mut dyn Adapter, line: &str) -> Response {
    match serde_json::from_str::<Request>(line) {
        Ok(req) => Response::from_result(Some(req.id), dispatch(adapter, &req.op, req.payload)),
        Err(e) => {
            // echo the id when the envelope is at least an object with one
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(Value::as_u64));
            Response::from_result(id, Err(AdapterError::BadRequest(e.to_string())))
        }
    }
}

/// Serves requests from `input` until end of stream. Blank lines are ignored.
pub fn serve(adapter: &mut dyn Adapter, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = handle_line(adapter, &line);
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

/// Decodes a successful result body into `T`.
pub fn decode_result<T: DeserializeOwned>(v: Value) -> Result<T, AdapterError> {
    serde_json::from_value(v).map_err(|e| AdapterError::Internal(format!("malformed result: {e}")))
}

#[derive(Deserialize)]
pub(crate) struct ProbsResult {
    pub probs: ProbVector,
}

#[derive(Deserialize)]
pub(crate) struct EmbedResult {
    pub embedding: Vec<f64>,
}

#[derive(Deserialize)]
pub(crate) struct SamplesResult {
    pub samples: Vec<crate::metrics::GenerationResult>,
}

#[derive(Deserialize)]
pub(crate) struct StepResult {
    pub dist: Vec<f64>,
}
