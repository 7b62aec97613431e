//! Adapter backed by a child process speaking the wire protocol.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::Serialize;
use serde_json::{json, Value};

use super::protocol::{
    decode_result, EmbedResult, EmbeddingPayload, GeneratePayload, ProbsResult, Request, Response, SamplePayload,
    SamplesResult, SourcePayload, StepPayload, StepResult, StochasticPayload,
};
use super::{Adapter, AdapterError, Capabilities};
use crate::metrics::{GenerationResult, ProbVector};

/// One serial session with a child started through `sh -c`.
pub struct SubprocessAdapter {
    cmd: String,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

fn io_err(e: std::io::Error) -> AdapterError {
    AdapterError::Unavailable(e.to_string())
}

impl SubprocessAdapter {
    pub fn spawn(cmd: &str) -> Result<Self, AdapterError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Unavailable(format!("{cmd}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(SubprocessAdapter {
            cmd: cmd.to_string(),
            child,
            stdin,
            stdout,
            next_id: 1,
        })
    }

    /// Sends one request and waits for its response.
    pub fn call(&mut self, op: &str, payload: impl Serialize) -> Result<Value, AdapterError> {
        let id = self.next_id;
        self.next_id += 1;
        let req = Request {
            id,
            op: op.to_string(),
            payload: serde_json::to_value(payload).map_err(|e| AdapterError::Internal(e.to_string()))?,
        };
        let mut line = serde_json::to_string(&req).map_err(|e| AdapterError::Internal(e.to_string()))?;
        line.push('\n');
        self.stdin.write_all(line.as_bytes()).map_err(io_err)?;
        self.stdin.flush().map_err(io_err)?;
        let mut buf = String::new();
        if self.stdout.read_line(&mut buf).map_err(io_err)? == 0 {
            return Err(AdapterError::Unavailable(format!("`{}` closed its output", self.cmd)));
        }
        let resp: Response =
            serde_json::from_str(&buf).map_err(|e| AdapterError::Internal(format!("malformed response: {e}")))?;
        if resp.id != Some(id) {
            return Err(AdapterError::Internal(format!(
                "response id {:?} does not echo request id {id}",
                resp.id
            )));
        }
        match (resp.ok, resp.result, resp.error) {
            (true, Some(v), _) => Ok(v),
            (false, _, Some(e)) => Err(AdapterError::from_code(&e.code, e.message)),
            _ => Err(AdapterError::Internal("response has neither result nor error".into())),
        }
    }
}

impl Drop for SubprocessAdapter {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Adapter for SubprocessAdapter {
    fn id(&self) -> String {
        format!("cmd:{}", self.cmd)
    }

    fn capabilities(&mut self) -> Result<Capabilities, AdapterError> {
        let caps: Capabilities = decode_result(self.call("capabilities", json!({}))?)?;
        caps.check()?;
        Ok(caps)
    }

    fn classify(&mut self, source: &str) -> Result<ProbVector, AdapterError> {
        let r: ProbsResult = decode_result(self.call("classify", SourcePayload { source: source.into() })?)?;
        Ok(r.probs)
    }

    fn classify_stochastic(&mut self, source: &str, seed: u64) -> Result<ProbVector, AdapterError> {
        let p = StochasticPayload {
            source: source.into(),
            seed,
        };
        let r: ProbsResult = decode_result(self.call("classify_stochastic", p)?)?;
        Ok(r.probs)
    }

    fn embed(&mut self, source: &str) -> Result<Vec<f64>, AdapterError> {
        let r: EmbedResult = decode_result(self.call("embed", SourcePayload { source: source.into() })?)?;
        Ok(r.embedding)
    }

    fn classify_embedding(&mut self, z: &[f64]) -> Result<ProbVector, AdapterError> {
        let r: ProbsResult = decode_result(self.call("classify_embedding", EmbeddingPayload { z: z.to_vec() })?)?;
        Ok(r.probs)
    }

    fn generate(&mut self, prompt: &str, max_len: usize) -> Result<GenerationResult, AdapterError> {
        let p = GeneratePayload {
            prompt: prompt.into(),
            max_len,
        };
        decode_result(self.call("generate", p)?)
    }

    fn sample(
        &mut self,
        prompt: &str,
        n: usize,
        temperature: f64,
        seed: u64,
        max_len: usize,
    ) -> Result<Vec<GenerationResult>, AdapterError> {
        let p = SamplePayload {
            prompt: prompt.into(),
            n,
            temperature,
            seed,
            max_len,
        };
        let r: SamplesResult = decode_result(self.call("sample", p)?)?;
        Ok(r.samples)
    }

    fn step(&mut self, prefix: &[String]) -> Result<Vec<f64>, AdapterError> {
        let r: StepResult = decode_result(self.call(
            "step",
            StepPayload {
                prefix: prefix.to_vec(),
            },
        )?)?;
        Ok(r.dist)
    }
}
