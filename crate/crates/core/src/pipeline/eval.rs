use std::path::{Path, PathBuf};
use std::sync::Arc;

use minilang::{interpret, parse, Program};
use rayon::prelude::*;
use serde::Deserialize;

use super::assess::{Assessor, GenContext};
use super::{digest, PipelineError, Task};
use crate::adapters::AdapterSpec;
use crate::corpus::arg_vectors;
use crate::metrics::MetricKind;
use crate::validator::{render_table, roc_auc, AucRow, EvalRecord, Label, ValidatorConfig, ValidatorError};

/// Argument vectors run per generated program by the correctness check.
pub const PROBE_VECTORS: usize = 10;

/// Digest of `entry`'s outcomes on the probe vectors drawn from
/// `probe_seed`. Two programs with equal digests agree on every probe.
pub fn probe_digest(p: &Program, entry: &str, probe_seed: u64, fuel: u64) -> Result<String, String> {
    let f = p.function(entry).ok_or_else(|| format!("no function `{entry}`"))?;
    let arity = f.params.len();
    let mut text = format!("{arity}\n");
    for args in arg_vectors(arity, probe_seed, PROBE_VECTORS, 0.0) {
        text.push_str(&interpret(p, entry, &args, fuel).to_string());
        text.push('\n');
    }
    Ok(digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub metrics: Vec<MetricKind>,
    pub seed: u64,
    /// Supplies sample counts, passes and probes; its weights are unused.
    pub validator: ValidatorConfig,
    /// Column label under the model name; empty for a single header row.
    pub benchmark: String,
    pub fuel: u64,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub task: Task,
    pub model: String,
    pub rows: Vec<AucRow>,
    pub records: Vec<EvalRecord>,
    /// Why a cell is n/a, one line per affected metric.
    pub notes: Vec<String>,
    pub accuracy: f64,
    pub table: String,
    pub csv: String,
}

enum Truth {
    Label(String),
    Probe {
        entry: String,
        probe_seed: u64,
        expected: String,
    },
}

struct Entry {
    path: PathBuf,
    text: String,
    truth: Truth,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassRow {
    path: PathBuf,
    label: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenRow {
    path: PathBuf,
    entry: String,
    probe_seed: u64,
    expected_digest: String,
}

fn read_manifest(path: &Path) -> Result<(Task, Vec<Entry>), PipelineError> {
    let err = |message: String| PipelineError::Manifest {
        path: path.display().to_string(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| err(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let task = match headers.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["path", "label"] => Task::Classification,
        ["path", "entry", "probe_seed", "expected_digest"] => Task::Generation,
        _ => {
            return Err(err(format!(
                "header must be `path,label` or `path,entry,probe_seed,expected_digest`, got `{}`",
                headers.join(",")
            )))
        }
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let load = |p: &Path, line: usize| {
        let full = base.join(p);
        std::fs::read_to_string(&full)
            .map(|text| (full.clone(), text))
            .map_err(|e| err(format!("row {line}: {}: {e}", full.display())))
    };
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(format!("row {line}: {e}")))?;
        let entry = match task {
            Task::Classification => {
                let r: ClassRow = rec.deserialize(None).map_err(|e| err(format!("row {line}: {e}")))?;
                let (path, text) = load(&r.path, line)?;
                Entry {
                    path,
                    text,
                    truth: Truth::Label(r.label),
                }
            }
            Task::Generation => {
                let r: GenRow = rec.deserialize(None).map_err(|e| err(format!("row {line}: {e}")))?;
                let (path, text) = load(&r.path, line)?;
                Entry {
                    path,
                    text,
                    truth: Truth::Probe {
                        entry: r.entry,
                        probe_seed: r.probe_seed,
                        expected: r.expected_digest,
                    },
                }
            }
        };
        out.push(entry);
    }
    if out.is_empty() {
        return Err(err("no entries".into()));
    }
    Ok((task, out))
}

fn resolve_label(label: &str, labels: &[String]) -> Option<usize> {
    label
        .parse::<usize>()
        .ok()
        .filter(|&i| labels.is_empty() || i < labels.len())
        .or_else(|| labels.iter().position(|l| l == label))
}

/// Whether the prediction was right, plus each metric's `u` or the reason
/// it could not be computed.
type Scored = (bool, Vec<Result<f64, String>>);

fn score_entry(
    e: &Entry,
    task: Task,
    spec: &AdapterSpec,
    opts: &EvalOptions,
    protos: &Option<Arc<crate::metrics::PrototypeSet>>,
) -> Result<Scored, PipelineError> {
    let mut session = spec.connect()?;
    let mut a =
        Assessor::new(session.as_mut(), opts.validator.clone(), opts.seed, task)?.with_prototypes(protos.clone());
    let context = |err: PipelineError| PipelineError::Input(format!("{}: {err}", e.path.display()));
    match &e.truth {
        Truth::Label(label) => {
            let labels = a.capabilities().labels.clone();
            let want = resolve_label(label, &labels).ok_or_else(|| PipelineError::Manifest {
                path: e.path.display().to_string(),
                message: format!("unknown label `{label}`"),
            })?;
            let src = match parse(&e.text) {
                Ok(p) => minilang::pretty(&p),
                Err(err) => return Err(PipelineError::Input(format!("{}: {err}", e.path.display()))),
            };
            let p = a.adapter().classify(&src).map_err(|x| context(x.into()))?;
            let us = opts
                .metrics
                .iter()
                .map(|&k| a.class_metric(k, &src, &p).map(|m| m.u).map_err(|x| x.to_string()))
                .collect();
            Ok((p.argmax() == want, us))
        }
        Truth::Probe {
            entry,
            probe_seed,
            expected,
        } => {
            let max_len = opts.validator.max_len;
            let g = a.adapter().generate(&e.text, max_len).map_err(|x| context(x.into()))?;
            let correct = parse(&g.text())
                .ok()
                .and_then(|p| probe_digest(&p, entry, *probe_seed, opts.fuel).ok())
                .is_some_and(|d| &d == expected);
            let mut ctx = GenContext::for_prompt(&e.text);
            let us = opts
                .metrics
                .iter()
                .map(|&k| a.gen_metric(k, &g, &mut ctx).map(|m| m.u).map_err(|x| x.to_string()))
                .collect();
            Ok((correct, us))
        }
    }
}

/// ROC-AUC of each metric's `u` as a detector of wrong predictions over
/// the manifest's inputs. Inputs are scored in parallel, each with its own
/// adapter session; records keep manifest order.
pub fn evaluate_metrics(manifest: &Path, spec: &AdapterSpec, opts: &EvalOptions) -> Result<EvalOutput, PipelineError> {
    let (task, entries) = read_manifest(manifest)?;
    for &k in &opts.metrics {
        let fits = match task {
            Task::Classification => k.is_classification(),
            Task::Generation => k.is_generation(),
        };
        if !fits {
            return Err(PipelineError::Config(format!(
                "metric {k} does not apply to this manifest"
            )));
        }
    }
    let mut first = spec.connect()?;
    let model = first.id();
    let protos = if task == Task::Classification && opts.metrics.contains(&MetricKind::Repr) {
        let mut a = Assessor::new(first.as_mut(), opts.validator.clone(), opts.seed, task)?;
        a.prototypes().ok()
    } else {
        None
    };
    drop(first);

    let scored: Vec<Scored> = entries
        .par_iter()
        .map(|e| score_entry(e, task, spec, opts, &protos))
        .collect::<Result<_, _>>()?;

    let correct = scored.iter().filter(|s| s.0).count();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut notes = Vec::new();
    for (mi, &kind) in opts.metrics.iter().enumerate() {
        let mut recs = Vec::new();
        let mut failure = None;
        for (e, (ok, us)) in entries.iter().zip(&scored) {
            match &us[mi] {
                Ok(u) => recs.push(EvalRecord {
                    score: *u,
                    label: if *ok { Label::Correct } else { Label::Incorrect },
                    metric: kind.id().to_string(),
                    model: model.clone(),
                    benchmark: opts.benchmark.clone(),
                }),
                Err(m) => {
                    failure.get_or_insert_with(|| format!("{}: {m}", e.path.display()));
                }
            }
        }
        let auc = match failure {
            Some(f) => {
                notes.push(format!("{}: unavailable ({f})", kind.id()));
                None
            }
            None => match roc_auc(&recs) {
                Ok(a) => Some(a),
                Err(ValidatorError::DegenerateInput(m)) => {
                    notes.push(format!("{}: degenerate input ({m})", kind.id()));
                    None
                }
                Err(other) => return Err(other.into()),
            },
        };
        records.extend(recs);
        rows.push(AucRow {
            metric: kind.label().to_string(),
            model: model.clone(),
            benchmark: opts.benchmark.clone(),
            auc,
        });
    }
    let (table, csv) = render_table(&rows);
    Ok(EvalOutput {
        task,
        model,
        rows,
        records,
        notes,
        accuracy: correct as f64 / scored.len() as f64,
        table,
        csv,
    })
}
