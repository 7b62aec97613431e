//! Validity score, keep/adapt decision, and the ROC-AUC evaluation harness.

use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ClusterProbe, MetricKind, MetricValue, TrajCaps};

const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ValidatorError {
    #[error("metric {0} is enabled but was not computed")]
    MissingMetric(MetricKind),
    #[error("invalid validator config: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("bad evaluation records: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedMetric {
    pub kind: MetricKind,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidatorConfig {
    pub metrics: Vec<WeightedMetric>,
    pub threshold: f64,
    /// Stochastic passes for MCD.
    pub passes: usize,
    pub ensemble_size: usize,
    /// Samples for MCSE and BBLabProb.
    pub samples: usize,
    pub temperature: f64,
    pub max_len: usize,
    pub perturbations: usize,
    pub probe: ClusterProbe,
    pub traj: TrajCaps,
}

impl Default for ValidatorConfig {
    fn default() -> Self {
        ValidatorConfig::single(MetricKind::Entropy)
    }
}

impl ValidatorConfig {
    /// One metric with weight 1 and the default threshold 0.5.
    pub fn single(kind: MetricKind) -> Self {
        ValidatorConfig {
            metrics: vec![WeightedMetric { kind, weight: 1.0 }],
            threshold: 0.5,
            passes: 8,
            ensemble_size: 5,
            samples: 8,
            temperature: 1.0,
            max_len: 256,
            perturbations: 3,
            probe: ClusterProbe::default(),
            traj: TrajCaps::default(),
        }
    }

    /// The default for a task: entropy for classification, perplexity for
    /// generation.
    pub fn for_generation() -> Self {
        ValidatorConfig::single(MetricKind::Perplexity)
    }

    pub fn kinds(&self) -> Vec<MetricKind> {
        self.metrics.iter().map(|m| m.kind).collect()
    }

    pub fn validate(&self) -> Result<(), ValidatorError> {
        let bad = |m: String| Err(ValidatorError::Config(m));
        if self.metrics.is_empty() {
            return bad("no metrics enabled".into());
        }
        if let Some(m) = self.metrics.iter().find(|m| m.weight.is_nan() || m.weight < 0.0) {
            return bad(format!("weight of {} is negative", m.kind));
        }
        let sum: f64 = self.metrics.iter().map(|m| m.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return bad(format!("weights sum to {sum}, not 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0,1]", self.threshold));
        }
        if self.passes < 2 || self.ensemble_size < 2 || self.samples < 2 || self.perturbations < 2 {
            return bad("passes, ensemble_size, samples and perturbations must be at least 2".into());
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return bad("temperature must be positive".into());
        }
        Ok(())
    }

    /// Rescales weights to sum to one.
    pub fn normalized(mut self) -> Self {
        let sum: f64 = self.metrics.iter().map(|m| m.weight).sum();
        if sum > 0.0 {
            for m in &mut self.metrics {
                m.weight /= sum;
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep,
    Adapt,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub adapter: String,
    pub seed: u64,
    pub input_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub metrics: Vec<MetricValue>,
    pub v: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub provenance: Provenance,
}

pub fn decide(v: f64, threshold: f64) -> Decision {
    if v >= threshold {
        Decision::Keep
    } else {
        Decision::Adapt
    }
}

/// `V = 1 - sum(w_i * u_i)` over the enabled metrics.
pub fn combine_v(values: &[MetricValue], cfg: &ValidatorConfig) -> Result<ValidityReport, ValidatorError> {
    let mut penalty = 0.0;
    let mut used = Vec::with_capacity(cfg.metrics.len());
    for m in &cfg.metrics {
        let value = values
            .iter()
            .find(|v| v.kind == m.kind)
            .ok_or(ValidatorError::MissingMetric(m.kind))?;
        penalty += m.weight * value.u;
        used.push(value.clone());
    }
    let v = (1.0 - penalty).clamp(0.0, 1.0);
    Ok(ValidityReport {
        metrics: used,
        v,
        threshold: cfg.threshold,
        decision: decide(v, cfg.threshold),
        provenance: Provenance::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub score: f64,
    pub label: Label,
    pub metric: String,
    pub model: String,
    pub benchmark: String,
}

/// Reads records from CSV with header `score,label,metric,model,benchmark`.
pub fn read_records(r: impl Read) -> Result<Vec<EvalRecord>, ValidatorError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let rec: EvalRecord = rec?;
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(ValidatorError::DegenerateInput(format!(
                "score {} outside [0,1]",
                rec.score
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(records: &[EvalRecord]) -> Result<String, ValidatorError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| ValidatorError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Probability that an incorrect prediction scores above a correct one,
/// ties counting half. Sort-and-sweep, exact in integer arithmetic until the
/// final division.
pub fn roc_auc(records: &[EvalRecord]) -> Result<f64, ValidatorError> {
    let mut scored: Vec<(f64, Label)> = records.iter().map(|r| (r.score, r.label)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_inc = scored.iter().filter(|r| r.1 == Label::Incorrect).count() as u128;
    let n_cor = scored.len() as u128 - n_inc;
    if n_inc == 0 || n_cor == 0 {
        return Err(ValidatorError::DegenerateInput(
            "need at least one correct and one incorrect record".into(),
        ));
    }
    // twice the Mann-Whitney count keeps ties integral
    let mut twice = 0u128;
    let mut cor_below = 0u128;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        let (mut inc, mut cor) = (0u128, 0u128);
        while j < scored.len() && scored[j].0 == scored[i].0 {
            match scored[j].1 {
                Label::Incorrect => inc += 1,
                Label::Correct => cor += 1,
            }
            j += 1;
        }
        twice += 2 * inc * cor_below + inc * cor;
        cor_below += cor;
        i = j;
    }
    Ok(twice as f64 / (2 * n_inc * n_cor) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucRow {
    pub metric: String,
    pub model: String,
    pub benchmark: String,
    /// `None` when AUC is undefined for this cell.
    pub auc: Option<f64>,
}

fn first_seen<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn cell(auc: Option<f64>) -> String {
    auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.3}"))
}

/// Metrics as rows, (model, benchmark) as columns, in first-seen order.
/// Returns the text table and the same data as CSV.
pub fn render_table(rows: &[AucRow]) -> (String, String) {
    let metrics = first_seen(rows.iter().map(|r| r.metric.clone()));
    let cols = first_seen(rows.iter().map(|r| (r.model.clone(), r.benchmark.clone())));
    let has_bench = cols.iter().any(|(_, b)| !b.is_empty() && b != "-");
    let lookup = |m: &str, c: &(String, String)| {
        rows.iter()
            .find(|r| r.metric == m && r.model == c.0 && r.benchmark == c.1)
            .map(|r| cell(r.auc))
            .unwrap_or_default()
    };

    let mut grid: Vec<Vec<String>> = Vec::new();
    if has_bench {
        let mut models = vec![String::new()];
        let mut prev: Option<&str> = None;
        for (m, _) in &cols {
            models.push(if prev == Some(m) { String::new() } else { m.clone() });
            prev = Some(m);
        }
        grid.push(models);
        grid.push(
            std::iter::once("Metric".to_string())
                .chain(cols.iter().map(|c| c.1.clone()))
                .collect(),
        );
    } else {
        grid.push(
            std::iter::once("Metric".to_string())
                .chain(cols.iter().map(|c| c.0.clone()))
                .collect(),
        );
    }
    let header_rows = grid.len();
    for m in &metrics {
        grid.push(
            std::iter::once(m.clone())
                .chain(cols.iter().map(|c| lookup(m, c)))
                .collect(),
        );
    }
    let widths: Vec<usize> = (0..=cols.len())
        .map(|i| grid.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for (ri, row) in grid.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect();
        writeln!(text, "{}", line.join("  ").trim_end()).unwrap();
        if ri + 1 == header_rows {
            let total = widths.iter().sum::<usize>() + 2 * cols.len();
            writeln!(text, "{}", "-".repeat(total)).unwrap();
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "model", "benchmark", "auc"]).unwrap();
    for m in &metrics {
        for c in &cols {
            if let Some(r) = rows
                .iter()
                .find(|r| &r.metric == m && r.model == c.0 && r.benchmark == c.1)
            {
                w.write_record([m.as_str(), &c.0, &c.1, &cell(r.auc)]).unwrap();
            }
        }
    }
    let csv = String::from_utf8(w.into_inner().unwrap()).unwrap();
    (text, csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mv(kind: MetricKind, u: f64) -> MetricValue {
        MetricValue {
            kind,
            u,
            raw: u,
            aux: vec![],
        }
    }

    fn recs(inc: &[f64], cor: &[f64]) -> Vec<EvalRecord> {
        let mk = |score: f64, label| EvalRecord {
            score,
            label,
            metric: "m".into(),
            model: "x".into(),
            benchmark: "b".into(),
        };
        inc.iter()
            .map(|&s| mk(s, Label::Incorrect))
            .chain(cor.iter().map(|&s| mk(s, Label::Correct)))
            .collect()
    }

    #[test]
    fn combine_examples() {
        let mut cfg = ValidatorConfig::single(MetricKind::Entropy);
        cfg.threshold = 0.7;
        let r = combine_v(&[mv(MetricKind::Entropy, 0.2)], &cfg).unwrap();
        assert!((r.v - 0.8).abs() < 1e-12);
        assert_eq!(r.decision, Decision::Keep);

        let mut cfg = ValidatorConfig::single(MetricKind::Entropy);
        cfg.metrics = vec![
            WeightedMetric {
                kind: MetricKind::Entropy,
                weight: 0.5,
            },
            WeightedMetric {
                kind: MetricKind::Vanilla,
                weight: 0.5,
            },
        ];
        cfg.threshold = 0.6;
        let r = combine_v(&[mv(MetricKind::Entropy, 0.5), mv(MetricKind::Vanilla, 0.5)], &cfg).unwrap();
        assert_eq!((r.v, r.decision), (0.5, Decision::Adapt));

        cfg.threshold = 1.0;
        let r = combine_v(&[mv(MetricKind::Entropy, 0.0), mv(MetricKind::Vanilla, 0.0)], &cfg).unwrap();
        assert_eq!((r.v, r.decision), (1.0, Decision::Keep));

        assert!(matches!(
            combine_v(&[mv(MetricKind::Entropy, 0.0)], &cfg),
            Err(ValidatorError::MissingMetric(MetricKind::Vanilla))
        ));
    }

    #[test]
    fn config_checks() {
        let mut cfg = ValidatorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.metrics[0].weight = 0.9;
        assert!(cfg.validate().is_err());
        let cfg = cfg.normalized();
        assert!(cfg.validate().is_ok());
        let cfg = ValidatorConfig {
            threshold: 1.5,
            ..ValidatorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&recs(&[0.9, 0.8], &[0.1, 0.2])).unwrap(), 1.0);
        assert_eq!(roc_auc(&recs(&[0.3, 0.3], &[0.3, 0.3, 0.3])).unwrap(), 0.5);
        assert_eq!(roc_auc(&recs(&[0.7, 0.4], &[0.5, 0.2])).unwrap(), 0.75);
        assert!(roc_auc(&recs(&[0.1], &[])).is_err());
    }

    #[test]
    fn records_csv_round_trip() {
        let r = recs(&[0.7], &[0.25]);
        let text = write_records(&r).unwrap();
        assert!(text.starts_with("score,label,metric,model,benchmark\n"));
        assert!(text.contains("0.7,incorrect,m,x,b"));
        assert_eq!(read_records(text.as_bytes()).unwrap(), r);
        assert!(read_records("score,label,metric,model,benchmark\n0.5,maybe,m,x,b\n".as_bytes()).is_err());
    }

    fn row(metric: &str, model: &str, bench: &str, auc: f64) -> AucRow {
        AucRow {
            metric: metric.into(),
            model: model.into(),
            benchmark: bench.into(),
            auc: Some(auc),
        }
    }

    #[test]
    fn table_layout_generation() {
        let rows = vec![
            row("Perplexity", "DeepSeek-Coder-7B", "HumanEval+", 0.621),
            row("Perplexity", "DeepSeek-Coder-7B", "MBPP+", 0.561),
            row("Perplexity", "CodeLlama-7B", "HumanEval+", 0.666),
            row("Perplexity", "CodeLlama-7B", "MBPP+", 0.574),
            row("Entropy", "DeepSeek-Coder-7B", "HumanEval+", 0.615),
        ];
        let (text, csv) = render_table(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("DeepSeek-Coder-7B") && lines[0].contains("CodeLlama-7B"));
        assert!(lines[1].starts_with("Metric") && lines[1].contains("HumanEval+"));
        assert!(lines[3].starts_with("Perplexity"));
        let cells: Vec<&str> = lines[3].split_whitespace().collect();
        assert_eq!(cells, vec!["Perplexity", "0.621", "0.561", "0.666", "0.574"]);
        assert!(lines[4].starts_with("Entropy"));
        assert!(csv.contains("Perplexity,DeepSeek-Coder-7B,HumanEval+,0.621"));
    }

    #[test]
    fn table_layout_classification() {
        let rows = vec![
            row("Vanilla", "DeepSeek-Coder-7B", "-", 0.621),
            row("Vanilla", "CodeLlama-7B", "-", 0.615),
        ];
        let (text, _) = render_table(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0].split_whitespace().collect::<Vec<_>>(),
            vec!["Metric", "DeepSeek-Coder-7B", "CodeLlama-7B"]
        );
        assert_eq!(
            lines[2].split_whitespace().collect::<Vec<_>>(),
            vec!["Vanilla", "0.621", "0.615"]
        );
    }

    #[test]
    fn empty_table_is_header_only() {
        let (text, csv) = render_table(&[]);
        assert_eq!(text.lines().next(), Some("Metric"));
        assert_eq!(text.lines().count(), 2);
        assert_eq!(csv, "metric,model,benchmark,auc\n");
    }
}
