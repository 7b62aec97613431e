//! Command-line front end: single-input pipeline runs, transforms, metric
//! tables, the adaptation experiment, and the mock protocol server.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use similar::TextDiff;

use onfly::adapters::protocol::serve;
use onfly::adapters::{AdapterSpec, Builtin};
use onfly::corpus::{planted_bias, source};
use onfly::metrics::MetricKind;
use onfly::pipeline::{
    adaptation_gain, evaluate_metrics, input_payload, probe_digest, run_pipeline, Assessor, EvalOptions,
    PipelineConfig, RunReport, Task,
};
use onfly::search::{lineage_ids, Payload};
use onfly::transforms::{
    apply_transform, enumerate_applicable, enumerate_prompt_sites, nl_perturb, PromptText, SynonymDict, TransformKind,
    TransformSite,
};

#[derive(Parser)]
#[command(
    name = "onfly",
    version,
    about = "Validate and adapt code-model predictions at inference time"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `builtin:classifier`, `builtin:ngram`, or `cmd:"<command>"`.
    #[arg(long, global = true)]
    adapter: Option<String>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Append one JSON record per run to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    task: Option<TaskArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classification,
    Generation,
}

#[derive(Clone, Copy, ValueEnum)]
enum MockArg {
    Classifier,
    Ngram,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full pipeline on one input: infer, validate, adapt if needed, report.
    Run { input: PathBuf },
    /// Validation only: prediction and validity report.
    Validate { input: PathBuf },
    /// Adaptation only: always adapts, then prints the lineage and a diff.
    Adapt { input: PathBuf },
    /// Apply one transform and print the result.
    Transform {
        input: PathBuf,
        /// Transform id, e.g. `T1` or `T1_RenameIdents`.
        #[arg(long)]
        kind: Option<String>,
        /// Index among the applicable sites of that kind.
        #[arg(long, default_value_t = 0)]
        site: usize,
        #[arg(long = "transform-seed", default_value_t = 0)]
        transform_seed: u64,
        /// List applicable sites instead of applying one.
        #[arg(long)]
        list: bool,
    },
    /// ROC-AUC of uncertainty metrics over a labelled manifest.
    EvalMetrics {
        manifest: PathBuf,
        /// Comma-separated metric ids.
        #[arg(long, value_delimiter = ',', default_value = "vanilla,entropy,mcd,ensemble")]
        metrics: Vec<String>,
        #[arg(long, default_value = "")]
        benchmark: String,
        /// Write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write per-input scores here.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Accuracy before adaptation, after search, and after search plus latent.
    EvalAdaptation {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long = "corpus-seed", default_value_t = 1)]
        corpus_seed: u64,
    },
    /// Serve a built-in mock over the line protocol on stdin/stdout.
    ServeMock {
        #[arg(long, value_enum, default_value = "classifier")]
        model: MockArg,
    },
    /// Write the planted-bias corpus and its `path,label` manifest.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long = "corpus-seed", default_value_t = 1)]
        corpus_seed: u64,
    },
    /// Probe digest of a reference program, for generation manifests.
    ProbeDigest {
        input: PathBuf,
        #[arg(long, default_value = "main")]
        entry: String,
        #[arg(long = "probe-seed", default_value_t = 0)]
        probe_seed: u64,
    },
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(t) = self.task {
            cfg.task = match t {
                TaskArg::Classification => Task::Classification,
                TaskArg::Generation => Task::Generation,
            };
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(a) = &self.adapter {
            cfg.adapter.spec = Some(a.parse()?);
        }
        if let Some(t) = self.threshold {
            cfg.set_threshold(t);
        }
        if let Some(r) = &self.report {
            cfg.report = Some(r.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cfg: &PipelineConfig, input: &str) -> Result<RunReport> {
    let mut session = cfg.adapter_spec().connect()?;
    let report = run_pipeline(input, cfg, session.as_mut())?;
    if let Some(path) = &cfg.report {
        report.append_to(path)?;
    }
    Ok(report)
}

fn cmd_validate(cfg: &PipelineConfig, input: &str) -> Result<()> {
    let payload = input_payload(input, cfg.task)?;
    let mut session = cfg.adapter_spec().connect()?;
    let mut a = Assessor::new(session.as_mut(), cfg.validator(), cfg.seed, cfg.task)?;
    let (assessment, _) = a.assess(&payload)?;
    println!("{}", serde_json::to_string_pretty(&assessment)?);
    Ok(())
}

fn cmd_adapt(mut cfg: PipelineConfig, input: &str) -> Result<()> {
    cfg.set_threshold(1.0);
    let report = run(&cfg, input)?;
    let a = report.adaptation.as_ref().expect("threshold 1 always adapts");
    let before = report.original.validity.v;
    let after = a.final_.validity.v;
    println!(
        "strategy: {}",
        a.strategy
            .map_or("none".to_string(), |s| format!("{s:?}").to_lowercase())
    );
    println!("validity: {before:.4} -> {after:.4}");
    println!("lineage:");
    for id in lineage_ids(&a.lineage) {
        println!("  {id}");
    }
    if let Some(shift) = &a.latent {
        println!(
            "latent shift: distance {:.4} after {} evaluations",
            shift.distance, shift.evals
        );
    }
    let original = input_payload(input, cfg.task)?.text();
    if let Some(adapted) = &a.input {
        let diff = TextDiff::from_lines(&original, adapted);
        print!("{}", diff.unified_diff().header("original", "adapted"));
    }
    Ok(())
}

fn kind_sites(payload: &Payload, kind: Option<TransformKind>, dict: &SynonymDict) -> Vec<TransformSite> {
    let sites = match payload {
        Payload::Code(p) => enumerate_applicable(p),
        Payload::Prompt(t) => enumerate_prompt_sites(t, dict),
    };
    sites.into_iter().filter(|s| kind.is_none_or(|k| s.kind == k)).collect()
}

fn cmd_transform(text: &str, kind: Option<String>, site: usize, seed: u64, list: bool) -> Result<()> {
    let kind: Option<TransformKind> = kind.map(|k| k.parse()).transpose()?;
    let dict = SynonymDict::builtin();
    let prompt = kind.is_some_and(|k| k.is_prompt());
    let payload = if prompt {
        Payload::Prompt(PromptText::new(text))
    } else {
        match minilang::parse(text) {
            Ok(p) => Payload::Code(p),
            Err(e) if list => {
                eprintln!("not a program ({e}); listing prompt sites");
                Payload::Prompt(PromptText::new(text))
            }
            Err(e) => bail!("input does not parse: {e}"),
        }
    };
    let sites = kind_sites(&payload, kind, &dict);
    if list {
        for (i, s) in sites.iter().enumerate() {
            println!("{i}\t{s}");
        }
        return Ok(());
    }
    let Some(kind) = kind else {
        bail!("--kind is required unless --list is given")
    };
    let Some(s) = sites.get(site) else {
        bail!(
            "{kind} has {} applicable site(s) here; index {site} is out of range",
            sites.len()
        )
    };
    let out = match &payload {
        Payload::Code(p) => minilang::pretty(&apply_transform(p, s, seed)?),
        Payload::Prompt(t) => nl_perturb(t, kind, seed, &dict)?.text(),
    };
    println!("{}", out.trim_end());
    Ok(())
}

fn cmd_eval_metrics(
    cfg: &PipelineConfig,
    common: &Common,
    manifest: &Path,
    metrics: &[String],
    benchmark: String,
    csv_out: Option<PathBuf>,
    records_out: Option<PathBuf>,
) -> Result<()> {
    let metrics: Vec<MetricKind> = metrics.iter().map(|m| m.trim().parse()).collect::<Result<_, _>>()?;
    // without an explicit adapter, generation metrics imply the n-gram mock
    let generation = cfg.task == Task::Generation || metrics.iter().any(|m| !m.is_classification());
    let spec = match (&common.adapter, &cfg.adapter.spec) {
        (Some(a), _) => a.parse()?,
        (None, Some(s)) => s.clone(),
        (None, None) if generation => AdapterSpec::Builtin(Builtin::Generator),
        (None, None) => AdapterSpec::Builtin(Builtin::Classifier),
    };
    let opts = EvalOptions {
        metrics,
        seed: cfg.seed,
        validator: cfg.validator(),
        benchmark,
        fuel: cfg.minilang.fuel,
    };
    let out = evaluate_metrics(manifest, &spec, &opts)?;
    print!("{}", out.table);
    println!(
        "accuracy: {:.4} over {} inputs",
        out.accuracy,
        out.records.len() / opts.metrics.len().max(1)
    );
    for n in &out.notes {
        eprintln!("note: {n}");
    }
    if let Some(p) = csv_out {
        fs::write(&p, &out.csv).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = records_out {
        let text = onfly::validator::write_records(&out.records)?;
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_gen_corpus(out: &Path, n: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = csv::Writer::from_path(out.join("manifest.csv"))?;
    w.write_record(["path", "label"])?;
    for l in planted_bias(n, seed) {
        let file = format!("{}.mini", l.name);
        fs::write(out.join(&file), source(&l))?;
        w.write_record([file, l.label.to_string()])?;
    }
    w.flush()?;
    println!("wrote {n} programs and manifest.csv to {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    match cli.cmd {
        Cmd::Run { input } => {
            let report = run(&common.config()?, &read(&input)?)?;
            println!("{}", report.to_line());
        }
        Cmd::Validate { input } => cmd_validate(&common.config()?, &read(&input)?)?,
        Cmd::Adapt { input } => cmd_adapt(common.config()?, &read(&input)?)?,
        Cmd::Transform {
            input,
            kind,
            site,
            transform_seed,
            list,
        } => cmd_transform(&read(&input)?, kind, site, transform_seed, list)?,
        Cmd::EvalMetrics {
            manifest,
            metrics,
            benchmark,
            csv,
            records,
        } => cmd_eval_metrics(&common.config()?, common, &manifest, &metrics, benchmark, csv, records)?,
        Cmd::EvalAdaptation { n, corpus_seed } => {
            let cfg = common.config()?;
            let g = adaptation_gain(n, corpus_seed, &cfg)?;
            println!("{:<16}{:>10}", "setting", "accuracy");
            for (name, c) in [
                ("base", g.base),
                ("search", g.search),
                ("search+latent", g.search_latent),
            ] {
                println!("{name:<16}{:>9.2}%", 100.0 * g.rate(c));
            }
        }
        Cmd::ServeMock { model } => {
            let spec = AdapterSpec::Builtin(match model {
                MockArg::Classifier => Builtin::Classifier,
                MockArg::Ngram => Builtin::Generator,
            });
            let mut adapter = spec.connect()?;
            let stdin = io::stdin();
            serve(adapter.as_mut(), stdin.lock(), io::stdout().lock())?;
        }
        Cmd::GenCorpus { out, n, corpus_seed } => cmd_gen_corpus(&out, n, corpus_seed)?,
        Cmd::ProbeDigest {
            input,
            entry,
            probe_seed,
        } => {
            let cfg = common.config()?;
            let p = minilang::parse(&read(&input)?)?;
            let d = probe_digest(&p, &entry, probe_seed, cfg.minilang.fuel).map_err(anyhow::Error::msg)?;
            println!("{d}");
        }
    }
    io::stdout().flush()?;
    Ok(())
}
