use rayon::prelude::*;
use serde::Serialize;

use super::{run_pipeline, PipelineConfig, PipelineError, Strategy, Task};
use crate::corpus::{planted_bias, source};

/// Correct predictions on the planted-bias corpus before adaptation, after
/// the search-only pipeline, and after search followed by latent ascent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AdaptationGain {
    pub total: usize,
    pub base: usize,
    pub search: usize,
    pub search_latent: usize,
}

impl AdaptationGain {
    pub fn rate(&self, correct: usize) -> f64 {
        correct as f64 / self.total as f64
    }
}

/// Runs the pipeline twice over `planted_bias(n, corpus_seed)`, once with
/// `[search]` and once with `[search, latent]`, and counts predictions that
/// match the hidden label. `cfg` supplies everything but the strategies.
pub fn adaptation_gain(n: usize, corpus_seed: u64, cfg: &PipelineConfig) -> Result<AdaptationGain, PipelineError> {
    if cfg.task != Task::Classification {
        return Err(PipelineError::Config(
            "the adaptation experiment is a classification task".into(),
        ));
    }
    let with = |order: Vec<Strategy>| PipelineConfig {
        strategies: Some(order),
        ..cfg.clone()
    };
    let s1 = with(vec![Strategy::Search]);
    let s12 = with(vec![Strategy::Search, Strategy::Latent]);
    let spec = cfg.adapter_spec();
    let rows: Vec<(bool, bool, bool)> = planted_bias(n, corpus_seed)
        .par_iter()
        .map(|l| {
            let src = source(l);
            let mut session = spec.connect()?;
            let a = run_pipeline(&src, &s1, session.as_mut())?;
            let b = run_pipeline(&src, &s12, session.as_mut())?;
            let hit = |x: Option<usize>| x == Some(l.label);
            Ok((
                hit(a.original.prediction.label()),
                hit(a.final_assessment().prediction.label()),
                hit(b.final_assessment().prediction.label()),
            ))
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(AdaptationGain {
        total: rows.len(),
        base: rows.iter().filter(|r| r.0).count(),
        search: rows.iter().filter(|r| r.1).count(),
        search_latent: rows.iter().filter(|r| r.2).count(),
    })
}
