//! Bounded gradient-free ascent in embedding space.
//!
//! Two-point simultaneous-perturbation steps, each followed by projection
//! onto the `radius` ball around the starting point. The best evaluated
//! point is returned, so the result is never worse than the start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatentError {
    #[error("invalid latent config: {0}")]
    Config(String),
    #[error("empty starting vector")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatentConfig {
    /// Maximum L2 distance from the starting point.
    pub radius: f64,
    pub step: f64,
    pub probe: f64,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    pub seed: u64,
}

impl Default for LatentConfig {
    fn default() -> Self {
        LatentConfig {
            radius: 1.0,
            step: 1.0,
            probe: 0.05,
            budget: 60,
            seed: 0,
        }
    }
}

impl LatentConfig {
    pub fn validate(&self) -> Result<(), LatentError> {
        for (name, v) in [("radius", self.radius), ("step", self.step), ("probe", self.probe)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(LatentError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.budget < 3 {
            return Err(LatentError::Config(format!(
                "budget must be at least 3, got {}",
                self.budget
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentOutcome {
    pub z: Vec<f64>,
    pub f: f64,
    pub f0: f64,
    pub evals: usize,
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn project(z: &mut [f64], z0: &[f64], radius: f64) {
    let d = distance(z, z0);
    if d > radius {
        let s = radius / d;
        for (x, c) in z.iter_mut().zip(z0) {
            *x = c + (*x - c) * s;
        }
    }
}

/// Errors from `objective` abort the ascent and are returned as-is.
pub fn perturb_latent<E>(
    z0: &[f64],
    mut objective: impl FnMut(&[f64]) -> Result<f64, E>,
    cfg: &LatentConfig,
) -> Result<Result<LatentOutcome, LatentError>, E> {
    if let Err(e) = cfg.validate() {
        return Ok(Err(e));
    }
    if z0.is_empty() {
        return Ok(Err(LatentError::EmptyInput));
    }
    let f0 = objective(z0)?;
    let mut evals = 1;
    let mut best = (z0.to_vec(), f0);
    let consider = |pt: &[f64], f: f64, best: &mut (Vec<f64>, f64)| {
        // probes can poke just outside the ball; those are not eligible
        if f > best.1 && distance(pt, z0) <= cfg.radius {
            *best = (pt.to_vec(), f);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z = z0.to_vec();
    while evals + 2 <= cfg.budget {
        let delta: Vec<f64> = (0..z.len())
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let plus: Vec<f64> = z.iter().zip(&delta).map(|(x, d)| x + cfg.probe * d).collect();
        let minus: Vec<f64> = z.iter().zip(&delta).map(|(x, d)| x - cfg.probe * d).collect();
        let fp = objective(&plus)?;
        let fm = objective(&minus)?;
        evals += 2;
        consider(&plus, fp, &mut best);
        consider(&minus, fm, &mut best);
        let g = (fp - fm) / (2.0 * cfg.probe);
        for (x, d) in z.iter_mut().zip(&delta) {
            *x += cfg.step * g * d;
        }
        project(&mut z, z0, cfg.radius);
    }
    if evals < cfg.budget {
        let f = objective(&z)?;
        evals += 1;
        consider(&z, f, &mut best);
    }
    Ok(Ok(LatentOutcome {
        z: best.0,
        f: best.1,
        f0,
        evals,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn run(z0: &[f64], f: impl Fn(&[f64]) -> f64, cfg: &LatentConfig) -> LatentOutcome {
        perturb_latent::<Infallible>(z0, |z| Ok(f(z)), cfg).unwrap().unwrap()
    }

    #[test]
    fn constant_objective_returns_start() {
        let out = run(&[0.3, -1.0], |_| 0.4, &LatentConfig::default());
        assert_eq!(out.z, vec![0.3, -1.0]);
        assert_eq!(out.f, 0.4);
        assert_eq!(out.evals, 60);
    }

    #[test]
    fn logistic_reaches_the_ball_edge() {
        for seed in 0..50 {
            let cfg = LatentConfig {
                seed,
                ..LatentConfig::default()
            };
            let out = run(&[0.0, 0.0], |z| sigmoid(z[0]), &cfg);
            assert!((out.f - sigmoid(1.0)).abs() <= 0.02, "seed {seed}: {}", out.f);
            assert!(distance(&out.z, &[1.0, 0.0]) < 0.5);
        }
    }

    #[test]
    fn config_is_validated() {
        let bad = LatentConfig {
            radius: 0.0,
            ..LatentConfig::default()
        };
        assert!(perturb_latent::<Infallible>(&[0.0], |_| Ok(0.0), &bad)
            .unwrap()
            .is_err());
        let bad = LatentConfig {
            budget: 2,
            ..LatentConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(perturb_latent::<Infallible>(&[], |_| Ok(0.0), &LatentConfig::default())
            .unwrap()
            .is_err());
    }

    #[test]
    fn objective_errors_propagate() {
        let mut calls = 0;
        let r = perturb_latent(
            &[0.0],
            |_| {
                calls += 1;
                if calls == 3 {
                    Err("boom")
                } else {
                    Ok(0.5)
                }
            },
            &LatentConfig::default(),
        );
        assert_eq!(r.unwrap_err(), "boom");
    }
}
