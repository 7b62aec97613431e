use onfly::latent::{distance, perturb_latent, LatentConfig, LatentOutcome};
use proptest::prelude::*;

fn objective(w: &[f64], kind: u8) -> impl Fn(&[f64]) -> f64 + '_ {
    move |z: &[f64]| {
        let s: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
        match kind {
            0 => 1.0 / (1.0 + (-s).exp()),
            1 => (-(s - 0.3).powi(2)).exp(),
            // rugged
            _ => 0.5 + 0.5 * (3.0 * s).sin() * (z[0] * 7.0).cos(),
        }
    }
}

fn run(z0: &[f64], f: &dyn Fn(&[f64]) -> f64, cfg: &LatentConfig, calls: &mut usize) -> LatentOutcome {
    perturb_latent::<()>(
        z0,
        |z| {
            *calls += 1;
            Ok(f(z))
        },
        cfg,
    )
    .unwrap()
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn never_worse_bounded_deterministic(
        z0 in prop::collection::vec(-5.0f64..5.0, 1..9),
        w in prop::collection::vec(-3.0f64..3.0, 8),
        kind in 0u8..3,
        radius in 0.01f64..3.0,
        step in 0.01f64..5.0,
        probe in 0.001f64..0.5,
        budget in 3usize..80,
        seed in any::<u64>(),
    ) {
        let cfg = LatentConfig { radius, step, probe, budget, seed };
        let f = objective(&w, kind);
        let mut calls = 0;
        let a = run(&z0, &f, &cfg, &mut calls);
        prop_assert!(a.f >= f(&z0));
        prop_assert_eq!(a.f0, f(&z0));
        prop_assert!(distance(&a.z, &z0) <= radius + 1e-9);
        prop_assert!(calls <= budget);
        prop_assert_eq!(calls, a.evals);
        prop_assert_eq!(a.f, f(&a.z));
        let mut again = 0;
        prop_assert_eq!(run(&z0, &f, &cfg, &mut again), a);
    }
}
