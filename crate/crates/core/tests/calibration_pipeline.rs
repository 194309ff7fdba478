//! The calibration → environment pipeline must be self-normalizing: KPIs
//! observed by an agent walking the world come out near zero mean and unit
//! variance under the normalizer calibrated for that world.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use tiltlab::env::{calibrate_normalizer, AntennaEnv, EnvConfig};

#[test]
fn calibrated_normalizer_standardizes_observed_kpis() {
    let cfg = EnvConfig {
        n_rings: 0,
        n_users: 60,
        building_count: 5,
        buildings_enabled: true,
        calibration_samples: 200,
        ..EnvConfig::default()
    };
    let seed = 33u64;
    let normalizer = calibrate_normalizer(&cfg, seed, cfg.calibration_samples).unwrap();
    let mut env = AntennaEnv::new(cfg, normalizer, seed).unwrap();

    let clip = env.config().clip_sigmas;
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let mut samples: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..400 {
        let deltas: Vec<f64> = (0..env.n_agents())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        env.step(&deltas).unwrap();
        for ob in env.observations() {
            let v = ob.to_vec();
            samples[0].push(v[1]);
            samples[1].push(v[2]);
            samples[2].push(v[3]);
        }
    }

    for (name, vals) in ["cov", "cap", "qual"].iter().zip(&samples) {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(
            mean.abs() < 0.5,
            "{name}: normalized mean {mean} drifted from 0"
        );
        assert!(
            (0.4..=1.8).contains(&std),
            "{name}: normalized std {std} far from 1"
        );
        assert!(
            vals.iter().all(|v| v.abs() <= clip + 1e-12),
            "{name}: clip bound {clip} violated"
        );
    }
}
