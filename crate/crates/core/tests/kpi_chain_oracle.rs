//! End-to-end KPI oracle: recompute the attach → SINR → throughput →
//! mean-of-logs chain per user with straight-line loops and compare against
//! the pipeline's output on generated layouts.

use tiltlab::sim::{
    antenna_gain, cell_kpis, generate_layout, path_loss, rsrp, PropagationConfig,
};

/// Brute-force per-user recomputation of every cell KPI.
fn brute_force_kpis(
    layout: &tiltlab::sim::NetworkLayout,
    cfg: &PropagationConfig,
    buildings_enabled: bool,
) -> Vec<(Option<f64>, Option<f64>, Option<f64>, usize)> {
    let n_cells = layout.n_cells();
    let n_users = layout.n_users();
    let buildings: &[_] = if buildings_enabled {
        &layout.buildings
    } else {
        &[]
    };

    // Received power from every cell to every user.
    let mut power = vec![vec![0.0f64; n_users]; n_cells];
    for c in 0..n_cells {
        let antenna = &layout.antennas[c];
        for u in 0..n_users {
            let user = layout.users[u];
            let g = antenna_gain(antenna, antenna.tilt_deg, user, cfg);
            let l = path_loss(antenna, user, buildings, cfg);
            power[c][u] = rsrp(cfg.tx_power_w, g, l);
        }
    }

    // Strongest-cell attachment, ties to the lowest index.
    let mut serving = vec![0usize; n_users];
    for u in 0..n_users {
        let mut best = 0usize;
        for c in 1..n_cells {
            if power[c][u] > power[best][u] {
                best = c;
            }
        }
        serving[u] = best;
    }

    let mut cell_user_count = vec![0usize; n_cells];
    for u in 0..n_users {
        cell_user_count[serving[u]] += 1;
    }

    let mut acc = vec![(0.0f64, 0.0f64, 0.0f64); n_cells];
    for u in 0..n_users {
        let c = serving[u];
        let own = power[c][u];
        let mut interference = 0.0;
        for i in 0..n_cells {
            if i != c {
                interference += power[i][u];
            }
        }
        let gamma = own / (cfg.noise_w + interference);
        let thru = cfg.bandwidth_per_prb_hz * cfg.prbs_per_user / cell_user_count[c] as f64
            * (1.0 + gamma).log2();
        acc[c].0 += own.ln();
        acc[c].1 += thru.ln();
        acc[c].2 += gamma.ln();
    }

    (0..n_cells)
        .map(|c| {
            let n = cell_user_count[c];
            if n == 0 {
                (None, None, None, 0)
            } else {
                let nf = n as f64;
                (
                    Some(acc[c].0 / nf),
                    Some(acc[c].1 / nf),
                    Some(acc[c].2 / nf),
                    n,
                )
            }
        })
        .collect()
}

fn compare(a: Option<f64>, b: Option<f64>, what: &str, cell: usize) {
    match (a, b) {
        (None, None) => {}
        (Some(x), Some(y)) => {
            let scale = x.abs().max(1.0);
            assert!(
                (x - y).abs() / scale < 1e-12,
                "cell {cell} {what}: pipeline {x} vs brute force {y}"
            );
        }
        _ => panic!("cell {cell} {what}: emptiness disagrees ({a:?} vs {b:?})"),
    }
}

#[test]
fn pipeline_matches_per_user_brute_force() {
    let cfg = PropagationConfig::default();
    for (seed, buildings_enabled) in [(11u64, true), (12, false), (13, true)] {
        let layout = generate_layout(seed, 1, 150, 12);
        let kpis = cell_kpis(&layout, &cfg, buildings_enabled).unwrap();
        let oracle = brute_force_kpis(&layout, &cfg, buildings_enabled);
        assert_eq!(kpis.len(), oracle.len());
        for (c, (k, o)) in kpis.iter().zip(oracle.iter()).enumerate() {
            compare(k.cov, o.0, "cov", c);
            compare(k.cap, o.1, "cap", c);
            compare(k.qual, o.2, "qual", c);
            assert_eq!(k.n_users, o.3, "cell {c} user count");
        }
    }
}

/// Disabling buildings must reproduce the oracle with an empty building
/// set even when the layout carries buildings.
#[test]
fn building_toggle_respected_throughout_the_chain() {
    let cfg = PropagationConfig::default();
    let layout = generate_layout(42, 1, 100, 20);
    assert!(!layout.buildings.is_empty());
    let off = cell_kpis(&layout, &cfg, false).unwrap();
    let oracle_off = brute_force_kpis(&layout, &cfg, false);
    for (c, (k, o)) in off.iter().zip(oracle_off.iter()).enumerate() {
        compare(k.cov, o.0, "cov", c);
        compare(k.qual, o.2, "qual", c);
    }
}
