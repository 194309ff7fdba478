//! User attachment, SINR, throughput, and per-cell KPI aggregation.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sim::layout::NetworkLayout;
use crate::sim::propagation::{antenna_gain, path_loss, rsrp, PropagationConfig};

/// Per-cell KPIs: means of natural logs over the cell's attached users.
/// Empty cells carry `None` — the environment layer substitutes its
/// normalizer's clip floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKpis {
    /// Coverage: mean ln RSRP.
    pub cov: Option<f64>,
    /// Capacity: mean ln throughput.
    pub cap: Option<f64>,
    /// Quality: mean ln SINR.
    pub qual: Option<f64>,
    pub n_users: usize,
}

/// Result of user attachment: per-user serving cell and the full RSRP
/// matrix `rho[[cell, user]]` for reuse by the SINR computation.
#[derive(Clone, Debug)]
pub struct AttachResult {
    pub assignment: Vec<usize>,
    pub rho: Array2<f64>,
}

/// Attach every user to the cell with the strongest RSRP (ties → lowest
/// cell index). `buildings` selects the obstruction set: pass
/// `&layout.buildings` for the full world or `&[]` for the building-free
/// variant.
pub fn attach_users(
    layout: &NetworkLayout,
    cfg: &PropagationConfig,
    buildings_enabled: bool,
) -> Result<AttachResult> {
    let n_cells = layout.n_cells();
    if n_cells == 0 {
        return Err(CoreError::InvalidArgument(
            "attach_users requires at least one antenna".into(),
        ));
    }
    let buildings: &[_] = if buildings_enabled {
        &layout.buildings
    } else {
        &[]
    };
    let n_users = layout.n_users();
    let mut rho = Array2::zeros((n_cells, n_users));
    for (c, antenna) in layout.antennas.iter().enumerate() {
        for (u, user) in layout.users.iter().enumerate() {
            let g = antenna_gain(antenna, antenna.tilt_deg, *user, cfg);
            let l = path_loss(antenna, *user, buildings, cfg);
            rho[[c, u]] = rsrp(cfg.tx_power_w, g, l);
        }
    }
    let assignment = (0..n_users)
        .map(|u| {
            let mut best = 0;
            for c in 1..n_cells {
                if rho[[c, u]] > rho[[best, u]] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(AttachResult { assignment, rho })
}

/// Per-user SINR: `γ_u = ρ_cu / (κ + Σ_{i≠c} ρ_iu)` where `c` is the
/// serving cell of `u`.
pub fn sinr(rho: &Array2<f64>, assignment: &[usize], kappa: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "noise term must be positive, got {kappa}"
        )));
    }
    let (n_cells, n_users) = rho.dim();
    if assignment.len() != n_users {
        return Err(CoreError::DimensionMismatch {
            context: "sinr: assignment length",
            expected: n_users,
            got: assignment.len(),
        });
    }
    let mut out = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let c = assignment[u];
        if c >= n_cells {
            return Err(CoreError::InvalidArgument(format!(
                "user {u} assigned to cell {c}, but only {n_cells} cells exist"
            )));
        }
        let total: f64 = (0..n_cells).map(|i| rho[[i, u]]).sum();
        let own = rho[[c, u]];
        out.push(own / (kappa + (total - own)));
    }
    Ok(out)
}

/// Throughput of one user: `T = (ω_B · n_B / |U_c|) · log₂(1 + γ)`.
///
/// `log₂(1+γ)` goes through `ln_1p` so a heavily obstructed user (γ below
/// the 2⁻⁵³ rounding threshold of `1+γ`) still gets a positive throughput —
/// naive evaluation would collapse to exactly zero and poison downstream
/// log-KPI statistics with `ln 0`.
pub fn throughput(gamma: f64, n_cell_users: usize, cfg: &PropagationConfig) -> Result<f64> {
    if n_cell_users == 0 {
        return Err(CoreError::InvalidArgument(
            "throughput requires at least one user in the cell".into(),
        ));
    }
    Ok(cfg.bandwidth_per_prb_hz * cfg.prbs_per_user / n_cell_users as f64
        * (gamma.ln_1p() / std::f64::consts::LN_2))
}

/// Full KPI pipeline: attach → SINR → throughput → per-cell means of
/// natural logs. Deterministic and pure.
pub fn cell_kpis(
    layout: &NetworkLayout,
    cfg: &PropagationConfig,
    buildings_enabled: bool,
) -> Result<Vec<CellKpis>> {
    let attach = attach_users(layout, cfg, buildings_enabled)?;
    let gammas = sinr(&attach.rho, &attach.assignment, cfg.noise_w)?;
    let n_cells = layout.n_cells();

    let mut counts = vec![0usize; n_cells];
    for &c in &attach.assignment {
        counts[c] += 1;
    }

    let mut sum_log_rho = vec![0.0; n_cells];
    let mut sum_log_gamma = vec![0.0; n_cells];
    let mut sum_log_thru = vec![0.0; n_cells];
    for u in 0..layout.n_users() {
        let c = attach.assignment[u];
        sum_log_rho[c] += attach.rho[[c, u]].ln();
        sum_log_gamma[c] += gammas[u].ln();
        sum_log_thru[c] += throughput(gammas[u], counts[c], cfg)?.ln();
    }

    Ok((0..n_cells)
        .map(|c| {
            if counts[c] == 0 {
                CellKpis {
                    cov: None,
                    cap: None,
                    qual: None,
                    n_users: 0,
                }
            } else {
                let n = counts[c] as f64;
                CellKpis {
                    cov: Some(sum_log_rho[c] / n),
                    cap: Some(sum_log_thru[c] / n),
                    qual: Some(sum_log_gamma[c] / n),
                    n_users: counts[c],
                }
            }
        })
        .collect())
}

/// Dump per-cell KPIs as CSV: `cell_id,cov,cap,qual,n_users`; empty cells
/// leave the three KPI fields blank.
pub fn write_kpi_csv<P: AsRef<Path>>(path: P, kpis: &[CellKpis]) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "cell_id,cov,cap,qual,n_users")?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (c, k) in kpis.iter().enumerate() {
        writeln!(
            f,
            "{},{},{},{},{}",
            c,
            fmt(k.cov),
            fmt(k.cap),
            fmt(k.qual),
            k.n_users
        )?;
    }
    f.flush()?;
    Ok(())
}
