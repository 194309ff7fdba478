//! Map-based radio network simulator.
//!
//! A hexagonal grid of three-sector base stations serves uniformly scattered
//! users; rectangular buildings attenuate signals that cross their walls.
//! From transmit power, antenna gain, and path loss the simulator derives
//! per-user RSRP, SINR, and throughput, and aggregates them into per-cell
//! coverage / capacity / quality KPIs (means of natural logs).
//!
//! All functions are pure and deterministic: the same layout and config
//! produce bitwise-identical KPIs.

mod kpi;
mod layout;
mod propagation;

pub use kpi::{attach_users, cell_kpis, sinr, throughput, write_kpi_csv, AttachResult, CellKpis};
pub use layout::{generate_layout, Antenna, Building, NetworkLayout, ANTENNA_HEIGHT_M, INTER_SITE_DISTANCE_M};
pub use propagation::{antenna_gain, path_loss, rsrp, wall_crossings, wall_loss_db, PropagationConfig};
