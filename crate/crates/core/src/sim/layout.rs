//! Network layouts: base stations on a hex grid, three-sector antennas,
//! users, and rectangular buildings.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Distance between neighboring base stations (meters).
pub const INTER_SITE_DISTANCE_M: f64 = 500.0;
/// All antennas sit at this height (meters).
pub const ANTENNA_HEIGHT_M: f64 = 30.0;
/// Default penetration loss per crossed building wall (dB).
const WALL_LOSS_DB: f64 = 10.0;
/// Building half-extents are drawn uniformly from this range (meters).
const BUILDING_HALF_EXTENT_M: (f64, f64) = (10.0, 40.0);

/// Lowest and highest allowed downtilt (degrees).
pub const TILT_MIN_DEG: f64 = 0.0;
pub const TILT_MAX_DEG: f64 = 15.0;

/// One sector antenna. Each base station hosts three, 120° apart; each
/// antenna is one controllable cell (= one agent).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Antenna {
    pub base_station: usize,
    pub position: [f64; 2],
    pub azimuth_deg: f64,
    pub height_m: f64,
    pub tilt_deg: f64,
}

/// Axis-aligned building footprint with a per-wall penetration loss.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Building {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub wall_loss_db: f64,
}

/// The simulator's world state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub base_stations: Vec<[f64; 2]>,
    pub antennas: Vec<Antenna>,
    pub users: Vec<[f64; 2]>,
    pub buildings: Vec<Building>,
}

impl NetworkLayout {
    pub fn n_cells(&self) -> usize {
        self.antennas.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Structural invariants: three antennas per station with azimuths 120°
    /// apart, tilts within bounds, finite coordinates.
    pub fn validate(&self) -> Result<()> {
        if self.antennas.len() != 3 * self.base_stations.len() {
            return Err(CoreError::InvalidArgument(format!(
                "expected 3 antennas per base station, got {} antennas for {} stations",
                self.antennas.len(),
                self.base_stations.len()
            )));
        }
        for (s, _) in self.base_stations.iter().enumerate() {
            let azimuths: Vec<f64> = self
                .antennas
                .iter()
                .filter(|a| a.base_station == s)
                .map(|a| a.azimuth_deg)
                .collect();
            if azimuths.len() != 3 {
                return Err(CoreError::InvalidArgument(format!(
                    "base station {s} has {} antennas, expected 3",
                    azimuths.len()
                )));
            }
            let mut sorted = azimuths.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for i in 0..3 {
                let gap = (sorted[(i + 1) % 3] - sorted[i]).rem_euclid(360.0);
                if (gap - 120.0).abs() > 1e-9 {
                    return Err(CoreError::InvalidArgument(format!(
                        "base station {s} azimuths {azimuths:?} are not 120° apart"
                    )));
                }
            }
        }
        for (i, a) in self.antennas.iter().enumerate() {
            if !(TILT_MIN_DEG..=TILT_MAX_DEG).contains(&a.tilt_deg) {
                return Err(CoreError::InvalidArgument(format!(
                    "antenna {i} tilt {}° outside [{TILT_MIN_DEG}, {TILT_MAX_DEG}]",
                    a.tilt_deg
                )));
            }
            if !a.position.iter().all(|v| v.is_finite()) || !a.height_m.is_finite() {
                return Err(CoreError::NonFinite(format!("antenna {i} geometry")));
            }
        }
        if self
            .users
            .iter()
            .any(|u| !u.iter().all(|v| v.is_finite()))
        {
            return Err(CoreError::NonFinite("user position".into()));
        }
        for (i, b) in self.buildings.iter().enumerate() {
            if b.min[0] >= b.max[0] || b.min[1] >= b.max[1] {
                return Err(CoreError::InvalidArgument(format!(
                    "building {i} has empty extent"
                )));
            }
        }
        Ok(())
    }

    /// Serialize to pretty JSON so a run's world can be stored and replayed.
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse a layout saved by [`Self::to_json_string`], re-validating.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let layout: NetworkLayout = serde_json::from_str(text)?;
        layout.validate()?;
        Ok(layout)
    }
}

/// Axial hex-grid coordinates of all cells within `n_rings` of the center.
fn hex_sites(n_rings: usize) -> Vec<[f64; 2]> {
    let n = n_rings as i64;
    let mut sites = Vec::new();
    for q in -n..=n {
        for r in (-n).max(-q - n)..=n.min(-q + n) {
            let x = INTER_SITE_DISTANCE_M * (q as f64 + r as f64 / 2.0);
            let y = INTER_SITE_DISTANCE_M * (3.0f64.sqrt() / 2.0) * r as f64;
            sites.push([x, y]);
        }
    }
    sites
}

/// Half-width of the square region users and buildings are scattered over.
pub fn region_half_width(n_rings: usize) -> f64 {
    INTER_SITE_DISTANCE_M * (n_rings as f64 + 0.5)
}

/// Generate a world: a hex grid of base stations (`n_rings = 1` → 7
/// stations, 21 antennas), three antennas per station at azimuths
/// {0°, 120°, 240°}, tilts initialized uniformly in [0°, 15°], and `n_users`
/// users plus `building_count` buildings scattered uniformly over the
/// bounding square. Deterministic per seed.
pub fn generate_layout(
    seed: u64,
    n_rings: usize,
    n_users: usize,
    building_count: usize,
) -> NetworkLayout {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let base_stations = hex_sites(n_rings);
    let half = region_half_width(n_rings);

    let mut antennas = Vec::with_capacity(base_stations.len() * 3);
    for (s, pos) in base_stations.iter().enumerate() {
        for sector in 0..3 {
            antennas.push(Antenna {
                base_station: s,
                position: *pos,
                azimuth_deg: 120.0 * sector as f64,
                height_m: ANTENNA_HEIGHT_M,
                tilt_deg: rng.random_range(TILT_MIN_DEG..=TILT_MAX_DEG),
            });
        }
    }

    let users = (0..n_users)
        .map(|_| {
            [
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            ]
        })
        .collect();

    let buildings = (0..building_count)
        .map(|_| {
            let cx = rng.random_range(-half..half);
            let cy = rng.random_range(-half..half);
            let hx = rng.random_range(BUILDING_HALF_EXTENT_M.0..BUILDING_HALF_EXTENT_M.1);
            let hy = rng.random_range(BUILDING_HALF_EXTENT_M.0..BUILDING_HALF_EXTENT_M.1);
            Building {
                min: [cx - hx, cy - hy],
                max: [cx + hx, cy + hy],
                wall_loss_db: WALL_LOSS_DB,
            }
        })
        .collect();

    NetworkLayout {
        base_stations,
        antennas,
        users,
        buildings,
    }
}
