//! Antenna gain pattern, log-distance path loss, and RSRP.

use serde::{Deserialize, Serialize};

use crate::sim::layout::{Antenna, Building};

/// Radio parameters: transmit power, noise, resource blocks, the sector
/// antenna pattern, and the log-distance path-loss model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    /// Transmit power per antenna `P_c` (linear watts).
    pub tx_power_w: f64,
    /// Noise term `κ` (linear watts).
    pub noise_w: f64,
    /// Bandwidth per physical resource block `ω_B` (Hz).
    pub bandwidth_per_prb_hz: f64,
    /// Resource blocks allocated per user `n_B`.
    pub prbs_per_user: f64,
    /// Path-loss exponent `n`.
    pub pathloss_exponent: f64,
    /// Reference loss `L₀` (dB) at the reference distance.
    pub reference_loss_db: f64,
    /// Reference distance `d₀` (meters).
    pub reference_distance_m: f64,
    /// Vertical half-power beamwidth `θ_3dB` (degrees).
    pub vertical_beamwidth_deg: f64,
    /// Horizontal half-power beamwidth `φ_3dB` (degrees).
    pub horizontal_beamwidth_deg: f64,
    /// Maximum attenuation `A_m` (dB).
    pub max_attenuation_db: f64,
    /// Vertical sidelobe limit `SLA_v` (dB).
    pub sidelobe_limit_db: f64,
    /// Boresight gain `G₀` (dBi).
    pub max_gain_dbi: f64,
    /// Receiver (user) height (meters).
    pub user_height_m: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            tx_power_w: 40.0,
            noise_w: 1e-13,
            bandwidth_per_prb_hz: 180e3,
            prbs_per_user: 50.0,
            pathloss_exponent: 3.5,
            reference_loss_db: 30.0,
            reference_distance_m: 10.0,
            vertical_beamwidth_deg: 10.0,
            horizontal_beamwidth_deg: 65.0,
            max_attenuation_db: 25.0,
            sidelobe_limit_db: 20.0,
            max_gain_dbi: 15.0,
            user_height_m: 1.5,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positives = [
            ("tx_power_w", self.tx_power_w),
            ("noise_w", self.noise_w),
            ("bandwidth_per_prb_hz", self.bandwidth_per_prb_hz),
            ("prbs_per_user", self.prbs_per_user),
            ("reference_distance_m", self.reference_distance_m),
            ("vertical_beamwidth_deg", self.vertical_beamwidth_deg),
            ("horizontal_beamwidth_deg", self.horizontal_beamwidth_deg),
        ];
        for (name, v) in positives {
            if !(v > 0.0) {
                return Err(crate::CoreError::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Wrap an angle difference into (−180°, 180°].
fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a > 180.0 {
        a -= 360.0;
    } else if a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Sector antenna gain towards a user, as a linear factor.
///
/// With θ the depression angle towards the user (degrees below horizon,
/// from the 3-D geometry) and φ the horizontal offset from the azimuth:
///
/// `A_v = min(12·((θ−w)/θ_3dB)², SLA_v)`,
/// `A_h = min(12·(φ/φ_3dB)², A_m)`,
/// `A = min(A_v + A_h, A_m)`,
/// `G = 10^((G₀ − A)/10)`.
///
/// The tilt is passed separately from the antenna so candidate tilts can be
/// evaluated without mutating the layout.
pub fn antenna_gain(
    antenna: &Antenna,
    tilt_deg: f64,
    user: [f64; 2],
    cfg: &PropagationConfig,
) -> f64 {
    let dx = user[0] - antenna.position[0];
    let dy = user[1] - antenna.position[1];
    let horizontal = dx.hypot(dy);
    let drop = antenna.height_m - cfg.user_height_m;
    let theta = drop.atan2(horizontal).to_degrees();

    let vertical_off = (theta - tilt_deg) / cfg.vertical_beamwidth_deg;
    let a_v = (12.0 * vertical_off * vertical_off).min(cfg.sidelobe_limit_db);

    let bearing = dy.atan2(dx).to_degrees();
    let phi = wrap_deg(bearing - antenna.azimuth_deg) / cfg.horizontal_beamwidth_deg;
    let a_h = (12.0 * phi * phi).min(cfg.max_attenuation_db);

    let attenuation = (a_v + a_h).min(cfg.max_attenuation_db);
    10f64.powf((cfg.max_gain_dbi - attenuation) / 10.0)
}

/// Number of building walls the 2-D segment `from → to` crosses, summed over
/// all buildings, weighted by nothing — the companion
/// [`wall_loss_db`](fn@wall_loss_db) applies each building's own loss.
///
/// Uses Liang–Barsky clipping per rectangle: the parametric entry/exit
/// points of the segment against the rectangle that fall strictly inside
/// (0, 1) are boundary crossings (enter + exit = passing through = 2 walls;
/// an endpoint inside the building yields 1).
pub fn wall_crossings(from: [f64; 2], to: [f64; 2], buildings: &[Building]) -> u32 {
    buildings
        .iter()
        .map(|b| rect_crossings(from, to, b))
        .sum()
}

/// Total wall penetration loss (dB) along the 2-D segment `from → to`.
pub fn wall_loss_db(from: [f64; 2], to: [f64; 2], buildings: &[Building]) -> f64 {
    buildings
        .iter()
        .map(|b| rect_crossings(from, to, b) as f64 * b.wall_loss_db)
        .sum()
}

fn rect_crossings(from: [f64; 2], to: [f64; 2], b: &Building) -> u32 {
    let d = [to[0] - from[0], to[1] - from[1]];
    let mut t_enter = 0.0f64;
    let mut t_exit = 1.0f64;
    for axis in 0..2 {
        let (lo, hi) = (b.min[axis], b.max[axis]);
        if d[axis].abs() < 1e-300 {
            // Parallel to these walls: either always between them or never.
            if from[axis] < lo || from[axis] > hi {
                return 0;
            }
            continue;
        }
        let mut t0 = (lo - from[axis]) / d[axis];
        let mut t1 = (hi - from[axis]) / d[axis];
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_enter = t_enter.max(t0);
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return 0;
        }
    }
    // Each clip parameter strictly inside the segment is one wall crossing.
    let mut crossings = 0;
    if t_enter > 0.0 && t_enter < 1.0 {
        crossings += 1;
    }
    if t_exit > 0.0 && t_exit < 1.0 && t_exit > t_enter {
        crossings += 1;
    }
    crossings
}

/// Linear path-loss factor `L ∈ (0, 1]`:
///
/// `L_dB = L₀ + 10·n·log₁₀(max(d, d₀)/d₀) + wall losses`, `L = 10^(−L_dB/10)`,
///
/// where `d` is the 3-D antenna-to-user distance and wall losses come from
/// the 2-D segment's building crossings. Pass an empty `buildings` slice to
/// evaluate the unobstructed model.
pub fn path_loss(
    antenna: &Antenna,
    user: [f64; 2],
    buildings: &[Building],
    cfg: &PropagationConfig,
) -> f64 {
    let dx = user[0] - antenna.position[0];
    let dy = user[1] - antenna.position[1];
    let dz = antenna.height_m - cfg.user_height_m;
    let d3 = (dx * dx + dy * dy + dz * dz).sqrt();
    let d = d3.max(cfg.reference_distance_m);
    let loss_db = cfg.reference_loss_db
        + 10.0 * cfg.pathloss_exponent * (d / cfg.reference_distance_m).log10()
        + wall_loss_db(antenna.position, user, buildings);
    10f64.powf(-loss_db / 10.0)
}

/// Reference signal received power `ρ = P · G · L` (watts).
pub fn rsrp(tx_power_w: f64, gain: f64, loss: f64) -> f64 {
    tx_power_w * gain * loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::layout::ANTENNA_HEIGHT_M;

    fn antenna_at_origin(azimuth: f64) -> Antenna {
        Antenna {
            base_station: 0,
            position: [0.0, 0.0],
            azimuth_deg: azimuth,
            height_m: ANTENNA_HEIGHT_M,
            tilt_deg: 5.0,
        }
    }

    fn cfg() -> PropagationConfig {
        PropagationConfig::default()
    }

    /// Place the user exactly on boresight: depression angle = tilt,
    /// horizontal offset = 0 → zero attenuation, G = 10^(G₀/10).
    #[test]
    fn boresight_gain_is_max() {
        let cfg = cfg();
        let a = antenna_at_origin(0.0);
        let tilt = 7.0f64;
        // Choose the distance whose depression angle equals the tilt.
        let drop = a.height_m - cfg.user_height_m;
        let dist = drop / tilt.to_radians().tan();
        let g = antenna_gain(&a, tilt, [dist, 0.0], &cfg);
        let expect = 10f64.powf(cfg.max_gain_dbi / 10.0);
        assert!((g - expect).abs() / expect < 1e-9, "g = {g}, expect {expect}");
    }

    /// One vertical beamwidth off boresight costs exactly 12 dB.
    #[test]
    fn one_beamwidth_off_is_12_db() {
        let cfg = cfg();
        let a = antenna_at_origin(0.0);
        let drop = a.height_m - cfg.user_height_m;
        let theta = 5.0 + cfg.vertical_beamwidth_deg; // tilt 5° + θ_3dB
        let dist = drop / theta.to_radians().tan();
        let g = antenna_gain(&a, 5.0, [dist, 0.0], &cfg);
        let expect = 10f64.powf((cfg.max_gain_dbi - 12.0) / 10.0);
        assert!((g - expect).abs() / expect < 1e-9);
    }

    /// 30° off in the vertical cut: 12·(30/10)² = 108 dB, capped at SLA_v=20,
    /// total attenuation min(20 + 0, A_m=25) = 20.
    #[test]
    fn vertical_cap_at_sidelobe_limit() {
        let cfg = cfg();
        let a = antenna_at_origin(0.0);
        let drop = a.height_m - cfg.user_height_m;
        let theta = 35.0f64; // tilt 5° + 30°
        let dist = drop / theta.to_radians().tan();
        let g = antenna_gain(&a, 5.0, [dist, 0.0], &cfg);
        let expect = 10f64.powf((cfg.max_gain_dbi - cfg.sidelobe_limit_db) / 10.0);
        assert!((g - expect).abs() / expect < 1e-9);
    }

    /// Total attenuation never exceeds A_m, so gain is bounded below.
    #[test]
    fn gain_bounded_by_max_attenuation() {
        let cfg = cfg();
        let a = antenna_at_origin(240.0);
        let floor = 10f64.powf((cfg.max_gain_dbi - cfg.max_attenuation_db) / 10.0);
        for i in 0..200 {
            let ang = i as f64 * 0.7;
            let user = [1000.0 * ang.to_radians().cos(), 1000.0 * ang.to_radians().sin()];
            let g = antenna_gain(&a, 12.0, user, &cfg);
            assert!(g >= floor * (1.0 - 1e-12));
            assert!(g <= 10f64.powf(cfg.max_gain_dbi / 10.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn path_loss_at_reference_distance() {
        let cfg = cfg();
        let mut a = antenna_at_origin(0.0);
        a.height_m = cfg.user_height_m; // level geometry: 3-D distance = 2-D
        let l = path_loss(&a, [cfg.reference_distance_m, 0.0], &[], &cfg);
        let expect = 10f64.powf(-cfg.reference_loss_db / 10.0);
        assert!((l - expect).abs() / expect < 1e-12);
    }

    /// Doubling the distance adds 10·n·log₁₀2 ≈ 10.54 dB for n = 3.5.
    #[test]
    fn doubling_distance_adds_expected_db() {
        let cfg = cfg();
        let mut a = antenna_at_origin(0.0);
        a.height_m = cfg.user_height_m;
        let l1 = path_loss(&a, [100.0, 0.0], &[], &cfg);
        let l2 = path_loss(&a, [200.0, 0.0], &[], &cfg);
        let db = 10.0 * (l1 / l2).log10();
        let expect = 10.0 * cfg.pathloss_exponent * 2f64.log10();
        assert!((db - expect).abs() < 1e-9);
    }

    /// Crossing a building (2 walls à 10 dB) costs exactly 20 dB.
    #[test]
    fn two_walls_cost_20_db() {
        let cfg = cfg();
        let a = antenna_at_origin(0.0);
        let building = Building {
            min: [40.0, -10.0],
            max: [60.0, 10.0],
            wall_loss_db: 10.0,
        };
        let user = [100.0, 0.0];
        let clear = path_loss(&a, user, &[], &cfg);
        let blocked = path_loss(&a, user, &[building], &cfg);
        let db = 10.0 * (clear / blocked).log10();
        assert!((db - 20.0).abs() < 1e-9);
    }

    #[test]
    fn wall_crossing_counts() {
        let b = Building {
            min: [0.0, 0.0],
            max: [10.0, 10.0],
            wall_loss_db: 10.0,
        };
        // Straight through: 2 walls.
        assert_eq!(wall_crossings([-5.0, 5.0], [15.0, 5.0], &[b.clone()]), 2);
        // Ending inside: 1 wall.
        assert_eq!(wall_crossings([-5.0, 5.0], [5.0, 5.0], &[b.clone()]), 1);
        // Starting inside: 1 wall.
        assert_eq!(wall_crossings([5.0, 5.0], [15.0, 5.0], &[b.clone()]), 1);
        // Fully inside: 0 walls.
        assert_eq!(wall_crossings([2.0, 5.0], [8.0, 5.0], &[b.clone()]), 0);
        // Missing entirely: 0 walls.
        assert_eq!(wall_crossings([-5.0, 20.0], [15.0, 20.0], &[b.clone()]), 0);
        // Parallel segment outside: 0 walls.
        assert_eq!(wall_crossings([-5.0, -1.0], [15.0, -1.0], &[b]), 0);
    }

    #[test]
    fn rsrp_is_a_product() {
        assert_eq!(rsrp(2.0, 0.5, 0.25), 0.25);
        assert_eq!(rsrp(3.0, 1.0, 1.0), 3.0);
        let full = rsrp(2.0, 0.5, 0.5);
        let half = rsrp(2.0, 0.5, 0.25);
        assert!((full / half - 2.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let mut bad = cfg();
        bad.noise_w = 0.0;
        assert!(bad.validate().is_err());
    }
}
