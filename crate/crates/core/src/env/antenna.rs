//! The antenna-tilt control environment.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::mdp::{Action, Transition};
use crate::sim::{
    cell_kpis, generate_layout, CellKpis, NetworkLayout, PropagationConfig,
};

use super::normalizer::KpiNormalizer;

/// Observation dimensionality: tilt + three normalized KPIs.
pub const OBS_DIM: usize = 4;

/// Per-step tilt change bound (degrees).
pub const ACTION_BOUND_DEG: f64 = 1.0;
/// Tilt range (degrees).
pub const TILT_RANGE_DEG: (f64, f64) = (0.0, 15.0);

/// Environment configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Hex rings of base stations (1 → 7 stations, 21 antennas).
    pub n_rings: usize,
    pub n_users: usize,
    pub building_count: usize,
    /// When false, wall losses are skipped everywhere (the baseline's
    /// simplified world); the layout itself is unchanged.
    pub buildings_enabled: bool,
    /// Steps per episode; `done` is emitted on the last one.
    pub episode_length: usize,
    pub propagation: PropagationConfig,
    /// Random-tilt steps used to calibrate the KPI normalizer.
    pub calibration_samples: usize,
    /// Symmetric clip for normalized KPIs.
    pub clip_sigmas: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_rings: 1,
            n_users: 1000,
            building_count: 60,
            buildings_enabled: true,
            episode_length: 500,
            propagation: PropagationConfig::default(),
            calibration_samples: 200,
            clip_sigmas: 3.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episode_length == 0 {
            return Err(CoreError::InvalidArgument(
                "episode_length must be positive".into(),
            ));
        }
        if self.calibration_samples < 100 {
            return Err(CoreError::InvalidArgument(format!(
                "calibration_samples must be ≥ 100, got {}",
                self.calibration_samples
            )));
        }
        if !(self.clip_sigmas > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "clip_sigmas must be positive, got {}",
                self.clip_sigmas
            )));
        }
        self.propagation.validate()
    }
}

/// One agent's view: its own tilt plus its cell's normalized KPIs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AntennaObservation {
    pub tilt_deg: f64,
    pub cov_norm: f64,
    pub cap_norm: f64,
    pub qual_norm: f64,
}

impl AntennaObservation {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.tilt_deg, self.cov_norm, self.cap_norm, self.qual_norm]
    }
}

/// The per-agent reward read off a (next-)state vector:
/// `r = cov + cap + qual` — the three normalized KPI entries, exactly.
/// Single source of truth shared by the environment and by model-generated
/// rollouts.
pub fn reward_from_state(state: &[f64]) -> f64 {
    state[1] + state[2] + state[3]
}

/// Elementwise observation-space bounds `[low, high]` for the given KPI
/// clip: tilt in [0°, 15°], each normalized KPI in ±clip_sigmas. Used for
/// model-input scaling and for clamping generated states.
pub fn state_bounds(clip_sigmas: f64) -> ([f64; OBS_DIM], [f64; OBS_DIM]) {
    (
        [TILT_RANGE_DEG.0, -clip_sigmas, -clip_sigmas, -clip_sigmas],
        [TILT_RANGE_DEG.1, clip_sigmas, clip_sigmas, clip_sigmas],
    )
}

/// Clamp each requested Δw to ±1°, add it to the tilt, clamp to [0°, 15°].
/// Shared by live stepping and normalizer calibration.
pub(crate) fn apply_actions(layout: &mut NetworkLayout, actions: &[f64]) -> Result<()> {
    if actions.len() != layout.n_cells() {
        return Err(CoreError::DimensionMismatch {
            context: "env step: one action per antenna",
            expected: layout.n_cells(),
            got: actions.len(),
        });
    }
    for (antenna, &raw) in layout.antennas.iter_mut().zip(actions) {
        if !raw.is_finite() {
            return Err(CoreError::NonFinite("action".into()));
        }
        let dw = raw.clamp(-ACTION_BOUND_DEG, ACTION_BOUND_DEG);
        antenna.tilt_deg = (antenna.tilt_deg + dw).clamp(TILT_RANGE_DEG.0, TILT_RANGE_DEG.1);
    }
    Ok(())
}

/// Multi-agent tilt environment with parameter sharing: all antennas move
/// in one step, and every step emits one [`Transition`] per antenna.
#[derive(Clone, Debug)]
pub struct AntennaEnv {
    cfg: EnvConfig,
    normalizer: KpiNormalizer,
    layout: NetworkLayout,
    kpis: Vec<CellKpis>,
    step_in_episode: usize,
    global_step: u64,
}

impl AntennaEnv {
    /// Build the environment and draw its world from `seed`. One world per
    /// experiment: later episodes keep the layout and tilts (only the
    /// `done` flag marks boundaries).
    pub fn new(cfg: EnvConfig, normalizer: KpiNormalizer, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let layout = generate_layout(seed, cfg.n_rings, cfg.n_users, cfg.building_count);
        let kpis = cell_kpis(&layout, &cfg.propagation, cfg.buildings_enabled)?;
        Ok(Self {
            cfg,
            normalizer,
            layout,
            kpis,
            step_in_episode: 0,
            global_step: 0,
        })
    }

    /// Redraw the world (fresh layout, uniform random tilts) and return the
    /// initial observations.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<AntennaObservation>> {
        self.layout = generate_layout(
            seed,
            self.cfg.n_rings,
            self.cfg.n_users,
            self.cfg.building_count,
        );
        self.kpis = cell_kpis(&self.layout, &self.cfg.propagation, self.cfg.buildings_enabled)?;
        self.step_in_episode = 0;
        self.global_step = 0;
        Ok(self.observations())
    }

    pub fn n_agents(&self) -> usize {
        self.layout.n_cells()
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn normalizer(&self) -> &KpiNormalizer {
        &self.normalizer
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn tilts(&self) -> Vec<f64> {
        self.layout.antennas.iter().map(|a| a.tilt_deg).collect()
    }

    /// Force the tilt vector (used when replaying or evaluating a fixed
    /// configuration); values are clamped to the tilt range.
    pub fn set_tilts(&mut self, tilts: &[f64]) -> Result<()> {
        if tilts.len() != self.layout.n_cells() {
            return Err(CoreError::DimensionMismatch {
                context: "set_tilts: one tilt per antenna",
                expected: self.layout.n_cells(),
                got: tilts.len(),
            });
        }
        for (antenna, &t) in self.layout.antennas.iter_mut().zip(tilts) {
            antenna.tilt_deg = t.clamp(TILT_RANGE_DEG.0, TILT_RANGE_DEG.1);
        }
        self.kpis = cell_kpis(&self.layout, &self.cfg.propagation, self.cfg.buildings_enabled)?;
        Ok(())
    }

    /// Current per-agent observations.
    pub fn observations(&self) -> Vec<AntennaObservation> {
        self.layout
            .antennas
            .iter()
            .zip(&self.kpis)
            .map(|(antenna, k)| AntennaObservation {
                tilt_deg: antenna.tilt_deg,
                cov_norm: self.normalizer.normalize(0, k.cov),
                cap_norm: self.normalizer.normalize(1, k.cap),
                qual_norm: self.normalizer.normalize(2, k.qual),
            })
            .collect()
    }

    /// Advance every antenna by its Δw and emit one transition per agent.
    ///
    /// Rewards are `reward_from_state(next_state)`; `done` is set on every
    /// agent's transition at the episode boundary, after which the episode
    /// counter restarts without touching the world.
    pub fn step(&mut self, actions: &[f64]) -> Result<Vec<Transition>> {
        let states: Vec<Vec<f64>> = self
            .observations()
            .into_iter()
            .map(AntennaObservation::to_vec)
            .collect();

        apply_actions(&mut self.layout, actions)?;
        self.kpis = cell_kpis(&self.layout, &self.cfg.propagation, self.cfg.buildings_enabled)?;

        self.step_in_episode += 1;
        self.global_step += 1;
        let done = self.step_in_episode == self.cfg.episode_length;
        if done {
            self.step_in_episode = 0;
        }

        let next: Vec<AntennaObservation> = self.observations();
        Ok((0..self.n_agents())
            .map(|i| {
                let next_state = next[i].to_vec();
                let applied = actions[i]
                    .clamp(-ACTION_BOUND_DEG, ACTION_BOUND_DEG);
                Transition {
                    state: states[i].clone(),
                    action: Action::Continuous(vec![applied]),
                    reward: reward_from_state(&next_state),
                    next_state,
                    done,
                    agent_id: i,
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::*;

    fn small_cfg() -> EnvConfig {
        EnvConfig {
            n_rings: 0,
            n_users: 50,
            building_count: 5,
            episode_length: 10,
            ..EnvConfig::default()
        }
    }

    fn env(seed: u64) -> AntennaEnv {
        AntennaEnv::new(small_cfg(), KpiNormalizer::identity(3.0), seed).unwrap()
    }

    #[test]
    fn one_ring_emits_21_observations() {
        let cfg = EnvConfig {
            n_users: 100,
            ..EnvConfig::default()
        };
        let env = AntennaEnv::new(cfg, KpiNormalizer::identity(3.0), 1).unwrap();
        assert_eq!(env.observations().len(), 21);
    }

    #[test]
    fn same_seed_same_initial_observations() {
        let a = env(5).observations();
        let b = env(5).observations();
        assert_eq!(a, b);
    }

    #[test]
    fn step_emits_one_transition_per_antenna() {
        let mut e = env(3);
        let n = e.n_agents();
        let ts = e.step(&vec![0.5; n]).unwrap();
        assert_eq!(ts.len(), n);
        for (i, t) in ts.iter().enumerate() {
            assert_eq!(t.agent_id, i);
            assert_eq!(t.state.len(), OBS_DIM);
            assert_eq!(t.next_state.len(), OBS_DIM);
        }
    }

    #[test]
    fn oversized_action_clamped_to_one_degree() {
        let mut e = env(4);
        let before = e.tilts();
        let n = e.n_agents();
        let ts = e.step(&vec![1.5; n]).unwrap();
        let after = e.tilts();
        for i in 0..n {
            let expect = (before[i] + 1.0).clamp(0.0, 15.0);
            assert_eq!(after[i], expect);
            assert_eq!(ts[i].action.as_continuous().unwrap(), &[1.0][..]);
        }
    }

    #[test]
    fn tilt_saturates_at_bounds() {
        let mut e = env(6);
        let n = e.n_agents();
        e.set_tilts(&vec![15.0; n]).unwrap();
        e.step(&vec![1.0; n]).unwrap();
        assert!(e.tilts().iter().all(|&t| t == 15.0));
        e.set_tilts(&vec![0.0; n]).unwrap();
        e.step(&vec![-1.0; n]).unwrap();
        assert!(e.tilts().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn tilts_stay_in_range_under_random_actions() {
        let mut e = env(8);
        let n = e.n_agents();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..200 {
            let actions: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            e.step(&actions).unwrap();
            assert!(e
                .tilts()
                .iter()
                .all(|&t| (TILT_RANGE_DEG.0..=TILT_RANGE_DEG.1).contains(&t)));
        }
    }

    #[test]
    fn reward_equals_sum_of_next_state_kpis_exactly() {
        let mut e = env(9);
        let n = e.n_agents();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            let actions: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for t in e.step(&actions).unwrap() {
                let expect = t.next_state[1] + t.next_state[2] + t.next_state[3];
                assert_eq!(t.reward, expect);
            }
        }
    }

    #[test]
    fn done_flag_marks_episode_boundary_only() {
        let mut e = env(10);
        let n = e.n_agents();
        for step in 1..=25 {
            let ts = e.step(&vec![0.0; n]).unwrap();
            let done = ts.iter().all(|t| t.done);
            let none = ts.iter().all(|t| !t.done);
            if step % 10 == 0 {
                assert!(done, "step {step} should be terminal");
            } else {
                assert!(none, "step {step} should not be terminal");
            }
        }
    }

    #[test]
    fn wrong_action_count_rejected() {
        let mut e = env(11);
        assert!(e.step(&[0.0]).is_err());
    }

    #[test]
    fn reward_from_state_is_kpi_sum() {
        assert_eq!(reward_from_state(&[7.0, 1.0, -0.5, 0.25]), 0.75);
    }

    #[test]
    fn state_bounds_shape() {
        let (lo, hi) = state_bounds(3.0);
        assert_eq!(lo, [0.0, -3.0, -3.0, -3.0]);
        assert_eq!(hi, [15.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn reset_redraws_world() {
        let mut e = env(12);
        let before = e.layout().to_json_string().unwrap();
        e.reset(13).unwrap();
        let after = e.layout().to_json_string().unwrap();
        assert_ne!(before, after);
    }
}
