//! Constrained randomization by simulated annealing over pairwise swaps.
//!
//! The chain starts from an i.i.d. draw and only ever exchanges two positions,
//! so the multiset of values is conserved bit for bit. A stage ends after
//! `max_success` accepted or `max_total` proposed swaps; the temperature is then
//! multiplied by `cooling_factor`. A stage with no acceptances is a freeze: the
//! first one remelts (`T *= remelt_factor`), a second consecutive one stops the
//! run.

use std::sync::mpsc::Sender;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::{EmpiricalDistribution, SampleDraw};
use crate::error::{Result, SmcError};
use crate::features::{FeatureSpec, FeatureVector, ObjectiveState, SwapProposal, DEFAULT_RECOMPUTE_EVERY};
use crate::rng;

/// Temperature used when warm-up probes find no uphill move.
pub const TEMPERATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialTemp {
    /// Median uphill probe cost over `ln 2`, from `probes` random swaps.
    Auto {
        probes: usize,
    },
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    /// Stop once the objective is at or below this value.
    Delta(f64),
    /// Stop once every per-lag discrepancy is inside the 99% white-noise band.
    Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub initial_temp: InitialTemp,
    pub cooling_factor: f64,
    /// Accepted swaps per stage; `None` means `2 N`.
    pub max_success: Option<u64>,
    /// Proposed swaps per stage; `None` means `20 N`.
    pub max_total: Option<u64>,
    pub goal: Goal,
    pub max_iterations: u64,
    pub remelt_factor: f64,
    pub seed: u64,
    pub log_every: u64,
    pub recompute_every: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_temp: InitialTemp::Auto { probes: 1000 },
            cooling_factor: 0.9,
            max_success: None,
            max_total: None,
            goal: Goal::Band,
            max_iterations: 100_000_000,
            remelt_factor: 10.0,
            seed: 0,
            log_every: 100_000,
            recompute_every: DEFAULT_RECOMPUTE_EVERY,
        }
    }
}

impl AnnealConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Per-stage (success, total) limits for a series of length `n`.
    pub fn stage_limits(&self, n: usize) -> (u64, u64) {
        let n = n as u64;
        (self.max_success.unwrap_or(2 * n), self.max_total.unwrap_or(20 * n))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(SmcError::invalid("cooling factor must lie in (0, 1)"));
        }
        if self.remelt_factor.is_nan() || self.remelt_factor <= 1.0 {
            return Err(SmcError::invalid("remelt factor must exceed 1"));
        }
        if self.max_iterations < 1 {
            return Err(SmcError::invalid("max_iterations must be at least 1"));
        }
        let (success, total) = self.stage_limits(n);
        if success < 1 || success > total {
            return Err(SmcError::invalid("need 1 <= max_success <= max_total"));
        }
        match self.initial_temp {
            InitialTemp::Auto { probes } if probes < 2 => {
                Err(SmcError::invalid("temperature warm-up needs at least 2 probes"))
            }
            InitialTemp::Fixed(t) if !(t >= 0.0 && t.is_finite()) => {
                Err(SmcError::invalid("initial temperature must be finite and >= 0"))
            }
            _ => match self.goal {
                Goal::Delta(g) if g.is_nan() || g < 0.0 => Err(SmcError::invalid("goal must be >= 0")),
                _ => Ok(()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Goal,
    MaxIterations,
    Frozen,
}

impl Termination {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Termination::Goal => 0,
            Termination::MaxIterations => 2,
            Termination::Frozen => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: u64,
    pub delta: f64,
    /// Lowest objective seen up to this iteration.
    pub best: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealReport {
    pub seed: u64,
    pub initial_temperature: f64,
    pub final_series: Vec<f64>,
    pub final_delta: f64,
    pub iterations: u64,
    pub accepted: u64,
    pub stages: u64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub terminated_by: Termination,
}

/// Progress message emitted every `log_every` proposals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressEvent {
    pub realization: usize,
    pub iteration: u64,
    pub delta: f64,
    pub temperature: f64,
}

/// Metropolis rule: downhill or flat moves always pass, uphill moves pass
/// with probability `exp(-cost / T)`.
pub fn metropolis_accept<R: Rng + ?Sized>(cost: f64, temperature: f64, rng: &mut R) -> bool {
    if cost <= 0.0 {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    rng.random::<f64>() < (-cost / temperature).exp()
}

fn random_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Warm-up temperature: the median positive objective increase over random
/// probe swaps, divided by `ln 2`, so a median uphill move passes half the time.
pub fn auto_initial_temperature(state: &ObjectiveState, probes: usize, seed: u64) -> Result<f64> {
    if probes < 2 {
        return Err(SmcError::invalid("temperature warm-up needs at least 2 probes"));
    }
    if state.len() < 2 {
        return Err(SmcError::TooShort {
            needed: 2,
            got: state.len(),
        });
    }
    let mut rng = rng::seeded(seed, rng::STREAM_PROBE);
    let mut proposal = SwapProposal::default();
    let mut uphill = Vec::with_capacity(probes);
    for _ in 0..probes {
        let (i, j) = random_pair(state.len(), &mut rng);
        state.propose_into(i, j, &mut proposal)?;
        let cost = proposal.new_delta - state.delta();
        if cost > 0.0 {
            uphill.push(cost);
        }
    }
    Ok(temperature_from_costs(uphill))
}

fn temperature_from_costs(mut uphill: Vec<f64>) -> f64 {
    if uphill.is_empty() {
        return TEMPERATURE_FLOOR;
    }
    uphill.sort_by(f64::total_cmp);
    let m = uphill.len();
    let median = if m % 2 == 1 {
        uphill[m / 2]
    } else {
        0.5 * (uphill[m / 2 - 1] + uphill[m / 2])
    };
    (median / std::f64::consts::LN_2).max(TEMPERATURE_FLOOR)
}

fn goal_met(state: &ObjectiveState, goal: Goal, band_bound: f64) -> bool {
    match goal {
        Goal::Delta(g) => state.delta() <= g,
        Goal::Band => state.delta() <= band_bound && state.within_band(),
    }
}

/// Anneals `initial` towards `target`. Deterministic given `cfg.seed`.
pub fn anneal_run(
    initial: &SampleDraw,
    target: &FeatureVector,
    spec: &FeatureSpec,
    cfg: &AnnealConfig,
) -> Result<AnnealReport> {
    anneal_chain(initial, target, spec, cfg, 0, None)
}

/// [`anneal_run`] that reports progress over a channel, tagged with
/// `realization`.
pub fn anneal_chain(
    initial: &SampleDraw,
    target: &FeatureVector,
    spec: &FeatureSpec,
    cfg: &AnnealConfig,
    realization: usize,
    progress: Option<&Sender<ProgressEvent>>,
) -> Result<AnnealReport> {
    let n = initial.len();
    if n < 2 {
        return Err(SmcError::TooShort { needed: 2, got: n });
    }
    cfg.validate(n)?;
    let mut state = ObjectiveState::new(&initial.values, target, spec)?;
    state.set_recompute_every(cfg.recompute_every);

    let initial_temperature = match cfg.initial_temp {
        InitialTemp::Fixed(t) => t,
        InitialTemp::Auto { probes } => auto_initial_temperature(&state, probes, cfg.seed)?,
    };
    let mut temperature = initial_temperature;
    let (max_success, max_total) = cfg.stage_limits(n);
    let log_every = cfg.log_every.max(1);

    let mut rng = rng::seeded(cfg.seed, rng::STREAM_ANNEAL);
    let mut proposal = SwapProposal::default();
    let mut best = state.delta();
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        delta: state.delta(),
        best,
        temperature,
    }];
    let (mut iterations, mut accepted, mut stages) = (0u64, 0u64, 0u64);
    let (mut stage_proposed, mut stage_accepted) = (0u64, 0u64);
    let mut consecutive_freezes = 0;

    let band_bound = state.band_bound();
    let mut check_goal = true;
    let terminated_by = loop {
        if check_goal && goal_met(&state, cfg.goal, band_bound) {
            break Termination::Goal;
        }
        check_goal = false;
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        let (i, j) = random_pair(n, &mut rng);
        state.propose_into(i, j, &mut proposal)?;
        iterations += 1;
        stage_proposed += 1;
        if metropolis_accept(proposal.new_delta - state.delta(), temperature, &mut rng) {
            state.apply_swap(&proposal)?;
            accepted += 1;
            stage_accepted += 1;
            best = best.min(state.delta());
            check_goal = true;
        }
        if iterations % log_every == 0 {
            trajectory.push(TrajectoryPoint {
                iteration: iterations,
                delta: state.delta(),
                best,
                temperature,
            });
            if let Some(tx) = progress {
                // a dropped receiver only means nobody is listening
                let _ = tx.send(ProgressEvent {
                    realization,
                    iteration: iterations,
                    delta: state.delta(),
                    temperature,
                });
            }
        }
        if stage_accepted >= max_success || stage_proposed >= max_total {
            stages += 1;
            if stage_accepted == 0 {
                consecutive_freezes += 1;
                if consecutive_freezes >= 2 {
                    break Termination::Frozen;
                }
                temperature *= cfg.remelt_factor;
            } else {
                consecutive_freezes = 0;
                temperature *= cfg.cooling_factor;
            }
            stage_proposed = 0;
            stage_accepted = 0;
        }
    };

    if trajectory.last().map(|p| p.iteration) != Some(iterations) {
        trajectory.push(TrajectoryPoint {
            iteration: iterations,
            delta: state.delta(),
            best,
            temperature,
        });
    }
    Ok(AnnealReport {
        seed: cfg.seed,
        initial_temperature,
        final_delta: state.delta(),
        final_series: state.series().to_vec(),
        iterations,
        accepted,
        stages,
        trajectory,
        terminated_by,
    })
}

/// Runs `count` independent realizations in parallel.
///
/// Realization `k` uses seed `derive_seed(base_seed, k)` both for its own
/// i.i.d. draw of length `n` from `dist` and for its annealing chain. The
/// result order is the realization index.
#[allow(clippy::too_many_arguments)]
pub fn run_realizations(
    count: usize,
    base_seed: u64,
    dist: &EmpiricalDistribution,
    n: usize,
    target: &FeatureVector,
    spec: &FeatureSpec,
    cfg: &AnnealConfig,
    progress: Option<&Sender<ProgressEvent>>,
) -> Result<Vec<AnnealReport>> {
    if count < 1 {
        return Err(SmcError::invalid("need at least one realization"));
    }
    (0..count)
        .into_par_iter()
        .map(|k| {
            let seed = rng::derive_seed(base_seed, k as u64);
            let draw = dist.sample_iid(n, seed)?;
            let cfg = cfg.clone().with_seed(seed);
            let tx = progress.cloned();
            anneal_chain(&draw, target, spec, &cfg, k, tx.as_ref())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::rho;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn temperature_closed_forms() {
        assert_eq!(temperature_from_costs(vec![]), TEMPERATURE_FLOOR);
        let t = temperature_from_costs(vec![0.3; 7]);
        assert!((t - 0.3 / std::f64::consts::LN_2).abs() < 1e-15);
        let t = temperature_from_costs(vec![0.1, 0.4, 0.2, 0.3]);
        assert!((t - 0.25 / std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn flat_landscape_gives_floor() {
        let spec = FeatureSpec::target(vec![1.0; 10]);
        let target = rho(&[1.0; 10], &spec).unwrap();
        let state = ObjectiveState::new(&[1.0; 10], &target, &spec).unwrap();
        assert_eq!(auto_initial_temperature(&state, 50, 1).unwrap(), TEMPERATURE_FLOOR);
        assert!(auto_initial_temperature(&state, 1, 1).is_err());
    }

    #[test]
    fn already_at_goal_returns_immediately() {
        let x = noise(200, 1);
        let spec = FeatureSpec::autocorrelation(3);
        let target = rho(&x, &spec).unwrap();
        let draw = SampleDraw {
            values: x.clone(),
            seed: 0,
        };
        let report = anneal_run(&draw, &target, &spec, &AnnealConfig::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(report.terminated_by, Termination::Goal);
        assert_eq!(report.final_series, x);
    }

    #[test]
    fn config_validation() {
        let bad = [
            AnnealConfig {
                cooling_factor: 1.0,
                ..Default::default()
            },
            AnnealConfig {
                remelt_factor: 1.0,
                ..Default::default()
            },
            AnnealConfig {
                max_iterations: 0,
                ..Default::default()
            },
            AnnealConfig {
                max_success: Some(10),
                max_total: Some(5),
                ..Default::default()
            },
            AnnealConfig {
                initial_temp: InitialTemp::Fixed(-1.0),
                ..Default::default()
            },
            AnnealConfig {
                goal: Goal::Delta(-0.1),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate(100).is_err(), "{cfg:?}");
        }
        assert!(AnnealConfig::default().validate(100).is_ok());
    }

    #[test]
    fn greedy_run_reaches_exact_target() {
        let y: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let spec = FeatureSpec::target(y.clone());
        let target = rho(&y, &spec).unwrap();
        let mut start = y.clone();
        start.swap(0, 19);
        let cfg = AnnealConfig {
            initial_temp: InitialTemp::Fixed(0.0),
            goal: Goal::Delta(0.0),
            ..Default::default()
        };
        let draw = SampleDraw { values: start, seed: 0 };
        let report = anneal_run(&draw, &target, &spec, &cfg).unwrap();
        assert_eq!(report.terminated_by, Termination::Goal);
        assert_eq!(report.final_series, y);
    }

    #[test]
    fn frozen_chain_terminates() {
        // At the exact optimum of a target-series objective with distinct
        // values, every swap is uphill; at T = 0 nothing is accepted.
        let y: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let spec = FeatureSpec::target(y.clone());
        let target = rho(&y, &spec).unwrap();
        let cfg = AnnealConfig {
            initial_temp: InitialTemp::Fixed(0.0),
            max_success: Some(5),
            max_total: Some(400),
            ..Default::default()
        };
        let draw = SampleDraw {
            values: y.clone(),
            seed: 0,
        };
        let report = anneal_run(&draw, &target, &spec, &cfg).unwrap();
        assert_eq!(report.terminated_by, Termination::Frozen);
        assert_eq!(report.iterations, 800);
        assert_eq!(report.accepted, 0);
        assert_eq!(report.stages, 2);
        assert_eq!(Termination::Frozen.exit_code(), 3);
    }

    #[test]
    fn max_iterations_terminates() {
        let x = noise(300, 2);
        let spec = FeatureSpec::autocorrelation(2);
        let target = FeatureVector {
            entries: vec![0.9, 0.8],
        };
        let _ = rho(&x, &spec).unwrap();
        let cfg = AnnealConfig {
            max_iterations: 5000,
            log_every: 1000,
            ..Default::default()
        };
        let draw = SampleDraw { values: x, seed: 0 };
        let report = anneal_run(&draw, &target, &spec, &cfg).unwrap();
        assert_eq!(report.terminated_by, Termination::MaxIterations);
        assert_eq!(report.iterations, 5000);
        assert_eq!(report.trajectory.len(), 6);
        assert_eq!(Termination::MaxIterations.exit_code(), 2);
    }

    #[test]
    fn progress_events_arrive() {
        let x = noise(100, 3);
        let spec = FeatureSpec::autocorrelation(2);
        let target = FeatureVector {
            entries: vec![0.9, 0.8],
        };
        let cfg = AnnealConfig {
            max_iterations: 1000,
            log_every: 100,
            ..Default::default()
        };
        let (tx, rx) = std::sync::mpsc::channel();
        let draw = SampleDraw { values: x, seed: 0 };
        anneal_chain(&draw, &target, &spec, &cfg, 4, Some(&tx)).unwrap();
        drop(tx);
        let events: Vec<_> = rx.iter().collect();
        assert!(!events.is_empty());
        assert!(events.iter().all(|e| e.realization == 4 && e.iteration % 100 == 0));
    }

    #[test]
    fn metropolis_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(metropolis_accept(-1.0, 0.0, &mut rng));
        assert!(metropolis_accept(0.0, 0.0, &mut rng));
        assert!(!metropolis_accept(1e-300, 0.0, &mut rng));
    }
}
