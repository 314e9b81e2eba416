//! Closed-loop experiments on the discretized PDEs.
//!
//! A law is trained once per configuration and shared read-only. Trials
//! run in parallel, each from its own initial-condition stream, and are
//! reduced in trial order so outputs depend only on `(config, seed)`.

mod config;
mod output;

pub use config::{
    parse_pde, DisturbanceKind, DisturbanceSpec, DmdcSettings, EnkfSettings, ExperimentConfig, GridLists, ModelPath,
    WeightScales,
};
pub use output::{emit_results, write_config_echo, write_heatmap, write_timeseries, write_trials};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::controller::{robust_control, ControlLaw, OptimalControlWeights, RobustConfig};
use crate::dual_enkf::{run_dual_enkf_linear, run_dual_enkf_nonlinear, EnkfConfig, RunningCost};
use crate::error::{check_dim, Result};
use crate::pde_sim::{l2_norm, rk4_step, sample_initial_condition, GridSpec, PdeSimulator, PdeState};
use crate::reduced_model::{collect_snapshots, fit_dmdc, to_continuous, Excitation, ReducedModel};
use crate::rng;

/// States whose L² norm exceeds this are treated as blown up.
const BLOW_UP_NORM: f64 = 1e8;

/// Time-dependent matched disturbance on the control channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    kind: DisturbanceKind,
    weights: DVector<f64>,
}

impl Disturbance {
    pub fn at(&self, t: f64) -> DVector<f64> {
        match self.kind {
            DisturbanceKind::Sin => &self.weights * t.sin(),
            DisturbanceKind::Const => self.weights.clone(),
            DisturbanceKind::None => DVector::zeros(self.weights.len()),
        }
    }
}

pub fn make_disturbance(spec: &DisturbanceSpec, m: usize) -> Result<Disturbance> {
    let shape = match &spec.channels {
        Some(ch) => {
            check_dim("disturbance channels", m, ch.len())?;
            DVector::from_column_slice(ch)
        }
        None => DVector::from_element(m, 1.0),
    };
    Ok(Disturbance {
        kind: spec.kind,
        weights: shape * spec.d0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Uncontrolled,
    Optimal,
    Robust,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Uncontrolled, Policy::Optimal, Policy::Robust];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Uncontrolled => "uncontrolled",
            Policy::Optimal => "optimal",
            Policy::Robust => "robust",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub times: Vec<f64>,
    pub l2_series: Vec<f64>,
    /// `‖z(T)‖/‖z(0)‖`, infinite when the trial blew up.
    pub terminal_ratio: f64,
    pub failed: bool,
}

/// Full-order simulator plus the trained law.
#[derive(Debug, Clone)]
pub struct Trained {
    pub sim: PdeSimulator,
    pub law: ControlLaw,
    pub reduced: Option<ReducedModel>,
}

impl ExperimentConfig {
    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.p, self.length)
    }

    pub fn simulator(&self) -> Result<PdeSimulator> {
        PdeSimulator::new(self.pde, self.nu, self.grid_spec()?, self.m, self.boundary)
    }

    pub fn control_weights(&self, n: usize) -> Result<OptimalControlWeights> {
        let w = self.weights;
        OptimalControlWeights::new(
            DMatrix::identity(n, n) * w.q.sqrt(),
            DMatrix::identity(self.m, self.m) * w.r,
            DMatrix::identity(n, n) * w.g,
        )
    }

    pub fn robust_config(&self, lambda: f64) -> Result<RobustConfig> {
        RobustConfig::new(lambda, self.r)
    }

    fn enkf_config(&self, n: usize) -> EnkfConfig {
        let mut cfg = EnkfConfig::new(
            self.enkf.particles,
            self.enkf.horizon,
            self.enkf.dt,
            DMatrix::identity(n, n) / self.weights.g,
            self.seed,
        );
        cfg.innovation = self.enkf.innovation;
        cfg
    }
}

/// Snapshots of the full simulator under random excitation, fitted and
/// converted to continuous time.
pub fn fit_reduced_model(cfg: &ExperimentConfig, sim: &PdeSimulator) -> Result<ReducedModel> {
    let grid = sim.grid;
    let data = collect_snapshots(
        sim,
        cfg.dmdc.trajectories,
        cfg.dmdc.steps,
        cfg.dt_sim,
        Excitation {
            amplitude: cfg.dmdc.amplitude,
            hold: cfg.dmdc.hold,
        },
        |r| sample_initial_condition(r, &grid),
        cfg.seed,
    )?;
    to_continuous(&fit_dmdc(&data, cfg.dmdc.n)?)
}

/// Trains the dual EnKF on the configured model path. `reduced` reuses a
/// previously fitted model on the reduced path.
pub fn train(cfg: &ExperimentConfig, reduced: Option<ReducedModel>) -> Result<Trained> {
    cfg.validate()?;
    let sim = cfg.simulator()?;
    let robust = cfg.robust_config(cfg.lambda)?;
    match cfg.model {
        ModelPath::Full => {
            let n = cfg.p;
            let weights = cfg.control_weights(n)?;
            let cost = RunningCost::quadratic(weights.c.clone());
            let gain = run_dual_enkf_nonlinear(&sim, &cost, &weights.r, &cfg.enkf_config(n))?;
            let law = ControlLaw::new(gain, weights, robust, cfg.b_access)?;
            Ok(Trained {
                sim,
                law,
                reduced: None,
            })
        }
        ModelPath::Dmdc => {
            let model = match reduced {
                Some(m) => m,
                None => fit_reduced_model(cfg, &sim)?,
            };
            let n = model.n();
            let weights = cfg.control_weights(n)?;
            let gain = run_dual_enkf_linear(&model.a, &model.b, &weights.c, &weights.r, &cfg.enkf_config(n))?;
            let law = ControlLaw::new(gain, weights, robust, cfg.b_access)?.with_reduction(model.clone())?;
            Ok(Trained {
                sim,
                law,
                reduced: Some(model),
            })
        }
    }
}

/// Integrates the full PDE with `U = u(t, z) + d(t)` held over each step.
/// `law = None` is the uncontrolled system.
pub fn simulate_closed_loop(
    cfg: &ExperimentConfig,
    sim: &PdeSimulator,
    law: Option<&ControlLaw>,
    disturbance: &Disturbance,
    z0: &PdeState,
) -> Result<TrialResult> {
    let steps = cfg.sim_steps();
    let grid = sim.grid;
    let mut times = Vec::with_capacity(steps + 1);
    let mut series = Vec::with_capacity(steps + 1);
    let mut z = z0.clone();
    let mut t = 0.0;
    times.push(0.0);
    series.push(l2_norm(&z, &grid));
    let mut failed = false;
    for k in 0..steps {
        let h = if k + 1 == steps { cfg.t_sim - t } else { cfg.dt_sim };
        if !failed {
            let mut u = disturbance.at(t);
            if let Some(law) = law {
                u += robust_control(law, t, &z, sim)?;
            }
            z = rk4_step(sim, &z, &u, h);
        }
        t = if k + 1 == steps {
            cfg.t_sim
        } else {
            (k + 1) as f64 * cfg.dt_sim
        };
        let norm = if failed { f64::INFINITY } else { l2_norm(&z, &grid) };
        if !norm.is_finite() || norm > BLOW_UP_NORM {
            failed = true;
        }
        times.push(t);
        series.push(if failed { f64::INFINITY } else { norm });
    }
    let terminal_ratio = if failed {
        f64::INFINITY
    } else {
        series[steps] / series[0]
    };
    Ok(TrialResult {
        times,
        l2_series: series,
        terminal_ratio,
        failed,
    })
}

/// Pointwise statistics of one policy over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: Policy,
    pub lambda: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub ratios: Vec<f64>,
    pub failures: usize,
}

impl PolicySummary {
    fn from_trials(policy: Policy, lambda: f64, trials: &[&TrialResult]) -> Self {
        let len = trials[0].l2_series.len();
        let count = trials.len() as f64;
        let mut mean = vec![0.0; len];
        let mut variance = vec![0.0; len];
        for k in 0..len {
            let mu = trials.iter().map(|tr| tr.l2_series[k]).sum::<f64>() / count;
            let var = if mu.is_finite() {
                trials.iter().map(|tr| (tr.l2_series[k] - mu).powi(2)).sum::<f64>() / count
            } else {
                f64::INFINITY
            };
            mean[k] = mu;
            variance[k] = var;
        }
        Self {
            policy,
            lambda,
            mean,
            variance,
            ratios: trials.iter().map(|tr| tr.terminal_ratio).collect(),
            failures: trials.iter().filter(|tr| tr.failed).count(),
        }
    }

    /// Arithmetic mean of the per-trial terminal ratios.
    pub fn mean_terminal_ratio(&self) -> f64 {
        self.ratios.iter().sum::<f64>() / self.ratios.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub kind: DisturbanceKind,
    pub d0: f64,
    pub times: Vec<f64>,
    pub policies: Vec<PolicySummary>,
}

impl BatchResult {
    pub fn policy(&self, policy: Policy) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy)
    }

    pub fn failures(&self) -> usize {
        self.policies.iter().map(|p| p.failures).sum()
    }
}

/// Initial condition of trial `i`.
pub fn trial_initial_condition(cfg: &ExperimentConfig, grid: &GridSpec, i: usize) -> PdeState {
    let mut r = rng::stream(cfg.seed, rng::DOMAIN_TRIAL, i as u64);
    sample_initial_condition(&mut r, grid)
}

/// Runs `cfg.trials` trials under each requested policy. The optimal policy
/// is the trained law with `λ = 0`; the robust policy uses `cfg.lambda`.
pub fn run_trial_batch(cfg: &ExperimentConfig, trained: &Trained, policies: &[Policy]) -> Result<BatchResult> {
    let disturbance = make_disturbance(&cfg.disturbance, cfg.m)?;
    let optimal = trained.law.with_robust(cfg.robust_config(0.0)?);
    let robust = trained.law.with_robust(cfg.robust_config(cfg.lambda)?);
    let runs: Vec<Result<Vec<TrialResult>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let z0 = trial_initial_condition(cfg, &trained.sim.grid, i);
            policies
                .iter()
                .map(|p| {
                    let law = match p {
                        Policy::Uncontrolled => None,
                        Policy::Optimal => Some(&optimal),
                        Policy::Robust => Some(&robust),
                    };
                    simulate_closed_loop(cfg, &trained.sim, law, &disturbance, &z0)
                })
                .collect()
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let times = runs[0][0].times.clone();
    let summaries = policies
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let lambda = match p {
                Policy::Robust => cfg.lambda,
                _ => 0.0,
            };
            let trials: Vec<&TrialResult> = runs.iter().map(|r| &r[j]).collect();
            PolicySummary::from_trials(p, lambda, &trials)
        })
        .collect();
    Ok(BatchResult {
        kind: cfg.disturbance.kind,
        d0: cfg.disturbance.d0,
        times,
        policies: summaries,
    })
}

/// One heat-map cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub kind: DisturbanceKind,
    pub d0: f64,
    pub lambda: f64,
    pub ratios: Vec<f64>,
    pub failures: usize,
}

impl GridCell {
    pub fn mean_terminal_ratio(&self) -> f64 {
        self.ratios.iter().sum::<f64>() / self.ratios.len() as f64
    }
}

/// Heat-map cells in `kinds × d0 × λ` order, all sharing the trained law and
/// the same trial initial conditions.
pub fn run_grid(
    cfg: &ExperimentConfig,
    trained: &Trained,
    d0_list: &[f64],
    lambda_list: &[f64],
    kinds: &[DisturbanceKind],
) -> Result<Vec<GridCell>> {
    let mut cells = Vec::new();
    for &kind in kinds {
        for &d0 in d0_list {
            for &lambda in lambda_list {
                cells.push((kind, d0, lambda));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |i| (c, i)))
        .collect();
    let results: Vec<Result<TrialResult>> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let (kind, d0, lambda) = cells[c];
            let spec = DisturbanceSpec {
                kind,
                d0,
                channels: cfg.disturbance.channels.clone(),
            };
            let disturbance = make_disturbance(&spec, cfg.m)?;
            let law = trained.law.with_robust(cfg.robust_config(lambda)?);
            let z0 = trial_initial_condition(cfg, &trained.sim.grid, i);
            simulate_closed_loop(cfg, &trained.sim, Some(&law), &disturbance, &z0)
        })
        .collect();
    let mut out: Vec<GridCell> = cells
        .iter()
        .map(|&(kind, d0, lambda)| GridCell {
            kind,
            d0,
            lambda,
            ratios: Vec::with_capacity(cfg.trials),
            failures: 0,
        })
        .collect();
    for (&(c, _), res) in jobs.iter().zip(results) {
        let tr = res?;
        out[c].ratios.push(tr.terminal_ratio);
        out[c].failures += tr.failed as usize;
    }
    Ok(out)
}

/// Grid cells reported by a batch: the optimal and robust policies.
pub fn batch_cells(batch: &BatchResult) -> Vec<GridCell> {
    batch
        .policies
        .iter()
        .filter(|p| p.policy != Policy::Uncontrolled)
        .map(|p| GridCell {
            kind: batch.kind,
            d0: batch.d0,
            lambda: p.lambda,
            ratios: p.ratios.clone(),
            failures: p.failures,
        })
        .collect()
}
