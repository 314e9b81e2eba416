//! Dual ensemble Kalman filter.
//!
//! `N` particles are started at `t = T` from `N(0, S_T)` and integrated
//! backward to `t = 0` by Euler–Maruyama on the reversed clock. Each step
//! has two phases. The ensemble statistics are frozen first, then every
//! particle moves using its own noise stream. This keeps the result
//! independent of how particle updates are scheduled across threads.
//!
//! Linear case, one step of length `h`:
//!
//! ```text
//! Yᵢ ← Yᵢ − h·(A Yᵢ + S Cᵀ·½(C Yᵢ + C n̂)) + √h·B ξᵢ,   ξᵢ ~ N(0, R⁻¹)
//! ```
//!
//! With this sign convention the ensemble covariance follows
//! `dS/dτ = −AS − SAᵀ − SQS + BR⁻¹Bᵀ` in reversed time `τ = T − t`. Its
//! stationary point is the inverse of the stabilizing ARE solution, so
//! `P̄ ≈ S₀⁻¹`.
//!
//! The nonlinear case replaces `A Yᵢ` by `a(Yᵢ) = S(Yᵢ, 0)` and `B ξᵢ` by
//! `S(Yᵢ, ξᵢ) − S(Yᵢ, 0)`. The gain becomes the empirical cross-covariance
//! between the particles and the cost observation `h(Yᵢ)`, normalized by
//! `N − 1`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::pde_sim::Simulator;
use crate::rng::{self, Rng};

/// Weighting of the innovation `h(Yᵢ) + ĥ` in the coupling term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Innovation {
    /// `½(h(Yᵢ) + ĥ)`.
    #[default]
    Averaged,
    /// `h(Yᵢ) + ĥ` without the one-half factor.
    Literal,
}

impl Innovation {
    fn factor(self) -> f64 {
        match self {
            Innovation::Averaged => 0.5,
            Innovation::Literal => 1.0,
        }
    }
}

/// Observation fed to the nonlinear coupling for a running cost `c(x) = |Cx|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostCoupling {
    /// Vector observation `h(x) = Cx`, so that `c = |h|²`. Reduces to the
    /// linear filter when the dynamics are linear.
    #[default]
    Observation,
    /// Scalar observation `h(x) = c(x)`.
    Scalar,
}

/// Running cost `c(x) = |Cx|²` and how it couples the particles.
#[derive(Debug, Clone)]
pub struct RunningCost {
    pub c: DMatrix<f64>,
    pub coupling: CostCoupling,
}

impl RunningCost {
    pub fn quadratic(c: DMatrix<f64>) -> Self {
        Self {
            c,
            coupling: CostCoupling::Observation,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::quadratic(DMatrix::identity(n, n))
    }

    pub fn with_coupling(mut self, coupling: CostCoupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.c * x).norm_squared()
    }

    fn observe(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.coupling {
            CostCoupling::Observation => &self.c * x,
            CostCoupling::Scalar => DVector::from_element(1, self.value(x)),
        }
    }

    fn obs_dim(&self) -> usize {
        match self.coupling {
            CostCoupling::Observation => self.c.nrows(),
            CostCoupling::Scalar => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnkfConfig {
    pub particles: usize,
    pub horizon: f64,
    pub dt: f64,
    /// Terminal covariance `S_T`; the natural choice is `G⁻¹`.
    pub terminal_cov: DMatrix<f64>,
    pub seed: u64,
    pub innovation: Innovation,
    pub jitter: f64,
}

impl EnkfConfig {
    pub fn new(particles: usize, horizon: f64, dt: f64, terminal_cov: DMatrix<f64>, seed: u64) -> Self {
        Self {
            particles,
            horizon,
            dt,
            terminal_cov,
            seed,
            innovation: Innovation::Averaged,
            jitter: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config(format!(
                "need at least 2 particles, got {}",
                self.particles
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt < self.horizon) {
            return Err(Error::Config(format!(
                "step must satisfy 0 < dt < T, got dt={} T={}",
                self.dt, self.horizon
            )));
        }
        if !linalg::is_spd(&self.terminal_cov) {
            return Err(Error::NotPositiveDefinite {
                what: "terminal covariance S_T",
            });
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.terminal_cov.nrows()
    }
}

/// Particles stored column-wise (`n × N`) at time `t`, each with its own
/// noise stream.
#[derive(Debug, Clone)]
pub struct Ensemble {
    particles: DMatrix<f64>,
    t: f64,
    noise: Vec<Rng>,
}

impl Ensemble {
    pub fn from_particles(particles: DMatrix<f64>, t: f64, seed: u64) -> Self {
        let noise = (0..particles.ncols())
            .map(|i| rng::stream(seed, rng::DOMAIN_PARTICLE, i as u64))
            .collect();
        Self { particles, t, noise }
    }

    pub fn particles(&self) -> &DMatrix<f64> {
        &self.particles
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state_dim(&self) -> usize {
        self.particles.nrows()
    }

    pub fn size(&self) -> usize {
        self.particles.ncols()
    }

    fn check_finite(&self) -> Result<()> {
        if linalg::is_finite(&self.particles) {
            Ok(())
        } else {
            Err(Error::Divergence { t: self.t })
        }
    }

    /// Standard normal draws, one `dim`-vector per particle from its own stream.
    fn draw(&mut self, dim: usize) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(dim, self.size());
        for (i, rng) in self.noise.iter_mut().enumerate() {
            for k in 0..dim {
                w[(k, i)] = StandardNormal.sample(rng);
            }
        }
        w
    }
}

/// `N` draws from `N(0, S_T)` via the Cholesky factor; time set to `T`.
pub fn init_ensemble(cfg: &EnkfConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let n = cfg.state_dim();
    let chol = cfg.terminal_cov.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        what: "terminal covariance S_T",
    })?;
    let mut e = Ensemble::from_particles(DMatrix::zeros(n, cfg.particles), cfg.horizon, cfg.seed);
    let w = e.draw(n);
    e.particles = chol.l() * w;
    Ok(e)
}

/// Ensemble mean and the `1/N`-normalized covariance.
pub fn empirical_stats(e: &Ensemble) -> (DVector<f64>, DMatrix<f64>) {
    let n_particles = e.size() as f64;
    let mean = e.particles.column_mean();
    let dev = deviations(&e.particles, &mean);
    let cov = linalg::symmetrize(&(&dev * dev.transpose())) / n_particles;
    (mean, cov)
}

fn deviations(y: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut dev = y.clone();
    for mut col in dev.column_iter_mut() {
        col -= mean;
    }
    dev
}

/// Linear dynamics `ẋ = Ax + Bu` with the cost output `C` and weight `R`.
#[derive(Debug, Clone)]
pub struct LinearDual {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// `B·L` with `L Lᵀ = R⁻¹`.
    noise_map: DMatrix<f64>,
}

impl LinearDual {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_dim("A columns", n, a.ncols())?;
        check_dim("B rows", n, b.nrows())?;
        check_dim("C columns", n, c.ncols())?;
        check_dim("R size", b.ncols(), r.nrows())?;
        let noise_map = &b * noise_factor(r)?;
        Ok(Self { a, b, c, noise_map })
    }
}

/// Lower Cholesky factor of `R⁻¹`.
fn noise_factor(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if r.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if !linalg::is_spd(r) {
        return Err(Error::NotPositiveDefinite { what: "R" });
    }
    let r_inv = linalg::spd_inverse(r, 0.0, "R")?;
    Ok(r_inv.cholesky().ok_or(Error::NotPositiveDefinite { what: "R" })?.l())
}

/// One backward Euler–Maruyama step of the linear particle system.
pub fn step_linear(e: &mut Ensemble, model: &LinearDual, dt: f64, innovation: Innovation) -> Result<()> {
    check_dim("ensemble state", model.a.nrows(), e.state_dim())?;
    if e.t - dt < -1e-12 {
        return Err(Error::Config(format!("step {dt} would pass t=0 from t={}", e.t)));
    }
    let (mean, cov) = empirical_stats(e);
    let gain = &cov * model.c.transpose();
    let mut shifted = e.particles.clone();
    for mut col in shifted.column_iter_mut() {
        col += &mean;
    }
    let innov = (&model.c * shifted) * innovation.factor();
    let w = e.draw(model.noise_map.ncols());
    let drift = &model.a * &e.particles + gain * innov;
    e.particles -= drift * dt;
    e.particles += (&model.noise_map * w) * dt.sqrt();
    e.t -= dt;
    e.check_finite()
}

/// One backward Euler–Maruyama step of the nonlinear particle system; the
/// dynamics are reached only through simulator evaluations.
pub fn step_nonlinear<S: Simulator + ?Sized>(
    e: &mut Ensemble,
    sim: &S,
    cost: &RunningCost,
    r: &DMatrix<f64>,
    dt: f64,
    innovation: Innovation,
) -> Result<()> {
    let factor = noise_factor(r)?;
    step_nonlinear_with(e, sim, cost, &factor, dt, innovation)
}

fn step_nonlinear_with<S: Simulator + ?Sized>(
    e: &mut Ensemble,
    sim: &S,
    cost: &RunningCost,
    noise_factor: &DMatrix<f64>,
    dt: f64,
    innovation: Innovation,
) -> Result<()> {
    let n = e.state_dim();
    check_dim("ensemble state", sim.state_dim(), n)?;
    check_dim("cost columns", n, cost.c.ncols())?;
    if e.t - dt < -1e-12 {
        return Err(Error::Config(format!("step {dt} would pass t=0 from t={}", e.t)));
    }
    let n_particles = e.size();
    let m = sim.control_dim();
    let sqrt_dt = dt.sqrt();

    // phase 1: observations and frozen statistics
    let obs_dim = cost.obs_dim();
    let mut obs = DMatrix::zeros(obs_dim, n_particles);
    for (i, col) in e.particles.column_iter().enumerate() {
        obs.set_column(i, &cost.observe(&col.into_owned()));
    }
    let mean = e.particles.column_mean();
    let obs_mean = obs.column_mean();
    let dev = deviations(&e.particles, &mean);
    let obs_dev = deviations(&obs, &obs_mean);
    let gain = (dev * obs_dev.transpose()) / (n_particles as f64 - 1.0);
    let mut shifted_obs = obs;
    for mut col in shifted_obs.column_iter_mut() {
        col += &obs_mean;
    }
    let coupling = gain * shifted_obs * innovation.factor();

    // phase 2: independent particle moves
    let xi = noise_factor * e.draw(m) * sqrt_dt;
    let zero = DVector::zeros(m);
    let moves: Vec<DVector<f64>> = (0..n_particles)
        .into_par_iter()
        .map(|i| {
            let y = e.particles.column(i).into_owned();
            let drift = sim.eval(&y, &zero);
            let kicked = sim.eval(&y, &xi.column(i).into_owned());
            let noise = kicked - &drift;
            noise - (drift + coupling.column(i)) * dt
        })
        .collect();
    for (i, mv) in moves.into_iter().enumerate() {
        let mut col = e.particles.column_mut(i);
        col += mv;
    }
    e.t -= dt;
    e.check_finite()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    Linear,
    Nonlinear,
}

/// Learned gain: `P̄ = S₀⁻¹` (linear) or `∇φ(x) = S₀⁻¹x` (nonlinear).
#[derive(Debug, Clone, PartialEq)]
pub struct GainApprox {
    pub s0: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub mode: GainMode,
}

impl GainApprox {
    pub fn from_covariance(s0: DMatrix<f64>, mode: GainMode, jitter: f64) -> Result<Self> {
        let dim = s0.nrows();
        let sym = linalg::symmetrize(&s0);
        let eig = sym.clone().symmetric_eigenvalues();
        let max = eig.iter().cloned().fold(0.0, f64::max);
        let rank = eig.iter().filter(|&&v| v > 1e-12 * max).count();
        if max <= 0.0 || rank < dim {
            return Err(Error::SingularCovariance { rank, dim });
        }
        let p = linalg::spd_inverse(&sym, jitter, "terminal ensemble covariance")
            .map_err(|_| Error::SingularCovariance { rank, dim })?;
        Ok(Self { s0: sym, p, mode })
    }

    /// Wraps a known value matrix, e.g. an exact ARE solution.
    pub fn from_value_matrix(p: DMatrix<f64>, mode: GainMode) -> Result<Self> {
        let p = linalg::symmetrize(&p);
        let s0 = linalg::spd_inverse(&p, 0.0, "value matrix")?;
        Ok(Self { s0, p, mode })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `P̄x`, equivalently `∇φ(x)`.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x
    }
}

fn step_schedule(cfg: &EnkfConfig) -> Vec<f64> {
    let steps = ((cfg.horizon / cfg.dt) - 1e-9).ceil() as usize;
    let mut out = vec![cfg.dt; steps];
    let used = cfg.dt * (steps - 1) as f64;
    out[steps - 1] = cfg.horizon - used;
    out
}

/// Runs the linear filter from `T` to `0`.
pub fn run_dual_enkf_linear(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    cfg: &EnkfConfig,
) -> Result<GainApprox> {
    let model = LinearDual::new(a.clone(), b.clone(), c.clone(), r)?;
    check_dim("terminal covariance", a.nrows(), cfg.state_dim())?;
    let mut e = init_ensemble(cfg)?;
    for h in step_schedule(cfg) {
        step_linear(&mut e, &model, h, cfg.innovation)?;
    }
    e.t = 0.0;
    let (_, s0) = empirical_stats(&e);
    GainApprox::from_covariance(s0, GainMode::Linear, cfg.jitter)
}

/// Runs the nonlinear filter from `T` to `0` using only simulator calls.
pub fn run_dual_enkf_nonlinear<S: Simulator + ?Sized>(
    sim: &S,
    cost: &RunningCost,
    r: &DMatrix<f64>,
    cfg: &EnkfConfig,
) -> Result<GainApprox> {
    check_dim("terminal covariance", sim.state_dim(), cfg.state_dim())?;
    check_dim("R size", sim.control_dim(), r.nrows())?;
    let factor = noise_factor(r)?;
    let mut e = init_ensemble(cfg)?;
    for h in step_schedule(cfg) {
        step_nonlinear_with(&mut e, sim, cost, &factor, h, cfg.innovation)?;
    }
    e.t = 0.0;
    let (_, s0) = empirical_stats(&e);
    GainApprox::from_covariance(s0, GainMode::Nonlinear, cfg.jitter)
}
