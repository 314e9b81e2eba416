//! Finite-difference heat and Burgers simulators in control-affine form
//! `dz/dt = a(z) + B·u`, plus RK4 time stepping and grid utilities.
//!
//! Grid points sit at cell centers `y_i = (i + ½)·dy`, `dy = L/p`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;

/// Field values on the grid at one instant.
pub type PdeState = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    p: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(p: usize, length: f64) -> Result<Self> {
        if p < 3 {
            return Err(Error::Config(format!("grid needs p >= 3 points, got {p}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { p, length })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dy(&self) -> f64 {
        self.length / self.p as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dy()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.p).map(|i| self.point(i))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> PdeState {
        DVector::from_iterator(self.p, self.points().map(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    /// Homogeneous Dirichlet through zero ghost values.
    Dirichlet,
}

/// Discretized indicator functions of `m` equal cells of `[0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBasis {
    matrix: DMatrix<f64>,
}

impl ControlBasis {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn m(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("control vector", self.m(), u.len())?;
        Ok(&self.matrix * u)
    }
}

pub fn build_control_matrix(grid: &GridSpec, m: usize) -> Result<ControlBasis> {
    let p = grid.p();
    if m == 0 || m > p {
        return Err(Error::InvalidBasis { m, p });
    }
    let mut matrix = DMatrix::zeros(p, m);
    for i in 0..p {
        // floor(y_i·m/L) in exact integer arithmetic
        let j = ((2 * i + 1) * m) / (2 * p);
        matrix[(i, j)] = 1.0;
    }
    Ok(ControlBasis { matrix })
}

#[inline]
fn neighbours(z: &[f64], i: usize, bc: Boundary) -> (f64, f64) {
    let p = z.len();
    match bc {
        Boundary::Periodic => (z[(i + p - 1) % p], z[(i + 1) % p]),
        Boundary::Dirichlet => (
            if i == 0 { 0.0 } else { z[i - 1] },
            if i + 1 == p { 0.0 } else { z[i + 1] },
        ),
    }
}

fn add_control(out: &mut DVector<f64>, u: &DVector<f64>, basis: &ControlBasis) -> Result<()> {
    check_dim("control vector", basis.m(), u.len())?;
    out.gemv(1.0, basis.matrix(), u, 1.0);
    Ok(())
}

/// `ν·D₂z + B·u`.
pub fn heat_rhs(
    z: &PdeState,
    u: &DVector<f64>,
    nu: f64,
    grid: &GridSpec,
    basis: &ControlBasis,
    bc: Boundary,
) -> Result<PdeState> {
    check_dim("heat state", grid.p(), z.len())?;
    check_dim("control basis rows", grid.p(), basis.matrix().nrows())?;
    let zs = z.as_slice();
    let c = nu / (grid.dy() * grid.dy());
    let mut out = DVector::from_fn(grid.p(), |i, _| {
        let (l, r) = neighbours(zs, i, bc);
        c * (l - 2.0 * zs[i] + r)
    });
    add_control(&mut out, u, basis)?;
    Ok(out)
}

/// `−z⊙D₁z + ν·D₂z + B·u` with central differences.
pub fn burgers_rhs(
    z: &PdeState,
    u: &DVector<f64>,
    nu: f64,
    grid: &GridSpec,
    basis: &ControlBasis,
    bc: Boundary,
) -> Result<PdeState> {
    check_dim("burgers state", grid.p(), z.len())?;
    check_dim("control basis rows", grid.p(), basis.matrix().nrows())?;
    let zs = z.as_slice();
    let dy = grid.dy();
    let c2 = nu / (dy * dy);
    let c1 = 0.5 / dy;
    let mut out = DVector::from_fn(grid.p(), |i, _| {
        let (l, r) = neighbours(zs, i, bc);
        -zs[i] * c1 * (r - l) + c2 * (l - 2.0 * zs[i] + r)
    });
    add_control(&mut out, u, basis)?;
    Ok(out)
}

/// Black-box access to `S(x, u) = a(x) + b(x)·u`.
pub trait Simulator: Send + Sync {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    /// Panics on dimension mismatch; callers validate shapes up front.
    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// `b(x)` when the simulator discloses it, `None` for pure black boxes.
    fn input_map(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdeKind {
    Heat,
    Burgers,
}

impl std::fmt::Display for PdeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PdeKind::Heat => "heat",
            PdeKind::Burgers => "burgers",
        })
    }
}

#[derive(Debug, Clone)]
pub struct PdeSimulator {
    pub kind: PdeKind,
    pub nu: f64,
    pub grid: GridSpec,
    pub basis: ControlBasis,
    pub boundary: Boundary,
    pub disclose_input: bool,
}

impl PdeSimulator {
    pub fn new(kind: PdeKind, nu: f64, grid: GridSpec, m: usize, boundary: Boundary) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self {
            kind,
            nu,
            grid,
            basis: build_control_matrix(&grid, m)?,
            boundary,
            disclose_input: true,
        })
    }

    pub fn hidden_input(mut self) -> Self {
        self.disclose_input = false;
        self
    }

    pub fn rhs(&self, z: &PdeState, u: &DVector<f64>) -> Result<PdeState> {
        match self.kind {
            PdeKind::Heat => heat_rhs(z, u, self.nu, &self.grid, &self.basis, self.boundary),
            PdeKind::Burgers => burgers_rhs(z, u, self.nu, &self.grid, &self.basis, self.boundary),
        }
    }
}

impl Simulator for PdeSimulator {
    fn state_dim(&self) -> usize {
        self.grid.p()
    }

    fn control_dim(&self) -> usize {
        self.basis.m()
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.rhs(x, u).expect("simulator called with mismatched dimensions")
    }

    fn input_map(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.disclose_input.then(|| self.basis.matrix().clone())
    }
}

/// `S(x, u) = A x + B u`.
#[derive(Debug, Clone)]
pub struct LinearSimulator {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub disclose_input: bool,
}

impl LinearSimulator {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_dim("A columns", a.nrows(), a.ncols())?;
        check_dim("B rows", a.nrows(), b.nrows())?;
        Ok(Self {
            a,
            b,
            disclose_input: true,
        })
    }

    pub fn hidden_input(mut self) -> Self {
        self.disclose_input = false;
        self
    }
}

impl Simulator for LinearSimulator {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    fn input_map(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.disclose_input.then(|| self.b.clone())
    }
}

/// Wraps a closure as a simulator; input map never disclosed.
pub struct FnSimulator<F> {
    n: usize,
    m: usize,
    f: F,
}

impl<F> FnSimulator<F>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync,
{
    pub fn new(n: usize, m: usize, f: F) -> Self {
        Self { n, m, f }
    }
}

impl<F> Simulator for FnSimulator<F>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.n
    }

    fn control_dim(&self) -> usize {
        self.m
    }

    fn eval(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(x, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }
}

/// One classical RK4 step of `ẋ = S(x, u(t))`; `h` may be negative.
pub fn rk4_step_with<S, U>(sim: &S, x: &DVector<f64>, t: f64, h: f64, u: U) -> DVector<f64>
where
    S: Simulator + ?Sized,
    U: Fn(f64) -> DVector<f64>,
{
    let k1 = sim.eval(x, &u(t));
    let k2 = sim.eval(&(x + &k1 * (0.5 * h)), &u(t + 0.5 * h));
    let k3 = sim.eval(&(x + &k2 * (0.5 * h)), &u(t + 0.5 * h));
    let k4 = sim.eval(&(x + &k3 * h), &u(t + h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// RK4 step with the input held constant over the step.
pub fn rk4_step<S: Simulator + ?Sized>(sim: &S, x: &DVector<f64>, u: &DVector<f64>, h: f64) -> DVector<f64> {
    rk4_step_with(sim, x, 0.0, h, |_| u.clone())
}

/// Integrates `ẋ = S(x, u(t))` from `t0` to `t1`. Backward integration
/// expects `t1 < t0` and steps with negated increments; the final step is
/// shortened so the endpoint is exactly `t1`.
pub fn integrate<S, U>(
    sim: &S,
    x0: &DVector<f64>,
    u_fn: U,
    t0: f64,
    t1: f64,
    dt: f64,
    direction: Direction,
) -> Result<Trajectory>
where
    S: Simulator + ?Sized,
    U: Fn(f64) -> DVector<f64>,
{
    check_dim("initial state", sim.state_dim(), x0.len())?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let sign = match direction {
        Direction::Forward if t1 >= t0 => 1.0,
        Direction::Backward if t1 <= t0 => -1.0,
        _ => {
            return Err(Error::Config(format!(
                "interval [{t0}, {t1}] inconsistent with {direction:?} integration"
            )))
        }
    };
    let span = (t1 - t0).abs();
    let steps = ((span / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..steps {
        let t = t0 + sign * dt * k as f64;
        let t_next = if k + 1 == steps {
            t1
        } else {
            t0 + sign * dt * (k + 1) as f64
        };
        let next = rk4_step_with(sim, &x, t, t_next - t, &u_fn);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { last_valid_t: t });
        }
        x = next;
        times.push(t_next);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

/// `α·sech((y − L/2)/β)` on the grid.
pub fn sech_profile(grid: &GridSpec, alpha: f64, beta: f64) -> PdeState {
    let center = 0.5 * grid.length();
    grid.sample(|y| alpha / ((y - center) / beta).cosh())
}

/// Draws `α ~ U(0.9, 1.1)`, `β ~ U(0.04, 0.06)` and samples the sech pulse.
pub fn sample_initial_condition(rng: &mut Rng, grid: &GridSpec) -> PdeState {
    let alpha = rng.random_range(0.9..1.1);
    let beta = rng.random_range(0.04..0.06);
    sech_profile(grid, alpha, beta)
}

/// Rectangle-rule `(∫ z² dy)^{1/2}`.
pub fn l2_norm(z: &PdeState, grid: &GridSpec) -> f64 {
    (z.norm_squared() * grid.dy()).sqrt()
}

/// Smooth periodic test field `sin(2πy/L)`.
pub fn sine_field(grid: &GridSpec) -> PdeState {
    let k = 2.0 * PI / grid.length();
    grid.sample(|y| (k * y).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn grid(p: usize) -> GridSpec {
        GridSpec::new(p, 1.0).unwrap()
    }

    #[test]
    fn control_matrix_small_partition() {
        let b = build_control_matrix(&grid(4), 2).unwrap();
        let expected = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(b.matrix(), &expected);
    }

    #[test]
    fn control_matrix_single_column_is_ones() {
        let b = build_control_matrix(&grid(100), 1).unwrap();
        assert!(b.matrix().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn control_matrix_128_by_10_matches_enumeration() {
        let g = grid(128);
        let b = build_control_matrix(&g, 10).unwrap();
        // oracle: count cell centers inside each half-open interval
        for j in 0..10 {
            let lo = j as f64 / 10.0;
            let hi = (j + 1) as f64 / 10.0;
            let count = g.points().filter(|&y| y >= lo && y < hi).count();
            let col_sum: f64 = b.matrix().column(j).sum();
            assert_eq!(col_sum as usize, count, "column {j}");
        }
        for i in 0..128 {
            assert_eq!(b.matrix().row(i).sum(), 1.0);
        }
        let sizes: Vec<usize> = (0..10).map(|j| b.matrix().column(j).sum() as usize).collect();
        assert_eq!(sizes, vec![13, 13, 12, 13, 13, 13, 13, 12, 13, 13]);
    }

    #[test]
    fn control_matrix_rejects_too_many_cells() {
        assert!(matches!(
            build_control_matrix(&grid(4), 5),
            Err(Error::InvalidBasis { m: 5, p: 4 })
        ));
        assert!(build_control_matrix(&grid(4), 0).is_err());
    }

    #[test]
    fn heat_rhs_zero_and_constant() {
        let g = grid(16);
        let b = build_control_matrix(&g, 4).unwrap();
        let u = DVector::zeros(4);
        let zero = heat_rhs(&DVector::zeros(16), &u, 0.1, &g, &b, Boundary::Periodic).unwrap();
        assert_eq!(zero.norm(), 0.0);
        let c = heat_rhs(&DVector::from_element(16, 3.5), &u, 0.1, &g, &b, Boundary::Periodic).unwrap();
        assert_eq!(c.norm(), 0.0);
    }

    #[test]
    fn heat_rhs_delta_stencil() {
        let g = grid(10);
        let b = build_control_matrix(&g, 2).unwrap();
        let inv_dy2 = 1.0 / (g.dy() * g.dy());
        for k in [0, 4, 9] {
            let mut z = DVector::zeros(10);
            z[k] = 1.0;
            let out = heat_rhs(&z, &DVector::zeros(2), 1.0, &g, &b, Boundary::Periodic).unwrap();
            let mut expected = DVector::zeros(10);
            expected[(k + 9) % 10] = inv_dy2;
            expected[k] = -2.0 * inv_dy2;
            expected[(k + 1) % 10] = inv_dy2;
            assert!((out - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn heat_rhs_dirichlet_delta_at_edge() {
        let g = grid(5);
        let b = build_control_matrix(&g, 1).unwrap();
        let mut z = DVector::zeros(5);
        z[0] = 1.0;
        let out = heat_rhs(&z, &DVector::zeros(1), 1.0, &g, &b, Boundary::Dirichlet).unwrap();
        let s = 1.0 / (g.dy() * g.dy());
        assert!((out[0] + 2.0 * s).abs() < 1e-9);
        assert!((out[1] - s).abs() < 1e-9);
        assert_eq!(out[4], 0.0);
    }

    #[test]
    fn rhs_dimension_mismatch() {
        let g = grid(8);
        let b = build_control_matrix(&g, 2).unwrap();
        assert!(matches!(
            burgers_rhs(&DVector::zeros(7), &DVector::zeros(2), 0.1, &g, &b, Boundary::Periodic),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(heat_rhs(&DVector::zeros(8), &DVector::zeros(3), 0.1, &g, &b, Boundary::Periodic).is_err());
    }

    #[test]
    fn burgers_rhs_annihilates_constants() {
        let g = grid(32);
        let b = build_control_matrix(&g, 4).unwrap();
        let out = burgers_rhs(
            &DVector::from_element(32, -0.7),
            &DVector::zeros(4),
            0.01,
            &g,
            &b,
            Boundary::Periodic,
        )
        .unwrap();
        assert!(out.norm() < 1e-12);
        let zero = burgers_rhs(
            &DVector::zeros(32),
            &DVector::zeros(4),
            0.01,
            &g,
            &b,
            Boundary::Periodic,
        )
        .unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    fn burgers_error(p: usize, nu: f64) -> f64 {
        let g = grid(p);
        let b = build_control_matrix(&g, 1).unwrap();
        let z = sine_field(&g);
        let out = burgers_rhs(&z, &DVector::zeros(1), nu, &g, &b, Boundary::Periodic).unwrap();
        let k = 2.0 * PI;
        let exact = g.sample(|y| -(k * y).sin() * k * (k * y).cos() - nu * k * k * (k * y).sin());
        (out - exact).amax()
    }

    #[test]
    fn burgers_rhs_matches_analytic_derivative() {
        let err = burgers_error(256, 0.01);
        // leading truncation terms: k³dy²/6 (advection) + ν k⁴ dy²/12
        assert!(err < 4e-3, "err {err}");
    }

    #[test]
    fn burgers_rhs_second_order_in_space() {
        let e1 = burgers_error(64, 0.01);
        let e2 = burgers_error(128, 0.01);
        let e3 = burgers_error(256, 0.01);
        for ratio in [e1 / e2, e2 / e3] {
            assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn integrate_constant_when_rhs_zero() {
        let sim = FnSimulator::new(3, 1, |x: &DVector<f64>, _u: &DVector<f64>| DVector::zeros(x.len()));
        let x0 = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let traj = integrate(&sim, &x0, |_| DVector::zeros(1), 0.0, 1.0, 0.1, Direction::Forward).unwrap();
        assert!(traj.states.iter().all(|s| s == &x0));
        assert_eq!(traj.times.first(), Some(&0.0));
        assert_eq!(traj.times.last(), Some(&1.0));
    }

    #[test]
    fn integrate_scalar_decay() {
        let sim = FnSimulator::new(1, 0, |x: &DVector<f64>, _u: &DVector<f64>| -x);
        let traj = integrate(
            &sim,
            &DVector::from_element(1, 1.0),
            |_| DVector::zeros(0),
            0.0,
            1.0,
            1e-3,
            Direction::Forward,
        )
        .unwrap();
        assert!((traj.last()[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(traj.times.len(), 1001);
    }

    #[test]
    fn integrate_endpoint_exact_with_ragged_step() {
        let sim = FnSimulator::new(1, 0, |x: &DVector<f64>, _u: &DVector<f64>| -x);
        let traj = integrate(
            &sim,
            &DVector::from_element(1, 1.0),
            |_| DVector::zeros(0),
            0.0,
            0.35,
            0.1,
            Direction::Forward,
        )
        .unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(*traj.times.last().unwrap(), 0.35);
        assert!((traj.last()[0] - (-0.35f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn integrate_rejects_inconsistent_direction() {
        let sim = FnSimulator::new(1, 0, |x: &DVector<f64>, _u: &DVector<f64>| -x);
        let x0 = DVector::from_element(1, 1.0);
        assert!(integrate(&sim, &x0, |_| DVector::zeros(0), 0.0, 1.0, 0.1, Direction::Backward).is_err());
        assert!(integrate(&sim, &x0, |_| DVector::zeros(0), 1.0, 0.0, 0.1, Direction::Forward).is_err());
        assert!(integrate(&sim, &x0, |_| DVector::zeros(0), 0.0, 1.0, 0.0, Direction::Forward).is_err());
    }

    #[test]
    fn integrate_reports_blow_up() {
        let sim = FnSimulator::new(1, 0, |x: &DVector<f64>, _u: &DVector<f64>| x.map(|v| v * v * v));
        let err = integrate(
            &sim,
            &DVector::from_element(1, 10.0),
            |_| DVector::zeros(0),
            0.0,
            10.0,
            0.1,
            Direction::Forward,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BlowUp { last_valid_t } if (0.0..10.0).contains(&last_valid_t)));
    }

    #[test]
    fn heat_round_trip_backward_forward() {
        let g = grid(100);
        let sim = PdeSimulator::new(PdeKind::Heat, 0.002, g, 8, Boundary::Periodic).unwrap();
        let x0 = sine_field(&g) + g.sample(|y| 0.3 * (4.0 * PI * y).cos());
        let u = |_t: f64| DVector::zeros(8);
        let back = integrate(&sim, &x0, u, 0.1, 0.0, 1e-3, Direction::Backward).unwrap();
        let fwd = integrate(&sim, back.last(), u, 0.0, 0.1, 1e-3, Direction::Forward).unwrap();
        let rel = (fwd.last() - &x0).norm() / x0.norm();
        assert!(rel < 1e-6, "relative round-trip error {rel}");
    }

    #[test]
    fn uncontrolled_heat_dissipates() {
        let g = grid(100);
        let sim = PdeSimulator::new(PdeKind::Heat, 0.002, g, 8, Boundary::Periodic).unwrap();
        for trial in 0..100 {
            let mut r = rng::stream(11, rng::DOMAIN_TRIAL, trial);
            let z0 = sample_initial_condition(&mut r, &g);
            let traj = integrate(&sim, &z0, |_| DVector::zeros(8), 0.0, 0.1, 1e-3, Direction::Forward).unwrap();
            let norms: Vec<f64> = traj.states.iter().map(|z| l2_norm(z, &g)).collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0]), "trial {trial}");
        }
    }

    #[test]
    fn initial_condition_peak_and_determinism() {
        let g = GridSpec::new(101, 1.0).unwrap();
        let z = sech_profile(&g, 1.0, 0.05);
        assert!((z[50] - 1.0).abs() < 1e-15);
        assert_eq!(z.imax(), 50);
        let mut a = rng::stream(3, rng::DOMAIN_TRIAL, 0);
        let mut b = rng::stream(3, rng::DOMAIN_TRIAL, 0);
        assert_eq!(
            sample_initial_condition(&mut a, &g),
            sample_initial_condition(&mut b, &g)
        );
    }

    #[test]
    fn initial_conditions_bounded_and_symmetric() {
        let g = grid(100);
        for i in 0..100 {
            let mut r = rng::stream(5, rng::DOMAIN_TRIAL, i);
            let z = sample_initial_condition(&mut r, &g);
            assert!(z.iter().all(|&v| v > 0.0 && v <= 1.1));
            for k in 0..50 {
                assert!((z[k] - z[99 - k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l2_norm_examples() {
        let g = grid(256);
        assert_eq!(l2_norm(&DVector::zeros(256), &g), 0.0);
        assert!((l2_norm(&DVector::from_element(256, 1.0), &g) - 1.0).abs() < 1e-14);
        assert!((l2_norm(&sine_field(&g), &g) - 0.5f64.sqrt()).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn simulators_are_affine_in_control(
            seed in 0u64..1000,
            alpha in -2.0f64..2.0,
            beta in -2.0f64..2.0,
            burgers in any::<bool>(),
        ) {
            use rand_distr::{Distribution, StandardNormal};
            let g = grid(24);
            let kind = if burgers { PdeKind::Burgers } else { PdeKind::Heat };
            let sim = PdeSimulator::new(kind, 0.01, g, 5, Boundary::Periodic).unwrap();
            let mut r = rng::stream(seed, 99, 0);
            let mut draw = |n: usize| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
            let x = draw(24);
            let u1 = draw(5);
            let u2 = draw(5);
            let s0 = sim.eval(&x, &DVector::zeros(5));
            let lhs = sim.eval(&x, &(&u1 * alpha + &u2 * beta)) - &s0;
            let rhs = (sim.eval(&x, &u1) - &s0) * alpha + (sim.eval(&x, &u2) - &s0) * beta;
            prop_assert!((lhs - rhs).norm() <= 1e-10);
        }
    }
}
