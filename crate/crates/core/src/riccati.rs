//! Reference solvers for the differential and algebraic Riccati equations.
//!
//! These are oracles for the particle filter and the controller tests, not
//! part of the data-driven path.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// `ẋ = Ax + Bu` with output `Cx`, control weight `R` and terminal weight `G`.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub g: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, r: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_dim("A columns", n, a.ncols())?;
        check_dim("B rows", n, b.nrows())?;
        check_dim("C columns", n, c.ncols())?;
        check_dim("R rows", b.ncols(), r.nrows())?;
        check_dim("R columns", b.ncols(), r.ncols())?;
        check_dim("G rows", n, g.nrows())?;
        check_dim("G columns", n, g.ncols())?;
        if !linalg::is_spd(&r) {
            return Err(Error::NotPositiveDefinite { what: "R" });
        }
        if !linalg::is_spd(&g) {
            return Err(Error::NotPositiveDefinite { what: "G" });
        }
        let r_inv = linalg::spd_inverse(&r, 0.0, "R")?;
        Ok(Self { a, b, c, r, g, r_inv })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn q(&self) -> DMatrix<f64> {
        self.c.transpose() * &self.c
    }

    /// `B R⁻¹ Bᵀ`.
    pub fn input_weight(&self) -> DMatrix<f64> {
        &self.b * &self.r_inv * self.b.transpose()
    }

    /// Controllability of (A, B) and observability of (A, C) by the Kalman
    /// rank test with tolerance `1e-9·σ_max`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let rank = kalman_rank(&self.a, &self.b);
        if rank < n {
            return Err(Error::RankTest {
                pair: "A,B",
                rank,
                dim: n,
            });
        }
        let rank = kalman_rank(&self.a.transpose(), &self.c.transpose());
        if rank < n {
            return Err(Error::RankTest {
                pair: "A,C",
                rank,
                dim: n,
            });
        }
        Ok(())
    }
}

/// Rank of `[B, AB, …, Aⁿ⁻¹B]`; `A` is normalized first, which leaves the
/// rank unchanged and keeps the powers bounded.
pub fn kalman_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    if b.ncols() == 0 || n == 0 {
        return 0;
    }
    let scale = a.norm();
    let a_n = if scale > 0.0 { a / scale } else { a.clone() };
    let m = b.ncols();
    let mut k = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        k.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = &a_n * block;
    }
    linalg::numerical_rank(&k, 1e-9)
}

/// `AᵀP + PA − PBR⁻¹BᵀP + Q`, i.e. `−Ṗ`.
pub fn riccati_rhs(sys: &LtiSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    let ap = sys.a.transpose() * p;
    let quad = p * sys.input_weight() * p;
    &ap + ap.transpose() - quad + sys.q()
}

pub fn are_residual(sys: &LtiSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    riccati_rhs(sys, p)
}

fn rk4_riccati(sys: &LtiSystem, p: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let k1 = riccati_rhs(sys, p);
    let k2 = riccati_rhs(sys, &(p + &k1 * (0.5 * h)));
    let k3 = riccati_rhs(sys, &(p + &k2 * (0.5 * h)));
    let k4 = riccati_rhs(sys, &(p + &k3 * h));
    linalg::symmetrize(&(p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)))
}

const ESCAPE_NORM: f64 = 1e150;

/// Integrates `−Ṗ = AᵀP + PA − PBR⁻¹BᵀP + Q` backward from `P(T) = G` and
/// returns `P(0)`.
pub fn solve_dre(sys: &LtiSystem, horizon: f64, dt: f64) -> Result<DMatrix<f64>> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Config(format!("invalid DRE horizon {horizon} / step {dt}")));
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut p = sys.g.clone();
    let mut elapsed = 0.0;
    for k in 0..steps {
        let h = if k + 1 == steps { horizon - elapsed } else { dt };
        p = rk4_riccati(sys, &p, h);
        elapsed += h;
        if !linalg::is_finite(&p) || p.norm() > ESCAPE_NORM {
            return Err(Error::FiniteEscape { t: horizon - elapsed });
        }
    }
    Ok(p)
}

const ARE_MAX_HORIZON: f64 = 1e4;
const ARE_MAX_STEPS: usize = 2_000_000;

/// DRE steps between attempts to hand over to Newton–Kleinman.
const HANDOVER_INTERVAL: usize = 100;

/// Stabilizing ARE solution: backward DRE integration from `G`, handed to
/// Newton–Kleinman once the DRE iterate yields a stabilizing gain (checked
/// every 100 steps) or has converged on its own.
pub fn solve_are(sys: &LtiSystem) -> Result<DMatrix<f64>> {
    let s_norm = sys.input_weight().norm();
    let a_norm = sys.a.norm();
    let q_scale = sys.q().norm().max(1.0);
    let mut p = sys.g.clone();
    let mut elapsed = 0.0;
    let mut steps = 0;
    loop {
        // keeps |λ·dt| ≤ 1 for the linearized flow, inside RK4's stability region
        let h = (1.0 / (2.0 * a_norm + 2.0 * s_norm * p.norm() + 1e-12)).min(0.1);
        let next = rk4_riccati(sys, &p, h);
        elapsed += h;
        steps += 1;
        if !linalg::is_finite(&next) || next.norm() > ESCAPE_NORM {
            return Err(Error::FiniteEscape { t: -elapsed });
        }
        let change = (&next - &p).norm();
        p = next;
        let settled = change < 1e-10 * p.norm().max(1.0) || riccati_rhs(sys, &p).norm() < 1e-6 * q_scale;
        if settled || (steps % HANDOVER_INTERVAL == 0 && stabilizing(sys, &p)) {
            if let Ok(refined) = newton_refine(sys, p.clone(), q_scale) {
                return Ok(refined);
            }
            if settled {
                return Err(Error::NoConvergence { horizon: elapsed });
            }
        }
        if elapsed > ARE_MAX_HORIZON || steps > ARE_MAX_STEPS {
            return Err(Error::NoConvergence { horizon: elapsed });
        }
    }
}

fn stabilizing(sys: &LtiSystem, p: &DMatrix<f64>) -> bool {
    let k = &sys.r_inv * sys.b.transpose() * p;
    linalg::max_real_eigenvalue(&(&sys.a - &sys.b * k)) < 0.0
}

/// Newton–Kleinman iterations until the residual reaches round-off level.
fn newton_refine(sys: &LtiSystem, mut p: DMatrix<f64>, q_scale: f64) -> Result<DMatrix<f64>> {
    let q = sys.q();
    let mut best_p = p.clone();
    let mut best = riccati_rhs(sys, &p).norm();
    let mut stale = 0;
    for _ in 0..60 {
        if best <= 1e-13 * q_scale || stale >= 5 {
            break;
        }
        let k = &sys.r_inv * sys.b.transpose() * &p;
        let a_cl = &sys.a - &sys.b * &k;
        let rhs = &q + k.transpose() * &sys.r * &k;
        p = linalg::symmetrize(&linalg::lyapunov(&a_cl, &rhs)?);
        let res = riccati_rhs(sys, &p).norm();
        if res < best {
            best = res;
            best_p = p.clone();
            stale = 0;
        } else {
            stale += 1;
        }
    }
    if best > 1e-8 * q_scale {
        return Err(Error::NoConvergence { horizon: f64::INFINITY });
    }
    Ok(best_p)
}

/// `K̄ = R⁻¹BᵀP̄`, checked to make `A − BK̄` Hurwitz.
pub fn lqr_gain(sys: &LtiSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("P rows", sys.n(), p.nrows())?;
    let k = &sys.r_inv * sys.b.transpose() * p;
    let max_real = linalg::max_real_eigenvalue(&(&sys.a - &sys.b * &k));
    if !(max_real < 0.0) {
        return Err(Error::NotHurwitz { max_real });
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, g: f64) -> LtiSystem {
        let one = DMatrix::from_element(1, 1, 1.0);
        LtiSystem::new(
            DMatrix::from_element(1, 1, a),
            one.clone(),
            one.clone(),
            one,
            DMatrix::from_element(1, 1, g),
        )
        .unwrap()
    }

    fn diag3() -> LtiSystem {
        let i = DMatrix::identity(3, 3);
        LtiSystem::new(-&i, i.clone(), i.clone(), i.clone(), i).unwrap()
    }

    #[test]
    fn scalar_are_roots() {
        for a in [-1.0f64, 0.0, 1.0] {
            let p = solve_are(&scalar(a, 1.0)).unwrap();
            assert!((p[(0, 0)] - (a + (a * a + 1.0).sqrt())).abs() < 1e-10, "a={a}");
        }
    }

    #[test]
    fn diagonal_are() {
        let p = solve_are(&diag3()).unwrap();
        let expected = DMatrix::identity(3, 3) * (2f64.sqrt() - 1.0);
        assert!((p - expected).amax() < 1e-10);
    }

    #[test]
    fn dre_fixed_point_scalar() {
        for t in [0.5, 3.0, 10.0] {
            let p = solve_dre(&scalar(0.0, 1.0), t, 1e-3).unwrap();
            assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dre_converges_to_are_root() {
        let sys = scalar(0.0, 2.0);
        let mut last = f64::INFINITY;
        for t in [1.0, 2.0, 5.0, 10.0] {
            let err = (solve_dre(&sys, t, 1e-3).unwrap()[(0, 0)] - 1.0).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-8);
        // closed form: P(τ) = coth(τ + atanh(1/2)) for G = 2
        let tau: f64 = 1.0;
        let exact = 1.0 / (tau + 0.5f64.atanh()).tanh();
        let p = solve_dre(&sys, tau, 1e-3).unwrap()[(0, 0)];
        assert!((p - exact).abs() < 1e-10);
    }

    #[test]
    fn dre_started_at_are_solution_stays() {
        let base = LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.3]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let p_bar = solve_are(&base).unwrap();
        let sys = LtiSystem::new(
            base.a.clone(),
            base.b.clone(),
            base.c.clone(),
            base.r.clone(),
            p_bar.clone(),
        )
        .unwrap();
        let p0 = solve_dre(&sys, 5.0, 1e-3).unwrap();
        assert!((p0 - p_bar).norm() < 1e-8);
    }

    #[test]
    fn gains() {
        let sys = scalar(0.0, 1.0);
        let p = solve_are(&sys).unwrap();
        let k = lqr_gain(&sys, &p).unwrap();
        assert!((k[(0, 0)] - 1.0).abs() < 1e-10);
        let sys = diag3();
        let k = lqr_gain(&sys, &solve_are(&sys).unwrap()).unwrap();
        assert!((k - DMatrix::identity(3, 3) * (2f64.sqrt() - 1.0)).amax() < 1e-10);
    }

    #[test]
    fn non_hurwitz_gain_rejected() {
        let sys = scalar(1.0, 1.0);
        let err = lqr_gain(&sys, &DMatrix::from_element(1, 1, 0.5)).unwrap_err();
        assert!(matches!(err, Error::NotHurwitz { .. }));
    }

    #[test]
    fn validation_rank_tests() {
        let i = DMatrix::identity(2, 2);
        let zero_b = LtiSystem::new(
            i.clone(),
            DMatrix::zeros(2, 1),
            i.clone(),
            DMatrix::identity(1, 1),
            i.clone(),
        )
        .unwrap();
        assert!(matches!(zero_b.validate(), Err(Error::RankTest { pair: "A,B", .. })));
        let unobservable = LtiSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::identity(1, 1),
            i.clone(),
        )
        .unwrap();
        assert!(matches!(
            unobservable.validate(),
            Err(Error::RankTest { pair: "A,C", .. })
        ));
        assert!(diag3().validate().is_ok());
    }

    #[test]
    fn rejects_indefinite_weights() {
        let i = DMatrix::identity(1, 1);
        assert!(LtiSystem::new(i.clone(), i.clone(), i.clone(), -&i, i.clone()).is_err());
        assert!(LtiSystem::new(i.clone(), i.clone(), i.clone(), i.clone(), DMatrix::zeros(1, 1)).is_err());
    }
}
