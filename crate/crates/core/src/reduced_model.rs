//! Dynamic mode decomposition with control.
//!
//! Fits `x_{k+1} = A_d x_k + B_d u_k` in a rank-`n` basis `Φ` (orthonormal
//! rows) from snapshot triples, converts it to continuous time and maps
//! between full and reduced coordinates (`x = Φz`, `z ≈ Φᵀx`).

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::pde_sim::{rk4_step, LinearSimulator, Simulator};
use crate::rng::{self, Rng};

/// Column-aligned snapshot triples `(x_k, x_{k+1}, u_k)` sampled every `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub x: DMatrix<f64>,
    pub x_next: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub dt: f64,
}

impl SnapshotData {
    pub fn new(x: DMatrix<f64>, x_next: DMatrix<f64>, u: DMatrix<f64>, dt: f64) -> Result<Self> {
        check_dim("successor columns", x.ncols(), x_next.ncols())?;
        check_dim("successor rows", x.nrows(), x_next.nrows())?;
        check_dim("input columns", x.ncols(), u.ncols())?;
        if !(dt > 0.0) {
            return Err(Error::Config(format!("sampling step must be positive, got {dt}")));
        }
        Ok(Self { x, x_next, u, dt })
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random piecewise-constant inputs, uniform in `[-amplitude, amplitude]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excitation {
    pub amplitude: f64,
    /// Number of steps each draw is held for.
    pub hold: usize,
}

impl Default for Excitation {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            hold: 1,
        }
    }
}

/// `(X, X', U)` columns from one trajectory.
type TrajectoryBlock = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

/// Integrates `n_traj` trajectories of `steps` RK4 steps each. Trajectory
/// `j` draws its initial condition and inputs from its own stream.
pub fn collect_snapshots<S, F>(
    sim: &S,
    n_traj: usize,
    steps: usize,
    dt: f64,
    excitation: Excitation,
    initial: F,
    seed: u64,
) -> Result<SnapshotData>
where
    S: Simulator + ?Sized,
    F: Fn(&mut Rng) -> DVector<f64> + Sync,
{
    if !(dt > 0.0) {
        return Err(Error::Config(format!("sampling step must be positive, got {dt}")));
    }
    let n = sim.state_dim();
    let m = sim.control_dim();
    let hold = excitation.hold.max(1);
    let runs: Vec<Result<TrajectoryBlock>> = (0..n_traj)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(seed, rng::DOMAIN_SNAPSHOT, j as u64);
            let mut z = initial(&mut rng);
            check_dim("initial condition", n, z.len())?;
            let mut xs = DMatrix::zeros(n, steps);
            let mut xn = DMatrix::zeros(n, steps);
            let mut us = DMatrix::zeros(m, steps);
            let mut u = DVector::zeros(m);
            for k in 0..steps {
                if k % hold == 0 {
                    u = DVector::from_fn(m, |_, _| {
                        if excitation.amplitude > 0.0 {
                            rng.random_range(-excitation.amplitude..excitation.amplitude)
                        } else {
                            0.0
                        }
                    });
                }
                let next = rk4_step(sim, &z, &u, dt);
                if !next.iter().all(|v| v.is_finite()) {
                    return Err(Error::BlowUp {
                        last_valid_t: k as f64 * dt,
                    });
                }
                xs.set_column(k, &z);
                xn.set_column(k, &next);
                us.set_column(k, &u);
                z = next;
            }
            Ok((xs, xn, us))
        })
        .collect();
    let total = n_traj * steps;
    let mut x = DMatrix::zeros(n, total);
    let mut x_next = DMatrix::zeros(n, total);
    let mut u = DMatrix::zeros(m, total);
    for (j, run) in runs.into_iter().enumerate() {
        let (xs, xn, us) = run?;
        x.view_mut((0, j * steps), (n, steps)).copy_from(&xs);
        x_next.view_mut((0, j * steps), (n, steps)).copy_from(&xn);
        u.view_mut((0, j * steps), (m, steps)).copy_from(&us);
    }
    SnapshotData::new(x, x_next, u, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomain {
    Discrete,
    Continuous,
}

/// Linear reduced-order model with projection `Φ` (`n × p`, orthonormal rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub dt_fit: f64,
    pub domain: TimeDomain,
}

impl ReducedModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.phi.ncols()
    }

    /// `x = Φz`.
    pub fn reduce(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("full state", self.p(), z.len())?;
        Ok(&self.phi * z)
    }

    /// `z = Φᵀx`.
    pub fn lift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("reduced state", self.n(), x.len())?;
        Ok(self.phi.tr_mul(x))
    }

    /// Simulator of `ẋ = Ax + Bu`; continuous-time models only.
    pub fn simulator(&self) -> Result<LinearSimulator> {
        if self.domain != TimeDomain::Continuous {
            return Err(Error::Config("reduced simulator needs a continuous-time model".into()));
        }
        LinearSimulator::new(self.a.clone(), self.b.clone())
    }

    /// Relative one-step prediction error `‖Xnext − Φᵀ(A_d Φ X + B_d U)‖/‖Xnext‖`
    /// of a discrete-time model on `data`.
    pub fn one_step_error(&self, data: &SnapshotData) -> Result<f64> {
        if self.domain != TimeDomain::Discrete {
            return Err(Error::Config("prediction error needs the discrete-time model".into()));
        }
        check_dim("snapshot state", self.p(), data.x.nrows())?;
        let pred = self.phi.tr_mul(&(&self.a * (&self.phi * &data.x) + &self.b * &data.u));
        Ok((&data.x_next - pred).norm() / data.x_next.norm().max(f64::MIN_POSITIVE))
    }
}

/// Standard DMDc: rank-`(n+m)` SVD of `[X; U]` for the regression and a
/// rank-`n` SVD of `Xnext` for the basis. Returns the discrete-time model.
pub fn fit_dmdc(data: &SnapshotData, n: usize) -> Result<ReducedModel> {
    let p = data.x.nrows();
    let m = data.u.nrows();
    let k = data.len();
    if n == 0 || n > p {
        return Err(Error::Config(format!("reduced dimension {n} must lie in 1..={p}")));
    }
    if k < n + m {
        return Err(Error::Config(format!("need at least n+m={} snapshots, got {k}", n + m)));
    }
    let mut omega = DMatrix::zeros(p + m, k);
    omega.view_mut((0, 0), (p, k)).copy_from(&data.x);
    omega.view_mut((p, 0), (m, k)).copy_from(&data.u);

    let (u_in, s_in, vt_in) = linalg::sorted_svd(&omega);
    let tol_in = 1e-10 * s_in[0];
    let rank_in = s_in.iter().filter(|&&s| s > tol_in).count();
    if rank_in < n {
        return Err(Error::RankDeficient {
            achievable: rank_in,
            requested: n,
        });
    }
    let r_in = rank_in.min(n + m);

    let (u_out, s_out, _) = linalg::sorted_svd(&data.x_next);
    let rank_out = s_out.iter().filter(|&&s| s > 1e-10 * s_out[0]).count();
    if rank_out < n {
        return Err(Error::RankDeficient {
            achievable: rank_out,
            requested: n,
        });
    }
    let basis = u_out.columns(0, n).into_owned();

    let u1 = u_in.view((0, 0), (p, r_in));
    let u2 = u_in.view((p, 0), (m, r_in));
    let v = vt_in.rows(0, r_in).transpose();
    let s_inv = DMatrix::from_diagonal(&s_in.rows(0, r_in).map(|s| 1.0 / s));
    let core = basis.transpose() * &data.x_next * v * s_inv;
    let a = &core * u1.transpose() * &basis;
    let b = core * u2.transpose();
    Ok(ReducedModel {
        a,
        b,
        phi: basis.transpose(),
        dt_fit: data.dt,
        domain: TimeDomain::Discrete,
    })
}

/// `A = log(A_d)/dt`, `B = (∫₀^dt e^{Aτ}dτ)⁻¹ B_d`.
pub fn to_continuous(model: &ReducedModel) -> Result<ReducedModel> {
    if model.domain == TimeDomain::Continuous {
        return Ok(model.clone());
    }
    let dt = model.dt_fit;
    let a = linalg::logm(&model.a)? / dt;
    let w = linalg::exp_integral(&a, dt);
    let b = w.lu().solve(&model.b).ok_or(Error::LogInadmissible {
        re: f64::NAN,
        im: f64::NAN,
    })?;
    Ok(ReducedModel {
        a,
        b,
        phi: model.phi.clone(),
        dt_fit: dt,
        domain: TimeDomain::Continuous,
    })
}

/// Exact zero-order-hold discretization of a continuous-time model.
pub fn to_discrete(model: &ReducedModel) -> ReducedModel {
    if model.domain == TimeDomain::Discrete {
        return model.clone();
    }
    let dt = model.dt_fit;
    ReducedModel {
        a: linalg::expm(&(&model.a * dt)),
        b: linalg::exp_integral(&model.a, dt) * &model.b,
        phi: model.phi.clone(),
        dt_fit: dt,
        domain: TimeDomain::Discrete,
    }
}
