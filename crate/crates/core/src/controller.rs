//! Robust feedback `u = ū + u_d`.
//!
//! `ū` minimizes the Hamiltonian `H(x,u) = gᵀS(x,u) + ½(|Cx|² + uᵀRu)` with
//! `g = P̄x` (or `∇φ(x)`). `u_d = −λ·B†g / max(|g|, r)` is the Lyapunov
//! redesign term that dominates matched disturbances bounded by `λ`.
//!
//! Both terms can be computed from a disclosed input map or from simulator
//! calls alone. For control-affine simulators the two routes agree up to
//! rounding.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dual_enkf::GainApprox;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::pde_sim::{LinearSimulator, Simulator};
use crate::reduced_model::{ReducedModel, TimeDomain};

/// Cost `∫ |Cx|² + uᵀRu dt + x(T)ᵀGx(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalControlWeights {
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl OptimalControlWeights {
    pub fn new(c: DMatrix<f64>, r: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        let n = c.ncols();
        check_dim("G size", n, g.nrows())?;
        if !linalg::is_spd(&r) {
            return Err(Error::NotPositiveDefinite { what: "R" });
        }
        if !linalg::is_spd(&g) {
            return Err(Error::NotPositiveDefinite { what: "G" });
        }
        Ok(Self { c, r, g })
    }

    /// `Q = G = R = I` with `r_scale·I` for `R`.
    pub fn identity(n: usize, m: usize, r_scale: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(n, n),
            DMatrix::identity(m, m) * r_scale,
            DMatrix::identity(n, n),
        )
    }

    pub fn n(&self) -> usize {
        self.c.ncols()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn q(&self) -> DMatrix<f64> {
        self.c.tr_mul(&self.c)
    }

    /// `c(x) + uᵀRu`.
    pub fn running_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (&self.c * x).norm_squared() + u.dot(&(&self.r * u))
    }
}

pub type LambdaFn = Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>;

/// Disturbance bound `λ`.
#[derive(Clone)]
pub enum Lambda {
    Constant(f64),
    Function(LambdaFn),
}

impl Lambda {
    pub fn at(&self, t: f64, x: &DVector<f64>) -> f64 {
        match self {
            Lambda::Constant(v) => *v,
            Lambda::Function(f) => f(t, x).max(0.0),
        }
    }
}

impl fmt::Debug for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lambda::Constant(v) => write!(f, "Constant({v})"),
            Lambda::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobustConfig {
    pub lambda: Lambda,
    /// Regularization `r > 0` of `|g|`.
    pub r: f64,
}

impl RobustConfig {
    pub fn new(lambda: f64, r: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Self::with_function(Lambda::Constant(lambda), r)
    }

    pub fn with_function(lambda: Lambda, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::Config(format!("regularization r must be positive, got {r}")));
        }
        Ok(Self { lambda, r })
    }
}

/// How the controller obtains `b(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BAccess {
    /// Ask the simulator for its input map.
    #[default]
    Known,
    /// Finite differences of simulator calls only.
    SimulatorOnly,
}

/// Immutable control law; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    pub gain: GainApprox,
    pub weights: OptimalControlWeights,
    pub robust: RobustConfig,
    pub b_access: BAccess,
    reduction: Option<(ReducedModel, LinearSimulator)>,
    r_inv: DMatrix<f64>,
}

impl ControlLaw {
    pub fn new(
        gain: GainApprox,
        weights: OptimalControlWeights,
        robust: RobustConfig,
        b_access: BAccess,
    ) -> Result<Self> {
        check_dim("gain size", weights.n(), gain.dim())?;
        let r_inv = linalg::spd_inverse(&weights.r, 0.0, "R")?;
        Ok(Self {
            gain,
            weights,
            robust,
            b_access,
            reduction: None,
            r_inv,
        })
    }

    /// Controls the full state through a continuous-time reduced model.
    pub fn with_reduction(mut self, model: ReducedModel) -> Result<Self> {
        if model.domain != TimeDomain::Continuous {
            return Err(Error::Config(
                "control law needs a continuous-time reduced model".into(),
            ));
        }
        check_dim("reduced model size", self.gain.dim(), model.n())?;
        check_dim("reduced model inputs", self.weights.m(), model.m())?;
        let sim = model.simulator()?;
        self.reduction = Some((model, sim));
        Ok(self)
    }

    pub fn with_robust(&self, robust: RobustConfig) -> Self {
        Self { robust, ..self.clone() }
    }

    pub fn reduction(&self) -> Option<&ReducedModel> {
        self.reduction.as_ref().map(|(m, _)| m)
    }

    pub fn m(&self) -> usize {
        self.weights.m()
    }

    fn input_map<S: Simulator + ?Sized>(&self, x: &DVector<f64>, sim: &S) -> Result<DMatrix<f64>> {
        match self.b_access {
            BAccess::Known => sim.input_map(x).ok_or(Error::InputMapHidden),
            BAccess::SimulatorOnly => Ok(estimate_b(sim, x, self.m())),
        }
    }
}

fn check_sim<S: Simulator + ?Sized>(law: &ControlLaw, x: &DVector<f64>, sim: &S) -> Result<()> {
    check_dim("state", law.gain.dim(), x.len())?;
    check_dim("simulator state", law.gain.dim(), sim.state_dim())?;
    check_dim("simulator inputs", law.m(), sim.control_dim())
}

/// `gᵀS(x,u) + ½(c(x) + uᵀRu)` with one simulator call.
pub fn hamiltonian<S: Simulator + ?Sized>(law: &ControlLaw, x: &DVector<f64>, u: &DVector<f64>, sim: &S) -> f64 {
    let s = sim.eval(x, u);
    law.gain.gradient(x).dot(&s) + 0.5 * law.weights.running_cost(x, u)
}

/// `ū = −R⁻¹b(x)ᵀg`.
///
/// Without the input map, coordinate `i` is recovered from
/// `H(x, R⁻¹eᵢ) − H(x, 0) − ½(R⁻¹)ᵢᵢ = (R⁻¹bᵀg)ᵢ` and negated.
pub fn minimize_hamiltonian<S: Simulator + ?Sized>(
    law: &ControlLaw,
    x: &DVector<f64>,
    sim: &S,
) -> Result<DVector<f64>> {
    check_sim(law, x, sim)?;
    let m = law.m();
    match law.b_access {
        BAccess::Known => {
            let b = sim.input_map(x).ok_or(Error::InputMapHidden)?;
            Ok(-(&law.r_inv * b.tr_mul(&law.gain.gradient(x))))
        }
        BAccess::SimulatorOnly => {
            let h0 = hamiltonian(law, x, &DVector::zeros(m), sim);
            Ok(DVector::from_fn(m, |i, _| {
                let probe = law.r_inv.column(i).into_owned();
                -(hamiltonian(law, x, &probe, sim) - h0 - 0.5 * law.r_inv[(i, i)])
            }))
        }
    }
}

/// Column `j` is `S(x, eⱼ) − S(x, 0)`.
pub fn estimate_b<S: Simulator + ?Sized>(sim: &S, x: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let n = x.len();
    let base = sim.eval(x, &DVector::zeros(m));
    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut e = DVector::zeros(m);
        e[j] = 1.0;
        b.set_column(j, &(sim.eval(x, &e) - &base));
    }
    b
}

/// `u_d = −λ·v` with `v` the least-squares solution of `b(x)v = g/max(|g|, r)`.
pub fn robust_term<S: Simulator + ?Sized>(law: &ControlLaw, t: f64, x: &DVector<f64>, sim: &S) -> Result<DVector<f64>> {
    check_sim(law, x, sim)?;
    let lambda = law.robust.lambda.at(t, x);
    if lambda == 0.0 {
        return Ok(DVector::zeros(law.m()));
    }
    let g = law.gain.gradient(x);
    let r1 = g.norm().max(law.robust.r);
    let b = law.input_map(x, sim)?;
    Ok(linalg::pinv_apply(&b, &(g / r1))? * -lambda)
}

/// Full control at time `t` and full state `z`. With a reduction the law
/// acts on `Φz` and uses the reduced model as its simulator.
pub fn robust_control<S: Simulator + ?Sized>(
    law: &ControlLaw,
    t: f64,
    z: &DVector<f64>,
    sim: &S,
) -> Result<DVector<f64>> {
    match &law.reduction {
        Some((model, reduced)) => {
            let x = model.reduce(z)?;
            Ok(minimize_hamiltonian(law, &x, reduced)? + robust_term(law, t, &x, reduced)?)
        }
        None => Ok(minimize_hamiltonian(law, z, sim)? + robust_term(law, t, z, sim)?),
    }
}
