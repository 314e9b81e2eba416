//! Dense matrix helpers not provided directly by nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Thin SVD with singular values in descending order: `(U, s, Vᵀ)`.
pub fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vt");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let vt_sorted = DMatrix::from_fn(order.len(), vt.ncols(), |i, j| vt[(order[i], j)]);
    let s_sorted = DVector::from_iterator(order.len(), order.iter().map(|&k| s[k]));
    (u_sorted, s_sorted, vt_sorted)
}

/// Numerical rank with tolerance `rel_tol * σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Inverse of a symmetric positive definite matrix after symmetrizing and
/// adding `jitter * I`.
pub fn spd_inverse(m: &DMatrix<f64>, jitter: f64, what: &'static str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let s = symmetrize(m) + DMatrix::identity(n, n) * jitter;
    let chol = s.cholesky().ok_or(Error::NotPositiveDefinite { what })?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.is_square() && max_asymmetry(m) <= 1e-10 * m.norm().max(1.0) && m.clone().cholesky().is_some()
}

/// Largest real part over the eigenvalues of a square matrix.
pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// `∫₀^h e^{Aτ} dτ`, read off the exponential of the augmented matrix
/// `[[A, I], [0, 0]]·h`. Valid for singular `A`.
pub fn exp_integral(a: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    aug.view_mut((0, n), (n, n)).fill_diagonal(h);
    let e = aug.exp();
    e.view((0, n), (n, n)).into_owned()
}

fn sqrtm_denman_beavers(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let y_inv = y
            .clone()
            .try_inverse()
            .ok_or(Error::LogInadmissible { re: 0.0, im: 0.0 })?;
        let z_inv = z
            .clone()
            .try_inverse()
            .ok_or(Error::LogInadmissible { re: 0.0, im: 0.0 })?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.norm() {
            break;
        }
    }
    Ok(y)
}

/// Principal matrix logarithm by inverse scaling and squaring.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let scale = a.norm().max(1e-300);
    for z in a.complex_eigenvalues().iter() {
        if z.re <= 0.0 && z.im.abs() <= 1e-12 * scale {
            return Err(Error::LogInadmissible { re: z.re, im: z.im });
        }
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut squarings = 0;
    while (&x - &eye).norm() > 0.25 {
        x = sqrtm_denman_beavers(&x)?;
        squarings += 1;
        if squarings > 64 {
            return Err(Error::LogInadmissible {
                re: f64::NAN,
                im: f64::NAN,
            });
        }
    }
    // log X = 2·atanh(Z), Z = (X − I)(X + I)⁻¹
    let denom = (&x + &eye)
        .try_inverse()
        .ok_or(Error::LogInadmissible { re: -1.0, im: 0.0 })?;
    let z = (&x - &eye) * denom;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut acc = z.clone();
    for k in 1..200 {
        term = &term * &z2;
        let contrib = &term / (2 * k + 1) as f64;
        acc += &contrib;
        if contrib.norm() <= 1e-18 * acc.norm().max(1e-300) {
            break;
        }
    }
    Ok(acc * (2.0 * 2f64.powi(squarings)))
}

/// Solves `AᵀX + XA + M = 0` for Hurwitz `A` by the matrix sign iteration.
pub fn lyapunov(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut ak = a.clone();
    let mut mk = m.clone();
    for _ in 0..100 {
        let inv = ak.clone().try_inverse().ok_or(Error::NotHurwitz { max_real: 0.0 })?;
        // norm scaling speeds up the early iterations on stiff spectra
        let c = (inv.norm() / ak.norm()).sqrt();
        let m_next = (&mk * c + inv.transpose() * &mk * &inv / c) * 0.5;
        let a_next = (&ak * c + &inv / c) * 0.5;
        let step = (&a_next - &ak).norm();
        mk = m_next;
        ak = a_next;
        let tol = (n as f64).sqrt();
        if (&ak + &eye).norm() <= 1e-13 * tol || (step <= 1e-12 * tol && (&ak + &eye).norm() <= 1e-6 * tol) {
            return Ok(symmetrize(&(mk * 0.5)));
        }
        if !is_finite(&ak) {
            break;
        }
    }
    Err(Error::NotHurwitz {
        max_real: max_real_eigenvalue(a),
    })
}

/// Least-squares solution of `B v = g` for full-column-rank `B`.
pub fn pinv_apply(b: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    if b.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let dependent = dependent_columns(b);
    if !dependent.is_empty() {
        return Err(Error::PseudoInverse { columns: dependent });
    }
    match b.tr_mul(b).cholesky() {
        Some(chol) => Ok(chol.solve(&b.tr_mul(g))),
        None => Err(Error::PseudoInverse {
            columns: (0..b.ncols()).collect(),
        }),
    }
}

/// Columns of `b` that lie (numerically) in the span of the earlier ones.
pub fn dependent_columns(b: &DMatrix<f64>) -> Vec<usize> {
    let scale = b.norm().max(1e-300);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..b.ncols() {
        let mut v = b.column(j).into_owned();
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let nv = v.norm();
        if nv <= 1e-10 * scale {
            out.push(j);
        } else {
            basis.push(v / nv);
        }
    }
    out
}
