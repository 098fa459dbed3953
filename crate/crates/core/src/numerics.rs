//! Small numerical helpers: frames, finite differences, root finding.

use nalgebra::{DMatrix, DVector};

/// Default base step for finite differences.
pub const FD_STEP: f64 = 1e-4;

/// Parameter-space tolerance for bisection.
pub const BISECTION_TOL: f64 = 1e-9;

/// Orthonormal basis of the orthogonal complement of the span of `vs`
/// (assumed orthonormal), built deterministically from standard basis
/// vectors.
pub fn orthonormal_complement(vs: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = vs.to_vec();
    let mut out = Vec::new();
    while basis.len() < dim {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for k in 0..dim {
            let mut e = DVector::zeros(dim);
            e[k] = 1.0;
            for b in &basis {
                let c = b.dot(&e);
                e -= b * c;
            }
            let n = e.norm();
            if n > best_norm + 1e-12 {
                best_norm = n;
                best = Some(e / n);
            }
        }
        let mut v = best.expect("complement exists below full dimension");
        // second pass for numerical orthogonality
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        v /= v.norm();
        basis.push(v.clone());
        out.push(v);
    }
    out
}

/// Gram-Schmidt orthonormalisation; `None` if the vectors are dependent.
pub fn orthonormalize(vs: &[DVector<f64>]) -> Option<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &out {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        let n = w.norm();
        if n < 1e-12 * v.norm().max(1.0) || n == 0.0 {
            return None;
        }
        out.push(w / n);
    }
    Some(out)
}

pub fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..m.ncols()).map(|j| m.column(j).into_owned()).collect()
}

pub fn from_columns(dim: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    DMatrix::from_columns(cols)
}

/// Sign of the determinant of the square matrix `[first | rest]`.
pub fn sign_det(first: &DVector<f64>, rest: &DMatrix<f64>) -> f64 {
    let dim = first.len();
    let mut m = DMatrix::zeros(dim, dim);
    m.set_column(0, first);
    for j in 0..rest.ncols() {
        m.set_column(j + 1, &rest.column(j));
    }
    m.determinant().signum()
}

/// Rotation in the plane of unit vectors `a`, `b` taking `a` to `b`.
/// `None` when `a = -b`.
pub fn rotation_taking(a: &DVector<f64>, b: &DVector<f64>) -> Option<DMatrix<f64>> {
    let c = a.dot(b);
    if 1.0 + c < 1e-12 {
        return None;
    }
    let k = b * a.transpose() - a * b.transpose();
    let dim = a.len();
    Some(DMatrix::identity(dim, dim) + &k + (&k * &k) / (1.0 + c))
}

/// `normalize(center + frame x)`.
pub fn gnomonic_inverse(center: &DVector<f64>, frame: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let v = center + frame * x;
    let n = v.norm();
    v / n
}

/// Gnomonic coordinates of `theta` around `center`; `None` on or beyond the
/// equator of `center`.
pub fn gnomonic(center: &DVector<f64>, frame: &DMatrix<f64>, theta: &DVector<f64>) -> Option<DVector<f64>> {
    let c = theta.dot(center);
    if c <= 1e-12 {
        return None;
    }
    Some(frame.transpose() * theta / c)
}

/// Central difference with one Richardson step: `(4 D(h/2) - D(h)) / 3`.
pub fn richardson_central<F: FnMut(f64) -> Option<f64>>(mut f: F, x: f64, h: f64) -> Option<f64> {
    let d = |f: &mut F, h: f64| -> Option<f64> { Some((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let d1 = d(&mut f, h)?;
    let d2 = d(&mut f, h / 2.0)?;
    Some((4.0 * d2 - d1) / 3.0)
}

/// One-sided difference anchored at a known value `f(x) = fx`, with one
/// Richardson step: `2 D(h/2) - D(h)`. The sign of `h` picks the side.
pub fn richardson_one_sided<F: FnMut(f64) -> Option<f64>>(mut f: F, x: f64, fx: f64, h: f64) -> Option<f64> {
    let d1 = (f(x + h)? - fx) / h;
    let d2 = (f(x + h / 2.0)? - fx) / (h / 2.0);
    Some(2.0 * d2 - d1)
}

/// Central-difference derivative of a vector-valued function.
pub fn vector_derivative<F: FnMut(f64) -> Option<DVector<f64>>>(mut f: F, x: f64, h: f64) -> Option<DVector<f64>> {
    let a = f(x + h)?;
    let b = f(x - h)?;
    let a2 = f(x + h / 2.0)?;
    let b2 = f(x - h / 2.0)?;
    let d1 = (a - b) / (2.0 * h);
    let d2 = (a2 - b2) / h;
    Some((d2 * 4.0 - d1) / 3.0)
}

/// Forward-difference Jacobian of `f: R^m -> R^k` at `x`, step `h`.
pub fn jacobian<F: FnMut(&DVector<f64>) -> Option<DVector<f64>>>(
    f: &mut F,
    x: &DVector<f64>,
    fx: &DVector<f64>,
    h: f64,
) -> Option<DMatrix<f64>> {
    let m = x.len();
    let mut jac = DMatrix::zeros(fx.len(), m);
    for j in 0..m {
        let mut xp = x.clone();
        xp[j] += h;
        let fp = f(&xp)?;
        jac.set_column(j, &((fp - fx) / h));
    }
    Some(jac)
}

/// Central-difference Jacobian, more accurate but twice the evaluations.
pub fn jacobian_central<F: FnMut(&DVector<f64>) -> Option<DVector<f64>>>(
    f: &mut F,
    x: &DVector<f64>,
    h: f64,
) -> Option<DMatrix<f64>> {
    let m = x.len();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        cols.push((f(&xp)? - f(&xm)?) / (2.0 * h));
    }
    if cols.is_empty() {
        return Some(DMatrix::zeros(0, 0));
    }
    Some(DMatrix::from_columns(&cols))
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-13, max_iter: 40, step: 1e-7 }
    }
}

/// Newton iteration for a square system with a finite-difference Jacobian.
/// `None` on evaluation failure, singular Jacobian or no convergence.
pub fn newton<F: FnMut(&DVector<f64>) -> Option<DVector<f64>>>(
    mut f: F,
    x0: DVector<f64>,
    opts: NewtonOptions,
) -> Option<DVector<f64>> {
    let mut x = x0;
    if x.is_empty() {
        return Some(x);
    }
    let mut fx = f(&x)?;
    for _ in 0..opts.max_iter {
        if fx.amax() <= opts.tol {
            return Some(x);
        }
        let jac = jacobian(&mut f, &x, &fx, opts.step)?;
        let dx = jac.lu().solve(&(-&fx))?;
        if !dx.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut lambda = 1.0;
        let norm0 = fx.norm();
        loop {
            let cand = &x + &dx * lambda;
            if let Some(fc) = f(&cand) {
                if fc.norm() < norm0 || lambda < 1e-3 {
                    x = cand;
                    fx = fc;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return None;
            }
        }
        if dx.amax() * lambda <= 1e-15 * x.amax().max(1.0) && fx.amax() <= opts.tol * 1e3 {
            return Some(x);
        }
    }
    (fx.amax() <= opts.tol * 1e3).then_some(x)
}

/// Bisection on `[a, b]` with `f(a)`, `f(b)` of opposite signs.
pub fn bisect<F: FnMut(f64) -> Option<f64>>(mut f: F, mut a: f64, mut fa: f64, mut b: f64, tol: f64) -> Option<f64> {
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Some(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let m = (n - 1) as f64;
            (0..n).map(|k| lo * ((n - 1 - k) as f64 / m) + hi * (k as f64 / m)).collect()
        }
    }
}
