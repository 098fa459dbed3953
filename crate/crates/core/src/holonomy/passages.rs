//! Iterated passages `D_k(s) → C_k(s)` through the model and the return
//! gaps against `D'₁(s) = H_s⁻¹(Σ⁺)`.
//!
//! Stage `k` is parametrised by `u ∈ [-R, R]^{i-1}`: for `k = 1`, the point
//! `H_s(chart⁻⁻¹(u, 0, 0))` of `D₁(s)`; for `k > 1`, the point `H_s(c)` where
//! `c ∈ C_{k-1}(s)` has bottom-chart coordinate `x = u`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{HolonomyFamily, TubeCoords};
use crate::error::HolonomyError;
use crate::local_model::{Boundary, ModelPoint, CO_SPHERE_THRESHOLD};
use crate::numerics::{
    self, bisect, gnomonic_inverse, jacobian_central, linspace, newton, orthonormal_complement, sign_det,
    NewtonOptions, BISECTION_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageOptions {
    /// Samples per parameter direction.
    pub samples: usize,
    /// A return gap at most this large counts as a connection.
    pub tol: f64,
}

impl Default for PassageOptions {
    fn default() -> Self {
        PassageOptions { samples: 33, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudPoint {
    pub param: Vec<f64>,
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    /// Sign of `π⁻ : C_k → Σ⁻` at this point.
    pub orientation: i8,
}

impl CloudPoint {
    pub fn point(&self) -> ModelPoint {
        ModelPoint::from_slices(&self.minus, &self.plus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscCloud {
    pub k: usize,
    pub boundary: Boundary,
    pub points: Vec<CloudPoint>,
    /// Sign of `π⁻` at the polar point (stage parameter 0), the part of the
    /// disc that fills the hemisphere as `s → 0`.
    pub polar_orientation: Option<i8>,
    /// `π⁻` changes sign somewhere on the sampled disc.
    pub folded: bool,
}

impl DiscCloud {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn orientation(&self) -> Option<i8> {
        self.polar_orientation
    }
}

/// A connection of `C_k(s)` with `D'₁(s)`, i.e. a homoclinic orbit of class
/// `g^{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomoclinicRecord {
    pub k: usize,
    pub power: usize,
    pub xi: Vec<f64>,
    pub gap: f64,
    pub orientation: i8,
}

pub(crate) struct Chain<'a> {
    pub f: &'a HolonomyFamily,
    pub s: f64,
}

pub(crate) struct TubeHit {
    pub u: DVector<f64>,
    pub point: ModelPoint,
    pub coords: TubeCoords,
}

impl<'a> Chain<'a> {
    pub fn new(f: &'a HolonomyFamily, s: f64) -> Self {
        Chain { f, s }
    }

    fn dim(&self) -> usize {
        self.f.config().i - 1
    }

    /// Point of `D_k(s)` with stage parameter `u`.
    pub fn upper(&self, k: usize, u: &DVector<f64>) -> Option<ModelPoint> {
        let f = self.f;
        let start = if k == 1 {
            f.chart_lower_inv(&TubeCoords::new(u.clone(), DVector::zeros(f.config().co_index() - 1), 0.0))
        } else {
            self.tube_point(k - 1, u)?.point
        };
        f.evaluate_holonomy(self.s, &start)
    }

    /// Point of `C_k(s)` with stage parameter `u`.
    pub fn lower(&self, k: usize, u: &DVector<f64>) -> Option<ModelPoint> {
        self.upper(k, u)?.descend(self.f.config()).ok()
    }

    /// Solve for `u` with `φ(C_k(u)) = target`.
    pub fn over_direction(&self, k: usize, target: &DVector<f64>) -> Option<(DVector<f64>, ModelPoint)> {
        let dim = target.len();
        let b = numerics::from_columns(dim, &orthonormal_complement(std::slice::from_ref(target), dim));
        let u = newton(
            |u| Some(b.transpose() * self.upper(k, u)?.minus),
            DVector::zeros(self.dim()),
            NewtonOptions::default(),
        )?;
        let top = self.upper(k, &u)?;
        if top.minus.dot(target) <= CO_SPHERE_THRESHOLD {
            return None;
        }
        Some((u, top.descend(self.f.config()).ok()?))
    }

    /// Point of `C_k(s)` inside the tube with bottom-chart coordinate `xi`.
    pub fn tube_point(&self, k: usize, xi: &DVector<f64>) -> Option<TubeHit> {
        let fr = self.f.frames();
        let target = gnomonic_inverse(&fr.phi0, &fr.g_phi, xi);
        let (u, point) = self.over_direction(k, &target)?;
        let coords = self.f.chart_lower(&point)?;
        if (&coords.x - xi).amax() > 1e-8 {
            return None;
        }
        Some(TubeHit { u, point, coords })
    }

    /// Bottom-chart coordinate of `C_k(u)`.
    fn xi_of(&self, k: usize, u: &DVector<f64>) -> Option<DVector<f64>> {
        let fr = self.f.frames();
        let phi = self.lower(k, u)?.minus.normalize();
        numerics::gnomonic(&fr.phi0, &fr.g_phi, &phi)
    }

    /// Orientation sign of stage parameter `u` relative to the one
    /// transported from `Σ⁻`.
    pub fn stage_sign(&self, k: usize, u: &DVector<f64>) -> Option<i8> {
        if k == 1 {
            return Some(1);
        }
        let hit = self.tube_point(k - 1, u)?;
        let prev = self.stage_sign(k - 1, &hit.u)?;
        let jac = jacobian_central(&mut |w: &DVector<f64>| self.xi_of(k - 1, w), &hit.u, 1e-7)?;
        let d = if jac.nrows() == 0 { 1.0 } else { jac.determinant() };
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(prev * d.signum() as i8)
    }

    /// Sign of `π⁻ : C_k → Σ⁻` at stage parameter `u`.
    pub fn pi_orientation(&self, k: usize, u: &DVector<f64>) -> Option<i8> {
        let fr = self.f.frames();
        let eps = self.stage_sign(k, u)?;
        let phi_at = |w: &DVector<f64>| Some(self.lower(k, w)?.minus.normalize());
        let phi = phi_at(u)?;
        let dphi = if self.dim() == 0 {
            DMatrix::zeros(phi.len(), 0)
        } else {
            jacobian_central(&mut |w: &DVector<f64>| phi_at(w), u, 1e-7)?
        };
        let reference = sign_det(&fr.nu_phi, &fr.f_phi);
        Some(eps * (sign_det(&phi, &dphi) * reference) as i8)
    }
}

fn param_grid(dim: usize, radius: f64, samples: usize) -> Vec<DVector<f64>> {
    if dim == 0 {
        return vec![DVector::zeros(0)];
    }
    let per = if dim == 1 { samples } else { samples.min(9) };
    let axis = linspace(-radius, radius, per);
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(DVector::from_vec).collect()
}

fn check_s(f: &HolonomyFamily, s: f64) -> Result<(), HolonomyError> {
    if !(s.is_finite() && s.abs() <= f.s_bound()) {
        return Err(HolonomyError::OutOfDomain(format!("|s| = {} exceeds {}", s.abs(), f.s_bound())));
    }
    Ok(())
}

/// Sample clouds of `C_1(s), …, C_{k_max}(s)` in the bottom boundary. Once a
/// stage has no point in the tube, all later clouds are empty.
pub fn passage_discs(
    f: &HolonomyFamily,
    s: f64,
    k_max: usize,
    opts: PassageOptions,
) -> Result<Vec<DiscCloud>, HolonomyError> {
    check_s(f, s)?;
    let chain = Chain::new(f, s);
    let dim = f.config().i - 1;
    let mut clouds = Vec::with_capacity(k_max);
    let mut alive = true;
    for k in 1..=k_max {
        let mut points = Vec::new();
        if alive {
            let mut params = param_grid(dim, f.radius(), opts.samples);
            if dim == 1 && k > 1 {
                params = refine_boundary(&params, |u| chain.lower(k, u).is_some());
            }
            for u in params {
                let Some(p) = chain.lower(k, &u) else { continue };
                let Some(orientation) = chain.pi_orientation(k, &u) else { continue };
                points.push(CloudPoint {
                    param: u.iter().copied().collect(),
                    minus: p.minus.iter().copied().collect(),
                    plus: p.plus.iter().copied().collect(),
                    orientation,
                });
            }
            alive = param_grid(dim, f.radius(), opts.samples).iter().any(|xi| chain.tube_point(k, xi).is_some());
        }
        let polar_orientation = if points.is_empty() { None } else { chain.pi_orientation(k, &DVector::zeros(dim)) };
        let folded = points.iter().any(|p| p.orientation != points[0].orientation);
        clouds.push(DiscCloud { k, boundary: Boundary::Bottom, points, polar_orientation, folded });
    }
    Ok(clouds)
}

/// Add the bisected edge of the valid region between neighbouring samples.
fn refine_boundary<F: Fn(&DVector<f64>) -> bool>(params: &[DVector<f64>], valid: F) -> Vec<DVector<f64>> {
    let flags: Vec<bool> = params.iter().map(&valid).collect();
    let mut out = Vec::with_capacity(params.len() + 4);
    for j in 0..params.len() {
        out.push(params[j].clone());
        if j + 1 < params.len() && flags[j] != flags[j + 1] {
            let (mut good, mut bad) = if flags[j] { (params[j][0], params[j + 1][0]) } else { (params[j + 1][0], params[j][0]) };
            while (good - bad).abs() > BISECTION_TOL {
                let m = 0.5 * (good + bad);
                if valid(&DVector::from_element(1, m)) {
                    good = m;
                } else {
                    bad = m;
                }
            }
            out.push(DVector::from_element(1, good));
        }
    }
    out
}

pub(crate) struct Match {
    pub xi: DVector<f64>,
    pub gap: f64,
}

/// `(x_C - x_D, v_C - v_D)` between the tube point of `C_k` over `xi` and the
/// point of `D'₁(s)` with the same `y`.
fn mismatch(chain: &Chain, k: usize, xi: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let f = chain.f;
    let hit = chain.tube_point(k, xi)?;
    let zx = DVector::zeros(f.config().i - 1);
    let d = |y: &DVector<f64>| -> Option<TubeCoords> {
        let top = f.chart_upper_inv(&TubeCoords::new(zx.clone(), y.clone(), 0.0));
        f.chart_lower(&f.inverse_holonomy(chain.s, &top)?)
    };
    let y = newton(|y| Some(d(y)?.y - &hit.coords.y), hit.coords.y.clone(), NewtonOptions::default())?;
    let dc = d(&y)?;
    Some((&hit.coords.x - dc.x, hit.coords.v - dc.v))
}

pub(crate) fn matches(chain: &Chain, k: usize, opts: PassageOptions) -> Vec<Match> {
    let f = chain.f;
    let dim = f.config().i - 1;
    let mut out = Vec::new();
    match dim {
        0 => {
            let xi = DVector::zeros(0);
            if let Some((_, gap)) = mismatch(chain, k, &xi) {
                out.push(Match { xi, gap });
            }
        }
        1 => {
            let axis = linspace(-f.radius(), f.radius(), opts.samples);
            let vals: Vec<Option<f64>> =
                axis.iter().map(|&a| mismatch(chain, k, &DVector::from_element(1, a)).map(|m| m.0[0])).collect();
            let scalar = |a: f64| mismatch(chain, k, &DVector::from_element(1, a)).map(|m| m.0[0]);
            for j in 0..axis.len() {
                let Some(fa) = vals[j] else { continue };
                let root = if fa == 0.0 {
                    Some(axis[j])
                } else if j + 1 < axis.len() {
                    match vals[j + 1] {
                        Some(fb) if fb != 0.0 && (fa > 0.0) != (fb > 0.0) => {
                            bisect(scalar, axis[j], fa, axis[j + 1], BISECTION_TOL)
                        }
                        _ => None,
                    }
                } else {
                    None
                };
                if let Some(r) = root {
                    // polish the bracketed root; keep it if Newton wanders off
                    let xi = newton(|x| Some(mismatch(chain, k, x)?.0), DVector::from_element(1, r), NewtonOptions::default())
                        .filter(|x| (x[0] - r).abs() <= BISECTION_TOL * 10.0)
                        .unwrap_or_else(|| DVector::from_element(1, r));
                    if let Some((_, gap)) = mismatch(chain, k, &xi) {
                        out.push(Match { xi, gap });
                    }
                }
            }
        }
        _ => {
            let xi = newton(|xi| Some(mismatch(chain, k, xi)?.0), DVector::zeros(dim), NewtonOptions::default());
            if let Some(xi) = xi {
                if let Some((_, gap)) = mismatch(chain, k, &xi) {
                    out.push(Match { xi, gap });
                }
            }
        }
    }
    out
}

/// Signed return gap `v(C_k) - v(D'₁)` at the matched point, or `None` if
/// `C_k(s)` misses the tube. `k = 0` measures `D₁(s)` against `Σ⁺` in the
/// top chart.
pub fn v_gap(f: &HolonomyFamily, s: f64, k: usize) -> Option<f64> {
    if !(s.is_finite() && s.abs() <= f.s_bound()) {
        return None;
    }
    if k == 0 {
        let cfg = f.config();
        let zy = DVector::zeros(cfg.co_index() - 1);
        let img = |x: &DVector<f64>| f.chart_upper(&f.evaluate_holonomy(s, &f.chart_lower_inv(&TubeCoords::new(x.clone(), zy.clone(), 0.0)))?);
        let x = newton(|x| Some(img(x)?.x), DVector::zeros(cfg.i - 1), NewtonOptions::default())?;
        return Some(img(&x)?.v);
    }
    let chain = Chain::new(f, s);
    let m = matches(&chain, k, PassageOptions::default());
    m.into_iter().min_by(|a, b| a.xi.norm().total_cmp(&b.xi.norm())).map(|m| m.gap)
}

/// Connections of `C_k(s)` with `D'₁(s)` whose gap is within `opts.tol`.
pub fn detect_homoclinic(
    f: &HolonomyFamily,
    s: f64,
    k: usize,
    opts: PassageOptions,
) -> Result<Vec<HomoclinicRecord>, HolonomyError> {
    check_s(f, s)?;
    if k == 0 {
        return Err(HolonomyError::InvalidFamily("passage index starts at 1".into()));
    }
    let chain = Chain::new(f, s);
    let mut out = Vec::new();
    for m in matches(&chain, k, opts) {
        if m.gap.abs() > opts.tol {
            continue;
        }
        let hit = chain
            .tube_point(k, &m.xi)
            .ok_or_else(|| HolonomyError::NonGeneric("connection on the tube boundary".into()))?;
        let orientation = chain
            .pi_orientation(k, &hit.u)
            .ok_or_else(|| HolonomyError::NonGeneric("degenerate orientation at a connection".into()))?;
        out.push(HomoclinicRecord { k, power: k + 1, xi: m.xi.iter().copied().collect(), gap: m.gap, orientation });
    }
    Ok(out)
}
