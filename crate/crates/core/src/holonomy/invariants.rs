//! Recovery of the self-slide invariants of a family at `s = 0`.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{passages, HolonomyFamily, TubeCoords, ZERO_THRESHOLD};
use crate::error::HolonomyError;
use crate::local_model::{LatitudeFrame, ModelPoint};
use crate::numerics::{
    self, gnomonic_inverse, newton, orthonormal_complement, orthonormalize, richardson_central, richardson_one_sided,
    vector_derivative, NewtonOptions, FD_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StratumLabel {
    #[serde(rename = "S_g^+")]
    Plus,
    #[serde(rename = "S_g^-")]
    Minus,
    #[serde(rename = "S_g^{0,+}")]
    ZeroPlus,
    #[serde(rename = "S_g^{0,-}")]
    ZeroMinus,
    #[serde(rename = "S_g^{0,0}")]
    ZeroZero,
    #[serde(rename = "phi-axis")]
    PhiAxis,
    #[serde(rename = "psi-axis")]
    PsiAxis,
}

impl StratumLabel {
    pub fn from_invariants(omega_phi: f64, omega_psi: f64, chi: f64) -> Self {
        let thr = ZERO_THRESHOLD;
        if omega_phi.abs() < thr && omega_psi.abs() < thr {
            StratumLabel::ZeroZero
        } else if chi.abs() < thr {
            if omega_phi > 0.0 {
                StratumLabel::ZeroPlus
            } else {
                StratumLabel::ZeroMinus
            }
        } else if omega_psi.abs() < thr {
            StratumLabel::PhiAxis
        } else if omega_phi.abs() < thr {
            StratumLabel::PsiAxis
        } else if chi > 0.0 {
            StratumLabel::Plus
        } else {
            StratumLabel::Minus
        }
    }

    /// Codimension-one strata are `S_g^±`; both `S_g^{0,±}` coarsen to `S_g^0`.
    pub fn coarse(self) -> &'static str {
        match self {
            StratumLabel::Plus => "S_g^+",
            StratumLabel::Minus => "S_g^-",
            StratumLabel::ZeroPlus | StratumLabel::ZeroMinus => "S_g^0",
            StratumLabel::ZeroZero => "S_g^{0,0}",
            StratumLabel::PhiAxis => "phi-axis",
            StratumLabel::PsiAxis => "psi-axis",
        }
    }

    pub fn is_doubling(self) -> bool {
        matches!(self, StratumLabel::ZeroPlus | StratumLabel::ZeroMinus)
    }
}

impl fmt::Display for StratumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StratumLabel::Plus => "S_g^+",
            StratumLabel::Minus => "S_g^-",
            StratumLabel::ZeroPlus => "S_g^{0,+}",
            StratumLabel::ZeroMinus => "S_g^{0,-}",
            StratumLabel::ZeroZero => "S_g^{0,0}",
            StratumLabel::PhiAxis => "phi-axis",
            StratumLabel::PsiAxis => "psi-axis",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfSlideInvariants {
    pub a_minus: ModelPoint,
    pub a_plus: ModelPoint,
    pub delta_phi: LatitudeFrame,
    pub delta_psi: LatitudeFrame,
    pub omega_phi: f64,
    pub omega_psi: f64,
    pub eta: f64,
    pub chi: f64,
    pub label: StratumLabel,
    /// Some latitude or `χ` lies within two decades above the threshold.
    pub marginal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantsReport {
    pub a_minus: Vec<f64>,
    pub a_plus: Vec<f64>,
    pub nu_phi: Vec<f64>,
    pub nu_psi: Vec<f64>,
    pub omega_phi: f64,
    pub omega_psi: f64,
    pub eta: f64,
    pub chi: f64,
    pub label: StratumLabel,
    pub coarse_label: &'static str,
    pub marginal: bool,
}

impl SelfSlideInvariants {
    pub fn report(&self) -> InvariantsReport {
        let v = |d: &DVector<f64>| d.iter().copied().collect::<Vec<_>>();
        InvariantsReport {
            a_minus: v(&self.a_minus.minus.normalize()),
            a_plus: v(&self.a_plus.plus.normalize()),
            nu_phi: v(self.delta_phi.normal()),
            nu_psi: v(self.delta_psi.normal()),
            omega_phi: self.omega_phi,
            omega_psi: self.omega_psi,
            eta: self.eta,
            chi: self.chi,
            label: self.label,
            coarse_label: self.label.coarse(),
            marginal: self.marginal,
        }
    }
}

/// Unit normal to the span of `tangents` in `R^dim`, with `⟨n, side⟩ > 0`.
fn co_oriented_normal(
    tangents: &[DVector<f64>],
    dim: usize,
    side: &DVector<f64>,
    what: &str,
) -> Result<DVector<f64>, HolonomyError> {
    let basis = orthonormalize(tangents)
        .filter(|b| b.len() + 1 == dim)
        .ok_or_else(|| HolonomyError::InvalidFamily(format!("{what}: image of the belt sphere is singular")))?;
    let mut n = orthonormal_complement(&basis, dim).remove(0);
    let d = n.dot(side);
    if d.abs() < ZERO_THRESHOLD {
        return Err(HolonomyError::InvalidFamily(format!("{what}: chart v-direction is tangent to the equator")));
    }
    if d < 0.0 {
        n = -n;
    }
    Ok(n)
}

/// Recover `a±`, the equators `Δ^φ`, `Δ^ψ`, both latitudes and the
/// holonomic factor from the holonomy at `s = 0`.
pub fn compute_invariants(f: &HolonomyFamily) -> Result<SelfSlideInvariants, HolonomyError> {
    let cfg = *f.config();
    let a_minus = f.a_minus();
    let a_plus = f.a_plus();
    let image = f
        .evaluate_holonomy(0.0, &a_minus)
        .ok_or_else(|| HolonomyError::InvalidFamily("H_0 is undefined at a⁻".into()))?;
    if (&image.minus - &a_plus.minus).amax() > 1e-9 || (&image.plus - &a_plus.plus).amax() > 1e-9 {
        return Err(HolonomyError::InvalidFamily("H_0 does not take a⁻ to a⁺".into()));
    }
    let phi0 = a_minus.minus.normalize();
    let psi0 = a_plus.plus.normalize();
    let h = FD_STEP * f.radius();
    let sd = cfg.delta_star.sqrt();

    // Δ^φ = H_0(Σ⁻) near a⁺, projected to the x⁻ factor.
    let ephi = numerics::from_columns(cfg.i, &orthonormal_complement(std::slice::from_ref(&phi0), cfg.i));
    let mut t_phi = Vec::with_capacity(cfg.i - 1);
    for j in 0..cfg.i - 1 {
        let t = vector_derivative(
            |e| {
                let mut th = DVector::zeros(cfg.i - 1);
                th[j] = e;
                let p = ModelPoint::new(gnomonic_inverse(&phi0, &ephi, &th) * sd, DVector::zeros(cfg.co_index()));
                Some(f.evaluate_holonomy(0.0, &p)?.minus)
            },
            0.0,
            h,
        )
        .ok_or_else(|| HolonomyError::InvalidFamily("H_0 undefined near a⁻".into()))?;
        t_phi.push(t);
    }
    let side_phi = vector_derivative(
        |e| Some(f.chart_upper_inv(&TubeCoords { v: e, ..TubeCoords::zeros(&cfg) }).minus),
        0.0,
        h,
    )
    .expect("chart is total");
    let n_phi = co_oriented_normal(&t_phi, cfg.i, &side_phi, "Δ^φ")?;

    // Δ^ψ = H_0⁻¹(Σ⁺) near a⁻, projected to the x⁺ factor.
    let k = cfg.co_index();
    let epsi = numerics::from_columns(k, &orthonormal_complement(std::slice::from_ref(&psi0), k));
    let mut t_psi = Vec::with_capacity(k - 1);
    for j in 0..k - 1 {
        let t = vector_derivative(
            |e| {
                let mut th = DVector::zeros(k - 1);
                th[j] = e;
                let p = ModelPoint::new(DVector::zeros(cfg.i), gnomonic_inverse(&psi0, &epsi, &th) * sd);
                Some(f.inverse_holonomy(0.0, &p)?.plus)
            },
            0.0,
            h,
        )
        .ok_or_else(|| HolonomyError::InvalidFamily("H_0⁻¹ undefined near a⁺".into()))?;
        t_psi.push(t);
    }
    let side_psi = vector_derivative(
        |e| Some(f.chart_lower_inv(&TubeCoords { v: e, ..TubeCoords::zeros(&cfg) }).plus),
        0.0,
        h,
    )
    .expect("chart is total");
    let n_psi = co_oriented_normal(&t_psi, k, &side_psi, "Δ^ψ")?;

    // η̄: normal speed of H_0⁻¹ applied to the top v-direction.
    let pushed = vector_derivative(
        |e| Some(f.inverse_holonomy(0.0, &f.chart_upper_inv(&TubeCoords { v: e, ..TubeCoords::zeros(&cfg) }))?.plus),
        0.0,
        h,
    )
    .ok_or_else(|| HolonomyError::InvalidFamily("H_0⁻¹ undefined along the pole axis".into()))?;
    let eta_bar = pushed.dot(&n_psi);
    if eta_bar <= ZERO_THRESHOLD {
        return Err(HolonomyError::InvalidFamily(format!(
            "H_0⁻¹ moves the positive side of Δ^φ to the negative side of Δ^ψ (η̄ = {eta_bar:.3e})"
        )));
    }
    let eta = 1.0 / eta_bar;
    let omega_phi = phi0.dot(&n_phi).clamp(-1.0, 1.0);
    let omega_psi = psi0.dot(&n_psi).clamp(-1.0, 1.0);
    let chi = eta * omega_psi + omega_phi;
    let label = StratumLabel::from_invariants(omega_phi, omega_psi, chi);
    let marginal = [omega_phi, omega_psi, chi]
        .iter()
        .any(|x| x.abs() >= ZERO_THRESHOLD && x.abs() <= 100.0 * ZERO_THRESHOLD);
    Ok(SelfSlideInvariants {
        a_minus,
        a_plus,
        delta_phi: LatitudeFrame::new(n_phi)?,
        delta_psi: LatitudeFrame::new(n_psi)?,
        omega_phi,
        omega_psi,
        eta,
        chi,
        label,
        marginal,
    })
}

/// `dv₁/ds` at `s = 0`, taken on the side `s ω_φ > 0` where the first
/// return gap exists.
pub fn v1_dot(f: &HolonomyFamily) -> Result<f64, HolonomyError> {
    let inv = compute_invariants(f)?;
    if inv.omega_phi.abs() < ZERO_THRESHOLD {
        return Err(HolonomyError::BelowThreshold(format!("ω_φ = {:.3e}", inv.omega_phi)));
    }
    let h = inv.omega_phi.signum() * 0.01 * f.s_bound();
    richardson_one_sided(|s| passages::v_gap(f, s, 1), 0.0, 0.0, h)
        .ok_or_else(|| HolonomyError::OutOfDomain("first return gap undefined near s = 0".into()))
}

/// `(d/ds v(H_s(x_s)), d/ds v(H_s⁻¹(y_s)))` at `s = 0`, where `x_s` is the
/// point of `Σ⁻` sent to the top pole axis and `y_s` the point of `Σ⁺`
/// pulled back to the bottom pole axis.
pub fn velocity_balance(f: &HolonomyFamily) -> Result<(f64, f64), HolonomyError> {
    let cfg = *f.config();
    let zy = DVector::zeros(cfg.co_index() - 1);
    let zx = DVector::zeros(cfg.i - 1);
    let up = |s: f64| -> Option<f64> {
        let img = |x: &DVector<f64>| f.evaluate_holonomy(s, &f.chart_lower_inv(&TubeCoords::new(x.clone(), zy.clone(), 0.0)));
        let x = newton(|x| Some(f.chart_upper(&img(x)?)?.x), zx.clone(), NewtonOptions::default())?;
        Some(f.chart_upper(&img(&x)?)?.v)
    };
    let down = |s: f64| -> Option<f64> {
        let img = |y: &DVector<f64>| f.inverse_holonomy(s, &f.chart_upper_inv(&TubeCoords::new(zx.clone(), y.clone(), 0.0)));
        let y = newton(|y| Some(f.chart_lower(&img(y)?)?.y), zy.clone(), NewtonOptions::default())?;
        Some(f.chart_lower(&img(&y)?)?.v)
    };
    let h = 0.01 * f.s_bound();
    let d_up = richardson_central(up, 0.0, h);
    let d_down = richardson_central(down, 0.0, h);
    match (d_up, d_down) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(HolonomyError::OutOfDomain("pole-axis points undefined near s = 0".into())),
    }
}
