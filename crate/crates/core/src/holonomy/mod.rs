//! Holonomy return maps along a homoclinic orbit, in tube coordinates.
//!
//! A family is `H_s = chart⁺⁻¹ ∘ A_s ∘ chart⁻`, where `chart⁻` covers a
//! neighbourhood of `a⁻` in the bottom boundary, `chart⁺` a neighbourhood of
//! `a⁺` in the top boundary, and `A_s` is a core map on tube coordinates
//! `(x, y, v) ∈ R^{i-1} × R^{n-i-1} × R` with `A_0 = Id`.
//!
//! Charts used by [`make_elementary_family`]:
//!
//! * `chart⁺⁻¹(x, y, v)`: `x⁻ = F_φ x + v ν_φ`, `ψ = gnomonic(ψ₀, G_ψ y)`.
//! * `chart⁻⁻¹(x, y, v)`: `φ = gnomonic(φ₀, G_φ x)`, `x⁺ = F_ψ (y + v τ) + v η̄ ν_ψ`.
//!
//! `ν_φ`, `ν_ψ` are the poles of the preferred equators and `F_φ`, `F_ψ`
//! orthonormal frames of the equatorial hyperplanes.

pub mod incidence;
pub mod invariants;
pub mod passages;
pub mod sweep;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::HolonomyError;
use crate::local_model::{Boundary, ModelPoint, MorseModelConfig};
use crate::numerics::{self, gnomonic, gnomonic_inverse, orthonormal_complement, rotation_taking, sign_det};

pub use incidence::{count_incidence, simulation_groupoid, IncidenceCount, IncidenceCrossing, IncidenceProbe};
pub use invariants::{compute_invariants, v1_dot, velocity_balance, SelfSlideInvariants, StratumLabel};
pub use passages::{detect_homoclinic, passage_discs, v_gap, CloudPoint, DiscCloud, HomoclinicRecord, PassageOptions};
pub use sweep::{sweep_doubling, DoublingDisc, HalfLine, LocusCrossing, SweepCell, SweepOptions, SweepResult};

/// Latitudes, character and holonomic factors below this are zero.
pub const ZERO_THRESHOLD: f64 = 1e-7;

pub const DEFAULT_TUBE_RADIUS: f64 = 0.25;

/// Families are evaluated only for `|s| <= S_VALIDITY_FRACTION * radius`.
pub const S_VALIDITY_FRACTION: f64 = 0.1;

/// Tolerance on the finite-difference checks of elementary conditions.
pub const ELEMENTARY_TOLERANCE: f64 = 1e-5;

/// Tolerance on recovered invariants against the requested parameters.
pub const RECOVERY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TubeCoords {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub v: f64,
}

impl TubeCoords {
    pub fn new(x: DVector<f64>, y: DVector<f64>, v: f64) -> Self {
        TubeCoords { x, y, v }
    }

    pub fn zeros(cfg: &MorseModelConfig) -> Self {
        TubeCoords { x: DVector::zeros(cfg.i - 1), y: DVector::zeros(cfg.co_index() - 1), v: 0.0 }
    }

    pub fn max_abs(&self) -> f64 {
        let mx = if self.x.is_empty() { 0.0 } else { self.x.amax() };
        let my = if self.y.is_empty() { 0.0 } else { self.y.amax() };
        mx.max(my).max(self.v.abs())
    }
}

/// `A_s(x, y, v) = (x + s dx, y + s dy, gain v + s + bend s |x|²)`.
///
/// The families built here use `gain = 1`, so that `A_0 = Id`; other gains
/// only serve to build deliberately inconsistent families.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreMap {
    pub drift_x: DVector<f64>,
    pub drift_y: DVector<f64>,
    pub bend: f64,
    pub gain: f64,
}

impl CoreMap {
    pub fn shift(cfg: &MorseModelConfig) -> Self {
        CoreMap { drift_x: DVector::zeros(cfg.i - 1), drift_y: DVector::zeros(cfg.co_index() - 1), bend: 0.0, gain: 1.0 }
    }

    pub fn apply(&self, s: f64, c: &TubeCoords) -> TubeCoords {
        TubeCoords {
            x: &c.x + &self.drift_x * s,
            y: &c.y + &self.drift_y * s,
            v: self.gain * c.v + s + self.bend * s * c.x.norm_squared(),
        }
    }

    pub fn invert(&self, s: f64, c: &TubeCoords) -> TubeCoords {
        let x = &c.x - &self.drift_x * s;
        let v = (c.v - s - self.bend * s * x.norm_squared()) / self.gain;
        TubeCoords { y: &c.y - &self.drift_y * s, x, v }
    }
}

/// Poles, equatorial frames and chart frames on both spheres.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeFrames {
    pub phi0: DVector<f64>,
    pub nu_phi: DVector<f64>,
    pub f_phi: DMatrix<f64>,
    pub g_phi: DMatrix<f64>,
    pub psi0: DVector<f64>,
    pub nu_psi: DVector<f64>,
    pub f_psi: DMatrix<f64>,
    pub g_psi: DMatrix<f64>,
    pub eta_bar: f64,
    pub tau: DVector<f64>,
}

fn unit(v: &DVector<f64>, what: &str) -> Result<DVector<f64>, HolonomyError> {
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(HolonomyError::InvalidFamily(format!("{what} must be a nonzero vector")));
    }
    Ok(v / n)
}

/// `F`: orthonormal frame of `ν^⊥` with `det[ν | F] > 0`. `G`: the image of
/// `F` under the rotation taking `ν` to `center`, a frame of `center^⊥`
/// with the same orientation.
fn equator_frames(center: &DVector<f64>, nu: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = nu.len();
    let mut f = numerics::from_columns(dim, &orthonormal_complement(std::slice::from_ref(nu), dim));
    if f.ncols() > 0 && sign_det(nu, &f) < 0.0 {
        let c = -f.column(0);
        f.set_column(0, &c);
    }
    let g = match rotation_taking(nu, center) {
        Some(r) => &r * &f,
        None => {
            let mut g = f.clone();
            if g.ncols() > 0 {
                let c = -g.column(0);
                g.set_column(0, &c);
            }
            g
        }
    };
    (f, g)
}

/// Pole at latitude `omega` from `center`: `ω center + sqrt(1-ω²) e`, with
/// `e ⊥ center` the first complementary basis vector.
pub fn pole_from_latitude(center: &DVector<f64>, omega: f64) -> Result<DVector<f64>, HolonomyError> {
    let dim = center.len();
    if !(omega.abs() <= 1.0) {
        return Err(HolonomyError::InvalidFamily(format!("latitude {omega} outside [-1, 1]")));
    }
    if dim == 1 {
        if (omega.abs() - 1.0).abs() > 1e-12 {
            return Err(HolonomyError::InvalidFamily(format!(
                "a 0-sphere only has latitudes +1 and -1, got {omega}"
            )));
        }
        return Ok(center * omega.signum());
    }
    let e = orthonormal_complement(std::slice::from_ref(center), dim).remove(0);
    Ok(center * omega + e * (1.0 - omega * omega).max(0.0).sqrt())
}

impl TubeFrames {
    /// Frames aligned with the given poles; no shear of `∂_v` in `chart⁻`.
    pub fn aligned(
        cfg: &MorseModelConfig,
        phi0: &DVector<f64>,
        nu_phi: &DVector<f64>,
        psi0: &DVector<f64>,
        nu_psi: &DVector<f64>,
        eta: f64,
    ) -> Result<Self, HolonomyError> {
        cfg.validate()?;
        if phi0.len() != cfg.i || nu_phi.len() != cfg.i {
            return Err(HolonomyError::InvalidFamily(format!("φ-sphere vectors must have {} entries", cfg.i)));
        }
        if psi0.len() != cfg.co_index() || nu_psi.len() != cfg.co_index() {
            return Err(HolonomyError::InvalidFamily(format!(
                "ψ-sphere vectors must have {} entries",
                cfg.co_index()
            )));
        }
        if !(eta.is_finite() && eta != 0.0) {
            return Err(HolonomyError::InvalidFamily(format!("holonomic factor {eta} must be nonzero")));
        }
        let phi0 = unit(phi0, "a⁻")?;
        let psi0 = unit(psi0, "a⁺")?;
        let nu_phi = unit(nu_phi, "ν_φ")?;
        let nu_psi = unit(nu_psi, "ν_ψ")?;
        let (f_phi, g_phi) = equator_frames(&phi0, &nu_phi);
        let (f_psi, g_psi) = equator_frames(&psi0, &nu_psi);
        Ok(TubeFrames {
            phi0,
            nu_phi,
            f_phi,
            g_phi,
            psi0,
            nu_psi,
            f_psi,
            g_psi,
            eta_bar: 1.0 / eta,
            tau: DVector::zeros(cfg.co_index() - 1),
        })
    }
}

/// Parameters of an elementary crossing path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryParams {
    pub a_minus: Vec<f64>,
    pub a_plus: Vec<f64>,
    pub omega_phi: f64,
    pub omega_psi: f64,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube_radius: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HolonomyFamily {
    cfg: MorseModelConfig,
    frames: TubeFrames,
    core: CoreMap,
    radius: f64,
}

/// Largest deviation found for each elementary condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElementaryReport {
    pub meridian_parallel: f64,
    pub a_plus_velocity: f64,
    pub b_ray: f64,
    pub b_velocity: f64,
}

impl HolonomyFamily {
    pub fn from_parts(
        cfg: MorseModelConfig,
        frames: TubeFrames,
        core: CoreMap,
        radius: f64,
    ) -> Result<Self, HolonomyError> {
        cfg.validate()?;
        if !(radius.is_finite() && radius > 0.0 && radius < 1.0) {
            return Err(HolonomyError::InvalidFamily(format!("tube radius {radius} must lie in (0, 1)")));
        }
        if core.drift_x.len() != cfg.i - 1 || core.drift_y.len() != cfg.co_index() - 1 {
            return Err(HolonomyError::InvalidFamily("core map dimensions do not match the model".into()));
        }
        if frames.tau.len() != cfg.co_index() - 1 {
            return Err(HolonomyError::InvalidFamily("chart shear has the wrong dimension".into()));
        }
        if !(core.gain.is_finite() && core.gain != 0.0) {
            return Err(HolonomyError::InvalidFamily("core map gain must be nonzero".into()));
        }
        Ok(HolonomyFamily { cfg, frames, core, radius })
    }

    pub fn config(&self) -> &MorseModelConfig {
        &self.cfg
    }

    pub fn frames(&self) -> &TubeFrames {
        &self.frames
    }

    pub fn core(&self) -> &CoreMap {
        &self.core
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn s_bound(&self) -> f64 {
        S_VALIDITY_FRACTION * self.radius
    }

    pub fn with_core(mut self, core: CoreMap) -> Result<Self, HolonomyError> {
        self.core = core;
        Self::from_parts(self.cfg, self.frames, self.core, self.radius)
    }

    pub fn with_chart_shear(mut self, tau: DVector<f64>) -> Result<Self, HolonomyError> {
        self.frames.tau = tau;
        Self::from_parts(self.cfg, self.frames, self.core, self.radius)
    }

    pub fn in_box(&self, c: &TubeCoords) -> bool {
        c.max_abs() <= self.radius
    }

    pub fn a_minus(&self) -> ModelPoint {
        self.chart_lower_inv(&TubeCoords::zeros(&self.cfg))
    }

    pub fn a_plus(&self) -> ModelPoint {
        self.chart_upper_inv(&TubeCoords::zeros(&self.cfg))
    }

    pub fn chart_upper_inv(&self, c: &TubeCoords) -> ModelPoint {
        let fr = &self.frames;
        let m = &fr.f_phi * &c.x + &fr.nu_phi * c.v;
        let psi = gnomonic_inverse(&fr.psi0, &fr.g_psi, &c.y);
        let scale = (self.cfg.delta_star + m.norm_squared()).sqrt();
        ModelPoint::new(m, psi * scale)
    }

    /// Tube coordinates of a top-boundary point; `None` outside the chart.
    pub fn chart_upper(&self, p: &ModelPoint) -> Option<TubeCoords> {
        if p.check_dims(&self.cfg).is_err() || !p.on_boundary(&self.cfg, Boundary::Top) {
            return None;
        }
        let fr = &self.frames;
        let psi = p.plus.normalize();
        let y = gnomonic(&fr.psi0, &fr.g_psi, &psi)?;
        let c = TubeCoords { x: fr.f_phi.transpose() * &p.minus, y, v: fr.nu_phi.dot(&p.minus) };
        self.in_box(&c).then_some(c)
    }

    pub fn chart_lower_inv(&self, c: &TubeCoords) -> ModelPoint {
        let fr = &self.frames;
        let phi = gnomonic_inverse(&fr.phi0, &fr.g_phi, &c.x);
        let w = &fr.f_psi * (&c.y + &fr.tau * c.v) + &fr.nu_psi * (fr.eta_bar * c.v);
        let scale = (self.cfg.delta_star + w.norm_squared()).sqrt();
        ModelPoint::new(phi * scale, w)
    }

    /// Tube coordinates of a bottom-boundary point; `None` outside the chart.
    pub fn chart_lower(&self, p: &ModelPoint) -> Option<TubeCoords> {
        if p.check_dims(&self.cfg).is_err() || !p.on_boundary(&self.cfg, Boundary::Bottom) {
            return None;
        }
        let fr = &self.frames;
        let phi = p.minus.normalize();
        let x = gnomonic(&fr.phi0, &fr.g_phi, &phi)?;
        let v = fr.nu_psi.dot(&p.plus) / fr.eta_bar;
        let y = fr.f_psi.transpose() * &p.plus - &fr.tau * v;
        let c = TubeCoords { x, y, v };
        self.in_box(&c).then_some(c)
    }

    fn s_valid(&self, s: f64) -> bool {
        s.is_finite() && s.abs() <= self.s_bound() * (1.0 + 1e-12)
    }

    /// `H_s(p)`, or `None` when `p` or its image leaves the charts.
    pub fn evaluate_holonomy(&self, s: f64, p: &ModelPoint) -> Option<ModelPoint> {
        if !self.s_valid(s) {
            return None;
        }
        let c = self.core.apply(s, &self.chart_lower(p)?);
        self.in_box(&c).then(|| self.chart_upper_inv(&c))
    }

    /// `H_s⁻¹(p)`, or `None` when `p` or its image leaves the charts.
    pub fn inverse_holonomy(&self, s: f64, p: &ModelPoint) -> Option<ModelPoint> {
        if !self.s_valid(s) {
            return None;
        }
        let c = self.core.invert(s, &self.chart_upper(p)?);
        self.in_box(&c).then(|| self.chart_lower_inv(&c))
    }

    /// Latitudes the family was built with (not recovered).
    pub fn construction_latitudes(&self) -> (f64, f64) {
        let fr = &self.frames;
        (fr.phi0.dot(&fr.nu_phi), fr.psi0.dot(&fr.nu_psi))
    }

    /// Finite-difference check of the elementary-path conditions.
    pub fn verify_elementary(&self) -> Result<ElementaryReport, HolonomyError> {
        let inv = compute_invariants(self)?;
        elementary::verify(self, &inv)
    }
}

/// Build an elementary crossing path through the configuration described by
/// `params`, then verify it numerically.
pub fn make_elementary_family(
    cfg: &MorseModelConfig,
    params: &ElementaryParams,
) -> Result<HolonomyFamily, HolonomyError> {
    cfg.validate()?;
    if params.omega_psi.abs() < ZERO_THRESHOLD {
        return Err(HolonomyError::Unsupported(
            "elementary paths need a nonzero ψ-latitude (family lies on the φ-axis)".into(),
        ));
    }
    if !(params.eta.is_finite() && params.eta > 0.0) {
        return Err(HolonomyError::InvalidFamily(format!("holonomic factor {} must be positive", params.eta)));
    }
    for (name, w) in [("omega_phi", params.omega_phi), ("omega_psi", params.omega_psi)] {
        if !(w.abs() <= 1.0) {
            return Err(HolonomyError::InvalidFamily(format!("{name} = {w} outside [-1, 1]")));
        }
    }
    let phi0 = unit(&DVector::from_column_slice(&params.a_minus), "a_minus")?;
    let psi0 = unit(&DVector::from_column_slice(&params.a_plus), "a_plus")?;
    if phi0.len() != cfg.i || psi0.len() != cfg.co_index() {
        return Err(HolonomyError::InvalidFamily(format!(
            "a_minus needs {} entries and a_plus {} entries",
            cfg.i,
            cfg.co_index()
        )));
    }
    let nu_phi = pole_from_latitude(&phi0, params.omega_phi)?;
    let nu_psi = pole_from_latitude(&psi0, params.omega_psi)?;
    let frames = TubeFrames::aligned(cfg, &phi0, &nu_phi, &psi0, &nu_psi, params.eta)?;
    let radius = params.tube_radius.unwrap_or(DEFAULT_TUBE_RADIUS);
    let family = HolonomyFamily::from_parts(*cfg, frames, CoreMap::shift(cfg), radius)?;
    check_elementary(&family, params.omega_phi, params.omega_psi, params.eta)?;
    Ok(family)
}

/// Recover the invariants, compare with targets and verify the elementary
/// conditions.
pub(crate) fn check_elementary(
    family: &HolonomyFamily,
    omega_phi: f64,
    omega_psi: f64,
    eta: f64,
) -> Result<SelfSlideInvariants, HolonomyError> {
    let inv = compute_invariants(family)?;
    for (name, got, want) in
        [("omega_phi", inv.omega_phi, omega_phi), ("omega_psi", inv.omega_psi, omega_psi), ("eta", inv.eta, eta)]
    {
        if (got - want).abs() > RECOVERY_TOLERANCE {
            return Err(HolonomyError::InvalidFamily(format!("recovered {name} = {got}, requested {want}")));
        }
    }
    elementary::verify(family, &inv)?;
    Ok(inv)
}

mod elementary {
    use super::*;
    use crate::numerics::{newton, richardson_central, NewtonOptions, FD_STEP};

    /// Point of `D₁(s)` on the pole axis `R ν_φ` of `{ψ = ψ₀}`, as its
    /// height along `ν_φ`.
    fn a_plus_height(f: &HolonomyFamily, inv: &SelfSlideInvariants, s: f64) -> Option<f64> {
        let nu = inv.delta_phi.normal();
        let perp = numerics::from_columns(nu.len(), &orthonormal_complement(std::slice::from_ref(nu), nu.len()));
        let image = |u: &DVector<f64>| -> Option<ModelPoint> {
            let p = f.chart_lower_inv(&TubeCoords::new(u.clone(), DVector::zeros(f.cfg.co_index() - 1), 0.0));
            f.evaluate_holonomy(s, &p)
        };
        let u = newton(|u| Some(perp.transpose() * image(u)?.minus), DVector::zeros(f.cfg.i - 1), NewtonOptions::default())?;
        Some(nu.dot(&image(&u)?.minus))
    }

    /// Point of `D'₁(s)` whose `x⁺` is parallel to `ψ₀`, as the signed
    /// coordinate `⟨x⁺, ψ₀⟩`, together with its `φ`.
    fn b_point(f: &HolonomyFamily, s: f64) -> Option<(f64, DVector<f64>)> {
        let cfg = f.cfg;
        let psi0 = f.a_plus().plus.normalize();
        let perp = numerics::from_columns(psi0.len(), &orthonormal_complement(std::slice::from_ref(&psi0), psi0.len()));
        let sigma_plus = |th: &DVector<f64>| -> ModelPoint {
            let frame = &perp;
            let dir = gnomonic_inverse(&psi0, frame, th);
            ModelPoint::new(DVector::zeros(cfg.i), dir * cfg.delta_star.sqrt())
        };
        let pre = |th: &DVector<f64>| f.inverse_holonomy(s, &sigma_plus(th));
        let th = newton(
            |th| Some(perp.transpose() * pre(th)?.plus),
            DVector::zeros(cfg.co_index() - 1),
            NewtonOptions::default(),
        )?;
        let p = pre(&th)?;
        Some((psi0.dot(&p.plus), p.minus.normalize()))
    }

    pub(super) fn verify(f: &HolonomyFamily, inv: &SelfSlideInvariants) -> Result<ElementaryReport, HolonomyError> {
        let fail = |condition: u8, detail: String| HolonomyError::NotElementary { condition, detail };
        let cfg = f.cfg;
        let psi0 = f.a_plus().plus.normalize();
        let phi0 = f.a_minus().minus.normalize();
        let nu = inv.delta_phi.normal().clone();
        let s_probe = 0.2 * f.s_bound();
        let h = FD_STEP * f.radius;

        // (1) D₁(s) lies in {ψ = ψ₀}, parallel to Δ^φ.
        let mut dev1: f64 = 0.0;
        for &s in &[-s_probe, s_probe] {
            let height = a_plus_height(f, inv, s).ok_or_else(|| fail(1, format!("no pole point at s = {s}")))?;
            let n = 5;
            for k in 0..(if cfg.i > 1 { n } else { 1 }) {
                let t = if cfg.i > 1 { -0.5 + k as f64 / (n - 1) as f64 } else { 0.0 };
                let u = DVector::from_element(cfg.i - 1, t * f.radius * 0.5);
                let p = f.chart_lower_inv(&TubeCoords::new(u, DVector::zeros(cfg.co_index() - 1), 0.0));
                let Some(img) = f.evaluate_holonomy(s, &p) else { continue };
                dev1 = dev1.max((img.plus.normalize() - &psi0).amax());
                dev1 = dev1.max((nu.dot(&img.minus) - height).abs());
            }
        }
        if dev1 > ELEMENTARY_TOLERANCE {
            return Err(fail(1, format!("D₁(s) leaves the parallel meridian slice by {dev1:e}")));
        }

        // (2) da⁺/ds = 1.
        let vel = richardson_central(|s| a_plus_height(f, inv, s), 0.0, h)
            .ok_or_else(|| fail(2, "a⁺(s) undefined near s = 0".into()))?;
        let dev2 = (vel - 1.0).abs();
        if dev2 > ELEMENTARY_TOLERANCE {
            return Err(fail(2, format!("da⁺/ds = {vel}")));
        }

        // (3) b(s) runs on the ray {(φ₀, r, ψ₀)}, on the side s ω_ψ < 0.
        let mut dev3: f64 = 0.0;
        for &s in &[-s_probe, s_probe] {
            let (coord, phi) = b_point(f, s).ok_or_else(|| fail(3, format!("D'₁({s}) misses the meridian")))?;
            dev3 = dev3.max((phi - &phi0).amax());
            let expected_side = -(s * inv.omega_psi).signum();
            if coord.signum() != expected_side {
                return Err(fail(3, format!("b(s) on the wrong side of a⁻ at s = {s}")));
            }
        }
        if dev3 > ELEMENTARY_TOLERANCE {
            return Err(fail(3, format!("b(s) leaves the ray by {dev3:e}")));
        }

        // (4) db/ds = -1/(η ω_ψ).
        let vb = richardson_central(|s| b_point(f, s).map(|b| b.0), 0.0, h)
            .ok_or_else(|| fail(4, "b(s) undefined near s = 0".into()))?;
        let want = -1.0 / (inv.eta * inv.omega_psi);
        let dev4 = (vb - want).abs();
        if dev4 > ELEMENTARY_TOLERANCE * want.abs().max(1.0) {
            return Err(fail(4, format!("db/ds = {vb}, expected {want}")));
        }

        Ok(ElementaryReport { meridian_parallel: dev1, a_plus_velocity: dev2, b_ray: dev3, b_velocity: dev4 })
    }
}
