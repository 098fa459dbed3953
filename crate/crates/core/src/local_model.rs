//! The standard Morse model around a zero of index `i` in dimension `n`.
//!
//! `Q = -|x⁻|² + |x⁺|²`, gradient flow `x⁻ e^{2t}`, `x⁺ e^{-2t}`. The top
//! boundary is `{Q = δ*}`, the bottom boundary `{Q = -δ*}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Points with `|x⁻|` below this are on the co-sphere for [`ModelPoint::descend`].
pub const CO_SPHERE_THRESHOLD: f64 = 1e-9;

/// Relative tolerance for boundary membership checks.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorseModelConfig {
    pub n: usize,
    pub i: usize,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub delta_star: f64,
}

impl MorseModelConfig {
    pub fn new(n: usize, i: usize, delta: f64, delta_star: f64) -> Result<Self, ModelError> {
        let cfg = MorseModelConfig { n, i, delta, delta_star };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 2 {
            return Err(ModelError::InvalidConfig(format!("n = {} must be at least 2", self.n)));
        }
        if self.i < 1 || self.i > self.n - 1 {
            return Err(ModelError::InvalidConfig(format!("index i = {} outside [1, {}]", self.i, self.n - 1)));
        }
        for (name, v) in [("delta", self.delta), ("delta_star", self.delta_star)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// Dimension of `x⁺`.
    pub fn co_index(&self) -> usize {
        self.n - self.i
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Top,
    Bottom,
}

/// Radial-multispherical coordinates `(φ, r, ψ)` of a boundary point.
/// A sphere coordinate is `None` where it is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct Spherical {
    pub phi: Option<DVector<f64>>,
    pub r: f64,
    pub psi: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint {
    pub minus: DVector<f64>,
    pub plus: DVector<f64>,
}

fn unit(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 0.0).then(|| v / n)
}

impl ModelPoint {
    pub fn new(minus: DVector<f64>, plus: DVector<f64>) -> Self {
        ModelPoint { minus, plus }
    }

    pub fn from_slices(minus: &[f64], plus: &[f64]) -> Self {
        ModelPoint { minus: DVector::from_column_slice(minus), plus: DVector::from_column_slice(plus) }
    }

    pub fn origin(cfg: &MorseModelConfig) -> Self {
        ModelPoint { minus: DVector::zeros(cfg.i), plus: DVector::zeros(cfg.co_index()) }
    }

    pub fn check_dims(&self, cfg: &MorseModelConfig) -> Result<(), ModelError> {
        if self.minus.len() != cfg.i || self.plus.len() != cfg.co_index() {
            return Err(ModelError::Dimension(format!(
                "point has ({}, {}) coordinates, model needs ({}, {})",
                self.minus.len(),
                self.plus.len(),
                cfg.i,
                cfg.co_index()
            )));
        }
        Ok(())
    }

    /// Point of the top boundary with `x⁻ = r φ`.
    pub fn top_from_spherical(cfg: &MorseModelConfig, phi: &DVector<f64>, r: f64, psi: &DVector<f64>) -> Self {
        ModelPoint { minus: phi * r, plus: psi * (cfg.delta_star + r * r).sqrt() }
    }

    /// Point of the bottom boundary with `x⁺ = r ψ`.
    pub fn bottom_from_spherical(cfg: &MorseModelConfig, phi: &DVector<f64>, r: f64, psi: &DVector<f64>) -> Self {
        ModelPoint { minus: phi * (cfg.delta_star + r * r).sqrt(), plus: psi * r }
    }

    pub fn spherical(&self, boundary: Boundary) -> Spherical {
        let r = match boundary {
            Boundary::Top => self.minus.norm(),
            Boundary::Bottom => self.plus.norm(),
        };
        Spherical { phi: unit(&self.minus), r, psi: unit(&self.plus) }
    }

    pub fn q_value(&self) -> f64 {
        -self.minus.norm_squared() + self.plus.norm_squared()
    }

    pub fn flow(&self, t: f64) -> Self {
        ModelPoint { minus: &self.minus * (2.0 * t).exp(), plus: &self.plus * (-2.0 * t).exp() }
    }

    pub fn in_model(&self, cfg: &MorseModelConfig) -> bool {
        let q = self.q_value();
        q >= -cfg.delta_star
            && q <= cfg.delta_star
            && self.minus.norm_squared() * self.plus.norm_squared() <= cfg.delta * cfg.delta_star
    }

    pub fn on_boundary(&self, cfg: &MorseModelConfig, boundary: Boundary) -> bool {
        let target = match boundary {
            Boundary::Top => cfg.delta_star,
            Boundary::Bottom => -cfg.delta_star,
        };
        (self.q_value() - target).abs() <= BOUNDARY_TOLERANCE * cfg.delta_star.max(1.0)
    }

    /// Flow a top-boundary point down to the bottom boundary.
    pub fn descend(&self, cfg: &MorseModelConfig) -> Result<Self, ModelError> {
        self.check_dims(cfg)?;
        if !self.on_boundary(cfg, Boundary::Top) {
            return Err(ModelError::NotOnBoundary(format!("Q = {} but expected {}", self.q_value(), cfg.delta_star)));
        }
        let rm = self.minus.norm();
        if rm < CO_SPHERE_THRESHOLD {
            return Err(ModelError::OnCoSphere);
        }
        let a = rm * rm;
        let b = self.plus.norm_squared();
        let ds = cfg.delta_star;
        // e^{4t} solves a E^2 - δ* E - b = 0
        let e4 = (ds + (ds * ds + 4.0 * a * b).sqrt()) / (2.0 * a);
        let s = e4.sqrt();
        Ok(ModelPoint { minus: &self.minus * s, plus: &self.plus / s })
    }

    /// Flow a bottom-boundary point backwards up to the top boundary.
    pub fn ascend(&self, cfg: &MorseModelConfig) -> Result<Self, ModelError> {
        self.check_dims(cfg)?;
        if !self.on_boundary(cfg, Boundary::Bottom) {
            return Err(ModelError::NotOnBoundary(format!("Q = {} but expected {}", self.q_value(), -cfg.delta_star)));
        }
        let rp = self.plus.norm();
        if rp < CO_SPHERE_THRESHOLD {
            return Err(ModelError::OnCoSphere);
        }
        let a = self.minus.norm_squared();
        let b = rp * rp;
        let ds = cfg.delta_star;
        let f4 = (ds + (ds * ds + 4.0 * a * b).sqrt()) / (2.0 * b);
        let s = f4.sqrt();
        Ok(ModelPoint { minus: &self.minus / s, plus: &self.plus * s })
    }
}

/// A sphere with a preferred co-oriented equator, given by its unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct LatitudeFrame {
    normal: DVector<f64>,
}

impl LatitudeFrame {
    pub fn new(normal: DVector<f64>) -> Result<Self, ModelError> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(ModelError::InvalidConfig("latitude normal must be nonzero".into()));
        }
        Ok(LatitudeFrame { normal: normal / n })
    }

    /// Ambient dimension `k` of the sphere `S^{k-1}`.
    pub fn ambient_dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn north(&self) -> DVector<f64> {
        self.normal.clone()
    }

    pub fn south(&self) -> DVector<f64> {
        -&self.normal
    }

    /// `⟨θ, ν⟩`, clamped to `[-1, 1]`.
    pub fn latitude(&self, theta: &DVector<f64>) -> f64 {
        self.normal.dot(theta).clamp(-1.0, 1.0)
    }

    pub fn on_equator(&self, theta: &DVector<f64>, tol: f64) -> bool {
        self.latitude(theta).abs() <= tol
    }
}
