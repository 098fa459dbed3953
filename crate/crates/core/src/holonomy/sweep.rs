//! Two-parameter unfolding `X_{s,t}` of a family on `S_g^0` and the
//! detection of homoclinic loci of classes `g, g², …` on an `(s, t)` grid.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::passages::v_gap;
use super::{
    compute_invariants, make_elementary_family, CoreMap, ElementaryParams, HolonomyFamily,
    StratumLabel, TubeFrames,
};
use crate::error::HolonomyError;
use crate::local_model::MorseModelConfig;
use crate::numerics::{bisect, linspace, BISECTION_TOL};

/// Base family on `S_g^0`, tilted in `t` by moving `a⁻` along the meridian
/// through `ν_φ`: `ω_φ(t) = ω_φ + t`, all other data fixed.
#[derive(Debug, Clone)]
pub struct DoublingDisc {
    base: HolonomyFamily,
    omega_phi: f64,
    meridian: DVector<f64>,
    eta: f64,
    label: StratumLabel,
}

impl DoublingDisc {
    pub fn new(cfg: &MorseModelConfig, params: &ElementaryParams) -> Result<Self, HolonomyError> {
        if cfg.i < 2 {
            return Err(HolonomyError::Unsupported("a 0-sphere has no room to move a⁻".into()));
        }
        let base = make_elementary_family(cfg, params)?;
        let inv = compute_invariants(&base)?;
        if !inv.label.is_doubling() {
            return Err(HolonomyError::InvalidFamily(format!("base family lies on {}, not on S_g^0", inv.label)));
        }
        let fr = base.frames();
        let omega_phi = fr.phi0.dot(&fr.nu_phi);
        let meridian = (&fr.phi0 - &fr.nu_phi * omega_phi).normalize();
        Ok(DoublingDisc { omega_phi, meridian, eta: inv.eta, label: inv.label, base })
    }

    pub fn base(&self) -> &HolonomyFamily {
        &self.base
    }

    pub fn label(&self) -> StratumLabel {
        self.label
    }

    pub fn family_at(&self, t: f64) -> Result<HolonomyFamily, HolonomyError> {
        let w = self.omega_phi + t;
        if !(w.abs() < 1.0) {
            return Err(HolonomyError::OutOfDomain(format!("ω_φ + t = {w} leaves (-1, 1)")));
        }
        let fr = self.base.frames();
        let phi = &fr.nu_phi * w + &self.meridian * (1.0 - w * w).sqrt();
        let cfg = *self.base.config();
        let frames = TubeFrames::aligned(&cfg, &phi, &fr.nu_phi, &fr.psi0, &fr.nu_psi, self.eta)?;
        HolonomyFamily::from_parts(cfg, frames, CoreMap::shift(&cfg), self.base.radius())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub s_max: f64,
    pub t_max: f64,
    pub grid: usize,
    /// Highest class power examined is `k_max + 1`.
    pub k_max: usize,
    pub tol: f64,
    /// Worker threads; `None` reads `NOVLAB_THREADS`, else rayon's default.
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { s_max: 0.02, t_max: 0.1, grid: 41, k_max: 2, tol: 1e-9, threads: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfLine {
    Negative,
    Positive,
    Mixed,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub s_lo: f64,
    pub s_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Powers `m` of the classes `g^m` whose locus meets the cell.
    pub classes: Vec<usize>,
}

/// Transverse crossing of the `g²` locus along a fixed-`s` column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocusCrossing {
    pub s: f64,
    pub t: f64,
    /// Sign of `∂_t` of the return gap at the crossing.
    pub slope: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub base_label: StratumLabel,
    pub s_values: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Label of `X_{0,t}` for each `t`.
    pub t_labels: Vec<Option<StratumLabel>>,
    /// `gaps[j][i][m-1]`: return gap of class `g^m` at `(s_i, t_j)`.
    pub gaps: Vec<Vec<Vec<Option<f64>>>>,
    pub cells: Vec<SweepCell>,
    pub g2_side: HalfLine,
    pub crossings: Vec<LocusCrossing>,
}

impl SweepResult {
    pub fn flagged(&self, power: usize) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(move |c| c.classes.contains(&power))
    }
}

fn thread_count(opts: &SweepOptions) -> Option<usize> {
    opts.threads
        .or_else(|| std::env::var("NOVLAB_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
}

fn node_gaps(f: Option<&HolonomyFamily>, s: f64, k_max: usize) -> Vec<Option<f64>> {
    (0..=k_max).map(|k| f.and_then(|f| v_gap(f, s, k))).collect()
}

pub fn sweep_doubling(disc: &DoublingDisc, opts: SweepOptions) -> Result<SweepResult, HolonomyError> {
    if opts.grid < 2 {
        return Err(HolonomyError::InvalidFamily("sweep grid needs at least 2 nodes per axis".into()));
    }
    if !(opts.s_max > 0.0 && opts.s_max <= disc.base.s_bound()) {
        return Err(HolonomyError::OutOfDomain(format!("s range {} exceeds {}", opts.s_max, disc.base.s_bound())));
    }
    if !(opts.t_max > 0.0 && (disc.omega_phi.abs() + opts.t_max) < 1.0) {
        return Err(HolonomyError::OutOfDomain(format!("t range {} moves ω_φ out of (-1, 1)", opts.t_max)));
    }
    let s_values = linspace(-opts.s_max, opts.s_max, opts.grid);
    let t_values = linspace(-opts.t_max, opts.t_max, opts.grid);
    let families: Vec<HolonomyFamily> = t_values.iter().map(|&t| disc.family_at(t)).collect::<Result<_, _>>()?;
    let t_labels = families.iter().map(|f| compute_invariants(f).ok().map(|inv| inv.label)).collect();

    let run = || -> Vec<Vec<Vec<Option<f64>>>> {
        families
            .par_iter()
            .map(|f| s_values.par_iter().map(|&s| node_gaps(Some(f), s, opts.k_max)).collect())
            .collect()
    };
    let gaps = match thread_count(&opts) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HolonomyError::InvalidFamily(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut cells = Vec::new();
    for j in 0..opts.grid - 1 {
        for i in 0..opts.grid - 1 {
            let mut classes = Vec::new();
            for m in 0..=opts.k_max {
                let corners = [gaps[j][i][m], gaps[j][i + 1][m], gaps[j + 1][i][m], gaps[j + 1][i + 1][m]];
                if corners.iter().any(Option::is_none) {
                    continue;
                }
                let vals: Vec<f64> = corners.iter().map(|c| c.unwrap()).collect();
                let touches = vals.iter().any(|v| v.abs() <= opts.tol);
                let changes = vals.iter().any(|v| *v > 0.0) && vals.iter().any(|v| *v < 0.0);
                if touches || changes {
                    classes.push(m + 1);
                }
            }
            cells.push(SweepCell {
                s_lo: s_values[i],
                s_hi: s_values[i + 1],
                t_lo: t_values[j],
                t_hi: t_values[j + 1],
                classes,
            });
        }
    }

    let g2: Vec<&SweepCell> = cells.iter().filter(|c| c.classes.contains(&2)).collect();
    let g2_side = if g2.is_empty() {
        HalfLine::Absent
    } else if g2.iter().all(|c| c.s_hi <= 0.0) {
        HalfLine::Negative
    } else if g2.iter().all(|c| c.s_lo >= 0.0) {
        HalfLine::Positive
    } else {
        HalfLine::Mixed
    };

    let mut crossings = Vec::new();
    for (i, &s) in s_values.iter().enumerate() {
        for j in 0..opts.grid - 1 {
            let (Some(a), Some(b)) = (gaps[j][i][1], gaps[j + 1][i][1]) else { continue };
            let (ta, tb) = (t_values[j], t_values[j + 1]);
            let t = if a == 0.0 {
                Some(ta)
            } else if b != 0.0 && (a > 0.0) != (b > 0.0) {
                bisect(|t| v_gap(&disc.family_at(t).ok()?, s, 1), ta, a, tb, BISECTION_TOL)
            } else {
                None
            };
            if let Some(t) = t {
                let slope = if b > a { 1 } else { -1 };
                if crossings.last().is_none_or(|c: &LocusCrossing| c.s != s || c.t != t) {
                    crossings.push(LocusCrossing { s, t, slope });
                }
            }
        }
    }

    Ok(SweepResult { base_label: disc.label, s_values, t_values, t_labels, gaps, cells, g2_side, crossings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(wphi: f64, wpsi: f64) -> DoublingDisc {
        let cfg = MorseModelConfig::new(4, 2, 1.0, 1.0).unwrap();
        DoublingDisc::new(
            &cfg,
            &ElementaryParams {
                a_minus: vec![1.0, 0.0],
                a_plus: vec![0.0, 1.0],
                omega_phi: wphi,
                omega_psi: wpsi,
                eta: 1.0,
                tube_radius: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn tilt_moves_latitude_only() {
        let d = disc(-0.5, 0.5);
        let f = d.family_at(0.05).unwrap();
        let inv = compute_invariants(&f).unwrap();
        assert!((inv.omega_phi + 0.45).abs() < 1e-9);
        assert!((inv.omega_psi - 0.5).abs() < 1e-9);
        assert!((inv.chi - 0.05).abs() < 1e-9);
    }

    #[test]
    fn requires_doubling_base() {
        let cfg = MorseModelConfig::new(4, 2, 1.0, 1.0).unwrap();
        let p = ElementaryParams {
            a_minus: vec![1.0, 0.0],
            a_plus: vec![0.0, 1.0],
            omega_phi: 0.5,
            omega_psi: 0.3,
            eta: 1.0,
            tube_radius: None,
        };
        assert!(matches!(DoublingDisc::new(&cfg, &p), Err(HolonomyError::InvalidFamily(_))));
    }

    #[test]
    fn small_sweep() {
        let d = disc(-0.5, 0.5);
        let r = sweep_doubling(&d, SweepOptions { grid: 5, threads: Some(2), ..Default::default() }).unwrap();
        assert_eq!(r.g2_side, HalfLine::Negative);
        assert!(r.flagged(3).next().is_none());
        assert!(r.flagged(2).all(|c| c.t_lo <= 0.0 && c.t_hi >= 0.0));
        assert!(r.flagged(1).all(|c| c.s_lo == 0.0 || c.s_hi == 0.0));
    }
}
