//! Incidence of a lower descending disc with the unstable discs `C_k(s)`,
//! counted in the truncated Novikov ring.

use std::sync::Arc;

use nalgebra::DVector;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::passages::Chain;
use super::{compute_invariants, HolonomyFamily, ZERO_THRESHOLD};
use crate::error::HolonomyError;
use crate::groupoid::{Arrow, GeneratorSpec, GroupoidGraph, ObjectSpec};
use crate::novikov::{RingElement, TruncationContext};
use crate::numerics::{self, jacobian_central, orthonormal_complement};

/// Fibre `{φ = b, |x⁺| <= radius}` of the bottom boundary: the trace of the
/// descending disc of a lower critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceProbe {
    pub b: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncidenceCrossing {
    pub k: usize,
    pub orientation: i8,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceCount {
    pub element: RingElement,
    pub crossings: Vec<IncidenceCrossing>,
}

/// Groupoid with `p` of index `i`, `q` of index `i-1`, a loop `g` at `p`
/// with `u = -1` and `gamma: p → q` with `u = -1/2`.
pub fn simulation_groupoid(i: usize) -> (Arc<GroupoidGraph>, Arrow, Arrow) {
    let graph = GroupoidGraph::new(
        vec![
            ObjectSpec { name: "p".into(), morse_index: i },
            ObjectSpec { name: "q".into(), morse_index: i.saturating_sub(1) },
        ],
        vec![
            GeneratorSpec { name: "g".into(), source: "p".into(), target: "p".into(), u_value: -1.0 },
            GeneratorSpec { name: "gamma".into(), source: "p".into(), target: "q".into(), u_value: -0.5 },
        ],
    )
    .expect("fixed groupoid is valid");
    let g = graph.generator_arrow(graph.generator_id("g").expect("g"));
    let gamma = graph.generator_arrow(graph.generator_id("gamma").expect("gamma"));
    (graph, g, gamma)
}

/// `[Γ] + Σ_k ε_k g^k [Γ]` over the crossings of `C_k(s)` with the probe
/// fibre, for every `k` with `g^k Γ` above the truncation.
pub fn count_incidence(
    f: &HolonomyFamily,
    s: f64,
    probe: &IncidenceProbe,
    ctx: &TruncationContext,
    g: &Arrow,
    gamma: &Arrow,
) -> Result<IncidenceCount, HolonomyError> {
    let cfg = *f.config();
    if !(s.is_finite() && s.abs() <= f.s_bound()) {
        return Err(HolonomyError::OutOfDomain(format!("|s| = {} exceeds {}", s.abs(), f.s_bound())));
    }
    if probe.b.len() != cfg.i {
        return Err(HolonomyError::InvalidFamily(format!("probe direction needs {} entries", cfg.i)));
    }
    if !(probe.radius.is_finite() && probe.radius > 0.0) {
        return Err(HolonomyError::InvalidFamily("probe radius must be positive".into()));
    }
    let b = DVector::from_column_slice(&probe.b);
    let norm = b.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(HolonomyError::InvalidFamily("probe direction must be nonzero".into()));
    }
    let b = b / norm;
    let inv = compute_invariants(f)?;
    if inv.delta_phi.latitude(&b).abs() < ZERO_THRESHOLD {
        return Err(HolonomyError::NonGeneric("probe lies on the preferred equator".into()));
    }
    if !g.is_loop() || gamma.source() != g.source() {
        return Err(HolonomyError::InvalidFamily("g must be a loop at the source of gamma".into()));
    }

    let chain = Chain::new(f, s);
    let mut element = RingElement::monomial(ctx, gamma.clone(), 1)?;
    let mut crossings = Vec::new();
    let perp = numerics::from_columns(cfg.i, &orthonormal_complement(std::slice::from_ref(&b), cfg.i));
    for k in 1.. {
        let arrow = g.pow(k as i64)?.compose(gamma)?.expect("g^k ends where gamma starts");
        if !ctx.keeps(&arrow) {
            break;
        }
        let Some((u, point)) = chain.over_direction(k, &b) else { continue };
        let r = point.plus.norm();
        if r > probe.radius {
            continue;
        }
        if cfg.i > 1 {
            let jac = jacobian_central(&mut |w: &DVector<f64>| Some(perp.transpose() * chain.upper(k, w)?.minus), &u, 1e-7)
                .ok_or_else(|| HolonomyError::NonGeneric(format!("C_{k} ends at the probe fibre")))?;
            let sv = jac.singular_values();
            if !(sv.min() > 1e-9 * sv.max()) {
                return Err(HolonomyError::NonGeneric(format!("C_{k} is tangent to the probe fibre")));
            }
        }
        let orientation = chain
            .pi_orientation(k, &u)
            .ok_or_else(|| HolonomyError::NonGeneric(format!("orientation of C_{k} undefined at the crossing")))?;
        crossings.push(IncidenceCrossing { k, orientation, r });
        element = element.add(&RingElement::monomial(ctx, arrow, BigInt::from(orientation))?)?;
    }
    Ok(IncidenceCount { element, crossings })
}
