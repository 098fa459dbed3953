//! Self-slide rewrite rules.
//!
//! Crossing the self-slide stratum of a loop `g` at `p` multiplies every row
//! entry `<p,q>` on the left by a unit `λ` and every column entry `<q',p>`
//! on the right by `λ⁻¹`.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::complex::NovikovComplex;
use crate::error::SlideError;
use crate::groupoid::{Arrow, GroupoidGraph, ObjectId};
use crate::novikov::{RingElement, TruncationContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Character {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingSign {
    Positive,
    Negative,
}

impl CrossingSign {
    pub fn flipped(self) -> Self {
        match self {
            CrossingSign::Positive => CrossingSign::Negative,
            CrossingSign::Negative => CrossingSign::Positive,
        }
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Character::Plus => "+",
            Character::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingEvent {
    pub g: Arrow,
    pub character: Character,
    pub sign: CrossingSign,
}

impl CrossingEvent {
    pub fn new(g: Arrow, character: Character, sign: CrossingSign) -> Self {
        CrossingEvent { g, character, sign }
    }

    pub fn base(&self) -> ObjectId {
        self.g.source()
    }

    pub fn flipped(&self) -> Self {
        CrossingEvent { g: self.g.clone(), character: self.character, sign: self.sign.flipped() }
    }

    pub fn validate(&self, ctx: &TruncationContext) -> Result<(), SlideError> {
        let graph = ctx.graph();
        if !graph.owns(&self.g) {
            return Err(crate::error::GroupoidError::ForeignArrow.into());
        }
        if !self.g.is_loop() {
            return Err(SlideError::NotALoop);
        }
        let u = graph.u_value(&self.g);
        if u >= 0.0 {
            return Err(SlideError::NonNegativeLoop(u));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlideScript {
    pub events: Vec<CrossingEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDoc {
    pub g: String,
    pub character: Character,
    pub sign: CrossingSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptDoc {
    pub events: Vec<EventDoc>,
}

impl SlideScript {
    pub fn from_doc(doc: &ScriptDoc, graph: &GroupoidGraph) -> Result<Self, SlideError> {
        let mut events = Vec::with_capacity(doc.events.len());
        for (k, e) in doc.events.iter().enumerate() {
            let g = graph.parse_arrow(&e.g).map_err(|err| SlideError::Document(format!("events[{k}].g: {err}")))?;
            events.push(CrossingEvent::new(g, e.character, e.sign));
        }
        Ok(SlideScript { events })
    }

    pub fn to_doc(&self, graph: &GroupoidGraph) -> ScriptDoc {
        ScriptDoc {
            events: self
                .events
                .iter()
                .map(|e| EventDoc { g: graph.render_arrow(&e.g), character: e.character, sign: e.sign })
                .collect(),
        }
    }

    /// Positive crossing of `S_g⁻`, negative crossing of `S_g⁺`, positive
    /// crossing of `S_{g²}⁺`.
    pub fn doubling(g: &Arrow) -> Result<Self, SlideError> {
        let g2 = g.pow(2)?;
        Ok(SlideScript {
            events: vec![
                CrossingEvent::new(g.clone(), Character::Minus, CrossingSign::Positive),
                CrossingEvent::new(g.clone(), Character::Plus, CrossingSign::Negative),
                CrossingEvent::new(g2, Character::Plus, CrossingSign::Positive),
            ],
        })
    }
}

/// `sum_j s^j g^j` over the powers that survive truncation.
fn signed_powers(g: &Arrow, ctx: &TruncationContext, sign: i64) -> Result<RingElement, SlideError> {
    let step = RingElement::monomial(ctx, g.clone(), sign)?;
    let mut power = RingElement::identity(ctx, g.source());
    let mut acc = RingElement::zero(ctx);
    while !power.is_zero() {
        acc = acc.add(&power)?;
        power = power.mul(&step)?;
    }
    Ok(acc)
}

/// The unit multiplying rows of `p` when crossing the stratum of `e.g`.
pub fn self_slide_factor(e: &CrossingEvent, ctx: &TruncationContext) -> Result<RingElement, SlideError> {
    e.validate(ctx)?;
    let one_p = RingElement::identity(ctx, e.base());
    let g = RingElement::monomial(ctx, e.g.clone(), 1)?;
    Ok(match (e.character, e.sign) {
        (Character::Plus, CrossingSign::Positive) => RingElement::geometric_series(&e.g, ctx)?,
        (Character::Minus, CrossingSign::Positive) => one_p.add(&g)?,
        (Character::Plus, CrossingSign::Negative) => one_p.sub(&g)?,
        (Character::Minus, CrossingSign::Negative) => signed_powers(&e.g, ctx, -1)?,
    })
}

/// Rewrite a complex across one crossing. The input must satisfy
/// `∂² ≡ 0 (mod L)`.
pub fn apply_self_slide(c: &NovikovComplex, e: &CrossingEvent) -> Result<NovikovComplex, SlideError> {
    let ctx = c.context();
    e.validate(ctx)?;
    if let Some(v) = c.check_d_squared().violation {
        let graph = ctx.graph();
        return Err(crate::error::ComplexError::DSquaredFails {
            p: graph.object_name(v.p).to_string(),
            r: graph.object_name(v.r).to_string(),
        }
        .into());
    }
    let p = e.base();
    let lambda = self_slide_factor(e, ctx)?;
    let lambda_inv = lambda.unit_inverse()?;
    let mut out = c.clone();
    let entries: Vec<_> = c.incidences().map(|(k, v)| (*k, v.clone())).collect();
    for ((a, b), v) in entries {
        if a == p {
            out = out.set_incidence(a, b, lambda.mul(&v)?)?;
        } else if b == p {
            out = out.set_incidence(a, b, v.mul(&lambda_inv)?)?;
        }
    }
    Ok(out)
}

/// `(1 - g²)⁻¹ = 1 + g² + g⁴ + ...`
pub fn doubling_factor(g: &Arrow, ctx: &TruncationContext) -> Result<RingElement, SlideError> {
    CrossingEvent::new(g.clone(), Character::Plus, CrossingSign::Positive).validate(ctx)?;
    let g2 = g.pow(2)?;
    let a = RingElement::from_terms(ctx, [(ctx.graph().identity(g.source()), BigInt::from(1)), (g2, BigInt::from(-1))])?;
    Ok(a.unit_inverse()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopAudit {
    pub consistent: bool,
    pub residual: RingElement,
    pub base: Option<ObjectId>,
}

/// Ordered product of the factors of a script, compared with `1_p`.
pub fn loop_consistency(s: &SlideScript, ctx: &TruncationContext) -> Result<LoopAudit, SlideError> {
    let Some(first) = s.events.first() else {
        let one = RingElement::one(ctx);
        return Ok(LoopAudit { consistent: true, residual: one, base: None });
    };
    let p = first.base();
    if s.events.iter().any(|e| e.base() != p) {
        return Err(SlideError::MixedBasePoints);
    }
    let one_p = RingElement::identity(ctx, p);
    let mut product = one_p.clone();
    for e in &s.events {
        product = product.mul(&self_slide_factor(e, ctx)?)?;
    }
    Ok(LoopAudit { consistent: product == one_p, residual: product, base: Some(p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupoid::{GeneratorSpec, ObjectSpec};
    use std::sync::Arc;

    fn graph(ug: f64) -> Arc<GroupoidGraph> {
        GroupoidGraph::new(
            vec![
                ObjectSpec { name: "qq".into(), morse_index: 2 },
                ObjectSpec { name: "p".into(), morse_index: 1 },
                ObjectSpec { name: "q".into(), morse_index: 0 },
                ObjectSpec { name: "p2".into(), morse_index: 1 },
            ],
            vec![
                GeneratorSpec { name: "g".into(), source: "p".into(), target: "p".into(), u_value: ug },
                GeneratorSpec { name: "e2".into(), source: "p2".into(), target: "q".into(), u_value: -0.25 },
                GeneratorSpec { name: "e".into(), source: "p".into(), target: "q".into(), u_value: -0.5 },
                GeneratorSpec { name: "f".into(), source: "qq".into(), target: "p".into(), u_value: -0.5 },
                GeneratorSpec { name: "k".into(), source: "q".into(), target: "p".into(), u_value: -0.5 },
            ],
        )
        .unwrap()
    }

    fn el(ctx: &TruncationContext, terms: &[(&str, i64)]) -> RingElement {
        let g = ctx.graph().clone();
        RingElement::from_terms(ctx, terms.iter().map(|(a, c)| (g.parse_arrow(a).unwrap(), BigInt::from(*c)))).unwrap()
    }

    fn event(ctx: &TruncationContext, w: &str, c: Character, s: CrossingSign) -> CrossingEvent {
        CrossingEvent::new(ctx.graph().parse_arrow(w).unwrap(), c, s)
    }

    #[test]
    fn factors() {
        let ctx = TruncationContext::new(graph(-1.0), 3.5).unwrap();
        let f = |c, s| self_slide_factor(&event(&ctx, "g", c, s), &ctx).unwrap().render();
        assert_eq!(f(Character::Minus, CrossingSign::Positive), "1_p + g");
        assert_eq!(f(Character::Plus, CrossingSign::Positive), "1_p + g + g^2 + g^3");
        assert_eq!(f(Character::Plus, CrossingSign::Negative), "1_p - g");
        assert_eq!(f(Character::Minus, CrossingSign::Negative), "1_p - g + g^2 - g^3");
    }

    #[test]
    fn factor_rejects_bad_loops() {
        let ctx = TruncationContext::new(graph(0.0), 3.5).unwrap();
        let e = event(&ctx, "g", Character::Minus, CrossingSign::Positive);
        assert_eq!(self_slide_factor(&e, &ctx), Err(SlideError::NonNegativeLoop(0.0)));
        let ne = event(&ctx, "e", Character::Minus, CrossingSign::Positive);
        assert_eq!(self_slide_factor(&ne, &ctx), Err(SlideError::NotALoop));
    }

    // <qq,p><p,q> + <qq,p2><p2,q> = f.e - f.e.e2^-1.e2 = 0
    fn small_complex(ctx: &TruncationContext) -> NovikovComplex {
        NovikovComplex::new(ctx)
            .set_incidence(1, 2, el(ctx, &[("e", 1)]))
            .unwrap()
            .set_incidence(0, 1, el(ctx, &[("f", 1)]))
            .unwrap()
            .set_incidence(3, 2, el(ctx, &[("e2", 1)]))
            .unwrap()
            .set_incidence(0, 3, el(ctx, &[("f.e.e2^-1", -1)]))
            .unwrap()
    }

    #[test]
    fn rows_and_columns() {
        let ctx = TruncationContext::new(graph(-1.0), 3.5).unwrap();
        let c = small_complex(&ctx);
        let e = event(&ctx, "g", Character::Minus, CrossingSign::Positive);
        let d = apply_self_slide(&c, &e).unwrap();
        assert_eq!(d.incidence(1, 2).render(), "e + g.e");
        // f (1 - g + g^2 - ...) with u(f) = -0.5: f.g^3 has u = -3.5, dropped
        assert_eq!(d.incidence(0, 1).render(), "f - f.g + f.g^2");
        assert!(d.check_d_squared().passed());
    }

    #[test]
    fn composite_factor_on_rows() {
        let ctx = TruncationContext::new(graph(-1.0), 3.5).unwrap();
        let c = small_complex(&ctx);
        let a = apply_self_slide(&c, &event(&ctx, "g", Character::Minus, CrossingSign::Positive)).unwrap();
        let b = apply_self_slide(&a, &event(&ctx, "g", Character::Plus, CrossingSign::Negative)).unwrap();
        // (1 - g)(1 + g) e = e - g^2 e
        assert_eq!(b.incidence(1, 2), el(&ctx, &[("e", 1), ("g^2.e", -1)]));
    }

    #[test]
    fn rows_only_without_columns() {
        let ctx = TruncationContext::new(graph(-1.0), 3.5).unwrap();
        let c = NovikovComplex::new(&ctx).set_incidence(1, 2, el(&ctx, &[("e", 1)])).unwrap();
        let d = apply_self_slide(&c, &event(&ctx, "g", Character::Plus, CrossingSign::Negative)).unwrap();
        assert_eq!(d.incidence(1, 2).render(), "e - g.e");
        assert_eq!(d.incidences().count(), 1);
    }

    #[test]
    fn apply_requires_valid_complex() {
        let g = GroupoidGraph::new(
            vec![
                ObjectSpec { name: "a".into(), morse_index: 2 },
                ObjectSpec { name: "b".into(), morse_index: 1 },
                ObjectSpec { name: "c".into(), morse_index: 0 },
            ],
            vec![
                GeneratorSpec { name: "x".into(), source: "a".into(), target: "b".into(), u_value: -1.0 },
                GeneratorSpec { name: "y".into(), source: "b".into(), target: "c".into(), u_value: -1.0 },
                GeneratorSpec { name: "l".into(), source: "b".into(), target: "b".into(), u_value: -1.0 },
            ],
        )
        .unwrap();
        let ctx = TruncationContext::new(g, 5.0).unwrap();
        let c = NovikovComplex::new(&ctx)
            .set_incidence(0, 1, el(&ctx, &[("x", 1)]))
            .unwrap()
            .set_incidence(1, 2, el(&ctx, &[("y", 1)]))
            .unwrap();
        let e = event(&ctx, "l", Character::Minus, CrossingSign::Positive);
        assert!(matches!(apply_self_slide(&c, &e), Err(SlideError::Complex(_))));
    }

    #[test]
    fn doubling_factors() {
        let ctx = TruncationContext::new(graph(-1.0), 5.0).unwrap();
        let g = ctx.graph().parse_arrow("g").unwrap();
        let m = doubling_factor(&g, &ctx).unwrap();
        assert_eq!(m.render(), "1_p + g^2 + g^4");
        let back = m.mul(&el(&ctx, &[("1_p", 1), ("g^2", -1)])).unwrap();
        assert_eq!(back, el(&ctx, &[("1_p", 1)]));
        let ctx3 = TruncationContext::new(graph(-3.0), 5.0).unwrap();
        let g3 = ctx3.graph().parse_arrow("g").unwrap();
        assert_eq!(doubling_factor(&g3, &ctx3).unwrap().render(), "1_p");
    }

    #[test]
    fn audits() {
        let ctx = TruncationContext::new(graph(-1.0), 5.0).unwrap();
        let g = ctx.graph().parse_arrow("g").unwrap();
        let audit = loop_consistency(&SlideScript::doubling(&g).unwrap(), &ctx).unwrap();
        assert!(audit.consistent);
        assert_eq!(audit.residual.render(), "1_p");

        let empty = loop_consistency(&SlideScript::default(), &ctx).unwrap();
        assert!(empty.consistent);
        assert_eq!(empty.residual, RingElement::one(&ctx));

        let single = SlideScript { events: vec![event(&ctx, "g", Character::Minus, CrossingSign::Positive)] };
        let audit = loop_consistency(&single, &ctx).unwrap();
        assert!(!audit.consistent);
        assert_eq!(audit.residual.render(), "1_p + g");
    }

    #[test]
    fn mixed_bases_rejected() {
        let g = GroupoidGraph::new(
            vec![ObjectSpec { name: "a".into(), morse_index: 0 }, ObjectSpec { name: "b".into(), morse_index: 0 }],
            vec![
                GeneratorSpec { name: "x".into(), source: "a".into(), target: "a".into(), u_value: -1.0 },
                GeneratorSpec { name: "y".into(), source: "b".into(), target: "b".into(), u_value: -1.0 },
            ],
        )
        .unwrap();
        let ctx = TruncationContext::new(g, 5.0).unwrap();
        let s = SlideScript {
            events: vec![
                event(&ctx, "x", Character::Minus, CrossingSign::Positive),
                event(&ctx, "y", Character::Minus, CrossingSign::Positive),
            ],
        };
        assert_eq!(loop_consistency(&s, &ctx), Err(SlideError::MixedBasePoints));
    }

    #[test]
    fn script_documents() {
        let ctx = TruncationContext::new(graph(-1.0), 5.0).unwrap();
        let text = r#"{"events":[{"g":"g","character":"minus","sign":"positive"},
                                 {"g":"g^2","character":"plus","sign":"negative"}]}"#;
        let doc: ScriptDoc = serde_json::from_str(text).unwrap();
        let s = SlideScript::from_doc(&doc, ctx.graph()).unwrap();
        assert_eq!(s.events[1].g, ctx.graph().parse_arrow("g.g").unwrap());
        assert_eq!(s.to_doc(ctx.graph()), doc);
    }
}
