//! Truncated Novikov ring arithmetic.
//!
//! A [`RingElement`] is a finite integer combination of arrows, stored
//! already truncated: every key satisfies `u(g) > -L` for the context
//! length `L` (strict, so ties at `-L` are dropped).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::RingError;
use crate::groupoid::{Arrow, GroupoidGraph, ObjectId};

/// Upper bound on Neumann-series iterations; hit only for loops with
/// valuations extremely close to zero.
const MAX_SERIES_TERMS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct TruncationContext {
    graph: Arc<GroupoidGraph>,
    length: f64,
}

impl PartialEq for TruncationContext {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl TruncationContext {
    pub fn new(graph: Arc<GroupoidGraph>, length: f64) -> Result<Self, RingError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(RingError::InvalidLength(length));
        }
        Ok(TruncationContext { graph, length })
    }

    pub fn graph(&self) -> &Arc<GroupoidGraph> {
        &self.graph
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Same graph and same length.
    pub fn same_as(&self, other: &TruncationContext) -> bool {
        Arc::ptr_eq(&self.graph, &other.graph) && self.length == other.length
    }

    pub fn with_length(&self, length: f64) -> Result<Self, RingError> {
        Self::new(self.graph.clone(), length)
    }

    pub fn keeps(&self, a: &Arrow) -> bool {
        self.graph.u_value(a) > -self.length
    }
}

#[derive(Debug, Clone)]
pub struct RingElement {
    ctx: TruncationContext,
    terms: BTreeMap<Arrow, BigInt>,
}

impl PartialEq for RingElement {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.same_as(&other.ctx) && self.terms == other.terms
    }
}

impl RingElement {
    pub fn zero(ctx: &TruncationContext) -> Self {
        RingElement { ctx: ctx.clone(), terms: BTreeMap::new() }
    }

    /// Sum of all identity arrows.
    pub fn one(ctx: &TruncationContext) -> Self {
        let mut e = Self::zero(ctx);
        for p in 0..ctx.graph.objects().len() {
            e.terms.insert(ctx.graph.identity(p), BigInt::one());
        }
        e
    }

    pub fn identity(ctx: &TruncationContext, p: ObjectId) -> Self {
        Self::monomial(ctx, ctx.graph.identity(p), 1).expect("identity arrow belongs to the graph")
    }

    pub fn monomial(ctx: &TruncationContext, arrow: Arrow, coeff: impl Into<BigInt>) -> Result<Self, RingError> {
        Self::from_terms(ctx, [(arrow, coeff.into())])
    }

    /// Sum of the given terms, merging repeated arrows and truncating.
    pub fn from_terms(
        ctx: &TruncationContext,
        terms: impl IntoIterator<Item = (Arrow, BigInt)>,
    ) -> Result<Self, RingError> {
        let mut e = Self::zero(ctx);
        for (a, c) in terms {
            if !ctx.graph.owns(&a) {
                return Err(crate::error::GroupoidError::ForeignArrow.into());
            }
            e.accumulate(a, c);
        }
        Ok(e)
    }

    fn accumulate(&mut self, a: Arrow, c: BigInt) {
        if c.is_zero() || !self.ctx.keeps(&a) {
            return;
        }
        match self.terms.entry(a) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn context(&self) -> &TruncationContext {
        &self.ctx
    }

    pub fn graph(&self) -> &Arc<GroupoidGraph> {
        &self.ctx.graph
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Arrow, &BigInt)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, a: &Arrow) -> BigInt {
        self.terms.get(a).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_same(&self, other: &Self) -> Result<(), RingError> {
        if self.ctx.same_as(&other.ctx) {
            Ok(())
        } else {
            Err(RingError::ContextMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, RingError> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.accumulate(a.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, RingError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RingElement { ctx: self.ctx.clone(), terms: self.terms.iter().map(|(a, c)| (a.clone(), -c)).collect() }
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        if k.is_zero() {
            return Self::zero(&self.ctx);
        }
        RingElement { ctx: self.ctx.clone(), terms: self.terms.iter().map(|(a, c)| (a.clone(), c * k)).collect() }
    }

    /// Bilinear extension of diagrammatic composition, truncated.
    pub fn mul(&self, other: &Self) -> Result<Self, RingError> {
        self.check_same(other)?;
        let mut out = Self::zero(&self.ctx);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if let Some(ab) = a.compose(b)? {
                    out.accumulate(ab, ca * cb);
                }
            }
        }
        Ok(out)
    }

    /// Drop terms with `u <= -length` and move to the shorter context.
    pub fn truncate(&self, length: f64) -> Result<Self, RingError> {
        if length > self.ctx.length {
            return Err(RingError::CannotUntruncate { requested: length, available: self.ctx.length });
        }
        let ctx = self.ctx.with_length(length)?;
        let terms = self.terms.iter().filter(|(a, _)| ctx.keeps(a)).map(|(a, c)| (a.clone(), c.clone())).collect();
        Ok(RingElement { ctx, terms })
    }

    /// `truncate(a - b, length)` is empty.
    pub fn l_equal(a: &Self, b: &Self, length: f64) -> Result<bool, RingError> {
        if !Arc::ptr_eq(&a.ctx.graph, &b.ctx.graph) {
            return Err(RingError::ContextMismatch);
        }
        let available = a.ctx.length.min(b.ctx.length);
        if length > available {
            return Err(RingError::CannotUntruncate { requested: length, available });
        }
        let a = a.truncate(length)?;
        let b = b.truncate(length)?;
        Ok(a.sub(&b)?.is_zero())
    }

    /// `1_p + g + g^2 + ...` keeping exactly the powers with `u(g^j) > -L`.
    pub fn geometric_series(g: &Arrow, ctx: &TruncationContext) -> Result<Self, RingError> {
        let graph = &ctx.graph;
        if !graph.owns(g) {
            return Err(crate::error::GroupoidError::ForeignArrow.into());
        }
        if !g.is_loop() {
            return Err(crate::error::GroupoidError::NotALoop.into());
        }
        let u = graph.u_value(g);
        if u >= 0.0 {
            return Err(RingError::NovikovViolation(u));
        }
        let step = Self::monomial(ctx, g.clone(), 1)?;
        let mut power = Self::identity(ctx, g.source());
        let mut acc = Self::zero(ctx);
        while !power.is_zero() {
            acc = acc.add(&power)?;
            power = power.mul(&step)?;
        }
        Ok(acc)
    }

    /// Two-sided inverse of `e + r`, where `e` is a sum of identities over a
    /// set of objects `S` and `r` has only strictly negative terms between
    /// objects of `S`. The result is the truncated Neumann series
    /// `sum_k (-r)^k`, an inverse in the corner ring `e Λ e` (the whole ring
    /// when `S` is every object).
    pub fn unit_inverse(&self) -> Result<Self, RingError> {
        let graph = self.ctx.graph.clone();
        let mut objects = BTreeSet::new();
        let mut rest = Self::zero(&self.ctx);
        for (a, c) in &self.terms {
            if a.is_identity() {
                if !c.is_one() {
                    return Err(RingError::NotInvertible(format!(
                        "identity `{}` has coefficient {c}, expected 1",
                        graph.render_arrow(a)
                    )));
                }
                objects.insert(a.source());
            } else {
                rest.terms.insert(a.clone(), c.clone());
            }
        }
        if objects.is_empty() {
            return Err(RingError::NotInvertible("no identity part".into()));
        }
        let mut max_u = f64::NEG_INFINITY;
        for a in rest.terms.keys() {
            let u = graph.u_value(a);
            if u >= 0.0 {
                return Err(RingError::NotInvertible(format!(
                    "term `{}` has u-value {u} >= 0",
                    graph.render_arrow(a)
                )));
            }
            if !objects.contains(&a.source()) || !objects.contains(&a.target()) {
                return Err(RingError::NotInvertible(format!(
                    "term `{}` leaves the identity support",
                    graph.render_arrow(a)
                )));
            }
            max_u = max_u.max(u);
        }
        let e = Self::from_terms(&self.ctx, objects.iter().map(|&p| (graph.identity(p), BigInt::one())))?;
        if rest.is_zero() {
            return Ok(e);
        }
        let bound = (self.ctx.length / -max_u).ceil() + 2.0;
        if !(bound.is_finite() && bound < MAX_SERIES_TERMS as f64) {
            return Err(RingError::NotInvertible("series too long to truncate".into()));
        }
        let step = rest.neg();
        let mut power = e;
        let mut acc = Self::zero(&self.ctx);
        while !power.is_zero() {
            acc = acc.add(&power)?;
            power = power.mul(&step)?;
        }
        Ok(acc)
    }

    /// Terms with positive valuation. Truncation is a ring congruence only
    /// for elements whose support has `u <= 0`.
    pub fn positive_support(&self) -> Vec<Arrow> {
        self.terms.keys().filter(|a| self.ctx.graph.u_value(a) > 0.0).cloned().collect()
    }

    pub fn is_congruence_safe(&self) -> bool {
        self.positive_support().is_empty()
    }

    /// Terms sorted by decreasing valuation, then by rendered word.
    pub fn sorted_terms(&self) -> Vec<(String, f64, BigInt)> {
        let graph = &self.ctx.graph;
        let mut v: Vec<_> =
            self.terms.iter().map(|(a, c)| (graph.render_arrow(a), graph.u_value(a), c.clone())).collect();
        v.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap_or(Ordering::Equal).then_with(|| x.0.cmp(&y.0)));
        v
    }

    pub fn render(&self) -> String {
        let terms = self.sorted_terms();
        if terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (word, _, c)) in terms.iter().enumerate() {
            let negative = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if negative {
                    out.push('-');
                }
            } else {
                out.push_str(if negative { " - " } else { " + " });
            }
            if !mag.is_one() {
                out.push_str(&format!("{mag}*"));
            }
            out.push_str(word);
        }
        out
    }

    pub fn to_doc(&self) -> ElementDoc {
        ElementDoc {
            length: self.ctx.length,
            terms: self
                .sorted_terms()
                .into_iter()
                .map(|(arrow, _, c)| TermDoc { arrow, coeff: CoeffDoc::from_bigint(&c) })
                .collect(),
        }
    }

    /// Load a document into `ctx`. The document length must not be shorter
    /// than the context length.
    pub fn from_doc(doc: &ElementDoc, ctx: &TruncationContext) -> Result<Self, RingError> {
        if doc.length < ctx.length {
            return Err(RingError::Document(format!(
                "element truncated at L={} cannot be used at L={}",
                doc.length, ctx.length
            )));
        }
        let mut terms = Vec::with_capacity(doc.terms.len());
        for t in &doc.terms {
            let a = ctx.graph.parse_arrow(&t.arrow)?;
            terms.push((a, t.coeff.to_bigint()?));
        }
        Self::from_terms(ctx, terms)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDoc {
    #[serde(rename = "L")]
    pub length: f64,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub arrow: String,
    pub coeff: CoeffDoc,
}

/// Integer coefficient as a JSON number, or a decimal string when it does
/// not fit in 64 bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffDoc {
    Small(i64),
    Big(String),
}

impl CoeffDoc {
    pub fn from_bigint(c: &BigInt) -> Self {
        match c.to_i64() {
            Some(v) => CoeffDoc::Small(v),
            None => CoeffDoc::Big(c.to_string()),
        }
    }

    pub fn to_bigint(&self) -> Result<BigInt, RingError> {
        match self {
            CoeffDoc::Small(v) => Ok(BigInt::from(*v)),
            CoeffDoc::Big(s) => s.parse().map_err(|_| RingError::Document(format!("bad coefficient `{s}`"))),
        }
    }
}
