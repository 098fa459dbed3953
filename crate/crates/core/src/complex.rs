//! Morse-Novikov complexes over the truncated ring.
//!
//! Generators are the objects of the groupoid graph, graded by Morse index.
//! The incidence `<p,q>` is a ring element supported on arrows `p -> q`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ComplexError;
use crate::groupoid::ObjectId;
use crate::novikov::{ElementDoc, RingElement, TruncationContext};

#[derive(Debug, Clone, PartialEq)]
pub struct NovikovComplex {
    ctx: TruncationContext,
    incidences: BTreeMap<(ObjectId, ObjectId), RingElement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DSquaredViolation {
    pub p: ObjectId,
    pub r: ObjectId,
    pub residue: RingElement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DSquaredReport {
    pub violation: Option<DSquaredViolation>,
    pub pairs_checked: usize,
}

impl DSquaredReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// A formal combination `sum <p,q> q` of generators of one degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub degree: Option<usize>,
    pub entries: BTreeMap<ObjectId, RingElement>,
}

impl Chain {
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (q, c) in &self.entries {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let name = c.graph().object_name(*q);
            if c.len() == 1 {
                write!(f, "{c}.{name}")?;
            } else {
                write!(f, "({c}).{name}")?;
            }
        }
        Ok(())
    }
}

impl NovikovComplex {
    pub fn new(ctx: &TruncationContext) -> Self {
        NovikovComplex { ctx: ctx.clone(), incidences: BTreeMap::new() }
    }

    pub fn context(&self) -> &TruncationContext {
        &self.ctx
    }

    fn name(&self, p: ObjectId) -> String {
        self.ctx.graph().object_name(p).to_string()
    }

    fn check_generator(&self, p: ObjectId) -> Result<(), ComplexError> {
        if p < self.ctx.graph().objects().len() {
            Ok(())
        } else {
            Err(ComplexError::UnknownGenerator(format!("#{p}")))
        }
    }

    /// Validate grading and support of a candidate incidence.
    pub fn validate_incidence(&self, p: ObjectId, q: ObjectId, value: &RingElement) -> Result<(), ComplexError> {
        self.check_generator(p)?;
        self.check_generator(q)?;
        let graph = self.ctx.graph();
        let expected = graph.morse_index(p) as i64 - 1;
        if graph.morse_index(q) as i64 != expected {
            return Err(ComplexError::Grading {
                p: self.name(p),
                q: self.name(q),
                q_index: graph.morse_index(q),
                expected,
            });
        }
        if !value.context().same_as(&self.ctx) {
            return Err(crate::error::RingError::ContextMismatch.into());
        }
        for (a, _) in value.terms() {
            if a.source() != p || a.target() != q {
                return Err(ComplexError::Support { p: self.name(p), q: self.name(q), arrow: graph.render_arrow(a) });
            }
            let u = graph.u_value(a);
            if u >= 0.0 {
                return Err(ComplexError::NonNegativeValuation {
                    p: self.name(p),
                    q: self.name(q),
                    arrow: graph.render_arrow(a),
                    u,
                });
            }
        }
        Ok(())
    }

    /// Return a copy with `<p,q>` replaced. A zero value removes the entry.
    pub fn set_incidence(&self, p: ObjectId, q: ObjectId, value: RingElement) -> Result<Self, ComplexError> {
        self.validate_incidence(p, q, &value)?;
        let mut out = self.clone();
        if value.is_zero() {
            out.incidences.remove(&(p, q));
        } else {
            out.incidences.insert((p, q), value);
        }
        Ok(out)
    }

    pub fn incidence(&self, p: ObjectId, q: ObjectId) -> RingElement {
        self.incidences.get(&(p, q)).cloned().unwrap_or_else(|| RingElement::zero(&self.ctx))
    }

    pub fn incidences(&self) -> impl Iterator<Item = (&(ObjectId, ObjectId), &RingElement)> {
        self.incidences.iter()
    }

    pub fn generators_of_index(&self, k: usize) -> Vec<ObjectId> {
        let graph = self.ctx.graph();
        (0..graph.objects().len()).filter(|&p| graph.morse_index(p) == k).collect()
    }

    /// Check `sum_q <p,q><q,r> == 0 (mod L)` for every pair two degrees
    /// apart, in (p, r) order. Reports the first violation.
    pub fn check_d_squared(&self) -> DSquaredReport {
        let graph = self.ctx.graph();
        let n = graph.objects().len();
        let mut pairs_checked = 0;
        for p in 0..n {
            let ip = graph.morse_index(p);
            if ip < 2 {
                continue;
            }
            for r in 0..n {
                if graph.morse_index(r) != ip - 2 {
                    continue;
                }
                pairs_checked += 1;
                let mut sum = RingElement::zero(&self.ctx);
                for q in self.generators_of_index(ip - 1) {
                    let (Some(a), Some(b)) = (self.incidences.get(&(p, q)), self.incidences.get(&(q, r))) else {
                        continue;
                    };
                    let prod = a.mul(b).expect("incidences share the complex context");
                    sum = sum.add(&prod).expect("same context");
                }
                if !sum.is_zero() {
                    return DSquaredReport { violation: Some(DSquaredViolation { p, r, residue: sum }), pairs_checked };
                }
            }
        }
        DSquaredReport { violation: None, pairs_checked }
    }

    /// Row of `p` as a combination of generators of degree `index(p) - 1`.
    pub fn boundary_of(&self, p: ObjectId) -> Result<Chain, ComplexError> {
        self.check_generator(p)?;
        let ip = self.ctx.graph().morse_index(p);
        let entries: BTreeMap<_, _> =
            self.incidences.iter().filter(|((a, _), _)| *a == p).map(|((_, q), v)| (*q, v.clone())).collect();
        Ok(Chain { degree: ip.checked_sub(1), entries })
    }

    /// Replace every entry by its truncation at a shorter length.
    pub fn truncate(&self, length: f64) -> Result<Self, ComplexError> {
        let ctx = self.ctx.with_length(length)?;
        let mut out = NovikovComplex::new(&ctx);
        for (k, v) in &self.incidences {
            let t = v.truncate(length)?;
            if !t.is_zero() {
                out.incidences.insert(*k, t);
            }
        }
        Ok(out)
    }

    pub fn to_doc(&self) -> ComplexDoc {
        ComplexDoc {
            context: ContextDoc { length: self.ctx.length() },
            incidences: self
                .incidences
                .iter()
                .map(|((p, q), v)| IncidenceDoc { p: self.name(*p), q: self.name(*q), element: v.to_doc() })
                .collect(),
        }
    }

    /// Load a complex into `ctx`, reporting failures with the document path.
    pub fn from_doc(doc: &ComplexDoc, ctx: &TruncationContext) -> Result<Self, ComplexError> {
        if doc.context.length < ctx.length() {
            return Err(ComplexError::Document(format!(
                "context.L: complex truncated at {} cannot be used at L={}",
                doc.context.length,
                ctx.length()
            )));
        }
        let graph = ctx.graph();
        let mut out = NovikovComplex::new(ctx);
        for (k, inc) in doc.incidences.iter().enumerate() {
            let p = graph
                .object_id(&inc.p)
                .ok_or_else(|| ComplexError::Document(format!("incidences[{k}].p: unknown generator `{}`", inc.p)))?;
            let q = graph
                .object_id(&inc.q)
                .ok_or_else(|| ComplexError::Document(format!("incidences[{k}].q: unknown generator `{}`", inc.q)))?;
            let v = RingElement::from_doc(&inc.element, ctx)
                .map_err(|e| ComplexError::Document(format!("incidences[{k}].element: {e}")))?;
            if out.incidences.contains_key(&(p, q)) {
                return Err(ComplexError::Document(format!("incidences[{k}]: duplicate entry <{},{}>", inc.p, inc.q)));
            }
            out = out
                .set_incidence(p, q, v)
                .map_err(|e| ComplexError::Document(format!("incidences[{k}]: {e}")))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDoc {
    #[serde(rename = "L")]
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceDoc {
    pub p: String,
    pub q: String,
    pub element: ElementDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexDoc {
    pub context: ContextDoc,
    pub incidences: Vec<IncidenceDoc>,
}
