//! Free groupoids over finite directed multigraphs, with a real valuation.
//!
//! Arrows are reduced signed words. Composition is diagrammatic: `g.h` is
//! "g then h" and is defined only when `target(g) == source(h)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::GroupoidError;

pub type ObjectId = usize;
pub type GeneratorId = usize;

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub morse_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub name: String,
    pub source: String,
    pub target: String,
    pub u_value: f64,
}

/// JSON form of a groupoid graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupoidDoc {
    pub objects: Vec<ObjectSpec>,
    pub generators: Vec<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub name: String,
    pub source: ObjectId,
    pub target: ObjectId,
    pub u_value: f64,
}

/// A letter of a word: a generator traversed forwards (`inverse == false`)
/// or backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: GeneratorId,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: GeneratorId, exponent: i8) -> Self {
        Letter { generator, inverse: exponent < 0 }
    }

    pub fn exponent(self) -> i8 {
        if self.inverse {
            -1
        } else {
            1
        }
    }

    pub fn flipped(self) -> Self {
        Letter { generator: self.generator, inverse: !self.inverse }
    }

    fn cancels(self, other: Letter) -> bool {
        self.generator == other.generator && self.inverse != other.inverse
    }
}

/// A reduced word in the free groupoid with its endpoints.
///
/// Arrows only carry the id of their graph; the valuation and names live in
/// the [`GroupoidGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arrow {
    graph: u64,
    source: ObjectId,
    target: ObjectId,
    word: Vec<Letter>,
}

impl Arrow {
    pub fn source(&self) -> ObjectId {
        self.source
    }

    pub fn target(&self) -> ObjectId {
        self.target
    }

    pub fn word(&self) -> &[Letter] {
        &self.word
    }

    pub fn graph_id(&self) -> u64 {
        self.graph
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn is_loop(&self) -> bool {
        self.source == self.target
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    /// Diagrammatic composition `self` then `other`.
    ///
    /// `Ok(None)` is the "not composable" outcome.
    pub fn compose(&self, other: &Arrow) -> Result<Option<Arrow>, GroupoidError> {
        if self.graph != other.graph {
            return Err(GroupoidError::ForeignArrow);
        }
        if self.target != other.source {
            return Ok(None);
        }
        let mut word = Vec::with_capacity(self.word.len() + other.word.len());
        word.extend_from_slice(&self.word);
        for &l in &other.word {
            match word.last() {
                Some(&last) if last.cancels(l) => {
                    word.pop();
                }
                _ => word.push(l),
            }
        }
        Ok(Some(Arrow { graph: self.graph, source: self.source, target: other.target, word }))
    }

    pub fn inverse(&self) -> Arrow {
        Arrow {
            graph: self.graph,
            source: self.target,
            target: self.source,
            word: self.word.iter().rev().map(|l| l.flipped()).collect(),
        }
    }

    /// `self` composed with itself `k` times; negative `k` uses the inverse.
    pub fn pow(&self, k: i64) -> Result<Arrow, GroupoidError> {
        if !self.is_loop() {
            return Err(GroupoidError::NotALoop);
        }
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut acc = Arrow { graph: self.graph, source: self.source, target: self.source, word: Vec::new() };
        for _ in 0..k.unsigned_abs() {
            acc = acc.compose(&base)?.expect("loops compose");
        }
        Ok(acc)
    }
}

/// A finite directed multigraph generating a free groupoid, with the
/// u-values of its edges.
#[derive(Debug)]
pub struct GroupoidGraph {
    id: u64,
    objects: Vec<ObjectSpec>,
    generators: Vec<Generator>,
    object_index: HashMap<String, ObjectId>,
    generator_index: HashMap<String, GeneratorId>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

impl GroupoidGraph {
    pub fn new(objects: Vec<ObjectSpec>, generators: Vec<GeneratorSpec>) -> Result<Arc<Self>, GroupoidError> {
        let mut object_index = HashMap::new();
        for (id, o) in objects.iter().enumerate() {
            if !valid_name(&o.name) {
                return Err(GroupoidError::InvalidName(o.name.clone()));
            }
            if object_index.insert(o.name.clone(), id).is_some() {
                return Err(GroupoidError::DuplicateName(o.name.clone()));
            }
        }
        let mut generator_index = HashMap::new();
        let mut gens = Vec::with_capacity(generators.len());
        for (id, g) in generators.into_iter().enumerate() {
            if !valid_name(&g.name) {
                return Err(GroupoidError::InvalidName(g.name.clone()));
            }
            if object_index.contains_key(&g.name) || generator_index.insert(g.name.clone(), id).is_some() {
                return Err(GroupoidError::DuplicateName(g.name.clone()));
            }
            if !g.u_value.is_finite() {
                return Err(GroupoidError::InvalidValuation(g.name.clone()));
            }
            let source = *object_index
                .get(&g.source)
                .ok_or_else(|| GroupoidError::UnknownObject(g.source.clone()))?;
            let target = *object_index
                .get(&g.target)
                .ok_or_else(|| GroupoidError::UnknownObject(g.target.clone()))?;
            gens.push(Generator { name: g.name, source, target, u_value: g.u_value });
        }
        Ok(Arc::new(GroupoidGraph {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            objects,
            generators: gens,
            object_index,
            generator_index,
        }))
    }

    pub fn from_doc(doc: GroupoidDoc) -> Result<Arc<Self>, GroupoidError> {
        Self::new(doc.objects, doc.generators)
    }

    pub fn from_json(text: &str) -> Result<Arc<Self>, GroupoidError> {
        let doc: GroupoidDoc = serde_json::from_str(text).map_err(|e| GroupoidError::Json(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn to_doc(&self) -> GroupoidDoc {
        GroupoidDoc {
            objects: self.objects.clone(),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorSpec {
                    name: g.name.clone(),
                    source: self.objects[g.source].name.clone(),
                    target: self.objects[g.target].name.clone(),
                    u_value: g.u_value,
                })
                .collect(),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn objects(&self) -> &[ObjectSpec] {
        &self.objects
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.object_index.get(name).copied()
    }

    pub fn generator_id(&self, name: &str) -> Option<GeneratorId> {
        self.generator_index.get(name).copied()
    }

    pub fn object_name(&self, id: ObjectId) -> &str {
        &self.objects[id].name
    }

    pub fn morse_index(&self, id: ObjectId) -> usize {
        self.objects[id].morse_index
    }

    pub fn owns(&self, a: &Arrow) -> bool {
        a.graph == self.id
    }

    pub fn identity(&self, p: ObjectId) -> Arrow {
        assert!(p < self.objects.len(), "object id out of range");
        Arrow { graph: self.id, source: p, target: p, word: Vec::new() }
    }

    pub fn generator_arrow(&self, e: GeneratorId) -> Arrow {
        let g = &self.generators[e];
        Arrow { graph: self.id, source: g.source, target: g.target, word: vec![Letter::new(e, 1)] }
    }

    /// Build an arrow from an arbitrary (possibly unreduced) word.
    pub fn arrow_from_letters(&self, start: ObjectId, letters: &[Letter]) -> Result<Arrow, GroupoidError> {
        let mut acc = self.identity(start);
        for &l in letters {
            let e = self.generators.get(l.generator).ok_or(GroupoidError::UnknownGeneratorId(l.generator))?;
            let (s, t) = if l.inverse { (e.target, e.source) } else { (e.source, e.target) };
            if s != acc.target {
                return Err(GroupoidError::BrokenChain);
            }
            let step = Arrow { graph: self.id, source: s, target: t, word: vec![l] };
            acc = acc.compose(&step)?.expect("chained letters compose");
        }
        Ok(acc)
    }

    /// Signed sum of generator u-values over the word.
    pub fn u_value(&self, a: &Arrow) -> f64 {
        a.word
            .iter()
            .map(|l| {
                let u = self.generators[l.generator].u_value;
                if l.inverse {
                    -u
                } else {
                    u
                }
            })
            .sum()
    }

    /// Check that a word is reduced and chains from `source` to `target`.
    pub fn is_well_formed(&self, a: &Arrow) -> bool {
        if a.graph != self.id {
            return false;
        }
        let mut at = a.source;
        for (k, l) in a.word.iter().enumerate() {
            if k > 0 && a.word[k - 1].cancels(*l) {
                return false;
            }
            let e = &self.generators[l.generator];
            let (s, t) = if l.inverse { (e.target, e.source) } else { (e.source, e.target) };
            if s != at {
                return false;
            }
            at = t;
        }
        at == a.target
    }

    /// Render as `e1.e2^-1`, grouping runs into powers, or `1_p`.
    pub fn render_arrow(&self, a: &Arrow) -> String {
        if a.word.is_empty() {
            return format!("1_{}", self.objects[a.source].name);
        }
        let mut parts = Vec::new();
        let mut k = 0;
        while k < a.word.len() {
            let l = a.word[k];
            let mut run = 1;
            while k + run < a.word.len() && a.word[k + run] == l {
                run += 1;
            }
            let name = &self.generators[l.generator].name;
            let exp = run as i64 * l.exponent() as i64;
            if exp == 1 {
                parts.push(name.clone());
            } else {
                parts.push(format!("{name}^{exp}"));
            }
            k += run;
        }
        parts.join(".")
    }

    /// Parse the rendering produced by [`render_arrow`](Self::render_arrow).
    pub fn parse_arrow(&self, text: &str) -> Result<Arrow, GroupoidError> {
        let text = text.trim();
        if let Some(obj) = text.strip_prefix("1_") {
            let p = self.object_id(obj).ok_or_else(|| GroupoidError::UnknownObject(obj.to_string()))?;
            return Ok(self.identity(p));
        }
        let mut letters = Vec::new();
        let mut start = None;
        for part in text.split('.') {
            let part = part.trim();
            let (name, exp) = match part.split_once('^') {
                Some((n, e)) => {
                    let e: i64 = e.trim().parse().map_err(|_| GroupoidError::BadArrowSyntax(text.to_string()))?;
                    (n.trim(), e)
                }
                None => (part, 1),
            };
            if exp == 0 {
                return Err(GroupoidError::BadArrowSyntax(text.to_string()));
            }
            let id = self.generator_id(name).ok_or_else(|| GroupoidError::UnknownGenerator(name.to_string()))?;
            let l = Letter::new(id, if exp < 0 { -1 } else { 1 });
            if start.is_none() {
                let e = &self.generators[id];
                start = Some(if l.inverse { e.target } else { e.source });
            }
            for _ in 0..exp.unsigned_abs() {
                letters.push(l);
            }
        }
        let start = start.ok_or_else(|| GroupoidError::BadArrowSyntax(text.to_string()))?;
        self.arrow_from_letters(start, &letters)
    }
}

/// Display helper pairing an arrow with its graph.
pub struct ArrowDisplay<'a> {
    pub graph: &'a GroupoidGraph,
    pub arrow: &'a Arrow,
}

impl fmt::Display for ArrowDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.graph.render_arrow(self.arrow))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> Arc<GroupoidGraph> {
        GroupoidGraph::new(
            vec![
                ObjectSpec { name: "p".into(), morse_index: 2 },
                ObjectSpec { name: "q".into(), morse_index: 1 },
            ],
            vec![
                GeneratorSpec { name: "e1".into(), source: "p".into(), target: "q".into(), u_value: -1.0 },
                GeneratorSpec { name: "e2".into(), source: "p".into(), target: "q".into(), u_value: 0.4 },
                GeneratorSpec { name: "g".into(), source: "p".into(), target: "p".into(), u_value: -1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let g = graph();
        let e = g.parse_arrow("e1").unwrap();
        let id = g.identity(0);
        assert_eq!(id.compose(&e).unwrap(), Some(e.clone()));
        assert_eq!(e.compose(&g.identity(1)).unwrap(), Some(e));
    }

    #[test]
    fn inverse_cancels() {
        let g = graph();
        let e = g.parse_arrow("e1").unwrap();
        assert_eq!(e.compose(&e.inverse()).unwrap(), Some(g.identity(0)));
        assert_eq!(g.identity(0).inverse(), g.identity(0));
    }

    #[test]
    fn free_reduction_of_concatenation() {
        let g = graph();
        let a = g.parse_arrow("e1").unwrap();
        let b = g.parse_arrow("e1^-1.e2").unwrap();
        assert_eq!(a.compose(&b).unwrap(), Some(g.parse_arrow("e2").unwrap()));
    }

    #[test]
    fn inverse_reverses_letters() {
        let g = graph();
        let a = g.parse_arrow("g.e1").unwrap();
        assert_eq!(g.render_arrow(&a.inverse()), "e1^-1.g^-1");
    }

    #[test]
    fn non_composable_is_none() {
        let g = graph();
        let e = g.parse_arrow("e1").unwrap();
        assert_eq!(e.compose(&e).unwrap(), None);
    }

    #[test]
    fn foreign_arrows_error() {
        let g1 = graph();
        let g2 = graph();
        let a = g1.identity(0);
        let b = g2.identity(0);
        assert!(matches!(a.compose(&b), Err(GroupoidError::ForeignArrow)));
    }

    #[test]
    fn valuations() {
        let g = graph();
        assert_eq!(g.u_value(&g.identity(0)), 0.0);
        assert_eq!(g.u_value(&g.parse_arrow("g.g").unwrap()), -2.0);
        let w = g.parse_arrow("e1.e2^-1").unwrap();
        assert!((g.u_value(&w) - (-1.4)).abs() < 1e-15);
        let l = g.parse_arrow("g").unwrap();
        assert_eq!(g.u_value(&l.inverse()), 1.0);
    }

    #[test]
    fn render_groups_powers() {
        let g = graph();
        let a = g.parse_arrow("g.g.g.e1").unwrap();
        assert_eq!(g.render_arrow(&a), "g^3.e1");
        assert_eq!(g.parse_arrow("g^3.e1").unwrap(), a);
        assert_eq!(g.render_arrow(&g.identity(1)), "1_q");
        assert_eq!(g.parse_arrow("1_q").unwrap(), g.identity(1));
    }

    #[test]
    fn broken_chain_rejected() {
        let g = graph();
        assert!(matches!(g.parse_arrow("e1.g"), Err(GroupoidError::BrokenChain)));
        assert!(g.parse_arrow("zz").is_err());
    }

    #[test]
    fn duplicate_and_unknown_names() {
        let objs = vec![ObjectSpec { name: "p".into(), morse_index: 0 }];
        let dup = GroupoidGraph::new(
            objs.clone(),
            vec![
                GeneratorSpec { name: "a".into(), source: "p".into(), target: "p".into(), u_value: -1.0 },
                GeneratorSpec { name: "a".into(), source: "p".into(), target: "p".into(), u_value: -1.0 },
            ],
        );
        assert!(matches!(dup, Err(GroupoidError::DuplicateName(_))));
        let unknown = GroupoidGraph::new(
            objs,
            vec![GeneratorSpec { name: "a".into(), source: "p".into(), target: "x".into(), u_value: -1.0 }],
        );
        assert!(matches!(unknown, Err(GroupoidError::UnknownObject(_))));
    }

    #[test]
    fn json_round_trip() {
        let g = graph();
        let text = serde_json::to_string(&g.to_doc()).unwrap();
        let h = GroupoidGraph::from_json(&text).unwrap();
        assert_eq!(h.to_doc(), g.to_doc());
        assert_ne!(h.id(), g.id());
    }
}
