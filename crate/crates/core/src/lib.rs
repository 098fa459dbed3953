//! Morse-Novikov workbench.
//!
//! The algebraic side covers free valued groupoids, truncated Novikov ring
//! arithmetic, Morse-Novikov complexes and the self-slide rewrite rules. The
//! geometric side covers the standard Morse model and a simulator of
//! holonomy return maps that counts connecting orbits numerically.

pub mod bifurcation;
pub mod complex;
pub mod error;
pub mod groupoid;
pub mod holonomy;
pub mod local_model;
pub mod novikov;
pub mod numerics;

pub use bifurcation::{Character, CrossingEvent, CrossingSign, LoopAudit, SlideScript};
pub use complex::{DSquaredReport, NovikovComplex};
pub use error::{ComplexError, GroupoidError, HolonomyError, ModelError, RingError, SlideError};
pub use groupoid::{Arrow, GroupoidGraph, ObjectId};
pub use holonomy::{make_elementary_family, ElementaryParams, HolonomyFamily, SelfSlideInvariants, StratumLabel};
pub use local_model::{LatitudeFrame, ModelPoint, MorseModelConfig};
pub use novikov::{RingElement, TruncationContext};
