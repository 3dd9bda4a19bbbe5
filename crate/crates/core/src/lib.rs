//! Exact combinatorics on squarefree words.
//!
//! The crate centers on the ternary word `vtm`, the fixed point of
//! 0 -> 012, 1 -> 02, 2 -> 1. It provides:
//!
//! - word primitives: square detection (naive and divide-and-conquer),
//!   pattern avoidance, deletion, and lazily materialized infinite words
//!   ([`word`], [`repetition`]);
//! - morphisms and multi-valued morphisms with fixed-point streams and
//!   bounded squarefreeness certification ([`morphism`]);
//! - deterministic finite automata with output reading base-2
//!   representations, including a derived automaton computing `vtm`
//!   ([`dfao`]);
//! - a first-order predicate engine over base-2 automatic sequences that
//!   compiles formulas to automata and decides them exactly ([`engine`],
//!   [`formula`]);
//! - exact spectral densities of automaton-recognized position sets
//!   ([`spectral`]);
//! - the analysis of positions whose deletion preserves squarefreeness
//!   ([`disposability`]) and a construction realizing every sufficiently
//!   large length as an interior such factor ([`construction`]).

pub mod construction;
pub mod dfao;
pub mod disposability;
pub mod engine;
pub mod formula;
pub mod morphism;
pub mod repetition;
pub mod spectral;
pub mod word;

mod partition;

pub use dfao::Dfao;
pub use engine::{PredicateEnv, TrackAutomaton};
pub use formula::Formula;
pub use morphism::{Morphism, MultiMorphism};
pub use word::{SquareWitness, Word, WordStream};
