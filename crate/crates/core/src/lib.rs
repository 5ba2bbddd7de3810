//! Quantum circuit and control-flow obfuscation.
//!
//! Circuit passes rewrite a [`Circuit`] with identity-preserving gate
//! insertions and substitutions; every rewrite can be checked against the
//! dense simulator in [`sim`]. Control-flow obfuscation wraps a source block
//! behind a quantum opaque predicate built by [`predicate`].

pub mod circuit;
pub mod diag;
pub mod fixtures;
pub mod metrics;
pub mod passes;
pub mod predicate;
pub mod qasm;
pub mod sim;
pub mod wrap;

pub use circuit::{Circuit, GateApp, GateCounts, GateKind, Origin};
pub use diag::{Diagnostic, Severity, SourceSpan};
pub use sim::{equivalent, Equivalence, EquivalenceMode};
