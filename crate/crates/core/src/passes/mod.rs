//! The four circuit obfuscation passes.
//!
//! Every pass is a pure function of its input circuit and an
//! [`ObfuscationConfig`]. Randomness comes from a ChaCha generator seeded by
//! `config.seed`, so equal inputs give byte-identical output. Passes never
//! place a gate on a qubit after that qubit has been measured.

mod cloaked;
mod composite;
mod delayed;
mod inverse;
pub mod rules;
pub mod sequences;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::diag::Diagnostic;

pub use cloaked::cloaked_gates_pass;
pub use composite::{composite_gates_pass, insert_composite_pair};
pub use delayed::{delayed_gates_pass, DELAYED_RETRIES};
pub use inverse::inverse_gates_pass;
pub use rules::{
    default_ruleset, parse_ruleset, verify_rule, verify_ruleset, RejectedRule, RulesetParseError,
    RulesetReport, SubstitutionRule,
};
pub use sequences::GateSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Inverse,
    Composite,
    Cloaked,
    Delayed,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Inverse, Method::Composite, Method::Cloaked, Method::Delayed];

    pub fn name(self) -> &'static str {
        match self {
            Method::Inverse => "inverse",
            Method::Composite => "composite",
            Method::Cloaked => "cloaked",
            Method::Delayed => "delayed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method '{s}' (expected inverse, composite, cloaked or delayed)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationConfig {
    pub seed: u64,
    /// Probability that an eligible site receives an insertion, in (0, 1].
    pub intensity: f64,
    pub method: Method,
}

impl ObfuscationConfig {
    pub fn new(method: Method, seed: u64, intensity: f64) -> Self {
        ObfuscationConfig {
            seed,
            intensity,
            method,
        }
    }

    fn check(&self) -> Result<(), PassError> {
        if self.intensity > 0.0 && self.intensity <= 1.0 {
            Ok(())
        } else {
            Err(PassError::InvalidIntensity(self.intensity))
        }
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassOutput {
    pub circuit: Circuit,
    pub warnings: Vec<String>,
}

impl PassOutput {
    fn unchanged(circuit: &Circuit, warning: impl Into<String>) -> Self {
        PassOutput {
            circuit: circuit.clone(),
            warnings: vec![warning.into()],
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PassError {
    #[error("input circuit is invalid: {}", first(.0))]
    InvalidInput(Vec<Diagnostic>),
    #[error("intensity must lie in (0, 1], got {0}")]
    InvalidIntensity(f64),
    #[error("ruleset contains an unverified rule for {0}")]
    UnverifiedRule(String),
}

fn first(diags: &[Diagnostic]) -> String {
    diags.first().map(|d| d.to_string()).unwrap_or_default()
}

pub(crate) fn precheck(c: &Circuit, cfg: &ObfuscationConfig) -> Result<(), PassError> {
    cfg.check()?;
    let diags: Vec<Diagnostic> = c.validate().into_iter().filter(|d| d.is_error()).collect();
    if diags.is_empty() {
        Ok(())
    } else {
        Err(PassError::InvalidInput(diags))
    }
}

/// Run the pass selected by `cfg.method`. `rules` is only used by the cloaked pass.
pub fn obfuscate(c: &Circuit, cfg: &ObfuscationConfig, rules: &[SubstitutionRule]) -> Result<PassOutput, PassError> {
    match cfg.method {
        Method::Inverse => inverse_gates_pass(c, cfg),
        Method::Composite => composite_gates_pass(c, cfg),
        Method::Cloaked => cloaked_gates_pass(c, cfg, rules),
        Method::Delayed => delayed_gates_pass(c, cfg),
    }
}

/// `measured[site][q]`: qubit `q` has been measured by a gate before position `site`.
pub(crate) fn measured_before(c: &Circuit) -> Vec<Vec<bool>> {
    let n = c.n_qubits();
    let mut cur = vec![false; n];
    let mut out = Vec::with_capacity(c.gates.len() + 1);
    out.push(cur.clone());
    for g in &c.gates {
        if g.kind == crate::GateKind::Measure {
            cur[g.qubits[0]] = true;
        }
        out.push(cur.clone());
    }
    out
}

/// Preferred qubits at an insertion site: the operands of the gate after the
/// site, then of the gate before it. Inserting next to these keeps the new
/// gates on a timeline that already carries work.
pub(crate) fn anchor_candidates(c: &Circuit, site: usize, measured: &[bool]) -> Vec<usize> {
    let pick = |i: usize| -> Vec<usize> {
        c.gates
            .get(i)
            .map(|g| g.qubits.iter().copied().filter(|&q| !measured[q]).collect())
            .unwrap_or_default()
    };
    let after = pick(site);
    if !after.is_empty() {
        return after;
    }
    if site > 0 {
        let before = pick(site - 1);
        if !before.is_empty() {
            return before;
        }
    }
    (0..measured.len()).filter(|&q| !measured[q]).collect()
}

/// Distinct unmeasured operands for an `arity`-qubit sequence. One operand is
/// drawn from `anchors`, the rest from any unmeasured qubit, then shuffled.
pub(crate) fn pick_operands<R: Rng>(
    rng: &mut R,
    arity: usize,
    anchors: &[usize],
    measured: &[bool],
) -> Option<Vec<usize>> {
    let free: Vec<usize> = (0..measured.len()).filter(|&q| !measured[q]).collect();
    if free.len() < arity || anchors.is_empty() {
        return None;
    }
    let anchor = *anchors.choose(rng)?;
    let mut rest: Vec<usize> = free.into_iter().filter(|&q| q != anchor).collect();
    rest.shuffle(rng);
    let mut ops = vec![anchor];
    ops.extend(rest.into_iter().take(arity - 1));
    ops.shuffle(rng);
    Some(ops)
}
