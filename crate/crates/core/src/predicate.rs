//! Quantum opaque predicates.
//!
//! Each generator returns a circuit together with the outcome model its
//! branch table relies on. [`outcome_model`] recomputes that model with the
//! simulator and refuses circuits that disagree with it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, GateApp, GateKind};
use crate::sim::{measure_distribution, simulate, OutcomeDistribution, SimError};

pub const MAX_PAIRS: usize = 12;
/// Agreement required between a simulated model and the analytic one.
pub const MODEL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Bell,
    MultiPair,
    Shroud,
    Branch,
}

impl PredicateKind {
    pub const ALL: [PredicateKind; 4] = [
        PredicateKind::Bell,
        PredicateKind::MultiPair,
        PredicateKind::Shroud,
        PredicateKind::Branch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredicateKind::Bell => "bell",
            PredicateKind::MultiPair => "multi_pair",
            PredicateKind::Shroud => "shroud",
            PredicateKind::Branch => "branch",
        }
    }
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredicateKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bell" => Ok(PredicateKind::Bell),
            "multi_pair" | "multi" => Ok(PredicateKind::MultiPair),
            "shroud" => Ok(PredicateKind::Shroud),
            "branch" => Ok(PredicateKind::Branch),
            _ => Err(format!("unknown predicate '{s}' (expected bell, multi_pair, shroud or branch)")),
        }
    }
}

/// Parameters that, together with the kind, rebuild a predicate exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticsKind {
    Measured,
    AmplitudeRead,
}

/// What selects a branch at run time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    /// The branch key equals this bitstring.
    Key(String),
    /// No listed key matched.
    Otherwise,
    /// The amplitude of this basis state has non-zero modulus.
    AmplitudeNonzero(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchModel {
    pub id: String,
    pub guard: Guard,
    /// Analytic probability that this branch runs.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSemantics {
    pub kind: SemanticsKind,
    /// Classical bits forming the branch key. `key_bits[0]` is the rightmost
    /// character of the key.
    pub key_bits: Vec<usize>,
    pub branches: Vec<BranchModel>,
}

impl BranchSemantics {
    /// Keys of branches that run with non-zero probability.
    pub fn real_outcomes(&self) -> Vec<&str> {
        self.keys(|p| p > 0.0)
    }

    /// Keys of branches that never run.
    pub fn dead_outcomes(&self) -> Vec<&str> {
        self.keys(|p| p == 0.0)
    }

    fn keys(&self, keep: impl Fn(f64) -> bool) -> Vec<&str> {
        self.branches
            .iter()
            .filter(|b| keep(b.probability))
            .filter_map(|b| match &b.guard {
                Guard::Key(k) => Some(k.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn branch(&self, id: &str) -> Option<&BranchModel> {
        self.branches.iter().find(|b| b.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateCircuit {
    pub circuit: Circuit,
    pub kind: PredicateKind,
    pub params: PredicateParams,
    pub semantics: BranchSemantics,
}

#[derive(Debug, Error, PartialEq)]
pub enum PredicateError {
    #[error("n_pairs must be in 1..={MAX_PAIRS}, got {0}")]
    PairsOutOfRange(usize),
    #[error("missing parameter '{0}' for this predicate")]
    MissingParam(&'static str),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("outcome model mismatch: {0}")]
    Mismatch(String),
}

/// Recomputed outcome model of a predicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub kind: PredicateKind,
    /// Full distribution over the measured bits, for measured predicates.
    pub distribution: Option<OutcomeDistribution>,
    /// Pre-measurement amplitudes, for amplitude-read predicates.
    pub amplitudes: Option<Vec<Complex64>>,
    /// Simulated probability of each branch.
    pub branch_probabilities: BTreeMap<String, f64>,
}

fn key_branch(key: &str, p: f64) -> BranchModel {
    BranchModel {
        id: format!("{key}-branch"),
        guard: Guard::Key(key.to_string()),
        probability: p,
    }
}

fn measure_all(c: &mut Circuit) {
    for q in 0..c.n_qubits() {
        c.measure(q, q);
    }
}

pub fn bell_predicate() -> PredicateCircuit {
    let mut c = Circuit::new(2, 2);
    c.gate(GateKind::H, &[0]).gate(GateKind::Cx, &[0, 1]);
    measure_all(&mut c);
    PredicateCircuit {
        circuit: c,
        kind: PredicateKind::Bell,
        params: PredicateParams::default(),
        semantics: BranchSemantics {
            kind: SemanticsKind::Measured,
            key_bits: vec![0, 1],
            branches: vec![
                key_branch("00", 0.5),
                key_branch("01", 0.0),
                key_branch("10", 0.0),
                key_branch("11", 0.5),
            ],
        },
    }
}

/// Probability that every qubit of `n_pairs` Bell pairs reads 1.
pub fn all_ones_probability(n_pairs: usize) -> f64 {
    0.5f64.powi(n_pairs as i32)
}

pub fn multi_pair_predicate(n_pairs: usize) -> Result<PredicateCircuit, PredicateError> {
    if !(1..=MAX_PAIRS).contains(&n_pairs) {
        return Err(PredicateError::PairsOutOfRange(n_pairs));
    }
    let n = 2 * n_pairs;
    let mut c = Circuit::new(n, n);
    for i in 0..n_pairs {
        c.gate(GateKind::H, &[2 * i]).gate(GateKind::Cx, &[2 * i, 2 * i + 1]);
    }
    measure_all(&mut c);
    let p = all_ones_probability(n_pairs);
    Ok(PredicateCircuit {
        circuit: c,
        kind: PredicateKind::MultiPair,
        params: PredicateParams {
            n_pairs: Some(n_pairs),
            seed: None,
        },
        semantics: BranchSemantics {
            kind: SemanticsKind::Measured,
            key_bits: (0..n).collect(),
            branches: vec![
                BranchModel {
                    id: "all-ones-branch".into(),
                    guard: Guard::Key("1".repeat(n)),
                    probability: p,
                },
                BranchModel {
                    id: "else-branch".into(),
                    guard: Guard::Otherwise,
                    probability: 1.0 - p,
                },
            ],
        },
    })
}

pub fn shroud_predicate() -> PredicateCircuit {
    let mut c = Circuit::new(1, 0);
    c.gate(GateKind::H, &[0]);
    PredicateCircuit {
        circuit: c,
        kind: PredicateKind::Shroud,
        params: PredicateParams::default(),
        semantics: BranchSemantics {
            kind: SemanticsKind::AmplitudeRead,
            key_bits: Vec::new(),
            branches: (0..2)
                .map(|i| BranchModel {
                    id: format!("amp{i}-branch"),
                    guard: Guard::AmplitudeNonzero(i),
                    probability: 1.0,
                })
                .collect(),
        },
    }
}

/// Ancilla-guarded core on q2, q3, q4 whose q2, q3 always read 1.
fn branch_core(c: &mut Circuit) {
    use GateKind::*;
    for q in [2, 3, 4] {
        c.gate(H, &[q]);
    }
    c.gate(Z, &[4]).gate(Cx, &[2, 4]).gate(Cx, &[3, 4]);
    for q in [2, 3, 4] {
        c.gate(H, &[q]);
    }
}

/// Decoy gates on q0, q1. The multiset is fixed, the placement is seeded.
fn branch_decoy(rng: &mut ChaCha8Rng) -> Vec<GateApp> {
    use GateKind::*;
    let mut middle: Vec<GateApp> = [Z, Z, X, X]
        .into_iter()
        .map(|k| GateApp::new(k, vec![rng.gen_range(0..2)]))
        .collect();
    for _ in 0..2 {
        let control = rng.gen_range(0..2);
        middle.push(GateApp::new(Cx, vec![control, 1 - control]));
    }
    middle.shuffle(rng);
    let mut gates = vec![GateApp::new(H, vec![0]), GateApp::new(H, vec![1])];
    gates.extend(middle);
    gates.push(GateApp::new(H, vec![0]));
    gates.push(GateApp::new(H, vec![1]));
    gates
}

pub fn branch_predicate(seed: u64) -> PredicateCircuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut core = Circuit::new(5, 4);
    branch_core(&mut core);
    let decoy = branch_decoy(&mut rng);
    // Interleave the two segments while keeping each segment's order.
    let mut c = Circuit::new(5, 4);
    let (mut a, mut b) = (core.gates.into_iter().peekable(), decoy.into_iter().peekable());
    while a.peek().is_some() || b.peek().is_some() {
        let take_a = match (a.peek(), b.peek()) {
            (Some(_), Some(_)) => rng.gen_bool(0.5),
            (Some(_), None) => true,
            _ => false,
        };
        let g = if take_a { a.next() } else { b.next() };
        c.push(g.expect("peeked"));
    }
    for q in 0..4 {
        c.measure(q, q);
    }
    PredicateCircuit {
        circuit: c,
        kind: PredicateKind::Branch,
        params: PredicateParams {
            n_pairs: None,
            seed: Some(seed),
        },
        semantics: BranchSemantics {
            kind: SemanticsKind::Measured,
            key_bits: vec![2, 3],
            branches: vec![
                key_branch("00", 0.0),
                key_branch("01", 0.0),
                key_branch("10", 0.0),
                key_branch("11", 1.0),
            ],
        },
    }
}

/// Rebuild a predicate from its kind and parameters.
pub fn build(kind: PredicateKind, params: &PredicateParams) -> Result<PredicateCircuit, PredicateError> {
    match kind {
        PredicateKind::Bell => Ok(bell_predicate()),
        PredicateKind::MultiPair => multi_pair_predicate(params.n_pairs.ok_or(PredicateError::MissingParam("n_pairs"))?),
        PredicateKind::Shroud => Ok(shroud_predicate()),
        PredicateKind::Branch => Ok(branch_predicate(params.seed.ok_or(PredicateError::MissingParam("seed"))?)),
    }
}

fn key_of(outcome: &str, width: usize, key_bits: &[usize]) -> String {
    let bytes = outcome.as_bytes();
    key_bits.iter().rev().map(|&b| bytes[width - 1 - b] as char).collect()
}

fn mismatch(msg: String) -> PredicateError {
    PredicateError::Mismatch(msg)
}

/// Simulate the predicate and check it against its semantics. Dead branches
/// must have probability exactly zero; live ones must agree within
/// [`MODEL_TOL`].
pub fn outcome_model(p: &PredicateCircuit) -> Result<OutcomeModel, PredicateError> {
    let sem = &p.semantics;
    let mut probs: BTreeMap<String, f64> = sem.branches.iter().map(|b| (b.id.clone(), 0.0)).collect();
    let (distribution, amplitudes) = match sem.kind {
        SemanticsKind::Measured => {
            let dist = measure_distribution(&p.circuit)?;
            for (outcome, &pr) in &dist.probs {
                let key = key_of(outcome, dist.width, &sem.key_bits);
                let branch = sem
                    .branches
                    .iter()
                    .find(|b| b.guard == Guard::Key(key.clone()))
                    .or_else(|| sem.branches.iter().find(|b| b.guard == Guard::Otherwise))
                    .ok_or_else(|| mismatch(format!("outcome {outcome} selects no branch")))?;
                *probs.get_mut(&branch.id).expect("seeded") += pr;
            }
            if p.kind == PredicateKind::MultiPair {
                // Every pair must read 00 or 11.
                for outcome in dist.probs.keys() {
                    let b = outcome.as_bytes();
                    if b.chunks(2).any(|pair| pair[0] != pair[1]) {
                        return Err(mismatch(format!("outcome {outcome} splits a Bell pair")));
                    }
                }
            }
            (Some(dist), None)
        }
        SemanticsKind::AmplitudeRead => {
            let sv = simulate(&p.circuit, 0)?;
            for b in &sem.branches {
                if let Guard::AmplitudeNonzero(i) = b.guard {
                    let live = sv.amps.get(i).is_some_and(|a| a.norm() > 0.0);
                    probs.insert(b.id.clone(), if live { 1.0 } else { 0.0 });
                }
            }
            (None, Some(sv.amps))
        }
    };
    for b in &sem.branches {
        let got = probs[&b.id];
        let ok = if b.probability == 0.0 {
            got == 0.0
        } else {
            (got - b.probability).abs() <= MODEL_TOL
        };
        if !ok {
            return Err(mismatch(format!(
                "branch {} runs with probability {got}, model says {}",
                b.id, b.probability
            )));
        }
    }
    Ok(OutcomeModel {
        kind: p.kind,
        distribution,
        amplitudes,
        branch_probabilities: probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn bell_model() {
        let p = bell_predicate();
        let m = outcome_model(&p).unwrap();
        let d = m.distribution.unwrap();
        assert!((d.prob("00") - 0.5).abs() < 1e-15);
        assert!((d.prob("11") - 0.5).abs() < 1e-15);
        assert_eq!(d.prob("01"), 0.0);
        assert_eq!(d.prob("10"), 0.0);
        assert_eq!(p.semantics.dead_outcomes(), ["01", "10"]);
    }

    #[test]
    fn multi_pair_range() {
        assert!(multi_pair_predicate(0).is_err());
        assert!(multi_pair_predicate(13).is_err());
        let m = outcome_model(&multi_pair_predicate(3).unwrap()).unwrap();
        assert!((m.branch_probabilities["all-ones-branch"] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn shroud_amplitudes() {
        let m = outcome_model(&shroud_predicate()).unwrap();
        let a = m.amplitudes.unwrap();
        for x in &a {
            assert!((x.norm() - FRAC_1_SQRT_2).abs() < 1e-12);
        }
        assert_eq!(m.branch_probabilities["amp1-branch"], 1.0);
    }

    #[test]
    fn shroud_without_h_has_dead_one_branch() {
        let mut p = shroud_predicate();
        p.circuit.gates.clear();
        let err = outcome_model(&p).unwrap_err();
        assert!(err.to_string().contains("amp1-branch"));
    }

    #[test]
    fn branch_segments_stay_disjoint() {
        for seed in 0..30 {
            let p = branch_predicate(seed);
            let c = &p.circuit;
            assert!(c.validate().is_empty());
            for g in c.gates.iter().filter(|g| g.kind != GateKind::Measure) {
                let low = g.qubits.iter().all(|&q| q < 2);
                let high = g.qubits.iter().all(|&q| q >= 2);
                assert!(low ^ high, "gate {g:?} crosses segments");
            }
            assert!(!c.gates.iter().any(|g| g.kind == GateKind::Measure && g.qubits[0] == 4));
            outcome_model(&p).unwrap();
        }
    }

    #[test]
    fn branch_gate_counts() {
        let counts = branch_predicate(7).circuit.gate_count();
        assert_eq!(counts.get(GateKind::H), 10);
        assert_eq!(counts.get(GateKind::Z), 3);
        assert_eq!(counts.get(GateKind::X), 2);
        assert_eq!(counts.get(GateKind::Cx), 4);
        assert_eq!(counts.get(GateKind::Measure), 4);
        assert_eq!(counts.total, 23);
    }

    #[test]
    fn seeds_change_decoys_only() {
        let a = branch_predicate(1);
        let b = branch_predicate(2);
        assert_ne!(a.circuit, b.circuit);
        let ma = outcome_model(&a).unwrap().distribution.unwrap().marginal(&[2, 3]);
        let mb = outcome_model(&b).unwrap().distribution.unwrap().marginal(&[2, 3]);
        assert_eq!(ma.probs.keys().collect::<Vec<_>>(), ["11"]);
        assert_eq!(mb.probs.keys().collect::<Vec<_>>(), ["11"]);
        assert!((ma.prob("11") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn build_from_params() {
        let p = branch_predicate(9);
        assert_eq!(build(p.kind, &p.params).unwrap(), p);
        assert!(build(PredicateKind::MultiPair, &PredicateParams::default()).is_err());
        assert_eq!("multi-pair".parse::<PredicateKind>().unwrap(), PredicateKind::MultiPair);
    }
}
