//! Circuit intermediate representation shared by the frontend, the simulator and
//! every obfuscation pass.
//!
//! Qubits and classical bits are addressed by flat indices. Registers only exist
//! to give those indices a name on emission: flat index `i` belongs to the first
//! register whose cumulative size exceeds `i`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Swap,
    Cx,
    Cz,
    Cy,
    Ccx,
    Measure,
    Barrier,
}

impl GateKind {
    /// Every kind that has a unitary matrix.
    pub const UNITARY: [GateKind; 13] = [
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Swap,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Cy,
        GateKind::Ccx,
    ];

    /// Number of qubit operands. `None` for barriers, which take any positive number.
    pub fn arity(self) -> Option<usize> {
        use GateKind::*;
        match self {
            H | X | Y | Z | S | Sdg | T | Tdg | Measure => Some(1),
            Swap | Cx | Cz | Cy => Some(2),
            Ccx => Some(3),
            Barrier => None,
        }
    }

    pub fn is_unitary(self) -> bool {
        !matches!(self, GateKind::Measure | GateKind::Barrier)
    }

    /// OpenQASM 2.0 mnemonic.
    pub fn name(self) -> &'static str {
        use GateKind::*;
        match self {
            H => "h",
            X => "x",
            Y => "y",
            Z => "z",
            S => "s",
            Sdg => "sdg",
            T => "t",
            Tdg => "tdg",
            Swap => "swap",
            Cx => "cx",
            Cz => "cz",
            Cy => "cy",
            Ccx => "ccx",
            Measure => "measure",
            Barrier => "barrier",
        }
    }

    /// Resolve a unitary gate mnemonic (case-insensitive).
    pub fn from_gate_name(name: &str) -> Option<GateKind> {
        let lower = name.to_ascii_lowercase();
        GateKind::UNITARY.into_iter().find(|k| k.name() == lower)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Records which original gate a substituted run replaces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub group: usize,
    pub target: GateKind,
    pub target_qubits: Vec<usize>,
}

/// Where a gate came from. Never emitted to QASM.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    #[default]
    Original,
    Inserted,
    Substituted(Substitution),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateApp {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub cbit: Option<usize>,
    pub origin: Origin,
    pub box_id: Option<usize>,
}

impl GateApp {
    pub fn new(kind: GateKind, qubits: impl Into<Vec<usize>>) -> Self {
        GateApp {
            kind,
            qubits: qubits.into(),
            cbit: None,
            origin: Origin::Original,
            box_id: None,
        }
    }

    pub fn measure(qubit: usize, cbit: usize) -> Self {
        GateApp {
            cbit: Some(cbit),
            ..GateApp::new(GateKind::Measure, vec![qubit])
        }
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn in_box(mut self, box_id: usize) -> Self {
        self.box_id = Some(box_id);
        self
    }

    /// Same operation on the same operands, ignoring provenance and grouping.
    pub fn same_op(&self, other: &GateApp) -> bool {
        self.kind == other.kind && self.qubits == other.qubits && self.cbit == other.cbit
    }

    pub fn is_inserted(&self) -> bool {
        self.origin == Origin::Inserted
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub size: usize,
}

impl Register {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Register {
            name: name.into(),
            size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub qregs: Vec<Register>,
    pub cregs: Vec<Register>,
    pub gates: Vec<GateApp>,
    /// Composite box id to display name.
    pub boxes: BTreeMap<usize, String>,
}

impl Circuit {
    /// A circuit over a single `q` register and, when `n_cbits > 0`, a single `c` register.
    pub fn new(n_qubits: usize, n_cbits: usize) -> Self {
        let mut cregs = Vec::new();
        if n_cbits > 0 {
            cregs.push(Register::new("c", n_cbits));
        }
        Circuit {
            qregs: vec![Register::new("q", n_qubits)],
            cregs,
            gates: Vec::new(),
            boxes: BTreeMap::new(),
        }
    }

    /// Same registers, no gates.
    pub fn empty_like(&self) -> Self {
        Circuit {
            qregs: self.qregs.clone(),
            cregs: self.cregs.clone(),
            gates: Vec::new(),
            boxes: BTreeMap::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.qregs.iter().map(|r| r.size).sum()
    }

    pub fn n_cbits(&self) -> usize {
        self.cregs.iter().map(|r| r.size).sum()
    }

    pub fn push(&mut self, gate: GateApp) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn gate(&mut self, kind: GateKind, qubits: &[usize]) -> &mut Self {
        self.push(GateApp::new(kind, qubits.to_vec()))
    }

    pub fn measure(&mut self, qubit: usize, cbit: usize) -> &mut Self {
        self.push(GateApp::measure(qubit, cbit))
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn has_measurements(&self) -> bool {
        self.gates.iter().any(|g| g.kind == GateKind::Measure)
    }

    /// New circuit with `MEASURE` and `BARRIER` removed. Only meaningful for
    /// validated circuits, where measurements are terminal on their qubit.
    pub fn without_non_unitary(&self) -> Circuit {
        let mut out = self.clone();
        out.gates.retain(|g| g.kind.is_unitary());
        out
    }

    /// Check every structural invariant. An empty result means the circuit is well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let nq = self.n_qubits();
        let nc = self.n_cbits();
        if nq == 0 {
            diags.push(Diagnostic::error(
                "circuit declares no qubits",
                Default::default(),
            ));
        }
        let mut measured = vec![false; nq];
        for (i, g) in self.gates.iter().enumerate() {
            match g.kind.arity() {
                Some(a) if a != g.qubits.len() => {
                    diags.push(Diagnostic::at_gate(
                        format!(
                            "{} expects {a} qubit operand(s), got {}",
                            g.kind,
                            g.qubits.len()
                        ),
                        i,
                    ));
                }
                None if g.qubits.is_empty() => {
                    diags.push(Diagnostic::at_gate("barrier without operands", i));
                }
                _ => {}
            }
            let mut seen = HashSet::new();
            if !g.qubits.iter().all(|q| seen.insert(*q)) {
                diags.push(Diagnostic::at_gate("duplicate qubit operand", i));
            }
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= nq) {
                diags.push(Diagnostic::at_gate(
                    format!("qubit index {q} out of range (circuit has {nq})"),
                    i,
                ));
                continue;
            }
            match (g.kind, g.cbit) {
                (GateKind::Measure, Some(c)) if c >= nc => diags.push(Diagnostic::at_gate(
                    format!("classical bit index {c} out of range (circuit has {nc})"),
                    i,
                )),
                (GateKind::Measure, None) => {
                    diags.push(Diagnostic::at_gate("measure without classical bit", i))
                }
                (k, Some(_)) if k != GateKind::Measure => {
                    diags.push(Diagnostic::at_gate("classical bit on a non-measure gate", i))
                }
                _ => {}
            }
            if let Some(b) = g.box_id {
                if !self.boxes.contains_key(&b) {
                    diags.push(Diagnostic::at_gate(format!("unknown composite box {b}"), i));
                }
            }
            if g.kind != GateKind::Barrier && g.qubits.iter().any(|&q| measured[q]) {
                diags.push(Diagnostic::at_gate("gate after measurement", i));
            }
            if g.kind == GateKind::Measure {
                for &q in &g.qubits {
                    measured[q] = true;
                }
            }
        }
        diags
    }

    /// Greedy layer-packing depth. Barriers synchronise their qubits without adding a layer.
    pub fn depth(&self) -> usize {
        let mut time = vec![0usize; self.n_qubits()];
        for g in &self.gates {
            let start = g.qubits.iter().map(|&q| time[q]).max().unwrap_or(0);
            let end = if g.kind == GateKind::Barrier {
                start
            } else {
                start + 1
            };
            for &q in &g.qubits {
                time[q] = end;
            }
        }
        time.into_iter().max().unwrap_or(0)
    }

    pub fn gate_count(&self) -> GateCounts {
        let mut counts = GateCounts::default();
        for g in &self.gates {
            if g.kind != GateKind::Barrier {
                *counts.counts.entry(g.kind).or_insert(0) += 1;
                counts.total += 1;
            }
        }
        counts
    }

    /// Drop all composite grouping. Idempotent.
    pub fn flatten(&self) -> Circuit {
        let mut out = self.clone();
        out.boxes.clear();
        for g in &mut out.gates {
            g.box_id = None;
        }
        out
    }

    /// Gate-for-gate equality of operations and register shapes, ignoring
    /// provenance and composite grouping.
    pub fn same_ops(&self, other: &Circuit) -> bool {
        self.n_qubits() == other.n_qubits()
            && self.n_cbits() == other.n_cbits()
            && self.gates.len() == other.gates.len()
            && self
                .gates
                .iter()
                .zip(&other.gates)
                .all(|(a, b)| a.same_op(b))
    }

    /// Remove inserted gates and collapse each substituted run back into the
    /// gate it replaced. On a pass output this reconstructs the pass input.
    pub fn undo_provenance(&self) -> Circuit {
        let mut out = self.empty_like();
        let mut last_group = None;
        for g in &self.gates {
            match &g.origin {
                Origin::Original => {
                    last_group = None;
                    out.gates.push(GateApp {
                        box_id: None,
                        ..g.clone()
                    });
                }
                Origin::Inserted => last_group = None,
                Origin::Substituted(sub) => {
                    if last_group != Some(sub.group) {
                        out.gates
                            .push(GateApp::new(sub.target, sub.target_qubits.clone()));
                        last_group = Some(sub.group);
                    }
                }
            }
        }
        out
    }
}

/// Histogram of gate kinds. Barriers are not counted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub counts: BTreeMap<GateKind, usize>,
    pub total: usize,
}

impl GateCounts {
    pub fn get(&self, kind: GateKind) -> usize {
        self.counts.get(&kind).copied().unwrap_or(0)
    }
}
