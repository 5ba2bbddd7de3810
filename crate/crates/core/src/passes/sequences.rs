//! Named gate sequences used by the circuit passes.

use serde::{Deserialize, Serialize};

use crate::circuit::{GateApp, GateKind, Origin};
use crate::sim::{unitary_of_ops, Unitary};

/// Most qubit slots a sequence may address.
pub const MAX_SLOTS: usize = 3;

/// An ordered list of gates over relative qubit slots `0..n_slots`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSequence {
    pub name: String,
    pub n_slots: usize,
    pub gates: Vec<(GateKind, Vec<usize>)>,
}

impl GateSequence {
    /// Panics if a slot is out of range, an arity is wrong, or more than
    /// [`MAX_SLOTS`] slots are declared. Use [`GateSequence::try_new`] for
    /// user-supplied data.
    pub fn new(name: impl Into<String>, n_slots: usize, gates: Vec<(GateKind, Vec<usize>)>) -> Self {
        Self::try_new(name, n_slots, gates).expect("well-formed sequence")
    }

    pub fn try_new(
        name: impl Into<String>,
        n_slots: usize,
        gates: Vec<(GateKind, Vec<usize>)>,
    ) -> Result<Self, String> {
        if n_slots == 0 || n_slots > MAX_SLOTS {
            return Err(format!("sequence must use 1..={MAX_SLOTS} slots, got {n_slots}"));
        }
        for (kind, slots) in &gates {
            if !kind.is_unitary() {
                return Err(format!("{kind} cannot appear in a gate sequence"));
            }
            if kind.arity() != Some(slots.len()) {
                return Err(format!("{kind} needs {} slot(s)", kind.arity().unwrap_or(0)));
            }
            if let Some(s) = slots.iter().find(|&&s| s >= n_slots) {
                return Err(format!("slot {s} out of range for {n_slots} slot(s)"));
            }
            let mut sorted = slots.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != slots.len() {
                return Err(format!("{kind} repeats a slot"));
            }
        }
        Ok(GateSequence {
            name: name.into(),
            n_slots,
            gates,
        })
    }

    /// Single-slot sequence of one-qubit gates.
    pub fn single(name: impl Into<String>, kinds: &[GateKind]) -> Self {
        Self::new(name, 1, kinds.iter().map(|&k| (k, vec![0])).collect())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Concrete gates with slot `i` bound to `qubits[i]`.
    pub fn bind<'a>(&'a self, qubits: &'a [usize], origin: &'a Origin) -> impl Iterator<Item = GateApp> + 'a {
        debug_assert!(qubits.len() >= self.n_slots);
        self.gates.iter().map(move |(kind, slots)| {
            GateApp::new(*kind, slots.iter().map(|&s| qubits[s]).collect::<Vec<_>>())
                .with_origin(origin.clone())
        })
    }

    /// Embedded matrix product in application order.
    pub fn effective_unitary(&self) -> Unitary {
        unitary_of_ops(
            self.n_slots,
            self.gates.iter().map(|(k, s)| (*k, s.as_slice())),
        )
        .expect("sequences have at most three slots and only unitary gates")
    }

    /// Space-separated listing such as `h z h` or `swap[0,1] x[1] swap[0,1]`.
    pub fn describe(&self) -> String {
        self.gates
            .iter()
            .map(|(k, s)| {
                if self.n_slots == 1 {
                    k.name().to_string()
                } else {
                    let slots: Vec<String> = s.iter().map(|x| x.to_string()).collect();
                    format!("{}[{}]", k.name(), slots.join(","))
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn pair(a: GateKind, b: GateKind) -> GateSequence {
    let n = a.arity().expect("unitary");
    let slots: Vec<usize> = (0..n).collect();
    GateSequence::new(
        format!("({}, {})", a.name(), b.name()),
        n,
        vec![(a, slots.clone()), (b, slots)],
    )
}

/// The nine gate/inverse pairs.
pub fn inverse_pairs() -> Vec<GateSequence> {
    use GateKind::*;
    vec![
        pair(H, H),
        pair(X, X),
        pair(Z, Z),
        pair(S, Sdg),
        pair(T, Tdg),
        pair(Cx, Cx),
        pair(Cz, Cz),
        pair(Cy, Cy),
        pair(Ccx, Ccx),
    ]
}

pub fn auxiliary_sequence() -> GateSequence {
    use GateKind::*;
    GateSequence::single("auxiliary", &[H, H, Z, X, Z, X])
}

pub fn restore_sequence() -> GateSequence {
    use GateKind::*;
    GateSequence::single("restore", &[X, Z, X, Z, H, H])
}

/// Sequences wrapped around a block of original gates by the delayed pass.
pub fn delayed_sequences() -> Vec<GateSequence> {
    use GateKind::*;
    vec![
        GateSequence::single("y s y", &[Y, S, Y]),
        GateSequence::single("h s h s h", &[H, S, H, S, H]),
        GateSequence::single("x h z h x", &[X, H, Z, H, X]),
        GateSequence::single("h t t h t t h", &[H, T, T, H, T, T, H]),
        GateSequence::single("z h y h z", &[Z, H, Y, H, Z]),
        GateSequence::single("s z sdg", &[S, Z, Sdg]),
        GateSequence::single("t s tdg", &[T, S, Tdg]),
        GateSequence::new(
            "swap x swap",
            2,
            vec![(Swap, vec![0, 1]), (X, vec![0]), (Swap, vec![0, 1])],
        ),
        GateSequence::single("y x y x y", &[Y, X, Y, X, Y]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gate_matrix;

    #[test]
    fn pairs_are_identity() {
        for p in inverse_pairs() {
            assert!(p.effective_unitary().is_identity(1e-12), "{}", p.name);
        }
    }

    #[test]
    fn auxiliary_then_restore_is_identity() {
        let mut gates = auxiliary_sequence().gates;
        gates.extend(restore_sequence().gates);
        let both = GateSequence::new("aux+restore", 1, gates);
        assert_eq!(both.len(), 12);
        assert!(both.effective_unitary().is_identity(1e-12));
    }

    #[test]
    fn delayed_sequence_effects() {
        use GateKind::*;
        let seqs = delayed_sequences();
        let find = |n: &str| seqs.iter().find(|s| s.name == n).unwrap().effective_unitary();
        let x = gate_matrix(X).unwrap();
        assert!(find("x h z h x").equals_up_to_phase(&x, 1e-12));
        // T S Tdg is diagonal and equals S.
        let tst = find("t s tdg");
        assert!(tst.is_diagonal(1e-12));
        assert!(tst.max_deviation(&gate_matrix(S).unwrap()) < 1e-12);
        assert!(find("s z sdg").equals_up_to_phase(&gate_matrix(Z).unwrap(), 1e-12));
        // SWAP X(0) SWAP acts as X on slot 1.
        let sxs = find("swap x swap");
        let x1 = unitary_of_ops(2, [(X, &[1usize][..])]).unwrap();
        assert!(sxs.max_deviation(&x1) < 1e-12);
    }

    #[test]
    fn rejects_bad_slots() {
        use GateKind::*;
        assert!(GateSequence::try_new("bad", 1, vec![(Cx, vec![0, 1])]).is_err());
        assert!(GateSequence::try_new("bad", 2, vec![(Cx, vec![0, 0])]).is_err());
        assert!(GateSequence::try_new("bad", 4, vec![]).is_err());
        assert!(GateSequence::try_new("bad", 1, vec![(Measure, vec![0])]).is_err());
    }

    #[test]
    fn describe() {
        assert_eq!(delayed_sequences()[7].describe(), "swap[0,1] x[0] swap[0,1]");
        assert_eq!(auxiliary_sequence().describe(), "h h z x z x");
    }
}
