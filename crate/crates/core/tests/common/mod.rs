#![allow(dead_code)]

use proptest::prelude::*;
use qfuscate::circuit::Register;
use qfuscate::{Circuit, GateApp, GateKind};

/// Distinct operands for `kind` drawn from `0..n`.
fn operands(kind: GateKind, n: usize) -> BoxedStrategy<Vec<usize>> {
    let arity = kind.arity().expect("unitary");
    Just((0..n).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(move |v| v[..arity].to_vec())
        .boxed()
}

fn unitary_gate(n: usize) -> BoxedStrategy<GateApp> {
    let kinds: Vec<GateKind> = GateKind::UNITARY
        .into_iter()
        .filter(|k| k.arity().unwrap() <= n)
        .collect();
    prop::sample::select(kinds)
        .prop_flat_map(move |k| operands(k, n).prop_map(move |qs| GateApp::new(k, qs)))
        .boxed()
}

/// Unitary-only circuits on `qubits` qubits with up to `max_gates` gates.
pub fn unitary_circuit(qubits: std::ops::RangeInclusive<usize>, max_gates: usize) -> BoxedStrategy<Circuit> {
    qubits
        .prop_flat_map(move |n| prop::collection::vec(unitary_gate(n), 0..=max_gates).prop_map(move |gates| {
            let mut c = Circuit::new(n, 0);
            c.gates = gates;
            c
        }))
        .boxed()
}

/// Valid circuits with optional barriers, terminal measurements and split registers.
pub fn any_circuit(max_qubits: usize, max_gates: usize) -> BoxedStrategy<Circuit> {
    (1..=max_qubits)
        .prop_flat_map(move |n| {
            let item = prop_oneof![
                8 => unitary_gate(n),
                1 => prop::collection::vec(0..n, 1..=n).prop_map(|mut qs| {
                    qs.sort_unstable();
                    qs.dedup();
                    GateApp::new(GateKind::Barrier, qs)
                }),
            ];
            (
                Just(n),
                prop::collection::vec(item, 0..=max_gates),
                prop::collection::vec(any::<bool>(), n),
                1..=n,
            )
        })
        .prop_map(|(n, gates, measured, split)| {
            let mut c = Circuit::new(n, n);
            if split < n {
                c.qregs = vec![Register::new("q", split), Register::new("anc", n - split)];
            }
            c.gates = gates;
            for (q, m) in measured.into_iter().enumerate() {
                if m {
                    c.measure(q, q);
                }
            }
            c
        })
        .boxed()
}
