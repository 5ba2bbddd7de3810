use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::sequences::{delayed_sequences, GateSequence};
use super::{measured_before, pick_operands, precheck, ObfuscationConfig, PassError, PassOutput};
use crate::circuit::{Circuit, GateApp, GateKind, Origin};
use crate::sim::{unitary_of_ops, Unitary, EQUIV_TOL};

/// Draws per selected site before the site is skipped.
pub const DELAYED_RETRIES: usize = 32;
const MAX_BLOCK: usize = 3;
const MAX_TOUCHED: usize = 3;

fn block_fits(block: &[GateApp]) -> bool {
    let box_id = block[0].box_id;
    block
        .iter()
        .all(|g| g.kind.is_unitary() && g.origin == Origin::Original && g.box_id == box_id)
}

fn local_unitary<'a>(space: &[usize], gates: impl Iterator<Item = (GateKind, &'a [usize])>) -> Unitary {
    let local = |q: &usize| space.iter().position(|s| s == q).expect("qubit in local space");
    let ops: Vec<(GateKind, Vec<usize>)> = gates.map(|(k, qs)| (k, qs.iter().map(local).collect())).collect();
    unitary_of_ops(space.len(), ops.iter().map(|(k, qs)| (*k, qs.as_slice()))).expect("small local space")
}

/// `E·U·E` equals `U` up to a global phase, where `E` is `seq` on `ops` and
/// `U` is `block`, both embedded on the union of their qubits.
pub(crate) fn commits(seq: &GateSequence, ops: &[usize], block: &[GateApp]) -> bool {
    let mut space: BTreeSet<usize> = ops[..seq.n_slots].iter().copied().collect();
    for g in block {
        space.extend(g.qubits.iter().copied());
    }
    let space: Vec<usize> = space.into_iter().collect();
    let bound: Vec<GateApp> = seq.bind(ops, &Origin::Inserted).collect();
    let u = local_unitary(&space, block.iter().map(|g| (g.kind, g.qubits.as_slice())));
    let sandwich = local_unitary(
        &space,
        bound
            .iter()
            .chain(block)
            .chain(bound.iter())
            .map(|g| (g.kind, g.qubits.as_slice())),
    );
    sandwich.equals_up_to_phase(&u, EQUIV_TOL)
}

/// Wrap short blocks of original gates as `D·B·D` where the oracle confirms
/// that the sandwich acts as `B` alone.
///
/// Each unitary original gate starts a candidate site with probability
/// `intensity`. A site draws a block length of 1 to 3, a delayed sequence
/// and an operand binding up to [`DELAYED_RETRIES`] times and commits the
/// first draw that passes the check.
pub fn delayed_gates_pass(c: &Circuit, cfg: &ObfuscationConfig) -> Result<PassOutput, PassError> {
    precheck(c, cfg)?;
    let seqs = delayed_sequences();
    let measured = measured_before(c);
    let mut rng = cfg.rng();
    let mut out = c.empty_like();
    out.boxes = c.boxes.clone();
    let mut committed = 0;
    let mut i = 0;
    while i < c.gates.len() {
        let g = &c.gates[i];
        if !(g.kind.is_unitary() && g.origin == Origin::Original) || !rng.gen_bool(cfg.intensity) {
            out.gates.push(g.clone());
            i += 1;
            continue;
        }
        let mut done = None;
        for _ in 0..DELAYED_RETRIES {
            let len = rng.gen_range(1..=MAX_BLOCK).min(c.gates.len() - i);
            let block = &c.gates[i..i + len];
            if !block_fits(block) {
                continue;
            }
            let touched: BTreeSet<usize> = block.iter().flat_map(|g| g.qubits.iter().copied()).collect();
            if touched.len() > MAX_TOUCHED {
                continue;
            }
            let touched: Vec<usize> = touched.into_iter().collect();
            let seq = seqs.choose(&mut rng).expect("nine sequences");
            let Some(ops) = pick_operands(&mut rng, seq.n_slots, &touched, &measured[i + len]) else {
                continue;
            };
            if commits(seq, &ops, block) {
                done = Some((len, seq, ops));
                break;
            }
        }
        match done {
            Some((len, seq, ops)) => {
                let block = &c.gates[i..i + len];
                let wrap: Vec<GateApp> = seq
                    .bind(&ops, &Origin::Inserted)
                    .map(|mut d| {
                        d.box_id = block[0].box_id;
                        d
                    })
                    .collect();
                out.gates.extend(wrap.iter().cloned());
                out.gates.extend(block.iter().cloned());
                out.gates.extend(wrap);
                committed += 1;
                i += len;
            }
            None => {
                out.gates.push(g.clone());
                i += 1;
            }
        }
    }
    let warnings = if committed == 0 {
        vec!["no committable delayed insertion found".to_string()]
    } else {
        Vec::new()
    };
    Ok(PassOutput { circuit: out, warnings })
}
