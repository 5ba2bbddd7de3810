use rand::Rng;

use super::sequences::{auxiliary_sequence, restore_sequence};
use super::{anchor_candidates, measured_before, pick_operands, precheck, ObfuscationConfig, PassError, PassOutput};
use crate::circuit::{Circuit, GateApp, Origin};

const MIN_DECOY: usize = 2;
const MAX_DECOY: usize = 4;

fn push_pair(out: &mut Circuit, qubit: usize, next_box: &mut usize) {
    for seq in [auxiliary_sequence(), restore_sequence()] {
        let id = *next_box;
        *next_box += 1;
        out.boxes.insert(id, format!("{}{id}", seq.name));
        out.gates
            .extend(seq.bind(&[qubit], &Origin::Inserted).map(|g| g.in_box(id)));
    }
}

fn fresh_box_id(c: &Circuit) -> usize {
    c.boxes.keys().next_back().map_or(0, |k| k + 1)
}

/// Insert one auxiliary box and one restore box on `qubit` before gate `site`.
pub fn insert_composite_pair(c: &Circuit, qubit: usize, site: usize) -> Circuit {
    assert!(qubit < c.n_qubits() && site <= c.gates.len());
    let mut out = c.clone();
    let mut next_box = fresh_box_id(c);
    let mut pair = c.empty_like();
    push_pair(&mut pair, qubit, &mut next_box);
    out.boxes.extend(pair.boxes);
    out.gates.splice(site..site, pair.gates);
    out
}

fn eligible_for_decoy(g: &GateApp) -> bool {
    g.kind.is_unitary() && g.box_id.is_none() && g.origin == Origin::Original
}

/// Group original gates into decoy boxes and insert auxiliary/restore box
/// pairs, whose product is the identity, at randomly selected sites.
///
/// A run of 2 to 4 consecutive gates starts a decoy box with probability
/// `intensity / 2`. A site is any gap not strictly inside a box; each is
/// selected with probability `intensity`.
pub fn composite_gates_pass(c: &Circuit, cfg: &ObfuscationConfig) -> Result<PassOutput, PassError> {
    precheck(c, cfg)?;
    if c.is_empty() {
        return Ok(PassOutput::unchanged(c, "no eligible insertion site"));
    }
    let mut rng = cfg.rng();
    let mut next_box = fresh_box_id(c);
    let mut grouped = c.clone();
    let mut i = 0;
    while i < grouped.gates.len() {
        if eligible_for_decoy(&grouped.gates[i]) && rng.gen_bool(cfg.intensity / 2.0) {
            let want = rng.gen_range(MIN_DECOY..=MAX_DECOY);
            let run = grouped.gates[i..]
                .iter()
                .take(want)
                .take_while(|g| eligible_for_decoy(g))
                .count();
            if run >= MIN_DECOY {
                let id = next_box;
                next_box += 1;
                grouped.boxes.insert(id, format!("group{id}"));
                for g in &mut grouped.gates[i..i + run] {
                    g.box_id = Some(id);
                }
                i += run;
                continue;
            }
        }
        i += 1;
    }

    let measured = measured_before(&grouped);
    let mut out = grouped.empty_like();
    out.boxes = grouped.boxes.clone();
    let mut placed = 0;
    for site in 0..=grouped.gates.len() {
        let inside_box = site > 0
            && site < grouped.gates.len()
            && grouped.gates[site].box_id.is_some()
            && grouped.gates[site].box_id == grouped.gates[site - 1].box_id;
        if !inside_box && rng.gen_bool(cfg.intensity) {
            let anchors = anchor_candidates(&grouped, site, &measured[site]);
            if let Some(ops) = pick_operands(&mut rng, 1, &anchors, &measured[site]) {
                push_pair(&mut out, ops[0], &mut next_box);
                placed += 1;
            }
        }
        if let Some(g) = grouped.gates.get(site) {
            out.gates.push(g.clone());
        }
    }
    let warnings = if placed == 0 {
        vec!["no insertion site selected".to_string()]
    } else {
        Vec::new()
    };
    Ok(PassOutput { circuit: out, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind::*;
    use crate::passes::Method;
    use crate::qasm::{emit, parse};
    use crate::sim::unitary_of;

    fn cfg(seed: u64, intensity: f64) -> ObfuscationConfig {
        ObfuscationConfig::new(Method::Composite, seed, intensity)
    }

    #[test]
    fn single_pair_on_empty_circuit_is_identity() {
        let c = Circuit::new(1, 0);
        let out = insert_composite_pair(&c, 0, 0);
        assert_eq!(out.gates.len(), 12);
        assert_eq!(out.boxes.len(), 2);
        assert!(unitary_of(&out).unwrap().is_identity(1e-12));
    }

    #[test]
    fn empty_input_warns() {
        let out = composite_gates_pass(&Circuit::new(1, 0), &cfg(0, 1.0)).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn boxes_are_contiguous_and_survive_emission() {
        let mut c = Circuit::new(3, 0);
        for _ in 0..3 {
            c.gate(H, &[0]).gate(Cx, &[0, 1]).gate(T, &[2]).gate(Cz, &[1, 2]);
        }
        for seed in 0..40 {
            let out = composite_gates_pass(&c, &cfg(seed, 0.8)).unwrap().circuit;
            let mut closed = std::collections::BTreeSet::new();
            let mut prev = None;
            for g in &out.gates {
                if g.box_id != prev {
                    if let Some(p) = prev {
                        closed.insert(p);
                    }
                    if let Some(b) = g.box_id {
                        assert!(!closed.contains(&b), "box {b} split");
                    }
                    prev = g.box_id;
                }
            }
            assert!(out.flatten().undo_provenance().same_ops(&c));
            let text = emit(&out);
            assert!(parse(&text).unwrap().same_ops(&out.flatten()));
        }
    }

    #[test]
    fn decoys_only_group_original_gates() {
        let mut c = Circuit::new(2, 0);
        for _ in 0..10 {
            c.gate(H, &[0]).gate(X, &[1]);
        }
        let out = composite_gates_pass(&c, &cfg(3, 1.0)).unwrap().circuit;
        let decoys: Vec<_> = out.boxes.iter().filter(|(_, n)| n.starts_with("group")).collect();
        assert!(!decoys.is_empty());
        for (id, _) in decoys {
            assert!(out
                .gates
                .iter()
                .filter(|g| g.box_id == Some(*id))
                .all(|g| g.origin == Origin::Original));
        }
    }
}
