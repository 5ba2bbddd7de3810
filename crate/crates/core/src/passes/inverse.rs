use rand::seq::SliceRandom;
use rand::Rng;

use super::sequences::inverse_pairs;
use super::{anchor_candidates, measured_before, pick_operands, precheck, ObfuscationConfig, PassError, PassOutput};
use crate::circuit::{Circuit, Origin};

const REDRAWS: usize = 16;

/// Insert gate/inverse pairs at randomly selected sites.
///
/// Sites are the `len + 1` gaps around the gates. Each is selected with
/// probability `intensity`; a selected site receives one pair on distinct
/// unmeasured qubits, the two gates adjacent.
pub fn inverse_gates_pass(c: &Circuit, cfg: &ObfuscationConfig) -> Result<PassOutput, PassError> {
    precheck(c, cfg)?;
    if c.is_empty() {
        return Ok(PassOutput::unchanged(c, "no eligible insertion site"));
    }
    let pairs = inverse_pairs();
    let measured = measured_before(c);
    let mut rng = cfg.rng();
    let mut out = c.empty_like();
    out.boxes = c.boxes.clone();
    let mut inserted = 0;
    for site in 0..=c.gates.len() {
        if rng.gen_bool(cfg.intensity) {
            let anchors = anchor_candidates(c, site, &measured[site]);
            for _ in 0..REDRAWS {
                let pair = pairs.choose(&mut rng).expect("nine pairs");
                if let Some(ops) = pick_operands(&mut rng, pair.n_slots, &anchors, &measured[site]) {
                    out.gates.extend(pair.bind(&ops, &Origin::Inserted));
                    inserted += 1;
                    break;
                }
            }
        }
        if let Some(g) = c.gates.get(site) {
            out.gates.push(g.clone());
        }
    }
    let warnings = if inserted == 0 {
        vec!["no insertion site selected".to_string()]
    } else {
        Vec::new()
    };
    log::debug!("inverse pass inserted {inserted} pair(s)");
    Ok(PassOutput { circuit: out, warnings })
}
