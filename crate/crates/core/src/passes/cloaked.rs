use rand::seq::SliceRandom;
use rand::Rng;

use super::rules::SubstitutionRule;
use super::{precheck, ObfuscationConfig, PassError, PassOutput};
use crate::circuit::{Circuit, Origin, Substitution};

/// Replace gates by verified equivalent sequences.
///
/// Each original gate whose kind is the target of at least one rule is
/// replaced with probability `intensity` by a randomly chosen rule's
/// sequence. Phase factors are global, so every verified rule is usable.
pub fn cloaked_gates_pass(
    c: &Circuit,
    cfg: &ObfuscationConfig,
    rules: &[SubstitutionRule],
) -> Result<PassOutput, PassError> {
    precheck(c, cfg)?;
    if let Some(bad) = rules.iter().find(|r| !r.verified) {
        return Err(PassError::UnverifiedRule(format!(
            "{}: {}",
            bad.target,
            bad.replacement.describe()
        )));
    }
    if rules.is_empty() {
        return Ok(PassOutput::unchanged(c, "no applicable rules"));
    }
    let mut rng = cfg.rng();
    let mut out = c.empty_like();
    out.boxes = c.boxes.clone();
    let mut group = 0;
    let mut eligible = 0;
    for g in &c.gates {
        let matching: Vec<&SubstitutionRule> = if g.origin == Origin::Original {
            rules.iter().filter(|r| r.target == g.kind).collect()
        } else {
            Vec::new()
        };
        if !matching.is_empty() {
            eligible += 1;
            if rng.gen_bool(cfg.intensity) {
                let rule = matching.choose(&mut rng).expect("non-empty");
                let origin = Origin::Substituted(Substitution {
                    group,
                    target: g.kind,
                    target_qubits: g.qubits.clone(),
                });
                group += 1;
                out.gates.extend(rule.replacement.bind(&g.qubits, &origin).map(|mut r| {
                    r.box_id = g.box_id;
                    r
                }));
                continue;
            }
        }
        out.gates.push(g.clone());
    }
    let mut warnings = Vec::new();
    if eligible == 0 {
        warnings.push("no applicable rules".to_string());
    } else if group == 0 {
        warnings.push("no gate selected for substitution".to_string());
    }
    Ok(PassOutput { circuit: out, warnings })
}
