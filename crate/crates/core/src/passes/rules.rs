//! Substitution rules for the cloaked pass and their oracle verification.
//!
//! Rules are data. A rule is only usable after [`verify_ruleset`] has shown
//! that its replacement equals the target gate up to a global phase.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sequences::GateSequence;
use crate::circuit::GateKind;
use crate::sim::{gate_matrix, Unitary};

/// Tolerance for accepting a substitution.
pub const RULE_TOL: f64 = 1e-10;

/// The cloaked substitutions for `X` shipped with the tool.
pub const DEFAULT_RULES: &str = include_str!("../../rules/cloaked_x.rules");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionRule {
    pub target: GateKind,
    pub replacement: GateSequence,
    /// Set only by verification.
    pub verified: bool,
    /// `effective_unitary(replacement) = phase_factor * gate_matrix(target)`.
    pub phase_factor: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedRule {
    pub target: GateKind,
    pub replacement: GateSequence,
    pub reason: String,
    /// Computed effect of the replacement, when it could be computed.
    pub effective: Option<Unitary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RulesetReport {
    pub accepted: Vec<SubstitutionRule>,
    pub rejected: Vec<RejectedRule>,
}

impl RulesetReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.accepted {
            let p = r.phase_factor;
            out.push_str(&format!(
                "accept  {}: {}  (phase {})\n",
                r.target,
                r.replacement.describe(),
                fmt_phase(p)
            ));
        }
        for r in &self.rejected {
            out.push_str(&format!(
                "reject  {}: {}  ({})\n",
                r.target,
                r.replacement.describe(),
                r.reason
            ));
            if let Some(u) = &r.effective {
                out.push_str(&format!("        effective unitary = {}\n", u.pretty()));
            }
        }
        out
    }
}

fn fmt_phase(p: Complex64) -> String {
    let near = |a: f64, b: f64| (a - b).abs() < 1e-9;
    if near(p.re, 1.0) {
        "1".into()
    } else if near(p.re, -1.0) {
        "-1".into()
    } else if near(p.im, 1.0) {
        "i".into()
    } else if near(p.im, -1.0) {
        "-i".into()
    } else {
        format!("e^(i*{:.6})", p.arg())
    }
}

/// Check one rule against its target.
pub fn verify_rule(target: GateKind, replacement: GateSequence) -> Result<SubstitutionRule, RejectedRule> {
    let Ok(target_matrix) = gate_matrix(target) else {
        return Err(RejectedRule {
            target,
            replacement,
            reason: format!("{target} is not a unitary gate"),
            effective: None,
        });
    };
    if Some(replacement.n_slots) != target.arity() {
        return Err(RejectedRule {
            reason: format!(
                "replacement uses {} slot(s) but {target} acts on {}",
                replacement.n_slots,
                target.arity().unwrap_or(0)
            ),
            target,
            replacement,
            effective: None,
        });
    }
    let effective = replacement.effective_unitary();
    match effective.phase_relative_to(&target_matrix) {
        Some((phase, dev)) if dev <= RULE_TOL && (phase.norm() - 1.0).abs() <= RULE_TOL => {
            Ok(SubstitutionRule {
                target,
                replacement,
                verified: true,
                phase_factor: phase,
            })
        }
        _ => Err(RejectedRule {
            target,
            replacement,
            reason: format!("not equal to {target} up to a global phase"),
            effective: Some(effective),
        }),
    }
}

pub fn verify_ruleset(rules: &[(GateKind, GateSequence)]) -> RulesetReport {
    let mut report = RulesetReport::default();
    for (target, seq) in rules {
        match verify_rule(*target, seq.clone()) {
            Ok(r) => report.accepted.push(r),
            Err(r) => report.rejected.push(r),
        }
    }
    report
}

#[derive(Debug, Error, PartialEq)]
#[error("ruleset line {line}: {message}")]
pub struct RulesetParseError {
    pub line: usize,
    pub message: String,
}

/// Parse the ruleset text format: `target: gate gate ...`, `#` comments.
pub fn parse_ruleset(text: &str) -> Result<Vec<(GateKind, GateSequence)>, RulesetParseError> {
    let mut rules = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |message: String| RulesetParseError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (lhs, rhs) = content
            .split_once(':')
            .ok_or_else(|| err("expected `target: gate ...`".into()))?;
        let target = GateKind::from_gate_name(lhs.trim())
            .ok_or_else(|| err(format!("unknown target gate '{}'", lhs.trim())))?;
        let n_slots = target.arity().expect("unitary");
        let mut gates = Vec::new();
        for word in rhs.split_whitespace() {
            let (name, slots) = match word.split_once('[') {
                Some((name, rest)) => {
                    let inner = rest
                        .strip_suffix(']')
                        .ok_or_else(|| err(format!("unclosed slot list in '{word}'")))?;
                    let slots = inner
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| err(format!("bad slot index in '{word}'")))?;
                    (name, Some(slots))
                }
                None => (word, None),
            };
            let kind = GateKind::from_gate_name(name)
                .ok_or_else(|| err(format!("unknown gate '{name}'")))?;
            let arity = kind.arity().expect("unitary");
            let slots = slots.unwrap_or_else(|| (0..arity).collect());
            gates.push((kind, slots));
        }
        if gates.is_empty() {
            return Err(err("empty replacement".into()));
        }
        let seq = GateSequence::try_new(rhs.trim().to_ascii_lowercase(), n_slots, gates).map_err(err)?;
        rules.push((target, seq));
    }
    Ok(rules)
}

/// The shipped ruleset, verified.
pub fn default_ruleset() -> RulesetReport {
    verify_ruleset(&parse_ruleset(DEFAULT_RULES).expect("shipped ruleset parses"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use GateKind::*;

    fn seq(kinds: &[GateKind]) -> GateSequence {
        GateSequence::single("t", kinds)
    }

    #[test]
    fn hzh_accepted_with_unit_phase() {
        let r = verify_rule(X, seq(&[H, Z, H])).unwrap();
        assert!(r.verified);
        assert!((r.phase_factor - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zhzhz_is_minus_x() {
        let r = verify_rule(X, seq(&[Z, H, Z, H, Z])).unwrap();
        assert!((r.phase_factor + Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sys_is_rejected_with_matrix() {
        let r = verify_rule(X, seq(&[S, Y, S])).unwrap_err();
        let u = r.effective.expect("matrix attached");
        // S Y S = i Y = [[0, 1], [-1, 0]], worked by hand.
        assert_eq!(u.pretty(), "[[0, 1], [-1, 0]]");
    }

    #[test]
    fn default_ruleset_verdicts() {
        let report = default_ruleset();
        assert_eq!(report.accepted.len() + report.rejected.len(), 6);
        let accepted: Vec<String> = report.accepted.iter().map(|r| r.replacement.describe()).collect();
        assert_eq!(accepted, ["h z h", "z h z h z", "sdg y s"]);
        let rejected: Vec<String> = report.rejected.iter().map(|r| r.replacement.describe()).collect();
        assert_eq!(rejected, ["s y s", "h y h", "s z y z s"]);
        assert!(report.rejected.iter().all(|r| r.effective.is_some()));
        assert!(report.render().contains("effective unitary"));
    }

    #[test]
    fn multi_qubit_rules() {
        let rules = parse_ruleset("cx: h[1] cz[0,1] h[1]\ncz: h[1] cx h[1]\n").unwrap();
        let report = verify_ruleset(&rules);
        assert_eq!(report.accepted.len(), 2, "{}", report.render());
    }

    #[test]
    fn slot_mismatch_rejected() {
        let s = GateSequence::new("cx", 2, vec![(Cx, vec![0, 1])]);
        let r = verify_rule(X, s).unwrap_err();
        assert!(r.effective.is_none());
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = parse_ruleset("# ok\nx: h q h\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_ruleset("x h z h").is_err());
        assert!(parse_ruleset("x:").is_err());
        assert!(parse_ruleset("x: cx[0,1]").is_err());
    }
}
