//! Browser bindings. Every export takes plain strings and numbers and
//! returns a JSON document; errors come back as a thrown string.

use qfuscate::metrics::gate_mode;
use qfuscate::passes::{default_ruleset, obfuscate, Method, ObfuscationConfig};
use qfuscate::predicate::{self, PredicateKind, PredicateParams};
use qfuscate::qasm::{emit, parse};
use qfuscate::wrap::{self, load_template, resolve_branches, DecoyPolicy, SourceBlock};
use qfuscate::{equivalent, EquivalenceMode};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn parse_or_report(src: &str) -> Result<qfuscate::Circuit, String> {
    parse(src).map_err(|diags| {
        diags
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    })
}

/// Run one obfuscation pass and check the result against the input.
pub fn obfuscate_json(src: &str, method: &str, seed: u64, intensity: f64) -> Result<String, String> {
    let c = parse_or_report(src)?;
    let method: Method = method.parse()?;
    let rules = default_ruleset().accepted;
    let out = obfuscate(&c, &ObfuscationConfig::new(method, seed, intensity), &rules).map_err(|e| e.to_string())?;
    let eq = equivalent(&c, &out.circuit, gate_mode(c.n_qubits())).map_err(|e| e.to_string())?;
    if !eq.equivalent {
        return Err("pass output is not equivalent to its input".into());
    }
    Ok(json!({
        "qasm": emit(&out.circuit),
        "warnings": out.warnings,
        "depth": [c.depth(), out.circuit.depth()],
        "gates": [c.gate_count().total, out.circuit.gate_count().total],
        "equivalence": eq,
    })
    .to_string())
}

fn params_for(kind: PredicateKind, n_pairs: usize, seed: u64) -> PredicateParams {
    PredicateParams {
        n_pairs: (kind == PredicateKind::MultiPair).then_some(n_pairs),
        seed: (kind == PredicateKind::Branch).then_some(seed),
    }
}

/// Build a predicate and return its circuit and exact outcome model.
pub fn predicate_json(kind: &str, n_pairs: usize, seed: u64) -> Result<String, String> {
    let kind: PredicateKind = kind.parse()?;
    let p = predicate::build(kind, &params_for(kind, n_pairs, seed)).map_err(|e| e.to_string())?;
    let model = predicate::outcome_model(&p).map_err(|e| e.to_string())?;
    Ok(json!({
        "qasm": emit(&p.circuit),
        "semantics": p.semantics,
        "model": model,
    })
    .to_string())
}

/// Wrap a payload behind a predicate with the default decoy policy.
pub fn wrap_json(payload: &str, kind: &str, template: &str, n_pairs: usize, seed: u64) -> Result<String, String> {
    let kind: PredicateKind = kind.parse()?;
    let t = load_template(template, None).map_err(|e| e.to_string())?;
    let src = SourceBlock::new(payload, "python").map_err(|e| e.to_string())?;
    let policy = DecoyPolicy {
        decoy_seed: seed,
        ..DecoyPolicy::default_for(kind)
    };
    let (program, manifest) =
        wrap::wrap(&src, kind, &params_for(kind, n_pairs, seed), &policy, &t).map_err(|e| e.to_string())?;
    let probs = resolve_branches(&manifest).map_err(|e| e.to_string())?;
    Ok(json!({
        "program": program,
        "manifest": manifest,
        "probabilities": probs,
    })
    .to_string())
}

/// Check two circuits for equivalence in the given mode.
pub fn verify_json(a: &str, b: &str, mode: &str) -> Result<String, String> {
    let (a, b) = (parse_or_report(a)?, parse_or_report(b)?);
    let mode: EquivalenceMode = mode.parse()?;
    let eq = equivalent(&a, &b, mode).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&eq).expect("serializes"))
}

#[wasm_bindgen(js_name = obfuscate)]
pub fn js_obfuscate(src: &str, method: &str, seed: u64, intensity: f64) -> Result<String, JsError> {
    obfuscate_json(src, method, seed, intensity).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = predicate)]
pub fn js_predicate(kind: &str, n_pairs: usize, seed: u64) -> Result<String, JsError> {
    predicate_json(kind, n_pairs, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = wrapPayload)]
pub fn js_wrap(payload: &str, kind: &str, template: &str, n_pairs: usize, seed: u64) -> Result<String, JsError> {
    wrap_json(payload, kind, template, n_pairs, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = verify)]
pub fn js_verify(a: &str, b: &str, mode: &str) -> Result<String, JsError> {
    verify_json(a, b, mode).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fixture)]
pub fn js_fixture(name: &str) -> Option<String> {
    qfuscate::fixtures::ALL
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s.to_string())
}
