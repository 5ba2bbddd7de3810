mod common;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use qfuscate::metrics::{measure_circuit_run, measure_wrap_run, parse_reports, render_report, ReportFormat, REPORT_JSON_SCHEMA};
use qfuscate::passes::{default_ruleset, obfuscate, Method, ObfuscationConfig};
use qfuscate::predicate::{build, outcome_model, PredicateKind, PredicateParams};
use qfuscate::wrap::{
    builtin_templates, check_manifest, extract_branch_bodies, extract_payload, generate_decoy, line_bound,
    resolve_branches, wrap, BranchRole, DecoyMode, DecoyPolicy, SourceBlock, WrapManifest, MANIFEST_JSON_SCHEMA,
};
use qfuscate::fixtures;
use serde_json::Value;

fn validator(schema: &str) -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(schema).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &str) {
    let doc: Value = serde_json::from_str(doc).unwrap();
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

/// One payload line with hostile whitespace: tabs, mixed leading runs,
/// trailing blanks, carriage returns, empty lines and non-ASCII text.
fn line() -> impl Strategy<Value = String> {
    let lead = prop::collection::vec(prop::sample::select(vec![" ", "\t", "  ", "\u{a0}"]), 0..6).prop_map(|v| v.concat());
    let body = prop_oneof![
        Just(String::new()),
        "[a-z_][a-z0-9_]{0,8} = [0-9]{1,4}",
        "print\\(\"[ -~&&[^\"\\\\]]{0,20}\"\\)",
        "def [a-z]{1,6}\\(\\):",
        "# [a-z ]{0,12}",
        "return [a-z]{1,5} \\+ [0-9]{1,3}",
        "[\u{e9}\u{4e2d}\u{1f600}a-z]{1,6}",
        Just("{PAYLOAD}".to_string()),
        Just("{INDENT}x".to_string()),
    ];
    let tail = prop::sample::select(vec!["", " ", "\t", "\r", "  "]);
    (lead, body, tail).prop_map(|(l, b, t)| format!("{l}{b}{t}"))
}

fn payload(max_lines: usize) -> impl Strategy<Value = String> {
    (prop::collection::vec(line(), 1..=max_lines), any::<bool>())
        .prop_map(|(ls, nl)| {
            let mut s = ls.join("\n");
            if nl || s.is_empty() {
                s.push('\n');
            }
            s
        })
}

fn kind_params() -> impl Strategy<Value = (PredicateKind, PredicateParams)> {
    prop_oneof![
        Just((PredicateKind::Bell, PredicateParams::default())),
        (1usize..=4).prop_map(|n| (PredicateKind::MultiPair, PredicateParams { n_pairs: Some(n), seed: None })),
        Just((PredicateKind::Shroud, PredicateParams::default())),
        any::<u64>().prop_map(|s| (PredicateKind::Branch, PredicateParams { n_pairs: None, seed: Some(s) })),
    ]
}

fn policy_for(kind: PredicateKind, seed: u64, count: usize, alt: bool) -> DecoyPolicy {
    let mut p = DecoyPolicy::default_for(kind);
    p.decoy_seed = seed;
    p.decoy_statement_count = count;
    if alt && kind == PredicateKind::MultiPair {
        p.mode = DecoyMode::DeadDecoy;
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn payload_survives_wrapping(text in payload(200), (kind, params) in kind_params(), seed in any::<u64>(), count in 0usize..5, alt in any::<bool>(), tpl in 0usize..2) {
        let t = &builtin_templates()[tpl];
        let src = SourceBlock::new(text.clone(), "python").unwrap();
        let policy = policy_for(kind, seed, count, alt);
        let (emitted, manifest) = wrap(&src, kind, &params, &policy, t).unwrap();
        prop_assert_eq!(extract_payload(&emitted, &manifest, t).unwrap(), text.clone());
        let bodies = extract_branch_bodies(&emitted, &manifest, t).unwrap();
        let want: Vec<&str> = text.strip_suffix('\n').unwrap_or(&text).split('\n').collect();
        for b in &manifest.branches {
            if b.role == BranchRole::Live && kind != PredicateKind::Shroud {
                prop_assert_eq!(&bodies[&b.id], &want);
            }
        }
        // every branch marker appears once; no foreign markers
        let prefix = t.begin_prefix();
        let marked = emitted.lines().filter(|l| l.trim_start().starts_with(prefix.trim_start())).count();
        prop_assert_eq!(marked, manifest.branches.len());
        prop_assert!(check_manifest(&manifest).is_empty());
        let (again, m2) = wrap(&src, kind, &params, &policy, t).unwrap();
        prop_assert_eq!(again, emitted);
        prop_assert_eq!(m2, manifest.clone());
        prop_assert_eq!(WrapManifest::from_json(&manifest.to_json()).unwrap(), manifest);
    }

    #[test]
    fn resolved_probabilities_match_models((kind, params) in kind_params(), text in payload(8)) {
        let t = &builtin_templates()[0];
        let src = SourceBlock::new(text, "python").unwrap();
        let (_, manifest) = wrap(&src, kind, &params, &DecoyPolicy::default_for(kind), t).unwrap();
        let resolved = resolve_branches(&manifest).unwrap();
        let model = outcome_model(&build(kind, &params).unwrap()).unwrap();
        prop_assert_eq!(&resolved, &model.branch_probabilities);
        if kind != PredicateKind::Shroud {
            prop_assert!((resolved.values().sum::<f64>() - 1.0).abs() <= 1e-12);
        } else {
            prop_assert!(resolved.values().all(|&p| p == 1.0));
        }
        for b in &manifest.branches {
            prop_assert_eq!(b.role == BranchRole::Dead, resolved[&b.id] == 0.0);
        }
    }

    #[test]
    fn manifests_match_schema((kind, params) in kind_params(), text in payload(10), alt in any::<bool>()) {
        let v = validator(MANIFEST_JSON_SCHEMA);
        let t = &builtin_templates()[1];
        let src = SourceBlock::new(text, "python").unwrap();
        let (_, manifest) = wrap(&src, kind, &params, &policy_for(kind, 3, 2, alt), t).unwrap();
        assert_valid(&v, &manifest.to_json());
    }

    #[test]
    fn decoy_lines_stay_bounded(text in payload(30), seed in any::<u64>(), count in 0usize..6) {
        let src = SourceBlock::new(text, "python").unwrap();
        let policy = DecoyPolicy { mode: DecoyMode::DeadDecoy, decoy_seed: seed, decoy_statement_count: count };
        let d = generate_decoy(&src, &policy);
        let lines = |s: &str| s.strip_suffix('\n').unwrap_or(s).split('\n').count();
        prop_assert!(lines(&d) <= lines(&src.text) + line_bound(&policy));
        prop_assert_ne!(&d, &src.text);
    }
}

#[test]
fn decoys_differ_from_payload_for_many_seeds() {
    let payloads = [
        "x = 1\n",
        "print('hello')",
        "if True:\n    pass\n",
        "\n",
        "None\n",
        "a = b + c\nreturn a\n",
    ];
    for text in payloads {
        let src = SourceBlock::new(text, "python").unwrap();
        for seed in 0..1000u64 {
            let policy = DecoyPolicy { mode: DecoyMode::DeadDecoy, decoy_seed: seed, decoy_statement_count: 2 };
            assert_ne!(generate_decoy(&src, &policy), text, "seed {seed}");
        }
    }
}

#[test]
fn twenty_payloads_round_trip() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let t = &builtin_templates()[0];
    for i in 0..20 {
        let text = payload(200).new_tree(&mut runner).unwrap().current();
        let src = SourceBlock::new(text.clone(), "python").unwrap();
        for kind in PredicateKind::ALL {
            let params = PredicateParams { n_pairs: Some(1 + i % 12), seed: Some(i as u64) };
            let (emitted, m) = wrap(&src, kind, &params, &DecoyPolicy::default_for(kind), t).unwrap();
            assert_eq!(extract_payload(&emitted, &m, t).unwrap(), text);
        }
    }
}

#[test]
fn reports_match_schema_and_round_trip() {
    let v = validator(REPORT_JSON_SCHEMA);
    let rules = default_ruleset().accepted;
    let mut reports = Vec::new();
    for (name, c) in fixtures::all() {
        for m in Method::ALL {
            let out = obfuscate(&c, &ObfuscationConfig::new(m, 7, 0.5), &rules).unwrap();
            reports.push(measure_circuit_run(&c, &out.circuit, m.name(), name, Some(7)).unwrap());
        }
    }
    let src = SourceBlock::new("x = 1\n", "python").unwrap();
    reports.push(measure_wrap_run(&src, "longer output\n", "wrap:bell", "x.py"));
    let json = render_report(&reports, ReportFormat::Json);
    assert_valid(&v, &json);
    assert_eq!(parse_reports(&json).unwrap(), reports);
    assert_valid(&v, &render_report(&[], ReportFormat::Json));
    let stable: Vec<_> = reports.iter().map(|r| r.without_timings()).collect();
    let again: Vec<_> = fixtures::all()
        .into_iter()
        .flat_map(|(name, c)| {
            let rules = rules.clone();
            Method::ALL.into_iter().map(move |m| {
                let out = obfuscate(&c, &ObfuscationConfig::new(m, 7, 0.5), &rules).unwrap();
                measure_circuit_run(&c, &out.circuit, m.name(), name, Some(7)).unwrap().without_timings()
            })
        })
        .collect();
    assert_eq!(&stable[..again.len()], &again[..]);
}
