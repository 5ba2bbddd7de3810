//! Control-flow obfuscation: wrap a source block behind an opaque predicate.
//!
//! The payload is opaque text. It is copied into the live branches of an
//! emitted program with every line prefixed by the template's indent, so
//! [`extract_payload`] can recover it byte for byte. Dead branches receive
//! decoys from [`generate_decoy`].

mod decoy;
mod template;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::predicate::{self, Guard, PredicateError, PredicateKind, PredicateParams, SemanticsKind};
use crate::qasm::emit;

pub use decoy::{generate_decoy, line_bound};
pub use template::{
    builtin_templates, env_template_dir, fill, list_templates, load_template, placeholders_in, Template,
    TemplateInfo, TemplateListing, PLACEHOLDERS, TEMPLATE_DIR_ENV,
};

pub const MANIFEST_SCHEMA: &str = "qfuscate.wrap/v1";
pub const MANIFEST_JSON_SCHEMA: &str = include_str!("../../schemas/manifest.schema.json");
/// Key of the catch-all entry in an outcome map.
pub const DEFAULT_KEY: &str = "*";

#[derive(Debug, Error, PartialEq)]
pub enum WrapError {
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("invalid template: {0}")]
    BadTemplate(String),
    #[error("payload is empty")]
    EmptyPayload,
    #[error("payload collides with template markers (line {0})")]
    MarkerCollision(usize),
    #[error("decoy policy {mode} is not valid for the {kind} predicate")]
    InvalidPolicy { mode: DecoyMode, kind: PredicateKind },
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("emitted text does not match manifest: {0}")]
    Extraction(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceBlock {
    pub text: String,
    pub language_tag: String,
    pub line_count: usize,
}

impl SourceBlock {
    pub fn new(text: impl Into<String>, language_tag: impl Into<String>) -> Result<Self, WrapError> {
        let text = text.into();
        if text.is_empty() {
            return Err(WrapError::EmptyPayload);
        }
        let line_count = split_lines(&text).0.len();
        Ok(SourceBlock {
            text,
            language_tag: language_tag.into(),
            line_count,
        })
    }
}

/// Lines of `text` split on LF, and whether it ended with one.
fn split_lines(text: &str) -> (Vec<&str>, bool) {
    let trailing = text.ends_with('\n');
    let body = text.strip_suffix('\n').unwrap_or(text);
    (body.split('\n').collect(), trailing)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyMode {
    DuplicatePayload,
    DeadDecoy,
    Restart,
}

impl std::fmt::Display for DecoyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecoyMode::DuplicatePayload => "duplicate_payload",
            DecoyMode::DeadDecoy => "dead_decoy",
            DecoyMode::Restart => "restart",
        })
    }
}

impl FromStr for DecoyMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "duplicate_payload" | "duplicate" => Ok(DecoyMode::DuplicatePayload),
            "dead_decoy" | "decoy" => Ok(DecoyMode::DeadDecoy),
            "restart" => Ok(DecoyMode::Restart),
            _ => Err(format!("unknown decoy policy '{s}' (expected duplicate_payload, dead_decoy or restart)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoyPolicy {
    pub mode: DecoyMode,
    pub decoy_seed: u64,
    pub decoy_statement_count: usize,
}

impl DecoyPolicy {
    /// The policy used when none is given for `kind`.
    pub fn default_for(kind: PredicateKind) -> Self {
        let mode = match kind {
            PredicateKind::Bell => DecoyMode::DuplicatePayload,
            PredicateKind::MultiPair => DecoyMode::Restart,
            PredicateKind::Shroud | PredicateKind::Branch => DecoyMode::DeadDecoy,
        };
        DecoyPolicy {
            mode,
            decoy_seed: 0,
            decoy_statement_count: 2,
        }
    }

    pub fn allowed_for(&self, kind: PredicateKind) -> bool {
        match kind {
            PredicateKind::Bell => self.mode == DecoyMode::DuplicatePayload,
            PredicateKind::MultiPair => matches!(self.mode, DecoyMode::Restart | DecoyMode::DeadDecoy),
            PredicateKind::Shroud | PredicateKind::Branch => self.mode == DecoyMode::DeadDecoy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchRole {
    Live,
    Dead,
    Restart,
}

/// What a branch body holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Payload,
    /// Zero-based part of a payload split at the template's split marker.
    PayloadPart(usize),
    Decoy,
    /// Decoy statements followed by the restart body.
    DecoyThenRestart,
    Restart,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestBranch {
    pub id: String,
    pub role: BranchRole,
    pub body: BodyKind,
    /// Function name in the emitted program.
    pub function: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadRecord {
    /// Hex SHA-256 of the payload bytes.
    pub digest: String,
    pub bytes: usize,
    pub lines: usize,
    pub trailing_newline: bool,
    /// Prefix added to every embedded payload line.
    pub indent: String,
    /// Index of the split-marker line, for split payloads.
    pub split_line: Option<usize>,
    pub language_tag: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapManifest {
    pub schema: String,
    pub template_id: String,
    pub predicate: PredicateKind,
    pub params: PredicateParams,
    pub key_bits: Vec<usize>,
    /// Branch key (or `*`, or `amp:<index>`) to branch id.
    pub outcome_map: BTreeMap<String, String>,
    pub branches: Vec<ManifestBranch>,
    pub payload: PayloadRecord,
    pub policy: DecoyPolicy,
}

impl WrapManifest {
    pub fn branch(&self, id: &str) -> Option<&ManifestBranch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

fn guard_key(g: &Guard) -> String {
    match g {
        Guard::Key(k) => k.clone(),
        Guard::Otherwise => DEFAULT_KEY.to_string(),
        Guard::AmplitudeNonzero(i) => format!("amp:{i}"),
    }
}

fn check_collisions(lines: &[&str], t: &Template) -> Result<(), WrapError> {
    let end = t.end_marker.trim();
    let begin = t.begin_prefix().trim();
    for (i, l) in lines.iter().enumerate() {
        let s = l.trim();
        if s == end || (!begin.is_empty() && s.starts_with(begin)) {
            return Err(WrapError::MarkerCollision(i + 1));
        }
    }
    Ok(())
}

fn render_function(t: &Template, name: &str, id: &str, body: &[String], tail: Option<&str>) -> String {
    let mut vals = BTreeMap::new();
    vals.insert("NAME", name.to_string());
    let mut out = fill(&t.function_header, &vals);
    out.push('\n');
    out.push_str(&t.begin_line(id));
    out.push('\n');
    for l in body {
        out.push_str(&t.indent);
        out.push_str(l);
        out.push('\n');
    }
    out.push_str(&t.end_line());
    out.push('\n');
    match tail {
        Some(tail) => {
            out.push_str(&t.indent);
            out.push_str(tail);
            out.push('\n');
        }
        None if body.is_empty() => {
            out.push_str(&t.indent);
            out.push_str(&t.noop_body);
            out.push('\n');
        }
        None => {}
    }
    out
}

/// Wrap `src` behind the predicate `kind` using template `t`.
pub fn wrap(
    src: &SourceBlock,
    kind: PredicateKind,
    params: &PredicateParams,
    policy: &DecoyPolicy,
    t: &Template,
) -> Result<(String, WrapManifest), WrapError> {
    if src.text.is_empty() {
        return Err(WrapError::EmptyPayload);
    }
    if !policy.allowed_for(kind) {
        return Err(WrapError::InvalidPolicy {
            mode: policy.mode,
            kind,
        });
    }
    let pred = predicate::build(kind, params)?;
    predicate::outcome_model(&pred)?;
    let (lines, trailing) = split_lines(&src.text);
    check_collisions(&lines, t)?;

    let split_line = if kind == PredicateKind::Shroud {
        lines.iter().position(|l| *l == t.split_marker)
    } else {
        None
    };
    let parts: [Vec<&str>; 2] = match split_line {
        Some(i) => [lines[..i].to_vec(), lines[i + 1..].to_vec()],
        None => [lines.clone(), Vec::new()],
    };

    let mut branches = Vec::new();
    let mut outcome_map = BTreeMap::new();
    let mut live_text = String::new();
    let mut decoy_text = String::new();
    let mut part = 0;
    for (i, b) in pred.semantics.branches.iter().enumerate() {
        let function = format!("_branch_{i}");
        let (role, body) = match (b.probability > 0.0, &b.guard) {
            (false, _) => (BranchRole::Dead, BodyKind::Decoy),
            (true, Guard::AmplitudeNonzero(_)) => {
                part += 1;
                (BranchRole::Live, BodyKind::PayloadPart(part - 1))
            }
            (true, _) if kind == PredicateKind::MultiPair && b.id == "all-ones-branch" => match policy.mode {
                DecoyMode::Restart => (BranchRole::Restart, BodyKind::Restart),
                _ => (BranchRole::Restart, BodyKind::DecoyThenRestart),
            },
            (true, _) => (BranchRole::Live, BodyKind::Payload),
        };
        let decoy_lines = |salt: u64| -> Vec<String> {
            let p = DecoyPolicy {
                decoy_seed: policy.decoy_seed.wrapping_add(salt),
                ..*policy
            };
            let d = generate_decoy(src, &p);
            split_lines(&d).0.into_iter().map(str::to_string).collect()
        };
        let rendered = match body {
            BodyKind::Payload => {
                render_function(t, &function, &b.id, &lines.iter().map(|s| s.to_string()).collect::<Vec<_>>(), None)
            }
            BodyKind::PayloadPart(p) => {
                let ls: Vec<String> = parts[p].iter().map(|s| s.to_string()).collect();
                render_function(t, &function, &b.id, &ls, None)
            }
            BodyKind::Decoy => render_function(t, &function, &b.id, &decoy_lines(i as u64), None),
            BodyKind::DecoyThenRestart => {
                render_function(t, &function, &b.id, &decoy_lines(i as u64), Some(&t.restart_body))
            }
            BodyKind::Restart => render_function(t, &function, &b.id, &[], Some(&t.restart_body)),
        };
        let target = if role == BranchRole::Live { &mut live_text } else { &mut decoy_text };
        if !target.is_empty() {
            target.push_str("\n\n");
        }
        target.push_str(&rendered);
        outcome_map.insert(guard_key(&b.guard), b.id.clone());
        branches.push(ManifestBranch {
            id: b.id.clone(),
            role,
            body,
            function,
        });
    }

    let table = branch_table(t, &pred.semantics, &branches);
    let mut vals = BTreeMap::new();
    vals.insert("PREDICATE_CIRCUIT_QASM", emit(&pred.circuit));
    vals.insert("BRANCH_TABLE", table);
    vals.insert("PAYLOAD", live_text);
    vals.insert("DECOYS", decoy_text);
    vals.insert("INDENT", t.indent.clone());
    let preamble = match pred.semantics.kind {
        SemanticsKind::Measured => &t.measured_preamble,
        SemanticsKind::AmplitudeRead => &t.amplitude_preamble,
    };
    let mut emitted = fill(preamble.trim_start_matches('\n'), &vals);
    if !emitted.ends_with('\n') {
        emitted.push('\n');
    }

    let manifest = WrapManifest {
        schema: MANIFEST_SCHEMA.to_string(),
        template_id: t.id.clone(),
        predicate: kind,
        params: pred.params,
        key_bits: pred.semantics.key_bits.clone(),
        outcome_map,
        branches,
        payload: PayloadRecord {
            digest: sha256_hex(src.text.as_bytes()),
            bytes: src.text.len(),
            lines: lines.len(),
            trailing_newline: trailing,
            indent: t.indent.clone(),
            split_line,
            language_tag: src.language_tag.clone(),
        },
        policy: *policy,
    };
    Ok((emitted, manifest))
}

fn branch_table(t: &Template, sem: &predicate::BranchSemantics, branches: &[ManifestBranch]) -> String {
    let mut out = String::new();
    let mut vals = BTreeMap::new();
    vals.insert("INDENT", t.indent.clone());
    if sem.kind == SemanticsKind::Measured {
        let bits: Vec<String> = sem.key_bits.iter().map(|b| b.to_string()).collect();
        vals.insert("BITS", bits.join(", "));
        out.push_str(&fill(&t.key_bits, &vals));
        out.push('\n');
    }
    out.push_str(&t.table_open);
    out.push('\n');
    let mut default = t.none_literal.clone();
    for (m, b) in sem.branches.iter().zip(branches) {
        let key = match &m.guard {
            Guard::Key(k) => k.clone(),
            Guard::AmplitudeNonzero(i) => i.to_string(),
            Guard::Otherwise => {
                default = b.function.clone();
                continue;
            }
        };
        vals.insert("KEY", key);
        vals.insert("NAME", b.function.clone());
        out.push_str(&fill(&t.table_entry, &vals));
        out.push('\n');
    }
    out.push_str(&t.table_close);
    out.push('\n');
    vals.insert("NAME", default);
    out.push_str(&fill(&t.table_default, &vals));
    out
}

/// Body lines of every branch, with the uniform indent removed.
pub fn extract_branch_bodies(emitted: &str, manifest: &WrapManifest, t: &Template) -> Result<BTreeMap<String, Vec<String>>, WrapError> {
    let lines: Vec<&str> = emitted.split('\n').collect();
    let end = t.end_line();
    let mut out = BTreeMap::new();
    for b in &manifest.branches {
        let begin = t.begin_line(&b.id);
        let starts: Vec<usize> = (0..lines.len()).filter(|&i| lines[i] == begin).collect();
        let [start] = starts[..] else {
            return Err(WrapError::Extraction(format!("{} begin marker found {} times", b.id, starts.len())));
        };
        let stop = (start + 1..lines.len())
            .find(|&i| lines[i] == end)
            .ok_or_else(|| WrapError::Extraction(format!("{} has no end marker", b.id)))?;
        let body = lines[start + 1..stop]
            .iter()
            .map(|l| {
                l.strip_prefix(manifest.payload.indent.as_str())
                    .map(str::to_string)
                    .ok_or_else(|| WrapError::Extraction(format!("{} body line lacks indent", b.id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(b.id.clone(), body);
    }
    Ok(out)
}

/// Recover the payload bytes from the live branches of an emitted program.
pub fn extract_payload(emitted: &str, manifest: &WrapManifest, t: &Template) -> Result<String, WrapError> {
    let bodies = extract_branch_bodies(emitted, manifest, t)?;
    let mut parts: Vec<(usize, &Vec<String>)> = Vec::new();
    let mut whole: Vec<&Vec<String>> = Vec::new();
    for b in &manifest.branches {
        match b.body {
            BodyKind::Payload => whole.push(&bodies[&b.id]),
            BodyKind::PayloadPart(p) => parts.push((p, &bodies[&b.id])),
            _ => {}
        }
    }
    let lines: Vec<String> = if let Some(first) = whole.first() {
        if whole.iter().any(|w| w != first) {
            return Err(WrapError::Extraction("live copies of the payload differ".into()));
        }
        (*first).clone()
    } else {
        parts.sort_by_key(|(p, _)| *p);
        let mut ls = Vec::new();
        for (i, (_, body)) in parts.iter().enumerate() {
            if i > 0 && manifest.payload.split_line.is_some() {
                ls.push(t.split_marker.clone());
            }
            ls.extend(body.iter().cloned());
        }
        ls
    };
    let mut text = lines.join("\n");
    if manifest.payload.trailing_newline {
        text.push('\n');
    }
    if sha256_hex(text.as_bytes()) != manifest.payload.digest {
        return Err(WrapError::Extraction("payload digest mismatch".into()));
    }
    Ok(text)
}

/// Execution probability of every branch, from the simulated outcome model.
pub fn resolve_branches(manifest: &WrapManifest) -> Result<BTreeMap<String, f64>, WrapError> {
    let pred = predicate::build(manifest.predicate, &manifest.params)?;
    let model = predicate::outcome_model(&pred)?;
    Ok(manifest
        .branches
        .iter()
        .map(|b| (b.id.clone(), model.branch_probabilities.get(&b.id).copied().unwrap_or(0.0)))
        .collect())
}

/// Structural problems in a manifest. Empty means well formed.
pub fn check_manifest(manifest: &WrapManifest) -> Vec<String> {
    let mut problems = Vec::new();
    if manifest.schema != MANIFEST_SCHEMA {
        problems.push(format!("schema is '{}'", manifest.schema));
    }
    if manifest.payload.digest.len() != 64 || !manifest.payload.digest.bytes().all(|b| b.is_ascii_hexdigit()) {
        problems.push("payload digest is not a SHA-256 hex string".into());
    }
    let ids: Vec<&str> = manifest.branches.iter().map(|b| b.id.as_str()).collect();
    for (key, id) in &manifest.outcome_map {
        if !ids.contains(&id.as_str()) {
            problems.push(format!("outcome {key} maps to unknown branch {id}"));
        }
    }
    match resolve_branches(manifest) {
        Ok(probs) => {
            for b in &manifest.branches {
                let p = probs[&b.id];
                let reachable = matches!(b.role, BranchRole::Live | BranchRole::Restart);
                if (p > 0.0) != reachable {
                    problems.push(format!("branch {} has role {:?} but probability {p}", b.id, b.role));
                }
            }
        }
        Err(e) => problems.push(e.to_string()),
    }
    problems
}
