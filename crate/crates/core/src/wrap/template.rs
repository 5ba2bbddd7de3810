use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::WrapError;

/// Placeholders every preamble must contain, and the only ones it may contain.
pub const PLACEHOLDERS: [&str; 5] = ["PREDICATE_CIRCUIT_QASM", "BRANCH_TABLE", "PAYLOAD", "DECOYS", "INDENT"];

/// Overrides the directory searched for template files.
pub const TEMPLATE_DIR_ENV: &str = "QFUSCATE_TEMPLATE_DIR";

const BUILTIN: [(&str, &str); 2] = [
    ("qiskit-python.toml", include_str!("../../templates/qiskit-python.toml")),
    ("cirq-python.toml", include_str!("../../templates/cirq-python.toml")),
];

/// An emitted-program dialect. Fragment fields use `{NAME}`, `{ID}`,
/// `{KEY}`, `{BITS}` and `{INDENT}` as their own placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub id: String,
    pub description: String,
    /// Uniform prefix for every line of a branch body.
    pub indent: String,
    pub function_header: String,
    pub begin_marker: String,
    pub end_marker: String,
    /// A payload line equal to this splits it across the two amplitude branches.
    pub split_marker: String,
    pub noop_body: String,
    pub restart_body: String,
    pub table_open: String,
    pub table_close: String,
    pub none_literal: String,
    pub table_entry: String,
    pub table_default: String,
    pub key_bits: String,
    pub measured_preamble: String,
    pub amplitude_preamble: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateInfo {
    pub id: String,
    pub description: String,
    /// File the template was read from; `None` for built-in templates.
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TemplateListing {
    pub templates: Vec<TemplateInfo>,
    pub warnings: Vec<String>,
}

/// Names of `{UPPER_CASE}` placeholders in `text`, in order of appearance.
pub fn placeholders_in(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                if !name.is_empty() && name.bytes().all(|b| b.is_ascii_uppercase() || b == b'_') {
                    out.push(name);
                    rest = &after[close + 1..];
                } else {
                    rest = after;
                }
            }
            None => break,
        }
    }
    out
}

/// Replace placeholders in one pass. Substituted text is never rescanned,
/// so payload bytes that look like placeholders survive unchanged.
pub fn fill(text: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after
            .find('}')
            .and_then(|close| values.get(&after[..close]).map(|v| (close, v)));
        match hit {
            Some((close, v)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

impl Template {
    pub fn parse(text: &str) -> Result<Template, WrapError> {
        let t: Template = toml::from_str(text).map_err(|e| WrapError::BadTemplate(e.message().to_string()))?;
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), WrapError> {
        let bad = |m: String| Err(WrapError::BadTemplate(format!("{}: {m}", self.id)));
        if self.id.trim().is_empty() {
            return bad("empty id".into());
        }
        for (field, text) in [
            ("measured_preamble", &self.measured_preamble),
            ("amplitude_preamble", &self.amplitude_preamble),
        ] {
            let found = placeholders_in(text);
            for p in PLACEHOLDERS {
                if !found.contains(&p) {
                    return bad(format!("{field} lacks {{{p}}}"));
                }
            }
            if let Some(extra) = found.iter().find(|p| !PLACEHOLDERS.contains(p)) {
                return bad(format!("{field} uses unknown placeholder {{{extra}}}"));
            }
        }
        if !self.begin_marker.contains("{ID}") {
            return bad("begin_marker must contain {ID}".into());
        }
        if self.end_marker.contains("{ID}") {
            return bad("end_marker must not repeat the branch id".into());
        }
        if self.end_marker.trim().is_empty() || self.split_marker.trim().is_empty() {
            return bad("markers must be non-empty".into());
        }
        Ok(())
    }

    /// Text before `{ID}` in the begin marker.
    pub fn begin_prefix(&self) -> &str {
        self.begin_marker.split("{ID}").next().unwrap_or("")
    }

    pub fn begin_line(&self, id: &str) -> String {
        format!("{}{}", self.indent, self.begin_marker.replace("{ID}", id))
    }

    pub fn end_line(&self) -> String {
        format!("{}{}", self.indent, self.end_marker)
    }
}

pub fn builtin_templates() -> Vec<Template> {
    BUILTIN
        .iter()
        .map(|(file, text)| Template::parse(text).unwrap_or_else(|e| panic!("built-in template {file}: {e}")))
        .collect()
}

fn dir_templates(dir: &Path) -> Result<Vec<(PathBuf, Result<Template, WrapError>)>, std::io::Error> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| {
            let t = fs::read_to_string(&p)
                .map_err(|e| WrapError::BadTemplate(e.to_string()))
                .and_then(|s| Template::parse(&s));
            (p, t)
        })
        .collect())
}

/// Directory named by [`TEMPLATE_DIR_ENV`], if set.
pub fn env_template_dir() -> Option<PathBuf> {
    std::env::var_os(TEMPLATE_DIR_ENV).map(PathBuf::from)
}

/// Templates in `dir`, or the built-in set when `dir` is `None`.
pub fn list_templates(dir: Option<&Path>) -> TemplateListing {
    let mut listing = TemplateListing::default();
    match dir {
        None => {
            listing.templates = builtin_templates()
                .into_iter()
                .map(|t| TemplateInfo {
                    id: t.id,
                    description: t.description,
                    path: None,
                })
                .collect();
        }
        Some(dir) => match dir_templates(dir) {
            Ok(found) => {
                for (path, t) in found {
                    match t {
                        Ok(t) => listing.templates.push(TemplateInfo {
                            id: t.id,
                            description: t.description,
                            path: Some(path),
                        }),
                        Err(e) => listing.warnings.push(format!("{}: {e}", path.display())),
                    }
                }
            }
            Err(e) => listing
                .warnings
                .push(format!("cannot read template directory {}: {e}", dir.display())),
        },
    }
    listing
}

/// Find a template by id in `dir`, or among the built-ins when `dir` is `None`.
pub fn load_template(id: &str, dir: Option<&Path>) -> Result<Template, WrapError> {
    let candidates = match dir {
        None => builtin_templates(),
        Some(dir) => dir_templates(dir)
            .map_err(|e| WrapError::UnknownTemplate(format!("{id} ({}: {e})", dir.display())))?
            .into_iter()
            .filter_map(|(_, t)| t.ok())
            .collect(),
    };
    candidates
        .into_iter()
        .find(|t| t.id == id)
        .ok_or_else(|| WrapError::UnknownTemplate(id.to_string()))
}
