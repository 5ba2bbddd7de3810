use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DecoyPolicy, SourceBlock};

/// Words left alone by renaming: Python keywords and common builtins.
const RESERVED: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda",
    "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield", "print", "range",
    "len", "int", "str", "float", "list", "dict", "set", "tuple", "open", "self", "sum", "min", "max", "abs",
];

const STEMS: &[&str] = &[
    "acc", "buf", "ctx", "val", "tmp", "idx", "res", "cfg", "obj", "node", "item", "data", "state", "count",
    "total", "seed", "key", "span", "mask", "level",
];

#[derive(Clone, Copy, PartialEq)]
enum Tok {
    Ident,
    Number,
    Other,
}

/// Split a line into identifier, number and other runs. Quoted strings and
/// `#` comments are kept whole as `Other`.
fn lex(line: &str) -> Vec<(Tok, &str)> {
    let b = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let start = i;
        let c = b[i];
        let kind = if c == b'_' || c.is_ascii_alphabetic() {
            while i < b.len() && (b[i] == b'_' || b[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            Tok::Ident
        } else if c.is_ascii_digit() {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            Tok::Number
        } else if c == b'"' || c == b'\'' {
            i += 1;
            while i < b.len() && b[i] != c {
                i += if b[i] == b'\\' { 2 } else { 1 };
            }
            i = (i + 1).min(b.len());
            Tok::Other
        } else if c == b'#' {
            i = b.len();
            Tok::Other
        } else {
            // Advance a whole UTF-8 character.
            i += line[i..].chars().next().map_or(1, char::len_utf8);
            Tok::Other
        };
        out.push((kind, &line[start..i]));
    }
    out
}

struct Renamer {
    rng: ChaCha8Rng,
    names: BTreeMap<String, String>,
}

impl Renamer {
    fn ident(&mut self, word: &str) -> String {
        if RESERVED.contains(&word) {
            return word.to_string();
        }
        if let Some(n) = self.names.get(word) {
            return n.clone();
        }
        let fresh = loop {
            let stem = STEMS.choose(&mut self.rng).expect("stems");
            let cand = format!("{stem}_{}", self.rng.gen_range(0..100));
            if cand != word && !self.names.values().any(|v| *v == cand) {
                break cand;
            }
        };
        self.names.insert(word.to_string(), fresh.clone());
        fresh
    }

    fn number(&mut self, digits: &str) -> String {
        if digits.len() > 18 {
            let mut s = digits[..digits.len() - 1].to_string();
            let last = digits.as_bytes()[digits.len() - 1] - b'0';
            s.push((b'0' + (last + 1) % 10) as char);
            return s;
        }
        let v: u64 = digits.parse().expect("digit run");
        (v + self.rng.gen_range(1..=9)).to_string()
    }

    fn line(&mut self, line: &str) -> String {
        lex(line)
            .into_iter()
            .map(|(k, s)| match k {
                Tok::Ident => self.ident(s),
                Tok::Number => self.number(s),
                Tok::Other => s.to_string(),
            })
            .collect()
    }
}

/// Most lines by which a decoy may differ from its payload.
pub fn line_bound(policy: &DecoyPolicy) -> usize {
    policy.decoy_statement_count.max(1)
}

/// Dead code shaped like `src`: identifiers renamed consistently,
/// integer literals perturbed, up to `decoy_statement_count` extra
/// statements cloned from payload lines. Never byte-equal to the payload.
pub fn generate_decoy(src: &SourceBlock, policy: &DecoyPolicy) -> String {
    let mut r = Renamer {
        rng: ChaCha8Rng::seed_from_u64(policy.decoy_seed),
        names: BTreeMap::new(),
    };
    let trailing = src.text.ends_with('\n');
    let body = src.text.strip_suffix('\n').unwrap_or(&src.text);
    let lines: Vec<&str> = body.split('\n').collect();
    let mut out: Vec<String> = lines.iter().map(|l| r.line(l)).collect();
    let extra = r.rng.gen_range(0..=policy.decoy_statement_count);
    let source_lines: Vec<usize> = (0..lines.len()).filter(|&i| !lines[i].trim().is_empty()).collect();
    for _ in 0..extra {
        let Some(&i) = source_lines.choose(&mut r.rng) else {
            break;
        };
        let at = r.rng.gen_range(0..=out.len());
        let cloned = r.line(lines[i]);
        out.insert(at, cloned);
    }
    let mut text = out.join("\n");
    if trailing {
        text.push('\n');
    }
    if text == src.text {
        // Nothing renameable: add one statement shaped like the last line.
        let last = lines.iter().rev().find(|l| !l.trim().is_empty()).copied().unwrap_or("");
        let indent: String = last.chars().take_while(|c| c.is_whitespace()).collect();
        let filler = format!("{indent}{} = {}", r.ident("_unused"), r.rng.gen_range(0..1000));
        let mut lines2 = out;
        lines2.push(filler);
        text = lines2.join("\n");
        if trailing {
            text.push('\n');
        }
    }
    text
}
