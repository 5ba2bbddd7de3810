use crate::diag::{Diagnostic, Position, SourceSpan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Integer,
    Real,
    Str,
    Symbol,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub fn span(&self) -> SourceSpan {
        let width = self.lexeme.chars().count().max(1);
        SourceSpan::new(
            Position {
                line: self.line,
                col: self.col,
            },
            Position {
                line: self.line,
                col: self.col + width - 1,
            },
        )
    }

    pub fn is_symbol(&self, s: &str) -> bool {
        self.kind == TokenKind::Symbol && self.lexeme == s
    }

    pub fn is_keyword(&self, s: &str) -> bool {
        self.kind == TokenKind::Keyword && self.lexeme == s
    }
}

pub const KEYWORDS: &[&str] = &[
    "OPENQASM", "include", "qreg", "creg", "measure", "barrier", "gate", "opaque", "if",
    "reset",
];

/// Split source into tokens. `//` comments and whitespace (including `\r`) are skipped.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let ch = chars[i];
        let (start_line, start_col) = (line, col);
        let take = |n: usize, kind: TokenKind, tokens: &mut Vec<Token>| {
            tokens.push(Token {
                kind,
                lexeme: chars[i..i + n].iter().collect(),
                line: start_line,
                col: start_col,
            });
            n
        };
        let consumed = if ch == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        } else if ch.is_whitespace() {
            1
        } else if ch == '/' && chars.get(i + 1) == Some(&'/') {
            let mut n = 0;
            while i + n < chars.len() && chars[i + n] != '\n' {
                n += 1;
            }
            n
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let mut n = 1;
            while i + n < chars.len() && (chars[i + n].is_ascii_alphanumeric() || chars[i + n] == '_')
            {
                n += 1;
            }
            let word: String = chars[i..i + n].iter().collect();
            let kind = if KEYWORDS.contains(&word.as_str()) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            take(n, kind, &mut tokens)
        } else if ch.is_ascii_digit() {
            let mut n = 1;
            while i + n < chars.len() && chars[i + n].is_ascii_digit() {
                n += 1;
            }
            let mut kind = TokenKind::Integer;
            if chars.get(i + n) == Some(&'.') {
                kind = TokenKind::Real;
                n += 1;
                while i + n < chars.len() && chars[i + n].is_ascii_digit() {
                    n += 1;
                }
            }
            if matches!(chars.get(i + n), Some('e') | Some('E')) {
                let mut m = n + 1;
                if matches!(chars.get(i + m), Some('+') | Some('-')) {
                    m += 1;
                }
                if chars.get(i + m).is_some_and(|c| c.is_ascii_digit()) {
                    while i + m < chars.len() && chars[i + m].is_ascii_digit() {
                        m += 1;
                    }
                    n = m;
                    kind = TokenKind::Real;
                }
            }
            take(n, kind, &mut tokens)
        } else if ch == '"' {
            let mut n = 1;
            while i + n < chars.len() && chars[i + n] != '"' && chars[i + n] != '\n' {
                n += 1;
            }
            if chars.get(i + n) == Some(&'"') {
                take(n + 1, TokenKind::Str, &mut tokens)
            } else {
                errors.push(Diagnostic::error(
                    "unterminated string literal",
                    SourceSpan::new(
                        Position {
                            line,
                            col: start_col,
                        },
                        Position {
                            line,
                            col: start_col + n - 1,
                        },
                    ),
                ));
                n
            }
        } else if (ch == '-' && chars.get(i + 1) == Some(&'>'))
            || (ch == '=' && chars.get(i + 1) == Some(&'='))
        {
            take(2, TokenKind::Symbol, &mut tokens)
        } else if "[](){};,+-*/^=<>".contains(ch) {
            take(1, TokenKind::Symbol, &mut tokens)
        } else {
            errors.push(Diagnostic::error(
                format!("illegal character '{}'", ch.escape_default()),
                SourceSpan::point(line, col),
            ));
            1
        };
        i += consumed;
        col += consumed;
    }

    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_lexemes(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.lexeme))
            .collect()
    }

    #[test]
    fn single_statement() {
        use TokenKind::*;
        let want = [
            (Identifier, "h"),
            (Identifier, "q"),
            (Symbol, "["),
            (Integer, "0"),
            (Symbol, "]"),
            (Symbol, ";"),
        ];
        let got = kinds_and_lexemes("h q[0];");
        assert_eq!(got.len(), want.len());
        for ((gk, gl), (wk, wl)) in got.iter().zip(want) {
            assert_eq!((*gk, gl.as_str()), (wk, wl));
        }
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  // only a comment\n\r\n").unwrap().is_empty());
    }

    #[test]
    fn register_and_cx_token_count() {
        // qreg q [ 2 ] ;  -> 6, cx q [ 0 ] , q [ 1 ] ; -> 11
        let toks = tokenize("qreg q[2]; cx q[0],q[1];").unwrap();
        assert_eq!(toks.len(), 17);
        assert_eq!(toks[0].kind, TokenKind::Keyword);
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize("OPENQASM 2.0;\n  measure q[0] -> c[0];").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
        assert_eq!(toks[1].kind, TokenKind::Real);
        let m = &toks[3];
        assert_eq!((m.lexeme.as_str(), m.line, m.col), ("measure", 2, 3));
        let arrow = toks.iter().find(|t| t.lexeme == "->").unwrap();
        assert_eq!(arrow.col, 16);
        assert_eq!(arrow.span().end.col, 17);
    }

    #[test]
    fn illegal_character_has_span() {
        let errs = tokenize("h q[0];\nx q[1]; @").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].span, SourceSpan::point(2, 9));
    }

    #[test]
    fn strings() {
        let toks = tokenize("include \"qelib1.inc\";").unwrap();
        assert_eq!(toks[1].kind, TokenKind::Str);
        assert_eq!(toks[1].lexeme, "\"qelib1.inc\"");
        assert!(tokenize("include \"oops;\n").is_err());
    }
}
