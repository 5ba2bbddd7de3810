use std::collections::BTreeMap;

use crate::circuit::{Circuit, GateApp, GateKind, Register};
use crate::diag::{Diagnostic, SourceSpan};

use super::lexer::{tokenize, Token, TokenKind};

/// Statement-leading words that only exist in OpenQASM 3.
const QASM3_WORDS: &[&str] = &[
    "qubit", "bit", "def", "let", "const", "input", "output", "for", "while", "box", "defcal",
    "cal", "stretch", "duration", "int", "uint", "float", "angle", "bool", "reset",
];

struct RegInfo {
    offset: usize,
    size: usize,
    quantum: bool,
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    diags: Vec<Diagnostic>,
    regs: BTreeMap<String, RegInfo>,
    qregs: Vec<Register>,
    cregs: Vec<Register>,
    gates: Vec<GateApp>,
    gate_spans: Vec<SourceSpan>,
}

/// A statement-level failure. The parser records a diagnostic and resynchronises.
struct Abort;

type PResult<T> = Result<T, Abort>;

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + k)
    }

    fn next(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eof_span(&self) -> SourceSpan {
        self.toks.last().map(|t| t.span()).unwrap_or_default()
    }

    fn fail<T>(&mut self, message: impl Into<String>, span: SourceSpan) -> PResult<T> {
        self.diags.push(Diagnostic::error(message, span));
        Err(Abort)
    }

    fn expect_symbol(&mut self, s: &str) -> PResult<&'t Token> {
        match self.next() {
            Some(t) if t.is_symbol(s) => Ok(t),
            Some(t) => {
                let msg = format!("expected '{s}', found '{}'", t.lexeme);
                self.fail(msg, t.span())
            }
            None => {
                let span = self.eof_span();
                self.fail(format!("expected '{s}', found end of input"), span)
            }
        }
    }

    fn expect_kind(&mut self, kind: TokenKind, what: &str) -> PResult<&'t Token> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(t),
            Some(t) => {
                let msg = format!("expected {what}, found '{}'", t.lexeme);
                self.fail(msg, t.span())
            }
            None => {
                let span = self.eof_span();
                self.fail(format!("expected {what}, found end of input"), span)
            }
        }
    }

    /// Skip past the end of the current statement (a `;`, or a balanced `{ ... }` block).
    fn recover(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.next() {
            if t.is_symbol("{") {
                depth += 1;
            } else if t.is_symbol("}") {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    if self.peek().is_some_and(|t| t.is_symbol(";")) {
                        self.pos += 1;
                    }
                    return;
                }
            } else if t.is_symbol(";") && depth == 0 {
                return;
            }
        }
    }

    /// Span from `start` to the statement terminator, used to describe a rejected construct.
    fn statement_span(&self, start: &Token) -> SourceSpan {
        let mut depth = 0usize;
        let mut end = start.span();
        for t in &self.toks[self.pos..] {
            end = t.span();
            if t.is_symbol("{") {
                depth += 1;
            } else if t.is_symbol("}") {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    break;
                }
            } else if t.is_symbol(";") && depth == 0 {
                break;
            }
        }
        start.span().to(end)
    }

    fn header(&mut self) -> PResult<()> {
        let Some(first) = self.peek() else {
            return self.fail("missing 'OPENQASM 2.0;' header", SourceSpan::default());
        };
        if !first.is_keyword("OPENQASM") {
            return self.fail("missing 'OPENQASM 2.0;' header", first.span());
        }
        self.pos += 1;
        let version = match self.next() {
            Some(t) if matches!(t.kind, TokenKind::Real | TokenKind::Integer) => t,
            Some(t) => return self.fail("expected a version number", t.span()),
            None => {
                let span = first.span();
                return self.fail("expected a version number", span);
            }
        };
        let v = version.lexeme.as_str();
        if v.starts_with('3') {
            return self.fail(
                "OpenQASM 3 unsupported (only OpenQASM 2.0 is accepted)",
                first.span().to(version.span()),
            );
        }
        if v != "2.0" && v != "2" {
            return self.fail(
                format!("unsupported OpenQASM version {v}"),
                version.span(),
            );
        }
        self.expect_symbol(";")?;
        Ok(())
    }

    fn statement(&mut self) -> PResult<()> {
        let t = self.peek().expect("caller checked");
        match t.kind {
            TokenKind::Keyword => match t.lexeme.as_str() {
                "include" => self.include(),
                "qreg" | "creg" => self.declaration(),
                "measure" => self.measure(),
                "barrier" => self.barrier(),
                "gate" => {
                    let span = self.statement_span(t);
                    self.fail("user-defined gate unsupported", span)
                }
                "opaque" => {
                    let span = self.statement_span(t);
                    self.fail("opaque gate declaration unsupported", span)
                }
                "if" => {
                    let span = self.statement_span(t);
                    self.fail("classical control ('if') unsupported", span)
                }
                "reset" => {
                    let span = self.statement_span(t);
                    self.fail("reset unsupported", span)
                }
                "OPENQASM" => self.fail("duplicate OPENQASM header", t.span()),
                _ => unreachable!("keyword table"),
            },
            TokenKind::Identifier => {
                if QASM3_WORDS.contains(&t.lexeme.as_str())
                    && self
                        .peek_at(1)
                        .is_some_and(|n| n.is_symbol("[") || n.kind == TokenKind::Identifier)
                {
                    let span = self.statement_span(t);
                    return self.fail(
                        format!("OpenQASM 3 syntax unsupported ('{}')", t.lexeme),
                        span,
                    );
                }
                self.gate_application()
            }
            _ => {
                let msg = format!("unexpected '{}'", t.lexeme);
                self.fail(msg, t.span())
            }
        }
    }

    fn include(&mut self) -> PResult<()> {
        let kw = self.next().expect("peeked");
        let file = self.expect_kind(TokenKind::Str, "a file name string")?;
        if file.lexeme != "\"qelib1.inc\"" {
            return self.fail(
                format!("include of {} unsupported (only \"qelib1.inc\")", file.lexeme),
                kw.span().to(file.span()),
            );
        }
        self.expect_symbol(";")?;
        Ok(())
    }

    fn declaration(&mut self) -> PResult<()> {
        let kw = self.next().expect("peeked");
        let quantum = kw.lexeme == "qreg";
        let name = self.expect_kind(TokenKind::Identifier, "a register name")?;
        self.expect_symbol("[")?;
        let size_tok = self.expect_kind(TokenKind::Integer, "a register size")?;
        let close = self.expect_symbol("]")?;
        self.expect_symbol(";")?;
        let span = kw.span().to(close.span());
        let size: usize = match size_tok.lexeme.parse() {
            Ok(n) if n > 0 => n,
            _ => return self.fail("register size must be a positive integer", size_tok.span()),
        };
        if self.regs.contains_key(&name.lexeme) {
            return self.fail(format!("register '{}' already declared", name.lexeme), span);
        }
        let list = if quantum { &mut self.qregs } else { &mut self.cregs };
        let offset = list.iter().map(|r| r.size).sum();
        list.push(Register::new(name.lexeme.clone(), size));
        self.regs.insert(
            name.lexeme.clone(),
            RegInfo {
                offset,
                size,
                quantum,
            },
        );
        Ok(())
    }

    /// `name[index]`, resolved to a flat index in the quantum or classical space.
    fn operand(&mut self, quantum: bool) -> PResult<(usize, SourceSpan)> {
        let name = self.expect_kind(TokenKind::Identifier, "a register operand")?;
        let indexed = self.peek().is_some_and(|t| t.is_symbol("["));
        if !indexed {
            return self.fail(
                format!(
                    "register broadcast unsupported: index '{}' explicitly",
                    name.lexeme
                ),
                name.span(),
            );
        }
        self.pos += 1;
        let idx_tok = self.expect_kind(TokenKind::Integer, "an index")?;
        let close = self.expect_symbol("]")?;
        let span = name.span().to(close.span());
        let which = if quantum { "quantum" } else { "classical" };
        let Some(info) = self.regs.get(&name.lexeme) else {
            return self.fail(format!("undeclared register '{}'", name.lexeme), span);
        };
        if info.quantum != quantum {
            return self.fail(
                format!("'{}' is not a {which} register", name.lexeme),
                span,
            );
        }
        let (offset, size) = (info.offset, info.size);
        match idx_tok.lexeme.parse::<usize>() {
            Ok(i) if i < size => Ok((offset + i, span)),
            _ => self.fail(
                format!(
                    "index {} out of range for register {}[{size}]",
                    idx_tok.lexeme, name.lexeme
                ),
                span,
            ),
        }
    }

    fn operand_list(&mut self) -> PResult<(Vec<usize>, SourceSpan)> {
        let (first, mut span) = self.operand(true)?;
        let mut qubits = vec![first];
        while self.peek().is_some_and(|t| t.is_symbol(",")) {
            self.pos += 1;
            let (q, s) = self.operand(true)?;
            qubits.push(q);
            span = span.to(s);
        }
        Ok((qubits, span))
    }

    fn measure(&mut self) -> PResult<()> {
        let kw = self.next().expect("peeked");
        let (qubit, _) = self.operand(true)?;
        self.expect_symbol("->")?;
        let (cbit, cspan) = self.operand(false)?;
        self.expect_symbol(";")?;
        self.gates.push(GateApp::measure(qubit, cbit));
        self.gate_spans.push(kw.span().to(cspan));
        Ok(())
    }

    fn barrier(&mut self) -> PResult<()> {
        let kw = self.next().expect("peeked");
        let (qubits, span) = self.operand_list()?;
        self.expect_symbol(";")?;
        self.gates.push(GateApp::new(GateKind::Barrier, qubits));
        self.gate_spans.push(kw.span().to(span));
        Ok(())
    }

    fn gate_application(&mut self) -> PResult<()> {
        let name = self.next().expect("peeked");
        let kind = GateKind::from_gate_name(&name.lexeme).filter(|_| {
            // Mnemonics are lowercase in qelib1.inc.
            name.lexeme.chars().all(|c| !c.is_ascii_uppercase())
        });
        if self.peek().is_some_and(|t| t.is_symbol("(")) {
            let span = self.statement_span(name);
            return self.fail(
                format!("parameterized gate '{}' unsupported", name.lexeme),
                span,
            );
        }
        let Some(kind) = kind else {
            let span = self.statement_span(name);
            return self.fail(format!("unsupported gate '{}'", name.lexeme), span);
        };
        let (qubits, span) = self.operand_list()?;
        self.expect_symbol(";")?;
        let span = name.span().to(span);
        let arity = kind.arity().expect("unitary gates have fixed arity");
        if qubits.len() != arity {
            return self.fail(
                format!(
                    "'{}' takes {arity} qubit operand(s), got {}",
                    name.lexeme,
                    qubits.len()
                ),
                span,
            );
        }
        self.gates.push(GateApp::new(kind, qubits));
        self.gate_spans.push(span);
        Ok(())
    }
}

/// Parse the accepted OpenQASM 2.0 subset into a circuit. Gate order follows the text.
pub fn parse(source: &str) -> Result<Circuit, Vec<Diagnostic>> {
    let toks = tokenize(source)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        diags: Vec::new(),
        regs: BTreeMap::new(),
        qregs: Vec::new(),
        cregs: Vec::new(),
        gates: Vec::new(),
        gate_spans: Vec::new(),
    };
    if p.header().is_err() {
        return Err(p.diags);
    }
    while p.peek().is_some() {
        if p.statement().is_err() {
            p.recover();
        }
    }
    if p.qregs.is_empty() && p.diags.is_empty() {
        let span = p.eof_span();
        p.diags.push(Diagnostic::error("no qreg declared", span));
    }
    if !p.diags.is_empty() {
        return Err(p.diags);
    }
    let circuit = Circuit {
        qregs: p.qregs,
        cregs: p.cregs,
        gates: p.gates,
        boxes: Default::default(),
    };
    let spans = p.gate_spans;
    let issues: Vec<Diagnostic> = circuit
        .validate()
        .into_iter()
        .map(|mut d| {
            if let Some(g) = d.gate {
                d.span = spans[g];
            }
            d
        })
        .collect();
    if issues.iter().any(Diagnostic::is_error) {
        return Err(issues);
    }
    Ok(circuit)
}
