//! Frontend for a closed OpenQASM 2.0 subset.
//!
//! Accepted grammar:
//!
//! ```text
//! program   := "OPENQASM" "2.0" ";" statement*
//! statement := "include" "\"qelib1.inc\"" ";"
//!            | ("qreg" | "creg") ident "[" int "]" ";"
//!            | gate operand ("," operand)* ";"
//!            | "measure" operand "->" operand ";"
//!            | "barrier" operand ("," operand)* ";"
//! gate      := h | x | y | z | s | sdg | t | tdg | swap | cx | cz | cy | ccx
//! operand   := ident "[" int "]"
//! ```
//!
//! Everything else (gate definitions, `opaque`, `if`, `reset`, parameterised
//! gates, register broadcast, OpenQASM 3) is rejected with a spanned diagnostic.

mod emit;
mod lexer;
mod parser;

pub use emit::emit;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;
