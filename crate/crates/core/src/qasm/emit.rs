use std::fmt::Write;

use crate::circuit::{Circuit, GateKind, Register};

fn operand(regs: &[Register], mut index: usize) -> String {
    for r in regs {
        if index < r.size {
            return format!("{}[{index}]", r.name);
        }
        index -= r.size;
    }
    panic!("operand outside declared registers; emit requires a validated circuit")
}

/// Canonical OpenQASM 2.0 text: one statement per line, LF endings.
/// Composite boxes are flattened and bracketed by marker comments.
pub fn emit(circuit: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    for r in &circuit.qregs {
        writeln!(out, "qreg {}[{}];", r.name, r.size).unwrap();
    }
    for r in &circuit.cregs {
        writeln!(out, "creg {}[{}];", r.name, r.size).unwrap();
    }
    let mut open_box: Option<usize> = None;
    for g in &circuit.gates {
        if g.box_id != open_box {
            if open_box.is_some() {
                out.push_str("// end composite\n");
            }
            if let Some(b) = g.box_id {
                let name = circuit
                    .boxes
                    .get(&b)
                    .cloned()
                    .unwrap_or_else(|| format!("box{b}"));
                writeln!(out, "// begin composite {name}").unwrap();
            }
            open_box = g.box_id;
        }
        let qs: Vec<String> = g.qubits.iter().map(|&q| operand(&circuit.qregs, q)).collect();
        match g.kind {
            GateKind::Measure => {
                let c = operand(&circuit.cregs, g.cbit.expect("measure has a cbit"));
                writeln!(out, "measure {} -> {c};", qs[0]).unwrap();
            }
            kind => writeln!(out, "{} {};", kind.name(), qs.join(",")).unwrap(),
        }
    }
    if open_box.is_some() {
        out.push_str("// end composite\n");
    }
    out
}
