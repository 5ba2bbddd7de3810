//! Benchmark circuits shipped with the crate.

use crate::circuit::Circuit;
use crate::qasm::parse;

pub const BV6: &str = include_str!("../fixtures/bv6.qasm");
pub const QAOA_RING4: &str = include_str!("../fixtures/qaoa_ring4.qasm");
pub const PERIOD_FINDING7: &str = include_str!("../fixtures/period_finding7.qasm");

/// `(name, source)` for every fixture.
pub const ALL: [(&str, &str); 3] = [
    ("bv6", BV6),
    ("qaoa_ring4", QAOA_RING4),
    ("period_finding7", PERIOD_FINDING7),
];

pub fn load(name: &str) -> Option<Circuit> {
    ALL.iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| parse(src).expect("shipped fixture parses"))
}

pub fn all() -> Vec<(&'static str, Circuit)> {
    ALL.iter()
        .map(|(n, src)| (*n, parse(src).expect("shipped fixture parses")))
        .collect()
}
