//! Dense state-vector simulator and equivalence oracle.
//!
//! Bit convention: qubit `k` is bit `k` of the amplitude index (qubit 0 is the
//! least significant bit). For a multi-qubit gate matrix, operand `k` is bit `k`
//! of the local index, so for `CX` the control (operand 0) is the low bit.
//! Outcome bitstrings put classical bit 0 in the rightmost character.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, GateKind};

pub type Amplitude = Complex64;

/// Largest register `simulate` and `measure_distribution` accept.
pub const MAX_SIM_QUBITS: usize = 24;
/// Largest register `unitary_of` accepts.
pub const MAX_UNITARY_QUBITS: usize = 10;

/// Tolerance used by every equivalence mode.
pub const EQUIV_TOL: f64 = 1e-9;
/// Modulus below which a matrix entry is ignored when picking the alignment phase.
const PHASE_PIVOT_MIN: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("circuit contains measurements; use measure_distribution")]
    MeasurementPresent,
    #[error("circuit has no measurements")]
    NoMeasurement,
    #[error("{n} qubits exceeds the limit of {max}")]
    TooManyQubits { n: usize, max: usize },
    #[error("{0} has no unitary matrix")]
    NotUnitary(GateKind),
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },
    #[error("basis state {index} out of range for {n_qubits} qubits")]
    BasisOutOfRange { index: usize, n_qubits: usize },
    #[error("invalid circuit: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amps: Vec<Amplitude>,
}

impl StateVector {
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, SimError> {
        if n_qubits > MAX_SIM_QUBITS {
            return Err(SimError::TooManyQubits {
                n: n_qubits,
                max: MAX_SIM_QUBITS,
            });
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(SimError::BasisOutOfRange { index, n_qubits });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply(&mut self, kind: GateKind, qubits: &[usize]) -> Result<(), SimError> {
        apply_gate(kind, qubits, &mut self.amps, 1)
    }
}

/// Dense square matrix over `n_qubits`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unitary {
    pub n_qubits: usize,
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl Unitary {
    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = ONE;
        }
        Unitary {
            n_qubits,
            dim,
            data,
        }
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let dim = rows.len();
        assert!(dim.is_power_of_two());
        let data: Vec<_> = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), dim);
                r.iter().copied()
            })
            .collect();
        Unitary {
            n_qubits: dim.trailing_zeros() as usize,
            dim,
            data,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    /// Ordinary matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Unitary) -> Unitary {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    data[r * d + c] += a * rhs.data[k * d + c];
                }
            }
        }
        Unitary {
            n_qubits: self.n_qubits,
            dim: d,
            data,
        }
    }

    pub fn adjoint(&self) -> Unitary {
        let d = self.dim;
        let mut data = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        Unitary {
            n_qubits: self.n_qubits,
            dim: d,
            data,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Unitary {
        Unitary {
            data: self.data.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    pub fn max_deviation(&self, other: &Unitary) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.max_deviation(&Unitary::identity(self.n_qubits)) <= tol
    }

    /// Max entry deviation of `U * U^dagger` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        self.mul(&self.adjoint())
            .max_deviation(&Unitary::identity(self.n_qubits))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| (0..self.dim).all(|c| r == c || self.get(r, c).norm() <= tol))
    }

    /// Phase `p` with `self ~= p * other`, taken from the first entry of `self`
    /// whose modulus exceeds the pivot threshold. Returns the phase and the max
    /// entry deviation of `self - p * other`. `None` when no pivot exists or
    /// `other` vanishes at the pivot.
    pub fn phase_relative_to(&self, other: &Unitary) -> Option<(Complex64, f64)> {
        assert_eq!(self.dim, other.dim);
        let pivot = self.data.iter().position(|x| x.norm() > PHASE_PIVOT_MIN)?;
        let a = self.data[pivot];
        let b = other.data[pivot];
        if b.norm() <= PHASE_PIVOT_MIN {
            return None;
        }
        let phase = (a / a.norm()) / (b / b.norm());
        Some((phase, self.max_deviation(&other.scale(phase))))
    }

    /// True when `self = p * other` for some unit-modulus `p`, within `tol`.
    pub fn equals_up_to_phase(&self, other: &Unitary, tol: f64) -> bool {
        matches!(self.phase_relative_to(other), Some((_, dev)) if dev <= tol)
    }

    /// Compact text form with entries rounded to four decimals, e.g. `[[0, 1], [-1, 0]]`.
    pub fn pretty(&self) -> String {
        let rows: Vec<String> = (0..self.dim)
            .map(|r| {
                let cells: Vec<String> = (0..self.dim).map(|c| fmt_complex(self.get(r, c))).collect();
                format!("[{}]", cells.join(", "))
            })
            .collect();
        format!("[{}]", rows.join(", "))
    }

    /// `|Tr(self^dagger * other)| / dim`
    pub fn trace_fidelity(&self, other: &Unitary) -> f64 {
        let d = self.dim;
        let mut acc = ZERO;
        for r in 0..d {
            for c in 0..d {
                acc += self.data[r * d + c].conj() * other.data[r * d + c];
            }
        }
        acc.norm() / d as f64
    }
}

fn fmt_complex(z: Complex64) -> String {
    let round = |x: f64| {
        let r = (x * 1e4).round() / 1e4;
        if r == 0.0 {
            0.0
        } else {
            r
        }
    };
    let (re, im) = (round(z.re), round(z.im));
    match (re == 0.0, im == 0.0) {
        (_, true) => format!("{re}"),
        (true, false) => format!("{im}i"),
        (false, false) if im < 0.0 => format!("{re}-{}i", -im),
        _ => format!("{re}+{im}i"),
    }
}

/// Textbook matrix of a unitary gate in its local operand basis.
pub fn gate_matrix(kind: GateKind) -> Result<Unitary, SimError> {
    use GateKind::*;
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let o = ONE;
    let z = ZERO;
    let t = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    let m = match kind {
        H => Unitary::from_rows(&[&[h, h], &[h, -h]]),
        X => Unitary::from_rows(&[&[z, o], &[o, z]]),
        Y => Unitary::from_rows(&[&[z, -I], &[I, z]]),
        Z => Unitary::from_rows(&[&[o, z], &[z, -o]]),
        S => Unitary::from_rows(&[&[o, z], &[z, I]]),
        Sdg => Unitary::from_rows(&[&[o, z], &[z, -I]]),
        T => Unitary::from_rows(&[&[o, z], &[z, t]]),
        Tdg => Unitary::from_rows(&[&[o, z], &[z, t.conj()]]),
        // Local index = op0 + 2*op1.
        Swap => Unitary::from_rows(&[
            &[o, z, z, z],
            &[z, z, o, z],
            &[z, o, z, z],
            &[z, z, z, o],
        ]),
        // Control op0 (bit 0), target op1 (bit 1): |c=1,t=0> = 1 <-> |c=1,t=1> = 3.
        Cx => Unitary::from_rows(&[
            &[o, z, z, z],
            &[z, z, z, o],
            &[z, z, o, z],
            &[z, o, z, z],
        ]),
        Cy => Unitary::from_rows(&[
            &[o, z, z, z],
            &[z, z, z, -I],
            &[z, z, o, z],
            &[z, I, z, z],
        ]),
        Cz => Unitary::from_rows(&[
            &[o, z, z, z],
            &[z, o, z, z],
            &[z, z, o, z],
            &[z, z, z, -o],
        ]),
        Ccx => {
            let mut u = Unitary::identity(3);
            // Controls are bits 0 and 1; target bit 2: swap |011> = 3 and |111> = 7.
            u.data[3 * 8 + 3] = z;
            u.data[7 * 8 + 7] = z;
            u.data[3 * 8 + 7] = o;
            u.data[7 * 8 + 3] = o;
            u
        }
        Measure | Barrier => return Err(SimError::NotUnitary(kind)),
    };
    Ok(m)
}

/// Apply a gate to every column of a row-major buffer whose rows are indexed by
/// basis state. With `ncols == 1` the buffer is a state vector.
pub(crate) fn apply_gate(
    kind: GateKind,
    qubits: &[usize],
    buf: &mut [Complex64],
    ncols: usize,
) -> Result<(), SimError> {
    use GateKind::*;
    let rows = buf.len() / ncols;
    let bit = |k: usize| 1usize << qubits[k];
    match kind {
        H => {
            let s = FRAC_1_SQRT_2;
            for_pairs(rows, bit(0), 0, |r0, r1| {
                for c in 0..ncols {
                    let a = buf[r0 * ncols + c];
                    let b = buf[r1 * ncols + c];
                    buf[r0 * ncols + c] = (a + b) * s;
                    buf[r1 * ncols + c] = (a - b) * s;
                }
            });
        }
        X => for_pairs(rows, bit(0), 0, |r0, r1| swap_rows(buf, ncols, r0, r1)),
        Y => for_pairs(rows, bit(0), 0, |r0, r1| y_rows(buf, ncols, r0, r1)),
        Z | S | Sdg | T | Tdg => {
            let phase = match kind {
                Z => -ONE,
                S => I,
                Sdg => -I,
                T => Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
                _ => Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4),
            };
            let b = bit(0);
            for r in (0..rows).filter(|r| r & b != 0) {
                for x in &mut buf[r * ncols..(r + 1) * ncols] {
                    *x *= phase;
                }
            }
        }
        Cx => for_pairs(rows, bit(1), bit(0), |r0, r1| swap_rows(buf, ncols, r0, r1)),
        Cy => for_pairs(rows, bit(1), bit(0), |r0, r1| y_rows(buf, ncols, r0, r1)),
        Ccx => for_pairs(rows, bit(2), bit(0) | bit(1), |r0, r1| {
            swap_rows(buf, ncols, r0, r1)
        }),
        Cz => {
            let m = bit(0) | bit(1);
            for r in (0..rows).filter(|r| r & m == m) {
                for x in &mut buf[r * ncols..(r + 1) * ncols] {
                    *x = -*x;
                }
            }
        }
        Swap => {
            let (a, b) = (bit(0), bit(1));
            for r in (0..rows).filter(|r| r & a != 0 && r & b == 0) {
                swap_rows(buf, ncols, r, r ^ a ^ b);
            }
        }
        Measure | Barrier => return Err(SimError::NotUnitary(kind)),
    }
    Ok(())
}

/// Visit `(r0, r1 = r0 | target)` for every row with the target bit clear and all
/// `controls` bits set.
fn for_pairs(rows: usize, target: usize, controls: usize, mut f: impl FnMut(usize, usize)) {
    for r0 in 0..rows {
        if r0 & target == 0 && r0 & controls == controls {
            f(r0, r0 | target);
        }
    }
}

fn swap_rows(buf: &mut [Complex64], ncols: usize, r0: usize, r1: usize) {
    let (r0, r1) = (r0.min(r1), r0.max(r1));
    let (lo, hi) = buf.split_at_mut(r1 * ncols);
    lo[r0 * ncols..(r0 + 1) * ncols].swap_with_slice(&mut hi[..ncols]);
}

fn y_rows(buf: &mut [Complex64], ncols: usize, r0: usize, r1: usize) {
    for c in 0..ncols {
        let a = buf[r0 * ncols + c];
        let b = buf[r1 * ncols + c];
        buf[r0 * ncols + c] = -I * b;
        buf[r1 * ncols + c] = I * a;
    }
}

fn check_ops(circuit: &Circuit) -> Result<(), SimError> {
    if let Some(d) = circuit.validate().into_iter().find(|d| d.is_error()) {
        return Err(SimError::Invalid(d.to_string()));
    }
    Ok(())
}

/// Statevector after applying `circuit` to the basis state `initial`. Barriers are ignored.
pub fn simulate(circuit: &Circuit, initial: usize) -> Result<StateVector, SimError> {
    check_ops(circuit)?;
    if circuit.has_measurements() {
        return Err(SimError::MeasurementPresent);
    }
    let mut sv = StateVector::basis(circuit.n_qubits(), initial)?;
    for g in circuit.gates.iter().filter(|g| g.kind.is_unitary()) {
        sv.apply(g.kind, &g.qubits)?;
    }
    Ok(sv)
}

/// Product of embedded gate matrices in application order (for "A then B" the result is `B * A`).
pub fn unitary_of_ops<'a>(
    n_qubits: usize,
    ops: impl IntoIterator<Item = (GateKind, &'a [usize])>,
) -> Result<Unitary, SimError> {
    if n_qubits > MAX_UNITARY_QUBITS {
        return Err(SimError::TooManyQubits {
            n: n_qubits,
            max: MAX_UNITARY_QUBITS,
        });
    }
    let mut u = Unitary::identity(n_qubits);
    for (kind, qubits) in ops {
        if kind == GateKind::Barrier {
            continue;
        }
        if kind == GateKind::Measure {
            return Err(SimError::MeasurementPresent);
        }
        if qubits.iter().any(|&q| q >= n_qubits) {
            return Err(SimError::Invalid(format!(
                "{kind} operand out of range for {n_qubits} qubits"
            )));
        }
        let d = u.dim;
        apply_gate(kind, qubits, &mut u.data, d)?;
    }
    Ok(u)
}

pub fn unitary_of(circuit: &Circuit) -> Result<Unitary, SimError> {
    check_ops(circuit)?;
    unitary_of_ops(
        circuit.n_qubits(),
        circuit.gates.iter().map(|g| (g.kind, g.qubits.as_slice())),
    )
}

/// Exact outcome probabilities keyed by bitstring.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    /// Number of characters in every key.
    pub width: usize,
    /// Outcomes with non-zero probability. Absent keys have probability exactly 0.
    pub probs: BTreeMap<String, f64>,
}

impl OutcomeDistribution {
    pub fn prob(&self, outcome: &str) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Marginal over the given character positions, counted from the right
    /// (position 0 is the rightmost character). The result keeps the same
    /// right-to-left order: `positions[0]` becomes its rightmost character.
    pub fn marginal(&self, positions: &[usize]) -> OutcomeDistribution {
        let mut probs = BTreeMap::new();
        for (key, p) in &self.probs {
            let bytes = key.as_bytes();
            let sub: String = positions
                .iter()
                .rev()
                .map(|&pos| bytes[self.width - 1 - pos] as char)
                .collect();
            *probs.entry(sub).or_insert(0.0) += p;
        }
        OutcomeDistribution {
            width: positions.len(),
            probs,
        }
    }

    pub fn total_variation(&self, other: &OutcomeDistribution) -> f64 {
        let mut keys: Vec<&String> = self.probs.keys().chain(other.probs.keys()).collect();
        keys.sort();
        keys.dedup();
        0.5 * keys
            .into_iter()
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }
}

/// Born-rule distribution over the classical bits written by the circuit's
/// measurements, computed from the final statevector without sampling.
pub fn measure_distribution(circuit: &Circuit) -> Result<OutcomeDistribution, SimError> {
    check_ops(circuit)?;
    // cbit -> qubit; a later measurement into the same bit overwrites the earlier one.
    let mut writes: BTreeMap<usize, usize> = BTreeMap::new();
    for g in circuit.gates.iter().filter(|g| g.kind == GateKind::Measure) {
        writes.insert(g.cbit.expect("validated"), g.qubits[0]);
    }
    if writes.is_empty() {
        return Err(SimError::NoMeasurement);
    }
    let sv = simulate(&circuit.without_non_unitary(), 0)?;
    // Character j (from the right) of the key reads qubit `sources[j]`.
    let sources: Vec<usize> = writes.values().copied().collect();
    let width = sources.len();
    let mut acc: HashMap<u64, f64> = HashMap::new();
    for (index, a) in sv.amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut key = 0u64;
        for (j, &q) in sources.iter().enumerate() {
            key |= (((index >> q) & 1) as u64) << j;
        }
        *acc.entry(key).or_insert(0.0) += p;
    }
    let probs = acc
        .into_iter()
        .map(|(k, p)| {
            let s: String = (0..width)
                .rev()
                .map(|j| if (k >> j) & 1 == 1 { '1' } else { '0' })
                .collect();
            (s, p)
        })
        .collect();
    Ok(OutcomeDistribution { width, probs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquivalenceMode {
    Statevector,
    Unitary,
    Distribution,
}

impl std::str::FromStr for EquivalenceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "statevector" => Ok(EquivalenceMode::Statevector),
            "unitary" => Ok(EquivalenceMode::Unitary),
            "distribution" => Ok(EquivalenceMode::Distribution),
            other => Err(format!("unknown equivalence mode '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub mode: EquivalenceMode,
    pub equivalent: bool,
    pub fidelity: f64,
}

/// Basis states probed by statevector mode: `|0...0>` plus `k * floor(2^n / 16)`
/// for `k` in `0..16`. Registers with at most 16 basis states are probed exhaustively.
pub fn probe_states(n_qubits: usize) -> Vec<usize> {
    let dim = 1usize << n_qubits;
    if dim <= 16 {
        return (0..dim).collect();
    }
    let step = dim / 16;
    (0..16).map(|k| k * step).collect()
}

/// Compare two circuits under the chosen mode. Statevector and unitary modes
/// ignore measurements and barriers (measurements are terminal on their qubit).
pub fn equivalent(a: &Circuit, b: &Circuit, mode: EquivalenceMode) -> Result<Equivalence, SimError> {
    let (na, nb) = (a.n_qubits(), b.n_qubits());
    if na != nb {
        return Err(SimError::QubitMismatch {
            left: na,
            right: nb,
        });
    }
    let (equivalent, fidelity) = match mode {
        EquivalenceMode::Statevector => {
            let (ua, ub) = (a.without_non_unitary(), b.without_non_unitary());
            let mut worst = 1.0f64;
            for init in probe_states(na) {
                let f = simulate(&ua, init)?.inner(&simulate(&ub, init)?).norm();
                worst = worst.min(f);
            }
            (worst >= 1.0 - EQUIV_TOL, worst.min(1.0))
        }
        EquivalenceMode::Unitary => {
            let ua = unitary_of(&a.without_non_unitary())?;
            let ub = unitary_of(&b.without_non_unitary())?;
            let ok = ua.equals_up_to_phase(&ub, EQUIV_TOL);
            (ok, ua.trace_fidelity(&ub).min(1.0))
        }
        EquivalenceMode::Distribution => {
            let tvd = measure_distribution(a)?.total_variation(&measure_distribution(b)?);
            (tvd <= EQUIV_TOL, 1.0 - tvd)
        }
    };
    Ok(Equivalence {
        mode,
        equivalent,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::GateKind::*;
    use super::*;
    use crate::circuit::GateApp;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Reference embedding: gathers each operand subspace and multiplies by the
    /// textbook matrix. Independent of the specialised kernels.
    fn apply_reference(kind: GateKind, qubits: &[usize], amps: &mut [Complex64]) {
        let m = gate_matrix(kind).unwrap();
        let k = qubits.len();
        let mask: usize = qubits.iter().map(|q| 1 << q).sum();
        for base in (0..amps.len()).filter(|i| i & mask == 0) {
            let idx: Vec<usize> = (0..1usize << k)
                .map(|local| {
                    let mut i = base;
                    for (j, q) in qubits.iter().enumerate() {
                        if (local >> j) & 1 == 1 {
                            i |= 1 << q;
                        }
                    }
                    i
                })
                .collect();
            let old: Vec<Complex64> = idx.iter().map(|&i| amps[i]).collect();
            for (r, &i) in idx.iter().enumerate() {
                amps[i] = (0..1 << k).map(|s| m.get(r, s) * old[s]).sum();
            }
        }
    }

    #[test]
    fn kernels_match_reference_embedding() {
        let operand_sets: &[&[usize]] = &[&[0], &[2], &[1, 3], &[3, 0], &[2, 0, 3], &[1, 3, 2]];
        // Deterministic non-trivial state.
        let base: Vec<Complex64> = (0..16)
            .map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()))
            .collect();
        for kind in GateKind::UNITARY {
            for ops in operand_sets
                .iter()
                .filter(|o| o.len() == kind.arity().unwrap())
            {
                let mut fast = base.clone();
                apply_gate(kind, ops, &mut fast, 1).unwrap();
                let mut slow = base.clone();
                apply_reference(kind, ops, &mut slow);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).norm() < 1e-12, "{kind} on {ops:?}");
                }
            }
        }
    }

    #[test]
    fn paper_matrices() {
        let x = gate_matrix(X).unwrap();
        assert_eq!(x.data, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let h = gate_matrix(H).unwrap();
        let s = FRAC_1_SQRT_2;
        assert_eq!(h.data, vec![c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)]);
        let z = gate_matrix(Z).unwrap();
        let hzh = h.mul(&z).mul(&h);
        assert!(hzh.max_deviation(&x) <= 1e-12);
    }

    #[test]
    fn every_gate_matrix_is_unitary() {
        for k in GateKind::UNITARY {
            assert!(gate_matrix(k).unwrap().unitarity_error() <= 1e-10, "{k}");
        }
        assert_eq!(gate_matrix(Measure), Err(SimError::NotUnitary(Measure)));
    }

    #[test]
    fn pretty_matrix() {
        assert_eq!(gate_matrix(X).unwrap().pretty(), "[[0, 1], [1, 0]]");
        assert_eq!(gate_matrix(Y).unwrap().pretty(), "[[0, -1i], [1i, 0]]");
        let t = gate_matrix(T).unwrap().pretty();
        assert_eq!(t, "[[1, 0], [0, 0.7071+0.7071i]]");
    }

    #[test]
    fn hadamard_on_zero() {
        let mut circ = Circuit::new(1, 0);
        circ.gate(H, &[0]);
        let sv = simulate(&circ, 0).unwrap();
        assert!((sv.amps[0] - c(FRAC_1_SQRT_2, 0.)).norm() < 1e-15);
        assert!((sv.amps[1] - c(FRAC_1_SQRT_2, 0.)).norm() < 1e-15);
    }

    #[test]
    fn bell_state() {
        let mut circ = Circuit::new(2, 0);
        circ.gate(H, &[0]).gate(Cx, &[0, 1]);
        let sv = simulate(&circ, 0).unwrap();
        assert!((sv.amps[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((sv.amps[3].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(sv.amps[1], ZERO);
        assert_eq!(sv.amps[2], ZERO);
    }

    #[test]
    fn simulate_rejects_measurements_and_large_registers() {
        let mut circ = Circuit::new(1, 1);
        circ.measure(0, 0);
        assert_eq!(simulate(&circ, 0), Err(SimError::MeasurementPresent));
        let big = Circuit::new(25, 0);
        assert!(matches!(
            simulate(&big, 0),
            Err(SimError::TooManyQubits { n: 25, .. })
        ));
        assert!(matches!(
            unitary_of(&Circuit::new(11, 0)),
            Err(SimError::TooManyQubits { .. })
        ));
    }

    #[test]
    fn ysy_is_sdg_up_to_phase() {
        let u = unitary_of_ops(1, [(Y, &[0][..]), (S, &[0]), (Y, &[0])]).unwrap();
        let sdg = gate_matrix(Sdg).unwrap();
        assert!(u.is_diagonal(1e-12));
        let (phase, dev) = u.phase_relative_to(&sdg).unwrap();
        assert!(dev < 1e-12);
        // Y S Y = i * Sdg, computed by hand.
        assert!((phase - I).norm() < 1e-12);
    }

    #[test]
    fn application_order_is_right_to_left_product() {
        // "H then S" must equal S * H.
        let u = unitary_of_ops(1, [(H, &[0][..]), (S, &[0])]).unwrap();
        let want = gate_matrix(S).unwrap().mul(&gate_matrix(H).unwrap());
        assert!(u.max_deviation(&want) < 1e-15);
    }

    #[test]
    fn measure_distribution_bell() {
        let mut circ = Circuit::new(2, 2);
        circ.gate(H, &[0]).gate(Cx, &[0, 1]).measure(0, 0).measure(1, 1);
        let d = measure_distribution(&circ).unwrap();
        assert_eq!(d.width, 2);
        assert!((d.prob("00") - 0.5).abs() < 1e-15);
        assert!((d.prob("11") - 0.5).abs() < 1e-15);
        assert_eq!(d.prob("01"), 0.0);
        assert_eq!(d.prob("10"), 0.0);
        assert_eq!(d.probs.len(), 2);
    }

    #[test]
    fn classical_bit_zero_is_rightmost() {
        let mut circ = Circuit::new(2, 2);
        circ.gate(X, &[1]).measure(0, 1).measure(1, 0);
        let d = measure_distribution(&circ).unwrap();
        assert_eq!(d.prob("01"), 1.0);
        assert_eq!(d.marginal(&[0]).prob("1"), 1.0);
        assert_eq!(d.marginal(&[1]).prob("0"), 1.0);
    }

    #[test]
    fn no_measurement_is_an_error() {
        assert_eq!(
            measure_distribution(&Circuit::new(1, 0)),
            Err(SimError::NoMeasurement)
        );
    }

    #[test]
    fn equivalence_examples() {
        let mut x = Circuit::new(1, 0);
        x.gate(X, &[0]);
        let mut hzh = Circuit::new(1, 0);
        hzh.gate(H, &[0]).gate(Z, &[0]).gate(H, &[0]);
        let mut z = Circuit::new(1, 0);
        z.gate(Z, &[0]);
        for mode in [EquivalenceMode::Statevector, EquivalenceMode::Unitary] {
            let r = equivalent(&x, &x, mode).unwrap();
            assert!(r.equivalent);
            assert!((r.fidelity - 1.0).abs() < 1e-12);
            let r = equivalent(&x, &hzh, mode).unwrap();
            assert!(r.equivalent && (r.fidelity - 1.0).abs() < 1e-12);
            assert!(!equivalent(&x, &z, mode).unwrap().equivalent);
        }
        let r = equivalent(&x, &z, EquivalenceMode::Unitary).unwrap();
        assert!(r.fidelity.abs() < 1e-12);
        assert!(matches!(
            equivalent(&x, &Circuit::new(2, 0), EquivalenceMode::Statevector),
            Err(SimError::QubitMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn global_phase_is_ignored_in_unitary_mode() {
        // Z H Z H Z = -X
        let mut a = Circuit::new(1, 0);
        a.gate(X, &[0]);
        let mut b = Circuit::new(1, 0);
        for k in [Z, H, Z, H, Z] {
            b.gate(k, &[0]);
        }
        assert!(equivalent(&a, &b, EquivalenceMode::Unitary).unwrap().equivalent);
    }

    #[test]
    fn distribution_mode() {
        let mut a = Circuit::new(2, 2);
        a.gate(H, &[0]).gate(Cx, &[0, 1]).measure(0, 0).measure(1, 1);
        let mut b = Circuit::new(2, 2);
        b.gate(H, &[1]).gate(Cx, &[1, 0]).gate(Z, &[0]).measure(0, 0).measure(1, 1);
        assert!(equivalent(&a, &b, EquivalenceMode::Distribution).unwrap().equivalent);
        let mut d = Circuit::new(2, 2);
        d.gate(H, &[0]).measure(0, 0).measure(1, 1);
        let r = equivalent(&a, &d, EquivalenceMode::Distribution).unwrap();
        assert!(!r.equivalent);
        assert!((r.fidelity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probes() {
        assert_eq!(probe_states(2), vec![0, 1, 2, 3]);
        let p = probe_states(6);
        assert_eq!(p.len(), 16);
        assert_eq!(p[1], 4);
        assert_eq!(p[15], 60);
    }

    #[test]
    fn barrier_is_ignored_by_simulation() {
        let mut circ = Circuit::new(2, 0);
        circ.gate(H, &[0]).push(GateApp::new(Barrier, vec![0, 1]));
        let sv = simulate(&circ, 0).unwrap();
        assert!((sv.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
