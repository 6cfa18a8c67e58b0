//! Brute-force dense reference for small three-level states (`M ≤ 4`).
//!
//! Every pulse is embedded as a full `2·3^M`-square matrix built from the
//! pulse's 2×2 or 4×4 block with its own index arithmetic, and programs are
//! composed by matrix multiplication.

use num_complex::Complex;

use crate::gates::{lower_gate_threestate, Gate, Step};
use crate::pulse::{pulse_matrix, PulseKind, PulseSpec};
use crate::statespace::{ModelKind, QuantumState};
use crate::{Error, Result};

pub const MAX_ORACLE_QUBITS: usize = 4;

type C = Complex<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseUnitary {
    dim: usize,
    /// Row-major.
    data: Vec<C>,
}

impl DenseUnitary {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> C {
        self.data[row * self.dim + col]
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &DenseUnitary) -> DenseUnitary {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut data = vec![C::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        DenseUnitary { dim: d, data }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.data[i * self.dim + j] * v[j])
                    .sum()
            })
            .collect()
    }

    /// Largest entry of `U·U† − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let s: C = (0..d)
                    .map(|k| self.data[i * d + k] * self.data[j * d + k].conj())
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - C::new(expect, 0.0)).norm());
            }
        }
        worst
    }

    /// Block over the `2^M` computational states (no `e1`, phonon 0), indexed
    /// by the usual bit pattern.
    pub fn computational_block(&self, num_qubits: usize) -> DenseUnitary {
        let n = 1usize << num_qubits;
        let idx: Vec<usize> = (0..n)
            .map(|b| position(&bits_to_digits(b as u64, num_qubits), 0))
            .collect();
        let mut out = DenseUnitary {
            dim: n,
            data: vec![C::new(0.0, 0.0); n * n],
        };
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                out.data[i * n + j] = self.entry(r, c);
            }
        }
        out
    }
}

fn bits_to_digits(bits: u64, m: usize) -> Vec<u8> {
    (0..m).map(|q| (bits >> q & 1) as u8).collect()
}

fn position(digits: &[u8], phonon: usize) -> usize {
    let mut config = 0usize;
    for &d in digits.iter().rev() {
        config = config * 3 + d as usize;
    }
    config * 2 + phonon
}

fn digits_of(pos: usize, m: usize) -> (Vec<u8>, usize) {
    let phonon = pos % 2;
    let mut rest = pos / 2;
    let mut digits = Vec::with_capacity(m);
    for _ in 0..m {
        digits.push((rest % 3) as u8);
        rest /= 3;
    }
    (digits, phonon)
}

fn check_size(num_qubits: usize) -> Result<usize> {
    if num_qubits == 0 || num_qubits > MAX_ORACLE_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "dense oracle supports 1..={MAX_ORACLE_QUBITS} qubits, got {num_qubits}"
        )));
    }
    Ok(2 * 3usize.pow(num_qubits as u32))
}

/// Full-space matrix of one pulse with its effective angles.
pub fn embed_pulse(num_qubits: usize, pulse: &PulseSpec) -> Result<DenseUnitary> {
    let dim = check_size(num_qubits)?;
    if pulse.qubit >= num_qubits {
        return Err(Error::QubitOutOfRange {
            qubit: pulse.qubit,
            num_qubits,
        });
    }
    let block = pulse_matrix::<f64>(pulse.kind, pulse.effective_theta(), pulse.effective_phi());
    let (la, lb) = pulse.kind.levels();
    let q = pulse.qubit;
    let mut u = DenseUnitary {
        dim,
        data: vec![C::new(0.0, 0.0); dim * dim],
    };
    for col in 0..dim {
        let (digits, phonon) = digits_of(col, num_qubits);
        let d = digits[q];
        // Local index of the column inside the pulse's block, and the map back.
        let (local, rows): (usize, Vec<(usize, usize)>) = match pulse.kind {
            PulseKind::V => {
                if d != la && d != lb {
                    u.data[col * dim + col] = C::new(1.0, 0.0);
                    continue;
                }
                let local = usize::from(d == lb);
                let rows = [la, lb]
                    .iter()
                    .enumerate()
                    .map(|(k, &level)| {
                        let mut r = digits.clone();
                        r[q] = level;
                        (k, position(&r, phonon))
                    })
                    .collect();
                (local, rows)
            }
            _ => {
                if d != la && d != lb {
                    u.data[col * dim + col] = C::new(1.0, 0.0);
                    continue;
                }
                let local = 2 * usize::from(d == lb) + phonon;
                let rows = (0..4)
                    .map(|k| {
                        let mut r = digits.clone();
                        r[q] = if k < 2 { la } else { lb };
                        (k, position(&r, k % 2))
                    })
                    .collect();
                (local, rows)
            }
        };
        for (k, row) in rows {
            u.data[row * dim + col] = block.entry(k, local);
        }
    }
    Ok(u)
}

/// Product of pulse embeddings, first pulse applied first.
pub fn dense_unitary_of_pulses(num_qubits: usize, pulses: &[PulseSpec]) -> Result<DenseUnitary> {
    let mut u = DenseUnitary::identity(check_size(num_qubits)?);
    for p in pulses {
        u = embed_pulse(num_qubits, p)?.mul(&u);
    }
    Ok(u)
}

/// Zero-error unitary of a gate list; measurement-based gates are rejected.
pub fn dense_unitary_of_gates(num_qubits: usize, gates: &[Gate]) -> Result<DenseUnitary> {
    let mut pulses = Vec::new();
    for g in gates {
        g.validate(num_qubits)?;
        for step in lower_gate_threestate(g) {
            match step {
                Step::Pulse(p) => pulses.push(p),
                _ => {
                    return Err(Error::InvalidArgument(format!("`{g}` is not unitary")));
                }
            }
        }
    }
    dense_unitary_of_pulses(num_qubits, &pulses)
}

/// Largest elementwise difference between `simulated` and `expected` after
/// aligning the global phase on the largest `expected` amplitude. Fails when
/// it exceeds `tol`.
pub fn assert_equivalent(simulated: &QuantumState<f64>, expected: &[C], tol: f64) -> Result<f64> {
    if simulated.model() != ModelKind::ThreeState || simulated.len() != expected.len() {
        return Err(Error::Mismatch(format!(
            "state of {} amplitudes against {} expected",
            simulated.len(),
            expected.len()
        )));
    }
    let sim = simulated.amplitudes();
    let anchor = (0..expected.len())
        .max_by(|&a, &b| expected[a].norm_sqr().total_cmp(&expected[b].norm_sqr()))
        .unwrap_or(0);
    let phase = if expected[anchor].norm() > 0.0 && sim[anchor].norm() > 0.0 {
        let r = sim[anchor] / expected[anchor];
        r / r.norm()
    } else {
        C::new(1.0, 0.0)
    };
    let deviation = sim
        .iter()
        .zip(expected)
        .map(|(s, e)| (s - e * phase).norm())
        .fold(0.0, f64::max);
    if deviation > tol {
        return Err(Error::Tolerance {
            deviation,
            tolerance: tol,
        });
    }
    Ok(deviation)
}
