//! Amplitude storage for both simulation models.
//!
//! Layout (qubit 0 least significant, phonon in the lowest position):
//!
//! * three-level model: `position = (Σ digit_q·3^q)·2 + phonon`, digits
//!   `g = 0`, `e0 = 1`, `e1 = 2`;
//! * two-level model: `position = plane·2^(M+1) + (Σ bit_q·2^q)·2 + phonon`.
//!
//! In the two-level model the auxiliary plane stores, for each main-plane
//! element, the amplitude that has been rotated out into the auxiliary level.
//! That amplitude physically sits in the phonon-0 state, so decoherence never
//! touches it.

use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub const G: u8 = 0;
pub const E0: u8 = 1;
pub const E1: u8 = 2;

pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;
pub const MEMORY_CAP_ENV: &str = "IONSIM_MEM_CAP_BYTES";

const DUMP_MAGIC: &[u8; 8] = b"IONSIM01";

/// Largest qubit count representable by the `u64` bit patterns used throughout.
pub const MAX_QUBITS: usize = 40;

/// Memory cap for state allocation, from `IONSIM_MEM_CAP_BYTES` when set.
pub fn memory_cap() -> u64 {
    std::env::var(MEMORY_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MEMORY_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "3state")]
    ThreeState,
    #[serde(rename = "2state")]
    TwoState,
}

impl ModelKind {
    /// Number of stored amplitudes for `num_qubits` qubits, `None` on overflow.
    pub fn storage_len(self, num_qubits: usize) -> Option<usize> {
        let m = u32::try_from(num_qubits).ok()?;
        match self {
            ModelKind::ThreeState => 3usize.checked_pow(m)?.checked_mul(2),
            ModelKind::TwoState => 2usize.checked_pow(m.checked_add(2)?),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::ThreeState => "3state",
            ModelKind::TwoState => "2state",
        }
    }

    fn tag(self) -> u32 {
        match self {
            ModelKind::ThreeState => 3,
            ModelKind::TwoState => 2,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "3state" | "three" | "threestate" | "3" => Ok(ModelKind::ThreeState),
            "2state" | "two" | "twostate" | "2" => Ok(ModelKind::TwoState),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Plane {
    Main,
    Aux,
}

/// Decoded form of an amplitude position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateIndex {
    pub digits: Vec<u8>,
    pub phonon: u8,
    pub plane: Plane,
}

/// A named, contiguous range of qubits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Register {
    pub fn new(name: impl Into<String>, start: usize, len: usize) -> Self {
        Self {
            name: name.into(),
            start,
            len,
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }

    pub fn qubit(&self, i: usize) -> usize {
        debug_assert!(i < self.len);
        self.start + i
    }

    pub fn qubits(&self) -> Vec<usize> {
        self.range().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<T> {
    model: ModelKind,
    num_qubits: usize,
    amps: Vec<Complex<T>>,
    registers: Vec<Register>,
}

impl<T: Scalar> QuantumState<T> {
    /// Basis state with the given qubit bits (`g ↔ 0`, `e0 ↔ 1`), phonon 0.
    pub fn new(model: ModelKind, num_qubits: usize, initial_bits: u64) -> Result<Self> {
        Self::with_cap(model, num_qubits, initial_bits, memory_cap())
    }

    pub fn with_cap(
        model: ModelKind,
        num_qubits: usize,
        initial_bits: u64,
        cap: u64,
    ) -> Result<Self> {
        let mut state = Self::zeros_with_cap(model, num_qubits, cap)?;
        if num_qubits < 64 && initial_bits >> num_qubits != 0 {
            return Err(Error::InvalidArgument(format!(
                "initial bits {initial_bits:#b} do not fit in {num_qubits} qubits"
            )));
        }
        let digits = (0..num_qubits)
            .map(|q| ((initial_bits >> q) & 1) as u8)
            .collect();
        let pos = state.encode(&StateIndex {
            digits,
            phonon: 0,
            plane: Plane::Main,
        })?;
        state.amps[pos] = Complex::new(T::one(), T::zero());
        Ok(state)
    }

    /// All-zero amplitude vector.
    pub fn zeros(model: ModelKind, num_qubits: usize) -> Result<Self> {
        Self::zeros_with_cap(model, num_qubits, memory_cap())
    }

    fn zeros_with_cap(model: ModelKind, num_qubits: usize, cap: u64) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument(
                "a state needs at least one qubit".into(),
            ));
        }
        if num_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "{num_qubits} qubits exceeds the supported maximum of {MAX_QUBITS}"
            )));
        }
        let elem = std::mem::size_of::<Complex<T>>() as u128;
        let len = model.storage_len(num_qubits);
        let requested = match len {
            Some(len) => len as u128 * elem,
            None => u128::MAX,
        };
        if requested > cap as u128 {
            return Err(Error::Capacity { requested, cap });
        }
        Ok(Self {
            model,
            num_qubits,
            amps: vec![Complex::new(T::zero(), T::zero()); len.unwrap_or(0)],
            registers: Vec::new(),
        })
    }

    pub fn from_amplitudes(
        model: ModelKind,
        num_qubits: usize,
        amps: Vec<Complex<T>>,
    ) -> Result<Self> {
        let expected = model.storage_len(num_qubits);
        if num_qubits == 0 || expected != Some(amps.len()) {
            return Err(Error::Mismatch(format!(
                "{} amplitudes for a {num_qubits}-qubit {model} state",
                amps.len()
            )));
        }
        Ok(Self {
            model,
            num_qubits,
            amps,
            registers: Vec::new(),
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn set_registers(&mut self, registers: Vec<Register>) {
        self.registers = registers;
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    /// Distance between positions that differ by one step in qubit `q`'s digit.
    #[inline]
    pub fn stride(&self, q: usize) -> usize {
        match self.model {
            ModelKind::ThreeState => 2 * 3usize.pow(q as u32),
            ModelKind::TwoState => 2 << q,
        }
    }

    /// Length of the main plane (the whole vector in the three-level model).
    #[inline]
    pub fn main_len(&self) -> usize {
        match self.model {
            ModelKind::ThreeState => self.amps.len(),
            ModelKind::TwoState => self.amps.len() / 2,
        }
    }

    /// Digit of qubit `q` at `pos` (auxiliary-plane positions report their index bit).
    #[inline]
    pub fn digit(&self, pos: usize, q: usize) -> u8 {
        match self.model {
            ModelKind::ThreeState => ((pos / self.stride(q)) % 3) as u8,
            ModelKind::TwoState => (((pos % self.main_len()) >> (q + 1)) & 1) as u8,
        }
    }

    pub fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            Err(Error::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    pub fn encode(&self, index: &StateIndex) -> Result<usize> {
        if index.digits.len() != self.num_qubits {
            return Err(Error::InvalidArgument(format!(
                "{} digits for a {}-qubit state",
                index.digits.len(),
                self.num_qubits
            )));
        }
        if index.phonon > 1 {
            return Err(Error::InvalidArgument("phonon digit must be 0 or 1".into()));
        }
        let max_digit = match self.model {
            ModelKind::ThreeState => E1,
            ModelKind::TwoState => E0,
        };
        let mut pos = index.phonon as usize;
        for (q, &d) in index.digits.iter().enumerate() {
            if d > max_digit {
                return Err(Error::InvalidArgument(format!(
                    "digit {d} is not valid in the {} model",
                    self.model
                )));
            }
            pos += d as usize * self.stride(q);
        }
        match (self.model, index.plane) {
            (_, Plane::Main) => Ok(pos),
            (ModelKind::TwoState, Plane::Aux) => Ok(pos + self.main_len()),
            (ModelKind::ThreeState, Plane::Aux) => Err(Error::InvalidArgument(
                "the three-level model has no auxiliary plane".into(),
            )),
        }
    }

    pub fn decode(&self, pos: usize) -> StateIndex {
        let plane = if pos >= self.main_len() {
            Plane::Aux
        } else {
            Plane::Main
        };
        StateIndex {
            digits: (0..self.num_qubits).map(|q| self.digit(pos, q)).collect(),
            phonon: (pos & 1) as u8,
            plane,
        }
    }

    pub fn amplitude(&self, index: &StateIndex) -> Result<Complex<T>> {
        Ok(self.amps[self.encode(index)?])
    }

    pub fn squared_norm(&self) -> T {
        self.amps
            .iter()
            .fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// Scales the state to unit norm and returns the factor used.
    pub fn renormalize(&mut self) -> Result<T> {
        let norm = self.squared_norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::Degenerate(
                "cannot renormalize a zero-norm state".into(),
            ));
        }
        let factor = norm.sqrt().recip();
        self.scale(factor);
        Ok(factor)
    }

    pub fn scale(&mut self, factor: T) {
        for a in &mut self.amps {
            *a = a.scale(factor);
        }
    }

    /// Weight outside the computational subspace: `e1` digits or the auxiliary plane.
    pub fn auxiliary_weight(&self) -> T {
        match self.model {
            ModelKind::ThreeState => self
                .amps
                .iter()
                .enumerate()
                .filter(|&(pos, _)| (0..self.num_qubits).any(|q| self.digit(pos, q) == E1))
                .fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr()),
            ModelKind::TwoState => self.amps[self.main_len()..]
                .iter()
                .fold(T::zero(), |acc, a| acc + a.norm_sqr()),
        }
    }

    /// Weight in the phonon-1 states (main plane only in the two-level model).
    pub fn phonon_weight(&self) -> T {
        self.amps[..self.main_len()]
            .iter()
            .skip(1)
            .step_by(2)
            .fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// Projective measurement of qubit `q` in the computational basis.
    ///
    /// The surviving branch is rescaled to the pre-measurement norm, which is
    /// 1 for normalized states and the survival probability under the decay
    /// method.
    pub fn measure_qubit<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<u8> {
        self.check_qubit(q)?;
        let total = self.squared_norm();
        if !(total > T::zero()) {
            return Err(Error::Degenerate("cannot measure a zero-norm state".into()));
        }
        let mut weight = [T::zero(); 3];
        for (pos, a) in self.amps.iter().enumerate() {
            weight[self.digit(pos, q) as usize] += a.norm_sqr();
        }
        let aux = (weight[E1 as usize] / total).as_f64();
        if aux > 1e-9 {
            return Err(Error::AuxiliaryWeight {
                qubit: q,
                weight: aux,
            });
        }
        let p_one = (weight[E0 as usize] / total).as_f64();
        let outcome = u8::from(rng.gen::<f64>() < p_one);
        let kept = weight[outcome as usize];
        if !(kept > T::zero()) {
            return Err(Error::Degenerate(format!(
                "measurement of qubit {q} selected an empty branch"
            )));
        }
        for pos in 0..self.amps.len() {
            if self.digit(pos, q) != outcome {
                self.amps[pos] = Complex::new(T::zero(), T::zero());
            }
        }
        self.scale((total / kept).sqrt());
        Ok(outcome)
    }

    /// Probability that `register` reads `value`, marginalized over everything else.
    pub fn probability_of_value(&self, register: Range<usize>, value: u64) -> Result<T> {
        if register.end > self.num_qubits || register.start > register.end {
            return Err(Error::InvalidArgument(format!(
                "register {register:?} outside a {}-qubit state",
                self.num_qubits
            )));
        }
        let width = register.len();
        if width < 64 && value >> width != 0 {
            return Err(Error::InvalidArgument(format!(
                "value {value} does not fit in a {width}-qubit register"
            )));
        }
        let mut p = T::zero();
        'positions: for (pos, a) in self.amps.iter().enumerate() {
            for (i, q) in register.clone().enumerate() {
                let d = self.digit(pos, q);
                if d == E1 || u64::from(d) != (value >> i) & 1 {
                    continue 'positions;
                }
            }
            p += a.norm_sqr();
        }
        Ok(p)
    }

    /// Value of `register` in a computational basis state, if the state is one.
    pub fn basis_value(&self, register: Range<usize>, tol: f64) -> Option<u64> {
        let (pos, a) = self
            .amps
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.norm_sqr().partial_cmp(&y.1.norm_sqr()).unwrap())?;
        let total = self.squared_norm();
        if (total - a.norm_sqr()).as_f64() > tol {
            return None;
        }
        let mut value = 0u64;
        for (i, q) in register.enumerate() {
            match self.digit(pos, q) {
                E1 => return None,
                d => value |= u64::from(d) << i,
            }
        }
        Some(value)
    }

    /// Debug dump: 16-byte header then little-endian `(re, im)` doubles in index order.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&self.model.tag().to_le_bytes())?;
        w.write_all(&(self.num_qubits as u32).to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.as_f64().to_le_bytes())?;
            w.write_all(&a.im.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..8] != DUMP_MAGIC {
            return Err(Error::InvalidArgument("not a state dump".into()));
        }
        let model = match u32::from_le_bytes(header[8..12].try_into().unwrap()) {
            3 => ModelKind::ThreeState,
            2 => ModelKind::TwoState,
            t => return Err(Error::InvalidArgument(format!("unknown model tag {t}"))),
        };
        let m = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut state = Self::zeros(model, m)?;
        let mut buf = [0u8; 16];
        for a in &mut state.amps {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            *a = Complex::new(T::of(re), T::of(im));
        }
        Ok(state)
    }
}

/// `Σ conj(a_i)·b_i` over every stored amplitude.
pub fn inner_product<T: Scalar>(a: &QuantumState<T>, b: &QuantumState<T>) -> Result<Complex<T>> {
    if a.model != b.model || a.num_qubits != b.num_qubits {
        return Err(Error::Mismatch(format!(
            "{}-qubit {} vs {}-qubit {}",
            a.num_qubits, a.model, b.num_qubits, b.model
        )));
    }
    Ok(a.amps
        .iter()
        .zip(&b.amps)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type S = QuantumState<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn fresh_three_state_single_qubit() {
        let s = S::new(ModelKind::ThreeState, 1, 0).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0, 0.0)));
    }

    #[test]
    fn fresh_two_state_places_unit_amplitude() {
        let s = S::new(ModelKind::TwoState, 2, 0b01).unwrap();
        assert_eq!(s.len(), 16);
        let idx = StateIndex {
            digits: vec![1, 0],
            phonon: 0,
            plane: Plane::Main,
        };
        assert_eq!(s.amplitude(&idx).unwrap(), c(1.0, 0.0));
        assert_eq!(s.squared_norm(), 1.0);
    }

    #[test]
    fn f21_sized_three_state() {
        let s = S::new(ModelKind::ThreeState, 11, 0).unwrap();
        assert_eq!(s.len(), 354_294);
    }

    #[test]
    fn storage_formulas() {
        for m in 1..=13usize {
            assert_eq!(
                ModelKind::ThreeState.storage_len(m),
                Some(2 * 3usize.pow(m as u32))
            );
            assert_eq!(ModelKind::TwoState.storage_len(m), Some(1 << (m + 2)));
        }
    }

    #[test]
    fn capacity_error_is_explicit() {
        let err = S::with_cap(ModelKind::ThreeState, 16, 0, 1 << 20).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }), "{err}");
        assert!(S::with_cap(ModelKind::TwoState, 4, 0, 1 << 20).is_ok());
    }

    #[test]
    fn initial_bits_must_fit() {
        assert!(S::new(ModelKind::TwoState, 2, 0b100).is_err());
        assert!(S::new(ModelKind::TwoState, 0, 0).is_err());
    }

    #[test]
    fn inner_product_basics() {
        let a = S::new(ModelKind::ThreeState, 2, 0).unwrap();
        let b = S::new(ModelKind::ThreeState, 2, 1).unwrap();
        assert_eq!(inner_product(&a, &a).unwrap(), c(1.0, 0.0));
        assert_eq!(inner_product(&a, &b).unwrap(), c(0.0, 0.0));
        let mut scaled = a.clone();
        scaled.scale(0.9);
        assert!((inner_product(&a, &scaled).unwrap() - c(0.9, 0.0)).norm() < 1e-15);
        let other = S::new(ModelKind::TwoState, 2, 0).unwrap();
        assert!(matches!(inner_product(&a, &other), Err(Error::Mismatch(_))));
    }

    #[test]
    fn renormalize_cases() {
        let mut s = S::new(ModelKind::TwoState, 1, 0).unwrap();
        assert_eq!(s.renormalize().unwrap(), 1.0);
        s.scale(0.5);
        assert!((s.squared_norm() - 0.25).abs() < 1e-15);
        assert!((s.renormalize().unwrap() - 2.0).abs() < 1e-15);
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-15);
        let mut z = S::zeros(ModelKind::TwoState, 1).unwrap();
        assert_eq!(z.squared_norm(), 0.0);
        assert!(matches!(z.renormalize(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn measuring_a_basis_state_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = S::new(ModelKind::ThreeState, 3, 0b010).unwrap();
        let before = s.clone();
        assert_eq!(s.measure_qubit(1, &mut rng).unwrap(), 1);
        assert_eq!(s.measure_qubit(0, &mut rng).unwrap(), 0);
        assert_eq!(s, before);
    }

    fn plus_state(model: ModelKind) -> S {
        let mut s = S::zeros(model, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p0 = s
            .encode(&StateIndex {
                digits: vec![0, 1],
                phonon: 0,
                plane: Plane::Main,
            })
            .unwrap();
        let p1 = s
            .encode(&StateIndex {
                digits: vec![1, 1],
                phonon: 0,
                plane: Plane::Main,
            })
            .unwrap();
        s.amplitudes_mut()[p0] = c(h, 0.0);
        s.amplitudes_mut()[p1] = c(0.0, h);
        s
    }

    #[test]
    fn measurement_statistics_follow_born_rule() {
        let trials = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ones: usize = (0..trials)
            .map(|_| {
                plus_state(ModelKind::TwoState)
                    .measure_qubit(0, &mut rng)
                    .unwrap() as usize
            })
            .sum();
        let sd = (trials as f64 * 0.25).sqrt();
        assert!((ones as f64 - 5000.0).abs() <= 3.0 * sd, "{ones}");
    }

    #[test]
    fn measurement_collapses_inconsistent_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            for _ in 0..20 {
                let mut s = plus_state(model);
                let bit = s.measure_qubit(0, &mut rng).unwrap();
                for pos in 0..s.len() {
                    if s.digit(pos, 0) != bit {
                        assert_eq!(s.amplitudes()[pos], c(0.0, 0.0));
                    }
                }
                assert!((s.squared_norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measurement_rejects_auxiliary_weight() {
        let mut s = S::zeros(ModelKind::ThreeState, 1).unwrap();
        s.amplitudes_mut()[0] = c(0.6, 0.0);
        s.amplitudes_mut()[4] = c(0.8, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            s.measure_qubit(0, &mut rng),
            Err(Error::AuxiliaryWeight { .. })
        ));
        assert!(matches!(
            s.measure_qubit(1, &mut rng),
            Err(Error::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn register_marginals() {
        let s = S::new(ModelKind::ThreeState, 3, 0b110).unwrap();
        assert_eq!(s.probability_of_value(1..3, 0b11).unwrap(), 1.0);
        assert_eq!(s.probability_of_value(0..2, 0b10).unwrap(), 1.0);
        assert_eq!(s.probability_of_value(0..2, 0b11).unwrap(), 0.0);
        assert!(s.probability_of_value(0..2, 4).is_err());
        assert!(s.probability_of_value(2..4, 0).is_err());

        let mut u = S::zeros(ModelKind::TwoState, 2).unwrap();
        for v in 0..4u8 {
            let pos = u
                .encode(&StateIndex {
                    digits: vec![v & 1, v >> 1],
                    phonon: 0,
                    plane: Plane::Main,
                })
                .unwrap();
            u.amplitudes_mut()[pos] = c(0.5, 0.0);
        }
        for v in 0..4 {
            assert!((u.probability_of_value(0..2, v).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn dump_round_trip() {
        let s = plus_state(ModelKind::ThreeState);
        let mut buf = Vec::new();
        s.write_dump(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"IONSIM01");
        assert_eq!(buf.len(), 16 + 16 * s.len());
        let back = S::read_dump(&buf[..]).unwrap();
        assert_eq!(back.amplitudes(), s.amplitudes());
        assert_eq!(back.model(), s.model());
    }

    proptest! {
        #[test]
        fn index_round_trip(m in 1usize..=6, three in any::<bool>(), seed in any::<u64>()) {
            let model = if three { ModelKind::ThreeState } else { ModelKind::TwoState };
            let s = S::zeros(model, m).unwrap();
            let pos = (seed as usize) % s.len();
            let idx = s.decode(pos);
            prop_assert_eq!(s.encode(&idx).unwrap(), pos);
        }

        #[test]
        fn self_inner_product_is_squared_norm(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 18)
        ) {
            let amps = parts.into_iter().map(|(r, i)| c(r, i)).collect();
            let s = S::from_amplitudes(ModelKind::ThreeState, 2, amps).unwrap();
            let ip = inner_product(&s, &s).unwrap();
            prop_assert!(ip.im.abs() < 1e-14);
            prop_assert!((ip.re - s.squared_norm()).abs() < 1e-14);
        }

        #[test]
        fn measurement_never_inflates_norm(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
            seed in any::<u64>(),
        ) {
            let amps = parts.into_iter().map(|(r, i)| c(r, i)).collect();
            let mut s = S::from_amplitudes(ModelKind::TwoState, 2, amps).unwrap();
            prop_assume!(s.squared_norm() > 1e-6);
            s.renormalize().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            s.measure_qubit(1, &mut rng).unwrap();
            prop_assert!(s.squared_norm() <= 1.0 + 1e-12);
        }
    }
}
