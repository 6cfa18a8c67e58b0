//! Laser pulses and their action on a state.
//!
//! Every pulse is the same two-level rotation
//!
//! ```text
//! R(θ, φ) = [ cos(θ/2)              -i·e^{-iφ}·sin(θ/2) ]
//!           [ -i·e^{iφ}·sin(θ/2)     cos(θ/2)           ]
//! ```
//!
//! applied to a pair of states selected by the laser tuning. `V` couples
//! `g ↔ e0` on one ion and leaves the phonon alone. The three phonon pulses
//! couple `a·1_p ↔ b·0_p` for the level pair `(a, b)` of the tuning:
//! `U: (g, e0)`, `Û: (g, e1)`, `Ũ: (e0, e1)`.

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::statespace::{ModelKind, QuantumState, E0, E1, G};
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseKind {
    V,
    U,
    UHat,
    UTilde,
}

impl PulseKind {
    /// The two ion levels coupled by this tuning, lower level first.
    pub fn levels(self) -> (u8, u8) {
        match self {
            PulseKind::V | PulseKind::U => (G, E0),
            PulseKind::UHat => (G, E1),
            PulseKind::UTilde => (E0, E1),
        }
    }

    pub fn uses_phonon(self) -> bool {
        !matches!(self, PulseKind::V)
    }

    /// True for tunings that pass through the auxiliary `e1` level.
    pub fn uses_auxiliary(self) -> bool {
        matches!(self, PulseKind::UHat | PulseKind::UTilde)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PulseKind::V => "V",
            PulseKind::U => "U",
            PulseKind::UHat => "U^",
            PulseKind::UTilde => "U~",
        }
    }
}

impl fmt::Display for PulseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One laser pulse with its ideal angles and injected errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub qubit: usize,
    pub theta: f64,
    pub phi: f64,
    pub dtheta: f64,
    pub dphi: f64,
}

impl PulseSpec {
    pub fn new(kind: PulseKind, qubit: usize, theta: f64, phi: f64) -> Self {
        Self {
            kind,
            qubit,
            theta,
            phi,
            dtheta: 0.0,
            dphi: 0.0,
        }
    }

    pub fn with_errors(mut self, dtheta: f64, dphi: f64) -> Self {
        self.dtheta = dtheta;
        self.dphi = dphi;
        self
    }

    pub fn effective_theta(&self) -> f64 {
        self.theta + self.dtheta
    }

    pub fn effective_phi(&self) -> f64 {
        self.phi + self.dphi
    }
}

impl fmt::Display for PulseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}({}, {})",
            self.kind, self.qubit, self.theta, self.phi
        )
    }
}

pub type Matrix2<T> = [[Complex<T>; 2]; 2];
pub type Matrix4<T> = [[Complex<T>; 4]; 4];

/// Matrix of a pulse: 2×2 over `(g, e0)` for `V`, 4×4 over
/// `(a·0_p, a·1_p, b·0_p, b·1_p)` for the phonon tunings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PulseMatrix<T> {
    Qubit(Matrix2<T>),
    Phonon(Matrix4<T>),
}

impl<T: Scalar> PulseMatrix<T> {
    pub fn dim(&self) -> usize {
        match self {
            PulseMatrix::Qubit(_) => 2,
            PulseMatrix::Phonon(_) => 4,
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        match self {
            PulseMatrix::Qubit(m) => m[row][col],
            PulseMatrix::Phonon(m) => m[row][col],
        }
    }

    /// Largest entry of `M·M† − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..d {
                    acc += self.entry(i, k) * self.entry(j, k).conj();
                }
                if i == j {
                    acc.re -= T::one();
                }
                worst = worst.max(acc.norm().as_f64());
            }
        }
        worst
    }
}

/// The shared two-level rotation `R(θ, φ)`.
pub fn rotation<T: Scalar>(theta: f64, phi: f64) -> Matrix2<T> {
    let (s, c) = (theta / 2.0).sin_cos();
    let c = Complex::new(T::of(c), T::zero());
    // -i·e^{∓iφ}·s
    let upper = Complex::new(T::of(-s * phi.sin()), T::of(-s * phi.cos()));
    let lower = Complex::new(T::of(s * phi.sin()), T::of(-s * phi.cos()));
    [[c, upper], [lower, c]]
}

pub fn pulse_matrix<T: Scalar>(kind: PulseKind, theta: f64, phi: f64) -> PulseMatrix<T> {
    let r = rotation::<T>(theta, phi);
    match kind {
        PulseKind::V => PulseMatrix::Qubit(r),
        _ => {
            let zero = Complex::new(T::zero(), T::zero());
            let one = Complex::new(T::one(), T::zero());
            let mut m = [[zero; 4]; 4];
            m[0][0] = one;
            m[3][3] = one;
            m[1][1] = r[0][0];
            m[1][2] = r[0][1];
            m[2][1] = r[1][0];
            m[2][2] = r[1][1];
            PulseMatrix::Phonon(m)
        }
    }
}

/// Applies `m` to every `(x, y)` pair of a qubit-digit block layout.
///
/// `x` sits at digit `la` (offset by `shift` phonon positions), `y` at digit
/// `lb`; `step` is 1 to visit both phonon values, 2 for phonon-0 `y` only.
#[allow(clippy::too_many_arguments)]
#[inline]
fn rotate_pairs<T: Scalar>(
    amps: &mut [Complex<T>],
    stride: usize,
    radix: usize,
    la: usize,
    lb: usize,
    shift: usize,
    step: usize,
    m: &Matrix2<T>,
) {
    let block = radix * stride;
    for base in (0..amps.len()).step_by(block) {
        let xs = base + la * stride + shift;
        let ys = base + lb * stride;
        let mut i = 0;
        while i < stride {
            let (x, y) = (xs + i, ys + i);
            let (ax, ay) = (amps[x], amps[y]);
            amps[x] = m[0][0] * ax + m[0][1] * ay;
            amps[y] = m[1][0] * ax + m[1][1] * ay;
            i += step;
        }
    }
}

/// Applies one pulse in place, using its effective (error-bearing) angles.
///
/// The two-level model can only take `V` and `U` pulses directly; tunings
/// through the auxiliary level go through [`apply_paired_rotation`].
pub fn apply_pulse<T: Scalar>(state: &mut QuantumState<T>, pulse: &PulseSpec) -> Result<()> {
    state.check_qubit(pulse.qubit)?;
    let r = rotation::<T>(pulse.effective_theta(), pulse.effective_phi());
    let stride = state.stride(pulse.qubit);
    let (la, lb) = pulse.kind.levels();
    let (shift, step) = if pulse.kind.uses_phonon() {
        (1, 2)
    } else {
        (0, 1)
    };
    match state.model() {
        ModelKind::ThreeState => {
            rotate_pairs(
                state.amplitudes_mut(),
                stride,
                3,
                la as usize,
                lb as usize,
                shift,
                step,
                &r,
            );
        }
        ModelKind::TwoState => {
            if pulse.kind.uses_auxiliary() {
                return Err(Error::InvalidArgument(format!(
                    "{} pulses pass through the auxiliary level and need a paired rotation in the 2state model",
                    pulse.kind
                )));
            }
            let main = state.main_len();
            rotate_pairs(
                &mut state.amplitudes_mut()[..main],
                stride,
                2,
                la as usize,
                lb as usize,
                shift,
                step,
                &r,
            );
        }
    }
    Ok(())
}

/// Condition selecting the main-plane elements hit by a paired rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trigger {
    pub digit: u8,
    pub phonon: u8,
}

impl Trigger {
    /// The state the first pulse of a `kind` pair moves into the auxiliary level.
    pub fn for_kind(kind: PulseKind) -> Self {
        Trigger {
            digit: kind.levels().0,
            phonon: 1,
        }
    }
}

/// Two-level model: rotates `(main, aux)` of every matching element at once.
///
/// Stands in for a pulse pair through the auxiliary level; `total_theta` is
/// the summed ideal angle of the replaced pair.
pub fn apply_paired_rotation<T: Scalar>(
    state: &mut QuantumState<T>,
    qubit: usize,
    kind: PulseKind,
    trigger: Trigger,
    total_theta: f64,
    combined_delta: f64,
    phi: f64,
) -> Result<()> {
    if state.model() != ModelKind::TwoState {
        return Err(Error::InvalidArgument(
            "paired rotations exist only in the 2state model".into(),
        ));
    }
    if kind == PulseKind::V {
        return Err(Error::InvalidArgument(
            "V pulses do not touch the phonon".into(),
        ));
    }
    state.check_qubit(qubit)?;
    let r = rotation::<T>(total_theta + combined_delta, phi);
    let main = state.main_len();
    let stride = state.stride(qubit);
    let offset = trigger.digit as usize * stride + trigger.phonon as usize;
    let (front, aux) = state.amplitudes_mut().split_at_mut(main);
    for base in (0..main).step_by(2 * stride) {
        for i in (0..stride).step_by(2) {
            let p = base + offset + i;
            let (ax, ay) = (front[p], aux[p]);
            front[p] = r[0][0] * ax + r[0][1] * ay;
            aux[p] = r[1][0] * ax + r[1][1] * ay;
        }
    }
    Ok(())
}

/// Claims on phonon-1 main-plane elements by a nest of auxiliary-level pairs.
///
/// An element belongs to the first `(qubit, digit)` claim it matches, since
/// the outermost pulse that reaches it moves it out of the phonon state before
/// any inner pulse fires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct ClaimMap {
    owner: Vec<u8>,
}

pub(crate) const UNCLAIMED: u8 = u8::MAX;

impl ClaimMap {
    pub(crate) fn new<T: Scalar>(state: &QuantumState<T>, claims: &[(usize, u8)]) -> Self {
        let main = state.main_len();
        let owner = (0..main / 2)
            .map(|e| {
                let pos = 2 * e + 1;
                claims
                    .iter()
                    .position(|&(q, d)| state.digit(pos, q) == d)
                    .map_or(UNCLAIMED, |k| k as u8)
            })
            .collect();
        Self { owner }
    }

    /// Rotates `(main, aux)` of every element owned by claim `which`.
    pub(crate) fn rotate<T: Scalar>(
        &self,
        state: &mut QuantumState<T>,
        which: usize,
        theta: f64,
        phi: f64,
    ) {
        let r = rotation::<T>(theta, phi);
        let main = state.main_len();
        let (front, aux) = state.amplitudes_mut().split_at_mut(main);
        for (e, &o) in self.owner.iter().enumerate() {
            if o as usize == which {
                let p = 2 * e + 1;
                let (ax, ay) = (front[p], aux[p]);
                front[p] = r[0][0] * ax + r[0][1] * ay;
                aux[p] = r[1][0] * ax + r[1][1] * ay;
            }
        }
    }
}
