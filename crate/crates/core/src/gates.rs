//! Symbolic gates and their lowering to laser pulses.
//!
//! Three-level lowering (application order):
//!
//! | gate | pulses |
//! |------|--------|
//! | `CPhase(m, n)` | `U_m(π,0) Û_n(2π,0) U_m(π,0)` |
//! | `CNot(m, n)` | `V_n(π/2,-π/2)` · CPhase · `V_n(π/2,π/2)` |
//! | `CCNot(l, m; n)` | `V_n(π/2,-π/2) U_l(π,0) Û_m(π,0) Û_n(π,0) Û_n(π,0) Û_m(π,0) U_l(π,0) V_n(π/2,π/2)` |
//! | `Fourier(q)` | `V_q(π/2,-π/2) U_q(2π,0)` |
//! | `ReflectZero(l; s)` | `U_s(π,0) Ũ_l1(π) … Ũ_lL(2π) … Ũ_l1(π) U_s(π,π)` |
//!
//! The controlled phase flips the sign of `|e0⟩_m|e0⟩_n` only. The `CCNot`
//! core flips the sign of `|e0 e0 e0⟩` only, and the `V_n` dressing turns
//! both into bit flips of `n`. `ReflectZero` needs the ancilla `s` in `e0`
//! and yields `diag(1, -1, …, -1)` over the register.
//!
//! In the two-level model every maximal run of pulses through the auxiliary
//! level becomes an [`AuxBlock`]: the pulses are matched into nested pairs
//! (a lone `2π` pulse is its own pair) and each pair is applied as one
//! rotation of the `(main, aux)` amplitudes it owns.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::errors::{
    decoherence_after_pulse, draw_error_angles, DecoherenceConfig, ErrorConfig, RngStream,
};
use crate::pulse::{apply_pulse, ClaimMap, PulseKind, PulseSpec, Trigger};
use crate::statespace::{ModelKind, QuantumState, E0};
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// Single `V` pulse.
    Rotation {
        qubit: usize,
        theta: f64,
        phi: f64,
    },
    CNot {
        control: usize,
        target: usize,
    },
    CPhase {
        control: usize,
        target: usize,
    },
    CCNot {
        controls: [usize; 2],
        target: usize,
    },
    /// Measure, then flip to `1` if needed.
    SetBit(usize),
    /// Measure, then flip to `0` if needed.
    ClearBit(usize),
    /// Disentangle, clear the `e0` branch and renormalize toward the error terms.
    ReuseRenorm(usize),
    /// Single-qubit Fourier (Hadamard) transform, one `V` and one `U` pulse.
    Fourier(usize),
    /// Negates every register value except zero; `ancilla` must hold `1`.
    ReflectZero {
        qubits: Vec<usize>,
        ancilla: usize,
    },
}

impl Gate {
    /// Bit flip up to a global phase: `V(π, 0) = -i·X`.
    pub fn not(qubit: usize) -> Gate {
        Gate::Rotation {
            qubit,
            theta: PI,
            phi: 0.0,
        }
    }

    /// Equal superposition from `|0⟩`.
    pub fn superpose(qubit: usize) -> Gate {
        Gate::Rotation {
            qubit,
            theta: FRAC_PI_2,
            phi: FRAC_PI_2,
        }
    }

    pub fn is_logic(&self) -> bool {
        matches!(
            self,
            Gate::CNot { .. }
                | Gate::CPhase { .. }
                | Gate::CCNot { .. }
                | Gate::SetBit(_)
                | Gate::ClearBit(_)
        )
    }

    /// Static lookup: gates built only from π pulses, whose auxiliary pairs
    /// are separated by sign-flipping rotations.
    pub fn intra_cancels(&self) -> bool {
        matches!(
            self,
            Gate::CNot { .. } | Gate::CPhase { .. } | Gate::CCNot { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::Rotation { .. } => "rot",
            Gate::CNot { .. } => "cnot",
            Gate::CPhase { .. } => "cphase",
            Gate::CCNot { .. } => "ccnot",
            Gate::SetBit(_) => "set",
            Gate::ClearBit(_) => "clear",
            Gate::ReuseRenorm(_) => "reuse",
            Gate::Fourier(_) => "fourier",
            Gate::ReflectZero { .. } => "reflect",
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rotation { qubit, .. } => vec![*qubit],
            Gate::CNot { control, target } | Gate::CPhase { control, target } => {
                vec![*control, *target]
            }
            Gate::CCNot { controls, target } => vec![controls[0], controls[1], *target],
            Gate::SetBit(q) | Gate::ClearBit(q) | Gate::ReuseRenorm(q) | Gate::Fourier(q) => {
                vec![*q]
            }
            Gate::ReflectZero { qubits, ancilla } => {
                let mut v = qubits.clone();
                v.push(*ancilla);
                v
            }
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        if let Gate::ReflectZero { qubits, .. } = self {
            if qubits.is_empty() {
                return Err(Error::InvalidArgument(
                    "reflect needs at least one register qubit".into(),
                ));
            }
        }
        for (i, &q) in qs.iter().enumerate() {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    num_qubits,
                });
            }
            if qs[..i].contains(&q) {
                return Err(Error::InvalidArgument(format!(
                    "{} repeats qubit {q}",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    /// Number of pulses in the lowering (conditional flips counted once).
    pub fn pulse_count(&self) -> usize {
        lower_gate_threestate(self)
            .iter()
            .filter(|s| !matches!(s, Step::Clear { .. }))
            .count()
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        for q in self.qubits() {
            write!(f, " {q}")?;
        }
        if let Gate::Rotation { theta, phi, .. } = self {
            write!(f, " {theta} {phi}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMethod {
    /// Always the difference of the two error angles.
    #[default]
    Simple,
    /// Difference for logic gates (or pairs known to cancel), sum otherwise.
    Mixed,
}

impl FromStr for CombineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(CombineMethod::Simple),
            "mixed" => Ok(CombineMethod::Mixed),
            other => Err(Error::InvalidArgument(format!(
                "unknown combine method `{other}`"
            ))),
        }
    }
}

impl fmt::Display for CombineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineMethod::Simple => "simple",
            CombineMethod::Mixed => "mixed",
        })
    }
}

/// Single error angle for a pulse pair applied as one rotation.
pub fn combine_error_angles(
    delta_first: f64,
    delta_second: f64,
    method: CombineMethod,
    gate_is_logic: bool,
    intra_cancels: bool,
) -> f64 {
    match method {
        CombineMethod::Simple => delta_first - delta_second,
        CombineMethod::Mixed if gate_is_logic || intra_cancels => delta_first - delta_second,
        CombineMethod::Mixed => delta_first + delta_second,
    }
}

/// One step of a three-level lowering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Pulse(PulseSpec),
    /// Measure `qubit`; apply `flip` when the outcome equals `flip_when`.
    Measure {
        qubit: usize,
        flip_when: u8,
        flip: PulseSpec,
    },
    /// Clear the `e0` branch of `qubit` and renormalize.
    Clear {
        qubit: usize,
    },
}

fn p(kind: PulseKind, qubit: usize, theta: f64, phi: f64) -> Step {
    Step::Pulse(PulseSpec::new(kind, qubit, theta, phi))
}

fn cphase_core(m: usize, n: usize) -> [Step; 3] {
    [
        p(PulseKind::U, m, PI, 0.0),
        p(PulseKind::UHat, n, TAU, 0.0),
        p(PulseKind::U, m, PI, 0.0),
    ]
}

/// Pulse sequence of `gate` in application order, all errors zero.
pub fn lower_gate_threestate(gate: &Gate) -> Vec<Step> {
    use PulseKind::*;
    let flip = |q| PulseSpec::new(V, q, PI, -FRAC_PI_2);
    match *gate {
        Gate::Rotation { qubit, theta, phi } => vec![p(V, qubit, theta, phi)],
        Gate::CPhase { control, target } => cphase_core(control, target).to_vec(),
        Gate::CNot { control, target } => {
            let mut v = vec![p(V, target, FRAC_PI_2, -FRAC_PI_2)];
            v.extend(cphase_core(control, target));
            v.push(p(V, target, FRAC_PI_2, FRAC_PI_2));
            v
        }
        Gate::CCNot {
            controls: [l, m],
            target: n,
        } => vec![
            p(V, n, FRAC_PI_2, -FRAC_PI_2),
            p(U, l, PI, 0.0),
            p(UHat, m, PI, 0.0),
            p(UHat, n, PI, 0.0),
            p(UHat, n, PI, 0.0),
            p(UHat, m, PI, 0.0),
            p(U, l, PI, 0.0),
            p(V, n, FRAC_PI_2, FRAC_PI_2),
        ],
        Gate::SetBit(q) => vec![Step::Measure {
            qubit: q,
            flip_when: 0,
            flip: flip(q),
        }],
        Gate::ClearBit(q) => vec![Step::Measure {
            qubit: q,
            flip_when: 1,
            flip: flip(q),
        }],
        Gate::ReuseRenorm(q) => vec![p(V, q, FRAC_PI_2, -FRAC_PI_2), Step::Clear { qubit: q }],
        Gate::Fourier(q) => vec![p(V, q, FRAC_PI_2, -FRAC_PI_2), p(U, q, TAU, 0.0)],
        Gate::ReflectZero {
            ref qubits,
            ancilla,
        } => {
            let (last, rest) = qubits.split_last().expect("validated non-empty");
            let mut v = vec![p(U, ancilla, PI, 0.0)];
            v.extend(rest.iter().map(|&q| p(UTilde, q, PI, 0.0)));
            v.push(p(UTilde, *last, TAU, 0.0));
            v.extend(rest.iter().rev().map(|&q| p(UTilde, q, PI, 0.0)));
            v.push(p(U, ancilla, PI, PI));
            v
        }
    }
}

/// A pulse pair through the auxiliary level, applied as one rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxPair {
    pub qubit: usize,
    pub kind: PulseKind,
    /// Summed ideal angle of the replaced pulses.
    pub total_theta: f64,
    pub phi: f64,
    /// 2 for a matched π-pulse pair, 1 for a lone 2π pulse.
    pub halves: u8,
}

/// Nested pairs replacing a run of auxiliary-level pulses.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxBlock {
    /// Outermost pair first; an element belongs to the first pair it triggers.
    pub pairs: Vec<AuxPair>,
    /// Original pulse order as `(pair, is_second_half)`.
    pub slots: Vec<(usize, bool)>,
}

impl AuxBlock {
    fn from_pulses(pulses: &[PulseSpec]) -> Result<Self> {
        let mut pairs: Vec<AuxPair> = Vec::new();
        let mut slots = Vec::with_capacity(pulses.len());
        let mut open: Vec<usize> = Vec::new();
        for pulse in pulses {
            let full_turn = (pulse.theta - TAU).abs() < 1e-12;
            if full_turn {
                pairs.push(AuxPair {
                    qubit: pulse.qubit,
                    kind: pulse.kind,
                    total_theta: pulse.theta,
                    phi: pulse.phi,
                    halves: 1,
                });
                slots.push((pairs.len() - 1, false));
                continue;
            }
            match open.last() {
                Some(&k) if pairs[k].qubit == pulse.qubit && pairs[k].kind == pulse.kind => {
                    open.pop();
                    pairs[k].total_theta += pulse.theta;
                    slots.push((k, true));
                }
                _ => {
                    pairs.push(AuxPair {
                        qubit: pulse.qubit,
                        kind: pulse.kind,
                        total_theta: pulse.theta,
                        phi: pulse.phi,
                        halves: 2,
                    });
                    open.push(pairs.len() - 1);
                    slots.push((pairs.len() - 1, false));
                }
            }
        }
        if !open.is_empty() {
            return Err(Error::InvalidArgument(
                "auxiliary-level pulses do not form closed pairs".into(),
            ));
        }
        Ok(Self { pairs, slots })
    }

    fn claims(&self) -> Vec<(usize, u8)> {
        self.pairs
            .iter()
            .map(|pair| (pair.qubit, Trigger::for_kind(pair.kind).digit))
            .collect()
    }
}

/// One step of a two-level lowering.
#[derive(Clone, Debug, PartialEq)]
pub enum TwoStateStep {
    Pulse(PulseSpec),
    Block(AuxBlock),
    Measure {
        qubit: usize,
        flip_when: u8,
        flip: PulseSpec,
    },
    Clear {
        qubit: usize,
    },
}

/// Two-level lowering: direct `V`/`U` pulses plus auxiliary blocks.
pub fn lower_gate_twostate(gate: &Gate) -> Result<Vec<TwoStateStep>> {
    let mut out = Vec::new();
    let mut run: Vec<PulseSpec> = Vec::new();
    for step in lower_gate_threestate(gate) {
        match step {
            Step::Pulse(pulse) if pulse.kind.uses_auxiliary() => run.push(pulse),
            other => {
                if !run.is_empty() {
                    out.push(TwoStateStep::Block(AuxBlock::from_pulses(&run)?));
                    run.clear();
                }
                out.push(match other {
                    Step::Pulse(pulse) => TwoStateStep::Pulse(pulse),
                    Step::Measure {
                        qubit,
                        flip_when,
                        flip,
                    } => TwoStateStep::Measure {
                        qubit,
                        flip_when,
                        flip,
                    },
                    Step::Clear { qubit } => TwoStateStep::Clear { qubit },
                });
            }
        }
    }
    if !run.is_empty() {
        out.push(TwoStateStep::Block(AuxBlock::from_pulses(&run)?));
    }
    Ok(out)
}

/// Positions carrying amplitude in a reference run, one bit per position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Support {
    words: Vec<u64>,
}

impl Support {
    pub fn of<T: Scalar>(state: &QuantumState<T>, threshold: f64) -> Self {
        let mut words = vec![0u64; state.len().div_ceil(64)];
        for (pos, a) in state.amplitudes().iter().enumerate() {
            if a.norm_sqr().as_f64() > threshold {
                words[pos / 64] |= 1 << (pos % 64);
            }
        }
        Self { words }
    }

    #[inline]
    pub fn contains(&self, pos: usize) -> bool {
        self.words
            .get(pos / 64)
            .is_some_and(|w| w >> (pos % 64) & 1 == 1)
    }
}

/// Zeroes every amplitude with `e0` on `qubit`, then restores the pre-clear
/// norm. With a reference `support`, only amplitudes outside it (those that
/// exist because of errors) are scaled up; otherwise everything is.
pub fn clear_and_renormalize<T: Scalar>(
    state: &mut QuantumState<T>,
    qubit: usize,
    support: Option<&Support>,
) -> Result<()> {
    state.check_qubit(qubit)?;
    let before = state.squared_norm();
    let zero = Complex::new(T::zero(), T::zero());
    for pos in 0..state.len() {
        if state.digit(pos, qubit) == E0 {
            state.amplitudes_mut()[pos] = zero;
        }
    }
    let after = state.squared_norm();
    if !(after > T::zero()) {
        return Err(Error::Degenerate(format!(
            "clearing qubit {qubit} removed all amplitude"
        )));
    }
    let deficit = before - after;
    if !(deficit > T::zero()) {
        return Ok(());
    }
    if let Some(support) = support {
        let outside = state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(pos, _)| !support.contains(*pos))
            .fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr());
        if outside > T::of(1e-300) {
            let factor = ((outside + deficit) / outside).sqrt();
            for (pos, a) in state.amplitudes_mut().iter_mut().enumerate() {
                if !support.contains(pos) {
                    *a = a.scale(factor);
                }
            }
            return Ok(());
        }
    }
    state.scale((before / after).sqrt());
    Ok(())
}

/// Per-trial random streams: operational errors, emissions, measurements.
#[derive(Clone, Debug)]
pub struct TrialStreams {
    pub op: RngStream,
    pub emit: RngStream,
    pub measure: RngStream,
}

impl TrialStreams {
    pub const OP: u64 = 1;
    pub const EMIT: u64 = 2;
    pub const MEASURE: u64 = 3;

    pub fn derive(seed: u64, trial: u64) -> Self {
        Self {
            op: RngStream::derive(seed, trial, Self::OP),
            emit: RngStream::derive(seed, trial, Self::EMIT),
            measure: RngStream::derive(seed, trial, Self::MEASURE),
        }
    }
}

/// How `ReuseRenorm` finds the zero-error support it renormalizes against.
#[derive(Clone, Debug, Default)]
pub enum ReuseMode {
    /// Uniform renormalization.
    #[default]
    Off,
    /// Reference run: record the support after every clear.
    Record(Vec<Support>),
    /// Errored run: replay supports recorded by the reference.
    Replay(Arc<Vec<Support>>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecStats {
    pub pulses: u64,
    pub emissions: u64,
    pub measurements: u64,
}

/// Applies gates to a state under one error and decoherence configuration.
#[derive(Clone, Debug)]
pub struct Executor {
    model: ModelKind,
    errors: ErrorConfig,
    decoherence: DecoherenceConfig,
    combine: CombineMethod,
    streams: TrialStreams,
    reuse: ReuseMode,
    reuse_index: usize,
    stats: ExecStats,
}

const SUPPORT_THRESHOLD: f64 = 1e-24;

impl Executor {
    pub fn new(
        model: ModelKind,
        errors: ErrorConfig,
        decoherence: DecoherenceConfig,
        combine: CombineMethod,
        streams: TrialStreams,
    ) -> Result<Self> {
        errors.validate()?;
        decoherence.validate()?;
        Ok(Self {
            model,
            errors,
            decoherence,
            combine,
            streams,
            reuse: ReuseMode::Off,
            reuse_index: 0,
            stats: ExecStats::default(),
        })
    }

    /// Error-free executor, used for reference runs.
    pub fn ideal(model: ModelKind, combine: CombineMethod, seed: u64) -> Self {
        Self::new(
            model,
            ErrorConfig::NONE,
            DecoherenceConfig::NONE,
            combine,
            TrialStreams::derive(seed, u64::MAX),
        )
        .expect("ideal configuration is valid")
    }

    pub fn with_reuse(mut self, reuse: ReuseMode) -> Self {
        self.reuse = reuse;
        self
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn stats(&self) -> ExecStats {
        self.stats
    }

    pub fn streams(&self) -> &TrialStreams {
        &self.streams
    }

    /// Supports recorded in [`ReuseMode::Record`].
    pub fn into_recorded_supports(self) -> Vec<Support> {
        match self.reuse {
            ReuseMode::Record(v) => v,
            _ => Vec::new(),
        }
    }

    pub fn run<T: Scalar>(&mut self, state: &mut QuantumState<T>, gates: &[Gate]) -> Result<()> {
        gates.iter().try_for_each(|g| self.apply_gate(state, g))
    }

    pub fn apply_gate<T: Scalar>(
        &mut self,
        state: &mut QuantumState<T>,
        gate: &Gate,
    ) -> Result<()> {
        if state.model() != self.model {
            return Err(Error::Mismatch(format!(
                "executor for {} given a {} state",
                self.model,
                state.model()
            )));
        }
        gate.validate(state.num_qubits())?;
        match self.model {
            ModelKind::ThreeState => {
                for step in lower_gate_threestate(gate) {
                    match step {
                        Step::Pulse(pulse) => self.pulse(state, pulse)?,
                        Step::Measure {
                            qubit,
                            flip_when,
                            flip,
                        } => self.measure(state, qubit, flip_when, flip)?,
                        Step::Clear { qubit } => self.clear(state, qubit)?,
                    }
                }
            }
            ModelKind::TwoState => {
                for step in lower_gate_twostate(gate)? {
                    match step {
                        TwoStateStep::Pulse(pulse) => self.pulse(state, pulse)?,
                        TwoStateStep::Block(block) => self.block(state, &block, gate)?,
                        TwoStateStep::Measure {
                            qubit,
                            flip_when,
                            flip,
                        } => self.measure(state, qubit, flip_when, flip)?,
                        TwoStateStep::Clear { qubit } => self.clear(state, qubit)?,
                    }
                }
            }
        }
        Ok(())
    }

    fn decohere<T: Scalar>(&mut self, state: &mut QuantumState<T>) -> Result<()> {
        if decoherence_after_pulse(state, &self.decoherence, &mut self.streams.emit)? {
            self.stats.emissions += 1;
        }
        Ok(())
    }

    fn pulse<T: Scalar>(&mut self, state: &mut QuantumState<T>, pulse: PulseSpec) -> Result<()> {
        let (dt, dp) = draw_error_angles(&self.errors, &mut self.streams.op);
        apply_pulse(state, &pulse.with_errors(dt, dp))?;
        self.stats.pulses += 1;
        self.decohere(state)
    }

    fn measure<T: Scalar>(
        &mut self,
        state: &mut QuantumState<T>,
        qubit: usize,
        flip_when: u8,
        flip: PulseSpec,
    ) -> Result<()> {
        let outcome = state.measure_qubit(qubit, &mut self.streams.measure)?;
        self.stats.measurements += 1;
        if outcome == flip_when {
            self.pulse(state, flip)?;
        }
        Ok(())
    }

    fn clear<T: Scalar>(&mut self, state: &mut QuantumState<T>, qubit: usize) -> Result<()> {
        let index = self.reuse_index;
        self.reuse_index += 1;
        match &mut self.reuse {
            ReuseMode::Off => clear_and_renormalize(state, qubit, None),
            ReuseMode::Record(supports) => {
                clear_and_renormalize(state, qubit, None)?;
                supports.push(Support::of(state, SUPPORT_THRESHOLD));
                Ok(())
            }
            ReuseMode::Replay(supports) => {
                let support = supports.get(index).ok_or_else(|| {
                    Error::Precondition(format!("no reference support recorded for reuse #{index}"))
                })?;
                clear_and_renormalize(state, qubit, Some(support))
            }
        }
    }

    fn block<T: Scalar>(
        &mut self,
        state: &mut QuantumState<T>,
        block: &AuxBlock,
        gate: &Gate,
    ) -> Result<()> {
        let draws: Vec<(f64, f64)> = block
            .slots
            .iter()
            .map(|_| draw_error_angles(&self.errors, &mut self.streams.op))
            .collect();
        let mut firsts = vec![(0.0, 0.0); block.pairs.len()];
        let mut deltas = vec![(0.0, 0.0); block.pairs.len()];
        for (&(k, second), &d) in block.slots.iter().zip(&draws) {
            if block.pairs[k].halves == 1 {
                deltas[k] = d;
            } else if !second {
                firsts[k] = d;
            } else {
                let (logic, cancels) = (gate.is_logic(), gate.intra_cancels());
                deltas[k] = (
                    combine_error_angles(firsts[k].0, d.0, self.combine, logic, cancels),
                    combine_error_angles(firsts[k].1, d.1, self.combine, logic, cancels),
                );
            }
        }
        let claims = ClaimMap::new(state, &block.claims());
        if self.decoherence.is_none() {
            for (k, pair) in block.pairs.iter().enumerate() {
                claims.rotate(
                    state,
                    k,
                    pair.total_theta + deltas[k].0,
                    pair.phi + deltas[k].1,
                );
            }
            self.stats.pulses += block.slots.len() as u64;
            return Ok(());
        }
        // Pulse by pulse, so the phonon population seen by decoherence tracks
        // the three-level evolution: owned amplitude waits in the auxiliary
        // plane (phonon 0) between the two halves of its pair.
        for &(k, _) in &block.slots {
            let pair = &block.pairs[k];
            let angle = (pair.total_theta + deltas[k].0) / pair.halves as f64;
            claims.rotate(state, k, angle, pair.phi + deltas[k].1);
            self.stats.pulses += 1;
            self.decohere(state)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{inner_product, Plane, StateIndex, E1};

    type S = QuantumState<f64>;

    fn ideal(model: ModelKind) -> Executor {
        Executor::ideal(model, CombineMethod::Simple, 0)
    }

    /// Checks `|input⟩ → phase·|expected⟩` with one common phase over all inputs.
    fn check_permutation(model: ModelKind, m: usize, gate: &Gate, map: impl Fn(u64) -> u64) {
        let mut phase: Option<Complex<f64>> = None;
        for input in 0..1u64 << m {
            let mut s = S::new(model, m, input).unwrap();
            ideal(model).apply_gate(&mut s, gate).unwrap();
            let expect = S::new(model, m, map(input)).unwrap();
            let ip = inner_product(&expect, &s).unwrap();
            assert!(
                (ip.norm() - 1.0).abs() < 1e-12,
                "{gate} on {input:b}: overlap {ip}"
            );
            match phase {
                None => phase = Some(ip),
                Some(ph) => assert!(
                    (ph - ip).norm() < 1e-12,
                    "{gate} on {input:b}: phase {ip} vs {ph}"
                ),
            }
        }
    }

    #[test]
    fn combine_rules() {
        use CombineMethod::*;
        for logic in [false, true] {
            for cancels in [false, true] {
                assert_eq!(
                    combine_error_angles(0.01, 0.01, Simple, logic, cancels),
                    0.0
                );
                assert!(
                    (combine_error_angles(0.01, 0.02, Simple, logic, cancels) + 0.01).abs() < 1e-15
                );
                let mixed = combine_error_angles(0.01, 0.02, Mixed, logic, cancels);
                let expect = if logic || cancels { -0.01 } else { 0.03 };
                assert!((mixed - expect).abs() < 1e-15, "{logic} {cancels}");
            }
        }
    }

    #[test]
    fn lowering_lengths() {
        assert_eq!(
            Gate::CNot {
                control: 0,
                target: 1
            }
            .pulse_count(),
            5
        );
        assert_eq!(
            Gate::CPhase {
                control: 0,
                target: 1
            }
            .pulse_count(),
            3
        );
        assert_eq!(
            Gate::CCNot {
                controls: [0, 1],
                target: 2
            }
            .pulse_count(),
            8
        );
        assert_eq!(
            Gate::Rotation {
                qubit: 0,
                theta: FRAC_PI_2,
                phi: FRAC_PI_2
            }
            .pulse_count(),
            1
        );
        assert_eq!(Gate::Fourier(0).pulse_count(), 2);
        for l in 1..6 {
            let g = Gate::ReflectZero {
                qubits: (0..l).collect(),
                ancilla: l,
            };
            assert_eq!(g.pulse_count(), 2 * l + 1);
        }
    }

    #[test]
    fn cnot_lowering_is_the_five_pulse_sequence() {
        let steps = lower_gate_threestate(&Gate::CNot {
            control: 0,
            target: 1,
        });
        let kinds: Vec<_> = steps
            .iter()
            .map(|s| match s {
                Step::Pulse(p) => (p.kind, p.qubit, p.theta, p.phi),
                _ => panic!(),
            })
            .collect();
        assert_eq!(
            kinds,
            vec![
                (PulseKind::V, 1, FRAC_PI_2, -FRAC_PI_2),
                (PulseKind::U, 0, PI, 0.0),
                (PulseKind::UHat, 1, TAU, 0.0),
                (PulseKind::U, 0, PI, 0.0),
                (PulseKind::V, 1, FRAC_PI_2, FRAC_PI_2),
            ]
        );
    }

    #[test]
    fn validation() {
        assert!(Gate::CNot {
            control: 1,
            target: 1
        }
        .validate(3)
        .is_err());
        assert!(Gate::CCNot {
            controls: [0, 3],
            target: 1
        }
        .validate(3)
        .is_err());
        assert!(Gate::ReflectZero {
            qubits: vec![],
            ancilla: 0
        }
        .validate(3)
        .is_err());
        assert!(Gate::CCNot {
            controls: [0, 2],
            target: 1
        }
        .validate(3)
        .is_ok());
        let mut s = S::new(ModelKind::TwoState, 2, 0).unwrap();
        let err = ideal(ModelKind::TwoState).apply_gate(
            &mut s,
            &Gate::CNot {
                control: 0,
                target: 2,
            },
        );
        assert!(matches!(err, Err(Error::QubitOutOfRange { .. })));
        assert!(ideal(ModelKind::ThreeState)
            .apply_gate(&mut s, &Gate::Fourier(0))
            .is_err());
    }

    #[test]
    fn cnot_truth_table_both_models() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            // control = qubit 0, target = qubit 1
            check_permutation(
                model,
                2,
                &Gate::CNot {
                    control: 0,
                    target: 1,
                },
                |x| {
                    if x & 1 == 1 {
                        x ^ 2
                    } else {
                        x
                    }
                },
            );
            check_permutation(
                model,
                3,
                &Gate::CNot {
                    control: 2,
                    target: 0,
                },
                |x| {
                    if x & 4 != 0 {
                        x ^ 1
                    } else {
                        x
                    }
                },
            );
        }
    }

    #[test]
    fn toffoli_truth_table_both_models() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            check_permutation(
                model,
                3,
                &Gate::CCNot {
                    controls: [0, 1],
                    target: 2,
                },
                |x| {
                    if x & 3 == 3 {
                        x ^ 4
                    } else {
                        x
                    }
                },
            );
            check_permutation(
                model,
                4,
                &Gate::CCNot {
                    controls: [3, 1],
                    target: 0,
                },
                |x| {
                    if x & 0b1010 == 0b1010 {
                        x ^ 1
                    } else {
                        x
                    }
                },
            );
        }
    }

    #[test]
    fn controlled_phase_signs() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            for input in 0..4u64 {
                let mut s = S::new(model, 2, input).unwrap();
                ideal(model)
                    .apply_gate(
                        &mut s,
                        &Gate::CPhase {
                            control: 0,
                            target: 1,
                        },
                    )
                    .unwrap();
                let ip = inner_product(&S::new(model, 2, input).unwrap(), &s).unwrap();
                let expect = if input == 3 { -1.0 } else { 1.0 };
                assert!(
                    (ip - Complex::new(expect, 0.0)).norm() < 1e-12,
                    "{input}: {ip}"
                );
            }
        }
    }

    #[test]
    fn fourier_is_hadamard() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            for input in 0..2u64 {
                let mut s = S::new(model, 1, input).unwrap();
                ideal(model).apply_gate(&mut s, &Gate::Fourier(0)).unwrap();
                let a0 = s
                    .amplitude(&StateIndex {
                        digits: vec![0],
                        phonon: 0,
                        plane: Plane::Main,
                    })
                    .unwrap();
                let a1 = s
                    .amplitude(&StateIndex {
                        digits: vec![1],
                        phonon: 0,
                        plane: Plane::Main,
                    })
                    .unwrap();
                let sign = if input == 0 { 1.0 } else { -1.0 };
                assert!((a0 - Complex::new(h, 0.0)).norm() < 1e-12);
                assert!((a1 - Complex::new(sign * h, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reflect_zero_signs() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            for l in 1..=3usize {
                let gate = Gate::ReflectZero {
                    qubits: (0..l).collect(),
                    ancilla: l,
                };
                for value in 0..1u64 << l {
                    let input = value | 1 << l;
                    let mut s = S::new(model, l + 1, input).unwrap();
                    ideal(model).apply_gate(&mut s, &gate).unwrap();
                    let ip = inner_product(&S::new(model, l + 1, input).unwrap(), &s).unwrap();
                    let expect = if value == 0 { 1.0 } else { -1.0 };
                    assert!(
                        (ip - Complex::new(expect, 0.0)).norm() < 1e-12,
                        "l={l} v={value}: {ip}"
                    );
                }
            }
        }
    }

    #[test]
    fn set_and_clear_bits() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            for seed in 0..10 {
                let mut ex = Executor::ideal(model, CombineMethod::Simple, seed);
                let mut s = S::new(model, 2, 0).unwrap();
                ex.apply_gate(&mut s, &Gate::superpose(0)).unwrap();
                ex.apply_gate(&mut s, &Gate::superpose(1)).unwrap();
                ex.apply_gate(&mut s, &Gate::SetBit(0)).unwrap();
                ex.apply_gate(&mut s, &Gate::ClearBit(1)).unwrap();
                assert!((s.probability_of_value(0..2, 0b01).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_blocks_have_expected_shape() {
        let steps = lower_gate_twostate(&Gate::CCNot {
            controls: [0, 1],
            target: 2,
        })
        .unwrap();
        let blocks: Vec<_> = steps
            .iter()
            .filter_map(|s| match s {
                TwoStateStep::Block(b) => Some(b),
                _ => None,
            })
            .collect();
        assert_eq!(blocks.len(), 1);
        let b = blocks[0];
        assert_eq!(
            b.pairs.iter().map(|p| p.qubit).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert_eq!(b.slots, vec![(0, false), (1, false), (1, true), (0, true)]);
        assert!(b
            .pairs
            .iter()
            .all(|p| (p.total_theta - TAU).abs() < 1e-12 && p.halves == 2));

        let steps = lower_gate_twostate(&Gate::CNot {
            control: 0,
            target: 1,
        })
        .unwrap();
        assert_eq!(steps.len(), 5);
        match &steps[2] {
            TwoStateStep::Block(b) => assert_eq!(b.pairs[0].halves, 1),
            other => panic!("{other:?}"),
        }
    }

    fn random_computational(m: usize, seed: u64) -> (S, S) {
        let mut rng = RngStream::new(seed);
        let mut full = S::zeros(ModelKind::ThreeState, m).unwrap();
        let mut reduced = S::zeros(ModelKind::TwoState, m).unwrap();
        for pos in 0..full.len() {
            let ix = full.decode(pos);
            if ix.phonon == 0 && ix.digits.iter().all(|&d| d != E1) {
                let (a, b) = rng.normal_pair();
                full.amplitudes_mut()[pos] = Complex::new(a, b);
                let q = reduced.encode(&ix).unwrap();
                reduced.amplitudes_mut()[q] = Complex::new(a, b);
            }
        }
        full.renormalize().unwrap();
        reduced.renormalize().unwrap();
        (full, reduced)
    }

    fn sample_gates() -> Vec<Gate> {
        vec![
            Gate::Rotation {
                qubit: 1,
                theta: 0.7,
                phi: -0.2,
            },
            Gate::CNot {
                control: 2,
                target: 0,
            },
            Gate::CPhase {
                control: 0,
                target: 1,
            },
            Gate::CCNot {
                controls: [1, 2],
                target: 0,
            },
            Gate::CCNot {
                controls: [0, 2],
                target: 1,
            },
            Gate::Fourier(2),
            Gate::ReflectZero {
                qubits: vec![0, 1],
                ancilla: 2,
            },
            Gate::ReflectZero {
                qubits: vec![2, 0, 1],
                ancilla: 3,
            },
        ]
    }

    #[test]
    fn zero_error_models_agree_on_main_plane() {
        for seed in 0..5 {
            let (mut full, mut reduced) = random_computational(4, seed);
            let gates = sample_gates();
            ideal(ModelKind::ThreeState).run(&mut full, &gates).unwrap();
            ideal(ModelKind::TwoState)
                .run(&mut reduced, &gates)
                .unwrap();
            assert!((full.squared_norm() - 1.0).abs() < 1e-12);
            assert!((reduced.squared_norm() - 1.0).abs() < 1e-12);
            assert!(full.auxiliary_weight() < 1e-20);
            assert!(reduced.auxiliary_weight() < 1e-20);
            for pos in 0..full.len() {
                let ix = full.decode(pos);
                if ix.digits.iter().all(|&d| d != E1) {
                    let q = reduced.encode(&ix).unwrap();
                    assert!((full.amplitudes()[pos] - reduced.amplitudes()[q]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn self_inverse_gates_restore_state() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            let (full, reduced) = random_computational(3, 11);
            let start = if model == ModelKind::ThreeState {
                full
            } else {
                reduced
            };
            for gate in [
                Gate::CNot {
                    control: 0,
                    target: 2,
                },
                Gate::CPhase {
                    control: 1,
                    target: 2,
                },
                Gate::CCNot {
                    controls: [2, 0],
                    target: 1,
                },
            ] {
                let mut s = start.clone();
                let mut ex = ideal(model);
                ex.apply_gate(&mut s, &gate).unwrap();
                ex.apply_gate(&mut s, &gate).unwrap();
                let f = inner_product(&start, &s).unwrap().norm_sqr();
                assert!((f - 1.0).abs() < 1e-11, "{gate}: {f}");
            }
        }
    }

    #[test]
    fn decoherence_only_runs_match_across_models() {
        for dec in [
            DecoherenceConfig::decay(0.02),
            DecoherenceConfig::spon_emit(0.05),
        ] {
            for trial in 0..6 {
                let (mut full, mut reduced) = random_computational(4, 100 + trial);
                let gates = sample_gates();
                let run = |model, state: &mut S| {
                    let streams = TrialStreams::derive(9, trial);
                    let mut ex = Executor::new(
                        model,
                        ErrorConfig::NONE,
                        dec,
                        CombineMethod::Simple,
                        streams,
                    )
                    .unwrap();
                    ex.run(state, &gates).unwrap();
                    ex.stats()
                };
                let a = run(ModelKind::ThreeState, &mut full);
                let b = run(ModelKind::TwoState, &mut reduced);
                assert_eq!(a, b);
                assert!((full.squared_norm() - reduced.squared_norm()).abs() < 1e-12);
                for pos in 0..full.len() {
                    let ix = full.decode(pos);
                    if ix.digits.iter().all(|&d| d != E1) {
                        let q = reduced.encode(&ix).unwrap();
                        assert!((full.amplitudes()[pos] - reduced.amplitudes()[q]).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn operational_errors_leak_into_auxiliary_level() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            let (full, reduced) = random_computational(3, 5);
            let mut s = if model == ModelKind::ThreeState {
                full
            } else {
                reduced
            };
            let mut ex = Executor::new(
                model,
                ErrorConfig::noise(0.05),
                DecoherenceConfig::NONE,
                CombineMethod::Mixed,
                TrialStreams::derive(1, 0),
            )
            .unwrap();
            ex.run(&mut s, &sample_gates()[..6]).unwrap();
            assert!((s.squared_norm() - 1.0).abs() < 1e-12);
            assert!(s.auxiliary_weight() > 1e-8);
        }
    }

    #[test]
    fn clear_renormalizes_error_terms_only() {
        let mut s = S::zeros(ModelKind::TwoState, 2).unwrap();
        // Reference support: (q0=0, q1=0) and (q0=0, q1=1).
        let a = s
            .encode(&StateIndex {
                digits: vec![0, 0],
                phonon: 0,
                plane: Plane::Main,
            })
            .unwrap();
        let b = s
            .encode(&StateIndex {
                digits: vec![0, 1],
                phonon: 0,
                plane: Plane::Main,
            })
            .unwrap();
        let err = s
            .encode(&StateIndex {
                digits: vec![0, 1],
                phonon: 1,
                plane: Plane::Main,
            })
            .unwrap();
        let gone = s
            .encode(&StateIndex {
                digits: vec![1, 0],
                phonon: 0,
                plane: Plane::Main,
            })
            .unwrap();
        let mut reference = s.clone();
        reference.amplitudes_mut()[a] = Complex::new(0.5f64.sqrt(), 0.0);
        reference.amplitudes_mut()[b] = Complex::new(0.5f64.sqrt(), 0.0);
        let support = Support::of(&reference, 1e-24);
        s.amplitudes_mut()[a] = Complex::new(0.7, 0.0);
        s.amplitudes_mut()[b] = Complex::new(0.7, 0.0);
        s.amplitudes_mut()[err] = Complex::new(0.1, 0.0);
        s.amplitudes_mut()[gone] = Complex::new(0.02f64.sqrt(), 0.0);
        clear_and_renormalize(&mut s, 0, Some(&support)).unwrap();
        assert_eq!(s.amplitudes()[a], Complex::new(0.7, 0.0));
        assert_eq!(s.amplitudes()[gone], Complex::new(0.0, 0.0));
        assert!((s.squared_norm() - 1.01).abs() < 1e-12);
        assert!((s.amplitudes()[err].re - 0.03f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn clear_of_everything_is_degenerate() {
        let mut s = S::new(ModelKind::ThreeState, 1, 1).unwrap();
        assert!(matches!(
            clear_and_renormalize(&mut s, 0, None),
            Err(Error::Degenerate(_))
        ));
    }
}
