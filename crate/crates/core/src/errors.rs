//! Operational-error sampling and phonon decoherence.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::statespace::{ModelKind, QuantumState};
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    #[default]
    None,
    /// Constant offset `μ` on every angle.
    Bias,
    /// Zero-mean Gaussian with deviation `σ`, fresh per pulse.
    Noise,
    /// Gaussian with mean `μ` and deviation `σ`.
    Both,
}

impl FromStr for ErrorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ErrorMode::None),
            "bias" => Ok(ErrorMode::Bias),
            "noise" | "gaussian" => Ok(ErrorMode::Noise),
            "both" => Ok(ErrorMode::Both),
            other => Err(Error::InvalidArgument(format!(
                "unknown error mode `{other}`"
            ))),
        }
    }
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorMode::None => "none",
            ErrorMode::Bias => "bias",
            ErrorMode::Noise => "noise",
            ErrorMode::Both => "both",
        })
    }
}

/// Distribution of the per-pulse angle errors, in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorConfig {
    pub mode: ErrorMode,
    pub mu: f64,
    pub sigma: f64,
}

impl ErrorConfig {
    pub const NONE: ErrorConfig = ErrorConfig {
        mode: ErrorMode::None,
        mu: 0.0,
        sigma: 0.0,
    };

    pub fn bias(mu: f64) -> Self {
        Self {
            mode: ErrorMode::Bias,
            mu,
            sigma: 0.0,
        }
    }

    pub fn noise(sigma: f64) -> Self {
        Self {
            mode: ErrorMode::Noise,
            mu: 0.0,
            sigma,
        }
    }

    pub fn both(mu: f64, sigma: f64) -> Self {
        Self {
            mode: ErrorMode::Both,
            mu,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() || !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "error distribution needs finite mu and sigma >= 0 (got mu={}, sigma={})",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.mode == ErrorMode::None
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoherenceMethod {
    #[default]
    None,
    /// Decay without renormalization; the norm is the survival probability.
    Decay,
    /// Decay, renormalize, then a stochastic quantum jump.
    SponEmit,
}

impl FromStr for DecoherenceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(DecoherenceMethod::None),
            "decay" => Ok(DecoherenceMethod::Decay),
            "spon_emit" | "sponemit" | "emit" => Ok(DecoherenceMethod::SponEmit),
            other => Err(Error::InvalidArgument(format!(
                "unknown decoherence method `{other}`"
            ))),
        }
    }
}

impl fmt::Display for DecoherenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoherenceMethod::None => "none",
            DecoherenceMethod::Decay => "decay",
            DecoherenceMethod::SponEmit => "spon_emit",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceConfig {
    pub method: DecoherenceMethod,
    /// Per-pulse decay parameter, constant over a run.
    pub dec: f64,
}

impl DecoherenceConfig {
    pub const NONE: DecoherenceConfig = DecoherenceConfig {
        method: DecoherenceMethod::None,
        dec: 0.0,
    };

    pub fn decay(dec: f64) -> Self {
        Self {
            method: DecoherenceMethod::Decay,
            dec,
        }
    }

    pub fn spon_emit(dec: f64) -> Self {
        Self {
            method: DecoherenceMethod::SponEmit,
            dec,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dec >= 0.0) || !self.dec.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "decoherence rate must be finite and >= 0 (got {})",
                self.dec
            )));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.method == DecoherenceMethod::None
    }
}

/// Seeded random stream, identical across runs and platforms for a given seed.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            draws: 0,
        }
    }

    /// Independent stream for `(seed, trial, purpose)`.
    pub fn derive(seed: u64, trial: u64, purpose: u64) -> Self {
        Self::new(mix(mix(seed ^ 0x6a09_e667_f3bc_c909, trial), purpose))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit words consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform in `[0, 1)` from the top 53 bits of one word.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals (Box–Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// SplitMix64 finalizer over `a ⊕ rot(b)`.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(29).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Error offsets `(dθ, dφ)` for one pulse.
pub fn draw_error_angles(cfg: &ErrorConfig, rng: &mut RngStream) -> (f64, f64) {
    match cfg.mode {
        ErrorMode::None => (0.0, 0.0),
        ErrorMode::Bias => (cfg.mu, cfg.mu),
        ErrorMode::Noise => {
            let (a, b) = rng.normal_pair();
            (cfg.sigma * a, cfg.sigma * b)
        }
        ErrorMode::Both => {
            let (a, b) = rng.normal_pair();
            (cfg.mu + cfg.sigma * a, cfg.mu + cfg.sigma * b)
        }
    }
}

/// Multiplies every phonon-1 amplitude by `e^{-dec/2}`.
pub fn apply_decay<T: Scalar>(state: &mut QuantumState<T>, dec: f64) {
    if dec == 0.0 {
        return;
    }
    let factor = T::of((-dec / 2.0).exp());
    let main = state.main_len();
    for a in state.amplitudes_mut()[..main].iter_mut().skip(1).step_by(2) {
        *a = a.scale(factor);
    }
}

/// Emission probability `dec · p_phonon` for the current state.
pub fn emission_probability<T: Scalar>(state: &QuantumState<T>, dec: f64) -> f64 {
    (dec * state.phonon_weight().as_f64()).min(1.0)
}

/// Quantum-jump check: with probability `dec · p_phonon` the phonon
/// collapses, moving each configuration's phonon-1 amplitude into its
/// phonon-0 slot, and the state is renormalized.
///
/// One uniform is consumed per call whether or not an emission happens.
pub fn emission_step<T: Scalar>(
    state: &mut QuantumState<T>,
    dec: f64,
    rng: &mut RngStream,
) -> Result<bool> {
    let p_emit = emission_probability(state, dec);
    let u = rng.uniform();
    if u >= p_emit {
        return Ok(false);
    }
    collapse_phonon(state);
    state.renormalize()?;
    Ok(true)
}

fn collapse_phonon<T: Scalar>(state: &mut QuantumState<T>) {
    let zero = Complex::new(T::zero(), T::zero());
    let main = state.main_len();
    let amps = state.amplitudes_mut();
    for pair in amps[..main].chunks_exact_mut(2) {
        pair[0] = pair[1];
        pair[1] = zero;
    }
    // Auxiliary amplitude sits in phonon 0; its phonon-1 partner does not exist.
    if state.model() == ModelKind::TwoState {
        for a in &mut state.amplitudes_mut()[main..] {
            *a = zero;
        }
    }
}

/// Decoherence step run after every laser pulse.
pub fn decoherence_after_pulse<T: Scalar>(
    state: &mut QuantumState<T>,
    cfg: &DecoherenceConfig,
    rng: &mut RngStream,
) -> Result<bool> {
    match cfg.method {
        DecoherenceMethod::None => Ok(false),
        DecoherenceMethod::Decay => {
            apply_decay(state, cfg.dec);
            Ok(false)
        }
        DecoherenceMethod::SponEmit => {
            apply_decay(state, cfg.dec);
            state.renormalize()?;
            emission_step(state, cfg.dec, rng)
        }
    }
}
