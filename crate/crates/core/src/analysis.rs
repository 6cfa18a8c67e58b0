//! Fidelity, trial orchestration, error correlation and parameter sweeps.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::CircuitProgram;
use crate::errors::{DecoherenceConfig, DecoherenceMethod, ErrorConfig, ErrorMode};
use crate::gates::{CombineMethod, ExecStats, Executor, ReuseMode, Support, TrialStreams};
use crate::statespace::{inner_product, ModelKind, QuantumState};
use crate::{Error, Result, Scalar};

/// `|⟨reference|psi⟩|²`, without renormalizing `psi`.
pub fn fidelity<T: Scalar>(psi: &QuantumState<T>, reference: &QuantumState<T>) -> Result<f64> {
    Ok(inner_product(reference, psi)?.norm_sqr().as_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub model: ModelKind,
    pub errors: ErrorConfig,
    pub decoherence: DecoherenceConfig,
    pub combine: CombineMethod,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads for trial-level parallelism; results never depend on it.
    pub jobs: usize,
}

impl BenchConfig {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            errors: ErrorConfig::NONE,
            decoherence: DecoherenceConfig::NONE,
            combine: CombineMethod::Simple,
            trials: 4,
            seed: 0,
            jobs: 1,
        }
    }

    pub fn with_errors(mut self, errors: ErrorConfig) -> Self {
        self.errors = errors;
        self
    }

    pub fn with_decoherence(mut self, decoherence: DecoherenceConfig) -> Self {
        self.decoherence = decoherence;
        self
    }

    pub fn with_combine(mut self, combine: CombineMethod) -> Self {
        self.combine = combine;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }
}

/// Zero-error, decoherence-free result of a program.
#[derive(Clone, Debug)]
pub struct Reference<T> {
    pub state: QuantumState<T>,
    pub supports: Arc<Vec<Support>>,
    pub stats: ExecStats,
}

pub fn reference_run<T: Scalar>(
    program: &CircuitProgram,
    model: ModelKind,
    combine: CombineMethod,
    seed: u64,
) -> Result<Reference<T>> {
    program.validate()?;
    let mut state = program.initial_state::<T>(model)?;
    let mut ex = Executor::ideal(model, combine, seed).with_reuse(ReuseMode::Record(Vec::new()));
    ex.run(&mut state, &program.gates)?;
    let stats = ex.stats();
    Ok(Reference {
        state,
        supports: Arc::new(ex.into_recorded_supports()),
        stats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    pub fidelity: f64,
    /// Squared norm at the end of the run.
    pub norm: f64,
    pub success_probability: Option<f64>,
    pub stats: ExecStats,
}

pub fn run_trial<T: Scalar>(
    program: &CircuitProgram,
    reference: &Reference<T>,
    cfg: &BenchConfig,
    trial: u64,
) -> Result<TrialResult> {
    let mut state = program.initial_state::<T>(cfg.model)?;
    let mut ex = Executor::new(
        cfg.model,
        cfg.errors,
        cfg.decoherence,
        cfg.combine,
        TrialStreams::derive(cfg.seed, trial),
    )?
    .with_reuse(ReuseMode::Replay(reference.supports.clone()));
    ex.run(&mut state, &program.gates)?;
    let success_probability = match &program.target {
        Some(t) => Some(
            state
                .probability_of_value(program.register(&t.register)?.range(), t.value)?
                .as_f64(),
        ),
        None => None,
    };
    Ok(TrialResult {
        trial,
        fidelity: fidelity(&state, &reference.state)?,
        norm: state.squared_norm().as_f64(),
        success_probability,
        stats: ex.stats(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub benchmark: String,
    pub model: ModelKind,
    pub combine: CombineMethod,
    pub errors: ErrorConfig,
    pub decoherence: DecoherenceConfig,
    pub seed: u64,
    pub trials: usize,
    pub fidelities: Vec<f64>,
    pub survival_norms: Vec<f64>,
    pub mean_fidelity: f64,
    pub stderr_fidelity: f64,
    /// Mean squared norm at the end of the runs; below 1 only for pure decay.
    pub survival_norm: f64,
    pub success_probability: Option<f64>,
    pub reference_success_probability: Option<f64>,
    pub pulses: u64,
    pub emissions: u64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean; 0 for a single sample.
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} workers: {e}")))
}

/// Runs `cfg.trials` trials against a shared reference, in parallel, with
/// results kept in trial order.
pub fn run_trials<T: Scalar>(
    program: &CircuitProgram,
    reference: &Reference<T>,
    cfg: &BenchConfig,
) -> Result<Vec<TrialResult>> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    pool(cfg.jobs)?.install(|| {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(program, reference, cfg, t))
            .collect()
    })
}

pub fn summarize<T: Scalar>(
    program: &CircuitProgram,
    reference: &Reference<T>,
    cfg: &BenchConfig,
    results: &[TrialResult],
) -> Result<FidelityReport> {
    let fidelities: Vec<f64> = results.iter().map(|r| r.fidelity).collect();
    let survival_norms: Vec<f64> = results.iter().map(|r| r.norm).collect();
    let success: Option<Vec<f64>> = results.iter().map(|r| r.success_probability).collect();
    let reference_success_probability = match &program.target {
        Some(t) => Some(
            reference
                .state
                .probability_of_value(program.register(&t.register)?.range(), t.value)?
                .as_f64(),
        ),
        None => None,
    };
    Ok(FidelityReport {
        benchmark: program.name.clone(),
        model: cfg.model,
        combine: cfg.combine,
        errors: cfg.errors,
        decoherence: cfg.decoherence,
        seed: cfg.seed,
        trials: results.len(),
        mean_fidelity: mean(&fidelities),
        stderr_fidelity: standard_error(&fidelities),
        survival_norm: mean(&survival_norms),
        success_probability: success.map(|s| mean(&s)),
        reference_success_probability,
        pulses: reference.stats.pulses,
        emissions: results.iter().map(|r| r.stats.emissions).sum(),
        fidelities,
        survival_norms,
    })
}

pub fn run_benchmark_as<T: Scalar>(
    program: &CircuitProgram,
    cfg: &BenchConfig,
) -> Result<FidelityReport> {
    let reference = reference_run::<T>(program, cfg.model, cfg.combine, cfg.seed)?;
    let results = run_trials(program, &reference, cfg)?;
    summarize(program, &reference, cfg, &results)
}

/// Double-precision [`run_benchmark_as`].
pub fn run_benchmark(program: &CircuitProgram, cfg: &BenchConfig) -> Result<FidelityReport> {
    run_benchmark_as::<f64>(program, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub f_dec: f64,
    pub f_op: f64,
    pub f_both: f64,
    pub omega: f64,
}

impl OmegaEstimate {
    pub fn new(f_dec: f64, f_op: f64, f_both: f64) -> Self {
        Self {
            f_dec,
            f_op,
            f_both,
            omega: f_both - f_dec * f_op,
        }
    }
}

/// Correlation between operational error and decoherence. The three runs
/// share per-trial streams, so the joint run sees the same error angles as
/// the error-only run and the same emission draws as the decoherence-only run.
pub fn estimate_omega_as<T: Scalar>(
    program: &CircuitProgram,
    cfg: &BenchConfig,
) -> Result<OmegaEstimate> {
    if cfg.errors.mode == ErrorMode::None || cfg.decoherence.method == DecoherenceMethod::None {
        return Err(Error::Precondition(
            "correlation needs both operational error and decoherence enabled".into(),
        ));
    }
    let reference = reference_run::<T>(program, cfg.model, cfg.combine, cfg.seed)?;
    let run = |c: BenchConfig| -> Result<f64> {
        let r = run_trials(program, &reference, &c)?;
        Ok(mean(&r.iter().map(|t| t.fidelity).collect::<Vec<_>>()))
    };
    let f_op = run(cfg.with_decoherence(DecoherenceConfig::NONE))?;
    let f_dec = run(cfg.with_errors(ErrorConfig::NONE))?;
    let f_both = run(*cfg)?;
    Ok(OmegaEstimate::new(f_dec, f_op, f_both))
}

pub fn estimate_omega(program: &CircuitProgram, cfg: &BenchConfig) -> Result<OmegaEstimate> {
    estimate_omega_as::<f64>(program, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Sigma,
    Mu,
    Dec,
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<f64> {
        use std::f64::consts::PI;
        match self {
            SweepAxis::Dec => {
                let mut v = vec![0.0];
                v.extend((-7..=0).map(|e| 10f64.powi(e)));
                v
            }
            SweepAxis::Sigma | SweepAxis::Mu => {
                let mut v = vec![0.0];
                v.extend([1024.0, 512.0, 256.0, 128.0, 64.0, 32.0].map(|d| PI / d));
                v
            }
        }
    }

    /// `cfg` with this axis set to `value`. A zero error or decoherence
    /// magnitude switches the corresponding mechanism off; otherwise the
    /// axis forces it on (noise for σ, bias for μ, the decay method for dec
    /// unless another method is already chosen).
    pub fn apply(self, cfg: &BenchConfig, value: f64) -> BenchConfig {
        let mut c = *cfg;
        match self {
            SweepAxis::Sigma => {
                c.errors.sigma = value;
                c.errors.mode = match (c.errors.mode, value == 0.0) {
                    (ErrorMode::Both | ErrorMode::Bias, _) if c.errors.mu != 0.0 => ErrorMode::Both,
                    (_, true) => ErrorMode::None,
                    _ => ErrorMode::Noise,
                };
            }
            SweepAxis::Mu => {
                c.errors.mu = value;
                c.errors.mode = match (c.errors.mode, value == 0.0) {
                    (ErrorMode::Both | ErrorMode::Noise, _) if c.errors.sigma != 0.0 => {
                        ErrorMode::Both
                    }
                    (_, true) => ErrorMode::None,
                    _ => ErrorMode::Bias,
                };
            }
            SweepAxis::Dec => {
                c.decoherence.dec = value;
                if value == 0.0 {
                    c.decoherence.method = DecoherenceMethod::None;
                } else if c.decoherence.method == DecoherenceMethod::None {
                    c.decoherence.method = DecoherenceMethod::Decay;
                }
            }
        }
        c
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigma" => Ok(SweepAxis::Sigma),
            "mu" => Ok(SweepAxis::Mu),
            "dec" => Ok(SweepAxis::Dec),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep axis `{other}`"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::Mu => "mu",
            SweepAxis::Dec => "dec",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub report: FidelityReport,
}

/// One benchmark per axis value, rows in input order. The reference run is
/// shared.
pub fn sweep_as<T: Scalar>(
    program: &CircuitProgram,
    cfg: &BenchConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one value".into(),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "sweep value {v} must be finite and non-negative"
        )));
    }
    let reference = reference_run::<T>(program, cfg.model, cfg.combine, cfg.seed)?;
    values
        .iter()
        .map(|&value| {
            let c = axis.apply(cfg, value);
            let results = run_trials(program, &reference, &c)?;
            Ok(SweepRow {
                axis,
                value,
                report: summarize(program, &reference, &c, &results)?,
            })
        })
        .collect()
}

pub fn sweep(
    program: &CircuitProgram,
    cfg: &BenchConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    sweep_as::<f64>(program, cfg, axis, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_f21_lookup, build_grover, GroverSpec, LookupSpec};
    use crate::gates::Gate;
    use crate::statespace::Register;
    use std::f64::consts::PI;

    fn small_program() -> CircuitProgram {
        let mut p = CircuitProgram::new("small", 3, vec![Register::new("A", 0, 3)]);
        p.gates = vec![
            Gate::superpose(0),
            Gate::CNot {
                control: 0,
                target: 1,
            },
            Gate::CCNot {
                controls: [0, 1],
                target: 2,
            },
            Gate::Fourier(2),
            Gate::ReflectZero {
                qubits: vec![0, 2],
                ancilla: 1,
            },
        ];
        p
    }

    #[test]
    fn fidelity_examples() {
        let a = QuantumState::<f64>::new(ModelKind::ThreeState, 2, 1).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = QuantumState::<f64>::new(ModelKind::ThreeState, 2, 2).unwrap();
        assert_eq!(fidelity(&b, &a).unwrap(), 0.0);
        let mut c = a.clone();
        c.scale(0.9);
        assert!((fidelity(&c, &a).unwrap() - 0.81).abs() < 1e-15);
        let d = QuantumState::<f64>::new(ModelKind::TwoState, 2, 1).unwrap();
        assert!(fidelity(&d, &a).is_err());
    }

    #[test]
    fn statistics_helpers() {
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        assert_eq!(standard_error(&[0.5]), 0.0);
        assert!((standard_error(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn error_free_runs_have_unit_fidelity() {
        for model in [ModelKind::ThreeState, ModelKind::TwoState] {
            let r =
                run_benchmark(&small_program(), &BenchConfig::new(model).with_trials(3)).unwrap();
            assert_eq!(r.trials, 3);
            for f in &r.fidelities {
                assert!((f - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bias_is_deterministic_and_lossy() {
        let p = build_f21_lookup(LookupSpec {
            input_bits: 3,
            x: 2,
            n: 7,
        })
        .unwrap();
        let cfg = BenchConfig::new(ModelKind::TwoState)
            .with_errors(ErrorConfig::bias(PI / 1024.0))
            .with_trials(3);
        let r = run_benchmark(&p, &cfg).unwrap();
        assert!(r.mean_fidelity < 1.0);
        assert!(r.fidelities.iter().all(|&f| f == r.fidelities[0]));
    }

    #[test]
    fn reports_are_reproducible_for_any_worker_count() {
        let p = small_program();
        let cfg = BenchConfig::new(ModelKind::ThreeState)
            .with_errors(ErrorConfig::noise(PI / 64.0))
            .with_decoherence(DecoherenceConfig::spon_emit(0.05))
            .with_trials(6)
            .with_seed(42);
        let a = run_benchmark(&p, &cfg).unwrap();
        let b = run_benchmark(&p, &cfg.with_jobs(3)).unwrap();
        assert_eq!(a, b);
        let c = run_benchmark(&p, &cfg.with_seed(43)).unwrap();
        assert_ne!(a.fidelities, c.fidelities);
    }

    #[test]
    fn decay_reports_survival_norm() {
        let cfg = BenchConfig::new(ModelKind::TwoState)
            .with_decoherence(DecoherenceConfig::decay(0.1))
            .with_trials(1);
        let r = run_benchmark(&small_program(), &cfg).unwrap();
        assert!(r.survival_norm < 1.0);
        assert!(r.mean_fidelity <= r.survival_norm + 1e-12);
    }

    #[test]
    fn success_probability_is_reported_for_targets() {
        let p = build_grover(GroverSpec::new(2, 3)).unwrap();
        let r = run_benchmark(&p, &BenchConfig::new(ModelKind::TwoState).with_trials(1)).unwrap();
        assert!((r.success_probability.unwrap() - 1.0).abs() < 1e-9);
        assert!((r.reference_success_probability.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn omega_preconditions_and_zero_magnitudes() {
        let p = small_program();
        let cfg = BenchConfig::new(ModelKind::ThreeState);
        assert!(matches!(
            estimate_omega(&p, &cfg),
            Err(Error::Precondition(_))
        ));
        let cfg = cfg
            .with_errors(ErrorConfig::both(0.0, 0.0))
            .with_decoherence(DecoherenceConfig::decay(0.0));
        let om = estimate_omega(&p, &cfg).unwrap();
        assert!(om.omega.abs() < 1e-12, "{om:?}");
        assert!((om.f_both - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_rows_follow_input_order() {
        let p = small_program();
        let cfg = BenchConfig::new(ModelKind::TwoState).with_trials(2);
        let rows = sweep(&p, &cfg, SweepAxis::Dec, &[0.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].report.mean_fidelity - 1.0).abs() < 1e-10);
        let rows = sweep(&p, &cfg, SweepAxis::Sigma, &[0.0, PI / 1024.0, PI / 16.0]).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.value).collect::<Vec<_>>(),
            vec![0.0, PI / 1024.0, PI / 16.0]
        );
        assert!((rows[0].report.mean_fidelity - 1.0).abs() < 1e-10);
        assert!(rows[2].report.mean_fidelity < rows[1].report.mean_fidelity);
        assert!(sweep(&p, &cfg, SweepAxis::Mu, &[]).is_err());
        assert!(sweep(&p, &cfg, SweepAxis::Mu, &[-1.0]).is_err());
    }

    #[test]
    fn axis_application() {
        let base = BenchConfig::new(ModelKind::TwoState);
        let c = SweepAxis::Sigma.apply(&base, 0.1);
        assert_eq!(c.errors.mode, ErrorMode::Noise);
        let c = SweepAxis::Mu.apply(&c, 0.2);
        assert_eq!(c.errors.mode, ErrorMode::Both);
        let c = SweepAxis::Dec.apply(
            &base.with_decoherence(DecoherenceConfig::spon_emit(0.0)),
            1e-3,
        );
        assert_eq!(c.decoherence.method, DecoherenceMethod::SponEmit);
        assert_eq!(
            SweepAxis::Dec.apply(&base, 0.0).decoherence.method,
            DecoherenceMethod::None
        );
        assert_eq!(SweepAxis::Dec.default_values().len(), 9);
        assert_eq!(SweepAxis::Sigma.default_values().len(), 7);
    }

    #[test]
    fn single_precision_tracks_double() {
        let p = small_program();
        let cfg = BenchConfig::new(ModelKind::ThreeState)
            .with_errors(ErrorConfig::noise(0.05))
            .with_trials(2);
        let a = run_benchmark_as::<f64>(&p, &cfg).unwrap();
        let b = run_benchmark_as::<f32>(&p, &cfg).unwrap();
        assert!((a.mean_fidelity - b.mean_fidelity).abs() < 1e-5);
    }
}
