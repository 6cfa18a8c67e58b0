//! Argument handling, benchmark construction and result formatting for the
//! `ionsim` binary.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ionsim::analysis::{self, BenchConfig, FidelityReport, SweepAxis};
use ionsim::circuits::{
    build_f21_lookup, build_grover, build_modexp, grover_iteration_count, CircuitProgram,
    GroverSpec, LookupSpec, ModexpSpec, ModexpVariant,
};
use ionsim::errors::{DecoherenceConfig, DecoherenceMethod, ErrorConfig, ErrorMode};
use ionsim::gates::CombineMethod;
use ionsim::statespace::ModelKind;

pub const CSV_HEADER: &str = "benchmark,model,combine,axis,axis_value,trials,mean_fidelity,stderr_fidelity,survival_norm,seed,success_probability";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    F21,
    Grover,
    Mult,
    #[value(name = "f15_3bit")]
    #[serde(rename = "f15_3bit")]
    F153bit,
    #[value(name = "f15_long")]
    #[serde(rename = "f15_long")]
    F15Long,
    Custom,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Everything a run needs. Loaded from JSON with `--config`, then
/// overridden by explicit flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: Benchmark,
    /// Program file for the `custom` benchmark.
    pub program: Option<PathBuf>,
    pub model: ModelKind,
    pub combine: CombineMethod,
    pub err: ErrorMode,
    pub mu: f64,
    pub sigma: f64,
    pub dec: DecoherenceMethod,
    pub dec_rate: f64,
    pub trials: usize,
    pub seed: u64,
    /// Not echoed in JSON output, which must not depend on it.
    #[serde(skip_serializing)]
    pub jobs: usize,
    pub sweep: Option<SweepAxis>,
    pub values: Option<Vec<f64>>,
    pub keybits: usize,
    pub key: u64,
    pub iterations: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: Benchmark::F21,
            program: None,
            model: ModelKind::TwoState,
            combine: CombineMethod::Simple,
            err: ErrorMode::None,
            mu: 0.0,
            sigma: 0.0,
            dec: DecoherenceMethod::None,
            dec_rate: 0.0,
            trials: 4,
            seed: 0,
            jobs: 1,
            sweep: None,
            values: None,
            keybits: 2,
            key: 0,
            iterations: None,
            output: None,
            format: OutputFormat::Csv,
            precision: Precision::F64,
        }
    }
}

impl RunConfig {
    pub fn errors(&self) -> ErrorConfig {
        ErrorConfig {
            mode: self.err,
            mu: self.mu,
            sigma: self.sigma,
        }
    }

    pub fn decoherence(&self) -> DecoherenceConfig {
        DecoherenceConfig {
            method: self.dec,
            dec: self.dec_rate,
        }
    }

    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig::new(self.model)
            .with_errors(self.errors())
            .with_decoherence(self.decoherence())
            .with_combine(self.combine)
            .with_trials(self.trials)
            .with_seed(self.seed)
            .with_jobs(self.jobs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("--trials must be at least 1");
        }
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        self.errors().validate()?;
        self.decoherence().validate()?;
        if self.values.is_some() && self.sweep.is_none() {
            bail!("--values needs --sweep");
        }
        if let Some(values) = &self.values {
            if values.is_empty() {
                bail!("--values is empty");
            }
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                bail!("sweep value {v} must be finite and non-negative");
            }
        }
        if self.benchmark == Benchmark::Custom && self.program.is_none() {
            bail!("the custom benchmark needs --program <file>");
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ionsim",
    version,
    about = "Pulse-level trapped-ion quantum computer simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a benchmark (optionally swept over one axis) and write CSV or JSON.
    Run(RunArgs),
    /// Print the program text of a benchmark.
    Dump(RunArgs),
}

/// Flags mirror [`RunConfig`]; unset flags keep the config-file value.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// JSON file with a RunConfig; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub benchmark: Option<Benchmark>,
    /// Program text for the custom benchmark.
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// 2state or 3state.
    #[arg(long, value_parser = parse_from_str::<ModelKind>)]
    pub model: Option<ModelKind>,
    /// simple or mixed.
    #[arg(long, value_parser = parse_from_str::<CombineMethod>)]
    pub combine: Option<CombineMethod>,
    /// none, bias, noise or both.
    #[arg(long, value_parser = parse_from_str::<ErrorMode>)]
    pub err: Option<ErrorMode>,
    /// Bias mean in radians; accepts `pi/1024` style values.
    #[arg(long, value_parser = parse_angle)]
    pub mu: Option<f64>,
    /// Noise standard deviation in radians; accepts `pi/1024` style values.
    #[arg(long, value_parser = parse_angle)]
    pub sigma: Option<f64>,
    /// none, decay or spon_emit.
    #[arg(long, value_parser = parse_from_str::<DecoherenceMethod>)]
    pub dec: Option<DecoherenceMethod>,
    /// Per-pulse decay parameter
    #[arg(long)]
    pub dec_rate: Option<f64>,
    /// Error-injected runs per row
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// sigma, mu or dec.
    #[arg(long, value_parser = parse_from_str::<SweepAxis>)]
    pub sweep: Option<SweepAxis>,
    /// Comma-separated sweep values (defaults depend on the axis).
    #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
    pub values: Option<Vec<f64>>,
    /// Grover key width in qubits
    #[arg(long)]
    pub keybits: Option<usize>,
    /// Grover marked key
    #[arg(long)]
    pub key: Option<u64>,
    /// Grover rounds; defaults to the optimal count
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

fn parse_from_str<T>(s: &str) -> std::result::Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

/// A number, `pi`, `pi/D` or `K*pi`.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    if t == "pi" {
        return Ok(PI);
    }
    if let Some(d) = t.strip_prefix("pi/") {
        return Ok(PI / num(d)?);
    }
    if let Some(k) = t.strip_suffix("*pi") {
        return Ok(num(k)? * PI);
    }
    num(&t)
}

impl RunArgs {
    /// Config file (if any) with the explicit flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        overlay!(
            benchmark, model, combine, err, mu, sigma, dec, dec_rate, trials, seed, jobs, keybits,
            key, format, precision
        );
        if self.program.is_some() {
            c.program = self.program.clone();
        }
        if self.sweep.is_some() {
            c.sweep = self.sweep;
        }
        if self.values.is_some() {
            c.values = self.values.clone();
        }
        if self.iterations.is_some() {
            c.iterations = self.iterations;
        }
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn build_program(cfg: &RunConfig) -> Result<CircuitProgram> {
    Ok(match cfg.benchmark {
        Benchmark::F21 => build_f21_lookup(LookupSpec::default())?,
        Benchmark::Grover => {
            let iterations = cfg
                .iterations
                .unwrap_or_else(|| grover_iteration_count(1u64 << cfg.keybits.min(63), 1));
            build_grover(GroverSpec {
                key_bits: cfg.keybits,
                key: cfg.key,
                iterations,
            })?
        }
        Benchmark::Mult => build_modexp(ModexpSpec::f15(ModexpVariant::SingleMult))?,
        Benchmark::F153bit => build_modexp(ModexpSpec::f15(ModexpVariant::A3Bit))?,
        Benchmark::F15Long => build_modexp(ModexpSpec::f15(ModexpVariant::Full))?,
        Benchmark::Custom => {
            let path = cfg
                .program
                .as_deref()
                .context("the custom benchmark needs --program <file>")?;
            load_program(path)?
        }
    })
}

pub fn load_program(path: &Path) -> Result<CircuitProgram> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CircuitProgram::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One output row: a report plus the sweep coordinate that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub axis: Option<SweepAxis>,
    pub axis_value: Option<f64>,
    pub report: FidelityReport,
}

#[derive(Debug, Serialize)]
struct JsonOutput<'a> {
    config: &'a RunConfig,
    pulses: usize,
    num_qubits: usize,
    rows: &'a [ResultRow],
}

pub fn execute(cfg: &RunConfig, program: &CircuitProgram) -> Result<Vec<ResultRow>> {
    let bench = cfg.bench_config();
    match cfg.sweep {
        None => {
            let report = match cfg.precision {
                Precision::F64 => analysis::run_benchmark_as::<f64>(program, &bench)?,
                Precision::F32 => analysis::run_benchmark_as::<f32>(program, &bench)?,
            };
            Ok(vec![ResultRow {
                axis: None,
                axis_value: None,
                report,
            }])
        }
        Some(axis) => {
            let values = cfg.values.clone().unwrap_or_else(|| axis.default_values());
            let rows = match cfg.precision {
                Precision::F64 => analysis::sweep_as::<f64>(program, &bench, axis, &values)?,
                Precision::F32 => analysis::sweep_as::<f32>(program, &bench, axis, &values)?,
            };
            Ok(rows
                .into_iter()
                .map(|r| ResultRow {
                    axis: Some(r.axis),
                    axis_value: Some(r.value),
                    report: r.report,
                })
                .collect())
        }
    }
}

/// Fixed-point decimal with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 {
            "0".to_string()
        } else {
            x.to_string()
        };
    }
    // Exponent after rounding, so 0.9999999999999 counts as 1.
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let magnitude: i64 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn render_csv(cfg: &RunConfig, rows: &[ResultRow]) -> String {
    let sig = |x: f64| format_significant(x, 12);
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.benchmark,
            r.model,
            r.combine,
            row.axis.map_or("none".to_string(), |a| a.to_string()),
            row.axis_value.map(sig).unwrap_or_default(),
            r.trials,
            sig(r.mean_fidelity),
            sig(r.stderr_fidelity),
            sig(r.survival_norm),
            cfg.seed,
            r.success_probability.map(sig).unwrap_or_default(),
        );
    }
    out
}

pub fn render_json(
    cfg: &RunConfig,
    program: &CircuitProgram,
    rows: &[ResultRow],
) -> Result<String> {
    let doc = JsonOutput {
        config: cfg,
        pulses: program.pulse_count(),
        num_qubits: program.num_qubits,
        rows,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// Runs a resolved config and returns the rendered output.
pub fn run(cfg: &RunConfig) -> Result<String> {
    let program = build_program(cfg)?;
    let rows = execute(cfg, &program)?;
    match cfg.format {
        OutputFormat::Csv => Ok(render_csv(cfg, &rows)),
        OutputFormat::Json => render_json(cfg, &program, &rows),
    }
}

pub fn main_with(cli: Cli) -> Result<()> {
    let (args, dump) = match &cli.command {
        Command::Run(a) => (a, false),
        Command::Dump(a) => (a, true),
    };
    let cfg = args.resolve()?;
    let text = if dump {
        build_program(&cfg)?.dump()
    } else {
        run(&cfg)?
    };
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}
