//! Experiment harness: TOML-configured sweeps over fronthaul budget, SNR,
//! sparsity, or compression, evaluated over paired Monte Carlo trials for
//! several receiver schemes, with CSV/JSON emission and a small CLI.
//!
//! Determinism contract: every trial is seeded as
//! `SeedTree::new(master_seed).trial(point_index, trial_index)`, and all
//! schemes of a trial consume one shared realization. Results are therefore
//! bit-reproducible across runs and thread counts, and adding or removing a
//! scheme never changes the numbers of the remaining ones.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::iter::{IntoParallelIterator, ParallelIterator};
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::analysis::{
    capacity_bounds, detection_probability_bound, linear_receiver_sum_rate,
    rip_probability_floor, sum_capacity, sum_capacity_exact_support, LogBase,
};
use crate::compression::QuantizerConfig;
use crate::pipeline::{simulate_trial, LambdaRule, TrialConfig, TrialSystem};
use crate::recovery::{mmse_joint, mmse_separate, omp_zf, recover_sparse};
use crate::rng::SeedTree;
use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

/// Receiver schemes the harness can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// ℓ1 rough estimate → greedy detection → zero-forcing.
    Proposed,
    /// Linear MMSE on the aggregate compressed measurement.
    MmseJoint,
    /// Per-RRH association MMSE on uncompressed signals.
    MmseSeparate,
    /// Orthogonal matching pursuit with zero-forcing refinement.
    OmpZf,
    /// Zero-forcing on the true support (detection genie).
    GenieZf,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::MmseJoint,
        Scheme::MmseSeparate,
        Scheme::OmpZf,
        Scheme::GenieZf,
    ];

    /// Stable label used in configs and result files.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::MmseJoint => "mmse_joint",
            Scheme::MmseSeparate => "mmse_separate",
            Scheme::OmpZf => "omp_zf",
            Scheme::GenieZf => "genie_zf",
        }
    }

    pub fn parse(label: &str) -> Result<Scheme> {
        Scheme::ALL
            .into_iter()
            .find(|s| s.label() == label)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scheme '{label}' (known: {})",
                    Scheme::ALL.map(Scheme::label).join(", ")
                ))
            })
    }
}

/// Quantity swept across the experiment's x-axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVariable {
    /// Fronthaul bits per RRH and channel use, `B = R·b` at fixed `b`.
    FronthaulBits,
    /// Per-user transmit SNR in dB.
    TransmitSnrDb,
    /// Number of active users `s`.
    NumActive,
    /// Compressed measurements per RRH `R`.
    MeasurementsPerRrh,
}

impl SweepVariable {
    fn parse(label: &str) -> Result<SweepVariable> {
        match label {
            "fronthaul_bits" => Ok(SweepVariable::FronthaulBits),
            "transmit_snr_db" => Ok(SweepVariable::TransmitSnrDb),
            "num_active" => Ok(SweepVariable::NumActive),
            "measurements_per_rrh" => Ok(SweepVariable::MeasurementsPerRrh),
            other => Err(Error::Config(format!(
                "unknown sweep variable '{other}' (known: fronthaul_bits, \
                 transmit_snr_db, num_active, measurements_per_rrh)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration file schema
// ---------------------------------------------------------------------------

fn default_cell_radius() -> f64 {
    2000.0
}
fn default_pathloss_exponent() -> f64 {
    2.5
}
fn default_true() -> bool {
    true
}
fn default_schemes() -> Vec<String> {
    Scheme::ALL.map(|s| s.label().to_string()).to_vec()
}
fn default_overlay_delta() -> f64 {
    0.2
}
fn default_output_dir() -> String {
    "results".to_string()
}

/// `[scenario]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub num_rrh: usize,
    pub users_per_carrier: usize,
    pub num_subcarriers: usize,
    pub num_active: usize,
    /// Per-user transmit SNR in dB over unit receiver noise.
    pub transmit_snr_db: f64,
    #[serde(default = "default_cell_radius")]
    pub cell_radius: f64,
    #[serde(default = "default_pathloss_exponent")]
    pub pathloss_exponent: f64,
    pub master_seed: u64,
}

/// `[compression]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionSection {
    pub measurements_per_rrh: usize,
    /// Bits per complex fronthaul sample; 0 disables quantization.
    pub quantizer_bits: u32,
}

/// `[recovery]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySection {
    /// One of `noise_scaled`, `fixed`, `adaptive_high_snr`.
    pub lambda_rule: String,
    /// Radius for the `fixed` rule.
    #[serde(default)]
    pub lambda_value: Option<f64>,
    /// Assumed isometry deviation for the `adaptive_high_snr` rule.
    #[serde(default)]
    pub adaptive_delta: Option<f64>,
    /// Simulate receiver noise (disable only for calibration studies).
    #[serde(default = "default_true")]
    pub noise_enabled: bool,
}

/// `[sweep]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// See [`SweepVariable`] for the accepted names.
    pub variable: String,
    pub values: Vec<f64>,
    pub n_trials: usize,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
}

/// `[overlays]` section: closed-form bound curves next to the Monte Carlo
/// results.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlaySection {
    pub enabled: bool,
    /// Assumed isometry deviation for the bound evaluators.
    pub delta: f64,
    /// Weakest-user power for the detection bound (defaults to `P`).
    pub p_min: Option<f64>,
}

impl Default for OverlaySection {
    fn default() -> Self {
        OverlaySection {
            enabled: false,
            delta: default_overlay_delta(),
            p_min: None,
        }
    }
}

/// `[output]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub log_base: LogBase,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_output_dir(),
            log_base: LogBase::Bits,
        }
    }
}

/// Top-level experiment configuration (one structured file per experiment).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must be 1.
    pub schema_version: u32,
    pub scenario: ScenarioSection,
    pub compression: CompressionSection,
    pub recovery: RecoverySection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub overlays: OverlaySection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parse and structurally validate a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
    if cfg.schema_version != 1 {
        return Err(Error::Config(format!(
            "unsupported schema_version {} (expected 1)",
            cfg.schema_version
        )));
    }
    if cfg.sweep.values.is_empty() {
        return Err(Error::Config("sweep.values must not be empty".into()));
    }
    if cfg.sweep.n_trials == 0 {
        return Err(Error::Config("sweep.n_trials must be at least 1".into()));
    }
    if cfg.sweep.schemes.is_empty() {
        return Err(Error::Config("sweep.schemes must not be empty".into()));
    }
    Ok(cfg)
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn integral_value(v: f64, what: &str) -> Result<usize> {
    if !(v >= 0.0) || v.fract() != 0.0 || v > usize::MAX as f64 {
        return Err(Error::Config(format!(
            "{what} sweep values must be non-negative integers (got {v})"
        )));
    }
    Ok(v as usize)
}

fn lambda_rule(section: &RecoverySection) -> Result<LambdaRule> {
    match section.lambda_rule.as_str() {
        "noise_scaled" => Ok(LambdaRule::NoiseScaled),
        "fixed" => {
            let v = section.lambda_value.ok_or_else(|| {
                Error::Config("lambda_rule = \"fixed\" requires lambda_value".into())
            })?;
            Ok(LambdaRule::Fixed(v))
        }
        "adaptive_high_snr" => {
            let delta = section.adaptive_delta.ok_or_else(|| {
                Error::Config(
                    "lambda_rule = \"adaptive_high_snr\" requires adaptive_delta".into(),
                )
            })?;
            Ok(LambdaRule::AdaptiveHighSnr { delta })
        }
        other => Err(Error::Config(format!(
            "unknown lambda_rule '{other}' (known: noise_scaled, fixed, adaptive_high_snr)"
        ))),
    }
}

/// One resolved sweep point.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    /// Raw x-axis value from the config.
    pub value: f64,
    /// Fully resolved per-trial configuration at this point.
    pub trial: TrialConfig,
}

/// Expand the sweep into per-point trial configurations, validating each.
pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let variable = SweepVariable::parse(&cfg.sweep.variable)?;
    let sc = &cfg.scenario;
    let base = TrialConfig {
        scenario: ScenarioConfig {
            num_rrh: sc.num_rrh,
            users_per_carrier: sc.users_per_carrier,
            num_subcarriers: sc.num_subcarriers,
            num_active: sc.num_active,
            transmit_snr: db_to_linear(sc.transmit_snr_db),
            cell_radius: sc.cell_radius,
            pathloss_exponent: sc.pathloss_exponent,
            master_seed: sc.master_seed,
        },
        measurements_per_rrh: cfg.compression.measurements_per_rrh,
        quantizer: if cfg.compression.quantizer_bits == 0 {
            QuantizerConfig::disabled()
        } else {
            QuantizerConfig::new(cfg.compression.quantizer_bits)?
        },
        lambda: lambda_rule(&cfg.recovery)?,
        noise_enabled: cfg.recovery.noise_enabled,
    };

    let mut points = Vec::with_capacity(cfg.sweep.values.len());
    for &value in &cfg.sweep.values {
        let mut trial = base.clone();
        match variable {
            SweepVariable::FronthaulBits => {
                let bits = cfg.compression.quantizer_bits;
                if bits == 0 {
                    return Err(Error::Config(
                        "a fronthaul_bits sweep requires quantizer_bits > 0".into(),
                    ));
                }
                let budget = integral_value(value, "fronthaul_bits")? as u32;
                if budget == 0 || budget % bits != 0 {
                    return Err(Error::Config(format!(
                        "fronthaul budget {budget} is not a positive multiple of \
                         quantizer_bits = {bits}"
                    )));
                }
                trial.measurements_per_rrh = (budget / bits) as usize;
            }
            SweepVariable::TransmitSnrDb => {
                trial.scenario.transmit_snr = db_to_linear(value);
            }
            SweepVariable::NumActive => {
                trial.scenario.num_active = integral_value(value, "num_active")?;
            }
            SweepVariable::MeasurementsPerRrh => {
                trial.measurements_per_rrh =
                    integral_value(value, "measurements_per_rrh")?;
            }
        }
        trial.validate()?;
        points.push(SweepPoint { value, trial });
    }
    Ok(points)
}

// ---------------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------------

/// One aggregated CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub scheme: String,
    /// Mean per-active-user throughput over valid trials.
    pub mean_tput: f64,
    /// Student-t 95% half-width of the mean (0 with fewer than two samples).
    pub ci: f64,
    /// Exact-detection fraction; `None` for schemes without a support
    /// decision and for sweep points with no detection verdicts.
    pub detection_rate: Option<f64>,
    /// Trials that produced no usable sample for this scheme.
    pub invalid: usize,
    /// Wall-clock milliseconds spent on this sweep point (shared by all of
    /// the point's rows).
    pub wall_ms: u128,
}

/// Per-point resolved parameters echoed into the metadata and overlays.
#[derive(Clone, Debug, Serialize)]
pub struct PointInfo {
    pub sweep_value: f64,
    pub measurements_per_rrh: usize,
    pub quantizer_bits: u32,
    pub num_active: usize,
    pub transmit_snr: f64,
    pub lambda: f64,
}

/// Full experiment output prior to emission.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub points: Vec<PointInfo>,
}

struct SchemeSample {
    tput: f64,
    detection: Option<bool>,
}

fn per_active(sum_rate: f64, num_active: usize) -> f64 {
    if num_active == 0 {
        0.0
    } else {
        sum_rate / num_active as f64
    }
}

fn eval_scheme(scheme: Scheme, sys: &TrialSystem, base: LogBase) -> Option<SchemeSample> {
    let ms = &sys.measurement;
    let p = sys.signal.power;
    let support = &sys.signal.support;
    let s = support.len();
    match scheme {
        Scheme::Proposed => {
            let res = recover_sparse(ms, Some(support)).ok()?;
            let rep =
                sum_capacity(&ms.theta, support, &res.support_est, p, &ms.a_gram(), base).ok()?;
            Some(SchemeSample {
                tput: per_active(rep.sum_rate, s),
                detection: res.detection_correct,
            })
        }
        Scheme::OmpZf => {
            let res = omp_zf(ms, Some(support)).ok()?;
            let rep =
                sum_capacity(&ms.theta, support, &res.support_est, p, &ms.a_gram(), base).ok()?;
            Some(SchemeSample {
                tput: per_active(rep.sum_rate, s),
                detection: res.detection_correct,
            })
        }
        Scheme::GenieZf => {
            let rep =
                sum_capacity_exact_support(&ms.theta, support, p, &ms.a_gram(), base).ok()?;
            Some(SchemeSample {
                tput: per_active(rep.sum_rate, s),
                detection: if s == 0 { None } else { Some(true) },
            })
        }
        Scheme::MmseJoint => {
            let sol = mmse_joint(&ms.theta, &ms.z, p, &ms.a_gram()).ok()?;
            let rate = linear_receiver_sum_rate(
                &sol.receiver,
                &ms.theta,
                support,
                p,
                &ms.a_gram(),
                base,
            )
            .ok()?;
            Some(SchemeSample {
                tput: per_active(rate, s),
                detection: None,
            })
        }
        Scheme::MmseSeparate => {
            let sol = mmse_separate(&sys.channel, &sys.received, p).ok()?;
            let stacked = sys.channel.stacked();
            let eye = nalgebra::DMatrix::identity(stacked.nrows(), stacked.nrows());
            let rate =
                linear_receiver_sum_rate(&sol.receiver, &stacked, support, p, &eye, base).ok()?;
            Some(SchemeSample {
                tput: per_active(rate, s),
                detection: None,
            })
        }
    }
}

fn student_t_975(df: usize) -> f64 {
    statrs::distribution::StudentsT::new(0.0, 1.0, df as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975)
}

fn aggregate(samples: &[Option<SchemeSample>]) -> (f64, f64, Option<f64>, usize) {
    let mut vals = Vec::with_capacity(samples.len());
    let mut invalid = 0usize;
    let mut det_total = 0usize;
    let mut det_correct = 0usize;
    for s in samples {
        match s {
            None => invalid += 1,
            Some(x) => {
                vals.push(x.tput);
                if let Some(flag) = x.detection {
                    det_total += 1;
                    if flag {
                        det_correct += 1;
                    }
                }
            }
        }
    }
    let n = vals.len();
    let mean = if n == 0 {
        0.0
    } else {
        vals.iter().sum::<f64>() / n as f64
    };
    let ci = if n >= 2 {
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        student_t_975(n - 1) * (var / n as f64).sqrt()
    } else {
        0.0
    };
    let detection = if det_total > 0 {
        Some(det_correct as f64 / det_total as f64)
    } else {
        None
    };
    (mean, ci, detection, invalid)
}

/// Run the full sweep: paired trials, per-scheme aggregation.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let schemes: Vec<Scheme> = cfg
        .sweep
        .schemes
        .iter()
        .map(|s| Scheme::parse(s))
        .collect::<Result<_>>()?;
    let points = sweep_points(cfg)?;
    let base = cfg.output.log_base;
    let seeds = SeedTree::new(cfg.scenario.master_seed);

    let mut rows = Vec::with_capacity(points.len() * schemes.len());
    let mut infos = Vec::with_capacity(points.len());
    for (pi, point) in points.iter().enumerate() {
        let started = Instant::now();
        let outcomes: Vec<Vec<Option<SchemeSample>>> = (0..cfg.sweep.n_trials)
            .into_par_iter()
            .map(|t| {
                let tree = seeds.trial(pi, t);
                match simulate_trial(&point.trial, &tree) {
                    Err(_) => schemes.iter().map(|_| None).collect(),
                    Ok(sys) => schemes
                        .iter()
                        .map(|&scheme| eval_scheme(scheme, &sys, base))
                        .collect(),
                }
            })
            .collect();
        let wall_ms = started.elapsed().as_millis();

        for (si, &scheme) in schemes.iter().enumerate() {
            let column: Vec<Option<SchemeSample>> = outcomes
                .iter()
                .map(|trial| {
                    trial[si]
                        .as_ref()
                        .map(|s| SchemeSample { tput: s.tput, detection: s.detection })
                })
                .collect();
            let (mean_tput, ci, detection_rate, invalid) = aggregate(&column);
            rows.push(ResultRow {
                sweep_value: point.value,
                scheme: scheme.label().to_string(),
                mean_tput,
                ci,
                detection_rate,
                invalid,
                wall_ms,
            });
        }
        infos.push(PointInfo {
            sweep_value: point.value,
            measurements_per_rrh: point.trial.measurements_per_rrh,
            quantizer_bits: if point.trial.quantizer.enabled {
                point.trial.quantizer.bits
            } else {
                0
            },
            num_active: point.trial.scenario.num_active,
            transmit_snr: point.trial.scenario.transmit_snr,
            lambda: point.trial.lambda_value()?,
        });
    }
    Ok(ExperimentOutput { rows, points: infos })
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write `results.csv`, `metadata.json`, and (if enabled) `bounds.csv`.
/// Returns one human-readable line per file written.
pub fn emit_results(
    output: &ExperimentOutput,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let csv_path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "sweep_value",
        "scheme",
        "mean_tput",
        "ci",
        "detection_rate",
        "invalid",
        "wall_ms",
    ])?;
    for row in &output.rows {
        w.write_record([
            fmt_f64(row.sweep_value),
            row.scheme.clone(),
            fmt_f64(row.mean_tput),
            fmt_f64(row.ci),
            row.detection_rate.map(fmt_f64).unwrap_or_default(),
            row.invalid.to_string(),
            row.wall_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))?;
    written.push(format!(
        "wrote {} ({} rows)",
        csv_path.display(),
        output.rows.len()
    ));

    let meta_path = dir.join("metadata.json");
    let metadata = serde_json::json!({
        "generator": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "config": cfg,
        "points": output.points,
        "result_rows": output.rows.len(),
    });
    std::fs::write(&meta_path, serde_json::to_string_pretty(&metadata)? + "\n")?;
    written.push(format!("wrote {}", meta_path.display()));

    if cfg.overlays.enabled {
        let bounds_path = dir.join("bounds.csv");
        let mut w = csv::Writer::from_path(&bounds_path)?;
        w.write_record([
            "sweep_value",
            "capacity_lower_per_active",
            "capacity_upper_per_active",
            "detection_bound",
        ])?;
        let delta = cfg.overlays.delta;
        for info in &output.points {
            let alpha = info.measurements_per_rrh as f64
                / cfg.scenario.num_subcarriers as f64;
            let users = cfg.scenario.users_per_carrier * cfg.scenario.num_subcarriers;
            let pr = rip_probability_floor(users).clamp(0.0, 1.0);
            let cap = capacity_bounds(
                info.num_active,
                cfg.scenario.num_rrh,
                alpha,
                info.transmit_snr,
                delta,
                pr,
                cfg.output.log_base,
            )
            .ok()
            .filter(|_| info.num_active > 0);
            let det = detection_probability_bound(
                info.num_active,
                cfg.scenario.num_rrh,
                cfg.scenario.num_subcarriers,
                info.lambda,
                delta,
                cfg.overlays.p_min.unwrap_or(info.transmit_snr),
                pr,
            )
            .ok();
            w.write_record([
                fmt_f64(info.sweep_value),
                cap.map(|(lo, _)| fmt_f64(lo / info.num_active as f64))
                    .unwrap_or_default(),
                cap.map(|(_, up)| fmt_f64(up / info.num_active as f64))
                    .unwrap_or_default(),
                det.map(|d| fmt_f64(d.clipped)).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))?;
        written.push(format!("wrote {}", bounds_path.display()));
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Command-line interface
// ---------------------------------------------------------------------------

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "cransim",
    version,
    about = "Distributed fronthaul compression and sparse-recovery simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a configured sweep experiment and write CSV/JSON results.
    Run(RunArgs),
    /// Parse and validate a configuration file without running it.
    Validate {
        /// Path to the experiment TOML.
        config: PathBuf,
    },
    /// Estimate the restricted-isometry deviation of one sensing-matrix draw.
    Ric(RicArgs),
    /// Evaluate the closed-form capacity (and optional detection) bounds.
    Bounds(BoundsArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Path to the experiment TOML.
    config: PathBuf,
    /// Output directory (precedence: this flag, then $CRANSIM_OUT_DIR, then
    /// the config's [output] dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the per-point trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct RicArgs {
    /// Total number of users K·N_c.
    #[arg(long)]
    kn: usize,
    /// Support order k to certify.
    #[arg(long)]
    k: usize,
    /// Number of RRHs M.
    #[arg(long)]
    rrh: usize,
    /// Compressed measurements per RRH R.
    #[arg(long)]
    measurements: usize,
    /// Users per subcarrier K.
    #[arg(long)]
    users_per_carrier: usize,
    /// Seed for the matrix draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sample this many random supports instead of exhaustive enumeration.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// Assumed isometry deviation δ.
    #[arg(long)]
    delta: f64,
    /// Isometry event probability.
    #[arg(long)]
    pr_rip: f64,
    /// Number of active users s.
    #[arg(long)]
    s: usize,
    /// Number of RRHs M.
    #[arg(long)]
    m: usize,
    /// Compression ratio α = R / N_c.
    #[arg(long)]
    alpha: f64,
    /// Per-user transmit SNR (linear).
    #[arg(long)]
    p: f64,
    /// Residual radius for the detection bound (needs --nc too).
    #[arg(long)]
    lambda: Option<f64>,
    /// Subcarrier count for the detection bound.
    #[arg(long)]
    nc: Option<usize>,
    /// Weakest active-user power (defaults to --p).
    #[arg(long)]
    pmin: Option<f64>,
    /// Rate unit: bits or nats.
    #[arg(long, default_value = "bits")]
    base: String,
}

fn parse_base(label: &str) -> Result<LogBase> {
    match label {
        "bits" => Ok(LogBase::Bits),
        "nats" => Ok(LogBase::Nats),
        other => Err(Error::Config(format!(
            "unknown rate unit '{other}' (known: bits, nats)"
        ))),
    }
}

fn run_command(args: &RunArgs) -> Result<String> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(Error::Config("--trials must be at least 1".into()));
        }
        cfg.sweep.n_trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.scenario.master_seed = seed;
    }
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("CRANSIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let output = run_experiment(&cfg)?;
    let written = emit_results(&output, &cfg, &out_dir)?;
    Ok(written.join("\n"))
}

fn validate_command(path: &Path) -> Result<String> {
    let cfg = parse_config(path)?;
    let points = sweep_points(&cfg)?;
    for s in &cfg.sweep.schemes {
        Scheme::parse(s)?;
    }
    Ok(format!(
        "configuration OK: {} sweep points x {} trials x {} schemes",
        points.len(),
        cfg.sweep.n_trials,
        cfg.sweep.schemes.len()
    ))
}

fn ric_command(args: &RicArgs) -> Result<String> {
    if args.users_per_carrier == 0 || args.kn % args.users_per_carrier != 0 {
        return Err(Error::Config(format!(
            "--kn ({}) must be a positive multiple of --users-per-carrier ({})",
            args.kn, args.users_per_carrier
        )));
    }
    let scenario = ScenarioConfig {
        num_rrh: args.rrh,
        users_per_carrier: args.users_per_carrier,
        num_subcarriers: args.kn / args.users_per_carrier,
        num_active: 0,
        transmit_snr: 1.0,
        cell_radius: default_cell_radius(),
        pathloss_exponent: default_pathloss_exponent(),
        master_seed: args.seed,
    };
    let trial = TrialConfig {
        scenario,
        measurements_per_rrh: args.measurements,
        quantizer: QuantizerConfig::disabled(),
        lambda: LambdaRule::NoiseScaled,
        noise_enabled: false,
    };
    let seeds = SeedTree::new(args.seed);
    let sys = simulate_trial(&trial, &seeds)?;
    let est = match args.samples {
        None => crate::analysis::estimate_ric(&sys.measurement.theta, args.k)?,
        Some(n) => crate::analysis::estimate_ric_sampled(
            &sys.measurement.theta,
            args.k,
            n,
            &mut seeds.stream("ric_sampling"),
        )?,
    };
    let threshold = crate::analysis::bp_ric_threshold();
    Ok(format!(
        "delta_hat = {}\nsupports_checked = {}\nexhaustive = {}\nl1_threshold = {}\nwithin_l1_regime = {}",
        est.delta,
        est.supports_checked,
        est.exhaustive,
        threshold,
        est.delta < threshold
    ))
}

fn bounds_command(args: &BoundsArgs) -> Result<String> {
    let base = parse_base(&args.base)?;
    let unit = match base {
        LogBase::Bits => "bits",
        LogBase::Nats => "nats",
    };
    let (lower, upper) =
        capacity_bounds(args.s, args.m, args.alpha, args.p, args.delta, args.pr_rip, base)?;
    let mut lines = vec![
        format!("capacity_lower_{unit} = {lower}"),
        format!("capacity_upper_{unit} = {upper}"),
    ];
    match (args.lambda, args.nc) {
        (Some(lambda), Some(nc)) => {
            let det = detection_probability_bound(
                args.s,
                args.m,
                nc,
                lambda,
                args.delta,
                args.pmin.unwrap_or(args.p),
                args.pr_rip,
            )?;
            lines.push(format!("detection_bound_raw = {}", det.raw));
            lines.push(format!("detection_bound = {}", det.clipped));
        }
        (None, None) => {}
        _ => {
            return Err(Error::Config(
                "the detection bound needs both --lambda and --nc".into(),
            ));
        }
    }
    Ok(lines.join("\n"))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::TooManySupports(_) => 1,
        _ => 2,
    }
}

/// Entry point shared by the binary and the integration tests. Returns the
/// process exit code: 0 on success, 1 for configuration/usage errors, 2 for
/// runtime failures.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run_command(args),
        Command::Validate { config } => validate_command(config),
        Command::Ric(args) => ric_command(args),
        Command::Bounds(args) => bounds_command(args),
    };
    match result {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
