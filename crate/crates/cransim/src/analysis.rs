//! Performance analysis: achievable-rate accounting, restricted-isometry
//! diagnostics, closed-form probability/capacity bounds, and Monte Carlo
//! detection statistics.
//!
//! Rate accounting follows a zero-forcing receive model on the detected
//! support: the effective noise-plus-interference power of stream `l` is
//! the `l`-th diagonal entry of
//!
//! ```text
//!   Ψ = Θ_T̂⁺ (P · Θ_{T∖T̂} Θ_{T∖T̂}ᴴ + A Aᴴ) (Θ_T̂⁺)ᴴ
//! ```
//!
//! which charges missed users as interference and the compressed receiver
//! noise through its exact covariance. When the detected support equals the
//! true one the middle factor collapses to `A Aᴴ` alone.

use nalgebra::DMatrix;
use rand::RngExt;
use rand_chacha::ChaCha12Rng;
use rayon::iter::{IntoParallelIterator, ParallelBridge, ParallelIterator};
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_spectral_norm, pseudo_inverse};
use crate::pipeline::{simulate_trial, TrialConfig};
use crate::recovery::recover_sparse;
use crate::rng::SeedTree;
use crate::{C64, Error, Result};

/// Largest support count the exhaustive isometry scan will enumerate.
pub const MAX_ENUMERATED_SUPPORTS: u128 = 1_000_000;

/// Two-sided 97.5% standard-normal quantile (95% interval coverage).
const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Logarithm base for rate quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    /// Rates in bits (log₂).
    #[default]
    Bits,
    /// Rates in nats (natural log).
    Nats,
}

impl LogBase {
    fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Bits => v.log2(),
            LogBase::Nats => v.ln(),
        }
    }
}

fn check_support(n: usize, support: &[usize], what: &str) -> Result<()> {
    for &j in support {
        if j >= n {
            return Err(Error::Dimension(format!(
                "{what} index {j} out of range (n = {n})"
            )));
        }
    }
    Ok(())
}

fn columns(theta: &DMatrix<C64>, idx: &[usize]) -> DMatrix<C64> {
    let cols: Vec<_> = idx.iter().map(|&j| theta.column(j)).collect();
    DMatrix::from_columns(&cols)
}

/// Effective noise-plus-interference covariance of the detected streams.
///
/// Missed users (`t_true ∖ t_hat`) enter at full transmit power; the
/// compressed receiver noise enters through `a_gram = A Aᴴ`. Returns an
/// empty matrix for an empty detected support.
pub fn interference_covariance(
    theta: &DMatrix<C64>,
    t_true: &[usize],
    t_hat: &[usize],
    p: f64,
    a_gram: &DMatrix<C64>,
) -> Result<DMatrix<C64>> {
    let m = theta.nrows();
    if a_gram.nrows() != m || a_gram.ncols() != m {
        return Err(Error::Dimension(
            "noise covariance must match the measurement dimension".into(),
        ));
    }
    check_support(theta.ncols(), t_true, "active support")?;
    check_support(theta.ncols(), t_hat, "detected support")?;
    if !(p >= 0.0) {
        return Err(Error::Domain("transmit power must be non-negative".into()));
    }
    if t_hat.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }

    let missed: Vec<usize> = t_true
        .iter()
        .copied()
        .filter(|j| !t_hat.contains(j))
        .collect();
    let mut mid = a_gram.clone();
    if !missed.is_empty() {
        let sub = columns(theta, &missed);
        mid += &sub * sub.adjoint() * C64::new(p, 0.0);
    }
    let pinv = pseudo_inverse(&columns(theta, t_hat)).matrix;
    Ok(&pinv * mid * pinv.adjoint())
}

/// Shortcut for a correctly detected support: `Ψ = Θ_T⁺ A Aᴴ (Θ_T⁺)ᴴ`.
pub fn exact_support_covariance(
    theta: &DMatrix<C64>,
    support: &[usize],
    a_gram: &DMatrix<C64>,
) -> Result<DMatrix<C64>> {
    let m = theta.nrows();
    if a_gram.nrows() != m || a_gram.ncols() != m {
        return Err(Error::Dimension(
            "noise covariance must match the measurement dimension".into(),
        ));
    }
    check_support(theta.ncols(), support, "support")?;
    if support.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let pinv = pseudo_inverse(&columns(theta, support)).matrix;
    Ok(&pinv * a_gram * pinv.adjoint())
}

/// Rate accounting for one detected stream.
#[derive(Clone, Debug)]
pub struct StreamRate {
    /// User index behind the stream.
    pub user: usize,
    /// Transmit power credited to the stream (0 for detected-but-inactive).
    pub power: f64,
    /// Effective noise-plus-interference power `α_l` (diagonal of `Ψ`).
    pub interference: f64,
    /// `log(1 + power / α_l)` in the chosen base.
    pub rate: f64,
}

/// Sum rate over the detected support with per-stream detail.
#[derive(Clone, Debug)]
pub struct CapacityReport {
    /// Sum of the per-stream rates.
    pub sum_rate: f64,
    /// One entry per detected stream in detected-support order.
    pub per_stream: Vec<StreamRate>,
    /// Streams whose effective noise power was degenerate (dropped from the
    /// sum; only possible for rank-deficient detected supports).
    pub dropped_streams: usize,
    /// Whether the detected support columns were linearly dependent.
    pub rank_deficient: bool,
}

fn capacity_from_covariance(
    t_true: &[usize],
    t_hat: &[usize],
    psi: &DMatrix<C64>,
    p: f64,
    rank_deficient: bool,
    base: LogBase,
) -> CapacityReport {
    let mut per_stream = Vec::with_capacity(t_hat.len());
    let mut sum_rate = 0.0;
    let mut dropped = 0usize;
    for (l, &user) in t_hat.iter().enumerate() {
        let alpha = psi[(l, l)].re;
        let power = if t_true.contains(&user) { p } else { 0.0 };
        let rate = if alpha.is_finite() && alpha > 1e-300 {
            base.log(1.0 + power / alpha)
        } else {
            dropped += 1;
            0.0
        };
        sum_rate += rate;
        per_stream.push(StreamRate {
            user,
            power,
            interference: alpha,
            rate,
        });
    }
    CapacityReport {
        sum_rate,
        per_stream,
        dropped_streams: dropped,
        rank_deficient,
    }
}

/// Sum rate of zero-forcing streams on a detected support, charging missed
/// users as interference.
pub fn sum_capacity(
    theta: &DMatrix<C64>,
    t_true: &[usize],
    t_hat: &[usize],
    p: f64,
    a_gram: &DMatrix<C64>,
    base: LogBase,
) -> Result<CapacityReport> {
    if t_hat.is_empty() {
        return Ok(CapacityReport {
            sum_rate: 0.0,
            per_stream: Vec::new(),
            dropped_streams: 0,
            rank_deficient: false,
        });
    }
    let psi = interference_covariance(theta, t_true, t_hat, p, a_gram)?;
    let rank_deficient = {
        let sub = columns(theta, t_hat);
        !pseudo_inverse(&sub).full_column_rank
    };
    Ok(capacity_from_covariance(
        t_true,
        t_hat,
        &psi,
        p,
        rank_deficient,
        base,
    ))
}

/// Sum rate when the support is known to be detected exactly.
pub fn sum_capacity_exact_support(
    theta: &DMatrix<C64>,
    support: &[usize],
    p: f64,
    a_gram: &DMatrix<C64>,
    base: LogBase,
) -> Result<CapacityReport> {
    if support.is_empty() {
        return Ok(CapacityReport {
            sum_rate: 0.0,
            per_stream: Vec::new(),
            dropped_streams: 0,
            rank_deficient: false,
        });
    }
    let psi = exact_support_covariance(theta, support, a_gram)?;
    let rank_deficient = {
        let sub = columns(theta, support);
        !pseudo_inverse(&sub).full_column_rank
    };
    Ok(capacity_from_covariance(
        support,
        support,
        &psi,
        p,
        rank_deficient,
        base,
    ))
}

/// Post-SINR sum rate of an arbitrary linear receiver `x̂ = W · obs` with
/// `obs = channel · x + noise`, crediting only the truly active streams.
///
/// Used for the linear (MMSE) baselines, whose estimates are not
/// zero-forcing projections and therefore need explicit per-stream SINRs:
/// signal `P·|w_l θ_l|²`, interference `P·Σ_{j ∈ T, j≠l} |w_l θ_j|²`, noise
/// `w_l Σ_n w_lᴴ` with `Σ_n = noise_gram`.
pub fn linear_receiver_sum_rate(
    receiver: &DMatrix<C64>,
    channel: &DMatrix<C64>,
    t_true: &[usize],
    p: f64,
    noise_gram: &DMatrix<C64>,
    base: LogBase,
) -> Result<f64> {
    if receiver.ncols() != channel.nrows()
        || noise_gram.nrows() != channel.nrows()
        || noise_gram.ncols() != channel.nrows()
    {
        return Err(Error::Dimension(
            "receiver, channel, and noise covariance dimensions disagree".into(),
        ));
    }
    check_support(receiver.nrows(), t_true, "active support")?;
    check_support(channel.ncols(), t_true, "active support")?;
    let mut sum = 0.0;
    for &l in t_true {
        let w = receiver.row(l);
        let gain = |j: usize| -> f64 {
            let mut acc = C64::new(0.0, 0.0);
            for (wi, ci) in w.iter().zip(channel.column(j).iter()) {
                acc += wi * ci;
            }
            acc.norm_sqr()
        };
        let signal = p * gain(l);
        let mut interference = 0.0;
        for &j in t_true {
            if j != l {
                interference += p * gain(j);
            }
        }
        let wn = (&w * noise_gram).adjoint();
        let noise = w
            .iter()
            .zip(wn.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
            .max(0.0);
        let denom = interference + noise;
        if signal > 0.0 && denom > 0.0 {
            sum += base.log(1.0 + signal / denom);
        }
    }
    Ok(sum)
}

/// Restricted-isometry deviation estimate.
#[derive(Clone, Debug)]
pub struct RicEstimate {
    /// Largest observed `‖Θ_Sᴴ Θ_S − I‖₂`.
    pub delta: f64,
    /// Whether every size-`k` support was enumerated (otherwise the value
    /// is a sampled lower bound).
    pub exhaustive: bool,
    /// Number of supports evaluated.
    pub supports_checked: usize,
}

/// `C(n, k)` with an enumeration cap; errors out instead of overflowing the
/// time budget.
fn binomial_capped(n: usize, k: usize, limit: u128) -> Result<u128> {
    let k_eff = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k_eff {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > limit {
            return Err(Error::TooManySupports(format!(
                "C({n}, {k}) exceeds the enumeration cap of {limit}; \
                 use the sampled estimator"
            )));
        }
    }
    Ok(c)
}

fn support_deviation(theta: &DMatrix<C64>, support: &[usize]) -> f64 {
    let k = support.len();
    let mut gram = DMatrix::<C64>::zeros(k, k);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            gram[(a, b)] = theta.column(i).dotc(&theta.column(j));
        }
        gram[(a, a)] -= C64::new(1.0, 0.0);
    }
    hermitian_spectral_norm(&gram)
}

/// Exhaustive restricted-isometry deviation of order `k`:
/// `max_{|S| = k} ‖Θ_Sᴴ Θ_S − I‖₂`.
///
/// Nested supports only shrink the extreme eigenvalues (eigenvalue
/// interlacing), so scanning exactly size-`k` supports covers all sizes up
/// to `k`. Enumeration beyond [`MAX_ENUMERATED_SUPPORTS`] supports is
/// rejected with [`Error::TooManySupports`].
pub fn estimate_ric(theta: &DMatrix<C64>, k: usize) -> Result<RicEstimate> {
    let n = theta.ncols();
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "isometry order must lie in 1..={n} (got {k})"
        )));
    }
    let count = binomial_capped(n, k, MAX_ENUMERATED_SUPPORTS)?;
    use itertools::Itertools;
    let delta = (0..n)
        .combinations(k)
        .par_bridge()
        .map(|support| support_deviation(theta, &support))
        .reduce(|| 0.0, f64::max);
    Ok(RicEstimate {
        delta,
        exhaustive: true,
        supports_checked: count as usize,
    })
}

/// Sampled lower bound on the order-`k` isometry deviation.
pub fn estimate_ric_sampled(
    theta: &DMatrix<C64>,
    k: usize,
    num_samples: usize,
    rng: &mut ChaCha12Rng,
) -> Result<RicEstimate> {
    let n = theta.ncols();
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "isometry order must lie in 1..={n} (got {k})"
        )));
    }
    if num_samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let mut delta = 0.0_f64;
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..num_samples {
        for i in 0..k {
            let j = rng.random_range(i..n);
            idx.swap(i, j);
        }
        delta = delta.max(support_deviation(theta, &idx[..k]));
    }
    Ok(RicEstimate {
        delta,
        exhaustive: false,
        supports_checked: num_samples,
    })
}

/// Exponent constant of the noise-concentration event:
/// `c₁ = (λ² − N_c) / (4 N_c)`.
pub fn c1_constant(lambda: f64, n_c: usize) -> Result<f64> {
    if n_c == 0 {
        return Err(Error::Domain("need at least one subcarrier".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain("lambda must be non-negative".into()));
    }
    Ok((lambda * lambda - n_c as f64) / (4.0 * n_c as f64))
}

/// Isometry-deviation threshold below which the ℓ1 error factor is finite.
pub fn bp_ric_threshold() -> f64 {
    std::f64::consts::SQRT_2 - 1.0
}

/// ℓ1 stability factor `c₂(δ) = 4√(1+δ) / (1 − (1+√2)δ)`.
///
/// Defined on `0 ≤ δ < √2 − 1`; within `1e-12` of the pole the factor is
/// reported as `+∞` rather than a meaninglessly large float.
pub fn c2_constant(delta: f64) -> Result<f64> {
    let threshold = bp_ric_threshold();
    if !(delta >= 0.0) || delta >= threshold {
        return Err(Error::Domain(format!(
            "isometry deviation must lie in [0, {threshold}) (got {delta})"
        )));
    }
    if delta > threshold - 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(4.0 * (1.0 + delta).sqrt() / (1.0 - (1.0 + std::f64::consts::SQRT_2) * delta))
}

/// Worst-case ℓ2 error of the ℓ1 stage: `c₂(δ) · λ`.
pub fn bp_error_bound(lambda: f64, delta: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain("lambda must be non-negative".into()));
    }
    let c2 = c2_constant(delta)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(c2 * lambda)
}

/// Probability that the aggregate compressed noise stays inside the
/// λ-ball: `1 − e^{−c₁ M}`, valid for `λ ≥ √(2 N_c)`.
pub fn noise_concentration_bound(lambda: f64, n_c: usize, num_rrh: usize) -> Result<f64> {
    let threshold = (2.0 * n_c as f64).sqrt();
    if lambda + 1e-12 < threshold {
        return Err(Error::Domain(format!(
            "concentration bound needs lambda >= sqrt(2 N_c) = {threshold} (got {lambda})"
        )));
    }
    if num_rrh == 0 {
        return Err(Error::Domain("need at least one RRH".into()));
    }
    let c1 = c1_constant(lambda, n_c)?;
    Ok(1.0 - (-c1 * num_rrh as f64).exp())
}

/// Closed-form lower bound on exact support detection, before and after
/// clipping to `[0, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct DetectionBound {
    /// Raw union-bound value; can be negative when the regime is out of the
    /// bound's useful range.
    pub raw: f64,
    /// `raw` clamped to a probability.
    pub clipped: f64,
}

/// Union-bound detection probability:
/// `pr_rip · (1 − e^{−c₁ M} − s · (1 − e^{−2 (c₂ λ)² / P_min}))`.
pub fn detection_probability_bound(
    num_active: usize,
    num_rrh: usize,
    n_c: usize,
    lambda: f64,
    delta: f64,
    p_min: f64,
    pr_rip: f64,
) -> Result<DetectionBound> {
    if !(0.0..=1.0).contains(&pr_rip) {
        return Err(Error::Domain("pr_rip must be a probability".into()));
    }
    if !(p_min > 0.0) {
        return Err(Error::Domain("P_min must be positive".into()));
    }
    let noise_ok = noise_concentration_bound(lambda, n_c, num_rrh)?;
    let err_bound = bp_error_bound(lambda, delta)?;
    let miss = if p_min.is_infinite() {
        0.0
    } else if err_bound.is_infinite() {
        1.0
    } else {
        1.0 - (-2.0 * err_bound * err_bound / p_min).exp()
    };
    let raw = pr_rip * (noise_ok - num_active as f64 * miss);
    Ok(DetectionBound {
        raw,
        clipped: raw.clamp(0.0, 1.0),
    })
}

/// Sum-capacity bracket at compression ratio `α = R / N_c`:
/// upper `s · log(1 + M α P)`, lower `pr_rip · s · log(1 + (1−δ) M α P)`.
pub fn capacity_bounds(
    num_active: usize,
    num_rrh: usize,
    alpha: f64,
    p: f64,
    delta: f64,
    pr_rip: f64,
    base: LogBase,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "compression ratio must lie in (0, 1] (got {alpha})"
        )));
    }
    if !(p > 0.0) {
        return Err(Error::Domain("transmit power must be positive".into()));
    }
    if !(0.0..=1.0).contains(&pr_rip) {
        return Err(Error::Domain("pr_rip must be a probability".into()));
    }
    if !(delta >= 0.0) || delta >= bp_ric_threshold() {
        return Err(Error::Domain(format!(
            "isometry deviation must lie in [0, {}) (got {delta})",
            bp_ric_threshold()
        )));
    }
    if num_rrh == 0 {
        return Err(Error::Domain("need at least one RRH".into()));
    }
    let s = num_active as f64;
    let m = num_rrh as f64;
    let upper = s * base.log(1.0 + m * alpha * p);
    let lower = pr_rip * s * base.log(1.0 + (1.0 - delta) * m * alpha * p);
    Ok((lower, upper))
}

/// Probability floor for the restricted-isometry event: `1 − 4 / (K·N_c)`.
/// Raw formula — negative for fewer than four users.
pub fn rip_probability_floor(num_users: usize) -> f64 {
    1.0 - 4.0 / num_users as f64
}

/// High-SNR residual radius `λ = (P · N_c / (4 c₂(δ)²))^{1/4}`, balancing
/// the noise-containment and user-miss exponents. Degenerates to 0 at the
/// isometry pole (where `c₂ = ∞`).
pub fn adaptive_lambda(p: f64, n_c: usize, delta: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain("transmit power must be positive".into()));
    }
    if n_c == 0 {
        return Err(Error::Domain("need at least one subcarrier".into()));
    }
    let c2 = c2_constant(delta)?;
    if c2.is_infinite() {
        return Ok(0.0);
    }
    Ok((p * n_c as f64 / (4.0 * c2 * c2)).powf(0.25))
}

/// Wilson 95% score interval for a binomial proportion; `(0, 1)` when no
/// valid trials exist.
pub fn wilson_interval(successes: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * ((p * (1.0 - p) + z2 / (4.0 * n)) / n).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo detection outcome counts.
#[derive(Clone, Debug)]
pub struct DetectionStats {
    /// Trials attempted.
    pub trials: usize,
    /// Trials that produced a usable detection verdict.
    pub valid: usize,
    /// Valid trials whose detected support matched exactly.
    pub correct: usize,
    /// Trials with an empty true support (reported separately, excluded
    /// from the fraction).
    pub zero_active: usize,
    /// Trials aborted by solver divergence or simulation errors.
    pub invalid: usize,
    /// `correct / valid` (0 when no valid trials).
    pub fraction: f64,
    /// Wilson 95% lower bound on the fraction.
    pub wilson_low: f64,
    /// Wilson 95% upper bound on the fraction.
    pub wilson_high: f64,
}

enum TrialVerdict {
    Correct,
    Wrong,
    ZeroActive,
    Invalid,
}

/// Monte Carlo estimate of the exact-detection probability under the full
/// simulate→recover pipeline, with deterministic per-trial seeding.
pub fn empirical_detection_probability(
    cfg: &TrialConfig,
    n_trials: usize,
) -> Result<DetectionStats> {
    cfg.validate()?;
    let seeds = SeedTree::new(cfg.scenario.master_seed);
    let verdicts: Vec<TrialVerdict> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let tree = seeds.trial(0, t);
            let run = simulate_trial(cfg, &tree)
                .and_then(|sys| recover_sparse(&sys.measurement, Some(&sys.signal.support)));
            match run {
                Ok(res) => match res.detection_correct {
                    Some(true) => TrialVerdict::Correct,
                    Some(false) => TrialVerdict::Wrong,
                    None => TrialVerdict::ZeroActive,
                },
                Err(_) => TrialVerdict::Invalid,
            }
        })
        .collect();

    let mut stats = DetectionStats {
        trials: n_trials,
        valid: 0,
        correct: 0,
        zero_active: 0,
        invalid: 0,
        fraction: 0.0,
        wilson_low: 0.0,
        wilson_high: 1.0,
    };
    for v in verdicts {
        match v {
            TrialVerdict::Correct => {
                stats.valid += 1;
                stats.correct += 1;
            }
            TrialVerdict::Wrong => stats.valid += 1,
            TrialVerdict::ZeroActive => stats.zero_active += 1,
            TrialVerdict::Invalid => stats.invalid += 1,
        }
    }
    if stats.valid > 0 {
        stats.fraction = stats.correct as f64 / stats.valid as f64;
    }
    let (lo, hi) = wilson_interval(stats.correct, stats.valid);
    stats.wilson_low = lo;
    stats.wilson_high = hi;
    Ok(stats)
}
