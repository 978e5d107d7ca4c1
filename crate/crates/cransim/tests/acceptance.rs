//! Acceptance gate: one test per release criterion, each printing a single
//! `ACCEPTANCE <nn> <name>: PASS/FAIL — <details>` line (visible with
//! `cargo test --test acceptance -- --nocapture`). Criteria marked FAIL in
//! the line also fail the test; they are bugs or documented model limits,
//! never silently relaxed checks.

mod common;

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::iter::{IntoParallelIterator, ParallelIterator};

use cransim::analysis::{
    capacity_bounds, estimate_ric, exact_support_covariance, interference_covariance,
    noise_concentration_bound, sum_capacity_exact_support, LogBase,
};
use cransim::compression::{
    compress, generate_compression_matrices, quantize, QuantizerConfig,
};
use cransim::harness::{emit_results, parse_config, run_experiment, ResultRow};
use cransim::pipeline::{simulate_trial, LambdaRule, TrialConfig};
use cransim::recovery::{recover_sparse, solve_basis_pursuit};
use cransim::rng::{SeedTree, COMPRESSION_STREAM, NOISE_STREAM};
use cransim::scenario::ScenarioConfig;
use cransim::C64;

fn report(name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion '{name}' failed: {detail}");
}

fn desk_trial(seed: u64) -> TrialConfig {
    TrialConfig {
        scenario: ScenarioConfig {
            num_rrh: 8,
            users_per_carrier: 8,
            num_subcarriers: 8,
            num_active: 4,
            transmit_snr: 100.0, // 20 dB
            cell_radius: 2000.0,
            pathloss_exponent: 2.5,
            master_seed: seed,
        },
        measurements_per_rrh: 6,
        quantizer: QuantizerConfig::disabled(),
        lambda: LambdaRule::NoiseScaled,
        noise_enabled: true,
    }
}

fn workspace_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn rows_for<'a>(rows: &'a [ResultRow], scheme: &str) -> Vec<&'a ResultRow> {
    rows.iter().filter(|r| r.scheme == scheme).collect()
}

/// Adjacent-point monotonicity up to one confidence half-width.
fn non_decreasing_within_ci(points: &[&ResultRow]) -> (bool, String) {
    let mut ok = true;
    let mut worst = 0.0f64;
    for pair in points.windows(2) {
        let slack = pair[0].ci.max(pair[1].ci);
        let drop = pair[0].mean_tput - pair[1].mean_tput;
        if drop > slack {
            ok = false;
        }
        worst = worst.max(drop - slack);
    }
    let detail = points
        .iter()
        .map(|r| format!("{}→{:.3}±{:.3}", r.sweep_value, r.mean_tput, r.ci))
        .collect::<Vec<_>>()
        .join(", ");
    (
        ok,
        format!("curve [{detail}], worst CI-adjusted drop {worst:.4}"),
    )
}

// ---------------------------------------------------------------------------

/// The first-order ℓ1 solver agrees with an independent interior-point
/// oracle on 50 small random instances (relative objective 1e-5).
#[test]
fn c01_l1_solver_matches_convex_oracle() {
    // (K, N_c, M, R, s) with K·N_c ≤ 16, M·R ≤ 12, s ≤ 2.
    let shapes = [
        (2usize, 3usize, 2usize, 3usize, 1usize),
        (4, 4, 3, 4, 2),
        (2, 8, 2, 6, 2),
        (3, 4, 4, 3, 1),
        (2, 5, 3, 4, 2),
    ];
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    for (si, &(k, nc, m, r, s)) in shapes.iter().enumerate() {
        for t in 0..10u64 {
            let cfg = TrialConfig {
                scenario: ScenarioConfig {
                    num_rrh: m,
                    users_per_carrier: k,
                    num_subcarriers: nc,
                    num_active: s,
                    transmit_snr: 100.0,
                    cell_radius: 2000.0,
                    pathloss_exponent: 2.5,
                    master_seed: 9000 + (si as u64) * 100 + t,
                },
                measurements_per_rrh: r,
                quantizer: QuantizerConfig::disabled(),
                lambda: LambdaRule::NoiseScaled,
                noise_enabled: true,
            };
            let sys = simulate_trial(&cfg, &SeedTree::new(cfg.scenario.master_seed)).unwrap();
            let ms = &sys.measurement;
            let (_, stats) = solve_basis_pursuit(&ms.theta, &ms.z, ms.lambda).unwrap();
            let (oracle_obj, _) = common::socp_min_l1(&ms.theta, &ms.z, ms.lambda);
            let rel = (stats.objective - oracle_obj).abs() / oracle_obj.max(1.0);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }
    report(
        "01 l1-solver-matches-convex-oracle",
        checked == 50 && max_rel <= 1e-5,
        &format!("{checked} instances, max relative objective deviation {max_rel:.2e}"),
    );
}

/// Compressed-noise concentration: the closed-form lower bound on
/// Pr(‖ñ‖ ≤ λ) holds empirically over 10⁵ draws at λ = √(2·N_c).
#[test]
fn c02_compressed_noise_concentration() {
    let (m, r, nc) = (8usize, 6usize, 8usize);
    let lambda = (2.0 * nc as f64).sqrt(); // = 4
    let bound = noise_concentration_bound(lambda, nc, m).unwrap();
    let reference = 1.0 - (-2.0f64).exp();
    assert!(
        (bound - reference).abs() <= 1e-12,
        "closed form must equal 1 - e^-2"
    );

    let n_draws = 100_000usize;
    let seeds = SeedTree::new(20_260_825);
    let inside: usize = (0..n_draws)
        .into_par_iter()
        .map(|t| {
            let tree = seeds.trial(0, t);
            let mats = generate_compression_matrices(
                m,
                r,
                nc,
                &mut tree.stream(COMPRESSION_STREAM),
            )
            .unwrap();
            let mut noise_rng = tree.stream(NOISE_STREAM);
            let mut total = 0.0f64;
            for mat in &mats {
                let n_i = cransim::scenario::circular_gaussian_vector(nc, &mut noise_rng);
                total += compress(mat, &n_i).unwrap().norm_squared();
            }
            usize::from(total.sqrt() <= lambda)
        })
        .sum();
    let fraction = inside as f64 / n_draws as f64;
    report(
        "02 compressed-noise-concentration",
        fraction >= bound,
        &format!("empirical Pr(‖n‖≤{lambda}) = {fraction:.4} ≥ bound {bound:.4}"),
    );
}

/// When the estimated support equals the truth, the final zero-forcing
/// error obeys ‖x̂ − x‖ ≤ ‖n‖ / σ_min(Θ_T) — a deterministic inequality,
/// checked per-trial with no statistical slack.
#[test]
fn c03_zero_forcing_error_within_noise_over_sigma_min() {
    let n_trials = 500usize;
    let results: Vec<(bool, bool, f64)> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let cfg = desk_trial(3000);
            let sys = simulate_trial(&cfg, &SeedTree::new(3000).trial(0, t)).unwrap();
            let ms = &sys.measurement;
            match recover_sparse(ms, Some(&sys.signal.support)) {
                Err(_) => (false, false, 0.0),
                Ok(res) => {
                    if res.detection_correct != Some(true) {
                        (true, false, 0.0)
                    } else {
                        let n_eff = (&ms.z - &ms.theta * &sys.signal.x).norm();
                        let bound = n_eff / res.zf_sigma_min;
                        let err = (&res.x_final - &sys.signal.x).norm();
                        (true, true, err / bound)
                    }
                }
            }
        })
        .collect();
    let valid = results.iter().filter(|r| r.0).count();
    let exact: Vec<f64> = results
        .iter()
        .filter(|r| r.1)
        .map(|r| r.2)
        .collect();
    let violations = exact
        .iter()
        .filter(|&&ratio| ratio > 1.0 + 1e-10)
        .count();
    let max_ratio = exact.iter().cloned().fold(0.0f64, f64::max);
    report(
        "03 zero-forcing-error-within-noise-over-sigma-min",
        violations == 0 && !exact.is_empty(),
        &format!(
            "{} valid trials, {} with exact detection, {violations} violations, \
             max error/bound ratio {max_ratio:.4}",
            valid,
            exact.len()
        ),
    );
}

/// The genie receiver's mean sum rate stays below the closed-form capacity
/// upper bound (within 3 Monte Carlo standard errors) at full compression.
#[test]
fn c04_genie_rate_below_capacity_upper_bound() {
    let n_trials = 2000usize;
    let mut cfg = desk_trial(4000);
    cfg.measurements_per_rrh = 8; // α = 1
    let rates: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let sys = simulate_trial(&cfg, &SeedTree::new(4000).trial(0, t)).unwrap();
            let ms = &sys.measurement;
            sum_capacity_exact_support(
                &ms.theta,
                &sys.signal.support,
                sys.signal.power,
                &ms.a_gram(),
                LogBase::Bits,
            )
            .unwrap()
            .sum_rate
        })
        .collect();
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let (_, upper) = capacity_bounds(4, 8, 1.0, 100.0, 0.0, 1.0, LogBase::Bits).unwrap();
    assert!((upper - 4.0 * (801.0f64).log2()).abs() <= 1e-9);
    report(
        "04 genie-rate-below-capacity-upper-bound",
        mean <= upper + 3.0 * se,
        &format!("mean sum rate {mean:.3} vs upper {upper:.3} (3·SE = {:.3})", 3.0 * se),
    );
}

/// Small-scale isometry: with 4 RRHs and full per-RRH sampling of 12 users,
/// the exhaustive order-2 deviation should fall below √2 − 1 in ≥ 90% of
/// draws for the ℓ1 recovery guarantee to bind at this scale.
#[test]
fn c05_small_scale_isometry_deviation() {
    let n_draws = 100usize;
    let threshold = std::f64::consts::SQRT_2 - 1.0;
    let mut deltas: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|t| {
            let cfg = TrialConfig {
                scenario: ScenarioConfig {
                    num_rrh: 4,
                    users_per_carrier: 3,
                    num_subcarriers: 4,
                    num_active: 0,
                    transmit_snr: 1.0,
                    cell_radius: 2000.0,
                    pathloss_exponent: 2.5,
                    master_seed: 5000,
                },
                measurements_per_rrh: 4, // R = N_c
                quantizer: QuantizerConfig::disabled(),
                lambda: LambdaRule::Fixed(0.0),
                noise_enabled: false,
            };
            let sys = simulate_trial(&cfg, &SeedTree::new(5000).trial(0, t)).unwrap();
            estimate_ric(&sys.measurement.theta, 2).unwrap().delta
        })
        .collect();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let below = deltas.iter().filter(|&&d| d < threshold).count();
    let fraction = below as f64 / n_draws as f64;
    let median = deltas[n_draws / 2];
    report(
        "05 small-scale-isometry-deviation",
        fraction >= 0.90,
        &format!(
            "fraction with δ̂ < {threshold:.4}: {fraction:.2} (median δ̂ = {median:.3}); \
             the recovery guarantee's deviation hypothesis does not concentrate at 4 RRHs"
        ),
    );
}

/// The general interference covariance with a correct support equals the
/// exact-support shortcut to 1e-8 relative Frobenius on 100 instances.
#[test]
fn c06_interference_covariance_identity() {
    let max_rel = (0..100usize)
        .into_par_iter()
        .map(|t| {
            let cfg = desk_trial(6000);
            let sys = simulate_trial(&cfg, &SeedTree::new(6000).trial(0, t)).unwrap();
            let ms = &sys.measurement;
            let a_gram = ms.a_gram();
            let sup = &sys.signal.support;
            let general =
                interference_covariance(&ms.theta, sup, sup, 100.0, &a_gram).unwrap();
            let exact = exact_support_covariance(&ms.theta, sup, &a_gram).unwrap();
            (&general - &exact).norm() / exact.norm().max(1e-300)
        })
        .reduce(|| 0.0, f64::max);
    report(
        "06 interference-covariance-identity",
        max_rel <= 1e-8,
        &format!("max relative Frobenius deviation {max_rel:.2e} over 100 instances"),
    );
}

/// Fronthaul sweep: proposed throughput is non-decreasing in the bit budget
/// (up to one CI half-width) and meets the genie curve at the largest
/// budget.
#[test]
fn c07_throughput_rises_with_fronthaul_budget() {
    let cfg = parse_config(&workspace_config("fig_bits.toml")).unwrap();
    let out = run_experiment(&cfg).unwrap();
    let proposed = rows_for(&out.rows, "proposed");
    let genie = rows_for(&out.rows, "genie_zf");
    let (monotone, curve) = non_decreasing_within_ci(&proposed);
    let last_p = proposed.last().unwrap();
    let last_g = genie.last().unwrap();
    let gap = (last_g.mean_tput - last_p.mean_tput).abs();
    let close = gap <= last_p.ci + last_g.ci;
    report(
        "07 throughput-rises-with-fronthaul-budget",
        monotone && close,
        &format!(
            "{curve}; at B={} gap to genie {gap:.4} vs CI sum {:.4}",
            last_p.sweep_value,
            last_p.ci + last_g.ci
        ),
    );
}

/// SNR sweep: proposed throughput is non-decreasing in transmit power and
/// meets the genie curve at 30 dB.
#[test]
fn c08_throughput_rises_with_snr() {
    let cfg = parse_config(&workspace_config("fig_snr.toml")).unwrap();
    let out = run_experiment(&cfg).unwrap();
    let proposed = rows_for(&out.rows, "proposed");
    let genie = rows_for(&out.rows, "genie_zf");
    let (monotone, curve) = non_decreasing_within_ci(&proposed);
    let last_p = proposed.last().unwrap();
    let last_g = genie.last().unwrap();
    let gap = (last_g.mean_tput - last_p.mean_tput).abs();
    let close = gap <= last_p.ci + last_g.ci;
    report(
        "08 throughput-rises-with-snr",
        monotone && close,
        &format!(
            "{curve}; at {} dB gap to genie {gap:.4} vs CI sum {:.4}",
            last_p.sweep_value,
            last_p.ci + last_g.ci
        ),
    );
}

/// Sparsity sweep: at the smallest activity level the proposed scheme is
/// CI-close to the genie and detection is nearly perfect.
#[test]
fn c09_small_sparsity_detection_and_genie_proximity() {
    let cfg = parse_config(&workspace_config("fig_active.toml")).unwrap();
    let out = run_experiment(&cfg).unwrap();
    let proposed = rows_for(&out.rows, "proposed");
    let genie = rows_for(&out.rows, "genie_zf");
    let first_p = proposed.first().unwrap();
    let first_g = genie.first().unwrap();
    let gap = (first_g.mean_tput - first_p.mean_tput).abs();
    let close = gap <= first_p.ci + first_g.ci;
    let detection = first_p.detection_rate.unwrap_or(0.0);
    report(
        "09 small-sparsity-detection-and-genie-proximity",
        close && detection >= 0.95,
        &format!(
            "s={}: gap to genie {gap:.4} vs CI sum {:.4}, detection rate {detection:.3}",
            first_p.sweep_value,
            first_p.ci + first_g.ci
        ),
    );
}

/// Mean relative quantization error scales as 2^(−b/2): the log₂-error
/// slope over b ∈ {6, 8, 10, 12, 14} is −0.5 ± 0.1 per bit.
#[test]
fn c10_quantizer_error_halves_per_two_bits() {
    let n_trials = 200usize;
    let systems: Vec<DVector<C64>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let cfg = desk_trial(10_000);
            simulate_trial(&cfg, &SeedTree::new(10_000).trial(0, t))
                .unwrap()
                .measurement
                .z
        })
        .collect();
    let bits: Vec<u32> = vec![6, 8, 10, 12, 14];
    let mut log_means = Vec::new();
    for &b in &bits {
        let qc = QuantizerConfig::new(b).unwrap();
        let mean_rel: f64 = systems
            .iter()
            .map(|z| quantize(z, &qc).error_norm / z.norm())
            .sum::<f64>()
            / n_trials as f64;
        log_means.push(mean_rel.log2());
    }
    // Least-squares slope of log2(error) against b.
    let n = bits.len() as f64;
    let bx: f64 = bits.iter().map(|&b| b as f64).sum::<f64>() / n;
    let by: f64 = log_means.iter().sum::<f64>() / n;
    let num: f64 = bits
        .iter()
        .zip(&log_means)
        .map(|(&b, &y)| (b as f64 - bx) * (y - by))
        .sum();
    let den: f64 = bits.iter().map(|&b| (b as f64 - bx).powi(2)).sum();
    let slope = num / den;
    report(
        "10 quantizer-error-halves-per-two-bits",
        (-0.6..=-0.4).contains(&slope),
        &format!("fitted slope {slope:.4} per bit (target −0.5 ± 0.1)"),
    );
}

/// Re-running a checked-in configuration reproduces byte-identical output
/// files apart from wall-clock columns.
#[test]
fn c11_rerun_reproduces_identical_outputs() {
    let cfg = parse_config(&workspace_config("smoke.toml")).unwrap();
    let base = std::env::temp_dir().join(format!("cransim-accept-{}", std::process::id()));
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    for dir in [&dir_a, &dir_b] {
        let out = run_experiment(&cfg).unwrap();
        emit_results(&out, &cfg, dir).unwrap();
    }
    let strip_wall = |text: &str| -> String {
        text.lines()
            .map(|line| match line.rsplit_once(',') {
                Some((head, _wall)) => head.to_string(),
                None => line.to_string(),
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let read = |p: &Path| std::fs::read_to_string(p).unwrap();
    let results_equal = strip_wall(&read(&dir_a.join("results.csv")))
        == strip_wall(&read(&dir_b.join("results.csv")));
    let bounds_equal = read(&dir_a.join("bounds.csv")) == read(&dir_b.join("bounds.csv"));
    let meta_equal =
        read(&dir_a.join("metadata.json")) == read(&dir_b.join("metadata.json"));
    report(
        "11 rerun-reproduces-identical-outputs",
        results_equal && bounds_equal && meta_equal,
        &format!(
            "results.csv (sans wall_ms) identical: {results_equal}, bounds.csv identical: \
             {bounds_equal}, metadata.json identical: {meta_equal}"
        ),
    );
}
