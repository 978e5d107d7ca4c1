//! End-to-end trial assembly: one draw of geometry, channel, signal, noise,
//! and compression, wired into the aggregate measurement model
//! `z = Θx + n_agg (+ quantization)`.
//!
//! Every random stage pulls from its own named substream of a [`SeedTree`],
//! so a trial is a pure function of `(config, seed tree)` — independent of
//! which receivers later consume it, of evaluation order, and of thread
//! scheduling.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::adaptive_lambda;
use crate::compression::{
    compress, generate_compression_matrices, quantize, QuantizerConfig,
};
use crate::recovery::{assemble_theta, MeasurementSystem};
use crate::rng::{
    SeedTree, CHANNEL_STREAM, COMPRESSION_STREAM, GEOMETRY_STREAM, NOISE_STREAM, SIGNAL_STREAM,
};
use crate::scenario::{
    generate_channel, generate_geometry, generate_signal, received_signals,
    received_signals_noiseless, ChannelRealization, Geometry, ScenarioConfig, SparseSignal,
};
use crate::{C64, Error, Result};

/// How the residual-ball radius λ is chosen for the ℓ1 stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ = √(2 N_c)`: twice the expected compressed-noise energy, the
    /// concentration-friendly default.
    NoiseScaled,
    /// Fixed user-supplied radius.
    Fixed(f64),
    /// High-SNR balance `λ = (P N_c / (4 c₂(δ)²))^{1/4}` for an assumed
    /// isometry deviation δ.
    AdaptiveHighSnr { delta: f64 },
}

/// Full description of one simulated trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    /// Network and signal model.
    pub scenario: ScenarioConfig,
    /// Compressed samples per RRH (`R`, with `1 ≤ R ≤ N_c`).
    pub measurements_per_rrh: usize,
    /// Fronthaul quantizer.
    pub quantizer: QuantizerConfig,
    /// Residual-radius rule for the ℓ1 stage.
    pub lambda: LambdaRule,
    /// Draw receiver noise (disable for noise-free calibration runs).
    pub noise_enabled: bool,
}

impl TrialConfig {
    /// Resolve the λ rule against this configuration.
    pub fn lambda_value(&self) -> Result<f64> {
        match self.lambda {
            LambdaRule::NoiseScaled => {
                Ok((2.0 * self.scenario.num_subcarriers as f64).sqrt())
            }
            LambdaRule::Fixed(v) => {
                if !(v >= 0.0) {
                    return Err(Error::Config(format!(
                        "fixed lambda must be non-negative (got {v})"
                    )));
                }
                Ok(v)
            }
            LambdaRule::AdaptiveHighSnr { delta } => adaptive_lambda(
                self.scenario.transmit_snr,
                self.scenario.num_subcarriers,
                delta,
            ),
        }
    }

    /// Validate the cross-module invariants.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.measurements_per_rrh == 0
            || self.measurements_per_rrh > self.scenario.num_subcarriers
        {
            return Err(Error::Config(format!(
                "measurements_per_rrh must lie in 1..={} (got {})",
                self.scenario.num_subcarriers, self.measurements_per_rrh
            )));
        }
        self.quantizer.validate()?;
        self.lambda_value()?;
        Ok(())
    }
}

/// One fully realized trial.
#[derive(Clone, Debug)]
pub struct TrialSystem {
    /// RRH and user placement.
    pub geometry: Geometry,
    /// Channel realization.
    pub channel: ChannelRealization,
    /// Sparse transmit signal and its support.
    pub signal: SparseSignal,
    /// Per-RRH received signals (noisy when noise is enabled).
    pub received: Vec<DVector<C64>>,
    /// Per-RRH receiver noise draws (zeros when noise is disabled).
    pub noise: Vec<DVector<C64>>,
    /// Aggregate compressed measurement system for the recovery stage.
    pub measurement: MeasurementSystem,
}

/// Draw one complete trial from the seed tree.
///
/// Stream usage is fixed: geometry, channel, signal, noise, and compression
/// each consume their own named substream, so adding consumers or skipping
/// stages (e.g. disabled noise) never shifts the other draws.
pub fn simulate_trial(cfg: &TrialConfig, seeds: &SeedTree) -> Result<TrialSystem> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let geometry = generate_geometry(sc, &mut seeds.stream(GEOMETRY_STREAM));
    let channel = generate_channel(sc, &geometry, &mut seeds.stream(CHANNEL_STREAM));
    let signal = generate_signal(sc, &mut seeds.stream(SIGNAL_STREAM));

    let (received, noise) = if cfg.noise_enabled {
        received_signals(&channel, &signal.x, &mut seeds.stream(NOISE_STREAM))
    } else {
        let clean = received_signals_noiseless(&channel, &signal.x);
        let zeros = vec![DVector::<C64>::zeros(sc.num_subcarriers); sc.num_rrh];
        (clean, zeros)
    };

    let mats = generate_compression_matrices(
        sc.num_rrh,
        cfg.measurements_per_rrh,
        sc.num_subcarriers,
        &mut seeds.stream(COMPRESSION_STREAM),
    )?;
    let theta = assemble_theta(&channel, &mats)?;

    let r = cfg.measurements_per_rrh;
    let mut z_raw = DVector::<C64>::zeros(sc.num_rrh * r);
    let mut noise_agg = DVector::<C64>::zeros(sc.num_rrh * r);
    for i in 0..sc.num_rrh {
        let zi = compress(&mats[i], &received[i])?;
        z_raw.rows_mut(i * r, r).copy_from(&zi);
        let ni = compress(&mats[i], &noise[i])?;
        noise_agg.rows_mut(i * r, r).copy_from(&ni);
    }

    let quantized = quantize(&z_raw, &cfg.quantizer);
    let lambda = cfg.lambda_value()?;

    Ok(TrialSystem {
        geometry,
        channel,
        signal,
        received,
        noise,
        measurement: MeasurementSystem {
            theta,
            z: quantized.values,
            compression: mats,
            noise: noise_agg,
            quantization_error_norm: quantized.error_norm,
            lambda,
        },
    })
}
