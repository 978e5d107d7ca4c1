//! Per-RRH random phase compression and fronthaul quantization.
//!
//! Each RRH applies its own `R × N_c` compression matrix `A_i` whose entries
//! all have magnitude `√(1/(M·R))` and i.i.d. uniform phases, so
//! `‖A_i‖_F² = N_c / M` and the aggregate compressed noise keeps expected
//! energy `N_c` regardless of `R`. The compressed samples are then quantized
//! with a uniform mid-rise quantizer at `b` bits per complex dimension
//! (`b/2` per real part), sharing a single clipping range across the whole
//! vector so the distortion model stays scalar.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{C64, Error, Result};

/// One RRH's compression matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressionMatrix {
    /// The `R × N_c` matrix `A_i`.
    pub a: DMatrix<C64>,
}

/// Uniform scalar quantizer settings for the fronthaul.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Bits per complex sample; split evenly between real and imaginary
    /// parts, so it must be even. `0` passes samples through unchanged.
    pub bits: u32,
    /// When false the quantizer is bypassed entirely.
    pub enabled: bool,
}

impl QuantizerConfig {
    /// Quantizer with `bits` per complex sample.
    pub fn new(bits: u32) -> Result<Self> {
        let cfg = QuantizerConfig {
            bits,
            enabled: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A disabled (pass-through) quantizer.
    pub fn disabled() -> Self {
        QuantizerConfig {
            bits: 0,
            enabled: false,
        }
    }

    /// Check the bit budget is usable (even, and small enough that the
    /// level index fits comfortably in an integer).
    pub fn validate(&self) -> Result<()> {
        if self.bits % 2 != 0 {
            return Err(Error::Config(format!(
                "quantizer bits must be even (got {})",
                self.bits
            )));
        }
        if self.bits > 60 {
            return Err(Error::Config(format!(
                "quantizer bits must be at most 60 (got {})",
                self.bits
            )));
        }
        Ok(())
    }

    fn is_passthrough(&self) -> bool {
        !self.enabled || self.bits == 0
    }
}

/// Result of quantizing one vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    /// Reconstructed (quantized) samples.
    pub values: DVector<C64>,
    /// Euclidean distortion `‖ẑ − z‖`.
    pub error_norm: f64,
    /// Clipping range actually used (0 for pass-through).
    pub range: f64,
}

/// Draw the `M` compression matrices.
///
/// Entry magnitudes are exactly `√(1/(M·R))`; phases are i.i.d. uniform,
/// drawn column-major within each matrix, matrices in RRH order.
pub fn generate_compression_matrices(
    num_rrh: usize,
    measurements_per_rrh: usize,
    num_subcarriers: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<CompressionMatrix>> {
    if num_rrh == 0 {
        return Err(Error::Config("need at least one RRH".into()));
    }
    if measurements_per_rrh == 0 || measurements_per_rrh > num_subcarriers {
        return Err(Error::Config(format!(
            "measurements_per_rrh must lie in 1..={} (got {})",
            num_subcarriers, measurements_per_rrh
        )));
    }
    let mag = (1.0 / (num_rrh as f64 * measurements_per_rrh as f64)).sqrt();
    let mut out = Vec::with_capacity(num_rrh);
    for _ in 0..num_rrh {
        let mut a = DMatrix::<C64>::zeros(measurements_per_rrh, num_subcarriers);
        for c in 0..num_subcarriers {
            for r in 0..measurements_per_rrh {
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                a[(r, c)] = C64::from_polar(mag, phase);
            }
        }
        out.push(CompressionMatrix { a });
    }
    Ok(out)
}

/// Apply one RRH's compression: `z_i = A_i y_i`.
pub fn compress(mat: &CompressionMatrix, y: &DVector<C64>) -> Result<DVector<C64>> {
    if mat.a.ncols() != y.len() {
        return Err(Error::Dimension(format!(
            "compression expects a length-{} input (got {})",
            mat.a.ncols(),
            y.len()
        )));
    }
    Ok(&mat.a * y)
}

/// Quantize a complex vector with a range of four RMS values.
///
/// The range is shared across all real and imaginary parts — a single
/// scalar calibration for the whole fronthaul word — so reconstruction
/// error concentrates near the uniform-quantizer figure `Δ/√12` per part.
/// All-zero inputs pass through untouched (the range would be degenerate).
pub fn quantize(z: &DVector<C64>, cfg: &QuantizerConfig) -> Quantized {
    if cfg.is_passthrough() || z.len() == 0 {
        return Quantized {
            values: z.clone(),
            error_norm: 0.0,
            range: 0.0,
        };
    }
    let rms = z.norm() / ((2 * z.len()) as f64).sqrt();
    if rms == 0.0 {
        return Quantized {
            values: z.clone(),
            error_norm: 0.0,
            range: 0.0,
        };
    }
    quantize_with_range(z, cfg.bits, 4.0 * rms)
}

/// Quantize with an explicit clipping range (idempotent for a fixed range).
pub fn quantize_with_range(z: &DVector<C64>, bits: u32, range: f64) -> Quantized {
    debug_assert!(bits % 2 == 0 && bits > 0 && bits <= 60);
    if !(range > 0.0) {
        return Quantized {
            values: z.clone(),
            error_norm: 0.0,
            range: 0.0,
        };
    }
    let levels = 1_i64 << (bits / 2);
    let step = 2.0 * range / levels as f64;
    let lo = -levels / 2;
    let hi = levels / 2 - 1;
    let quant_part = |v: f64| -> f64 {
        let idx = (v / step).floor();
        let idx = if idx.is_finite() { idx as i64 } else { 0 };
        let idx = idx.clamp(lo, hi);
        (idx as f64 + 0.5) * step
    };
    let values = DVector::<C64>::from_iterator(
        z.len(),
        z.iter().map(|v| C64::new(quant_part(v.re), quant_part(v.im))),
    );
    let error_norm = (&values - z).norm();
    Quantized {
        values,
        error_norm,
        range,
    }
}
