//! Behavioral model of a tapped-delay-line TDC sensor.
//!
//! A launch edge propagates through `N` taps of delay `τ` after an initial
//! delay `D0`; the taps reached before the capture edge at `T_clk` read 1.
//! Supply disturbance scales the tap delay by `1 + α·δV`, which moves the
//! Hamming weight of the captured thermometer code away from `N/2`.

mod array;
mod detector;
mod trace;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use array::{write_samples, SensorArray, DEFAULT_ATTENUATION};
pub use detector::{detect, Alert, Detector, DetectorConfig};
pub use trace::{DisturbanceTrace, Preset, Pulse, SensorScope, TraceError};

/// Widest supported delay line (the raw code is a `u128`).
pub const MAX_TAPS: u32 = 128;

/// Sign of the delay change for a positive `δV`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Droop slows the taps, lowering the Hamming weight.
    #[default]
    DroopSlows,
    DroopSpeeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TdcConfig {
    pub taps: u32,
    pub tau_ps: f64,
    pub t_clk_ps: f64,
    /// Initial delay; zero until calibrated.
    pub d0_ps: f64,
    /// Fractional tap-delay change per millivolt.
    pub alpha_per_mv: f64,
    pub sigma_ps: f64,
    /// Sensor samples per core cycle.
    pub oversampling: u32,
    pub polarity: Polarity,
}

impl Default for TdcConfig {
    fn default() -> Self {
        TdcConfig {
            taps: 128,
            tau_ps: 25.0,
            t_clk_ps: 5000.0,
            d0_ps: 0.0,
            alpha_per_mv: 0.004,
            sigma_ps: 5.0,
            oversampling: 4,
            polarity: Polarity::DroopSlows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TdcError {
    #[error("invalid TDC configuration: {0}")]
    Config(String),
    #[error("calibration needs at least 100 samples, got {0}")]
    TooFewSamples(usize),
    #[error(
        "HW target {target} unreachable: at D0 -> 0 the line only reaches {max_mean:.2} taps (T_clk / tau too small)"
    )]
    Unreachable { target: u32, max_mean: f64 },
    #[error("calibration ended at mean HW {mean:.3}, outside [{lo}, {hi}]")]
    NotConverged { mean: f64, lo: u32, hi: u32 },
}

/// One sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdcSample {
    /// Core cycles, fractional under oversampling.
    pub t: f64,
    pub sensor: usize,
    /// Thermometer code, tap 0 in bit 0.
    pub raw: u128,
    pub hw: u32,
}

/// Thermometer code with the low `k` bits set.
pub fn thermometer(k: u32) -> u128 {
    match k {
        0 => 0,
        k if k >= 128 => u128::MAX,
        k => (1u128 << k) - 1,
    }
}

/// True when `raw` is a run of ones starting at bit 0 followed by zeros.
pub fn is_thermometer(raw: u128) -> bool {
    raw & raw.wrapping_add(1) == 0
}

impl TdcConfig {
    pub fn validate(&self) -> Result<(), TdcError> {
        let bad = |m: &str| Err(TdcError::Config(m.to_string()));
        if !(2..=MAX_TAPS).contains(&self.taps) {
            return bad("taps must be in 2..=128");
        }
        if !(self.tau_ps > 0.0 && self.t_clk_ps > 0.0) {
            return bad("tap delay and clock period must be positive");
        }
        if !(self.sigma_ps >= 0.0 && self.alpha_per_mv.is_finite()) {
            return bad("jitter must be non-negative and sensitivity finite");
        }
        if self.oversampling == 0 {
            return bad("oversampling must be at least 1");
        }
        Ok(())
    }

    pub fn is_calibrated(&self) -> bool {
        self.d0_ps > 0.0 && self.d0_ps < self.t_clk_ps
    }

    pub fn baseline(&self) -> u32 {
        self.taps / 2
    }

    /// Taps reached for a given jitter draw and disturbance.
    pub fn taps_reached(&self, dv_mv: f64, jitter_ps: f64) -> u32 {
        let sign = match self.polarity {
            Polarity::DroopSlows => 1.0,
            Polarity::DroopSpeeds => -1.0,
        };
        let denom = self.tau_ps * (1.0 + sign * self.alpha_per_mv * dv_mv);
        if denom <= 0.0 {
            return self.taps;
        }
        let k = ((self.t_clk_ps - self.d0_ps + jitter_ps) / denom).round();
        k.clamp(0.0, self.taps as f64) as u32
    }

    fn jitter(&self, rng: &mut impl Rng) -> f64 {
        if self.sigma_ps == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, self.sigma_ps).expect("sigma validated").sample(rng)
    }

    /// One reading at time `t` under disturbance `dv_mv`.
    pub fn sample(&self, t: f64, sensor: usize, dv_mv: f64, rng: &mut impl Rng) -> TdcSample {
        debug_assert!(self.is_calibrated(), "sampling an uncalibrated TDC");
        let hw = self.taps_reached(dv_mv, self.jitter(rng));
        TdcSample { t, sensor, raw: thermometer(hw), hw }
    }
}

/// Sets `D0` so that the mean Hamming weight of `samples` undisturbed
/// readings is `N/2`.
///
/// The mean weight is nonincreasing in `D0`. Bisection finds where it first
/// drops to `N/2` and where it drops below `N/2`, and `D0` is the midpoint.
/// All evaluations reuse one seeded jitter draw, so the result is exact and
/// deterministic for a seed.
pub fn calibrate(cfg: &TdcConfig, samples: usize, seed: u64) -> Result<TdcConfig, TdcError> {
    cfg.validate()?;
    if samples < 100 {
        return Err(TdcError::TooFewSamples(samples));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter: Vec<f64> = (0..samples).map(|_| cfg.jitter(&mut rng)).collect();
    let mean_hw = |d0: f64| {
        let c = TdcConfig { d0_ps: d0, ..*cfg };
        jitter.iter().map(|j| c.taps_reached(0.0, *j) as f64).sum::<f64>() / samples as f64
    };
    let target = cfg.baseline() as f64;
    let (lo_bound, hi_bound) = (f64::EPSILON * cfg.t_clk_ps, cfg.t_clk_ps * (1.0 - f64::EPSILON));
    let max_mean = mean_hw(lo_bound);
    if max_mean < target - 1.0 {
        return Err(TdcError::Unreachable { target: cfg.baseline(), max_mean });
    }
    // smallest d0 in range for which pred holds, pred monotone false -> true
    let edge = |pred: &dyn Fn(f64) -> bool| {
        let (mut lo, mut hi) = (lo_bound, hi_bound);
        if pred(lo) {
            return lo;
        }
        if !pred(hi) {
            return hi;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if pred(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let enter = edge(&|d| mean_hw(d) <= target);
    let leave = edge(&|d| mean_hw(d) < target);
    let d0 = 0.5 * (enter + leave);
    let mean = mean_hw(d0);
    let (lo, hi) = (cfg.baseline() - 1, cfg.baseline() + 1);
    if !(lo as f64..=hi as f64).contains(&mean) {
        return Err(TdcError::NotConverged { mean, lo, hi });
    }
    Ok(TdcConfig { d0_ps: d0, ..*cfg })
}

/// Mean Hamming weight over `n` undisturbed samples.
pub fn mean_hw(cfg: &TdcConfig, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| cfg.sample(i as f64, 0, 0.0, &mut rng).hw as f64).sum::<f64>() / n as f64
}
