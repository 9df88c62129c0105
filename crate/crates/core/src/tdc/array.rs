use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Alert, Detector, DetectorConfig, DisturbanceTrace, TdcConfig, TdcSample};

/// Fraction of a localized pulse's amplitude seen by the other sensors.
pub const DEFAULT_ATTENUATION: f64 = 0.2;

/// Identical calibrated sensors sharing one disturbance trace, each with
/// its own detector. Noise comes from one stream seeded by the trace.
#[derive(Debug, Clone)]
pub struct SensorArray {
    cfg: TdcConfig,
    attenuation: f64,
    trace: DisturbanceTrace,
    detectors: Vec<Detector>,
    rng: ChaCha8Rng,
}

impl SensorArray {
    pub fn new(cfg: TdcConfig, sensors: usize, attenuation: f64, trace: DisturbanceTrace, det: DetectorConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(trace.noise_seed);
        let detectors = (0..sensors).map(|_| Detector::new(det, cfg.baseline())).collect();
        SensorArray { cfg, attenuation, trace, detectors, rng }
    }

    pub fn config(&self) -> &TdcConfig {
        &self.cfg
    }

    pub fn sensors(&self) -> usize {
        self.detectors.len()
    }

    /// All readings taken during core cycle `cycle`, ordered by time then
    /// sensor.
    pub fn sample_cycle(&mut self, cycle: u64) -> Vec<TdcSample> {
        let os = self.cfg.oversampling;
        let mut out = Vec::with_capacity(os as usize * self.detectors.len());
        for k in 0..os {
            let t = cycle as f64 + k as f64 / os as f64;
            for sensor in 0..self.detectors.len() {
                let dv = self.trace.dv_at(t, sensor, self.attenuation);
                out.push(self.cfg.sample(t, sensor, dv, &mut self.rng));
            }
        }
        out
    }

    /// Samples cycle `cycle` and feeds the detectors.
    pub fn poll(&mut self, cycle: u64) -> (Vec<TdcSample>, Vec<Alert>) {
        let samples = self.sample_cycle(cycle);
        let alerts = samples.iter().filter_map(|s| self.detectors[s.sensor].push(s)).collect();
        (samples, alerts)
    }
}

/// Writes a sample dump as CSV `t,sensor,hw`.
pub fn write_samples(samples: &[TdcSample], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "sensor", "hw"])?;
    for s in samples {
        w.write_record([s.t.to_string(), s.sensor.to_string(), s.hw.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
