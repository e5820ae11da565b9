//! Seeded synthetic utilization-like series for tests and demos.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::trace_model::TraceSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSpec {
    pub len: usize,
    /// Period in steps.
    pub period: f64,
    /// Phase offset of the second channel, radians.
    pub phase: f64,
    pub noise_sigma: f64,
    pub interval_seconds: i64,
}

impl Default for SineSpec {
    fn default() -> Self {
        SineSpec {
            len: 2000,
            period: 50.0,
            phase: std::f64::consts::FRAC_PI_2,
            noise_sigma: 0.02,
            interval_seconds: 300,
        }
    }
}

/// Three features: `cpu` (sine + noise), `mem` (phase-shifted sine + noise)
/// and `noise` (noise only). The target is `cpu`.
pub fn sine_series(spec: &SineSpec, seed: u64) -> Result<TraceSeries> {
    if spec.len == 0 || !(spec.period > 0.0) {
        return Err(Error::invalid("synthetic series needs a positive length and period"));
    }
    let normal = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::invalid(format!("noise sigma {}: {e}", spec.noise_sigma)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = std::f64::consts::TAU / spec.period;
    let rows = (0..spec.len)
        .map(|t| {
            let x = omega * t as f64;
            vec![
                x.sin() + normal.sample(&mut rng),
                (x + spec.phase).sin() + normal.sample(&mut rng),
                normal.sample(&mut rng),
            ]
        })
        .collect();
    TraceSeries::from_rows(
        spec.interval_seconds,
        vec!["cpu".into(), "mem".into(), "noise".into()],
        0,
        rows,
    )
}
