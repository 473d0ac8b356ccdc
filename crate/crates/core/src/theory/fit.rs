use serde::{Deserialize, Serialize};

use super::{TheoryError, TheoryParams};
use crate::decoder::{Decoder, DecoderConfig};
use crate::dem::Dem;
use crate::sampler::Sampler;
use crate::stats::{mean_std, wilson, Z95};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeelMeasurement {
    pub n: usize,
    pub p: f64,
    pub rounds: usize,
    pub shots: u64,
    /// Shots whose syndrome peeling cleared completely.
    pub cleared: u64,
}

impl PeelMeasurement {
    pub fn rate(&self) -> f64 {
        self.cleared as f64 / self.shots as f64
    }
}

/// Samples `shots` syndromes and counts those peeling clears, using the
/// peel mode and predicate of `config`.
pub fn measure_peel_rate(dem: &Dem, n: usize, config: &DecoderConfig, shots: u64, seed: u64) -> PeelMeasurement {
    let mut dec = Decoder::new(dem, *config);
    let mut sampler = Sampler::new(dem, seed);
    let (mut triggered, mut syndrome) = (Vec::new(), Vec::new());
    let mut cleared = 0;
    for i in 0..shots {
        sampler.sample_into(i, &mut triggered, &mut syndrome);
        let stats = dec.peel_only(&syndrome).expect("sampled detectors are in range");
        cleared += (stats.residual_weight == 0) as u64;
    }
    PeelMeasurement {
        n,
        p: dem.provenance.p,
        rounds: dem.provenance.rounds,
        shots,
        cleared,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub measurement: PeelMeasurement,
    pub gamma_eff: f64,
    pub sigma: f64,
    pub gamma_analytic: f64,
    pub gamma_model: f64,
    pub a_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub points: Vec<GammaPoint>,
    /// Weighted R² of the density-corrected model against the measured γ_eff.
    pub r2: f64,
    /// Inverse-variance weighted mean of γ_eff/γ_analytic.
    pub a_eff: f64,
    pub a_eff_std: f64,
    pub a_eff_cv: f64,
}

/// Inverts each measurement to `γ_eff = −ln P̂ / (n p²)` and compares the set
/// against the model of the paired parameters.
pub fn fit_gamma_eff(points: &[(PeelMeasurement, &TheoryParams)]) -> Result<GammaFit, TheoryError> {
    if points.is_empty() {
        return Err(TheoryError::Invalid("no measurements".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    for (m, params) in points {
        let rate = m.rate();
        if !(rate > 0.0 && rate < 1.0) || m.p <= 0.0 {
            return Err(TheoryError::Invalid(format!("peel rate {rate} at p = {} is not in (0, 1)", m.p)));
        }
        let scale = m.n as f64 * m.p * m.p;
        let gamma_eff = -rate.ln() / scale;
        let (lo, hi) = wilson(m.cleared, m.shots, Z95);
        let g_hi = -lo.max(f64::MIN_POSITIVE).ln() / scale;
        let g_lo = -hi.min(1.0 - 1e-12).ln() / scale;
        let sigma = ((g_hi - g_lo) / (2.0 * Z95)).max(f64::EPSILON);
        let t_scale = (m.rounds as f64 / params.rounds.max(1) as f64).powi(2);
        let gamma_analytic = params.gamma_analytic * t_scale;
        out.push(GammaPoint {
            measurement: *m,
            gamma_eff,
            sigma,
            gamma_analytic,
            gamma_model: params.gamma_model(m.p, m.rounds),
            a_eff: gamma_eff / gamma_analytic,
        });
    }
    let weights: Vec<f64> = out.iter().map(|g| 1.0 / (g.sigma * g.sigma)).collect();
    let wsum: f64 = weights.iter().sum();
    let wmean = out.iter().zip(&weights).map(|(g, w)| g.gamma_eff * w).sum::<f64>() / wsum;
    let ss_res: f64 = out.iter().zip(&weights).map(|(g, w)| w * (g.gamma_eff - g.gamma_model).powi(2)).sum();
    let ss_tot: f64 = out.iter().zip(&weights).map(|(g, w)| w * (g.gamma_eff - wmean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    let a_eff = out.iter().zip(&weights).map(|(g, w)| g.a_eff * w).sum::<f64>() / wsum;
    let a_values: Vec<f64> = out.iter().map(|g| g.a_eff).collect();
    let (a_mean, a_std) = mean_std(&a_values);
    Ok(GammaFit {
        points: out,
        r2,
        a_eff,
        a_eff_std: a_std,
        a_eff_cv: a_std / a_mean,
    })
}
