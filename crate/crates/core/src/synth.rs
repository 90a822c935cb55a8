//! Seeded synthetic data generators for tests, benchmarks and demos.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::{kernel_matrix, Features, ResidualDataset, Standardization};
use crate::ingest::{system_key, BenchmarkRecord, HardwareConfig};
use crate::month::MonthIndex;
use crate::suite::{Suite, SuiteDefinition};
use crate::trend::TrendModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` observations of `log y = trend(t) + N(0, sigma²)` at times uniform on `t_range`.
pub fn trend_sample<R: Rng>(trend: &TrendModel, sigma: f64, n: usize, t_range: (f64, f64), rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and nonnegative");
    (0..n)
        .map(|_| {
            let t = rng.random_range(t_range.0..=t_range.1);
            (t, trend.mean(t) + noise.sample(rng))
        })
        .unzip()
}

/// Micro ratios with log deviations `N(0, spread²)` recentred so their geometric mean
/// is exactly `score`.
pub fn micro_map<R: Rng>(def: &SuiteDefinition, score: f64, spread: f64, rng: &mut R) -> BTreeMap<String, f64> {
    let devs: Vec<f64> = def.micros.iter().map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect();
    let centre = devs.iter().sum::<f64>() / devs.len() as f64;
    def.micros
        .iter()
        .zip(devs)
        .map(|(name, d)| (name.clone(), score * (d - centre).exp()))
        .collect()
}

/// Draw `n` configurations with independent normal columns and residuals from a
/// zero-mean GP with the given hyperparameters on the standardized inputs.
pub fn gp_sample(theta: f64, tau2: f64, g: f64, n: usize, seed: u64) -> Result<ResidualDataset> {
    let mut rng = rng(seed);
    let x: Vec<Features> = (0..n)
        .map(|_| {
            [
                (8.0 + 4.0 * rng.sample::<f64, _>(StandardNormal)).max(1.0),
                3000.0 + 400.0 * rng.sample::<f64, _>(StandardNormal),
                32768.0 + 8192.0 * rng.sample::<f64, _>(StandardNormal),
                1.5 + 0.5 * rng.sample::<f64, _>(StandardNormal),
            ]
        })
        .collect();
    let s = Standardization::fit(&x)?;
    let z: Vec<Features> = x.iter().map(|r| s.apply(r)).collect();
    let chol = (kernel_matrix(&z, theta, g) * tau2)
        .cholesky()
        .ok_or_else(|| Error::Numerical("GP sample covariance not positive definite".into()))?;
    let e = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let y = chol.l() * e;
    Ok(ResidualDataset {
        x,
        y: y.iter().copied().collect(),
        dropped: 0,
    })
}

/// Settings for [`synthetic_records`].
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub per_suite: usize,
    /// Machines resubmitted under the next suite.
    pub overlap: usize,
    pub trend: TrendModel,
    pub noise_sd: f64,
    /// Multiplier turning a 2017-scale score into each suite's own scale.
    pub suite_scale: [f64; 4],
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            per_suite: 400,
            overlap: 40,
            trend: TrendModel::from_params(2.69, 0.25, -9.14),
            noise_sd: 0.3,
            suite_scale: [0.01, 0.1, 0.5, 1.0],
        }
    }
}

fn suite_window(suite: Suite) -> (u32, u32) {
    // inclusive month ranges
    match suite {
        Suite::Spec1995 => (0, 60),
        Suite::Spec2000 => (53, 150),
        Suite::Spec2006 => (137, 270),
        Suite::Spec2017 => (257, 330),
    }
}

fn hardware_at<R: Rng>(t: f64, rng: &mut R) -> HardwareConfig {
    let years = t / 12.0;
    let log2_cores = (years - 10.0).max(0.0) * 0.25 + rng.random_range(-0.5..1.5);
    let cores = 2f64.powf(log2_cores).round().max(1.0) as u32;
    let freq = (200.0 + 150.0 * years.min(12.0) + 60.0 * (years - 12.0).max(0.0)) * rng.random_range(0.8..1.2);
    let l3_kb = if years < 5.0 {
        None
    } else {
        Some((512.0 * f64::from(cores) * rng.random_range(1.0..3.0)).round())
    };
    HardwareConfig {
        cores: Some(cores),
        freq_mhz: Some(freq.round()),
        l3_kb,
        threads_per_core: Some(if rng.random_bool(0.5) { 2.0 } else { 1.0 }),
        auto_parallel: Some(rng.random_bool(0.3)),
        transistors: None,
    }
}

/// A dataset spanning all four suites whose normalized log scores follow `spec.trend`
/// plus noise, with full micro rosters and `overlap` machines shared between adjacent
/// suites.
pub fn synthetic_records(spec: &SynthSpec, seed: u64) -> Vec<BenchmarkRecord> {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, spec.noise_sd).expect("noise sd");
    let mut out = Vec::new();
    let mut carried: Vec<(String, String, String, HardwareConfig, f64)> = Vec::new();
    for suite in Suite::ALL {
        let def = SuiteDefinition::builtin(suite);
        let (lo, hi) = suite_window(suite);
        let scale = spec.suite_scale[suite.ordinal()];
        let mut next_carried = Vec::new();
        for i in 0..spec.per_suite {
            let date = MonthIndex(rng.random_range(lo..=hi));
            let (vendor, system, processor, hw, latent) = match carried.get(i) {
                Some(m) => m.clone(),
                None => {
                    let hw = hardware_at(date.as_f64(), &mut rng);
                    let latent = spec.trend.mean(date.as_f64()) + noise.sample(&mut rng);
                    (
                        format!("Vendor{}", i % 13),
                        format!("System {}-{i}", suite.year()),
                        format!("Proc {}", rng.random_range(0..50)),
                        hw,
                        latent,
                    )
                }
            };
            let score = (latent.exp() * scale * 1e6).round() / 1e6;
            let score = score.max(1e-6);
            if i >= carried.len() && next_carried.len() < spec.overlap {
                next_carried.push((vendor.clone(), system.clone(), processor.clone(), hw.clone(), latent));
            }
            out.push(BenchmarkRecord {
                record_id: format!("s{}-{i:05}", suite.year()),
                suite,
                date,
                system_id: system_key(&vendor, &system, &processor),
                vendor,
                system,
                processor,
                score_rate: hw.cores.map(|c| score * f64::from(c)),
                hw,
                score_speed: Some(score),
                micros: micro_map(&def, score, 0.2, &mut rng),
            });
        }
        carried = next_carried;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::compose_score;

    #[test]
    fn micro_map_composes_to_score() {
        let def = SuiteDefinition::builtin(Suite::Spec2006);
        let mut r = rng(1);
        let m = micro_map(&def, 42.0, 0.5, &mut r);
        assert_eq!(m.len(), def.p());
        assert!((compose_score(&m, &def).unwrap() / 42.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn records_are_deterministic_and_overlap() {
        let spec = SynthSpec {
            per_suite: 50,
            overlap: 10,
            ..SynthSpec::default()
        };
        let a = synthetic_records(&spec, 3);
        assert_eq!(a, synthetic_records(&spec, 3));
        assert_eq!(a.len(), 200);
        let ids = |s: Suite| -> std::collections::BTreeSet<String> {
            a.iter().filter(|r| r.suite == s).map(|r| r.system_id.clone()).collect()
        };
        let shared = ids(Suite::Spec2006).intersection(&ids(Suite::Spec2017)).count();
        assert_eq!(shared, 10);
    }
}
