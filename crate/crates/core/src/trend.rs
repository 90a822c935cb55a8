//! Power-law mean trend of log benchmark score over time.
//!
//! The model is `log y = alpha * t^beta + gamma + e`, `e ~ N(0, sigma2)`, with `t` in
//! months since 1995-08. Parameters are fitted by Levenberg-Marquardt on the squared
//! error (the maximum-likelihood estimate under normal noise). Parameter covariance is
//! the Gauss-Newton approximation `sigma2 * (JᵀJ)⁻¹`, which feeds delta-method
//! variances and prediction intervals. `0^beta` is taken as 0, so the origin month
//! contributes `gamma` alone.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::MonthIndex;
use crate::normalize::NormalizedRecord;
use crate::stats;

pub const MIN_POINTS: usize = 10;
pub const MAX_ITERATIONS: usize = 500;
pub const REL_TOLERANCE: f64 = 1e-10;
const BETA_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendModel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    /// Row-major 3×3 covariance of (alpha, beta, gamma).
    pub cov: [f64; 9],
    pub t_origin: MonthIndex,
}

fn t_pow(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(beta)
    }
}

fn mean_fn(theta: &[f64; 3], t: f64) -> f64 {
    theta[0] * t_pow(t, theta[1]) + theta[2]
}

/// ∂f/∂(alpha, beta, gamma); the beta component is 0 at `t = 0`.
pub fn mean_gradient(theta: &[f64; 3], t: f64) -> [f64; 3] {
    if t == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    let p = t.powf(theta[1]);
    [p, theta[0] * p * t.ln(), 1.0]
}

impl TrendModel {
    /// A model with fixed parameters and no estimation uncertainty.
    pub fn from_params(alpha: f64, beta: f64, gamma: f64) -> Self {
        TrendModel {
            alpha,
            beta,
            gamma,
            sigma2: 0.0,
            cov: [0.0; 9],
            t_origin: MonthIndex::ORIGIN,
        }
    }

    pub fn theta(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn cov_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.cov)
    }

    pub fn mean(&self, t: f64) -> f64 {
        mean_fn(&self.theta(), t)
    }

    /// Delta-method variance of the fitted mean at `t`.
    pub fn variance(&self, t: f64) -> f64 {
        let g = Vector3::from(mean_gradient(&self.theta(), t));
        (g.transpose() * self.cov_matrix() * g)[(0, 0)].max(0.0)
    }

    /// Interval for a new observation at `t`: `mean ± z * sqrt(variance + sigma2)`.
    pub fn prediction_interval(&self, t: f64, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {level} not in (0, 1)")));
        }
        let z = stats::normal_quantile_two_sided(level);
        let half = z * (self.variance(t) + self.sigma2).sqrt();
        let m = self.mean(t);
        Ok((m - half, m + half))
    }

    /// Standard errors of (alpha, beta, gamma).
    pub fn std_errors(&self) -> [f64; 3] {
        [self.cov[0].sqrt(), self.cov[4].sqrt(), self.cov[8].sqrt()]
    }

    /// Times at which the fitted mean has doubled `k = 1, 2, ...` times relative to
    /// `t_start`, rounded to the nearest month, up to `t_start + horizon`.
    pub fn doubling_times(&self, t_start: MonthIndex, horizon: u32) -> Result<Vec<Doubling>> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::NoDoubling {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        let base = t_pow(t_start.as_f64(), self.beta);
        let end = t_start.as_f64() + f64::from(horizon);
        let step = std::f64::consts::LN_2 / self.alpha;
        let mut out = Vec::new();
        let mut prev = t_start;
        for k in 1.. {
            let exact = (base + k as f64 * step).powf(1.0 / self.beta);
            if exact > end {
                break;
            }
            let month = MonthIndex::round_from(exact);
            out.push(Doubling {
                k,
                month,
                exact_month: exact,
                gap: month.value() - prev.value(),
            });
            prev = month;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doubling {
    pub k: u32,
    pub month: MonthIndex,
    pub exact_month: f64,
    /// Months since the previous doubling (or since the start for `k = 1`).
    pub gap: u32,
}

pub fn sum_squares(theta: &[f64; 3], times: &[f64], ys: &[f64]) -> f64 {
    times.iter().zip(ys).map(|(&t, &y)| (y - mean_fn(theta, t)).powi(2)).sum()
}

struct LmOutcome {
    theta: [f64; 3],
    rss: f64,
    converged: bool,
    iterations: usize,
}

fn normal_equations(theta: &[f64; 3], times: &[f64], ys: &[f64]) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (&t, &y) in times.iter().zip(ys) {
        let g = Vector3::from(mean_gradient(theta, t));
        let r = y - mean_fn(theta, t);
        jtj += g * g.transpose();
        jtr += g * r;
    }
    (jtj, jtr)
}

fn levenberg_marquardt(start: [f64; 3], times: &[f64], ys: &[f64]) -> LmOutcome {
    let mut theta = start;
    let mut rss = sum_squares(&theta, times, ys);
    let mut lambda = 1e-3;
    for iter in 1..=MAX_ITERATIONS {
        if rss == 0.0 {
            return LmOutcome { theta, rss, converged: true, iterations: iter };
        }
        let (jtj, jtr) = normal_equations(&theta, times, ys);
        loop {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let step = damped.cholesky().map(|c| c.solve(&jtr));
            let candidate = step.map(|d| [theta[0] + d[0], theta[1] + d[1], theta[2] + d[2]]);
            match candidate {
                Some(c) if c[1] > 0.0 && c.iter().all(|v| v.is_finite()) => {
                    let new_rss = sum_squares(&c, times, ys);
                    if new_rss < rss {
                        let rel = (rss - new_rss) / rss;
                        theta = c;
                        rss = new_rss;
                        lambda = (lambda / 10.0).max(1e-12);
                        if rel < REL_TOLERANCE {
                            return LmOutcome { theta, rss, converged: true, iterations: iter };
                        }
                        break;
                    }
                }
                _ => {}
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No damped step improves the objective: a (numerical) minimum.
                return LmOutcome { theta, rss, converged: true, iterations: iter };
            }
        }
    }
    LmOutcome {
        theta,
        rss,
        converged: false,
        iterations: MAX_ITERATIONS,
    }
}

/// Starting points: gamma below the smallest observation, a grid over beta, alpha by
/// least squares of `(y - gamma0)` on `t^beta0` through the origin.
pub fn initial_guesses(times: &[f64], ys: &[f64]) -> Vec<[f64; 3]> {
    let gamma0 = ys.iter().copied().fold(f64::INFINITY, f64::min) - 0.1;
    BETA_GRID
        .iter()
        .map(|&beta0| {
            let (sxz, sxx) = times.iter().zip(ys).fold((0.0, 0.0), |(sxz, sxx), (&t, &y)| {
                let x = t_pow(t, beta0);
                (sxz + x * (y - gamma0), sxx + x * x)
            });
            [if sxx > 0.0 { sxz / sxx } else { 0.0 }, beta0, gamma0]
        })
        .collect()
}

/// Maximum-likelihood fit of the power-law trend.
pub fn fit_trend(times: &[f64], log_scores: &[f64]) -> Result<TrendModel> {
    if times.len() != log_scores.len() {
        return Err(Error::InvalidArgument("times and scores differ in length".into()));
    }
    let n = times.len();
    if n < MIN_POINTS {
        return Err(Error::InsufficientData(format!("n >= {MIN_POINTS} required, got {n}")));
    }
    if times.iter().chain(log_scores).any(|v| !v.is_finite()) || times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("times must be finite and nonnegative, scores finite".into()));
    }
    let mut distinct: Vec<f64> = times.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "at least 3 distinct times required, got {}",
            distinct.len()
        )));
    }

    let mut best: Option<LmOutcome> = None;
    let mut best_failed: Option<LmOutcome> = None;
    for start in initial_guesses(times, log_scores) {
        let out = levenberg_marquardt(start, times, log_scores);
        let slot = if out.converged { &mut best } else { &mut best_failed };
        if slot.as_ref().is_none_or(|b| out.rss < b.rss) {
            *slot = Some(out);
        }
    }
    let Some(fit) = best else {
        let last = best_failed.map_or([f64::NAN; 3], |o| o.theta);
        return Err(Error::NotConverged {
            iterations: MAX_ITERATIONS,
            last,
        });
    };
    log::debug!("trend fit converged in {} iterations, rss {}", fit.iterations, fit.rss);

    let sigma2 = fit.rss / n as f64;
    let (jtj, _) = normal_equations(&fit.theta, times, log_scores);
    let inv = jtj
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular information matrix at the trend optimum".into()))?;
    let cov = inv * sigma2;
    // Symmetrize away rounding.
    let cov = (cov + cov.transpose()) * 0.5;
    let mut flat = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            flat[i * 3 + j] = cov[(i, j)];
        }
    }
    Ok(TrendModel {
        alpha: fit.theta[0],
        beta: fit.theta[1],
        gamma: fit.theta[2],
        sigma2,
        cov: flat,
        t_origin: MonthIndex::ORIGIN,
    })
}

/// Fit on normalized records, optionally restricted to an inclusive date window.
pub fn fit_trend_records(records: &[NormalizedRecord], window: Option<(MonthIndex, MonthIndex)>) -> Result<TrendModel> {
    let (times, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| window.is_none_or(|(lo, hi)| r.record.date >= lo && r.record.date <= hi))
        .map(|r| (r.record.date.as_f64(), r.log_score()))
        .unzip();
    fit_trend(&times, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_model() -> TrendModel {
        TrendModel::from_params(2.69, 0.25, -9.14)
    }

    #[test]
    fn mean_examples() {
        let m = reference_model();
        assert_eq!(m.mean(0.0), -9.14);
        // 270^0.25 = 4.0536...
        assert!((m.mean(270.0) - 1.764).abs() < 1e-3);
        let flat = TrendModel::from_params(0.0, 0.5, 3.0);
        for t in [0.0, 1.0, 100.0] {
            assert_eq!(flat.mean(t), 3.0);
        }
    }

    #[test]
    fn variance_examples() {
        assert_eq!(reference_model().variance(120.0), 0.0);
        let mut m = TrendModel::from_params(1.0, 1.0, 0.0);
        m.cov = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let want = 4.0 + (2.0 * 2f64.ln()).powi(2) + 1.0;
        assert!((m.variance(2.0) - want).abs() < 1e-12);
        assert!((want - 6.922).abs() < 1e-3);
        // t = 0 gradient is (0, 0, 1)
        assert_eq!(m.variance(0.0), 1.0);
    }

    #[test]
    fn prediction_interval_examples() {
        let mut m = reference_model();
        let (lo, hi) = m.prediction_interval(100.0, 0.95).unwrap();
        assert_eq!(lo, hi);
        m.sigma2 = 0.25;
        let (lo, hi) = m.prediction_interval(100.0, 0.95).unwrap();
        assert!(((hi - lo) / 2.0 - 0.979982).abs() < 1e-5);
        let (lo80, hi80) = m.prediction_interval(100.0, 0.80).unwrap();
        assert!(hi80 - lo80 < hi - lo);
        assert!(m.prediction_interval(1.0, 1.0).is_err());
    }

    #[test]
    fn doubling_requires_growth() {
        let m = TrendModel::from_params(-1.0, 0.25, 0.0);
        assert!(matches!(m.doubling_times(MonthIndex(8), 100), Err(Error::NoDoubling { .. })));
        let m = TrendModel::from_params(1.0, 0.0, 0.0);
        assert!(m.doubling_times(MonthIndex(8), 100).is_err());
    }

    #[test]
    fn moore_special_case_has_constant_gaps() {
        // beta = 1: doubling every ln2/alpha months exactly.
        let alpha = std::f64::consts::LN_2 / 18.0;
        let m = TrendModel::from_params(alpha, 1.0, 0.0);
        let d = m.doubling_times(MonthIndex(0), 200).unwrap();
        assert_eq!(d.len(), 11);
        for step in &d {
            assert!((step.exact_month - 18.0 * f64::from(step.k)).abs() < 1e-9);
            assert_eq!(step.gap, 18);
        }
    }

    #[test]
    fn reference_trend_first_doubling() {
        let d = reference_model().doubling_times(MonthIndex(8), 400).unwrap();
        assert_eq!(d[0].month, MonthIndex(14));
        assert_eq!(d[0].month.to_string(), "1996-10");
        assert_eq!(d[0].gap, 6);
    }

    #[test]
    fn fit_preconditions() {
        let t: Vec<f64> = (1..=5).map(f64::from).collect();
        let err = fit_trend(&t, &t).unwrap_err();
        assert!(err.to_string().contains("n >= 10"), "{err}");
        let same = vec![5.0; 20];
        assert!(fit_trend(&same, &same).is_err());
    }

    #[test]
    fn noise_free_recovery() {
        let truth = [2.69, 0.25, -9.14];
        let t: Vec<f64> = (1..=300).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|&t| mean_fn(&truth, t)).collect();
        let m = fit_trend(&t, &y).unwrap();
        for (got, want) in m.theta().iter().zip(truth) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
        assert!(m.sigma2 < 1e-12);
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(reference_model()).unwrap();
        assert_eq!(v["cov"].as_array().unwrap().len(), 9);
        assert_eq!(v["t_origin"], "1995-08");
        let back: TrendModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, reference_model());
    }
}
