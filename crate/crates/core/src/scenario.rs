//! Individual predictions from trend plus GP, and quantile scenario bounds over
//! future times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::hwforecast::{enumerate_configs, predict_factor_quantiles, FeasibleRegion, MachineConfig, QuantileLine};
use crate::month::MonthIndex;
use crate::stats::normal_quantile_two_sided;
use crate::trend::TrendModel;

/// `(mean_log, variance)` for a machine `x` at month `t`.
pub fn predict_individual(trend: &TrendModel, gp: &GpModel, t: MonthIndex, x: &MachineConfig) -> (f64, f64) {
    let (mu, var) = gp.predict(x);
    let t = t.as_f64();
    (trend.mean(t) + mu, trend.variance(t) + var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBound {
    pub t: MonthIndex,
    pub q: f64,
    pub config: MachineConfig,
    pub mean_log_score: f64,
    pub variance: f64,
    pub pi95: (f64, f64),
    /// Number of feasible configurations the quantile was taken over.
    pub n_configs: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Index of the lower nearest-rank `q` quantile among `m` sorted values.
pub fn lower_rank_index(q: f64, m: usize) -> usize {
    ((q * m as f64).ceil() as usize).clamp(1, m) - 1
}

/// Pick the `q`th quantile of the predicted scores of `configs` and report the
/// configuration that realizes it. Equal predictions keep the configs' own order.
pub fn bound_over_configs(
    trend: &TrendModel,
    gp: &GpModel,
    configs: &[MachineConfig],
    t: MonthIndex,
    q: f64,
) -> Result<ScenarioBound> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile {q} not in (0, 1)")));
    }
    if configs.is_empty() {
        return Err(Error::NoFeasibleConfigs);
    }
    let mut preds: Vec<(usize, f64, f64)> = configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (m, v) = predict_individual(trend, gp, t, c);
            (i, m, v)
        })
        .collect();
    preds.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let (i, mean, variance) = preds[lower_rank_index(q, preds.len())];
    let config = configs[i];
    let half = normal_quantile_two_sided(0.95) * variance.sqrt();
    let mut warnings = Vec::new();
    if gp.extrapolates(&config.features()) {
        warnings.push("config outside GP training range".to_string());
    }
    Ok(ScenarioBound {
        t,
        q,
        config,
        mean_log_score: mean,
        variance,
        pi95: (mean - half, mean + half),
        n_configs: configs.len(),
        warnings,
    })
}

/// One scenario bound: predict factor quantiles at `t`, enumerate the feasible
/// combinations, and take the `q`th quantile of their predicted log scores.
pub fn scenario_bound(
    trend: &TrendModel,
    gp: &GpModel,
    lines: &[QuantileLine],
    taus: &[f64],
    region: &FeasibleRegion,
    t: MonthIndex,
    q: f64,
) -> Result<ScenarioBound> {
    let quantiles = predict_factor_quantiles(lines, taus, t)?;
    let configs = enumerate_configs(&quantiles, region, t)?;
    bound_over_configs(trend, gp, &configs, t, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub t: MonthIndex,
    pub q: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub bounds: Vec<ScenarioBound>,
    pub errors: Vec<CellError>,
}

/// All `(t, q)` cells, q-major so each q's rows follow the input order of `times`.
pub fn scenario_sweep(
    trend: &TrendModel,
    gp: &GpModel,
    lines: &[QuantileLine],
    taus: &[f64],
    region: &FeasibleRegion,
    times: &[MonthIndex],
    qs: &[f64],
) -> Result<Sweep> {
    if times.is_empty() || qs.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one time and one quantile".into()));
    }
    let mut sweep = Sweep::default();
    for &q in qs {
        for &t in times {
            match scenario_bound(trend, gp, lines, taus, region, t, q) {
                Ok(b) => sweep.bounds.push(b),
                Err(e) => {
                    log::warn!("scenario cell t={t} q={q}: {e}");
                    sweep.errors.push(CellError {
                        t,
                        q,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(sweep)
}

pub const SWEEP_HEADER: [&str; 11] = [
    "t", "date", "q", "cores", "freq_mhz", "l3_kb", "threads", "mean_log", "var", "lo95", "hi95",
];

/// Long-format table with one row per bound.
pub fn sweep_to_csv(bounds: &[ScenarioBound]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for b in bounds {
        w.write_record([
            b.t.value().to_string(),
            b.t.to_string(),
            b.q.to_string(),
            b.config.cores.to_string(),
            b.config.freq_mhz.to_string(),
            b.config.l3_kb.to_string(),
            b.config.threads_per_core.to_string(),
            b.mean_log_score.to_string(),
            b.variance.to_string(),
            b.pi95.0.to_string(),
            b.pi95.1.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}
