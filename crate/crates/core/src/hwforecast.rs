//! Hardware-factor trajectories and the feasible-configuration filter.
//!
//! Each factor (core count on a log2 scale, frequency, L3 size) gets a linear-in-time
//! quantile regression per level `tau`. Candidate future machines are the Cartesian
//! product of the predicted quantiles, screened by a minimum L3-per-core ratio and by
//! per-era convex regions in the (frequency, cores) and (frequency, L3) planes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BenchmarkRecord;
use crate::month::MonthIndex;

pub const DEFAULT_TAUS: [f64; 4] = [0.25, 0.5, 0.75, 0.95];
pub const MIN_QUANTILE_POINTS: usize = 20;
pub const THREADS_PER_CORE: [f64; 2] = [1.0, 2.0];
pub const KB_PER_MB: f64 = 1024.0;

/// Pinball (check) loss of a residual.
pub fn pinball(residual: f64, tau: f64) -> f64 {
    if residual >= 0.0 {
        tau * residual
    } else {
        (tau - 1.0) * residual
    }
}

pub fn pinball_loss(times: &[f64], values: &[f64], tau: f64, intercept: f64, slope: f64) -> f64 {
    times
        .iter()
        .zip(values)
        .map(|(&t, &y)| pinball(y - intercept - slope * t, tau))
        .sum()
}

/// Best intercept for a fixed slope (a tau-quantile of the residuals) and its loss.
fn profile(times: &[f64], values: &[f64], tau: f64, slope: f64, scratch: &mut Vec<f64>) -> (f64, f64) {
    scratch.clear();
    scratch.extend(times.iter().zip(values).map(|(&t, &y)| y - slope * t));
    let n = scratch.len();
    let k = ((tau * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, &mut b, _) = scratch.select_nth_unstable_by(k, f64::total_cmp);
    (b, pinball_loss(times, values, tau, b, slope))
}

/// Linear quantile regression: `(intercept, slope)` minimizing the summed pinball loss.
///
/// The loss profiled over the intercept is convex and piecewise linear in the slope,
/// so a golden-section search localizes the minimum; the result is then snapped to
/// the best line through the pivot observation, since an optimum passes through two
/// observations.
pub fn fit_quantile(times: &[f64], values: &[f64], tau: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau {tau} not in (0, 1)")));
    }
    if times.len() != values.len() {
        return Err(Error::InvalidArgument("times and values differ in length".into()));
    }
    if times.len() < MIN_QUANTILE_POINTS {
        return Err(Error::InsufficientData(format!(
            "quantile regression needs n >= {MIN_QUANTILE_POINTS}, got {}",
            times.len()
        )));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite input".into()));
    }
    let mut sorted_t = times.to_vec();
    sorted_t.sort_by(f64::total_cmp);
    sorted_t.dedup();
    if sorted_t.len() < 2 {
        return Err(Error::InsufficientData("all times are equal".into()));
    }
    let min_dt = sorted_t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let (lo_y, hi_y) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let bound = (hi_y - lo_y) / min_dt;

    let mut scratch = Vec::with_capacity(times.len());
    let mut g = |s: f64| profile(times, values, tau, s, &mut scratch);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-bound, bound);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c).1, g(d).1);
    for _ in 0..400 {
        if (b - a) <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c).1;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d).1;
        }
    }
    let s0 = 0.5 * (a + b);
    let (b0, loss0) = g(s0);
    let mut best = (loss0, b0, s0);

    // Lines through the pivot observation.
    let pivot = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| (y - s0 * t - b0).abs())
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (tp, yp) = (times[pivot], values[pivot]);
    for (&t, &y) in times.iter().zip(values) {
        if t == tp {
            continue;
        }
        let s = (y - yp) / (t - tp);
        let (bi, loss) = g(s);
        if loss < best.0 {
            best = (loss, bi, s);
        }
    }
    Ok((best.1, best.2))
}

/// A hardware factor with a forecast trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HwFactor {
    /// Fitted on log2(cores).
    Cores,
    FreqMhz,
    L3Kb,
}

impl HwFactor {
    pub const ALL: [HwFactor; 3] = [HwFactor::Cores, HwFactor::FreqMhz, HwFactor::L3Kb];

    pub fn name(self) -> &'static str {
        match self {
            HwFactor::Cores => "cores",
            HwFactor::FreqMhz => "freq_mhz",
            HwFactor::L3Kb => "l3_kb",
        }
    }

    fn observe(self, r: &BenchmarkRecord) -> Option<f64> {
        match self {
            HwFactor::Cores => r.hw.cores.map(|c| f64::from(c).log2()),
            HwFactor::FreqMhz => r.hw.freq_mhz,
            HwFactor::L3Kb => r.hw.l3_kb,
        }
    }

    /// Map a value on the fitting scale back to natural units, clamped to the factor floor.
    pub fn to_natural(self, fitted: f64) -> f64 {
        match self {
            HwFactor::Cores => fitted.exp2().max(1.0),
            HwFactor::FreqMhz => fitted.max(1.0),
            HwFactor::L3Kb => fitted.max(0.0),
        }
    }
}

impl fmt::Display for HwFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileLine {
    pub factor: HwFactor,
    pub tau: f64,
    pub intercept: f64,
    /// Per month, on the fitting scale.
    pub slope: f64,
    pub window: (MonthIndex, MonthIndex),
}

impl QuantileLine {
    pub fn eval(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }

    pub fn predict(&self, t: f64) -> f64 {
        self.factor.to_natural(self.eval(t))
    }
}

pub fn default_window_start() -> MonthIndex {
    // 2000-01
    MonthIndex(53)
}

/// Fit one quantile line per (factor, tau) from records dated within `window`.
pub fn fit_factor_lines(
    records: &[BenchmarkRecord],
    factors: &[HwFactor],
    taus: &[f64],
    window: (MonthIndex, MonthIndex),
) -> Result<Vec<QuantileLine>> {
    let mut lines = Vec::new();
    for &factor in factors {
        let (times, values): (Vec<f64>, Vec<f64>) = records
            .iter()
            .filter(|r| r.date >= window.0 && r.date <= window.1)
            .filter_map(|r| Some((r.date.as_f64(), factor.observe(r)?)))
            .unzip();
        for &tau in taus {
            let (intercept, slope) = fit_quantile(&times, &values, tau)
                .map_err(|e| Error::InsufficientData(format!("{factor} at tau {tau}: {e}")))?;
            lines.push(QuantileLine {
                factor,
                tau,
                intercept,
                slope,
                window,
            });
        }
    }
    Ok(lines)
}

/// True if any two lines of the same factor cross inside their fit window with the
/// higher tau ending up below the lower one. Crossing is reported, not corrected.
pub fn lines_cross(lines: &[QuantileLine]) -> bool {
    lines.iter().any(|a| {
        lines.iter().any(|b| {
            a.factor == b.factor && a.tau < b.tau && {
                let (lo, hi) = (a.window.0.as_f64(), a.window.1.as_f64());
                a.eval(lo) > b.eval(lo) + 1e-9 || a.eval(hi) > b.eval(hi) + 1e-9
            }
        })
    })
}

/// Predicted per-factor quantiles at one time, in natural units, ordered by tau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorQuantiles {
    pub t: MonthIndex,
    pub values: BTreeMap<HwFactor, Vec<(f64, f64)>>,
}

pub fn predict_factor_quantiles(lines: &[QuantileLine], taus: &[f64], t: MonthIndex) -> Result<FactorQuantiles> {
    let mut values = BTreeMap::new();
    for factor in HwFactor::ALL {
        let mut row = Vec::with_capacity(taus.len());
        for &tau in taus {
            let line = lines
                .iter()
                .find(|l| l.factor == factor && (l.tau - tau).abs() < 1e-12)
                .ok_or_else(|| Error::Missing(format!("no quantile line for {factor} at tau {tau}")))?;
            row.push((tau, line.predict(t.as_f64())));
        }
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        values.insert(factor, row);
    }
    Ok(FactorQuantiles { t, values })
}

/// A fully specified candidate machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub cores: u32,
    pub freq_mhz: f64,
    pub l3_kb: f64,
    pub threads_per_core: f64,
}

impl MachineConfig {
    pub fn l3_mb(&self) -> f64 {
        self.l3_kb / KB_PER_MB
    }

    /// GP input vector: cores, freq, L3, threads.
    pub fn features(&self) -> [f64; 4] {
        [f64::from(self.cores), self.freq_mhz, self.l3_kb, self.threads_per_core]
    }

    fn sort_key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cores
            .cmp(&other.cores)
            .then(self.freq_mhz.total_cmp(&other.freq_mhz))
            .then(self.l3_kb.total_cmp(&other.l3_kb))
            .then(self.threads_per_core.total_cmp(&other.threads_per_core))
    }
}

impl Eq for MachineConfig {}

impl PartialOrd for MachineConfig {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MachineConfig {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key_cmp(other)
    }
}

pub type Point = [f64; 2];

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn is_convex(poly: &[Point]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    let mut sign = 0.0;
    for i in 0..n {
        let c = cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        if c != 0.0 {
            if sign == 0.0 {
                sign = c.signum();
            } else if c.signum() != sign {
                return false;
            }
        }
    }
    sign != 0.0
}

/// Point in a convex polygon of either orientation; the boundary counts as inside.
pub fn point_in_convex(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let (mut pos, mut neg) = (false, false);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let c = cross(a, b, p);
        let scale = ((b[0] - a[0]).hypot(b[1] - a[1])) * ((p[0] - a[0]).hypot(p[1] - a[1]));
        if c.abs() <= 1e-12 * scale {
            continue;
        }
        if c > 0.0 {
            pos = true;
        } else {
            neg = true;
        }
        if pos && neg {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Era {
    pub from: MonthIndex,
    pub to: MonthIndex,
    /// Vertices as (freq MHz, cores).
    pub freq_cores_poly: Vec<Point>,
    /// Vertices as (freq MHz, L3 MB).
    pub freq_l3_poly: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    pub min_cache_per_core_mb: f64,
    pub eras: Vec<Era>,
}

const DEFAULT_REGION_JSON: &str = include_str!("../data/default_region.json");

pub const DEFAULT_MIN_CACHE_PER_CORE_MB: f64 = 0.5;

impl Default for FeasibleRegion {
    fn default() -> Self {
        FeasibleRegion::from_json(DEFAULT_REGION_JSON).expect("bundled region is valid")
    }
}

impl FeasibleRegion {
    pub fn from_json(s: &str) -> Result<Self> {
        let region: FeasibleRegion = serde_json::from_str(s)?;
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_cache_per_core_mb > 0.0) {
            return Err(Error::InvalidArgument("min_cache_per_core_mb must be positive".into()));
        }
        for era in &self.eras {
            if era.from > era.to {
                return Err(Error::InvalidArgument(format!("era {}..{} is reversed", era.from, era.to)));
            }
            for (name, poly) in [("freq_cores_poly", &era.freq_cores_poly), ("freq_l3_poly", &era.freq_l3_poly)] {
                if poly.len() < 3 || !is_convex(poly) {
                    return Err(Error::InvalidArgument(format!(
                        "{name} of era {}..{} must be a convex polygon with at least 3 vertices",
                        era.from, era.to
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn era_at(&self, t: MonthIndex) -> Result<&Era> {
        self.eras
            .iter()
            .find(|e| e.from <= t && t <= e.to)
            .ok_or(Error::NoEra(t))
    }

    /// Ratio rule first, then both era polygons.
    pub fn is_feasible(&self, config: &MachineConfig, t: MonthIndex) -> Result<bool> {
        let era = self.era_at(t)?;
        if config.l3_mb() / f64::from(config.cores) < self.min_cache_per_core_mb {
            return Ok(false);
        }
        Ok(point_in_convex(&era.freq_cores_poly, [config.freq_mhz, f64::from(config.cores)])
            && point_in_convex(&era.freq_l3_poly, [config.freq_mhz, config.l3_mb()]))
    }

    /// Hull-based eras from historical records: per era, the convex hull of the points
    /// whose coordinates fall within the era's 1st–99th percentiles. An era with no
    /// data inherits the previous era's hulls with cores and L3 doubled.
    pub fn from_records(records: &[BenchmarkRecord], eras: &[(MonthIndex, MonthIndex)], min_cache_per_core_mb: f64) -> Result<Self> {
        let mut out: Vec<Era> = Vec::new();
        for &(from, to) in eras {
            let pts: Vec<(f64, f64, f64)> = records
                .iter()
                .filter(|r| r.date >= from && r.date <= to)
                .filter_map(|r| Some((r.hw.freq_mhz?, f64::from(r.hw.cores?), r.hw.l3_kb? / KB_PER_MB)))
                .collect();
            let trimmed = trim_percentiles(&pts);
            let fc = convex_hull(&trimmed.iter().map(|p| [p.0, p.1]).collect::<Vec<_>>());
            let fl = convex_hull(&trimmed.iter().map(|p| [p.0, p.2]).collect::<Vec<_>>());
            let era = if fc.len() >= 3 && fl.len() >= 3 {
                Era {
                    from,
                    to,
                    freq_cores_poly: fc,
                    freq_l3_poly: fl,
                }
            } else if let Some(prev) = out.last() {
                let grow = |poly: &[Point]| {
                    let mut pts = poly.to_vec();
                    pts.extend(poly.iter().map(|p| [p[0], p[1] * 2.0]));
                    convex_hull(&pts)
                };
                Era {
                    from,
                    to,
                    freq_cores_poly: grow(&prev.freq_cores_poly),
                    freq_l3_poly: grow(&prev.freq_l3_poly),
                }
            } else {
                return Err(Error::InsufficientData(format!(
                    "era {from}..{to} has too few complete records for a region"
                )));
            };
            out.push(era);
        }
        let region = FeasibleRegion {
            min_cache_per_core_mb,
            eras: out,
        };
        region.validate()?;
        Ok(region)
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn trim_percentiles(pts: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    if pts.is_empty() {
        return Vec::new();
    }
    let bounds = |get: fn(&(f64, f64, f64)) -> f64| {
        let mut xs: Vec<f64> = pts.iter().map(get).collect();
        xs.sort_by(f64::total_cmp);
        (percentile(&xs, 0.01), percentile(&xs, 0.99))
    };
    let b0 = bounds(|p| p.0);
    let b1 = bounds(|p| p.1);
    let b2 = bounds(|p| p.2);
    pts.iter()
        .copied()
        .filter(|p| (b0.0..=b0.1).contains(&p.0) && (b1.0..=b1.1).contains(&p.1) && (b2.0..=b2.1).contains(&p.2))
        .collect()
}

pub fn default_eras() -> Vec<(MonthIndex, MonthIndex)> {
    let m = |s: &str| s.parse::<MonthIndex>().expect("static date");
    vec![
        (m("2000-01"), m("2015-12")),
        (m("2016-01"), m("2020-12")),
        (m("2021-01"), m("2025-12")),
    ]
}

/// Every combination of predicted quantile values (cores rounded to whole cores) and
/// threads per core, filtered by the region, in (cores, freq, L3, threads) order.
pub fn enumerate_configs(quantiles: &FactorQuantiles, region: &FeasibleRegion, t: MonthIndex) -> Result<Vec<MachineConfig>> {
    let mut configs = Vec::new();
    for config in candidate_configs(quantiles)? {
        if region.is_feasible(&config, t)? {
            configs.push(config);
        }
    }
    if configs.is_empty() {
        return Err(Error::NoFeasibleConfigs);
    }
    Ok(configs)
}

/// Unfiltered Cartesian product, deduplicated and sorted.
pub fn candidate_configs(quantiles: &FactorQuantiles) -> Result<Vec<MachineConfig>> {
    let values = |f: HwFactor| -> Result<Vec<f64>> {
        let mut v: Vec<f64> = quantiles
            .values
            .get(&f)
            .ok_or_else(|| Error::Missing(format!("no predictions for {f}")))?
            .iter()
            .map(|&(_, v)| v)
            .collect();
        if f == HwFactor::Cores {
            v.iter_mut().for_each(|c| *c = c.round().max(1.0));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    };
    let (cores, freqs, l3s) = (values(HwFactor::Cores)?, values(HwFactor::FreqMhz)?, values(HwFactor::L3Kb)?);
    let mut out = Vec::with_capacity(cores.len() * freqs.len() * l3s.len() * THREADS_PER_CORE.len());
    for &c in &cores {
        for &f in &freqs {
            for &l in &l3s {
                for &th in &THREADS_PER_CORE {
                    out.push(MachineConfig {
                        cores: c as u32,
                        freq_mhz: f,
                        l3_kb: l,
                        threads_per_core: th,
                    });
                }
            }
        }
    }
    out.sort();
    Ok(out)
}
