//! Gaussian-process model of trend residuals over hardware configurations.
//!
//! Residuals `log(score) - trend(t)` are modelled as `y ~ N(0, tau2 * (K + g I))` with
//! an isotropic Gaussian kernel `K_ij = exp(-|x_i - x_j|^2 / theta)` on standardized
//! inputs (cores, frequency, L3, threads per core). `tau2` is profiled out in closed
//! form, `theta` and the nugget `g` maximize the profiled likelihood. Time is not an
//! input: the trend owns time and the GP owns configuration effects.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hwforecast::MachineConfig;
use crate::normalize::NormalizedRecord;
use crate::optim::NelderMead;
use crate::suite::Suite;
use crate::trend::TrendModel;

pub const FEATURES: [&str; 4] = ["cores", "freq_mhz", "l3_kb", "threads_per_core"];
pub type Features = [f64; 4];

pub const LN_THETA_BOUNDS: (f64, f64) = (-6.0, 6.0);
pub const LN_G_BOUNDS: (f64, f64) = (-18.0, 0.0);
pub const MIN_NUGGET: f64 = 1e-8;
const STARTS: [[f64; 2]; 5] = [[0.0, -3.0], [-2.0, -1.0], [2.0, -1.0], [-2.0, -8.0], [2.0, -8.0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDataset {
    pub x: Vec<Features>,
    pub y: Vec<f64>,
    /// Records skipped for missing factors.
    pub dropped: usize,
}

impl ResidualDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

fn record_features(r: &NormalizedRecord) -> Option<Features> {
    let hw = &r.record.hw;
    Some([f64::from(hw.cores?), hw.freq_mhz?, hw.l3_kb?, hw.threads_per_core?])
}

/// Residuals of complete records of `suite` against the trend.
pub fn build_residuals(records: &[NormalizedRecord], trend: &TrendModel, suite: Suite) -> Result<ResidualDataset> {
    let mut data = ResidualDataset {
        x: Vec::new(),
        y: Vec::new(),
        dropped: 0,
    };
    for r in records.iter().filter(|r| r.record.suite == suite) {
        match record_features(r) {
            Some(f) => {
                data.x.push(f);
                data.y.push(r.log_score() - trend.mean(r.record.date.as_f64()));
            }
            None => data.dropped += 1,
        }
    }
    if data.dropped > 0 {
        log::info!("residual dataset: dropped {} incomplete records", data.dropped);
    }
    if data.len() < FEATURES.len() + 2 {
        return Err(Error::InsufficientData(format!(
            "GP needs at least {} complete records, got {}",
            FEATURES.len() + 2,
            data.len()
        )));
    }
    Ok(data)
}

/// Per-column centering and scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Features,
    pub sd: Features,
}

impl Standardization {
    pub fn fit(x: &[Features]) -> Result<Self> {
        let n = x.len() as f64;
        let mut mean = [0.0; 4];
        let mut sd = [0.0; 4];
        for j in 0..4 {
            mean[j] = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            sd[j] = var.sqrt();
            if !(sd[j] > 0.0) {
                return Err(Error::ConstantColumn(FEATURES[j].into()));
            }
        }
        Ok(Standardization { mean, sd })
    }

    pub fn apply(&self, x: &Features) -> Features {
        std::array::from_fn(|j| (x[j] - self.mean[j]) / self.sd[j])
    }

    pub fn invert(&self, z: &Features) -> Features {
        std::array::from_fn(|j| z[j] * self.sd[j] + self.mean[j])
    }
}

pub fn kernel(a: &Features, b: &Features, theta: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-d2 / theta).exp()
}

/// `K + g I` over standardized inputs.
pub fn kernel_matrix(z: &[Features], theta: f64, g: f64) -> DMatrix<f64> {
    let n = z.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0 + g;
        for j in 0..i {
            let v = kernel(&z[i], &z[j], theta);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Negative log-likelihood with `tau2` profiled out, and that `tau2`.
///
/// `nll = n/2 ln(2π tau2) + 1/2 ln|C| + n/2`, `tau2 = yᵀC⁻¹y / n`.
pub fn profiled_nll(z: &[Features], y: &[f64], theta: f64, g: f64) -> Result<(f64, f64)> {
    let c = kernel_matrix(z, theta, g);
    let chol = c
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("kernel matrix not positive definite (theta={theta}, g={g})")))?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    Ok(nll_from_parts(y.len(), yv.dot(&alpha), log_det(&chol)))
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn nll_from_parts(n: usize, quad: f64, log_det: f64) -> (f64, f64) {
    let n_f = n as f64;
    let tau2 = quad / n_f;
    let nll = 0.5 * n_f * (2.0 * std::f64::consts::PI * tau2).ln() + 0.5 * log_det + 0.5 * n_f;
    (nll, tau2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GpModelData {
    standardization: Standardization,
    theta: f64,
    tau2: f64,
    g: f64,
    /// Standardized training inputs, row-major n×4.
    #[serde(rename = "X")]
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpModelData", into = "GpModelData")]
pub struct GpModel {
    pub standardization: Standardization,
    pub theta: f64,
    pub tau2: f64,
    pub g: f64,
    z: Vec<Features>,
    y: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    /// C⁻¹y
    weights: DVector<f64>,
    nll: f64,
}

impl PartialEq for GpModel {
    fn eq(&self, other: &Self) -> bool {
        GpModelData::from(self.clone()) == GpModelData::from(other.clone())
    }
}

impl From<GpModel> for GpModelData {
    fn from(m: GpModel) -> Self {
        GpModelData {
            standardization: m.standardization,
            theta: m.theta,
            tau2: m.tau2,
            g: m.g,
            x: m.z.iter().flatten().copied().collect(),
            y: m.y,
        }
    }
}

impl TryFrom<GpModelData> for GpModel {
    type Error = Error;
    fn try_from(d: GpModelData) -> Result<Self> {
        if d.x.len() != 4 * d.y.len() {
            return Err(Error::InvalidArgument("GP X must hold 4 columns per target".into()));
        }
        let z: Vec<Features> = d.x.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        let mut m = GpModel::from_standardized(d.standardization, z, d.y, d.theta, d.g)?;
        // Keep the stored scale verbatim.
        m.tau2 = d.tau2;
        Ok(m)
    }
}

/// Hyperparameter-search controls.
#[derive(Debug, Clone)]
pub struct GpOptions {
    /// Search on at most this many evenly spaced rows; the final model uses all rows.
    pub max_search_points: usize,
    pub max_evals_per_start: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions {
            max_search_points: 1000,
            max_evals_per_start: 200,
        }
    }
}

impl GpModel {
    fn from_standardized(standardization: Standardization, z: Vec<Features>, y: Vec<f64>, theta: f64, g: f64) -> Result<Self> {
        if !(theta > 0.0 && g >= 0.0) {
            return Err(Error::InvalidArgument(format!("need theta > 0 and g >= 0, got theta={theta}, g={g}")));
        }
        let c = kernel_matrix(&z, theta, g);
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("kernel matrix not positive definite (theta={theta}, g={g})")))?;
        let yv = DVector::from_column_slice(&y);
        let weights = chol.solve(&yv);
        let (nll, tau2) = nll_from_parts(y.len(), yv.dot(&weights), log_det(&chol));
        Ok(GpModel {
            standardization,
            theta,
            tau2: tau2.max(0.0),
            g,
            z,
            y,
            chol,
            weights,
            nll,
        })
    }

    /// Build with fixed hyperparameters, skipping the search.
    pub fn with_hyperparameters(data: &ResidualDataset, theta: f64, g: f64) -> Result<Self> {
        let standardization = Standardization::fit(&data.x)?;
        let z = data.x.iter().map(|x| standardization.apply(x)).collect();
        GpModel::from_standardized(standardization, z, data.y.clone(), theta, g)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn training_inputs(&self) -> &[Features] {
        &self.z
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    /// Profiled log-likelihood at the fitted hyperparameters.
    pub fn log_likelihood(&self) -> f64 {
        -self.nll
    }

    pub fn predict_features(&self, x: &Features) -> (f64, f64) {
        let z = self.standardization.apply(x);
        let k = DVector::from_iterator(self.z.len(), self.z.iter().map(|zi| kernel(&z, zi, self.theta)));
        let mean = k.dot(&self.weights);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .map_or(0.0, |v| v.norm_squared());
        let var = self.tau2 * (1.0 - v);
        (mean, var.max(0.0))
    }

    /// Conditional mean and variance of the residual at `config`.
    pub fn predict(&self, config: &MachineConfig) -> (f64, f64) {
        self.predict_features(&config.features())
    }

    /// True when any standardized coordinate lies outside the training range.
    pub fn extrapolates(&self, x: &Features) -> bool {
        let z = self.standardization.apply(x);
        (0..4).any(|j| {
            let (lo, hi) = self
                .z
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
            z[j] < lo || z[j] > hi
        })
    }
}

/// Estimate `(theta, g)` by multistart bounded Nelder-Mead on the profiled likelihood.
pub fn fit_gp(data: &ResidualDataset) -> Result<GpModel> {
    fit_gp_with(data, &GpOptions::default())
}

pub fn fit_gp_with(data: &ResidualDataset, opts: &GpOptions) -> Result<GpModel> {
    if data.x.len() != data.y.len() {
        return Err(Error::InvalidArgument("X and y differ in length".into()));
    }
    if data.len() < FEATURES.len() + 2 {
        return Err(Error::InsufficientData(format!("GP needs at least {} rows", FEATURES.len() + 2)));
    }
    let standardization = Standardization::fit(&data.x)?;
    let z: Vec<Features> = data.x.iter().map(|x| standardization.apply(x)).collect();

    if data.y.iter().all(|&v| v == 0.0) {
        return GpModel::from_standardized(standardization, z, data.y.clone(), 1.0, MIN_NUGGET);
    }

    let (zs, ys) = if data.len() > opts.max_search_points {
        let stride = data.len() as f64 / opts.max_search_points as f64;
        (0..opts.max_search_points)
            .map(|i| {
                let k = (i as f64 * stride) as usize;
                (z[k], data.y[k])
            })
            .unzip()
    } else {
        (z.clone(), data.y.clone())
    };

    let mut nm = NelderMead::new(
        vec![LN_THETA_BOUNDS.0, LN_G_BOUNDS.0],
        vec![LN_THETA_BOUNDS.1, LN_G_BOUNDS.1],
    );
    nm.max_evals = opts.max_evals_per_start;
    nm.f_tol = 1e-10;
    let objective = |p: &[f64]| {
        let g = p[1].exp().max(MIN_NUGGET);
        profiled_nll(&zs, &ys, p[0].exp(), g).map_or(f64::INFINITY, |(nll, _)| nll)
    };
    let best = STARTS
        .iter()
        .map(|s| nm.minimize(s, objective))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Numerical("no GP starts".into()))?;
    let (theta, g) = (best.x[0].exp(), best.x[1].exp().max(MIN_NUGGET));
    if !best.value.is_finite() {
        return Err(Error::GpOptimization {
            theta,
            g,
            reason: "likelihood not finite at any start".into(),
        });
    }
    GpModel::from_standardized(standardization, z, data.y.clone(), theta, g).map_err(|e| Error::GpOptimization {
        theta,
        g,
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub rmse: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// (predicted, observed) log normalized score for each held-out record.
    pub pairs: Vec<(f64, f64)>,
}

/// Fit on the earliest `split_fraction` of complete SPEC2017 records by date and
/// score the rest.
pub fn holdout_validate(records: &[NormalizedRecord], trend: &TrendModel, split_fraction: f64) -> Result<HoldoutReport> {
    holdout_validate_with(records, trend, split_fraction, &GpOptions::default())
}

pub fn holdout_validate_with(
    records: &[NormalizedRecord],
    trend: &TrendModel,
    split_fraction: f64,
    opts: &GpOptions,
) -> Result<HoldoutReport> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {split_fraction} not in (0, 1)")));
    }
    let mut rows: Vec<&NormalizedRecord> = records
        .iter()
        .filter(|r| r.record.suite == Suite::Spec2017 && record_features(r).is_some())
        .collect();
    rows.sort_by(|a, b| (a.record.date, &a.record.record_id).cmp(&(b.record.date, &b.record.record_id)));
    let n_train = (split_fraction * rows.len() as f64).round() as usize;
    if n_train == 0 || n_train >= rows.len() {
        return Err(Error::InsufficientData(format!(
            "split of {} records leaves an empty side",
            rows.len()
        )));
    }
    let (train, test) = rows.split_at(n_train);
    let train: Vec<NormalizedRecord> = train.iter().map(|r| (*r).clone()).collect();
    let data = build_residuals(&train, trend, Suite::Spec2017)?;
    let model = fit_gp_with(&data, opts)?;

    let pairs: Vec<(f64, f64)> = test
        .iter()
        .filter_map(|r| {
            let x = record_features(r)?;
            let (mu, _) = model.predict_features(&x);
            Some((trend.mean(r.record.date.as_f64()) + mu, r.log_score()))
        })
        .collect();
    let rmse = (pairs.iter().map(|(p, o)| (p - o).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt();
    Ok(HoldoutReport {
        rmse,
        n_train,
        n_test: pairs.len(),
        pairs,
    })
}
