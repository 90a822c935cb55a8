//! Cross-generation score normalization.
//!
//! Machines benchmarked under two adjacent suites form an overlap set. From it we
//! derive either a constant conversion factor (the geometric mean of new/old score
//! ratios) or a regression conversion that predicts the log ratio from the log old
//! score and selected hardware factors. Conversions are chained suite by suite onto
//! a common target scale, the newest suite by default.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BenchmarkRecord, HardwareConfig, HwField, ScoreKind};
use crate::stats;
use crate::suite::{Suite, SHARED_MICROS};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_FACTORS: [HwField; 2] = [HwField::Cores, HwField::FreqMhz];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub system_id: String,
    pub score_old: f64,
    pub score_new: f64,
    /// Old-suite hardware with gaps filled from the new-suite row.
    pub hw: HardwareConfig,
    pub micros_old: BTreeMap<String, f64>,
    pub micros_new: BTreeMap<String, f64>,
}

impl OverlapPair {
    pub fn log_ratio(&self) -> f64 {
        (self.score_new / self.score_old).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSet {
    pub old: Suite,
    pub new: Suite,
    pub pairs: Vec<OverlapPair>,
    /// Later-dated duplicate rows discarded while joining.
    pub dropped_duplicates: usize,
}

/// Earliest-dated row per system id within one suite (ties broken by record id).
fn first_per_system(records: &[BenchmarkRecord], suite: Suite, kind: ScoreKind) -> (BTreeMap<&str, &BenchmarkRecord>, usize) {
    let mut out: BTreeMap<&str, &BenchmarkRecord> = BTreeMap::new();
    let mut dropped = 0;
    for r in records.iter().filter(|r| r.suite == suite && r.score(kind).is_some()) {
        match out.get(r.system_id.as_str()) {
            Some(prev) if (prev.date, &prev.record_id) <= (r.date, &r.record_id) => dropped += 1,
            Some(_) => {
                dropped += 1;
                out.insert(&r.system_id, r);
            }
            None => {
                out.insert(&r.system_id, r);
            }
        }
    }
    (out, dropped)
}

/// Inner join of two suites on system id, restricted to rows carrying the score.
pub fn find_overlap(records: &[BenchmarkRecord], old: Suite, new: Suite, kind: ScoreKind) -> Result<OverlapSet> {
    if !records.iter().any(|r| r.suite == old) {
        return Err(Error::NoRecords(old));
    }
    if !records.iter().any(|r| r.suite == new) {
        return Err(Error::NoRecords(new));
    }
    let (olds, d_old) = first_per_system(records, old, kind);
    let (news, d_new) = first_per_system(records, new, kind);
    let dropped = d_old + d_new;
    if dropped > 0 {
        log::warn!("{old}->{new} overlap: dropped {dropped} duplicate submissions, kept the earliest");
    }
    let pairs: Vec<OverlapPair> = olds
        .iter()
        .filter_map(|(id, o)| {
            news.get(id).map(|n| OverlapPair {
                system_id: id.to_string(),
                score_old: o.score(kind).unwrap_or_default(),
                score_new: n.score(kind).unwrap_or_default(),
                hw: o.hw.or(&n.hw),
                micros_old: o.micros.clone(),
                micros_new: n.micros.clone(),
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoOverlap { old, new });
    }
    Ok(OverlapSet {
        old,
        new,
        pairs,
        dropped_duplicates: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionFactor {
    pub old: Suite,
    pub new: Suite,
    pub factor: f64,
    pub n_pairs: usize,
}

pub fn geometric_mean_ratio<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> f64 {
    let (sum, n) = pairs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), (old, new)| (s + (new / old).ln(), n + 1));
    (sum / n as f64).exp()
}

/// Geometric mean of new/old ratios; multiplying an old score by it converts the score.
pub fn constant_factor(overlap: &OverlapSet) -> Result<ConversionFactor> {
    if overlap.pairs.is_empty() {
        return Err(Error::NoOverlap {
            old: overlap.old,
            new: overlap.new,
        });
    }
    Ok(ConversionFactor {
        old: overlap.old,
        new: overlap.new,
        factor: geometric_mean_ratio(overlap.pairs.iter().map(|p| (p.score_old, p.score_new))),
        n_pairs: overlap.pairs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionCoefficients {
    pub intercept: f64,
    /// `None` when the log-old-score term is excluded from the model.
    pub log_old: Option<f64>,
    pub factors: BTreeMap<HwField, f64>,
}

/// `log(new/old) = intercept + log_old·log(old) + Σ factor_f·x_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConversion {
    pub old: Suite,
    pub new: Suite,
    pub coefficients: RegressionCoefficients,
    pub std_errors: Vec<f64>,
    pub residual_variance: f64,
    pub n_pairs: usize,
}

impl RegressionConversion {
    pub fn predict_log_ratio(&self, score_old: f64, hw: &HardwareConfig) -> Result<f64> {
        let c = &self.coefficients;
        let mut v = c.intercept;
        if let Some(b) = c.log_old {
            v += b * score_old.ln();
        }
        for (field, b) in &c.factors {
            let x = field
                .get(hw)
                .ok_or_else(|| Error::Missing(format!("regression conversion needs `{field}`")))?;
            v += b * x;
        }
        Ok(v)
    }

    pub fn included_factors(&self) -> Vec<HwField> {
        self.coefficients.factors.keys().copied().collect()
    }
}

/// Factors from [`DEFAULT_FACTORS`] that are present on every pair and vary across them.
pub fn default_factors(overlap: &OverlapSet) -> Vec<HwField> {
    DEFAULT_FACTORS
        .into_iter()
        .filter(|f| {
            let xs: Option<Vec<f64>> = overlap.pairs.iter().map(|p| f.get(&p.hw)).collect();
            xs.is_some_and(|xs| stats::sample_variance(&xs) > 0.0)
        })
        .collect()
}

pub fn fit_regression_conversion(overlap: &OverlapSet, factors: &[HwField]) -> Result<RegressionConversion> {
    fit_regression(overlap, &overlap.pairs, factors, true)
}

/// Regression with every slope forced to zero: only the intercept is estimated, which
/// reproduces the constant conversion.
pub fn intercept_only_conversion(overlap: &OverlapSet) -> Result<RegressionConversion> {
    let ratios: Vec<f64> = overlap.pairs.iter().map(OverlapPair::log_ratio).collect();
    let intercept = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let residual_variance = stats::sample_variance(&ratios);
    Ok(RegressionConversion {
        old: overlap.old,
        new: overlap.new,
        coefficients: RegressionCoefficients {
            intercept,
            log_old: None,
            factors: BTreeMap::new(),
        },
        std_errors: vec![(residual_variance / ratios.len() as f64).sqrt()],
        residual_variance,
        n_pairs: ratios.len(),
    })
}

fn fit_regression(overlap: &OverlapSet, pairs: &[OverlapPair], factors: &[HwField], with_log_old: bool) -> Result<RegressionConversion> {
    let n_coef = 1 + usize::from(with_log_old) + factors.len();
    if pairs.len() <= n_coef + 1 {
        return Err(Error::InsufficientData(format!(
            "{} overlap pairs cannot fit {n_coef} coefficients (need more than {})",
            pairs.len(),
            n_coef + 1
        )));
    }
    let y: Vec<f64> = pairs.iter().map(OverlapPair::log_ratio).collect();
    let ones = vec![1.0; pairs.len()];
    let log_old: Vec<f64> = pairs.iter().map(|p| p.score_old.ln()).collect();
    let mut factor_cols = Vec::with_capacity(factors.len());
    for f in factors {
        let col: Option<Vec<f64>> = pairs.iter().map(|p| f.get(&p.hw)).collect();
        let col = col.ok_or_else(|| Error::Missing(format!("factor `{f}` is missing on some overlap pairs")))?;
        factor_cols.push((f.name(), col));
    }
    let mut columns: Vec<(&str, &[f64])> = vec![("intercept", &ones)];
    if with_log_old {
        columns.push(("log_old_score", &log_old));
    }
    columns.extend(factor_cols.iter().map(|(n, c)| (*n, c.as_slice())));
    let fit = stats::ols(&columns, &y)?;

    let mut coef = fit.coefficients.iter().copied();
    let intercept = coef.next().unwrap_or_default();
    let log_old = if with_log_old { coef.next() } else { None };
    Ok(RegressionConversion {
        old: overlap.old,
        new: overlap.new,
        coefficients: RegressionCoefficients {
            intercept,
            log_old,
            factors: factors.iter().copied().zip(coef).collect(),
        },
        std_errors: fit.std_errors,
        residual_variance: fit.residual_variance,
        n_pairs: pairs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Constant,
    Regression,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Method::Constant),
            "regression" => Ok(Method::Regression),
            other => Err(Error::InvalidArgument(format!("unknown normalization method `{other}`"))),
        }
    }
}

/// A fitted suite-to-suite conversion in either form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Conversion {
    Constant(ConversionFactor),
    Regression(RegressionConversion),
}

impl Conversion {
    pub fn suites(&self) -> (Suite, Suite) {
        match self {
            Conversion::Constant(c) => (c.old, c.new),
            Conversion::Regression(r) => (r.old, r.new),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Conversion::Constant(_) => Method::Constant,
            Conversion::Regression(_) => Method::Regression,
        }
    }

    /// Old-suite score expressed on the new suite's scale.
    pub fn convert(&self, score_old: f64, hw: &HardwareConfig) -> Result<f64> {
        match self {
            Conversion::Constant(c) => Ok(score_old * c.factor),
            Conversion::Regression(r) => Ok(score_old * r.predict_log_ratio(score_old, hw)?.exp()),
        }
    }

    pub fn fit(overlap: &OverlapSet, method: Method, factors: &[HwField]) -> Result<Self> {
        match method {
            Method::Constant => constant_factor(overlap).map(Conversion::Constant),
            Method::Regression => fit_regression_conversion(overlap, factors).map(Conversion::Regression),
        }
    }
}

/// Out-of-fold R² of converted-old versus true new score over `k` folds.
///
/// Held-out predictions from every fold are pooled before computing R², so small
/// folds (down to one pair) still give a defined value.
///
/// Pairs are ordered by system id before the seeded shuffle, so the result does not
/// depend on input order.
pub fn cross_validated_r2(overlap: &OverlapSet, method: Method, factors: &[HwField], k: usize, seed: u64) -> Result<f64> {
    let n = overlap.pairs.len();
    if k < 2 || n < k {
        return Err(Error::InvalidArgument(format!("need 2 <= k <= {n} folds, got {k}")));
    }
    let mut sorted: Vec<&OverlapPair> = overlap.pairs.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.system_id, a.score_old, a.score_new)
            .partial_cmp(&(&b.system_id, b.score_old, b.score_new))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }

    let mut observed = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    for fold in 0..k {
        let (test, train): (Vec<&OverlapPair>, Vec<&OverlapPair>) =
            sorted.iter().copied().enumerate().fold((vec![], vec![]), |(mut te, mut tr), (i, p)| {
                if fold_of[i] == fold {
                    te.push(p);
                } else {
                    tr.push(p);
                }
                (te, tr)
            });
        let train_set = OverlapSet {
            old: overlap.old,
            new: overlap.new,
            pairs: train.into_iter().cloned().collect(),
            dropped_duplicates: 0,
        };
        let conv = Conversion::fit(&train_set, method, factors)?;
        for p in test {
            observed.push(p.score_new);
            predicted.push(conv.convert(p.score_old, &p.hw)?);
        }
    }
    Ok(stats::r_squared(&observed, &predicted))
}

/// Constant factor for one microbenchmark, from overlap pairs carrying it on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroFactor {
    pub old: Suite,
    pub new: Suite,
    pub micro: String,
    pub factor: f64,
    pub n_pairs: usize,
}

pub fn micro_factor(overlap: &OverlapSet, micro: &str) -> Option<MicroFactor> {
    let pairs: Vec<(f64, f64)> = overlap
        .pairs
        .iter()
        .filter_map(|p| Some((*p.micros_old.get(micro)?, *p.micros_new.get(micro)?)))
        .collect();
    (!pairs.is_empty()).then(|| MicroFactor {
        old: overlap.old,
        new: overlap.new,
        micro: micro.to_string(),
        factor: geometric_mean_ratio(pairs.iter().copied()),
        n_pairs: pairs.len(),
    })
}

/// One fitted step of a normalization chain, with its cross-validated R² when computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionStep {
    #[serde(flatten)]
    pub conversion: Conversion,
    pub r2_cv: Option<f64>,
}

/// Adjacent-suite conversions leading to `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionChain {
    pub target: Suite,
    pub steps: Vec<ConversionStep>,
    #[serde(default)]
    pub micro_steps: Vec<MicroFactor>,
}

#[derive(Debug, Clone)]
pub struct ChainOptions {
    pub method: Method,
    /// `None` selects [`default_factors`] per suite pair.
    pub factors: Option<Vec<HwField>>,
    /// Folds for the reported CV R²; `None` skips cross-validation.
    pub folds: Option<usize>,
    pub seed: u64,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            method: Method::Constant,
            factors: None,
            folds: Some(DEFAULT_FOLDS),
            seed: crate::DEFAULT_SEED,
        }
    }
}

/// Fit every adjacent conversion from the oldest suite present up to `target`.
pub fn build_chain(records: &[BenchmarkRecord], target: Suite, opts: &ChainOptions) -> Result<ConversionChain> {
    let oldest = records
        .iter()
        .map(|r| r.suite)
        .min()
        .ok_or_else(|| Error::InsufficientData("no records".into()))?;
    let mut steps = Vec::new();
    let mut micro_steps = Vec::new();
    let mut s = oldest;
    while s < target {
        let next = s.next().ok_or(Error::MissingConversion { from: s, to: target })?;
        let overlap = find_overlap(records, s, next, ScoreKind::Speed)?;
        let factors = opts.factors.clone().unwrap_or_else(|| default_factors(&overlap));
        let conversion = Conversion::fit(&overlap, opts.method, &factors)?;
        let r2_cv = match opts.folds {
            Some(k) if overlap.pairs.len() >= k => {
                Some(cross_validated_r2(&overlap, opts.method, &factors, k, opts.seed)?)
            }
            _ => None,
        };
        steps.push(ConversionStep { conversion, r2_cv });
        micro_steps.extend(SHARED_MICROS.iter().filter_map(|m| micro_factor(&overlap, m)));
        s = next;
    }
    Ok(ConversionChain {
        target,
        steps,
        micro_steps,
    })
}

/// A record with its speed score (and shared microbenchmarks) on the target scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRecord {
    pub record: BenchmarkRecord,
    pub score: f64,
    pub micros: BTreeMap<String, f64>,
}

impl NormalizedRecord {
    pub fn log_score(&self) -> f64 {
        self.score.ln()
    }
}

impl ConversionChain {
    fn step(&self, from: Suite) -> Result<&Conversion> {
        let to = from.next().ok_or(Error::MissingConversion { from, to: self.target })?;
        self.steps
            .iter()
            .map(|s| &s.conversion)
            .find(|c| c.suites() == (from, to))
            .ok_or(Error::MissingConversion { from, to })
    }

    /// Convert one score from `suite` onto the target scale.
    pub fn convert(&self, score: f64, suite: Suite, hw: &HardwareConfig) -> Result<f64> {
        if suite > self.target {
            return Err(Error::InvalidArgument(format!(
                "suite {suite} is newer than normalization target {}",
                self.target
            )));
        }
        let mut v = score;
        let mut s = suite;
        while s < self.target {
            v = self.step(s)?.convert(v, hw)?;
            s = s.next().unwrap_or(self.target);
        }
        Ok(v)
    }

    /// Product of constant factors from `suite` to the target.
    pub fn cumulative_factor(&self, suite: Suite) -> Result<f64> {
        let mut f = 1.0;
        let mut s = suite;
        while s < self.target {
            match self.step(s)? {
                Conversion::Constant(c) => f *= c.factor,
                Conversion::Regression(_) => {
                    return Err(Error::InvalidArgument("regression conversions have no single factor".into()))
                }
            }
            s = s.next().unwrap_or(self.target);
        }
        Ok(f)
    }

    fn convert_micro(&self, micro: &str, value: f64, suite: Suite) -> Option<f64> {
        let mut v = value;
        let mut s = suite;
        while s < self.target {
            let to = s.next()?;
            let step = self
                .micro_steps
                .iter()
                .find(|m| m.micro == micro && m.old == s && m.new == to)?;
            v *= step.factor;
            s = to;
        }
        Some(v)
    }
}

/// Put every speed-scored record at or below the target suite onto the target scale.
pub fn chain_normalize(records: &[BenchmarkRecord], chain: &ConversionChain) -> Result<Vec<NormalizedRecord>> {
    records
        .iter()
        .filter(|r| r.score_speed.is_some() && r.suite <= chain.target)
        .map(|r| {
            let score = chain.convert(r.score_speed.unwrap_or_default(), r.suite, &r.hw)?;
            let micros = SHARED_MICROS
                .iter()
                .filter_map(|m| {
                    let v = *r.micros.get(*m)?;
                    Some((m.to_string(), chain.convert_micro(m, v, r.suite)?))
                })
                .collect();
            Ok(NormalizedRecord {
                record: r.clone(),
                score,
                micros,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::MonthIndex;

    fn rec(id: &str, suite: Suite, system: &str, date: u32, score: f64, cores: u32) -> BenchmarkRecord {
        BenchmarkRecord {
            record_id: id.into(),
            suite,
            date: MonthIndex(date),
            vendor: "v".into(),
            system: system.into(),
            processor: "p".into(),
            system_id: crate::ingest::system_key("v", system, "p"),
            hw: HardwareConfig {
                cores: Some(cores),
                freq_mhz: Some(1000.0 + f64::from(cores) * 10.0),
                ..Default::default()
            },
            score_speed: Some(score),
            score_rate: None,
            micros: BTreeMap::new(),
        }
    }

    fn overlap_from(ratios: &[(f64, f64)]) -> OverlapSet {
        OverlapSet {
            old: Suite::Spec1995,
            new: Suite::Spec2000,
            pairs: ratios
                .iter()
                .enumerate()
                .map(|(i, &(o, n))| OverlapPair {
                    system_id: format!("m{i:04}"),
                    score_old: o,
                    score_new: n,
                    hw: HardwareConfig::default(),
                    micros_old: BTreeMap::new(),
                    micros_new: BTreeMap::new(),
                })
                .collect(),
            dropped_duplicates: 0,
        }
    }

    #[test]
    fn constant_factor_examples() {
        let f = constant_factor(&overlap_from(&[(1.0, 2.0), (3.0, 6.0), (5.0, 10.0)])).unwrap();
        assert!((f.factor - 2.0).abs() < 1e-15);
        let f = constant_factor(&overlap_from(&[(1.0, 1.0), (1.0, 4.0)])).unwrap();
        assert!((f.factor - 2.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_join_and_duplicates() {
        let records = vec![
            rec("a1", Suite::Spec1995, "x", 10, 2.0, 1),
            rec("a2", Suite::Spec1995, "x", 5, 3.0, 1),
            rec("a3", Suite::Spec1995, "y", 5, 4.0, 1),
            rec("b1", Suite::Spec2000, "x", 60, 300.0, 1),
            rec("b2", Suite::Spec2000, "z", 60, 300.0, 1),
        ];
        let o = find_overlap(&records, Suite::Spec1995, Suite::Spec2000, ScoreKind::Speed).unwrap();
        assert_eq!(o.pairs.len(), 1);
        assert_eq!(o.pairs[0].score_old, 3.0, "earliest-dated duplicate wins");
        assert_eq!(o.dropped_duplicates, 1);
    }

    #[test]
    fn disjoint_suites_error() {
        let records = vec![
            rec("a", Suite::Spec1995, "x", 10, 2.0, 1),
            rec("b", Suite::Spec2000, "y", 60, 300.0, 1),
        ];
        assert!(matches!(
            find_overlap(&records, Suite::Spec1995, Suite::Spec2000, ScoreKind::Speed),
            Err(Error::NoOverlap { .. })
        ));
    }

    #[test]
    fn regression_underdetermined() {
        let o = overlap_from(&[(1.0, 2.0), (2.0, 3.0), (3.0, 7.0)]);
        assert!(matches!(fit_regression_conversion(&o, &[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn regression_names_constant_factor() {
        let mut o = overlap_from(&[(1.0, 2.0), (2.0, 3.0), (3.0, 7.0), (4.0, 9.0), (5.0, 9.5), (6.0, 13.0)]);
        for p in &mut o.pairs {
            p.hw.cores = Some(1);
        }
        let err = fit_regression_conversion(&o, &[HwField::Cores]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref c) if c == "cores"), "{err}");
        assert!(default_factors(&o).is_empty());
    }

    #[test]
    fn intercept_only_matches_constant() {
        let o = overlap_from(&[(1.3, 2.0), (2.0, 3.1), (3.0, 7.0), (4.2, 9.0)]);
        let c = Conversion::Constant(constant_factor(&o).unwrap());
        let r = Conversion::Regression(intercept_only_conversion(&o).unwrap());
        for p in &o.pairs {
            assert_eq!(c.convert(p.score_old, &p.hw).unwrap(), r.convert(p.score_old, &p.hw).unwrap());
        }
    }

    #[test]
    fn chain_identity_and_product() {
        let chain = ConversionChain {
            target: Suite::Spec2006,
            steps: vec![
                ConversionStep {
                    conversion: Conversion::Constant(ConversionFactor {
                        old: Suite::Spec1995,
                        new: Suite::Spec2000,
                        factor: 100.0,
                        n_pairs: 1,
                    }),
                    r2_cv: None,
                },
                ConversionStep {
                    conversion: Conversion::Constant(ConversionFactor {
                        old: Suite::Spec2000,
                        new: Suite::Spec2006,
                        factor: 0.03,
                        n_pairs: 1,
                    }),
                    r2_cv: None,
                },
            ],
            micro_steps: vec![],
        };
        let hw = HardwareConfig::default();
        assert_eq!(chain.convert(7.3, Suite::Spec2006, &hw).unwrap(), 7.3);
        assert!((chain.convert(10.0, Suite::Spec1995, &hw).unwrap() - 30.0).abs() < 1e-12);
        assert!(chain.convert(1.0, Suite::Spec2017, &hw).is_err());

        let gap = ConversionChain {
            target: Suite::Spec2006,
            steps: chain.steps[1..].to_vec(),
            micro_steps: vec![],
        };
        assert!(matches!(
            gap.convert(10.0, Suite::Spec1995, &hw),
            Err(Error::MissingConversion {
                from: Suite::Spec1995,
                to: Suite::Spec2000
            })
        ));
    }

    #[test]
    fn conversion_json_shape() {
        let c = ConversionStep {
            conversion: Conversion::Constant(ConversionFactor {
                old: Suite::Spec1995,
                new: Suite::Spec2000,
                factor: 2.5,
                n_pairs: 4,
            }),
            r2_cv: Some(0.8),
        };
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["method"], "constant");
        assert_eq!(v["old"], 1995);
        assert_eq!(v["new"], 2000);
        assert_eq!(v["factor"], 2.5);
        assert_eq!(v["r2_cv"], 0.8);
        let back: ConversionStep = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn cv_rejects_bad_k() {
        let o = overlap_from(&[(1.0, 2.0), (2.0, 4.0)]);
        assert!(cross_validated_r2(&o, Method::Constant, &[], 3, 1).is_err());
        assert!(cross_validated_r2(&o, Method::Constant, &[], 1, 1).is_err());
    }
}
