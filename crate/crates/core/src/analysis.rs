//! Score composition, microbenchmark influence and hardware-factor regression.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BenchmarkRecord, HwField};
use crate::normalize::NormalizedRecord;
use crate::stats;
use crate::suite::{Suite, SuiteDefinition};

/// Overall score as the geometric mean of the suite's microbenchmark ratios.
pub fn compose_score(micros: &BTreeMap<String, f64>, def: &SuiteDefinition) -> Result<f64> {
    if let Some(missing) = def.micros.iter().find(|m| !micros.contains_key(*m)) {
        return Err(Error::Missing(format!("microbenchmark `{missing}` missing for suite {}", def.suite)));
    }
    if let Some(extra) = micros.keys().find(|k| !def.contains(k)) {
        return Err(Error::InvalidArgument(format!(
            "`{extra}` is not a microbenchmark of suite {}",
            def.suite
        )));
    }
    let mut log_sum = 0.0;
    for name in &def.micros {
        let r = micros[name];
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("ratio for `{name}` must be positive, got {r}")));
        }
        log_sum += r.ln();
    }
    Ok((log_sum / def.p() as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionCheck {
    pub record_id: String,
    /// log(score) - (mean log micro + c).
    pub residual: f64,
    pub flagged: bool,
}

pub fn verify_composition(record: &BenchmarkRecord, def: &SuiteDefinition, tol: f64) -> Result<CompositionCheck> {
    let score = record
        .score_speed
        .ok_or_else(|| Error::Missing(format!("record `{}` has no speed score", record.record_id)))?;
    let composed = compose_score(&record.micros, def)?;
    let residual = score.ln() - (composed.ln() + def.composition_constant);
    Ok(CompositionCheck {
        record_id: record.record_id.clone(),
        residual,
        flagged: residual.abs() > tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroInfluence {
    pub name: String,
    pub log_variance: f64,
    pub log_range: f64,
    /// OLS slope of log overall score on log micro ratio.
    pub slope: Option<f64>,
    pub correlation: Option<f64>,
    /// Composition weight, 1/p.
    pub leverage: f64,
    /// Mean and SD of log(overall / micro).
    pub overall_to_micro_mean: f64,
    pub overall_to_micro_sd: f64,
}

/// Microbenchmarks ranked by the variance of their log ratio, most variable first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub suite: Suite,
    pub n_records: usize,
    pub micros: Vec<MicroInfluence>,
    /// True when the top two variances are equal.
    pub tied: bool,
}

pub const MIN_INFLUENCE_RECORDS: usize = 10;

pub fn influence_stats(records: &[BenchmarkRecord], suite: Suite) -> Result<InfluenceReport> {
    let def = suite.definition();
    let rows: Vec<&BenchmarkRecord> = records
        .iter()
        .filter(|r| r.suite == suite && r.score_speed.is_some() && def.micros.iter().all(|m| r.micros.contains_key(m)))
        .collect();
    if rows.len() < MIN_INFLUENCE_RECORDS {
        return Err(Error::InsufficientData(format!(
            "influence statistics need at least {MIN_INFLUENCE_RECORDS} records with full microbenchmark sets, suite {suite} has {}",
            rows.len()
        )));
    }
    let log_overall: Vec<f64> = rows.iter().map(|r| r.score_speed.unwrap_or(1.0).ln()).collect();
    let leverage = 1.0 / def.p() as f64;

    let mut micros: Vec<MicroInfluence> = def
        .micros
        .iter()
        .map(|name| {
            let xs: Vec<f64> = rows.iter().map(|r| r.micros[name].ln()).collect();
            let log_variance = stats::sample_variance(&xs);
            let (lo, hi) = xs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            let slope = (log_variance > 0.0).then(|| {
                let mx = stats::mean(&xs);
                let my = stats::mean(&log_overall);
                let sxy: f64 = xs.iter().zip(&log_overall).map(|(x, y)| (x - mx) * (y - my)).sum();
                let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
                sxy / sxx
            });
            let diffs: Vec<f64> = log_overall.iter().zip(&xs).map(|(y, x)| y - x).collect();
            MicroInfluence {
                name: name.clone(),
                log_variance,
                log_range: hi - lo,
                slope,
                correlation: stats::pearson(&xs, &log_overall),
                leverage,
                overall_to_micro_mean: stats::mean(&diffs),
                overall_to_micro_sd: stats::sample_variance(&diffs).sqrt(),
            }
        })
        .collect();
    // Stable sort keeps roster order among ties.
    micros.sort_by(|a, b| b.log_variance.total_cmp(&a.log_variance));
    let tied = micros.len() > 1 && micros[0].log_variance == micros[1].log_variance;
    Ok(InfluenceReport {
        suite,
        n_records: rows.len(),
        micros,
        tied,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub parameter: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRegression {
    pub n: usize,
    pub rows: Vec<CoefficientRow>,
    pub residual_variance: f64,
}

const Z_975: f64 = 1.959963984540054;

impl FactorRegression {
    pub fn coefficient(&self, parameter: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }

    /// Aligned text table: Parameter, Coef., SE, t-val, p-val, CI bounds.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>10} {:>8} {:>10} {:>7} {:>10} {:>10}",
            "Parameter", "Coef.", "SE", "t-val", "p-val", "CI 2.5%", "CI 97.5%"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>10.4} {:>8.3} {:>10.3} {:>7.3} {:>10.3} {:>10.3}",
                r.parameter, r.coef, r.se, r.t, r.p, r.ci_low, r.ci_high
            );
        }
        out
    }
}

/// OLS of log normalized speed on core count and the auto-parallel flag.
/// Frequency is left out because it is collinear with the other factors.
pub fn fit_factor_regression(records: &[NormalizedRecord]) -> Result<FactorRegression> {
    let mut log_score = Vec::new();
    let mut cores = Vec::new();
    let mut auto = Vec::new();
    for r in records {
        if let (Some(c), Some(a)) = (HwField::Cores.get(&r.record.hw), HwField::AutoParallel.get(&r.record.hw)) {
            log_score.push(r.log_score());
            cores.push(c);
            auto.push(a);
        }
    }
    let skipped = records.len() - log_score.len();
    if skipped > 0 {
        log::info!("factor regression: skipped {skipped} records lacking cores or auto_parallel");
    }
    factor_regression(&log_score, &cores, &auto)
}

pub fn factor_regression(log_score: &[f64], cores: &[f64], auto_parallel: &[f64]) -> Result<FactorRegression> {
    if auto_parallel.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegeneratePredictor(
            "all records share one auto_parallel value".into(),
        ));
    }
    let ones = vec![1.0; log_score.len()];
    let fit = stats::ols(
        &[("Intercept", &ones), ("No. of cores", cores), ("Auto-parallel", auto_parallel)],
        log_score,
    )?;
    let dof = fit.dof();
    let rows = fit
        .names
        .iter()
        .zip(fit.coefficients.iter().zip(&fit.std_errors))
        .map(|(name, (&coef, &se))| {
            let t = coef / se;
            CoefficientRow {
                parameter: name.clone(),
                coef,
                se,
                t,
                p: stats::two_sided_p_value(t, fit.n, dof),
                ci_low: coef - Z_975 * se,
                ci_high: coef + Z_975 * se,
            }
        })
        .collect();
    Ok(FactorRegression {
        n: fit.n,
        rows,
        residual_variance: fit.residual_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensitivityField {
    Date,
    Score,
    Hw(HwField),
}

impl std::str::FromStr for SensitivityField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "date" => Ok(SensitivityField::Date),
            "score" => Ok(SensitivityField::Score),
            other => other
                .parse::<HwField>()
                .map(SensitivityField::Hw)
                .map_err(|_| Error::InvalidArgument(format!("unknown sensitivity field `{other}`"))),
        }
    }
}

impl SensitivityField {
    pub fn name(self) -> &'static str {
        match self {
            SensitivityField::Date => "date",
            SensitivityField::Score => "score",
            SensitivityField::Hw(f) => f.name(),
        }
    }
}

/// Long-format CSV, one row per record, for external plotting. Missing values are empty.
pub fn emit_sensitivity_table(records: &[NormalizedRecord], fields: &[SensitivityField]) -> Result<String> {
    if fields.is_empty() {
        return Err(Error::InvalidArgument("no fields requested".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields.iter().map(|f| f.name()))?;
    for r in records {
        let row: Vec<String> = fields
            .iter()
            .map(|f| match f {
                SensitivityField::Date => r.record.date.to_string(),
                SensitivityField::Score => r.score.to_string(),
                SensitivityField::Hw(h) => h.get(&r.record.hw).map(|v| v.to_string()).unwrap_or_default(),
            })
            .collect();
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::HardwareConfig;
    use crate::month::MonthIndex;

    fn def(names: &[&str]) -> SuiteDefinition {
        SuiteDefinition::new(Suite::Spec2006, names.iter().map(|s| s.to_string()).collect(), 0.0).unwrap()
    }

    fn map(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn compose_examples() {
        let d3 = def(&["a", "b", "c"]);
        assert!((compose_score(&map(&[("a", 1.0), ("b", 1.0), ("c", 1.0)]), &d3).unwrap() - 1.0).abs() < 1e-15);
        assert!((compose_score(&map(&[("a", 2.0), ("b", 4.0), ("c", 8.0)]), &d3).unwrap() - 4.0).abs() < 1e-14);
        let d2 = def(&["a", "b"]);
        assert!((compose_score(&map(&[("a", 4.0), ("b", 1.0)]), &d2).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn compose_rejects_missing_and_extra() {
        let d = def(&["a", "b"]);
        let err = compose_score(&map(&[("a", 4.0)]), &d).unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
        let err = compose_score(&map(&[("a", 4.0), ("b", 1.0), ("z", 1.0)]), &d).unwrap_err();
        assert!(err.to_string().contains("`z`"), "{err}");
    }

    fn record(score: f64, micros: BTreeMap<String, f64>) -> BenchmarkRecord {
        BenchmarkRecord {
            record_id: "r".into(),
            suite: Suite::Spec2006,
            date: MonthIndex(150),
            vendor: String::new(),
            system: String::new(),
            processor: String::new(),
            system_id: String::new(),
            hw: HardwareConfig::default(),
            score_speed: Some(score),
            score_rate: None,
            micros,
        }
    }

    #[test]
    fn doubled_score_residual_is_ln2() {
        let d = def(&["a", "b", "c"]);
        let m = map(&[("a", 3.0), ("b", 5.0), ("c", 7.0)]);
        let s = compose_score(&m, &d).unwrap();
        let ok = verify_composition(&record(s, m.clone()), &d, 1e-9).unwrap();
        assert!(ok.residual.abs() < 1e-12 && !ok.flagged);
        let doubled = verify_composition(&record(2.0 * s, m), &d, 1e-9).unwrap();
        assert!((doubled.residual - 2f64.ln()).abs() < 1e-12);
        assert!(doubled.flagged);
    }

    #[test]
    fn influence_ties_when_identical() {
        let def = Suite::Spec2006.definition();
        let m: BTreeMap<String, f64> = def.micros.iter().map(|n| (n.clone(), 20.0)).collect();
        let records: Vec<_> = (0..12).map(|_| record(20.0, m.clone())).collect();
        let rep = influence_stats(&records, Suite::Spec2006).unwrap();
        assert!(rep.tied);
        assert!(rep.micros.iter().all(|m| m.log_variance == 0.0 && m.correlation.is_none()));
        let total: f64 = rep.micros.iter().map(|m| m.leverage).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(influence_stats(&records[..9], Suite::Spec2006).is_err());
    }

    fn normalized(score: f64, date: u32, cores: Option<u32>, auto: Option<bool>) -> NormalizedRecord {
        let mut r = record(score, BTreeMap::new());
        r.date = MonthIndex(date);
        r.hw.cores = cores;
        r.hw.auto_parallel = auto;
        NormalizedRecord {
            record: r,
            score,
            micros: BTreeMap::new(),
        }
    }

    #[test]
    fn degenerate_auto_parallel() {
        let recs: Vec<_> = (0..10).map(|i| normalized(1.0 + i as f64, 100, Some(i + 1), Some(true))).collect();
        assert!(matches!(fit_factor_regression(&recs), Err(Error::DegeneratePredictor(_))));
    }

    #[test]
    fn zero_noise_factor_regression() {
        let recs: Vec<_> = (0..40u32)
            .map(|i| {
                let cores = 1 + (i * 7) % 33;
                let auto = i % 3 == 0;
                let log = -0.7 + 0.03 * f64::from(cores) + if auto { 2.2 } else { 0.0 };
                normalized(log.exp(), 100, Some(cores), Some(auto))
            })
            .collect();
        let fit = fit_factor_regression(&recs).unwrap();
        let want = [-0.7, 0.03, 2.2];
        for (row, w) in fit.rows.iter().zip(want) {
            assert!((row.coef - w).abs() < 1e-9, "{row:?}");
        }
        let text = fit.to_text();
        assert!(text.starts_with("Parameter"));
        assert!(text.contains("Auto-parallel"));
    }

    #[test]
    fn sensitivity_table_shape() {
        let recs = vec![
            normalized(1.5, 10, Some(2), None),
            normalized(2.5, 20, None, None),
            normalized(3.5, 30, Some(8), Some(true)),
        ];
        let out = emit_sensitivity_table(&recs, &[SensitivityField::Date, SensitivityField::Score]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "date,score");
        assert_eq!(lines[1], "1996-06,1.5");
        assert!(lines.iter().all(|l| l.split(',').count() == 2));

        let out = emit_sensitivity_table(&recs, &[SensitivityField::Hw(HwField::Cores)]).unwrap();
        assert_eq!(out, "cores\n2\n\"\"\n8\n");
        assert!("bogus".parse::<SensitivityField>().is_err());
        assert_eq!("l3_kb".parse::<SensitivityField>().unwrap(), SensitivityField::Hw(HwField::L3Kb));
    }
}
