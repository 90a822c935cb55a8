//! Shared inputs for the pipeline benchmarks, built once from seeded synthetic data.

use benchtrend::gp::{build_residuals, fit_gp, GpModel, ResidualDataset};
use benchtrend::hwforecast::{default_eras, fit_factor_lines, FeasibleRegion, HwFactor, QuantileLine, DEFAULT_MIN_CACHE_PER_CORE_MB};
use benchtrend::normalize::{build_chain, chain_normalize, ChainOptions};
use benchtrend::synth::{synthetic_records, SynthSpec};
use benchtrend::trend::{fit_trend_records, TrendModel};
use benchtrend::{BenchmarkRecord, MonthIndex, NormalizedRecord, Suite};

pub const TAUS: [f64; 4] = [0.25, 0.5, 0.75, 0.95];

pub struct Inputs {
    pub records: Vec<BenchmarkRecord>,
    pub normalized: Vec<NormalizedRecord>,
    pub trend: TrendModel,
    pub residuals: ResidualDataset,
    pub gp: GpModel,
    pub lines: Vec<QuantileLine>,
    pub region: FeasibleRegion,
}

pub fn inputs(per_suite: usize) -> Inputs {
    let spec = SynthSpec {
        per_suite,
        overlap: per_suite / 10,
        ..SynthSpec::default()
    };
    let records = synthetic_records(&spec, 11);
    let chain = build_chain(&records, Suite::Spec2017, &ChainOptions::default()).expect("chain");
    let normalized = chain_normalize(&records, &chain).expect("normalize");
    let trend = fit_trend_records(&normalized, None).expect("trend");
    let residuals = build_residuals(&normalized, &trend, Suite::Spec2017).expect("residuals");
    let gp = fit_gp(&residuals).expect("gp");
    let window = (MonthIndex(53), MonthIndex(330));
    let lines = fit_factor_lines(&records, &HwFactor::ALL, &TAUS, window).expect("lines");
    let region = FeasibleRegion::from_records(&records, &default_eras(), DEFAULT_MIN_CACHE_PER_CORE_MB).expect("region");
    Inputs {
        records,
        normalized,
        trend,
        residuals,
        gp,
        lines,
        region,
    }
}
