use std::fs::File;
use std::path::PathBuf;

use benchtrend::analysis::{influence_stats, verify_composition};
use benchtrend::ingest::{lineage_series, parse_lineage, parse_records, summarize};
use benchtrend::normalize::{build_chain, chain_normalize, constant_factor, find_overlap, ChainOptions};
use benchtrend::{BenchmarkRecord, ScoreKind, Suite, SuiteDefinition};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn load() -> Vec<BenchmarkRecord> {
    parse_records(
        File::open(fixture("mini_spec.csv")).unwrap(),
        Some(File::open(fixture("mini_micros.csv")).unwrap()),
    )
    .unwrap()
}

#[test]
fn mini_spec_counts() {
    let records = load();
    assert_eq!(records.len(), 40);
    for suite in Suite::ALL {
        assert_eq!(records.iter().filter(|r| r.suite == suite).count(), 10, "{suite}");
    }
}

// Values from an independent spreadsheet-style pass over the CSV.
#[test]
fn summarize_2006_matches_spreadsheet() {
    let s = summarize(&load(), Suite::Spec2006, ScoreKind::Speed).unwrap();
    assert_eq!(s.count, 10);
    assert_eq!(s.max, 23.765);
    assert_eq!(s.min, 10.033);
    assert!((s.mean - 17.0496).abs() < 1e-12);
    assert!((s.mean_cores.unwrap() - 2.9).abs() < 1e-12);
    assert!((s.mean_freq_mhz.unwrap() - 2790.0).abs() < 1e-12);
    assert!((s.mean_l3_kb.unwrap() - 6451.2).abs() < 1e-12);
    assert!((s.mean_threads_per_core.unwrap() - 1.6).abs() < 1e-12);
}

#[test]
fn summarize_1995_skips_missing_l3() {
    let s = summarize(&load(), Suite::Spec1995, ScoreKind::Speed).unwrap();
    assert_eq!(s.mean_l3_kb, None);
}

#[test]
fn fixture_micros_compose() {
    for r in load() {
        let def = SuiteDefinition::builtin(r.suite);
        let check = verify_composition(&r, &def, 1e-9).unwrap();
        assert!(!check.flagged, "{} residual {}", r.record_id, check.residual);
    }
}

// Brute-force geometric means of new/old over the shared machines.
#[test]
fn constant_factors_match_brute_force() {
    let records = load();
    let want = [
        (Suite::Spec1995, 0.04163115278018054),
        (Suite::Spec2000, 2.252156646430762),
        (Suite::Spec2006, 0.421365852185046),
    ];
    for (old, w) in want {
        let overlap = find_overlap(&records, old, old.next().unwrap(), ScoreKind::Speed).unwrap();
        assert_eq!(overlap.pairs.len(), 5);
        let f = constant_factor(&overlap).unwrap();
        assert!((f.factor / w - 1.0).abs() < 1e-12, "{old}: {} vs {w}", f.factor);
    }
}

#[test]
fn chain_normalizes_every_record() {
    let records = load();
    let chain = build_chain(&records, Suite::Spec2017, &ChainOptions::default()).unwrap();
    assert_eq!(chain.steps.len(), 3);
    let norm = chain_normalize(&records, &chain).unwrap();
    assert_eq!(norm.len(), 40);
    let f = 0.04163115278018054 * 2.252156646430762 * 0.421365852185046;
    assert!((chain.cumulative_factor(Suite::Spec1995).unwrap() / f - 1.0).abs() < 1e-12);
    for n in norm.iter().filter(|n| n.record.suite == Suite::Spec2017) {
        assert_eq!(Some(n.score), n.record.score_speed);
    }
}

#[test]
fn influence_on_fixture() {
    let report = influence_stats(&load(), Suite::Spec2006).unwrap();
    assert_eq!(report.n_records, 10);
    assert_eq!(report.micros.len(), 12);
    assert!(report.micros.windows(2).all(|w| w[0].log_variance >= w[1].log_variance));
}

#[test]
fn lineage_on_fixture() {
    let records = load();
    let chain = build_chain(&records, Suite::Spec2017, &ChainOptions::default()).unwrap();
    let norm = chain_normalize(&records, &chain).unwrap();
    let entries = parse_lineage(File::open(fixture("lineage.csv")).unwrap()).unwrap();
    let analysis = lineage_series(
        &entries,
        norm.iter().map(|n| (n.record.processor.as_str(), n.record.date, n.score)),
    )
    .unwrap();
    // netburst→haswell, haswell→alder-lake, gallatin→cascade-lake, bulldozer→zen2
    assert_eq!(analysis.pairs.len(), 4);
    let r = analysis.lag1_correlation.unwrap();
    assert!((-1.0..=1.0).contains(&r));
}
