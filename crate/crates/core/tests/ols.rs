use benchtrend::analysis::factor_regression;
use benchtrend::synth::rng;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const TRUTH: [f64; 3] = [-0.7, 0.03, 2.2];

fn sample(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let (mut y, mut c, mut a) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let ci = f64::from(r.random_range(1..=64u32));
        let ai = if r.random_bool(0.5) { 1.0 } else { 0.0 };
        y.push(TRUTH[0] + TRUTH[1] * ci + TRUTH[2] * ai + noise.sample(&mut r));
        c.push(ci);
        a.push(ai);
    }
    (y, c, a)
}

#[test]
fn interval_coverage_near_nominal() {
    let mut covered = [0usize; 3];
    for seed in 0..1000 {
        let (y, c, a) = sample(2000, seed);
        let fit = factor_regression(&y, &c, &a).unwrap();
        for (k, row) in fit.rows.iter().enumerate() {
            if row.ci_low <= TRUTH[k] && TRUTH[k] <= row.ci_high {
                covered[k] += 1;
            }
        }
    }
    for c in covered {
        assert!((930..=970).contains(&c), "coverage {covered:?}/1000");
    }
}

#[test]
fn table_layout() {
    let (y, c, a) = sample(300, 5);
    let text = factor_regression(&y, &c, &a).unwrap().to_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("Parameter"));
    assert!(lines[1].starts_with("Intercept"));
    assert!(lines[2].starts_with("No. of cores"));
    assert!(lines[3].starts_with("Auto-parallel"));
}

proptest! {
    #[test]
    fn exact_linear_data_recovered(b0 in -3.0f64..3.0, b1 in -0.1f64..0.1, b2 in -3.0f64..3.0, seed in 0u64..1000) {
        let (_, c, a) = sample(50, seed);
        prop_assume!(a.contains(&0.0) && a.contains(&1.0));
        let y: Vec<f64> = c.iter().zip(&a).map(|(ci, ai)| b0 + b1 * ci + b2 * ai).collect();
        let fit = factor_regression(&y, &c, &a).unwrap();
        for (row, want) in fit.rows.iter().zip([b0, b1, b2]) {
            prop_assert!((row.coef - want).abs() < 1e-9);
        }
    }
}
