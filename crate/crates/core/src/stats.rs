//! Small descriptive statistics and an ordinary-least-squares solver shared by the
//! normalization and analysis modules.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Pearson correlation, or `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Coefficient of determination of `predicted` against `observed`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> f64 {
    let m = mean(observed);
    let ss_tot: f64 = observed.iter().map(|y| (y - m).powi(2)).sum();
    let ss_res: f64 = observed.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    }
    1.0 - ss_res / ss_tot
}

/// Two-sided standard-normal quantile for a central interval of the given coverage.
pub fn normal_quantile_two_sided(level: f64) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// Two-sided p-value for a t statistic: normal approximation when n > 200,
/// Student-t with `dof` degrees of freedom otherwise.
pub fn two_sided_p_value(t: f64, n: usize, dof: usize) -> f64 {
    let tail = if n > 200 || dof == 0 {
        Normal::standard().cdf(-t.abs())
    } else {
        StudentsT::new(0.0, 1.0, dof as f64)
            .map(|d| d.cdf(-t.abs()))
            .unwrap_or_else(|_| Normal::standard().cdf(-t.abs()))
    };
    (2.0 * tail).min(1.0)
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// RSS / (n - p).
    pub residual_variance: f64,
    pub rss: f64,
    pub n: usize,
    /// (XᵀX)⁻¹, row-major p×p.
    pub xtx_inv: Vec<f64>,
}

impl OlsFit {
    pub fn dof(&self) -> usize {
        self.n - self.coefficients.len()
    }
}

/// Ordinary least squares of `y` on the named columns (include an intercept column
/// explicitly if wanted). Columns are screened in order with Gram-Schmidt so a
/// rank-deficient design names the first offending column.
pub fn ols(columns: &[(&str, &[f64])], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    let p = columns.len();
    if p == 0 {
        return Err(Error::InvalidArgument("design has no columns".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} observations cannot determine {p} coefficients"
        )));
    }
    for (name, col) in columns {
        if col.len() != n {
            return Err(Error::InvalidArgument(format!("column `{name}` has {} rows, expected {n}", col.len())));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("column `{name}` has non-finite values")));
        }
    }

    let x = DMatrix::from_fn(n, p, |i, j| columns[j].1[i]);
    check_rank(&x, columns)?;

    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let residual_variance = rss / (n - p) as f64;
    let std_errors = (0..p).map(|j| (residual_variance * xtx_inv[(j, j)]).sqrt()).collect();

    Ok(OlsFit {
        names: columns.iter().map(|(n, _)| n.to_string()).collect(),
        coefficients: beta.iter().copied().collect(),
        std_errors,
        residual_variance,
        rss,
        n,
        xtx_inv: xtx_inv.transpose().iter().copied().collect(),
    })
}

fn check_rank(x: &DMatrix<f64>, columns: &[(&str, &[f64])]) -> Result<()> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(x.ncols());
    for (j, (name, _)) in columns.iter().enumerate() {
        let mut v = x.column(j).into_owned();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return Err(Error::RankDeficient(name.to_string()));
        }
        // Two passes of modified Gram-Schmidt for stability.
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v -= q * proj;
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * norm0 {
            return Err(Error::RankDeficient(name.to_string()));
        }
        basis.push(v / norm);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_edge_cases() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), Some(1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), None);
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        assert!((normal_quantile_two_sided(0.95) - 1.959964).abs() < 1e-6);
        assert!((normal_quantile_two_sided(0.80) - 1.281552).abs() < 1e-6);
    }

    #[test]
    fn ols_exact_line() {
        let one = vec![1.0; 5];
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = ols(&[("intercept", &one), ("x", &x)], &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn ols_names_collinear_column() {
        let one = vec![1.0; 6];
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let err = ols(&[("intercept", &one), ("x", &x), ("x2", &x2)], &x).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref c) if c == "x2"), "{err}");

        let constant = vec![4.0; 6];
        let err = ols(&[("intercept", &one), ("cores", &constant)], &x).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref c) if c == "cores"), "{err}");
    }

    #[test]
    fn ols_underdetermined() {
        let one = vec![1.0; 3];
        let a = [1.0, 2.0, 3.0];
        let b = [1.0, 0.0, 1.0];
        assert!(matches!(
            ols(&[("intercept", &one), ("a", &a), ("b", &b)], &a),
            Err(Error::InsufficientData(_))
        ));
    }
}
