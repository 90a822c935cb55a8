//! Bounded Nelder-Mead simplex search for low-dimensional smooth objectives.

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Initial simplex edge as a fraction of each bound range.
    pub initial_step: f64,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        NelderMead {
            lower,
            upper,
            max_evals: 400,
            f_tol: 1e-9,
            initial_step: 0.1,
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Minimize `f` from `start`. Non-finite objective values are treated as +inf.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, start: &[f64], mut f: F) -> Minimum {
        let d = start.len();
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };

        let mut x0 = start.to_vec();
        self.clamp(&mut x0);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        let v0 = eval(&x0, &mut evals);
        simplex.push((x0.clone(), v0));
        for i in 0..d {
            let mut x = x0.clone();
            let step = self.initial_step * (self.upper[i] - self.lower[i]);
            x[i] = if x[i] + step <= self.upper[i] { x[i] + step } else { x[i] - step };
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }

        let mut converged = false;
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[d].1);
            if worst.is_finite() && (worst - best).abs() <= self.f_tol * (1.0 + best.abs()) {
                converged = true;
                break;
            }
            let centroid: Vec<f64> = (0..d)
                .map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64)
                .collect();
            let along = |coef: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[d].0)
                    .map(|(c, w)| c + coef * (w - c))
                    .collect();
                self.clamp(&mut p);
                p
            };

            let xr = along(-1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evals);
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[d].1 {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < simplex[d].1.min(fr) {
                    simplex[d] = (xc, fc);
                } else {
                    let best_x = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = best_x.iter().zip(&item.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                        let v = eval(&x, &mut evals);
                        *item = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            evals,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let nm = NelderMead::new(vec![-10.0, -10.0], vec![10.0, 10.0]);
        let m = nm.minimize(&[5.0, -7.0], |x| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 2.0).powi(2));
        assert!(m.converged);
        assert!((m.x[0] - 1.5).abs() < 1e-3 && (m.x[1] + 2.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        let nm = NelderMead::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        let m = nm.minimize(&[0.5, 0.5], |x| -(x[0] + x[1]));
        assert!(m.x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((m.value + 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let mut nm = NelderMead::new(vec![-5.0, -5.0], vec![5.0, 5.0]);
        nm.max_evals = 5000;
        nm.f_tol = 1e-14;
        let m = nm.minimize(&[-1.2, 1.0], |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }
}
