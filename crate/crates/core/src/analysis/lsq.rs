use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once the relative parameter step falls below this.
    pub step_tolerance: f64,
    /// Stop once the relative cost decrease falls below this.
    pub cost_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tolerance: 1e-14,
            cost_tolerance: 1e-20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    /// `J^T J` at the optimum.
    pub normal_matrix: DMatrix<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub n_residuals: usize,
}

/// Levenberg-Marquardt for `min |r(p)|^2`. `model` returns the residual
/// vector and its Jacobian.
pub fn levenberg_marquardt<F>(mut model: F, initial: DVector<f64>, options: LmOptions) -> Result<LmOutcome>
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut p = initial;
    let (mut r, mut j) = model(&p);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::param("initial", "model is not finite at the starting point"));
    }
    let mut lambda = 1e-3;
    let mut history = vec![cost];
    for iteration in 1..=options.max_iterations {
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &p + &step;
            let (tr, tj) = model(&trial);
            let tcost = tr.norm_squared();
            if tcost.is_finite() && tcost <= cost {
                let rel_step = step.norm() / (p.norm() + 1e-300);
                let rel_cost = (cost - tcost) / cost.max(1e-300);
                p = trial;
                r = tr;
                j = tj;
                cost = tcost;
                lambda = (lambda * 0.3).max(1e-15);
                accepted = true;
                small_step = rel_step < options.step_tolerance || rel_cost < options.cost_tolerance;
                break;
            }
            lambda *= 10.0;
        }
        history.push(cost);
        if !accepted || small_step || cost == 0.0 {
            // no downhill step remains: converged to machine precision
            let normal_matrix = j.transpose() * &j;
            return Ok(LmOutcome {
                params: p,
                normal_matrix,
                cost,
                cost_history: history,
                iterations: iteration,
                n_residuals: r.len(),
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let out = levenberg_marquardt(
            |p| {
                let r = DVector::from_iterator(4, xs.iter().zip(&ys).map(|(x, y)| p[0] + p[1] * x - y));
                let j = DMatrix::from_fn(4, 2, |i, k| if k == 0 { 1.0 } else { xs[i] });
                (r, j)
            },
            DVector::from_vec(vec![0.0, 0.0]),
            LmOptions::default(),
        )
        .unwrap();
        assert!((out.params[0] - 1.0).abs() < 1e-10);
        assert!((out.params[1] - 2.0).abs() < 1e-10);
        assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn iteration_cap() {
        let opts = LmOptions {
            max_iterations: 1,
            step_tolerance: 0.0,
            cost_tolerance: 0.0,
        };
        let res = levenberg_marquardt(
            |p| {
                let r = DVector::from_vec(vec![p[0].exp() - 2.0, p[0] - 0.1]);
                let j = DMatrix::from_vec(2, 1, vec![p[0].exp(), 1.0]);
                (r, j)
            },
            DVector::from_vec(vec![5.0]),
            opts,
        );
        assert!(matches!(res, Err(Error::NoConvergence { iterations: 1 })));
    }
}
