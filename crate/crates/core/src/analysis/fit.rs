use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lsq::{levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};

/// Named parameters with 1-sigma uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub uncertainties: Vec<f64>,
    /// sqrt of the (weighted) residual sum of squares.
    pub residual_norm: f64,
    /// Reduced chi-square when weights are given, else residual variance.
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.params[i], self.uncertainties[i]))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map(|(v, _)| v).unwrap_or(f64::NAN)
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.get(name).map(|(_, s)| s).unwrap_or(f64::NAN)
    }
}

/// One (length, variance) observation, optionally with its 1-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawPoint {
    pub length_km: f64,
    pub variance: f64,
    pub sigma: Option<f64>,
}

/// Parameter covariance from the normal matrix. With absolute weights it is
/// `(J^T W J)^-1`; otherwise it is scaled by the residual variance.
pub(crate) fn covariance(normal: &DMatrix<f64>, cost: f64, n: usize, weighted: bool) -> Result<DMatrix<f64>> {
    let p = normal.nrows();
    let inv = normal
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateDesign("singular normal matrix at the optimum".into()))?;
    if weighted {
        Ok(inv)
    } else {
        let dof = n.saturating_sub(p).max(1);
        Ok(inv * (cost / dof as f64))
    }
}

/// Least-squares fit of `a L^b` (or `a L^b + c` with `with_offset`).
///
/// Internally fits `ln a` so `a` stays positive; starts from `b = 3` with `a`
/// set by the shortest and longest lengths.
pub fn fit_power_law(points: &[PowerLawPoint], with_offset: bool) -> Result<FitResult> {
    let needed = if with_offset { 4 } else { 3 };
    if points.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{} points, need at least {needed}",
            points.len()
        )));
    }
    for p in points {
        if !(p.length_km > 0.0 && p.length_km.is_finite()) {
            return Err(Error::param("length_km", format!("{} must be > 0", p.length_km)));
        }
        if !p.variance.is_finite() {
            return Err(Error::param("variance", "must be finite"));
        }
        if let Some(s) = p.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param("sigma", format!("{s} must be > 0")));
            }
        }
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.length_km).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 + with_offset as usize {
        return Err(Error::DegenerateDesign(format!(
            "{} distinct lengths cannot constrain the power law",
            distinct.len()
        )));
    }
    let weighted = points.iter().all(|p| p.sigma.is_some());
    let weights: Vec<f64> = points.iter().map(|p| if weighted { 1.0 / p.sigma.unwrap() } else { 1.0 }).collect();

    let shortest = points.iter().min_by(|a, b| a.length_km.total_cmp(&b.length_km)).unwrap();
    let longest = points.iter().max_by(|a, b| a.length_km.total_cmp(&b.length_km)).unwrap();
    let b0 = 3.0;
    let a_from = |p: &PowerLawPoint| p.variance.abs().max(1e-300) / p.length_km.powf(b0);
    let a0 = (a_from(shortest) * a_from(longest)).sqrt();
    let mut init = vec![a0.ln(), b0];
    if with_offset {
        init.push(0.0);
    }
    let m = points.len();
    let k = init.len();
    let model = |p: &DVector<f64>| {
        let a = p[0].exp();
        let b = p[1];
        let c = if with_offset { p[2] } else { 0.0 };
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, k);
        for (i, pt) in points.iter().enumerate() {
            let ll = pt.length_km.ln();
            let f = a * (b * ll).exp();
            let w = weights[i];
            r[i] = w * (f + c - pt.variance);
            j[(i, 0)] = w * f;
            j[(i, 1)] = w * f * ll;
            if with_offset {
                j[(i, 2)] = w;
            }
        }
        (r, j)
    };
    let out = levenberg_marquardt(model, DVector::from_vec(init), LmOptions::default())?;
    let cov = covariance(&out.normal_matrix, out.cost, m, weighted)?;
    let a = out.params[0].exp();
    let mut names = vec!["a".to_string(), "b".to_string()];
    let mut params = vec![a, out.params[1]];
    let mut unc = vec![a * cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].max(0.0).sqrt()];
    if with_offset {
        names.push("c".into());
        params.push(out.params[2]);
        unc.push(cov[(2, 2)].max(0.0).sqrt());
    }
    let dof = m.saturating_sub(k).max(1);
    Ok(FitResult {
        names,
        params,
        uncertainties: unc,
        residual_norm: out.cost.sqrt(),
        reduced_chi2: out.cost / dof as f64,
        iterations: out.iterations,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exact(a: f64, b: f64, c: f64) -> Vec<PowerLawPoint> {
        [5.0, 25.0, 50.0, 75.0, 100.0, 125.0]
            .iter()
            .map(|&l| PowerLawPoint {
                length_km: l,
                variance: a * f64::powf(l, b) + c,
                sigma: None,
            })
            .collect()
    }

    #[test]
    fn exact_cubic() {
        let f = fit_power_law(&exact(1e-7, 3.0, 0.0), false).unwrap();
        assert!((f.value("a") / 1e-7 - 1.0).abs() < 1e-6);
        assert!((f.value("b") - 3.0).abs() < 1e-6);
    }

    #[test]
    fn exact_with_offset() {
        let f = fit_power_law(&exact(6.2e-8, 2.6, 0.0073), true).unwrap();
        assert!((f.value("a") / 6.2e-8 - 1.0).abs() < 1e-6);
        assert!((f.value("b") - 2.6).abs() < 1e-6);
        assert!((f.value("c") - 0.0073).abs() < 1e-8);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        let same: Vec<PowerLawPoint> = (0..5)
            .map(|i| PowerLawPoint {
                length_km: 10.0,
                variance: i as f64,
                sigma: None,
            })
            .collect();
        assert!(matches!(fit_power_law(&same, false), Err(Error::DegenerateDesign(_))));
        assert!(matches!(fit_power_law(&exact(1e-7, 3.0, 0.0)[..2], false), Err(Error::InsufficientData(_))));
        assert!(matches!(fit_power_law(&exact(1e-7, 3.0, 0.0)[..3], true), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recovers_noise_free(log_a in -12.0f64..0.0, b in 1.0f64..4.0) {
            let a = 10f64.powf(log_a);
            let f = fit_power_law(&exact(a, b, 0.0), false).unwrap();
            prop_assert!((f.value("a") / a - 1.0).abs() < 1e-6);
            prop_assert!((f.value("b") / b - 1.0).abs() < 1e-6);
            prop_assert!(f.uncertainties.iter().all(|u| *u >= 0.0));
        }
    }
}
