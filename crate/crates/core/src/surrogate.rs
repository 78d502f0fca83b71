//! Quadratic link function `g(y) = c0 + c1 y + c2 y^2` of the active variable.
//!
//! The upper bound is the one-sided mean-response confidence band of the
//! regression curve. Responses from a deterministic simulation carry no
//! random noise, so the bound is a conservative margin, not a probability
//! statement.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticSurrogate {
    pub coeffs: [f64; 3],
    /// `RSS / (M - 3)`; absent when `M = 3`
    pub sigma2_hat: Option<f64>,
    /// `(T^T T)^{-1}` for design rows `[1, y, y^2]`
    pub gram_inverse: [[f64; 3]; 3],
    #[serde(rename = "M")]
    pub samples: usize,
    pub r_squared: f64,
    /// set when all responses are equal and `R^2` is reported as 1 by convention
    pub constant_response: bool,
    pub y_domain: (f64, f64),
}

fn features(y: f64) -> [f64; 3] {
    [1.0, y, y * y]
}

/// Distinct abscissae after exact comparison.
fn distinct_count(ys: &[f64]) -> usize {
    let mut v: Vec<f64> = ys.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Least-squares quadratic through `(y_j, f_j)`.
///
/// `y_domain` is the interval the active variable can take (for an active
/// direction `w`, `[-|w|_1, |w|_1]`); predictions outside it are
/// extrapolations.
pub fn fit_quadratic(points: &[(f64, f64)], y_domain: (f64, f64)) -> Result<QuadraticSurrogate> {
    let ys: Vec<f64> = points.iter().map(|p| p.0).collect();
    let fs: Vec<f64> = points.iter().map(|p| p.1).collect();
    if points.iter().any(|(y, f)| !y.is_finite() || !f.is_finite()) {
        return Err(Error::Domain("non-finite point passed to the quadratic fit".into()));
    }
    let distinct = distinct_count(&ys);
    if distinct < 3 {
        return Err(Error::Rank { rank: distinct, required: 3 });
    }
    let rows: Vec<[f64; 3]> = ys.iter().map(|&y| features(y)).collect();
    let design = Matrix::from_rows(&rows)?;
    let ls = linalg::least_squares(&design, &fs)?;

    let n = points.len();
    let rss: f64 = ls.residuals.iter().map(|r| r * r).sum();
    let mean = fs.iter().sum::<f64>() / n as f64;
    let tss: f64 = fs.iter().map(|f| (f - mean).powi(2)).sum();
    let constant_response = tss == 0.0;
    let r_squared = if constant_response { 1.0 } else { 1.0 - rss / tss };
    let sigma2_hat = (n > 3).then(|| rss / (n - 3) as f64);

    let g = ls.gram_inverse();
    let mut gram_inverse = [[0.0; 3]; 3];
    for (i, row) in gram_inverse.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // symmetrize
            *v = 0.5 * (g[(i, j)] + g[(j, i)]);
        }
    }
    let c = &ls.coefficients;
    Ok(QuadraticSurrogate {
        coeffs: [c[0], c[1], c[2]],
        sigma2_hat,
        gram_inverse,
        samples: n,
        r_squared,
        constant_response,
        y_domain,
    })
}

impl QuadraticSurrogate {
    pub fn predict(&self, y: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        c0 + y * (c1 + y * c2)
    }

    pub fn in_domain(&self, y: f64) -> bool {
        self.y_domain.0 <= y && y <= self.y_domain.1
    }

    /// `t(y)^T (T^T T)^{-1} t(y)`, always positive.
    pub fn leverage(&self, y: f64) -> f64 {
        let t = features(y);
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += t[i] * self.gram_inverse[i][j] * t[j];
            }
        }
        acc
    }

    /// Student-t quantile at `level` with `M - 3` degrees of freedom.
    pub fn t_quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.5 && level < 1.0) {
            return Err(Error::Domain(format!("confidence level {level} must lie in (0.5, 1)")));
        }
        if self.samples <= 3 {
            return Err(Error::Unavailable("no residual degrees of freedom (M = 3)".into()));
        }
        let dist = StudentsT::new(0.0, 1.0, (self.samples - 3) as f64)
            .map_err(|e| Error::Domain(e.to_string()))?;
        Ok(dist.inverse_cdf(level))
    }

    /// Half-width of the one-sided band at `y`.
    pub fn band_half_width(&self, y: f64, level: f64) -> Result<f64> {
        let sigma2 = self
            .sigma2_hat
            .ok_or_else(|| Error::Unavailable("residual variance undefined with M = 3".into()))?;
        let t = self.t_quantile(level)?;
        Ok(t * (sigma2 * self.leverage(y).max(0.0)).sqrt())
    }

    /// `predict(y) + t_{level, M-3} * sqrt(sigma2_hat * leverage(y))`.
    pub fn upper_confidence(&self, y: f64, level: f64) -> Result<f64> {
        Ok(self.predict(y) + self.band_half_width(y, level)?)
    }

    /// [`Self::upper_confidence`] at a fixed level, with the quantile computed once.
    pub fn upper_confidence_fn(&self, level: f64) -> Result<impl Fn(f64) -> f64 + '_> {
        let sigma2 = self
            .sigma2_hat
            .ok_or_else(|| Error::Unavailable("residual variance undefined with M = 3".into()))?;
        let t = self.t_quantile(level)?;
        Ok(move |y: f64| self.predict(y) + t * (sigma2 * self.leverage(y).max(0.0)).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn quad(y: f64) -> f64 {
        2.0 + 0.5 * y + 0.1 * y * y
    }

    fn noisy_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
        // 1% of the response range on [-1, 1]
        let range = quad(1.0) - quad(-1.0);
        (0..n)
            .map(|j| {
                let y = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
                (y, quad(y) + 0.01 * range * rng::hash_unit([seed, j as u64]))
            })
            .collect()
    }

    #[test]
    fn exact_quadratic_recovered() {
        let pts: Vec<(f64, f64)> = (0..10).map(|j| {
            let y = -1.0 + 0.2 * j as f64 + 0.03;
            (y, quad(y))
        }).collect();
        let s = fit_quadratic(&pts, (-1.0, 1.0)).unwrap();
        for (c, want) in s.coeffs.iter().zip([2.0, 0.5, 0.1]) {
            assert!((c - want).abs() < 1e-10);
        }
        assert!((s.r_squared - 1.0).abs() < 1e-10);
        for &y in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
            let ub = s.upper_confidence(y, 0.99).unwrap();
            assert!((ub - s.predict(y)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_data_is_flagged() {
        let pts: Vec<(f64, f64)> = (0..6).map(|j| (j as f64 * 0.3 - 0.8, 1.5)).collect();
        let s = fit_quadratic(&pts, (-1.0, 1.0)).unwrap();
        assert!((s.coeffs[0] - 1.5).abs() < 1e-12);
        assert!(s.coeffs[1].abs() < 1e-12 && s.coeffs[2].abs() < 1e-12);
        assert_eq!(s.r_squared, 1.0);
        assert!(s.constant_response);
    }

    #[test]
    fn rank_and_degenerate_counts() {
        let two = [(0.0, 1.0), (1.0, 2.0), (0.0, 1.5), (1.0, 2.5)];
        assert!(matches!(fit_quadratic(&two, (-1.0, 1.0)), Err(Error::Rank { rank: 2, required: 3 })));
        let three = [(0.0, 1.0), (0.5, 2.0), (1.0, 4.0)];
        let s = fit_quadratic(&three, (-1.0, 1.0)).unwrap();
        assert!(s.sigma2_hat.is_none());
        assert!(matches!(s.upper_confidence(0.2, 0.99), Err(Error::Unavailable(_))));
        assert!((s.predict(0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn predict_arithmetic() {
        let mut s = fit_quadratic(&[(0.0, 1.0), (0.5, 2.0), (1.0, 4.0), (2.0, 3.0)], (-1.0, 1.0)).unwrap();
        s.coeffs = [1.0, 0.0, 0.0];
        assert_eq!(s.predict(123.0), 1.0);
        s.coeffs = [0.0, 1.0, 0.0];
        assert_eq!(s.predict(0.5), 0.5);
        s.coeffs = [2.0, 0.5, 0.1];
        assert!((s.predict(-1.0) - 1.6).abs() < 1e-15);
        assert!(!s.in_domain(1.5));
    }

    #[test]
    fn noisy_fit_quality_and_band_shape() {
        let pts = noisy_points(50, 3);
        let s = fit_quadratic(&pts, (-1.0, 1.0)).unwrap();
        assert!(s.r_squared >= 0.99, "R^2 = {}", s.r_squared);
        let b99 = s.band_half_width(0.0, 0.99).unwrap();
        let b95 = s.band_half_width(0.0, 0.95).unwrap();
        assert!(b99 >= b95 && b95 > 0.0);
        let ymean = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        assert!(s.band_half_width(ymean, 0.99).unwrap() < s.band_half_width(1.0, 0.99).unwrap());
        assert!(s.upper_confidence(0.4, 0.99).unwrap() >= s.predict(0.4));
        let ucb = s.upper_confidence_fn(0.99).unwrap();
        assert_eq!(ucb(0.4), s.upper_confidence(0.4, 0.99).unwrap());
        assert!(s.t_quantile(0.4).is_err());
        assert!(s.t_quantile(1.0).is_err());
    }

    #[test]
    fn t_quantiles_match_tables() {
        // reference values from standard t tables
        let mk = |m: usize| fit_quadratic(&noisy_points(m, 1), (-1.0, 1.0)).unwrap();
        assert!((mk(13).t_quantile(0.99).unwrap() - 2.763_769).abs() < 1e-5);
        assert!((mk(4).t_quantile(0.975).unwrap() - 12.706_205).abs() < 1e-5);
        assert!((mk(50).t_quantile(0.99).unwrap() - 2.408_345).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn shift_and_scale(b in -100.0f64..100.0, c in 0.01f64..50.0, seed in 0u64..500, y in -1.5f64..1.5) {
            let pts = noisy_points(20, seed);
            let base = fit_quadratic(&pts, (-1.0, 1.0)).unwrap();
            let shifted: Vec<(f64, f64)> = pts.iter().map(|&(y, f)| (y, f + b)).collect();
            let s = fit_quadratic(&shifted, (-1.0, 1.0)).unwrap();
            let tol = 1e-10 * (1.0 + b.abs());
            prop_assert!((s.coeffs[0] - base.coeffs[0] - b).abs() <= tol);
            prop_assert!((s.coeffs[1] - base.coeffs[1]).abs() <= tol);
            prop_assert!((s.coeffs[2] - base.coeffs[2]).abs() <= tol);
            prop_assert!((s.r_squared - base.r_squared).abs() <= 1e-10);
            let w0 = base.band_half_width(y, 0.99).unwrap();
            prop_assert!((s.band_half_width(y, 0.99).unwrap() - w0).abs() <= tol);

            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(y, f)| (y, c * f)).collect();
            let s = fit_quadratic(&scaled, (-1.0, 1.0)).unwrap();
            for k in 0..3 {
                prop_assert!((s.coeffs[k] - c * base.coeffs[k]).abs() <= 1e-10 * c * (1.0 + base.coeffs[k].abs()));
            }
            prop_assert!((s.r_squared - base.r_squared).abs() <= 1e-10);
            prop_assert!((s.band_half_width(y, 0.99).unwrap() - c * w0).abs() <= 1e-9 * c * (1.0 + w0));
            prop_assert!(base.leverage(y) > 0.0);
        }
    }
}
