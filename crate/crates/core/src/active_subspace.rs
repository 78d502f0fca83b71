//! One-dimensional active subspace from a global least-squares linear fit,
//! its bootstrap variability, and a gradient-based reference estimate.
//!
//! The direction is the normalized slope vector of the linear model
//! `f(x) ~ u0 + u1 x1 + ... + um xm` fitted to samples on `[-1, 1]^m`. No
//! gradients of `f` are needed; the C-matrix oracle below exists only to check
//! the estimate on synthetic functions whose gradient is known.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm1, norm2, Matrix, SymmetricEigen};
use crate::rng;

/// Samples per dimension the fit needs at minimum, and a rough recommendation.
pub fn required_samples(m: usize) -> usize {
    m + 1
}

/// Recommended sample count, roughly `m^2` (never below `2m`).
pub fn recommended_samples(m: usize) -> usize {
    (m * m).max(2 * m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    /// `[u0, u1, ..., um]`
    pub u_hat: Vec<f64>,
    pub residual_norm: f64,
    pub cond_estimate: f64,
}

impl LinearFit {
    pub fn gradient(&self) -> &[f64] {
        &self.u_hat[1..]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveSubspace {
    pub w: Vec<f64>,
    pub fit: LinearFit,
    #[serde(rename = "M")]
    pub samples: usize,
}

impl ActiveSubspace {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn active_variable(&self, x: &[f64]) -> f64 {
        dot(&self.w, x)
    }

    /// Range of `w^T x` over the hypercube: `[-|w|_1, |w|_1]`.
    pub fn domain(&self) -> (f64, f64) {
        let r = norm1(&self.w);
        (-r, r)
    }

    /// +1 when the linear fit increases along `w`, -1 otherwise.
    pub fn trend(&self) -> f64 {
        if dot(self.fit.gradient(), &self.w) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Flips `v` so that its largest-magnitude component (lowest index on ties)
/// is positive.
pub fn apply_sign_convention(v: &mut [f64]) {
    let mut lead = 0;
    for (i, a) in v.iter().enumerate() {
        if a.abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v.get(lead).is_some_and(|&a| a < 0.0) {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

/// `|cos|` of the angle between two vectors.
pub fn alignment(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).abs() / (norm2(a) * norm2(b))
}

fn design_matrix(xs: &[Vec<f64>], m: usize) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            if x.len() != m {
                return Err(Error::Dimension { expected: m, got: x.len() });
            }
            Ok(std::iter::once(1.0).chain(x.iter().copied()).collect())
        })
        .collect::<Result<_>>()?;
    Matrix::from_rows(&rows)
}

/// Least-squares fit returning the raw (un-normalized) linear model.
fn fit_linear(xs: &[Vec<f64>], fs: &[f64]) -> Result<LinearFit> {
    if xs.len() != fs.len() {
        return Err(Error::Dimension { expected: xs.len(), got: fs.len() });
    }
    let m = xs.first().map(Vec::len).ok_or(Error::Rank { rank: 0, required: 1 })?;
    if m == 0 {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    if xs.len() < required_samples(m) {
        return Err(Error::Rank {
            rank: xs.len(),
            required: required_samples(m),
        });
    }
    if fs.iter().any(|f| !f.is_finite()) {
        return Err(Error::Domain("non-finite response value".into()));
    }
    let a = design_matrix(xs, m)?;
    let ls = linalg::least_squares(&a, fs)?;
    Ok(LinearFit {
        u_hat: ls.coefficients,
        residual_norm: ls.residual_norm,
        cond_estimate: ls.condition,
    })
}

fn unit_gradient(fit: &LinearFit, fs: &[f64]) -> Result<Vec<f64>> {
    let scale = fs.iter().fold(0.0f64, |s, f| s.max(f.abs()));
    let spread = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - fs.iter().copied().fold(f64::INFINITY, f64::min);
    let g = fit.gradient();
    let gnorm = norm2(g);
    if spread <= 1e-14 * scale || gnorm <= 1e-14 * scale {
        return Err(Error::Degenerate("constant response: the linear fit has no slope".into()));
    }
    Ok(g.iter().map(|v| v / gnorm).collect())
}

/// Fits the linear model to `(x_j, f_j)` and normalizes its slope.
pub fn fit_active_direction(xs: &[Vec<f64>], fs: &[f64]) -> Result<ActiveSubspace> {
    let fit = fit_linear(xs, fs)?;
    let mut w = unit_gradient(&fit, fs)?;
    apply_sign_convention(&mut w);
    Ok(ActiveSubspace {
        w,
        fit,
        samples: xs.len(),
    })
}

/// Quantiles of one component across bootstrap replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSpread {
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapEnsemble {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    /// rank-deficient resamples that had to be redrawn
    pub redraws: usize,
    pub replicates: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile of sorted data (`0 <= q <= 1`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BootstrapEnsemble {
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.replicates.iter().map(|w| w[i]).collect()
    }

    pub fn spread(&self) -> Vec<ComponentSpread> {
        let m = self.replicates.first().map_or(0, Vec::len);
        (0..m)
            .map(|i| {
                let mut c = self.component(i);
                c.sort_by(f64::total_cmp);
                let mean = c.iter().sum::<f64>() / c.len() as f64;
                let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64;
                ComponentSpread {
                    q05: quantile_sorted(&c, 0.05),
                    q25: quantile_sorted(&c, 0.25),
                    median: quantile_sorted(&c, 0.5),
                    q75: quantile_sorted(&c, 0.75),
                    q95: quantile_sorted(&c, 0.95),
                    std: var.sqrt(),
                }
            })
            .collect()
    }
}

/// Redraw budget per requested replicate.
pub const BOOTSTRAP_RETRY_FACTOR: usize = 100;

/// Re-estimates the direction on `n` resamples (with replacement) of the rows.
///
/// Replicate `k` draws its resample indices from a stream keyed by
/// `(seed, k)`; a rank-deficient resample is redrawn from the same stream.
/// Each replicate is sign-aligned with `reference`.
pub fn bootstrap_direction(
    xs: &[Vec<f64>],
    fs: &[f64],
    reference: &ActiveSubspace,
    n: usize,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    use rand::Rng;

    if n == 0 {
        return Err(Error::Domain("bootstrap needs at least one replicate".into()));
    }
    let big_m = xs.len();
    if big_m != fs.len() {
        return Err(Error::Dimension { expected: big_m, got: fs.len() });
    }
    let budget = BOOTSTRAP_RETRY_FACTOR * n;
    let mut redraws = 0;
    let mut replicates = Vec::with_capacity(n);
    let mut rx = Vec::with_capacity(big_m);
    let mut rf = Vec::with_capacity(big_m);

    for k in 0..n {
        let mut stream = rng::stream(seed, rng::domain::BOOTSTRAP, k as u64);
        loop {
            rx.clear();
            rf.clear();
            for _ in 0..big_m {
                let j = stream.gen_range(0..big_m);
                rx.push(xs[j].clone());
                rf.push(fs[j]);
            }
            let attempt = fit_linear(&rx, &rf).and_then(|fit| unit_gradient(&fit, &rf));
            match attempt {
                Ok(mut w) => {
                    if dot(&w, &reference.w) < 0.0 {
                        w.iter_mut().for_each(|a| *a = -*a);
                    }
                    replicates.push(w);
                    break;
                }
                Err(Error::Rank { .. } | Error::Degenerate(_)) => {
                    redraws += 1;
                    if redraws > budget {
                        return Err(Error::BootstrapDegenerate(format!(
                            "{redraws} rank-deficient resamples exceeded the budget of {budget}; \
                             collect more samples (at least {} recommended)",
                            recommended_samples(reference.dim())
                        )));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(BootstrapEnsemble {
        n,
        seed,
        redraws,
        replicates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityEntry {
    pub index: usize,
    pub name: String,
    pub weight: f64,
    pub magnitude: f64,
}

/// Parameters ordered by `|w_i|`, largest first; ties keep index order.
pub fn sensitivity_ranking<S: AsRef<str>>(w: &[f64], names: &[S]) -> Result<Vec<SensitivityEntry>> {
    if names.len() != w.len() {
        return Err(Error::Dimension { expected: w.len(), got: names.len() });
    }
    let mut entries: Vec<SensitivityEntry> = w
        .iter()
        .zip(names)
        .enumerate()
        .map(|(index, (&weight, name))| SensitivityEntry {
            index,
            name: name.as_ref().to_string(),
            weight,
            magnitude: weight.abs(),
        })
        .collect();
    entries.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.index.cmp(&b.index)));
    Ok(entries)
}

/// Data behind the summary plot.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryData {
    /// `(w^T x_j, f_j)` in run order
    pub points: Vec<(f64, f64)>,
    /// `(w_k^T x_j, f_j)` for every replicate `k` and run `j`
    pub bootstrap_cloud: Option<Vec<(f64, f64)>>,
    /// adjacent pairs, after sorting by the active variable, that go against
    /// the fitted trend; zero means monotone
    pub discordant_pairs: usize,
}

impl SummaryData {
    /// CSV with header `y,f,source`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,f,source\n");
        for (y, f) in &self.points {
            out.push_str(&format!("{y},{f},sample\n"));
        }
        for (y, f) in self.bootstrap_cloud.iter().flatten() {
            out.push_str(&format!("{y},{f},bootstrap\n"));
        }
        out
    }
}

pub fn summary_data(
    xs: &[Vec<f64>],
    fs: &[f64],
    active: &ActiveSubspace,
    ensemble: Option<&BootstrapEnsemble>,
) -> Result<SummaryData> {
    if xs.len() != fs.len() {
        return Err(Error::Dimension { expected: xs.len(), got: fs.len() });
    }
    if let Some(x) = xs.iter().find(|x| x.len() != active.dim()) {
        return Err(Error::Dimension { expected: active.dim(), got: x.len() });
    }
    let points: Vec<(f64, f64)> = xs.iter().zip(fs).map(|(x, &f)| (active.active_variable(x), f)).collect();

    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let trend = active.trend();
    let discordant_pairs = sorted.windows(2).filter(|p| trend * (p[1].1 - p[0].1) < 0.0).count();

    let bootstrap_cloud = ensemble.map(|e| {
        e.replicates
            .iter()
            .flat_map(|wk| xs.iter().zip(fs).map(move |(x, &f)| (dot(wk, x), f)))
            .collect()
    });
    Ok(SummaryData {
        points,
        bootstrap_cloud,
        discordant_pairs,
    })
}

/// Monte Carlo estimate of `C = E[grad f grad f^T]` with its eigenpairs.
#[derive(Debug, Clone)]
pub struct CMatrixEstimate {
    pub c: Matrix,
    pub eigen: SymmetricEigen,
    pub n_mc: usize,
}

impl CMatrixEstimate {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Leading eigenvector under the same sign convention as [`ActiveSubspace::w`].
    pub fn leading_direction(&self) -> Vec<f64> {
        let mut v = self.eigen.vectors.column(0);
        apply_sign_convention(&mut v);
        v
    }
}

/// Reference estimate of the active direction from exact gradients, for
/// validating [`fit_active_direction`] on differentiable test functions.
pub fn estimate_c_gradient_oracle<G>(grad: G, m: usize, n_mc: usize, seed: u64) -> Result<CMatrixEstimate>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    if n_mc == 0 || m == 0 {
        return Err(Error::Domain("oracle needs m >= 1 and at least one Monte Carlo sample".into()));
    }
    let mut c = Matrix::zeros(m, m);
    for i in 0..n_mc {
        let x = rng::uniform_point(&mut rng::stream(seed, rng::domain::C_ORACLE, i as u64), m);
        let g = grad(&x);
        if g.len() != m {
            return Err(Error::Dimension { expected: m, got: g.len() });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite gradient at sample {i}")));
        }
        for r in 0..m {
            for s in r..m {
                c[(r, s)] += g[r] * g[s];
            }
        }
    }
    let inv = 1.0 / n_mc as f64;
    for r in 0..m {
        for s in r..m {
            let v = c[(r, s)] * inv;
            c[(r, s)] = v;
            c[(s, r)] = v;
        }
    }
    let eigen = linalg::symmetric_eigen(&c)?;
    Ok(CMatrixEstimate { c, eigen, n_mc })
}
