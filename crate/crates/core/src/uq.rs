//! Uncertainty quantification on top of a one-dimensional active subspace:
//! output range from the two extreme hypercube corners, the safe input set
//! under an output threshold with its largest inscribed box, and the output
//! CDF through the quadratic surrogate.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm1};
use crate::param_space::ParameterSpace;
use crate::rng;
use crate::surrogate::QuadraticSurrogate;

/// Corners of `[-1, 1]^m` minimizing and maximizing `w^T x`.
///
/// A zero component goes to `+1` in `x_max`.
pub fn corner_extrema(w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let x_max: Vec<f64> = w.iter().map(|&wi| if wi < 0.0 { -1.0 } else { 1.0 }).collect();
    let x_min = x_max.iter().map(|v| -v).collect();
    (x_min, x_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RangeEstimate {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    /// QoI at `x_min` and `x_max`
    pub f_at_x_min: f64,
    pub f_at_x_max: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// every sample response lies in `[f_min, f_max]`
    pub validated: bool,
    /// the summary plot was not monotone, so the corner heuristic is suspect
    pub monotone_caveat: bool,
}

/// Corner evaluation failed; whatever was computed is kept.
#[derive(Debug, thiserror::Error)]
#[error("corner evaluation failed: {error}")]
pub struct RangeFailure {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub f_at_x_min: Option<f64>,
    pub f_at_x_max: Option<f64>,
    #[source]
    pub error: Error,
}

/// Evaluates the black box at both corners and checks the bracket.
///
/// `discordant_pairs` comes from the summary data; a nonzero count sets the
/// monotonicity caveat.
pub fn estimate_range<E>(
    w: &[f64],
    sample_f: &[f64],
    discordant_pairs: usize,
    mut evaluate: E,
) -> std::result::Result<RangeEstimate, RangeFailure>
where
    E: FnMut(&[f64]) -> Result<f64>,
{
    let (x_min, x_max) = corner_extrema(w);
    let lo = match evaluate(&x_min) {
        Ok(v) => v,
        Err(error) => {
            return Err(RangeFailure { x_min, x_max, f_at_x_min: None, f_at_x_max: None, error });
        }
    };
    let hi = match evaluate(&x_max) {
        Ok(v) => v,
        Err(error) => {
            return Err(RangeFailure { x_min, x_max, f_at_x_min: Some(lo), f_at_x_max: None, error });
        }
    };
    let (f_min, f_max) = (lo.min(hi), lo.max(hi));
    let validated = sample_f.iter().all(|&f| f_min <= f && f <= f_max);
    Ok(RangeEstimate {
        x_min,
        x_max,
        f_at_x_min: lo,
        f_at_x_max: hi,
        f_min,
        f_max,
        validated,
        monotone_caveat: discordant_pairs > 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    Empty,
    Partial,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafeSetResult {
    pub threshold: f64,
    pub level: f64,
    pub y_max: f64,
    pub feasible: Feasibility,
    /// corner of the hypercube the safe box is anchored at
    pub x_min: Vec<f64>,
    /// side lengths in normalized units, each in `[0, 2]`
    pub box_sides: Vec<f64>,
}

/// Per-parameter interval of the inscribed safe box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafeRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub units: String,
    pub original_min: f64,
    pub original_max: f64,
    /// false when the safety constraint leaves the full range
    pub restricted: bool,
}

impl SafeSetResult {
    /// Normalized corner of the box opposite `x_min`.
    pub fn box_corner(&self) -> Vec<f64> {
        self.x_min.iter().zip(&self.box_sides).map(|(x, s)| x * (1.0 - s)).collect()
    }

    /// `true` when `x` lies in `{x : w^T x <= y_max} ∩ [-1, 1]^m`.
    pub fn contains(&self, w: &[f64], x: &[f64]) -> bool {
        self.feasible != Feasibility::Empty
            && x.iter().all(|v| (-1.0..=1.0).contains(v))
            && dot(w, x) <= self.y_max
    }

    pub fn normalized_ranges(&self) -> Vec<(f64, f64)> {
        self.x_min
            .iter()
            .zip(self.box_corner())
            .map(|(&a, b)| (a.min(b), a.max(b)))
            .collect()
    }

    pub fn safe_ranges(&self, space: &ParameterSpace) -> Result<Vec<SafeRange>> {
        let ranges = self.normalized_ranges();
        let lo = space.denormalize(&ranges.iter().map(|r| r.0).collect::<Vec<_>>())?;
        let hi = space.denormalize(&ranges.iter().map(|r| r.1).collect::<Vec<_>>())?;
        Ok(space
            .params()
            .iter()
            .enumerate()
            .map(|(i, p)| SafeRange {
                name: p.name.clone(),
                min: lo[i],
                max: hi[i],
                units: p.units.clone(),
                original_min: p.min,
                original_max: p.max,
                restricted: self.box_sides[i] < 2.0,
            })
            .collect())
    }
}

/// Points in the coarse scan of the active-variable domain.
pub const SAFE_SET_SCAN_POINTS: usize = 2048;

/// Largest `y` such that the surrogate's upper confidence bound stays at or
/// below `threshold` on the whole interval `[-|w|_1, y]`, followed by the
/// largest box inside the resulting safe set.
pub fn invert_safe_set(
    surrogate: &QuadraticSurrogate,
    w: &[f64],
    threshold: f64,
    level: f64,
) -> Result<SafeSetResult> {
    if !threshold.is_finite() {
        return Err(Error::Domain("threshold must be finite".into()));
    }
    let (x_min, _) = corner_extrema(w);
    let half = norm1(w);
    let (lo, hi) = (-half, half);
    let ucb = surrogate.upper_confidence_fn(level)?;

    let result = |y_max: f64, feasible: Feasibility, box_sides: Vec<f64>| SafeSetResult {
        threshold,
        level,
        y_max,
        feasible,
        x_min: x_min.clone(),
        box_sides,
    };

    if ucb(lo) > threshold {
        return Ok(result(lo, Feasibility::Empty, vec![0.0; w.len()]));
    }
    let n = SAFE_SET_SCAN_POINTS;
    let at = |k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
    let mut crossing = None;
    for k in 1..n {
        if ucb(at(k)) > threshold {
            crossing = Some(k);
            break;
        }
    }
    let Some(k) = crossing else {
        return Ok(result(hi, Feasibility::Full, vec![2.0; w.len()]));
    };

    let (mut a, mut b) = (at(k - 1), at(k));
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if ucb(mid) <= threshold {
            a = mid;
        } else {
            b = mid;
        }
    }
    let sides = inscribed_box(w, a, &x_min).sides;
    Ok(result(a, Feasibility::Partial, sides))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSides {
    pub sides: Vec<f64>,
    /// the budget was negative, so no box fits
    pub empty: bool,
}

/// Largest-volume box anchored at the corner `x_min` inside
/// `{x : w^T x <= y_max} ∩ [-1, 1]^m`.
///
/// Maximizes `sum(log s_i)` subject to `sum(|w_i| s_i) <= y_max - w^T x_min`
/// and `0 <= s_i <= 2`. The optimum gives every unsaturated side the same
/// share `lambda = |w_i| s_i` of the budget; zero-weight sides cost nothing
/// and are always 2.
pub fn inscribed_box(w: &[f64], y_max: f64, x_min: &[f64]) -> BoxSides {
    let m = w.len();
    let budget = y_max - dot(w, x_min);
    if budget < 0.0 {
        return BoxSides { sides: vec![0.0; m], empty: true };
    }
    let costs: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    let full_cost: f64 = costs.iter().map(|c| 2.0 * c).sum();
    if full_cost <= budget {
        return BoxSides { sides: vec![2.0; m], empty: false };
    }

    // saturation levels 2|w_i|, ascending
    let mut caps: Vec<f64> = costs.iter().filter(|&&c| c > 0.0).map(|c| 2.0 * c).collect();
    caps.sort_by(f64::total_cmp);
    let active = caps.len();
    let mut spent = 0.0;
    let mut lambda = 0.0;
    for (k, &cap) in caps.iter().enumerate() {
        let share = (budget - spent) / (active - k) as f64;
        if share <= cap {
            lambda = share;
            break;
        }
        spent += cap;
    }
    let sides = costs
        .iter()
        .map(|&c| if c == 0.0 { 2.0 } else { (lambda / c).min(2.0) })
        .collect();
    BoxSides { sides, empty: false }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfOptions {
    pub n_samples: usize,
    pub grid_size: usize,
    /// kernel bandwidth; Silverman's rule when `None`
    pub bandwidth: Option<f64>,
    /// grid margin beyond the sample extremes, in bandwidths
    pub margin: f64,
}

impl Default for CdfOptions {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            grid_size: 512,
            bandwidth: None,
            margin: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfEstimate {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub n_samples: usize,
    /// zero for a degenerate (constant) output, where the CDF is a step
    pub bandwidth: f64,
    samples: Vec<f64>,
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Silverman's rule of thumb, `1.06 * sd * n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

impl CdfEstimate {
    /// Smoothed CDF at `q`; for a degenerate output, the step with value 0.5
    /// at the atom.
    pub fn evaluate(&self, q: f64) -> f64 {
        let n = self.samples.len() as f64;
        if self.bandwidth == 0.0 {
            return self
                .samples
                .iter()
                .map(|&g| match q.total_cmp(&g) {
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Greater => 1.0,
                })
                .sum::<f64>()
                / n;
        }
        self.samples
            .iter()
            .map(|&g| standard_normal_cdf((q - g) / self.bandwidth))
            .sum::<f64>()
            / n
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// CSV with header `q,cdf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,cdf\n");
        for (q, c) in self.grid.iter().zip(&self.cdf) {
            out.push_str(&format!("{q},{c}\n"));
        }
        out
    }
}

/// Pushes uniform input samples through the surrogate and smooths the output
/// with a Gaussian kernel.
pub fn estimate_cdf(surrogate: &QuadraticSurrogate, w: &[f64], seed: u64, options: CdfOptions) -> Result<CdfEstimate> {
    let n = options.n_samples;
    if n < 2 {
        return Err(Error::Domain("CDF estimation needs at least two samples".into()));
    }
    if options.grid_size < 2 {
        return Err(Error::Domain("CDF grid needs at least two points".into()));
    }
    let m = w.len();
    let samples: Vec<f64> = (0..n as u64)
        .map(|i| {
            let x = rng::uniform_point(&mut rng::stream(seed, rng::domain::CDF, i), m);
            surrogate.predict(dot(w, &x))
        })
        .collect();
    let (gmin, gmax) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &g| (a.min(g), b.max(g)));

    if gmax == gmin {
        let delta = 0.01 * gmin.abs().max(1.0);
        let mut est = CdfEstimate {
            grid: vec![gmin - delta, gmin, gmin + delta],
            cdf: vec![],
            n_samples: n,
            bandwidth: 0.0,
            samples,
        };
        est.cdf = est.grid.iter().map(|&q| est.evaluate(q)).collect();
        return Ok(est);
    }

    let h = match options.bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Domain(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(&samples),
    };
    let (a, b) = (gmin - options.margin * h, gmax + options.margin * h);
    let steps = (options.grid_size - 1) as f64;
    let grid: Vec<f64> = (0..options.grid_size).map(|k| a + (b - a) * k as f64 / steps).collect();
    let mut est = CdfEstimate {
        grid,
        cdf: vec![],
        n_samples: n,
        bandwidth: h,
        samples,
    };
    est.cdf = est.grid.iter().map(|&q| est.evaluate(q)).collect();
    Ok(est)
}
