use std::path::{Path, PathBuf};

use ridgeline_core::active_subspace::{
    self, bootstrap_direction, fit_active_direction, sensitivity_ranking, summary_data, ActiveSubspace,
    ComponentSpread, SensitivityEntry, SummaryData,
};
use ridgeline_core::campaign::{self, EvalRequest, RunRole, RunStatus};
use ridgeline_core::surrogate::{fit_quadratic, QuadraticSurrogate};
use ridgeline_core::uq::{self, CdfEstimate, CdfOptions, RangeEstimate, SafeRange, SafeSetResult};
use ridgeline_core::{Campaign, Error, Evaluator};
use serde::Serialize;

use crate::svg::{Mark, Plot, Series};
use crate::CliError;

/// A campaign together with where it came from, so corner runs can be saved.
pub struct Source {
    pub campaign: Campaign,
    pub path: PathBuf,
    pub persist: bool,
}

impl Source {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let campaign = if is_csv { campaign::load_dataset(path)? } else { Campaign::load(path)? };
        Ok(Self {
            campaign,
            path: path.to_path_buf(),
            persist: !is_csv,
        })
    }

    pub fn save(&self) -> Result<(), CliError> {
        if self.persist {
            self.campaign.save(&self.path)?;
        }
        Ok(())
    }
}

pub struct Fit {
    pub xs: Vec<Vec<f64>>,
    pub fs: Vec<f64>,
    pub active: ActiveSubspace,
}

pub fn fit_direction(campaign: &Campaign) -> Result<Fit, CliError> {
    let (xs, fs) = campaign.done_samples();
    let m = campaign.dim();
    let needed = active_subspace::required_samples(m);
    if xs.len() < needed {
        return Err(CliError::Insufficient(format!(
            "{} completed sample runs, but a direction in m = {m} dimensions needs M >= {needed} \
             (M of about {} recommended); sample more points or finish pending runs with `ridgeline run`",
            xs.len(),
            active_subspace::recommended_samples(m)
        )));
    }
    let active = fit_active_direction(&xs, &fs)?;
    if active.trend() < 0.0 {
        eprintln!(
            "warning: the QoI decreases along w; the safe set is anchored at the low end of w^T x, \
             where the QoI is largest"
        );
    }
    Ok(Fit { xs, fs, active })
}

pub fn fit_surrogate(fit: &Fit) -> Result<QuadraticSurrogate, CliError> {
    let points: Vec<(f64, f64)> = fit.xs.iter().zip(&fit.fs).map(|(x, &f)| (fit.active.active_variable(x), f)).collect();
    Ok(fit_quadratic(&points, fit.active.domain())?)
}

#[derive(Serialize)]
struct NamedSpread<'a> {
    name: &'a str,
    #[serde(flatten)]
    spread: &'a ComponentSpread,
}

#[derive(Serialize)]
struct BootstrapReport<'a> {
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    redraws: usize,
    quantiles: Vec<NamedSpread<'a>>,
}

#[derive(Serialize)]
struct ActiveReport<'a> {
    names: Vec<&'a str>,
    w: &'a [f64],
    u_hat: &'a [f64],
    residual_norm: f64,
    cond_estimate: f64,
    #[serde(rename = "M")]
    samples: usize,
    trend: f64,
    y_domain: (f64, f64),
    discordant_pairs: usize,
    ranking: &'a [SensitivityEntry],
    bootstrap: BootstrapReport<'a>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out)?;
    let path = out.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub fn print_ranking(ranking: &[SensitivityEntry]) {
    let width = ranking.iter().map(|e| e.name.len()).max().unwrap_or(9).max(9);
    println!("{:<4}  {:<width$}  {:>9}", "rank", "parameter", "weight");
    for (k, e) in ranking.iter().enumerate() {
        println!("{:<4}  {:<width$}  {:>9.4}", k + 1, e.name, e.weight);
    }
}

pub struct DirectionArtifacts {
    pub summary: SummaryData,
}

/// Bootstrap, ranking and summary-plot data for a fitted direction.
pub fn direction_reports(campaign: &Campaign, fit: &Fit, n: usize, seed: u64, out: &Path) -> Result<DirectionArtifacts, CliError> {
    let ensemble = bootstrap_direction(&fit.xs, &fit.fs, &fit.active, n, seed)?;
    let summary = summary_data(&fit.xs, &fit.fs, &fit.active, Some(&ensemble))?;
    let names = campaign.space.names();
    let ranking = sensitivity_ranking(&fit.active.w, &names)?;
    let spread = ensemble.spread();
    let report = ActiveReport {
        names: names.clone(),
        w: &fit.active.w,
        u_hat: &fit.active.fit.u_hat,
        residual_norm: fit.active.fit.residual_norm,
        cond_estimate: fit.active.fit.cond_estimate,
        samples: fit.active.samples,
        trend: fit.active.trend(),
        y_domain: fit.active.domain(),
        discordant_pairs: summary.discordant_pairs,
        ranking: &ranking,
        bootstrap: BootstrapReport {
            n: ensemble.n,
            seed: ensemble.seed,
            redraws: ensemble.redraws,
            quantiles: names.iter().zip(&spread).map(|(name, spread)| NamedSpread { name, spread }).collect(),
        },
    };
    write(out, "active_subspace.json", &to_json(&report))?;

    let mut csv = names.join(",");
    csv.push('\n');
    for w in &ensemble.replicates {
        csv.push_str(&w.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    write(out, "bootstrap.csv", &csv)?;
    write(out, "summary.csv", &summary.to_csv())?;

    print_ranking(&ranking);
    if summary.discordant_pairs > 0 {
        eprintln!(
            "warning: {} adjacent pairs in the summary data break the monotone trend",
            summary.discordant_pairs
        );
    }
    Ok(DirectionArtifacts { summary })
}

#[derive(Serialize)]
struct RangeReport<'a> {
    #[serde(flatten)]
    estimate: &'a RangeEstimate,
    p_min: Vec<f64>,
    p_max: Vec<f64>,
}

/// Evaluates the two extreme corners, reusing finished corner runs.
///
/// New corner runs are appended to the campaign with role `corner` and saved
/// after each evaluation.
pub fn corner_range(
    source: &mut Source,
    fit: &Fit,
    discordant_pairs: usize,
    evaluator: &dyn Evaluator,
    out: &Path,
) -> Result<RangeEstimate, CliError> {
    let mut failure: Option<CliError> = None;
    let result = uq::estimate_range(&fit.active.w, &fit.fs, discordant_pairs, |x| {
        let campaign = &mut source.campaign;
        let existing = campaign.runs.iter().position(|r| r.role == RunRole::Corner && r.x == x);
        if let Some(i) = existing {
            if let (RunStatus::Done, Some(f)) = (campaign.runs[i].status, campaign.runs[i].f) {
                return Ok(f);
            }
        }
        let i = match existing {
            Some(i) => i,
            None => campaign.push_run(x.to_vec(), RunRole::Corner)?,
        };
        let outcome = {
            let run = &campaign.runs[i];
            let req = EvalRequest {
                index: i,
                x: &run.x,
                params: &run.p,
                space: &campaign.space,
                condition: &campaign.condition,
            };
            evaluator.evaluate(&req)
        };
        let run = &mut campaign.runs[i];
        match &outcome {
            Ok(f) => {
                run.status = RunStatus::Done;
                run.f = Some(*f);
                run.diagnostic = None;
            }
            Err(e) => {
                run.status = RunStatus::Failed;
                run.f = None;
                run.diagnostic = Some(e.to_string());
            }
        }
        if let Err(e) = source.save() {
            failure = Some(e);
        }
        outcome
    });
    if let Some(e) = failure {
        return Err(e);
    }
    match result {
        Ok(estimate) => {
            let space = &source.campaign.space;
            let report = RangeReport {
                estimate: &estimate,
                p_min: space.denormalize(&estimate.x_min)?,
                p_max: space.denormalize(&estimate.x_max)?,
            };
            write(out, "range.json", &to_json(&report))?;
            println!("range: [{}, {}]", estimate.f_min, estimate.f_max);
            if !estimate.validated {
                eprintln!("warning: some sample responses fall outside the corner range");
            }
            if estimate.monotone_caveat {
                eprintln!("warning: summary data are not monotone; treat the corner range as a heuristic");
            }
            Ok(estimate)
        }
        Err(partial) => {
            #[derive(Serialize)]
            struct Partial<'a> {
                x_min: &'a [f64],
                x_max: &'a [f64],
                f_at_x_min: Option<f64>,
                f_at_x_max: Option<f64>,
                error: String,
            }
            let report = Partial {
                x_min: &partial.x_min,
                x_max: &partial.x_max,
                f_at_x_min: partial.f_at_x_min,
                f_at_x_max: partial.f_at_x_max,
                error: partial.error.to_string(),
            };
            write(out, "range.json", &to_json(&report))?;
            Err(CliError::Core(partial.error))
        }
    }
}

#[derive(Serialize)]
struct SafeSetReport<'a> {
    #[serde(flatten)]
    result: &'a SafeSetResult,
    box_corner: Vec<f64>,
    ranges: Vec<SafeRange>,
}

pub fn safe_set(campaign: &Campaign, fit: &Fit, surrogate: &QuadraticSurrogate, threshold: f64, level: f64, out: &Path) -> Result<SafeSetResult, CliError> {
    let result = uq::invert_safe_set(surrogate, &fit.active.w, threshold, level)?;
    let ranges = result.safe_ranges(&campaign.space)?;
    let report = SafeSetReport {
        result: &result,
        box_corner: result.box_corner(),
        ranges,
    };
    write(out, "safeset.json", &to_json(&report))?;
    let feasible = serde_json::to_value(result.feasible).expect("enum serializes");
    println!("safe set: y_max = {} ({})", result.y_max, feasible.as_str().unwrap_or_default());
    for r in &report.ranges {
        let tag = if r.restricted { "" } else { "  (unchanged)" };
        println!("  {:<24} [{}, {}] {}{tag}", r.name, r.min, r.max, r.units);
    }
    Ok(result)
}

pub fn cdf(fit: &Fit, surrogate: &QuadraticSurrogate, seed: u64, options: CdfOptions, out: &Path) -> Result<CdfEstimate, CliError> {
    let est = uq::estimate_cdf(surrogate, &fit.active.w, seed, options)?;
    write(out, "cdf.csv", &est.to_csv())?;
    if est.bandwidth == 0.0 {
        eprintln!("warning: the surrogate output is constant; the CDF is a step");
    }
    println!("cdf: {} samples, bandwidth {}", est.n_samples, est.bandwidth);
    Ok(est)
}

pub fn surrogate_report(surrogate: &QuadraticSurrogate, out: &Path) -> Result<(), CliError> {
    write(out, "surrogate.json", &to_json(surrogate))?;
    println!(
        "surrogate: g(y) = {} + {} y + {} y^2, R^2 = {}",
        surrogate.coeffs[0], surrogate.coeffs[1], surrogate.coeffs[2], surrogate.r_squared
    );
    Ok(())
}

pub fn summary_svg(fit: &Fit, dir: &DirectionArtifacts, surrogate: Option<&QuadraticSurrogate>, range: Option<&RangeEstimate>) -> String {
    let mut series = Vec::new();
    if let Some(cloud) = &dir.summary.bootstrap_cloud {
        series.push(Series {
            points: cloud.clone(),
            mark: Mark::Circle { radius: 2.0, fill: "gray", opacity: 0.15 },
        });
    }
    series.push(Series {
        points: dir.summary.points.clone(),
        mark: Mark::Circle { radius: 3.0, fill: "black", opacity: 1.0 },
    });
    if let Some(s) = surrogate {
        let (a, b) = fit.active.domain();
        let points = (0..=100).map(|k| {
            let y = a + (b - a) * k as f64 / 100.0;
            (y, s.predict(y))
        });
        series.push(Series { points: points.collect(), mark: Mark::Line { stroke: "steelblue" } });
    }
    if let Some(r) = range {
        series.push(Series {
            points: vec![
                (fit.active.active_variable(&r.x_min), r.f_at_x_min),
                (fit.active.active_variable(&r.x_max), r.f_at_x_max),
            ],
            mark: Mark::Square { size: 9.0, fill: "dimgray" },
        });
    }
    Plot {
        title: "Summary plot".into(),
        x_label: "w^T x".into(),
        y_label: "f".into(),
        series,
    }
    .render()
}

pub fn cdf_svg(est: &CdfEstimate) -> String {
    Plot {
        title: "Output CDF".into(),
        x_label: "q".into(),
        y_label: "P(f <= q)".into(),
        series: vec![Series {
            points: est.grid.iter().copied().zip(est.cdf.iter().copied()).collect(),
            mark: Mark::Line { stroke: "black" },
        }],
    }
    .render()
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}
