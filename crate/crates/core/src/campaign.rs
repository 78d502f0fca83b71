//! Evaluation campaigns: the sampled points, their black-box outputs and the
//! machinery that fills them in.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::param_space::ParameterSpace;
use crate::rng;

/// Free-form metadata describing the operating condition of a campaign,
/// e.g. the fuel plenum pressure.
pub type Condition = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

/// Why a run exists. Corner runs probe the range estimate and never enter
/// the direction fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunRole {
    #[default]
    Sample,
    Corner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    #[serde(default, skip_serializing_if = "is_sample")]
    pub role: RunRole,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn is_sample(r: &RunRole) -> bool {
    *r == RunRole::Sample
}

impl RunRecord {
    pub fn is_done(&self) -> bool {
        self.status == RunStatus::Done
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub space: ParameterSpace,
    pub seed: u64,
    #[serde(default)]
    pub condition: Condition,
    pub runs: Vec<RunRecord>,
}

/// On-disk manifest; the space may be inline or a path relative to the file.
#[derive(Deserialize)]
struct Manifest {
    space: SpaceRef,
    seed: u64,
    #[serde(default)]
    condition: Condition,
    runs: Vec<RunRecord>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceRef {
    Inline(ParameterSpace),
    Path(PathBuf),
}

impl Campaign {
    /// Fresh campaign with `count` pending uniform samples.
    pub fn sample(space: ParameterSpace, count: usize, seed: u64, condition: Condition) -> Result<Self> {
        let xs = space.sample_uniform(count, seed)?;
        let runs = xs
            .into_iter()
            .enumerate()
            .map(|(index, x)| {
                let p = space.denormalize(&x)?;
                Ok(RunRecord {
                    index,
                    role: RunRole::Sample,
                    x,
                    p,
                    status: RunStatus::Pending,
                    f: None,
                    wall_time: None,
                    diagnostic: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space,
            seed,
            condition,
            runs,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Appends a pending run at normalized point `x`, returning its index.
    pub fn push_run(&mut self, x: Vec<f64>, role: RunRole) -> Result<usize> {
        let p = self.space.denormalize(&x)?;
        let index = self.runs.len();
        self.runs.push(RunRecord {
            index,
            role,
            x,
            p,
            status: RunStatus::Pending,
            f: None,
            wall_time: None,
            diagnostic: None,
        });
        Ok(index)
    }

    /// `(x_j, f_j)` for completed sample runs, in index order.
    pub fn done_samples(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.runs
            .iter()
            .filter(|r| r.role == RunRole::Sample && r.is_done())
            .filter_map(|r| r.f.map(|f| (r.x.clone(), f)))
            .unzip()
    }

    pub fn count(&self, status: RunStatus) -> usize {
        self.runs.iter().filter(|r| r.status == status).count()
    }

    /// Checks the structural invariants of a loaded campaign.
    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        for (k, r) in self.runs.iter().enumerate() {
            if r.index != k {
                return Err(Error::Schema(format!("run indices must be contiguous from 0; found {} at position {k}", r.index)));
            }
            if r.x.len() != m || r.p.len() != m {
                return Err(Error::Schema(format!("run {k} has wrong dimension")));
            }
            let p = self.space.denormalize(&r.x)?;
            let tol = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
            if !p.iter().zip(&r.p).all(|(a, b)| tol(*a, *b)) {
                return Err(Error::Schema(format!("run {k}: physical and normalized inputs disagree")));
            }
            match (r.status, r.f) {
                (RunStatus::Done, Some(f)) if f.is_finite() => {}
                (RunStatus::Done, _) => return Err(Error::Schema(format!("run {k} is done without a finite result"))),
                (_, Some(_)) => return Err(Error::Schema(format!("run {k} carries a result but is not done"))),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("campaign serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(text)?;
        let space = match manifest.space {
            SpaceRef::Inline(space) => space,
            SpaceRef::Path(path) => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path,
                };
                ParameterSpace::load(path)?
            }
        };
        let campaign = Self {
            space,
            seed: manifest.seed,
            condition: manifest.condition,
            runs: manifest.runs,
        };
        campaign.validate()?;
        Ok(campaign)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path)?, path.parent())
    }

    /// Samples CSV: header `x1,...,xm,f`, one row per done sample run.
    pub fn samples_csv(&self) -> String {
        let m = self.dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=m).map(|i| format!("x{i}")).chain(["f".to_string()]).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        let (xs, fs) = self.done_samples();
        for (x, f) in xs.iter().zip(fs) {
            let row: Vec<String> = x.iter().map(|v| v.to_string()).chain([f.to_string()]).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Reads a samples CSV (`x1,...,xm,f`) into a campaign of done runs over the
/// unit space.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Campaign> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

pub fn parse_dataset(text: &str) -> Result<Campaign> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse { line: 1, message: "empty file: missing header".into() });
    }
    let cols = headers.len();
    if cols < 2 || &headers[cols - 1] != "f" {
        return Err(Error::Parse { line: 1, message: "header must be x1,...,xm,f".into() });
    }
    let m = cols - 1;
    for (i, h) in headers.iter().take(m).enumerate() {
        if h != format!("x{}", i + 1) {
            return Err(Error::Parse { line: 1, message: format!("expected column x{}, found {h:?}", i + 1) });
        }
    }
    let space = ParameterSpace::unit(m)?;
    let mut runs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != cols {
            return Err(Error::Parse {
                line,
                message: format!("expected {cols} columns, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{s:?}: {e}") }))
            .collect::<Result<Vec<_>>>()?;
        let f = values[m];
        if !f.is_finite() || values[..m].iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line, message: "non-finite value".into() });
        }
        let x = values[..m].to_vec();
        runs.push(RunRecord {
            index: runs.len(),
            role: RunRole::Sample,
            p: x.clone(),
            x,
            status: RunStatus::Done,
            f: Some(f),
            wall_time: None,
            diagnostic: None,
        });
    }
    if runs.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    Ok(Campaign {
        space,
        seed: 0,
        condition: Condition::new(),
        runs,
    })
}

/// One evaluation request.
#[derive(Debug, Clone, Copy)]
pub struct EvalRequest<'a> {
    pub index: usize,
    pub x: &'a [f64],
    pub params: &'a [f64],
    pub space: &'a ParameterSpace,
    pub condition: &'a Condition,
}

/// A black-box quantity of interest.
pub trait Evaluator: Sync {
    fn evaluate(&self, req: &EvalRequest<'_>) -> Result<f64>;

    /// Whether wall-clock time is worth recording in the run table.
    fn records_wall_time(&self) -> bool {
        false
    }
}

impl<F> Evaluator for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, req: &EvalRequest<'_>) -> Result<f64> {
        Ok(self(req.x))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantEvaluator(pub f64);

impl Evaluator for ConstantEvaluator {
    fn evaluate(&self, _req: &EvalRequest<'_>) -> Result<f64> {
        Ok(self.0)
    }
}

/// Univariate link functions for synthetic ridges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Linear,
    /// `t + t^3`
    CubicMonotone,
    /// `1 / (1 + exp(-4t))`
    Logistic,
    /// `t^2`
    Quadratic,
}

impl Link {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Link::Linear => t,
            Link::CubicMonotone => t + t * t * t,
            Link::Logistic => 1.0 / (1.0 + (-4.0 * t).exp()),
            Link::Quadratic => t * t,
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Link::Linear => 1.0,
            Link::CubicMonotone => 1.0 + 3.0 * t * t,
            Link::Logistic => {
                let s = self.value(t);
                4.0 * s * (1.0 - s)
            }
            Link::Quadratic => 2.0 * t,
        }
    }

    pub fn is_monotone(self) -> bool {
        !matches!(self, Link::Quadratic)
    }
}

impl std::str::FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Link::Linear),
            "cubic" | "cubic-monotone" => Ok(Link::CubicMonotone),
            "logistic" => Ok(Link::Logistic),
            "quadratic" => Ok(Link::Quadratic),
            other => Err(Error::Domain(format!(
                "unknown link {other:?}; expected linear, cubic-monotone, logistic or quadratic"
            ))),
        }
    }
}

/// `f(x) = g(w^T x) + noise * u(x)` with `u` a deterministic hash of `x`
/// uniform on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct SyntheticRidge {
    w_true: Vec<f64>,
    link: Link,
    noise: f64,
    noise_seed: u64,
}

impl SyntheticRidge {
    pub fn new(w_true: Vec<f64>, link: Link, noise: f64) -> Result<Self> {
        if (norm2(&w_true) - 1.0).abs() > 1e-10 {
            return Err(Error::Domain("ridge direction must have unit norm".into()));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Domain("noise amplitude must be finite and nonnegative".into()));
        }
        Ok(Self {
            w_true,
            link,
            noise,
            noise_seed: 0,
        })
    }

    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        self.noise_seed = seed;
        self
    }

    pub fn direction(&self) -> &[f64] {
        &self.w_true
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let clean = self.link.value(dot(&self.w_true, x));
        if self.noise == 0.0 {
            return clean;
        }
        let key = [self.noise_seed, rng::domain::RIDGE_NOISE]
            .into_iter()
            .chain(x.iter().map(|v| v.to_bits()));
        clean + self.noise * rng::hash_unit(key)
    }

    /// Exact gradient of the noiseless ridge.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.link.derivative(dot(&self.w_true, x));
        self.w_true.iter().map(|w| d * w).collect()
    }
}

impl Evaluator for SyntheticRidge {
    fn evaluate(&self, req: &EvalRequest<'_>) -> Result<f64> {
        if req.x.len() != self.w_true.len() {
            return Err(Error::Dimension {
                expected: self.w_true.len(),
                got: req.x.len(),
            });
        }
        Ok(self.value(req.x))
    }
}

/// Runs a user command per evaluation.
///
/// The command receives `{"index": n, "params": {name: value}, "condition": {...}}`
/// on stdin and must print `{"qoi": value}` and exit 0.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    program: String,
    args: Vec<String>,
    timeout: Option<Duration>,
    inflow: bool,
}

impl ExternalCommand {
    /// Fails immediately when `program` cannot be resolved.
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Result<Self> {
        let program = program.into();
        if resolve_program(&program).is_none() {
            return Err(Error::Domain(format!("evaluator command {program:?} not found")));
        }
        Ok(Self {
            program,
            args,
            timeout: None,
            inflow: false,
        })
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    /// Send the HyShot solver boundary conditions (see
    /// [`crate::hyshot::InflowCondition::solver_params`]) instead of the raw
    /// parameter values. The space must be the seven-parameter HyShot space.
    pub fn with_hyshot_inflow(mut self) -> Self {
        self.inflow = true;
        self
    }

    fn payload(&self, req: &EvalRequest<'_>) -> Result<String> {
        if !self.inflow {
            return Ok(Self::request_json(req));
        }
        let inflow = crate::hyshot::build_inflow(
            req.x,
            req.space,
            &crate::hyshot::FlowRatios::default(),
            &crate::hyshot::REFERENCE_T0H0,
        )?;
        Ok(serde_json::json!({
            "index": req.index,
            "params": inflow.solver_params(),
            "condition": req.condition,
        })
        .to_string())
    }

    pub fn request_json(req: &EvalRequest<'_>) -> String {
        let params: serde_json::Map<String, serde_json::Value> = req
            .space
            .names()
            .into_iter()
            .zip(req.params)
            .map(|(n, v)| (n.to_string(), serde_json::json!(v)))
            .collect();
        serde_json::json!({
            "index": req.index,
            "params": params,
            "condition": req.condition,
        })
        .to_string()
    }
}

fn resolve_program(program: &str) -> Option<PathBuf> {
    let path = Path::new(program);
    if program.contains(std::path::MAIN_SEPARATOR) {
        return path.is_file().then(|| path.to_path_buf());
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths)
            .map(|dir| dir.join(program))
            .find(|candidate| candidate.is_file())
    })
}

#[derive(Deserialize)]
struct QoiResponse {
    qoi: f64,
}

impl Evaluator for ExternalCommand {
    fn evaluate(&self, req: &EvalRequest<'_>) -> Result<f64> {
        let payload = self.payload(req)?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Evaluation(format!("spawn {}: {e}", self.program)))?;

        if let Some(mut stdin) = child.stdin.take() {
            // a command that ignores stdin may close it early
            let _ = stdin.write_all(payload.as_bytes());
        }
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let status = match self.timeout {
            None => child.wait()?,
            Some(limit) => {
                let start = Instant::now();
                loop {
                    if let Some(status) = child.try_wait()? {
                        break status;
                    }
                    if start.elapsed() >= limit {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(Error::Evaluation(format!("timed out after {:.1} s", limit.as_secs_f64())));
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
            }
        };
        let out = out_reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        if !status.success() {
            let tail: String = err.lines().last().unwrap_or("").chars().take(200).collect();
            return Err(Error::Evaluation(format!("command exited with {status}: {tail}")));
        }
        let response: QoiResponse = serde_json::from_str(out.trim())
            .map_err(|e| Error::Evaluation(format!("unparseable evaluator output {:?}: {e}", out.trim())))?;
        if !response.qoi.is_finite() {
            return Err(Error::Evaluation("evaluator returned a non-finite qoi".into()));
        }
        Ok(response.qoi)
    }

    fn records_wall_time(&self) -> bool {
        true
    }
}

/// Counts after a dispatch pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DispatchSummary {
    pub attempted: usize,
    pub done: usize,
    pub failed: usize,
}

/// Evaluates every pending (or interrupted `running`) run.
///
/// Done runs are left untouched. Results are applied by the calling thread,
/// so the final table does not depend on `max_concurrency` or completion
/// order. `checkpoint` sees the campaign after each applied result.
///
/// Returns [`Error::Evaluation`] when every attempted run fails; the failed
/// records are still written into `campaign`.
pub fn evaluate_campaign(
    campaign: &mut Campaign,
    evaluator: &dyn Evaluator,
    max_concurrency: usize,
    mut checkpoint: impl FnMut(&Campaign) -> Result<()>,
) -> Result<DispatchSummary> {
    let queue: Vec<usize> = campaign
        .runs
        .iter()
        .filter(|r| matches!(r.status, RunStatus::Pending | RunStatus::Running))
        .map(|r| r.index)
        .collect();
    let mut summary = DispatchSummary {
        attempted: queue.len(),
        ..Default::default()
    };
    if queue.is_empty() {
        return Ok(summary);
    }
    for &i in &queue {
        campaign.runs[i].status = RunStatus::Running;
    }

    let workers = max_concurrency.clamp(1, queue.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<f64>, f64)>();
    let timed = evaluator.records_wall_time();
    let snapshot = campaign.clone();

    let outcome: Result<()> = std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (queue, next, snapshot) = (&queue, &next, &snapshot);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = queue.get(k) else { break };
                let run = &snapshot.runs[i];
                let req = EvalRequest {
                    index: i,
                    x: &run.x,
                    params: &run.p,
                    space: &snapshot.space,
                    condition: &snapshot.condition,
                };
                let start = Instant::now();
                let result = evaluator.evaluate(&req).and_then(|f| {
                    if f.is_finite() {
                        Ok(f)
                    } else {
                        Err(Error::Evaluation("non-finite qoi".into()))
                    }
                });
                if tx.send((i, result, start.elapsed().as_secs_f64())).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, result, elapsed) in rx {
            let run = &mut campaign.runs[i];
            match result {
                Ok(f) => {
                    run.status = RunStatus::Done;
                    run.f = Some(f);
                    run.diagnostic = None;
                    summary.done += 1;
                }
                Err(e) => {
                    run.status = RunStatus::Failed;
                    run.f = None;
                    run.diagnostic = Some(e.to_string());
                    summary.failed += 1;
                }
            }
            run.wall_time = timed.then_some(elapsed);
            checkpoint(campaign)?;
        }
        Ok(())
    });
    outcome?;

    if summary.done == 0 {
        return Err(Error::Evaluation(format!("all {} attempted runs failed", summary.failed)));
    }
    Ok(summary)
}
