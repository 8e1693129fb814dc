//! The tomography experiment: sample a phantom's Radon transform, thin the
//! samples with each selection rule, and report reconstruction (MSR) and
//! interpolation (MSI) errors with Gram conditioning.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::greedy::{run_greedy, GreedyTrace, SelectionRule, StopCriteria};
use crate::io::{value_window, write_candidates, write_pgm, write_trace};
use crate::kernel::{Kernel, KernelConfig, Point};
use crate::newton::{direct_solve, CandidateSet, NewtonModel, DEFAULT_BREAKDOWN_FACTOR};
use crate::pairing::PairingEngine;
use crate::phantom::{grid_centers, sample_functionals, EllipsePhantom};

fn default_family() -> String {
    "gaussian".into()
}
fn default_alpha() -> f64 {
    2000.0
}
fn default_weight_beta() -> Option<f64> {
    Some(1.5)
}
fn default_dimension() -> usize {
    2
}
fn default_phantom() -> String {
    "modified-shepp-logan".into()
}
fn default_n() -> usize {
    2000
}
fn default_m() -> usize {
    300
}
fn default_grid() -> usize {
    64
}
fn default_seed() -> u64 {
    42
}
fn default_methods() -> Vec<String> {
    ["p", "h", "f", "fp", "psr", "random"]
        .map(String::from)
        .to_vec()
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn default_direct_cap() -> usize {
    3000
}
fn default_breakdown() -> f64 {
    DEFAULT_BREAKDOWN_FACTOR
}

/// Experiment parameters, read from a flat TOML document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_weight_beta")]
    pub weight_beta: Option<f64>,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// `modified-shepp-logan` (default) or `shepp-logan`.
    #[serde(default = "default_phantom")]
    pub phantom: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub positive_radii_only: bool,
    /// Largest N for which the `direct` method runs.
    #[serde(default = "default_direct_cap")]
    pub direct_cap: usize,
    #[serde(default = "default_breakdown")]
    pub breakdown_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill_tol: Option<f64>,
    /// Fill the `ms` trace column and the runtime table column.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub parallel_methods: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

/// A selection rule, or the full solve without thinning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Greedy(SelectionRule),
    Direct,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return fail("n must be at least 1".into());
        }
        if self.m == 0 || self.m > self.n {
            return fail(format!("m must be in 1..=n (n = {}, m = {})", self.n, self.m));
        }
        if self.grid < 8 {
            return fail(format!("grid must be at least 8, got {}", self.grid));
        }
        if self.methods.is_empty() {
            return fail("method list is empty".into());
        }
        if self.dimension != 2 {
            return fail("Radon data needs a two-dimensional kernel".into());
        }
        if !(self.breakdown_factor > 0.0 && self.breakdown_factor < 1.0) {
            return fail(format!(
                "breakdown_factor must be in (0, 1), got {}",
                self.breakdown_factor
            ));
        }
        for tol in [self.residual_tol, self.fill_tol].into_iter().flatten() {
            if !(tol >= 0.0 && tol.is_finite()) {
                return fail(format!("stop tolerance must be nonnegative, got {tol}"));
            }
        }
        self.kernel()?;
        self.phantom()?;
        self.methods()?;
        Ok(())
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            family: self.family.clone(),
            alpha: self.alpha,
            weight_beta: self.weight_beta,
            dimension: self.dimension,
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let kernel = self
            .kernel_config()
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        if kernel.weighted_gaussian_params().is_none() {
            return Err(Error::Config(
                "Radon data needs the weighted gaussian kernel (family = \"gaussian\" with weight_beta)"
                    .into(),
            ));
        }
        Ok(kernel)
    }

    pub fn phantom(&self) -> Result<EllipsePhantom> {
        match self.phantom.as_str() {
            "shepp-logan" => Ok(EllipsePhantom::shepp_logan(false)),
            "modified-shepp-logan" => Ok(EllipsePhantom::shepp_logan(true)),
            other => Err(Error::Config(format!("unknown phantom `{other}`"))),
        }
    }

    /// Parsed method list, paired with the names as given.
    pub fn methods(&self) -> Result<Vec<(String, Method)>> {
        let mut seen = std::collections::HashSet::new();
        self.methods
            .iter()
            .map(|name| {
                let name = name.trim().to_string();
                if !seen.insert(name.clone()) {
                    return Err(Error::Config(format!("method `{name}` listed twice")));
                }
                let method = if name == "direct" {
                    Method::Direct
                } else {
                    Method::Greedy(SelectionRule::parse(&name, self.random_seed())?)
                };
                Ok((name, method))
            })
            .collect()
    }

    /// Seed of the random baseline, kept apart from the sampling stream.
    pub fn random_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn stop_criteria(&self) -> StopCriteria {
        StopCriteria {
            breakdown_factor: self.breakdown_factor,
            residual_tol: self.residual_tol,
            fill_tol: self.fill_tol,
        }
    }
}

/// Mean squared residual `(1/N) sum |lambda_i(f) - lambda_i(s)|^2` over all
/// candidates.
pub fn compute_msi(model: &NewtonModel, set: &CandidateSet) -> Result<f64> {
    if let Some(own) = model.candidates() {
        if own.functionals() == set.functionals() && own.samples() == set.samples() {
            let r = model.candidate_residuals();
            return Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64);
        }
    }
    let squares: Vec<f64> = set
        .functionals()
        .par_iter()
        .zip(set.samples().par_iter())
        .map(|(f, &y)| model.residual(f, y).map(|r| r * r))
        .collect::<Result<_>>()?;
    Ok(squares.iter().sum::<f64>() / squares.len() as f64)
}

/// Values of `sum_i coeffs_i g_{lambda_i}` on the `g x g` cell-center grid,
/// laid out like [`EllipsePhantom::grid`].
pub fn reconstruction_grid(
    engine: &PairingEngine,
    functionals: &[Functional],
    coeffs: &[f64],
    g: usize,
) -> Result<Vec<f64>> {
    let centers = grid_centers(g);
    (0..g * g)
        .into_par_iter()
        .map(|k| {
            let x = Point::new2(centers[k % g], centers[g - 1 - k / g]);
            functionals
                .iter()
                .zip(coeffs)
                .try_fold(0.0, |acc, (f, c)| Ok(acc + c * engine.representer_eval(f, &x)?))
        })
        .collect()
}

fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Mean squared error of the interpolant against the phantom on the
/// `g x g` cell-center grid of `[-1, 1]^2`.
pub fn compute_msr(model: &NewtonModel, phantom: &EllipsePhantom, g: usize) -> Result<f64> {
    let recon = reconstruction_grid(model.engine(), model.selected(), model.expansion(), g)?;
    Ok(mean_sq_diff(&phantom.grid(g), &recon))
}

mod inf_float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("invalid number `{t}`"))),
        }
    }
}

/// One row of the results table, also written as the per-method JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// `ok` or `failed`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub msr: Option<f64>,
    pub msi: Option<f64>,
    /// The solve interpolates every sample, so MSI is zero by construction
    /// and not measured.
    #[serde(default)]
    pub msi_by_construction: bool,
    /// cond_2 of the Gram matrix of the selected functionals; `"inf"` when
    /// numerically singular.
    #[serde(with = "inf_float")]
    pub cond: Option<f64>,
    pub selected: usize,
    #[serde(default)]
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<String>,
    pub runtime_s: f64,
    pub n: usize,
    pub m: usize,
    pub grid: usize,
    pub seed: u64,
}

impl MethodSummary {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: MethodSummary = serde_json::from_str(text)?;
        let finite = [s.msr, s.msi]
            .iter()
            .flatten()
            .all(|v| v.is_finite() && *v >= 0.0)
            && s.cond.is_none_or(|c| c >= 0.0)
            && s.runtime_s.is_finite();
        if !finite {
            return Err(Error::Parse(format!("summary for `{}` has invalid numbers", s.method)));
        }
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<MethodSummary>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:e}"),
        None => String::new(),
    }
}

impl ResultsTable {
    pub fn get(&self, method: &str) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// CSV with columns `method,msr,msi,cond,selected,status,runtime_s`;
    /// runtimes are left empty unless `include_runtime`.
    pub fn write_csv<W: Write>(&self, writer: W, include_runtime: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "msr", "msi", "cond", "selected", "status", "runtime_s"])?;
        for r in &self.rows {
            let msi = if r.msi_by_construction {
                "0 (by construction)".to_string()
            } else {
                fmt_opt(r.msi)
            };
            w.write_record([
                r.method.clone(),
                fmt_opt(r.msr),
                msi,
                fmt_opt(r.cond),
                r.selected.to_string(),
                r.status.clone(),
                if include_runtime {
                    format!("{:.3}", r.runtime_s)
                } else {
                    String::new()
                },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Collects `summary.json` files under `dir` (one level of method
    /// directories), sorted by method name.
    pub fn from_summaries(dir: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path().join("summary.json"))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        for p in paths {
            let text = fs::read_to_string(&p)?;
            rows.push(
                MethodSummary::from_json(&text)
                    .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?,
            );
        }
        if rows.is_empty() {
            return Err(Error::Config(format!(
                "no summary.json files under {}",
                dir.display()
            )));
        }
        Ok(ResultsTable { rows })
    }
}

/// Everything one method produced.
#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub summary: MethodSummary,
    pub trace: Option<GreedyTrace>,
    pub model: Option<NewtonModel>,
    pub reconstruction: Option<Vec<f64>>,
    /// The method failed for a numerical reason (accuracy, breakdown).
    pub numerical_failure: bool,
}

/// Shared inputs of one experiment.
pub struct ExperimentData {
    pub config: ExperimentConfig,
    pub engine: Arc<PairingEngine>,
    pub phantom: EllipsePhantom,
    pub candidates: CandidateSet,
    pub truth: Vec<f64>,
}

impl ExperimentData {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let kernel = config.kernel()?;
        let phantom = config.phantom()?;
        let samples = sample_functionals(&phantom, config.n, config.seed, config.positive_radii_only)?;
        Ok(ExperimentData {
            config: config.clone(),
            engine: Arc::new(PairingEngine::analytic(kernel).without_cache()),
            truth: phantom.grid(config.grid),
            candidates: samples.to_candidates()?,
            phantom,
        })
    }

    fn summary(&self, method: &str) -> MethodSummary {
        MethodSummary {
            method: method.to_string(),
            status: "ok".into(),
            error: None,
            msr: None,
            msi: None,
            msi_by_construction: false,
            cond: None,
            selected: 0,
            excluded: 0,
            stop: None,
            runtime_s: 0.0,
            n: self.config.n,
            m: self.config.m,
            grid: self.config.grid,
            seed: self.config.seed,
        }
    }

    /// Runs one method. Failures end up in the summary, not in the result.
    pub fn run_method(&self, name: &str, method: Method) -> MethodOutcome {
        let start = Instant::now();
        let mut outcome = match self.try_run(name, method) {
            Ok(o) => o,
            Err(e) => MethodOutcome {
                numerical_failure: e.is_numerical(),
                summary: MethodSummary {
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    ..self.summary(name)
                },
                trace: None,
                model: None,
                reconstruction: None,
            },
        };
        outcome.summary.runtime_s = start.elapsed().as_secs_f64();
        outcome
    }

    fn try_run(&self, name: &str, method: Method) -> Result<MethodOutcome> {
        let g = self.config.grid;
        match method {
            Method::Greedy(rule) => {
                let (model, trace) = run_greedy(
                    rule,
                    self.engine.clone(),
                    self.candidates.clone(),
                    self.config.m,
                    self.config.stop_criteria(),
                )?;
                let recon = reconstruction_grid(&self.engine, model.selected(), model.expansion(), g)?;
                let cond = self.engine.gram(model.selected())?.condition_number();
                let summary = MethodSummary {
                    msr: Some(mean_sq_diff(&self.truth, &recon)),
                    msi: Some(compute_msi(&model, &self.candidates)?),
                    cond: Some(cond),
                    selected: model.len(),
                    excluded: trace.exclusions.len(),
                    stop: Some(format!("{:?}", trace.stop)),
                    ..self.summary(name)
                };
                Ok(MethodOutcome {
                    summary,
                    trace: Some(trace),
                    model: Some(model),
                    reconstruction: Some(recon),
                    numerical_failure: false,
                })
            }
            Method::Direct => {
                let n = self.candidates.len();
                if n > self.config.direct_cap {
                    return Err(Error::Config(format!(
                        "direct solve skipped: n = {n} exceeds direct_cap = {}",
                        self.config.direct_cap
                    )));
                }
                let fs = self.candidates.functionals();
                let coeffs = direct_solve(&self.engine, fs, self.candidates.samples())?;
                let recon = reconstruction_grid(&self.engine, fs, coeffs.as_slice(), g)?;
                let cond = self.engine.gram(fs)?.condition_number();
                let summary = MethodSummary {
                    msr: Some(mean_sq_diff(&self.truth, &recon)),
                    msi: Some(0.0),
                    msi_by_construction: true,
                    cond: Some(cond),
                    selected: n,
                    ..self.summary(name)
                };
                Ok(MethodOutcome {
                    summary,
                    trace: None,
                    model: None,
                    reconstruction: Some(recon),
                    numerical_failure: false,
                })
            }
        }
    }
}

/// Directory name for a method's artifacts.
pub fn method_dir_name(method: &str) -> String {
    method
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_outcome(data: &ExperimentData, out: &Path, outcome: &MethodOutcome) -> Result<()> {
    let dir = out.join(method_dir_name(&outcome.summary.method));
    fs::create_dir_all(&dir)?;
    let g = data.config.grid;
    if let Some(trace) = &outcome.trace {
        write_trace(create(&dir.join("trace.csv"))?, trace, data.config.record_timing)?;
    }
    if let Some(recon) = &outcome.reconstruction {
        write_pgm(create(&dir.join("recon.pgm"))?, g, g, recon, value_window(&data.truth))?;
    }
    if let Some(model) = &outcome.model {
        fs::write(dir.join("model.json"), model.snapshot().to_json()?)?;
    }
    fs::write(dir.join("summary.json"), outcome.summary.to_json()?)?;
    Ok(())
}

/// Results of [`run_experiment`].
pub struct ExperimentReport {
    pub table: ResultsTable,
    pub outcomes: Vec<MethodOutcome>,
}

/// Runs every configured method and writes the artifacts under
/// `config.out`: `samples.csv`, `phantom.pgm`, `config.toml`,
/// `results.csv`, and per method `trace.csv`, `recon.pgm`, `model.json`,
/// `summary.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = ExperimentData::prepare(config)?;
    let methods = config.methods()?;
    let out = &config.out;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), config.to_toml()?)?;
    write_candidates(
        create(&out.join("samples.csv"))?,
        data.candidates.functionals(),
        Some(data.candidates.samples()),
    )?;
    let g = config.grid;
    write_pgm(create(&out.join("phantom.pgm"))?, g, g, &data.truth, value_window(&data.truth))?;

    let outcomes: Vec<MethodOutcome> = if config.parallel_methods {
        methods
            .par_iter()
            .map(|(name, m)| data.run_method(name, *m))
            .collect()
    } else {
        methods
            .iter()
            .map(|(name, m)| data.run_method(name, *m))
            .collect()
    };
    for o in &outcomes {
        write_outcome(&data, out, o)?;
    }
    let table = ResultsTable {
        rows: outcomes.iter().map(|o| o.summary.clone()).collect(),
    };
    table.write_csv(create(&out.join("results.csv"))?, config.record_timing)?;
    Ok(ExperimentReport { table, outcomes })
}
