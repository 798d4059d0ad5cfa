//! Parameter sweeps over the benchmark networks.

mod cases;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use cases::{make_linear_patch, make_test1, make_test2, make_test2_with_distance, test2_distance};
pub use report::{write_csv, write_json, CSV_HEADER};

use crate::analysis::{eoc, eoc_fit, error_report, ErrorReport, ExactSolution};
use crate::discretization::{discretize, Discretization, MeshParams, Problem};
use crate::error::{DfnError, Result};
use crate::meshing::MeshOptions;
use crate::solver::{
    assemble_system, condition_number, flux_conservation_residual, matrix_market, solve, StabParams, Variant,
};

/// Sweep grids of the experiments.
pub const TEST1_DELTAS: [f64; 5] = [0.22, 0.1, 0.071, 0.032, 0.014];
pub const TEST1_WEIGHTS: [f64; 5] = [10.0, 1.0, 0.1, 0.01, 0.001];
pub const TEST2_WEIGHTS: [f64; 5] = [1.0, 0.1, 0.01, 0.001, 0.0001];

/// Interior node perturbation used by the sweeps, as a fraction of the grid spacing.
pub const DEFAULT_JITTER: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestCase {
    Test1,
    #[serde(rename = "test2A")]
    Test2A,
    #[serde(rename = "test2B")]
    Test2B,
    Custom(PathBuf),
}

impl TestCase {
    pub fn name(&self) -> String {
        match self {
            TestCase::Test1 => "test1".into(),
            TestCase::Test2A => "test2A".into(),
            TestCase::Test2B => "test2B".into(),
            TestCase::Custom(p) => p.file_stem().and_then(|s| s.to_str()).unwrap_or("custom").to_string(),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        match self {
            TestCase::Test1 => make_test1(),
            TestCase::Test2A => make_test2('A'),
            TestCase::Test2B => make_test2('B'),
            TestCase::Custom(p) => crate::io::load_problem(p),
        }
    }

    pub fn default_weights(&self) -> Vec<f64> {
        match self {
            TestCase::Test2A | TestCase::Test2B => TEST2_WEIGHTS.to_vec(),
            _ => TEST1_WEIGHTS.to_vec(),
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for TestCase {
    type Err = DfnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "test1" => Ok(TestCase::Test1),
            "test2a" => Ok(TestCase::Test2A),
            "test2b" => Ok(TestCase::Test2B),
            other => Err(DfnError::Config(format!("unknown test `{other}`"))),
        }
    }
}

/// Where the errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    Analytic,
    /// A natural-variant solve (ω = 0.1, t = 0) at the smallest mesh size divided by `factor`.
    FineMesh {
        factor: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub test: TestCase,
    pub variant: Variant,
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
    pub t: f64,
    pub out_dir: Option<PathBuf>,
    /// `None` picks analytic when an exact solution is known, else a fine mesh with factor 4.
    pub reference: Option<ReferenceMode>,
    pub mesh: MeshSettings,
    pub compute_cond: bool,
    /// When false, `seconds` is written as 0 so that reports are reproducible byte for byte.
    pub record_timing: bool,
    pub dump_meshes: bool,
    pub dump_matrix: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSettings {
    pub jitter: f64,
    pub seed: u64,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self { jitter: DEFAULT_JITTER, seed: 1 }
    }
}

impl From<MeshSettings> for MeshOptions {
    fn from(m: MeshSettings) -> Self {
        MeshOptions { jitter: m.jitter, seed: m.seed }
    }
}

impl RunConfig {
    pub fn new(test: TestCase, variant: Variant) -> Self {
        let weights = test.default_weights();
        Self {
            test,
            variant,
            deltas: TEST1_DELTAS.to_vec(),
            weights,
            t: 0.0,
            out_dir: None,
            reference: None,
            mesh: MeshSettings::default(),
            compute_cond: true,
            record_timing: false,
            dump_meshes: false,
            dump_matrix: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(DfnError::Config("no mesh sizes given".into()));
        }
        if self.weights.is_empty() {
            return Err(DfnError::Config("no stabilization weights given".into()));
        }
        if self.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(DfnError::Config("mesh sizes must be positive".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(DfnError::Config("mesh sizes must be strictly decreasing".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(DfnError::Config("weights must be positive".into()));
        }
        if !self.t.is_finite() {
            return Err(DfnError::Config("t must be finite".into()));
        }
        if let Some(ReferenceMode::FineMesh { factor }) = self.reference {
            if !(factor >= 4.0) {
                return Err(DfnError::Config(format!("reference refinement factor {factor} must be at least 4")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Ok => "ok",
            RowStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub test: String,
    pub variant: Variant,
    pub delta: f64,
    pub weight: f64,
    pub t: f64,
    pub dofs: Option<[usize; 3]>,
    pub status: RowStatus,
    pub message: Option<String>,
    pub seconds: f64,
    pub report: Option<ErrorReport>,
}

/// Convergence rates for one weight across the successful mesh sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub weight: f64,
    pub deltas: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub l2_fit: f64,
    pub h1_fit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub test: String,
    pub variant: Variant,
    pub t: f64,
    pub reference: ReferenceMode,
    pub build_id: String,
    pub wall_seconds: f64,
    pub rows: Vec<RunRow>,
    pub rates: Vec<RateSummary>,
}

impl RunReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Ok)
    }
}

pub fn build_id() -> String {
    match option_env!("DFN_BUILD_ID") {
        Some(id) => format!("dfn-core {} ({id})", env!("CARGO_PKG_VERSION")),
        None => format!("dfn-core {}", env!("CARGO_PKG_VERSION")),
    }
}

fn reference_solution(problem: &Arc<Problem>, config: &RunConfig, factor: f64) -> Result<ExactSolution> {
    let dmin = config.deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let params = MeshParams::uniform(&problem.network, dmin / factor, config.mesh.into());
    let disc = discretize(problem.clone(), params)?;
    let sys = assemble_system(&disc, Variant::Natural, StabParams { weight: 0.1, t: 0.0 })?;
    let sol = solve(&sys)?;
    Ok(ExactSolution::from_discrete(&disc, &sol))
}

fn slug(x: f64) -> String {
    format!("{x}").replace('.', "p").replace('-', "m")
}

fn dump_meshes(dir: &Path, disc: &Discretization, delta: f64) -> Result<()> {
    for (f, mesh) in disc.network().fractures().iter().zip(&disc.meshes) {
        std::fs::write(dir.join(format!("mesh_f{}_d{}.txt", f.id(), slug(delta))), mesh.dump())?;
    }
    Ok(())
}

/// Runs one sweep. Failures of single `(δ, weight)` points are recorded in the
/// rows; only configuration problems and output errors abort the run.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let problem = Arc::new(config.test.problem()?);
    let mode = match config.reference {
        Some(m) => m,
        None if problem.exact.is_some() => ReferenceMode::Analytic,
        None => ReferenceMode::FineMesh { factor: 4.0 },
    };
    let exact = match mode {
        ReferenceMode::Analytic => problem
            .exact
            .clone()
            .ok_or_else(|| DfnError::Config(format!("{} has no analytic solution", problem.name)))?,
        ReferenceMode::FineMesh { factor } => reference_solution(&problem, config, factor)?,
    };
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let test = config.test.name();

    let mut rows = Vec::with_capacity(config.deltas.len() * config.weights.len());
    for &delta in &config.deltas {
        let t0 = Instant::now();
        let params = MeshParams::uniform(&problem.network, delta, config.mesh.into());
        let disc = match discretize(problem.clone(), params) {
            Ok(d) => d,
            Err(e) => {
                let secs = t0.elapsed().as_secs_f64();
                for &w in &config.weights {
                    rows.push(failed_row(config, &test, delta, w, None, e.to_string(), secs));
                }
                continue;
            }
        };
        if config.dump_meshes {
            if let Some(dir) = &config.out_dir {
                dump_meshes(dir, &disc, delta)?;
            }
        }
        let setup = t0.elapsed().as_secs_f64();
        for &weight in &config.weights {
            let t1 = Instant::now();
            let dm = &disc.dofmap;
            let dofs = Some([dm.num_free_u(), dm.num_free_lambda(), dm.num_free_psi()]);
            let sp = StabParams { weight, t: config.t };
            let outcome = (|| -> Result<ErrorReport> {
                let sys = assemble_system(&disc, config.variant, sp)?;
                if config.dump_matrix {
                    if let Some(dir) = &config.out_dir {
                        let name = format!("matrix_{}_d{}_w{}.mtx", config.variant, slug(delta), slug(weight));
                        std::fs::write(dir.join(name), matrix_market(&sys.matrix))?;
                    }
                }
                let sol = solve(&sys)?;
                let cond = if config.compute_cond { Some(condition_number(&sys)?) } else { None };
                let conservation = flux_conservation_residual(&sol, &disc);
                error_report(&sol, &exact, &disc, config.variant, delta, sp, cond, conservation)
            })();
            let secs = setup + t1.elapsed().as_secs_f64();
            let secs = if config.record_timing { secs } else { 0.0 };
            rows.push(match outcome {
                Ok(report) => RunRow {
                    test: test.clone(),
                    variant: config.variant,
                    delta,
                    weight,
                    t: config.t,
                    dofs,
                    status: RowStatus::Ok,
                    message: None,
                    seconds: secs,
                    report: Some(report),
                },
                Err(e) => failed_row(config, &test, delta, weight, dofs, e.to_string(), secs),
            });
        }
    }

    let rates = rate_summaries(&rows, &config.weights);
    let report = RunReport {
        test,
        variant: config.variant,
        t: config.t,
        reference: mode,
        build_id: build_id(),
        wall_seconds: if config.record_timing { start.elapsed().as_secs_f64() } else { 0.0 },
        rows,
        rates,
    };
    if let Some(dir) = &config.out_dir {
        let stem = format!("{}_{}", report.test, report.variant);
        write_csv(&dir.join(format!("{stem}.csv")), &report)?;
        write_json(&dir.join(format!("{stem}.json")), &report)?;
    }
    Ok(report)
}

fn failed_row(
    config: &RunConfig,
    test: &str,
    delta: f64,
    weight: f64,
    dofs: Option<[usize; 3]>,
    message: String,
    seconds: f64,
) -> RunRow {
    RunRow {
        test: test.to_string(),
        variant: config.variant,
        delta,
        weight,
        t: config.t,
        dofs,
        status: RowStatus::Failed,
        message: Some(message),
        seconds: if config.record_timing { seconds } else { 0.0 },
        report: None,
    }
}

fn rate_summaries(rows: &[RunRow], weights: &[f64]) -> Vec<RateSummary> {
    let mut out = Vec::new();
    for &w in weights {
        let ok: Vec<&ErrorReport> = rows.iter().filter(|r| r.weight == w).filter_map(|r| r.report.as_ref()).collect();
        let deltas: Vec<f64> = ok.iter().map(|r| r.delta).collect();
        let l2e: Vec<f64> = ok.iter().map(|r| r.err_l2).collect();
        let h1e: Vec<f64> = ok.iter().map(|r| r.err_h1).collect();
        let (Ok(l2), Ok(h1)) = (eoc(&l2e, &deltas), eoc(&h1e, &deltas)) else {
            continue;
        };
        let l2_fit = eoc_fit(&l2e, &deltas, 3).unwrap_or(f64::NAN);
        let h1_fit = eoc_fit(&h1e, &deltas, 3).unwrap_or(f64::NAN);
        out.push(RateSummary { weight: w, deltas, l2, h1, l2_fit, h1_fit });
    }
    out
}
