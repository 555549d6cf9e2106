//! Scenario runner: declarative TOML scenarios dispatched across the
//! curvature, geodesic, embedding, and realization modules, with JSON
//! reports and CSV traces on disk, plus a built-in catalog of verified
//! scenarios.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conformal::{
    curvature_package, transform_check, ConformalChart, LaplaceStructure,
    MobiusStructure, WeylStructure,
};
use crate::embedding::{
    classify_geodesy, fundamental_form, mixed_schouten, normal_curvature_kappa,
    relative_schouten, EmbeddingStructures, Immersion,
};
use crate::error::{Error, Result};
use crate::geodesic::{
    integrate_conformal_geodesic, CurveState, CurveStructures, IntegrationOptions,
};
use crate::jets::ScalarField;
use crate::randfield::{random_metric, random_one_form};
use crate::realization::{
    build_total_metric, ricci_table_residual, section5_scenario, solve_prescription,
    RealizationData,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_tolerance() -> f64 {
    1e-6
}

/// One unit of work inside a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Curvature package on a grid plus a Weyl-offset invariance audit.
    Curvature,
    /// Integrate the conformal geodesic from `[curve]` and write a trace.
    Geodesic,
    /// Embedding invariants of `[immersion]` on the grid.
    Invariants,
    /// Geodesy classification of `[immersion]`.
    Classify,
    /// Realize `[realize]` targets and round-trip the invariants.
    Realize,
    /// Run the built-in rotating-frame verification scenario.
    VerifySection5,
}

impl Task {
    fn name(self) -> &'static str {
        match self {
            Task::Curvature => "curvature",
            Task::Geodesic => "geodesic",
            Task::Invariants => "invariants",
            Task::Classify => "classify",
            Task::Realize => "realize",
            Task::VerifySection5 => "verify_section5",
        }
    }
}

/// Chart description: either inline metric expressions or a seeded
/// random polynomial perturbation of the flat metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub dim: usize,
    /// Row-major `dim × dim` metric entries; omit for flat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<String>>,
    /// Draw the metric from the scenario seed instead (degree ≤ 3
    /// polynomial coefficients, uniform in [−1, 1] times `random_scale`).
    #[serde(default)]
    pub random: bool,
    #[serde(default = "default_random_scale")]
    pub random_scale: f64,
    /// Optional Weyl 1-form components; omit for the Levi-Civita gauge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl: Option<Vec<String>>,
}

fn default_random_scale() -> f64 {
    0.2
}

/// Immersion into the scenario manifold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSpec {
    pub dim: usize,
    /// One ambient coordinate expression per ambient dimension, in the
    /// source variables `x1..xn`.
    pub components: Vec<String>,
    /// Source Möbius fields (`n²` entries, only for `n = 2`); omit for
    /// the flat structure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobius: Option<Vec<String>>,
    /// Source Laplace field (only for `n = 1`); omit for flat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laplace: Option<String>,
    /// Expected diagonal value of the relative Schouten-Weyl tensor;
    /// when set, the invariants task checks `ρ = value·g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_diagonal: Option<f64>,
}

/// Initial conditions for the conformal geodesic integrator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default = "default_t_span")]
    pub t_span: [f64; 2],
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_t_span() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_step() -> f64 {
    1e-3
}

/// Prescribed invariants for the realization task: a rank-`r` bundle
/// over a flat `n`-dimensional base with identity fiber metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizeSpec {
    pub n: usize,
    pub r: usize,
    /// Trace-free fundamental form, `n·n·r` entries at `(i·n+j)·r+α`.
    pub b0: Vec<String>,
    /// Mixed Schouten-Weyl target, `n·r` entries at `i·r+α`.
    pub mu: Vec<String>,
    /// Relative Schouten-Weyl target, `n²` entries.
    pub rho: Vec<String>,
    /// Source Schouten substitute (`n²` entries); omit for zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_h: Option<Vec<String>>,
}

/// A declarative scenario: the manifold, optional structures, and the
/// task list, with one tolerance applied to every residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tasks: Vec<Task>,
    /// Expected geodesy class for the classify task
    /// (`strongly_geodesic`, `weakly_geodesic`, `totally_umbilical`,
    /// `none`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_class: Option<String>,
    /// Evaluation grid in source coordinates (immersion tasks) or
    /// chart coordinates (curvature task); defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immersion: Option<ImmersionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realize: Option<RealizeSpec>,
}

impl Scenario {
    /// Parse a scenario from TOML text.
    pub fn parse(text: &str) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| Error::Parse {
            position: e.span().map(|s| s.start).unwrap_or(0),
            message: format!("scenario file: {}", e.message()),
        })
    }

    /// Canonical serialized form used for hashing and determinism.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        format!("{digest:x}")
    }
}

/// Result of one task: a verdict, a residual table, optional per-point
/// tensor values, and the names of artifacts written next to the
/// report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    pub residuals: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
}

/// Full run report. Everything except `timings_ms` is deterministic
/// for a fixed scenario and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub scenario_name: String,
    pub scenario_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tolerance: f64,
    pub passed: bool,
    pub tasks: Vec<TaskReport>,
    pub timings_ms: BTreeMap<String, u128>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timing fields removed: byte-identical across runs
    /// of the same scenario and seed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("timings_ms");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }
}

/// Names of the built-in scenarios.
pub fn catalog_names() -> Vec<&'static str> {
    vec![
        "flat_line_r3",
        "unit_sphere_s3",
        "product_r3_s2",
        "section5_pseudogeodesic",
        "random_regression",
    ]
}

/// Look up a built-in scenario; unknown names report the available
/// entries.
pub fn catalog(name: &str) -> Result<Scenario> {
    let text = match name {
        "flat_line_r3" => {
            r#"
name = "flat_line_r3"
tolerance = 1e-8
tasks = ["invariants", "classify"]
expected_class = "strongly_geodesic"
grid = [[0.0], [0.5], [1.3]]

[manifold]
dim = 3

[immersion]
dim = 1
components = ["x1", "0", "0"]
"#
        }
        "unit_sphere_s3" => {
            r#"
name = "unit_sphere_s3"
tolerance = 1e-6
tasks = ["invariants", "classify"]
expected_class = "strongly_geodesic"
grid = [[0.3, -0.2, 0.5], [0.1, 0.2, -0.3]]

[manifold]
dim = 4

[immersion]
dim = 3
components = [
  "2*x1 / (1 + x1^2 + x2^2 + x3^2)",
  "2*x2 / (1 + x1^2 + x2^2 + x3^2)",
  "2*x3 / (1 + x1^2 + x2^2 + x3^2)",
  "(1 - x1^2 - x2^2 - x3^2) / (1 + x1^2 + x2^2 + x3^2)",
]
"#
        }
        "product_r3_s2" => {
            r#"
name = "product_r3_s2"
tolerance = 1e-6
tasks = ["invariants", "classify"]
expected_class = "weakly_geodesic"
grid = [[0.1, -0.2, 0.3], [0.0, 0.0, 0.0]]

[manifold]
dim = 5
metric = [
  "1", "0", "0", "0", "0",
  "0", "1", "0", "0", "0",
  "0", "0", "1", "0", "0",
  "0", "0", "0", "4 / (1 + x4^2 + x5^2)^2", "0",
  "0", "0", "0", "0", "4 / (1 + x4^2 + x5^2)^2",
]

[immersion]
dim = 3
components = ["x1", "x2", "x3", "0.4", "0 - 0.3"]
rho_diagonal = -0.08333333333333333
"#
        }
        "section5_pseudogeodesic" => {
            r#"
name = "section5_pseudogeodesic"
tolerance = 1e-6
tasks = ["verify_section5"]
"#
        }
        "random_regression" => {
            r#"
name = "random_regression"
tolerance = 1e-4
seed = 7
tasks = ["curvature", "geodesic"]
grid = [[0.0, 0.0, 0.0], [0.2, -0.1, 0.15]]

[manifold]
dim = 3
random = true

[curve]
x = [0.0, 0.0, 0.0]
v = [1.0, 0.2, -0.1]
w = [0.3, -0.2, 0.5]
t_span = [0.0, 0.5]
step = 0.002
"#
        }
        _ => {
            return Err(Error::Scenario(format!(
                "unknown catalog entry '{name}'; available: {}",
                catalog_names().join(", ")
            )))
        }
    };
    Scenario::parse(text)
}

struct BuiltManifold {
    chart: Arc<ConformalChart>,
    weyl: WeylStructure,
}

fn build_manifold(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<BuiltManifold> {
    let spec = scenario.manifold.as_ref().ok_or_else(|| {
        Error::Scenario("this task list needs a [manifold] table".into())
    })?;
    let m = spec.dim;
    let chart = match (&spec.metric, spec.random) {
        (Some(_), true) => {
            return Err(Error::Scenario(
                "[manifold] sets both inline metric entries and random = true".into(),
            ))
        }
        (Some(entries), false) => {
            let refs: Vec<&str> = entries.iter().map(String::as_str).collect();
            ConformalChart::parse(m, &refs)?
        }
        (None, true) => {
            if scenario.seed.is_none() {
                return Err(Error::Scenario(
                    "random manifolds need an explicit seed".into(),
                ));
            }
            ConformalChart::new(m, random_metric(rng, m, 3, spec.random_scale))?
        }
        (None, false) => ConformalChart::euclidean(m),
    };
    let weyl = match &spec.weyl {
        Some(entries) => {
            let fields: Vec<ScalarField> = entries
                .iter()
                .map(|e| ScalarField::parse(e, m))
                .collect::<Result<_>>()?;
            WeylStructure::new(&chart, fields)?
        }
        None => WeylStructure::levi_civita(&chart),
    };
    Ok(BuiltManifold { chart, weyl })
}

fn grid_of(scenario: &Scenario, dim: usize) -> Result<Vec<Vec<f64>>> {
    let grid = match &scenario.grid {
        Some(g) => g.clone(),
        None => vec![vec![0.0; dim]],
    };
    for p in &grid {
        if p.len() != dim {
            return Err(Error::Scenario(format!(
                "grid point has {} coordinates, expected {dim}",
                p.len()
            )));
        }
    }
    Ok(grid)
}

fn build_immersion(
    scenario: &Scenario,
    chart: &Arc<ConformalChart>,
) -> Result<Immersion> {
    let spec = scenario.immersion.as_ref().ok_or_else(|| {
        Error::Scenario("this task list needs an [immersion] table".into())
    })?;
    let refs: Vec<&str> = spec.components.iter().map(String::as_str).collect();
    Immersion::parse(spec.dim, chart, &refs)
}

/// Owned low-dimension source structures plus the borrowing view the
/// embedding API takes.
enum SourceStructures {
    None,
    Mobius(MobiusStructure),
    Laplace(LaplaceStructure),
}

impl SourceStructures {
    fn build(spec: &ImmersionSpec, imm: &Immersion) -> Result<SourceStructures> {
        let n = spec.dim;
        Ok(match n {
            1 => {
                let lap = match &spec.laplace {
                    Some(s) => LaplaceStructure::new(
                        imm.induced_chart(),
                        ScalarField::parse(s, 1)?,
                    )?,
                    None => LaplaceStructure::flat(imm.induced_chart())?,
                };
                SourceStructures::Laplace(lap)
            }
            2 => {
                let mob = match &spec.mobius {
                    Some(fields) => {
                        let parsed: Vec<ScalarField> = fields
                            .iter()
                            .map(|e| ScalarField::parse(e, 2))
                            .collect::<Result<_>>()?;
                        MobiusStructure::new(imm.induced_chart(), parsed)?
                    }
                    None => MobiusStructure::flat(imm.induced_chart())?,
                };
                SourceStructures::Mobius(mob)
            }
            _ => SourceStructures::None,
        })
    }

    fn view(&self) -> EmbeddingStructures<'_> {
        match self {
            SourceStructures::None => EmbeddingStructures::none(),
            SourceStructures::Mobius(m) => EmbeddingStructures::with_source_mobius(m),
            SourceStructures::Laplace(l) => EmbeddingStructures::with_source_laplace(l),
        }
    }
}

fn run_curvature(
    scenario: &Scenario,
    manifold: &BuiltManifold,
    rng: &mut ChaCha8Rng,
) -> Result<TaskReport> {
    let m = manifold.chart.dim();
    let grid = grid_of(scenario, m)?;
    let eta = random_one_form(rng, m, 1, 0.3);
    let mut residuals = BTreeMap::new();
    let mut worst = 0.0f64;
    let mut points = Vec::new();
    for p in &grid {
        let pkg = curvature_package(&manifold.weyl, p)?;
        let report = transform_check(&manifold.weyl, &eta, p)?;
        worst = worst.max(report.sigma_residual);
        worst = worst.max(report.faraday_residual);
        worst = worst.max(report.schouten_residual.unwrap_or(0.0));
        worst = worst.max(report.h0_residual.unwrap_or(0.0));
        worst = worst.max(report.weyl_residual.unwrap_or(0.0));
        points.push(serde_json::json!({
            "point": p,
            "scal": pkg.scal,
            "sigma": pkg.sigma,
            "ricci": pkg.ricci.coeffs(),
            "ricci_sup": pkg.ricci.sup_norm(),
            "faraday_sup": pkg.faraday.sup_norm(),
            "schouten": pkg.schouten.as_ref().map(|t| t.coeffs().to_vec()),
            "schouten_sup": pkg.schouten.as_ref().map(|t| t.sup_norm()),
            "weyl_sup": pkg.weyl.as_ref().map(|t| t.sup_norm()),
        }));
    }
    residuals.insert("transformation_law".into(), worst);
    Ok(TaskReport {
        task: Task::Curvature.name().into(),
        passed: worst < scenario.tolerance,
        verdict: None,
        residuals,
        points: Some(serde_json::Value::Array(points)),
        artifacts: Vec::new(),
    })
}

fn run_geodesic(
    scenario: &Scenario,
    manifold: &BuiltManifold,
    out_dir: Option<&Path>,
) -> Result<TaskReport> {
    let m = manifold.chart.dim();
    let spec = scenario.curve.as_ref().ok_or_else(|| {
        Error::Scenario("the geodesic task needs a [curve] table".into())
    })?;
    if spec.x.len() != m || spec.v.len() != m {
        return Err(Error::Scenario(format!(
            "curve initial conditions need {m} components"
        )));
    }
    let init = CurveState {
        t: spec.t_span[0],
        x: spec.x.clone(),
        v: spec.v.clone(),
        w: spec.w.clone().unwrap_or_else(|| vec![0.0; m]),
    };
    let trace = integrate_conformal_geodesic(
        &manifold.chart,
        CurveStructures::none(),
        &init,
        IntegrationOptions {
            t_span: (spec.t_span[0], spec.t_span[1]),
            step: spec.step,
        },
    )?;
    let residual = trace.max_residual();
    let mut artifacts = Vec::new();
    if let Some(dir) = out_dir {
        let name = "trace_geodesic.csv";
        let mut file = fs::File::create(dir.join(name))?;
        trace.write_csv(&mut file)?;
        artifacts.push(name.to_string());
    }
    let mut residuals = BTreeMap::new();
    residuals.insert("geodesic_equation".into(), residual);
    Ok(TaskReport {
        task: Task::Geodesic.name().into(),
        passed: residual < scenario.tolerance,
        verdict: None,
        residuals,
        points: None,
        artifacts,
    })
}

fn run_invariants(scenario: &Scenario, manifold: &BuiltManifold) -> Result<TaskReport> {
    let imm = build_immersion(scenario, &manifold.chart)?;
    let spec = scenario.immersion.as_ref().expect("checked in build_immersion");
    let source = SourceStructures::build(spec, &imm)?;
    let structures = source.view();
    let grid = grid_of(scenario, spec.dim)?;
    let mut points = Vec::new();
    let mut kappa_skew = 0.0f64;
    let mut rho_oracle = 0.0f64;
    for p in &grid {
        let ff = fundamental_form(&imm, &manifold.weyl, p)?;
        let kappa = normal_curvature_kappa(&imm, &manifold.weyl, p)?;
        kappa_skew = kappa_skew.max(kappa.skew_residual());
        let mu = mixed_schouten(&imm, &manifold.weyl, structures, p)?;
        let rho = relative_schouten(&imm, &manifold.weyl, structures, p)?;
        if let Some(diag) = spec.rho_diagonal {
            for a in 0..spec.dim {
                for b in 0..spec.dim {
                    let want = if a == b { diag } else { 0.0 };
                    rho_oracle = rho_oracle.max((rho.get(&[a, b]) - want).abs());
                }
            }
        }
        points.push(serde_json::json!({
            "point": p,
            "b0": ff.b0,
            "b0_sup": ff.b0_sup_norm(),
            "mean_curvature": ff.h,
            "mean_curvature_sup": ff.h_sup_norm(),
            "kappa": kappa.kappa,
            "kappa_sup": kappa.sup_norm(),
            "mu": mu.mu,
            "mu_sup": mu.sup_norm(),
            "rho": rho.coeffs(),
            "rho_sup": rho.sup_norm(),
        }));
    }
    let mut residuals = BTreeMap::new();
    residuals.insert("kappa_symmetry".into(), kappa_skew);
    let mut passed = kappa_skew < scenario.tolerance;
    if spec.rho_diagonal.is_some() {
        residuals.insert("rho_oracle".into(), rho_oracle);
        passed &= rho_oracle < scenario.tolerance;
    }
    Ok(TaskReport {
        task: Task::Invariants.name().into(),
        passed,
        verdict: None,
        residuals,
        points: Some(serde_json::Value::Array(points)),
        artifacts: Vec::new(),
    })
}

fn run_classify(scenario: &Scenario, manifold: &BuiltManifold) -> Result<TaskReport> {
    let imm = build_immersion(scenario, &manifold.chart)?;
    let spec = scenario.immersion.as_ref().expect("checked in build_immersion");
    let source = SourceStructures::build(spec, &imm)?;
    let grid = grid_of(scenario, spec.dim)?;
    let report = classify_geodesy(
        &imm,
        &manifold.weyl,
        source.view(),
        &grid,
        scenario.tolerance,
    )?;
    let verdict = report.class.to_string();
    let passed = match &scenario.expected_class {
        Some(expected) => &verdict == expected,
        None => true,
    };
    let mut residuals = BTreeMap::new();
    residuals.insert("b0_sup".into(), report.b0_sup);
    residuals.insert("mu_sup".into(), report.mu_sup);
    residuals.insert("rho_sup".into(), report.rho_sup);
    Ok(TaskReport {
        task: Task::Classify.name().into(),
        passed,
        verdict: Some(verdict),
        residuals,
        points: None,
        artifacts: Vec::new(),
    })
}

fn run_realize(scenario: &Scenario) -> Result<TaskReport> {
    let spec = scenario.realize.as_ref().ok_or_else(|| {
        Error::Scenario("the realize task needs a [realize] table".into())
    })?;
    let (n, r) = (spec.n, spec.r);
    let parse_all = |entries: &[String], expected: usize, what: &str| -> Result<Vec<ScalarField>> {
        if entries.len() != expected {
            return Err(Error::Scenario(format!(
                "[realize] {what} needs {expected} entries, got {}",
                entries.len()
            )));
        }
        entries.iter().map(|e| ScalarField::parse(e, n)).collect()
    };
    let mut geometry = RealizationData::trivial(n, r)?;
    geometry.b0 = parse_all(&spec.b0, n * n * r, "b0")?;
    let mu = parse_all(&spec.mu, n * r, "mu")?;
    let rho = parse_all(&spec.rho, n * n, "rho")?;
    let source_h = match &spec.source_h {
        Some(entries) => Some(parse_all(entries, n * n, "source_h")?),
        None => Some(vec![ScalarField::zero(n); n * n]),
    };
    let solved = solve_prescription(&geometry, &mu, &rho, source_h.as_deref())?;
    let grid = grid_of(scenario, n)?;
    let total = build_total_metric(&solved, &grid)?;
    let imm = total.zero_section()?;
    let w = WeylStructure::levi_civita(total.chart());
    let mob;
    let lap;
    let structures = match n {
        1 => {
            lap = LaplaceStructure::flat(imm.induced_chart())?;
            EmbeddingStructures::with_source_laplace(&lap)
        }
        2 => {
            mob = MobiusStructure::flat(imm.induced_chart())?;
            EmbeddingStructures::with_source_mobius(&mob)
        }
        _ => EmbeddingStructures::none(),
    };
    let mut round_trip = 0.0f64;
    let mut table = 0.0f64;
    for p in &grid {
        let mixed = mixed_schouten(&imm, &w, structures, p)?;
        for i in 0..n {
            for alpha in 0..r {
                round_trip = round_trip
                    .max((mixed.at(i, alpha) - mu[i * r + alpha].eval(p)?).abs());
            }
        }
        let got_rho = relative_schouten(&imm, &w, structures, p)?;
        let ff = fundamental_form(&imm, &w, p)?;
        for i in 0..n {
            for j in 0..n {
                round_trip =
                    round_trip.max((got_rho.get(&[i, j]) - rho[i * n + j].eval(p)?).abs());
                for alpha in 0..r {
                    round_trip = round_trip.max(
                        (ff.b0_at(i, j, alpha)
                            - geometry.b0[(i * n + j) * r + alpha].eval(p)?)
                        .abs(),
                    );
                }
            }
        }
        table = table.max(ricci_table_residual(&solved, &total, p)?);
    }
    let mut residuals = BTreeMap::new();
    residuals.insert("round_trip".into(), round_trip);
    residuals.insert("ricci_table".into(), table);
    Ok(TaskReport {
        task: Task::Realize.name().into(),
        passed: round_trip < scenario.tolerance && table < scenario.tolerance,
        verdict: None,
        residuals,
        points: None,
        artifacts: Vec::new(),
    })
}

fn run_section5(scenario: &Scenario) -> Result<TaskReport> {
    let report = section5_scenario()?;
    let mut residuals = BTreeMap::new();
    residuals.insert("frame_identities".into(), report.frame_identity_residual);
    residuals.insert("geodesic".into(), report.geodesic_residual);
    residuals.insert("schouten_pairing".into(), report.schouten_residual);
    residuals.insert("a_sup".into(), report.a_sup);
    residuals.insert("b_sup".into(), report.b_sup);
    let passed = report.frame_identity_residual < 1e-10
        && report.geodesic_residual < scenario.tolerance
        && report.schouten_residual < scenario.tolerance
        && report.b0_min > scenario.tolerance;
    Ok(TaskReport {
        task: Task::VerifySection5.name().into(),
        passed,
        verdict: Some(format!(
            "{} with b0 bounded below by {:.3}",
            report.classification, report.b0_min
        )),
        residuals,
        points: None,
        artifacts: Vec::new(),
    })
}

/// Run every task of the scenario; artifacts go to `out_dir` when
/// given. The report's `passed` is true iff every task passed.
pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>) -> Result<Report> {
    if scenario.tasks.is_empty() {
        return Err(Error::Scenario("scenario lists no tasks".into()));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed.unwrap_or(0));
    let needs_manifold = scenario
        .tasks
        .iter()
        .any(|t| !matches!(t, Task::Realize | Task::VerifySection5));
    let manifold = if needs_manifold {
        Some(build_manifold(scenario, &mut rng)?)
    } else {
        None
    };
    let mut tasks = Vec::new();
    let mut timings = BTreeMap::new();
    for task in &scenario.tasks {
        let start = Instant::now();
        let report = match task {
            Task::Curvature => {
                run_curvature(scenario, manifold.as_ref().unwrap(), &mut rng)?
            }
            Task::Geodesic => {
                run_geodesic(scenario, manifold.as_ref().unwrap(), out_dir)?
            }
            Task::Invariants => run_invariants(scenario, manifold.as_ref().unwrap())?,
            Task::Classify => run_classify(scenario, manifold.as_ref().unwrap())?,
            Task::Realize => run_realize(scenario)?,
            Task::VerifySection5 => run_section5(scenario)?,
        };
        timings.insert(task.name().to_string(), start.elapsed().as_millis());
        tasks.push(report);
    }
    let passed = tasks.iter().all(|t| t.passed);
    let report = Report {
        tool_version: TOOL_VERSION.to_string(),
        scenario_name: scenario.name.clone(),
        scenario_hash: scenario.hash(),
        seed: scenario.seed,
        tolerance: scenario.tolerance,
        passed,
        tasks,
        timings_ms: timings,
    };
    if let Some(dir) = out_dir {
        fs::write(dir.join("report.json"), report.to_json())?;
    }
    Ok(report)
}

/// Resolve a `run` argument: an existing file wins, otherwise a
/// catalog name.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = PathBuf::from(arg);
    if path.exists() {
        Scenario::parse(&fs::read_to_string(path)?)
    } else {
        catalog(arg)
    }
}

/// Process exit code for an error, per the external contract: parse
/// failures exit 2, validation failures 3, numerical failures 4.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } => 2,
        Error::Dimension(_)
        | Error::MissingStructure(_)
        | Error::WeightMismatch { .. }
        | Error::Scenario(_)
        | Error::RankDeficient(_)
        | Error::Io(_) => 3,
        Error::Numerical(_) | Error::SingularMetric | Error::Domain(_) => 4,
    }
}
