//! Experiment configuration: a JSON schema with strict (unknown-key
//! rejecting) parsing and up-front validation, so typos and invalid physics
//! fail before any assembly starts.

use serde::{Deserialize, Serialize};
use shsfem_core::kl::VariableDistribution;
use shsfem_core::material::ElasticMode;
use shsfem_core::mesh::Rect;

use crate::expr::Expr;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    /// Convergence/error tables over mesh families, degrees and Poisson ratios.
    ErrorTable(ErrorTableConfig),
    /// Kernel-coercivity and inf-sup constants across a Lamé-parameter sweep.
    Stability(StabilityConfig),
    /// Covariance eigenpair diagnostics: spectra, trace, truncation errors.
    KlDiagnostics(KlDiagnosticsConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorTableConfig {
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub material: MaterialConfig,
    pub field: FieldConfig,
    pub loads: LoadsConfig,
    /// Reference solution for the error norms; omit to report solution norms
    /// only.
    #[serde(default)]
    pub exact: Option<ExactConfig>,
    /// Stochastic basis; required for Galerkin runs, ignored for per-sample.
    #[serde(default)]
    pub basis: Option<BasisConfig>,
    pub scheme: Scheme,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub recovery: Recovery,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub dirichlet: DirichletConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl DomainConfig {
    pub fn rect(&self) -> Result<Rect, String> {
        Rect::new(self.x[0], self.x[1], self.y[0], self.y[1]).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "snake_case")]
pub enum MeshConfig {
    /// Uniform axis-aligned grids, one per `[nx, ny]` entry.
    Rectangular { grids: Vec<[usize; 2]> },
    /// Distorted strip family by refinement level.
    Irregular {
        levels: Vec<usize>,
        #[serde(default)]
        pattern: Option<PatternConfig>,
    },
    /// Meshes loaded from plain-text files.
    File { paths: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub bottom: [f64; 4],
    pub top: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub mode: ModeConfig,
    /// Poisson ratios; each value contributes one table row group.
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    PlaneStress,
    PlaneStrain,
}

impl From<ModeConfig> for ElasticMode {
    fn from(m: ModeConfig) -> ElasticMode {
        match m {
            ModeConfig::PlaneStress => ElasticMode::PlaneStress,
            ModeConfig::PlaneStrain => ElasticMode::PlaneStrain,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "dist", rename_all = "snake_case")]
pub enum DistConfig {
    Uniform { range: [f64; 2] },
    Normal,
}

impl DistConfig {
    pub fn to_dist(&self) -> Result<VariableDistribution, String> {
        match self {
            DistConfig::Uniform { range } => {
                if !(range[1] > range[0]) {
                    return Err(format!("empty uniform range [{}, {}]", range[0], range[1]));
                }
                Ok(VariableDistribution::Uniform {
                    a: range[0],
                    b: range[1],
                })
            }
            DistConfig::Normal => Ok(VariableDistribution::StandardNormal),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum FieldConfig {
    /// Modulus given directly as an expression of `x1, x2, y1..yN`.
    Explicit {
        variables: Vec<DistConfig>,
        young: String,
        young_bounds: [f64; 2],
    },
    /// Modulus from a truncated covariance eigen-expansion around a mean.
    Kl {
        variables: Vec<DistConfig>,
        mean: String,
        kernel: KernelConfig,
        n_quad: usize,
        young_bounds: [f64; 2],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    Exponential { variance: f64, length: f64 },
    SquaredExponential { variance: f64, length: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsConfig {
    /// Body load components (expressions).
    #[serde(default)]
    pub f: Option<[String; 2]>,
    /// Traction components per boundary side.
    #[serde(default)]
    pub g: TractionConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionConfig {
    #[serde(default)]
    pub right: Option<[String; 2]>,
    #[serde(default)]
    pub top: Option<[String; 2]>,
    #[serde(default)]
    pub bottom: Option<[String; 2]>,
    #[serde(default)]
    pub left: Option<[String; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum ExactConfig {
    /// A built-in benchmark solution.
    Preset { preset: ExactPreset },
    /// Expression-based: displacement and Voigt stress; gradients by central
    /// differences.
    Expressions {
        u: [String; 2],
        sigma: [String; 3],
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ExactPreset {
    BendingPlaneStress,
    BendingPlaneStrain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum BasisConfig {
    /// Global polynomials; one row per degree multi-index.
    PVersion { sweep: Vec<Vec<usize>> },
    /// Piecewise polynomials on per-dimension partitions.
    KVersion { sweep: Vec<KVersionRow> },
    /// Hermite chaos over Gaussian germs.
    Gpc { sweep: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KVersionRow {
    /// Cells per dimension (uniform partitions).
    pub cells: Vec<usize>,
    /// Per-cell degree per dimension.
    pub q: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PsHybrid,
    Bilinear,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Galerkin,
    PerSample,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    #[default]
    Galerkin,
    PerSample,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Extra stochastic points per dimension in assembly beyond basis-pair
    /// exactness.
    pub stochastic_margin: usize,
    /// Spatial Gauss order of the error norms.
    pub error_spatial: usize,
    /// Stochastic points per dimension (per cell) of the error norms.
    pub error_stochastic: usize,
    /// Nodes per dimension of the per-sample quadrature.
    pub per_sample_points: usize,
    /// Spatial Gauss order for element matrices; 0 = automatic.
    pub spatial_order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            stochastic_margin: 5,
            error_spatial: 4,
            error_stochastic: 20,
            per_sample_points: 24,
            spatial_order: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DirichletConfig {
    /// Clamp to the reference solution (requires `exact`).
    #[default]
    Exact,
    Zero,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; defaults to `out`.
    pub dir: Option<String>,
    /// Also write each mesh as a plain-text listing.
    pub dump_meshes: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub domain: DomainConfig,
    pub mesh: [usize; 2],
    pub lambdas: Vec<f64>,
    pub field: FieldConfig,
    pub basis: BasisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlDiagnosticsConfig {
    pub kernel: KernelConfig,
    pub interval: [f64; 2],
    pub n_modes: usize,
    pub n_quad: usize,
    /// Truncation levels to report.
    #[serde(default)]
    pub truncation_levels: Vec<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Structural validation beyond the schema: physics bounds, expression
    /// syntax, dimension agreement.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ExperimentConfig::ErrorTable(c) => c.validate(),
            ExperimentConfig::Stability(c) => {
                c.domain.rect()?;
                if c.mesh[0] == 0 || c.mesh[1] == 0 {
                    return Err("mesh counts must be at least 1".into());
                }
                if c.lambdas.iter().any(|&l| !(l > 0.0)) {
                    return Err("Lamé sweep values must be positive".into());
                }
                validate_field(&c.field)?;
                Ok(())
            }
            ExperimentConfig::KlDiagnostics(c) => {
                if !(c.interval[1] > c.interval[0]) {
                    return Err("empty eigenproblem interval".into());
                }
                if c.n_modes == 0 || c.n_quad < c.n_modes {
                    return Err("need n_quad >= n_modes >= 1".into());
                }
                validate_kernel(&c.kernel)
            }
        }
    }
}

fn validate_kernel(k: &KernelConfig) -> Result<(), String> {
    let (v, l) = match k {
        KernelConfig::Exponential { variance, length }
        | KernelConfig::SquaredExponential { variance, length } => (*variance, *length),
    };
    if !(v > 0.0 && l > 0.0) {
        return Err("kernel variance and correlation length must be positive".into());
    }
    Ok(())
}

fn validate_expr(label: &str, src: &str, n_vars: usize, allow_modulus: bool) -> Result<(), String> {
    let e = Expr::parse(src).map_err(|err| format!("{label}: {err}"))?;
    if let Some(max) = e.max_variable() {
        if max + 1 > n_vars {
            return Err(format!(
                "{label}: references y{} but the model has {n_vars} variable(s)",
                max + 1
            ));
        }
    }
    if e.uses_modulus() && !allow_modulus {
        return Err(format!("{label}: 'E' is not available in this expression"));
    }
    Ok(())
}

fn validate_field(field: &FieldConfig) -> Result<(), String> {
    match field {
        FieldConfig::Explicit {
            variables,
            young,
            young_bounds,
        } => {
            if variables.is_empty() {
                return Err("field model needs at least one random variable".into());
            }
            for d in variables {
                d.to_dist()?;
            }
            if !(young_bounds[0] > 0.0 && young_bounds[1] >= young_bounds[0]) {
                return Err(format!(
                    "modulus bounds must be positive and ordered, got [{}, {}]",
                    young_bounds[0], young_bounds[1]
                ));
            }
            validate_expr("field.young", young, variables.len(), false)
        }
        FieldConfig::Kl {
            variables,
            mean,
            kernel,
            n_quad,
            young_bounds,
        } => {
            if variables.is_empty() {
                return Err("KL field needs one variable per retained mode".into());
            }
            for d in variables {
                d.to_dist()?;
            }
            if *n_quad < variables.len() {
                return Err("KL quadrature must resolve at least the retained modes".into());
            }
            if !(young_bounds[0] > 0.0 && young_bounds[1] >= young_bounds[0]) {
                return Err("modulus bounds must be positive and ordered".into());
            }
            validate_kernel(kernel)?;
            validate_expr("field.mean", mean, 0, false)
        }
    }
}

impl ErrorTableConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.domain.rect()?;
        match &self.mesh {
            MeshConfig::Rectangular { grids } => {
                if grids.is_empty() {
                    // empty study list is allowed: produces an empty table
                } else if grids.iter().any(|g| g[0] == 0 || g[1] == 0) {
                    return Err("mesh counts must be at least 1".into());
                }
            }
            MeshConfig::Irregular { .. } => {}
            MeshConfig::File { paths } => {
                if paths.iter().any(|p| p.is_empty()) {
                    return Err("empty mesh path".into());
                }
            }
        }
        for &nu in &self.material.nu {
            if !(nu > 0.0 && nu < 0.5) {
                return Err(format!("Poisson ratio must lie in (0, 0.5), got {nu}"));
            }
        }
        if self.material.nu.is_empty() {
            return Err("at least one Poisson ratio required".into());
        }
        validate_field(&self.field)?;
        let n_vars = match &self.field {
            FieldConfig::Explicit { variables, .. } | FieldConfig::Kl { variables, .. } => {
                variables.len()
            }
        };
        if let Some(f) = &self.loads.f {
            validate_expr("loads.f[0]", &f[0], n_vars, true)?;
            validate_expr("loads.f[1]", &f[1], n_vars, true)?;
        }
        for (side, g) in [
            ("right", &self.loads.g.right),
            ("top", &self.loads.g.top),
            ("bottom", &self.loads.g.bottom),
            ("left", &self.loads.g.left),
        ] {
            if let Some(g) = g {
                validate_expr(&format!("loads.g.{side}[0]"), &g[0], n_vars, true)?;
                validate_expr(&format!("loads.g.{side}[1]"), &g[1], n_vars, true)?;
            }
        }
        if let Some(ExactConfig::Expressions { u, sigma }) = &self.exact {
            for (i, s) in u.iter().enumerate() {
                validate_expr(&format!("exact.u[{i}]"), s, n_vars, true)?;
            }
            for (i, s) in sigma.iter().enumerate() {
                validate_expr(&format!("exact.sigma[{i}]"), s, n_vars, true)?;
            }
        }
        match (&self.method, &self.basis) {
            (Method::Galerkin, None) => {
                return Err("Galerkin runs need a stochastic basis".into())
            }
            (Method::Galerkin, Some(b)) => validate_basis(b, n_vars)?,
            (Method::PerSample, _) => {}
        }
        if self.dirichlet == DirichletConfig::Exact && self.exact.is_none() {
            return Err("dirichlet = exact requires a reference solution".into());
        }
        Ok(())
    }
}

fn validate_basis(basis: &BasisConfig, n_vars: usize) -> Result<(), String> {
    match basis {
        BasisConfig::PVersion { sweep } | BasisConfig::Gpc { sweep } => {
            if sweep.is_empty() {
                return Err("basis sweep must not be empty".into());
            }
            for row in sweep {
                if row.len() != n_vars {
                    return Err(format!(
                        "degree row {row:?} does not match {n_vars} variable(s)"
                    ));
                }
            }
            Ok(())
        }
        BasisConfig::KVersion { sweep } => {
            if sweep.is_empty() {
                return Err("basis sweep must not be empty".into());
            }
            for row in sweep {
                if row.cells.len() != n_vars || row.q.len() != n_vars {
                    return Err("k-version rows need cells and degrees per dimension".into());
                }
                if row.cells.contains(&0) {
                    return Err("k-version needs at least one cell per dimension".into());
                }
            }
            Ok(())
        }
    }
}
