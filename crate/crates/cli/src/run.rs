//! Executes a validated experiment config: builds the core objects, runs the
//! requested study, and writes `table.csv`, `table.md` and `run.json`.
//!
//! Everything is deterministic given the config — randomness only enters
//! through probability densities resolved by quadrature — so re-running the
//! config embedded in `run.json` reproduces the CSV byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix2, Point2, Vector2, Vector3};
use serde::Serialize;
use shsfem_core::analysis::{
    bending_exact_plane_strain, bending_exact_plane_stress, infsup_test,
    per_sample_solve_with_dirichlet, Benchmark, ErrorQuadrature, ExactSolution, RecoveryMode,
};
use shsfem_core::fem::{ElementKind, ProblemSetup};
use shsfem_core::kl::{
    solve_eigenpairs, truncation_error, CovarianceKernel, FieldMode, GeneralFn, KlDomain,
    RandomFieldModel, ScalarRandomField, VariableDistribution, VectorRandomField,
};
use shsfem_core::material::MaterialLaw;
use shsfem_core::mesh::{
    generate_irregular, generate_rectangular, DistortionPattern, QuadMesh, Rect, TRACTION_BOTTOM,
    TRACTION_LEFT, TRACTION_RIGHT, TRACTION_TOP,
};
use shsfem_core::stochastic::{
    build_gpc, build_k_version, build_p_version, uniform_partition, StochasticBasis,
};

use crate::config::*;
use crate::expr::{EvalCtx, Expr};
use crate::mesh_io;

/// Failure classification for process exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Configuration could not be parsed, validated or expanded (exit 2).
    Config(String),
    /// A solver stage failed (exit 3).
    Solver(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

fn config_err<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Config(e.to_string())
}

fn solver_err<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Solver(e.to_string())
}

/// One CSV/markdown record.
#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub study: String,
    pub scheme: String,
    pub method: String,
    pub basis: String,
    pub nu: f64,
    pub mesh: String,
    pub h: f64,
    pub dofs: usize,
    pub e_u: f64,
    pub e_sigma: f64,
    pub ratio_u: Option<f64>,
    pub ratio_sigma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub lambda: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub kernel_dim: usize,
    pub n_stress_dofs: usize,
    pub n_displacement_dofs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlRow {
    pub mode: usize,
    pub lambda: f64,
    pub truncation_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub rows: Vec<TableRow>,
    pub stability: Vec<StabilityRow>,
    pub kl_modes: Vec<KlRow>,
    pub kl_summary: Option<KlSummary>,
    pub wall_ms_per_row: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlSummary {
    pub trace: f64,
    pub spectrum_sum: f64,
    pub trace_residual: f64,
    pub gram_max_offdiagonal: f64,
}

/// Compiled field model plus the pieces the error norms need.
struct BuiltModel {
    variables: Vec<VariableDistribution>,
    model: Arc<RandomFieldModel>,
    /// Modulus as a general closure (for expression contexts).
    modulus: GeneralFn,
}

fn expr_field(
    expr: &Arc<Expr>,
    modulus: Option<GeneralFn>,
    nu: f64,
) -> GeneralFn {
    let expr = expr.clone();
    Arc::new(move |x: Point2<f64>, y: &[f64]| {
        let e = match &modulus {
            Some(m) => m(x, y),
            None => f64::NAN,
        };
        expr.eval(&EvalCtx {
            x1: x.x,
            x2: x.y,
            y,
            modulus: e,
            nu,
        })
    })
}

fn build_field(field: &FieldConfig, nu: f64, domain: Rect) -> Result<BuiltModel, RunError> {
    match field {
        FieldConfig::Explicit {
            variables,
            young,
            young_bounds,
        } => {
            let dists: Vec<VariableDistribution> = variables
                .iter()
                .map(|d| d.to_dist())
                .collect::<Result<_, _>>()
                .map_err(config_err)?;
            let expr = Expr::parse(young).map_err(config_err)?.shared();
            let modulus = expr_field(&expr, None, nu);
            let model = Arc::new(RandomFieldModel {
                variables: dists.clone(),
                young: ScalarRandomField::general(modulus.clone()),
                young_bounds: (young_bounds[0], young_bounds[1]),
                body: VectorRandomField::zero(),
                tractions: vec![],
            });
            Ok(BuiltModel {
                variables: dists,
                model,
                modulus,
            })
        }
        FieldConfig::Kl {
            variables,
            mean,
            kernel,
            n_quad,
            young_bounds,
        } => {
            let dists: Vec<VariableDistribution> = variables
                .iter()
                .map(|d| d.to_dist())
                .collect::<Result<_, _>>()
                .map_err(config_err)?;
            let mean_expr = Expr::parse(mean).map_err(config_err)?.shared();
            let mean_fn: shsfem_core::kl::SpatialFn = {
                let e = mean_expr.clone();
                Arc::new(move |x: Point2<f64>| {
                    e.eval(&EvalCtx {
                        x1: x.x,
                        x2: x.y,
                        y: &[],
                        modulus: f64::NAN,
                        nu,
                    })
                })
            };
            let core_kernel = match kernel {
                KernelConfig::Exponential { variance, length } => CovarianceKernel::Exponential {
                    variance: *variance,
                    length: *length,
                },
                KernelConfig::SquaredExponential { variance, length } => {
                    CovarianceKernel::SquaredExponential {
                        variance: *variance,
                        length: *length,
                    }
                }
            };
            // modulus varies along the beam axis; one retained mode per variable
            let sol = solve_eigenpairs(
                &core_kernel,
                KlDomain::Interval {
                    a: domain.x0,
                    b: domain.x1,
                },
                dists.len(),
                *n_quad,
            )
            .map_err(solver_err)?;
            let modes: Vec<FieldMode> = (0..dists.len())
                .map(|n| {
                    let dist = dists[n];
                    let m = dist.mean();
                    let sd = dist.std_dev();
                    FieldMode {
                        coeff: sol.coefficient_fn(n),
                        var: n,
                        transform: Some(Arc::new(move |v| (v - m) / sd)),
                    }
                })
                .collect();
            let young = ScalarRandomField::separable(mean_fn, modes);
            let young_for_expr = young.clone();
            let modulus: GeneralFn = Arc::new(move |x, y| young_for_expr.eval(x, y));
            let model = Arc::new(RandomFieldModel {
                variables: dists.clone(),
                young,
                young_bounds: (young_bounds[0], young_bounds[1]),
                body: VectorRandomField::zero(),
                tractions: vec![],
            });
            Ok(BuiltModel {
                variables: dists,
                model,
                modulus,
            })
        }
    }
}

fn attach_loads(
    built: &BuiltModel,
    loads: &LoadsConfig,
    nu: f64,
) -> Result<Arc<RandomFieldModel>, RunError> {
    let mut model = (*built.model).clone();
    if let Some(f) = &loads.f {
        let fx = Expr::parse(&f[0]).map_err(config_err)?.shared();
        let fy = Expr::parse(&f[1]).map_err(config_err)?.shared();
        model.body = VectorRandomField {
            components: [
                ScalarRandomField::general(expr_field(&fx, Some(built.modulus.clone()), nu)),
                ScalarRandomField::general(expr_field(&fy, Some(built.modulus.clone()), nu)),
            ],
        };
    }
    let mut tractions = Vec::new();
    for (group, g) in [
        (TRACTION_RIGHT, &loads.g.right),
        (TRACTION_TOP, &loads.g.top),
        (TRACTION_BOTTOM, &loads.g.bottom),
        (TRACTION_LEFT, &loads.g.left),
    ] {
        if let Some(g) = g {
            let gx = Expr::parse(&g[0]).map_err(config_err)?.shared();
            let gy = Expr::parse(&g[1]).map_err(config_err)?.shared();
            tractions.push((
                group,
                VectorRandomField {
                    components: [
                        ScalarRandomField::general(expr_field(&gx, Some(built.modulus.clone()), nu)),
                        ScalarRandomField::general(expr_field(&gy, Some(built.modulus.clone()), nu)),
                    ],
                },
            ));
        }
    }
    model.tractions = tractions;
    Ok(Arc::new(model))
}

fn build_exact(
    exact: &ExactConfig,
    built: &BuiltModel,
    nu: f64,
) -> Result<ExactSolution, RunError> {
    match exact {
        ExactConfig::Preset { preset } => Ok(match preset {
            ExactPreset::BendingPlaneStress => {
                bending_exact_plane_stress(nu, built.modulus.clone())
            }
            ExactPreset::BendingPlaneStrain => {
                bending_exact_plane_strain(nu, built.modulus.clone())
            }
        }),
        ExactConfig::Expressions { u, sigma } => {
            let u1 = Expr::parse(&u[0]).map_err(config_err)?.shared();
            let u2 = Expr::parse(&u[1]).map_err(config_err)?.shared();
            let s: Vec<Arc<Expr>> = sigma
                .iter()
                .map(|e| Expr::parse(e).map_err(config_err).map(Expr::shared))
                .collect::<Result<_, _>>()?;
            let fu1 = expr_field(&u1, Some(built.modulus.clone()), nu);
            let fu2 = expr_field(&u2, Some(built.modulus.clone()), nu);
            let fs: Vec<GeneralFn> = s
                .iter()
                .map(|e| expr_field(e, Some(built.modulus.clone()), nu))
                .collect();
            let (gu1, gu2) = (fu1.clone(), fu2.clone());
            Ok(ExactSolution {
                u: Arc::new(move |x, y| Vector2::new(fu1(x, y), fu2(x, y))),
                grad_u: Arc::new(move |x, y| {
                    // central differences; the step balances truncation and
                    // rounding for the expression magnitudes in play
                    let h = 1e-6 * (1.0 + x.x.abs().max(x.y.abs()));
                    let d1x = (gu1(Point2::new(x.x + h, x.y), y)
                        - gu1(Point2::new(x.x - h, x.y), y))
                        / (2.0 * h);
                    let d1y = (gu1(Point2::new(x.x, x.y + h), y)
                        - gu1(Point2::new(x.x, x.y - h), y))
                        / (2.0 * h);
                    let d2x = (gu2(Point2::new(x.x + h, x.y), y)
                        - gu2(Point2::new(x.x - h, x.y), y))
                        / (2.0 * h);
                    let d2y = (gu2(Point2::new(x.x, x.y + h), y)
                        - gu2(Point2::new(x.x, x.y - h), y))
                        / (2.0 * h);
                    Matrix2::new(d1x, d1y, d2x, d2y)
                }),
                sigma: Arc::new(move |x, y| {
                    Vector3::new(fs[0](x, y), fs[1](x, y), fs[2](x, y))
                }),
            })
        }
    }
}

fn build_meshes(
    mesh: &MeshConfig,
    domain: Rect,
) -> Result<Vec<(String, Arc<QuadMesh>)>, RunError> {
    match mesh {
        MeshConfig::Rectangular { grids } => grids
            .iter()
            .map(|&[nx, ny]| {
                generate_rectangular(nx, ny, domain)
                    .map(|m| (format!("{nx}x{ny}"), Arc::new(m)))
                    .map_err(config_err)
            })
            .collect(),
        MeshConfig::Irregular { levels, pattern } => {
            let pat = pattern
                .as_ref()
                .map(|p| DistortionPattern {
                    bottom: p.bottom,
                    top: p.top,
                })
                .unwrap_or_default();
            levels
                .iter()
                .map(|&level| {
                    generate_irregular(level, domain, &pat)
                        .map(|m| (format!("irregular-{level}"), Arc::new(m)))
                        .map_err(config_err)
                })
                .collect()
        }
        MeshConfig::File { paths } => paths
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p)
                    .map_err(|e| RunError::Config(format!("reading {p}: {e}")))?;
                let mesh = mesh_io::load(&text).map_err(config_err)?;
                Ok((
                    Path::new(p)
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.clone()),
                    Arc::new(mesh),
                ))
            })
            .collect(),
    }
}

struct BasisRow {
    label: String,
    build: Box<dyn Fn(&[VariableDistribution]) -> Result<StochasticBasis, RunError>>,
}

fn basis_rows(basis: &BasisConfig) -> Vec<BasisRow> {
    match basis {
        BasisConfig::PVersion { sweep } => sweep
            .iter()
            .map(|p| {
                let p = p.clone();
                BasisRow {
                    label: format!("p={p:?}"),
                    build: Box::new(move |d| build_p_version(d, &p).map_err(solver_err)),
                }
            })
            .collect(),
        BasisConfig::Gpc { sweep } => sweep
            .iter()
            .map(|p| {
                let p = p.clone();
                BasisRow {
                    label: format!("gpc p={p:?}"),
                    build: Box::new(move |d| build_gpc(d, &p).map_err(solver_err)),
                }
            })
            .collect(),
        BasisConfig::KVersion { sweep } => sweep
            .iter()
            .map(|row| {
                let cells = row.cells.clone();
                let q = row.q.clone();
                BasisRow {
                    label: format!("k cells={cells:?} q={q:?}"),
                    build: Box::new(move |d| {
                        let partitions: Vec<Vec<f64>> = d
                            .iter()
                            .zip(&cells)
                            .map(|(dist, &c)| uniform_partition(dist, c).map_err(solver_err))
                            .collect::<Result<_, _>>()?;
                        build_k_version(d, &partitions, &q).map_err(solver_err)
                    }),
                }
            })
            .collect(),
    }
}

/// Runs the study described by a validated config.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    config.validate().map_err(RunError::Config)?;
    match config {
        ExperimentConfig::ErrorTable(c) => run_error_table(c),
        ExperimentConfig::Stability(c) => run_stability(c),
        ExperimentConfig::KlDiagnostics(c) => run_kl(c),
    }
}

fn run_error_table(c: &ErrorTableConfig) -> Result<RunOutcome, RunError> {
    let domain = c.domain.rect().map_err(RunError::Config)?;
    let meshes = build_meshes(&c.mesh, domain)?;
    let kind = match c.scheme {
        Scheme::PsHybrid => ElementKind::PsHybrid,
        Scheme::Bilinear => ElementKind::Bilinear,
    };
    let recovery = match c.recovery {
        Recovery::Galerkin => RecoveryMode::Galerkin,
        Recovery::PerSample => RecoveryMode::PerSample,
    };
    let equad = ErrorQuadrature {
        spatial: c.quadrature.error_spatial,
        stochastic: c.quadrature.error_stochastic,
    };
    let mut rows = Vec::new();
    let mut walls = Vec::new();

    let brows: Vec<BasisRow> = match (&c.method, &c.basis) {
        (Method::PerSample, _) => vec![BasisRow {
            label: "collocation".into(),
            build: Box::new(|_| Err(RunError::Config("per-sample has no basis".into()))),
        }],
        (Method::Galerkin, Some(b)) => basis_rows(b),
        (Method::Galerkin, None) => {
            return Err(RunError::Config("Galerkin runs need a basis".into()))
        }
    };

    for &nu in &c.material.nu {
        let law = MaterialLaw::new(c.material.mode.into(), nu).map_err(config_err)?;
        let built = build_field(&c.field, nu, domain)?;
        let model = attach_loads(&built, &c.loads, nu)?;
        let built = BuiltModel {
            variables: built.variables,
            model,
            modulus: built.modulus,
        };
        let exact = match &c.exact {
            Some(e) => Some(build_exact(e, &built, nu)?),
            None => None,
        };
        let bench = Benchmark {
            law,
            model: built.model.clone(),
            exact: exact.clone().unwrap_or_else(|| ExactSolution {
                u: Arc::new(|_, _| Vector2::zeros()),
                grad_u: Arc::new(|_, _| Matrix2::zeros()),
                sigma: Arc::new(|_, _| Vector3::zeros()),
            }),
            domain,
        };
        for brow in &brows {
            let mut prev: Option<(f64, f64)> = None;
            for (label, mesh) in &meshes {
                let started = Instant::now();
                let (errs, dofs) = match c.method {
                    Method::PerSample => {
                        let clamp = if c.dirichlet == DirichletConfig::Exact {
                            bench.dirichlet()
                        } else {
                            shsfem_core::fem::DirichletData::Zero
                        };
                        let e = per_sample_solve_with_dirichlet(
                            &bench,
                            mesh,
                            kind,
                            c.quadrature.per_sample_points,
                            equad.spatial,
                            &clamp,
                        )
                        .map_err(solver_err)?;
                        (e, mesh.n_nodes() * 2)
                    }
                    Method::Galerkin => {
                        let basis = Arc::new((brow.build)(&built.variables)?);
                        let mut setup = ProblemSetup::new(
                            mesh.clone(),
                            bench.law.clone(),
                            bench.model.clone(),
                            basis,
                        )
                        .with_stochastic_margin(c.quadrature.stochastic_margin)
                        .with_spatial_order(c.quadrature.spatial_order);
                        if c.dirichlet == DirichletConfig::Exact {
                            setup = setup.with_dirichlet(bench.dirichlet());
                        }
                        let system =
                            shsfem_core::fem::assemble(&setup, kind).map_err(solver_err)?;
                        let dofs = system.dof_map.n_dofs();
                        let sol = shsfem_core::fem::solve(&system).map_err(solver_err)?;
                        // without a reference solution the zero placeholder
                        // makes these absolute solution norms
                        let errs = shsfem_core::analysis::error_norms(
                            &sol,
                            &bench.exact,
                            recovery,
                            &equad,
                        )
                        .map_err(solver_err)?;
                        (errs, dofs)
                    }
                };
                let wall = started.elapsed().as_secs_f64() * 1e3;
                let (ratio_u, ratio_sigma) = match prev {
                    Some((pu, ps)) => (Some(pu / errs.e_u), Some(ps / errs.e_sigma)),
                    None => (None, None),
                };
                prev = Some((errs.e_u, errs.e_sigma));
                rows.push(TableRow {
                    study: "error_table".into(),
                    scheme: format!("{:?}", c.scheme),
                    method: format!("{:?}", c.method),
                    basis: brow.label.clone(),
                    nu,
                    mesh: label.clone(),
                    h: mesh.h,
                    dofs,
                    e_u: errs.e_u,
                    e_sigma: errs.e_sigma,
                    ratio_u,
                    ratio_sigma,
                });
                walls.push(wall);
            }
        }
    }
    Ok(RunOutcome {
        rows,
        stability: vec![],
        kl_modes: vec![],
        kl_summary: None,
        wall_ms_per_row: walls,
    })
}

fn run_stability(c: &StabilityConfig) -> Result<RunOutcome, RunError> {
    let domain = c.domain.rect().map_err(RunError::Config)?;
    let mesh = Arc::new(
        generate_rectangular(c.mesh[0], c.mesh[1], domain).map_err(config_err)?,
    );
    let built = build_field(&c.field, 0.3, domain)?;
    let brow = basis_rows(&c.basis)
        .into_iter()
        .next()
        .ok_or_else(|| RunError::Config("stability sweep needs one basis row".into()))?;
    let basis = Arc::new((brow.build)(&built.variables)?);
    let mut stability = Vec::new();
    let mut walls = Vec::new();
    for &lambda in &c.lambdas {
        let started = Instant::now();
        let law = MaterialLaw::from_lame(1.0, lambda).map_err(config_err)?;
        let setup = ProblemSetup::new(mesh.clone(), law, built.model.clone(), basis.clone());
        let rep = infsup_test(&setup).map_err(solver_err)?;
        stability.push(StabilityRow {
            lambda,
            alpha_h: rep.alpha_h,
            beta_h: rep.beta_h,
            kernel_dim: rep.kernel_dim,
            n_stress_dofs: rep.n_stress_dofs,
            n_displacement_dofs: rep.n_displacement_dofs,
        });
        walls.push(started.elapsed().as_secs_f64() * 1e3);
    }
    Ok(RunOutcome {
        rows: vec![],
        stability,
        kl_modes: vec![],
        kl_summary: None,
        wall_ms_per_row: walls,
    })
}

fn run_kl(c: &KlDiagnosticsConfig) -> Result<RunOutcome, RunError> {
    let kernel = match &c.kernel {
        KernelConfig::Exponential { variance, length } => CovarianceKernel::Exponential {
            variance: *variance,
            length: *length,
        },
        KernelConfig::SquaredExponential { variance, length } => {
            CovarianceKernel::SquaredExponential {
                variance: *variance,
                length: *length,
            }
        }
    };
    let started = Instant::now();
    let sol = solve_eigenpairs(
        &kernel,
        KlDomain::Interval {
            a: c.interval[0],
            b: c.interval[1],
        },
        c.n_modes,
        c.n_quad,
    )
    .map_err(solver_err)?;
    let mut kl_modes = Vec::new();
    for (n, &lambda) in sol.lambdas.iter().enumerate() {
        kl_modes.push(KlRow {
            mode: n + 1,
            lambda,
            truncation_error: truncation_error(&sol, n + 1),
        });
    }
    for &level in &c.truncation_levels {
        if level > sol.lambdas.len() {
            return Err(RunError::Config(format!(
                "truncation level {level} exceeds the {} computed modes",
                sol.lambdas.len()
            )));
        }
    }
    // orthonormality residual of the computed modes on the grid
    let mut max_offdiag = 0.0f64;
    for i in 0..sol.lambdas.len() {
        for j in 0..sol.lambdas.len() {
            let mut ip = 0.0;
            for q in 0..sol.grid.points.len() {
                ip += sol.grid.weights[q] * sol.mode_values[(q, i)] * sol.mode_values[(q, j)];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            max_offdiag = max_offdiag.max((ip - target).abs());
        }
    }
    let summary = KlSummary {
        trace: sol.trace,
        spectrum_sum: sol.full_spectrum_sum,
        trace_residual: (sol.full_spectrum_sum - sol.trace).abs() / sol.trace,
        gram_max_offdiagonal: max_offdiag,
    };
    Ok(RunOutcome {
        rows: vec![],
        stability: vec![],
        kl_modes,
        kl_summary: Some(summary),
        wall_ms_per_row: vec![started.elapsed().as_secs_f64() * 1e3],
    })
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.12e}")
    }
}

pub fn table_csv(outcome: &RunOutcome) -> String {
    let mut out = String::new();
    if !outcome.rows.is_empty() {
        out.push_str("study,scheme,method,basis,nu,mesh,h,dofs,e_u,e_sigma,ratio_u,ratio_sigma\n");
        for r in &outcome.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.study,
                r.scheme,
                r.method,
                r.basis.replace(',', ";"),
                r.nu,
                r.mesh,
                fmt_num(r.h),
                r.dofs,
                fmt_num(r.e_u),
                fmt_num(r.e_sigma),
                r.ratio_u.map(fmt_num).unwrap_or_default(),
                r.ratio_sigma.map(fmt_num).unwrap_or_default(),
            );
        }
    }
    if !outcome.stability.is_empty() {
        out.push_str("lambda,alpha_h,beta_h,kernel_dim,n_stress_dofs,n_displacement_dofs\n");
        for r in &outcome.stability {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_num(r.lambda),
                fmt_num(r.alpha_h),
                fmt_num(r.beta_h),
                r.kernel_dim,
                r.n_stress_dofs,
                r.n_displacement_dofs
            );
        }
    }
    if !outcome.kl_modes.is_empty() {
        out.push_str("mode,lambda,truncation_error\n");
        for r in &outcome.kl_modes {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.mode,
                fmt_num(r.lambda),
                fmt_num(r.truncation_error)
            );
        }
        if let Some(s) = &outcome.kl_summary {
            let _ = writeln!(
                out,
                "trace,{},spectrum_sum,{},trace_residual,{},gram_max_offdiagonal,{}",
                fmt_num(s.trace),
                fmt_num(s.spectrum_sum),
                fmt_num(s.trace_residual),
                fmt_num(s.gram_max_offdiagonal)
            );
        }
    }
    out
}

/// Pivoted Markdown tables: one block per (basis, quantity) with one row per
/// Poisson ratio and one column per mesh.
pub fn table_markdown(outcome: &RunOutcome) -> String {
    let mut out = String::new();
    if !outcome.rows.is_empty() {
        let mut meshes: Vec<String> = Vec::new();
        for r in &outcome.rows {
            if !meshes.iter().any(|m| m == &r.mesh) {
                meshes.push(r.mesh.clone());
            }
        }
        let mut bases: Vec<String> = Vec::new();
        for r in &outcome.rows {
            if !bases.iter().any(|b| b == &r.basis) {
                bases.push(r.basis.clone());
            }
        }
        for quantity in ["e_u", "e_sigma"] {
            for basis in &bases {
                let _ = writeln!(out, "### {quantity} — {basis}\n");
                let _ = write!(out, "| nu |");
                for m in &meshes {
                    let _ = write!(out, " {m} |");
                }
                let _ = writeln!(out);
                let _ = write!(out, "|---|");
                for _ in &meshes {
                    let _ = write!(out, "---|");
                }
                let _ = writeln!(out);
                let mut nus: Vec<f64> = Vec::new();
                for r in &outcome.rows {
                    if &r.basis == basis && !nus.contains(&r.nu) {
                        nus.push(r.nu);
                    }
                }
                for nu in nus {
                    let _ = write!(out, "| {nu} |");
                    for m in &meshes {
                        let cell = outcome
                            .rows
                            .iter()
                            .find(|r| &r.basis == basis && r.nu == nu && &r.mesh == m)
                            .map(|r| {
                                let v = if quantity == "e_u" { r.e_u } else { r.e_sigma };
                                format!("{v:.4}")
                            })
                            .unwrap_or_default();
                        let _ = write!(out, " {cell} |");
                    }
                    let _ = writeln!(out);
                }
                let _ = writeln!(out);
            }
        }
    }
    if !outcome.stability.is_empty() {
        out.push_str("### stability constants\n\n| lambda | alpha_h | beta_h | kernel dim |\n|---|---|---|---|\n");
        for r in &outcome.stability {
            let _ = writeln!(
                out,
                "| {:.0e} | {:.5} | {:.5} | {} |",
                r.lambda, r.alpha_h, r.beta_h, r.kernel_dim
            );
        }
        out.push('\n');
    }
    if !outcome.kl_modes.is_empty() {
        out.push_str("### covariance spectrum\n\n| mode | lambda | truncation error |\n|---|---|---|\n");
        for r in &outcome.kl_modes {
            let _ = writeln!(
                out,
                "| {} | {:.6e} | {:.6e} |",
                r.mode, r.lambda, r.truncation_error
            );
        }
        if let Some(s) = &outcome.kl_summary {
            let _ = writeln!(
                out,
                "\ntrace {:.6e}, spectrum sum {:.6e}, residual {:.2e}, orthonormality {:.2e}",
                s.trace, s.spectrum_sum, s.trace_residual, s.gram_max_offdiagonal
            );
        }
    }
    out
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    wall_ms_per_row: &'a [f64],
}

/// Writes `table.csv`, `table.md` and `run.json` under `dir`; optionally the
/// generated meshes. Returns the output directory actually used.
pub fn write_outputs(
    config: &ExperimentConfig,
    outcome: &RunOutcome,
    out_dir_override: Option<&str>,
) -> Result<PathBuf, RunError> {
    let dir_name = out_dir_override
        .map(str::to_string)
        .or_else(|| match config {
            ExperimentConfig::ErrorTable(c) => c.output.dir.clone(),
            ExperimentConfig::Stability(c) => c.output.dir.clone(),
            ExperimentConfig::KlDiagnostics(c) => c.output.dir.clone(),
        })
        .unwrap_or_else(|| "out".into());
    let dir = PathBuf::from(dir_name);
    fs::create_dir_all(&dir).map_err(|e| RunError::Config(format!("creating {dir:?}: {e}")))?;
    fs::write(dir.join("table.csv"), table_csv(outcome))
        .map_err(|e| RunError::Config(e.to_string()))?;
    fs::write(dir.join("table.md"), table_markdown(outcome))
        .map_err(|e| RunError::Config(e.to_string()))?;
    let meta = RunMetadata {
        tool: "shsfem",
        version: env!("CARGO_PKG_VERSION"),
        config,
        wall_ms_per_row: &outcome.wall_ms_per_row,
    };
    fs::write(
        dir.join("run.json"),
        serde_json::to_string_pretty(&meta).map_err(|e| RunError::Config(e.to_string()))?,
    )
    .map_err(|e| RunError::Config(e.to_string()))?;

    let dump = match config {
        ExperimentConfig::ErrorTable(c) => c.output.dump_meshes,
        _ => false,
    };
    if dump {
        if let ExperimentConfig::ErrorTable(c) = config {
            let domain = c.domain.rect().map_err(RunError::Config)?;
            for (label, mesh) in build_meshes(&c.mesh, domain)? {
                fs::write(dir.join(format!("mesh-{label}.txt")), mesh_io::dump(&mesh))
                    .map_err(|e| RunError::Config(e.to_string()))?;
            }
        }
    }
    Ok(dir)
}
