//! Error analysis and diagnostics: stochastic Sobolev error norms, the two
//! cantilever bending benchmarks, a collocation (per-sample) reference
//! solver, numerical kernel-coercivity / inf-sup constants, and convergence
//! bookkeeping.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::fem::{
    self, gather_element, ps_element_blocks, solve_deterministic, DeterministicProblem,
    DirichletData, DiscreteSolution, ElementKind, ProblemSetup, SampleSolution, StochasticTables,
};
use crate::kl::{
    FieldMode, RandomFieldModel, ScalarRandomField, VariableDistribution, VectorRandomField,
};
use crate::material::{ElasticMode, MaterialLaw};
use crate::mesh::{QuadMesh, Rect, TRACTION_RIGHT};
use crate::num::sqrt;
use crate::quadrature::gauss_legendre_2d;
use crate::stochastic::{self, StochasticBasis, StochasticQuadrature};

/// Closed-form reference solution of a boundary-value problem, as functions
/// of the spatial point and the model random variables.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: Arc<dyn Fn(Point2<f64>, &[f64]) -> Vector2<f64> + Send + Sync>,
    /// Gradient rows are components, columns derivatives: `(∂u_i/∂x_j)`.
    pub grad_u: Arc<dyn Fn(Point2<f64>, &[f64]) -> Matrix2<f64> + Send + Sync>,
    /// Voigt stress `(σ11, σ22, σ12)`.
    pub sigma: Arc<dyn Fn(Point2<f64>, &[f64]) -> Vector3<f64> + Send + Sync>,
}

impl ExactSolution {
    /// Residuals of the constitutive identity `σ = E C ε(u)` (with ε from
    /// central differences of `u`) and of the gradient consistency
    /// `∇u ≈ grad_u`, maximized over the given spot-check points.
    pub fn consistency_residual(
        &self,
        law: &MaterialLaw,
        model: &RandomFieldModel,
        points: &[Point2<f64>],
        samples: &[Vec<f64>],
    ) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let h = 1e-5;
        for y in samples {
            for &x in points {
                let up = |dx: f64, dy: f64| (self.u)(Point2::new(x.x + dx, x.y + dy), y);
                let du_dx = (up(h, 0.0) - up(-h, 0.0)) / (2.0 * h);
                let du_dy = (up(0.0, h) - up(0.0, -h)) / (2.0 * h);
                let strain = Vector3::new(du_dx.x, du_dy.y, du_dx.y + du_dy.x);
                let e_mod = model.young_at(x, y)?;
                let sig = law.stress_from_strain(e_mod, strain);
                let sig_ref = (self.sigma)(x, y);
                // scale covers the cancellation in E·(2μ+λ)·ε near the
                // incompressible limit, where finite differences lose digits
                let scale = 1.0
                    + sig_ref.norm()
                    + e_mod * (2.0 * law.mu_hat + law.lambda_hat) * strain.norm();
                worst = worst.max((sig - sig_ref).norm() / scale);
                let g = (self.grad_u)(x, y);
                let g_fd = Matrix2::new(du_dx.x, du_dy.x, du_dx.y, du_dy.y);
                worst = worst.max((g - g_fd).norm() / (1.0 + g.norm()));
            }
        }
        Ok(worst)
    }
}

/// A fully specified benchmark problem: material, random inputs, reference
/// solution, domain.
#[derive(Clone)]
pub struct Benchmark {
    pub law: MaterialLaw,
    pub model: Arc<RandomFieldModel>,
    pub exact: ExactSolution,
    pub domain: Rect,
}

impl Benchmark {
    /// Dirichlet data interpolating the reference displacement.
    pub fn dirichlet(&self) -> DirichletData {
        let u = self.exact.u.clone();
        DirichletData::Function(Arc::new(move |x, y| u(x, y)))
    }
}

/// Strip domain shared by the bending benchmarks.
pub fn strip_domain() -> Rect {
    Rect::new(0.0, 10.0, -1.0, 1.0).expect("valid strip")
}

/// Reference solution of the plane-stress bending problem: the traction
/// `(-2 E x₂, 0)` at the loaded end produces `u = (-2x₁x₂, x₁² + ν(x₂²-1))`
/// and the single stress component `σ11 = -2 E x₂`. The modulus enters only
/// through the stress, so the displacement is deterministic.
pub fn bending_exact_plane_stress(nu: f64, modulus: crate::kl::GeneralFn) -> ExactSolution {
    let m2 = modulus.clone();
    ExactSolution {
        u: Arc::new(move |x, _| {
            Vector2::new(-2.0 * x.x * x.y, x.x * x.x + nu * (x.y * x.y - 1.0))
        }),
        grad_u: Arc::new(move |x, _| {
            Matrix2::new(-2.0 * x.y, -2.0 * x.x, 2.0 * x.x, 2.0 * nu * x.y)
        }),
        sigma: Arc::new(move |x, y| Vector3::new(-2.0 * m2(x, y) * x.y, 0.0, 0.0)),
    }
}

/// Plane-strain counterpart with the `(1-ν²)` kinematic factors.
pub fn bending_exact_plane_strain(nu: f64, modulus: crate::kl::GeneralFn) -> ExactSolution {
    let a = 1.0 - nu * nu;
    let b = nu * (1.0 + nu);
    let m2 = modulus.clone();
    ExactSolution {
        u: Arc::new(move |x, _| {
            Vector2::new(-2.0 * a * x.x * x.y, a * x.x * x.x + b * (x.y * x.y - 1.0))
        }),
        grad_u: Arc::new(move |x, _| {
            Matrix2::new(-2.0 * a * x.y, -2.0 * a * x.x, 2.0 * a * x.x, 2.0 * b * x.y)
        }),
        sigma: Arc::new(move |x, y| Vector3::new(-2.0 * m2(x, y) * x.y, 0.0, 0.0)),
    }
}

/// Plane-stress cantilever bending of the strip `(0,10)×(-1,1)` with an
/// end moment traction `g = (-2 E x₂, 0)` at `x₁ = 10`, clamped at `x₁ = 0`,
/// Young's modulus a uniform random variable on `[500, 1500]`, ν = 0.25.
pub fn uniform_modulus_bending() -> Benchmark {
    let nu = 0.25;
    let law = MaterialLaw::new(ElasticMode::PlaneStress, nu).unwrap();
    let dist = VariableDistribution::Uniform {
        a: 500.0,
        b: 1500.0,
    };
    let mean = dist.mean();
    let sd = dist.std_dev();
    let young = ScalarRandomField {
        general: None,
        mean: Arc::new(move |_| mean),
        modes: alloc::vec![FieldMode {
            coeff: Arc::new(move |_| sd),
            var: 0,
            transform: Some(Arc::new(move |y| (y - mean) / sd)),
        }],
    };
    let traction = VectorRandomField {
        components: [
            ScalarRandomField {
                general: None,
                mean: Arc::new(move |x: Point2<f64>| -2.0 * mean * x.y),
                modes: alloc::vec![FieldMode {
                    coeff: Arc::new(move |x: Point2<f64>| -2.0 * sd * x.y),
                    var: 0,
                    transform: Some(Arc::new(move |y| (y - mean) / sd)),
                }],
            },
            ScalarRandomField::constant(0.0),
        ],
    };
    let model = Arc::new(RandomFieldModel {
        variables: alloc::vec![dist],
        young,
        young_bounds: (500.0, 1500.0),
        body: VectorRandomField::zero(),
        tractions: alloc::vec![(TRACTION_RIGHT, traction)],
    });
    let exact = ExactSolution {
        u: Arc::new(move |x, _| {
            Vector2::new(-2.0 * x.x * x.y, x.x * x.x + nu * (x.y * x.y - 1.0))
        }),
        grad_u: Arc::new(move |x, _| {
            Matrix2::new(-2.0 * x.y, -2.0 * x.x, 2.0 * x.x, 2.0 * nu * x.y)
        }),
        sigma: Arc::new(|x, y| Vector3::new(-2.0 * y[0] * x.y, 0.0, 0.0)),
    };
    Benchmark {
        law,
        model,
        exact,
        domain: strip_domain(),
    }
}

/// Plane-strain variant on the same strip with `E = 1 + ξ²` for a standard
/// normal ξ and a Poisson ratio parameter (up to the incompressible limit).
pub fn normal_squared_modulus_bending(nu: f64) -> Result<Benchmark> {
    let law = MaterialLaw::new(ElasticMode::PlaneStrain, nu)?;
    let dist = VariableDistribution::StandardNormal;
    let young = ScalarRandomField {
        general: None,
        mean: Arc::new(|_| 2.0),
        modes: alloc::vec![FieldMode {
            coeff: Arc::new(|_| 1.0),
            var: 0,
            transform: Some(Arc::new(|xi| xi * xi - 1.0)),
        }],
    };
    let traction = VectorRandomField {
        components: [
            ScalarRandomField {
                general: None,
                mean: Arc::new(|x: Point2<f64>| -4.0 * x.y),
                modes: alloc::vec![FieldMode {
                    coeff: Arc::new(|x: Point2<f64>| -2.0 * x.y),
                    var: 0,
                    transform: Some(Arc::new(|xi| xi * xi - 1.0)),
                }],
            },
            ScalarRandomField::constant(0.0),
        ],
    };
    let model = Arc::new(RandomFieldModel {
        variables: alloc::vec![dist],
        young,
        young_bounds: (1.0, f64::INFINITY),
        body: VectorRandomField::zero(),
        tractions: alloc::vec![(TRACTION_RIGHT, traction)],
    });
    let a = 1.0 - nu * nu;
    let b = nu * (1.0 + nu);
    let exact = ExactSolution {
        u: Arc::new(move |x, _| {
            Vector2::new(-2.0 * a * x.x * x.y, a * x.x * x.x + b * (x.y * x.y - 1.0))
        }),
        grad_u: Arc::new(move |x, _| {
            Matrix2::new(-2.0 * a * x.y, -2.0 * a * x.x, 2.0 * a * x.x, 2.0 * b * x.y)
        }),
        sigma: Arc::new(|x, y| Vector3::new(-2.0 * (1.0 + y[0] * y[0]) * x.y, 0.0, 0.0)),
    };
    Ok(Benchmark {
        law,
        model,
        exact,
        domain: strip_domain(),
    })
}

/// Which stress field enters the error norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    /// Stress from the coupled Galerkin parameters.
    Galerkin,
    /// Stress re-solved element-wise at each stochastic quadrature node.
    PerSample,
}

/// Quadrature orders for the error norms.
#[derive(Debug, Clone, Copy)]
pub struct ErrorQuadrature {
    /// Spatial Gauss points per direction.
    pub spatial: usize,
    /// Stochastic points per dimension (per cell for partitioned bases).
    pub stochastic: usize,
}

impl Default for ErrorQuadrature {
    fn default() -> Self {
        ErrorQuadrature {
            spatial: 4,
            stochastic: 20,
        }
    }
}

/// Relative errors in the stochastic energy norms; `absolute` flags that a
/// zero reference norm forced absolute reporting.
#[derive(Debug, Clone, Copy)]
pub struct ErrorPair {
    pub e_u: f64,
    pub e_sigma: f64,
    pub absolute: bool,
}

fn voigt_norm2(s: &Vector3<f64>) -> f64 {
    s.x * s.x + s.y * s.y + 2.0 * s.z * s.z
}

/// `|u - u_h|₁̃ / |u|₁̃` and `‖σ - σ_h‖₀̃ / ‖σ‖₀̃` by tensor quadrature.
pub fn error_norms(
    sol: &DiscreteSolution,
    exact: &ExactSolution,
    recovery: RecoveryMode,
    quad: &ErrorQuadrature,
) -> Result<ErrorPair> {
    let setup = &sol.setup;
    let mesh = &setup.mesh;
    let squad = setup.basis.error_quadrature(quad.stochastic);
    let (pts, wts) = gauss_legendre_2d(quad.spatial);
    let n_vars = setup.basis.n_dims();
    let mut y_model = alloc::vec![0.0; n_vars];

    let m = sol.m;
    let mut psi = alloc::vec![0.0; m];
    let mut num_u = 0.0;
    let mut den_u = 0.0;
    let mut num_s = 0.0;
    let mut den_s = 0.0;
    for q in 0..squad.len() {
        let y_int = squad.point(q);
        setup.basis.to_model_coords(y_int, &mut y_model);
        setup.basis.eval_all(y_int, &mut psi);
        let wq = squad.weights[q];
        for e in 0..mesh.n_elements() {
            let map = mesh.element_map(e);
            let ue = sol.element_displacement_values(e, &psi);
            // the stress parameters are fixed per (y, element)
            let beta = match (sol.kind, recovery) {
                (ElementKind::PsHybrid, RecoveryMode::PerSample) => {
                    Some(sol.per_sample_beta(e, y_int)?)
                }
                (ElementKind::PsHybrid, RecoveryMode::Galerkin) => {
                    Some(sol.element_beta_values(e, &psi))
                }
                _ => None,
            };
            for (k, &xh) in pts.iter().enumerate() {
                let (j, det) = map.jacobian(xh);
                let w = wq * wts[k] * det;
                let x = map.map(xh);
                let g_ex = (exact.grad_u)(x, &y_model);
                let j_inv_t =
                    Matrix2::new(j[(1, 1)], -j[(1, 0)], -j[(0, 1)], j[(0, 0)]) / det;
                let gref = crate::fem::shape_ref_gradients(xh);
                let mut g_h = Matrix2::zeros();
                for a in 0..4 {
                    let gx = j_inv_t[(0, 0)] * gref[a][0] + j_inv_t[(0, 1)] * gref[a][1];
                    let gy = j_inv_t[(1, 0)] * gref[a][0] + j_inv_t[(1, 1)] * gref[a][1];
                    for comp in 0..2 {
                        g_h[(comp, 0)] += ue[a * 2 + comp] * gx;
                        g_h[(comp, 1)] += ue[a * 2 + comp] * gy;
                    }
                }
                num_u += w * (g_ex - g_h).norm_squared();
                den_u += w * g_ex.norm_squared();
                if let Some(beta) = &beta {
                    let s_ex = (exact.sigma)(x, &y_model);
                    let s_h = crate::fem::stress_mode(&map, xh)? * beta;
                    num_s += w * voigt_norm2(&(s_ex - s_h));
                    den_s += w * voigt_norm2(&s_ex);
                }
            }
        }
    }
    let absolute = den_u <= 0.0 || (sol.kind == ElementKind::PsHybrid && den_s <= 0.0);
    let e_u = if den_u > 0.0 {
        sqrt(num_u / den_u)
    } else {
        sqrt(num_u)
    };
    let e_sigma = if sol.kind == ElementKind::PsHybrid {
        if den_s > 0.0 {
            sqrt(num_s / den_s)
        } else {
            sqrt(num_s)
        }
    } else {
        f64::NAN
    };
    Ok(ErrorPair {
        e_u,
        e_sigma,
        absolute,
    })
}

/// Deterministic errors of one sample solution against the reference at a
/// fixed stochastic point (squared numerators/denominators, for weighting).
struct SampleErrors {
    num_u: f64,
    den_u: f64,
    num_s: f64,
    den_s: f64,
}

fn sample_errors(
    sol: &SampleSolution,
    mesh: &QuadMesh,
    exact: &ExactSolution,
    y_model: &[f64],
    spatial: usize,
    with_stress: bool,
) -> Result<SampleErrors> {
    let (pts, wts) = gauss_legendre_2d(spatial);
    let mut out = SampleErrors {
        num_u: 0.0,
        den_u: 0.0,
        num_s: 0.0,
        den_s: 0.0,
    };
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        for (k, &xh) in pts.iter().enumerate() {
            let (_, det) = map.jacobian(xh);
            let w = wts[k] * det;
            let x = map.map(xh);
            let g_ex = (exact.grad_u)(x, y_model);
            let g_h = sol.displacement_gradient_at(mesh, e, xh);
            out.num_u += w * (g_ex - g_h).norm_squared();
            out.den_u += w * g_ex.norm_squared();
            if with_stress {
                let s_ex = (exact.sigma)(x, y_model);
                let s_h = sol.stress_at(mesh, e, xh)?;
                out.num_s += w * voigt_norm2(&(s_ex - s_h));
                out.den_s += w * voigt_norm2(&s_ex);
            }
        }
    }
    Ok(out)
}

/// Collocation reference clamped to the benchmark's reference displacement.
pub fn per_sample_solve(
    bench: &Benchmark,
    mesh: &QuadMesh,
    kind: ElementKind,
    n_stoch: usize,
    spatial_error_order: usize,
) -> Result<ErrorPair> {
    per_sample_solve_with_dirichlet(
        bench,
        mesh,
        kind,
        n_stoch,
        spatial_error_order,
        &bench.dirichlet(),
    )
}

/// Collocation reference: a deterministic solve at every node of a
/// density-weighted quadrature over the model variables, errors combined by
/// the same rule.
pub fn per_sample_solve_with_dirichlet(
    bench: &Benchmark,
    mesh: &QuadMesh,
    kind: ElementKind,
    n_stoch: usize,
    spatial_error_order: usize,
    dirichlet: &DirichletData,
) -> Result<ErrorPair> {
    let dists = &bench.model.variables;
    let squad: StochasticQuadrature = if dists.is_empty() {
        stochastic::quadrature(&[], &[])?
    } else {
        stochastic::quadrature(dists, &alloc::vec![n_stoch; dists.len()])?
    };
    let mut num_u = 0.0;
    let mut den_u = 0.0;
    let mut num_s = 0.0;
    let mut den_s = 0.0;
    for q in 0..squad.len() {
        let y = squad.point(q);
        let model = bench.model.clone();
        let young = move |x: Point2<f64>| model.young_at(x, y);
        let model2 = bench.model.clone();
        let body = move |x: Point2<f64>| model2.body_at(x, y);
        let model3 = bench.model.clone();
        let traction = move |group: usize, x: Point2<f64>| model3.traction_at(group, x, y);
        let clamp = move |x: Point2<f64>| dirichlet.eval_at(x, y);
        let problem = DeterministicProblem {
            mesh,
            law: &bench.law,
            young: &young,
            body: &body,
            traction: &traction,
            dirichlet: &clamp,
            kind,
            spatial_order: 0,
        };
        let sol = solve_deterministic(&problem).map_err(|e| match e {
            Error::SingularSystem(msg) => {
                Error::SingularSystem(alloc::format!("sample {q} failed: {msg}"))
            }
            other => other,
        })?;
        let errs = sample_errors(
            &sol,
            mesh,
            &bench.exact,
            y,
            spatial_error_order,
            kind == ElementKind::PsHybrid,
        )?;
        let w = squad.weights[q];
        num_u += w * errs.num_u;
        den_u += w * errs.den_u;
        num_s += w * errs.num_s;
        den_s += w * errs.den_s;
    }
    let absolute = den_u <= 0.0;
    Ok(ErrorPair {
        e_u: if absolute {
            sqrt(num_u)
        } else {
            sqrt(num_u / den_u)
        },
        e_sigma: if kind != ElementKind::PsHybrid {
            f64::NAN
        } else if den_s > 0.0 {
            sqrt(num_s / den_s)
        } else {
            sqrt(num_s)
        },
        absolute,
    })
}

/// Numerically computed stability constants of the discrete mixed problem.
#[derive(Debug, Clone, Copy)]
pub struct InfSupReport {
    /// Kernel coercivity: smallest Rayleigh quotient of the compliance form
    /// over the discrete kernel of the coupling operator.
    pub alpha_h: f64,
    /// Inf-sup constant: smallest singular value of the coupling operator in
    /// the natural norms.
    pub beta_h: f64,
    pub kernel_dim: usize,
    pub n_stress_dofs: usize,
    pub n_displacement_dofs: usize,
}

/// Builds the dense coupling matrix `B`, the compliance form `A`, and the
/// norm Gram matrices, then extracts α_h (generalized eigenvalue on the
/// null space of `Bᵀ`) and β_h (smallest singular value after symmetric
/// norm scaling). Dense linear algebra: intended for small meshes.
pub fn infsup_test(setup: &ProblemSetup) -> Result<InfSupReport> {
    let mesh = &setup.mesh;
    let m = setup.basis.dim();
    let tables = StochasticTables::new(&setup.basis, &setup.quad);
    let dof_map = fem::DofMap::new(mesh, m);
    let n_v = dof_map.n_dofs();
    let n_tau = 5 * m * mesh.n_elements();
    if n_v == 0 {
        return Err(Error::invalid("no free displacement dofs"));
    }

    let mut a_mat = DMatrix::<f64>::zeros(n_tau, n_tau);
    let mut m_sigma = DMatrix::<f64>::zeros(n_tau, n_tau);
    let mut b_mat = DMatrix::<f64>::zeros(n_tau, n_v);
    let mut m_v = DMatrix::<f64>::zeros(n_v, n_v);

    let (pts, wts) = gauss_legendre_2d(3);
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let blocks = ps_element_blocks(&map, &setup.law, &setup.model, &tables, setup.spatial_order, e)?;
        let base = 5 * m * e;
        for i in 0..5 * m {
            for j in 0..5 * m {
                a_mat[(base + i, base + j)] = blocks.h[(i, j)];
            }
        }
        // stress L² Gram with the tensor weighting (2 on the shear slot) and
        // the |v|₁ Gram of the displacement space
        let mut gram_sp = nalgebra::SMatrix::<f64, 5, 5>::zeros();
        let mut grad_gram = nalgebra::SMatrix::<f64, 4, 4>::zeros();
        for (k, &xh) in pts.iter().enumerate() {
            let p = fem::stress_mode(&map, xh)?;
            let (j, det) = map.jacobian(xh);
            let w = wts[k] * det;
            for i in 0..5 {
                for jj in 0..5 {
                    gram_sp[(i, jj)] += w
                        * (p[(0, i)] * p[(0, jj)] + p[(1, i)] * p[(1, jj)]
                            + 2.0 * p[(2, i)] * p[(2, jj)]);
                }
            }
            let j_inv_t = Matrix2::new(j[(1, 1)], -j[(1, 0)], -j[(0, 1)], j[(0, 0)]) / det;
            let gref = fem::shape_ref_gradients(xh);
            let mut phys = [[0.0; 2]; 4];
            for a in 0..4 {
                phys[a][0] = j_inv_t[(0, 0)] * gref[a][0] + j_inv_t[(0, 1)] * gref[a][1];
                phys[a][1] = j_inv_t[(1, 0)] * gref[a][0] + j_inv_t[(1, 1)] * gref[a][1];
            }
            for a in 0..4 {
                for b in 0..4 {
                    grad_gram[(a, b)] += w * (phys[a][0] * phys[b][0] + phys[a][1] * phys[b][1]);
                }
            }
        }
        for i in 0..5 {
            for jj in 0..5 {
                for mm in 0..m {
                    m_sigma[(base + i * m + mm, base + jj * m + mm)] += gram_sp[(i, jj)];
                }
            }
        }
        let idx = mesh.elements[e];
        for i in 0..5 {
            for a in 0..4 {
                for comp in 0..2 {
                    let gsp = blocks.g_spatial[(i, a * 2 + comp)];
                    for mm in 0..m {
                        if let Some(col) = dof_map.dof(idx[a], comp, mm) {
                            b_mat[(base + i * m + mm, col)] += gsp;
                        }
                    }
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                for comp in 0..2 {
                    for mm in 0..m {
                        if let (Some(ra), Some(rb)) = (
                            dof_map.dof(idx[a], comp, mm),
                            dof_map.dof(idx[b], comp, mm),
                        ) {
                            m_v[(ra, rb)] += grad_gram[(a, b)];
                        }
                    }
                }
            }
        }
    }

    // Numerical rank of B from its singular values (threshold 1e-10·σ_max);
    // the null-space *basis* of Bᵀ then comes from the smallest eigenpairs
    // of B Bᵀ, whose span is reliable even where the tiny eigenvalues
    // themselves sit at the roundoff floor.
    let svd = b_mat.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s >= 1e-10 * sigma_max)
        .count();
    let kernel_dim = n_tau - rank;
    if kernel_dim == 0 {
        return Err(Error::invalid(
            "coupling operator has no kernel: stress space too small",
        ));
    }
    let bbt = &b_mat * b_mat.transpose();
    let eig = bbt.symmetric_eigen();
    let mut order: Vec<usize> = (0..n_tau).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("finite eigenvalues")
    });
    let mut q_kernel = DMatrix::<f64>::zeros(n_tau, kernel_dim);
    for (c, &col) in order.iter().take(kernel_dim).enumerate() {
        q_kernel.set_column(c, &eig.eigenvectors.column(col));
    }
    let a_k = q_kernel.transpose() * &a_mat * &q_kernel;
    let m_k = q_kernel.transpose() * &m_sigma * &q_kernel;
    let chol_mk = m_k
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("kernel stress Gram not positive definite".into()))?;
    // generalized symmetric eigenproblem via congruence: L⁻¹ A L⁻ᵀ
    let l_inv_a = chol_mk.l().solve_lower_triangular(&a_k).ok_or_else(|| {
        Error::SingularSystem("triangular solve failed in kernel reduction".into())
    })?;
    let reduced = chol_mk
        .l()
        .solve_lower_triangular(&l_inv_a.transpose())
        .ok_or_else(|| Error::SingularSystem("triangular solve failed in kernel reduction".into()))?;
    let sym = 0.5 * (&reduced + reduced.transpose());
    let alpha_h = sym.symmetric_eigen().eigenvalues.min();

    // β_h: smallest singular value of Lσ⁻¹ B Lv⁻ᵀ
    let chol_sigma = m_sigma
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("stress Gram not positive definite".into()))?;
    let chol_v = m_v
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("displacement Gram not positive definite".into()))?;
    let t1 = chol_sigma
        .l()
        .solve_lower_triangular(&b_mat)
        .ok_or_else(|| Error::SingularSystem("triangular solve failed for the coupling".into()))?;
    let t2 = chol_v
        .l()
        .solve_lower_triangular(&t1.transpose())
        .ok_or_else(|| Error::SingularSystem("triangular solve failed for the coupling".into()))?;
    let gram_small = &t2 * t2.transpose();
    let min_sv2 = gram_small.symmetric_eigen().eigenvalues.min();
    let beta_h = sqrt(min_sv2.max(0.0));

    Ok(InfSupReport {
        alpha_h,
        beta_h,
        kernel_dim,
        n_stress_dofs: rank + kernel_dim,
        n_displacement_dofs: n_v,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct ErrorRow {
    pub label: String,
    pub h: f64,
    pub dofs: usize,
    pub e_u: f64,
    pub e_sigma: f64,
    pub wall_ms: Option<f64>,
}

/// Error rows across a refinement family plus successive-ratio columns.
#[derive(Debug, Clone, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Ratios `e(level)/e(level+1)` between successive rows.
    pub fn ratios_u(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].e_u / w[1].e_u)
            .collect()
    }

    pub fn ratios_sigma(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].e_sigma / w[1].e_sigma)
            .collect()
    }
}

/// How one study cell is solved.
#[derive(Debug, Clone, Copy)]
pub enum StudyMethod {
    Galerkin {
        kind: ElementKind,
        recovery: RecoveryMode,
    },
    PerSample {
        kind: ElementKind,
        n_stoch: usize,
    },
}

/// Runs one benchmark across a family of meshes and collects the error rows.
pub fn mesh_study(
    bench: &Benchmark,
    meshes: &[(String, Arc<QuadMesh>)],
    basis: Option<&Arc<StochasticBasis>>,
    method: StudyMethod,
    equad: &ErrorQuadrature,
    stochastic_margin: usize,
) -> Result<ErrorReport> {
    let mut report = ErrorReport::default();
    for (label, mesh) in meshes {
        let (errs, dofs) = match method {
            StudyMethod::Galerkin { kind, recovery } => {
                let basis = basis
                    .ok_or_else(|| Error::invalid("Galerkin study needs a stochastic basis"))?
                    .clone();
                galerkin_errors(bench, mesh.clone(), basis, kind, recovery, equad, stochastic_margin)?
            }
            StudyMethod::PerSample { kind, n_stoch } => {
                let errs = per_sample_solve(bench, mesh, kind, n_stoch, equad.spatial)?;
                (errs, mesh.n_nodes() * 2)
            }
        };
        report.rows.push(ErrorRow {
            label: label.clone(),
            h: mesh.h,
            dofs,
            e_u: errs.e_u,
            e_sigma: errs.e_sigma,
            wall_ms: None,
        });
    }
    Ok(report)
}

/// Least-squares slope of `ln e` against the polynomial degree; exponential
/// convergence in `p` shows up as a markedly negative slope.
pub fn log_error_slope(degrees: &[usize], errors: &[f64]) -> f64 {
    let n = degrees.len() as f64;
    let mx = degrees.iter().map(|&p| p as f64).sum::<f64>() / n;
    let my = errors.iter().map(|&e| crate::num::ln(e.max(1e-300))).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&p, &e) in degrees.iter().zip(errors) {
        let x = p as f64 - mx;
        sxy += x * (crate::num::ln(e.max(1e-300)) - my);
        sxx += x * x;
    }
    sxy / sxx
}

/// Assembles, solves and measures one Galerkin case; returns the errors and
/// the number of displacement unknowns.
pub fn galerkin_errors(
    bench: &Benchmark,
    mesh: Arc<QuadMesh>,
    basis: Arc<StochasticBasis>,
    kind: ElementKind,
    recovery: RecoveryMode,
    equad: &ErrorQuadrature,
    stochastic_margin: usize,
) -> Result<(ErrorPair, usize)> {
    let setup = ProblemSetup::new(mesh, bench.law.clone(), bench.model.clone(), basis)
        .with_dirichlet(bench.dirichlet())
        .with_stochastic_margin(stochastic_margin);
    let system = fem::assemble(&setup, kind)?;
    let dofs = system.dof_map.n_dofs();
    let sol = fem::solve(&system)?;
    let errs = error_norms(&sol, &bench.exact, recovery, equad)?;
    Ok((errs, dofs))
}

/// Galerkin solve kept around for further inspection (consistency oracles,
/// stress evaluation, residual checks).
pub fn galerkin_solution(
    bench: &Benchmark,
    mesh: Arc<QuadMesh>,
    basis: Arc<StochasticBasis>,
    kind: ElementKind,
    stochastic_margin: usize,
) -> Result<DiscreteSolution> {
    let setup = ProblemSetup::new(mesh, bench.law.clone(), bench.model.clone(), basis)
        .with_dirichlet(bench.dirichlet())
        .with_stochastic_margin(stochastic_margin);
    let system = fem::assemble(&setup, kind)?;
    fem::solve(&system)
}

/// Galerkin-vs-collocation agreement in `e_u` for a case whose exact
/// stochastic dependence lies in the discrete stochastic space.
pub fn solver_path_discrepancy(
    bench: &Benchmark,
    mesh: Arc<QuadMesh>,
    basis: Arc<StochasticBasis>,
    n_stoch: usize,
    equad: &ErrorQuadrature,
) -> Result<f64> {
    let (galerkin, _) = galerkin_errors(
        bench,
        mesh.clone(),
        basis,
        ElementKind::PsHybrid,
        RecoveryMode::Galerkin,
        equad,
        fem::DEFAULT_STOCHASTIC_MARGIN,
    )?;
    let sample = per_sample_solve(bench, &mesh, ElementKind::PsHybrid, n_stoch, equad.spatial)?;
    Ok((galerkin.e_u - sample.e_u).abs())
}

/// Residuals of both discrete equations against every test function after a
/// solve; both must vanish (the first by construction of the recovery, the
/// second up to the algebraic solver tolerance).
pub fn galerkin_residuals(sol: &DiscreteSolution) -> Result<(f64, f64)> {
    let setup = &sol.setup;
    let mesh = &setup.mesh;
    let m = sol.m;
    let tables = StochasticTables::new(&setup.basis, &setup.quad);
    let dof_map = fem::DofMap::new(mesh, m);
    let mut first = 0.0f64;
    let mut second = DVector::<f64>::zeros(dof_map.n_dofs());
    let mut scale = 0.0f64;
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let blocks =
            ps_element_blocks(&map, &setup.law, &setup.model, &tables, setup.spatial_order, e)?;
        let ue = gather_element(&sol.u, &mesh.elements[e], m);
        let beta = &sol.beta[e];
        // a_N(σ, τ) - b_N(τ, u) per stress test function
        let mut g_full = DMatrix::<f64>::zeros(5 * m, 8 * m);
        for i in 0..5 {
            for a in 0..8 {
                let v = blocks.g_spatial[(i, a)];
                for mm in 0..m {
                    g_full[(i * m + mm, a * m + mm)] = v;
                }
            }
        }
        let r1 = &blocks.h * beta - &g_full * &ue;
        first = first.max(r1.amax());
        scale = scale.max(blocks.h.amax() * beta.amax().max(1.0));
        // b_N(σ, v) accumulated into the load layout
        let bt_beta = g_full.transpose() * beta;
        let idx = mesh.elements[e];
        for a in 0..4 {
            for comp in 0..2 {
                for mm in 0..m {
                    if let Some(g) = dof_map.dof(idx[a], comp, mm) {
                        second[g] += bt_beta[(a * 2 + comp) * m + mm];
                    }
                }
            }
        }
    }
    // subtract the load vector
    let rhs = fem::load_vector(setup, &tables, &dof_map)?;
    let second_res = (&second - &rhs).amax() / rhs.amax().max(1.0);
    Ok((first / scale.max(1.0), second_res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_irregular, generate_rectangular, DistortionPattern};
    use crate::stochastic::build_p_version;

    #[test]
    fn benchmark_exact_solutions_are_consistent() {
        let pts: Vec<Point2<f64>> = alloc::vec![
            Point2::new(1.0, 0.3),
            Point2::new(5.5, -0.7),
            Point2::new(9.2, 0.9),
        ];
        let b1 = uniform_modulus_bending();
        let r = b1
            .exact
            .consistency_residual(&b1.law, &b1.model, &pts, &[alloc::vec![800.0], alloc::vec![1400.0]])
            .unwrap();
        assert!(r < 1e-9, "plane stress residual {r}");

        for nu in [0.25, 0.49, 0.4999] {
            let b2 = normal_squared_modulus_bending(nu).unwrap();
            let r = b2
                .exact
                .consistency_residual(&b2.law, &b2.model, &pts, &[alloc::vec![0.0], alloc::vec![1.7]])
                .unwrap();
            assert!(r < 1e-9, "plane strain residual {r} at nu={nu}");
        }
    }

    #[test]
    fn norm_oracle_linear_field() {
        // ‖ y·x₂ ‖₀̃² over the strip with y uniform on [500,1500]:
        // E[y²]·∫ x₂² = (13e6/12)·(20/3).
        let dist = VariableDistribution::Uniform {
            a: 500.0,
            b: 1500.0,
        };
        let mesh = generate_rectangular(5, 1, strip_domain()).unwrap();
        let squad = stochastic::quadrature(&[dist], &[20]).unwrap();
        let (pts, wts) = gauss_legendre_2d(4);
        let mut total = 0.0;
        for q in 0..squad.len() {
            let y = squad.point(q)[0];
            for e in 0..mesh.n_elements() {
                let map = mesh.element_map(e);
                for (k, &xh) in pts.iter().enumerate() {
                    let (_, det) = map.jacobian(xh);
                    let x = map.map(xh);
                    total += squad.weights[q] * wts[k] * det * (y * x.y) * (y * x.y);
                }
            }
        }
        let exact = (13.0e6 / 12.0) * (20.0 / 3.0);
        assert!((total - exact).abs() < 1e-6 * exact, "{total} vs {exact}");
    }

    #[test]
    fn injected_exact_solution_gives_zero_errors() {
        // force the discrete solution to interpolate the exact one and check
        // the error quadrature reports (near) zero for a bilinear exact field
        let bench = uniform_modulus_bending();
        // exact displacement replaced by a bilinear field lying in the space
        let lin = ExactSolution {
            u: Arc::new(|x, _| Vector2::new(0.3 * x.x - 0.1 * x.y, 0.2 * x.y + 0.05 * x.x * x.y)),
            grad_u: Arc::new(|x, _| {
                Matrix2::new(0.3, -0.1, 0.05 * x.y, 0.2 + 0.05 * x.x)
            }),
            sigma: Arc::new(|_, _| Vector3::zeros()),
        };
        let mesh = Arc::new(generate_rectangular(4, 2, strip_domain()).unwrap());
        let basis = Arc::new(build_p_version(&bench.model.variables, &[1]).unwrap());
        let m = basis.dim();
        let setup = ProblemSetup::new(mesh.clone(), bench.law.clone(), bench.model.clone(), basis);
        let system = fem::assemble(&setup, ElementKind::PsHybrid).unwrap();
        // inject nodal interpolant coefficients: mode 0 carries the field
        let mut u = DVector::<f64>::zeros(mesh.n_nodes() * 2 * m);
        for (n, p) in mesh.nodes.iter().enumerate() {
            let v = (lin.u)(*p, &[0.0]);
            u[(n * 2) * m] = v.x;
            u[(n * 2 + 1) * m] = v.y;
        }
        let beta: Vec<DVector<f64>> = (0..mesh.n_elements())
            .map(|e| &system.recovery[e] * gather_element(&u, &mesh.elements[e], m))
            .collect();
        let sol = DiscreteSolution {
            u,
            beta,
            residual: 0.0,
            kind: ElementKind::PsHybrid,
            m,
            setup: setup.clone(),
        };
        let errs = error_norms(&sol, &lin, RecoveryMode::Galerkin, &ErrorQuadrature::default())
            .unwrap();
        assert!(errs.e_u < 1e-12, "{}", errs.e_u);
    }

    #[test]
    fn zero_load_solution_vanishes() {
        let law = MaterialLaw::new(ElasticMode::PlaneStress, 0.3).unwrap();
        let mesh = generate_irregular(1, strip_domain(), &DistortionPattern::default()).unwrap();
        let young = |_x: Point2<f64>| Ok(1.0);
        let body = |_x: Point2<f64>| Vector2::zeros();
        let traction = |_g: usize, _x: Point2<f64>| Vector2::zeros();
        let dirichlet = |_x: Point2<f64>| Vector2::zeros();
        let problem = DeterministicProblem {
            mesh: &mesh,
            law: &law,
            young: &young,
            body: &body,
            traction: &traction,
            dirichlet: &dirichlet,
            kind: ElementKind::PsHybrid,
            spatial_order: 0,
        };
        let sol = solve_deterministic(&problem).unwrap();
        assert!(sol.u.amax() < 1e-14);
        for b in &sol.beta {
            assert!(b.amax() < 1e-12);
        }
    }

    #[test]
    fn rigid_motion_reproduced_exactly() {
        // zero loads, rigid Dirichlet data: the simulation returns the rigid
        // motion with zero stress
        let law = MaterialLaw::new(ElasticMode::PlaneStrain, 0.3).unwrap();
        let mesh =
            generate_irregular(1, strip_domain(), &DistortionPattern::default()).unwrap();
        let young = |_x: Point2<f64>| Ok(2.0);
        let body = |_x: Point2<f64>| Vector2::zeros();
        let traction = |_g: usize, _x: Point2<f64>| Vector2::zeros();
        let rigid = |x: Point2<f64>| Vector2::new(0.7 - 0.3 * x.y, -0.2 + 0.3 * x.x);
        let problem = DeterministicProblem {
            mesh: &mesh,
            law: &law,
            young: &young,
            body: &body,
            traction: &traction,
            dirichlet: &rigid,
            kind: ElementKind::PsHybrid,
            spatial_order: 0,
        };
        let sol = solve_deterministic(&problem).unwrap();
        for (n, p) in mesh.nodes.iter().enumerate() {
            let v = rigid(*p);
            assert!((sol.u[2 * n] - v.x).abs() < 1e-11);
            assert!((sol.u[2 * n + 1] - v.y).abs() < 1e-11);
        }
        for b in &sol.beta {
            assert!(b.amax() < 1e-10);
        }
    }

    #[test]
    fn constant_stress_patch_test() {
        // tractions consistent with a constant stress on a distorted mesh:
        // the hybrid element must reproduce the stress exactly
        let law = MaterialLaw::new(ElasticMode::PlaneStress, 0.3).unwrap();
        let mesh = {
            // distorted 2×2 mesh of the unit square via one irregular level
            let base = generate_irregular(0, Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), &DistortionPattern::default()).unwrap();
            base.refine().unwrap()
        };
        let sigma_star = Vector3::new(1.0, 0.5, 0.25);
        let eps = law.compliance_apply(sigma_star);
        let u_star = move |x: Point2<f64>| {
            Vector2::new(
                eps[0] * x.x + 0.5 * eps[2] * x.y,
                eps[1] * x.y + 0.5 * eps[2] * x.x,
            )
        };
        let young = |_x: Point2<f64>| Ok(1.0);
        let body = |_x: Point2<f64>| Vector2::zeros();
        let normal_stress = move |n: [f64; 2]| {
            Vector2::new(
                sigma_star[0] * n[0] + sigma_star[2] * n[1],
                sigma_star[2] * n[0] + sigma_star[1] * n[1],
            )
        };
        // per-group outward normals of the generated strip boundary
        let traction = move |group: usize, _x: Point2<f64>| match group {
            crate::mesh::TRACTION_RIGHT => normal_stress([1.0, 0.0]),
            crate::mesh::TRACTION_TOP => normal_stress([0.0, 1.0]),
            crate::mesh::TRACTION_BOTTOM => normal_stress([0.0, -1.0]),
            _ => Vector2::zeros(),
        };
        let problem = DeterministicProblem {
            mesh: &mesh,
            law: &law,
            young: &young,
            body: &body,
            traction: &traction,
            dirichlet: &u_star,
            kind: ElementKind::PsHybrid,
            spatial_order: 0,
        };
        let sol = solve_deterministic(&problem).unwrap();
        for e in 0..mesh.n_elements() {
            for &xh in &[[0.0, 0.0], [0.7, -0.4], [-0.9, 0.9]] {
                let s = sol.stress_at(&mesh, e, xh).unwrap();
                assert!(
                    (s - sigma_star).amax() < 1e-11,
                    "element {e}: {s:?}"
                );
            }
        }
        // displacements match the linear field
        for (n, p) in mesh.nodes.iter().enumerate() {
            let v = u_star(*p);
            assert!((sol.u[2 * n] - v.x).abs() < 1e-11);
            assert!((sol.u[2 * n + 1] - v.y).abs() < 1e-11);
        }
    }
}
