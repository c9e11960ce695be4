//! Discretization driver: degree-of-freedom management, stochastic Galerkin
//! assembly with element-wise static condensation of the stress unknowns,
//! Dirichlet elimination, the direct solve, and stress recovery.
//!
//! Stress approximations are discontinuous across elements, so the saddle
//! point system is never formed globally: each element's stress block is
//! eliminated exactly, leaving a symmetric positive definite displacement
//! system over `(free node, component, stochastic mode)` unknowns.

pub mod element;
pub mod skyline;

use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Matrix2, Point2, SVector, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::kl::RandomFieldModel;
use crate::material::MaterialLaw;
use crate::mesh::{EdgeTag, QuadMesh};
use crate::num::hypot;
use crate::quadrature::{gauss_legendre, gauss_legendre_2d};
use crate::stochastic::{StochasticBasis, StochasticQuadrature};

pub use element::{
    bilinear_element_stiffness, bilinear_stiffness_deterministic, condense, moment_matrix,
    ps_blocks_deterministic, ps_element_blocks, shape_ref_gradients, shape_values,
    spatial_order, strain_displacement, stress_mode, ElementBlocks, StochasticTables,
};
pub use skyline::{SkylineFactor, SkylineMatrix};

/// Spatial discretization of the displacement/stress pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// Hybrid-stress quadrilateral: bilinear displacements plus a condensed
    /// 5-parameter stress mode.
    PsHybrid,
    /// Plain bilinear displacement quadrilateral.
    Bilinear,
}

/// Prescribed displacement data on the Dirichlet boundary, as a function of
/// the spatial point and the model random variables.
#[derive(Clone)]
pub enum DirichletData {
    Zero,
    Function(Arc<dyn Fn(Point2<f64>, &[f64]) -> Vector2<f64> + Send + Sync>),
}

impl DirichletData {
    /// Prescribed value at a point for fixed model variables.
    pub fn eval_at(&self, x: Point2<f64>, y_model: &[f64]) -> Vector2<f64> {
        match self {
            DirichletData::Zero => Vector2::zeros(),
            DirichletData::Function(f) => f(x, y_model),
        }
    }
}

/// Everything needed to assemble one discrete problem.
#[derive(Clone)]
pub struct ProblemSetup {
    pub mesh: Arc<QuadMesh>,
    pub law: MaterialLaw,
    pub model: Arc<RandomFieldModel>,
    pub basis: Arc<StochasticBasis>,
    /// Assembly quadrature over the stochastic integration coordinates.
    pub quad: StochasticQuadrature,
    /// Spatial Gauss order; 0 selects 2×2 on parallelograms, 3×3 otherwise.
    pub spatial_order: usize,
    pub dirichlet: DirichletData,
}

/// Extra stochastic quadrature points per dimension beyond basis-pair
/// exactness; covers non-polynomial factors such as `1/E(y)`.
pub const DEFAULT_STOCHASTIC_MARGIN: usize = 5;

impl ProblemSetup {
    pub fn new(
        mesh: Arc<QuadMesh>,
        law: MaterialLaw,
        model: Arc<RandomFieldModel>,
        basis: Arc<StochasticBasis>,
    ) -> ProblemSetup {
        let quad = basis.integration_quadrature(DEFAULT_STOCHASTIC_MARGIN);
        ProblemSetup {
            mesh,
            law,
            model,
            basis,
            quad,
            spatial_order: 0,
            dirichlet: DirichletData::Zero,
        }
    }

    pub fn with_dirichlet(mut self, data: DirichletData) -> Self {
        self.dirichlet = data;
        self
    }

    pub fn with_stochastic_margin(mut self, extra: usize) -> Self {
        self.quad = self.basis.integration_quadrature(extra);
        self
    }

    pub fn with_spatial_order(mut self, order: usize) -> Self {
        self.spatial_order = order;
        self
    }
}

/// Maps `(node, component, stochastic mode)` to equation numbers; Dirichlet
/// nodes carry no equations.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub m: usize,
    free_index: Vec<Option<usize>>,
    pub n_free_nodes: usize,
}

impl DofMap {
    pub fn new(mesh: &QuadMesh, m: usize) -> DofMap {
        let mut free_index = alloc::vec![None; mesh.n_nodes()];
        let mut constrained = alloc::vec![false; mesh.n_nodes()];
        for n in mesh.dirichlet_nodes() {
            constrained[n] = true;
        }
        let mut next = 0usize;
        for n in 0..mesh.n_nodes() {
            if !constrained[n] {
                free_index[n] = Some(next);
                next += 1;
            }
        }
        DofMap {
            m,
            free_index,
            n_free_nodes: next,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_free_nodes * 2 * self.m
    }

    /// Equation number of a free dof, `None` on the Dirichlet boundary.
    #[inline]
    pub fn dof(&self, node: usize, comp: usize, mode: usize) -> Option<usize> {
        self.free_index[node].map(|f| (f * 2 + comp) * self.m + mode)
    }

    pub fn is_free(&self, node: usize) -> bool {
        self.free_index[node].is_some()
    }

    /// Index into full-layout vectors covering every `(node, comp, mode)`.
    #[inline]
    pub fn full_index(&self, node: usize, comp: usize, mode: usize) -> usize {
        (node * 2 + comp) * self.m + mode
    }
}

/// Compensated accumulator for load vectors: elimination terms of prescribed
/// boundary values can be orders of magnitude larger than the tractions they
/// share entries with.
struct CompVec {
    sum: DVector<f64>,
    comp: DVector<f64>,
}

impl CompVec {
    fn new(n: usize) -> CompVec {
        CompVec {
            sum: DVector::zeros(n),
            comp: DVector::zeros(n),
        }
    }

    #[inline]
    fn add(&mut self, i: usize, v: f64) {
        let s = self.sum[i];
        let t = s + v;
        self.comp[i] += if s.abs() >= v.abs() {
            (s - t) + v
        } else {
            (v - t) + s
        };
        self.sum[i] = t;
    }

    fn into_vector(self) -> DVector<f64> {
        self.sum + self.comp
    }
}

/// Assembled displacement-only system with per-element stress recovery data.
pub struct CondensedSystem {
    pub kind: ElementKind,
    pub m: usize,
    pub dof_map: DofMap,
    pub matrix: SkylineMatrix,
    pub rhs: DVector<f64>,
    /// Prescribed values in full layout (zero at free dofs).
    pub prescribed: DVector<f64>,
    /// Per-element recovery operators `H⁻¹G` (hybrid elements only).
    pub recovery: Vec<DMatrix<f64>>,
    pub setup: ProblemSetup,
}

fn element_local_index(m: usize, a: usize, comp: usize, mode: usize) -> usize {
    (a * 2 + comp) * m + mode
}

/// Projects the Dirichlet data onto the stochastic basis at every constrained
/// node; returns the full-layout vector of prescribed coefficients.
fn prescribed_values(setup: &ProblemSetup, tables: &StochasticTables, map: &DofMap) -> DVector<f64> {
    let mesh = &setup.mesh;
    let m = map.m;
    let mut out = DVector::zeros(mesh.n_nodes() * 2 * m);
    if matches!(setup.dirichlet, DirichletData::Zero) {
        return out;
    }
    for node in mesh.dirichlet_nodes() {
        let x = mesh.nodes[node];
        for q in 0..tables.n_nodes() {
            let v = setup.dirichlet.eval_at(x, tables.model_point(q));
            let w = tables.weights[q];
            for mode in 0..m {
                let pw = w * tables.psi[(q, mode)];
                out[map.full_index(node, 0, mode)] += pw * v.x;
                out[map.full_index(node, 1, mode)] += pw * v.y;
            }
        }
    }
    out
}

/// Column profile of the assembled matrix.
fn skyline_profile(mesh: &QuadMesh, map: &DofMap) -> Vec<usize> {
    let n = map.n_dofs();
    let mut first: Vec<usize> = (0..n).collect();
    for idx in &mesh.elements {
        let mut lo = usize::MAX;
        let mut dofs: Vec<usize> = Vec::with_capacity(8 * map.m);
        for &node in idx {
            for comp in 0..2 {
                for mode in 0..map.m {
                    if let Some(g) = map.dof(node, comp, mode) {
                        lo = lo.min(g);
                        dofs.push(g);
                    }
                }
            }
        }
        for &g in &dofs {
            first[g] = first[g].min(lo);
        }
    }
    first
}

/// Assembles the condensed stochastic Galerkin system.
pub fn assemble(setup: &ProblemSetup, kind: ElementKind) -> Result<CondensedSystem> {
    let mesh = setup.mesh.clone();
    let m = setup.basis.dim();
    if m == 0 {
        return Err(Error::invalid("stochastic basis is empty"));
    }
    let tables = StochasticTables::new(&setup.basis, &setup.quad);
    let dof_map = DofMap::new(&mesh, m);
    if dof_map.n_free_nodes == mesh.n_nodes() {
        return Err(Error::SingularSystem(
            "no Dirichlet boundary: rigid modes are unconstrained".into(),
        ));
    }
    if dof_map.n_dofs() == 0 {
        return Err(Error::invalid("every node is constrained"));
    }
    let prescribed = prescribed_values(setup, &tables, &dof_map);
    let mut matrix = SkylineMatrix::new(skyline_profile(&mesh, &dof_map));
    let mut rhs = CompVec::new(dof_map.n_dofs());
    let mut recovery = Vec::with_capacity(if kind == ElementKind::PsHybrid {
        mesh.n_elements()
    } else {
        0
    });

    let nloc = 8 * m;
    for e in 0..mesh.n_elements() {
        let emap = mesh.element_map(e);
        let k_t = match kind {
            ElementKind::PsHybrid => {
                let blocks = ps_element_blocks(
                    &emap,
                    &setup.law,
                    &setup.model,
                    &tables,
                    setup.spatial_order,
                    e,
                )?;
                let (k_t, r_t) = condense(&blocks, m, e)?;
                recovery.push(r_t);
                k_t
            }
            ElementKind::Bilinear => bilinear_element_stiffness(
                &emap,
                &setup.law,
                &setup.model,
                &tables,
                setup.spatial_order,
                e,
            )?,
        };
        // global indices (or prescribed values) per local dof
        let idx = mesh.elements[e];
        let mut global: Vec<Option<usize>> = Vec::with_capacity(nloc);
        let mut pres: Vec<f64> = Vec::with_capacity(nloc);
        for a in 0..4 {
            for comp in 0..2 {
                for mode in 0..m {
                    global.push(dof_map.dof(idx[a], comp, mode));
                    pres.push(prescribed[dof_map.full_index(idx[a], comp, mode)]);
                }
            }
        }
        for lj in 0..nloc {
            match global[lj] {
                Some(gj) => {
                    for li in 0..nloc {
                        if let Some(gi) = global[li] {
                            if gi <= gj {
                                matrix.add(gi, gj, k_t[(li, lj)]);
                            }
                        }
                    }
                }
                None => {
                    let v = pres[lj];
                    if v != 0.0 {
                        for li in 0..nloc {
                            if let Some(gi) = global[li] {
                                rhs.add(gi, -k_t[(li, lj)] * v);
                            }
                        }
                    }
                }
            }
        }
    }

    add_loads(setup, &tables, &dof_map, &mut rhs)?;
    matrix.compact();

    Ok(CondensedSystem {
        kind,
        m,
        dof_map,
        matrix,
        rhs: rhs.into_vector(),
        prescribed,
        recovery,
        setup: setup.clone(),
    })
}

/// Body and traction contributions, assembled into a fresh vector.
pub fn load_vector(
    setup: &ProblemSetup,
    tables: &StochasticTables,
    map: &DofMap,
) -> Result<DVector<f64>> {
    let mut acc = CompVec::new(map.n_dofs());
    add_loads(setup, tables, map, &mut acc)?;
    Ok(acc.into_vector())
}

/// Body and traction contributions to the load vector.
fn add_loads(
    setup: &ProblemSetup,
    tables: &StochasticTables,
    map: &DofMap,
    rhs: &mut CompVec,
) -> Result<()> {
    let mesh = &setup.mesh;
    let m = map.m;
    let nq = tables.n_nodes();
    // body term
    let (pts, wts) = gauss_legendre_2d(3);
    for e in 0..mesh.n_elements() {
        let emap = mesh.element_map(e);
        let idx = mesh.elements[e];
        let any_free = idx.iter().any(|&n| map.is_free(n));
        if !any_free {
            continue;
        }
        for (k, &xh) in pts.iter().enumerate() {
            let x = emap.map(xh);
            let (_, det) = emap.jacobian(xh);
            // stochastic projection of the body load at this point
            let mut proj = alloc::vec![Vector2::<f64>::zeros(); m];
            let mut nonzero = false;
            for q in 0..nq {
                let f = setup.model.body_at(x, tables.model_point(q));
                if f.x != 0.0 || f.y != 0.0 {
                    nonzero = true;
                    let w = tables.weights[q];
                    for (mode, slot) in proj.iter_mut().enumerate() {
                        *slot += f * (w * tables.psi[(q, mode)]);
                    }
                }
            }
            if !nonzero {
                continue;
            }
            let shp = shape_values(xh);
            let w = wts[k] * det;
            for a in 0..4 {
                for comp in 0..2 {
                    for mode in 0..m {
                        if let Some(g) = map.dof(idx[a], comp, mode) {
                            rhs.add(g, w * shp[a] * proj[mode][comp]);
                        }
                    }
                }
            }
        }
    }
    // traction term: 1D Gauss along tagged edges, arclength Jacobian
    let edge_rule = gauss_legendre(4);
    for be in &mesh.boundary_edges {
        let group = match be.tag {
            EdgeTag::Traction(g) => g,
            EdgeTag::Dirichlet => continue,
        };
        let pa = mesh.nodes[be.a];
        let pb = mesh.nodes[be.b];
        let len = hypot(pb.x - pa.x, pb.y - pa.y);
        for (k, &t) in edge_rule.nodes.iter().enumerate() {
            let s = 0.5 * (1.0 + t);
            let x = Point2::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
            let mut proj = alloc::vec![Vector2::<f64>::zeros(); m];
            let mut nonzero = false;
            for q in 0..nq {
                let g = setup.model.traction_at(group, x, tables.model_point(q));
                if g.x != 0.0 || g.y != 0.0 {
                    nonzero = true;
                    let w = tables.weights[q];
                    for (mode, slot) in proj.iter_mut().enumerate() {
                        *slot += g * (w * tables.psi[(q, mode)]);
                    }
                }
            }
            if !nonzero {
                continue;
            }
            let w_edge = edge_rule.weights[k] * 0.5 * len;
            let shp = [1.0 - s, s];
            for (end, &node) in [be.a, be.b].iter().enumerate() {
                for comp in 0..2 {
                    for mode in 0..m {
                        if let Some(g) = map.dof(node, comp, mode) {
                            rhs.add(g, w_edge * shp[end] * proj[mode][comp]);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Solution of a condensed system: displacement coefficients per stochastic
/// mode plus recovered stress parameters per element.
pub struct DiscreteSolution {
    /// Full-layout displacement coefficients, prescribed values included.
    pub u: DVector<f64>,
    /// Per-element stress coefficients (length 5M), hybrid elements only.
    pub beta: Vec<DVector<f64>>,
    /// Relative algebraic residual of the condensed solve.
    pub residual: f64,
    pub kind: ElementKind,
    pub m: usize,
    pub setup: ProblemSetup,
}

/// Direct solve with two steps of iterative refinement; near-incompressible
/// systems are stiff enough that the extra digits matter for the recovered
/// stresses.
fn refined_solve(matrix: &SkylineMatrix, factor: &SkylineFactor, rhs: &DVector<f64>) -> DVector<f64> {
    let mut x = factor.solve(rhs);
    for _ in 0..3 {
        let r = matrix.residual_compensated(&x, rhs);
        let dx = factor.solve(&r);
        let norm_dx = dx.norm();
        x += dx;
        if norm_dx <= 1e-15 * x.norm() {
            break;
        }
    }
    x
}

/// Factorizes and solves the condensed system, then recovers the stress
/// parameters element by element.
pub fn solve(system: &CondensedSystem) -> Result<DiscreteSolution> {
    let factor = system.matrix.factorize()?;
    let x = refined_solve(&system.matrix, &factor, &system.rhs);
    let res_vec = system.matrix.matvec(&x) - &system.rhs;
    let denom = system.rhs.norm();
    let residual = if denom > 0.0 {
        res_vec.norm() / denom
    } else {
        res_vec.norm()
    };
    if !residual.is_finite() || (denom > 0.0 && residual > 1e-6) {
        return Err(Error::SingularSystem(alloc::format!(
            "solver residual {residual:.3e} exceeds tolerance"
        )));
    }

    let mesh = &system.setup.mesh;
    let map = &system.dof_map;
    let m = system.m;
    let mut u = system.prescribed.clone();
    for node in 0..mesh.n_nodes() {
        for comp in 0..2 {
            for mode in 0..m {
                if let Some(g) = map.dof(node, comp, mode) {
                    u[map.full_index(node, comp, mode)] = x[g];
                }
            }
        }
    }

    let mut beta = Vec::new();
    if system.kind == ElementKind::PsHybrid {
        beta.reserve(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let ue = gather_element(&u, &mesh.elements[e], m);
            beta.push(&system.recovery[e] * ue);
        }
    }

    Ok(DiscreteSolution {
        u,
        beta,
        residual,
        kind: system.kind,
        m,
        setup: system.setup.clone(),
    })
}

/// Gathers the full-layout vector into the element-local ordering.
pub fn gather_element(u: &DVector<f64>, nodes: &[usize; 4], m: usize) -> DVector<f64> {
    let mut out = DVector::zeros(8 * m);
    for a in 0..4 {
        for comp in 0..2 {
            for mode in 0..m {
                out[element_local_index(m, a, comp, mode)] = u[(nodes[a] * 2 + comp) * m + mode];
            }
        }
    }
    out
}

impl DiscreteSolution {
    fn basis_values(&self, y_int: &[f64]) -> Vec<f64> {
        let mut psi = alloc::vec![0.0; self.m];
        self.setup.basis.eval_all(y_int, &mut psi);
        psi
    }

    /// Nodal displacement values of one element at fixed basis values
    /// (layout `(local node, component)`).
    pub fn element_displacement_values(&self, e: usize, psi: &[f64]) -> SVector<f64, 8> {
        let idx = self.setup.mesh.elements[e];
        let mut out = SVector::<f64, 8>::zeros();
        for a in 0..4 {
            for comp in 0..2 {
                let mut coeff = 0.0;
                for mode in 0..self.m {
                    coeff += self.u[(idx[a] * 2 + comp) * self.m + mode] * psi[mode];
                }
                out[a * 2 + comp] = coeff;
            }
        }
        out
    }

    /// Stress parameters of one element at fixed basis values.
    pub fn element_beta_values(&self, e: usize, psi: &[f64]) -> SVector<f64, 5> {
        let beta = &self.beta[e];
        let mut out = SVector::<f64, 5>::zeros();
        for i in 0..5 {
            let mut acc = 0.0;
            for mode in 0..self.m {
                acc += beta[i * self.m + mode] * psi[mode];
            }
            out[i] = acc;
        }
        out
    }

    /// Displacement at a reference point of an element and a stochastic
    /// integration point.
    pub fn displacement_at(&self, e: usize, xh: [f64; 2], y_int: &[f64]) -> Vector2<f64> {
        let psi = self.basis_values(y_int);
        let shp = shape_values(xh);
        let idx = self.setup.mesh.elements[e];
        let mut out = Vector2::zeros();
        for a in 0..4 {
            for comp in 0..2 {
                let mut coeff = 0.0;
                for mode in 0..self.m {
                    coeff += self.u[(idx[a] * 2 + comp) * self.m + mode] * psi[mode];
                }
                out[comp] += shp[a] * coeff;
            }
        }
        out
    }

    /// Displacement gradient `(∂u_i/∂x_j)` at a reference point.
    pub fn displacement_gradient_at(
        &self,
        e: usize,
        xh: [f64; 2],
        y_int: &[f64],
    ) -> Matrix2<f64> {
        let psi = self.basis_values(y_int);
        let map = self.setup.mesh.element_map(e);
        let (j, det) = map.jacobian(xh);
        let j_inv_t = Matrix2::new(j[(1, 1)], -j[(1, 0)], -j[(0, 1)], j[(0, 0)]) / det;
        let gref = shape_ref_gradients(xh);
        let idx = self.setup.mesh.elements[e];
        let mut out = Matrix2::zeros();
        for a in 0..4 {
            let gx = j_inv_t[(0, 0)] * gref[a][0] + j_inv_t[(0, 1)] * gref[a][1];
            let gy = j_inv_t[(1, 0)] * gref[a][0] + j_inv_t[(1, 1)] * gref[a][1];
            for comp in 0..2 {
                let mut coeff = 0.0;
                for mode in 0..self.m {
                    coeff += self.u[(idx[a] * 2 + comp) * self.m + mode] * psi[mode];
                }
                out[(comp, 0)] += coeff * gx;
                out[(comp, 1)] += coeff * gy;
            }
        }
        out
    }

    /// Galerkin stress: `Σ_m P(ξ) β_m ψ_m(y)` from the stored recovery data.
    pub fn stress_galerkin_at(&self, e: usize, xh: [f64; 2], y_int: &[f64]) -> Result<Vector3<f64>> {
        let psi = self.basis_values(y_int);
        let map = self.setup.mesh.element_map(e);
        let p = stress_mode(&map, xh)?;
        let beta = &self.beta[e];
        let mut bmode = SVector::<f64, 5>::zeros();
        for i in 0..5 {
            let mut acc = 0.0;
            for mode in 0..self.m {
                acc += beta[i * self.m + mode] * psi[mode];
            }
            bmode[i] = acc;
        }
        Ok(p * bmode)
    }

    /// Whether a stochastic point lies inside the quadrature support of the
    /// basis (bounded ranges, or the spread of the Gauss nodes for unbounded
    /// variables). Per-sample recovery outside the support extrapolates the
    /// Galerkin polynomial and should be treated with suspicion.
    pub fn stochastic_point_in_support(&self, y_int: &[f64]) -> bool {
        self.setup
            .basis
            .dims
            .iter()
            .zip(y_int)
            .all(|(dim, &v)| {
                let (lo, hi) = dim.dist.range_for_quadrature(dim.degree + 1 + 8);
                let pad = 1e-9 * (1.0 + (hi - lo).abs());
                v >= lo - pad && v <= hi + pad
            })
    }

    /// Collocation-style stress parameters at a fixed stochastic point: solves
    /// the single-sample element compliance system with the Galerkin
    /// displacement evaluated at that point. Check
    /// [`stochastic_point_in_support`](Self::stochastic_point_in_support)
    /// before evaluating at points far outside the quadrature range.
    pub fn per_sample_beta(&self, e: usize, y_int: &[f64]) -> Result<SVector<f64, 5>> {
        let psi = self.basis_values(y_int);
        let mut y_model = alloc::vec![0.0; self.setup.basis.n_dims()];
        self.setup.basis.to_model_coords(y_int, &mut y_model);
        let map = self.setup.mesh.element_map(e);
        let (h, g) = ps_blocks_deterministic(
            &map,
            &self.setup.law,
            |x| self.setup.model.young_at(x, &y_model),
            self.setup.spatial_order,
        )?;
        // element displacement at the sample
        let idx = self.setup.mesh.elements[e];
        let mut ue = SVector::<f64, 8>::zeros();
        for a in 0..4 {
            for comp in 0..2 {
                let mut coeff = 0.0;
                for mode in 0..self.m {
                    coeff += self.u[(idx[a] * 2 + comp) * self.m + mode] * psi[mode];
                }
                ue[a * 2 + comp] = coeff;
            }
        }
        let rhs = g * ue;
        let chol = h.cholesky().ok_or(Error::ElementAssembly {
            element: e,
            detail: "sample compliance block is not positive definite".into(),
        })?;
        Ok(chol.solve(&rhs))
    }

    /// Per-sample stress at a reference point.
    pub fn stress_per_sample_at(
        &self,
        e: usize,
        xh: [f64; 2],
        y_int: &[f64],
    ) -> Result<Vector3<f64>> {
        let beta = self.per_sample_beta(e, y_int)?;
        let map = self.setup.mesh.element_map(e);
        Ok(stress_mode(&map, xh)? * beta)
    }
}

/// A deterministic plane-elasticity problem (one stochastic sample or a plain
/// deterministic run).
pub struct DeterministicProblem<'a> {
    pub mesh: &'a QuadMesh,
    pub law: &'a MaterialLaw,
    pub young: &'a dyn Fn(Point2<f64>) -> Result<f64>,
    pub body: &'a dyn Fn(Point2<f64>) -> Vector2<f64>,
    /// Traction per edge group.
    pub traction: &'a dyn Fn(usize, Point2<f64>) -> Vector2<f64>,
    pub dirichlet: &'a dyn Fn(Point2<f64>) -> Vector2<f64>,
    pub kind: ElementKind,
    pub spatial_order: usize,
}

/// Deterministic solution: nodal displacements and per-element stress
/// parameters.
pub struct SampleSolution {
    /// Layout `(node*2 + comp)`.
    pub u: DVector<f64>,
    pub beta: Vec<SVector<f64, 5>>,
    pub residual: f64,
}

impl SampleSolution {
    pub fn displacement_at(&self, mesh: &QuadMesh, e: usize, xh: [f64; 2]) -> Vector2<f64> {
        let shp = shape_values(xh);
        let idx = mesh.elements[e];
        let mut out = Vector2::zeros();
        for a in 0..4 {
            out.x += shp[a] * self.u[idx[a] * 2];
            out.y += shp[a] * self.u[idx[a] * 2 + 1];
        }
        out
    }

    pub fn displacement_gradient_at(&self, mesh: &QuadMesh, e: usize, xh: [f64; 2]) -> Matrix2<f64> {
        let map = mesh.element_map(e);
        let (j, det) = map.jacobian(xh);
        let j_inv_t = Matrix2::new(j[(1, 1)], -j[(1, 0)], -j[(0, 1)], j[(0, 0)]) / det;
        let gref = shape_ref_gradients(xh);
        let idx = mesh.elements[e];
        let mut out = Matrix2::zeros();
        for a in 0..4 {
            let gx = j_inv_t[(0, 0)] * gref[a][0] + j_inv_t[(0, 1)] * gref[a][1];
            let gy = j_inv_t[(1, 0)] * gref[a][0] + j_inv_t[(1, 1)] * gref[a][1];
            for comp in 0..2 {
                let c = self.u[idx[a] * 2 + comp];
                out[(comp, 0)] += c * gx;
                out[(comp, 1)] += c * gy;
            }
        }
        out
    }

    pub fn stress_at(&self, mesh: &QuadMesh, e: usize, xh: [f64; 2]) -> Result<Vector3<f64>> {
        Ok(stress_mode(&mesh.element_map(e), xh)? * self.beta[e])
    }
}

/// Assembles and solves a deterministic problem (5-parameter stress blocks
/// condensed element-wise for the hybrid element).
pub fn solve_deterministic(p: &DeterministicProblem<'_>) -> Result<SampleSolution> {
    let mesh = p.mesh;
    let map = DofMap::new(mesh, 1);
    if map.n_free_nodes == mesh.n_nodes() {
        return Err(Error::SingularSystem(
            "no Dirichlet boundary: rigid modes are unconstrained".into(),
        ));
    }
    let n = map.n_dofs();
    let mut matrix = SkylineMatrix::new(skyline_profile(mesh, &map));
    let mut rhs = CompVec::new(n);
    let mut prescribed = DVector::<f64>::zeros(mesh.n_nodes() * 2);
    for node in mesh.dirichlet_nodes() {
        let v = (p.dirichlet)(mesh.nodes[node]);
        prescribed[node * 2] = v.x;
        prescribed[node * 2 + 1] = v.y;
    }

    let mut condensers: Vec<(SMatrix5x5, SMatrix5x8)> = Vec::new();
    for e in 0..mesh.n_elements() {
        let emap = mesh.element_map(e);
        let k_t: DMatrix<f64> = match p.kind {
            ElementKind::PsHybrid => {
                let (h, g) = ps_blocks_deterministic(&emap, p.law, |x| (p.young)(x), p.spatial_order)
                    .map_err(|err| Error::ElementAssembly {
                        element: e,
                        detail: alloc::format!("{err}"),
                    })?;
                let chol = h.cholesky().ok_or(Error::ElementAssembly {
                    element: e,
                    detail: "stress compliance block is not positive definite".into(),
                })?;
                condensers.push((h, g));
                let hg = chol.solve(&g);
                let k = g.transpose() * hg;
                DMatrix::from_fn(8, 8, |i, j| 0.5 * (k[(i, j)] + k[(j, i)]))
            }
            ElementKind::Bilinear => {
                let k =
                    bilinear_stiffness_deterministic(&emap, p.law, |x| (p.young)(x), p.spatial_order)
                        .map_err(|err| Error::ElementAssembly {
                            element: e,
                            detail: alloc::format!("{err}"),
                        })?;
                DMatrix::from_fn(8, 8, |i, j| k[(i, j)])
            }
        };
        let idx = mesh.elements[e];
        let mut global: Vec<Option<usize>> = Vec::with_capacity(8);
        let mut pres: Vec<f64> = Vec::with_capacity(8);
        for a in 0..4 {
            for comp in 0..2 {
                global.push(map.dof(idx[a], comp, 0));
                pres.push(prescribed[idx[a] * 2 + comp]);
            }
        }
        for lj in 0..8 {
            match global[lj] {
                Some(gj) => {
                    for li in 0..8 {
                        if let Some(gi) = global[li] {
                            if gi <= gj {
                                matrix.add(gi, gj, k_t[(li, lj)]);
                            }
                        }
                    }
                }
                None => {
                    let v = pres[lj];
                    if v != 0.0 {
                        for li in 0..8 {
                            if let Some(gi) = global[li] {
                                rhs.add(gi, -k_t[(li, lj)] * v);
                            }
                        }
                    }
                }
            }
        }
    }

    // loads
    let (pts, wts) = gauss_legendre_2d(3);
    for e in 0..mesh.n_elements() {
        let emap = mesh.element_map(e);
        let idx = mesh.elements[e];
        for (k, &xh) in pts.iter().enumerate() {
            let x = emap.map(xh);
            let f = (p.body)(x);
            if f.x == 0.0 && f.y == 0.0 {
                continue;
            }
            let (_, det) = emap.jacobian(xh);
            let shp = shape_values(xh);
            let w = wts[k] * det;
            for a in 0..4 {
                for comp in 0..2 {
                    if let Some(g) = map.dof(idx[a], comp, 0) {
                        rhs.add(g, w * shp[a] * f[comp]);
                    }
                }
            }
        }
    }
    let edge_rule = gauss_legendre(4);
    for be in &mesh.boundary_edges {
        let group = match be.tag {
            EdgeTag::Traction(g) => g,
            EdgeTag::Dirichlet => continue,
        };
        let pa = mesh.nodes[be.a];
        let pb = mesh.nodes[be.b];
        let len = hypot(pb.x - pa.x, pb.y - pa.y);
        for (k, &t) in edge_rule.nodes.iter().enumerate() {
            let s = 0.5 * (1.0 + t);
            let x = Point2::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
            let g_val = (p.traction)(group, x);
            if g_val.x == 0.0 && g_val.y == 0.0 {
                continue;
            }
            let w_edge = edge_rule.weights[k] * 0.5 * len;
            let shp = [1.0 - s, s];
            for (end, &node) in [be.a, be.b].iter().enumerate() {
                for comp in 0..2 {
                    if let Some(gd) = map.dof(node, comp, 0) {
                        rhs.add(gd, w_edge * shp[end] * g_val[comp]);
                    }
                }
            }
        }
    }

    matrix.compact();
    let rhs = rhs.into_vector();
    let factor = matrix.factorize()?;
    let x = refined_solve(&matrix, &factor, &rhs);
    let res_vec = matrix.matvec(&x) - &rhs;
    let denom = rhs.norm();
    let residual = if denom > 0.0 {
        res_vec.norm() / denom
    } else {
        res_vec.norm()
    };

    let mut u = prescribed;
    for node in 0..mesh.n_nodes() {
        for comp in 0..2 {
            if let Some(g) = map.dof(node, comp, 0) {
                u[node * 2 + comp] = x[g];
            }
        }
    }

    let mut beta = Vec::new();
    if p.kind == ElementKind::PsHybrid {
        beta.reserve(mesh.n_elements());
        for (e, (h, g)) in condensers.iter().enumerate() {
            let idx = mesh.elements[e];
            let mut ue = SVector::<f64, 8>::zeros();
            for a in 0..4 {
                ue[a * 2] = u[idx[a] * 2];
                ue[a * 2 + 1] = u[idx[a] * 2 + 1];
            }
            let chol = h.cholesky().ok_or(Error::ElementAssembly {
                element: e,
                detail: "stress compliance block is not positive definite".into(),
            })?;
            beta.push(chol.solve(&(g * ue)));
        }
    }

    Ok(SampleSolution { u, beta, residual })
}

type SMatrix5x5 = nalgebra::SMatrix<f64, 5, 5>;
type SMatrix5x8 = nalgebra::SMatrix<f64, 5, 8>;
