//! Element-level matrices: bilinear (Q4) shape functions, the 5-parameter
//! hybrid stress mode, and the compliance/coupling/stiffness blocks for both
//! the deterministic and the stochastic Galerkin settings.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, Matrix2, Point2, SMatrix};

use crate::error::{Error, Result};
use crate::material::MaterialLaw;
use crate::mesh::{ElementMap, REF_VERTICES};
use crate::quadrature::gauss_legendre_2d;

/// Q4 shape function values at a reference point.
pub fn shape_values(xh: [f64; 2]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for a in 0..4 {
        n[a] = 0.25 * (1.0 + REF_VERTICES[a][0] * xh[0]) * (1.0 + REF_VERTICES[a][1] * xh[1]);
    }
    n
}

/// Q4 shape function gradients with respect to the reference coordinates.
pub fn shape_ref_gradients(xh: [f64; 2]) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for a in 0..4 {
        let s = REF_VERTICES[a][0];
        let t = REF_VERTICES[a][1];
        g[a][0] = 0.25 * s * (1.0 + t * xh[1]);
        g[a][1] = 0.25 * t * (1.0 + s * xh[0]);
    }
    g
}

/// Strain-displacement matrix (rows ε11, ε22, 2ε12; columns the 8 nodal
/// displacement components ordered (node, component)) and the Jacobian
/// determinant at a reference point.
pub fn strain_displacement(map: &ElementMap, xh: [f64; 2]) -> Result<(SMatrix<f64, 3, 8>, f64)> {
    let (j, det) = map.jacobian(xh);
    if det <= 0.0 {
        return Err(Error::invalid(format!(
            "non-positive Jacobian determinant {det:.3e} inside element"
        )));
    }
    let j_inv_t = Matrix2::new(j[(1, 1)], -j[(1, 0)], -j[(0, 1)], j[(0, 0)]) / det;
    let gref = shape_ref_gradients(xh);
    let mut b = SMatrix::<f64, 3, 8>::zeros();
    for a in 0..4 {
        let gx = j_inv_t[(0, 0)] * gref[a][0] + j_inv_t[(0, 1)] * gref[a][1];
        let gy = j_inv_t[(1, 0)] * gref[a][0] + j_inv_t[(1, 1)] * gref[a][1];
        b[(0, 2 * a)] = gx;
        b[(1, 2 * a + 1)] = gy;
        b[(2, 2 * a)] = gy;
        b[(2, 2 * a + 1)] = gx;
    }
    Ok((b, det))
}

/// The 5-parameter stress mode in physical Voigt components as a function of
/// the reference point. Columns 1–3 are the constant modes; columns 4 and 5
/// carry the linear terms whose coefficient ratios are fixed by the element
/// geometry:
///
/// ```text
/// ⎡ 1  0  0      ξ₂          (a₃²/b₃²) ξ₁ ⎤
/// ⎢ 0  1  0  (b₁²/a₁²) ξ₂        ξ₁       ⎥
/// ⎢ 0  0  1  (b₁/a₁)  ξ₂     (a₃/b₃) ξ₁   ⎦
/// ```
///
/// The ratios are undefined when `a₁` or `b₃` vanishes (an element rotated by
/// 90° from the axis-aligned orientation); such elements are rejected.
pub fn stress_mode(map: &ElementMap, xh: [f64; 2]) -> Result<SMatrix<f64, 3, 5>> {
    let scale = map.a[1].abs() + map.a[3].abs() + map.b[1].abs() + map.b[3].abs();
    if map.a[1].abs() <= 1e-12 * scale || map.b[3].abs() <= 1e-12 * scale {
        return Err(Error::invalid(
            "stress-mode coefficient ratios are undefined: a1 or b3 vanishes for this element",
        ));
    }
    let ra = map.a[3] / map.b[3];
    let rb = map.b[1] / map.a[1];
    let mut p = SMatrix::<f64, 3, 5>::zeros();
    p[(0, 0)] = 1.0;
    p[(1, 1)] = 1.0;
    p[(2, 2)] = 1.0;
    p[(0, 3)] = xh[1];
    p[(1, 3)] = rb * rb * xh[1];
    p[(2, 3)] = rb * xh[1];
    p[(0, 4)] = ra * ra * xh[0];
    p[(1, 4)] = xh[0];
    p[(2, 4)] = ra * xh[0];
    Ok(p)
}

/// Spatial Gauss order for one element: 2×2 is exact on parallelograms, 3×3
/// removes the distortion-induced quadrature error elsewhere.
pub fn spatial_order(map: &ElementMap, requested: usize) -> usize {
    if requested >= 2 {
        requested
    } else if map.is_affine() {
        2
    } else {
        3
    }
}

/// Deterministic hybrid-stress element blocks at a fixed modulus field:
/// the 5×5 compliance block `H = ∫ (1/E) Pᵀ C⁻¹ P` and the 5×8 coupling
/// block `G = ∫ Pᵀ B`.
pub fn ps_blocks_deterministic(
    map: &ElementMap,
    law: &MaterialLaw,
    mut young_at: impl FnMut(Point2<f64>) -> Result<f64>,
    order: usize,
) -> Result<(SMatrix<f64, 5, 5>, SMatrix<f64, 5, 8>)> {
    let (pts, wts) = gauss_legendre_2d(spatial_order(map, order));
    let mut h = SMatrix::<f64, 5, 5>::zeros();
    let mut g = SMatrix::<f64, 5, 8>::zeros();
    for (k, &xh) in pts.iter().enumerate() {
        let p = stress_mode(map, xh)?;
        let (b, det) = strain_displacement(map, xh)?;
        let w = wts[k] * det;
        let e = young_at(map.map(xh))?;
        h += p.transpose() * law.c_inv * p * (w / e);
        g += p.transpose() * b * w;
    }
    Ok((h, g))
}

/// Deterministic Q4 displacement stiffness `∫ Bᵀ (E C) B`.
pub fn bilinear_stiffness_deterministic(
    map: &ElementMap,
    law: &MaterialLaw,
    mut young_at: impl FnMut(Point2<f64>) -> Result<f64>,
    order: usize,
) -> Result<SMatrix<f64, 8, 8>> {
    let (pts, wts) = gauss_legendre_2d(spatial_order(map, order));
    let mut k_mat = SMatrix::<f64, 8, 8>::zeros();
    for (k, &xh) in pts.iter().enumerate() {
        let (b, det) = strain_displacement(map, xh)?;
        let e = young_at(map.map(xh))?;
        k_mat += b.transpose() * law.c * b * (wts[k] * det * e);
    }
    Ok(k_mat)
}

/// Stochastic Galerkin element blocks for the hybrid-stress element.
///
/// Local ordering is mode-minor: stress unknown `(i, m)` sits at `i·M + m`,
/// displacement unknown `(a, m)` at `a·M + m`. The coupling block is
/// mode-diagonal because the basis is orthonormal and the strain pairing has
/// no stochastic coefficient, so only its spatial factor is returned.
pub struct ElementBlocks {
    /// (5M) × (5M) stochastic compliance block; symmetric positive definite.
    pub h: DMatrix<f64>,
    /// 5 × 8 spatial coupling factor (tensorized with the identity over
    /// stochastic modes).
    pub g_spatial: SMatrix<f64, 5, 8>,
}

/// Weighted stochastic moment matrices `S[m][m'] = Σ_q w_q ψ_m ψ_m' φ(q)`
/// for a per-node factor `φ`.
pub fn moment_matrix(psi: &DMatrix<f64>, weights: &[f64], phi: &[f64]) -> DMatrix<f64> {
    let m = psi.ncols();
    let mut s = DMatrix::<f64>::zeros(m, m);
    for (q, (&w, &f)) in weights.iter().zip(phi).enumerate() {
        let wf = w * f;
        for a in 0..m {
            let pa = psi[(q, a)] * wf;
            for b in a..m {
                s[(a, b)] += pa * psi[(q, b)];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            s[(a, b)] = s[(b, a)];
        }
    }
    s
}

/// Accumulates `spatial[i][j] · moment[m][m']` into `out[(i·M+m, j·M+m')]`.
fn kron_accumulate<const R: usize, const C: usize>(
    out: &mut DMatrix<f64>,
    spatial: &SMatrix<f64, R, C>,
    moment: &DMatrix<f64>,
) {
    let m = moment.nrows();
    for i in 0..R {
        for j in 0..C {
            let s = spatial[(i, j)];
            if s == 0.0 {
                continue;
            }
            for a in 0..m {
                for b in 0..m {
                    out[(i * m + a, j * m + b)] += s * moment[(a, b)];
                }
            }
        }
    }
}

/// Context shared by all stochastic element computations: basis values and
/// model coordinates at the assembly quadrature nodes.
pub struct StochasticTables {
    /// ψ_m(y_q), one row per quadrature node.
    pub psi: DMatrix<f64>,
    /// Model-variable coordinates per node, row-major.
    pub y_model: Vec<f64>,
    pub n_vars: usize,
    pub weights: Vec<f64>,
}

impl StochasticTables {
    pub fn new(
        basis: &crate::stochastic::StochasticBasis,
        quad: &crate::stochastic::StochasticQuadrature,
    ) -> StochasticTables {
        let m = basis.dim();
        let nq = quad.len();
        let n_vars = basis.n_dims();
        let mut psi = DMatrix::<f64>::zeros(nq, m);
        let mut y_model = alloc::vec![0.0; nq * n_vars];
        let mut row = alloc::vec![0.0; m];
        for q in 0..nq {
            let y = quad.point(q);
            basis.eval_all(y, &mut row);
            for a in 0..m {
                psi[(q, a)] = row[a];
            }
            basis.to_model_coords(y, &mut y_model[q * n_vars..(q + 1) * n_vars]);
        }
        StochasticTables {
            psi,
            y_model,
            n_vars,
            weights: quad.weights.clone(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn model_point(&self, q: usize) -> &[f64] {
        &self.y_model[q * self.n_vars..(q + 1) * self.n_vars]
    }
}

/// Hybrid-stress blocks coupling the stochastic modes through `1/E`.
pub fn ps_element_blocks(
    map: &ElementMap,
    law: &MaterialLaw,
    model: &crate::kl::RandomFieldModel,
    tables: &StochasticTables,
    order: usize,
    element: usize,
) -> Result<ElementBlocks> {
    let m = tables.psi.ncols();
    let (pts, wts) = gauss_legendre_2d(spatial_order(map, order));
    let mut h = DMatrix::<f64>::zeros(5 * m, 5 * m);
    let mut g_spatial = SMatrix::<f64, 5, 8>::zeros();
    let mut inv_e = alloc::vec![0.0; tables.n_nodes()];
    for (k, &xh) in pts.iter().enumerate() {
        let p = stress_mode(map, xh).map_err(|e| wrap_element(e, element))?;
        let (b, det) = strain_displacement(map, xh).map_err(|e| wrap_element(e, element))?;
        let w = wts[k] * det;
        let x = map.map(xh);
        for q in 0..tables.n_nodes() {
            let e_val = model
                .young_at(x, tables.model_point(q))
                .map_err(|e| wrap_element(e, element))?;
            inv_e[q] = 1.0 / e_val;
        }
        let s = moment_matrix(&tables.psi, &tables.weights, &inv_e);
        let a_spatial = p.transpose() * law.c_inv * p * w;
        kron_accumulate(&mut h, &a_spatial, &s);
        g_spatial += p.transpose() * b * w;
    }
    Ok(ElementBlocks { h, g_spatial })
}

/// Q4 stochastic stiffness coupling the modes through `E`.
pub fn bilinear_element_stiffness(
    map: &ElementMap,
    law: &MaterialLaw,
    model: &crate::kl::RandomFieldModel,
    tables: &StochasticTables,
    order: usize,
    element: usize,
) -> Result<DMatrix<f64>> {
    let m = tables.psi.ncols();
    let (pts, wts) = gauss_legendre_2d(spatial_order(map, order));
    let mut k_out = DMatrix::<f64>::zeros(8 * m, 8 * m);
    let mut e_vals = alloc::vec![0.0; tables.n_nodes()];
    for (k, &xh) in pts.iter().enumerate() {
        let (b, det) = strain_displacement(map, xh).map_err(|e| wrap_element(e, element))?;
        let w = wts[k] * det;
        let x = map.map(xh);
        for q in 0..tables.n_nodes() {
            e_vals[q] = model
                .young_at(x, tables.model_point(q))
                .map_err(|e| wrap_element(e, element))?;
        }
        let s = moment_matrix(&tables.psi, &tables.weights, &e_vals);
        let a_spatial = b.transpose() * law.c * b * w;
        kron_accumulate(&mut k_out, &a_spatial, &s);
    }
    Ok(k_out)
}

fn wrap_element(err: Error, element: usize) -> Error {
    match err {
        Error::ElementAssembly { .. } => err,
        Error::NonPositiveModulus { .. } => err,
        other => Error::ElementAssembly {
            element,
            detail: format!("{other}"),
        },
    }
}

/// Static condensation of the stress unknowns: returns the displacement
/// stiffness `K = Gᵀ H⁻¹ G` and the recovery operator `R = H⁻¹ G`, with `G`
/// the mode-diagonal expansion of `g_spatial`.
pub fn condense(blocks: &ElementBlocks, m: usize, element: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut g_full = DMatrix::<f64>::zeros(5 * m, 8 * m);
    for i in 0..5 {
        for a in 0..8 {
            let v = blocks.g_spatial[(i, a)];
            if v == 0.0 {
                continue;
            }
            for mm in 0..m {
                g_full[(i * m + mm, a * m + mm)] = v;
            }
        }
    }
    let chol = blocks.h.clone().cholesky().ok_or(Error::ElementAssembly {
        element,
        detail: "stress compliance block is not positive definite".into(),
    })?;
    let recovery = chol.solve(&g_full);
    let mut k = g_full.transpose() * &recovery;
    // symmetrize roundoff
    for i in 0..k.nrows() {
        for j in (i + 1)..k.ncols() {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok((k, recovery))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::ElasticMode;
    use crate::mesh::{generate_rectangular, Rect};
    use nalgebra::Point2;

    fn unit_square_map() -> ElementMap {
        let mesh = generate_rectangular(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
        mesh.element_map(0)
    }

    #[test]
    fn stress_mode_reduces_on_rectangles() {
        let map = unit_square_map();
        let p = stress_mode(&map, [0.3, -0.6]).unwrap();
        // rectangle: a3 = b1 = 0, so the linear columns are pure
        assert_eq!(p[(1, 3)], 0.0);
        assert_eq!(p[(2, 3)], 0.0);
        assert_eq!(p[(0, 4)], 0.0);
        assert_eq!(p[(2, 4)], 0.0);
        assert!((p[(0, 3)] + 0.6).abs() < 1e-15);
        assert!((p[(1, 4)] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn stress_mode_rejects_rotated_rectangle() {
        // 90°-rotated rectangle: a1 = b3 = 0
        let v = [
            Point2::new(0.0, 0.0),
            Point2::new(0.0, -2.0),
            Point2::new(1.0, -2.0),
            Point2::new(1.0, 0.0),
        ];
        let map = ElementMap::from_vertices(&v);
        assert!(stress_mode(&map, [0.0, 0.0]).is_err());
    }

    /// Independent dense-quadrature oracle for the deterministic blocks on
    /// one element: raw loops, its own shape-function and stress-mode
    /// algebra, 6×6 Gauss.
    fn oracle_blocks(
        map: &ElementMap,
        law: &MaterialLaw,
        e_modulus: f64,
    ) -> (SMatrix<f64, 5, 5>, SMatrix<f64, 5, 8>, SMatrix<f64, 8, 8>) {
        let g1 = crate::quadrature::gauss_legendre(6);
        let mut h = SMatrix::<f64, 5, 5>::zeros();
        let mut g = SMatrix::<f64, 5, 8>::zeros();
        let mut kq4 = SMatrix::<f64, 8, 8>::zeros();
        let signs = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        for (i1, &s) in g1.nodes.iter().enumerate() {
            for (i2, &t) in g1.nodes.iter().enumerate() {
                let w0 = g1.weights[i1] * g1.weights[i2];
                // jacobian from first principles
                let j11 = map.a[1] + map.a[2] * t;
                let j12 = map.a[3] + map.a[2] * s;
                let j21 = map.b[1] + map.b[2] * t;
                let j22 = map.b[3] + map.b[2] * s;
                let det = j11 * j22 - j12 * j21;
                let w = w0 * det;
                // stress mode written out long-hand
                let ra = map.a[3] / map.b[3];
                let rb = map.b[1] / map.a[1];
                let p_cols: [[f64; 3]; 5] = [
                    [1.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0],
                    [0.0, 0.0, 1.0],
                    [t, rb * rb * t, rb * t],
                    [ra * ra * s, s, ra * s],
                ];
                // physical gradients of the four bilinear shapes
                let mut bmat = [[0.0f64; 8]; 3];
                for a in 0..4 {
                    let dns = 0.25 * signs[a][0] * (1.0 + signs[a][1] * t);
                    let dnt = 0.25 * signs[a][1] * (1.0 + signs[a][0] * s);
                    let gx = (j22 * dns - j21 * dnt) / det;
                    let gy = (-j12 * dns + j11 * dnt) / det;
                    bmat[0][2 * a] = gx;
                    bmat[1][2 * a + 1] = gy;
                    bmat[2][2 * a] = gy;
                    bmat[2][2 * a + 1] = gx;
                }
                // compliance and stiffness in Voigt form, inverted by hand
                let ci = law.c_inv;
                let c = law.c;
                for i in 0..5 {
                    for j in 0..5 {
                        let mut acc = 0.0;
                        for r in 0..3 {
                            for cc in 0..3 {
                                acc += p_cols[i][r] * ci[(r, cc)] * p_cols[j][cc];
                            }
                        }
                        h[(i, j)] += acc * w / e_modulus;
                    }
                    for a in 0..8 {
                        let mut acc = 0.0;
                        for r in 0..3 {
                            acc += p_cols[i][r] * bmat[r][a];
                        }
                        g[(i, a)] += acc * w;
                    }
                }
                for a in 0..8 {
                    for b in 0..8 {
                        let mut acc = 0.0;
                        for r in 0..3 {
                            for cc in 0..3 {
                                acc += bmat[r][a] * c[(r, cc)] * bmat[cc][b];
                            }
                        }
                        kq4[(a, b)] += acc * w * e_modulus;
                    }
                }
            }
        }
        (h, g, kq4)
    }

    #[test]
    fn deterministic_blocks_match_oracle() {
        let law = MaterialLaw::new(ElasticMode::PlaneStress, 0.25).unwrap();
        // unit square and a distorted convex quad
        let maps = [
            unit_square_map(),
            ElementMap::from_vertices(&[
                Point2::new(0.0, 0.0),
                Point2::new(2.1, 0.2),
                Point2::new(2.4, 1.9),
                Point2::new(-0.3, 1.6),
            ]),
        ];
        for map in &maps {
            let e_mod = 3.7;
            let (h, g) = ps_blocks_deterministic(map, &law, |_| Ok(e_mod), 3).unwrap();
            let k = bilinear_stiffness_deterministic(map, &law, |_| Ok(e_mod), 3).unwrap();
            let (h_ref, g_ref, k_ref) = oracle_blocks(map, &law, e_mod);
            // 3×3 Gauss vs 6×6 oracle: integrands are low-order rationals,
            // agreement is tight on the square and good on the distorted one
            let tol = if map.is_affine() { 1e-12 } else { 5e-4 };
            assert!((h - h_ref).norm() < tol * h_ref.norm(), "H mismatch");
            assert!((g - g_ref).norm() < tol * g_ref.norm(), "G mismatch");
            assert!((k - k_ref).norm() < tol * k_ref.norm(), "K mismatch");
        }
    }

    #[test]
    fn modulus_scaling() {
        let law = MaterialLaw::new(ElasticMode::PlaneStrain, 0.3).unwrap();
        let map = unit_square_map();
        let (h1, g1) = ps_blocks_deterministic(&map, &law, |_| Ok(1.0), 2).unwrap();
        let (h2, g2) = ps_blocks_deterministic(&map, &law, |_| Ok(2.0), 2).unwrap();
        assert!((h2 * 2.0 - h1).norm() < 1e-13 * h1.norm());
        assert!((g2 - g1).norm() < 1e-14 * g1.norm());
    }

    #[test]
    fn condensed_stiffness_has_three_rigid_modes_per_mode() {
        use crate::kl::{RandomFieldModel, ScalarRandomField, VectorRandomField};
        use crate::stochastic::{build_p_version, StochasticBasis};

        let law = MaterialLaw::new(ElasticMode::PlaneStress, 0.25).unwrap();
        let map = unit_square_map();

        let check = |basis: &StochasticBasis, model: &RandomFieldModel| {
            let m = basis.dim();
            let quad = basis.integration_quadrature(5);
            let tables = StochasticTables::new(basis, &quad);
            let blocks = ps_element_blocks(&map, &law, model, &tables, 0, 0).unwrap();
            let (k, _) = condense(&blocks, m, 0).unwrap();
            let eig = k.clone().symmetric_eigen();
            let max = eig.eigenvalues.amax();
            let zeros = eig
                .eigenvalues
                .iter()
                .filter(|&&l| l.abs() < 1e-10 * max)
                .count();
            assert_eq!(zeros, 3 * m, "rigid modes for M = {m}");
        };

        let det_model = RandomFieldModel {
            variables: alloc::vec![],
            young: ScalarRandomField::constant(1.0),
            young_bounds: (1.0, 1.0),
            body: VectorRandomField::zero(),
            tractions: alloc::vec![],
        };
        let b0 = build_p_version(&[], &[]).unwrap();
        check(&b0, &det_model);

        // deterministic modulus with a two-mode basis: block diagonal,
        // kernel dimension 3·M
        let dist = crate::kl::VariableDistribution::Uniform { a: 500.0, b: 1500.0 };
        let model = RandomFieldModel {
            variables: alloc::vec![dist],
            young: ScalarRandomField::constant(1.0),
            young_bounds: (1.0, 1.0),
            body: VectorRandomField::zero(),
            tractions: alloc::vec![],
        };
        let b2 = build_p_version(&[dist], &[1]).unwrap();
        check(&b2, &model);
    }

    #[test]
    fn deterministic_modulus_makes_h_block_diagonal() {
        use crate::kl::{RandomFieldModel, ScalarRandomField, VectorRandomField};
        use crate::stochastic::build_p_version;

        let law = MaterialLaw::new(ElasticMode::PlaneStress, 0.25).unwrap();
        let map = unit_square_map();
        let dist = crate::kl::VariableDistribution::Uniform { a: 500.0, b: 1500.0 };
        let model = RandomFieldModel {
            variables: alloc::vec![dist],
            young: ScalarRandomField::constant(2.5),
            young_bounds: (2.5, 2.5),
            body: VectorRandomField::zero(),
            tractions: alloc::vec![],
        };
        let basis = build_p_version(&[dist], &[2]).unwrap();
        let m = basis.dim();
        let quad = basis.integration_quadrature(5);
        let tables = StochasticTables::new(&basis, &quad);
        let blocks = ps_element_blocks(&map, &law, &model, &tables, 0, 0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                for a in 0..m {
                    for b in 0..m {
                        if a != b {
                            assert!(
                                blocks.h[(i * m + a, j * m + b)].abs() < 1e-12,
                                "off-diagonal stochastic coupling with deterministic modulus"
                            );
                        }
                    }
                }
            }
        }
        // scaling E -> cE scales K by c
        let model2 = RandomFieldModel {
            young: ScalarRandomField::constant(5.0),
            young_bounds: (5.0, 5.0),
            ..model.clone()
        };
        let blocks2 = ps_element_blocks(&map, &law, &model2, &tables, 0, 0).unwrap();
        let (k1, _) = condense(&blocks, m, 0).unwrap();
        let (k2, _) = condense(&blocks2, m, 0).unwrap();
        assert!((&k2 - &k1 * 2.0).norm() < 1e-12 * k1.norm());
    }

    #[test]
    fn uniform_modulus_couples_modes_with_log_moment() {
        use crate::kl::{FieldMode, RandomFieldModel, ScalarRandomField, VectorRandomField};
        use crate::stochastic::build_p_version;
        use alloc::sync::Arc;

        // modulus equal to the raw uniform variable on [500, 1500]: the
        // (0,0) stochastic factor of H is E[1/y] = ln(3)/1000.
        let dist = crate::kl::VariableDistribution::Uniform { a: 500.0, b: 1500.0 };
        let model = RandomFieldModel {
            variables: alloc::vec![dist],
            young: ScalarRandomField {
                general: None,
                mean: Arc::new(|_| 1000.0),
                modes: alloc::vec![FieldMode {
                    coeff: Arc::new(|_| 1.0),
                    var: 0,
                    transform: Some(Arc::new(|y| y - 1000.0)),
                }],
            },
            young_bounds: (500.0, 1500.0),
            body: VectorRandomField::zero(),
            tractions: alloc::vec![],
        };
        let law = MaterialLaw::new(ElasticMode::PlaneStress, 0.25).unwrap();
        let map = unit_square_map();
        let basis = build_p_version(&[dist], &[1]).unwrap();
        let quad = basis.integration_quadrature(30);
        let tables = StochasticTables::new(&basis, &quad);
        let blocks = ps_element_blocks(&map, &law, &model, &tables, 0, 0).unwrap();

        let (h_det, _) = ps_blocks_deterministic(&map, &law, |_| Ok(1.0), 2).unwrap();
        let m = basis.dim();
        let expected = crate::num::ln(3.0) / 1000.0;
        for i in 0..5 {
            for j in 0..5 {
                let got = blocks.h[(i * m, j * m)];
                assert!(
                    (got - expected * h_det[(i, j)]).abs() < 1e-9 * h_det.norm(),
                    "entry ({i},{j})"
                );
            }
        }
    }
}
