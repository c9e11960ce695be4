//! Tensor-product polynomial bases on the stochastic parameter box Γ and the
//! density-weighted quadrature rules that go with them.
//!
//! Three constructions share one representation:
//!
//! * `k`-version — per dimension, a partition of Γ_n into cells carrying
//!   discontinuous polynomials of degree q_n (dimension `cells · (q_n+1)`);
//! * `p`-version — one cell per dimension with global degree p_n;
//! * Hermite chaos — polynomials in a standard normal germ ξ, with non-Gaussian
//!   model variables reached through the pushforward `y = F⁻¹(Φ(ξ))`.
//!
//! All bases are orthonormalized under the density-weighted quadrature inner
//! product per dimension (tensor factors stay orthonormal under the product
//! density), starting from analytically orthonormal Legendre/Hermite raws so
//! the cleanup is a well-conditioned near-identity correction.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kl::VariableDistribution;
use crate::num::sqrt;
use crate::quadrature::{gauss_hermite, gauss_legendre, GaussRule};

/// How integration coordinates relate to the model's random variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GermMap {
    /// Integration runs directly over the model variables.
    Direct,
    /// Integration runs over independent standard normal germs; model
    /// variables are the per-dimension pushforwards `F⁻¹(Φ(ξ_n))`.
    GaussianGerm,
}

/// Density-weighted tensor quadrature on Γ (weights sum to one).
#[derive(Debug, Clone)]
pub struct StochasticQuadrature {
    /// Number of dimensions.
    pub n_dims: usize,
    /// Flattened node coordinates, `n_points × n_dims`, row-major.
    coords: Vec<f64>,
    pub weights: Vec<f64>,
}

impl StochasticQuadrature {
    /// Tensorizes per-dimension rules.
    pub fn from_rules(rules: &[GaussRule]) -> StochasticQuadrature {
        let n_dims = rules.len();
        if n_dims == 0 {
            return StochasticQuadrature {
                n_dims: 0,
                coords: Vec::new(),
                weights: alloc::vec![1.0],
            };
        }
        let total: usize = rules.iter().map(|r| r.len()).product();
        let mut coords = Vec::with_capacity(total * n_dims);
        let mut weights = Vec::with_capacity(total);
        let mut idx = alloc::vec![0usize; n_dims];
        loop {
            let mut w = 1.0;
            for d in 0..n_dims {
                coords.push(rules[d].nodes[idx[d]]);
                w *= rules[d].weights[idx[d]];
            }
            weights.push(w);
            // increment mixed-radix counter, last dimension fastest
            let mut d = n_dims;
            loop {
                if d == 0 {
                    return StochasticQuadrature {
                        n_dims,
                        coords,
                        weights,
                    };
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < rules[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n_dims..(i + 1) * self.n_dims]
    }
}

/// Density-weighted tensor rule over the given model variables (`n_pts[d]`
/// points in dimension `d`).
pub fn quadrature(dists: &[VariableDistribution], n_pts: &[usize]) -> Result<StochasticQuadrature> {
    if dists.len() != n_pts.len() {
        return Err(Error::invalid("one point count per dimension required"));
    }
    if n_pts.contains(&0) {
        return Err(Error::invalid(
            "quadrature needs at least one point per dimension",
        ));
    }
    let rules: Vec<GaussRule> = dists.iter().zip(n_pts).map(|(d, &n)| d.rule(n)).collect();
    Ok(StochasticQuadrature::from_rules(&rules))
}

/// Orthonormal Legendre values (density 1/2 on [-1,1]) up to `deg`.
fn legendre_orthonormal(t: f64, deg: usize, out: &mut [f64]) {
    let mut p_prev = 1.0; // P_0
    let mut p = t; // P_1
    out[0] = 1.0;
    if deg >= 1 {
        out[1] = sqrt(3.0) * t;
    }
    for k in 1..deg {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
        out[k + 1] = sqrt(2.0 * (kf + 1.0) + 1.0) * p;
    }
}

/// Orthonormal probabilists' Hermite values up to `deg`.
fn hermite_orthonormal(xi: f64, deg: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if deg >= 1 {
        out[1] = xi;
    }
    for k in 1..deg {
        let kf = k as f64;
        out[k + 1] = (xi * out[k] - sqrt(kf) * out[k - 1]) / sqrt(kf + 1.0);
    }
}

/// Raw (pre-orthonormalization) functions of one stochastic dimension.
#[derive(Debug, Clone)]
enum DimSupport {
    /// Disjoint cells of a bounded range; Legendre pieces scaled by the cell
    /// probability mass.
    Cells { cells: Vec<(f64, f64)> },
    /// The whole real line under the standard normal density.
    Hermite,
}

/// One stochastic dimension of a tensor basis.
#[derive(Debug, Clone)]
pub struct DimBasis {
    /// Distribution of the integration coordinate in this dimension.
    pub dist: VariableDistribution,
    support: DimSupport,
    /// Per-cell polynomial degree.
    pub degree: usize,
    /// Orthonormalized coefficients over the raw functions (dim × n_raw).
    coeff: DMatrix<f64>,
}

impl DimBasis {
    pub fn dim(&self) -> usize {
        self.coeff.nrows()
    }

    fn n_raw(&self) -> usize {
        self.coeff.ncols()
    }

    /// Values of all raw functions at `y`.
    fn eval_raw(&self, y: f64, out: &mut [f64]) {
        match &self.support {
            DimSupport::Cells { cells } => {
                out.fill(0.0);
                let q1 = self.degree + 1;
                for (c, &(a, b)) in cells.iter().enumerate() {
                    let inside = if c + 1 == cells.len() {
                        y >= a && y <= b
                    } else {
                        y >= a && y < b
                    };
                    if inside {
                        let t = (2.0 * y - a - b) / (b - a);
                        let mut leg = alloc::vec![0.0; q1];
                        legendre_orthonormal(t, self.degree, &mut leg);
                        let scale = 1.0 / sqrt(self.cell_mass(a, b));
                        for j in 0..q1 {
                            out[c * q1 + j] = scale * leg[j];
                        }
                        return;
                    }
                }
            }
            DimSupport::Hermite => hermite_orthonormal(y, self.degree, out),
        }
    }

    fn cell_mass(&self, a: f64, b: f64) -> f64 {
        match self.dist {
            VariableDistribution::Uniform { a: lo, b: hi } => (b - a) / (hi - lo),
            VariableDistribution::StandardNormal => {
                crate::num::normal_cdf(b) - crate::num::normal_cdf(a)
            }
        }
    }

    /// Values of all orthonormal basis functions at `y`.
    pub fn eval(&self, y: f64, out: &mut [f64]) {
        let mut raw = alloc::vec![0.0; self.n_raw()];
        self.eval_raw(y, &mut raw);
        for i in 0..self.dim() {
            let mut acc = 0.0;
            for j in 0..self.n_raw() {
                acc += self.coeff[(i, j)] * raw[j];
            }
            out[i] = acc;
        }
    }

    /// Density-weighted rule resolving this dimension: per-cell Gauss rules
    /// with `degree + 1 + extra` points (Gauss–Hermite on normal support).
    pub fn rule(&self, extra: usize) -> GaussRule {
        self.rule_with(self.degree + 1 + extra)
    }

    /// Density-weighted rule with a fixed point count per cell.
    pub fn rule_with(&self, n: usize) -> GaussRule {
        match &self.support {
            DimSupport::Cells { cells } => {
                let base = gauss_legendre(n);
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for &(a, b) in cells {
                    let mapped = base.mapped_to(a, b);
                    let density = self.cell_mass(a, b) / (b - a);
                    nodes.extend(mapped.nodes);
                    weights.extend(mapped.weights.iter().map(|w| w * density));
                }
                GaussRule { nodes, weights }
            }
            DimSupport::Hermite => gauss_hermite(n),
        }
    }

    /// Re-orthonormalizes the coefficients under the quadrature inner product
    /// (modified Gram–Schmidt with re-orthogonalization).
    fn orthonormalize(&mut self) -> Result<()> {
        let rule = self.rule(3);
        let m = self.dim();
        let nq = rule.len();
        // value matrix scaled by sqrt(weights): columns are basis functions
        let mut v = DMatrix::<f64>::zeros(nq, m);
        let mut buf = alloc::vec![0.0; m];
        for (q, (&y, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            self.eval(y, &mut buf);
            let sw = sqrt(w);
            for i in 0..m {
                v[(q, i)] = sw * buf[i];
            }
        }
        // MGS on columns, collecting R so new coefficients solve Rᵀ·coeff' = coeff
        let mut r = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for _ in 0..2 {
                for k in 0..i {
                    let proj = v.column(i).dot(&v.column(k));
                    let col_k = v.column(k).into_owned();
                    let mut col_i = v.column_mut(i);
                    col_i.axpy(-proj, &col_k, 1.0);
                    r[(k, i)] += proj;
                }
            }
            let norm = v.column(i).norm();
            if norm < 1e-12 {
                return Err(Error::invalid(format!(
                    "stochastic basis function {i} is linearly dependent under the quadrature rule"
                )));
            }
            r[(i, i)] = norm;
            v.column_mut(i).scale_mut(1.0 / norm);
        }
        let old = self.coeff.clone();
        for j in 0..self.n_raw() {
            for i in 0..m {
                let mut acc = old[(i, j)];
                for k in 0..i {
                    acc -= r[(k, i)] * self.coeff[(k, j)];
                }
                self.coeff[(i, j)] = acc / r[(i, i)];
            }
        }
        Ok(())
    }
}

/// Basis family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    KVersion,
    PVersion,
    Gpc,
}

/// Tensor-product polynomial basis over Γ.
#[derive(Debug, Clone)]
pub struct StochasticBasis {
    pub kind: BasisKind,
    pub germ_map: GermMap,
    pub dims: Vec<DimBasis>,
    /// Distributions of the model variables (identical to the integration
    /// coordinates for `GermMap::Direct`).
    pub model_dists: Vec<VariableDistribution>,
}

impl StochasticBasis {
    /// Total basis dimension M.
    pub fn dim(&self) -> usize {
        self.dims.iter().map(|d| d.dim()).product()
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    /// Values of all M tensor basis functions at integration point `y`.
    pub fn eval_all(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dims.len());
        debug_assert_eq!(out.len(), self.dim());
        let per: Vec<Vec<f64>> = self
            .dims
            .iter()
            .zip(y)
            .map(|(d, &yd)| {
                let mut v = alloc::vec![0.0; d.dim()];
                d.eval(yd, &mut v);
                v
            })
            .collect();
        for (m, slot) in out.iter_mut().enumerate() {
            let mut rest = m;
            let mut val = 1.0;
            // last dimension fastest
            for d in (0..self.dims.len()).rev() {
                let nd = self.dims[d].dim();
                val *= per[d][rest % nd];
                rest /= nd;
            }
            *slot = val;
        }
    }

    pub fn eval(&self, m: usize, y: &[f64]) -> f64 {
        let mut out = alloc::vec![0.0; self.dim()];
        self.eval_all(y, &mut out);
        out[m]
    }

    /// Quadrature resolving products of two basis functions plus `extra`
    /// points per dimension for non-polynomial coefficient factors.
    pub fn integration_quadrature(&self, extra: usize) -> StochasticQuadrature {
        let rules: Vec<GaussRule> = self.dims.iter().map(|d| d.rule(d.degree + extra)).collect();
        StochasticQuadrature::from_rules(&rules)
    }

    /// Quadrature with a fixed per-cell point count in every dimension,
    /// independent of the basis degrees (used by the error norms).
    pub fn error_quadrature(&self, n_per_dim: usize) -> StochasticQuadrature {
        let rules: Vec<GaussRule> = self.dims.iter().map(|d| d.rule_with(n_per_dim)).collect();
        StochasticQuadrature::from_rules(&rules)
    }

    /// Maps integration coordinates to model-variable values.
    pub fn to_model_coords(&self, y_int: &[f64], out: &mut [f64]) {
        match self.germ_map {
            GermMap::Direct => out.copy_from_slice(y_int),
            GermMap::GaussianGerm => {
                for (d, (&xi, dist)) in y_int.iter().zip(&self.model_dists).enumerate() {
                    out[d] = dist.from_standard_normal(xi);
                }
            }
        }
    }

    /// Gram-matrix diagnostics under a refined quadrature rule.
    pub fn gram_report(&self, extra: usize) -> GramReport {
        let quad = self.integration_quadrature(extra);
        let m = self.dim();
        let mut gram = DMatrix::<f64>::zeros(m, m);
        let mut vals = alloc::vec![0.0; m];
        for q in 0..quad.len() {
            self.eval_all(quad.point(q), &mut vals);
            let w = quad.weights[q];
            for i in 0..m {
                for j in 0..m {
                    gram[(i, j)] += w * vals[i] * vals[j];
                }
            }
        }
        let eig = gram.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        let max_eig = eig.eigenvalues.max();
        let mut max_offdiag: f64 = 0.0;
        let mut max_diag_dev: f64 = 0.0;
        for i in 0..m {
            max_diag_dev = max_diag_dev.max((gram[(i, i)] - 1.0).abs());
            for j in 0..m {
                if i != j {
                    max_offdiag = max_offdiag.max(gram[(i, j)].abs());
                }
            }
        }
        GramReport {
            min_eig,
            condition: max_eig / min_eig,
            max_offdiag,
            max_diag_dev,
        }
    }
}

/// Orthonormality diagnostics of a built basis.
#[derive(Debug, Clone, Copy)]
pub struct GramReport {
    pub min_eig: f64,
    pub condition: f64,
    pub max_offdiag: f64,
    pub max_diag_dev: f64,
}

fn bounded_range(dist: &VariableDistribution) -> Result<(f64, f64)> {
    match dist {
        VariableDistribution::Uniform { a, b } => Ok((*a, *b)),
        VariableDistribution::StandardNormal => Err(Error::invalid(
            "k-version partitions need a bounded variable range",
        )),
    }
}

fn build_dim(
    dist: VariableDistribution,
    cells: Vec<(f64, f64)>,
    degree: usize,
) -> Result<DimBasis> {
    let (support, n) = if cells.is_empty() {
        match dist {
            VariableDistribution::StandardNormal => (DimSupport::Hermite, degree + 1),
            _ => return Err(Error::invalid("bounded variables need explicit cells")),
        }
    } else {
        let n = cells.len() * (degree + 1);
        (DimSupport::Cells { cells }, n)
    };
    let mut dim = DimBasis {
        dist,
        support,
        degree,
        coeff: DMatrix::identity(n, n),
    };
    dim.orthonormalize()?;
    Ok(dim)
}

/// Piecewise-polynomial tensor basis: dimension `n` carries `partitions[n]`
/// (strictly increasing breakpoints spanning Γ_n) and per-cell degree `q[n]`.
pub fn build_k_version(
    dists: &[VariableDistribution],
    partitions: &[Vec<f64>],
    q: &[usize],
) -> Result<StochasticBasis> {
    if dists.len() != partitions.len() || dists.len() != q.len() {
        return Err(Error::invalid(
            "k-version needs one partition and one degree per dimension",
        ));
    }
    let mut dims = Vec::with_capacity(dists.len());
    for ((dist, brk), &deg) in dists.iter().zip(partitions).zip(q) {
        let (lo, hi) = bounded_range(dist)?;
        if brk.len() < 2 {
            return Err(Error::invalid("partition needs at least two breakpoints"));
        }
        let span = hi - lo;
        if (brk[0] - lo).abs() > 1e-12 * span || (brk[brk.len() - 1] - hi).abs() > 1e-12 * span {
            return Err(Error::invalid(format!(
                "partition must span the whole range [{lo}, {hi}]"
            )));
        }
        let mut cells = Vec::with_capacity(brk.len() - 1);
        for w in brk.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid(
                    "partition breakpoints must be strictly increasing (overlapping cells rejected)",
                ));
            }
            cells.push((w[0], w[1]));
        }
        dims.push(build_dim(*dist, cells, deg)?);
    }
    Ok(StochasticBasis {
        kind: BasisKind::KVersion,
        germ_map: GermMap::Direct,
        dims,
        model_dists: dists.to_vec(),
    })
}

/// Breakpoints of a uniform partition of a bounded variable's range.
pub fn uniform_partition(dist: &VariableDistribution, n_cells: usize) -> Result<Vec<f64>> {
    let (lo, hi) = bounded_range(dist)?;
    if n_cells == 0 {
        return Err(Error::invalid("at least one cell required"));
    }
    Ok((0..=n_cells)
        .map(|k| lo + (hi - lo) * k as f64 / n_cells as f64)
        .collect())
}

/// Global polynomial tensor basis of per-dimension degree `p[n]`.
pub fn build_p_version(dists: &[VariableDistribution], p: &[usize]) -> Result<StochasticBasis> {
    if dists.len() != p.len() {
        return Err(Error::invalid("one degree per dimension required"));
    }
    let mut dims = Vec::with_capacity(dists.len());
    for (dist, &deg) in dists.iter().zip(p) {
        let cells = match dist {
            VariableDistribution::Uniform { a, b } => alloc::vec![(*a, *b)],
            VariableDistribution::StandardNormal => Vec::new(),
        };
        dims.push(build_dim(*dist, cells, deg)?);
    }
    Ok(StochasticBasis {
        kind: BasisKind::PVersion,
        germ_map: GermMap::Direct,
        dims,
        model_dists: dists.to_vec(),
    })
}

/// Hermite-chaos basis over standard normal germs; `inputs` are the model
/// variable distributions reached through `y_n = F⁻¹(Φ(ξ_n))`.
pub fn build_gpc(inputs: &[VariableDistribution], p: &[usize]) -> Result<StochasticBasis> {
    if inputs.len() != p.len() {
        return Err(Error::invalid("one degree per dimension required"));
    }
    let mut dims = Vec::with_capacity(inputs.len());
    for &deg in p {
        dims.push(build_dim(
            VariableDistribution::StandardNormal,
            Vec::new(),
            deg,
        )?);
    }
    Ok(StochasticBasis {
        kind: BasisKind::Gpc,
        germ_map: GermMap::GaussianGerm,
        dims,
        model_dists: inputs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIFORM_WIDE: VariableDistribution = VariableDistribution::Uniform {
        a: 500.0,
        b: 1500.0,
    };

    #[test]
    fn dimension_counts() {
        let d = VariableDistribution::Uniform { a: -1.0, b: 1.0 };
        let b = build_k_version(&[d], &[uniform_partition(&d, 1).unwrap()], &[0]).unwrap();
        assert_eq!(b.dim(), 1);

        let b = build_k_version(
            &[UNIFORM_WIDE],
            &[uniform_partition(&UNIFORM_WIDE, 2).unwrap()],
            &[1],
        )
        .unwrap();
        assert_eq!(b.dim(), 4);

        let d2 = [
            VariableDistribution::Uniform { a: 0.0, b: 1.0 },
            VariableDistribution::Uniform { a: -2.0, b: 3.0 },
        ];
        let b = build_k_version(
            &d2,
            &[
                uniform_partition(&d2[0], 2).unwrap(),
                uniform_partition(&d2[1], 3).unwrap(),
            ],
            &[1, 2],
        )
        .unwrap();
        assert_eq!(b.dim(), (2 * 2) * (3 * 3));
    }

    #[test]
    fn constant_mode_is_one() {
        let b = build_p_version(&[UNIFORM_WIDE], &[0]).unwrap();
        assert_eq!(b.dim(), 1);
        assert!((b.eval(0, &[731.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_version_matches_legendre_closed_form() {
        let dist = VariableDistribution::Uniform { a: -1.0, b: 1.0 };
        let b = build_p_version(&[dist], &[2]).unwrap();
        for &y in &[-0.9, -0.3, 0.0, 0.4, 0.8] {
            let mut v = [0.0; 3];
            b.eval_all(&[y], &mut v);
            let l1 = sqrt(3.0) * y;
            let l2 = sqrt(5.0) * 0.5 * (3.0 * y * y - 1.0);
            assert!((v[0] - 1.0).abs() < 1e-12);
            assert!((v[1].abs() - l1.abs()).abs() < 1e-12);
            assert!((v[2].abs() - l2.abs()).abs() < 1e-12, "{} vs {}", v[2], l2);
        }
    }

    #[test]
    fn p_version_matches_hermite_closed_form() {
        let b = build_p_version(&[VariableDistribution::StandardNormal], &[2]).unwrap();
        for &xi in &[-2.0, -0.5, 0.0, 1.0, 2.5] {
            let mut v = [0.0; 3];
            b.eval_all(&[xi], &mut v);
            assert!((v[0] - 1.0).abs() < 1e-12);
            assert!((v[1].abs() - xi.abs()).abs() < 1e-12);
            let h2 = (xi * xi - 1.0) / sqrt(2.0);
            assert!((v[2].abs() - h2.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_is_identity() {
        // k-version with uneven cells and degree 2
        let b = build_k_version(
            &[UNIFORM_WIDE],
            &[alloc::vec![500.0, 800.0, 900.0, 1500.0]],
            &[2],
        )
        .unwrap();
        let rep = b.gram_report(6);
        assert!(rep.max_offdiag < 1e-10, "{rep:?}");
        assert!(rep.max_diag_dev < 1e-10, "{rep:?}");
        assert!(rep.min_eig > 1e-12);

        // Hermite chaos at degree 8
        let b = build_gpc(&[UNIFORM_WIDE], &[8]).unwrap();
        let rep = b.gram_report(8);
        assert!(rep.max_offdiag < 1e-9, "{rep:?}");
        assert!(rep.min_eig > 1e-12);

        // 2D mixed tensor basis
        let d2 = [
            VariableDistribution::Uniform { a: 0.0, b: 1.0 },
            VariableDistribution::StandardNormal,
        ];
        let b = build_p_version(&d2, &[2, 3]).unwrap();
        let rep = b.gram_report(5);
        assert!(rep.max_offdiag < 1e-10, "{rep:?}");
    }

    #[test]
    fn single_cell_k_version_spans_p_version() {
        // project each k-version function onto the p-version basis; the
        // residual must vanish (same space).
        let p = 3usize;
        let kb = build_k_version(
            &[UNIFORM_WIDE],
            &[uniform_partition(&UNIFORM_WIDE, 1).unwrap()],
            &[p],
        )
        .unwrap();
        let pb = build_p_version(&[UNIFORM_WIDE], &[p]).unwrap();
        let quad = pb.integration_quadrature(6);
        let m = p + 1;
        for i in 0..m {
            let mut norm2 = 0.0;
            let mut coeffs = alloc::vec![0.0; m];
            for q in 0..quad.len() {
                let y = quad.point(q);
                let w = quad.weights[q];
                let fi = kb.eval(i, y);
                norm2 += w * fi * fi;
                for (j, c) in coeffs.iter_mut().enumerate() {
                    *c += w * fi * pb.eval(j, y);
                }
            }
            let proj2: f64 = coeffs.iter().map(|c| c * c).sum();
            assert!(
                (norm2 - proj2).abs() < 1e-10,
                "mode {i}: residual {}",
                norm2 - proj2
            );
        }
    }

    #[test]
    fn quadrature_moments() {
        let q = quadrature(&[UNIFORM_WIDE], &[1]).unwrap();
        let mean: f64 = (0..q.len()).map(|i| q.weights[i] * q.point(i)[0]).sum();
        assert!((mean - 1000.0).abs() < 1e-9);

        let q = quadrature(&[UNIFORM_WIDE], &[2]).unwrap();
        let m2: f64 = (0..q.len())
            .map(|i| q.weights[i] * q.point(i)[0] * q.point(i)[0])
            .sum();
        assert!((m2 - 13.0e6 / 12.0).abs() < 1e-4);

        let q = quadrature(&[VariableDistribution::StandardNormal], &[3]).unwrap();
        let m4: f64 = (0..q.len())
            .map(|i| q.weights[i] * crate::num::powi(q.point(i)[0], 4))
            .sum();
        assert!((m4 - 3.0).abs() < 1e-12);
        let total: f64 = q.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gpc_projection_coefficient_of_uniform_input() {
        // linear-germ coefficient of y = F⁻¹(Φ(ξ)) for uniform [500, 1500]:
        // E[y ξ] = 500·E[erf(ξ/√2) ξ] = 500/√π.
        let b = build_gpc(&[UNIFORM_WIDE], &[4]).unwrap();
        let quad = b.integration_quadrature(30);
        let mut c1 = 0.0;
        let mut y_model = [0.0];
        for q in 0..quad.len() {
            let xi = quad.point(q);
            b.to_model_coords(xi, &mut y_model);
            c1 += quad.weights[q] * y_model[0] * b.eval(1, xi);
        }
        let closed_form = 500.0 / sqrt(core::f64::consts::PI);
        assert!(
            (c1.abs() - closed_form).abs() < 1e-6,
            "{c1} vs ±{closed_form}"
        );
    }

    #[test]
    fn germ_map_direct_vs_gaussian() {
        let bp = build_p_version(&[UNIFORM_WIDE], &[1]).unwrap();
        let mut out = [0.0];
        bp.to_model_coords(&[777.0], &mut out);
        assert_eq!(out[0], 777.0);

        let bg = build_gpc(&[UNIFORM_WIDE], &[1]).unwrap();
        bg.to_model_coords(&[0.0], &mut out);
        assert!((out[0] - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_constructions_rejected() {
        // overlapping cells
        assert!(build_k_version(
            &[UNIFORM_WIDE],
            &[alloc::vec![500.0, 900.0, 800.0, 1500.0]],
            &[1]
        )
        .is_err());
        // partition not spanning the range
        assert!(build_k_version(&[UNIFORM_WIDE], &[alloc::vec![500.0, 900.0]], &[1]).is_err());
        // k-version on an unbounded variable
        assert!(build_k_version(
            &[VariableDistribution::StandardNormal],
            &[alloc::vec![-1.0, 1.0]],
            &[1]
        )
        .is_err());
    }
}
