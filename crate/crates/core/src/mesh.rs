//! Quadrilateral meshes of rectangular domains and the isoparametric bilinear
//! geometry map.
//!
//! Two mesh families are provided: uniform axis-aligned rectangles and a
//! deterministically distorted family obtained from a 5×1 base strip whose
//! interior side nodes are shifted along the boundary, refined by
//! edge-midpoint/centroid subdivision. Element vertices are stored
//! counterclockwise; boundary edges are stored with the outward normal to the
//! right of `a -> b` (domain traversed counterclockwise).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use nalgebra::{Matrix2, Point2};

use crate::error::{Error, Result};
use crate::num::hypot;
use crate::quadrature::gauss_legendre_2d;

/// Traction group for edges on the `x = xmax` side of a generated domain.
pub const TRACTION_RIGHT: usize = 0;
/// Traction group for edges on the `y = ymax` side.
pub const TRACTION_TOP: usize = 1;
/// Traction group for edges on the `y = ymin` side.
pub const TRACTION_BOTTOM: usize = 2;
/// Traction group for edges on the `x = xmin` side (only used when that side
/// is not clamped).
pub const TRACTION_LEFT: usize = 3;

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) || !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
            return Err(Error::invalid(format!(
                "degenerate domain [{x0},{x1}]x[{y0},{y1}]"
            )));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Classification of a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    /// Displacement prescribed on this edge.
    Dirichlet,
    /// Surface traction applied on this edge; the group index selects which
    /// traction field acts here (generated meshes use the `TRACTION_*`
    /// constants).
    Traction(usize),
}

/// One straight boundary segment between two mesh nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: EdgeTag,
}

impl BoundaryEdge {
    /// Unit outward normal (edges are stored counterclockwise around the
    /// domain, so the outward normal is the tangent rotated by -90°).
    pub fn outward_normal(&self, nodes: &[Point2<f64>]) -> [f64; 2] {
        let dx = nodes[self.b].x - nodes[self.a].x;
        let dy = nodes[self.b].y - nodes[self.a].y;
        let len = hypot(dx, dy);
        [dy / len, -dx / len]
    }
}

/// Coefficients of the bilinear map from the reference square `[-1,1]²` to a
/// physical quadrilateral:
///
/// ```text
/// x1 = a0 + a1 ξ1 + a2 ξ1 ξ2 + a3 ξ2
/// x2 = b0 + b1 ξ1 + b2 ξ1 ξ2 + b3 ξ2
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMap {
    pub a: [f64; 4],
    pub b: [f64; 4],
}

/// Signs of the 4×4 vertex-to-coefficient matrix (row r gives coefficient r;
/// reference vertices ordered (-1,-1), (1,-1), (1,1), (-1,1)).
const COEFF_SIGNS: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0, 1.0],
];

/// Reference-square vertices in counterclockwise order.
pub const REF_VERTICES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

impl ElementMap {
    /// Builds the map from the four physical vertices (counterclockwise).
    pub fn from_vertices(v: &[Point2<f64>; 4]) -> Self {
        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        for r in 0..4 {
            for c in 0..4 {
                a[r] += 0.25 * COEFF_SIGNS[r][c] * v[c].x;
                b[r] += 0.25 * COEFF_SIGNS[r][c] * v[c].y;
            }
        }
        ElementMap { a, b }
    }

    /// Evaluates the map at a reference point.
    pub fn map(&self, xh: [f64; 2]) -> Point2<f64> {
        let [s, t] = xh;
        Point2::new(
            self.a[0] + self.a[1] * s + self.a[2] * s * t + self.a[3] * t,
            self.b[0] + self.b[1] * s + self.b[2] * s * t + self.b[3] * t,
        )
    }

    /// Jacobian matrix `d x / d ξ` and its determinant at a reference point.
    pub fn jacobian(&self, xh: [f64; 2]) -> (Matrix2<f64>, f64) {
        let [s, t] = xh;
        let j = Matrix2::new(
            self.a[1] + self.a[2] * t,
            self.a[3] + self.a[2] * s,
            self.b[1] + self.b[2] * t,
            self.b[3] + self.b[2] * s,
        );
        let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
        (j, det)
    }

    /// True when the map is affine (the element is a parallelogram) and the
    /// Jacobian is constant.
    pub fn is_affine(&self) -> bool {
        let scale = self.a[1].abs() + self.a[3].abs() + self.b[1].abs() + self.b[3].abs();
        self.a[2].abs() + self.b[2].abs() <= 1e-14 * scale
    }
}

/// Per-element shape-regularity ratios `h_T / ρ_T` and their maximum ζ, with
/// `ρ_T` the smallest inscribed-circle diameter over the four corner
/// sub-triangles.
#[derive(Debug, Clone)]
pub struct ShapeRegularityReport {
    pub ratios: Vec<f64>,
    pub zeta: f64,
}

/// Interior-node shifts defining the distorted 5×1 base strip. Offsets are
/// fractions of the domain width applied to the four interior bottom/top side
/// nodes (uniform positions 0.2, 0.4, 0.6, 0.8 of the width).
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionPattern {
    pub bottom: [f64; 4],
    pub top: [f64; 4],
}

impl Default for DistortionPattern {
    fn default() -> Self {
        DistortionPattern {
            bottom: [-0.1, -0.2, -0.2, -0.1],
            top: [0.0, 0.0, -0.1, -0.2],
        }
    }
}

impl DistortionPattern {
    pub fn zero() -> Self {
        DistortionPattern {
            bottom: [0.0; 4],
            top: [0.0; 4],
        }
    }
}

/// A conforming mesh of convex quadrilaterals with tagged boundary edges.
#[derive(Debug, Clone)]
pub struct QuadMesh {
    pub nodes: Vec<Point2<f64>>,
    pub elements: Vec<[usize; 4]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Mesh size: the largest element diameter.
    pub h: f64,
}

impl QuadMesh {
    /// Builds a mesh from raw data, checking the convexity/orientation and
    /// boundary-partition invariants.
    pub fn new(
        nodes: Vec<Point2<f64>>,
        elements: Vec<[usize; 4]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let mut mesh = QuadMesh {
            nodes,
            elements,
            boundary_edges,
            h: 0.0,
        };
        mesh.validate()?;
        mesh.h = mesh
            .elements
            .iter()
            .enumerate()
            .map(|(e, _)| mesh.element_diameter(e))
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_vertices(&self, e: usize) -> [Point2<f64>; 4] {
        let idx = self.elements[e];
        [
            self.nodes[idx[0]],
            self.nodes[idx[1]],
            self.nodes[idx[2]],
            self.nodes[idx[3]],
        ]
    }

    /// Bilinear geometry map of element `e`.
    pub fn element_map(&self, e: usize) -> ElementMap {
        ElementMap::from_vertices(&self.element_vertices(e))
    }

    pub fn element_diameter(&self, e: usize) -> f64 {
        let v = self.element_vertices(e);
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                d = d.max(hypot(v[j].x - v[i].x, v[j].y - v[i].y));
            }
        }
        d
    }

    /// Nodes lying on Dirichlet edges.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        let mut flag = alloc::vec![false; self.nodes.len()];
        for be in &self.boundary_edges {
            if be.tag == EdgeTag::Dirichlet {
                flag[be.a] = true;
                flag[be.b] = true;
            }
        }
        (0..self.nodes.len()).filter(|&n| flag[n]).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid("mesh has no elements"));
        }
        for (e, idx) in self.elements.iter().enumerate() {
            for &n in idx {
                if n >= self.nodes.len() {
                    return Err(Error::invalid(format!(
                        "element {e} references node {n} out of {}",
                        self.nodes.len()
                    )));
                }
            }
            let v = self.element_vertices(e);
            // Convexity and orientation: all corner sub-triangles must have
            // strictly positive signed area.
            let scale = self.element_diameter_of(&v);
            for i in 0..4 {
                let p0 = v[(i + 3) % 4];
                let p1 = v[i];
                let p2 = v[(i + 1) % 4];
                let cross = (p1.x - p0.x) * (p2.y - p1.y) - (p1.y - p0.y) * (p2.x - p1.x);
                if cross <= 1e-12 * scale * scale {
                    return Err(Error::DegenerateElement {
                        element: e,
                        detail: format!("non-convex or misoriented at corner {i}"),
                    });
                }
            }
            // Positive Jacobian at the vertices and across a 3×3 Gauss grid.
            let map = ElementMap::from_vertices(&v);
            let (pts, _) = gauss_legendre_2d(3);
            for xh in REF_VERTICES.iter().chain(pts.iter()) {
                let (_, det) = map.jacobian(*xh);
                if det <= 0.0 {
                    return Err(Error::DegenerateElement {
                        element: e,
                        detail: format!("non-positive Jacobian at ({}, {})", xh[0], xh[1]),
                    });
                }
            }
        }
        // Boundary edges must be exactly the element edges used once.
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for idx in &self.elements {
            for i in 0..4 {
                let a = idx[i];
                let b = idx[(i + 1) % 4];
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let boundary: Vec<(usize, usize)> = count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(&k, _)| k)
            .collect();
        if boundary.len() != self.boundary_edges.len() {
            return Err(Error::invalid(format!(
                "boundary edge list has {} entries, mesh boundary has {}",
                self.boundary_edges.len(),
                boundary.len()
            )));
        }
        let mut tagged: Vec<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|be| (be.a.min(be.b), be.a.max(be.b)))
            .collect();
        tagged.sort_unstable();
        tagged.dedup();
        if tagged != boundary {
            return Err(Error::invalid(
                "tagged boundary edges do not partition the mesh boundary",
            ));
        }
        Ok(())
    }

    fn element_diameter_of(&self, v: &[Point2<f64>; 4]) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                d = d.max(hypot(v[j].x - v[i].x, v[j].y - v[i].y));
            }
        }
        d
    }

    /// Shape-regularity ratios `h_T / ρ_T`.
    pub fn shape_regularity(&self) -> Result<ShapeRegularityReport> {
        let mut ratios = Vec::with_capacity(self.elements.len());
        for e in 0..self.elements.len() {
            let v = self.element_vertices(e);
            let h_t = self.element_diameter(e);
            let mut rho = f64::INFINITY;
            for i in 0..4 {
                let p0 = v[(i + 3) % 4];
                let p1 = v[i];
                let p2 = v[(i + 1) % 4];
                let a = hypot(p1.x - p0.x, p1.y - p0.y);
                let b = hypot(p2.x - p1.x, p2.y - p1.y);
                let c = hypot(p2.x - p0.x, p2.y - p0.y);
                let area =
                    0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x)).abs();
                let semi = 0.5 * (a + b + c);
                if !(area > 0.0 && semi > 0.0) {
                    return Err(Error::DegenerateElement {
                        element: e,
                        detail: "degenerate corner sub-triangle (zero inradius)".into(),
                    });
                }
                // inscribed-circle diameter = 2 * area / semiperimeter
                rho = rho.min(2.0 * area / semi);
            }
            ratios.push(h_t / rho);
        }
        let zeta = ratios.iter().copied().fold(0.0, f64::max);
        Ok(ShapeRegularityReport { ratios, zeta })
    }

    /// One level of uniform refinement: each quadrilateral is split into four
    /// through its edge midpoints and centroid. Boundary tags are inherited.
    pub fn refine(&self) -> Result<QuadMesh> {
        let mut nodes = self.nodes.clone();
        let mut edge_mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point2<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = edge_mid.get(&key) {
                return m;
            }
            let p = Point2::new(
                0.5 * (nodes[a].x + nodes[b].x),
                0.5 * (nodes[a].y + nodes[b].y),
            );
            nodes.push(p);
            let m = nodes.len() - 1;
            edge_mid.insert(key, m);
            m
        };

        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for idx in &self.elements {
            let m01 = mid(idx[0], idx[1], &mut nodes);
            let m12 = mid(idx[1], idx[2], &mut nodes);
            let m23 = mid(idx[2], idx[3], &mut nodes);
            let m30 = mid(idx[3], idx[0], &mut nodes);
            let cx = 0.25 * (nodes[idx[0]].x + nodes[idx[1]].x + nodes[idx[2]].x + nodes[idx[3]].x);
            let cy = 0.25 * (nodes[idx[0]].y + nodes[idx[1]].y + nodes[idx[2]].y + nodes[idx[3]].y);
            nodes.push(Point2::new(cx, cy));
            let c = nodes.len() - 1;
            elements.push([idx[0], m01, c, m30]);
            elements.push([m01, idx[1], m12, c]);
            elements.push([c, m12, idx[2], m23]);
            elements.push([m30, c, m23, idx[3]]);
        }

        let mut boundary = Vec::with_capacity(2 * self.boundary_edges.len());
        for be in &self.boundary_edges {
            let m = *edge_mid
                .get(&(be.a.min(be.b), be.a.max(be.b)))
                .expect("boundary edge was split");
            boundary.push(BoundaryEdge {
                a: be.a,
                b: m,
                tag: be.tag,
            });
            boundary.push(BoundaryEdge {
                a: m,
                b: be.b,
                tag: be.tag,
            });
        }

        let mesh = QuadMesh::new(nodes, elements, boundary)?;
        Ok(mesh.renumbered_lexicographic())
    }

    /// Renumbers nodes by ascending (x, y); keeps the factorization profile of
    /// generated meshes narrow after refinement.
    pub fn renumbered_lexicographic(&self) -> QuadMesh {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&i, &j| {
            let a = self.nodes[i];
            let b = self.nodes[j];
            (a.x, a.y)
                .partial_cmp(&(b.x, b.y))
                .expect("finite node coordinates")
        });
        let mut perm = alloc::vec![0usize; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        let nodes: Vec<Point2<f64>> = order.iter().map(|&old| self.nodes[old]).collect();
        let elements = self
            .elements
            .iter()
            .map(|idx| [perm[idx[0]], perm[idx[1]], perm[idx[2]], perm[idx[3]]])
            .collect();
        let boundary_edges = self
            .boundary_edges
            .iter()
            .map(|be| BoundaryEdge {
                a: perm[be.a],
                b: perm[be.b],
                tag: be.tag,
            })
            .collect();
        QuadMesh {
            nodes,
            elements,
            boundary_edges,
            h: self.h,
        }
    }
}

/// Uniform `nx × ny` mesh of axis-aligned rectangles on `domain`. The side
/// `x = x0` is clamped (Dirichlet); the remaining sides carry traction tags.
pub fn generate_rectangular(nx: usize, ny: usize, domain: Rect) -> Result<QuadMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("element counts must be at least 1"));
    }
    let dx = domain.width() / nx as f64;
    let dy = domain.height() / ny as f64;
    let node = |ix: usize, iy: usize| ix * (ny + 1) + iy;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for ix in 0..=nx {
        for iy in 0..=ny {
            nodes.push(Point2::new(
                domain.x0 + ix as f64 * dx,
                domain.y0 + iy as f64 * dy,
            ));
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            elements.push([
                node(ix, iy),
                node(ix + 1, iy),
                node(ix + 1, iy + 1),
                node(ix, iy + 1),
            ]);
        }
    }
    let mut boundary = Vec::new();
    for ix in 0..nx {
        boundary.push(BoundaryEdge {
            a: node(ix, 0),
            b: node(ix + 1, 0),
            tag: EdgeTag::Traction(TRACTION_BOTTOM),
        });
        boundary.push(BoundaryEdge {
            a: node(ix + 1, ny),
            b: node(ix, ny),
            tag: EdgeTag::Traction(TRACTION_TOP),
        });
    }
    for iy in 0..ny {
        boundary.push(BoundaryEdge {
            a: node(nx, iy),
            b: node(nx, iy + 1),
            tag: EdgeTag::Traction(TRACTION_RIGHT),
        });
        boundary.push(BoundaryEdge {
            a: node(0, iy + 1),
            b: node(0, iy),
            tag: EdgeTag::Dirichlet,
        });
    }
    QuadMesh::new(nodes, elements, boundary)
}

/// Distorted mesh family: `level` 0 is a 5×1 strip of convex quadrilaterals
/// whose interior side nodes are shifted by `pattern`; each further level
/// refines every quadrilateral through edge midpoints and the centroid.
pub fn generate_irregular(level: usize, domain: Rect, pattern: &DistortionPattern) -> Result<QuadMesh> {
    let w = domain.width();
    let mut bottom_x = [0.0f64; 6];
    let mut top_x = [0.0f64; 6];
    bottom_x[0] = domain.x0;
    top_x[0] = domain.x0;
    bottom_x[5] = domain.x1;
    top_x[5] = domain.x1;
    for k in 0..4 {
        let uniform = domain.x0 + (k + 1) as f64 * 0.2 * w;
        bottom_x[k + 1] = uniform + pattern.bottom[k] * w;
        top_x[k + 1] = uniform + pattern.top[k] * w;
    }
    for k in 0..5 {
        if !(bottom_x[k + 1] > bottom_x[k]) || !(top_x[k + 1] > top_x[k]) {
            return Err(Error::DegenerateElement {
                element: k,
                detail: "distortion pattern folds a side node past its neighbour".into(),
            });
        }
    }

    // Node layout: bottom row 0..=5, top row 6..=11.
    let mut nodes = Vec::with_capacity(12);
    for &x in &bottom_x {
        nodes.push(Point2::new(x, domain.y0));
    }
    for &x in &top_x {
        nodes.push(Point2::new(x, domain.y1));
    }
    let mut elements = Vec::with_capacity(5);
    for k in 0..5 {
        elements.push([k, k + 1, 6 + k + 1, 6 + k]);
    }
    let mut boundary = Vec::new();
    for k in 0..5 {
        boundary.push(BoundaryEdge {
            a: k,
            b: k + 1,
            tag: EdgeTag::Traction(TRACTION_BOTTOM),
        });
        boundary.push(BoundaryEdge {
            a: 6 + k + 1,
            b: 6 + k,
            tag: EdgeTag::Traction(TRACTION_TOP),
        });
    }
    boundary.push(BoundaryEdge {
        a: 5,
        b: 11,
        tag: EdgeTag::Traction(TRACTION_RIGHT),
    });
    boundary.push(BoundaryEdge {
        a: 6,
        b: 0,
        tag: EdgeTag::Dirichlet,
    });

    let mut mesh = QuadMesh::new(nodes, elements, boundary)?.renumbered_lexicographic();
    for _ in 0..level {
        mesh = mesh.refine()?;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::sqrt;
    use proptest::prelude::*;

    fn strip() -> Rect {
        Rect::new(0.0, 10.0, -1.0, 1.0).unwrap()
    }

    proptest! {
        /// Convex quadrilaterals built from perturbed corners: the bilinear
        /// map interpolates the vertices and keeps a positive Jacobian on the
        /// Gauss grid.
        #[test]
        fn map_interpolates_random_convex_quads(
            dx in proptest::array::uniform4(-0.24f64..0.24),
            dy in proptest::array::uniform4(-0.24f64..0.24),
        ) {
            let base = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
            let v = [
                Point2::new(base[0][0] + dx[0], base[0][1] + dy[0]),
                Point2::new(base[1][0] + dx[1], base[1][1] + dy[1]),
                Point2::new(base[2][0] + dx[2], base[2][1] + dy[2]),
                Point2::new(base[3][0] + dx[3], base[3][1] + dy[3]),
            ];
            // perturbations below 0.25 keep the unit square convex
            let map = ElementMap::from_vertices(&v);
            for (k, r) in REF_VERTICES.iter().enumerate() {
                let p = map.map(*r);
                prop_assert!(hypot(p.x - v[k].x, p.y - v[k].y) < 1e-13);
            }
            let (pts, _) = gauss_legendre_2d(3);
            for xh in pts {
                let (_, det) = map.jacobian(xh);
                prop_assert!(det > 0.0);
            }
        }
    }

    #[test]
    fn rectangular_5x1_counts() {
        let m = generate_rectangular(5, 1, strip()).unwrap();
        assert_eq!(m.n_elements(), 5);
        assert_eq!(m.n_nodes(), 12);
        // each element is a 2×2 square
        assert!((m.h - sqrt(8.0)).abs() < 1e-14);
    }

    #[test]
    fn rectangular_40x8_mesh_size() {
        let m = generate_rectangular(40, 8, strip()).unwrap();
        assert_eq!(m.n_elements(), 320);
        let expected = hypot(0.25, 0.25);
        assert!((m.h - expected).abs() < 1e-13);
    }

    #[test]
    fn unit_square_map_coefficients() {
        let m = generate_rectangular(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
        let map = m.element_map(0);
        assert_eq!(map.a, [0.5, 0.5, 0.0, 0.0]);
        assert_eq!(map.b, [0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn axis_aligned_rectangle_coefficients() {
        let v = [
            Point2::new(0.0, -1.0),
            Point2::new(2.0, -1.0),
            Point2::new(2.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let map = ElementMap::from_vertices(&v);
        assert_eq!(map.a, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(map.b, [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn general_quad_coefficients_match_sign_matrix_oracle() {
        // Independent oracle: multiply the printed ±1 sign matrix by the
        // vertex coordinates directly.
        let v = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(3.0, 2.0),
            Point2::new(-1.0, 2.0),
        ];
        let mut expect_a = [0.0; 4];
        let mut expect_b = [0.0; 4];
        for r in 0..4 {
            for c in 0..4 {
                expect_a[r] += 0.25 * COEFF_SIGNS[r][c] * v[c].x;
                expect_b[r] += 0.25 * COEFF_SIGNS[r][c] * v[c].y;
            }
        }
        assert_eq!(expect_a, [1.0, 1.5, 0.5, 0.0]);
        assert_eq!(expect_b, [1.0, 0.0, 0.0, 1.0]);
        let map = ElementMap::from_vertices(&v);
        assert_eq!(map.a, expect_a);
        assert_eq!(map.b, expect_b);
    }

    #[test]
    fn map_reproduces_vertices() {
        let m = generate_irregular(1, strip(), &DistortionPattern::default()).unwrap();
        for e in 0..m.n_elements() {
            let map = m.element_map(e);
            let v = m.element_vertices(e);
            for (k, r) in REF_VERTICES.iter().enumerate() {
                let p = map.map(*r);
                let scale = m.element_diameter(e);
                assert!(hypot(p.x - v[k].x, p.y - v[k].y) < 1e-13 * scale);
            }
        }
    }

    #[test]
    fn jacobian_constant_on_rectangles() {
        let m = generate_rectangular(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
        let map = m.element_map(0);
        let (j, det) = map.jacobian([0.3, -0.7]);
        assert!((j[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((j[(1, 1)] - 0.5).abs() < 1e-15);
        assert!(j[(0, 1)].abs() < 1e-15 && j[(1, 0)].abs() < 1e-15);
        assert!((det - 0.25).abs() < 1e-15);

        // w × h rectangle has det = w*h/4 everywhere.
        let m = generate_rectangular(1, 1, Rect::new(0.0, 3.0, 0.0, 0.5).unwrap()).unwrap();
        let (_, det) = m.element_map(0).jacobian([-0.9, 0.2]);
        assert!((det - 3.0 * 0.5 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn distorted_jacobian_positive_on_gauss_grid() {
        let m = generate_irregular(0, strip(), &DistortionPattern::default()).unwrap();
        let (pts, _) = gauss_legendre_2d(3);
        for e in 0..m.n_elements() {
            let map = m.element_map(e);
            let mut min_det = f64::INFINITY;
            let mut varies = false;
            let (_, det0) = map.jacobian(pts[0]);
            for p in &pts {
                let (_, det) = map.jacobian(*p);
                min_det = min_det.min(det);
                if (det - det0).abs() > 1e-12 * det0.abs() {
                    varies = true;
                }
            }
            assert!(min_det > 0.0, "element {e}");
            if e == 1 {
                assert!(varies, "distorted element should have varying Jacobian");
            }
        }
    }

    #[test]
    fn irregular_level_counts_and_zero_pattern() {
        let m0 = generate_irregular(0, strip(), &DistortionPattern::default()).unwrap();
        assert_eq!(m0.n_elements(), 5);
        let m1 = generate_irregular(1, strip(), &DistortionPattern::default()).unwrap();
        assert_eq!(m1.n_elements(), 20);

        // Zero offsets reproduce the rectangular 5×1 mesh geometry.
        let z = generate_irregular(0, strip(), &DistortionPattern::zero()).unwrap();
        let r = generate_rectangular(5, 1, strip()).unwrap();
        assert_eq!(z.n_nodes(), r.n_nodes());
        for (a, b) in z.nodes.iter().zip(r.nodes.iter()) {
            assert!(hypot(a.x - b.x, a.y - b.y) < 1e-12);
        }
    }

    #[test]
    fn folding_pattern_rejected_with_element_index() {
        let bad = DistortionPattern {
            bottom: [0.15, -0.2, 0.0, 0.0], // node 1 passes node 2
            top: [0.0; 4],
        };
        match generate_irregular(0, strip(), &bad) {
            Err(Error::DegenerateElement { .. }) => {}
            other => panic!("expected degenerate-element error, got {other:?}"),
        }
    }

    #[test]
    fn refinement_halves_h_and_quadruples_elements() {
        let m0 = generate_rectangular(5, 1, strip()).unwrap();
        let m1 = m0.refine().unwrap();
        assert_eq!(m1.n_elements(), 20);
        assert!((m1.h - 0.5 * m0.h).abs() < 1e-13);

        let i0 = generate_irregular(0, strip(), &DistortionPattern::default()).unwrap();
        let i1 = i0.refine().unwrap();
        assert_eq!(i1.n_elements(), 4 * i0.n_elements());
    }

    #[test]
    fn unit_square_regularity_ratio() {
        // Corner sub-triangle of the unit square: legs 1, 1, hypotenuse √2;
        // inscribed-circle diameter 2·area/semiperimeter = 2 - √2, so the
        // ratio is √2 / (2 - √2) = 1 + √2.
        let m = generate_rectangular(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0).unwrap()).unwrap();
        let rep = m.shape_regularity().unwrap();
        assert!((rep.zeta - (1.0 + sqrt(2.0))).abs() < 1e-12);
        assert!(rep.zeta >= 2.0);
    }

    #[test]
    fn regularity_invariant_under_refinement() {
        let r0 = generate_rectangular(5, 1, strip()).unwrap();
        let r1 = r0.refine().unwrap();
        let z0 = r0.shape_regularity().unwrap().zeta;
        let z1 = r1.shape_regularity().unwrap().zeta;
        assert!((z0 - z1).abs() < 1e-10 * z0);

        let i1 = generate_irregular(1, strip(), &DistortionPattern::default()).unwrap();
        let i2 = generate_irregular(2, strip(), &DistortionPattern::default()).unwrap();
        let zi1 = i1.shape_regularity().unwrap().zeta;
        let zi2 = i2.shape_regularity().unwrap().zeta;
        assert!(
            (zi1 - zi2).abs() < 1e-10 * zi1,
            "midpoint refinement must preserve ζ: {zi1} vs {zi2}"
        );
    }

    #[test]
    fn boundary_tags_cover_clamped_side() {
        let m = generate_rectangular(4, 2, strip()).unwrap();
        for be in &m.boundary_edges {
            let on_left = m.nodes[be.a].x.abs() < 1e-12 && m.nodes[be.b].x.abs() < 1e-12;
            assert_eq!(be.tag == EdgeTag::Dirichlet, on_left);
        }
        // outward normals on the right edge point in +x
        for be in &m.boundary_edges {
            if be.tag == EdgeTag::Traction(TRACTION_RIGHT) {
                let n = be.outward_normal(&m.nodes);
                assert!((n[0] - 1.0).abs() < 1e-12 && n[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(generate_rectangular(0, 1, strip()).is_err());
        assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
    }
}
