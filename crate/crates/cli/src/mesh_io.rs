//! Plain-text mesh listings: one record per line, whitespace separated.
//!
//! ```text
//! nodes <count>
//! <x> <y>            (per node)
//! elements <count>
//! <a> <b> <c> <d>    (counterclockwise node indices)
//! edges <count>
//! <a> <b> <tag>      (tag: dirichlet | right | top | bottom | left)
//! ```

use std::fmt::Write as _;

use nalgebra::Point2;
use shsfem_core::mesh::{
    BoundaryEdge, EdgeTag, QuadMesh, TRACTION_BOTTOM, TRACTION_LEFT, TRACTION_RIGHT, TRACTION_TOP,
};

fn tag_name(tag: EdgeTag) -> String {
    match tag {
        EdgeTag::Dirichlet => "dirichlet".into(),
        EdgeTag::Traction(TRACTION_RIGHT) => "right".into(),
        EdgeTag::Traction(TRACTION_TOP) => "top".into(),
        EdgeTag::Traction(TRACTION_BOTTOM) => "bottom".into(),
        EdgeTag::Traction(TRACTION_LEFT) => "left".into(),
        EdgeTag::Traction(g) => format!("t{g}"),
    }
}

fn parse_tag(s: &str) -> Result<EdgeTag, String> {
    Ok(match s {
        "dirichlet" => EdgeTag::Dirichlet,
        "right" => EdgeTag::Traction(TRACTION_RIGHT),
        "top" => EdgeTag::Traction(TRACTION_TOP),
        "bottom" => EdgeTag::Traction(TRACTION_BOTTOM),
        "left" => EdgeTag::Traction(TRACTION_LEFT),
        other => {
            let g = other
                .strip_prefix('t')
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or_else(|| format!("unknown edge tag '{other}'"))?;
            EdgeTag::Traction(g)
        }
    })
}

pub fn dump(mesh: &QuadMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", mesh.n_nodes());
    for p in &mesh.nodes {
        let _ = writeln!(out, "{:.17e} {:.17e}", p.x, p.y);
    }
    let _ = writeln!(out, "elements {}", mesh.n_elements());
    for e in &mesh.elements {
        let _ = writeln!(out, "{} {} {} {}", e[0], e[1], e[2], e[3]);
    }
    let _ = writeln!(out, "edges {}", mesh.boundary_edges.len());
    for be in &mesh.boundary_edges {
        let _ = writeln!(out, "{} {} {}", be.a, be.b, tag_name(be.tag));
    }
    out
}

fn expect_section<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    name: &str,
) -> Result<usize, String> {
    let line = lines
        .next()
        .ok_or_else(|| format!("missing '{name}' section"))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(name) {
        return Err(format!("expected '{name} <count>', got '{line}'"));
    }
    parts
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| format!("bad count in '{line}'"))
}

pub fn load(text: &str) -> Result<QuadMesh, String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let n_nodes = expect_section(&mut lines, "nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let line = lines.next().ok_or("truncated node list")?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format!("bad coordinate '{t}'")))
            .collect::<Result<_, _>>()?;
        if vals.len() != 2 {
            return Err(format!("node record needs two coordinates: '{line}'"));
        }
        nodes.push(Point2::new(vals[0], vals[1]));
    }

    let n_elems = expect_section(&mut lines, "elements")?;
    let mut elements = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let line = lines.next().ok_or("truncated element list")?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format!("bad node index '{t}'")))
            .collect::<Result<_, _>>()?;
        if vals.len() != 4 {
            return Err(format!("element record needs four node indices: '{line}'"));
        }
        elements.push([vals[0], vals[1], vals[2], vals[3]]);
    }

    let n_edges = expect_section(&mut lines, "edges")?;
    let mut boundary = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let line = lines.next().ok_or("truncated edge list")?;
        let mut parts = line.split_whitespace();
        let a: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format!("bad edge record '{line}'"))?;
        let b: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format!("bad edge record '{line}'"))?;
        let tag = parse_tag(parts.next().ok_or_else(|| format!("edge tag missing: '{line}'"))?)?;
        boundary.push(BoundaryEdge { a, b, tag });
    }

    QuadMesh::new(nodes, elements, boundary).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use shsfem_core::mesh::{generate_irregular, DistortionPattern, Rect};

    #[test]
    fn round_trip() {
        let mesh = generate_irregular(
            1,
            Rect::new(0.0, 10.0, -1.0, 1.0).unwrap(),
            &DistortionPattern::default(),
        )
        .unwrap();
        let text = dump(&mesh);
        let back = load(&text).unwrap();
        assert_eq!(back.n_nodes(), mesh.n_nodes());
        assert_eq!(back.elements, mesh.elements);
        assert_eq!(back.boundary_edges.len(), mesh.boundary_edges.len());
        assert!((back.h - mesh.h).abs() < 1e-15);
        // bitwise-identical coordinates through the 17-digit format
        for (a, b) in back.nodes.iter().zip(&mesh.nodes) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(load("nodes 1\n0 0\nelements 0\nedges 0").is_err()); // no elements
        assert!(load("garbage").is_err());
    }
}
