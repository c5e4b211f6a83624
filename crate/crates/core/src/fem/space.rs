//! Lagrange P1 and P2 spaces on a mesh: degree-of-freedom numbering and
//! basis evaluation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orient2d, Vec2};
use crate::mesh::Mesh;

/// Polynomial order of a finite-element space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    P1,
    P2,
}

impl Order {
    pub fn from_degree(d: u32) -> Result<Order> {
        match d {
            1 => Ok(Order::P1),
            2 => Ok(Order::P2),
            _ => Err(Error::Invalid(format!("element order must be 1 or 2, got {d}"))),
        }
    }

    pub fn degree(self) -> u32 {
        match self {
            Order::P1 => 1,
            Order::P2 => 2,
        }
    }

    /// Local basis functions per triangle.
    pub fn local_dofs(self) -> usize {
        match self {
            Order::P1 => 3,
            Order::P2 => 6,
        }
    }
}

/// Degree-of-freedom layout. Vertex DOFs come first and share the node
/// numbering of the mesh; P2 edge DOFs follow.
///
/// Local P2 order on a triangle `[v0, v1, v2]` is `[v0, v1, v2, e01, e12, e20]`.
/// Boundary edges carry `[a, b]` (P1) or `[a, mid, b]` (P2).
#[derive(Debug, Clone, PartialEq)]
pub struct FeSpace {
    order: Order,
    ndof: usize,
    cell_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
    coords: Vec<Vec2>,
}

impl FeSpace {
    pub fn new(mesh: &Mesh, order: Order) -> FeSpace {
        let nv = mesh.num_nodes();
        let mut coords = mesh.nodes().to_vec();
        match order {
            Order::P1 => {
                let cell_dofs = mesh.triangles().iter().flat_map(|t| t.iter().copied()).collect();
                let boundary_dofs = mesh.boundary_edges().iter().flat_map(|e| e.iter().copied()).collect();
                FeSpace { order, ndof: nv, cell_dofs, boundary_dofs, coords }
            }
            Order::P2 => {
                let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
                let mut cell_dofs = Vec::with_capacity(6 * mesh.num_triangles());
                let mut next = nv;
                for t in mesh.triangles() {
                    cell_dofs.extend_from_slice(t);
                    for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                        let key = (a.min(b), a.max(b));
                        let id = *edge_id.entry(key).or_insert_with(|| {
                            coords.push((mesh.nodes()[a] + mesh.nodes()[b]) * 0.5);
                            next += 1;
                            next - 1
                        });
                        cell_dofs.push(id);
                    }
                }
                let boundary_dofs = mesh
                    .boundary_edges()
                    .iter()
                    .flat_map(|e| [e[0], edge_id[&(e[0].min(e[1]), e[0].max(e[1]))], e[1]])
                    .collect();
                FeSpace { order, ndof: next, cell_dofs, boundary_dofs, coords }
            }
        }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        let m = self.order.local_dofs();
        &self.cell_dofs[m * k..m * (k + 1)]
    }

    /// DOFs along boundary edge `e`, ordered from its first to its second node.
    pub fn boundary_edge(&self, e: usize) -> &[usize] {
        let m = self.order.degree() as usize + 1;
        &self.boundary_dofs[m * e..m * (e + 1)]
    }

    pub fn dof_coords(&self) -> &[Vec2] {
        &self.coords
    }
}

/// Gradients of the barycentric coordinates of triangle `[a, b, c]` and its
/// signed area.
pub fn barycentric_gradients(v: [Vec2; 3]) -> ([Vec2; 3], f64) {
    let [a, b, c] = v;
    let twice = orient2d(a, b, c);
    let g = [(b - c).perp() * (-1.0 / twice), (c - a).perp() * (-1.0 / twice), (a - b).perp() * (-1.0 / twice)];
    (g, 0.5 * twice)
}

/// Barycentric coordinates of `p` with respect to triangle `v`.
pub fn barycentric(v: [Vec2; 3], p: Vec2) -> [f64; 3] {
    let area = orient2d(v[0], v[1], v[2]);
    [orient2d(p, v[1], v[2]) / area, orient2d(v[0], p, v[2]) / area, orient2d(v[0], v[1], p) / area]
}

/// Basis values at barycentric point `l` (length 3 or 6 in `out`).
pub fn basis_values(order: Order, l: [f64; 3], out: &mut [f64]) {
    match order {
        Order::P1 => out[..3].copy_from_slice(&l),
        Order::P2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            out[3] = 4.0 * l[0] * l[1];
            out[4] = 4.0 * l[1] * l[2];
            out[5] = 4.0 * l[2] * l[0];
        }
    }
}

/// Basis gradients at barycentric point `l`, given barycentric gradients `g`.
pub fn basis_gradients(order: Order, l: [f64; 3], g: [Vec2; 3], out: &mut [Vec2]) {
    match order {
        Order::P1 => out[..3].copy_from_slice(&g),
        Order::P2 => {
            for i in 0..3 {
                out[i] = g[i] * (4.0 * l[i] - 1.0);
            }
            for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                out[3 + k] = (g[j] * l[i] + g[i] * l[j]) * 4.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ParametricCurve;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn p2_counts() {
        let m = build_disk_mesh(3.0, 0.5, &ParametricCurve::circle(1.5)).unwrap();
        let s = FeSpace::new(&m, Order::P2);
        let edges = m.num_nodes() + m.num_triangles() - 1; // Euler for a disk
        assert_eq!(s.ndof(), m.num_nodes() + edges);
        for e in 0..m.boundary_edges().len() {
            let d = s.boundary_edge(e);
            let mid = (s.dof_coords()[d[0]] + s.dof_coords()[d[2]]) * 0.5;
            assert!(s.dof_coords()[d[1]].dist(mid) < 1e-15);
        }
    }

    #[test]
    fn p2_lagrange_property() {
        let v = [Vec2::new(0.3, 0.1), Vec2::new(1.2, 0.4), Vec2::new(0.5, 1.1)];
        let pts: [[f64; 3]; 6] =
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        let mut vals = [0.0; 6];
        for (i, l) in pts.iter().enumerate() {
            basis_values(Order::P2, *l, &mut vals);
            for (j, v) in vals.iter().enumerate() {
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let (g, area) = barycentric_gradients(v);
        assert!(area > 0.0);
        let sum = g[0] + g[1] + g[2];
        assert!(sum.norm() < 1e-14);
        let l = barycentric(v, Vec2::new(0.6, 0.5));
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn p2_gradient_matches_finite_difference() {
        let v = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.2), Vec2::new(0.3, 0.9)];
        let (g, _) = barycentric_gradients(v);
        let p = Vec2::new(0.4, 0.3);
        let l = barycentric(v, p);
        let mut grads = [Vec2::ZERO; 6];
        basis_gradients(Order::P2, l, g, &mut grads);
        let eps = 1e-6;
        let val = |q: Vec2| {
            let mut out = [0.0; 6];
            basis_values(Order::P2, barycentric(v, q), &mut out);
            out
        };
        let (px, mx) = (val(p + Vec2::new(eps, 0.0)), val(p - Vec2::new(eps, 0.0)));
        let (py, my) = (val(p + Vec2::new(0.0, eps)), val(p - Vec2::new(0.0, eps)));
        for i in 0..6 {
            assert!(((px[i] - mx[i]) / (2.0 * eps) - grads[i].x).abs() < 1e-8);
            assert!(((py[i] - my[i]) / (2.0 * eps) - grads[i].y).abs() < 1e-8);
        }
    }
}
