//! Boundary traces, boundary measurements and sub-boundary masks.
//!
//! Positions on ∂Ω are arc lengths along the boundary polygon, measured
//! counterclockwise from the boundary node with the smallest polar angle.
//! Transfers between meshes go through the normalized position `s / L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::space::FeSpace;
use crate::fem::Field;
use crate::mesh::Mesh;

/// Union of arcs of ∂Ω, each `[start, end)` in normalized arc length. An arc
/// with `start > end` wraps through zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMask {
    pub arcs: Vec<(f64, f64)>,
}

impl BoundaryMask {
    pub fn new(arcs: Vec<(f64, f64)>) -> Result<BoundaryMask> {
        if arcs.is_empty() {
            return Err(Error::Measurement("boundary mask is empty".into()));
        }
        for &(a, b) in &arcs {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a == b {
                return Err(Error::Measurement(format!("invalid mask arc ({a}, {b})")));
            }
        }
        Ok(BoundaryMask { arcs })
    }

    /// The first half of the boundary.
    pub fn half() -> BoundaryMask {
        BoundaryMask { arcs: vec![(0.0, 0.5)] }
    }

    pub fn contains(&self, frac: f64) -> bool {
        let f = frac.rem_euclid(1.0);
        self.arcs.iter().any(|&(a, b)| if a < b { f >= a && f < b } else { f >= a || f < b })
    }
}

/// Samples `(s, value)` of a boundary function, `s` strictly increasing in
/// `[0, perimeter)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// Length of the boundary the positions refer to.
    pub perimeter: f64,
    /// Sub-boundary Σ on which the misfit is measured; `None` is all of ∂Ω.
    pub mask: Option<BoundaryMask>,
}

impl Measurement {
    pub fn new(s: Vec<f64>, values: Vec<f64>, perimeter: f64, mask: Option<BoundaryMask>) -> Result<Measurement> {
        if s.len() != values.len() {
            return Err(Error::Measurement("positions and values differ in length".into()));
        }
        if s.len() < 2 {
            return Err(Error::Measurement("a measurement needs at least two samples".into()));
        }
        if !(perimeter > 0.0) {
            return Err(Error::Measurement("perimeter must be positive".into()));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Measurement("arc-length positions must be strictly increasing".into()));
        }
        if s[0] < 0.0 || *s.last().unwrap() >= perimeter {
            return Err(Error::Measurement("arc-length positions must lie in [0, perimeter)".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Measurement("measurement contains non-finite values".into()));
        }
        Ok(Measurement { s, values, perimeter, mask })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic piecewise-linear interpolation at normalized position `frac`.
    pub fn interpolate(&self, frac: f64) -> f64 {
        let n = self.s.len();
        let x = frac.rem_euclid(1.0) * self.perimeter;
        let idx = self.s.partition_point(|&v| v <= x);
        let (i0, i1, s0, s1) = if idx == 0 {
            (n - 1, 0, self.s[n - 1] - self.perimeter, self.s[0])
        } else if idx == n {
            (n - 1, 0, self.s[n - 1], self.s[0] + self.perimeter)
        } else {
            (idx - 1, idx, self.s[idx - 1], self.s[idx])
        };
        let w = (x - s0) / (s1 - s0);
        (1.0 - w) * self.values[i0] + w * self.values[i1]
    }
}

/// Normalized arc-length positions of the boundary DOFs of `space`, in the
/// order they are met along the boundary, together with the DOF indices and
/// the boundary perimeter.
pub fn boundary_dof_positions(mesh: &Mesh, space: &FeSpace) -> (Vec<usize>, Vec<f64>, f64) {
    let lp = mesh.boundary_loop();
    let nodes = mesh.nodes();
    let m = lp.len();
    let perimeter: f64 = (0..m).map(|k| nodes[lp[k]].dist(nodes[lp[(k + 1) % m]])).sum();
    // Edge index keyed by its first (counterclockwise) node.
    let mut edge_from = vec![usize::MAX; mesh.num_nodes()];
    for (e, be) in mesh.boundary_edges().iter().enumerate() {
        edge_from[be[0]] = e;
    }
    let mut dofs = Vec::new();
    let mut fracs = Vec::new();
    let mut s = 0.0;
    for k in 0..m {
        let a = lp[k];
        let e = edge_from[a];
        let len = nodes[a].dist(nodes[lp[(k + 1) % m]]);
        let d = space.boundary_edge(e);
        dofs.push(d[0]);
        fracs.push(s / perimeter);
        if d.len() == 3 {
            dofs.push(d[1]);
            fracs.push((s + 0.5 * len) / perimeter);
        }
        s += len;
    }
    (dofs, fracs, perimeter)
}

/// Boundary trace of `field`, restricted to `mask` when given.
pub fn boundary_trace(mesh: &Mesh, space: &FeSpace, field: &Field, mask: Option<&BoundaryMask>) -> Result<Measurement> {
    if let Some(m) = mask {
        if m.arcs.is_empty() {
            return Err(Error::Measurement("boundary mask is empty".into()));
        }
    }
    if mesh.boundary_edges().is_empty() {
        return Err(Error::Measurement("mesh has no boundary edges".into()));
    }
    let (dofs, fracs, perimeter) = boundary_dof_positions(mesh, space);
    let mut s = Vec::new();
    let mut values = Vec::new();
    for (d, f) in dofs.into_iter().zip(fracs) {
        if mask.is_none_or(|m| m.contains(f)) {
            s.push(f * perimeter);
            values.push(field.values[d]);
        }
    }
    if s.len() < 2 {
        return Err(Error::Measurement("mask selects fewer than two boundary samples".into()));
    }
    Measurement::new(s, values, perimeter, mask.cloned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_wraps() {
        let m = BoundaryMask::new(vec![(0.9, 0.1)]).unwrap();
        assert!(m.contains(0.95) && m.contains(0.05) && !m.contains(0.5));
        assert!(BoundaryMask::new(vec![]).is_err());
    }

    #[test]
    fn periodic_interpolation() {
        let m = Measurement::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0], 4.0, None).unwrap();
        assert!((m.interpolate(0.375) - 1.5).abs() < 1e-15);
        // Between the last sample and the wrap back to the first.
        assert!((m.interpolate(0.875) - 1.5).abs() < 1e-15);
        assert!((m.interpolate(1.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsorted_positions() {
        assert!(Measurement::new(vec![0.0, 2.0, 1.0], vec![0.0; 3], 4.0, None).is_err());
    }
}
