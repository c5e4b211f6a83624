//! State, adjoint and sensitivity solves, and the regularized cost
//!
//! ```text
//! J_ρ = ½‖u − h‖²_{L²(Σ)} + (ρ/2)‖μ‖²_{L²(Ω)} + (ρ₁/2) P(∂ω).
//! ```
//!
//! The misfit and the adjoint right-hand side use the same boundary mass
//! matrix, so the adjoint gradient is the exact derivative of the discrete
//! cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::measurement::boundary_dof_positions;
use crate::fem::{
    assemble_load_on, assemble_on, boundary_mass_matrix, region_mass_matrix, solve, Coefficients, FeSpace,
    Field, Order, SourceSpec,
};
use crate::geometry::Polyline;
use crate::mesh::{Mesh, Region};
use crate::sparse::{dot, CsrMatrix};

pub use crate::fem::{BoundaryMask, Measurement};

/// Perturbation of μ that is constant on each region (`ν = inside·χ_ω + outside·χ_{Ω∖ω}`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub inside: f64,
    pub outside: f64,
}

impl Direction {
    pub const ZERO: Direction = Direction { inside: 0.0, outside: 0.0 };

    /// Perturbation of μ_in only.
    pub fn inside(scale: f64) -> Direction {
        Direction { inside: scale, outside: 0.0 }
    }

    pub fn apply(&self, c: &Coefficients, delta: f64) -> Coefficients {
        Coefficients { mu_in: c.mu_in + delta * self.inside, mu_out: c.mu_out + delta * self.outside, ..*c }
    }
}

/// Terms of the regularized cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// `½‖u − h‖²` on the measured boundary.
    pub misfit: f64,
    /// `(ρ/2)‖μ‖²_{L²(Ω)}`.
    pub tikhonov: f64,
    /// `(ρ₁/2) P(∂ω)`.
    pub perimeter_term: f64,
    /// Interface length `P(∂ω)`.
    pub perimeter: f64,
    pub total: f64,
}

/// `(ν w, φ_i)_Ω` for every basis function `φ_i`.
fn weighted_mass_apply(mesh: &Mesh, space: &FeSpace, nu: Direction, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; space.ndof()];
    for (region, scale) in [(Region::Inside, nu.inside), (Region::Outside, nu.outside)] {
        if scale != 0.0 {
            let m = region_mass_matrix(mesh, space, region);
            for (o, v) in out.iter_mut().zip(m.mul_vec(w)) {
                *o += scale * v;
            }
        }
    }
    out
}

/// P1 state `u` with `a(u, v) = l(v)`.
pub fn solve_state(mesh: &Mesh, c: &Coefficients, s: &SourceSpec) -> Result<Field> {
    solve_state_with_order(mesh, c, s, Order::P1)
}

pub fn solve_state_with_order(mesh: &Mesh, c: &Coefficients, s: &SourceSpec, order: Order) -> Result<Field> {
    let space = FeSpace::new(mesh, order);
    let sys = assemble_on(mesh, &space, c);
    let b = assemble_load_on(mesh, &space, s)?;
    solve(&sys, &b)
}

/// The measurement transferred to the boundary DOFs of `space` by normalized
/// arc length; zero at interior DOFs.
pub fn measurement_on_mesh(mesh: &Mesh, space: &FeSpace, h: &Measurement) -> Vec<f64> {
    let (dofs, fracs, _) = boundary_dof_positions(mesh, space);
    let mut out = vec![0.0; space.ndof()];
    for (d, f) in dofs.into_iter().zip(fracs) {
        out[d] = h.interpolate(f);
    }
    out
}

/// Boundary residual `u − h` at the boundary DOFs (zero elsewhere) and the
/// boundary mass matrix of the measured sub-boundary.
fn boundary_residual(mesh: &Mesh, space: &FeSpace, u: &Field, h: &Measurement) -> Result<(Vec<f64>, CsrMatrix)> {
    if u.len() != space.ndof() {
        return Err(Error::Measurement(format!(
            "field has {} values but the mesh has {} degrees of freedom",
            u.len(),
            space.ndof()
        )));
    }
    let hm = measurement_on_mesh(mesh, space, h);
    let (dofs, _, _) = boundary_dof_positions(mesh, space);
    let mut r = vec![0.0; space.ndof()];
    for d in dofs {
        r[d] = u.values[d] - hm[d];
    }
    Ok((r, boundary_mass_matrix(mesh, space, h.mask.as_ref())))
}

/// Adjoint `p` with `a(p, v) = ∫_Σ (u − h) v`.
pub fn solve_adjoint(mesh: &Mesh, c: &Coefficients, u: &Field, h: &Measurement) -> Result<Field> {
    let space = FeSpace::new(mesh, u.order);
    let (r, mb) = boundary_residual(mesh, &space, u, h)?;
    let sys = assemble_on(mesh, &space, c);
    solve(&sys, &mb.mul_vec(&r))
}

/// Sensitivity `u̇ = DF(μ)ν` with `a(u̇, v) = −(ν u, v)`.
pub fn solve_sensitivity(mesh: &Mesh, c: &Coefficients, u: &Field, nu: Direction) -> Result<Field> {
    let space = FeSpace::new(mesh, u.order);
    let rhs: Vec<f64> = weighted_mass_apply(mesh, &space, nu, &u.values).iter().map(|v| -v).collect();
    solve(&assemble_on(mesh, &space, c), &rhs)
}

/// Second sensitivity `ü = D²F(μ)[ν₁, ν₂]` with
/// `a(ü, v) = −(ν₂ u̇₁, v) − (ν₁ u̇₂, v)`.
pub fn solve_second_sensitivity(
    mesh: &Mesh,
    c: &Coefficients,
    (udot1, nu1): (&Field, Direction),
    (udot2, nu2): (&Field, Direction),
) -> Result<Field> {
    let space = FeSpace::new(mesh, udot1.order);
    let a = weighted_mass_apply(mesh, &space, nu2, &udot1.values);
    let b = weighted_mass_apply(mesh, &space, nu1, &udot2.values);
    let rhs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| -(x + y)).collect();
    solve(&assemble_on(mesh, &space, c), &rhs)
}

/// `½‖u − h‖²_{L²(Σ)}` with the exact boundary mass matrix.
pub fn misfit(mesh: &Mesh, u: &Field, h: &Measurement) -> Result<f64> {
    let space = FeSpace::new(mesh, u.order);
    let (r, mb) = boundary_residual(mesh, &space, u, h)?;
    Ok(0.5 * dot(&r, &mb.mul_vec(&r)))
}

/// All cost terms for state `u` on `mesh`.
pub fn evaluate_cost(
    mesh: &Mesh,
    u: &Field,
    h: &Measurement,
    c: &Coefficients,
    rho: f64,
    rho1: f64,
    interface: &Polyline,
) -> Result<CostReport> {
    let misfit = misfit(mesh, u, h)?;
    let tikhonov = 0.5 * rho * c.mu_l2_sq(mesh);
    let perimeter = interface.perimeter();
    let perimeter_term = 0.5 * rho1 * perimeter;
    Ok(CostReport { misfit, tikhonov, perimeter_term, perimeter, total: misfit + tikhonov + perimeter_term })
}

/// `∫_Σ (u − h) w` for a field `w` on the same space.
pub fn boundary_pairing(mesh: &Mesh, u: &Field, h: &Measurement, w: &Field) -> Result<f64> {
    let space = FeSpace::new(mesh, u.order);
    let (r, mb) = boundary_residual(mesh, &space, u, h)?;
    Ok(dot(&r, &mb.mul_vec(&w.values)))
}

/// `∫_Ω ν a b` for two fields on the same space.
pub fn weighted_product(mesh: &Mesh, a: &Field, b: &Field, nu: Direction) -> f64 {
    let space = FeSpace::new(mesh, a.order);
    dot(&a.values, &weighted_mass_apply(mesh, &space, nu, &b.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::boundary_trace;
    use crate::geometry::ParametricCurve;
    use crate::mesh::build_disk_mesh;
    use std::f64::consts::PI;

    fn setup(h: f64) -> (Mesh, Coefficients, SourceSpec) {
        let m = build_disk_mesh(3.0, h, &ParametricCurve::circle(1.5)).unwrap();
        (m, Coefficients::new(1.0, 1.0, 1.2, 0.3), SourceSpec::Constant { value: 1.0 })
    }

    fn constant_measurement(mesh: &Mesh, v: f64) -> Measurement {
        let space = FeSpace::new(mesh, Order::P1);
        let f = Field::new(Order::P1, vec![v; space.ndof()]);
        boundary_trace(mesh, &space, &f, None).unwrap()
    }

    #[test]
    fn zero_source_zero_state() {
        let (m, c, _) = setup(0.3);
        let u = solve_state(&m, &c, &SourceSpec::Constant { value: 0.0 }).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_data_zero_adjoint() {
        let (m, c, s) = setup(0.3);
        let u = solve_state(&m, &c, &s).unwrap();
        let h = boundary_trace(&m, &FeSpace::new(&m, Order::P1), &u, None).unwrap();
        let p = solve_adjoint(&m, &c, &u, &h).unwrap();
        assert!(p.values.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn constant_residual_adjoint_identity() {
        // a(p, 1) = ∫μp + (1/ζ)∫_∂Ω p must equal c·|∂Ω| when u − h ≡ c.
        let (m, c, _) = setup(0.3);
        let u = Field::new(Order::P1, vec![1.0; m.num_nodes()]);
        let h = constant_measurement(&m, 0.75);
        let p = solve_adjoint(&m, &c, &u, &h).unwrap();
        let space = FeSpace::new(&m, Order::P1);
        let ones = vec![1.0; m.num_nodes()];
        let lhs = dot(&ones, &assemble_on(&m, &space, &c).matrix.mul_vec(&p.values));
        let perim: f64 = m.boundary_edges().iter().map(|e| m.nodes()[e[0]].dist(m.nodes()[e[1]])).sum();
        assert!((lhs - 0.25 * perim).abs() < 1e-10 * perim);
    }

    #[test]
    fn closed_form_misfit() {
        let (m, c, _) = setup(0.1);
        let u = Field::new(Order::P1, vec![1.0; m.num_nodes()]);
        let h = constant_measurement(&m, 0.0);
        let iface = m.interface_polyline().unwrap();
        let r = evaluate_cost(&m, &u, &h, &c, 0.0, 0.0, &iface).unwrap();
        assert!((r.misfit - 3.0 * PI).abs() / (3.0 * PI) < 1e-3);
        assert_eq!(r.total, r.misfit + r.tikhonov + r.perimeter_term);
    }

    #[test]
    fn adjoint_consistency_identity() {
        let (m, c, s) = setup(0.2);
        let u = solve_state(&m, &c, &s).unwrap();
        let h = constant_measurement(&m, 0.1);
        let p = solve_adjoint(&m, &c, &u, &h).unwrap();
        for nu in [Direction::inside(1.0), Direction { inside: 0.3, outside: -0.7 }] {
            let udot = solve_sensitivity(&m, &c, &u, nu).unwrap();
            let lhs = boundary_pairing(&m, &u, &h, &udot).unwrap();
            let rhs = -weighted_product(&m, &u, &p, nu);
            assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs());
        }
    }

    #[test]
    fn sensitivity_is_nonpositive_on_boundary() {
        let (m, c, s) = setup(0.2);
        let u = solve_state(&m, &c, &s).unwrap();
        let udot = solve_sensitivity(&m, &c, &u, Direction::inside(1.0)).unwrap();
        for e in m.boundary_edges() {
            assert!(udot.values[e[0]] <= 0.0);
        }
        let zero = solve_sensitivity(&m, &c, &u, Direction::ZERO).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn second_sensitivity_symmetry() {
        let (m, c, s) = setup(0.2);
        let u = solve_state(&m, &c, &s).unwrap();
        let n1 = Direction::inside(1.0);
        let n2 = Direction { inside: 0.2, outside: 0.5 };
        let d1 = solve_sensitivity(&m, &c, &u, n1).unwrap();
        let d2 = solve_sensitivity(&m, &c, &u, n2).unwrap();
        let a = solve_second_sensitivity(&m, &c, (&d1, n1), (&d2, n2)).unwrap();
        let b = solve_second_sensitivity(&m, &c, (&d2, n2), (&d1, n1)).unwrap();
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() <= 1e-10 * scale));
        // ν₁ = 0 implies u̇₁ = 0.
        let zero = Field::zeros(&FeSpace::new(&m, Order::P1));
        let z = solve_second_sensitivity(&m, &c, (&zero, Direction::ZERO), (&d2, n2)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn more_absorption_less_light() {
        let (m, c, s) = setup(0.2);
        let space = FeSpace::new(&m, Order::P1);
        let mb = boundary_mass_matrix(&m, &space, None);
        let ones = vec![1.0; m.num_nodes()];
        let mut last = f64::INFINITY;
        for mu in [1.0, 1.2, 1.5, 2.0] {
            let u = solve_state(&m, &c.with_mu_in(mu), &s).unwrap();
            let flux = dot(&ones, &mb.mul_vec(&u.values));
            assert!(flux < last);
            last = flux;
        }
    }
}
