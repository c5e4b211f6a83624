//! Finite-element assembly for `a(u,v) = ∫(α∇u·∇v + μuv) + (1/ζ)∫_∂Ω uv` and
//! `l(v) = ∫ f v`, with P1 elements for inversion and P2 for synthetic data.
//!
//! Coefficients are read per triangle from its region tag and are never
//! interpolated across the interface.

pub mod measurement;
pub mod quadrature;
pub mod space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::mesh::{Mesh, Region};
use crate::sparse::{pcg, CsrMatrix, DEFAULT_RTOL};

pub use measurement::{boundary_trace, BoundaryMask, Measurement};
pub use space::{FeSpace, Order};

use space::{barycentric, barycentric_gradients, basis_gradients, basis_values};

/// Piecewise-constant coefficients and the admissible box for μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub alpha_out: f64,
    pub alpha_in: f64,
    pub mu_out: f64,
    pub mu_in: f64,
    pub zeta: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Coefficients {
    /// Continuous diffusion `alpha`, absorption `(mu_out, mu_in)`.
    pub fn new(alpha: f64, mu_out: f64, mu_in: f64, zeta: f64) -> Coefficients {
        Coefficients { alpha_out: alpha, alpha_in: alpha, mu_out, mu_in, zeta, mu_min: 1e-3, mu_max: 1e3 }
    }

    pub fn with_mu_in(self, mu_in: f64) -> Coefficients {
        Coefficients { mu_in, ..self }
    }

    pub fn with_bounds(self, mu_min: f64, mu_max: f64) -> Coefficients {
        Coefficients { mu_min, mu_max, ..self }
    }

    pub fn alpha(&self, r: Region) -> f64 {
        match r {
            Region::Inside => self.alpha_in,
            Region::Outside => self.alpha_out,
        }
    }

    pub fn mu(&self, r: Region) -> f64 {
        match r {
            Region::Inside => self.mu_in,
            Region::Outside => self.mu_out,
        }
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_in.min(self.alpha_out)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_out, self.alpha_in, self.mu_out, self.mu_in, self.zeta, self.mu_min, self.mu_max];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Invalid(format!("coefficients must be positive and finite: {self:?}")));
        }
        if self.mu_min > self.mu_max {
            return Err(Error::Invalid("mu_min exceeds mu_max".into()));
        }
        for (name, v) in [("mu_in", self.mu_in), ("mu_out", self.mu_out)] {
            if v < self.mu_min || v > self.mu_max {
                return Err(Error::Invalid(format!(
                    "{name} = {v} lies outside the admissible box [{}, {}]",
                    self.mu_min, self.mu_max
                )));
            }
        }
        Ok(())
    }

    /// `‖μ‖²_{L²(Ω)}` for the region areas of `mesh`.
    pub fn mu_l2_sq(&self, mesh: &Mesh) -> f64 {
        self.mu_out * self.mu_out * mesh.region_area(Region::Outside)
            + self.mu_in * self.mu_in * mesh.region_area(Region::Inside)
    }
}

/// Right-hand side `f` of the state equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Constant { value: f64 },
    /// `strength · δ(x − location)`.
    Point { location: Vec2, strength: f64 },
    /// `amplitude · Σᵢ exp(1 − |x − xᵢ|²/ε²)` with `xᵢ = radius·(cos θᵢ, sin θᵢ)`.
    GaussianSum { count: usize, epsilon: f64, radius: f64, angles: Vec<f64>, amplitude: f64 },
}

impl SourceSpec {
    /// Unit-amplitude sources at angles `start + i·step`, `i = 0..count`.
    pub fn gaussian_ring(count: usize, epsilon: f64, radius: f64, start: f64, step: f64) -> SourceSpec {
        let angles = (0..count).map(|i| start + step * i as f64).collect();
        SourceSpec::GaussianSum { count, epsilon, radius, angles, amplitude: 1.0 }
    }

    pub fn validate(&self, domain_radius: f64) -> Result<()> {
        match self {
            SourceSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Invalid("constant source must be finite".into()));
                }
            }
            SourceSpec::Point { location, strength } => {
                if !strength.is_finite() || !location.is_finite() || location.norm() >= domain_radius {
                    return Err(Error::Invalid("point source must be finite and inside the domain".into()));
                }
            }
            SourceSpec::GaussianSum { count, epsilon, radius, angles, amplitude } => {
                if !(*epsilon > 0.0) {
                    return Err(Error::Invalid("gaussian width must be positive".into()));
                }
                if !(*radius > 0.0 && *radius < domain_radius) {
                    return Err(Error::Invalid(format!("source ring radius must lie in (0, {domain_radius})")));
                }
                if angles.len() != *count || *count == 0 {
                    return Err(Error::Invalid(format!("{count} sources declared but {} angles given", angles.len())));
                }
                if !amplitude.is_finite() || angles.iter().any(|a| !a.is_finite()) {
                    return Err(Error::Invalid("gaussian source parameters must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Pointwise value; a point source has no pointwise value and returns 0.
    pub fn value_at(&self, x: Vec2) -> f64 {
        match self {
            SourceSpec::Constant { value } => *value,
            SourceSpec::Point { .. } => 0.0,
            SourceSpec::GaussianSum { epsilon, radius, angles, amplitude, .. } => {
                let e2 = epsilon * epsilon;
                amplitude
                    * angles
                        .iter()
                        .map(|&t| (1.0 - (x - Vec2::from_polar(*radius, t)).norm_sq() / e2).exp())
                        .sum::<f64>()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceSpec::Constant { value } => *value == 0.0,
            SourceSpec::Point { strength, .. } => *strength == 0.0,
            SourceSpec::GaussianSum { amplitude, .. } => *amplitude == 0.0,
        }
    }
}

/// Nodal values of a finite-element function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub order: Order,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(order: Order, values: Vec<f64>) -> Field {
        Field { order, values }
    }

    pub fn zeros(space: &FeSpace) -> Field {
        Field { order: space.order(), values: vec![0.0; space.ndof()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `p`; errors if `p` is outside the mesh.
    pub fn evaluate(&self, mesh: &Mesh, space: &FeSpace, p: Vec2) -> Result<f64> {
        let k = mesh.locate(p).ok_or(Error::Location { x: p.x, y: p.y })?;
        let l = barycentric(mesh.triangle_vertices(k), p);
        let mut phi = [0.0; 6];
        basis_values(self.order, l, &mut phi);
        Ok(space.cell(k).iter().zip(&phi).map(|(&d, w)| self.values[d] * w).sum())
    }
}

/// Assembled operator of `a(·,·)` with a snapshot of what produced it.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub order: Order,
    pub coefficients: Coefficients,
}

fn quad_rule(order: Order) -> &'static [quadrature::QuadPoint] {
    use std::sync::OnceLock;
    static D2: OnceLock<Vec<quadrature::QuadPoint>> = OnceLock::new();
    static D4: OnceLock<Vec<quadrature::QuadPoint>> = OnceLock::new();
    match order {
        Order::P1 => D2.get_or_init(|| quadrature::degree2().to_vec()),
        Order::P2 => D4.get_or_init(|| quadrature::degree4().to_vec()),
    }
}

/// Triplets of `∫ (a ∇φ_i·∇φ_j + m φ_i φ_j)` with per-triangle weights.
fn volume_triplets(
    mesh: &Mesh,
    space: &FeSpace,
    weight: impl Fn(Region) -> (f64, f64),
) -> Vec<(usize, usize, f64)> {
    let order = space.order();
    let nl = order.local_dofs();
    let rule = quad_rule(order);
    let mut trip = Vec::with_capacity(mesh.num_triangles() * nl * nl);
    let mut phi = [0.0; 6];
    let mut grad = [Vec2::ZERO; 6];
    let mut local = [[0.0; 6]; 6];
    for k in 0..mesh.num_triangles() {
        let (ak, mk) = weight(mesh.regions()[k]);
        let (g, area) = barycentric_gradients(mesh.triangle_vertices(k));
        for row in local.iter_mut() {
            row.fill(0.0);
        }
        for &(l, w) in rule {
            basis_values(order, l, &mut phi);
            basis_gradients(order, l, g, &mut grad);
            let w = w * area;
            for i in 0..nl {
                for j in 0..nl {
                    local[i][j] += w * (ak * grad[i].dot(grad[j]) + mk * phi[i] * phi[j]);
                }
            }
        }
        let dofs = space.cell(k);
        for i in 0..nl {
            for j in 0..nl {
                trip.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }
    trip
}

/// Exact boundary mass matrix entries along the boundary edges, scaled by `s`.
fn boundary_triplets(mesh: &Mesh, space: &FeSpace, s: f64, include: impl Fn(usize) -> bool) -> Vec<(usize, usize, f64)> {
    let mut trip = Vec::new();
    for (e, be) in mesh.boundary_edges().iter().enumerate() {
        if !include(e) {
            continue;
        }
        let len = mesh.nodes()[be[0]].dist(mesh.nodes()[be[1]]);
        let d = space.boundary_edge(e);
        match space.order() {
            Order::P1 => {
                let m = [[2.0, 1.0], [1.0, 2.0]];
                for i in 0..2 {
                    for j in 0..2 {
                        trip.push((d[i], d[j], s * len / 6.0 * m[i][j]));
                    }
                }
            }
            Order::P2 => {
                let m = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];
                for i in 0..3 {
                    for j in 0..3 {
                        trip.push((d[i], d[j], s * len / 30.0 * m[i][j]));
                    }
                }
            }
        }
    }
    trip
}

/// Matrix of `a(·,·)` for the given coefficients.
pub fn assemble(mesh: &Mesh, c: &Coefficients, order: Order) -> SparseSystem {
    let space = FeSpace::new(mesh, order);
    assemble_on(mesh, &space, c)
}

pub fn assemble_on(mesh: &Mesh, space: &FeSpace, c: &Coefficients) -> SparseSystem {
    let mut trip = volume_triplets(mesh, space, |r| (c.alpha(r), c.mu(r)));
    trip.extend(boundary_triplets(mesh, space, 1.0 / c.zeta, |_| true));
    SparseSystem { matrix: CsrMatrix::from_triplets(space.ndof(), trip), order: space.order(), coefficients: *c }
}

/// Stiffness plus mass with unit weights: the discrete H¹ inner product.
pub fn h1_matrix(mesh: &Mesh, space: &FeSpace) -> CsrMatrix {
    CsrMatrix::from_triplets(space.ndof(), volume_triplets(mesh, space, |_| (1.0, 1.0)))
}

/// Mass matrix of one region (`∫_region φ_i φ_j`).
pub fn region_mass_matrix(mesh: &Mesh, space: &FeSpace, region: Region) -> CsrMatrix {
    CsrMatrix::from_triplets(
        space.ndof(),
        volume_triplets(mesh, space, |r| (0.0, if r == region { 1.0 } else { 0.0 })),
    )
}

/// Boundary mass matrix on the edges selected by `mask` (edge midpoint test).
pub fn boundary_mass_matrix(mesh: &Mesh, space: &FeSpace, mask: Option<&BoundaryMask>) -> CsrMatrix {
    let include = boundary_edge_selector(mesh, mask);
    CsrMatrix::from_triplets(space.ndof(), boundary_triplets(mesh, space, 1.0, |e| include[e]))
}

/// Whether each boundary edge belongs to Σ, judged at its midpoint.
pub fn boundary_edge_selector(mesh: &Mesh, mask: Option<&BoundaryMask>) -> Vec<bool> {
    let ne = mesh.boundary_edges().len();
    let Some(mask) = mask else { return vec![true; ne] };
    let lp = mesh.boundary_loop();
    let nodes = mesh.nodes();
    let m = lp.len();
    let perimeter: f64 = (0..m).map(|k| nodes[lp[k]].dist(nodes[lp[(k + 1) % m]])).sum();
    let mut start = vec![0.0; mesh.num_nodes()];
    let mut s = 0.0;
    for k in 0..m {
        start[lp[k]] = s;
        s += nodes[lp[k]].dist(nodes[lp[(k + 1) % m]]);
    }
    mesh.boundary_edges()
        .iter()
        .map(|e| {
            let len = nodes[e[0]].dist(nodes[e[1]]);
            mask.contains((start[e[0]] + 0.5 * len) / perimeter)
        })
        .collect()
}

/// Load vector of `l(v) = ∫ f v`.
pub fn assemble_load(mesh: &Mesh, s: &SourceSpec, order: Order) -> Result<Vec<f64>> {
    assemble_load_on(mesh, &FeSpace::new(mesh, order), s)
}

pub fn assemble_load_on(mesh: &Mesh, space: &FeSpace, s: &SourceSpec) -> Result<Vec<f64>> {
    let order = space.order();
    let nl = order.local_dofs();
    let mut b = vec![0.0; space.ndof()];
    let mut phi = [0.0; 6];
    match s {
        SourceSpec::Point { location, strength } => {
            let k = mesh.locate(*location).ok_or(Error::Location { x: location.x, y: location.y })?;
            let l = barycentric(mesh.triangle_vertices(k), *location);
            basis_values(order, l, &mut phi);
            for (i, &d) in space.cell(k).iter().enumerate() {
                b[d] += strength * phi[i];
            }
        }
        SourceSpec::Constant { .. } | SourceSpec::GaussianSum { .. } => {
            // Degree 4 covers the polynomial cases exactly; the Gaussian is
            // smooth on the element scale.
            let rule = quadrature::degree4();
            for k in 0..mesh.num_triangles() {
                let v = mesh.triangle_vertices(k);
                let area = mesh.signed_area(k);
                let dofs = space.cell(k);
                for &(l, w) in &rule {
                    let x = v[0] * l[0] + v[1] * l[1] + v[2] * l[2];
                    let f = s.value_at(x);
                    basis_values(order, l, &mut phi);
                    for i in 0..nl {
                        b[dofs[i]] += w * area * f * phi[i];
                    }
                }
            }
        }
    }
    Ok(b)
}

/// Solves `A x = rhs` to a relative residual of at most 1e-10.
pub fn solve(sys: &SparseSystem, rhs: &[f64]) -> Result<Field> {
    let (x, _) = pcg(&sys.matrix, rhs, DEFAULT_RTOL)?;
    Ok(Field::new(sys.order, x))
}

/// `∫_Ω (u_h − g)²` by composite quadrature, for an arbitrary function `g`.
pub fn l2_error_sq(mesh: &Mesh, space: &FeSpace, field: &Field, g: impl Fn(Vec2) -> f64) -> f64 {
    let rule = quadrature::composite_degree4(1);
    let mut phi = [0.0; 6];
    let mut total = 0.0;
    for k in 0..mesh.num_triangles() {
        let v = mesh.triangle_vertices(k);
        let area = mesh.signed_area(k);
        let dofs = space.cell(k);
        for &(l, w) in &rule {
            basis_values(field.order, l, &mut phi);
            let uh: f64 = dofs.iter().zip(&phi).map(|(&d, p)| field.values[d] * p).sum();
            let x = v[0] * l[0] + v[1] * l[1] + v[2] * l[2];
            let e = uh - g(x);
            total += w * area * e * e;
        }
    }
    total
}

/// Gradient of a P1 field on triangle `k`.
pub fn p1_gradient(mesh: &Mesh, k: usize, values: &[f64]) -> Vec2 {
    let t = mesh.triangles()[k];
    let (g, _) = barycentric_gradients(mesh.triangle_vertices(k));
    g[0] * values[t[0]] + g[1] * values[t[1]] + g[2] * values[t[2]]
}
