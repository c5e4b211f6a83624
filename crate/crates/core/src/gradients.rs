//! Parameter gradient, interface shape-gradient kernel, curvature kernel of
//! the perimeter term, and the H¹ (Sobolev) extension of the kernel into a
//! mesh deformation field.
//!
//! Jumps are `[[φ]] = φ₊ − φ₋` with `+` the outside of ω. With this
//! convention the misfit derivative along a deformation `V` is
//! `dJ(ω)[V] = ∫_∂ω G V·n` with
//!
//! ```text
//! G = [[α]] ∇_τu·∇_τp − [[α ∂ₙu ∂ₙp]] + [[μ]] u p − (f-term)
//! ```
//!
//! where the f-term is `[[f]] p` ([`KernelVariant::JumpF`]) or `f p`
//! ([`KernelVariant::PlainF`]). One-sided traces come from the single
//! triangle on each side of an interface edge.
//!
//! When α is continuous, α∂ₙu is continuous and so is ∂ₙu, hence
//! `[[α ∂ₙu ∂ₙp]] = 0` exactly. The one-sided P1 estimate of that term is
//! then pure O(h) noise and is left out of the kernel; it is still reported
//! in [`KernelTerms::normal_jump`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{h1_matrix, p1_gradient, region_mass_matrix, Coefficients, FeSpace, Field, Order, SourceSpec};
use crate::geometry::Vec2;
use crate::mesh::{interface_normals, InterfaceNormals, Mesh, Region};
use crate::sparse::{dot, pcg, DEFAULT_RTOL};

/// Form of the source term in the shape-gradient kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    /// `[[f]] p`; vanishes for a continuous source.
    #[default]
    JumpF,
    /// `f p`.
    PlainF,
}

/// Scalar kernel per interface node, ordered like [`InterfaceNormals::nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceKernel {
    pub values: Vec<f64>,
}

impl InterfaceKernel {
    pub fn zeros(n: usize) -> InterfaceKernel {
        InterfaceKernel { values: vec![0.0; n] }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &InterfaceKernel, s: f64) -> InterfaceKernel {
        InterfaceKernel { values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The individual kernel contributions at each interface node.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTerms {
    /// `[[α]] ∇_τu·∇_τp`.
    pub tangential: Vec<f64>,
    /// `[[α ∂ₙu ∂ₙp]]`.
    pub normal_jump: Vec<f64>,
    /// `[[μ]] u p`.
    pub reaction: Vec<f64>,
    /// `[[f]] p`.
    pub source_jump: Vec<f64>,
    /// `f p`.
    pub source_plain: Vec<f64>,
    /// Whether `α_in = α_out`.
    pub alpha_continuous: bool,
}

impl KernelTerms {
    pub fn combine(&self, variant: KernelVariant) -> InterfaceKernel {
        let f = match variant {
            KernelVariant::JumpF => &self.source_jump,
            KernelVariant::PlainF => &self.source_plain,
        };
        let values = (0..self.reaction.len())
            .map(|i| {
                let nj = if self.alpha_continuous { 0.0 } else { self.normal_jump[i] };
                self.tangential[i] - nj + self.reaction[i] - f[i]
            })
            .collect();
        InterfaceKernel { values }
    }
}

/// Nodal vector field on the mesh, zero on ∂Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub values: Vec<Vec2>,
    /// `‖∇V‖² + ‖V‖²`.
    pub h1_norm_sq: f64,
}

impl DeformationField {
    /// Samples `f` at the nodes, forcing zero on the outer boundary.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> Vec2) -> DeformationField {
        let values: Vec<Vec2> = (0..mesh.num_nodes())
            .map(|i| if mesh.is_boundary_node(i) { Vec2::ZERO } else { f(mesh.nodes()[i]) })
            .collect();
        let h1_norm_sq = h1_norm_sq(mesh, &values);
        DeformationField { values, h1_norm_sq }
    }

    pub fn zeros(mesh: &Mesh) -> DeformationField {
        DeformationField { values: vec![Vec2::ZERO; mesh.num_nodes()], h1_norm_sq: 0.0 }
    }

    /// `V·n` at each interface node.
    pub fn normal_component(&self, normals: &InterfaceNormals) -> Vec<f64> {
        normals.nodes.iter().zip(&normals.normals).map(|(&i, n)| self.values[i].dot(*n)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Vec2::ZERO)
    }
}

/// `‖∇V‖²_{L²} + ‖V‖²_{L²}` of a P1 vector field.
pub fn h1_norm_sq(mesh: &Mesh, v: &[Vec2]) -> f64 {
    let space = FeSpace::new(mesh, Order::P1);
    let k = h1_matrix(mesh, &space);
    let vx: Vec<f64> = v.iter().map(|p| p.x).collect();
    let vy: Vec<f64> = v.iter().map(|p| p.y).collect();
    k.bilinear(&vx, &vx) + k.bilinear(&vy, &vy)
}

/// `∂J_ρ/∂μ_in = −∫_ω u p + ρ μ_in |ω|`.
pub fn parameter_gradient(mesh: &Mesh, u: &Field, p: &Field, c: &Coefficients, rho: f64) -> f64 {
    let space = FeSpace::new(mesh, u.order);
    let m = region_mass_matrix(mesh, &space, Region::Inside);
    -dot(&u.values, &m.mul_vec(&p.values)) + rho * c.mu_in * mesh.region_area(Region::Inside)
}

/// All kernel contributions from P1 state `u` and adjoint `p`.
pub fn kernel_terms(
    mesh: &Mesh,
    normals: &InterfaceNormals,
    u: &Field,
    p: &Field,
    c: &Coefficients,
    s: &SourceSpec,
) -> Result<KernelTerms> {
    if u.order != Order::P1 || p.order != Order::P1 {
        return Err(Error::Invalid("shape kernel needs P1 state and adjoint".into()));
    }
    let n = normals.len();
    let mut tan_acc = vec![0.0; n];
    let mut nj_acc = vec![0.0; n];
    let mut weight = vec![0.0; n];
    let jump_alpha = c.alpha_out - c.alpha_in;
    for (e, edge) in mesh.interface_edges().iter().enumerate() {
        let [tin, tout] = mesh.interface_sides()[e];
        let a = mesh.nodes()[edge[0]];
        let b = mesh.nodes()[edge[1]];
        let len = a.dist(b);
        let tau = (b - a) * (1.0 / len);
        let nrm = Vec2::new(tau.y, -tau.x);
        let (gu_in, gp_in) = (p1_gradient(mesh, tin, &u.values), p1_gradient(mesh, tin, &p.values));
        let (gu_out, gp_out) = (p1_gradient(mesh, tout, &u.values), p1_gradient(mesh, tout, &p.values));
        let tangential = jump_alpha * gu_in.dot(tau) * gp_in.dot(tau);
        let normal_jump =
            c.alpha_out * gu_out.dot(nrm) * gp_out.dot(nrm) - c.alpha_in * gu_in.dot(nrm) * gp_in.dot(nrm);
        for node in edge {
            let k = normals.position(*node).ok_or_else(|| Error::Topology("interface node without normal".into()))?;
            tan_acc[k] += len * tangential;
            nj_acc[k] += len * normal_jump;
            weight[k] += len;
        }
    }
    let jump_mu = c.mu_out - c.mu_in;
    let mut terms = KernelTerms {
        tangential: Vec::with_capacity(n),
        normal_jump: Vec::with_capacity(n),
        reaction: Vec::with_capacity(n),
        source_jump: Vec::with_capacity(n),
        source_plain: Vec::with_capacity(n),
        alpha_continuous: c.alpha_in == c.alpha_out,
    };
    for (k, &i) in normals.nodes.iter().enumerate() {
        let (ui, pi) = (u.values[i], p.values[i]);
        let x = mesh.nodes()[i];
        terms.tangential.push(tan_acc[k] / weight[k]);
        terms.normal_jump.push(nj_acc[k] / weight[k]);
        terms.reaction.push(jump_mu * ui * pi);
        // Every supported source is one function on all of Ω, so its two
        // one-sided traces coincide and [[f]] = 0.
        terms.source_jump.push(0.0);
        terms.source_plain.push(s.value_at(x) * pi);
    }
    Ok(terms)
}

/// Shape-gradient kernel `G` of the misfit at each interface node.
pub fn shape_gradient_kernel(
    mesh: &Mesh,
    u: &Field,
    p: &Field,
    c: &Coefficients,
    s: &SourceSpec,
    variant: KernelVariant,
) -> Result<InterfaceKernel> {
    let normals = interface_normals(mesh)?;
    Ok(kernel_terms(mesh, &normals, u, p, c, s)?.combine(variant))
}

/// `∫_∂ω G V·n`, trapezoidal along the interface (lumped edge lengths).
pub fn directional_shape_derivative(kernel: &InterfaceKernel, normals: &InterfaceNormals, v: &[Vec2]) -> f64 {
    normals
        .nodes
        .iter()
        .enumerate()
        .map(|(k, &i)| kernel.values[k] * v[i].dot(normals.normals[k]) * normals.lumped_length[k])
        .sum()
}

/// Discrete curvature: signed turning angle over lumped length, positive
/// where ω is locally convex. `∫ κ V·n` is the first variation of the
/// interface length.
pub fn perimeter_kernel(mesh: &Mesh, normals: &InterfaceNormals) -> Result<InterfaceKernel> {
    let mut values = vec![0.0; normals.len()];
    for lp in mesh.interface_loops() {
        let m = lp.len();
        if m < 3 {
            return Err(Error::Topology("interface loop has fewer than three nodes".into()));
        }
        for j in 0..m {
            let prev = mesh.nodes()[lp[(j + m - 1) % m]];
            let cur = mesh.nodes()[lp[j]];
            let next = mesh.nodes()[lp[(j + 1) % m]];
            let (e1, e2) = (cur - prev, next - cur);
            let theta = e1.cross(e2).atan2(e1.dot(e2));
            let k = normals.position(lp[j]).unwrap();
            values[k] = theta / normals.lumped_length[k];
        }
    }
    Ok(InterfaceKernel { values })
}

/// Solves `(∇V, ∇φ) + (V, φ) = −⟨G n, φ⟩_∂ω` for all `φ` vanishing on ∂Ω.
/// The interface pairing is lumped at the nodes, which makes
/// `⟨G n, V⟩ = −‖V‖²_{H¹}` hold up to the solver tolerance.
pub fn sobolev_extension(mesh: &Mesh, kernel: &InterfaceKernel, normals: &InterfaceNormals) -> Result<DeformationField> {
    if kernel.values.len() != normals.len() {
        return Err(Error::Invalid("kernel and interface normals differ in length".into()));
    }
    let space = FeSpace::new(mesh, Order::P1);
    let k = h1_matrix(mesh, &space);
    let mut kc = k.clone();
    let fixed: Vec<bool> = (0..mesh.num_nodes()).map(|i| mesh.is_boundary_node(i)).collect();
    kc.constrain(&fixed);
    let n = mesh.num_nodes();
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for (j, &i) in normals.nodes.iter().enumerate() {
        let w = -kernel.values[j] * normals.lumped_length[j];
        bx[i] += w * normals.normals[j].x;
        by[i] += w * normals.normals[j].y;
    }
    let (vx, _) = pcg(&kc, &bx, DEFAULT_RTOL)?;
    let (vy, _) = pcg(&kc, &by, DEFAULT_RTOL)?;
    let values: Vec<Vec2> = (0..n)
        .map(|i| if fixed[i] { Vec2::ZERO } else { Vec2::new(vx[i], vy[i]) })
        .collect();
    let h1_norm_sq = k.bilinear(&vx, &vx) + k.bilinear(&vy, &vy);
    Ok(DeformationField { values, h1_norm_sq })
}

/// `|⟨G n, V⟩ + ‖V‖²_{H¹}| / ‖V‖²_{H¹}`; zero for a vanishing field.
pub fn riesz_residual(kernel: &InterfaceKernel, normals: &InterfaceNormals, v: &DeformationField) -> f64 {
    if v.h1_norm_sq == 0.0 {
        return 0.0;
    }
    (directional_shape_derivative(kernel, normals, &v.values) + v.h1_norm_sq).abs() / v.h1_norm_sq
}
