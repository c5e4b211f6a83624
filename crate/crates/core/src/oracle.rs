//! Independent reference computations used to check the finite-element
//! pipeline.
//!
//! The radial solver works on the 1D reduction of the state equation in
//! polar coordinates with its own finite-volume stencil, so it shares no
//! assembly code with [`crate::fem`]. The single-region case is checked
//! against the modified Bessel closed form. The finite-difference oracles
//! re-solve full 2D problems on perturbed coefficients or deformed meshes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Coefficients, Measurement, SourceSpec};
use crate::geometry::Vec2;
use crate::mesh::Mesh;
use crate::problems::{misfit, solve_state};

/// Source of a radially symmetric problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadialSource {
    Constant(f64),
    /// Point source of the given strength at the origin.
    Point(f64),
}

/// Two-region radial problem on the disk of radius `outer_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub outer_radius: f64,
    pub interface_radius: f64,
    pub alpha: f64,
    pub mu_out: f64,
    pub mu_in: f64,
    pub zeta: f64,
    pub source: RadialSource,
}

impl RadialProblem {
    fn validate(&self) -> Result<()> {
        if !(self.interface_radius > 0.0 && self.interface_radius < self.outer_radius) {
            return Err(Error::Oracle("need 0 < interface radius < outer radius".into()));
        }
        if [self.alpha, self.mu_out, self.mu_in, self.zeta].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Oracle("coefficients must be positive".into()));
        }
        Ok(())
    }
}

/// Nodal values `u(r_i)` on the oracle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
}

impl RadialSolution {
    /// Linear interpolation in `r`, clamped to the grid.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r <= self.r[0] {
            return self.u[0];
        }
        if r >= self.r[n - 1] {
            return self.u[n - 1];
        }
        let i = self.r.partition_point(|&x| x <= r).max(1);
        let w = (r - self.r[i - 1]) / (self.r[i] - self.r[i - 1]);
        (1.0 - w) * self.u[i - 1] + w * self.u[i]
    }
}

/// Nodes of two uniform sub-grids joined at `split` (which is a node).
fn split_grid(split: f64, outer: f64, n: usize) -> Vec<f64> {
    let n1 = ((n as f64 * split / outer).round() as usize).clamp(1, n - 1);
    let n2 = n - n1;
    let mut r: Vec<f64> = (0..n1).map(|i| split * i as f64 / n1 as f64).collect();
    r.extend((0..=n2).map(|i| split + (outer - split) * i as f64 / n2 as f64));
    r
}

/// Thomas algorithm for a tridiagonal system (`sub[0]` and `sup[n-1]` unused).
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 {
        return Err(Error::Oracle("singular tridiagonal system".into()));
    }
    c[0] = sup[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::Oracle("singular tridiagonal system".into()));
        }
        c[i] = if i + 1 < n { sup[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves `−(1/r)(r α u′)′ + μ u = f` on `(0, R)` with `α u′(R) + u(R)/ζ = 0`
/// and regularity (or the point-source flux `2π r α u′ → −S`) at the origin,
/// using `n_grid` cells. Continuity of `u` and `α u′` at the interface is
/// built into the conservative stencil.
pub fn radial_solve(p: &RadialProblem, n_grid: usize) -> Result<RadialSolution> {
    p.validate()?;
    if n_grid < 1000 {
        return Err(Error::Oracle(format!("oracle grid needs at least 1000 cells, got {n_grid}")));
    }
    let r = split_grid(p.interface_radius, p.outer_radius, n_grid);
    let n = r.len();
    let inside = |a: f64, b: f64| 0.5 * (a + b) < p.interface_radius;
    let mu = |a: f64, b: f64| if inside(a, b) { p.mu_in } else { p.mu_out };
    let f = match p.source {
        RadialSource::Constant(c) => c,
        RadialSource::Point(_) => 0.0,
    };
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        // Left and right halves of the control volume around r_i.
        if i > 0 {
            let face = 0.5 * (r[i - 1] + r[i]);
            let k = face * p.alpha / (r[i] - r[i - 1]);
            diag[i] += k;
            sub[i] -= k;
            let moment = 0.5 * (r[i] * r[i] - face * face);
            diag[i] += mu(r[i - 1], r[i]) * moment;
            rhs[i] += f * moment;
        }
        if i + 1 < n {
            let face = 0.5 * (r[i] + r[i + 1]);
            let k = face * p.alpha / (r[i + 1] - r[i]);
            diag[i] += k;
            sup[i] -= k;
            let moment = 0.5 * (face * face - r[i] * r[i]);
            diag[i] += mu(r[i], r[i + 1]) * moment;
            rhs[i] += f * moment;
        }
    }
    diag[n - 1] += p.outer_radius / p.zeta;
    if let RadialSource::Point(s) = p.source {
        rhs[0] += s / (2.0 * PI);
    }
    let u = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    Ok(RadialSolution { r, u })
}

/// Modified Bessel function `I₀` by its power series.
pub fn bessel_i0(x: f64) -> f64 {
    bessel_series(x, 0)
}

/// Modified Bessel function `I₁` by its power series.
pub fn bessel_i1(x: f64) -> f64 {
    bessel_series(x, 1)
}

fn bessel_series(x: f64, nu: u32) -> f64 {
    let q = 0.25 * x * x;
    let mut term = (0.5 * x).powi(nu as i32) / (1..=nu).map(|k| k as f64).product::<f64>();
    let mut sum = term;
    for k in 1..500 {
        term *= q / (k as f64 * (k + nu) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Closed-form solution `u(r) = f/μ + c·I₀(k r)`, `k = √(μ/α)`, of the
/// single-region problem with constant source.
pub fn single_region_closed_form(alpha: f64, mu: f64, zeta: f64, outer: f64, f: f64, r: f64) -> f64 {
    let k = (mu / alpha).sqrt();
    let c = -(f / mu) / zeta / (alpha * k * bessel_i1(k * outer) + bessel_i0(k * outer) / zeta);
    f / mu + c * bessel_i0(k * r)
}

/// Radial profile `v(r)` of the extension `V = v(r) e_r` solving
/// `(∇V, ∇φ) + (V, φ) = ∫_{|x| = a} g n·φ` with `V = 0` on `|x| = R`,
/// i.e. `−v″ − v′/r + v/r² + v = g δ(r − a)`.
pub fn radial_extension_solve(outer: f64, interface: f64, g: f64, n_grid: usize) -> Result<RadialSolution> {
    if !(interface > 0.0 && interface < outer) || n_grid < 1000 {
        return Err(Error::Oracle("invalid radial extension problem".into()));
    }
    let r = split_grid(interface, outer, n_grid);
    let n = r.len();
    // Unknowns are the interior nodes; v(0) = v(R) = 0.
    let m = n - 2;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for j in 0..m {
        let i = j + 1;
        let fl = 0.5 * (r[i - 1] + r[i]);
        let fr = 0.5 * (r[i] + r[i + 1]);
        let kl = fl / (r[i] - r[i - 1]);
        let kr = fr / (r[i + 1] - r[i]);
        // ∫ (v/r + r v) dr over the control volume, lumped at r_i.
        let reaction = (fr - fl) * (1.0 / r[i] + r[i]);
        diag[j] = kl + kr + reaction;
        if j > 0 {
            sub[j] = -kl;
        }
        if j + 1 < m {
            sup[j] = -kr;
        }
        if (r[i] - interface).abs() < 1e-12 * outer {
            rhs[j] = interface * g;
        }
    }
    let v = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    let mut u = vec![0.0];
    u.extend(v);
    u.push(0.0);
    Ok(RadialSolution { r, u })
}

/// Regularized cost `J_ρ` after a full state solve.
pub fn regularized_cost(mesh: &Mesh, c: &Coefficients, s: &SourceSpec, h: &Measurement, rho: f64) -> Result<f64> {
    let u = solve_state(mesh, c, s)?;
    Ok(misfit(mesh, &u, h)? + 0.5 * rho * c.mu_l2_sq(mesh))
}

/// Central difference `(J_ρ(μ_in + δ) − J_ρ(μ_in − δ)) / 2δ`.
pub fn fd_parameter_gradient(
    mesh: &Mesh,
    c: &Coefficients,
    s: &SourceSpec,
    h: &Measurement,
    rho: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Oracle("finite-difference step must be positive".into()));
    }
    let plus = regularized_cost(mesh, &c.with_mu_in(c.mu_in + delta), s, h, rho)?;
    let minus = regularized_cost(mesh, &c.with_mu_in(c.mu_in - delta), s, h, rho)?;
    Ok((plus - minus) / (2.0 * delta))
}

/// Misfit `J` on `mesh` deformed by `t·v`; `None` when the deformed mesh is invalid.
fn deformed_misfit(mesh: &Mesh, c: &Coefficients, s: &SourceSpec, h: &Measurement, v: &[Vec2], t: f64) -> Result<Option<f64>> {
    match mesh.deform(v, t) {
        Ok(m) => {
            let u = solve_state(&m, c, s)?;
            Ok(Some(misfit(&m, &u, h)?))
        }
        Err(Error::InvertedMesh { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Central difference `(J(T_{+t}ω) − J(T_{−t}ω)) / 2t` of the misfit along
/// the node deformation `v`. Halves `t` up to 8 times if a deformed mesh
/// inverts; returns the step actually used.
pub fn fd_shape_derivative(
    mesh: &Mesh,
    c: &Coefficients,
    s: &SourceSpec,
    h: &Measurement,
    v: &[Vec2],
    t: f64,
) -> Result<(f64, f64)> {
    let mut t = t;
    for _ in 0..=8 {
        let plus = deformed_misfit(mesh, c, s, h, v, t)?;
        let minus = deformed_misfit(mesh, c, s, h, v, -t)?;
        if let (Some(a), Some(b)) = (plus, minus) {
            return Ok(((a - b) / (2.0 * t), t));
        }
        t *= 0.5;
    }
    Err(Error::Oracle("deformation inverts the mesh for every trial step".into()))
}

/// One-sided difference `(J(T_tω) − J(ω)) / t`.
pub fn fd_shape_forward(mesh: &Mesh, c: &Coefficients, s: &SourceSpec, h: &Measurement, v: &[Vec2], t: f64) -> Result<f64> {
    let base = misfit(mesh, &solve_state(mesh, c, s)?, h)?;
    match deformed_misfit(mesh, c, s, h, v, t)? {
        Some(j) => Ok((j - base) / t),
        None => Err(Error::Oracle(format!("deformation inverts the mesh at t = {t}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial(mu_in: f64, source: RadialSource) -> RadialProblem {
        RadialProblem { outer_radius: 3.0, interface_radius: 1.5, alpha: 1.0, mu_out: 1.0, mu_in, zeta: 0.3, source }
    }

    #[test]
    fn bessel_values() {
        // Reference values of I0(1), I1(1), I0(3), I1(3).
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i1(1.0) - 0.565_159_103_992_485_0).abs() < 1e-15);
        assert!((bessel_i0(3.0) - 4.880_792_585_865_024).abs() < 1e-13);
        assert!((bessel_i1(3.0) - 3.953_370_217_402_609).abs() < 1e-13);
    }

    #[test]
    fn matches_closed_form_single_region() {
        let sol = radial_solve(&radial(1.0, RadialSource::Constant(1.0)), 100_000).unwrap();
        let err = sol
            .r
            .iter()
            .zip(&sol.u)
            .map(|(&r, &u)| (u - single_region_closed_form(1.0, 1.0, 0.3, 3.0, 1.0, r)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn second_order_refinement() {
        let p = radial(1.0, RadialSource::Constant(1.0));
        let err = |n| {
            let s = radial_solve(&p, n).unwrap();
            s.r.iter()
                .zip(&s.u)
                .map(|(&r, &u)| (u - single_region_closed_form(1.0, 1.0, 0.3, 3.0, 1.0, r)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(2000) / err(4000);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn zero_source_zero_solution() {
        let s = radial_solve(&radial(1.2, RadialSource::Constant(0.0)), 1000).unwrap();
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_region_is_self_consistent() {
        let p = radial(1.2, RadialSource::Constant(1.0));
        let a = radial_solve(&p, 4000).unwrap();
        let b = radial_solve(&p, 8000).unwrap();
        let c = radial_solve(&p, 16000).unwrap();
        let d1 = (a.eval(0.7) - b.eval(0.7)).abs();
        let d2 = (b.eval(0.7) - c.eval(0.7)).abs();
        assert!((d1 / d2 - 4.0).abs() < 0.5);
        // More absorption inside lowers the solution everywhere.
        let q = radial_solve(&radial(1.0, RadialSource::Constant(1.0)), 4000).unwrap();
        assert!(a.u.iter().zip(&q.u).all(|(x, y)| x < y));
    }

    #[test]
    fn point_source_flux_balance() {
        // Total absorption plus boundary outflow equals the injected strength.
        let p = radial(1.2, RadialSource::Point(1.0));
        let s = radial_solve(&p, 20_000).unwrap();
        let n = s.r.len();
        let mut absorbed = 0.0;
        for i in 0..n - 1 {
            let (a, b) = (s.r[i], s.r[i + 1]);
            let mu = if 0.5 * (a + b) < 1.5 { 1.2 } else { 1.0 };
            absorbed += 2.0 * PI * mu * 0.5 * (a * s.u[i] + b * s.u[i + 1]) * (b - a);
        }
        let outflow = 2.0 * PI * 3.0 * s.u[n - 1] / 0.3;
        assert!((absorbed + outflow - 1.0).abs() < 1e-3);
    }

    #[test]
    fn extension_profile_is_positive_and_peaks_at_interface() {
        let v = radial_extension_solve(3.0, 1.5, 1.0, 4000).unwrap();
        assert!(v.u[1..v.u.len() - 1].iter().all(|&x| x > 0.0));
        let imax = v.u.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((v.r[imax] - 1.5).abs() < 1e-9);
    }
}
