//! Joint descent on μ_in and the interface.
//!
//! Each iteration solves the state and adjoint problems, takes a gradient
//! step on μ_in and moves the mesh along the Sobolev descent field, with one
//! step length `t = s J / ‖V‖²_{H¹}` shared by both updates.
//!
//! The step is halved until the mesh stays valid and, unless disabled, until
//! an Armijo test holds on `J + (ρ/2)‖μ‖² + (ρ₁/2)P` with ‖μ‖² taken on the
//! pre-step region areas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Coefficients, Field, Measurement, SourceSpec};
use crate::geometry::{Polyline, Vec2};
use crate::gradients::{
    kernel_terms, parameter_gradient, perimeter_kernel, riesz_residual, sobolev_extension, DeformationField,
    InterfaceKernel, KernelVariant,
};
use crate::mesh::{deform, interface_normals, Mesh, Region};
use crate::problems::{evaluate_cost, solve_adjoint, solve_state, CostReport};

const MAX_HALVINGS: u32 = 60;
/// Accepted meshes keep at least this fraction of the pre-step minimum area.
pub const AREA_FLOOR: f64 = 0.1;

/// How the Tikhonov weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Regularization {
    Fixed { rho: f64 },
    /// ρ from `(β − 1) J = (ρ/2)‖μ‖²`, recomputed every iteration.
    Balancing { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Step scale `s`.
    pub s: f64,
    pub regularization: Regularization,
    /// Perimeter weight ρ₁.
    pub rho1: f64,
    /// Stop once the step falls below this.
    pub t0: f64,
    pub max_iters: usize,
    pub mu_bounds: (f64, f64),
    /// Below this misfit the step is quartered.
    pub shrink_when_cost_below: f64,
    pub variant: KernelVariant,
    /// Multiplier on the μ step; `1` keeps both steps equal.
    pub mu_step_scale: f64,
    /// Which representative of the μ_in derivative the step uses.
    pub mu_gradient: MuGradient,
    /// Armijo constant of the cost-decrease test; `None` backtracks on mesh
    /// validity only.
    pub armijo: Option<f64>,
    /// Stop with [`StopReason::MeshQuality`] when an accepted step would leave
    /// a triangle angle below this many degrees. The mesh is never remeshed.
    pub min_angle: Option<f64>,
}

/// Representative of `∂J_ρ/∂μ_in` used in the μ update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuGradient {
    /// L²(ω) representative among constants: `∂J_ρ/∂μ_in / |ω|`.
    #[default]
    L2,
    /// The plain partial derivative.
    Euclidean,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            s: 0.1,
            regularization: Regularization::Fixed { rho: 0.0 },
            rho1: 0.0,
            t0: 1e-12,
            max_iters: 500,
            mu_bounds: (1e-3, 1e3),
            shrink_when_cost_below: 1e-3,
            variant: KernelVariant::JumpF,
            mu_step_scale: 1.0,
            mu_gradient: MuGradient::L2,
            armijo: Some(1e-4),
            min_angle: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(Error::Invalid(format!("step scale must be positive, got {}", self.s)));
        }
        match self.regularization {
            Regularization::Fixed { rho } if !(rho >= 0.0) || !rho.is_finite() => {
                return Err(Error::Invalid(format!("rho must be non-negative, got {rho}")));
            }
            Regularization::Balancing { beta } if !(beta > 1.0) || !beta.is_finite() => {
                return Err(Error::Invalid(format!("balancing beta must exceed 1, got {beta}")));
            }
            _ => {}
        }
        if !(self.rho1 >= 0.0) || !self.rho1.is_finite() {
            return Err(Error::Invalid(format!("rho1 must be non-negative, got {}", self.rho1)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Invalid(format!("t0 must be positive, got {}", self.t0)));
        }
        let (lo, hi) = self.mu_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Invalid(format!("invalid mu bounds ({lo}, {hi})")));
        }
        if !(self.shrink_when_cost_below >= 0.0) {
            return Err(Error::Invalid("shrink threshold must be non-negative".into()));
        }
        if let Some(a) = self.armijo {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::Invalid(format!("Armijo constant must lie in [0, 1), got {a}")));
            }
        }
        if let Some(a) = self.min_angle {
            if !(a > 0.0 && a < 60.0) {
                return Err(Error::Invalid(format!("min angle must lie in (0, 60) degrees, got {a}")));
            }
        }
        if !(self.mu_step_scale >= 0.0) || !self.mu_step_scale.is_finite() {
            return Err(Error::Invalid("mu step scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// One optimizer iteration, evaluated at the iterate before its step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: CostReport,
    pub mu_in: f64,
    pub rho: f64,
    /// `‖μ‖²_{L²(Ω)}` used for ρ.
    pub mu_l2_sq: f64,
    /// μ_in derivative in the configured representative.
    pub mu_gradient: f64,
    /// Accepted step; zero on the final record.
    pub step: f64,
    pub min_signed_area: f64,
    pub v_h1_sq: f64,
    pub riesz_residual: f64,
    pub interface: Polyline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum StopReason {
    StepBelowThreshold,
    ZeroField,
    MaxIterations,
    StepFailure(String),
    SolverFailure(String),
    /// The next mesh fell below the configured minimum angle.
    MeshQuality(String),
}

impl StopReason {
    pub fn is_failure(&self) -> bool {
        matches!(self, StopReason::StepFailure(_) | StopReason::SolverFailure(_) | StopReason::MeshQuality(_))
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub coefficients: Coefficients,
    pub source: SourceSpec,
    pub measurement: Measurement,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<IterationRecord>,
    pub mesh: Mesh,
    pub coefficients: Coefficients,
    pub stop: StopReason,
}

/// `t = s J / ‖V‖²_{H¹}`; `None` when `V` vanishes.
pub fn step_size(s: f64, j: f64, v: &DeformationField) -> Option<f64> {
    (v.h1_norm_sq > 0.0).then(|| s * j / v.h1_norm_sq)
}

/// Projected gradient step on μ_in.
pub fn update_mu(mu: f64, grad: f64, t: f64, bounds: (f64, f64)) -> f64 {
    (mu - t * grad).clamp(bounds.0, bounds.1)
}

/// `ρ = 2(β − 1) J / ‖μ‖²_{L²}`.
pub fn balancing_update(j: f64, mu_l2_sq: f64, beta: f64) -> f64 {
    2.0 * (beta - 1.0) * j / mu_l2_sq
}

/// Halves `t_init` until the deformed mesh keeps [`AREA_FLOOR`] of the
/// current minimum area.
pub fn backtrack(mesh: &Mesh, v: &[Vec2], t_init: f64) -> Result<(f64, Mesh)> {
    if !(t_init > 0.0) || !t_init.is_finite() {
        return Err(Error::StepFailure(format!("initial step must be positive, got {t_init}")));
    }
    let floor = AREA_FLOOR * mesh.min_signed_area();
    let mut t = t_init;
    for _ in 0..=MAX_HALVINGS {
        match deform(mesh, v, t) {
            Ok(m) if m.min_signed_area() >= floor => return Ok((t, m)),
            Ok(_) | Err(Error::InvertedMesh { .. }) => t *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepFailure(format!("no valid step after {MAX_HALVINGS} halvings from t = {t_init:e}")))
}

/// Backtracking from `t_init`: [`backtrack`] for mesh validity, then
/// halving until `accept` holds. `None` once the step drops below `t0`.
pub fn line_search(
    mesh: &Mesh,
    v: &[Vec2],
    t_init: f64,
    t0: f64,
    mut accept: impl FnMut(f64, &Mesh) -> Result<bool>,
) -> Result<Option<(f64, Mesh)>> {
    let mut t = t_init;
    while t >= t0 {
        let (ta, m) = backtrack(mesh, v, t)?;
        if ta < t0 {
            return Ok(None);
        }
        if accept(ta, &m)? {
            return Ok(Some((ta, m)));
        }
        t = 0.5 * ta;
    }
    Ok(None)
}

/// Per-iteration view passed to observers.
pub struct IterationView<'a> {
    pub record: &'a IterationRecord,
    pub mesh: &'a Mesh,
    pub state: &'a Field,
    pub adjoint: &'a Field,
    pub kernel: &'a InterfaceKernel,
    pub field: &'a DeformationField,
}

pub fn run(config: &OptimizerConfig, problem: Problem) -> Result<RunResult> {
    run_observed(config, problem, |_| {})
}

/// As [`run`], calling `observe` after every iteration.
pub fn run_observed(
    config: &OptimizerConfig,
    problem: Problem,
    mut observe: impl FnMut(&IterationView),
) -> Result<RunResult> {
    config.validate()?;
    let Problem { mut mesh, coefficients, source, measurement } = problem;
    let mut c = coefficients.with_bounds(config.mu_bounds.0, config.mu_bounds.1);
    c.mu_in = c.mu_in.clamp(config.mu_bounds.0, config.mu_bounds.1);
    c.validate()?;
    let mut records = Vec::new();
    let mut iter = 0;
    let stop = loop {
        let u = match solve_state(&mesh, &c, &source) {
            Ok(u) => u,
            Err(e) => break StopReason::SolverFailure(e.to_string()),
        };
        let misfit = crate::problems::misfit(&mesh, &u, &measurement)?;
        let mu_l2_sq = c.mu_l2_sq(&mesh);
        let rho = match config.regularization {
            Regularization::Fixed { rho } => rho,
            Regularization::Balancing { beta } => balancing_update(misfit, mu_l2_sq, beta),
        };
        let interface = mesh.interface_polyline()?;
        let cost = evaluate_cost(&mesh, &u, &measurement, &c, rho, config.rho1, &interface)?;
        let p = match solve_adjoint(&mesh, &c, &u, &measurement) {
            Ok(p) => p,
            Err(e) => break StopReason::SolverFailure(e.to_string()),
        };
        let mu_partial = parameter_gradient(&mesh, &u, &p, &c, rho);
        let mu_gradient = match config.mu_gradient {
            MuGradient::L2 => mu_partial / mesh.region_area(Region::Inside),
            MuGradient::Euclidean => mu_partial,
        };
        let normals = interface_normals(&mesh)?;
        let mut kernel = kernel_terms(&mesh, &normals, &u, &p, &c, &source)?.combine(config.variant);
        if config.rho1 > 0.0 {
            kernel = kernel.add_scaled(&perimeter_kernel(&mesh, &normals)?, 0.5 * config.rho1);
        }
        let v = match sobolev_extension(&mesh, &kernel, &normals) {
            Ok(v) => v,
            Err(e) => break StopReason::SolverFailure(e.to_string()),
        };
        let mut record = IterationRecord {
            iter,
            cost,
            mu_in: c.mu_in,
            rho,
            mu_l2_sq,
            mu_gradient,
            step: 0.0,
            min_signed_area: mesh.min_signed_area(),
            v_h1_sq: v.h1_norm_sq,
            riesz_residual: riesz_residual(&kernel, &normals, &v),
            interface,
        };
        let mut stop = None;
        let mut next = None;
        if iter >= config.max_iters {
            stop = Some(StopReason::MaxIterations);
        } else if let Some(t) = step_size(config.s, misfit, &v) {
            let t = if misfit < config.shrink_when_cost_below { 0.25 * t } else { t };
            // First-order change of the merit per unit step. The merit is J_ρ
            // with the Tikhonov term on the current region areas: the kernel
            // carries no shape derivative of ‖μ‖², so that part is frozen.
            let slope = -(v.h1_norm_sq + config.mu_step_scale * mu_partial * mu_gradient);
            let trial = |t: f64, m: &Mesh| -> Result<f64> {
                let ct = c.with_mu_in(update_mu(c.mu_in, mu_gradient, config.mu_step_scale * t, config.mu_bounds));
                let ut = solve_state(m, &ct, &source)?;
                let mt = crate::problems::misfit(m, &ut, &measurement)?;
                Ok(mt + 0.5 * rho * ct.mu_l2_sq(&mesh) + 0.5 * config.rho1 * m.interface_polyline()?.perimeter())
            };
            match line_search(&mesh, &v.values, t, config.t0, |t, m| match config.armijo {
                None => Ok(true),
                Some(a) => Ok(trial(t, m)? <= cost.total + a * t * slope),
            }) {
                Ok(Some((t, m))) if config.min_angle.is_some_and(|a| m.min_angle().0 < a) => {
                    let (deg, k) = m.min_angle();
                    let [a, b, cc] = m.triangle_vertices(k);
                    let g = (a + b + cc) * (1.0 / 3.0);
                    stop = Some(StopReason::MeshQuality(format!(
                        "step t = {t:e} leaves a {deg:.2} degree angle in triangle {k} ({:?}) at ({:.3}, {:.3})",
                        m.regions()[k],
                        g.x,
                        g.y
                    )));
                }
                Ok(Some((t, m))) => {
                    record.step = t;
                    record.min_signed_area = m.min_signed_area();
                    next = Some(m);
                }
                Ok(None) => stop = Some(StopReason::StepBelowThreshold),
                Err(Error::StepFailure(msg)) => stop = Some(StopReason::StepFailure(msg)),
                Err(e) => stop = Some(StopReason::SolverFailure(e.to_string())),
            }
        } else {
            stop = Some(StopReason::ZeroField);
        }
        observe(&IterationView { record: &record, mesh: &mesh, state: &u, adjoint: &p, kernel: &kernel, field: &v });
        let t = record.step;
        records.push(record);
        if let Some(reason) = stop {
            break reason;
        }
        c.mu_in = update_mu(c.mu_in, mu_gradient, config.mu_step_scale * t, config.mu_bounds);
        mesh = next.expect("accepted step has a mesh");
        iter += 1;
    };
    Ok(RunResult { records, mesh, coefficients: c, stop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ParametricCurve;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn step_formula() {
        let v = DeformationField { values: vec![], h1_norm_sq: 4.0 };
        assert_eq!(step_size(1.0, 2.0, &v), Some(0.5));
        assert_eq!(step_size(2.0, 2.0, &v), Some(1.0));
        assert_eq!(step_size(1.0, 2.0, &DeformationField { values: vec![], h1_norm_sq: 0.0 }), None);
    }

    #[test]
    fn mu_update_and_clamp() {
        assert_eq!(update_mu(1.2, 0.0, 0.3, (0.1, 10.0)), 1.2);
        assert!((update_mu(1.2, 2.0, 0.05, (0.1, 10.0)) - 1.1).abs() < 1e-15);
        assert_eq!(update_mu(0.1, 1.0, 1.0, (0.1, 10.0)), 0.1);
    }

    #[test]
    fn balancing_formula() {
        assert_eq!(balancing_update(0.7, 3.0, 1.0), 0.0);
        assert_eq!(balancing_update(0.0, 3.0, 2.0), 0.0);
        let pi = std::f64::consts::PI;
        // ‖μ‖² for μ = 1 on the annulus and 1.2 on the disk of radius 1.5.
        let norm = (9.0 - 2.25) * pi + 1.44 * 2.25 * pi;
        let rho = balancing_update(0.5, norm, 1.5);
        assert!(((1.5 - 1.0) * 0.5 - 0.5 * rho * norm).abs() < 1e-15);
    }

    #[test]
    fn backtrack_accepts_small_and_halves_large() {
        let m = build_disk_mesh(3.0, 0.3, &ParametricCurve::circle(1.5)).unwrap();
        let tiny = DeformationField::from_fn(&m, |p| p * 1e-6);
        let (t, _) = backtrack(&m, &tiny.values, 1.0).unwrap();
        assert_eq!(t, 1.0);
        // Contracts toward the origin hard enough to fold the mesh at t = 1.
        let fold = DeformationField::from_fn(&m, |p| -p * 2.0);
        let (t, accepted) = backtrack(&m, &fold.values, 1.0).unwrap();
        assert!(t < 1.0);
        assert!(accepted.min_signed_area() >= AREA_FLOOR * m.min_signed_area());
        assert!(backtrack(&m, &tiny.values, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig { regularization: Regularization::Balancing { beta: 1.0 }, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig { s: 0.0, ..Default::default() }.validate().is_err());
    }
}
