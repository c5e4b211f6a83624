//! Quick self-checks of the solver against the independent oracles, run by
//! `dotshape verify`. Each check is a few seconds at most.

use dotshape::fem::{boundary_trace, l2_error_sq, Coefficients, FeSpace, Order, SourceSpec};
use dotshape::gradients::{
    directional_shape_derivative, parameter_gradient, riesz_residual, shape_gradient_kernel, sobolev_extension,
    DeformationField, KernelVariant,
};
use dotshape::mesh::{build_disk_mesh, build_disk_mesh_seeded, interface_normals};
use dotshape::oracle::{
    fd_parameter_gradient, fd_shape_derivative, radial_solve, single_region_closed_form, RadialProblem,
    RadialSource,
};
use dotshape::problems::{solve_adjoint, solve_state, solve_state_with_order};
use dotshape::{ParametricCurve, Vec2};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn radial_problem(mu_in: f64) -> RadialProblem {
    RadialProblem {
        outer_radius: 3.0,
        interface_radius: 1.5,
        alpha: 1.0,
        mu_out: 1.0,
        mu_in,
        zeta: 0.3,
        source: RadialSource::Constant(1.0),
    }
}

pub fn run_checks() -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();

    // Oracle against the single-region closed form.
    let sol = radial_solve(&radial_problem(1.0), 20_000)?;
    let err = (0..=30)
        .map(|i| {
            let r = 0.1 * i as f64;
            (sol.eval(r) - single_region_closed_form(1.0, 1.0, 0.3, 3.0, 1.0, r)).abs()
        })
        .fold(0.0, f64::max);
    out.push(check("radial oracle vs Bessel closed form", err < 1e-6, format!("max error {err:.2e}")));

    // Forward solve against the oracle.
    let c = Coefficients::new(1.0, 1.0, 1.2, 0.3);
    let src = SourceSpec::Constant { value: 1.0 };
    let oracle = radial_solve(&radial_problem(1.2), 20_000)?;
    let mesh = build_disk_mesh(3.0, 0.1, &ParametricCurve::circle(1.5))?;
    let u = solve_state(&mesh, &c, &src)?;
    let space = FeSpace::new(&mesh, Order::P1);
    let e = l2_error_sq(&mesh, &space, &u, |p| oracle.eval(p.norm())).sqrt();
    let n = l2_error_sq(&mesh, &space, &dotshape::fem::Field::zeros(&space), |p| oracle.eval(p.norm())).sqrt();
    out.push(check("forward solve vs radial oracle (h = 0.1)", e / n <= 2e-2, format!("relative L2 error {:.2e}", e / n)));

    // Gradients on a perturbed configuration.
    let fine = build_disk_mesh_seeded(3.0, 0.05, &ParametricCurve::circle(1.5), 7)?;
    let uf = solve_state_with_order(&fine, &c, &src, Order::P2)?;
    let h = boundary_trace(&fine, &FeSpace::new(&fine, Order::P2), &uf, None)?;
    let trial = build_disk_mesh(3.0, 0.1, &ParametricCurve::circle(1.6))?;
    let ct = c.with_mu_in(1.1);
    let ut = solve_state(&trial, &ct, &src)?;
    let pt = solve_adjoint(&trial, &ct, &ut, &h)?;
    let rho = 1e-4;
    let g = parameter_gradient(&trial, &ut, &pt, &ct, rho);
    let fd = fd_parameter_gradient(&trial, &ct, &src, &h, rho, 1e-5)?;
    let rel = (g - fd).abs() / fd.abs();
    out.push(check("parameter gradient vs central FD", rel <= 1e-3, format!("relative error {rel:.2e}")));

    let kernel = shape_gradient_kernel(&trial, &ut, &pt, &ct, &src, KernelVariant::JumpF)?;
    let normals = interface_normals(&trial)?;
    let v = DeformationField::from_fn(&trial, |p| {
        let bump = (1.0 - (p.norm() / 3.0).powi(2)).max(0.0);
        Vec2::new(p.x + 0.3 * p.y, 0.5 * p.y) * bump
    });
    let d = directional_shape_derivative(&kernel, &normals, &v.values);
    let (fd, _) = fd_shape_derivative(&trial, &ct, &src, &h, &v.values, 1e-4)?;
    let rel = (d - fd).abs() / fd.abs();
    out.push(check("shape derivative vs central FD", rel <= 5e-2, format!("relative error {rel:.2e}")));

    let ext = sobolev_extension(&trial, &kernel, &normals)?;
    let res = riesz_residual(&kernel, &normals, &ext);
    out.push(check("Riesz identity of the descent field", res <= 1e-8, format!("residual {res:.2e}")));
    Ok(out)
}
