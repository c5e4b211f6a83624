//! Run configuration: TOML files with sections, and the built-in presets.
//!
//! Unset keys take the defaults below (domain radius 3, α = 1, μ_out = 1,
//! ζ = 0.3, data mesh 0.05, inversion mesh 0.1).

use std::path::{Path, PathBuf};

use dotshape::fem::{BoundaryMask, Coefficients, SourceSpec};
use dotshape::gradients::KernelVariant;
use dotshape::optimizer::{MuGradient, OptimizerConfig, Regularization};
use dotshape::synth::{NoiseSpec, DATA_MESH_SEED};
use dotshape::ParametricCurve;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Built-in presets, `(name, TOML text)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("radial-constant-f", include_str!("../presets/radial-constant-f.toml")),
    ("radial-constant-f-noisy", include_str!("../presets/radial-constant-f-noisy.toml")),
    ("radial-balancing", include_str!("../presets/radial-balancing.toml")),
    ("radial-point-source", include_str!("../presets/radial-point-source.toml")),
    ("radial-point-source-b08", include_str!("../presets/radial-point-source-b08.toml")),
    ("flower-exact", include_str!("../presets/flower-exact.toml")),
    ("flower-noisy", include_str!("../presets/flower-noisy.toml")),
    ("flower-point-source", include_str!("../presets/flower-point-source.toml")),
    ("fan", include_str!("../presets/fan.toml")),
    ("boomer", include_str!("../presets/boomer.toml")),
    ("square", include_str!("../presets/square.toml")),
    ("inverted-t", include_str!("../presets/inverted-t.toml")),
    ("peanut-constant-f", include_str!("../presets/peanut-constant-f.toml")),
    ("multisource-8", include_str!("../presets/multisource-8.toml")),
    ("multisource-peanut", include_str!("../presets/multisource-peanut.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub domain: DomainConfig,
    /// Interface generating synthetic data; also the Hausdorff reference.
    pub exact: Option<ParametricCurve>,
    pub initial: ParametricCurve,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    pub source: SourceSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "default_radius")]
    pub radius: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { radius: default_radius() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub mu_out: f64,
    /// Exact μ_in used for synthetic data.
    #[serde(default = "default_mu_in")]
    pub mu_in: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Starting value of μ_in for the inversion.
    #[serde(default = "default_mu_in_initial")]
    pub mu_in_initial: f64,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig {
            alpha: 1.0,
            mu_out: 1.0,
            mu_in: default_mu_in(),
            zeta: default_zeta(),
            mu_in_initial: default_mu_in_initial(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Measurement CSV with a JSON sidecar; synthesized when absent.
    pub file: Option<PathBuf>,
    /// Measured arcs `[start, end)` in normalized arc length.
    pub mask: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_h_fine")]
    pub h_fine: f64,
    #[serde(default = "default_h_inv")]
    pub h_inv: f64,
    /// Lattice seed of the inversion mesh.
    #[serde(default = "one_u64")]
    pub seed: u64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { h_fine: default_h_fine(), h_inv: default_h_inv(), seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub s: f64,
    /// Fixed Tikhonov weight; exclusive with `beta`.
    pub rho: Option<f64>,
    /// Balancing-principle constant; exclusive with `rho`.
    pub beta: Option<f64>,
    #[serde(default)]
    pub rho1: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_mu_min")]
    pub mu_min: f64,
    #[serde(default = "default_mu_max")]
    pub mu_max: f64,
    #[serde(default = "default_shrink")]
    pub shrink_when_cost_below: f64,
    #[serde(default)]
    pub variant: KernelVariant,
    #[serde(default)]
    pub mu_gradient: MuGradient,
    #[serde(default = "one")]
    pub mu_step_scale: f64,
    /// Armijo constant; the decrease test is skipped when `decrease_test` is false.
    #[serde(default = "default_armijo")]
    pub armijo: f64,
    #[serde(default = "yes")]
    pub decrease_test: bool,
    /// Abort when a step leaves a triangle angle below this (degrees).
    #[serde(default)]
    pub min_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Defaults to `runs/<name>`.
    pub dir: Option<PathBuf>,
    /// Write VTK fields every this many iterations; 0 disables.
    #[serde(default)]
    pub vtk_every: usize,
    #[serde(default = "yes")]
    pub polylines: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, vtk_every: 0, polylines: true }
    }
}

fn default_radius() -> f64 {
    3.0
}
fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn yes() -> bool {
    true
}
fn default_mu_in() -> f64 {
    1.2
}
fn default_zeta() -> f64 {
    0.3
}
fn default_mu_in_initial() -> f64 {
    1.1
}
fn default_h_fine() -> f64 {
    0.05
}
fn default_h_inv() -> f64 {
    0.1
}
fn default_t0() -> f64 {
    1e-12
}
fn default_max_iters() -> usize {
    500
}
fn default_mu_min() -> f64 {
    1e-3
}
fn default_mu_max() -> f64 {
    1e3
}
fn default_shrink() -> f64 {
    1e-3
}
fn default_armijo() -> f64 {
    1e-4
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1));
            CliError::Parse { line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<RunConfig, CliError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| invalid(format!("unknown preset {name:?}")))?;
        RunConfig::parse(text)
    }

    /// A path to a TOML file, or a preset name.
    pub fn load(arg: &str) -> Result<RunConfig, CliError> {
        let path = Path::new(arg);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {arg}: {e}")))?;
            RunConfig::parse(&text)
        } else if PRESETS.iter().any(|(n, _)| *n == arg) {
            RunConfig::preset(arg)
        } else {
            Err(invalid(format!("{arg:?} is neither a config file nor a known preset")))
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name must be non-empty and contain no path separators"));
        }
        let r = self.domain.radius;
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid(format!("domain radius must be positive, got {r}")));
        }
        self.true_coefficients().validate()?;
        self.initial_coefficients().validate()?;
        self.source.validate(r)?;
        self.initial.validate()?;
        if let Some(e) = &self.exact {
            e.validate()?;
        }
        if self.exact.is_none() && self.data.file.is_none() {
            return Err(invalid("either an exact interface or a data file is required"));
        }
        NoiseSpec::new(self.noise.gamma, self.noise.seed)?;
        if let Some(arcs) = &self.data.mask {
            BoundaryMask::new(arcs.clone())?;
        }
        let m = &self.mesh;
        if !(m.h_inv > 0.0 && m.h_inv < r) {
            return Err(invalid(format!("h_inv must lie in (0, {r}), got {}", m.h_inv)));
        }
        if self.data.file.is_none() && !(m.h_fine > 0.0 && m.h_fine <= 0.5 * m.h_inv) {
            return Err(invalid(format!(
                "h_fine must be positive and at most half of h_inv = {}, got {}",
                m.h_inv, m.h_fine
            )));
        }
        if m.seed == DATA_MESH_SEED {
            return Err(invalid("inversion mesh seed must differ from the data mesh seed"));
        }
        let o = &self.optimizer;
        match (o.rho, o.beta) {
            (Some(_), Some(_)) => return Err(invalid("set exactly one of optimizer.rho and optimizer.beta, not both")),
            (None, None) => return Err(invalid("set one of optimizer.rho or optimizer.beta")),
            _ => {}
        }
        if o.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(o.mu_min <= self.coefficients.mu_in_initial && self.coefficients.mu_in_initial <= o.mu_max) {
            return Err(invalid("mu_in_initial must lie within [mu_min, mu_max]"));
        }
        self.optimizer_config().validate()?;
        Ok(())
    }

    pub fn true_coefficients(&self) -> Coefficients {
        let c = &self.coefficients;
        Coefficients::new(c.alpha, c.mu_out, c.mu_in, c.zeta)
    }

    pub fn initial_coefficients(&self) -> Coefficients {
        self.true_coefficients()
            .with_mu_in(self.coefficients.mu_in_initial)
            .with_bounds(self.optimizer.mu_min, self.optimizer.mu_max)
    }

    pub fn mask(&self) -> Option<BoundaryMask> {
        self.data.mask.as_ref().map(|arcs| BoundaryMask { arcs: arcs.clone() })
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec { gamma: self.noise.gamma, seed: self.noise.seed }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        let regularization = match (o.rho, o.beta) {
            (_, Some(beta)) => Regularization::Balancing { beta },
            (rho, None) => Regularization::Fixed { rho: rho.unwrap_or(0.0) },
        };
        OptimizerConfig {
            s: o.s,
            regularization,
            rho1: o.rho1,
            t0: o.t0,
            max_iters: o.max_iters,
            mu_bounds: (o.mu_min, o.mu_max),
            shrink_when_cost_below: o.shrink_when_cost_below,
            variant: o.variant,
            mu_step_scale: o.mu_step_scale,
            mu_gradient: o.mu_gradient,
            armijo: o.decrease_test.then_some(o.armijo),
            min_angle: o.min_angle,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[exact]
kind = "circle"
radius = 1.5
[initial]
kind = "circle"
radius = 2.0
[source]
kind = "constant"
value = 1.0
[optimizer]
s = 0.1
rho = 0.0
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.domain.radius, 3.0);
        assert_eq!(c.coefficients.zeta, 0.3);
        assert_eq!(c.coefficients.alpha, 1.0);
        assert_eq!(c.coefficients.mu_out, 1.0);
        assert_eq!(c.output_dir(), PathBuf::from("runs/t"));
    }

    #[test]
    fn all_presets_parse() {
        for (name, _) in PRESETS {
            let c = RunConfig::preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&c.name, name);
        }
    }

    #[test]
    fn preset_values() {
        let r = RunConfig::preset("radial-constant-f").unwrap();
        assert_eq!(r.optimizer.s, 0.1);
        assert_eq!(r.initial, ParametricCurve::circle(2.8));
        assert_eq!(r.coefficients.mu_in, 1.2);
        let f = RunConfig::preset("flower-exact").unwrap();
        assert_eq!((f.optimizer.rho, f.optimizer.s), (Some(0.0002), 4.0));
        let m = RunConfig::preset("multisource-8").unwrap();
        match m.source {
            SourceSpec::GaussianSum { count, epsilon, radius, ref angles, .. } => {
                assert_eq!((count, epsilon, radius), (8, 0.5, 2.99));
                for (i, a) in angles.iter().enumerate() {
                    assert!((a - std::f64::consts::PI * (i + 1) as f64 / 4.0).abs() < 1e-12);
                }
            }
            ref other => panic!("unexpected source {other:?}"),
        }
    }

    #[test]
    fn unknown_preset_and_bad_values() {
        assert!(matches!(RunConfig::load("no-such-preset"), Err(CliError::Validation(_))));
        let both = MINIMAL.replace("rho = 0.0", "rho = 0.0\nbeta = 2.0");
        assert!(matches!(RunConfig::parse(&both), Err(CliError::Validation(_))));
        let fine = MINIMAL.replace("[optimizer]", "[mesh]\nh_fine = 0.08\n[optimizer]");
        assert!(RunConfig::parse(&fine).is_err());
    }

    #[test]
    fn parse_errors_carry_line() {
        let bad = MINIMAL.replace("s = 0.1", "s = oops");
        let expected = bad.lines().position(|l| l.contains("oops")).unwrap() + 1;
        match RunConfig::parse(&bad) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, expected),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = MINIMAL.replace("s = 0.1", "s = 0.1\nsteps = 3");
        assert!(matches!(RunConfig::parse(&unknown), Err(CliError::Parse { .. })));
    }
}
