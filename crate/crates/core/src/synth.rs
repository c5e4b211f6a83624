//! Synthetic boundary data.
//!
//! Data come from a P2 solve on a finer mesh generated with a different
//! lattice seed, so the inversion never sees its own discretization.
//! Noise is added to the fine trace before it is interpolated onto the
//! inversion boundary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::measurement::boundary_trace;
use crate::fem::{BoundaryMask, Coefficients, FeSpace, Measurement, Order, SourceSpec};
use crate::geometry::ParametricCurve;
use crate::mesh::build_disk_mesh_seeded;
use crate::problems::solve_state_with_order;

/// Lattice seed of the data mesh. Inversion meshes use other seeds.
pub const DATA_MESH_SEED: u64 = 0x5eed_da7a;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation relative to `max |h|`.
    pub gamma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(gamma: f64, seed: u64) -> Result<NoiseSpec> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Invalid(format!("noise level must be non-negative, got {gamma}")));
        }
        Ok(NoiseSpec { gamma, seed })
    }
}

/// Boundary trace of the P2 state for the exact interface on a mesh of size
/// `h_fine`. `mask` is attached to the result and restricts the misfit.
pub fn generate_measurement(
    domain_radius: f64,
    exact: &ParametricCurve,
    c: &Coefficients,
    s: &SourceSpec,
    h_fine: f64,
    mask: Option<BoundaryMask>,
) -> Result<Measurement> {
    c.validate()?;
    s.validate(domain_radius)?;
    let mesh = build_disk_mesh_seeded(domain_radius, h_fine, exact, DATA_MESH_SEED)?;
    let u = solve_state_with_order(&mesh, c, s, Order::P2)?;
    let space = FeSpace::new(&mesh, Order::P2);
    let mut m = boundary_trace(&mesh, &space, &u, None)?;
    m.mask = mask;
    Ok(m)
}

/// Adds i.i.d. `Normal(0, (γ max|h|)²)` noise to every sample.
pub fn add_noise(h: &Measurement, noise: NoiseSpec) -> Result<Measurement> {
    if noise.gamma == 0.0 {
        return Ok(h.clone());
    }
    let sigma = noise.gamma * h.max_abs();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Invalid(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let values = h.values.iter().map(|v| v + normal.sample(&mut rng)).collect();
    Measurement::new(h.s.clone(), values, h.perimeter, h.mask.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> Measurement {
        let s = (0..n).map(|i| i as f64).collect();
        let v = (0..n).map(|i| 1.0 + (i as f64 * 0.01).sin()).collect();
        Measurement::new(s, v, n as f64, None).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let h = flat(50);
        assert_eq!(add_noise(&h, NoiseSpec::new(0.0, 3).unwrap()).unwrap(), h);
    }

    #[test]
    fn noise_is_reproducible() {
        let h = flat(100);
        let n = NoiseSpec::new(0.1, 42).unwrap();
        let a = add_noise(&h, n).unwrap();
        let b = add_noise(&h, n).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, add_noise(&h, NoiseSpec::new(0.1, 43).unwrap()).unwrap());
    }

    #[test]
    fn noise_has_requested_spread() {
        let h = flat(10_000);
        let noisy = add_noise(&h, NoiseSpec::new(0.1, 7).unwrap()).unwrap();
        let d: Vec<f64> = noisy.values.iter().zip(&h.values).map(|(a, b)| a - b).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        let target = 0.1 * h.max_abs();
        assert!((sd / target - 1.0).abs() < 0.05, "sd {sd} target {target}");
    }

    #[test]
    fn negative_gamma_rejected() {
        assert!(NoiseSpec::new(-0.1, 0).is_err());
    }

    #[test]
    fn radial_trace_is_constant() {
        let c = Coefficients::new(1.0, 1.0, 1.2, 0.3);
        let h = generate_measurement(
            3.0,
            &ParametricCurve::circle(1.5),
            &c,
            &SourceSpec::Constant { value: 1.0 },
            0.05,
            None,
        )
        .unwrap();
        let (lo, hi) = h.values.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!((hi - lo) / hi < 1e-3, "spread {}", (hi - lo) / hi);
    }
}
