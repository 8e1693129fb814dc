//! Agreement checks between the closed forms and the quadrature oracles.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::functional::Functional;
use crate::kernel::{Kernel, Point};
use crate::pairing::PairingEngine;
use crate::phantom::{radon_quadrature, sinogram_quadrature_spec, Ellipse, EllipsePhantom};

/// Pairing combinations with a closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    PointPoint,
    PointRadon,
    RadonRadon,
}

impl PairKind {
    pub const ALL: [PairKind; 3] = [PairKind::PointPoint, PairKind::PointRadon, PairKind::RadonRadon];

    pub fn name(&self) -> &'static str {
        match self {
            PairKind::PointPoint => "point x point",
            PairKind::PointRadon => "point x radon",
            PairKind::RadonRadon => "radon x radon",
        }
    }
}

/// Outcome of one family of comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    /// Largest `|analytic - oracle|`.
    pub max_error: f64,
    /// Largest error divided by its allowed tolerance; at most 1 on success.
    pub worst_ratio: f64,
    pub passed: bool,
}

impl Check {
    fn from_errors(name: String, errors: &[(f64, f64)]) -> Self {
        let max_error = errors.iter().map(|e| e.0).fold(0.0, f64::max);
        let worst_ratio = errors.iter().map(|(e, tol)| e / tol).fold(0.0, f64::max);
        Check {
            name,
            instances: errors.len(),
            max_error,
            worst_ratio,
            passed: errors.iter().all(|(e, tol)| e <= tol),
        }
    }
}

fn random_functional(rng: &mut ChaCha8Rng, radon: bool) -> Functional {
    if radon {
        Functional::radon(rng.gen_range(-SQRT_2..SQRT_2), rng.gen_range(0.0..PI)).expect("finite")
    } else {
        Functional::point(Point::new2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .expect("finite")
    }
}

/// Compares analytic and quadrature pairings on `instances` random pairs;
/// tolerance `1e-8 + 1e-8 |analytic|`.
pub fn pairing_agreement(kind: PairKind, alpha: f64, beta: f64, instances: usize, seed: u64) -> Result<Check> {
    let kernel = Kernel::weighted_gaussian(alpha, beta)?;
    let exact = PairingEngine::analytic(kernel).without_cache();
    let oracle = PairingEngine::quadrature(kernel)?.without_cache();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Functional, Functional)> = (0..instances)
        .map(|_| {
            let (a, b) = match kind {
                PairKind::PointPoint => (false, false),
                PairKind::PointRadon => (false, true),
                PairKind::RadonRadon => (true, true),
            };
            (random_functional(&mut rng, a), random_functional(&mut rng, b))
        })
        .collect();
    let errors: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|(f, g)| {
            let a = exact.pairing(f, g)?;
            let q = oracle.pairing(f, g)?;
            Ok(((a - q).abs(), 1e-8 + 1e-8 * a.abs()))
        })
        .collect::<Result<_>>()?;
    Ok(Check::from_errors(
        format!("{} (alpha={alpha}, beta={beta})", kind.name()),
        &errors,
    ))
}

/// Exact sinogram of the Shepp-Logan phantom against line quadrature on
/// `lines` random lines, to `1e-8` absolute.
pub fn sinogram_agreement(lines: usize, seed: u64, modified: bool) -> Result<Check> {
    let phantom = EllipsePhantom::shepp_logan(modified);
    let spec = sinogram_quadrature_spec(1e-10)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64)> = (0..lines)
        .map(|_| (rng.gen_range(-SQRT_2..SQRT_2), rng.gen_range(0.0..PI)))
        .collect();
    let errors: Vec<(f64, f64)> = params
        .par_iter()
        .map(|&(r, t)| {
            let q = radon_quadrature(&phantom, r, t, &spec)?.value;
            Ok(((phantom.radon(r, t) - q).abs(), 1e-8))
        })
        .collect::<Result<_>>()?;
    Ok(Check::from_errors("shepp-logan sinogram".into(), &errors))
}

/// Chords of the unit disk against `2 sqrt(1 - r^2)`, to `1e-12`.
pub fn unit_disk_chords(lines: usize, seed: u64) -> Result<Check> {
    let disk = EllipsePhantom::new(vec![Ellipse::new([0.0, 0.0], [1.0, 1.0], 0.0, 1.0)?])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = vec![((disk.radon(0.0, 0.0) - 2.0).abs(), 1e-12)];
    for _ in 0..lines {
        let (r, t): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..PI));
        let expect = 2.0 * (1.0 - r * r).sqrt();
        errors.push(((disk.radon(r, t) - expect).abs(), 1e-12));
    }
    Ok(Check::from_errors("unit disk chords".into(), &errors))
}

/// The parameter grid of the full suite.
pub const ALPHAS: [f64; 3] = [10.0, 200.0, 2000.0];
pub const BETAS: [f64; 2] = [0.5, 1.5];

/// Every check: all pairing kinds over [`ALPHAS`] x [`BETAS`], the
/// sinogram, and the disk chords.
pub fn run_suite(instances: usize, lines: usize, seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut k = 0;
    for kind in PairKind::ALL {
        for alpha in ALPHAS {
            for beta in BETAS {
                checks.push(pairing_agreement(kind, alpha, beta, instances, seed.wrapping_add(k))?);
                k += 1;
            }
        }
    }
    checks.push(sinogram_agreement(lines, seed.wrapping_add(k), false)?);
    checks.push(unit_disk_chords(lines, seed.wrapping_add(k + 1))?);
    Ok(checks)
}
