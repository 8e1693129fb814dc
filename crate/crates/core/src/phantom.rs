//! Ellipse phantoms, their exact Radon transform, and random sampling of
//! Radon data.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::newton::CandidateSet;
use crate::quadrature::{line_integral, Estimate, QuadratureSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Semi-axes along the rotated x and y directions.
    pub axes: [f64; 2],
    /// Counterclockwise rotation in radians.
    pub phi: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub fn new(center: [f64; 2], axes: [f64; 2], phi: f64, intensity: f64) -> Result<Self> {
        let finite = center.iter().chain(&axes).all(|v| v.is_finite())
            && phi.is_finite()
            && intensity.is_finite();
        if !finite || axes[0] <= 0.0 || axes[1] <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid ellipse center={center:?} axes={axes:?} phi={phi}"
            )));
        }
        Ok(Ellipse {
            center,
            axes,
            phi,
            intensity,
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi.sin_cos();
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let u = (dx * c + dy * s) / self.axes[0];
        let v = (-dx * s + dy * c) / self.axes[1];
        u * u + v * v <= 1.0
    }

    /// Length of the chord cut from the ellipse by the line `(r, theta)`.
    pub fn chord(&self, r: f64, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let shifted = r - (self.center[0] * c + self.center[1] * s);
        let (sp, cp) = (theta - self.phi).sin_cos();
        let (a, b) = (self.axes[0], self.axes[1]);
        let w2 = a * a * cp * cp + b * b * sp * sp;
        let gap = w2 - shifted * shifted;
        if gap <= 0.0 {
            0.0
        } else {
            2.0 * a * b * gap.sqrt() / w2
        }
    }

    /// Whether the ellipse lies inside the square `[-1, 1]^2`.
    pub fn in_unit_square(&self) -> bool {
        let (s, c) = self.phi.sin_cos();
        let (a, b) = (self.axes[0], self.axes[1]);
        let hx = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
        let hy = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
        self.center[0].abs() + hx <= 1.0 && self.center[1].abs() + hy <= 1.0
    }
}

/// A sum of constant-intensity ellipses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsePhantom {
    pub ellipses: Vec<Ellipse>,
}

// (a, b, x0, y0, phi in degrees); the standard 10-ellipse head table.
const SHEPP_LOGAN: [[f64; 5]; 10] = [
    [0.69, 0.92, 0.0, 0.0, 0.0],
    [0.6624, 0.874, 0.0, -0.0184, 0.0],
    [0.11, 0.31, 0.22, 0.0, -18.0],
    [0.16, 0.41, -0.22, 0.0, 18.0],
    [0.21, 0.25, 0.0, 0.35, 0.0],
    [0.046, 0.046, 0.0, 0.1, 0.0],
    [0.046, 0.046, 0.0, -0.1, 0.0],
    [0.046, 0.023, -0.08, -0.605, 0.0],
    [0.023, 0.023, 0.0, -0.606, 0.0],
    [0.023, 0.046, 0.06, -0.605, 0.0],
];
const SHEPP_LOGAN_INTENSITY: [f64; 10] = [2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01];
// Toft's higher-contrast intensities.
const MODIFIED_INTENSITY: [f64; 10] = [1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];

impl EllipsePhantom {
    pub fn new(ellipses: Vec<Ellipse>) -> Result<Self> {
        if let Some(e) = ellipses.iter().find(|e| !e.in_unit_square()) {
            return Err(Error::InvalidArgument(format!(
                "ellipse {e:?} leaves [-1, 1]^2"
            )));
        }
        Ok(EllipsePhantom { ellipses })
    }

    /// The Shepp-Logan head phantom; `modified` selects the high-contrast
    /// intensities.
    pub fn shepp_logan(modified: bool) -> Self {
        let rho = if modified {
            MODIFIED_INTENSITY
        } else {
            SHEPP_LOGAN_INTENSITY
        };
        let ellipses = SHEPP_LOGAN
            .iter()
            .zip(rho)
            .map(|(p, rho)| Ellipse {
                center: [p[2], p[3]],
                axes: [p[0], p[1]],
                phi: p[4].to_radians(),
                intensity: rho,
            })
            .collect();
        EllipsePhantom { ellipses }
    }

    /// The phantom that is identically zero.
    pub fn zero() -> Self {
        EllipsePhantom {
            ellipses: Vec::new(),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum()
    }

    /// Exact line integral over the line `(r, theta)`.
    pub fn radon(&self, r: f64, theta: f64) -> f64 {
        self.ellipses
            .iter()
            .fold(0.0, |acc, e| acc + e.intensity * e.chord(r, theta))
    }

    /// Values on the `g x g` grid of cell centers of `[-1, 1]^2`, row-major
    /// with the first row at the top (largest y).
    pub fn grid(&self, g: usize) -> Vec<f64> {
        let centers = grid_centers(g);
        (0..g * g)
            .into_par_iter()
            .map(|k| self.eval(centers[k % g], centers[g - 1 - k / g]))
            .collect()
    }
}

/// `g` cell-center coordinates of a uniform partition of `[-1, 1]`.
pub fn grid_centers(g: usize) -> Vec<f64> {
    (0..g).map(|i| -1.0 + (2.0 * i as f64 + 1.0) / g as f64).collect()
}

pub fn phantom_eval(phantom: &EllipsePhantom, x: f64, y: f64) -> f64 {
    phantom.eval(x, y)
}

pub fn radon_exact(phantom: &EllipsePhantom, r: f64, theta: f64) -> f64 {
    phantom.radon(r, theta)
}

/// Oracle for [`radon_exact`]: adaptive quadrature of the phantom along the
/// line over `[-R, R]`.
pub fn radon_quadrature(
    phantom: &EllipsePhantom,
    r: f64,
    theta: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let (s, c) = theta.sin_cos();
    line_integral(|t| phantom.eval(r * c - t * s, r * s + t * c), spec)
}

/// Default sinogram oracle spec: panels of width 2e-3 over `[-1.5, 1.5]`,
/// with endpoint checks for the jumps at ellipse boundaries.
pub fn sinogram_quadrature_spec(tolerance: f64) -> Result<QuadratureSpec> {
    let mut spec = QuadratureSpec::new(tolerance, 1.5)?
        .with_panels(1500)
        .discontinuous();
    spec.max_subdivisions = 100_000;
    Ok(spec)
}

/// Radon data `(r_i, theta_i, R_{r_i, theta_i} f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn functionals(&self) -> Result<Vec<Functional>> {
        self.radii
            .iter()
            .zip(&self.angles)
            .map(|(&r, &t)| Functional::radon(r, t))
            .collect()
    }

    pub fn to_candidates(&self) -> Result<CandidateSet> {
        CandidateSet::new(self.functionals()?, self.values.clone())
    }
}

/// Draws `n` lines uniformly from `[-sqrt 2, sqrt 2] x [0, pi)` (or
/// `[0, sqrt 2] x [0, pi)` with `positive_radii_only`) and samples the
/// phantom's Radon transform on them.
pub fn sample_functionals(
    phantom: &EllipsePhantom,
    n: usize,
    seed: u64,
    positive_radii_only: bool,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = if positive_radii_only { 0.0 } else { -SQRT_2 };
    let mut radii = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    for _ in 0..n {
        radii.push(rng.gen_range(lo..SQRT_2));
        angles.push(rng.gen_range(0.0..PI));
    }
    let values = radii
        .par_iter()
        .zip(angles.par_iter())
        .map(|(&r, &t)| phantom.radon(r, t))
        .collect();
    Ok(SampleSet {
        radii,
        angles,
        values,
        seed,
    })
}
