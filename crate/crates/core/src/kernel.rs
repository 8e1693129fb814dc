//! Positive definite kernels on R^d (d = 1 or 2) and the weighted wrapper
//! `K_w(x, y) = w(x) K(x, y) w(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in R^1 or R^2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 2],
    dim: u8,
}

impl Point {
    pub fn new1(x: f64) -> Self {
        Point { coords: [x, 0.0], dim: 1 }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Point { coords: [x, y], dim: 2 }
    }

    pub fn from_slice(xs: &[f64]) -> Result<Self> {
        match *xs {
            [x] => Ok(Point::new1(x)),
            [x, y] => Ok(Point::new2(x, y)),
            _ => Err(Error::InvalidArgument(format!(
                "points must have dimension 1 or 2, got {}",
                xs.len()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords().iter().map(|c| c * c).sum()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }
}

/// Radially symmetric kernel families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// `exp(-alpha |x - y|^2)`
    Gaussian { alpha: f64 },
    /// `exp(-alpha |x - y|)`, a rough kernel of finite smoothness.
    Exponential { alpha: f64 },
}

impl KernelFamily {
    pub fn alpha(&self) -> f64 {
        match *self {
            KernelFamily::Gaussian { alpha } | KernelFamily::Exponential { alpha } => alpha,
        }
    }

    fn eval_dist_sq(&self, d2: f64) -> f64 {
        match *self {
            KernelFamily::Gaussian { alpha } => (-alpha * d2).exp(),
            KernelFamily::Exponential { alpha } => (-alpha * d2.sqrt()).exp(),
        }
    }
}

/// Gaussian weight `w(x) = exp(-beta |x|^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub beta: f64,
}

impl WeightFunction {
    pub fn gaussian(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight shape must be positive and finite, got {beta}"
            )));
        }
        Ok(WeightFunction { beta })
    }

    pub fn eval(&self, x: &Point) -> f64 {
        (-self.beta * x.norm_sq()).exp()
    }
}

/// A symmetric positive definite kernel, optionally weighted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    weight: Option<WeightFunction>,
    dim: usize,
}

impl Kernel {
    pub fn new(family: KernelFamily, weight: Option<WeightFunction>, dim: usize) -> Result<Self> {
        let alpha = family.alpha();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel shape must be positive and finite, got {alpha}"
            )));
        }
        if let Some(w) = weight {
            WeightFunction::gaussian(w.beta)?;
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "kernel dimension must be 1 or 2, got {dim}"
            )));
        }
        Ok(Kernel { family, weight, dim })
    }

    pub fn gaussian(alpha: f64, dim: usize) -> Result<Self> {
        Kernel::new(KernelFamily::Gaussian { alpha }, None, dim)
    }

    pub fn exponential(alpha: f64, dim: usize) -> Result<Self> {
        Kernel::new(KernelFamily::Exponential { alpha }, None, dim)
    }

    /// The bivariate weighted Gaussian used for Radon data.
    pub fn weighted_gaussian(alpha: f64, beta: f64) -> Result<Self> {
        Kernel::new(
            KernelFamily::Gaussian { alpha },
            Some(WeightFunction::gaussian(beta)?),
            2,
        )
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn weight(&self) -> Option<WeightFunction> {
        self.weight
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Shape parameters `(alpha, beta)` when this is a weighted Gaussian.
    pub fn weighted_gaussian_params(&self) -> Option<(f64, f64)> {
        match (self.family, self.weight) {
            (KernelFamily::Gaussian { alpha }, Some(w)) => Some((alpha, w.beta)),
            _ => None,
        }
    }

    pub fn evaluate(&self, x: &Point, y: &Point) -> Result<f64> {
        if x.dim() != self.dim || y.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "kernel of dimension {} evaluated at points of dimension {} and {}",
                self.dim,
                x.dim(),
                y.dim()
            )));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluation without the dimension check.
    pub(crate) fn eval_unchecked(&self, x: &Point, y: &Point) -> f64 {
        let k = self.family.eval_dist_sq(x.dist_sq(y));
        match self.weight {
            // w(x) * w(y) first so that swapping the arguments is bit-exact.
            Some(w) => (w.eval(x) * w.eval(y)) * k,
            None => k,
        }
    }

    /// `K(x, y)` with the weight stripped.
    pub fn evaluate_unweighted(&self, x: &Point, y: &Point) -> Result<f64> {
        self.evaluate(x, y)?;
        Ok(self.family.eval_dist_sq(x.dist_sq(y)))
    }

    pub fn config(&self) -> KernelConfig {
        KernelConfig {
            family: match self.family {
                KernelFamily::Gaussian { .. } => "gaussian".into(),
                KernelFamily::Exponential { .. } => "exponential".into(),
            },
            alpha: self.family.alpha(),
            weight_beta: self.weight.map(|w| w.beta),
            dimension: self.dim,
        }
    }
}

/// Serializable kernel description `{family, alpha, weight_beta?, dimension}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: String,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_beta: Option<f64>,
    pub dimension: usize,
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel> {
        let family = match self.family.to_ascii_lowercase().as_str() {
            "gaussian" => KernelFamily::Gaussian { alpha: self.alpha },
            "exponential" => KernelFamily::Exponential { alpha: self.alpha },
            other => {
                return Err(Error::Config(format!("unknown kernel family `{other}`")));
            }
        };
        let weight = self.weight_beta.map(WeightFunction::gaussian).transpose()?;
        Kernel::new(family, weight, self.dimension)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn gaussian_at_coincident_origin_is_one() {
        let k = Kernel::gaussian(1.0, 2).unwrap();
        let o = Point::new2(0.0, 0.0);
        assert_eq!(k.evaluate(&o, &o).unwrap(), 1.0);
        let kw = Kernel::weighted_gaussian(2000.0, 1.5).unwrap();
        assert_eq!(kw.evaluate(&o, &o).unwrap(), 1.0);
    }

    #[test]
    fn weighted_gaussian_on_diagonal() {
        let kw = Kernel::weighted_gaussian(2000.0, 1.5).unwrap();
        let x = Point::new2(0.1, 0.0);
        let v = kw.evaluate(&x, &x).unwrap();
        assert!((v - (-0.03f64).exp()).abs() <= 1e-16);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = Kernel::gaussian(1.0, 2).unwrap();
        let err = k.evaluate(&Point::new1(0.0), &Point::new2(0.0, 0.0));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_positive_shapes_are_rejected() {
        assert!(Kernel::gaussian(0.0, 2).is_err());
        assert!(Kernel::exponential(-1.0, 1).is_err());
        assert!(Kernel::weighted_gaussian(1.0, 0.0).is_err());
        assert!(Kernel::gaussian(f64::NAN, 2).is_err());
        assert!(Kernel::gaussian(1.0, 3).is_err());
    }

    #[test]
    fn weight_bounds() {
        let w = WeightFunction::gaussian(1.5).unwrap();
        assert_eq!(w.eval(&Point::new2(0.0, 0.0)), 1.0);
        let v = w.eval(&Point::new2(3.0, -2.0));
        assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn config_round_trip() {
        let k = Kernel::weighted_gaussian(2000.0, 1.5).unwrap();
        assert_eq!(k.config().build().unwrap(), k);
        let bad = KernelConfig {
            family: "matern".into(),
            alpha: 1.0,
            weight_beta: None,
            dimension: 2,
        };
        assert!(bad.build().is_err());
    }

    fn kernels() -> Vec<Kernel> {
        vec![
            Kernel::gaussian(3.0, 2).unwrap(),
            Kernel::exponential(2.0, 2).unwrap(),
            Kernel::weighted_gaussian(200.0, 1.5).unwrap(),
            Kernel::new(
                KernelFamily::Exponential { alpha: 5.0 },
                Some(WeightFunction::gaussian(0.5).unwrap()),
                2,
            )
            .unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn symmetric_and_weight_consistent(
            x in (-2.0f64..2.0, -2.0f64..2.0),
            y in (-2.0f64..2.0, -2.0f64..2.0),
        ) {
            let (x, y) = (Point::new2(x.0, x.1), Point::new2(y.0, y.1));
            for k in kernels() {
                let kxy = k.evaluate(&x, &y).unwrap();
                prop_assert_eq!(kxy, k.evaluate(&y, &x).unwrap());
                prop_assert!(k.evaluate(&x, &x).unwrap() > 0.0);
                if let Some(w) = k.weight() {
                    let expect = w.eval(&x) * k.evaluate_unweighted(&x, &y).unwrap() * w.eval(&y);
                    // Relative precision is lost only once the value is subnormal.
                    prop_assert!((kxy - expect).abs() <= 1e-14 * expect.abs() + f64::MIN_POSITIVE);
                }
            }
        }

        #[test]
        fn kernel_matrices_are_numerically_psd(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..=12)
        ) {
            let pts: Vec<Point> = pts.into_iter().map(|(a, b)| Point::new2(a, b)).collect();
            for k in kernels() {
                let n = pts.len();
                let a = DMatrix::from_fn(n, n, |i, j| k.evaluate(&pts[i], &pts[j]).unwrap());
                let eig = a.symmetric_eigenvalues();
                let max = eig.max();
                prop_assert!(eig.min() > -1e-10 * max);
            }
        }
    }
}
