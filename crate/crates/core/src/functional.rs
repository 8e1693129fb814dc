//! Linear functionals on the native space: point evaluations and Radon line
//! integrals `R_{r,theta} f = \int f(r cos t - s sin t, r sin t + s cos t) ds`.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::kernel::Point;

#[derive(Clone, Copy, Debug)]
pub enum Functional {
    /// Dirac evaluation `f -> f(x)`.
    PointEval(Point),
    /// Line integral at signed distance `r` with normal angle `theta` in `[0, pi)`.
    RadonLine { r: f64, theta: f64 },
}

fn canon_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

impl Functional {
    pub fn point(p: Point) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite point {p:?}")));
        }
        let coords: Vec<f64> = p.coords().iter().map(|&c| canon_zero(c)).collect();
        Ok(Functional::PointEval(Point::from_slice(&coords)?))
    }

    /// Builds a Radon functional, folding `theta` into `[0, pi)`. Each
    /// half-turn flips the sign of `r`, since `(r, t)` and `(-r, t + pi)`
    /// describe the same line.
    pub fn radon(r: f64, theta: f64) -> Result<Self> {
        if !r.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite Radon parameters (r = {r}, theta = {theta})"
            )));
        }
        let turns = (theta / PI).floor();
        let mut t = theta - turns * PI;
        let mut flip = turns.rem_euclid(2.0) != 0.0;
        if t >= PI {
            t -= PI;
            flip = !flip;
        }
        if t < 0.0 {
            t = 0.0;
        }
        let r = if flip { -r } else { r };
        Ok(Functional::RadonLine {
            r: canon_zero(r),
            theta: canon_zero(t),
        })
    }

    pub fn is_radon(&self) -> bool {
        matches!(self, Functional::RadonLine { .. })
    }

    fn kind_tag(&self) -> u8 {
        match self {
            Functional::PointEval(_) => 0,
            Functional::RadonLine { .. } => 1,
        }
    }

    fn params(&self) -> [f64; 3] {
        match *self {
            Functional::PointEval(p) => [p.x(), p.y(), p.dim() as f64],
            Functional::RadonLine { r, theta } => [r, theta, 0.0],
        }
    }

    /// Total order used to canonicalize unordered pairs.
    pub fn canonical_cmp(&self, other: &Functional) -> Ordering {
        self.kind_tag().cmp(&other.kind_tag()).then_with(|| {
            let (a, b) = (self.params(), other.params());
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

impl PartialEq for Functional {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_cmp(other) == Ordering::Equal
    }
}

impl Eq for Functional {}

impl Hash for Functional {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind_tag().hash(state);
        for p in self.params() {
            p.to_bits().hash(state);
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::PointEval(p) => write!(f, "point{:?}", p.coords()),
            Functional::RadonLine { r, theta } => write!(f, "radon(r={r}, theta={theta})"),
        }
    }
}

/// The point at arc parameter `s` on the line of a Radon functional.
pub fn line_point(functional: &Functional, s: f64) -> Result<Point> {
    match *functional {
        Functional::RadonLine { r, theta } => {
            let (sin, cos) = theta.sin_cos();
            Ok(Point::new2(r * cos - s * sin, r * sin + s * cos))
        }
        Functional::PointEval(_) => Err(Error::InvalidArgument(
            "line_point called on a point evaluation".into(),
        )),
    }
}

/// Metric on Radon parameters `(r, theta)`, periodic in `theta` with period pi.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterMetric {
    pub angle_scale: f64,
}

impl Default for ParameterMetric {
    fn default() -> Self {
        ParameterMetric { angle_scale: 1.0 }
    }
}

impl ParameterMetric {
    pub fn new(angle_scale: f64) -> Result<Self> {
        if !(angle_scale >= 0.0 && angle_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "angle scale must be nonnegative, got {angle_scale}"
            )));
        }
        Ok(ParameterMetric { angle_scale })
    }

    pub fn distance(&self, a: &Functional, b: &Functional) -> Result<f64> {
        match (*a, *b) {
            (
                Functional::RadonLine { r: ra, theta: ta },
                Functional::RadonLine { r: rb, theta: tb },
            ) => {
                let d = (ta - tb).abs();
                let dtheta = d.min(PI - d).max(0.0);
                let dr = ra - rb;
                Ok((dr * dr + self.angle_scale * self.angle_scale * dtheta * dtheta).sqrt())
            }
            _ => Err(Error::InvalidArgument(
                "parameter distance is only defined between Radon functionals".into(),
            )),
        }
    }
}

/// Free-function form of [`ParameterMetric::distance`].
pub fn parameter_distance(metric: &ParameterMetric, a: &Functional, b: &Functional) -> Result<f64> {
    metric.distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn line_point_examples() {
        let p = line_point(&Functional::radon(0.0, 0.0).unwrap(), 0.0).unwrap();
        assert_eq!(p.coords(), &[0.0, 0.0]);
        let p = line_point(&Functional::radon(1.0, 0.0).unwrap(), 2.0).unwrap();
        assert_eq!(p.coords(), &[1.0, 2.0]);
        let p = line_point(&Functional::radon(1.0, PI / 2.0).unwrap(), 0.0).unwrap();
        assert!(close(p.x(), 0.0, 1e-15) && close(p.y(), 1.0, 1e-15));
    }

    #[test]
    fn line_point_rejects_point_eval() {
        let f = Functional::point(Point::new2(0.0, 0.0)).unwrap();
        assert!(line_point(&f, 1.0).is_err());
    }

    #[test]
    fn angle_normalization() {
        match Functional::radon(0.5, PI + 0.25).unwrap() {
            Functional::RadonLine { r, theta } => {
                assert_eq!(r, -0.5);
                assert!(close(theta, 0.25, 1e-15));
            }
            _ => unreachable!(),
        }
        match Functional::radon(0.5, -0.25).unwrap() {
            Functional::RadonLine { r, theta } => {
                assert_eq!(r, -0.5);
                assert!(close(theta, PI - 0.25, 1e-15));
            }
            _ => unreachable!(),
        }
        match Functional::radon(0.5, 2.0 * PI + 0.1).unwrap() {
            Functional::RadonLine { r, theta } => {
                assert_eq!(r, 0.5);
                assert!(close(theta, 0.1, 1e-14));
            }
            _ => unreachable!(),
        }
        assert!(Functional::radon(f64::NAN, 0.0).is_err());
        assert_eq!(
            Functional::radon(-0.0, 0.0).unwrap(),
            Functional::radon(0.0, 0.0).unwrap()
        );
    }

    #[test]
    fn parameter_distance_examples() {
        let m = ParameterMetric::default();
        let a = Functional::radon(0.3, 1.0).unwrap();
        assert_eq!(m.distance(&a, &a).unwrap(), 0.0);
        let b = Functional::radon(0.1, 1.0).unwrap();
        assert!(close(m.distance(&a, &b).unwrap(), 0.2, 1e-15));
        let c = Functional::radon(0.0, 0.01).unwrap();
        let d = Functional::radon(0.0, PI - 0.01).unwrap();
        assert!(close(m.distance(&c, &d).unwrap(), 0.02, 1e-14));
        let p = Functional::point(Point::new2(0.0, 0.0)).unwrap();
        assert!(m.distance(&a, &p).is_err());
    }

    fn radon_strategy() -> impl Strategy<Value = Functional> {
        (-1.5f64..1.5, 0.0f64..PI).prop_map(|(r, t)| Functional::radon(r, t).unwrap())
    }

    proptest! {
        #[test]
        fn parameter_metric_axioms(
            a in radon_strategy(), b in radon_strategy(), c in radon_strategy(),
            scale in 0.0f64..3.0,
        ) {
            let m = ParameterMetric::new(scale).unwrap();
            let ab = m.distance(&a, &b).unwrap();
            prop_assert_eq!(ab, m.distance(&b, &a).unwrap());
            prop_assert_eq!(m.distance(&a, &a).unwrap(), 0.0);
            prop_assert!(ab >= 0.0);
            let ac = m.distance(&a, &c).unwrap();
            let cb = m.distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn line_points_are_collinear(
            f in radon_strategy(),
            s in (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0),
        ) {
            let p = [s.0, s.1, s.2].map(|s| line_point(&f, s).unwrap());
            let cross = (p[1].x() - p[0].x()) * (p[2].y() - p[0].y())
                - (p[1].y() - p[0].y()) * (p[2].x() - p[0].x());
            prop_assert!(cross.abs() <= 1e-12);
        }
    }
}
