//! Dual pairings `<lambda, mu> = lambda^x mu^y K(x, y)`, Riesz representers,
//! dual distances, and Gram matrices.
//!
//! Under the weighted Gaussian `K_w(x, y) = exp(-b|x|^2 - a|x-y|^2 - b|y|^2)`
//! every integral involved is Gaussian, so all pairings have closed forms.
//! With `A = a + b` and `D(phi) = b(2a + b) + a^2 sin^2 phi` they read
//!
//! * point/point: `K_w(x, y)`
//! * line/point: `sqrt(pi/A) exp(-c v^2 - A (u - a r / A)^2 - c r^2)`, where
//!   `u = x.n`, `v = x.t` in the frame of the line and `c = b(2a + b)/A`
//! * line/line: `pi / sqrt(D) exp(-b(2a + b) S / D)` with `phi` the angle
//!   between the normals and
//!   `S = a((r1 - r2)^2 + 4 r1 r2 sin^2(phi/2)) + b(r1^2 + r2^2)`.
//!
//! Every exponent is written as a sum of nonpositive terms so no cancellation
//! occurs for large `a`. The [`PairingMode::Quadrature`] mode replaces the
//! closed forms by adaptive quadrature along the lines and is the oracle they
//! are tested against.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::{line_point, Functional};
use crate::kernel::{Kernel, Point};
use crate::quadrature::{focused_double_line_integral, focused_line_integral, QuadratureSpec};

/// How pairings are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairingMode {
    Analytic,
    Quadrature(QuadratureSpec),
}

// Half-widths, in standard deviations of the kernel peak, of the refined
// quadrature windows; the integrand is below exp(-64) outside them.
const PEAK_WIDTHS: f64 = 8.0;

/// Evaluates pairings for a fixed kernel, memoizing symmetric pairs.
#[derive(Debug)]
pub struct PairingEngine {
    kernel: Kernel,
    mode: PairingMode,
    cache: Option<RwLock<HashMap<(Functional, Functional), f64>>>,
}

impl Clone for PairingEngine {
    fn clone(&self) -> Self {
        PairingEngine {
            kernel: self.kernel,
            mode: self.mode,
            cache: self.cache.as_ref().map(|_| RwLock::new(HashMap::new())),
        }
    }
}

/// Default truncation radius: the slowest Gaussian decay `exp(-beta s^2)`
/// of a Radon integrand is below `exp(-37)` outside the window.
pub fn default_truncation(kernel: &Kernel) -> Option<f64> {
    kernel.weight().map(|w| (37.0 / w.beta).sqrt())
}

/// Default oracle spec for a kernel: tolerance 1e-11 and panels narrow
/// enough to resolve the `exp(-(alpha + beta) s^2)` peaks.
pub fn default_quadrature(kernel: &Kernel) -> Result<QuadratureSpec> {
    let truncation = default_truncation(kernel).ok_or_else(|| {
        Error::UnsupportedPairing("quadrature pairings require a weighted kernel".into())
    })?;
    let rate = kernel.family().alpha() + kernel.weight().map_or(0.0, |w| w.beta);
    let width = 2.0 / rate.sqrt();
    let panels = ((2.0 * truncation / width).ceil() as usize).max(16);
    Ok(QuadratureSpec::new(1e-11, truncation)?.with_panels(panels))
}

impl PairingEngine {
    pub fn new(kernel: Kernel, mode: PairingMode) -> Self {
        PairingEngine {
            kernel,
            mode,
            cache: Some(RwLock::new(HashMap::new())),
        }
    }

    pub fn analytic(kernel: Kernel) -> Self {
        PairingEngine::new(kernel, PairingMode::Analytic)
    }

    /// An engine that evaluates every pairing by quadrature with the default spec.
    pub fn quadrature(kernel: Kernel) -> Result<Self> {
        Ok(PairingEngine::new(
            kernel,
            PairingMode::Quadrature(default_quadrature(&kernel)?),
        ))
    }

    /// Disables memoization (for long greedy runs the candidate columns are
    /// never revisited).
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mode(&self) -> PairingMode {
        self.mode
    }

    pub fn cached_len(&self) -> usize {
        self.cache
            .as_ref()
            .map_or(0, |c| c.read().expect("pairing cache poisoned").len())
    }

    /// Checks that `f` has a pairing under this engine's kernel.
    pub fn check_supported(&self, f: &Functional) -> Result<()> {
        match f {
            Functional::PointEval(p) => {
                if p.dim() != self.kernel.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "point of dimension {} for kernel of dimension {}",
                        p.dim(),
                        self.kernel.dim()
                    )));
                }
                Ok(())
            }
            Functional::RadonLine { .. } => {
                if self.kernel.dim() == 2 && self.kernel.weighted_gaussian_params().is_some() {
                    Ok(())
                } else {
                    Err(Error::UnsupportedPairing(format!(
                        "{f} is not in the dual of the native space of {:?}; \
                         Radon functionals need a weighted Gaussian kernel in 2D",
                        self.kernel
                    )))
                }
            }
        }
    }

    /// The Riesz representer of `f` evaluated at `x`, i.e. `f^y K(x, y)`.
    pub fn representer_eval(&self, f: &Functional, x: &Point) -> Result<f64> {
        self.check_supported(f)?;
        if x.dim() != self.kernel.dim() {
            return Err(Error::InvalidArgument(format!(
                "evaluation point of dimension {} for kernel of dimension {}",
                x.dim(),
                self.kernel.dim()
            )));
        }
        match (*f, self.mode) {
            (Functional::PointEval(z), _) => Ok(self.kernel.eval_unchecked(x, &z)),
            (Functional::RadonLine { r, theta }, PairingMode::Analytic) => {
                let (alpha, beta) = self.weighted_params();
                Ok(radon_representer(alpha, beta, r, theta, x))
            }
            (Functional::RadonLine { r, theta }, PairingMode::Quadrature(spec)) => {
                let k = self.kernel;
                let (alpha, beta) = self.weighted_params();
                let line = Functional::RadonLine { r, theta };
                // The integrand peaks at the foot of the perpendicular from x.
                let (sin, cos) = theta.sin_cos();
                let foot = -x.x() * sin + x.y() * cos;
                let est = focused_line_integral(
                    |s| k.eval_unchecked(x, &line_point(&line, s).expect("radon line")),
                    alpha * foot / (alpha + beta),
                    PEAK_WIDTHS / (alpha + beta).sqrt(),
                    &spec,
                )?;
                Ok(est.value)
            }
        }
    }

    /// `<f, g>` in the dual space, symmetric bit-for-bit in its arguments.
    pub fn pairing(&self, f: &Functional, g: &Functional) -> Result<f64> {
        let (a, b) = if f.canonical_cmp(g).is_le() { (f, g) } else { (g, f) };
        if let Some(cache) = &self.cache {
            if let Some(v) = cache.read().expect("pairing cache poisoned").get(&(*a, *b)) {
                return Ok(*v);
            }
        }
        let v = self.pairing_ordered(a, b)?;
        if let Some(cache) = &self.cache {
            cache
                .write()
                .expect("pairing cache poisoned")
                .insert((*a, *b), v);
        }
        Ok(v)
    }

    /// Like [`pairing`](Self::pairing) but bypasses the cache.
    pub fn pairing_uncached(&self, f: &Functional, g: &Functional) -> Result<f64> {
        let (a, b) = if f.canonical_cmp(g).is_le() { (f, g) } else { (g, f) };
        self.pairing_ordered(a, b)
    }

    fn pairing_ordered(&self, a: &Functional, b: &Functional) -> Result<f64> {
        self.check_supported(a)?;
        self.check_supported(b)?;
        match (*a, *b) {
            (Functional::PointEval(x), Functional::PointEval(y)) => {
                Ok(self.kernel.eval_unchecked(&x, &y))
            }
            (Functional::PointEval(x), line @ Functional::RadonLine { .. })
            | (line @ Functional::RadonLine { .. }, Functional::PointEval(x)) => {
                self.representer_eval(&line, &x)
            }
            (
                l1 @ Functional::RadonLine { r: r1, theta: t1 },
                l2 @ Functional::RadonLine { r: r2, theta: t2 },
            ) => match self.mode {
                PairingMode::Analytic => {
                    let (alpha, beta) = self.weighted_params();
                    Ok(radon_radon(alpha, beta, r1, t1, r2, t2))
                }
                PairingMode::Quadrature(spec) => {
                    let k = self.kernel;
                    let (alpha, beta) = self.weighted_params();
                    let (s1, c1) = t1.sin_cos();
                    let (s2, c2) = t2.sin_cos();
                    // Inner peak: foot of the perpendicular from q(t) onto line 1,
                    // pulled toward the origin by the weight.
                    let pull = alpha / (alpha + beta);
                    let inner_width = PEAK_WIDTHS / (alpha + beta).sqrt();
                    let inner = |t: f64| {
                        let q = line_point(&l2, t).expect("radon line");
                        (pull * (-q.x() * s1 + q.y() * c1), inner_width)
                    };
                    // Outer peak: where line 2 crosses line 1.
                    let cross = c1 * (-s2) + s1 * c2;
                    let outer = (cross.abs() > 1e-3).then(|| {
                        let t_star = (r1 - r2 * (c1 * c2 + s1 * s2)) / cross;
                        (t_star, PEAK_WIDTHS / (alpha.sqrt() * cross.abs()))
                    });
                    let est = focused_double_line_integral(
                        |s, t| {
                            let p = line_point(&l1, s).expect("radon line");
                            let q = line_point(&l2, t).expect("radon line");
                            k.eval_unchecked(&p, &q)
                        },
                        inner,
                        outer,
                        &spec,
                    )?;
                    Ok(est.value)
                }
            },
        }
    }

    /// Pairings of every functional in `fs` against `g`, computed in parallel
    /// without touching the cache.
    pub fn pairing_column(&self, fs: &[Functional], g: &Functional) -> Result<Vec<f64>> {
        fs.par_iter()
            .map(|f| self.pairing_uncached(f, g))
            .collect()
    }

    /// `||f - g||` in the dual space.
    pub fn dual_distance(&self, f: &Functional, g: &Functional) -> Result<f64> {
        if f == g {
            return Ok(0.0);
        }
        let ff = self.pairing(f, f)?;
        let gg = self.pairing(g, g)?;
        let fg = self.pairing(f, g)?;
        Ok((ff - 2.0 * fg + gg).max(0.0).sqrt())
    }

    pub fn gram(&self, functionals: &[Functional]) -> Result<GramMatrix> {
        let n = functionals.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let values: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| self.pairing(&functionals[i], &functionals[j]))
            .collect::<Result<_>>()?;
        let mut m = DMatrix::zeros(n, n);
        for (&(i, j), v) in pairs.iter().zip(values) {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Ok(GramMatrix {
            matrix: m,
            functionals: functionals.to_vec(),
        })
    }

    fn weighted_params(&self) -> (f64, f64) {
        self.kernel
            .weighted_gaussian_params()
            .expect("checked by check_supported")
    }
}

/// Representer of the line `(r, theta)` at `x` under the weighted Gaussian.
fn radon_representer(alpha: f64, beta: f64, r: f64, theta: f64, x: &Point) -> f64 {
    let a = alpha + beta;
    let c = beta * (2.0 * alpha + beta) / a;
    let (sin, cos) = theta.sin_cos();
    let u = x.x() * cos + x.y() * sin;
    let v = -x.x() * sin + x.y() * cos;
    let du = u - alpha * r / a;
    (PI / a).sqrt() * (-c * v * v - a * du * du - c * r * r).exp()
}

/// Pairing of two lines under the weighted Gaussian.
fn radon_radon(alpha: f64, beta: f64, r1: f64, t1: f64, r2: f64, t2: f64) -> f64 {
    let phi = t2 - t1;
    let sin_phi = phi.sin();
    let sin_half = (0.5 * phi).sin();
    let b2 = beta * (2.0 * alpha + beta);
    let det = b2 + alpha * alpha * sin_phi * sin_phi;
    let dr = r1 - r2;
    let spread = alpha * (dr * dr + 4.0 * r1 * r2 * sin_half * sin_half) + beta * (r1 * r1 + r2 * r2);
    PI / det.sqrt() * (-b2 * spread / det).exp()
}

/// Symmetric matrix of pairings of a list of functionals.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub matrix: DMatrix<f64>,
    pub functionals: Vec<Functional>,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cholesky(&self) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.matrix.clone().cholesky()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.matrix)
    }
}

/// Spectral condition number of a symmetric matrix; `+inf` when the smallest
/// eigenvalue is below `1e-14` times the largest.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(max > 0.0) || min <= 1e-14 * max {
        return f64::INFINITY;
    }
    (max / min).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::quadrature::{double_line_integral, line_integral};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kw() -> Kernel {
        Kernel::weighted_gaussian(2000.0, 1.5).unwrap()
    }

    fn radon(r: f64, t: f64) -> Functional {
        Functional::radon(r, t).unwrap()
    }

    fn point(x: f64, y: f64) -> Functional {
        Functional::point(Point::new2(x, y)).unwrap()
    }

    #[test]
    fn point_pairings() {
        let e = PairingEngine::analytic(kw());
        let z = point(0.0, 0.0);
        assert_eq!(e.pairing(&z, &z).unwrap(), 1.0);
        let (x, y) = (Point::new2(0.01, -0.02), Point::new2(0.03, 0.0));
        let v = e.representer_eval(&Functional::PointEval(y), &x).unwrap();
        assert_eq!(v, kw().evaluate(&x, &y).unwrap());
    }

    #[test]
    fn representer_matches_line_quadrature() {
        let e = PairingEngine::analytic(kw());
        let q = PairingEngine::quadrature(kw()).unwrap();
        let line = radon(0.0, 0.0);
        let x = Point::new2(0.5, 0.5);
        let a = e.representer_eval(&line, &x).unwrap();
        let b = q.representer_eval(&line, &x).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        // Also against an integrand written out by hand.
        let spec = default_quadrature(&kw()).unwrap();
        let k = kw();
        let c = line_integral(|s| k.evaluate(&x, &Point::new2(0.0, s)).unwrap(), &spec)
            .unwrap()
            .value;
        assert!((a - c).abs() <= 1e-10);
    }

    #[test]
    fn radon_pair_matches_double_quadrature() {
        let e = PairingEngine::analytic(kw());
        let q = PairingEngine::quadrature(kw()).unwrap();
        let (l1, l2) = (radon(0.2, 0.7), radon(-0.4, 2.1));
        let a = e.pairing(&l1, &l2).unwrap();
        let b = q.pairing(&l1, &l2).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        // The uniform partition, without the refined windows.
        let k = kw();
        let spec = default_quadrature(&k).unwrap();
        let c = double_line_integral(
            |s, t| k.evaluate(&line_point(&l1, s).unwrap(), &line_point(&l2, t).unwrap()).unwrap(),
            &spec,
        )
        .unwrap()
        .value;
        assert!((a - c).abs() <= 1e-10, "{a} vs {c}");
    }

    #[test]
    fn same_line_under_both_parameterizations() {
        let e = PairingEngine::analytic(kw());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (r, t) = (rng.gen_range(-1.4..1.4), rng.gen_range(0.0..PI));
            let (a, b) = (radon(r, t), radon(-r, t + PI));
            for _ in 0..5 {
                let x = Point::new2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let va = e.representer_eval(&a, &x).unwrap();
                let vb = e.representer_eval(&b, &x).unwrap();
                assert!((va - vb).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn unsupported_combinations() {
        let plain = PairingEngine::analytic(Kernel::gaussian(2000.0, 2).unwrap());
        let line = radon(0.1, 0.2);
        let err = plain.pairing(&line, &line).unwrap_err();
        assert!(matches!(err, Error::UnsupportedPairing(_)));
        let rough = PairingEngine::analytic(Kernel::exponential(3.0, 2).unwrap());
        assert!(matches!(
            rough.representer_eval(&line, &Point::new2(0.0, 0.0)),
            Err(Error::UnsupportedPairing(_))
        ));
        assert!(PairingEngine::quadrature(Kernel::exponential(3.0, 2).unwrap()).is_err());
        // Dirac functionals still work with the rough kernel.
        let (p, q) = (point(0.1, 0.2), point(0.3, -0.1));
        let d = rough.dual_distance(&p, &q).unwrap();
        let k = rough.kernel();
        let (x, y) = (Point::new2(0.1, 0.2), Point::new2(0.3, -0.1));
        let expect = (k.evaluate(&x, &x).unwrap() - 2.0 * k.evaluate(&x, &y).unwrap()
            + k.evaluate(&y, &y).unwrap())
        .sqrt();
        assert!((d - expect).abs() < 1e-15);
    }

    #[test]
    fn distance_to_self_is_zero() {
        let e = PairingEngine::analytic(kw());
        let l = radon(0.3, 1.1);
        assert_eq!(e.dual_distance(&l, &l).unwrap(), 0.0);
    }

    #[test]
    fn radon_distance_matches_representer_quadrature() {
        // ||g_l - g_m||^2 by integrating the representer difference along both lines.
        let e = PairingEngine::analytic(kw());
        let spec = default_quadrature(&kw()).unwrap();
        let (l, m) = (radon(0.11, 0.4), radon(0.09, 0.45));
        let diff = |p: Point| e.representer_eval(&l, &p).unwrap() - e.representer_eval(&m, &p).unwrap();
        let on_l = line_integral(|s| diff(line_point(&l, s).unwrap()), &spec).unwrap().value;
        let on_m = line_integral(|s| diff(line_point(&m, s).unwrap()), &spec).unwrap().value;
        let sq = on_l - on_m;
        let d = e.dual_distance(&l, &m).unwrap();
        assert!((d * d - sq).abs() <= 1e-8 * sq.abs(), "{} vs {}", d * d, sq);
    }

    #[test]
    fn gram_examples() {
        let e = PairingEngine::analytic(kw());
        let l = radon(0.1, 0.3);
        let g = e.gram(&[l]).unwrap();
        assert_eq!(g.matrix[(0, 0)], e.pairing(&l, &l).unwrap());
        let g = PairingEngine::analytic(Kernel::gaussian(1.0, 2).unwrap())
            .gram(&[
                point(0.0, 0.0),
                point(0.5, 0.0),
                point(0.0, 0.5),
                point(-0.3, 0.2),
                point(0.9, 0.9),
            ])
            .unwrap();
        assert!(g.cholesky().is_some());
        assert!(e.cached_len() > 0);
    }

    #[test]
    fn condition_number_examples() {
        assert_eq!(condition_number(&DMatrix::identity(3, 3)), 1.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]));
        assert!((condition_number(&d) - 4.0).abs() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(condition_number(&singular), f64::INFINITY);
    }

    #[test]
    fn condition_number_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: DMatrix<f64> = DMatrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let spd = b.transpose() * &b;
        let sv = b.singular_values();
        let expect = (sv.max() / sv.min()).powi(2);
        let got = condition_number(&spd);
        assert!(((got - expect) / expect).abs() <= 1e-8, "{got} vs {expect}");
    }

    fn line_strategy() -> impl Strategy<Value = Functional> {
        (-1.4f64..1.4, 0.0f64..PI).prop_map(|(r, t)| Functional::radon(r, t).unwrap())
    }

    proptest! {
        #[test]
        fn pairing_is_symmetric_and_cauchy_schwarz(a in line_strategy(), b in line_strategy(),
                                                   px in -1.0f64..1.0, py in -1.0f64..1.0) {
            let e = PairingEngine::analytic(kw()).without_cache();
            let p = point(px, py);
            for (f, g) in [(a, b), (a, p), (p, b)] {
                let fg = e.pairing(&f, &g).unwrap();
                prop_assert_eq!(fg, e.pairing(&g, &f).unwrap());
                let ff = e.pairing(&f, &f).unwrap();
                let gg = e.pairing(&g, &g).unwrap();
                prop_assert!(ff >= -1e-12 && gg >= -1e-12);
                prop_assert!(fg * fg <= ff * gg * (1.0 + 1e-12));
            }
        }

        #[test]
        fn dual_distance_triangle(a in line_strategy(), b in line_strategy(), c in line_strategy()) {
            let e = PairingEngine::analytic(kw());
            let ab = e.dual_distance(&a, &b).unwrap();
            let ac = e.dual_distance(&a, &c).unwrap();
            let cb = e.dual_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-10);
        }

        #[test]
        fn radon_gram_is_positive_definite(
            lines in proptest::collection::hash_set(((-140i32..140), (0i32..314)), 1..100)
        ) {
            let fs: Vec<Functional> = lines
                .into_iter()
                .map(|(r, t)| Functional::radon(r as f64 / 100.0, t as f64 / 100.0).unwrap())
                .collect();
            let e = PairingEngine::analytic(kw()).without_cache();
            let g = e.gram(&fs).unwrap();
            prop_assert!(g.cholesky().is_some());
            let sym = (&g.matrix - g.matrix.transpose()).abs().max();
            prop_assert!(sym <= 1e-14 * g.matrix.abs().max());
        }
    }
}
