//! Adaptive Gauss-Kronrod (G7/K15) quadrature over truncated line windows.
//!
//! This module only depends on scalar integrands. The pairing oracles build
//! their integrands from plain kernel evaluations along sampled lines, so the
//! closed forms in [`crate::pairing`] are checked against an independent route.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] (paired) and XGK[7] (center).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerance, truncation window, and budget for the adaptive integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the total error estimate.
    pub tolerance: f64,
    /// Integration runs over `[-truncation, truncation]`.
    pub truncation: f64,
    /// Number of bisections allowed after the initial partition.
    pub max_subdivisions: usize,
    /// Uniform panels in the initial partition. Must be fine enough that
    /// the K15 nodes resolve the narrowest feature of the integrand.
    pub initial_panels: usize,
    /// Also sample panel endpoints and charge every jump between adjacent
    /// samples as error, since the Kronrod/Gauss difference can cancel on a
    /// jump. A strict bound for piecewise-constant integrands; features
    /// narrower than the node spacing still need enough initial panels.
    pub discontinuous: bool,
}

impl QuadratureSpec {
    pub fn new(tolerance: f64, truncation: f64) -> Result<Self> {
        QuadratureSpec {
            tolerance,
            truncation,
            max_subdivisions: 20_000,
            initial_panels: 16,
            discontinuous: false,
        }
        .validated()
    }

    pub fn with_panels(mut self, initial_panels: usize) -> Self {
        self.initial_panels = initial_panels.max(1);
        self
    }

    pub fn discontinuous(mut self) -> Self {
        self.discontinuous = true;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quadrature tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "truncation radius must be positive, got {}",
                self.truncation
            )));
        }
        if self.max_subdivisions < 1 || self.initial_panels < 1 {
            return Err(Error::InvalidArgument(
                "quadrature budget and panel count must be at least 1".into(),
            ));
        }
        Ok(self)
    }
}

/// Value and error estimate of a converged integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, ends: bool) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    // Samples left to right: a, the 15 nodes, b.
    let mut xs = [0.0; 17];
    let mut fs = [0.0; 17];
    xs[8] = center;
    fs[8] = f(center);
    let mut kronrod = WGK[7] * fs[8];
    let mut gauss = WG[3] * fs[8];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (lo, hi) = (f(center - dx), f(center + dx));
        (xs[1 + j], fs[1 + j]) = (center - dx, lo);
        (xs[15 - j], fs[15 - j]) = (center + dx, hi);
        kronrod += WGK[j] * (lo + hi);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mut error = ((kronrod - gauss) * half).abs();
    if ends {
        (xs[0], fs[0]) = (a, f(a));
        (xs[16], fs[16]) = (b, f(b));
        // A jump between two samples can sit anywhere in the gap.
        error += (1..17)
            .map(|i| (fs[i] - fs[i - 1]).abs() * (xs[i] - xs[i - 1]))
            .sum::<f64>();
    }
    (kronrod * half, error)
}

/// Adaptive quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    panels: usize,
    max_subdivisions: usize,
) -> Result<Estimate> {
    let width = (b - a) / panels as f64;
    let mut nodes: Vec<f64> = (0..panels).map(|i| a + width * i as f64).collect();
    nodes.push(b);
    integrate_partition(f, &nodes, tol, max_subdivisions, false)
}

/// Adaptive quadrature starting from the partition given by the sorted
/// breakpoints `nodes`, with one global error budget.
pub fn integrate_partition<F: FnMut(f64) -> f64>(
    mut f: F,
    nodes: &[f64],
    tol: f64,
    max_subdivisions: usize,
    discontinuous: bool,
) -> Result<Estimate> {
    let mut heap = BinaryHeap::with_capacity(nodes.len() + max_subdivisions + 1);
    let (mut total, mut err) = (0.0, 0.0);
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if !(hi > lo) {
            continue;
        }
        let (value, error) = gk15(&mut f, lo, hi, discontinuous);
        total += value;
        err += error;
        heap.push(Panel { a: lo, b: hi, value, error });
    }
    let mut splits = 0;
    while err > tol {
        if splits >= max_subdivisions {
            return Err(Error::Accuracy {
                value: total,
                estimate: err,
                tolerance: tol,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, mid, discontinuous);
        let (v2, e2) = gk15(&mut f, mid, worst.b, discontinuous);
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        splits += 1;
        // Re-sum to keep drift out of the running totals.
        if splits % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        } else {
            total += v1 + v2 - worst.value;
            err += e1 + e2 - worst.error;
        }
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    Ok(Estimate {
        value: panels.iter().map(|p| p.value).sum(),
        error: panels.iter().map(|p| p.error).sum(),
    })
}

/// Integral of `f(s)` over `[-R_t, R_t]`.
pub fn line_integral<F: FnMut(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<Estimate> {
    let r = spec.truncation;
    let panels = spec.initial_panels;
    let width = 2.0 * r / panels as f64;
    let mut nodes: Vec<f64> = (0..panels).map(|i| -r + width * i as f64).collect();
    nodes.push(r);
    integrate_partition(f, &nodes, spec.tolerance, spec.max_subdivisions, spec.discontinuous)
}

/// Integral over `[-R_t, R_t]` of an integrand that is negligible outside
/// `[center - half_width, center + half_width]`. The window gets panels at
/// the spec's resolution and the rest of the range a few coarse ones.
pub fn focused_line_integral<F: FnMut(f64) -> f64>(
    f: F,
    center: f64,
    half_width: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let r = spec.truncation;
    let lo = (center - half_width).max(-r);
    let hi = (center + half_width).min(r);
    if !(hi > lo) || hi - lo >= 2.0 * r {
        return line_integral(f, spec);
    }
    let h = 2.0 * r / spec.initial_panels as f64;
    let mut nodes = Vec::new();
    let mut push_uniform = |a: f64, b: f64, n: usize| {
        for i in 0..n {
            nodes.push(a + (b - a) * i as f64 / n as f64);
        }
    };
    push_uniform(-r, lo, 4);
    push_uniform(lo, hi, (((hi - lo) / h).ceil() as usize).max(4));
    push_uniform(hi, r, 4);
    nodes.push(r);
    integrate_partition(f, &nodes, spec.tolerance, spec.max_subdivisions, spec.discontinuous)
}

/// Iterated integral of `g(s, t)` over `[-R_t, R_t]^2`; the inner integrals
/// use a tenth of the outer tolerance.
pub fn double_line_integral<G: FnMut(f64, f64) -> f64>(
    mut g: G,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let inner = QuadratureSpec {
        tolerance: spec.tolerance / 10.0,
        ..*spec
    };
    let mut failure = None;
    let outer = line_integral(
        |t| match line_integral(|s| g(s, t), &inner) {
            Ok(e) => e.value,
            Err(err) => {
                let best = match err {
                    Error::Accuracy { value, .. } => value,
                    _ => f64::NAN,
                };
                failure.get_or_insert(err);
                best
            }
        },
        spec,
    )?;
    match failure {
        Some(err) => Err(err),
        None => Ok(outer),
    }
}

/// [`double_line_integral`] with focused windows: `inner(t)` gives the
/// window in `s` for each outer node `t`, and `outer` the window in `t`.
pub fn focused_double_line_integral<G, W>(
    mut g: G,
    inner: W,
    outer: Option<(f64, f64)>,
    spec: &QuadratureSpec,
) -> Result<Estimate>
where
    G: FnMut(f64, f64) -> f64,
    W: Fn(f64) -> (f64, f64),
{
    let inner_spec = QuadratureSpec {
        tolerance: spec.tolerance / 10.0,
        ..*spec
    };
    let mut failure = None;
    let mut h = |t: f64| {
        let (c, w) = inner(t);
        match focused_line_integral(|s| g(s, t), c, w, &inner_spec) {
            Ok(e) => e.value,
            Err(err) => {
                let best = match err {
                    Error::Accuracy { value, .. } => value,
                    _ => f64::NAN,
                };
                failure.get_or_insert(err);
                best
            }
        }
    };
    let est = match outer {
        Some((c, w)) => focused_line_integral(&mut h, c, w, spec)?,
        None => line_integral(&mut h, spec)?,
    };
    match failure {
        Some(err) => Err(err),
        None => Ok(est),
    }
}
