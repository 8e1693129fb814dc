//! Incremental generalized interpolation in a Newton basis.
//!
//! The model keeps an orthonormal basis `v_1, ..., v_n` of the span of the
//! selected representers, stored as lower-triangular coefficients over those
//! representers. For every candidate functional it caches `lambda(v_j)`, the
//! squared power function, and the current residual, so adding one
//! functional costs one column of pairings plus `O(N n)` arithmetic.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{Functional, ParameterMetric};
use crate::kernel::{KernelConfig, Point};
use crate::pairing::PairingEngine;

/// Relative breakdown threshold: a functional is rejected when its power is
/// below this factor times the largest dual norm seen.
pub const DEFAULT_BREAKDOWN_FACTOR: f64 = 1e-7;

/// Relative drift below zero of a cached squared power that triggers a
/// recomputation from the normal equations.
const DRIFT_TOLERANCE: f64 = 1e-8;

/// A finite set of candidate functionals with their samples `lambda_i(f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    functionals: Vec<Functional>,
    samples: Vec<f64>,
}

impl CandidateSet {
    pub fn new(functionals: Vec<Functional>, samples: Vec<f64>) -> Result<Self> {
        if functionals.is_empty() {
            return Err(Error::InvalidArgument("candidate set is empty".into()));
        }
        if functionals.len() != samples.len() {
            return Err(Error::InvalidArgument(format!(
                "{} functionals but {} samples",
                functionals.len(),
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {i} is not finite")));
        }
        let mut seen = HashMap::with_capacity(functionals.len());
        for (i, f) in functionals.iter().enumerate() {
            if let Some(j) = seen.insert(*f, i) {
                return Err(Error::InvalidArgument(format!(
                    "candidates {j} and {i} are the same functional {f}"
                )));
            }
        }
        Ok(CandidateSet { functionals, samples })
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn max_abs_sample(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// The same functionals with every sample multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        CandidateSet {
            functionals: self.functionals.clone(),
            samples: self.samples.iter().map(|s| s * c).collect(),
        }
    }
}

#[derive(Clone, Debug)]
struct CandidateCache {
    set: CandidateSet,
    index: HashMap<Functional, usize>,
    diag: Vec<f64>,
    /// `newton[i][j] = lambda_i(v_j)`.
    newton: Vec<Vec<f64>>,
    power_sq: Vec<f64>,
    residual: Vec<f64>,
    selected: Vec<bool>,
}

/// Outcome of adding one functional.
#[derive(Clone, Debug)]
pub struct Extension {
    /// `P_{Lambda_n}(lambda_new)` before the update.
    pub power: f64,
    /// Residual `lambda_new(f) - lambda_new(s_n)` before the update.
    pub residual: f64,
    /// The new Newton coefficient `c_{n+1}`.
    pub coefficient: f64,
    /// Pairings of every candidate with the new functional, when a candidate
    /// set is attached.
    pub pairings: Option<Vec<f64>>,
}

/// Newton-basis interpolation state.
#[derive(Clone, Debug)]
pub struct NewtonModel {
    engine: Arc<PairingEngine>,
    selected: Vec<Functional>,
    selected_samples: Vec<f64>,
    selected_candidates: Vec<Option<usize>>,
    selected_diag: Vec<f64>,
    /// Row `j` holds the coefficients of `v_j` over the representers of
    /// `selected[0..=j]`.
    basis: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    /// Coefficients of `s_n` over the selected representers.
    expansion: Vec<f64>,
    breakdown_factor: f64,
    max_diag: f64,
    candidates: Option<CandidateCache>,
}

impl NewtonModel {
    /// An empty model without a candidate set.
    pub fn new(engine: Arc<PairingEngine>) -> Self {
        NewtonModel {
            engine,
            selected: Vec::new(),
            selected_samples: Vec::new(),
            selected_candidates: Vec::new(),
            selected_diag: Vec::new(),
            basis: Vec::new(),
            coeffs: Vec::new(),
            expansion: Vec::new(),
            breakdown_factor: DEFAULT_BREAKDOWN_FACTOR,
            max_diag: 0.0,
            candidates: None,
        }
    }

    /// An empty model tracking power and residual for every candidate.
    pub fn with_candidates(engine: Arc<PairingEngine>, set: CandidateSet) -> Result<Self> {
        let diag: Vec<f64> = set
            .functionals
            .par_iter()
            .map(|f| engine.pairing_uncached(f, f))
            .collect::<Result<_>>()?;
        let n = set.len();
        let index = set
            .functionals
            .iter()
            .enumerate()
            .map(|(i, f)| (*f, i))
            .collect();
        let mut model = NewtonModel::new(engine);
        model.max_diag = diag.iter().cloned().fold(0.0, f64::max);
        model.candidates = Some(CandidateCache {
            residual: set.samples.clone(),
            power_sq: diag.clone(),
            newton: vec![Vec::new(); n],
            selected: vec![false; n],
            set,
            index,
            diag,
        });
        Ok(model)
    }

    pub fn with_breakdown_factor(mut self, factor: f64) -> Self {
        self.breakdown_factor = factor;
        self
    }

    pub fn engine(&self) -> &Arc<PairingEngine> {
        &self.engine
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn selected(&self) -> &[Functional] {
        &self.selected
    }

    pub fn selected_samples(&self) -> &[f64] {
        &self.selected_samples
    }

    /// Candidate indices of the selected functionals, in selection order.
    pub fn selected_candidates(&self) -> Vec<usize> {
        self.selected_candidates.iter().flatten().copied().collect()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficients `b` with `s_n = sum_l b_l g_{lambda_l}`.
    pub fn expansion(&self) -> &[f64] {
        &self.expansion
    }

    pub fn basis_rows(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// `||s_n||^2 = sum_j c_j^2`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Absolute breakdown threshold `tau_P`.
    pub fn breakdown_threshold(&self) -> f64 {
        self.breakdown_factor * self.max_diag.sqrt()
    }

    pub fn candidates(&self) -> Option<&CandidateSet> {
        self.candidates.as_ref().map(|c| &c.set)
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.as_ref().map_or(0, |c| c.set.len())
    }

    fn cache(&self) -> Result<&CandidateCache> {
        self.candidates
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("model has no candidate set".into()))
    }

    pub fn candidate_index(&self, f: &Functional) -> Option<usize> {
        self.candidates.as_ref()?.index.get(f).copied()
    }

    pub fn is_candidate_selected(&self, i: usize) -> bool {
        self.candidates.as_ref().is_some_and(|c| c.selected[i])
    }

    /// Cached `P^2` for every candidate.
    pub fn candidate_power_sq(&self) -> &[f64] {
        self.candidates.as_ref().map_or(&[], |c| &c.power_sq)
    }

    /// Cached residuals `lambda_i(f) - lambda_i(s_n)` for every candidate.
    pub fn candidate_residuals(&self) -> &[f64] {
        self.candidates.as_ref().map_or(&[], |c| &c.residual)
    }

    /// Cached `||lambda_i||^2` for every candidate.
    pub fn candidate_diag(&self) -> &[f64] {
        self.candidates.as_ref().map_or(&[], |c| &c.diag)
    }

    pub fn candidate_power(&self, i: usize) -> Result<f64> {
        let c = self.cache()?;
        Ok(c.power_sq[i].max(0.0).sqrt())
    }

    /// `(lambda(v_1), ..., lambda(v_n))`.
    pub fn newton_values(&self, f: &Functional) -> Result<Vec<f64>> {
        if let Some(i) = self.candidate_index(f) {
            return Ok(self.cache()?.newton[i].clone());
        }
        let pairs: Vec<f64> = self
            .selected
            .iter()
            .map(|s| self.engine.pairing(f, s))
            .collect::<Result<_>>()?;
        Ok(self
            .basis
            .iter()
            .map(|row| row.iter().zip(&pairs).map(|(c, p)| c * p).sum())
            .collect())
    }

    /// The power function `P_{Lambda_n}(f)`.
    pub fn power(&self, f: &Functional) -> Result<f64> {
        if let Some(i) = self.candidate_index(f) {
            return self.candidate_power(i);
        }
        let diag = self.engine.pairing(f, f)?;
        let w = self.newton_values(f)?;
        Ok((diag - w.iter().map(|x| x * x).sum::<f64>()).max(0.0).sqrt())
    }

    /// `sample - lambda(s_n)`.
    pub fn residual(&self, f: &Functional, sample: f64) -> Result<f64> {
        let w = self.newton_values(f)?;
        Ok(sample - dot(&self.coeffs, &w))
    }

    /// `s_n(x)`.
    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        self.selected
            .iter()
            .zip(&self.expansion)
            .map(|(f, b)| Ok(b * self.engine.representer_eval(f, x)?))
            .sum()
    }

    /// Adds candidate `i` of the attached candidate set.
    pub fn extend_candidate(&mut self, i: usize) -> Result<Extension> {
        let cache = self.cache()?;
        if i >= cache.set.len() {
            return Err(Error::InvalidArgument(format!(
                "candidate index {i} out of range for {} candidates",
                cache.set.len()
            )));
        }
        let f = cache.set.functionals[i];
        let w = cache.newton[i].clone();
        let (p2, residual, diag) = (cache.power_sq[i], cache.residual[i], cache.diag[i]);
        let sample = cache.set.samples[i];
        self.push(f, sample, w, p2, residual, diag, Some(i))
    }

    /// Adds an arbitrary functional with its sample.
    pub fn extend(&mut self, f: Functional, sample: f64) -> Result<Extension> {
        if !sample.is_finite() {
            return Err(Error::InvalidArgument("sample is not finite".into()));
        }
        if let Some(i) = self.candidate_index(&f) {
            let cache = self.cache()?;
            let w = cache.newton[i].clone();
            let residual = sample - dot(&self.coeffs, &w);
            let (p2, diag) = (cache.power_sq[i], cache.diag[i]);
            return self.push(f, sample, w, p2, residual, diag, Some(i));
        }
        self.engine.check_supported(&f)?;
        let diag = self.engine.pairing(&f, &f)?;
        let w = self.newton_values(&f)?;
        let p2 = diag - w.iter().map(|x| x * x).sum::<f64>();
        let residual = sample - dot(&self.coeffs, &w);
        self.push(f, sample, w, p2, residual, diag, None)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        f: Functional,
        sample: f64,
        w: Vec<f64>,
        p2: f64,
        residual: f64,
        diag: f64,
        candidate: Option<usize>,
    ) -> Result<Extension> {
        let max_diag = self.max_diag.max(diag);
        let tau = self.breakdown_factor * max_diag.sqrt();
        if !(p2 > tau * tau) {
            return Err(Error::NearDependence {
                functional: f.to_string(),
                candidate,
                power: p2.max(0.0).sqrt(),
                threshold: tau,
            });
        }
        let column = match &self.candidates {
            Some(cache) => Some(self.engine.pairing_column(&cache.set.functionals, &f)?),
            None => None,
        };
        self.max_diag = max_diag;
        let n = self.selected.len();
        let power = p2.sqrt();
        let coefficient = residual / power;

        let mut row = vec![0.0; n + 1];
        for (l, slot) in row.iter_mut().enumerate().take(n) {
            let acc: f64 = (l..n).map(|j| w[j] * self.basis[j][l]).sum();
            *slot = -acc / power;
        }
        row[n] = 1.0 / power;
        for (b, r) in self.expansion.iter_mut().zip(&row) {
            *b += coefficient * r;
        }
        self.expansion.push(coefficient * row[n]);

        self.basis.push(row);
        self.coeffs.push(coefficient);
        self.selected.push(f);
        self.selected_samples.push(sample);
        self.selected_candidates.push(candidate);
        self.selected_diag.push(diag);

        if let (Some(mut cache), Some(column)) = (self.candidates.take(), column.as_ref()) {
            let result = self.update_candidates(&mut cache, column, &w, power, coefficient);
            if let Some(i) = candidate {
                cache.selected[i] = true;
            }
            self.candidates = Some(cache);
            result?;
        }
        Ok(Extension {
            power,
            residual,
            coefficient,
            pairings: column,
        })
    }

    fn update_candidates(
        &self,
        cache: &mut CandidateCache,
        column: &[f64],
        w: &[f64],
        power: f64,
        coefficient: f64,
    ) -> Result<()> {
        let previous = cache.power_sq.clone();
        cache
            .newton
            .par_iter_mut()
            .zip(cache.power_sq.par_iter_mut())
            .zip(cache.residual.par_iter_mut())
            .zip(column.par_iter())
            .for_each(|(((row, p2), res), &col)| {
                let value = (col - dot(row, w)) / power;
                row.push(value);
                *p2 -= value * value;
                *res -= coefficient * value;
            });
        let drifted: Vec<usize> = (0..cache.diag.len())
            .filter(|&i| cache.power_sq[i] < -DRIFT_TOLERANCE * cache.diag[i])
            .collect();
        if !drifted.is_empty() {
            let fresh = self.normal_equation_power_sq(&cache.set.functionals, &drifted)?;
            for (i, p2) in drifted.into_iter().zip(fresh) {
                cache.power_sq[i] = p2.max(0.0).min(previous[i]);
            }
        }
        for p2 in cache.power_sq.iter_mut() {
            if *p2 < 0.0 {
                *p2 = 0.0;
            }
        }
        Ok(())
    }

    /// `||lambda||^2 - b^T G^{-1} b` over the current selection.
    fn normal_equation_power_sq(&self, fs: &[Functional], which: &[usize]) -> Result<Vec<f64>> {
        let gram = self.engine.gram(&self.selected)?;
        let Some(chol) = gram.cholesky() else {
            return Ok(vec![0.0; which.len()]);
        };
        which
            .iter()
            .map(|&i| {
                let f = &fs[i];
                let b = DVector::from_iterator(
                    self.selected.len(),
                    self.selected.iter().map(|s| self.engine.pairing(f, s).unwrap_or(0.0)),
                );
                let x = chol.solve(&b);
                Ok(self.engine.pairing(f, f)? - b.dot(&x))
            })
            .collect()
    }

    /// Largest entry of `|C G C^T - I|`, which vanishes for an orthonormal basis.
    pub fn orthonormality_defect(&self) -> Result<f64> {
        let n = self.len();
        if n == 0 {
            return Ok(0.0);
        }
        let gram = self.engine.gram(&self.selected)?.matrix;
        let c = DMatrix::from_fn(n, n, |j, l| if l <= j { self.basis[j][l] } else { 0.0 });
        let prod = &c * gram * c.transpose();
        Ok((prod - DMatrix::identity(n, n)).abs().max())
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            version: SNAPSHOT_VERSION,
            kernel: self.engine.kernel().config(),
            selected: self.selected.iter().map(FunctionalRecord::from).collect(),
            samples: self.selected_samples.clone(),
            basis: self.basis.clone(),
            coefficients: self.coeffs.clone(),
        }
    }

    /// Rebuilds a model (without candidate set) from a snapshot, using
    /// analytic pairings.
    pub fn from_snapshot(snapshot: &ModelSnapshot) -> Result<Self> {
        snapshot.validate()?;
        let kernel = snapshot.kernel.build()?;
        let engine = Arc::new(PairingEngine::analytic(kernel));
        let selected: Vec<Functional> = snapshot
            .selected
            .iter()
            .map(FunctionalRecord::to_functional)
            .collect::<Result<_>>()?;
        for f in &selected {
            engine.check_supported(f)?;
        }
        let n = selected.len();
        let mut expansion = vec![0.0; n];
        for (row, c) in snapshot.basis.iter().zip(&snapshot.coefficients) {
            for (b, r) in expansion.iter_mut().zip(row) {
                *b += c * r;
            }
        }
        let selected_diag: Vec<f64> = selected
            .iter()
            .map(|f| engine.pairing(f, f))
            .collect::<Result<_>>()?;
        let mut model = NewtonModel::new(engine);
        model.max_diag = selected_diag.iter().cloned().fold(0.0, f64::max);
        model.selected = selected;
        model.selected_samples = snapshot.samples.clone();
        model.selected_candidates = vec![None; n];
        model.selected_diag = selected_diag;
        model.basis = snapshot.basis.clone();
        model.coeffs = snapshot.coefficients.clone();
        model.expansion = expansion;
        Ok(model)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `G b = samples` by Cholesky.
pub fn direct_solve(
    engine: &PairingEngine,
    functionals: &[Functional],
    samples: &[f64],
) -> Result<DVector<f64>> {
    if functionals.len() != samples.len() {
        return Err(Error::InvalidArgument(format!(
            "{} functionals but {} samples",
            functionals.len(),
            samples.len()
        )));
    }
    let gram = engine.gram(functionals)?;
    let max_diag = gram.matrix.diagonal().max();
    let tau = DEFAULT_BREAKDOWN_FACTOR * max_diag.max(0.0).sqrt();
    let near = |index: usize, power: f64| Error::NearDependence {
        functional: functionals[index].to_string(),
        candidate: Some(index),
        power,
        threshold: tau,
    };
    let chol = gram.cholesky().ok_or_else(|| near(0, 0.0))?;
    // The Cholesky pivots are the powers of each functional against its predecessors.
    let l = chol.l_dirty();
    if let Some(i) = (0..functionals.len()).find(|&i| !(l[(i, i)] > tau)) {
        return Err(near(i, l[(i, i)]));
    }
    Ok(chol.solve(&DVector::from_column_slice(samples)))
}

/// Evaluates `sum_i coeffs_i g_{lambda_i}(x)`.
pub fn evaluate_expansion(
    engine: &PairingEngine,
    functionals: &[Functional],
    coeffs: &[f64],
    x: &Point,
) -> Result<f64> {
    functionals
        .iter()
        .zip(coeffs)
        .map(|(f, c)| Ok(c * engine.representer_eval(f, x)?))
        .sum()
}

/// Which distance the fill distance is measured in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FillSpace {
    Dual,
    Parameter(ParameterMetric),
}

/// `max_{lambda in Gamma} min_{mu in Lambda} d(lambda, mu)`.
pub fn fill_distance(
    engine: &PairingEngine,
    selected: &[Functional],
    candidates: &[Functional],
    space: FillSpace,
) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument(
            "fill distance needs a nonempty selection".into(),
        ));
    }
    let dists: Vec<f64> = candidates
        .par_iter()
        .map(|g| {
            selected.iter().try_fold(f64::INFINITY, |m, s| {
                let d = match space {
                    FillSpace::Dual => engine.dual_distance(g, s)?,
                    FillSpace::Parameter(metric) => metric.distance(g, s)?,
                };
                Ok(m.min(d))
            })
        })
        .collect::<Result<_>>()?;
    Ok(dists.into_iter().fold(0.0, f64::max))
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Serializable functional: `kind` is `radon` (a = r, b = theta) or `point`
/// (a = x1, b = x2, absent in 1D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRecord {
    pub kind: String,
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl From<&Functional> for FunctionalRecord {
    fn from(f: &Functional) -> Self {
        match *f {
            Functional::RadonLine { r, theta } => FunctionalRecord {
                kind: "radon".into(),
                a: r,
                b: Some(theta),
            },
            Functional::PointEval(p) => FunctionalRecord {
                kind: "point".into(),
                a: p.x(),
                b: (p.dim() == 2).then(|| p.y()),
            },
        }
    }
}

impl FunctionalRecord {
    pub fn to_functional(&self) -> Result<Functional> {
        match (self.kind.as_str(), self.b) {
            ("radon", Some(theta)) => Functional::radon(self.a, theta),
            ("radon", None) => Err(Error::Parse("radon functional without angle".into())),
            ("point", Some(y)) => Functional::point(Point::new2(self.a, y)),
            ("point", None) => Functional::point(Point::new1(self.a)),
            (other, _) => Err(Error::Parse(format!("unknown functional kind `{other}`"))),
        }
    }
}

/// Replayable model state written as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub version: u32,
    pub kernel: KernelConfig,
    pub selected: Vec<FunctionalRecord>,
    pub samples: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
}

impl ModelSnapshot {
    pub fn validate(&self) -> Result<()> {
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported snapshot version {}",
                self.version
            )));
        }
        let n = self.selected.len();
        if self.samples.len() != n || self.basis.len() != n || self.coefficients.len() != n {
            return Err(Error::Parse("snapshot arrays have inconsistent lengths".into()));
        }
        for (j, row) in self.basis.iter().enumerate() {
            if row.len() != j + 1 {
                return Err(Error::Parse(format!(
                    "basis row {j} has {} entries, expected {}",
                    row.len(),
                    j + 1
                )));
            }
        }
        let finite = self
            .basis
            .iter()
            .flatten()
            .chain(&self.coefficients)
            .chain(&self.samples)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parse("snapshot contains non-finite numbers".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: ModelSnapshot = serde_json::from_str(text)?;
        snap.validate()?;
        Ok(snap)
    }
}
