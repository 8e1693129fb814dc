//! Greedy data selection: the beta-greedy family (P-, f-, psr-, f/P-greedy),
//! geometric (h-)greedy in dual or parameter space, and a seeded random
//! baseline, with a run loop that records per-iteration diagnostics.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::{Functional, ParameterMetric};
use crate::newton::{CandidateSet, NewtonModel, DEFAULT_BREAKDOWN_FACTOR};
use crate::pairing::PairingEngine;

/// Distance used by the geometric rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeometricSpace {
    Dual,
    Parameter(ParameterMetric),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RuleKind {
    /// Maximize `|residual|^beta * P^(1 - beta)`; `f64::INFINITY` selects
    /// `|residual| / P`.
    Beta(f64),
    /// Maximize the distance to the current selection.
    Geometric(GeometricSpace),
    /// Uniform over unselected candidates.
    Random { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionRule {
    pub kind: RuleKind,
    /// Accept the lowest index whose indicator reaches `weak_gamma * sup`.
    pub weak_gamma: f64,
}

impl SelectionRule {
    pub fn new(kind: RuleKind) -> Result<Self> {
        if let RuleKind::Beta(b) = kind {
            if !(b >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "beta must be in [0, inf], got {b}"
                )));
            }
        }
        Ok(SelectionRule {
            kind,
            weak_gamma: 1.0,
        })
    }

    pub fn beta(beta: f64) -> Result<Self> {
        SelectionRule::new(RuleKind::Beta(beta))
    }

    pub fn p_greedy() -> Self {
        SelectionRule::beta(0.0).expect("valid beta")
    }

    pub fn f_greedy() -> Self {
        SelectionRule::beta(1.0).expect("valid beta")
    }

    pub fn psr_greedy() -> Self {
        SelectionRule::beta(0.5).expect("valid beta")
    }

    pub fn f_over_p_greedy() -> Self {
        SelectionRule::beta(f64::INFINITY).expect("valid beta")
    }

    pub fn geometric(space: GeometricSpace) -> Self {
        SelectionRule::new(RuleKind::Geometric(space)).expect("valid rule")
    }

    pub fn random(seed: u64) -> Self {
        SelectionRule::new(RuleKind::Random { seed }).expect("valid rule")
    }

    pub fn with_weak_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "weak greedy parameter must be in (0, 1], got {gamma}"
            )));
        }
        self.weak_gamma = gamma;
        Ok(self)
    }

    /// Parses a method name: `p`, `f`, `psr`, `fp`, `h` (dual space),
    /// `hp` (parameter space), `random`, or `beta:<value>` / `beta:inf`.
    pub fn parse(name: &str, seed: u64) -> Result<Self> {
        let name = name.trim();
        match name {
            "p" => Ok(SelectionRule::p_greedy()),
            "f" => Ok(SelectionRule::f_greedy()),
            "psr" => Ok(SelectionRule::psr_greedy()),
            "fp" => Ok(SelectionRule::f_over_p_greedy()),
            "h" => Ok(SelectionRule::geometric(GeometricSpace::Dual)),
            "hp" => Ok(SelectionRule::geometric(GeometricSpace::Parameter(
                ParameterMetric::default(),
            ))),
            "random" => Ok(SelectionRule::random(seed)),
            _ => {
                let value = name
                    .strip_prefix("beta:")
                    .ok_or_else(|| Error::Config(format!("unknown method `{name}`")))?;
                let beta = match value {
                    "inf" | "infinity" => f64::INFINITY,
                    v => v
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("invalid beta `{v}`")))?,
                };
                SelectionRule::beta(beta).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RuleKind::Beta(b) if b.is_infinite() => write!(f, "beta:inf"),
            RuleKind::Beta(b) => write!(f, "beta:{b}"),
            RuleKind::Geometric(GeometricSpace::Dual) => write!(f, "h"),
            RuleKind::Geometric(GeometricSpace::Parameter(_)) => write!(f, "hp"),
            RuleKind::Random { .. } => write!(f, "random"),
        }
    }
}

/// The beta-greedy indicator `|r|^beta * p^(1 - beta)` with `0^0 = 1`;
/// `beta = inf` gives `|r| / p`. Callers exclude `p <= tau_P` beforehand.
pub fn beta_indicator(beta: f64, residual_abs: f64, power: f64) -> f64 {
    if beta == 0.0 {
        power
    } else if beta == 1.0 {
        residual_abs
    } else if beta == 0.5 {
        residual_abs.sqrt() * power.sqrt()
    } else if beta.is_infinite() {
        residual_abs / power
    } else if beta < 1.0 {
        residual_abs.powf(beta) * power.powf(1.0 - beta)
    } else {
        residual_abs.powf(beta) / power.powf(beta - 1.0)
    }
}

/// Running `min_{mu in Lambda_n} d(lambda_i, mu)` for every candidate.
#[derive(Clone, Debug)]
struct DistanceTracker {
    dual: Vec<f64>,
    param: Option<Vec<f64>>,
    metric: ParameterMetric,
}

impl DistanceTracker {
    fn new(n: usize, all_radon: bool, metric: ParameterMetric) -> Self {
        DistanceTracker {
            dual: vec![f64::INFINITY; n],
            param: all_radon.then(|| vec![f64::INFINITY; n]),
            metric,
        }
    }

    fn observe(&mut self, fs: &[Functional], diag: &[f64], k: usize, column: &[f64]) -> Result<()> {
        let dk = diag[k];
        self.dual.par_iter_mut().enumerate().for_each(|(i, m)| {
            let d = if i == k {
                0.0
            } else {
                (diag[i] - 2.0 * column[i] + dk).max(0.0).sqrt()
            };
            if d < *m {
                *m = d;
            }
        });
        if let Some(param) = self.param.as_mut() {
            let fk = fs[k];
            let metric = self.metric;
            let dists: Vec<f64> = fs
                .par_iter()
                .map(|f| metric.distance(f, &fk))
                .collect::<Result<_>>()?;
            for (m, d) in param.iter_mut().zip(dists) {
                if d < *m {
                    *m = d;
                }
            }
        }
        Ok(())
    }

    fn fill_dual(&self) -> f64 {
        self.dual.iter().cloned().fold(0.0, f64::max)
    }

    fn fill_param(&self) -> Option<f64> {
        self.param
            .as_ref()
            .map(|p| p.iter().cloned().fold(0.0, f64::max))
    }
}

/// Rule-specific selection state over a model's candidate set.
#[derive(Clone, Debug)]
pub struct Selector {
    rule: SelectionRule,
    excluded: Vec<bool>,
    distances: DistanceTracker,
    rng: Option<ChaCha8Rng>,
}

/// The chosen candidate and its indicator value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub indicator: f64,
}

impl Selector {
    /// Builds the selector, accounting for functionals already in `model`.
    pub fn new(rule: SelectionRule, model: &NewtonModel) -> Result<Self> {
        let set = model
            .candidates()
            .ok_or_else(|| Error::InvalidArgument("selection needs a candidate set".into()))?;
        let fs = set.functionals();
        let all_radon = fs.iter().all(Functional::is_radon);
        let metric = match rule.kind {
            RuleKind::Geometric(GeometricSpace::Parameter(m)) => m,
            _ => ParameterMetric::default(),
        };
        if matches!(rule.kind, RuleKind::Geometric(GeometricSpace::Parameter(_))) && !all_radon {
            return Err(Error::InvalidArgument(
                "parameter-space geometric greedy needs Radon candidates".into(),
            ));
        }
        let mut distances = DistanceTracker::new(fs.len(), all_radon, metric);
        let engine = model.engine();
        for k in model.selected_candidates() {
            let column = engine.pairing_column(fs, &fs[k])?;
            distances.observe(fs, model.candidate_diag(), k, &column)?;
        }
        let rng = match rule.kind {
            RuleKind::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Ok(Selector {
            rule,
            excluded: vec![false; fs.len()],
            distances,
            rng,
        })
    }

    pub fn rule(&self) -> &SelectionRule {
        &self.rule
    }

    /// Permanently removes a candidate from consideration.
    pub fn exclude(&mut self, i: usize) {
        self.excluded[i] = true;
    }

    pub fn is_excluded(&self, i: usize) -> bool {
        self.excluded[i]
    }

    /// Records that candidate `k` joined the model; `column` holds the
    /// pairings of every candidate with it.
    pub fn observe(&mut self, model: &NewtonModel, k: usize, column: &[f64]) -> Result<()> {
        let set = model
            .candidates()
            .ok_or_else(|| Error::InvalidArgument("selection needs a candidate set".into()))?;
        self.distances
            .observe(set.functionals(), model.candidate_diag(), k, column)
    }

    /// Dual fill distance of the current selection over the candidates.
    pub fn fill_dual(&self) -> f64 {
        self.distances.fill_dual()
    }

    /// Parameter-space fill distance, when all candidates are Radon lines.
    pub fn fill_param(&self) -> Option<f64> {
        self.distances.fill_param()
    }

    /// Picks the next candidate, or `None` when no candidate is admissible.
    pub fn select_next(&mut self, model: &NewtonModel) -> Result<Option<Selection>> {
        let n = model.candidate_count();
        let open = |i: usize| !self.excluded[i] && !model.is_candidate_selected(i);
        match self.rule.kind {
            RuleKind::Beta(beta) => {
                let tau = model.breakdown_threshold();
                let p2 = model.candidate_power_sq();
                let res = model.candidate_residuals();
                let values: Vec<Option<f64>> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let p = p2[i].max(0.0).sqrt();
                        (open(i) && p > tau).then(|| beta_indicator(beta, res[i].abs(), p))
                    })
                    .collect();
                Ok(self.weak_argmax(&values))
            }
            RuleKind::Geometric(space) => {
                let dists = match space {
                    GeometricSpace::Dual => &self.distances.dual,
                    GeometricSpace::Parameter(_) => self
                        .distances
                        .param
                        .as_ref()
                        .expect("parameter distances tracked for Radon candidates"),
                };
                let values: Vec<Option<f64>> =
                    (0..n).map(|i| open(i).then_some(dists[i])).collect();
                Ok(self.weak_argmax(&values))
            }
            RuleKind::Random { .. } => {
                let open_idx: Vec<usize> = (0..n).filter(|&i| open(i)).collect();
                if open_idx.is_empty() {
                    return Ok(None);
                }
                let rng = self.rng.as_mut().expect("random rule has a generator");
                let index = open_idx[rng.gen_range(0..open_idx.len())];
                Ok(Some(Selection {
                    index,
                    indicator: 0.0,
                }))
            }
        }
    }

    fn weak_argmax(&self, values: &[Option<f64>]) -> Option<Selection> {
        let mut best: Option<Selection> = None;
        for (index, v) in values.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|b| v > b.indicator) {
                    best = Some(Selection { index, indicator: v });
                }
            }
        }
        let best = best?;
        if self.rule.weak_gamma < 1.0 {
            let bar = self.rule.weak_gamma * best.indicator;
            let index = values.iter().position(|v| v.is_some_and(|v| v >= bar))?;
            return Some(Selection {
                index,
                indicator: values[index].expect("admissible"),
            });
        }
        Some(best)
    }
}

/// Stopping thresholds for [`run_greedy`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopCriteria {
    /// Relative breakdown factor; the absolute threshold is this times the
    /// largest candidate dual norm.
    pub breakdown_factor: f64,
    /// Stop once every candidate residual is at most this.
    pub residual_tol: Option<f64>,
    /// Stop once the dual fill distance is at most this.
    pub fill_tol: Option<f64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            breakdown_factor: DEFAULT_BREAKDOWN_FACTOR,
            residual_tol: None,
            fill_tol: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    Exhausted,
    ResidualTolerance,
    FillTolerance,
}

/// One greedy iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub index: usize,
    pub indicator: f64,
    /// `P_{Lambda_n}(lambda_{n+1})`.
    pub power: f64,
    /// Residual of the chosen candidate before it was added.
    pub residual: f64,
    /// Fill distances of `Lambda_{n+1}` over the candidates.
    pub fill_dual: f64,
    pub fill_param: Option<f64>,
    pub max_residual: f64,
    pub norm_sq: f64,
    /// Milliseconds since the start of the run.
    pub ms: f64,
}

/// A candidate dropped after a near-dependence failure.
#[derive(Clone, Debug, PartialEq)]
pub struct Exclusion {
    pub iter: usize,
    pub index: usize,
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyTrace {
    pub rule: String,
    pub records: Vec<TraceRecord>,
    pub exclusions: Vec<Exclusion>,
    pub stop: StopReason,
}

impl GreedyTrace {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.index).collect()
    }
}

/// Runs up to `max_iters` greedy steps over `set`.
pub fn run_greedy(
    rule: SelectionRule,
    engine: Arc<PairingEngine>,
    set: CandidateSet,
    max_iters: usize,
    stop: StopCriteria,
) -> Result<(NewtonModel, GreedyTrace)> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let mut model =
        NewtonModel::with_candidates(engine, set)?.with_breakdown_factor(stop.breakdown_factor);
    let mut selector = Selector::new(rule, &model)?;
    let start = Instant::now();
    let mut trace = GreedyTrace {
        rule: rule.to_string(),
        records: Vec::with_capacity(max_iters),
        exclusions: Vec::new(),
        stop: StopReason::MaxIterations,
    };
    while trace.records.len() < max_iters {
        let iter = trace.records.len() + 1;
        let Some(choice) = selector.select_next(&model)? else {
            trace.stop = StopReason::Exhausted;
            break;
        };
        let ext = match model.extend_candidate(choice.index) {
            Ok(ext) => ext,
            Err(Error::NearDependence { power, .. }) => {
                selector.exclude(choice.index);
                trace.exclusions.push(Exclusion {
                    iter,
                    index: choice.index,
                    power,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let column = ext.pairings.as_deref().expect("model has candidates");
        selector.observe(&model, choice.index, column)?;
        let max_residual = model
            .candidate_residuals()
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        let fill_dual = selector.fill_dual();
        trace.records.push(TraceRecord {
            iter,
            index: choice.index,
            indicator: choice.indicator,
            power: ext.power,
            residual: ext.residual,
            fill_dual,
            fill_param: selector.fill_param(),
            max_residual,
            norm_sq: model.norm_sq(),
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if stop.residual_tol.is_some_and(|tol| max_residual <= tol) {
            trace.stop = StopReason::ResidualTolerance;
            break;
        }
        if stop.fill_tol.is_some_and(|tol| fill_dual <= tol) {
            trace.stop = StopReason::FillTolerance;
            break;
        }
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::newton::fill_distance;
    use crate::newton::FillSpace;
    use nalgebra::DVector;
    use rand::Rng;
    use std::f64::consts::PI;

    fn engine() -> Arc<PairingEngine> {
        Arc::new(PairingEngine::analytic(Kernel::weighted_gaussian(2000.0, 1.5).unwrap()).without_cache())
    }

    fn random_set(n: usize, seed: u64) -> CandidateSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let (r, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..PI));
            fs.push(Functional::radon(r, t).unwrap());
            // A smooth sinogram-like target.
            ys.push((-(r * r) * 2.0).exp() * (1.0 + 0.3 * (3.0 * t).cos()));
        }
        CandidateSet::new(fs, ys).unwrap()
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(beta_indicator(0.0, 5.0, 0.3), 0.3);
        assert_eq!(beta_indicator(0.0, 0.0, 0.3), 0.3);
        assert_eq!(beta_indicator(1.0, 5.0, 0.3), 5.0);
        assert_eq!(beta_indicator(0.5, 4.0, 9.0), 6.0);
        assert_eq!(beta_indicator(f64::INFINITY, 3.0, 2.0), 1.5);
        assert!((beta_indicator(2.0, 3.0, 2.0) - 4.5).abs() < 1e-15);
        assert!((beta_indicator(0.25, 16.0, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn parse_methods() {
        assert_eq!(SelectionRule::parse("p", 0).unwrap(), SelectionRule::beta(0.0).unwrap());
        assert_eq!(SelectionRule::parse("beta:inf", 0).unwrap(), SelectionRule::f_over_p_greedy());
        assert_eq!(SelectionRule::parse("beta:0.5", 0).unwrap(), SelectionRule::psr_greedy());
        assert!(SelectionRule::parse("beta:-1", 0).is_err());
        assert!(SelectionRule::parse("nope", 0).is_err());
        assert!(SelectionRule::p_greedy().with_weak_gamma(0.0).is_err());
        assert!(SelectionRule::p_greedy().with_weak_gamma(1.5).is_err());
    }

    #[test]
    fn singleton_set_selects_index_zero() {
        let set = CandidateSet::new(vec![Functional::radon(0.2, 0.3).unwrap()], vec![1.0]).unwrap();
        for rule in [
            SelectionRule::p_greedy(),
            SelectionRule::f_greedy(),
            SelectionRule::psr_greedy(),
            SelectionRule::f_over_p_greedy(),
            SelectionRule::geometric(GeometricSpace::Dual),
            SelectionRule::geometric(GeometricSpace::Parameter(ParameterMetric::default())),
            SelectionRule::random(5),
        ] {
            let model = NewtonModel::with_candidates(engine(), set.clone()).unwrap();
            let mut sel = Selector::new(rule, &model).unwrap();
            assert_eq!(sel.select_next(&model).unwrap().unwrap().index, 0, "{rule}");
        }
    }

    #[test]
    fn geometric_picks_farther_endpoint() {
        let fs = vec![
            Functional::radon(0.0, 1.0).unwrap(),
            Functional::radon(0.3, 1.0).unwrap(),
            Functional::radon(0.5, 1.0).unwrap(),
        ];
        let set = CandidateSet::new(fs, vec![0.0; 3]).unwrap();
        let mut model = NewtonModel::with_candidates(engine(), set).unwrap();
        model.extend_candidate(1).unwrap();
        let rule = SelectionRule::geometric(GeometricSpace::Parameter(ParameterMetric::default()));
        let mut sel = Selector::new(rule, &model).unwrap();
        let pick = sel.select_next(&model).unwrap().unwrap();
        assert_eq!(pick.index, 0);
        assert!((pick.indicator - 0.3).abs() < 1e-15);
    }

    #[test]
    fn p_greedy_matches_brute_force_powers() {
        let e = engine();
        let set = random_set(30, 17);
        let fs = set.functionals().to_vec();
        let mut model = NewtonModel::with_candidates(e.clone(), set).unwrap();
        let mut sel = Selector::new(SelectionRule::p_greedy(), &model).unwrap();
        for step in 0..6 {
            let pick = sel.select_next(&model).unwrap().unwrap();
            // Power of every unselected candidate via the normal equations.
            let chosen = model.selected().to_vec();
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for (i, f) in fs.iter().enumerate() {
                if model.is_candidate_selected(i) {
                    continue;
                }
                let mut p2 = e.pairing(f, f).unwrap();
                if !chosen.is_empty() {
                    let g = e.gram(&chosen).unwrap().cholesky().unwrap();
                    let b = DVector::from_iterator(
                        chosen.len(),
                        chosen.iter().map(|s| e.pairing(f, s).unwrap()),
                    );
                    p2 -= b.dot(&g.solve(&b));
                }
                if p2 > best.1 {
                    best = (i, p2);
                }
            }
            assert_eq!(pick.index, best.0, "step {step}");
            let ext = model.extend_candidate(pick.index).unwrap();
            sel.observe(&model, pick.index, ext.pairings.as_deref().unwrap()).unwrap();
        }
    }

    #[test]
    fn weak_rule_takes_lowest_acceptable_index() {
        let set = random_set(20, 4);
        let model = NewtonModel::with_candidates(engine(), set).unwrap();
        let rule = SelectionRule::f_greedy().with_weak_gamma(0.5).unwrap();
        let mut sel = Selector::new(rule, &model).unwrap();
        let pick = sel.select_next(&model).unwrap().unwrap();
        let res = model.candidate_residuals();
        let sup = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let expect = res.iter().position(|r| r.abs() >= 0.5 * sup).unwrap();
        assert_eq!(pick.index, expect);
    }

    #[test]
    fn full_runs_recover_samples() {
        let set = random_set(40, 9);
        let max = set.max_abs_sample();
        for name in ["p", "f", "psr", "fp", "h", "hp", "random", "beta:2"] {
            let rule = SelectionRule::parse(name, 1).unwrap();
            let (model, trace) = run_greedy(rule, engine(), set.clone(), 40, StopCriteria::default()).unwrap();
            assert_eq!(trace.records.len(), 40, "{name}");
            assert_eq!(model.len(), 40);
            let worst = model.candidate_residuals().iter().fold(0.0f64, |m, r| m.max(r.abs()));
            assert!(worst <= 1e-8 * max, "{name}: {worst}");
            assert!(trace.records.iter().all(|r| r.indicator >= 0.0));
        }
    }

    #[test]
    fn exhaustion_stops_early() {
        let set = random_set(5, 10);
        let (_, trace) =
            run_greedy(SelectionRule::p_greedy(), engine(), set, 50, StopCriteria::default()).unwrap();
        assert_eq!(trace.records.len(), 5);
        assert_eq!(trace.stop, StopReason::Exhausted);
        assert!(run_greedy(SelectionRule::p_greedy(), engine(), random_set(3, 1), 0, StopCriteria::default()).is_err());
    }

    #[test]
    fn residual_tolerance_stops() {
        let set = random_set(60, 12);
        let stop = StopCriteria {
            residual_tol: Some(1e-2),
            ..StopCriteria::default()
        };
        let (_, trace) = run_greedy(SelectionRule::f_greedy(), engine(), set, 60, stop).unwrap();
        assert_eq!(trace.stop, StopReason::ResidualTolerance);
        assert!(trace.records.last().unwrap().max_residual <= 1e-2);
    }

    #[test]
    fn p_greedy_powers_decrease() {
        let (_, trace) = run_greedy(
            SelectionRule::p_greedy(),
            engine(),
            random_set(120, 14),
            80,
            StopCriteria::default(),
        )
        .unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].power <= w[0].power + 1e-10);
            assert_eq!(w[1].indicator, w[1].power);
        }
    }

    #[test]
    fn geometric_distances_match_fill_distance() {
        let e = engine();
        let set = random_set(100, 15);
        let fs = set.functionals().to_vec();
        let (_, trace) = run_greedy(
            SelectionRule::geometric(GeometricSpace::Dual),
            e.clone(),
            set,
            60,
            StopCriteria::default(),
        )
        .unwrap();
        let order = trace.selected_indices();
        for (n, w) in trace.records.windows(2).enumerate() {
            assert!(w[1].indicator <= w[0].indicator + 1e-12);
            let chosen: Vec<Functional> = order[..n + 1].iter().map(|&i| fs[i]).collect();
            let h = fill_distance(&e, &chosen, &fs, FillSpace::Dual).unwrap();
            assert!((w[1].indicator - h).abs() <= 1e-12, "{} vs {h}", w[1].indicator);
            assert!((w[0].fill_dual - h).abs() <= 1e-12);
        }
        let first = trace.records[1].indicator;
        assert!(trace.records.last().unwrap().indicator < first);
    }

    #[test]
    fn f_over_p_ratio_decays() {
        let (_, trace) = run_greedy(
            SelectionRule::f_over_p_greedy(),
            engine(),
            random_set(200, 16),
            120,
            StopCriteria::default(),
        )
        .unwrap();
        let ratios: Vec<f64> = trace.records.iter().map(|r| r.residual.abs() / r.power).collect();
        let q = ratios.len() / 4;
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        assert!(mean(&ratios[ratios.len() - q..]) < mean(&ratios[..q]));
    }

    #[test]
    fn scaling_samples_keeps_selection() {
        let set = random_set(80, 18);
        for name in ["p", "f", "psr", "fp", "beta:0.25", "beta:2"] {
            let rule = SelectionRule::parse(name, 0).unwrap();
            let (_, a) = run_greedy(rule, engine(), set.clone(), 30, StopCriteria::default()).unwrap();
            let (_, b) = run_greedy(rule, engine(), set.scaled(1e3), 30, StopCriteria::default()).unwrap();
            assert_eq!(a.selected_indices(), b.selected_indices(), "{name}");
        }
    }

    #[test]
    fn near_dependent_candidates_are_excluded() {
        // Two lines 1e-12 apart are numerically the same functional.
        let fs = vec![
            Functional::radon(0.1, 0.5).unwrap(),
            Functional::radon(0.1 + 1e-12, 0.5).unwrap(),
            Functional::radon(-0.3, 1.5).unwrap(),
        ];
        let set = CandidateSet::new(fs, vec![1.0, 1.0, 0.5]).unwrap();
        let (model, trace) = run_greedy(
            SelectionRule::geometric(GeometricSpace::Parameter(ParameterMetric::default())),
            engine(),
            set,
            3,
            StopCriteria::default(),
        )
        .unwrap();
        assert_eq!(model.len(), 2);
        assert_eq!(trace.exclusions.len(), 1);
        assert_eq!(trace.stop, StopReason::Exhausted);
    }
}
