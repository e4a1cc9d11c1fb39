//! Markov stopping rules on path prefixes and the transformed measure
//! `μ_T(h) = P(x_T = h)`.
//!
//! Rules are evaluated incrementally: a rule sees one increment at a time and
//! carries a small decision state, so a verdict at step `n` cannot depend on
//! anything after step `n`. The exact engine walks the prefix tree level by
//! level and merges prefixes that agree on `(position, decision state)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::group::{GroupElement, GroupSpec};
use crate::measure::{FiniteMeasure, MeasureError};
use crate::path::{PathPrefix, Sampler};
use crate::rng::{SeededStream, StreamRng};
use crate::scalar::Weight;

/// Default horizon for exact and Monte Carlo transforms.
pub const DEFAULT_MAX_HORIZON: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("Monte Carlo needs at least one sample")]
    NoSamples,
    #[error("invalid stopping rule: {0}")]
    InvalidRule(String),
    #[error("rule element {element:?} is not in {group}")]
    ForeignElement { element: GroupElement, group: GroupSpec },
    #[error("invalid auxiliary space: {0}")]
    InvalidAux(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stop,
    Continue,
}

/// Outcome of feeding one more step to a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Next<St> {
    Stop,
    Continue(St),
}

/// Decision state of a built-in rule after some prefix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleState {
    /// Steps taken so far.
    Steps(usize),
    /// Position relative to where the rule started.
    Relative(GroupElement),
    /// Memoryless rules need nothing.
    Fresh,
    First(Box<RuleState>),
    Second(Box<RuleState>),
    /// Whole increment history; rules in this state cannot be merged.
    History(Vec<GroupElement>),
}

/// `stops(h₁..hₙ)` is true when the rule fires at `n` (given it has not fired
/// earlier).
pub type PrefixPredicate = Arc<dyn Fn(&[GroupElement]) -> bool + Send + Sync>;

/// A Markov stopping time on the path space of a random walk.
#[derive(Clone)]
pub enum StoppingRule {
    /// `T ≡ n`.
    Constant(usize),
    /// First `n ≥ 1` with `xₙ ∈ A`.
    FirstVisit(BTreeSet<GroupElement>),
    /// First `n ≥ 1` with `hₙ ∈ B`.
    FirstIncrement(BTreeSet<GroupElement>),
    /// `T₁(x̄) + T₂(U^{T₁}x̄)`.
    Sequential(Box<StoppingRule>, Box<StoppingRule>),
    /// Arbitrary prefix predicate, explored without state merging.
    Custom { name: String, stops: PrefixPredicate },
}

impl fmt::Debug for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

fn set_literal(set: &BTreeSet<GroupElement>) -> String {
    set.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" ")
}

impl StoppingRule {
    pub fn constant(n: usize) -> Result<Self, TransformError> {
        if n < 1 {
            return Err(TransformError::InvalidRule("constant time must be at least 1".into()));
        }
        Ok(StoppingRule::Constant(n))
    }

    pub fn first_visit(set: BTreeSet<GroupElement>) -> Result<Self, TransformError> {
        if set.is_empty() {
            return Err(TransformError::InvalidRule("first-visit set is empty".into()));
        }
        Ok(StoppingRule::FirstVisit(set))
    }

    pub fn first_increment(set: BTreeSet<GroupElement>) -> Result<Self, TransformError> {
        if set.is_empty() {
            return Err(TransformError::InvalidRule("first-increment set is empty".into()));
        }
        Ok(StoppingRule::FirstIncrement(set))
    }

    pub fn sequential(first: StoppingRule, second: StoppingRule) -> Self {
        StoppingRule::Sequential(Box::new(first), Box::new(second))
    }

    /// Folds a nonempty list into nested sequential compositions.
    pub fn sequence(rules: Vec<StoppingRule>) -> Result<Self, TransformError> {
        let mut it = rules.into_iter();
        let first = it.next().ok_or_else(|| TransformError::InvalidRule("empty sequence".into()))?;
        Ok(it.fold(first, StoppingRule::sequential))
    }

    pub fn custom(name: impl Into<String>, stops: impl Fn(&[GroupElement]) -> bool + Send + Sync + 'static) -> Self {
        StoppingRule::Custom { name: name.into(), stops: Arc::new(stops) }
    }

    pub fn describe(&self) -> String {
        match self {
            StoppingRule::Constant(n) => format!("constant({n})"),
            StoppingRule::FirstVisit(a) => format!("first-visit({})", set_literal(a)),
            StoppingRule::FirstIncrement(b) => format!("first-increment({})", set_literal(b)),
            StoppingRule::Sequential(a, b) => format!("{} then {}", a.describe(), b.describe()),
            StoppingRule::Custom { name, .. } => format!("custom({name})"),
        }
    }

    /// Checks that every element the rule mentions lives in `group`.
    pub fn check_group(&self, group: GroupSpec) -> Result<(), TransformError> {
        let check = |set: &BTreeSet<GroupElement>| {
            set.iter().find(|g| !g.belongs_to(group)).map_or(Ok(()), |g| {
                Err(TransformError::ForeignElement { element: g.clone(), group })
            })
        };
        match self {
            StoppingRule::FirstVisit(s) | StoppingRule::FirstIncrement(s) => check(s),
            StoppingRule::Sequential(a, b) => {
                a.check_group(group)?;
                b.check_group(group)
            }
            StoppingRule::Constant(_) | StoppingRule::Custom { .. } => Ok(()),
        }
    }

    /// A fixed time by which the rule always stops, if known.
    pub fn horizon_bound(&self) -> Option<usize> {
        match self {
            StoppingRule::Constant(n) => Some(*n),
            StoppingRule::Sequential(a, b) => Some(a.horizon_bound()? + b.horizon_bound()?),
            _ => None,
        }
    }

    /// `ρ < 1` with `P(T > n) ≤ C ρⁿ` under `mu`, if known.
    pub fn tail_ratio<S: Weight>(&self, mu: &FiniteMeasure<S>) -> Option<f64> {
        match self {
            StoppingRule::Constant(_) => Some(0.0),
            StoppingRule::FirstIncrement(b) => {
                let hit: f64 = b.iter().map(|g| mu.weight(g).as_f64()).sum();
                (hit > 0.0).then_some(1.0 - hit)
            }
            StoppingRule::Sequential(a, b) => Some(a.tail_ratio(mu)?.max(b.tail_ratio(mu)?)),
            _ => None,
        }
    }

    /// Whether the decision state is small enough for prefix merging.
    pub fn has_decision_state(&self) -> bool {
        match self {
            StoppingRule::Custom { .. } => false,
            StoppingRule::Sequential(a, b) => a.has_decision_state() && b.has_decision_state(),
            _ => true,
        }
    }

    pub fn start(&self, group: GroupSpec) -> RuleState {
        match self {
            StoppingRule::Constant(_) => RuleState::Steps(0),
            StoppingRule::FirstVisit(_) => RuleState::Relative(group.identity()),
            StoppingRule::FirstIncrement(_) => RuleState::Fresh,
            StoppingRule::Sequential(a, _) => RuleState::First(Box::new(a.start(group))),
            StoppingRule::Custom { .. } => RuleState::History(Vec::new()),
        }
    }

    /// Feeds increment `h` to a rule in `state`.
    pub fn advance(&self, group: GroupSpec, state: &RuleState, h: &GroupElement) -> Next<RuleState> {
        match (self, state) {
            (StoppingRule::Constant(n), RuleState::Steps(k)) => {
                if k + 1 >= *n {
                    Next::Stop
                } else {
                    Next::Continue(RuleState::Steps(k + 1))
                }
            }
            (StoppingRule::FirstVisit(a), RuleState::Relative(x)) => {
                let y = x * h;
                if a.contains(&y) {
                    Next::Stop
                } else {
                    Next::Continue(RuleState::Relative(y))
                }
            }
            (StoppingRule::FirstIncrement(b), RuleState::Fresh) => {
                if b.contains(h) {
                    Next::Stop
                } else {
                    Next::Continue(RuleState::Fresh)
                }
            }
            (StoppingRule::Sequential(a, b), RuleState::First(s)) => match a.advance(group, s, h) {
                Next::Stop => Next::Continue(RuleState::Second(Box::new(b.start(group)))),
                Next::Continue(s) => Next::Continue(RuleState::First(Box::new(s))),
            },
            (StoppingRule::Sequential(_, b), RuleState::Second(s)) => match b.advance(group, s, h) {
                Next::Stop => Next::Stop,
                Next::Continue(s) => Next::Continue(RuleState::Second(Box::new(s))),
            },
            (StoppingRule::Custom { stops, .. }, RuleState::History(hist)) => {
                let mut hist = hist.clone();
                hist.push(h.clone());
                if stops(&hist) {
                    Next::Stop
                } else {
                    Next::Continue(RuleState::History(hist))
                }
            }
            (rule, state) => panic!("state {state:?} does not belong to rule {}", rule.describe()),
        }
    }

    /// `T(x̄)` if the rule fires within the prefix.
    pub fn stop_time(&self, path: &PathPrefix) -> Option<usize> {
        let mut state = self.start(path.group());
        for (i, h) in path.increments().iter().enumerate() {
            match self.advance(path.group(), &state, h) {
                Next::Stop => return Some(i + 1),
                Next::Continue(s) => state = s,
            }
        }
        None
    }

    /// `Stop` iff `T ≤ n` for a prefix of length `n`.
    pub fn verdict(&self, path: &PathPrefix) -> Verdict {
        match self.stop_time(path) {
            Some(_) => Verdict::Stop,
            None => Verdict::Continue,
        }
    }
}

/// The iterated stopping times `T₁ < T₂ < ⋯` found within `path`, where
/// `T_{i+1} = T_i + T(U^{T_i} x̄)`.
pub fn iterate_stops(rule: &StoppingRule, path: &PathPrefix) -> Vec<usize> {
    let mut stops = Vec::new();
    let mut offset = 0;
    while offset < path.len() {
        let rest = path.increment_shift(offset).expect("offset within path");
        match rule.stop_time(&rest) {
            Some(t) => {
                offset += t;
                stops.push(offset);
            }
            None => break,
        }
    }
    stops
}

/// Law of `x_T` together with its accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult<S> {
    /// `μ_T` restricted to paths that stopped within the horizon.
    pub measure: FiniteMeasure<S>,
    /// Probability (or fraction of samples) not stopped within the horizon.
    pub mass_deficit: S,
    /// Mean of `T` over stopped paths.
    pub mean_stopping_time: f64,
    /// Depth explored (exact) or per-path step cap (Monte Carlo).
    pub horizon: usize,
    /// The exact engine hit `max_horizon` with unstopped mass above epsilon.
    pub truncated: bool,
}

/// One-step branching of a stopped walk: from a decision state, every
/// increment with its probability and the next state.
pub trait StepKernel<S: Weight> {
    type State: Clone + Ord;

    fn group(&self) -> GroupSpec;
    fn start(&self) -> Self::State;
    fn branches(&self, state: &Self::State) -> Vec<(GroupElement, S, Next<Self::State>)>;
}

/// Breadth-first exploration with per-level merging on `(position, state)`.
pub fn explore<S: Weight, K: StepKernel<S>>(kernel: &K, epsilon: &S, max_horizon: usize) -> TransformResult<S> {
    let group = kernel.group();
    let mut frontier: BTreeMap<(GroupElement, K::State), S> = BTreeMap::new();
    frontier.insert((group.identity(), kernel.start()), S::one());
    let mut stopped = FiniteMeasure::zero(group);
    let mut time_weight = S::zero();
    let mut unstopped = S::one();
    let mut depth = 0;
    let mut truncated = false;
    while !frontier.is_empty() && unstopped > *epsilon {
        if depth >= max_horizon {
            truncated = true;
            break;
        }
        depth += 1;
        let depth_weight = S::from_count(depth as u64);
        let mut cache: BTreeMap<K::State, Branches<S, K::State>> = BTreeMap::new();
        let mut next: BTreeMap<(GroupElement, K::State), S> = BTreeMap::new();
        for ((position, state), w) in frontier {
            let branches = cache.entry(state).or_insert_with_key(|s| kernel.branches(s));
            for (h, p, outcome) in branches.iter() {
                let x = &position * h;
                let mass = w.clone() * p.clone();
                match outcome {
                    Next::Stop => {
                        time_weight = time_weight + depth_weight.clone() * mass.clone();
                        stopped.add_at(x, mass);
                    }
                    Next::Continue(s) => {
                        let slot = next.entry((x, s.clone())).or_insert_with(S::zero);
                        *slot = slot.clone() + mass;
                    }
                }
            }
        }
        frontier = next;
        unstopped = frontier.values().fold(S::zero(), |acc, w| acc + w.clone());
    }
    let mean_stopping_time = if stopped.mass().is_zero() {
        0.0
    } else {
        (time_weight / stopped.mass().clone()).as_f64()
    };
    TransformResult { measure: stopped, mass_deficit: unstopped, mean_stopping_time, horizon: depth, truncated }
}

/// Sampling counterpart of [`StepKernel`]: draws one step from a state.
pub trait SampleKernel: Sync {
    type State;

    fn group(&self) -> GroupSpec;
    fn start(&self) -> Self::State;
    fn step(&self, state: Self::State, rng: &mut StreamRng) -> (GroupElement, Next<Self::State>);
}

type Branches<S, St> = Vec<(GroupElement, S, Next<St>)>;

#[derive(Default)]
struct Tally {
    counts: BTreeMap<GroupElement, u64>,
    stopped: u64,
    total_time: u128,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        for (g, c) in other.counts {
            *self.counts.entry(g).or_default() += c;
        }
        self.stopped += other.stopped;
        self.total_time += other.total_time;
        self
    }
}

/// Runs `samples` independent paths, path `i` on lane `i` of `stream`. The
/// tally is a sum of counts, so it does not depend on the rayon pool size.
pub fn monte_carlo<S: Weight, K: SampleKernel>(
    kernel: &K,
    samples: u64,
    horizon_cap: usize,
    stream: SeededStream,
) -> Result<TransformResult<S>, TransformError> {
    if samples == 0 {
        return Err(TransformError::NoSamples);
    }
    let tally = (0..samples)
        .into_par_iter()
        .fold(Tally::default, |mut tally, i| {
            let mut rng = stream.lane(i);
            let mut state = kernel.start();
            let mut x = kernel.group().identity();
            for t in 1..=horizon_cap {
                let (h, next) = kernel.step(state, &mut rng);
                x = &x * &h;
                match next {
                    Next::Stop => {
                        *tally.counts.entry(x).or_default() += 1;
                        tally.stopped += 1;
                        tally.total_time += t as u128;
                        break;
                    }
                    Next::Continue(s) => state = s,
                }
            }
            tally
        })
        .reduce(Tally::default, Tally::merge);
    let n = S::from_count(samples);
    let measure = FiniteMeasure::from_weights(
        kernel.group(),
        tally.counts.into_iter().map(|(g, c)| (g, S::from_count(c) / n.clone())),
    )?;
    let mean_stopping_time =
        if tally.stopped == 0 { 0.0 } else { tally.total_time as f64 / tally.stopped as f64 };
    Ok(TransformResult {
        measure,
        mass_deficit: S::from_count(samples - tally.stopped) / n,
        mean_stopping_time,
        horizon: horizon_cap,
        truncated: false,
    })
}

struct RuleKernel<'a, S> {
    mu: &'a FiniteMeasure<S>,
    rule: &'a StoppingRule,
    sampler: Option<Sampler>,
}

impl<S: Weight> StepKernel<S> for RuleKernel<'_, S> {
    type State = RuleState;

    fn group(&self) -> GroupSpec {
        self.mu.group()
    }

    fn start(&self) -> RuleState {
        self.rule.start(self.mu.group())
    }

    fn branches(&self, state: &RuleState) -> Vec<(GroupElement, S, Next<RuleState>)> {
        self.mu
            .iter()
            .map(|(g, w)| (g.clone(), w.clone(), self.rule.advance(self.mu.group(), state, g)))
            .collect()
    }
}

impl<S: Weight> SampleKernel for RuleKernel<'_, S> {
    type State = RuleState;

    fn group(&self) -> GroupSpec {
        self.mu.group()
    }

    fn start(&self) -> RuleState {
        self.rule.start(self.mu.group())
    }

    fn step(&self, state: RuleState, rng: &mut StreamRng) -> (GroupElement, Next<RuleState>) {
        let h = self.sampler.as_ref().expect("sampler").draw(rng).clone();
        let next = self.rule.advance(self.mu.group(), &state, &h);
        (h, next)
    }
}

fn check_inputs<S: Weight>(mu: &FiniteMeasure<S>, rule: &StoppingRule) -> Result<(), TransformError> {
    mu.require_probability()?;
    rule.check_group(mu.group())
}

/// Exact `μ_T`: explores the prefix tree until the unstopped mass is at most
/// `epsilon` or the depth reaches `max_horizon`. Never renormalizes.
pub fn exact_transform<S: Weight>(
    mu: &FiniteMeasure<S>,
    rule: &StoppingRule,
    epsilon: &S,
    max_horizon: usize,
) -> Result<TransformResult<S>, TransformError> {
    check_inputs(mu, rule)?;
    if !epsilon.is_positive() {
        return Err(TransformError::NonPositiveEpsilon);
    }
    if !rule.has_decision_state() {
        log::warn!("{} has no finite decision state; exploring the full prefix tree", rule.describe());
    }
    Ok(explore(&RuleKernel { mu, rule, sampler: None }, epsilon, max_horizon))
}

/// Empirical `μ_T` from `samples` paths capped at `horizon_cap` steps.
pub fn monte_carlo_transform<S: Weight>(
    mu: &FiniteMeasure<S>,
    rule: &StoppingRule,
    samples: u64,
    horizon_cap: usize,
    stream: SeededStream,
) -> Result<TransformResult<S>, TransformError> {
    check_inputs(mu, rule)?;
    let kernel = RuleKernel { mu, rule, sampler: Some(Sampler::new(mu)?) };
    monte_carlo(&kernel, samples, horizon_cap, stream)
}

/// Anything that turns a walk measure into a transformed measure, exactly or
/// by sampling: plain stopping rules and rules on the extended chain.
pub trait Transform<S: Weight>: Sync {
    fn describe(&self) -> String;

    fn exact(&self, mu: &FiniteMeasure<S>, epsilon: &S, max_horizon: usize) -> Result<TransformResult<S>, TransformError>;

    fn monte_carlo(
        &self,
        mu: &FiniteMeasure<S>,
        samples: u64,
        horizon_cap: usize,
        stream: SeededStream,
    ) -> Result<TransformResult<S>, TransformError>;
}

impl<S: Weight> Transform<S> for StoppingRule {
    fn describe(&self) -> String {
        StoppingRule::describe(self)
    }

    fn exact(&self, mu: &FiniteMeasure<S>, epsilon: &S, max_horizon: usize) -> Result<TransformResult<S>, TransformError> {
        exact_transform(mu, self, epsilon, max_horizon)
    }

    fn monte_carlo(
        &self,
        mu: &FiniteMeasure<S>,
        samples: u64,
        horizon_cap: usize,
        stream: SeededStream,
    ) -> Result<TransformResult<S>, TransformError> {
        monte_carlo_transform(mu, self, samples, horizon_cap, stream)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::sample_prefix;
    use crate::scalar::Rational;

    type M = FiniteMeasure<Rational>;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn z() -> GroupSpec {
        GroupSpec::Integers { rank: 1 }
    }

    fn srw() -> M {
        M::uniform(z(), &[GroupElement::int(1), GroupElement::int(-1)]).unwrap()
    }

    fn set(xs: &[i64]) -> BTreeSet<GroupElement> {
        xs.iter().map(|&x| GroupElement::int(x)).collect()
    }

    fn eps() -> Rational {
        Rational::default_epsilon()
    }

    #[test]
    fn constant_one_gives_mu() {
        let r = exact_transform(&srw(), &StoppingRule::constant(1).unwrap(), &eps(), 100).unwrap();
        assert_eq!(r.measure, srw());
        assert_eq!(r.mass_deficit, q(0, 1));
        assert_eq!(r.mean_stopping_time, 1.0);
    }

    #[test]
    fn constant_two_on_z2() {
        let mu = M::dirac(GroupElement::cyclic(1, 2));
        let r = exact_transform(&mu, &StoppingRule::constant(2).unwrap(), &eps(), 100).unwrap();
        assert_eq!(r.measure, M::dirac(GroupElement::cyclic(0, 2)));
    }

    #[test]
    fn constant_three_on_srw() {
        let r = exact_transform(&srw(), &StoppingRule::constant(3).unwrap(), &eps(), 100).unwrap();
        let expected = M::from_weights(
            z(),
            [(3, q(1, 8)), (1, q(3, 8)), (-1, q(3, 8)), (-3, q(1, 8))].map(|(k, w)| (GroupElement::int(k), w)),
        )
        .unwrap();
        assert_eq!(r.measure, expected);
        assert!(StoppingRule::constant(0).is_err());
    }

    #[test]
    fn first_visit_on_z2() {
        let mu = M::dirac(GroupElement::cyclic(1, 2));
        let rule = StoppingRule::first_visit(BTreeSet::from([GroupElement::cyclic(0, 2)])).unwrap();
        let r = exact_transform(&mu, &rule, &eps(), 100).unwrap();
        assert_eq!(r.measure, M::dirac(GroupElement::cyclic(0, 2)));
        assert_eq!(r.mass_deficit, q(0, 1));
        assert_eq!(r.horizon, 2);
    }

    #[test]
    fn first_visit_on_recurrent_srw_deficit_shrinks() {
        let rule = StoppingRule::first_visit(set(&[1])).unwrap();
        let small = exact_transform(&srw(), &rule, &q(1, 1_000_000), 50).unwrap();
        let large = exact_transform(&srw(), &rule, &q(1, 1_000_000), 400).unwrap();
        assert!(small.truncated && large.truncated);
        assert_eq!(small.measure.support().collect::<Vec<_>>(), vec![&GroupElement::int(1)]);
        assert!(large.mass_deficit < small.mass_deficit);
        // P(T > n) decays like n^{-1/2}: quadrupling n roughly halves it
        let ratio = small.mass_deficit.as_f64() / large.mass_deficit.as_f64();
        assert!((2.0..3.5).contains(&ratio), "ratio {ratio}");
        assert_eq!(small.measure.mass().clone() + small.mass_deficit.clone(), q(1, 1));
    }

    #[test]
    fn first_increment_geometric_on_srw() {
        let rule = StoppingRule::first_increment(set(&[-1])).unwrap();
        let r = exact_transform(&srw(), &rule, &eps(), 10_000).unwrap();
        for k in -1..=17i64 {
            assert_eq!(r.measure.weight(&GroupElement::int(k)), q(1, 2).pow_n((k + 2) as u32), "k={k}");
        }
        assert_eq!(r.mass_deficit, eps());
        assert!(!r.truncated);
    }

    #[test]
    fn first_increment_covering_support_is_one_step() {
        let rule = StoppingRule::first_increment(set(&[-1, 1])).unwrap();
        let r = exact_transform(&srw(), &rule, &eps(), 100).unwrap();
        assert_eq!(r.measure, srw());
    }

    #[test]
    fn iterate_stops_examples() {
        let p = PathPrefix::from_increments(z(), (0..10).map(|i| GroupElement::int(if i % 3 == 0 { 1 } else { -1 })).collect());
        assert_eq!(iterate_stops(&StoppingRule::constant(2).unwrap(), &p), vec![2, 4, 6, 8, 10]);
        let p = PathPrefix::from_increments(z(), [1, 1, -1, -1, 1, -1].map(GroupElement::int).to_vec());
        let rule = StoppingRule::first_increment(set(&[-1])).unwrap();
        assert_eq!(iterate_stops(&rule, &p), vec![3, 4, 6]);
    }

    #[test]
    fn verdict_is_monotone() {
        let rule = StoppingRule::first_visit(set(&[2])).unwrap();
        let p = PathPrefix::from_increments(z(), [1, 1, -1, 1].map(GroupElement::int).to_vec());
        assert_eq!(rule.stop_time(&p), Some(2));
        assert_eq!(rule.verdict(&p.prefix(1)), Verdict::Continue);
        for n in 2..=4 {
            assert_eq!(rule.verdict(&p.prefix(n)), Verdict::Stop);
        }
    }

    #[test]
    fn sequential_of_constants_is_constant() {
        let seq = StoppingRule::sequential(StoppingRule::constant(2).unwrap(), StoppingRule::constant(3).unwrap());
        assert_eq!(seq.horizon_bound(), Some(5));
        let a = exact_transform(&srw(), &seq, &eps(), 100).unwrap();
        assert_eq!(a.measure, srw().power(5));
    }

    #[test]
    fn custom_rule_matches_builtin() {
        let b = GroupElement::int(-1);
        let custom = StoppingRule::custom("last increment is -1", move |h: &[GroupElement]| h.last() == Some(&b));
        assert!(!custom.has_decision_state());
        let builtin = StoppingRule::first_increment(set(&[-1])).unwrap();
        let e = q(1, 1 << 10);
        let x = exact_transform(&srw(), &custom, &e, 100).unwrap();
        let y = exact_transform(&srw(), &builtin, &e, 100).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn monte_carlo_constant_one_concentrates() {
        let n = 20_000;
        let r: TransformResult<f64> = monte_carlo_transform(&srw().to_f64(), &StoppingRule::Constant(1), n, 10, SeededStream::new(3, 0)).unwrap();
        let tv = r.measure.total_variation(&srw().to_f64()).unwrap();
        assert!(tv <= 4.0 * (2.0 / n as f64).sqrt(), "tv {tv}");
        assert_eq!(r.mass_deficit, 0.0);
    }

    #[test]
    fn monte_carlo_cap_below_constant_stops_nothing() {
        let r: TransformResult<Rational> = monte_carlo_transform(&srw(), &StoppingRule::Constant(2), 100, 1, SeededStream::new(3, 0)).unwrap();
        assert!(r.measure.is_empty());
        assert_eq!(r.mass_deficit, q(1, 1));
        assert!(monte_carlo_transform(&srw(), &StoppingRule::Constant(2), 0, 1, SeededStream::new(3, 0)).is_err());
    }

    #[test]
    fn monte_carlo_is_deterministic_across_pool_sizes() {
        let rule = StoppingRule::first_increment(set(&[-1])).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                monte_carlo_transform(&srw(), &rule, 5_000, 1000, SeededStream::new(11, 4)).unwrap()
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn second_iterate_matches_convolution_square() {
        let rule = StoppingRule::first_increment(set(&[-1])).unwrap();
        let exact = exact_transform(&srw(), &rule, &eps(), 10_000).unwrap().measure.to_f64();
        let square = exact.convolve(&exact).unwrap();
        let n = 20_000u64;
        let mut counts: BTreeMap<GroupElement, f64> = BTreeMap::new();
        for i in 0..n {
            let p = sample_prefix(&srw(), 120, SeededStream::new(5, i)).unwrap();
            let stops = iterate_stops(&rule, &p);
            if stops.len() >= 2 {
                *counts.entry(p.position(stops[1])).or_default() += 1.0 / n as f64;
            }
        }
        let empirical = FiniteMeasure::from_weights(z(), counts).unwrap();
        let tv = empirical.total_variation(&square).unwrap();
        assert!(tv <= 3e-2, "tv {tv}");
    }

    #[test]
    fn foreign_rule_elements_are_rejected() {
        let rule = StoppingRule::first_visit(BTreeSet::from([GroupElement::cyclic(0, 2)])).unwrap();
        assert!(matches!(exact_transform(&srw(), &rule, &eps(), 10), Err(TransformError::ForeignElement { .. })));
        assert!(StoppingRule::first_visit(BTreeSet::new()).is_err());
        assert!(matches!(
            exact_transform(&srw(), &StoppingRule::Constant(1), &q(0, 1), 10),
            Err(TransformError::NonPositiveEpsilon)
        ));
    }

    #[test]
    fn tail_ratios() {
        let rule = StoppingRule::first_increment(set(&[-1])).unwrap();
        assert_eq!(rule.tail_ratio(&srw()), Some(0.5));
        assert_eq!(StoppingRule::first_visit(set(&[1])).unwrap().tail_ratio(&srw()), None);
    }
}
