//! The walk extended to `G × X`: each step pairs the increment with an
//! auxiliary draw `γₙ ∈ X`, and stopping rules may read the draws.
//!
//! Two auxiliary spaces are supported: finitely many weighted points (used to
//! realize convex combinations `Σ aₙ μ^{*n}`), and the unit interval cut into
//! cells `I_g = A_g ⊔ B_g` of lengths `α(g)` and `β(g)` (used to realize
//! `(1 − α)^{-1} * β` for overlapping splits).
//!
//! In the interval construction the increment must be read off the draw
//! (`hₙ = g` iff `γₙ ∈ I_g`), otherwise stopping on `γₙ ∈ ⋃ B_g` would not
//! produce `β`. The coupled sampler does exactly that; the uncoupled sampler
//! draws `hₙ` independently and uses `γₙ` as a coin placed inside `I_{hₙ}`,
//! which has the same law.

use std::collections::BTreeMap;

use crate::group::{GroupElement, GroupSpec};
use crate::measure::{FiniteMeasure, SplitPair};
use crate::path::{PathPrefix, Sampler};
use crate::rng::{uniform, SeededStream, StreamRng};
use crate::scalar::Weight;
use crate::stopping::{explore, monte_carlo, Next, SampleKernel, StepKernel, Transform, TransformError, TransformResult};

/// One cell `I_g = [start, start + α(g) + β(g))` of the interval partition,
/// with `A_g` on the left and `B_g` on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCell<S> {
    pub element: GroupElement,
    pub start: S,
    pub alpha: S,
    pub beta: S,
}

impl<S: Weight> IntervalCell<S> {
    pub fn len(&self) -> S {
        self.alpha.clone() + self.beta.clone()
    }
}

/// Partition of `(0, 1)` into cells ordered by canonical element order.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPartition<S> {
    group: GroupSpec,
    cells: Vec<IntervalCell<S>>,
    /// Right end of each cell, as floats, for locating uniform draws.
    ends: Vec<f64>,
}

impl<S: Weight> IntervalPartition<S> {
    pub fn from_split(split: &SplitPair<S>) -> Result<Self, TransformError> {
        let mu = split.reassemble();
        if !mu.is_probability() {
            return Err(TransformError::InvalidAux(format!(
                "cells must cover (0, 1); alpha + beta has mass {}",
                mu.mass().as_f64()
            )));
        }
        let mut cells = Vec::with_capacity(mu.len());
        let mut ends = Vec::with_capacity(mu.len());
        let mut start = S::zero();
        for g in mu.support() {
            let cell = IntervalCell {
                element: g.clone(),
                start: start.clone(),
                alpha: split.alpha.weight(g),
                beta: split.beta.weight(g),
            };
            start = start + cell.len();
            ends.push(start.as_f64());
            cells.push(cell);
        }
        Ok(IntervalPartition { group: mu.group(), cells, ends })
    }

    pub fn cells(&self) -> &[IntervalCell<S>] {
        &self.cells
    }

    /// The measure `μ(g) = |I_g|`.
    pub fn measure(&self) -> FiniteMeasure<S> {
        let mut m = FiniteMeasure::zero(self.group);
        for c in &self.cells {
            m.add_at(c.element.clone(), c.len());
        }
        m
    }

    pub fn alpha(&self) -> FiniteMeasure<S> {
        let mut m = FiniteMeasure::zero(self.group);
        for c in &self.cells {
            m.add_at(c.element.clone(), c.alpha.clone());
        }
        m
    }

    pub fn beta(&self) -> FiniteMeasure<S> {
        let mut m = FiniteMeasure::zero(self.group);
        for c in &self.cells {
            m.add_at(c.element.clone(), c.beta.clone());
        }
        m
    }

    /// Cell containing `u ∈ [0, 1)`.
    pub fn locate(&self, u: f64) -> &IntervalCell<S> {
        let u = u * self.ends.last().copied().unwrap_or(1.0);
        let i = self.ends.partition_point(|&e| e <= u);
        &self.cells[i.min(self.cells.len() - 1)]
    }

    fn cell_of(&self, g: &GroupElement) -> Option<&IntervalCell<S>> {
        self.cells.binary_search_by(|c| c.element.cmp(g)).ok().map(|i| &self.cells[i])
    }

    /// Whether `u` lies in `⋃_g B_g`.
    pub fn in_beta(&self, u: f64) -> bool {
        let c = self.locate(u);
        let scale = self.ends.last().copied().unwrap_or(1.0);
        u * scale >= (c.start.clone() + c.alpha.clone()).as_f64()
    }

    /// Places `u` inside `I_g` affinely and tests whether it lands in `B_g`.
    pub fn coin_in_beta(&self, g: &GroupElement, u: f64) -> bool {
        match self.cell_of(g) {
            Some(c) => u * c.len().as_f64() >= c.alpha.as_f64(),
            None => false,
        }
    }
}

/// The auxiliary Lebesgue space `(X, m)`.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxSpace<S> {
    /// Points `bᵢ` with weights `aᵢ`.
    Discrete { points: Vec<(i64, S)> },
    /// `(0, 1)` with Lebesgue measure and a partition keyed by group elements.
    UnitInterval(IntervalPartition<S>),
}

impl<S: Weight> AuxSpace<S> {
    pub fn discrete(points: Vec<(i64, S)>) -> Result<Self, TransformError> {
        let mut merged: BTreeMap<i64, S> = BTreeMap::new();
        for (b, a) in points {
            if a.is_negative() {
                return Err(TransformError::InvalidAux(format!("negative weight at point {b}")));
            }
            if a.is_zero() {
                continue;
            }
            let slot = merged.entry(b).or_insert_with(S::zero);
            *slot = slot.clone() + a;
        }
        let total = merged.values().fold(S::zero(), |acc, a| acc + a.clone());
        if (total.clone() - S::one()).abs() > S::mass_tolerance() {
            return Err(TransformError::InvalidAux(format!("point weights sum to {}", total.as_f64())));
        }
        Ok(AuxSpace::Discrete { points: merged.into_iter().collect() })
    }

    pub fn from_split(split: &SplitPair<S>) -> Result<Self, TransformError> {
        Ok(AuxSpace::UnitInterval(IntervalPartition::from_split(split)?))
    }
}

/// An auxiliary draw `γₙ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxDraw {
    Point(i64),
    Uniform(f64),
}

/// Pairs `(hᵢ, γᵢ)` with the derived positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPrefix {
    path: PathPrefix,
    draws: Vec<AuxDraw>,
    coupled: bool,
}

impl ExtendedPrefix {
    pub fn new(group: GroupSpec, coupled: bool) -> Self {
        ExtendedPrefix { path: PathPrefix::empty(group), draws: Vec::new(), coupled }
    }

    pub fn push(&mut self, h: GroupElement, gamma: AuxDraw) {
        self.path.push(h);
        self.draws.push(gamma);
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draws(&self) -> &[AuxDraw] {
        &self.draws
    }

    pub fn is_coupled(&self) -> bool {
        self.coupled
    }

    /// The first coordinates, a plain path prefix.
    pub fn projection(&self) -> &PathPrefix {
        &self.path
    }
}

/// Draws auxiliary points according to their weights.
#[derive(Debug, Clone)]
struct PointSampler {
    values: Vec<i64>,
    cumulative: Vec<f64>,
}

impl PointSampler {
    fn new<S: Weight>(points: &[(i64, S)]) -> Self {
        let mut acc = 0.0;
        let mut values = Vec::new();
        let mut cumulative = Vec::new();
        for (b, a) in points {
            acc += a.as_f64();
            values.push(*b);
            cumulative.push(acc);
        }
        PointSampler { values, cumulative }
    }

    fn draw(&self, rng: &mut StreamRng) -> i64 {
        let u = uniform(rng) * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.values[i.min(self.values.len() - 1)]
    }
}

fn check_partition_matches<S: Weight>(mu: &FiniteMeasure<S>, partition: &IntervalPartition<S>) -> Result<(), TransformError> {
    let tv = mu.total_variation(&partition.measure())?;
    if tv > S::mass_tolerance() {
        return Err(TransformError::InvalidAux("interval partition is not built from a split of the walk's measure".into()));
    }
    Ok(())
}

/// One extended step drawn from `stream`'s generator.
fn draw_step<S: Weight>(
    sampler: &Sampler,
    aux: &AuxSpace<S>,
    points: Option<&PointSampler>,
    coupled: bool,
    rng: &mut StreamRng,
) -> (GroupElement, AuxDraw) {
    match (aux, coupled) {
        (AuxSpace::UnitInterval(p), true) => {
            let u = uniform(rng);
            (p.locate(u).element.clone(), AuxDraw::Uniform(u))
        }
        (AuxSpace::UnitInterval(_), false) => {
            let h = sampler.draw(rng).clone();
            (h, AuxDraw::Uniform(uniform(rng)))
        }
        (AuxSpace::Discrete { .. }, _) => {
            let h = sampler.draw(rng).clone();
            (h, AuxDraw::Point(points.expect("point sampler").draw(rng)))
        }
    }
}

/// Samples `length` steps of the extended chain. Uncoupled: `γᵢ ~ m`
/// independent of the increments. Coupled (interval only): `γᵢ` uniform and
/// `hᵢ` read off the cell containing it.
pub fn sample_extended<S: Weight>(
    mu: &FiniteMeasure<S>,
    aux: &AuxSpace<S>,
    length: usize,
    stream: SeededStream,
    coupled: bool,
) -> Result<ExtendedPrefix, TransformError> {
    let sampler = Sampler::new(mu)?;
    let points = match aux {
        AuxSpace::Discrete { points } => {
            if coupled {
                return Err(TransformError::InvalidAux("coupled sampling needs the unit-interval space".into()));
            }
            Some(PointSampler::new(points))
        }
        AuxSpace::UnitInterval(p) => {
            if coupled {
                check_partition_matches(mu, p)?;
            }
            None
        }
    };
    let mut rng = stream.rng();
    let mut out = ExtendedPrefix::new(mu.group(), coupled);
    for _ in 0..length {
        let (h, gamma) = draw_step(&sampler, aux, points.as_ref(), coupled, &mut rng);
        out.push(h, gamma);
    }
    Ok(out)
}

/// Stopping rules that read the auxiliary coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtendedRule<S> {
    /// `T = γ₁`; the points of the discrete space are the stopping times.
    AuxFirstCoordinate { points: Vec<(u64, S)> },
    /// First `n` with `γₙ ∈ ⋃_g B_g`.
    BetaFlag { partition: IntervalPartition<S> },
}

impl<S: Weight> ExtendedRule<S> {
    pub fn aux_first_coordinate(aux: &AuxSpace<S>) -> Result<Self, TransformError> {
        match aux {
            AuxSpace::Discrete { points } => {
                let mut out = Vec::with_capacity(points.len());
                for (b, a) in points {
                    if *b < 1 {
                        return Err(TransformError::InvalidRule(format!("stopping time {b} must be a positive integer")));
                    }
                    out.push((*b as u64, a.clone()));
                }
                Ok(ExtendedRule::AuxFirstCoordinate { points: out })
            }
            AuxSpace::UnitInterval(_) => {
                Err(TransformError::InvalidRule("first-coordinate rule needs a discrete auxiliary space".into()))
            }
        }
    }

    pub fn beta_flag(aux: &AuxSpace<S>) -> Result<Self, TransformError> {
        match aux {
            AuxSpace::UnitInterval(p) => Ok(ExtendedRule::BetaFlag { partition: p.clone() }),
            AuxSpace::Discrete { .. } => {
                Err(TransformError::InvalidRule("beta-flag rule needs the unit-interval space".into()))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ExtendedRule::AuxFirstCoordinate { points } => {
                let pts: Vec<String> = points.iter().map(|(b, a)| format!("{b}:{}", a.to_literal())).collect();
                format!("aux-first-coordinate({})", pts.join(" "))
            }
            ExtendedRule::BetaFlag { .. } => "beta-flag".to_string(),
        }
    }

    /// `T` on an extended prefix, if it fires within the prefix.
    pub fn stop_time(&self, prefix: &ExtendedPrefix) -> Option<usize> {
        match self {
            ExtendedRule::AuxFirstCoordinate { .. } => match prefix.draws().first()? {
                AuxDraw::Point(b) if *b >= 1 && (*b as usize) <= prefix.len() => Some(*b as usize),
                _ => None,
            },
            ExtendedRule::BetaFlag { partition } => {
                let increments = prefix.projection().increments();
                prefix.draws().iter().zip(increments).position(|(gamma, h)| match gamma {
                    AuxDraw::Uniform(u) if prefix.is_coupled() => partition.in_beta(*u),
                    AuxDraw::Uniform(u) => partition.coin_in_beta(h, *u),
                    AuxDraw::Point(_) => false,
                }).map(|i| i + 1)
            }
        }
    }

    fn check_against(&self, mu: &FiniteMeasure<S>, aux: &AuxSpace<S>) -> Result<(), TransformError> {
        mu.require_probability()?;
        match (self, aux) {
            (ExtendedRule::AuxFirstCoordinate { points }, AuxSpace::Discrete { points: aux_points }) => {
                let same = points.len() == aux_points.len()
                    && points.iter().zip(aux_points).all(|((b, a), (c, w))| *b as i64 == *c && a == w);
                if same {
                    Ok(())
                } else {
                    Err(TransformError::InvalidAux("rule was built from a different point space".into()))
                }
            }
            (ExtendedRule::BetaFlag { partition }, AuxSpace::UnitInterval(p)) => {
                if partition != p {
                    return Err(TransformError::InvalidAux("rule was built from a different partition".into()));
                }
                check_partition_matches(mu, p)
            }
            _ => Err(TransformError::InvalidAux("rule and auxiliary space kinds differ".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum ExtState {
    Start,
    /// Steps left before an auxiliary-time stop.
    Countdown(u64),
    Running,
}

struct ExtKernel<'a, S> {
    mu: &'a FiniteMeasure<S>,
    aux: &'a AuxSpace<S>,
    rule: &'a ExtendedRule<S>,
    coupled: bool,
    sampler: Option<Sampler>,
    points: Option<PointSampler>,
}

impl<S: Weight> ExtKernel<'_, S> {
    fn countdown(b: u64) -> Next<ExtState> {
        if b <= 1 {
            Next::Stop
        } else {
            Next::Continue(ExtState::Countdown(b - 1))
        }
    }
}

impl<S: Weight> StepKernel<S> for ExtKernel<'_, S> {
    type State = ExtState;

    fn group(&self) -> GroupSpec {
        self.mu.group()
    }

    fn start(&self) -> ExtState {
        match self.rule {
            ExtendedRule::AuxFirstCoordinate { .. } => ExtState::Start,
            ExtendedRule::BetaFlag { .. } => ExtState::Running,
        }
    }

    /// Branches over `(increment, auxiliary cell)` pairs with their exact
    /// joint weights.
    fn branches(&self, state: &ExtState) -> Vec<(GroupElement, S, Next<ExtState>)> {
        match (self.rule, state) {
            (ExtendedRule::AuxFirstCoordinate { points }, ExtState::Start) => points
                .iter()
                .flat_map(|(b, a)| {
                    self.mu.iter().map(move |(g, w)| (g.clone(), a.clone() * w.clone(), Self::countdown(*b)))
                })
                .collect(),
            (ExtendedRule::AuxFirstCoordinate { .. }, ExtState::Countdown(k)) => {
                self.mu.iter().map(|(g, w)| (g.clone(), w.clone(), Self::countdown(*k))).collect()
            }
            (ExtendedRule::BetaFlag { partition }, ExtState::Running) => partition
                .cells()
                .iter()
                .flat_map(|c| {
                    [
                        (c.element.clone(), c.beta.clone(), Next::Stop),
                        (c.element.clone(), c.alpha.clone(), Next::Continue(ExtState::Running)),
                    ]
                })
                .filter(|(_, w, _)| !w.is_zero())
                .collect(),
            (_, state) => panic!("state {state:?} does not belong to {}", self.rule.describe()),
        }
    }
}

impl<S: Weight> SampleKernel for ExtKernel<'_, S> {
    type State = ExtState;

    fn group(&self) -> GroupSpec {
        self.mu.group()
    }

    fn start(&self) -> ExtState {
        StepKernel::<S>::start(self)
    }

    fn step(&self, state: ExtState, rng: &mut StreamRng) -> (GroupElement, Next<ExtState>) {
        let sampler = self.sampler.as_ref().expect("sampler");
        let (h, gamma) = draw_step(sampler, self.aux, self.points.as_ref(), self.coupled, rng);
        let next = match (self.rule, state, gamma) {
            (ExtendedRule::AuxFirstCoordinate { .. }, ExtState::Start, AuxDraw::Point(b)) => Self::countdown(b as u64),
            (ExtendedRule::AuxFirstCoordinate { .. }, ExtState::Countdown(k), _) => Self::countdown(k),
            (ExtendedRule::BetaFlag { partition }, ExtState::Running, AuxDraw::Uniform(u)) => {
                let hit = if self.coupled { partition.in_beta(u) } else { partition.coin_in_beta(&h, u) };
                if hit {
                    Next::Stop
                } else {
                    Next::Continue(ExtState::Running)
                }
            }
            (rule, state, gamma) => panic!("{state:?} / {gamma:?} do not belong to {}", rule.describe()),
        };
        (h, next)
    }
}

/// How [`project_transform`] computes the law of `x_T`.
#[derive(Debug, Clone)]
pub enum ProjectionMode<S> {
    Exact { epsilon: S, max_horizon: usize },
    MonteCarlo { samples: u64, horizon_cap: usize, stream: SeededStream, coupled: bool },
}

/// Law of `x_T` under the extended chain, projected to `G`. Same mass
/// accounting as [`crate::stopping::exact_transform`].
pub fn project_transform<S: Weight>(
    mu: &FiniteMeasure<S>,
    aux: &AuxSpace<S>,
    rule: &ExtendedRule<S>,
    mode: &ProjectionMode<S>,
) -> Result<TransformResult<S>, TransformError> {
    rule.check_against(mu, aux)?;
    match mode {
        ProjectionMode::Exact { epsilon, max_horizon } => {
            if !epsilon.is_positive() {
                return Err(TransformError::NonPositiveEpsilon);
            }
            let kernel = ExtKernel { mu, aux, rule, coupled: false, sampler: None, points: None };
            Ok(explore(&kernel, epsilon, *max_horizon))
        }
        ProjectionMode::MonteCarlo { samples, horizon_cap, stream, coupled } => {
            let points = match aux {
                AuxSpace::Discrete { points } => {
                    if *coupled {
                        return Err(TransformError::InvalidAux("coupled sampling needs the unit-interval space".into()));
                    }
                    Some(PointSampler::new(points))
                }
                AuxSpace::UnitInterval(_) => None,
            };
            let kernel = ExtKernel { mu, aux, rule, coupled: *coupled, sampler: Some(Sampler::new(mu)?), points };
            monte_carlo(&kernel, *samples, *horizon_cap, *stream)
        }
    }
}

/// An auxiliary space with a rule on it, usable wherever a [`Transform`] is.
#[derive(Debug, Clone)]
pub struct ExtendedSetup<S> {
    pub aux: AuxSpace<S>,
    pub rule: ExtendedRule<S>,
    pub coupled: bool,
}

impl<S: Weight> ExtendedSetup<S> {
    /// Convex combination `Σ aₙ μ^{*n}` via `T = γ₁`.
    pub fn convex(points: Vec<(i64, S)>) -> Result<Self, TransformError> {
        let aux = AuxSpace::discrete(points)?;
        let rule = ExtendedRule::aux_first_coordinate(&aux)?;
        Ok(ExtendedSetup { aux, rule, coupled: false })
    }

    /// `(1 − α)^{-1} * β` via the first `β`-flagged step.
    pub fn beta_flag(split: &SplitPair<S>, coupled: bool) -> Result<Self, TransformError> {
        let aux = AuxSpace::from_split(split)?;
        let rule = ExtendedRule::beta_flag(&aux)?;
        Ok(ExtendedSetup { aux, rule, coupled })
    }
}

impl<S: Weight> Transform<S> for ExtendedSetup<S> {
    fn describe(&self) -> String {
        let mode = if self.coupled { " (coupled)" } else { "" };
        format!("{}{mode}", self.rule.describe())
    }

    fn exact(&self, mu: &FiniteMeasure<S>, epsilon: &S, max_horizon: usize) -> Result<TransformResult<S>, TransformError> {
        project_transform(mu, &self.aux, &self.rule, &ProjectionMode::Exact { epsilon: epsilon.clone(), max_horizon })
    }

    fn monte_carlo(
        &self,
        mu: &FiniteMeasure<S>,
        samples: u64,
        horizon_cap: usize,
        stream: SeededStream,
    ) -> Result<TransformResult<S>, TransformError> {
        let mode = ProjectionMode::MonteCarlo { samples, horizon_cap, stream, coupled: self.coupled };
        project_transform(mu, &self.aux, &self.rule, &mode)
    }
}
