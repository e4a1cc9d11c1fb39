//! Finitely supported (sub)probability measures on a group and their algebra.
//!
//! Mass contract: operations never renormalize. Convolution multiplies
//! masses, splits partition mass, and truncated series report the tail they
//! dropped.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::group::{GroupElement, GroupSpec};
use crate::scalar::Weight;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("measures live on different groups: {left} and {right}")]
    GroupMismatch { left: GroupSpec, right: GroupSpec },
    #[error("element {element:?} does not belong to {group}")]
    ForeignElement { element: GroupElement, group: GroupSpec },
    #[error("negative weight {weight} at {element:?}")]
    NegativeWeight { element: GroupElement, weight: f64 },
    #[error("total mass {0} exceeds 1")]
    ExcessMass(f64),
    #[error("expected a probability measure, total mass is {0}")]
    NotProbability(f64),
    #[error("convex combination needs at least one term")]
    EmptyCombination,
    #[error("negative convex coefficient {0}")]
    NegativeCoefficient(f64),
    #[error("convex coefficients sum to {0}, not 1")]
    CoefficientSum(f64),
    #[error("Neumann series diverges: alpha has mass {0} >= 1")]
    Diverges(f64),
    #[error("Neumann series not within tolerance after {terms} terms (tail bound {tail})")]
    MaxTermsExceeded { terms: usize, tail: f64 },
    #[error("degenerate split: alpha mass {alpha}, beta mass {beta}; both must be positive")]
    DegenerateSplit { alpha: f64, beta: f64 },
    #[error("split set is empty")]
    EmptySet,
    #[error("fraction {value} at {element:?} is outside [0, 1]")]
    FractionOutOfRange { element: GroupElement, value: f64 },
    #[error("threshold must be positive")]
    NonPositiveThreshold,
    #[error("reference weight missing or not positive at {0:?}")]
    BadReference(GroupElement),
    #[error("no element has density below the threshold; choose a larger c")]
    ThresholdTooSmall,
    #[error("support of size {size} exceeds the cap {cap}")]
    SupportCap { size: usize, cap: usize },
}

/// A finitely supported nonnegative measure on one group.
///
/// Zero weights are never stored and the support iterates in canonical
/// element order.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure<S> {
    group: GroupSpec,
    weights: BTreeMap<GroupElement, S>,
    mass: S,
}

/// A measure written as `alpha + beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair<S> {
    pub alpha: FiniteMeasure<S>,
    pub beta: FiniteMeasure<S>,
}

impl<S: Weight> SplitPair<S> {
    pub fn reassemble(&self) -> FiniteMeasure<S> {
        self.alpha.sum_unchecked(&self.beta)
    }
}

/// Truncated `Σ_{n≤N} α^{*n} * β` with its certified tail.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannSeries<S> {
    pub measure: FiniteMeasure<S>,
    /// Number of summed terms, `N + 1`.
    pub terms: usize,
    /// `β.mass · Σ_{n>N} α.mass^n`, an upper bound for the dropped mass.
    pub tail_bound: S,
}

impl<S: Weight> FiniteMeasure<S> {
    pub fn zero(group: GroupSpec) -> Self {
        FiniteMeasure { group, weights: BTreeMap::new(), mass: S::zero() }
    }

    pub fn dirac(element: GroupElement) -> Self {
        let group = element.spec();
        let mut weights = BTreeMap::new();
        weights.insert(element, S::one());
        FiniteMeasure { group, weights, mass: S::one() }
    }

    /// Builds a measure from `(element, weight)` pairs. Repeated elements
    /// accumulate, zero weights are dropped.
    pub fn from_weights<I>(group: GroupSpec, entries: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (GroupElement, S)>,
    {
        let mut m = FiniteMeasure::zero(group);
        for (g, w) in entries {
            if !g.belongs_to(group) {
                return Err(MeasureError::ForeignElement { element: g, group });
            }
            if w.is_negative() {
                return Err(MeasureError::NegativeWeight { element: g, weight: w.as_f64() });
            }
            m.add_at(g, w);
        }
        if m.mass > S::one() + S::mass_tolerance() {
            return Err(MeasureError::ExcessMass(m.mass.as_f64()));
        }
        Ok(m)
    }

    /// Uniform probability on the given distinct elements.
    pub fn uniform(group: GroupSpec, elements: &[GroupElement]) -> Result<Self, MeasureError> {
        let n = elements.len() as i64;
        Self::from_weights(group, elements.iter().map(|g| (g.clone(), S::ratio(1, n))))
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn mass(&self) -> &S {
        &self.mass
    }

    pub fn weight(&self, g: &GroupElement) -> S {
        self.weights.get(g).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, &S)> {
        self.weights.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.weights.keys()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        (self.mass.clone() - S::one()).abs() <= S::mass_tolerance()
    }

    pub fn require_probability(&self) -> Result<(), MeasureError> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(MeasureError::NotProbability(self.mass.as_f64()))
        }
    }

    fn same_group(&self, other: &Self) -> Result<(), MeasureError> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(MeasureError::GroupMismatch { left: self.group, right: other.group })
        }
    }

    pub(crate) fn add_at(&mut self, g: GroupElement, w: S) {
        if w.is_zero() {
            return;
        }
        self.mass = self.mass.clone() + w.clone();
        let slot = self.weights.entry(g).or_insert_with(S::zero);
        *slot = slot.clone() + w;
    }

    pub(crate) fn sum_unchecked(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, w) in &other.weights {
            out.add_at(g.clone(), w.clone());
        }
        out
    }

    /// Pointwise sum; the result must still have mass at most one.
    pub fn add(&self, other: &Self) -> Result<Self, MeasureError> {
        self.same_group(other)?;
        let out = self.sum_unchecked(other);
        if out.mass > S::one() + S::mass_tolerance() {
            return Err(MeasureError::ExcessMass(out.mass.as_f64()));
        }
        Ok(out)
    }

    /// Multiplies every weight by a coefficient in `[0, 1]`.
    pub fn scale(&self, c: &S) -> Self {
        let mut out = FiniteMeasure::zero(self.group);
        for (g, w) in &self.weights {
            out.add_at(g.clone(), w.clone() * c.clone());
        }
        out
    }

    pub fn restrict(&self, mut keep: impl FnMut(&GroupElement) -> bool) -> Self {
        let mut out = FiniteMeasure::zero(self.group);
        for (g, w) in &self.weights {
            if keep(g) {
                out.add_at(g.clone(), w.clone());
            }
        }
        out
    }

    pub fn map_weights<T: Weight>(&self, f: impl Fn(&S) -> T) -> FiniteMeasure<T> {
        let mut out = FiniteMeasure::zero(self.group);
        for (g, w) in &self.weights {
            out.add_at(g.clone(), f(w));
        }
        out
    }

    pub fn to_f64(&self) -> FiniteMeasure<f64> {
        self.map_weights(|w| w.as_f64())
    }

    /// `(μ*ν)(g) = Σ_h μ(h) ν(h⁻¹g)`.
    pub fn convolve(&self, other: &Self) -> Result<Self, MeasureError> {
        self.same_group(other)?;
        let mut out = FiniteMeasure::zero(self.group);
        for (h, a) in &self.weights {
            for (k, b) in &other.weights {
                out.add_at(h * k, a.clone() * b.clone());
            }
        }
        Ok(out)
    }

    /// `μ^{*n}`, with `μ^{*0} = δ_e`.
    pub fn power(&self, n: usize) -> Self {
        let mut acc = FiniteMeasure::dirac(self.group.identity());
        for _ in 0..n {
            acc = acc.convolve(self).expect("same group");
        }
        acc
    }

    /// `Σ aᵢ μᵢ` for nonnegative coefficients summing to one.
    pub fn convex_combine(terms: &[(S, FiniteMeasure<S>)]) -> Result<Self, MeasureError> {
        let first = terms.first().ok_or(MeasureError::EmptyCombination)?;
        let mut total = S::zero();
        let mut out = FiniteMeasure::zero(first.1.group);
        for (c, m) in terms {
            out.same_group(m)?;
            if c.is_negative() {
                return Err(MeasureError::NegativeCoefficient(c.as_f64()));
            }
            total = total + c.clone();
            for (g, w) in &m.weights {
                out.add_at(g.clone(), c.clone() * w.clone());
            }
        }
        if (total.clone() - S::one()).abs() > S::mass_tolerance() {
            return Err(MeasureError::CoefficientSum(total.as_f64()));
        }
        Ok(out)
    }

    /// Truncated `(1 − α)^{-1} * β = Σ_n α^{*n} * β`, stopping at the first
    /// `N` whose geometric tail `β.mass · α.mass^{N+1} / (1 − α.mass)` is at
    /// most `epsilon`.
    pub fn neumann_series(
        alpha: &Self,
        beta: &Self,
        epsilon: &S,
        max_terms: usize,
    ) -> Result<NeumannSeries<S>, MeasureError> {
        alpha.same_group(beta)?;
        let a = alpha.mass.clone();
        if a >= S::one() {
            return Err(MeasureError::Diverges(a.as_f64()));
        }
        let one_minus_a = S::one() - a.clone();
        let mut acc = beta.clone();
        let mut term = beta.clone();
        let mut a_pow = a.clone();
        let mut terms = 1;
        loop {
            let tail = beta.mass.clone() * a_pow.clone() / one_minus_a.clone();
            if tail <= *epsilon {
                return Ok(NeumannSeries { measure: acc, terms, tail_bound: tail });
            }
            if terms >= max_terms {
                return Err(MeasureError::MaxTermsExceeded { terms, tail: tail.as_f64() });
            }
            term = alpha.convolve(&term)?;
            acc = acc.sum_unchecked(&term);
            a_pow = a_pow * a.clone();
            terms += 1;
        }
    }

    /// `β = μ|_B`, `α = μ|_{Bᶜ}`.
    pub fn split_by_support(&self, set: &BTreeSet<GroupElement>) -> Result<SplitPair<S>, MeasureError> {
        if set.is_empty() {
            return Err(MeasureError::EmptySet);
        }
        let pair = SplitPair { alpha: self.restrict(|g| !set.contains(g)), beta: self.restrict(|g| set.contains(g)) };
        pair.non_degenerate()
    }

    /// `β(g) = fraction(g)·μ(g)`, `α(g) = (1 − fraction(g))·μ(g)`; elements
    /// absent from `fraction` go entirely to `α`.
    pub fn split_by_fraction(&self, fraction: &BTreeMap<GroupElement, S>) -> Result<SplitPair<S>, MeasureError> {
        for (g, f) in fraction {
            if f.is_negative() || *f > S::one() {
                return Err(MeasureError::FractionOutOfRange { element: g.clone(), value: f.as_f64() });
            }
        }
        let mut alpha = FiniteMeasure::zero(self.group);
        let mut beta = FiniteMeasure::zero(self.group);
        for (g, w) in &self.weights {
            let f = fraction.get(g).cloned().unwrap_or_else(S::zero);
            beta.add_at(g.clone(), f.clone() * w.clone());
            alpha.add_at(g.clone(), (S::one() - f) * w.clone());
        }
        SplitPair { alpha, beta }.non_degenerate()
    }

    /// Splits by density against reference weights: `β` is `τ` restricted to
    /// `{g : τ(g)/ref(g) < c}` and `α` is the rest.
    pub fn threshold_split(&self, reference: &BTreeMap<GroupElement, S>, c: &S) -> Result<SplitPair<S>, MeasureError> {
        if !c.is_positive() {
            return Err(MeasureError::NonPositiveThreshold);
        }
        let mut below = BTreeSet::new();
        for (g, w) in &self.weights {
            let r = reference.get(g).filter(|r| r.is_positive()).ok_or_else(|| MeasureError::BadReference(g.clone()))?;
            if w.clone() / r.clone() < *c {
                below.insert(g.clone());
            }
        }
        if below.is_empty() {
            return Err(MeasureError::ThresholdTooSmall);
        }
        self.split_by_support(&below)
    }

    /// Discrete analogue of the density decomposition: `self = υ + τ` with `υ`
    /// the part carried by `singular`, then `β = τ|_B` and `α = υ + τ|_{Bᶜ}`
    /// for the threshold set `B` of `τ`.
    pub fn density_split(
        &self,
        singular: &BTreeSet<GroupElement>,
        reference: &BTreeMap<GroupElement, S>,
        c: &S,
    ) -> Result<SplitPair<S>, MeasureError> {
        let upsilon = self.restrict(|g| singular.contains(g));
        let tau = self.restrict(|g| !singular.contains(g));
        let inner = tau.threshold_split(reference, c)?;
        SplitPair { alpha: upsilon.sum_unchecked(&inner.alpha), beta: inner.beta }.non_degenerate()
    }

    pub fn total_variation(&self, other: &Self) -> Result<S, MeasureError> {
        self.same_group(other)?;
        let keys: BTreeSet<&GroupElement> = self.weights.keys().chain(other.weights.keys()).collect();
        let mut sum = S::zero();
        for g in keys {
            sum = sum + (self.weight(g) - other.weight(g)).abs();
        }
        Ok(sum / S::ratio(2, 1))
    }

    /// Shannon entropy in nats.
    pub fn shannon_entropy(&self) -> Result<f64, MeasureError> {
        self.require_probability()?;
        Ok(self
            .weights
            .values()
            .map(|w| {
                let p = w.as_f64();
                -p * p.ln()
            })
            .sum())
    }

    /// Heuristic check that the support generates the group: every standard
    /// generator should be a product of at most `radius` elements of
    /// `supp ∪ supp⁻¹`. Returns a warning message when it is not.
    pub fn generation_warning(&self, radius: usize) -> Option<String> {
        let steps: BTreeSet<GroupElement> = self.support().flat_map(|g| [g.clone(), g.inverse()]).collect();
        let mut reached: BTreeSet<GroupElement> = BTreeSet::from([self.group.identity()]);
        let mut frontier = reached.clone();
        for _ in 0..radius {
            let mut next = BTreeSet::new();
            for g in &frontier {
                for s in &steps {
                    let h = g * s;
                    if reached.insert(h.clone()) {
                        next.insert(h);
                    }
                }
            }
            frontier = next;
        }
        let missing: Vec<String> =
            self.group.generators().into_iter().filter(|g| !reached.contains(g)).map(|g| g.to_string()).collect();
        if missing.is_empty() {
            None
        } else {
            Some(format!(
                "support may not generate {}: generators {} not reached within radius {radius}",
                self.group,
                missing.join(" ")
            ))
        }
    }
}

impl<S: Weight> SplitPair<S> {
    fn non_degenerate(self) -> Result<Self, MeasureError> {
        if self.alpha.mass.is_zero() || self.beta.mass.is_zero() {
            return Err(MeasureError::DegenerateSplit { alpha: self.alpha.mass.as_f64(), beta: self.beta.mass.as_f64() });
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    type M = FiniteMeasure<Rational>;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn z() -> GroupSpec {
        GroupSpec::Integers { rank: 1 }
    }

    fn zm(pairs: &[(i64, Rational)]) -> M {
        M::from_weights(z(), pairs.iter().map(|(k, w)| (GroupElement::int(*k), w.clone()))).unwrap()
    }

    fn srw() -> M {
        zm(&[(1, q(1, 2)), (-1, q(1, 2))])
    }

    fn z2(r: i64) -> GroupElement {
        GroupElement::cyclic(r, 2)
    }

    #[test]
    fn dirac_identity_is_neutral() {
        let e = M::dirac(z().identity());
        assert_eq!(e.convolve(&srw()).unwrap(), srw());
        assert_eq!(srw().convolve(&e).unwrap(), srw());
    }

    #[test]
    fn srw_two_step_enumeration() {
        // four increment pairs (±1, ±1)
        let mut oracle = BTreeMap::new();
        for a in [1i64, -1] {
            for b in [1i64, -1] {
                *oracle.entry(a + b).or_insert(q(0, 1)) += q(1, 4);
            }
        }
        let expected = zm(&oracle.into_iter().collect::<Vec<_>>());
        assert_eq!(srw().convolve(&srw()).unwrap(), expected);
        assert_eq!(expected, zm(&[(2, q(1, 4)), (0, q(1, 2)), (-2, q(1, 4))]));
    }

    #[test]
    fn z2_flip_twice_returns() {
        let d1 = M::dirac(z2(1));
        assert_eq!(d1.convolve(&d1).unwrap(), M::dirac(z2(0)));
        assert_eq!(d1.power(2), M::dirac(z2(0)));
        assert_eq!(d1.power(0), M::dirac(z2(0)));
    }

    #[test]
    fn srw_third_power_by_path_enumeration() {
        let mut oracle: BTreeMap<i64, Rational> = BTreeMap::new();
        for bits in 0..8u32 {
            let x: i64 = (0..3).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).sum();
            *oracle.entry(x).or_insert(q(0, 1)) += q(1, 8);
        }
        assert_eq!(srw().power(3), zm(&oracle.into_iter().collect::<Vec<_>>()));
        assert_eq!(srw().power(3).weight(&GroupElement::int(1)), q(3, 8));
    }

    #[test]
    fn convex_combination_cases() {
        let d1 = M::dirac(z2(1));
        let half = M::convex_combine(&[(q(1, 2), d1.power(2)), (q(1, 2), d1.power(1))]).unwrap();
        assert_eq!(half.weight(&z2(0)), q(1, 2));
        assert_eq!(half.weight(&z2(1)), q(1, 2));
        assert_eq!(M::convex_combine(&[(q(1, 1), srw())]).unwrap(), srw());

        let f2 = GroupSpec::Free { rank: 2 };
        let a = f2.parse_element("a").unwrap();
        let b = f2.parse_element("b").unwrap();
        let m = M::convex_combine(&[(q(1, 2), M::dirac(a.clone())), (q(1, 2), M::dirac(b.clone()))]).unwrap();
        assert_eq!((m.weight(&a), m.weight(&b)), (q(1, 2), q(1, 2)));

        assert!(matches!(M::convex_combine(&[(q(-1, 2), srw()), (q(3, 2), srw())]), Err(MeasureError::NegativeCoefficient(_))));
        assert!(matches!(M::convex_combine(&[(q(1, 2), srw())]), Err(MeasureError::CoefficientSum(_))));
        assert!(matches!(M::convex_combine(&[]), Err(MeasureError::EmptyCombination)));
    }

    #[test]
    fn neumann_with_zero_alpha_is_beta() {
        let beta = srw();
        let s = M::neumann_series(&M::zero(z()), &beta, &q(1, 1 << 20), 10).unwrap();
        assert_eq!(s.measure, beta);
        assert_eq!(s.terms, 1);
    }

    #[test]
    fn neumann_geometric_on_z() {
        let alpha = zm(&[(1, q(1, 2))]);
        let beta = zm(&[(-1, q(1, 2))]);
        let eps = Rational::default_epsilon();
        let s = M::neumann_series(&alpha, &beta, &eps, 1000).unwrap();
        // direct summation of (1/2)^{n+1} δ_{n-1}
        let mut oracle = Vec::new();
        for n in 0..s.terms as i64 {
            oracle.push((n - 1, q(1, 2).pow_n(n as u32 + 1)));
        }
        assert_eq!(s.measure, zm(&oracle));
        assert!(q(1, 1) - s.measure.mass().clone() <= eps);
        assert_eq!(s.terms, 20);
    }

    #[test]
    fn neumann_on_z2_concentrates_on_one() {
        let alpha = M::from_weights(GroupSpec::Cyclic { modulus: 2 }, [(z2(0), q(1, 4))]).unwrap();
        let beta = M::from_weights(GroupSpec::Cyclic { modulus: 2 }, [(z2(1), q(3, 4))]).unwrap();
        let eps = q(1, 1000);
        let s = M::neumann_series(&alpha, &beta, &eps, 100).unwrap();
        assert_eq!(s.measure.support().cloned().collect::<Vec<_>>(), vec![z2(1)]);
        // Σ_{n≤N} (1/4)^n (3/4) = 1 − (1/4)^{N+1}
        assert_eq!(s.measure.mass().clone(), q(1, 1) - q(1, 4).pow_n(s.terms as u32));
        assert!(q(1, 1) - s.measure.mass().clone() <= eps);
    }

    #[test]
    fn neumann_errors() {
        assert!(matches!(M::neumann_series(&srw(), &M::zero(z()), &q(1, 10), 10), Err(MeasureError::Diverges(_))));
        let alpha = zm(&[(1, q(99, 100))]);
        let beta = zm(&[(-1, q(1, 100))]);
        assert!(matches!(M::neumann_series(&alpha, &beta, &q(1, 1 << 20), 5), Err(MeasureError::MaxTermsExceeded { .. })));
    }

    #[test]
    fn split_by_support_cases() {
        let s = srw().split_by_support(&BTreeSet::from([GroupElement::int(-1)])).unwrap();
        assert_eq!(s.alpha, zm(&[(1, q(1, 2))]));
        assert_eq!(s.beta, zm(&[(-1, q(1, 2))]));
        let all = BTreeSet::from([GroupElement::int(-1), GroupElement::int(1), GroupElement::int(7)]);
        assert!(matches!(srw().split_by_support(&all), Err(MeasureError::DegenerateSplit { .. })));
        assert!(matches!(srw().split_by_support(&BTreeSet::new()), Err(MeasureError::EmptySet)));

        let f2 = GroupSpec::Free { rank: 2 };
        let mu = M::uniform(f2, &f2.generators()).unwrap();
        let bs: BTreeSet<_> = ["b", "b^-1"].iter().map(|s| f2.parse_element(s).unwrap()).collect();
        let s = mu.split_by_support(&bs).unwrap();
        assert_eq!((s.alpha.mass().clone(), s.beta.mass().clone()), (q(1, 2), q(1, 2)));
        assert!(s.alpha.support().all(|g| !bs.contains(g)));
    }

    #[test]
    fn split_by_fraction_cases() {
        let d1 = M::dirac(z2(1));
        let s = d1.split_by_fraction(&BTreeMap::from([(z2(1), q(1, 2))])).unwrap();
        assert_eq!(s.alpha, d1.scale(&q(1, 2)));
        assert_eq!(s.beta, d1.scale(&q(1, 2)));

        let s = srw().split_by_fraction(&BTreeMap::from([(GroupElement::int(1), q(1, 2)), (GroupElement::int(-1), q(1, 1))])).unwrap();
        assert_eq!(s.alpha, zm(&[(1, q(1, 4))]));
        assert_eq!(s.beta, zm(&[(1, q(1, 4)), (-1, q(1, 2))]));

        let indicator = BTreeMap::from([(GroupElement::int(-1), q(1, 1))]);
        assert_eq!(
            srw().split_by_fraction(&indicator).unwrap(),
            srw().split_by_support(&BTreeSet::from([GroupElement::int(-1)])).unwrap()
        );

        let bad = BTreeMap::from([(GroupElement::int(1), q(3, 2))]);
        assert!(matches!(srw().split_by_fraction(&bad), Err(MeasureError::FractionOutOfRange { .. })));
        assert!(matches!(srw().split_by_fraction(&BTreeMap::new()), Err(MeasureError::DegenerateSplit { .. })));
    }

    #[test]
    fn threshold_split_cases() {
        let f2 = GroupSpec::Free { rank: 2 };
        let a = f2.parse_element("a").unwrap();
        let b = f2.parse_element("b").unwrap();
        let tau = M::from_weights(f2, [(a.clone(), q(3, 4)), (b.clone(), q(1, 4))]).unwrap();
        let ones: BTreeMap<_, _> = f2.ball(1).into_iter().map(|g| (g, q(1, 1))).collect();
        let s = tau.threshold_split(&ones, &q(1, 2)).unwrap();
        assert_eq!(s.beta, M::from_weights(f2, [(b.clone(), q(1, 4))]).unwrap());
        assert_eq!(s.alpha, M::from_weights(f2, [(a.clone(), q(3, 4))]).unwrap());

        assert!(matches!(tau.threshold_split(&ones, &q(1, 1)), Err(MeasureError::DegenerateSplit { .. })));
        let uni = M::uniform(f2, &f2.generators()).unwrap();
        assert!(matches!(uni.threshold_split(&ones, &q(3, 10)), Err(MeasureError::DegenerateSplit { .. })));
        assert!(matches!(tau.threshold_split(&ones, &q(1, 8)), Err(MeasureError::ThresholdTooSmall)));
        assert!(matches!(tau.threshold_split(&ones, &q(0, 1)), Err(MeasureError::NonPositiveThreshold)));
        assert!(matches!(tau.threshold_split(&BTreeMap::new(), &q(1, 2)), Err(MeasureError::BadReference(_))));
    }

    #[test]
    fn total_variation_cases() {
        assert_eq!(srw().total_variation(&srw()).unwrap(), q(0, 1));
        let a = M::dirac(z2(0));
        let b = M::dirac(z2(1));
        assert_eq!(a.total_variation(&b).unwrap(), q(1, 1));
        let h = M::from_weights(GroupSpec::Cyclic { modulus: 2 }, [(z2(0), q(1, 2)), (z2(1), q(1, 2))]).unwrap();
        assert_eq!(h.total_variation(&a).unwrap(), q(1, 2));
        assert!(matches!(a.total_variation(&srw()), Err(MeasureError::GroupMismatch { .. })));
        assert!(matches!(a.convolve(&srw()), Err(MeasureError::GroupMismatch { .. })));
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(M::dirac(z().identity()).shannon_entropy().unwrap(), 0.0);
        let f2 = GroupSpec::Free { rank: 2 };
        let uni = M::uniform(f2, &f2.generators()).unwrap();
        assert!((uni.shannon_entropy().unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!((srw().shannon_entropy().unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(zm(&[(1, q(1, 2))]).shannon_entropy(), Err(MeasureError::NotProbability(_))));
    }

    #[test]
    fn construction_validation() {
        assert!(matches!(
            M::from_weights(z(), [(GroupElement::int(1), q(-1, 2))]),
            Err(MeasureError::NegativeWeight { .. })
        ));
        assert!(matches!(M::from_weights(z(), [(GroupElement::int(1), q(3, 2))]), Err(MeasureError::ExcessMass(_))));
        assert!(matches!(
            M::from_weights(z(), [(GroupElement::cyclic(1, 2), q(1, 2))]),
            Err(MeasureError::ForeignElement { .. })
        ));
        let m = M::from_weights(z(), [(GroupElement::int(1), q(0, 1)), (GroupElement::int(2), q(1, 4)), (GroupElement::int(2), q(1, 4))]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weight(&GroupElement::int(2)), q(1, 2));
        let f = FiniteMeasure::<f64>::from_weights(z(), [(GroupElement::int(0), 1.0 + 1e-12)]).unwrap();
        assert!(f.is_probability());
    }

    #[test]
    fn generation_heuristic() {
        assert!(srw().generation_warning(2).is_none());
        assert!(zm(&[(2, q(1, 1))]).generation_warning(3).is_some());
        let f2 = GroupSpec::Free { rank: 2 };
        let only_a = M::from_weights(f2, [(f2.parse_element("a").unwrap(), q(1, 1))]).unwrap();
        assert!(only_a.generation_warning(3).unwrap().contains('b'));
    }

    fn arb_measure(group: GroupSpec, pool: Vec<GroupElement>) -> impl Strategy<Value = M> {
        prop::collection::vec((0..pool.len(), 1i64..6), 1..4).prop_map(move |entries| {
            let total: i64 = entries.iter().map(|e| e.1).sum();
            M::from_weights(group, entries.iter().map(|(i, w)| (pool[*i].clone(), q(*w, total)))).unwrap()
        })
    }

    fn arb_triple() -> impl Strategy<Value = (M, M, M)> {
        prop_oneof![
            Just(GroupSpec::Free { rank: 2 }),
            Just(GroupSpec::Lamplighter { rank: 1 }),
            Just(GroupSpec::Integers { rank: 2 }),
        ]
        .prop_flat_map(|g| {
            let pool = g.ball(2);
            (arb_measure(g, pool.clone()), arb_measure(g, pool.clone()), arb_measure(g, pool))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn convolution_is_associative_and_multiplies_mass((a, b, c) in arb_triple()) {
            let left = a.convolve(&b).unwrap().convolve(&c).unwrap();
            let right = a.convolve(&b.convolve(&c).unwrap()).unwrap();
            prop_assert_eq!(&left, &right);
            let half = q(1, 2);
            let ab = a.scale(&half).convolve(&b).unwrap();
            prop_assert_eq!(ab.mass().clone(), half * a.mass().clone() * b.mass().clone());
        }

        #[test]
        fn powers_add((a, _, _) in arb_triple(), m in 0usize..3, n in 0usize..3) {
            prop_assert_eq!(a.power(m + n), a.power(m).convolve(&a.power(n)).unwrap());
        }

        #[test]
        fn splits_reassemble((a, _, _) in arb_triple(), num in 0i64..=4) {
            let fraction: BTreeMap<_, _> = a.support().enumerate().map(|(i, g)| (g.clone(), q((num + i as i64) % 5, 4).min(q(1, 1)))).collect();
            if let Ok(s) = a.split_by_fraction(&fraction) {
                prop_assert_eq!(s.reassemble(), a.clone());
            }
            let first: BTreeSet<_> = a.support().take(1).cloned().collect();
            if let Ok(s) = a.split_by_support(&first) {
                prop_assert_eq!(s.reassemble(), a.clone());
            }
        }

        #[test]
        fn neumann_residual_within_epsilon(
            a in arb_measure(GroupSpec::Integers { rank: 2 }, GroupSpec::Integers { rank: 2 }.ball(2)),
            num in 1i64..4,
        ) {
            let fraction: BTreeMap<_, _> = a.support().map(|g| (g.clone(), q(num, 4))).collect();
            let s = a.split_by_fraction(&fraction).unwrap();
            let eps = q(1, 1 << 12);
            let series = M::neumann_series(&s.alpha, &s.beta, &eps, 200).unwrap();
            prop_assert!(q(1, 1) - series.measure.mass().clone() <= eps);
        }
    }
}
