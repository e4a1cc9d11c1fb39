//! Random-walk paths: i.i.d. increments with law μ and the positions
//! `xₙ = h₁⋯hₙ`, plus the increment shift `U` and the left shift `S`.

use thiserror::Error;

use crate::group::{GroupElement, GroupSpec};
use crate::measure::{FiniteMeasure, MeasureError};
use crate::rng::{uniform, SeededStream, StreamRng};
use crate::scalar::Weight;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("shift {shift} is past the end of a path of length {len}")]
    ShiftTooLong { shift: usize, len: usize },
}

/// Inverse-CDF sampler over the canonically ordered support of a
/// probability measure.
#[derive(Debug, Clone)]
pub struct Sampler {
    elements: Vec<GroupElement>,
    cumulative: Vec<f64>,
}

impl Sampler {
    pub fn new<S: Weight>(mu: &FiniteMeasure<S>) -> Result<Self, MeasureError> {
        mu.require_probability()?;
        let mut elements = Vec::with_capacity(mu.len());
        let mut cumulative = Vec::with_capacity(mu.len());
        let mut acc = 0.0;
        for (g, w) in mu.iter() {
            acc += w.as_f64();
            elements.push(g.clone());
            cumulative.push(acc);
        }
        Ok(Sampler { elements, cumulative })
    }

    /// Element whose cumulative cell contains `u ∈ [0, 1)`.
    pub fn pick(&self, u: f64) -> &GroupElement {
        // the mass may fall a hair short of 1 in float mode
        let u = u * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.elements[i.min(self.elements.len() - 1)]
    }

    pub fn draw(&self, rng: &mut StreamRng) -> &GroupElement {
        self.pick(uniform(rng))
    }
}

/// A finite path prefix: increments `h₁..hₙ` and positions `x₁..xₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPrefix {
    group: GroupSpec,
    increments: Vec<GroupElement>,
    positions: Vec<GroupElement>,
}

impl PathPrefix {
    pub fn empty(group: GroupSpec) -> Self {
        PathPrefix { group, increments: Vec::new(), positions: Vec::new() }
    }

    pub fn from_increments(group: GroupSpec, increments: Vec<GroupElement>) -> Self {
        let mut path = PathPrefix::empty(group);
        for h in increments {
            path.push(h);
        }
        path
    }

    pub fn push(&mut self, h: GroupElement) {
        let x = match self.positions.last() {
            Some(last) => last * &h,
            None => h.clone(),
        };
        self.increments.push(h);
        self.positions.push(x);
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn increments(&self) -> &[GroupElement] {
        &self.increments
    }

    /// `x₁..xₙ` (the starting point `x₀ = e` is implicit).
    pub fn positions(&self) -> &[GroupElement] {
        &self.positions
    }

    /// `x_k` for `0 ≤ k ≤ len`, with `x₀ = e`.
    pub fn position(&self, k: usize) -> GroupElement {
        if k == 0 {
            self.group.identity()
        } else {
            self.positions[k - 1].clone()
        }
    }

    /// Truncation to the first `n` steps.
    pub fn prefix(&self, n: usize) -> PathPrefix {
        PathPrefix {
            group: self.group,
            increments: self.increments[..n].to_vec(),
            positions: self.positions[..n].to_vec(),
        }
    }

    fn check_shift(&self, k: usize) -> Result<(), PathError> {
        if k > self.len() {
            Err(PathError::ShiftTooLong { shift: k, len: self.len() })
        } else {
            Ok(())
        }
    }

    /// `Uᵏx̄`: drops the first `k` increments and re-bases at `x_k`.
    pub fn increment_shift(&self, k: usize) -> Result<PathPrefix, PathError> {
        self.check_shift(k)?;
        Ok(PathPrefix::from_increments(self.group, self.increments[k..].to_vec()))
    }

    /// `Sᵏx̄`: positions `x_{k+1}, x_{k+2}, …` with their original values.
    pub fn left_shift(&self, k: usize) -> Result<PathPrefix, PathError> {
        self.check_shift(k)?;
        Ok(PathPrefix {
            group: self.group,
            increments: self.increments[k..].to_vec(),
            positions: self.positions[k..].to_vec(),
        })
    }

    /// Recomputes positions from increments and compares.
    pub fn is_consistent(&self) -> bool {
        let fresh = PathPrefix::from_increments(self.group, self.increments.clone());
        fresh.positions == self.positions
    }
}

/// Unbounded lazy path: yields increments drawn from μ one at a time.
pub struct PathStream<'a> {
    sampler: &'a Sampler,
    rng: StreamRng,
}

impl<'a> PathStream<'a> {
    pub fn new(sampler: &'a Sampler, rng: StreamRng) -> Self {
        PathStream { sampler, rng }
    }
}

impl Iterator for PathStream<'_> {
    type Item = GroupElement;

    fn next(&mut self) -> Option<GroupElement> {
        Some(self.sampler.draw(&mut self.rng).clone())
    }
}

/// Samples `length` i.i.d. increments with law μ from `stream`.
pub fn sample_prefix<S: Weight>(
    mu: &FiniteMeasure<S>,
    length: usize,
    stream: SeededStream,
) -> Result<PathPrefix, PathError> {
    let sampler = Sampler::new(mu)?;
    let increments = PathStream::new(&sampler, stream.rng()).take(length).collect();
    Ok(PathPrefix::from_increments(mu.group(), increments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn srw() -> FiniteMeasure<Rational> {
        FiniteMeasure::uniform(GroupSpec::Integers { rank: 1 }, &[GroupElement::int(1), GroupElement::int(-1)]).unwrap()
    }

    fn f2_srw() -> FiniteMeasure<Rational> {
        let f2 = GroupSpec::Free { rank: 2 };
        FiniteMeasure::uniform(f2, &f2.generators()).unwrap()
    }

    fn ints(xs: &[i64]) -> Vec<GroupElement> {
        xs.iter().map(|&x| GroupElement::int(x)).collect()
    }

    #[test]
    fn zero_length_is_empty() {
        assert!(sample_prefix(&srw(), 0, SeededStream::new(1, 0)).unwrap().is_empty());
    }

    #[test]
    fn z2_deterministic_path_alternates() {
        let mu = FiniteMeasure::<Rational>::dirac(GroupElement::cyclic(1, 2));
        let p = sample_prefix(&mu, 4, SeededStream::new(9, 0)).unwrap();
        let res: Vec<u64> = p.positions().iter().map(|g| g.residue().unwrap()).collect();
        assert_eq!(res, vec![1, 0, 1, 0]);
    }

    #[test]
    fn srw_increment_mean_is_centered() {
        let n = 100_000;
        let p = sample_prefix(&srw(), n, SeededStream::new(2024, 0)).unwrap();
        let mean = p.increments().iter().map(|h| h.coords().unwrap()[0] as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn non_probability_is_rejected() {
        let half = srw().scale(&Rational::ratio(1, 2));
        assert!(matches!(sample_prefix(&half, 3, SeededStream::new(1, 0)), Err(PathError::Measure(_))));
    }

    #[test]
    fn shifts_on_fixed_path() {
        let z = GroupSpec::Integers { rank: 1 };
        let p = PathPrefix::from_increments(z, ints(&[1, 1, -1]));
        assert_eq!(p.increment_shift(0).unwrap(), p);
        let u = p.increment_shift(1).unwrap();
        assert_eq!(u.increments(), &ints(&[1, -1])[..]);
        assert_eq!(u.positions(), &ints(&[1, 0])[..]);
        assert_eq!(p.positions(), &ints(&[1, 2, 1])[..]);
        assert_eq!(p.left_shift(0).unwrap(), p);
        assert_eq!(p.left_shift(1).unwrap().positions(), &ints(&[2, 1])[..]);
        assert!(matches!(p.increment_shift(4), Err(PathError::ShiftTooLong { .. })));
        assert!(matches!(p.left_shift(4), Err(PathError::ShiftTooLong { .. })));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_prefix(&f2_srw(), 50, SeededStream::new(5, 2)).unwrap();
        let b = sample_prefix(&f2_srw(), 50, SeededStream::new(5, 2)).unwrap();
        let c = sample_prefix(&f2_srw(), 50, SeededStream::new(5, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.is_consistent());
    }

    /// φ(h₁, h₂) = [h₁ = a]·[h₂ ≠ b] has the same mean on x̄ and on Ux̄.
    #[test]
    fn increment_shift_preserves_measure_empirically() {
        let f2 = GroupSpec::Free { rank: 2 };
        let a = f2.parse_element("a").unwrap();
        let b = f2.parse_element("b").unwrap();
        let phi = |p: &PathPrefix| -> f64 {
            let h = p.increments();
            (h[0] == a && h[1] != b) as u8 as f64
        };
        let n = 40_000;
        let (mut s0, mut s1) = (0.0, 0.0);
        for i in 0..n {
            let p = sample_prefix(&f2_srw(), 3, SeededStream::new(77, i)).unwrap();
            s0 += phi(&p);
            s1 += phi(&p.increment_shift(1).unwrap());
        }
        let (m0, m1) = (s0 / n as f64, s1 / n as f64);
        let p = 3.0 / 16.0;
        let se = (2.0 * p * (1.0 - p) / n as f64).sqrt();
        assert!((m0 - m1).abs() <= 4.0 * se, "{m0} vs {m1}");
    }

    proptest! {
        #[test]
        fn shift_relations(seed in 0u64..1000, j in 0usize..6, k in 0usize..6) {
            let p = sample_prefix(&f2_srw(), 12, SeededStream::new(seed, 0)).unwrap();
            let uk = p.increment_shift(k).unwrap();
            let xk = p.position(k);
            for (i, y) in uk.positions().iter().enumerate() {
                prop_assert_eq!(y, &(&xk.inverse() * &p.position(k + i + 1)));
            }
            let sk = p.left_shift(k).unwrap();
            for (s, u) in sk.positions().iter().zip(uk.positions()) {
                prop_assert_eq!(s, &(&xk * u));
            }
            prop_assert_eq!(
                p.increment_shift(j).unwrap().increment_shift(k).unwrap(),
                p.increment_shift(j + k).unwrap()
            );
        }
    }
}
