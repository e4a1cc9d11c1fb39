//! Brute-force reference for the exact engine.
//!
//! Every increment sequence up to a fixed depth is enumerated and the
//! stopping time is read straight from its definition on the whole sequence.
//! No decision states, no merging and no caching are shared with
//! [`crate::stopping::explore`], so agreement between the two is evidence
//! that the engine's bookkeeping is right.

use crate::extended::ExtendedRule;
use crate::group::GroupElement;
use crate::measure::FiniteMeasure;
use crate::scalar::Weight;
use crate::stopping::{StoppingRule, TransformError};

/// Enumerated law of `x_T` on `{T ≤ depth}` plus the mass of `{T > depth}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<S> {
    pub measure: FiniteMeasure<S>,
    pub unstopped: S,
}

fn product(group: crate::group::GroupSpec, increments: &[GroupElement]) -> GroupElement {
    increments.iter().fold(group.identity(), |x, h| &x * h)
}

/// `T(h₁ h₂ …)` from the definition, if it is at most `increments.len()`.
pub fn first_stop(rule: &StoppingRule, increments: &[GroupElement]) -> Option<usize> {
    match rule {
        StoppingRule::Constant(n) => (*n <= increments.len()).then_some(*n),
        StoppingRule::FirstVisit(set) => {
            let group = set.iter().next()?.spec();
            (1..=increments.len()).find(|&n| set.contains(&product(group, &increments[..n])))
        }
        StoppingRule::FirstIncrement(set) => increments.iter().position(|h| set.contains(h)).map(|i| i + 1),
        StoppingRule::Sequential(a, b) => {
            let t1 = first_stop(a, increments)?;
            first_stop(b, &increments[t1..]).map(|t2| t1 + t2)
        }
        StoppingRule::Custom { stops, .. } => (1..=increments.len()).find(|&n| stops(&increments[..n])),
    }
}

/// Walks every increment sequence of length at most `depth`.
pub fn enumerate_rule<S: Weight>(
    mu: &FiniteMeasure<S>,
    rule: &StoppingRule,
    depth: usize,
) -> Result<OracleResult<S>, TransformError> {
    mu.require_probability()?;
    rule.check_group(mu.group())?;
    let steps: Vec<(GroupElement, S)> = mu.iter().map(|(g, w)| (g.clone(), w.clone())).collect();
    let mut out = OracleResult { measure: FiniteMeasure::zero(mu.group()), unstopped: S::zero() };
    let mut path = Vec::with_capacity(depth);
    descend(&steps, rule, depth, &mut path, S::one(), &mut out);
    Ok(out)
}

fn descend<S: Weight>(
    steps: &[(GroupElement, S)],
    rule: &StoppingRule,
    depth: usize,
    path: &mut Vec<GroupElement>,
    weight: S,
    out: &mut OracleResult<S>,
) {
    if !path.is_empty() && first_stop(rule, path) == Some(path.len()) {
        let x = product(out.measure.group(), path);
        out.measure.add_at(x, weight);
        return;
    }
    if path.len() == depth {
        out.unstopped = out.unstopped.clone() + weight;
        return;
    }
    for (h, w) in steps {
        path.push(h.clone());
        descend(steps, rule, depth, path, weight.clone() * w.clone(), out);
        path.pop();
    }
}

/// Same enumeration for rules on the extended chain. For the first-coordinate
/// rule the branches are `(b, h₁, …, h_b)`; for the beta flag each step
/// branches into "landed in `A_h`" (continue) and "landed in `B_h`" (stop).
pub fn enumerate_extended<S: Weight>(
    mu: &FiniteMeasure<S>,
    rule: &ExtendedRule<S>,
    depth: usize,
) -> Result<OracleResult<S>, TransformError> {
    mu.require_probability()?;
    let group = mu.group();
    let mut out = OracleResult { measure: FiniteMeasure::zero(group), unstopped: S::zero() };
    match rule {
        ExtendedRule::AuxFirstCoordinate { points } => {
            for (b, a) in points {
                let b = *b as usize;
                if b > depth {
                    out.unstopped = out.unstopped.clone() + a.clone();
                    continue;
                }
                let sub = enumerate_rule(mu, &StoppingRule::Constant(b), b)?;
                for (x, w) in sub.measure.iter() {
                    out.measure.add_at(x.clone(), a.clone() * w.clone());
                }
            }
        }
        ExtendedRule::BetaFlag { partition } => {
            let cells: Vec<(GroupElement, S, S)> =
                partition.cells().iter().map(|c| (c.element.clone(), c.alpha.clone(), c.beta.clone())).collect();
            beta_descend(&cells, depth, group.identity(), S::one(), 0, &mut out);
        }
    }
    Ok(out)
}

fn beta_descend<S: Weight>(
    cells: &[(GroupElement, S, S)],
    depth: usize,
    x: GroupElement,
    weight: S,
    level: usize,
    out: &mut OracleResult<S>,
) {
    if level == depth {
        out.unstopped = out.unstopped.clone() + weight;
        return;
    }
    for (h, alpha, beta) in cells {
        let y = &x * h;
        if !beta.is_zero() {
            out.measure.add_at(y.clone(), weight.clone() * beta.clone());
        }
        if !alpha.is_zero() {
            beta_descend(cells, depth, y, weight.clone() * alpha.clone(), level + 1, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupSpec;
    use crate::scalar::Rational;
    use std::collections::BTreeSet;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn srw() -> FiniteMeasure<Rational> {
        FiniteMeasure::from_weights(GroupSpec::integers(1).unwrap(), [(GroupElement::int(1), q(1, 2)), (GroupElement::int(-1), q(1, 2))])
            .unwrap()
    }

    #[test]
    fn first_stop_reads_definitions() {
        let inc = |xs: &[i64]| xs.iter().map(|&n| GroupElement::int(n)).collect::<Vec<_>>();
        let path = inc(&[1, 1, -1, 1, 1]);
        let visit2 = StoppingRule::FirstVisit(BTreeSet::from([GroupElement::int(2)]));
        assert_eq!(first_stop(&visit2, &path), Some(2));
        assert_eq!(first_stop(&StoppingRule::sequential(visit2.clone(), visit2.clone()), &path), None);
        let down = StoppingRule::FirstIncrement(BTreeSet::from([GroupElement::int(-1)]));
        assert_eq!(first_stop(&StoppingRule::sequential(down.clone(), StoppingRule::Constant(2)), &path), Some(5));
        assert_eq!(first_stop(&StoppingRule::Constant(6), &path), None);
    }

    #[test]
    fn constant_two_on_srw() {
        let r = enumerate_rule(&srw(), &StoppingRule::Constant(2), 5).unwrap();
        assert_eq!(r.measure, srw().power(2));
        assert_eq!(r.unstopped, q(0, 1));
    }

    #[test]
    fn first_increment_unstopped_is_geometric() {
        let rule = StoppingRule::FirstIncrement(BTreeSet::from([GroupElement::int(-1)]));
        let r = enumerate_rule(&srw(), &rule, 6).unwrap();
        assert_eq!(r.unstopped, q(1, 64));
        assert_eq!(r.measure.weight(&GroupElement::int(2)), q(1, 16));
    }
}
