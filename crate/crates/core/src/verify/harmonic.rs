//! Bounded harmonic functions used as probes.
//!
//! Closed-form functions are exact; the free-group cylinder function is a
//! Monte Carlo estimate whose standard errors travel with every value.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rayon::prelude::*;

use crate::group::{GroupElement, GroupSpec};
use crate::rng::SeededStream;

/// A function value with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    /// Rays were too short for the value to settle.
    pub unstable: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_err: 0.0, unstable: false }
    }
}

type Evaluator = Arc<dyn Fn(&GroupElement) -> Estimate + Send + Sync>;
type Prefetcher = Arc<dyn Fn(&[GroupElement]) + Send + Sync>;
type Region = Arc<dyn Fn(&GroupElement) -> bool + Send + Sync>;

/// A bounded function on the group, expected to be harmonic for some walk.
#[derive(Clone)]
pub struct HarmonicFunction {
    evaluate: Evaluator,
    prefetch: Option<Prefetcher>,
    interior: Option<Region>,
    /// Sup-norm bound over the whole group.
    pub bound_norm: f64,
    pub description: String,
    /// Values are exact (no sampling error).
    pub exact: bool,
    /// Seed behind sampled values.
    pub seed: Option<u64>,
}

impl fmt::Debug for HarmonicFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HarmonicFunction")
            .field("description", &self.description)
            .field("bound_norm", &self.bound_norm)
            .field("exact", &self.exact)
            .finish()
    }
}

impl HarmonicFunction {
    pub fn from_fn(
        description: impl Into<String>,
        bound_norm: f64,
        f: impl Fn(&GroupElement) -> f64 + Send + Sync + 'static,
    ) -> Self {
        HarmonicFunction {
            evaluate: Arc::new(move |g| Estimate::exact(f(g))),
            prefetch: None,
            interior: None,
            bound_norm,
            description: description.into(),
            exact: true,
            seed: None,
        }
    }

    /// `f ≡ c`, harmonic for every probability measure.
    pub fn constant(c: f64) -> Self {
        HarmonicFunction::from_fn(format!("constant {c}"), c.abs(), move |_| c)
    }

    /// `f(n) = ratio^{clamp(n, −radius, radius)}` on ℤ. With
    /// `ratio = q/p` it is harmonic for `p δ₁ + q δ₋₁` at `|n| < radius`.
    pub fn clipped_exponential(ratio: f64, radius: i64) -> Self {
        let bound = ratio.powi(radius as i32).max(ratio.powi(-radius as i32));
        let mut f = HarmonicFunction::from_fn(format!("clipped {ratio}^n, radius {radius}"), bound, move |g| {
            let n = g.coords().expect("clipped exponential lives on Z")[0];
            ratio.powi(n.clamp(-radius, radius) as i32)
        });
        f.interior = Some(Arc::new(move |g| g.coords().is_some_and(|c| c[0].abs() < radius)));
        f
    }

    /// Whether `g` lies where the function is known to be harmonic; points
    /// near a clipping boundary are excluded from checks.
    pub fn is_interior(&self, g: &GroupElement) -> bool {
        self.interior.as_ref().is_none_or(|r| r(g))
    }

    pub fn evaluate(&self, g: &GroupElement) -> Estimate {
        (self.evaluate)(g)
    }

    pub fn value(&self, g: &GroupElement) -> f64 {
        self.evaluate(g).value
    }

    /// Computes and caches values for `points` in parallel (no-op for exact
    /// functions).
    pub fn prefetch(&self, points: &[GroupElement]) {
        if let Some(p) = &self.prefetch {
            p(points);
        }
    }
}

/// Length at which a ray's leading letters count as settled. Returning from
/// there to below the prefix length has probability `(2k−1)^{−(margin+1)}`.
const SETTLE_MARGIN: usize = 12;

/// Fraction of unsettled rays above which an estimate is flagged unstable.
const UNSETTLED_LIMIT: f64 = 0.05;

struct CylinderEstimator {
    rank: usize,
    prefix: Vec<i32>,
    ray_samples: u64,
    ray_length: usize,
    stream: SeededStream,
    cache: Mutex<BTreeMap<GroupElement, Estimate>>,
}

impl CylinderEstimator {
    fn hits(&self, word: &[i32]) -> bool {
        word.len() >= self.prefix.len() && word[..self.prefix.len()] == self.prefix[..]
    }

    fn compute(&self, g: &GroupElement) -> Estimate {
        let start = g.letters().expect("cylinder function lives on a free group");
        if start.len() >= self.ray_length {
            return Estimate { value: self.hits(start) as u8 as f64, std_err: 0.0, unstable: true };
        }
        let settled = self.prefix.len() + SETTLE_MARGIN;
        if start.len() >= settled {
            // every ray stops before its first step
            return Estimate::exact(self.hits(start) as u8 as f64);
        }
        let mut rng = self.stream.derive(&g.to_string()).rng();
        let degree = 2 * self.rank as u32;
        let mut word: Vec<i32> = Vec::with_capacity(settled + 1);
        let (mut hits, mut unsettled) = (0u64, 0u64);
        for _ in 0..self.ray_samples {
            word.clear();
            word.extend_from_slice(start);
            let mut steps = 0;
            while word.len() < settled && steps < self.ray_length {
                let k = rng.gen_range(0..degree) as i32;
                let letter = if k < self.rank as i32 { k + 1 } else { -(k - self.rank as i32 + 1) };
                if word.last() == Some(&-letter) {
                    word.pop();
                } else {
                    word.push(letter);
                }
                steps += 1;
            }
            if word.len() < settled {
                unsettled += 1;
            }
            hits += self.hits(&word) as u64;
        }
        let n = self.ray_samples as f64;
        let p = hits as f64 / n;
        Estimate {
            value: p,
            std_err: (p * (1.0 - p) / n).sqrt(),
            unstable: unsettled as f64 > UNSETTLED_LIMIT * n,
        }
    }

    fn estimate(&self, g: &GroupElement) -> Estimate {
        if let Some(e) = self.cache.lock().unwrap().get(g) {
            return *e;
        }
        let e = self.compute(g);
        self.cache.lock().unwrap().insert(g.clone(), e);
        e
    }

    fn prefetch(&self, points: &[GroupElement]) {
        let missing: Vec<&GroupElement> = {
            let cache = self.cache.lock().unwrap();
            let mut seen = std::collections::BTreeSet::new();
            points.iter().filter(|g| !cache.contains_key(g) && seen.insert(*g)).collect()
        };
        let computed: Vec<(GroupElement, Estimate)> =
            missing.into_par_iter().map(|g| (g.clone(), self.compute(g))).collect();
        self.cache.lock().unwrap().extend(computed);
    }
}

/// Errors from [`cylinder_harmonic`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarmonicError {
    #[error("cylinder functions need a free group of rank at least 2, got {0}")]
    NotFreeGroup(GroupSpec),
    #[error("cylinder prefix must be a nonempty reduced word of the same group")]
    BadPrefix,
}

/// Probability that simple random walk on `F_k` started at `g` converges to a
/// boundary point whose reduced word begins with `prefix`, estimated from
/// `ray_samples` rays of at most `ray_length` steps each.
pub fn cylinder_harmonic(
    group: GroupSpec,
    prefix: &GroupElement,
    ray_samples: u64,
    ray_length: usize,
    stream: SeededStream,
) -> Result<HarmonicFunction, HarmonicError> {
    let rank = match group {
        GroupSpec::Free { rank } if rank >= 2 => rank,
        other => return Err(HarmonicError::NotFreeGroup(other)),
    };
    let letters = prefix.letters().filter(|l| !l.is_empty() && prefix.belongs_to(group)).ok_or(HarmonicError::BadPrefix)?;
    let seed = stream.seed;
    let est = Arc::new(CylinderEstimator {
        rank,
        prefix: letters.to_vec(),
        ray_samples,
        ray_length,
        stream,
        cache: Mutex::new(BTreeMap::new()),
    });
    let pre = est.clone();
    Ok(HarmonicFunction {
        evaluate: Arc::new(move |g| est.estimate(g)),
        prefetch: Some(Arc::new(move |points| pre.prefetch(points))),
        interior: None,
        bound_norm: 1.0,
        description: format!("cylinder [{prefix}] on {group}, {ray_samples} rays of length {ray_length}"),
        exact: false,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupSpec {
        GroupSpec::Free { rank: 2 }
    }

    fn el(s: &str) -> GroupElement {
        f2().parse_element(s).unwrap()
    }

    /// Closed form for a one-letter cylinder on F_2: hitting a neighbour
    /// closer to e has probability 1/3 per level, and f(e) = 1/4.
    fn closed_form(g: &GroupElement, s: i32) -> f64 {
        let w = g.letters().unwrap();
        let back = (1.0f64 / 3.0).powi(w.len() as i32);
        if w.is_empty() {
            0.25
        } else if w[0] == s {
            1.0 - 0.75 * back
        } else {
            0.25 * back
        }
    }

    /// Gauss–Seidel on the radius-8 ball, boundary values read off the word.
    fn linear_solve(s: i32) -> BTreeMap<GroupElement, f64> {
        let ball = f2().ball(8);
        let gens = f2().generators();
        let mut f: BTreeMap<GroupElement, f64> =
            ball.iter().map(|g| (g.clone(), g.letters().unwrap().first().map_or(0.25, |&l| (l == s) as u8 as f64))).collect();
        for _ in 0..400 {
            for g in &ball {
                if g.letters().unwrap().len() == 8 {
                    continue;
                }
                let v = gens.iter().map(|h| f[&(g * h)]).sum::<f64>() / 4.0;
                f.insert(g.clone(), v);
            }
        }
        f
    }

    #[test]
    fn closed_form_agrees_with_linear_solve() {
        let solved = linear_solve(1);
        for g in f2().ball(3) {
            assert!((solved[&g] - closed_form(&g, 1)).abs() < 1e-3, "{g}: {} vs {}", solved[&g], closed_form(&g, 1));
        }
        assert!((solved[&el("e")] - 0.25).abs() < 1e-3);
        assert!((solved[&el("a")] - 0.75).abs() < 1e-3);
    }

    #[test]
    fn estimates_match_closed_form() {
        let f = cylinder_harmonic(f2(), &el("a"), 20_000, 64, SeededStream::new(3, 0)).unwrap();
        for s in ["e", "a", "a^-1", "b", "ab", "ba", "aab"] {
            let g = el(s);
            let e = f.evaluate(&g);
            let truth = closed_form(&g, 1);
            assert!(!e.unstable);
            assert!((e.value - truth).abs() <= 3.0 * e.std_err.max(1e-9), "{s}: {} vs {truth}", e.value);
        }
    }

    #[test]
    fn cylinders_partition_the_boundary() {
        let stream = SeededStream::new(4, 0);
        let mut total = 0.0;
        let mut var = 0.0;
        for s in ["a", "a^-1", "b", "b^-1"] {
            let f = cylinder_harmonic(f2(), &el(s), 20_000, 64, stream.derive(s)).unwrap();
            let e = f.evaluate(&el("e"));
            total += e.value;
            var += e.std_err * e.std_err;
        }
        assert!((total - 1.0).abs() <= 4.0 * var.sqrt(), "sum {total}");
    }

    #[test]
    fn far_points_are_flagged() {
        let f = cylinder_harmonic(f2(), &el("a"), 100, 4, SeededStream::new(3, 0)).unwrap();
        assert!(f.evaluate(&el("abab")).unstable);
        assert!(!f.evaluate(&el("e")).unstable || f.evaluate(&el("e")).value >= 0.0);
        assert!(cylinder_harmonic(GroupSpec::Integers { rank: 1 }, &el("a"), 10, 10, SeededStream::new(1, 1)).is_err());
        assert!(cylinder_harmonic(f2(), &el("e"), 10, 10, SeededStream::new(1, 1)).is_err());
    }

    #[test]
    fn prefetch_matches_lazy_evaluation() {
        let mk = || cylinder_harmonic(f2(), &el("b"), 2_000, 64, SeededStream::new(9, 9)).unwrap();
        let (lazy, eager) = (mk(), mk());
        let pts = f2().ball(2);
        eager.prefetch(&pts);
        for g in &pts {
            assert_eq!(lazy.evaluate(g), eager.evaluate(g));
        }
    }

    #[test]
    fn clipped_exponential_is_harmonic_inside() {
        let f = HarmonicFunction::clipped_exponential(0.5, 10);
        for n in -9..=9 {
            let lhs = f.value(&GroupElement::int(n));
            let rhs = 2.0 / 3.0 * f.value(&GroupElement::int(n + 1)) + 1.0 / 3.0 * f.value(&GroupElement::int(n - 1));
            assert!((lhs - rhs).abs() < 1e-12);
        }
        assert_eq!(f.bound_norm, 1024.0);
    }
}
