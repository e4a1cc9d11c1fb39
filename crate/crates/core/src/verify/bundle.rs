//! Named groups of checks over built-in walks, rules and harmonic functions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::extended::ExtendedSetup;
use crate::group::{GroupElement, GroupSpec};
use crate::measure::{FiniteMeasure, SplitPair};
use crate::rng::SeededStream;
use crate::scalar::Weight;
use crate::stopping::{StoppingRule, Transform, TransformError, DEFAULT_MAX_HORIZON};

use super::oracle::{enumerate_extended, enumerate_rule, OracleResult};
use super::{canonical_points, cylinder_harmonic, doob_check, transfer_check, CheckReport, HarmonicError, HarmonicFunction};

/// Radius of the clipped exponential on ℤ.
pub const CLIP_RADIUS: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bundle {
    Identities,
    Doob,
    Transfer,
    All,
}

impl Bundle {
    pub fn as_str(self) -> &'static str {
        match self {
            Bundle::Identities => "identities",
            Bundle::Doob => "doob",
            Bundle::Transfer => "transfer",
            Bundle::All => "all",
        }
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown check bundle `{0}` (expected identities, doob, transfer or all)")]
pub struct UnknownBundle(pub String);

impl FromStr for Bundle {
    type Err = UnknownBundle;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identities" => Ok(Bundle::Identities),
            "doob" => Ok(Bundle::Doob),
            "transfer" => Ok(Bundle::Transfer),
            "all" => Ok(Bundle::All),
            other => Err(UnknownBundle(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
}

impl From<crate::measure::MeasureError> for BundleError {
    fn from(e: crate::measure::MeasureError) -> Self {
        BundleError::Transform(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct BundleConfig<S> {
    pub seed: u64,
    /// Paths per Doob check.
    pub samples: u64,
    /// Rays per cylinder-function value.
    pub ray_samples: u64,
    pub ray_length: usize,
    pub epsilon: S,
    pub max_horizon: usize,
}

impl<S: Weight> Default for BundleConfig<S> {
    fn default() -> Self {
        BundleConfig {
            seed: 1,
            samples: 100_000,
            ray_samples: 100_000,
            ray_length: 64,
            epsilon: S::default_epsilon(),
            max_horizon: DEFAULT_MAX_HORIZON,
        }
    }
}

fn el(group: GroupSpec, literal: &str) -> GroupElement {
    group.parse_element(literal).expect("built-in literal")
}

fn set(group: GroupSpec, literals: &[&str]) -> BTreeSet<GroupElement> {
    literals.iter().map(|l| el(group, l)).collect()
}

fn walk<S: Weight>(group: GroupSpec, entries: &[(&str, i64, i64)]) -> FiniteMeasure<S> {
    FiniteMeasure::from_weights(group, entries.iter().map(|(l, n, d)| (el(group, l), S::ratio(*n, *d)))).expect("built-in walk")
}

pub fn z() -> GroupSpec {
    GroupSpec::Integers { rank: 1 }
}

pub fn f2() -> GroupSpec {
    GroupSpec::Free { rank: 2 }
}

/// `δ₁` on ℤ₂.
pub fn z2_shift<S: Weight>() -> FiniteMeasure<S> {
    walk(GroupSpec::Cyclic { modulus: 2 }, &[("1", 1, 1)])
}

/// Simple random walk on ℤ.
pub fn z_simple<S: Weight>() -> FiniteMeasure<S> {
    walk(z(), &[("1", 1, 2), ("-1", 1, 2)])
}

/// `⅔ δ₁ + ⅓ δ₋₁` on ℤ, harmonic partner of [`z_clipped`].
pub fn z_biased<S: Weight>() -> FiniteMeasure<S> {
    walk(z(), &[("1", 2, 3), ("-1", 1, 3)])
}

/// Uniform on `a^{±1}, b^{±1}`.
pub fn f2_uniform<S: Weight>() -> FiniteMeasure<S> {
    FiniteMeasure::uniform(f2(), &f2().generators()).expect("built-in walk")
}

/// Uniform on `t, t⁻¹` and the lamp toggle in ℤ ≀ ℤ₂.
pub fn lamplighter_standard<S: Weight>() -> FiniteMeasure<S> {
    let g = GroupSpec::Lamplighter { rank: 1 };
    FiniteMeasure::uniform(g, &g.generators()).expect("built-in walk")
}

pub fn standard_walks<S: Weight>() -> Vec<(&'static str, FiniteMeasure<S>)> {
    vec![
        ("Z_2 shift", z2_shift()),
        ("Z simple", z_simple()),
        ("F_2 uniform", f2_uniform()),
        ("lamplighter standard", lamplighter_standard()),
    ]
}

/// `(2^{-1})^n` clipped at radius [`CLIP_RADIUS`].
pub fn z_clipped() -> HarmonicFunction {
    HarmonicFunction::clipped_exponential(0.5, CLIP_RADIUS)
}

/// Overlapping split of [`f2_uniform`]: all of `b^{±1}` and half of `a` go to
/// `β`, so `a` sits in both parts.
pub fn f2_overlapping_split<S: Weight>() -> SplitPair<S> {
    let g = f2();
    let fraction = BTreeMap::from([(el(g, "a"), S::ratio(1, 2)), (el(g, "b"), S::one()), (el(g, "b^-1"), S::one())]);
    f2_uniform::<S>().split_by_fraction(&fraction).expect("built-in split")
}

/// `δ₁` on ℤ₂ split half and half.
pub fn z2_half_split<S: Weight>() -> SplitPair<S> {
    let mu = z2_shift::<S>();
    let fraction = mu.support().map(|g| (g.clone(), S::ratio(1, 2))).collect();
    mu.split_by_fraction(&fraction).expect("built-in split")
}

/// Total variation as `f64`.
fn tv<S: Weight>(a: &FiniteMeasure<S>, b: &FiniteMeasure<S>) -> Result<f64, BundleError> {
    Ok(a.total_variation(b)?.as_f64())
}

pub fn constant_time_identity<S: Weight>(name: &str, mu: &FiniteMeasure<S>, max_n: usize) -> Result<CheckReport, BundleError> {
    let mut worst: f64 = 0.0;
    for n in 1..=max_n {
        let r = exact(mu, &StoppingRule::constant(n)?, &S::default_epsilon(), max_n)?;
        worst = worst.max(tv(&r.measure, &mu.power(n))?).max(r.mass_deficit.as_f64());
    }
    Ok(CheckReport::judged(format!("constant time equals power on {name}, n = 1..{max_n}"), max_n, worst, S::mass_tolerance().as_f64()))
}

fn exact<S: Weight>(
    mu: &FiniteMeasure<S>,
    t: &dyn Transform<S>,
    epsilon: &S,
    max_horizon: usize,
) -> Result<crate::stopping::TransformResult<S>, TransformError> {
    t.exact(mu, epsilon, max_horizon)
}

pub fn composition_identity<S: Weight>(
    name: &str,
    mu: &FiniteMeasure<S>,
    first: &StoppingRule,
    second: &StoppingRule,
    epsilon: &S,
    max_horizon: usize,
) -> Result<CheckReport, BundleError> {
    let joint = exact(mu, &StoppingRule::sequential(first.clone(), second.clone()), epsilon, max_horizon)?;
    let a = exact(mu, first, epsilon, max_horizon)?;
    let b = exact(mu, second, epsilon, max_horizon)?;
    let product = a.measure.convolve(&b.measure)?;
    let tol = 2.0 * epsilon.as_f64() + S::mass_tolerance().as_f64();
    Ok(CheckReport::judged(
        format!("{} then {} on {name} equals the convolution", first.describe(), second.describe()),
        joint.measure.len(),
        tv(&joint.measure, &product)?,
        tol,
    ))
}

/// The four built-in composition pairs, on ℤ and `F₂`.
pub fn composition_pairs<S: Weight>() -> Vec<(&'static str, FiniteMeasure<S>, StoppingRule, StoppingRule)> {
    let down = StoppingRule::first_increment(set(z(), &["-1"])).unwrap();
    let b_step = StoppingRule::first_increment(set(f2(), &["b", "b^-1"])).unwrap();
    let a_step = StoppingRule::first_increment(set(f2(), &["a", "a^-1"])).unwrap();
    let c = |n| StoppingRule::constant(n).unwrap();
    vec![
        ("Z simple", z_simple(), c(2), c(3)),
        ("Z simple", z_simple(), down.clone(), c(2)),
        ("F_2 uniform", f2_uniform(), c(2), b_step.clone()),
        ("F_2 uniform", f2_uniform(), b_step, a_step),
    ]
}

/// First increment `−1` on the simple walk against the Neumann series of
/// its support split.
pub fn geometric_identity<S: Weight>(epsilon: &S, max_horizon: usize) -> Result<CheckReport, BundleError> {
    let mu = z_simple::<S>();
    let b = set(z(), &["-1"]);
    let r = exact(&mu, &StoppingRule::first_increment(b.clone())?, epsilon, max_horizon)?;
    let split = mu.split_by_support(&b)?;
    let series = FiniteMeasure::neumann_series(&split.alpha, &split.beta, epsilon, max_horizon)?;
    let tol = 2.0 * epsilon.as_f64() + S::mass_tolerance().as_f64();
    Ok(CheckReport::judged("first increment -1 on Z simple equals the Neumann series", r.measure.len(), tv(&r.measure, &series.measure)?, tol))
}

/// `Σ aₙ μ^{*n}` with points `{1, 2, 3}` and weights `(½, ¼, ¼)` via the
/// first auxiliary coordinate.
pub fn convex_identity<S: Weight>(name: &str, mu: &FiniteMeasure<S>) -> Result<CheckReport, BundleError> {
    let coefficients = [(1, S::ratio(1, 2)), (2, S::ratio(1, 4)), (3, S::ratio(1, 4))];
    let setup = ExtendedSetup::convex(coefficients.to_vec())?;
    let projected = exact(mu, &setup, &S::default_epsilon(), 10)?;
    let terms: Vec<(S, FiniteMeasure<S>)> = coefficients.iter().map(|(n, a)| (a.clone(), mu.power(*n as usize))).collect();
    let combined = FiniteMeasure::convex_combine(&terms)?;
    Ok(CheckReport::judged(
        format!("aux first coordinate on {name} equals the convex combination"),
        projected.measure.len(),
        tv(&projected.measure, &combined)?.max(projected.mass_deficit.as_f64()),
        S::mass_tolerance().as_f64(),
    ))
}

/// `⅔ δ₁ + ⅓ δ₀`: the odd and even parts of `Σ 2^{-(n+1)} δ_{n+1}`.
pub fn z2_overlap_target<S: Weight>() -> FiniteMeasure<S> {
    walk(GroupSpec::Cyclic { modulus: 2 }, &[("1", 2, 3), ("0", 1, 3)])
}

pub fn overlapping_split_exact<S: Weight>(epsilon: &S, max_horizon: usize) -> Result<CheckReport, BundleError> {
    let setup = ExtendedSetup::beta_flag(&z2_half_split::<S>(), false)?;
    let r = exact(&z2_shift::<S>(), &setup, epsilon, max_horizon)?;
    let residual = tv(&r.measure, &z2_overlap_target())?;
    Ok(CheckReport::judged("beta flag on Z_2 with half split, exact", 2, residual, epsilon.as_f64() + S::mass_tolerance().as_f64()))
}

/// Monte Carlo version; the tolerance is four standard errors of the
/// two-point estimate.
pub fn overlapping_split_sampled<S: Weight>(samples: u64, stream: SeededStream, coupled: bool) -> Result<CheckReport, BundleError> {
    let setup = ExtendedSetup::beta_flag(&z2_half_split::<S>(), coupled)?;
    let r = setup.monte_carlo(&z2_shift::<S>(), samples, DEFAULT_MAX_HORIZON, stream)?;
    let residual = tv(&r.measure, &z2_overlap_target())?;
    let tolerance = super::STD_ERRORS * (2.0f64 / 9.0 / samples as f64).sqrt() + r.mass_deficit.as_f64();
    let mode = if coupled { "coupled" } else { "uncoupled" };
    Ok(CheckReport::judged(format!("beta flag on Z_2 with half split, {samples} {mode} samples"), 2, residual, tolerance)
        .with_seeds([stream.seed]))
}

/// Five-point threshold split on ℤ followed by the Neumann series. Returns
/// the reassembly check and the deficit check.
pub fn threshold_split_pipeline<S: Weight>(epsilon: &S) -> Result<[CheckReport; 2], BundleError> {
    let g = z();
    let mu: FiniteMeasure<S> = walk(g, &[("-2", 1, 10), ("-1", 2, 10), ("0", 4, 10), ("1", 2, 10), ("2", 1, 10)]);
    let reference: BTreeMap<GroupElement, S> = mu.support().map(|x| (x.clone(), S::ratio(1, 5))).collect();
    let split = mu.density_split(&set(g, &["0"]), &reference, &S::one())?;
    let reassembled = split.reassemble();
    let series = FiniteMeasure::neumann_series(&split.alpha, &split.beta, epsilon, DEFAULT_MAX_HORIZON)?;
    let deficit = (S::one() - series.measure.mass().clone()).as_f64();
    Ok([
        CheckReport::judged("threshold split reassembles the five-point walk", 5, tv(&reassembled, &mu)?, S::mass_tolerance().as_f64()),
        CheckReport::judged(
            format!("Neumann series of the threshold split, {} terms", series.terms),
            series.measure.len(),
            deficit,
            epsilon.as_f64() + S::mass_tolerance().as_f64(),
        ),
    ])
}

fn oracle_gap<S: Weight>(r: &crate::stopping::TransformResult<S>, o: &OracleResult<S>) -> Result<f64, BundleError> {
    Ok(tv(&r.measure, &o.measure)?.max((r.mass_deficit.clone() - o.unstopped.clone()).abs().as_f64()))
}

/// Exact engine against brute-force enumeration at a shared horizon.
pub fn oracle_rule<S: Weight>(name: &str, mu: &FiniteMeasure<S>, rule: &StoppingRule, depth: usize) -> Result<CheckReport, BundleError> {
    let r = exact(mu, rule, &S::ratio(1, i64::MAX), depth)?;
    let o = enumerate_rule(mu, rule, depth)?;
    Ok(CheckReport::judged(
        format!("engine equals enumeration for {} on {name}, depth {depth}", rule.describe()),
        o.measure.len(),
        oracle_gap(&r, &o)?,
        S::mass_tolerance().as_f64(),
    ))
}

pub fn oracle_extended<S: Weight>(name: &str, mu: &FiniteMeasure<S>, setup: &ExtendedSetup<S>, depth: usize) -> Result<CheckReport, BundleError> {
    let r = exact(mu, setup, &S::ratio(1, i64::MAX), depth)?;
    let o = enumerate_extended(mu, &setup.rule, depth)?;
    Ok(CheckReport::judged(
        format!("engine equals enumeration for {} on {name}, depth {depth}", setup.describe()),
        o.measure.len(),
        oracle_gap(&r, &o)?,
        S::mass_tolerance().as_f64(),
    ))
}

/// Every built-in rule kind on walks small enough to enumerate.
pub fn oracle_suite<S: Weight>() -> Result<Vec<CheckReport>, BundleError> {
    let (zs, fs, lamp) = (z_simple::<S>(), f2_uniform::<S>(), lamplighter_standard::<S>());
    let lg = GroupSpec::Lamplighter { rank: 1 };
    let down = StoppingRule::first_increment(set(z(), &["-1"]))?;
    let two_ups = StoppingRule::custom("two consecutive up-steps", |hs: &[GroupElement]| {
        hs.len() >= 2 && hs[hs.len() - 2..].iter().all(|h| h.coords() == Some(&[1]))
    });
    let c = |n| StoppingRule::constant(n);
    let mut out = vec![
        oracle_rule("Z_2 shift", &z2_shift::<S>(), &StoppingRule::first_visit(set(GroupSpec::Cyclic { modulus: 2 }, &["0"]))?, 12)?,
        oracle_rule("Z simple", &zs, &c(3)?, 12)?,
        oracle_rule("Z simple", &zs, &StoppingRule::first_visit(set(z(), &["2", "-3"]))?, 12)?,
        oracle_rule("Z simple", &zs, &down, 12)?,
        oracle_rule("Z simple", &zs, &StoppingRule::sequential(down.clone(), StoppingRule::first_visit(set(z(), &["1"]))?), 12)?,
        oracle_rule("Z simple", &zs, &two_ups, 12)?,
        oracle_rule("F_2 uniform", &fs, &c(2)?, 6)?,
        oracle_rule("F_2 uniform", &fs, &StoppingRule::first_visit(set(f2(), &["ab", "b^-1"]))?, 6)?,
        oracle_rule("F_2 uniform", &fs, &StoppingRule::first_increment(set(f2(), &["b", "b^-1"]))?, 6)?,
        oracle_rule(
            "F_2 uniform",
            &fs,
            &StoppingRule::sequence(vec![StoppingRule::first_increment(set(f2(), &["a"]))?, c(1)?, StoppingRule::first_visit(set(f2(), &["e"]))?])?,
            6,
        )?,
        oracle_rule("lamplighter standard", &lamp, &StoppingRule::first_visit(set(lg, &["p=0;L=0"]))?, 7)?,
        oracle_rule("lamplighter standard", &lamp, &StoppingRule::sequential(c(2)?, StoppingRule::first_increment(set(lg, &["p=1;L="]))?), 7)?,
    ];
    let convex = ExtendedSetup::convex(vec![(1, S::ratio(1, 2)), (2, S::ratio(1, 4)), (5, S::ratio(1, 4))])?;
    out.push(oracle_extended("Z simple", &zs, &convex, 12)?);
    out.push(oracle_extended("Z_2 shift", &z2_shift::<S>(), &ExtendedSetup::beta_flag(&z2_half_split::<S>(), false)?, 12)?);
    out.push(oracle_extended("F_2 uniform", &fs, &ExtendedSetup::beta_flag(&f2_overlapping_split::<S>(), false)?, 5)?);
    Ok(out)
}

/// Everything checkable without sampling.
pub fn identities<S: Weight>(config: &BundleConfig<S>) -> Result<Vec<CheckReport>, BundleError> {
    let mut out = Vec::new();
    for (name, mu) in standard_walks::<S>() {
        out.push(constant_time_identity(name, &mu, 5)?);
    }
    for (name, mu, a, b) in composition_pairs::<S>() {
        out.push(composition_identity(name, &mu, &a, &b, &config.epsilon, config.max_horizon)?);
    }
    out.push(geometric_identity(&config.epsilon, config.max_horizon)?);
    for (name, mu) in standard_walks::<S>() {
        out.push(convex_identity(name, &mu)?);
    }
    out.push(overlapping_split_exact(&config.epsilon, config.max_horizon)?);
    out.extend(threshold_split_pipeline(&config.epsilon)?);
    out.extend(oracle_suite::<S>()?);
    Ok(out)
}

/// Built-in harmonic functions paired with walks and transforms.
pub struct Pairing<S> {
    pub walk: &'static str,
    pub mu: FiniteMeasure<S>,
    pub f: HarmonicFunction,
    pub transform: Box<dyn Transform<S>>,
}

/// The built-in `(f, μ, T)` triples shared by the Doob and transfer bundles.
pub fn pairings<S: Weight>(config: &BundleConfig<S>) -> Result<Vec<Pairing<S>>, BundleError> {
    let clipped = z_clipped();
    let cylinder = cylinder_harmonic(f2(), &el(f2(), "a"), config.ray_samples, config.ray_length, SeededStream::new(config.seed, 0).derive("cylinder"))?;
    let down = StoppingRule::first_increment(set(z(), &["-1"]))?;
    let b_step = StoppingRule::first_increment(set(f2(), &["b", "b^-1"]))?;
    let c = |n| StoppingRule::constant(n);
    let pair = |walk, mu: FiniteMeasure<S>, f: &HarmonicFunction, t: Box<dyn Transform<S>>| Pairing { walk, mu, f: f.clone(), transform: t };
    Ok(vec![
        pair("Z biased", z_biased(), &clipped, Box::new(c(2)?)),
        pair("Z biased", z_biased(), &clipped, Box::new(c(3)?)),
        pair("Z biased", z_biased(), &clipped, Box::new(down.clone())),
        pair("Z biased", z_biased(), &clipped, Box::new(StoppingRule::sequential(down, c(2)?))),
        pair("F_2 uniform", f2_uniform(), &HarmonicFunction::constant(1.0), Box::new(b_step.clone())),
        pair("F_2 uniform", f2_uniform(), &cylinder, Box::new(c(2)?)),
        pair("F_2 uniform", f2_uniform(), &cylinder, Box::new(b_step)),
        pair("F_2 uniform", f2_uniform(), &cylinder, Box::new(ExtendedSetup::beta_flag(&f2_overlapping_split::<S>(), false)?)),
        pair("lamplighter standard", lamplighter_standard(), &HarmonicFunction::constant(-2.0), Box::new(c(3)?)),
    ])
}

fn labelled(mut report: CheckReport, walk: &str) -> CheckReport {
    report.name = format!("{} on {walk}", report.name);
    report
}

pub fn transfer_bundle<S: Weight>(config: &BundleConfig<S>, pairs: &[Pairing<S>]) -> Result<Vec<CheckReport>, BundleError> {
    let mut out = Vec::new();
    for p in pairs {
        let points = canonical_points(p.mu.group(), 20);
        let r = transfer_check(&p.f, &p.mu, p.transform.as_ref(), &points, &config.epsilon, config.max_horizon)?;
        out.push(labelled(r, p.walk));
    }
    Ok(out)
}

pub fn doob_bundle<S: Weight>(config: &BundleConfig<S>, pairs: &[Pairing<S>]) -> Result<Vec<CheckReport>, BundleError> {
    let mut out = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let stream = SeededStream::new(config.seed, 1 + i as u64);
        let r = doob_check(&p.f, &p.mu, p.transform.as_ref(), config.samples, stream)?;
        out.push(labelled(r, p.walk));
    }
    Ok(out)
}

pub fn run_bundle<S: Weight>(bundle: Bundle, config: &BundleConfig<S>) -> Result<Vec<CheckReport>, BundleError> {
    let mut out = Vec::new();
    if matches!(bundle, Bundle::Identities | Bundle::All) {
        out.extend(identities(config)?);
    }
    if matches!(bundle, Bundle::Doob | Bundle::Transfer | Bundle::All) {
        let pairs = pairings(config)?;
        if matches!(bundle, Bundle::Transfer | Bundle::All) {
            out.extend(transfer_bundle(config, &pairs)?);
        }
        if matches!(bundle, Bundle::Doob | Bundle::All) {
            out.extend(doob_bundle(config, &pairs)?);
        }
    }
    Ok(out)
}
