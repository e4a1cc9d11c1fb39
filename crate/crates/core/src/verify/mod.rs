//! Executable checks: harmonicity residuals, transfer of harmonicity to
//! `μ_T`, optional stopping, and a brute-force oracle for the exact engine.

pub mod bundle;
pub mod harmonic;
pub mod oracle;

use std::collections::BTreeSet;
use std::fmt;

use crate::group::{GroupElement, GroupSpec};
use crate::measure::{FiniteMeasure, MeasureError};
use crate::rng::SeededStream;
use crate::scalar::Weight;
use crate::stopping::{Transform, TransformError, DEFAULT_MAX_HORIZON};

pub use harmonic::{cylinder_harmonic, Estimate, HarmonicError, HarmonicFunction};

/// Residual allowed when every quantity involved is exact.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Standard errors allowed for Monte Carlo quantities.
pub const STD_ERRORS: f64 = 4.0;
/// Below this many samples a Doob check is not attempted.
pub const MIN_DOOB_SAMPLES: u64 = 100;
/// Unstopped fraction above which a Doob check is inconclusive.
pub const DOOB_DEFICIT_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one check. A conclusive report passes iff
/// `max_residual <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub points_tested: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
    pub seeds: Vec<u64>,
    pub note: String,
}

impl CheckReport {
    pub fn judged(name: impl Into<String>, points_tested: usize, max_residual: f64, tolerance: f64) -> Self {
        let status = if max_residual <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        CheckReport {
            name: name.into(),
            points_tested,
            max_residual,
            tolerance,
            status,
            seeds: Vec::new(),
            note: String::new(),
        }
    }

    pub fn inconclusive(mut self, why: impl Into<String>) -> Self {
        self.status = CheckStatus::Inconclusive;
        self.note = why.into();
        self
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds.extend(seeds);
        self.seeds.sort_unstable();
        self.seeds.dedup();
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        if self.note.is_empty() {
            self.note = note.into();
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: residual {:.3e} (tolerance {:.3e}, {} points)",
            self.status, self.name, self.max_residual, self.tolerance, self.points_tested
        )?;
        if !self.note.is_empty() {
            write!(f, " - {}", self.note)?;
        }
        Ok(())
    }
}

/// The radius-2 ball in the standard generators.
pub fn default_points(group: GroupSpec) -> Vec<GroupElement> {
    group.ball(2)
}

/// The first `count` elements of the smallest ball holding at least `count`
/// elements, in canonical order (fewer when the group is smaller).
pub fn canonical_points(group: GroupSpec, count: usize) -> Vec<GroupElement> {
    let mut inner = group.ball(0);
    let mut radius = 0;
    loop {
        if inner.len() >= count {
            inner.truncate(count);
            return inner;
        }
        let outer = group.ball(radius + 1);
        if outer.len() == inner.len() {
            return inner;
        }
        if outer.len() >= count {
            let shell: Vec<GroupElement> = outer.into_iter().filter(|g| !inner.contains(g)).collect();
            let missing = count - inner.len();
            inner.extend(shell.into_iter().take(missing));
            return inner;
        }
        inner = outer;
        radius += 1;
    }
}

struct Residuals {
    max: f64,
    max_std_err: f64,
    tested: usize,
    skipped: usize,
    unstable: bool,
}

fn residuals(f: &HarmonicFunction, weights: &FiniteMeasure<f64>, points: &[GroupElement]) -> Residuals {
    let usable: Vec<&GroupElement> = points
        .iter()
        .filter(|g| f.is_interior(g) && weights.support().all(|h| f.is_interior(&(*g * h))))
        .collect();
    let mut needed: BTreeSet<GroupElement> = usable.iter().map(|g| (*g).clone()).collect();
    for g in &usable {
        needed.extend(weights.support().map(|h| *g * h));
    }
    f.prefetch(&needed.into_iter().collect::<Vec<_>>());

    let mut out = Residuals { max: 0.0, max_std_err: 0.0, tested: usable.len(), skipped: points.len() - usable.len(), unstable: false };
    for g in usable {
        let at = f.evaluate(g);
        let (mut mean, mut var) = (0.0, 0.0);
        out.unstable |= at.unstable;
        for (h, w) in weights.iter() {
            let e = f.evaluate(&(g * h));
            mean += w * e.value;
            var += (w * e.std_err).powi(2);
            out.unstable |= e.unstable;
        }
        out.max = out.max.max((at.value - mean).abs());
        out.max_std_err = out.max_std_err.max((at.std_err.powi(2) + var).sqrt());
    }
    out
}

fn residual_report(name: String, f: &HarmonicFunction, weights: &FiniteMeasure<f64>, points: &[GroupElement], slack: f64) -> CheckReport {
    let r = residuals(f, weights, points);
    let base = if f.exact { EXACT_TOLERANCE } else { STD_ERRORS * r.max_std_err };
    let mut report = CheckReport::judged(name, r.tested, r.max, base + slack).with_seeds(f.seed);
    if r.skipped > 0 {
        report.note = format!("{} points skipped near the clipping boundary", r.skipped);
    }
    if r.tested == 0 {
        report = report.inconclusive("no interior points to test");
    } else if r.unstable {
        report = report.inconclusive("some function values did not stabilize; increase the ray length");
    }
    report
}

/// `max_g |f(g) − Σ_h f(gh) μ(h)|` over the interior points among `points`.
pub fn harmonicity_residual<S: Weight>(f: &HarmonicFunction, mu: &FiniteMeasure<S>, points: &[GroupElement]) -> CheckReport {
    residual_report(format!("harmonicity of {}", f.description), f, &mu.to_f64(), points, 0.0)
}

/// Harmonicity of `f` for `μ_T`, with `μ_T` from the exact engine. Paths
/// that never stopped can shift the sum by up to `deficit · ‖f‖`, so the
/// tolerance widens by that much.
pub fn transfer_check<S: Weight>(
    f: &HarmonicFunction,
    mu: &FiniteMeasure<S>,
    transform: &dyn Transform<S>,
    points: &[GroupElement],
    epsilon: &S,
    max_horizon: usize,
) -> Result<CheckReport, TransformError> {
    let result = transform.exact(mu, epsilon, max_horizon)?;
    let deficit = result.mass_deficit.as_f64();
    let slack = deficit * f.bound_norm;
    let name = format!("transfer of {} under {}", f.description, transform.describe());
    let mut report = residual_report(name, f, &result.measure.to_f64(), points, slack);
    if result.truncated {
        report.note = format!("transform truncated at depth {} with deficit {deficit:.3e}", result.horizon);
    }
    Ok(report)
}

/// Optional stopping from `e`: compares the sampled mean of `f(x_T)` with
/// `f(e)`. Passes within four standard errors plus `deficit · ‖f‖`.
pub fn doob_check<S: Weight>(
    f: &HarmonicFunction,
    mu: &FiniteMeasure<S>,
    transform: &dyn Transform<S>,
    samples: u64,
    stream: SeededStream,
) -> Result<CheckReport, TransformError> {
    let name = format!("optional stopping of {} under {}", f.description, transform.describe());
    let seeds = f.seed.into_iter().chain([stream.seed]);
    if samples < MIN_DOOB_SAMPLES {
        return Ok(CheckReport::judged(name, 0, f64::NAN, f64::NAN)
            .with_seeds(seeds)
            .inconclusive(format!("{samples} samples is below the minimum of {MIN_DOOB_SAMPLES}")));
    }
    let result = transform.monte_carlo(mu, samples, DEFAULT_MAX_HORIZON, stream)?;
    let law = result.measure.to_f64();
    let deficit = result.mass_deficit.as_f64();
    let stopped = *law.mass();
    if stopped <= 0.0 {
        return Ok(CheckReport::judged(name, 0, f64::NAN, f64::NAN).with_seeds(seeds).inconclusive("no sampled path stopped"));
    }
    let points: Vec<GroupElement> = law.support().cloned().collect();
    f.prefetch(&points);

    let (mut m1, mut m2, mut value_err, mut unstable) = (0.0, 0.0, 0.0, false);
    for (x, w) in law.iter() {
        let e = f.evaluate(x);
        let p = w / stopped;
        m1 += p * e.value;
        m2 += p * e.value * e.value;
        value_err += p * e.std_err;
        unstable |= e.unstable;
    }
    let start = f.evaluate(&mu.group().identity());
    let n = (stopped * samples as f64).round();
    let path_err = ((m2 - m1 * m1).max(0.0) / n).sqrt();
    let std_err = (path_err.powi(2) + value_err.powi(2) + start.std_err.powi(2)).sqrt();
    let floor = if f.exact { EXACT_TOLERANCE } else { 0.0 };
    let tolerance = STD_ERRORS * std_err + deficit * f.bound_norm + floor;
    let report = CheckReport::judged(name, points.len(), (m1 - start.value).abs(), tolerance)
        .with_seeds(seeds)
        .with_note(format!("mean {m1:.6} vs f(e) = {:.6}, std err {std_err:.3e}", start.value));
    Ok(if deficit > DOOB_DEFICIT_LIMIT {
        report.inconclusive(format!("unstopped fraction {deficit:.3e} exceeds {DOOB_DEFICIT_LIMIT:e}"))
    } else if unstable || start.unstable {
        report.inconclusive("some function values did not stabilize")
    } else {
        report
    })
}

/// `H(μ^{*n})` in nats for `n = 1..=max_n`, refusing supports above `cap`.
pub fn entropy_diagnostic<S: Weight>(mu: &FiniteMeasure<S>, max_n: usize, cap: usize) -> Result<Vec<(usize, f64)>, MeasureError> {
    mu.require_probability()?;
    let mut out = Vec::with_capacity(max_n);
    let mut power = FiniteMeasure::dirac(mu.group().identity());
    for n in 1..=max_n {
        power = power.convolve(mu)?;
        if power.len() > cap {
            return Err(MeasureError::SupportCap { size: power.len(), cap });
        }
        out.push((n, power.shannon_entropy()?));
    }
    Ok(out)
}
