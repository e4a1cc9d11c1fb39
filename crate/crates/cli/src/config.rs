//! Experiment configuration: one JSON document, validated into core types.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use boundary_walk::verify::bundle::{Bundle, BundleConfig};
use boundary_walk::{
    ArithmeticMode, ExtendedSetup, FiniteMeasure, GroupElement, GroupSpec, StoppingRule, Transform, Weight,
    DEFAULT_MAX_HORIZON,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub group: Option<RawGroup>,
    pub mode: Option<String>,
    pub measure: Option<BTreeMap<String, Literal>>,
    pub rule: Option<RawRule>,
    pub method: Option<String>,
    pub epsilon: Option<Literal>,
    pub max_horizon: Option<usize>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub bundle: Option<String>,
    pub ray_samples: Option<u64>,
    pub ray_length: Option<usize>,
    pub max_n: Option<usize>,
    pub support_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawGroup {
    Integers { rank: usize },
    Cyclic { modulus: u64 },
    Free { rank: usize },
    Lamplighter { rank: usize },
}

impl RawGroup {
    pub fn spec(self) -> Result<GroupSpec, CliError> {
        let spec = match self {
            RawGroup::Integers { rank } => GroupSpec::integers(rank),
            RawGroup::Cyclic { modulus } => GroupSpec::cyclic(modulus),
            RawGroup::Free { rank } => GroupSpec::free(rank),
            RawGroup::Lamplighter { rank } => GroupSpec::lamplighter(rank),
        };
        spec.map_err(|e| CliError::usage(format!("invalid group: {e}")))
    }

    pub fn from_spec(spec: GroupSpec) -> Self {
        match spec {
            GroupSpec::Integers { rank } => RawGroup::Integers { rank },
            GroupSpec::Cyclic { modulus } => RawGroup::Cyclic { modulus },
            GroupSpec::Free { rank } => RawGroup::Free { rank },
            GroupSpec::Lamplighter { rank } => RawGroup::Lamplighter { rank },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawRule {
    Constant { n: usize },
    FirstVisit { set: Vec<String> },
    FirstIncrement { set: Vec<String> },
    Sequential { rules: Vec<RawRule> },
    AuxConvex { points: BTreeMap<String, Literal> },
    BetaFlag {
        fraction: BTreeMap<String, Literal>,
        #[serde(default)]
        coupled: bool,
    },
}

/// A weight written either as a string (`"1/3"`) or a JSON number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Text(String),
    Number(serde_json::Number),
}

impl Literal {
    fn text(&self) -> String {
        match self {
            Literal::Text(s) => s.clone(),
            Literal::Number(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

/// A loaded config plus the raw text, kept for locating bad literals.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub raw: RawConfig,
    text: String,
    path: PathBuf,
}

/// `(line, column)` of the first occurrence of `literal` as a JSON string
/// (or, failing that, as a bare number), 1-based, pointing at the literal's
/// first character.
fn locate(text: &str, literal: &str) -> Option<(usize, usize)> {
    let quoted = serde_json::to_string(literal).ok()?;
    let at = match text.find(&quoted) {
        Some(i) => i + 1,
        None => text.find(literal)?,
    };
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Some((line, column))
}

impl Loaded {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(text, path)
    }

    pub fn from_text(text: String, path: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            file: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(Loaded { raw, text, path: path.to_path_buf() })
    }

    pub fn empty() -> Self {
        Loaded {
            raw: serde_json::from_str("{}").expect("empty config"),
            text: String::new(),
            path: PathBuf::from("<defaults>"),
        }
    }

    fn literal_error(&self, literal: &str, offset: usize, message: String) -> CliError {
        let (line, column) = locate(&self.text, literal).unwrap_or((0, 0));
        CliError::Parse {
            file: self.path.display().to_string(),
            line,
            column: if column == 0 { 0 } else { column + offset.saturating_sub(1) },
            message,
        }
    }

    pub fn mode(&self, flag: Option<ArithmeticMode>) -> Result<ArithmeticMode, CliError> {
        if let Some(m) = flag {
            return Ok(m);
        }
        match &self.raw.mode {
            None => Ok(ArithmeticMode::Exact),
            Some(m) => m.parse().map_err(|_| self.literal_error(m, 1, format!("unknown mode `{m}` (expected exact or float)"))),
        }
    }

    pub fn method(&self) -> Result<Method, CliError> {
        match self.raw.method.as_deref() {
            None | Some("exact") => Ok(Method::Exact),
            Some("monte_carlo") => Ok(Method::MonteCarlo),
            Some(m) => Err(self.literal_error(m, 1, format!("unknown method `{m}` (expected exact or monte_carlo)"))),
        }
    }

    pub fn group(&self) -> Result<GroupSpec, CliError> {
        self.raw.group.ok_or_else(|| CliError::usage("config needs a `group`"))?.spec()
    }

    pub fn element(&self, group: GroupSpec, literal: &str) -> Result<GroupElement, CliError> {
        group
            .parse_element(literal)
            .map_err(|e| self.literal_error(literal, e.column, format!("bad element `{literal}` for {group}: {}", e.message)))
    }

    pub fn weight<S: Weight>(&self, literal: &Literal) -> Result<S, CliError> {
        let text = literal.text();
        S::parse_literal(&text).map_err(|e| {
            let mode = if S::is_exact() { "exact" } else { "float" };
            self.literal_error(&text, 1, format!("bad {mode} weight `{text}`: {e}"))
        })
    }

    pub fn measure<S: Weight>(&self, group: GroupSpec) -> Result<FiniteMeasure<S>, CliError> {
        let table = self.raw.measure.as_ref().ok_or_else(|| CliError::usage("config needs a `measure`"))?;
        let mut entries = Vec::with_capacity(table.len());
        for (g, w) in table {
            entries.push((self.element(group, g)?, self.weight::<S>(w)?));
        }
        let mu = FiniteMeasure::from_weights(group, entries).map_err(|e| CliError::usage(format!("invalid measure: {e}")))?;
        mu.require_probability().map_err(|e| CliError::usage(format!("invalid measure: {e}")))?;
        Ok(mu)
    }

    pub fn epsilon<S: Weight>(&self) -> Result<S, CliError> {
        let eps = match &self.raw.epsilon {
            None => S::default_epsilon(),
            Some(l) => self.weight::<S>(l)?,
        };
        if !eps.is_positive() {
            return Err(CliError::usage("epsilon must be positive"));
        }
        Ok(eps)
    }

    pub fn max_horizon(&self) -> usize {
        self.raw.max_horizon.unwrap_or(DEFAULT_MAX_HORIZON)
    }

    pub fn samples(&self) -> u64 {
        self.raw.samples.unwrap_or(100_000)
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.raw.seed).unwrap_or(1)
    }

    pub fn bundle(&self, flag: Option<&str>) -> Result<Bundle, CliError> {
        let name = flag.or(self.raw.bundle.as_deref()).ok_or_else(|| CliError::usage("no check bundle named (use --bundle or `bundle`)"))?;
        name.parse().map_err(|e: boundary_walk::verify::bundle::UnknownBundle| CliError::usage(e.to_string()))
    }

    pub fn bundle_config<S: Weight>(&self, seed: Option<u64>) -> Result<BundleConfig<S>, CliError> {
        let defaults = BundleConfig::<S>::default();
        Ok(BundleConfig {
            seed: self.seed(seed),
            samples: self.raw.samples.unwrap_or(defaults.samples),
            ray_samples: self.raw.ray_samples.unwrap_or(defaults.ray_samples),
            ray_length: self.raw.ray_length.unwrap_or(defaults.ray_length),
            epsilon: self.epsilon()?,
            max_horizon: self.max_horizon(),
        })
    }

    fn rule_set(&self, group: GroupSpec, literals: &[String]) -> Result<BTreeSet<GroupElement>, CliError> {
        literals.iter().map(|l| self.element(group, l)).collect()
    }

    fn stopping_rule(&self, group: GroupSpec, raw: &RawRule) -> Result<StoppingRule, CliError> {
        let invalid = |e: boundary_walk::TransformError| CliError::usage(format!("invalid rule: {e}"));
        match raw {
            RawRule::Constant { n } => StoppingRule::constant(*n).map_err(invalid),
            RawRule::FirstVisit { set } => StoppingRule::first_visit(self.rule_set(group, set)?).map_err(invalid),
            RawRule::FirstIncrement { set } => StoppingRule::first_increment(self.rule_set(group, set)?).map_err(invalid),
            RawRule::Sequential { rules } => {
                let parts = rules.iter().map(|r| self.stopping_rule(group, r)).collect::<Result<Vec<_>, _>>()?;
                StoppingRule::sequence(parts).map_err(invalid)
            }
            RawRule::AuxConvex { .. } | RawRule::BetaFlag { .. } => {
                Err(CliError::usage("extended-chain rules cannot be nested in a sequential rule"))
            }
        }
    }

    /// The configured rule as something that can be run.
    pub fn transform<S: Weight>(&self, mu: &FiniteMeasure<S>) -> Result<Box<dyn Transform<S>>, CliError> {
        let raw = self.raw.rule.as_ref().ok_or_else(|| CliError::usage("config needs a `rule`"))?;
        let invalid = |e: boundary_walk::TransformError| CliError::usage(format!("invalid rule: {e}"));
        match raw {
            RawRule::AuxConvex { points } => {
                let mut pts = Vec::with_capacity(points.len());
                for (n, a) in points {
                    let time: i64 = n.trim().parse().map_err(|_| self.literal_error(n, 1, format!("aux point `{n}` is not an integer")))?;
                    pts.push((time, self.weight::<S>(a)?));
                }
                Ok(Box::new(ExtendedSetup::convex(pts).map_err(invalid)?))
            }
            RawRule::BetaFlag { fraction, coupled } => {
                let group = mu.group();
                let mut table = BTreeMap::new();
                for (g, f) in fraction {
                    table.insert(self.element(group, g)?, self.weight::<S>(f)?);
                }
                let split = mu.split_by_fraction(&table).map_err(|e| CliError::usage(format!("invalid split: {e}")))?;
                Ok(Box::new(ExtendedSetup::beta_flag(&split, *coupled).map_err(invalid)?))
            }
            other => Ok(Box::new(self.stopping_rule(mu.group(), other)?)),
        }
    }

    /// Output directory: flag, then config, then `BOUNDARY_WALK_OUT`, then
    /// `./boundary-walk-out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.raw.output.clone())
            .or_else(|| std::env::var_os("BOUNDARY_WALK_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("boundary-walk-out"))
    }
}
