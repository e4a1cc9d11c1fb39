//! Random walks on finitely generated groups, Markov stopping times, and the
//! measures `μ_T` they induce.
//!
//! The crate works over any [`Weight`] scalar: exact rationals
//! ([`Rational`]) or `f64`/`f32`. Measures carry their mass honestly, so a
//! transform that does not stop every path reports the missing mass instead
//! of renormalizing. Harmonicity checks in [`verify`] test that `μ` and `μ_T`
//! have the same bounded harmonic functions.
//!
//! ```
//! use boundary_walk::{ExactMeasure, GroupSpec, StoppingRule, Rational, Weight};
//!
//! let z = GroupSpec::integers(1).unwrap();
//! let walk = ExactMeasure::uniform(z, &z.generators()).unwrap();
//! let rule = StoppingRule::constant(2).unwrap();
//! let result = boundary_walk::exact_transform(&walk, &rule, &Rational::default_epsilon(), 100).unwrap();
//! assert_eq!(result.measure, walk.power(2));
//! ```

pub mod extended;
pub mod group;
pub mod measure;
pub mod path;
pub mod rng;
pub mod scalar;
pub mod stopping;
pub mod verify;

pub use extended::{project_transform, AuxSpace, ExtendedRule, ExtendedSetup, IntervalPartition, ProjectionMode};
pub use group::{GroupElement, GroupError, GroupSpec, ParseElementError};
pub use measure::{FiniteMeasure, MeasureError, NeumannSeries, SplitPair};
pub use path::{sample_prefix, PathPrefix, PathStream, Sampler};
pub use rng::SeededStream;
pub use scalar::{ArithmeticMode, Rational, Weight};
pub use stopping::{
    exact_transform, iterate_stops, monte_carlo_transform, StoppingRule, Transform, TransformError, TransformResult,
    DEFAULT_MAX_HORIZON,
};
pub use verify::{CheckReport, CheckStatus, HarmonicFunction};

pub type ExactMeasure = FiniteMeasure<Rational>;
pub type FloatMeasure = FiniteMeasure<f64>;
pub type SingleMeasure = FiniteMeasure<f32>;
pub type ExactResult = TransformResult<Rational>;
pub type FloatResult = TransformResult<f64>;
pub type ExactSplit = SplitPair<Rational>;
pub type FloatSplit = SplitPair<f64>;
