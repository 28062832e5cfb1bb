//! Command diagrams for robot tasks: a textual language, its validator, a
//! compiler to a flat event/state net, a deterministic tick simulator and a
//! late-bound template generator.
//!
//! ```
//! use gsrapid::{compile, dsl, simulate, Catalog, SensorScript, SimConfig};
//!
//! let src = r#"
//!     diagram D {
//!         starter s -> w;
//!         wait w: 3;
//!     }"#;
//! let diagram = dsl::parse(src, "d.gsr").unwrap();
//! let net = compile(&diagram, Catalog::builtin()).unwrap();
//! let script = SensorScript { ticks: 10, channels: Default::default() };
//! let trace = simulate(&net, &script, &SimConfig::default()).unwrap();
//! assert_eq!(trace.records.last().unwrap().tick, 3);
//! ```
//!
//! The simulator is generic over its scalar type; [`Engine`] uses `f64` and
//! [`ExactEngine`] uses 64-bit rationals.

pub mod catalog;
pub mod codegen;
pub mod compile;
pub mod dsl;
pub mod model;
pub mod sim;
pub mod validate;

pub use catalog::{load_catalog, suggest, Catalog, CatalogError, Suggestion, ValueKind};
pub use codegen::{generate, instantiate, BindingSet, CommandTemplate, InstantiateError};
pub use compile::{compile, evaluation_order, CompileError, Net};
pub use dsl::{parse, print, Diagnostic, Severity, SourceSpan};
pub use model::{provided_states, Diagram};
pub use sim::{LifecycleStatus, SensorScript, SimConfig, SimError, TickRecord, Trace};
pub use validate::{validate, ValidationReport};

/// Exact rational scalar.
pub type Rational = num_rational::Rational64;

pub type Engine<'a> = sim::Engine<'a, f64>;
pub type ExactEngine<'a> = sim::Engine<'a, Rational>;

/// Runs a net to completion with `f64` arithmetic.
pub fn simulate(net: &Net, script: &SensorScript, config: &SimConfig) -> Result<Trace, SimError> {
    sim::run::<f64>(net, script, config)
}

/// Runs a net to completion with exact rational arithmetic.
pub fn simulate_exact(net: &Net, script: &SensorScript, config: &SimConfig) -> Result<Trace, SimError> {
    sim::run::<Rational>(net, script, config)
}
