//! Model-based exploration and targeted test generation for simulated
//! GUI apps.
//!
//! The engine takes a declarative app description, explores it on a
//! deterministic runtime, and infers a labelled activity-transition model
//! whose states carry view statuses and the back stack. On top of the
//! model it generates short event sequences covering a user-given label
//! set, with a seeded random baseline for comparison.
//!
//! The pipeline, module by module:
//!
//! * [`app_spec`] parses and validates the app description and maps view
//!   types to their applicable events.
//! * [`back_stack`] implements back-stack evolution under the Standard,
//!   SingleTop and SingleTask launch modes.
//! * [`runtime`] executes the app deterministically: events in, effects,
//!   labels and stack changes out.
//! * [`model`] holds the inferred states and labelled transitions plus the
//!   similarity measure used for merging; exports DOT and JSON.
//! * [`builder`] is the exploration loop, along with the exhaustive
//!   brute-force oracle it is checked against.
//! * [`target`] turns a built model and a label target into validated
//!   event sequences.
//! * [`bench`] is the random baseline, the threshold sweep and the
//!   comparison harness.
//!
//! Data-parallel pieces (the oracle's frontier expansion, sweeps, seeded
//! baseline runs) use rayon via [`exec`] when the `parallel` feature is
//! enabled (the default) and fall back to sequential loops without it.
//! Results are identical either way.

pub mod app_spec;
pub mod back_stack;
pub mod bench;
pub mod builder;
pub mod exec;
pub mod model;
pub mod runtime;
pub mod target;

pub use app_spec::{
    events_for_view, parse_app_spec, validate, ActivityId, AppSpec, ConcreteEvent, EventKind,
    EventSequence, EventSource, Issue, LabelId, LaunchMode, Severity, SpecError, ViewId,
};
pub use back_stack::{ActivityInstanceRef, BackStack, StackError};
pub use bench::{
    compare, random_explore, st_sweep, ComparisonReport, CoverageReport, RandomConfig,
    RandomOutcome, SweepRow, DEFAULT_SEEDS,
};
pub use builder::{
    brute_force_model, build_model, check_isomorphic, BruteForceError, BuildConfig, BuildReport,
    ConfigError, EventOrder, BRUTE_FORCE_STATE_CAP,
};
pub use model::{
    state_similarity, stack_similarity, view_similarity, LatteModel, ModelError, ModelState,
    StateId, StateKind, Transition,
};
pub use runtime::{
    render_trace, replay, replay_to_state, FireResult, Observation, ObservedView, ReplayOutcome,
    RuntimeError, RuntimeState, Trace, TraceStep,
};
pub use target::{
    find_covering_sequence, generate, labelled_transitions, reach_summary, CoveredSequence,
    ReachSummary, SuiteEvent, Target, TargetError, TargetedSuite, DEFAULT_MAXTRY,
};
