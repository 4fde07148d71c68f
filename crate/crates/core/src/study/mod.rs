//! The within-subjects study protocol: session state machine, event log and
//! explanation-aim metrics.

pub mod log;
pub mod metrics;
pub mod session;

pub use log::{filter_events, read_log, replay, write_log, EventPayload, EventRecord, LogError};
pub use metrics::{
    aggregate, assign_variant, classify_effect, effectiveness, efficiency, group_value, is_group_key, variant_counts,
    AimMetrics, Effect, GroupRow, MissingEvent, Outcome, DEFAULT_EFFECT_TOLERANCE,
};
pub use session::{
    advance, check_invariants, near_misses, RatingEvent, RatingInput, RatingKind, Stage, StepInput, StudyContext, StudyError,
    StudySession,
};
