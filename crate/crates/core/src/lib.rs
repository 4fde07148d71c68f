//! Recommendation engine with consequence-based explanations and a
//! within-subjects study harness for comparing explanation styles.
//!
//! The modules follow the flow of a study session: a [`catalog`] of items is
//! filtered and ranked against a [`preferences`] profile by the
//! [`recommender`], the [`consequence`] engine explains the top item, the
//! [`study`] module records the participant's ratings, and [`stats`] analyses
//! the collected sessions.

pub mod catalog;
pub mod consequence;
pub mod preferences;
pub mod recommender;
pub mod stats;
pub mod study;
