//! Append-only event log in JSON Lines form and replay into sessions.
//!
//! Each line is one [`EventRecord`]. The log is both the storage format of the
//! service and the input of offline analysis.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::session::{advance, Stage, StepInput, StudyContext, StudyError, StudySession};
use crate::catalog::DomainId;
use crate::consequence::{ExplainConfig, ExplanationVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    Created { domain: DomainId, variant: ExplanationVariant, top_k: usize, satisfaction_threshold: f64 },
    Step { input: StepInput },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub session_id: String,
    /// Stage reached by applying this event.
    pub stage: Stage,
    pub recorded_at: u64,
    pub payload: EventPayload,
}

impl EventRecord {
    pub fn created(seq: u64, session: &StudySession, recorded_at: u64) -> Self {
        EventRecord {
            seq,
            session_id: session.session_id.clone(),
            stage: session.stage,
            recorded_at,
            payload: EventPayload::Created {
                domain: session.domain,
                variant: session.variant,
                top_k: session.explain.top_k,
                satisfaction_threshold: session.explain.satisfaction_threshold,
            },
        }
    }

    pub fn step(seq: u64, session: &StudySession, input: StepInput, recorded_at: u64) -> Self {
        EventRecord {
            seq,
            session_id: session.session_id.clone(),
            stage: session.stage,
            recorded_at,
            payload: EventPayload::Step { input },
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records serialize")
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("event {seq}: sequence numbers must strictly increase")]
    Sequence { seq: u64 },
    #[error("event {seq}: session `{session_id}` {reason}")]
    Session { seq: u64, session_id: String, reason: String },
    #[error("event {seq}: replay failed: {source}")]
    Replay { seq: u64, source: StudyError },
    #[error("event {seq}: replay reached `{got}` but the log recorded `{recorded}`")]
    StageMismatch { seq: u64, recorded: Stage, got: Stage },
}

/// Reads a JSON Lines log. Blank lines are skipped.
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<EventRecord>, LogError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_log<W: Write>(mut writer: W, records: &[EventRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(writer, "{}", r.to_line())?;
    }
    writer.flush()
}

/// Rebuilds every session from its events. Sessions come back keyed by id.
pub fn replay(records: &[EventRecord], ctx: &StudyContext) -> Result<BTreeMap<String, StudySession>, LogError> {
    let mut sessions: BTreeMap<String, StudySession> = BTreeMap::new();
    let mut last_seq: Option<u64> = None;
    for r in records {
        if last_seq.is_some_and(|s| r.seq <= s) {
            return Err(LogError::Sequence { seq: r.seq });
        }
        last_seq = Some(r.seq);
        let session_err = |reason: &str| LogError::Session {
            seq: r.seq,
            session_id: r.session_id.clone(),
            reason: reason.to_string(),
        };
        let next = match &r.payload {
            EventPayload::Created { domain, variant, top_k, satisfaction_threshold } => {
                if sessions.contains_key(&r.session_id) {
                    return Err(session_err("is created twice"));
                }
                let cfg = ExplainConfig { satisfaction_threshold: *satisfaction_threshold, top_k: *top_k };
                StudySession::new(r.session_id.clone(), *domain, *variant, cfg, r.recorded_at)
            }
            EventPayload::Step { input } => {
                let current = sessions.get(&r.session_id).ok_or_else(|| session_err("has no creation event"))?;
                advance(current, input, r.recorded_at, ctx).map_err(|source| LogError::Replay { seq: r.seq, source })?
            }
        };
        if next.stage != r.stage {
            return Err(LogError::StageMismatch { seq: r.seq, recorded: r.stage, got: next.stage });
        }
        sessions.insert(r.session_id.clone(), next);
    }
    Ok(sessions)
}

/// Records matching an optional domain and session filter, in log order.
pub fn filter_events<'a>(
    records: &'a [EventRecord],
    domain: Option<DomainId>,
    session_id: Option<&str>,
) -> Vec<&'a EventRecord> {
    let mut domains: BTreeMap<&str, DomainId> = BTreeMap::new();
    for r in records {
        if let EventPayload::Created { domain, .. } = &r.payload {
            domains.insert(&r.session_id, *domain);
        }
    }
    records
        .iter()
        .filter(|r| session_id.is_none_or(|s| r.session_id == s))
        .filter(|r| domain.is_none_or(|d| domains.get(r.session_id.as_str()) == Some(&d)))
        .collect()
}
