//! Session store backed by a write-ahead JSON Lines log.
//!
//! Every accepted input is appended to the log before the in-memory session
//! changes, so replaying the file after a crash rebuilds the exact states the
//! clients last saw. Appends go through one writer lock; each session has its
//! own lock so conflicting inputs to one session are applied one at a time.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

use conseq_core::catalog::{DomainId, Item, UnknownDomain};
use conseq_core::consequence::ExplainConfig;
use conseq_core::stats::{run_analysis, AnalysisPlan, AnalysisReport, StatsError};
use conseq_core::study::{
    advance, assign_variant, filter_events, read_log, replay, variant_counts, EventRecord, LogError, Stage,
    StepInput, StudyContext, StudyError, StudySession,
};

/// Milliseconds since the Unix epoch, or any other monotone-enough source.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64))
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("no session `{0}`")]
    NotFound(String),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("missing or wrong admin token")]
    Unauthorized,
    #[error(transparent)]
    Analysis(#[from] StatsError),
    #[error("event log: {0}")]
    Log(#[from] LogError),
    #[error("event log i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<UnknownDomain> for ServiceError {
    fn from(e: UnknownDomain) -> Self {
        ServiceError::UnknownDomain(e.0)
    }
}

/// Participant-facing session state. The variant stays hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub domain: DomainId,
    pub stage: Stage,
    /// What the session accepts next.
    pub expected: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pending_importance: Vec<String>,
}

impl SessionView {
    fn of(s: &StudySession) -> Self {
        SessionView {
            session_id: s.session_id.clone(),
            domain: s.domain,
            stage: s.stage,
            expected: s.expected_input(),
            pending_importance: if s.stage == Stage::ExplanationRated { s.pending_importance() } else { Vec::new() },
        }
    }
}

/// What the participant sees at the current stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Presentation {
    /// Only the explanation text. No item field may appear here.
    Explanation { stage: Stage, text: String, importance_topics: Vec<String> },
    Content { stage: Stage, item: Item },
}

struct Writer {
    file: File,
    next_seq: u64,
    counts: [usize; 3],
}

pub struct StudyService {
    ctx: Arc<StudyContext>,
    explain: ExplainConfig,
    path: PathBuf,
    clock: Clock,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<StudySession>>>>,
    records: RwLock<Vec<EventRecord>>,
    writer: Mutex<Writer>,
}

impl StudyService {
    /// Opens or creates the log at `path` and rebuilds all sessions from it.
    /// A torn final line left by a crash mid-write is dropped.
    pub fn open(path: impl AsRef<Path>, ctx: StudyContext, explain: ExplainConfig) -> Result<Self, ServiceError> {
        let path = path.as_ref().to_path_buf();
        let (records, file) = load(&path)?;
        let states = replay(&records, &ctx)?;
        let counts = variant_counts(states.values());
        let next_seq = records.last().map_or(0, |r| r.seq + 1);
        tracing::info!(path = %path.display(), events = records.len(), sessions = states.len(), "event log loaded");
        Ok(StudyService {
            ctx: Arc::new(ctx),
            explain,
            path,
            clock: system_clock(),
            sessions: RwLock::new(states.into_iter().map(|(id, s)| (id, Arc::new(Mutex::new(s)))).collect()),
            records: RwLock::new(records),
            writer: Mutex::new(Writer { file, next_seq, counts }),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn context(&self) -> &StudyContext {
        &self.ctx
    }

    pub fn log_path(&self) -> &Path {
        &self.path
    }

    /// Per-variant session counts, in the fixed variant order.
    pub async fn variant_counts(&self) -> [usize; 3] {
        self.writer.lock().await.counts
    }

    pub async fn create_session(&self, domain: &str) -> Result<SessionView, ServiceError> {
        let domain: DomainId = domain.parse()?;
        let mut w = self.writer.lock().await;
        let variant = assign_variant(&w.counts);
        let id = {
            let sessions = self.sessions.read().expect("session index lock");
            let mut n = sessions.len() + 1;
            while sessions.contains_key(&session_id(n)) {
                n += 1;
            }
            session_id(n)
        };
        let at = (self.clock)();
        let session = StudySession::new(id.clone(), domain, variant, self.explain.clone(), at);
        let record = EventRecord::created(w.next_seq, &session, at);
        self.write(&mut w, record)?;
        w.counts[variant_index(session.variant)] += 1;
        let view = SessionView::of(&session);
        self.sessions.write().expect("session index lock").insert(id.clone(), Arc::new(Mutex::new(session)));
        tracing::info!(session_id = %id, %domain, "session created");
        Ok(view)
    }

    /// Applies one input. A content rating also finishes the session.
    pub async fn submit_step(&self, id: &str, input: StepInput) -> Result<SessionView, ServiceError> {
        let handle = self.handle(id)?;
        let mut s = handle.lock().await;
        self.apply(&mut s, input).await?;
        if s.stage == Stage::ContentRated {
            self.apply(&mut s, StepInput::Finish).await?;
        }
        Ok(SessionView::of(&s))
    }

    /// The view for the current stage. Reaching a stage that has something to
    /// show records the show transition first; asking again is a no-op.
    pub async fn presentation(&self, id: &str) -> Result<Presentation, ServiceError> {
        let handle = self.handle(id)?;
        let mut s = handle.lock().await;
        match s.stage {
            Stage::PreferencesDone => self.apply(&mut s, StepInput::ShowExplanation).await?,
            Stage::ImportanceRated => self.apply(&mut s, StepInput::ShowContent).await?,
            _ => {}
        }
        match s.stage {
            Stage::ExplanationShown | Stage::ExplanationRated => {
                let explanation = s.explanation.as_ref().expect("explanation exists once shown");
                Ok(Presentation::Explanation {
                    stage: s.stage,
                    text: explanation.text.clone(),
                    importance_topics: explanation.topics(),
                })
            }
            Stage::ContentShown | Stage::ContentRated | Stage::Complete => {
                let item = s.item(&self.ctx).expect("recommended item is in the catalog").clone();
                Ok(Presentation::Content { stage: s.stage, item })
            }
            stage => Err(StudyError::OutOfOrder {
                stage,
                expected: s.expected_input(),
                got: "presentation".into(),
            }
            .into()),
        }
    }

    /// A copy of one session's full state.
    pub async fn session(&self, id: &str) -> Result<StudySession, ServiceError> {
        Ok(self.handle(id)?.lock().await.clone())
    }

    /// Copies of all sessions, keyed by id.
    pub async fn sessions(&self) -> BTreeMap<String, StudySession> {
        let handles: Vec<(String, Arc<Mutex<StudySession>>)> =
            self.sessions.read().expect("session index lock").iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut out = BTreeMap::new();
        for (id, h) in handles {
            out.insert(id, h.lock().await.clone());
        }
        out
    }

    /// Logged events matching the filters, in sequence order.
    pub fn export_events(&self, domain: Option<DomainId>, session_id: Option<&str>) -> Vec<EventRecord> {
        let records = self.records.read().expect("record index lock");
        filter_events(&records, domain, session_id).into_iter().cloned().collect()
    }

    /// Same as [`Self::export_events`] as JSON Lines text.
    pub fn export_jsonl(&self, domain: Option<DomainId>, session_id: Option<&str>) -> String {
        self.export_events(domain, session_id).iter().map(|r| r.to_line() + "\n").collect()
    }

    pub async fn analysis(&self, plan: &AnalysisPlan) -> Result<AnalysisReport, ServiceError> {
        let sessions: Vec<StudySession> = self.sessions().await.into_values().collect();
        Ok(run_analysis(&sessions, plan)?)
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<StudySession>>, ServiceError> {
        self.sessions
            .read()
            .expect("session index lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// Advances a locked session, logging the input before the state changes.
    async fn apply(&self, session: &mut StudySession, input: StepInput) -> Result<(), ServiceError> {
        // never let a clock step backwards reorder a session's instants
        let last = session.entered_at.values().copied().max().unwrap_or(0);
        let at = (self.clock)().max(last);
        let next = advance(session, &input, at, &self.ctx)?;
        let mut w = self.writer.lock().await;
        let record = EventRecord::step(w.next_seq, &next, input, at);
        self.write(&mut w, record)?;
        drop(w);
        *session = next;
        Ok(())
    }

    fn write(&self, w: &mut Writer, record: EventRecord) -> Result<(), ServiceError> {
        let line = record.to_line() + "\n";
        w.file.write_all(line.as_bytes())?;
        w.file.flush()?;
        w.next_seq += 1;
        self.records.write().expect("record index lock").push(record);
        Ok(())
    }
}

fn session_id(n: usize) -> String {
    format!("s{n:05}")
}

fn variant_index(v: conseq_core::consequence::ExplanationVariant) -> usize {
    conseq_core::consequence::ExplanationVariant::ALL.iter().position(|x| *x == v).expect("known variant")
}

fn load(path: &Path) -> Result<(Vec<EventRecord>, File), ServiceError> {
    let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    let mut records = read_log(text[..complete].as_bytes())?;
    let tail = &text[complete..];
    if !tail.trim().is_empty() {
        match serde_json::from_str::<EventRecord>(tail) {
            Ok(record) => {
                records.push(record);
                file.write_all(b"\n")?;
            }
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "dropping torn final log line");
                file.set_len(complete as u64)?;
            }
        }
    }
    Ok((records, file))
}
