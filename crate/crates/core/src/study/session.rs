//! The per-participant protocol as a pure state machine.
//!
//! A session walks through demographics, preferences, the explanation-only
//! presentation with its ratings, the importance ratings of the shown
//! consequences, and finally the full-content presentation of the same item.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{builtin_catalog, Catalog, DomainId, Item};
use crate::consequence::{builtin_rules, explain, ExplainConfig, ExplainError, Explanation, ExplanationVariant, RuleSet};
use crate::preferences::{validate_profile, Demographics, PreferenceProfile};
use crate::recommender::{recommend, NearMiss, RecommendError, ScoredItem, ScoringConfig, WeightVector};

/// Client and server clocks may disagree by this much before a warning is logged.
pub const CLOCK_SKEW_WARN_MS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Created,
    DemographicsDone,
    PreferencesDone,
    ExplanationShown,
    ExplanationRated,
    ImportanceRated,
    ContentShown,
    ContentRated,
    Complete,
}

impl Stage {
    pub const ORDER: [Stage; 9] = [
        Stage::Created,
        Stage::DemographicsDone,
        Stage::PreferencesDone,
        Stage::ExplanationShown,
        Stage::ExplanationRated,
        Stage::ImportanceRated,
        Stage::ContentShown,
        Stage::ContentRated,
        Stage::Complete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Created => "created",
            Stage::DemographicsDone => "demographics_done",
            Stage::PreferencesDone => "preferences_done",
            Stage::ExplanationShown => "explanation_shown",
            Stage::ExplanationRated => "explanation_rated",
            Stage::ImportanceRated => "importance_rated",
            Stage::ContentShown => "content_shown",
            Stage::ContentRated => "content_rated",
            Stage::Complete => "complete",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<Stage> {
        Self::ORDER.get(self.index() + 1).copied()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatingKind {
    LikelihoodFromExplanation,
    Satisfaction,
    Understandability,
    FeatureImportance { feature: String },
    LikelihoodFromContent,
}

impl RatingKind {
    /// The three ratings collected while the explanation is shown.
    pub const EXPLANATION_RATINGS: [RatingKind; 3] =
        [RatingKind::LikelihoodFromExplanation, RatingKind::Satisfaction, RatingKind::Understandability];

    pub fn name(&self) -> &'static str {
        match self {
            RatingKind::LikelihoodFromExplanation => "likelihood_from_explanation",
            RatingKind::Satisfaction => "satisfaction",
            RatingKind::Understandability => "understandability",
            RatingKind::FeatureImportance { .. } => "feature_importance",
            RatingKind::LikelihoodFromContent => "likelihood_from_content",
        }
    }

    /// Stage during which the rating is accepted.
    pub fn stage(&self) -> Stage {
        match self {
            RatingKind::LikelihoodFromExplanation | RatingKind::Satisfaction | RatingKind::Understandability => {
                Stage::ExplanationShown
            }
            RatingKind::FeatureImportance { .. } => Stage::ExplanationRated,
            RatingKind::LikelihoodFromContent => Stage::ContentShown,
        }
    }
}

impl fmt::Display for RatingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatingKind::FeatureImportance { feature } => write!(f, "feature_importance({feature})"),
            other => f.write_str(other.name()),
        }
    }
}

/// A rating as submitted. Instants are optional client-side readings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingInput {
    #[serde(flatten)]
    pub kind: RatingKind,
    pub value: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shown_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<u64>,
}

impl RatingInput {
    pub fn new(kind: RatingKind, value: i64) -> Self {
        RatingInput { kind, value, shown_at: None, submitted_at: None }
    }

    pub fn timed(mut self, shown_at: u64, submitted_at: u64) -> Self {
        self.shown_at = Some(shown_at);
        self.submitted_at = Some(submitted_at);
        self
    }
}

/// A recorded Likert rating with resolved instants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingEvent {
    #[serde(flatten)]
    pub kind: RatingKind,
    pub value: u8,
    pub shown_at: u64,
    pub submitted_at: u64,
}

/// Input that moves a session forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum StepInput {
    Demographics(Demographics),
    Preferences(PreferenceProfile),
    ShowExplanation,
    Rating(RatingInput),
    ShowContent,
    Finish,
}

impl StepInput {
    pub fn name(&self) -> String {
        match self {
            StepInput::Demographics(_) => "demographics".into(),
            StepInput::Preferences(_) => "preferences".into(),
            StepInput::ShowExplanation => "show_explanation".into(),
            StepInput::Rating(r) => format!("rating {}", r.kind),
            StepInput::ShowContent => "show_content".into(),
            StepInput::Finish => "finish".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error("out of order: session is at `{stage}` and expects {expected}, got {got}")]
    OutOfOrder { stage: Stage, expected: String, got: String },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("no candidate for this profile: {0}")]
    NoCandidate(RecommendError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
}

/// Everything a session needs besides its own state.
#[derive(Debug, Clone)]
pub struct StudyContext {
    pub catalogs: BTreeMap<DomainId, Catalog>,
    pub rules: BTreeMap<DomainId, RuleSet>,
    pub weights: WeightVector,
    pub scoring: ScoringConfig,
}

impl StudyContext {
    /// The shipped catalogs and rule sets with default scoring.
    pub fn builtin() -> Self {
        StudyContext {
            catalogs: DomainId::ALL.into_iter().map(|d| (d, builtin_catalog(d))).collect(),
            rules: DomainId::ALL.into_iter().map(|d| (d, builtin_rules(d))).collect(),
            weights: WeightVector::uniform(),
            scoring: ScoringConfig::default(),
        }
    }

    pub fn catalog(&self, domain: DomainId) -> &Catalog {
        &self.catalogs[&domain]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySession {
    pub session_id: String,
    pub domain: DomainId,
    pub variant: ExplanationVariant,
    pub explain: ExplainConfig,
    pub stage: Stage,
    pub demographics: Option<Demographics>,
    pub profile: Option<PreferenceProfile>,
    pub recommendation: Option<ScoredItem>,
    pub explanation: Option<Explanation>,
    /// Item behind the explanation-only presentation.
    pub explained_item: Option<String>,
    /// Item shown with its full description.
    pub content_item: Option<String>,
    pub ratings: Vec<RatingEvent>,
    /// Instant at which each reached stage was entered.
    pub entered_at: BTreeMap<Stage, u64>,
}

impl StudySession {
    pub fn new(
        session_id: impl Into<String>,
        domain: DomainId,
        variant: ExplanationVariant,
        explain: ExplainConfig,
        at_ms: u64,
    ) -> Self {
        StudySession {
            session_id: session_id.into(),
            domain,
            variant,
            explain,
            stage: Stage::Created,
            demographics: None,
            profile: None,
            recommendation: None,
            explanation: None,
            explained_item: None,
            content_item: None,
            ratings: Vec::new(),
            entered_at: BTreeMap::from([(Stage::Created, at_ms)]),
        }
    }

    pub fn rating(&self, kind: &RatingKind) -> Option<&RatingEvent> {
        self.ratings.iter().find(|r| &r.kind == kind)
    }

    pub fn is_complete(&self) -> bool {
        self.stage == Stage::Complete
    }

    /// Importance topics that still need a rating.
    pub fn pending_importance(&self) -> Vec<String> {
        let Some(explanation) = &self.explanation else { return Vec::new() };
        explanation
            .topics()
            .into_iter()
            .filter(|t| self.rating(&RatingKind::FeatureImportance { feature: t.clone() }).is_none())
            .collect()
    }

    /// Human-readable description of the inputs accepted next.
    pub fn expected_input(&self) -> String {
        match self.stage {
            Stage::Created => "demographics".into(),
            Stage::DemographicsDone => "preferences".into(),
            Stage::PreferencesDone => "show_explanation".into(),
            Stage::ExplanationShown => {
                let missing: Vec<&str> = RatingKind::EXPLANATION_RATINGS
                    .iter()
                    .filter(|k| self.rating(k).is_none())
                    .map(|k| k.name())
                    .collect();
                format!("rating {}", missing.join(" | "))
            }
            Stage::ExplanationRated => format!("rating feature_importance({})", self.pending_importance().join(" | ")),
            Stage::ImportanceRated => "show_content".into(),
            Stage::ContentShown => "rating likelihood_from_content".into(),
            Stage::ContentRated => "finish".into(),
            Stage::Complete => "nothing".into(),
        }
    }

    /// The recommended item, once preferences are in.
    pub fn item<'a>(&self, ctx: &'a StudyContext) -> Option<&'a Item> {
        let id = &self.recommendation.as_ref()?.item_id;
        ctx.catalog(self.domain).item(id)
    }

    fn out_of_order(&self, input: &StepInput) -> StudyError {
        StudyError::OutOfOrder { stage: self.stage, expected: self.expected_input(), got: input.name() }
    }

    fn enter(&mut self, stage: Stage, at_ms: u64) {
        self.stage = stage;
        self.entered_at.insert(stage, at_ms);
    }
}

/// Applies one input. The input session is left untouched; on success the
/// advanced copy is returned.
pub fn advance(
    session: &StudySession,
    input: &StepInput,
    at_ms: u64,
    ctx: &StudyContext,
) -> Result<StudySession, StudyError> {
    let mut next = session.clone();
    match (session.stage, input) {
        (Stage::Created, StepInput::Demographics(d)) => {
            if !d.is_complete() {
                return Err(StudyError::InvalidPayload("demographics must give age, gender and education".into()));
            }
            if !d.age_in_range() {
                return Err(StudyError::InvalidPayload(format!(
                    "age must be between {} and {}",
                    Demographics::MIN_AGE,
                    Demographics::MAX_AGE
                )));
            }
            next.demographics = Some(d.clone());
            next.enter(Stage::DemographicsDone, at_ms);
        }
        (Stage::DemographicsDone, StepInput::Preferences(profile)) => {
            if profile.domain != session.domain {
                return Err(StudyError::InvalidPayload(format!(
                    "profile is for `{}` but the session is in `{}`",
                    profile.domain, session.domain
                )));
            }
            let catalog = ctx.catalog(session.domain);
            if let Err(violations) = validate_profile(profile, &catalog.spec) {
                let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
                return Err(StudyError::InvalidPayload(text.join("; ")));
            }
            let mut profile = profile.clone();
            profile.demographics = session.demographics.clone().unwrap_or_default();
            let ranked = recommend(catalog, &profile, &ctx.weights, &ctx.scoring).map_err(|e| match e {
                e @ RecommendError::NoCandidate(_) => StudyError::NoCandidate(e),
                other => StudyError::InvalidPayload(other.to_string()),
            })?;
            next.recommendation = ranked.into_iter().next();
            next.profile = Some(profile);
            next.enter(Stage::PreferencesDone, at_ms);
        }
        (Stage::PreferencesDone, StepInput::ShowExplanation) => {
            let scored = session.recommendation.as_ref().expect("recommendation exists after preferences");
            let profile = session.profile.as_ref().expect("profile exists after preferences");
            let item = session.item(ctx).ok_or_else(|| {
                StudyError::InvalidPayload(format!("recommended item `{}` is not in the catalog", scored.item_id))
            })?;
            let explanation = explain(
                scored,
                item,
                profile,
                &ctx.rules[&session.domain],
                &ctx.catalog(session.domain).spec,
                session.variant,
                &session.explain,
            )?;
            next.explanation = Some(explanation);
            next.explained_item = Some(scored.item_id.clone());
            next.enter(Stage::ExplanationShown, at_ms);
        }
        (stage, StepInput::Rating(rating)) if rating.kind.stage() == stage => {
            if session.rating(&rating.kind).is_some() {
                return Err(session.out_of_order(input));
            }
            if let RatingKind::FeatureImportance { feature } = &rating.kind {
                let topics = session.explanation.as_ref().map(Explanation::topics).unwrap_or_default();
                if !topics.contains(feature) {
                    return Err(StudyError::InvalidPayload(format!(
                        "`{feature}` is not a topic of the shown explanation (expected one of {})",
                        topics.join(", ")
                    )));
                }
            }
            let event = resolve_rating(session, rating, at_ms)?;
            next.ratings.push(event);
            match stage {
                Stage::ExplanationShown => {
                    if RatingKind::EXPLANATION_RATINGS.iter().all(|k| next.rating(k).is_some()) {
                        next.enter(Stage::ExplanationRated, at_ms);
                    }
                }
                Stage::ExplanationRated => {
                    if next.pending_importance().is_empty() {
                        next.enter(Stage::ImportanceRated, at_ms);
                    }
                }
                _ => next.enter(Stage::ContentRated, at_ms),
            }
        }
        (Stage::ImportanceRated, StepInput::ShowContent) => {
            // Same item twice: the content view shows what the explanation described.
            next.content_item = session.explained_item.clone();
            next.enter(Stage::ContentShown, at_ms);
        }
        (Stage::ContentRated, StepInput::Finish) => next.enter(Stage::Complete, at_ms),
        _ => return Err(session.out_of_order(input)),
    }
    Ok(next)
}

fn resolve_rating(session: &StudySession, rating: &RatingInput, at_ms: u64) -> Result<RatingEvent, StudyError> {
    let value = u8::try_from(rating.value)
        .ok()
        .filter(|v| (1..=5).contains(v))
        .ok_or_else(|| StudyError::InvalidPayload(format!("rating value {} is outside 1..=5", rating.value)))?;
    // The server-side shown instant is when the rated view appeared.
    let server_shown = session.entered_at.get(&session.stage).copied().unwrap_or(at_ms);
    let shown_at = prefer_client(rating.shown_at, server_shown, "shown_at", &session.session_id);
    let submitted_at = prefer_client(rating.submitted_at, at_ms, "submitted_at", &session.session_id);
    if submitted_at < shown_at {
        return Err(StudyError::InvalidPayload(format!(
            "submitted_at {submitted_at} precedes shown_at {shown_at}"
        )));
    }
    Ok(RatingEvent { kind: rating.kind.clone(), value, shown_at, submitted_at })
}

fn prefer_client(client: Option<u64>, server: u64, which: &str, session_id: &str) -> u64 {
    match client {
        Some(c) => {
            if c.abs_diff(server) > CLOCK_SKEW_WARN_MS {
                tracing::warn!(session_id, which, client = c, server, "client and server instants disagree");
            }
            c
        }
        None => server,
    }
}

/// Checks the structural invariants every reachable session satisfies.
pub fn check_invariants(session: &StudySession) -> Result<(), String> {
    let reached: BTreeSet<Stage> = session.entered_at.keys().copied().collect();
    let expected: BTreeSet<Stage> = Stage::ORDER[..=session.stage.index()].iter().copied().collect();
    if reached != expected {
        return Err(format!("stages entered {reached:?} do not match stage `{}`", session.stage));
    }
    let times: Vec<u64> = Stage::ORDER[..=session.stage.index()].iter().map(|s| session.entered_at[s]).collect();
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err("stage instants go backwards".into());
    }
    if session.stage >= Stage::ContentShown && session.content_item != session.explained_item {
        return Err("content item differs from the explained item".into());
    }
    if session.stage >= Stage::ExplanationShown
        && session.explained_item.as_deref() != session.recommendation.as_ref().map(|r| r.item_id.as_str())
    {
        return Err("explained item differs from the recommendation".into());
    }
    for r in &session.ratings {
        if !(1..=5).contains(&r.value) || r.submitted_at < r.shown_at {
            return Err(format!("bad rating {r:?}"));
        }
        if r.kind.stage() > session.stage {
            return Err(format!("rating {} recorded before its stage", r.kind));
        }
    }
    let kinds: BTreeSet<&RatingKind> = session.ratings.iter().map(|r| &r.kind).collect();
    if kinds.len() != session.ratings.len() {
        return Err("duplicate rating".into());
    }
    Ok(())
}

/// The near misses carried by a no-candidate error, if any.
pub fn near_misses(err: &StudyError) -> Option<&[NearMiss]> {
    match err {
        StudyError::NoCandidate(RecommendError::NoCandidate(m)) => Some(m),
        _ => None,
    }
}
