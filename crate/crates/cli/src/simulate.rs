//! Seeded study simulation producing a protocol-valid event log.
//!
//! Responders are deliberately simple: every Likert answer is a normal draw
//! rounded and clipped to 1..=5, and reading time is a clipped normal in
//! seconds. A shift moves the mean of one outcome for one variant.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use conseq_core::catalog::{DomainId, FeatureKind};
use conseq_core::consequence::{ExplainConfig, ExplanationVariant};
use conseq_core::preferences::{
    fixture_profile, Demographics, Education, Gender, PreferenceProfile, SoftPreference, ACTIVITY_LEVELS,
    FIXTURE_PROFILES, LEISURE_ACTIVITIES, WEIGHT_AIMS,
};
use conseq_core::study::{
    advance, assign_variant, EventRecord, Outcome, RatingInput, RatingKind, Stage, StepInput, StudyContext,
    StudyError, StudySession,
};

/// First simulated session starts here (2024-01-01T00:00:00Z, in ms).
const EPOCH_MS: u64 = 1_704_067_200_000;
const SESSION_SPACING_MS: u64 = 3_600_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid shift `{0}`: expected variant:outcome:delta")]
    BadShift(String),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("simulated session `{session_id}` was rejected: {source}")]
    Protocol { session_id: String, source: StudyError },
}

/// Moves the mean of one outcome for one variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shift {
    pub variant: ExplanationVariant,
    pub outcome: Outcome,
    /// Likert points, or seconds for efficiency.
    pub delta: f64,
}

impl FromStr for Shift {
    type Err = SimulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SimulationError::BadShift(s.to_string());
        let [variant, outcome, delta] = s.split(':').collect::<Vec<_>>()[..] else { return Err(bad()) };
        let delta: f64 = delta.parse().map_err(|_| bad())?;
        if !delta.is_finite() {
            return Err(bad());
        }
        Ok(Shift { variant: variant.parse().map_err(|_| bad())?, outcome: outcome.parse().map_err(|_| bad())?, delta })
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.variant.short_name(), self.outcome.as_str(), self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Responder {
    /// Same answer distribution for every variant.
    #[default]
    Uniform,
    Shifted(Vec<Shift>),
}

impl Responder {
    fn delta(&self, variant: ExplanationVariant, outcome: Outcome) -> f64 {
        match self {
            Responder::Uniform => 0.0,
            Responder::Shifted(shifts) => {
                shifts.iter().filter(|s| s.variant == variant && s.outcome == outcome).map(|s| s.delta).sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub sessions: usize,
    pub seed: u64,
    pub responder: Responder,
    /// Probability that a session is in the recipe domain.
    pub recipe_share: f64,
    pub explain: ExplainConfig,
}

impl SimulationConfig {
    pub fn new(sessions: usize, seed: u64) -> Self {
        SimulationConfig {
            sessions,
            seed,
            responder: Responder::Uniform,
            recipe_share: 0.5,
            explain: ExplainConfig::default(),
        }
    }

    pub fn with_shift(mut self, shift: Shift) -> Self {
        match &mut self.responder {
            Responder::Uniform => self.responder = Responder::Shifted(vec![shift]),
            Responder::Shifted(list) => list.push(shift),
        }
        self
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.sessions == 0 {
            return Err(SimulationError::Config("sessions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.recipe_share) {
            return Err(SimulationError::Config(format!("recipe share {} is not in [0, 1]", self.recipe_share)));
        }
        Ok(())
    }
}

/// Answer distributions shared by all simulated participants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseModel {
    pub likert_mean: f64,
    pub likert_sd: f64,
    pub reading_mean_s: f64,
    pub reading_sd_s: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        ResponseModel { likert_mean: 3.5, likert_sd: 1.0, reading_mean_s: 90.0, reading_sd_s: 30.0 }
    }
}

struct Participant<'a> {
    rng: ChaCha8Rng,
    model: ResponseModel,
    responder: &'a Responder,
    variant: ExplanationVariant,
}

impl Participant<'_> {
    fn likert(&mut self, outcome: Option<Outcome>) -> i64 {
        let shift = outcome.map_or(0.0, |o| self.responder.delta(self.variant, o));
        let dist = Normal::new(self.model.likert_mean + shift, self.model.likert_sd).expect("finite sd");
        dist.sample(&mut self.rng).round().clamp(1.0, 5.0) as i64
    }

    fn reading_ms(&mut self) -> u64 {
        let shift = self.responder.delta(self.variant, Outcome::Efficiency);
        let dist = Normal::new(self.model.reading_mean_s + shift, self.model.reading_sd_s).expect("finite sd");
        (dist.sample(&mut self.rng).max(1.0) * 1000.0).round() as u64
    }

    fn pause_ms(&mut self) -> u64 {
        self.rng.random_range(2_000..30_000)
    }
}

fn random_demographics(rng: &mut ChaCha8Rng) -> Demographics {
    Demographics {
        age: Some(rng.random_range(18..=70)),
        gender: [Gender::Female, Gender::Male, Gender::Other, Gender::Undisclosed].choose(rng).copied(),
        education: [Education::HighSchool, Education::University, Education::Other].choose(rng).copied(),
    }
}

/// A fixture profile of the domain with its soft targets redrawn. Hard
/// constraints stay as in the fixture, so a candidate always exists.
fn random_profile(rng: &mut ChaCha8Rng, domain: DomainId, ctx: &StudyContext) -> PreferenceProfile {
    let names: Vec<&str> = FIXTURE_PROFILES
        .iter()
        .map(|(n, _)| *n)
        .filter(|n| fixture_profile(n).is_some_and(|p| p.domain == domain))
        .collect();
    let mut profile = fixture_profile(names.choose(rng).expect("fixtures for every domain")).expect("fixture exists");
    let spec = &ctx.catalog(domain).spec;
    for pref in SoftPreference::for_domain(domain) {
        let Some(value) = profile.soft.get_mut(pref.id()) else { continue };
        let text = |rng: &mut ChaCha8Rng, options: &[&str]| {
            conseq_core::catalog::Value::Text(options.choose(rng).expect("options").to_string())
        };
        *value = match pref {
            SoftPreference::ActivityLevel => text(rng, &ACTIVITY_LEVELS),
            SoftPreference::WeightAim => text(rng, &WEIGHT_AIMS),
            SoftPreference::FavoriteCuisine => match &spec.feature("cuisine").expect("cuisine feature").kind {
                FeatureKind::Categorical { values, .. } => {
                    conseq_core::catalog::Value::Text(values.choose(rng).expect("cuisines").clone())
                }
                _ => unreachable!("cuisine is categorical"),
            },
            SoftPreference::ChildrenCount => conseq_core::catalog::Value::Number(f64::from(rng.random_range(0..=3u8))),
            SoftPreference::CarAvailable => conseq_core::catalog::Value::Bool(rng.random()),
            SoftPreference::LeisureActivities => {
                let mut all: Vec<String> = LEISURE_ACTIVITIES.iter().map(|s| s.to_string()).collect();
                all.shuffle(rng);
                all.truncate(rng.random_range(1..=2));
                all.sort();
                conseq_core::catalog::Value::Set(all)
            }
        };
    }
    profile
}

/// The next input of a simulated participant and the delay before it.
fn next_input(s: &StudySession, profile: &PreferenceProfile, p: &mut Participant) -> Option<(StepInput, u64)> {
    let rating = |kind, value| StepInput::Rating(RatingInput::new(kind, value));
    Some(match s.stage {
        Stage::Created => (StepInput::Demographics(random_demographics(&mut p.rng)), p.pause_ms()),
        Stage::DemographicsDone => (StepInput::Preferences(profile.clone()), p.pause_ms()),
        Stage::PreferencesDone => (StepInput::ShowExplanation, 500),
        Stage::ExplanationShown => {
            if s.rating(&RatingKind::LikelihoodFromExplanation).is_none() {
                let value = p.likert(Some(Outcome::Effectiveness));
                (rating(RatingKind::LikelihoodFromExplanation, value), p.reading_ms())
            } else if s.rating(&RatingKind::Satisfaction).is_none() {
                (rating(RatingKind::Satisfaction, p.likert(Some(Outcome::Satisfaction))), p.pause_ms())
            } else {
                (rating(RatingKind::Understandability, p.likert(Some(Outcome::Transparency))), p.pause_ms())
            }
        }
        Stage::ExplanationRated => {
            let feature = s.pending_importance().into_iter().next()?;
            (rating(RatingKind::FeatureImportance { feature }, p.likert(None)), p.pause_ms())
        }
        Stage::ImportanceRated => (StepInput::ShowContent, 500),
        Stage::ContentShown => (rating(RatingKind::LikelihoodFromContent, p.likert(None)), p.pause_ms()),
        Stage::ContentRated => (StepInput::Finish, 500),
        Stage::Complete => return None,
    })
}

pub fn session_id(index: usize) -> String {
    format!("sim{index:05}")
}

/// Runs `cfg.sessions` complete sessions one after another and returns the
/// event log in session id order. Same config, same log.
pub fn simulate(cfg: &SimulationConfig, ctx: &StudyContext) -> Result<Vec<EventRecord>, SimulationError> {
    simulate_with(cfg, ctx, ResponseModel::default())
}

pub fn simulate_with(
    cfg: &SimulationConfig,
    ctx: &StudyContext,
    model: ResponseModel,
) -> Result<Vec<EventRecord>, SimulationError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = [0usize; 3];
    let mut log = Vec::new();
    for i in 0..cfg.sessions {
        let domain = if rng.random_bool(cfg.recipe_share) { DomainId::Recipe } else { DomainId::Apartment };
        let variant = assign_variant(&counts);
        counts[ExplanationVariant::ALL.iter().position(|v| *v == variant).expect("known variant")] += 1;
        let profile = random_profile(&mut rng, domain, ctx);
        // each participant gets its own stream so sessions do not perturb each other
        let mut participant =
            Participant { rng: ChaCha8Rng::seed_from_u64(rng.random()), model, responder: &cfg.responder, variant };

        let id = session_id(i);
        let mut at = EPOCH_MS + i as u64 * SESSION_SPACING_MS;
        let mut session = StudySession::new(id.clone(), domain, variant, cfg.explain.clone(), at);
        log.push(EventRecord::created(log.len() as u64, &session, at));
        while let Some((input, delay)) = next_input(&session, &profile, &mut participant) {
            at += delay;
            session = advance(&session, &input, at, ctx)
                .map_err(|source| SimulationError::Protocol { session_id: id.clone(), source })?;
            log.push(EventRecord::step(log.len() as u64, &session, input, at));
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_parsing() {
        let s: Shift = "motivating:satisfaction:1".parse().unwrap();
        assert_eq!(s, Shift { variant: ExplanationVariant::MotivatingConsequence, outcome: Outcome::Satisfaction, delta: 1.0 });
        assert_eq!(s.to_string().parse::<Shift>().unwrap(), s);
        assert!("content_based:efficiency:-12.5".parse::<Shift>().is_ok());
        for bad in ["motivating:satisfaction", "x:satisfaction:1", "motivating:joy:1", "motivating:satisfaction:nan"] {
            assert!(bad.parse::<Shift>().is_err(), "{bad}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::new(0, 1).validate().is_err());
        let mut cfg = SimulationConfig::new(3, 1);
        cfg.recipe_share = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn nine_sessions_are_balanced() {
        let ctx = StudyContext::builtin();
        let log = simulate(&SimulationConfig::new(9, 42), &ctx).unwrap();
        let sessions = conseq_core::study::replay(&log, &ctx).unwrap();
        assert_eq!(conseq_core::study::variant_counts(sessions.values()), [3, 3, 3]);
        assert!(sessions.values().all(StudySession::is_complete));
    }
}
