//! Random instance generators and brute-force oracles shared by the test suites.
//!
//! The oracles re-derive results from the documented formulas without calling
//! the engine code they check.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use conseq_core::catalog::{builtin_spec, Catalog, DomainId, DomainSpec, FeatureKind, Item, Value};
use conseq_core::preferences::{
    Demographics, Education, Gender, HardConstraint, PreferenceProfile, ACTIVITY_LEVELS, LEISURE_ACTIVITIES,
    MAX_CHILDREN, WEIGHT_AIMS,
};
use conseq_core::recommender::{ScoringConfig, WeightVector};
use conseq_core::study::{RatingInput, RatingKind, Stage, StepInput, StudyContext, StudySession};

pub mod checks;
pub mod oracle;

/// Random value for a feature, drawn from a coarse grid so that ties happen.
pub fn random_value<R: Rng>(rng: &mut R, kind: &FeatureKind) -> Value {
    match kind {
        FeatureKind::Categorical { values, .. } => Value::Text(values.choose(rng).unwrap().clone()),
        FeatureKind::Numeric { min, max } => {
            let steps = rng.random_range(0..=8);
            Value::Number(min + (max - min) * steps as f64 / 8.0)
        }
        FeatureKind::Boolean => Value::Bool(rng.random()),
        FeatureKind::CategoricalSet { values } => Value::Set(random_subset(rng, values, 0)),
    }
}

fn random_subset<R: Rng>(rng: &mut R, values: &[String], min_len: usize) -> Vec<String> {
    let mut shuffled = values.to_vec();
    shuffled.shuffle(rng);
    let len = rng.random_range(min_len..=values.len().min(min_len.max(3)));
    shuffled.truncate(len);
    shuffled
}

/// A catalog of `n` random valid items.
pub fn random_catalog<R: Rng>(rng: &mut R, domain: DomainId, n: usize) -> Catalog {
    let spec = builtin_spec(domain);
    let items = (0..n)
        .map(|i| Item {
            id: format!("x{i:02}"),
            title: format!("Item {i}"),
            description: String::new(),
            image: None,
            features: spec.features.iter().map(|f| (f.id.clone(), random_value(rng, &f.kind))).collect(),
        })
        .collect();
    Catalog { spec, items }
}

fn random_constraint<R: Rng>(rng: &mut R, spec: &DomainSpec, feature: &str) -> HardConstraint {
    let schema = spec.feature(feature).unwrap();
    match &schema.kind {
        FeatureKind::Categorical { values, ordinal } => match rng.random_range(0..3) {
            0 => HardConstraint::Equals(values.choose(rng).unwrap().clone()),
            1 if *ordinal => HardConstraint::OrdinalAtMost(values.choose(rng).unwrap().clone()),
            _ => HardConstraint::AnyOf(random_subset(rng, values, 1)),
        },
        FeatureKind::Numeric { min, max } => {
            let steps = rng.random_range(1..=8);
            HardConstraint::AtMost(min + (max - min) * steps as f64 / 8.0)
        }
        FeatureKind::CategoricalSet { values } => HardConstraint::Excludes(random_subset(rng, values, 1)),
        FeatureKind::Boolean => unreachable!("no boolean hard features"),
    }
}

/// A valid profile with a random subset of hard constraints and a non-empty
/// random subset of soft preferences.
pub fn random_profile<R: Rng>(rng: &mut R, domain: DomainId) -> PreferenceProfile {
    let spec = builtin_spec(domain);
    let mut profile = PreferenceProfile::new(domain);
    for feature in &spec.hard_feature_ids {
        if rng.random_bool(0.5) {
            let c = random_constraint(rng, &spec, feature);
            profile.hard.insert(feature.clone(), c);
        }
    }
    let prefs: Vec<_> = conseq_core::preferences::SoftPreference::for_domain(domain).collect();
    while profile.soft.is_empty() {
        for p in &prefs {
            if rng.random_bool(0.6) {
                profile.soft.insert(p.id().to_string(), random_target(rng, p.id(), &spec));
            }
        }
    }
    profile
}

/// A valid target value for a soft preference.
pub fn random_target<R: Rng>(rng: &mut R, pref: &str, spec: &DomainSpec) -> Value {
    let pick = |rng: &mut R, v: &[&str]| Value::Text(v.choose(rng).unwrap().to_string());
    match pref {
        "favorite_cuisine" => random_value(rng, &spec.feature("cuisine").unwrap().kind),
        "activity_level" => pick(rng, &ACTIVITY_LEVELS),
        "weight_aim" => pick(rng, &WEIGHT_AIMS),
        "children_count" => Value::Number(rng.random_range(0..=MAX_CHILDREN) as f64),
        "car_available" => Value::Bool(rng.random()),
        "leisure_activities" => {
            let all: Vec<String> = LEISURE_ACTIVITIES.iter().map(|s| s.to_string()).collect();
            Value::Set(random_subset(rng, &all, 1))
        }
        other => panic!("unknown preference {other}"),
    }
}

/// Random weights over the profile's soft preferences.
pub fn random_weights<R: Rng>(rng: &mut R, profile: &PreferenceProfile) -> WeightVector {
    let grid = [0.5, 1.0, 1.0, 2.0, 3.0];
    profile.soft.keys().fold(WeightVector::uniform(), |w, k| w.with(k, *grid.choose(rng).unwrap()))
}

pub fn random_demographics<R: Rng>(rng: &mut R) -> Demographics {
    Demographics {
        age: Some(rng.random_range(18..=70)),
        gender: Some(*[Gender::Female, Gender::Male, Gender::Other, Gender::Undisclosed].choose(rng).unwrap()),
        education: Some(*[Education::HighSchool, Education::University, Education::Other].choose(rng).unwrap()),
    }
}

/// Any input, mostly well-formed, sometimes for the wrong stage or invalid.
pub fn random_step<R: Rng>(rng: &mut R, domain: DomainId, topics: &[String]) -> StepInput {
    let rating = |rng: &mut R, kind: RatingKind| {
        let value = if rng.random_bool(0.9) { rng.random_range(1..=5) } else { *[0, 6, -2].choose(rng).unwrap() };
        StepInput::Rating(RatingInput::new(kind, value))
    };
    match rng.random_range(0..10) {
        0 => StepInput::Demographics(if rng.random_bool(0.85) { random_demographics(rng) } else { Demographics::default() }),
        1 => {
            let d = if rng.random_bool(0.9) { domain } else { DomainId::ALL[rng.random_range(0..2)] };
            StepInput::Preferences(random_profile(rng, d))
        }
        2 => StepInput::ShowExplanation,
        3 => StepInput::ShowContent,
        4 => StepInput::Finish,
        5 => rating(rng, RatingKind::LikelihoodFromContent),
        6 | 7 => {
            let kind = RatingKind::EXPLANATION_RATINGS.choose(rng).unwrap().clone();
            rating(rng, kind)
        }
        _ => {
            let feature = match topics.choose(rng) {
                Some(t) if rng.random_bool(0.9) => t.clone(),
                _ => "no_such_topic".to_string(),
            };
            rating(rng, RatingKind::FeatureImportance { feature })
        }
    }
}

/// The input that moves a session one step toward completion, with the given
/// Likert answer for any rating.
pub fn next_valid_step(session: &StudySession, profile: &PreferenceProfile, answer: i64) -> Option<StepInput> {
    let rate = |kind| Some(StepInput::Rating(RatingInput::new(kind, answer)));
    match session.stage {
        Stage::Created => Some(StepInput::Demographics(Demographics {
            age: Some(33),
            gender: Some(Gender::Other),
            education: Some(Education::University),
        })),
        Stage::DemographicsDone => Some(StepInput::Preferences(profile.clone())),
        Stage::PreferencesDone => Some(StepInput::ShowExplanation),
        Stage::ExplanationShown => {
            RatingKind::EXPLANATION_RATINGS.iter().find(|k| session.rating(k).is_none()).cloned().and_then(rate)
        }
        Stage::ExplanationRated => session
            .pending_importance()
            .into_iter()
            .next()
            .and_then(|feature| rate(RatingKind::FeatureImportance { feature })),
        Stage::ImportanceRated => Some(StepInput::ShowContent),
        Stage::ContentShown => rate(RatingKind::LikelihoodFromContent),
        Stage::ContentRated => Some(StepInput::Finish),
        Stage::Complete => None,
    }
}

/// Drives a new session through the whole protocol, one second per step.
pub fn complete_session(
    ctx: &StudyContext,
    session: StudySession,
    profile: &PreferenceProfile,
    answer: i64,
) -> (StudySession, Vec<(StepInput, u64)>) {
    let mut s = session;
    let mut at = s.entered_at[&Stage::Created];
    let mut steps = Vec::new();
    while let Some(input) = next_valid_step(&s, profile, answer) {
        at += 1000;
        s = conseq_core::study::advance(&s, &input, at, ctx).expect("scripted step applies");
        steps.push((input, at));
    }
    (s, steps)
}

/// Counts of each value, for multiset comparisons.
pub fn multiset<T: Ord + Clone>(items: impl IntoIterator<Item = T>) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

/// The default scoring configuration, re-exported for oracle callers.
pub fn scoring() -> ScoringConfig {
    ScoringConfig::default()
}
