//! User demographics and per-domain preference profiles.
//!
//! A profile splits preferences into hard constraints, keyed by the feature they
//! restrict, and soft preferences drawn from a fixed per-domain enumeration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{DomainId, DomainSpec, FeatureKind, FeatureSchema, Value};

pub const ACTIVITY_LEVELS: [&str; 4] = ["sedentary", "light", "moderate", "very_active"];
pub const WEIGHT_AIMS: [&str; 3] = ["lose", "maintain", "gain"];
pub const LEISURE_ACTIVITIES: [&str; 7] =
    ["hiking", "swimming", "cycling", "fitness", "culture", "nightlife", "skiing"];
pub const MAX_CHILDREN: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
    Undisclosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    HighSchool,
    University,
    Other,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub education: Option<Education>,
}

impl Demographics {
    pub const MIN_AGE: u32 = 16;
    pub const MAX_AGE: u32 = 120;

    pub fn is_complete(&self) -> bool {
        self.age.is_some() && self.gender.is_some() && self.education.is_some()
    }

    pub fn age_in_range(&self) -> bool {
        self.age.is_none_or(|a| (Self::MIN_AGE..=Self::MAX_AGE).contains(&a))
    }
}

/// The fixed enumeration of soft preference dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SoftPreference {
    FavoriteCuisine,
    ActivityLevel,
    WeightAim,
    ChildrenCount,
    CarAvailable,
    LeisureActivities,
}

impl SoftPreference {
    pub const ALL: [SoftPreference; 6] = [
        SoftPreference::FavoriteCuisine,
        SoftPreference::ActivityLevel,
        SoftPreference::WeightAim,
        SoftPreference::ChildrenCount,
        SoftPreference::CarAvailable,
        SoftPreference::LeisureActivities,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SoftPreference::FavoriteCuisine => "favorite_cuisine",
            SoftPreference::ActivityLevel => "activity_level",
            SoftPreference::WeightAim => "weight_aim",
            SoftPreference::ChildrenCount => "children_count",
            SoftPreference::CarAvailable => "car_available",
            SoftPreference::LeisureActivities => "leisure_activities",
        }
    }

    pub fn domain(self) -> DomainId {
        match self {
            SoftPreference::FavoriteCuisine | SoftPreference::ActivityLevel | SoftPreference::WeightAim => {
                DomainId::Recipe
            }
            _ => DomainId::Apartment,
        }
    }

    /// Looks up a preference id within one domain.
    pub fn parse(domain: DomainId, id: &str) -> Option<SoftPreference> {
        Self::ALL.into_iter().find(|p| p.domain() == domain && p.id() == id)
    }

    pub fn for_domain(domain: DomainId) -> impl Iterator<Item = SoftPreference> {
        Self::ALL.into_iter().filter(move |p| p.domain() == domain)
    }

    /// Item features the dimension is scored against.
    pub fn features(self) -> &'static [&'static str] {
        match self {
            SoftPreference::FavoriteCuisine => &["cuisine"],
            SoftPreference::ActivityLevel => &["calories"],
            SoftPreference::WeightAim => &["calories"],
            SoftPreference::ChildrenCount => &["bedrooms"],
            SoftPreference::CarAvailable => &["private_parking"],
            SoftPreference::LeisureActivities => &["distance_leisure"],
        }
    }

    /// Label used in content-based explanation text.
    pub fn label(self) -> &'static str {
        match self {
            SoftPreference::FavoriteCuisine => "favorite cuisine",
            SoftPreference::ActivityLevel => "activity level",
            SoftPreference::WeightAim => "weight aim",
            SoftPreference::ChildrenCount => "household size",
            SoftPreference::CarAvailable => "car ownership",
            SoftPreference::LeisureActivities => "leisure activities",
        }
    }

    /// Checks a target value against the dimension's enumeration.
    pub fn check(self, value: &Value, spec: &DomainSpec) -> Result<(), String> {
        let one_of = |allowed: &[&str], v: &Value| match v {
            Value::Text(s) if allowed.contains(&s.as_str()) => Ok(()),
            other => Err(format!("{other:?} is not one of {allowed:?}")),
        };
        match self {
            SoftPreference::FavoriteCuisine => {
                let cuisines: Vec<&str> = match spec.feature("cuisine").map(|f| &f.kind) {
                    Some(FeatureKind::Categorical { values, .. }) => values.iter().map(String::as_str).collect(),
                    _ => Vec::new(),
                };
                one_of(&cuisines, value)
            }
            SoftPreference::ActivityLevel => one_of(&ACTIVITY_LEVELS, value),
            SoftPreference::WeightAim => one_of(&WEIGHT_AIMS, value),
            SoftPreference::ChildrenCount => match value {
                Value::Number(n) if n.fract() == 0.0 && (0.0..=MAX_CHILDREN as f64).contains(n) => Ok(()),
                other => Err(format!("{other:?} is not a whole number in 0..={MAX_CHILDREN}")),
            },
            SoftPreference::CarAvailable => match value {
                Value::Bool(_) => Ok(()),
                other => Err(format!("{other:?} is not a boolean")),
            },
            SoftPreference::LeisureActivities => match value {
                Value::Set(items) if !items.is_empty() => {
                    match items.iter().find(|a| !LEISURE_ACTIVITIES.contains(&a.as_str())) {
                        Some(bad) => Err(format!("`{bad}` is not one of {LEISURE_ACTIVITIES:?}")),
                        None => Ok(()),
                    }
                }
                other => Err(format!("{other:?} is not a non-empty activity list")),
            },
        }
    }
}

impl fmt::Display for SoftPreference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// A filter-stage requirement on one item feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardConstraint {
    /// Categorical equality.
    Equals(String),
    /// Categorical value from a list.
    AnyOf(Vec<String>),
    /// Numeric upper bound, inclusive.
    AtMost(f64),
    /// Set feature must not contain any of these values.
    Excludes(Vec<String>),
    /// Ordinal feature rank must not exceed the rank of this value.
    OrdinalAtMost(String),
}

impl HardConstraint {
    pub fn name(&self) -> &'static str {
        match self {
            HardConstraint::Equals(_) => "equals",
            HardConstraint::AnyOf(_) => "any_of",
            HardConstraint::AtMost(_) => "at_most",
            HardConstraint::Excludes(_) => "excludes",
            HardConstraint::OrdinalAtMost(_) => "ordinal_at_most",
        }
    }

    /// The constraint's operand as a plain value (used by rule triggers and templates).
    pub fn operand(&self) -> Value {
        match self {
            HardConstraint::Equals(v) | HardConstraint::OrdinalAtMost(v) => Value::Text(v.clone()),
            HardConstraint::AnyOf(v) | HardConstraint::Excludes(v) => Value::Set(v.clone()),
            HardConstraint::AtMost(n) => Value::Number(*n),
        }
    }

    /// Whether an item value passes. Kind mismatches never pass.
    pub fn is_satisfied(&self, value: &Value, schema: &FeatureSchema) -> bool {
        match (self, value) {
            (HardConstraint::Equals(want), Value::Text(v)) => want == v,
            (HardConstraint::AnyOf(want), Value::Text(v)) => want.contains(v),
            (HardConstraint::AtMost(limit), Value::Number(v)) => v <= limit,
            (HardConstraint::Excludes(avoid), Value::Set(v)) => v.iter().all(|x| !avoid.contains(x)),
            (HardConstraint::OrdinalAtMost(limit), Value::Text(v)) => {
                match (schema.ordinal_rank(v), schema.ordinal_rank(limit)) {
                    (Some(have), Some(max)) => have <= max,
                    _ => false,
                }
            }
            _ => false,
        }
    }

    fn check_against(&self, schema: &FeatureSchema) -> Result<(), String> {
        let in_values = |values: &[String], v: &str| {
            if values.iter().any(|a| a == v) {
                Ok(())
            } else {
                Err(format!("`{v}` is not one of {values:?}"))
            }
        };
        match (self, &schema.kind) {
            (HardConstraint::Equals(v), FeatureKind::Categorical { values, .. }) => in_values(values, v),
            (HardConstraint::AnyOf(vs), FeatureKind::Categorical { values, .. }) if !vs.is_empty() => {
                vs.iter().try_for_each(|v| in_values(values, v))
            }
            (HardConstraint::OrdinalAtMost(v), FeatureKind::Categorical { values, ordinal: true }) => {
                in_values(values, v)
            }
            (HardConstraint::AtMost(n), FeatureKind::Numeric { .. }) if n.is_finite() => Ok(()),
            (HardConstraint::Excludes(vs), FeatureKind::CategoricalSet { values }) => {
                vs.iter().try_for_each(|v| in_values(values, v))
            }
            (c, kind) => Err(format!("`{}` cannot constrain a {} feature", c.name(), kind.name())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceProfile {
    pub domain: DomainId,
    #[serde(default)]
    pub demographics: Demographics,
    #[serde(default)]
    pub hard: BTreeMap<String, HardConstraint>,
    #[serde(default)]
    pub soft: BTreeMap<String, Value>,
}

impl PreferenceProfile {
    pub fn new(domain: DomainId) -> Self {
        PreferenceProfile { domain, demographics: Demographics::default(), hard: BTreeMap::new(), soft: BTreeMap::new() }
    }

    pub fn with_soft(mut self, pref: SoftPreference, value: Value) -> Self {
        self.soft.insert(pref.id().to_string(), value);
        self
    }

    pub fn with_hard(mut self, feature: &str, constraint: HardConstraint) -> Self {
        self.hard.insert(feature.to_string(), constraint);
        self
    }

    pub fn soft_value(&self, pref: SoftPreference) -> Option<&Value> {
        self.soft.get(pref.id())
    }

    /// Recognized soft preferences with their targets, in id order.
    pub fn soft_preferences(&self) -> impl Iterator<Item = (SoftPreference, &Value)> {
        self.soft.iter().filter_map(|(id, v)| SoftPreference::parse(self.domain, id).map(|p| (p, v)))
    }

    pub fn from_json(source: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileViolation {
    DomainMismatch { expected: DomainId, found: DomainId },
    NotHardFeature(String),
    BadConstraint { feature: String, reason: String },
    UnknownPreference(String),
    BadPreferenceValue { preference: String, reason: String },
    EmptySoftSet,
    AgeOutOfRange(u32),
}

impl fmt::Display for ProfileViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileViolation::DomainMismatch { expected, found } => {
                write!(f, "profile is for domain `{found}`, expected `{expected}`")
            }
            ProfileViolation::NotHardFeature(id) => write!(f, "`{id}` is not a hard-constraint feature"),
            ProfileViolation::BadConstraint { feature, reason } => write!(f, "constraint on `{feature}`: {reason}"),
            ProfileViolation::UnknownPreference(id) => write!(f, "unknown preference `{id}`"),
            ProfileViolation::BadPreferenceValue { preference, reason } => {
                write!(f, "preference `{preference}`: {reason}")
            }
            ProfileViolation::EmptySoftSet => f.write_str("empty soft preference set"),
            ProfileViolation::AgeOutOfRange(age) => {
                write!(f, "age {age} outside {}..={}", Demographics::MIN_AGE, Demographics::MAX_AGE)
            }
        }
    }
}

/// Checks a profile against a domain schema, collecting every violation.
pub fn validate_profile(profile: &PreferenceProfile, spec: &DomainSpec) -> Result<(), Vec<ProfileViolation>> {
    let mut out = Vec::new();
    if profile.domain != spec.domain {
        out.push(ProfileViolation::DomainMismatch { expected: spec.domain, found: profile.domain });
    }
    if let Some(age) = profile.demographics.age.filter(|_| !profile.demographics.age_in_range()) {
        out.push(ProfileViolation::AgeOutOfRange(age));
    }
    for (feature, constraint) in &profile.hard {
        if !spec.is_hard(feature) {
            out.push(ProfileViolation::NotHardFeature(feature.clone()));
            continue;
        }
        let schema = spec.feature(feature).expect("hard ids are declared features");
        if let Err(reason) = constraint.check_against(schema) {
            out.push(ProfileViolation::BadConstraint { feature: feature.clone(), reason });
        }
    }
    for (id, value) in &profile.soft {
        match SoftPreference::parse(spec.domain, id) {
            None => out.push(ProfileViolation::UnknownPreference(id.clone())),
            Some(pref) => {
                if let Err(reason) = pref.check(value, spec) {
                    out.push(ProfileViolation::BadPreferenceValue { preference: id.clone(), reason });
                }
            }
        }
    }
    if profile.soft.is_empty() {
        out.push(ProfileViolation::EmptySoftSet);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin_spec;

    fn recipe_profile() -> PreferenceProfile {
        PreferenceProfile::new(DomainId::Recipe)
            .with_soft(SoftPreference::WeightAim, Value::Text("lose".into()))
            .with_hard("cooking_time", HardConstraint::AtMost(30.0))
    }

    #[test]
    fn recipe_profile_with_weight_aim_is_ok() {
        assert_eq!(validate_profile(&recipe_profile(), &builtin_spec(DomainId::Recipe)), Ok(()));
    }

    #[test]
    fn empty_soft_set_is_reported() {
        let p = PreferenceProfile::new(DomainId::Recipe).with_hard("cooking_time", HardConstraint::AtMost(30.0));
        let v = validate_profile(&p, &builtin_spec(DomainId::Recipe)).unwrap_err();
        assert_eq!(v, vec![ProfileViolation::EmptySoftSet]);
        assert_eq!(v[0].to_string(), "empty soft preference set");
    }

    #[test]
    fn unknown_preference_is_named() {
        let mut p = PreferenceProfile::new(DomainId::Apartment)
            .with_soft(SoftPreference::ChildrenCount, Value::Number(1.0));
        p.soft.insert("pets".into(), Value::Bool(true));
        let v = validate_profile(&p, &builtin_spec(DomainId::Apartment)).unwrap_err();
        assert_eq!(v, vec![ProfileViolation::UnknownPreference("pets".into())]);
        assert!(v[0].to_string().contains("pets"));
    }

    #[test]
    fn collects_every_violation() {
        let mut p = PreferenceProfile::new(DomainId::Recipe)
            .with_soft(SoftPreference::WeightAim, Value::Text("shrink".into()))
            .with_hard("cuisine", HardConstraint::Equals("italian".into()))
            .with_hard("cooking_time", HardConstraint::Excludes(vec!["x".into()]))
            .with_hard("diet", HardConstraint::OrdinalAtMost("carnivore".into()));
        p.demographics.age = Some(7);
        let v = validate_profile(&p, &builtin_spec(DomainId::Recipe)).unwrap_err();
        assert_eq!(v.len(), 5, "{v:?}");
        assert!(v.contains(&ProfileViolation::NotHardFeature("cuisine".into())));
        assert!(v.contains(&ProfileViolation::AgeOutOfRange(7)));
    }

    #[test]
    fn apartment_preference_in_recipe_domain_is_unknown() {
        let p = PreferenceProfile::new(DomainId::Recipe).with_soft(SoftPreference::CarAvailable, Value::Bool(true));
        let v = validate_profile(&p, &builtin_spec(DomainId::Recipe)).unwrap_err();
        assert_eq!(v, vec![ProfileViolation::UnknownPreference("car_available".into())]);
    }

    #[test]
    fn validation_is_deterministic() {
        let p = recipe_profile().with_soft(SoftPreference::ActivityLevel, Value::Text("hyper".into()));
        let spec = builtin_spec(DomainId::Recipe);
        assert_eq!(validate_profile(&p, &spec), validate_profile(&p, &spec));
    }

    #[test]
    fn ordinal_constraint_uses_rank_order() {
        let spec = builtin_spec(DomainId::Recipe);
        let diet = spec.feature("diet").unwrap();
        let veg = HardConstraint::OrdinalAtMost("vegetarian".into());
        assert!(veg.is_satisfied(&Value::Text("vegan".into()), diet));
        assert!(veg.is_satisfied(&Value::Text("vegetarian".into()), diet));
        assert!(!veg.is_satisfied(&Value::Text("omnivore".into()), diet));
    }

    #[test]
    fn profile_json_shape() {
        let json = r#"{"domain":"apartment","demographics":{"age":30,"gender":"female","education":"university"},
            "hard":{"rent":{"at_most":700}},"soft":{"children_count":2,"car_available":true,
            "leisure_activities":["hiking"]}}"#;
        let p = PreferenceProfile::from_json(json).unwrap();
        assert_eq!(p.hard["rent"], HardConstraint::AtMost(700.0));
        assert!(p.demographics.is_complete());
        assert_eq!(validate_profile(&p, &builtin_spec(DomainId::Apartment)), Ok(()));
    }
}

/// Example profiles shipped with the crate, by name.
pub const FIXTURE_PROFILES: [(&str, &str); 4] = [
    ("recipe_moderate_lose", include_str!("../data/profiles/recipe_moderate_lose.json")),
    ("recipe_vegetarian_italian", include_str!("../data/profiles/recipe_vegetarian_italian.json")),
    ("apartment_family", include_str!("../data/profiles/apartment_family.json")),
    ("apartment_commuter", include_str!("../data/profiles/apartment_commuter.json")),
];

/// Parses a shipped example profile.
pub fn fixture_profile(name: &str) -> Option<PreferenceProfile> {
    FIXTURE_PROFILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| PreferenceProfile::from_json(src).expect("fixture profiles parse"))
}
