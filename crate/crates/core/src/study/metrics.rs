//! Explanation-aim metrics of a session and grouped aggregates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::session::{RatingKind, StudySession};
use crate::consequence::ExplanationVariant;
use crate::preferences::{Education, HardConstraint};
use crate::catalog::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("session `{session_id}` has no `{kind}` rating")]
pub struct MissingEvent {
    pub session_id: String,
    pub kind: String,
}

fn rating<'a>(session: &'a StudySession, kind: &RatingKind) -> Result<&'a super::RatingEvent, MissingEvent> {
    session
        .rating(kind)
        .ok_or_else(|| MissingEvent { session_id: session.session_id.clone(), kind: kind.name().to_string() })
}

/// Seconds from the explanation appearing to the likelihood rating.
pub fn efficiency(session: &StudySession) -> Result<f64, MissingEvent> {
    let r = rating(session, &RatingKind::LikelihoodFromExplanation)?;
    Ok((r.submitted_at - r.shown_at) as f64 / 1000.0)
}

/// Explanation-based minus content-based likelihood.
pub fn effectiveness(session: &StudySession) -> Result<f64, MissingEvent> {
    let from_explanation = rating(session, &RatingKind::LikelihoodFromExplanation)?.value;
    let from_content = rating(session, &RatingKind::LikelihoodFromContent)?.value;
    Ok(f64::from(from_explanation) - f64::from(from_content))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AimMetrics {
    pub efficiency_seconds: f64,
    pub effectiveness_delta: f64,
    pub satisfaction: f64,
    pub transparency: f64,
}

impl AimMetrics {
    pub fn of(session: &StudySession) -> Result<AimMetrics, MissingEvent> {
        Ok(AimMetrics {
            efficiency_seconds: efficiency(session)?,
            effectiveness_delta: effectiveness(session)?,
            satisfaction: f64::from(rating(session, &RatingKind::Satisfaction)?.value),
            transparency: f64::from(rating(session, &RatingKind::Understandability)?.value),
        })
    }

    pub fn get(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Efficiency => self.efficiency_seconds,
            Outcome::Effectiveness => self.effectiveness_delta,
            Outcome::Satisfaction => self.satisfaction,
            Outcome::Transparency => self.transparency,
        }
    }
}

/// The analysed explanation aims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Efficiency,
    Effectiveness,
    Satisfaction,
    Transparency,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::Efficiency, Outcome::Effectiveness, Outcome::Satisfaction, Outcome::Transparency];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Efficiency => "efficiency",
            Outcome::Effectiveness => "effectiveness",
            Outcome::Satisfaction => "satisfaction",
            Outcome::Transparency => "transparency",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown outcome `{0}` (expected efficiency, effectiveness, satisfaction or transparency)")]
pub struct UnknownOutcome(pub String);

impl FromStr for Outcome {
    type Err = UnknownOutcome;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|o| o.as_str() == s).ok_or_else(|| UnknownOutcome(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Effective,
    Persuasive,
    Underestimated,
}

pub const DEFAULT_EFFECT_TOLERANCE: f64 = 0.25;

/// Reads a mean effectiveness delta: near zero is effective, positive means
/// the explanation oversold the item, negative means it undersold it.
pub fn classify_effect(mean_delta: f64, tolerance: f64) -> Effect {
    if mean_delta > tolerance {
        Effect::Persuasive
    } else if mean_delta < -tolerance {
        Effect::Underestimated
    } else {
        Effect::Effective
    }
}

/// Variant with the fewest sessions; ties go to the earlier variant.
pub fn assign_variant(counts: &[usize; 3]) -> ExplanationVariant {
    let (idx, _) = counts.iter().enumerate().min_by_key(|&(i, c)| (*c, i)).expect("three counts");
    ExplanationVariant::ALL[idx]
}

/// Session counts per variant, in [`ExplanationVariant::ALL`] order.
pub fn variant_counts<'a>(sessions: impl IntoIterator<Item = &'a StudySession>) -> [usize; 3] {
    let mut counts = [0; 3];
    for s in sessions {
        counts[ExplanationVariant::ALL.iter().position(|v| *v == s.variant).expect("known variant")] += 1;
    }
    counts
}

/// Value of a grouping key for a session. Missing values group as `none`.
pub fn group_value(session: &StudySession, key: &str) -> String {
    let demographics = session.demographics.clone().unwrap_or_default();
    let value = match key {
        "variant" => Some(session.variant.as_str().to_string()),
        "domain" => Some(session.domain.as_str().to_string()),
        "gender" => demographics.gender.map(|g| serde_plain(&g)),
        "education" => demographics.education.map(|e| {
            if e == Education::University { "university" } else { "non_university" }.to_string()
        }),
        _ => session.profile.as_ref().and_then(|profile| match (profile.soft.get(key), profile.hard.get(key)) {
            (Some(v), _) => Some(canonical(v)),
            (None, Some(HardConstraint::AtMost(n))) => Some(crate::catalog::format_number(*n)),
            (None, Some(c)) => Some(canonical(&c.operand())),
            (None, None) => None,
        }),
    };
    value.unwrap_or_else(|| "none".into())
}

/// Keys accepted by [`group_value`] besides per-domain preference ids.
pub const BASE_GROUP_KEYS: [&str; 4] = ["variant", "domain", "gender", "education"];

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn canonical(value: &Value) -> String {
    match value {
        Value::Set(items) => {
            let mut items = items.clone();
            items.sort();
            items.join("+")
        }
        other => other.to_string(),
    }
}

/// Whether `key` can group sessions.
pub fn is_group_key(key: &str) -> bool {
    use crate::catalog::builtin_spec;
    use crate::catalog::DomainId;
    use crate::preferences::SoftPreference;
    BASE_GROUP_KEYS.contains(&key)
        || SoftPreference::ALL.iter().any(|p| p.id() == key)
        || DomainId::ALL.into_iter().any(|d| builtin_spec(d).is_hard(key))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: BTreeMap<String, String>,
    pub n: usize,
    pub means: AimMetrics,
}

impl GroupRow {
    /// Group values joined in key order, for column headers.
    pub fn label(&self, keys: &[String]) -> String {
        keys.iter().map(|k| self.group.get(k).map_or("none", String::as_str)).collect::<Vec<_>>().join("/")
    }
}

/// Sum of values in ascending order, so the result does not depend on input order.
pub fn stable_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

pub fn stable_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    stable_sum(&mut v) / v.len() as f64
}

/// Per-group means of the four aims over complete sessions, one row per
/// observed group combination, sorted by group values.
pub fn aggregate(sessions: &[StudySession], group_by: &[String]) -> Result<Vec<GroupRow>, MissingEvent> {
    let mut groups: BTreeMap<Vec<String>, Vec<AimMetrics>> = BTreeMap::new();
    for s in sessions {
        let key: Vec<String> = group_by.iter().map(|k| group_value(s, k)).collect();
        groups.entry(key).or_default().push(AimMetrics::of(s)?);
    }
    Ok(groups
        .into_iter()
        .map(|(key, metrics)| {
            let column = |o: Outcome| stable_mean(&metrics.iter().map(|m| m.get(o)).collect::<Vec<_>>());
            GroupRow {
                group: group_by.iter().cloned().zip(key).collect(),
                n: metrics.len(),
                means: AimMetrics {
                    efficiency_seconds: column(Outcome::Efficiency),
                    effectiveness_delta: column(Outcome::Effectiveness),
                    satisfaction: column(Outcome::Satisfaction),
                    transparency: column(Outcome::Transparency),
                },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effect_classes() {
        assert_eq!(classify_effect(0.4, 0.25), Effect::Persuasive);
        assert_eq!(classify_effect(-0.6, 0.25), Effect::Underestimated);
        assert_eq!(classify_effect(0.0, 0.25), Effect::Effective);
        assert_eq!(classify_effect(0.25, 0.25), Effect::Effective);
        assert_eq!(classify_effect(-0.25, 0.25), Effect::Effective);
    }

    #[test]
    fn variant_assignment() {
        assert_eq!(assign_variant(&[3, 3, 3]), ExplanationVariant::MotivatingConsequence);
        assert_eq!(assign_variant(&[4, 3, 4]), ExplanationVariant::AvoidingConsequence);
        assert_eq!(assign_variant(&[1, 1, 0]), ExplanationVariant::ContentBased);
    }

    #[test]
    fn outcome_names() {
        for o in Outcome::ALL {
            assert_eq!(o.as_str().parse::<Outcome>().unwrap(), o);
        }
        assert!("trust".parse::<Outcome>().is_err());
    }

    #[test]
    fn group_keys() {
        assert!(is_group_key("variant"));
        assert!(is_group_key("weight_aim"));
        assert!(is_group_key("rent"));
        assert!(!is_group_key("age"));
    }
}
