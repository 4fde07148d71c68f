//! Consequence derivation and explanation rendering.
//!
//! Rules fire against a scored recommendation and produce fragments: a
//! consequence for each triggered rule whose dimension the item fulfils, and a
//! downside for each soft preference it misses. Fragments are then trimmed to
//! the most important ones and composed into text, either in motivating or in
//! avoiding formulation.

pub mod expr;
pub mod rules;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{DomainSpec, FeatureSchema, Item, Value};
use crate::preferences::{PreferenceProfile, SoftPreference};
use crate::recommender::ScoredItem;

pub use rules::{builtin_rules, ConsequenceRule, RuleError, RuleInputs, RuleSet, Templates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Motivating,
    Avoiding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationVariant {
    MotivatingConsequence,
    AvoidingConsequence,
    ContentBased,
}

impl ExplanationVariant {
    pub const ALL: [ExplanationVariant; 3] = [
        ExplanationVariant::MotivatingConsequence,
        ExplanationVariant::AvoidingConsequence,
        ExplanationVariant::ContentBased,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExplanationVariant::MotivatingConsequence => "motivating_consequence",
            ExplanationVariant::AvoidingConsequence => "avoiding_consequence",
            ExplanationVariant::ContentBased => "content_based",
        }
    }

    /// Short name used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            ExplanationVariant::MotivatingConsequence => "motivating",
            ExplanationVariant::AvoidingConsequence => "avoiding",
            ExplanationVariant::ContentBased => "content",
        }
    }

    pub fn polarity(self) -> Option<Polarity> {
        match self {
            ExplanationVariant::MotivatingConsequence => Some(Polarity::Motivating),
            ExplanationVariant::AvoidingConsequence => Some(Polarity::Avoiding),
            ExplanationVariant::ContentBased => None,
        }
    }
}

impl fmt::Display for ExplanationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown explanation variant `{0}`")]
pub struct UnknownVariant(pub String);

impl FromStr for ExplanationVariant {
    type Err = UnknownVariant;

    /// Accepts both the full and the short names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s || v.short_name() == s)
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentKind {
    Consequence,
    Downside,
    /// A clause of the content-based baseline.
    Match,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsequenceFragment {
    pub rule_id: String,
    pub kind: FragmentKind,
    pub rank: u32,
    /// Importance-rating key of the consequence.
    pub topic: String,
    /// Formulation of a consequence sentence. `None` for downsides and matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
    pub sentence: String,
    #[serde(default)]
    pub referenced_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub variant: ExplanationVariant,
    pub fragments: Vec<ConsequenceFragment>,
    pub text: String,
}

impl Explanation {
    /// Recomposes the text from the fragments.
    pub fn rerender(&self) -> String {
        match self.variant {
            ExplanationVariant::ContentBased => compose_content(&self.fragments),
            _ => compose_consequences(&self.fragments),
        }
    }

    /// Distinct importance topics, in fragment order.
    pub fn topics(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.fragments.iter().filter(|f| seen.insert(f.topic.clone())).map(|f| f.topic.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Compatibility at or above which a soft preference counts as fulfilled.
    pub satisfaction_threshold: f64,
    /// Consequences kept per explanation. Downsides are always kept.
    pub top_k: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { satisfaction_threshold: 0.75, top_k: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("no fragments to explain")]
    EmptyExplanation,
    #[error("`{0}` is not a consequence-based variant")]
    NotConsequenceVariant(ExplanationVariant),
    #[error("fragment `{rule_id}` was derived for the other formulation")]
    PolarityMismatch { rule_id: String },
    #[error("top-k must be at least 1")]
    ZeroK,
}

/// Derives the consequence and downside fragments of a recommendation.
///
/// Consequences come first in rank order, then downsides in rank order.
pub fn derive_consequences(
    scored: &ScoredItem,
    item: &Item,
    profile: &PreferenceProfile,
    rules: &RuleSet,
    polarity: Polarity,
    config: &ExplainConfig,
) -> Result<Vec<ConsequenceFragment>, ExplainError> {
    if rules.is_empty() {
        return Ok(Vec::new());
    }
    let inputs = RuleInputs { item, profile, scored };
    let threshold = config.satisfaction_threshold;
    let mut out = Vec::new();

    for rule in rules.rules() {
        let fulfilled = match rule.dimension() {
            None => true,
            Some(p) => scored.compatibility(p).is_some_and(|c| c >= threshold),
        };
        if !fulfilled || !rule.is_triggered(&inputs) {
            continue;
        }
        let template = match polarity {
            Polarity::Motivating => &rule.templates.motivating,
            Polarity::Avoiding => &rule.templates.avoiding,
        };
        out.push(fragment(rule, FragmentKind::Consequence, Some(polarity), rule.render(template, &inputs)?));
    }

    let mut downsides = Vec::new();
    for (pref, _) in profile.soft_preferences() {
        let below = scored.compatibility(pref).is_some_and(|c| c < threshold);
        if !below {
            continue;
        }
        // Every soft dimension must have a rule to voice its downside.
        let rule = rules.governing(pref).ok_or_else(|| RuleError::Invalid {
            rule_id: format!("{}.{}", rules.domain, pref.id()),
            reason: format!("no rule governs `{}`", pref.id()),
        })?;
        let sentence = rule.render(&rule.templates.downside, &inputs)?;
        downsides.push(fragment(rule, FragmentKind::Downside, None, sentence));
    }
    downsides.sort_by_key(|f| f.rank);
    out.extend(downsides);
    Ok(out)
}

fn fragment(
    rule: &ConsequenceRule,
    kind: FragmentKind,
    polarity: Option<Polarity>,
    sentence: String,
) -> ConsequenceFragment {
    ConsequenceFragment {
        rule_id: rule.id.clone(),
        kind,
        rank: rule.rank,
        topic: rule.topic.clone(),
        polarity,
        sentence,
        referenced_features: rule.features.clone(),
    }
}

/// Keeps the `k` most important consequences and every downside.
pub fn select_top_consequences(fragments: &[ConsequenceFragment], k: usize) -> Vec<ConsequenceFragment> {
    let mut consequences: Vec<(u32, usize)> = fragments
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FragmentKind::Consequence)
        .map(|(i, f)| (f.rank, i))
        .collect();
    consequences.sort_unstable();
    let kept: BTreeSet<usize> = consequences.into_iter().take(k).map(|(_, i)| i).collect();
    fragments
        .iter()
        .enumerate()
        .filter(|(i, f)| f.kind != FragmentKind::Consequence || kept.contains(i))
        .map(|(_, f)| f.clone())
        .collect()
}

/// Joins clauses the way the golden examples do: "A", "A, and B",
/// "A, B, and C".
pub fn join_clauses<S: AsRef<str>>(clauses: &[S]) -> String {
    match clauses {
        [] => String::new(),
        [one] => one.as_ref().to_string(),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{}, and {}", head.join(", "), last.as_ref())
        }
    }
}

fn sentence_case(text: &str) -> String {
    let mut chars = text.chars();
    let mut out: String = match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => return String::new(),
    };
    if !out.ends_with(['.', '!', '?']) {
        out.push('.');
    }
    out
}

fn compose_consequences(fragments: &[ConsequenceFragment]) -> String {
    let block = |kind| {
        let clauses: Vec<&str> =
            fragments.iter().filter(|f| f.kind == kind).map(|f| f.sentence.trim_end_matches('.')).collect();
        sentence_case(&join_clauses(&clauses))
    };
    let blocks = [block(FragmentKind::Consequence), block(FragmentKind::Downside)];
    blocks.into_iter().filter(|b| !b.is_empty()).collect::<Vec<_>>().join(" ")
}

/// Composes consequence and downside fragments into the final text.
pub fn render_explanation(
    fragments: &[ConsequenceFragment],
    variant: ExplanationVariant,
) -> Result<Explanation, ExplainError> {
    let polarity = variant.polarity().ok_or(ExplainError::NotConsequenceVariant(variant))?;
    if fragments.is_empty() {
        return Err(ExplainError::EmptyExplanation);
    }
    if let Some(f) = fragments.iter().find(|f| f.polarity.is_some_and(|p| p != polarity)) {
        return Err(ExplainError::PolarityMismatch { rule_id: f.rule_id.clone() });
    }
    let mut ordered: Vec<ConsequenceFragment> = fragments.to_vec();
    // stable: consequences by rank, then downsides by rank
    ordered.sort_by_key(|f| (f.kind != FragmentKind::Consequence, f.rank));
    let text = compose_consequences(&ordered);
    Ok(Explanation { variant, fragments: ordered, text })
}

/// Derive, select and render in one go.
pub fn consequence_explanation(
    scored: &ScoredItem,
    item: &Item,
    profile: &PreferenceProfile,
    rules: &RuleSet,
    variant: ExplanationVariant,
    config: &ExplainConfig,
) -> Result<Explanation, ExplainError> {
    let polarity = variant.polarity().ok_or(ExplainError::NotConsequenceVariant(variant))?;
    if config.top_k == 0 {
        return Err(ExplainError::ZeroK);
    }
    let all = derive_consequences(scored, item, profile, rules, polarity, config)?;
    render_explanation(&select_top_consequences(&all, config.top_k), variant)
}

/// Produces the explanation for any variant. Consequence variants that yield
/// no fragments fall back to the content-based text.
pub fn explain(
    scored: &ScoredItem,
    item: &Item,
    profile: &PreferenceProfile,
    rules: &RuleSet,
    spec: &DomainSpec,
    variant: ExplanationVariant,
    config: &ExplainConfig,
) -> Result<Explanation, ExplainError> {
    if variant == ExplanationVariant::ContentBased {
        return Ok(content_based_explanation(item, profile, scored, spec, config));
    }
    match consequence_explanation(scored, item, profile, rules, variant, config) {
        Err(ExplainError::EmptyExplanation) => Ok(content_based_explanation(item, profile, scored, spec, config)),
        other => other,
    }
}

fn shown_value(schema: Option<&FeatureSchema>, value: &Value) -> String {
    let text = match value {
        Value::Set(s) if s.is_empty() => "none".to_string(),
        v => v.to_string(),
    };
    match (schema.and_then(|s| s.unit.as_deref()), value) {
        (Some(unit), Value::Number(_)) => format!("{text} {unit}"),
        _ => text,
    }
}

/// "a", "a and b", "a, b, and c".
fn join_list(values: &[String]) -> String {
    match values {
        [one, two] => format!("{one} and {two}"),
        _ => join_clauses(values),
    }
}

const CONTENT_LEAD: &str = "Recommended because ";

fn compose_content(fragments: &[ConsequenceFragment]) -> String {
    let clauses: Vec<&str> = fragments.iter().map(|f| f.sentence.as_str()).collect();
    if clauses.is_empty() {
        return String::new();
    }
    sentence_case(&format!("{CONTENT_LEAD}{}", join_clauses(&clauses)))
}

/// The content-based baseline: which item features match which preferences.
///
/// One clause per fulfilled soft preference, then one per hard constraint.
/// When neither exists, the best-scoring soft preference is named instead.
pub fn content_based_explanation(
    item: &Item,
    profile: &PreferenceProfile,
    scored: &ScoredItem,
    spec: &DomainSpec,
    config: &ExplainConfig,
) -> Explanation {
    let soft_clause = |pref: SoftPreference, verb: &str| {
        let feature = pref.features()[0];
        let schema = spec.feature(feature);
        let label = schema.map_or(feature, |s| s.label.as_str());
        let value = item.feature(feature).map(|v| shown_value(schema, v)).unwrap_or_else(|| "unknown".into());
        ConsequenceFragment {
            rule_id: format!("match.{}", pref.id()),
            kind: FragmentKind::Match,
            rank: 0,
            topic: pref.id().to_string(),
            polarity: None,
            sentence: format!("its {label} ({value}) {verb} your {}", pref.label()),
            referenced_features: vec![feature.to_string()],
        }
    };

    let mut fragments: Vec<ConsequenceFragment> = profile
        .soft_preferences()
        .filter(|(p, _)| scored.compatibility(*p).is_some_and(|c| c >= config.satisfaction_threshold))
        .map(|(p, _)| soft_clause(p, "matches"))
        .collect();

    // All hard constraints share one clause to keep the baseline brief.
    if !profile.hard.is_empty() {
        let shown: Vec<String> = profile
            .hard
            .keys()
            .map(|feature| {
                let schema = spec.feature(feature);
                let label = schema.map_or(feature.as_str(), |s| s.label.as_str());
                let value = item.feature(feature).map(|v| shown_value(schema, v)).unwrap_or_else(|| "unknown".into());
                format!("{label} ({value})")
            })
            .collect();
        let verb = if shown.len() == 1 { "meets your requirement" } else { "meet your requirements" };
        fragments.push(ConsequenceFragment {
            rule_id: "match.hard_constraints".into(),
            kind: FragmentKind::Match,
            rank: 0,
            topic: "hard_constraints".into(),
            polarity: None,
            sentence: format!("its {} {verb}", join_list(&shown)),
            referenced_features: profile.hard.keys().cloned().collect(),
        });
    }

    if fragments.is_empty() {
        let best = profile
            .soft_preferences()
            .filter_map(|(p, _)| scored.compatibility(p).map(|c| (p, c)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        if let Some((p, _)) = best {
            fragments.push(soft_clause(p, "comes closest to"));
        }
    }
    for (i, f) in fragments.iter_mut().enumerate() {
        f.rank = i as u32 + 1;
    }

    let mut text = compose_content(&fragments);
    if text.is_empty() {
        text = format!("Recommended as the best available {}.", spec.domain.item_noun());
    }
    Explanation { variant: ExplanationVariant::ContentBased, fragments, text }
}
