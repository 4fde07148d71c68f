//! Declarative consequence rules and their file format.
//!
//! A rule file is a JSON array of rule objects:
//!
//! ```json
//! [ { "id": "recipe.weight_aim", "domain": "recipe", "rank": 5,
//!     "dimension": "weight_aim", "topic": "weight_aim", "features": ["calories", "fat"],
//!     "trigger": "exists(pref.weight_aim)",
//!     "labels": { "pref.weight_aim": { "lose": "losing weight" } },
//!     "templates": { "motivating": "...", "avoiding": "...", "downside": "..." } } ]
//! ```
//!
//! Templates and triggers may refer to these names:
//!
//! * `item.<feature>`: feature value of the recommended item
//! * `pref.<preference>`: soft preference target from the profile
//! * `limit.<feature>`: operand of the profile's hard constraint on a feature
//! * `compat.<preference>`: compatibility of the item on that dimension
//!
//! Placeholders are written `{name}`. When `labels` has an entry for the name,
//! the rendered value is looked up there first.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::{Expr, ExprError};
use crate::catalog::{DomainId, DomainSpec, Value};
use crate::preferences::{PreferenceProfile, SoftPreference};
use crate::recommender::ScoredItem;
use crate::catalog::Item;

pub const RECIPE_RULES_JSON: &str = include_str!("../../data/rules/recipe.json");
pub const APARTMENT_RULES_JSON: &str = include_str!("../../data/rules/apartment.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub motivating: String,
    pub avoiding: String,
    pub downside: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsequenceRule {
    pub id: String,
    pub domain: DomainId,
    /// Importance, 1 = most important.
    pub rank: u32,
    /// Soft preference that must be fulfilled for the consequence to apply and
    /// whose violation yields this rule's downside.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<String>,
    /// Key under which participants rate the importance of this consequence.
    pub topic: String,
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default)]
    pub trigger: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, BTreeMap<String, String>>,
    pub templates: Templates,
    #[serde(skip)]
    compiled: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("cannot parse rule file: {0}")]
    Parse(String),
    #[error("rule `{rule_id}`: bad trigger: {source}")]
    Trigger { rule_id: String, source: ExprError },
    #[error("rule `{rule_id}`: {reason}")]
    Invalid { rule_id: String, reason: String },
    #[error("rule `{rule_id}`: placeholder `{{{placeholder}}}` cannot be resolved")]
    Unresolved { rule_id: String, placeholder: String },
    #[error("rules `{0}` and `{1}` share an importance rank")]
    DuplicateRank(String, String),
    #[error("rule id `{0}` used twice")]
    DuplicateId(String),
}

impl RuleError {
    pub fn rule_id(&self) -> Option<&str> {
        match self {
            RuleError::Trigger { rule_id, .. }
            | RuleError::Invalid { rule_id, .. }
            | RuleError::Unresolved { rule_id, .. } => Some(rule_id),
            RuleError::DuplicateRank(a, _) | RuleError::DuplicateId(a) => Some(a),
            RuleError::Parse(_) => None,
        }
    }
}

/// Splits a template into literal text and placeholder names.
pub(crate) fn placeholders(template: &str) -> Result<Vec<Segment<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err("unbalanced `}`".into());
        }
        let close = rest[open..].find('}').ok_or("unbalanced `{`")? + open;
        let name = &rest[open + 1..close];
        if name.is_empty() || name.contains('{') {
            return Err(format!("bad placeholder `{{{name}}}`"));
        }
        if open > 0 {
            out.push(Segment::Text(&rest[..open]));
        }
        out.push(Segment::Placeholder(name));
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Segment<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

/// Whether `name` is a valid input name in the domain.
fn known_name(name: &str, spec: &DomainSpec) -> bool {
    match name.split_once('.') {
        Some(("item", f)) => spec.feature(f).is_some(),
        Some(("limit", f)) => spec.is_hard(f),
        Some(("pref" | "compat", p)) => SoftPreference::parse(spec.domain, p).is_some(),
        _ => false,
    }
}

impl ConsequenceRule {
    fn trigger_expr(&self) -> &Expr {
        self.compiled.as_ref().expect("rules are compiled on load")
    }

    pub fn dimension(&self) -> Option<SoftPreference> {
        self.dimension.as_deref().and_then(|d| SoftPreference::parse(self.domain, d))
    }

    fn invalid(&self, reason: impl Into<String>) -> RuleError {
        RuleError::Invalid { rule_id: self.id.clone(), reason: reason.into() }
    }

    /// Checks the rule against the domain and compiles its trigger.
    fn compile(&mut self, spec: &DomainSpec) -> Result<(), RuleError> {
        if self.domain != spec.domain {
            return Err(self.invalid(format!("domain `{}` but the rule set is for `{}`", self.domain, spec.domain)));
        }
        if self.rank == 0 {
            return Err(self.invalid("rank must be positive"));
        }
        if self.topic.trim().is_empty() {
            return Err(self.invalid("empty topic"));
        }
        if let Some(d) = &self.dimension {
            if SoftPreference::parse(spec.domain, d).is_none() {
                return Err(self.invalid(format!("unknown dimension `{d}`")));
            }
        }
        if let Some(f) = self.features.iter().find(|f| spec.feature(f).is_none()) {
            return Err(self.invalid(format!("unknown feature `{f}`")));
        }
        let expr = Expr::parse(&self.trigger)
            .map_err(|source| RuleError::Trigger { rule_id: self.id.clone(), source })?;
        if let Some(n) = expr.names().into_iter().find(|n| !known_name(n, spec)) {
            return Err(self.invalid(format!("trigger refers to unknown name `{n}`")));
        }
        let t = &self.templates;
        for (which, text) in [("motivating", &t.motivating), ("avoiding", &t.avoiding), ("downside", &t.downside)] {
            if text.trim().is_empty() {
                return Err(self.invalid(format!("empty {which} template")));
            }
            for seg in placeholders(text).map_err(|e| self.invalid(format!("{which} template: {e}")))? {
                if let Segment::Placeholder(name) = seg {
                    if !known_name(name, spec) {
                        return Err(self.invalid(format!("{which} template: unknown placeholder `{{{name}}}`")));
                    }
                }
            }
        }
        self.compiled = Some(expr);
        Ok(())
    }

    pub fn is_triggered(&self, inputs: &RuleInputs<'_>) -> bool {
        self.trigger_expr().eval(&|name| inputs.lookup(name))
    }

    /// Fills a template's placeholders.
    pub fn render(&self, template: &str, inputs: &RuleInputs<'_>) -> Result<String, RuleError> {
        let segments = placeholders(template).map_err(|e| self.invalid(e))?;
        let mut out = String::with_capacity(template.len() + 16);
        for seg in segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Placeholder(name) => {
                    let value = inputs.lookup(name).ok_or_else(|| RuleError::Unresolved {
                        rule_id: self.id.clone(),
                        placeholder: name.to_string(),
                    })?;
                    let shown = value.to_string();
                    match self.labels.get(name).and_then(|m| m.get(&shown)) {
                        Some(label) => out.push_str(label),
                        None => out.push_str(&shown),
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Named inputs a rule is evaluated against.
pub struct RuleInputs<'a> {
    pub item: &'a Item,
    pub profile: &'a PreferenceProfile,
    pub scored: &'a ScoredItem,
}

impl RuleInputs<'_> {
    pub fn lookup(&self, name: &str) -> Option<Value> {
        let (ns, key) = name.split_once('.')?;
        match ns {
            "item" => self.item.feature(key).cloned(),
            "pref" => self.profile.soft.get(key).cloned(),
            "limit" => self.profile.hard.get(key).map(|c| c.operand()),
            "compat" => self.scored.contributions.get(key).map(|c| Value::Number(c.compatibility)),
            _ => None,
        }
    }
}

/// A validated rule set for one domain, sorted by rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub domain: DomainId,
    rules: Vec<ConsequenceRule>,
}

impl RuleSet {
    pub fn empty(domain: DomainId) -> Self {
        RuleSet { domain, rules: Vec::new() }
    }

    pub fn new(spec: &DomainSpec, mut rules: Vec<ConsequenceRule>) -> Result<Self, RuleError> {
        let mut ids = BTreeSet::new();
        let mut ranks: BTreeMap<u32, String> = BTreeMap::new();
        for rule in &mut rules {
            rule.compile(spec)?;
            if !ids.insert(rule.id.clone()) {
                return Err(RuleError::DuplicateId(rule.id.clone()));
            }
            if let Some(other) = ranks.insert(rule.rank, rule.id.clone()) {
                return Err(RuleError::DuplicateRank(other, rule.id.clone()));
            }
        }
        rules.sort_by_key(|r| r.rank);
        Ok(RuleSet { domain: spec.domain, rules })
    }

    pub fn from_json(source: &str, spec: &DomainSpec) -> Result<Self, RuleError> {
        let rules: Vec<ConsequenceRule> = serde_json::from_str(source).map_err(|e| RuleError::Parse(e.to_string()))?;
        Self::new(spec, rules)
    }

    pub fn rules(&self) -> &[ConsequenceRule] {
        &self.rules
    }

    pub fn get(&self, id: &str) -> Option<&ConsequenceRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Lowest-ranked rule governing a soft preference dimension.
    pub fn governing(&self, pref: SoftPreference) -> Option<&ConsequenceRule> {
        self.rules.iter().find(|r| r.dimension() == Some(pref))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rules).expect("rules serialize")
    }
}

/// The rule set shipped for a domain.
pub fn builtin_rules(domain: DomainId) -> RuleSet {
    let source = match domain {
        DomainId::Recipe => RECIPE_RULES_JSON,
        DomainId::Apartment => APARTMENT_RULES_JSON,
    };
    RuleSet::from_json(source, &crate::catalog::builtin_spec(domain)).expect("bundled rules are valid")
}
