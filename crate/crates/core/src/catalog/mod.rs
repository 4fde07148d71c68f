//! Domain schemas, items and catalog loading.
//!
//! A catalog file is a JSON document of the form
//!
//! ```json
//! { "domain": "recipe",
//!   "items": [ { "id": "r01", "title": "...", "description": "...",
//!                "image": "img/r01.png", "features": { "cuisine": "italian", ... } } ] }
//! ```
//!
//! Loading validates every item against the governing [`DomainSpec`] and reports
//! all violations found, not only the first one.

mod builtin;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin_catalog, builtin_domains, builtin_spec, APARTMENT_CATALOG_JSON, RECIPE_CATALOG_JSON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainId {
    Recipe,
    Apartment,
}

impl DomainId {
    pub const ALL: [DomainId; 2] = [DomainId::Recipe, DomainId::Apartment];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainId::Recipe => "recipe",
            DomainId::Apartment => "apartment",
        }
    }

    /// Noun used in generated text ("This recipe is recommended ...").
    pub fn item_noun(self) -> &'static str {
        match self {
            DomainId::Recipe => "recipe",
            DomainId::Apartment => "apartment",
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown domain `{0}`")]
pub struct UnknownDomain(pub String);

impl FromStr for DomainId {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "recipe" => Ok(DomainId::Recipe),
            "apartment" => Ok(DomainId::Apartment),
            other => Err(UnknownDomain(other.to_string())),
        }
    }
}

/// A feature or preference value as it appears in catalog and profile files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Text(String),
    Set(Vec<String>),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&[String]> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Number(_) => "number",
            Value::Text(_) => "text",
            Value::Set(_) => "list",
        }
    }
}

/// Human-readable rendering used in explanation text.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => f.write_str("yes"),
            Value::Bool(false) => f.write_str("no"),
            Value::Number(n) => f.write_str(&format_number(*n)),
            Value::Text(s) => f.write_str(s),
            Value::Set(items) => f.write_str(&natural_list(items)),
        }
    }
}

/// Formats a number with at most two decimals and no trailing zeros.
pub fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        return format!("{}", n as i64);
    }
    let s = format!("{n:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// "a", "a and b", "a, b, and c".
pub fn natural_list<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [one] => one.as_ref().to_string(),
        [a, b] => format!("{} and {}", a.as_ref(), b.as_ref()),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{}, and {}", head.join(", "), last.as_ref())
        }
    }
}

/// Kind and admissible values of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// Single value from `values`. When `ordinal` is set the list order is the
    /// rank order used by ordinal constraints.
    Categorical {
        values: Vec<String>,
        #[serde(default)]
        ordinal: bool,
    },
    /// Decimal value within the inclusive range.
    Numeric { min: f64, max: f64 },
    Boolean,
    /// Any subset of `values`.
    CategoricalSet { values: Vec<String> },
}

impl FeatureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureKind::Categorical { .. } => "categorical",
            FeatureKind::Numeric { .. } => "numeric",
            FeatureKind::Boolean => "boolean",
            FeatureKind::CategoricalSet { .. } => "set-of-categorical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub id: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Display label used in content-based explanations.
    pub label: String,
}

impl FeatureSchema {
    /// Checks a value against the kind and admissible values.
    pub fn check(&self, value: &Value) -> Result<(), String> {
        match (&self.kind, value) {
            (FeatureKind::Categorical { values, .. }, Value::Text(v)) => {
                if values.iter().any(|a| a == v) {
                    Ok(())
                } else {
                    Err(format!("`{v}` is not one of {values:?}"))
                }
            }
            (FeatureKind::Numeric { min, max }, Value::Number(n)) => {
                if !n.is_finite() {
                    Err(format!("{n} is not finite"))
                } else if n < min {
                    Err(format!("{n} is below the lower bound {min}"))
                } else if n > max {
                    Err(format!("{n} is above the upper bound {max}"))
                } else {
                    Ok(())
                }
            }
            (FeatureKind::Boolean, Value::Bool(_)) => Ok(()),
            (FeatureKind::CategoricalSet { values }, Value::Set(items)) => {
                let mut seen = BTreeSet::new();
                for v in items {
                    if !values.iter().any(|a| a == v) {
                        return Err(format!("`{v}` is not one of {values:?}"));
                    }
                    if !seen.insert(v) {
                        return Err(format!("`{v}` is listed twice"));
                    }
                }
                Ok(())
            }
            (kind, v) => Err(format!("expected a {} value, found {}", kind.name(), v.type_name())),
        }
    }

    /// Rank of a categorical value in an ordinal feature.
    pub fn ordinal_rank(&self, value: &str) -> Option<usize> {
        match &self.kind {
            FeatureKind::Categorical { values, .. } => values.iter().position(|v| v == value),
            _ => None,
        }
    }

    pub fn is_ordinal(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { ordinal: true, .. })
    }

    /// Width of a numeric range, `None` for other kinds.
    pub fn range_width(&self) -> Option<f64> {
        match self.kind {
            FeatureKind::Numeric { min, max } => Some(max - min),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain: DomainId,
    pub features: Vec<FeatureSchema>,
    pub hard_feature_ids: Vec<String>,
    pub soft_feature_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("feature `{0}` declared twice")]
    DuplicateFeature(String),
    #[error("feature `{0}`: lower bound exceeds upper bound")]
    InvertedRange(String),
    #[error("feature `{0}`: allowed values are empty or contain duplicates")]
    BadAllowedValues(String),
    #[error("feature `{0}` is listed as both hard and soft")]
    OverlappingPartition(String),
    #[error("partition references undeclared feature `{0}`")]
    UndeclaredFeature(String),
}

impl DomainSpec {
    pub fn feature(&self, id: &str) -> Option<&FeatureSchema> {
        self.features.iter().find(|f| f.id == id)
    }

    pub fn is_hard(&self, id: &str) -> bool {
        self.hard_feature_ids.iter().any(|h| h == id)
    }

    /// Checks the schema invariants: unique ids, sane ranges and value lists,
    /// and a disjoint hard/soft partition over declared features.
    pub fn validate(&self) -> Result<(), SpecError> {
        let mut ids = BTreeSet::new();
        for f in &self.features {
            if !ids.insert(f.id.as_str()) {
                return Err(SpecError::DuplicateFeature(f.id.clone()));
            }
            match &f.kind {
                FeatureKind::Numeric { min, max } if min > max => {
                    return Err(SpecError::InvertedRange(f.id.clone()))
                }
                FeatureKind::Categorical { values, .. } | FeatureKind::CategoricalSet { values } => {
                    let distinct: BTreeSet<_> = values.iter().collect();
                    if values.is_empty() || distinct.len() != values.len() {
                        return Err(SpecError::BadAllowedValues(f.id.clone()));
                    }
                }
                _ => {}
            }
        }
        for id in self.hard_feature_ids.iter().chain(&self.soft_feature_ids) {
            if !ids.contains(id.as_str()) {
                return Err(SpecError::UndeclaredFeature(id.clone()));
            }
        }
        if let Some(both) = self.hard_feature_ids.iter().find(|h| self.soft_feature_ids.contains(h)) {
            return Err(SpecError::OverlappingPartition(both.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub features: BTreeMap<String, Value>,
}

impl Item {
    pub fn feature(&self, id: &str) -> Option<&Value> {
        self.features.get(id)
    }

    pub fn number(&self, id: &str) -> Option<f64> {
        self.features.get(id).and_then(Value::as_number)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub spec: DomainSpec,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub item_id: String,
    pub feature_id: String,
    pub reason: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item `{}`, feature `{}`: {}", self.item_id, self.feature_id, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: DomainId, found: DomainId },
    #[error("duplicate item id `{0}`")]
    DuplicateId(String),
    #[error("schema violations:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    SchemaViolation(Vec<SchemaViolation>),
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    domain: DomainId,
    items: Vec<Item>,
}

impl Catalog {
    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Serializes back to the catalog file format.
    pub fn to_json(&self) -> String {
        let file = CatalogFile { domain: self.spec.domain, items: self.items.clone() };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }
}

/// Lists every schema violation of one item.
pub fn item_violations(item: &Item, spec: &DomainSpec) -> Vec<SchemaViolation> {
    let violation = |feature_id: &str, reason: String| SchemaViolation {
        item_id: item.id.clone(),
        feature_id: feature_id.to_string(),
        reason,
    };
    let mut out = Vec::new();
    for (id, value) in &item.features {
        match spec.feature(id) {
            None => out.push(violation(id, "unknown feature".into())),
            Some(schema) => {
                if let Err(reason) = schema.check(value) {
                    out.push(violation(id, reason));
                }
            }
        }
    }
    for schema in &spec.features {
        if !item.features.contains_key(&schema.id) {
            out.push(violation(&schema.id, "missing feature".into()));
        }
    }
    out
}

/// Parses and validates a catalog file against `spec`.
pub fn load_catalog<R: Read>(source: R, spec: &DomainSpec) -> Result<Catalog, CatalogError> {
    let file: CatalogFile = serde_json::from_reader(source)?;
    if file.domain != spec.domain {
        return Err(CatalogError::DomainMismatch { expected: spec.domain, found: file.domain });
    }
    let mut seen = BTreeSet::new();
    for item in &file.items {
        if !seen.insert(item.id.as_str()) {
            return Err(CatalogError::DuplicateId(item.id.clone()));
        }
    }
    let violations: Vec<_> = file.items.iter().flat_map(|i| item_violations(i, spec)).collect();
    if !violations.is_empty() {
        return Err(CatalogError::SchemaViolation(violations));
    }
    Ok(Catalog { spec: spec.clone(), items: file.items })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apartment_item(rent: f64) -> String {
        format!(
            r#"{{"domain":"apartment","items":[{{"id":"x1","title":"t","description":"d",
            "features":{{"size":50,"rent":{rent},"bedrooms":2,"distance_city_center":3,
            "private_parking":true,"private_garden":false,"distance_leisure":1}}}}]}}"#
        )
    }

    #[test]
    fn builtin_specs_are_valid_and_distinct() {
        let specs = builtin_domains();
        assert_eq!(specs.len(), 2);
        assert_ne!(specs[0].domain, specs[1].domain);
        for s in &specs {
            s.validate().unwrap();
        }
    }

    #[test]
    fn recipe_cooking_time_in_minutes() {
        let spec = builtin_spec(DomainId::Recipe);
        assert_eq!(spec.feature("cooking_time").unwrap().unit.as_deref(), Some("minutes"));
        for f in ["cuisine", "difficulty", "diet", "calories", "carbs", "sugar", "protein", "fat"] {
            assert!(spec.feature(f).is_some(), "{f}");
        }
        assert!(matches!(spec.feature("allergens").unwrap().kind, FeatureKind::CategoricalSet { .. }));
    }

    #[test]
    fn apartment_hard_features() {
        let spec = builtin_spec(DomainId::Apartment);
        let hard: BTreeSet<_> = spec.hard_feature_ids.iter().map(String::as_str).collect();
        assert_eq!(hard, BTreeSet::from(["rent", "distance_city_center"]));
        assert!(matches!(spec.feature("private_garden").unwrap().kind, FeatureKind::Boolean));
    }

    #[test]
    fn fixtures_have_twenty_items() {
        for d in DomainId::ALL {
            assert_eq!(builtin_catalog(d).items.len(), 20);
        }
    }

    #[test]
    fn empty_catalog_is_valid() {
        let spec = builtin_spec(DomainId::Recipe);
        let c = load_catalog(r#"{"domain":"recipe","items":[]}"#.as_bytes(), &spec).unwrap();
        assert!(c.items.is_empty());
    }

    #[test]
    fn rent_below_range_is_rejected() {
        let spec = builtin_spec(DomainId::Apartment);
        assert!(load_catalog(apartment_item(600.0).as_bytes(), &spec).is_ok());
        match load_catalog(apartment_item(100.0).as_bytes(), &spec) {
            Err(CatalogError::SchemaViolation(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].feature_id, "rent");
                assert_eq!(v[0].item_id, "x1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_parse_errors() {
        let spec = builtin_spec(DomainId::Recipe);
        let base = builtin_catalog(DomainId::Recipe);
        let mut items = base.items.clone();
        items.push(items[0].clone());
        let json = serde_json::to_string(&CatalogFile { domain: DomainId::Recipe, items }).unwrap();
        assert!(matches!(load_catalog(json.as_bytes(), &spec), Err(CatalogError::DuplicateId(id)) if id == "r01"));
        assert!(matches!(load_catalog("{".as_bytes(), &spec), Err(CatalogError::Parse(_))));
    }

    #[test]
    fn unknown_and_missing_features_named() {
        let spec = builtin_spec(DomainId::Apartment);
        let json = r#"{"domain":"apartment","items":[{"id":"x","title":"t","description":"d",
            "features":{"size":50,"rent":600,"bedrooms":2,"distance_city_center":3,
            "private_parking":"yes","distance_leisure":1,"pool":true}}]}"#;
        let Err(CatalogError::SchemaViolation(v)) = load_catalog(json.as_bytes(), &spec) else {
            panic!("expected violations");
        };
        let named: BTreeSet<_> = v.iter().map(|v| v.feature_id.as_str()).collect();
        assert_eq!(named, BTreeSet::from(["pool", "private_garden", "private_parking"]));
    }

    #[test]
    fn round_trip_preserves_catalog() {
        for d in DomainId::ALL {
            let c = builtin_catalog(d);
            let again = load_catalog(c.to_json().as_bytes(), &c.spec).unwrap();
            assert_eq!(c, again);
        }
    }

    #[test]
    fn spec_validation_catches_bad_schemas() {
        let mut spec = builtin_spec(DomainId::Apartment);
        spec.soft_feature_ids.push("rent".into());
        assert_eq!(spec.validate(), Err(SpecError::OverlappingPartition("rent".into())));

        let mut spec = builtin_spec(DomainId::Apartment);
        spec.features[0].kind = FeatureKind::Numeric { min: 5.0, max: 1.0 };
        assert!(matches!(spec.validate(), Err(SpecError::InvertedRange(_))));

        let mut spec = builtin_spec(DomainId::Recipe);
        spec.features[0].kind = FeatureKind::Categorical { values: vec![], ordinal: false };
        assert!(matches!(spec.validate(), Err(SpecError::BadAllowedValues(_))));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(25.0), "25");
        assert_eq!(format_number(1.2), "1.2");
        assert_eq!(format_number(8.256), "8.26");
        assert_eq!(natural_list(&["a"]), "a");
        assert_eq!(natural_list(&["a", "b"]), "a and b");
        assert_eq!(natural_list(&["a", "b", "c"]), "a, b, and c");
    }
}
