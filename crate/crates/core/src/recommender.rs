//! Two-step recommendation: hard-constraint filtering, then multi-attribute
//! utility ranking.
//!
//! The utility of an item is the weighted mean of per-dimension compatibilities,
//! `Σ w·c / Σ w`, over the profile's soft preferences. Each compatibility lies
//! in `[0, 1]`; the breakdown is kept on the [`ScoredItem`] so explanations can
//! tell which preferences an item fulfils.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, DomainSpec, FeatureKind, FeatureSchema, Item, Value};
use crate::preferences::{PreferenceProfile, SoftPreference};

/// Constants of the derived-dimension rules. These are tunable settings, the
/// defaults are documented in the README.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    /// Target calories per meal for each activity level, `[low, high]`.
    pub activity_bands: BTreeMap<String, [f64; 2]>,
    /// Band used by `weight_aim` when the profile states no activity level.
    pub default_activity_level: String,
    /// Shift of the calorie band for `lose` (negative) and `gain` (positive).
    pub weight_aim_shift: f64,
    /// Distance outside a calorie band at which compatibility reaches 0.
    pub band_decay: f64,
    /// Compatibility lost per missing bedroom.
    pub bedroom_penalty: f64,
    /// Leisure facilities within this distance count as a full match.
    pub leisure_threshold_km: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        let bands = [
            ("sedentary", [400.0, 600.0]),
            ("light", [500.0, 700.0]),
            ("moderate", [600.0, 800.0]),
            ("very_active", [700.0, 1000.0]),
        ];
        ScoringConfig {
            activity_bands: bands.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            default_activity_level: "moderate".into(),
            weight_aim_shift: 150.0,
            band_decay: 300.0,
            bedroom_penalty: 0.5,
            leisure_threshold_km: 2.0,
        }
    }
}

impl ScoringConfig {
    fn activity_band(&self, level: Option<&str>) -> [f64; 2] {
        let level = level.unwrap_or(&self.default_activity_level);
        self.activity_bands
            .get(level)
            .or_else(|| self.activity_bands.get(&self.default_activity_level))
            .copied()
            .unwrap_or([0.0, f64::INFINITY])
    }

    /// Calorie band of the `weight_aim` dimension.
    pub fn weight_band(&self, activity_level: Option<&str>, aim: &str) -> [f64; 2] {
        let [lo, hi] = self.activity_band(activity_level);
        let shift = match aim {
            "lose" => -self.weight_aim_shift,
            "gain" => self.weight_aim_shift,
            _ => 0.0,
        };
        [lo + shift, hi + shift]
    }
}

/// Non-negative weight per soft preference id. Preferences without an entry
/// get `default_weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    #[serde(flatten)]
    pub weights: BTreeMap<String, f64>,
    #[serde(skip, default = "one")]
    pub default_weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for WeightVector {
    fn default() -> Self {
        Self::uniform()
    }
}

impl WeightVector {
    pub fn uniform() -> Self {
        WeightVector { weights: BTreeMap::new(), default_weight: 1.0 }
    }

    pub fn with(mut self, pref: &str, weight: f64) -> Self {
        self.weights.insert(pref.to_string(), weight);
        self
    }

    pub fn weight(&self, pref: &str) -> f64 {
        self.weights.get(pref).copied().unwrap_or(self.default_weight)
    }

    /// Parses a weight file, a flat JSON object of preference id to weight.
    pub fn from_json(source: &str) -> Result<Self, RecommendError> {
        let w: WeightVector =
            serde_json::from_str(source).map_err(|e| RecommendError::BadWeights(e.to_string()))?;
        if let Some((id, v)) = w.weights.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(RecommendError::BadWeights(format!("weight of `{id}` is {v}")));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub compatibility: f64,
    /// `w·c / Σw`; the shares sum to the utility.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item_id: String,
    pub utility: f64,
    pub contributions: BTreeMap<String, Contribution>,
}

impl ScoredItem {
    pub fn compatibility(&self, pref: SoftPreference) -> Option<f64> {
        self.contributions.get(pref.id()).map(|c| c.compatibility)
    }
}

/// Items closest to passing the filter, with the hard constraints each violates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearMiss {
    pub item_id: String,
    pub violated: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecommendError {
    #[error("unknown preference `{0}`")]
    UnknownPreference(String),
    #[error("preference `{pref}` has an unusable target {target:?}")]
    BadTarget { pref: String, target: Value },
    #[error("item `{item}` lacks feature `{feature}`")]
    MissingFeature { item: String, feature: String },
    #[error("profile has no weighted soft preferences")]
    EmptySoftSet,
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("no item satisfies the hard constraints; {}", NearMisses(.0))]
    NoCandidate(Vec<NearMiss>),
}

struct NearMisses<'a>(&'a [NearMiss]);

impl fmt::Display for NearMisses<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("the catalog is empty");
        }
        f.write_str("nearest misses:")?;
        for m in self.0 {
            write!(f, " {} (violates {})", m.item_id, m.violated.join(", "))?;
        }
        Ok(())
    }
}

/// Hard constraints of `profile` that `item` violates, by feature id.
pub fn hard_violations(item: &Item, profile: &PreferenceProfile, spec: &DomainSpec) -> Vec<String> {
    profile
        .hard
        .iter()
        .filter(|(feature, constraint)| {
            match (spec.feature(feature), item.feature(feature)) {
                (Some(schema), Some(value)) => !constraint.is_satisfied(value, schema),
                _ => true,
            }
        })
        .map(|(feature, _)| feature.clone())
        .collect()
}

/// Items satisfying every hard constraint, in catalog order.
pub fn generate_candidates<'a>(catalog: &'a Catalog, profile: &PreferenceProfile) -> Vec<&'a Item> {
    catalog.items.iter().filter(|item| hard_violations(item, profile, &catalog.spec).is_empty()).collect()
}

/// Compatibility of an item value with a target under the generic per-kind rule:
/// equality for categorical and boolean values, `1 − |v − t| / range width`
/// clamped to `[0, 1]` for numbers, Jaccard overlap for sets.
pub fn feature_compatibility(schema: &FeatureSchema, value: &Value, target: &Value) -> Option<f64> {
    match (&schema.kind, value, target) {
        (FeatureKind::Categorical { .. }, Value::Text(v), Value::Text(t)) => Some(indicator(v == t)),
        (FeatureKind::Boolean, Value::Bool(v), Value::Bool(t)) => Some(indicator(v == t)),
        (FeatureKind::Numeric { min, max }, Value::Number(v), Value::Number(t)) => {
            let width = max - min;
            if width <= 0.0 {
                return Some(indicator(v == t));
            }
            Some((1.0 - (v - t).abs() / width).clamp(0.0, 1.0))
        }
        (FeatureKind::CategoricalSet { .. }, Value::Set(v), Value::Set(t)) => {
            let union = v.iter().chain(t.iter().filter(|x| !v.contains(x))).count();
            if union == 0 {
                return Some(1.0);
            }
            let common = v.iter().filter(|x| t.contains(x)).count();
            Some(common as f64 / union as f64)
        }
        _ => None,
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// 1 inside `[lo, hi]`, decaying linearly to 0 at `decay` outside.
fn band_compatibility(value: f64, [lo, hi]: [f64; 2], decay: f64) -> f64 {
    let outside = if value < lo {
        lo - value
    } else if value > hi {
        value - hi
    } else {
        0.0
    };
    (1.0 - outside / decay).clamp(0.0, 1.0)
}

/// Scores one soft preference dimension of an item.
///
/// `profile` supplies context for dimensions that depend on each other
/// (`weight_aim` shifts the band of the stated `activity_level`).
pub fn compatibility(
    item: &Item,
    pref_id: &str,
    target: &Value,
    profile: &PreferenceProfile,
    spec: &DomainSpec,
    config: &ScoringConfig,
) -> Result<f64, RecommendError> {
    let pref = SoftPreference::parse(spec.domain, pref_id)
        .ok_or_else(|| RecommendError::UnknownPreference(pref_id.to_string()))?;
    let bad_target = || RecommendError::BadTarget { pref: pref_id.to_string(), target: target.clone() };
    let feature = pref.features()[0];
    let value = item
        .feature(feature)
        .ok_or_else(|| RecommendError::MissingFeature { item: item.id.clone(), feature: feature.to_string() })?;
    let number = || value.as_number().ok_or_else(bad_target);

    match pref {
        SoftPreference::FavoriteCuisine => {
            let schema = spec.feature(feature).ok_or_else(bad_target)?;
            feature_compatibility(schema, value, target).ok_or_else(bad_target)
        }
        SoftPreference::ActivityLevel => {
            let level = target.as_text().ok_or_else(bad_target)?;
            let band = *config.activity_bands.get(level).ok_or_else(bad_target)?;
            Ok(band_compatibility(number()?, band, config.band_decay))
        }
        SoftPreference::WeightAim => {
            let aim = target.as_text().ok_or_else(bad_target)?;
            let level = profile.soft_value(SoftPreference::ActivityLevel).and_then(Value::as_text);
            Ok(band_compatibility(number()?, config.weight_band(level, aim), config.band_decay))
        }
        SoftPreference::ChildrenCount => {
            let children = target.as_number().ok_or_else(bad_target)?;
            let missing = children + 1.0 - number()?;
            if missing <= 0.0 {
                Ok(1.0)
            } else {
                Ok((1.0 - config.bedroom_penalty * missing).max(0.0))
            }
        }
        SoftPreference::CarAvailable => {
            let has_car = target.as_bool().ok_or_else(bad_target)?;
            let parking = value.as_bool().ok_or_else(bad_target)?;
            Ok(indicator(!has_car || parking))
        }
        SoftPreference::LeisureActivities => {
            target.as_set().filter(|s| !s.is_empty()).ok_or_else(bad_target)?;
            let schema = spec.feature(feature).ok_or_else(bad_target)?;
            let width = schema.range_width().ok_or_else(bad_target)?;
            let distance = number()?;
            let excess = distance - config.leisure_threshold_km;
            if excess <= 0.0 {
                Ok(1.0)
            } else {
                Ok((1.0 - excess / width).clamp(0.0, 1.0))
            }
        }
    }
}

/// Scores an item against the profile's soft preferences.
pub fn maut_utility(
    item: &Item,
    profile: &PreferenceProfile,
    weights: &WeightVector,
    spec: &DomainSpec,
    config: &ScoringConfig,
) -> Result<ScoredItem, RecommendError> {
    let mut rows = Vec::with_capacity(profile.soft.len());
    for (id, target) in &profile.soft {
        let c = compatibility(item, id, target, profile, spec, config)?;
        rows.push((id.clone(), weights.weight(id), c));
    }
    let total: f64 = rows.iter().map(|(_, w, _)| w).sum();
    if !(total > 0.0) {
        return Err(RecommendError::EmptySoftSet);
    }
    let utility = rows.iter().map(|(_, w, c)| w * c).sum::<f64>() / total;
    let contributions = rows
        .into_iter()
        .map(|(id, w, c)| (id, Contribution { compatibility: c, share: w * c / total }))
        .collect();
    Ok(ScoredItem { item_id: item.id.clone(), utility: utility.clamp(0.0, 1.0), contributions })
}

/// Utilities are compared at this resolution so that rounding noise from
/// rescaled weights cannot reorder items that tie.
pub const UTILITY_RESOLUTION: f64 = 1e-9;

/// Ranking key used for ordering: quantized utility.
pub fn utility_key(utility: f64) -> i64 {
    (utility / UTILITY_RESOLUTION).round() as i64
}

/// Ordering of the ranked list: utility descending, then item id ascending.
pub fn rank_order(a: &ScoredItem, b: &ScoredItem) -> Ordering {
    utility_key(b.utility).cmp(&utility_key(a.utility)).then_with(|| a.item_id.cmp(&b.item_id))
}

/// Filters the catalog and ranks the remaining candidates. The head of the
/// list is the recommendation.
pub fn recommend(
    catalog: &Catalog,
    profile: &PreferenceProfile,
    weights: &WeightVector,
    config: &ScoringConfig,
) -> Result<Vec<ScoredItem>, RecommendError> {
    let candidates = generate_candidates(catalog, profile);
    if candidates.is_empty() {
        return Err(RecommendError::NoCandidate(nearest_misses(catalog, profile)));
    }
    let mut scored = candidates
        .into_iter()
        .map(|item| maut_utility(item, profile, weights, &catalog.spec, config))
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(rank_order);
    Ok(scored)
}

fn nearest_misses(catalog: &Catalog, profile: &PreferenceProfile) -> Vec<NearMiss> {
    let all: Vec<NearMiss> = catalog
        .items
        .iter()
        .map(|item| NearMiss { item_id: item.id.clone(), violated: hard_violations(item, profile, &catalog.spec) })
        .collect();
    let fewest = all.iter().map(|m| m.violated.len()).min().unwrap_or(0);
    all.into_iter().filter(|m| m.violated.len() == fewest).collect()
}
