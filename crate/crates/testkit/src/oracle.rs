//! Brute-force reference implementations.

use conseq_core::catalog::{Catalog, FeatureKind, Item, Value};
use conseq_core::preferences::{HardConstraint, PreferenceProfile};
use conseq_core::recommender::{ScoringConfig, WeightVector};

/// Whether one item passes one constraint, by exhaustive reading of the rule.
fn passes(item: &Item, catalog: &Catalog, feature: &str, constraint: &HardConstraint) -> bool {
    let Some(value) = item.features.get(feature) else { return false };
    let schema = catalog.spec.features.iter().find(|f| f.id == feature).expect("feature in schema");
    match (constraint, value) {
        (HardConstraint::Equals(want), Value::Text(v)) => v == want,
        (HardConstraint::AnyOf(list), Value::Text(v)) => list.iter().any(|x| x == v),
        (HardConstraint::AtMost(limit), Value::Number(v)) => *v <= *limit,
        (HardConstraint::Excludes(list), Value::Set(v)) => !v.iter().any(|x| list.iter().any(|y| y == x)),
        (HardConstraint::OrdinalAtMost(limit), Value::Text(v)) => match &schema.kind {
            FeatureKind::Categorical { values, ordinal: true } => {
                // every value at or below the limit in the declared order
                let allowed: Vec<&String> = values.iter().take_while(|x| *x != limit).chain(values.iter().filter(|x| *x == limit)).collect();
                allowed.contains(&v)
            }
            _ => false,
        },
        _ => false,
    }
}

/// Ids of the items passing every hard constraint, in catalog order.
pub fn candidates(catalog: &Catalog, profile: &PreferenceProfile) -> Vec<String> {
    let mut out = Vec::new();
    for item in &catalog.items {
        let mut ok = true;
        for (feature, constraint) in &profile.hard {
            if !passes(item, catalog, feature, constraint) {
                ok = false;
            }
        }
        if ok {
            out.push(item.id.clone());
        }
    }
    out
}

fn number(item: &Item, f: &str) -> f64 {
    match item.features[f] {
        Value::Number(n) => n,
        _ => panic!("{f} is not numeric"),
    }
}

fn band(v: f64, lo: f64, hi: f64, decay: f64) -> f64 {
    let d = if v < lo { lo - v } else if v > hi { v - hi } else { 0.0 };
    f64::max(0.0, f64::min(1.0, 1.0 - d / decay))
}

/// Compatibility of one soft dimension, straight from the documented formulas.
pub fn compatibility(item: &Item, catalog: &Catalog, profile: &PreferenceProfile, pref: &str, cfg: &ScoringConfig) -> f64 {
    let target = &profile.soft[pref];
    match pref {
        "favorite_cuisine" => {
            let same = matches!((&item.features["cuisine"], target), (Value::Text(a), Value::Text(b)) if a == b);
            if same { 1.0 } else { 0.0 }
        }
        "activity_level" => {
            let [lo, hi] = cfg.activity_bands[target.as_text().unwrap()];
            band(number(item, "calories"), lo, hi, cfg.band_decay)
        }
        "weight_aim" => {
            let level = profile.soft.get("activity_level").and_then(Value::as_text).unwrap_or(&cfg.default_activity_level);
            let [lo, hi] = cfg.activity_bands[level];
            let shift = match target.as_text().unwrap() {
                "lose" => -cfg.weight_aim_shift,
                "gain" => cfg.weight_aim_shift,
                _ => 0.0,
            };
            band(number(item, "calories"), lo + shift, hi + shift, cfg.band_decay)
        }
        "children_count" => {
            let needed = target.as_number().unwrap() + 1.0;
            let have = number(item, "bedrooms");
            if have >= needed { 1.0 } else { f64::max(0.0, 1.0 - cfg.bedroom_penalty * (needed - have)) }
        }
        "car_available" => {
            let car = target.as_bool().unwrap();
            let parking = item.features["private_parking"].as_bool().unwrap();
            if car && !parking { 0.0 } else { 1.0 }
        }
        "leisure_activities" => {
            let d = number(item, "distance_leisure");
            let width = match catalog.spec.features.iter().find(|f| f.id == "distance_leisure").unwrap().kind {
                FeatureKind::Numeric { min, max } => max - min,
                _ => unreachable!(),
            };
            if d <= cfg.leisure_threshold_km { 1.0 } else { f64::max(0.0, 1.0 - (d - cfg.leisure_threshold_km) / width) }
        }
        other => panic!("unknown preference {other}"),
    }
}

/// Weighted mean utility of an item.
pub fn utility(item: &Item, catalog: &Catalog, profile: &PreferenceProfile, weights: &WeightVector, cfg: &ScoringConfig) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for pref in profile.soft.keys() {
        let w = weights.weight(pref);
        num += w * compatibility(item, catalog, profile, pref, cfg);
        den += w;
    }
    num / den
}

/// Full ranking by repeated selection of the best remaining candidate:
/// higher utility at 1e-9 resolution first, lower id on ties.
pub fn ranking(catalog: &Catalog, profile: &PreferenceProfile, weights: &WeightVector, cfg: &ScoringConfig) -> Vec<String> {
    let ids = candidates(catalog, profile);
    let mut pool: Vec<(String, i64)> = ids
        .into_iter()
        .map(|id| {
            let item = catalog.items.iter().find(|i| i.id == id).unwrap();
            let u = utility(item, catalog, profile, weights, cfg);
            (id, (u * 1e9).round() as i64)
        })
        .collect();
    let mut out = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (ref id, key) = pool[i];
            let (ref best_id, best_key) = pool[best];
            if key > best_key || (key == best_key && id < best_id) {
                best = i;
            }
        }
        out.push(pool.remove(best).0);
    }
    out
}

/// Two-sided exact Mann-Whitney p-value by enumerating every split of the
/// pooled sample into groups of the original sizes. Tie-free input only.
pub fn mann_whitney_enumerated(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let m = a.len();
    // rank = 1 + number of smaller values; U of a group is its rank sum minus m(m+1)/2
    let ranks: Vec<f64> = pooled.iter().map(|x| 1.0 + pooled.iter().filter(|y| *y < x).count() as f64).collect();
    let u_of = |mask: u32| -> f64 {
        let rank_sum: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        rank_sum - (m * (m + 1)) as f64 / 2.0
    };
    let total_pairs = (m * (n - m)) as f64;
    let observed = u_of((1u32 << m) - 1);
    let observed_min = observed.min(total_pairs - observed);
    let mut hits = 0u64;
    let mut all = 0u64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        all += 1;
        let u = u_of(mask);
        if u.min(total_pairs - u) <= observed_min {
            hits += 1;
        }
    }
    (observed_min, hits as f64 / all as f64)
}
