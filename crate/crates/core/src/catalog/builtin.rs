use super::{load_catalog, Catalog, DomainId, DomainSpec, FeatureKind, FeatureSchema};

pub const RECIPE_CATALOG_JSON: &str = include_str!("../../data/recipes.json");
pub const APARTMENT_CATALOG_JSON: &str = include_str!("../../data/apartments.json");

fn categorical(id: &str, label: &str, values: &[&str], ordinal: bool) -> FeatureSchema {
    FeatureSchema {
        id: id.into(),
        kind: FeatureKind::Categorical { values: values.iter().map(|v| v.to_string()).collect(), ordinal },
        unit: None,
        label: label.into(),
    }
}

fn numeric(id: &str, label: &str, min: f64, max: f64, unit: &str) -> FeatureSchema {
    FeatureSchema {
        id: id.into(),
        kind: FeatureKind::Numeric { min, max },
        unit: Some(unit.into()),
        label: label.into(),
    }
}

fn boolean(id: &str, label: &str) -> FeatureSchema {
    FeatureSchema { id: id.into(), kind: FeatureKind::Boolean, unit: None, label: label.into() }
}

fn ids(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn recipe_spec() -> DomainSpec {
    DomainSpec {
        domain: DomainId::Recipe,
        features: vec![
            categorical("cuisine", "cuisine", &["italian", "asian", "mexican", "mediterranean"], false),
            categorical("difficulty", "difficulty", &["easy", "medium", "hard"], true),
            // Ordered from most to least restrictive: a vegan dish suits every diet.
            categorical("diet", "diet", &["vegan", "vegetarian", "omnivore"], true),
            numeric("cooking_time", "cooking time", 10.0, 120.0, "minutes"),
            numeric("calories", "calories", 200.0, 1200.0, "kcal"),
            numeric("carbs", "carbs", 0.0, 150.0, "g"),
            numeric("sugar", "sugar", 0.0, 60.0, "g"),
            numeric("protein", "protein", 0.0, 80.0, "g"),
            numeric("fat", "fat", 0.0, 80.0, "g"),
            FeatureSchema {
                id: "allergens".into(),
                kind: FeatureKind::CategoricalSet {
                    values: ids(&["gluten", "dairy", "eggs", "nuts", "soy", "fish", "shellfish"]),
                },
                unit: None,
                label: "ingredients".into(),
            },
        ],
        hard_feature_ids: ids(&["diet", "allergens", "cooking_time", "difficulty"]),
        soft_feature_ids: ids(&["cuisine", "calories", "carbs", "sugar", "protein", "fat"]),
    }
}

fn apartment_spec() -> DomainSpec {
    DomainSpec {
        domain: DomainId::Apartment,
        features: vec![
            numeric("size", "size", 25.0, 150.0, "m²"),
            numeric("rent", "rent", 400.0, 1200.0, "euro"),
            numeric("bedrooms", "number of bedrooms", 1.0, 4.0, "rooms"),
            numeric("distance_city_center", "distance to the city center", 0.5, 15.0, "km"),
            boolean("private_parking", "private parking"),
            boolean("private_garden", "private garden"),
            numeric("distance_leisure", "distance to leisure facilities", 0.1, 10.0, "km"),
        ],
        hard_feature_ids: ids(&["rent", "distance_city_center"]),
        soft_feature_ids: ids(&["bedrooms", "private_parking", "distance_leisure"]),
    }
}

/// The recipe and apartment schemas.
pub fn builtin_domains() -> Vec<DomainSpec> {
    vec![recipe_spec(), apartment_spec()]
}

pub fn builtin_spec(domain: DomainId) -> DomainSpec {
    match domain {
        DomainId::Recipe => recipe_spec(),
        DomainId::Apartment => apartment_spec(),
    }
}

/// The bundled 20-item fixture catalog of a domain.
pub fn builtin_catalog(domain: DomainId) -> Catalog {
    let source = match domain {
        DomainId::Recipe => RECIPE_CATALOG_JSON,
        DomainId::Apartment => APARTMENT_CATALOG_JSON,
    };
    load_catalog(source.as_bytes(), &builtin_spec(domain)).expect("bundled catalog is valid")
}
