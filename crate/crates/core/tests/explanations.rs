use conseq_core::catalog::{builtin_catalog, builtin_spec, DomainId, Item, Value};
use conseq_core::consequence::*;
use conseq_core::preferences::{fixture_profile, PreferenceProfile, SoftPreference, FIXTURE_PROFILES};
use conseq_core::recommender::{maut_utility, recommend, ScoredItem, ScoringConfig, WeightVector};
use conseq_testkit::checks::polarity_duality;
use proptest::prelude::*;

const MOTIVATING: &str = "The number of carbs, sugar, and protein in the cooked meal will give you enough energy \
for your activity level, and the number of calories and fat in the dish will support you in losing weight.";
const AVOIDING: &str = "The number of carbs, sugar, and protein in the cooked meal will not fall below the needed \
energy for your activity level, and the number of calories and fat in the dish will not interfere with your aim of \
losing weight.";
const SHARED_BEDROOMS: &str = "your children will need to share bedrooms in this apartment";

fn top(profile: &PreferenceProfile) -> (ScoredItem, Item) {
    let catalog = builtin_catalog(profile.domain);
    let ranked = recommend(&catalog, profile, &WeightVector::uniform(), &ScoringConfig::default()).unwrap();
    let item = catalog.item(&ranked[0].item_id).unwrap().clone();
    (ranked[0].clone(), item)
}

fn explain_top(profile: &PreferenceProfile, variant: ExplanationVariant) -> Explanation {
    let (scored, item) = top(profile);
    let spec = builtin_spec(profile.domain);
    explain(&scored, &item, profile, &builtin_rules(profile.domain), &spec, variant, &ExplainConfig::default()).unwrap()
}

#[test]
fn golden_recipe_strings() {
    let profile = fixture_profile("recipe_moderate_lose").unwrap();
    let m = explain_top(&profile, ExplanationVariant::MotivatingConsequence);
    assert_eq!(m.text, MOTIVATING);
    let a = explain_top(&profile, ExplanationVariant::AvoidingConsequence);
    assert_eq!(a.text, AVOIDING);
    assert_eq!(m.rerender(), m.text);
    assert_eq!(a.rerender(), a.text);
}

#[test]
fn golden_strings_from_fragments() {
    let profile = fixture_profile("recipe_moderate_lose").unwrap();
    let (scored, item) = top(&profile);
    let rules = builtin_rules(DomainId::Recipe);
    let cfg = ExplainConfig::default();
    let frags = derive_consequences(&scored, &item, &profile, &rules, Polarity::Avoiding, &cfg).unwrap();
    let ids: Vec<_> = frags.iter().map(|f| f.rule_id.as_str()).collect();
    assert_eq!(ids, ["recipe.activity_level", "recipe.weight_aim"]);
    assert_eq!(render_explanation(&frags, ExplanationVariant::AvoidingConsequence).unwrap().text, AVOIDING);
    // the golden recipe sits in the overlap of both calorie bands
    let calories = item.number("calories").unwrap();
    assert!((600.0..=650.0).contains(&calories), "{calories}");
}

#[test]
fn bedroom_downside() {
    let profile = fixture_profile("apartment_family").unwrap();
    for variant in [ExplanationVariant::MotivatingConsequence, ExplanationVariant::AvoidingConsequence] {
        let e = explain_top(&profile, variant);
        let downsides: Vec<_> = e.fragments.iter().filter(|f| f.kind == FragmentKind::Downside).collect();
        assert_eq!(downsides.len(), 1);
        assert_eq!(downsides[0].sentence, SHARED_BEDROOMS);
        assert!(e.text.contains("Your children will need to share bedrooms in this apartment."), "{}", e.text);
    }
}

#[test]
fn empty_rule_set_derives_nothing() {
    let profile = fixture_profile("apartment_family").unwrap();
    let (scored, item) = top(&profile);
    let rules = RuleSet::empty(DomainId::Apartment);
    let frags =
        derive_consequences(&scored, &item, &profile, &rules, Polarity::Motivating, &ExplainConfig::default()).unwrap();
    assert!(frags.is_empty());
    assert_eq!(
        render_explanation(&frags, ExplanationVariant::MotivatingConsequence),
        Err(ExplainError::EmptyExplanation)
    );
}

#[test]
fn unresolved_placeholder_names_the_rule() {
    let spec = builtin_spec(DomainId::Apartment);
    // `limit.rent` is a valid name but the profile has no rent limit
    let rules = RuleSet::from_json(
        r#"[{"id":"apt.rent","domain":"apartment","rank":1,"topic":"rent","trigger":"",
            "templates":{"motivating":"under {limit.rent}","avoiding":"a","downside":"d"}}]"#,
        &spec,
    )
    .unwrap();
    let profile = fixture_profile("apartment_family").unwrap();
    let mut no_limit = profile.clone();
    no_limit.hard.clear();
    let (scored, item) = top(&no_limit);
    let err = derive_consequences(&scored, &item, &no_limit, &rules, Polarity::Motivating, &ExplainConfig::default())
        .unwrap_err();
    match err {
        ExplainError::Rule(e) => assert_eq!(e.rule_id(), Some("apt.rent")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn content_baseline_names_matched_features() {
    let spec = builtin_spec(DomainId::Recipe);
    let catalog = builtin_catalog(DomainId::Recipe);
    let profile = PreferenceProfile::new(DomainId::Recipe)
        .with_soft(SoftPreference::FavoriteCuisine, Value::Text("italian".into()))
        .with_hard("diet", conseq_core::preferences::HardConstraint::Equals("vegetarian".into()));
    let item = catalog.item("r02").unwrap();
    let scored = maut_utility(item, &profile, &WeightVector::uniform(), &spec, &ScoringConfig::default()).unwrap();
    let e = content_based_explanation(item, &profile, &scored, &spec, &ExplainConfig::default());
    // one clause per matched soft dimension plus the hard-constraint clause
    assert_eq!(e.fragments.len(), 2);
    assert_eq!(
        e.text,
        "Recommended because its cuisine (italian) matches your favorite cuisine, and its diet (vegetarian) meets \
         your requirement."
    );
    assert_eq!(e.rerender(), e.text);
}

#[test]
fn content_baseline_without_soft_match_lists_hard_constraints() {
    let spec = builtin_spec(DomainId::Recipe);
    let catalog = builtin_catalog(DomainId::Recipe);
    let profile = PreferenceProfile::new(DomainId::Recipe)
        .with_soft(SoftPreference::FavoriteCuisine, Value::Text("mexican".into()))
        .with_hard("cooking_time", conseq_core::preferences::HardConstraint::AtMost(60.0));
    let item = catalog.item("r02").unwrap();
    let scored = maut_utility(item, &profile, &WeightVector::uniform(), &spec, &ScoringConfig::default()).unwrap();
    let e = content_based_explanation(item, &profile, &scored, &spec, &ExplainConfig::default());
    assert_eq!(e.text, "Recommended because its cooking time (45 minutes) meets your requirement.");
}

#[test]
fn baseline_is_shorter_than_consequence_texts() {
    for (name, _) in FIXTURE_PROFILES {
        let profile = fixture_profile(name).unwrap();
        let content = explain_top(&profile, ExplanationVariant::ContentBased);
        for variant in [ExplanationVariant::MotivatingConsequence, ExplanationVariant::AvoidingConsequence] {
            let e = explain_top(&profile, variant);
            assert!(content.text.len() < e.text.len(), "{name} {variant}: {} vs {}", content.text, e.text);
        }
    }
}

proptest! {
    #[test]
    fn polarity_changes_text_only(seed in any::<u64>()) {
        prop_assert_eq!(polarity_duality(seed), Ok(()));
    }

    #[test]
    fn selection_keeps_all_downsides(ranks in proptest::collection::vec((1u32..50, any::<bool>()), 0..12), k in 1usize..8) {
        let frags: Vec<ConsequenceFragment> = ranks
            .iter()
            .enumerate()
            .map(|(i, (rank, down))| ConsequenceFragment {
                rule_id: format!("r{i}"),
                kind: if *down { FragmentKind::Downside } else { FragmentKind::Consequence },
                rank: *rank,
                topic: format!("t{i}"),
                polarity: None,
                sentence: "s".into(),
                referenced_features: vec![],
            })
            .collect();
        let kept = select_top_consequences(&frags, k);
        let n_cons = frags.iter().filter(|f| f.kind == FragmentKind::Consequence).count();
        let kept_cons: Vec<_> = kept.iter().filter(|f| f.kind == FragmentKind::Consequence).collect();
        prop_assert_eq!(kept_cons.len(), n_cons.min(k));
        prop_assert_eq!(
            kept.iter().filter(|f| f.kind == FragmentKind::Downside).count(),
            frags.iter().filter(|f| f.kind == FragmentKind::Downside).count()
        );
        // kept consequences have the smallest ranks
        let mut all_ranks: Vec<u32> = frags.iter().filter(|f| f.kind == FragmentKind::Consequence).map(|f| f.rank).collect();
        all_ranks.sort();
        let mut got: Vec<u32> = kept_cons.iter().map(|f| f.rank).collect();
        got.sort();
        prop_assert_eq!(&got[..], &all_ranks[..got.len()]);
        // relative order preserved
        let pos: Vec<usize> = kept.iter().map(|f| frags.iter().position(|g| g.rule_id == f.rule_id).unwrap()).collect();
        prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}
