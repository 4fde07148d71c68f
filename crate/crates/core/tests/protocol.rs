use std::collections::BTreeMap;

use conseq_core::catalog::DomainId;
use conseq_core::consequence::{ExplainConfig, ExplanationVariant};
use conseq_core::preferences::fixture_profile;
use conseq_core::study::*;
use conseq_testkit::checks::fuzz_sequence;
use conseq_testkit::next_valid_step;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Drives one session to completion. `answer` picks each Likert value and
/// `likelihood_timing` overrides the client instants of the explanation
/// likelihood rating.
fn scripted(
    ctx: &StudyContext,
    id: &str,
    profile_name: &str,
    variant: ExplanationVariant,
    answer: impl Fn(&RatingKind) -> i64,
    likelihood_timing: Option<(u64, u64)>,
) -> (StudySession, Vec<EventRecord>) {
    let profile = fixture_profile(profile_name).unwrap();
    let mut s = StudySession::new(id, profile.domain, variant, ExplainConfig::default(), 0);
    let mut log = vec![EventRecord::created(0, &s, 0)];
    let mut at = 0;
    while let Some(mut input) = next_valid_step(&s, &profile, 3) {
        if let StepInput::Rating(r) = &mut input {
            r.value = answer(&r.kind);
            if let (RatingKind::LikelihoodFromExplanation, Some((shown, submitted))) = (&r.kind, likelihood_timing) {
                r.shown_at = Some(shown);
                r.submitted_at = Some(submitted);
            }
        }
        at += 1000;
        s = advance(&s, &input, at, ctx).unwrap();
        log.push(EventRecord::step(log.len() as u64, &s, input, at));
    }
    (s, log)
}

#[test]
fn full_scripted_session_has_every_rating() {
    let ctx = StudyContext::builtin();
    for variant in ExplanationVariant::ALL {
        let (s, log) = scripted(&ctx, "s1", "recipe_moderate_lose", variant, |_| 4, None);
        assert!(s.is_complete());
        let count = |k: &RatingKind| s.ratings.iter().filter(|r| &r.kind == k).count();
        for k in RatingKind::EXPLANATION_RATINGS.iter().chain([&RatingKind::LikelihoodFromContent]) {
            assert_eq!(count(k), 1, "{k}");
        }
        let importance = s.ratings.iter().filter(|r| matches!(r.kind, RatingKind::FeatureImportance { .. })).count();
        assert!(importance >= 1);
        assert_eq!(s.explained_item, s.content_item);
        assert_eq!(replay(&log, &ctx).unwrap()["s1"], s);
    }
}

#[test]
fn content_rating_before_explanation_rating_is_out_of_order() {
    let ctx = StudyContext::builtin();
    let profile = fixture_profile("apartment_family").unwrap();
    let mut s = StudySession::new("s", DomainId::Apartment, ExplanationVariant::AvoidingConsequence, ExplainConfig::default(), 0);
    for at in 1..=3 {
        s = advance(&s, &next_valid_step(&s, &profile, 3).unwrap(), at * 1000, &ctx).unwrap();
    }
    assert_eq!(s.stage, Stage::ExplanationShown);
    let early = StepInput::Rating(RatingInput::new(RatingKind::LikelihoodFromContent, 3));
    assert!(matches!(advance(&s, &early, 9000, &ctx), Err(StudyError::OutOfOrder { .. })));
}

#[test]
fn efficiency_and_effectiveness_examples() {
    let ctx = StudyContext::builtin();
    let likert = |exp: i64, content: i64| {
        move |k: &RatingKind| match k {
            RatingKind::LikelihoodFromExplanation => exp,
            RatingKind::LikelihoodFromContent => content,
            _ => 3,
        }
    };
    let (s, _) = scripted(&ctx, "a", "apartment_family", ExplanationVariant::MotivatingConsequence, likert(4, 4), Some((0, 132_900)));
    assert_eq!(efficiency(&s).unwrap(), 132.9);
    assert_eq!(effectiveness(&s).unwrap(), 0.0);
    let (s, _) = scripted(&ctx, "b", "apartment_family", ExplanationVariant::MotivatingConsequence, likert(4, 3), Some((1000, 125_700)));
    assert_eq!(efficiency(&s).unwrap(), 124.7);
    assert_eq!(effectiveness(&s).unwrap(), 1.0);
    let (s, _) = scripted(&ctx, "c", "recipe_moderate_lose", ExplanationVariant::ContentBased, likert(2, 5), Some((5, 5)));
    assert_eq!(efficiency(&s).unwrap(), 0.0);
    assert_eq!(effectiveness(&s).unwrap(), -3.0);

    let incomplete = StudySession::new("d", DomainId::Recipe, ExplanationVariant::ContentBased, ExplainConfig::default(), 0);
    assert!(matches!(efficiency(&incomplete), Err(MissingEvent { .. })));
}

#[test]
fn effectiveness_classification() {
    assert_eq!(classify_effect(0.4, DEFAULT_EFFECT_TOLERANCE), Effect::Persuasive);
    assert_eq!(classify_effect(-0.6, DEFAULT_EFFECT_TOLERANCE), Effect::Underestimated);
    assert_eq!(classify_effect(0.0, DEFAULT_EFFECT_TOLERANCE), Effect::Effective);
}

#[test]
fn two_point_mean() {
    let ctx = StudyContext::builtin();
    let sessions: Vec<_> = [(0, 120_000), (0, 140_000)]
        .into_iter()
        .enumerate()
        .map(|(i, t)| scripted(&ctx, &format!("s{i}"), "recipe_moderate_lose", ExplanationVariant::ContentBased, |_| 3, Some(t)).0)
        .collect();
    let rows = aggregate(&sessions, &["variant".to_string()]).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].means.efficiency_seconds, 130.0);
}

/// Ten sessions per variant whose satisfaction ratings realize the given means.
fn injected_sessions(ctx: &StudyContext) -> Vec<StudySession> {
    let plan = [(ExplanationVariant::MotivatingConsequence, 38), (ExplanationVariant::AvoidingConsequence, 37), (ExplanationVariant::ContentBased, 34)];
    let mut out = Vec::new();
    for (variant, total) in plan {
        // spread `total` over ten Likert values, for example 38 = 8 x 4 + 2 x 3
        let high = total - 30;
        for i in 0..10 {
            let sat = if i < high { 4 } else { 3 };
            let answer = move |k: &RatingKind| if *k == RatingKind::Satisfaction { sat } else { 3 };
            let fixture = if i % 2 == 0 { "recipe_moderate_lose" } else { "apartment_commuter" };
            out.push(scripted(ctx, &format!("{variant}-{i}"), fixture, variant, answer, None).0);
        }
    }
    out
}

#[test]
fn aggregate_reproduces_injected_means() {
    let ctx = StudyContext::builtin();
    let sessions = injected_sessions(&ctx);
    let rows = aggregate(&sessions, &["variant".to_string()]).unwrap();
    let means: BTreeMap<_, _> = rows.iter().map(|r| (r.group["variant"].clone(), r.means.satisfaction)).collect();
    assert_eq!(means["motivating_consequence"], 3.8);
    assert_eq!(means["avoiding_consequence"], 3.7);
    assert_eq!(means["content_based"], 3.4);
    assert!(rows.iter().all(|r| r.n == 10));
}

#[test]
fn aggregate_is_permutation_invariant() {
    let ctx = StudyContext::builtin();
    let sessions = injected_sessions(&ctx);
    let keys = vec!["domain".to_string(), "variant".to_string()];
    let base = aggregate(&sessions, &keys).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let mut shuffled = sessions.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(aggregate(&shuffled, &keys).unwrap(), base);
    }
}

#[test]
fn sequential_creations_stay_balanced() {
    let mut counts = [0usize; 3];
    assert_eq!(assign_variant(&[3, 3, 3]), ExplanationVariant::MotivatingConsequence);
    assert_eq!(assign_variant(&[4, 3, 4]), ExplanationVariant::AvoidingConsequence);
    for _ in 0..300 {
        let v = assign_variant(&counts);
        counts[ExplanationVariant::ALL.iter().position(|x| *x == v).unwrap()] += 1;
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }
}

#[test]
fn ten_thousand_fuzzed_sequences() {
    let ctx = StudyContext::builtin();
    for seed in 0..10_000 {
        fuzz_sequence(seed, &ctx).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn fuzzed_sequence_is_safe(seed in any::<u64>()) {
        prop_assert!(fuzz_sequence(seed, &StudyContext::builtin()).is_ok());
    }
}
