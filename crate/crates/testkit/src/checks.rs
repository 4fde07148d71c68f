//! Property checks over one seeded random instance. Each returns a
//! description of the first violation instead of panicking, so a caller can
//! count failures across many seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use conseq_core::catalog::DomainId;
use conseq_core::consequence::{
    builtin_rules, derive_consequences, render_explanation, select_top_consequences, ExplainConfig, ExplanationVariant,
    FragmentKind, Polarity,
};
use conseq_core::consequence::ConsequenceFragment;
use conseq_core::recommender::{generate_candidates, maut_utility, recommend, RecommendError, ScoringConfig};
use conseq_core::study::{advance, check_invariants, read_log, replay, write_log, EventRecord, StudyContext, StudySession};

use crate::{multiset, next_valid_step, oracle, random_catalog, random_profile, random_step, random_weights};

/// Largest catalog drawn by [`ranking_instance`].
pub const MAX_CATALOG: usize = 20;

/// Which part of a ranking instance disagreed with the oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankingMismatch {
    Candidates(String),
    Ordering(String),
}

/// Compares candidate generation and the full ranking with the brute-force
/// oracle on one random catalog of at most [`MAX_CATALOG`] items.
pub fn ranking_instance(seed: u64) -> Result<(), RankingMismatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = DomainId::ALL[rng.random_range(0..2)];
    let n = rng.random_range(0..=MAX_CATALOG);
    let catalog = random_catalog(&mut rng, domain, n);
    let profile = random_profile(&mut rng, domain);
    let weights = random_weights(&mut rng, &profile);
    let cfg = ScoringConfig::default();

    let got: Vec<String> = generate_candidates(&catalog, &profile).iter().map(|i| i.id.clone()).collect();
    let want = oracle::candidates(&catalog, &profile);
    if got != want {
        return Err(RankingMismatch::Candidates(format!("seed {seed}: {got:?} vs oracle {want:?}")));
    }
    let want = oracle::ranking(&catalog, &profile, &weights, &cfg);
    let got = match recommend(&catalog, &profile, &weights, &cfg) {
        Ok(ranked) => ranked.into_iter().map(|s| s.item_id).collect(),
        Err(RecommendError::NoCandidate(_)) => Vec::new(),
        Err(e) => return Err(RankingMismatch::Ordering(format!("seed {seed}: {e}"))),
    };
    if got != want {
        return Err(RankingMismatch::Ordering(format!("seed {seed}: {got:?} vs oracle {want:?}")));
    }
    Ok(())
}

fn rule_ids(frags: &[ConsequenceFragment]) -> std::collections::BTreeMap<&String, usize> {
    multiset(frags.iter().map(|f| &f.rule_id))
}

/// Polarity duality on one random (item, profile) pair per domain: both
/// polarities fire the same rules, and each below-threshold soft dimension
/// yields exactly one downside.
pub fn polarity_duality(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ExplainConfig::default();
    for domain in DomainId::ALL {
        let rules = builtin_rules(domain);
        let catalog = random_catalog(&mut rng, domain, 1);
        let item = &catalog.items[0];
        let profile = random_profile(&mut rng, domain);
        let weights = random_weights(&mut rng, &profile);
        let scored = maut_utility(item, &profile, &weights, &catalog.spec, &ScoringConfig::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let derive = |p| derive_consequences(&scored, item, &profile, &rules, p, &cfg).map_err(|e| format!("seed {seed}: {e}"));
        let m = derive(Polarity::Motivating)?;
        let a = derive(Polarity::Avoiding)?;
        if rule_ids(&m) != rule_ids(&a) {
            return Err(format!("seed {seed} {domain}: rule sets differ between polarities"));
        }
        let below = scored.contributions.values().filter(|c| c.compatibility < cfg.satisfaction_threshold).count();
        let downsides = m.iter().filter(|f| f.kind == FragmentKind::Downside).count();
        if downsides != below {
            return Err(format!("seed {seed} {domain}: {downsides} downsides for {below} unmet preferences"));
        }
        if let Some(f) = m.iter().chain(&a).find(|f| f.sentence.is_empty() || f.sentence.contains(['{', '}'])) {
            return Err(format!("seed {seed} {domain}: bad sentence `{}`", f.sentence));
        }
        if !m.is_empty() {
            let rm = render_explanation(&select_top_consequences(&m, cfg.top_k), ExplanationVariant::MotivatingConsequence)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            let ra = render_explanation(&select_top_consequences(&a, cfg.top_k), ExplanationVariant::AvoidingConsequence)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            if rule_ids(&rm.fragments) != rule_ids(&ra.fragments) {
                return Err(format!("seed {seed} {domain}: rendered rule sets differ"));
            }
            if rm.rerender() != rm.text || ra.rerender() != ra.text {
                return Err(format!("seed {seed} {domain}: rendering is not reproducible"));
            }
        }
    }
    Ok(())
}

/// One fuzzed input sequence, mixing scripted valid inputs with random ones.
/// Checks every accepted step and then compares log replay with the live
/// state. Returns the final session.
pub fn fuzz_sequence(seed: u64, ctx: &StudyContext) -> Result<StudySession, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = DomainId::ALL[rng.random_range(0..2)];
    let variant = ExplanationVariant::ALL[rng.random_range(0..3)];
    let profile = random_profile(&mut rng, domain);
    let id = format!("f{seed}");
    let mut s = StudySession::new(id.clone(), domain, variant, ExplainConfig::default(), 0);
    let mut log = vec![EventRecord::created(0, &s, 0)];
    let mut at = 0;
    for _ in 0..rng.random_range(1..40) {
        let topics = s.explanation.as_ref().map(|e| e.topics()).unwrap_or_default();
        let input = match next_valid_step(&s, &profile, rng.random_range(1..=5)) {
            Some(valid) if rng.random_bool(0.5) => valid,
            _ => random_step(&mut rng, domain, &topics),
        };
        at += rng.random_range(0..5000);
        if let Ok(next) = advance(&s, &input, at, ctx) {
            if next.stage < s.stage || next.stage.index() > s.stage.index() + 1 {
                return Err(format!("seed {seed}: {} jumped to {}", s.stage, next.stage));
            }
            check_invariants(&next).map_err(|e| format!("seed {seed}: {e}"))?;
            s = next;
            log.push(EventRecord::step(log.len() as u64, &s, input, at));
        }
    }
    let replayed = replay(&log, ctx).map_err(|e| format!("seed {seed}: {e}"))?;
    if replayed.get(&id) != Some(&s) {
        return Err(format!("seed {seed}: replay differs from live state"));
    }
    let mut buf = Vec::new();
    write_log(&mut buf, &log).map_err(|e| e.to_string())?;
    if read_log(buf.as_slice()).map_err(|e| e.to_string())? != log {
        return Err(format!("seed {seed}: log does not round-trip"));
    }
    Ok(s)
}
