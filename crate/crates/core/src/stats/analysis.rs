//! The fixed analysis pipeline: descriptives, normality report, omnibus test
//! and Bonferroni-corrected pairwise follow-ups.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bonferroni, check_alpha, kruskal_wallis, mann_whitney_u, shapiro_wilk, MwMode, StatsError, TestResult};
use crate::study::{aggregate, group_value, is_group_key, AimMetrics, GroupRow, Outcome, StudySession};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPlan {
    pub outcome: Outcome,
    pub group_by: Vec<String>,
    pub alpha: f64,
    pub pairwise: bool,
}

impl AnalysisPlan {
    pub fn new(outcome: Outcome, group_by: &[&str]) -> Self {
        AnalysisPlan { outcome, group_by: group_by.iter().map(|s| s.to_string()).collect(), alpha: 0.05, pairwise: true }
    }
}

/// Normality of one group. Groups too small or constant carry the reason instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNormality {
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub groups: [String; 2],
    pub result: TestResult,
    pub corrected_alpha: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub plan: AnalysisPlan,
    /// Sessions skipped because they are not complete.
    pub excluded_sessions: usize,
    pub descriptives: Vec<GroupRow>,
    pub normality: Vec<GroupNormality>,
    pub omnibus: TestResult,
    pub omnibus_significant: bool,
    pub pairwise: Vec<PairwiseResult>,
}

/// Runs the analysis on the complete sessions among `sessions`.
pub fn run_analysis(sessions: &[StudySession], plan: &AnalysisPlan) -> Result<AnalysisReport, StatsError> {
    let alpha = check_alpha(plan.alpha)?;
    if let Some(bad) = plan.group_by.iter().find(|k| !is_group_key(k)) {
        return Err(StatsError::UnknownGroupKey(bad.clone()));
    }
    let complete: Vec<StudySession> = sessions.iter().filter(|s| s.is_complete()).cloned().collect();
    let excluded_sessions = sessions.len() - complete.len();

    let descriptives = aggregate(&complete, &plan.group_by)?;
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in &complete {
        let label: Vec<String> = plan.group_by.iter().map(|k| group_value(s, k)).collect();
        samples.entry(label.join("/")).or_default().push(AimMetrics::of(s)?.get(plan.outcome));
    }
    if samples.len() < 2 {
        return Err(StatsError::InsufficientGroups { found: samples.len() });
    }

    let normality = samples
        .iter()
        .map(|(group, values)| {
            let (result, note) = match shapiro_wilk(values) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            GroupNormality { group: group.clone(), result, note }
        })
        .collect();

    let labels: Vec<&String> = samples.keys().collect();
    let groups: Vec<Vec<f64>> = samples.values().cloned().collect();
    let omnibus = kruskal_wallis(&groups)?;
    let omnibus_significant = omnibus.p_value < alpha;

    let mut pairwise = Vec::new();
    if omnibus_significant && plan.pairwise {
        let k = groups.len();
        let corrected_alpha = bonferroni(alpha, k * (k - 1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                let result = mann_whitney_u(&groups[i], &groups[j], MwMode::Auto)?;
                pairwise.push(PairwiseResult {
                    groups: [labels[i].clone(), labels[j].clone()],
                    significant: result.p_value < corrected_alpha,
                    result,
                    corrected_alpha,
                });
            }
        }
    }
    Ok(AnalysisReport {
        plan: plan.clone(),
        excluded_sessions,
        descriptives,
        normality,
        omnibus,
        omnibus_significant,
        pairwise,
    })
}
