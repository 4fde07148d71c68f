//! Mann-Whitney U test, two-sided.

use serde::{Deserialize, Serialize};

use super::special::normal_sf;
use super::{midranks, tie_term, StatsError, TestResult};

/// Largest per-sample size for which the automatic mode computes the exact
/// null distribution.
pub const EXACT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwMode {
    Exact,
    Approx,
    Auto,
}

/// U statistics of `a` and `b` from midranks: `(U_a, U_b)`.
pub fn u_statistics(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let na = a.len() as f64;
    let rank_sum_a: f64 = ranks[..a.len()].iter().sum();
    let ua = rank_sum_a - na * (na + 1.0) / 2.0;
    (ua, na * b.len() as f64 - ua)
}

/// Number of arrangements giving each value of U, for sample sizes `m` and `n`
/// without ties. Entry `u` counts the arrangements with `U = u`.
pub fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    // table[i][j][u], built up over i for fixed n via the recurrence
    // c(i, j, u) = c(i - 1, j, u - j) + c(i, j - 1, u)
    let max_u = m * n;
    let mut prev: Vec<Vec<f64>> = (0..=n).map(|_| {
        let mut v = vec![0.0; max_u + 1];
        v[0] = 1.0;
        v
    }).collect();
    for _i in 1..=m {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n + 1];
        cur[0][0] = 1.0;
        for j in 1..=n {
            for u in 0..=max_u {
                let from_a = if u >= j { prev[j][u - j] } else { 0.0 };
                cur[j][u] = from_a + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

fn has_ties(a: &[f64], b: &[f64]) -> bool {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.windows(2).any(|w| w[0] == w[1])
}

/// Normal approximation z for the U statistic of `a`, with tie correction.
/// The continuity correction shrinks `|U - mean|` by one half.
pub fn u_z_score(a: &[f64], b: &[f64], continuity: bool) -> f64 {
    let (ua, _) = u_statistics(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ties = tie_term(&pooled);
    let variance = na * nb / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)));
    if variance <= 0.0 {
        return 0.0;
    }
    let mut diff = ua - na * nb / 2.0;
    if continuity {
        diff = diff.signum() * (diff.abs() - 0.5).max(0.0);
    }
    diff / variance.sqrt()
}

/// Two-sided Mann-Whitney U test. The reported statistic is `min(U_a, U_b)`.
///
/// Exact mode is only used without ties; tied samples fall back to the
/// normal approximation and report `exact = false`.
pub fn mann_whitney_u(a: &[f64], b: &[f64], mode: MwMode) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (ua, ub) = u_statistics(a, b);
    let u = ua.min(ub);
    let tied = has_ties(a, b);
    let exact = match mode {
        MwMode::Exact => !tied,
        MwMode::Approx => false,
        MwMode::Auto => !tied && a.len() <= EXACT_MAX_N && b.len() <= EXACT_MAX_N,
    };
    let p = if exact {
        let dist = u_distribution(a.len(), b.len());
        let total: f64 = dist.iter().sum();
        // U of a tie-free sample is an integer
        let cutoff = u.round() as usize;
        let tail: f64 = dist[..=cutoff].iter().sum();
        (2.0 * tail / total).min(1.0)
    } else {
        let z = u_z_score(a, b, true).abs();
        (2.0 * normal_sf(z)).min(1.0)
    };
    Ok(TestResult {
        statistic: u,
        p_value: p.clamp(0.0, 1.0),
        method: if exact { "mann-whitney-u-exact" } else { "mann-whitney-u-normal" }.into(),
        n: vec![a.len(), b.len()],
        exact,
    })
}
