//! Kruskal-Wallis H test with midrank tie correction.

use super::special::chi_square_sf;
use super::{midranks, tie_term, StatsError, TestResult};

pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups { found: groups.len() });
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(StatsError::EmptyGroup { index: i });
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let total = pooled.len() as f64;
    if pooled.len() < 3 {
        return Err(StatsError::SampleTooSmall { n: pooled.len(), min: 3 });
    }
    let ranks = midranks(&pooled);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h_raw = 12.0 / (total * (total + 1.0)) * sum - 3.0 * (total + 1.0);
    let correction = 1.0 - tie_term(&pooled) / (total.powi(3) - total);
    let n = groups.iter().map(Vec::len).collect();
    let method = "kruskal-wallis".to_string();
    if correction <= 0.0 {
        // every value identical: no rank variation at all
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, method, n, exact: false });
    }
    let h = (h_raw / correction).max(0.0);
    let df = (groups.len() - 1) as f64;
    Ok(TestResult { statistic: h, p_value: chi_square_sf(h, df).clamp(0.0, 1.0), method, n, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let r = kruskal_wallis(&g).unwrap();
        assert!((r.statistic - 7.2).abs() < 1e-9);
    }

    #[test]
    fn constant_groups() {
        let r = kruskal_wallis(&[vec![3.0; 4], vec![3.0; 2], vec![3.0; 5]]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn errors() {
        assert_eq!(kruskal_wallis(&[vec![1.0]]), Err(StatsError::TooFewGroups { found: 1 }));
        assert_eq!(kruskal_wallis(&[vec![1.0], vec![]]), Err(StatsError::EmptyGroup { index: 1 }));
        assert_eq!(kruskal_wallis(&[vec![1.0], vec![2.0]]), Err(StatsError::SampleTooSmall { n: 2, min: 3 }));
    }
}
