//! Shapiro-Wilk normality test after Royston's algorithm AS R94.

use super::special::{normal_quantile, normal_sf};
use super::{StatsError, TestResult};

pub const SHAPIRO_MIN_N: usize = 3;
/// Upper sample size for which Royston's approximation is calibrated.
pub const SHAPIRO_MAX_N: usize = 5000;

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Half of the antisymmetric coefficient vector, largest first.
fn coefficients(n: usize) -> Vec<f64> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an = n as f64;
    let m: Vec<f64> = (1..=half).map(|i| normal_quantile((i as f64 - 0.375) / (an + 0.25))).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        (2, fac)
    } else {
        (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// W statistic and its approximate p-value.
pub fn shapiro_wilk(sample: &[f64]) -> Result<TestResult, StatsError> {
    let n = sample.len();
    if n < SHAPIRO_MIN_N {
        return Err(StatsError::SampleTooSmall { n, min: SHAPIRO_MIN_N });
    }
    if n > SHAPIRO_MAX_N {
        return Err(StatsError::SampleTooLarge { n, max: SHAPIRO_MAX_N });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 || range < 1e-19 * x[n - 1].abs() {
        return Err(StatsError::ZeroVariance);
    }
    // scale by the range for numerical stability
    for v in &mut x {
        *v /= range;
    }
    let a = coefficients(n);
    let mean = x.iter().sum::<f64>() / n as f64;
    let ssq: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = a.iter().enumerate().map(|(i, ai)| ai * (x[n - 1 - i] - x[i])).sum();
    let w = (num * num / ssq).min(1.0);

    let p = if n == 3 {
        const SIX_OVER_PI: f64 = 1.909_859_317_102_744;
        const PI_OVER_THREE: f64 = 1.047_197_551_196_597_6;
        (SIX_OVER_PI * (w.sqrt().asin() - PI_OVER_THREE)).clamp(0.0, 1.0)
    } else {
        let an = n as f64;
        let w1 = (1.0 - w).ln();
        if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], an);
            if w1 >= gamma {
                1e-99
            } else {
                let y = -(gamma - w1).ln();
                let m = poly(&[0.544, -0.39978, 0.025054, -6.714e-4], an);
                let s = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp();
                normal_sf((y - m) / s)
            }
        } else {
            let ln_n = an.ln();
            let m = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
            let s = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
            normal_sf((w1 - m) / s)
        }
    };
    Ok(TestResult {
        statistic: w,
        p_value: p.clamp(0.0, 1.0),
        method: "shapiro-wilk-royston".into(),
        n: vec![n],
        exact: false,
    })
}
