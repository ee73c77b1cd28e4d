//! D'Agostino–Pearson omnibus normality test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    /// `K² = Z_skew² + Z_kurt²`.
    pub statistic: f64,
    /// Upper tail of chi-square with two degrees of freedom.
    pub p_value: f64,
}

/// Combines the skewness and kurtosis z-scores into the K² statistic.
/// Needs at least 20 samples; zero-variance input is rejected because both
/// moments are undefined.
pub fn normality_test(samples: &[f64]) -> Result<NormalityResult> {
    let n = samples.len();
    if n < 20 {
        return Err(Error::invalid(format!(
            "normality test needs at least 20 samples, got {n}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite sample".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= f64::EPSILON * mean.abs().max(1.0).powi(2) {
        return Err(Error::Numeric("zero variance: normality test undefined".into()));
    }
    let z_skew = skew_z(m3 / m2.powf(1.5), nf);
    let z_kurt = kurtosis_z(m4 / (m2 * m2), nf);
    let statistic = z_skew * z_skew + z_kurt * z_kurt;
    Ok(NormalityResult {
        statistic,
        p_value: (-statistic / 2.0).exp(),
    })
}

fn skew_z(b1: f64, n: f64) -> f64 {
    let y = b1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    delta * (y / alpha).asinh()
}

fn kurtosis_z(b2: f64, n: f64) -> f64 {
    let e = 3.0 * (n - 1.0) / (n + 1.0);
    let var = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    let x = (b2 - e) / var.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    (term1 - term2) / (2.0 / (9.0 * a)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    // Reference values from scipy.stats.normaltest on the same inputs.
    #[test]
    fn matches_reference_implementation() {
        let a: Vec<f64> = (1..41).map(|k| (k as f64 * 0.7548776662466927) % 1.0).collect();
        let r = normality_test(&a).unwrap();
        assert!(close(r.statistic, 10.31171585184357), "{r:?}");
        assert!(close(r.p_value, 0.005765531553695313));

        let b: Vec<f64> = (1..31).map(|k| (k * k) as f64).collect();
        let r = normality_test(&b).unwrap();
        assert!(close(r.statistic, 3.8582005415682414), "{r:?}");
        assert!(close(r.p_value, 0.14527885132570745));

        let c: Vec<f64> = (0..25).map(|k| (k as f64 * 1.3).sin() + 0.1 * k as f64).collect();
        let r = normality_test(&c).unwrap();
        assert!(close(r.statistic, 0.7089130752041078), "{r:?}");
        assert!(close(r.p_value, 0.7015546081744264));
    }

    #[test]
    fn gaussian_samples_pass() {
        let mut passes = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
            if normality_test(&xs).unwrap().p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 95, "{passes}/100");
    }

    #[test]
    fn exponential_samples_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let exp = Exp::new(1.0).unwrap();
        let xs: Vec<f64> = (0..5000).map(|_| exp.sample(&mut rng)).collect();
        assert!(normality_test(&xs).unwrap().p_value < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(normality_test(&[1.0; 19]).is_err());
        assert!(matches!(normality_test(&[2.5; 40]), Err(Error::Numeric(_))));
    }
}
