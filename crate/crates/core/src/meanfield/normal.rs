//! Gaussian tail quantities: validity probabilities and conditional surpluses.

use libm::erfc;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `z + phi(z) / Phi(z)`, i.e. `E[X - c | X > c] / sigma` for `z = (mu - c) / sigma`.
///
/// Below z = -8 the two terms nearly cancel, so the continued fraction for
/// the Mills ratio is used instead: with `x = -z`,
/// `phi/Phi - x = 1 / (x + 2 / (x + 3 / (x + ...)))`.
fn surplus_factor(z: f64) -> f64 {
    if z >= -8.0 {
        return z + std_normal_pdf(z) / std_normal_cdf(z);
    }
    let x = -z;
    let mut tail = x;
    for k in (2..=60).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}

/// `E[X - cutoff | X > cutoff]` for `X ~ N(mu, sigma^2)`: the expected
/// surplus of a bid that clears at price `cutoff`.
pub fn truncated_surplus(mu: f64, sigma: f64, cutoff: f64) -> f64 {
    sigma * surplus_factor((mu - cutoff) / sigma)
}

/// `E[cutoff - X | X < cutoff]`: the expected surplus of an ask that clears
/// at price `cutoff`.
pub fn truncated_surplus_below(mu: f64, sigma: f64, cutoff: f64) -> f64 {
    truncated_surplus(-mu, sigma, -cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_normal_mean() {
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        assert!((truncated_surplus(0.0, 1.0, 0.0) - expected).abs() < 1e-14);
        assert!((truncated_surplus_below(0.0, 1.0, 0.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn no_truncation_limit() {
        for c in [-10.0, -20.0, -40.0] {
            let s = truncated_surplus(1.0, 1.0, c);
            assert!((s - (1.0 - c)).abs() < 1e-12, "{c}: {s}");
        }
    }

    #[test]
    fn deep_tail_is_continuous_and_positive() {
        let below = surplus_factor(-8.0 - 1e-9);
        let above = surplus_factor(-8.0 + 1e-9);
        assert!((below - above).abs() < 1e-9, "{below} vs {above}");
        let mut last = f64::INFINITY;
        for z in [-8.5, -10.0, -20.0, -50.0, -200.0] {
            let s = surplus_factor(z);
            assert!(s > 0.0 && s < last);
            // leading asymptotic term 1/x
            assert!((s * -z - 1.0).abs() < 2.0 / (z * z));
            last = s;
        }
    }

    #[test]
    fn cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((std_normal_cdf(-0.3) - 0.382_088_577_811_047_4).abs() < 1e-15);
    }
}
