//! Softmax choice and attraction updates with exponential forgetting.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearningError {
    #[error("attraction {index} is not finite ({value})")]
    NonFiniteAttraction { index: usize, value: f64 },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
}

/// Softmax probabilities `exp(A/T) / sum exp(A/T)`, written into `out`.
///
/// The maximum attraction is subtracted before exponentiating, so large
/// attractions or tiny temperatures cannot overflow.
pub fn softmax_into(attractions: &[f64], temperature: f64, out: &mut [f64]) {
    debug_assert_eq!(attractions.len(), out.len());
    let max = attractions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, &a) in out.iter_mut().zip(attractions) {
        *p = ((a - max) / temperature).exp();
        total += *p;
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

/// Checked softmax over an attraction vector.
pub fn choice_probabilities(attractions: &[f64], temperature: f64) -> Result<Vec<f64>, LearningError> {
    if !(temperature > 0.0) {
        return Err(LearningError::NonPositiveTemperature(temperature));
    }
    if let Some((index, &value)) = attractions.iter().enumerate().find(|(_, a)| !a.is_finite()) {
        return Err(LearningError::NonFiniteAttraction { index, value });
    }
    let mut out = vec![0.0; attractions.len()];
    softmax_into(attractions, temperature, &mut out);
    Ok(out)
}

/// Samples an index from `probs` with a single uniform draw `u` in [0, 1).
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// One period of learning: the chosen action moves toward its score, all
/// other attractions decay toward zero.
pub fn update_attractions(attractions: &mut [f64], chosen: usize, score: f64, r: f64) {
    for (i, a) in attractions.iter_mut().enumerate() {
        *a *= 1.0 - r;
        if i == chosen {
            *a += r * score;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_for_equal_attractions() {
        for t in [0.01, 0.3, 10.0] {
            let p = choice_probabilities(&[0.0; 4], t).unwrap();
            for x in p {
                assert!((x - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn low_temperature_is_greedy() {
        let mut last = 1.0;
        for t in [10.0, 1.0, 0.3, 0.1, 0.03, 0.01] {
            let p = choice_probabilities(&[1.0, 0.0], t).unwrap();
            assert!(p[1] < last);
            last = p[1];
        }
        assert!(last < 1e-40);
    }

    #[test]
    fn no_overflow_for_huge_attractions() {
        let p = choice_probabilities(&[1000.0, 0.0], 0.1).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!(p[0] >= 1.0 - 1e-300);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            choice_probabilities(&[0.0, f64::NAN], 1.0),
            Err(LearningError::NonFiniteAttraction { index: 1, .. })
        ));
        assert!(choice_probabilities(&[0.0], 0.0).is_err());
    }

    #[test]
    fn single_update() {
        let mut a = [0.0, 0.0];
        update_attractions(&mut a, 0, 1.0, 0.1);
        assert!((a[0] - 0.1).abs() < 1e-15);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn memoryless_limit() {
        let mut a = [3.0, -2.0, 5.0];
        update_attractions(&mut a, 2, 0.4, 1.0);
        assert_eq!(a, [0.0, 0.0, 0.4]);
    }

    #[test]
    fn geometric_approach_to_constant_score() {
        // closed form: A_n = s (1 - (1 - r)^n) from A_0 = 0
        let (s, r) = (0.8, 0.1);
        let mut a = [0.0];
        for n in 1..=200 {
            update_attractions(&mut a, 0, s, r);
            let expected = s * (1.0 - (1.0f64 - r).powi(n));
            assert!((a[0] - expected).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn sampling_covers_support() {
        let p = [0.25, 0.0, 0.75];
        assert_eq!(sample_index(&p, 0.0), 0);
        assert_eq!(sample_index(&p, 0.2499), 0);
        assert_eq!(sample_index(&p, 0.25), 2);
        assert_eq!(sample_index(&p, 0.999_999_999), 2);
    }
}
