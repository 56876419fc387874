//! Closed forms checked against brute-force sampling.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use segregation_core::engine::sample_period_returns;
use segregation_core::meanfield::{returns_for_fractions, std_normal_cdf, truncated_surplus, truncated_surplus_below};
use segregation_core::rng::run_stream;
use segregation_core::{binder_cumulant, update_attractions, ModelParams};

#[test]
fn truncated_surplus_against_sampling() {
    let mut rng = run_stream(11, 0);
    let n = 4_000_000;
    for (mu, sigma, cutoff) in [(1.0, 1.0, 0.3), (0.0, 1.0, 0.55), (1.0, 0.5, 1.7), (0.0, 2.0, -1.0)] {
        let dist = Normal::new(mu, sigma).unwrap();
        let (mut above, mut sum_above, mut below, mut sum_below) = (0u64, 0.0, 0u64, 0.0);
        for _ in 0..n {
            let x: f64 = dist.sample(&mut rng);
            if x > cutoff {
                above += 1;
                sum_above += x - cutoff;
            } else {
                below += 1;
                sum_below += cutoff - x;
            }
        }
        let up = truncated_surplus(mu, sigma, cutoff);
        let down = truncated_surplus_below(mu, sigma, cutoff);
        assert!((sum_above / above as f64 - up).abs() < 2e-3 * sigma, "{mu} {sigma} {cutoff}: {up}");
        assert!((sum_below / below as f64 - down).abs() < 2e-3 * sigma, "{mu} {sigma} {cutoff}: {down}");
        let q = std_normal_cdf((mu - cutoff) / sigma);
        assert!((above as f64 / n as f64 - q).abs() < 1e-3);
    }
}

#[test]
fn validity_fractions_against_sampled_market() {
    let params = ModelParams::default();
    let fractions = [0.3, 0.2, 0.15, 0.35];
    let mut rng = run_stream(12, 0);
    let sampled = sample_period_returns(&params, 400_000, |_| fractions, &mut rng);
    for m in 0..2 {
        let c = sampled.counts[m];
        let (xb, xs) = (fractions[2 * m], fractions[2 * m + 1]);
        let price = params.mu_ask + params.theta[m] * (params.mu_bid - params.mu_ask);
        let qb = std_normal_cdf((params.mu_bid - price) / params.sigma_bid);
        let qa = std_normal_cdf((price - params.mu_ask) / params.sigma_ask);
        assert!((c.n_valid_bids as f64 / c.n_bids as f64 - qb).abs() < 5e-3);
        assert!((c.n_valid_asks as f64 / c.n_asks as f64 - qa).abs() < 5e-3);
        assert!((c.n_bids as f64 / 400_000.0 - xb).abs() < 5e-3);
        assert!((c.n_asks as f64 / 400_000.0 - xs).abs() < 5e-3);
    }
    let r = returns_for_fractions(&fractions, &params).by_action();
    for k in 0..4 {
        assert!((sampled.mean_score[k] - r[k]).abs() < 0.02 * r[k].abs().max(0.05), "{k}: {:?} vs {r:?}", sampled.mean_score);
    }
}

#[test]
fn stationary_attraction_equals_choice_rate_times_mean_score() {
    // an action taken with probability p and scored S ~ N(0.4, 0.3) has
    // stationary attraction mean p * E[S]
    let (p, r) = (0.35, 0.05);
    let mut rng = run_stream(13, 0);
    let mut a = [0.0, 0.0];
    let (mut sum, mut n) = (0.0, 0u64);
    for step in 0..400_000 {
        let chosen = usize::from(rng.random::<f64>() >= p);
        let s = 0.4 + 0.3 * rng.sample::<f64, _>(StandardNormal);
        update_attractions(&mut a, chosen, if chosen == 0 { s } else { 0.1 }, r);
        if step >= 1000 {
            sum += a[0];
            n += 1;
        }
    }
    let mean = sum / n as f64;
    assert!((mean - p * 0.4).abs() < 5e-3, "{mean}");
}

#[test]
fn binder_reference_distributions() {
    let mut rng = run_stream(14, 0);
    let gauss: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
    assert!(binder_cumulant(&gauss).unwrap().abs() < 0.01);
    let uniform: Vec<f64> = (0..1_000_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    assert!((binder_cumulant(&uniform).unwrap() - 0.4).abs() < 0.01);
    let two_point: Vec<f64> = (0..1000).map(|k| if k % 2 == 0 { 0.7 } else { -0.7 }).collect();
    assert!((binder_cumulant(&two_point).unwrap() - 2.0 / 3.0).abs() < 1e-14);
}
