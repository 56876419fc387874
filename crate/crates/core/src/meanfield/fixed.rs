use nalgebra::{Complex, DVector};

use super::{
    flow_vec, max_abs, returns_for_fractions, to_matrix, volume_ratios, MeanFieldError, MeanFieldState,
};
use crate::params::{ModelParams, Variant};

/// Residual below which a Newton iterate is accepted as a fixed point.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Fixed points closer than this are the same point.
const DEDUP_DISTANCE: f64 = 1e-6;
/// Finite-difference step for Jacobians.
pub const JACOBIAN_STEP: f64 = 1e-6;
/// Volume ratios closer than this to 1 count as sitting on the matching kink.
const KINK_WINDOW: f64 = 1e-4;
const MAX_NEWTON_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub state: MeanFieldState,
    pub eigenvalues: Vec<Complex<f64>>,
    /// All eigenvalues have negative real part.
    pub stable: bool,
}

impl FixedPoint {
    pub fn leading_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
    }

    fn at(state: MeanFieldState, params: &ModelParams) -> Self {
        let eigenvalues: Vec<Complex<f64>> =
            jacobian(&state, params, JACOBIAN_STEP).complex_eigenvalues().iter().copied().collect();
        let stable = eigenvalues.iter().all(|e| e.re < 0.0);
        FixedPoint { state, eigenvalues, stable }
    }
}

fn near_kink(state: &MeanFieldState, params: &ModelParams) -> bool {
    volume_ratios(&state.action_fractions(params), params)
        .iter()
        .any(|r| (r - 1.0).abs() < KINK_WINDOW)
}

/// Finite-difference Jacobian of the flow. Central differences, or forward
/// differences when a market sits within the kink window of the matching
/// min().
pub fn jacobian(state: &MeanFieldState, params: &ModelParams, step: f64) -> nalgebra::DMatrix<f64> {
    let variant = state.variant();
    let x = state.as_slice();
    let n = x.len();
    let one_sided = near_kink(state, params);
    let base = if one_sided { flow_vec(variant, x, params) } else { Vec::new() };
    let cols = (0..n)
        .map(|j| {
            let mut plus = x.to_vec();
            plus[j] += step;
            let f_plus = flow_vec(variant, &plus, params);
            if one_sided {
                f_plus.iter().zip(&base).map(|(a, b)| (a - b) / step).collect()
            } else {
                let mut minus = x.to_vec();
                minus[j] -= step;
                let f_minus = flow_vec(variant, &minus, params);
                f_plus.iter().zip(&f_minus).map(|(a, b)| (a - b) / (2.0 * step)).collect()
            }
        })
        .collect();
    to_matrix(n, cols)
}

/// Damped Newton iteration on the flow from `start`.
pub fn newton(start: MeanFieldState, params: &ModelParams) -> Result<MeanFieldState, MeanFieldError> {
    let variant = start.variant();
    let mut x = start.as_slice().to_vec();
    let mut fx = flow_vec(variant, &x, params);
    let mut norm = max_abs(&fx);
    for _ in 0..MAX_NEWTON_ITERS {
        if norm < 1e-13 {
            break;
        }
        let jac = jacobian(&MeanFieldState::from_slice(variant, &x), params, JACOBIAN_STEP);
        let Some(dx) = jac.lu().solve(&(-DVector::from_column_slice(&fx))) else {
            return Err(MeanFieldError::NoConvergence(norm));
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + lambda * d).collect();
            let f_trial = flow_vec(variant, &trial, params);
            let n_trial = max_abs(&f_trial);
            if n_trial.is_finite() && n_trial < norm {
                x = trial;
                fx = f_trial;
                norm = n_trial;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm < RESIDUAL_TOL {
        Ok(MeanFieldState::from_slice(variant, &x))
    } else {
        Err(MeanFieldError::NoConvergence(norm))
    }
}

/// Newton seeds spread over the space of choice fractions.
fn seeds(params: &ModelParams) -> Vec<MeanFieldState> {
    let t = params.temperature;
    match params.variant {
        Variant::TwoGroup => {
            let f = |i: usize| (i + 1) as f64 / 22.0;
            (0..21)
                .flat_map(|i| (0..21).map(move |j| MeanFieldState::from_fractions([f(i), f(j)], t)))
                .collect()
        }
        Variant::FourAction => {
            // interior points of the simplex with spacing 1/12
            const N: usize = 12;
            let mut out = Vec::new();
            for i in 1..N {
                for j in 1..N - i {
                    for k in 1..N - i - j {
                        let l = N - i - j - k;
                        let p = [i, j, k, l].map(|c| c as f64 / N as f64);
                        let target = returns_for_fractions(&p, params).by_action();
                        let level: f64 = (0..4).map(|g| p[g] * target[g] - t * p[g].ln()).sum::<f64>() / 4.0;
                        out.push(MeanFieldState::FourAction(p.map(|q| t * q.ln() + level)));
                    }
                }
            }
            out
        }
    }
}

fn distance(a: &MeanFieldState, b: &MeanFieldState) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// All fixed points reachable by Newton from a grid of seeds, at temperature `t`.
///
/// Seeds that fail to converge are dropped. Results are sorted by their
/// first state component.
pub fn find_fixed_points(params: &ModelParams, temperature: f64) -> Result<Vec<FixedPoint>, MeanFieldError> {
    let params = params.clone().with_temperature(temperature).validated()?;
    let mut roots: Vec<MeanFieldState> = Vec::new();
    for seed in seeds(&params) {
        let Ok(root) = newton(seed, &params) else { continue };
        if roots.iter().all(|r| distance(r, &root) > DEDUP_DISTANCE) {
            roots.push(root);
        }
    }
    if roots.is_empty() {
        return Err(MeanFieldError::NoFixedPoint);
    }
    roots.sort_by(|a, b| a.as_slice()[0].total_cmp(&b.as_slice()[0]));
    Ok(roots.into_iter().map(|s| FixedPoint::at(s, &params)).collect())
}

/// Fixed point with eigen-decomposition at a known root.
pub(crate) fn classify(state: MeanFieldState, params: &ModelParams) -> FixedPoint {
    FixedPoint::at(state, params)
}
