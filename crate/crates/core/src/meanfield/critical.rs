use super::fixed::{classify, newton, FixedPoint};
use super::{returns_for_fractions, MeanFieldError, MeanFieldState};
use crate::params::{ModelParams, Variant};

/// Bisection stops once the bracket is narrower than this.
pub const T_TOLERANCE: f64 = 1e-4;
/// Largest temperature step when following the symmetric branch.
const CONTINUATION_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub t_c: f64,
    /// Symmetric fixed point at the stable end of the final bracket.
    pub fixed_point: FixedPoint,
    pub bisection_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub theta: f64,
    /// `None` when the branch stays stable across the bracket.
    pub t_c: Option<f64>,
}

/// Starting guess on the unsegregated branch: every action equally likely.
fn symmetric_seed(params: &ModelParams) -> MeanFieldState {
    match params.variant {
        Variant::TwoGroup => MeanFieldState::TwoGroup([0.0, 0.0]),
        Variant::FourAction => {
            let r = returns_for_fractions(&[0.25; 4], params).by_action();
            MeanFieldState::FourAction(r.map(|x| 0.25 * x))
        }
    }
}

fn lerp(a: &MeanFieldState, b: &MeanFieldState, w: f64) -> MeanFieldState {
    let x: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(p, q)| p + w * (q - p)).collect();
    MeanFieldState::from_slice(a.variant(), &x)
}

struct Branch<'a> {
    params: &'a ModelParams,
}

impl Branch<'_> {
    fn solve(&self, t: f64, seed: MeanFieldState) -> Result<FixedPoint, MeanFieldError> {
        let p = self.params.clone().with_temperature(t);
        let root = newton(seed, &p)?;
        Ok(classify(root, &p))
    }

    fn unstable(fp: &FixedPoint) -> bool {
        fp.leading_real_part() > 0.0
    }
}

/// Temperature at which the unsegregated fixed point loses stability.
///
/// The branch is followed by continuation from `hi` toward `lo` until the
/// leading eigenvalue's real part first turns positive, then that sign change
/// is bisected to `T_TOLERANCE`. At low temperature the branch can regain
/// stability, so only the first loss coming down from `hi` is reported.
pub fn critical_temperature(params: &ModelParams, (lo, hi): (f64, f64)) -> Result<CriticalPoint, MeanFieldError> {
    params.clone().with_temperature(hi).validate()?;
    params.clone().with_temperature(lo).validate()?;
    let branch = Branch { params };

    let mut hi_fp = branch.solve(hi, symmetric_seed(&params.clone().with_temperature(hi)))?;
    if Branch::unstable(&hi_fp) {
        return Err(MeanFieldError::UnstableAtUpperEnd(hi));
    }
    let mut t_hi = hi;
    let mut t = hi;
    let lo_fp = loop {
        if t <= lo {
            return Err(MeanFieldError::StableThroughout { lo, hi });
        }
        t = (t - CONTINUATION_STEP).max(lo);
        let fp = branch.solve(t, hi_fp.state)?;
        if Branch::unstable(&fp) {
            break fp;
        }
        t_hi = t;
        hi_fp = fp;
    };
    let mut lo_fp = lo_fp;

    let mut t_lo = t;
    let mut steps = 0;
    while t_hi - t_lo > T_TOLERANCE {
        let mid = 0.5 * (t_lo + t_hi);
        let fp = branch.solve(mid, lerp(&lo_fp.state, &hi_fp.state, 0.5))?;
        if Branch::unstable(&fp) {
            t_lo = mid;
            lo_fp = fp;
        } else {
            t_hi = mid;
            hi_fp = fp;
        }
        steps += 1;
    }
    Ok(CriticalPoint { t_c: 0.5 * (t_lo + t_hi), fixed_point: hi_fp, bisection_steps: steps })
}

/// Critical temperature for symmetric markets `theta1 = 1 - theta2 = theta`
/// across `thetas`. Each point first tries a narrow bracket around the
/// previous result, then falls back to `bracket`.
pub fn phase_diagram(params: &ModelParams, thetas: &[f64], bracket: (f64, f64)) -> Vec<PhasePoint> {
    let mut prev: Option<f64> = None;
    thetas
        .iter()
        .map(|&theta| {
            let p = params.clone().with_symmetric_theta(theta);
            let narrow = prev.map(|tc| ((0.8 * tc).max(bracket.0), (1.25 * tc).min(bracket.1)));
            let result = narrow
                .and_then(|b| critical_temperature(&p, b).ok())
                .or_else(|| critical_temperature(&p, bracket).ok());
            let t_c = result.map(|c| c.t_c);
            if t_c.is_some() {
                prev = t_c;
            }
            PhasePoint { theta, t_c }
        })
        .collect()
}
