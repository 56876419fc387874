//! Deterministic large-population, slow-learning dynamics.
//!
//! Taking the expectation of one learning step gives
//! `E[dA] = r (P E[S] - A)`, so in rescaled time `t = r n` the population
//! attractions follow `dA/dt = P(A) R(A) - A`. Prices become the means of the
//! bid and ask distributions, validity probabilities are Gaussian tails and
//! a valid trader on the long side finds a partner with probability equal
//! to the short-to-long volume ratio.

mod critical;
mod fixed;
pub mod normal;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::learning::softmax_into;
use crate::observables::logistic;
use crate::params::{ModelParams, ParamError, Variant, N_MARKETS};
use crate::report::{fmt_float, write_table};

pub use critical::{critical_temperature, phase_diagram, CriticalPoint, PhasePoint};
pub use fixed::{find_fixed_points, jacobian, newton, FixedPoint};
pub use normal::{std_normal_cdf, truncated_surplus, truncated_surplus_below};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("operation needs the {0:?} variant")]
    WrongVariant(Variant),
    #[error("no fixed point found from any seed")]
    NoFixedPoint,
    #[error("Newton iteration did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error("unsegregated fixed point is already unstable at the upper bracket end T = {0}")]
    UnstableAtUpperEnd(f64),
    #[error("unsegregated fixed point stays stable on [{lo}, {hi}]")]
    StableThroughout { lo: f64, hi: f64 },
}

/// Population state of the deterministic dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanFieldState {
    /// Common attractions `(A_B1, A_S1, A_B2, A_S2)`.
    FourAction([f64; 4]),
    /// Per-group market-1-minus-market-2 attraction difference.
    TwoGroup([f64; 2]),
}

impl MeanFieldState {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            MeanFieldState::FourAction(a) => a,
            MeanFieldState::TwoGroup(d) => d,
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            MeanFieldState::FourAction(_) => Variant::FourAction,
            MeanFieldState::TwoGroup(_) => Variant::TwoGroup,
        }
    }

    pub fn from_slice(variant: Variant, x: &[f64]) -> Self {
        match variant {
            Variant::FourAction => MeanFieldState::FourAction([x[0], x[1], x[2], x[3]]),
            Variant::TwoGroup => MeanFieldState::TwoGroup([x[0], x[1]]),
        }
    }

    /// Two-group state with the given market-1 fractions.
    pub fn from_fractions(f: [f64; 2], temperature: f64) -> Self {
        let delta = |f: f64| temperature * (f / (1.0 - f)).ln();
        MeanFieldState::TwoGroup([delta(f[0]), delta(f[1])])
    }

    /// Market-1 fractions `f = 1 / (1 + exp(-delta / T))` (two-group only).
    pub fn fractions(&self, temperature: f64) -> Option<[f64; 2]> {
        match self {
            MeanFieldState::TwoGroup(d) => Some([logistic(d[0] / temperature), logistic(d[1] / temperature)]),
            MeanFieldState::FourAction(_) => None,
        }
    }

    /// Choice probabilities (B1, S1, B2, S2) of the whole population.
    pub fn action_fractions(&self, params: &ModelParams) -> [f64; 4] {
        match self {
            MeanFieldState::FourAction(a) => {
                let mut p = [0.0; 4];
                softmax_into(a, params.temperature, &mut p);
                p
            }
            MeanFieldState::TwoGroup(_) => {
                let f = self.fractions(params.temperature).unwrap();
                let mut p = [0.0; 4];
                for g in 0..2 {
                    let pb = params.group_buy_prefs[g];
                    p[0] += 0.5 * f[g] * pb;
                    p[1] += 0.5 * f[g] * (1.0 - pb);
                    p[2] += 0.5 * (1.0 - f[g]) * pb;
                    p[3] += 0.5 * (1.0 - f[g]) * (1.0 - pb);
                }
                p
            }
        }
    }
}

/// Expected per-period score of each action, given that it is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedReturns {
    pub buy: [f64; N_MARKETS],
    pub sell: [f64; N_MARKETS],
}

impl ExpectedReturns {
    /// Ordered B1, S1, B2, S2.
    pub fn by_action(&self) -> [f64; 4] {
        [self.buy[0], self.sell[0], self.buy[1], self.sell[1]]
    }
}

/// Large-population market quantities that do not depend on the state.
#[derive(Debug, Clone, Copy)]
struct MarketConstants {
    /// Probability that a bid is valid.
    q_bid: f64,
    /// Probability that an ask is valid.
    q_ask: f64,
    bid_surplus: f64,
    ask_surplus: f64,
}

fn market_constants(params: &ModelParams, m: usize) -> MarketConstants {
    let price = params.mu_ask + params.theta[m] * (params.mu_bid - params.mu_ask);
    MarketConstants {
        q_bid: std_normal_cdf((params.mu_bid - price) / params.sigma_bid),
        q_ask: std_normal_cdf((price - params.mu_ask) / params.sigma_ask),
        bid_surplus: truncated_surplus(params.mu_bid, params.sigma_bid, price),
        ask_surplus: truncated_surplus_below(params.mu_ask, params.sigma_ask, price),
    }
}

/// Ratio of valid-ask volume to valid-bid volume at each market; the match
/// probabilities have a kink where it equals 1.
pub fn volume_ratios(fractions: &[f64; 4], params: &ModelParams) -> [f64; N_MARKETS] {
    let mut out = [0.0; N_MARKETS];
    for (m, r) in out.iter_mut().enumerate() {
        let c = market_constants(params, m);
        *r = fractions[2 * m + 1] * c.q_ask / (fractions[2 * m] * c.q_bid);
    }
    out
}

/// Expected returns for given population action fractions (B1, S1, B2, S2).
pub fn returns_for_fractions(fractions: &[f64; 4], params: &ModelParams) -> ExpectedReturns {
    let mut ret = ExpectedReturns { buy: [0.0; N_MARKETS], sell: [0.0; N_MARKETS] };
    for m in 0..N_MARKETS {
        let (x_buy, x_sell) = (fractions[2 * m], fractions[2 * m + 1]);
        if x_buy <= 0.0 || x_sell <= 0.0 {
            continue;
        }
        let c = market_constants(params, m);
        let valid_bids = x_buy * c.q_bid;
        let valid_asks = x_sell * c.q_ask;
        let buyer_match = (valid_asks / valid_bids).min(1.0);
        let seller_match = (valid_bids / valid_asks).min(1.0);
        ret.buy[m] = c.q_bid * buyer_match * c.bid_surplus;
        ret.sell[m] = c.q_ask * seller_match * c.ask_surplus;
    }
    ret
}

pub fn expected_returns(state: &MeanFieldState, params: &ModelParams) -> ExpectedReturns {
    returns_for_fractions(&state.action_fractions(params), params)
}

/// Time derivative of the state in rescaled time `t = r n`.
pub fn flow(state: &MeanFieldState, params: &ModelParams) -> MeanFieldState {
    let ret = expected_returns(state, params);
    match state {
        MeanFieldState::FourAction(a) => {
            let mut p = [0.0; 4];
            softmax_into(a, params.temperature, &mut p);
            let r = ret.by_action();
            MeanFieldState::FourAction(std::array::from_fn(|k| p[k] * r[k] - a[k]))
        }
        MeanFieldState::TwoGroup(d) => {
            let f = state.fractions(params.temperature).unwrap();
            MeanFieldState::TwoGroup(std::array::from_fn(|g| {
                let pb = params.group_buy_prefs[g];
                let r1 = pb * ret.buy[0] + (1.0 - pb) * ret.sell[0];
                let r2 = pb * ret.buy[1] + (1.0 - pb) * ret.sell[1];
                f[g] * r1 - (1.0 - f[g]) * r2 - d[g]
            }))
        }
    }
}

pub(crate) fn flow_vec(variant: Variant, x: &[f64], params: &ModelParams) -> Vec<f64> {
    flow(&MeanFieldState::from_slice(variant, x), params).as_slice().to_vec()
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Classic fourth-order Runge-Kutta over `[0, t_end]` with step `dt`.
pub fn integrate(start: MeanFieldState, params: &ModelParams, t_end: f64, dt: f64) -> MeanFieldState {
    let variant = start.variant();
    let mut x = start.as_slice().to_vec();
    let steps = (t_end / dt).round().max(0.0) as usize;
    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    for _ in 0..steps {
        let k1 = flow_vec(variant, &x, params);
        let k2 = flow_vec(variant, &axpy(&x, &k1, 0.5 * dt), params);
        let k3 = flow_vec(variant, &axpy(&x, &k2, 0.5 * dt), params);
        let k4 = flow_vec(variant, &axpy(&x, &k3, dt), params);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    MeanFieldState::from_slice(variant, &x)
}

/// One grid point of the two-group flow in fraction coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowArrow {
    pub f: [f64; 2],
    pub df_dt: [f64; 2],
}

/// Two-group flow at market-1 fractions `f`, via `df/dt = f (1 - f) / T dDelta/dt`.
pub fn fraction_flow(f: [f64; 2], params: &ModelParams) -> FlowArrow {
    let t = params.temperature;
    let d = flow(&MeanFieldState::from_fractions(f, t), params);
    let d = d.as_slice();
    FlowArrow { f, df_dt: std::array::from_fn(|g| f[g] * (1.0 - f[g]) / t * d[g]) }
}

/// Flow on an `n x n` grid of cell centres in `(0, 1)^2`.
pub fn flow_field(params: &ModelParams, n: usize) -> Result<Vec<FlowArrow>, MeanFieldError> {
    if params.variant != Variant::TwoGroup {
        return Err(MeanFieldError::WrongVariant(Variant::TwoGroup));
    }
    params.validate()?;
    let c = |i: usize| (i as f64 + 0.5) / n as f64;
    Ok((0..n)
        .flat_map(|i| (0..n).map(move |j| [c(i), c(j)]))
        .map(|f| fraction_flow(f, params))
        .collect())
}

pub fn write_flow_field_csv<W: std::io::Write>(w: W, arrows: &[FlowArrow]) -> std::io::Result<()> {
    write_table(
        w,
        &["f1", "f2", "df1_dt", "df2_dt"],
        arrows.iter().map(|a| {
            vec![fmt_float(a.f[0]), fmt_float(a.f[1]), fmt_float(a.df_dt[0]), fmt_float(a.df_dt[1])]
        }),
    )
}

/// Columns: state components, eigenvalue real parts, stability flag.
pub fn write_fixed_points_csv<W: std::io::Write>(w: W, points: &[FixedPoint], temperature: f64) -> std::io::Result<()> {
    let Some(first) = points.first() else {
        return write_table(w, &["temperature"], std::iter::empty());
    };
    let mut header: Vec<String> = vec!["temperature".into()];
    match first.state {
        MeanFieldState::FourAction(_) => {
            header.extend(["a_b1", "a_s1", "a_b2", "a_s2"].map(String::from));
            header.extend((1..=4).map(|k| format!("eig{k}_re")));
        }
        MeanFieldState::TwoGroup(_) => {
            header.extend(["delta1", "delta2", "f1", "f2"].map(String::from));
            header.extend((1..=2).map(|k| format!("eig{k}_re")));
        }
    }
    header.push("stable".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = points.iter().map(|p| {
        let mut row = vec![fmt_float(temperature)];
        row.extend(p.state.as_slice().iter().map(|&x| fmt_float(x)));
        if let Some(f) = p.state.fractions(temperature) {
            row.extend(f.iter().map(|&x| fmt_float(x)));
        }
        row.extend(p.eigenvalues.iter().map(|e| fmt_float(e.re)));
        row.push(p.stable.to_string());
        row
    });
    write_table(w, &header, rows)
}

pub fn write_phase_csv<W: std::io::Write>(w: W, rows: &[PhasePoint]) -> std::io::Result<()> {
    write_table(
        w,
        &["theta", "t_c"],
        rows.iter().map(|p| vec![fmt_float(p.theta), p.t_c.map_or_else(|| "nan".to_string(), fmt_float)]),
    )
}

pub(crate) fn to_matrix(n: usize, cols: Vec<Vec<f64>>) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}
