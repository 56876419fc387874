//! Model parameters, actions and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of markets. The model is defined for exactly two.
pub const N_MARKETS: usize = 2;

/// Which agent model is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Agents learn both the market and the side: four actions.
    FourAction,
    /// Two equal groups with fixed buy probabilities; agents learn only the market.
    TwoGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

/// Market index, 0 for market 1 and 1 for market 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Market(u8);

impl Market {
    pub const FIRST: Market = Market(0);
    pub const SECOND: Market = Market(1);
    pub const ALL: [Market; N_MARKETS] = [Market::FIRST, Market::SECOND];

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Market {
        assert!(i < N_MARKETS, "market index {i} out of range");
        Market(i as u8)
    }

    pub fn other(self) -> Market {
        Market(1 - self.0)
    }
}

/// One of the four trading actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub market: Market,
    pub side: Side,
}

impl Action {
    pub const B1: Action = Action { market: Market::FIRST, side: Side::Buy };
    pub const S1: Action = Action { market: Market::FIRST, side: Side::Sell };
    pub const B2: Action = Action { market: Market::SECOND, side: Side::Buy };
    pub const S2: Action = Action { market: Market::SECOND, side: Side::Sell };

    /// Canonical ordering used for every four-component array in this crate.
    pub const ALL: [Action; 4] = [Action::B1, Action::S1, Action::B2, Action::S2];

    pub fn index(self) -> usize {
        2 * self.market.index()
            + match self.side {
                Side::Buy => 0,
                Side::Sell => 1,
            }
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }
}

/// Everything that defines an experiment.
///
/// Only `mu_bid - mu_ask` enters the dynamics; the defaults put asks at 0
/// and bids at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_agents: usize,
    /// Market bias per market: 0 prices at the mean ask, 1 at the mean bid.
    pub theta: [f64; N_MARKETS],
    pub mu_ask: f64,
    pub mu_bid: f64,
    pub sigma_ask: f64,
    pub sigma_bid: f64,
    pub temperature: f64,
    pub forgetting_rate: f64,
    /// Number of trading periods per run.
    pub horizon: usize,
    pub variant: Variant,
    /// Buy probabilities of the two groups (two-group variant only).
    pub group_buy_prefs: [f64; 2],
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n_agents: 200,
            theta: [0.3, 0.7],
            mu_ask: 0.0,
            mu_bid: 1.0,
            sigma_ask: 1.0,
            sigma_bid: 1.0,
            temperature: 0.14,
            forgetting_rate: 0.1,
            horizon: 10_000,
            variant: Variant::FourAction,
            group_buy_prefs: [0.2, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("n_agents must be at least 2, got {0}")]
    TooFewAgents(usize),
    #[error("two-group variant needs an even number of agents, got {0}")]
    OddGroupSize(usize),
    #[error("theta{market} = {value} is outside [0, 1]")]
    ThetaOutOfRange { market: usize, value: f64 },
    #[error("{field} must be positive and finite, got {value}")]
    NonPositiveSigma { field: &'static str, value: f64 },
    #[error("temperature must be positive and finite, got {0}")]
    NonPositiveTemperature(f64),
    #[error("forgetting_rate must lie in (0, 1], got {0}")]
    ForgettingRateOutOfRange(f64),
    #[error("{field} must be finite, got {value}")]
    NonFiniteMean { field: &'static str, value: f64 },
    #[error("group buy preference {group} = {value} is outside [0, 1]")]
    BuyPrefOutOfRange { group: usize, value: f64 },
}

impl ModelParams {
    /// Two-group parameters from the analytical section: groups buying with
    /// probability 0.2 and 0.8, symmetric markets with bias 0.3.
    pub fn two_group() -> Self {
        ModelParams {
            n_agents: 100,
            variant: Variant::TwoGroup,
            ..ModelParams::default()
        }
    }

    /// Symmetric markets, theta1 = theta and theta2 = 1 - theta.
    pub fn with_symmetric_theta(mut self, theta: f64) -> Self {
        self.theta = [theta, 1.0 - theta];
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_forgetting_rate(mut self, r: f64) -> Self {
        self.forgetting_rate = r;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n_agents < 2 {
            return Err(ParamError::TooFewAgents(self.n_agents));
        }
        if self.variant == Variant::TwoGroup && !self.n_agents.is_multiple_of(2) {
            return Err(ParamError::OddGroupSize(self.n_agents));
        }
        for (m, &value) in self.theta.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::ThetaOutOfRange { market: m + 1, value });
            }
        }
        for (field, value) in [("mu_ask", self.mu_ask), ("mu_bid", self.mu_bid)] {
            if !value.is_finite() {
                return Err(ParamError::NonFiniteMean { field, value });
            }
        }
        for (field, value) in [("sigma_ask", self.sigma_ask), ("sigma_bid", self.sigma_bid)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamError::NonPositiveSigma { field, value });
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ParamError::NonPositiveTemperature(self.temperature));
        }
        if !(self.forgetting_rate > 0.0 && self.forgetting_rate <= 1.0) {
            return Err(ParamError::ForgettingRateOutOfRange(self.forgetting_rate));
        }
        for (g, &value) in self.group_buy_prefs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::BuyPrefOutOfRange { group: g + 1, value });
            }
        }
        Ok(())
    }

    /// Consumes and returns the parameters if every invariant holds.
    pub fn validated(self) -> Result<Self, ParamError> {
        self.validate()?;
        Ok(self)
    }

    /// Number of attractions each agent carries.
    pub fn n_actions(&self) -> usize {
        match self.variant {
            Variant::FourAction => 4,
            Variant::TwoGroup => 2,
        }
    }

    /// Group (0 or 1) of an agent in the two-group variant: the first half
    /// of the population is group 0.
    pub fn group_of(&self, agent: usize) -> usize {
        if agent < self.n_agents / 2 {
            0
        } else {
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = ModelParams::default();
        assert_eq!(p.clone().validated().unwrap(), p);
        assert!(ModelParams::two_group().validate().is_ok());
    }

    #[test]
    fn zero_temperature_rejected() {
        let p = ModelParams::default().with_temperature(0.0);
        assert_eq!(p.validate(), Err(ParamError::NonPositiveTemperature(0.0)));
    }

    #[test]
    fn theta_out_of_range_rejected() {
        let mut p = ModelParams::default();
        p.theta[0] = 1.2;
        assert_eq!(
            p.validate(),
            Err(ParamError::ThetaOutOfRange { market: 1, value: 1.2 })
        );
    }

    #[test]
    fn other_violations() {
        let mut p = ModelParams::two_group();
        p.n_agents = 101;
        assert_eq!(p.validate(), Err(ParamError::OddGroupSize(101)));

        let p = ModelParams::default().with_forgetting_rate(0.0);
        assert!(matches!(p.validate(), Err(ParamError::ForgettingRateOutOfRange(_))));
        let p = ModelParams::default().with_forgetting_rate(1.0);
        assert!(p.validate().is_ok());

        let mut p = ModelParams::default();
        p.sigma_bid = 0.0;
        assert!(matches!(
            p.validate(),
            Err(ParamError::NonPositiveSigma { field: "sigma_bid", .. })
        ));

        let mut p = ModelParams::default();
        p.n_agents = 1;
        assert_eq!(p.validate(), Err(ParamError::TooFewAgents(1)));
    }

    #[test]
    fn action_indices_round_trip() {
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i), *a);
        }
        assert_eq!(Market::FIRST.other(), Market::SECOND);
    }
}
