//! Single-period clearing of one double-auction market.
//!
//! The price interpolates between the mean ask and the mean bid with the
//! market bias. Bids below and asks above the price are discarded, and the
//! surviving orders are paired at random. Unmatched traders score zero.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::params::{Market, Side};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order {
    pub trader: usize,
    pub market: Market,
    pub side: Side,
    /// Bid for buyers, ask for sellers.
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub buyer: usize,
    pub seller: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClearingCounts {
    pub n_bids: usize,
    pub n_asks: usize,
    pub n_valid_bids: usize,
    pub n_valid_asks: usize,
    pub n_trades: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClearingResult {
    /// `None` when the market had no bid or no ask.
    pub price: Option<f64>,
    pub matches: Vec<Match>,
    /// Realized score of every trader that traded. Anyone not listed scored 0.
    pub scores: Vec<(usize, f64)>,
    pub counts: ClearingCounts,
}

impl ClearingResult {
    pub fn score_of(&self, trader: usize) -> f64 {
        self.scores
            .iter()
            .find(|(t, _)| *t == trader)
            .map_or(0.0, |&(_, s)| s)
    }
}

/// `<a> + theta (<b> - <a>)`, or `None` if either side is empty.
pub fn set_price<'a, I>(orders: I, theta: f64) -> Option<f64>
where
    I: IntoIterator<Item = &'a Order>,
{
    let (mut bid_sum, mut n_bids, mut ask_sum, mut n_asks) = (0.0, 0usize, 0.0, 0usize);
    for o in orders {
        match o.side {
            Side::Buy => {
                bid_sum += o.price;
                n_bids += 1;
            }
            Side::Sell => {
                ask_sum += o.price;
                n_asks += 1;
            }
        }
    }
    if n_bids == 0 || n_asks == 0 {
        return None;
    }
    let mean_bid = bid_sum / n_bids as f64;
    let mean_ask = ask_sum / n_asks as f64;
    Some(mean_ask + theta * (mean_bid - mean_ask))
}

/// Clears one market for one period.
///
/// Orders priced exactly at the trading price are valid. The longer of the
/// two valid sides (bids on a tie) is shuffled with `rng` and zipped against
/// the shorter side in submission order. No randomness is consumed when the
/// market cannot trade.
pub fn clear_market<R: Rng + ?Sized>(orders: &[Order], theta: f64, rng: &mut R) -> ClearingResult {
    let mut counts = ClearingCounts::default();
    for o in orders {
        match o.side {
            Side::Buy => counts.n_bids += 1,
            Side::Sell => counts.n_asks += 1,
        }
    }
    let Some(price) = set_price(orders, theta) else {
        return ClearingResult { price: None, counts, ..Default::default() };
    };

    let mut bids: Vec<&Order> = Vec::new();
    let mut asks: Vec<&Order> = Vec::new();
    for o in orders {
        match o.side {
            Side::Buy if o.price >= price => bids.push(o),
            Side::Sell if o.price <= price => asks.push(o),
            _ => {}
        }
    }
    counts.n_valid_bids = bids.len();
    counts.n_valid_asks = asks.len();
    counts.n_trades = bids.len().min(asks.len());

    if counts.n_trades > 0 {
        if bids.len() >= asks.len() {
            bids.shuffle(rng);
        } else {
            asks.shuffle(rng);
        }
    }

    let mut matches = Vec::with_capacity(counts.n_trades);
    let mut scores = Vec::with_capacity(2 * counts.n_trades);
    for (b, a) in bids.iter().zip(asks.iter()) {
        matches.push(Match { buyer: b.trader, seller: a.trader });
        scores.push((b.trader, b.price - price));
        scores.push((a.trader, price - a.price));
    }

    ClearingResult { price: Some(price), matches, scores, counts }
}
