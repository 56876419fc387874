//! Fixtures shared by the benchmarks.

use segregation_core::rng::{run_stream, RunRng};
use segregation_core::{Market, Order, Side};

/// `n` orders for one market, alternating buyers and sellers, with prices
/// spread deterministically around the default bid and ask means.
pub fn order_book(n: usize) -> Vec<Order> {
    (0..n)
        .map(|i| {
            let side = if i % 2 == 0 { Side::Buy } else { Side::Sell };
            let jitter = ((i * 7919) % 101) as f64 / 50.0 - 1.0;
            let price = match side {
                Side::Buy => 1.0 + jitter,
                Side::Sell => jitter,
            };
            Order { trader: i, market: Market::FIRST, side, price }
        })
        .collect()
}

pub fn bench_rng() -> RunRng {
    run_stream(0xBE7C4, 0)
}
