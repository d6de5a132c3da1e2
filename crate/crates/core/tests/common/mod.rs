//! Brute-force reference book used as an oracle by the integration tests.
//!
//! Orders live in one flat vector; every query scans it. Market orders sort
//! the opposite side by (price, arrival) from scratch.

#![allow(dead_code)]

use cobsim::engine::{Phase, SeriesRow, SimEvent};
use cobsim::{Action, Fill, Side};

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowOrder {
    pub id: u64,
    pub side: Side,
    pub price: u64,
    pub remaining: u64,
    pub arrival: usize,
}

#[derive(Debug, Default, Clone)]
pub struct ShadowBook {
    pub orders: Vec<ShadowOrder>,
    arrivals: usize,
}

impl ShadowBook {
    pub fn add(&mut self, id: u64, side: Side, price: u64, volume: u64) {
        self.arrivals += 1;
        self.orders.push(ShadowOrder { id, side, price, remaining: volume, arrival: self.arrivals });
    }

    pub fn total(&self, side: Side) -> u64 {
        self.orders.iter().filter(|o| o.side == side).map(|o| o.remaining).sum()
    }

    pub fn best(&self, side: Side) -> Option<u64> {
        let prices = self.orders.iter().filter(|o| o.side == side).map(|o| o.price);
        match side {
            Side::Buy => prices.max(),
            Side::Sell => prices.min(),
        }
    }

    /// Volume within `l` ticks of the side's best price.
    pub fn within(&self, side: Side, l: u64) -> u64 {
        let Some(best) = self.best(side) else { return 0 };
        self.orders.iter().filter(|o| o.side == side && best.abs_diff(o.price) <= l).map(|o| o.remaining).sum()
    }

    /// Fills a market order on `side` would produce, best price first and
    /// oldest first within a price. Applies them.
    pub fn market(&mut self, side: Side, volume: u64) -> Vec<Fill> {
        let maker_side = side.opposite();
        let mut idx: Vec<usize> = (0..self.orders.len()).filter(|&i| self.orders[i].side == maker_side).collect();
        idx.sort_by_key(|&i| {
            let o = &self.orders[i];
            let key = if maker_side == Side::Sell { o.price as i64 } else { -(o.price as i64) };
            (key, o.arrival)
        });
        let mut left = volume;
        let mut fills = Vec::new();
        for i in idx {
            if left == 0 {
                break;
            }
            let o = &mut self.orders[i];
            let take = left.min(o.remaining);
            o.remaining -= take;
            left -= take;
            fills.push(Fill { price: cobsim::PriceTick::new(o.price).unwrap(), volume: take, maker: o.id });
        }
        self.orders.retain(|o| o.remaining > 0);
        fills
    }

    pub fn cancel(&mut self, id: u64) -> Option<ShadowOrder> {
        let i = self.orders.iter().position(|o| o.id == id)?;
        Some(self.orders.remove(i))
    }

    pub fn row(&self, t: f64) -> SeriesRow {
        let (b, a) = (self.best(Side::Buy), self.best(Side::Sell));
        SeriesRow {
            t,
            best_bid: b.and_then(cobsim::PriceTick::new),
            best_ask: a.and_then(cobsim::PriceTick::new),
            spread: match (b, a) {
                (Some(b), Some(a)) => Some(a - b),
                _ => None,
            },
            s_total: self.total(Side::Sell),
            d_total: self.total(Side::Buy),
            s100: self.within(Side::Sell, 100),
            d100: self.within(Side::Buy, 100),
        }
    }
}

/// Outcome of replaying a log through the shadow book.
#[derive(Debug, Default)]
pub struct ShadowReplay {
    pub rows: Vec<SeriesRow>,
    pub fill_mismatches: usize,
    pub cancel_mismatches: usize,
    /// Market or cancel events drawn while their guard should have held them.
    pub guard_violations: usize,
    /// Events seen while some side was below its floor.
    pub events_below_floor: usize,
    pub book: ShadowBook,
}

/// Replays `events` (seed orders included) and samples a row at every whole
/// second, as the engine does.
pub fn shadow_replay(events: &[SimEvent], s_min: u64, d_min: u64) -> ShadowReplay {
    let mut out = ShadowReplay::default();
    let mut next = 1.0f64;
    for ev in events {
        if ev.phase != Phase::Seed {
            while next <= ev.t {
                out.rows.push(out.book.row(next));
                next += 1.0;
            }
            let s = out.book.total(Side::Sell);
            let d = out.book.total(Side::Buy);
            if s < s_min || d < d_min {
                out.events_below_floor += 1;
            }
            // the side whose depth a market order or cancel draws down
            let drained = match ev.action {
                Action::Market => Some(ev.side.opposite()),
                Action::Cancel => Some(ev.side),
                Action::Limit => None,
            };
            match drained {
                Some(Side::Sell) if s < s_min => out.guard_violations += 1,
                Some(Side::Buy) if d < d_min => out.guard_violations += 1,
                _ => {}
            }
        }
        match ev.action {
            Action::Limit => {
                if !ev.gated {
                    out.book.add(ev.order_id.unwrap(), ev.side, ev.price.unwrap().get(), ev.volume);
                }
            }
            Action::Market => {
                if out.book.market(ev.side, ev.volume) != ev.fills {
                    out.fill_mismatches += 1;
                }
            }
            Action::Cancel => {
                if !ev.gated {
                    match out.book.cancel(ev.order_id.unwrap()) {
                        Some(o) if o.remaining == ev.volume && Some(o.price) == ev.price.map(|p| p.get()) => {}
                        _ => out.cancel_mismatches += 1,
                    }
                }
            }
        }
    }
    out
}
