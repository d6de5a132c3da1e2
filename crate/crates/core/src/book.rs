//! Consolidated order book on an integer price grid.
//!
//! Prices are carried as tick indices ([`PriceTick`]); the money value of a
//! price is `index * tick` and only appears at the I/O boundary. Each price
//! level is a FIFO queue (price-time priority). Orders live in a slab and are
//! linked into their level with intrusive prev/next indices so that removal of
//! an arbitrary order (cancellation) is O(1) apart from the level lookup.
//!
//! Limit orders are placed by *level*, counted from the opposite best price:
//! a buy at level `l` rests at `best_ask - l`, a sell at `best_bid + l`. With
//! `l >= 1` a limit order can never be marketable, so the book is never
//! crossed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Globally unique order identifier.
pub type OrderId = u64;

/// Default maximal submission level.
pub const DEFAULT_MAX_LEVEL: u64 = 1000;

const NIL: usize = usize::MAX;

/// Price expressed as an index on the tick grid (`price / tick`). Always >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PriceTick(u64);

impl PriceTick {
    pub fn new(index: u64) -> Option<Self> {
        (index >= 1).then_some(Self(index))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// Money value of this price for a given tick size.
    pub fn money(self, tick: u64) -> u64 {
        self.0 * tick
    }
}

impl TryFrom<u64> for PriceTick {
    type Error = String;

    fn try_from(v: u64) -> Result<Self, Self::Error> {
        PriceTick::new(v).ok_or_else(|| "price tick must be >= 1".to_string())
    }
}

impl From<PriceTick> for u64 {
    fn from(p: PriceTick) -> u64 {
        p.0
    }
}

impl fmt::Display for PriceTick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Direction of an order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A resting limit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub side: Side,
    pub price: PriceTick,
    pub remaining: u64,
    pub seq: u64,
}

/// One maker-side fill produced by a market order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub price: PriceTick,
    pub volume: u64,
    pub maker: OrderId,
}

/// Outcome of a market order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionReport {
    pub side: Side,
    pub requested: u64,
    pub fills: Vec<Fill>,
    pub filled_total: u64,
    pub unfilled: u64,
    /// Spread in ticks right after execution; `None` if a side is empty.
    pub spread_after: Option<u64>,
    /// The opposite side ran out of liquidity before the order was filled.
    pub depleted: bool,
}

/// How far from the best price a depth query reaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthWindow {
    /// Levels `0..=l` counted from the best price of each side.
    Within(u64),
    All,
}

/// Instant liquidity on both sides of the book.
///
/// `s_l`/`s_total` are the sell-side (ask) volumes, `d_l`/`d_total` the
/// buy-side (bid) volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DepthView {
    pub s_l: u64,
    pub d_l: u64,
    pub s_total: u64,
    pub d_total: u64,
}

/// Best quotes and spread in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quote {
    pub best_bid: PriceTick,
    pub best_ask: PriceTick,
    pub spread: u64,
}

impl Quote {
    /// Mid price in ticks (may be a half tick).
    pub fn mid(&self) -> f64 {
        (self.best_bid.get() + self.best_ask.get()) as f64 / 2.0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("tick size must be positive")]
    InvalidTick,
    #[error("initial reference price must be >= 1 tick")]
    InvalidReference,
    #[error("level {level} outside [1, {max}]")]
    LevelOutOfRange { level: u64, max: u64 },
    #[error("level {level} below reference {reference} resolves to a price below one tick")]
    PriceOutOfRange { level: u64, reference: u64 },
    #[error("order volume must be >= 1")]
    ZeroVolume,
    #[error("price {price} for a {side} order would cross the book")]
    WouldCross { side: Side, price: u64 },
    #[error("unknown order id {0}")]
    UnknownOrder(OrderId),
    #[error("profile needs both sides of the book to be non-empty")]
    OneSided,
}

#[derive(Debug, Clone)]
struct Node {
    order: Order,
    prev: usize,
    next: usize,
    active_idx: usize,
}

#[derive(Debug, Clone, Copy)]
struct Level {
    head: usize,
    tail: usize,
    volume: u64,
    count: u32,
}

#[derive(Debug, Clone, Default)]
struct SideBook {
    levels: BTreeMap<u64, Level>,
    total: u64,
    // Slab slots of every resting order on this side, in no particular order.
    active: Vec<usize>,
}

/// The order book state. See the module docs for conventions.
#[derive(Debug, Clone)]
pub struct Book {
    tick: u64,
    initial_reference: PriceTick,
    max_level: u64,
    last_trade: Option<PriceTick>,
    bids: SideBook,
    asks: SideBook,
    nodes: Vec<Node>,
    free: Vec<usize>,
    slot_of: HashMap<OrderId, usize>,
    next_id: OrderId,
    next_seq: u64,
    rejected: u64,
}

impl Book {
    /// Empty book. `tick` is the money value of one grid step.
    pub fn new(tick: u64, initial_reference: u64) -> Result<Self, BookError> {
        if tick == 0 {
            return Err(BookError::InvalidTick);
        }
        let initial_reference = PriceTick::new(initial_reference).ok_or(BookError::InvalidReference)?;
        Ok(Book {
            tick,
            initial_reference,
            max_level: DEFAULT_MAX_LEVEL,
            last_trade: None,
            bids: SideBook::default(),
            asks: SideBook::default(),
            nodes: Vec::new(),
            free: Vec::new(),
            slot_of: HashMap::new(),
            next_id: 1,
            next_seq: 0,
            rejected: 0,
        })
    }

    /// Sets the largest level accepted by [`Book::submit_limit`].
    pub fn with_max_level(mut self, max_level: u64) -> Self {
        self.max_level = max_level.max(1);
        self
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn max_level(&self) -> u64 {
        self.max_level
    }

    pub fn initial_reference(&self) -> PriceTick {
        self.initial_reference
    }

    pub fn last_trade(&self) -> Option<PriceTick> {
        self.last_trade
    }

    /// Number of limit submissions rejected because their price fell below one tick.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn best_bid(&self) -> Option<PriceTick> {
        self.bids.levels.last_key_value().map(|(&p, _)| PriceTick(p))
    }

    pub fn best_ask(&self) -> Option<PriceTick> {
        self.asks.levels.first_key_value().map(|(&p, _)| PriceTick(p))
    }

    /// Number of resting orders on one side.
    pub fn order_count(&self, side: Side) -> usize {
        self.side(side).active.len()
    }

    /// Total resting volume on one side.
    pub fn side_volume(&self, side: Side) -> u64 {
        self.side(side).total
    }

    pub fn order(&self, id: OrderId) -> Option<&Order> {
        self.slot_of.get(&id).map(|&slot| &self.nodes[slot].order)
    }

    /// Orders resting at one price in FIFO order.
    pub fn level_orders(&self, side: Side, price: PriceTick) -> Vec<Order> {
        let mut out = Vec::new();
        if let Some(level) = self.side(side).levels.get(&price.get()) {
            let mut cur = level.head;
            while cur != NIL {
                out.push(self.nodes[cur].order);
                cur = self.nodes[cur].next;
            }
        }
        out
    }

    /// Aggregated (price, volume) pairs of one side, best price first.
    pub fn levels(&self, side: Side) -> Vec<(PriceTick, u64)> {
        let book = self.side(side);
        let it = book.levels.iter().map(|(&p, l)| (PriceTick(p), l.volume));
        match side {
            Side::Buy => it.rev().collect(),
            Side::Sell => it.collect(),
        }
    }

    /// Price a limit order at `level` on `side` would rest at, without submitting it.
    pub fn resolve_level(&self, side: Side, level: u64) -> Result<PriceTick, BookError> {
        if level == 0 || level > self.max_level {
            return Err(BookError::LevelOutOfRange { level, max: self.max_level });
        }
        let reference = self.reference_for(side);
        let index = match side {
            Side::Buy => reference.get().checked_sub(level).filter(|&p| p >= 1),
            Side::Sell => reference.get().checked_add(level),
        };
        index.map(PriceTick).ok_or(BookError::PriceOutOfRange { level, reference: reference.get() })
    }

    // Opposite best price; falls back to the last trade, then to the initial
    // reference, when the opposite side is empty.
    fn reference_for(&self, side: Side) -> PriceTick {
        let opposite_best = match side {
            Side::Buy => self.best_ask(),
            Side::Sell => self.best_bid(),
        };
        opposite_best.or(self.last_trade).unwrap_or(self.initial_reference)
    }

    /// Places a limit order `level` ticks away from the opposite best price.
    pub fn submit_limit(&mut self, side: Side, level: u64, volume: u64) -> Result<Order, BookError> {
        if volume == 0 {
            return Err(BookError::ZeroVolume);
        }
        let price = match self.resolve_level(side, level) {
            Ok(p) => p,
            Err(e) => {
                if matches!(e, BookError::PriceOutOfRange { .. }) {
                    self.rejected += 1;
                }
                return Err(e);
            }
        };
        Ok(self.rest(side, price, volume))
    }

    /// Places a limit order at an explicit price. Used when replaying logs;
    /// refuses prices that would cross the book.
    pub fn insert_at(&mut self, side: Side, price: PriceTick, volume: u64) -> Result<Order, BookError> {
        if volume == 0 {
            return Err(BookError::ZeroVolume);
        }
        let crosses = match side {
            Side::Buy => self.best_ask().is_some_and(|a| price >= a),
            Side::Sell => self.best_bid().is_some_and(|b| price <= b),
        };
        if crosses {
            return Err(BookError::WouldCross { side, price: price.get() });
        }
        Ok(self.rest(side, price, volume))
    }

    fn rest(&mut self, side: Side, price: PriceTick, volume: u64) -> Order {
        let order = Order { id: self.next_id, side, price, remaining: volume, seq: self.next_seq };
        self.next_id += 1;
        self.next_seq += 1;

        let node = Node { order, prev: NIL, next: NIL, active_idx: 0 };
        let slot = match self.free.pop() {
            Some(slot) => {
                self.nodes[slot] = node;
                slot
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        };

        let book = match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        let level = book.levels.entry(price.get()).or_insert(Level { head: NIL, tail: NIL, volume: 0, count: 0 });
        if level.tail == NIL {
            level.head = slot;
        } else {
            self.nodes[level.tail].next = slot;
            self.nodes[slot].prev = level.tail;
        }
        level.tail = slot;
        level.volume += volume;
        level.count += 1;
        book.total += volume;
        self.nodes[slot].active_idx = book.active.len();
        book.active.push(slot);
        self.slot_of.insert(order.id, slot);
        order
    }

    /// Executes a market order against the opposite side, best price first,
    /// FIFO within a level. Shortfall is reported, not treated as an error.
    pub fn execute_market(&mut self, side: Side, volume: u64) -> ExecutionReport {
        let mut fills = Vec::new();
        let mut left = volume;
        let (book, nodes, free, slot_of) = match side {
            Side::Buy => (&mut self.asks, &mut self.nodes, &mut self.free, &mut self.slot_of),
            Side::Sell => (&mut self.bids, &mut self.nodes, &mut self.free, &mut self.slot_of),
        };

        while left > 0 {
            let mut entry = match side {
                Side::Buy => book.levels.first_entry(),
                Side::Sell => book.levels.last_entry(),
            };
            let Some(level) = entry.as_mut() else { break };
            let price = PriceTick(*level.key());
            let lvl = level.get_mut();
            while left > 0 && lvl.head != NIL {
                let slot = lvl.head;
                let node = &mut nodes[slot];
                let take = node.order.remaining.min(left);
                node.order.remaining -= take;
                left -= take;
                lvl.volume -= take;
                book.total -= take;
                fills.push(Fill { price, volume: take, maker: node.order.id });
                if node.order.remaining == 0 {
                    let next = node.next;
                    let active_idx = node.active_idx;
                    let id = node.order.id;
                    lvl.head = next;
                    if next == NIL {
                        lvl.tail = NIL;
                    } else {
                        nodes[next].prev = NIL;
                    }
                    lvl.count -= 1;
                    remove_active(&mut book.active, nodes, active_idx);
                    slot_of.remove(&id);
                    free.push(slot);
                }
            }
            if lvl.head == NIL {
                if let Some(level) = entry {
                    level.remove();
                }
            }
        }

        if let Some(last) = fills.last() {
            self.last_trade = Some(last.price);
        }
        let filled_total = volume - left;
        ExecutionReport {
            side,
            requested: volume,
            fills,
            filled_total,
            unfilled: left,
            spread_after: self.spread_and_best().map(|q| q.spread),
            depleted: left > 0,
        }
    }

    /// Cancels one resting order on `side`, chosen uniformly over orders.
    pub fn cancel_uniform<R: Rng + ?Sized>(&mut self, side: Side, rng: &mut R) -> Option<Order> {
        let n = self.side(side).active.len();
        if n == 0 {
            return None;
        }
        let slot = self.side(side).active[rng.random_range(0..n)];
        Some(self.remove_slot(slot))
    }

    /// Cancels a specific order by id.
    pub fn cancel_order(&mut self, id: OrderId) -> Result<Order, BookError> {
        let slot = *self.slot_of.get(&id).ok_or(BookError::UnknownOrder(id))?;
        Ok(self.remove_slot(slot))
    }

    fn remove_slot(&mut self, slot: usize) -> Order {
        let Node { order, prev, next, active_idx } = self.nodes[slot].clone();
        let book = match order.side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        };
        let level = book.levels.get_mut(&order.price.get()).expect("resting order without a level");
        if prev == NIL {
            level.head = next;
        } else {
            self.nodes[prev].next = next;
        }
        if next == NIL {
            level.tail = prev;
        } else {
            self.nodes[next].prev = prev;
        }
        level.volume -= order.remaining;
        level.count -= 1;
        if level.count == 0 {
            book.levels.remove(&order.price.get());
        }
        book.total -= order.remaining;
        remove_active(&mut book.active, &mut self.nodes, active_idx);
        self.slot_of.remove(&order.id);
        self.free.push(slot);
        order
    }

    /// Instant liquidity `s(l)`, `d(l)` and the side totals.
    pub fn depth(&self, window: DepthWindow) -> DepthView {
        let (s_l, d_l) = match window {
            DepthWindow::All => (self.asks.total, self.bids.total),
            DepthWindow::Within(l) => {
                let s_l = self.best_ask().map_or(0, |a| {
                    let hi = a.get().saturating_add(l);
                    self.asks.levels.range(a.get()..=hi).map(|(_, v)| v.volume).sum()
                });
                let d_l = self.best_bid().map_or(0, |b| {
                    let lo = b.get().saturating_sub(l);
                    self.bids.levels.range(lo..=b.get()).map(|(_, v)| v.volume).sum()
                });
                (s_l, d_l)
            }
        };
        DepthView { s_l, d_l, s_total: self.asks.total, d_total: self.bids.total }
    }

    /// Best quotes and spread `(ask - bid)` in ticks, if both sides exist.
    pub fn spread_and_best(&self) -> Option<Quote> {
        let best_bid = self.best_bid()?;
        let best_ask = self.best_ask()?;
        Some(Quote { best_bid, best_ask, spread: best_ask.get() - best_bid.get() })
    }

    /// Signed volume profile around the mid price.
    ///
    /// The result has length `2 * window`. Slot `window - k` holds the bid
    /// volume at offset `k` below the mid (positive), slot `window + k - 1`
    /// the ask volume at offset `k` above the mid (negative), for
    /// `k = 1..=window`. Offsets are rounded away from the mid, so with an odd
    /// spread the best quotes sit at offset 1.
    pub fn profile_snapshot(&self, window: usize) -> Result<Vec<i64>, BookError> {
        let quote = self.spread_and_best().ok_or(BookError::OneSided)?;
        let mut x = vec![0i64; 2 * window];
        if window == 0 {
            return Ok(x);
        }
        let twice_mid = quote.best_bid.get() + quote.best_ask.get();
        let floor_mid = twice_mid / 2;
        let ceil_mid = twice_mid.div_ceil(2);
        let w = window as u64;

        for (&p, level) in self.asks.levels.range(..=floor_mid + w) {
            let k = p - floor_mid;
            x[window + k as usize - 1] = -(level.volume as i64);
        }
        let lo = ceil_mid.saturating_sub(w).max(1);
        for (&p, level) in self.bids.levels.range(lo..) {
            let k = ceil_mid - p;
            x[window - k as usize] = level.volume as i64;
        }
        Ok(x)
    }

    fn side(&self, side: Side) -> &SideBook {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }
}

fn remove_active(active: &mut Vec<usize>, nodes: &mut [Node], idx: usize) {
    active.swap_remove(idx);
    if let Some(&moved) = active.get(idx) {
        nodes[moved].active_idx = idx;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Worked example on a tick of 5: bid at 150000, asks 68 @150005 and 120 @150010.
    fn walk_book() -> Book {
        let mut book = Book::new(5, 30_001).unwrap();
        book.insert_at(Side::Buy, PriceTick(30_000), 50).unwrap();
        book.insert_at(Side::Sell, PriceTick(30_001), 68).unwrap();
        book.insert_at(Side::Sell, PriceTick(30_002), 120).unwrap();
        book
    }

    #[test]
    fn empty_book() {
        let book = Book::new(5, 30_000).unwrap();
        assert_eq!(book.best_bid(), None);
        assert_eq!(book.best_ask(), None);
        assert_eq!(book.depth(DepthWindow::All), DepthView::default());
        assert!(book.spread_and_best().is_none());
        assert_eq!(book.profile_snapshot(5), Err(BookError::OneSided));
    }

    #[test]
    fn bad_construction() {
        assert_eq!(Book::new(0, 10).unwrap_err(), BookError::InvalidTick);
        assert_eq!(Book::new(5, 0).unwrap_err(), BookError::InvalidReference);
    }

    #[test]
    fn buy_level_is_counted_from_the_ask() {
        let mut book = Book::new(5, 30_000).unwrap();
        book.insert_at(Side::Sell, PriceTick(30_002), 10).unwrap();
        let o = book.submit_limit(Side::Buy, 1, 3).unwrap();
        assert_eq!(o.price.money(5), 150_005);
    }

    #[test]
    fn sell_level_is_counted_from_the_bid() {
        let mut book = Book::new(5, 30_000).unwrap();
        book.insert_at(Side::Buy, PriceTick(30_000), 10).unwrap();
        let o = book.submit_limit(Side::Sell, 2, 3).unwrap();
        assert_eq!(o.price.money(5), 150_010);
    }

    #[test]
    fn empty_opposite_side_uses_reference_then_last_trade() {
        let mut book = Book::new(1, 100).unwrap();
        assert_eq!(book.submit_limit(Side::Buy, 3, 1).unwrap().price, PriceTick(97));
        assert_eq!(book.submit_limit(Side::Sell, 2, 5).unwrap().price, PriceTick(99));
        // consume the only ask; asks empty, last trade at 99
        let r = book.execute_market(Side::Buy, 5);
        assert!(!r.depleted);
        assert_eq!(book.last_trade(), Some(PriceTick(99)));
        assert_eq!(book.submit_limit(Side::Buy, 1, 1).unwrap().price, PriceTick(98));
    }

    #[test]
    fn fifo_within_level() {
        let mut book = Book::new(1, 100).unwrap();
        let a = book.submit_limit(Side::Buy, 1, 2).unwrap();
        let b = book.submit_limit(Side::Buy, 1, 2).unwrap();
        assert_eq!(a.price, b.price);
        assert!(b.seq > a.seq);
        let q = book.level_orders(Side::Buy, a.price);
        assert_eq!(q.iter().map(|o| o.id).collect::<Vec<_>>(), vec![a.id, b.id]);
        let r = book.execute_market(Side::Sell, 3);
        assert_eq!(r.fills[0].maker, a.id);
        assert_eq!(r.fills[1], Fill { price: a.price, volume: 1, maker: b.id });
        assert_eq!(book.order(b.id).unwrap().remaining, 1);
    }

    #[test]
    fn level_and_price_range_errors() {
        let mut book = Book::new(1, 5).unwrap().with_max_level(10);
        assert_eq!(book.submit_limit(Side::Buy, 0, 1).unwrap_err(), BookError::LevelOutOfRange { level: 0, max: 10 });
        assert_eq!(book.submit_limit(Side::Buy, 11, 1).unwrap_err(), BookError::LevelOutOfRange { level: 11, max: 10 });
        assert_eq!(
            book.submit_limit(Side::Buy, 5, 1).unwrap_err(),
            BookError::PriceOutOfRange { level: 5, reference: 5 }
        );
        assert_eq!(book.rejected(), 1);
        assert_eq!(book.submit_limit(Side::Buy, 1, 0).unwrap_err(), BookError::ZeroVolume);
        assert_eq!(book.submit_limit(Side::Buy, 4, 1).unwrap().price, PriceTick(1));
    }

    #[test]
    fn market_walk_across_two_levels() {
        let mut book = walk_book();
        let r = book.execute_market(Side::Buy, 70);
        let fills: Vec<_> = r.fills.iter().map(|f| (f.price.money(5), f.volume)).collect();
        assert_eq!(fills, vec![(150_005, 68), (150_010, 2)]);
        assert_eq!(r.filled_total, 70);
        assert_eq!(r.unfilled, 0);
        assert_eq!(r.spread_after, Some(2));
    }

    #[test]
    fn exact_consumption_removes_level() {
        let mut book = walk_book();
        assert_eq!(book.spread_and_best().unwrap().spread, 1);
        let r = book.execute_market(Side::Buy, 68);
        assert_eq!(r.fills.len(), 1);
        assert_eq!(book.best_ask(), Some(PriceTick(30_002)));
        assert_eq!(r.spread_after, Some(2));
    }

    #[test]
    fn consuming_two_adjacent_levels_widens_spread_by_two() {
        let mut book = Book::new(1, 100).unwrap();
        book.insert_at(Side::Buy, PriceTick(100), 5).unwrap();
        book.insert_at(Side::Sell, PriceTick(101), 3).unwrap();
        book.insert_at(Side::Sell, PriceTick(102), 4).unwrap();
        book.insert_at(Side::Sell, PriceTick(103), 9).unwrap();
        let before = book.spread_and_best().unwrap().spread;
        let r = book.execute_market(Side::Buy, 7);
        assert_eq!(r.spread_after, Some(before + 2));
    }

    #[test]
    fn depletion_is_reported() {
        let mut book = Book::new(1, 100).unwrap();
        book.insert_at(Side::Sell, PriceTick(101), 4).unwrap();
        book.insert_at(Side::Sell, PriceTick(105), 6).unwrap();
        let r = book.execute_market(Side::Buy, 15);
        assert_eq!(r.filled_total, 10);
        assert_eq!(r.unfilled, 5);
        assert!(r.depleted);
        assert_eq!(r.spread_after, None);
        assert_eq!(book.order_count(Side::Sell), 0);
        assert_eq!(book.depth(DepthWindow::All).s_total, 0);
    }

    #[test]
    fn sell_market_walks_down() {
        let mut book = Book::new(1, 100).unwrap();
        book.insert_at(Side::Buy, PriceTick(99), 1).unwrap();
        book.insert_at(Side::Buy, PriceTick(97), 1).unwrap();
        book.insert_at(Side::Buy, PriceTick(98), 1).unwrap();
        let r = book.execute_market(Side::Sell, 3);
        let prices: Vec<_> = r.fills.iter().map(|f| f.price.get()).collect();
        assert_eq!(prices, vec![99, 98, 97]);
    }

    #[test]
    fn depth_windows() {
        let book = walk_book();
        let d0 = book.depth(DepthWindow::Within(0));
        assert_eq!((d0.s_l, d0.d_l), (68, 50));
        let d1 = book.depth(DepthWindow::Within(1));
        assert_eq!(d1.s_l, 188);
        assert_eq!(d1.s_total, 188);
        assert_eq!(d1.d_total, 50);
    }

    #[test]
    fn spread_arithmetic() {
        let book = walk_book();
        let q = book.spread_and_best().unwrap();
        assert_eq!((q.best_bid.money(5), q.best_ask.money(5), q.spread), (150_000, 150_005, 1));

        let mut book = Book::new(1, 100).unwrap();
        book.insert_at(Side::Buy, PriceTick(100), 1).unwrap();
        book.insert_at(Side::Sell, PriceTick(103), 1).unwrap();
        assert_eq!(book.spread_and_best().unwrap().spread, 3);
    }

    #[test]
    fn profile_sign_convention() {
        let book = walk_book();
        let x = book.profile_snapshot(3).unwrap();
        // mid = 30000.5: bid 30000 at offset 1, asks 30001 / 30002 at offsets 1 / 2
        assert_eq!(x, vec![0, 0, 50, -68, -120, 0]);
    }

    #[test]
    fn profile_even_spread_and_symmetry() {
        let mut book = Book::new(1, 100).unwrap();
        for (k, v) in [(1u64, 4u64), (2, 7), (5, 1)] {
            book.insert_at(Side::Buy, PriceTick(100 - k), v).unwrap();
            book.insert_at(Side::Sell, PriceTick(100 + k), v).unwrap();
        }
        let x = book.profile_snapshot(6).unwrap();
        let n = x.len();
        for i in 0..n {
            assert_eq!(x[i], -x[n - 1 - i]);
        }
        assert_eq!(x.iter().map(|v| v.unsigned_abs()).sum::<u64>(), 24);
        // window cuts off level 5
        let x = book.profile_snapshot(2).unwrap();
        assert_eq!(x, vec![7, 4, -4, -7]);
    }

    #[test]
    fn cancel_singleton_and_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut book = Book::new(1, 100).unwrap();
        assert!(book.cancel_uniform(Side::Buy, &mut rng).is_none());
        let o = book.submit_limit(Side::Buy, 2, 9).unwrap();
        assert_eq!(book.cancel_uniform(Side::Buy, &mut rng), Some(o));
        assert!(book.best_bid().is_none());
        assert_eq!(book.depth(DepthWindow::All), DepthView::default());
    }

    #[test]
    fn cancel_by_id_relinks_queue() {
        let mut book = Book::new(1, 100).unwrap();
        let ids: Vec<_> = (0..3).map(|_| book.submit_limit(Side::Sell, 1, 1).unwrap().id).collect();
        book.cancel_order(ids[1]).unwrap();
        let price = book.order(ids[0]).unwrap().price;
        let q: Vec<_> = book.level_orders(Side::Sell, price).iter().map(|o| o.id).collect();
        assert_eq!(q, vec![ids[0], ids[2]]);
        assert_eq!(book.cancel_order(ids[1]), Err(BookError::UnknownOrder(ids[1])));
    }

    #[test]
    fn insert_at_refuses_crossing() {
        let mut book = walk_book();
        assert!(matches!(book.insert_at(Side::Buy, PriceTick(30_001), 1), Err(BookError::WouldCross { .. })));
        assert!(matches!(book.insert_at(Side::Sell, PriceTick(30_000), 1), Err(BookError::WouldCross { .. })));
    }
}
