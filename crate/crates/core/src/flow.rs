//! Poissonian order flow of the six agent classes.
//!
//! Rate names follow the book side they act on: `market_bid` is the rate of
//! market *sell* orders (they hit the bids), `market_ask` the rate of market
//! buys, `cancel_bid` cancels resting buys, and so on.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{DepthView, Side};
use crate::sampler::{ModelError, VolumeModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("rate {name} must be finite and >= 0, got {value}")]
    Rate { name: &'static str, value: f64 },
    #[error("total event rate must be > 0")]
    ZeroTotal,
    #[error("guard {name} = {value} must exceed the maximal market volume {v_max}")]
    Guard { name: &'static str, value: u64, v_max: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What happens at an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Limit,
    Market,
    Cancel,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Limit => "limit",
            Action::Market => "market",
            Action::Cancel => "cancel",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the six event types: an action plus the direction of the order
/// submitted (or cancelled).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventKind {
    pub action: Action,
    pub side: Side,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind { action: Action::Limit, side: Side::Buy },
        EventKind { action: Action::Limit, side: Side::Sell },
        EventKind { action: Action::Market, side: Side::Sell },
        EventKind { action: Action::Market, side: Side::Buy },
        EventKind { action: Action::Cancel, side: Side::Buy },
        EventKind { action: Action::Cancel, side: Side::Sell },
    ];
}

/// The six Poisson intensities, in events per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateSet {
    pub limit_bid: f64,
    pub limit_ask: f64,
    pub market_bid: f64,
    pub market_ask: f64,
    pub cancel_bid: f64,
    pub cancel_ask: f64,
}

impl RateSet {
    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// Copy with limit rates set so that both sides have zero net liquidity
    /// change: `L * s_l = M * s_m + C * s_c` per side.
    pub fn with_balanced_limits(&self, s_l: f64, s_m: f64, s_c: f64) -> RateSet {
        RateSet {
            limit_ask: (self.market_ask * s_m + self.cancel_ask * s_c) / s_l,
            limit_bid: (self.market_bid * s_m + self.cancel_bid * s_c) / s_l,
            ..*self
        }
    }

    /// Rates in the order of [`EventKind::ALL`].
    pub fn as_array(&self) -> [f64; 6] {
        [self.limit_bid, self.limit_ask, self.market_bid, self.market_ask, self.cancel_bid, self.cancel_ask]
    }

    pub fn rate_of(&self, kind: EventKind) -> f64 {
        match (kind.action, kind.side) {
            (Action::Limit, Side::Buy) => self.limit_bid,
            (Action::Limit, Side::Sell) => self.limit_ask,
            (Action::Market, Side::Sell) => self.market_bid,
            (Action::Market, Side::Buy) => self.market_ask,
            (Action::Cancel, Side::Buy) => self.cancel_bid,
            (Action::Cancel, Side::Sell) => self.cancel_ask,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        const NAMES: [&str; 6] = ["limit_bid", "limit_ask", "market_bid", "market_ask", "cancel_bid", "cancel_ask"];
        for (name, value) in NAMES.into_iter().zip(self.as_array()) {
            if !(value.is_finite() && value >= 0.0) {
                return Err(FlowError::Rate { name, value });
            }
        }
        if self.total() <= 0.0 {
            return Err(FlowError::ZeroTotal);
        }
        Ok(())
    }

    /// Effective rates under the liquidity guards: market orders and
    /// cancellations against a side are switched off while its depth is
    /// below the floor. Limit rates are never gated.
    pub fn apply_guards(&self, depth: &DepthView, guards: &Guards) -> RateSet {
        let mut out = *self;
        if depth.d_total < guards.d_min {
            out.market_bid = 0.0;
            out.cancel_bid = 0.0;
        }
        if depth.s_total < guards.s_min {
            out.market_ask = 0.0;
            out.cancel_ask = 0.0;
        }
        out
    }
}

/// Depth floors (contracts) for the bid (`d_min`) and ask (`s_min`) sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guards {
    pub s_min: u64,
    pub d_min: u64,
}

impl Guards {
    /// Both floors must exceed the largest possible market order.
    pub fn validate(&self, market_v_max: u64) -> Result<(), FlowError> {
        for (name, value) in [("s_min", self.s_min), ("d_min", self.d_min)] {
            if value <= market_v_max {
                return Err(FlowError::Guard { name, value, v_max: market_v_max });
            }
        }
        Ok(())
    }
}

/// Draws the next event type and waiting time.
///
/// Returns `None` when every rate is zero. The waiting time is exponential
/// with the total rate; the type is chosen with probability `rate / total`,
/// from an independent uniform.
pub fn sample_event<R: Rng + ?Sized>(rates: &RateSet, rng: &mut R) -> Option<(EventKind, f64)> {
    let total = rates.total();
    if total <= 0.0 {
        return None;
    }
    let e: f64 = Exp1.sample(rng);
    let dt = e / total;
    let u = rng.random::<f64>() * total;
    let arr = rates.as_array();
    let mut acc = 0.0;
    let mut pick = None;
    for (i, r) in arr.iter().enumerate() {
        if *r <= 0.0 {
            continue;
        }
        acc += r;
        pick = Some(i);
        if u < acc {
            break;
        }
    }
    pick.map(|i| (EventKind::ALL[i], dt))
}

/// Running mean and variance of cancelled order volumes (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CancelVolumeTracker {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl CancelVolumeTracker {
    pub fn push(&mut self, volume: u64) {
        self.count += 1;
        let x = volume as f64;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Standard error of the mean, treating cancellations as independent.
    pub fn std_error(&self) -> Option<f64> {
        (self.count > 1).then(|| (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt())
    }
}

/// Liquidity balance of a flow configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    /// Mean limit order volume.
    pub s_l: f64,
    /// Mean market order volume.
    pub s_m: f64,
    /// Mean cancelled volume used below (measured, or `s_l` if provisional).
    pub s_c: f64,
    /// `s_c` is a stand-in because nothing was cancelled yet.
    pub provisional: bool,
    pub v_in: f64,
    pub v_out: f64,
    /// Net rate of change of ask-side liquidity.
    pub delta_s: f64,
    /// Net rate of change of bid-side liquidity.
    pub delta_d: f64,
    /// Aggregated sell supply.
    pub supply: f64,
    /// Aggregated buy demand.
    pub demand: f64,
}

impl FlowDiagnostics {
    /// Ask-side liquidity shrinks on average (needed above `s_min`).
    pub fn ask_contracting(&self) -> bool {
        self.delta_s < 0.0
    }

    /// Bid-side liquidity shrinks on average (needed above `d_min`).
    pub fn bid_contracting(&self) -> bool {
        self.delta_d < 0.0
    }
}

/// Computes the liquidity balance. Mean volumes of the limit and market laws
/// are exact sums over their support; the cancelled-volume mean is measured
/// by the caller (`None` before any cancellation).
pub fn flow_diagnostics(
    rates: &RateSet,
    limit_volume: &VolumeModel,
    market_volume: &VolumeModel,
    s_c_hat: Option<f64>,
) -> Result<FlowDiagnostics, FlowError> {
    let s_l = limit_volume.sampler()?.mean();
    let s_m = market_volume.sampler()?.mean();
    Ok(diagnostics_from_means(rates, s_l, s_m, s_c_hat))
}

pub(crate) fn diagnostics_from_means(rates: &RateSet, s_l: f64, s_m: f64, s_c_hat: Option<f64>) -> FlowDiagnostics {
    let (s_c, provisional) = match s_c_hat {
        Some(v) => (v, false),
        None => (s_l, true),
    };
    let r = rates;
    FlowDiagnostics {
        s_l,
        s_m,
        s_c,
        provisional,
        v_in: s_l * (r.limit_ask + r.limit_bid),
        v_out: s_m * (r.market_ask + r.market_bid) + s_c * (r.cancel_ask + r.cancel_bid),
        delta_s: r.limit_ask * s_l - r.market_ask * s_m - r.cancel_ask * s_c,
        delta_d: r.limit_bid * s_l - r.market_bid * s_m - r.cancel_bid * s_c,
        supply: r.limit_ask * s_l + r.market_bid * s_m - r.cancel_ask * s_c,
        demand: r.limit_bid * s_l + r.market_ask * s_m - r.cancel_bid * s_c,
    }
}
