//! Named configurations for the studied regimes.

use crate::config::{SimConfig, Span};
use crate::flow::{Guards, RateSet};
use crate::sampler::{LevelModel, VolumeModel};

/// Every preset name, in display order.
pub const NAMES: [&str; 7] = [
    "no_market",
    "small_market",
    "high_market",
    "balanced",
    "book_disbalance_up",
    "book_disbalance_down",
    "flow_disbalance_up",
];

/// Total event rate of the balanced preset (events per second).
pub const BALANCED_TOTAL_RATE: f64 = 179.0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown preset `{0}`; choose one of: {choices}", choices = NAMES.join(", "))]
pub struct UnknownPreset(pub String);

/// One-line description of a preset.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "no_market" => "no market orders, cancellation rate equal to limit rate per side",
        "small_market" => "rare market orders (well below 1% of events), flat book, spread linear in order size",
        "high_market" => "market orders about 10% of events, profile linear near the best",
        "balanced" => "symmetric flow, 179 events/s, liquidity contracting above the guards",
        "book_disbalance_up" => "balanced rates, s_min < d_min (thin ask side)",
        "book_disbalance_down" => "balanced rates, s_min > d_min (thin bid side)",
        "flow_disbalance_up" => "more market buys than sells, limit sells compensate so both sides stay balanced",
        _ => return None,
    })
}

fn market_volume() -> VolumeModel {
    VolumeModel::PowerLaw { gamma: 2.5, v_max: 100 }
}

fn limit_volume() -> VolumeModel {
    VolumeModel::PowerLaw { gamma: 2.8, v_max: 1000 }
}

fn symmetric(limit: f64, market: f64, cancel: f64) -> RateSet {
    RateSet {
        limit_bid: limit,
        limit_ask: limit,
        market_bid: market,
        market_ask: market,
        cancel_bid: cancel,
        cancel_ask: cancel,
    }
}

fn base(name: &str, rates: RateSet) -> SimConfig {
    let horizon = 1_000_000;
    SimConfig {
        name: name.to_string(),
        rates,
        level_model: LevelModel::default(),
        volume_model_limit: limit_volume(),
        volume_model_market: market_volume(),
        guards: Guards { s_min: 150, d_min: 150 },
        tick: 5,
        initial_reference: 30_000,
        horizon: Span::Events(horizon),
        warmup: Span::Events((horizon as f64 * crate::engine::DEFAULT_WARMUP_FRACTION) as u64),
        seed: 0,
        snapshot_every: 10.0,
        profile_window: 1000,
    }
}

// Levels drawn uniformly from 1..=max_level.
fn uniform_levels(max_level: u64) -> LevelModel {
    LevelModel { head_cut: max_level, max_level, ..LevelModel::default() }
}

/// Looks up a preset by name.
///
/// The three single-flow presets (`no_market`, `small_market`,
/// `high_market`) place limit orders uniformly over their level range so
/// that, without market orders, the book fills evenly:
///
/// * `no_market`: levels 1..=1000, cancellation rate equal to the limit rate.
///   Guards at 3000 keep the book deep enough that the mid stays put and the
///   region next to it is not swept out by price moves.
/// * `small_market`: levels 1..=1000, market rate 0.01/s per side (0.02% of
///   all events). Market sizes are round lots of 10 (10..=1000, exponent 1.5
///   on the lot count), large against the resting volume per tick, so the
///   spread after a trade grows in proportion to the size.
/// * `high_market`: levels 1..=30, market orders 10% of all events with sizes
///   PowerLaw(1.5, 100). Market orders keep the levels next to the best
///   depleted and the profile rises linearly away from it.
///
/// The remaining presets use the default level model (flat to 10, tail
/// exponent 2.5) and the default volume laws. `balanced` splits 179 events/s
/// as 40 limit, 9 market and 40.5 cancel per side, which contracts both sides
/// above the guards. `flow_disbalance_up` has market buys at twice the sell
/// rate, and limit rates compensate assuming cancelled volume averages the
/// limit volume.
pub fn preset(name: &str) -> Result<SimConfig, UnknownPreset> {
    let cfg = match name {
        "no_market" => {
            let mut c = base(name, symmetric(50.0, 0.0, 50.0));
            c.level_model = uniform_levels(1000);
            c.guards = Guards { s_min: 3000, d_min: 3000 };
            c
        }
        "small_market" => {
            let mut c = base(name, symmetric(50.0, 0.01, 50.0));
            c.level_model = uniform_levels(1000);
            c.volume_model_market =
                VolumeModel::RoundLotMixture { weights: [0.0, 1.0, 0.0], exponents: [1.5, 1.5, 1.5], v_max: 1000 };
            c.guards = Guards { s_min: 1001, d_min: 1001 };
            // market orders are rare; a longer run collects enough trades
            c.horizon = Span::Events(5_000_000);
            c.warmup = Span::Events(500_000);
            c
        }
        "high_market" => {
            let mut c = base(name, symmetric(50.0, 12.0, 58.0));
            c.level_model = uniform_levels(30);
            c.volume_model_market = VolumeModel::PowerLaw { gamma: 1.5, v_max: 100 };
            c
        }
        "balanced" => base(name, symmetric(40.0, 9.0, 40.5)),
        "book_disbalance_up" => {
            let mut c = base(name, symmetric(40.0, 9.0, 40.5));
            c.guards = Guards { s_min: 150, d_min: 600 };
            c
        }
        "book_disbalance_down" => {
            let mut c = base(name, symmetric(40.0, 9.0, 40.5));
            c.guards = Guards { s_min: 600, d_min: 150 };
            c
        }
        "flow_disbalance_up" => {
            let mut r = symmetric(0.0, 6.0, 40.0);
            r.market_ask = 12.0;
            let s_l = limit_volume().sampler().expect("valid").mean();
            let s_m = market_volume().sampler().expect("valid").mean();
            base(name, r.with_balanced_limits(s_l, s_m, s_l))
        }
        _ => return Err(UnknownPreset(name.to_string())),
    };
    Ok(cfg)
}
