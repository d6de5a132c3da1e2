//! Event loop driving the book with the guarded Poisson flow.
//!
//! Each step recomputes the effective rates from the current depth, draws the
//! waiting time from the *effective* total rate and the event type from the
//! effective split, then applies the event. Everything random comes from one
//! `ChaCha8Rng` seeded with `SimConfig::seed`, so a configuration fully
//! determines its output.

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{Book, BookError, DepthView, DepthWindow, Fill, OrderId, PriceTick, Side};
use crate::config::{ConfigError, SimConfig, Span};
use crate::flow::{diagnostics_from_means, sample_event, Action, CancelVolumeTracker, FlowDiagnostics};
use crate::sampler::{DiscreteCdf, VolumeSampler};

/// Depth window of the per-second `s(100)` / `d(100)` series.
pub const SERIES_DEPTH_LEVELS: u64 = 100;

/// Fraction of the horizon used as warmup by the presets.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;

const MAX_SEED_REJECTIONS: u32 = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error("could not seed the book: every buy submission resolved below one tick")]
    Seeding,
}

/// Which part of a run an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Book initialization at t = 0, not part of any statistic.
    Seed,
    Warmup,
    Main,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Seed => "seed",
            Phase::Warmup => "warmup",
            Phase::Main => "main",
        }
    }
}

/// One logged event.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub t: f64,
    pub phase: Phase,
    pub action: Action,
    pub side: Side,
    /// Submission level (limit orders only).
    pub level: Option<u64>,
    /// Resting price of a submitted or cancelled order.
    pub price: Option<PriceTick>,
    /// Requested volume; for cancellations the volume removed.
    pub volume: u64,
    pub order_id: Option<OrderId>,
    pub fills: Vec<Fill>,
    /// Drawn but had no effect (cancel on an empty side, or a limit price
    /// below one tick).
    pub gated: bool,
}

/// One executed market order.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub t: f64,
    pub phase: Phase,
    pub side: Side,
    pub volume: u64,
    pub filled: u64,
    pub unfilled: u64,
    pub spread_after: Option<u64>,
    pub fills: Vec<Fill>,
}

/// Book state sampled at a whole second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub best_bid: Option<PriceTick>,
    pub best_ask: Option<PriceTick>,
    pub spread: Option<u64>,
    pub s_total: u64,
    pub d_total: u64,
    pub s100: u64,
    pub d100: u64,
}

impl SeriesRow {
    /// Mid price in ticks.
    pub fn mid(&self) -> Option<f64> {
        Some((self.best_bid?.get() + self.best_ask?.get()) as f64 / 2.0)
    }
}

/// Signed profile around the mid; see [`Book::profile_snapshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub x: Vec<i64>,
}

/// Volume totals for one side of the book.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCounters {
    pub seeded: u64,
    pub submitted: u64,
    pub cancelled: u64,
    /// Resting volume of this side taken by market orders.
    pub filled: u64,
}

impl SideCounters {
    /// Resting volume implied by the flows.
    pub fn balance(&self) -> u64 {
        self.seeded + self.submitted - self.cancelled - self.filled
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub bid: SideCounters,
    pub ask: SideCounters,
    pub events: u64,
    pub gated: u64,
    pub rejected_limits: u64,
    pub market_orders: u64,
}

impl Counters {
    pub fn side(&self, side: Side) -> &SideCounters {
        match side {
            Side::Buy => &self.bid,
            Side::Sell => &self.ask,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut SideCounters {
        match side {
            Side::Buy => &mut self.bid,
            Side::Sell => &mut self.ask,
        }
    }
}

/// What to keep in memory during a run.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub record_events: bool,
    pub record_profiles: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_events: true, record_profiles: true }
    }
}

/// Complete record of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: SimConfig,
    /// Seeding orders followed by every drawn event (empty if not recorded).
    pub events: Vec<SimEvent>,
    pub trades: Vec<TradeRecord>,
    pub series: Vec<SeriesRow>,
    pub profiles: Vec<ProfileSnapshot>,
    /// Diagnostics at each profile snapshot time.
    pub diagnostics_trace: Vec<(f64, FlowDiagnostics)>,
    /// Diagnostics at the end, with the cancelled volume measured after warmup.
    pub diagnostics: FlowDiagnostics,
    pub cancel_volume: CancelVolumeTracker,
    pub counters: Counters,
    /// Time of the first post-warmup event.
    pub warmup_end: f64,
    pub end_time: f64,
    /// Stopped early because every effective rate was zero.
    pub halted: bool,
    pub book: Book,
}

impl RunOutput {
    pub fn final_depth(&self) -> DepthView {
        self.book.depth(DepthWindow::All)
    }

    /// Series rows at or after the end of warmup.
    pub fn main_series(&self) -> &[SeriesRow] {
        let start = self.series.partition_point(|r| r.t < self.warmup_end);
        &self.series[start..]
    }

    pub fn main_profiles(&self) -> impl Iterator<Item = &ProfileSnapshot> {
        self.profiles.iter().filter(move |p| p.t >= self.warmup_end)
    }

    pub fn main_trades(&self) -> impl Iterator<Item = &TradeRecord> {
        self.trades.iter().filter(|t| t.phase == Phase::Main)
    }
}

struct Samplers {
    level: DiscreteCdf,
    limit_volume: VolumeSampler,
    market_volume: VolumeSampler,
}

impl Samplers {
    fn new(config: &SimConfig) -> Result<Self, ConfigError> {
        let err = |e: crate::sampler::ModelError| ConfigError::Invalid(e.to_string());
        Ok(Samplers {
            level: config.level_model.sampler().map_err(err)?,
            limit_volume: config.volume_model_limit.sampler().map_err(err)?,
            market_volume: config.volume_model_market.sampler().map_err(err)?,
        })
    }
}

fn empty_book(config: &SimConfig) -> Result<Book, BookError> {
    Ok(Book::new(config.tick, config.initial_reference)?.with_max_level(config.level_model.max_level))
}

/// Seeds an empty book, alternating buy and sell submissions drawn from the
/// configured level and volume laws, until both sides reach their guard
/// floors. Returns the book and the seeding orders as `Phase::Seed` events.
pub fn init_book(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<(Book, Vec<SimEvent>), SimError> {
    let samplers = Samplers::new(config)?;
    seed_book(config, &samplers, rng)
}

fn seed_book(config: &SimConfig, s: &Samplers, rng: &mut ChaCha8Rng) -> Result<(Book, Vec<SimEvent>), SimError> {
    let mut book = empty_book(config)?;
    let mut seeded = Vec::new();
    let mut side = Side::Buy;
    let mut rejections = 0;
    loop {
        let d = book.depth(DepthWindow::All);
        if d.s_total >= config.guards.s_min && d.d_total >= config.guards.d_min {
            break;
        }
        let level = s.level.sample(rng);
        let volume = s.limit_volume.sample(rng);
        match book.submit_limit(side, level, volume) {
            Ok(order) => seeded.push(SimEvent {
                t: 0.0,
                phase: Phase::Seed,
                action: Action::Limit,
                side,
                level: Some(level),
                price: Some(order.price),
                volume,
                order_id: Some(order.id),
                fills: Vec::new(),
                gated: false,
            }),
            Err(BookError::PriceOutOfRange { .. }) => {
                rejections += 1;
                if rejections > MAX_SEED_REJECTIONS {
                    return Err(SimError::Seeding);
                }
            }
            Err(e) => return Err(e.into()),
        }
        side = side.opposite();
    }
    Ok((book, seeded))
}

fn series_row(book: &Book, t: f64) -> SeriesRow {
    let quote = book.spread_and_best();
    let d = book.depth(DepthWindow::Within(SERIES_DEPTH_LEVELS));
    SeriesRow {
        t,
        best_bid: quote.map(|q| q.best_bid),
        best_ask: quote.map(|q| q.best_ask),
        spread: quote.map(|q| q.spread),
        s_total: d.s_total,
        d_total: d.d_total,
        s100: d.s_l,
        d100: d.d_l,
    }
}

/// Runs a simulation with default options.
pub fn run(config: &SimConfig) -> Result<RunOutput, SimError> {
    run_with(config, RunOptions::default())
}

/// Runs a simulation.
pub fn run_with(config: &SimConfig, options: RunOptions) -> Result<RunOutput, SimError> {
    config.validate()?;
    let samplers = Samplers::new(config)?;
    let s_l = samplers.limit_volume.mean();
    let s_m = samplers.market_volume.mean();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let (mut book, seeded) = seed_book(config, &samplers, &mut rng)?;
    let mut counters = Counters::default();
    for e in &seeded {
        counters.side_mut(e.side).seeded += e.volume;
    }
    let mut events = if options.record_events { seeded } else { Vec::new() };
    let mut trades = Vec::new();
    let mut series = Vec::new();
    let mut profiles = Vec::new();
    let mut trace = Vec::new();
    let mut cancel_volume = CancelVolumeTracker::default();

    let mut t = 0.0f64;
    let mut next_second = 1.0f64;
    let mut next_snapshot = config.snapshot_every;
    let mut warmup_end = None;
    let mut halted = false;
    let mut n = 0u64;

    loop {
        if let Span::Events(h) = config.horizon {
            if n >= h {
                break;
            }
        }
        let depth = book.depth(DepthWindow::All);
        let effective = config.rates.apply_guards(&depth, &config.guards);
        let Some((kind, dt)) = sample_event(&effective, &mut rng) else {
            halted = true;
            break;
        };
        let t_next = t + dt;
        let stop_at = match config.horizon {
            Span::Seconds(h) if t_next > h => Some(h),
            _ => None,
        };
        let boundary_limit = stop_at.unwrap_or(t_next);

        // The book is constant between events: rows and snapshots at crossed
        // boundaries see the state left by the previous event.
        while next_second <= boundary_limit {
            series.push(series_row(&book, next_second));
            next_second += 1.0;
        }
        while next_snapshot <= boundary_limit {
            if options.record_profiles {
                if let Ok(x) = book.profile_snapshot(config.profile_window) {
                    profiles.push(ProfileSnapshot { t: next_snapshot, x });
                }
            }
            trace.push((next_snapshot, diagnostics_from_means(&config.rates, s_l, s_m, cancel_volume.mean())));
            next_snapshot += config.snapshot_every;
        }
        if stop_at.is_some() {
            break;
        }
        t = t_next;

        let in_warmup = match config.warmup {
            Span::Events(w) => n < w,
            Span::Seconds(w) => t < w,
        };
        let phase = if in_warmup { Phase::Warmup } else { Phase::Main };
        if phase == Phase::Main && warmup_end.is_none() {
            warmup_end = Some(t);
        }

        let mut ev = SimEvent {
            t,
            phase,
            action: kind.action,
            side: kind.side,
            level: None,
            price: None,
            volume: 0,
            order_id: None,
            fills: Vec::new(),
            gated: false,
        };
        match kind.action {
            Action::Limit => {
                let level = samplers.level.sample(&mut rng);
                let volume = samplers.limit_volume.sample(&mut rng);
                ev.level = Some(level);
                ev.volume = volume;
                match book.submit_limit(kind.side, level, volume) {
                    Ok(order) => {
                        ev.price = Some(order.price);
                        ev.order_id = Some(order.id);
                        counters.side_mut(kind.side).submitted += volume;
                    }
                    Err(BookError::PriceOutOfRange { .. }) => {
                        ev.gated = true;
                        counters.rejected_limits += 1;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Action::Market => {
                let volume = samplers.market_volume.sample(&mut rng);
                let report = book.execute_market(kind.side, volume);
                ev.volume = volume;
                counters.side_mut(kind.side.opposite()).filled += report.filled_total;
                counters.market_orders += 1;
                trades.push(TradeRecord {
                    t,
                    phase,
                    side: kind.side,
                    volume,
                    filled: report.filled_total,
                    unfilled: report.unfilled,
                    spread_after: report.spread_after,
                    fills: report.fills.clone(),
                });
                ev.fills = report.fills;
            }
            Action::Cancel => match book.cancel_uniform(kind.side, &mut rng) {
                Some(order) => {
                    ev.price = Some(order.price);
                    ev.order_id = Some(order.id);
                    ev.volume = order.remaining;
                    counters.side_mut(kind.side).cancelled += order.remaining;
                    if phase == Phase::Main {
                        cancel_volume.push(order.remaining);
                    }
                }
                None => ev.gated = true,
            },
        }
        if ev.gated {
            counters.gated += 1;
        }
        counters.events += 1;
        n += 1;
        if options.record_events {
            events.push(ev);
        }
    }

    let end_time = match (config.horizon, halted) {
        (Span::Seconds(h), false) => h,
        _ => t,
    };
    Ok(RunOutput {
        config: config.clone(),
        events,
        trades,
        series,
        profiles,
        diagnostics_trace: trace,
        diagnostics: diagnostics_from_means(&config.rates, s_l, s_m, cancel_volume.mean()),
        cancel_volume,
        counters,
        warmup_end: warmup_end.unwrap_or(end_time),
        end_time,
        halted,
        book,
    })
}

/// Fixed-point search for limit rates that balance both sides given the
/// measured mean cancelled volume. Each round runs `config` with the current
/// limit rates (events and profiles not recorded), re-estimates the mean
/// cancelled volume and rebalances. Returns the final configuration and the
/// estimate it was balanced with.
pub fn calibrate_limit_rates(config: &SimConfig, rounds: usize) -> Result<(SimConfig, f64), SimError> {
    config.validate()?;
    let samplers = Samplers::new(config)?;
    let s_l = samplers.limit_volume.mean();
    let s_m = samplers.market_volume.mean();
    let quiet = RunOptions { record_events: false, record_profiles: false };
    let mut s_c = s_l;
    let mut cfg = config.clone();
    for _ in 0..rounds {
        cfg.rates = config.rates.with_balanced_limits(s_l, s_m, s_c);
        let out = run_with(&cfg, quiet)?;
        match out.cancel_volume.mean() {
            Some(m) => s_c = m,
            None => break,
        }
    }
    cfg.rates = config.rates.with_balanced_limits(s_l, s_m, s_c);
    Ok((cfg, s_c))
}
