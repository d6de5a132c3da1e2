//! Event-driven simulator of a consolidated limit order book fed by a
//! Poissonian multi-agent order flow, with the statistics used to study book
//! profiles, spread response and price drift.
//!
//! * [`book`]: price ladder with FIFO queues, market order execution, depth
//!   and profile queries.
//! * [`sampler`]: discrete power-law samplers for order volumes and levels.
//! * [`flow`]: the six Poisson rates, event draws, liquidity guards and the
//!   liquidity balance diagnostics.
//! * [`engine`]: the event loop and the run record.
//! * [`presets`], [`config`]: named regimes and the flat configuration format.
//! * [`io`], [`replay`]: on-disk run files and log replay.
//! * [`stats`]: profile averages, spread response, power-law fits, drift.
//! * [`batch`]: many independent runs, in parallel with the `parallel` feature.
//!
//! Notation: the tick (price step) is `tick`; side liquidity totals are
//! `s_total` (asks) and `d_total` (bids).

pub mod batch;
pub mod book;
pub mod config;
pub mod engine;
pub mod flow;
pub mod io;
pub mod presets;
pub mod replay;
pub mod sampler;
pub mod stats;

pub use book::{Book, BookError, DepthView, DepthWindow, ExecutionReport, Fill, Order, OrderId, PriceTick, Side};
pub use config::{ConfigError, SimConfig, Span};
pub use engine::{run, run_with, RunOptions, RunOutput, SimError, SimEvent};
pub use flow::{Action, EventKind, FlowDiagnostics, Guards, RateSet};
pub use sampler::{LevelModel, PowerLaw, VolumeModel};

/// Crate version written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
