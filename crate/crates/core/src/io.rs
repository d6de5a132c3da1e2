//! Run directories on disk.
//!
//! A run directory holds five files, each starting with a `#` provenance line
//! naming the version, seed and preset:
//!
//! | file             | content                                                    |
//! |------------------|------------------------------------------------------------|
//! | `events.ndjson`  | one JSON object per event (seeding orders first)            |
//! | `trades.csv`     | `t,phase,side,volume,filled,unfilled,spread_after,fills`    |
//! | `series.csv`     | `t,mid,best_bid,best_ask,spread,s_total,d_total,s100,d100`  |
//! | `profiles.csv`   | `t,offset,volume` (non-zero slots, plus an offset-0 marker) |
//! | `manifest.cfg`   | the configuration, loadable with `--config`                 |
//!
//! Prices are written as money (`tick index * tick`); spreads and offsets in
//! ticks. Times are seconds with six decimals. Event fields:
//! `t, phase, kind, side, level, price, volume, order_id, fills, gated`, where
//! `fills` is a list of `{price, volume, maker}`. In `trades.csv` the fills
//! column is `price:volume:maker` entries joined by `;`. Profile offsets are
//! negative on the bid side and positive on the ask side; volume signs follow
//! the profile convention (bids positive, asks negative).

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::book::{Fill, PriceTick, Side};
use crate::config::SimConfig;
use crate::engine::{Phase, ProfileSnapshot, RunOutput, SeriesRow, SimEvent, TradeRecord};
use crate::flow::Action;
use crate::presets;

pub const EVENTS_FILE: &str = "events.ndjson";
pub const TRADES_FILE: &str = "trades.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const MANIFEST_FILE: &str = "manifest.cfg";

pub const TRADES_HEADER: &str = "t,phase,side,volume,filled,unfilled,spread_after,fills";
pub const SERIES_HEADER: &str = "t,mid,best_bid,best_ask,spread,s_total,d_total,s100,d100";
pub const PROFILES_HEADER: &str = "t,offset,volume";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// `line` is 1-based; 0 means the whole file.
    #[error("{path}{}: {message}", at_line(*line))]
    Data { path: PathBuf, line: usize, message: String },
}

/// serde_json counts lines within the string it was given; only the column
/// is meaningful here.
fn json_message(e: &serde_json::Error) -> String {
    let text = e.to_string();
    let text = text.rsplit_once(" at line ").map_or(text.as_str(), |t| t.0);
    format!("{text} (column {})", e.column())
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(": line {line}")
    }
}

impl IoError {
    /// True for malformed content, false for filesystem failures.
    pub fn is_data(&self) -> bool {
        matches!(self, IoError::Data { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Provenance comment placed at the top of every output file.
pub fn provenance(config: &SimConfig) -> String {
    format!("# cobsim {} seed={} preset={}", crate::VERSION, config.seed, config.name)
}

fn money(p: Option<PriceTick>, tick: u64) -> String {
    p.map(|p| p.money(tick).to_string()).unwrap_or_default()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn json_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "null".into())
}

/// One event as a JSON line (without the newline).
pub fn event_line(ev: &SimEvent, tick: u64) -> String {
    let mut fills = String::from("[");
    for (i, f) in ev.fills.iter().enumerate() {
        if i > 0 {
            fills.push(',');
        }
        let _ = write!(fills, "{{\"price\":{},\"volume\":{},\"maker\":{}}}", f.price.money(tick), f.volume, f.maker);
    }
    fills.push(']');
    format!(
        "{{\"t\":{:.6},\"phase\":\"{}\",\"kind\":\"{}\",\"side\":\"{}\",\"level\":{},\"price\":{},\"volume\":{},\"order_id\":{},\"fills\":{},\"gated\":{}}}",
        ev.t,
        ev.phase.as_str(),
        ev.action.as_str(),
        ev.side.as_str(),
        json_opt(ev.level),
        json_opt(ev.price.map(|p| p.money(tick))),
        ev.volume,
        json_opt(ev.order_id),
        fills,
        ev.gated
    )
}

fn fills_field(fills: &[Fill], tick: u64) -> String {
    fills.iter().map(|f| format!("{}:{}:{}", f.price.money(tick), f.volume, f.maker)).collect::<Vec<_>>().join(";")
}

pub fn trade_line(tr: &TradeRecord, tick: u64) -> String {
    format!(
        "{:.6},{},{},{},{},{},{},{}",
        tr.t,
        tr.phase.as_str(),
        tr.side.as_str(),
        tr.volume,
        tr.filled,
        tr.unfilled,
        opt(tr.spread_after),
        fills_field(&tr.fills, tick)
    )
}

pub fn series_line(r: &SeriesRow, tick: u64) -> String {
    let mid = r.mid().map(|m| format!("{:.1}", m * tick as f64)).unwrap_or_default();
    format!(
        "{:.6},{},{},{},{},{},{},{},{}",
        r.t,
        mid,
        money(r.best_bid, tick),
        money(r.best_ask, tick),
        opt(r.spread),
        r.s_total,
        r.d_total,
        r.s100,
        r.d100
    )
}

fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), IoError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))
}

/// Writes the five run files into `dir`, creating it if needed.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg = &run.config;
    let tick = cfg.tick;
    let head = provenance(cfg);

    write_file(dir, EVENTS_FILE, |w| {
        writeln!(w, "{head}")?;
        for ev in &run.events {
            writeln!(w, "{}", event_line(ev, tick))?;
        }
        Ok(())
    })?;
    write_file(dir, TRADES_FILE, |w| {
        writeln!(w, "{head}")?;
        writeln!(w, "{TRADES_HEADER}")?;
        for tr in &run.trades {
            writeln!(w, "{}", trade_line(tr, tick))?;
        }
        Ok(())
    })?;
    write_file(dir, SERIES_FILE, |w| {
        writeln!(w, "{head}")?;
        writeln!(w, "{SERIES_HEADER}")?;
        for r in &run.series {
            writeln!(w, "{}", series_line(r, tick))?;
        }
        Ok(())
    })?;
    write_file(dir, PROFILES_FILE, |w| {
        writeln!(w, "{head} window={}", cfg.profile_window)?;
        writeln!(w, "{PROFILES_HEADER}")?;
        let win = cfg.profile_window as i64;
        for p in &run.profiles {
            writeln!(w, "{:.6},0,0", p.t)?;
            for (i, &v) in p.x.iter().enumerate() {
                if v != 0 {
                    let i = i as i64;
                    let offset = if i < win { i - win } else { i - win + 1 };
                    writeln!(w, "{:.6},{},{}", p.t, offset, v)?;
                }
            }
        }
        Ok(())
    })?;
    write_file(dir, MANIFEST_FILE, |w| {
        writeln!(w, "{head}")?;
        let c = &run.counters;
        writeln!(
            w,
            "# events={} gated={} rejected_limits={} market_orders={} halted={}",
            c.events, c.gated, c.rejected_limits, c.market_orders, run.halted
        )?;
        writeln!(w, "# warmup_end={:.6} end_time={:.6}", run.warmup_end, run.end_time)?;
        write!(w, "{}", cfg.render())
    })
}

/// A run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub config: SimConfig,
    pub events: Vec<SimEvent>,
    pub trades: Vec<TradeRecord>,
    pub series: Vec<SeriesRow>,
    pub profiles: Vec<ProfileSnapshot>,
}

impl LoadedRun {
    /// Time of the first post-warmup event (end of the log if none).
    pub fn warmup_end(&self) -> f64 {
        self.events.iter().find(|e| e.phase == Phase::Main).or(self.events.last()).map_or(0.0, |e| e.t)
    }

    pub fn main_series(&self) -> &[SeriesRow] {
        let w = self.warmup_end();
        let start = self.series.partition_point(|r| r.t < w);
        &self.series[start..]
    }

    pub fn main_profiles(&self) -> impl Iterator<Item = &ProfileSnapshot> {
        let w = self.warmup_end();
        self.profiles.iter().filter(move |p| p.t >= w)
    }

    pub fn main_trades(&self) -> impl Iterator<Item = &TradeRecord> {
        self.trades.iter().filter(|t| t.phase == Phase::Main)
    }

    /// Mean and standard error of post-warmup cancelled volumes.
    pub fn cancel_volume(&self) -> crate::flow::CancelVolumeTracker {
        let mut t = crate::flow::CancelVolumeTracker::default();
        for e in &self.events {
            if e.phase == Phase::Main && e.action == Action::Cancel && !e.gated {
                t.push(e.volume);
            }
        }
        t
    }
}

pub fn read_config(path: &Path) -> Result<SimConfig, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let base = presets::preset("balanced").expect("built-in preset");
    SimConfig::parse_over(&base, &text).map_err(|e| match e {
        crate::config::ConfigError::Line { line, message } => IoError::Data { path: path.to_path_buf(), line, message },
        other => IoError::Data { path: path.to_path_buf(), line: 0, message: other.to_string() },
    })
}

fn to_tick(path: &Path, line: usize, money: u64, tick: u64) -> Result<PriceTick, IoError> {
    let bad = |m: String| IoError::Data { path: path.to_path_buf(), line, message: m };
    if !money.is_multiple_of(tick) {
        return Err(bad(format!("price {money} is not a multiple of the tick {tick}")));
    }
    PriceTick::new(money / tick).ok_or_else(|| bad("price below one tick".into()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FillRecord {
    price: u64,
    volume: u64,
    maker: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    t: f64,
    phase: Phase,
    kind: Action,
    side: Side,
    level: Option<u64>,
    price: Option<u64>,
    volume: u64,
    order_id: Option<u64>,
    fills: Vec<FillRecord>,
    gated: bool,
}

fn read_events(path: &Path, tick: u64) -> Result<Vec<SimEvent>, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line).map_err(|e| IoError::Data {
            path: path.to_path_buf(),
            line: n,
            message: json_message(&e),
        })?;
        let price = rec.price.map(|p| to_tick(path, n, p, tick)).transpose()?;
        let fills = rec
            .fills
            .iter()
            .map(|f| Ok(Fill { price: to_tick(path, n, f.price, tick)?, volume: f.volume, maker: f.maker }))
            .collect::<Result<Vec<_>, IoError>>()?;
        out.push(SimEvent {
            t: rec.t,
            phase: rec.phase,
            action: rec.kind,
            side: rec.side,
            level: rec.level,
            price,
            volume: rec.volume,
            order_id: rec.order_id,
            fills,
            gated: rec.gated,
        });
    }
    Ok(out)
}

// Rows of a comma-separated file after the provenance line and header,
// with their 1-based line numbers.
fn csv_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    let mut seen_header = false;
    let width = header.split(',').count();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if !seen_header {
            if line != header {
                return Err(IoError::Data {
                    path: path.to_path_buf(),
                    line: n,
                    message: format!("expected header `{header}`"),
                });
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != width {
            return Err(IoError::Data {
                path: path.to_path_buf(),
                line: n,
                message: format!("expected {width} fields, got {}", fields.len()),
            });
        }
        rows.push((n, fields));
    }
    if !seen_header {
        return Err(IoError::Data { path: path.to_path_buf(), line: 0, message: "missing header".into() });
    }
    Ok(rows)
}

struct Fields<'a> {
    path: &'a Path,
    line: usize,
}

impl Fields<'_> {
    fn err(&self, m: String) -> IoError {
        IoError::Data { path: self.path.to_path_buf(), line: self.line, message: m }
    }

    fn parse<T: std::str::FromStr>(&self, name: &str, s: &str) -> Result<T, IoError> {
        s.parse().map_err(|_| self.err(format!("bad {name} `{s}`")))
    }

    fn parse_opt<T: std::str::FromStr>(&self, name: &str, s: &str) -> Result<Option<T>, IoError> {
        if s.is_empty() {
            Ok(None)
        } else {
            self.parse(name, s).map(Some)
        }
    }

    fn price(&self, s: &str, tick: u64) -> Result<Option<PriceTick>, IoError> {
        self.parse_opt::<u64>("price", s)?.map(|m| to_tick(self.path, self.line, m, tick)).transpose()
    }
}

fn parse_phase(f: &Fields, s: &str) -> Result<Phase, IoError> {
    match s {
        "seed" => Ok(Phase::Seed),
        "warmup" => Ok(Phase::Warmup),
        "main" => Ok(Phase::Main),
        _ => Err(f.err(format!("bad phase `{s}`"))),
    }
}

fn parse_side(f: &Fields, s: &str) -> Result<Side, IoError> {
    match s {
        "buy" => Ok(Side::Buy),
        "sell" => Ok(Side::Sell),
        _ => Err(f.err(format!("bad side `{s}`"))),
    }
}

fn read_trades(path: &Path, tick: u64) -> Result<Vec<TradeRecord>, IoError> {
    let mut out = Vec::new();
    for (line, r) in csv_rows(path, TRADES_HEADER)? {
        let f = Fields { path, line };
        let mut fills = Vec::new();
        for part in r[7].split(';').filter(|s| !s.is_empty()) {
            let p: Vec<&str> = part.split(':').collect();
            if p.len() != 3 {
                return Err(f.err(format!("bad fill `{part}`")));
            }
            fills.push(Fill {
                price: f.price(p[0], tick)?.ok_or_else(|| f.err("empty fill price".into()))?,
                volume: f.parse("fill volume", p[1])?,
                maker: f.parse("fill maker", p[2])?,
            });
        }
        out.push(TradeRecord {
            t: f.parse("t", &r[0])?,
            phase: parse_phase(&f, &r[1])?,
            side: parse_side(&f, &r[2])?,
            volume: f.parse("volume", &r[3])?,
            filled: f.parse("filled", &r[4])?,
            unfilled: f.parse("unfilled", &r[5])?,
            spread_after: f.parse_opt("spread_after", &r[6])?,
            fills,
        });
    }
    Ok(out)
}

fn read_series(path: &Path, tick: u64) -> Result<Vec<SeriesRow>, IoError> {
    let mut out = Vec::new();
    for (line, r) in csv_rows(path, SERIES_HEADER)? {
        let f = Fields { path, line };
        out.push(SeriesRow {
            t: f.parse("t", &r[0])?,
            best_bid: f.price(&r[2], tick)?,
            best_ask: f.price(&r[3], tick)?,
            spread: f.parse_opt("spread", &r[4])?,
            s_total: f.parse("s_total", &r[5])?,
            d_total: f.parse("d_total", &r[6])?,
            s100: f.parse("s100", &r[7])?,
            d100: f.parse("d100", &r[8])?,
        });
    }
    Ok(out)
}

fn read_profiles(path: &Path, window: usize) -> Result<Vec<ProfileSnapshot>, IoError> {
    let mut out: Vec<ProfileSnapshot> = Vec::new();
    let w = window as i64;
    for (line, r) in csv_rows(path, PROFILES_HEADER)? {
        let f = Fields { path, line };
        let t: f64 = f.parse("t", &r[0])?;
        let offset: i64 = f.parse("offset", &r[1])?;
        let volume: i64 = f.parse("volume", &r[2])?;
        if offset == 0 {
            out.push(ProfileSnapshot { t, x: vec![0; 2 * window] });
            continue;
        }
        let snap = out
            .last_mut()
            .filter(|s| s.t == t)
            .ok_or_else(|| f.err("profile entry without a snapshot marker".into()))?;
        if offset.abs() > w {
            return Err(f.err(format!("offset {offset} outside the window {window}")));
        }
        let idx = if offset < 0 { w + offset } else { w + offset - 1 };
        snap.x[idx as usize] = volume;
    }
    Ok(out)
}

/// Reads a run directory written by [`write_run`].
pub fn read_run(dir: &Path) -> Result<LoadedRun, IoError> {
    let config = read_config(&dir.join(MANIFEST_FILE))?;
    let tick = config.tick;
    Ok(LoadedRun {
        events: read_events(&dir.join(EVENTS_FILE), tick)?,
        trades: read_trades(&dir.join(TRADES_FILE), tick)?,
        series: read_series(&dir.join(SERIES_FILE), tick)?,
        profiles: read_profiles(&dir.join(PROFILES_FILE), config.profile_window)?,
        config,
    })
}
