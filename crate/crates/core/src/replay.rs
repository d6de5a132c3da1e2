//! Rebuilds a book from an event log and checks the log against it.

use thiserror::Error;

use crate::book::{Book, BookError, DepthView, DepthWindow};
use crate::config::{SimConfig, Span};
use crate::engine::{Phase, SeriesRow, SimEvent, SERIES_DEPTH_LEVELS};
use crate::flow::Action;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("event {index}: {source}")]
    Book { index: usize, source: BookError },
    #[error("event {index}: {what}")]
    Mismatch { index: usize, what: String },
}

/// Applies logged events to a fresh book.
#[derive(Debug, Clone)]
pub struct Replayer {
    book: Book,
}

impl Replayer {
    pub fn new(config: &SimConfig) -> Result<Self, BookError> {
        let book = Book::new(config.tick, config.initial_reference)?.with_max_level(config.level_model.max_level);
        Ok(Replayer { book })
    }

    pub fn book(&self) -> &Book {
        &self.book
    }

    /// Applies one event, verifying ids, fills and cancelled volumes.
    pub fn apply(&mut self, index: usize, ev: &SimEvent) -> Result<(), ReplayError> {
        let mismatch = |what: String| ReplayError::Mismatch { index, what };
        let book_err = |source| ReplayError::Book { index, source };
        match (ev.action, ev.gated) {
            (Action::Limit, true) => {}
            (Action::Limit, false) => {
                let price = ev.price.ok_or_else(|| mismatch("limit order without a price".into()))?;
                let order = self.book.insert_at(ev.side, price, ev.volume).map_err(book_err)?;
                if Some(order.id) != ev.order_id {
                    return Err(mismatch(format!("order id {} but log says {:?}", order.id, ev.order_id)));
                }
            }
            (Action::Market, _) => {
                let report = self.book.execute_market(ev.side, ev.volume);
                if report.fills != ev.fills {
                    return Err(mismatch(format!("fills {:?} but log says {:?}", report.fills, ev.fills)));
                }
            }
            (Action::Cancel, true) => {
                if self.book.order_count(ev.side) != 0 {
                    return Err(mismatch("gated cancel on a non-empty side".into()));
                }
            }
            (Action::Cancel, false) => {
                let id = ev.order_id.ok_or_else(|| mismatch("cancel without an order id".into()))?;
                let order = self.book.cancel_order(id).map_err(book_err)?;
                if order.remaining != ev.volume || Some(order.price) != ev.price || order.side != ev.side {
                    return Err(mismatch(format!("cancelled {order:?} does not match the log")));
                }
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> DepthView {
        self.book.depth(DepthWindow::All)
    }
}

/// Recomputes the per-second series from the log. `end_time` is the run's
/// end time; boundaries after the last event are emitted up to it when the
/// horizon is in seconds.
pub fn replay_series(config: &SimConfig, events: &[SimEvent], end_time: f64) -> Result<Vec<SeriesRow>, ReplayError> {
    let mut r = Replayer::new(config).map_err(|source| ReplayError::Book { index: 0, source })?;
    let mut rows = Vec::new();
    let mut next = 1.0f64;
    let emit = |book: &Book, t: f64| {
        let q = book.spread_and_best();
        let d = book.depth(DepthWindow::Within(SERIES_DEPTH_LEVELS));
        SeriesRow {
            t,
            best_bid: q.map(|q| q.best_bid),
            best_ask: q.map(|q| q.best_ask),
            spread: q.map(|q| q.spread),
            s_total: d.s_total,
            d_total: d.d_total,
            s100: d.s_l,
            d100: d.d_l,
        }
    };
    for (i, ev) in events.iter().enumerate() {
        if ev.phase != Phase::Seed {
            while next <= ev.t {
                rows.push(emit(&r.book, next));
                next += 1.0;
            }
        }
        r.apply(i, ev)?;
    }
    if matches!(config.horizon, Span::Seconds(_)) {
        while next <= end_time {
            rows.push(emit(&r.book, next));
            next += 1.0;
        }
    }
    Ok(rows)
}
