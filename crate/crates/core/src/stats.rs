//! Statistics over run records: averaged book profiles, spread response to
//! market order size, power-law exponent fits, price drift and the depth /
//! inter-arrival tables.
//!
//! All functions are pure and take plain slices, so they work the same on an
//! in-memory [`RunOutput`] and on a run loaded back from disk.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::engine::{Phase, RunOutput, SeriesRow, SimEvent, TradeRecord};
use crate::flow::Action;

/// Tail cutoff used when none is given: values strictly above it are fitted.
pub const DEFAULT_TAIL_CUTOFF: u64 = 10;
/// Batches used for the batched-means standard error of the drift.
pub const DRIFT_BATCHES: usize = 30;
/// Minimum number of per-second increments for drift statistics.
pub const MIN_DRIFT_SECONDS: usize = 100;
/// Minimum number of fully filled trades for a spread response fit.
pub const MIN_SPREAD_TRADES: usize = 30;
/// Minimum tail mass for a power-law fit.
pub const MIN_TAIL_SAMPLES: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no profile snapshots")]
    NoSnapshots,
    #[error("snapshot of length {got} is narrower than the requested window {window}")]
    NarrowSnapshot { got: usize, window: usize },
    #[error("need at least {needed} fully filled trades, got {got}")]
    TooFewTrades { needed: usize, got: usize },
    #[error("market order volumes span {min}..{max}, less than one decade")]
    NarrowVolumeRange { min: u64, max: u64 },
    #[error("need at least {needed} samples above the cutoff, got {got}")]
    TooFewTailSamples { needed: f64, got: f64 },
    #[error("need at least {needed} post-warmup seconds, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate regression input")]
    Degenerate,
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r2: f64,
}

/// Ordinary least squares.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let w = vec![1.0; x.len()];
    weighted_linear_fit(x, y, &w)
}

/// Weighted least squares; standard errors are scaled by the weighted
/// residual variance.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LinearFit> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let n = x.len();
    if n < 3 {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let sigma2 = sse / (n - 2) as f64;
    let slope_se = (sigma2 / sxx).sqrt();
    let intercept_se = (sigma2 * (1.0 / sw + mx * mx / sxx)).sqrt();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(LinearFit { n, slope, intercept, slope_se, intercept_se, r2 })
}

// ---------------------------------------------------------------------------
// profiles

/// Mean signed profile over snapshots, in the layout of
/// [`crate::Book::profile_snapshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileStats {
    pub window: usize,
    pub mean: Vec<f64>,
    pub samples: usize,
    /// Snapshots with non-zero volume in each slot.
    pub occupied: Vec<usize>,
}

impl ProfileStats {
    /// Mean bid volume at offset `k` below the mid (positive).
    pub fn bid(&self, k: usize) -> f64 {
        self.mean[self.window - k]
    }

    /// Mean ask volume at offset `k` above the mid (negative).
    pub fn ask(&self, k: usize) -> f64 {
        self.mean[self.window + k - 1]
    }

    /// Mean absolute volume at offset `k`, averaged over both sides.
    pub fn mean_abs(&self, k: usize) -> f64 {
        (self.bid(k).abs() + self.ask(k).abs()) / 2.0
    }

    /// Slots that never held volume.
    pub fn empty_slots(&self) -> Vec<usize> {
        (0..self.mean.len()).filter(|&i| self.occupied[i] == 0).collect()
    }

    /// Signed offset of slot `i`: `-k` for bid offset `k`, `+k` for asks.
    pub fn offset(&self, i: usize) -> i64 {
        let (i, w) = (i as i64, self.window as i64);
        if i < w {
            i - w
        } else {
            i - w + 1
        }
    }

    /// Snapshot-weighted combination of averages over the same window.
    pub fn merge(parts: &[ProfileStats]) -> Result<ProfileStats, StatsError> {
        let first = parts.first().ok_or(StatsError::NoSnapshots)?;
        let window = first.window;
        let mut sum = vec![0.0; 2 * window];
        let mut occupied = vec![0usize; 2 * window];
        let mut samples = 0;
        for p in parts {
            if p.window != window {
                return Err(StatsError::NarrowSnapshot { got: 2 * p.window, window });
            }
            for i in 0..2 * window {
                sum[i] += p.mean[i] * p.samples as f64;
                occupied[i] += p.occupied[i];
            }
            samples += p.samples;
        }
        if samples == 0 {
            return Err(StatsError::NoSnapshots);
        }
        let mean = sum.into_iter().map(|s| s / samples as f64).collect();
        Ok(ProfileStats { window, mean, samples, occupied })
    }

    /// Regression of [`ProfileStats::mean_abs`] on the offset over `lo..=hi`.
    pub fn level_fit(&self, lo: usize, hi: usize) -> Option<LinearFit> {
        let hi = hi.min(self.window);
        let x: Vec<f64> = (lo..=hi).map(|k| k as f64).collect();
        let y: Vec<f64> = (lo..=hi).map(|k| self.mean_abs(k)).collect();
        linear_fit(&x, &y)
    }
}

/// Averages signed snapshots slot by slot. Wider snapshots are cropped
/// around the mid to `window` levels per side.
pub fn average_profile<'a, I>(snapshots: I, window: usize) -> Result<ProfileStats, StatsError>
where
    I: IntoIterator<Item = &'a [i64]>,
{
    let mut sum = vec![0.0f64; 2 * window];
    let mut occupied = vec![0usize; 2 * window];
    let mut samples = 0;
    for x in snapshots {
        let w = x.len() / 2;
        if w < window {
            return Err(StatsError::NarrowSnapshot { got: x.len(), window });
        }
        let crop = &x[w - window..w + window];
        for (i, &v) in crop.iter().enumerate() {
            sum[i] += v as f64;
            if v != 0 {
                occupied[i] += 1;
            }
        }
        samples += 1;
    }
    if samples == 0 {
        return Err(StatsError::NoSnapshots);
    }
    let mean = sum.into_iter().map(|s| s / samples as f64).collect();
    Ok(ProfileStats { window, mean, samples, occupied })
}

// ---------------------------------------------------------------------------
// spread response

/// Log-log fit of post-trade spread against market order volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadResponse {
    /// (market order volume, spread in ticks right after it).
    pub samples: Vec<(u64, u64)>,
    pub beta: f64,
    pub intercept: f64,
    pub beta_se: f64,
    pub r2: f64,
}

impl SpreadResponse {
    /// Mean post-trade spread per distinct volume.
    pub fn mean_by_volume(&self) -> Vec<(u64, f64, usize)> {
        let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for &(v, d) in &self.samples {
            let e = acc.entry(v).or_default();
            e.0 += d as f64;
            e.1 += 1;
        }
        acc.into_iter().map(|(v, (s, c))| (v, s / c as f64, c)).collect()
    }
}

/// Collects fully filled trades and fits `log spread = beta log volume + c`.
pub fn spread_response<'a, I>(trades: I) -> Result<SpreadResponse, StatsError>
where
    I: IntoIterator<Item = &'a TradeRecord>,
{
    let pairs: Vec<(u64, u64)> =
        trades.into_iter().filter(|t| t.unfilled == 0).filter_map(|t| t.spread_after.map(|d| (t.volume, d))).collect();
    fit_spread_pairs(pairs)
}

/// Fits already collected (volume, spread) pairs.
pub fn fit_spread_pairs(samples: Vec<(u64, u64)>) -> Result<SpreadResponse, StatsError> {
    if samples.len() < MIN_SPREAD_TRADES {
        return Err(StatsError::TooFewTrades { needed: MIN_SPREAD_TRADES, got: samples.len() });
    }
    let min = samples.iter().map(|p| p.0).min().unwrap_or(0);
    let max = samples.iter().map(|p| p.0).max().unwrap_or(0);
    if min == 0 || max < 10 * min {
        return Err(StatsError::NarrowVolumeRange { min, max });
    }
    let x: Vec<f64> = samples.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = samples.iter().map(|p| (p.1.max(1) as f64).ln()).collect();
    let fit = linear_fit(&x, &y).ok_or(StatsError::Degenerate)?;
    Ok(SpreadResponse { samples, beta: fit.slope, intercept: fit.intercept, beta_se: fit.slope_se, r2: fit.r2 })
}

// ---------------------------------------------------------------------------
// power laws

/// Weighted histogram over positive integers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Histogram(BTreeMap<u64, f64>);

impl Histogram {
    pub fn from_samples(samples: &[u64]) -> Self {
        let mut h = Histogram::default();
        for &s in samples {
            h.add(s, 1.0);
        }
        h
    }

    pub fn from_weights<I: IntoIterator<Item = (u64, f64)>>(pairs: I) -> Self {
        let mut h = Histogram::default();
        for (v, w) in pairs {
            h.add(v, w);
        }
        h
    }

    pub fn add(&mut self, value: u64, weight: f64) {
        *self.0.entry(value).or_default() += weight;
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.0.iter().map(|(&v, &w)| (v, w))
    }
}

/// Exponent estimates for a discrete power-law tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub cutoff: u64,
    pub tail_weight: f64,
    /// Count-weighted least squares of log frequency on log value, over the
    /// values from `cutoff + 1` up to the first value never observed.
    pub ols_exponent: f64,
    pub ols_se: f64,
    pub ols_r2: f64,
    /// Maximum likelihood on the truncated support `(cutoff, max observed]`.
    pub mle_exponent: f64,
    pub mle_se: f64,
    /// The data do not look like a power-law tail.
    pub poor: bool,
}

/// Fits the tail `value > cutoff` of a histogram.
pub fn fit_power_law(hist: &Histogram, cutoff: u64) -> Result<PowerLawFit, StatsError> {
    let tail: Vec<(u64, f64)> = hist.iter().filter(|&(v, w)| v > cutoff && w > 0.0).collect();
    let tail_weight: f64 = tail.iter().map(|p| p.1).sum();
    if tail_weight < MIN_TAIL_SAMPLES {
        return Err(StatsError::TooFewTailSamples { needed: MIN_TAIL_SAMPLES, got: tail_weight });
    }
    // Past the first empty value, observed counts are dominated by values
    // whose expected count is below one; the regression stops there.
    let run = tail.iter().zip(cutoff + 1..).take_while(|(p, v)| p.0 == *v).count();
    let dense = &tail[..run.max(3).min(tail.len())];
    let x: Vec<f64> = dense.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = dense.iter().map(|p| (p.1 / tail_weight).ln()).collect();
    let w: Vec<f64> = dense.iter().map(|p| p.1).collect();
    let ols = weighted_linear_fit(&x, &y, &w).ok_or(StatsError::Degenerate)?;

    let lo = cutoff + 1;
    let hi = tail.last().map(|p| p.0).unwrap_or(lo);
    let mean_log = tail.iter().map(|&(v, c)| c * (v as f64).ln()).sum::<f64>() / tail_weight;
    let (mle, var_log) = discrete_mle(lo, hi, mean_log);
    let mle_se = 1.0 / (tail_weight * var_log).sqrt();

    let ols_exponent = -ols.slope;
    Ok(PowerLawFit {
        cutoff,
        tail_weight,
        ols_exponent,
        ols_se: ols.slope_se,
        ols_r2: ols.r2,
        mle_exponent: mle,
        mle_se,
        poor: ols_exponent <= 1.0 || mle <= 1.0 || ols.r2 < 0.5,
    })
}

// Moments of ln(v) under P(v) ∝ v^-g on lo..=hi.
fn log_moments(lo: u64, hi: u64, g: f64) -> (f64, f64) {
    let mut z = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let shift = (lo as f64).ln();
    for v in lo..=hi {
        let l = (v as f64).ln();
        let p = (-g * (l - shift)).exp();
        z += p;
        m1 += p * l;
        m2 += p * l * l;
    }
    let mean = m1 / z;
    (mean, (m2 / z - mean * mean).max(0.0))
}

// Solves E_g[ln v] = mean_log; E_g[ln v] decreases in g.
fn discrete_mle(lo: u64, hi: u64, mean_log: f64) -> (f64, f64) {
    if hi <= lo {
        return (f64::INFINITY, 0.0);
    }
    let (mut a, mut b) = (-20.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if log_moments(lo, hi, mid).0 > mean_log {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-10 {
            break;
        }
    }
    let g = 0.5 * (a + b);
    (g, log_moments(lo, hi, g).1)
}

// ---------------------------------------------------------------------------
// drift

/// Per-second mid price increments after warmup, in ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftStats {
    pub n: usize,
    pub mean: f64,
    pub se_plain: f64,
    pub se_batched: f64,
    pub t_plain: f64,
    pub t_batched: f64,
    /// Two-sided p-value of the batched-means t statistic.
    pub p_value: f64,
    /// Share of seconds whose increment is >= 0.
    pub monotonic_fraction: f64,
}

impl DriftStats {
    /// Two-sided test of zero drift (batched means) at level `alpha`.
    pub fn rejects_zero(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Drift statistics from post-warmup series rows; rows without a mid are skipped.
pub fn drift_stats(rows: &[SeriesRow]) -> Result<DriftStats, StatsError> {
    let mids: Vec<f64> = rows.iter().filter_map(SeriesRow::mid).collect();
    drift_from_mids(&mids)
}

pub fn drift_from_mids(mids: &[f64]) -> Result<DriftStats, StatsError> {
    let inc: Vec<f64> = mids.windows(2).map(|w| w[1] - w[0]).collect();
    let n = inc.len();
    if n < MIN_DRIFT_SECONDS {
        return Err(StatsError::TooShort { needed: MIN_DRIFT_SECONDS, got: n });
    }
    let mean = inc.iter().sum::<f64>() / n as f64;
    let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se_plain = (var / n as f64).sqrt();

    let b = n / DRIFT_BATCHES;
    let batch_means: Vec<f64> =
        inc.chunks_exact(b).take(DRIFT_BATCHES).map(|c| c.iter().sum::<f64>() / b as f64).collect();
    let k = batch_means.len() as f64;
    let bm = batch_means.iter().sum::<f64>() / k;
    let bvar = batch_means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (k - 1.0);
    let se_batched = (bvar / k).sqrt();

    let t = |se: f64| if se > 0.0 { mean / se } else { 0.0 };
    let t_batched = t(se_batched);
    let p_value = if se_batched > 0.0 {
        let dist = StudentsT::new(0.0, 1.0, k - 1.0).expect("valid degrees of freedom");
        2.0 * (1.0 - dist.cdf(t_batched.abs()))
    } else if mean == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(DriftStats {
        n,
        mean,
        se_plain,
        se_batched,
        t_plain: t(se_plain),
        t_batched,
        p_value,
        monotonic_fraction: inc.iter().filter(|&&d| d >= 0.0).count() as f64 / n as f64,
    })
}

/// One-sided sign test: probability of at least `successes` out of `n` fair coin flips.
pub fn sign_test_p(successes: usize, n: usize) -> f64 {
    let mut p = 0.0;
    let mut c = 1.0f64; // C(n, 0)
    for k in 0..=n {
        if k >= successes {
            p += c;
        }
        c = c * (n - k) as f64 / (k + 1) as f64;
    }
    p / 2f64.powi(n as i32)
}

// ---------------------------------------------------------------------------
// depth and inter-arrival tables

/// Summary and histogram of waiting times between events of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct InterArrival {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub bin_width: f64,
    /// Counts per bin `[i w, (i+1) w)`; the last bin also holds the overflow.
    pub counts: Vec<u64>,
}

/// Bins per inter-arrival histogram.
pub const INTER_ARRIVAL_BINS: usize = 40;

impl InterArrival {
    pub fn from_gaps(gaps: &[f64]) -> Option<Self> {
        if gaps.is_empty() {
            return None;
        }
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let std = if gaps.len() > 1 {
            (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        // ten bins per mean gap, four mean gaps in total
        let bin_width = if mean > 0.0 { mean / 10.0 } else { 1.0 };
        let mut counts = vec![0u64; INTER_ARRIVAL_BINS];
        for g in gaps {
            let i = ((g / bin_width) as usize).min(INTER_ARRIVAL_BINS - 1);
            counts[i] += 1;
        }
        Some(InterArrival { count: gaps.len(), mean, std, bin_width, counts })
    }
}

/// Tables derived from a run after warmup.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTables {
    /// (t, s(100), d(100)).
    pub depth: Vec<(f64, u64, u64)>,
    /// (t, mid in ticks, spread in ticks).
    pub price: Vec<(f64, Option<f64>, Option<u64>)>,
    pub market_gaps: Vec<f64>,
    pub limit_gaps: Vec<f64>,
    pub market: Option<InterArrival>,
    pub limit: Option<InterArrival>,
}

pub fn series_extract(run: &RunOutput) -> SeriesTables {
    series_from_parts(run.main_series(), &run.events)
}

/// Builds the tables from post-warmup series rows and the event log. Only
/// `Phase::Main` events enter the inter-arrival samples.
pub fn series_from_parts(rows: &[SeriesRow], events: &[SimEvent]) -> SeriesTables {
    let depth = rows.iter().map(|r| (r.t, r.s100, r.d100)).collect();
    let price = rows.iter().map(|r| (r.t, r.mid(), r.spread)).collect();
    let gaps = |action: Action| -> Vec<f64> {
        let times: Vec<f64> = events
            .iter()
            .filter(|e| e.phase == Phase::Main && e.action == action)
            .filter(|e| action != Action::Market || !e.gated)
            .map(|e| e.t)
            .collect();
        times.windows(2).map(|w| w[1] - w[0]).collect()
    };
    let market_gaps = gaps(Action::Market);
    let limit_gaps = gaps(Action::Limit);
    SeriesTables {
        market: InterArrival::from_gaps(&market_gaps),
        limit: InterArrival::from_gaps(&limit_gaps),
        depth,
        price,
        market_gaps,
        limit_gaps,
    }
}
