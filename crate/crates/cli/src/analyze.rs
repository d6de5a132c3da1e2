//! `cobsim analyze`: tables and a text summary for one run or a seed batch.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cobsim::engine::Phase;
use cobsim::io::{read_run, LoadedRun, MANIFEST_FILE};
use cobsim::stats::{
    average_profile, drift_stats, fit_power_law, fit_spread_pairs, series_from_parts, sign_test_p, DriftStats,
    Histogram, InterArrival, PowerLawFit, ProfileStats, SpreadResponse, DEFAULT_TAIL_CUTOFF,
};
use cobsim::{Action, SimConfig};

use crate::{read_err, CliError};

pub const PROFILE_FILE: &str = "profile_average.csv";
pub const SPREAD_FILE: &str = "spread_response.csv";
pub const DRIFT_FILE: &str = "drift.csv";
pub const POWER_LAW_FILE: &str = "power_law_fit.csv";
pub const INTER_ARRIVAL_FILE: &str = "inter_arrival.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// What one run contributes to the analysis.
struct RunPart {
    seed: u64,
    profile: Option<ProfileStats>,
    spread_pairs: Vec<(u64, u64)>,
    drift: Result<DriftStats, String>,
    market_volumes: Vec<u64>,
    limit_volumes: Vec<u64>,
    limit_levels: Vec<u64>,
    cancel_volumes: Vec<u64>,
    market_gaps: Vec<f64>,
    limit_gaps: Vec<f64>,
    seconds: f64,
}

fn part(run: &LoadedRun) -> RunPart {
    let main = |e: &&cobsim::SimEvent| e.phase == Phase::Main && !e.gated;
    let of = |a: Action| run.events.iter().filter(main).filter(move |e| e.action == a);
    let tables = series_from_parts(run.main_series(), &run.events);
    let series = run.main_series();
    RunPart {
        seed: run.config.seed,
        profile: average_profile(run.main_profiles().map(|p| p.x.as_slice()), run.config.profile_window).ok(),
        spread_pairs: run
            .main_trades()
            .filter(|t| t.unfilled == 0)
            .filter_map(|t| t.spread_after.map(|d| (t.volume, d)))
            .collect(),
        drift: drift_stats(series).map_err(|e| e.to_string()),
        market_volumes: of(Action::Market).map(|e| e.volume).collect(),
        limit_volumes: of(Action::Limit).map(|e| e.volume).collect(),
        limit_levels: of(Action::Limit).filter_map(|e| e.level).collect(),
        cancel_volumes: of(Action::Cancel).map(|e| e.volume).collect(),
        market_gaps: tables.market_gaps,
        limit_gaps: tables.limit_gaps,
        seconds: series.len() as f64,
    }
}

/// Run directories under `dir`: itself, or its `seed-<n>` children in seed
/// order.
fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if dir.join(MANIFEST_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut runs: Vec<(u64, PathBuf)> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let seed = name.strip_prefix("seed-")?.parse().ok()?;
            let path = e.path();
            path.join(MANIFEST_FILE).is_file().then_some((seed, path))
        })
        .collect();
    if runs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no run found (expected {MANIFEST_FILE} or seed-<n> directories)",
            dir.display()
        )));
    }
    runs.sort();
    Ok(runs.into_iter().map(|r| r.1).collect())
}

fn fit(samples: &[u64]) -> Result<PowerLawFit, String> {
    fit_power_law(&Histogram::from_samples(samples), DEFAULT_TAIL_CUTOFF).map_err(|e| e.to_string())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn analyze(dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let dirs = run_dirs(dir)?;
    let mut parts = Vec::new();
    let mut config: Option<SimConfig> = None;
    for d in &dirs {
        let run = read_run(d).map_err(read_err)?;
        parts.push(part(&run));
        config.get_or_insert(run.config);
    }
    let config = config.expect("at least one run");
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;

    let seeds = if parts.len() == 1 {
        parts[0].seed.to_string()
    } else {
        format!("{}..{}", parts[0].seed, parts[parts.len() - 1].seed)
    };
    let head = format!("# cobsim {} seed={seeds} preset={}\n", cobsim::VERSION, config.name);
    let mut summary = head.clone();
    let _ = writeln!(summary, "runs analysed: {} ({})\n", parts.len(), dir.display());

    // averaged book profile
    let profiles: Vec<ProfileStats> = parts.iter().filter_map(|p| p.profile.clone()).collect();
    let mut csv = head.clone() + "offset,mean_volume,occupied_fraction\n";
    let _ = writeln!(summary, "[{PROFILE_FILE}] mean book profile around the mid price (bids positive, asks negative)");
    match ProfileStats::merge(&profiles) {
        Ok(p) => {
            for i in 0..p.mean.len() {
                let _ =
                    writeln!(csv, "{},{:.6},{:.6}", p.offset(i), p.mean[i], p.occupied[i] as f64 / p.samples as f64);
            }
            let _ = writeln!(summary, "  snapshots: {}", p.samples);
            let hi = 500.min(p.window);
            if let Some(f) = (hi > 20).then(|| p.level_fit(20, hi)).flatten() {
                let _ = writeln!(
                    summary,
                    "  flatness, levels 20..{hi}: slope {:.3e} ± {:.3e} (t = {:.2}); flat if |t| <= 2",
                    f.slope,
                    f.slope_se,
                    f.slope / f.slope_se
                );
            }
            if let Some(f) = p.level_fit(1, 10.min(p.window)) {
                let _ = writeln!(
                    summary,
                    "  near the best, levels 1..10: slope {:.4} ± {:.4}, R2 {:.3}",
                    f.slope, f.slope_se, f.r2
                );
            }
        }
        Err(e) => {
            let _ = writeln!(summary, "  unavailable: {e}");
        }
    }
    write(out, PROFILE_FILE, &csv)?;

    // spread response
    let pairs: Vec<(u64, u64)> = parts.iter().flat_map(|p| p.spread_pairs.iter().copied()).collect();
    let mut csv = head.clone() + "volume,mean_spread,trades\n";
    let _ = writeln!(summary, "\n[{SPREAD_FILE}] spread right after a market order against its volume");
    let n_pairs = pairs.len();
    match fit_spread_pairs(pairs) {
        Ok(s) => {
            write_spread(&mut csv, &s);
            let _ = writeln!(
                summary,
                "  fully filled trades: {n_pairs}\n  spread ~ volume^beta, beta {:.3} ± {:.3} (95% CI {:.3}..{:.3}), R2 {:.3}",
                s.beta,
                s.beta_se,
                s.beta - 1.96 * s.beta_se,
                s.beta + 1.96 * s.beta_se,
                s.r2
            );
            let _ = writeln!(
                summary,
                "  beta near 1: linear response (flat book); near 0.5: square root (book linear near the best)"
            );
        }
        Err(e) => {
            let _ = writeln!(summary, "  unavailable: {e}");
        }
    }
    write(out, SPREAD_FILE, &csv)?;

    // drift
    let mut csv = head.clone() + "seed,seconds,mean,se_plain,se_batched,t_batched,p_value,monotonic_fraction\n";
    let _ = writeln!(summary, "\n[{DRIFT_FILE}] mid price drift per second after warmup, in ticks");
    let ok: Vec<(u64, &DriftStats)> = parts.iter().filter_map(|p| p.drift.as_ref().ok().map(|d| (p.seed, d))).collect();
    for (seed, d) in &ok {
        let _ = writeln!(
            csv,
            "{seed},{},{:.6},{:.6},{:.6},{:.4},{:.6},{:.4}",
            d.n, d.mean, d.se_plain, d.se_batched, d.t_batched, d.p_value, d.monotonic_fraction
        );
    }
    for p in &parts {
        if let Err(e) = &p.drift {
            let _ = writeln!(summary, "  seed {}: unavailable: {e}", p.seed);
        }
    }
    if !ok.is_empty() {
        let n = ok.len();
        let mean = ok.iter().map(|d| d.1.mean).sum::<f64>() / n as f64;
        let se = ok.iter().map(|d| d.1.se_batched.powi(2)).sum::<f64>().sqrt() / n as f64;
        let up = ok.iter().filter(|d| d.1.mean > 0.0).count();
        let down = ok.iter().filter(|d| d.1.mean < 0.0).count();
        let kept = ok.iter().filter(|d| !d.1.rejects_zero(0.05)).count();
        let mono = ok.iter().map(|d| d.1.monotonic_fraction).sum::<f64>() / n as f64;
        let _ = writeln!(summary, "  mean drift {mean:.5} ± {se:.5} ticks/s over {n} run(s)");
        let _ = writeln!(summary, "  zero drift not rejected at 5% in {kept}/{n} run(s)");
        let _ = writeln!(
            summary,
            "  rising in {up}/{n} (sign test p {:.3e}), falling in {down}/{n} (p {:.3e})",
            sign_test_p(up, n),
            sign_test_p(down, n)
        );
        let _ = writeln!(summary, "  mean share of seconds without a price fall: {mono:.3}");
    }
    write(out, DRIFT_FILE, &csv)?;

    // power-law tails
    let mut csv = head.clone() + "sample,cutoff,tail_weight,ols_exponent,ols_se,ols_r2,mle_exponent,mle_se,poor,note\n";
    let _ = writeln!(summary, "\n[{POWER_LAW_FILE}] tail exponents (values above {DEFAULT_TAIL_CUTOFF})");
    let collect =
        |f: fn(&RunPart) -> &Vec<u64>| -> Vec<u64> { parts.iter().flat_map(|p| f(p).iter().copied()).collect() };
    let samples: [(&str, Vec<u64>); 4] = [
        ("market_volume", collect(|p| &p.market_volumes)),
        ("limit_volume", collect(|p| &p.limit_volumes)),
        ("limit_level", collect(|p| &p.limit_levels)),
        ("cancel_volume", collect(|p| &p.cancel_volumes)),
    ];
    for (name, values) in &samples {
        match fit(values) {
            Ok(f) => {
                let _ = writeln!(
                    csv,
                    "{name},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{},",
                    f.cutoff, f.tail_weight, f.ols_exponent, f.ols_se, f.ols_r2, f.mle_exponent, f.mle_se, f.poor
                );
                let _ = writeln!(
                    summary,
                    "  {name:<14} least squares {:.3} ± {:.3}, likelihood {:.3} ± {:.3}{}",
                    f.ols_exponent,
                    f.ols_se,
                    f.mle_exponent,
                    f.mle_se,
                    if f.poor { " (poor fit)" } else { "" }
                );
            }
            Err(e) => {
                let _ = writeln!(csv, "{name},{DEFAULT_TAIL_CUTOFF},,,,,,,,{e}");
                let _ = writeln!(summary, "  {name:<14} unavailable: {e}");
            }
        }
        if *name == "cancel_volume" && values.len() > 1 {
            let n = values.len() as f64;
            let m = values.iter().sum::<u64>() as f64 / n;
            let var = values.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);
            let _ = writeln!(summary, "  mean cancelled volume {m:.4} ± {:.4}", (var / n).sqrt());
        }
    }
    write(out, POWER_LAW_FILE, &csv)?;

    // inter-arrival times
    let mut csv = head.clone() + "kind,bin_start,bin_end,count\n";
    let _ =
        writeln!(summary, "\n[{INTER_ARRIVAL_FILE}] waiting times between consecutive events of one kind, in seconds");
    let seconds: f64 = parts.iter().map(|p| p.seconds).sum();
    for (kind, gaps) in [
        ("market", parts.iter().flat_map(|p| p.market_gaps.iter().copied()).collect::<Vec<_>>()),
        ("limit", parts.iter().flat_map(|p| p.limit_gaps.iter().copied()).collect::<Vec<_>>()),
    ] {
        match InterArrival::from_gaps(&gaps) {
            Some(ia) => {
                for (i, c) in ia.counts.iter().enumerate() {
                    let lo = i as f64 * ia.bin_width;
                    let _ = writeln!(csv, "{kind},{lo:.6},{:.6},{c}", lo + ia.bin_width);
                }
                let _ = writeln!(
                    summary,
                    "  {kind:<7} {} gaps, mean {:.6} s, std {:.6} s (exponential if equal), {:.3} events/s",
                    ia.count,
                    ia.mean,
                    ia.std,
                    1.0 / ia.mean
                );
            }
            None => {
                let _ = writeln!(summary, "  {kind:<7} no events");
            }
        }
    }
    let _ = writeln!(summary, "  post-warmup time analysed: {seconds:.0} s");
    write(out, INTER_ARRIVAL_FILE, &csv)?;

    write(out, SUMMARY_FILE, &summary)?;
    print!("{summary}");
    Ok(())
}

fn write_spread(csv: &mut String, s: &SpreadResponse) {
    for (v, m, c) in s.mean_by_volume() {
        let _ = writeln!(csv, "{v},{m:.4},{c}");
    }
}
