use cobsim::flow::{sample_event, EventKind};
use cobsim::sampler::{sample_power_law, DiscreteCdf, LevelModel, PowerLaw, VolumeModel};
use cobsim::stats::{fit_power_law, fit_spread_pairs, Histogram};
use cobsim::RateSet;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn power_law_normalizer_by_direct_sum() {
    for (g, vmax) in [(2.5, 100u64), (2.8, 1000), (2.0, 1000)] {
        let z: f64 = (1..=vmax).map(|v| (v as f64).powf(-g)).sum();
        let law = PowerLaw::new(g, vmax).unwrap();
        assert!((law.table().prob(1) - 1.0 / z).abs() < 1e-12);
        assert!((law.table().prob(7) - 7f64.powf(-g) / z).abs() < 1e-12);
        let mean: f64 = (1..=vmax).map(|v| v as f64 * (v as f64).powf(-g)).sum::<f64>() / z;
        assert!((law.mean() - mean).abs() < 1e-9);
        assert_eq!(*law.table().cdf().last().unwrap(), 1.0);
    }
}

#[test]
fn power_law_unit_frequency_within_three_sigma() {
    let law = PowerLaw::new(2.5, 100).unwrap();
    let p = law.table().prob(1);
    let n = 1_000_000;
    let mut r = rng(11);
    let ones = (0..n).filter(|_| law.sample(&mut r) == 1).count() as f64;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((ones - n as f64 * p).abs() < 3.0 * sigma, "{ones} vs {}", n as f64 * p);
}

#[test]
fn sample_power_law_stays_in_support() {
    let mut r = rng(3);
    for _ in 0..10_000 {
        let v = sample_power_law(2.0, 50, &mut r).unwrap();
        assert!((1..=50).contains(&v));
    }
    assert!(sample_power_law(1.0, 50, &mut r).is_err());
}

#[test]
fn round_lot_mixture_matches_enumeration() {
    let weights = [0.5, 0.3, 0.2];
    let exponents = [2.8, 2.2, 2.0];
    let v_max = 1000u64;
    let model = VolumeModel::RoundLotMixture { weights, exponents, v_max };
    let s = model.sampler().unwrap();
    let comp = |k: usize, v: u64| -> f64 {
        let m = [1u64, 10, 100][k];
        if !v.is_multiple_of(m) {
            return 0.0;
        }
        let z: f64 = (1..=v_max / m).map(|j| (j as f64).powf(-exponents[k])).sum();
        ((v / m) as f64).powf(-exponents[k]) / z
    };
    let mut total = 0.0;
    let mut mean = 0.0;
    for v in 1..=v_max {
        let p: f64 = (0..3).map(|k| weights[k] * comp(k, v)).sum();
        assert!((s.prob(v) - p).abs() < 1e-12, "v={v}");
        total += p;
        mean += p * v as f64;
    }
    assert!((total - 1.0).abs() < 1e-12);
    assert!((s.mean() - mean).abs() < 1e-9);

    // share of draws that are multiples of 100
    let p100: f64 = (1..=v_max / 100).map(|j| s.prob(100 * j)).sum();
    let n = 200_000;
    let mut r = rng(5);
    let hits = (0..n).filter(|_| s.sample(&mut r) % 100 == 0).count() as f64;
    let sigma = (n as f64 * p100 * (1.0 - p100)).sqrt();
    assert!((hits - n as f64 * p100).abs() < 3.0 * sigma);
}

#[test]
fn limit_mean_volume_by_explicit_sum() {
    let model = VolumeModel::PowerLaw { gamma: 2.8, v_max: 1000 };
    let z: f64 = (1..=1000u64).map(|v| (v as f64).powf(-2.8)).sum();
    let s_l: f64 = (1..=1000u64).map(|v| (v as f64).powf(-1.8)).sum::<f64>() / z;
    assert!((model.sampler().unwrap().mean() - s_l).abs() < 1e-12);
}

#[test]
fn level_model_head_and_tail() {
    let m = LevelModel::default();
    let t = m.sampler().unwrap();
    assert_eq!(t.values().len(), 1000);
    assert!((t.prob(1) - t.prob(10)).abs() < 1e-15);
    let ratio = t.prob(40) / t.prob(20);
    assert!((ratio - 2f64.powf(-2.5)).abs() < 1e-12);
}

#[test]
fn discrete_cdf_last_bucket_is_one() {
    let t = DiscreteCdf::from_weights(vec![1, 2, 3], &[0.1, 0.2, 0.3]);
    assert_eq!(*t.cdf().last().unwrap(), 1.0);
    assert!((t.prob(2) - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn event_frequencies_and_mean_gap() {
    let rates = RateSet {
        limit_bid: 40.0,
        limit_ask: 40.0,
        market_bid: 9.0,
        market_ask: 9.0,
        cancel_bid: 40.5,
        cancel_ask: 40.5,
    };
    let n = 1_000_000usize;
    let mut r = rng(21);
    let mut counts = [0usize; 6];
    let mut sum_dt = 0.0;
    let mut sum_dt2 = 0.0;
    for _ in 0..n {
        let (kind, dt) = sample_event(&rates, &mut r).unwrap();
        let i = EventKind::ALL.iter().position(|k| *k == kind).unwrap();
        counts[i] += 1;
        sum_dt += dt;
        sum_dt2 += dt * dt;
    }
    let total = rates.total();
    for (i, kind) in EventKind::ALL.iter().enumerate() {
        let p = rates.rate_of(*kind) / total;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((counts[i] as f64 - n as f64 * p).abs() < 3.0 * sigma, "{kind:?}");
    }
    let mean = sum_dt / n as f64;
    let se = ((sum_dt2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - 1.0 / 179.0).abs() < 3.0 * se, "{mean}");
}

#[test]
fn ols_is_exact_on_the_analytic_histogram() {
    let law = PowerLaw::new(2.5, 100).unwrap();
    let t = law.table();
    let hist = Histogram::from_weights(t.values().iter().map(|&v| (v, 1e6 * t.prob(v))));
    let fit = fit_power_law(&hist, 10).unwrap();
    assert!((fit.ols_exponent - 2.5).abs() < 1e-6, "{}", fit.ols_exponent);
    assert!((fit.mle_exponent - 2.5).abs() < 1e-6, "{}", fit.mle_exponent);
    assert!(!fit.poor);
}

#[test]
fn uniform_samples_fit_poorly() {
    let mut r = rng(2);
    let samples: Vec<u64> = (0..100_000).map(|_| rand::Rng::random_range(&mut r, 1..=100)).collect();
    let fit = fit_power_law(&Histogram::from_samples(&samples), 10).unwrap();
    assert!(fit.poor);
    assert!(fit.ols_exponent.abs() < 0.2, "{}", fit.ols_exponent);
}

#[test]
fn too_few_tail_samples_refused() {
    assert!(fit_power_law(&Histogram::from_samples(&[20, 30, 40]), 10).is_err());
}

#[test]
fn exponent_recovery_from_draws() {
    for (g, seed) in [(2.0, 1u64), (2.5, 2), (2.8, 3)] {
        let law = PowerLaw::new(g, 1000).unwrap();
        let mut r = rng(seed);
        let draws: Vec<u64> = (0..1_000_000).map(|_| law.sample(&mut r)).collect();
        let fit = fit_power_law(&Histogram::from_samples(&draws), 10).unwrap();
        eprintln!("gamma {g}: ols {:.3} mle {:.3} ± {:.3}", fit.ols_exponent, fit.mle_exponent, fit.mle_se);
        assert!((fit.ols_exponent - g).abs() < 0.1, "ols {} vs {g}", fit.ols_exponent);
        assert!((fit.mle_exponent - g).abs() < 0.1, "mle {} vs {g}", fit.mle_exponent);
        assert!((fit.mle_exponent - g).abs() < 4.0 * fit.mle_se);
    }
}

#[test]
fn square_root_spread_pairs() {
    let pairs: Vec<(u64, u64)> = (1..=10_000u64).map(|v| (v, (v as f64).sqrt().ceil() as u64)).collect();
    let fit = fit_spread_pairs(pairs).unwrap();
    assert!((fit.beta - 0.5).abs() < 0.05, "{}", fit.beta);
}

#[test]
fn linear_and_power_spread_pairs_within_three_se() {
    let pairs: Vec<(u64, u64)> = (1..=500u64).map(|v| (v, v)).collect();
    assert!((fit_spread_pairs(pairs).unwrap().beta - 1.0).abs() < 1e-12);
    // multiplicative noise around v^0.7
    let mut r = rng(8);
    let pairs: Vec<(u64, u64)> = (0..5000)
        .map(|_| {
            let v = rand::Rng::random_range(&mut r, 1..=1000u64);
            let noise: f64 = rand::Rng::random_range(&mut r, 0.8..1.25);
            (v, ((v as f64).powf(0.7) * 10.0 * noise).round().max(1.0) as u64)
        })
        .collect();
    let fit = fit_spread_pairs(pairs).unwrap();
    assert!((fit.beta - 0.7).abs() < 3.0 * fit.beta_se.max(1e-3), "{} ± {}", fit.beta, fit.beta_se);
}

#[test]
fn spread_fit_needs_a_decade() {
    let pairs: Vec<(u64, u64)> = (0..100).map(|i| (1 + i % 5, 3)).collect();
    assert!(fit_spread_pairs(pairs).is_err());
}
