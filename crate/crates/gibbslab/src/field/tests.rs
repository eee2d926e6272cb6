use super::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn hash_field(seed: u64, eta: f64, max_depth: u32) -> FieldConfig {
    FieldConfig::new(seed, eta, 1, Backend::Hash, max_depth).unwrap()
}

fn index_field(seed: u64, eta: f64, max_depth: u32) -> FieldConfig {
    FieldConfig::new(seed, eta, 1, Backend::Index, max_depth).unwrap()
}

#[test]
fn root_always_survives_and_calls_are_pure() {
    let f = hash_field(42, 0.5, 30);
    assert!(f.survives(&DyadicWord::root(1)).unwrap());
    let w = DyadicWord::parse(1, "0110100110").unwrap();
    let a = f.survives(&w).unwrap();
    let b = f.survives(&w).unwrap();
    assert_eq!(a, b);
}

#[test]
fn depth_overflow_and_backend_preconditions() {
    let f = hash_field(1, 0.5, 8);
    let deep = DyadicWord::from_tree_index(1, 9, 0);
    assert!(matches!(f.survives(&deep), Err(LabError::DepthOverflow { .. })));
    let idx = index_field(1, 0.5, 8);
    assert!(idx.survives(&DyadicWord::root(1)).is_err());
}

#[test]
fn eta_must_be_in_open_unit_interval() {
    assert!(FieldConfig::new(1, 0.0, 1, Backend::Hash, 8).is_err());
    assert!(FieldConfig::new(1, 1.0, 1, Backend::Hash, 8).is_err());
}

#[test]
fn survivors_at_depth_equals_prefix() {
    let f = hash_field(3, 0.5, 20);
    for idx in 0..32u64 {
        let w = DyadicWord::from_tree_index(1, 5, idx);
        let set = f.survivors_at(5, Some(&w)).unwrap();
        if f.survives(&w).unwrap() {
            assert_eq!(set, vec![w]);
        } else {
            assert!(set.is_empty());
        }
    }
}

#[test]
fn hash_prefix_scan_matches_level_filter() {
    let f = hash_field(9, 0.6, 16);
    let level = f.survivor_indices_below(12, 0, 0).unwrap();
    for pi in 0..8u64 {
        let below = f.survivor_indices_below(12, 3, pi).unwrap();
        let filtered: Vec<u64> =
            level.iter().copied().filter(|t| t >> 9 == pi).collect();
        assert_eq!(below, filtered);
    }
}

#[test]
fn index_backend_is_pure_and_prefix_filter_consistent() {
    let f = index_field(77, 0.5, 24);
    let a = f.survivor_indices_below(18, 0, 0).unwrap();
    let b = f.survivor_indices_below(18, 0, 0).unwrap();
    assert_eq!(a, b);
    let below = f.survivor_indices_below(18, 4, 5).unwrap();
    let filtered: Vec<u64> = a.iter().copied().filter(|t| t >> 14 == 5).collect();
    assert_eq!(below, filtered);
}

#[test]
fn survivor_count_mean_j20_hash() {
    // Binomial(2^20, 2^-10): mean 1024, sd ~ 32; seed-averaged over 8 seeds
    let mut total = 0u64;
    for seed in 0..8u64 {
        let f = hash_field(seed, 0.5, 22);
        total += f.survivor_indices_below(20, 0, 0).unwrap().len() as u64;
    }
    let mean = total as f64 / 8.0;
    assert!((mean - 1024.0).abs() <= 3.0 * 32.0, "mean = {mean}");
}

#[test]
fn survivor_count_mean_j24_index() {
    // Binomial(2^24, 2^-12): mean 4096, sd ~ 64
    let mut total = 0u64;
    for seed in 100..108u64 {
        let f = index_field(seed, 0.5, 26);
        total += f.survivor_indices_below(24, 0, 0).unwrap().len() as u64;
    }
    let mean = total as f64 / 8.0;
    assert!((mean - 4096.0).abs() <= 3.0 * 64.0, "mean = {mean}");
}

#[test]
fn marginal_frequency_within_four_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for j in 1..=22u32 {
        let n = (64u64 << (22 - j)) as usize;
        let mut hits = 0u64;
        let mut p_exact = 0.0;
        for draw in 0..n {
            let f = hash_field(rng.gen::<u64>() ^ draw as u64, 0.5, 24);
            p_exact = f.marginal_probability(j);
            let mut st = f.root_state();
            for _ in 0..j {
                st = f.absorb(st, rng.gen_range(0..2));
            }
            if f.state_survives(&st) {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        let se = (p_exact * (1.0 - p_exact) / n as f64).sqrt();
        assert!(
            (freq - p_exact).abs() <= 4.0 * se,
            "j={j}: freq {freq} vs p {p_exact} (se {se})"
        );
    }
}

#[test]
fn sibling_survival_indicators_are_uncorrelated() {
    // two sibling nodes at depth 12, eta = 0.5, over 10^4 seeds
    let left = DyadicWord::parse(1, "011010011010").unwrap();
    let right = DyadicWord::parse(1, "011010011011").unwrap();
    let n = 10_000usize;
    let (mut sx, mut sy, mut sxy) = (0f64, 0f64, 0f64);
    for seed in 0..n as u64 {
        let f = hash_field(seed, 0.5, 14);
        let x = f.survives(&left).unwrap() as u32 as f64;
        let y = f.survives(&right).unwrap() as u32 as f64;
        sx += x;
        sy += y;
        sxy += x * y;
    }
    let n = n as f64;
    let (mx, my) = (sx / n, sy / n);
    let cov = sxy / n - mx * my;
    let corr = cov / (mx * (1.0 - mx)).sqrt() / (my * (1.0 - my)).sqrt();
    assert!(corr.abs() < 0.02, "sibling correlation {corr}");
}

#[test]
fn index_and_hash_counts_agree_by_chi_square() {
    // both are Binomial(2^14, ~2^-7); two-sample chi-square at level 0.01
    let j = 14;
    let mut hash_counts = Vec::with_capacity(200);
    let mut index_counts = Vec::with_capacity(200);
    for seed in 0..200u64 {
        hash_counts
            .push(hash_field(seed, 0.5, 16).survivor_indices_below(j, 0, 0).unwrap().len());
        index_counts.push(
            index_field(seed ^ 0xdead_beef, 0.5, 16)
                .survivor_indices_below(j, 0, 0)
                .unwrap()
                .len(),
        );
    }
    // bins from pooled deciles
    let mut pooled: Vec<usize> = hash_counts.iter().chain(&index_counts).copied().collect();
    pooled.sort_unstable();
    let mut edges: Vec<usize> = (1..8).map(|k| pooled[pooled.len() * k / 8]).collect();
    edges.dedup();
    let bin_of = |c: usize| edges.partition_point(|&e| e <= c);
    let bins = edges.len() + 1;
    let mut a = vec![0f64; bins];
    let mut b = vec![0f64; bins];
    for &c in &hash_counts {
        a[bin_of(c)] += 1.0;
    }
    for &c in &index_counts {
        b[bin_of(c)] += 1.0;
    }
    let (na, nb) = (200f64, 200f64);
    let mut chi2 = 0.0;
    let mut df = 0i32;
    for i in 0..bins {
        let pooled_p = (a[i] + b[i]) / (na + nb);
        if pooled_p == 0.0 {
            continue;
        }
        let (ea, eb) = (na * pooled_p, nb * pooled_p);
        chi2 += (a[i] - ea).powi(2) / ea + (b[i] - eb).powi(2) / eb;
        df += 1;
    }
    df -= 1;
    let dist = ChiSquared::new(df as f64).unwrap();
    let p_value = 1.0 - dist.cdf(chi2);
    assert!(p_value > 0.01, "chi2 = {chi2}, df = {df}, p = {p_value}");
}

#[test]
fn empty_levels_below_2_pow_minus_64_warn_and_never_survive() {
    // d=1, eta=0.05: p < 2^-64 from depth ceil(64/0.95) = 68
    let f = FieldConfig::new(5, 0.05, 1, Backend::Hash, 100).unwrap();
    assert_eq!(f.warnings().len(), 1);
    assert!(f.warnings()[0].contains("depth 68"));
    let mut any = false;
    for idx in 0..64u64 {
        let mut w = DyadicWord::root(1);
        for k in 0..70 {
            w.push(((idx >> (k % 6)) & 1) as u8);
        }
        any |= f.survives(&w).unwrap();
    }
    assert!(!any, "depth-70 nodes have survival probability below 2^-64");

    let shallow = FieldConfig::new(5, 0.5, 1, Backend::Hash, 30).unwrap();
    assert!(shallow.warnings().is_empty());
}

#[test]
fn enumeration_rejects_unpackable_depths() {
    let f = FieldConfig::new(5, 0.5, 2, Backend::Index, 40).unwrap();
    assert!(matches!(
        f.survivor_indices_below(40, 0, 0),
        Err(LabError::Resource { .. })
    ));
}
