use super::*;
use crate::numerics::log2_sum_exp2;
use crate::word::DyadicWord;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub(crate) fn bernoulli_02_08() -> GibbsModel {
    GibbsModel::new(
        1,
        BaseMeasure::Bernoulli { weights: vec![0.2, 0.8] },
        1.0,
        1.0,
        0.0,
    )
    .unwrap()
}

pub(crate) fn homogeneous(beta: f64) -> GibbsModel {
    GibbsModel::new(1, BaseMeasure::Homogeneous, 1.0, 0.0, beta).unwrap()
}

pub(crate) fn markov_asym() -> GibbsModel {
    GibbsModel::new(
        1,
        BaseMeasure::Markov {
            init: vec![0.5, 0.5],
            rows: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
        },
        1.0,
        1.0,
        0.0,
    )
    .unwrap()
}

fn random_word(rng: &mut impl Rng, d: u8, max_len: usize) -> DyadicWord {
    let len = rng.gen_range(0..=max_len);
    let mut w = DyadicWord::root(d);
    for _ in 0..len {
        w.push(rng.gen_range(0..(1u8 << d)));
    }
    w
}

/// Independent finite-volume oracle: direct enumeration of
/// `tau_{mu,j}(q) = -(1/j) log2 sum_{|w|=j} mu(I_w)^q`.
fn tau_finite_volume(model: &GibbsModel, j: u32, q: f64) -> f64 {
    let cells = 1u64 << (model.dimension() as u32 * j);
    let terms: Vec<f64> = (0..cells).map(|i| q * model.mu_log2_index(j, i)).collect();
    -log2_sum_exp2(terms.iter().copied()) / j as f64
}

#[test]
fn mu_log2_examples() {
    let homo = homogeneous(1.0);
    let w5 = DyadicWord::parse(1, "01101").unwrap();
    assert_eq!(homo.mu_log2(&w5).unwrap(), -5.0);

    let bern = bernoulli_02_08();
    let w1 = DyadicWord::parse(1, "1").unwrap();
    assert!((bern.mu_log2(&w1).unwrap() - 0.8f64.log2()).abs() < 1e-15);

    let k_model =
        GibbsModel::new(1, BaseMeasure::Bernoulli { weights: vec![0.2, 0.8] }, 3.0, 1.0, 0.0)
            .unwrap();
    assert_eq!(k_model.mu_log2(&DyadicWord::root(1)).unwrap(), 3f64.log2());
}

#[test]
fn mu_log2_dimension_mismatch() {
    let bern = bernoulli_02_08();
    let w = DyadicWord::from_tree_index(2, 3, 5);
    assert!(matches!(
        bern.mu_log2(&w),
        Err(LabError::DimensionMismatch { .. })
    ));
}

#[test]
fn mu_log2_index_path_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for model in [bernoulli_02_08(), markov_asym(), homogeneous(1.0)] {
        for _ in 0..200 {
            let w = random_word(&mut rng, 1, 40);
            let via_word = model.mu_log2(&w).unwrap();
            let via_index = model.mu_log2_index(w.depth(), w.tree_index());
            assert_eq!(via_word.to_bits(), via_index.to_bits());
        }
    }
}

#[test]
fn mu_log2_deep_words_do_not_underflow() {
    let bern = bernoulli_02_08();
    let mut w = DyadicWord::root(1);
    for i in 0..1_000_000u32 {
        w.push((i % 2) as u8);
    }
    let v = bern.mu_log2(&w).unwrap();
    assert!(v.is_finite() && v < -1e5);
}

#[test]
fn quasi_bernoulli_examples() {
    assert_eq!(bernoulli_02_08().quasi_bernoulli_log2c(), 0.0);
    assert_eq!(homogeneous(1.0).quasi_bernoulli_log2c(), 0.0);
    // includes the pair (0 -> 1): |log2(0.3 / 0.6)| = 1
    let m = markov_asym();
    let c = m.quasi_bernoulli_log2c();
    assert!(c >= 1.0 - 1e-12, "C = {c} must include the log2(0.6/0.3) = 1 term");
}

#[test]
fn additivity_within_quasi_bernoulli_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let models = [
        bernoulli_02_08(),
        markov_asym(),
        GibbsModel::new(1, BaseMeasure::Bernoulli { weights: vec![0.3, 0.7] }, 2.5, 0.8, 0.4)
            .unwrap(),
    ];
    for model in &models {
        let c = model.quasi_bernoulli_log2c();
        for _ in 0..10_000 {
            let w = random_word(&mut rng, 1, 60);
            let v = random_word(&mut rng, 1, 60);
            let wv = w.concat(&v).unwrap();
            let gap = model.mu_log2(&wv).unwrap()
                - model.mu_log2(&w).unwrap()
                - model.mu_log2(&v).unwrap();
            assert!(
                gap.abs() <= c + 1e-10,
                "additivity gap {gap} exceeds log2 C = {c}"
            );
        }
    }
}

#[test]
fn additivity_exact_for_bernoulli_unit_k() {
    let bern = bernoulli_02_08();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let w = random_word(&mut rng, 1, 100);
        let v = random_word(&mut rng, 1, 100);
        let wv = w.concat(&v).unwrap();
        let gap = bern.mu_log2(&wv).unwrap()
            - bern.mu_log2(&w).unwrap()
            - bern.mu_log2(&v).unwrap();
        assert!(gap.abs() <= 1e-10);
    }
}

#[test]
fn tau_mu_examples() {
    let bern = bernoulli_02_08();
    assert!(bern.tau_mu(1.0).unwrap().abs() < 1e-12); // probability measure
    assert!((bern.tau_mu(0.0).unwrap() + 1.0).abs() < 1e-12); // -d
    assert!((bern.tau_mu(2.0).unwrap() - 0.5563933485243852).abs() < 1e-12);
    let homo = homogeneous(2.0);
    for q in [-3.0, 0.0, 1.7] {
        assert!((homo.tau_mu(q).unwrap() - (2.0 * q - 1.0)).abs() < 1e-12);
    }
}

#[test]
fn tau_mu_prime_examples() {
    let bern = bernoulli_02_08();
    // H_s = (log2 5 + log2 1.25) / 2
    assert!((bern.tau_mu_prime(0.0).unwrap() - 1.3219280948873622).abs() < 1e-12);
    let homo = homogeneous(1.0);
    for q in [-5.0, 0.0, 3.0] {
        assert_eq!(homo.tau_mu_prime(q).unwrap(), 1.0);
    }
    // q -> +inf limit: H_min = -log2 0.8, checked at q = 200
    let h_min = -0.8f64.log2();
    assert!((bern.tau_mu_prime(200.0).unwrap() - h_min).abs() < 1e-6);
}

#[test]
fn tau_concavity_chord_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for model in [bernoulli_02_08(), markov_asym()] {
        for _ in 0..100 {
            let mut qs = [0.0; 3];
            for q in qs.iter_mut() {
                *q = rng.gen_range(-20.0..20.0);
            }
            qs.sort_by(f64::total_cmp);
            let [q1, q2, q3] = qs;
            if q2 - q1 < 1e-3 || q3 - q2 < 1e-3 {
                continue;
            }
            let t1 = model.tau_mu(q1).unwrap();
            let t2 = model.tau_mu(q2).unwrap();
            let t3 = model.tau_mu(q3).unwrap();
            let chord = t1 + (t3 - t1) * (q2 - q1) / (q3 - q1);
            assert!(t2 >= chord - 1e-12, "chord condition failed at {qs:?}");
        }
    }
}

#[test]
fn finite_volume_convergence_bound() {
    for model in [bernoulli_02_08(), markov_asym()] {
        let c = model.quasi_bernoulli_log2c();
        let d = model.dim_f();
        for q in [-3.0, -1.0, 0.5, 1.0, 2.0, 4.0] {
            let exact = model.tau_mu(q).unwrap();
            let mut last_gap = f64::INFINITY;
            for j in [8u32, 12, 16] {
                let gap = (tau_finite_volume(&model, j, q) - exact).abs();
                let bound = (model.k().log2().abs() + c * q.abs() + d) / j as f64;
                assert!(gap <= bound + 1e-12, "j={j} q={q}: gap {gap} > bound {bound}");
                assert!(gap <= last_gap + 1e-9, "gap not non-increasing at j={j} q={q}");
                last_gap = gap;
            }
        }
    }
}

#[test]
fn duality_roundtrip() {
    let bern = bernoulli_02_08();
    let (h_min, _, h_max) = bern.endpoints().unwrap();
    for i in 1..40 {
        let h = h_min + (h_max - h_min) * i as f64 / 40.0;
        let q = bern.solve_slope(h).unwrap();
        assert!((bern.tau_mu_prime(q).unwrap() - h).abs() < 1e-9);
    }
}

#[test]
fn markov_with_identical_rows_matches_bernoulli() {
    let markov = GibbsModel::new(
        1,
        BaseMeasure::Markov {
            init: vec![0.2, 0.8],
            rows: vec![vec![0.2, 0.8], vec![0.2, 0.8]],
        },
        1.0,
        1.0,
        0.0,
    )
    .unwrap();
    let bern = bernoulli_02_08();
    let mut q = -5.0;
    while q <= 5.0 {
        let gap = (markov.tau_mu(q).unwrap() - bern.tau_mu(q).unwrap()).abs();
        assert!(gap < 1e-9, "q={q}: gap {gap}");
        q += 0.25;
    }
}

#[test]
fn endpoints_examples() {
    let bern = bernoulli_02_08();
    let (h_min, h_s, h_max) = bern.endpoints().unwrap();
    assert!((h_min - 0.32192809488736235).abs() < 1e-12);
    assert!((h_s - 1.3219280948873622).abs() < 1e-12);
    assert!((h_max - 2.321928094887362).abs() < 1e-12);

    assert_eq!(homogeneous(2.0).endpoints().unwrap(), (2.0, 2.0, 2.0));

    let uniform =
        GibbsModel::new(1, BaseMeasure::Bernoulli { weights: vec![0.5, 0.5] }, 1.0, 1.0, 0.0)
            .unwrap();
    assert!(uniform.is_homogeneous());
    assert_eq!(uniform.endpoints().unwrap(), (1.0, 1.0, 1.0));
}

#[test]
fn tau_star_examples() {
    let bern = bernoulli_02_08();
    let h_s = bern.tau_mu_prime(0.0).unwrap();
    assert!((bern.tau_star(h_s).unwrap() - 1.0).abs() < 1e-10);

    let homo = homogeneous(1.0);
    assert_eq!(homo.tau_star(1.0).unwrap(), 1.0);
    assert_eq!(homo.tau_star(1.5).unwrap(), f64::NEG_INFINITY);

    // Bernoulli endpoint: D(H_min) = 0 (unique maximal weight)
    let (h_min, _, h_max) = bern.endpoints().unwrap();
    assert!(bern.tau_star(h_min).unwrap().abs() < 1e-9);
    assert_eq!(bern.tau_star(h_min - 0.01).unwrap(), f64::NEG_INFINITY);
    assert_eq!(bern.tau_star(h_max + 0.01).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn markov_spectral_radius_against_enumeration() {
    // independent oracle: tau_{nu,j} converges to -log2 rho; compare at j=16
    let m = markov_asym();
    for q in [-2.0, 0.5, 1.0, 3.0] {
        let exact = m.tau_mu(q).unwrap();
        let fv = tau_finite_volume(&m, 16, q);
        assert!((fv - exact).abs() < 0.2, "q={q}: {fv} vs {exact}");
    }
    // tau_nu(1) = 0 for a stochastic matrix: rho(A_1) = 1
    assert!(m.tau_mu(1.0).unwrap().abs() < 1e-11);
}

#[test]
fn markov_derivative_cross_checked_by_finite_differences() {
    let m = markov_asym();
    for q in [-3.0, -0.5, 0.0, 0.7, 2.0] {
        let analytic = m.tau_mu_prime(q).unwrap();
        let h = 1e-5;
        let d1 = (m.tau_mu(q + h).unwrap() - m.tau_mu(q - h).unwrap()) / (2.0 * h);
        let d2 = (m.tau_mu(q + h / 2.0).unwrap() - m.tau_mu(q - h / 2.0).unwrap()) / h;
        let richardson = (4.0 * d2 - d1) / 3.0;
        assert!(
            (analytic - richardson).abs() < 1e-7,
            "q={q}: analytic {analytic} vs FD {richardson}"
        );
    }
}

#[test]
fn homogeneity_detection() {
    assert!(homogeneous(1.0).is_homogeneous());
    assert!(!bernoulli_02_08().is_homogeneous());
    assert!(!markov_asym().is_homogeneous());
    let uniform_markov = GibbsModel::new(
        1,
        BaseMeasure::Markov {
            init: vec![0.3, 0.7],
            rows: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        },
        1.0,
        1.0,
        0.0,
    )
    .unwrap();
    assert!(uniform_markov.is_homogeneous());
    let near = GibbsModel::new(
        1,
        BaseMeasure::Bernoulli { weights: vec![0.5 - 2e-7, 0.5 + 2e-7] },
        1.0,
        1.0,
        0.0,
    )
    .unwrap();
    assert_eq!(near.homogeneity(), Homogeneity::Near);
}

#[test]
fn rejects_degenerate_parameters() {
    assert!(GibbsModel::new(1, BaseMeasure::Homogeneous, 1.0, 0.0, 0.0).is_err());
    assert!(
        GibbsModel::new(1, BaseMeasure::Bernoulli { weights: vec![0.2, -0.8] }, 1.0, 1.0, 0.0)
            .is_err()
    );
    assert!(
        GibbsModel::new(1, BaseMeasure::Bernoulli { weights: vec![0.2, 0.2] }, 1.0, 1.0, 0.0)
            .is_err()
    );
}

#[test]
fn parser_accepts_and_rejects() {
    let good = "# demo\nkind = bernoulli\nd = 1\nweights = 0.2, 0.8\nK = 1\nalpha = 1\nbeta_bits = 0\n";
    let m = parse_model_file(good).unwrap();
    assert_eq!(m.dimension(), 1);
    assert!((m.tau_mu(2.0).unwrap() - 0.5563933485243852).abs() < 1e-12);

    let markov = "kind = markov\nd = 1\ninit = 0.5, 0.5\nrows = 0.7, 0.3; 0.4, 0.6\n";
    assert!(parse_model_file(markov).is_ok());

    let bad_weight = "kind = bernoulli\nd = 1\nweights = 0.2, -0.8\n";
    match parse_model_file(bad_weight) {
        Err(LabError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected line-numbered parse error, got {other:?}"),
    }

    let bad_row = "kind = markov\nd = 1\ninit = 0.5, 0.5\nrows = 0.7, 0.4; 0.4, 0.6\n";
    match parse_model_file(bad_row) {
        Err(LabError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected line-numbered parse error, got {other:?}"),
    }
}

#[test]
fn fingerprint_is_stable_and_distinguishes() {
    let a = bernoulli_02_08();
    let b = GibbsModel::new(1, BaseMeasure::Bernoulli { weights: vec![0.3, 0.7] }, 1.0, 1.0, 0.0)
        .unwrap();
    assert_eq!(a.fingerprint(), bernoulli_02_08().fingerprint());
    assert_ne!(a.fingerprint(), b.fingerprint());
}
