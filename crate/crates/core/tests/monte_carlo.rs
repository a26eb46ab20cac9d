use safety_evidence::indicator::{
    chi_square_independence, mean_pairwise_correlation, IndicatorMatrix,
};
use safety_evidence::kofn::{empirical_k_of_n, theoretical_k_of_n};
use safety_evidence::redundancy::{
    pair_failure_probability, triple_failure_probability_approx, PairJointTable,
};
use safety_evidence::simulator::{sample_ensemble, sample_pair, CommonShockSpec};

fn rate(m: &IndicatorMatrix, pred: impl Fn(&[u8]) -> bool) -> f64 {
    m.rows().filter(|r| pred(r)).count() as f64 / m.n_samples() as f64
}

fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn independent_pair_joint_rate() {
    let n = 1_000_000;
    let m = sample_pair(1e-2, 1e-2, 0.0, n, 17).unwrap();
    let joint = rate(&m, |r| r == [1, 1]);
    assert!(
        (joint - 1e-4).abs() <= 3.0 * (1e-4f64 / n as f64).sqrt(),
        "{joint}"
    );
}

#[test]
fn correlated_pair_matches_exact_joint_probability() {
    let n = 10_000_000;
    let m = sample_pair(1e-2, 1e-2, 0.01, n, 23).unwrap();
    let exact = pair_failure_probability(1e-2, 1e-2, 0.01).unwrap();
    assert!((exact - 1.99e-4).abs() < 1e-8);
    let joint = rate(&m, |r| r == [1, 1]);
    assert!(
        (joint - exact).abs() <= 3.0 * binomial_sigma(exact, n),
        "{joint} vs {exact}"
    );
    for col in 0..2 {
        let mean = m.column(col).filter(|&v| v == 1).count() as f64 / n as f64;
        assert!(
            (mean - 1e-2).abs() <= 3.0 * binomial_sigma(1e-2, n),
            "column {col}: {mean}"
        );
    }
}

#[test]
fn unequal_marginals_with_negative_correlation() {
    let n = 2_000_000;
    let (p1, p2, rho) = (0.2, 0.05, -0.05);
    let table = PairJointTable::new(p1, p2, rho).unwrap();
    let m = sample_pair(p1, p2, rho, n, 5).unwrap();
    let cells = [[1, 1], [1, 0], [0, 1], [0, 0]];
    for (cell, &p) in cells.iter().zip(&table.cells()) {
        let got = rate(&m, |r| r == cell);
        assert!(
            (got - p).abs() <= 4.0 * binomial_sigma(p, n),
            "{cell:?}: {got} vs {p}"
        );
    }
}

#[test]
fn uncorrelated_ensemble_passes_independence_test_at_nominal_rate() {
    let spec = CommonShockSpec::new(0.2, 0.0, 2).unwrap();
    let passes = (0..100u64)
        .filter(|&rep| {
            let m = sample_ensemble(&spec, 2000, 1000 + rep).unwrap();
            !chi_square_independence(&m, 0, 1, 0.05)
                .unwrap()
                .reject_independence
        })
        .count();
    assert!(passes >= 94, "{passes} of 100");
}

#[test]
fn independent_ensemble_matches_k_of_n_formula() {
    let n = 1_000_000;
    let spec = CommonShockSpec::new(0.0755, 0.0, 5).unwrap();
    let m = sample_ensemble(&spec, n, 31).unwrap();
    for k in 1..=5 {
        let theory = theoretical_k_of_n(0.0755, 5, k as u32).unwrap();
        let got = empirical_k_of_n(&m, k).unwrap();
        let sigma = binomial_sigma(theory, n).max(1.0 / n as f64);
        assert!(
            (got - theory).abs() <= 4.0 * sigma,
            "k={k}: {got} vs {theory}"
        );
    }
}

#[test]
fn ensemble_reproduces_requested_correlation() {
    let (p, rho, members) = (0.1, 0.3, 4);
    let spec = CommonShockSpec::new(p, rho, members).unwrap();
    assert!((spec.implied_correlation() - rho).abs() < 1e-10);
    let n = 200_000;
    let m = sample_ensemble(&spec, n, 8).unwrap();
    let overall = mean_pairwise_correlation(&m).unwrap();
    // standard error from 20 batch means
    let batches = 20;
    let size = n / batches;
    let estimates: Vec<f64> = (0..batches)
        .map(|b| {
            let rows: Vec<usize> = (b * size..(b + 1) * size).collect();
            mean_pairwise_correlation(&m.select_rows(&rows).unwrap()).unwrap()
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / batches as f64;
    let sd =
        (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (batches - 1) as f64).sqrt();
    let se = sd / (batches as f64).sqrt();
    assert!(
        (overall - rho).abs() <= 3.0 * se,
        "{overall} vs {rho} (se {se})"
    );
}

/// `ρ(1_{F₁∩F₂}, 1_{F₃})` of the common-shock model.
fn pair_to_third_correlation(spec: &CommonShockSpec) -> (f64, f64) {
    let p = spec.p;
    let p12 = spec.joint_failure_probability(2);
    let p123 = spec.joint_failure_probability(3);
    let r3 = (p123 - p12 * p) / (p12 * (1.0 - p12) * p * (1.0 - p)).sqrt();
    (r3, p123)
}

#[test]
fn triple_failures_bracket_leading_order() {
    let n = 20_000_000;
    for (i, &p) in [1e-3, 5e-4].iter().enumerate() {
        for (j, &rho) in [0.01, 0.04].iter().enumerate() {
            let spec = CommonShockSpec::new(p, rho, 3).unwrap();
            let (r3, exact) = pair_to_third_correlation(&spec);
            let approx = triple_failure_probability_approx(p, rho, r3);
            assert!(
                (exact - approx.leading).abs() <= approx.error_bound,
                "closed form p={p} rho={rho}"
            );
            let m = sample_ensemble(&spec, n, (10 * i + j) as u64).unwrap();
            let got = rate(&m, |r| r == [1, 1, 1]);
            let slack = approx.error_bound + 4.0 * binomial_sigma(exact, n);
            assert!(
                (got - approx.leading).abs() <= slack,
                "p={p} rho={rho}: {got} vs {}",
                approx.leading
            );
        }
    }
}

#[test]
fn seeds_fix_the_output() {
    let spec = CommonShockSpec::new(0.05, 0.2, 5).unwrap();
    assert_eq!(
        sample_ensemble(&spec, 70_000, 3).unwrap(),
        sample_ensemble(&spec, 70_000, 3).unwrap()
    );
    assert_eq!(
        sample_pair(0.1, 0.2, 0.3, 70_000, 3).unwrap(),
        sample_pair(0.1, 0.2, 0.3, 70_000, 3).unwrap()
    );
}
