use bilinear_dyson::{
    apriori_bound, expm, operator_norm, picard_solution, propagate_dyson, propagate_oracle,
    semigroup_bounds, tail_bound, w_terms, DMatrix, DVector, DysonConfig, LinearOperator,
    PiecewiseConstantControl,
};
use proptest::prelude::*;

fn matrix(n: usize, range: f64) -> impl Strategy<Value = LinearOperator<f64>> {
    prop::collection::vec(-range..range, n * n)
        .prop_map(move |v| LinearOperator::new(DMatrix::from_row_slice(n, n, &v)).unwrap())
}

fn control(horizon: f64) -> impl Strategy<Value = PiecewiseConstantControl> {
    prop::collection::vec(-1.5..1.5f64, 1..5)
        .prop_map(move |v| PiecewiseConstantControl::uniform(horizon, v).unwrap())
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expm_norm_respects_semigroup_bound(a in matrix(3, 3.0)) {
        let bounds = semigroup_bounds(&a);
        for i in 0..100 {
            let t = 5.0 * i as f64 / 99.0;
            let norm = operator_norm(&expm(&a, t).unwrap());
            prop_assert!(norm <= bounds.growth(t) * (1.0 + 1e-8), "t = {t}: {norm} > {}", bounds.growth(t));
        }
    }

    #[test]
    fn expm_semigroup_law(a in matrix(3, 2.0), s in 0.0..3.0f64, t in 0.0..3.0f64) {
        let whole = expm(&a, s + t).unwrap();
        let split = expm(&a, s).unwrap().compose(&expm(&a, t).unwrap());
        let diff = max_abs(&(whole.matrix() - split.matrix()));
        prop_assert!(diff <= 1e-10 * max_abs(whole.matrix()), "diff {diff}");
    }

    #[test]
    fn cocycle_within_combined_certificates(
        a in matrix(3, 1.0),
        b in matrix(3, 1.0),
        u in control(2.0),
        split in 0.2..1.8f64,
    ) {
        let cfg = DysonConfig::default();
        let psi0 = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let full = propagate_dyson(&a, &b, &psi0, &u, 2.0, 1e-10, &cfg).unwrap();
        let head = propagate_dyson(&a, &b, &psi0, &u, split, 1e-10, &cfg).unwrap();
        let tail_u = u.shifted(split).unwrap();
        let rest = 2.0 - split;
        let tail = propagate_dyson(&a, &b, &head.state, &tail_u, rest, 1e-10, &cfg).unwrap();

        // Errors in the intermediate state are amplified by at most the flow's Lipschitz constant.
        let lipschitz = apriori_bound(rest, tail_u.l1_norm_until(rest), 1.0, &semigroup_bounds(&a), operator_norm(&b));
        let slack = |bound: f64, quad: f64| bound + 10.0 * quad;
        let tol = slack(full.series_error_bound, full.quadrature_error_estimate)
            + lipschitz * slack(head.series_error_bound, head.quadrature_error_estimate)
            + slack(tail.series_error_bound, tail.quadrature_error_estimate)
            + 1e-12;
        let gap = (&full.state - &tail.state).norm();
        prop_assert!(gap <= tol, "gap {gap:e} > {tol:e}");
    }

    #[test]
    fn consecutive_partial_sums_differ_by_at_most_the_tail(
        a in matrix(4, 1.0),
        b in matrix(4, 1.0),
        u in control(1.5),
    ) {
        let cfg = DysonConfig::default();
        let psi0 = DVector::from_vec(vec![0.5, 1.0, -1.0, 0.0]);
        let t = 1.5;
        let w = w_terms(&a, &b, &psi0, &u, t, 10, &cfg).unwrap();
        let bounds = semigroup_bounds(&a);
        let b_norm = operator_norm(&b);
        for (n, wn) in w.iter().enumerate() {
            let bound = tail_bound(n, t, u.l1_norm_until(t), &bounds, b_norm) * psi0.norm();
            prop_assert!(wn.norm() <= bound * (1.0 + 1e-6) + 1e-12, "order {n}");
        }
    }

    #[test]
    fn picard_tracks_dyson_partial_sums(
        a in matrix(3, 1.0),
        b in matrix(3, 1.0),
        u in control(1.0),
    ) {
        let cfg = DysonConfig::default();
        let psi0 = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let w = w_terms(&a, &b, &psi0, &u, 1.0, 5, &cfg).unwrap();
        for k in 1..=5 {
            let partial = w[..=k].iter().fold(DVector::zeros(3), |acc, v| acc + v);
            let coarse = picard_solution(&a, &b, &psi0, &u, 1.0, k, 80).unwrap();
            let fine = picard_solution(&a, &b, &psi0, &u, 1.0, k, 160).unwrap();
            let delta = (&coarse - &fine).norm();
            prop_assert!((&coarse - &partial).norm() <= 5.0 * delta + 1e-12, "k = {k}");
        }
    }
}

#[test]
fn oracle_converges_at_fourth_order() {
    let a = LinearOperator::new(DMatrix::from_row_slice(
        3,
        3,
        &[
            -0.2, 1.5, 0.0, //
            -1.5, 0.1, 0.7, //
            0.3, -0.4, -0.5,
        ],
    ))
    .unwrap();
    let b = LinearOperator::new(DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0, 0.8, -0.6, //
            0.5, 0.2, 0.0, //
            -0.9, 0.0, 0.4,
        ],
    ))
    .unwrap();
    let psi0 = DVector::from_vec(vec![1.0, 0.5, -0.25]);
    let u = PiecewiseConstantControl::new(vec![0.0, 0.7, 1.6, 2.5], vec![1.2, -0.8, 0.5]).unwrap();

    let steps = [4usize, 8, 16, 32, 64];
    let states: Vec<_> = steps
        .iter()
        .map(|&s| propagate_oracle(&a, &b, &psi0, &u, 2.5, s).unwrap())
        .collect();
    let deltas: Vec<f64> = states.windows(2).map(|w| (&w[0] - &w[1]).norm()).collect();

    // Least-squares slope of log(delta) against log(steps) over four refinements.
    let xs: Vec<f64> = steps[..4].iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = -xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(
        (3.5..=4.5).contains(&slope),
        "slope {slope}, deltas {deltas:?}"
    );
}

#[test]
fn dyson_certificate_on_a_stiff_rotation() {
    // ω > 0 and a sizeable coupling: the certificate must still cover the oracle gap.
    let a = LinearOperator::new(DMatrix::from_row_slice(2, 2, &[0.3, -4.0, 4.0, 0.3])).unwrap();
    let b = LinearOperator::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
    let psi0 = DVector::from_vec(vec![1.0, 1.0]);
    let u = PiecewiseConstantControl::new(vec![0.0, 0.5, 1.0, 2.0], vec![2.0, -1.0, 0.5]).unwrap();
    let r = propagate_dyson(&a, &b, &psi0, &u, 2.0, 1e-8, &DysonConfig::default()).unwrap();
    let oracle = propagate_oracle(&a, &b, &psi0, &u, 2.0, 4000).unwrap();
    let gap = (&r.state - &oracle).norm();
    assert!(
        gap <= r.series_error_bound + 10.0 * r.quadrature_error_estimate,
        "gap {gap:e}"
    );
    assert!(r.series_error_bound <= 0.5e-8);
}
