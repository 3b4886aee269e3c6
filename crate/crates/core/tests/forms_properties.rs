use nalgebra::Vector3;
use proptest::prelude::*;
use qforms::forms::{CubicParams, CyclicParams, MatrixVar, NullLagrangianCoeffs, QuadraticForm, Vec9};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 1e-3 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

fn constructed(rng: &mut ChaCha8Rng) -> Vec<QuadraticForm> {
    let mut r = || rng.gen_range(-2.0..2.0);
    vec![
        QuadraticForm::extremal_q(),
        QuadraticForm::from_cubic(CubicParams::new(r(), r(), r())),
        QuadraticForm::from_cyclic(CyclicParams::new(r(), r(), r(), r())),
        QuadraticForm::corollary_q(r().abs(), r().abs(), r().abs()),
        QuadraticForm::from_rows(&std::array::from_fn(|_| std::array::from_fn(|_| r()))),
    ]
}

#[test]
fn rank_one_values_round_trip_through_the_acoustic_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for f in constructed(&mut rng) {
        let t = f.acoustic_matrix();
        let tol = 1e-12 * (1.0 + f.max_abs());
        for _ in 0..2_000 {
            let (x, y) = (unit(&mut rng), unit(&mut rng));
            let direct = f.evaluate_rank_one(&x, &y);
            assert!((direct - x.dot(&(t.at(&y) * x))).abs() <= tol);
            assert!((direct - f.to_biquadratic().evaluate(&x, &y)).abs() <= tol);
        }
    }
}

#[test]
fn null_lagrangians_vanish_on_rank_one_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let alpha = NullLagrangianCoeffs(std::array::from_fn(|_| rng.gen_range(-3.0..3.0)));
        let f = QuadraticForm::null_lagrangian(&alpha);
        for _ in 0..10_000 {
            let (x, y) = (unit(&mut rng) * rng.gen_range(0.1..3.0), unit(&mut rng) * rng.gen_range(0.1..3.0));
            let xi = MatrixVar::outer(&x, &y);
            let scale = alpha.max_abs() * xi.0.norm_squared();
            assert!(f.evaluate(&xi).abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}

#[test]
fn cubic_family_is_cyclic_with_equal_off_diagonal_weights() {
    // ξ_iiξ_jj and ξ_ijξ_ji agree on rank-one matrices
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let (a, b, g) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let cubic = QuadraticForm::from_cubic(CubicParams::new(a, b, g)).to_biquadratic();
        let cyclic = QuadraticForm::from_cyclic(CyclicParams::new(a, 2.0 * (b + g), g, g)).to_biquadratic();
        assert!(cubic.max_diff(&cyclic) <= 1e-12 * cubic.max_abs().max(1.0));
    }
}

fn coeffs() -> impl Strategy<Value = [f64; 9]> {
    proptest::array::uniform9(-3.0f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quotient_by_null_lagrangians_keeps_the_biquadratic(rows in proptest::array::uniform9(coeffs()), alpha in coeffs()) {
        let f = QuadraticForm::from_rows(&rows);
        let g = f + QuadraticForm::null_lagrangian(&NullLagrangianCoeffs(alpha));
        let (bf, bg) = (f.to_biquadratic(), g.to_biquadratic());
        prop_assert!(bf.max_diff(&bg) <= 1e-12 * bf.max_abs().max(1.0));
    }

    #[test]
    fn flux_pairs_back_to_the_value(rows in proptest::array::uniform9(coeffs()), xi in coeffs()) {
        let f = QuadraticForm::from_rows(&rows);
        let xi = MatrixVar(Vec9::from_column_slice(&xi));
        let value = f.evaluate(&xi);
        prop_assert!((f.flux(&xi).dot(&xi) - value).abs() <= 1e-12 * (1.0 + value.abs()));
    }

    #[test]
    fn projection_recovers_null_lagrangians(alpha in coeffs()) {
        let alpha = NullLagrangianCoeffs(alpha);
        let (back, residual) = QuadraticForm::null_lagrangian(&alpha).project_onto_minors();
        prop_assert!(residual <= 1e-12);
        for v in 0..9 {
            prop_assert!((back.0[v] - alpha.0[v]).abs() <= 1e-12);
        }
    }

    #[test]
    fn canonical_lift_has_the_same_rank_one_values(rows in proptest::array::uniform9(coeffs())) {
        let f = QuadraticForm::from_rows(&rows);
        let lifted = f.to_biquadratic().canonical_lift();
        prop_assert!(lifted.to_biquadratic().max_diff(&f.to_biquadratic()) <= 1e-12 * f.max_abs().max(1.0));
    }
}
