use nalgebra::Vector3;
use qforms::fields::{
    central_divergence, cell_average_q, flux_q, q_value, sharp_bound_check, special_energy_density, special_flux,
    special_gradient, Perturbation, PeriodicField, ScalarProfile, SpecialPotential, Subdomain, VectorPotential,
};
use qforms::forms::{Mat9, QuadraticForm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn spectral_and_quadrature_averages_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..100 {
        let max_k = rng.gen_range(1..=2);
        let u = PeriodicField::random(max_k, &mut rng);
        let f = QuadraticForm::new(Mat9::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
        let spectral = u.spectral_average(&f);
        let quadrature = u.quadrature_average(&f, 2 * max_k + 4).unwrap();
        let scale = u.gradient_energy() * f.max_abs();
        assert!((spectral - quadrature).abs() <= 1e-12 * scale.max(1.0), "{spectral} vs {quadrature}");
    }
    let u = PeriodicField::random(2, &mut rng);
    assert!(u.quadrature_average(&QuadraticForm::frobenius(), 5).is_err());
}

#[test]
fn special_potentials_are_null_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..20 {
        let sp = SpecialPotential::random(3, &mut rng);
        let u = PeriodicField::from_special(&sp);
        assert!(u.is_special(1e-12));
        let avg = cell_average_q(&u, &QuadraticForm::extremal_q()).unwrap();
        assert!(avg.spectral.abs() <= 1e-12 * avg.energy_scale.max(1.0));
        assert!(avg.quadrature.abs() <= 1e-12 * avg.energy_scale.max(1.0));
        for _ in 0..10 {
            let x = random_point(&mut rng);
            let e = u.gradient(&x);
            assert!((e - special_gradient(&sp, &x)).amax() < 1e-10);
        }
    }
}

#[test]
fn closed_form_flux_matches_and_is_divergence_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..20 {
        let sp = SpecialPotential::random(3, &mut rng);
        let u = PeriodicField::from_special(&sp);
        for _ in 0..10 {
            let x = random_point(&mut rng);
            let e = special_gradient(&sp, &x);
            assert!((flux_q(&e) - special_flux(&sp, &x)).amax() < 1e-10);
            assert!(u.flux_divergence(&x).amax() < 1e-9);
            let fd = central_divergence(|p| special_flux(&sp, p), &x, 1e-3);
            assert!(fd.amax() < 1e-9, "{fd}");
        }
    }
}

#[test]
fn single_profile_is_pointwise_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(54);
    for m in 0..4 {
        let mut profiles: [ScalarProfile; 4] = std::array::from_fn(|_| ScalarProfile::zero());
        profiles[m] = ScalarProfile::random(4, &mut rng);
        let sp = SpecialPotential::new(profiles);
        for _ in 0..50 {
            let x = random_point(&mut rng);
            let e = special_gradient(&sp, &x);
            assert!(q_value(&e).abs() < 1e-10);
            assert!(special_energy_density(&sp, &x).abs() < 1e-10);
        }
    }
}

#[test]
fn perturbed_energy_splits_without_cross_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let sp = SpecialPotential::random(2, &mut rng);
    for domain in [
        Subdomain::cube([0.1, -0.2, 0.0], 0.4).unwrap(),
        Subdomain::ball([0.0, 0.3, -0.1], 0.45).unwrap(),
    ] {
        for _ in 0..5 {
            let w = Perturbation::random(domain.clone(), 0.2, &mut rng);
            let r = sharp_bound_check(&domain, &sp, &w, 16).unwrap();
            let scale = r.interior_perturbed.abs().max(1.0);
            assert!(r.cross_term.abs() <= 1e-8 * scale, "{r:?}");
            assert!(r.decomposition_residual <= 1e-8 * scale, "{r:?}");
            assert!(r.gap >= -1e-8 * scale, "{r:?}");
            assert!(r.boundary_max_w <= 1e-10);
        }
    }
}
