//! Special periodic fields of the extremal form and the sharp boundary
//! bound they produce.
//!
//! A special potential is a superposition of four plane waves along the
//! diagonal directions `d_0 = (1,1,1)`, `d_1 = (−1,1,1)`, `d_2 = (1,−1,1)`,
//! `d_3 = (1,1,−1)`:
//!
//! ```text
//! u(x) = Σ_m d_m v_m(d_m · x)
//! ```
//!
//! with 2-periodic profiles `v_m`. Its gradient is `Σ_m v_m′ d_m ⊗ d_m`, and
//! the flux `J = M_Q ∇u` has divergence-free rows.

mod domain;
mod periodic;

pub use domain::{
    boundary_functional, gauss_legendre, interior_energy, sharp_bound_check, AffinePotential, Cutoff,
    Perturbation, PerturbationBase, SharpBoundReport, Subdomain, SurfaceNode, VolumeNode,
};
pub use periodic::{cell_average_q, CellAverage, PeriodicField};

use crate::error::{Error, Result};
use crate::forms::{MatrixVar, QuadraticForm};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The four plane-wave directions of a special potential.
pub const DIRECTIONS: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]];

pub fn direction(m: usize) -> Vector3<f64> {
    Vector3::from(DIRECTIONS[m])
}

/// A map `x ↦ u(x) ∈ R³` with an analytic gradient `∂u_i/∂x_j`.
pub trait VectorPotential: Sync {
    fn value(&self, x: &Vector3<f64>) -> Vector3<f64>;
    fn gradient(&self, x: &Vector3<f64>) -> Matrix3<f64>;
}

/// `v(t) = Σ_{l=1..L} cos_l cos(πlt) + sin_l sin(πlt)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarProfile {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl ScalarProfile {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if cos.iter().chain(sin.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("profile coefficients must be finite".into()));
        }
        Ok(Self { cos, sin })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `sin(πt)`.
    pub fn sine() -> Self {
        Self {
            cos: vec![],
            sin: vec![1.0],
        }
    }

    /// Random coefficients `N(0,1)/l²` for `l = 1..=modes`.
    pub fn random<R: Rng>(modes: usize, rng: &mut R) -> Self {
        let mut draw = |l: usize| rng.sample::<f64, _>(StandardNormal) / (l * l) as f64;
        let mut cos = Vec::with_capacity(modes);
        let mut sin = Vec::with_capacity(modes);
        for l in 1..=modes {
            cos.push(draw(l));
            sin.push(draw(l));
        }
        Self { cos, sin }
    }

    pub fn modes(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    fn coeff(&self, l: usize) -> (f64, f64) {
        (
            self.cos.get(l - 1).copied().unwrap_or(0.0),
            self.sin.get(l - 1).copied().unwrap_or(0.0),
        )
    }

    pub fn value(&self, t: f64) -> f64 {
        (1..=self.modes())
            .map(|l| {
                let (c, s) = self.coeff(l);
                let (sn, cs) = (PI * l as f64 * t).sin_cos();
                c * cs + s * sn
            })
            .sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (1..=self.modes())
            .map(|l| {
                let (c, s) = self.coeff(l);
                let w = PI * l as f64;
                let (sn, cs) = (w * t).sin_cos();
                w * (s * cs - c * sn)
            })
            .sum()
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        (1..=self.modes())
            .map(|l| {
                let (c, s) = self.coeff(l);
                let w = PI * l as f64;
                let (sn, cs) = (w * t).sin_cos();
                -w * w * (c * cs + s * sn)
            })
            .sum()
    }
}

/// `u(x) = Σ_m d_m v_m(d_m · x)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecialPotential {
    pub v0: ScalarProfile,
    pub v1: ScalarProfile,
    pub v2: ScalarProfile,
    pub v3: ScalarProfile,
}

impl SpecialPotential {
    pub fn new(profiles: [ScalarProfile; 4]) -> Self {
        let [v0, v1, v2, v3] = profiles;
        Self { v0, v1, v2, v3 }
    }

    /// `v0 = sin(πt)`, the other profiles zero.
    pub fn sine() -> Self {
        Self {
            v0: ScalarProfile::sine(),
            ..Self::default()
        }
    }

    pub fn random<R: Rng>(modes: usize, rng: &mut R) -> Self {
        Self::new(std::array::from_fn(|_| ScalarProfile::random(modes, rng)))
    }

    pub fn profiles(&self) -> [&ScalarProfile; 4] {
        [&self.v0, &self.v1, &self.v2, &self.v3]
    }

    pub fn modes(&self) -> usize {
        self.profiles().iter().map(|p| p.modes()).max().unwrap_or(0)
    }

    /// `v_m′(d_m · x)` for the four profiles.
    pub fn derivatives(&self, x: &Vector3<f64>) -> [f64; 4] {
        let p = self.profiles();
        std::array::from_fn(|m| p[m].derivative(direction(m).dot(x)))
    }
}

impl VectorPotential for SpecialPotential {
    fn value(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.profiles()
            .iter()
            .enumerate()
            .fold(Vector3::zeros(), |acc, (m, p)| acc + direction(m) * p.value(direction(m).dot(x)))
    }

    fn gradient(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        special_gradient(self, x)
    }
}

/// `E = ∇u = Σ_m v_m′ d_m ⊗ d_m`.
pub fn special_gradient(sp: &SpecialPotential, x: &Vector3<f64>) -> Matrix3<f64> {
    let dv = sp.derivatives(x);
    (0..4).fold(Matrix3::zeros(), |acc, m| acc + direction(m) * direction(m).transpose() * dv[m])
}

/// Flux of the extremal form, `J = M_Q E`, as a 3x3 matrix.
pub fn flux_q(e: &Matrix3<f64>) -> Matrix3<f64> {
    QuadraticForm::extremal_q().flux(&MatrixVar::from_matrix(e)).to_matrix()
}

/// `Q(E)` for a 3x3 matrix.
pub fn q_value(e: &Matrix3<f64>) -> f64 {
    QuadraticForm::extremal_q().evaluate(&MatrixVar::from_matrix(e))
}

/// Closed form of `J` in terms of the four profile derivatives.
pub fn special_flux(sp: &SpecialPotential, x: &Vector3<f64>) -> Matrix3<f64> {
    let [a, b, c, d] = sp.derivatives(x);
    let diag = -(a + b + c + d);
    Matrix3::new(
        diag,
        a - b - c + d,
        0.0,
        0.0,
        diag,
        a + b - c - d,
        a - b + c - d,
        0.0,
        diag,
    )
}

/// Row divergences of a matrix field by central differences with step `h`.
pub fn central_divergence<F: Fn(&Vector3<f64>) -> Matrix3<f64>>(field: F, x: &Vector3<f64>, h: f64) -> Vector3<f64> {
    let mut div = Vector3::zeros();
    for j in 0..3 {
        let e = Vector3::ith(j, h);
        let diff = (field(&(x + e)) - field(&(x - e))) / (2.0 * h);
        div += diff.column(j);
    }
    div
}

/// Central-difference divergence of each row of `J`.
pub fn divergence_rows(sp: &SpecialPotential, x: &Vector3<f64>, h: f64) -> Result<Vector3<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    Ok(central_divergence(|p| special_flux(sp, p), x, h))
}

/// Pointwise `Q(E)` for a special potential, from the profile derivatives:
/// `4 Σ v_m′² − 4 (Σ v_m′)²`. It vanishes when at most one profile is
/// active at `x`, but not in general; only its cell average is zero.
pub fn special_energy_density(sp: &SpecialPotential, x: &Vector3<f64>) -> f64 {
    let dv = sp.derivatives(x);
    let sum: f64 = dv.iter().sum();
    4.0 * dv.iter().map(|v| v * v).sum::<f64>() - 4.0 * sum * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_point(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn profile_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ScalarProfile::random(6, &mut rng);
        for _ in 0..50 {
            let t: f64 = rng.gen_range(-3.0..3.0);
            let h = 1e-5;
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            assert!((fd - p.derivative(t)).abs() < 1e-7);
            let fd2 = (p.derivative(t + h) - p.derivative(t - h)) / (2.0 * h);
            assert!((fd2 - p.second_derivative(t)).abs() < 1e-5);
            assert!((p.value(t + 2.0) - p.value(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_example() {
        let sp = SpecialPotential::sine();
        let x = Vector3::zeros();
        let e = special_gradient(&sp, &x);
        assert!((e - Matrix3::repeat(PI)).amax() < 1e-15);
        let expected = Matrix3::new(-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0) * PI;
        assert!((special_flux(&sp, &x) - expected).amax() < 1e-15);
        assert!(q_value(&e).abs() < 1e-12);
        let zero = SpecialPotential::default();
        assert_eq!(special_gradient(&zero, &x), Matrix3::zeros());
        assert_eq!(special_flux(&zero, &x), Matrix3::zeros());
    }

    #[test]
    fn gradient_matches_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sp = SpecialPotential::random(4, &mut rng);
        for _ in 0..20 {
            let x = rand_point(&mut rng);
            let fd = finite_difference_gradient(&sp, &x);
            assert!((fd - special_gradient(&sp, &x)).amax() < 1e-6);
        }
    }

    fn finite_difference_gradient(sp: &SpecialPotential, x: &Vector3<f64>) -> Matrix3<f64> {
        let h = 1e-5;
        Matrix3::from_fn(|i, j| {
            let e = Vector3::ith(j, h);
            (sp.value(&(x + e))[i] - sp.value(&(x - e))[i]) / (2.0 * h)
        })
    }

    #[test]
    fn flux_closed_form_and_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = SpecialPotential::random(8, &mut rng);
        for _ in 0..1000 {
            let x = rand_point(&mut rng);
            let e = special_gradient(&sp, &x);
            assert!((special_flux(&sp, &x) - flux_q(&e)).amax() <= 1e-12 * (1.0 + e.amax()));
            let q = q_value(&e);
            let expected = special_energy_density(&sp, &x);
            assert!((q - expected).abs() <= 1e-10 * (1.0 + e.norm_squared()));
        }
    }

    #[test]
    fn single_profile_is_pointwise_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in 0..4 {
            let mut profiles: [ScalarProfile; 4] = Default::default();
            profiles[m] = ScalarProfile::random(8, &mut rng);
            let sp = SpecialPotential::new(profiles);
            for _ in 0..200 {
                let e = special_gradient(&sp, &rand_point(&mut rng));
                assert!(q_value(&e).abs() <= 1e-12 * (1.0 + e.norm_squared()));
            }
        }
    }

    #[test]
    fn two_profiles_are_not_pointwise_null() {
        let sp = SpecialPotential::new([ScalarProfile::sine(), ScalarProfile::sine(), ScalarProfile::zero(), ScalarProfile::zero()]);
        let x = Vector3::zeros();
        // v0′ = v1′ = π: 4·2π² − 4·4π²
        assert!((q_value(&special_gradient(&sp, &x)) + 8.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_second_order_on_generic_fields() {
        // J of a non-special field: the same stencil converges at order 2
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = PeriodicField::random(2, &mut rng);
        let x = rand_point(&mut rng);
        let j = |p: &Vector3<f64>| flux_q(&u.gradient(p));
        let exact = u.flux_divergence(&x);
        let err = |h: f64| (central_divergence(j, &x, h) - exact).amax();
        let (e1, e2) = (err(1e-2), err(5e-3));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn special_divergence_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sp = SpecialPotential::random(8, &mut rng);
        for _ in 0..100 {
            let x = rand_point(&mut rng);
            assert!(divergence_rows(&sp, &x, 1e-3).unwrap().amax() < 1e-9);
        }
        assert_eq!(divergence_rows(&SpecialPotential::default(), &Vector3::zeros(), 1e-3).unwrap(), Vector3::zeros());
        assert!(divergence_rows(&sp, &Vector3::zeros(), 0.0).is_err());
    }
}
