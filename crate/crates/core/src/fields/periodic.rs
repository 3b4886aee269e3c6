//! Real trigonometric vector fields on the cell `[−1, 1]³`.

use super::{direction, SpecialPotential, VectorPotential};
use crate::error::{Error, Result};
use crate::forms::{MatrixVar, QuadraticForm, Vec9, VARS};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

type Amp = [Complex64; 3];

/// `u(x) = Σ_k û(k) e^{iπ k·x}` with `û(−k) = conj(û(k))`, so `u` is real.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeriodicField {
    modes: BTreeMap<[i32; 3], Amp>,
    max_k: usize,
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Default)]
pub(super) struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub(super) fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub(super) fn total(&self) -> f64 {
        self.s + self.c
    }
}

/// Cell averages of a quadratic form of the gradient from both backends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAverage {
    /// Parseval sum over the Fourier modes.
    pub spectral: f64,
    /// Periodic trapezoid rule on an `N³` grid.
    pub quadrature: f64,
    pub grid: usize,
    /// `⟨|∇u|²⟩` times the largest coefficient of the form; the denominator
    /// for relative comparisons.
    pub energy_scale: f64,
    pub relative_gap: f64,
}

fn norm_amp(a: &Amp) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl PeriodicField {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Largest `|k|∞` present.
    pub fn max_k(&self) -> usize {
        self.max_k
    }

    pub fn modes(&self) -> impl Iterator<Item = (&[i32; 3], &Amp)> {
        self.modes.iter()
    }

    /// Adds `û` at `k` and its conjugate at `−k`.
    pub fn add_mode(&mut self, k: [i32; 3], amp: [Complex64; 3]) {
        if k == [0, 0, 0] {
            let e = self.modes.entry(k).or_insert([Complex64::new(0.0, 0.0); 3]);
            for c in 0..3 {
                e[c] += Complex64::new(amp[c].re, 0.0);
            }
            return;
        }
        let neg = [-k[0], -k[1], -k[2]];
        for (kk, conj) in [(k, false), (neg, true)] {
            let e = self.modes.entry(kk).or_insert([Complex64::new(0.0, 0.0); 3]);
            for c in 0..3 {
                e[c] += if conj { amp[c].conj() } else { amp[c] };
            }
        }
        let kmax = k.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
        self.max_k = self.max_k.max(kmax);
    }

    pub fn single_mode(k: [i32; 3], amp: [Complex64; 3]) -> Self {
        let mut u = Self::zero();
        u.add_mode(k, amp);
        u
    }

    fn half_space(k: &[i32; 3]) -> bool {
        k[0] > 0 || (k[0] == 0 && (k[1] > 0 || (k[1] == 0 && k[2] > 0)))
    }

    /// Every mode with `0 < |k|∞ ≤ max_k`, amplitudes `N(0,1)/(1 + |k|²)`
    /// per real and imaginary part.
    pub fn random<R: Rng>(max_k: usize, rng: &mut R) -> Self {
        let l = max_k as i32;
        let mut u = Self::zero();
        for k1 in -l..=l {
            for k2 in -l..=l {
                for k3 in -l..=l {
                    let k = [k1, k2, k3];
                    if !Self::half_space(&k) {
                        continue;
                    }
                    let damp = 1.0 / (1 + k1 * k1 + k2 * k2 + k3 * k3) as f64;
                    let amp = std::array::from_fn(|_| {
                        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * damp
                    });
                    u.add_mode(k, amp);
                }
            }
        }
        u
    }

    /// `count` random modes with `0 < |k|∞ ≤ max_k` and amplitudes
    /// `N(0, scale²)`.
    pub fn random_sparse<R: Rng>(max_k: usize, count: usize, scale: f64, rng: &mut R) -> Self {
        let l = max_k as i32;
        let mut u = Self::zero();
        let mut added = 0;
        while added < count && l > 0 {
            let k = [rng.gen_range(-l..=l), rng.gen_range(-l..=l), rng.gen_range(-l..=l)];
            if !Self::half_space(&k) {
                continue;
            }
            let amp = std::array::from_fn(|_| {
                Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * scale
            });
            u.add_mode(k, amp);
            added += 1;
        }
        u
    }

    /// The Fourier representation of a special potential: mode `l` of `v_m`
    /// sits at `k = ±l d_m` with amplitude along `d_m`.
    pub fn from_special(sp: &SpecialPotential) -> Self {
        let mut u = Self::zero();
        for (m, p) in sp.profiles().iter().enumerate() {
            let d = direction(m);
            for l in 1..=p.modes() {
                let c = p.cos.get(l - 1).copied().unwrap_or(0.0);
                let s = p.sin.get(l - 1).copied().unwrap_or(0.0);
                let z = Complex64::new(c, -s) * 0.5;
                let li = l as i32;
                let k = [li * d[0] as i32, li * d[1] as i32, li * d[2] as i32];
                u.add_mode(k, std::array::from_fn(|i| z * d[i]));
            }
        }
        u
    }

    /// `e^{iπ k x_j}` for `k = −L..=L` along each axis.
    fn phases(&self, x: &Vector3<f64>) -> [Vec<Complex64>; 3] {
        let l = self.max_k as i32;
        std::array::from_fn(|j| (-l..=l).map(|k| Complex64::cis(PI * k as f64 * x[j])).collect())
    }

    fn phase(&self, tables: &[Vec<Complex64>; 3], k: &[i32; 3]) -> Complex64 {
        let l = self.max_k as i32;
        tables[0][(k[0] + l) as usize] * tables[1][(k[1] + l) as usize] * tables[2][(k[2] + l) as usize]
    }

    /// Fourier coefficient of `∇u` at `k`: `iπ û(k) ⊗ k`, in entry order.
    pub fn gradient_coeff(k: &[i32; 3], amp: &Amp) -> [Complex64; 9] {
        std::array::from_fn(|v| {
            let (a, b) = VARS[v];
            amp[a] * Complex64::new(0.0, PI * k[b] as f64)
        })
    }

    /// `∂_j ∂_l u_a` summed against the flux of the extremal form: the row
    /// divergences of `J = M_Q ∇u`, exactly.
    pub fn flux_divergence(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let m = *QuadraticForm::extremal_q().matrix();
        let tables = self.phases(x);
        let mut div = Vector3::zeros();
        for (k, amp) in &self.modes {
            let ph = self.phase(&tables, k);
            for i in 0..3 {
                for j in 0..3 {
                    let row = crate::forms::var_index(i, j);
                    for (col, &(a, b)) in VARS.iter().enumerate() {
                        let d2 = amp[a] * ph * (-(PI * PI) * k[b] as f64 * k[j] as f64);
                        div[i] += m[(row, col)] * d2.re;
                    }
                }
            }
        }
        div
    }

    /// `⟨|∇u|²⟩` by Parseval.
    pub fn gradient_energy(&self) -> f64 {
        let mut s = Sum::default();
        for (k, amp) in &self.modes {
            for z in Self::gradient_coeff(k, amp) {
                s.add(z.norm_sqr());
            }
        }
        s.total()
    }

    /// `⟨f(∇u)⟩ = Σ_k f(Re Ê(k)) + f(Im Ê(k))`.
    pub fn spectral_average(&self, f: &QuadraticForm) -> f64 {
        let mut s = Sum::default();
        for (k, amp) in &self.modes {
            let e = Self::gradient_coeff(k, amp);
            let re = MatrixVar(Vec9::from_fn(|v, _| e[v].re));
            let im = MatrixVar(Vec9::from_fn(|v, _| e[v].im));
            s.add(f.evaluate(&re));
            s.add(f.evaluate(&im));
        }
        s.total()
    }

    /// `⟨f(∇u)⟩` by the periodic trapezoid rule on `n³` nodes, evaluated by
    /// sum factorisation. Exact for `n ≥ 2 max_k + 1`.
    pub fn quadrature_average(&self, f: &QuadraticForm, n: usize) -> Result<f64> {
        let l = self.max_k;
        if n < 2 * l + 2 {
            return Err(Error::InvalidArgument(format!("grid {n} too coarse for |k| ≤ {l}; need ≥ {}", 2 * l + 2)));
        }
        let kk = 2 * l + 1;
        let li = l as i32;
        let w: Vec<Vec<Complex64>> = (0..n)
            .map(|p| {
                let x = -1.0 + 2.0 * p as f64 / n as f64;
                (-li..=li).map(|k| Complex64::cis(PI * k as f64 * x)).collect()
            })
            .collect();
        let zero = Complex64::new(0.0, 0.0);
        let idx3 = |a: usize, b: usize, c: usize, d: usize| ((a * kk + b) * n + c) * 9 + d;
        // coefficients C[k1][k2][k3][v]
        let mut coeff = vec![zero; kk * kk * kk * 9];
        for (k, amp) in &self.modes {
            let e = Self::gradient_coeff(k, amp);
            let (a, b, c) = ((k[0] + li) as usize, (k[1] + li) as usize, (k[2] + li) as usize);
            for v in 0..9 {
                coeff[((a * kk + b) * kk + c) * 9 + v] += e[v];
            }
        }
        // sum over k3: A[k1][k2][n3]
        let mut a_arr = vec![zero; kk * kk * n * 9];
        for k1 in 0..kk {
            for k2 in 0..kk {
                for p3 in 0..n {
                    for k3 in 0..kk {
                        let ph = w[p3][k3];
                        let base = ((k1 * kk + k2) * kk + k3) * 9;
                        for v in 0..9 {
                            a_arr[idx3(k1, k2, p3, v)] += coeff[base + v] * ph;
                        }
                    }
                }
            }
        }
        // sum over k2: B[k1][n2][n3]
        let idx_b = |k1: usize, p2: usize, p3: usize, v: usize| ((k1 * n + p2) * n + p3) * 9 + v;
        let mut b_arr = vec![zero; kk * n * n * 9];
        for k1 in 0..kk {
            for p2 in 0..n {
                for k2 in 0..kk {
                    let ph = w[p2][k2];
                    for p3 in 0..n {
                        for v in 0..9 {
                            b_arr[idx_b(k1, p2, p3, v)] += a_arr[idx3(k1, k2, p3, v)] * ph;
                        }
                    }
                }
            }
        }
        let slices: Vec<Sum> = (0..n)
            .into_par_iter()
            .map(|p1| {
                let mut s = Sum::default();
                for p2 in 0..n {
                    for p3 in 0..n {
                        let mut e = Vec9::zeros();
                        for k1 in 0..kk {
                            let ph = w[p1][k1];
                            for v in 0..9 {
                                e[v] += (b_arr[idx_b(k1, p2, p3, v)] * ph).re;
                            }
                        }
                        s.add(f.evaluate(&MatrixVar(e)));
                    }
                }
                s
            })
            .collect();
        let mut total = Sum::default();
        for s in slices {
            total.add(s.s);
            total.add(s.c);
        }
        Ok(total.total() / (n * n * n) as f64)
    }

    /// Whether every mode lies on one of the lines `k = l d_m` with
    /// amplitude parallel to `d_m`, up to `tol` relative to the largest
    /// amplitude. The constant mode is ignored.
    pub fn is_special(&self, tol: f64) -> bool {
        let scale = self
            .modes
            .iter()
            .filter(|(k, _)| **k != [0, 0, 0])
            .map(|(_, a)| norm_amp(a))
            .fold(0.0, f64::max);
        self.modes
            .iter()
            .filter(|(k, a)| **k != [0, 0, 0] && norm_amp(a) > tol * scale)
            .all(|(k, a)| special_line(k).is_some_and(|m| off_line(a, m) <= tol * scale))
    }

    /// Modes outside the special family that nevertheless contribute nothing
    /// to `⟨Q(∇u)⟩`, such as `k = (l, 0, 0)` with `û ∥ e2`.
    pub fn nonspecial_null_modes(&self, tol: f64) -> Vec<[i32; 3]> {
        let q = QuadraticForm::extremal_q();
        self.modes
            .iter()
            .filter(|(k, a)| {
                let size = norm_amp(a);
                if **k == [0, 0, 0] || size == 0.0 {
                    return false;
                }
                let special = special_line(k).is_some_and(|m| off_line(a, m) <= tol * size);
                let e = Self::gradient_coeff(k, a);
                let re = MatrixVar(Vec9::from_fn(|v, _| e[v].re));
                let im = MatrixVar(Vec9::from_fn(|v, _| e[v].im));
                let energy = q.evaluate(&re) + q.evaluate(&im);
                let norm: f64 = e.iter().map(|z| z.norm_sqr()).sum();
                !special && energy.abs() <= tol * norm
            })
            .map(|(k, _)| *k)
            .collect()
    }
}

/// Index `m` with `k = l d_m` for some integer `l ≠ 0`.
fn special_line(k: &[i32; 3]) -> Option<usize> {
    (0..4).find(|&m| {
        let d = direction(m);
        let l = k[0] * d[0] as i32;
        l != 0 && (0..3).all(|i| k[i] == l * d[i] as i32)
    })
}

/// Norm of the component of `a` orthogonal to `d_m`.
fn off_line(a: &Amp, m: usize) -> f64 {
    let d = direction(m);
    let proj = (a[0] * d[0] + a[1] * d[1] + a[2] * d[2]) / 3.0;
    (0..3).map(|i| (a[i] - proj * d[i]).norm_sqr()).sum::<f64>().sqrt()
}

impl VectorPotential for PeriodicField {
    fn value(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let tables = self.phases(x);
        let mut u = Vector3::zeros();
        for (k, amp) in &self.modes {
            let ph = self.phase(&tables, k);
            for c in 0..3 {
                u[c] += (amp[c] * ph).re;
            }
        }
        u
    }

    fn gradient(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let tables = self.phases(x);
        let mut e = Matrix3::zeros();
        for (k, amp) in &self.modes {
            let ph = self.phase(&tables, k);
            for a in 0..3 {
                let z = amp[a] * ph * Complex64::new(0.0, PI);
                for b in 0..3 {
                    e[(a, b)] += (z * k[b] as f64).re;
                }
            }
        }
        e
    }
}

/// `⟨f(∇u)⟩` by both backends on the smallest admissible grid.
pub fn cell_average_q(u: &PeriodicField, f: &QuadraticForm) -> Result<CellAverage> {
    let grid = (2 * u.max_k() + 2).max(4);
    let spectral = u.spectral_average(f);
    let quadrature = u.quadrature_average(f, grid)?;
    let energy_scale = u.gradient_energy() * f.max_abs();
    let relative_gap = (spectral - quadrature).abs() / energy_scale.max(f64::MIN_POSITIVE);
    Ok(CellAverage {
        spectral,
        quadrature,
        grid,
        energy_scale,
        relative_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn special_conversion_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sp = SpecialPotential::random(5, &mut rng);
        let u = PeriodicField::from_special(&sp);
        assert!(u.is_special(1e-12));
        for _ in 0..50 {
            let x = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            assert!((u.value(&x) - sp.value(&x)).amax() < 1e-12);
            assert!((u.gradient(&x) - sp.gradient(&x)).amax() < 1e-11);
        }
        let q = QuadraticForm::extremal_q();
        let avg = cell_average_q(&u, &q).unwrap();
        assert!(avg.spectral.abs() <= 1e-10 * avg.energy_scale);
        assert!(avg.quadrature.abs() <= 1e-10 * avg.energy_scale);
    }

    #[test]
    fn single_modes() {
        let q = QuadraticForm::extremal_q();
        let diag = PeriodicField::single_mode([1, 1, 1], [c(0.7); 3]);
        assert!(diag.is_special(1e-12));
        assert!(diag.spectral_average(&q).abs() < 1e-14);

        let axis = PeriodicField::single_mode([1, 0, 0], [c(0.0), c(1.0), c(0.0)]);
        assert!(!axis.is_special(1e-12));
        assert_eq!(axis.spectral_average(&q), 0.0);
        assert!(axis.quadrature_average(&q, 4).unwrap().abs() < 1e-14);
        assert_eq!(axis.nonspecial_null_modes(1e-12), vec![[-1, 0, 0], [1, 0, 0]]);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(!PeriodicField::random(2, &mut rng).is_special(1e-6));
        assert!(PeriodicField::zero().is_special(1e-12));
    }

    #[test]
    fn backends_agree_and_are_nonnegative() {
        let q = QuadraticForm::extremal_q();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for l in 1..=5 {
            for _ in 0..4 {
                let u = PeriodicField::random(l, &mut rng);
                let avg = cell_average_q(&u, &q).unwrap();
                assert!(avg.relative_gap <= 1e-10, "{avg:?}");
                assert!(avg.spectral >= -1e-10 && avg.quadrature >= -1e-10);
                let finer = u.quadrature_average(&q, 2 * l + 4).unwrap();
                assert!((finer - avg.spectral).abs() <= 1e-10 * avg.energy_scale);
            }
        }
    }

    #[test]
    fn frobenius_average_is_parseval_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = PeriodicField::random(3, &mut rng);
        let fro = QuadraticForm::frobenius();
        let e = u.gradient_energy();
        assert!((u.spectral_average(&fro) - e).abs() < 1e-12 * e);
        assert!((u.quadrature_average(&fro, 8).unwrap() - e).abs() < 1e-12 * e);
        assert!(u.quadrature_average(&fro, 7).is_err());
    }

    #[test]
    fn mean_gradient_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = PeriodicField::random(2, &mut rng);
        let n = 6;
        let mut mean = Matrix3::zeros();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = Vector3::new(i as f64, j as f64, k as f64) * (2.0 / n as f64) - Vector3::repeat(1.0);
                    mean += u.gradient(&x);
                }
            }
        }
        assert!(mean.amax() / ((n * n * n) as f64) < 1e-13);
    }
}
