//! Subdomains of the cell, their quadrature rules, and the boundary bound.

use super::periodic::Sum;
use super::{flux_q, q_value, PeriodicField, SpecialPotential, VectorPotential};
use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest `|w|` tolerated on the boundary of the subdomain.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeNode {
    pub x: Vector3<f64>,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceNode {
    pub x: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub weight: f64,
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// A box or ball with closure inside the open cell `(−1, 1)³`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Subdomain {
    Box { center: [f64; 3], half_widths: [f64; 3] },
    Ball { center: [f64; 3], radius: f64 },
}

impl Subdomain {
    pub fn cube(center: [f64; 3], half_width: f64) -> Result<Self> {
        Self::Box {
            center,
            half_widths: [half_width; 3],
        }
        .validated()
    }

    pub fn ball(center: [f64; 3], radius: f64) -> Result<Self> {
        Self::Ball { center, radius }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let (c, h) = match &self {
            Subdomain::Box { center, half_widths } => (*center, *half_widths),
            Subdomain::Ball { center, radius } => (*center, [*radius; 3]),
        };
        for i in 0..3 {
            if !(h[i] > 0.0) || !c[i].is_finite() || !h[i].is_finite() {
                return Err(Error::InvalidArgument(format!("subdomain size must be positive and finite: {self:?}")));
            }
            if !(c[i].abs() + h[i] < 1.0) {
                return Err(Error::InvalidArgument(format!("subdomain must lie in the open cell: {self:?}")));
            }
        }
        Ok(self)
    }

    pub fn center(&self) -> Vector3<f64> {
        match self {
            Subdomain::Box { center, .. } | Subdomain::Ball { center, .. } => Vector3::from(*center),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Subdomain::Box { half_widths: h, .. } => 8.0 * h[0] * h[1] * h[2],
            Subdomain::Ball { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
        }
    }

    pub fn surface_area(&self) -> f64 {
        match self {
            Subdomain::Box { half_widths: h, .. } => 8.0 * (h[0] * h[1] + h[1] * h[2] + h[2] * h[0]),
            Subdomain::Ball { radius, .. } => 4.0 * PI * radius * radius,
        }
    }

    /// Tensor Gauss-Legendre for boxes; radial Gauss-Legendre times a
    /// sphere rule for balls. `n` points per direction.
    pub fn volume_rule(&self, n: usize) -> Vec<VolumeNode> {
        let (t, w) = gauss_legendre(n);
        let c = self.center();
        let mut out = Vec::new();
        match self {
            Subdomain::Box { half_widths: h, .. } => {
                let jac = h[0] * h[1] * h[2];
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            out.push(VolumeNode {
                                x: c + Vector3::new(h[0] * t[i], h[1] * t[j], h[2] * t[k]),
                                weight: jac * w[i] * w[j] * w[k],
                            });
                        }
                    }
                }
            }
            Subdomain::Ball { radius, .. } => {
                let sphere = sphere_rule(n);
                for i in 0..n {
                    let r = radius * (t[i] + 1.0) / 2.0;
                    let wr = radius / 2.0 * w[i] * r * r;
                    for (dir, ws) in &sphere {
                        out.push(VolumeNode {
                            x: c + dir * r,
                            weight: wr * ws,
                        });
                    }
                }
            }
        }
        out
    }

    /// Boundary nodes with outward unit normals.
    pub fn surface_rule(&self, n: usize) -> Vec<SurfaceNode> {
        let c = self.center();
        let mut out = Vec::new();
        match self {
            Subdomain::Box { half_widths: h, .. } => {
                let (t, w) = gauss_legendre(n);
                for a in 0..3 {
                    let (b, d) = ((a + 1) % 3, (a + 2) % 3);
                    for sign in [-1.0, 1.0] {
                        let normal = Vector3::ith(a, sign);
                        for i in 0..n {
                            for j in 0..n {
                                let mut x = c;
                                x[a] += sign * h[a];
                                x[b] += h[b] * t[i];
                                x[d] += h[d] * t[j];
                                out.push(SurfaceNode {
                                    x,
                                    normal,
                                    weight: h[b] * h[d] * w[i] * w[j],
                                });
                            }
                        }
                    }
                }
            }
            Subdomain::Ball { radius, .. } => {
                for (dir, ws) in sphere_rule(n) {
                    out.push(SurfaceNode {
                        x: c + dir * *radius,
                        normal: dir,
                        weight: radius * radius * ws,
                    });
                }
            }
        }
        out
    }
}

/// Gauss-Legendre in `cos θ` times the trapezoid rule in `φ` on `2n` points.
/// Exact for spherical harmonics of degree below `2n`.
fn sphere_rule(n: usize) -> Vec<(Vector3<f64>, f64)> {
    let (t, w) = gauss_legendre(n);
    let m = 2 * n;
    let dphi = 2.0 * PI / m as f64;
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let s = (1.0 - t[i] * t[i]).sqrt();
        for j in 0..m {
            let (sp, cp) = (dphi * j as f64).sin_cos();
            out.push((Vector3::new(s * cp, s * sp, t[i]), w[i] * dphi));
        }
    }
    out
}

/// Smooth cutoff vanishing with its gradient on the boundary of a
/// subdomain: `Π (1 − s_i²)³` on boxes, `(1 − r²/R²)³` on balls.
#[derive(Clone, Debug, PartialEq)]
pub struct Cutoff {
    pub domain: Subdomain,
}

impl Cutoff {
    pub fn new(domain: Subdomain) -> Self {
        Self { domain }
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        match &self.domain {
            Subdomain::Box { center, half_widths } => (0..3)
                .map(|i| {
                    let s = (x[i] - center[i]) / half_widths[i];
                    (1.0 - s * s).max(0.0).powi(3)
                })
                .product(),
            Subdomain::Ball { center, radius } => {
                let rho = (x - Vector3::from(*center)).norm_squared() / (radius * radius);
                (1.0 - rho).max(0.0).powi(3)
            }
        }
    }

    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match &self.domain {
            Subdomain::Box { center, half_widths } => {
                let s: [f64; 3] = std::array::from_fn(|i| (x[i] - center[i]) / half_widths[i]);
                let f: [f64; 3] = std::array::from_fn(|i| (1.0 - s[i] * s[i]).max(0.0));
                Vector3::from_fn(|i, _| {
                    let di = -6.0 * s[i] / half_widths[i] * f[i] * f[i];
                    (0..3).map(|j| if j == i { di } else { f[j].powi(3) }).product()
                })
            }
            Subdomain::Ball { center, radius } => {
                let d = x - Vector3::from(*center);
                let g = (1.0 - d.norm_squared() / (radius * radius)).max(0.0);
                d * (-6.0 * g * g / (radius * radius))
            }
        }
    }
}

/// `u(x) = A x + c`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffinePotential {
    pub a: Matrix3<f64>,
    pub c: Vector3<f64>,
}

impl AffinePotential {
    pub fn new(a: Matrix3<f64>, c: Vector3<f64>) -> Self {
        Self { a, c }
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

impl VectorPotential for AffinePotential {
    fn value(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.a * x + self.c
    }

    fn gradient(&self, _x: &Vector3<f64>) -> Matrix3<f64> {
        self.a
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PerturbationBase {
    Periodic(PeriodicField),
    Affine(AffinePotential),
}

impl PerturbationBase {
    fn as_potential(&self) -> &dyn VectorPotential {
        match self {
            PerturbationBase::Periodic(p) => p,
            PerturbationBase::Affine(a) => a,
        }
    }
}

/// `w = amplitude · φ · b` with `φ` the cutoff of the subdomain, so `w`
/// and `∇w` vanish on its boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub cutoff: Cutoff,
    pub base: PerturbationBase,
    pub amplitude: f64,
}

impl Perturbation {
    pub fn new(domain: Subdomain, base: PerturbationBase, amplitude: f64) -> Self {
        Self {
            cutoff: Cutoff::new(domain),
            base,
            amplitude,
        }
    }

    pub fn zero(domain: Subdomain) -> Self {
        Self::new(domain, PerturbationBase::Affine(AffinePotential::zero()), 0.0)
    }

    /// Cutoff times a few random trigonometric modes with `|k|∞ ≤ 2`.
    pub fn random<R: Rng>(domain: Subdomain, amplitude: f64, rng: &mut R) -> Self {
        let count = rng.gen_range(1..=4);
        let field = PeriodicField::random_sparse(2, count, 1.0, rng);
        Self::new(domain, PerturbationBase::Periodic(field), amplitude)
    }
}

impl VectorPotential for Perturbation {
    fn value(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.base.as_potential().value(x) * (self.amplitude * self.cutoff.value(x))
    }

    /// `∇w = amplitude (b ⊗ ∇φ + φ ∇b)`.
    fn gradient(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let b = self.base.as_potential();
        let phi = self.cutoff.value(x);
        (b.value(x) * self.cutoff.gradient(x).transpose() + b.gradient(x) * phi) * self.amplitude
    }
}

fn ordered_sum<T: Sync, F: Fn(&T) -> f64 + Sync + Send>(nodes: &[T], f: F) -> f64 {
    let vals: Vec<f64> = nodes.par_iter().map(f).collect();
    let mut s = Sum::default();
    for v in vals {
        s.add(v);
    }
    s.total()
}

fn check_resolution(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("quadrature needs at least 2 points per direction, got {n}")));
    }
    Ok(())
}

/// `∫_Ω Q(∇u)`.
pub fn interior_energy(domain: &Subdomain, u: &dyn VectorPotential, n: usize) -> Result<f64> {
    check_resolution(n)?;
    let nodes = domain.volume_rule(n);
    Ok(ordered_sum(&nodes, |p| p.weight * q_value(&u.gradient(&p.x))))
}

/// `∫_∂Ω u̲ · J̲ n` for a special potential.
pub fn boundary_functional(domain: &Subdomain, sp: &SpecialPotential, n: usize) -> Result<f64> {
    check_resolution(n)?;
    let nodes = domain.surface_rule(n);
    Ok(ordered_sum(&nodes, |p| {
        let j = flux_q(&sp.gradient(&p.x));
        p.weight * sp.value(&p.x).dot(&(j * p.normal))
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpBoundReport {
    /// `∫_Ω Q(∇u̲)`.
    pub interior_special: f64,
    /// `∫_Ω Q(∇u̲ + ∇w)`.
    pub interior_perturbed: f64,
    /// `∫_∂Ω u̲ · J̲ n`.
    pub boundary: f64,
    /// `interior_perturbed − boundary`.
    pub gap: f64,
    /// `∫_Ω J̲ : ∇w`.
    pub cross_term: f64,
    /// `∫_Ω Q(∇w)`.
    pub perturbation_energy: f64,
    /// `|interior_perturbed − interior_special − 2 cross_term − perturbation_energy|`.
    pub decomposition_residual: f64,
    /// Largest `|w|` over the surface nodes.
    pub boundary_max_w: f64,
    pub points_per_direction: usize,
    pub volume_nodes: usize,
    pub surface_nodes: usize,
}

/// Compares `∫_Ω Q(∇(u̲ + w))` with the surface integral of `u̲`. The
/// perturbation must vanish on `∂Ω`.
pub fn sharp_bound_check(
    domain: &Subdomain,
    sp: &SpecialPotential,
    w: &dyn VectorPotential,
    n: usize,
) -> Result<SharpBoundReport> {
    check_resolution(n)?;
    let surface = domain.surface_rule(n);
    let boundary_max_w = surface.iter().map(|p| w.value(&p.x).norm()).fold(0.0, f64::max);
    if !(boundary_max_w <= BOUNDARY_TOL) {
        return Err(Error::BoundaryNonzero(boundary_max_w));
    }
    let volume = domain.volume_rule(n);
    let terms: Vec<[f64; 4]> = volume
        .par_iter()
        .map(|p| {
            let e = sp.gradient(&p.x);
            let dw = w.gradient(&p.x);
            let j = flux_q(&e);
            [
                p.weight * q_value(&e),
                p.weight * q_value(&(e + dw)),
                p.weight * j.component_mul(&dw).sum(),
                p.weight * q_value(&dw),
            ]
        })
        .collect();
    let mut sums = [Sum::default(); 4];
    for t in &terms {
        for i in 0..4 {
            sums[i].add(t[i]);
        }
    }
    let [interior_special, interior_perturbed, cross_term, perturbation_energy] = sums.map(|s| s.total());
    let boundary = boundary_functional(domain, sp, n)?;
    Ok(SharpBoundReport {
        interior_special,
        interior_perturbed,
        boundary,
        gap: interior_perturbed - boundary,
        cross_term,
        perturbation_energy,
        decomposition_residual: (interior_perturbed - interior_special - 2.0 * cross_term - perturbation_energy).abs(),
        boundary_max_w,
        points_per_direction: n,
        volume_nodes: volume.len(),
        surface_nodes: surface.len(),
    })
}
