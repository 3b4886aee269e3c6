//! Closed-form eigensolver for symmetric 3x3 matrices.
//!
//! Eigenvalues come from the trigonometric solution of the characteristic
//! cubic. Eigenvectors are taken from cross products of the rows of
//! `A - λI`, with a fallback for (nearly) repeated eigenvalues, and the
//! candidate with the smallest residual wins.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn eigenvalues(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p <= f64::EPSILON * q.abs() || p == 0.0 {
        return [q, q, q];
    }
    let b = (a - Matrix3::from_diagonal_element(q)) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    let mut ev = [lo, mid, hi];
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

fn residual(a: &Matrix3<f64>, lambda: f64, v: &Vector3<f64>) -> f64 {
    (a * v - v * lambda).norm()
}

/// Unit vector `v` with `A v ≈ λ v`. Any vector of the eigenspace is
/// acceptable when `λ` is repeated.
pub fn eigenvector(a: &Matrix3<f64>, lambda: f64) -> Vector3<f64> {
    let shifted = a - Matrix3::from_diagonal_element(lambda);
    let rows = [
        shifted.row(0).transpose(),
        shifted.row(1).transpose(),
        shifted.row(2).transpose(),
    ];
    let mut candidates: Vec<Vector3<f64>> = Vec::with_capacity(6);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = rows[i].cross(&rows[j]);
        let n = c.norm();
        if n > 0.0 && n.is_finite() {
            candidates.push(c / n);
        }
    }
    // rank <= 1: anything orthogonal to the dominant row
    let big = (0..3)
        .max_by(|&i, &j| rows[i].norm_squared().total_cmp(&rows[j].norm_squared()))
        .unwrap_or(0);
    let r = rows[big];
    if r.norm() > 0.0 {
        let axis = (0..3)
            .min_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()))
            .unwrap_or(0);
        let c = r.cross(&Vector3::ith(axis, 1.0));
        let n = c.norm();
        if n > 0.0 {
            candidates.push(c / n);
        }
    }
    candidates.extend((0..3).map(|k| Vector3::ith(k, 1.0)));

    let mut best = candidates[0];
    let mut best_res = residual(a, lambda, &best);
    for c in &candidates[1..] {
        let res = residual(a, lambda, c);
        if res < best_res {
            best = *c;
            best_res = res;
        }
    }
    best
}

/// Unit vector orthogonal to `v`.
pub fn orthogonal(v: &Vector3<f64>) -> Vector3<f64> {
    let axis = (0..3)
        .min_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
        .unwrap_or(0);
    v.cross(&Vector3::ith(axis, 1.0)).normalize()
}

/// All three eigenpairs, ascending. The eigenvector of the best separated
/// eigenvalue is computed directly and the remaining pair is resolved by an
/// exact rotation in its orthogonal complement, which keeps nearly repeated
/// eigenvalues accurate. Eigenvalues are returned as Rayleigh quotients.
pub fn eig(a: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let ev = eigenvalues(a);
    let isolated = if ev[1] - ev[0] < ev[2] - ev[1] { ev[2] } else { ev[0] };
    let w = eigenvector(a, isolated);
    let u1 = orthogonal(&w);
    let u2 = w.cross(&u1);
    let p = u1.dot(&(a * u1));
    let q = u1.dot(&(a * u2));
    let r = u2.dot(&(a * u2));
    let theta = 0.5 * (2.0 * q).atan2(p - r);
    let (s, c) = theta.sin_cos();
    let big = u1 * c + u2 * s;
    let small = u2 * c - u1 * s;
    let rq = |v: &Vector3<f64>| v.dot(&(a * v));
    let mut pairs = [(rq(&small), small), (rq(&big), big), (rq(&w), w)];
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    (
        [pairs[0].0, pairs[1].0, pairs[2].0],
        [pairs[0].1, pairs[1].1, pairs[2].1],
    )
}

/// Smallest eigenvalue and a unit eigenvector. The returned value is the
/// Rayleigh quotient of the returned vector.
pub fn min_eig(a: &Matrix3<f64>) -> (f64, Vector3<f64>) {
    let (ev, vecs) = eig(a);
    (ev[0], vecs[0])
}
