//! Polyconvexity of quadratic forms.
//!
//! A quadratic form is polyconvex iff `M_f − Σ α_i N_i` is positive
//! semidefinite for some null-Lagrangian coefficients `α`. Positive answers
//! come with the `α` found by maximising the smallest eigenvalue; negative
//! answers are only given with a structural certificate.

use crate::error::{Error, Result};
use crate::forms::{var_name, Mat9, MatrixVar, NullLagrangianCoeffs, QuadraticForm, Vec9};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::forms::minor_matrices;

/// Eigenvalues this close to the minimum share the subgradient.
const EIGENSPACE_GAP: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityConfig {
    pub max_iter: usize,
    /// Total number of starts: `α = 0`, the projection of `M_f` onto the
    /// minor span, then seeded Gaussian draws.
    pub restarts: usize,
    /// Tolerance on `λ_min` of the normalised form.
    pub tol: f64,
    pub seed: u64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self {
            max_iter: 5_000,
            restarts: 20,
            tol: 1e-9,
            seed: 0,
        }
    }
}

/// Certificate that no `α` makes `M_f − Σ α_i N_i` positive semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralCertificate {
    /// Variables with a zero diagonal entry in `M_f`; each forces its row of
    /// `M_f − Σ α_i N_i` to vanish.
    pub forced_zero_rows: Vec<String>,
    /// Variables the form does not involve at all.
    pub absent_variables: Vec<String>,
    /// The unique `α` compatible with the forced rows.
    pub forced_alpha: NullLagrangianCoeffs,
    /// `η` with `f(η) − α·cof(η) < 0`.
    pub negative_point: [f64; 9],
    pub value: f64,
    /// `f(η)` by integer arithmetic, when `2 M_f` and `η` are integral.
    pub exact_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PolyVerdict {
    Polyconvex {
        alpha: NullLagrangianCoeffs,
        lambda_min_residual: f64,
    },
    NotPolyconvex { certificate: StructuralCertificate },
    Inconclusive {
        best_alpha: NullLagrangianCoeffs,
        best_lambda_min: f64,
    },
}

impl PolyVerdict {
    pub fn status(&self) -> &'static str {
        match self {
            PolyVerdict::Polyconvex { .. } => "polyconvex",
            PolyVerdict::NotPolyconvex { .. } => "not_polyconvex",
            PolyVerdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Flat serialisation `{status, alpha[9], lambda_min, certificate}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySummary {
    pub status: String,
    pub alpha: [f64; 9],
    pub lambda_min: f64,
    pub certificate: Option<StructuralCertificate>,
}

impl From<&PolyVerdict> for PolySummary {
    fn from(v: &PolyVerdict) -> Self {
        let (alpha, lambda_min, certificate) = match v {
            PolyVerdict::Polyconvex {
                alpha,
                lambda_min_residual,
            } => (alpha.0, *lambda_min_residual, None),
            PolyVerdict::NotPolyconvex { certificate } => {
                (certificate.forced_alpha.0, certificate.value, Some(certificate.clone()))
            }
            PolyVerdict::Inconclusive {
                best_alpha,
                best_lambda_min,
            } => (best_alpha.0, *best_lambda_min, None),
        };
        Self {
            status: v.status().to_string(),
            alpha,
            lambda_min,
            certificate,
        }
    }
}

fn residual_matrix(m: &Mat9, ns: &[Mat9; 9], alpha: &[f64; 9]) -> Mat9 {
    let mut g = *m;
    for (a, n) in alpha.iter().zip(ns.iter()) {
        g -= n * *a;
    }
    g
}

/// `λ_min(M_f − Σ α_i N_i)`.
pub fn lambda_min(f: &QuadraticForm, alpha: &NullLagrangianCoeffs) -> f64 {
    let g = residual_matrix(f.matrix(), &minor_matrices(), &alpha.0);
    SymmetricEigen::new(g).eigenvalues.min()
}

/// `2 f(η)` in integer arithmetic, if every entry of `2 M_f` and of `η` is
/// an integer that fits comfortably in an `i64`.
pub fn exact_twice_value(f: &QuadraticForm, eta: &MatrixVar) -> Option<i128> {
    let as_int = |x: f64| -> Option<i128> {
        (x.fract() == 0.0 && x.abs() < 1e15).then_some(x as i128)
    };
    let e: Vec<i128> = eta.0.iter().map(|&x| as_int(x)).collect::<Option<_>>()?;
    let m = f.matrix();
    let mut total: i128 = 0;
    for v in 0..9 {
        for w in 0..9 {
            total += as_int(2.0 * m[(v, w)])? * e[v] * e[w];
        }
    }
    Some(total)
}

/// The structural route: every variable `v` with `M_f[v,v] = 0` forces row
/// `v` of `M_f − Σ α_i N_i` to vanish (the cofactor matrices have zero
/// diagonal). If these linear conditions determine `α` uniquely and the
/// resulting matrix is negative at some `η`, no `α` can work.
pub fn structural_disproof(f: &QuadraticForm) -> Option<StructuralCertificate> {
    let m = f.matrix();
    let scale = f.max_abs().max(1.0);
    let tau = 1e-9 * scale;
    let zero_diag: Vec<usize> = (0..9).filter(|&v| m[(v, v)] == 0.0).collect();
    if zero_diag.is_empty() {
        return None;
    }
    let ns = minor_matrices();
    let rows = zero_diag.len() * 9;
    let mut a = DMatrix::zeros(rows, 9);
    let mut b = DVector::zeros(rows);
    for (k, &v) in zero_diag.iter().enumerate() {
        for w in 0..9 {
            for (i, n) in ns.iter().enumerate() {
                a[(9 * k + w, i)] = n[(v, w)];
            }
            b[9 * k + w] = m[(v, w)];
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax.max(1e-300) {
        return None;
    }
    let alpha = svd.solve(&b, 1e-12).ok()?;
    if (&a * &alpha - &b).amax() > 1e-10 * scale {
        return None;
    }
    let forced: [f64; 9] = std::array::from_fn(|i| if alpha[i].abs() < 1e-14 * scale { 0.0 } else { alpha[i] });
    let g = residual_matrix(m, &ns, &forced);

    let mut candidates = vec![MatrixVar::identity()];
    let eig = SymmetricEigen::new(g);
    let imin = eig.eigenvalues.imin();
    candidates.push(MatrixVar(Vec9::from_iterator(eig.eigenvectors.column(imin).iter().copied())));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    candidates.extend((0..200).map(|_| MatrixVar(Vec9::from_fn(|_, _| StandardNormal.sample(&mut rng)))));
    let eta = candidates.into_iter().find(|e| {
        let n2 = e.0.norm_squared();
        n2 > 0.0 && e.0.dot(&(g * e.0)) < -tau * n2
    })?;
    let value = eta.0.dot(&(g * eta.0));
    let exact_value = if forced.iter().all(|&x| x == 0.0) {
        exact_twice_value(f, &eta).map(|t| t as f64 / 2.0)
    } else {
        None
    };
    Some(StructuralCertificate {
        forced_zero_rows: zero_diag.iter().map(|&v| var_name(v)).collect(),
        absent_variables: f.absent_variables().into_iter().map(var_name).collect(),
        forced_alpha: NullLagrangianCoeffs(forced),
        negative_point: std::array::from_fn(|i| eta.0[i]),
        value,
        exact_value,
    })
}

/// Smallest eigenvalue and a subgradient of `α ↦ λ_min(M − Σ α_i N_i)`,
/// averaged over the (near) minimal eigenspace.
fn value_and_subgradient(m: &Mat9, ns: &[Mat9; 9], alpha: &[f64; 9]) -> (f64, [f64; 9]) {
    let g = residual_matrix(m, ns, alpha);
    let eig = SymmetricEigen::new(g);
    let lmin = eig.eigenvalues.min();
    let mut grad = [0.0; 9];
    let mut count = 0.0;
    for k in 0..9 {
        if eig.eigenvalues[k] - lmin <= EIGENSPACE_GAP * (1.0 + lmin.abs()) {
            let v = eig.eigenvectors.column(k);
            for (gi, n) in grad.iter_mut().zip(ns.iter()) {
                *gi -= v.dot(&(n * v));
            }
            count += 1.0;
        }
    }
    for gi in &mut grad {
        *gi /= count;
    }
    (lmin, grad)
}

/// Polyak-step subgradient ascent from `start`; returns the best point.
fn ascend(m: &Mat9, ns: &[Mat9; 9], start: [f64; 9], cfg: &FeasibilityConfig) -> ([f64; 9], f64) {
    let mut alpha = start;
    let mut best_alpha = start;
    let mut best = f64::NEG_INFINITY;
    let mut delta = 0.5;
    let mut stall = 0;
    for _ in 0..cfg.max_iter {
        let (val, grad) = value_and_subgradient(m, ns, &alpha);
        if val > best {
            best = val;
            best_alpha = alpha;
            stall = 0;
        } else {
            stall += 1;
        }
        if best >= -0.1 * cfg.tol {
            break;
        }
        if stall >= 20 {
            delta *= 0.5;
            stall = 0;
            alpha = best_alpha;
            if delta < 1e-15 {
                break;
            }
            continue;
        }
        let gn2: f64 = grad.iter().map(|g| g * g).sum();
        if gn2 < 1e-30 {
            break;
        }
        let step = (best + delta - val) / gn2;
        for (a, g) in alpha.iter_mut().zip(grad.iter()) {
            *a += step * g;
        }
    }
    (best_alpha, best)
}

/// Searches for `α` with `M_f − Σ α_i N_i ⪰ 0`.
pub fn feasibility(f: &QuadraticForm, cfg: &FeasibilityConfig) -> Result<PolyVerdict> {
    if !(cfg.tol > 0.0) || cfg.restarts == 0 {
        return Err(Error::InvalidArgument("feasibility needs tol > 0 and at least one restart".into()));
    }
    if let Some(certificate) = structural_disproof(f) {
        return Ok(PolyVerdict::NotPolyconvex { certificate });
    }
    let scale = f.max_abs();
    if scale == 0.0 {
        return Ok(PolyVerdict::Polyconvex {
            alpha: NullLagrangianCoeffs::zeros(),
            lambda_min_residual: 0.0,
        });
    }
    let m = f.matrix() / scale;
    let ns = minor_matrices();

    let mut starts = vec![[0.0; 9]];
    if cfg.restarts > 1 {
        let (proj, _) = (*f * (1.0 / scale)).project_onto_minors();
        starts.push(proj.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while starts.len() < cfg.restarts {
        starts.push(std::array::from_fn(|_| StandardNormal.sample(&mut rng)));
    }
    let results: Vec<([f64; 9], f64)> = starts.par_iter().map(|s| ascend(&m, &ns, *s, cfg)).collect();
    let (best_alpha, best) = results
        .iter()
        .fold(None::<([f64; 9], f64)>, |acc, &(a, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((a, v)),
        })
        .expect("at least one start");
    let alpha = NullLagrangianCoeffs(best_alpha.map(|a| a * scale));
    if best >= -cfg.tol {
        Ok(PolyVerdict::Polyconvex {
            alpha,
            lambda_min_residual: best * scale,
        })
    } else {
        Ok(PolyVerdict::Inconclusive {
            best_alpha: alpha,
            best_lambda_min: best * scale,
        })
    }
}

/// `weight · (coeffs · ξ)²`, with the largest coefficient normalised to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub weight: f64,
    pub coeffs: [f64; 9],
}

impl Square {
    pub fn form(&self) -> QuadraticForm {
        QuadraticForm::square(&MatrixVar(Vec9::from(self.coeffs))) * self.weight
    }
}

/// Sum of squares of the semidefinite part and its reconstruction error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexSplit {
    pub squares: Vec<Square>,
    pub residual: f64,
}

/// Writes `M_f − Σ α_i N_i` as a weighted sum of squares of linear forms.
pub fn convex_split(f: &QuadraticForm, alpha: &NullLagrangianCoeffs, tol: f64) -> Result<ConvexSplit> {
    let ns = minor_matrices();
    let g = residual_matrix(f.matrix(), &ns, &alpha.0);
    let scale = g.amax();
    if scale == 0.0 {
        return Ok(ConvexSplit {
            squares: vec![],
            residual: 0.0,
        });
    }
    let eig = SymmetricEigen::new(g);
    let lmin = eig.eigenvalues.min();
    if lmin < -tol * scale {
        return Err(Error::NotPsd(lmin));
    }
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut squares = Vec::new();
    let mut rebuilt = Mat9::zeros();
    for k in order {
        let lam = eig.eigenvalues[k];
        if lam <= 1e-14 * scale {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let pivot = v.iamax();
        let c = v / v[pivot];
        let weight = lam * v[pivot] * v[pivot];
        rebuilt += c * c.transpose() * weight;
        squares.push(Square {
            weight,
            coeffs: std::array::from_fn(|i| c[i]),
        });
    }
    Ok(ConvexSplit {
        squares,
        residual: (g - rebuilt).amax(),
    })
}
