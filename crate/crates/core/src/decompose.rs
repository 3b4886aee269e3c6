//! Sum-of-squares plus null-Lagrangian decompositions of the cubic family.

use crate::error::{Error, Result};
use crate::forms::{var_index, CubicParams, MatrixVar, NullLagrangianCoeffs, QuadraticForm, Vec9, COEFF_TOL};
use crate::polyconvexity::Square;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCertificate {
    pub case: u8,
    pub beta_prime: f64,
    pub gamma_prime: f64,
    pub squares: Vec<Square>,
    pub null_part: NullLagrangianCoeffs,
    /// Max-abs coefficient of `f − squares` outside the minor span.
    pub projection_residual: f64,
}

fn slack(p: &CubicParams) -> f64 {
    1e-12 * p.alpha.abs().max(p.beta.abs()).max(p.gamma.abs())
}

/// First violated admissibility inequality, if any.
fn violation(p: &CubicParams) -> Option<String> {
    let eps = slack(p);
    let s = p.beta + p.gamma;
    if !(p.alpha >= -eps) {
        return Some(format!("α ≥ 0 violated: α = {}", p.alpha));
    }
    if !(p.gamma >= -eps) {
        return Some(format!("γ ≥ 0 violated: γ = {}", p.gamma));
    }
    if !(s <= p.alpha + p.gamma + eps) {
        return Some(format!("β+γ ≤ α+γ violated: β+γ = {s}, α+γ = {}", p.alpha + p.gamma));
    }
    if !(s >= -p.alpha / 2.0 - p.gamma - eps) {
        return Some(format!(
            "−α/2−γ ≤ β+γ violated: β+γ = {s}, −α/2−γ = {}",
            -p.alpha / 2.0 - p.gamma
        ));
    }
    None
}

/// Whether `from_cubic(p)` is quasiconvex: `α ≥ 0`, `γ ≥ 0` and
/// `−α/2 − γ ≤ β + γ ≤ α + γ` (up to a relative slack of 1e-12).
pub fn cubic_admissible(p: CubicParams) -> bool {
    violation(&p).is_none()
}

/// Signed distance of `p` to the boundary of the admissible region, in the
/// units of the parameters. Positive inside.
pub fn admissibility_margin(p: CubicParams) -> f64 {
    let s = p.beta + p.gamma;
    p.alpha
        .min(p.gamma)
        .min(p.alpha + p.gamma - s)
        .min(s + p.alpha / 2.0 + p.gamma)
}

fn linear(terms: &[((usize, usize), f64)]) -> [f64; 9] {
    let mut c = [0.0; 9];
    for &((i, j), v) in terms {
        c[var_index(i, j)] += v;
    }
    c
}

const OFF_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Explicit decomposition of an admissible cubic-symmetric form into
/// nonnegatively weighted squares plus a null-Lagrangian. Zero weights are
/// kept so the term structure is the same for every parameter choice.
pub fn decompose_cubic(p: CubicParams) -> Result<DecompositionCertificate> {
    if let Some(msg) = violation(&p) {
        return Err(Error::Inadmissible(msg));
    }
    let (alpha, gamma) = (p.alpha.max(0.0), p.gamma.max(0.0));
    if alpha + gamma == 0.0 {
        return Ok(DecompositionCertificate {
            case: 1,
            beta_prime: 0.0,
            gamma_prime: 0.0,
            squares: vec![],
            null_part: NullLagrangianCoeffs::zeros(),
            projection_residual: 0.0,
        });
    }
    let s = p.beta + p.gamma;
    let mut squares = Vec::with_capacity(13);
    let mut push = |weight: f64, terms: &[((usize, usize), f64)]| {
        squares.push(Square {
            weight,
            coeffs: linear(terms),
        })
    };
    let (case, bp, gp) = if s >= 0.0 {
        let bp = (s * alpha / (alpha + gamma)).clamp(0.0, alpha);
        let gp = (s * gamma / (alpha + gamma)).clamp(0.0, gamma);
        for i in 0..3 {
            push(alpha - bp, &[((i, i), 1.0)]);
        }
        push(bp, &[((0, 0), 1.0), ((1, 1), 1.0), ((2, 2), 1.0)]);
        for (i, j) in OFF_PAIRS {
            push(gp, &[((i, j), 1.0), ((j, i), 1.0)]);
        }
        (1, bp, gp)
    } else {
        let bp = (-s * alpha / (alpha + 2.0 * gamma)).clamp(0.0, alpha / 2.0);
        let gp = (-2.0 * s * gamma / (alpha + 2.0 * gamma)).clamp(0.0, gamma);
        for i in 0..3 {
            push(alpha - 2.0 * bp, &[((i, i), 1.0)]);
        }
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            push(bp, &[((i, i), 1.0), ((j, j), -1.0)]);
        }
        for (i, j) in OFF_PAIRS {
            push(gp, &[((i, j), 1.0), ((j, i), -1.0)]);
        }
        (2, bp, gp)
    };
    for (i, j) in OFF_PAIRS {
        push(gamma - gp, &[((i, j), 1.0)]);
        push(gamma - gp, &[((j, i), 1.0)]);
    }
    let f = QuadraticForm::from_cubic(p);
    let rest = squares.iter().fold(f, |acc, sq| acc - sq.form());
    let (null_part, projection_residual) = rest.project_onto_minors();
    let scale = f.max_abs().max(1.0);
    if projection_residual > COEFF_TOL * scale {
        return Err(Error::Inadmissible(format!(
            "remainder is not a null-Lagrangian (residual {projection_residual:e})"
        )));
    }
    Ok(DecompositionCertificate {
        case,
        beta_prime: bp,
        gamma_prime: gp,
        squares,
        null_part,
        projection_residual,
    })
}

/// Reconstructs `f` from the certificate and checks it coefficientwise, the
/// sign of every weight and the size of the projection residual.
pub fn verify_certificate(f: &QuadraticForm, cert: &DecompositionCertificate) -> bool {
    if cert.squares.iter().any(|s| !(s.weight >= 0.0) || s.coeffs.iter().any(|c| !c.is_finite())) {
        return false;
    }
    let rebuilt = cert
        .squares
        .iter()
        .fold(QuadraticForm::null_lagrangian(&cert.null_part), |acc, s| acc + s.form());
    let scale = f.max_abs().max(1.0);
    (*rebuilt.matrix() - *f.matrix()).amax() <= COEFF_TOL * scale && cert.projection_residual <= COEFF_TOL * scale
}

/// The linear form of a square as a matrix variable.
pub fn linear_form(sq: &Square) -> MatrixVar {
    MatrixVar(Vec9::from(sq.coeffs))
}
