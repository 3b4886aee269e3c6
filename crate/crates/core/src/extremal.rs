//! Extremality probes and rank-one equivalence.
//!
//! A rank-one convex form is extremal (in the rank-one sense) if no rank-one
//! square `(a·x)²(b·y)²` can be subtracted from it without losing rank-one
//! convexity. [`max_subtractable`] finds the largest such coefficient for a
//! given direction by bisection against the certifier. A zero supremum over
//! many directions is evidence for extremality, not a proof; extremality
//! against general quasiconvex forms is not probed here.

use crate::error::{Error, Result};
use crate::forms::{Biquadratic, QuadraticForm};
use crate::rankone::{self, SearchConfig, Verdict};
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Smallest coefficient tested; below it a direction counts as blocked.
pub const T_MIN: f64 = 1e-6;
/// Upper end of the bracket search.
pub const T_CAP: f64 = 1e6;
/// Bracket width at which bisection stops.
pub const T_WIDTH: f64 = 1e-6;
/// `extremal_def1` holds when the supremum does not exceed this.
pub const EXTREMAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneDirection {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl RankOneDirection {
    /// Normalises both vectors.
    pub fn new(a: Vector3<f64>, b: Vector3<f64>) -> Result<Self> {
        let (na, nb) = (a.norm(), b.norm());
        if !(na > 0.0 && nb > 0.0) {
            return Err(Error::InvalidArgument("direction vectors must be nonzero".into()));
        }
        let (a, b) = (a / na, b / nb);
        Ok(Self {
            a: [a[0], a[1], a[2]],
            b: [b[0], b[1], b[2]],
        })
    }

    /// `R(ξ) = (Σ a_i b_j ξ_ij)²`.
    pub fn form(&self) -> QuadraticForm {
        QuadraticForm::rank_one_square(&Vector3::from(self.a), &Vector3::from(self.b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub t_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub directions: usize,
    pub sup_t: f64,
    pub worst_a: [f64; 3],
    pub worst_b: [f64; 3],
    pub extremal_def1: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_direction: Vec<DirectionResult>,
    pub note: String,
}

fn violated(f: &QuadraticForm, r: &QuadraticForm, t: f64, cfg: &SearchConfig) -> Result<bool> {
    Ok(rankone::certify(&(*f - *r * t), cfg)?.is_violated())
}

fn bisect(f: &QuadraticForm, d: &RankOneDirection, cfg: &SearchConfig) -> Result<f64> {
    let r = d.form();
    if violated(f, &r, T_MIN, cfg)? {
        return Ok(0.0);
    }
    let mut lo = T_MIN;
    let mut hi = 1.0;
    while !violated(f, &r, hi, cfg)? {
        lo = hi;
        hi *= 2.0;
        if hi > T_CAP {
            return Ok(T_CAP);
        }
    }
    while hi - lo > T_WIDTH {
        let mid = 0.5 * (lo + hi);
        if violated(f, &r, mid, cfg)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn require_rank_one_convex(f: &QuadraticForm, cfg: &SearchConfig) -> Result<Verdict> {
    match rankone::certify(f, cfg)? {
        Verdict::Violated { value, .. } => Err(Error::NotRankOneConvex { value }),
        v => Ok(v),
    }
}

/// Largest `t` with `f − t R` rank-one convex, to within `T_WIDTH`; zero if
/// even `T_MIN` breaks it, `T_CAP` if nothing up to the cap does.
pub fn max_subtractable(f: &QuadraticForm, d: &RankOneDirection, cfg: &SearchConfig) -> Result<f64> {
    require_rank_one_convex(f, cfg)?;
    bisect(f, d, cfg)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Random perturbations of a direction with a positive `t*`, kept while they
/// increase it.
fn climb(f: &QuadraticForm, start: DirectionResult, seed: u64, cfg: &SearchConfig) -> Result<DirectionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = start;
    let mut sigma = 0.2;
    for _ in 0..8 {
        let a = Vector3::from(best.a) + random_unit(&mut rng) * sigma;
        let b = Vector3::from(best.b) + random_unit(&mut rng) * sigma;
        let d = RankOneDirection::new(a, b)?;
        let t = bisect(f, &d, cfg)?;
        if t > best.t_star {
            best = DirectionResult { a: d.a, b: d.b, t_star: t };
        } else {
            sigma *= 0.5;
        }
    }
    Ok(best)
}

/// Probes `n_directions` seeded random directions plus one direction per
/// zero of `f` on rank-one matrices.
pub fn probe_def1(f: &QuadraticForm, n_directions: usize, cfg: &SearchConfig) -> Result<ProbeReport> {
    let verdict = require_rank_one_convex(f, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_d1ec);
    let mut dirs: Vec<RankOneDirection> = (0..n_directions)
        .map(|_| RankOneDirection::new(random_unit(&mut rng), random_unit(&mut rng)))
        .collect::<Result<_>>()?;
    if let Verdict::Marginal { zero_points, .. } = &verdict {
        for z in zero_points {
            dirs.push(RankOneDirection::new(Vector3::from(z.x), Vector3::from(z.y))?);
        }
    }
    let results: Vec<DirectionResult> = dirs
        .par_iter()
        .enumerate()
        .map(|(k, d)| {
            let t = bisect(f, d, cfg)?;
            let r = DirectionResult { a: d.a, b: d.b, t_star: t };
            if t > 0.0 && t < T_CAP {
                climb(f, r, cfg.seed.wrapping_add(k as u64), cfg)
            } else {
                Ok(r)
            }
        })
        .collect::<Result<_>>()?;
    let worst = results
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (k, r)| match acc {
            Some((_, t)) if t >= r.t_star => acc,
            _ => Some((k, r.t_star)),
        });
    let (wi, sup_t) = worst.unwrap_or((0, 0.0));
    let (worst_a, worst_b) = results.get(wi).map_or(([0.0; 3], [0.0; 3]), |r| (r.a, r.b));
    let extremal_def1 = sup_t <= EXTREMAL_TOL;
    let note = if extremal_def1 {
        "no rank-one square can be subtracted along any probed direction; evidence for, not a proof of, extremality"
    } else {
        "a rank-one square can be subtracted; not extremal"
    };
    Ok(ProbeReport {
        directions: results.len(),
        sup_t,
        worst_a,
        worst_b,
        extremal_def1,
        per_direction: results,
        note: note.into(),
    })
}

/// Nonsingular pair `(A, B)` acting by `(x, y) ↦ (Ax, By)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceMap {
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
}

impl EquivalenceMap {
    pub fn new(a: Matrix3<f64>, b: Matrix3<f64>) -> Result<Self> {
        for m in [&a, &b] {
            let det = m.determinant();
            if !(det.abs() >= 1e-12) {
                return Err(Error::SingularMap(det));
            }
        }
        Ok(Self { a, b })
    }

    pub fn identity() -> Self {
        Self {
            a: Matrix3::identity(),
            b: Matrix3::identity(),
        }
    }

    /// The map with `transform(B, self.then(next)) = transform(transform(B, self), next)`.
    pub fn then(&self, next: &EquivalenceMap) -> EquivalenceMap {
        EquivalenceMap {
            a: self.a * next.a,
            b: self.b * next.b,
        }
    }

    pub fn inverse(&self) -> Result<EquivalenceMap> {
        let inv = |m: &Matrix3<f64>| m.try_inverse().ok_or(Error::SingularMap(m.determinant()));
        EquivalenceMap::new(inv(&self.a)?, inv(&self.b)?)
    }
}

/// `(x, y) ↦ B(Ax, By)`.
pub fn transform(bq: &Biquadratic, m: &EquivalenceMap) -> Result<Biquadratic> {
    let m = EquivalenceMap::new(m.a, m.b)?;
    Ok(bq.pullback(&m.a, &m.b))
}

/// Diagonal map `A = diag(λ)`, `B = diag(1/λ)` taking the off-diagonal
/// weights `(α, β, γ)` on `ξ12², ξ23², ξ31²` to `(α′, β′, γ′)`, normalised by
/// `λ1 λ2 λ3 = 1`.
pub fn diagonal_scaling(from: [f64; 3], to: [f64; 3]) -> Result<EquivalenceMap> {
    if from.iter().chain(to.iter()).any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument("diagonal scaling needs positive parameters".into()));
    }
    let (p, q) = (from.iter().product::<f64>(), to.iter().product::<f64>());
    if (p - q).abs() > 1e-9 * p {
        return Err(Error::InvalidArgument(format!(
            "rank-one equivalence by diagonal scaling requires αβγ = α′β′γ′ (got {p} and {q})"
        )));
    }
    // μ = ln λ: μ1 − μ2 = d0, μ2 − μ3 = d1, μ3 − μ1 = d2, Σμ = 0
    let d0 = 0.5 * (to[0] / from[0]).ln();
    let d1 = 0.5 * (to[1] / from[1]).ln();
    let mu1 = (2.0 * d0 + d1) / 3.0;
    let mu2 = mu1 - d0;
    let mu3 = mu2 - d1;
    let lambda = Vector3::new(mu1.exp(), mu2.exp(), mu3.exp());
    EquivalenceMap::new(
        Matrix3::from_diagonal(&lambda),
        Matrix3::from_diagonal(&lambda.map(|l| 1.0 / l)),
    )
}
