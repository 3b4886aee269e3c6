//! Rank-one convexity certification.
//!
//! For a quadratic form, rank-one convexity (and hence quasiconvexity) is
//! `f(x ⊗ y) ≥ 0` for all `x, y`, i.e. the acoustic matrix `T(y)` is positive
//! semidefinite on the unit sphere. [`certify`] minimises the smallest
//! eigenvalue of `T(y)` over the sphere: a Fibonacci-lattice sweep followed
//! by multistart projected-gradient descent and an alternating
//! eigenvector polish.

use crate::eig3;
use crate::error::{Error, Result};
use crate::forms::{AcousticMatrix, QuadraticForm};
use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Eigenvalue gap below which the minimum is treated as degenerate.
const DEGENERATE_GAP: f64 = 1e-8;
/// Clustering radius for zero points, as the sine of the angle.
pub const CLUSTER_ANGLE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Points on the Fibonacci lattice.
    pub grid_size: usize,
    /// Descents started from the worst lattice points, and again from as
    /// many seeded random points.
    pub multistarts: usize,
    pub max_iter: usize,
    /// Certification tolerance on the normalised form.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_size: 10_000,
            multistarts: 50,
            max_iter: 2_000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 12 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least 12, got {}",
                self.grid_size
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// A unit pair `(x, y)` with `f(x ⊗ y) ≈ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroPoint {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    /// `f(x ⊗ y) > τ` on the unit sphere pair.
    Certified { min_value: f64, attaining_y: [f64; 3] },
    /// `f(x ⊗ y) < −τ` at the witness.
    Violated {
        witness_x: [f64; 3],
        witness_y: [f64; 3],
        value: f64,
    },
    /// Minimum within `[−τ, τ]`; the clustered points where it is attained.
    Marginal { min_value: f64, zero_points: Vec<ZeroPoint> },
}

impl Verdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }

    pub fn status(&self) -> &'static str {
        match self {
            Verdict::Certified { .. } => "certified",
            Verdict::Violated { .. } => "violated",
            Verdict::Marginal { .. } => "marginal",
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Verdict::Certified { min_value, .. } | Verdict::Marginal { min_value, .. } => *min_value,
            Verdict::Violated { value, .. } => *value,
        }
    }
}

/// Flat serialisation `{status, min_value, witnesses[], zero_points[]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub status: String,
    pub min_value: f64,
    pub witnesses: Vec<ZeroPoint>,
    pub zero_points: Vec<ZeroPoint>,
}

impl From<&Verdict> for VerdictSummary {
    fn from(v: &Verdict) -> Self {
        let (witnesses, zero_points) = match v {
            Verdict::Certified { min_value, attaining_y } => (
                vec![ZeroPoint {
                    x: [0.0; 3],
                    y: *attaining_y,
                    value: *min_value,
                }],
                vec![],
            ),
            Verdict::Violated {
                witness_x,
                witness_y,
                value,
            } => (
                vec![ZeroPoint {
                    x: *witness_x,
                    y: *witness_y,
                    value: *value,
                }],
                vec![],
            ),
            Verdict::Marginal { zero_points, .. } => (vec![], zero_points.clone()),
        };
        Self {
            status: v.status().to_string(),
            min_value: v.min_value(),
            witnesses,
            zero_points,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Normalisation applied before the search (max-abs coefficient).
    pub scale: f64,
    pub grid_min: f64,
    pub starts: usize,
    pub converged: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
}

/// Smallest eigenvalue of `T(y)` and a unit eigenvector.
pub fn min_eig(t: &AcousticMatrix, y: &Vector3<f64>) -> (f64, Vector3<f64>) {
    eig3::min_eig(&t.at(y))
}

pub fn det_acoustic(f: &QuadraticForm, y: &Vector3<f64>) -> f64 {
    f.acoustic_matrix().at(y).determinant()
}

/// Fibonacci lattice of `n` points on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Minimum of the smallest acoustic eigenvalue over an `n`-point lattice,
/// using a general iterative eigensolver and no local refinement.
pub fn brute_force_oracle(f: &QuadraticForm, n: usize) -> f64 {
    assert!(n >= 10, "oracle needs at least 10 lattice points");
    let t = f.acoustic_matrix();
    fibonacci_sphere(n)
        .iter()
        .map(|y| SymmetricEigen::new(t.at(y)).eigenvalues.min())
        .fold(f64::INFINITY, f64::min)
}

/// Sine of the angle between two unit vectors, up to sign.
fn sin_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm()
}

fn canonical_sign(v: &Vector3<f64>) -> Vector3<f64> {
    match v.iter().find(|c| c.abs() > 1e-3) {
        Some(c) if *c < 0.0 => -v,
        _ => *v,
    }
}

#[derive(Clone, Copy, Debug)]
struct Endpoint {
    y: Vector3<f64>,
    x: Vector3<f64>,
    value: f64,
    converged: bool,
}

struct Landscape {
    t: AcousticMatrix,
}

impl Landscape {
    fn eval(&self, y: &Vector3<f64>) -> (f64, Vector3<f64>) {
        min_eig(&self.t, y)
    }

    /// Tangential descent directions at `y` (Hellmann–Feynman gradient, or
    /// an averaged subgradient and its parts at a degenerate minimum).
    fn directions(&self, y: &Vector3<f64>) -> Vec<Vector3<f64>> {
        let ty = self.t.at(y);
        let (ev, vecs) = eig3::eig(&ty);
        let tangent = |v: &Vector3<f64>| {
            let g = self.t.grad_y(v, y);
            g - y * g.dot(y)
        };
        let g0 = tangent(&vecs[0]);
        let scale = ev[2].abs().max(ev[0].abs()).max(1e-300);
        if ev[1] - ev[0] < DEGENERATE_GAP * scale.max(1.0) {
            let g1 = tangent(&vecs[1]);
            vec![(g0 + g1) * 0.5, g0, g1]
        } else {
            vec![g0]
        }
    }

    fn descend(&self, start: &Vector3<f64>, max_iter: usize) -> Endpoint {
        let mut y = start.normalize();
        let (mut value, mut x) = self.eval(&y);
        let mut step: f64 = 0.1;
        let mut converged = false;
        'outer: for _ in 0..max_iter {
            let dirs = self.directions(&y);
            let mut moved = false;
            for g in &dirs {
                let gn = g.norm();
                if gn < 1e-15 {
                    continue;
                }
                let mut s = step.min(0.5 / gn);
                while s * gn > 1e-16 {
                    let cand = (y - g * s).normalize();
                    let (v, cx) = self.eval(&cand);
                    if v <= value - 1e-4 * s * gn * gn {
                        y = cand;
                        value = v;
                        x = cx;
                        step = 2.0 * s;
                        moved = true;
                        break;
                    }
                    s *= 0.5;
                }
                if moved {
                    break;
                }
            }
            if !moved {
                converged = true;
                break 'outer;
            }
        }
        let polished = self.polish(y, x, value);
        let refined = self.newton(polished);
        Endpoint { converged, ..refined }
    }

    /// Alternating exact minimisation over `x` and `y`; never increases the
    /// value.
    fn polish(&self, mut y: Vector3<f64>, mut x: Vector3<f64>, mut value: f64) -> Endpoint {
        for _ in 0..200 {
            let (_, ny) = eig3::min_eig(&self.t.x_matrix(&x));
            let (nv, nx) = self.eval(&ny);
            if nv > value {
                break;
            }
            let change = sin_angle(&ny, &y) + sin_angle(&nx, &x);
            y = ny;
            x = nx;
            value = nv;
            if change < 1e-15 {
                break;
            }
        }
        Endpoint {
            y,
            x,
            value,
            converged: true,
        }
    }
}

impl Landscape {
    fn biquadratic(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> f64 {
        x.dot(&(self.t.at(y) * x))
    }

    /// Riemannian Newton iteration for `(x, y) ↦ f(x ⊗ y)` on the product of
    /// unit spheres, with eigenvalue-modified Hessian. Converges linearly at
    /// degenerate (quartic) minima, where alternating minimisation stalls.
    fn newton(&self, start: Endpoint) -> Endpoint {
        let (mut x, mut y) = (start.x, start.y);
        let mut value = self.biquadratic(&x, &y);
        for _ in 0..100 {
            let ty = self.t.at(&y);
            let sx = self.t.x_matrix(&x);
            let gx = ty * x * 2.0;
            let gy = sx * y * 2.0;
            let mut hxy = Matrix3::zeros();
            for i in 0..3 {
                let mut row = Vector3::zeros();
                for j in 0..3 {
                    row += self.t.k[i][j] * y * x[j];
                }
                hxy.set_row(i, &(row * 4.0).transpose());
            }
            let u = [eig3::orthogonal(&x), x.cross(&eig3::orthogonal(&x))];
            let v = [eig3::orthogonal(&y), y.cross(&eig3::orthogonal(&y))];
            let basis = |k: usize| -> (Vector3<f64>, Vector3<f64>) {
                if k < 2 {
                    (u[k], Vector3::zeros())
                } else {
                    (Vector3::zeros(), v[k - 2])
                }
            };
            let mut h = Matrix4::zeros();
            let mut g = Vector4::zeros();
            for a in 0..4 {
                let (ax, ay) = basis(a);
                g[a] = ax.dot(&gx) + ay.dot(&gy);
                for b in 0..4 {
                    let (bx, by) = basis(b);
                    h[(a, b)] = 2.0 * ax.dot(&(ty * bx))
                        + 2.0 * ay.dot(&(sx * by))
                        + ax.dot(&(hxy * by))
                        + bx.dot(&(hxy * ay))
                        - if a == b { 2.0 * value } else { 0.0 };
                }
            }
            let eig = SymmetricEigen::new(h);
            let floor = 1e-12 * eig.eigenvalues.amax().max(1e-300);
            let mut step = Vector4::zeros();
            for k in 0..4 {
                let uk = eig.eigenvectors.column(k);
                step -= uk * (uk.dot(&g) / eig.eigenvalues[k].abs().max(floor));
            }
            let sn = step.norm();
            if !sn.is_finite() || sn < 1e-14 {
                break;
            }
            if sn > 0.25 {
                step *= 0.25 / sn;
            }
            let mut accepted = false;
            let mut s = 1.0;
            for _ in 0..20 {
                let nx = (x + (u[0] * step[0] + u[1] * step[1]) * s).normalize();
                let ny = (y + (v[0] * step[2] + v[1] * step[3]) * s).normalize();
                let nv = self.biquadratic(&nx, &ny);
                if nv <= value + 1e-15 {
                    x = nx;
                    y = ny;
                    value = nv;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let (lam, ex) = self.eval(&y);
        if lam <= start.value {
            Endpoint { y, x: ex, value: lam, converged: true }
        } else {
            start
        }
    }
}

fn to_arr(v: &Vector3<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
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

/// Lattice indices ordered by `(value, index)`, greedily thinned so that
/// chosen points are at least `sep` apart (up to sign).
fn worst_separated(grid: &[Vector3<f64>], values: &[f64], count: usize, sep: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    for i in order {
        if picked.len() >= count {
            break;
        }
        if picked.iter().all(|&j| sin_angle(&grid[i], &grid[j]) >= sep) {
            picked.push(i);
        }
    }
    picked
}

/// Clusters points with `|value| ≤ tol` up to sign of `x` and `y`.
fn cluster(endpoints: &[Endpoint], tol: f64, scale: f64) -> Vec<ZeroPoint> {
    let mut reps: Vec<Endpoint> = Vec::new();
    for e in endpoints.iter().filter(|e| e.value.abs() <= tol) {
        let found = reps
            .iter_mut()
            .find(|r| sin_angle(&r.y, &e.y) <= CLUSTER_ANGLE && sin_angle(&r.x, &e.x) <= CLUSTER_ANGLE);
        match found {
            Some(r) if e.value.abs() < r.value.abs() => *r = *e,
            Some(_) => {}
            None => reps.push(*e),
        }
    }
    reps.iter()
        .map(|r| ZeroPoint {
            x: to_arr(&canonical_sign(&r.x)),
            y: to_arr(&canonical_sign(&r.y)),
            value: r.value * scale,
        })
        .collect()
}

/// Full search with diagnostics.
pub fn search(f: &QuadraticForm, cfg: &SearchConfig) -> Result<SearchReport> {
    cfg.validate()?;
    let raw = f.acoustic_matrix();
    let mut diagnostics = Diagnostics {
        scale: f.max_abs(),
        ..Diagnostics::default()
    };
    if raw.max_abs() == 0.0 {
        diagnostics.notes.push("form vanishes identically on rank-one matrices".into());
        return Ok(SearchReport {
            verdict: Verdict::Marginal {
                min_value: 0.0,
                zero_points: vec![],
            },
            diagnostics,
        });
    }
    let scale = diagnostics.scale;
    let land = Landscape {
        t: (*f * (1.0 / scale)).acoustic_matrix(),
    };
    let tol = cfg.tol;

    let grid = fibonacci_sphere(cfg.grid_size);
    let evals: Vec<(f64, Vector3<f64>)> = grid.par_iter().map(|y| land.eval(y)).collect();
    let values: Vec<f64> = evals.iter().map(|e| e.0).collect();
    let (gi, gmin) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    diagnostics.grid_min = gmin * scale;
    if gmin < -tol {
        return Ok(SearchReport {
            verdict: Verdict::Violated {
                witness_x: to_arr(&evals[gi].1),
                witness_y: to_arr(&grid[gi]),
                value: gmin * scale,
            },
            diagnostics,
        });
    }

    let spacing = (4.0 * std::f64::consts::PI / cfg.grid_size as f64).sqrt();
    let mut starts: Vec<Vector3<f64>> = worst_separated(&grid, &values, cfg.multistarts, 2.0 * spacing)
        .into_iter()
        .map(|i| grid[i])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    starts.extend((0..cfg.multistarts).map(|_| random_unit(&mut rng)));

    let endpoints: Vec<Endpoint> = starts.par_iter().map(|s| land.descend(s, cfg.max_iter)).collect();
    diagnostics.starts = endpoints.len();
    diagnostics.converged = endpoints.iter().filter(|e| e.converged).count();

    let worst = endpoints
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, e)| match acc {
            Some((_, v)) if v <= e.value => acc,
            _ => Some((i, e.value)),
        });
    let (wi, wmin) = worst.unwrap_or((0, f64::INFINITY));
    if wmin < -tol {
        let e = &endpoints[wi];
        return Ok(SearchReport {
            verdict: Verdict::Violated {
                witness_x: to_arr(&e.x),
                witness_y: to_arr(&e.y),
                value: e.value * scale,
            },
            diagnostics,
        });
    }

    let bottom = wmin.min(gmin);
    let verdict = if bottom > tol {
        let y = if wmin <= gmin { endpoints[wi].y } else { grid[gi] };
        Verdict::Certified {
            min_value: bottom * scale,
            attaining_y: to_arr(&y),
        }
    } else {
        let zero_points = if diagnostics.converged == 0 {
            diagnostics.notes.push("no descent converged within max_iter; inconclusive".into());
            vec![]
        } else {
            cluster(&endpoints, tol, scale)
        };
        let off_diagonal = zero_points
            .iter()
            .filter(|z| {
                let a = z.y.map(f64::abs);
                (a[0] - a[1]).abs() > 1e-6 || (a[1] - a[2]).abs() > 1e-6
            })
            .count();
        if off_diagonal > 0 {
            diagnostics.notes.push(format!(
                "{off_diagonal} zero point(s) have y off the directions |y1| = |y2| = |y3|"
            ));
        }
        Verdict::Marginal {
            min_value: bottom * scale,
            zero_points,
        }
    };
    Ok(SearchReport { verdict, diagnostics })
}

/// Decides whether `f(x ⊗ y) ≥ 0`, up to the configured tolerance.
pub fn certify(f: &QuadraticForm, cfg: &SearchConfig) -> Result<Verdict> {
    search(f, cfg).map(|r| r.verdict)
}

/// Unit pairs `(x, y)` with `f(x ⊗ y) ≈ 0`, clustered up to sign.
pub fn zero_set(f: &QuadraticForm, cfg: &SearchConfig) -> Result<Vec<ZeroPoint>> {
    match certify(f, cfg)? {
        Verdict::Violated { value, .. } => Err(Error::NotRankOneConvex { value }),
        Verdict::Certified { .. } => Ok(vec![]),
        Verdict::Marginal { zero_points, .. } => Ok(zero_points),
    }
}

/// Principal 2x2 minors `(M11, M22, M33)` of a 3x3 matrix.
pub fn principal_minors(t: &Matrix3<f64>) -> [f64; 3] {
    let m = |a: usize, b: usize| t[(a, a)] * t[(b, b)] - t[(a, b)] * t[(b, a)];
    [m(1, 2), m(0, 2), m(0, 1)]
}
