//! Quadratic forms on 3x3 matrices, their biquadratic restriction to rank-one
//! matrices, the acoustic (y-)matrix, null-Lagrangians and the parametric
//! families used throughout the crate.
//!
//! Matrix entries are stored in the fixed order
//! `(11, 22, 33, 12, 23, 31, 21, 32, 13)`, so the first six entries are the
//! diagonal followed by the "cyclic" off-diagonal entries.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

pub type Mat9 = SMatrix<f64, 9, 9>;
pub type Vec9 = SVector<f64, 9>;

/// Relative tolerance for coefficient comparisons.
pub const COEFF_TOL: f64 = 1e-12;

/// `(row, column)` of each stored entry, zero based.
pub const VARS: [(usize, usize); 9] = [
    (0, 0),
    (1, 1),
    (2, 2),
    (0, 1),
    (1, 2),
    (2, 0),
    (1, 0),
    (2, 1),
    (0, 2),
];

/// Position of entry `(i, j)` in the storage order.
pub const fn var_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (1, 2) => 4,
        (2, 0) => 5,
        (1, 0) => 6,
        (2, 1) => 7,
        (0, 2) => 8,
        _ => panic!("matrix index out of range"),
    }
}

/// Label such as `"ξ21"` for diagnostics.
pub fn var_name(v: usize) -> String {
    let (i, j) = VARS[v];
    format!("ξ{}{}", i + 1, j + 1)
}

/// A 3x3 matrix stored in the canonical entry order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixVar(pub Vec9);

impl MatrixVar {
    pub fn zeros() -> Self {
        Self(Vec9::zeros())
    }

    pub fn identity() -> Self {
        Self::from_matrix(&Matrix3::identity())
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self(Vec9::from_fn(|v, _| {
            let (i, j) = VARS[v];
            m[(i, j)]
        }))
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (v, &(i, j)) in VARS.iter().enumerate() {
            m[(i, j)] = self.0[v];
        }
        m
    }

    /// The rank-one matrix `x ⊗ y`, entries `x_i y_j`.
    pub fn outer(x: &Vector3<f64>, y: &Vector3<f64>) -> Self {
        Self(Vec9::from_fn(|v, _| {
            let (i, j) = VARS[v];
            x[i] * y[j]
        }))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[var_index(i, j)]
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &MatrixVar) -> f64 {
        self.0.dot(&other.0)
    }
}

/// Signed cofactors of `ξ`, returned in the canonical entry order: entry
/// `(r, c)` of the result holds `(-1)^(r+c)` times the 2x2 minor obtained by
/// deleting row `r` and column `c`.
pub fn minors(xi: &MatrixVar) -> MatrixVar {
    let m = xi.to_matrix();
    let mut out = Vec9::zeros();
    for (v, &(r, c)) in VARS.iter().enumerate() {
        let (r1, r2) = others(r);
        let (c1, c2) = others(c);
        let det = m[(r1, c1)] * m[(r2, c2)] - m[(r1, c2)] * m[(r2, c1)];
        out[v] = if (r + c) % 2 == 0 { det } else { -det };
    }
    MatrixVar(out)
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Symmetric 9x9 matrices `N_v` with `ξᵀ N_v ξ = cof(ξ)_v`, in the canonical
/// entry order.
pub fn minor_matrices() -> [Mat9; 9] {
    let mut out = [Mat9::zeros(); 9];
    for (v, &(r, c)) in VARS.iter().enumerate() {
        let (r1, r2) = others(r);
        let (c1, c2) = others(c);
        let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
        let n = &mut out[v];
        let (a, b) = (var_index(r1, c1), var_index(r2, c2));
        n[(a, b)] += 0.5 * sign;
        n[(b, a)] += 0.5 * sign;
        let (a, b) = (var_index(r1, c2), var_index(r2, c1));
        n[(a, b)] -= 0.5 * sign;
        n[(b, a)] -= 0.5 * sign;
    }
    out
}

/// Coefficients of a linear combination of the nine signed cofactors, in the
/// canonical entry order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullLagrangianCoeffs(pub [f64; 9]);

impl NullLagrangianCoeffs {
    pub fn zeros() -> Self {
        Self([0.0; 9])
    }

    pub fn unit(v: usize) -> Self {
        let mut a = [0.0; 9];
        a[v] = 1.0;
        Self(a)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `α : cof(ξ)`.
    pub fn evaluate(&self, xi: &MatrixVar) -> f64 {
        let cof = minors(xi);
        self.0.iter().zip(cof.0.iter()).map(|(a, c)| a * c).sum()
    }

    pub fn matrix(&self) -> Mat9 {
        let ns = minor_matrices();
        let mut m = Mat9::zeros();
        for (a, n) in self.0.iter().zip(ns.iter()) {
            m += n * *a;
        }
        m
    }
}

/// `f(ξ) = ξᵀ M ξ` with `M` symmetric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticForm {
    m: Mat9,
}

impl QuadraticForm {
    /// Builds a form from any 9x9 matrix, keeping only its symmetric part.
    pub fn new(m: Mat9) -> Self {
        Self {
            m: (m + m.transpose()) * 0.5,
        }
    }

    pub fn zero() -> Self {
        Self { m: Mat9::zeros() }
    }

    /// `‖ξ‖²`.
    pub fn frobenius() -> Self {
        Self { m: Mat9::identity() }
    }

    /// Reads a row-major 9x9 array in the canonical entry order.
    pub fn from_rows(rows: &[[f64; 9]; 9]) -> Self {
        Self::new(Mat9::from_fn(|r, c| rows[r][c]))
    }

    pub fn to_rows(&self) -> [[f64; 9]; 9] {
        let mut out = [[0.0; 9]; 9];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = self.m[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Mat9 {
        &self.m
    }

    pub fn max_abs(&self) -> f64 {
        self.m.amax()
    }

    /// `(ℓ : ξ)²` for a linear form given by its coefficient matrix.
    pub fn square(linear: &MatrixVar) -> Self {
        Self {
            m: linear.0 * linear.0.transpose(),
        }
    }

    /// The rank-one square `(Σ a_i b_j ξ_ij)²`.
    pub fn rank_one_square(a: &Vector3<f64>, b: &Vector3<f64>) -> Self {
        Self::square(&MatrixVar::outer(a, b))
    }

    /// Cubic-symmetric tensor family: `T_iiii = α`, `T_iijj = β`,
    /// `T_ijij = T_ijji = γ` for `i ≠ j`.
    pub fn from_cubic(p: CubicParams) -> Self {
        let mut m = Mat9::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let (ii, jj) = (var_index(i, i), var_index(j, j));
                if i == j {
                    m[(ii, ii)] = p.alpha;
                } else {
                    m[(ii, jj)] = p.beta;
                    let (ij, ji) = (var_index(i, j), var_index(j, i));
                    m[(ij, ij)] = p.gamma;
                    m[(ij, ji)] = p.gamma;
                }
            }
        }
        Self::new(m)
    }

    /// Cyclic and axis-reflection symmetric family
    /// `a Σξ_ii² + b(ξ11ξ22 + ξ22ξ33 + ξ33ξ11) + c(ξ12² + ξ23² + ξ31²) + d(ξ21² + ξ32² + ξ13²)`.
    pub fn from_cyclic(p: CyclicParams) -> Self {
        let mut m = Mat9::zeros();
        for i in 0..3 {
            let ii = var_index(i, i);
            m[(ii, ii)] = p.a;
            let jj = var_index((i + 1) % 3, (i + 1) % 3);
            m[(ii, jj)] = p.b / 2.0;
            m[(jj, ii)] = p.b / 2.0;
        }
        for v in 3..6 {
            m[(v, v)] = p.c;
        }
        for v in 6..9 {
            m[(v, v)] = p.d;
        }
        Self::new(m)
    }

    /// The extremal, non-polyconvex form
    /// `ξ11² + ξ22² + ξ33² − 2ξ11ξ22 − 2ξ22ξ33 − 2ξ33ξ11 + ξ12² + ξ23² + ξ31²`.
    pub fn extremal_q() -> Self {
        Self::from_cyclic(CyclicParams {
            a: 1.0,
            b: -2.0,
            c: 1.0,
            d: 0.0,
        })
    }

    /// The principal part of [`extremal_q`](Self::extremal_q) plus
    /// `α ξ12² + β ξ23² + γ ξ31²`.
    pub fn corollary_q(alpha: f64, beta: f64, gamma: f64) -> Self {
        let mut q = Self::extremal_q();
        q.m[(3, 3)] = alpha;
        q.m[(4, 4)] = beta;
        q.m[(5, 5)] = gamma;
        q
    }

    pub fn null_lagrangian(alpha: &NullLagrangianCoeffs) -> Self {
        Self { m: alpha.matrix() }
    }

    pub fn evaluate(&self, xi: &MatrixVar) -> f64 {
        xi.0.dot(&(self.m * xi.0))
    }

    /// `f(x ⊗ y)`.
    pub fn evaluate_rank_one(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> f64 {
        self.evaluate(&MatrixVar::outer(x, y))
    }

    /// `J = Mξ`, so that `Σ J_ij ξ_ij = f(ξ)`.
    pub fn flux(&self, xi: &MatrixVar) -> MatrixVar {
        MatrixVar(self.m * xi.0)
    }

    pub fn acoustic_matrix(&self) -> AcousticMatrix {
        let mut k = [[Matrix3::zeros(); 3]; 3];
        for (i, row) in k.iter_mut().enumerate() {
            for (j, kij) in row.iter_mut().enumerate() {
                *kij = Matrix3::from_fn(|a, b| {
                    let lhs = self.m[(var_index(i, a), var_index(j, b))];
                    let rhs = self.m[(var_index(i, b), var_index(j, a))];
                    0.5 * (lhs + rhs)
                });
            }
        }
        AcousticMatrix { k }
    }

    /// Coefficients of `f(x ⊗ y)` in the monomials `x_i x_j y_k y_l`.
    pub fn to_biquadratic(&self) -> Biquadratic {
        let mut c = [[0.0; 6]; 6];
        for i in 0..3 {
            for k in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        let coeff = self.m[(var_index(i, k), var_index(j, l))];
                        c[pair_index(i, j)][pair_index(k, l)] += coeff;
                    }
                }
            }
        }
        Biquadratic { c }
    }

    /// Least-squares projection of `M` onto the span of the cofactor
    /// matrices. Returns the coefficients and the max-abs entry of what is
    /// left over.
    pub fn project_onto_minors(&self) -> (NullLagrangianCoeffs, f64) {
        let ns = minor_matrices();
        let mut alpha = [0.0; 9];
        let mut rest = self.m;
        for (a, n) in alpha.iter_mut().zip(ns.iter()) {
            // the cofactor matrices have disjoint supports
            *a = self.m.dot(n) / n.dot(n);
            rest -= n * *a;
        }
        (NullLagrangianCoeffs(alpha), rest.amax())
    }

    /// Variables that `f` does not involve at all (zero row in `M`).
    pub fn absent_variables(&self) -> Vec<usize> {
        (0..9).filter(|&v| self.m.row(v).iter().all(|&x| x == 0.0)).collect()
    }

    /// Coefficientwise comparison with tolerance `COEFF_TOL` times the larger
    /// max-abs coefficient.
    pub fn approx_eq(&self, other: &QuadraticForm) -> bool {
        let scale = self.max_abs().max(other.max_abs());
        (self.m - other.m).amax() <= COEFF_TOL * scale
    }

    /// Max-abs asymmetry of a raw coefficient matrix.
    pub fn asymmetry(raw: &Mat9) -> f64 {
        (raw - raw.transpose()).amax()
    }
}

impl Add for QuadraticForm {
    type Output = QuadraticForm;
    fn add(self, rhs: QuadraticForm) -> QuadraticForm {
        QuadraticForm { m: self.m + rhs.m }
    }
}

impl Sub for QuadraticForm {
    type Output = QuadraticForm;
    fn sub(self, rhs: QuadraticForm) -> QuadraticForm {
        QuadraticForm { m: self.m - rhs.m }
    }
}

impl Mul<f64> for QuadraticForm {
    type Output = QuadraticForm;
    fn mul(self, s: f64) -> QuadraticForm {
        QuadraticForm { m: self.m * s }
    }
}

impl Neg for QuadraticForm {
    type Output = QuadraticForm;
    fn neg(self) -> QuadraticForm {
        QuadraticForm { m: -self.m }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CubicParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CyclicParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }
}

/// Index of an unordered pair `{i, j}` in the order `(11, 22, 33, 12, 23, 13)`.
pub const fn pair_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) | (1, 0) => 3,
        (1, 2) | (2, 1) => 4,
        (0, 2) | (2, 0) => 5,
        _ => panic!("pair index out of range"),
    }
}

pub const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

/// `B(x, y) = Σ c[{i,j}][{k,l}] x_i x_j y_k y_l`: rows index the `x` pair,
/// columns the `y` pair. The matrix is symmetric exactly when `B` has swap
/// symmetry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Biquadratic {
    pub c: [[f64; 6]; 6],
}

/// Symmetries of a biquadratic that can be checked coefficientwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    /// `f(x, y) = f(y, x)`
    Swap,
    /// `f(x1,x2,x3,y1,y2,y3) = f(x2,x3,x1,y2,y3,y1)`
    Cyclic,
    /// invariance under flipping the sign of `x_i` and `y_i` together
    AxisReflection,
}

impl Biquadratic {
    pub fn zero() -> Self {
        Self { c: [[0.0; 6]; 6] }
    }

    pub fn evaluate(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> f64 {
        let mut total = 0.0;
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            let xp = x[i] * x[j];
            for (q, &(k, l)) in PAIRS.iter().enumerate() {
                total += self.c[p][q] * xp * y[k] * y[l];
            }
        }
        total
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_diff(&self, other: &Biquadratic) -> f64 {
        self.c
            .iter()
            .flatten()
            .zip(other.c.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn approx_eq(&self, other: &Biquadratic) -> bool {
        let scale = self.max_abs().max(other.max_abs());
        self.max_diff(other) <= COEFF_TOL * scale
    }

    /// Places the coefficient of `x_i x_j y_k y_l` on `ξ_ik ξ_jl`.
    pub fn canonical_lift(&self) -> QuadraticForm {
        let mut m = Mat9::zeros();
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            for (q, &(k, l)) in PAIRS.iter().enumerate() {
                let c = self.c[p][q];
                let (a, b) = (var_index(i, k), var_index(j, l));
                if a == b {
                    m[(a, a)] += c;
                } else {
                    m[(a, b)] += 0.5 * c;
                    m[(b, a)] += 0.5 * c;
                }
            }
        }
        QuadraticForm::new(m)
    }

    /// `(x, y) ↦ B(Ax, By)`.
    pub fn pullback(&self, a: &Matrix3<f64>, b: &Matrix3<f64>) -> Biquadratic {
        // ξ ↦ A ξ Bᵀ maps x⊗y to (Ax)⊗(By)
        let l = Mat9::from_fn(|row, col| {
            let (p, q) = VARS[row];
            let (i, j) = VARS[col];
            a[(p, i)] * b[(q, j)]
        });
        let lifted = self.canonical_lift();
        QuadraticForm::new(l.transpose() * lifted.matrix() * l).to_biquadratic()
    }

    pub fn has_symmetry(&self, kind: Symmetry) -> bool {
        match kind {
            Symmetry::Swap => {
                let mut t = *self;
                for p in 0..6 {
                    for q in 0..6 {
                        t.c[p][q] = self.c[q][p];
                    }
                }
                self.approx_eq(&t)
            }
            Symmetry::Cyclic => {
                let shift = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
                self.approx_eq(&self.pullback(&shift, &shift))
            }
            Symmetry::AxisReflection => (0..3).all(|k| {
                let mut r = Matrix3::identity();
                r[(k, k)] = -1.0;
                self.approx_eq(&self.pullback(&r, &r))
            }),
        }
    }
}

/// Free-function form of [`Biquadratic::has_symmetry`].
pub fn symmetry_check(b: &Biquadratic, kind: Symmetry) -> bool {
    b.has_symmetry(kind)
}

/// The y-matrix `T(y)` with `x T(y) xᵀ = f(x ⊗ y)`. Entry `(i, j)` is the
/// quadratic form `yᵀ K_ij y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcousticMatrix {
    pub k: [[Matrix3<f64>; 3]; 3],
}

impl AcousticMatrix {
    pub fn at(&self, y: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| y.dot(&(self.k[i][j] * y)))
    }

    /// Gradient of `y ↦ x T(y) xᵀ`, i.e. `2 S(x) y` where `S(x)` is the
    /// x-matrix.
    pub fn grad_y(&self, x: &Vector3<f64>, y: &Vector3<f64>) -> Vector3<f64> {
        self.x_matrix(x) * y * 2.0
    }

    /// `S(x)` with `y S(x) yᵀ = f(x ⊗ y)`.
    pub fn x_matrix(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let mut s = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                s += self.k[i][j] * (x[i] * x[j]);
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.k.iter().flatten().fold(0.0, |m, k| m.max(k.amax()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn random_form(rng: &mut ChaCha8Rng) -> QuadraticForm {
        QuadraticForm::new(Mat9::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn index_tables_agree() {
        for (v, &(i, j)) in VARS.iter().enumerate() {
            assert_eq!(var_index(i, j), v);
        }
        for (p, &(i, j)) in PAIRS.iter().enumerate() {
            assert_eq!(pair_index(i, j), p);
            assert_eq!(pair_index(j, i), p);
        }
        assert_eq!(var_name(6), "ξ21");
    }

    #[test]
    fn q_examples() {
        let q = QuadraticForm::extremal_q();
        assert_eq!(q.evaluate(&MatrixVar::identity()), -3.0);
        assert_eq!(q.evaluate(&MatrixVar::zeros()), 0.0);
        let mut xi = Matrix3::identity();
        xi[(0, 1)] = 1.0;
        assert_eq!(q.evaluate(&MatrixVar::from_matrix(&xi)), -2.0);
        // the symmetric six-vector (11, 22, 33, 12, 23, 31) is a prefix of the storage order
        let xi6 = MatrixVar(Vec9::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.0, 0.0, 0.0]));
        let expected = 1.0 + 4.0 + 9.0 - 2.0 * (2.0 + 6.0 + 3.0) + 16.0 + 25.0 + 36.0;
        assert_eq!(q.evaluate(&xi6), expected);
        assert!(QuadraticForm::corollary_q(1.0, 1.0, 1.0).approx_eq(&q));
    }

    #[test]
    fn cubic_rank_one_values() {
        let (a, b, g) = (1.3, -0.4, 0.7);
        let f = QuadraticForm::from_cubic(CubicParams::new(a, b, g));
        let e = |k| Vector3::ith(k, 1.0);
        assert!((f.evaluate_rank_one(&e(0), &e(0)) - a).abs() < 1e-15);
        assert!((f.evaluate_rank_one(&e(0), &e(1)) - g).abs() < 1e-15);
        let ones = Vector3::new(1.0, 1.0, 1.0);
        let expected = 3.0 * a + 6.0 * (b + g) + 6.0 * g;
        assert!((f.evaluate_rank_one(&ones, &ones) - expected).abs() < 1e-13);

        // (1, 1, 0) is (tr ξ)²
        let f = QuadraticForm::from_cubic(CubicParams::new(1.0, 1.0, 0.0));
        let trace = MatrixVar::identity();
        assert!(f.approx_eq(&QuadraticForm::square(&trace)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (x, y) = (unit(&mut rng), unit(&mut rng));
            assert!((f.evaluate_rank_one(&x, &y) - x.dot(&y).powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn acoustic_matrix_of_q() {
        let t = QuadraticForm::extremal_q().acoustic_matrix();
        let y = Vector3::new(0.3, -1.2, 2.0);
        let (y1, y2, y3) = (y[0], y[1], y[2]);
        let expected = Matrix3::new(
            y1 * y1 + y2 * y2,
            -y1 * y2,
            -y1 * y3,
            -y1 * y2,
            y2 * y2 + y3 * y3,
            -y2 * y3,
            -y1 * y3,
            -y2 * y3,
            y3 * y3 + y1 * y1,
        );
        assert!((t.at(&y) - expected).amax() < 1e-14);
        assert_eq!(QuadraticForm::zero().acoustic_matrix().at(&y), Matrix3::zeros());
    }

    #[test]
    fn acoustic_matrix_of_cubic() {
        let (a, b, g) = (0.9, 0.2, -0.3);
        let t = QuadraticForm::from_cubic(CubicParams::new(a, b, g)).acoustic_matrix();
        let y = Vector3::new(-0.5, 0.8, 1.7);
        let (y1, y2, y3) = (y[0], y[1], y[2]);
        let bg = b + g;
        let expected = Matrix3::new(
            a * y1 * y1 + g * (y2 * y2 + y3 * y3),
            bg * y1 * y2,
            bg * y1 * y3,
            bg * y1 * y2,
            a * y2 * y2 + g * (y3 * y3 + y1 * y1),
            bg * y2 * y3,
            bg * y1 * y3,
            bg * y2 * y3,
            a * y3 * y3 + g * (y1 * y1 + y2 * y2),
        );
        assert!((t.at(&y) - expected).amax() < 1e-14);
    }

    #[test]
    fn acoustic_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let forms = [
            QuadraticForm::extremal_q(),
            QuadraticForm::from_cubic(CubicParams::new(1.0, -0.3, 0.4)),
            QuadraticForm::from_cyclic(CyclicParams::new(0.5, 1.0, -2.0, 0.3)),
            random_form(&mut rng),
        ];
        for f in forms {
            let t = f.acoustic_matrix();
            let scale = 1.0 + f.max_abs();
            for _ in 0..10_000 {
                let (x, y) = (unit(&mut rng), unit(&mut rng));
                let ty = t.at(&y);
                assert!((ty - ty.transpose()).amax() == 0.0);
                let direct = f.evaluate_rank_one(&x, &y);
                assert!((direct - x.dot(&(ty * x))).abs() <= 1e-12 * scale);
                assert!((direct - y.dot(&(t.x_matrix(&x) * y))).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn minors_and_null_lagrangians() {
        let cof = minors(&MatrixVar::identity());
        assert_eq!(cof.0.as_slice(), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let id = MatrixVar::identity();
        assert_eq!(QuadraticForm::null_lagrangian(&NullLagrangianCoeffs::unit(0)).evaluate(&id), 1.0);

        // cofactor matrix matches nalgebra's adjugate (transposed cofactors)
        let m = Matrix3::new(1.0, 2.0, -1.0, 0.5, 3.0, 2.0, -2.0, 1.0, 4.0);
        let cof = minors(&MatrixVar::from_matrix(&m)).to_matrix();
        let adj = m.try_inverse().unwrap() * m.determinant();
        assert!((cof - adj.transpose()).amax() < 1e-12);

        let ns = minor_matrices();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let xi = MatrixVar(Vec9::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
            let cof = minors(&xi);
            for v in 0..9 {
                assert!((xi.0.dot(&(ns[v] * xi.0)) - cof.0[v]).abs() < 1e-14);
            }
        }
        let total: f64 = ns.iter().map(|n| id.0.dot(&(n * id.0))).sum();
        assert_eq!(total, 3.0);
    }

    #[test]
    fn null_lagrangians_vanish_on_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alpha = NullLagrangianCoeffs(std::array::from_fn(|_| rng.gen_range(-2.0..2.0)));
        let n = QuadraticForm::null_lagrangian(&alpha);
        for _ in 0..100_000 {
            let x = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let y = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let scale = x.norm_squared() * y.norm_squared() * alpha.max_abs();
            assert!(n.evaluate_rank_one(&x, &y).abs() <= 1e-12 * scale.max(1e-300));
        }
        assert_eq!(n.to_biquadratic().max_abs(), 0.0);
    }

    #[test]
    fn lift_is_right_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let f = random_form(&mut rng);
            let b = f.to_biquadratic();
            let lifted = b.canonical_lift();
            assert!(lifted.to_biquadratic().approx_eq(&b));
            let (_, residual) = (f - lifted).project_onto_minors();
            assert!(residual <= 1e-12);
        }
        let q = QuadraticForm::extremal_q();
        assert!(q.to_biquadratic().canonical_lift().approx_eq(&q));
        let (alpha, residual) = q.project_onto_minors();
        assert_eq!(alpha.max_abs(), 1.0);
        assert!(residual > 0.0);
    }

    #[test]
    fn cubic_biquadratic_coefficients() {
        let (a, b, g) = (1.5, -0.25, 0.75);
        let bq = QuadraticForm::from_cubic(CubicParams::new(a, b, g)).to_biquadratic();
        let mut expected = Biquadratic::zero();
        for i in 0..3 {
            expected.c[i][i] = a;
            for j in 0..3 {
                if i != j {
                    expected.c[pair_index(i, i)][pair_index(j, j)] = g;
                }
            }
        }
        for p in 3..6 {
            expected.c[p][p] = 2.0 * (b + g);
        }
        assert!(bq.approx_eq(&expected), "{bq:?}");
    }

    #[test]
    fn symmetry_examples() {
        let bq = QuadraticForm::extremal_q().to_biquadratic();
        assert!(bq.has_symmetry(Symmetry::Cyclic));
        assert!(bq.has_symmetry(Symmetry::AxisReflection));
        assert!(!bq.has_symmetry(Symmetry::Swap));
        let cubic = QuadraticForm::from_cubic(CubicParams::new(1.0, 2.0, 3.0)).to_biquadratic();
        for kind in [Symmetry::Swap, Symmetry::Cyclic, Symmetry::AxisReflection] {
            assert!(symmetry_check(&cubic, kind));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let generic = random_form(&mut rng).to_biquadratic();
        for kind in [Symmetry::Swap, Symmetry::Cyclic, Symmetry::AxisReflection] {
            assert!(!generic.has_symmetry(kind));
        }
    }

    #[test]
    fn cyclic_with_equal_cd_is_cubic() {
        let (a, b, c) = (0.7, -1.1, 0.4);
        let cyc = QuadraticForm::from_cyclic(CyclicParams::new(a, b, c, c)).to_biquadratic();
        let cub = QuadraticForm::from_cubic(CubicParams::new(a, b / 2.0 - c, c)).to_biquadratic();
        assert!(cyc.approx_eq(&cub));
    }

    #[test]
    fn flux_of_q() {
        let q = QuadraticForm::extremal_q();
        let m = Matrix3::new(0.3, 1.1, -0.7, 2.0, -0.4, 0.9, 1.3, 0.2, -1.5);
        let xi = MatrixVar::from_matrix(&m);
        let j = q.flux(&xi).to_matrix();
        let expected = Matrix3::new(
            m[(0, 0)] - m[(1, 1)] - m[(2, 2)],
            m[(0, 1)],
            0.0,
            0.0,
            m[(1, 1)] - m[(2, 2)] - m[(0, 0)],
            m[(1, 2)],
            m[(2, 0)],
            0.0,
            m[(2, 2)] - m[(0, 0)] - m[(1, 1)],
        );
        assert!((j - expected).amax() < 1e-15);
        let j = q.flux(&MatrixVar::identity());
        assert_eq!(j.to_matrix(), -Matrix3::identity());
        assert_eq!(j.dot(&MatrixVar::identity()), -3.0);
    }

    #[test]
    fn pullback_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = random_form(&mut rng).to_biquadratic();
        let m = || Matrix3::from_fn(|_, _| rand::random::<f64>() - 0.5) + Matrix3::identity();
        let (a1, b1, a2, b2) = (m(), m(), m(), m());
        let two_step = b.pullback(&a1, &b1).pullback(&a2, &b2);
        let composed = b.pullback(&(a1 * a2), &(b1 * b2));
        assert!(two_step.max_diff(&composed) <= 1e-12 * two_step.max_abs().max(1.0));
        let x = Vector3::new(0.2, -0.6, 1.0);
        let y = Vector3::new(1.4, 0.1, -0.3);
        let direct = b.evaluate(&(a1 * x), &(b1 * y));
        assert!((b.pullback(&a1, &b1).evaluate(&x, &y) - direct).abs() < 1e-12);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn coeffs() -> impl Strategy<Value = [f64; 9]> {
            proptest::array::uniform9(-3.0f64..3.0)
        }

        proptest! {
            #[test]
            fn adding_null_lagrangian_keeps_biquadratic(rows in proptest::array::uniform9(coeffs()), alpha in coeffs()) {
                let f = QuadraticForm::from_rows(&rows);
                let g = f + QuadraticForm::null_lagrangian(&NullLagrangianCoeffs(alpha));
                let (bf, bg) = (f.to_biquadratic(), g.to_biquadratic());
                prop_assert!(bf.max_diff(&bg) <= 1e-12 * bf.max_abs().max(1.0));
            }

            #[test]
            fn flux_pairs_to_value(rows in proptest::array::uniform9(coeffs()), xi in coeffs()) {
                let f = QuadraticForm::from_rows(&rows);
                let xi = MatrixVar(Vec9::from_column_slice(&xi));
                let value = f.evaluate(&xi);
                let paired = f.flux(&xi).dot(&xi);
                prop_assert!((value - paired).abs() <= 1e-12 * (1.0 + value.abs()));
            }
        }
    }
}
