//! Mixed Hessians, real Hessians and their congruence, exact determinants, numeric ranks.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::mixedpoly::{MixedPolynomial, RealPoly};
use crate::scalar::ComplexScalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HessianError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("determinant size {0} exceeds the guard of 6")]
    TooLarge(usize),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("pencil hypothesis violated: A + iB is numerically singular")]
    SingularPencil,
    #[error("no regular value among {0} samples")]
    NoRegularValue(usize),
    #[error("polynomial is not holomorphic")]
    NotHolomorphic,
    #[error("expected {expected} variables, got {got}")]
    VariableCount { expected: usize, got: usize },
}

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Rectangular matrix of mixed polynomials sharing one variable count.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<MixedPolynomial>,
}

impl PolyMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> MixedPolynomial) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        PolyMatrix { rows, cols, entries }
    }

    pub fn get(&self, r: usize, c: usize) -> &MixedPolynomial {
        &self.entries[r * self.cols + c]
    }

    pub fn n_vars(&self) -> usize {
        self.entries.first().map(|e| e.n()).unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }

    pub fn mul(&self, other: &PolyMatrix) -> PolyMatrix {
        assert_eq!(self.cols, other.rows);
        let n = self.n_vars().max(other.n_vars());
        PolyMatrix::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols).fold(MixedPolynomial::zero(n), |acc, k| acc.add(&self.get(r, k).mul(other.get(k, c))))
        })
    }

    pub fn transpose(&self) -> PolyMatrix {
        PolyMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn evaluate(&self, w: &[Complex64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).evaluate(w).expect("dimension"))
    }

    /// Row-major canonical strings.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c).to_string()).collect()).collect()
    }
}

/// `H(P)` with rows and columns ordered `(z_1..z_n, zbar_1..zbar_n)`.
pub fn mixed_hessian(p: &MixedPolynomial) -> PolyMatrix {
    let size = 2 * p.n();
    let first: Vec<MixedPolynomial> = (0..size).map(|a| p.d_formal(a)).collect();
    PolyMatrix::from_fn(size, size, |a, b| first[a].d_formal(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Re,
    Im,
}

/// Square matrix of exact real polynomials in `(x_1..x_n, y_1..y_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPolyMatrix {
    pub size: usize,
    entries: Vec<RealPoly>,
}

impl RealPolyMatrix {
    pub fn get(&self, r: usize, c: usize) -> &RealPoly {
        &self.entries[r * self.size + c]
    }

    /// Numeric value at the real point `(x, y)` of `w`.
    pub fn evaluate(&self, w: &[Complex64]) -> DMatrix<f64> {
        let point: Vec<f64> = w.iter().map(|z| z.re).chain(w.iter().map(|z| z.im)).collect();
        DMatrix::from_fn(self.size, self.size, |r, c| self.get(r, c).evaluate(&point))
    }
}

pub fn real_hessian_of(poly: &RealPoly) -> RealPolyMatrix {
    let size = poly.nvars();
    let first: Vec<RealPoly> = (0..size).map(|a| poly.derivative(a)).collect();
    let mut entries = Vec::with_capacity(size * size);
    for a in 0..size {
        for b in 0..size {
            entries.push(first[a].derivative(b));
        }
    }
    RealPolyMatrix { size, entries }
}

pub fn real_hessian(p: &MixedPolynomial, part: Part) -> RealPolyMatrix {
    let pair = p.realize();
    match part {
        Part::Re => real_hessian_of(&pair.re_part),
        Part::Im => real_hessian_of(&pair.im_part),
    }
}

/// Change of basis from real coordinates `(x, y)` to formal coordinates `(z, zbar)`:
/// column `x_j` is `e_{z_j} + e_{zbar_j}` and column `y_j` is `i e_{z_j} - i e_{zbar_j}`.
pub fn congruence_basis(n: usize) -> Vec<Vec<ComplexScalar>> {
    let size = 2 * n;
    let mut t = vec![vec![ComplexScalar::zero(); size]; size];
    for j in 0..n {
        t[j][j] = ComplexScalar::one();
        t[n + j][j] = ComplexScalar::one();
        t[j][n + j] = ComplexScalar::i();
        t[n + j][n + j] = -ComplexScalar::i();
    }
    t
}

#[derive(Clone, Debug)]
pub struct CongruenceReport {
    /// Rows indexed by formal coordinates, columns by real coordinates.
    pub basis: Vec<Vec<ComplexScalar>>,
    /// Entry-wise `T^T H(P) T - (H(Re P) + i H(Im P))`, split into real and imaginary parts.
    pub difference_re: Vec<RealPoly>,
    pub difference_im: Vec<RealPoly>,
}

impl CongruenceReport {
    pub fn is_exact(&self) -> bool {
        self.difference_re.iter().chain(&self.difference_im).all(RealPoly::is_zero)
    }
}

/// Checks `H(Re P) + i H(Im P) = T^T H(P) T` exactly.
pub fn congruence_witness(p: &MixedPolynomial) -> CongruenceReport {
    let n = p.n();
    let size = 2 * n;
    let basis = congruence_basis(n);
    let t = PolyMatrix::from_fn(size, size, |r, c| MixedPolynomial::constant(n, basis[r][c].clone()));
    let combined = t.transpose().mul(&mixed_hessian(p)).mul(&t);
    let h_re = real_hessian(p, Part::Re);
    let h_im = real_hessian(p, Part::Im);
    let mut difference_re = Vec::with_capacity(size * size);
    let mut difference_im = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let real = combined.get(r, c).realize();
            difference_re.push(real.re_part.sub(h_re.get(r, c)));
            difference_im.push(real.im_part.sub(h_im.get(r, c)));
        }
    }
    CongruenceReport { basis, difference_re, difference_im }
}

/// Exact determinant by Laplace expansion memoized on column subsets.
pub fn determinant(m: &PolyMatrix) -> Result<MixedPolynomial, HessianError> {
    if m.rows != m.cols {
        return Err(HessianError::NotSquare { rows: m.rows, cols: m.cols });
    }
    if m.rows > 6 {
        return Err(HessianError::TooLarge(m.rows));
    }
    let n = m.n_vars();
    if m.rows == 0 {
        return Ok(MixedPolynomial::one(n));
    }
    let mut memo: HashMap<u32, MixedPolynomial> = HashMap::new();
    Ok(minor(m, 0, (1u32 << m.cols) - 1, &mut memo))
}

fn minor(m: &PolyMatrix, row: usize, cols: u32, memo: &mut HashMap<u32, MixedPolynomial>) -> MixedPolynomial {
    let n = m.n_vars();
    if row == m.rows {
        return MixedPolynomial::one(n);
    }
    if let Some(v) = memo.get(&cols) {
        return v.clone();
    }
    let mut acc = MixedPolynomial::zero(n);
    let mut sign_positive = true;
    for c in 0..m.cols {
        if cols & (1 << c) == 0 {
            continue;
        }
        let entry = m.get(row, c);
        if !entry.is_zero() {
            let sub = minor(m, row + 1, cols & !(1 << c), memo);
            let term = entry.mul(&sub);
            acc = if sign_positive { acc.add(&term) } else { acc.sub(&term) };
        }
        sign_positive = !sign_positive;
    }
    memo.insert(cols, acc.clone());
    acc
}

/// Singular values above `tol` times the largest.
pub fn numeric_rank(m: &DMatrix<Complex64>, tol: f64) -> Result<usize, HessianError> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(HessianError::NonFinite);
    }
    let sv = m.clone().singular_values();
    Ok(rank_from_singular_values(sv.as_slice(), tol))
}

pub fn numeric_rank_real(m: &DMatrix<f64>, tol: f64) -> Result<usize, HessianError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(HessianError::NonFinite);
    }
    let sv = m.clone().singular_values();
    Ok(rank_from_singular_values(sv.as_slice(), tol))
}

pub fn rank_from_singular_values(sv: &[f64], tol: f64) -> usize {
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

/// Smallest-magnitude `u` in `0, 1, -1, 2, -2, ..` with `A + uB` nonsingular.
pub fn pencil_regular_value(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<f64, HessianError> {
    let dim = a.nrows();
    if a.ncols() != dim || b.nrows() != dim || b.ncols() != dim {
        return Err(HessianError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let combined = DMatrix::from_fn(dim, dim, |r, c| Complex64::new(a[(r, c)], b[(r, c)]));
    if numeric_rank(&combined, tol)? < dim {
        return Err(HessianError::SingularPencil);
    }
    let samples = dim + 2;
    for k in 0..samples {
        let u = if k % 2 == 1 { k.div_ceil(2) as f64 } else { -((k / 2) as f64) };
        let m = a + b * u;
        if numeric_rank_real(&m, tol)? == dim {
            return Ok(u + 0.0);
        }
    }
    Err(HessianError::NoRegularValue(samples))
}

/// Target recombination `(w_1, w_2) -> (w_1, w_1 + u w_2)` applied to `P = Re P + i Im P`.
pub fn recombine_target(p: &MixedPolynomial, u: &ComplexScalar) -> MixedPolynomial {
    // Re P = (P + conj P)/2, Im P = (P - conj P)/(2i)
    let half = ComplexScalar::from_ratio(1, 2);
    let minus_half_i = &ComplexScalar::i() * &ComplexScalar::from_ratio(-1, 2);
    let re = p.add(&p.conj()).scale(&half);
    let im = p.sub(&p.conj()).scale(&minus_half_i);
    re.add(&re.add(&im.scale(u)).scale(&ComplexScalar::i()))
}

/// Complex Hessian determinant `g_11 g_22 - g_12^2` of a holomorphic `g(z_1, z_2)`.
pub fn holomorphic_hessian_det(g: &MixedPolynomial) -> Result<(MixedPolynomial, bool), HessianError> {
    if g.n() != 2 {
        return Err(HessianError::VariableCount { expected: 2, got: g.n() });
    }
    if !g.is_holomorphic() {
        return Err(HessianError::NotHolomorphic);
    }
    let g11 = g.dz(0).dz(0);
    let g22 = g.dz(1).dz(1);
    let g12 = g.dz(0).dz(1);
    let det = g11.mul(&g22).sub(&g12.mul(&g12));
    let vanishes = det.is_zero();
    Ok((det, vanishes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn z(n: usize, j: usize) -> MixedPolynomial {
        MixedPolynomial::var(n, j)
    }

    fn zb(n: usize, j: usize) -> MixedPolynomial {
        MixedPolynomial::conj_var(n, j)
    }

    fn k(v: i64) -> MixedPolynomial {
        MixedPolynomial::constant(1, ComplexScalar::from(v))
    }

    #[test]
    fn hessian_examples() {
        let h = mixed_hessian(&z(1, 0).mul(&zb(1, 0)));
        assert_eq!(h.get(0, 0), &MixedPolynomial::zero(1));
        assert_eq!(h.get(0, 1), &k(1));
        assert_eq!(h.get(1, 0), &k(1));
        let h2 = mixed_hessian(&z(1, 0).pow(2));
        assert_eq!(h2.get(0, 0), &k(2));
        assert!(h2.get(1, 1).is_zero());
    }

    #[test]
    fn product_layout_has_conjugate_hessian_block() {
        let f = z(2, 0).pow(4).add(&z(2, 1).pow(4));
        let g = z(2, 0).pow(2).add(&z(2, 1).pow(3));
        let p = f.mul(&g.conj());
        let h = mixed_hessian(&p);
        for a in 0..2 {
            for b in 0..2 {
                let expect = f.mul(&g.dz(a).dz(b).conj());
                assert_eq!(h.get(2 + a, 2 + b), &expect);
            }
        }
        assert!(h.is_symmetric());
    }

    #[test]
    fn real_hessian_examples() {
        let p = z(1, 0).mul(&zb(1, 0));
        let m = real_hessian(&p, Part::Re).evaluate(&[Complex64::new(0.3, 0.2)]);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        let sq = z(1, 0).pow(2);
        let im = real_hessian(&sq, Part::Im).evaluate(&[Complex64::new(0.0, 0.0)]);
        assert_eq!(im, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
        let re = real_hessian(&sq, Part::Re).evaluate(&[Complex64::new(0.0, 0.0)]);
        assert_eq!(re, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -2.0]));
    }

    #[test]
    fn congruence_of_modulus_square() {
        let p = z(1, 0).mul(&zb(1, 0));
        let report = congruence_witness(&p);
        assert!(report.is_exact());
        let h = mixed_hessian(&p).evaluate(&[Complex64::new(1.0, 0.0)]);
        assert_eq!(numeric_rank(&h, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn determinant_examples() {
        let id = PolyMatrix::from_fn(4, 4, |r, c| if r == c { k(1) } else { MixedPolynomial::zero(1) });
        assert_eq!(determinant(&id).unwrap(), k(1));
        let swap = PolyMatrix::from_fn(2, 2, |r, c| if r != c { k(1) } else { MixedPolynomial::zero(1) });
        assert_eq!(determinant(&swap).unwrap(), k(-1));
        let big = PolyMatrix::from_fn(7, 7, |_, _| k(1));
        assert_eq!(determinant(&big), Err(HessianError::TooLarge(7)));
        let rect = PolyMatrix::from_fn(2, 3, |_, _| k(1));
        assert!(determinant(&rect).is_err());
    }

    #[test]
    fn determinant_matches_numeric() {
        let m = PolyMatrix::from_fn(3, 3, |r, c| {
            z(1, 0).pow((r + c) as u32).add(&zb(1, 0).scale(&ComplexScalar::from((r * 3 + c) as i64)))
        });
        let det = determinant(&m).unwrap();
        let w = [Complex64::new(0.4, -0.7)];
        let numeric = m.evaluate(&w).determinant();
        assert!((det.evaluate(&w).unwrap() - numeric).norm() < 1e-12);
    }

    #[test]
    fn rank_examples() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]));
        assert_eq!(numeric_rank(&d, DEFAULT_RANK_TOL).unwrap(), 2);
        let mut bad = d.clone();
        bad[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert_eq!(numeric_rank(&bad, DEFAULT_RANK_TOL), Err(HessianError::NonFinite));
    }

    #[test]
    fn pencil_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        let zero = DMatrix::<f64>::zeros(2, 2);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(pencil_regular_value(&id, &zero, DEFAULT_RANK_TOL).unwrap(), 0.0);
        assert_eq!(pencil_regular_value(&swap, &id, DEFAULT_RANK_TOL).unwrap(), 0.0);
        assert_eq!(pencil_regular_value(&zero, &id, DEFAULT_RANK_TOL).unwrap(), 1.0);
        assert_eq!(pencil_regular_value(&zero, &zero, DEFAULT_RANK_TOL), Err(HessianError::SingularPencil));
        // A + uB singular at u = 1 only: A = diag(-1, 2), B = I
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        assert_eq!(pencil_regular_value(&a, &id, DEFAULT_RANK_TOL).unwrap(), 0.0);
        let a0 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]);
        assert_eq!(pencil_regular_value(&a0, &id, DEFAULT_RANK_TOL).unwrap(), -1.0);
    }

    #[test]
    fn recombination_keeps_real_part() {
        let p = z(1, 0).pow(2).add(&zb(1, 0));
        let u = ComplexScalar::real(rat(2, 1));
        let q = recombine_target(&p, &u);
        let w = [Complex64::new(0.3, 0.8)];
        let pv = p.evaluate(&w).unwrap();
        let qv = q.evaluate(&w).unwrap();
        assert!((qv.re - pv.re).abs() < 1e-14);
        assert!((qv.im - (pv.re + 2.0 * pv.im)).abs() < 1e-14);
    }

    #[test]
    fn holomorphic_det_examples() {
        let z1 = z(2, 0);
        let z2 = z(2, 1);
        let (_, zero) = holomorphic_hessian_det(&z1.add(&z2.pow(3))).unwrap();
        assert!(zero);
        let (d, zero) = holomorphic_hessian_det(&z1.pow(2).add(&z2.pow(2))).unwrap();
        assert!(!zero);
        assert_eq!(d, MixedPolynomial::constant(2, ComplexScalar::from(4)));
        let (d, zero) = holomorphic_hessian_det(&z1.pow(3).add(&z1.mul(&z2)).add(&z2.pow(3))).unwrap();
        assert!(!zero);
        let expect = z1.mul(&z2).scale(&ComplexScalar::from(36)).sub(&MixedPolynomial::one(2));
        assert_eq!(d, expect);
        assert_eq!(holomorphic_hessian_det(&zb(2, 0)), Err(HessianError::NotHolomorphic));
    }
}
