//! Float evaluation of a mixed polynomial together with its first and second Wirtinger derivatives.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::mixedpoly::{MixedPolynomial, NumericPoly};

/// Real coordinates are ordered `(x_1..x_n, y_1..y_n)` throughout.
#[derive(Clone, Debug)]
pub struct NumericMap {
    n: usize,
    value: NumericPoly,
    dz: Vec<NumericPoly>,
    dzb: Vec<NumericPoly>,
    hess: Vec<NumericPoly>,
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn norm(w: &[Complex64]) -> f64 {
    w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_real(w: &[Complex64]) -> Vec<f64> {
    w.iter().map(|z| z.re).chain(w.iter().map(|z| z.im)).collect()
}

pub fn from_real(v: &[f64]) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|j| c64(v[j], v[n + j])).collect()
}

impl NumericMap {
    pub fn new(p: &MixedPolynomial) -> Self {
        let n = p.n();
        let first: Vec<MixedPolynomial> = (0..2 * n).map(|a| p.d_formal(a)).collect();
        let mut hess = Vec::with_capacity(4 * n * n);
        for a in 0..2 * n {
            for b in 0..2 * n {
                hess.push(NumericPoly::new(&first[a].d_formal(b)));
            }
        }
        NumericMap {
            n,
            value: NumericPoly::new(p),
            dz: first[..n].iter().map(NumericPoly::new).collect(),
            dzb: first[n..].iter().map(NumericPoly::new).collect(),
            hess,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, w: &[Complex64]) -> Complex64 {
        self.value.eval(w)
    }

    pub fn magnitude(&self, w: &[Complex64]) -> f64 {
        self.value.magnitude(w)
    }

    /// `(dP/dz_j, dP/dzbar_j)` for every `j`.
    pub fn gradients(&self, w: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        (self.dz.iter().map(|d| d.eval(w)).collect(), self.dzb.iter().map(|d| d.eval(w)).collect())
    }

    /// Numeric mixed Hessian in `(z, zbar)` order.
    pub fn mixed_hessian(&self, w: &[Complex64]) -> DMatrix<Complex64> {
        let size = 2 * self.n;
        DMatrix::from_fn(size, size, |a, b| self.hess[a * size + b].eval(w))
    }

    /// Real `2 x 2n` Jacobian of `(Re P, Im P)`.
    pub fn real_jacobian(&self, w: &[Complex64]) -> DMatrix<f64> {
        let (dz, dzb) = self.gradients(w);
        real_jacobian_from(&dz, &dzb)
    }

    /// `(H(Re P), H(Im P))` via the congruence with the mixed Hessian.
    pub fn real_hessians(&self, w: &[Complex64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let h = self.mixed_hessian(w);
        let t = basis_matrix(self.n);
        let combined = t.transpose() * h * &t;
        (combined.map(|z| z.re), combined.map(|z| z.im))
    }
}

pub fn real_jacobian_from(dz: &[Complex64], dzb: &[Complex64]) -> DMatrix<f64> {
    let n = dz.len();
    let mut j = DMatrix::zeros(2, 2 * n);
    for k in 0..n {
        let dx = dz[k] + dzb[k];
        let dy = Complex64::i() * (dz[k] - dzb[k]);
        j[(0, k)] = dx.re;
        j[(1, k)] = dx.im;
        j[(0, n + k)] = dy.re;
        j[(1, n + k)] = dy.im;
    }
    j
}

/// Numeric counterpart of the exact congruence basis.
pub fn basis_matrix(n: usize) -> DMatrix<Complex64> {
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        t[(j, j)] = c64(1.0, 0.0);
        t[(n + j, j)] = c64(1.0, 0.0);
        t[(j, n + j)] = c64(0.0, 1.0);
        t[(n + j, n + j)] = c64(0.0, -1.0);
    }
    t
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(b, largest * 1e-13).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hessian::{real_hessian, Part};

    #[test]
    fn numeric_real_hessians_match_exact() {
        let z1 = MixedPolynomial::var(2, 0);
        let z2 = MixedPolynomial::var(2, 1);
        let p = z1.pow(3).mul(&z2.conj()).add(&z2.pow(2).mul(&z1.conj()));
        let map = NumericMap::new(&p);
        let w = [c64(0.3, -0.4), c64(0.7, 0.2)];
        let (re, im) = map.real_hessians(&w);
        let exact_re = real_hessian(&p, Part::Re).evaluate(&w);
        let exact_im = real_hessian(&p, Part::Im).evaluate(&w);
        assert!((re - exact_re).norm() < 1e-12);
        assert!((im - exact_im).norm() < 1e-12);
    }

    #[test]
    fn jacobian_matches_real_derivatives() {
        let z1 = MixedPolynomial::var(2, 0);
        let z2 = MixedPolynomial::var(2, 1);
        let p = z1.mul(&z2.conj()).add(&z2.pow(2));
        let pair = p.realize();
        let w = [c64(0.3, -0.4), c64(0.7, 0.2)];
        let j = NumericMap::new(&p).real_jacobian(&w);
        let pt = to_real(&w);
        for k in 0..4 {
            assert!((j[(0, k)] - pair.re_part.derivative(k).evaluate(&pt)).abs() < 1e-13);
            assert!((j[(1, k)] - pair.im_part.derivative(k).evaluate(&pt)).abs() < 1e-13);
        }
    }
}
