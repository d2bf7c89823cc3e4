//! Singular points of mixed polynomial maps: detection, stratification, refinement,
//! orbit-sliced locus search and fold classification.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hessian::{numeric_rank, rank_from_singular_values};
use crate::mixedpoly::{polar_radial_degrees, MixedPolyError, MixedPolynomial, RealPolyPair, WeightSystem};
use crate::numeric::{c64, from_real, lstsq, norm, singular_values, to_real, NumericMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularError {
    #[error("expected stratum S1, found {0:?}")]
    StratumMismatch(Stratum),
    #[error("kernel of the differential is ambiguous (singular values {0:?})")]
    AmbiguousKernel(Vec<f64>),
    #[error("refinement diverged after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },
    #[error("search region is empty")]
    EmptyRegion,
    #[error("polynomial is not polar weighted homogeneous")]
    NotPolarHomogeneous,
    #[error("locus search needs n = 2, got {0}")]
    Dimension(usize),
    #[error(transparent)]
    Poly(#[from] MixedPolyError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Collinearity residual below which a point counts as singular.
    pub accept: f64,
    /// Relative singular-value threshold for ranks.
    pub rank: f64,
    /// Required ratio between the first and second singular values of the differential on S1.
    pub kernel_gap: f64,
    /// Relative eigenvalue floor of the restricted second form.
    pub eigen_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { accept: 1e-10, rank: 1e-8, kernel_gap: 1e3, eigen_floor: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stratum {
    S0,
    S1,
    S2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    Regular,
    DefiniteFold,
    IndefiniteFold,
    MorseCandidate,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Collinearity {
    /// Phase with `conj(dP/dz_j) = alpha dP/dzbar_j`; unset when every `dP/dzbar_j` vanishes.
    pub alpha: Option<Complex64>,
    pub residual: f64,
}

pub fn collinearity_from_gradients(dz: &[Complex64], dzb: &[Complex64], vanish_tol: f64) -> Collinearity {
    let a: Vec<Complex64> = dz.iter().map(|v| v.conj()).collect();
    let (k, bk) = dzb
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .map(|(k, v)| (k, *v))
        .expect("n >= 1");
    if bk.norm() <= vanish_tol {
        let residual = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        return Collinearity { alpha: None, residual };
    }
    let alpha = a[k] / bk;
    let mismatch = a.iter().zip(dzb).map(|(ai, bi)| (ai - alpha * bi).norm()).fold(0.0, f64::max);
    Collinearity { alpha: Some(alpha), residual: mismatch + (alpha.norm() - 1.0).abs() }
}

pub fn collinearity_residual(map: &NumericMap, w: &[Complex64], tol: &Tolerances) -> Collinearity {
    let (dz, dzb) = map.gradients(w);
    collinearity_from_gradients(&dz, &dzb, tol.accept)
}

/// Rank of the real differential: singular values above `tol * max(1, sigma_1)` count.
pub fn jacobian_stratum(map: &NumericMap, w: &[Complex64], tol: f64) -> Stratum {
    stratum_from_singular_values(&singular_values(&map.real_jacobian(w)), tol)
}

fn stratum_from_singular_values(sv: &[f64], tol: f64) -> Stratum {
    let threshold = tol * sv[0].max(1.0);
    match sv.iter().filter(|&&s| s > threshold).count() {
        0 => Stratum::S2,
        1 => Stratum::S1,
        _ => Stratum::S0,
    }
}

/// Linear constraint `coeffs . v = rhs` on the real coordinates.
#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn fix(dim: usize, index: usize, value: f64) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[index] = 1.0;
        LinearConstraint { coeffs, rhs: value }
    }

    /// `arg z_j = theta` as `-sin(theta) x_j + cos(theta) y_j = 0`.
    pub fn phase(n: usize, j: usize, theta: f64) -> Self {
        let mut coeffs = vec![0.0; 2 * n];
        coeffs[j] = -theta.sin();
        coeffs[n + j] = theta.cos();
        LinearConstraint { coeffs, rhs: 0.0 }
    }

    fn violation(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - self.rhs
    }
}

#[derive(Clone, Debug)]
pub struct RefineOptions {
    pub max_iter: usize,
    pub tol: Tolerances,
    /// Allowed `|w|` range.
    pub annulus: Option<(f64, f64)>,
    /// Largest allowed distance from the seed.
    pub max_travel: Option<f64>,
    pub constraints: Vec<LinearConstraint>,
    /// Added to the estimated starting phase of `alpha`.
    pub phase_offset: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            max_iter: 50,
            tol: Tolerances::default(),
            annulus: None,
            max_travel: None,
            constraints: vec![],
            phase_offset: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Refined {
    pub w: Vec<Complex64>,
    pub alpha: Option<Complex64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Residual `conj(dP/dz_j) - e^{i phi} dP/dzbar_j` split into real and imaginary parts,
/// followed by constraint violations.
fn collinearity_system(map: &NumericMap, v: &[f64], phi: f64, constraints: &[LinearConstraint]) -> DVector<f64> {
    let n = map.n();
    let w = from_real(v);
    let (dz, dzb) = map.gradients(&w);
    let e = Complex64::from_polar(1.0, phi);
    let mut out = DVector::zeros(2 * n + constraints.len());
    for j in 0..n {
        let r = dz[j].conj() - e * dzb[j];
        out[j] = r.re;
        out[n + j] = r.im;
    }
    for (k, c) in constraints.iter().enumerate() {
        out[2 * n + k] = c.violation(v);
    }
    out
}

fn collinearity_system_jacobian(map: &NumericMap, v: &[f64], phi: f64, constraints: &[LinearConstraint]) -> DMatrix<f64> {
    let n = map.n();
    let w = from_real(v);
    let h = map.mixed_hessian(&w);
    let (_, dzb) = map.gradients(&w);
    let e = Complex64::from_polar(1.0, phi);
    let i = Complex64::i();
    let mut jac = DMatrix::zeros(2 * n + constraints.len(), 2 * n + 1);
    for j in 0..n {
        for k in 0..n {
            let dzj_dx = h[(j, k)] + h[(j, n + k)];
            let dzj_dy = i * (h[(j, k)] - h[(j, n + k)]);
            let dbj_dx = h[(n + j, k)] + h[(n + j, n + k)];
            let dbj_dy = i * (h[(n + j, k)] - h[(n + j, n + k)]);
            let col_x = dzj_dx.conj() - e * dbj_dx;
            let col_y = dzj_dy.conj() - e * dbj_dy;
            jac[(j, k)] = col_x.re;
            jac[(n + j, k)] = col_x.im;
            jac[(j, n + k)] = col_y.re;
            jac[(n + j, n + k)] = col_y.im;
        }
        let dphi = -i * e * dzb[j];
        jac[(j, 2 * n)] = dphi.re;
        jac[(n + j, 2 * n)] = dphi.im;
    }
    for (k, c) in constraints.iter().enumerate() {
        for (col, a) in c.coeffs.iter().enumerate() {
            jac[(2 * n + k, col)] = *a;
        }
    }
    jac
}

/// Gauss-Newton on the collinearity system with the phase `alpha = e^{i phi}` as an unknown.
pub fn refine(map: &NumericMap, w0: &[Complex64], opts: &RefineOptions) -> Result<Refined, SingularError> {
    let n = map.n();
    let seed = to_real(w0);
    let mut v = seed.clone();
    let start = collinearity_residual(map, w0, &opts.tol);
    let mut phi = start.alpha.map(|a| a.arg()).unwrap_or(0.0) + opts.phase_offset;
    let mut last_residual = start.residual;
    let constraint_ok = |v: &[f64]| opts.constraints.iter().all(|c| c.violation(v).abs() < 1e-12);
    for iteration in 0..=opts.max_iter {
        let w = from_real(&v);
        let p1 = collinearity_residual(map, &w, &opts.tol);
        last_residual = p1.residual;
        if p1.residual < opts.tol.accept && constraint_ok(&v) {
            return Ok(Refined { w, alpha: p1.alpha, residual: p1.residual, iterations: iteration });
        }
        if iteration == opts.max_iter {
            break;
        }
        let e = collinearity_system(map, &v, phi, &opts.constraints);
        let jac = collinearity_system_jacobian(map, &v, phi, &opts.constraints);
        let mut delta = lstsq(&jac, &(-&e));
        let radius = norm(&w).max(opts.annulus.map(|a| a.0).unwrap_or(0.0)).max(1e-12);
        let step_w = delta.rows(0, 2 * n).norm();
        let max_step = 0.5 * radius;
        if step_w > max_step {
            delta *= max_step / step_w;
        }
        let base = e.norm();
        let mut accepted = false;
        let mut lambda = 1.0;
        for _ in 0..30 {
            let cand: Vec<f64> = v.iter().zip(delta.iter()).map(|(a, d)| a + lambda * d).collect();
            let cand_phi = phi + lambda * delta[2 * n];
            let inside = opts.annulus.is_none_or(|(lo, hi)| {
                let r = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
                r >= lo && r <= hi
            });
            let near = opts.max_travel.is_none_or(|limit| {
                cand.iter().zip(&seed).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= limit
            });
            if inside && near {
                let value = collinearity_system(map, &cand, cand_phi, &opts.constraints).norm();
                if value < base || base < 1e-15 {
                    v = cand;
                    phi = cand_phi;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SingularError::Divergence { iterations: iteration, residual: last_residual });
        }
    }
    Err(SingularError::Divergence { iterations: opts.max_iter, residual: last_residual })
}

/// Data of the second differential at an S1 point, in real coordinates `(x_1, x_2, y_1, y_2)`.
#[derive(Clone, Debug, Serialize)]
pub struct SecondForm {
    /// Symmetric form on the kernel of the differential, valued in the cokernel.
    pub restricted: Vec<Vec<f64>>,
    /// Ascending eigenvalues of `restricted`.
    pub eigenvalues: Vec<f64>,
    /// `[k L]^T H(Q) L` with `k` spanning the row space of the differential.
    pub representation: Vec<Vec<f64>>,
    pub representation_rank: usize,
    pub kernel_basis: Vec<Vec<f64>>,
    pub row_direction: Vec<f64>,
    pub image_direction: [f64; 2],
    pub cokernel_direction: [f64; 2],
    pub jacobian_singular_values: Vec<f64>,
}

pub fn intrinsic_second_form(map: &NumericMap, w: &[Complex64], tol: &Tolerances) -> Result<SecondForm, SingularError> {
    let jac = map.real_jacobian(w);
    let sv = singular_values(&jac);
    let stratum = stratum_from_singular_values(&sv, tol.rank);
    if stratum != Stratum::S1 {
        return Err(SingularError::StratumMismatch(stratum));
    }
    if sv[0] < tol.kernel_gap * sv[1] {
        return Err(SingularError::AmbiguousKernel(sv));
    }
    let dim = jac.ncols();
    let gram = jac.transpose() * &jac;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut row = eig.eigenvectors.column(order[0]).into_owned();
    let kernel = DMatrix::from_fn(dim, dim - 1, |r, c| eig.eigenvectors[(r, order[c + 1])]);

    let mut image = &jac * &row;
    let value = map.value(w);
    if image[0] * value.re + image[1] * value.im < 0.0 {
        image = -image;
        row = -row;
    }
    image /= image.norm();
    let coker = [-image[1], image[0]];
    let (h_re, h_im) = map.real_hessians(w);
    let h_q = h_re * coker[0] + h_im * coker[1];
    let restricted = kernel.transpose() * &h_q * &kernel;
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let mut full_basis = DMatrix::zeros(dim, dim);
    full_basis.set_column(0, &row);
    for c in 0..dim - 1 {
        full_basis.set_column(c + 1, &kernel.column(c));
    }
    let representation = full_basis.transpose() * &h_q * &kernel;
    let repr_sv = singular_values(&representation);
    let representation_rank = rank_from_singular_values(&repr_sv, tol.rank);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(restricted.clone()).eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(SecondForm {
        restricted: rows_of(&restricted),
        eigenvalues,
        representation: rows_of(&representation),
        representation_rank,
        kernel_basis: (0..dim - 1).map(|c| kernel.column(c).iter().cloned().collect()).collect(),
        row_direction: row.iter().cloned().collect(),
        image_direction: [image[0], image[1]],
        cokernel_direction: coker,
        jacobian_singular_values: sv,
    })
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().cloned().collect()).collect()
}

/// The restricted form recomputed by central differences of the exact real gradient of
/// `Q = c . (Re P, Im P)` along the kernel basis of `form`.
pub fn finite_difference_form(pair: &RealPolyPair, w: &[Complex64], form: &SecondForm, step: f64) -> Vec<Vec<f64>> {
    let dim = 2 * pair.n;
    let grad_re: Vec<_> = (0..dim).map(|k| pair.re_part.derivative(k)).collect();
    let grad_im: Vec<_> = (0..dim).map(|k| pair.im_part.derivative(k)).collect();
    let c = form.cokernel_direction;
    let grad_q = |pt: &[f64]| -> Vec<f64> {
        (0..dim).map(|k| c[0] * grad_re[k].evaluate(pt) + c[1] * grad_im[k].evaluate(pt)).collect()
    };
    let base = to_real(w);
    let basis = &form.kernel_basis;
    let mut out = vec![vec![0.0; basis.len()]; basis.len()];
    for (b, lb) in basis.iter().enumerate() {
        let plus: Vec<f64> = base.iter().zip(lb).map(|(x, d)| x + step * d).collect();
        let minus: Vec<f64> = base.iter().zip(lb).map(|(x, d)| x - step * d).collect();
        let gp = grad_q(&plus);
        let gm = grad_q(&minus);
        for (a, la) in basis.iter().enumerate() {
            out[a][b] = la.iter().zip(gp.iter().zip(&gm)).map(|(l, (p, m))| l * (p - m) / (2.0 * step)).sum();
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub jacobian_singular_values: Vec<f64>,
    pub hessian_rank: usize,
    pub representation_rank: Option<usize>,
    pub eigenvalues: Option<Vec<f64>>,
    /// Full-rank mixed Hessian must come with a rank-3 representation.
    pub hessian_rank_consistent: bool,
    pub value: Complex64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularPoint {
    pub w: Vec<Complex64>,
    pub alpha: Option<Complex64>,
    pub residual: f64,
    pub stratum: Stratum,
    pub classification: Classification,
    pub diagnostics: Diagnostics,
}

fn signature_verdict(eigenvalues: &[f64], floor: f64) -> Classification {
    let largest = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if largest == 0.0 || eigenvalues.iter().any(|v| v.abs() <= floor * largest) {
        return Classification::Degenerate;
    }
    let positive = eigenvalues.iter().filter(|v| **v > 0.0).count();
    if positive == 0 || positive == eigenvalues.len() {
        Classification::DefiniteFold
    } else {
        Classification::IndefiniteFold
    }
}

/// Classifies `w` and packages the evidence.
pub fn classify(map: &NumericMap, w: &[Complex64], tol: &Tolerances) -> SingularPoint {
    let p1 = collinearity_residual(map, w, tol);
    let jac_sv = singular_values(&map.real_jacobian(w));
    let stratum = stratum_from_singular_values(&jac_sv, tol.rank);
    let hessian_rank = numeric_rank(&map.mixed_hessian(w), tol.rank).unwrap_or(0);
    let mut representation_rank = None;
    let mut eigenvalues = None;
    let classification = if p1.residual > tol.accept {
        Classification::Regular
    } else {
        match stratum {
            Stratum::S0 => Classification::Regular,
            Stratum::S2 => Classification::MorseCandidate,
            Stratum::S1 => match intrinsic_second_form(map, w, tol) {
                Ok(form) => {
                    representation_rank = Some(form.representation_rank);
                    eigenvalues = Some(form.eigenvalues.clone());
                    if form.representation_rank == 3 {
                        signature_verdict(&form.eigenvalues, tol.eigen_floor)
                    } else {
                        Classification::Degenerate
                    }
                }
                Err(_) => Classification::Degenerate,
            },
        }
    };
    let hessian_rank_consistent = hessian_rank < 2 * map.n() || representation_rank.is_none_or(|r| r == 2 * map.n() - 1);
    SingularPoint {
        w: w.to_vec(),
        alpha: p1.alpha,
        residual: p1.residual,
        stratum,
        classification,
        diagnostics: Diagnostics {
            jacobian_singular_values: jac_sv,
            hessian_rank,
            representation_rank,
            eigenvalues,
            hessian_rank_consistent,
            value: map.value(w),
        },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitInvarianceReport {
    pub samples: usize,
    pub max_residual: f64,
    pub max_alpha_error: f64,
}

impl OrbitInvarianceReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual < tol && self.max_alpha_error < tol
    }
}

/// Samples `s o w` on the circle and compares the phase with `s^{-2 d_p} alpha(w)`.
pub fn orbit_invariance_check(
    map: &NumericMap,
    weights: &WeightSystem,
    polar_degree: i64,
    w: &[Complex64],
    samples: usize,
    tol: &Tolerances,
) -> OrbitInvarianceReport {
    let base = collinearity_residual(map, w, tol);
    let mut max_residual: f64 = 0.0;
    let mut max_alpha_error: f64 = 0.0;
    for k in 0..samples {
        let s = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / samples as f64);
        let moved = weights.act_polar(s, w);
        let p1 = collinearity_residual(map, &moved, tol);
        max_residual = max_residual.max(p1.residual);
        if let (Some(a0), Some(a1)) = (base.alpha, p1.alpha) {
            let expected = a0 * s.powi(-2 * polar_degree as i32);
            max_alpha_error = max_alpha_error.max((a1 - expected).norm());
        }
    }
    OrbitInvarianceReport { samples, max_residual, max_alpha_error }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchParams {
    pub r_min: f64,
    pub r_max: f64,
    /// Base grid density; radial and latitude directions get `grid` samples, the phase `2 grid`.
    pub grid: usize,
    /// Starting phases for `alpha` per seed.
    pub phase_seeds: usize,
    pub tol: Tolerances,
    /// Thread count, 0 for the rayon default. Results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
    /// Tube radius around found orbits, relative to `|w|`, excluded from the completeness certificate.
    pub tube: f64,
    pub keep_seeds: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            r_min: 1e-2,
            r_max: 1.0,
            grid: 8,
            phase_seeds: 2,
            tol: Tolerances::default(),
            workers: 0,
            tube: 0.05,
            keep_seeds: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedRecord {
    pub seed: Vec<Complex64>,
    pub result: Option<Vec<Complex64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchMeta {
    pub params: SearchParams,
    pub seeds: usize,
    pub converged: usize,
    pub diverged: usize,
    pub fundamental_domain: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocusReport {
    pub schema: String,
    pub representatives: Vec<SingularPoint>,
    pub meta: SearchMeta,
    /// Smallest second singular value of the differential at seeds outside the orbit tubes.
    pub completeness_min_sigma2: f64,
    /// Set when refined solutions are not isolated in the slice (for example a whole sphere of singular points).
    pub degenerate_locus: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<SeedRecord>>,
}

impl LocusReport {
    pub fn seeds_csv(&self) -> String {
        let mut out = String::from("seed_x1,seed_y1,seed_x2,seed_y2,converged,x1,y1,x2,y2\n");
        for s in self.seeds.iter().flatten() {
            let r = s.result.clone().unwrap_or_else(|| vec![c64(f64::NAN, f64::NAN); 2]);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.seed[0].re,
                s.seed[0].im,
                s.seed[1].re,
                s.seed[1].im,
                s.result.is_some(),
                r[0].re,
                r[0].im,
                r[1].re,
                r[1].im
            ));
        }
        out
    }
}

pub(crate) fn thread_pool(workers: usize) -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    builder.build().expect("thread pool")
}

fn linspace_geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || lo == hi {
        return vec![(lo * hi).sqrt()];
    }
    (0..count).map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64)).collect()
}

/// Rotates `w` by the polar action so that a designated coordinate is real positive,
/// breaking ties by the smallest argument of the other coordinate.
pub fn canonical_representative(weights: &WeightSystem, w: &[Complex64]) -> Vec<Complex64> {
    let scale = norm(w).max(1e-300);
    let designated = (0..w.len()).find(|&j| weights.p[j] != 0 && w[j].norm() > 1e-9 * scale);
    let Some(d) = designated else { return w.to_vec() };
    let pd = weights.p[d];
    let count = pd.unsigned_abs() as usize;
    let tau = 2.0 * std::f64::consts::PI;
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for k in 0..count {
        let angle = (-w[d].arg() + tau * k as f64) / pd as f64;
        let s = Complex64::from_polar(1.0, angle);
        let mut moved = weights.act_polar(s, w);
        moved[d] = c64(moved[d].norm(), 0.0);
        let key: f64 = (0..w.len())
            .filter(|&j| j != d && moved[j].norm() > 1e-9 * scale)
            .map(|j| {
                let a = moved[j].arg().rem_euclid(tau);
                if a > tau - 1e-9 { 0.0 } else { a }
            })
            .next()
            .unwrap_or(0.0);
        if best.as_ref().is_none_or(|(b, _)| key < *b) {
            best = Some((key, moved));
        }
    }
    best.map(|(_, v)| v).unwrap_or_else(|| w.to_vec())
}

fn orbit_samples(weights: &WeightSystem, w: &[Complex64], count: usize) -> Vec<Vec<Complex64>> {
    (0..count)
        .map(|k| {
            let s = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / count as f64);
            weights.act_polar(s, w)
        })
        .collect()
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Smallest singular value ratio of the sliced system at a solution; tiny values mean the
/// solution is not isolated in the slice.
fn slice_isolation(map: &NumericMap, w: &[Complex64], alpha: Complex64, constraints: &[LinearConstraint]) -> f64 {
    let v = to_real(w);
    let jac = collinearity_system_jacobian(map, &v, alpha.arg(), constraints);
    let sv = singular_values(&jac);
    let largest = sv[0].max(1e-300);
    sv[sv.len() - 1] / largest
}

/// Orbit representatives of the singular set of a polar weighted homogeneous `P` in an annulus.
pub fn locus_search(p: &MixedPolynomial, weights: &WeightSystem, params: &SearchParams) -> Result<LocusReport, SingularError> {
    if p.n() != 2 {
        return Err(SingularError::Dimension(p.n()));
    }
    if !(params.r_min > 0.0 && params.r_min <= params.r_max && params.grid > 0) {
        return Err(SingularError::EmptyRegion);
    }
    if polar_radial_degrees(p, weights)?.polar.is_none() {
        return Err(SingularError::NotPolarHomogeneous);
    }
    let map = NumericMap::new(p);
    let tol = &params.tol;
    let d = if weights.p[0] != 0 { 0 } else { 1 };
    let o = 1 - d;
    let tau = 2.0 * std::f64::consts::PI;

    struct Seed {
        w: Vec<Complex64>,
        phase_offset: f64,
        on_axis: bool,
    }
    let mut seeds = Vec::new();
    let radii = linspace_geometric(params.r_min, params.r_max, params.grid);
    let phase_offsets: Vec<f64> = (0..params.phase_seeds.max(1)).map(|k| tau * k as f64 / params.phase_seeds.max(1) as f64).collect();
    for &r in &radii {
        for a in 0..params.grid {
            let psi = (a as f64 + 0.5) / params.grid as f64 * std::f64::consts::FRAC_PI_2;
            for b in 0..2 * params.grid {
                let theta = tau * b as f64 / (2 * params.grid) as f64;
                let mut w = vec![c64(0.0, 0.0); 2];
                w[d] = c64(r * psi.cos(), 0.0);
                w[o] = Complex64::from_polar(r * psi.sin(), theta);
                for &phase_offset in &phase_offsets {
                    seeds.push(Seed { w: w.clone(), phase_offset, on_axis: false });
                }
            }
        }
        let mut w = vec![c64(0.0, 0.0); 2];
        w[o] = c64(r, 0.0);
        for &phase_offset in &phase_offsets {
            seeds.push(Seed { w: w.clone(), phase_offset, on_axis: true });
        }
    }

    let slice_constraints = vec![LinearConstraint::fix(4, 2 + d, 0.0)];
    let mut axis_constraints =
        vec![LinearConstraint::fix(4, d, 0.0), LinearConstraint::fix(4, 2 + d, 0.0)];
    if weights.p[o] != 0 {
        axis_constraints.push(LinearConstraint::fix(4, 2 + o, 0.0));
    }
    let base_opts = RefineOptions {
        max_iter: 50,
        tol: tol.clone(),
        annulus: Some((params.r_min, params.r_max)),
        max_travel: None,
        constraints: vec![],
        phase_offset: 0.0,
    };

    let pool = thread_pool(params.workers);
    let outcomes: Vec<Option<Refined>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|seed| {
                let mut opts = base_opts.clone();
                opts.constraints = if seed.on_axis { axis_constraints.clone() } else { slice_constraints.clone() };
                opts.phase_offset = seed.phase_offset;
                refine(&map, &seed.w, &opts).ok()
            })
            .collect()
    });

    let converged = outcomes.iter().filter(|o| o.is_some()).count();
    let mut reps: Vec<(Vec<Complex64>, bool)> = Vec::new();
    let mut degenerate_locus = false;
    for (seed, outcome) in seeds.iter().zip(&outcomes) {
        let Some(refined) = outcome else { continue };
        let canon = canonical_representative(weights, &refined.w);
        let scale = norm(&canon).max(params.r_min);
        if reps.iter().any(|(r, _)| distance(r, &canon) < 1e-6 * scale) {
            continue;
        }
        let constraints = if seed.on_axis { &axis_constraints } else { &slice_constraints };
        let isolated = match refined.alpha {
            Some(alpha) => slice_isolation(&map, &refined.w, alpha, constraints) > 1e-7,
            None => true,
        };
        if !isolated {
            degenerate_locus = true;
        }
        reps.push((canon, isolated));
    }
    reps.sort_by(|a, b| {
        norm(&a.0)
            .total_cmp(&norm(&b.0))
            .then(a.0[o].arg().rem_euclid(tau).total_cmp(&b.0[o].arg().rem_euclid(tau)))
    });

    let representatives: Vec<SingularPoint> = pool.install(|| reps.par_iter().map(|(w, _)| classify(&map, w, tol)).collect());

    let max_weight = weights.p.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(1).max(1);
    let orbit_points: Vec<Vec<Complex64>> =
        representatives.iter().flat_map(|r| orbit_samples(weights, &r.w, 64 * max_weight)).collect();
    let completeness_min_sigma2 = pool.install(|| {
        seeds
            .par_iter()
            .filter(|s| !s.on_axis && s.phase_offset == 0.0)
            .filter(|s| {
                let limit = params.tube * norm(&s.w);
                orbit_points.iter().all(|q| distance(q, &s.w) > limit)
            })
            .map(|s| singular_values(&map.real_jacobian(&s.w))[1])
            .reduce(|| f64::INFINITY, f64::min)
    });

    let seed_records = params.keep_seeds.then(|| {
        seeds
            .iter()
            .zip(&outcomes)
            .map(|(s, o)| SeedRecord { seed: s.w.clone(), result: o.as_ref().map(|r| r.w.clone()) })
            .collect()
    });

    Ok(LocusReport {
        schema: "singulab.locus/1".into(),
        representatives,
        meta: SearchMeta {
            params: params.clone(),
            seeds: seeds.len(),
            converged,
            diverged: seeds.len() - converged,
            fundamental_domain: format!(
                "z{} real positive (phase in [0, 2pi/{})), plus the z{} = 0 slice",
                d + 1,
                weights.p[d].abs(),
                d + 1
            ),
        },
        completeness_min_sigma2,
        degenerate_locus,
        seeds: seed_records,
    })
}
