//! Deformation families of `f gbar`: the Case-1 and Case-2 perturbations, coefficient
//! certification, the identities tied to each family, and the second-stage linear term.

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hessian::{determinant, mixed_hessian};
use crate::mixedpoly::{polar_radial_degrees, MixedPolyError, MixedPolynomial, WeightSystem};
use crate::numeric::{c64, from_real, lstsq, norm, to_real, NumericMap};
use crate::scalar::{rat, rat_to_f64, ComplexScalar};
use crate::singular::{
    classify, locus_search, collinearity_residual, thread_pool, Classification, LinearConstraint, LocusReport,
    SearchParams, SingularError, SingularPoint, Stratum, Tolerances,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformError {
    #[error("{0} is not holomorphic")]
    NotHolomorphic(&'static str),
    #[error("{0} is not convenient")]
    NotConvenient(&'static str),
    #[error("{0} is not weighted homogeneous for weights (q, p) = ({1}, {2})")]
    NotHomogeneous(&'static str, i64, i64),
    #[error("degree of {0} is not a multiple of pq")]
    DegreeNotMultiple(&'static str),
    #[error("need m > n, got m = {m}, n = {n}")]
    DegreeOrder { m: i64, n: i64 },
    #[error("gcd(p, q) = {0}, expected 1")]
    WeightGcd(i64),
    #[error("need q >= p >= 1, got p = {p}, q = {q}")]
    WeightOrder { p: i64, q: i64 },
    #[error("coefficient {0} must be nonzero")]
    ZeroCoefficient(&'static str),
    #[error("parameter {0} out of range")]
    Parameter(&'static str),
    #[error("gamma violates the sign condition at j = {0}")]
    Infeasible(usize),
    #[error("curves share a branch: common zero near {witness:?} (normalized residual {residual:e})")]
    CommonBranch { witness: Vec<Complex64>, residual: f64 },
    #[error("condition ({condition}) violated: common zero near {witness:?}")]
    Condition { condition: &'static str, witness: Vec<Complex64> },
    #[error("certification failed at {witness:?}: {reason}")]
    Certification { witness: Vec<Complex64>, reason: String },
    #[error("no certified coefficient after {0} trials")]
    SearchExhausted(usize),
    #[error("expected a {0} family")]
    WrongKind(&'static str),
    #[error("solution set of the second-stage system is not finite")]
    NonFinite,
    #[error(transparent)]
    Singular(#[from] SingularError),
    #[error(transparent)]
    Poly(#[from] MixedPolyError),
}

fn z(j: usize) -> MixedPolynomial {
    MixedPolynomial::var(2, j)
}

fn ratc(r: &BigRational) -> ComplexScalar {
    ComplexScalar::real(r.clone())
}

/// A weighted homogeneous pair `(f, g)` for the action `c o z = (c^q z_1, c^p z_2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WHPair {
    pub f: MixedPolynomial,
    pub g: MixedPolynomial,
    pub p: i64,
    pub q: i64,
    pub m: i64,
    pub n: i64,
    pub a1: ComplexScalar,
    pub a2: ComplexScalar,
    pub b1: ComplexScalar,
    pub b2: ComplexScalar,
}

impl WHPair {
    /// Polar and radial weights `(q, p)` on `(z_1, z_2)`.
    pub fn weights(&self) -> WeightSystem {
        WeightSystem::uniform(vec![self.q, self.p]).expect("gcd checked")
    }

    /// `pq(m - n)`, the polar degree of the deformation.
    pub fn d_h(&self) -> i64 {
        self.p * self.q * (self.m - self.n)
    }
}

fn homogeneous_degree(poly: &MixedPolynomial, w: &WeightSystem, name: &'static str, p: i64, q: i64) -> Result<i64, DeformError> {
    polar_radial_degrees(poly, w)?.polar.ok_or(DeformError::NotHomogeneous(name, q, p))
}

pub fn analyze_pair(f: &MixedPolynomial, g: &MixedPolynomial, p: i64, q: i64) -> Result<WHPair, DeformError> {
    if p < 1 || q < p {
        return Err(DeformError::WeightOrder { p, q });
    }
    let gcd = p.gcd(&q);
    if gcd != 1 {
        return Err(DeformError::WeightGcd(gcd));
    }
    for (poly, name) in [(f, "f"), (g, "g")] {
        if poly.n() != 2 {
            return Err(MixedPolyError::VariableCount(poly.n(), 2).into());
        }
        if !poly.is_holomorphic() {
            return Err(DeformError::NotHolomorphic(name));
        }
        if !poly.is_convenient() {
            return Err(DeformError::NotConvenient(name));
        }
    }
    let w = WeightSystem::uniform(vec![q, p]).expect("gcd checked");
    let d_f = homogeneous_degree(f, &w, "f", p, q)?;
    let d_g = homogeneous_degree(g, &w, "g", p, q)?;
    if d_f % (p * q) != 0 {
        return Err(DeformError::DegreeNotMultiple("f"));
    }
    if d_g % (p * q) != 0 {
        return Err(DeformError::DegreeNotMultiple("g"));
    }
    let (m, n) = (d_f / (p * q), d_g / (p * q));
    if m <= n {
        return Err(DeformError::DegreeOrder { m, n });
    }
    let corner = |poly: &MixedPolynomial, e1: i64, e2: i64| {
        (poly.coeff(&[e1 as u32, 0], &[0, 0]), poly.coeff(&[0, e2 as u32], &[0, 0]))
    };
    let (a1, a2) = corner(f, p * m, q * m);
    let (b1, b2) = corner(g, p * n, q * n);
    Ok(WHPair { f: f.clone(), g: g.clone(), p, q, m, n, a1, a2, b1, b2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    Case1,
    Case2,
}

#[derive(Clone, Debug, Serialize)]
pub struct Coefficients {
    pub gamma1: Option<String>,
    pub gamma2: Option<String>,
    pub beta: Option<String>,
    pub gamma: Option<String>,
    pub c1: Option<String>,
    pub c2: Option<String>,
}

/// `F = f gbar + t h (+ s l)` with exact data.
#[derive(Clone, Debug)]
pub struct DeformationFamily {
    pub kind: FamilyKind,
    pub f: MixedPolynomial,
    pub g: MixedPolynomial,
    pub h: MixedPolynomial,
    pub ell: Option<MixedPolynomial>,
    pub t: BigRational,
    pub s: Option<BigRational>,
    pub weights: WeightSystem,
    pub polar_degree: i64,
    /// `(p, q, m, n)`.
    pub degrees: (i64, i64, i64, i64),
    pub gamma: Vec<ComplexScalar>,
    pub beta: Option<ComplexScalar>,
    pub c: Option<(ComplexScalar, ComplexScalar)>,
}

impl DeformationFamily {
    pub fn base(&self) -> MixedPolynomial {
        self.f.mul(&self.g.conj())
    }

    /// `f gbar + t h` without the second-stage term.
    pub fn first_stage(&self) -> MixedPolynomial {
        self.base().add(&self.h.scale(&ratc(&self.t)))
    }

    /// The full map including `s l` when present.
    pub fn map(&self) -> MixedPolynomial {
        match (&self.ell, &self.s) {
            (Some(ell), Some(s)) => self.first_stage().add(&ell.scale(&ratc(s))),
            _ => self.first_stage(),
        }
    }

    pub fn t_f64(&self) -> f64 {
        rat_to_f64(&self.t)
    }

    pub fn s_f64(&self) -> f64 {
        self.s.as_ref().map(rat_to_f64).unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> Coefficients {
        let show = |c: &ComplexScalar| Some(c.to_string());
        Coefficients {
            gamma1: (self.kind == FamilyKind::Case1).then(|| self.gamma[0].to_string()),
            gamma2: (self.kind == FamilyKind::Case1).then(|| self.gamma[1].to_string()),
            beta: self.beta.as_ref().and_then(show),
            gamma: (self.kind == FamilyKind::Case2).then(|| self.gamma[0].to_string()),
            c1: self.c.as_ref().and_then(|c| show(&c.0)),
            c2: self.c.as_ref().and_then(|c| show(&c.1)),
        }
    }

    fn pair_degrees(&self) -> (f64, f64, f64, f64) {
        let (p, q, m, n) = self.degrees;
        (p as f64, q as f64, m as f64, n as f64)
    }
}

/// Numerical common-zero search of two maps on a sphere; returns the best witness and its
/// normalized residual `max(|A|/mag A, |B|/mag B)`.
pub fn common_zero_search(a: &MixedPolynomial, b: &MixedPolynomial, radius: f64, seeds_per_axis: usize) -> (Vec<Complex64>, f64) {
    let ma = NumericMap::new(a);
    let mb = NumericMap::new(b);
    let tau = 2.0 * std::f64::consts::PI;
    let mut seeds = Vec::new();
    for i in 0..seeds_per_axis {
        let eta = (i as f64 + 0.5) / seeds_per_axis as f64 * std::f64::consts::FRAC_PI_2;
        for j in 0..2 * seeds_per_axis {
            for k in 0..2 * seeds_per_axis {
                let t1 = tau * j as f64 / (2 * seeds_per_axis) as f64;
                let t2 = tau * k as f64 / (2 * seeds_per_axis) as f64;
                seeds.push(vec![Complex64::from_polar(radius * eta.cos(), t1), Complex64::from_polar(radius * eta.sin(), t2)]);
            }
        }
    }
    let score = |w: &[Complex64]| -> f64 {
        let ra = ma.value(w).norm() / ma.magnitude(w).max(1e-300);
        let rb = mb.value(w).norm() / mb.magnitude(w).max(1e-300);
        ra.max(rb)
    };
    let solve = |w0: &Vec<Complex64>| -> (Vec<Complex64>, f64) {
        let mut v = to_real(w0);
        for _ in 0..40 {
            let w = from_real(&v);
            let va = ma.value(&w);
            let vb = mb.value(&w);
            let sa = ma.magnitude(&w).max(1e-300);
            let sb = mb.magnitude(&w).max(1e-300);
            let ja = ma.real_jacobian(&w) / sa;
            let jb = mb.real_jacobian(&w) / sb;
            let r2: f64 = v.iter().map(|x| x * x).sum();
            let mut jac = nalgebra::DMatrix::zeros(5, 4);
            let mut rhs = nalgebra::DVector::zeros(5);
            for c in 0..4 {
                jac[(0, c)] = ja[(0, c)];
                jac[(1, c)] = ja[(1, c)];
                jac[(2, c)] = jb[(0, c)];
                jac[(3, c)] = jb[(1, c)];
                jac[(4, c)] = 2.0 * v[c] / (radius * radius);
            }
            rhs[0] = -va.re / sa;
            rhs[1] = -va.im / sa;
            rhs[2] = -vb.re / sb;
            rhs[3] = -vb.im / sb;
            rhs[4] = -(r2 - radius * radius) / (radius * radius);
            let delta = lstsq(&jac, &rhs);
            let step = delta.norm();
            let limit = 0.2 * radius;
            let scale = if step > limit { limit / step } else { 1.0 };
            for (x, d) in v.iter_mut().zip(delta.iter()) {
                *x += scale * d;
            }
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x *= radius / r);
            if step < 1e-15 * radius {
                break;
            }
        }
        let w = from_real(&v);
        let s = score(&w);
        (w, s)
    };
    seeds
        .par_iter()
        .map(solve)
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap_or((vec![c64(0.0, 0.0); 2], f64::INFINITY))
}

pub const COMMON_BRANCH_THRESHOLD: f64 = 1e-8;

/// Rejects a shared branch through the origin: a common zero on both spheres.
pub fn check_no_common_branch(a: &MixedPolynomial, b: &MixedPolynomial, radii: [f64; 2]) -> Result<[f64; 2], (Vec<Complex64>, f64)> {
    let first = common_zero_search(a, b, radii[0], 4);
    let second = common_zero_search(a, b, radii[1], 4);
    if first.1 < COMMON_BRANCH_THRESHOLD && second.1 < COMMON_BRANCH_THRESHOLD {
        return Err(first);
    }
    Ok([first.1, second.1])
}

pub fn build_case1(pair: &WHPair, gamma1: &ComplexScalar, gamma2: &ComplexScalar, t: &BigRational) -> Result<DeformationFamily, DeformError> {
    if gamma1.is_zero() {
        return Err(DeformError::ZeroCoefficient("gamma1"));
    }
    if gamma2.is_zero() {
        return Err(DeformError::ZeroCoefficient("gamma2"));
    }
    if !t.is_positive() {
        return Err(DeformError::Parameter("t"));
    }
    let k = (pair.m - pair.n) as u32;
    let h = z(0)
        .pow(pair.p as u32 * k)
        .scale(gamma1)
        .add(&z(1).pow(pair.q as u32 * k).scale(gamma2));
    let base = pair.f.mul(&pair.g.conj());
    if let Err((witness, residual)) = check_no_common_branch(&h, &base, [1.0, 0.5]) {
        return Err(DeformError::CommonBranch { witness, residual });
    }
    let family = DeformationFamily {
        kind: FamilyKind::Case1,
        f: pair.f.clone(),
        g: pair.g.clone(),
        h,
        ell: None,
        t: t.clone(),
        s: None,
        weights: pair.weights(),
        polar_degree: pair.d_h(),
        degrees: (pair.p, pair.q, pair.m, pair.n),
        gamma: vec![gamma1.clone(), gamma2.clone()],
        beta: None,
        c: None,
    };
    let degree = polar_radial_degrees(&family.first_stage(), &family.weights)?.polar;
    if degree != Some(pair.d_h()) {
        return Err(DeformError::NotHomogeneous("F_t", pair.q, pair.p));
    }
    Ok(family)
}

/// Exact test `Re(conj(a_j) b_j / conj(gamma_j)) > 0` for both `j`.
pub fn gamma_feasible(pair: &WHPair, gamma1: &ComplexScalar, gamma2: &ComplexScalar) -> Result<(), DeformError> {
    for (j, (a, b, g)) in [(&pair.a1, &pair.b1, gamma1), (&pair.a2, &pair.b2, gamma2)].into_iter().enumerate() {
        let Some(inv) = g.conj().inv() else { return Err(DeformError::Infeasible(j + 1)) };
        let value = &(&a.conj() * b) * &inv;
        if !value.re.is_positive() {
            return Err(DeformError::Infeasible(j + 1));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct PointMargins {
    pub w: Vec<Complex64>,
    pub classification: Classification,
    /// `sigma_min / sigma_max` of the mixed Hessian.
    pub hessian_margin: f64,
    pub hessian_det_abs: f64,
    /// `|F(w)|` over the sum of term magnitudes at `w`.
    pub value_margin: f64,
    /// `min(|z_1|, |z_2|) / |w|`.
    pub axis_margin: f64,
    /// `|Phi(w, alpha)|` relative to its two parts; near zero on the locus.
    pub phi_residual: f64,
    /// Smaller of the two parts of `Phi` relative to `|w|`-scale; nonzero on the locus.
    pub phi_parts_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub schema: String,
    pub kind: FamilyKind,
    pub coefficients: Coefficients,
    pub t: String,
    pub s: Option<String>,
    pub margin_tol: f64,
    pub margins: Vec<PointMargins>,
    /// Smallest `|Phi|` relative to its parts at random off-locus points of the annulus.
    pub phi_off_locus_min: Option<f64>,
    pub hypotheses: Vec<String>,
    pub rng_seed: Option<u64>,
    pub trial: Option<usize>,
    pub locus: LocusReport,
    pub version: String,
    /// Filled in by the caller that owns the run configuration.
    pub config: Option<crate::config::RunConfig>,
}

impl Certificate {
    pub fn all_indefinite(&self) -> bool {
        self.locus.representatives.iter().all(|r| r.classification == Classification::IndefiniteFold)
    }
}

/// `Phi(z, alpha) = conj(f_1 h_2 - f_2 h_1) g - alpha conj(g_1 h_2 - g_2 h_1) f`, split into its two parts.
pub fn phi_parts(family: &DeformationFamily, w: &[Complex64], alpha: Complex64) -> (Complex64, Complex64) {
    let ev = |p: &MixedPolynomial| p.evaluate(w).expect("n = 2");
    let (f, g, h) = (&family.f, &family.g, &family.h);
    match family.kind {
        FamilyKind::Case1 => {
            let jf = ev(&f.dz(0)) * ev(&h.dz(1)) - ev(&f.dz(1)) * ev(&h.dz(0));
            let jg = ev(&g.dz(0)) * ev(&h.dz(1)) - ev(&g.dz(1)) * ev(&h.dz(0));
            (jf.conj() * ev(g), alpha * jg.conj() * ev(f))
        }
        FamilyKind::Case2 => {
            // the form obtained by eliminating t from the gradient collinearity system, keeping the t on z_1^m
            let beta = family.beta.as_ref().map(|b| b.to_c64()).unwrap_or(c64(1.0, 0.0));
            let t = family.t_f64();
            let fv = ev(f);
            let gv = ev(g);
            let h1 = ev(&h.dz(0)).conj();
            let h2 = ev(&h.dz(1)).conj();
            let f1 = ev(&f.dz(0)).conj();
            let f2 = ev(&f.dz(1)).conj();
            let z1m = w[0].powi(family.degrees.2 as i32);
            let lhs = f1 * h2 * gv - f2 * gv * h1;
            let rhs = alpha * (fv + t * z1m) * h2 - alpha * beta.conj() * fv * h1;
            (lhs, rhs)
        }
    }
}

fn margins_at(family: &DeformationFamily, map: &NumericMap, point: &SingularPoint) -> PointMargins {
    let w = &point.w;
    let h = map.mixed_hessian(w);
    let sv: Vec<f64> = h.clone().singular_values().iter().cloned().collect();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let value = map.value(w);
    let alpha = point.alpha.unwrap_or(c64(1.0, 0.0));
    let (a, b) = phi_parts(family, w, alpha);
    let parts = a.norm().max(b.norm()).max(1e-300);
    let r = norm(w);
    PointMargins {
        w: w.clone(),
        classification: point.classification,
        hessian_margin: if smax > 0.0 { smin / smax } else { 0.0 },
        hessian_det_abs: h.determinant().norm(),
        value_margin: value.norm() / map.magnitude(w).max(1e-300),
        axis_margin: w[0].norm().min(w[1].norm()) / r,
        phi_residual: (a - b).norm() / parts,
        phi_parts_margin: a.norm().min(b.norm()) / parts,
    }
}

fn phi_off_locus(family: &DeformationFamily, map: &NumericMap, params: &SearchParams, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    (0..64)
        .map(|_| {
            let r = params.r_min + (params.r_max - params.r_min) * rng.gen::<f64>();
            let eta: f64 = rng.gen::<f64>() * std::f64::consts::FRAC_PI_2;
            let w = [Complex64::from_polar(r * eta.cos(), tau * rng.gen::<f64>()), Complex64::from_polar(r * eta.sin(), tau * rng.gen::<f64>())];
            let alpha = collinearity_residual(map, &w, &params.tol).alpha.map(|a| a / a.norm()).unwrap_or(c64(1.0, 0.0));
            let (a, b) = phi_parts(family, &w, alpha);
            (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Runs the locus search on the family and checks the margins at every representative.
pub fn certify_family(family: &DeformationFamily, params: &SearchParams, margin_tol: f64) -> Result<Certificate, DeformError> {
    let poly = family.map();
    let locus = locus_search(&poly, &family.weights, params)?;
    let map = NumericMap::new(&poly);
    if locus.degenerate_locus {
        let witness = locus.representatives.first().map(|r| r.w.clone()).unwrap_or_default();
        return Err(DeformError::Certification { witness, reason: "singular set is not a union of isolated orbits".into() });
    }
    let mut margins = Vec::new();
    for point in &locus.representatives {
        if point.stratum == Stratum::S2 {
            return Err(DeformError::Certification { witness: point.w.clone(), reason: "S2 point off the origin".into() });
        }
        let m = margins_at(family, &map, point);
        let failure = if m.hessian_margin <= margin_tol {
            Some("mixed Hessian is numerically singular")
        } else if m.value_margin <= margin_tol {
            Some("F vanishes on the singular set")
        } else if m.axis_margin <= 1e-6 {
            Some("singular point on a coordinate axis")
        } else if family.kind == FamilyKind::Case1 && m.phi_parts_margin <= margin_tol {
            Some("both parts of Phi vanish")
        } else {
            None
        };
        if let Some(reason) = failure {
            return Err(DeformError::Certification { witness: point.w.clone(), reason: reason.into() });
        }
        margins.push(m);
    }
    let phi_min = phi_off_locus(family, &map, params, 0x5eed);
    let hypotheses = match family.kind {
        FamilyKind::Case1 => vec![
            "gamma sign condition (exact)".into(),
            "no common branch of h and f gbar (numeric, two spheres)".into(),
            "det H(F_t) != 0 on S1(F_t) (numeric margin)".into(),
            "F_t != 0 on S1(F_t) (numeric margin)".into(),
            "no S2 point off the origin in the annulus".into(),
        ],
        FamilyKind::Case2 => vec![
            "det H(F_t) != 0 on S1(F_t) (numeric margin)".into(),
            "F_t != 0 on S1(F_t) (numeric margin)".into(),
            "no S2 point off the origin in the annulus".into(),
        ],
    };
    Ok(Certificate {
        schema: "singulab.certificate/1".into(),
        kind: family.kind,
        coefficients: family.coefficients(),
        t: family.t.to_string(),
        s: family.s.as_ref().map(|s| s.to_string()),
        margin_tol,
        margins,
        phi_off_locus_min: Some(phi_min),
        hypotheses,
        rng_seed: None,
        trial: None,
        locus,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: None,
    })
}

pub fn certify_gamma(
    pair: &WHPair,
    gamma1: &ComplexScalar,
    gamma2: &ComplexScalar,
    t: &BigRational,
    params: &SearchParams,
    margin_tol: f64,
) -> Result<Certificate, DeformError> {
    gamma_feasible(pair, gamma1, gamma2)?;
    let family = build_case1(pair, gamma1, gamma2, t)?;
    certify_family(&family, params, margin_tol)
}

/// Rational point `((1 - u^2) + 2u i) / (1 + u^2)` on the unit circle.
pub fn rational_unit(num: i64, den: i64) -> ComplexScalar {
    let u = rat(num, den);
    let one = rat(1, 1);
    let d = &one + &u * &u;
    ComplexScalar::new((&one - &u * &u) / &d, (rat(2, 1) * &u) / &d)
}

fn random_unit<R: Rng>(rng: &mut R) -> ComplexScalar {
    let den = rng.gen_range(1..=16);
    let num = rng.gen_range(-4 * den..=4 * den);
    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
    rational_unit(num, den).scale_int(sign)
}

impl ComplexScalar {
    fn scale_int(&self, k: i64) -> ComplexScalar {
        self * &ComplexScalar::from(k)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaSearch {
    pub seed: u64,
    pub trials: usize,
    pub t: BigRationalRepr,
    pub halvings: usize,
    pub margin_tol: f64,
    pub params: SearchParams,
    /// Only accept coefficients whose singular locus is nonempty.
    pub require_nonempty: bool,
}

/// Exact rational as a string for serialization.
#[derive(Clone, Debug, Serialize)]
pub struct BigRationalRepr(pub String);

impl BigRationalRepr {
    pub fn new(r: &BigRational) -> Self {
        BigRationalRepr(r.to_string())
    }

    pub fn value(&self) -> BigRational {
        crate::parse::parse_rational(&self.0).expect("valid rational")
    }
}

impl GammaSearch {
    pub fn new(seed: u64, t: &BigRational, params: SearchParams) -> Self {
        GammaSearch { seed, trials: 16, t: BigRationalRepr::new(t), halvings: 8, margin_tol: 1e-8, params, require_nonempty: false }
    }
}

fn first_success<T: Send>(trials: usize, workers: usize, attempt: impl Fn(usize) -> Option<T> + Sync) -> Option<(usize, T)> {
    let chunk = if workers == 0 { rayon::current_num_threads().max(1) } else { workers };
    let pool = thread_pool(workers);
    let mut start = 0;
    while start < trials {
        let end = (start + chunk).min(trials);
        let found: Vec<Option<T>> = pool.install(|| (start..end).into_par_iter().map(&attempt).collect());
        if let Some((k, v)) = found.into_iter().enumerate().find_map(|(k, v)| v.map(|v| (k, v))) {
            return Some((start + k, v));
        }
        start = end;
    }
    None
}

fn halving_schedule(t: &BigRational, halvings: usize) -> Vec<BigRational> {
    (0..=halvings).map(|k| t / BigRational::from_integer(num_bigint::BigInt::from(1u64 << k))).collect()
}

/// Randomized search for a certified `(gamma_1, gamma_2)`; the lowest successful trial wins.
pub fn search_gamma(pair: &WHPair, search: &GammaSearch) -> Result<(DeformationFamily, Certificate), DeformError> {
    let mut inner = search.params.clone();
    inner.workers = 1;
    let attempt = |trial: usize| -> Option<(DeformationFamily, Certificate)> {
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed.wrapping_add(trial as u64));
        let mut gammas = Vec::new();
        for (a, b) in [(&pair.a1, &pair.b1), (&pair.a2, &pair.b2)] {
            let gamma = loop {
                let g = random_unit(&mut rng);
                let value = &(&a.conj() * b) * &g;
                if value.re.is_positive() {
                    break g;
                }
                if value.re.is_negative() {
                    break -g;
                }
            };
            gammas.push(gamma);
        }
        if gamma_feasible(pair, &gammas[0], &gammas[1]).is_err() {
            return None;
        }
        for t in halving_schedule(&search.t.value(), search.halvings) {
            let Ok(family) = build_case1(pair, &gammas[0], &gammas[1], &t) else { continue };
            if let Ok(cert) = certify_family(&family, &inner, search.margin_tol) {
                if !search.require_nonempty || !cert.locus.representatives.is_empty() {
                    return Some((family, cert));
                }
            }
        }
        None
    };
    let (trial, (family, mut cert)) = first_success(search.trials, search.params.workers, attempt).ok_or(DeformError::SearchExhausted(search.trials))?;
    cert.rng_seed = Some(search.seed);
    cert.trial = Some(trial);
    Ok((family, cert))
}

/// Randomized search for a certified Case-2 `gamma`.
pub fn search_gamma_case2(f: &MixedPolynomial, beta: &ComplexScalar, search: &GammaSearch) -> Result<(DeformationFamily, Certificate), DeformError> {
    let mut inner = search.params.clone();
    inner.workers = 1;
    let attempt = |trial: usize| -> Option<(DeformationFamily, Certificate)> {
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed.wrapping_add(trial as u64));
        let magnitude = [rat(1, 2), rat(1, 1), rat(2, 1)][rng.gen_range(0..3)].clone();
        let gamma = &random_unit(&mut rng) * &ComplexScalar::real(magnitude);
        for t in halving_schedule(&search.t.value(), search.halvings) {
            let Ok(family) = build_case2(f, beta, &gamma, &t) else { return None };
            if let Ok(cert) = certify_family(&family, &inner, search.margin_tol) {
                if !search.require_nonempty || !cert.locus.representatives.is_empty() {
                    return Some((family, cert));
                }
            }
        }
        None
    };
    let (trial, (family, mut cert)) = first_success(search.trials, search.params.workers, attempt).ok_or(DeformError::SearchExhausted(search.trials))?;
    cert.rng_seed = Some(search.seed);
    cert.trial = Some(trial);
    Ok((family, cert))
}

/// Sum of term magnitudes of `f gbar`, `f`-bar `g` and `t h` at `w`, the scale for identity residuals.
fn identity_scale(family: &DeformationFamily, w: &[Complex64]) -> f64 {
    let base = family.base();
    base.magnitude_at(w) + family.h.magnitude_at(w) * family.t_f64()
}

/// `|F_t(w) - (-n/(m-n)) (f gbar - conj(alpha) fbar g)(w)|`, scaled.
pub fn restriction_identity_check(family: &DeformationFamily, w: &[Complex64], alpha: Complex64) -> f64 {
    let (_, _, m, n) = family.pair_degrees();
    let fv = family.f.evaluate(w).expect("n = 2");
    let gv = family.g.evaluate(w).expect("n = 2");
    let lhs = family.first_stage().evaluate(w).expect("n = 2");
    let rhs = (fv * gv.conj() - alpha.conj() * fv.conj() * gv) * (-n / (m - n));
    (lhs - rhs).norm() / identity_scale(family, w).max(1e-300)
}

/// `pqm fbar g + pq(m-n) t hbar - alpha pqn f gbar`, scaled.
pub fn euler_locus_residual(family: &DeformationFamily, w: &[Complex64], alpha: Complex64) -> f64 {
    let (p, q, m, n) = family.pair_degrees();
    let t = family.t_f64();
    let fv = family.f.evaluate(w).expect("n = 2");
    let gv = family.g.evaluate(w).expect("n = 2");
    let hv = family.h.evaluate(w).expect("n = 2");
    let value = fv.conj() * gv * (p * q * m) + hv.conj() * (p * q * (m - n) * t) - alpha * fv * gv.conj() * (p * q * n);
    value.norm() / (p * q * m * identity_scale(family, w)).max(1e-300)
}

/// Largest scaled mismatch in `t h_jj = ((pq(m-n) - p_j)/(p_j z_j)) (conj(alpha) fbar g_j - f_j gbar)`.
pub fn hessian_diagonal_residual(family: &DeformationFamily, w: &[Complex64], alpha: Complex64) -> f64 {
    let (p, q, m, n) = family.pair_degrees();
    let t = family.t_f64();
    let weights = [q, p];
    let fv = family.f.evaluate(w).expect("n = 2");
    let gv = family.g.evaluate(w).expect("n = 2");
    (0..2)
        .map(|j| {
            let ev = |poly: &MixedPolynomial| poly.evaluate(w).expect("n = 2");
            let lhs = ev(&family.h.dz(j).dz(j)) * t;
            let factor = (p * q * (m - n) - weights[j]) / (weights[j] * w[j]);
            let rhs = factor * (alpha.conj() * fv.conj() * ev(&family.g.dz(j)) - ev(&family.f.dz(j)) * gv.conj());
            let scale = lhs.norm() + (factor * alpha.conj() * fv.conj() * ev(&family.g.dz(j))).norm() + (factor * ev(&family.f.dz(j)) * gv.conj()).norm();
            (lhs - rhs).norm() / scale.max(1e-300)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitDerivativeReport {
    pub samples: usize,
    pub max_error: f64,
    pub derivative_at_zero: Complex64,
}

/// Finite-difference `d/dtheta F(s o w)` against `i d e^{i d theta} F(w)`.
pub fn orbit_derivative_check(family: &DeformationFamily, w: &[Complex64], samples: usize) -> OrbitDerivativeReport {
    let poly = family.first_stage();
    let map = NumericMap::new(&poly);
    let d = family.polar_degree as f64;
    let value = map.value(w);
    let scale = (d * map.magnitude(w)).max(1e-300);
    let step = 1e-5;
    let along = |theta: f64| map.value(&family.weights.act_polar(Complex64::from_polar(1.0, theta), w));
    let mut max_error: f64 = 0.0;
    let mut derivative_at_zero = c64(0.0, 0.0);
    for k in 0..samples.max(1) {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / samples.max(1) as f64;
        let fd = (along(theta + step) - along(theta - step)) / (2.0 * step);
        let closed = c64(0.0, d) * Complex64::from_polar(1.0, d * theta) * value;
        if k == 0 {
            derivative_at_zero = fd;
        }
        max_error = max_error.max((fd - closed).norm() / scale);
    }
    OrbitDerivativeReport { samples, max_error, derivative_at_zero }
}

/// `F_t = f conj(z_1 + beta z_2) + t (z_1^m zbar_1 + z_1^{m-1} + gamma z_2^{m-1})`.
pub fn build_case2(f: &MixedPolynomial, beta: &ComplexScalar, gamma: &ComplexScalar, t: &BigRational) -> Result<DeformationFamily, DeformError> {
    if beta.is_zero() {
        return Err(DeformError::ZeroCoefficient("beta"));
    }
    if gamma.is_zero() {
        return Err(DeformError::ZeroCoefficient("gamma"));
    }
    if t.is_negative() {
        return Err(DeformError::Parameter("t"));
    }
    if f.n() != 2 || !f.is_holomorphic() {
        return Err(DeformError::NotHolomorphic("f"));
    }
    if !f.is_convenient() {
        return Err(DeformError::NotConvenient("f"));
    }
    let weights = WeightSystem::uniform(vec![1, 1]).expect("valid");
    let m = homogeneous_degree(f, &weights, "f", 1, 1)?;
    if m < 2 {
        return Err(DeformError::DegreeOrder { m, n: 1 });
    }
    let g = z(0).add(&z(1).scale(beta));
    let mu = m as u32;
    let h = z(0)
        .pow(mu)
        .mul(&MixedPolynomial::conj_var(2, 0))
        .add(&z(0).pow(mu - 1))
        .add(&z(1).pow(mu - 1).scale(gamma));
    let family = DeformationFamily {
        kind: FamilyKind::Case2,
        f: f.clone(),
        g,
        h,
        ell: None,
        t: t.clone(),
        s: None,
        weights,
        polar_degree: m - 1,
        degrees: (1, 1, m, 1),
        gamma: vec![gamma.clone()],
        beta: Some(beta.clone()),
        c: None,
    };
    let degree = polar_radial_degrees(&family.first_stage(), &family.weights)?.polar;
    if degree != Some(m - 1) {
        return Err(DeformError::NotHomogeneous("F_t", 1, 1));
    }
    Ok(family)
}

/// `det H(F_t)` next to the closed form `t^2 m^2 conj(beta)^2 z_1^{2m-2} (df/dz_2)^2`.
pub fn case2_det_identity(family: &DeformationFamily) -> Result<(MixedPolynomial, MixedPolynomial), DeformError> {
    if family.kind != FamilyKind::Case2 {
        return Err(DeformError::WrongKind("Case-2"));
    }
    let det = determinant(&mixed_hessian(&family.first_stage())).expect("4x4");
    let m = family.degrees.2;
    let beta = family.beta.clone().expect("Case-2 has beta");
    let coeff = &(&ratc(&family.t).pow(2) * &ComplexScalar::from(m * m)) * &beta.conj().pow(2);
    let closed = z(0).pow(2 * m as u32 - 2).mul(&family.f.dz(1).pow(2)).scale(&coeff);
    Ok((det, closed))
}

/// `Psi` with `conj(alpha)` as a third holomorphic variable and rows scaled by `z_1`, `z_2`:
/// the returned polynomial is `z_1 z_2 Psi(z, alpha)`.
pub fn psi_polynomial(family: &DeformationFamily) -> Result<MixedPolynomial, DeformError> {
    if family.kind != FamilyKind::Case1 {
        return Err(DeformError::WrongKind("Case-1"));
    }
    let (p, q, m, n) = family.degrees;
    let lift = |poly: &MixedPolynomial| poly.extend_vars(3);
    let f = lift(&family.f);
    let g = lift(&family.g);
    let fb = f.conj();
    let gb = g.conj();
    let abar = MixedPolynomial::var(3, 2);
    let weights = [q, p];
    let d_h = p * q * (m - n);
    let zj = |j: usize| MixedPolynomial::var(3, j);
    let entry = |r: usize, c: usize| -> MixedPolynomial {
        match (r < 2, c < 2) {
            (true, true) if r == c => {
                // z_j omega_j p_j = p_j z_j f_jj gbar + (d_h - p_j)(abar fbar g_j - f_j gbar)
                let pj = ComplexScalar::from(weights[r]);
                let first = zj(r).mul(&f.dz(r).dz(r)).mul(&gb).scale(&pj);
                let second = abar.mul(&fb).mul(&g.dz(r)).sub(&f.dz(r).mul(&gb)).scale(&ComplexScalar::from(d_h - weights[r]));
                first.add(&second)
            }
            (true, true) => zj(r).mul(&f.dz(r).dz(c)).mul(&gb).scale(&ComplexScalar::from(weights[r])),
            (true, false) => zj(r).mul(&f.dz(r)).mul(&g.dz(c - 2).conj()).scale(&ComplexScalar::from(weights[r])),
            (false, true) => f.dz(c).mul(&g.dz(r - 2).conj()),
            (false, false) => f.mul(&g.dz(r - 2).dz(c - 2).conj()),
        }
    };
    let matrix = crate::hessian::PolyMatrix::from_fn(4, 4, entry);
    // rows were scaled by p_j z_j; undo the constant p_1 p_2
    let det = determinant(&matrix).expect("4x4");
    let inv = ComplexScalar::from(weights[0] * weights[1]).inv().expect("nonzero");
    Ok(det.scale(&inv))
}

/// `Psi(w, alpha)` from the scaled polynomial.
pub fn psi_value(psi_scaled: &MixedPolynomial, w: &[Complex64], alpha: Complex64) -> Complex64 {
    let point = [w[0], w[1], alpha.conj()];
    psi_scaled.evaluate(&point).expect("n = 3") / (w[0] * w[1])
}

/// Coefficient of `conj(alpha)^2` in the scaled `Psi` polynomial.
pub fn psi_alpha_squared_coefficient(psi_scaled: &MixedPolynomial) -> MixedPolynomial {
    let part = psi_scaled.filter_terms(|t| t.nu[2] == 2 && t.mu[2] == 0);
    MixedPolynomial::from_terms(2, part.terms().map(|t| (t.nu[..2].to_vec(), t.mu[..2].to_vec(), t.coeff.clone())))
}

/// `l = c_1 z_1 + c_2 z_2` added with weight `s`, after checking conditions (i) and (ii).
pub fn build_second_stage(family: &DeformationFamily, c1: &ComplexScalar, c2: &ComplexScalar, s: &BigRational) -> Result<DeformationFamily, DeformError> {
    if family.kind != FamilyKind::Case1 {
        return Err(DeformError::WrongKind("Case-1"));
    }
    if c1.is_zero() {
        return Err(DeformError::ZeroCoefficient("c1"));
    }
    if c2.is_zero() {
        return Err(DeformError::ZeroCoefficient("c2"));
    }
    if !s.is_positive() || s >= &family.t {
        return Err(DeformError::Parameter("s"));
    }
    let (cond_i, cond_ii) = second_stage_curves(family, c1, c2, s);
    let base = family.base();
    let ratio = rat_to_f64(s) / family.t_f64();
    if let Err((witness, _)) = check_no_common_branch(&cond_i, &base, [0.1 * ratio, 0.05 * ratio]) {
        return Err(DeformError::Condition { condition: "i", witness });
    }
    if let Err((witness, _)) = check_no_common_branch(&cond_ii, &base, [1.0, 0.5]) {
        return Err(DeformError::Condition { condition: "ii", witness });
    }
    let ell = z(0).scale(c1).add(&z(1).scale(c2));
    let mut out = family.clone();
    out.ell = Some(ell);
    out.s = Some(s.clone());
    out.c = Some((c1.clone(), c2.clone()));
    Ok(out)
}

/// The curves of conditions (i) and (ii): `t d_h h + s(q c_1 z_1 + p c_2 z_2)` and
/// `(d_h - q) q c_1 z_1 + (d_h - p) p c_2 z_2`.
pub fn second_stage_curves(family: &DeformationFamily, c1: &ComplexScalar, c2: &ComplexScalar, s: &BigRational) -> (MixedPolynomial, MixedPolynomial) {
    let (p, q, _, _) = family.degrees;
    let d_h = family.polar_degree;
    let sc = ratc(s);
    let lin = z(0).scale(&(c1 * &ComplexScalar::from(q))).add(&z(1).scale(&(c2 * &ComplexScalar::from(p))));
    let cond_i = family.h.scale(&(&ratc(&family.t) * &ComplexScalar::from(d_h))).add(&lin.scale(&sc));
    let cond_ii = z(0)
        .scale(&(c1 * &ComplexScalar::from((d_h - q) * q)))
        .add(&z(1).scale(&(c2 * &ComplexScalar::from((d_h - p) * p))));
    (cond_i, cond_ii)
}

/// Roots of a univariate complex polynomial (coefficients by increasing degree), Durand-Kerner.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let degree = coeffs.iter().rposition(|c| c.norm() > 0.0).unwrap_or(0);
    if degree == 0 {
        return vec![];
    }
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs[..=degree].iter().map(|c| c / lead).collect();
    let eval = |x: Complex64| monic.iter().rev().fold(c64(0.0, 0.0), |acc, c| acc * x + c);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| c64(0.4, 0.9).powi(k as i32)).collect();
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..degree {
            let mut denom = c64(1.0, 0.0);
            for j in 0..degree {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Chooses `(c_1, c_2)` so that the point `(tau^q, zeta tau^p)` on a branch `f(1, zeta) = 0`
/// of radius about `radius` is an S2 point of `F_{t,s}`. Returns exact (rounded) coefficients.
pub fn engineer_second_stage_coefficients(family: &DeformationFamily, s: &BigRational, radius: f64, branch: usize) -> (ComplexScalar, ComplexScalar, Vec<Complex64>) {
    let (p, q, _, _) = family.degrees;
    let f1 = family.f.terms().fold(vec![c64(0.0, 0.0); 64], |mut acc, t| {
        acc[t.nu[1] as usize] += t.coeff.to_c64();
        acc
    });
    let roots = polynomial_roots(&f1);
    let mut sorted = roots.clone();
    sorted.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let zeta = sorted[branch % sorted.len().max(1)];
    // |(tau^q, zeta tau^p)| = radius, solved by bisection in tau
    let size = |tau: f64| (tau.powi(q as i32).powi(2) + (zeta.norm() * tau.powi(p as i32)).powi(2)).sqrt();
    let (mut lo, mut hi) = (0.0, 1.0f64.max(radius * 10.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if size(mid) < radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let w = vec![c64(tau.powi(q as i32), 0.0), zeta * tau.powi(p as i32)];
    let t = family.t_f64();
    let gbar = family.g.evaluate(&w).expect("n = 2").conj();
    let s_f = rat_to_f64(s);
    let c: Vec<ComplexScalar> = (0..2)
        .map(|j| {
            let grad = family.f.dz(j).evaluate(&w).expect("n = 2") * gbar + family.h.dz(j).evaluate(&w).expect("n = 2") * t;
            ComplexScalar::from_c64(-grad / s_f).expect("finite")
        })
        .collect();
    (c[0].clone(), c[1].clone(), w)
}

#[derive(Clone, Debug, Serialize)]
pub struct S2Point {
    pub w: Vec<Complex64>,
    pub residual: f64,
    pub stratum: Stratum,
    pub hessian_rank: usize,
    pub pattern: MorsePattern,
}

/// Structure of `H(F_{t,s})` at an S2 point on `f = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct MorsePattern {
    /// Singular values of the block-equilibrated Hessian, relative to the largest.
    pub equilibrated_singular_values: Vec<f64>,
    pub rank: usize,
    /// `|f(w)|` relative to the term magnitudes of `f`, which makes the `(zbar, zbar)` block vanish.
    pub conj_block_residual: f64,
    /// Second singular value of the `(z, zbar)` block over its first (rank one).
    pub mixed_block_rank1_defect: f64,
    /// `x^T A x` with `x = (q z_1, p z_2)`.
    pub pivot: Complex64,
    /// `-s((d_h - q) q c_1 z_1 + (d_h - p) p c_2 z_2)`.
    pub pivot_expected: Complex64,
}

impl MorsePattern {
    pub fn holds(&self, tol: f64) -> bool {
        self.rank == 3
            && self.conj_block_residual < tol
            && self.mixed_block_rank1_defect < tol
            && self.pivot.norm() > tol * self.pivot_expected.norm().max(1e-300)
            && (self.pivot - self.pivot_expected).norm() <= 1e-6 * self.pivot_expected.norm()
    }
}

/// Rank threshold for the block-equilibrated Hessian, whose `(zbar, zbar)` block carries the
/// rounding error of `f(w) = 0` amplified by the equilibration factor squared.
pub const EQUILIBRATED_RANK_TOL: f64 = 1e-6;

pub fn morse_pattern(family: &DeformationFamily, w: &[Complex64]) -> MorsePattern {
    let (p, q, _, _) = family.degrees;
    let map = NumericMap::new(&family.map());
    let h = map.mixed_hessian(w);
    let a = h.view((0, 0), (2, 2)).into_owned();
    let b = h.view((0, 2), (2, 2)).into_owned();
    let kappa = a.norm() / b.norm().max(1e-300);
    let mut scale = nalgebra::DMatrix::<Complex64>::identity(4, 4);
    scale[(2, 2)] = c64(kappa, 0.0);
    scale[(3, 3)] = c64(kappa, 0.0);
    let eq = &scale * &h * &scale;
    let mut sv: Vec<f64> = eq.singular_values().iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let largest = sv[0].max(1e-300);
    let rel: Vec<f64> = sv.iter().map(|v| v / largest).collect();
    let rank = rel.iter().filter(|v| **v > EQUILIBRATED_RANK_TOL).count();
    let mut bsv: Vec<f64> = b.singular_values().iter().cloned().collect();
    bsv.sort_by(|x, y| y.total_cmp(x));
    let x = nalgebra::DVector::from_vec(vec![w[0] * q as f64, w[1] * p as f64]);
    let pivot = (x.transpose() * &a * &x)[(0, 0)];
    let (c1, c2) = family.c.clone().expect("second stage");
    let d_h = family.polar_degree;
    let s = family.s_f64();
    let pivot_expected = -(c1.to_c64() * w[0] * ((d_h - q) * q) as f64 + c2.to_c64() * w[1] * ((d_h - p) * p) as f64) * s;
    MorsePattern {
        equilibrated_singular_values: rel,
        rank,
        conj_block_residual: family.f.evaluate(w).expect("n = 2").norm() / family.f.magnitude_at(w).max(1e-300),
        mixed_block_rank1_defect: bsv[1] / bsv[0].max(1e-300),
        pivot,
        pivot_expected,
    }
}

/// Newton on all four Wirtinger derivatives `= 0` (an S2 point).
pub fn refine_s2(map: &NumericMap, w0: &[Complex64], max_iter: usize) -> (Vec<Complex64>, f64) {
    let mut v = to_real(w0);
    let i = Complex64::i();
    let residual = |w: &[Complex64]| {
        let (dz, dzb) = map.gradients(w);
        dz.iter().chain(&dzb).map(|x| x.norm()).fold(0.0, f64::max)
    };
    for _ in 0..max_iter {
        let w = from_real(&v);
        let (dz, dzb) = map.gradients(&w);
        let h = map.mixed_hessian(&w);
        let mut jac = nalgebra::DMatrix::zeros(8, 4);
        let mut rhs = nalgebra::DVector::zeros(8);
        for a in 0..4 {
            let value = if a < 2 { dz[a] } else { dzb[a - 2] };
            rhs[2 * a] = -value.re;
            rhs[2 * a + 1] = -value.im;
            for k in 0..2 {
                let dx = h[(a, k)] + h[(a, 2 + k)];
                let dy = i * (h[(a, k)] - h[(a, 2 + k)]);
                jac[(2 * a, k)] = dx.re;
                jac[(2 * a + 1, k)] = dx.im;
                jac[(2 * a, 2 + k)] = dy.re;
                jac[(2 * a + 1, 2 + k)] = dy.im;
            }
        }
        let delta = lstsq(&jac, &rhs);
        v.iter_mut().zip(delta.iter()).for_each(|(x, d)| *x += d);
        if delta.norm() < 1e-16 * (1.0 + norm(&w)) {
            break;
        }
    }
    let w = from_real(&v);
    let r = residual(&w);
    (w, r)
}

/// Solutions of `{f gbar = 0, t d_h h + s(q c_1 z_1 + p c_2 z_2) = 0}` in the ball of radius
/// `ball`, kept when they are genuine S2 points of `F_{t,s}`.
pub fn second_stage_s2_points(family: &DeformationFamily, ball: f64, grid: usize, tol: &Tolerances) -> Result<Vec<S2Point>, DeformError> {
    let (Some((c1, c2)), Some(s)) = (family.c.clone(), family.s.clone()) else {
        return Err(DeformError::Parameter("s"));
    };
    let (cond_i, _) = second_stage_curves(family, &c1, &c2, &s);
    let base = family.base();
    let full = NumericMap::new(&family.map());
    let pair_map = (NumericMap::new(&base), NumericMap::new(&cond_i));
    let tau = 2.0 * std::f64::consts::PI;
    let mut seeds = Vec::new();
    let radii: Vec<f64> = (0..grid).map(|k| ball * 10f64.powf(-3.0 * (k as f64) / grid.max(1) as f64)).collect();
    for &r in &radii {
        for a in 0..grid {
            let eta = (a as f64 + 0.5) / grid as f64 * std::f64::consts::FRAC_PI_2;
            for b in 0..2 * grid {
                for c in 0..2 * grid {
                    seeds.push(vec![
                        Complex64::from_polar(r * eta.cos(), tau * b as f64 / (2 * grid) as f64),
                        Complex64::from_polar(r * eta.sin(), tau * c as f64 / (2 * grid) as f64),
                    ]);
                }
            }
        }
    }
    let solve = |w0: &Vec<Complex64>| -> Option<Vec<Complex64>> {
        let mut v = to_real(w0);
        for _ in 0..60 {
            let w = from_real(&v);
            let va = pair_map.0.value(&w);
            let vb = pair_map.1.value(&w);
            let ja = pair_map.0.real_jacobian(&w);
            let jb = pair_map.1.real_jacobian(&w);
            let jac = nalgebra::DMatrix::from_fn(4, 4, |r, c| if r < 2 { ja[(r, c)] } else { jb[(r - 2, c)] });
            let rhs = nalgebra::DVector::from_vec(vec![-va.re, -va.im, -vb.re, -vb.im]);
            let delta = lstsq(&jac, &rhs);
            let limit = 0.3 * norm(&w).max(1e-6);
            let step = delta.norm();
            let k = if step > limit { limit / step } else { 1.0 };
            v.iter_mut().zip(delta.iter()).for_each(|(x, d)| *x += k * d);
            if step < 1e-15 {
                break;
            }
        }
        let w = from_real(&v);
        let r = norm(&w);
        let ok = pair_map.0.value(&w).norm() <= 1e-12 * pair_map.0.magnitude(&w).max(1e-300)
            && pair_map.1.value(&w).norm() <= 1e-12 * pair_map.1.magnitude(&w).max(1e-300);
        (ok && r > 1e-9 && r <= ball).then_some(w)
    };
    let solutions: Vec<Vec<Complex64>> = seeds.par_iter().filter_map(solve).collect();
    let mut points: Vec<S2Point> = Vec::new();
    for w0 in solutions {
        let (w, _) = refine_s2(&full, &w0, 30);
        if points.iter().any(|q| q.w.iter().zip(&w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() < 1e-8 * norm(&w)) {
            continue;
        }
        let p1 = collinearity_residual(&full, &w, tol);
        let stratum = crate::singular::jacobian_stratum(&full, &w, tol.rank);
        if p1.residual >= tol.accept || stratum != Stratum::S2 {
            continue;
        }
        let pattern = morse_pattern(family, &w);
        let hessian_rank = pattern.rank;
        points.push(S2Point { w, residual: p1.residual, stratum, hessian_rank, pattern });
    }
    if points.len() > 64 {
        return Err(DeformError::NonFinite);
    }
    points.sort_by(|a, b| norm(&a.w).total_cmp(&norm(&b.w)).then(a.w[1].arg().total_cmp(&b.w[1].arg())));
    Ok(points)
}

/// Independent S2 search on the full gradient system from a grid in the ball.
pub fn s2_search(poly: &MixedPolynomial, ball: f64, grid: usize, tol: &Tolerances) -> Vec<Vec<Complex64>> {
    let map = NumericMap::new(poly);
    let tau = 2.0 * std::f64::consts::PI;
    let mut seeds = Vec::new();
    for k in 0..grid {
        let r = ball * 10f64.powf(-3.0 * (k as f64) / grid.max(1) as f64);
        for a in 0..grid {
            let eta = (a as f64 + 0.5) / grid as f64 * std::f64::consts::FRAC_PI_2;
            for b in 0..2 * grid {
                for c in 0..2 * grid {
                    seeds.push(vec![
                        Complex64::from_polar(r * eta.cos(), tau * b as f64 / (2 * grid) as f64),
                        Complex64::from_polar(r * eta.sin(), tau * c as f64 / (2 * grid) as f64),
                    ]);
                }
            }
        }
    }
    let found: Vec<Vec<Complex64>> = seeds
        .par_iter()
        .filter_map(|w0| {
            let (w, _) = refine_s2(&map, w0, 60);
            let ok = norm(&w) > 1e-9
                && norm(&w) <= ball
                && collinearity_residual(&map, &w, tol).residual < tol.accept
                && crate::singular::jacobian_stratum(&map, &w, tol.rank) == Stratum::S2;
            ok.then_some(w)
        })
        .collect();
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for w in found {
        if !out.iter().any(|q| q.iter().zip(&w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() < 1e-8 * norm(&w)) {
            out.push(w);
        }
    }
    out.sort_by(|a, b| norm(a).total_cmp(&norm(b)).then(a[1].arg().total_cmp(&b[1].arg())));
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceHit {
    pub theta: f64,
    pub point: SingularPoint,
}

/// S1 points of a map without orbit structure, found on the phase slices `arg z_1 = theta_k`.
pub fn slice_locus(poly: &MixedPolynomial, slices: usize, params: &SearchParams) -> Vec<SliceHit> {
    let map = NumericMap::new(poly);
    let tau = 2.0 * std::f64::consts::PI;
    let pool = thread_pool(params.workers);
    let mut hits = Vec::new();
    for k in 0..slices {
        let theta = tau * k as f64 / slices as f64;
        let mut seeds = Vec::new();
        let radii: Vec<f64> = (0..params.grid)
            .map(|i| params.r_min * (params.r_max / params.r_min).powf(i as f64 / (params.grid.max(2) - 1) as f64))
            .collect();
        for &r in &radii {
            for a in 0..params.grid {
                let psi = (a as f64 + 0.5) / params.grid as f64 * std::f64::consts::FRAC_PI_2;
                for b in 0..2 * params.grid {
                    for ph in 0..params.phase_seeds.max(1) {
                        seeds.push((
                            vec![Complex64::from_polar(r * psi.cos(), theta), Complex64::from_polar(r * psi.sin(), tau * b as f64 / (2 * params.grid) as f64)],
                            tau * ph as f64 / params.phase_seeds.max(1) as f64,
                        ));
                    }
                }
            }
        }
        let opts = crate::singular::RefineOptions {
            max_iter: 50,
            tol: params.tol.clone(),
            annulus: Some((params.r_min, params.r_max)),
            max_travel: None,
            constraints: vec![LinearConstraint::phase(2, 0, theta)],
            phase_offset: 0.0,
        };
        let refined: Vec<Option<Vec<Complex64>>> = pool.install(|| {
            seeds
                .par_iter()
                .map(|(w, offset)| {
                    let mut o = opts.clone();
                    o.phase_offset = *offset;
                    crate::singular::refine(&map, w, &o).ok().map(|r| r.w)
                })
                .collect()
        });
        let mut found: Vec<Vec<Complex64>> = Vec::new();
        for w in refined.into_iter().flatten() {
            if w[0].re * theta.cos() + w[0].im * theta.sin() <= 0.0 {
                continue;
            }
            if !found.iter().any(|q| q.iter().zip(&w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() < 1e-6 * norm(&w)) {
                found.push(w);
            }
        }
        found.sort_by(|a, b| norm(a).total_cmp(&norm(b)).then(a[1].arg().total_cmp(&b[1].arg())));
        for w in found {
            hits.push(SliceHit { theta, point: classify(&map, &w, &params.tol) });
        }
    }
    hits
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotoneCurve {
    pub eigenvalue: f64,
    pub length: f64,
    pub steps: usize,
    /// `+1` strictly increasing, `-1` strictly decreasing, `0` neither.
    pub trend: i32,
}

/// `|F|^2` along `w + u v` for the extreme eigenvectors `v` of the restricted second form, with the
/// cokernel oriented along `F(w)`.
pub fn modulus_monotone_curves(poly: &MixedPolynomial, w: &[Complex64], steps: usize, tol: &Tolerances) -> Result<Vec<MonotoneCurve>, DeformError> {
    let map = NumericMap::new(poly);
    let form = crate::singular::intrinsic_second_form(&map, w, tol)?;
    let value = map.value(w);
    // orient the cokernel radially
    let radial = [value.re / value.norm(), value.im / value.norm()];
    let sign = if form.cokernel_direction[0] * radial[0] + form.cokernel_direction[1] * radial[1] >= 0.0 { 1.0 } else { -1.0 };
    let restricted = nalgebra::DMatrix::from_fn(3, 3, |r, c| form.restricted[r][c] * sign);
    let eig = nalgebra::SymmetricEigen::new(restricted);
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let base = to_real(w);
    let mut curves = Vec::new();
    for &k in [idx[0], idx[2]].iter() {
        let coeffs = eig.eigenvectors.column(k);
        let direction: Vec<f64> = (0..4).map(|r| (0..3).map(|c| form.kernel_basis[c][r] * coeffs[c]).sum()).collect();
        let mut length = 1e-2 * norm(w);
        let mut trend = 0;
        for _ in 0..6 {
            let values: Vec<f64> = (0..=steps)
                .map(|i| {
                    let u = length * i as f64 / steps as f64;
                    let pt: Vec<f64> = base.iter().zip(&direction).map(|(x, d)| x + u * d).collect();
                    map.value(&from_real(&pt)).norm_sqr()
                })
                .collect();
            let up = values.windows(2).all(|p| p[1] > p[0]);
            let down = values.windows(2).all(|p| p[1] < p[0]);
            trend = if up { 1 } else if down { -1 } else { 0 };
            if trend != 0 {
                break;
            }
            length *= 0.5;
        }
        curves.push(MonotoneCurve { eigenvalue: eig.eigenvalues[k], length, steps, trend });
    }
    Ok(curves)
}

/// Exact polar homogeneity: `F(s o z) - s^d F(z)` vanishes for a symbolic unit `s`.
pub fn polar_homogeneity_exact(poly: &MixedPolynomial, weights: &WeightSystem, degree: i64) -> bool {
    let parts = crate::mixedpoly::polar_action_laurent(poly, weights);
    parts.len() == 1 && parts.contains_key(&degree)
}

/// `t^2` scaling witness: the determinant at `2t` is four times the one at `t`.
pub fn scaled_family_t(family: &DeformationFamily, factor: i64) -> DeformationFamily {
    let mut out = family.clone();
    out.t = &family.t * BigRational::from_integer(factor.into());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_pair() -> WHPair {
        let f = z(0).pow(4).add(&z(1).pow(4));
        let g = z(0).pow(2).add(&z(1).pow(2));
        analyze_pair(&f, &g, 1, 1).unwrap()
    }

    fn one() -> ComplexScalar {
        ComplexScalar::one()
    }

    #[test]
    fn analyze_worked_pair() {
        let pair = worked_pair();
        assert_eq!((pair.m, pair.n), (4, 2));
        for c in [&pair.a1, &pair.a2, &pair.b1, &pair.b2] {
            assert_eq!(c, &one());
        }
    }

    #[test]
    fn analyze_rejections() {
        let q = z(0).pow(2).add(&z(1).pow(2));
        assert_eq!(analyze_pair(&q, &q, 1, 1), Err(DeformError::DegreeOrder { m: 2, n: 2 }));
        assert_eq!(analyze_pair(&z(0).mul(&z(1)), &z(0), 1, 1), Err(DeformError::NotConvenient("f")));
        let f = z(0).pow(4).add(&z(1).pow(4));
        assert_eq!(analyze_pair(&f, &q, 2, 4), Err(DeformError::WeightGcd(2)));
        assert_eq!(analyze_pair(&f, &q, 2, 1), Err(DeformError::WeightOrder { p: 2, q: 1 }));
        let mixed = f.add(&z(0).pow(3));
        assert!(matches!(analyze_pair(&mixed, &q, 1, 1), Err(DeformError::NotHomogeneous("f", 1, 1))));
    }

    #[test]
    fn case1_substitution() {
        let pair = worked_pair();
        let family = build_case1(&pair, &one(), &ComplexScalar::from(2), &rat(1, 10)).unwrap();
        let expected = pair
            .f
            .mul(&pair.g.conj())
            .add(&z(0).pow(2).add(&z(1).pow(2).scale(&ComplexScalar::from(2))).scale(&ComplexScalar::from_ratio(1, 10)));
        assert_eq!(family.first_stage(), expected);
        assert_eq!(family.polar_degree, 2);
        assert!(polar_homogeneity_exact(&family.first_stage(), &family.weights, 2));
        assert_eq!(build_case1(&pair, &one(), &ComplexScalar::zero(), &rat(1, 10)).unwrap_err(), DeformError::ZeroCoefficient("gamma2"));
    }

    #[test]
    fn feasibility_examples() {
        let pair = worked_pair();
        assert!(gamma_feasible(&pair, &one(), &ComplexScalar::from(2)).is_ok());
        assert_eq!(gamma_feasible(&pair, &ComplexScalar::from(-1), &one()), Err(DeformError::Infeasible(1)));
        assert_eq!(gamma_feasible(&pair, &ComplexScalar::i(), &one()), Err(DeformError::Infeasible(1)));
    }

    #[test]
    fn case2_substitution_and_degree() {
        let f = z(0).pow(3).add(&z(1).pow(3));
        let family = build_case2(&f, &one(), &one(), &rat(1, 10)).unwrap();
        let h = z(0).pow(3).mul(&MixedPolynomial::conj_var(2, 0)).add(&z(0).pow(2)).add(&z(1).pow(2));
        let expected = f.mul(&z(0).add(&z(1)).conj()).add(&h.scale(&ComplexScalar::from_ratio(1, 10)));
        assert_eq!(family.first_stage(), expected);
        assert_eq!(family.polar_degree, 2);
        assert_eq!(build_case2(&f, &ComplexScalar::zero(), &one(), &rat(1, 10)).unwrap_err(), DeformError::ZeroCoefficient("beta"));
    }

    #[test]
    fn case2_determinant_closed_form() {
        let f = z(0).pow(3).add(&z(1).pow(3));
        let family = build_case2(&f, &one(), &one(), &rat(1, 10)).unwrap();
        let (det, closed) = case2_det_identity(&family).unwrap();
        assert_eq!(det, closed);
        let expect = z(0).pow(4).mul(&z(1).pow(4)).scale(&ComplexScalar::from_ratio(81, 100));
        assert_eq!(det, expect);
        let zero_t = build_case2(&f, &one(), &one(), &rat(0, 1)).unwrap();
        assert!(case2_det_identity(&zero_t).unwrap().0.is_zero());
        let doubled = scaled_family_t(&family, 2);
        assert_eq!(case2_det_identity(&doubled).unwrap().0, det.scale(&ComplexScalar::from(4)));
    }

    #[test]
    fn rational_units_have_modulus_one() {
        for (a, b) in [(0, 1), (1, 2), (-7, 3), (5, 16)] {
            assert_eq!(rational_unit(a, b).norm_sqr(), rat(1, 1));
        }
    }

    #[test]
    fn durand_kerner_finds_fourth_roots_of_minus_one() {
        let roots = polynomial_roots(&[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert_eq!(roots.len(), 4);
        for r in roots {
            assert!((r.powi(4) + 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn condition_ii_violation_from_branch_of_g() {
        let pair = worked_pair();
        let family = build_case1(&pair, &one(), &ComplexScalar::from(2), &rat(1, 10)).unwrap();
        // c_1 z_1 + c_2 z_2 = z_1 - i z_2 divides z_1^2 + z_2^2
        let err = build_second_stage(&family, &one(), &-ComplexScalar::i(), &rat(1, 1000)).unwrap_err();
        assert!(matches!(err, DeformError::Condition { condition: "ii", .. }));
        assert_eq!(build_second_stage(&family, &one(), &ComplexScalar::zero(), &rat(1, 1000)).unwrap_err(), DeformError::ZeroCoefficient("c2"));
    }

    #[test]
    fn second_stage_hessian_unchanged() {
        let pair = worked_pair();
        let family = build_case1(&pair, &one(), &ComplexScalar::from(2), &rat(1, 10)).unwrap();
        let second = build_second_stage(&family, &one(), &one(), &rat(1, 1000)).unwrap();
        assert_eq!(mixed_hessian(&second.map()), mixed_hessian(&family.first_stage()));
    }

    #[test]
    fn orbit_derivative_closed_form() {
        let pair = worked_pair();
        let family = build_case1(&pair, &one(), &ComplexScalar::from(2), &rat(1, 10)).unwrap();
        let w = [c64(0.3, 0.1), c64(-0.2, 0.4)];
        let report = orbit_derivative_check(&family, &w, 8);
        assert!(report.max_error < 1e-6);
        let value = family.first_stage().evaluate(&w).unwrap();
        assert!((report.derivative_at_zero - c64(0.0, 2.0) * value).norm() < 1e-8);
    }
}
