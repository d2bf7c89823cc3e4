//! Mixed polynomials in `z_1..z_n` and their conjugates, with exact coefficients.
//!
//! A term `c z^nu zbar^mu` is keyed by the concatenated exponent vector `nu ++ mu`,
//! so the map order is the lexicographic order on `(nu, mu)`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::scalar::{rat, rat_to_f64, ComplexScalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixedPolyError {
    #[error("variable count mismatch: {0} vs {1}")]
    VariableCount(usize, usize),
    #[error("variable index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("point has dimension {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("zero polynomial has no well-defined degrees")]
    ZeroPolynomial,
    #[error("not weighted homogeneous: {0}")]
    NotHomogeneous(String),
    #[error("invalid weight system: {0}")]
    InvalidWeights(String),
}

pub type Exponents = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MixedPolynomial {
    n: usize,
    terms: BTreeMap<Exponents, ComplexScalar>,
}

/// One term viewed as `(nu, mu, coefficient)`.
#[derive(Clone, Debug)]
pub struct Term<'a> {
    pub nu: &'a [u32],
    pub mu: &'a [u32],
    pub coeff: &'a ComplexScalar,
}

fn add_into(terms: &mut BTreeMap<Exponents, ComplexScalar>, key: Exponents, coeff: ComplexScalar) {
    if coeff.is_zero() {
        return;
    }
    match terms.get_mut(&key) {
        Some(existing) => {
            let sum = &*existing + &coeff;
            if sum.is_zero() {
                terms.remove(&key);
            } else {
                *existing = sum;
            }
        }
        None => {
            terms.insert(key, coeff);
        }
    }
}

impl MixedPolynomial {
    pub fn zero(n: usize) -> Self {
        MixedPolynomial { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: ComplexScalar) -> Self {
        let mut p = MixedPolynomial::zero(n);
        add_into(&mut p.terms, vec![0; 2 * n], c);
        p
    }

    pub fn one(n: usize) -> Self {
        MixedPolynomial::constant(n, ComplexScalar::one())
    }

    /// Single term `c z^nu zbar^mu`.
    pub fn monomial(c: ComplexScalar, nu: &[u32], mu: &[u32]) -> Self {
        assert_eq!(nu.len(), mu.len(), "exponent tuples must have equal length");
        let n = nu.len();
        let mut key = nu.to_vec();
        key.extend_from_slice(mu);
        let mut p = MixedPolynomial::zero(n);
        add_into(&mut p.terms, key, c);
        p
    }

    /// `z_j` (0-based index).
    pub fn var(n: usize, j: usize) -> Self {
        let mut nu = vec![0; n];
        nu[j] = 1;
        MixedPolynomial::monomial(ComplexScalar::one(), &nu, &vec![0; n])
    }

    /// `zbar_j` (0-based index).
    pub fn conj_var(n: usize, j: usize) -> Self {
        let mut mu = vec![0; n];
        mu[j] = 1;
        MixedPolynomial::monomial(ComplexScalar::one(), &vec![0; n], &mu)
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, Vec<u32>, ComplexScalar)>,
    {
        let mut p = MixedPolynomial::zero(n);
        for (nu, mu, c) in terms {
            assert!(nu.len() == n && mu.len() == n, "exponent length must equal n");
            let mut key = nu;
            key.extend(mu);
            add_into(&mut p.terms, key, c);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = Term<'_>> {
        let n = self.n;
        self.terms.iter().map(move |(k, c)| Term { nu: &k[..n], mu: &k[n..], coeff: c })
    }

    /// Coefficient of `z^nu zbar^mu` (zero when absent).
    pub fn coeff(&self, nu: &[u32], mu: &[u32]) -> ComplexScalar {
        let mut key = nu.to_vec();
        key.extend_from_slice(mu);
        self.terms.get(&key).cloned().unwrap_or_else(ComplexScalar::zero)
    }

    /// True when no conjugate variable occurs.
    pub fn is_holomorphic(&self) -> bool {
        self.terms().all(|t| t.mu.iter().all(|&e| e == 0))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum::<u32>()).max().unwrap_or(0)
    }

    fn check_n(&self, other: &Self) -> Result<(), MixedPolyError> {
        if self.n != other.n {
            Err(MixedPolyError::VariableCount(self.n, other.n))
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, MixedPolyError> {
        self.check_n(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            add_into(&mut out.terms, k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, MixedPolyError> {
        self.check_n(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            add_into(&mut out.terms, k.clone(), -c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, MixedPolyError> {
        self.check_n(other)?;
        let mut out = MixedPolynomial::zero(self.n);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key: Exponents = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                add_into(&mut out.terms, key, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.try_add(other).expect("variable count mismatch")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.try_sub(other).expect("variable count mismatch")
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.try_mul(other).expect("variable count mismatch")
    }

    pub fn scale(&self, c: &ComplexScalar) -> Self {
        let mut out = MixedPolynomial::zero(self.n);
        for (k, v) in &self.terms {
            add_into(&mut out.terms, k.clone(), v * c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-ComplexScalar::one())
    }

    pub fn pow(&self, exp: u32) -> Self {
        let mut acc = MixedPolynomial::one(self.n);
        for _ in 0..exp {
            acc = acc.mul(self);
        }
        acc
    }

    /// Swaps `nu` and `mu` and conjugates every coefficient.
    pub fn conj(&self) -> Self {
        let n = self.n;
        let mut out = MixedPolynomial::zero(n);
        for (k, c) in &self.terms {
            let mut key = k[n..].to_vec();
            key.extend_from_slice(&k[..n]);
            add_into(&mut out.terms, key, c.conj());
        }
        out
    }

    /// Wirtinger derivative with respect to `z_j` or, when `barred`, `zbar_j` (0-based `j`).
    pub fn wirtinger(&self, j: usize, barred: bool) -> Result<Self, MixedPolyError> {
        if j >= self.n {
            return Err(MixedPolyError::IndexOutOfRange { index: j, n: self.n });
        }
        let slot = if barred { self.n + j } else { j };
        let mut out = MixedPolynomial::zero(self.n);
        for (k, c) in &self.terms {
            let e = k[slot];
            if e == 0 {
                continue;
            }
            let mut key = k.clone();
            key[slot] -= 1;
            add_into(&mut out.terms, key, c * &ComplexScalar::from(e as i64));
        }
        Ok(out)
    }

    pub fn dz(&self, j: usize) -> Self {
        self.wirtinger(j, false).expect("index out of range")
    }

    pub fn dzbar(&self, j: usize) -> Self {
        self.wirtinger(j, true).expect("index out of range")
    }

    /// Derivative with respect to the `a`-th entry of `(z_1..z_n, zbar_1..zbar_n)`.
    pub fn d_formal(&self, a: usize) -> Self {
        if a < self.n {
            self.dz(a)
        } else {
            self.dzbar(a - self.n)
        }
    }

    /// Numeric value with `zbar_j` bound to `conj(w_j)`.
    pub fn evaluate(&self, w: &[Complex64]) -> Result<Complex64, MixedPolyError> {
        if w.len() != self.n {
            return Err(MixedPolyError::Dimension { got: w.len(), expected: self.n });
        }
        Ok(NumericPoly::new(self).eval(w))
    }

    /// Sum of term magnitudes at `w`; a natural scale for cancellation tests.
    pub fn magnitude_at(&self, w: &[Complex64]) -> f64 {
        NumericPoly::new(self).magnitude(w)
    }

    /// Substitute polynomials for every `z_j` and `zbar_j` (the `subs` vector has length `2n`).
    pub fn substitute(&self, subs: &[MixedPolynomial]) -> MixedPolynomial {
        assert_eq!(subs.len(), 2 * self.n);
        let target_n = subs[0].n;
        let mut out = MixedPolynomial::zero(target_n);
        for (k, c) in &self.terms {
            let mut acc = MixedPolynomial::constant(target_n, c.clone());
            for (slot, &e) in k.iter().enumerate() {
                if e > 0 {
                    acc = acc.mul(&subs[slot].pow(e));
                }
            }
            out = out.add(&acc);
        }
        out
    }

    /// Embed into a ring with more variables (new variables absent).
    pub fn extend_vars(&self, new_n: usize) -> MixedPolynomial {
        assert!(new_n >= self.n);
        MixedPolynomial::from_terms(
            new_n,
            self.terms().map(|t| {
                let mut nu = t.nu.to_vec();
                nu.resize(new_n, 0);
                let mut mu = t.mu.to_vec();
                mu.resize(new_n, 0);
                (nu, mu, t.coeff.clone())
            }),
        )
    }

    /// Restriction to the `j`-th coordinate axis (other variables set to zero).
    pub fn restrict_to_axis(&self, j: usize) -> MixedPolynomial {
        let n = self.n;
        MixedPolynomial::from_terms(
            n,
            self.terms()
                .filter(|t| (0..n).all(|k| k == j || (t.nu[k] == 0 && t.mu[k] == 0)))
                .map(|t| (t.nu.to_vec(), t.mu.to_vec(), t.coeff.clone())),
        )
    }

    /// Every axis restriction is nonzero.
    pub fn is_convenient(&self) -> bool {
        (0..self.n).all(|j| !self.restrict_to_axis(j).is_zero())
    }

    /// Exact `(Re P, Im P)` in variables `(x_1..x_n, y_1..y_n)`.
    pub fn realize(&self) -> RealPolyPair {
        let n = self.n;
        // z_j = x_j + i y_j, zbar_j = x_j - i y_j as complex polynomials in x, y
        let mut subs = Vec::with_capacity(2 * n);
        for sign in [1i64, -1] {
            for j in 0..n {
                let mut x = vec![0; 2 * n];
                x[j] = 1;
                let mut y = vec![0; 2 * n];
                y[n + j] = 1;
                subs.push(CPoly::from_pairs(
                    2 * n,
                    vec![(x, ComplexScalar::one()), (y, ComplexScalar::from_ints(0, sign))],
                ));
            }
        }
        let mut total = CPoly::zero(2 * n);
        for (k, c) in &self.terms {
            let mut acc = CPoly::constant(2 * n, c.clone());
            for (slot, &e) in k.iter().enumerate() {
                for _ in 0..e {
                    acc = acc.mul(&subs[slot]);
                }
            }
            total = total.add(&acc);
        }
        let mut re = RealPoly::zero(2 * n);
        let mut im = RealPoly::zero(2 * n);
        for (k, c) in total.terms {
            re.add_term(k.clone(), c.re);
            im.add_term(k, c.im);
        }
        RealPolyPair { n, re_part: re, im_part: im }
    }

    /// Exponent-sum support `(nu_j + mu_j)_j` of every term.
    pub fn support_sums(&self) -> Vec<Vec<u32>> {
        self.terms().map(|t| t.nu.iter().zip(t.mu).map(|(a, b)| a + b).collect()).collect()
    }

    /// Sub-polynomial of the terms selected by `keep`.
    pub fn filter_terms(&self, mut keep: impl FnMut(&Term<'_>) -> bool) -> MixedPolynomial {
        MixedPolynomial::from_terms(
            self.n,
            self.terms()
                .filter(|t| keep(t))
                .map(|t| (t.nu.to_vec(), t.mu.to_vec(), t.coeff.clone())),
        )
    }
}

impl fmt::Display for MixedPolynomial {
    /// Canonical text: `(a+bi) * z1^2 * ~z2` terms joined by ` + `, zero as `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for t in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", t.coeff)?;
            for (prefix, exps) in [("z", t.nu), ("~z", t.mu)] {
                for (j, &e) in exps.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => write!(f, " * {}{}", prefix, j + 1)?,
                        _ => write!(f, " * {}{}^{}", prefix, j + 1, e)?,
                    }
                }
            }
        }
        Ok(())
    }
}

/// Complex-coefficient polynomial in plain variables; used for realization.
#[derive(Clone, Debug)]
struct CPoly {
    terms: BTreeMap<Exponents, ComplexScalar>,
    nvars: usize,
}

impl CPoly {
    fn zero(nvars: usize) -> Self {
        CPoly { terms: BTreeMap::new(), nvars }
    }

    fn constant(nvars: usize, c: ComplexScalar) -> Self {
        let mut p = CPoly::zero(nvars);
        add_into(&mut p.terms, vec![0; nvars], c);
        p
    }

    fn from_pairs(nvars: usize, pairs: Vec<(Exponents, ComplexScalar)>) -> Self {
        let mut p = CPoly::zero(nvars);
        for (k, c) in pairs {
            add_into(&mut p.terms, k, c);
        }
        p
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            add_into(&mut out.terms, k.clone(), c.clone());
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = CPoly::zero(self.nvars);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                add_into(&mut out.terms, ka.iter().zip(kb).map(|(a, b)| a + b).collect(), ca * cb);
            }
        }
        out
    }
}

/// Real polynomial with exact rational coefficients in `(x_1..x_n, y_1..y_n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealPoly {
    nvars: usize,
    terms: BTreeMap<Exponents, BigRational>,
}

impl RealPoly {
    pub fn zero(nvars: usize) -> Self {
        RealPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigRational)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, key: Exponents, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(key.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn sub(&self, other: &RealPoly) -> RealPoly {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), -c.clone());
        }
        out
    }

    pub fn derivative(&self, var: usize) -> RealPoly {
        let mut out = RealPoly::zero(self.nvars);
        for (k, c) in &self.terms {
            if k[var] == 0 {
                continue;
            }
            let mut key = k.clone();
            key[var] -= 1;
            out.add_term(key, c * rat(k[var] as i64, 1));
        }
        out
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, c)| {
                let mut v = rat_to_f64(c);
                for (x, &e) in point.iter().zip(k) {
                    v *= x.powi(e as i32);
                }
                v
            })
            .sum()
    }
}

/// `(Re P, Im P)` as exact real polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealPolyPair {
    pub n: usize,
    pub re_part: RealPoly,
    pub im_part: RealPoly,
}

impl RealPolyPair {
    /// Substitute `x = (z + zbar)/2`, `y = (z - zbar)/(2i)` into `re + i im`.
    pub fn to_mixed(&self) -> MixedPolynomial {
        let n = self.n;
        let half = ComplexScalar::from_ratio(1, 2);
        let minus_half_i = ComplexScalar::new(BigRational::zero(), rat(-1, 2));
        let mut subs = Vec::with_capacity(2 * n);
        for j in 0..n {
            subs.push(MixedPolynomial::var(n, j).add(&MixedPolynomial::conj_var(n, j)).scale(&half));
        }
        for j in 0..n {
            subs.push(
                MixedPolynomial::var(n, j)
                    .sub(&MixedPolynomial::conj_var(n, j))
                    .scale(&minus_half_i),
            );
        }
        let lift = |p: &RealPoly, c: ComplexScalar| {
            let mut out = MixedPolynomial::zero(n);
            for (k, v) in p.terms() {
                let mut acc = MixedPolynomial::constant(n, &ComplexScalar::real(v.clone()) * &c);
                for (slot, &e) in k.iter().enumerate() {
                    if e > 0 {
                        acc = acc.mul(&subs[slot].pow(e));
                    }
                }
                out = out.add(&acc);
            }
            out
        };
        lift(&self.re_part, ComplexScalar::one()).add(&lift(&self.im_part, ComplexScalar::i()))
    }

    /// Value of `re + i im` at the real point `(x, y)` built from `w`.
    pub fn evaluate(&self, w: &[Complex64]) -> Complex64 {
        let point: Vec<f64> = w.iter().map(|z| z.re).chain(w.iter().map(|z| z.im)).collect();
        Complex64::new(self.re_part.evaluate(&point), self.im_part.evaluate(&point))
    }
}

/// Polar weights `p` and radial weights `q`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct WeightSystem {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
}

impl WeightSystem {
    pub fn new(p: Vec<i64>, q: Vec<i64>) -> Result<Self, MixedPolyError> {
        if p.len() != q.len() || p.is_empty() {
            return Err(MixedPolyError::InvalidWeights("p and q must have equal nonzero length".into()));
        }
        let g = p.iter().fold(0i64, |acc, &v| acc.gcd(&v));
        if g != 1 {
            return Err(MixedPolyError::InvalidWeights(format!("gcd of polar weights is {g}")));
        }
        if q.iter().any(|&v| v <= 0) {
            return Err(MixedPolyError::InvalidWeights("radial weights must be positive".into()));
        }
        Ok(WeightSystem { p, q })
    }

    /// Same weights for both actions.
    pub fn uniform(weights: Vec<i64>) -> Result<Self, MixedPolyError> {
        WeightSystem::new(weights.clone(), weights)
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    fn polar_degree_of(&self, nu: &[u32], mu: &[u32]) -> i64 {
        self.p.iter().zip(nu.iter().zip(mu)).map(|(w, (a, b))| w * (*a as i64 - *b as i64)).sum()
    }

    fn radial_degree_of(&self, nu: &[u32], mu: &[u32]) -> i64 {
        self.q.iter().zip(nu.iter().zip(mu)).map(|(w, (a, b))| w * (*a as i64 + *b as i64)).sum()
    }

    /// `s o w = (s^{p_1} w_1, ..)` for unit `s`.
    pub fn act_polar(&self, s: Complex64, w: &[Complex64]) -> Vec<Complex64> {
        w.iter().zip(&self.p).map(|(z, &e)| z * s.powi(e as i32)).collect()
    }

    /// `r o w = (r^{q_1} w_1, ..)` for positive `r`.
    pub fn act_radial(&self, r: f64, w: &[Complex64]) -> Vec<Complex64> {
        w.iter().zip(&self.q).map(|(z, &e)| z * r.powi(e as i32)).collect()
    }
}

/// Degrees found per action; `None` where terms disagree.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct DegreeReport {
    pub polar: Option<i64>,
    pub radial: Option<i64>,
}

impl DegreeReport {
    pub fn degrees(&self) -> Option<(i64, i64)> {
        Some((self.polar?, self.radial?))
    }
}

fn common_value(values: impl Iterator<Item = i64>) -> Option<i64> {
    let mut found = None;
    for v in values {
        match found {
            None => found = Some(v),
            Some(u) if u != v => return None,
            _ => {}
        }
    }
    found
}

pub fn polar_radial_degrees(p: &MixedPolynomial, w: &WeightSystem) -> Result<DegreeReport, MixedPolyError> {
    if p.is_zero() {
        return Err(MixedPolyError::ZeroPolynomial);
    }
    if w.n() != p.n() {
        return Err(MixedPolyError::VariableCount(p.n(), w.n()));
    }
    Ok(DegreeReport {
        polar: common_value(p.terms().map(|t| w.polar_degree_of(t.nu, t.mu))),
        radial: common_value(p.terms().map(|t| w.radial_degree_of(t.nu, t.mu))),
    })
}

/// Differences `lhs - rhs` of the Euler-type identities; all zero when they hold.
#[derive(Clone, Debug)]
pub struct EulerReport {
    pub d_p: i64,
    pub d_r: i64,
    pub polar_difference: MixedPolynomial,
    pub radial_difference: MixedPolynomial,
    /// Present when `p == q`.
    pub weighted_euler_difference: Option<MixedPolynomial>,
}

impl EulerReport {
    pub fn holds(&self) -> bool {
        self.polar_difference.is_zero()
            && self.radial_difference.is_zero()
            && self.weighted_euler_difference.as_ref().is_none_or(|d| d.is_zero())
    }
}

pub fn verify_euler_identities(p: &MixedPolynomial, w: &WeightSystem) -> Result<EulerReport, MixedPolyError> {
    let report = polar_radial_degrees(p, w)?;
    let (d_p, d_r) = report.degrees().ok_or_else(|| {
        let which = match (report.polar, report.radial) {
            (None, None) => "polar and radial degrees",
            (None, _) => "polar degree",
            _ => "radial degree",
        };
        MixedPolyError::NotHomogeneous(format!("{which} not constant across terms"))
    })?;
    let n = p.n();
    let mut polar_sum = MixedPolynomial::zero(n);
    let mut radial_sum = MixedPolynomial::zero(n);
    let mut holo_sum = MixedPolynomial::zero(n);
    for j in 0..n {
        let zj = MixedPolynomial::var(n, j);
        let zbj = MixedPolynomial::conj_var(n, j);
        let a = p.dz(j).mul(&zj);
        let b = p.dzbar(j).mul(&zbj);
        polar_sum = polar_sum.add(&a.sub(&b).scale(&ComplexScalar::from(w.p[j])));
        radial_sum = radial_sum.add(&a.add(&b).scale(&ComplexScalar::from(w.q[j])));
        holo_sum = holo_sum.add(&a.scale(&ComplexScalar::from(w.p[j])));
    }
    let weighted_euler_difference = (w.p == w.q)
        .then(|| holo_sum.sub(&p.scale(&ComplexScalar::from_ratio(d_p + d_r, 2))));
    Ok(EulerReport {
        d_p,
        d_r,
        polar_difference: p.scale(&ComplexScalar::from(d_p)).sub(&polar_sum),
        radial_difference: p.scale(&ComplexScalar::from(d_r)).sub(&radial_sum),
        weighted_euler_difference,
    })
}

/// `P(s o z)` split by the power of a formal unit parameter `s`: key `k` holds the part scaling as `s^k`.
pub fn polar_action_laurent(p: &MixedPolynomial, w: &WeightSystem) -> BTreeMap<i64, MixedPolynomial> {
    let mut out: BTreeMap<i64, MixedPolynomial> = BTreeMap::new();
    for t in p.terms() {
        let k = w.polar_degree_of(t.nu, t.mu);
        let term = MixedPolynomial::monomial(t.coeff.clone(), t.nu, t.mu);
        let slot = out.entry(k).or_insert_with(|| MixedPolynomial::zero(p.n()));
        *slot = slot.add(&term);
    }
    out
}

/// `P(s o z)` for an exact nonzero `s`, with `zbar_j` sent to `conj(s)^{p_j} zbar_j`.
pub fn polar_act_poly(p: &MixedPolynomial, s: &ComplexScalar, w: &WeightSystem) -> MixedPolynomial {
    let sc = s.conj();
    MixedPolynomial::from_terms(
        p.n(),
        p.terms().map(|t| {
            let a: i64 = w.p.iter().zip(t.nu).map(|(pw, &e)| pw * e as i64).sum();
            let b: i64 = w.p.iter().zip(t.mu).map(|(pw, &e)| pw * e as i64).sum();
            let factor = &s.powi(a).expect("s nonzero") * &sc.powi(b).expect("s nonzero");
            (t.nu.to_vec(), t.mu.to_vec(), t.coeff * &factor)
        }),
    )
}

/// `P(r o z)` for an exact positive rational `r`.
pub fn radial_act_poly(p: &MixedPolynomial, r: &BigRational, w: &WeightSystem) -> MixedPolynomial {
    let r = ComplexScalar::real(r.clone());
    MixedPolynomial::from_terms(
        p.n(),
        p.terms().map(|t| {
            let d = w.radial_degree_of(t.nu, t.mu);
            (t.nu.to_vec(), t.mu.to_vec(), t.coeff * &r.powi(d).expect("r nonzero"))
        }),
    )
}

/// Float-coefficient copy of a polynomial for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct NumericPoly {
    n: usize,
    max_exp: Vec<u32>,
    terms: Vec<(Complex64, Vec<u32>)>,
}

impl NumericPoly {
    pub fn new(p: &MixedPolynomial) -> Self {
        let n = p.n();
        let mut max_exp = vec![0u32; 2 * n];
        let terms = p
            .terms
            .iter()
            .map(|(k, c)| {
                for (m, &e) in max_exp.iter_mut().zip(k) {
                    *m = (*m).max(e);
                }
                (c.to_c64(), k.clone())
            })
            .collect();
        NumericPoly { n, max_exp, terms }
    }

    fn powers(&self, w: &[Complex64]) -> Vec<Vec<Complex64>> {
        let n = self.n;
        (0..2 * n)
            .map(|slot| {
                let base = if slot < n { w[slot] } else { w[slot - n].conj() };
                let mut row = Vec::with_capacity(self.max_exp[slot] as usize + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                row.push(acc);
                for _ in 0..self.max_exp[slot] {
                    acc *= base;
                    row.push(acc);
                }
                row
            })
            .collect()
    }

    pub fn eval(&self, w: &[Complex64]) -> Complex64 {
        let pw = self.powers(w);
        self.terms
            .iter()
            .map(|(c, k)| k.iter().enumerate().fold(*c, |acc, (slot, &e)| acc * pw[slot][e as usize]))
            .sum()
    }

    pub fn magnitude(&self, w: &[Complex64]) -> f64 {
        let pw = self.powers(w);
        self.terms
            .iter()
            .map(|(c, k)| k.iter().enumerate().fold(c.norm(), |acc, (slot, &e)| acc * pw[slot][e as usize].norm()))
            .sum()
    }
}

pub mod generate {
    //! Random polynomial generators for property tests.
    use super::*;
    use rand::Rng;

    pub fn random_scalar<R: Rng>(rng: &mut R, max: i64) -> ComplexScalar {
        ComplexScalar::new(
            rat(rng.gen_range(-max..=max), rng.gen_range(1..=4)),
            rat(rng.gen_range(-max..=max), rng.gen_range(1..=4)),
        )
    }

    pub fn random_poly<R: Rng>(rng: &mut R, n: usize, term_count: usize, max_exp: u32) -> MixedPolynomial {
        MixedPolynomial::from_terms(
            n,
            (0..term_count).map(|_| {
                let nu = (0..n).map(|_| rng.gen_range(0..=max_exp)).collect();
                let mu = (0..n).map(|_| rng.gen_range(0..=max_exp)).collect();
                (nu, mu, random_scalar(rng, 5))
            }),
        )
    }

    fn all_exponents(n: usize, max_exp: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for _ in 0..2 * n {
            out = out
                .into_iter()
                .flat_map(|v: Vec<u32>| {
                    (0..=max_exp).map(move |e| {
                        let mut w = v.clone();
                        w.push(e);
                        w
                    })
                })
                .collect();
        }
        out
    }

    /// Random weights and a nonzero polynomial homogeneous for them.
    pub fn random_weighted_homogeneous<R: Rng>(
        rng: &mut R,
        n: usize,
        max_exp: u32,
    ) -> (MixedPolynomial, WeightSystem) {
        loop {
            let mut p: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
            p[0] = 1;
            let q: Vec<i64> = if rng.gen_bool(0.5) { p.clone() } else { (0..n).map(|_| rng.gen_range(1..=3)).collect() };
            let w = WeightSystem::new(p, q).expect("gcd 1 by construction");
            let exps = all_exponents(n, max_exp);
            let pick = &exps[rng.gen_range(0..exps.len())];
            let (nu, mu) = pick.split_at(n);
            if nu.iter().chain(mu).all(|&e| e == 0) {
                continue;
            }
            let dp = w.polar_degree_of(nu, mu);
            let dr = w.radial_degree_of(nu, mu);
            let matching: Vec<&Vec<u32>> = exps
                .iter()
                .filter(|k| {
                    let (a, b) = k.split_at(n);
                    w.polar_degree_of(a, b) == dp && w.radial_degree_of(a, b) == dr
                })
                .collect();
            let count = rng.gen_range(1..=matching.len().min(5));
            let poly = MixedPolynomial::from_terms(
                n,
                (0..count).map(|_| {
                    let k = matching[rng.gen_range(0..matching.len())];
                    (k[..n].to_vec(), k[n..].to_vec(), random_scalar(rng, 5))
                }),
            );
            if !poly.is_zero() {
                return (poly, w);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: i64, im: i64) -> Complex64 {
        Complex64::new(re as f64, im as f64)
    }

    fn z(j: usize) -> MixedPolynomial {
        MixedPolynomial::var(2, j)
    }

    fn zb(j: usize) -> MixedPolynomial {
        MixedPolynomial::conj_var(2, j)
    }

    fn worked_base() -> MixedPolynomial {
        let f = z(0).pow(4).add(&z(1).pow(4));
        let g = z(0).pow(2).add(&z(1).pow(2));
        f.mul(&g.conj())
    }

    #[test]
    fn conjugation_swaps_exponents() {
        let p = z(0).pow(2).mul(&zb(1));
        assert_eq!(p.conj(), zb(0).pow(2).mul(&z(1)));
    }

    #[test]
    fn difference_of_squares() {
        let a = MixedPolynomial::var(1, 0);
        let b = MixedPolynomial::conj_var(1, 0);
        assert_eq!(a.add(&b).mul(&a.sub(&b)), a.pow(2).sub(&b.pow(2)));
    }

    #[test]
    fn product_has_four_terms() {
        let p = worked_base();
        assert_eq!(p.len(), 4);
        assert_eq!(p.coeff(&[4, 0], &[2, 0]), ComplexScalar::one());
        assert_eq!(p.coeff(&[0, 4], &[0, 2]), ComplexScalar::one());
    }

    #[test]
    fn wirtinger_examples() {
        let a = MixedPolynomial::var(1, 0);
        let b = MixedPolynomial::conj_var(1, 0);
        let p = a.mul(&b);
        assert_eq!(p.dz(0), b);
        assert_eq!(p.dzbar(0), a);
        let q = z(0).pow(4).mul(&zb(1).pow(2));
        assert_eq!(q.dzbar(1), z(0).pow(4).mul(&zb(1)).scale(&ComplexScalar::from(2)));
        assert!(q.wirtinger(2, false).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let a = MixedPolynomial::var(1, 0);
        let b = MixedPolynomial::conj_var(1, 0);
        assert!((a.mul(&b).evaluate(&[c(3, 4)]).unwrap() - c(25, 0)).norm() < 1e-12);
        assert!(a.pow(2).sub(&b.pow(2)).evaluate(&[c(0, 1)]).unwrap().norm() < 1e-12);
        assert!((worked_base().evaluate(&[c(1, 0), c(1, 0)]).unwrap() - c(4, 0)).norm() < 1e-12);
        assert!(a.evaluate(&[c(1, 0), c(0, 0)]).is_err());
    }

    #[test]
    fn realize_examples() {
        let a = MixedPolynomial::var(1, 0);
        let b = MixedPolynomial::conj_var(1, 0);
        let r = a.mul(&b).realize();
        let mut expect = RealPoly::zero(2);
        expect.add_term(vec![2, 0], rat(1, 1));
        expect.add_term(vec![0, 2], rat(1, 1));
        assert_eq!(r.re_part, expect);
        assert!(r.im_part.is_zero());

        let sq = a.pow(2).realize();
        let mut re = RealPoly::zero(2);
        re.add_term(vec![2, 0], rat(1, 1));
        re.add_term(vec![0, 2], rat(-1, 1));
        let mut im = RealPoly::zero(2);
        im.add_term(vec![1, 1], rat(2, 1));
        assert_eq!((sq.re_part, sq.im_part), (re, im));

        let cj = b.realize();
        let mut re = RealPoly::zero(2);
        re.add_term(vec![1, 0], rat(1, 1));
        let mut im = RealPoly::zero(2);
        im.add_term(vec![0, 1], rat(-1, 1));
        assert_eq!((cj.re_part, cj.im_part), (re, im));
    }

    #[test]
    fn round_trip_through_real_pair() {
        let p = worked_base().add(&z(1).mul(&zb(0)).scale(&ComplexScalar::from_ints(2, -3)));
        assert_eq!(p.realize().to_mixed(), p);
    }

    #[test]
    fn convenience() {
        assert!(z(0).pow(4).add(&z(1).pow(4)).is_convenient());
        assert!(!z(0).mul(&z(1)).is_convenient());
        assert!(z(0).pow(3).mul(&zb(0)).add(&z(1).pow(2)).is_convenient());
    }

    #[test]
    fn degree_examples() {
        let one = WeightSystem::uniform(vec![1]).unwrap();
        let a = MixedPolynomial::var(1, 0);
        let b = MixedPolynomial::conj_var(1, 0);
        assert_eq!(polar_radial_degrees(&a.mul(&b), &one).unwrap().degrees(), Some((0, 2)));
        let w = WeightSystem::uniform(vec![1, 1]).unwrap();
        assert_eq!(polar_radial_degrees(&worked_base(), &w).unwrap().degrees(), Some((2, 6)));
        let mixed = polar_radial_degrees(&a.pow(2).add(&b.pow(2)), &one).unwrap();
        assert_eq!(mixed.polar, None);
        assert_eq!(mixed.radial, Some(2));
        assert_eq!(polar_radial_degrees(&MixedPolynomial::zero(1), &one), Err(MixedPolyError::ZeroPolynomial));
    }

    #[test]
    fn euler_examples() {
        let one = WeightSystem::uniform(vec![1]).unwrap();
        let a = MixedPolynomial::var(1, 0);
        let b = MixedPolynomial::conj_var(1, 0);
        assert!(verify_euler_identities(&a.mul(&b), &one).unwrap().holds());
        assert!(verify_euler_identities(&a.pow(3), &one).unwrap().holds());
        let w = WeightSystem::uniform(vec![1, 1]).unwrap();
        let report = verify_euler_identities(&worked_base(), &w).unwrap();
        assert!(report.holds());
        assert_eq!((report.d_p, report.d_r), (2, 6));
        assert!(verify_euler_identities(&a.pow(2).add(&b.pow(2)), &one).is_err());
    }

    #[test]
    fn group_action_examples() {
        let w = WeightSystem::uniform(vec![1, 3]).unwrap();
        let acted = w.act_polar(c(0, 1), &[c(1, 0), c(1, 0)]);
        assert!((acted[0] - c(0, 1)).norm() < 1e-15 && (acted[1] - c(0, -1)).norm() < 1e-15);
        let w11 = WeightSystem::uniform(vec![1, 1]).unwrap();
        let r = w11.act_radial(2.0, &[c(1, 0), c(0, 0)]);
        assert!((r[0] - c(2, 0)).norm() < 1e-15 && r[1].norm() == 0.0);

        let p = worked_base();
        let theta: f64 = 0.7;
        let s = Complex64::from_polar(1.0, theta);
        let pt = [Complex64::new(0.3, -0.2), Complex64::new(-0.5, 0.1)];
        let lhs = p.evaluate(&w11.act_polar(s, &pt)).unwrap();
        let rhs = Complex64::from_polar(1.0, 2.0 * theta) * p.evaluate(&pt).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn exact_action_by_rational_unit() {
        let w = WeightSystem::uniform(vec![1, 1]).unwrap();
        let p = worked_base();
        let s = ComplexScalar::new(rat(3, 5), rat(4, 5));
        let lhs = polar_act_poly(&p, &s, &w);
        assert_eq!(lhs, p.scale(&s.pow(2)));
        let laurent = polar_action_laurent(&p, &w);
        assert_eq!(laurent.keys().copied().collect::<Vec<_>>(), vec![2]);
        let r = rat(3, 2);
        assert_eq!(radial_act_poly(&p, &r, &w), p.scale(&ComplexScalar::real(r.pow(6))));
    }

    #[test]
    fn display_canonical() {
        let p = z(0).pow(2).mul(&zb(1)).scale(&ComplexScalar::from_ints(1, -2)).add(&MixedPolynomial::one(2));
        assert_eq!(p.to_string(), "(1+0i) + (1-2i) * z1^2 * ~z2");
        assert_eq!(MixedPolynomial::zero(2).to_string(), "0");
    }
}
