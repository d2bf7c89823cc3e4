//! Newton boundary, links of singularities traced on small spheres, and Gauss linking numbers.
//!
//! Points on `S^3` are handled in the complex order `(x_1, y_1, x_2, y_2)`. A link component is
//! oriented so that `det[grad Re P, grad Im P, grad rho, T] > 0`, which is the complex orientation
//! when `P` is holomorphic.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::deform::WHPair;
use crate::mixedpoly::{polar_radial_degrees, MixedPolynomial, WeightSystem};
use crate::numeric::{c64, lstsq, NumericMap};
use crate::scalar::ComplexScalar;
use crate::singular::canonical_representative;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("polynomial is not convenient")]
    NotConvenient,
    #[error("expected 2 variables, got {0}")]
    VariableCount(usize),
    #[error("step size collapsed near {0:?}")]
    StepCollapse([f64; 4]),
    #[error("curve did not close after {0} steps")]
    NonClosure(usize),
    #[error("value is not regular on the sphere: rank margin {0:e}")]
    RankDrop(f64),
    #[error("curves too close: distance {0:e}")]
    CurvesTooClose(f64),
    #[error("linking integral {0} is not near an integer")]
    NonInteger(f64),
    #[error("link did not stabilize after {0} shrinks")]
    NoStabilization(usize),
}

/// A compact edge of the Newton boundary with its primitive normal `(a, b)` and degree `d`.
#[derive(Clone, Debug, Serialize)]
pub struct Face {
    pub start: (u32, u32),
    pub end: (u32, u32),
    pub normal: (i64, i64),
    pub degree: i64,
    #[serde(serialize_with = "crate::link::display_poly")]
    pub function: MixedPolynomial,
}

pub(crate) fn display_poly<S: serde::Serializer>(p: &MixedPolynomial, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonData {
    pub support: Vec<(u32, u32)>,
    pub faces: Vec<Face>,
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

pub fn newton_boundary(p: &MixedPolynomial) -> Result<NewtonData, LinkError> {
    if p.n() != 2 {
        return Err(LinkError::VariableCount(p.n()));
    }
    let mut support: Vec<(u32, u32)> = p.support_sums().into_iter().map(|s| (s[0], s[1])).collect();
    support.sort();
    support.dedup();
    let a = support.iter().filter(|s| s.1 == 0).map(|s| s.0).min();
    let b = support.iter().filter(|s| s.0 == 0).map(|s| s.1).min();
    let (Some(a), Some(b)) = (a, b) else { return Err(LinkError::NotConvenient) };
    // lower-left hull from (0, b) to (a, 0)
    let mut pts: Vec<(i64, i64)> = support.iter().map(|&(x, y)| (x as i64, y as i64)).filter(|&(x, y)| x <= a as i64 && y <= b as i64).collect();
    pts.sort();
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for pt in pts {
        if hull.last().is_some_and(|l| l.0 == pt.0) {
            continue;
        }
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0 {
            hull.pop();
        }
        hull.push(pt);
    }
    let end = hull.iter().position(|&q| q == (a as i64, 0)).expect("axis point on hull");
    hull.truncate(end + 1);
    let mut faces = Vec::new();
    for edge in hull.windows(2) {
        let (s, e) = (edge[0], edge[1]);
        let (dx, dy) = (e.0 - s.0, s.1 - e.1);
        let g = num_integer::gcd(dx, dy);
        let normal = (dy / g, dx / g);
        let degree = normal.0 * s.0 + normal.1 * s.1;
        let function = p.filter_terms(|t| {
            let x = (t.nu[0] + t.mu[0]) as i64;
            let y = (t.nu[1] + t.mu[1]) as i64;
            normal.0 * x + normal.1 * y == degree
        });
        faces.push(Face { start: (s.0 as u32, s.1 as u32), end: (e.0 as u32, e.1 as u32), normal, degree, function });
    }
    Ok(NewtonData { support, faces })
}

type P4 = [f64; 4];

fn sub(a: &P4, b: &P4) -> P4 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn dot(a: &P4, b: &P4) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn len(a: &P4) -> f64 {
    dot(a, a).sqrt()
}

fn to_point(w: &[Complex64]) -> P4 {
    [w[0].re, w[0].im, w[1].re, w[1].im]
}

fn to_complex(x: &P4) -> [Complex64; 2] {
    [c64(x[0], x[1]), c64(x[2], x[3])]
}

/// The map `P - value` on the sphere of radius `radius` about `center`, as three real equations.
struct SphereSystem {
    map: NumericMap,
    value: Complex64,
    center: P4,
    radius: f64,
}

impl SphereSystem {
    fn residual(&self, x: &P4) -> [f64; 3] {
        let v = self.map.value(&to_complex(x)) - self.value;
        let d = sub(x, &self.center);
        [v.re, v.im, (dot(&d, &d) - self.radius * self.radius) / (2.0 * self.radius)]
    }

    fn scale(&self, x: &P4) -> f64 {
        self.map.magnitude(&to_complex(x)) + self.value.norm()
    }

    /// Rows `grad Re P`, `grad Im P`, `(x - center)/radius` in complex order.
    fn jacobian(&self, x: &P4) -> [P4; 3] {
        let j = self.map.real_jacobian(&to_complex(x));
        let d = sub(x, &self.center);
        let r = self.radius;
        [
            [j[(0, 0)], j[(0, 2)], j[(0, 1)], j[(0, 3)]],
            [j[(1, 0)], j[(1, 2)], j[(1, 1)], j[(1, 3)]],
            [d[0] / r, d[1] / r, d[2] / r, d[3] / r],
        ]
    }

    fn tangent(&self, x: &P4) -> P4 {
        let rows = self.jacobian(x);
        let mut t = [0.0; 4];
        for (k, tk) in t.iter_mut().enumerate() {
            let mut m = Matrix4::zeros();
            for r in 0..3 {
                for c in 0..4 {
                    m[(r, c)] = rows[r][c];
                }
            }
            m[(3, k)] = 1.0;
            *tk = m.determinant();
        }
        let l = len(&t);
        t.map(|v| v / l)
    }

    /// Third singular value over the first, with rows normalized.
    fn rank_margin(&self, x: &P4) -> f64 {
        let rows = self.jacobian(x);
        let m = DMatrix::from_fn(3, 4, |r, c| rows[r][c] / len(&rows[r]).max(1e-300));
        let sv = crate::numeric::singular_values(&m);
        sv[2] / sv[0].max(1e-300)
    }

    fn on_curve(&self, x: &P4, rows: &[P4; 3]) -> bool {
        let res = self.residual(x);
        let slope = len(&rows[0]).max(len(&rows[1])) * self.radius;
        res[0].hypot(res[1]) <= 1e-12 * (self.scale(x) + slope) && res[2].abs() <= 1e-13 * self.radius
    }

    /// Minimum-norm Newton onto the curve.
    fn correct(&self, x0: &P4, iterations: usize) -> Option<P4> {
        let mut x = *x0;
        for _ in 0..iterations {
            let rows = self.jacobian(&x);
            if self.on_curve(&x, &rows) {
                return Some(x);
            }
            let res = self.residual(&x);
            let jac = DMatrix::from_fn(3, 4, |r, c| rows[r][c]);
            let rhs = DVector::from_vec(res.iter().map(|v| -v).collect());
            let delta = lstsq(&jac, &rhs);
            for k in 0..4 {
                x[k] += delta[k];
            }
            if !x.iter().all(|v| v.is_finite()) {
                return None;
            }
        }
        let rows = self.jacobian(&x);
        self.on_curve(&x, &rows).then_some(x)
    }

    /// Newton onto the curve inside the hyperplane through `anchor` with normal `normal`.
    fn correct_in_plane(&self, x0: &P4, anchor: &P4, normal: &P4) -> Option<P4> {
        let mut x = *x0;
        for _ in 0..30 {
            let rows = self.jacobian(&x);
            let res = self.residual(&x);
            let offset = dot(&sub(&x, anchor), normal);
            if self.on_curve(&x, &rows) && offset.abs() <= 1e-14 * self.radius {
                return Some(x);
            }
            let jac = DMatrix::from_fn(4, 4, |r, c| if r < 3 { rows[r][c] } else { normal[c] });
            let rhs = DVector::from_vec(vec![-res[0], -res[1], -res[2], -offset]);
            let delta = lstsq(&jac, &rhs);
            for k in 0..4 {
                x[k] += delta[k];
            }
            if !x.iter().all(|v| v.is_finite()) {
                return None;
            }
        }
        let rows = self.jacobian(&x);
        self.on_curve(&x, &rows).then_some(x)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceParams {
    /// Largest step as a fraction of the radius.
    pub max_step: f64,
    /// Seed grid density on the sphere.
    pub seed_grid: usize,
    /// Samples per orbit component.
    pub orbit_samples: usize,
    pub max_steps: usize,
    /// Use the orbit method when the polynomial is polar homogeneous for these weights.
    pub weights: Option<WeightSystem>,
    pub force_general: bool,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams { max_step: 0.05, seed_grid: 8, orbit_samples: 256, max_steps: 20000, weights: None, force_general: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TraceMethod {
    Orbit,
    General,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkComponent {
    pub points: Vec<P4>,
    /// Turns of `arg(z_1 - c_1)` and `arg(z_2 - c_2)` along the oriented curve.
    pub winding: (i64, i64),
    pub closure_gap: f64,
    pub rank_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkReport {
    pub schema: String,
    pub center: [f64; 4],
    pub value: Complex64,
    pub radius: f64,
    pub method: TraceMethod,
    pub components: Vec<LinkComponent>,
    pub linking: Vec<Vec<i64>>,
    pub linking_raw: Vec<Vec<f64>>,
}

impl LinkReport {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// `component_index,x1,y1,x2,y2` rows.
    pub fn points_csv(&self) -> String {
        let mut out = String::from("component_index,x1,y1,x2,y2\n");
        for (k, c) in self.components.iter().enumerate() {
            for p in &c.points {
                out.push_str(&format!("{k},{},{},{},{}\n", p[0], p[1], p[2], p[3]));
            }
        }
        out
    }

    /// Stereographic image in `R^3`: `component_index,X,Y,Z`.
    pub fn plot_csv(&self) -> String {
        let curves: Vec<Vec<P4>> = self.components.iter().map(|c| c.points.clone()).collect();
        let projected = project_all(&curves, &self.center, self.radius);
        let mut out = String::from("component_index,X,Y,Z\n");
        for (k, c) in projected.iter().enumerate() {
            for p in c {
                out.push_str(&format!("{k},{},{},{}\n", p[0], p[1], p[2]));
            }
        }
        out
    }
}

fn winding_of(points: &[P4], center: &P4) -> (i64, i64) {
    let turns = |re: usize, im: usize| -> i64 {
        let args: Vec<Option<f64>> = points
            .iter()
            .map(|p| {
                let (a, b) = (p[re] - center[re], p[im] - center[im]);
                (a.hypot(b) > 1e-12).then(|| b.atan2(a))
            })
            .collect();
        if args.iter().any(Option::is_none) {
            return 0;
        }
        let mut total = 0.0;
        for k in 0..args.len() {
            let a = args[k].unwrap();
            let b = args[(k + 1) % args.len()].unwrap();
            let mut d = b - a;
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            total += d;
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i64
    };
    (turns(0, 1), turns(2, 3))
}

fn sphere_seeds(center: &P4, radius: f64, grid: usize) -> Vec<P4> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut seeds = Vec::new();
    for a in 0..grid {
        let psi = (a as f64 + 0.5) / grid as f64 * std::f64::consts::FRAC_PI_2;
        for b in 0..2 * grid {
            for c in 0..2 * grid {
                let t1 = tau * (b as f64 + 0.25) / (2 * grid) as f64;
                let t2 = tau * (c as f64 + 0.75) / (2 * grid) as f64;
                seeds.push([
                    center[0] + radius * psi.cos() * t1.cos(),
                    center[1] + radius * psi.cos() * t1.sin(),
                    center[2] + radius * psi.sin() * t2.cos(),
                    center[3] + radius * psi.sin() * t2.sin(),
                ]);
            }
        }
    }
    seeds
}

fn trace_component(sys: &SphereSystem, start: &P4, params: &TraceParams) -> Result<LinkComponent, LinkError> {
    let eps = sys.radius;
    let h_max = params.max_step * eps;
    let mut h = h_max;
    let mut x = *start;
    let mut t = sys.tangent(&x);
    let start_tangent = t;
    let mut points = vec![x];
    let mut traveled = 0.0;
    let mut margin = sys.rank_margin(&x);
    for _ in 0..params.max_steps {
        let ahead = sub(start, &x);
        let along = dot(&ahead, &t);
        if traveled > 4.0 * h_max && along > 0.0 && len(&ahead) < 1.5 * h {
            let predicted: P4 = std::array::from_fn(|k| x[k] + along * t[k]);
            if let Some(closing) = sys.correct_in_plane(&predicted, start, &start_tangent) {
                let gap = len(&sub(&closing, start));
                if gap < 1e-6 * eps {
                    let winding = winding_of(&points, &sys.center);
                    return Ok(LinkComponent { points, winding, closure_gap: gap, rank_margin: margin });
                }
            }
        }
        loop {
            let predicted: P4 = std::array::from_fn(|k| x[k] + h * t[k]);
            let accepted = sys.correct(&predicted, 12).and_then(|next| {
                let t_next = sys.tangent(&next);
                let turn = dot(&t_next, &t).clamp(-1.0, 1.0).acos();
                let drift = len(&sub(&next, &predicted));
                (turn < 0.15 && drift < 0.5 * h && dot(&sub(&next, &x), &t) > 0.0).then_some((next, t_next))
            });
            match accepted {
                Some((next, t_next)) => {
                    traveled += len(&sub(&next, &x));
                    x = next;
                    t = t_next;
                    points.push(x);
                    margin = margin.min(sys.rank_margin(&x));
                    if margin < 1e-8 {
                        return Err(LinkError::RankDrop(margin));
                    }
                    h = (1.5 * h).min(h_max);
                    break;
                }
                None => {
                    h *= 0.5;
                    if h < 1e-9 * eps {
                        return Err(LinkError::StepCollapse(x));
                    }
                }
            }
        }
    }
    Err(LinkError::NonClosure(params.max_steps))
}

fn on_component(sys: &SphereSystem, seed: &P4, points: &[P4]) -> bool {
    let mut best = (f64::INFINITY, *seed);
    for k in 0..points.len() {
        let a = points[k];
        let b = points[(k + 1) % points.len()];
        let ab = sub(&b, &a);
        let s = (dot(&sub(seed, &a), &ab) / dot(&ab, &ab).max(1e-300)).clamp(0.0, 1.0);
        let proj: P4 = std::array::from_fn(|i| a[i] + s * ab[i]);
        let d = len(&sub(seed, &proj));
        if d < best.0 {
            best = (d, proj);
        }
    }
    if best.0 > 0.05 * sys.radius {
        return false;
    }
    sys.correct(&best.1, 20).is_some_and(|c| len(&sub(&c, seed)) < 1e-4 * sys.radius)
}

fn trace_general(sys: &SphereSystem, params: &TraceParams) -> Result<Vec<LinkComponent>, LinkError> {
    let seeds = sphere_seeds(&sys.center, sys.radius, params.seed_grid);
    let landed: Vec<P4> = seeds.par_iter().filter_map(|s| sys.correct(s, 40)).collect();
    let mut components: Vec<LinkComponent> = Vec::new();
    for seed in landed {
        if components.iter().any(|c| on_component(sys, &seed, &c.points)) {
            continue;
        }
        components.push(trace_component(sys, &seed, params)?);
    }
    Ok(components)
}

fn orbit_period(weights: &WeightSystem, w: &[Complex64]) -> i64 {
    let active: Vec<i64> = weights.p.iter().zip(w).filter(|(_, z)| z.norm() > 1e-12).map(|(p, _)| p.abs()).collect();
    active.into_iter().fold(0, num_integer::gcd).max(1)
}

fn trace_orbits(sys: &SphereSystem, weights: &WeightSystem, params: &TraceParams) -> Result<Vec<LinkComponent>, LinkError> {
    let eps = sys.radius;
    let tau = 2.0 * std::f64::consts::PI;
    let grid = params.seed_grid.max(2);
    let mut seeds = Vec::new();
    for a in 0..grid {
        for b in 0..2 * grid {
            seeds.push(((a as f64 + 0.5) / grid as f64 * std::f64::consts::FRAC_PI_2, tau * b as f64 / (2 * grid) as f64));
        }
    }
    let point = |psi: f64, phi: f64| [c64(eps * psi.cos(), 0.0), Complex64::from_polar(eps * psi.sin(), phi)];
    let solve = |&(psi0, phi0): &(f64, f64)| -> Option<Vec<Complex64>> {
        let (mut psi, mut phi) = (psi0, phi0);
        for _ in 0..60 {
            let w = point(psi, phi);
            let v = sys.map.value(&w);
            let (dz, dzb) = sys.map.gradients(&w);
            let dz2 = Complex64::from_polar(eps * psi.cos(), phi);
            let d_psi = (dz[0] + dzb[0]) * (-eps * psi.sin()) + dz[1] * dz2 + dzb[1] * dz2.conj();
            let d_phi = dz[1] * (Complex64::i() * w[1]) - dzb[1] * (Complex64::i() * w[1].conj());
            let jac = DMatrix::from_row_slice(2, 2, &[d_psi.re, d_phi.re, d_psi.im, d_phi.im]);
            let delta = lstsq(&jac, &DVector::from_vec(vec![-v.re, -v.im]));
            let step = delta.norm();
            let k = if step > 0.2 { 0.2 / step } else { 1.0 };
            psi += k * delta[0];
            phi += k * delta[1];
            if step < 1e-15 {
                break;
            }
        }
        let w = point(psi, phi);
        let ok = psi.is_finite() && phi.is_finite() && sys.map.value(&w).norm() <= 1e-12 * sys.map.magnitude(&w).max(1e-300);
        ok.then(|| canonical_representative(weights, &w))
    };
    let found: Vec<Vec<Complex64>> = seeds.par_iter().filter_map(solve).collect();
    let mut reps: Vec<Vec<Complex64>> = Vec::new();
    for w in found {
        if !reps.iter().any(|r| crate::numeric::norm(&[r[0] - w[0], r[1] - w[1]]) < 1e-7 * eps) {
            reps.push(w);
        }
    }
    reps.sort_by(|a, b| a[0].norm().total_cmp(&b[0].norm()).reverse().then(a[1].arg().total_cmp(&b[1].arg())));
    let mut components = Vec::new();
    for w in reps {
        let period = tau / orbit_period(weights, &w) as f64;
        let n = params.orbit_samples;
        let mut points: Vec<P4> = (0..n)
            .map(|k| to_point(&weights.act_polar(Complex64::from_polar(1.0, period * k as f64 / n as f64), &w)))
            .collect();
        let start = points[0];
        let velocity: P4 = {
            let ahead = to_point(&weights.act_polar(Complex64::from_polar(1.0, 1e-6), &w));
            let back = to_point(&weights.act_polar(Complex64::from_polar(1.0, -1e-6), &w));
            std::array::from_fn(|k| ahead[k] - back[k])
        };
        if dot(&velocity, &sys.tangent(&start)) < 0.0 {
            points.reverse();
            points.rotate_right(1);
        }
        let end = to_point(&weights.act_polar(Complex64::from_polar(1.0, period), &w));
        let closure_gap = len(&sub(&end, &start));
        let rank_margin = points.iter().map(|p| sys.rank_margin(p)).fold(f64::INFINITY, f64::min);
        if rank_margin < 1e-8 {
            return Err(LinkError::RankDrop(rank_margin));
        }
        let winding = winding_of(&points, &sys.center);
        components.push(LinkComponent { points, winding, closure_gap, rank_margin });
    }
    Ok(components)
}

/// `P(z + w) - P(w)` with `w` rounded to exact dyadic rationals.
pub fn shift_to(p: &MixedPolynomial, w: &[Complex64]) -> MixedPolynomial {
    let n = p.n();
    let mut subs = Vec::with_capacity(2 * n);
    let exact: Vec<ComplexScalar> = w.iter().map(|z| ComplexScalar::from_c64(*z).expect("finite")).collect();
    for (j, c) in exact.iter().enumerate() {
        subs.push(MixedPolynomial::var(n, j).add(&MixedPolynomial::constant(n, c.clone())));
    }
    for (j, c) in exact.iter().enumerate() {
        subs.push(MixedPolynomial::conj_var(n, j).add(&MixedPolynomial::constant(n, c.conj())));
    }
    let shifted = p.substitute(&subs);
    let constant = shifted.coeff(&vec![0; n], &vec![0; n]);
    shifted.sub(&MixedPolynomial::constant(n, constant))
}

/// Traces `P^{-1}(value)` on the sphere of radius `radius` about `center`.
pub fn trace_link(p: &MixedPolynomial, center: &[Complex64], value: Complex64, radius: f64, params: &TraceParams) -> Result<LinkReport, LinkError> {
    if p.n() != 2 {
        return Err(LinkError::VariableCount(p.n()));
    }
    let origin = center.iter().all(|z| *z == c64(0.0, 0.0));
    let homogeneous = params
        .weights
        .as_ref()
        .filter(|w| polar_radial_degrees(p, w).ok().and_then(|d| d.polar).is_some())
        .cloned();
    let sys = SphereSystem { map: NumericMap::new(p), value, center: to_point(center), radius };
    let (method, components) = match homogeneous {
        Some(weights) if origin && value == c64(0.0, 0.0) && !params.force_general => (TraceMethod::Orbit, trace_orbits(&sys, &weights, params)?),
        _ => (TraceMethod::General, trace_general(&sys, params)?),
    };
    let curves: Vec<Vec<P4>> = components.iter().map(|c| c.points.clone()).collect();
    let (linking, linking_raw) = linking_matrix(&curves, &sys.center, radius)?;
    Ok(LinkReport {
        schema: "singulab.link/1".into(),
        center: sys.center,
        value,
        radius,
        method,
        components,
        linking,
        linking_raw,
    })
}

/// Pole on the unit sphere far from every sample.
fn choose_pole(curves: &[Vec<P4>]) -> P4 {
    let mut candidates: Vec<P4> = Vec::new();
    for k in 0..4 {
        for s in [1.0, -1.0] {
            let mut e = [0.0; 4];
            e[k] = s;
            candidates.push(e);
        }
    }
    for signs in 0..16 {
        candidates.push(std::array::from_fn(|k| if signs >> k & 1 == 1 { -0.5 } else { 0.5 }));
    }
    let clearance = |u: &P4| curves.iter().flatten().map(|p| len(&sub(p, u))).fold(f64::INFINITY, f64::min);
    candidates.into_iter().max_by(|a, b| clearance(a).total_cmp(&clearance(b))).expect("candidates")
}

/// Rotation in `SO(4)` taking `u` to `e_4`.
fn rotation_to_pole(u: &P4) -> Matrix4<f64> {
    let e4 = [0.0, 0.0, 0.0, 1.0];
    let v = sub(u, &e4);
    if len(&v) < 1e-14 {
        return Matrix4::identity();
    }
    let vv = dot(&v, &v);
    let house = Matrix4::from_fn(|r, c| if r == c { 1.0 } else { 0.0 } - 2.0 * v[r] * v[c] / vv);
    let flip = Matrix4::from_diagonal(&nalgebra::Vector4::new(-1.0, 1.0, 1.0, 1.0));
    flip * house
}

fn project_all(curves: &[Vec<P4>], center: &P4, radius: f64) -> Vec<Vec<[f64; 3]>> {
    let unit: Vec<Vec<P4>> = curves.iter().map(|c| c.iter().map(|p| sub(p, center).map(|v| v / radius)).collect()).collect();
    let rot = rotation_to_pole(&choose_pole(&unit));
    unit.iter()
        .map(|c| {
            c.iter()
                .map(|p| {
                    let y = rot * nalgebra::Vector4::from_column_slice(p);
                    [y[0] / (1.0 - y[3]), y[1] / (1.0 - y[3]), y[2] / (1.0 - y[3])]
                })
                .collect()
        })
        .collect()
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn unit3(a: [f64; 3]) -> [f64; 3] {
    let l = dot3(a, a).sqrt();
    if l == 0.0 {
        a
    } else {
        [a[0] / l, a[1] / l, a[2] / l]
    }
}

/// Signed solid angle swept by segment pair `(a1, a2)`, `(b1, b2)`.
fn segment_pair_angle(a1: [f64; 3], a2: [f64; 3], b1: [f64; 3], b2: [f64; 3]) -> f64 {
    let r13 = sub3(b1, a1);
    let r14 = sub3(b2, a1);
    let r23 = sub3(b1, a2);
    let r24 = sub3(b2, a2);
    let n1 = unit3(cross3(r13, r14));
    let n2 = unit3(cross3(r14, r24));
    let n3 = unit3(cross3(r24, r23));
    let n4 = unit3(cross3(r23, r13));
    let asin = |x: f64| x.clamp(-1.0, 1.0).asin();
    let omega = asin(dot3(n1, n2)) + asin(dot3(n2, n3)) + asin(dot3(n3, n4)) + asin(dot3(n4, n1));
    let orient = dot3(cross3(sub3(b2, b1), sub3(a2, a1)), r13);
    if orient > 0.0 {
        omega
    } else if orient < 0.0 {
        -omega
    } else {
        0.0
    }
}

/// Gauss linking integral of two closed polygons in `R^3`.
pub fn gauss_linking(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let total: f64 = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let (a1, a2) = (a[i], a[(i + 1) % a.len()]);
            (0..b.len()).map(|j| segment_pair_angle(a1, a2, b[j], b[(j + 1) % b.len()])).sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    total / (4.0 * std::f64::consts::PI)
}

/// Linking number of two sampled curves on the sphere about `center`.
pub fn linking_number(a: &[P4], b: &[P4], center: &P4, radius: f64) -> Result<(i64, f64), LinkError> {
    let distance = a.iter().flat_map(|p| b.iter().map(move |q| len(&sub(p, q)))).fold(f64::INFINITY, f64::min);
    if distance < 1e-3 * radius {
        return Err(LinkError::CurvesTooClose(distance));
    }
    let projected = project_all(&[a.to_vec(), b.to_vec()], center, radius);
    let raw = gauss_linking(&projected[0], &projected[1]);
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-2 {
        return Err(LinkError::NonInteger(raw));
    }
    Ok((rounded as i64, raw))
}

fn linking_matrix(curves: &[Vec<P4>], center: &P4, radius: f64) -> Result<(Vec<Vec<i64>>, Vec<Vec<f64>>), LinkError> {
    let k = curves.len();
    let mut linking = vec![vec![0; k]; k];
    let mut raw = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let (l, r) = linking_number(&curves[i], &curves[j], center, radius)?;
            linking[i][j] = l;
            linking[j][i] = l;
            raw[i][j] = r;
            raw[j][i] = r;
        }
    }
    Ok((linking, raw))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HopfVerdict {
    PositiveHopf,
    NegativeHopf,
    NotHopf,
}

#[derive(Clone, Debug, Serialize)]
pub struct HopfStep {
    pub radius: f64,
    pub components: usize,
    pub linking: Option<i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HopfReport {
    pub verdict: HopfVerdict,
    pub schedule: Vec<HopfStep>,
    pub report: LinkReport,
}

fn summary(report: &LinkReport) -> (usize, Option<i64>) {
    let linking = (report.components.len() == 2).then(|| report.linking[0][1]);
    (report.components.len(), linking)
}

/// Link of `P^{-1}(P(w))` on spheres about `w`, shrinking from `initial_radius` until two
/// consecutive radii agree.
pub fn hopf_test(p: &MixedPolynomial, w: &[Complex64], initial_radius: f64, params: &TraceParams) -> Result<HopfReport, LinkError> {
    let origin = w.iter().all(|z| *z == c64(0.0, 0.0));
    let local = if origin { p.sub(&MixedPolynomial::constant(p.n(), p.coeff(&[0, 0], &[0, 0]))) } else { shift_to(p, w) };
    let zero = [c64(0.0, 0.0), c64(0.0, 0.0)];
    let mut general = params.clone();
    general.force_general = true;
    let mut schedule = Vec::new();
    let mut previous: Option<(usize, Option<i64>)> = None;
    let mut radius = initial_radius;
    for _ in 0..=6 {
        let report = trace_link(&local, &zero, c64(0.0, 0.0), radius, &general)?;
        let current = summary(&report);
        schedule.push(HopfStep { radius, components: current.0, linking: current.1 });
        if previous == Some(current) {
            let verdict = match current {
                (2, Some(1)) => HopfVerdict::PositiveHopf,
                (2, Some(-1)) => HopfVerdict::NegativeHopf,
                _ => HopfVerdict::NotHopf,
            };
            let mut report = report;
            report.center = to_point(w);
            for c in report.components.iter_mut() {
                for pt in c.points.iter_mut() {
                    *pt = std::array::from_fn(|k| pt[k] + report.center[k]);
                }
            }
            return Ok(HopfReport { verdict, schedule, report });
        }
        previous = Some(current);
        radius *= 0.5;
    }
    Err(LinkError::NoStabilization(6))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TorusExpectation {
    pub components: i64,
    pub winding: (i64, i64),
    pub linking: Option<i64>,
}

pub fn torus_link_expectation(pair: &WHPair) -> TorusExpectation {
    let count = pair.m - pair.n;
    TorusExpectation { components: count, winding: (pair.q, pair.p), linking: (count >= 2).then_some(pair.p * pair.q) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;

    fn poly(s: &str) -> MixedPolynomial {
        parse_poly(s, Some(2)).unwrap()
    }

    fn zero() -> [Complex64; 2] {
        [c64(0.0, 0.0); 2]
    }

    #[test]
    fn newton_single_faces() {
        let data = newton_boundary(&poly("z1^2 + z2^3")).unwrap();
        assert_eq!(data.faces.len(), 1);
        assert_eq!(data.faces[0].function, poly("z1^2 + z2^3"));
        let data = newton_boundary(&poly("z1*~z1 + z2^2")).unwrap();
        assert_eq!(data.support, vec![(0, 2), (2, 0)]);
        assert_eq!(data.faces.len(), 1);
        assert!(matches!(newton_boundary(&poly("z1*z2")), Err(LinkError::NotConvenient)));
    }

    #[test]
    fn newton_two_faces_and_hull_invariant() {
        let p = poly("z1^5 + z1*z2 + z2^5 + z1^2*z2^2");
        let data = newton_boundary(&p).unwrap();
        assert_eq!(data.faces.len(), 2);
        for face in &data.faces {
            for s in &data.support {
                assert!(face.normal.0 * s.0 as i64 + face.normal.1 * s.1 as i64 >= face.degree);
            }
        }
        assert_eq!(data.faces[0].function, poly("z1*z2 + z2^5"));
    }

    #[test]
    fn gauss_formula_on_round_hopf_pair() {
        let n = 200;
        let tau = 2.0 * std::f64::consts::PI;
        let a: Vec<[f64; 3]> = (0..n).map(|k| {
            let t = tau * k as f64 / n as f64;
            [t.cos(), t.sin(), 0.0]
        }).collect();
        let b: Vec<[f64; 3]> = (0..n).map(|k| {
            let t = tau * k as f64 / n as f64;
            [1.0 + t.cos(), 0.0, t.sin()]
        }).collect();
        // midpoint-rule Gauss integral as an independent check of the sign
        let mut direct = 0.0;
        for i in 0..n {
            let da = sub3(a[(i + 1) % n], a[i]);
            let ma = [(a[i][0] + a[(i + 1) % n][0]) / 2.0, (a[i][1] + a[(i + 1) % n][1]) / 2.0, (a[i][2] + a[(i + 1) % n][2]) / 2.0];
            for j in 0..n {
                let db = sub3(b[(j + 1) % n], b[j]);
                let mb = [(b[j][0] + b[(j + 1) % n][0]) / 2.0, (b[j][1] + b[(j + 1) % n][1]) / 2.0, (b[j][2] + b[(j + 1) % n][2]) / 2.0];
                let r = sub3(ma, mb);
                direct += dot3(r, cross3(da, db)) / dot3(r, r).powf(1.5);
            }
        }
        direct /= 4.0 * std::f64::consts::PI;
        let exact = gauss_linking(&a, &b);
        assert!((exact - direct).abs() < 1e-2);
        assert!((exact.abs() - 1.0).abs() < 1e-9);
        let far: Vec<[f64; 3]> = b.iter().map(|p| [p[0] + 5.0, p[1], p[2]]).collect();
        assert!(gauss_linking(&a, &far).abs() < 1e-9);
    }

    #[test]
    fn unknot_of_linear_map() {
        let report = trace_link(&poly("z1"), &zero(), c64(0.0, 0.0), 1.0, &TraceParams::default()).unwrap();
        assert_eq!(report.component_count(), 1);
        assert!(report.linking[0].is_empty() || report.linking[0][0] == 0);
        assert!(report.components[0].closure_gap < 1e-6);
    }

    #[test]
    fn axes_form_positive_hopf_link() {
        let report = trace_link(&poly("z1*z2"), &zero(), c64(0.0, 0.0), 1.0, &TraceParams::default()).unwrap();
        assert_eq!(report.component_count(), 2);
        assert_eq!(report.linking[0][1], 1);
        assert_eq!(report.linking[1][0], 1);
        for c in &report.components {
            assert!(c.winding == (1, 0) || c.winding == (0, 1));
        }
    }

    #[test]
    fn hopf_calibration() {
        let params = TraceParams::default();
        let pos = hopf_test(&poly("z1^2 + z2^2"), &zero(), 0.1, &params).unwrap();
        assert_eq!(pos.verdict, HopfVerdict::PositiveHopf);
        let neg = hopf_test(&poly("z1^2 + ~z2^2"), &zero(), 0.1, &params).unwrap();
        assert_eq!(neg.verdict, HopfVerdict::NegativeHopf);
    }

    #[test]
    fn orbit_and_general_tracing_agree() {
        let p = poly("z1^2 + z2^2");
        let mut params = TraceParams { weights: Some(WeightSystem::uniform(vec![1, 1]).unwrap()), ..TraceParams::default() };
        let orbit = trace_link(&p, &zero(), c64(0.0, 0.0), 0.5, &params).unwrap();
        params.force_general = true;
        let general = trace_link(&p, &zero(), c64(0.0, 0.0), 0.5, &params).unwrap();
        assert_eq!(orbit.method, TraceMethod::Orbit);
        assert_eq!(orbit.component_count(), general.component_count());
        assert_eq!(orbit.linking, general.linking);
        let mut windings: Vec<_> = orbit.components.iter().map(|c| c.winding).collect();
        let mut other: Vec<_> = general.components.iter().map(|c| c.winding).collect();
        windings.sort();
        other.sort();
        assert_eq!(windings, other);
    }

    #[test]
    fn shift_removes_constant() {
        let p = poly("z1^2*~z2 + 3*z2");
        let w = [c64(0.5, -0.25), c64(1.0, 0.0)];
        let q = shift_to(&p, &w);
        assert!(q.evaluate(&zero()).unwrap().norm() == 0.0);
        let d = [c64(0.1, 0.2), c64(-0.3, 0.05)];
        let lhs = q.evaluate(&d).unwrap();
        let rhs = p.evaluate(&[w[0] + d[0], w[1] + d[1]]).unwrap() - p.evaluate(&w).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
