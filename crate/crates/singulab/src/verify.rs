//! End-to-end checks on a built-in or user-supplied pair: certification, locus identities,
//! link structure and the second-stage perturbation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::deform::{
    analyze_pair, build_case2, build_second_stage, case2_det_identity, certify_family, engineer_second_stage_coefficients, euler_locus_residual,
    gamma_feasible, hessian_diagonal_residual, modulus_monotone_curves, phi_parts, psi_alpha_squared_coefficient, psi_polynomial, psi_value,
    restriction_identity_check, s2_search, search_gamma, search_gamma_case2, second_stage_s2_points, slice_locus, Certificate, DeformError,
    DeformationFamily, GammaSearch, WHPair,
};
use crate::hessian::{determinant, mixed_hessian};
use crate::link::{hopf_test, newton_boundary, torus_link_expectation, trace_link, HopfVerdict, LinkReport, TraceParams};
use crate::mixedpoly::MixedPolynomial;
use crate::numeric::{c64, norm, NumericMap};
use crate::parse::parse_poly;
use crate::scalar::ComplexScalar;
use crate::singular::{
    finite_difference_form, intrinsic_second_form, orbit_invariance_check, refine, thread_pool, Classification, RefineOptions,
    SingularPoint, Stratum,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BuiltinKind {
    Case1,
    Case2,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Builtin {
    pub name: &'static str,
    pub f: &'static str,
    pub g: &'static str,
    pub p: i64,
    pub q: i64,
    pub kind: BuiltinKind,
}

pub const BUILTINS: [Builtin; 3] = [
    Builtin { name: "quartic-quadric", f: "z1^4 + z2^4", g: "z1^2 + z2^2", p: 1, q: 1, kind: BuiltinKind::Case1 },
    Builtin { name: "cubic-linear", f: "z1^3 + z2^3", g: "z1 + z2", p: 1, q: 1, kind: BuiltinKind::Case2 },
    Builtin { name: "weighted-sextic", f: "z1^3 + z2^6", g: "z1 - z2^2", p: 1, q: 2, kind: BuiltinKind::Case1 },
];

pub fn builtin(name: &str) -> Option<Builtin> {
    BUILTINS.iter().find(|b| b.name == name).copied()
}

impl Builtin {
    pub fn polynomials(&self) -> (MixedPolynomial, MixedPolynomial) {
        (parse_poly(self.f, Some(2)).expect("builtin"), parse_poly(self.g, Some(2)).expect("builtin"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkSummary {
    pub radius: f64,
    pub components: usize,
    pub windings: Vec<(i64, i64)>,
    pub linking: Vec<Vec<i64>>,
}

impl LinkSummary {
    fn of(report: &LinkReport) -> Self {
        LinkSummary {
            radius: report.radius,
            components: report.components.len(),
            windings: report.components.iter().map(|c| c.winding).collect(),
            linking: report.linking.clone(),
        }
    }

    fn same_shape(&self, other: &LinkSummary) -> bool {
        self.components == other.components && self.windings == other.windings && self.linking == other.linking
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondStageSummary {
    pub c1: String,
    pub c2: String,
    pub s: String,
    pub s2_points: Vec<Vec<Complex64>>,
    pub hopf: Vec<HopfVerdict>,
    pub remaining_folds: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema: String,
    pub version: String,
    pub f: String,
    pub g: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub certificate: Option<Certificate>,
    pub link: Option<LinkSummary>,
    pub second_stage: Option<SecondStageSummary>,
    pub all_passed: bool,
}

impl VerifyReport {
    fn new(f: &MixedPolynomial, g: &MixedPolynomial, config: &RunConfig) -> Self {
        VerifyReport {
            schema: "singulab.verify/1".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            f: f.to_string(),
            g: g.to_string(),
            config: config.clone(),
            checks: Vec::new(),
            certificate: None,
            link: None,
            second_stage: None,
            all_passed: false,
        }
    }

    fn finish(mut self) -> Self {
        self.all_passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn gamma_search_from(config: &RunConfig) -> GammaSearch {
    let mut search = GammaSearch::new(config.seed, &config.t_value(), config.search_params());
    search.trials = config.trials;
    search.halvings = config.halvings;
    search.margin_tol = config.margin_tol;
    search.require_nonempty = true;
    search
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// Checks shared by both families at every certified representative.
fn locus_checks(family: &DeformationFamily, cert: &Certificate, config: &RunConfig, checks: &mut Vec<Check>) {
    let reps = &cert.locus.representatives;
    let tol = config.tolerances();
    let map = NumericMap::new(&family.map());
    let count = reps.len();
    let kinds: Vec<Classification> = reps.iter().map(|r| r.classification).collect();
    checks.push(check(
        "singular orbits are indefinite folds",
        count > 0 && kinds.iter().all(|k| *k == Classification::IndefiniteFold),
        format!("{count} orbit representatives: {kinds:?}"),
    ));
    checks.push(check(
        "no S2 point off the origin",
        reps.iter().all(|r| r.stratum == Stratum::S1),
        format!("strata {:?}", reps.iter().map(|r| r.stratum).collect::<Vec<_>>()),
    ));
    let residual = max_of(reps.iter().map(|r| r.residual));
    checks.push(check("collinearity residual below 1e-10", residual < 1e-10, format!("max residual {residual:e}")));
    let orbit = reps.iter().map(|r| orbit_invariance_check(&map, &family.weights, family.polar_degree, &r.w, 32, &tol)).collect::<Vec<_>>();
    let worst = max_of(orbit.iter().map(|o| o.max_residual.max(o.max_alpha_error)));
    checks.push(check("orbit invariance over 32 phases", orbit.iter().all(|o| o.passed(1e-9)), format!("max deviation {worst:e}")));
    let value_margin = cert.margins.iter().map(|m| m.value_margin).fold(f64::INFINITY, f64::min);
    let hessian_margin = cert.margins.iter().map(|m| m.hessian_margin).fold(f64::INFINITY, f64::min);
    checks.push(check(
        "F and det H nonzero on the locus",
        value_margin > config.margin_tol && hessian_margin > config.margin_tol,
        format!("min |F| margin {value_margin:e}, min Hessian margin {hessian_margin:e}"),
    ));
    let phi = max_of(reps.iter().map(|r| {
        let (a, b) = phi_parts(family, &r.w, r.alpha.unwrap_or(c64(1.0, 0.0)));
        (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
    }));
    checks.push(check("Phi vanishes on the locus", phi < 1e-9, format!("max relative |Phi| {phi:e}")));
    let pair = family.map().realize();
    let fd = max_of(reps.iter().map(|r| fd_discrepancy(&map, &pair, r, &tol)));
    checks.push(check("second form matches finite differences", fd < 1e-6, format!("max relative difference {fd:e}")));
}

fn fd_discrepancy(map: &NumericMap, pair: &crate::mixedpoly::RealPolyPair, point: &SingularPoint, tol: &crate::singular::Tolerances) -> f64 {
    let Ok(form) = intrinsic_second_form(map, &point.w, tol) else { return f64::INFINITY };
    let fd = finite_difference_form(pair, &point.w, &form, 1e-4 * norm(&point.w));
    let scale = form.restricted.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    form.restricted.iter().flatten().zip(fd.iter().flatten()).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max)
}

fn isolated_base_check(family: &DeformationFamily, config: &RunConfig) -> Check {
    let name = "f conj(g) has an isolated singularity at the origin";
    // Every radial orbit meets each sphere, so one octave away from the origin suffices and keeps
    // the gradients of the higher-degree base above the residual tolerance. Seeds run without the
    // slice constraint, which can trap Gauss-Newton beside a critical curve, and get enough
    // iterations for the linear convergence of a non-isolated zero.
    let map = NumericMap::new(&family.base());
    let (lo, hi) = (config.r_max / 2.0, config.r_max);
    let opts = RefineOptions { max_iter: 400, tol: config.tolerances(), annulus: Some((lo, hi)), ..RefineOptions::default() };
    let grid = config.grid.max(2);
    let tau = 2.0 * std::f64::consts::PI;
    let mut seeds = Vec::new();
    for k in 0..3 {
        let r = lo + (hi - lo) * (k as f64 + 0.5) / 3.0;
        for a in 0..=grid {
            let psi = a as f64 / grid as f64 * std::f64::consts::FRAC_PI_2;
            for b in 0..2 * grid {
                for c in 0..2 * grid {
                    let (t1, t2) = (tau * b as f64 / (2 * grid) as f64, tau * c as f64 / (2 * grid) as f64);
                    seeds.push([Complex64::from_polar(r * psi.cos(), t1), Complex64::from_polar(r * psi.sin(), t2)]);
                }
            }
        }
    }
    let pool = thread_pool(config.workers);
    let found: Vec<Vec<Complex64>> = pool.install(|| seeds.par_iter().filter_map(|w| refine(&map, w, &opts).ok().map(|r| r.w)).collect());
    match found.first() {
        None => check(name, true, format!("no singular point from {} seeds in the annulus [{lo}, {hi}]", seeds.len())),
        Some(w) => check(
            name,
            false,
            format!("{} of {} seeds reach singular points, e.g. ({:.4}, {:.4})", found.len(), seeds.len(), w[0], w[1]),
        ),
    }
}

fn completeness_check(family: &DeformationFamily, cert: &Certificate, config: &RunConfig) -> Check {
    let mut doubled = config.search_params();
    doubled.grid *= 2;
    match certify_family(family, &doubled, config.margin_tol) {
        Ok(fine) => check(
            "orbit count stable under grid doubling",
            fine.locus.representatives.len() == cert.locus.representatives.len(),
            format!("{} orbits at grid {}, {} at grid {}", cert.locus.representatives.len(), config.grid, fine.locus.representatives.len(), doubled.grid),
        ),
        Err(e) => check("orbit count stable under grid doubling", false, e.to_string()),
    }
}

fn link_at_origin(family: &DeformationFamily, pair: &WHPair, config: &RunConfig, report: &mut VerifyReport) {
    let zero = [c64(0.0, 0.0); 2];
    let base = TraceParams { weights: Some(family.weights.clone()), ..config.trace_params() };
    let eps = config.eps_start;
    let expected = torus_link_expectation(pair);
    let runs: Vec<(String, f64, TraceParams)> = vec![
        ("radius".into(), eps, base.clone()),
        ("half radius".into(), eps / 2.0, base.clone()),
        ("half step".into(), eps, TraceParams { max_step: base.max_step / 2.0, force_general: true, ..base.clone() }),
        ("traced".into(), eps, TraceParams { force_general: true, ..base.clone() }),
    ];
    let mut summaries = Vec::new();
    for (label, radius, params) in runs {
        match trace_link(&family.map(), &zero, c64(0.0, 0.0), radius, &params) {
            Ok(r) => summaries.push((label, LinkSummary::of(&r))),
            Err(e) => {
                report.checks.push(check("link at the origin", false, format!("{label}: {e}")));
                return;
            }
        }
    }
    let first = &summaries[0].1;
    let matches = first.components as i64 == expected.components
        && first.windings.iter().all(|w| *w == expected.winding)
        && (0..first.components).all(|i| (0..first.components).all(|j| i == j || Some(first.linking[i][j]) == expected.linking));
    report.checks.push(check(
        "link at the origin is the expected torus link",
        matches,
        format!("expected {expected:?}, traced {} components, windings {:?}, linking {:?}", first.components, first.windings, first.linking),
    ));
    let stable = summaries.iter().all(|(_, s)| s.same_shape(first));
    report.checks.push(check(
        "link stable under radius and step halving",
        stable,
        summaries.iter().map(|(l, s)| format!("{l}: {} components", s.components)).collect::<Vec<_>>().join("; "),
    ));
    report.link = Some(first.clone());
}

fn second_stage(family: &DeformationFamily, config: &RunConfig, report: &mut VerifyReport) {
    let s = config.s_value();
    let anchor = 5e-3;
    let (c1, c2, _) = engineer_second_stage_coefficients(family, &s, anchor, 0);
    let second = match build_second_stage(family, &c1, &c2, &s) {
        Ok(second) => second,
        Err(e) => {
            report.checks.push(check("second-stage conditions hold", false, e.to_string()));
            return;
        }
    };
    report.checks.push(check("second-stage conditions hold", true, format!("c1 = {c1}, c2 = {c2}, s = {s}")));
    report.checks.push(check(
        "linear term leaves the Hessian unchanged",
        mixed_hessian(&second.map()) == mixed_hessian(&family.first_stage()),
        "exact comparison".into(),
    ));
    let tol = config.tolerances();
    let ball = 10.0 * anchor;
    let points = match second_stage_s2_points(&second, ball, config.grid, &tol) {
        Ok(points) => points,
        Err(e) => {
            report.checks.push(check("S2 points form a finite nonempty set", false, e.to_string()));
            return;
        }
    };
    report.checks.push(check("S2 points form a finite nonempty set", !points.is_empty(), format!("{} points", points.len())));
    let direct = s2_search(&second.map(), ball, config.grid, &tol);
    report.checks.push(check("S2 points confirmed by direct search", direct.len() == points.len(), format!("{} direct, {} constructed", direct.len(), points.len())));
    let doubled = second_stage_s2_points(&second, ball, 2 * config.grid, &tol).map(|p| p.len());
    report.checks.push(check("S2 count stable under grid doubling", doubled == Ok(points.len()), format!("{doubled:?} at doubled grid")));
    let pattern = points.iter().all(|p| p.pattern.holds(1e-8));
    report.checks.push(check(
        "Hessian at S2 points has rank 3 with the expected block pattern",
        !points.is_empty() && pattern,
        points.iter().map(|p| format!("rank {} pivot {:.3e}", p.pattern.rank, p.pattern.pivot.norm())).collect::<Vec<_>>().join("; "),
    ));
    let mut verdicts = Vec::new();
    let mut hopf_detail = Vec::new();
    for p in &points {
        match hopf_test(&second.map(), &p.w, config.eps_start * norm(&p.w), &config.trace_params()) {
            Ok(h) => {
                hopf_detail.push(format!("{:?} after {} radii", h.verdict, h.schedule.len()));
                verdicts.push(h.verdict);
            }
            Err(e) => {
                hopf_detail.push(e.to_string());
                verdicts.push(HopfVerdict::NotHopf);
            }
        }
    }
    report.checks.push(check(
        "S2 points are mixed Morse (positive Hopf link)",
        !verdicts.is_empty() && verdicts.iter().all(|v| *v == HopfVerdict::PositiveHopf),
        hopf_detail.join("; "),
    ));
    let mut params = config.search_params();
    params.r_min = (4.0 * ball).min(params.r_max / 2.0);
    let hits = slice_locus(&second.map(), 4, &params);
    let folds = hits.iter().filter(|h| h.point.classification == Classification::IndefiniteFold).count();
    report.checks.push(check(
        "remaining singular points are indefinite folds",
        !hits.is_empty() && folds == hits.len(),
        format!("{folds} of {} slice hits", hits.len()),
    ));
    report.second_stage = Some(SecondStageSummary {
        c1: c1.to_string(),
        c2: c2.to_string(),
        s: s.to_string(),
        s2_points: points.iter().map(|p| p.w.clone()).collect(),
        hopf: verdicts,
        remaining_folds: folds,
    });
}

/// Certification, locus identities, link at the origin and the second stage for a Case-1 pair.
pub fn verify_case1(f: &MixedPolynomial, g: &MixedPolynomial, p: i64, q: i64, config: &RunConfig, with_second_stage: bool) -> Result<VerifyReport, DeformError> {
    let mut report = VerifyReport::new(f, g, config);
    let pair = analyze_pair(f, g, p, q)?;
    report.checks.push(check("pair hypotheses", true, format!("(p, q) = ({p}, {q}), m = {}, n = {}", pair.m, pair.n)));
    let (family, mut cert) = search_gamma(&pair, &gamma_search_from(config))?;
    report.checks.push(isolated_base_check(&family, config));
    cert.config = Some(config.clone());
    report.checks.push(check(
        "gamma sign condition (exact)",
        gamma_feasible(&pair, &family.gamma[0], &family.gamma[1]).is_ok(),
        format!("gamma = ({}, {}), t = {}", family.gamma[0], family.gamma[1], family.t),
    ));
    locus_checks(&family, &cert, config, &mut report.checks);
    let reps = &cert.locus.representatives;
    let euler = max_of(reps.iter().map(|r| euler_locus_residual(&family, &r.w, r.alpha.unwrap_or(c64(1.0, 0.0)))));
    let diag = max_of(reps.iter().map(|r| hessian_diagonal_residual(&family, &r.w, r.alpha.unwrap_or(c64(1.0, 0.0)))));
    let restriction = max_of(reps.iter().map(|r| restriction_identity_check(&family, &r.w, r.alpha.unwrap_or(c64(1.0, 0.0)))));
    report.checks.push(check("weighted Euler relation on the locus", euler < 1e-9, format!("max residual {euler:e}")));
    report.checks.push(check("second-derivative relation on the locus", diag < 1e-9, format!("max residual {diag:e}")));
    report.checks.push(check("restriction identity on the locus", restriction < 1e-9, format!("max residual {restriction:e}")));
    match psi_polynomial(&family) {
        Ok(psi) => {
            let leading = psi_alpha_squared_coefficient(&psi);
            let fg = family.f.mul(&family.g.conj());
            let det_fg = determinant(&mixed_hessian(&fg)).map(|d| !d.is_zero()).unwrap_or(false);
            report.checks.push(check(
                "Psi is not identically zero",
                !leading.is_zero() || det_fg,
                format!("conj(alpha)^2 coefficient has {} terms, det H(f conj g) nonzero: {det_fg}", leading.len()),
            ));
            let map = NumericMap::new(&family.map());
            let mismatch = max_of(reps.iter().map(|r| {
                let det = map.mixed_hessian(&r.w).determinant();
                (psi_value(&psi, &r.w, r.alpha.unwrap_or(c64(1.0, 0.0))) - det).norm() / det.norm().max(1e-300)
            }));
            report.checks.push(check("Psi equals det H on the locus", mismatch < 1e-8, format!("max relative difference {mismatch:e}")));
        }
        Err(e) => report.checks.push(check("Psi is not identically zero", false, e.to_string())),
    }
    match newton_boundary(&family.first_stage()) {
        Ok(data) => {
            let expected = family.h.scale(&ComplexScalar::real(family.t.clone()));
            let ok = data.faces.len() == 1 && data.faces[0].function == expected;
            report.checks.push(check(
                "Newton boundary has the single face t h",
                ok,
                data.faces.iter().map(|f| f.function.to_string()).collect::<Vec<_>>().join(" | "),
            ));
        }
        Err(e) => report.checks.push(check("Newton boundary has the single face t h", false, e.to_string())),
    }
    report.checks.push(completeness_check(&family, &cert, config));
    link_at_origin(&family, &pair, config, &mut report);
    if with_second_stage {
        second_stage(&family, config, &mut report);
    }
    report.certificate = Some(cert);
    Ok(report.finish())
}

/// Determinant identity, certification and the two monotone curves for a Case-2 family.
pub fn verify_case2(f: &MixedPolynomial, beta: &ComplexScalar, config: &RunConfig) -> Result<VerifyReport, DeformError> {
    let g = MixedPolynomial::var(2, 0).add(&MixedPolynomial::var(2, 1).scale(beta));
    let mut report = VerifyReport::new(f, &g, config);
    let probe = build_case2(f, beta, &ComplexScalar::one(), &config.t_value())?;
    let (det, closed) = case2_det_identity(&probe)?;
    report.checks.push(check("det H(F_t) closed form (exact)", det == closed, format!("det H = {det}")));
    let at_zero = build_case2(f, beta, &ComplexScalar::one(), &num_rational::BigRational::from_integer(0.into()))?;
    let zero_det = case2_det_identity(&at_zero)?.0;
    report.checks.push(check("det H(F_0) vanishes identically", zero_det.is_zero(), zero_det.to_string()));
    let (family, mut cert) = search_gamma_case2(f, beta, &gamma_search_from(config))?;
    cert.config = Some(config.clone());
    report.checks.push(check("certified gamma", true, format!("gamma = {}, t = {}", family.gamma[0], family.t)));
    report.checks.push(isolated_base_check(&family, config));
    locus_checks(&family, &cert, config, &mut report.checks);
    let tol = config.tolerances();
    let mut monotone = true;
    let mut detail = Vec::new();
    for r in &cert.locus.representatives {
        match modulus_monotone_curves(&family.map(), &r.w, 100, &tol) {
            Ok(curves) => {
                for c in &curves {
                    let expected = if c.eigenvalue < 0.0 { -1 } else { 1 };
                    monotone &= c.trend == expected;
                    detail.push(format!("eigenvalue {:.3e}: trend {} over length {:.2e}", c.eigenvalue, c.trend, c.length));
                }
            }
            Err(e) => {
                monotone = false;
                detail.push(e.to_string());
            }
        }
    }
    report.checks.push(check(
        "|F|^2 strictly monotone along the two curves",
        monotone && !cert.locus.representatives.is_empty(),
        detail.join("; "),
    ));
    report.checks.push(completeness_check(&family, &cert, config));
    report.certificate = Some(cert);
    Ok(report.finish())
}

pub fn verify_builtin(b: &Builtin, config: &RunConfig) -> Result<VerifyReport, DeformError> {
    let (f, g) = b.polynomials();
    match b.kind {
        BuiltinKind::Case1 => verify_case1(&f, &g, b.p, b.q, config, b.name == "quartic-quadric"),
        BuiltinKind::Case2 => verify_case2(&f, &g.coeff(&[0, 1], &[0, 0]), config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        assert_eq!(builtin("cubic-linear").unwrap().kind, BuiltinKind::Case2);
        assert_eq!(builtin("weighted-sextic").map(|b| (b.p, b.q)), Some((1, 2)));
        assert!(builtin("octic").is_none());
        for b in BUILTINS {
            let (f, g) = b.polynomials();
            assert!(f.is_holomorphic() && g.is_holomorphic());
        }
    }

    #[test]
    fn search_follows_config() {
        let mut config = RunConfig::default();
        config.seed = 11;
        config.trials = 3;
        config.grid = 5;
        let search = gamma_search_from(&config);
        assert_eq!((search.seed, search.trials, search.params.grid), (11, 3, 5));
        assert!(search.require_nonempty);
    }

    #[test]
    fn weighted_pair_passes_every_check() {
        let report = verify_builtin(&builtin("weighted-sextic").unwrap(), &RunConfig::default()).unwrap();
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| &c.name).collect();
        assert!(report.all_passed, "{failed:?}");
        let link = report.link.unwrap();
        assert_eq!((link.components, link.linking[0][1]), (2, 2));
        assert!(report.certificate.unwrap().config.is_some());
    }

    #[test]
    fn hypothesis_failures_surface_as_errors() {
        let f = parse_poly("z1^4 + z1*z2^3", Some(2)).unwrap();
        let g = parse_poly("z1^2 + z2^2", Some(2)).unwrap();
        assert!(matches!(verify_case1(&f, &g, 1, 1, &RunConfig::default(), false), Err(DeformError::NotConvenient(_))));
    }

    #[test]
    fn common_factor_is_not_isolated() {
        let f = parse_poly("z1^3 + z2^3", Some(2)).unwrap();
        let gamma = ComplexScalar::from_ints(1, 0);
        let t = crate::scalar::rat(1, 10);
        let config = RunConfig::default();
        // z1 + z2 divides f, so f conj(g) is critical along a whole line
        let shared = build_case2(&f, &ComplexScalar::from_ints(1, 0), &gamma, &t).unwrap();
        assert!(!isolated_base_check(&shared, &config).passed);
        let coprime = build_case2(&f, &ComplexScalar::from_ints(2, 0), &gamma, &t).unwrap();
        assert!(isolated_base_check(&coprime, &config).passed);
    }
}
