//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest harness so the
//! lines appear in `cargo test` output; exits nonzero if any criterion fails.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use singulab::config::RunConfig;
use singulab::deform::{
    analyze_pair, build_case1, build_case2, build_second_stage, case2_det_identity, engineer_second_stage_coefficients,
};
use singulab::hessian::{congruence_witness, mixed_hessian};
use singulab::link::{hopf_test, HopfVerdict, TraceParams};
use singulab::mixedpoly::generate::{random_poly, random_weighted_homogeneous};
use singulab::mixedpoly::verify_euler_identities;
use singulab::numeric::NumericMap;
use singulab::parse::{parse_poly, parse_scalar};
use singulab::scalar::{rat, ComplexScalar};
use singulab::singular::{classify, finite_difference_form, intrinsic_second_form, Classification, Tolerances};
use singulab::verify::{builtin, verify_builtin, VerifyReport};
use singulab::MixedPolynomial;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn poly(text: &str) -> MixedPolynomial {
    parse_poly(text, Some(2)).expect("valid")
}

fn checks_pass(report: &VerifyReport, names: &[&str]) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut failed = Vec::new();
    for name in names {
        match report.check(name) {
            Some(c) if c.passed => {}
            Some(c) => {
                ok = false;
                failed.push(format!("{}: {}", c.name, c.detail));
            }
            None => {
                ok = false;
                failed.push(format!("{name}: missing"));
            }
        }
    }
    (ok, failed)
}

fn from_checks(report: &VerifyReport, names: &[&str], label: &str) -> Outcome {
    let (ok, failed) = checks_pass(report, names);
    if ok {
        outcome(true, format!("{label}: all {} passed", names.len()))
    } else {
        outcome(false, format!("{label}: {}", failed.join("; ")))
    }
}

fn merge(parts: Vec<Outcome>) -> Outcome {
    outcome(parts.iter().all(|p| p.passed), parts.iter().map(|p| p.detail.as_str()).collect::<Vec<_>>().join(" | "))
}

fn symbolic_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut euler = 0;
    for k in 0..200 {
        let (p, w) = random_weighted_homogeneous(&mut rng, 1 + k % 3, 3);
        if verify_euler_identities(&p, &w).map(|r| r.holds()).unwrap_or(false) {
            euler += 1;
        }
    }
    let mut congruent = 0;
    for _ in 0..100 {
        if congruence_witness(&random_poly(&mut rng, 2, 5, 3)).is_exact() {
            congruent += 1;
        }
    }
    let gamma = parse_scalar("-1+1/2i").unwrap();
    let mut det_ok = 0;
    let cases = [("z1^3 + z2^3", "1"), ("z1^4 + z2^4", "1"), ("z1^3 + 2*z2^3", "2-i"), ("z1^4 - z1^2*z2^2 + z2^4", "1/2+i")];
    for (f, beta) in cases {
        let family = build_case2(&poly(f), &parse_scalar(beta).unwrap(), &gamma, &rat(1, 10)).expect("case 2 family");
        let (det, closed) = case2_det_identity(&family).expect("determinant");
        if det == closed {
            det_ok += 1;
        }
    }
    let pair = analyze_pair(&poly("z1^4 + z2^4"), &poly("z1^2 + z2^2"), 1, 1).unwrap();
    let family = build_case1(&pair, &ComplexScalar::one(), &parse_scalar("1/2+1/2i").unwrap(), &rat(1, 10)).unwrap();
    let s = rat(1, 1000);
    let (c1, c2, _) = engineer_second_stage_coefficients(&family, &s, 5e-3, 0);
    let second_equal = build_second_stage(&family, &c1, &c2, &s)
        .map(|second| mixed_hessian(&second.map()) == mixed_hessian(&family.first_stage()))
        .unwrap_or(false);
    outcome(
        euler == 200 && congruent == 100 && det_ok == cases.len() && second_equal,
        format!("Euler {euler}/200, congruence {congruent}/100, Case-2 determinant {det_ok}/{}, second-stage Hessian unchanged: {second_equal}", cases.len()),
    )
}

fn fold_normal_form(signs: [i64; 3]) -> MixedPolynomial {
    // (x1, s1 x2^2 + s2 y1^2 + s3 y2^2)
    let z = |j| MixedPolynomial::var(2, j);
    let zb = |j| MixedPolynomial::conj_var(2, j);
    let half = ComplexScalar::from_ratio(1, 2);
    let x = |j: usize| z(j).add(&zb(j)).scale(&half);
    let y = |j: usize| z(j).sub(&zb(j)).scale(&(&ComplexScalar::from_ratio(-1, 2) * &ComplexScalar::i()));
    let k = |v: i64| ComplexScalar::from_ints(v, 0);
    let quad = x(1).pow(2).scale(&k(signs[0])).add(&y(0).pow(2).scale(&k(signs[1]))).add(&y(1).pow(2).scale(&k(signs[2])));
    x(0).add(&quad.scale(&ComplexScalar::i()))
}

fn fold_calibration(reports: &[&VerifyReport]) -> Outcome {
    let origin = [Complex64::new(0.0, 0.0); 2];
    let tol = Tolerances::default();
    let mut matched = 0;
    let mut fd_worst: f64 = 0.0;
    for bits in 0..8 {
        let signs = [0, 1, 2].map(|b| if bits >> b & 1 == 1 { -1 } else { 1 });
        let expected = if signs.iter().all(|s| *s == signs[0]) { Classification::DefiniteFold } else { Classification::IndefiniteFold };
        // quartic terms leave the 2-jet alone but give central differences something to miss
        let p = fold_normal_form(signs).add(&poly("i*z1^2*~z2^2 + 1/4*z2^4 + z1*~z1^3"));
        let map = NumericMap::new(&p);
        if classify(&map, &origin, &tol).classification == expected {
            matched += 1;
        }
        if let Ok(form) = intrinsic_second_form(&map, &origin, &tol) {
            let fd = finite_difference_form(&p.realize(), &origin, &form, 1e-4);
            let scale = form.restricted.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in form.restricted.iter().flatten().zip(fd.iter().flatten()) {
                fd_worst = fd_worst.max((a - b).abs() / scale);
            }
        } else {
            fd_worst = f64::INFINITY;
        }
    }
    let mut parts = vec![outcome(matched == 8 && fd_worst < 1e-6, format!("sign patterns {matched}/8, normal-form difference {fd_worst:.1e}"))];
    for r in reports {
        parts.push(from_checks(r, &["second form matches finite differences"], "locus difference"));
    }
    merge(parts)
}

fn hopf_triple() -> Outcome {
    let origin = [Complex64::new(0.0, 0.0); 2];
    let params = TraceParams::default();
    let cases = [
        ("z1^2 + z2^2", Some(HopfVerdict::PositiveHopf)),
        ("z1^2 + ~z2^2", Some(HopfVerdict::NegativeHopf)),
        ("z1^2 + 2*~z1*z2", None),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (text, expected) in cases {
        match hopf_test(&poly(text), &origin, 0.1, &params) {
            Ok(h) => {
                let components = h.report.components.len();
                let linking = if components == 2 { h.report.linking[0][1] } else { 0 };
                let good = match expected {
                    Some(v) => h.verdict == v,
                    None => matches!(h.verdict, HopfVerdict::PositiveHopf | HopfVerdict::NegativeHopf) && components == 2 && linking.abs() == 1,
                };
                ok &= good;
                detail.push(format!("{text}: {:?} ({components} components, linking {linking})", h.verdict));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("{text}: {e}"));
            }
        }
    }
    outcome(ok, detail.join(", "))
}

fn case2_instance(report: &VerifyReport) -> Outcome {
    let mut o = from_checks(
        report,
        &[
            "det H(F_t) closed form (exact)",
            "det H(F_0) vanishes identically",
            "certified gamma",
            "singular orbits are indefinite folds",
            "no S2 point off the origin",
            "F and det H nonzero on the locus",
            "|F|^2 strictly monotone along the two curves",
        ],
        "cubic-linear",
    );
    // z1 + z2 divides z1^3 + z2^3, so the base is critical along a line; reported, not gated
    if let Some(c) = report.check("f conj(g) has an isolated singularity at the origin") {
        o.detail.push_str(&format!(" (base isolated: {}, {})", c.passed, c.detail));
    }
    o
}

fn main() {
    let config = RunConfig::default();
    let run = |name: &str| {
        let b = builtin(name).expect("registered");
        verify_builtin(&b, &config).unwrap_or_else(|e| panic!("{name}: {e}"))
    };
    let case1 = run("quartic-quadric");
    let case2 = run("cubic-linear");
    let sextic = run("weighted-sextic");

    let locus = ["collinearity residual below 1e-10", "orbit invariance over 32 phases"];
    let criteria: Vec<(&str, Outcome)> = vec![
        ("symbolic identities", symbolic_identities()),
        (
            "residual and orbit invariance",
            merge(vec![from_checks(&case1, &locus, "Case 1"), from_checks(&case2, &locus, "Case 2"), from_checks(&sextic, &locus, "(1,2) pair")]),
        ),
        (
            "Case-1 instance",
            from_checks(
                &case1,
                &[
                    "pair hypotheses",
                    "f conj(g) has an isolated singularity at the origin",
                    "gamma sign condition (exact)",
                    "F and det H nonzero on the locus",
                    "singular orbits are indefinite folds",
                    "no S2 point off the origin",
                    "weighted Euler relation on the locus",
                    "second-derivative relation on the locus",
                    "restriction identity on the locus",
                    "Phi vanishes on the locus",
                    "Psi is not identically zero",
                    "Psi equals det H on the locus",
                ],
                "quartic-quadric",
            ),
        ),
        ("Case-2 instance", case2_instance(&case2)),
        (
            "torus link at the origin",
            merge(vec![
                from_checks(&case1, &["Newton boundary has the single face t h", "link at the origin is the expected torus link", "link stable under radius and step halving"], "(1,1) pair"),
                from_checks(&sextic, &["Newton boundary has the single face t h", "link at the origin is the expected torus link", "link stable under radius and step halving"], "(1,2) pair"),
            ]),
        ),
        (
            "second stage",
            from_checks(
                &case1,
                &[
                    "second-stage conditions hold",
                    "linear term leaves the Hessian unchanged",
                    "S2 points form a finite nonempty set",
                    "S2 points confirmed by direct search",
                    "Hessian at S2 points has rank 3 with the expected block pattern",
                    "S2 points are mixed Morse (positive Hopf link)",
                    "remaining singular points are indefinite folds",
                ],
                "quartic-quadric",
            ),
        ),
        ("fold calibration", fold_calibration(&[&case1, &case2, &sextic])),
        ("Hopf calibration", hopf_triple()),
        (
            "grid doubling",
            merge(vec![
                from_checks(&case1, &["orbit count stable under grid doubling"], "Case 1"),
                from_checks(&case2, &["orbit count stable under grid doubling"], "Case 2"),
                from_checks(&case1, &["S2 count stable under grid doubling"], "second stage"),
            ]),
        ),
    ];

    let mut failures = 0;
    for (k, (name, o)) in criteria.iter().enumerate() {
        println!("{} criterion {} ({name}): {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
        if !o.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
