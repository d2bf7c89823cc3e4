//! Values computed independently with a computer algebra system (conjugates as independent
//! symbols) and frozen here.

use singulab::deform::{build_case2, case2_det_identity};
use singulab::hessian::{determinant, mixed_hessian};
use singulab::parse::{parse_poly, parse_scalar};
use singulab::scalar::rat;

fn det_of(text: &str) -> String {
    determinant(&mixed_hessian(&parse_poly(text, Some(2)).unwrap())).unwrap().to_string()
}

fn same(a: &str, b: &str) {
    assert_eq!(parse_poly(a, Some(2)).unwrap(), parse_poly(b, Some(2)).unwrap(), "{a} vs {b}");
}

#[test]
fn case2_determinants_match_frozen_values() {
    let gamma = parse_scalar("-1+1/2i").unwrap();
    let beta = parse_scalar("1").unwrap();
    for (f, expected) in [("z1^3 + z2^3", "81/100 * z1^4 * z2^4"), ("z1^4 + z2^4", "64/25 * z1^6 * z2^6")] {
        let family = build_case2(&parse_poly(f, Some(2)).unwrap(), &beta, &gamma, &rat(1, 10)).unwrap();
        let (det, closed) = case2_det_identity(&family).unwrap();
        same(&det.to_string(), expected);
        assert_eq!(det, closed);
    }
}

#[test]
fn mixed_hessian_determinants_match_frozen_values() {
    same(&det_of("z1^2*~z2 + z1*~z1*z2^2"), "16*z1^4*z2^2");
    same(&det_of("z1^3*~z2^2 + 2*z2*~z1"), "96*z1^4*~z2^2");
    same(
        &det_of("(z1^4+z2^4)*(~z1^2+~z2^2)"),
        "-960 * z1^2*z2^2 * (z1^4+z2^4)^2 * (~z1^2+~z2^2)^2",
    );
}

#[test]
fn first_stage_hessian_entries() {
    // H(z1 zbar1) in one variable
    let p = parse_poly("z1*~z1", Some(1)).unwrap();
    let h = mixed_hessian(&p);
    let entries: Vec<String> = (0..2).flat_map(|r| (0..2).map(move |c| (r, c))).map(|(r, c)| h.get(r, c).to_string()).collect();
    assert_eq!(entries, ["0", "(1+0i)", "(1+0i)", "0"]);
}
