mod common;

use std::sync::Arc;

use fraciso::domain::{Domain1D, GridFunction, Mesh1D};
use fraciso::fracop::FracOperator;
use fraciso::spectral::{eigenpair_on, principal_eigenpair, rayleigh_quotient, richardson, second_eigenvalue};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn dense_eigenvalues(op: &FracOperator, s: f64) -> Vec<f64> {
    let d = common::dense_fourier(op.mesh(), s);
    let n = d.len();
    let m = DMatrix::from_fn(n, n, |i, j| d[i][j] / op.mass());
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn on_spacing(literal: &str, h: f64, s: f64) -> FracOperator {
    let d: Domain1D = literal.parse().unwrap();
    FracOperator::assemble(Arc::new(Mesh1D::with_spacing(&d, h).unwrap()), s).unwrap()
}

#[test]
fn eigenvalues_match_dense_oracle() {
    for (literal, s) in [("(-1,1)", 0.5), ("(-1,-0.05),(0.05,1)", 0.3), ("(-1.5,-0.5),(0.25,1.25)", 0.7), ("(-1,1)", 0.15)] {
        let op = common::operator(literal, 64, s);
        let ev = dense_eigenvalues(&op, s);
        let r = principal_eigenpair(&op).unwrap();
        assert!(common::rel(r.lambda1h, ev[0]) < 1e-9, "{literal} s = {s}: {} vs {}", r.lambda1h, ev[0]);
        let l2 = second_eigenvalue(&op, &r).unwrap();
        assert!(common::rel(l2, ev[1]) < 1e-7, "{literal} s = {s}: {l2} vs {}", ev[1]);
    }
}

#[test]
fn galerkin_identity_and_normalization() {
    let op = common::operator("(0,0.5),(0.75,1.25),(1.5,2.5)", 256, 0.4);
    let r = principal_eigenpair(&op).unwrap();
    let u = &r.eigenfunction;
    let mass: f64 = op.mass() * u.values().iter().map(|x| x * x).sum::<f64>();
    assert!((mass - 1.0).abs() < 1e-12);
    assert!(u.integral() > 0.0);
    let e = op.energy(u).unwrap();
    assert!(common::rel(e, r.lambda1h * mass) < 1e-10);
    assert!(r.residual < 1e-8);
    assert_eq!(op.cached_lambda1(), Some(r.lambda1h));
}

#[test]
fn eigenfunction_is_positive_and_even_on_ball() {
    let (_, r) = eigenpair_on(&Domain1D::ball(1.0).unwrap(), 0.5, 128).unwrap();
    let u = r.eigenfunction.values();
    assert!(u.iter().all(|&v| v > 0.0));
    for k in 0..u.len() {
        assert!((u[k] - u[u.len() - 1 - k]).abs() < 1e-8);
    }
}

#[test]
fn domain_monotonicity_is_exact() {
    let h = 1.0 / 64.0;
    for s in [0.2, 0.5, 0.8] {
        let chain = ["(-0.5,0.5)", "(-0.75,0.5)", "(-0.75,0.5),(0.75,1)", "(-1,1)", "(-1,1.5)"];
        let values: Vec<f64> = chain
            .iter()
            .map(|d| principal_eigenpair(&on_spacing(d, h, s)).unwrap().lambda1h)
            .collect();
        for w in values.windows(2) {
            assert!(w[0] >= w[1] * (1.0 - 1e-10), "s = {s}: {values:?}");
        }
    }
}

#[test]
fn richardson_recovers_model_limit() {
    let ms = [256, 512, 1024, 2048];
    let values: Vec<f64> = ms.iter().map(|&m| 2.0 + 3.0 / m as f64 + 5.0 / (m as f64).powi(2)).collect();
    let e = richardson(&ms, &values).unwrap();
    assert!(!e.unreliable);
    assert!((e.order - 1.0).abs() < 0.05);
    assert!((e.value - 2.0).abs() < 1e-5);
    assert!(richardson(&[256, 512], &[1.0, 1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rayleigh_bounds_eigenvalue(v in prop::collection::vec(0.01f64..1.0, 80), s in 0.1f64..0.9) {
        let op = common::operator("(-1,-0.2),(0.1,1)", 64, s);
        let lambda = principal_eigenpair(&op).unwrap().lambda1h;
        let u = GridFunction::new(Arc::clone(op.mesh()), v[..op.len()].to_vec()).unwrap();
        prop_assert!(rayleigh_quotient(&op, &u).unwrap() >= lambda * (1.0 - 1e-10));
    }
}
