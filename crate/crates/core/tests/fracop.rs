mod common;

use std::sync::Arc;

use fraciso::domain::{Domain1D, GridFunction, Mesh1D};
use fraciso::fracop::{hat_weight, FracOperator, KernelWeights};
use fraciso::Error;
use proptest::prelude::*;

#[test]
fn hat_weights_match_fourier_oracle() {
    for s in [0.1, 0.25, 0.3, 0.5, 0.6, 0.75, 0.9, 0.99] {
        for k in 0..40 {
            let (a, b) = (hat_weight(s, k), common::hat_weight_fourier(s, k));
            let scale = common::hat_weight_fourier(s, 0);
            assert!((a - b).abs() < 1e-10 * scale, "s = {s}, k = {k}: {a} vs {b}");
            if k >= 3 {
                assert!(common::rel(a, b) < 1e-7, "s = {s}, k = {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn assembled_matrix_matches_oracle() {
    for (literal, s) in [("(-1,1)", 0.5), ("(-1,-0.2),(0.2,1)", 0.3), ("(0,0.5),(0.75,1.25),(1.5,2.5)", 0.8)] {
        let op = common::operator(literal, 48, s);
        let dense = common::dense_fourier(op.mesh(), s);
        let scale = dense[0][0];
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((op.entry(i, j) - v).abs() < 1e-10 * scale);
            }
        }
    }
}

#[test]
fn m_matrix_threshold() {
    assert!(!KernelWeights::new(0.1, 16).unwrap().is_m_matrix());
    assert!(!KernelWeights::new(0.23, 16).unwrap().is_m_matrix());
    assert!(KernelWeights::new(0.245, 16).unwrap().is_m_matrix());
    assert!(KernelWeights::new(0.5, 16).unwrap().is_m_matrix());
}

#[test]
fn rejects_bad_orders() {
    let mesh = Arc::new(Mesh1D::build(&Domain1D::ball(1.0).unwrap(), 16).unwrap());
    for s in [0.0, 1.0, -0.3, f64::NAN] {
        assert!(matches!(FracOperator::assemble(Arc::clone(&mesh), s), Err(Error::InvalidOrder(_))));
    }
}

#[test]
fn shifted_solve_refuses_above_spectrum() {
    let op = common::operator("(-1,1)", 32, 0.5);
    let lambda = fraciso::torsion::lambda1(&op).unwrap();
    assert!(matches!(op.shifted(lambda * 1.01), Err(Error::AboveSpectrum { .. })));
    assert!(op.shifted(lambda * 0.5).is_ok());
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_symmetric(s in 0.05f64..0.99, u in values(64), v in values(64)) {
        let op = common::operator("(-1,-0.1),(0.2,1)", 32, s);
        let n = op.len();
        let (u, v) = (&u[..n], &v[..n]);
        let (au, av) = (op.apply(&common::grid(&op, u.to_vec())).unwrap(), op.apply(&common::grid(&op, v.to_vec())).unwrap());
        let vau: f64 = v.iter().zip(au.values()).map(|(a, b)| a * b).sum();
        let uav: f64 = u.iter().zip(av.values()).map(|(a, b)| a * b).sum();
        prop_assert!((vau - uav).abs() <= 1e-12 * (1.0 + vau.abs()));
    }

    #[test]
    fn energy_positive_and_quadratic(s in 0.05f64..0.99, u in values(31), c in -3.0f64..3.0) {
        let op = common::operator("(-1,1)", 32, s);
        let u = common::grid(&op, u[..op.len()].to_vec());
        let e = op.energy(&u).unwrap();
        prop_assume!(u.values().iter().any(|x| x.abs() > 1e-6));
        prop_assert!(e > 0.0);
        let ec = op.energy(&u.scaled(c)).unwrap();
        prop_assert!((ec - c * c * e).abs() <= 1e-12 * (1.0 + ec.abs()));
    }

    #[test]
    fn parallel_and_sequential_agree(s in 0.1f64..0.9, u in values(255)) {
        let op = common::operator("(-1,1)", 256, s);
        let u = &u[..op.len()];
        let mut a = vec![0.0; op.len()];
        let mut b = vec![0.0; op.len()];
        op.apply_into(u, &mut a);
        op.apply_sequential_into(u, &mut b);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn homogeneity_under_dilation(s in 0.1f64..0.9, t in prop::sample::select(vec![0.5f64, 2.0, 4.0])) {
        // same node count, spacing scaled by t: entries scale by t^{1-2s}
        let d = Domain1D::ball(1.0).unwrap();
        let a = FracOperator::assemble(Arc::new(Mesh1D::build(&d, 32).unwrap()), s).unwrap();
        let b = FracOperator::assemble(Arc::new(Mesh1D::build(&d.scale(t).unwrap(), 32).unwrap()), s).unwrap();
        for (i, j) in [(0usize, 0usize), (3, 5), (10, 30)] {
            let expect = t.powf(1.0 - 2.0 * s) * a.entry(i, j);
            prop_assert!((b.entry(i, j) - expect).abs() <= 1e-12 * a.entry(0, 0));
        }
    }
}

#[test]
fn load_is_lumped_mass() {
    let op = common::operator("(-1,-0.2),(0.2,1)", 40, 0.5);
    let load: &GridFunction = &op.load();
    assert!(load.values().iter().all(|v| *v == op.mass()));
}
