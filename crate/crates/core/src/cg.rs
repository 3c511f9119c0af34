//! Preconditioned conjugate gradients for symmetric positive definite systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||`, recomputed from scratch.
    pub relative_residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` to relative residual `tol`.
///
/// `apply(v, out)` computes `A v`; `precond(r, out)` applies an SPD
/// approximation of `A^{-1}`. Nonpositive curvature `p^T A p <= 0` is
/// reported as [`Error::Indefinite`].
pub fn pcg<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    initial: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = match initial {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut ax = vec![0.0; n];
    let mut r = b.to_vec();
    if initial.is_some() {
        apply(&x, &mut ax);
        for (ri, a) in r.iter_mut().zip(&ax) {
            *ri -= a;
        }
    }
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut trace = Vec::new();

    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        let res = norm(&r) / b_norm;
        if res <= tol {
            // Confirm against the true residual; the recurrence drifts.
            apply(&x, &mut ax);
            let true_res = b.iter().zip(&ax).map(|(bi, a)| (bi - a).powi(2)).sum::<f64>().sqrt() / b_norm;
            if true_res <= tol || restarts >= 3 {
                return Ok(CgOutcome {
                    solution: x,
                    iterations,
                    relative_residual: true_res,
                });
            }
            restarts += 1;
            for ((ri, bi), a) in r.iter_mut().zip(b).zip(&ax) {
                *ri = bi - a;
            }
        }
        precond(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            if iterations >= max_iter {
                return Err(Error::NoConvergence {
                    solver: "conjugate gradients",
                    iterations,
                    residual: norm(&r) / b_norm,
                    trace,
                });
            }
            apply(&p, &mut q);
            let curvature = dot(&p, &q);
            if !(curvature > 0.0) {
                return Err(Error::Indefinite);
            }
            let step = rz / curvature;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * q[i];
            }
            iterations += 1;
            let res = norm(&r) / b_norm;
            if trace.len() < 64 || iterations % 16 == 0 {
                trace.push(res);
            }
            if res <= tol {
                break;
            }
            precond(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        let n = 50;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { v[i - 1] } else { 0.0 };
                let r = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = 2.0 * v[i] - l - r;
            }
        };
        let ident = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let b = vec![1.0; n];
        let out = pcg(apply, ident, &b, None, 1e-12, 500).unwrap();
        assert!(out.relative_residual <= 1e-12);
        // exact solution x_i = (i+1)(n-i)/2
        for (i, x) in out.solution.iter().enumerate() {
            let exact = (i + 1) as f64 * (n - i) as f64 / 2.0;
            assert!((x - exact).abs() < 1e-8 * exact);
        }
    }

    #[test]
    fn detects_indefinite() {
        let apply = |v: &[f64], out: &mut [f64]| {
            out[0] = v[0];
            out[1] = -v[1];
        };
        let ident = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        assert!(matches!(
            pcg(apply, ident, &[0.0, 1.0], None, 1e-10, 10),
            Err(Error::Indefinite)
        ));
    }

    #[test]
    fn zero_rhs() {
        let apply = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let out = pcg(apply, apply, &[0.0; 3], None, 1e-10, 10).unwrap();
        assert_eq!(out.solution, vec![0.0; 3]);
    }
}
