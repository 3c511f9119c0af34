//! Direct solves with symmetric positive definite Toeplitz matrices.
//!
//! The first column of the inverse is obtained with the Durbin recursion in
//! `O(n^2)`; products with the inverse then use the Gohberg-Semencul
//! representation
//!
//! ```text
//! T^{-1} = (L1 L1^T - L2 L2^T) / x_0
//! ```
//!
//! where `x = T^{-1} e_1`, `L1` is lower-triangular Toeplitz with first column
//! `x` and `L2` is lower-triangular Toeplitz with first column
//! `(0, x_{n-1}, ..., x_1)`. Each solve costs four triangular Toeplitz
//! products.

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone)]
pub struct ToeplitzInverse {
    // x = T^{-1} e_1
    first: Vec<f64>,
    // (0, x_{n-1}, ..., x_1)
    second: Vec<f64>,
}

impl ToeplitzInverse {
    /// Factors the symmetric Toeplitz matrix with first column `col`.
    ///
    /// Fails if the matrix is not positive definite.
    pub fn new(col: &[f64]) -> Result<Self> {
        let n = col.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty Toeplitz column".into()));
        }
        let t0 = col[0];
        if !(t0 > 0.0) {
            return Err(Error::InvalidInput("Toeplitz matrix is not positive definite".into()));
        }
        let r: Vec<f64> = col[1..].iter().map(|t| t / t0).collect();
        let m = r.len();
        let mut y = Vec::with_capacity(m);
        if m > 0 {
            y.push(-r[0]);
            let mut beta = 1.0;
            let mut alpha = -r[0];
            let mut z = vec![0.0; m];
            for k in 1..m {
                beta *= 1.0 - alpha * alpha;
                if !(beta > 0.0) {
                    return Err(Error::InvalidInput("Toeplitz matrix is not positive definite".into()));
                }
                let dot: f64 = (0..k).map(|j| r[k - 1 - j] * y[j]).sum();
                alpha = -(r[k] + dot) / beta;
                for j in 0..k {
                    z[j] = y[j] + alpha * y[k - 1 - j];
                }
                y[..k].copy_from_slice(&z[..k]);
                y.push(alpha);
            }
        }
        let denom = 1.0 + r.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        if !(denom > 0.0) {
            return Err(Error::InvalidInput("Toeplitz matrix is not positive definite".into()));
        }
        let scale = 1.0 / (denom * t0);
        let mut first = Vec::with_capacity(n);
        first.push(scale);
        first.extend(y.iter().map(|v| v * scale));

        let mut second = vec![0.0; n];
        for k in 1..n {
            second[k] = first[n - k];
        }
        Ok(Self { first, second })
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    /// Writes `T^{-1} b` into `out`.
    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) {
        let n = self.len();
        assert_eq!(b.len(), n);
        assert_eq!(out.len(), n);
        let mut tmp = vec![0.0; n];
        let mut acc = vec![0.0; n];

        upper_product(&self.first, b, &mut tmp);
        lower_product(&self.first, &tmp, &mut acc);
        upper_product(&self.second, b, &mut tmp);
        lower_product(&self.second, &tmp, out);

        let inv_x0 = 1.0 / self.first[0];
        for (o, a) in out.iter_mut().zip(&acc) {
            *o = (a - *o) * inv_x0;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.len()];
        self.solve_into(b, &mut out);
        out
    }
}

// out_i = sum_{j <= i} c_{i-j} v_j
fn lower_product(c: &[f64], v: &[f64], out: &mut [f64]) {
    par::fill_rows(out, |i| {
        c[..=i].iter().rev().zip(&v[..=i]).map(|(a, b)| a * b).sum()
    });
}

// out_i = sum_{j >= i} c_{j-i} v_j
fn upper_product(c: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    par::fill_rows(out, |i| c[..n - i].iter().zip(&v[i..]).map(|(a, b)| a * b).sum());
}
