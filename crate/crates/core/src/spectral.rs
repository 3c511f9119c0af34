//! Principal Dirichlet eigenpair of the discrete operator and mesh-limit
//! extrapolation of eigenvalues.
//!
//! The generalized problem `A u = lambda M u` is solved by block inverse
//! iteration: every sweep solves `A w_j = M v_j` with preconditioned
//! conjugate gradients for a small block of vectors, then performs a
//! Rayleigh-Ritz step on the span. With a block of size `p` the leading
//! eigenvalue converges at the rate `lambda_1 / lambda_{p+1}`, which keeps
//! nearly degenerate two-component domains cheap.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::cg;
use crate::domain::{Domain1D, GridFunction, Mesh1D};
use crate::error::{Error, Result};
use crate::fracop::FracOperator;

const BLOCK: usize = 3;
const MAX_SWEEPS: usize = 5000;
const LAMBDA_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-9;
const SOLVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub lambda1h: f64,
    /// Positive eigenfunction with `sum_i h u_i^2 = 1`.
    pub eigenfunction: GridFunction,
    pub iterations: usize,
    /// `||A u - lambda M u||_{M^{-1}}` for the normalized eigenfunction.
    pub residual: f64,
    pub h: f64,
    /// Leading Ritz value after every sweep.
    pub trace: Vec<f64>,
}

/// Rayleigh quotient `u^T A u / u^T M u`.
pub fn rayleigh_quotient(op: &FracOperator, u: &GridFunction) -> Result<f64> {
    let mass = op.mass() * cg::dot(u.values(), u.values());
    if mass == 0.0 {
        return Err(Error::InvalidInput("Rayleigh quotient of the zero function".into()));
    }
    Ok(op.energy(u)? / mass)
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    applied: Vec<Vec<f64>>,
    sweeps: usize,
    trace: Vec<f64>,
}

fn m_dot(h: f64, a: &[f64], b: &[f64]) -> f64 {
    h * cg::dot(a, b)
}

fn project_out(h: f64, v: &mut [f64], against: &[f64]) {
    let c = m_dot(h, v, against);
    for (x, y) in v.iter_mut().zip(against) {
        *x -= c * y;
    }
}

// M-orthonormalizes in place with two passes of modified Gram-Schmidt.
// Vectors that collapse are dropped.
fn orthonormalize(h: f64, block: &mut Vec<Vec<f64>>, deflate: Option<&[f64]>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut v in block.drain(..) {
        let scale = m_dot(h, &v, &v).sqrt();
        for _ in 0..2 {
            if let Some(d) = deflate {
                project_out(h, &mut v, d);
            }
            for q in &out {
                project_out(h, &mut v, q);
            }
        }
        let n = m_dot(h, &v, &v).sqrt();
        if n > 1e-10 * scale && n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    *block = out;
}

fn block_inverse_iteration(op: &FracOperator, start: Vec<Vec<f64>>, deflate: Option<&[f64]>) -> Result<Ritz> {
    let h = op.mass();
    let n = op.len();
    let solver = op.shifted(0.0)?;
    let mut block = start;
    orthonormalize(h, &mut block, deflate);
    if block.is_empty() {
        return Err(Error::InvalidInput("no admissible starting vectors".into()));
    }
    let mut trace = Vec::new();
    let mut previous = f64::INFINITY;
    // warm starts A^{-1} M v ~ v / lambda
    let mut guesses: Vec<Option<f64>> = vec![None; block.len()];
    for sweep in 1..=MAX_SWEEPS {
        let mut next = Vec::with_capacity(block.len());
        for (v, guess) in block.iter().zip(&guesses) {
            let rhs: Vec<f64> = v.iter().map(|x| h * x).collect();
            let initial = guess.map(|l| v.iter().map(|x| x / l).collect::<Vec<f64>>());
            let out = solver.solve(&rhs, initial.as_deref(), SOLVE_TOL)?;
            next.push(out.solution);
        }
        orthonormalize(h, &mut next, deflate);
        let p = next.len();
        if p == 0 {
            return Err(Error::InvalidInput("iteration collapsed onto the deflated space".into()));
        }
        let applied: Vec<Vec<f64>> = next
            .iter()
            .map(|v| {
                let mut av = vec![0.0; n];
                op.apply_into(v, &mut av);
                av
            })
            .collect();
        let projected = DMatrix::from_fn(p, p, |i, j| 0.5 * (cg::dot(&next[i], &applied[j]) + cg::dot(&next[j], &applied[i])));
        let eig = SymmetricEigen::new(projected);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let combine = |basis: &[Vec<f64>], k: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(j, k)];
                for (o, x) in out.iter_mut().zip(b) {
                    *o += c * x;
                }
            }
            out
        };
        let vectors: Vec<Vec<f64>> = order.iter().map(|&k| combine(&next, k)).collect();
        let applied: Vec<Vec<f64>> = order.iter().map(|&k| combine(&applied, k)).collect();

        let lambda = values[0];
        trace.push(lambda);
        let residual = m_inverse_residual(h, lambda, &vectors[0], &applied[0]);
        let change = ((previous - lambda) / lambda).abs();
        previous = lambda;
        if change <= LAMBDA_TOL && residual <= RESIDUAL_TOL * lambda {
            return Ok(Ritz {
                values,
                vectors,
                applied,
                sweeps: sweep,
                trace,
            });
        }
        guesses = values.iter().map(|&l| Some(l)).collect();
        block = vectors;
    }
    let residual = trace.last().copied().unwrap_or(f64::NAN);
    Err(Error::NoConvergence {
        solver: "inverse iteration",
        iterations: MAX_SWEEPS,
        residual,
        trace,
    })
}

// ||A u - lambda M u||_{M^{-1}} for M = h I.
fn m_inverse_residual(h: f64, lambda: f64, u: &[f64], au: &[f64]) -> f64 {
    (u.iter().zip(au).map(|(x, a)| (a - lambda * h * x).powi(2)).sum::<f64>() / h).sqrt()
}

// Torsion-shaped starting block: w, w x, w x^2, ... with x centred on the domain.
fn starting_block(op: &FracOperator, size: usize) -> Result<Vec<Vec<f64>>> {
    let torsion = op.shifted(0.0)?.solve(op.load().values(), None, 1e-8)?.solution;
    let xs = op.mesh().coordinates();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo).max(op.mass()));
    Ok((0..size)
        .map(|k| {
            torsion
                .iter()
                .zip(&xs)
                .map(|(w, x)| w * ((x - mid) / half).powi(k as i32))
                .collect()
        })
        .collect())
}

/// Smallest eigenvalue of `(A, M)` with its positive eigenfunction.
///
/// The eigenvalue is cached on the operator for later shift checks.
pub fn principal_eigenpair(op: &FracOperator) -> Result<SpectralResult> {
    let size = BLOCK.min(op.len());
    let ritz = block_inverse_iteration(op, starting_block(op, size)?, None)?;
    let mut u = ritz.vectors[0].clone();
    if u.iter().sum::<f64>() < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    let h = op.mass();
    let lambda = ritz.values[0];
    let residual = m_inverse_residual(h, lambda, &ritz.vectors[0], &ritz.applied[0]);
    op.cache_lambda1(lambda);
    Ok(SpectralResult {
        lambda1h: lambda,
        eigenfunction: GridFunction::new(Arc::clone(op.mesh()), u)?,
        iterations: ritz.sweeps,
        residual,
        h,
        trace: ritz.trace,
    })
}

/// Second eigenvalue by inverse iteration on the M-orthogonal complement of
/// the principal eigenfunction.
pub fn second_eigenvalue(op: &FracOperator, first: &SpectralResult) -> Result<f64> {
    if op.len() < 2 {
        return Err(Error::InvalidInput("need at least two nodes".into()));
    }
    let size = BLOCK.min(op.len() - 1);
    let start = starting_block(op, size + 1)?;
    let ritz = block_inverse_iteration(op, start, Some(first.eigenfunction.values()))?;
    Ok(ritz.values[0])
}

/// Builds the mesh and operator and returns the principal eigenpair.
pub fn eigenpair_on(domain: &Domain1D, s: f64, cells: usize) -> Result<(FracOperator, SpectralResult)> {
    let op = FracOperator::assemble(Arc::new(Mesh1D::build(domain, cells)?), s)?;
    let res = principal_eigenpair(&op)?;
    Ok((op, res))
}

/// Richardson extrapolation of a mesh sequence.
#[derive(Debug, Clone, Serialize)]
pub struct Extrapolation {
    pub value: f64,
    /// Empirical convergence order from the last three levels.
    pub order: f64,
    /// Magnitude of the last extrapolation correction.
    pub error_bar: f64,
    /// Mesh sizes and raw values.
    pub levels: Vec<(usize, f64)>,
    /// Set when the raw sequence is not monotone or the order estimate is
    /// not in `(0, 4]`; `value` then falls back to the finest raw value.
    pub unreliable: bool,
}

/// Extrapolates `values` computed on the increasing mesh sizes `ms`.
pub fn richardson(ms: &[usize], values: &[f64]) -> Result<Extrapolation> {
    if ms.len() < 3 || ms.len() != values.len() {
        return Err(Error::InvalidInput("need at least three mesh levels with one value each".into()));
    }
    if ms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("mesh sizes must increase".into()));
    }
    let k = ms.len();
    let (a, b, c) = (values[k - 3], values[k - 2], values[k - 1]);
    let r1 = ms[k - 2] as f64 / ms[k - 3] as f64;
    let r2 = ms[k - 1] as f64 / ms[k - 2] as f64;
    let d1 = a - b;
    let d2 = b - c;
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d > 0.0) || diffs.iter().all(|d| *d < 0.0);
    // equal ratios in practice; use their geometric mean otherwise
    let r = (r1 * r2).sqrt();
    let order = (d1 / d2).ln() / r.ln();
    let unreliable = !monotone || !(order > 0.0 && order <= 4.0);
    let (value, error_bar) = if unreliable {
        (c, d2.abs())
    } else {
        let correction = d2 / (r.powf(order) - 1.0);
        (c - correction, correction.abs())
    };
    Ok(Extrapolation {
        value,
        order,
        error_bar,
        levels: ms.iter().copied().zip(values.iter().copied()).collect(),
        unreliable,
    })
}

/// Principal eigenvalue on every mesh in `ms`, extrapolated to the mesh limit.
pub fn refine_and_extrapolate(domain: &Domain1D, s: f64, ms: &[usize]) -> Result<Extrapolation> {
    let values = ms
        .iter()
        .map(|&m| eigenpair_on(domain, s, m).map(|(_, r)| r.lambda1h))
        .collect::<Result<Vec<f64>>>()?;
    richardson(ms, &values)
}
