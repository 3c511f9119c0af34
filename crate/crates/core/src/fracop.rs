//! Piecewise-linear Galerkin discretization of the restricted fractional
//! Laplacian on a lattice mesh.
//!
//! With hat functions `phi_i` on the lattice of spacing `h`, extended by zero
//! to the whole line, the bilinear form
//!
//! ```text
//! E(u, v) = gamma(1,s)/2 * int int (u(x)-u(y)) (v(x)-v(y)) / |x-y|^{1+2s} dx dy
//! ```
//!
//! has entries `E(phi_i, phi_j) = h^{1-2s} a_{|i-j|}` that depend only on the
//! lattice offset. The dimensionless weights `a_k` equal `(-Delta)^s B (k)`
//! where `B` is the autocorrelation of the unit hat (the centered cubic
//! B-spline), and in closed form
//!
//! ```text
//! a_k = gamma(1,s) * delta^4 F(k) / (2s (2-2s) (3-2s)),
//! F(x) = x^2 (|x|^{1-2s} - 1) / (1 - 2s),
//! ```
//!
//! with `delta^4` the fourth central difference. Subtracting `x^2` (which the
//! fourth difference annihilates) keeps `F` finite at `s = 1/2`, where it
//! becomes `x^2 ln|x|`. For large offsets the difference cancels badly, so
//! beyond [`CLOSED_FORM_OFFSETS`] the weights come from Gauss-Legendre
//! quadrature of `-gamma int B(t) |k - t|^{-1-2s} dt`, whose integrand is
//! smooth there.
//!
//! The operator on a domain is the principal submatrix of this Toeplitz form
//! on the active nodes, so exterior interactions are already accounted for.

use std::sync::{Arc, OnceLock};

use crate::cg::{self, CgOutcome};
use crate::domain::{GridFunction, Mesh1D};
use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::{gauss_legendre, integrate};
use crate::specfun::{normalization_gamma, FracOrder};
use crate::toeplitz::ToeplitzInverse;

/// Offsets up to this value use the closed-form fourth difference.
pub const CLOSED_FORM_OFFSETS: usize = 8;

/// Default relative residual for shifted solves.
pub const DEFAULT_TOL: f64 = 1e-10;

pub(crate) fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidOrder(s))
    }
}

fn gamma1(s: f64) -> f64 {
    normalization_gamma(FracOrder::new(1, s).expect("order checked"))
}

// F(x) = x^2 (|x|^{1-2s} - 1) / (1 - 2s), continuous across s = 1/2.
fn regularized_power(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let eps = 1.0 - 2.0 * s;
    let l = x.abs().ln();
    let ratio = if eps.abs() < 1e-300 { l } else { (eps * l).exp_m1() / eps };
    x * x * ratio
}

// Autocorrelation of the unit hat: the centered cubic B-spline.
fn hat_autocorrelation(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        0.0
    }
}

/// Dimensionless Galerkin weight `a_k` for unit lattice spacing.
pub fn hat_weight(s: f64, k: usize) -> f64 {
    let g = gamma1(s);
    if k <= CLOSED_FORM_OFFSETS {
        let f = |x: i64| regularized_power(x as f64, s);
        let k = k as i64;
        let d4 = f(k - 2) - 4.0 * f(k - 1) + 6.0 * f(k) - 4.0 * f(k + 1) + f(k + 2);
        g * d4 / (2.0 * s * (2.0 - 2.0 * s) * (3.0 - 2.0 * s))
    } else {
        far_weight(s, k, g)
    }
}

fn far_weight(s: f64, k: usize, g: f64) -> f64 {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(12);
    }
    let kf = k as f64;
    let p = 1.0 + 2.0 * s;
    RULE.with(|rule| {
        let mut acc = 0.0;
        for piece in -2..2 {
            let a = piece as f64;
            acc += integrate(rule, a, a + 1.0, |t| hat_autocorrelation(t) * (kf - t).powf(-p));
        }
        -g * acc
    })
}

/// Table of dimensionless weights `a_0, ..., a_K` for one order `s`.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    s: f64,
    gamma: f64,
    table: Vec<f64>,
}

impl KernelWeights {
    pub fn new(s: f64, max_offset: usize) -> Result<Self> {
        check_order(s)?;
        let table: Vec<f64> = (0..=max_offset).map(|k| hat_weight(s, k)).collect();
        if !(table[0] > 0.0) || table[2..].iter().any(|&a| !(a < 0.0)) {
            return Err(Error::InvalidInput(format!("kernel weight table is corrupt at s = {s}")));
        }
        Ok(Self {
            s,
            gamma: gamma1(s),
            table,
        })
    }

    /// Whether every off-diagonal weight is negative.
    ///
    /// For small orders the hat functions behave like a mass matrix and the
    /// nearest-neighbour weight turns positive (below `s ~ 0.2374`); the
    /// discrete maximum principle is then lost.
    pub fn is_m_matrix(&self) -> bool {
        self.table.get(1).is_none_or(|&a| a < 0.0)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn max_offset(&self) -> usize {
        self.table.len() - 1
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `a_k`, computed on the fly past the end of the table.
    pub fn get(&self, k: usize) -> f64 {
        self.table.get(k).copied().unwrap_or_else(|| far_weight(self.s, k, self.gamma))
    }

    /// Analytic estimate of `sum_{k > K} a_k` for `K` = the table length.
    ///
    /// Uses the midpoint approximation `-gamma int_{K+1/2}^inf z^{-1-2s} dz`.
    pub fn tail_sum(&self) -> f64 {
        let k = self.max_offset() as f64 + 0.5;
        -self.gamma * k.powf(-2.0 * self.s) / (2.0 * self.s)
    }
}

/// The assembled discrete operator on one mesh.
#[derive(Debug)]
pub struct FracOperator {
    mesh: Arc<Mesh1D>,
    s: f64,
    weights: KernelWeights,
    // h^{1-2s}
    scale: f64,
    lambda1: OnceLock<f64>,
}

impl FracOperator {
    pub fn assemble(mesh: Arc<Mesh1D>, s: f64) -> Result<Self> {
        check_order(s)?;
        let span = match (mesh.nodes().first(), mesh.nodes().last()) {
            (Some(a), Some(b)) => (b - a) as usize,
            _ => return Err(Error::InvalidInput("mesh has no active nodes".into())),
        };
        let weights = KernelWeights::new(s, span.max(1))?;
        let scale = mesh.h().powf(1.0 - 2.0 * s);
        Ok(Self {
            mesh,
            s,
            weights,
            scale,
            lambda1: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn weights(&self) -> &KernelWeights {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    /// Lumped mass of every active node.
    pub fn mass(&self) -> f64 {
        self.mesh.h()
    }

    /// Matrix entry between active nodes `i` and `j`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let nodes = self.mesh.nodes();
        self.scale * self.weights.get(nodes[i].abs_diff(nodes[j]) as usize)
    }

    /// Sum of row `i` over the active columns.
    pub fn row_sum(&self, i: usize) -> f64 {
        let ones = vec![1.0; self.len()];
        self.row(i, &ones)
    }

    fn row(&self, i: usize, u: &[f64]) -> f64 {
        let nodes = self.mesh.nodes();
        let table = self.weights.table();
        let gi = nodes[i];
        let mut acc = 0.0;
        for run in self.mesh.runs() {
            let ur = &u[run.clone()];
            if ur.is_empty() {
                continue;
            }
            // offsets gi - g_j = c - j over the run
            let c = gi - nodes[run.start];
            let n = ur.len() as i64;
            if c >= 0 {
                let m = c.min(n - 1) as usize;
                let c = c as usize;
                acc += table[c - m..=c].iter().rev().zip(&ur[..=m]).map(|(a, b)| a * b).sum::<f64>();
            }
            let lo = (c + 1).max(0);
            if lo < n {
                let start = (lo - c) as usize;
                let lo = lo as usize;
                acc += table[start..start + ur.len() - lo]
                    .iter()
                    .zip(&ur[lo..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
        }
        self.scale * acc
    }

    /// `out = A u`, rows distributed over the worker pool.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        par::fill_rows(out, |i| self.row(i, u));
    }

    /// `out = A u` on the calling thread.
    pub fn apply_sequential_into(&self, u: &[f64], out: &mut [f64]) {
        par::fill_rows_sequential(out, |i| self.row(i, u));
    }

    fn check_mesh(&self, u: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(u.mesh(), &self.mesh) || u.mesh().same_lattice_nodes(&self.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check_mesh(u)?;
        let mut out = vec![0.0; self.len()];
        self.apply_into(u.values(), &mut out);
        GridFunction::new(Arc::clone(&self.mesh), out)
    }

    /// Squared Gagliardo seminorm `u^T A u` of the zero extension.
    pub fn energy(&self, u: &GridFunction) -> Result<f64> {
        self.check_mesh(u)?;
        Ok(self.energy_of(u.values()))
    }

    pub(crate) fn energy_of(&self, u: &[f64]) -> f64 {
        let mut au = vec![0.0; u.len()];
        self.apply_into(u, &mut au);
        cg::dot(u, &au)
    }

    /// The lumped load vector `m` (all entries `h`).
    pub fn load(&self) -> GridFunction {
        GridFunction::new(Arc::clone(&self.mesh), vec![self.mass(); self.len()]).expect("sized to mesh")
    }

    pub fn cached_lambda1(&self) -> Option<f64> {
        self.lambda1.get().copied()
    }

    pub(crate) fn cache_lambda1(&self, value: f64) {
        let _ = self.lambda1.set(value);
    }

    /// Solver for `(A - alpha M) w = b`.
    pub fn shifted(&self, alpha: f64) -> Result<ShiftedSolver<'_>> {
        if let Some(lambda1) = self.cached_lambda1() {
            if alpha >= lambda1 {
                return Err(Error::AboveSpectrum { alpha, lambda1 });
            }
        }
        let table = self.weights.table();
        let shift = alpha * self.mass();
        let blocks = self
            .mesh
            .runs()
            .iter()
            .map(|run| {
                let mut col: Vec<f64> = table[..run.len()].iter().map(|a| self.scale * a).collect();
                col[0] -= shift;
                ToeplitzInverse::new(&col).map_err(|_| Error::Indefinite)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShiftedSolver { op: self, alpha, blocks })
    }

    /// Solves `(A - alpha M) w = rhs` to relative residual `tol`.
    pub fn solve_shifted(&self, alpha: f64, rhs: &GridFunction, tol: f64) -> Result<GridFunction> {
        self.check_mesh(rhs)?;
        let out = self.shifted(alpha)?.solve(rhs.values(), None, tol)?;
        GridFunction::new(Arc::clone(&self.mesh), out.solution)
    }
}

/// Shifted system with a block-Toeplitz preconditioner: one exact Toeplitz
/// inverse per connected component.
pub struct ShiftedSolver<'a> {
    op: &'a FracOperator,
    alpha: f64,
    blocks: Vec<ToeplitzInverse>,
}

impl ShiftedSolver<'_> {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.op.apply_into(u, out);
        let shift = self.alpha * self.op.mass();
        for (o, v) in out.iter_mut().zip(u) {
            *o -= shift * v;
        }
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        for (run, block) in self.op.mesh.runs().iter().zip(&self.blocks) {
            block.solve_into(&r[run.clone()], &mut z[run.clone()]);
        }
    }

    pub fn solve(&self, rhs: &[f64], initial: Option<&[f64]>, tol: f64) -> Result<CgOutcome> {
        let max_iter = 20 * self.op.len().max(1);
        cg::pcg(
            |u, out| self.apply(u, out),
            |r, z| self.precondition(r, z),
            rhs,
            initial,
            tol,
            max_iter,
        )
        .map_err(|e| match e {
            Error::Indefinite => match self.op.cached_lambda1() {
                Some(lambda1) => Error::AboveSpectrum {
                    alpha: self.alpha,
                    lambda1,
                },
                None => Error::Indefinite,
            },
            other => other,
        })
    }
}
