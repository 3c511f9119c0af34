//! Generalized torsion `(-Delta)^s w = alpha w + 1`, the rigidity
//! `Q(alpha, Omega) = int w`, and the unit-ball reference used to evaluate
//! `Q` on balls of any radius through the scaling law
//! `Q#(alpha, R) = R^{1+2s} Q#(alpha R^{2s}, 1)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::cg;
use crate::domain::{Domain1D, GridFunction, Mesh1D};
use crate::error::{Error, Result};
use crate::fracop::FracOperator;
use crate::spectral::{principal_eigenpair, SpectralResult};

/// Relative residual used for torsion solves.
pub const TORSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TorsionResult {
    pub alpha: f64,
    pub w: GridFunction,
    /// `sum_i m_i w_i`
    pub q: f64,
    /// `w^T A w`
    pub energy: f64,
    /// `sum_i m_i w_i^2`
    pub l2sq: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl TorsionResult {
    /// Value of `-E(w) + alpha ||w||^2 + 2 int w`, the maximized functional.
    pub fn functional_value(&self) -> f64 {
        -self.energy + self.alpha * self.l2sq + 2.0 * self.q
    }
}

/// Principal eigenvalue of `op`, computed and cached on first use.
pub fn lambda1(op: &FracOperator) -> Result<f64> {
    match op.cached_lambda1() {
        Some(l) => Ok(l),
        None => principal_eigenpair(op).map(|r| r.lambda1h),
    }
}

/// Solves `(A - alpha M) w = m`.
///
/// For `alpha > 0` the principal eigenvalue is computed first if the
/// operator has none cached, and shifts at or above it are refused.
pub fn generalized_torsion(op: &FracOperator, alpha: f64) -> Result<TorsionResult> {
    if !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha must be finite, got {alpha}")));
    }
    if alpha > 0.0 {
        let lambda1 = lambda1(op)?;
        if alpha >= lambda1 {
            return Err(Error::AboveSpectrum { alpha, lambda1 });
        }
    }
    let out = op.shifted(alpha)?.solve(op.load().values(), None, TORSION_TOL)?;
    let h = op.mass();
    let w = GridFunction::new(Arc::clone(op.mesh()), out.solution)?;
    let q = w.integral();
    let energy = op.energy(&w)?;
    let l2sq = h * cg::dot(w.values(), w.values());
    Ok(TorsionResult {
        alpha,
        w,
        q,
        energy,
        l2sq,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
    })
}

/// Central difference of `Q` at `alpha` together with `||w_alpha||^2`.
pub fn q_derivative_check(op: &FracOperator, alpha: f64, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
    }
    let plus = generalized_torsion(op, alpha + delta)?;
    let minus = generalized_torsion(op, alpha - delta)?;
    let centre = generalized_torsion(op, alpha)?;
    Ok(((plus.q - minus.q) / (2.0 * delta), centre.l2sq))
}

/// One tabulated point of `Q#(beta, 1)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QEntry {
    pub beta: f64,
    pub q: f64,
    pub l2sq: f64,
}

const LINEAR_POINTS: usize = 24;
const GEOMETRIC_POINTS: usize = 40;
const BETA_MIN: f64 = -32.0;
// closest approach to lambda1 on the table, relative
const GAP_MIN: f64 = 1e-3;
const RADIUS_STEPS: usize = 200;
const RADIUS_TOL: f64 = 1e-8;

/// Unit-interval quantities for one `(s, M)`: the principal eigenpair and a
/// table of `Q#(beta, 1)` with monotone cubic interpolation in
/// `t = -ln(lambda1h - beta)`.
pub struct UnitBallQCache {
    s: f64,
    cells: usize,
    op: FracOperator,
    eigen: SpectralResult,
    table: Vec<QEntry>,
    misses: Mutex<HashMap<u64, QEntry>>,
}

impl std::fmt::Debug for UnitBallQCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitBallQCache")
            .field("s", &self.s)
            .field("cells", &self.cells)
            .field("lambda1h", &self.eigen.lambda1h)
            .field("table", &self.table.len())
            .finish()
    }
}

impl UnitBallQCache {
    pub fn build(s: f64, cells: usize) -> Result<Self> {
        let mesh = Arc::new(Mesh1D::build(&Domain1D::ball(1.0)?, cells)?);
        let op = FracOperator::assemble(mesh, s)?;
        let eigen = principal_eigenpair(&op)?;
        let lambda = eigen.lambda1h;

        let mut betas: Vec<f64> = (0..LINEAR_POINTS)
            .map(|k| BETA_MIN * (1.0 - k as f64 / LINEAR_POINTS as f64))
            .collect();
        let ratio = GAP_MIN.powf(1.0 / (GEOMETRIC_POINTS - 1) as f64);
        betas.extend((0..GEOMETRIC_POINTS).map(|k| lambda * (1.0 - ratio.powi(k as i32))));
        let table = betas
            .into_iter()
            .map(|beta| solve_entry(&op, beta))
            .collect::<Result<Vec<_>>>()?;
        if table.windows(2).any(|w| !(w[1].q > w[0].q)) {
            return Err(Error::InvalidInput("unit-ball Q table is not increasing".into()));
        }
        Ok(Self {
            s,
            cells,
            op,
            eigen,
            table,
            misses: Mutex::new(HashMap::new()),
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn lambda1h(&self) -> f64 {
        self.eigen.lambda1h
    }

    /// Principal eigenpair on `(-1, 1)`.
    pub fn eigenpair(&self) -> &SpectralResult {
        &self.eigen
    }

    pub fn operator(&self) -> &FracOperator {
        &self.op
    }

    pub fn table(&self) -> &[QEntry] {
        &self.table
    }

    fn t_of(&self, beta: f64) -> f64 {
        -(self.lambda1h() - beta).ln()
    }

    /// `Q#(beta, 1)`.
    pub fn q_unit(&self, beta: f64) -> Result<f64> {
        let lambda = self.lambda1h();
        if !(beta < lambda) {
            return Err(Error::AboveSpectrum { alpha: beta, lambda1: lambda });
        }
        let (first, last) = (self.table[0], self.table[self.table.len() - 1]);
        if beta < first.beta || beta > last.beta {
            return self.fresh(beta).map(|e| e.q);
        }
        let k = self.table.partition_point(|e| e.beta <= beta).clamp(1, self.table.len() - 1);
        let (a, b) = (self.table[k - 1], self.table[k]);
        if beta == a.beta {
            return Ok(a.q);
        }
        let (ta, tb) = (self.t_of(a.beta), self.t_of(b.beta));
        let dt = tb - ta;
        let (ya, yb) = (a.q.ln(), b.q.ln());
        // d ln Q / dt = (||w||^2 / Q) (lambda - beta)
        let mut da = a.l2sq / a.q * (lambda - a.beta);
        let mut db = b.l2sq / b.q * (lambda - b.beta);
        let secant = (yb - ya) / dt;
        // Fritsch-Carlson limiter
        let (ra, rb) = (da / secant, db / secant);
        let norm = ra.hypot(rb);
        if norm > 3.0 {
            da *= 3.0 / norm;
            db *= 3.0 / norm;
        }
        let u = (self.t_of(beta) - ta) / dt;
        let u2 = u * u;
        let u3 = u2 * u;
        let y = (2.0 * u3 - 3.0 * u2 + 1.0) * ya
            + (u3 - 2.0 * u2 + u) * dt * da
            + (-2.0 * u3 + 3.0 * u2) * yb
            + (u3 - u2) * dt * db;
        Ok(y.exp())
    }

    fn fresh(&self, beta: f64) -> Result<QEntry> {
        let key = beta.to_bits();
        if let Some(e) = self.misses.lock().expect("cache lock poisoned").get(&key) {
            return Ok(*e);
        }
        let entry = solve_entry(&self.op, beta)?;
        self.misses.lock().expect("cache lock poisoned").insert(key, entry);
        Ok(entry)
    }

    /// Largest radius with finite `Q#(alpha, .)`; infinite for `alpha <= 0`.
    pub fn critical_radius(&self, alpha: f64) -> f64 {
        if alpha > 0.0 {
            (self.lambda1h() / alpha).powf(1.0 / (2.0 * self.s))
        } else {
            f64::INFINITY
        }
    }

    /// `Q#(alpha, R) = R^{1+2s} Q#(alpha R^{2s}, 1)`.
    pub fn qsharp(&self, alpha: f64, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
        }
        let r2s = r.powf(2.0 * self.s);
        let beta = alpha * r2s;
        if beta >= self.lambda1h() {
            return Err(Error::AboveSpectrum {
                alpha,
                lambda1: self.lambda1h() / r2s,
            });
        }
        Ok(r * r2s * self.q_unit(beta)?)
    }

    /// The unique `R` with `Q#(alpha, R) = q_target`, by bisection on
    /// `[h, 1.5 r_hint_upper]` capped below the critical radius.
    pub fn find_radius(&self, alpha: f64, q_target: f64, r_hint_upper: f64) -> Result<f64> {
        if !(q_target > 0.0) || !q_target.is_finite() {
            return Err(Error::InvalidInput(format!("target Q must be positive, got {q_target}")));
        }
        if !(r_hint_upper > 0.0) {
            return Err(Error::InvalidInput(format!("radius hint must be positive, got {r_hint_upper}")));
        }
        let mut lo = self.op.mass() * r_hint_upper.min(1.0);
        let mut hi = 1.5 * r_hint_upper;
        let critical = self.critical_radius(alpha);
        if hi >= critical {
            hi = critical * (1.0 - 1e-9);
        }
        if !(lo < hi) {
            return Err(Error::Bracket(format!("empty radius bracket [{lo}, {hi}] at alpha = {alpha}")));
        }
        let q_lo = self.qsharp(alpha, lo)?;
        let q_hi = self.qsharp(alpha, hi)?;
        if q_lo > q_target || q_hi < q_target {
            return Err(Error::Bracket(format!(
                "Q = {q_target} not bracketed by Q#({alpha}, [{lo}, {hi}]) = [{q_lo}, {q_hi}]"
            )));
        }
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..RADIUS_STEPS {
            mid = 0.5 * (lo + hi);
            let q = self.qsharp(alpha, mid)?;
            if (q - q_target).abs() <= RADIUS_TOL * q_target {
                return Ok(mid);
            }
            if q < q_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }

    /// Generalized torsion function on `B_R` by scaling a fresh unit-ball
    /// solve: nodal values and the cell measure `R h_1`.
    pub fn ball_solution(&self, alpha: f64, r: f64) -> Result<(Vec<f64>, f64)> {
        let r2s = r.powf(2.0 * self.s);
        let res = generalized_torsion(&self.op, alpha * r2s)?;
        Ok((res.w.values().iter().map(|v| r2s * v).collect(), r * self.op.mass()))
    }
}

fn solve_entry(op: &FracOperator, beta: f64) -> Result<QEntry> {
    let res = generalized_torsion(op, beta)?;
    Ok(QEntry {
        beta,
        q: res.q,
        l2sq: res.l2sq,
    })
}
