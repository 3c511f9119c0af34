//! Numerical checks of the isoperimetric inequalities for the fractional
//! Dirichlet Laplacian: Faber-Krahn, Saint-Venant, Kohler-Jobin through the
//! radius map `R(alpha)`, the mass-concentration comparison, the reverse
//! Hölder inequality for the principal eigenfunction, and Pólya-Szegő.
//!
//! Every report is computed on two meshes, `M/2` and `M`. Margins are
//! relative and positive when the inequality holds.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::domain::{lp_norm_cells, Domain1D, Mesh1D};
use crate::error::{Error, Result};
use crate::fracop::FracOperator;
use crate::par;
use crate::rearrange::{self, RearrangementProfile};
use crate::spectral::principal_eigenpair;
use crate::torsion::{generalized_torsion, lambda1, UnitBallQCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Holds,
    HoldsWithinTol,
    Violated,
}

/// Verdict from the margins on successively finer meshes.
///
/// A negative margin beyond `tol` on the finest mesh counts as a violation
/// only if it did not improve under refinement.
pub fn verdict(trend: &[f64], tol: f64) -> Verdict {
    let fine = match trend.last() {
        Some(&m) => m,
        None => return Verdict::Violated,
    };
    if fine >= 0.0 {
        Verdict::Holds
    } else if fine >= -tol || (trend.len() >= 2 && fine > trend[trend.len() - 2]) {
        Verdict::HoldsWithinTol
    } else {
        Verdict::Violated
    }
}

/// Relative tolerance: 2% up to `M = 1024`, 1% from `M = 2048`.
pub fn default_tol(cells: usize) -> f64 {
    if cells >= 2048 {
        0.01
    } else {
        0.02
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub domain: String,
    pub s: f64,
    pub mesh_sizes: Vec<usize>,
    /// Values on the finest mesh.
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Margin on every mesh, coarse to fine.
    pub trend: Vec<f64>,
    pub tol: f64,
    pub verdict: Verdict,
    /// Further recorded quantities on the finest mesh.
    pub diagnostics: BTreeMap<String, f64>,
}

struct Level {
    lhs: f64,
    rhs: f64,
    margin: f64,
    diagnostics: BTreeMap<String, f64>,
}

fn assemble_report(name: &str, domain: &Domain1D, s: f64, sizes: Vec<usize>, levels: Vec<Level>, tol: f64) -> InequalityReport {
    let trend: Vec<f64> = levels.iter().map(|l| l.margin).collect();
    let fine = levels.into_iter().last().expect("at least one level");
    InequalityReport {
        name: name.to_string(),
        domain: domain.to_string(),
        s,
        mesh_sizes: sizes,
        lhs: fine.lhs,
        rhs: fine.rhs,
        margin: fine.margin,
        verdict: verdict(&trend, tol),
        trend,
        tol,
        diagnostics: fine.diagnostics,
    }
}

/// The mesh levels used for a report at resolution `cells`.
pub fn levels(cells: usize) -> Vec<usize> {
    vec![cells / 2, cells]
}

/// A shift given either directly or as a fraction of `lambda1h(Omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Alpha {
    Absolute(f64),
    Relative(f64),
}

impl Alpha {
    pub fn resolve(self, lambda1: f64) -> f64 {
        match self {
            Alpha::Absolute(a) => a,
            Alpha::Relative(t) => t * lambda1,
        }
    }

    fn needs_eigenvalue(self) -> bool {
        match self {
            Alpha::Absolute(a) => a > 0.0,
            Alpha::Relative(_) => true,
        }
    }
}

/// `{-8, -4, -2, -1, -0.5, 0}` and `{0.1, 0.25, 0.5, 0.7, 0.8, 0.9} lambda1h`.
pub fn standard_alpha_grid() -> Vec<Alpha> {
    let mut grid: Vec<Alpha> = [-8.0, -4.0, -2.0, -1.0, -0.5, 0.0].into_iter().map(Alpha::Absolute).collect();
    grid.extend([0.1, 0.25, 0.5, 0.7, 0.8, 0.9].into_iter().map(Alpha::Relative));
    grid
}

/// The domains every inequality is checked on.
pub fn suite_domains() -> Vec<Domain1D> {
    let mut out = vec![Domain1D::ball(1.0).expect("valid")];
    for delta in [0.05, 0.2, 0.4] {
        out.push(Domain1D::new(&[(-1.0, -delta), (delta, 1.0)]).expect("valid"));
    }
    out.push(Domain1D::new(&[(-1.5, -0.5), (0.25, 1.25)]).expect("valid"));
    out.push(Domain1D::new(&[(0.0, 0.5), (0.75, 1.25), (1.5, 2.5)]).expect("valid"));
    out
}

// Shifts above this fraction of lambda1h are refused by the scans.
const SHIFT_CAP: f64 = 0.95;

fn operator(domain: &Domain1D, s: f64, cells: usize) -> Result<FracOperator> {
    FracOperator::assemble(Arc::new(Mesh1D::build(domain, cells)?), s)
}

fn operator_with_spacing(domain: &Domain1D, s: f64, h: f64) -> Result<FracOperator> {
    FracOperator::assemble(Arc::new(Mesh1D::with_spacing(domain, h)?), s)
}

/// Runs the checks, sharing unit-interval references per `(s, M)`.
#[derive(Debug, Default)]
pub struct Harness {
    tol: Option<f64>,
    references: Mutex<HashMap<(u64, usize), Arc<UnitBallQCache>>>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KJEntry {
    pub alpha: f64,
    pub q: f64,
    pub radius: f64,
    pub lambda_ball: f64,
    /// `(lambda1h(Omega) - lambda1h(B_R)) / lambda1h(B_R)`
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KJScan {
    pub domain: String,
    pub s: f64,
    pub mesh_size: usize,
    pub lambda1h: f64,
    pub r_sharp: f64,
    /// `(lambda1h(B_1) / lambda1h(Omega))^{1/2s}`, the radius as alpha
    /// approaches `lambda1h(Omega)`.
    pub limit_radius: f64,
    pub entries: Vec<KJEntry>,
    /// Largest increase of `R` between consecutive shifts.
    pub max_radius_increase: f64,
    pub radius_nonincreasing: bool,
    pub radius_below_sharp: bool,
    pub tol: f64,
    pub verdict: Verdict,
}

impl Harness {
    pub fn new() -> Self {
        Self::default()
    }

    /// Uses `tol` for every report instead of [`default_tol`].
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol: Some(tol),
            ..Self::default()
        }
    }

    pub fn tol(&self, cells: usize) -> f64 {
        self.tol.unwrap_or_else(|| default_tol(cells))
    }

    /// Unit-interval reference for `(s, cells)`, built on first use.
    pub fn reference(&self, s: f64, cells: usize) -> Result<Arc<UnitBallQCache>> {
        let mut refs = self.references.lock().expect("reference lock poisoned");
        if let Some(r) = refs.get(&(s.to_bits(), cells)) {
            return Ok(Arc::clone(r));
        }
        let r = Arc::new(UnitBallQCache::build(s, cells)?);
        refs.insert((s.to_bits(), cells), Arc::clone(&r));
        Ok(r)
    }

    /// `lambda1h(Omega) >= lambda1h(Omega#)` on the shared lattice.
    pub fn faber_krahn_report(&self, domain: &Domain1D, s: f64, cells: usize) -> Result<InequalityReport> {
        let sizes = levels(cells);
        let levels = sizes
            .iter()
            .map(|&m| {
                let op = operator(domain, s, m)?;
                let lambda = principal_eigenpair(&op)?.lambda1h;
                let ball = operator_with_spacing(&domain.schwarz_ball(), s, op.mass())?;
                let lambda_ball = principal_eigenpair(&ball)?.lambda1h;
                Ok(Level {
                    lhs: lambda,
                    rhs: lambda_ball,
                    margin: (lambda - lambda_ball) / lambda_ball,
                    diagnostics: BTreeMap::from([("h".to_string(), op.mass())]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(assemble_report("faber-krahn", domain, s, sizes, levels, self.tol(cells)))
    }

    /// `T(Omega) <= T(Omega#)` on the shared lattice.
    pub fn saint_venant_report(&self, domain: &Domain1D, s: f64, cells: usize) -> Result<InequalityReport> {
        let sizes = levels(cells);
        let levels = sizes
            .iter()
            .map(|&m| {
                let op = operator(domain, s, m)?;
                let t = generalized_torsion(&op, 0.0)?.q;
                let ball = operator_with_spacing(&domain.schwarz_ball(), s, op.mass())?;
                let t_ball = generalized_torsion(&ball, 0.0)?.q;
                Ok(Level {
                    lhs: t,
                    rhs: t_ball,
                    margin: (t_ball - t) / t_ball,
                    diagnostics: BTreeMap::from([("h".to_string(), op.mass())]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(assemble_report("saint-venant", domain, s, sizes, levels, self.tol(cells)))
    }

    /// `lambda1h(Omega) >= lambda1h(B_{R(alpha)})` along a shift grid.
    pub fn kohler_jobin_scan(&self, domain: &Domain1D, s: f64, alphas: &[Alpha], cells: usize) -> Result<KJScan> {
        let reference = self.reference(s, cells)?;
        let op = operator(domain, s, cells)?;
        let lambda = lambda1(&op)?;
        let r_sharp = domain.schwarz_radius();
        let resolved = resolve_shifts(alphas, lambda)?;
        let entries = par::map_ordered(&resolved, |&alpha| -> Result<KJEntry> {
            let q = generalized_torsion(&op, alpha)?.q;
            let radius = reference.find_radius(alpha, q, r_sharp)?;
            let lambda_ball = reference.lambda1h() * radius.powf(-2.0 * s);
            Ok(KJEntry {
                alpha,
                q,
                radius,
                lambda_ball,
                margin: (lambda - lambda_ball) / lambda_ball,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let mut by_alpha = entries.clone();
        by_alpha.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        let max_radius_increase = by_alpha
            .windows(2)
            .map(|w| w[1].radius - w[0].radius)
            .fold(0.0, f64::max);
        let tol = self.tol(cells);
        let worst = entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
        Ok(KJScan {
            domain: domain.to_string(),
            s,
            mesh_size: cells,
            lambda1h: lambda,
            r_sharp,
            limit_radius: (reference.lambda1h() / lambda).powf(1.0 / (2.0 * s)),
            radius_nonincreasing: max_radius_increase <= 1e-3 * r_sharp,
            radius_below_sharp: entries.iter().all(|e| e.radius <= r_sharp * (1.0 + tol)),
            max_radius_increase,
            entries,
            tol,
            verdict: verdict(&[worst], tol),
        })
    }

    /// Concentration of the generalized torsion function of `Omega` against
    /// that of the ball with the same `Q`.
    pub fn comparison_curve_check(&self, domain: &Domain1D, s: f64, alpha: Alpha, cells: usize) -> Result<InequalityReport> {
        let sizes = levels(cells);
        let levels = sizes
            .iter()
            .map(|&m| {
                let reference = self.reference(s, m)?;
                let op = operator(domain, s, m)?;
                let lambda = if alpha.needs_eigenvalue() { lambda1(&op)? } else { f64::NAN };
                let a = resolve_shifts(&[alpha], lambda)?[0];
                let w = generalized_torsion(&op, a)?;
                let radius = reference.find_radius(a, w.q, domain.schwarz_radius())?;
                let (ball_values, cell) = reference.ball_solution(a, radius)?;
                let pw = rearrange::profile(&w.w);
                let pb = RearrangementProfile::from_cells(&ball_values, cell);
                let ball_l1 = pb.lp_norm(1.0);
                let (sigma, lhs, rhs) = rearrange::worst_breakpoint(&pw, &pb);
                let diagnostics = BTreeMap::from([
                    ("alpha".to_string(), a),
                    ("radius".to_string(), radius),
                    ("sigma".to_string(), sigma),
                    ("l1_mismatch".to_string(), (w.q - ball_l1) / ball_l1),
                    ("sup".to_string(), pw.lp_norm(f64::INFINITY)),
                    ("sup_ball".to_string(), pb.lp_norm(f64::INFINITY)),
                ]);
                Ok(Level {
                    lhs,
                    rhs,
                    margin: (rhs - lhs) / ball_l1,
                    diagnostics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(assemble_report("comparison", domain, s, sizes, levels, self.tol(cells)))
    }

    /// Reverse Hölder inequality for every `q`, followed by the concentration
    /// comparison of `u_1` with the rescaled unit-interval eigenfunction.
    pub fn reverse_holder_report(&self, domain: &Domain1D, s: f64, qs: &[f64], cells: usize) -> Result<Vec<InequalityReport>> {
        if let Some(q) = qs.iter().find(|q| !(**q > 1.0)) {
            return Err(Error::InvalidInput(format!("reverse Hölder exponent must exceed 1, got {q}")));
        }
        let sizes = levels(cells);
        // per level: one Level per q, then the concentration level
        let per_level = sizes
            .iter()
            .map(|&m| {
                let reference = self.reference(s, m)?;
                let op = operator(domain, s, m)?;
                let eig = principal_eigenpair(&op)?;
                let lambda = eig.lambda1h;
                let u = eig.eigenfunction.values();
                let h = op.mass();
                let u_l1 = lp_norm_cells(u, h, 1.0);
                let z = reference.eigenpair().eigenfunction.values();
                let z_cell = reference.operator().mass();
                let z_l1 = lp_norm_cells(z, z_cell, 1.0);
                let lambda_unit = reference.lambda1h();
                let r1 = (lambda_unit / lambda).powf(1.0 / (2.0 * s));

                let mut out: Vec<Level> = qs
                    .iter()
                    .map(|&q| {
                        let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
                        let c = lambda_unit.powf((inv_q - 1.0) / (2.0 * s)) * lp_norm_cells(z, z_cell, q) / z_l1;
                        let rhs = c * lambda.powf((1.0 - inv_q) / (2.0 * s)) * u_l1;
                        let lhs = lp_norm_cells(u, h, q);
                        Level {
                            lhs,
                            rhs,
                            margin: (rhs - lhs) / rhs,
                            diagnostics: BTreeMap::from([
                                ("q".to_string(), q),
                                ("constant".to_string(), c),
                                ("lambda1h".to_string(), lambda),
                                ("r1".to_string(), r1),
                            ]),
                        }
                    })
                    .collect();

                let scale = u_l1 / (r1 * z_l1);
                let bar: Vec<f64> = z.iter().map(|v| scale * v).collect();
                let pu = rearrange::profile(&eig.eigenfunction);
                let pb = RearrangementProfile::from_cells(&bar, r1 * z_cell);
                let (sigma, lhs, rhs) = rearrange::worst_breakpoint(&pu, &pb);
                out.push(Level {
                    lhs,
                    rhs,
                    margin: (rhs - lhs) / u_l1,
                    diagnostics: BTreeMap::from([("sigma".to_string(), sigma), ("r1".to_string(), r1)]),
                });
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;

        let tol = self.tol(cells);
        let mut columns: Vec<Vec<Level>> = (0..=qs.len()).map(|_| Vec::new()).collect();
        for level in per_level {
            for (k, l) in level.into_iter().enumerate() {
                columns[k].push(l);
            }
        }
        Ok(columns
            .into_iter()
            .enumerate()
            .map(|(k, col)| {
                let name = match qs.get(k) {
                    Some(q) if q.is_infinite() => "reverse-holder-qinf".to_string(),
                    Some(q) => format!("reverse-holder-q{q}"),
                    None => "reverse-holder-concentration".to_string(),
                };
                assemble_report(&name, domain, s, sizes.clone(), col, tol)
            })
            .collect())
    }

    /// The eigenvalue bound obtained from the reverse Hölder inequality by
    /// Hölder's inequality, `lambda1(Omega#) (f(1)/f(q))^{2s q/(q-1)}`, against
    /// `lambda1h(Omega#)`.
    ///
    /// The ratio `(f(1)/f(q))^{2s q/(q-1)}` stays below one by the power mean
    /// inequality, and its limit as `q -> 1` is `exp(-2s c)` with
    /// `c = int z ln z / int z - ln int z > 0` (normalized measure). That
    /// limit is recorded as `limit_ratio`.
    pub fn fk_from_revholder_check(&self, domain: &Domain1D, s: f64, qs: &[f64], cells: usize) -> Result<InequalityReport> {
        if let Some(q) = qs.iter().find(|q| !(**q > 1.0 && **q <= 8.0)) {
            return Err(Error::InvalidInput(format!("exponents must lie in (1, 8], got {q}")));
        }
        if qs.is_empty() {
            return Err(Error::InvalidInput("empty exponent grid".into()));
        }
        let sizes = levels(cells);
        let levels = sizes
            .iter()
            .map(|&m| {
                let reference = self.reference(s, m)?;
                let op = operator(domain, s, m)?;
                let lambda = lambda1(&op)?;
                let lambda_sharp = reference.lambda1h() * domain.schwarz_radius().powf(-2.0 * s);
                let z = reference.eigenpair().eigenfunction.values();
                // mean over (0, 1) of z(rho)^r equals half the integral over (-1, 1)
                let cell = 0.5 * reference.operator().mass();
                let f = |r: f64| lp_norm_cells(z, cell, r);
                let mean = cell * z.iter().sum::<f64>();
                let entropy = cell * z.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
                let limit_ratio = (-2.0 * s * (entropy / mean - mean.ln())).exp();
                let mut diagnostics = BTreeMap::new();
                let mut best = 0.0f64;
                for &q in qs {
                    let ratio = (f(1.0) / f(q)).powf(2.0 * s * q / (q - 1.0));
                    diagnostics.insert(format!("ratio_q{q}"), ratio);
                    best = best.max(ratio);
                }
                let rhs_bound = lambda_sharp * best;
                diagnostics.insert("sup_ratio".to_string(), best);
                diagnostics.insert("limit_ratio".to_string(), limit_ratio);
                diagnostics.insert("lambda1h".to_string(), lambda);
                diagnostics.insert("bound_margin".to_string(), (lambda - rhs_bound) / lambda);
                Ok(Level {
                    lhs: rhs_bound,
                    rhs: lambda_sharp,
                    margin: (lambda_sharp - rhs_bound) / lambda_sharp,
                    diagnostics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(assemble_report("fk-from-reverse-holder", domain, s, sizes, levels, self.tol(cells)))
    }

    /// Pólya-Szegő on the torsion function: `E(v) >= E(v#)`, with the
    /// relative slack `h / |Omega|`.
    pub fn polya_szego_report(&self, domain: &Domain1D, s: f64, cells: usize) -> Result<InequalityReport> {
        let sizes = levels(cells);
        let levels = sizes
            .iter()
            .map(|&m| {
                let op = operator(domain, s, m)?;
                let v = generalized_torsion(&op, 0.0)?.w;
                let ball = FracOperator::assemble(rearrange::schwarz_mesh(op.mesh())?, s)?;
                let gap = rearrange::polya_szego_gap(&op, &ball, &v)?;
                Ok(Level {
                    lhs: gap.energy_rearranged,
                    rhs: gap.energy,
                    margin: gap.gap / gap.energy,
                    diagnostics: BTreeMap::from([
                        ("gap".to_string(), gap.gap),
                        ("eps_h".to_string(), gap.slack),
                    ]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // slack relative to the energy is h / |Omega| on the finest mesh
        let tol = 1.0 / *sizes.last().expect("two levels") as f64;
        Ok(assemble_report("polya-szego", domain, s, sizes, levels, tol))
    }
}

fn resolve_shifts(alphas: &[Alpha], lambda: f64) -> Result<Vec<f64>> {
    alphas
        .iter()
        .map(|a| {
            let v = a.resolve(lambda);
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("shift {a:?} is not finite")));
            }
            if v > 0.0 && v > SHIFT_CAP * lambda {
                return Err(Error::AboveSpectrum { alpha: v, lambda1: lambda });
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rule() {
        assert_eq!(verdict(&[0.1, 0.2], 0.02), Verdict::Holds);
        assert_eq!(verdict(&[-0.05, -0.01], 0.02), Verdict::HoldsWithinTol);
        assert_eq!(verdict(&[-0.05, -0.03], 0.02), Verdict::HoldsWithinTol);
        assert_eq!(verdict(&[-0.03, -0.05], 0.02), Verdict::Violated);
        assert_eq!(verdict(&[-0.05], 0.02), Verdict::Violated);
    }

    #[test]
    fn ball_reports_are_tight() {
        let h = Harness::new();
        let d = Domain1D::ball(1.0).unwrap();
        let fk = h.faber_krahn_report(&d, 0.5, 64).unwrap();
        assert_eq!(fk.margin, 0.0);
        let sv = h.saint_venant_report(&d, 0.5, 64).unwrap();
        assert_eq!(sv.margin, 0.0);
        let two: Domain1D = "(-1,-0.2),(0.2,1)".parse().unwrap();
        let fk = h.faber_krahn_report(&two, 0.5, 64).unwrap();
        assert!(fk.margin > 0.0 && fk.verdict == Verdict::Holds);
        let sv = h.saint_venant_report(&two, 0.5, 64).unwrap();
        assert!(sv.margin > 0.0 && sv.verdict == Verdict::Holds);
    }

    #[test]
    fn shift_cap() {
        assert!(resolve_shifts(&[Alpha::Relative(0.96)], 2.0).is_err());
        assert_eq!(resolve_shifts(&[Alpha::Relative(0.5), Alpha::Absolute(-3.0)], 2.0).unwrap(), vec![1.0, -3.0]);
    }
}
