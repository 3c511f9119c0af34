//! Rearrangements of step functions.
//!
//! Grid values are read as piecewise constant on cells of equal measure.
//! A [`RearrangementProfile`] stores the decreasing rearrangement `f*` as
//! `(value, measure)` steps with strictly decreasing values, so ties merge
//! into one flat step. Schwarz rearrangements place the sorted values on a
//! symmetric lattice interval, largest at the origin.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::domain::{lp_norm_cells, Domain1D, GridFunction, Mesh1D};
use crate::error::{Error, Result};
use crate::fracop::FracOperator;

/// Decreasing rearrangement as `(value, measure)` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RearrangementProfile {
    steps: Vec<(f64, f64)>,
    total: f64,
}

impl RearrangementProfile {
    /// Profile of `|values|` on cells of measure `cell`.
    pub fn from_cells(values: &[f64], cell: f64) -> Self {
        let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut steps: Vec<(f64, f64)> = Vec::new();
        let mut run = 0usize;
        for (k, &v) in sorted.iter().enumerate() {
            run += 1;
            if k + 1 == sorted.len() || sorted[k + 1] != v {
                steps.push((v, run as f64 * cell));
                run = 0;
            }
        }
        Self {
            steps,
            total: cell * values.len() as f64,
        }
    }

    /// Builds a profile from explicit steps, merging equal values.
    pub fn from_steps(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut sorted = pairs.to_vec();
        if sorted.iter().any(|&(v, m)| !(v >= 0.0) || !v.is_finite() || !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput("profile steps need finite values >= 0 and measures > 0".into()));
        }
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut steps: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (v, m) in sorted {
            match steps.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => steps.push((v, m)),
            }
        }
        let total = steps.iter().map(|s| s.1).sum();
        Ok(Self { steps, total })
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn total_measure(&self) -> f64 {
        self.total
    }

    /// `f*(sigma)`, right-continuous, zero beyond the total measure.
    pub fn decreasing(&self, sigma: f64) -> f64 {
        if sigma < 0.0 {
            return self.steps.first().map_or(0.0, |s| s.0);
        }
        let mut acc = 0.0;
        for &(v, m) in &self.steps {
            acc += m;
            if sigma < acc {
                return v;
            }
        }
        0.0
    }

    /// `f_*(sigma) = f*(|Omega| - sigma)`.
    pub fn increasing(&self, sigma: f64) -> f64 {
        self.decreasing(self.total - sigma)
    }

    /// `mu(t) = |{|f| > t}|`.
    pub fn distribution(&self, t: f64) -> f64 {
        self.steps.iter().filter(|s| s.0 > t).map(|s| s.1).sum()
    }

    pub fn lp_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            self.steps.first().map_or(0.0, |s| s.0)
        } else {
            self.steps.iter().map(|&(v, m)| m * v.powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }

    pub fn concentration_curve(&self) -> ConcentrationCurve {
        let mut points = Vec::with_capacity(self.steps.len() + 1);
        points.push((0.0, 0.0));
        let (mut sigma, mut mass) = (0.0, 0.0);
        for &(v, m) in &self.steps {
            sigma += m;
            mass += v * m;
            points.push((sigma, mass));
        }
        ConcentrationCurve { points }
    }

    /// Writes `value,measure` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "value,measure")?;
        for &(v, m) in &self.steps {
            writeln!(out, "{v:.16e},{m:.16e}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`RearrangementProfile::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(header)) if header.trim() == "value,measure" => {}
            _ => return Err(Error::InvalidInput("profile CSV must start with 'value,measure'".into())),
        }
        let mut pairs = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::InvalidInput(format!("profile CSV line {}: {line:?}", k + 2));
            let (v, m) = line.split_once(',').ok_or_else(bad)?;
            pairs.push((v.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?));
        }
        Self::from_steps(&pairs)
    }
}

/// Decreasing rearrangement of a grid function.
pub fn profile(f: &GridFunction) -> RearrangementProfile {
    RearrangementProfile::from_cells(f.values(), f.mesh().h())
}

/// `sigma -> int_0^sigma f*`, piecewise linear, constant past the last point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationCurve {
    points: Vec<(f64, f64)>,
}

impl ConcentrationCurve {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= sigma);
        if k == 0 {
            return 0.0;
        }
        if k == self.points.len() {
            return self.points[k - 1].1;
        }
        let (a, b) = (self.points[k - 1], self.points[k]);
        a.1 + (b.1 - a.1) * (sigma - a.0) / (b.0 - a.0)
    }

    /// Final value, the `L^1` norm.
    pub fn total(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Concentration {
    Equal,
    /// The first argument is less concentrated than the second.
    LessConcentrated,
    MoreConcentrated,
    Incomparable,
}

/// Breakpoint where `G - F` is smallest, over the breakpoints of both
/// curves: `(sigma, F(sigma), G(sigma))`.
pub fn worst_breakpoint(f: &RearrangementProfile, g: &RearrangementProfile) -> (f64, f64, f64) {
    let (cf, cg) = (f.concentration_curve(), g.concentration_curve());
    let mut worst = (0.0, 0.0, 0.0);
    for sigma in cf.breakpoints().chain(cg.breakpoints()) {
        let (a, b) = (cf.eval(sigma), cg.eval(sigma));
        if b - a < worst.2 - worst.1 {
            worst = (sigma, a, b);
        }
    }
    worst
}

/// `min_sigma (G(sigma) - F(sigma))` over all breakpoints of both curves;
/// nonnegative exactly when `f` is less concentrated than `g`.
pub fn concentration_margin(f: &RearrangementProfile, g: &RearrangementProfile) -> f64 {
    let (_, a, b) = worst_breakpoint(f, g);
    b - a
}

/// Order between two profiles; curve differences within `slack` count as equal.
pub fn compare_profiles(f: &RearrangementProfile, g: &RearrangementProfile, slack: f64) -> Concentration {
    if slack == 0.0 && f.steps == g.steps {
        return Concentration::Equal;
    }
    let f_below = concentration_margin(f, g) >= -slack;
    let g_below = concentration_margin(g, f) >= -slack;
    match (f_below, g_below) {
        (true, true) => Concentration::Equal,
        (true, false) => Concentration::LessConcentrated,
        (false, true) => Concentration::MoreConcentrated,
        (false, false) => Concentration::Incomparable,
    }
}

fn check_nonnegative(f: &GridFunction) -> Result<()> {
    if f.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("concentration order needs nonnegative functions".into()));
    }
    Ok(())
}

/// Exact comparison of the concentration curves of `f` and `g`.
pub fn concentration_compare(f: &GridFunction, g: &GridFunction) -> Result<Concentration> {
    check_nonnegative(f)?;
    check_nonnegative(g)?;
    Ok(compare_profiles(&profile(f), &profile(g), 0.0))
}

/// `int f* g* - int |f g|`.
pub fn hardy_littlewood_gap(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if !f.same_mesh(g) {
        return Err(Error::MeshMismatch);
    }
    let h = f.mesh().h();
    let sorted = |v: &[f64]| {
        let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        a
    };
    let (fs, gs) = (sorted(f.values()), sorted(g.values()));
    let rearranged: f64 = fs.iter().zip(&gs).map(|(a, b)| a * b).sum();
    let direct: f64 = f.values().iter().zip(g.values()).map(|(a, b)| (a * b).abs()).sum();
    Ok(h * (rearranged - direct))
}

/// `|values|` sorted decreasingly: the cell values of `f*`.
pub fn decreasing_values(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `|values|` sorted increasingly: the cell values of `f_*`.
pub fn increasing_values(values: &[f64]) -> Vec<f64> {
    let mut v = decreasing_values(values);
    v.reverse();
    v
}

/// Smallest centred lattice interval, on the spacing of `mesh`, with at least
/// as many active nodes as `mesh`.
pub fn schwarz_mesh(mesh: &Mesh1D) -> Result<Arc<Mesh1D>> {
    let k = mesh.len().saturating_sub(1).div_ceil(2) as f64;
    let r = (k + 1.0) * mesh.h();
    Ok(Arc::new(Mesh1D::with_spacing(&Domain1D::ball(r)?, mesh.h())?))
}

// Target slots ordered by distance from the origin: 0, +1, -1, +2, -2, ...
fn radial_order(target: &Mesh1D) -> Result<Vec<usize>> {
    let nodes = target.nodes();
    let n = nodes.len();
    let centred = n % 2 == 1 && nodes[0] == -nodes[n - 1] && target.runs().len() == 1;
    if !centred {
        return Err(Error::InvalidInput("Schwarz target must be a centred lattice interval".into()));
    }
    let mid = n / 2;
    let mut order = Vec::with_capacity(n);
    order.push(mid);
    for k in 1..=mid {
        order.push(mid + k);
        order.push(mid - k);
    }
    Ok(order)
}

fn check_target(f: &GridFunction, target: &Mesh1D) -> Result<()> {
    if f.mesh().h().to_bits() != target.h().to_bits() {
        return Err(Error::MeshMismatch);
    }
    let (nf, nt) = (f.mesh().len(), target.len());
    if nt < nf || nt - nf > 2 {
        return Err(Error::InvalidInput(format!(
            "Schwarz target has {nt} cells for {nf} values; measures differ by more than one cell"
        )));
    }
    Ok(())
}

/// Schwarz decreasing rearrangement `f#` on a centred lattice interval.
///
/// Sorted values fill the slots `0, +1, -1, +2, ...`; surplus slots hold zero.
pub fn schwarz(f: &GridFunction, target: &Arc<Mesh1D>) -> Result<GridFunction> {
    check_target(f, target)?;
    let order = radial_order(target)?;
    let mut out = vec![0.0; target.len()];
    for (slot, v) in order.iter().zip(decreasing_values(f.values())) {
        out[*slot] = v;
    }
    GridFunction::new(Arc::clone(target), out)
}

/// Schwarz increasing rearrangement `f_#`: smallest values at the origin.
pub fn schwarz_increasing(f: &GridFunction, target: &Arc<Mesh1D>) -> Result<GridFunction> {
    check_target(f, target)?;
    let order = radial_order(target)?;
    let mut values = increasing_values(f.values());
    let pad = target.len() - values.len();
    values.splice(0..0, std::iter::repeat_n(0.0, pad));
    let mut out = vec![0.0; target.len()];
    for (slot, v) in order.iter().zip(values) {
        out[*slot] = v;
    }
    GridFunction::new(Arc::clone(target), out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolyaSzegoGap {
    /// `E_Omega(u) - E_{Omega#}(u#)`
    pub gap: f64,
    /// Discretization slack `(h / |Omega|) E_Omega(u)`.
    pub slack: f64,
    pub energy: f64,
    pub energy_rearranged: f64,
}

/// Energy decrease under Schwarz rearrangement.
pub fn polya_szego_gap(op: &FracOperator, op_ball: &FracOperator, u: &GridFunction) -> Result<PolyaSzegoGap> {
    if op.s() != op_ball.s() {
        return Err(Error::InvalidInput("operators have different orders".into()));
    }
    let energy = op.energy(u)?;
    let rearranged = schwarz(u, op_ball.mesh())?;
    let energy_rearranged = op_ball.energy(&rearranged)?;
    let measure = op.mesh().domain().measure();
    Ok(PolyaSzegoGap {
        gap: energy - energy_rearranged,
        slack: op.mass() / measure * energy,
        energy,
        energy_rearranged,
    })
}

/// `L^p` norm of cell values; `q = inf` gives the max.
pub fn cell_norm(values: &[f64], cell: f64, q: f64) -> f64 {
    lp_norm_cells(values, cell, q)
}
