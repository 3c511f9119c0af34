//! One-dimensional domains, their uniform lattice meshes and grid functions.
//!
//! Every mesh lives on the global lattice `{ i h : i in Z }` anchored at the
//! origin. Two meshes built with the same spacing therefore share nodes, and
//! the active node set of a subdomain is a subset of the active node set of
//! any domain containing it.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// A finite union of disjoint open intervals, sorted by left endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain1D {
    intervals: Vec<(f64, f64)>,
}

impl Domain1D {
    /// Builds a normalized domain: intervals are sorted and overlapping or
    /// touching intervals are merged.
    pub fn new(intervals: &[(f64, f64)]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidDomain("empty interval list".into()));
        }
        for &(a, b) in intervals {
            if !(a.is_finite() && b.is_finite()) || a >= b {
                return Err(Error::InvalidDomain(format!("interval ({a}, {b}) is empty or not finite")));
            }
        }
        let mut sorted = intervals.to_vec();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (a, b) in sorted {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    /// The centered interval `(-r, r)`.
    pub fn ball(r: f64) -> Result<Self> {
        Self::new(&[(-r, r)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn num_components(&self) -> usize {
        self.intervals.len()
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Radius of the centered interval with the same measure.
    pub fn schwarz_radius(&self) -> f64 {
        self.measure() / 2.0
    }

    /// The centered interval `(-R, R)` with `2R = |domain|`.
    pub fn schwarz_ball(&self) -> Self {
        let r = self.schwarz_radius();
        Self { intervals: vec![(-r, r)] }
    }

    pub fn is_ball(&self) -> bool {
        self.intervals.len() == 1 && self.intervals[0].0 == -self.intervals[0].1
    }

    /// Dilation `t * domain`.
    pub fn scale(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("dilation factor must be positive, got {t}")));
        }
        Ok(Self {
            intervals: self.intervals.iter().map(|&(a, b)| (t * a, t * b)).collect(),
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x < b)
    }
}

impl fmt::Display for Domain1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (a, b)) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "({a},{b})")?;
        }
        Ok(())
    }
}

impl FromStr for Domain1D {
    type Err = Error;

    /// Parses literals such as `"(-1,-0.2),(0.2,1)"`.
    fn from_str(literal: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidDomain(format!("{msg} in domain literal {literal:?}"));
        let mut intervals = Vec::new();
        let mut rest = literal.trim();
        while !rest.is_empty() {
            rest = rest.strip_prefix('(').ok_or_else(|| bad("expected '('"))?;
            let close = rest.find(')').ok_or_else(|| bad("missing ')'"))?;
            let (pair, tail) = rest.split_at(close);
            let (a, b) = pair.split_once(',').ok_or_else(|| bad("expected 'a,b'"))?;
            let a: f64 = a.trim().parse().map_err(|_| bad("bad number"))?;
            let b: f64 = b.trim().parse().map_err(|_| bad("bad number"))?;
            intervals.push((a, b));
            rest = tail[1..].trim_start();
            if let Some(t) = rest.strip_prefix(',') {
                rest = t.trim_start();
                if rest.is_empty() {
                    return Err(bad("trailing ','"));
                }
            } else if !rest.is_empty() {
                return Err(bad("expected ','"));
            }
        }
        Self::new(&intervals)
    }
}

/// Minimum number of lattice cells across the measure of a domain.
pub const MIN_CELLS: usize = 8;

// Endpoints closer than this (in lattice units) to a lattice point are snapped to it.
const SNAP: f64 = 1e-9;

/// Active lattice nodes `i h` lying strictly inside a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    h: f64,
    nodes: Vec<i64>,
    runs: Vec<Range<usize>>,
    domain: Domain1D,
}

impl Mesh1D {
    /// Uniform mesh with spacing `h = |domain| / cells`.
    pub fn build(domain: &Domain1D, cells: usize) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::UnderResolved(format!("need at least {MIN_CELLS} cells, got {cells}")));
        }
        Self::with_spacing(domain, domain.measure() / cells as f64)
    }

    /// Mesh on the global lattice of spacing `h`.
    pub fn with_spacing(domain: &Domain1D, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("lattice spacing must be positive, got {h}")));
        }
        let mut nodes = Vec::new();
        let mut runs = Vec::with_capacity(domain.num_components());
        for &(a, b) in domain.intervals() {
            if b - a < 2.0 * h {
                return Err(Error::UnderResolved(format!(
                    "component ({a}, {b}) is thinner than two lattice cells (h = {h:.3e})"
                )));
            }
            let first = lattice_floor(a / h) + 1;
            let last = lattice_ceil(b / h) - 1;
            let start = nodes.len();
            nodes.extend(first..=last);
            runs.push(start..nodes.len());
        }
        let widest = runs.iter().map(|r| r.len()).max().unwrap_or(0);
        if widest < MIN_CELLS - 1 {
            return Err(Error::UnderResolved(format!(
                "largest component holds only {widest} nodes; refine the mesh"
            )));
        }
        Ok(Self {
            h,
            nodes,
            runs,
            domain: domain.clone(),
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global lattice indices of the active nodes, increasing.
    pub fn nodes(&self) -> &[i64] {
        &self.nodes
    }

    /// Index ranges (into [`Mesh1D::nodes`]) of the nodes of each component.
    pub fn runs(&self) -> &[Range<usize>] {
        &self.runs
    }

    pub fn domain(&self) -> &Domain1D {
        &self.domain
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        self.nodes[k] as f64 * self.h
    }

    pub fn coordinates(&self) -> Vec<f64> {
        self.nodes.iter().map(|&i| i as f64 * self.h).collect()
    }

    /// Same spacing and node set; the two meshes carry the same grid functions.
    pub fn same_lattice_nodes(&self, other: &Self) -> bool {
        self.h.to_bits() == other.h.to_bits() && self.nodes == other.nodes
    }

    /// Whether every active node of `self` is also active in `other` (same spacing).
    pub fn is_submesh_of(&self, other: &Self) -> bool {
        self.h.to_bits() == other.h.to_bits() && self.nodes.iter().all(|i| other.nodes.binary_search(i).is_ok())
    }
}

fn lattice_floor(x: f64) -> i64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r as i64
    } else {
        x.floor() as i64
    }
}

fn lattice_ceil(x: f64) -> i64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r as i64
    } else {
        x.ceil() as i64
    }
}

/// Nodal values on a mesh, extended by zero outside the active nodes.
#[derive(Debug, Clone)]
pub struct GridFunction {
    mesh: Arc<Mesh1D>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh1D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} nodal values, got {}",
                mesh.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid function values must be finite".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh1D>) -> Self {
        let n = mesh.len();
        Self { mesh, values: vec![0.0; n] }
    }

    /// Samples `f` at the active nodes.
    pub fn from_fn(mesh: Arc<Mesh1D>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = mesh.coordinates().into_iter().map(f).collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_mesh(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.same_lattice_nodes(&other.mesh)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Lumped-mass integral `sum_i h u_i`.
    pub fn integral(&self) -> f64 {
        self.mesh.h() * self.values.iter().sum::<f64>()
    }

    /// Lumped `L^q` norm treating nodal values as cell averages; `q = inf` gives the max.
    pub fn lp_norm(&self, q: f64) -> f64 {
        lp_norm_cells(&self.values, self.mesh.h(), q)
    }
}

pub(crate) fn lp_norm_cells(values: &[f64], cell: f64, q: f64) -> f64 {
    if q.is_infinite() {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        (cell * values.iter().map(|v| v.abs().powf(q)).sum::<f64>()).powf(1.0 / q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_sorts_and_merges() {
        let d = Domain1D::new(&[(0.2, 1.0), (-1.0, -0.2)]).unwrap();
        assert_eq!(d.intervals(), &[(-1.0, -0.2), (0.2, 1.0)]);
        assert!((d.measure() - 1.6).abs() < 1e-15);

        let d = Domain1D::new(&[(0.0, 1.0), (0.5, 2.0)]).unwrap();
        assert_eq!(d.intervals(), &[(0.0, 2.0)]);
        let d = Domain1D::new(&[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(d.intervals(), &[(0.0, 2.0)]);
    }

    #[test]
    fn construction_errors() {
        assert!(Domain1D::new(&[]).is_err());
        assert!(Domain1D::new(&[(1.0, 1.0)]).is_err());
        assert!(Domain1D::new(&[(2.0, 1.0)]).is_err());
        assert!(Domain1D::new(&[(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn schwarz_and_scale() {
        let d: Domain1D = "(-1,-0.2),(0.2,1)".parse().unwrap();
        let b = d.schwarz_ball();
        assert!((b.intervals()[0].1 - 0.8).abs() < 1e-15);
        assert_eq!(b.schwarz_ball(), b);
        let d = Domain1D::new(&[(0.0, 3.0)]).unwrap();
        assert_eq!(d.schwarz_ball().intervals(), &[(-1.5, 1.5)]);
        let d = Domain1D::new(&[(1.0, 2.0)]).unwrap();
        assert_eq!(d.scale(0.5).unwrap().intervals(), &[(0.5, 1.0)]);
        assert!(d.scale(0.0).is_err());
        assert!(d.scale(-1.0).is_err());
    }

    #[test]
    fn literal_round_trip() {
        let d: Domain1D = " (-1.5,-0.5), (0.25, 1.25)".parse().unwrap();
        assert_eq!(d.to_string(), "(-1.5,-0.5),(0.25,1.25)");
        assert_eq!(d.to_string().parse::<Domain1D>().unwrap(), d);
        for bad in ["", "(1,0)", "(0,1),", "(0,1)(2,3)", "(a,1)", "0,1"] {
            assert!(bad.parse::<Domain1D>().is_err(), "{bad}");
        }
    }

    #[test]
    fn mesh_counts() {
        let m = Mesh1D::build(&Domain1D::ball(1.0).unwrap(), 8).unwrap();
        assert_eq!(m.len(), 7);
        assert_eq!(m.h(), 0.25);
        assert_eq!(m.nodes(), &[-3, -2, -1, 0, 1, 2, 3]);

        let d: Domain1D = "(-1,-0.2),(0.2,1)".parse().unwrap();
        let m = Mesh1D::build(&d, 16).unwrap();
        assert_eq!(m.runs().len(), 2);
        assert!((m.h() - 0.1).abs() < 1e-15);
        assert_eq!(m.nodes(), &[-9, -8, -7, -6, -5, -4, -3, 3, 4, 5, 6, 7, 8, 9]);
        assert!((m.len() as i64 - 16).abs() <= 2);
    }

    #[test]
    fn mesh_guards() {
        assert!(Mesh1D::build(&Domain1D::ball(1.0).unwrap(), 7).is_err());
        let d = Domain1D::new(&[(0.0, 1e-3), (1.0, 10.0)]).unwrap();
        assert!(matches!(Mesh1D::build(&d, 16), Err(Error::UnderResolved(_))));
    }

    #[test]
    fn submesh_inclusion() {
        let big: Domain1D = "(-1,1)".parse().unwrap();
        let small: Domain1D = "(-0.9,-0.3),(0.1,0.7)".parse().unwrap();
        let mb = Mesh1D::build(&big, 64).unwrap();
        let ms = Mesh1D::with_spacing(&small, mb.h()).unwrap();
        assert!(ms.is_submesh_of(&mb));
        assert!(!mb.is_submesh_of(&ms));
    }
}
