//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use fraciso::domain::{Domain1D, GridFunction, Mesh1D};
use fraciso::fracop::FracOperator;

/// Double-exponential quadrature of `f` over `(a, b)`; tolerates algebraic
/// endpoint singularities.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mut prev = f64::NAN;
    for level in 3..12 {
        let step = 0.5f64.powi(level);
        let kmax = (4.5 / step) as i64;
        let mut acc = 0.0;
        for k in -kmax..=kmax {
            let t = k as f64 * step;
            let u = 0.5 * PI * t.sinh();
            let weight = 0.5 * PI * t.cosh() / u.cosh().powi(2);
            // distance from the nearer endpoint, kept accurate near +-1
            let gap = (-u.abs()).exp() / u.cosh();
            let x = if u >= 0.0 { b - half * gap } else { a + half * gap };
            if x <= a || x >= b {
                continue;
            }
            acc += weight * f(x);
        }
        let value = half * step * acc;
        if (value - prev).abs() <= 1e-15 * value.abs().max(1e-300) {
            return value;
        }
        prev = value;
    }
    prev
}

/// Gamma by upward recurrence into the Stirling series, reflection below 1/2.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let mut shift = 1.0;
    let mut y = x;
    while y < 10.0 {
        shift *= y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k (2k - 1) y^{2k-1}), highest first
    let coeffs = [
        -3617.0 / 122_400.0,
        1.0 / 156.0,
        -691.0 / 360_360.0,
        1.0 / 1188.0,
        -1.0 / 1680.0,
        1.0 / 1260.0,
        -1.0 / 360.0,
        1.0 / 12.0,
    ];
    let series = inv * coeffs.iter().fold(0.0, |acc, c| acc * inv2 + c);
    let ln = (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + series;
    ln.exp() / shift
}

/// `4^s s Gamma(N/2 + s) / (pi^{N/2} Gamma(1 - s))`.
pub fn normalization(n: u32, s: f64) -> f64 {
    let n = f64::from(n);
    4f64.powf(s) * s * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(1.0 - s))
}

/// Unit-ball torsion amplitude.
pub fn torsion_amplitude(n: u32, s: f64) -> f64 {
    let n = f64::from(n);
    gamma(n / 2.0) / (4f64.powf(s) * gamma(1.0 + s) * gamma(n / 2.0 + s))
}

/// `int_{B_1} c (1 - |x|^2)^s dx` by radial quadrature.
pub fn unit_ball_rigidity(n: u32, s: f64) -> f64 {
    let sphere = 2.0 * PI.powf(f64::from(n) / 2.0) / gamma(f64::from(n) / 2.0);
    let c = torsion_amplitude(n, s);
    sphere * tanh_sinh(|r| c * (1.0 - r * r).powf(s) * r.powi(n as i32 - 1), 0.0, 1.0)
}

/// Stiffness between P1 hats on the unit lattice at offset `k`, from the
/// Fourier symbol `|xi|^{2s}` and `|hat phi|^2 = sinc^4(xi/2)`.
///
/// The integral splits into `int xi^{2s-4} cos(m xi)` terms whose
/// analytically continued values are `Gamma(mu) cos(pi mu / 2) m^{-mu}`,
/// `mu = 2s - 3`; at `s = 1/2` the limit brings in `m^2 ln m`.
pub fn hat_weight_fourier(s: f64, k: usize) -> f64 {
    let k = k as f64;
    let terms = [(k, 6.0), (k + 1.0, -4.0), (k - 1.0, -4.0), (k + 2.0, 1.0), (k - 2.0, 1.0)];
    if (s - 0.5).abs() < 1e-12 {
        let sum: f64 = terms
            .iter()
            .map(|&(m, c)| {
                let m = m.abs();
                if m == 0.0 {
                    0.0
                } else {
                    c * m * m * m.ln()
                }
            })
            .sum();
        return sum / (2.0 * PI);
    }
    let mu = 2.0 * s - 3.0;
    let p = -mu;
    let sum: f64 = terms.iter().map(|&(m, c)| c * m.abs().powf(p)).sum();
    gamma(mu) * (0.5 * PI * mu).cos() * sum / PI
}

/// Dense stiffness matrix from the Fourier weights, lattice-indexed.
pub fn dense_fourier(mesh: &Mesh1D, s: f64) -> Vec<Vec<f64>> {
    let h = mesh.h();
    let nodes = mesh.nodes();
    nodes
        .iter()
        .map(|&i| nodes.iter().map(|&j| h.powf(1.0 - 2.0 * s) * hat_weight_fourier(s, (i - j).unsigned_abs() as usize)).collect())
        .collect()
}

pub fn operator(literal: &str, cells: usize, s: f64) -> FracOperator {
    let d: Domain1D = literal.parse().expect("domain literal");
    FracOperator::assemble(Arc::new(Mesh1D::build(&d, cells).expect("mesh")), s).expect("operator")
}

pub fn grid(op: &FracOperator, values: Vec<f64>) -> GridFunction {
    GridFunction::new(Arc::clone(op.mesh()), values).expect("grid")
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
