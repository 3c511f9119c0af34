//! Closed-form special functions valid in every dimension `N >= 1`.
//!
//! The Gamma function is evaluated with a Lanczos rational approximation
//! (Pugh's `g = 10.900511` coefficient set) and the reflection formula on
//! `(0, 1/2)`. Everything else in this module is a product of Gamma values.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 10.900511;

#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 11] = [
    2.485_740_891_387_535_655_46e-5,
    1.051_423_785_817_219_742_10,
    -3.456_870_972_220_162_354_69,
    4.512_277_094_668_948_237_00,
    -2.982_852_253_235_766_557_21,
    1.056_397_115_771_267_130_77,
    -1.954_287_731_916_458_695_83e-1,
    1.709_705_434_044_412_243_07e-2,
    -5.719_261_174_043_057_812_83e-4,
    4.633_994_733_599_056_367_08e-6,
    -2.719_949_084_886_077_039_10e-9,
];

// 2 * sqrt(e / pi)
const TWO_SQRT_E_OVER_PI: f64 = 1.860_382_734_205_265_717_336_249_247_266_663_112_059_421_841_408_575_5;

/// Fractional order `s` together with the space dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FracOrder {
    dim: u32,
    s: f64,
}

impl FracOrder {
    pub fn new(dim: u32, s: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidOrder(s));
        }
        Ok(Self { dim, s })
    }

    /// The local limit `s = 1`, only meaningful for the closed forms below.
    pub fn classical(dim: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self { dim, s: 1.0 })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    fn n(&self) -> f64 {
        f64::from(self.dim)
    }
}

/// Gamma function for positive real arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires x > 0, got {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn lanczos_sum(x: f64) -> f64 {
    LANCZOS_COEFFS
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_COEFFS[0], |acc, (i, &c)| acc + c / (x + i as f64 - 1.0))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=30.0).contains(&x) {
        return (2..x as u32).map(f64::from).product();
    }
    if x < 0.5 {
        // Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else if x > 150.0 {
        ln_gamma_large(x).exp()
    } else {
        lanczos_sum(x) * TWO_SQRT_E_OVER_PI * ((x - 0.5 + LANCZOS_G) / std::f64::consts::E).powf(x - 0.5)
    }
}

fn ln_gamma_large(x: f64) -> f64 {
    lanczos_sum(x).ln()
        + TWO_SQRT_E_OVER_PI.ln()
        + (x - 0.5) * ((x - 0.5 + LANCZOS_G).ln() - 1.0)
}

/// Volume of the unit ball in `R^N`.
pub fn unit_ball_volume(dim: u32) -> f64 {
    let n = f64::from(dim);
    PI.powf(n / 2.0) / gamma_unchecked(n / 2.0 + 1.0)
}

/// Normalization constant of the fractional Laplacian,
/// `4^s s Gamma((N+2s)/2) / (pi^{N/2} Gamma(1-s))`.
///
/// Returns `0` in the local limit `s = 1`, where `1/Gamma(1-s)` vanishes.
pub fn normalization_gamma(order: FracOrder) -> f64 {
    let (n, s) = (order.n(), order.s());
    if s >= 1.0 {
        return 0.0;
    }
    4f64.powf(s) * s * gamma_unchecked((n + 2.0 * s) / 2.0) / (PI.powf(n / 2.0) * gamma_unchecked(1.0 - s))
}

/// Amplitude `c(N,s)` of the unit-ball torsion function `c (1 - |x|^2)_+^s`.
pub fn ball_torsion_coefficient(order: FracOrder) -> f64 {
    let (n, s) = (order.n(), order.s());
    gamma_unchecked(n / 2.0) / (4f64.powf(s) * gamma_unchecked(1.0 + s) * gamma_unchecked((n + 2.0 * s) / 2.0))
}

/// Unit-ball torsion function evaluated at radius `r`.
pub fn ball_torsion_profile(order: FracOrder, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    if r >= 1.0 {
        return Ok(0.0);
    }
    Ok(ball_torsion_coefficient(order) * (1.0 - r * r).powf(order.s()))
}

/// Torsional rigidity of the unit ball, `int_{B_1} c (1 - |x|^2)^s dx`, in closed form.
pub fn unit_ball_torsional_rigidity_exact(order: FracOrder) -> f64 {
    let (n, s) = (order.n(), order.s());
    let half = (n + 2.0 * s) / 2.0;
    PI.powf(n / 2.0) * gamma_unchecked(n / 2.0)
        / (4f64.powf(s) * gamma_unchecked(half) * gamma_unchecked(half + 1.0))
}

/// Bound on the unit-ball torsion amplitude: `1/min_{[1,3]} Gamma` for `N = 1`, `1` otherwise.
pub fn ball_torsion_bound(dim: u32) -> f64 {
    if dim == 1 {
        1.0 / GAMMA_MIN_ON_1_3
    } else {
        1.0
    }
}

/// `min_{x in [1,3]} Gamma(x)`, attained at `x ~ 1.461632`.
pub const GAMMA_MIN_ON_1_3: f64 = 0.885_603_194_410_888_7;
