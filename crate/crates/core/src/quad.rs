//! Adaptive Gauss–Kronrod quadrature on finite panels and the half line.
//!
//! Everything downstream integrates products of a one-sided wavelet window
//! with a spectral density that may carry an integrable `|λ|^{β-1}` singularity
//! at the origin. [`half_line`] therefore walks dyadic panels `[2^k, 2^{k+1}]`
//! in both directions from 1, so the singular end is resolved geometrically and
//! any dilation `2^j` of the window lands on a handful of panels.

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One GK15 application on `[a, b]`; returns (kronrod estimate, |kronrod − gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[i] * s;
        if i % 2 == 1 {
            rg += WG[i / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-15,
            rel: 1e-11,
            max_depth: 40,
        }
    }
}

/// Adaptive bisection on `[a, b]`. Returns (value, error estimate).
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> (f64, f64) {
    let (whole, err) = gk15(f, a, b);
    refine(f, a, b, whole, err, tol, 0)
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    err: f64,
    tol: Tolerance,
    depth: u32,
) -> (f64, f64) {
    if err <= tol.abs.max(tol.rel * whole.abs()) || depth >= tol.max_depth || b - a < 1e-300 {
        return (whole, err);
    }
    let m = 0.5 * (a + b);
    let (l, le) = gk15(f, a, m);
    let (r, re) = gk15(f, m, b);
    let child = Tolerance {
        abs: 0.5 * tol.abs.max(tol.rel * whole.abs()),
        rel: 0.0,
        max_depth: tol.max_depth,
    };
    let (lv, lerr) = refine(f, a, m, l, le, child, depth + 1);
    let (rv, rerr) = refine(f, m, b, r, re, child, depth + 1);
    (lv + rv, lerr + rerr)
}

/// Dyadic exponent range scanned below 1 by [`half_line`].
const LOW_EXPONENT: i32 = -160;
/// The upper cutoff for improper integrals.
pub const LAMBDA_CAP: f64 = 1e6;

/// Integrates a nonnegative-ish function over `[0, ∞)`.
///
/// Panels `[2^k, 2^{k+1}]` are integrated adaptively for `k` from
/// `LOW_EXPONENT` upward. Above the accumulated bulk, the walk stops once a
/// panel adds less than `1e-10` of the running total, and never goes past
/// [`LAMBDA_CAP`]. The piece `[0, 2^LOW_EXPONENT]` is dropped.
pub fn half_line<F: Fn(f64) -> f64>(f: &F, rel_tol: f64) -> Result<f64> {
    let tol = Tolerance {
        abs: 1e-300,
        rel: rel_tol,
        max_depth: 30,
    };
    let mut total = 0.0;
    let mut err_total = 0.0;
    let mut k = LOW_EXPONENT;
    let mut quiet = 0;
    loop {
        let a = 2f64.powi(k);
        let b = (2.0 * a).min(LAMBDA_CAP);
        let (v, e) = adaptive(f, a, b, tol);
        total += v;
        err_total += e;
        if b >= LAMBDA_CAP {
            break;
        }
        if k > 0 {
            if v.abs() <= 1e-10 * total.abs() {
                quiet += 1;
                if quiet >= 3 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        k += 1;
    }
    if !total.is_finite() {
        return Err(Error::numeric("half-line quadrature diverged", err_total));
    }
    if err_total > 1e3 * rel_tol * total.abs().max(1e-300) {
        return Err(Error::numeric(
            "half-line quadrature did not converge",
            err_total,
        ));
    }
    Ok(total)
}

/// Integral of `f` over `[0, upper]` on uniform panels with one GK15 each.
/// Used for oscillatory integrands whose panel width is fixed by the caller.
pub fn uniform_panels<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, width: f64) -> f64 {
    let n = ((hi - lo) / width).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    (0..n)
        .map(|i| {
            let a = lo + i as f64 * h;
            gk15(f, a, a + h).0
        })
        .sum()
}
