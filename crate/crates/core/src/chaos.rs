//! Laguerre/Hermite expansion coefficients of `A(|x₁ + i x₂|)` and the
//! derived Wiener-chaos coefficients.
//!
//! For a bivariate standard Gaussian `(x₁, x₂)` the radial function
//! `A(|x₁ + i x₂|)` expands in products of Hermite polynomials with weights
//! `C_{m,n} = h_m h_n c_{A,(m+n)/2}`, nonzero only for even `m, n`. The radial
//! coefficients `c_{A,k}` are Laguerre coefficients of `u ↦ A(√(2u))`:
//!
//! ```text
//! c_{A,k} = ∫₀^∞ A(√(2u)) L_k(u) e^{-u} du
//! ```
//!
//! For the power family `A(r) = r^ν` they have the closed form
//! `2^{ν/2} Γ(ν/2+1) binom(k − ν/2 − 1, k)`; for `A = ln` they are
//! `(ln 2 − γ)/2` at `k = 0` and `−1/(2k)` afterwards. The chaos coefficient
//! of order `ℓ = 2k` is `c_ℓ = (−2)^k k! / ℓ! · c_{A,k}`.
//!
//! The sign-permutation weight `B(ℓ, λ)` has three evaluators here: brute
//! force over all permutations, the hypergeometric `a_n`/`w_n` sum, and the
//! closed form. All three work in exact rationals.

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant to 20 significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

/// The radial nonlinearity applied to the wavelet modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    /// `A(r) = r^ν`, `ν > 0`.
    Power(f64),
    /// `A(r) = ln r`.
    Log,
}

impl Nonlinearity {
    pub fn power(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("power exponent must be positive, got {nu}")));
        }
        Ok(Nonlinearity::Power(nu))
    }

    /// Parses `power:ν` or `log`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "log" || s == "ln" {
            return Ok(Nonlinearity::Log);
        }
        if let Some(rest) = s.strip_prefix("power:") {
            let nu: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad power exponent '{rest}'")))?;
            return Nonlinearity::power(nu);
        }
        Err(Error::Config(format!(
            "unknown nonlinearity '{s}'; expected 'power:<nu>' or 'log'"
        )))
    }

    pub fn label(&self) -> String {
        match self {
            Nonlinearity::Power(nu) => format!("power:{nu}"),
            Nonlinearity::Log => "log".into(),
        }
    }

    pub fn apply(&self, r: f64) -> f64 {
        match *self {
            Nonlinearity::Power(nu) => {
                if nu == 2.0 {
                    r * r
                } else if nu == 1.0 {
                    r
                } else {
                    r.powf(nu)
                }
            }
            Nonlinearity::Log => r.ln(),
        }
    }

    /// Exponent `ν` of the scale factor `σ^ν`; zero for the logarithm.
    pub fn nu(&self) -> f64 {
        match *self {
            Nonlinearity::Power(nu) => nu,
            Nonlinearity::Log => 0.0,
        }
    }

    /// `Some(ν)` when `ν` is an even positive integer: the expansion is a finite chaos.
    pub fn finite_chaos_order(&self) -> Option<u32> {
        match *self {
            Nonlinearity::Power(nu) if nu.fract() == 0.0 && (nu as u64) % 2 == 0 && nu <= 400.0 => {
                Some(nu as u32)
            }
            _ => None,
        }
    }
}

/// Laguerre polynomial `L_k(u)` by the three-term recurrence.
pub fn laguerre_poly(k: u32, u: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 - u;
    for n in 1..k {
        let n = n as f64;
        let next = ((2.0 * n + 1.0 - u) * cur - n * prev) / (n + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Generalized binomial `binom(x, k)` as the falling product `x(x-1)…(x-k+1)/k!`.
///
/// Factors are paired from the low end of the numerator so that the running
/// product stays bounded when `x ≈ k`.
pub fn generalized_binomial(x: f64, k: u32) -> f64 {
    let base = x - k as f64 + 1.0;
    let mut v = 1.0;
    for i in 0..k {
        v *= (base + i as f64) / (i + 1) as f64;
    }
    v
}

/// Closed form of `c_{A,k}`.
pub fn laguerre_coefficient(a: Nonlinearity, k: u32) -> f64 {
    match a {
        Nonlinearity::Power(nu) => {
            let half = nu / 2.0;
            2f64.powf(half) * gamma(half + 1.0) * generalized_binomial(k as f64 - half - 1.0, k)
        }
        Nonlinearity::Log => {
            if k == 0 {
                0.5 * (std::f64::consts::LN_2 - EULER_GAMMA)
            } else {
                -1.0 / (2.0 * k as f64)
            }
        }
    }
}

/// `ln |L_n^{(a)}(x)|`, its sign, and `L_{n-1}^{(a)}(x) / L_n^{(a)}(x)`, by a
/// rescaled three-term recurrence.
fn generalized_laguerre_scaled(n: usize, a: f64, x: f64) -> (f64, f64, f64) {
    let mut prev = 1.0;
    let mut cur = 1.0 + a - x;
    let mut log_scale = 0.0;
    if n == 0 {
        return (0.0, 1.0, 0.0);
    }
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 + a - x) * cur - (mf + a) * prev) / (mf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (cur.abs().ln() + log_scale, cur.signum(), prev / cur)
}

/// Nodes and weights of the generalized Gauss–Laguerre rule for `u^a e^{-u}`.
///
/// Golub–Welsch eigenvalues seed the nodes, which are then polished by Newton
/// steps; weights come from the closed form
/// `w_i = Γ(n+a+1) x_i / (n! (n+1)² L_{n+1}^{(a)}(x_i)²)` evaluated in logs,
/// which keeps the tiny weights of the far nodes relatively accurate.
pub fn gauss_laguerre(n: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let fi = i as f64;
        jac[(i, i)] = 2.0 * fi + 1.0 + a;
        if i + 1 < n {
            let off = ((fi + 1.0) * (fi + 1.0 + a)).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let nf = n as f64;
    let ln_const = ln_gamma(nf + a + 1.0) - ln_gamma(nf + 1.0) - 2.0 * (nf + 1.0).ln();
    let weights = nodes
        .iter_mut()
        .map(|x| {
            for _ in 0..3 {
                // L_n' = (n L_n − (n+a) L_{n−1}) / x, so L_n/L_n' = x / (n − (n+a) r).
                let (_, _, r) = generalized_laguerre_scaled(n, a, *x);
                let step = *x / (nf - (nf + a) * r);
                *x -= step;
                if step.abs() < 1e-15 * x.abs() {
                    break;
                }
            }
            let (ln_l, _, _) = generalized_laguerre_scaled(n + 1, a, *x);
            (ln_const + x.ln() - 2.0 * ln_l).exp()
        })
        .collect();
    (nodes, weights)
}

fn gl_sum<F: Fn(f64) -> f64>(nodes: &(Vec<f64>, Vec<f64>), f: F) -> f64 {
    nodes.0.iter().zip(&nodes.1).map(|(&x, &w)| w * f(x)).sum()
}

/// `c_{A,k}` by Gauss–Laguerre quadrature, refined until doubling the node
/// count moves the result by less than `1e-9`.
///
/// Power: the factor `u^{ν/2}` goes into the weight. Log: `ln u` is split at
/// `u = 1`; the inner piece is mapped by `u = e^{-s}` onto a smooth
/// `s e^{-s}` rule, the outer piece is shifted to `u = 1 + v`.
pub fn laguerre_coefficient_quadrature(a: Nonlinearity, k: u32) -> Result<f64> {
    if k > 40 {
        return Err(Error::Size(format!("quadrature oracle supports k ≤ 40, got {k}")));
    }
    let eval = |n: usize| -> f64 {
        match a {
            Nonlinearity::Power(nu) => {
                let rule = gauss_laguerre(n, nu / 2.0);
                2f64.powf(nu / 2.0) * gl_sum(&rule, |u| laguerre_poly(k, u))
            }
            Nonlinearity::Log => {
                let plain = gauss_laguerre(n, 0.0);
                let shift = 0.5 * std::f64::consts::LN_2 * gl_sum(&plain, |u| laguerre_poly(k, u));
                let inner_rule = gauss_laguerre(n, 1.0);
                let inner =
                    -gl_sum(&inner_rule, |s| laguerre_poly(k, (-s).exp()) * (-(-s).exp()).exp());
                let outer = (-1f64).exp() * gl_sum(&plain, |v| (1.0 + v).ln() * laguerre_poly(k, 1.0 + v));
                shift + 0.5 * (inner + outer)
            }
        }
    };
    let mut n = 32;
    let mut prev = eval(n);
    while n < 512 {
        n *= 2;
        let cur = eval(n);
        if (cur - prev).abs() < 1e-9 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::numeric("Gauss–Laguerre refinement did not settle", f64::NAN))
}

/// `h_m = (−1)^{m/2} √(m!) / (2^{m/2} (m/2)!)` for even `m`.
pub fn hermite_weight(m: u32) -> Result<f64> {
    if m % 2 == 1 {
        return Err(Error::Domain(format!("hermite weight needs even m, got {m}")));
    }
    // h_m² = C(m, m/2) / 2^m, built as Π (2i−1)/(2i).
    let half = m / 2;
    let sq: f64 = (1..=half).map(|i| (2 * i - 1) as f64 / (2 * i) as f64).product();
    let sign = if half % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * sq.sqrt())
}

/// `C_{m,n}`: `h_m h_n c_{A,(m+n)/2}` for even `m, n`, else 0.
pub fn hermite_coefficient(a: Nonlinearity, m: u32, n: u32) -> f64 {
    if m % 2 == 1 || n % 2 == 1 {
        return 0.0;
    }
    hermite_weight(m).unwrap() * hermite_weight(n).unwrap() * laguerre_coefficient(a, (m + n) / 2)
}

/// `2^k k! / (2k)! = 1 / (2k−1)!!`.
fn double_factorial_ratio(k: u32) -> f64 {
    (1..=k).map(|i| 1.0 / (2 * i - 1) as f64).product()
}

/// `2^ℓ ((ℓ/2)!)² / ℓ! = Π_{i≤ℓ/2} 2i/(2i−1)`.
pub fn central_ratio(ell: u32) -> f64 {
    (1..=ell / 2).map(|i| (2 * i) as f64 / (2 * i - 1) as f64).product()
}

/// `c_ℓ = (−2)^{ℓ/2} (ℓ/2)! / ℓ! · c_{A,ℓ/2}` for even `ℓ ≥ 2`.
pub fn chaos_coefficient(a: Nonlinearity, ell: u32) -> Result<f64> {
    if ell < 2 || ell % 2 == 1 {
        return Err(Error::Domain(format!("chaos order must be even and ≥ 2, got {ell}")));
    }
    let k = ell / 2;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * double_factorial_ratio(k) * laguerre_coefficient(a, k))
}

/// `ℓ! c_ℓ² = 2^ℓ ((ℓ/2)!)² / ℓ! · c_{A,ℓ/2}²`.
pub fn ell_factorial_c_sq(a: Nonlinearity, ell: u32) -> f64 {
    central_ratio(ell) * laguerre_coefficient(a, ell / 2).powi(2)
}

/// `Σ_{ℓ > K, even} ℓ! c_ℓ²` and the estimated remainder beyond the last summed term.
///
/// Terms are generated by recurrence, summed until one falls below `1e-16` of
/// the partial sum or `10⁶` terms are taken. The remainder extrapolates the
/// local power-law decay of the last two terms.
pub fn chaos_tail_sq(a: Nonlinearity, k_max: u32) -> (f64, f64) {
    if let Some(order) = a.finite_chaos_order() {
        let s = (k_max + 2..=order).step_by(2).map(|l| ell_factorial_c_sq(a, l)).sum();
        return (s, 0.0);
    }
    let mut k = k_max / 2 + 1;
    let mut ratio = central_ratio(2 * k);
    let mut c = laguerre_coefficient(a, k);
    let mut sum = 0.0;
    let mut prev_term = f64::NAN;
    let mut term = 0.0;
    for _ in 0..TAIL_TERM_CAP {
        prev_term = term;
        term = ratio * c * c;
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
        let kf = k as f64;
        ratio *= (2.0 * kf + 2.0) / (2.0 * kf + 1.0);
        c *= match a {
            Nonlinearity::Power(nu) => (kf - nu / 2.0) / (kf + 1.0),
            Nonlinearity::Log => kf / (kf + 1.0),
        };
        k += 1;
    }
    let ell = 2.0 * (k as f64 - 1.0);
    let remainder = if prev_term > term && term > 0.0 && ell > 2.0 {
        let p = (prev_term / term).ln() / (ell / (ell - 2.0)).ln();
        if p > 1.0 {
            term * ell / (2.0 * (p - 1.0))
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    };
    (sum, remainder)
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// Permutations of `0..n` in lexicographic order.
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        visit(&p);
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

/// `B(ℓ, λ)` by direct enumeration of all `ℓ!` permutations.
pub fn b_bruteforce(signs: &[i8]) -> Result<BigRational> {
    let ell = signs.len();
    if ell == 0 || ell % 2 == 1 {
        return Err(Error::Domain(format!("ℓ must be even and positive, got {ell}")));
    }
    if ell > 8 {
        return Err(Error::Size(format!("brute force enumerates ℓ! permutations; ℓ ≤ 8, got {ell}")));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::Domain("signs must be ±1".into()));
    }
    // Per split size n: Σ_p Π_{k=ℓ-n+1}^{ℓ} sgn(λ_{p(k)}).
    let splits: Vec<usize> = (0..=ell).step_by(2).collect();
    let mut counts = vec![0i64; splits.len()];
    for_each_permutation(ell, |p| {
        for (slot, &n) in splits.iter().enumerate() {
            let prod: i64 = p[ell - n..].iter().map(|&i| signs[i] as i64).product();
            counts[slot] += prod;
        }
    });
    let mut acc = BigRational::zero();
    for (slot, &n) in splits.iter().enumerate() {
        let m = ell - n;
        let sign = if (n / 2) % 2 == 0 { 1 } else { -1 };
        let den = factorial((m / 2) as u32) * factorial((n / 2) as u32);
        acc += ratio(BigInt::from(sign * counts[slot]), den);
    }
    Ok(acc / ratio(factorial(ell as u32), BigInt::one()))
}

/// `a_n = Σ_q (−1)^q C(N, q) C(ℓ−N, n−q)`.
pub fn hypergeometric_a(ell: u32, n_negative: u32, n: u32) -> BigInt {
    let mut acc = BigInt::zero();
    for q in 0..=n {
        if q > n_negative || n - q > ell - n_negative {
            continue;
        }
        let t = BigInt::from(binomial(BigUint::from(n_negative), BigUint::from(q)))
            * BigInt::from(binomial(BigUint::from(ell - n_negative), BigUint::from(n - q)));
        if q % 2 == 0 {
            acc += t;
        } else {
            acc -= t;
        }
    }
    acc
}

/// `w_n = n!(ℓ−n)! / (ℓ! (n/2)! (ℓ/2−n/2)!) · (−1)^{n/2}`.
pub fn hypergeometric_w(ell: u32, n: u32) -> BigRational {
    let num = factorial(n) * factorial(ell - n);
    let den = factorial(ell) * factorial(n / 2) * factorial(ell / 2 - n / 2);
    let w = ratio(num, den);
    if (n / 2) % 2 == 0 {
        w
    } else {
        -w
    }
}

/// `B(ℓ, λ)` as `Σ_{n even} w_n a_n`; depends only on the number of negative signs.
pub fn b_hypergeometric(ell: u32, n_negative: u32) -> Result<BigRational> {
    b_hypergeometric_with(ell, n_negative, hypergeometric_w)
}

/// [`b_hypergeometric`] with a caller-supplied weight, for mutation testing.
pub fn b_hypergeometric_with(
    ell: u32,
    n_negative: u32,
    weight: impl Fn(u32, u32) -> BigRational,
) -> Result<BigRational> {
    if ell == 0 || ell % 2 == 1 {
        return Err(Error::Domain(format!("ℓ must be even and positive, got {ell}")));
    }
    if n_negative > ell {
        return Err(Error::Domain(format!("N = {n_negative} exceeds ℓ = {ell}")));
    }
    let mut acc = BigRational::zero();
    for n in (0..=ell).step_by(2) {
        acc += weight(ell, n) * ratio(hypergeometric_a(ell, n_negative, n), BigInt::one());
    }
    Ok(acc)
}

/// Closed form: `2^ℓ (ℓ/2)! / ℓ!` when `N = ℓ/2`, else 0.
pub fn b_closed_form(ell: u32, n_negative: u32) -> BigRational {
    if 2 * n_negative != ell {
        return BigRational::zero();
    }
    ratio(
        (BigInt::one() << ell as usize) * factorial(ell / 2),
        factorial(ell),
    )
}

const THETA_MAX: u32 = 60;

/// `Θ₁(ℓ) = −1 + Σ_{k=0}^{ℓ−1} C(ℓ−1, k) √C(2k, k)`.
pub fn theta1(ell: u32) -> Result<f64> {
    if ell == 0 {
        return Err(Error::Domain("Θ₁ needs ℓ ≥ 1".into()));
    }
    if ell > THETA_MAX {
        return Err(Error::Size(format!("Θ₁ evaluated up to ℓ = {THETA_MAX}, got {ell}")));
    }
    // Integer binomials are exact; summing from the smallest term keeps f64 rounding tight.
    let mut terms: Vec<f64> = (0..ell)
        .map(|k| {
            let c = binomial(BigUint::from(ell - 1), BigUint::from(k)).to_f64().unwrap();
            let mid = binomial(BigUint::from(2 * k), BigUint::from(k)).to_f64().unwrap();
            c * mid.sqrt()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let s: f64 = terms.iter().sum();
    Ok(s - 1.0)
}

/// `Θ₂(ℓ, ℓ') = Σ_{r=1}^{ℓ∧ℓ'} (r/ℓ') √C(ℓ,r) √C(ℓ',r) √((ℓ+ℓ'−2r)! / ((ℓ−r)!(ℓ'−r)!))`.
pub fn theta2(ell: u32, ell_prime: u32) -> Result<f64> {
    if ell == 0 || ell_prime == 0 {
        return Err(Error::Domain("Θ₂ needs ℓ, ℓ' ≥ 1".into()));
    }
    if ell > THETA_MAX || ell_prime > THETA_MAX {
        return Err(Error::Size(format!("Θ₂ evaluated up to {THETA_MAX}")));
    }
    let lf = |n: u32| ln_gamma(n as f64 + 1.0);
    let (l, lp) = (ell, ell_prime);
    let mut acc = 0.0;
    for r in 1..=l.min(lp) {
        let ln = 0.5 * (lf(l) - lf(l - r) - lf(r))
            + 0.5 * (lf(lp) - lf(lp - r) - lf(r))
            + 0.5 * (lf(l + lp - 2 * r) - lf(l - r) - lf(lp - r));
        acc += r as f64 / lp as f64 * ln.exp();
    }
    Ok(acc)
}

/// Per-nonlinearity table of expansion coefficients truncated at chaos order `K`.
#[derive(Debug, Clone)]
pub struct ChaosTable {
    pub nonlinearity: Nonlinearity,
    pub k_max: u32,
    /// `c_{A,k}` for `k = 0..=K/2`.
    pub c_a: Vec<f64>,
    /// `c_ℓ` for `ℓ = 2, 4, …, K`.
    pub c_ell: Vec<f64>,
    /// `ℓ! c_ℓ²` for the same orders.
    pub ell_factorial_c_sq: Vec<f64>,
    /// `|c_ℓ| √(ℓ!) 3^{ℓ/2}` for the same orders.
    pub stein_terms: Vec<f64>,
    /// `Σ_{ℓ > K} ℓ! c_ℓ²`, including `tail_remainder`.
    pub tail_sq: f64,
    /// Extrapolated part of `tail_sq` beyond the last summed term.
    pub tail_remainder: f64,
    /// `Σ_{ℓ ≤ K} |c_ℓ| √(ℓ!) 3^{ℓ/2}`.
    pub stein_series: f64,
    /// Set when a finite-chaos nonlinearity has nonzero terms above `K`.
    pub truncation_warning: Option<String>,
}

const TAIL_TERM_CAP: u32 = 1_000_000;

impl ChaosTable {
    pub fn build(a: Nonlinearity, k_max: u32) -> Result<Self> {
        if k_max < 2 || k_max % 2 == 1 || k_max > 200 {
            return Err(Error::Domain(format!("K must be even in [2, 200], got {k_max}")));
        }
        let c_a: Vec<f64> = (0..=k_max / 2).map(|k| laguerre_coefficient(a, k)).collect();
        let orders: Vec<u32> = (2..=k_max).step_by(2).collect();
        let c_ell = orders
            .iter()
            .map(|&l| chaos_coefficient(a, l))
            .collect::<Result<Vec<_>>>()?;
        let ell_factorial_c_sq: Vec<f64> =
            orders.iter().map(|&l| ell_factorial_c_sq(a, l)).collect();
        let stein_terms: Vec<f64> = orders
            .iter()
            .zip(&ell_factorial_c_sq)
            .map(|(&l, &v)| v.sqrt() * 3f64.powi((l / 2) as i32))
            .collect();
        let stein_series = stein_terms.iter().sum();

        let truncation_warning = match a.finite_chaos_order() {
            Some(order) if order > k_max => Some(format!(
                "power {order} has nonzero chaos up to order {order}; K = {k_max} drops exact terms"
            )),
            _ => None,
        };
        let (summed, tail_remainder) = chaos_tail_sq(a, k_max);

        Ok(ChaosTable {
            nonlinearity: a,
            k_max,
            c_a,
            c_ell,
            ell_factorial_c_sq,
            stein_terms,
            tail_sq: summed + tail_remainder,
            tail_remainder,
            stein_series,
            truncation_warning,
        })
    }

    /// Chaos orders `2, 4, …, K`.
    pub fn orders(&self) -> impl Iterator<Item = u32> {
        (2..=self.k_max).step_by(2)
    }
}

/// Outcome of one exact identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityFailure {
    pub check: &'static str,
    pub witness: String,
}

/// Three-way agreement of the `B` evaluators for `ℓ ∈ {2,4,6,8}`, all `N`.
pub fn check_b_identity(
    hypergeometric: impl Fn(u32, u32) -> Result<BigRational>,
) -> Vec<IdentityFailure> {
    let mut out = Vec::new();
    for ell in [2u32, 4, 6, 8] {
        for n_neg in 0..=ell {
            let signs: Vec<i8> = (0..ell).map(|i| if i < n_neg { -1 } else { 1 }).collect();
            let brute = b_bruteforce(&signs);
            let hyp = hypergeometric(ell, n_neg);
            let closed = b_closed_form(ell, n_neg);
            let ok = matches!((&brute, &hyp), (Ok(b), Ok(h)) if *b == closed && *h == closed);
            if !ok {
                out.push(IdentityFailure {
                    check: "b-identity",
                    witness: format!(
                        "(ell={ell}, N={n_neg}): brute={:?} hyper={:?} closed={closed}",
                        brute.map(|v| v.to_string()),
                        hyp.map(|v| v.to_string())
                    ),
                });
            }
        }
    }
    out
}

/// Closed-form vs quadrature coefficients for `k ≤ 20` at `1e-8`.
pub fn check_laguerre_closed_forms(
    closed: impl Fn(Nonlinearity, u32) -> f64,
) -> Vec<IdentityFailure> {
    let families = [
        Nonlinearity::Power(0.5),
        Nonlinearity::Power(1.0),
        Nonlinearity::Power(2.0),
        Nonlinearity::Power(3.0),
        Nonlinearity::Log,
    ];
    let mut out = Vec::new();
    for a in families {
        for k in 0..=20 {
            let c = closed(a, k);
            match laguerre_coefficient_quadrature(a, k) {
                Ok(q) if (q - c).abs() < 1e-8 => {}
                other => out.push(IdentityFailure {
                    check: "laguerre-coefficients",
                    witness: format!("({}, k={k}): closed={c} quadrature={other:?}", a.label()),
                }),
            }
        }
    }
    out
}

/// Θ₁/Θ₂ bounds, the Θ₁ ratio window and the Stirling-type bound.
pub fn check_theta_bounds() -> Vec<IdentityFailure> {
    let mut out = Vec::new();
    let mut fail = |check: &'static str, witness: String| out.push(IdentityFailure { check, witness });
    for ell in 1..=20u32 {
        let t = theta1(ell).unwrap();
        if t > -1.0 + 3f64.powi(ell as i32 - 1) + 1e-9 {
            fail("theta1-bound", format!("ell={ell}: {t}"));
        }
        for lp in 1..=20u32 {
            let t2 = theta2(ell, lp).unwrap();
            if t2 > 3f64.powf(ell as f64 / 2.0) * 3f64.powf(lp as f64 / 2.0) * (1.0 + 1e-12) {
                fail("theta2-bound", format!("(ell={ell}, ell'={lp}): {t2}"));
            }
        }
    }
    let mut prev = 0.0;
    for ell in 10..=40u32 {
        let r = theta1(ell + 1).unwrap() / theta1(ell).unwrap();
        if !(r > 2.5 && r <= 3.0) || r <= prev {
            fail("theta1-ratio", format!("ell={ell}: ratio {r} (previous {prev})"));
        }
        prev = r;
    }
    for ell in (2..=40u32).step_by(2) {
        if central_ratio(ell) > (2.0 * std::f64::consts::PI * ell as f64).sqrt() {
            fail("stirling-bound", format!("ell={ell}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn laguerre_poly_values() {
        assert_eq!(laguerre_poly(0, 7.3), 1.0);
        assert_eq!(laguerre_poly(1, 3.0), -2.0);
        assert!((laguerre_poly(2, 1.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn laguerre_poly_matches_explicit_sum() {
        // L_k(u) = Σ_i C(k,i) (−u)^i / i!, in exact rationals at rational points.
        for k in 0..12u32 {
            for (pn, pd) in [(1i64, 3i64), (5, 2), (7, 1)] {
                let u = r(pn, pd);
                let mut acc = BigRational::zero();
                let mut upow = BigRational::one();
                for i in 0..=k {
                    let c = BigInt::from(binomial(BigUint::from(k), BigUint::from(i)));
                    let term = BigRational::from_integer(c) * &upow / BigRational::from_integer(factorial(i));
                    if i % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                    upow = upow * &u;
                }
                let want = acc.to_f64().unwrap();
                let got = laguerre_poly(k, pn as f64 / pd as f64);
                assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "k={k}");
            }
        }
    }

    #[test]
    fn printed_power_two_coefficients() {
        let a = Nonlinearity::Power(2.0);
        assert_eq!(laguerre_coefficient(a, 0), 2.0);
        assert_eq!(laguerre_coefficient(a, 1), -2.0);
        for k in 2..30 {
            assert_eq!(laguerre_coefficient(a, k), 0.0);
        }
    }

    #[test]
    fn printed_log_coefficients() {
        let a = Nonlinearity::Log;
        assert!((laguerre_coefficient(a, 0) - (0.5 * LN_2 - 0.5 * EULER_GAMMA)).abs() < 1e-17);
        assert!((laguerre_coefficient(a, 0) - 0.057_97).abs() < 1e-5);
        assert_eq!(laguerre_coefficient(a, 1), -0.5);
        assert_eq!(laguerre_coefficient(a, 2), -0.25);
    }

    #[test]
    fn power_one_closed_form() {
        let a = Nonlinearity::Power(1.0);
        assert!((laguerre_coefficient(a, 0) - (PI / 2.0).sqrt()).abs() < 1e-14);
        assert!((laguerre_coefficient(a, 1) + (PI / 2.0).sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_oracle_examples() {
        assert!(laguerre_coefficient_quadrature(Nonlinearity::Power(2.0), 5).unwrap().abs() < 1e-9);
        let q = laguerre_coefficient_quadrature(Nonlinearity::Log, 3).unwrap();
        assert!((q + 1.0 / 6.0).abs() < 1e-8, "{q}");
        let a = Nonlinearity::Power(0.5);
        let q = laguerre_coefficient_quadrature(a, 2).unwrap();
        assert!((q - laguerre_coefficient(a, 2)).abs() < 1e-8);
        assert!(laguerre_coefficient_quadrature(a, 41).is_err());
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        let failures = check_laguerre_closed_forms(laguerre_coefficient);
        assert!(failures.is_empty(), "{failures:?}");
    }

    #[test]
    fn hermite_weights() {
        assert_eq!(hermite_weight(0).unwrap(), 1.0);
        assert!((hermite_weight(2).unwrap() + 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((hermite_weight(4).unwrap() - 24f64.sqrt() / 8.0).abs() < 1e-15);
        assert!(hermite_weight(3).is_err());
    }

    #[test]
    fn hermite_coefficients() {
        let a = Nonlinearity::Power(2.0);
        assert_eq!(hermite_coefficient(a, 1, 2), 0.0);
        assert!((hermite_coefficient(a, 0, 0) - 2.0).abs() < 1e-15);
        assert!((hermite_coefficient(a, 2, 0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hermite_expansion_reproduces_modulus_square() {
        // |x₁+ix₂|² = Σ C_{m,n} He_m(x₁)He_n(x₂)/√(m!n!) with only (0,0),(2,0),(0,2) nonzero.
        let a = Nonlinearity::Power(2.0);
        let (x1, x2): (f64, f64) = (0.7, -1.3);
        let he2 = |x: f64| x * x - 1.0;
        let v = hermite_coefficient(a, 0, 0)
            + hermite_coefficient(a, 2, 0) * he2(x1) / 2f64.sqrt()
            + hermite_coefficient(a, 0, 2) * he2(x2) / 2f64.sqrt();
        assert!((v - (x1 * x1 + x2 * x2)).abs() < 1e-14);
    }

    #[test]
    fn chaos_coefficient_examples() {
        assert!((chaos_coefficient(Nonlinearity::Power(2.0), 2).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(chaos_coefficient(Nonlinearity::Power(2.0), 4).unwrap(), 0.0);
        assert!((chaos_coefficient(Nonlinearity::Log, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(chaos_coefficient(Nonlinearity::Log, 3).is_err());
    }

    #[test]
    fn b_examples() {
        assert_eq!(b_bruteforce(&[1, -1]).unwrap(), r(2, 1));
        assert_eq!(b_bruteforce(&[1, 1, 1, -1]).unwrap(), r(0, 1));
        assert_eq!(b_bruteforce(&[1, -1, 1, -1]).unwrap(), r(4, 3));
        assert_eq!(b_hypergeometric(6, 3).unwrap(), r(8, 15));
        assert_eq!(b_hypergeometric(6, 2).unwrap(), r(0, 1));
        assert_eq!(b_hypergeometric(8, 4).unwrap(), r(16, 105));
        assert!(matches!(b_bruteforce(&[1; 10]), Err(Error::Size(_))));
    }

    #[test]
    fn b_three_way_identity() {
        let failures = check_b_identity(b_hypergeometric);
        assert!(failures.is_empty(), "{failures:?}");
    }

    #[test]
    fn b_mutated_weight_is_caught() {
        let mutated = |ell, n| {
            let w = hypergeometric_w(ell, n);
            if n == 2 {
                -w
            } else {
                w
            }
        };
        let failures = check_b_identity(|ell, n| b_hypergeometric_with(ell, n, mutated));
        assert!(!failures.is_empty());
        assert!(failures[0].witness.contains("ell=2"), "{}", failures[0].witness);
    }

    #[test]
    fn b_depends_only_on_negative_count() {
        for ell in [2usize, 4, 6] {
            for mask in 0..(1u32 << ell) {
                let signs: Vec<i8> = (0..ell).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
                let n_neg = mask.count_ones();
                assert_eq!(b_bruteforce(&signs).unwrap(), b_closed_form(ell as u32, n_neg));
            }
        }
    }

    #[test]
    fn theta_values() {
        assert_eq!(theta1(1).unwrap(), 0.0);
        assert!((theta1(2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(theta1(61).is_err());
        assert!(check_theta_bounds().is_empty(), "{:?}", check_theta_bounds());
    }

    #[test]
    fn theta1_matches_factorial_form() {
        // Θ₁(ℓ) = 1/(ℓ−1)! Σ_{r=1}^{ℓ−1} (r−1)! C(ℓ−1, r−1)² √((2ℓ−2r)!) / (ℓ−r)!
        // rewritten: Σ_r C(ℓ−1, r−1) √C(2ℓ−2r, ℓ−r).
        for ell in 2..30u32 {
            let mut s = 0.0;
            for rr in 1..ell {
                let ln = ln_gamma(ell as f64) - ln_gamma(rr as f64) - ln_gamma((ell - rr + 1) as f64)
                    + 0.5 * (ln_gamma((2 * ell - 2 * rr + 1) as f64) - 2.0 * ln_gamma((ell - rr + 1) as f64));
                s += ln.exp();
            }
            let t = theta1(ell).unwrap();
            assert!(((s - t) / t).abs() < 1e-10, "ell={ell}: {s} vs {t}");
        }
    }

    #[test]
    fn table_power_two() {
        let t = ChaosTable::build(Nonlinearity::Power(2.0), 4).unwrap();
        assert!((t.c_ell[0] - 2.0).abs() < 1e-15);
        assert_eq!(t.c_ell[1], 0.0);
        assert_eq!(t.tail_sq, 0.0);
        assert!((t.stein_series - 2.0 * 2f64.sqrt() * 3.0).abs() < 1e-12);
        assert!(t.truncation_warning.is_none());
        let short = ChaosTable::build(Nonlinearity::Power(4.0), 2).unwrap();
        assert!(short.truncation_warning.is_some());
    }

    #[test]
    fn table_log() {
        let t = ChaosTable::build(Nonlinearity::Log, 2).unwrap();
        assert_eq!(t.c_ell.len(), 1);
        assert!((t.c_ell[0] - 0.5).abs() < 1e-15);
        assert!(ChaosTable::build(Nonlinearity::Log, 3).is_err());
    }

    #[test]
    fn table_tail_decay_power_one() {
        // ℓ! c_ℓ² ~ ℓ^{-5/2}, so the tail from K behaves like K^{-3/2} and
        // quadrupling K scales it by about 4^{-3/2} = 1/8.
        let a = Nonlinearity::Power(1.0);
        for k in [32u32, 64, 128] {
            let (s1, r1) = chaos_tail_sq(a, k);
            let (s4, r4) = chaos_tail_sq(a, 4 * k);
            let ratio = (s4 + r4) / (s1 + r1);
            assert!((0.1..0.16).contains(&ratio), "K={k}: {ratio}");
        }
    }

    #[test]
    fn tail_matches_direct_sum_with_remainder() {
        // Log terms decay like ℓ^{-3/2}: the cap binds, and the remainder
        // must account for what a much longer direct sum adds.
        let a = Nonlinearity::Log;
        let (s, r) = chaos_tail_sq(a, 10);
        assert!(r > 0.0);
        let mut direct = 0.0;
        let mut ratio = central_ratio(12);
        for k in 6..20_000_000u64 {
            direct += ratio / (4.0 * (k * k) as f64);
            ratio *= (2 * k + 2) as f64 / (2 * k + 1) as f64;
        }
        // Continuum tail beyond k = 2e7 of √(πk)/(4k²).
        direct += 0.5 * std::f64::consts::PI.sqrt() / 2e7f64.sqrt();
        assert!(((s + r) - direct).abs() < 1e-6 * direct, "{} vs {direct}", s + r);
    }

    #[test]
    fn table_monotonicity() {
        for a in [Nonlinearity::Power(1.0), Nonlinearity::Power(0.5), Nonlinearity::Log] {
            let mut prev: Option<ChaosTable> = None;
            for k in (2..=60).step_by(2) {
                let t = ChaosTable::build(a, k).unwrap();
                if let Some(p) = &prev {
                    assert!(t.tail_sq < p.tail_sq);
                    assert!(t.stein_series >= p.stein_series);
                }
                prev = Some(t);
            }
        }
    }

    #[test]
    fn coefficient_decay_slope() {
        // Least-squares slope of ln|c_{A,k}| against ln k over k ∈ [50, 200].
        for nu in [0.5, 1.0, 3.0] {
            let a = Nonlinearity::Power(nu);
            let pts: Vec<(f64, f64)> = (50..=200u32)
                .map(|k| ((k as f64).ln(), laguerre_coefficient(a, k).abs().ln()))
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let slope = sxy / sxx;
            assert!((slope - (-nu / 2.0 - 1.0)).abs() < 0.05, "nu={nu}: {slope}");
            let ratio = laguerre_coefficient(a, 201) / laguerre_coefficient(a, 200);
            assert!((ratio.abs() - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn variance_identity_for_laguerre_coefficients() {
        // Σ_k c_{A,k}² = E[A(√(2u))²] for u ~ Exp(1); Power(1): E[2u] = 2.
        // Summed by the ratio recurrence c_{k+1}/c_k = (k − ν/2)/(k+1).
        let a = Nonlinearity::Power(1.0);
        let mut c = laguerre_coefficient(a, 0);
        let mut s = 0.0;
        for k in 0..2_000_000u32 {
            if k % 100_000 == 0 {
                let direct = laguerre_coefficient(a, k);
                assert!(((c - direct) / direct).abs() < 1e-9, "k={k}");
            }
            s += c * c;
            c *= (k as f64 - 0.5) / (k as f64 + 1.0);
        }
        assert!((s - 2.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn gauss_laguerre_moments() {
        let (x, w) = gauss_laguerre(20, 0.5);
        for p in 0..10 {
            let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let want = gamma(p as f64 + 1.5);
            assert!(((v - want) / want).abs() < 1e-11, "p={p}");
        }
    }

    #[test]
    fn nonlinearity_parsing() {
        assert_eq!(Nonlinearity::parse("power:2").unwrap(), Nonlinearity::Power(2.0));
        assert_eq!(Nonlinearity::parse("log").unwrap(), Nonlinearity::Log);
        assert!(Nonlinearity::parse("power:-1").is_err());
        assert!(Nonlinearity::parse("cube").is_err());
        assert_eq!(Nonlinearity::Power(4.0).finite_chaos_order(), Some(4));
        assert_eq!(Nonlinearity::Power(3.0).finite_chaos_order(), None);
        assert_eq!(Nonlinearity::Log.finite_chaos_order(), None);
    }
}
