//! Closed-form bounds and limits: the chaos-series covariance of `U`, the
//! limit covariance of `F`, rate envelopes and the Wasserstein/Kolmogorov
//! conversions.
//!
//! Cross-covariances of `U_m = A(|W[j_m]X|)` follow from the chaos expansion:
//! only chaos terms with equal numbers of positive and negative frequencies
//! survive, which gives
//!
//! ```text
//! Cov(U_m(τ), U_n(0)) = (σ_m σ_n)^ν Σ_{ℓ even} ℓ! c_ℓ² C(ℓ, ℓ/2) |G_mn(τ)/(σ_m σ_n)|^ℓ
//! G_mn(τ) = ∫₀^∞ e^{iτλ} ψ̂_R(2^{j_m}λ) ψ̂_R(2^{j_n}λ) f_X(λ) dλ
//! ```
//!
//! with the `(σ_m σ_n)^ν` factor dropped for the logarithm.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::chaos::{central_ratio, ChaosTable, Nonlinearity};
use crate::error::{Error, Result};
use crate::gpsim::spectral_cutoff;
use crate::quad;
use crate::spectra::SpectralModel;
use crate::transform::Coordinate;
use crate::wavelets::{sigma_j, AnalyticWavelet, LowPass};

/// `G_mn(τ)` and the chaos series for one pair of scales.
#[derive(Debug, Clone)]
pub struct UCovariance {
    w: AnalyticWavelet,
    model: SpectralModel,
    pub nonlinearity: Nonlinearity,
    pub j_m: i32,
    pub j_n: i32,
    pub sigma_m: f64,
    pub sigma_n: f64,
    /// `(ℓ, ℓ! c_ℓ² C(ℓ, ℓ/2) 2^{-ℓ})`: the weight of `(2|G|/(σ_m σ_n))^ℓ`.
    terms: Vec<(u32, f64)>,
    cutoff: f64,
}

impl UCovariance {
    pub fn new(
        w: &AnalyticWavelet,
        model: &SpectralModel,
        a: Nonlinearity,
        j_m: i32,
        j_n: i32,
        k_max: u32,
    ) -> Result<Self> {
        if 2.0 * w.alpha() + model.beta() < 1.0 {
            return Err(Error::Domain(format!(
                "2α+β = {} < 1: the covariance of U is not integrable",
                2.0 * w.alpha() + model.beta()
            )));
        }
        let table = ChaosTable::build(a, k_max)?;
        // ℓ! c_ℓ² C(ℓ, ℓ/2) 2^{-ℓ} = c_{A,ℓ/2}² exactly.
        let terms = table
            .orders()
            .map(|l| {
                let c = table.c_a[(l / 2) as usize];
                (l, c * c)
            })
            .collect();
        let (_, cutoff) = spectral_cutoff(model, w, &[j_m, j_n])?;
        Ok(UCovariance {
            w: *w,
            model: *model,
            nonlinearity: a,
            j_m,
            j_n,
            sigma_m: sigma_j(w, model, j_m)?,
            sigma_n: sigma_j(w, model, j_n)?,
            terms,
            cutoff,
        })
    }

    fn window(&self, l: f64) -> f64 {
        self.w.psi_r_hat_re(2f64.powi(self.j_m) * l)
            * self.w.psi_r_hat_re(2f64.powi(self.j_n) * l)
            * self.model.density_or_zero(l)
    }

    /// `G_mn(τ)`, by dyadic panels near the origin and fixed-width panels of
    /// at most a quarter period above.
    pub fn g(&self, tau: f64) -> Result<Complex64> {
        let g = |l: f64| self.window(l);
        if tau == 0.0 {
            return Ok(Complex64::new(quad::half_line(&g, 1e-12)?, 0.0));
        }
        let width = (PI / (4.0 * tau.abs())).min(self.cutoff / 200.0);
        let re = |l: f64| g(l) * (tau * l).cos();
        let im = |l: f64| g(l) * (tau * l).sin();
        let tol = quad::Tolerance {
            abs: 1e-300,
            rel: 1e-12,
            max_depth: 30,
        };
        let (mut sr, mut si) = (0.0, 0.0);
        let mut k = -160;
        while 2f64.powi(k + 1) <= width {
            let a = 2f64.powi(k);
            sr += quad::adaptive(&re, a, 2.0 * a, tol).0;
            si += quad::adaptive(&im, a, 2.0 * a, tol).0;
            k += 1;
        }
        let lo = 2f64.powi(k);
        let hi = self.cutoff.max(2.0 * lo);
        sr += quad::uniform_panels(&re, lo, hi, width);
        si += quad::uniform_panels(&im, lo, hi, width);
        let z = Complex64::new(sr, si);
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::numeric("cross-spectrum quadrature diverged", f64::NAN));
        }
        Ok(z)
    }

    /// The series evaluated at a given `|G|`.
    pub fn from_g_abs(&self, g_abs: f64) -> f64 {
        let prod = self.sigma_m * self.sigma_n;
        let r = 2.0 * g_abs / prod;
        let series: f64 = self.terms.iter().map(|&(l, w)| w * r.powi(l as i32)).sum();
        match self.nonlinearity {
            Nonlinearity::Power(nu) => prod.powf(nu) * series,
            Nonlinearity::Log => series,
        }
    }

    /// `Cov(U_m(τ), U_n(0))` truncated at chaos order `K`.
    pub fn at(&self, tau: f64) -> Result<f64> {
        Ok(self.from_g_abs(self.g(tau)?.norm()))
    }

    /// Upper edge of the frequency window used for `G`.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

/// `Cov(U^A[j_m]X(τ), U^A[j_n]X(0))` with chaos orders up to `K`.
pub fn u_cross_covariance(
    w: &AnalyticWavelet,
    model: &SpectralModel,
    a: Nonlinearity,
    j_m: i32,
    j_n: i32,
    tau: f64,
    k_max: u32,
) -> Result<f64> {
    UCovariance::new(w, model, a, j_m, j_n, k_max)?.at(tau)
}

/// `Var A(σ|x₁ + i x₂|)` by two-dimensional quadrature over the plane in
/// polar coordinates (uniform in angle, adaptive in radius).
pub fn modulus_variance_2d(a: Nonlinearity, sigma: f64) -> Result<f64> {
    let n_theta = 8;
    let radial = |p: u32| -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..n_theta {
            let theta = 2.0 * PI * (i as f64 + 0.5) / n_theta as f64;
            let f = |r: f64| {
                let (x1, x2) = (r * theta.cos(), r * theta.sin());
                let v = a.apply(sigma * (x1 * x1 + x2 * x2).sqrt());
                v.powi(p as i32) * r * (-0.5 * r * r).exp() / (2.0 * PI)
            };
            let tol = quad::Tolerance {
                abs: 1e-15,
                rel: 1e-13,
                max_depth: 40,
            };
            acc += quad::adaptive(&f, 0.0, 1.0, tol).0 + quad::adaptive(&f, 1.0, 40.0, tol).0;
        }
        Ok(acc * 2.0 * PI / n_theta as f64)
    };
    let m1 = radial(1)?;
    let m2 = radial(2)?;
    Ok(m2 - m1 * m1)
}

/// Limit covariance of `F`.
#[derive(Debug, Clone)]
pub struct KappaMatrix {
    pub coords: Vec<Coordinate>,
    /// `κ_mn = (1/2π) ∫ Cov(U_m(τ), U_n(0)) dτ`.
    pub kappa: DMatrix<f64>,
    /// `∫ e^{iλ(t_m − t_n)} |φ̂(λ)|² dλ`.
    pub phase: DMatrix<f64>,
    /// `κ_mn · phase_mn`.
    pub limit_cov: DMatrix<f64>,
    /// `|κ(h) − κ(h/2)|` per entry.
    pub residuals: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

/// Trapezoid over `τ ≥ 0` until the integrand stays below `1e-6` of its
/// value at the origin, halving the step until two levels agree.
fn kappa_entry(cov: &UCovariance) -> Result<(f64, f64)> {
    let peak = cov.at(0.0)?.abs();
    if peak == 0.0 {
        return Ok((0.0, 0.0));
    }
    let scale = 2f64.powi(cov.j_m.max(cov.j_n));
    let tau_cap = 1e4 * scale;
    let mut h = PI / (2.0 * cov.cutoff());
    // Samples at multiples of the current step; refined by interleaving.
    let mut samples = vec![cov.at(0.0)?];
    let mut quiet = 0;
    while quiet < 20 {
        let tau = samples.len() as f64 * h;
        if tau > tau_cap {
            return Err(Error::Domain(format!(
                "covariance of U has not decayed to 1e-6 of its peak by τ = {tau_cap}; \
                 check 2α+β ≥ 1"
            )));
        }
        let v = cov.at(tau)?;
        quiet = if v.abs() < 1e-6 * peak { quiet + 1 } else { 0 };
        samples.push(v);
    }
    let trap = |s: &[f64], h: f64| h * (s.iter().sum::<f64>() - 0.5 * s[0] - 0.5 * s[s.len() - 1]);
    let mut prev = trap(&samples, h);
    for _ in 0..8 {
        let mids: Vec<f64> = (0..samples.len() - 1)
            .map(|i| cov.at((i as f64 + 0.5) * h))
            .collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(2 * samples.len() - 1);
        for (i, &s) in samples.iter().enumerate() {
            merged.push(s);
            if i < mids.len() {
                merged.push(mids[i]);
            }
        }
        samples = merged;
        h *= 0.5;
        let cur = trap(&samples, h);
        let resid = (cur - prev).abs();
        if resid <= 1e-9 * cur.abs().max(1e-300) {
            return Ok((cur / PI, resid / PI));
        }
        prev = cur;
    }
    Err(Error::numeric("κ trapezoid did not settle", prev))
}

/// Assembles `κ` and the limit covariance `κ_mn ∫ e^{iλ(t_m−t_n)}|φ̂|²`.
pub fn kappa_matrix(
    w: &AnalyticWavelet,
    model: &SpectralModel,
    a: Nonlinearity,
    coords: &[Coordinate],
    k_max: u32,
    lp: LowPass,
) -> Result<KappaMatrix> {
    let d = coords.len();
    if d == 0 {
        return Err(Error::Domain("κ needs at least one coordinate".into()));
    }
    let mut kappa = DMatrix::zeros(d, d);
    let mut residuals = DMatrix::zeros(d, d);
    let mut phase = DMatrix::zeros(d, d);
    for m in 0..d {
        for n in m..d {
            let (k, r) = if n > m && coords[n].j == coords[m].j {
                (kappa[(m, m)], residuals[(m, m)])
            } else {
                kappa_entry(&UCovariance::new(w, model, a, coords[m].j, coords[n].j, k_max)?)?
            };
            kappa[(m, n)] = k;
            kappa[(n, m)] = k;
            residuals[(m, n)] = r;
            residuals[(n, m)] = r;
            let p = lp.phase_integral(coords[m].t - coords[n].t);
            phase[(m, n)] = p;
            phase[(n, m)] = p;
        }
    }
    let limit_cov = kappa.component_mul(&phase);
    let eig = SymmetricEigen::new(limit_cov.clone()).eigenvalues;
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max_abs = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if min_eigenvalue < -1e-10 * max_abs.max(1.0) {
        return Err(Error::numeric("limit covariance is not positive semidefinite", min_eigenvalue));
    }
    Ok(KappaMatrix {
        coords: coords.to_vec(),
        kappa,
        phase,
        limit_cov,
        residuals,
        min_eigenvalue,
    })
}

/// Lower bound on the Wasserstein distance between `U` under two inputs.
pub fn wasserstein_lower_bound(a: Nonlinearity, sigma_1: f64, sigma_2: f64) -> Result<f64> {
    if !(sigma_1 > 0.0 && sigma_2 > 0.0) {
        return Err(Error::Domain("σ values must be positive".into()));
    }
    Ok(match a {
        Nonlinearity::Power(nu) => {
            2f64.powf(nu / 2.0)
                * statrs::function::gamma::gamma(nu / 2.0 + 1.0)
                * (sigma_1.powf(nu) - sigma_2.powf(nu)).abs()
        }
        Nonlinearity::Log => (sigma_1.ln() - sigma_2.ln()).abs(),
    })
}

/// Which line of the rate theorem applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Finite chaos, `ν ∈ 2ℕ`.
    Exponential,
    /// `ν ∉ 2ℕ`.
    PolynomialPower,
    PolynomialLog,
}

impl Regime {
    pub fn of(a: Nonlinearity) -> Regime {
        match a {
            Nonlinearity::Log => Regime::PolynomialLog,
            _ if a.finite_chaos_order().is_some() => Regime::Exponential,
            _ => Regime::PolynomialPower,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Exponential => "exponential",
            Regime::PolynomialPower => "polynomial-power",
            Regime::PolynomialLog => "polynomial-log",
        }
    }
}

/// `K(J) = 2⌊(J/4) log₃ 2⌋`; the raw schedule may be 0.
pub fn truncation_order(big_j: u32) -> u32 {
    let log3_2 = 2f64.ln() / 3f64.ln();
    2 * ((big_j as f64 / 4.0) * log3_2).floor() as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub big_j: u32,
    /// Truncation order used; the schedule clamped to at least 2.
    pub k: u32,
    pub tail_term: f64,
    pub stein_term: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub nonlinearity: Nonlinearity,
    pub regime: Regime,
    pub eps: f64,
    pub rows: Vec<RateRow>,
}

fn check_eps(a: Nonlinearity, eps: f64) -> Result<()> {
    if Regime::of(a) == Regime::PolynomialPower && !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Domain(format!("ε must lie in (0, 0.5], got {eps}")));
    }
    Ok(())
}

/// Unit-constant smooth-Wasserstein rate terms per `J`.
///
/// Finite chaos: `K` is pinned to `ν`, the tail term vanishes, and the Stein
/// term is `2^{-J/2} (Σ |c_ℓ| √ℓ! 3^{ℓ/2})²`. Otherwise `K = K(J)`, the tail
/// term is `2 K^{−ν/2−1/4+ε}` and the Stein term `2^{−J/2} 3^K K^{−ν−3/2+ε}`.
pub fn rate_curve(a: Nonlinearity, j_list: &[u32], eps: f64) -> Result<RateCurve> {
    check_eps(a, eps)?;
    let regime = Regime::of(a);
    let nu = a.nu();
    let mut rows = Vec::with_capacity(j_list.len());
    for &big_j in j_list {
        let jf = big_j as f64;
        let stein_scale = 2f64.powf(-jf / 2.0);
        let row = match a.finite_chaos_order() {
            Some(order) => {
                let table = ChaosTable::build(a, order.max(2))?;
                RateRow {
                    big_j,
                    k: order,
                    tail_term: 0.0,
                    stein_term: stein_scale * table.stein_series.powi(2),
                    envelope: stein_scale,
                }
            }
            None => {
                let k = truncation_order(big_j).max(2);
                let kf = k as f64;
                let envelope = match regime {
                    Regime::PolynomialLog => jf.powf(-0.25),
                    _ => jf.powf(-nu / 2.0 - 0.25 + eps),
                };
                RateRow {
                    big_j,
                    k,
                    tail_term: 2.0 * kf.powf(-nu / 2.0 - 0.25 + eps),
                    stein_term: stein_scale * 3f64.powi(k as i32) * kf.powf(-nu - 1.5 + eps),
                    envelope,
                }
            }
        };
        rows.push(row);
    }
    Ok(RateCurve {
        nonlinearity: a,
        regime,
        eps,
        rows,
    })
}

/// Kolmogorov envelopes: `2^{−J/6}`, `J^{−ν/6−1/12+ε}`, `J^{−1/12}`.
pub fn kolmogorov_rate(a: Nonlinearity, j_list: &[u32], eps: f64) -> Result<RateCurve> {
    let mut curve = rate_curve(a, j_list, eps)?;
    let nu = a.nu();
    for row in &mut curve.rows {
        let jf = row.big_j as f64;
        row.envelope = match curve.regime {
            Regime::Exponential => 2f64.powf(-jf / 6.0),
            Regime::PolynomialPower => jf.powf(-nu / 6.0 - 1.0 / 12.0 + eps),
            Regime::PolynomialLog => jf.powf(-1.0 / 12.0),
        };
    }
    Ok(curve)
}

/// Kolmogorov bound from a smooth-Wasserstein value:
/// `3((√(2 ln d) + 2)/√min E[F_m²])^{2/3} d_H^{1/3} + d_H`.
pub fn kolmogorov_from_smooth_wasserstein(d: usize, min_variance: f64, d_h2: f64) -> Result<f64> {
    if d == 0 || !(min_variance > 0.0) || d_h2 < 0.0 {
        return Err(Error::Domain("need d ≥ 1, positive variance, d_H ≥ 0".into()));
    }
    let lead = ((2.0 * (d as f64).ln()).sqrt() + 2.0) / min_variance.sqrt();
    Ok(3.0 * lead.powf(2.0 / 3.0) * d_h2.cbrt() + d_h2)
}

/// `2^ℓ((ℓ/2)!)²/ℓ!` against its Stirling bound `√(2πℓ)`.
pub fn stirling_bound_holds(ell: u32) -> bool {
    central_ratio(ell) <= (2.0 * PI * ell as f64).sqrt()
}
