//! Spectral densities of the stationary Gaussian input process.
//!
//! Two families are supported: the Ornstein–Uhlenbeck density
//! `(c/π)/(λ²+c²)` and the power-law family `C_X(λ)|λ|^{β-1}` with
//! `β ∈ (0, 1]`. The amplitude `C_X` is restricted to a small catalogue of
//! closed-form even profiles so the singular cell at the origin can be split
//! into an exact part plus a smooth remainder.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

/// Even amplitude profile `C_X(λ)` of a power-law density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `C_X(λ) = c0`.
    Constant,
    /// `C_X(λ) = c0 · exp(-|λ|/scale)`.
    Exponential { scale: f64 },
    /// `C_X(λ) = c0 / (1 + (λ/scale)²)`.
    Rational { scale: f64 },
}

impl Profile {
    fn shape(&self, lambda: f64) -> f64 {
        match *self {
            Profile::Constant => 1.0,
            Profile::Exponential { scale } => (-lambda.abs() / scale).exp(),
            Profile::Rational { scale } => {
                let r = lambda / scale;
                1.0 / (1.0 + r * r)
            }
        }
    }

    /// `shape(λ) - 1`, evaluated without cancellation near zero.
    fn shape_minus_one(&self, lambda: f64) -> f64 {
        match *self {
            Profile::Constant => 0.0,
            Profile::Exponential { scale } => (-lambda.abs() / scale).exp_m1(),
            Profile::Rational { scale } => {
                let r2 = (lambda / scale).powi(2);
                -r2 / (1.0 + r2)
            }
        }
    }

    fn decays(&self) -> bool {
        !matches!(self, Profile::Constant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralKind {
    OrnsteinUhlenbeck { c: f64 },
    PowerLaw { beta: f64, cx_at_0: f64, profile: Profile },
}

/// Spectral density `f_X` together with the process mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel {
    kind: SpectralKind,
    mean: f64,
}

impl SpectralModel {
    pub fn ornstein_uhlenbeck(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("OU rate c must be positive, got {c}")));
        }
        Ok(SpectralModel {
            kind: SpectralKind::OrnsteinUhlenbeck { c },
            mean: 0.0,
        })
    }

    pub fn power_law(beta: f64, cx_at_0: f64, profile: Profile) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Domain(format!("beta must lie in (0, 1], got {beta}")));
        }
        if !(cx_at_0 > 0.0 && cx_at_0.is_finite()) {
            return Err(Error::Domain(format!(
                "cx_at_0 must be positive, got {cx_at_0}"
            )));
        }
        match profile {
            Profile::Exponential { scale } | Profile::Rational { scale } if !(scale > 0.0) => {
                return Err(Error::Domain(format!(
                    "profile scale must be positive, got {scale}"
                )))
            }
            _ => {}
        }
        Ok(SpectralModel {
            kind: SpectralKind::PowerLaw {
                beta,
                cx_at_0,
                profile,
            },
            mean: 0.0,
        })
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    pub fn kind(&self) -> SpectralKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Long-memory parameter; `1` for OU.
    pub fn beta(&self) -> f64 {
        match self.kind {
            SpectralKind::OrnsteinUhlenbeck { .. } => 1.0,
            SpectralKind::PowerLaw { beta, .. } => beta,
        }
    }

    /// The same model with the density multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self.kind {
            SpectralKind::PowerLaw {
                beta,
                cx_at_0,
                profile,
            } => Ok(SpectralModel::power_law(beta, cx_at_0 * factor, profile)?.with_mean(self.mean)),
            SpectralKind::OrnsteinUhlenbeck { .. } => Err(Error::Domain(
                "OU densities have unit mass and cannot be rescaled".into(),
            )),
        }
    }

    /// Evaluates `f_X(λ)`.
    pub fn density(&self, lambda: f64) -> Result<f64> {
        match self.kind {
            SpectralKind::OrnsteinUhlenbeck { c } => Ok(c / PI / (lambda * lambda + c * c)),
            SpectralKind::PowerLaw {
                beta,
                cx_at_0,
                profile,
            } => {
                let a = lambda.abs();
                if a == 0.0 {
                    if beta < 1.0 {
                        return Err(Error::Domain(
                            "power-law density is singular at 0; use cell_integral".into(),
                        ));
                    }
                    return Ok(cx_at_0);
                }
                Ok(cx_at_0 * profile.shape(a) * a.powf(beta - 1.0))
            }
        }
    }

    /// Density with the singular point mapped to 0; for integrands that vanish there.
    pub(crate) fn density_or_zero(&self, lambda: f64) -> f64 {
        self.density(lambda).unwrap_or(0.0)
    }

    /// Covariance `R_X(t) = ∫ e^{iλt} f_X(λ) dλ`.
    pub fn covariance(&self, t: f64) -> Result<f64> {
        match self.kind {
            SpectralKind::OrnsteinUhlenbeck { c } => Ok((-c * t.abs()).exp()),
            SpectralKind::PowerLaw { profile, .. } => {
                if !profile.decays() {
                    return Err(Error::Domain(
                        "constant profile has a non-integrable tail; covariance undefined".into(),
                    ));
                }
                let t = t.abs();
                let f = |l: f64| 2.0 * self.density_or_zero(l) * (l * t).cos();
                if t == 0.0 {
                    return quad::half_line(&f, 1e-12);
                }
                // The singular part sits below the first oscillation; above it,
                // fixed-width panels resolve the cosine.
                let first = (PI / (4.0 * t)).min(1.0);
                let tol = quad::Tolerance {
                    abs: 1e-300,
                    rel: 1e-12,
                    max_depth: 30,
                };
                let mut total = 0.0;
                let mut k = -160;
                while 2f64.powi(k + 1) <= first {
                    let a = 2f64.powi(k);
                    total += quad::adaptive(&f, a, 2.0 * a, tol).0;
                    k += 1;
                }
                let mut lo = 2f64.powi(k);
                let width = PI / (4.0 * t);
                let mut env = f64::INFINITY;
                while lo < quad::LAMBDA_CAP {
                    let hi = (lo + 256.0 * width).min(quad::LAMBDA_CAP);
                    total += quad::uniform_panels(&f, lo, hi, width);
                    lo = hi;
                    env = 2.0 * self.density_or_zero(lo) * 256.0 * width;
                    if env < 1e-10 * total.abs().max(1e-300) {
                        break;
                    }
                }
                if env > 1e-6 * total.abs().max(1.0) {
                    return Err(Error::numeric("covariance quadrature not converged", env));
                }
                Ok(total)
            }
        }
    }

    /// Mass `∫_lo^hi f_X(λ) dλ`; either bound may be infinite.
    pub fn cell_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Err(Error::Domain(format!("cell bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        match self.kind {
            SpectralKind::OrnsteinUhlenbeck { c } => {
                // atan difference, rewritten to keep precision for narrow far cells.
                let v = if lo >= 0.0 || hi <= 0.0 {
                    let (a, b) = if lo >= 0.0 { (lo, hi) } else { (-hi, -lo) };
                    if b.is_infinite() {
                        (c / a).atan()
                    } else {
                        (c * (b - a) / (c * c + a * b)).atan()
                            + if c * c + a * b < 0.0 { PI } else { 0.0 }
                    }
                } else {
                    (hi / c).atan() - (lo / c).atan()
                };
                Ok(v / PI)
            }
            SpectralKind::PowerLaw {
                beta,
                cx_at_0,
                profile,
            } => {
                if lo < 0.0 && hi > 0.0 {
                    return Ok(self.power_law_from_zero(beta, cx_at_0, profile, -lo)?
                        + self.power_law_from_zero(beta, cx_at_0, profile, hi)?);
                }
                let (a, b) = if lo >= 0.0 { (lo, hi) } else { (-hi, -lo) };
                if a == 0.0 {
                    return self.power_law_from_zero(beta, cx_at_0, profile, b);
                }
                let f = |l: f64| self.density_or_zero(l);
                if b.is_infinite() {
                    let whole = self.power_law_from_zero(beta, cx_at_0, profile, f64::INFINITY)?;
                    let head = self.power_law_from_zero(beta, cx_at_0, profile, a)?;
                    return Ok((whole - head).max(0.0));
                }
                Ok(quad::adaptive(&f, a, b, quad::Tolerance::default()).0)
            }
        }
    }

    /// `∫_0^h C_X(λ) λ^{β-1} dλ`: exact `c0 h^β/β` plus a quadrature of the
    /// smooth remainder `(C_X(λ) - c0) λ^{β-1}`.
    fn power_law_from_zero(&self, beta: f64, c0: f64, profile: Profile, h: f64) -> Result<f64> {
        if h == 0.0 {
            return Ok(0.0);
        }
        if h.is_infinite() {
            return match profile {
                Profile::Constant => Err(Error::Domain(
                    "constant profile has infinite total mass".into(),
                )),
                _ => {
                    let f = |l: f64| c0 * profile.shape(l) * l.powf(beta - 1.0);
                    quad::half_line(&f, 1e-13)
                }
            };
        }
        let exact = c0 * h.powf(beta) / beta;
        let rem = |l: f64| {
            if l == 0.0 {
                0.0
            } else {
                c0 * profile.shape_minus_one(l) * l.powf(beta - 1.0)
            }
        };
        let r = if matches!(profile, Profile::Constant) {
            0.0
        } else {
            quad::adaptive(&rem, 0.0, h, quad::Tolerance::default()).0
        };
        Ok(exact + r)
    }
}
