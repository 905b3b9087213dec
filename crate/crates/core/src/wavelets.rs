//! Analytic (generalized Morse) wavelets and low-pass windows, in the frequency domain only.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad;
use crate::spectra::SpectralModel;

/// Generalized Morse wavelet `ψ̂(λ) = λ^α e^{-λ^γ}` on `λ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticWavelet {
    alpha: f64,
    gamma: f64,
}

impl AnalyticWavelet {
    pub fn morse(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("wavelet alpha must be positive, got {alpha}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("wavelet gamma must be positive, got {gamma}")));
        }
        Ok(AnalyticWavelet { alpha, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Frequency where `ψ̂` peaks: `(α/γ)^{1/γ}`.
    pub fn peak_frequency(&self) -> f64 {
        (self.alpha / self.gamma).powf(1.0 / self.gamma)
    }

    /// Real one-sided spectrum; [`Self::psi_hat`] without the complex wrapper.
    #[inline]
    pub fn psi_hat_re(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        (self.alpha * lambda.ln() - lambda.powf(self.gamma)).exp()
    }

    pub fn psi_hat(&self, lambda: f64) -> Complex64 {
        Complex64::new(self.psi_hat_re(lambda), 0.0)
    }

    /// `C_{ψ_R}(λ)|λ|^α = ½ψ̂(|λ|)`; real for the Morse family.
    #[inline]
    pub fn psi_r_hat_re(&self, lambda: f64) -> f64 {
        0.5 * self.psi_hat_re(lambda.abs())
    }

    /// Fourier transform of the real part. Hermitian: conj of the positive side for `λ < 0`.
    pub fn psi_r_hat(&self, lambda: f64) -> Complex64 {
        if lambda > 0.0 {
            0.5 * self.psi_hat(lambda)
        } else if lambda < 0.0 {
            0.5 * self.psi_hat(-lambda).conj()
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Fourier transform of the imaginary part, `-i sgn(λ) ψ̂_R(λ)`.
    pub fn psi_i_hat(&self, lambda: f64) -> Complex64 {
        let sgn = if lambda > 0.0 {
            1.0
        } else if lambda < 0.0 {
            -1.0
        } else {
            0.0
        };
        Complex64::new(0.0, -sgn) * self.psi_r_hat(lambda)
    }
}

/// Evaluates the dilation `part(2^j λ)`.
pub fn scaled_hat<F: Fn(f64) -> Complex64>(part_hat: F, j: i32, lambda: f64) -> Complex64 {
    part_hat(2f64.powi(j) * lambda)
}

/// The three low-pass windows with closed-form transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LowPass {
    /// `φ(t) = e^{-t²}`
    Gaussian,
    /// `φ(t) = e^{-|t|}`
    Laplace,
    /// `φ(t) = 1/(1+t²)`
    Cauchy,
}

impl LowPass {
    pub const ALL: [LowPass; 3] = [LowPass::Gaussian, LowPass::Laplace, LowPass::Cauchy];

    pub fn name(&self) -> &'static str {
        match self {
            LowPass::Gaussian => "gaussian",
            LowPass::Laplace => "laplace",
            LowPass::Cauchy => "cauchy",
        }
    }

    pub fn parse(s: &str) -> Option<LowPass> {
        LowPass::ALL.into_iter().find(|lp| lp.name() == s.to_ascii_lowercase())
    }

    /// Time-domain window `φ(t)`.
    pub fn phi(&self, t: f64) -> f64 {
        match self {
            LowPass::Gaussian => (-t * t).exp(),
            LowPass::Laplace => (-t.abs()).exp(),
            LowPass::Cauchy => 1.0 / (1.0 + t * t),
        }
    }

    /// `φ_J(t) = 2^{-J} φ(t / 2^J)`.
    pub fn phi_j(&self, big_j: i32, t: f64) -> f64 {
        let s = 2f64.powi(big_j);
        self.phi(t / s) / s
    }

    pub fn phi_hat(&self, lambda: f64) -> f64 {
        match self {
            LowPass::Gaussian => PI.sqrt() * (-lambda * lambda / 4.0).exp(),
            LowPass::Laplace => 2.0 / (1.0 + lambda * lambda),
            LowPass::Cauchy => PI * (-lambda.abs()).exp(),
        }
    }

    pub fn phi_j_hat(&self, big_j: i32, lambda: f64) -> f64 {
        self.phi_hat(2f64.powi(big_j) * lambda)
    }

    /// Half-width `h` beyond which `|φ(t)| < 1e-10 ‖φ‖_∞`.
    pub fn support_half_width(&self) -> f64 {
        let ln_cut = 1e10f64.ln();
        match self {
            LowPass::Gaussian => ln_cut.sqrt(),
            LowPass::Laplace => ln_cut,
            LowPass::Cauchy => (1e10f64 - 1.0).sqrt(),
        }
    }

    /// `∫ e^{iλΔ} |φ̂(λ)|² dλ` in closed form.
    pub fn phase_integral(&self, delta: f64) -> f64 {
        let d = delta.abs();
        match self {
            LowPass::Gaussian => PI * (2.0 * PI).sqrt() * (-d * d / 2.0).exp(),
            LowPass::Laplace => 2.0 * PI * (1.0 + d) * (-d).exp(),
            LowPass::Cauchy => PI * PI * 4.0 / (4.0 + d * d),
        }
    }
}

/// `σ_j² = ∫ |ψ̂_R(2^j λ)|² f_X(λ) dλ`, returned as `σ_j`.
pub fn sigma_j(w: &AnalyticWavelet, model: &SpectralModel, j: i32) -> Result<f64> {
    Ok(sigma_j_sq(w, model, j)?.sqrt())
}

pub fn sigma_j_sq(w: &AnalyticWavelet, model: &SpectralModel, j: i32) -> Result<f64> {
    let s = 2f64.powi(j);
    let f = |l: f64| {
        let p = w.psi_r_hat_re(s * l);
        p * p * model.density_or_zero(l)
    };
    // Even integrand: twice the half line.
    let v = 2.0 * quad::half_line(&f, 1e-11)?;
    if !(v > 0.0) {
        return Err(Error::numeric("sigma_j² is not positive", v));
    }
    Ok(v)
}
