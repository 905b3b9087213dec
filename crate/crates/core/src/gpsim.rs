//! Spectral synthesis of the stationary Gaussian process `X` and its complex
//! wavelet coefficients `W[j]X` on a uniform periodic time grid.
//!
//! The spectral measure is discretized on the FFT-conjugate frequency grid
//! `λ_k = k Δλ`, `Δλ = 2π / (n Δt)`. Each positive cell carries one complex
//! Gaussian with variance equal to the exact cell mass `∫_cell f_X`; negative
//! cells are the conjugates. All scales `j` reuse the same draw.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectra::SpectralModel;
use crate::wavelets::AnalyticWavelet;

/// Relative level of the windowed spectral integrand at the cutoff.
pub const CUTOFF_LEVEL: f64 = 1e-12;

/// Time-grid request: `n_time` samples spaced `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_time: usize,
    pub dt: f64,
}

/// Discretized spectral measure on the FFT-conjugate grid.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    /// FFT length; equal to the number of time samples.
    pub n_freq: usize,
    pub dt: f64,
    pub d_lambda: f64,
    /// Nyquist frequency `π/Δt`.
    pub lambda_max: f64,
    /// Frequency above which the windowed integrand stays below [`CUTOFF_LEVEL`] of its peak.
    pub cutoff: f64,
    /// Masses of cells `0..=n/2`. Cell 0 is `[-Δλ/2, Δλ/2]`; cell `n/2`
    /// collects both tails beyond `(n/2 - ½)Δλ`; the others are the positive
    /// cells `[(k-½)Δλ, (k+½)Δλ]`, mirrored on the negative axis.
    pub cell_masses: Vec<f64>,
}

impl FrequencyGrid {
    pub fn lambda(&self, k: usize) -> f64 {
        k as f64 * self.d_lambda
    }

    /// `Σ` of all masses, both half-axes included.
    pub fn total_mass(&self) -> f64 {
        let half = self.n_freq / 2;
        self.cell_masses[0]
            + self.cell_masses[half]
            + 2.0 * self.cell_masses[1..half].iter().sum::<f64>()
    }
}

fn windowed(model: &SpectralModel, w: &AnalyticWavelet, j_set: &[i32], lambda: f64) -> f64 {
    let f = model.density_or_zero(lambda);
    j_set
        .iter()
        .map(|&j| {
            let p = w.psi_r_hat_re(2f64.powi(j) * lambda);
            p * p * f
        })
        .fold(0.0, f64::max)
}

/// Peak of `max_j |ψ̂_R(2^j λ)|² f_X(λ)` over `λ > 0` and the cutoff above it.
pub fn spectral_cutoff(
    model: &SpectralModel,
    w: &AnalyticWavelet,
    j_set: &[i32],
) -> Result<(f64, f64)> {
    if j_set.is_empty() {
        return Err(Error::Domain("scale set is empty".into()));
    }
    let g = |l: f64| windowed(model, w, j_set, l);
    let (mut arg, mut peak) = (0.0, 0.0);
    let steps = 4000;
    for i in 0..=steps {
        let l = 10f64.powf(-8.0 + 14.0 * i as f64 / steps as f64);
        let v = g(l);
        if v > peak {
            peak = v;
            arg = l;
        }
    }
    if !(peak > 0.0) {
        return Err(Error::numeric("windowed spectral integrand vanishes", peak));
    }
    let level = CUTOFF_LEVEL * peak;
    let mut l = arg;
    loop {
        l *= 1.001;
        if l > 1e7 {
            return Err(Error::numeric("windowed spectral integrand does not decay", g(l) / peak));
        }
        if g(l) < level && g(1.5 * l) < level && g(3.0 * l) < level {
            return Ok((arg, l));
        }
    }
}

/// Time step rule: at least eight samples per period of the finest scale's
/// peak frequency, and a Nyquist frequency above the spectral cutoff. The
/// result is rounded down to a power of two.
pub fn default_dt(model: &SpectralModel, w: &AnalyticWavelet, j_set: &[i32]) -> Result<f64> {
    let (_, cutoff) = spectral_cutoff(model, w, j_set)?;
    let j_min = *j_set.iter().min().unwrap();
    let oversample = 2.0 * std::f64::consts::PI * 2f64.powi(j_min) / (8.0 * w.peak_frequency());
    let dt = (std::f64::consts::PI / cutoff).min(oversample);
    Ok(2f64.powi(dt.log2().floor() as i32))
}

/// Grid whose central half covers `[t0 - span, t0 + span]`.
pub fn grid_for_span(
    model: &SpectralModel,
    w: &AnalyticWavelet,
    j_set: &[i32],
    span: f64,
) -> Result<GridConfig> {
    let dt = default_dt(model, w, j_set)?;
    let need = (4.0 * span / dt).ceil().max(256.0) as usize;
    Ok(GridConfig {
        n_time: need.next_power_of_two(),
        dt,
    })
}

/// Builds the frequency grid for the given time grid.
pub fn build_grid(
    model: &SpectralModel,
    w: &AnalyticWavelet,
    j_set: &[i32],
    config: GridConfig,
) -> Result<FrequencyGrid> {
    let n = config.n_time;
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::Size(format!("n_time must be a power of two ≥ 4, got {n}")));
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be positive, got {}", config.dt)));
    }
    let (_, cutoff) = spectral_cutoff(model, w, j_set)?;
    let lambda_max = std::f64::consts::PI / config.dt;
    if cutoff > lambda_max {
        let span = n as f64 * config.dt;
        let suggested = (span * cutoff / std::f64::consts::PI).ceil() as usize;
        return Err(Error::Size(format!(
            "spectral cutoff {cutoff:.4} exceeds the Nyquist frequency {lambda_max:.4}; \
             use n_freq ≥ {} for the same time span",
            suggested.next_power_of_two()
        )));
    }
    let d_lambda = 2.0 * std::f64::consts::PI / (n as f64 * config.dt);
    let half = n / 2;
    let mut cell_masses = Vec::with_capacity(half + 1);
    cell_masses.push(model.cell_integral(-0.5 * d_lambda, 0.5 * d_lambda)?);
    for k in 1..half {
        let lo = (k as f64 - 0.5) * d_lambda;
        cell_masses.push(model.cell_integral(lo, lo + d_lambda)?);
    }
    let edge = (half as f64 - 0.5) * d_lambda;
    cell_masses.push(2.0 * model.cell_integral(edge, f64::INFINITY)?);
    Ok(FrequencyGrid {
        n_freq: n,
        dt: config.dt,
        d_lambda,
        lambda_max,
        cutoff,
        cell_masses,
    })
}

/// SplitMix64 step; derives independent child seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two independent standard normals from two uniform words (Box–Muller).
pub fn box_muller(x: u64, y: u64) -> (f64, f64) {
    let u1 = ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (y >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (r * c, r * s)
}

/// Sampled paths on the time grid `t_k = k Δt`.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub dt: f64,
    /// Process values; empty when synthesized without `x`.
    pub x: Vec<f64>,
    /// `(j, W[j]X(t_k))` per scale.
    pub w: Vec<(i32, Vec<Complex64>)>,
    pub seed: u64,
    /// Valid index range: the central half of the periodic grid.
    pub valid: std::ops::Range<usize>,
}

impl PathBundle {
    pub fn len(&self) -> usize {
        self.w.first().map(|(_, v)| v.len()).unwrap_or(self.x.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Centre of the grid; the origin for evaluation times.
    pub fn centre_index(&self) -> usize {
        self.len() / 2
    }

    pub fn scale(&self, j: i32) -> Option<&[Complex64]> {
        self.w.iter().find(|(s, _)| *s == j).map(|(_, v)| v.as_slice())
    }

    /// Writes `t, x, re_w_j, im_w_j, …` for the valid region.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "t,x")?;
        for (j, _) in &self.w {
            write!(out, ",re_w_{j},im_w_{j}")?;
        }
        writeln!(out)?;
        for k in self.valid.clone() {
            write!(out, "{:?},{:?}", self.time(k), self.x.get(k).copied().unwrap_or(f64::NAN))?;
            for (_, v) in &self.w {
                write!(out, ",{:?},{:?}", v[k].re, v[k].im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Reusable synthesis state for one grid and scale set.
pub struct Synthesizer {
    grid: FrequencyGrid,
    scales: Vec<i32>,
    /// `ψ̂(2^j λ_k)` for `k = 0..n/2`, per scale.
    responses: Vec<Vec<f64>>,
    sqrt_mass: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Synthesizer {
    pub fn new(w: &AnalyticWavelet, grid: FrequencyGrid, j_set: &[i32]) -> Result<Self> {
        if j_set.is_empty() {
            return Err(Error::Domain("scale set is empty".into()));
        }
        let mut scales = j_set.to_vec();
        scales.sort_unstable();
        scales.dedup();
        let half = grid.n_freq / 2;
        let responses = scales
            .iter()
            .map(|&j| {
                let s = 2f64.powi(j);
                (0..half).map(|k| w.psi_hat_re(s * grid.lambda(k))).collect()
            })
            .collect();
        let sqrt_mass = grid.cell_masses.iter().map(|m| m.sqrt()).collect();
        let fft = FftPlanner::new().plan_fft_inverse(grid.n_freq);
        Ok(Synthesizer {
            grid,
            scales,
            responses,
            sqrt_mass,
            fft,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn scales(&self) -> &[i32] {
        &self.scales
    }

    /// Complex cell amplitudes `√m_k ξ_k` for `k = 0..=n/2`; the zero and
    /// Nyquist entries are real. Cell `k` consumes words `4k..4k+4` of the
    /// ChaCha8 stream keyed by `seed`.
    pub fn noise(&self, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = self.grid.n_freq / 2;
        (0..=half)
            .map(|k| {
                let (a, b) = box_muller(rng.next_u64(), rng.next_u64());
                let m = self.sqrt_mass[k];
                if k == 0 || k == half {
                    Complex64::new(m * a, 0.0)
                } else {
                    Complex64::new(m * a, m * b) * std::f64::consts::FRAC_1_SQRT_2
                }
            })
            .collect()
    }

    /// Synthesizes all scales, and `x` when `with_x` is set.
    pub fn synthesize(&self, seed: u64, with_x: bool) -> PathBundle {
        let n = self.grid.n_freq;
        let half = n / 2;
        let amp = self.noise(seed);
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        let mut w = Vec::with_capacity(self.scales.len());
        for (idx, &j) in self.scales.iter().enumerate() {
            let resp = &self.responses[idx];
            let mut buf = vec![Complex64::default(); n];
            for k in 1..half {
                buf[k] = amp[k] * resp[k];
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            w.push((j, buf));
        }
        let x = if with_x {
            let mut buf = vec![Complex64::default(); n];
            buf[1..half].copy_from_slice(&amp[1..half]);
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let (a0, an) = (amp[0].re, amp[half].re);
            buf.iter()
                .enumerate()
                .map(|(t, z)| {
                    let nyq = if t % 2 == 0 { an } else { -an };
                    a0 + 2.0 * z.re + nyq
                })
                .collect()
        } else {
            Vec::new()
        };
        PathBundle {
            dt: self.grid.dt,
            x,
            w,
            seed,
            valid: n / 4..3 * n / 4,
        }
    }

    /// `W[j]X` recomputed from `x` by FFT convolution with the scaled wavelet.
    pub fn convolve_x(&self, x: &[f64], j: i32, w: &AnalyticWavelet) -> Vec<Complex64> {
        let n = self.grid.n_freq;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut buf);
        let s = 2f64.powi(j);
        let mut out = vec![Complex64::default(); n];
        for k in 1..n / 2 {
            out[k] = buf[k] * w.psi_hat_re(s * self.grid.lambda(k)) / n as f64;
        }
        self.fft.process(&mut out);
        out
    }

    /// Grid variance of `Re W[j]X`: `½ Σ_k ψ̂(2^j λ_k)² m_k`.
    pub fn grid_sigma_sq(&self, j: i32) -> Option<f64> {
        let idx = self.scales.iter().position(|&s| s == j)?;
        let half = self.grid.n_freq / 2;
        Some(
            0.5 * (1..half)
                .map(|k| self.responses[idx][k].powi(2) * self.grid.cell_masses[k])
                .sum::<f64>(),
        )
    }
}

/// One-shot synthesis.
pub fn synthesize(
    w: &AnalyticWavelet,
    grid: &FrequencyGrid,
    j_set: &[i32],
    seed: u64,
) -> Result<PathBundle> {
    Ok(Synthesizer::new(w, grid.clone(), j_set)?.synthesize(seed, true))
}
