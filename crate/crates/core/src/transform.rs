//! The signal pipeline `W[j]X ↦ U = A(|W[j]X|) ↦ S = U ⋆ φ_J ↦ F`.

use num_complex::Complex64;

use crate::chaos::{laguerre_coefficient, Nonlinearity};
use crate::error::{Error, Result};
use crate::gpsim::PathBundle;
use crate::wavelets::LowPass;

/// `U = A(|w|)` pointwise, with the number of invalid samples (exact zeros under `ln`).
pub fn apply_nonlinearity(a: Nonlinearity, w: &[Complex64]) -> (Vec<f64>, usize) {
    let mut invalid = 0;
    let u = w
        .iter()
        .map(|z| {
            let v = match a {
                Nonlinearity::Power(nu) if nu == 2.0 => z.norm_sqr(),
                _ => a.apply(z.norm()),
            };
            if !v.is_finite() {
                invalid += 1;
            }
            v
        })
        .collect();
    (u, invalid)
}

/// `E[U^A[j]X(t)]`: `σ^ν c_{A,0}` for powers, `c_{A,0} + ln σ` for the logarithm.
pub fn analytic_mean_u(a: Nonlinearity, sigma: f64) -> f64 {
    let c0 = laguerre_coefficient(a, 0);
    match a {
        Nonlinearity::Power(nu) => sigma.powf(nu) * c0,
        Nonlinearity::Log => c0 + sigma.ln(),
    }
}

/// `E[S^A_J[j]X(t)] = E[U] φ̂(0)`; independent of `J` and `t`.
pub fn analytic_mean_s(a: Nonlinearity, sigma: f64, lp: LowPass) -> f64 {
    analytic_mean_u(a, sigma) * lp.phi_hat(0.0)
}

/// Sampled kernel `φ_J(k Δt) Δt` for `|k| ≤ half`.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    pub lowpass: LowPass,
    pub big_j: i32,
    pub dt: f64,
    half: usize,
    weights: Vec<f64>,
}

impl MovingAverage {
    pub fn new(lowpass: LowPass, big_j: i32, dt: f64) -> Result<Self> {
        let width = lowpass.support_half_width() * 2f64.powi(big_j);
        let half = (width / dt).ceil();
        if half > 5e8 {
            return Err(Error::Size(format!(
                "{} window at J = {big_j} needs {half:.0} taps per side",
                lowpass.name()
            )));
        }
        let half = half as usize;
        let weights = (0..=2 * half)
            .map(|i| {
                let s = (i as f64 - half as f64) * dt;
                lowpass.phi_j(big_j, s) * dt
            })
            .collect();
        Ok(MovingAverage {
            lowpass,
            big_j,
            dt,
            half,
            weights,
        })
    }

    /// Taps on each side of the centre.
    pub fn half_width(&self) -> usize {
        self.half
    }

    /// `Σ_k u[i - k] φ_J(k Δt) Δt`, checked against the valid range.
    pub fn at(&self, u: &[f64], valid: &std::ops::Range<usize>, i: usize) -> Result<f64> {
        if i < valid.start + self.half || i + self.half >= valid.end {
            let need = 2 * (2 * self.half + 1);
            return Err(Error::Domain(format!(
                "{} window at J = {} needs {} samples around index {i} inside the valid region \
                 {valid:?}; use a grid of at least {} samples",
                self.lowpass.name(),
                self.big_j,
                2 * self.half + 1,
                need.next_power_of_two()
            )));
        }
        let base = i - self.half;
        let seg = &u[base..=i + self.half];
        // φ_J is even, so the reversed kernel is the kernel.
        Ok(seg.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
    }
}

/// Moving average of `u` at grid times `t_eval` (absolute times on the grid `k Δt`).
pub fn moving_average(
    u: &[f64],
    valid: &std::ops::Range<usize>,
    dt: f64,
    lp: LowPass,
    big_j: i32,
    t_eval: &[f64],
) -> Result<Vec<f64>> {
    let ma = MovingAverage::new(lp, big_j, dt)?;
    t_eval
        .iter()
        .map(|&t| {
            let i = grid_index(t, dt)?;
            ma.at(u, valid, i)
        })
        .collect()
}

fn grid_index(t: f64, dt: f64) -> Result<usize> {
    let k = (t / dt).round();
    if k < 0.0 || ((k * dt) - t).abs() > 1e-9 * dt.max(t.abs()) {
        return Err(Error::Domain(format!("time {t} is not a grid point of spacing {dt}")));
    }
    Ok(k as usize)
}

/// One coordinate `(j_m, t_m)` of the statistic `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    pub j: i32,
    pub t: f64,
}

/// Per-path vector `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FSample {
    pub values: Vec<f64>,
    pub invalid: usize,
}

/// Evaluator of `F_m = 2^{J/2}(S^A_J[j_m]X(t₀ + 2^J t_m) − E S)` on bundles
/// sharing one grid; `t₀` is the grid centre.
#[derive(Debug, Clone)]
pub struct FBuilder {
    pub nonlinearity: Nonlinearity,
    pub big_j: i32,
    pub coords: Vec<Coordinate>,
    means: Vec<f64>,
    ma: MovingAverage,
}

impl FBuilder {
    /// `sigmas[m]` is `σ_{j_m}`.
    pub fn new(
        a: Nonlinearity,
        lp: LowPass,
        big_j: i32,
        dt: f64,
        coords: &[Coordinate],
        sigmas: &[f64],
    ) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("F needs at least one coordinate".into()));
        }
        if sigmas.len() != coords.len() {
            return Err(Error::Domain("one σ per coordinate required".into()));
        }
        Ok(FBuilder {
            nonlinearity: a,
            big_j,
            coords: coords.to_vec(),
            means: sigmas.iter().map(|&s| analytic_mean_s(a, s, lp)).collect(),
            ma: MovingAverage::new(lp, big_j, dt)?,
        })
    }

    /// Distance from the grid centre the evaluation needs on each side.
    pub fn required_span(&self) -> f64 {
        let reach = self
            .coords
            .iter()
            .map(|c| c.t.abs() * 2f64.powi(self.big_j))
            .fold(0.0, f64::max);
        reach + (self.ma.half_width() + 1) as f64 * self.ma.dt
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    fn eval_index(&self, bundle: &PathBundle, c: &Coordinate) -> Result<usize> {
        let t = bundle.time(bundle.centre_index()) + 2f64.powi(self.big_j) * c.t;
        grid_index(t, bundle.dt)
    }

    /// `S` values (uncentred) for every coordinate.
    pub fn s_values(&self, bundle: &PathBundle) -> Result<(Vec<f64>, usize)> {
        let mut out = Vec::with_capacity(self.coords.len());
        let mut invalid = 0;
        let mut cache: Vec<(i32, Vec<f64>)> = Vec::new();
        for c in &self.coords {
            if !cache.iter().any(|(j, _)| *j == c.j) {
                let w = bundle
                    .scale(c.j)
                    .ok_or_else(|| Error::Domain(format!("bundle lacks scale j = {}", c.j)))?;
                let lo = bundle.valid.start;
                let hi = bundle.valid.end;
                let (mut u, bad) = apply_nonlinearity(self.nonlinearity, &w[lo..hi]);
                invalid += bad;
                // Restore absolute indexing with an offset-padded view.
                let mut full = vec![0.0; lo];
                full.append(&mut u);
                cache.push((c.j, full));
            }
            let u = &cache.iter().find(|(j, _)| *j == c.j).unwrap().1;
            let i = self.eval_index(bundle, c)?;
            out.push(self.ma.at(u, &bundle.valid, i)?);
        }
        Ok((out, invalid))
    }

    pub fn sample(&self, bundle: &PathBundle) -> Result<FSample> {
        let (s, invalid) = self.s_values(bundle)?;
        let scale = 2f64.powf(self.big_j as f64 / 2.0);
        Ok(FSample {
            values: s.iter().zip(&self.means).map(|(s, m)| scale * (s - m)).collect(),
            invalid,
        })
    }
}

/// One-shot `F` for a bundle.
pub fn make_f_sample(
    bundle: &PathBundle,
    a: Nonlinearity,
    lp: LowPass,
    big_j: i32,
    coords: &[Coordinate],
    sigmas: &[f64],
) -> Result<FSample> {
    FBuilder::new(a, lp, big_j, bundle.dt, coords, sigmas)?.sample(bundle)
}
