//! Monte Carlo experiments and empirical distances to Gaussian laws.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::bounds::{kappa_matrix, kolmogorov_rate};
use crate::chaos::{
    b_hypergeometric, check_b_identity, check_laguerre_closed_forms, check_theta_bounds,
    laguerre_coefficient, IdentityFailure, Nonlinearity,
};
use crate::error::{Error, Result};
use crate::gpsim::{build_grid, derive_seed, grid_for_span, GridConfig, Synthesizer};
use crate::quad;
use crate::spectra::SpectralModel;
use crate::transform::{apply_nonlinearity, Coordinate, FBuilder};
use crate::wavelets::{sigma_j, AnalyticWavelet, LowPass};

/// Largest `J` the harness accepts.
pub const MAX_BIG_J: u32 = 12;
/// Largest time grid per path.
pub const MAX_GRID: usize = 1 << 22;
/// Smallest population per `J`.
pub const MIN_PATHS: usize = 100;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn check_population(n: usize, variance: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {n}")));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Domain(format!("variance must be positive, got {variance}")));
    }
    Ok(())
}

/// `sup_z |F̂_N(z) − Φ((z − mean)/√variance)|`, exact over both one-sided
/// limits at each order statistic.
pub fn empirical_kolmogorov_1d(samples: &[f64], mean: f64, variance: f64) -> Result<f64> {
    check_population(samples.len(), variance)?;
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let sd = variance.sqrt();
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = std_normal_cdf((v - mean) / sd);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Quantile-coupling `W₁` against `N(mean, variance)` at plotting positions
/// `(k − ½)/N`.
pub fn empirical_w1_1d(samples: &[f64], mean: f64, variance: f64) -> Result<f64> {
    check_population(samples.len(), variance)?;
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let g = Normal::new(mean, variance.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
    let total: f64 = x
        .iter()
        .enumerate()
        .map(|(k, &v)| (v - g.inverse_cdf((k as f64 + 0.5) / n)).abs())
        .sum();
    Ok(total / n)
}

/// `P(Z₁ ≤ h, Z₂ ≤ k)` for standard normals with correlation `ρ`, as
/// `∫_{−∞}^h φ(x) Φ((k − ρx)/√(1 − ρ²)) dx`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    let s = 1.0 - rho * rho;
    if !(s > 1e-12) {
        return Err(Error::Domain(format!("|ρ| = {} too close to 1", rho.abs())));
    }
    let lo = -40.0;
    if h <= lo {
        return Ok(0.0);
    }
    let root = s.sqrt();
    let f = |x: f64| {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * std_normal_cdf((k - rho * x) / root)
    };
    let tol = quad::Tolerance {
        abs: 1e-13,
        rel: 1e-11,
        max_depth: 30,
    };
    // Split so the bulk of the Gaussian lies inside short panels.
    let mut acc = 0.0;
    let mut a = lo;
    for b in [-8.0, -2.0, 0.0, 2.0, 8.0] {
        if b >= h {
            break;
        }
        if b > a {
            acc += quad::adaptive(&f, a, b, tol).0;
            a = b;
        }
    }
    acc += quad::adaptive(&f, a, h, tol).0;
    Ok(acc.clamp(0.0, 1.0))
}

/// Points per axis of the two-dimensional Kolmogorov grid.
pub const KOLMOGOROV_GRID: usize = 200;

/// Quadrant-grid Kolmogorov distance in two dimensions, with grid lines at
/// the marginal sample quantiles `k/(G+1)`.
pub fn empirical_kolmogorov_2d(samples: &[[f64; 2]], mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<f64> {
    check_population(samples.len(), cov[0][0].min(cov[1][1]))?;
    let sd = [cov[0][0].sqrt(), cov[1][1].sqrt()];
    let rho = cov[0][1] / (sd[0] * sd[1]);
    let g = KOLMOGOROV_GRID;
    let axis = |c: usize| {
        let mut v: Vec<f64> = samples.iter().map(|s| s[c]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        (1..=g).map(|k| v[((k * n) / (g + 1)).min(n - 1)]).collect::<Vec<f64>>()
    };
    let (z1, z2) = (axis(0), axis(1));
    let mut counts = vec![0u32; g * g];
    for s in samples {
        let a = z1.partition_point(|&z| z < s[0]);
        let b = z2.partition_point(|&z| z < s[1]);
        if a < g && b < g {
            counts[a * g + b] += 1;
        }
    }
    for a in 0..g {
        for b in 0..g {
            let mut v = counts[a * g + b];
            if a > 0 {
                v += counts[(a - 1) * g + b];
            }
            if b > 0 {
                v += counts[a * g + b - 1];
            }
            if a > 0 && b > 0 {
                v -= counts[(a - 1) * g + b - 1];
            }
            counts[a * g + b] = v;
        }
    }
    let n = samples.len() as f64;
    let rows: Vec<f64> = (0..g)
        .into_par_iter()
        .map(|a| -> Result<f64> {
            let h = (z1[a] - mean[0]) / sd[0];
            let mut d: f64 = 0.0;
            for b in 0..g {
                let k = (z2[b] - mean[1]) / sd[1];
                let p = bivariate_normal_cdf(h, k, rho)?;
                d = d.max((counts[a * g + b] as f64 / n - p).abs());
            }
            Ok(d)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().fold(0.0, f64::max).clamp(0.0, 1.0))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fitted_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Sample mean, standard errors and covariance (divisor `n − 1`).
fn moments(rows: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for m in 0..d {
            mean[m] += r[m];
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for m in 0..d {
            for k in 0..d {
                cov[m * d + k] += (r[m] - mean[m]) * (r[k] - mean[k]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= n - 1.0);
    let se = (0..d).map(|m| (cov[m * d + m] / n).sqrt()).collect();
    (mean, se, cov)
}

#[derive(Debug, Clone)]
pub struct CltConfig {
    pub model: SpectralModel,
    pub wavelet: AnalyticWavelet,
    pub lowpass: LowPass,
    /// Evaluated on the same paths.
    pub nonlinearities: Vec<Nonlinearity>,
    pub coords: Vec<Coordinate>,
    pub j_list: Vec<u32>,
    pub n_paths: usize,
    pub seed: u64,
    pub eps: f64,
    /// Chaos order for the `κ` prediction; finite chaos uses its own order.
    pub kappa_order: u32,
}

impl CltConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_paths < MIN_PATHS {
            errs.push(format!("n_paths must be at least {MIN_PATHS}, got {}", self.n_paths));
        }
        if self.j_list.is_empty() {
            errs.push("J list is empty".to_string());
        }
        if let Some(j) = self.j_list.iter().find(|&&j| j > MAX_BIG_J) {
            errs.push(format!("J = {j} exceeds the cap {MAX_BIG_J}"));
        }
        if self.j_list.windows(2).any(|w| w[0] >= w[1]) {
            errs.push("J list must be strictly increasing".to_string());
        }
        if self.coords.is_empty() || self.coords.len() > 2 {
            errs.push(format!("dimension must be 1 or 2, got {}", self.coords.len()));
        }
        if self.nonlinearities.is_empty() {
            errs.push("no nonlinearity given".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }
}

/// One `(A, J)` population.
#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub nonlinearity: Nonlinearity,
    pub big_j: u32,
    pub n_paths: usize,
    pub n_time: usize,
    pub dt: f64,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Row-major `d × d` sample covariance.
    pub cov: Vec<f64>,
    /// Against `N(0, sample covariance)`.
    pub d_kol: f64,
    /// Against `N(sample mean, sample variance)`; one dimension only.
    pub d_kol_centred: f64,
    /// One dimension only.
    pub w1: f64,
    /// Row-major `κ`-assembled limit covariance.
    pub predicted_cov: Vec<f64>,
    pub envelope: f64,
    pub invalid: usize,
    /// `None` when the row completed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub rows: Vec<CltRow>,
    /// `F` samples per row, in path order.
    pub samples: Vec<Vec<Vec<f64>>>,
}

impl CltReport {
    pub fn row(&self, a: Nonlinearity, big_j: u32) -> Option<&CltRow> {
        self.rows.iter().find(|r| r.nonlinearity == a && r.big_j == big_j)
    }

    /// Fitted slope of `ln d_Kol` against `ln J`.
    pub fn kolmogorov_slope(&self, a: Nonlinearity) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| r.nonlinearity == a && r.error.is_none())
            .map(|r| (r.big_j as f64, r.d_kol))
            .unzip();
        fitted_log_slope(&x, &y)
    }
}

fn failed_row(a: Nonlinearity, big_j: u32, n_paths: usize, err: &Error) -> CltRow {
    CltRow {
        nonlinearity: a,
        big_j,
        n_paths,
        n_time: 0,
        dt: f64::NAN,
        mean: vec![],
        mean_se: vec![],
        cov: vec![],
        d_kol: f64::NAN,
        d_kol_centred: f64::NAN,
        w1: f64::NAN,
        predicted_cov: vec![],
        envelope: f64::NAN,
        invalid: 0,
        error: Some(err.to_string()),
    }
}

/// Grid for one `J`: the central half covers every evaluation window, and
/// holds at least `64·2^J` samples.
pub fn clt_grid(cfg: &CltConfig, builders_span: f64, big_j: u32) -> Result<GridConfig> {
    let j_set = scale_set(&cfg.coords);
    let mut g = grid_for_span(&cfg.model, &cfg.wavelet, &j_set, builders_span)?;
    g.n_time = g.n_time.max(64 << big_j);
    if g.n_time > MAX_GRID {
        return Err(Error::Size(format!(
            "J = {big_j} needs {} time samples with this low-pass; the cap is {MAX_GRID}",
            g.n_time
        )));
    }
    Ok(g)
}

fn scale_set(coords: &[Coordinate]) -> Vec<i32> {
    let mut j: Vec<i32> = coords.iter().map(|c| c.j).collect();
    j.sort_unstable();
    j.dedup();
    j
}

/// Simulates `F` for every `(A, J)`: fresh paths per `J` from
/// `derive_seed(seed, J)`, shared across nonlinearities.
pub fn run_clt_experiment(cfg: &CltConfig) -> Result<CltReport> {
    cfg.validate()?;
    let d = cfg.coords.len();
    let j_set = scale_set(&cfg.coords);
    let sigmas: Vec<f64> = cfg
        .coords
        .iter()
        .map(|c| sigma_j(&cfg.wavelet, &cfg.model, c.j))
        .collect::<Result<_>>()?;
    let predictions: Vec<std::result::Result<Vec<f64>, String>> = cfg
        .nonlinearities
        .iter()
        .map(|&a| {
            let order = a.finite_chaos_order().unwrap_or(cfg.kappa_order).max(2);
            kappa_matrix(&cfg.wavelet, &cfg.model, a, &cfg.coords, order, cfg.lowpass)
                .map(|k| k.limit_cov.transpose().as_slice().to_vec())
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for &big_j in &cfg.j_list {
        let attempt = (|| -> Result<(GridConfig, Vec<FBuilder>)> {
            let dt = crate::gpsim::default_dt(&cfg.model, &cfg.wavelet, &j_set)?;
            let builders = cfg
                .nonlinearities
                .iter()
                .map(|&a| FBuilder::new(a, cfg.lowpass, big_j as i32, dt, &cfg.coords, &sigmas))
                .collect::<Result<Vec<_>>>()?;
            let span = builders.iter().map(|b| b.required_span()).fold(0.0, f64::max);
            Ok((clt_grid(cfg, span, big_j)?, builders))
        })();
        let (grid_cfg, builders) = match attempt {
            Ok(v) => v,
            Err(e) => {
                for &a in &cfg.nonlinearities {
                    rows.push(failed_row(a, big_j, cfg.n_paths, &e));
                    samples.push(vec![]);
                }
                continue;
            }
        };
        let synth = build_grid(&cfg.model, &cfg.wavelet, &j_set, grid_cfg)
            .and_then(|g| Synthesizer::new(&cfg.wavelet, g, &j_set));
        let synth = match synth {
            Ok(s) => s,
            Err(e) => {
                for &a in &cfg.nonlinearities {
                    rows.push(failed_row(a, big_j, cfg.n_paths, &e));
                    samples.push(vec![]);
                }
                continue;
            }
        };
        let seed_j = derive_seed(cfg.seed, big_j as u64);
        // Per path: one F sample per nonlinearity.
        let per_path: Vec<Result<Vec<(Vec<f64>, usize)>>> = (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let bundle = synth.synthesize(derive_seed(seed_j, i as u64), false);
                builders
                    .iter()
                    .map(|b| b.sample(&bundle).map(|s| (s.values, s.invalid)))
                    .collect()
            })
            .collect();
        for (ai, &a) in cfg.nonlinearities.iter().enumerate() {
            let mut pop = Vec::with_capacity(cfg.n_paths);
            let mut invalid = 0;
            let mut failure = None;
            for p in &per_path {
                match p {
                    Ok(v) => {
                        invalid += v[ai].1;
                        pop.push(v[ai].0.clone());
                    }
                    Err(e) => {
                        failure = Some(e.clone());
                        break;
                    }
                }
            }
            if let Some(e) = failure {
                rows.push(failed_row(a, big_j, cfg.n_paths, &e));
                samples.push(vec![]);
                continue;
            }
            let row = summarise(cfg, a, big_j, &pop, d, invalid, &predictions[ai], &synth)
                .unwrap_or_else(|e| failed_row(a, big_j, cfg.n_paths, &e));
            rows.push(row);
            samples.push(pop);
        }
    }
    Ok(CltReport { rows, samples })
}

#[allow(clippy::too_many_arguments)]
fn summarise(
    cfg: &CltConfig,
    a: Nonlinearity,
    big_j: u32,
    pop: &[Vec<f64>],
    d: usize,
    invalid: usize,
    prediction: &std::result::Result<Vec<f64>, String>,
    synth: &Synthesizer,
) -> Result<CltRow> {
    let (mean, mean_se, cov) = moments(pop, d);
    let (d_kol, d_kol_centred, w1) = if d == 1 {
        let x: Vec<f64> = pop.iter().map(|r| r[0]).collect();
        (
            empirical_kolmogorov_1d(&x, 0.0, cov[0])?,
            empirical_kolmogorov_1d(&x, mean[0], cov[0])?,
            empirical_w1_1d(&x, 0.0, cov[0])?,
        )
    } else {
        let x: Vec<[f64; 2]> = pop.iter().map(|r| [r[0], r[1]]).collect();
        let c = [[cov[0], cov[1]], [cov[2], cov[3]]];
        (empirical_kolmogorov_2d(&x, [0.0, 0.0], c)?, f64::NAN, f64::NAN)
    };
    let envelope = kolmogorov_rate(a, &[big_j], cfg.eps)?.rows[0].envelope;
    Ok(CltRow {
        nonlinearity: a,
        big_j,
        n_paths: pop.len(),
        n_time: synth.grid().n_freq,
        dt: synth.grid().dt,
        mean,
        mean_se,
        cov,
        d_kol,
        d_kol_centred,
        w1,
        predicted_cov: prediction.clone().unwrap_or_else(|_| vec![f64::NAN; d * d]),
        envelope,
        invalid,
        error: prediction.as_ref().err().map(|e| format!("κ prediction: {e}")),
    })
}

/// Monte Carlo check of the first two moments of `U = A(|W[j]X(t)|)`:
/// `E U = c₀σ^ν` and `Var U = σ^{2ν} Σ_{k≥1} c_k²` (logarithm: `c₀ + ln σ`
/// and `Σ c_k²`), with the coefficients supplied by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanLawReport {
    pub nonlinearity: Nonlinearity,
    pub j: i32,
    pub sigma: f64,
    pub predicted_mean: f64,
    pub mc_mean: f64,
    pub mean_se: f64,
    pub predicted_var: f64,
    pub mc_var: f64,
    pub var_se: f64,
}

impl MeanLawReport {
    pub fn mean_z(&self) -> f64 {
        (self.mc_mean - self.predicted_mean) / self.mean_se
    }

    pub fn var_z(&self) -> f64 {
        (self.mc_var - self.predicted_var) / self.var_se
    }

    pub fn passed(&self) -> bool {
        self.mean_z().abs() < 3.0 && self.var_z().abs() < 3.0
    }
}

/// Relative error allowed between the grid variance of `W[j]X` and `σ_j²`.
const MEAN_LAW_GRID_TOL: f64 = 1e-4;
/// Number of Laguerre coefficients summed for the predicted variance.
const MEAN_LAW_TERMS: u32 = 400;

/// One sample of `W[j]X` at the grid centre per path; every nonlinearity is
/// evaluated on the same draws. The grid is doubled until its variance of
/// `W[j]X` matches `σ_j²`.
pub fn mean_law_check(
    model: &SpectralModel,
    w: &AnalyticWavelet,
    nonlinearities: &[Nonlinearity],
    j: i32,
    n_paths: usize,
    seed: u64,
    coefficient: impl Fn(Nonlinearity, u32) -> f64,
) -> Result<Vec<MeanLawReport>> {
    if n_paths < MIN_PATHS {
        return Err(Error::Config(format!("n_paths must be at least {MIN_PATHS}, got {n_paths}")));
    }
    let sigma = sigma_j(w, model, j)?;
    let mut cfg = grid_for_span(model, w, &[j], 0.0)?;
    let synth = loop {
        let s = Synthesizer::new(w, build_grid(model, w, &[j], cfg)?, &[j])?;
        let g = s.grid_sigma_sq(j).unwrap_or(f64::NAN);
        if (g / (sigma * sigma) - 1.0).abs() < MEAN_LAW_GRID_TOL {
            break s;
        }
        if cfg.n_time >= MAX_GRID {
            return Err(Error::Size(format!(
                "grid variance still off by {:e} at {} samples",
                g / (sigma * sigma) - 1.0,
                cfg.n_time
            )));
        }
        cfg.n_time *= 2;
    };
    let draws: Vec<num_complex::Complex64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let b = synth.synthesize(derive_seed(seed, i as u64), false);
            b.w[0].1[b.centre_index()]
        })
        .collect();
    nonlinearities
        .iter()
        .map(|&a| {
            let (u, invalid) = apply_nonlinearity(a, &draws);
            if invalid > 0 {
                return Err(Error::numeric("non-finite U sample", invalid as f64));
            }
            let n = u.len() as f64;
            let mean = u.iter().sum::<f64>() / n;
            let m2 = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m4 = u.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            let var = m2 * n / (n - 1.0);
            let tail: f64 = (1..=MEAN_LAW_TERMS).map(|k| coefficient(a, k).powi(2)).sum();
            let (predicted_mean, predicted_var) = match a {
                Nonlinearity::Power(nu) => {
                    (sigma.powf(nu) * coefficient(a, 0), sigma.powf(2.0 * nu) * tail)
                }
                Nonlinearity::Log => (coefficient(a, 0) + sigma.ln(), tail),
            };
            Ok(MeanLawReport {
                nonlinearity: a,
                j,
                sigma,
                predicted_mean,
                mc_mean: mean,
                mean_se: (var / n).sqrt(),
                predicted_var,
                mc_var: var,
                var_se: ((m4 - m2 * m2) / n).sqrt(),
            })
        })
        .collect()
}

/// `E A(|W|)` from the Rayleigh law of `|W|`, independent of the chaos
/// coefficients.
pub fn rayleigh_mean(a: Nonlinearity, sigma: f64) -> f64 {
    match a {
        Nonlinearity::Power(nu) => {
            (2.0 * sigma * sigma).powf(nu / 2.0) * statrs::function::gamma::gamma(1.0 + nu / 2.0)
        }
        Nonlinearity::Log => sigma.ln() + 0.5 * (2f64.ln() - crate::chaos::EULER_GAMMA),
    }
}

/// Outcome of the exact identity suites.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub suites: Vec<(&'static str, Vec<IdentityFailure>)>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|(_, f)| f.is_empty())
    }
}

pub fn run_identity_suite() -> IdentityReport {
    IdentityReport {
        suites: vec![
            ("b-identity", check_b_identity(b_hypergeometric)),
            ("laguerre-coefficients", check_laguerre_closed_forms(laguerre_coefficient)),
            ("theta-bounds", check_theta_bounds()),
        ],
    }
}
