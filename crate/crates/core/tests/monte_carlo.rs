//! Monte Carlo laws of the simulator and the transform pipeline.

use rayon::prelude::*;
use wavechaos::chaos::{laguerre_coefficient, Nonlinearity};
use wavechaos::gpsim::{build_grid, derive_seed, GridConfig, PathBundle, Synthesizer};
use wavechaos::harness::{mean_law_check, rayleigh_mean};
use wavechaos::spectra::SpectralModel;
use wavechaos::transform::{Coordinate, FBuilder};
use wavechaos::wavelets::{sigma_j, AnalyticWavelet, LowPass};

const N: usize = 10_000;
const SEED: u64 = 314_159;

fn bundles(model: &SpectralModel, w: &AnalyticWavelet, j: &[i32], cfg: GridConfig, with_x: bool) -> Vec<PathBundle> {
    let s = Synthesizer::new(w, build_grid(model, w, j, cfg).unwrap(), j).unwrap();
    (0..N)
        .into_par_iter()
        .map(|i| s.synthesize(derive_seed(SEED, i as u64), with_x))
        .collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Standard error of a sample variance of Gaussian data.
fn var_se(v: f64) -> f64 {
    v * (2.0 / (N as f64 - 1.0)).sqrt()
}

#[test]
fn marginals_and_covariance_of_ou_paths() {
    let m = SpectralModel::ornstein_uhlenbeck(1.0).unwrap();
    let w = AnalyticWavelet::morse(3.0, 1.0).unwrap();
    let dt = 0.125;
    let b = bundles(&m, &w, &[0], GridConfig { n_time: 1024, dt }, true);
    let c = b[0].centre_index();
    let x: Vec<f64> = b.iter().map(|p| p.x[c]).collect();
    let (_, vx) = mean_var(&x);
    assert!((vx - 1.0).abs() < 3.0 * var_se(1.0), "Var x = {vx}");

    let s2 = sigma_j(&w, &m, 0).unwrap().powi(2);
    let re: Vec<f64> = b.iter().map(|p| p.w[0].1[c].re).collect();
    let im: Vec<f64> = b.iter().map(|p| p.w[0].1[c].im).collect();
    let (_, vre) = mean_var(&re);
    let (_, vim) = mean_var(&im);
    assert!((vre - s2).abs() < 3.0 * var_se(s2), "Var Re W = {vre} vs {s2}");
    assert!((vim - s2).abs() < 3.0 * var_se(s2), "Var Im W = {vim} vs {s2}");
    let corr = re.iter().zip(&im).map(|(a, b)| a * b).sum::<f64>() / N as f64 / s2;
    assert!(corr.abs() < 3.0 / (N as f64).sqrt(), "corr(Re, Im) = {corr}");

    for tau in [0.5, 1.0, 2.0] {
        let k = (tau / dt) as usize;
        let prod: Vec<f64> = b.iter().map(|p| p.x[c] * p.x[c + k]).collect();
        let (mp, vp) = mean_var(&prod);
        let want = (-tau as f64).exp();
        assert!((mp - want).abs() < 4.0 * (vp / N as f64).sqrt(), "τ={tau}: {mp} vs {want}");
    }
}

#[test]
fn variance_is_stationary_across_valid_region() {
    let m = SpectralModel::ornstein_uhlenbeck(1.0).unwrap();
    let w = AnalyticWavelet::morse(3.0, 1.0).unwrap();
    let b = bundles(&m, &w, &[1], GridConfig { n_time: 512, dt: 0.125 }, false);
    let valid = b[0].valid.clone();
    let s2 = sigma_j(&w, &m, 1).unwrap().powi(2);
    let vars: Vec<f64> = [valid.start, (valid.start + valid.end) / 2, valid.end - 1]
        .iter()
        .map(|&k| mean_var(&b.iter().map(|p| p.w[0].1[k].re).collect::<Vec<_>>()).1)
        .collect();
    let spread = vars.iter().cloned().fold(f64::MIN, f64::max) - vars.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 4.0 * var_se(s2), "{vars:?}");
}

#[test]
fn f_is_centred() {
    let m = SpectralModel::ornstein_uhlenbeck(1.0).unwrap();
    let w = AnalyticWavelet::morse(3.0, 1.0).unwrap();
    let coords = [Coordinate { j: 0, t: 0.0 }];
    let sig = [sigma_j(&w, &m, 0).unwrap()];
    let b = bundles(&m, &w, &[0], GridConfig { n_time: 2048, dt: 0.125 }, false);
    for a in [Nonlinearity::Power(1.0), Nonlinearity::Power(2.0), Nonlinearity::Log] {
        let f = FBuilder::new(a, LowPass::Gaussian, 3, 0.125, &coords, &sig).unwrap();
        let vals: Vec<f64> = b.iter().map(|p| f.sample(p).unwrap().values[0]).collect();
        let (mean, var) = mean_var(&vals);
        assert!(mean.abs() < 3.0 * (var / N as f64).sqrt(), "{a:?}: mean {mean}");
    }
}

#[test]
fn power_two_variance_law() {
    let m = SpectralModel::ornstein_uhlenbeck(1.0).unwrap();
    let w = AnalyticWavelet::morse(1.0, 1.0).unwrap();
    let r = mean_law_check(&m, &w, &[Nonlinearity::Power(2.0)], 1, N, SEED, laguerre_coefficient).unwrap();
    let s = r[0].sigma;
    assert!((r[0].predicted_var - 4.0 * s.powi(4)).abs() < 1e-14);
    assert!(r[0].var_z().abs() < 3.0, "{:?}", r[0]);
    assert!((r[0].predicted_mean - rayleigh_mean(Nonlinearity::Power(2.0), s)).abs() < 1e-14);
}
