//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::f64::consts::{LN_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use wavechaos::bounds::{
    modulus_variance_2d, stirling_bound_holds, truncation_order, u_cross_covariance, wasserstein_lower_bound,
};
use wavechaos::chaos::{
    b_hypergeometric, check_b_identity, check_laguerre_closed_forms, laguerre_coefficient, theta1, Nonlinearity,
    EULER_GAMMA,
};
use wavechaos::gpsim::{box_muller, derive_seed};
use wavechaos::harness::{
    empirical_kolmogorov_1d, empirical_w1_1d, mean_law_check, rayleigh_mean, run_clt_experiment, CltConfig,
    CltReport,
};
use wavechaos::spectra::{Profile, SpectralModel};
use wavechaos::transform::Coordinate;
use wavechaos::wavelets::{sigma_j, AnalyticWavelet, LowPass};

/// Committed master seed for the Monte Carlo criteria.
const SEED: u64 = 20_261_018;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn ou() -> SpectralModel {
    SpectralModel::ornstein_uhlenbeck(1.0).unwrap()
}

fn long_memory() -> SpectralModel {
    SpectralModel::power_law(0.5, 1.0, Profile::Exponential { scale: 1.0 }).unwrap()
}

fn default_wavelet() -> AnalyticWavelet {
    AnalyticWavelet::morse(3.0, 1.0).unwrap()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let failures = check_b_identity(b_hypergeometric);
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 30.0;
    let detail = match failures.first() {
        None => format!("ℓ ∈ {{2,4,6,8}}, all N: three evaluators agree exactly ({secs:.2} s, limit 30 s)"),
        Some(f) => format!("{} mismatches, first {}", failures.len(), f.witness),
    };
    verdict(pass, detail)
}

fn criterion_2() -> Verdict {
    let failures = check_laguerre_closed_forms(laguerre_coefficient);
    let p2 = Nonlinearity::Power(2.0);
    let mut printed = laguerre_coefficient(p2, 0) == 2.0 && laguerre_coefficient(p2, 1) == -2.0;
    printed &= (2..=20).all(|k| laguerre_coefficient(p2, k) == 0.0);
    let log = Nonlinearity::Log;
    printed &= laguerre_coefficient(log, 0) == 0.5 * LN_2 - 0.5 * EULER_GAMMA;
    printed &= (1..=20).all(|k| laguerre_coefficient(log, k) == -1.0 / (2 * k) as f64);
    let detail = match failures.first() {
        None => format!("closed form = quadrature within 1e-8 for k ≤ 20 over 5 families; printed values exact: {printed}"),
        Some(f) => format!("{} mismatches, first {}", failures.len(), f.witness),
    };
    verdict(failures.is_empty() && printed, detail)
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let w = AnalyticWavelet::morse(1.0, 1.0).unwrap();
    let family = [Nonlinearity::Power(1.0), Nonlinearity::Power(2.0), Nonlinearity::Log];
    let mut worst: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, model) in [("OU", ou()), ("power-law β=0.5", long_memory())] {
        for j in [0, 2] {
            let seed = derive_seed(SEED, 100 + j as u64 + if name == "OU" { 0 } else { 10 });
            match mean_law_check(&model, &w, &family, j, 10_000, seed, laguerre_coefficient) {
                Ok(reports) => {
                    for r in reports {
                        let z = r.mean_z();
                        worst = worst.max(z.abs());
                        let gap = (r.predicted_mean - rayleigh_mean(r.nonlinearity, r.sigma)).abs();
                        oracle_gap = oracle_gap.max(gap);
                        if z.abs() >= 3.0 || gap > 1e-12 {
                            pass = false;
                            notes.push(format!("{name} j={j} {}: z={z:.2}", r.nonlinearity.label()));
                        }
                    }
                }
                Err(e) => {
                    pass = false;
                    notes.push(format!("{name} j={j}: {e}"));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    verdict(
        pass,
        format!(
            "12 mean laws, max |z| = {worst:.2} (limit 3), Rayleigh oracle gap {oracle_gap:.1e}, {secs:.1} s (limit 120 s){}",
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    )
}

fn criterion_4() -> Verdict {
    let w = default_wavelet();
    let m = ou();
    let s2 = sigma_j(&w, &m, 0).unwrap().powi(2);
    let p1 = u_cross_covariance(&w, &m, Nonlinearity::Power(1.0), 0, 0, 0.0, 40).unwrap();
    let p2 = u_cross_covariance(&w, &m, Nonlinearity::Power(2.0), 0, 0, 0.0, 2).unwrap();
    let rayleigh = s2 * (2.0 - PI / 2.0);
    let isserlis = 4.0 * s2 * s2;
    let q1 = modulus_variance_2d(Nonlinearity::Power(1.0), s2.sqrt()).unwrap();
    let q2 = modulus_variance_2d(Nonlinearity::Power(2.0), s2.sqrt()).unwrap();
    let e1 = (p1 - rayleigh).abs();
    let e2 = (p2 - isserlis).abs() / isserlis;
    let pass = e1 < 1e-4 && e2 < 1e-13 && (p1 - q1).abs() < 1e-4 && (p2 - q2).abs() < 1e-4;
    verdict(
        pass,
        format!(
            "power:1 K=40 |series − σ²(2−π/2)| = {e1:.1e}; power:2 K=2 rel. error {e2:.1e}; vs 2-d quadrature {:.1e}, {:.1e}",
            (p1 - q1).abs(),
            (p2 - q2).abs()
        ),
    )
}

fn clt_run() -> (CltReport, Duration) {
    let cfg = CltConfig {
        model: ou(),
        wavelet: default_wavelet(),
        lowpass: LowPass::Gaussian,
        nonlinearities: vec![Nonlinearity::Power(1.0), Nonlinearity::Power(2.0)],
        coords: vec![Coordinate { j: 0, t: 0.0 }],
        j_list: vec![4, 6, 8, 10],
        n_paths: 10_000,
        seed: SEED,
        eps: 0.1,
        kappa_order: 40,
    };
    let start = Instant::now();
    let report = run_clt_experiment(&cfg).expect("CLT experiment");
    (report, start.elapsed())
}

fn criterion_5(report: &CltReport, elapsed: Duration) -> Verdict {
    let row = report.row(Nonlinearity::Power(2.0), 10).unwrap();
    if let Some(e) = &row.error {
        return verdict(false, e.clone());
    }
    let rel = (row.cov[0] - row.predicted_cov[0]) / row.predicted_cov[0];
    let secs = elapsed.as_secs_f64();
    verdict(
        rel.abs() < 0.10 && secs < 600.0,
        format!(
            "power:2, J=10, 10⁴ paths: Var F = {:.5}, κ prediction {:.5}, rel. diff {:+.2}% (limit 10%); experiment {secs:.0} s (limit 600 s)",
            row.cov[0],
            row.predicted_cov[0],
            100.0 * rel
        ),
    )
}

fn inversions(d: &[f64]) -> usize {
    d.windows(2).filter(|w| w[1] >= w[0]).count()
}

fn criterion_6(report: &CltReport) -> Verdict {
    let p1 = Nonlinearity::Power(1.0);
    let p2 = Nonlinearity::Power(2.0);
    let js = [4u32, 6, 8, 10];
    let d1: Vec<f64> = js.iter().map(|&j| report.row(p1, j).unwrap().d_kol).collect();
    let d2: Vec<f64> = js.iter().map(|&j| report.row(p2, j).unwrap().d_kol).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    let slope = |a| report.kolmogorov_slope(a).map(|s| format!("{s:.3}")).unwrap_or_else(|| "n/a".into());
    let mut decreasing = inversions(&d1) == 0;
    let mut rerun = String::new();
    if inversions(&d1) == 1 {
        // A single Monte Carlo inversion is allowed once; four times the paths must restore order.
        let cfg = CltConfig {
            model: ou(),
            wavelet: default_wavelet(),
            lowpass: LowPass::Gaussian,
            nonlinearities: vec![p1],
            coords: vec![Coordinate { j: 0, t: 0.0 }],
            j_list: js.to_vec(),
            n_paths: 40_000,
            seed: derive_seed(SEED, 4),
            eps: 0.1,
            kappa_order: 40,
        };
        let start = Instant::now();
        match run_clt_experiment(&cfg) {
            Ok(r) => {
                let d: Vec<f64> = js.iter().map(|&j| r.row(p1, j).unwrap().d_kol).collect();
                decreasing = inversions(&d) == 0;
                rerun = format!(
                    "; one inversion flagged, rerun at 4·10⁴ paths: [{}] decreasing={decreasing} ({:.0} s)",
                    fmt(&d),
                    start.elapsed().as_secs_f64()
                );
            }
            Err(e) => rerun = format!("; rerun failed: {e}"),
        }
    }
    let small = d1[3] < 0.05;
    let ordered = d2[3] < d1[3];
    verdict(
        decreasing && small && ordered,
        format!(
            "d_Kol power:1 over J=4,6,8,10: [{}], {} inversion(s){rerun}; J=10 < 0.05: {small}; power:2: [{}], J=10 below power:1: {ordered}; fitted slopes (diagnostic) {} / {}",
            fmt(&d1),
            inversions(&d1),
            fmt(&d2),
            slope(p1),
            slope(p2)
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut notes = Vec::new();
    let t1 = theta1(1).unwrap();
    let t2 = theta1(2).unwrap();
    if t1 != 0.0 || (t2 - 2f64.sqrt()).abs() > 1e-12 {
        notes.push(format!("Θ₁(1) = {t1}, Θ₁(2) = {t2}"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ell in 10..=40 {
        let r = theta1(ell + 1).unwrap() / theta1(ell).unwrap();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if !(lo > 2.5 && hi <= 3.0) {
        notes.push(format!("Θ₁ ratio range [{lo}, {hi}]"));
    }
    if !(2..=40).step_by(2).all(stirling_bound_holds) {
        notes.push("Stirling bound violated".into());
    }
    if truncation_order(40) != 12 {
        notes.push(format!("K(40) = {}", truncation_order(40)));
    }
    let w6 = wasserstein_lower_bound(Nonlinearity::Power(2.0), 1.0, 2.0).unwrap();
    if (w6 - 6.0).abs() > 1e-12 {
        notes.push(format!("power:2 bound {w6}"));
    }
    let w = AnalyticWavelet::morse(1.0, 1.0).unwrap();
    let (b1, b2) = (0.5, 0.2);
    let m1 = SpectralModel::power_law(b1, 1.0, Profile::Exponential { scale: 1.0 }).unwrap();
    let m2 = SpectralModel::power_law(b2, 1.0, Profile::Exponential { scale: 1.0 }).unwrap();
    let j = 20;
    let bound = wasserstein_lower_bound(
        Nonlinearity::Log,
        sigma_j(&w, &m1, j).unwrap(),
        sigma_j(&w, &m2, j).unwrap(),
    )
    .unwrap();
    let slope = 2.0 / LN_2 * bound / j as f64;
    let rel = (slope - (b1 - b2)).abs() / (b1 - b2);
    if rel >= 0.05 {
        notes.push(format!("log slope {slope} vs {}", b1 - b2));
    }
    verdict(
        notes.is_empty(),
        format!(
            "Θ₁(1)=0, Θ₁(2)=√2, ratio range ({lo:.4}, {hi:.4}], Stirling ℓ ≤ 40, K(40)=12, bound 6, log slope {slope:.4} vs 0.3 ({:.1}% off){}",
            100.0 * rel,
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    )
}

fn criterion_8() -> Verdict {
    let n = 10_000usize;
    let reps = 200u64;
    let mut dk = Vec::new();
    let mut w1 = Vec::new();
    for r in 0..reps {
        let seed = derive_seed(SEED, 1_000 + r);
        let mut x = Vec::with_capacity(n);
        for i in 0..n / 2 {
            let (a, b) = box_muller(derive_seed(seed, 2 * i as u64), derive_seed(seed, 2 * i as u64 + 1));
            x.push(a);
            x.push(b);
        }
        dk.push(empirical_kolmogorov_1d(&x, 0.0, 1.0).unwrap());
        w1.push(empirical_w1_1d(&x, 0.0, 1.0).unwrap());
    }
    dk.sort_by(f64::total_cmp);
    // Nearest-rank 99th percentile.
    let rank = (0.99 * reps as f64).ceil() as usize;
    let p99 = dk[rank - 1];
    let w_max = w1.iter().cloned().fold(0.0, f64::max);
    let root = (n as f64).sqrt();
    let mean = dk.iter().sum::<f64>() / reps as f64 * root;
    verdict(
        p99 < 1.63 / root && w_max < 5.0 / root,
        format!(
            "200 × N=10⁴: 99th pct √N·d_Kol = {:.4} (limit 1.63), mean {mean:.4} (asymptotic 0.8687), max √N·W₁ = {:.4} (limit 5)",
            p99 * root,
            w_max * root
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wavechaos"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .arg("--threads")
        .arg(threads)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|r| r.filter_map(|e| e.ok().map(|e| e.path())).collect())
        .unwrap_or_default();
    v.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    v.sort();
    v
}

fn criterion_9() -> Verdict {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let cfg = root.join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 7\n\n[experiment]\nnonlinearities = [\"power:1\", \"power:2\", \"log\"]\nj = [0, 1]\nt = [0.0, 1.0]\nJ = [2, 3]\nn_paths = 300\nK = 20\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let commands: [&[&str]; 8] = [
        &["coeffs"],
        &["verify-identities"],
        &["sigma"],
        &["simulate", "--dump-paths"],
        &["transform", "--J", "3", "--A", "log"],
        &["covlimit"],
        &["rates"],
        &["clt", "--dump-paths"],
    ];
    let mut compared = 0;
    let mut problems = Vec::new();
    for (k, cmd) in commands.iter().enumerate() {
        let mut args = cmd.to_vec();
        args.extend(["--config", cfg]);
        let a = root.join(format!("{k}-a"));
        let b = root.join(format!("{k}-b"));
        // Different worker counts on the two runs.
        if let Err(e) = run_cli(&a, &args, "1").and_then(|_| run_cli(&b, &args, "3")) {
            problems.push(e);
            continue;
        }
        let fa = csv_files(&a);
        let fb = csv_files(&b);
        if fa.is_empty() || fa.len() != fb.len() {
            problems.push(format!("{}: file sets differ", cmd[0]));
            continue;
        }
        for (x, y) in fa.iter().zip(&fb) {
            compared += 1;
            if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                problems.push(format!("{} differs", x.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "8 subcommands run twice (1 and 3 threads): {compared} CSV files compared byte for byte{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn report(id: u32, title: &str, v: &Verdict) {
    println!("{} [{id}] {title}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
}

fn main() {
    // `cargo test -- --list` and similar harness queries carry arguments.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut all = true;
    let mut emit = |id, title, v: Verdict| {
        all &= v.pass;
        report(id, title, &v);
    };
    emit(1, "B identity, exact rationals", criterion_1());
    emit(2, "Laguerre coefficients, closed form vs quadrature", criterion_2());
    emit(3, "mean laws of U by Monte Carlo", criterion_3());
    emit(4, "covariance series vs Rayleigh/Isserlis and 2-d quadrature", criterion_4());
    let (clt, elapsed) = clt_run();
    emit(5, "sample Var F vs κ limit", criterion_5(&clt, elapsed));
    emit(6, "Kolmogorov decay in J and regime ordering", criterion_6(&clt));
    emit(7, "bound machinery", criterion_7());
    emit(8, "estimator calibration", criterion_8());
    emit(9, "byte-identical CSV output", criterion_9());
    if !all {
        std::process::exit(1);
    }
}
