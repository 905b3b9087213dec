mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use wavechaos::bounds::{kappa_matrix, kolmogorov_rate, rate_curve, truncation_order};
use wavechaos::chaos::{ChaosTable, Nonlinearity};
use wavechaos::gpsim::{build_grid, derive_seed, grid_for_span, Synthesizer};
use wavechaos::harness::{run_clt_experiment, run_identity_suite, CltConfig};
use wavechaos::transform::{analytic_mean_s, analytic_mean_u, apply_nonlinearity, MovingAverage};
use wavechaos::wavelets::{sigma_j, LowPass};

use crate::config::{parse_config, RunConfig};

#[derive(Parser)]
#[command(name = "wavechaos", version, about = "Wavelet-modulus transforms of Gaussian processes: coefficients, simulation and CLT checks")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 picks automatically. Overrides WAVECHAOS_THREADS.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Also write sample paths (simulate) or F samples (clt).
    #[arg(long, global = true)]
    dump_paths: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chaos coefficient tables per nonlinearity.
    Coeffs,
    /// Exact identity suites; exit code 3 on failure.
    VerifyIdentities,
    /// Per-scale standard deviations σ_j.
    Sigma,
    /// Synthesize paths and record values at the grid centre.
    Simulate,
    /// U and its moving average S along one path.
    Transform(TransformArgs),
    /// Limit covariance of F.
    Covlimit,
    /// Rate envelopes per J.
    Rates,
    /// Monte Carlo CLT experiment.
    Clt,
}

#[derive(Args)]
struct TransformArgs {
    /// Scale j.
    #[arg(long = "j", allow_negative_numbers = true)]
    j: Option<i32>,
    /// Averaging scale J.
    #[arg(long = "J")]
    big_j: Option<i32>,
    /// Nonlinearity: power:<nu> or log.
    #[arg(long = "A")]
    a: Option<String>,
    /// gaussian, laplace or cauchy.
    #[arg(long)]
    lowpass: Option<String>,
}

enum Failure {
    Validation(String),
    Numeric(String),
    Acceptance(String),
}

impl From<wavechaos::Error> for Failure {
    fn from(e: wavechaos::Error) -> Self {
        match e {
            wavechaos::Error::Numeric { .. } => Failure::Numeric(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o error: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn slug(a: Nonlinearity) -> String {
    a.label().replace(':', "_")
}

struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &[String]) -> std::io::Result<Csv> {
        let path = dir.join(name);
        let mut out = BufWriter::new(File::create(&path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Csv { path, out })
    }

    fn row(&mut self, cells: &[String]) -> std::io::Result<()> {
        writeln!(self.out, "{}", cells.join(","))
    }

    fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()?;
        println!("wrote {}", self.path.display());
        Ok(())
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn require_seed(cfg: &RunConfig) -> Result<u64, Failure> {
    cfg.seed
        .ok_or_else(|| Failure::Validation("seed: required for commands that draw random numbers".into()))
}

fn coeffs(cfg: &RunConfig, out: &Path) -> Outcome {
    let mut summary = Csv::create(out, "coeffs_summary.csv", &header(&["nonlinearity", "K", "tail_sq", "tail_remainder", "stein_series"]))?;
    for &a in &cfg.nonlinearities {
        let t = ChaosTable::build(a, cfg.k_max)?;
        if let Some(w) = &t.truncation_warning {
            eprintln!("warning: {w}");
        }
        let mut csv = Csv::create(
            out,
            &format!("coeffs_{}.csv", slug(a)),
            &header(&["ell", "c_a", "c_ell", "ell_factorial_c_ell_sq", "stein_term"]),
        )?;
        let c0 = t.c_a[0];
        csv.row(&["0".into(), num(c0), num(c0), num(c0 * c0), num(c0.abs())])?;
        for (i, ell) in t.orders().enumerate() {
            csv.row(&[
                ell.to_string(),
                num(t.c_a[(ell / 2) as usize]),
                num(t.c_ell[i]),
                num(t.ell_factorial_c_sq[i]),
                num(t.stein_terms[i]),
            ])?;
        }
        csv.finish()?;
        summary.row(&[a.label(), t.k_max.to_string(), num(t.tail_sq), num(t.tail_remainder), num(t.stein_series)])?;
    }
    summary.finish()?;
    Ok(())
}

fn verify_identities(out: &Path) -> Outcome {
    let report = run_identity_suite();
    let mut csv = Csv::create(out, "identities.csv", &header(&["suite", "status", "failures", "witness"]))?;
    for (name, failures) in &report.suites {
        let status = if failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{status} {name}");
        for f in failures {
            println!("  {}: {}", f.check, f.witness);
        }
        let witness = failures.first().map(|f| format!("\"{}\"", f.witness.replace('"', "'"))).unwrap_or_default();
        csv.row(&[name.to_string(), status.into(), failures.len().to_string(), witness])?;
    }
    csv.finish()?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Acceptance("identity suite failed".into()))
    }
}

fn sigma(cfg: &RunConfig, out: &Path) -> Outcome {
    let mut cols = header(&["j", "sigma", "sigma_sq"]);
    for &a in &cfg.nonlinearities {
        cols.push(format!("mean_u_{}", slug(a)));
        cols.push(format!("mean_s_{}", slug(a)));
    }
    let mut csv = Csv::create(out, "sigma.csv", &cols)?;
    let mut js = cfg.j_list.clone();
    js.sort_unstable();
    js.dedup();
    for j in js {
        let s = sigma_j(&cfg.wavelet, &cfg.model, j)?;
        let mut row = vec![j.to_string(), num(s), num(s * s)];
        for &a in &cfg.nonlinearities {
            row.push(num(analytic_mean_u(a, s)));
            row.push(num(analytic_mean_s(a, s, cfg.lowpass)));
        }
        csv.row(&row)?;
    }
    csv.finish()?;
    Ok(())
}

fn scale_set(cfg: &RunConfig) -> Vec<i32> {
    let mut js = cfg.j_list.clone();
    js.sort_unstable();
    js.dedup();
    js
}

fn simulate(cfg: &RunConfig, out: &Path, dump: bool) -> Outcome {
    let seed = require_seed(cfg)?;
    let js = scale_set(cfg);
    let grid_cfg = match cfg.grid {
        Some(g) => g,
        None => grid_for_span(&cfg.model, &cfg.wavelet, &js, 0.0)?,
    };
    let synth = Synthesizer::new(&cfg.wavelet, build_grid(&cfg.model, &cfg.wavelet, &js, grid_cfg)?, &js)?;
    let rows: Vec<(u64, f64, Vec<(f64, f64)>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let b = synth.synthesize(s, true);
            let c = b.centre_index();
            (s, b.x[c], b.w.iter().map(|(_, v)| (v[c].re, v[c].im)).collect())
        })
        .collect();
    let mut cols = header(&["path", "seed", "x"]);
    for j in &js {
        cols.push(format!("re_w_{j}"));
        cols.push(format!("im_w_{j}"));
    }
    let mut csv = Csv::create(out, "simulate.csv", &cols)?;
    for (i, (s, x, w)) in rows.iter().enumerate() {
        let mut row = vec![i.to_string(), s.to_string(), num(*x)];
        for (re, im) in w {
            row.push(num(*re));
            row.push(num(*im));
        }
        csv.row(&row)?;
    }
    csv.finish()?;

    let n = rows.len() as f64;
    let var = |f: &dyn Fn(&(u64, f64, Vec<(f64, f64)>)) -> f64| {
        let m = rows.iter().map(f).sum::<f64>() / n;
        rows.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let mut summary = Csv::create(out, "simulate_summary.csv", &header(&["quantity", "sample_variance", "predicted"]))?;
    summary.row(&["x".into(), num(var(&|r| r.1)), num(cfg.model.covariance(0.0)?)])?;
    for (k, j) in js.iter().enumerate() {
        let s2 = sigma_j(&cfg.wavelet, &cfg.model, *j)?.powi(2);
        summary.row(&[format!("re_w_{j}"), num(var(&|r| r.2[k].0)), num(s2)])?;
        summary.row(&[format!("im_w_{j}"), num(var(&|r| r.2[k].1)), num(s2)])?;
    }
    summary.finish()?;

    if dump {
        let b = synth.synthesize(derive_seed(seed, 0), true);
        let path = out.join("path_0.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        b.write_csv(&mut w)?;
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn transform(cfg: &RunConfig, out: &Path, args: &TransformArgs) -> Outcome {
    let seed = require_seed(cfg)?;
    let j = args.j.unwrap_or(cfg.j_list[0]);
    let big_j = args.big_j.unwrap_or(cfg.big_j_list[0] as i32);
    let a = match &args.a {
        Some(s) => Nonlinearity::parse(s)?,
        None => cfg.nonlinearities[0],
    };
    let lp = match &args.lowpass {
        Some(s) => LowPass::parse(s).ok_or_else(|| {
            Failure::Validation(format!(
                "--lowpass: unknown kind '{s}'; expected one of {}",
                LowPass::ALL.map(|l| l.name()).join(", ")
            ))
        })?,
        None => cfg.lowpass,
    };
    let grid_cfg = match cfg.grid {
        Some(g) => g,
        None => {
            let dt = wavechaos::gpsim::default_dt(&cfg.model, &cfg.wavelet, &[j])?;
            let ma = MovingAverage::new(lp, big_j, dt)?;
            grid_for_span(&cfg.model, &cfg.wavelet, &[j], 2.0 * (ma.half_width() + 1) as f64 * dt)?
        }
    };
    let synth = Synthesizer::new(&cfg.wavelet, build_grid(&cfg.model, &cfg.wavelet, &[j], grid_cfg)?, &[j])?;
    let ma = MovingAverage::new(lp, big_j, grid_cfg.dt)?;
    let b = synth.synthesize(derive_seed(seed, 0), false);
    let w = &b.w[0].1;
    let (u, invalid) = apply_nonlinearity(a, w);
    if invalid > 0 {
        eprintln!("warning: {invalid} invalid U samples");
    }
    let mut csv = Csv::create(out, "transform.csv", &header(&["t", "re_w", "im_w", "u", "s"]))?;
    let mut written = 0;
    for i in b.valid.clone() {
        if let Ok(s) = ma.at(&u, &b.valid, i) {
            csv.row(&[num(b.time(i)), num(w[i].re), num(w[i].im), num(u[i]), num(s)])?;
            written += 1;
        }
    }
    csv.finish()?;
    if written == 0 {
        return Err(Failure::Validation(format!(
            "grid of {} samples leaves no room for the J = {big_j} window; enlarge [grid] n_time",
            grid_cfg.n_time
        )));
    }
    Ok(())
}

fn covlimit(cfg: &RunConfig, out: &Path) -> Outcome {
    let coords = cfg.coords();
    for &a in &cfg.nonlinearities {
        let order = a.finite_chaos_order().unwrap_or(cfg.k_max).max(2);
        let k = kappa_matrix(&cfg.wavelet, &cfg.model, a, &coords, order, cfg.lowpass)?;
        let mut csv = Csv::create(
            out,
            &format!("covlimit_{}.csv", slug(a)),
            &header(&["m", "n", "j_m", "t_m", "j_n", "t_n", "kappa", "phase", "limit_cov", "residual"]),
        )?;
        for m in 0..coords.len() {
            for n in 0..coords.len() {
                csv.row(&[
                    m.to_string(),
                    n.to_string(),
                    coords[m].j.to_string(),
                    num(coords[m].t),
                    coords[n].j.to_string(),
                    num(coords[n].t),
                    num(k.kappa[(m, n)]),
                    num(k.phase[(m, n)]),
                    num(k.limit_cov[(m, n)]),
                    num(k.residuals[(m, n)]),
                ])?;
            }
        }
        csv.finish()?;
        println!("{}: minimum eigenvalue {:?}", a.label(), k.min_eigenvalue);
    }
    Ok(())
}

fn rates(cfg: &RunConfig, out: &Path) -> Outcome {
    for &a in &cfg.nonlinearities {
        let curve = rate_curve(a, &cfg.big_j_list, cfg.eps)?;
        let kol = kolmogorov_rate(a, &cfg.big_j_list, cfg.eps)?;
        if let Some(order) = a.finite_chaos_order() {
            eprintln!(
                "note: {} is a finite chaos; K is pinned to {order} and does not follow the K(J) schedule",
                a.label()
            );
        } else if let Some(j) = cfg.big_j_list.iter().find(|&&j| truncation_order(j) < 2) {
            eprintln!("note: K(J) is 0 for J = {j}; K = 2 is used for such rows");
        }
        let mut csv = Csv::create(
            out,
            &format!("rates_{}.csv", slug(a)),
            &header(&["J", "K", "tail_term", "stein_term", "envelope", "kolmogorov_envelope", "regime"]),
        )?;
        for (r, k) in curve.rows.iter().zip(&kol.rows) {
            csv.row(&[
                r.big_j.to_string(),
                r.k.to_string(),
                num(r.tail_term),
                num(r.stein_term),
                num(r.envelope),
                num(k.envelope),
                curve.regime.name().into(),
            ])?;
        }
        csv.finish()?;
    }
    Ok(())
}

fn clt(cfg: &RunConfig, out: &Path, dump: bool) -> Outcome {
    let seed = require_seed(cfg)?;
    let coords = cfg.coords();
    let d = coords.len();
    let ccfg = CltConfig {
        model: cfg.model,
        wavelet: cfg.wavelet,
        lowpass: cfg.lowpass,
        nonlinearities: cfg.nonlinearities.clone(),
        coords: coords.clone(),
        j_list: cfg.big_j_list.clone(),
        n_paths: cfg.n_paths,
        seed,
        eps: cfg.eps,
        kappa_order: cfg.k_max,
    };
    let report = run_clt_experiment(&ccfg)?;
    let mut cols = header(&["nonlinearity", "J", "n_paths", "n_time", "dt"]);
    for m in 0..d {
        cols.push(format!("mean_{m}"));
        cols.push(format!("mean_se_{m}"));
    }
    for m in 0..d {
        for n in m..d {
            cols.push(format!("cov_{m}{n}"));
        }
    }
    for m in 0..d {
        for n in m..d {
            cols.push(format!("predicted_cov_{m}{n}"));
        }
    }
    cols.extend(header(&["d_kol", "d_kol_centred", "w1", "envelope", "invalid", "status"]));
    let mut csv = Csv::create(out, "report.csv", &cols)?;
    let mut any_failed = false;
    for row in &report.rows {
        let mut cells = vec![
            row.nonlinearity.label(),
            row.big_j.to_string(),
            row.n_paths.to_string(),
            row.n_time.to_string(),
            num(row.dt),
        ];
        let get = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(f64::NAN);
        for m in 0..d {
            cells.push(num(get(&row.mean, m)));
            cells.push(num(get(&row.mean_se, m)));
        }
        for src in [&row.cov, &row.predicted_cov] {
            for m in 0..d {
                for n in m..d {
                    cells.push(num(get(src, m * d + n)));
                }
            }
        }
        cells.extend([
            num(row.d_kol),
            num(row.d_kol_centred),
            num(row.w1),
            num(row.envelope),
            row.invalid.to_string(),
            match &row.error {
                None => "ok".to_string(),
                Some(e) => {
                    any_failed = true;
                    format!("\"{}\"", e.replace('"', "'"))
                }
            },
        ]);
        csv.row(&cells)?;
    }
    csv.finish()?;
    let mut slopes = Csv::create(out, "slopes.csv", &header(&["nonlinearity", "fitted_log_slope_d_kol"]))?;
    for &a in &cfg.nonlinearities {
        let s = report.kolmogorov_slope(a).unwrap_or(f64::NAN);
        println!("{}: fitted log-log slope of d_Kol in J = {s:.4} (diagnostic)", a.label());
        slopes.row(&[a.label(), num(s)])?;
    }
    slopes.finish()?;
    if dump {
        for (row, pop) in report.rows.iter().zip(&report.samples) {
            if pop.is_empty() {
                continue;
            }
            let cols: Vec<String> = (0..d).map(|m| format!("f_{m}")).collect();
            let mut s = Csv::create(out, &format!("samples_J{}_{}.csv", row.big_j, slug(row.nonlinearity)), &cols)?;
            for p in pop {
                s.row(&p.iter().map(|v| num(*v)).collect::<Vec<_>>())?;
            }
            s.finish()?;
        }
    }
    if any_failed {
        for row in report.rows.iter().filter(|r| r.error.is_some()) {
            eprintln!("J = {} {}: {}", row.big_j, row.nonlinearity.label(), row.error.as_deref().unwrap_or(""));
        }
        return Err(Failure::Numeric("some rows did not complete".into()));
    }
    Ok(())
}

fn configure_threads(flag: Option<usize>) -> Outcome {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("WAVECHAOS_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Failure::Validation(format!("WAVECHAOS_THREADS: expected a non-negative integer, got '{v}'"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Numeric(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    configure_threads(cli.threads)?;
    let cfg = match &cli.config {
        Some(p) => parse_config(p).map_err(|e| Failure::Validation(e.to_string()))?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Coeffs => coeffs(&cfg, out),
        Command::VerifyIdentities => verify_identities(out),
        Command::Sigma => sigma(&cfg, out),
        Command::Simulate => simulate(&cfg, out, cli.dump_paths),
        Command::Transform(args) => transform(&cfg, out, args),
        Command::Covlimit => covlimit(&cfg, out),
        Command::Rates => rates(&cfg, out),
        Command::Clt => clt(&cfg, out, cli.dump_paths),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
