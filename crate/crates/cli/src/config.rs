//! Run configuration: a TOML file with dotted sections.
//!
//! ```toml
//! seed = 20261018
//!
//! [model]
//! kind = "ou"              # "ou" | "power-law"
//! c = 1.0                  # ou
//! beta = 0.5               # power-law, in (0, 1]
//! cx0 = 1.0                # power-law
//! profile = "exponential"  # "constant" | "exponential" | "rational"
//! profile_scale = 1.0
//! mean = 0.0
//!
//! [wavelet]
//! alpha = 3.0
//! gamma = 1.0
//!
//! [lowpass]
//! kind = "gaussian"        # "gaussian" | "laplace" | "cauchy"
//!
//! [experiment]
//! nonlinearities = ["power:1"]
//! j = [0]
//! t = [0.0]
//! J = [4, 6, 8, 10]
//! n_paths = 10000
//! eps = 0.1
//! K = 40
//!
//! [grid]                   # optional; simulate and transform only
//! n_time = 4096
//! dt = 0.125
//! ```

use std::path::Path;

use toml::{Table, Value};
use wavechaos::chaos::Nonlinearity;
use wavechaos::gpsim::GridConfig;
use wavechaos::harness::{MAX_BIG_J, MIN_PATHS};
use wavechaos::spectra::{Profile, SpectralModel};
use wavechaos::transform::Coordinate;
use wavechaos::wavelets::{AnalyticWavelet, LowPass};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub model: SpectralModel,
    pub wavelet: AnalyticWavelet,
    pub lowpass: LowPass,
    pub nonlinearities: Vec<Nonlinearity>,
    pub j_list: Vec<i32>,
    pub t_list: Vec<f64>,
    pub big_j_list: Vec<u32>,
    pub n_paths: usize,
    pub eps: f64,
    pub k_max: u32,
    pub grid: Option<GridConfig>,
}

impl RunConfig {
    pub fn coords(&self) -> Vec<Coordinate> {
        self.j_list
            .iter()
            .zip(&self.t_list)
            .map(|(&j, &t)| Coordinate { j, t })
            .collect()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            model: SpectralModel::ornstein_uhlenbeck(1.0).unwrap(),
            wavelet: AnalyticWavelet::morse(3.0, 1.0).unwrap(),
            lowpass: LowPass::Gaussian,
            nonlinearities: vec![Nonlinearity::Power(1.0)],
            j_list: vec![0],
            t_list: vec![0.0],
            big_j_list: vec![4, 6, 8, 10],
            n_paths: 10_000,
            eps: 0.1,
            k_max: 40,
            grid: None,
        }
    }
}

/// Every problem found, each prefixed with its key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

struct Reader<'a> {
    errors: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn err(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str, keys: &[&str]) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                for k in t.keys() {
                    if !keys.contains(&k.as_str()) {
                        self.err(&format!("{name}.{k}"), format!("unknown key; expected one of {}", keys.join(", ")));
                    }
                }
                Some(t)
            }
            Some(_) => {
                self.err(name, "expected a table");
                None
            }
        }
    }

    fn float(&mut self, t: Option<&Table>, sec: &str, key: &str, default: f64) -> f64 {
        match t.and_then(|t| t.get(key)) {
            None => default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(_) => {
                self.err(&format!("{sec}.{key}"), "expected a number");
                default
            }
        }
    }

    fn positive(&mut self, t: Option<&Table>, sec: &str, key: &str, default: f64) -> f64 {
        let v = self.float(t, sec, key, default);
        if !(v > 0.0 && v.is_finite()) {
            self.err(&format!("{sec}.{key}"), format!("must be positive, got {v}"));
            return default;
        }
        v
    }

    fn int(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<i64> {
        match t.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::Integer(v)) => Some(*v),
            Some(_) => {
                self.err(&format!("{sec}.{key}"), "expected an integer");
                None
            }
        }
    }

    fn string(&mut self, t: Option<&Table>, sec: &str, key: &str) -> Option<String> {
        match t.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.err(&format!("{sec}.{key}"), "expected a string");
                None
            }
        }
    }

    fn array<'t>(&mut self, t: Option<&'t Table>, sec: &str, key: &str) -> Option<&'t Vec<Value>> {
        match t.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::Array(a)) => Some(a),
            Some(_) => {
                self.err(&format!("{sec}.{key}"), "expected an array");
                None
            }
        }
    }
}

const ROOT_KEYS: [&str; 6] = ["seed", "model", "wavelet", "lowpass", "experiment", "grid"];

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigErrors> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {}", e.message())]))?;
    let mut errors = Vec::new();
    let mut r = Reader { errors: &mut errors };
    let mut cfg = RunConfig::default();

    for k in root.keys() {
        if !ROOT_KEYS.contains(&k.as_str()) {
            r.err(k, format!("unknown key; expected one of {}", ROOT_KEYS.join(", ")));
        }
    }
    match root.get("seed") {
        None => {}
        Some(Value::Integer(v)) if *v >= 0 => cfg.seed = Some(*v as u64),
        Some(_) => r.err("seed", "expected a non-negative integer"),
    }

    let m = r.section(&root, "model", &["kind", "c", "beta", "cx0", "profile", "profile_scale", "mean"]);
    let kind = r.string(m, "model", "kind").unwrap_or_else(|| "ou".into());
    let mean = r.float(m, "model", "mean", 0.0);
    let model = match kind.as_str() {
        "ou" => {
            let c = r.positive(m, "model", "c", 1.0);
            SpectralModel::ornstein_uhlenbeck(c).map_err(|e| r.err("model.c", e)).ok()
        }
        "power-law" => {
            let beta = r.float(m, "model", "beta", 0.5);
            let cx0 = r.positive(m, "model", "cx0", 1.0);
            let scale = r.positive(m, "model", "profile_scale", 1.0);
            let profile = match r.string(m, "model", "profile").as_deref() {
                None | Some("exponential") => Some(Profile::Exponential { scale }),
                Some("constant") => Some(Profile::Constant),
                Some("rational") => Some(Profile::Rational { scale }),
                Some(other) => {
                    r.err("model.profile", format!("unknown profile '{other}'; expected constant, exponential or rational"));
                    None
                }
            };
            profile.and_then(|p| SpectralModel::power_law(beta, cx0, p).map_err(|e| r.err("model.beta", e)).ok())
        }
        other => {
            r.err("model.kind", format!("unknown kind '{other}'; expected ou or power-law"));
            None
        }
    };
    if let Some(model) = model {
        cfg.model = model.with_mean(mean);
    }

    let w = r.section(&root, "wavelet", &["alpha", "gamma"]);
    let alpha = r.positive(w, "wavelet", "alpha", 3.0);
    let gamma = r.positive(w, "wavelet", "gamma", 1.0);
    if let Ok(wv) = AnalyticWavelet::morse(alpha, gamma) {
        cfg.wavelet = wv;
    }

    let lp = r.section(&root, "lowpass", &["kind"]);
    if let Some(k) = r.string(lp, "lowpass", "kind") {
        match LowPass::parse(&k) {
            Some(l) => cfg.lowpass = l,
            None => r.err(
                "lowpass.kind",
                format!(
                    "unknown kind '{k}'; expected one of {}",
                    LowPass::ALL.map(|l| l.name()).join(", ")
                ),
            ),
        }
    }

    let e = r.section(&root, "experiment", &["nonlinearities", "j", "t", "J", "n_paths", "eps", "K"]);
    if let Some(list) = r.array(e, "experiment", "nonlinearities") {
        let mut out = Vec::new();
        for (i, v) in list.iter().enumerate() {
            match v.as_str().map(Nonlinearity::parse) {
                Some(Ok(a)) => out.push(a),
                Some(Err(err)) => r.err(&format!("experiment.nonlinearities[{i}]"), err),
                None => r.err(&format!("experiment.nonlinearities[{i}]"), "expected a string"),
            }
        }
        if out.is_empty() {
            r.err("experiment.nonlinearities", "must not be empty");
        } else {
            cfg.nonlinearities = out;
        }
    }
    if let Some(list) = r.array(e, "experiment", "j") {
        let js: Vec<Option<i64>> = list.iter().map(|v| v.as_integer()).collect();
        if js.iter().any(|v| v.is_none()) {
            r.err("experiment.j", "expected integers");
        } else {
            cfg.j_list = js.into_iter().map(|v| v.unwrap() as i32).collect();
        }
    }
    if let Some(list) = r.array(e, "experiment", "t") {
        let ts: Vec<Option<f64>> = list
            .iter()
            .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
            .collect();
        if ts.iter().any(|v| v.is_none()) {
            r.err("experiment.t", "expected numbers");
        } else {
            cfg.t_list = ts.into_iter().map(Option::unwrap).collect();
        }
    }
    if cfg.j_list.len() != cfg.t_list.len() {
        r.err("experiment.t", format!("needs one entry per experiment.j ({} vs {})", cfg.t_list.len(), cfg.j_list.len()));
    }
    if cfg.j_list.is_empty() || cfg.j_list.len() > 2 {
        r.err("experiment.j", format!("dimension must be 1 or 2, got {}", cfg.j_list.len()));
    }
    if let Some(list) = r.array(e, "experiment", "J") {
        let js: Vec<Option<i64>> = list.iter().map(|v| v.as_integer()).collect();
        if js.iter().any(|v| !matches!(v, Some(x) if *x >= 0)) {
            r.err("experiment.J", "expected non-negative integers");
        } else {
            cfg.big_j_list = js.into_iter().map(|v| v.unwrap() as u32).collect();
        }
    }
    if cfg.big_j_list.is_empty() {
        r.err("experiment.J", "must not be empty");
    }
    if cfg.big_j_list.windows(2).any(|w| w[0] >= w[1]) {
        r.err("experiment.J", "must be sorted ascending without repeats");
    }
    if let Some(j) = cfg.big_j_list.iter().find(|&&j| j > MAX_BIG_J) {
        r.err("experiment.J", format!("J = {j} exceeds the cap {MAX_BIG_J}"));
    }
    if let Some(n) = r.int(e, "experiment", "n_paths") {
        if n < MIN_PATHS as i64 {
            r.err("experiment.n_paths", format!("must be at least {MIN_PATHS}, got {n}"));
        } else {
            cfg.n_paths = n as usize;
        }
    }
    let eps = r.float(e, "experiment", "eps", 0.1);
    if !(eps > 0.0 && eps <= 0.5) {
        r.err("experiment.eps", format!("must lie in (0, 0.5], got {eps}"));
    } else {
        cfg.eps = eps;
    }
    if let Some(k) = r.int(e, "experiment", "K") {
        if !(2..=200).contains(&k) || k % 2 == 1 {
            r.err("experiment.K", format!("must be even in [2, 200], got {k}"));
        } else {
            cfg.k_max = k as u32;
        }
    }

    let g = r.section(&root, "grid", &["n_time", "dt"]);
    if g.is_some() {
        let n = r.int(g, "grid", "n_time");
        let dt = r.float(g, "grid", "dt", f64::NAN);
        match n {
            Some(n) if n >= 4 && (n as u64).is_power_of_two() => {
                if dt > 0.0 && dt.is_finite() {
                    cfg.grid = Some(GridConfig { n_time: n as usize, dt });
                } else {
                    r.err("grid.dt", "required positive number when [grid] is present");
                }
            }
            _ => r.err("grid.n_time", "required power of two ≥ 4 when [grid] is present"),
        }
    }

    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errors))
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
    parse_config_str(&text)
}
