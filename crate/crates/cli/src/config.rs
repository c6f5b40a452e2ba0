//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Keys may appear once. List
//! values are comma separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;
use tslab_core::spectral_edit::default_rho_grid;
use tslab_core::trainer::{default_noise_variance, InitMode, TrainConfig};

pub const REQUIRED_KEYS: [&str; 9] = ["d", "L", "N", "u", "r", "eta1", "eta2", "switch_epoch", "epochs"];
pub const OPTIONAL_KEYS: [&str; 9] = [
    "lambda",
    "tau0",
    "tau_xi",
    "gamma0",
    "init_mode",
    "seeds",
    "snapshot_epochs",
    "rho_grid",
    "output_dir",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { key: String, line: usize, first: usize },
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("line {line}: invalid value for `{key}`: {msg}")]
    Invalid { key: String, line: usize, msg: String },
    #[error("inconsistent config: {0}")]
    Constraint(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub len: usize,
    pub n: usize,
    pub u: f64,
    pub r: f64,
    pub gamma0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub switch_epoch: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub tau0: f64,
    pub tau_xi: f64,
    pub init_mode: InitMode,
    pub seeds: Vec<u64>,
    pub snapshot_epochs: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            eta1: self.eta1,
            eta2: self.eta2,
            switch_epoch: self.switch_epoch,
            lambda: self.lambda,
            tau0: self.tau0,
            tau_xi: self.tau_xi,
            epochs: self.epochs,
            seed,
            init_mode: self.init_mode,
        }
    }

    /// Every effective value, computed defaults included, in the input
    /// format. Parsing the result gives back the same config.
    pub fn to_text(&self) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("d", self.d.to_string());
        kv("L", self.len.to_string());
        kv("N", self.n.to_string());
        kv("u", fmt_f(self.u));
        kv("r", fmt_f(self.r));
        kv("gamma0", fmt_f(self.gamma0));
        kv("eta1", fmt_f(self.eta1));
        kv("eta2", fmt_f(self.eta2));
        kv("switch_epoch", self.switch_epoch.to_string());
        kv("epochs", self.epochs.to_string());
        kv("lambda", fmt_f(self.lambda));
        kv("tau0", fmt_f(self.tau0));
        kv("tau_xi", fmt_f(self.tau_xi));
        kv("init_mode", self.init_mode.name().to_string());
        kv("seeds", join(self.seeds.iter().map(u64::to_string).collect()));
        kv("snapshot_epochs", join(self.snapshot_epochs.iter().map(usize::to_string).collect()));
        kv("rho_grid", join(self.rho_grid.iter().map(|x| fmt_f(*x)).collect()));
        kv("output_dir", self.output_dir.display().to_string());
        s
    }
}

/// Shortest text that parses back to the same `f64`.
fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

struct Entry<'a> {
    value: &'a str,
    line: usize,
}

struct Fields<'a>(BTreeMap<&'a str, Entry<'a>>);

impl<'a> Fields<'a> {
    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.0.get(key) else {
            return Ok(None);
        };
        e.value.parse::<T>().map(Some).map_err(|err| ConfigError::Invalid {
            key: key.to_string(),
            line: e.line,
            msg: err.to_string(),
        })
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.expect("required keys checked up front"))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.0.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|err| ConfigError::Invalid {
                    key: key.to_string(),
                    line: e.line,
                    msg: format!("{s:?}: {err}"),
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            line: self.0.get(key).map_or(0, |e| e.line),
            msg: msg.into(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map: BTreeMap<&str, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Syntax { line });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if !REQUIRED_KEYS.contains(&k) && !OPTIONAL_KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { key: k.to_string(), line });
        }
        if let Some(prev) = map.get(k) {
            return Err(ConfigError::Duplicate {
                key: k.to_string(),
                line,
                first: prev.line,
            });
        }
        map.insert(k, Entry { value: v, line });
    }

    let missing: Vec<String> = REQUIRED_KEYS
        .iter()
        .filter(|k| !map.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }
    let f = Fields(map);

    let d: usize = f.required("d")?;
    if d < 2 {
        return Err(f.invalid("d", "must be at least 2"));
    }
    let len: usize = f.required("L")?;
    if len < 2 {
        return Err(f.invalid("L", "must be at least 2"));
    }
    let n: usize = f.required("N")?;
    if n < 1 {
        return Err(f.invalid("N", "must be at least 1"));
    }
    let u: f64 = f.required("u")?;
    let r: f64 = f.required("r")?;
    if !(r > 0.0 && u > r && u.is_finite()) {
        return Err(ConfigError::Constraint(format!("need u > r > 0, got u={u}, r={r}")));
    }

    let ln_d = (d as f64).ln();
    let tau0 = f.parse("tau0")?.unwrap_or(1.0 / ln_d.sqrt());
    let lambda = f.parse("lambda")?.unwrap_or(1.0 / ln_d.sqrt());
    let eta1: f64 = f.required("eta1")?;
    let tau_xi = match f.parse("tau_xi")? {
        Some(t) => t,
        None => default_noise_variance(tau0, eta1, lambda).max(0.0).sqrt(),
    };
    let init_mode = match f.0.get("init_mode") {
        None => InitMode::Gaussian,
        Some(e) => InitMode::parse(e.value).ok_or_else(|| f.invalid("init_mode", "expected gaussian or near_zero"))?,
    };
    let switch_epoch: usize = f.required("switch_epoch")?;
    let epochs: usize = f.required("epochs")?;
    let rho_grid = f.list::<f64>("rho_grid")?.unwrap_or_else(default_rho_grid);
    if rho_grid.is_empty() || rho_grid.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
        return Err(f.invalid("rho_grid", "needs at least one value, all in (0, 1]"));
    }
    let seeds = f.list::<u64>("seeds")?.unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return Err(f.invalid("seeds", "needs at least one seed"));
    }

    let cfg = ExperimentConfig {
        d,
        len,
        n,
        u,
        r,
        gamma0: f.parse("gamma0")?.unwrap_or(1.0 / (d as f64).sqrt()),
        eta1,
        eta2: f.required("eta2")?,
        switch_epoch,
        epochs,
        lambda,
        tau0,
        tau_xi,
        init_mode,
        seeds,
        snapshot_epochs: f
            .list::<usize>("snapshot_epochs")?
            .unwrap_or_else(|| vec![0, switch_epoch, epochs]),
        rho_grid,
        output_dir: f.parse::<PathBuf>("output_dir")?.unwrap_or_else(|| PathBuf::from("runs")),
    };
    if cfg.gamma0.is_nan() || cfg.gamma0 <= 0.0 {
        return Err(f.invalid("gamma0", "must be positive"));
    }
    cfg.train_config(0)
        .validate()
        .map_err(|e| ConfigError::Constraint(e.to_string()))?;
    Ok(cfg)
}
