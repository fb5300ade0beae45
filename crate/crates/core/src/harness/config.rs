//! Experiment configuration as a flat `key = value` file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::allocator::{Algorithm, DissGuard, DEFAULT_ON_DEMAND_LIMIT};
use crate::forecast::DEFAULT_WINDOW;
use crate::pricing::DEFAULT_RESERVED_DISCOUNT;

use super::HarnessError;

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSource {
    Generate,
    /// Long-form workload CSV.
    File(PathBuf),
    /// Raw geo trace CSV.
    Trace(PathBuf),
}

/// Where phase-2 reservations come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReservationMode {
    Forecast,
    /// True optimal counts of the same slot.
    Oracle,
}

/// How far ahead reservations are forecast.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForecastLead {
    /// At the start of slot t the optimizer has seen t-1 and reserves t+1.
    Proactive,
    /// Reserve slot t with counts up to t-1.
    Online,
}

impl ForecastLead {
    pub fn steps(self) -> usize {
        match self {
            ForecastLead::Proactive => 2,
            ForecastLead::Online => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub workload: WorkloadSource,
    pub horizon: usize,
    pub test_hours: usize,
    pub delay_grid: Vec<f64>,
    pub diss_grid: Vec<f64>,
    pub on_demand_limit: u64,
    pub window: usize,
    pub train_fraction: f64,
    pub algorithms: Vec<Algorithm>,
    pub reserved_discount: f64,
    pub price_book: Option<PathBuf>,
    pub rtt: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub reservations: ReservationMode,
    pub forecast_lead: ForecastLead,
    pub diss_guard: DissGuard,
    pub mean_viewers: f64,
    pub zipf_exponent: f64,
    pub locality: f64,
    pub video_scale: f64,
    pub mlp_epochs: usize,
    pub node_limit: u64,
    pub write_outcomes: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workload: WorkloadSource::Generate,
            horizon: 24 * 7,
            test_hours: 24,
            delay_grid: vec![8.8, 120.0, 180.0],
            diss_grid: vec![0.0, 10.0],
            on_demand_limit: DEFAULT_ON_DEMAND_LIMIT,
            window: DEFAULT_WINDOW,
            train_fraction: 0.8,
            algorithms: Algorithm::ALL.to_vec(),
            reserved_discount: DEFAULT_RESERVED_DISCOUNT,
            price_book: None,
            rtt: None,
            catalog: None,
            reservations: ReservationMode::Forecast,
            forecast_lead: ForecastLead::Proactive,
            diss_guard: DissGuard::PostUpdate,
            mean_viewers: 8.0,
            zipf_exponent: 1.0,
            locality: 0.6,
            video_scale: 1.0,
            mlp_epochs: 300,
            node_limit: 20_000_000,
            write_outcomes: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn list<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses `key = value` lines. `#` starts a comment; relative paths are
    /// taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Config {
                line,
                message: format!("expected key = value, got {content:?}"),
            })?;
            c.set(key.trim(), value.trim(), base)
                .map_err(|message| HarnessError::Config { line, message })?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        fn nums(key: &str, v: &str) -> Result<Vec<f64>, String> {
            v.split(',').map(|x| num(key, x.trim())).collect()
        }
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "seed" => self.seed = num(key, v)?,
            "workload" => {
                self.workload = match v {
                    "generate" => WorkloadSource::Generate,
                    _ => match v.split_once(':') {
                        Some(("file", p)) => WorkloadSource::File(path(p.trim())),
                        Some(("trace", p)) => WorkloadSource::Trace(path(p.trim())),
                        _ => return Err(format!("workload: expected generate, file:PATH or trace:PATH, got {v:?}")),
                    },
                }
            }
            "horizon" => self.horizon = num(key, v)?,
            "test_hours" => self.test_hours = num(key, v)?,
            "delay_grid" => self.delay_grid = nums(key, v)?,
            "diss_grid" => self.diss_grid = nums(key, v)?,
            "on_demand_limit" => self.on_demand_limit = num(key, v)?,
            "window" => self.window = num(key, v)?,
            "train_fraction" => self.train_fraction = num(key, v)?,
            "algorithms" => {
                self.algorithms = v
                    .split(',')
                    .map(|a| a.parse().map_err(|e: crate::allocator::AllocatorError| e.to_string()))
                    .collect::<Result<_, _>>()?
            }
            "reserved_discount" => self.reserved_discount = num(key, v)?,
            "price_book" => self.price_book = Some(path(v)),
            "rtt" => self.rtt = Some(path(v)),
            "catalog" => self.catalog = Some(path(v)),
            "reservations" => {
                self.reservations = match v {
                    "forecast" => ReservationMode::Forecast,
                    "oracle" => ReservationMode::Oracle,
                    _ => return Err(format!("reservations: expected forecast or oracle, got {v:?}")),
                }
            }
            "forecast_lead" => {
                self.forecast_lead = match v {
                    "proactive" => ForecastLead::Proactive,
                    "online" => ForecastLead::Online,
                    _ => return Err(format!("forecast_lead: expected proactive or online, got {v:?}")),
                }
            }
            "diss_guard" => {
                self.diss_guard = match v {
                    "post" => DissGuard::PostUpdate,
                    "stale" => DissGuard::Stale,
                    _ => return Err(format!("diss_guard: expected post or stale, got {v:?}")),
                }
            }
            "mean_viewers" => self.mean_viewers = num(key, v)?,
            "zipf_exponent" => self.zipf_exponent = num(key, v)?,
            "locality" => self.locality = num(key, v)?,
            "video_scale" => self.video_scale = num(key, v)?,
            "mlp_epochs" => self.mlp_epochs = num(key, v)?,
            "node_limit" => self.node_limit = num(key, v)?,
            "write_outcomes" => self.write_outcomes = num(key, v)?,
            "out_dir" => self.out_dir = path(v),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config { line: 0, message: m });
        if self.delay_grid.is_empty() || self.diss_grid.is_empty() || self.algorithms.is_empty() {
            return bad("delay_grid, diss_grid and algorithms must be non-empty".into());
        }
        if self.delay_grid.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return bad("delay_grid values must be finite and non-negative".into());
        }
        if self.diss_grid.iter().any(|d| !(0.0..=100.0).contains(d)) {
            return bad("diss_grid values must lie in [0, 100]".into());
        }
        if !(0.0..=1.0).contains(&self.reserved_discount) {
            return bad("reserved_discount must lie in [0, 1]".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie strictly between 0 and 1".into());
        }
        if self.window == 0 || self.test_hours == 0 {
            return bad("window and test_hours must be positive".into());
        }
        if !(self.video_scale >= 0.0) {
            return bad("video_scale must be non-negative".into());
        }
        for p in [&self.price_book, &self.rtt, &self.catalog].into_iter().flatten() {
            if !p.exists() {
                return bad(format!("path {} does not exist", p.display()));
            }
        }
        if let WorkloadSource::File(p) | WorkloadSource::Trace(p) = &self.workload {
            if !p.exists() {
                return bad(format!("workload file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// First slot of the evaluation window for a workload of `horizon` slots.
    pub fn test_start(&self, horizon: usize) -> usize {
        horizon.saturating_sub(self.test_hours)
    }

    /// Effective configuration in the same `key = value` format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let _ = writeln!(s, "seed = {}", self.seed);
        let w = match &self.workload {
            WorkloadSource::Generate => "generate".to_string(),
            WorkloadSource::File(p) => format!("file:{}", p.display()),
            WorkloadSource::Trace(p) => format!("trace:{}", p.display()),
        };
        let _ = writeln!(s, "workload = {w}");
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "test_hours = {}", self.test_hours);
        let _ = writeln!(s, "delay_grid = {}", list(&self.delay_grid, |d| d.to_string()));
        let _ = writeln!(s, "diss_grid = {}", list(&self.diss_grid, |d| d.to_string()));
        let _ = writeln!(s, "on_demand_limit = {}", self.on_demand_limit);
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "train_fraction = {}", self.train_fraction);
        let _ = writeln!(s, "algorithms = {}", list(&self.algorithms, |a| a.label().to_string()));
        let _ = writeln!(s, "reserved_discount = {}", self.reserved_discount);
        for (k, v) in [("price_book", opt(&self.price_book)), ("rtt", opt(&self.rtt)), ("catalog", opt(&self.catalog))] {
            match v {
                Some(v) => {
                    let _ = writeln!(s, "{k} = {v}");
                }
                None => {
                    let _ = writeln!(s, "# {k} = built-in");
                }
            }
        }
        let r = match self.reservations {
            ReservationMode::Forecast => "forecast",
            ReservationMode::Oracle => "oracle",
        };
        let _ = writeln!(s, "reservations = {r}");
        let l = match self.forecast_lead {
            ForecastLead::Proactive => "proactive",
            ForecastLead::Online => "online",
        };
        let _ = writeln!(s, "forecast_lead = {l}");
        let g = match self.diss_guard {
            DissGuard::PostUpdate => "post",
            DissGuard::Stale => "stale",
        };
        let _ = writeln!(s, "diss_guard = {g}");
        let _ = writeln!(s, "mean_viewers = {}", self.mean_viewers);
        let _ = writeln!(s, "zipf_exponent = {}", self.zipf_exponent);
        let _ = writeln!(s, "locality = {}", self.locality);
        let _ = writeln!(s, "video_scale = {}", self.video_scale);
        let _ = writeln!(s, "mlp_epochs = {}", self.mlp_epochs);
        let _ = writeln!(s, "node_limit = {}", self.node_limit);
        let _ = writeln!(s, "write_outcomes = {}", self.write_outcomes);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        s
    }
}
