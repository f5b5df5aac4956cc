//! Run configuration: command-line flags layered over an optional flat
//! `key = value` file, plus classifier thresholds from the environment.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use qst_core::{time_grid, ModelParams, QstError, Thresholds};

pub const THRESHOLDS_ENV: &str = "QST_CHANNEL_THRESHOLDS";
pub const DEFAULT_SAMPLES: usize = 2001;

const KNOWN_KEYS: &[&str] = &[
    "n", "l", "g", "omega", "t-start", "t-end", "samples", "out", "tolerance", "jobs", "sweep-g", "sweep-omega",
    "sweep-n", "sweep-l", "l-half", "dense",
];

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or parameters; exit code 2.
    Usage(String),
    /// Eigensolver, pole search or other numerical failure; exit code 3.
    Numerical(String),
    /// Comparison deviation above tolerance; exit code 4.
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Tolerance(msg) => write!(f, "tolerance exceeded: {msg}"),
        }
    }
}

impl From<QstError> for CliError {
    fn from(err: QstError) -> Self {
        match err {
            QstError::InvalidParams(_)
            | QstError::InvalidState(_)
            | QstError::InvalidTimeGrid(_)
            | QstError::Regime(_) => CliError::Usage(err.to_string()),
            _ => CliError::Numerical(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Number of channel modes N
    #[arg(long)]
    pub n: Option<usize>,
    /// Distance L between the impurity sites
    #[arg(long)]
    pub l: Option<usize>,
    /// Impurity-channel coupling g
    #[arg(long)]
    pub g: Option<f64>,
    /// Impurity energy Ω
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Number of time samples, endpoints included
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output file (directory for `figures`); stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Maximum allowed deviation for `compare`
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Worker threads
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SweepArgs {
    /// Coupling axis `start:stop:step`
    #[arg(long, value_name = "A:B:STEP")]
    pub sweep_g: Option<String>,
    #[arg(long, value_name = "A:B:STEP", allow_hyphen_values = true)]
    pub sweep_omega: Option<String>,
    #[arg(long, value_name = "A:B:STEP")]
    pub sweep_n: Option<String>,
    #[arg(long, value_name = "A:B:STEP")]
    pub sweep_l: Option<String>,
    /// Tie L to N/2 at every grid point
    #[arg(long)]
    pub l_half: bool,
}

/// Parsed `key = value` file with keys normalized to dashed form.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
    source: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, source: &Path) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected `key = value`", source.display(), lineno + 1))
            })?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("{}:{}: unknown key `{key}`", source.display(), lineno + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("{}:{}: duplicate key `{key}`", source.display(), lineno + 1)));
            }
        }
        Ok(Self {
            entries,
            source: source.to_path_buf(),
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    CliError::Usage(format!("{}: invalid value `{v}` for `{key}`", self.source.display()))
                })
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> CliResult<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.entries.get(key).cloned()
    }
}

/// Inclusive arithmetic range `start:stop:step`, or a single value.
pub fn parse_axis<T>(range: &str, name: &str) -> CliResult<Vec<T>>
where
    T: FromStr + Copy + Into<f64> + AxisValue,
{
    let bad = |why: &str| CliError::Usage(format!("--sweep-{name} {range:?}: {why}"));
    let parts: Vec<&str> = range.split(':').map(str::trim).collect();
    let parse = |s: &str| s.parse::<T>().map_err(|_| bad("not a number"));
    let values = match parts.as_slice() {
        [single] => vec![parse(single)?],
        [start, stop, step] => {
            let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
            let (a, b, h) = (start.into(), stop.into(), step.into());
            if !(a.is_finite() && b.is_finite() && h.is_finite()) {
                return Err(bad("values must be finite"));
            }
            if h <= 0.0 {
                return Err(bad("step must be positive"));
            }
            if b < a {
                return Err(bad("stop is below start"));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize + 1;
            (0..count).map(|i| T::at(start, step, i)).collect()
        }
        _ => return Err(bad("expected `start:stop:step`")),
    };
    if values.iter().any(|v| !(*v).into().is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(values)
}

pub trait AxisValue: Sized {
    fn at(start: Self, step: Self, i: usize) -> Self;
}

impl AxisValue for f64 {
    fn at(start: f64, step: f64, i: usize) -> f64 {
        start + i as f64 * step
    }
}

impl AxisValue for u32 {
    fn at(start: u32, step: u32, i: usize) -> u32 {
        start + i as u32 * step
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepAxes {
    pub g: Option<Vec<f64>>,
    pub omega: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub l: Option<Vec<usize>>,
    pub l_half: bool,
}

/// Fully resolved configuration shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub l: Option<usize>,
    pub g: Option<f64>,
    pub omega: Option<f64>,
    pub t_start: f64,
    pub t_end: Option<f64>,
    pub samples: usize,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub jobs: usize,
    pub thresholds: Thresholds,
    pub sweep: SweepAxes,
    pub dense: bool,
}

impl RunConfig {
    pub fn resolve(common: &CommonArgs, sweep: Option<&SweepArgs>, dense: bool) -> CliResult<Self> {
        let file = match &common.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let thresholds = thresholds_from_env()?;

        let sweep_range = |flag: Option<&String>, key: &str| flag.cloned().or_else(|| file.raw(key));
        let axes = match sweep {
            Some(args) => {
                let l_half = args.l_half || file.flag("l-half")?;
                let axes = SweepAxes {
                    g: sweep_range(args.sweep_g.as_ref(), "sweep-g").map(|s| parse_axis::<f64>(&s, "g")).transpose()?,
                    omega: sweep_range(args.sweep_omega.as_ref(), "sweep-omega")
                        .map(|s| parse_axis::<f64>(&s, "omega"))
                        .transpose()?,
                    n: sweep_range(args.sweep_n.as_ref(), "sweep-n")
                        .map(|s| parse_axis::<u32>(&s, "n").map(|v| v.into_iter().map(|x| x as usize).collect()))
                        .transpose()?,
                    l: sweep_range(args.sweep_l.as_ref(), "sweep-l")
                        .map(|s| parse_axis::<u32>(&s, "l").map(|v| v.into_iter().map(|x| x as usize).collect()))
                        .transpose()?,
                    l_half,
                };
                if axes.l_half && axes.l.is_some() {
                    return Err(CliError::Usage("--l-half and --sweep-l are mutually exclusive".into()));
                }
                axes
            }
            None => SweepAxes::default(),
        };

        let config = Self {
            n: common.n.map(Ok).or_else(|| file.get("n").transpose()).transpose()?,
            l: common.l.map(Ok).or_else(|| file.get("l").transpose()).transpose()?,
            g: common.g.map(Ok).or_else(|| file.get("g").transpose()).transpose()?,
            omega: common.omega.map(Ok).or_else(|| file.get("omega").transpose()).transpose()?,
            t_start: common.t_start.map(Ok).or_else(|| file.get("t-start").transpose()).transpose()?.unwrap_or(0.0),
            t_end: common.t_end.map(Ok).or_else(|| file.get("t-end").transpose()).transpose()?,
            samples: common
                .samples
                .map(Ok)
                .or_else(|| file.get("samples").transpose())
                .transpose()?
                .unwrap_or(DEFAULT_SAMPLES),
            out: common.out.clone().map(Ok).or_else(|| file.get("out").transpose()).transpose()?,
            tolerance: common.tolerance.map(Ok).or_else(|| file.get("tolerance").transpose()).transpose()?,
            jobs: common.jobs.map(Ok).or_else(|| file.get("jobs").transpose()).transpose()?.unwrap_or(1),
            thresholds,
            sweep: axes,
            dense: dense || file.flag("dense")?,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        if self.samples < 2 {
            return Err(CliError::Usage(format!("--samples must be at least 2, got {}", self.samples)));
        }
        if !(self.t_start.is_finite() && self.t_start >= 0.0) {
            return Err(CliError::Usage(format!("--t-start must be finite and >= 0, got {}", self.t_start)));
        }
        if let Some(end) = self.t_end {
            if !(end.is_finite() && end > self.t_start) {
                return Err(CliError::Usage(format!("--t-end must be finite and > t-start, got {end}")));
            }
        }
        if self.jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        if let Some(tol) = self.tolerance {
            if !(tol.is_finite() && tol >= 0.0) {
                return Err(CliError::Usage(format!("--tolerance must be finite and >= 0, got {tol}")));
            }
        }
        Ok(())
    }

    fn require<T: Copy>(value: Option<T>, flag: &str) -> CliResult<T> {
        value.ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config key)")))
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        Ok(ModelParams::new(
            Self::require(self.n, "n")?,
            Self::require(self.l, "l")?,
            Self::require(self.g, "g")?,
            Self::require(self.omega, "omega")?,
        )?)
    }

    /// Sample grid on `[t_start, t_end]`; `natural_end` applies when no end
    /// time was configured.
    pub fn times(&self, natural_end: Option<f64>) -> CliResult<Vec<f64>> {
        let end = match (self.t_end, natural_end) {
            (Some(end), _) => end,
            (None, Some(end)) if end.is_finite() && end > self.t_start => end,
            _ => return Err(CliError::Usage("cannot infer a time window for these parameters; pass --t-end".into())),
        };
        Ok(time_grid(self.t_start, end, self.samples)?)
    }

    pub fn has_model_flags(&self) -> bool {
        self.n.is_some() || self.l.is_some() || self.g.is_some() || self.omega.is_some()
    }
}

fn thresholds_from_env() -> CliResult<Thresholds> {
    match std::env::var(THRESHOLDS_ENV) {
        Ok(value) => value
            .parse()
            .map_err(|e: QstError| CliError::Usage(format!("{THRESHOLDS_ENV}: {e}"))),
        Err(std::env::VarError::NotPresent) => Ok(Thresholds::default()),
        Err(e) => Err(CliError::Usage(format!("{THRESHOLDS_ENV}: {e}"))),
    }
}
