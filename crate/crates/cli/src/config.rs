//! `key=value` run configuration with command-line overrides.

use fracbdsde_core::bdsde::{Coefficients, Driver, Terminal};
use fracbdsde_core::fractional::Hurst;
use fracbdsde_core::girsanov::{GammaProfile, GammaSpec};
use fracbdsde_core::TimeGrid;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` has no value")]
    MissingValue(String),
    #[error("line {line} is not `key=value`: `{text}`")]
    Malformed { line: usize, text: String },
    #[error("`{key}` = `{value}`: {message}")]
    Invalid { key: String, value: String, message: String },
    #[error("`{key}` = {value} is out of range: {message}")]
    OutOfRange { key: String, value: String, message: String },
    #[error("unknown subcommand `{0}`")]
    UnknownSubcommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subcommand {
    Fbm,
    Girsanov,
    Duality,
    Sde,
    Bdsde,
    Spde,
    All,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Fbm,
        Subcommand::Girsanov,
        Subcommand::Duality,
        Subcommand::Sde,
        Subcommand::Bdsde,
        Subcommand::Spde,
        Subcommand::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Fbm => "fbm",
            Subcommand::Girsanov => "girsanov",
            Subcommand::Duality => "duality",
            Subcommand::Sde => "sde",
            Subcommand::Bdsde => "bdsde",
            Subcommand::Spde => "spde",
            Subcommand::All => "all",
        }
    }

    /// Acceptance criteria run by this subcommand.
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Subcommand::Fbm => &[1, 2, 3],
            Subcommand::Girsanov => &[4],
            Subcommand::Duality => &[5],
            Subcommand::Sde => &[6],
            Subcommand::Bdsde => &[7, 9],
            Subcommand::Spde => &[8],
            Subcommand::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }
}

impl FromStr for Subcommand {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subcommand::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| ConfigError::UnknownSubcommand(s.to_string()))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Comparison lattice `[-half_width, half_width]` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub half_width: f64,
    pub points: usize,
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.half_width, self.points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hurst: f64,
    pub horizon: f64,
    pub steps: usize,
    /// fBm paths for the Monte Carlo checks on `B` alone.
    pub paths: usize,
    pub seed: u64,
    pub gamma: GammaProfile,
    /// Integrability exponent of `γ`; `None` picks the default for `H`.
    pub p: Option<f64>,
    pub bound_constant: f64,
    pub driver: Driver,
    pub terminal: Terminal,
    pub coeff: Coefficients,
    pub basis_degree: usize,
    pub lattice: LatticeSpec,
    /// fBm paths of the doubly stochastic solvers.
    pub bpaths: usize,
    /// Brownian sub-paths per fBm path.
    pub wpaths: usize,
    pub out: PathBuf,
}

pub const KEYS: [&str; 16] = [
    "hurst",
    "horizon",
    "steps",
    "paths",
    "seed",
    "gamma",
    "p",
    "bound_constant",
    "driver",
    "terminal",
    "coeff",
    "basis_degree",
    "lattice",
    "bpaths",
    "wpaths",
    "out",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hurst: 0.3,
            horizon: 1.0,
            steps: 64,
            paths: 100_000,
            seed: 42,
            gamma: GammaProfile::Pieces(vec![(0.8, 0.5), (0.4, 1.0)]),
            p: None,
            bound_constant: 1.0,
            driver: Driver::parse("linear:0.5,0.25,0.3").expect("catalog entry"),
            terminal: Terminal::poly(1.0, 1.0, 0.5),
            coeff: Coefficients::parse("affine:0.2,1").expect("catalog entry"),
            basis_degree: 2,
            lattice: LatticeSpec { half_width: 1.5, points: 201 },
            bpaths: 400,
            wpaths: 250,
            out: PathBuf::from("out"),
        }
    }
}

fn invalid(key: &str, value: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { key: key.into(), value: value.into(), message: message.to_string() }
}

fn range(key: &str, value: &str, message: &str) -> ConfigError {
    ConfigError::OutOfRange { key: key.into(), value: value.into(), message: message.into() }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| invalid(key, value, e))
}

impl RunConfig {
    /// Sets one key; ranges are checked here, cross-key constraints in [`RunConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        if value.is_empty() {
            return if KEYS.contains(&key) {
                Err(ConfigError::MissingValue(key.into()))
            } else {
                Err(ConfigError::UnknownKey(key.into()))
            };
        }
        match key {
            "hurst" => {
                let h: f64 = number(key, value)?;
                if !(h > 0.0 && h < 0.5) {
                    return Err(range(key, value, "H must lie in (0, 1/2)"));
                }
                self.hurst = h;
            }
            "horizon" => {
                let t: f64 = number(key, value)?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(range(key, value, "the horizon must be positive"));
                }
                self.horizon = t;
            }
            "steps" => {
                let n: usize = number(key, value)?;
                if n < 2 {
                    return Err(range(key, value, "at least 2 steps"));
                }
                self.steps = n;
            }
            "paths" | "bpaths" | "wpaths" => {
                let n: usize = number(key, value)?;
                if n < 1 {
                    return Err(range(key, value, "at least 1 path"));
                }
                match key {
                    "paths" => self.paths = n,
                    "bpaths" => self.bpaths = n,
                    _ => self.wpaths = n,
                }
            }
            "seed" => self.seed = number(key, value)?,
            "gamma" => self.gamma = GammaProfile::parse(value).map_err(|e| invalid(key, value, e))?,
            "p" => {
                let p: f64 = number(key, value)?;
                if !(p > 1.0 && p.is_finite()) {
                    return Err(range(key, value, "p must exceed 1"));
                }
                self.p = Some(p);
            }
            "bound_constant" => {
                let c: f64 = number(key, value)?;
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(range(key, value, "the constant must be non-negative"));
                }
                self.bound_constant = c;
            }
            "driver" => self.driver = Driver::parse(value).map_err(|e| invalid(key, value, e))?,
            "terminal" => self.terminal = Terminal::parse(value).map_err(|e| invalid(key, value, e))?,
            "coeff" => self.coeff = Coefficients::parse(value).map_err(|e| invalid(key, value, e))?,
            "basis_degree" => {
                let d: usize = number(key, value)?;
                if !(1..=4).contains(&d) {
                    return Err(range(key, value, "degree between 1 and 4"));
                }
                self.basis_degree = d;
            }
            "lattice" => {
                let (a, n) = value.split_once(':').ok_or_else(|| invalid(key, value, "expected half_width:points"))?;
                let half_width: f64 = number(key, a)?;
                let points: usize = number(key, n)?;
                if !(half_width > 0.0 && half_width.is_finite()) || points < 5 {
                    return Err(range(key, value, "positive half-width and at least 5 points"));
                }
                self.lattice = LatticeSpec { half_width, points };
            }
            "out" => self.out = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and lines starting with `#` are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| ConfigError::Malformed { line: i + 1, text: raw.to_string() })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Defaults, then the file, then flag overrides in order.
    pub fn resolve(file: Option<&str>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        if let Some(text) = file {
            c.apply_file(text)?;
        }
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = TimeGrid::new(self.horizon, self.steps).map_err(|e| invalid("steps", &self.steps.to_string(), e))?;
        let spec =
            self.gamma.on_grid(&grid, self.p_value()).map_err(|e| invalid("gamma", &self.gamma.to_string(), e))?;
        spec.validate_p(&self.hurst()).map_err(|e| range("p", &self.p_value().to_string(), &e.to_string()))?;
        if self.wpaths < 8 {
            return Err(range("wpaths", &self.wpaths.to_string(), "regression needs at least 8 sub-paths"));
        }
        Ok(())
    }

    pub fn hurst(&self) -> Hurst {
        Hurst::new(self.hurst).expect("validated on set")
    }

    pub fn p_value(&self) -> f64 {
        self.p.unwrap_or_else(|| GammaSpec::default_p(&self.hurst()))
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.steps).expect("validated on set")
    }

    /// One `key=value` line per key.
    pub fn echo(&self) -> String {
        let mut lines = vec![
            format!("hurst={}", self.hurst),
            format!("horizon={}", self.horizon),
            format!("steps={}", self.steps),
            format!("paths={}", self.paths),
            format!("seed={}", self.seed),
            format!("gamma={}", self.gamma),
        ];
        if let Some(p) = self.p {
            lines.push(format!("p={p}"));
        }
        lines.extend([
            format!("bound_constant={}", self.bound_constant),
            format!("driver={}", self.driver),
            format!("terminal={}", self.terminal),
            format!("coeff={}", self.coeff),
            format!("basis_degree={}", self.basis_degree),
            format!("lattice={}", self.lattice),
            format!("bpaths={}", self.bpaths),
            format!("wpaths={}", self.wpaths),
            format!("out={}", self.out.display()),
        ]);
        lines.join("\n")
    }
}
