//! Command-line flags, `key=value` config files and the resolved [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use cvtele_core::analytic::{squeeze_convert, Squeezing};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::parse::{ComplexArg, Grid, InputSpec};

pub const MIN_CUTOFF: usize = 8;
pub const DEFAULT_CUTOFF: usize = 80;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Sweep,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Montecarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    PovmCompleteness,
    #[value(name = "eq5-match")]
    #[serde(rename = "eq5-match")]
    CoherentClosedForm,
    #[value(name = "eq7-commutation")]
    #[serde(rename = "eq7-commutation")]
    LadderCommutation,
    #[value(name = "eq8-match")]
    #[serde(rename = "eq8-match")]
    NumberClosedForm,
    GaussianStats,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gain {
    Value(f64),
    MatchQ,
    Grid(Grid),
}

fn parse_gain(text: &str) -> Result<Gain, String> {
    if text == "match-q" {
        return Ok(Gain::MatchQ);
    }
    text.parse().map(Gain::Value).map_err(|_| format!("gain {text:?} must be a number or match-q"))
}

fn parse_with<T: std::str::FromStr<Err = CliError>>(text: &str) -> Result<T, String> {
    text.parse().map_err(|e: CliError| e.to_string())
}

/// Simulate continuous-variable teleportation in a truncated Fock space.
#[derive(Clone, Debug, Default, Parser)]
#[command(name = "cvtele", version)]
pub struct Cli {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// coherent:RE+IMi, number:N, cat:RE+IMi or file:PATH
    #[arg(long, value_parser = parse_with::<InputSpec>)]
    pub input: Option<InputSpec>,
    /// Entanglement parameter in [0, 1).
    #[arg(long, group = "squeeze")]
    pub q: Option<f64>,
    /// Noise suppression ratio in (0, 1].
    #[arg(long, group = "squeeze")]
    pub s: Option<f64>,
    /// Noise suppression in dB.
    #[arg(long, group = "squeeze")]
    pub db: Option<f64>,
    /// Output gain, or match-q.
    #[arg(long, value_parser = parse_gain, group = "gain")]
    pub g: Option<Gain>,
    /// Gain grid start:stop:count.
    #[arg(long = "g-grid", value_parser = parse_with::<Grid>, group = "gain")]
    pub g_grid: Option<Grid>,
    /// Fock cutoff.
    #[arg(long = "N")]
    pub cutoff: Option<usize>,
    /// Measurement outcome for single mode.
    #[arg(long, value_parser = parse_with::<ComplexArg>, allow_hyphen_values = true)]
    pub beta: Option<ComplexArg>,
    /// Entanglement grid start:stop:count for sweeps.
    #[arg(long = "q-grid", value_parser = parse_with::<Grid>)]
    pub q_grid: Option<Grid>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// File of key=value lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Cli {
    /// Fills unset fields from `file`. The squeezing and gain groups are
    /// taken from the file only when no member of the group was given.
    pub fn merge(mut self, file: Cli) -> Cli {
        if self.q.is_none() && self.s.is_none() && self.db.is_none() {
            (self.q, self.s, self.db) = (file.q, file.s, file.db);
        }
        if self.g.is_none() && self.g_grid.is_none() {
            (self.g, self.g_grid) = (file.g, file.g_grid);
        }
        self.mode = self.mode.or(file.mode);
        self.input = self.input.or(file.input);
        self.cutoff = self.cutoff.or(file.cutoff);
        self.beta = self.beta.or(file.beta);
        self.q_grid = self.q_grid.or(file.q_grid);
        self.method = self.method.or(file.method);
        self.samples = self.samples.or(file.samples);
        self.seed = self.seed.or(file.seed);
        self.suite = self.suite.or(file.suite);
        self.out = self.out.or(file.out);
        self.format = self.format.or(file.format);
        self
    }
}

/// Parses a config file of `key=value` lines, where keys are flag names
/// without the leading dashes. Blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<Cli, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut args = vec!["cvtele".to_string()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected key=value", path.display(), lineno + 1)))?;
        let key = key.trim();
        if key == "config" {
            return Err(CliError::Config(format!("{}: nested config files are not supported", path.display())));
        }
        args.push(format!("--{key}={}", value.trim()));
    }
    Cli::try_parse_from(args).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.render())))
}

/// Fully resolved run description, embedded in every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub input: InputSpec,
    pub squeezing: Option<Squeezing>,
    pub q_grid: Option<Grid>,
    pub gain: Gain,
    #[serde(rename = "N")]
    pub cutoff: usize,
    pub beta: Option<ComplexArg>,
    pub method: Method,
    pub samples: usize,
    pub seed: u64,
    pub suite: Suite,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    /// Merges the config file (if any) under the flags, applies defaults and
    /// validates.
    pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
        let cli = match &cli.config {
            Some(path) => {
                let file = read_config_file(path)?;
                cli.merge(file)
            }
            None => cli,
        };
        let squeezing = match (cli.q, cli.s, cli.db) {
            (None, None, None) => None,
            (Some(q), None, None) => Some(Squeezing::Q(q)),
            (None, Some(s), None) => Some(Squeezing::S(s)),
            (None, None, Some(db)) => Some(Squeezing::Db(db)),
            _ => return Err(CliError::Config("give exactly one of --q, --s, --db".into())),
        };
        let gain = match (cli.g, cli.g_grid) {
            (Some(g), None) => g,
            (None, Some(grid)) => Gain::Grid(grid),
            (None, None) => Gain::Value(1.0),
            (Some(_), Some(_)) => return Err(CliError::Config("give at most one of --g, --g-grid".into())),
        };
        let config = RunConfig {
            mode: cli.mode.unwrap_or(Mode::Single),
            input: cli.input.unwrap_or(InputSpec::Coherent(cvtele_core::C64::new(1.0, 0.0))),
            squeezing,
            q_grid: cli.q_grid,
            gain,
            cutoff: cli.cutoff.unwrap_or(DEFAULT_CUTOFF),
            beta: cli.beta,
            method: cli.method.unwrap_or(Method::Montecarlo),
            samples: cli.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: cli.seed.unwrap_or(0),
            suite: cli.suite.unwrap_or(Suite::All),
            out: cli.out,
            format: cli.format.unwrap_or(Format::Csv),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.cutoff < MIN_CUTOFF {
            return fail(&format!("--N must be at least {MIN_CUTOFF}"));
        }
        if self.samples == 0 {
            return fail("--samples must be at least 1");
        }
        if let Some(sq) = self.squeezing {
            squeeze_convert(sq)?;
        }
        for g in self.gain_values() {
            if !(g.is_finite() && g >= 0.0) {
                return fail("gains must be finite and non-negative");
            }
        }
        if let Some(grid) = self.q_grid {
            if grid.values().iter().any(|q| !(0.0..1.0).contains(q)) {
                return fail("--q-grid values must lie in [0, 1)");
            }
        }
        match self.mode {
            Mode::Single => {
                if self.squeezing.is_none() {
                    return fail("single mode needs one of --q, --s, --db");
                }
                if self.beta.is_none() {
                    return fail("single mode needs --beta");
                }
                if self.q_grid.is_some() || matches!(self.gain, Gain::Grid(_)) {
                    return fail("grids are only valid in sweep mode");
                }
            }
            Mode::Sweep => {
                if self.squeezing.is_some() == self.q_grid.is_some() {
                    return fail("sweep mode needs exactly one of --q-grid or --q/--s/--db");
                }
            }
            Mode::Verify => {
                if self.q_grid.is_some() || matches!(self.gain, Gain::Grid(_)) {
                    return fail("grids are only valid in sweep mode");
                }
            }
        }
        Ok(())
    }

    /// Entanglement parameter from `--q`, `--s` or `--db`.
    pub fn q(&self) -> Result<Option<f64>, CliError> {
        Ok(match self.squeezing {
            Some(sq) => Some(squeeze_convert(sq)?.q),
            None => None,
        })
    }

    fn gain_values(&self) -> Vec<f64> {
        match self.gain {
            Gain::Value(g) => vec![g],
            Gain::MatchQ => Vec::new(),
            Gain::Grid(grid) => grid.values(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: &[&str]) -> Result<RunConfig, CliError> {
        let mut full = vec!["cvtele"];
        full.extend_from_slice(args);
        let cli = Cli::try_parse_from(full).map_err(|e| CliError::Config(e.to_string()))?;
        RunConfig::resolve(cli)
    }

    #[test]
    fn single_mode_requirements() {
        assert!(resolve(&["--q", "0.3", "--beta", "0.5+0i"]).is_ok());
        assert!(resolve(&["--q", "0.3"]).is_err());
        assert!(resolve(&["--beta", "0.5+0i"]).is_err());
        assert!(resolve(&["--q", "0.3", "--s", "0.5", "--beta", "0+0i"]).is_err());
        assert!(resolve(&["--q", "1.2", "--beta", "0+0i"]).is_err());
        assert!(resolve(&["--q", "0.3", "--beta", "0+0i", "--N", "4"]).is_err());
        assert!(resolve(&["--q", "0.3", "--beta", "0+0i", "--samples", "0"]).is_err());
        let neg = resolve(&["--q", "0.3", "--beta", "-1-1i"]).unwrap();
        assert_eq!(neg.beta.unwrap().0, cvtele_core::C64::new(-1.0, -1.0));
    }

    #[test]
    fn sweep_mode_requirements() {
        let cfg = resolve(&["--mode", "sweep", "--q-grid", "0:0.9:10", "--g", "match-q"]).unwrap();
        assert_eq!(cfg.gain, Gain::MatchQ);
        assert!(resolve(&["--mode", "sweep"]).is_err());
        assert!(resolve(&["--mode", "sweep", "--q", "0.1", "--q-grid", "0:0.9:10"]).is_err());
        assert!(resolve(&["--mode", "sweep", "--q-grid", "0:1:3"]).is_err());
        assert!(resolve(&["--mode", "sweep", "--q", "0.1", "--g", "1", "--g-grid", "0:1:3"]).is_err());
        assert!(resolve(&["--mode", "sweep", "--q", "0.1", "--g", "-1"]).is_err());
    }

    #[test]
    fn config_file_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# sweep setup\nmode = sweep\nq-grid = 0:0.5:3\ng = 0.7\nseed = 9\nN = 40\n").unwrap();
        let cfg = resolve(&["--config", path.to_str().unwrap(), "--seed", "3"]).unwrap();
        assert_eq!(cfg.mode, Mode::Sweep);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.cutoff, 40);
        assert_eq!(cfg.gain, Gain::Value(0.7));

        let cfg = resolve(&["--config", path.to_str().unwrap(), "--g-grid", "0:1:2"]).unwrap();
        assert_eq!(cfg.gain, Gain::Grid(Grid { start: 0.0, stop: 1.0, count: 2 }));

        std::fs::write(&path, "mode = sweep\nq = 0.5\n").unwrap();
        let cfg = resolve(&["--config", path.to_str().unwrap(), "--db", "3"]).unwrap();
        assert_eq!(cfg.squeezing, Some(Squeezing::Db(3.0)));

        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(resolve(&["--config", path.to_str().unwrap()]).is_err());
        std::fs::write(&path, "just text\n").unwrap();
        assert!(resolve(&["--config", path.to_str().unwrap()]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = resolve(&["--mode", "sweep", "--input", "cat:0.3-0.1i", "--q-grid", "0:0.9:4", "--g-grid", "0.5:1.5:3", "--seed", "17"]).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        let single = resolve(&["--db", "3", "--beta", "0.1+0.2i", "--g", "match-q", "--format", "json"]).unwrap();
        let text = serde_json::to_string(&single).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), single);
    }
}
