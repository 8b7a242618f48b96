//! Experiment configuration: flat `key = value` text files, `#` comments,
//! unknown keys rejected.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Non-negative target wavefunction; the pipeline stays real.
    NonNegative,
    /// Real sign-changing target; the pipeline lifts signs to phases.
    Signed,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonneg" => Ok(Mode::NonNegative),
            "signed" => Ok(Mode::Signed),
            other => Err(Error::Config(format!(
                "mode must be nonneg or signed, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::NonNegative => write!(f, "nonneg"),
            Mode::Signed => write!(f, "signed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_particles: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub n_max: usize,
    /// Leading perturbation amplitude; row n uses alpha0 / n.
    pub alpha0: f64,
    pub realloc_tol: f64,
    pub marginal_tol: f64,
    pub bound_slack: f64,
    pub eps_levels: Vec<f64>,
    pub schedule_delta: f64,
    pub mode: Mode,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub save_fields: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d: 1,
            n_particles: 2,
            half_width: 10.0,
            points_per_axis: 64,
            n_max: 6,
            alpha0: 0.12,
            realloc_tol: 1e-12,
            marginal_tol: 1e-9,
            bound_slack: 1e-10,
            eps_levels: vec![0.5, 0.25, 0.125, 0.0625],
            schedule_delta: 1.0,
            mode: Mode::NonNegative,
            seed: 42,
            output_dir: PathBuf::from("out"),
            save_fields: false,
        }
    }
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.d, self.n_particles, self.half_width, self.points_per_axis)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.n_max < 3 {
            return Err(Error::Config(format!("n_max must be >= 3, got {}", self.n_max)));
        }
        if !(self.alpha0 >= 0.0 && self.alpha0 < 1.0) {
            return Err(Error::Config(format!(
                "alpha0 must lie in [0, 1), got {}",
                self.alpha0
            )));
        }
        for (name, v) in [
            ("realloc_tol", self.realloc_tol),
            ("marginal_tol", self.marginal_tol),
            ("bound_slack", self.bound_slack),
            ("schedule_delta", self.schedule_delta),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.eps_levels.is_empty()
            || self.eps_levels.windows(2).any(|w| w[1] >= w[0])
            || self.eps_levels.iter().any(|&e| e <= 0.0)
        {
            return Err(Error::Config(
                "eps_levels must be positive and strictly decreasing".into(),
            ));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_err =
                |what: &str| Error::Config(format!("line {}: bad {what}: {value:?}", lineno + 1));
            match key {
                "d" => cfg.d = value.parse().map_err(|_| parse_err("d"))?,
                "n_particles" => {
                    cfg.n_particles = value.parse().map_err(|_| parse_err("n_particles"))?
                }
                "half_width" => {
                    cfg.half_width = value.parse().map_err(|_| parse_err("half_width"))?
                }
                "points_per_axis" => {
                    cfg.points_per_axis =
                        value.parse().map_err(|_| parse_err("points_per_axis"))?
                }
                "n_max" => cfg.n_max = value.parse().map_err(|_| parse_err("n_max"))?,
                "alpha0" => cfg.alpha0 = value.parse().map_err(|_| parse_err("alpha0"))?,
                "realloc_tol" => {
                    cfg.realloc_tol = value.parse().map_err(|_| parse_err("realloc_tol"))?
                }
                "marginal_tol" => {
                    cfg.marginal_tol = value.parse().map_err(|_| parse_err("marginal_tol"))?
                }
                "bound_slack" => {
                    cfg.bound_slack = value.parse().map_err(|_| parse_err("bound_slack"))?
                }
                "eps_levels" => {
                    cfg.eps_levels = value
                        .split(',')
                        .map(|t| t.trim().parse::<f64>().map_err(|_| parse_err("eps_levels")))
                        .collect::<Result<Vec<_>>>()?;
                }
                "schedule_delta" => {
                    cfg.schedule_delta =
                        value.parse().map_err(|_| parse_err("schedule_delta"))?
                }
                "mode" => cfg.mode = value.parse()?,
                "seed" => cfg.seed = value.parse().map_err(|_| parse_err("seed"))?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "save_fields" => {
                    cfg.save_fields = value.parse().map_err(|_| parse_err("save_fields"))?
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_round_trip_keys() {
        let text = "\
# experiment
d = 1
n_particles = 2
half_width = 8.0
points_per_axis = 32   # coarse
n_max = 4
alpha0 = 0.1
mode = signed
seed = 7
eps_levels = 0.5, 0.25
output_dir = /tmp/run1
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.points_per_axis, 32);
        assert_eq!(cfg.mode, Mode::Signed);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.eps_levels, vec![0.5, 0.25]);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/run1"));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ExperimentConfig::parse("volume = 3\n").is_err());
        assert!(ExperimentConfig::parse("n_max = 1\n").is_err());
        assert!(ExperimentConfig::parse("alpha0 = 1.5\n").is_err());
        assert!(ExperimentConfig::parse("eps_levels = 0.1, 0.2\n").is_err());
        assert!(ExperimentConfig::parse("mode = maybe\n").is_err());
        assert!(ExperimentConfig::parse("just a line\n").is_err());
    }
}
