//! Experiment configuration: a JSON document whose fields can each be
//! overridden from the command line.

use std::fmt;
use std::path::PathBuf;

use gridcache_dof::topology::{Coord, GridSpec};
use gridcache_dof::{ratio::parse_q, Q};
use serde::{Deserialize, Serialize};

use crate::harness::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Curve,
    Verify,
    Region,
    LpCheck,
    Jacobian,
    Cover,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Curve => "curve",
            Command::Verify => "verify",
            Command::Region => "region",
            Command::LpCheck => "lp-check",
            Command::Jacobian => "jacobian",
            Command::Cover => "cover",
        };
        f.write_str(s)
    }
}

/// Scheme or placement family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quarter,
    Half,
    Full,
}

pub const DEFAULT_SEEDS: std::ops::RangeInclusive<u64> = 1..=20;
pub const LP_CHECK_POINTS: [&str; 6] = ["1/4", "3/10", "2/5", "1/2", "3/4", "1"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    /// `WxH` in cells.
    pub grid: Option<String>,
    pub wrap: Option<bool>,
    /// Topology document; replaces the grid when present.
    pub topology: Option<PathBuf>,
    /// Placement document for `region`.
    pub placement: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub mu: Option<String>,
    pub mu_grid: Option<String>,
    /// Explicit μ list for `lp-check`.
    pub points: Option<Vec<String>>,
    pub n: Option<u32>,
    pub seeds: Option<Vec<u64>>,
    /// `"i,j"`, or `"all"` for every user.
    pub focus: Option<String>,
    /// Generator count of a truncated cooperative instance.
    pub micro: Option<usize>,
    pub phase: Option<u8>,
    pub max_size: Option<usize>,
    pub budget: Option<u64>,
    pub design_seed: Option<u64>,
    pub sabotage: Option<bool>,
    pub exhaustive: Option<bool>,
    pub out: Option<PathBuf>,
}

/// Where the focus user sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Focus {
    At(Coord),
    All,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Config(format!("config: {e}")))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: ExperimentConfig) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { ExperimentConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            command, grid, wrap, topology, placement, mode, mu, mu_grid, points, n, seeds, focus, micro, phase,
            max_size, budget, design_seed, sabotage, exhaustive, out
        )
    }

    pub fn command(&self) -> Result<Command, HarnessError> {
        self.command.ok_or_else(|| HarnessError::Config("no command given".into()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, HarnessError> {
        let text = self.grid.as_deref().unwrap_or("4x4");
        let (w, h) = text
            .split_once(['x', 'X'])
            .ok_or_else(|| HarnessError::Config(format!("grid `{text}` is not WxH")))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| HarnessError::Config(format!("grid `{text}` is not WxH")));
        Ok(GridSpec { width_cells: parse(w)?, height_cells: parse(h)?, wrap: self.wrap.unwrap_or(true) })
    }

    pub fn n(&self) -> Result<u32, HarnessError> {
        match self.n.unwrap_or(1) {
            0 => Err(HarnessError::Config("n must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn seeds(&self) -> Result<Vec<u64>, HarnessError> {
        match &self.seeds {
            Some(s) if s.is_empty() => Err(HarnessError::Config("seed list is empty".into())),
            Some(s) => Ok(s.clone()),
            None => Ok(DEFAULT_SEEDS.collect()),
        }
    }

    pub fn focus(&self) -> Result<Focus, HarnessError> {
        let text = self.focus.as_deref().unwrap_or("1,1").trim();
        if text.eq_ignore_ascii_case("all") {
            return Ok(Focus::All);
        }
        let bad = || HarnessError::Config(format!("focus `{text}` is not `i,j`"));
        let (i, j) = text.split_once(',').ok_or_else(bad)?;
        Ok(Focus::At(Coord::new(i.trim().parse().map_err(|_| bad())?, j.trim().parse().map_err(|_| bad())?)))
    }

    pub fn mu(&self) -> Result<Option<Q>, HarnessError> {
        self.mu.as_deref().map(rational).transpose()
    }

    pub fn mu_grid(&self) -> Result<Option<Q>, HarnessError> {
        self.mu_grid.as_deref().map(rational).transpose()
    }
}

pub fn rational(s: &str) -> Result<Q, HarnessError> {
    parse_q(s).map_err(|e| HarnessError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = ExperimentConfig::from_json(r#"{"command":"verify","n":2,"seeds":[1,2],"mode":"quarter"}"#).unwrap();
        let flags = ExperimentConfig { n: Some(1), ..Default::default() };
        let cfg = file.merged(flags);
        assert_eq!(cfg.command, Some(Command::Verify));
        assert_eq!(cfg.n, Some(1));
        assert_eq!(cfg.seeds, Some(vec![1, 2]));
    }

    #[test]
    fn field_parsing() {
        let cfg = ExperimentConfig { grid: Some("6x4".into()), focus: Some("3, -1".into()), ..Default::default() };
        assert_eq!(cfg.grid_spec().unwrap(), GridSpec::torus(6, 4));
        assert_eq!(cfg.focus().unwrap(), Focus::At(Coord::new(3, -1)));
        assert_eq!(cfg.seeds().unwrap().len(), 20);
        assert!(ExperimentConfig { seeds: Some(vec![]), ..Default::default() }.seeds().is_err());
        assert!(ExperimentConfig { grid: Some("4by4".into()), ..Default::default() }.grid_spec().is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
    }
}
