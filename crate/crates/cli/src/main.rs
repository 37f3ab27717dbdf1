use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gridcache_cli::harness::{emit, run, HarnessError};
use gridcache_cli::{Command, ExperimentConfig, Mode};

/// Verification suites, bound curves and outer-bound regions for cache-aided
/// grid cellular networks.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on a
/// configuration or I/O error.
#[derive(Debug, Parser)]
#[command(name = "gridcache", version)]
struct Args {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    command: Option<Command>,
    /// Single cache size, `p/q`.
    #[arg(long)]
    mu: Option<String>,
    /// Step of the μ grid over [1/4, 1], `p/q`.
    #[arg(long)]
    mu_grid: Option<String>,
    /// Explicit μ list for lp-check.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<String>>,
    /// Alignment order.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Focus user `i,j`, or `all`.
    #[arg(long, allow_hyphen_values = true)]
    focus: Option<String>,
    /// Grid size `WxH` in cells.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, action = clap::ArgAction::Set)]
    wrap: Option<bool>,
    /// Topology document, used instead of a grid.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Placement document for region.
    #[arg(long)]
    placement: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Generator count of a truncated cooperative instance.
    #[arg(long)]
    micro: Option<usize>,
    #[arg(long)]
    phase: Option<u8>,
    /// Largest user set enumerated by region.
    #[arg(long)]
    max_size: Option<usize>,
    /// Cap on the extension count of a dense rank test.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    design_seed: Option<u64>,
    /// Perturb the scheme so verification must fail.
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    sabotage: Option<bool>,
    #[arg(long, action = clap::ArgAction::Set)]
    exhaustive: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Args {
    fn into_config(self) -> Result<ExperimentConfig, HarnessError> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        let flags = ExperimentConfig {
            command: self.command,
            grid: self.grid,
            wrap: self.wrap,
            topology: self.topology,
            placement: self.placement,
            mode: self.mode,
            mu: self.mu,
            mu_grid: self.mu_grid,
            points: self.points,
            n: self.n,
            seeds: self.seeds,
            focus: self.focus,
            micro: self.micro,
            phase: self.phase,
            max_size: self.max_size,
            budget: self.budget,
            design_seed: self.design_seed,
            sabotage: self.sabotage,
            exhaustive: self.exhaustive,
            out: self.out,
        };
        Ok(base.merged(flags))
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = args.into_config().and_then(|cfg| {
        let outcome = run(&cfg)?;
        if let Some(text) = emit(&cfg, &outcome)? {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
        Ok(outcome.exit_code())
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("gridcache: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
