//! Command runners. Each returns the rendered output and a pass verdict;
//! configuration problems come back as errors.

use std::fs;
use std::path::Path;

use gridcache_dof::channel::{cooperating_pair, draw_channels};
use gridcache_dof::converse::cover::candidate_cover;
use gridcache_dof::converse::symmetric::{closed_form_upper, curve_row, lp_upper, mu_grid};
use gridcache_dof::converse::{enumerate_rt_pairs, region_inequalities, remove_redundant, InequalityDocument};
use gridcache_dof::placement::{check_mu, place, Placement, PlacementDocument, PlacementMode};
use gridcache_dof::precoder::{
    build_full_zf, build_half_scheme, build_quarter_scheme_phase, build_u_design, micro_generators, Generator,
    HalfOptions, SchemeInstance, UDesign,
};
use gridcache_dof::ratio::{format_q, q, qi};
use gridcache_dof::topology::{load_topology, Topology, TopologyDocument, UserId};
use gridcache_dof::verify::{
    independence_family, jacobian_independence_check, verify_scheme, DofPoint, DofSource, VerificationReport,
    DECODABILITY_BUDGET,
};
use gridcache_dof::{Error, Q};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{rational, Command, ExperimentConfig, Focus, Mode, LP_CHECK_POINTS};

/// Relative cross-talk allowed after zero-forcing.
pub const ZF_CROSS_TALK_TOL: f64 = 1e-9;
pub const DEFAULT_DESIGN_SEED: u64 = 5;
pub const DEFAULT_MAX_SIZE: usize = 2;
const SABOTAGE_EPS: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub output: String,
    pub pass: bool,
}

impl Outcome {
    fn json<T: Serialize>(value: &T, pass: bool) -> Self {
        let mut output = serde_json::to_string_pretty(value).expect("report serializes");
        output.push('\n');
        Outcome { output, pass }
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    match cfg.command()? {
        Command::Curve => run_curve(cfg),
        Command::Verify => run_verify(cfg),
        Command::Region => run_region(cfg),
        Command::LpCheck => run_lp_check(cfg),
        Command::Jacobian => run_jacobian(cfg),
        Command::Cover => run_cover(cfg),
    }
}

/// Writes the outcome to the configured path, or returns it for stdout.
pub fn emit(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Option<String>, HarnessError> {
    match &cfg.out {
        Some(path) => {
            fs::write(path, &outcome.output).map_err(|source| io_error(path, source))?;
            Ok(None)
        }
        None => Ok(Some(outcome.output.clone())),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| io_error(path, source))
}

fn topology(cfg: &ExperimentConfig) -> Result<Topology, HarnessError> {
    match &cfg.topology {
        Some(path) => Ok(load_topology(&TopologyDocument::from_json(&read(path)?)?)?),
        None => Ok(Topology::make_grid(cfg.grid_spec()?)?),
    }
}

fn focus_users(t: &Topology, cfg: &ExperimentConfig) -> Result<Option<UserId>, HarnessError> {
    match cfg.focus()? {
        Focus::All => Ok(None),
        Focus::At(c) => Ok(Some(t.user_at(c)?)),
    }
}

fn mode(cfg: &ExperimentConfig, default: Mode) -> Mode {
    cfg.mode.unwrap_or(default)
}

pub fn run_curve(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let mus = match (cfg.mu()?, cfg.mu_grid()?) {
        (Some(mu), None) => vec![mu],
        (None, step) => mu_grid(&step.unwrap_or_else(|| q(1, 120)))?,
        (Some(_), Some(_)) => return Err(HarnessError::Config("give either mu or mu_grid, not both".into())),
    };
    let mut output = String::from("mu,inv_d_lower,inv_d_upper,inv_d_baseline,gap\n");
    for mu in &mus {
        let r = curve_row(mu)?;
        output.push_str(&format!("{},{},{},{},{}\n", r.mu, r.inv_d_lower, r.inv_d_upper, r.inv_d_baseline, r.gap));
    }
    Ok(Outcome { output, pass: true })
}

#[derive(Serialize)]
struct ZfReport {
    mode: &'static str,
    seeds: Vec<u64>,
    ranks: Vec<usize>,
    expected_rank: usize,
    max_cross_talk: f64,
    tolerance: f64,
    dof_point: Option<DofPoint>,
    pass: bool,
}

fn half_design(t: &Topology, cfg: &ExperimentConfig) -> Result<UDesign, HarnessError> {
    let p = place(t, PlacementMode::Half)?;
    Ok(build_u_design(t, &p, cfg.design_seed.unwrap_or(DEFAULT_DESIGN_SEED))?)
}

fn half_scheme(t: &Topology, design: &UDesign, cfg: &ExperimentConfig) -> Result<SchemeInstance, HarnessError> {
    let focus = focus_users(t, cfg)?;
    let subset = match cfg.micro {
        Some(count) => {
            let f = focus.ok_or_else(|| HarnessError::Config("a micro-instance needs a single focus user".into()))?;
            Some(micro_generators(t, design, f, count)?)
        }
        None => None,
    };
    let opts = HalfOptions { focus, allow_truncation: subset.is_some(), subset };
    Ok(build_half_scheme(t, design, cfg.n()?, &opts)?)
}

/// Nudges one precoder entry that a neutralized channel of the first
/// verified user depends on.
fn sabotaged(t: &Topology, design: &UDesign, s: &SchemeInstance) -> Result<UDesign, HarnessError> {
    let (target, group, intended) = s
        .users
        .first()
        .and_then(|u| {
            u.neutralized.iter().find_map(|(g, _)| match *g {
                Generator::Effective { target, group, intended } => Some((target, group, intended)),
                Generator::Raw { .. } => None,
            })
        })
        .ok_or_else(|| HarnessError::Config("nothing to sabotage: no neutralized channel".into()))?;
    let [bs, _] = cooperating_pair(t, design, target, group)?;
    Ok(design.clone().perturbed(intended, group, bs, Complex64::new(SABOTAGE_EPS, 0.0)))
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let t = topology(cfg)?;
    let seeds = cfg.seeds()?;
    let budget = cfg.budget.unwrap_or(DECODABILITY_BUDGET);
    let sabotage = cfg.sabotage.unwrap_or(false);
    let report: VerificationReport = match mode(cfg, Mode::Quarter) {
        Mode::Quarter => {
            let s = build_quarter_scheme_phase(&t, cfg.n()?, focus_users(&t, cfg)?, cfg.phase.unwrap_or(1))?;
            let s = if sabotage { s.without_generator(0) } else { s };
            verify_scheme(&s, &seeds, budget)?
        }
        Mode::Half => {
            let design = half_design(&t, cfg)?;
            let mut s = half_scheme(&t, &design, cfg)?;
            if sabotage {
                s = half_scheme(&t, &sabotaged(&t, &design, &s)?, cfg)?;
            }
            verify_scheme(&s, &seeds, budget)?
        }
        Mode::Full => return run_zf(&t, &seeds),
    };
    let pass = report.pass;
    Ok(Outcome { output: report.to_json() + "\n", pass })
}

fn run_zf(t: &Topology, seeds: &[u64]) -> Result<Outcome, HarnessError> {
    let expected_rank = t.num_users().min(t.num_bss());
    let mut ranks = Vec::new();
    let mut max_cross_talk = 0.0f64;
    let mut pass = true;
    for &seed in seeds {
        let cs = draw_channels(t, 1, seed)?;
        match build_full_zf(t, &cs) {
            Ok(zf) => {
                ranks.push(zf.rank);
                max_cross_talk = max_cross_talk.max(zf.cross_talk());
            }
            Err(Error::RankDeficient { rank, .. }) => {
                ranks.push(rank);
                pass = false;
            }
            Err(e) => return Err(e.into()),
        }
    }
    pass &= max_cross_talk <= ZF_CROSS_TALK_TOL;
    let dof_point = pass.then(|| DofPoint { mu: qi(1), inv_d: qi(1), source: DofSource::AchievableConstructed });
    let report =
        ZfReport { mode: "full", seeds: seeds.to_vec(), ranks, expected_rank, max_cross_talk, tolerance: ZF_CROSS_TALK_TOL, dof_point, pass };
    Ok(Outcome::json(&report, pass))
}

#[derive(Serialize)]
struct RegionReport {
    placement: String,
    pairs: usize,
    inequalities_before_reduction: usize,
    inequalities: Vec<InequalityDocument>,
}

pub fn run_region(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let t = topology(cfg)?;
    let placement = match &cfg.placement {
        Some(path) => {
            let doc: PlacementDocument =
                serde_json::from_str(&read(path)?).map_err(|e| HarnessError::Config(format!("placement: {e}")))?;
            Placement::from_document(&doc, &t)?
        }
        None => {
            let m = match mode(cfg, Mode::Quarter) {
                Mode::Quarter => PlacementMode::Quarter,
                Mode::Half => PlacementMode::Half,
                Mode::Full => PlacementMode::Full,
            };
            place(&t, m)?
        }
    };
    let seed = cfg.seeds()?[0];
    let cs = draw_channels(&t, 1, seed)?;
    let pairs = enumerate_rt_pairs(&t, &cs, cfg.max_size.unwrap_or(DEFAULT_MAX_SIZE))?;
    let all = region_inequalities(&placement, &pairs);
    let reduced = remove_redundant(&all)?;
    let report = RegionReport {
        placement: placement.mode.to_string(),
        pairs: pairs.len(),
        inequalities_before_reduction: all.len(),
        inequalities: reduced.iter().map(|i| i.to_document(&t, Some(&placement))).collect(),
    };
    Ok(Outcome::json(&report, true))
}

#[derive(Serialize)]
struct LpRow {
    mu: String,
    lp_d: String,
    closed_form_d: String,
    equal: bool,
}

#[derive(Serialize)]
struct LpReport {
    rows: Vec<LpRow>,
    pass: bool,
}

pub fn run_lp_check(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let mus: Vec<Q> = if let Some(points) = &cfg.points {
        points.iter().map(|p| rational(p)).collect::<Result<_, _>>()?
    } else if let Some(step) = cfg.mu_grid()? {
        mu_grid(&step)?
    } else if let Some(mu) = cfg.mu()? {
        vec![mu]
    } else {
        LP_CHECK_POINTS.iter().map(|p| rational(p)).collect::<Result<_, _>>()?
    };
    let mut rows = Vec::new();
    for mu in &mus {
        check_mu(mu)?;
        let lp = lp_upper(mu)?.d();
        let closed = closed_form_upper(mu)?.d();
        rows.push(LpRow { mu: format_q(mu), lp_d: format_q(&lp), closed_form_d: format_q(&closed), equal: lp == closed });
    }
    let pass = rows.iter().all(|r| r.equal);
    Ok(Outcome::json(&LpReport { rows, pass }, pass))
}

#[derive(Serialize)]
struct FamilyRow {
    user: String,
    group: String,
    rows: usize,
    cols: usize,
    ranks: Vec<usize>,
    full_row_rank: bool,
}

#[derive(Serialize)]
struct JacobianReport {
    points: Vec<u64>,
    families: Vec<FamilyRow>,
    duplicate_detected: bool,
    pass: bool,
}

pub fn run_jacobian(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let t = topology(cfg)?;
    let design = half_design(&t, cfg)?;
    let points = cfg.seeds()?;
    let users: Vec<UserId> = match focus_users(&t, cfg)? {
        Some(u) => vec![u],
        None => t.users().collect(),
    };
    let mut families = Vec::new();
    let mut duplicate_detected = true;
    for &u in &users {
        for (k, group) in design.placement().groups.iter().enumerate() {
            let family = independence_family(&t, &design, u, k)?;
            let mut ranks = Vec::new();
            let mut full = true;
            let mut cols = 0;
            for &p in &points {
                let j = jacobian_independence_check(&family, p)?;
                cols = j.cols;
                ranks.push(j.rank);
                full &= j.full_row_rank;
            }
            if family.len() > 1 {
                let mut dup = family.clone();
                dup.push(family[1].clone());
                for &p in &points {
                    duplicate_detected &= !jacobian_independence_check(&dup, p)?.full_row_rank;
                }
            }
            families.push(FamilyRow {
                user: t.user_label(u).to_string(),
                group: group.label.clone(),
                rows: family.len(),
                cols,
                ranks,
                full_row_rank: full,
            });
        }
    }
    let pass = duplicate_detected && families.iter().all(|f| f.full_row_rank);
    Ok(Outcome::json(&JacobianReport { points, families, duplicate_detected, pass }, pass))
}

pub fn run_cover(cfg: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let t = topology(cfg)?;
    let cs = draw_channels(&t, 1, cfg.seeds()?[0])?;
    let report = candidate_cover(&t, &cs, cfg.exhaustive.unwrap_or(true))?;
    let pass = report.pass();
    Ok(Outcome::json(&report, pass))
}
