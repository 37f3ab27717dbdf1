//! Checks for the achievability claims: exact neutralization, symbolic
//! alignment, distinct monomials, numeric decodability, algebraic
//! independence through Jacobian rank, and exact DoF accounting.

use std::collections::{BTreeSet, HashSet};

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, effective_poly, keyed_gaussians, ChannelCase, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{equilibrate, numeric_rank, DEFAULT_REL_TOL};
use crate::poly::{Poly, Var};
use crate::precoder::{basis_size, monomial_basis, DofAccount, ExponentVector, Generator, SchemeInstance, SchemeMode, UDesign};
use crate::ratio::{format_q, serde_q, Q};
use crate::topology::{Topology, UserId};

/// Default cap on the extension count of a dense rank test.
pub const DECODABILITY_BUDGET: u64 = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DofSource {
    AchievableClosedForm,
    AchievableConstructed,
    UpperClosedForm,
    UpperLp,
    Baseline,
}

/// One `(μ, 1/d)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofPoint {
    #[serde(with = "serde_q")]
    pub mu: Q,
    #[serde(with = "serde_q")]
    pub inv_d: Q,
    pub source: DofSource,
}

impl DofPoint {
    pub fn d(&self) -> Q {
        self.inv_d.recip()
    }
}

/// The constructed scheme's operating point.
pub fn dof_account(s: &SchemeInstance) -> DofPoint {
    DofPoint { mu: s.mu(), inv_d: s.dof().recip(), source: DofSource::AchievableConstructed }
}

#[derive(Clone, Debug, Serialize)]
pub struct Neutralization {
    /// Largest `‖G‖∞` relative to the largest `|H·U|` term.
    pub max_residual: f64,
    pub case_i: usize,
    pub case_ii: usize,
}

/// Residual of every Case I / Case II effective channel at a verified user.
pub fn check_neutralization(s: &SchemeInstance, user_index: usize, cs: &ChannelSet) -> Result<Neutralization> {
    let design = match (s.mode, &s.design) {
        (SchemeMode::Half, Some(d)) => d,
        _ => return Err(Error::WrongPlacement("half")),
    };
    let vu = &s.users[user_index];
    let mut out = Neutralization { max_residual: 0.0, case_i: 0, case_ii: 0 };
    for (g, case) in &vu.neutralized {
        let Generator::Effective { target, group, intended } = *g else { continue };
        match case {
            ChannelCase::CaseI => out.case_i += 1,
            ChannelCase::CaseII => out.case_ii += 1,
            _ => {}
        }
        let ec = effective_channel(&s.topology, cs, design, target, group, intended)?;
        let peak = ec.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let residual = if ec.term_scale > 0.0 { peak / ec.term_scale } else { peak };
        out.max_residual = out.max_residual.max(residual);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Alignment {
    pub ok: bool,
    /// `enumerated` when every column was checked, `box` for the range argument.
    pub method: &'static str,
    pub failures: Vec<String>,
}

/// Every interference column must land in the `[n+1]^g` monomial set.
pub fn check_alignment(s: &SchemeInstance, user_index: usize) -> Alignment {
    let vu = &s.users[user_index];
    let mut failures = Vec::new();
    let mut slots = Vec::new();
    for g in &vu.interference {
        match s.generators.index_of(g) {
            Some(i) => slots.push(i),
            None => failures.push(format!("{} is not a generator", g.describe(&s.topology))),
        }
    }
    let method = match monomial_basis(s.g(), s.n) {
        Ok(basis) => {
            for &slot in &slots {
                if let Some(e) = basis.iter().find(|e| !e.bumped(slot).in_box(s.n + 1)) {
                    failures.push(format!("column {e} times generator {slot} leaves the range"));
                }
            }
            "enumerated"
        }
        // Each exponent of [n]^g is at most n, so one extra factor stays in [n+1]^g.
        Err(_) => "box",
    };
    Alignment { ok: failures.is_empty(), method, failures }
}

/// A symbolic column of `Λ`: an optional desired factor times a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolicColumn {
    pub factor: Option<usize>,
    pub exponent: ExponentVector,
}

pub fn columns_distinct(cols: &[SymbolicColumn]) -> bool {
    let mut seen = HashSet::with_capacity(cols.len());
    cols.iter().all(|c| seen.insert(c))
}

/// Desired factors that coincide with a generator, as `(block, slot)`.
fn folded_factors(s: &SchemeInstance, user_index: usize) -> Result<Vec<Option<usize>>> {
    let gen_polys: Vec<Poly> = s.generators.as_slice().iter().map(|g| s.poly_of(g)).collect::<Result<_>>()?;
    s.users[user_index]
        .desired
        .iter()
        .map(|d| {
            let p = s.poly_of(d)?;
            Ok(gen_polys.iter().position(|gp| *gp == p))
        })
        .collect()
}

/// Columns of `Λ` for one user; desired factors equal to a generator are
/// folded into the exponent.
pub fn symbolic_lambda(s: &SchemeInstance, user_index: usize) -> Result<Vec<SymbolicColumn>> {
    let folded = folded_factors(s, user_index)?;
    let basis = monomial_basis(s.g(), s.n)?;
    let mut cols = Vec::new();
    for (k, f) in folded.iter().enumerate() {
        for e in &basis {
            cols.push(match f {
                Some(slot) => SymbolicColumn { factor: None, exponent: e.bumped(*slot) },
                None => SymbolicColumn { factor: Some(k), exponent: e.clone() },
            });
        }
    }
    for e in monomial_basis(s.g(), s.n + 1)? {
        cols.push(SymbolicColumn { factor: None, exponent: e });
    }
    Ok(cols)
}

/// Pairwise distinct columns of `Λ`, by enumeration when small and by the
/// factor structure otherwise.
pub fn check_distinct_monomials(s: &SchemeInstance, user_index: usize) -> Result<bool> {
    let desired: Vec<Poly> = s.users[user_index].desired.iter().map(|d| s.poly_of(d)).collect::<Result<_>>()?;
    let unique: BTreeSet<String> = desired.iter().map(|p| p.to_string()).collect();
    if unique.len() != desired.len() || desired.iter().any(Poly::is_zero) {
        return Ok(false);
    }
    match symbolic_lambda(s, user_index) {
        Ok(cols) => Ok(columns_distinct(&cols)),
        Err(Error::DimensionBudget { .. }) => Ok(folded_factors(s, user_index)?.iter().all(Option::is_none)),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Decodability {
    pub expected: usize,
    pub ranks: Vec<usize>,
    pub ok: bool,
}

/// Numeric rank of `Λ` on fresh channels (and random precoders) per seed.
pub fn check_decodability(s: &SchemeInstance, user_index: usize, seeds: &[u64], budget: u64) -> Result<Decodability> {
    let n_ext = s.n_ext_within(budget)?;
    let blocks = s.users[user_index].desired.len();
    let expected = (&s.m * BigUint::from(blocks) + basis_size(s.g(), s.n + 1)).to_usize().expect("within budget");
    let mut ranks = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cs = s.draw(seed, budget)?;
        debug_assert_eq!(cs.extensions(), n_ext);
        let mut lambda = s.lambda(user_index, &cs)?;
        equilibrate(&mut lambda);
        ranks.push(numeric_rank(&lambda, DEFAULT_REL_TOL)?);
    }
    let ok = !ranks.is_empty() && ranks.iter().all(|&r| r == expected);
    Ok(Decodability { expected, ranks, ok })
}

/// The polynomial family for one group around a user: the desired effective
/// channel plus every nonzero interference channel to that user from other
/// users of its class.
pub fn independence_family(t: &Topology, design: &UDesign, focus: UserId, group: usize) -> Result<Vec<Poly>> {
    let class = t.user_class_of(focus)?;
    let mut family = vec![effective_poly(t, design, focus, group, focus)?];
    for other in t.users().filter(|&o| o != focus && t.user_class_of(o).ok() == Some(class)) {
        let g = effective_poly(t, design, focus, group, other)?;
        if !g.is_zero() {
            family.push(g);
        }
    }
    Ok(family)
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobianCheck {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub full_row_rank: bool,
}

fn random_point(seed: u64) -> impl Fn(Var) -> Complex64 {
    move |v: Var| keyed_gaussians(seed, &format!("jac|{v}"), 1)[0]
}

/// Jacobian of `polys` in all their variables at a random point.
pub fn jacobian_independence_check(polys: &[Poly], point_seed: u64) -> Result<JacobianCheck> {
    let vars: Vec<Var> = polys.iter().flat_map(|p| p.variables()).collect::<BTreeSet<_>>().into_iter().collect();
    let point = random_point(point_seed);
    let jac = DMatrix::from_fn(polys.len(), vars.len(), |r, c| polys[r].derivative(vars[c]).eval(&point));
    let rank = numeric_rank(&jac, DEFAULT_REL_TOL)?;
    Ok(JacobianCheck { rows: polys.len(), cols: vars.len(), rank, full_row_rank: rank == polys.len() })
}

#[derive(Clone, Debug, Serialize)]
pub struct UserReport {
    pub user: String,
    pub interference_channels: usize,
    pub dropped_channels: usize,
    pub neutralization_residual: Option<f64>,
    pub neutralized_channels: usize,
    pub alignment_ok: bool,
    pub alignment_method: &'static str,
    pub distinct_monomials_ok: bool,
    pub rank_found: Vec<usize>,
    pub rank_expected: Option<usize>,
    /// Why the dense rank test did not run, if it did not.
    pub rank_skipped: Option<String>,
}

impl UserReport {
    pub fn pass(&self) -> bool {
        self.neutralization_residual.is_none_or(|r| r == 0.0)
            && self.alignment_ok
            && self.distinct_monomials_ok
            && self.rank_expected.is_none_or(|e| !self.rank_found.is_empty() && self.rank_found.iter().all(|&r| r == e))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub mode: String,
    pub g: usize,
    pub n: u32,
    pub m: String,
    pub n_ext: String,
    pub dof: String,
    pub truncated: bool,
    pub seeds: Vec<u64>,
    pub users: Vec<UserReport>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs every applicable check on every verified user.
pub fn verify_scheme(s: &SchemeInstance, seeds: &[u64], budget: u64) -> Result<VerificationReport> {
    if seeds.is_empty() {
        return Err(Error::Invalid("at least one seed is required".into()));
    }
    let mut users = Vec::new();
    for (i, vu) in s.users.iter().enumerate() {
        let neutralization = match s.mode {
            SchemeMode::Half => {
                let mut worst = 0.0f64;
                for &seed in seeds {
                    // A single extension is enough: cancellation is per extension.
                    let cs = crate::channel::draw_channels(&s.topology, 1, seed)?;
                    worst = worst.max(check_neutralization(s, i, &cs)?.max_residual);
                }
                Some(worst)
            }
            SchemeMode::Quarter { .. } => None,
        };
        let alignment = check_alignment(s, i);
        let (rank_found, rank_expected, rank_skipped) = match check_decodability(s, i, seeds, budget) {
            Ok(d) => (d.ranks, Some(d.expected), None),
            Err(e @ Error::DimensionBudget { .. }) => (Vec::new(), None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        users.push(UserReport {
            user: s.topology.user_label(vu.user).to_string(),
            interference_channels: vu.interference.len(),
            dropped_channels: vu.dropped.len(),
            neutralization_residual: neutralization,
            neutralized_channels: vu.neutralized.len(),
            alignment_ok: alignment.ok,
            alignment_method: alignment.method,
            distinct_monomials_ok: check_distinct_monomials(s, i)?,
            rank_found,
            rank_expected,
            rank_skipped,
        });
    }
    let pass = users.iter().all(UserReport::pass);
    Ok(VerificationReport {
        mode: match s.mode {
            SchemeMode::Quarter { .. } => "quarter".into(),
            SchemeMode::Half => "half".into(),
        },
        g: s.g(),
        n: s.n,
        m: s.m.to_string(),
        n_ext: s.n_ext.to_string(),
        dof: format_q(&s.dof()),
        truncated: s.generators.truncated,
        seeds: seeds.to_vec(),
        users,
        pass,
    })
}

/// `1/d` is at least one for any single-antenna user.
pub fn is_admissible(p: &DofPoint) -> bool {
    p.inv_d >= Q::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{place, PlacementMode};
    use crate::precoder::{build_half_scheme, build_quarter_scheme, build_u_design, micro_generators, HalfOptions};
    use crate::ratio::q;
    use crate::topology::{Coord, GridSpec};

    fn torus() -> Topology {
        Topology::make_grid(GridSpec::torus(4, 4)).unwrap()
    }

    #[test]
    fn quarter_focus_passes_small_orders() {
        let t = torus();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        for (n, rank) in [(1, 9), (2, 35)] {
            let s = build_quarter_scheme(&t, n, Some(u)).unwrap();
            assert!(check_alignment(&s, 0).ok);
            assert!(check_distinct_monomials(&s, 0).unwrap());
            let d = check_decodability(&s, 0, &[1, 2, 3], DECODABILITY_BUDGET).unwrap();
            assert_eq!(d.expected, rank);
            assert!(d.ok, "{:?}", d.ranks);
        }
    }

    #[test]
    fn removing_a_generator_breaks_alignment() {
        let t = torus();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let s = build_quarter_scheme(&t, 2, Some(u)).unwrap().without_generator(1);
        let a = check_alignment(&s, 0);
        assert!(!a.ok);
        assert_eq!(a.failures.len(), 1);
    }

    #[test]
    fn duplicate_column_detected() {
        let t = torus();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let s = build_quarter_scheme(&t, 2, Some(u)).unwrap();
        let mut cols = symbolic_lambda(&s, 0).unwrap();
        assert!(columns_distinct(&cols));
        let m = s.m.to_usize().unwrap();
        assert!(columns_distinct(&cols[m..]), "V(n+1) alone");
        cols.push(cols[3].clone());
        assert!(!columns_distinct(&cols));
    }

    #[test]
    fn half_neutralization_is_exact_and_sabotage_shows() {
        let t = torus();
        let p = place(&t, PlacementMode::Half).unwrap();
        let d = build_u_design(&t, &p, 5).unwrap();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let s = build_half_scheme(&t, &d, 1, &HalfOptions { focus: Some(u), ..Default::default() }).unwrap();
        let cs = crate::channel::draw_channels(&t, 4, 17).unwrap();
        let r = check_neutralization(&s, 0, &cs).unwrap();
        assert_eq!(r.max_residual, 0.0);
        assert_eq!((r.case_i, r.case_ii), (4, 32));
        assert!(check_alignment(&s, 0).ok);
        assert_eq!(check_alignment(&s, 0).method, "enumerated");
        let s2 = build_half_scheme(&t, &d, 2, &HalfOptions { focus: Some(u), ..Default::default() }).unwrap();
        let a2 = check_alignment(&s2, 0);
        assert!(a2.ok);
        assert_eq!(a2.method, "box");
        assert!(check_distinct_monomials(&s2, 0).unwrap());
        assert!(check_distinct_monomials(&s, 0).unwrap());

        let partner = t.user_at(Coord::new(1, -1)).unwrap();
        let bad = d.clone().perturbed(partner, 0, t.bs_at(Coord::new(0, 0)).unwrap(), Complex64::new(1e-3, 0.0));
        let sb = build_half_scheme(&t, &bad, 1, &HalfOptions { focus: Some(u), ..Default::default() }).unwrap();
        assert!(check_neutralization(&sb, 0, &cs).unwrap().max_residual > 0.0);
    }

    #[test]
    fn half_micro_rank() {
        let t = torus();
        let p = place(&t, PlacementMode::Half).unwrap();
        let d = build_u_design(&t, &p, 5).unwrap();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let subset = micro_generators(&t, &d, u, 3).unwrap();
        let opts = HalfOptions { focus: Some(u), subset: Some(subset), allow_truncation: true };
        let s = build_half_scheme(&t, &d, 2, &opts).unwrap();
        let r = check_decodability(&s, 0, &[1, 2], DECODABILITY_BUDGET).unwrap();
        assert_eq!(r.expected, 75);
        assert!(r.ok, "{:?}", r.ranks);
        assert_eq!(dof_account(&s).inv_d, q(75, 48));
    }

    #[test]
    fn jacobian_families() {
        let t = torus();
        let p = place(&t, PlacementMode::Half).unwrap();
        let d = build_u_design(&t, &p, 5).unwrap();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let a1 = independence_family(&t, &d, u, 0).unwrap();
        let j1 = jacobian_independence_check(&a1, 3).unwrap();
        assert_eq!((j1.rows, j1.cols), (2, 6));
        assert!(j1.full_row_rank);
        let a5 = independence_family(&t, &d, u, 4).unwrap();
        let j5 = jacobian_independence_check(&a5, 3).unwrap();
        assert_eq!((j5.rows, j5.cols), (4, 10));
        assert!(j5.full_row_rank);
        let mut dup = a5.clone();
        dup.push(a5[1].clone());
        assert!(!jacobian_independence_check(&dup, 3).unwrap().full_row_rank);
    }

    #[test]
    fn report_serializes() {
        let t = torus();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let s = build_quarter_scheme(&t, 1, Some(u)).unwrap();
        let r = verify_scheme(&s, &[1, 2], DECODABILITY_BUDGET).unwrap();
        assert!(r.pass);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["dof"], "1/9");
        assert_eq!(v["users"][0]["rank_expected"], 9);
    }
}
