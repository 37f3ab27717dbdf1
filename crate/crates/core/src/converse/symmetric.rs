//! Symmetric bounds under memory sharing, and the closed-form curves.
//!
//! For each candidate BS set `T` of the grid, the tightest pair inequality
//! collapses to `Σ_mode (1 + ρ(T)·f_mode(T)) d_mode ≤ 1`, where `ρ` is the
//! counted `|R̄|/|R|` and `f_mode(T)` the file share of that placement's
//! groups inside `T`. The two corner placements of a mixture are tied by
//! `d_low (1−γ) = d_high γ` and the symmetric DoF is `d_low + d_high`.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_traits::{One, Zero};
use petgraph::algo::maximum_matching;
use petgraph::graph::UnGraph;
use serde::Serialize;

use crate::channel::{draw_channels, ChannelSet};
use crate::error::{Error, Result};
use crate::placement::{check_mu, memory_share, place, MixturePlan, Placement, PlacementMode};
use crate::ratio::{format_q, q, qi, Q};
use crate::topology::{BsClass, BsId, GridSpec, Topology, UserId};
use crate::verify::{DofPoint, DofSource};

use super::simplex::{maximize, LpOutcome};
use super::{full_rank_pair, DofVariable, Inequality, RtPair};

/// One of the grid's BS sets: a union of BS classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub label: String,
    pub classes: Vec<BsClass>,
    pub bss: BTreeSet<BsId>,
}

fn class_union_label(classes: &[BsClass]) -> String {
    match classes.len() {
        4 => "All".into(),
        3 => {
            let missing = BsClass::ALL.iter().find(|c| !classes.contains(c)).expect("three of four");
            format!("All\\B{}", missing.number())
        }
        _ => classes.iter().map(|c| format!("B{}", c.number())).join("u"),
    }
}

/// Every nonempty union of BS classes, ordered by size, then by classes.
/// These are the fifteen candidates: four classes, six pairs, four
/// complements of a class, and all BSs.
pub fn class_union_candidates(t: &Topology) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for size in 1..=4 {
        for classes in BsClass::ALL.iter().copied().combinations(size) {
            let mut bss = BTreeSet::new();
            for &c in &classes {
                bss.extend(t.bss_of_class(c)?);
            }
            out.push(Candidate { label: class_union_label(&classes), classes, bss });
        }
    }
    Ok(out)
}

/// A maximum matching between `bss` and the users they reach.
pub fn matched_users(t: &Topology, bss: &BTreeSet<BsId>) -> Vec<UserId> {
    let reach: Vec<UserId> = t.users_reached_by(bss).into_iter().collect();
    let bs_list: Vec<BsId> = bss.iter().copied().collect();
    let mut g = UnGraph::<(), ()>::with_capacity(reach.len() + bs_list.len(), 4 * bs_list.len());
    let user_nodes: Vec<_> = reach.iter().map(|_| g.add_node(())).collect();
    let bs_nodes: Vec<_> = bs_list.iter().map(|_| g.add_node(())).collect();
    for (i, &u) in reach.iter().enumerate() {
        for (j, &b) in bs_list.iter().enumerate() {
            if t.is_connected(u, b) {
                g.add_edge(user_nodes[i], bs_nodes[j], ());
            }
        }
    }
    let m = maximum_matching(&g);
    let mut out: Vec<UserId> = m
        .edges()
        .map(|(a, b)| {
            let ui = a.index().min(b.index());
            reach[ui]
        })
        .collect();
    out.sort();
    out
}

/// A full-rank pair for `T`, with `R` a matching of `T` into the users.
pub fn pair_for(t: &Topology, cs: &ChannelSet, bss: &BTreeSet<BsId>) -> Result<Option<RtPair>> {
    let r = matched_users(t, bss);
    if r.len() < bss.len() {
        return Ok(None);
    }
    let tl: Vec<BsId> = bss.iter().copied().collect();
    if !full_rank_pair(t, cs, &r, &tl)? {
        return Ok(None);
    }
    Ok(Some(RtPair::new(t, r.into_iter().collect(), bss.clone())))
}

/// Counted `|R̄| / |R|` for a BS set, if it admits a full-rank pair.
pub fn counted_ratio(t: &Topology, cs: &ChannelSet, bss: &BTreeSet<BsId>) -> Result<Option<Q>> {
    Ok(pair_for(t, cs, bss)?.map(|p| q(p.reached.len() as i64, p.r.len() as i64)))
}

/// File share of a placement's groups lying inside `bss`.
pub fn share_inside(p: &Placement, bss: &BTreeSet<BsId>) -> Q {
    p.groups_within(bss).iter().map(|g| g.fraction.clone()).sum()
}

/// Side length of the reference torus used for the symmetric bound.
pub const REFERENCE_CELLS: usize = 4;
const REFERENCE_SEED: u64 = 0x5eed;

pub fn reference_torus() -> Topology {
    Topology::make_grid(GridSpec::torus(REFERENCE_CELLS, REFERENCE_CELLS)).expect("valid torus")
}

/// `d_low (1−γ) = d_high γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub low: PlacementMode,
    pub high: PlacementMode,
    pub gamma: Q,
}

#[derive(Clone, Debug)]
pub struct MemorySharingSystem {
    pub plan: MixturePlan,
    /// One row per candidate, labelled.
    pub rows: Vec<(String, Inequality)>,
    pub coupling: Coupling,
}

impl MemorySharingSystem {
    pub fn variables(&self) -> [DofVariable; 2] {
        [DofVariable::Split(self.coupling.low), DofVariable::Split(self.coupling.high)]
    }
}

/// Candidate-set inequalities over the two split variables of the mixture
/// realizing `mu`, computed on the reference torus.
pub fn memory_sharing_inequalities(mu: &Q) -> Result<MemorySharingSystem> {
    let plan = memory_share(mu)?;
    let t = reference_torus();
    let cs = draw_channels(&t, 1, REFERENCE_SEED)?;
    let low = place(&t, plan.low)?;
    let high = place(&t, plan.high)?;
    let mut rows = Vec::new();
    for cand in class_union_candidates(&t)? {
        let ratio = counted_ratio(&t, &cs, &cand.bss)?
            .ok_or_else(|| Error::Invalid(format!("candidate {} has no full-rank pair", cand.label)))?;
        let mut coeffs = BTreeMap::new();
        for p in [&low, &high] {
            coeffs.insert(DofVariable::Split(p.mode), Q::one() + &ratio * share_inside(p, &cand.bss));
        }
        rows.push((cand.label, Inequality { coeffs, rhs: qi(1) }));
    }
    let coupling = Coupling { low: plan.low, high: plan.high, gamma: plan.gamma.clone() };
    Ok(MemorySharingSystem { plan, rows, coupling })
}

/// Exact maximum of `d_low + d_high` under the rows and the coupling.
pub fn solve_symmetric_dof(sys: &MemorySharingSystem) -> Result<Q> {
    let vars = sys.variables();
    let gamma = &sys.coupling.gamma;
    let one_minus = Q::one() - gamma;
    let mut a: Vec<Vec<Q>> = sys.rows.iter().map(|(_, r)| vars.iter().map(|v| r.coeff(v)).collect()).collect();
    let mut b: Vec<Q> = sys.rows.iter().map(|(_, r)| r.rhs.clone()).collect();
    // Equality as a pair of opposite inequalities with zero right-hand side.
    a.push(vec![one_minus.clone(), -gamma.clone()]);
    a.push(vec![-one_minus, gamma.clone()]);
    b.push(Q::zero());
    b.push(Q::zero());
    match maximize(&[qi(1), qi(1)], &a, &b)? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Unbounded => Err(Error::Lp("unbounded")),
    }
}

/// The same optimum by eliminating the coupling and minimizing over rows.
pub fn solve_by_substitution(sys: &MemorySharingSystem) -> Result<Q> {
    let [lo, hi] = sys.variables();
    let gamma = &sys.coupling.gamma;
    // Direction of the feasible ray (d_low, d_high) with d_low + d_high = 1.
    let (dl, dh) = (gamma.clone(), Q::one() - gamma);
    let mut best: Option<Q> = None;
    for (_, row) in &sys.rows {
        let load = row.coeff(&lo) * &dl + row.coeff(&hi) * &dh;
        if load > Q::zero() {
            let cap = &row.rhs / load;
            best = Some(best.map_or(cap.clone(), |b: Q| b.min(cap)));
        }
    }
    best.ok_or(Error::Lp("unbounded"))
}

fn lower_half(mu: &Q) -> bool {
    *mu < q(1, 2)
}

/// Achievable `1/d`: `17/6 − 10μ/3` below one half, `4/3 − μ/3` above.
pub fn closed_form_lower(mu: &Q) -> Result<DofPoint> {
    check_mu(mu)?;
    let inv_d = if lower_half(mu) { q(17, 6) - q(10, 3) * mu } else { q(4, 3) - q(1, 3) * mu };
    Ok(DofPoint { mu: mu.clone(), inv_d, source: DofSource::AchievableClosedForm })
}

/// Upper bound: `d = min{2/(5−6μ), 6/(11−8μ)}` below one half, `3/(4−μ)` above.
pub fn closed_form_upper(mu: &Q) -> Result<DofPoint> {
    check_mu(mu)?;
    let d = if lower_half(mu) {
        let a = qi(2) / (qi(5) - qi(6) * mu);
        let b = qi(6) / (qi(11) - qi(8) * mu);
        a.min(b)
    } else {
        qi(3) / (qi(4) - mu)
    };
    Ok(DofPoint { mu: mu.clone(), inv_d: d.recip(), source: DofSource::UpperClosedForm })
}

/// Alternating-activation baseline: `1/d = 6 − 8μ` below one half, `3 − 2μ` above.
pub fn baseline_dof(mu: &Q) -> Result<DofPoint> {
    check_mu(mu)?;
    let inv_d = if lower_half(mu) { qi(6) - qi(8) * mu } else { qi(3) - qi(2) * mu };
    Ok(DofPoint { mu: mu.clone(), inv_d, source: DofSource::Baseline })
}

/// `d_upper − d_lower`.
pub fn gap(mu: &Q) -> Result<Q> {
    Ok(closed_form_upper(mu)?.d() - closed_form_lower(mu)?.d())
}

/// The LP optimum as a DoF point.
pub fn lp_upper(mu: &Q) -> Result<DofPoint> {
    let d = solve_symmetric_dof(&memory_sharing_inequalities(mu)?)?;
    Ok(DofPoint { mu: mu.clone(), inv_d: d.recip(), source: DofSource::UpperLp })
}

/// `{lo, lo+step, …, hi}`; `hi` is included when the step divides the range.
pub fn mu_grid(step: &Q) -> Result<Vec<Q>> {
    if *step <= Q::zero() {
        return Err(Error::Invalid("grid step must be positive".into()));
    }
    let mut out = Vec::new();
    let mut mu = q(1, 4);
    while mu <= qi(1) {
        out.push(mu.clone());
        mu += step;
    }
    Ok(out)
}

/// One row of the comparison curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub mu: String,
    pub inv_d_lower: String,
    pub inv_d_upper: String,
    pub inv_d_baseline: String,
    pub gap: String,
}

pub fn curve_row(mu: &Q) -> Result<CurveRow> {
    Ok(CurveRow {
        mu: format_q(mu),
        inv_d_lower: format_q(&closed_form_lower(mu)?.inv_d),
        inv_d_upper: format_q(&closed_form_upper(mu)?.inv_d),
        inv_d_baseline: format_q(&baseline_dof(mu)?.inv_d),
        gap: format_q(&gap(mu)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row<'a>(sys: &'a MemorySharingSystem, label: &str) -> &'a Inequality {
        &sys.rows.iter().find(|(l, _)| l == label).unwrap().1
    }

    #[test]
    fn candidates_and_ratios() {
        let t = reference_torus();
        let cands = class_union_candidates(&t).unwrap();
        assert_eq!(cands.len(), 15);
        let cs = draw_channels(&t, 1, 1).unwrap();
        for c in &cands {
            assert_eq!(t.users_reached_by(&c.bss).len(), t.num_users(), "{} reaches everyone", c.label);
            let expected = match c.bss.len() {
                4 => qi(3),
                8 => qi(1),
                12 => q(1, 3),
                16 => qi(0),
                other => panic!("size {other}"),
            };
            assert_eq!(counted_ratio(&t, &cs, &c.bss).unwrap(), Some(expected), "{}", c.label);
        }
        assert_eq!(cands[0].label, "B1");
        assert_eq!(cands[4].label, "B1uB2");
        assert_eq!(cands[10].label, "All\\B4");
        assert_eq!(cands[14].label, "All");
    }

    #[test]
    fn reference_rows() {
        let lo = memory_sharing_inequalities(&q(3, 8)).unwrap();
        let (dq, dh, df) = (
            DofVariable::Split(PlacementMode::Quarter),
            DofVariable::Split(PlacementMode::Half),
            DofVariable::Split(PlacementMode::Full),
        );
        assert_eq!(row(&lo, "B1").coeff(&dq), q(7, 4));
        assert_eq!(row(&lo, "B1").coeff(&dh), qi(1));
        assert_eq!(row(&lo, "All\\B1").coeff(&dq), q(5, 4));
        assert_eq!(row(&lo, "All\\B1").coeff(&dh), q(7, 6));
        let hi = memory_sharing_inequalities(&q(3, 4)).unwrap();
        assert_eq!(row(&hi, "B1uB2").coeff(&dh), q(7, 6));
        assert_eq!(row(&hi, "B1uB2").coeff(&df), qi(1));
    }

    #[test]
    fn lp_examples() {
        for (mu, d) in [(q(1, 4), q(4, 7)), (q(2, 5), q(10, 13)), (q(1, 2), q(6, 7)), (qi(1), qi(1))] {
            let sys = memory_sharing_inequalities(&mu).unwrap();
            assert_eq!(solve_symmetric_dof(&sys).unwrap(), d);
            assert_eq!(solve_by_substitution(&sys).unwrap(), d);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_lower(&q(1, 4)).unwrap().inv_d, qi(2));
        assert_eq!(closed_form_lower(&q(1, 2)).unwrap().inv_d, q(7, 6));
        assert_eq!(closed_form_lower(&qi(1)).unwrap().inv_d, qi(1));
        assert_eq!(closed_form_upper(&q(1, 4)).unwrap().d(), q(4, 7));
        assert_eq!(closed_form_upper(&q(3, 4)).unwrap().inv_d, q(13, 12));
        assert_eq!(closed_form_upper(&q(1, 2)).unwrap().inv_d, q(7, 6));
        assert_eq!(baseline_dof(&q(1, 4)).unwrap().inv_d, qi(4));
        assert_eq!(baseline_dof(&q(1, 2)).unwrap().inv_d, qi(2));
        assert_eq!(baseline_dof(&qi(1)).unwrap().inv_d, qi(1));
        assert_eq!(gap(&q(2, 5)).unwrap(), q(4, 39));
        assert_eq!(gap(&q(1, 2)).unwrap(), qi(0));
        assert_eq!(gap(&q(1, 4)).unwrap(), q(1, 14));
        assert!(closed_form_lower(&q(1, 5)).is_err());
        assert!(gap(&q(11, 10)).is_err());
        let row = curve_row(&q(1, 2)).unwrap();
        assert_eq!((row.inv_d_lower.as_str(), row.inv_d_upper.as_str(), row.inv_d_baseline.as_str(), row.gap.as_str()), ("7/6", "7/6", "2", "0"));
    }

    #[test]
    fn grid_properties() {
        let grid = mu_grid(&q(1, 120)).unwrap();
        assert_eq!(grid.len(), 91);
        let mut prev_lower: Option<Q> = None;
        let mut slopes = Vec::new();
        for mu in &grid {
            let lo = closed_form_lower(mu).unwrap();
            let up = closed_form_upper(mu).unwrap();
            assert!(up.d() >= lo.d());
            assert!(lo.inv_d <= baseline_dof(mu).unwrap().inv_d);
            if *mu >= q(1, 2) {
                assert_eq!(up.d(), lo.d());
            }
            if let Some(p) = &prev_lower {
                assert!(lo.inv_d <= *p);
                slopes.push(&lo.inv_d - p);
            }
            prev_lower = Some(lo.inv_d);
        }
        // Convex: successive differences never decrease.
        assert!(slopes.windows(2).all(|w| w[0] <= w[1]));
    }

    proptest! {
        #[test]
        fn lp_matches_closed_form_on_fine_grid(k in 30i64..=120) {
            let mu = q(k, 120);
            let sys = memory_sharing_inequalities(&mu).unwrap();
            prop_assert_eq!(solve_symmetric_dof(&sys).unwrap(), closed_form_upper(&mu).unwrap().d());
        }
    }
}
