//! Outer bounds on the DoF region for uncoded BS-side placement.
//!
//! Every equal-size user/BS pair `(R, T)` with a full-rank cross channel
//! yields one inequality: all messages of `R`, plus the messages of the other
//! users reached by `T` whose groups lie inside `T`, sum to at most `|R|`.
//! Everything after the rank test is exact rational arithmetic.

pub mod cover;
pub mod simplex;
pub mod symmetric;

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::channel::{submatrix, ChannelSet};
use crate::error::Result;
use crate::linalg::{numeric_rank, DEFAULT_REL_TOL};
use crate::placement::{Placement, PlacementMode};
use crate::ratio::{format_q, qi, Q};
use crate::topology::{BsId, Topology, UserId};

use simplex::{maximize, LpOutcome};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RtPair {
    pub r: BTreeSet<UserId>,
    pub t: BTreeSet<BsId>,
    /// Users outside `R` that hear some BS of `T`.
    pub reached: BTreeSet<UserId>,
}

impl RtPair {
    pub fn new(top: &Topology, r: BTreeSet<UserId>, t: BTreeSet<BsId>) -> Self {
        let reached = top.users_reached_by(&t).difference(&r).copied().collect();
        RtPair { r, t, reached }
    }

    pub fn describe(&self, top: &Topology) -> String {
        format!(
            "({{{}}},{{{}}})",
            self.r.iter().map(|&u| top.user_label(u).to_string()).join(","),
            self.t.iter().map(|&b| top.bs_label(b).to_string()).join(",")
        )
    }
}

/// Whether `H_{R,T}` is full rank at one realization.
pub fn full_rank_pair(top: &Topology, cs: &ChannelSet, r: &[UserId], t: &[BsId]) -> Result<bool> {
    let h = submatrix(top, cs, r, t, 0)?;
    Ok(numeric_rank(&h, DEFAULT_REL_TOL)? == r.len())
}

/// All full-rank pairs with `|R| = |T| ≤ max_size`, ordered by size, then
/// `R`, then `T`.
pub fn enumerate_rt_pairs(top: &Topology, cs: &ChannelSet, max_size: usize) -> Result<Vec<RtPair>> {
    let users: Vec<UserId> = top.users().collect();
    let bss: Vec<BsId> = top.bss().collect();
    let mut out = Vec::new();
    for size in 1..=max_size.min(users.len()).min(bss.len()) {
        for r in users.iter().copied().combinations(size) {
            let reach: BTreeSet<BsId> =
                r.iter().flat_map(|&u| top.neighbors_of_user(u).expect("known user").iter().copied()).collect();
            for t in bss.iter().copied().combinations(size) {
                // Zero rows or columns rule the pair out before any SVD.
                if !t.iter().all(|b| reach.contains(b)) {
                    continue;
                }
                if !r.iter().all(|&u| t.iter().any(|&b| top.is_connected(u, b))) {
                    continue;
                }
                if full_rank_pair(top, cs, &r, &t)? {
                    out.push(RtPair::new(top, r.iter().copied().collect(), t.into_iter().collect()));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DofVariable {
    /// DoF of the subfile of group `group` requested by `user`.
    Message { user: UserId, group: usize },
    /// Symmetric DoF carried by one corner placement under memory sharing.
    Split(PlacementMode),
}

impl DofVariable {
    pub fn name(&self, top: &Topology, p: Option<&Placement>) -> String {
        match *self {
            DofVariable::Message { user, group } => {
                let label = p.and_then(|p| p.groups.get(group)).map_or(format!("A{}", group + 1), |g| g.label.clone());
                format!("d_{{{},{}}}", top.user_label(user), label)
            }
            DofVariable::Split(mode) => format!("d_{mode}"),
        }
    }
}

/// `Σ coeffs·d ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inequality {
    pub coeffs: BTreeMap<DofVariable, Q>,
    pub rhs: Q,
}

impl Inequality {
    pub fn coeff(&self, v: &DofVariable) -> Q {
        self.coeffs.get(v).cloned().unwrap_or_else(Q::zero)
    }

    /// Scaled so the right-hand side is one.
    pub fn normalized(&self) -> Inequality {
        if self.rhs.is_zero() {
            return self.clone();
        }
        let s = self.rhs.abs().recip();
        Inequality {
            coeffs: self.coeffs.iter().map(|(v, c)| (*v, c * &s)).collect(),
            rhs: &self.rhs * &s,
        }
    }

    pub fn to_document(&self, top: &Topology, p: Option<&Placement>) -> InequalityDocument {
        InequalityDocument {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.name(top, p), format_q(c))).collect(),
            rhs: format_q(&self.rhs),
        }
    }

    pub fn satisfied_by(&self, x: &BTreeMap<DofVariable, Q>) -> bool {
        let lhs: Q = self.coeffs.iter().map(|(v, c)| c * x.get(v).cloned().unwrap_or_else(Q::zero)).sum();
        lhs <= self.rhs
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityDocument {
    pub coeffs: BTreeMap<String, String>,
    pub rhs: String,
}

/// One inequality per pair.
pub fn region_inequalities(p: &Placement, pairs: &[RtPair]) -> Vec<Inequality> {
    pairs
        .iter()
        .map(|pair| {
            let mut coeffs: BTreeMap<DofVariable, Q> = BTreeMap::new();
            for &u in &pair.r {
                for k in 0..p.groups.len() {
                    *coeffs.entry(DofVariable::Message { user: u, group: k }).or_insert_with(Q::zero) += Q::one();
                }
            }
            let inside: Vec<usize> =
                (0..p.groups.len()).filter(|&k| p.groups[k].members.is_subset(&pair.t)).collect();
            for &u in &pair.reached {
                for &k in &inside {
                    *coeffs.entry(DofVariable::Message { user: u, group: k }).or_insert_with(Q::zero) += Q::one();
                }
            }
            Inequality { coeffs, rhs: qi(pair.r.len() as i64) }
        })
        .collect()
}

fn variables_of(ineqs: &[Inequality]) -> Vec<DofVariable> {
    ineqs.iter().flat_map(|i| i.coeffs.keys().copied()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Maximizes `objective` over `{x ≥ 0 : rows}`.
pub fn maximize_over(objective: &Inequality, rows: &[Inequality]) -> Result<LpOutcome> {
    let mut all = rows.to_vec();
    all.push(objective.clone());
    let vars = variables_of(&all);
    let c: Vec<Q> = vars.iter().map(|v| objective.coeff(v)).collect();
    let a: Vec<Vec<Q>> = rows.iter().map(|r| vars.iter().map(|v| r.coeff(v)).collect()).collect();
    let b: Vec<Q> = rows.iter().map(|r| r.rhs.clone()).collect();
    maximize(&c, &a, &b)
}

/// Drops, one at a time, every inequality implied by the remaining ones over
/// the nonnegative orthant.
pub fn remove_redundant(ineqs: &[Inequality]) -> Result<Vec<Inequality>> {
    let mut kept = ineqs.to_vec();
    let mut i = 0;
    while i < kept.len() {
        let others: Vec<Inequality> = kept.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r.clone()).collect();
        let implied = match maximize_over(&kept[i], &others)? {
            LpOutcome::Optimal { value, .. } => value <= kept[i].rhs,
            LpOutcome::Unbounded => false,
        };
        if implied {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(kept)
}

/// Set of normalized inequalities, for order-free comparison.
pub fn normalized_set(ineqs: &[Inequality]) -> BTreeSet<Vec<(DofVariable, Q)>> {
    ineqs
        .iter()
        .map(|i| {
            let n = i.normalized();
            n.coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channels;
    use crate::placement::{place, CacheGroup};
    use crate::ratio::q;
    use crate::topology::GridSpec;
    use proptest::prelude::*;

    pub(crate) fn two_user_fixture() -> (Topology, Placement) {
        let t = Topology::general(&["1", "2"], &["a", "b", "c"], &[("1", "a"), ("1", "b"), ("2", "b"), ("2", "c")])
            .unwrap();
        let b = |s| t.bs_named(s).unwrap();
        let groups = vec![
            CacheGroup { label: "A1".into(), members: [b("a"), b("c")].into(), fraction: q(1, 2), classes: vec![] },
            CacheGroup { label: "A2".into(), members: [b("b")].into(), fraction: q(1, 2), classes: vec![] },
        ];
        let p = Placement::custom(&t, groups).unwrap();
        (t, p)
    }

    fn d(t: &Topology, user: &str, group: usize) -> DofVariable {
        DofVariable::Message { user: t.user_named(user).unwrap(), group }
    }

    fn ineq(terms: &[(DofVariable, i64)], rhs: i64) -> Inequality {
        Inequality { coeffs: terms.iter().map(|(v, c)| (*v, qi(*c))).collect(), rhs: qi(rhs) }
    }

    #[test]
    fn two_user_pairs_and_region() {
        let (t, p) = two_user_fixture();
        let cs = draw_channels(&t, 1, 4).unwrap();
        let pairs = enumerate_rt_pairs(&t, &cs, 2).unwrap();
        let names: Vec<String> = pairs.iter().map(|x| x.describe(&t)).collect();
        assert_eq!(
            names,
            ["({1},{a})", "({1},{b})", "({2},{b})", "({2},{c})", "({1,2},{a,b})", "({1,2},{a,c})", "({1,2},{b,c})"]
        );
        let all = region_inequalities(&p, &pairs);
        assert_eq!(all[0], ineq(&[(d(&t, "1", 0), 1), (d(&t, "1", 1), 1)], 1));
        assert_eq!(all[1], ineq(&[(d(&t, "1", 0), 1), (d(&t, "1", 1), 1), (d(&t, "2", 1), 1)], 1));
        assert_eq!(all[5].coeffs.len(), 4);
        assert_eq!(all[5].rhs, qi(2));
        let reduced = remove_redundant(&all).unwrap();
        let expected = vec![
            ineq(&[(d(&t, "1", 0), 1), (d(&t, "1", 1), 1), (d(&t, "2", 1), 1)], 1),
            ineq(&[(d(&t, "2", 0), 1), (d(&t, "2", 1), 1), (d(&t, "1", 1), 1)], 1),
        ];
        assert_eq!(normalized_set(&reduced), normalized_set(&expected));
    }

    #[test]
    fn redundancy_examples() {
        let (t, _) = two_user_fixture();
        let a = ineq(&[(d(&t, "1", 0), 1), (d(&t, "2", 0), 2)], 1);
        let b = ineq(&[(d(&t, "1", 1), 1), (d(&t, "2", 0), 1)], 1);
        let kept = remove_redundant(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(kept, vec![a.clone()]);
        let mut sum = a.clone();
        for (v, c) in &b.coeffs {
            *sum.coeffs.entry(*v).or_insert_with(Q::zero) += c;
        }
        sum.rhs = qi(2);
        let kept = remove_redundant(&[a.clone(), b.clone(), sum]).unwrap();
        assert_eq!(kept, vec![a, b]);
    }

    #[test]
    fn grid_singletons() {
        let t = Topology::make_grid(GridSpec::torus(4, 4)).unwrap();
        let cs = draw_channels(&t, 1, 2).unwrap();
        let pairs = enumerate_rt_pairs(&t, &cs, 1).unwrap();
        assert_eq!(pairs.len(), 64);
        assert!(!pairs.iter().any(|p| p.r.len() != 1));
        let p = place(&t, PlacementMode::Quarter).unwrap();
        for ie in region_inequalities(&p, &pairs) {
            assert_eq!(ie.rhs, qi(1));
            let own: usize = ie.coeffs.keys().filter(|v| matches!(v, DofVariable::Message { .. })).count();
            assert_eq!(own, 4, "four own subfiles; a single BS holds no whole group");
        }
    }

    proptest! {
        #[test]
        fn reduction_preserves_polyhedron(
            rows in proptest::collection::vec((proptest::collection::vec(0i64..4, 3), 1i64..5), 1..7),
            points in proptest::collection::vec(proptest::collection::vec(0i64..12, 3), 20),
        ) {
            let (t, _) = two_user_fixture();
            let vars = [d(&t, "1", 0), d(&t, "1", 1), d(&t, "2", 0)];
            let ineqs: Vec<Inequality> = rows
                .iter()
                .map(|(cs, rhs)| Inequality {
                    coeffs: vars.iter().zip(cs).filter(|(_, &c)| c > 0).map(|(v, &c)| (*v, qi(c))).collect(),
                    rhs: qi(*rhs),
                })
                .collect();
            let reduced = remove_redundant(&ineqs).unwrap();
            for pt in &points {
                let x: BTreeMap<DofVariable, Q> = vars.iter().zip(pt).map(|(v, &p)| (*v, q(p, 4))).collect();
                prop_assert_eq!(
                    ineqs.iter().all(|i| i.satisfied_by(&x)),
                    reduced.iter().all(|i| i.satisfied_by(&x))
                );
            }
        }
    }
}
