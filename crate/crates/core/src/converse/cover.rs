//! Brute-force check that the fifteen class unions are the only BS sets
//! that matter for the symmetric bound on a grid.
//!
//! For a BS set `T` with a full-rank pair, a placement contributes
//! `λ(T) = ρ(T)·f(T)` to the coefficient of its split variable. A set is
//! covered when some candidate beats it for every placement at once.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::Serialize;

use crate::channel::ChannelSet;
use crate::error::Result;
use crate::placement::{place, Placement, PlacementMode};
use crate::ratio::{format_q, q, Q};
use crate::topology::{BsId, Topology};

use super::symmetric::{counted_ratio, matched_users, share_inside, class_union_candidates};

const MODES: [PlacementMode; 3] = [PlacementMode::Quarter, PlacementMode::Half, PlacementMode::Full];

#[derive(Clone, Debug, Serialize)]
pub struct CandidateRow {
    pub label: String,
    pub size: usize,
    pub ratio: String,
    /// `λ` per placement, in quarter, half, full order.
    pub lambda: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Maximizer {
    pub mode: String,
    pub lambda: String,
    pub sets: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub candidates: Vec<CandidateRow>,
    /// Counted ratio per candidate size.
    pub ratio_table: BTreeMap<usize, String>,
    pub ratio_table_ok: bool,
    pub maximizers: Vec<Maximizer>,
    pub structured_ok: bool,
    pub subsets_checked: usize,
    pub subsets_with_pair: usize,
    pub uncovered: Vec<String>,
    pub exhaustive_ok: bool,
}

impl CoverReport {
    pub fn pass(&self) -> bool {
        self.ratio_table_ok && self.structured_ok && self.exhaustive_ok
    }
}

fn lambdas(ratio: &Q, placements: &[Placement], bss: &BTreeSet<BsId>) -> Vec<Q> {
    placements.iter().map(|p| ratio * share_inside(p, bss)).collect()
}

/// Runs the structured search over class unions, the ratio table and, when
/// `exhaustive`, the cover check over every subset of BSs.
pub fn candidate_cover(t: &Topology, cs: &ChannelSet, exhaustive: bool) -> Result<CoverReport> {
    let placements: Vec<Placement> = MODES.iter().map(|&m| place(t, m)).collect::<Result<_>>()?;
    let quarter_bss = t.num_bss() / 4;
    let expected_ratio = |size: usize| -> Q {
        let users = t.num_users() as i64;
        q(users - size as i64, size as i64)
    };

    let mut candidates = Vec::new();
    let mut vectors = Vec::new();
    let mut ratio_table = BTreeMap::new();
    let mut ratio_table_ok = true;
    for cand in class_union_candidates(t)? {
        let ratio = counted_ratio(t, cs, &cand.bss)?.unwrap_or_else(Q::zero);
        ratio_table_ok &= ratio == expected_ratio(cand.bss.len());
        ratio_table.entry(cand.bss.len()).or_insert_with(|| format_q(&ratio));
        let lam = lambdas(&ratio, &placements, &cand.bss);
        candidates.push(CandidateRow {
            label: cand.label.clone(),
            size: cand.bss.len(),
            ratio: format_q(&ratio),
            lambda: lam.iter().map(format_q).collect(),
        });
        vectors.push((cand.label, cand.bss, lam));
    }
    ratio_table_ok &= ratio_table.len() == 4 && ratio_table.keys().copied().eq([1, 2, 3, 4].map(|k| k * quarter_bss));

    // Structured search: every union of classes, scored per placement.
    let candidate_labels: BTreeSet<&str> = vectors.iter().map(|(l, _, _)| l.as_str()).collect();
    let mut maximizers = Vec::new();
    let mut structured_ok = true;
    for (i, mode) in MODES.iter().enumerate() {
        let best = vectors.iter().map(|(_, _, v)| v[i].clone()).max().expect("nonempty");
        let sets: Vec<String> = vectors.iter().filter(|(_, _, v)| v[i] == best).map(|(l, _, _)| l.clone()).collect();
        structured_ok &= sets.iter().all(|s| candidate_labels.contains(s.as_str()));
        maximizers.push(Maximizer { mode: mode.to_string(), lambda: format_q(&best), sets });
    }

    let mut subsets_checked = 0;
    let mut subsets_with_pair = 0;
    let mut uncovered = Vec::new();
    if exhaustive {
        let bss: Vec<BsId> = t.bss().collect();
        let total_users = t.num_users();
        for mask in 1u64..(1u64 << bss.len()) {
            subsets_checked += 1;
            let set: BTreeSet<BsId> = bss.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &b)| b).collect();
            let shares: Vec<Q> = placements.iter().map(|p| share_inside(p, &set)).collect();
            if shares.iter().all(Zero::is_zero) {
                // λ is zero for every placement: nothing to cover.
                continue;
            }
            if matched_users(t, &set).len() < set.len() {
                continue;
            }
            subsets_with_pair += 1;
            let reached = t.users_reached_by(&set).len();
            debug_assert!(reached <= total_users);
            let ratio = q(reached as i64 - set.len() as i64, set.len() as i64);
            let lam: Vec<Q> = shares.iter().map(|s| &ratio * s).collect();
            let covered = vectors.iter().any(|(_, _, v)| v.iter().zip(&lam).all(|(c, x)| x <= c));
            if !covered {
                uncovered.push(set.iter().map(|&b| t.bs_label(b).to_string()).collect::<Vec<_>>().join(" "));
            }
        }
    }
    let exhaustive_ok = !exhaustive || uncovered.is_empty();
    Ok(CoverReport {
        candidates,
        ratio_table,
        ratio_table_ok,
        maximizers,
        structured_ok,
        subsets_checked,
        subsets_with_pair,
        uncovered,
        exhaustive_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channels;
    use crate::topology::GridSpec;

    #[test]
    fn structured_search_on_reference_torus() {
        let t = Topology::make_grid(GridSpec::torus(4, 4)).unwrap();
        let cs = draw_channels(&t, 1, 8).unwrap();
        let r = candidate_cover(&t, &cs, false).unwrap();
        assert!(r.ratio_table_ok && r.structured_ok);
        let table: Vec<&str> = r.ratio_table.values().map(String::as_str).collect();
        assert_eq!(table, ["3", "1", "1/3", "0"]);
        assert_eq!(r.maximizers[0].lambda, "3/4");
        assert_eq!(r.maximizers[0].sets, ["B1", "B2", "B3", "B4"]);
        assert_eq!(r.maximizers[1].lambda, "1/6");
        assert_eq!(r.maximizers[1].sets.len(), 10, "pair unions tie with class complements");
    }

    #[test]
    fn every_subset_is_covered_by_a_candidate() {
        let t = Topology::make_grid(GridSpec::torus(4, 4)).unwrap();
        let cs = draw_channels(&t, 1, 3).unwrap();
        let r = candidate_cover(&t, &cs, true).unwrap();
        assert_eq!(r.subsets_checked, (1 << 16) - 1);
        assert!(r.subsets_with_pair > 0);
        assert!(r.uncovered.is_empty(), "{:?}", &r.uncovered[..r.uncovered.len().min(5)]);
        assert!(r.pass());
    }
}
