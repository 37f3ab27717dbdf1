//! Uncoded prefetching: BS cache groups and memory sharing.
//!
//! A [`CacheGroup`] stands in for one class of subfiles; its members are the
//! BSs holding that class and `fraction` is the share of every file it
//! covers. Subfile contents are never materialized.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio::{format_q, parse_q, q, qi, Q};
use crate::topology::{BsClass, BsId, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    Quarter,
    Half,
    Full,
    /// Arbitrary groups supplied by the caller (general topologies).
    Custom,
}

impl PlacementMode {
    /// Normalized cache size of the corner-point placements.
    pub fn mu(self) -> Option<Q> {
        match self {
            PlacementMode::Quarter => Some(q(1, 4)),
            PlacementMode::Half => Some(q(1, 2)),
            PlacementMode::Full => Some(qi(1)),
            PlacementMode::Custom => None,
        }
    }
}

impl fmt::Display for PlacementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlacementMode::Quarter => "quarter",
            PlacementMode::Half => "half",
            PlacementMode::Full => "full",
            PlacementMode::Custom => "custom",
        })
    }
}

impl std::str::FromStr for PlacementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quarter" => Ok(PlacementMode::Quarter),
            "half" => Ok(PlacementMode::Half),
            "full" => Ok(PlacementMode::Full),
            "custom" => Ok(PlacementMode::Custom),
            other => Err(Error::Invalid(format!("unknown placement mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheGroup {
    pub label: String,
    pub members: BTreeSet<BsId>,
    pub fraction: Q,
    /// BS classes whose union forms the group (grid placements only).
    pub classes: Vec<BsClass>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub mu: Q,
    pub mode: PlacementMode,
    pub groups: Vec<CacheGroup>,
}

/// Half-placement groups in label order `A1..A6`.
pub const HALF_GROUPS: [(BsClass, BsClass); 6] = [
    (BsClass::B1, BsClass::B2),
    (BsClass::B3, BsClass::B4),
    (BsClass::B1, BsClass::B3),
    (BsClass::B2, BsClass::B4),
    (BsClass::B1, BsClass::B4),
    (BsClass::B2, BsClass::B3),
];

/// Corner-point placement on a grid topology.
pub fn place(t: &Topology, mode: PlacementMode) -> Result<Placement> {
    if !t.is_grid() {
        return Err(Error::NotAGrid);
    }
    let union = |classes: &[BsClass]| -> Result<BTreeSet<BsId>> {
        let mut out = BTreeSet::new();
        for &c in classes {
            out.extend(t.bss_of_class(c)?);
        }
        Ok(out)
    };
    let groups = match mode {
        PlacementMode::Quarter => BsClass::ALL
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                Ok(CacheGroup {
                    label: format!("A{}", k + 1),
                    members: union(&[c])?,
                    fraction: q(1, 4),
                    classes: vec![c],
                })
            })
            .collect::<Result<Vec<_>>>()?,
        PlacementMode::Half => HALF_GROUPS
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                Ok(CacheGroup {
                    label: format!("A{}", k + 1),
                    members: union(&[a, b])?,
                    fraction: q(1, 6),
                    classes: vec![a, b],
                })
            })
            .collect::<Result<Vec<_>>>()?,
        PlacementMode::Full => vec![CacheGroup {
            label: "A1".into(),
            members: t.bss().collect(),
            fraction: qi(1),
            classes: BsClass::ALL.to_vec(),
        }],
        PlacementMode::Custom => return Err(Error::WrongPlacement("a corner-point")),
    };
    let placement = Placement { mu: mode.mu().expect("corner mode"), mode, groups };
    Ok(placement)
}

impl Placement {
    /// Arbitrary placement; `mu` is taken as the largest per-BS load.
    pub fn custom(t: &Topology, groups: Vec<CacheGroup>) -> Result<Placement> {
        if groups.is_empty() {
            return Err(Error::MalformedPlacement("no groups".into()));
        }
        for g in &groups {
            if g.members.is_empty() {
                return Err(Error::MalformedPlacement(format!("group {} has no members", g.label)));
            }
            if g.fraction <= Q::zero() || g.fraction > Q::one() {
                return Err(Error::MalformedPlacement(format!("group {} fraction outside (0,1]", g.label)));
            }
            if let Some(b) = g.members.iter().find(|b| b.0 >= t.num_bss()) {
                return Err(Error::MalformedPlacement(format!("unknown BS #{}", b.0)));
            }
        }
        let mut p = Placement { mu: Q::zero(), mode: PlacementMode::Custom, groups };
        p.mu = t.bss().map(|b| p.load(b)).max().unwrap_or_else(Q::zero);
        Ok(p)
    }

    /// Total file fraction cached at BS `b`.
    pub fn load(&self, b: BsId) -> Q {
        self.groups.iter().filter(|g| g.members.contains(&b)).map(|g| g.fraction.clone()).sum()
    }

    pub fn total_fraction(&self) -> Q {
        self.groups.iter().map(|g| g.fraction.clone()).sum()
    }

    /// Groups whose member set lies inside `bss`.
    pub fn groups_within(&self, bss: &BTreeSet<BsId>) -> Vec<&CacheGroup> {
        self.groups.iter().filter(|g| g.members.is_subset(bss)).collect()
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.label == label)
    }

    pub fn to_document(&self, t: &Topology) -> PlacementDocument {
        PlacementDocument {
            mu: format_q(&self.mu),
            mode: self.mode.to_string(),
            groups: self
                .groups
                .iter()
                .map(|g| GroupDocument {
                    label: g.label.clone(),
                    members: g.members.iter().map(|&b| t.bs_label(b).to_string()).collect(),
                    fraction: format_q(&g.fraction),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &PlacementDocument, t: &Topology) -> Result<Placement> {
        let mode: PlacementMode = doc.mode.parse()?;
        if mode != PlacementMode::Custom {
            let p = place(t, mode)?;
            if !doc.groups.is_empty() && doc.groups != p.to_document(t).groups {
                return Err(Error::MalformedPlacement(format!("groups do not match the {mode} placement")));
            }
            return Ok(p);
        }
        let mut groups = Vec::with_capacity(doc.groups.len());
        for g in &doc.groups {
            let members = g
                .members
                .iter()
                .map(|m| t.bs_named(m).map_err(|e| Error::MalformedPlacement(e.to_string())))
                .collect::<Result<BTreeSet<_>>>()?;
            groups.push(CacheGroup {
                label: g.label.clone(),
                members,
                fraction: parse_q(&g.fraction)?,
                classes: Vec::new(),
            });
        }
        let mut p = Placement::custom(t, groups)?;
        if !doc.mu.is_empty() {
            p.mu = parse_q(&doc.mu)?;
        }
        Ok(p)
    }
}

/// `{"mu":"p/q","mode":"half","groups":[{"label":"A1","members":[...],"fraction":"1/6"}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementDocument {
    #[serde(default)]
    pub mu: String,
    pub mode: String,
    #[serde(default)]
    pub groups: Vec<GroupDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDocument {
    pub label: String,
    pub members: Vec<String>,
    pub fraction: String,
}

/// Memory sharing between two corner placements: a `gamma` share of every
/// file follows `low`, the rest follows `high`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePlan {
    pub mu: Q,
    pub gamma: Q,
    pub low: PlacementMode,
    pub high: PlacementMode,
}

impl MixturePlan {
    /// The cache size this mixture realizes.
    pub fn realized_mu(&self) -> Q {
        let lo = self.low.mu().expect("corner");
        let hi = self.high.mu().expect("corner");
        &self.gamma * lo + (Q::one() - &self.gamma) * hi
    }
}

pub fn check_mu(mu: &Q) -> Result<()> {
    if *mu < q(1, 4) || *mu > qi(1) {
        return Err(Error::CacheSizeOutOfRange(format_q(mu)));
    }
    Ok(())
}

/// Splits `mu` into the two adjacent corner placements. Below 1/2 the mix is
/// quarter/half with `gamma = 2 - 4mu`; from 1/2 up it is half/full with
/// `gamma = 2 - 2mu`.
pub fn memory_share(mu: &Q) -> Result<MixturePlan> {
    check_mu(mu)?;
    let plan = if *mu < q(1, 2) {
        MixturePlan { mu: mu.clone(), gamma: qi(2) - qi(4) * mu, low: PlacementMode::Quarter, high: PlacementMode::Half }
    } else {
        MixturePlan { mu: mu.clone(), gamma: qi(2) - qi(2) * mu, low: PlacementMode::Half, high: PlacementMode::Full }
    };
    Ok(plan)
}
