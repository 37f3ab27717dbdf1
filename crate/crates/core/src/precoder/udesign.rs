//! Per-BS diagonal precoders `U` for the half-memory scheme.
//!
//! For an intended user at `(i,j)` and a group whose two classes share a
//! row residue (A1, A2) or a column residue (A3, A4), the group's BSs on the
//! line adjacent to the user either form a zero-forcing pair or carry random
//! diagonals, and all group BSs off that line stay silent. The pair is the
//! two line BSs the user hears; they are weighted by the partner user's
//! channels so the partner (the user mirrored across the line) sees exact
//! cancellation. Groups A5 and A6 use random diagonals everywhere.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{keyed_gaussians, ChannelSet};
use crate::error::{Error, Result};
use crate::placement::{Placement, PlacementMode};
use crate::poly::{Poly, Var};
use crate::topology::{BsId, Coord, Topology, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UEntry {
    Zero,
    /// `±H_{user,bs}`: one member of a zero-forcing pair.
    Channel { user: UserId, bs: BsId, negate: bool },
    Random,
}

type Key = (UserId, usize, BsId);

#[derive(Clone, Debug)]
pub struct UDesign {
    placement: Placement,
    entries: BTreeMap<Key, UEntry>,
    seed: u64,
    perturbation: BTreeMap<Key, Complex64>,
}

/// Orientation of the line a cooperative group uses around a user.
#[derive(Clone, Copy)]
enum Line {
    Row(i64),
    Column(i64),
}

fn line_for(group: usize, u: Coord) -> Option<Line> {
    let pick = |a: i64, b: i64, residue: i64| if a.rem_euclid(4) == residue { a } else { b };
    match group {
        0 => Some(Line::Row(pick(u.y - 1, u.y + 1, 0))),
        1 => Some(Line::Row(pick(u.y - 1, u.y + 1, 2))),
        2 => Some(Line::Column(pick(u.x - 1, u.x + 1, 0))),
        3 => Some(Line::Column(pick(u.x - 1, u.x + 1, 2))),
        _ => None,
    }
}

/// Builds the design for every (intended user, group, member BS).
pub fn build_u_design(t: &Topology, placement: &Placement, seed: u64) -> Result<UDesign> {
    if !t.is_grid() {
        return Err(Error::NotAGrid);
    }
    if placement.mode != PlacementMode::Half {
        return Err(Error::WrongPlacement("half"));
    }
    let mut entries = BTreeMap::new();
    for u in t.users() {
        let c = t.user_coord(u).expect("grid user");
        for (k, group) in placement.groups.iter().enumerate() {
            let Some(line) = line_for(k, c) else {
                for &b in &group.members {
                    entries.insert((u, k, b), UEntry::Random);
                }
                continue;
            };
            let (x, y, partner, on_line): (Coord, Coord, Coord, Box<dyn Fn(Coord) -> bool>) = match line {
                Line::Row(r) => {
                    let r_norm = t.normalize(Coord::new(0, r)).y;
                    (
                        Coord::new(c.x - 1, r),
                        Coord::new(c.x + 1, r),
                        Coord::new(c.x, 2 * r - c.y),
                        Box::new(move |b: Coord| b.y == r_norm),
                    )
                }
                Line::Column(col) => {
                    let c_norm = t.normalize(Coord::new(col, 0)).x;
                    (
                        Coord::new(col, c.y - 1),
                        Coord::new(col, c.y + 1),
                        Coord::new(2 * col - c.x, c.y),
                        Box::new(move |b: Coord| b.x == c_norm),
                    )
                }
            };
            let (bx, by) = (t.bs_at(x)?, t.bs_at(y)?);
            // Off a wrap grid the mirrored partner may not exist.
            let partner = t.user_at(partner).ok().filter(|&p| t.is_connected(p, bx) && t.is_connected(p, by));
            for &b in &group.members {
                let entry = if !on_line(t.bs_coord(b).expect("grid bs")) {
                    UEntry::Zero
                } else {
                    match partner {
                        Some(p) if b == bx => UEntry::Channel { user: p, bs: by, negate: false },
                        Some(p) if b == by => UEntry::Channel { user: p, bs: bx, negate: true },
                        _ => UEntry::Random,
                    }
                };
                entries.insert((u, k, b), entry);
            }
        }
    }
    Ok(UDesign { placement: placement.clone(), entries, seed, perturbation: BTreeMap::new() })
}

impl UDesign {
    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entry(&self, intended: UserId, group: usize, bs: BsId) -> UEntry {
        self.entries.get(&(intended, group, bs)).copied().unwrap_or(UEntry::Zero)
    }

    /// All non-default entries in key order.
    pub fn entries(&self) -> impl Iterator<Item = (Key, UEntry)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    /// Adds `eps` to every extension of one precoder. Only the numeric
    /// realization changes; the symbolic design still reports the original
    /// entry, which is what makes this usable as a negative control.
    pub fn perturbed(mut self, intended: UserId, group: usize, bs: BsId, eps: Complex64) -> Self {
        *self.perturbation.entry((intended, group, bs)).or_insert(Complex64::new(0.0, 0.0)) += eps;
        self
    }

    pub fn is_perturbed(&self) -> bool {
        !self.perturbation.is_empty()
    }

    pub fn symbolic(&self, intended: UserId, group: usize, bs: BsId) -> Poly {
        match self.entry(intended, group, bs) {
            UEntry::Zero => Poly::zero(),
            UEntry::Channel { user, bs, negate } => Poly::var(Var::H(user, bs)).scale(if negate { -1 } else { 1 }),
            UEntry::Random => Poly::var(Var::U { intended, group, bs }),
        }
    }

    /// Random-entry stream for one precoder at one channel seed.
    pub fn random_values(&self, t: &Topology, channel_seed: u64, intended: UserId, group: usize, bs: BsId, n: usize) -> Vec<Complex64> {
        let label = format!("u|{}|A{}|{}", t.user_label(intended), group + 1, t.bs_label(bs));
        keyed_gaussians(channel_seed ^ self.seed.rotate_left(32), &label, n)
    }

    /// The diagonal of `U` over every extension of `cs`.
    pub fn realize(&self, t: &Topology, cs: &ChannelSet, intended: UserId, group: usize, bs: BsId) -> Vec<Complex64> {
        let n = cs.extensions();
        let mut values = match self.entry(intended, group, bs) {
            UEntry::Zero => vec![Complex64::new(0.0, 0.0); n],
            UEntry::Channel { user, bs, negate } => {
                let sign = if negate { -1.0 } else { 1.0 };
                (0..n).map(|e| cs.gain(t, user, bs, e) * sign).collect()
            }
            UEntry::Random => self.random_values(t, cs.seed(), intended, group, bs, n),
        };
        if let Some(eps) = self.perturbation.get(&(intended, group, bs)) {
            values.iter_mut().for_each(|v| *v += eps);
        }
        values
    }
}
