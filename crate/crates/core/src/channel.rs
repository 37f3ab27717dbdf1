//! Random symbol-extended channels and effective interference channels.
//!
//! Every draw is keyed by `(seed, stream label, extension)` through a
//! ChaCha stream, so a sub-network sees the same coefficients regardless
//! of iteration order. Entries are unit-variance circularly symmetric
//! complex Gaussians (Box-Muller over two 64-bit uniforms).

use std::hash::Hasher;

use fnv::FnvHasher;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::precoder::udesign::UDesign;
use crate::topology::{BsId, Topology, UserId};

fn stream_key(label: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(label.as_bytes());
    h.finish()
}

fn unit_interval(bits: u64) -> f64 {
    // (0, 1]: never zero so the logarithm stays finite.
    ((bits >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

/// Deterministic CN(0,1) samples for extensions `0..count` of one stream.
pub fn keyed_gaussians(seed: u64, label: &str, count: usize) -> Vec<Complex64> {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream_key(label).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    (0..count)
        .map(|_| {
            let r = (-unit_interval(rng.next_u64()).ln()).sqrt();
            let theta = std::f64::consts::TAU * unit_interval(rng.next_u64());
            Complex64::from_polar(r, theta)
        })
        .collect()
}

/// Diagonal of one symbol-extended channel matrix.
pub type DiagChannel = Vec<Complex64>;

/// Channel realizations for every edge of a topology.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    extensions: usize,
    seed: u64,
    gains: Vec<DiagChannel>,
}

/// Draws `n` i.i.d. extensions for every edge of `t`.
pub fn draw_channels(t: &Topology, n: usize, seed: u64) -> Result<ChannelSet> {
    if n == 0 {
        return Err(Error::ZeroExtensions);
    }
    let gains = t
        .edges()
        .iter()
        .map(|&(u, b)| keyed_gaussians(seed, &format!("h|{}|{}", t.user_label(u), t.bs_label(b)), n))
        .collect();
    Ok(ChannelSet { extensions: n, seed, gains })
}

impl ChannelSet {
    pub fn extensions(&self) -> usize {
        self.extensions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The diagonal of `H_{u,b}`, or `None` when `u` does not hear `b`.
    pub fn channel(&self, t: &Topology, u: UserId, b: BsId) -> Option<&DiagChannel> {
        t.edge_id(u, b).map(|e| &self.gains[e])
    }

    /// Coefficient at one extension; exactly zero for non-edges.
    pub fn gain(&self, t: &Topology, u: UserId, b: BsId, ext: usize) -> Complex64 {
        self.channel(t, u, b).map_or(Complex64::new(0.0, 0.0), |h| h[ext])
    }

    /// `[re, im]` pairs per edge, for debugging dumps.
    pub fn dump(&self, t: &Topology) -> Vec<ChannelDump> {
        t.edges()
            .iter()
            .zip(&self.gains)
            .map(|(&(u, b), h)| ChannelDump {
                user: t.user_label(u).to_string(),
                bs: t.bs_label(b).to_string(),
                values: h.iter().map(|c| [c.re, c.im]).collect(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelDump {
    pub user: String,
    pub bs: String,
    pub values: Vec<[f64; 2]>,
}

/// `H_{R,T}` at one extension: the gain where an edge exists, zero elsewhere.
pub fn submatrix(
    t: &Topology,
    cs: &ChannelSet,
    users: &[UserId],
    bss: &[BsId],
    ext: usize,
) -> Result<DMatrix<Complex64>> {
    if ext >= cs.extensions {
        return Err(Error::ExtensionOutOfRange { index: ext, count: cs.extensions });
    }
    Ok(DMatrix::from_fn(users.len(), bss.len(), |r, c| cs.gain(t, users[r], bss[c], ext)))
}

/// How an effective channel `G` behaves at its target user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ChannelCase {
    /// The target is the intended user.
    Desired,
    /// Neutralized by a zero-forcing pair.
    CaseI,
    /// Both cooperating precoders are zero.
    CaseII,
    /// Nonzero interference to be aligned.
    CaseIII,
}

impl ChannelCase {
    pub fn is_neutralized(self) -> bool {
        matches!(self, ChannelCase::CaseI | ChannelCase::CaseII)
    }
}

/// `G = Σ_b H_{target,b} U^b_{intended,group}` over the two BSs of the group
/// that the target hears.
#[derive(Clone, Debug)]
pub struct EffectiveChannel {
    pub target: UserId,
    pub group: usize,
    pub intended: UserId,
    pub values: DiagChannel,
    pub case: ChannelCase,
    /// Largest `|H·U|` term magnitude; the scale for relative residuals.
    pub term_scale: f64,
}

/// The two cooperating BSs of `group` that `target` hears.
pub fn cooperating_pair(t: &Topology, design: &UDesign, target: UserId, group: usize) -> Result<[BsId; 2]> {
    let members = &design.placement().groups[group].members;
    let pair: Vec<BsId> = t.neighbors_of_user(target)?.iter().copied().filter(|b| members.contains(b)).collect();
    match pair.as_slice() {
        &[x, y] => Ok([x, y]),
        other => Err(Error::CooperationSize(other.len())),
    }
}

/// Symbolic `G` in the channel and precoder variables.
pub fn effective_poly(t: &Topology, design: &UDesign, target: UserId, group: usize, intended: UserId) -> Result<Poly> {
    let pair = cooperating_pair(t, design, target, group)?;
    Ok(pair.iter().fold(Poly::zero(), |acc, &b| {
        acc.add(&Poly::var(crate::poly::Var::H(target, b)).mul(&design.symbolic(intended, group, b)))
    }))
}

/// Exact case of `G` from its symbolic form.
pub fn classify(t: &Topology, design: &UDesign, target: UserId, group: usize, intended: UserId) -> Result<ChannelCase> {
    if target == intended {
        return Ok(ChannelCase::Desired);
    }
    let pair = cooperating_pair(t, design, target, group)?;
    if pair.iter().all(|&b| design.symbolic(intended, group, b).is_zero()) {
        return Ok(ChannelCase::CaseII);
    }
    if effective_poly(t, design, target, group, intended)?.is_zero() {
        Ok(ChannelCase::CaseI)
    } else {
        Ok(ChannelCase::CaseIII)
    }
}

/// Numeric `G` over every extension of `cs`, tagged with its case.
pub fn effective_channel(
    t: &Topology,
    cs: &ChannelSet,
    design: &UDesign,
    target: UserId,
    group: usize,
    intended: UserId,
) -> Result<EffectiveChannel> {
    let pair = cooperating_pair(t, design, target, group)?;
    let case = classify(t, design, target, group, intended)?;
    let mut values = vec![Complex64::new(0.0, 0.0); cs.extensions];
    let mut term_scale = 0.0f64;
    for &b in &pair {
        let h = cs.channel(t, target, b).expect("cooperating BS is a neighbor");
        let u = design.realize(t, cs, intended, group, b);
        for (ext, v) in values.iter_mut().enumerate() {
            let term = h[ext] * u[ext];
            term_scale = term_scale.max(term.norm());
            *v += term;
        }
    }
    Ok(EffectiveChannel { target, group, intended, values, case, term_scale })
}
