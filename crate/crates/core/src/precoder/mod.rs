//! Delivery schemes: per-phase asymptotic alignment at `μ = 1/4`, cooperative
//! neutralize-then-align at `μ = 1/2` and network-wide zero forcing at `μ = 1`.
//!
//! Scheme instances are symbolic: they record generators, desired factors and
//! interference terms per verified user. Numeric realizations are produced on
//! demand against a channel set drawn with the instance's extension count.

pub mod monomial;
pub mod udesign;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::channel::{classify, draw_channels, effective_channel, effective_poly, submatrix, ChannelCase, ChannelSet};
use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, DEFAULT_REL_TOL};
use crate::poly::{Poly, Var};
use crate::ratio::{qi, Q};
use crate::topology::{BsId, Coord, Topology, UserId};

pub use monomial::{basis_size, monomial_basis, ExponentVector};
pub use udesign::{build_u_design, UDesign, UEntry};

/// A diagonal channel used to build precoder columns or desired blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Generator {
    Raw { user: UserId, bs: BsId },
    Effective { target: UserId, group: usize, intended: UserId },
}

impl Generator {
    pub fn describe(&self, t: &Topology) -> String {
        match *self {
            Generator::Raw { user, bs } => format!("H[{}|{}]", t.user_label(user), t.bs_label(bs)),
            Generator::Effective { target, group, intended } => {
                format!("G[{}|A{}|{}]", t.user_label(target), group + 1, t.user_label(intended))
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GeneratorSet {
    gens: Vec<Generator>,
    index: BTreeMap<Generator, usize>,
    pub truncated: bool,
}

impl GeneratorSet {
    pub fn new(gens: Vec<Generator>, truncated: bool) -> Self {
        let mut out = GeneratorSet { gens: Vec::new(), index: BTreeMap::new(), truncated };
        for g in gens {
            if !out.index.contains_key(&g) {
                out.index.insert(g, out.gens.len());
                out.gens.push(g);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn as_slice(&self) -> &[Generator] {
        &self.gens
    }

    pub fn index_of(&self, g: &Generator) -> Option<usize> {
        self.index.get(g).copied()
    }
}

/// BS `(p,q)` in phase `k` serves the user on the k-th diagonal.
fn phase_offset(phase: u8) -> Result<(i64, i64)> {
    match phase {
        1 => Ok((-1, 1)),
        2 => Ok((1, 1)),
        3 => Ok((1, -1)),
        4 => Ok((-1, -1)),
        other => Err(Error::InvalidPhase(other)),
    }
}

/// The user a BS serves in a phase, if that user exists.
pub fn phase_partner(t: &Topology, phase: u8, bs: BsId) -> Result<Option<UserId>> {
    let (dx, dy) = phase_offset(phase)?;
    let c = t.bs_coord(bs).ok_or(Error::NotAGrid)?;
    Ok(t.user_at(Coord::new(c.x + dx, c.y + dy)).ok())
}

/// The BS serving a user in a phase.
pub fn serving_bs(t: &Topology, phase: u8, u: UserId) -> Result<BsId> {
    let (dx, dy) = phase_offset(phase)?;
    let c = t.user_coord(u).ok_or(Error::NotAGrid)?;
    t.bs_at(Coord::new(c.x - dx, c.y - dy))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeMode {
    Quarter { phase: u8 },
    Half,
}

/// Everything the verifier needs about one user.
#[derive(Clone, Debug)]
pub struct VerifiedUser {
    pub user: UserId,
    /// Desired-signal factors, one block of `M` columns each.
    pub desired: Vec<Generator>,
    /// Interference channels covered by the generator set.
    pub interference: Vec<Generator>,
    /// Interference left out by an explicit truncation.
    pub dropped: Vec<Generator>,
    /// Effective channels expected to vanish, with their case.
    pub neutralized: Vec<(Generator, ChannelCase)>,
}

#[derive(Clone, Debug)]
pub struct SchemeInstance {
    pub mode: SchemeMode,
    pub topology: Topology,
    pub design: Option<UDesign>,
    pub n: u32,
    pub generators: GeneratorSet,
    /// Signal dimension per message, `n^g`.
    pub m: BigUint,
    /// Symbol extensions.
    pub n_ext: BigUint,
    pub users: Vec<VerifiedUser>,
}

fn dims(blocks: usize, g: usize, n: u32) -> (BigUint, BigUint) {
    let m = basis_size(g, n);
    let n_ext = &m * BigUint::from(blocks) + basis_size(g, n + 1);
    (m, n_ext)
}

/// Four-phase alignment scheme for one phase (phase 1 unless given).
///
/// With `focus`, the generator set holds only that user's three interference
/// channels; otherwise it holds the interference channels of every user.
pub fn build_quarter_scheme(t: &Topology, n: u32, focus: Option<UserId>) -> Result<SchemeInstance> {
    build_quarter_scheme_phase(t, n, focus, 1)
}

pub fn build_quarter_scheme_phase(t: &Topology, n: u32, focus: Option<UserId>, phase: u8) -> Result<SchemeInstance> {
    if n == 0 {
        return Err(Error::ZeroOrder);
    }
    phase_offset(phase)?;
    if !t.is_grid() {
        return Err(Error::NotAGrid);
    }
    let interferers_of = |u: UserId| -> Result<(BsId, Vec<Generator>)> {
        let desired = serving_bs(t, phase, u)?;
        let mut gens = Vec::new();
        for &b in t.neighbors_of_user(u)? {
            // A BS with no partner in this phase stays idle.
            if b != desired && phase_partner(t, phase, b)?.is_some() {
                gens.push(Generator::Raw { user: u, bs: b });
            }
        }
        Ok((desired, gens))
    };
    let verified: Vec<UserId> = match focus {
        Some(u) => {
            t.neighbors_of_user(u)?;
            vec![u]
        }
        None => t.users().collect(),
    };
    let mut users = Vec::new();
    let mut all = Vec::new();
    for &u in &verified {
        let (desired, gens) = interferers_of(u)?;
        all.extend(gens.iter().copied());
        users.push(VerifiedUser {
            user: u,
            desired: vec![Generator::Raw { user: u, bs: desired }],
            interference: gens,
            dropped: Vec::new(),
            neutralized: Vec::new(),
        });
    }
    if all.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    let generators = GeneratorSet::new(all, focus.is_some());
    let (m, n_ext) = dims(1, generators.len(), n);
    Ok(SchemeInstance { mode: SchemeMode::Quarter { phase }, topology: t.clone(), design: None, n, generators, m, n_ext, users })
}

/// Options for the cooperative scheme.
#[derive(Clone, Debug, Default)]
pub struct HalfOptions {
    pub focus: Option<UserId>,
    /// Explicit generator list (a micro-instance) instead of the full set.
    pub subset: Option<Vec<Generator>>,
    /// Accept a subset that leaves out interference channels.
    pub allow_truncation: bool,
}

/// Cooperative neutralize-then-align scheme over a half-placement design.
pub fn build_half_scheme(t: &Topology, design: &UDesign, n: u32, opts: &HalfOptions) -> Result<SchemeInstance> {
    if n == 0 {
        return Err(Error::ZeroOrder);
    }
    let verified: Vec<UserId> = match opts.focus {
        Some(u) => {
            t.neighbors_of_user(u)?;
            vec![u]
        }
        None => t.users().collect(),
    };
    let groups = design.placement().groups.len();
    let mut users = Vec::new();
    let mut all = Vec::new();
    for &u in &verified {
        let mut interference = Vec::new();
        let mut neutralized = Vec::new();
        for k in 0..groups {
            for other in t.users().filter(|&o| o != u) {
                let g = Generator::Effective { target: u, group: k, intended: other };
                match classify(t, design, u, k, other)? {
                    ChannelCase::CaseIII => interference.push(g),
                    case => neutralized.push((g, case)),
                }
            }
        }
        all.extend(interference.iter().copied());
        users.push(VerifiedUser {
            user: u,
            desired: (0..groups).map(|k| Generator::Effective { target: u, group: k, intended: u }).collect(),
            interference,
            dropped: Vec::new(),
            neutralized,
        });
    }
    let generators = match &opts.subset {
        None => GeneratorSet::new(all, opts.focus.is_some()),
        Some(subset) => {
            let known = GeneratorSet::new(all.clone(), false);
            if let Some(bad) = subset.iter().find(|g| known.index_of(g).is_none()) {
                return Err(Error::Invalid(format!("{} is not an interference channel", bad.describe(t))));
            }
            let chosen = GeneratorSet::new(subset.clone(), true);
            if let Some(missing) = all.iter().find(|g| chosen.index_of(g).is_none()) {
                if !opts.allow_truncation {
                    return Err(Error::TruncatedInterference(missing.describe(t)));
                }
            }
            for vu in &mut users {
                let (keep, drop): (Vec<_>, Vec<_>) = vu.interference.iter().partition(|g| chosen.index_of(g).is_some());
                vu.interference = keep;
                vu.dropped = drop;
            }
            chosen
        }
    };
    if generators.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    let (m, n_ext) = dims(groups, generators.len(), n);
    Ok(SchemeInstance {
        mode: SchemeMode::Half,
        topology: t.clone(),
        design: Some(design.clone()),
        n,
        generators,
        m,
        n_ext,
        users,
    })
}

/// `count` interference channels of `focus`, spread across groups in the
/// order A1, A5, A6, A2, A3, A4 so the mix covers both precoder structures.
pub fn micro_generators(t: &Topology, design: &UDesign, focus: UserId, count: usize) -> Result<Vec<Generator>> {
    let full = build_half_scheme(t, design, 1, &HalfOptions { focus: Some(focus), ..Default::default() })?;
    let mut by_group: BTreeMap<usize, Vec<Generator>> = BTreeMap::new();
    for g in &full.users[0].interference {
        if let Generator::Effective { group, .. } = g {
            by_group.entry(*group).or_default().push(*g);
        }
    }
    let order = [0usize, 4, 5, 1, 2, 3];
    let mut out = Vec::new();
    let mut depth = 0;
    while out.len() < count {
        let before = out.len();
        for k in order {
            if out.len() == count {
                break;
            }
            if let Some(g) = by_group.get(&k).and_then(|v| v.get(depth)) {
                out.push(*g);
            }
        }
        if out.len() == before {
            return Err(Error::Invalid(format!("only {} interference channels available", out.len())));
        }
        depth += 1;
    }
    Ok(out)
}

impl SchemeInstance {
    pub fn desired_blocks(&self) -> usize {
        match self.mode {
            SchemeMode::Quarter { .. } => 1,
            SchemeMode::Half => self.design.as_ref().map_or(6, |d| d.placement().groups.len()),
        }
    }

    pub fn g(&self) -> usize {
        self.generators.len()
    }

    pub fn mu(&self) -> Q {
        match self.mode {
            SchemeMode::Quarter { .. } => crate::ratio::q(1, 4),
            SchemeMode::Half => crate::ratio::q(1, 2),
        }
    }

    /// Symbolic form of a generator or desired factor.
    pub fn poly_of(&self, g: &Generator) -> Result<Poly> {
        match *g {
            Generator::Raw { user, bs } => Ok(Poly::var(Var::H(user, bs))),
            Generator::Effective { target, group, intended } => {
                let design = self.design.as_ref().ok_or(Error::WrongPlacement("half"))?;
                effective_poly(&self.topology, design, target, group, intended)
            }
        }
    }

    /// Numeric diagonal of a generator or desired factor.
    pub fn values_of(&self, cs: &ChannelSet, g: &Generator) -> Result<Vec<Complex64>> {
        let t = &self.topology;
        match *g {
            Generator::Raw { user, bs } => {
                Ok(cs.channel(t, user, bs).cloned().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); cs.extensions()]))
            }
            Generator::Effective { target, group, intended } => {
                let design = self.design.as_ref().ok_or(Error::WrongPlacement("half"))?;
                Ok(effective_channel(t, cs, design, target, group, intended)?.values)
            }
        }
    }

    /// Extension count as a machine integer, if it fits in `budget`.
    pub fn n_ext_within(&self, budget: u64) -> Result<usize> {
        match self.n_ext.to_u64() {
            Some(v) if v <= budget => Ok(v as usize),
            _ => Err(Error::DimensionBudget { what: "N", value: self.n_ext.to_string(), budget }),
        }
    }

    /// Draws channels with exactly `N` extensions.
    pub fn draw(&self, seed: u64, budget: u64) -> Result<ChannelSet> {
        draw_channels(&self.topology, self.n_ext_within(budget)?, seed)
    }

    /// Numeric precoder `V` (or `W`): one column per basis monomial.
    pub fn precoder(&self, cs: &ChannelSet) -> Result<DMatrix<Complex64>> {
        self.monomial_columns(cs, self.n)
    }

    fn monomial_columns(&self, cs: &ChannelSet, order: u32) -> Result<DMatrix<Complex64>> {
        let basis = monomial_basis(self.g(), order)?;
        let gens: Vec<Vec<Complex64>> =
            self.generators.as_slice().iter().map(|g| self.values_of(cs, g)).collect::<Result<_>>()?;
        let rows = cs.extensions();
        Ok(DMatrix::from_fn(rows, basis.len(), |r, c| {
            basis[c].0.iter().zip(&gens).fold(Complex64::new(1.0, 0.0), |acc, (&e, g)| acc * g[r].powu(e))
        }))
    }

    /// `Λ = [D_1 V | … | D_K V | V(n+1)]` for one verified user.
    pub fn lambda(&self, user_index: usize, cs: &ChannelSet) -> Result<DMatrix<Complex64>> {
        let vu = &self.users[user_index];
        let v = self.monomial_columns(cs, self.n)?;
        let v_next = self.monomial_columns(cs, self.n + 1)?;
        let m = v.ncols();
        let mut out = DMatrix::zeros(cs.extensions(), vu.desired.len() * m + v_next.ncols());
        for (k, d) in vu.desired.iter().enumerate() {
            let dv = self.values_of(cs, d)?;
            for c in 0..m {
                for r in 0..cs.extensions() {
                    out[(r, k * m + c)] = dv[r] * v[(r, c)];
                }
            }
        }
        out.columns_mut(vu.desired.len() * m, v_next.ncols()).copy_from(&v_next);
        Ok(out)
    }

    /// Removes one generator while keeping the interference it covered,
    /// a structural negative control for the alignment check.
    pub fn without_generator(&self, index: usize) -> SchemeInstance {
        let mut gens = self.generators.as_slice().to_vec();
        gens.remove(index);
        let mut out = self.clone();
        out.generators = GeneratorSet::new(gens, true);
        let (m, n_ext) = dims(self.desired_blocks(), out.g(), self.n);
        out.m = m;
        out.n_ext = n_ext;
        out
    }
}

/// Exact per-user DoF of a constructed scheme.
pub trait DofAccount {
    fn dof(&self) -> Q;
}

impl DofAccount for SchemeInstance {
    fn dof(&self) -> Q {
        let blocks = BigUint::from(self.desired_blocks());
        BigRational::new((&self.m * &blocks).into(), self.n_ext.clone().into())
    }
}

/// Zero-forcing over the full network matrix (every BS caches everything).
#[derive(Clone, Debug)]
pub struct ZfScheme {
    pub h: DMatrix<Complex64>,
    pub precoder: DMatrix<Complex64>,
    pub rank: usize,
}

pub fn build_full_zf(t: &Topology, cs: &ChannelSet) -> Result<ZfScheme> {
    let users: Vec<UserId> = t.users().collect();
    let bss: Vec<BsId> = t.bss().collect();
    let h = submatrix(t, cs, &users, &bss, 0)?;
    let rank = numeric_rank(&h, DEFAULT_REL_TOL)?;
    let expected = users.len().min(bss.len());
    if rank < expected {
        return Err(Error::RankDeficient { rank, expected });
    }
    let precoder = h.clone().pseudo_inverse(1e-12).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(ZfScheme { h, precoder, rank })
}

impl ZfScheme {
    /// Worst per-user ratio of received cross-talk to desired gain.
    pub fn cross_talk(&self) -> f64 {
        let p = &self.h * &self.precoder;
        (0..p.nrows())
            .map(|u| {
                let own = p[(u, u)].norm();
                let leak = (0..p.ncols()).filter(|&v| v != u).map(|v| p[(u, v)].norm()).fold(0.0, f64::max);
                if own == 0.0 {
                    f64::INFINITY
                } else {
                    leak / own
                }
            })
            .fold(0.0, f64::max)
    }

    /// `max |H H† − I|`.
    pub fn identity_residual(&self) -> f64 {
        let p = &self.h * &self.precoder;
        let id = DMatrix::<Complex64>::identity(p.nrows(), p.ncols());
        crate::linalg::max_abs(&(p - id))
    }
}

impl DofAccount for ZfScheme {
    fn dof(&self) -> Q {
        if self.rank.is_zero() {
            qi(0)
        } else {
            qi(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{place, PlacementMode};
    use crate::ratio::q;
    use crate::topology::GridSpec;

    fn torus() -> Topology {
        Topology::make_grid(GridSpec::torus(4, 4)).unwrap()
    }

    #[test]
    fn phase_partner_examples() {
        let t = torus();
        let b = t.bs_at(Coord::new(2, 0)).unwrap();
        assert_eq!(phase_partner(&t, 1, b).unwrap(), Some(t.user_at(Coord::new(1, 1)).unwrap()));
        assert_eq!(phase_partner(&t, 5, b).unwrap_err(), Error::InvalidPhase(5));
        for phase in 1..=4u8 {
            let served: std::collections::BTreeSet<_> =
                t.bss().map(|b| phase_partner(&t, phase, b).unwrap().unwrap()).collect();
            assert_eq!(served.len(), t.num_users(), "phase {phase} is a perfect matching");
        }
        for b in t.bss() {
            let mut over: Vec<_> = (1..=4).map(|k| phase_partner(&t, k, b).unwrap().unwrap()).collect();
            over.sort();
            assert_eq!(over, t.users_of_bs(b).unwrap().to_vec());
        }
    }

    #[test]
    fn quarter_dimensions() {
        let t = torus();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let s1 = build_quarter_scheme(&t, 1, Some(u)).unwrap();
        assert_eq!((s1.m.clone(), s1.n_ext.clone()), (BigUint::from(1u32), BigUint::from(9u32)));
        assert_eq!(s1.dof(), q(1, 9));
        let s2 = build_quarter_scheme(&t, 2, Some(u)).unwrap();
        assert_eq!(s2.n_ext, BigUint::from(35u32));
        assert_eq!(s2.dof(), q(8, 35));
        assert_eq!(s2.users[0].desired, vec![Generator::Raw { user: u, bs: t.bs_at(Coord::new(2, 0)).unwrap() }]);
        let all = build_quarter_scheme(&t, 2, None).unwrap();
        assert_eq!(all.g(), 48);
    }

    #[test]
    fn half_counts_and_micro_dimensions() {
        let t = torus();
        let p = place(&t, PlacementMode::Half).unwrap();
        let d = build_u_design(&t, &p, 3).unwrap();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        let s = build_half_scheme(&t, &d, 1, &HalfOptions { focus: Some(u), ..Default::default() }).unwrap();
        let vu = &s.users[0];
        assert_eq!(vu.interference.len(), 4 * 6 + 2 * 15);
        let case_i = vu.neutralized.iter().filter(|(_, c)| *c == ChannelCase::CaseI).count();
        let case_ii = vu.neutralized.iter().filter(|(_, c)| *c == ChannelCase::CaseII).count();
        assert_eq!((case_i, case_ii), (4, 32));

        let micro = micro_generators(&t, &d, u, 3).unwrap();
        let strict = HalfOptions { focus: Some(u), subset: Some(micro.clone()), allow_truncation: false };
        assert!(matches!(build_half_scheme(&t, &d, 2, &strict), Err(Error::TruncatedInterference(_))));
        let opts = HalfOptions { allow_truncation: true, ..strict };
        let s1 = build_half_scheme(&t, &d, 1, &opts).unwrap();
        assert_eq!(s1.n_ext, BigUint::from(14u32));
        let s2 = build_half_scheme(&t, &d, 2, &opts).unwrap();
        assert_eq!((s2.m.clone(), s2.n_ext.clone()), (BigUint::from(8u32), BigUint::from(75u32)));
        assert_eq!(s2.dof(), q(48, 75));
    }

    #[test]
    fn full_zf_inverts() {
        let t = torus();
        let cs = draw_channels(&t, 1, 9).unwrap();
        let zf = build_full_zf(&t, &cs).unwrap();
        assert_eq!(zf.rank, 16);
        assert!(zf.cross_talk() < 1e-9);
        assert!(zf.identity_residual() < 1e-9);
        assert_eq!(zf.dof(), qi(1));
    }
}
