//! User/BS connectivity: the square-grid cellular model and arbitrary
//! bipartite topologies used by the region bound.
//!
//! Grid users sit at odd lattice points `(i, j)` and BSs at even points
//! `(p, q)`. A user hears exactly the four BSs at the corners of its cell,
//! `(i ± 1, j ± 1)`. With `wrap` the lattice is a torus of circumference
//! `(2·width, 2·height)` and every coordinate is reduced into
//! `[0, 2·width) × [0, 2·height)`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: i64,
    pub y: i64,
}

impl Coord {
    pub const fn new(x: i64, y: i64) -> Self {
        Coord { x, y }
    }

    fn is_user(&self) -> bool {
        self.x.rem_euclid(2) == 1 && self.y.rem_euclid(2) == 1
    }

    fn is_bs(&self) -> bool {
        self.x.rem_euclid(2) == 0 && self.y.rem_euclid(2) == 0
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

impl std::str::FromStr for Coord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("expected `x,y`, got `{s}`"));
        let (x, y) = s.trim().trim_matches(|c| c == '(' || c == ')').split_once(',').ok_or_else(bad)?;
        Ok(Coord::new(
            x.trim().parse().map_err(|_| bad())?,
            y.trim().parse().map_err(|_| bad())?,
        ))
    }
}

/// Identity of a node: a lattice point on grids, an opaque string otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeLabel {
    Cell(Coord),
    Named(String),
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeLabel::Cell(c) => c.fmt(f),
            NodeLabel::Named(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BsId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width_cells: usize,
    pub height_cells: usize,
    pub wrap: bool,
}

impl GridSpec {
    pub fn torus(width_cells: usize, height_cells: usize) -> Self {
        GridSpec { width_cells, height_cells, wrap: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    Grid(GridSpec),
    General,
}

/// The four BS classes, keyed by BS coordinates modulo 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BsClass {
    B1,
    B2,
    B3,
    B4,
}

impl BsClass {
    pub const ALL: [BsClass; 4] = [BsClass::B1, BsClass::B2, BsClass::B3, BsClass::B4];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

/// The four user classes, keyed by user coordinates modulo 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UserClass {
    U1,
    U2,
    U3,
    U4,
}

impl UserClass {
    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

/// Class of a BS: `B1` for `(0,0) mod 4`, `B2` for `(2,0)`, `B3` for `(0,2)`, `B4` for `(2,2)`.
pub fn bs_class(b: Coord) -> Result<BsClass> {
    if !b.is_bs() {
        return Err(Error::WrongParity { x: b.x, y: b.y, expected: "BS" });
    }
    Ok(match (b.x.rem_euclid(4), b.y.rem_euclid(4)) {
        (0, 0) => BsClass::B1,
        (2, 0) => BsClass::B2,
        (0, 2) => BsClass::B3,
        _ => BsClass::B4,
    })
}

/// Class of a user: `U1` for `(1,1) mod 4`, `U2` for `(3,1)`, `U3` for `(1,3)`, `U4` for `(3,3)`.
pub fn user_class(u: Coord) -> Result<UserClass> {
    if !u.is_user() {
        return Err(Error::WrongParity { x: u.x, y: u.y, expected: "user" });
    }
    Ok(match (u.x.rem_euclid(4), u.y.rem_euclid(4)) {
        (1, 1) => UserClass::U1,
        (3, 1) => UserClass::U2,
        (1, 3) => UserClass::U3,
        _ => UserClass::U4,
    })
}

/// Immutable bipartite user→BS connectivity.
#[derive(Clone, Debug)]
pub struct Topology {
    kind: TopologyKind,
    users: Vec<NodeLabel>,
    bss: Vec<NodeLabel>,
    user_nbrs: Vec<Vec<BsId>>,
    bs_users: Vec<Vec<UserId>>,
    edges: Vec<(UserId, BsId)>,
    edge_index: HashMap<(UserId, BsId), usize>,
    user_lookup: HashMap<NodeLabel, UserId>,
    bs_lookup: HashMap<NodeLabel, BsId>,
}

impl Topology {
    /// Builds the square grid. See the module docs for the coordinate layout.
    pub fn make_grid(spec: GridSpec) -> Result<Topology> {
        let (w, h) = (spec.width_cells, spec.height_cells);
        if w < 1 || h < 1 {
            return Err(Error::InvalidGrid("dimensions must be at least 1".into()));
        }
        if spec.wrap {
            if w % 2 == 1 || h % 2 == 1 {
                return Err(Error::InvalidGrid(format!(
                    "torus needs even dimensions, got {w}x{h}"
                )));
            }
            if w < 4 || h < 4 {
                return Err(Error::InvalidGrid(format!(
                    "torus needs at least 4x4 cells, got {w}x{h}"
                )));
            }
        }
        let (bw, bh) = if spec.wrap { (w, h) } else { (w + 1, h + 1) };
        let mut users = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                users.push(NodeLabel::Cell(Coord::new(2 * x as i64 + 1, 2 * y as i64 + 1)));
            }
        }
        let mut bss = Vec::with_capacity(bw * bh);
        for y in 0..bh {
            for x in 0..bw {
                bss.push(NodeLabel::Cell(Coord::new(2 * x as i64, 2 * y as i64)));
            }
        }
        let modulus = (2 * w as i64, 2 * h as i64);
        let mut edges = Vec::with_capacity(4 * users.len());
        for (ui, label) in users.iter().enumerate() {
            let NodeLabel::Cell(c) = label else { unreachable!() };
            for (dx, dy) in [(-1, -1), (1, -1), (-1, 1), (1, 1)] {
                let mut b = Coord::new(c.x + dx, c.y + dy);
                if spec.wrap {
                    b = Coord::new(b.x.rem_euclid(modulus.0), b.y.rem_euclid(modulus.1));
                }
                let bi = (b.y / 2) as usize * bw + (b.x / 2) as usize;
                edges.push((UserId(ui), BsId(bi)));
            }
        }
        Ok(Self::assemble(TopologyKind::Grid(spec), users, bss, edges))
    }

    /// Builds a general-kind topology from string ids and an edge list.
    pub fn general(users: &[&str], bss: &[&str], edges: &[(&str, &str)]) -> Result<Topology> {
        let doc = TopologyDocument {
            users: users.iter().map(|s| s.to_string()).collect(),
            bss: bss.iter().map(|s| s.to_string()).collect(),
            edges: edges.iter().map(|(u, b)| (u.to_string(), b.to_string())).collect(),
            kind: None,
            width_cells: None,
            height_cells: None,
            wrap: None,
        };
        load_topology(&doc)
    }

    fn assemble(
        kind: TopologyKind,
        users: Vec<NodeLabel>,
        bss: Vec<NodeLabel>,
        mut edges: Vec<(UserId, BsId)>,
    ) -> Topology {
        edges.sort();
        edges.dedup();
        let mut user_nbrs = vec![Vec::new(); users.len()];
        let mut bs_users = vec![Vec::new(); bss.len()];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (k, &(u, b)) in edges.iter().enumerate() {
            user_nbrs[u.0].push(b);
            bs_users[b.0].push(u);
            edge_index.insert((u, b), k);
        }
        for list in &mut bs_users {
            list.sort();
        }
        let user_lookup = users.iter().enumerate().map(|(i, l)| (l.clone(), UserId(i))).collect();
        let bs_lookup = bss.iter().enumerate().map(|(i, l)| (l.clone(), BsId(i))).collect();
        Topology { kind, users, bss, user_nbrs, bs_users, edges, edge_index, user_lookup, bs_lookup }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn grid_spec(&self) -> Option<GridSpec> {
        match self.kind {
            TopologyKind::Grid(s) => Some(s),
            TopologyKind::General => None,
        }
    }

    pub fn is_grid(&self) -> bool {
        self.grid_spec().is_some()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_bss(&self) -> usize {
        self.bss.len()
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.users.len()).map(UserId)
    }

    pub fn bss(&self) -> impl Iterator<Item = BsId> + '_ {
        (0..self.bss.len()).map(BsId)
    }

    pub fn edges(&self) -> &[(UserId, BsId)] {
        &self.edges
    }

    pub fn edge_id(&self, u: UserId, b: BsId) -> Option<usize> {
        self.edge_index.get(&(u, b)).copied()
    }

    pub fn is_connected(&self, u: UserId, b: BsId) -> bool {
        self.edge_index.contains_key(&(u, b))
    }

    pub fn user_label(&self, u: UserId) -> &NodeLabel {
        &self.users[u.0]
    }

    pub fn bs_label(&self, b: BsId) -> &NodeLabel {
        &self.bss[b.0]
    }

    pub fn user_coord(&self, u: UserId) -> Option<Coord> {
        match self.users.get(u.0)? {
            NodeLabel::Cell(c) => Some(*c),
            NodeLabel::Named(_) => None,
        }
    }

    pub fn bs_coord(&self, b: BsId) -> Option<Coord> {
        match self.bss.get(b.0)? {
            NodeLabel::Cell(c) => Some(*c),
            NodeLabel::Named(_) => None,
        }
    }

    /// Reduces a lattice point onto the torus; identity on non-wrap grids.
    pub fn normalize(&self, c: Coord) -> Coord {
        match self.kind {
            TopologyKind::Grid(s) if s.wrap => Coord::new(
                c.x.rem_euclid(2 * s.width_cells as i64),
                c.y.rem_euclid(2 * s.height_cells as i64),
            ),
            _ => c,
        }
    }

    pub fn user_at(&self, c: Coord) -> Result<UserId> {
        let c = self.normalize(c);
        self.user_lookup
            .get(&NodeLabel::Cell(c))
            .copied()
            .ok_or_else(|| Error::UnknownNode(c.to_string()))
    }

    pub fn bs_at(&self, c: Coord) -> Result<BsId> {
        let c = self.normalize(c);
        self.bs_lookup
            .get(&NodeLabel::Cell(c))
            .copied()
            .ok_or_else(|| Error::UnknownNode(c.to_string()))
    }

    pub fn user_named(&self, id: &str) -> Result<UserId> {
        if let Some(u) = self.user_lookup.get(&NodeLabel::Named(id.to_string())) {
            return Ok(*u);
        }
        match id.parse::<Coord>() {
            Ok(c) if self.is_grid() => self.user_at(c),
            _ => Err(Error::UnknownNode(id.to_string())),
        }
    }

    pub fn bs_named(&self, id: &str) -> Result<BsId> {
        if let Some(b) = self.bs_lookup.get(&NodeLabel::Named(id.to_string())) {
            return Ok(*b);
        }
        match id.parse::<Coord>() {
            Ok(c) if self.is_grid() => self.bs_at(c),
            _ => Err(Error::UnknownNode(id.to_string())),
        }
    }

    /// The BSs a user hears (sorted by id).
    pub fn neighbors_of_user(&self, u: UserId) -> Result<&[BsId]> {
        self.user_nbrs
            .get(u.0)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownNode(format!("user #{}", u.0)))
    }

    pub fn users_of_bs(&self, b: BsId) -> Result<&[UserId]> {
        self.bs_users
            .get(b.0)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownNode(format!("bs #{}", b.0)))
    }

    /// Users adjacent to at least one BS of `bss`.
    pub fn users_reached_by(&self, bss: &BTreeSet<BsId>) -> BTreeSet<UserId> {
        bss.iter().flat_map(|b| self.bs_users[b.0].iter().copied()).collect()
    }

    pub fn bs_class_of(&self, b: BsId) -> Result<BsClass> {
        bs_class(self.bs_coord(b).ok_or(Error::NotAGrid)?)
    }

    pub fn user_class_of(&self, u: UserId) -> Result<UserClass> {
        user_class(self.user_coord(u).ok_or(Error::NotAGrid)?)
    }

    pub fn bss_of_class(&self, class: BsClass) -> Result<BTreeSet<BsId>> {
        if !self.is_grid() {
            return Err(Error::NotAGrid);
        }
        Ok(self.bss().filter(|&b| self.bs_class_of(b).ok() == Some(class)).collect())
    }

    pub fn to_document(&self) -> TopologyDocument {
        let spec = self.grid_spec();
        TopologyDocument {
            users: self.users.iter().map(ToString::to_string).collect(),
            bss: self.bss.iter().map(ToString::to_string).collect(),
            edges: self
                .edges
                .iter()
                .map(|&(u, b)| (self.users[u.0].to_string(), self.bss[b.0].to_string()))
                .collect(),
            kind: spec.map(|_| "grid".to_string()),
            width_cells: spec.map(|s| s.width_cells),
            height_cells: spec.map(|s| s.height_cells),
            wrap: spec.map(|s| s.wrap),
        }
    }
}

/// On-disk topology: `{"users": [...], "bss": [...], "edges": [[user, bs], ...]}`,
/// plus the grid parameters when exported from a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub users: Vec<String>,
    pub bss: Vec<String>,
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrap: Option<bool>,
}

impl TopologyDocument {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::MalformedTopology(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology document serializes")
    }
}

/// Loads a topology document. Grid exports are rebuilt as grids and their
/// edge lists checked against the document; everything else becomes a
/// general-kind topology.
pub fn load_topology(doc: &TopologyDocument) -> Result<Topology> {
    let malformed = |m: String| Error::MalformedTopology(m);
    if doc.kind.as_deref() == Some("grid") {
        let spec = GridSpec {
            width_cells: doc.width_cells.ok_or_else(|| malformed("grid without width_cells".into()))?,
            height_cells: doc.height_cells.ok_or_else(|| malformed("grid without height_cells".into()))?,
            wrap: doc.wrap.unwrap_or(false),
        };
        let t = Topology::make_grid(spec)?;
        let mut expected: Vec<_> = t.to_document().edges;
        let mut given = doc.edges.clone();
        expected.sort();
        given.sort();
        if expected != given {
            return Err(malformed("edge list does not match the declared grid".into()));
        }
        return Ok(t);
    }
    if let Some(k) = &doc.kind {
        if k != "general" {
            return Err(malformed(format!("unknown kind `{k}`")));
        }
    }
    if doc.users.is_empty() || doc.bss.is_empty() {
        return Err(malformed("topology needs at least one user and one BS".into()));
    }
    let mut user_ids = HashMap::new();
    for (i, u) in doc.users.iter().enumerate() {
        if user_ids.insert(u.as_str(), UserId(i)).is_some() {
            return Err(malformed(format!("duplicate user `{u}`")));
        }
    }
    let mut bs_ids = HashMap::new();
    for (i, b) in doc.bss.iter().enumerate() {
        if bs_ids.insert(b.as_str(), BsId(i)).is_some() {
            return Err(malformed(format!("duplicate BS `{b}`")));
        }
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (u, b) in &doc.edges {
        let ui = *user_ids.get(u.as_str()).ok_or_else(|| malformed(format!("dangling user `{u}`")))?;
        let bi = *bs_ids.get(b.as_str()).ok_or_else(|| malformed(format!("dangling BS `{b}`")))?;
        edges.push((ui, bi));
    }
    let covered: BTreeSet<_> = edges.iter().map(|e| e.0).collect();
    if let Some(u) = (0..doc.users.len()).find(|i| !covered.contains(&UserId(*i))) {
        return Err(malformed(format!("isolated user `{}`", doc.users[u])));
    }
    let users = doc.users.iter().map(|s| NodeLabel::Named(s.clone())).collect();
    let bss = doc.bss.iter().map(|s| NodeLabel::Named(s.clone())).collect();
    Ok(Topology::assemble(TopologyKind::General, users, bss, edges))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(t: &Topology, bs: &[BsId]) -> BTreeSet<Coord> {
        bs.iter().map(|&b| t.bs_coord(b).unwrap()).collect()
    }

    fn set(pts: &[(i64, i64)]) -> BTreeSet<Coord> {
        pts.iter().map(|&(x, y)| Coord::new(x, y)).collect()
    }

    #[test]
    fn torus_counts() {
        let t = Topology::make_grid(GridSpec::torus(4, 4)).unwrap();
        assert_eq!(t.num_users(), 16);
        assert_eq!(t.num_bss(), 16);
        for u in t.users() {
            assert_eq!(t.neighbors_of_user(u).unwrap().len(), 4);
        }
        for b in t.bss() {
            assert_eq!(t.users_of_bs(b).unwrap().len(), 4);
        }
    }

    #[test]
    fn corner_neighbors() {
        let t = Topology::make_grid(GridSpec::torus(4, 4)).unwrap();
        let u = t.user_at(Coord::new(1, 1)).unwrap();
        assert_eq!(coords(&t, t.neighbors_of_user(u).unwrap()), set(&[(0, 0), (2, 0), (0, 2), (2, 2)]));
        let u = t.user_at(Coord::new(7, 7)).unwrap();
        assert_eq!(coords(&t, t.neighbors_of_user(u).unwrap()), set(&[(6, 6), (0, 6), (6, 0), (0, 0)]));
        let u = t.user_at(Coord::new(5, 3)).unwrap();
        assert_eq!(coords(&t, t.neighbors_of_user(u).unwrap()), set(&[(4, 2), (6, 2), (4, 4), (6, 4)]));
        // Negative coordinates wrap.
        assert_eq!(t.user_at(Coord::new(-1, -1)).unwrap(), t.user_at(Coord::new(7, 7)).unwrap());
    }

    #[test]
    fn open_grid_keeps_boundary_bss() {
        let t = Topology::make_grid(GridSpec { width_cells: 3, height_cells: 2, wrap: false }).unwrap();
        assert_eq!(t.num_users(), 6);
        assert_eq!(t.num_bss(), 12);
        let corner = t.bs_at(Coord::new(0, 0)).unwrap();
        assert_eq!(t.users_of_bs(corner).unwrap().len(), 1);
    }

    #[test]
    fn grid_rejections() {
        assert!(Topology::make_grid(GridSpec::torus(5, 4)).is_err());
        assert!(Topology::make_grid(GridSpec::torus(2, 2)).is_err());
        assert!(Topology::make_grid(GridSpec { width_cells: 0, height_cells: 3, wrap: false }).is_err());
        assert!(Topology::make_grid(GridSpec { width_cells: 1, height_cells: 1, wrap: false }).is_ok());
    }

    #[test]
    fn classes() {
        assert_eq!(bs_class(Coord::new(0, 0)).unwrap(), BsClass::B1);
        assert_eq!(bs_class(Coord::new(2, 0)).unwrap(), BsClass::B2);
        assert_eq!(bs_class(Coord::new(0, 2)).unwrap(), BsClass::B3);
        assert_eq!(bs_class(Coord::new(2, 2)).unwrap(), BsClass::B4);
        assert_eq!(bs_class(Coord::new(4, 8)).unwrap(), BsClass::B1);
        assert_eq!(bs_class(Coord::new(-2, 0)).unwrap(), BsClass::B2);
        assert!(bs_class(Coord::new(1, 0)).is_err());

        assert_eq!(user_class(Coord::new(1, 1)).unwrap(), UserClass::U1);
        assert_eq!(user_class(Coord::new(3, 1)).unwrap(), UserClass::U2);
        assert_eq!(user_class(Coord::new(1, 3)).unwrap(), UserClass::U3);
        assert_eq!(user_class(Coord::new(3, 3)).unwrap(), UserClass::U4);
        assert_eq!(user_class(Coord::new(-1, -1)).unwrap(), UserClass::U4);
        assert!(user_class(Coord::new(2, 1)).is_err());
    }

    #[test]
    fn two_user_three_bs_fixture() {
        let t = Topology::general(&["1", "2"], &["a", "b", "c"], &[("1", "a"), ("1", "b"), ("2", "b"), ("2", "c")])
            .unwrap();
        assert_eq!(t.num_users(), 2);
        assert_eq!(t.num_bss(), 3);
        assert_eq!(t.edges().len(), 4);
        let u1 = t.user_named("1").unwrap();
        let names: Vec<_> = t.neighbors_of_user(u1).unwrap().iter().map(|&b| t.bs_label(b).to_string()).collect();
        assert_eq!(names, ["a", "b"]);
        assert!(t.bs_class_of(BsId(0)).is_err());
    }

    #[test]
    fn document_errors() {
        assert!(matches!(
            Topology::general(&["1"], &["a"], &[]),
            Err(Error::MalformedTopology(_))
        ));
        assert!(matches!(
            Topology::general(&["1"], &["a"], &[("1", "z")]),
            Err(Error::MalformedTopology(_))
        ));
        assert!(TopologyDocument::from_json("{\"users\": 3}").is_err());
    }

    #[test]
    fn grid_round_trip() {
        let t = Topology::make_grid(GridSpec::torus(4, 6)).unwrap();
        let json = t.to_document().to_json();
        let back = load_topology(&TopologyDocument::from_json(&json).unwrap()).unwrap();
        assert_eq!(back.edges(), t.edges());
        assert_eq!(back.grid_spec(), t.grid_spec());

        let mut doc = t.to_document();
        doc.edges.pop();
        assert!(load_topology(&doc).is_err());
    }
}
