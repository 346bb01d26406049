//! Nodes, device roles, ranging topology and the relative coordinate frame.
//!
//! The relative frame pins node 0 at the origin and node 1 on the positive
//! x axis at its measured distance from node 0. Every other node is free.

pub(crate) mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use text::GeometryFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeviceRole {
    Anchor,
    Tag,
}

/// The set of devices mounted on one physical node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Roles {
    pub anchor: bool,
    pub tag: bool,
}

impl Roles {
    pub const ANCHOR: Roles = Roles {
        anchor: true,
        tag: false,
    };
    pub const TAG: Roles = Roles {
        anchor: false,
        tag: true,
    };
    pub const BOTH: Roles = Roles {
        anchor: true,
        tag: true,
    };

    pub fn has(&self, role: DeviceRole) -> bool {
        match role {
            DeviceRole::Anchor => self.anchor,
            DeviceRole::Tag => self.tag,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.anchor && !self.tag
    }
}

impl fmt::Display for Roles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.anchor {
            f.write_str("A")?;
        }
        if self.tag {
            f.write_str("T")?;
        }
        Ok(())
    }
}

impl FromStr for Roles {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "A" => Ok(Roles::ANCHOR),
            "T" => Ok(Roles::TAG),
            "AT" | "TA" => Ok(Roles::BOTH),
            other => Err(format!("unknown roles `{other}` (expected A, T or AT)")),
        }
    }
}

/// A measured distance `d_{tag,anchor}`: the tag device initiates, the
/// anchor device responds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RangingPair {
    pub tag: NodeId,
    pub anchor: NodeId,
}

impl RangingPair {
    pub const fn new(tag: u16, anchor: u16) -> Self {
        RangingPair {
            tag: NodeId(tag),
            anchor: NodeId(anchor),
        }
    }
}

impl fmt::Display for RangingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}{}", self.tag, self.anchor)
    }
}

/// Position in the relative frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const ORIGIN: Position2D = Position2D { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Position2D { x, y }
    }

    pub fn distance_to(&self, other: &Position2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

pub type Positions = BTreeMap<NodeId, Position2D>;

pub const NODE_0: NodeId = NodeId(0);
pub const NODE_1: NodeId = NodeId(1);
pub const NODE_2: NodeId = NodeId(2);
pub const NODE_3: NodeId = NodeId(3);

pub const D10: RangingPair = RangingPair::new(1, 0);
pub const D20: RangingPair = RangingPair::new(2, 0);
pub const D21: RangingPair = RangingPair::new(2, 1);
pub const D30: RangingPair = RangingPair::new(3, 0);
pub const D31: RangingPair = RangingPair::new(3, 1);

/// The five pairs of the four-node network, in scheduling order.
pub const CANONICAL_PAIRS: [RangingPair; 5] = [D10, D20, D21, D30, D31];

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub nodes: Vec<(NodeId, Roles)>,
    pub pairs: Vec<RangingPair>,
}

impl NetworkTopology {
    /// Four nodes on a quadrilateral; node 1 carries both an anchor and a tag.
    pub fn canonical() -> Self {
        NetworkTopology {
            nodes: vec![
                (NODE_0, Roles::ANCHOR),
                (NODE_1, Roles::BOTH),
                (NODE_2, Roles::TAG),
                (NODE_3, Roles::TAG),
            ],
            pairs: CANONICAL_PAIRS.to_vec(),
        }
    }

    pub fn roles(&self, node: NodeId) -> Option<Roles> {
        self.nodes.iter().find(|(id, _)| *id == node).map(|(_, r)| *r)
    }

    /// Number of pairs `node` takes part in, as tag or anchor.
    pub fn degree(&self, node: NodeId) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.tag == node || p.anchor == node)
            .count()
    }

    pub fn tags(&self) -> BTreeSet<NodeId> {
        self.pairs.iter().map(|p| p.tag).collect()
    }

    pub fn pairs_for_tag(&self, tag: NodeId) -> impl Iterator<Item = &RangingPair> {
        self.pairs.iter().filter(move |p| p.tag == tag)
    }

    pub fn is_canonical(&self) -> bool {
        let pairs: BTreeSet<_> = self.pairs.iter().copied().collect();
        let expected: BTreeSet<_> = CANONICAL_PAIRS.iter().copied().collect();
        pairs == expected && self.pairs.len() == 5 && self.roles(NODE_1) == Some(Roles::BOTH)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateNode(NodeId),
    NoRoles(NodeId),
    DuplicatePair(RangingPair),
    SelfPair(RangingPair),
    UnknownNode { pair: RangingPair, node: NodeId },
    /// The pair's tag end has no tag device or its anchor end has no anchor.
    RoleMismatch(RangingPair),
    Underconstrained { node: NodeId, pairs: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNode(n) => write!(f, "node {n} declared twice"),
            Violation::NoRoles(n) => write!(f, "node {n} has no device"),
            Violation::DuplicatePair(p) => write!(f, "pair {p} declared twice"),
            Violation::SelfPair(p) => write!(f, "self-pair {p}"),
            Violation::UnknownNode { pair, node } => {
                write!(f, "pair {pair} references unknown node {node}")
            }
            Violation::RoleMismatch(p) => {
                write!(f, "pair {p} does not connect a tag device to an anchor device")
            }
            Violation::Underconstrained { node, pairs } => {
                write!(f, "node {node} underconstrained ({pairs} pair(s), need 2)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_topology(topology: &NetworkTopology) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for (id, roles) in &topology.nodes {
        if !seen.insert(*id) {
            violations.push(Violation::DuplicateNode(*id));
        }
        if roles.is_empty() {
            violations.push(Violation::NoRoles(*id));
        }
    }

    let mut seen_pairs = BTreeSet::new();
    for pair in &topology.pairs {
        if !seen_pairs.insert(*pair) {
            violations.push(Violation::DuplicatePair(*pair));
        }
        if pair.tag == pair.anchor {
            violations.push(Violation::SelfPair(*pair));
            continue;
        }
        let tag_roles = topology.roles(pair.tag);
        let anchor_roles = topology.roles(pair.anchor);
        for (node, roles) in [(pair.tag, tag_roles), (pair.anchor, anchor_roles)] {
            if roles.is_none() {
                violations.push(Violation::UnknownNode { pair: *pair, node });
            }
        }
        if let (Some(t), Some(a)) = (tag_roles, anchor_roles) {
            if !t.tag || !a.anchor {
                violations.push(Violation::RoleMismatch(*pair));
            }
        }
    }

    for (id, _) in &topology.nodes {
        let pairs = topology.degree(*id);
        if pairs < 2 {
            violations.push(Violation::Underconstrained { node: *id, pairs });
        }
    }

    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Square,
    Rectangle,
    Quadrilateral,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Rectangle, Shape::Quadrilateral];

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Rectangle => "rectangle",
            Shape::Quadrilateral => "quadrilateral",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Shape::Square),
            "rectangle" | "rectangular" => Ok(Shape::Rectangle),
            "quadrilateral" | "quad" => Ok(Shape::Quadrilateral),
            other => Err(Error::domain(format!("unknown shape `{other}`"))),
        }
    }
}

pub const DEFAULT_SCALE: f64 = 2.0;

/// Ground-truth corner positions of a test shape in the relative frame,
/// visited counter-clockwise as 0, 1, 2, 3.
///
/// The quadrilateral is convex with four distinct side lengths and no right
/// angle.
pub fn canonical_geometry(shape: Shape, scale: f64) -> Result<Positions> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::domain(format!("scale must be positive, got {scale}")));
    }
    let (p2, p3) = match shape {
        Shape::Square => ((scale, scale), (0.0, scale)),
        Shape::Rectangle => ((scale, scale / 2.0), (0.0, scale / 2.0)),
        Shape::Quadrilateral => ((1.15 * scale, 0.85 * scale), (-0.175 * scale, 0.675 * scale)),
    };
    Ok(BTreeMap::from([
        (NODE_0, Position2D::ORIGIN),
        (NODE_1, Position2D::new(scale, 0.0)),
        (NODE_2, Position2D::new(p2.0, p2.1)),
        (NODE_3, Position2D::new(p3.0, p3.1)),
    ]))
}

pub fn true_distances(
    positions: &Positions,
    topology: &NetworkTopology,
) -> Result<BTreeMap<RangingPair, f64>> {
    topology
        .pairs
        .iter()
        .map(|pair| {
            let tag = positions.get(&pair.tag).ok_or(Error::MissingNode(pair.tag))?;
            let anchor = positions
                .get(&pair.anchor)
                .ok_or(Error::MissingNode(pair.anchor))?;
            Ok((*pair, tag.distance_to(anchor)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConvention {
    pub origin_node: NodeId,
    pub axis_node: NodeId,
}

impl Default for FrameConvention {
    fn default() -> Self {
        FrameConvention {
            origin_node: NODE_0,
            axis_node: NODE_1,
        }
    }
}

impl FrameConvention {
    /// Exact check: the origin node is bitwise `(0, 0)` and the axis node
    /// has `y == 0` and `x >= 0`.
    pub fn holds(&self, positions: &Positions) -> bool {
        let origin_ok = positions
            .get(&self.origin_node)
            .is_some_and(|p| p.x == 0.0 && p.y == 0.0);
        let axis_ok = positions
            .get(&self.axis_node)
            .is_some_and(|p| p.y == 0.0 && p.x >= 0.0);
        origin_ok && axis_ok
    }
}
