//! Binary dynamic networks with per-frame node activity.
//!
//! A cube holds `T` undirected snapshots over `N` nodes. Edge values are
//! stored sparsely as sorted `(i, j)` pairs with `i < j` per frame; the
//! observation mask is never materialised, it is the product of the two
//! endpoints' activity flags.

use std::fmt;

use crate::error::{Error, Result};

/// Dense `N x T` activity flags, `a[i, t] = true` iff node `i` is active at
/// frame `t`. Frames are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeActivity {
    n_nodes: usize,
    n_frames: usize,
    // frame-major: t * n_nodes + i
    flags: Vec<bool>,
}

impl NodeActivity {
    pub fn inactive(n_nodes: usize, n_frames: usize) -> Self {
        Self {
            n_nodes,
            n_frames,
            flags: vec![false; n_nodes * n_frames],
        }
    }

    pub fn all_active(n_nodes: usize, n_frames: usize) -> Self {
        Self {
            n_nodes,
            n_frames,
            flags: vec![true; n_nodes * n_frames],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    #[inline]
    pub fn is_active(&self, i: usize, t: usize) -> bool {
        self.flags[t * self.n_nodes + i]
    }

    pub fn set(&mut self, i: usize, t: usize, active: bool) {
        self.flags[t * self.n_nodes + i] = active;
    }

    pub fn n_active(&self) -> usize {
        self.flags.iter().filter(|&&a| a).count()
    }

    /// Fraction of `(i, t)` entries that are inactive.
    pub fn inactive_fraction(&self) -> f64 {
        if self.flags.is_empty() {
            return 0.0;
        }
        1.0 - self.n_active() as f64 / self.flags.len() as f64
    }

    /// Elementwise OR of two masks of the same shape.
    pub fn union(&self, other: &NodeActivity) -> Result<NodeActivity> {
        if self.n_nodes != other.n_nodes || self.n_frames != other.n_frames {
            return Err(Error::Argument(format!(
                "activity shapes differ: {}x{} vs {}x{}",
                self.n_nodes, self.n_frames, other.n_nodes, other.n_frames
            )));
        }
        let flags = self
            .flags
            .iter()
            .zip(&other.flags)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(NodeActivity {
            n_nodes: self.n_nodes,
            n_frames: self.n_frames,
            flags,
        })
    }
}

/// Compressed neighbour lists of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
struct FrameAdjacency {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl FrameAdjacency {
    fn build(n_nodes: usize, edges: &[(u32, u32)]) -> Self {
        let mut degree = vec![0u32; n_nodes + 1];
        for &(i, j) in edges {
            degree[i as usize + 1] += 1;
            degree[j as usize + 1] += 1;
        }
        for k in 1..=n_nodes {
            degree[k] += degree[k - 1];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; edges.len() * 2];
        for &(i, j) in edges {
            targets[fill[i as usize] as usize] = j;
            fill[i as usize] += 1;
            targets[fill[j as usize] as usize] = i;
            fill[j as usize] += 1;
        }
        for i in 0..n_nodes {
            targets[offsets[i] as usize..offsets[i + 1] as usize].sort_unstable();
        }
        Self { offsets, targets }
    }

    #[inline]
    fn neighbors(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// Binary edge cube `X` with its activity mask.
///
/// Invariants enforced at construction: no self-loops, every edge endpoint
/// is active in that frame, and edges are stored once per unordered pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyCube {
    n_nodes: usize,
    n_frames: usize,
    activity: NodeActivity,
    edges: Vec<Vec<(u32, u32)>>,
    adjacency: Vec<FrameAdjacency>,
    active_nodes: Vec<Vec<u32>>,
}

impl AdjacencyCube {
    /// Builds a cube from per-frame edge lists. Pairs may be given in either
    /// orientation and duplicates are collapsed. With `activity = None` the
    /// degree rule is applied (a node is active iff it has an edge).
    pub fn from_edges(
        n_nodes: usize,
        frames: Vec<Vec<(usize, usize)>>,
        activity: Option<NodeActivity>,
    ) -> Result<Self> {
        let n_frames = frames.len();
        if n_nodes == 0 || n_frames == 0 {
            return Err(Error::Argument(format!(
                "cube must have at least one node and one frame (got N={n_nodes}, T={n_frames})"
            )));
        }
        if n_nodes > u32::MAX as usize {
            return Err(Error::Argument(format!("too many nodes: {n_nodes}")));
        }
        let mut edges = Vec::with_capacity(n_frames);
        for (t, frame) in frames.into_iter().enumerate() {
            let mut list = Vec::with_capacity(frame.len());
            for (a, b) in frame {
                if a >= n_nodes || b >= n_nodes {
                    return Err(Error::Input(format!(
                        "edge ({a}, {b}) at frame {t} references a node outside 0..{n_nodes}"
                    )));
                }
                if a == b {
                    return Err(Error::Input(format!("self-loop on node {a} at frame {t}")));
                }
                list.push((a.min(b) as u32, a.max(b) as u32));
            }
            list.sort_unstable();
            list.dedup();
            edges.push(list);
        }
        let degree_activity = degree_rule(n_nodes, &edges);
        let activity = match activity {
            None => degree_activity,
            Some(a) => {
                if a.n_nodes != n_nodes || a.n_frames != n_frames {
                    return Err(Error::Argument(format!(
                        "activity is {}x{} but cube is {n_nodes}x{n_frames}",
                        a.n_nodes, a.n_frames
                    )));
                }
                for (t, list) in edges.iter().enumerate() {
                    for &(i, j) in list {
                        for v in [i, j] {
                            if !a.is_active(v as usize, t) {
                                return Err(Error::Input(format!(
                                    "edge ({i}, {j}) at frame {t} has inactive endpoint {v}"
                                )));
                            }
                        }
                    }
                }
                a
            }
        };
        Ok(Self::assemble(n_nodes, n_frames, activity, edges))
    }

    fn assemble(
        n_nodes: usize,
        n_frames: usize,
        activity: NodeActivity,
        edges: Vec<Vec<(u32, u32)>>,
    ) -> Self {
        let adjacency = edges
            .iter()
            .map(|e| FrameAdjacency::build(n_nodes, e))
            .collect();
        let active_nodes = (0..n_frames)
            .map(|t| {
                (0..n_nodes)
                    .filter(|&i| activity.is_active(i, t))
                    .map(|i| i as u32)
                    .collect()
            })
            .collect();
        Self {
            n_nodes,
            n_frames,
            activity,
            edges,
            adjacency,
            active_nodes,
        }
    }

    /// Replaces the activity mask. Fails if an edge endpoint would become
    /// inactive.
    pub fn with_activity(&self, activity: NodeActivity) -> Result<Self> {
        let frames = self
            .edges
            .iter()
            .map(|f| f.iter().map(|&(i, j)| (i as usize, j as usize)).collect())
            .collect();
        Self::from_edges(self.n_nodes, frames, Some(activity))
    }

    /// Builds a cube from a dense representation after validating it.
    pub fn from_dense(dense: &DenseCube) -> Result<Self> {
        let report = validate(dense);
        if !report.is_valid() {
            return Err(Error::Input(format!("invalid cube: {report}")));
        }
        let (n, t_max) = (dense.n_nodes, dense.n_frames);
        let mut activity = NodeActivity::inactive(n, t_max);
        let mut frames = vec![Vec::new(); t_max];
        for t in 0..t_max {
            for i in 0..n {
                for j in 0..n {
                    if dense.y(i, j, t) {
                        activity.set(i, t, true);
                    }
                    if i < j && dense.x(i, j, t) {
                        frames[t].push((i, j));
                    }
                }
            }
        }
        Self::from_edges(n, frames, Some(activity))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn activity(&self) -> &NodeActivity {
        &self.activity
    }

    #[inline]
    pub fn is_active(&self, i: usize, t: usize) -> bool {
        self.activity.is_active(i, t)
    }

    /// Active nodes of frame `t`, ascending.
    pub fn active_nodes(&self, t: usize) -> &[u32] {
        &self.active_nodes[t]
    }

    /// Sorted neighbours of node `i` at frame `t`.
    #[inline]
    pub fn neighbors(&self, i: usize, t: usize) -> &[u32] {
        self.adjacency[t].neighbors(i)
    }

    /// Edges of frame `t` as sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self, t: usize) -> &[(u32, u32)] {
        &self.edges[t]
    }

    pub fn n_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// `x[i, j, t]`.
    pub fn has_edge(&self, i: usize, j: usize, t: usize) -> bool {
        if i == j {
            return false;
        }
        self.neighbors(i, t).binary_search(&(j as u32)).is_ok()
    }

    /// `y[i, j, t]`: both endpoints active.
    #[inline]
    pub fn observed(&self, i: usize, j: usize, t: usize) -> bool {
        i != j && self.is_active(i, t) && self.is_active(j, t)
    }

    /// Number of observed dyads `sum_t sum_{i<j} y[i, j, t]`.
    pub fn n_observed_dyads(&self) -> u64 {
        self.active_nodes
            .iter()
            .map(|a| {
                let m = a.len() as u64;
                m * m.saturating_sub(1) / 2
            })
            .sum()
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_nodes)?;
        let mut activity = NodeActivity::inactive(self.n_nodes, self.n_frames);
        for t in 0..self.n_frames {
            for i in 0..self.n_nodes {
                activity.set(perm[i], t, self.is_active(i, t));
            }
        }
        let frames = self
            .edges
            .iter()
            .map(|f| {
                f.iter()
                    .map(|&(i, j)| (perm[i as usize], perm[j as usize]))
                    .collect()
            })
            .collect();
        Self::from_edges(self.n_nodes, frames, Some(activity))
    }

    /// Dense `X`/`Y` tensors, mostly useful for validation and tests.
    pub fn to_dense(&self) -> DenseCube {
        let mut dense = DenseCube::empty(self.n_nodes, self.n_frames);
        for t in 0..self.n_frames {
            let active = &self.active_nodes[t];
            for &i in active {
                for &j in active {
                    if i != j {
                        dense.set_y(i as usize, j as usize, t, true);
                    }
                }
            }
            for &(i, j) in &self.edges[t] {
                dense.set_x(i as usize, j as usize, t, true);
                dense.set_x(j as usize, i as usize, t, true);
            }
        }
        dense
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::Argument(format!(
            "permutation has length {} but {n} nodes",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Argument("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

fn degree_rule(n_nodes: usize, edges: &[Vec<(u32, u32)>]) -> NodeActivity {
    let mut activity = NodeActivity::inactive(n_nodes, edges.len());
    for (t, list) in edges.iter().enumerate() {
        for &(i, j) in list {
            activity.set(i as usize, t, true);
            activity.set(j as usize, t, true);
        }
    }
    activity
}

/// How node activity is decided when it is not fully determined by edges.
#[derive(Debug, Clone)]
pub enum ActivityRule {
    /// Active iff the node has at least one edge in the frame.
    Degree,
    /// Active iff listed as active, or having at least one edge.
    Explicit(NodeActivity),
}

/// Activity mask of `cube` under `rule`. The result always covers every
/// edge endpoint, so `cube.with_activity(derive_activity(..))` cannot fail.
pub fn derive_activity(cube: &AdjacencyCube, rule: &ActivityRule) -> NodeActivity {
    let degree = degree_rule(cube.n_nodes, &cube.edges);
    match rule {
        ActivityRule::Degree => degree,
        ActivityRule::Explicit(explicit) => degree.union(explicit).unwrap_or(degree),
    }
}

/// One timestamped undirected interaction between compact node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventList {
    pub n_nodes: usize,
    pub events: Vec<Event>,
    /// Start of the first frame; defaults to the earliest timestamp.
    pub time_origin: Option<f64>,
}

impl EventList {
    pub fn new(n_nodes: usize, events: Vec<Event>) -> Self {
        Self {
            n_nodes,
            events,
            time_origin: None,
        }
    }

    /// One event per edge-frame of `cube`, stamped at the frame's midpoint.
    pub fn from_cube(cube: &AdjacencyCube, frame_width: f64, origin: f64) -> Self {
        let mut events = Vec::with_capacity(cube.n_edges());
        for t in 0..cube.n_frames() {
            let time = origin + (t as f64 + 0.5) * frame_width;
            for &(i, j) in cube.edges(t) {
                events.push(Event {
                    time,
                    i: i as usize,
                    j: j as usize,
                });
            }
        }
        Self {
            n_nodes: cube.n_nodes(),
            events,
            time_origin: Some(origin),
        }
    }
}

/// Buckets events into frames of width `frame_width`.
///
/// Frame `t` (1-based) covers `(origin + (t-1) w, origin + t w]`; an event
/// exactly at the origin falls into the first frame. The number of frames is
/// `ceil(span / w)`, at least one. Activity follows the degree rule.
pub fn discretize(events: &EventList, frame_width: f64) -> Result<AdjacencyCube> {
    if !(frame_width > 0.0) || !frame_width.is_finite() {
        return Err(Error::Argument(format!(
            "frame width must be positive and finite, got {frame_width}"
        )));
    }
    if events.events.is_empty() {
        return Err(Error::Input("event list is empty".into()));
    }
    let mut min_t = f64::INFINITY;
    let mut max_t = f64::NEG_INFINITY;
    for e in &events.events {
        if !e.time.is_finite() {
            return Err(Error::Input(format!("non-finite timestamp {}", e.time)));
        }
        min_t = min_t.min(e.time);
        max_t = max_t.max(e.time);
    }
    let origin = events.time_origin.unwrap_or(min_t);
    if min_t < origin {
        return Err(Error::Input(format!(
            "event at time {min_t} precedes the time origin {origin}"
        )));
    }
    let frame_of = |time: f64| -> usize {
        let k = ((time - origin) / frame_width).ceil() as usize;
        k.max(1) - 1
    };
    let n_frames = frame_of(max_t) + 1;
    let mut frames = vec![Vec::new(); n_frames];
    for e in &events.events {
        if e.i >= events.n_nodes || e.j >= events.n_nodes {
            return Err(Error::Input(format!(
                "event ({}, {}) references an unknown node (N={})",
                e.i, e.j, events.n_nodes
            )));
        }
        if e.i == e.j {
            return Err(Error::Input(format!("self-interaction of node {}", e.i)));
        }
        frames[frame_of(e.time)].push((e.i, e.j));
    }
    AdjacencyCube::from_edges(events.n_nodes, frames, None)
}

/// Dense, possibly inconsistent `X` and `Y` tensors of shape `N x N x T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseCube {
    n_nodes: usize,
    n_frames: usize,
    x: Vec<bool>,
    y: Vec<bool>,
}

impl DenseCube {
    pub fn empty(n_nodes: usize, n_frames: usize) -> Self {
        let len = n_nodes * n_nodes * n_frames;
        Self {
            n_nodes,
            n_frames,
            x: vec![false; len],
            y: vec![false; len],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, t: usize) -> usize {
        (t * self.n_nodes + i) * self.n_nodes + j
    }

    pub fn x(&self, i: usize, j: usize, t: usize) -> bool {
        self.x[self.idx(i, j, t)]
    }

    pub fn y(&self, i: usize, j: usize, t: usize) -> bool {
        self.y[self.idx(i, j, t)]
    }

    pub fn set_x(&mut self, i: usize, j: usize, t: usize, v: bool) {
        let k = self.idx(i, j, t);
        self.x[k] = v;
    }

    pub fn set_y(&mut self, i: usize, j: usize, t: usize, v: bool) {
        let k = self.idx(i, j, t);
        self.y[k] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tensor {
    X,
    Y,
}

/// A broken cube invariant, with 0-based coordinates. Pairwise violations
/// are reported once per unordered pair with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Asymmetric { tensor: Tensor, i: usize, j: usize, t: usize },
    NonzeroDiagonal { tensor: Tensor, i: usize, t: usize },
    EdgeExceedsObservation { i: usize, j: usize, t: usize },
    /// `y[i, j, t]` differs from `a[i, t] * a[j, t]` with `a` read off `y`.
    ActivityMismatch { i: usize, j: usize, t: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Asymmetric { tensor, i, j, t } => {
                write!(f, "{tensor:?} asymmetric at ({i},{j},{t})")
            }
            Violation::NonzeroDiagonal { tensor, i, t } => {
                write!(f, "{tensor:?} nonzero diagonal at ({i},{i},{t})")
            }
            Violation::EdgeExceedsObservation { i, j, t } => {
                write!(f, "x exceeds y at ({i},{j},{t})")
            }
            Violation::ActivityMismatch { i, j, t } => {
                write!(f, "y inconsistent with node activity at ({i},{j},{t})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
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
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let shown: Vec<String> = self.violations.iter().take(10).map(|v| v.to_string()).collect();
        write!(f, "{} violation(s): {}", self.violations.len(), shown.join("; "))?;
        if self.violations.len() > 10 {
            write!(f, "; ...")?;
        }
        Ok(())
    }
}

/// Lists every violated cube invariant.
pub fn validate(cube: &DenseCube) -> ValidationReport {
    let n = cube.n_nodes;
    let mut violations = Vec::new();
    for t in 0..cube.n_frames {
        let active: Vec<bool> = (0..n).map(|i| (0..n).any(|j| cube.y(i, j, t))).collect();
        for i in 0..n {
            for (tensor, v) in [(Tensor::X, cube.x(i, i, t)), (Tensor::Y, cube.y(i, i, t))] {
                if v {
                    violations.push(Violation::NonzeroDiagonal { tensor, i, t });
                }
            }
            for j in i + 1..n {
                if cube.x(i, j, t) != cube.x(j, i, t) {
                    violations.push(Violation::Asymmetric { tensor: Tensor::X, i, j, t });
                }
                if cube.y(i, j, t) != cube.y(j, i, t) {
                    violations.push(Violation::Asymmetric { tensor: Tensor::Y, i, j, t });
                }
                if (cube.x(i, j, t) && !cube.y(i, j, t)) || (cube.x(j, i, t) && !cube.y(j, i, t)) {
                    violations.push(Violation::EdgeExceedsObservation { i, j, t });
                }
                let expected = active[i] && active[j];
                if cube.y(i, j, t) != expected || cube.y(j, i, t) != expected {
                    violations.push(Violation::ActivityMismatch { i, j, t });
                }
            }
        }
    }
    ValidationReport { violations }
}
