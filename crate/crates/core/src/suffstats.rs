//! Allocations and the block-level counts the likelihood factorises over.
//!
//! Every observed dyad `(i < j, t)` falls in exactly one regime, decided by
//! the previous frame of the same dyad:
//!
//! | previous frame            | regime      | success | failure |
//! |---------------------------|-------------|---------|---------|
//! | `t = 1` or unobserved     | fresh       | `eta`   | `zeta`  |
//! | observed, no edge         | creation    | `u01`   | `u00`   |
//! | observed, edge            | persistence | `u11`   | `u10`   |
//!
//! and is tallied in the unordered block `{z[i,t], z[j,t]}`.

use std::fmt;

use crate::error::{Error, Result};
use crate::netcube::AdjacencyCube;

/// Per-node, per-frame labels in `0..=k_up`; `0` means inactive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AllocationMatrix {
    n_nodes: usize,
    n_frames: usize,
    k_up: usize,
    // frame-major: t * n_nodes + i
    labels: Vec<u32>,
}

impl AllocationMatrix {
    /// All-zero allocation.
    pub fn zeros(n_nodes: usize, n_frames: usize, k_up: usize) -> Self {
        Self {
            n_nodes,
            n_frames,
            k_up,
            labels: vec![0; n_nodes * n_frames],
        }
    }

    /// Builds from node rows, `rows[i][t]`.
    pub fn from_rows(rows: &[Vec<u32>], k_up: usize) -> Result<Self> {
        let n_nodes = rows.len();
        let n_frames = rows.first().map_or(0, Vec::len);
        if n_nodes == 0 || n_frames == 0 {
            return Err(Error::Argument("allocation must be non-empty".into()));
        }
        let mut z = Self::zeros(n_nodes, n_frames, k_up);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_frames {
                return Err(Error::Argument(format!(
                    "row {i} has {} frames, expected {n_frames}",
                    row.len()
                )));
            }
            for (t, &g) in row.iter().enumerate() {
                if g as usize > k_up {
                    return Err(Error::Argument(format!(
                        "label {g} at ({i},{t}) exceeds k_up={k_up}"
                    )));
                }
                z.labels[t * n_nodes + i] = g;
            }
        }
        Ok(z)
    }

    /// Node rows, `rows[i][t]`.
    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.n_nodes)
            .map(|i| (0..self.n_frames).map(|t| self.get(i, t)).collect())
            .collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn k_up(&self) -> usize {
        self.k_up
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> u32 {
        self.labels[t * self.n_nodes + i]
    }

    /// Sets a label. Panics if `g > k_up`.
    #[inline]
    pub fn set(&mut self, i: usize, t: usize, g: u32) {
        assert!(g as usize <= self.k_up, "label {g} exceeds k_up={}", self.k_up);
        self.labels[t * self.n_nodes + i] = g;
    }

    /// Labels of frame `t`, indexed by node.
    pub fn frame(&self, t: usize) -> &[u32] {
        &self.labels[t * self.n_nodes..(t + 1) * self.n_nodes]
    }

    /// Same labels with a larger label bound.
    pub fn with_k_up(&self, k_up: usize) -> Result<Self> {
        if let Some(&max) = self.labels.iter().max() {
            if max as usize > k_up {
                return Err(Error::Argument(format!("label {max} exceeds k_up={k_up}")));
            }
        }
        Ok(Self { k_up, ..self.clone() })
    }

    /// Number of entries per label `0..=k_up` over all frames.
    pub fn occupancy(&self) -> Vec<u64> {
        let mut occ = vec![0u64; self.k_up + 1];
        for &g in &self.labels {
            occ[g as usize] += 1;
        }
        occ
    }

    /// Nonzero labels that appear anywhere, ascending.
    pub fn nonempty_labels(&self) -> Vec<u32> {
        self.occupancy()
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &c)| c > 0)
            .map(|(g, _)| g as u32)
            .collect()
    }

    /// Number of nonempty groups `K`.
    pub fn n_groups(&self) -> usize {
        self.nonempty_labels().len()
    }

    /// Renames nonempty labels to `1..=K` in ascending order of their old
    /// value, keeping `k_up`. Returns the old label of each new label.
    pub fn compact(&self) -> (AllocationMatrix, Vec<u32>) {
        let used = self.nonempty_labels();
        let mut map = vec![0u32; self.k_up + 1];
        for (new, &old) in used.iter().enumerate() {
            map[old as usize] = new as u32 + 1;
        }
        let labels = self.labels.iter().map(|&g| map[g as usize]).collect();
        (Self { labels, ..self.clone() }, used)
    }

    /// Applies `perm[g]` to every label; `perm[0]` must be 0.
    pub fn relabel(&self, perm: &[u32]) -> Result<Self> {
        if perm.len() != self.k_up + 1 || perm[0] != 0 {
            return Err(Error::Argument("label map must cover 0..=k_up and fix 0".into()));
        }
        let labels: Vec<u32> = self.labels.iter().map(|&g| perm[g as usize]).collect();
        if labels.iter().any(|&g| g as usize > self.k_up) {
            return Err(Error::Argument("label map leaves 0..=k_up".into()));
        }
        Ok(Self { labels, ..self.clone() })
    }

    /// Moves node `i`'s row to `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        crate::netcube::check_permutation(perm, self.n_nodes)?;
        let mut out = Self::zeros(self.n_nodes, self.n_frames, self.k_up);
        for t in 0..self.n_frames {
            for i in 0..self.n_nodes {
                out.labels[t * self.n_nodes + perm[i]] = self.get(i, t);
            }
        }
        Ok(out)
    }

    /// Checks shape and that `z = 0` exactly where the cube is inactive.
    pub fn check_consistent(&self, cube: &AdjacencyCube) -> Result<()> {
        if self.n_nodes != cube.n_nodes() || self.n_frames != cube.n_frames() {
            return Err(Error::Consistency(format!(
                "allocation is {}x{} but cube is {}x{}",
                self.n_nodes,
                self.n_frames,
                cube.n_nodes(),
                cube.n_frames()
            )));
        }
        for t in 0..self.n_frames {
            for i in 0..self.n_nodes {
                let g = self.get(i, t);
                let active = cube.is_active(i, t);
                if active && g == 0 {
                    return Err(Error::Consistency(format!(
                        "active node {i} at frame {t} has label 0"
                    )));
                }
                if !active && g != 0 {
                    return Err(Error::Consistency(format!(
                        "inactive node {i} at frame {t} has label {g}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Six regime counters of one block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct DyadCounts {
    pub eta: u64,
    pub zeta: u64,
    pub u00: u64,
    pub u01: u64,
    pub u10: u64,
    pub u11: u64,
}

impl DyadCounts {
    pub fn total(&self) -> u64 {
        self.eta + self.zeta + self.u00 + self.u01 + self.u10 + self.u11
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }

    #[inline]
    pub fn record(&mut self, regime: Regime, edge: bool) {
        let slot = match (regime, edge) {
            (Regime::Fresh, true) => &mut self.eta,
            (Regime::Fresh, false) => &mut self.zeta,
            (Regime::Creation, true) => &mut self.u01,
            (Regime::Creation, false) => &mut self.u00,
            (Regime::Persistence, true) => &mut self.u11,
            (Regime::Persistence, false) => &mut self.u10,
        };
        *slot += 1;
    }

    #[inline]
    pub fn add(&self, o: &DyadCounts) -> DyadCounts {
        DyadCounts {
            eta: self.eta + o.eta,
            zeta: self.zeta + o.zeta,
            u00: self.u00 + o.u00,
            u01: self.u01 + o.u01,
            u10: self.u10 + o.u10,
            u11: self.u11 + o.u11,
        }
    }

    /// Componentwise difference; panics on underflow.
    #[inline]
    pub fn sub(&self, o: &DyadCounts) -> DyadCounts {
        DyadCounts {
            eta: self.eta - o.eta,
            zeta: self.zeta - o.zeta,
            u00: self.u00 - o.u00,
            u01: self.u01 - o.u01,
            u10: self.u10 - o.u10,
            u11: self.u11 - o.u11,
        }
    }
}

/// Which edge probability governs an observed dyad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// No observed previous value: `theta`.
    Fresh,
    /// Previously observed without an edge: `P`.
    Creation,
    /// Previously observed with an edge: `1 - Q`.
    Persistence,
}

/// Regime and value of dyad `(i, j, t)`, or `None` when it is unobserved.
pub fn classify_dyad(cube: &AdjacencyCube, i: usize, j: usize, t: usize) -> Option<(Regime, bool)> {
    if !cube.observed(i, j, t) {
        return None;
    }
    let regime = if t == 0 || !cube.observed(i, j, t - 1) {
        Regime::Fresh
    } else if cube.has_edge(i, j, t - 1) {
        Regime::Persistence
    } else {
        Regime::Creation
    };
    Some((regime, cube.has_edge(i, j, t)))
}

/// Index of the unordered block `{g, h}` with `1 <= g, h <= k_up`.
#[inline]
pub fn block_index(g: u32, h: u32) -> usize {
    let (a, b) = if g <= h { (g - 1, h - 1) } else { (h - 1, g - 1) };
    let (a, b) = (a as usize, b as usize);
    b * (b + 1) / 2 + a
}

/// Block counts, label transitions and group sizes of an allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SufficientStats {
    k_up: usize,
    n_nodes: usize,
    n_frames: usize,
    blocks: Vec<DyadCounts>,
    // (k_up + 1)^2, row-major, R[g][h] = #{(i, t >= 2): z[t-1] = g, z[t] = h}
    r: Vec<u64>,
    n1: Vec<u64>,
    n_agg: Vec<u64>,
    occupancy: Vec<u64>,
}

impl SufficientStats {
    fn empty(k_up: usize, n_nodes: usize, n_frames: usize) -> Self {
        Self {
            k_up,
            n_nodes,
            n_frames,
            blocks: vec![DyadCounts::default(); k_up * (k_up + 1) / 2],
            r: vec![0; (k_up + 1) * (k_up + 1)],
            n1: vec![0; k_up + 1],
            n_agg: vec![0; k_up + 1],
            occupancy: vec![0; k_up + 1],
        }
    }

    pub fn k_up(&self) -> usize {
        self.k_up
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// Counts of block `{g, h}`, labels in `1..=k_up`.
    #[inline]
    pub fn block(&self, g: u32, h: u32) -> &DyadCounts {
        &self.blocks[block_index(g, h)]
    }

    pub fn eta(&self, g: u32, h: u32) -> u64 {
        self.block(g, h).eta
    }

    pub fn zeta(&self, g: u32, h: u32) -> u64 {
        self.block(g, h).zeta
    }

    /// `U^{uv}_{gh}`: previous value `u`, current value `v`.
    pub fn u(&self, u: bool, v: bool, g: u32, h: u32) -> u64 {
        let b = self.block(g, h);
        match (u, v) {
            (false, false) => b.u00,
            (false, true) => b.u01,
            (true, false) => b.u10,
            (true, true) => b.u11,
        }
    }

    /// Label transitions `R[g][h]`, labels in `0..=k_up`.
    #[inline]
    pub fn r(&self, g: u32, h: u32) -> u64 {
        self.r[g as usize * (self.k_up + 1) + h as usize]
    }

    pub fn r_row_sum(&self, g: u32) -> u64 {
        let w = self.k_up + 1;
        self.r[g as usize * w..(g as usize + 1) * w].iter().sum()
    }

    /// Group sizes at the first frame, label `0` included.
    pub fn n1(&self) -> &[u64] {
        &self.n1
    }

    /// Group sizes summed over frames `2..=T`, label `0` included.
    pub fn n_agg(&self) -> &[u64] {
        &self.n_agg
    }

    /// Group sizes summed over all frames, label `0` included.
    pub fn occupancy(&self) -> &[u64] {
        &self.occupancy
    }

    /// Whether label `g >= 1` is used anywhere.
    #[inline]
    pub fn is_nonempty(&self, g: u32) -> bool {
        self.occupancy[g as usize] > 0
    }

    pub fn nonempty_labels(&self) -> Vec<u32> {
        (1..=self.k_up as u32).filter(|&g| self.is_nonempty(g)).collect()
    }

    pub fn n_groups(&self) -> usize {
        self.nonempty_labels().len()
    }

    /// Sum of all regime counters over blocks.
    pub fn total_dyads(&self) -> u64 {
        self.blocks.iter().map(DyadCounts::total).sum()
    }

    pub fn total_transitions(&self) -> u64 {
        self.r.iter().sum()
    }

    #[inline]
    fn r_mut(&mut self, g: u32, h: u32) -> &mut u64 {
        &mut self.r[g as usize * (self.k_up + 1) + h as usize]
    }

    #[inline]
    fn block_mut(&mut self, g: u32, h: u32) -> &mut DyadCounts {
        &mut self.blocks[block_index(g, h)]
    }

    /// Statistics after relabelling every `h` as `g`.
    pub fn merged(&self, g: u32, h: u32) -> Result<SufficientStats> {
        let k = self.k_up as u32;
        if g == h || g == 0 || h == 0 || g > k || h > k {
            return Err(Error::Argument(format!("cannot merge labels {g} and {h}")));
        }
        let mut out = self.clone();
        for x in 1..=k {
            if x == h {
                continue;
            }
            let moved = *self.block(h, x);
            let target = if x == g { (g, g) } else { (g, x) };
            let sum = out.block(target.0, target.1).add(&moved);
            *out.block_mut(target.0, target.1) = sum;
            *out.block_mut(h, x) = DyadCounts::default();
        }
        let within = *self.block(h, h);
        let sum = out.block(g, g).add(&within);
        *out.block_mut(g, g) = sum;
        *out.block_mut(h, h) = DyadCounts::default();

        for x in 0..=k {
            // rows then columns; the (h, h) entry ends in (g, g)
            let v = out.r(h, x);
            *out.r_mut(h, x) = 0;
            *out.r_mut(g, x) += v;
        }
        for x in 0..=k {
            let v = out.r(x, h);
            *out.r_mut(x, h) = 0;
            *out.r_mut(x, g) += v;
        }
        for v in [&mut out.n1, &mut out.n_agg, &mut out.occupancy] {
            v[g as usize] += v[h as usize];
            v[h as usize] = 0;
        }
        Ok(out)
    }

    /// Plain-text dump for debugging.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SufficientStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# k_up={} N={} T={}", self.k_up, self.n_nodes, self.n_frames)?;
        writeln!(f, "# zeta = failures among fresh-regime dyads (complement of eta)")?;
        writeln!(f, "# block g h eta zeta u00 u01 u10 u11")?;
        let k = self.k_up as u32;
        for h in 1..=k {
            for g in 1..=h {
                let b = self.block(g, h);
                if !b.is_zero() {
                    writeln!(
                        f,
                        "block {g} {h} {} {} {} {} {} {}",
                        b.eta, b.zeta, b.u00, b.u01, b.u10, b.u11
                    )?;
                }
            }
        }
        for g in 0..=k {
            for h in 0..=k {
                let v = self.r(g, h);
                if v > 0 {
                    writeln!(f, "r {g} {h} {v}")?;
                }
            }
        }
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        writeln!(f, "n1 {}", join(&self.n1))?;
        writeln!(f, "n_agg {}", join(&self.n_agg))
    }
}

/// Counts over all observed dyads and label transitions of `z`.
pub fn compute_stats(cube: &AdjacencyCube, z: &AllocationMatrix) -> Result<SufficientStats> {
    z.check_consistent(cube)?;
    let (n, n_frames) = (cube.n_nodes(), cube.n_frames());
    let mut stats = SufficientStats::empty(z.k_up(), n, n_frames);
    let mut prev_mark = vec![false; n];
    let mut cur_mark = vec![false; n];
    for t in 0..n_frames {
        let active = cube.active_nodes(t);
        for (a, &i) in active.iter().enumerate() {
            let i = i as usize;
            let gi = z.get(i, t);
            for &j in cube.neighbors(i, t) {
                cur_mark[j as usize] = true;
            }
            let prev_i = t > 0 && cube.is_active(i, t - 1);
            if prev_i {
                for &j in cube.neighbors(i, t - 1) {
                    prev_mark[j as usize] = true;
                }
            }
            for &j in &active[a + 1..] {
                let j = j as usize;
                let regime = if prev_i && cube.is_active(j, t - 1) {
                    if prev_mark[j] {
                        Regime::Persistence
                    } else {
                        Regime::Creation
                    }
                } else {
                    Regime::Fresh
                };
                stats.block_mut(gi, z.get(j, t)).record(regime, cur_mark[j]);
            }
            for &j in cube.neighbors(i, t) {
                cur_mark[j as usize] = false;
            }
            if prev_i {
                for &j in cube.neighbors(i, t - 1) {
                    prev_mark[j as usize] = false;
                }
            }
        }
    }
    for t in 0..n_frames {
        for i in 0..n {
            let g = z.get(i, t);
            stats.occupancy[g as usize] += 1;
            if t == 0 {
                stats.n1[g as usize] += 1;
            } else {
                stats.n_agg[g as usize] += 1;
                *stats.r_mut(z.get(i, t - 1), g) += 1;
            }
        }
    }
    Ok(stats)
}

/// Regime counts of node `i`'s observed dyads at frame `t`, grouped by the
/// label of the other endpoint. Reuses its buffers between calls.
#[derive(Debug, Clone, Default)]
pub struct NodeTally {
    marks: Vec<u8>,
    per_label: Vec<DyadCounts>,
    touched: Vec<u32>,
    entries: Vec<(u32, DyadCounts)>,
}

impl NodeTally {
    pub fn new(n_nodes: usize, k_up: usize) -> Self {
        Self {
            marks: vec![0; n_nodes],
            per_label: vec![DyadCounts::default(); k_up + 1],
            touched: Vec::new(),
            entries: Vec::new(),
        }
    }

    /// `(label, counts)` pairs with distinct labels, ascending.
    pub fn compute(
        &mut self,
        cube: &AdjacencyCube,
        z: &AllocationMatrix,
        t: usize,
        i: usize,
    ) -> &[(u32, DyadCounts)] {
        const CUR: u8 = 1;
        const PREV: u8 = 2;
        if self.marks.len() < cube.n_nodes() {
            self.marks.resize(cube.n_nodes(), 0);
        }
        if self.per_label.len() < z.k_up() + 1 {
            self.per_label.resize(z.k_up() + 1, DyadCounts::default());
        }
        self.entries.clear();
        if !cube.is_active(i, t) {
            return &self.entries;
        }
        for &j in cube.neighbors(i, t) {
            self.marks[j as usize] |= CUR;
        }
        let prev_i = t > 0 && cube.is_active(i, t - 1);
        if prev_i {
            for &j in cube.neighbors(i, t - 1) {
                self.marks[j as usize] |= PREV;
            }
        }
        for &j in cube.active_nodes(t) {
            let j = j as usize;
            if j == i {
                continue;
            }
            let m = self.marks[j];
            let regime = if prev_i && cube.is_active(j, t - 1) {
                if m & PREV != 0 {
                    Regime::Persistence
                } else {
                    Regime::Creation
                }
            } else {
                Regime::Fresh
            };
            let h = z.get(j, t);
            if self.per_label[h as usize].is_zero() {
                self.touched.push(h);
            }
            self.per_label[h as usize].record(regime, m & CUR != 0);
        }
        for &j in cube.neighbors(i, t) {
            self.marks[j as usize] = 0;
        }
        if prev_i {
            for &j in cube.neighbors(i, t - 1) {
                self.marks[j as usize] = 0;
            }
        }
        self.touched.sort_unstable();
        for &h in &self.touched {
            self.entries.push((h, self.per_label[h as usize]));
            self.per_label[h as usize] = DyadCounts::default();
        }
        self.touched.clear();
        &self.entries
    }
}

/// Validates a single-node relabelling `(t, i) -> g_new`.
pub(crate) fn check_move(z: &AllocationMatrix, t: usize, i: usize, g_new: u32) -> Result<u32> {
    if i >= z.n_nodes() || t >= z.n_frames() {
        return Err(Error::Argument(format!("({i}, {t}) is outside the allocation")));
    }
    let g_old = z.get(i, t);
    if g_old == 0 {
        return Err(Error::Consistency(format!(
            "node {i} is inactive at frame {t} and cannot be moved"
        )));
    }
    if g_new == 0 || g_new as usize > z.k_up() {
        return Err(Error::Consistency(format!(
            "target label {g_new} is outside 1..={}",
            z.k_up()
        )));
    }
    Ok(g_old)
}

/// Moves node `i` at frame `t` to `g_new`, updating `stats` and `z` in place.
pub fn apply_move(
    stats: &mut SufficientStats,
    cube: &AdjacencyCube,
    z: &mut AllocationMatrix,
    t: usize,
    i: usize,
    g_new: u32,
) -> Result<()> {
    let mut tally = NodeTally::new(cube.n_nodes(), z.k_up());
    apply_move_with(stats, cube, z, t, i, g_new, &mut tally)
}

pub(crate) fn apply_move_with(
    stats: &mut SufficientStats,
    cube: &AdjacencyCube,
    z: &mut AllocationMatrix,
    t: usize,
    i: usize,
    g_new: u32,
    tally: &mut NodeTally,
) -> Result<()> {
    let g_old = check_move(z, t, i, g_new)?;
    if g_old == g_new {
        return Ok(());
    }
    for &(h, c) in tally.compute(cube, z, t, i) {
        let removed = stats.block(g_old, h).sub(&c);
        *stats.block_mut(g_old, h) = removed;
    }
    for &(h, c) in tally.entries.iter() {
        let added = stats.block(g_new, h).add(&c);
        *stats.block_mut(g_new, h) = added;
    }
    if t > 0 {
        let p = z.get(i, t - 1);
        *stats.r_mut(p, g_old) -= 1;
        *stats.r_mut(p, g_new) += 1;
        stats.n_agg[g_old as usize] -= 1;
        stats.n_agg[g_new as usize] += 1;
    } else {
        stats.n1[g_old as usize] -= 1;
        stats.n1[g_new as usize] += 1;
    }
    if t + 1 < z.n_frames() {
        let nx = z.get(i, t + 1);
        *stats.r_mut(g_old, nx) -= 1;
        *stats.r_mut(g_new, nx) += 1;
    }
    stats.occupancy[g_old as usize] -= 1;
    stats.occupancy[g_new as usize] += 1;
    z.set(i, t, g_new);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// N=3, T=2 hand example with 0-based nodes and frames.
    fn small() -> (AdjacencyCube, AllocationMatrix) {
        let cube = AdjacencyCube::from_edges(
            3,
            vec![vec![(0, 1)], vec![(0, 1), (1, 2)]],
            Some(crate::netcube::NodeActivity::all_active(3, 2)),
        )
        .unwrap();
        let z = AllocationMatrix::from_rows(&[vec![1, 1], vec![1, 2], vec![2, 2]], 2).unwrap();
        (cube, z)
    }

    #[test]
    fn hand_counted_example() {
        let (cube, z) = small();
        let s = compute_stats(&cube, &z).unwrap();
        assert_eq!(s.eta(1, 1), 1);
        assert_eq!(s.eta(1, 2), 0);
        assert_eq!(s.eta(2, 2), 0);
        assert_eq!(s.zeta(1, 1), 0);
        assert_eq!(s.zeta(1, 2), 2);
        assert_eq!(s.zeta(2, 2), 0);
        assert_eq!(s.u(true, true, 1, 2), 1);
        assert_eq!(s.u(false, false, 1, 2), 1);
        assert_eq!(s.u(false, true, 2, 2), 1);
        assert_eq!(s.u(true, false, 1, 2), 0);
        assert_eq!(s.total_dyads(), 6);
        assert_eq!((s.r(1, 1), s.r(1, 2), s.r(2, 2), s.r(2, 1)), (1, 1, 1, 0));
        assert_eq!(s.n1(), &[0, 2, 1]);
        assert_eq!(s.n_agg(), &[0, 1, 2]);
    }

    #[test]
    fn all_inactive() {
        let cube = AdjacencyCube::from_edges(4, vec![vec![]; 3], None).unwrap();
        let z = AllocationMatrix::zeros(4, 3, 2);
        let s = compute_stats(&cube, &z).unwrap();
        assert_eq!(s.total_dyads(), 0);
        assert_eq!(s.r(0, 0), 4 * 2);
        assert_eq!(s.total_transitions(), 8);
        assert_eq!(s.n1(), &[4, 0, 0]);
    }

    #[test]
    fn label_swap_permutes_blocks() {
        let (cube, z) = small();
        let s = compute_stats(&cube, &z).unwrap();
        let swapped = compute_stats(&cube, &z.relabel(&[0, 2, 1]).unwrap()).unwrap();
        let p = [0u32, 2, 1];
        for g in 1..=2u32 {
            for h in 1..=2u32 {
                assert_eq!(s.block(g, h), swapped.block(p[g as usize], p[h as usize]));
            }
        }
        for g in 0..=2u32 {
            for h in 0..=2u32 {
                assert_eq!(s.r(g, h), swapped.r(p[g as usize], p[h as usize]));
            }
        }
    }

    #[test]
    fn inconsistent_allocation_rejected() {
        let (cube, _) = small();
        let z = AllocationMatrix::from_rows(&[vec![1, 0], vec![1, 2], vec![2, 2]], 2).unwrap();
        assert!(matches!(compute_stats(&cube, &z), Err(Error::Consistency(_))));
    }

    #[test]
    fn move_matches_recompute() {
        let (cube, mut z) = small();
        let mut s = compute_stats(&cube, &z).unwrap();
        let before = s.clone();
        apply_move(&mut s, &cube, &mut z, 1, 1, 2).unwrap();
        assert_eq!(s, before, "identity move");
        apply_move(&mut s, &cube, &mut z, 1, 1, 1).unwrap();
        assert_eq!(s, compute_stats(&cube, &z).unwrap());
        assert_eq!(z.get(1, 1), 1);
    }

    #[test]
    fn move_errors() {
        let cube = AdjacencyCube::from_edges(3, vec![vec![(0, 1)]], None).unwrap();
        let mut z = AllocationMatrix::from_rows(&[vec![1], vec![1], vec![0]], 2).unwrap();
        let mut s = compute_stats(&cube, &z).unwrap();
        assert!(matches!(
            apply_move(&mut s, &cube, &mut z, 0, 2, 1),
            Err(Error::Consistency(_))
        ));
        assert!(matches!(
            apply_move(&mut s, &cube, &mut z, 0, 0, 0),
            Err(Error::Consistency(_))
        ));
        assert!(apply_move(&mut s, &cube, &mut z, 0, 0, 3).is_err());
    }

    #[test]
    fn merge_matches_relabel() {
        let (cube, z) = small();
        let s = compute_stats(&cube, &z).unwrap();
        let merged = s.merged(1, 2).unwrap();
        let z2 = z.relabel(&[0, 1, 1]).unwrap();
        assert_eq!(merged, compute_stats(&cube, &z2).unwrap());
        assert!(s.merged(1, 1).is_err());
    }

    #[test]
    fn compaction_preserves_partition() {
        let z = AllocationMatrix::from_rows(&[vec![3, 0], vec![5, 3]], 5).unwrap();
        let (c, old) = z.compact();
        assert_eq!(old, vec![3, 5]);
        assert_eq!(c.to_rows(), vec![vec![1, 0], vec![2, 1]]);
        assert_eq!(c.k_up(), 5);
    }
}
