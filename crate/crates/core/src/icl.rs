//! Exact integrated completed likelihood on the log scale.
//!
//! With conjugate priors all of `Theta`, `P`, `Q` and `Pi` integrate out and
//! `log ICL` becomes a sum of three kinds of terms:
//!
//! - the initial-state block `sum_g N1_g log alpha_g`, with `alpha` the
//!   aggregated group proportions over frames `2..=T`;
//! - one Dirichlet-multinomial term per row of the label transition counts,
//!   over the states `{0} ∪ {nonempty groups}`;
//! - three Beta-binomial terms per unordered block of nonempty groups.
//!
//! A block with no observed dyads contributes exactly zero (its prior
//! normalising constant cancels), so summing over all blocks and summing
//! over blocks of nonempty groups agree. The Dirichlet normaliser does
//! depend on the number of occupied states, which is why moves and merges
//! that empty or create a group touch every row.
//!
//! An allocation with a group present at the first frame but absent from
//! every later frame gets `alpha_g = 0` and hence zero prior mass. Such
//! configurations score `-inf`; internally they are tracked as a count of
//! zero-mass groups next to the finite remainder, so the optimiser can still
//! rank them.

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::netcube::AdjacencyCube;
use crate::suffstats::{check_move, AllocationMatrix, DyadCounts, NodeTally, SufficientStats};

/// Scalar value for each hyperparameter family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperScalars {
    pub delta: f64,
    pub eta0: f64,
    pub zeta0: f64,
    pub a_p: f64,
    pub b_p: f64,
    pub a_q: f64,
    pub b_q: f64,
}

impl Default for HyperScalars {
    /// Jeffreys: everything 0.5.
    fn default() -> Self {
        Self {
            delta: 0.5,
            eta0: 0.5,
            zeta0: 0.5,
            a_p: 0.5,
            b_p: 0.5,
            a_q: 0.5,
            b_q: 0.5,
        }
    }
}

/// Prior hyperparameters for up to `k_up` groups.
///
/// `delta` is `(k_up+1) x (k_up+1)` over states `0..=k_up`. The Beta
/// parameters are stored in `(k_up+1) x (k_up+1)` symmetric matrices whose
/// row and column `0` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub delta: Matrix,
    pub eta0: Matrix,
    pub zeta0: Matrix,
    pub a_p: Matrix,
    pub b_p: Matrix,
    pub a_q: Matrix,
    pub b_q: Matrix,
}

impl Hyperparameters {
    pub fn jeffreys(k_up: usize) -> Self {
        Self::from_scalars(k_up, HyperScalars::default())
    }

    pub fn from_scalars(k_up: usize, s: HyperScalars) -> Self {
        let m = |v: f64| Matrix::filled(k_up + 1, k_up + 1, v);
        Self {
            delta: m(s.delta),
            eta0: m(s.eta0),
            zeta0: m(s.zeta0),
            a_p: m(s.a_p),
            b_p: m(s.b_p),
            a_q: m(s.a_q),
            b_q: m(s.b_q),
        }
    }

    pub fn k_up(&self) -> usize {
        self.delta.rows() - 1
    }

    fn families(&self) -> [(&'static str, &Matrix); 7] {
        [
            ("delta", &self.delta),
            ("eta0", &self.eta0),
            ("zeta0", &self.zeta0),
            ("a_p", &self.a_p),
            ("b_p", &self.b_p),
            ("a_q", &self.a_q),
            ("b_q", &self.b_q),
        ]
    }

    /// Checks shapes, positivity and symmetry of the Beta parameters.
    pub fn validate(&self) -> Result<()> {
        let dim = self.delta.rows();
        if dim < 2 {
            return Err(Error::Argument("hyperparameters need k_up >= 1".into()));
        }
        for (name, m) in self.families() {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::Argument(format!(
                    "{name} is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
            if let Some(v) = m.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Argument(format!(
                    "{name} must be strictly positive and finite, found {v}"
                )));
            }
            if name != "delta" && !m.is_symmetric() {
                return Err(Error::Argument(format!("{name} must be symmetric")));
            }
        }
        Ok(())
    }

    /// True when every family is constant, so that the ICL is invariant
    /// under permutations of the nonzero labels.
    pub fn is_exchangeable(&self) -> bool {
        self.families()
            .iter()
            .all(|(_, m)| m.iter().all(|v| *v == m[(0, 0)]))
    }

    fn check_covers(&self, stats: &SufficientStats) -> Result<()> {
        if self.k_up() < stats.k_up() {
            return Err(Error::Argument(format!(
                "hyperparameters cover k_up={} but statistics use k_up={}",
                self.k_up(),
                stats.k_up()
            )));
        }
        Ok(())
    }
}

/// Natural log of the exact ICL; `-inf` when the allocation has zero prior
/// mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IclValue {
    pub log_icl: f64,
}

impl IclValue {
    pub fn is_finite(&self) -> bool {
        self.log_icl.is_finite()
    }
}

/// `log ICL` split into the number of zero-mass groups and the finite rest.
/// Ordered lexicographically: fewer zero-mass groups first, then value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IclScore {
    pub zero_mass: u32,
    pub finite: f64,
}

impl IclScore {
    pub fn log_icl(&self) -> f64 {
        if self.zero_mass > 0 {
            f64::NEG_INFINITY
        } else {
            self.finite
        }
    }

    pub fn apply(&self, d: ScoreDelta) -> IclScore {
        IclScore {
            zero_mass: (self.zero_mass as i64 + d.zero_mass) as u32,
            finite: self.finite + d.finite,
        }
    }

    /// `self - before`.
    pub fn delta_from(&self, before: &IclScore) -> ScoreDelta {
        ScoreDelta {
            zero_mass: self.zero_mass as i64 - before.zero_mass as i64,
            finite: self.finite - before.finite,
        }
    }
}

/// Change of an [`IclScore`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreDelta {
    pub zero_mass: i64,
    pub finite: f64,
}

impl ScoreDelta {
    /// The change as a plain real: `±inf` when the zero-mass count moves.
    pub fn as_log_delta(&self) -> f64 {
        match self.zero_mass {
            0 => self.finite,
            z if z < 0 => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Strict improvement beyond `tol` in the lexicographic order.
    pub fn improves(&self, tol: f64) -> bool {
        self.zero_mass < 0 || (self.zero_mass == 0 && self.finite > tol)
    }

    /// `self` better than `other` in the lexicographic order.
    pub fn better_than(&self, other: &ScoreDelta) -> bool {
        self.zero_mass < other.zero_mass
            || (self.zero_mass == other.zero_mass && self.finite > other.finite)
    }

    fn add(self, o: ScoreDelta) -> ScoreDelta {
        ScoreDelta {
            zero_mass: self.zero_mass + o.zero_mass,
            finite: self.finite + o.finite,
        }
    }
}

/// `log B(a + s, b + f) - log B(a, b)`; exactly zero without data.
#[inline]
pub fn log_beta_binomial(a: f64, b: f64, s: u64, f: u64) -> f64 {
    if s == 0 && f == 0 {
        return 0.0;
    }
    let (s, f) = (s as f64, f as f64);
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + ln_gamma(a + s) + ln_gamma(b + f)
        - ln_gamma(a + b + s + f)
}


/// Precomputed `ln Gamma(base + n)` for every hyperparameter value `base`
/// and counts `n` up to a bound. Lookups outside the table fall back to
/// evaluating `ln_gamma`.
#[derive(Debug, Clone)]
pub struct LnGammaTable {
    tables: Vec<Vec<f64>>,
    dim: usize,
    // per (g, h): eta0, zeta0, eta0+zeta0, a_p, b_p, a_p+b_p, a_q, b_q, a_q+b_q
    beta_ids: Vec<[u32; 9]>,
    // per (g, h): eta0, zeta0, a_p, b_p, a_q, b_q
    beta_bases: Vec<[f64; 6]>,
    // per (g, h): ln B of the three Beta priors
    beta_prior: Vec<[f64; 3]>,
    delta_ids: Vec<u32>,
    // Dirichlet row sums reachable under exchangeable hyperparameters
    row_sums: Vec<(u64, u32)>,
}

const NO_TABLE: u32 = u32::MAX;
const TABLE_LEN_CAP: u64 = 1 << 21;
const TABLE_BUDGET: usize = 1 << 24;

impl LnGammaTable {
    /// Tables for counts `0..=max_count` (capped).
    pub fn new(hyper: &Hyperparameters, max_count: u64) -> Self {
        let dim = hyper.delta.rows();
        let len = (max_count.min(TABLE_LEN_CAP) + 1) as usize;
        let mut tables: Vec<Vec<f64>> = Vec::new();
        let mut ids: HashMap<u64, u32> = HashMap::new();
        let mut id_of = |base: f64| -> u32 {
            if let Some(&id) = ids.get(&base.to_bits()) {
                return id;
            }
            if (tables.len() + 1) * len > TABLE_BUDGET {
                return NO_TABLE;
            }
            tables.push((0..len).map(|n| ln_gamma(base + n as f64)).collect());
            let id = tables.len() as u32 - 1;
            ids.insert(base.to_bits(), id);
            id
        };
        let mut beta_ids = Vec::with_capacity(dim * dim);
        let mut beta_bases = Vec::with_capacity(dim * dim);
        let mut beta_prior = Vec::with_capacity(dim * dim);
        let mut delta_ids = Vec::with_capacity(dim * dim);
        for g in 0..dim {
            for h in 0..dim {
                let k = (g, h);
                let mut e = [NO_TABLE; 9];
                let mut prior = [0.0; 3];
                for (f, (a, b)) in [
                    (hyper.eta0[k], hyper.zeta0[k]),
                    (hyper.a_p[k], hyper.b_p[k]),
                    (hyper.a_q[k], hyper.b_q[k]),
                ]
                .into_iter()
                .enumerate()
                {
                    e[3 * f] = id_of(a);
                    e[3 * f + 1] = id_of(b);
                    e[3 * f + 2] = id_of(a + b);
                    prior[f] = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
                }
                beta_ids.push(e);
                beta_bases.push([
                    hyper.eta0[k],
                    hyper.zeta0[k],
                    hyper.a_p[k],
                    hyper.b_p[k],
                    hyper.a_q[k],
                    hyper.b_q[k],
                ]);
                beta_prior.push(prior);
                delta_ids.push(id_of(hyper.delta[k]));
            }
        }
        let mut row_sums = Vec::new();
        if hyper.is_exchangeable() {
            // same summation order as `prior_row_sum`
            let d = hyper.delta[(0, 0)];
            let mut sum = d;
            for _ in 0..dim {
                row_sums.push((sum.to_bits(), id_of(sum)));
                sum += d;
            }
        }
        Self {
            tables,
            dim,
            beta_ids,
            beta_bases,
            beta_prior,
            delta_ids,
            row_sums,
        }
    }

    /// Tables sized for the counts of `stats`.
    pub fn for_stats(hyper: &Hyperparameters, stats: &SufficientStats) -> Self {
        let max = stats
            .total_dyads()
            .max(stats.total_transitions())
            .max(stats.n_nodes() as u64);
        Self::new(hyper, max)
    }

    #[inline]
    fn get(&self, id: u32, base: f64, n: u64) -> f64 {
        if id != NO_TABLE {
            if let Some(&v) = self.tables[id as usize].get(n as usize) {
                return v;
            }
        }
        ln_gamma(base + n as f64)
    }

    #[inline]
    fn block_term(&self, g: u32, h: u32, c: &DyadCounts) -> f64 {
        let idx = g as usize * self.dim + h as usize;
        let (ids, prior, bases) = (&self.beta_ids[idx], &self.beta_prior[idx], &self.beta_bases[idx]);
        let mut total = 0.0;
        for (f, (a, b, s, fl)) in [
            (bases[0], bases[1], c.eta, c.zeta),
            (bases[2], bases[3], c.u01, c.u00),
            (bases[4], bases[5], c.u10, c.u11),
        ]
        .into_iter()
        .enumerate()
        {
            if s == 0 && fl == 0 {
                continue;
            }
            total += self.get(ids[3 * f], a, s) + self.get(ids[3 * f + 1], b, fl)
                - self.get(ids[3 * f + 2], a + b, s + fl)
                - prior[f];
        }
        total
    }

    #[inline]
    fn cell_term(&self, x: u32, y: u32, delta: f64, count: u64) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let id = self.delta_ids[x as usize * self.dim + y as usize];
        self.get(id, delta, count) - self.get(id, delta, 0)
    }

    #[inline]
    fn row_normaliser(&self, prior_sum: f64, row_total: u64) -> f64 {
        let bits = prior_sum.to_bits();
        match self.row_sums.iter().find(|e| e.0 == bits) {
            Some(&(_, id)) => self.get(id, prior_sum, 0) - self.get(id, prior_sum, row_total),
            None => ln_gamma(prior_sum) - ln_gamma(prior_sum + row_total as f64),
        }
    }
}

/// Optional lookup table threaded through the scoring functions.
pub type Lg<'a> = Option<&'a LnGammaTable>;

#[inline]
fn block_term(hyper: &Hyperparameters, lg: Lg, g: u32, h: u32, c: &DyadCounts) -> f64 {
    if c.is_zero() {
        return 0.0;
    }
    if let Some(tab) = lg {
        return tab.block_term(g, h, c);
    }
    let k = (g as usize, h as usize);
    log_beta_binomial(hyper.eta0[k], hyper.zeta0[k], c.eta, c.zeta)
        + log_beta_binomial(hyper.a_p[k], hyper.b_p[k], c.u01, c.u00)
        + log_beta_binomial(hyper.a_q[k], hyper.b_q[k], c.u10, c.u11)
}

/// Contribution of label `g` to the initial-state block, given its first
/// frame size, aggregated size and the aggregate total (T >= 2).
#[inline]
fn alpha_label_term(n1: u64, n_agg: u64, total: u64) -> (i64, f64) {
    if n1 == 0 {
        (0, 0.0)
    } else if n_agg == 0 {
        (1, 0.0)
    } else {
        (0, n1 as f64 * (n_agg as f64 / total as f64).ln())
    }
}

/// Initial-state block. For `T = 1` the aggregated sizes are undefined and
/// `alpha` is taken uniform over the states occupied at the first frame.
fn alpha_part(stats: &SufficientStats) -> IclScore {
    let n1 = stats.n1();
    if stats.n_frames() < 2 {
        let m = n1.iter().filter(|&&c| c > 0).count();
        let finite = if m == 0 { 0.0 } else { -(stats.n_nodes() as f64) * (m as f64).ln() };
        return IclScore { zero_mass: 0, finite };
    }
    let total: u64 = stats.n_agg().iter().sum();
    let mut score = IclScore::default();
    for (g, &c) in n1.iter().enumerate() {
        let (z, v) = alpha_label_term(c, stats.n_agg()[g], total);
        score.zero_mass += z as u32;
        score.finite += v;
    }
    score
}

/// Sum of `delta[x][y]` over occupied states `y`, with `emptied` treated as
/// unoccupied and `born` as occupied.
fn prior_row_sum(
    hyper: &Hyperparameters,
    stats: &SufficientStats,
    x: u32,
    emptied: Option<u32>,
    born: Option<u32>,
) -> f64 {
    let mut s = hyper.delta[(x as usize, 0)];
    for y in 1..=stats.k_up() as u32 {
        let occupied = (stats.is_nonempty(y) && Some(y) != emptied) || Some(y) == born;
        if occupied {
            s += hyper.delta[(x as usize, y as usize)];
        }
    }
    s
}

#[inline]
fn row_normaliser(lg: Lg, prior_sum: f64, row_total: u64) -> f64 {
    if row_total == 0 {
        0.0
    } else if let Some(tab) = lg {
        tab.row_normaliser(prior_sum, row_total)
    } else {
        ln_gamma(prior_sum) - ln_gamma(prior_sum + row_total as f64)
    }
}

#[inline]
fn cell_term(lg: Lg, x: u32, y: u32, delta: f64, count: u64) -> f64 {
    if let Some(tab) = lg {
        return tab.cell_term(x, y, delta, count);
    }
    if count == 0 {
        0.0
    } else {
        ln_gamma(delta + count as f64) - ln_gamma(delta)
    }
}

fn transition_part(stats: &SufficientStats, hyper: &Hyperparameters, lg: Lg) -> f64 {
    let k = stats.k_up() as u32;
    let mut total = 0.0;
    for x in 0..=k {
        let row_total = stats.r_row_sum(x);
        if row_total == 0 {
            continue;
        }
        total += row_normaliser(lg, prior_row_sum(hyper, stats, x, None, None), row_total);
        for y in 0..=k {
            total += cell_term(lg, x, y, hyper.delta[(x as usize, y as usize)], stats.r(x, y));
        }
    }
    total
}

fn beta_part(stats: &SufficientStats, hyper: &Hyperparameters, lg: Lg) -> f64 {
    let k = stats.k_up() as u32;
    let mut total = 0.0;
    for h in 1..=k {
        for g in 1..=h {
            total += block_term(hyper, lg, g, h, stats.block(g, h));
        }
    }
    total
}

/// Full score from scratch.
pub fn score_full(stats: &SufficientStats, hyper: &Hyperparameters) -> Result<IclScore> {
    score_full_with(stats, hyper, None)
}

/// [`score_full`] with an optional lookup table.
pub fn score_full_with(stats: &SufficientStats, hyper: &Hyperparameters, lg: Lg) -> Result<IclScore> {
    hyper.check_covers(stats)?;
    let alpha = alpha_part(stats);
    Ok(IclScore {
        zero_mass: alpha.zero_mass,
        finite: alpha.finite + transition_part(stats, hyper, lg) + beta_part(stats, hyper, lg),
    })
}

/// Exact `log ICL` of the allocation summarised by `stats`.
pub fn log_icl_full(stats: &SufficientStats, hyper: &Hyperparameters) -> Result<IclValue> {
    Ok(IclValue {
        log_icl: score_full(stats, hyper)?.log_icl(),
    })
}

/// Everything about a single `(t, i)` that does not depend on the target
/// label: its neighbours' regime tallies, adjacent labels, and the beta
/// change of removing it from its current group.
#[derive(Debug, Clone, Default)]
pub struct MoveContext {
    pub t: usize,
    pub i: usize,
    pub current: u32,
    prev: Option<u32>,
    next: Option<u32>,
    tally: Vec<(u32, DyadCounts)>,
    removal_beta: f64,
}

impl MoveContext {
    pub fn new(
        stats: &SufficientStats,
        hyper: &Hyperparameters,
        lg: Lg,
        cube: &AdjacencyCube,
        z: &AllocationMatrix,
        t: usize,
        i: usize,
        scratch: &mut NodeTally,
    ) -> Self {
        let current = z.get(i, t);
        let tally = scratch.compute(cube, z, t, i).to_vec();
        let mut removal_beta = 0.0;
        for &(h, c) in &tally {
            let before = stats.block(current, h);
            removal_beta += block_term(hyper, lg, current, h, &before.sub(&c))
                - block_term(hyper, lg, current, h, before);
        }
        Self {
            t,
            i,
            current,
            prev: (t > 0).then(|| z.get(i, t - 1)),
            next: (t + 1 < z.n_frames()).then(|| z.get(i, t + 1)),
            tally,
            removal_beta,
        }
    }

    fn tally_for(&self, h: u32) -> Option<&DyadCounts> {
        self.tally
            .binary_search_by_key(&h, |e| e.0)
            .ok()
            .map(|k| &self.tally[k].1)
    }

    /// Score change of moving to `g`, against the statistics the context was
    /// built from.
    pub fn delta(&self, stats: &SufficientStats, hyper: &Hyperparameters, lg: Lg, g: u32) -> ScoreDelta {
        let g0 = self.current;
        if g == g0 {
            return ScoreDelta::default();
        }

        let mut beta = self.removal_beta;
        let own = self.tally_for(g).copied().unwrap_or_default();
        for &(h, c) in &self.tally {
            let mut base = *stats.block(g, h);
            if h == g0 {
                base = base.sub(&own);
            }
            beta += block_term(hyper, lg, g, h, &base.add(&c)) - block_term(hyper, lg, g, h, &base);
        }

        let alpha = self.alpha_delta(stats, g);
        ScoreDelta {
            zero_mass: alpha.zero_mass,
            finite: alpha.finite + beta + self.transition_delta(stats, hyper, lg, g),
        }
    }

    fn alpha_delta(&self, stats: &SufficientStats, g: u32) -> ScoreDelta {
        let g0 = self.current;
        let (n1, n_agg) = (stats.n1(), stats.n_agg());
        if stats.n_frames() < 2 {
            let m = n1.iter().filter(|&&c| c > 0).count() as i64;
            let m_new = m - (n1[g0 as usize] == 1) as i64 + (n1[g as usize] == 0) as i64;
            let n = stats.n_nodes() as f64;
            return ScoreDelta {
                zero_mass: 0,
                finite: -n * (m_new as f64).ln() + n * (m as f64).ln(),
            };
        }
        let total = (stats.n_nodes() * (stats.n_frames() - 1)) as u64;
        let first = self.t == 0;
        let mut d = ScoreDelta::default();
        for (label, step) in [(g0, -1i64), (g, 1i64)] {
            let (a, b) = (n1[label as usize], n_agg[label as usize]);
            let (a2, b2) = if first {
                ((a as i64 + step) as u64, b)
            } else {
                (a, (b as i64 + step) as u64)
            };
            let (z0, v0) = alpha_label_term(a, b, total);
            let (z1, v1) = alpha_label_term(a2, b2, total);
            d = d.add(ScoreDelta {
                zero_mass: z1 - z0,
                finite: v1 - v0,
            });
        }
        d
    }

    fn transition_delta(&self, stats: &SufficientStats, hyper: &Hyperparameters, lg: Lg, g: u32) -> f64 {
        let g0 = self.current;
        // (row, col, change)
        let mut changes: [(u32, u32, i64); 4] = [(0, 0, 0); 4];
        let mut n_changes = 0;
        let mut push = |r: u32, c: u32, d: i64| {
            for e in changes[..n_changes].iter_mut() {
                if e.0 == r && e.1 == c {
                    e.2 += d;
                    return;
                }
            }
            changes[n_changes] = (r, c, d);
            n_changes += 1;
        };
        if let Some(p) = self.prev {
            push(p, g0, -1);
            push(p, g, 1);
        }
        if let Some(nx) = self.next {
            push(g0, nx, -1);
            push(g, nx, 1);
        }
        let changes = &changes[..n_changes];

        let mut d = 0.0;
        for &(r, c, step) in changes {
            if step != 0 {
                let delta = hyper.delta[(r as usize, c as usize)];
                let before = stats.r(r, c);
                d += cell_term(lg, r, c, delta, (before as i64 + step) as u64) - cell_term(lg, r, c, delta, before);
            }
        }

        let emptied = (stats.occupancy()[g0 as usize] == 1).then_some(g0);
        let born = (stats.occupancy()[g as usize] == 0).then_some(g);
        let row_change = |x: u32| -> i64 {
            changes
                .iter()
                .filter(|e| e.0 == x)
                .map(|e| e.2)
                .sum()
        };
        let mut row_delta = |x: u32| {
            let before = stats.r_row_sum(x);
            let after = (before as i64 + row_change(x)) as u64;
            if before == 0 && after == 0 {
                return;
            }
            let s0 = prior_row_sum(hyper, stats, x, None, None);
            let s1 = if emptied.is_some() || born.is_some() {
                prior_row_sum(hyper, stats, x, emptied, born)
            } else {
                s0
            };
            if s0 == s1 && before == after {
                return;
            }
            d += row_normaliser(lg, s1, after) - row_normaliser(lg, s0, before);
        };
        if emptied.is_some() || born.is_some() {
            for x in 0..=stats.k_up() as u32 {
                row_delta(x);
            }
        } else {
            let mut rows: [u32; 4] = [u32::MAX; 4];
            for (k, e) in changes.iter().enumerate() {
                if !rows[..k].contains(&e.0) {
                    rows[k] = e.0;
                    row_delta(e.0);
                }
            }
        }
        d
    }
}

/// Score change of moving `(t, i)` to `g_new`, without mutating anything.
pub fn score_delta_move(
    stats: &SufficientStats,
    hyper: &Hyperparameters,
    cube: &AdjacencyCube,
    z: &AllocationMatrix,
    t: usize,
    i: usize,
    g_new: u32,
) -> Result<ScoreDelta> {
    hyper.check_covers(stats)?;
    check_move(z, t, i, g_new)?;
    let mut scratch = NodeTally::new(cube.n_nodes(), z.k_up());
    let ctx = MoveContext::new(stats, hyper, None, cube, z, t, i, &mut scratch);
    Ok(ctx.delta(stats, hyper, None, g_new))
}

/// `log ICL(after) - log ICL(before)` for moving `(t, i)` to `g_new`.
///
/// When the number of zero-mass groups changes the result is `±inf`; when
/// it stays positive on both sides the change of the finite remainder is
/// returned.
pub fn log_icl_delta_move(
    stats: &SufficientStats,
    hyper: &Hyperparameters,
    cube: &AdjacencyCube,
    z: &AllocationMatrix,
    t: usize,
    i: usize,
    g_new: u32,
) -> Result<f64> {
    Ok(score_delta_move(stats, hyper, cube, z, t, i, g_new)?.as_log_delta())
}

/// Score change of relabelling every `h` as `g`.
pub fn score_delta_merge(
    stats: &SufficientStats,
    hyper: &Hyperparameters,
    g: u32,
    h: u32,
) -> Result<ScoreDelta> {
    score_delta_merge_with(stats, hyper, None, g, h)
}

/// [`score_delta_merge`] with an optional lookup table.
pub fn score_delta_merge_with(
    stats: &SufficientStats,
    hyper: &Hyperparameters,
    lg: Lg,
    g: u32,
    h: u32,
) -> Result<ScoreDelta> {
    hyper.check_covers(stats)?;
    let k = stats.k_up() as u32;
    if g == h || g == 0 || h == 0 || g > k || h > k {
        return Err(Error::Argument(format!("cannot merge labels {g} and {h}")));
    }
    if !stats.is_nonempty(g) || !stats.is_nonempty(h) {
        return Err(Error::Argument(format!(
            "merge requires two nonempty groups, got {g} and {h}"
        )));
    }
    let merged = stats.merged(g, h)?;

    let mut beta = 0.0;
    for x in 1..=k {
        beta -= block_term(hyper, lg, g, x, stats.block(g, x));
        if x != g {
            beta -= block_term(hyper, lg, h, x, stats.block(h, x));
        }
        beta += block_term(hyper, lg, g, x, merged.block(g, x));
    }
    let alpha = alpha_part(&merged).delta_from(&alpha_part(stats));
    let transition = transition_part(&merged, hyper, lg) - transition_part(stats, hyper, lg);
    Ok(ScoreDelta {
        zero_mass: alpha.zero_mass,
        finite: alpha.finite + transition + beta,
    })
}

/// `log ICL(after) - log ICL(before)` for merging group `h` into `g`.
pub fn log_icl_delta_merge(
    stats: &SufficientStats,
    hyper: &Hyperparameters,
    g: u32,
    h: u32,
) -> Result<f64> {
    Ok(score_delta_merge(stats, hyper, g, h)?.as_log_delta())
}
