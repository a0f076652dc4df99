//! Simulation from the Bayesian hierarchy.
//!
//! Parameters are either drawn from the conjugate priors or supplied. Labels
//! follow independent Markov chains over `{0, ..., K}` (state `0` is
//! inactivity) and edges follow the three-regime transition rule.

use rand::Rng as _;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::icl::Hyperparameters;
use crate::matrix::Matrix;
use crate::netcube::{AdjacencyCube, NodeActivity};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::suffstats::{block_index, AllocationMatrix, DyadCounts, Regime};

/// Generative parameters for `k` groups.
///
/// `theta`, `p` and `q` are `k x k` and indexed by `label - 1`; `pi` is
/// `(k+1) x (k+1)` over states `0..=k`; `alpha` has length `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub theta: Matrix,
    pub p: Matrix,
    pub q: Matrix,
    pub pi: Matrix,
    pub alpha: Vec<f64>,
}

impl ModelParameters {
    pub fn k(&self) -> usize {
        self.theta.rows()
    }

    #[inline]
    pub fn theta(&self, g: u32, h: u32) -> f64 {
        self.theta[(g as usize - 1, h as usize - 1)]
    }

    #[inline]
    pub fn p(&self, g: u32, h: u32) -> f64 {
        self.p[(g as usize - 1, h as usize - 1)]
    }

    #[inline]
    pub fn q(&self, g: u32, h: u32) -> f64 {
        self.q[(g as usize - 1, h as usize - 1)]
    }

    /// Checks shapes, symmetry, probability ranges and row sums. Degenerate
    /// probabilities `0` and `1` are allowed.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::Argument("parameters need at least one group".into()));
        }
        for (name, m) in [("theta", &self.theta), ("p", &self.p), ("q", &self.q)] {
            if m.rows() != k || m.cols() != k {
                return Err(Error::Argument(format!("{name} must be {k}x{k}")));
            }
            if !m.is_symmetric() {
                return Err(Error::Argument(format!("{name} must be symmetric")));
            }
            if m.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Argument(format!("{name} entries must lie in [0, 1]")));
            }
        }
        if self.pi.rows() != k + 1 || self.pi.cols() != k + 1 {
            return Err(Error::Argument(format!("pi must be {}x{}", k + 1, k + 1)));
        }
        for g in 0..=k {
            check_distribution(self.pi.row(g), &format!("pi row {g}"))?;
        }
        if self.alpha.len() != k + 1 {
            return Err(Error::Argument(format!("alpha must have length {}", k + 1)));
        }
        check_distribution(&self.alpha, "alpha")
    }

    /// The fixed three-group setting with strong edge persistence: assortative
    /// `theta`, group-specific creation and destruction rates, and labels that
    /// stay put with probability `stay` or jump uniformly to another group.
    /// No node is ever inactive.
    pub fn persistence_benchmark(stay: f64) -> Result<Self> {
        let m = |rows: [[f64; 3]; 3]| Matrix::from_rows(rows.iter().map(|r| r.to_vec()).collect());
        let theta = m([[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9]]).unwrap();
        let p = m([[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.1]]).unwrap();
        let q = m([[0.1, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9]]).unwrap();
        let pi = sticky_transitions(3, stay)?;
        let alpha = stationary_distribution(&pi);
        let params = Self { theta, p, q, pi, alpha };
        params.validate()?;
        Ok(params)
    }
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Argument(format!("{what} has entries outside [0, 1]")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Transitions over `0..=k` that never visit the inactive state: stay with
/// probability `stay`, otherwise move uniformly to one of the other `k - 1`
/// groups. State `0` leaves uniformly to the groups.
pub fn sticky_transitions(k: usize, stay: f64) -> Result<Matrix> {
    if k == 0 || !(0.0..=1.0).contains(&stay) {
        return Err(Error::Argument(format!("invalid k={k} or stay={stay}")));
    }
    let mut pi = Matrix::filled(k + 1, k + 1, 0.0);
    for h in 1..=k {
        pi[(0, h)] = 1.0 / k as f64;
    }
    for g in 1..=k {
        if k == 1 {
            pi[(g, g)] = 1.0;
            continue;
        }
        for h in 1..=k {
            pi[(g, h)] = if g == h { stay } else { (1.0 - stay) / (k - 1) as f64 };
        }
    }
    Ok(pi)
}

/// Removes the inactive state: zero column 0 (renormalising rows) and
/// zero `alpha_0`. Row 0 becomes uniform over the groups.
pub fn without_inactivity(params: &ModelParameters) -> ModelParameters {
    let k = params.k();
    let mut pi = params.pi.clone();
    for g in 0..=k {
        let rest: f64 = (1..=k).map(|h| pi[(g, h)]).sum();
        pi[(g, 0)] = 0.0;
        for h in 1..=k {
            pi[(g, h)] = if g == 0 || rest <= 0.0 {
                1.0 / k as f64
            } else {
                pi[(g, h)] / rest
            };
        }
    }
    let alpha = stationary_distribution(&pi);
    ModelParameters {
        pi,
        alpha,
        ..params.clone()
    }
}

/// Stationary distribution of a row-stochastic matrix by power iteration
/// on the lazy chain `(I + pi) / 2`, started from the uniform vector.
pub fn stationary_distribution(pi: &Matrix) -> Vec<f64> {
    let n = pi.rows();
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..100_000 {
        for (h, x) in next.iter_mut().enumerate() {
            *x = 0.5 * v[h];
        }
        for g in 0..n {
            let w = 0.5 * v[g];
            for h in 0..n {
                next[h] += w * pi[(g, h)];
            }
        }
        let s: f64 = next.iter().sum();
        let mut diff: f64 = 0.0;
        for h in 0..n {
            let x = next[h] / s;
            diff = diff.max((x - v[h]).abs());
            v[h] = x;
        }
        if diff < 1e-14 {
            break;
        }
    }
    v
}

fn beta_draw(rng: &mut Rng, a: f64, b: f64) -> Result<f64> {
    let d = Beta::new(a, b).map_err(|e| Error::Argument(format!("Beta({a}, {b}): {e}")))?;
    Ok(d.sample(rng))
}

/// Draws parameters for `k` groups from the priors in `hyper`. `alpha` is
/// the stationary distribution of the drawn `pi`.
pub fn sample_params(k: usize, hyper: &Hyperparameters, seed: u64) -> Result<ModelParameters> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    hyper.validate()?;
    if hyper.k_up() < k {
        return Err(Error::Argument(format!(
            "hyperparameters cover {} groups, need {k}",
            hyper.k_up()
        )));
    }
    let mut rng = rng_from_seed(seed);

    let mut pi = Matrix::filled(k + 1, k + 1, 0.0);
    for g in 0..=k {
        loop {
            let mut total = 0.0;
            for h in 0..=k {
                let shape = hyper.delta[(g, h)];
                let d = Gamma::new(shape, 1.0)
                    .map_err(|e| Error::Argument(format!("Gamma({shape}): {e}")))?;
                let x = d.sample(&mut rng);
                pi[(g, h)] = x;
                total += x;
            }
            if total > 0.0 && total.is_finite() {
                for h in 0..=k {
                    pi[(g, h)] /= total;
                }
                break;
            }
        }
    }

    let mut theta = Matrix::filled(k, k, 0.0);
    let mut p = Matrix::filled(k, k, 0.0);
    let mut q = Matrix::filled(k, k, 0.0);
    for g in 1..=k {
        for h in g..=k {
            let at = (g, h);
            let draws = [
                beta_draw(&mut rng, hyper.eta0[at], hyper.zeta0[at])?,
                beta_draw(&mut rng, hyper.a_p[at], hyper.b_p[at])?,
                beta_draw(&mut rng, hyper.a_q[at], hyper.b_q[at])?,
            ];
            for (m, v) in [&mut theta, &mut p, &mut q].into_iter().zip(draws) {
                m[(g - 1, h - 1)] = v;
                m[(h - 1, g - 1)] = v;
            }
        }
    }
    let alpha = stationary_distribution(&pi);
    Ok(ModelParameters { theta, p, q, pi, alpha })
}

fn categorical(rng: &mut Rng, probs: &[f64]) -> u32 {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k as u32;
            }
        }
    }
    last as u32
}

/// Independent label chains: `z[i, 1] ~ alpha`, `z[i, t] ~ pi[z[i, t-1], .]`.
pub fn sample_allocations(
    n_nodes: usize,
    n_frames: usize,
    params: &ModelParameters,
    seed: u64,
) -> Result<AllocationMatrix> {
    params.validate()?;
    if n_nodes == 0 || n_frames == 0 {
        return Err(Error::Argument("need at least one node and one frame".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut z = AllocationMatrix::zeros(n_nodes, n_frames, params.k());
    for i in 0..n_nodes {
        let mut g = categorical(&mut rng, &params.alpha);
        z.set(i, 0, g);
        for t in 1..n_frames {
            g = categorical(&mut rng, params.pi.row(g as usize));
            z.set(i, t, g);
        }
    }
    Ok(z)
}

/// Per-block regime counts recorded while drawing edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimeTally {
    k: usize,
    blocks: Vec<DyadCounts>,
}

impl RegimeTally {
    fn new(k: usize) -> Self {
        Self {
            k,
            blocks: vec![DyadCounts::default(); k * (k + 1) / 2],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn block(&self, g: u32, h: u32) -> &DyadCounts {
        &self.blocks[block_index(g, h)]
    }

    pub fn total(&self) -> DyadCounts {
        self.blocks
            .iter()
            .fold(DyadCounts::default(), |acc, b| acc.add(b))
    }
}

/// Draws `X` given the labels. The activity mask is `z != 0`.
pub fn sample_edges(
    z: &AllocationMatrix,
    params: &ModelParameters,
    seed: u64,
) -> Result<(AdjacencyCube, RegimeTally)> {
    params.validate()?;
    if z.k_up() > params.k() {
        return Err(Error::Argument(format!(
            "allocation uses up to {} labels but parameters have {}",
            z.k_up(),
            params.k()
        )));
    }
    let (n, n_frames) = (z.n_nodes(), z.n_frames());
    let mut rng = rng_from_seed(seed);
    let mut tally = RegimeTally::new(params.k());
    let mut activity = NodeActivity::inactive(n, n_frames);
    let mut prev_x = vec![false; n * n];
    let mut cur_x = vec![false; n * n];
    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let active: Vec<usize> = (0..n).filter(|&i| z.get(i, t) != 0).collect();
        for &i in &active {
            activity.set(i, t, true);
        }
        cur_x.iter_mut().for_each(|x| *x = false);
        let mut edges = Vec::new();
        for (a, &i) in active.iter().enumerate() {
            let g = z.get(i, t);
            for &j in &active[a + 1..] {
                let h = z.get(j, t);
                let prev_observed = t > 0 && z.get(i, t - 1) != 0 && z.get(j, t - 1) != 0;
                let (regime, prob) = if !prev_observed {
                    (Regime::Fresh, params.theta(g, h))
                } else if prev_x[i * n + j] {
                    (Regime::Persistence, 1.0 - params.q(g, h))
                } else {
                    (Regime::Creation, params.p(g, h))
                };
                let edge = rng.random::<f64>() < prob;
                tally.blocks[block_index(g, h)].record(regime, edge);
                if edge {
                    cur_x[i * n + j] = true;
                    edges.push((i, j));
                }
            }
        }
        std::mem::swap(&mut prev_x, &mut cur_x);
        frames.push(edges);
    }
    let cube = AdjacencyCube::from_edges(n, frames, Some(activity))?;
    Ok((cube, tally))
}

/// Where simulation parameters come from.
#[derive(Debug, Clone)]
pub enum ParamSource {
    /// Draw `k` groups' parameters from the priors.
    Prior { k: usize, hyper: Hyperparameters },
    Fixed(ModelParameters),
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub cube: AdjacencyCube,
    pub z_true: AllocationMatrix,
    pub params: ModelParameters,
    pub tally: RegimeTally,
}

/// Parameters, then labels, then edges, each from its own derived seed.
pub fn simulate(n_nodes: usize, n_frames: usize, source: &ParamSource, seed: u64) -> Result<SimOutput> {
    let params = match source {
        ParamSource::Prior { k, hyper } => sample_params(*k, hyper, derive_seed(seed, 0))?,
        ParamSource::Fixed(p) => {
            p.validate()?;
            p.clone()
        }
    };
    let z_true = sample_allocations(n_nodes, n_frames, &params, derive_seed(seed, 1))?;
    let (cube, tally) = sample_edges(&z_true, &params, derive_seed(seed, 2))?;
    Ok(SimOutput {
        cube,
        z_true,
        params,
        tally,
    })
}
