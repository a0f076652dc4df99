//! Shared test helpers: a brute-force log-ICL evaluated from dense
//! `(Z, X, Y)` and generators of small random instances.

#![allow(dead_code)]

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use sbtm::icl::{HyperScalars, Hyperparameters};
use sbtm::matrix::Matrix;
use sbtm::netcube::{AdjacencyCube, NodeActivity};
use sbtm::rng::{rng_from_seed, Rng as ChaRng};
use sbtm::suffstats::AllocationMatrix;

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// log ICL computed term by term from dense arrays, with no shared code
/// beyond `ln_gamma`. `z[i][t]`, `x[t][i][j]`, `y[t][i][j]`.
pub fn naive_log_icl(z: &[Vec<u32>], x: &[Vec<Vec<bool>>], y: &[Vec<Vec<bool>>], k_up: usize, hyper: &Hyperparameters) -> f64 {
    let n = z.len();
    let t_max = z[0].len();
    let states = k_up + 1;

    let used: Vec<bool> = (0..states)
        .map(|g| g == 0 || z.iter().any(|row| row.iter().any(|&l| l as usize == g)))
        .collect();

    // initial states
    let mut total = 0.0;
    if t_max == 1 {
        let m = (0..states).filter(|&g| z.iter().any(|row| row[0] as usize == g)).count();
        total -= n as f64 * (m as f64).ln();
    } else {
        let denom = (n * (t_max - 1)) as f64;
        for row in z {
            let g = row[0];
            let c = z
                .iter()
                .map(|r| r[1..].iter().filter(|&&l| l == g).count())
                .sum::<usize>();
            total += (c as f64 / denom).ln();
        }
    }

    // transitions, Dirichlet over used states
    let mut r = vec![vec![0u64; states]; states];
    for row in z {
        for t in 1..t_max {
            r[row[t - 1] as usize][row[t] as usize] += 1;
        }
    }
    for a in 0..states {
        let n_row: u64 = r[a].iter().sum();
        if !used[a] || n_row == 0 {
            continue;
        }
        let mut prior_sum = 0.0;
        for b in 0..states {
            if used[b] {
                let d = hyper.delta[(a, b)];
                prior_sum += d;
                total += ln_gamma(d + r[a][b] as f64) - ln_gamma(d);
            }
        }
        total += ln_gamma(prior_sum) - ln_gamma(prior_sum + n_row as f64);
    }

    // edges: per unordered label pair, three binomial regimes
    let mut counts = vec![vec![[0u64; 6]; states]; states];
    for t in 0..t_max {
        for i in 0..n {
            for j in i + 1..n {
                if !y[t][i][j] {
                    continue;
                }
                let (g, h) = (z[i][t].min(z[j][t]) as usize, z[i][t].max(z[j][t]) as usize);
                let slot = if t == 0 || !y[t - 1][i][j] {
                    0
                } else if !x[t - 1][i][j] {
                    2
                } else {
                    4
                };
                // slot+0 counts "successes" of each Beta: edge for fresh and
                // creation, no edge for persistence
                let success = if slot == 4 { !x[t][i][j] } else { x[t][i][j] };
                counts[g][h][slot + usize::from(!success)] += 1;
            }
        }
    }
    for g in 1..states {
        for h in g..states {
            let c = counts[g][h];
            let pairs = [
                (hyper.eta0[(g, h)], hyper.zeta0[(g, h)], c[0], c[1]),
                (hyper.a_p[(g, h)], hyper.b_p[(g, h)], c[2], c[3]),
                (hyper.a_q[(g, h)], hyper.b_q[(g, h)], c[4], c[5]),
            ];
            for (a, b, s, f) in pairs {
                total += ln_beta(a + s as f64, b + f as f64) - ln_beta(a, b);
            }
        }
    }
    total
}

/// Dense `(x, y)` of a cube in the layout taken by [`naive_log_icl`].
pub fn dense_xy(cube: &AdjacencyCube) -> (Vec<Vec<Vec<bool>>>, Vec<Vec<Vec<bool>>>) {
    let n = cube.n_nodes();
    let d = cube.to_dense();
    let grid = |f: &dyn Fn(usize, usize, usize) -> bool| -> Vec<Vec<Vec<bool>>> {
        (0..cube.n_frames())
            .map(|t| (0..n).map(|i| (0..n).map(|j| f(i, j, t)).collect()).collect())
            .collect()
    };
    (grid(&|i, j, t| d.x(i, j, t)), grid(&|i, j, t| d.y(i, j, t)))
}

pub fn naive_for(cube: &AdjacencyCube, z: &AllocationMatrix, hyper: &Hyperparameters) -> f64 {
    let (x, y) = dense_xy(cube);
    naive_log_icl(&z.to_rows(), &x, &y, z.k_up(), hyper)
}

/// Random cube with independent activity (probability `p_active`) and edges
/// (probability `p_edge` among jointly active pairs).
pub fn random_cube(rng: &mut ChaRng, n: usize, t: usize, p_active: f64, p_edge: f64) -> AdjacencyCube {
    let mut activity = NodeActivity::inactive(n, t);
    for f in 0..t {
        for i in 0..n {
            activity.set(i, f, rng.random::<f64>() < p_active);
        }
    }
    let frames = (0..t)
        .map(|f| {
            let mut e = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if activity.is_active(i, f) && activity.is_active(j, f) && rng.random::<f64>() < p_edge {
                        e.push((i, j));
                    }
                }
            }
            e
        })
        .collect();
    AdjacencyCube::from_edges(n, frames, Some(activity)).unwrap()
}

/// Uniform labels in `1..=k_up` on active entries.
pub fn random_allocation(rng: &mut ChaRng, cube: &AdjacencyCube, k_up: usize) -> AllocationMatrix {
    let mut z = AllocationMatrix::zeros(cube.n_nodes(), cube.n_frames(), k_up);
    for t in 0..cube.n_frames() {
        for &i in cube.active_nodes(t) {
            z.set(i as usize, t, rng.random_range(1..=k_up as u32));
        }
    }
    z
}

/// Hyperparameters with every entry drawn from `[0.2, 3)`, Beta families
/// symmetric.
pub fn random_hyper(rng: &mut ChaRng, k_up: usize) -> Hyperparameters {
    let mut h = Hyperparameters::from_scalars(k_up, HyperScalars::default());
    let s = k_up + 1;
    let mut draw = |m: &mut Matrix, symmetric: bool| {
        for a in 0..s {
            for b in 0..s {
                if symmetric && b < a {
                    m[(a, b)] = m[(b, a)];
                } else {
                    m[(a, b)] = 0.2 + 2.8 * rng.random::<f64>();
                }
            }
        }
    };
    draw(&mut h.delta, false);
    draw(&mut h.eta0, true);
    draw(&mut h.zeta0, true);
    draw(&mut h.a_p, true);
    draw(&mut h.b_p, true);
    draw(&mut h.a_q, true);
    draw(&mut h.b_q, true);
    h
}

pub fn rng(seed: u64) -> ChaRng {
    rng_from_seed(seed)
}

/// Every allocation of an all-active `n x t` cube with labels `1..=k`,
/// as row vectors.
pub fn all_allocations(n: usize, t: usize, k: usize) -> Vec<Vec<Vec<u32>>> {
    let cells = n * t;
    let total = k.pow(cells as u32);
    (0..total)
        .map(|mut code| {
            let mut rows = vec![vec![0u32; t]; n];
            for c in 0..cells {
                rows[c / t][c % t] = (code % k) as u32 + 1;
                code /= k;
            }
            rows
        })
        .collect()
}

/// Is `v` within `tol` of some value in `values`?
pub fn close_to_any(v: f64, values: &[f64], tol: f64) -> bool {
    values.iter().any(|&w| (v == w) || (v - w).abs() <= tol)
}
