//! Partition agreement and post-fit summaries.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::suffstats::{AllocationMatrix, SufficientStats};

/// Labels of the active nodes of one frame, in node order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionFrame(pub Vec<u32>);

impl PartitionFrame {
    /// Column `t` of `z` with inactive entries dropped.
    pub fn from_allocation(z: &AllocationMatrix, t: usize) -> Self {
        Self(z.frame(t).iter().copied().filter(|&g| g != 0).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_blocks(&self) -> usize {
        let mut labels = self.0.clone();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalised mutual information `I(a; b) / sqrt(H(a) H(b))`.
///
/// Zero when either partition has a single block.
pub fn nmi(a: &PartitionFrame, b: &PartitionFrame) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "partitions have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Argument("partitions are empty".into()));
    }
    let n = a.len() as f64;
    let mut joint: HashMap<(u32, u32), usize> = HashMap::new();
    let mut ca: HashMap<u32, usize> = HashMap::new();
    let mut cb: HashMap<u32, usize> = HashMap::new();
    for (&x, &y) in a.0.iter().zip(&b.0) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    if ca.len() < 2 || cb.len() < 2 {
        return Ok(0.0);
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    let mut mi = 0.0;
    for (&(x, y), &c) in &joint {
        let pxy = c as f64 / n;
        let px = ca[&x] as f64 / n;
        let py = cb[&y] as f64 / n;
        mi += pxy * (pxy / (px * py)).ln();
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Frame-wise NMI over active nodes; `None` for frames with no active node.
pub fn nmi_per_frame(z_a: &AllocationMatrix, z_b: &AllocationMatrix) -> Result<Vec<Option<f64>>> {
    if z_a.n_nodes() != z_b.n_nodes() || z_a.n_frames() != z_b.n_frames() {
        return Err(Error::Argument(format!(
            "allocations are {}x{} and {}x{}",
            z_a.n_nodes(),
            z_a.n_frames(),
            z_b.n_nodes(),
            z_b.n_frames()
        )));
    }
    (0..z_a.n_frames())
        .map(|t| {
            for (i, (&a, &b)) in z_a.frame(t).iter().zip(z_b.frame(t)).enumerate() {
                if (a == 0) != (b == 0) {
                    return Err(Error::Argument(format!(
                        "activity differs for node {i} at frame {t}"
                    )));
                }
            }
            let (pa, pb) = (PartitionFrame::from_allocation(z_a, t), PartitionFrame::from_allocation(z_b, t));
            if pa.is_empty() {
                Ok(None)
            } else {
                nmi(&pa, &pb).map(Some)
            }
        })
        .collect()
}

/// Number of nonempty groups in each frame.
pub fn groups_per_frame(z: &AllocationMatrix) -> Vec<usize> {
    (0..z.n_frames())
        .map(|t| PartitionFrame::from_allocation(z, t).n_blocks())
        .collect()
}

/// Median of the defined values, if any.
pub fn median(values: &[Option<f64>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Ratio estimates of the connection and transition probabilities.
///
/// `theta_hat`, `p_hat` and `q_hat` are `k_up x k_up` indexed by
/// `label - 1`; `pi_hat` is `(k_up+1) x (k_up+1)`. Entries with a zero
/// denominator are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginEstimates {
    pub theta_hat: Matrix<Option<f64>>,
    pub p_hat: Matrix<Option<f64>>,
    pub q_hat: Matrix<Option<f64>>,
    pub pi_hat: Matrix<Option<f64>>,
}

fn ratio(num: u64, other: u64) -> Option<f64> {
    let den = num + other;
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn plugin_estimates(stats: &SufficientStats) -> PluginEstimates {
    let k = stats.k_up();
    let mut theta_hat = Matrix::filled(k, k, None);
    let mut p_hat = Matrix::filled(k, k, None);
    let mut q_hat = Matrix::filled(k, k, None);
    for g in 1..=k as u32 {
        for h in 1..=k as u32 {
            let b = stats.block(g, h);
            let at = (g as usize - 1, h as usize - 1);
            theta_hat[at] = ratio(b.eta, b.zeta);
            p_hat[at] = ratio(b.u01, b.u00);
            q_hat[at] = ratio(b.u10, b.u11);
        }
    }
    let mut pi_hat = Matrix::filled(k + 1, k + 1, None);
    for g in 0..=k as u32 {
        let total = stats.r_row_sum(g);
        if total == 0 {
            continue;
        }
        for h in 0..=k as u32 {
            pi_hat[(g as usize, h as usize)] = Some(stats.r(g, h) as f64 / total as f64);
        }
    }
    PluginEstimates {
        theta_hat,
        p_hat,
        q_hat,
        pi_hat,
    }
}

/// Group sizes per frame: `(k_up+1) x T`, label `0` in row `0`.
pub fn group_size_trajectories(z: &AllocationMatrix) -> Matrix<u64> {
    let mut m = Matrix::filled(z.k_up() + 1, z.n_frames(), 0u64);
    for t in 0..z.n_frames() {
        for &g in z.frame(t) {
            m[(g as usize, t)] += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcube::{AdjacencyCube, NodeActivity};
    use crate::suffstats::compute_stats;

    fn pf(v: &[u32]) -> PartitionFrame {
        PartitionFrame(v.to_vec())
    }

    /// Contingency-table oracle with explicit double loops.
    fn nmi_oracle(a: &[u32], b: &[u32]) -> f64 {
        let la: Vec<u32> = {
            let mut v = a.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        let lb: Vec<u32> = {
            let mut v = b.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        };
        let n = a.len() as f64;
        let mut table = vec![vec![0f64; lb.len()]; la.len()];
        for k in 0..a.len() {
            let x = la.iter().position(|&l| l == a[k]).unwrap();
            let y = lb.iter().position(|&l| l == b[k]).unwrap();
            table[x][y] += 1.0;
        }
        let row: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<f64> = (0..lb.len()).map(|y| table.iter().map(|r| r[y]).sum()).collect();
        let h = |m: &[f64]| -> f64 { m.iter().map(|&c| -(c / n) * (c / n).ln()).sum() };
        let mut mi = 0.0;
        for x in 0..la.len() {
            for y in 0..lb.len() {
                if table[x][y] > 0.0 {
                    mi += table[x][y] / n * (n * table[x][y] / (row[x] * col[y])).ln();
                }
            }
        }
        mi / (h(&row) * h(&col)).sqrt()
    }

    #[test]
    fn nmi_basic_values() {
        assert!((nmi(&pf(&[1, 1, 2, 2]), &pf(&[2, 2, 1, 1])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&pf(&[1, 1, 1, 1]), &pf(&[1, 2, 1, 2])).unwrap(), 0.0);
        assert!(nmi(&pf(&[1, 1, 2, 2]), &pf(&[1, 2, 1, 2])).unwrap().abs() < 1e-12);
        let v = nmi(&pf(&[1, 1, 2, 2]), &pf(&[1, 1, 2, 3])).unwrap();
        // I = ln 2, H_a = ln 2, H_b = 1.5 ln 2
        assert!((v - (1.0f64 / 1.5).sqrt()).abs() < 1e-12);
        assert!((v - nmi_oracle(&[1, 1, 2, 2], &[1, 1, 2, 3])).abs() < 1e-12);
        assert!(nmi(&pf(&[1, 2]), &pf(&[1])).is_err());
    }

    #[test]
    fn per_frame_with_inactive_frame() {
        let z = AllocationMatrix::from_rows(&[vec![1, 0], vec![2, 0], vec![2, 0]], 2).unwrap();
        let v = nmi_per_frame(&z, &z).unwrap();
        assert_eq!(v[0], Some(1.0));
        assert_eq!(v[1], None);
        let other = AllocationMatrix::from_rows(&[vec![1, 1], vec![2, 0], vec![2, 0]], 2).unwrap();
        assert!(nmi_per_frame(&z, &other).is_err());
    }

    #[test]
    fn plugin_ratios() {
        let cube = AdjacencyCube::from_edges(
            3,
            vec![vec![(0, 1)], vec![(0, 1), (1, 2)]],
            Some(NodeActivity::all_active(3, 2)),
        )
        .unwrap();
        let z = AllocationMatrix::from_rows(&[vec![1, 1], vec![1, 2], vec![2, 2]], 2).unwrap();
        let est = plugin_estimates(&compute_stats(&cube, &z).unwrap());
        assert_eq!(est.theta_hat[(0, 0)], Some(1.0));
        assert_eq!(est.theta_hat[(0, 1)], Some(0.0));
        assert_eq!(est.theta_hat[(1, 1)], None);
        assert_eq!(est.p_hat[(0, 1)], Some(0.0));
        assert_eq!(est.q_hat[(0, 1)], Some(0.0));
        assert_eq!(est.p_hat[(1, 1)], Some(1.0));
        assert_eq!(est.pi_hat[(1, 1)], Some(0.5));
        assert_eq!(est.pi_hat[(0, 0)], None);
    }

    #[test]
    fn trajectories_tally() {
        let z = AllocationMatrix::from_rows(&[vec![1, 0], vec![2, 2], vec![0, 2]], 2).unwrap();
        let m = group_size_trajectories(&z);
        assert_eq!(m.to_rows(), vec![vec![1, 1], vec![1, 0], vec![1, 2]]);
        let inactive = AllocationMatrix::zeros(4, 3, 2);
        assert_eq!(group_size_trajectories(&inactive).row(0), &[4, 4, 4]);
    }

    #[test]
    fn median_skips_undefined() {
        assert_eq!(median(&[Some(1.0), None, Some(3.0), Some(2.0)]), Some(2.0));
        assert_eq!(median(&[None]), None);
    }
}
