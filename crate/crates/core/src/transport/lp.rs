use alloc::vec::Vec;

use super::TransportResult;
use crate::error::{Error, Result};
use crate::grid::{same_grid, Density};

/// Largest total support (source plus target atoms) accepted by
/// [`brute_force_ot`].
pub const LP_SUPPORT_LIMIT: usize = 64;

const ZERO: f64 = 1e-15;

/// Exact discrete optimal transport between the cell-centre atoms of two
/// small densities, by successive shortest augmenting paths on the complete
/// bipartite residual graph (Bellman–Ford, so negative reduced costs are
/// fine).
///
/// Intended as a test oracle.
pub fn brute_force_ot(rho: &Density, mu: &Density) -> Result<TransportResult> {
    same_grid(rho.grid(), mu.grid())?;
    let g = rho.grid();
    let src: Vec<(usize, f64)> = rho
        .cell_masses()
        .into_iter()
        .enumerate()
        .filter(|(_, m)| *m > 0.0)
        .collect();
    let dst: Vec<(usize, f64)> = mu
        .cell_masses()
        .into_iter()
        .enumerate()
        .filter(|(_, m)| *m > 0.0)
        .collect();
    let size = src.len() + dst.len();
    if size > LP_SUPPORT_LIMIT {
        return Err(Error::SizeExceeded {
            size,
            limit: LP_SUPPORT_LIMIT,
        });
    }
    let (m, n) = (src.len(), dst.len());
    let cost = |i: usize, j: usize| {
        let a = g.center(src[i].0);
        let b = g.center(dst[j].0);
        (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])
    };
    let mut supply: Vec<f64> = src.iter().map(|s| s.1).collect();
    let mut demand: Vec<f64> = dst.iter().map(|d| d.1).collect();
    let mut flow = alloc::vec![0.0; m * n];
    let mut iterations = 0;

    // nodes: sources 0..m, sinks m..m+n
    loop {
        let left: f64 = supply.iter().sum::<f64>().min(demand.iter().sum());
        if left <= ZERO {
            break;
        }
        iterations += 1;
        let nodes = m + n;
        let mut dist = alloc::vec![f64::INFINITY; nodes];
        let mut pred = alloc::vec![usize::MAX; nodes];
        for i in 0..m {
            if supply[i] > ZERO {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..m {
                for j in 0..n {
                    let c = cost(i, j);
                    if dist[i] + c < dist[m + j] - 1e-14 {
                        dist[m + j] = dist[i] + c;
                        pred[m + j] = i;
                        changed = true;
                    }
                    if flow[i * n + j] > ZERO && dist[m + j] - c < dist[i] - 1e-14 {
                        dist[i] = dist[m + j] - c;
                        pred[i] = m + j;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let sink = (0..n)
            .filter(|&j| demand[j] > ZERO && dist[m + j].is_finite())
            .min_by(|&a, &b| dist[m + a].total_cmp(&dist[m + b]));
        let Some(sink) = sink else {
            return Err(Error::NoConvergence {
                solver: "transport LP",
                iterations,
                residual: left,
            });
        };
        // trace the path back to a source and find the bottleneck
        let mut path = Vec::new();
        let mut v = m + sink;
        let mut bottleneck = demand[sink];
        while pred[v] != usize::MAX {
            let u = pred[v];
            path.push((u, v));
            if u >= m {
                // backward edge sink u → source v
                bottleneck = bottleneck.min(flow[v * n + (u - m)]);
            }
            v = u;
            if path.len() > 2 * nodes {
                return Err(Error::NoConvergence {
                    solver: "transport LP",
                    iterations,
                    residual: left,
                });
            }
        }
        bottleneck = bottleneck.min(supply[v]);
        for &(u, w) in &path {
            if u < m {
                flow[u * n + (w - m)] += bottleneck;
            } else {
                flow[w * n + (u - m)] -= bottleneck;
            }
        }
        supply[v] -= bottleneck;
        demand[sink] -= bottleneck;
        if iterations > 100 * nodes * nodes {
            return Err(Error::NoConvergence {
                solver: "transport LP",
                iterations,
                residual: left,
            });
        }
    }
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            total += flow[i * n + j].max(0.0) * cost(i, j);
        }
    }
    Ok(TransportResult {
        cost: total,
        map: None,
        potentials: None,
        iterations,
        residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::transport::w2_atomic_1d;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_to_point() {
        let g = Grid::new_1d(0.0, 1.0, 10).unwrap();
        let a = Density::point_mass(g, 1).unwrap();
        let b = Density::point_mass(g, 7).unwrap();
        let d = g.center_1d(0, 7) - g.center_1d(0, 1);
        assert!((brute_force_ot(&a, &b).unwrap().cost - d * d).abs() < 1e-14);
        assert!(brute_force_ot(&a, &a).unwrap().cost.abs() < 1e-15);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return alloc::vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn three_cell_instance_matches_enumeration() {
        // equal masses on 3 + 3 atoms: the optimum is a permutation
        let g = Grid::new_2d([0.0, 0.0], [3.0, 3.0], [3, 3]).unwrap();
        let src = [0usize, 4, 8];
        let dst = [2usize, 3, 7];
        let mut a = alloc::vec![0.0; 9];
        let mut b = alloc::vec![0.0; 9];
        src.iter().for_each(|&c| a[c] = 1.0);
        dst.iter().for_each(|&c| b[c] = 1.0);
        let a = Density::normalized(g, a).unwrap();
        let b = Density::normalized(g, b).unwrap();
        let best = permutations(3)
            .iter()
            .map(|p| {
                (0..3)
                    .map(|k| {
                        let x = g.center(src[k]);
                        let y = g.center(dst[p[k]]);
                        (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)
                    })
                    .sum::<f64>()
                    / 3.0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute_force_ot(&a, &b).unwrap().cost - best).abs() < 1e-12);
    }

    /// Vertex enumeration: every basic feasible solution of a transportation
    /// problem is supported on at most m + n − 1 cells; try all supports.
    fn vertex_enumeration(a: &[f64], b: &[f64], c: &dyn Fn(usize, usize) -> f64) -> f64 {
        let (m, n) = (a.len(), b.len());
        let k = m + n - 1;
        let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let mut best = f64::INFINITY;
        let total = cells.len();
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            // solve the basis by peeling rows/columns with a single free cell
            let mut ra = a.to_vec();
            let mut rb = b.to_vec();
            let mut x = alloc::vec![f64::NAN; k];
            let mut done = alloc::vec![false; k];
            let mut progress = true;
            while progress {
                progress = false;
                for i in 0..m {
                    let free: Vec<usize> = (0..k).filter(|&t| !done[t] && cells[pick[t]].0 == i).collect();
                    if free.len() == 1 {
                        let t = free[0];
                        x[t] = ra[i];
                        done[t] = true;
                        ra[i] = 0.0;
                        rb[cells[pick[t]].1] -= x[t];
                        progress = true;
                    }
                }
                for j in 0..n {
                    let free: Vec<usize> = (0..k).filter(|&t| !done[t] && cells[pick[t]].1 == j).collect();
                    if free.len() == 1 {
                        let t = free[0];
                        x[t] = rb[j];
                        done[t] = true;
                        rb[j] = 0.0;
                        ra[cells[pick[t]].0] -= x[t];
                        progress = true;
                    }
                }
            }
            let feasible = done.iter().all(|&d| d)
                && x.iter().all(|&v| v >= -1e-12)
                && ra.iter().chain(&rb).all(|r| r.abs() < 1e-12);
            if feasible {
                let cost: f64 = (0..k).map(|t| x[t] * c(cells[pick[t]].0, cells[pick[t]].1)).sum();
                best = best.min(cost);
            }
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if pick[i] < total - k + i {
                    pick[i] += 1;
                    for t in i + 1..k {
                        pick[t] = pick[t - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn random_small_instances_match_vertex_enumeration() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.1).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 0.1).collect();
            let ra = Density::normalized(g, a).unwrap();
            let rb = Density::normalized(g, b).unwrap();
            let c = |i: usize, j: usize| {
                let x = g.center(i);
                let y = g.center(j);
                (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)
            };
            let oracle = vertex_enumeration(&ra.cell_masses(), &rb.cell_masses(), &c);
            let lp = brute_force_ot(&ra, &rb).unwrap().cost;
            assert!((lp - oracle).abs() < 1e-12, "{lp} vs {oracle}");
        }
    }

    #[test]
    fn one_dimensional_lp_matches_monotone_coupling() {
        let g = Grid::new_1d(0.0, 1.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let a: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
            let ra = Density::normalized(g, a).unwrap();
            let rb = Density::normalized(g, b).unwrap();
            let lp = brute_force_ot(&ra, &rb).unwrap().cost;
            let q = w2_atomic_1d(&ra, &rb).unwrap().cost;
            assert!((lp - q).abs() < 1e-12);
        }
    }

    #[test]
    fn size_limit() {
        let g = Grid::new_1d(0.0, 1.0, 40).unwrap();
        let u = Density::uniform(g);
        assert!(matches!(
            brute_force_ot(&u, &u),
            Err(Error::SizeExceeded { size: 80, limit: 64 })
        ));
    }
}
