use alloc::vec::Vec;

use super::TransportResult;
use crate::error::Result;
use crate::grid::{same_grid, Density};

/// Cumulative cell masses `F(e_0) = 0, …, F(e_N) = 1` at the cell edges.
pub(crate) fn cumulative(rho: &Density) -> Vec<f64> {
    let masses = rho.cell_masses();
    let total: f64 = masses.iter().sum();
    let mut cum = Vec::with_capacity(masses.len() + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for m in masses {
        acc += m;
        cum.push(acc / total);
    }
    *cum.last_mut().unwrap() = 1.0;
    cum
}

/// Left-continuous pseudo-inverse of the piecewise-linear CDF.
pub(crate) fn quantile_from(cum: &[f64], lower: f64, dx: f64, s: f64) -> f64 {
    let n = cum.len() - 1;
    if s <= 0.0 {
        let k = cum[1..].iter().position(|&c| c > 0.0).unwrap_or(0);
        return lower + k as f64 * dx;
    }
    let k = cum[1..].partition_point(|&c| c < s).min(n - 1);
    let m = cum[k + 1] - cum[k];
    if m <= 0.0 {
        return lower + (k + 1) as f64 * dx;
    }
    lower + (k as f64 + ((s - cum[k]) / m).clamp(0.0, 1.0)) * dx
}

/// `Q_ρ(s) = inf{x : F_ρ(x) ≥ s}` for a 1-D density.
pub fn quantile_1d(rho: &Density, s: f64) -> Result<f64> {
    let g = rho.grid();
    g.require_1d()?;
    Ok(quantile_from(&cumulative(rho), g.lower(0), g.spacing(0), s))
}

/// Walks the common refinement of two quantile functions.
///
/// Calls `f(s0, s1, [qa0, qa1], [qb0, qb1])` for each maximal interval
/// `[s0, s1]` on which both quantiles are affine, with their values at the
/// interval ends.
pub(crate) fn merged_quantiles(a: &Density, b: &Density, mut f: impl FnMut(f64, f64, [f64; 2], [f64; 2])) {
    let (ga, gb) = (a.grid(), b.grid());
    let (ca, cb) = (cumulative(a), cumulative(b));
    let (la, dxa, lb, dxb) = (ga.lower(0), ga.spacing(0), gb.lower(0), gb.spacing(0));
    let (na, nb) = (ca.len() - 1, cb.len() - 1);
    let q = |cum: &[f64], lower: f64, dx: f64, j: usize, s: f64| {
        let m = cum[j + 1] - cum[j];
        lower + (j as f64 + ((s - cum[j]) / m).clamp(0.0, 1.0)) * dx
    };
    let (mut j, mut k, mut s) = (0usize, 0usize, 0.0f64);
    while j < na && ca[j + 1] <= s {
        j += 1;
    }
    while k < nb && cb[k + 1] <= s {
        k += 1;
    }
    while j < na && k < nb {
        let s1 = ca[j + 1].min(cb[k + 1]);
        if s1 > s {
            f(
                s,
                s1,
                [q(&ca, la, dxa, j, s), q(&ca, la, dxa, j, s1)],
                [q(&cb, lb, dxb, k, s), q(&cb, lb, dxb, k, s1)],
            );
        }
        s = s1;
        while j < na && ca[j + 1] <= s {
            j += 1;
        }
        while k < nb && cb[k + 1] <= s {
            k += 1;
        }
    }
}

/// Exact W₂ between two cell-uniform 1-D densities.
///
/// Both quantile functions are piecewise affine, so `∫₀¹ |Q_ρ − Q_μ|²` is
/// integrated exactly on their common refinement. The map sends each cell
/// centre `x_c` to `Q_μ(F_ρ(x_c))`.
pub fn w2_exact_1d(rho: &Density, mu: &Density) -> Result<TransportResult> {
    rho.grid().require_1d()?;
    same_grid(rho.grid(), mu.grid())?;
    let mut cost = 0.0;
    merged_quantiles(rho, mu, |s0, s1, qa, qb| {
        let d0 = qa[0] - qb[0];
        let d1 = qa[1] - qb[1];
        cost += (s1 - s0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    });
    let g = rho.grid();
    let (ca, cb) = (cumulative(rho), cumulative(mu));
    let map = (0..g.cells(0))
        .map(|c| {
            let s = 0.5 * (ca[c] + ca[c + 1]);
            quantile_from(&cb, g.lower(0), g.spacing(0), s)
        })
        .collect();
    Ok(TransportResult::exact(cost.max(0.0), Some(map)))
}

/// Exact W₂ between the atomic measures `Σ_c ρ_c |cell| δ_{x_c}`.
///
/// The monotone (north-west corner) coupling of sorted atoms is optimal in
/// 1-D, so this equals the discrete LP optimum over cell centres.
pub fn w2_atomic_1d(rho: &Density, mu: &Density) -> Result<TransportResult> {
    rho.grid().require_1d()?;
    same_grid(rho.grid(), mu.grid())?;
    let g = rho.grid();
    let (ca, cb) = (cumulative(rho), cumulative(mu));
    let n = g.cells(0);
    let (mut j, mut k, mut s) = (0usize, 0usize, 0.0f64);
    let mut cost = 0.0;
    let mut map = alloc::vec![0.0; n];
    let mut moved = alloc::vec![0.0; n];
    while j < n && k < n {
        let s1 = ca[j + 1].min(cb[k + 1]);
        if s1 > s {
            let d = g.center_1d(0, j) - g.center_1d(0, k);
            cost += (s1 - s) * d * d;
            map[j] += (s1 - s) * g.center_1d(0, k);
            moved[j] += s1 - s;
        }
        s = s1;
        while j < n && ca[j + 1] <= s {
            j += 1;
        }
        while k < n && cb[k + 1] <= s {
            k += 1;
        }
    }
    // barycentric projection of the plan; identity on empty cells
    for c in 0..n {
        map[c] = if moved[c] > 0.0 {
            map[c] / moved[c]
        } else {
            g.center_1d(0, c)
        };
    }
    Ok(TransportResult::exact(cost.max(0.0), Some(map)))
}

/// `W₁ = ∫ |F_ρ − F_μ| dx` with piecewise-linear CDFs, integrated exactly
/// (including sign changes inside a cell).
pub fn w1_exact_1d(rho: &Density, mu: &Density) -> Result<f64> {
    rho.grid().require_1d()?;
    same_grid(rho.grid(), mu.grid())?;
    let (ca, cb) = (cumulative(rho), cumulative(mu));
    let dx = rho.grid().spacing(0);
    let mut total = 0.0;
    for c in 0..ca.len() - 1 {
        let d0 = ca[c] - cb[c];
        let d1 = ca[c + 1] - cb[c + 1];
        total += if d0 * d1 >= 0.0 {
            0.5 * dx * (d0.abs() + d1.abs())
        } else {
            0.5 * dx * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cell_averages_1d, Grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(g: Grid, rng: &mut ChaCha8Rng, zeros: bool) -> Density {
        let v: Vec<f64> = (0..g.len())
            .map(|_| {
                if zeros && rng.gen::<f64>() < 0.3 {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        if v.iter().all(|&x| x == 0.0) {
            return Density::uniform(g);
        }
        Density::normalized(g, v).unwrap()
    }

    /// Midpoint quadrature of `∫₀¹ |Q_a − Q_b|²` with a bisection quantile.
    fn w2_quadrature_oracle(a: &Density, b: &Density, samples: usize) -> f64 {
        let g = a.grid();
        let edges = g.edges_1d();
        let cdf = |d: &Density, x: f64| -> f64 {
            let mut acc = 0.0;
            for c in 0..g.len() {
                let (l, r) = (edges[c], edges[c + 1]);
                if x >= r {
                    acc += d.values()[c] * (r - l);
                } else if x > l {
                    acc += d.values()[c] * (x - l);
                }
            }
            acc
        };
        let q = |d: &Density, s: f64| {
            let (mut lo, mut hi) = (g.lower(0), g.upper(0));
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if cdf(d, mid) >= s {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        (0..samples)
            .map(|i| {
                let s = (i as f64 + 0.5) / samples as f64;
                let d = q(a, s) - q(b, s);
                d * d
            })
            .sum::<f64>()
            / samples as f64
    }

    #[test]
    fn identical_densities() {
        let g = Grid::new_1d(-1.0, 1.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_density(g, &mut rng, false);
        let t = w2_exact_1d(&r, &r).unwrap();
        assert!(t.cost.abs() < 1e-15);
        for (c, x) in t.map.unwrap().iter().enumerate() {
            assert!((x - g.center_1d(0, c)).abs() < 1e-12);
        }
        assert_eq!(w1_exact_1d(&r, &r).unwrap(), 0.0);
    }

    #[test]
    fn whole_cell_shift() {
        let g = Grid::new_1d(0.0, 4.0, 40).unwrap();
        let mut v = alloc::vec![0.0; 40];
        for (i, x) in v.iter_mut().enumerate().take(20).skip(5) {
            *x = 1.0 + (i as f64 * 0.7).sin().abs();
        }
        let a = Density::normalized(g, v.clone()).unwrap();
        let mut w = alloc::vec![0.0; 40];
        w[12..27].copy_from_slice(&v[5..20]);
        let b = Density::normalized(g, w).unwrap();
        let shift = 7.0 * g.spacing(0);
        assert!((w2_exact_1d(&a, &b).unwrap().distance() - shift).abs() < 1e-10);
        assert!((w2_atomic_1d(&a, &b).unwrap().distance() - shift).abs() < 1e-10);
        assert!((w1_exact_1d(&a, &b).unwrap() - shift).abs() < 1e-10);
    }

    #[test]
    fn exact_matches_quadrature_oracle() {
        let g = Grid::new_1d(0.0, 1.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let a = random_density(g, &mut rng, true);
            let b = random_density(g, &mut rng, true);
            let exact = w2_exact_1d(&a, &b).unwrap().cost;
            let oracle = w2_quadrature_oracle(&a, &b, 20000);
            // oracle error is O(jump² / samples) at zero-mass cells
            assert!((exact - oracle).abs() < 2e-5, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn gaussian_translates() {
        let g = Grid::new_1d(-5.0, 5.0, 200).unwrap();
        let gauss = |m: f64| {
            let v = cell_averages_1d(&g, |x| {
                0.5 * libm::erf((x - m) / (0.5 * core::f64::consts::SQRT_2))
            });
            Density::normalized(g, v).unwrap()
        };
        let a = gauss(-0.3);
        let b = gauss(0.45);
        assert!((w2_exact_1d(&a, &b).unwrap().distance() - 0.75).abs() < 1e-8);
    }

    #[test]
    fn rejects_2d() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        let u = Density::uniform(g);
        assert!(w2_exact_1d(&u, &u).is_err());
        assert!(w1_exact_1d(&u, &u).is_err());
    }

    proptest! {
        #[test]
        fn metric_axioms(seed in 0u64..10_000) {
            let g = Grid::new_1d(-2.0, 3.0, 12).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density(g, &mut rng, true);
            let b = random_density(g, &mut rng, true);
            let c = random_density(g, &mut rng, true);
            let d = |x: &Density, y: &Density| w2_exact_1d(x, y).unwrap().distance();
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-10);
            prop_assert!(w1_exact_1d(&a, &b).unwrap() <= d(&a, &b) + 1e-10);
            let da = |x: &Density, y: &Density| w2_atomic_1d(x, y).unwrap().distance();
            prop_assert!(da(&a, &c) <= da(&a, &b) + da(&b, &c) + 1e-10);
        }

        #[test]
        fn optimal_map_is_monotone(seed in 0u64..10_000) {
            let g = Grid::new_1d(0.0, 1.0, 20).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density(g, &mut rng, true);
            let b = random_density(g, &mut rng, true);
            let map = w2_exact_1d(&a, &b).unwrap().map.unwrap();
            for w in map.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
    }
}
