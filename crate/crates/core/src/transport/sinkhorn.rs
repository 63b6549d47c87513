use alloc::vec::Vec;

use super::TransportResult;
use crate::error::{Error, Result};
use crate::grid::{same_grid, Density, Grid};
use crate::math;

/// Default marginal tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Floor applied to masses inside logarithms.
const MASS_FLOOR: f64 = 1e-300;

/// `log max(m_c, 1e−300)` for the cell masses of `rho`.
pub(crate) fn log_masses(rho: &Density) -> Vec<f64> {
    rho.cell_masses()
        .into_iter()
        .map(|m| math::ln(m.max(MASS_FLOOR)))
        .collect()
}

fn axis_costs(grid: &Grid, axis: usize, eps: f64) -> Vec<f64> {
    let n = grid.cells(axis);
    let dx = grid.spacing(axis);
    let mut c = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let d = (i as f64 - j as f64) * dx;
            c.push(d * d / eps);
        }
    }
    c
}

/// `out_i = log Σ_j exp(h_j − |x_i − x_j|²/ε)` over cell centres.
///
/// The squared distance is separable, so in 2-D the sum is taken one axis
/// at a time.
pub(crate) fn lse_apply(grid: &Grid, h: &[f64], eps: f64) -> Vec<f64> {
    let n0 = grid.cells(0);
    let c0 = axis_costs(grid, 0, eps);
    let lse_axis0 = |col: &dyn Fn(usize) -> f64, i: usize| -> f64 {
        let row = &c0[i * n0..(i + 1) * n0];
        let mut max = f64::NEG_INFINITY;
        for j in 0..n0 {
            max = max.max(col(j) - row[j]);
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        let s: f64 = (0..n0).map(|j| math::exp(col(j) - row[j] - max)).sum();
        max + math::ln(s)
    };
    if grid.dim() == 1 {
        return (0..n0).map(|i| lse_axis0(&|j| h[j], i)).collect();
    }
    let n1 = grid.cells(1);
    let c1 = axis_costs(grid, 1, eps);
    // a[j0 * n1 + i1] = LSE_{j1} (h[j0, j1] − c1[i1, j1])
    let mut a = alloc::vec![0.0; n0 * n1];
    for j0 in 0..n0 {
        let hrow = &h[j0 * n1..(j0 + 1) * n1];
        for i1 in 0..n1 {
            let crow = &c1[i1 * n1..(i1 + 1) * n1];
            a[j0 * n1 + i1] = math::log_sum_exp(hrow.iter().zip(crow).map(|(x, c)| x - c));
        }
    }
    let mut out = alloc::vec![0.0; n0 * n1];
    for i1 in 0..n1 {
        for i0 in 0..n0 {
            out[i0 * n1 + i1] = lse_axis0(&|j0| a[j0 * n1 + i1], i0);
        }
    }
    out
}

/// Log-domain Sinkhorn between the cell-centre atomic measures of `rho` and
/// `mu` with cost `|x − y|²` and regularization `ε`.
///
/// The plan is `γ_ij = a_i b_j exp((f_i + g_j − C_ij)/ε)`. Each sweep makes
/// the column marginal exact; iteration stops once the row marginal is within
/// `tol` in L¹. Returns the transport part `⟨γ, C⟩` as the cost.
pub fn sinkhorn(rho: &Density, mu: &Density, eps: f64, tol: f64, max_iter: usize) -> Result<TransportResult> {
    same_grid(rho.grid(), mu.grid())?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain {
            what: "entropic regularization",
            value: eps,
        });
    }
    let g = rho.grid();
    let n = g.len();
    let la = log_masses(rho);
    let lb = log_masses(mu);
    let mut f = alloc::vec![0.0; n];
    let mut gp = alloc::vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let h: Vec<f64> = la.iter().zip(&f).map(|(l, fi)| l + fi / eps).collect();
        gp = lse_apply(g, &h, eps).into_iter().map(|v| -eps * v).collect();
        let h: Vec<f64> = lb.iter().zip(&gp).map(|(l, gj)| l + gj / eps).collect();
        let fc: Vec<f64> = lse_apply(g, &h, eps).into_iter().map(|v| -eps * v).collect();
        residual = (0..n)
            .map(|i| (math::exp(la[i] + (f[i] - fc[i]) / eps) - math::exp(la[i])).abs())
            .sum();
        if residual <= tol {
            break;
        }
        f = fc;
    }
    if residual > tol {
        return Err(Error::NoConvergence {
            solver: "sinkhorn",
            iterations,
            residual,
        });
    }
    let mut cost = 0.0;
    for i in 0..n {
        let xi = g.center(i);
        for j in 0..n {
            let xj = g.center(j);
            let c = (xi[0] - xj[0]) * (xi[0] - xj[0]) + (xi[1] - xj[1]) * (xi[1] - xj[1]);
            cost += math::exp(la[i] + lb[j] + (f[i] + gp[j] - c) / eps) * c;
        }
    }
    Ok(TransportResult {
        cost,
        map: None,
        potentials: Some((f, gp)),
        iterations,
        residual,
    })
}

/// Debiased cost `c(ρ, μ) − ½ c(ρ, ρ) − ½ c(μ, μ)` from [`sinkhorn`].
pub fn sinkhorn_divergence(rho: &Density, mu: &Density, eps: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let ab = sinkhorn(rho, mu, eps, tol, max_iter)?.cost;
    let aa = sinkhorn(rho, rho, eps, tol, max_iter)?.cost;
    let bb = sinkhorn(mu, mu, eps, tol, max_iter)?.cost;
    Ok(ab - 0.5 * aa - 0.5 * bb)
}
