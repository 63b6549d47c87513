//! Entropic proximal step by generalized scaling iterations.
//!
//! The plan `γ_ij = exp((f_i + g_j − |x_i − x_j|²)/ε)` keeps its first
//! marginal equal to the previous masses `p`; its second marginal `s` is the
//! KL-proximal point of `2h(𝓕 + ∫ V ·)/ε` at the current column sums.
//! Everything is carried in log variables, so near-vacuum cells are safe.

use alloc::vec::Vec;

use crate::energy::InternalEnergy;
use crate::error::{Error, Result};
use crate::grid::{Density, ScalarField};
use crate::math;
use crate::transport::{log_masses, lse_apply};

#[derive(Debug, Clone)]
pub(crate) struct EntropicOutcome {
    pub values: Vec<f64>,
    /// `⟨γ, |x − y|²⟩`.
    pub cost: f64,
    /// `(ε/2h)(H(γ) − H(p))`, the entropy paid by the plan.
    pub entropy_slack: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub(crate) fn entropic_step(
    prev: &Density,
    energy: &InternalEnergy,
    potential: &ScalarField,
    h: f64,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EntropicOutcome> {
    let grid = *prev.grid();
    let n = grid.len();
    let w = grid.cell_volume();
    let lw = math::ln(w);
    let tau = 2.0 * h / eps;
    let lp = log_masses(prev);
    let v = potential.values();

    let a_step = |g: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = g.iter().map(|x| x / eps).collect();
        let lk = lse_apply(&grid, &scaled, eps);
        lp.iter().zip(&lk).map(|(p, k)| eps * (p - k)).collect()
    };

    let mut g = alloc::vec![0.0; n];
    let mut f = a_step(&g);
    let mut current: Vec<f64> = prev.values().to_vec();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let scaled: Vec<f64> = f.iter().map(|x| x / eps).collect();
        let lz = lse_apply(&grid, &scaled, eps);
        let mut next = Vec::with_capacity(n);
        for j in 0..n {
            let ls = lw + energy.kl_prox_log(tau, lz[j] - lw - tau * v[j])?;
            g[j] = eps * (ls - lz[j]);
            next.push(math::exp(ls) / w);
        }
        residual = next.iter().zip(&current).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
        current = next;
        f = a_step(&g);
        if residual <= tol {
            break;
        }
    }
    if !(residual <= tol) {
        return Err(Error::NoConvergence {
            solver: "entropic jko",
            iterations,
            residual,
        });
    }

    let mut cost = 0.0;
    let mut plan_entropy = 0.0;
    for i in 0..n {
        let xi = grid.center(i);
        for j in 0..n {
            let xj = grid.center(j);
            let c = (xi[0] - xj[0]) * (xi[0] - xj[0]) + (xi[1] - xj[1]) * (xi[1] - xj[1]);
            let lg = (f[i] + g[j] - c) / eps;
            let gamma = math::exp(lg);
            if gamma > 0.0 {
                cost += gamma * c;
                plan_entropy -= gamma * lg;
            }
        }
    }
    let prev_entropy: f64 = -prev.cell_masses().iter().map(|&m| math::xlogx(m)).sum::<f64>();
    Ok(EntropicOutcome {
        values: current,
        cost,
        entropy_slack: eps / (2.0 * h) * (plan_entropy - prev_entropy).max(0.0),
        iterations,
        residual,
    })
}
