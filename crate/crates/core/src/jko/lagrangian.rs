//! Exact 1-D proximal step in Lagrangian (quantile) coordinates.
//!
//! A density is represented by nodes `X_0 < … < X_M` and masses `m_j`
//! carried uniformly on `[X_j, X_{j+1}]`. With `Y` the previous nodes and
//! `d_j = X_{j+1} − X_j`, the step minimizes
//!
//! ```text
//! J(X) = 1/(2h) Σ m_j (a_j² + a_j b_j + b_j²)/3 + Σ d_j F(m_j/d_j) + Σ m_j V((X_j + X_{j+1})/2)
//! ```
//!
//! (`a_j = X_j − Y_j`, `b_j = X_{j+1} − Y_{j+1}`), whose first term is the
//! exact W₂² between the two piecewise-uniform measures. `J` is convex in
//! `X` up to the potential term, and its Hessian is tridiagonal, so Newton's
//! method with a backtracking line search is used. Node ordering is kept by
//! a fraction-to-boundary rule; the end nodes stay inside the box through
//! an active set.

use alloc::vec::Vec;

use crate::energy::{EnergyDensity, EnergyKind, InternalEnergy};
use crate::error::{Error, Result};
use crate::grid::{deposit_uniform_1d, Density, Grid};
use crate::interaction::FrozenPotential;
use crate::math;

/// Lagrangian cells per grid cell.
pub(crate) const SUBCELLS: usize = 4;

/// Cumulative mass below which tail cells are merged into their neighbour.
const TAIL_MASS: f64 = 1e-12;

const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Lagrangian {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
}

impl Lagrangian {
    /// Splits every grid cell into [`SUBCELLS`] equal-mass pieces, drops
    /// empty cells outside the support and folds negligible tails into the
    /// outermost kept piece.
    pub fn from_density(rho: &Density) -> Result<Self> {
        let g = rho.grid();
        g.require_1d()?;
        let dx = g.spacing(0);
        let sub = dx / SUBCELLS as f64;
        let masses = rho.cell_masses();
        let mut x = Vec::with_capacity(masses.len() * SUBCELLS + 1);
        let mut m = Vec::with_capacity(masses.len() * SUBCELLS);
        for (c, &mc) in masses.iter().enumerate() {
            let left = g.lower(0) + c as f64 * dx;
            if x.is_empty() {
                if mc <= 0.0 {
                    continue;
                }
                x.push(left);
            }
            if mc > 0.0 {
                for k in 0..SUBCELLS {
                    m.push(mc / SUBCELLS as f64);
                    x.push(left + (k + 1) as f64 * sub);
                }
            } else {
                // vacuum inside the support: one empty piece
                m.push(0.0);
                x.push(left + dx);
            }
        }
        // trailing vacuum
        while m.last() == Some(&0.0) {
            m.pop();
            x.pop();
        }
        if m.is_empty() {
            return Err(Error::InvalidDensity("empty support".into()));
        }
        let mut state = Self { x, m };
        state.trim_tails();
        Ok(state)
    }

    fn trim_tails(&mut self) {
        let mut acc = 0.0;
        let mut lead = 0;
        while lead + 1 < self.m.len() && acc + self.m[lead] < TAIL_MASS {
            acc += self.m[lead];
            lead += 1;
        }
        if lead > 0 {
            self.m.drain(..lead);
            self.x.drain(..lead);
            self.m[0] += acc;
        }
        let mut acc = 0.0;
        let mut tail = 0;
        let n = self.m.len();
        while tail + 1 < n && acc + self.m[n - 1 - tail] < TAIL_MASS {
            acc += self.m[n - 1 - tail];
            tail += 1;
        }
        if tail > 0 {
            self.m.truncate(n - tail);
            self.x.truncate(n - tail + 1);
            *self.m.last_mut().unwrap() += acc;
        }
    }

    /// Grid values with exact cell masses of the piecewise-uniform measure,
    /// plus the mass before renormalization.
    pub fn to_grid(&self, g: &Grid) -> (Vec<f64>, f64) {
        let mut masses = alloc::vec![0.0; g.len()];
        for j in 0..self.m.len() {
            if self.m[j] > 0.0 {
                deposit_uniform_1d(g, &mut masses, self.x[j], self.x[j + 1], self.m[j]);
            }
        }
        let total: f64 = masses.iter().sum();
        let dx = g.spacing(0);
        (masses.into_iter().map(|v| v / dx).collect(), total)
    }

    /// The node map `x ↦ y` (piecewise affine) evaluated at `points`; beyond
    /// the support it continues as a translation.
    pub fn map_to(&self, y: &[f64], points: &[f64]) -> Vec<f64> {
        let x = &self.x;
        let last = x.len() - 1;
        points
            .iter()
            .map(|&p| {
                if p <= x[0] {
                    return y[0] + (p - x[0]);
                }
                if p >= x[last] {
                    return y[last] + (p - x[last]);
                }
                let j = x.partition_point(|&v| v <= p) - 1;
                let d = x[j + 1] - x[j];
                let t = if d > 0.0 { (p - x[j]) / d } else { 0.0 };
                y[j] + t * (y[j + 1] - y[j])
            })
            .collect()
    }

    /// Exact W₂² to the same masses placed on nodes `y`.
    pub fn w2_sq(&self, y: &[f64]) -> f64 {
        w2_term(&self.x, y, &self.m)
    }
}

fn w2_term(x: &[f64], y: &[f64], m: &[f64]) -> f64 {
    m.iter()
        .enumerate()
        .map(|(j, mj)| {
            let a = x[j] - y[j];
            let b = x[j + 1] - y[j + 1];
            mj * (a * a + a * b + b * b) / 3.0
        })
        .sum()
}

/// `(d F(m/d), −P(m/d), ρ² F''(ρ)/d)`: the cell energy and its first two
/// derivatives in the cell width `d`.
fn cell_energy(e: &InternalEnergy, m: f64, d: f64) -> [f64; 3] {
    if m == 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let rho = m / d;
    let p = e.pressure(rho);
    let curv = match e.kind() {
        EnergyKind::Entropy => e.alpha() * rho / d,
        EnergyKind::Power => e.m() * p / d,
    };
    [d * e.value(rho), -p, curv]
}

pub(crate) struct Problem<'a> {
    pub y: &'a [f64],
    pub m: &'a [f64],
    pub h: f64,
    pub energy: &'a InternalEnergy,
    pub potential: &'a FrozenPotential,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SolveStats {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective_start: f64,
    pub objective_end: f64,
}

impl Problem<'_> {
    /// `J(X)`, or `+∞` outside the ordered cone.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut total = w2_term(x, self.y, self.m) / (2.0 * self.h);
        let trivial = self.potential.is_zero();
        for (j, &mj) in self.m.iter().enumerate() {
            let d = x[j + 1] - x[j];
            if !(d > 0.0) {
                return f64::INFINITY;
            }
            total += cell_energy(self.energy, mj, d)[0];
            if !trivial && mj > 0.0 {
                total += mj * self.potential.eval(0.5 * (x[j] + x[j + 1]))[0];
            }
        }
        total
    }

    /// Gradient and tridiagonal Hessian `(diag, off)`.
    fn derivatives(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = x.len();
        let mut g = alloc::vec![0.0; n];
        let mut diag = alloc::vec![0.0; n];
        let mut off = alloc::vec![0.0; n - 1];
        let w = 1.0 / (2.0 * self.h);
        let trivial = self.potential.is_zero();
        for (j, &mj) in self.m.iter().enumerate() {
            let a = x[j] - self.y[j];
            let b = x[j + 1] - self.y[j + 1];
            g[j] += w * mj * (2.0 * a + b) / 3.0;
            g[j + 1] += w * mj * (a + 2.0 * b) / 3.0;
            diag[j] += w * mj * 2.0 / 3.0;
            diag[j + 1] += w * mj * 2.0 / 3.0;
            off[j] += w * mj / 3.0;

            let [_, dp, curv] = cell_energy(self.energy, mj, x[j + 1] - x[j]);
            g[j] -= dp;
            g[j + 1] += dp;
            diag[j] += curv;
            diag[j + 1] += curv;
            off[j] -= curv;

            if !trivial && mj > 0.0 {
                let [_, v1, v2] = self.potential.eval(0.5 * (x[j] + x[j + 1]));
                g[j] += 0.5 * mj * v1;
                g[j + 1] += 0.5 * mj * v1;
                let q = 0.25 * mj * v2;
                diag[j] += q;
                diag[j + 1] += q;
                off[j] += q;
            }
        }
        (g, diag, off)
    }

    /// Minimizes `J` starting from `x`, to gradient tolerance `tol` on the
    /// free nodes.
    pub fn solve(&self, mut x: Vec<f64>, tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        let n = x.len();
        let mut fx = self.objective(&x);
        let objective_start = fx;
        if !fx.is_finite() {
            return Err(Error::InvalidArgument("initial nodes are not ordered".into()));
        }
        let mut gnorm = f64::INFINITY;
        for it in 0..MAX_NEWTON {
            let (g, mut diag, mut off) = self.derivatives(&x);
            // active set: end nodes pressed against the box
            let mut fixed = alloc::vec![false; n];
            if x[0] <= self.lower && g[0] > 0.0 {
                fixed[0] = true;
            }
            if x[n - 1] >= self.upper && g[n - 1] < 0.0 {
                fixed[n - 1] = true;
            }
            gnorm = (0..n)
                .filter(|&k| !fixed[k])
                .map(|k| g[k].abs())
                .fold(0.0, f64::max);
            // a node cannot move by less than one ulp, which bounds how small
            // its gradient can get when the curvature is large
            let resolved = (0..n)
                .filter(|&k| !fixed[k])
                .all(|k| g[k].abs() <= tol + 4.0 * f64::EPSILON * diag[k] * x[k].abs().max(1.0));
            if resolved {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        gradient_norm: gnorm,
                        objective_start,
                        objective_end: fx,
                    },
                ));
            }
            let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            for k in 0..n {
                if fixed[k] {
                    diag[k] = 1.0;
                    rhs[k] = 0.0;
                    if k > 0 {
                        off[k - 1] = 0.0;
                    }
                    if k + 1 < n {
                        off[k] = 0.0;
                    }
                }
            }
            let p = newton_direction(&diag, &off, &rhs)?;
            let slope: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                return Err(Error::NoConvergence {
                    solver: "exact1d newton",
                    iterations: it,
                    residual: gnorm,
                });
            }
            // largest step keeping order and the box
            let mut step_max: f64 = 1.0;
            for j in 0..n - 1 {
                let closing = p[j] - p[j + 1];
                if closing > 0.0 {
                    step_max = step_max.min(0.99 * (x[j + 1] - x[j]) / closing);
                }
            }
            if p[0] < 0.0 {
                step_max = step_max.min((x[0] - self.lower) / -p[0]);
            }
            if p[n - 1] > 0.0 {
                step_max = step_max.min((self.upper - x[n - 1]) / p[n - 1]);
            }
            let mut alpha = step_max;
            let noise = 4.0 * f64::EPSILON * (1.0 + fx.abs());
            let mut accepted = false;
            for _ in 0..60 {
                let trial = advance(&x, &p, alpha, self.lower, self.upper);
                let ft = self.objective(&trial);
                if ft <= fx + 1e-4 * alpha * slope + noise {
                    x = trial;
                    fx = ft;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // round-off floor: the decrease is below what J can resolve
                if -slope <= 1e-14 * (1.0 + fx.abs()) {
                    return Ok((
                        x,
                        SolveStats {
                            iterations: it,
                            gradient_norm: gnorm,
                            objective_start,
                            objective_end: fx,
                        },
                    ));
                }
                return Err(Error::NoConvergence {
                    solver: "exact1d line search",
                    iterations: it,
                    residual: gnorm,
                });
            }
        }
        Err(Error::NoConvergence {
            solver: "exact1d newton",
            iterations: MAX_NEWTON,
            residual: gnorm,
        })
    }
}

fn advance(x: &[f64], p: &[f64], alpha: f64, lower: f64, upper: f64) -> Vec<f64> {
    let n = x.len();
    let mut out: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
    out[0] = out[0].max(lower);
    out[n - 1] = out[n - 1].min(upper);
    out
}

/// Solves `H p = rhs`, shifting the diagonal until `H` is positive definite.
fn newton_direction(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = math::solve_spd_tridiagonal(diag, off, rhs) {
        return Ok(p);
    }
    let scale = diag.iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 1e-10 * scale;
    for _ in 0..40 {
        let shifted: Vec<f64> = diag.iter().map(|d| d + shift).collect();
        if let Some(p) = math::solve_spd_tridiagonal(&shifted, off, rhs) {
            return Ok(p);
        }
        shift *= 10.0;
    }
    Err(Error::NoConvergence {
        solver: "exact1d factorization",
        iterations: 40,
        residual: f64::NAN,
    })
}
