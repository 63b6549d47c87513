//! Optimal transport with quadratic cost.
//!
//! - [`w2_exact_1d`], [`w1_exact_1d`]: closed-form 1-D distances between
//!   cell-uniform densities via quantile functions.
//! - [`w2_atomic_1d`]: the same between the cell-centre atomic measures,
//!   which is what a discrete LP over cell centres computes.
//! - [`sinkhorn`]: log-domain entropic transport between cell-centre atoms,
//!   1-D or 2-D.
//! - [`brute_force_ot`]: exact LP oracle for small instances.
//! - [`displacement_interpolate_1d`]: McCann interpolation.

use alloc::vec::Vec;

mod interpolate;
mod lp;
mod quantile;
mod sinkhorn;

pub use interpolate::{displacement_interpolate_1d, interpolant_energy_1d};
pub use lp::{brute_force_ot, LP_SUPPORT_LIMIT};
pub use quantile::{quantile_1d, w1_exact_1d, w2_atomic_1d, w2_exact_1d};
pub use sinkhorn::{sinkhorn, sinkhorn_divergence, DEFAULT_TOL};

pub(crate) use quantile::merged_quantiles;
pub(crate) use sinkhorn::{log_masses, lse_apply};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    /// Transport cost, in squared length units for W₂.
    pub cost: f64,
    /// Image of each cell centre under the optimal map (exact 1-D only).
    pub map: Option<Vec<f64>>,
    /// Dual potentials `(f, g)` (entropic only).
    pub potentials: Option<(Vec<f64>, Vec<f64>)>,
    pub iterations: usize,
    /// Final marginal violation (entropic) or zero.
    pub residual: f64,
}

impl TransportResult {
    fn exact(cost: f64, map: Option<Vec<f64>>) -> Self {
        Self {
            cost,
            map,
            potentials: None,
            iterations: 0,
            residual: 0.0,
        }
    }

    /// `√cost`.
    pub fn distance(&self) -> f64 {
        crate::math::sqrt(self.cost.max(0.0))
    }
}
