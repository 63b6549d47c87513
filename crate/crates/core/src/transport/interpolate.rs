use alloc::vec::Vec;

use super::merged_quantiles;
use crate::energy::EnergyDensity;
use crate::error::{Error, Result};
use crate::grid::{deposit_uniform_1d, same_grid, Density};

fn check_args(rho: &Density, mu: &Density, t: f64) -> Result<()> {
    rho.grid().require_1d()?;
    same_grid(rho.grid(), mu.grid())?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain {
            what: "interpolation time",
            value: t,
        });
    }
    Ok(())
}

/// McCann interpolant `((1 − t) Id + t T)#ρ` with `T` the optimal map to `μ`.
///
/// In quantile form `Q_t = (1 − t) Q_ρ + t Q_μ`, which is piecewise affine;
/// each affine piece carries its mass uniformly and is deposited exactly on
/// the cells it covers.
pub fn displacement_interpolate_1d(rho: &Density, mu: &Density, t: f64) -> Result<Density> {
    check_args(rho, mu, t)?;
    let g = *rho.grid();
    let mut masses = alloc::vec![0.0; g.len()];
    merged_quantiles(rho, mu, |s0, s1, qa, qb| {
        let a = (1.0 - t) * qa[0] + t * qb[0];
        let b = (1.0 - t) * qa[1] + t * qb[1];
        deposit_uniform_1d(&g, &mut masses, a, b, s1 - s0);
    });
    let dx = g.spacing(0);
    let values: Vec<f64> = masses.into_iter().map(|m| m / dx).collect();
    Ok(Density::renormalize(g, values).0)
}

/// `∫ F(ρ_t)` evaluated on the interpolant itself (before re-binning to the
/// grid), which is piecewise constant in space.
pub fn interpolant_energy_1d<E: EnergyDensity + ?Sized>(
    energy: &E,
    rho: &Density,
    mu: &Density,
    t: f64,
) -> Result<f64> {
    check_args(rho, mu, t)?;
    let mut total = 0.0;
    merged_quantiles(rho, mu, |s0, s1, qa, qb| {
        let a = (1.0 - t) * qa[0] + t * qb[0];
        let b = (1.0 - t) * qa[1] + t * qb[1];
        let w = b - a;
        total += if w > 0.0 {
            w * energy.value((s1 - s0) / w)
        } else {
            f64::INFINITY
        };
    });
    Ok(total)
}
