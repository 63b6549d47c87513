//! Semi-implicit JKO scheme.
//!
//! Every species takes the proximal step
//!
//! ```text
//! ρᵢᵏ = argmin  W₂²(ρ, ρᵢᵏ⁻¹)/(2h) + 𝓕ᵢ(ρ) + ∫ Vᵢ[ρ⃗ᵏ⁻¹] ρ
//! ```
//!
//! against the potential frozen at the previous level, so species updates
//! within a step are independent.
//!
//! Two inner solvers are available:
//!
//! - [`Solver::Exact1d`]: Newton on Lagrangian nodes (1-D). Across a run the
//!   Lagrangian nodes are carried from step to step and only projected to
//!   the grid for output and for the frozen potential.
//! - [`Solver::Entropic`]: generalized Sinkhorn scaling with regularization
//!   `ε` (default `Δx²`), 1-D or 2-D.

use alloc::vec::Vec;

use crate::energy::InternalEnergy;
use crate::error::{Error, Result};
use crate::grid::{self, discrete_gradient, Density, Grid, ScalarField};
use crate::interaction::InteractionSpec;
use crate::math;
use crate::transport;

mod entropic;
mod lagrangian;

use lagrangian::{Lagrangian, Problem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    /// Gradient tolerance `tol` on the Lagrangian objective.
    Exact1d { tol: f64 },
    /// `epsilon = None` selects `Δx²`. `tol` bounds the L¹ change between
    /// successive iterates.
    Entropic {
        epsilon: Option<f64>,
        tol: f64,
        max_iter: usize,
    },
}

impl Solver {
    pub fn exact1d() -> Self {
        Solver::Exact1d { tol: 1e-10 }
    }

    pub fn entropic(epsilon: Option<f64>) -> Self {
        Solver::Entropic {
            epsilon,
            tol: transport::DEFAULT_TOL,
            max_iter: 100_000,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Solver::Exact1d { .. } => "exact1d",
            Solver::Entropic { .. } => "entropic",
        }
    }

    pub fn tolerance(&self) -> f64 {
        match *self {
            Solver::Exact1d { tol } | Solver::Entropic { tol, .. } => tol,
        }
    }

    /// The regularization actually used on `grid` (entropic only).
    pub fn epsilon_for(&self, grid: &Grid) -> Option<f64> {
        match *self {
            Solver::Exact1d { .. } => None,
            Solver::Entropic { epsilon, .. } => {
                Some(epsilon.unwrap_or(grid.max_spacing() * grid.max_spacing()))
            }
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        match *self {
            Solver::Exact1d { tol } => {
                if grid.dim() != 1 {
                    return Err(Error::DimensionUnsupported {
                        expected: 1,
                        found: grid.dim(),
                    });
                }
                positive("solver tolerance", tol)
            }
            Solver::Entropic { epsilon, tol, .. } => {
                if let Some(e) = epsilon {
                    positive("entropic regularization", e)?;
                }
                positive("solver tolerance", tol)
            }
        }
    }
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain { what, value: v });
    }
    Ok(())
}

/// Energies and interactions of an `l`-species system on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSystem {
    grid: Grid,
    energies: Vec<InternalEnergy>,
    interaction: InteractionSpec,
}

impl SpeciesSystem {
    pub fn new(grid: Grid, energies: Vec<InternalEnergy>, interaction: InteractionSpec) -> Result<Self> {
        if energies.len() != interaction.species_count() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} energies for {} species",
                energies.len(),
                interaction.species_count()
            )));
        }
        if !(interaction.c_lip().is_finite() && interaction.c_hess().is_finite()) {
            return Err(Error::InvalidKernel("derivative bounds are not finite".into()));
        }
        Ok(Self {
            grid,
            energies,
            interaction,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn species_count(&self) -> usize {
        self.energies.len()
    }

    pub fn energy(&self, i: usize) -> &InternalEnergy {
        &self.energies[i]
    }

    pub fn energies(&self) -> &[InternalEnergy] {
        &self.energies
    }

    pub fn interaction(&self) -> &InteractionSpec {
        &self.interaction
    }

    fn check_species(&self, i: usize) -> Result<()> {
        if i >= self.species_count() {
            return Err(Error::SpeciesOutOfRange {
                index: i,
                count: self.species_count(),
            });
        }
        Ok(())
    }

    fn check_densities(&self, rho: &[Density]) -> Result<()> {
        if rho.len() != self.species_count() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} densities for {} species",
                rho.len(),
                self.species_count()
            )));
        }
        for r in rho {
            grid::same_grid(&self.grid, r.grid())?;
        }
        Ok(())
    }

    /// `𝓕ᵢ(ρ) + 𝓥ᵢ(ρ | frozen)`.
    pub fn free_energy(&self, i: usize, rho: &Density, frozen: &[Density]) -> Result<f64> {
        self.check_species(i)?;
        Ok(
            self.energies[i].functional(rho)
                + self.interaction.eval_interaction_functional(i, rho, frozen)?,
        )
    }
}

/// What one species did during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesRecord {
    /// `W₂²(ρᵏ⁻¹, ρᵏ)` as measured by the solver.
    pub w2_increment: f64,
    /// `𝓕ᵢ(ρᵏ)`.
    pub energy: f64,
    /// `𝓥ᵢ(ρᵏ | ρ⃗ᵏ⁻¹)`.
    pub interaction: f64,
    /// Proximal objective at the previous density.
    pub objective_before: f64,
    /// Proximal objective at the new density.
    pub objective_after: f64,
    /// Allowed excess of `objective_after` over `objective_before`.
    pub slack: f64,
    pub mass_before_renormalization: f64,
    pub renormalization: f64,
    pub iterations: usize,
    pub solver_residual: f64,
    /// `false` when the step failed and the previous density was kept.
    pub converged: bool,
    /// Transport map from the new density back to the previous one at the
    /// cell centres, as realized by the exact solver.
    pub map_back: Option<Vec<f64>>,
}

impl SpeciesRecord {
    /// `E(ρᵏ | ρ⃗ᵏ⁻¹) ≤ E(ρᵏ⁻¹ | ρ⃗ᵏ⁻¹) + slack`.
    pub fn dissipation_holds(&self) -> bool {
        self.objective_after <= self.objective_before + self.slack
    }

    fn failed(prev_energy: f64, prev_interaction: f64, residual: f64) -> Self {
        Self {
            w2_increment: 0.0,
            energy: prev_energy,
            interaction: prev_interaction,
            objective_before: prev_energy + prev_interaction,
            objective_after: prev_energy + prev_interaction,
            slack: 0.0,
            mass_before_renormalization: 1.0,
            renormalization: 1.0,
            iterations: 0,
            solver_residual: residual,
            converged: false,
            map_back: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub time: f64,
    pub densities: Vec<Density>,
    pub records: Vec<SpeciesRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    h: f64,
    solver: Solver,
    epsilon: Option<f64>,
    initial: Vec<Density>,
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    /// Entropic regularization used, if any.
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn initial(&self) -> &[Density] {
        &self.initial
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn species_count(&self) -> usize {
        self.initial.len()
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `N h`.
    pub fn end_time(&self) -> f64 {
        self.steps.len() as f64 * self.h
    }

    /// `ρᵢᵏ`, with `k = 0` the initial datum.
    pub fn density(&self, k: usize, i: usize) -> &Density {
        if k == 0 {
            &self.initial[i]
        } else {
            &self.steps[k - 1].densities[i]
        }
    }

    /// All species at level `k`.
    pub fn level(&self, k: usize) -> &[Density] {
        if k == 0 {
            &self.initial
        } else {
            &self.steps[k - 1].densities
        }
    }

    /// Piecewise-constant interpolation: `ρᵢᵏ` for `t ∈ ((k − 1)h, kh]`,
    /// and the initial datum at `t = 0`.
    pub fn interpolate(&self, t: f64, i: usize) -> Result<&Density> {
        if i >= self.species_count() {
            return Err(Error::SpeciesOutOfRange {
                index: i,
                count: self.species_count(),
            });
        }
        if !(t >= 0.0) {
            return Err(Error::Domain {
                what: "time",
                value: t,
            });
        }
        if t == 0.0 {
            return Ok(&self.initial[i]);
        }
        let k = math::ceil(t / self.h - 1e-9).max(1.0) as usize;
        if k > self.steps.len() {
            return Err(Error::TimeOutOfRange {
                t,
                end: self.end_time(),
            });
        }
        Ok(self.density(k, i))
    }
}

/// Number of steps `N = ⌈T/h⌉` (at least one).
pub fn step_count(h: f64, t_end: f64) -> usize {
    (math::ceil(t_end / h - 1e-9) as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep the previous density and continue when a step fails.
    pub best_effort: bool,
}

/// One proximal step for species `i` from the levels `prev`.
///
/// The Lagrangian state is rebuilt from `prev[i]`; [`run_scheme`] instead
/// carries it across steps.
pub fn jko_step(
    sys: &SpeciesSystem,
    prev: &[Density],
    i: usize,
    h: f64,
    solver: Solver,
) -> Result<(Density, SpeciesRecord)> {
    sys.check_species(i)?;
    sys.check_densities(prev)?;
    positive("time step", h)?;
    solver.validate(&sys.grid)?;
    match solver {
        Solver::Exact1d { tol } => {
            let state = Lagrangian::from_density(&prev[i])?;
            let (_, rho, rec) = exact_step(sys, prev, &state, i, h, tol)?;
            Ok((rho, rec))
        }
        Solver::Entropic { .. } => entropic_step(sys, prev, i, h, solver),
    }
}

fn exact_step(
    sys: &SpeciesSystem,
    prev: &[Density],
    state: &Lagrangian,
    i: usize,
    h: f64,
    tol: f64,
) -> Result<(Lagrangian, Density, SpeciesRecord)> {
    let g = sys.grid;
    let potential = sys.interaction.frozen_1d(i, prev)?;
    let problem = Problem {
        y: &state.x,
        m: &state.m,
        h,
        energy: &sys.energies[i],
        potential: &potential,
        lower: g.lower(0),
        upper: g.upper(0),
    };
    let (x, stats) = problem.solve(state.x.clone(), tol)?;
    let next = Lagrangian {
        x,
        m: state.m.clone(),
    };
    let (values, mass) = next.to_grid(&g);
    let (rho, factor) = Density::renormalize(g, values);
    let v = sys.interaction.assemble_potential(i, prev)?;
    let rec = SpeciesRecord {
        w2_increment: next.w2_sq(&state.x),
        energy: sys.energies[i].functional(&rho),
        interaction: grid::integrate(&v, &rho)?,
        objective_before: stats.objective_start,
        objective_after: stats.objective_end,
        slack: 10.0 * tol,
        mass_before_renormalization: mass,
        renormalization: factor,
        iterations: stats.iterations,
        solver_residual: stats.gradient_norm,
        converged: true,
        map_back: Some(next.map_to(&state.x, &g.centers_1d())),
    };
    Ok((next, rho, rec))
}

fn entropic_step(
    sys: &SpeciesSystem,
    prev: &[Density],
    i: usize,
    h: f64,
    solver: Solver,
) -> Result<(Density, SpeciesRecord)> {
    let Solver::Entropic { tol, max_iter, .. } = solver else {
        unreachable!("entropic solver expected");
    };
    let eps = solver.epsilon_for(&sys.grid).unwrap();
    let energy = &sys.energies[i];
    let v: ScalarField = sys.interaction.assemble_potential(i, prev)?;
    let out = entropic::entropic_step(&prev[i], energy, &v, h, eps, tol, max_iter)?;
    let mass = out.values.iter().sum::<f64>() * sys.grid.cell_volume();
    let (rho, factor) = Density::renormalize(sys.grid, out.values);
    let e_new = energy.functional(&rho);
    let v_new = grid::integrate(&v, &rho)?;
    let before = energy.functional(&prev[i]) + grid::integrate(&v, &prev[i])?;
    let rec = SpeciesRecord {
        w2_increment: out.cost,
        energy: e_new,
        interaction: v_new,
        objective_before: before,
        objective_after: out.cost / (2.0 * h) + e_new + v_new,
        slack: out.entropy_slack + 10.0 * tol,
        mass_before_renormalization: mass,
        renormalization: factor,
        iterations: out.iterations,
        solver_residual: out.residual,
        converged: true,
        map_back: None,
    };
    Ok((rho, rec))
}

/// Runs `N = ⌈T/h⌉` steps from `initial`.
pub fn run_scheme(
    sys: &SpeciesSystem,
    initial: &[Density],
    h: f64,
    t_end: f64,
    solver: Solver,
) -> Result<Trajectory> {
    run_scheme_with(sys, initial, h, t_end, solver, RunOptions::default())
}

pub fn run_scheme_with(
    sys: &SpeciesSystem,
    initial: &[Density],
    h: f64,
    t_end: f64,
    solver: Solver,
    options: RunOptions,
) -> Result<Trajectory> {
    sys.check_densities(initial)?;
    positive("time step", h)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Domain {
            what: "final time",
            value: t_end,
        });
    }
    solver.validate(&sys.grid)?;
    for i in 0..sys.species_count() {
        let e = sys.free_energy(i, &initial[i], initial)?;
        if !e.is_finite() {
            return Err(Error::InvalidDensity(alloc::format!(
                "initial energy of species {i} is not finite"
            )));
        }
    }
    let n = step_count(h, t_end);
    let mut states: Vec<Option<Lagrangian>> = match solver {
        Solver::Exact1d { .. } => initial
            .iter()
            .map(|r| Lagrangian::from_density(r).map(Some))
            .collect::<Result<_>>()?,
        Solver::Entropic { .. } => alloc::vec![None; initial.len()],
    };
    let mut steps: Vec<Step> = Vec::with_capacity(n);
    for k in 1..=n {
        let prev: &[Density] = if k == 1 { initial } else { &steps[k - 2].densities };
        let mut densities = Vec::with_capacity(prev.len());
        let mut records = Vec::with_capacity(prev.len());
        let mut new_states = Vec::with_capacity(prev.len());
        for i in 0..prev.len() {
            let outcome = match (solver, &states[i]) {
                (Solver::Exact1d { tol }, Some(state)) => {
                    exact_step(sys, prev, state, i, h, tol).map(|(s, r, rec)| (Some(s), r, rec))
                }
                _ => entropic_step(sys, prev, i, h, solver).map(|(r, rec)| (None, r, rec)),
            };
            match outcome {
                Ok((s, rho, rec)) => {
                    new_states.push(s);
                    densities.push(rho);
                    records.push(rec);
                }
                Err(e) if options.best_effort => {
                    let residual = match e {
                        Error::NoConvergence { residual, .. } => residual,
                        _ => f64::NAN,
                    };
                    let energy = sys.energies[i].functional(&prev[i]);
                    let inter = sys.interaction.eval_interaction_functional(i, &prev[i], prev)?;
                    new_states.push(states[i].clone());
                    densities.push(prev[i].clone());
                    records.push(SpeciesRecord::failed(energy, inter, residual));
                }
                Err(e) => {
                    return Err(Error::StepFailed {
                        step: k,
                        species: i,
                        source: alloc::boxed::Box::new(e),
                    })
                }
            }
        }
        states = new_states;
        steps.push(Step {
            time: k as f64 * h,
            densities,
            records,
        });
    }
    Ok(Trajectory {
        h,
        solver,
        epsilon: solver.epsilon_for(&sys.grid),
        initial: initial.to_vec(),
        steps,
    })
}

/// L¹ norm of the discrete Euler–Lagrange residual
/// `(x − T(x)) ρᵏ + h ∇Vᵢ[ρ⃗ᵏ⁻¹] ρᵏ + h ∇P(ρᵏ)`, with `T` the optimal map
/// from `next = ρᵢᵏ` back to `prev[i] = ρᵢᵏ⁻¹` between the grid densities.
pub fn optimality_residual(
    sys: &SpeciesSystem,
    prev: &[Density],
    next: &Density,
    i: usize,
    h: f64,
    solver: Solver,
) -> Result<f64> {
    if let Solver::Entropic { .. } = solver {
        return Err(Error::NotAvailable(
            "optimality residual needs the exact 1-D transport map",
        ));
    }
    sys.check_species(i)?;
    sys.check_densities(prev)?;
    grid::same_grid(&sys.grid, next.grid())?;
    sys.grid.require_1d()?;
    let map = transport::w2_exact_1d(next, &prev[i])?.map.unwrap();
    residual_with_map(sys, prev, next, &map, i, h)
}

fn residual_with_map(
    sys: &SpeciesSystem,
    prev: &[Density],
    next: &Density,
    map: &[f64],
    i: usize,
    h: f64,
) -> Result<f64> {
    let g = sys.grid;
    let grad_v = sys.interaction.potential_gradient(i, prev)?;
    let e = &sys.energies[i];
    let p: Vec<f64> = next
        .values()
        .iter()
        .map(|&r| e.eval_pressure(r))
        .collect::<Result<_>>()?;
    let grad_p = discrete_gradient(&ScalarField::new(g, p)?);
    let total: f64 = (0..g.len())
        .map(|c| {
            let rho = next.values()[c];
            let x = g.center_1d(0, c);
            ((x - map[c]) * rho + h * grad_v.values()[c][0] * rho + h * grad_p.values()[c][0]).abs()
        })
        .sum();
    Ok(total * g.spacing(0))
}

/// Residual of step `k ≥ 1` of a trajectory, using the map the solver
/// realized when the step record carries one.
pub fn step_optimality_residual(sys: &SpeciesSystem, traj: &Trajectory, k: usize, i: usize) -> Result<f64> {
    if k == 0 || k > traj.len() {
        return Err(Error::InvalidArgument(alloc::format!("step {k} out of range")));
    }
    sys.check_species(i)?;
    let prev = traj.level(k - 1);
    let next = traj.density(k, i);
    match &traj.steps[k - 1].records[i].map_back {
        Some(map) => residual_with_map(sys, prev, next, map, i, traj.h()),
        None => optimality_residual(sys, prev, next, i, traj.h(), traj.solver()),
    }
}

#[cfg(test)]
mod tests;
