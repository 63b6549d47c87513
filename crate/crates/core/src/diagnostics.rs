//! Quantitative checks on computed trajectories.
//!
//! Everything here is a deterministic function of a [`Trajectory`] (plus the
//! system that produced it), so reports are reproducible bit for bit.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::energy::{EnergyKind, InternalEnergy};
use crate::error::{Error, Result};
use crate::grid::{self, cell_averages_1d, Density, Grid, ScalarField, VectorField};
use crate::interaction::{ExternalPotential, InteractionSpec};
use crate::jko::{self, Solver, SpeciesSystem, Trajectory};
use crate::math;
use crate::transport;

/// One named check. `pass` is `statistic ≤ bound` (false for NaN).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(statistic: f64, bound: f64) -> Self {
        Self {
            statistic,
            bound,
            pass: statistic <= bound,
        }
    }
}

/// Per-species columns of the time series; entry `k` belongs to level `k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeciesSeries {
    /// Mass before renormalization.
    pub mass: Vec<f64>,
    /// Second moment `∫|x|²ρ`.
    pub moment: Vec<f64>,
    pub energy: Vec<f64>,
    /// `𝓥ᵢ(ρᵏ | ρ⃗ᵏ⁻¹)`.
    pub interaction: Vec<f64>,
    pub w2_increment: Vec<f64>,
    /// Optimality residual; NaN where not available.
    pub residual: Vec<f64>,
    /// Contribution `h Σ ψ` of each step to the action.
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub species: Vec<SpeciesSeries>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsReport {
    pub checks: BTreeMap<String, Check>,
    pub series: TimeSeries,
}

impl DiagnosticsReport {
    pub fn pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn insert(&mut self, name: impl Into<String>, check: Check) {
        self.checks.insert(name.into(), check);
    }
}

/// `ψ(r, m) = |m|²/r`, `ψ(0, 0) = 0`, `ψ(0, m ≠ 0) = +∞`.
pub fn psi(r: f64, m: [f64; 2]) -> f64 {
    let q = m[0] * m[0] + m[1] * m[1];
    if q == 0.0 {
        0.0
    } else if r > 0.0 {
        q / r
    } else {
        f64::INFINITY
    }
}

/// `Σ_cells ψ(ρ, m) |cell|` for a cell-centred momentum field.
pub fn action(rho: &Density, momentum: &VectorField) -> Result<f64> {
    grid::same_grid(rho.grid(), momentum.grid())?;
    let total: f64 = rho
        .values()
        .iter()
        .zip(momentum.values())
        .map(|(&r, &m)| psi(r, m))
        .sum();
    Ok(total * rho.grid().cell_volume())
}

/// Walks every interior face of `g` as `(left cell, right cell, axis)`.
fn faces(g: &Grid) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for axis in 0..g.dim() {
        for c in 0..g.len() {
            let (i, j) = g.unflatten(c);
            let (ni, nj) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
            let within = if axis == 0 {
                ni < g.cells(0)
            } else {
                nj < g.cells(1)
            };
            if within {
                out.push((c, g.flatten(ni, nj), axis));
            }
        }
    }
    out
}

/// `Σ_faces ψ(r_f, E_f) |cell|` with `r_f` the face average of `ρ` and
/// `E_f = ΔP/Δx + r_f ΔV/Δx` the momentum on the face. Boundary faces carry
/// no flux.
fn staggered_action(rho: &Density, energy: &InternalEnergy, v: &ScalarField) -> Result<f64> {
    let g = *rho.grid();
    let r = rho.values();
    let p: Vec<f64> = r
        .iter()
        .map(|&x| energy.eval_pressure(x))
        .collect::<Result<_>>()?;
    let total: f64 = faces(&g)
        .into_iter()
        .map(|(a, b, axis)| {
            let dx = g.spacing(axis);
            let rf = 0.5 * (r[a] + r[b]);
            let e = (p[b] - p[a]) / dx + rf * (v.values()[b] - v.values()[a]) / dx;
            psi(rf, [e, 0.0])
        })
        .sum();
    Ok(total * g.cell_volume())
}

/// `h Σₖ Σ_faces ψ(ρᵏ, ∇P(ρᵏ) + ρᵏ∇V[ρ⃗ᵏ⁻¹]) |cell|` over `k = 1..N`.
/// `+∞` flags a cell with flux and no mass.
pub fn benamou_brenier_action(sys: &SpeciesSystem, traj: &Trajectory, i: usize) -> Result<f64> {
    Ok(action_per_step(sys, traj, i)?.iter().sum())
}

fn action_per_step(sys: &SpeciesSystem, traj: &Trajectory, i: usize) -> Result<Vec<f64>> {
    check_species(traj, i)?;
    (1..=traj.len())
        .map(|k| {
            let v = sys.interaction().assemble_potential(i, traj.level(k - 1))?;
            Ok(traj.h() * staggered_action(traj.density(k, i), sys.energy(i), &v)?)
        })
        .collect()
}

fn check_species(traj: &Trajectory, i: usize) -> Result<()> {
    if i >= traj.species_count() {
        return Err(Error::SpeciesOutOfRange {
            index: i,
            count: traj.species_count(),
        });
    }
    Ok(())
}

/// `Σ_faces |Δu/Δx|^q |cell|` and `Σ_cells |u|^q |cell|` for `q ∈ {1, 2}`.
fn face_norms(g: &Grid, u: &[f64], q: u32) -> (f64, f64) {
    let pow = |x: f64| if q == 2 { x * x } else { x.abs() };
    let grad: f64 = faces(g)
        .into_iter()
        .map(|(a, b, axis)| pow((u[b] - u[a]) / g.spacing(axis)))
        .sum();
    let val: f64 = u.iter().map(|&x| pow(x)).sum();
    (grad * g.cell_volume(), val * g.cell_volume())
}

/// `h Σₖ (‖∇(ρᵏ)^{m/2}‖²_{L²} + ‖(ρᵏ)^{m/2}‖²_{L²})`. Needs a power energy
/// with `m > 1`.
pub fn gradient_estimate_l2h1(sys: &SpeciesSystem, traj: &Trajectory, i: usize) -> Result<f64> {
    check_species(traj, i)?;
    let e = sys.energy(i);
    if e.kind() != EnergyKind::Power || !(e.m() > 1.0) {
        return Err(Error::NotAvailable(
            "the L²H¹ estimate needs a power energy with m > 1",
        ));
    }
    let g = *sys.grid();
    let half = 0.5 * e.m();
    let total: f64 = (1..=traj.len())
        .map(|k| {
            let u: Vec<f64> = traj
                .density(k, i)
                .values()
                .iter()
                .map(|&r| math::powf(r, half))
                .collect();
            let (a, b) = face_norms(&g, &u, 2);
            a + b
        })
        .sum();
    Ok(traj.h() * total)
}

/// `h Σₖ (‖(ρᵏ)^m‖_{L¹} + ‖∇(ρᵏ)^m‖_{L¹})`, with `m = 1` for the entropy.
pub fn gradient_estimate_l1w11(sys: &SpeciesSystem, traj: &Trajectory, i: usize) -> Result<f64> {
    check_species(traj, i)?;
    let m = sys.energy(i).m();
    let g = *sys.grid();
    let total: f64 = (1..=traj.len())
        .map(|k| {
            let u: Vec<f64> = traj
                .density(k, i)
                .values()
                .iter()
                .map(|&r| math::powf(r, m))
                .collect();
            let (a, b) = face_norms(&g, &u, 1);
            a + b
        })
        .sum();
    Ok(traj.h() * total)
}

/// Per-level columns for every species.
pub fn time_series(sys: &SpeciesSystem, traj: &Trajectory) -> Result<TimeSeries> {
    let n = traj.len();
    let exact = matches!(traj.solver(), Solver::Exact1d { .. });
    let mut species = Vec::with_capacity(traj.species_count());
    for i in 0..traj.species_count() {
        let mut s = SpeciesSeries::default();
        let r0 = traj.density(0, i);
        s.mass.push(r0.mass());
        s.moment.push(grid::second_moment(r0));
        s.energy.push(sys.energy(i).functional(r0));
        s.interaction.push(
            sys.interaction()
                .eval_interaction_functional(i, r0, traj.initial())?,
        );
        s.w2_increment.push(0.0);
        s.residual.push(f64::NAN);
        s.action.push(0.0);
        let actions = action_per_step(sys, traj, i)?;
        for k in 1..=n {
            let rec = &traj.steps()[k - 1].records[i];
            s.mass.push(rec.mass_before_renormalization);
            s.moment.push(grid::second_moment(traj.density(k, i)));
            s.energy.push(rec.energy);
            s.interaction.push(rec.interaction);
            s.w2_increment.push(rec.w2_increment);
            s.residual.push(if exact {
                jko::step_optimality_residual(sys, traj, k, i)?
            } else {
                f64::NAN
            });
            s.action.push(actions[k - 1]);
        }
        species.push(s);
    }
    let t = (0..=n).map(|k| k as f64 * traj.h()).collect();
    Ok(TimeSeries { t, species })
}

/// Bounds that hold along any single trajectory.
///
/// - `mass_i`: largest `|mass − 1|` before renormalization, bound `1e-8`.
/// - `dissipation_i`: largest excess of the proximal objective over its
///   allowance, bound `0`.
/// - `renormalization_i`: largest `|factor − 1|`, bound `1e-6`.
/// - `energy_bound_i`: `max 𝓕ᵢ(ρᵏ) − 𝓕ᵢ(ρ⁰)` against `C_lip² T`.
/// - `action_i`: the Benamou–Brenier action, bound `+∞` (fails only on the
///   infinite flag).
/// - `potential_gradient_i`: largest `‖∇ₕVᵢ[ρ⃗ᵏ]‖_∞` over the levels against
///   `C_lip + C_hess Δx`.
pub fn trajectory_report(sys: &SpeciesSystem, traj: &Trajectory) -> Result<DiagnosticsReport> {
    let series = time_series(sys, traj)?;
    let mut report = DiagnosticsReport::default();
    let c = sys.interaction().c_lip();
    let slope_bound = c + sys.interaction().c_hess() * sys.grid().max_spacing();
    for i in 0..traj.species_count() {
        let mut steepest: f64 = 0.0;
        for k in 0..=traj.len() {
            let v = sys.interaction().assemble_potential(i, traj.level(k))?;
            steepest = steepest.max(grid::discrete_gradient(&v).max_norm());
        }
        report.insert(
            alloc::format!("potential_gradient_{i}"),
            Check::new(steepest, slope_bound + 1e-12),
        );
        let s = &series.species[i];
        let mass = s.mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
        report.insert(alloc::format!("mass_{i}"), Check::new(mass, 1e-8));
        let mut excess = f64::NEG_INFINITY;
        let mut renorm: f64 = 0.0;
        for step in traj.steps() {
            let r = &step.records[i];
            excess = excess.max(r.objective_after - r.objective_before - r.slack);
            renorm = renorm.max((r.renormalization - 1.0).abs());
        }
        report.insert(alloc::format!("dissipation_{i}"), Check::new(excess, 0.0));
        report.insert(alloc::format!("renormalization_{i}"), Check::new(renorm, 1e-6));
        let f_max = s.energy[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        report.insert(
            alloc::format!("energy_bound_{i}"),
            Check::new(f_max - s.energy[0], c * c * traj.end_time() + 1e-9),
        );
        let act: f64 = s.action.iter().sum();
        report.insert(
            alloc::format!("action_{i}"),
            Check {
                statistic: act,
                bound: f64::INFINITY,
                pass: act.is_finite(),
            },
        );
    }
    report.series = series;
    Ok(report)
}

/// `max W₂(ρ(t), ρ(s)) / (|t − s| + h)^{1/2}` over pairs of levels, sampled
/// on at most [`HOLDER_SAMPLES`] evenly spaced levels (1-D).
pub fn holder_constant(traj: &Trajectory, i: usize) -> Result<f64> {
    check_species(traj, i)?;
    let n = traj.len();
    let h = traj.h();
    let count = (n + 1).min(HOLDER_SAMPLES);
    let levels: Vec<usize> = (0..count)
        .map(|s| if count == 1 { 0 } else { s * n / (count - 1) })
        .collect();
    let mut worst: f64 = 0.0;
    for (p, &a) in levels.iter().enumerate() {
        for &b in &levels[p + 1..] {
            let d = transport::w2_exact_1d(traj.density(a, i), traj.density(b, i))?.distance();
            worst = worst.max(d / math::sqrt((b - a) as f64 * h + h));
        }
    }
    Ok(worst)
}

pub const HOLDER_SAMPLES: usize = 33;

/// `Σᵢ W₂²(ρᵢ, μᵢ)`: exact in 1-D, debiased Sinkhorn with `ε = Δx²` in 2-D.
pub fn species_distance(a: &[Density], b: &[Density]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        if x == y {
            continue;
        }
        let g = x.grid();
        total += if g.dim() == 1 {
            transport::w2_exact_1d(x, y)?.cost
        } else {
            let eps = g.max_spacing() * g.max_spacing();
            transport::sinkhorn_divergence(x, y, eps, transport::DEFAULT_TOL, 100_000)?.max(0.0)
        };
    }
    Ok(total)
}

/// Least-squares slope of `log d` against `t` over the second half of the
/// samples, ignoring zero distances. `0` when fewer than two samples remain.
pub fn growth_rate(t: &[f64], d: &[f64]) -> f64 {
    let start = t.len() / 2;
    let pts: Vec<(f64, f64)> = t[start..]
        .iter()
        .zip(&d[start..])
        .filter(|(_, &v)| v > 0.0)
        .map(|(&x, &v)| (x, math::ln(v)))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub t: Vec<f64>,
    /// `d(t) = Σᵢ W₂²(ρᵢ¹(t), ρᵢ²(t))`.
    pub distance: Vec<f64>,
    pub rate: f64,
    pub c_cert: f64,
    pub margin: f64,
    /// `4 C_cert + margin`.
    pub bound: f64,
    /// Regularization of the distance in 2-D.
    pub epsilon: Option<f64>,
    pub pass: bool,
}

pub const CONTRACTION_MARGIN: f64 = 0.5;

/// Runs both initial data and compares the trajectories level by level.
pub fn contraction_check(
    sys: &SpeciesSystem,
    first: &[Density],
    second: &[Density],
    h: f64,
    t_end: f64,
    solver: Solver,
) -> Result<ContractionReport> {
    let a = jko::run_scheme(sys, first, h, t_end, solver)?;
    let b = jko::run_scheme(sys, second, h, t_end, solver)?;
    contraction_from_trajectories(sys, &a, &b)
}

pub fn contraction_from_trajectories(
    sys: &SpeciesSystem,
    a: &Trajectory,
    b: &Trajectory,
) -> Result<ContractionReport> {
    if a.len() != b.len() || a.h() != b.h() {
        return Err(Error::InvalidArgument(
            "trajectories have different time levels".into(),
        ));
    }
    let t: Vec<f64> = (0..=a.len()).map(|k| k as f64 * a.h()).collect();
    let distance = (0..=a.len())
        .map(|k| species_distance(a.level(k), b.level(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(contraction_from_series(
        sys.interaction().c_cert(),
        sys.grid(),
        t,
        distance,
    ))
}

/// Fits and bounds an already computed distance series.
pub fn contraction_from_series(
    c_cert: f64,
    grid: &Grid,
    t: Vec<f64>,
    distance: Vec<f64>,
) -> ContractionReport {
    let rate = growth_rate(&t, &distance);
    let bound = 4.0 * c_cert + CONTRACTION_MARGIN;
    ContractionReport {
        rate,
        c_cert,
        margin: CONTRACTION_MARGIN,
        bound,
        epsilon: (grid.dim() == 2).then(|| grid.max_spacing() * grid.max_spacing()),
        pass: rate <= bound,
        t,
        distance,
    }
}

/// Classical solutions the scheme is checked against (1-D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Entropy, no potential, Gaussian of variance `σ₀² + 2t`.
    Heat { sigma0: f64 },
    /// Porous medium `m = 2`, started from the Barenblatt profile at `t0`.
    Barenblatt { t0: f64 },
    /// Entropy with confinement of radius `radius`, started at `e^{−U}/Z`.
    Gibbs { radius: f64 },
}

/// `B` with `(4/3) B^{3/2} = 1`.
fn barenblatt_height() -> f64 {
    math::powf(0.75, 2.0 / 3.0)
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Heat { .. } => "heat",
            Baseline::Barenblatt { .. } => "barenblatt",
            Baseline::Gibbs { .. } => "gibbs",
        }
    }

    /// Parses `heat | barenblatt | gibbs` with the given parameter.
    pub fn from_name(name: &str, param: f64) -> Result<Self> {
        let b = match name {
            "heat" => Baseline::Heat { sigma0: param },
            "barenblatt" => Baseline::Barenblatt { t0: param },
            "gibbs" => Baseline::Gibbs { radius: param },
            _ => {
                return Err(Error::InvalidArgument(alloc::format!(
                    "unknown baseline `{name}`"
                )))
            }
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let (what, v) = match *self {
            Baseline::Heat { sigma0 } => ("initial width", sigma0),
            Baseline::Barenblatt { t0 } => ("starting time", t0),
            Baseline::Gibbs { radius } => ("confinement radius", radius),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain { what, value: v });
        }
        Ok(())
    }

    pub fn energy(&self) -> InternalEnergy {
        match self {
            Baseline::Barenblatt { .. } => InternalEnergy::power(2.0, 1.0).unwrap(),
            _ => InternalEnergy::entropy(),
        }
    }

    pub fn interaction(&self) -> InteractionSpec {
        match *self {
            Baseline::Gibbs { radius } => InteractionSpec::new(
                alloc::vec![alloc::vec![crate::interaction::Kernel::Zero]],
                alloc::vec![ExternalPotential::Confining { radius }],
            )
            .unwrap(),
            _ => InteractionSpec::none(1),
        }
    }

    pub fn system(&self, grid: Grid) -> Result<SpeciesSystem> {
        self.validate()?;
        grid.require_1d()?;
        SpeciesSystem::new(grid, alloc::vec![self.energy()], self.interaction())
    }

    /// Cell averages of the analytic solution at time `t`, normalized on the
    /// box.
    pub fn exact(&self, grid: &Grid, t: f64) -> Result<Density> {
        self.validate()?;
        grid.require_1d()?;
        let values = match *self {
            Baseline::Heat { sigma0 } => {
                let s = math::sqrt(sigma0 * sigma0 + 2.0 * t);
                return grid::gaussian_density(grid, [0.0, 0.0], s);
            }
            Baseline::Barenblatt { t0 } => {
                let tau = 12.0 * (t + t0);
                let b = barenblatt_height();
                let front = math::sqrt(b) * math::powf(tau, 1.0 / 3.0);
                let s = math::powf(tau, -1.0 / 3.0);
                cell_averages_1d(grid, |x| {
                    let x = x.clamp(-front, front);
                    s * (b * x - x * x * x * s * s / 3.0)
                })
            }
            Baseline::Gibbs { radius } => {
                let u = ExternalPotential::Confining { radius };
                let dx = grid.spacing(0);
                // composite Simpson on 16 panels per cell
                let panels = 16;
                let w = dx / panels as f64;
                grid.edges_1d()
                    .windows(2)
                    .map(|e| {
                        let f = |x: f64| math::exp(-u.value([x, 0.0]));
                        let mut acc = 0.0;
                        for p in 0..panels {
                            let a = e[0] + p as f64 * w;
                            acc += w / 6.0 * (f(a) + 4.0 * f(a + 0.5 * w) + f(a + w));
                        }
                        acc / dx
                    })
                    .collect()
            }
        };
        Density::normalized(*grid, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub name: &'static str,
    /// L¹ error at the final time.
    pub l1_error: f64,
    /// W₂ error at the final time.
    pub w2_error: f64,
    /// Largest W₂ distance between a level and the analytic solution.
    pub max_w2_error: f64,
    pub epsilon: Option<f64>,
    pub trajectory: Trajectory,
}

/// Runs `baseline` on `grid` and measures the error against the analytic
/// solution.
pub fn closed_form_baseline(
    baseline: Baseline,
    grid: Grid,
    h: f64,
    t_end: f64,
    solver: Solver,
) -> Result<BaselineReport> {
    let sys = baseline.system(grid)?;
    let start = alloc::vec![baseline.exact(&grid, 0.0)?];
    let traj = jko::run_scheme(&sys, &start, h, t_end, solver)?;
    let mut max_w2: f64 = 0.0;
    let mut last = (0.0, 0.0);
    for k in 1..=traj.len() {
        let exact = baseline.exact(&grid, k as f64 * h)?;
        let rho = traj.density(k, 0);
        let w2 = transport::w2_exact_1d(rho, &exact)?.distance();
        max_w2 = max_w2.max(w2);
        if k == traj.len() {
            last = (rho.l1_distance(&exact)?, w2);
        }
    }
    Ok(BaselineReport {
        name: baseline.name(),
        l1_error: last.0,
        w2_error: last.1,
        max_w2_error: max_w2,
        epsilon: traj.epsilon(),
        trajectory: traj,
    })
}
