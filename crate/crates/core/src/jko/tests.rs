use super::*;
use crate::energy::InternalEnergy;
use crate::interaction::{ExternalPotential, Kernel};
use crate::transport::w2_exact_1d;
use alloc::vec;
use proptest::prelude::*;

fn gaussian(g: Grid, mean: f64, s: f64) -> Density {
    let v = g
        .centers_1d()
        .iter()
        .map(|x| math::exp(-(x - mean) * (x - mean) / (2.0 * s * s)))
        .collect();
    Density::normalized(g, v).unwrap()
}

fn heat(cells: usize) -> SpeciesSystem {
    let g = Grid::new_1d(-4.0, 4.0, cells).unwrap();
    SpeciesSystem::new(g, vec![InternalEnergy::entropy()], InteractionSpec::none(1)).unwrap()
}

fn gibbs(cells: usize) -> SpeciesSystem {
    let g = Grid::new_1d(-8.0, 8.0, cells).unwrap();
    let spec = InteractionSpec::new(
        vec![vec![Kernel::Zero]],
        vec![ExternalPotential::confining(5.0).unwrap()],
    )
    .unwrap();
    SpeciesSystem::new(g, vec![InternalEnergy::entropy()], spec).unwrap()
}

#[test]
fn system_rejects_mismatched_counts() {
    let g = Grid::new_1d(0.0, 1.0, 8).unwrap();
    assert!(SpeciesSystem::new(g, vec![InternalEnergy::entropy()], InteractionSpec::none(2)).is_err());
}

#[test]
fn exact_solver_needs_1d() {
    let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
    let sys = SpeciesSystem::new(g, vec![InternalEnergy::entropy()], InteractionSpec::none(1)).unwrap();
    let r = [Density::uniform(g)];
    assert!(matches!(
        jko_step(&sys, &r, 0, 0.1, Solver::exact1d()),
        Err(Error::DimensionUnsupported { .. })
    ));
}

#[test]
fn step_count_rounds_up() {
    assert_eq!(step_count(0.1, 1.0), 10);
    assert_eq!(step_count(0.3, 1.0), 4);
    assert_eq!(step_count(2.0, 1.0), 1);
}

#[test]
fn heat_step_spreads_second_moment() {
    // for the heat flow d/dt ∫x²ρ = 2
    let sys = heat(160);
    let r0 = [gaussian(*sys.grid(), 0.0, 0.5)];
    let h = 0.01;
    let (r1, rec) = jko_step(&sys, &r0, 0, h, Solver::exact1d()).unwrap();
    let growth = grid::second_moment(&r1) - grid::second_moment(&r0[0]);
    assert!((growth - 2.0 * h).abs() < 0.05 * 2.0 * h, "{growth}");
    assert!(rec.dissipation_holds());
    assert!(rec.energy < sys.energy(0).functional(&r0[0]));
    assert!((r1.mass() - 1.0).abs() < 1e-12);
    assert!((rec.renormalization - 1.0).abs() < 1e-9);
}

#[test]
fn exact_and_entropic_steps_agree() {
    let sys = heat(64);
    let r0 = [gaussian(*sys.grid(), 0.3, 0.6)];
    let h = 0.05;
    let (a, _) = jko_step(&sys, &r0, 0, h, Solver::exact1d()).unwrap();
    let (b, rec) = jko_step(&sys, &r0, 0, h, Solver::entropic(None)).unwrap();
    assert!(rec.dissipation_holds());
    assert!(a.l1_distance(&b).unwrap() < 0.05);
}

#[test]
fn exact_step_matches_increment() {
    let sys = heat(80);
    let r0 = [gaussian(*sys.grid(), -0.5, 0.4)];
    let (r1, rec) = jko_step(&sys, &r0, 0, 0.02, Solver::exact1d()).unwrap();
    let grid_w2 = w2_exact_1d(&r0[0], &r1).unwrap().cost;
    assert!((grid_w2 - rec.w2_increment).abs() < 0.1 * rec.w2_increment + 1e-6);
}

#[test]
fn gibbs_state_is_nearly_stationary() {
    let sys = gibbs(256);
    let g = *sys.grid();
    let v: Vec<f64> = g
        .centers_1d()
        .iter()
        .map(|&x| math::exp(-ExternalPotential::confining(5.0).unwrap().value([x, 0.0])))
        .collect();
    let rho = [Density::normalized(g, v).unwrap()];
    let (r1, rec) = jko_step(&sys, &rho, 0, 0.1, Solver::exact1d()).unwrap();
    assert!(rho[0].l1_distance(&r1).unwrap() < 1e-3);
    assert!(rec.w2_increment < 1e-6);
}

#[test]
fn residual_is_small_for_exact_steps() {
    let sys = gibbs(256);
    let r0 = [gaussian(*sys.grid(), 1.0, 0.7)];
    let h = 0.05;
    let (r1, _) = jko_step(&sys, &r0, 0, h, Solver::exact1d()).unwrap();
    let res = optimality_residual(&sys, &r0, &r1, 0, h, Solver::exact1d()).unwrap();
    let dx = sys.grid().spacing(0);
    assert!(
        res <= 5.0 * (dx + 1e-10) * sys.interaction().c_lip().max(1.0),
        "{res}"
    );
    assert!(matches!(
        optimality_residual(&sys, &r0, &r1, 0, h, Solver::entropic(None)),
        Err(Error::NotAvailable(_))
    ));
}

#[test]
fn trajectory_interpolation() {
    let sys = heat(40);
    let r0 = vec![gaussian(*sys.grid(), 0.0, 0.5)];
    let traj = run_scheme(&sys, &r0, 0.1, 0.3, Solver::exact1d()).unwrap();
    assert_eq!(traj.len(), 3);
    assert!((traj.end_time() - 0.3).abs() < 1e-12);
    assert_eq!(traj.interpolate(0.0, 0).unwrap(), &r0[0]);
    assert_eq!(traj.interpolate(0.05, 0).unwrap(), traj.density(1, 0));
    assert_eq!(traj.interpolate(0.1, 0).unwrap(), traj.density(1, 0));
    assert_eq!(traj.interpolate(0.1000001, 0).unwrap(), traj.density(2, 0));
    assert_eq!(traj.interpolate(0.3, 0).unwrap(), traj.density(3, 0));
    assert!(matches!(
        traj.interpolate(0.31, 0),
        Err(Error::TimeOutOfRange { .. })
    ));
    assert!(traj.interpolate(0.1, 1).is_err());
    assert!(traj.interpolate(-1.0, 0).is_err());
}

#[test]
fn two_species_share_the_frozen_potential() {
    let g = Grid::new_1d(-4.0, 4.0, 64).unwrap();
    let k = Kernel::gaussian(0.5, 0.5).unwrap();
    let spec = InteractionSpec::new(
        vec![vec![Kernel::Zero, k], vec![k, Kernel::Zero]],
        vec![ExternalPotential::confining(3.0).unwrap(); 2],
    )
    .unwrap();
    let sys = SpeciesSystem::new(
        g,
        vec![
            InternalEnergy::entropy(),
            InternalEnergy::power(2.0, 1.0).unwrap(),
        ],
        spec,
    )
    .unwrap();
    let r0 = vec![gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.5)];
    let traj = run_scheme(&sys, &r0, 0.05, 0.2, Solver::exact1d()).unwrap();
    for step in traj.steps() {
        for rec in &step.records {
            assert!(rec.converged && rec.dissipation_holds());
        }
    }
    // species updates are independent: a single step reproduces the run
    let (a, _) = jko_step(&sys, &r0, 1, 0.05, Solver::exact1d()).unwrap();
    assert!(a.l1_distance(traj.density(1, 1)).unwrap() < 1e-12);
}

#[test]
fn failures_abort_or_are_recorded() {
    let sys = heat(32);
    let r0 = vec![gaussian(*sys.grid(), 0.0, 0.5)];
    let solver = Solver::Entropic {
        epsilon: None,
        tol: 1e-14,
        max_iter: 2,
    };
    let err = run_scheme(&sys, &r0, 0.1, 0.2, solver).unwrap_err();
    assert!(matches!(
        err,
        Error::StepFailed {
            step: 1,
            species: 0,
            ..
        }
    ));
    let traj = run_scheme_with(&sys, &r0, 0.1, 0.2, solver, RunOptions { best_effort: true }).unwrap();
    assert_eq!(traj.len(), 2);
    assert!(!traj.steps()[0].records[0].converged);
    assert_eq!(traj.density(2, 0), &r0[0]);
}

#[test]
fn entropic_runs_in_2d() {
    let g = Grid::new_2d([-2.0, -2.0], [2.0, 2.0], [12, 12]).unwrap();
    let sys = SpeciesSystem::new(g, vec![InternalEnergy::entropy()], InteractionSpec::none(1)).unwrap();
    let v = (0..g.len())
        .map(|c| {
            let x = g.center(c);
            math::exp(-(x[0] * x[0] + x[1] * x[1]) / 0.5)
        })
        .collect();
    let r0 = vec![Density::normalized(g, v).unwrap()];
    let traj = run_scheme(&sys, &r0, 0.1, 0.2, Solver::entropic(None)).unwrap();
    let rec = &traj.steps()[1].records[0];
    assert!(rec.dissipation_holds());
    assert!(rec.energy < sys.energy(0).functional(&r0[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_steps_dissipate(h in 1e-3f64..0.2, mean in -1.0f64..1.0, s in 0.3f64..1.0) {
        let sys = gibbs(96);
        let r0 = vec![gaussian(*sys.grid(), mean, s)];
        let traj = run_scheme(&sys, &r0, h, 3.0 * h, Solver::exact1d()).unwrap();
        for (k, step) in traj.steps().iter().enumerate() {
            let rec = &step.records[0];
            prop_assert!(rec.dissipation_holds());
            prop_assert!((step.densities[0].mass() - 1.0).abs() < 1e-12);
            prop_assert!(step.densities[0].values().iter().all(|&v| v >= 0.0));
            let prev = traj.density(k, 0);
            let e_prev = sys.free_energy(0, prev, traj.level(k)).unwrap();
            prop_assert!(rec.energy + rec.interaction <= e_prev + 1e-6);
        }
    }
}

#[test]
fn vanishing_step_returns_the_previous_density() {
    let sys = heat(64);
    let r0 = [gaussian(*sys.grid(), 0.2, 0.5)];
    let (r1, _) = jko_step(&sys, &r0, 0, 1e-8, Solver::exact1d()).unwrap();
    assert!(r1.l1_distance(&r0[0]).unwrap() < 1e-6);
}

/// Implicit Euler for `u_t = u_xx` with no-flux walls: `(I − hΔ) u = ρ`.
fn implicit_euler_heat(rho: &Density, h: f64) -> Vec<f64> {
    let g = rho.grid();
    let n = g.len();
    let k = h / (g.spacing(0) * g.spacing(0));
    let mut diag = vec![1.0 + 2.0 * k; n];
    diag[0] = 1.0 + k;
    diag[n - 1] = 1.0 + k;
    let off = vec![-k; n - 1];
    math::solve_spd_tridiagonal(&diag, &off, rho.values()).unwrap()
}

#[test]
fn heat_step_matches_implicit_euler() {
    let mut errs = Vec::new();
    for (cells, h) in [(80, 4e-3), (160, 1e-3), (320, 2.5e-4)] {
        let sys = heat(cells);
        let r0 = [gaussian(*sys.grid(), 0.0, 0.5)];
        let (r1, _) = jko_step(&sys, &r0, 0, h, Solver::exact1d()).unwrap();
        let oracle = Density::normalized(*sys.grid(), implicit_euler_heat(&r0[0], h)).unwrap();
        let err = r1.l1_distance(&oracle).unwrap();
        let dx = sys.grid().spacing(0);
        assert!(err <= dx * dx + h * h, "{err}");
        errs.push(err);
    }
    assert!(errs[1] < 0.5 * errs[0] && errs[2] < 0.5 * errs[1]);
}

#[test]
fn uniform_density_has_zero_residual() {
    let g = Grid::new_1d(0.0, 1.0, 32).unwrap();
    let sys = SpeciesSystem::new(g, vec![InternalEnergy::entropy()], InteractionSpec::none(1)).unwrap();
    let r = [Density::uniform(g)];
    let res = optimality_residual(&sys, &r, &r[0], 0, 0.1, Solver::exact1d()).unwrap();
    assert!(res < 1e-12);
}

#[test]
fn uncoupled_species_evolve_independently() {
    let g = Grid::new_1d(-4.0, 4.0, 64).unwrap();
    let u = ExternalPotential::confining(2.0).unwrap();
    let pair = InteractionSpec::new(vec![vec![Kernel::Zero; 2]; 2], vec![u; 2]).unwrap();
    let single = InteractionSpec::new(vec![vec![Kernel::Zero]], vec![u]).unwrap();
    let e = [
        InternalEnergy::entropy(),
        InternalEnergy::power(2.0, 1.0).unwrap(),
    ];
    let both = SpeciesSystem::new(g, e.to_vec(), pair).unwrap();
    let r0 = vec![gaussian(g, -1.0, 0.5), gaussian(g, 1.0, 0.4)];
    let joint = run_scheme(&both, &r0, 0.02, 0.1, Solver::exact1d()).unwrap();
    for i in 0..2 {
        let alone = SpeciesSystem::new(g, vec![e[i]], single.clone()).unwrap();
        let solo = run_scheme(&alone, &r0[i..=i], 0.02, 0.1, Solver::exact1d()).unwrap();
        for (a, b) in joint.steps().iter().zip(solo.steps()) {
            assert_eq!(a.records[i], b.records[0]);
            assert_eq!(a.densities[i], b.densities[0]);
        }
    }
}

#[test]
fn short_horizon_gives_one_step() {
    let sys = heat(32);
    let r0 = vec![gaussian(*sys.grid(), 0.0, 0.5)];
    let traj = run_scheme(&sys, &r0, 0.1, 0.05, Solver::exact1d()).unwrap();
    assert_eq!(traj.len(), 1);
}
