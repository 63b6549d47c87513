//! Run configuration (TOML). Unknown keys are rejected.
//!
//! ```toml
//! [grid]
//! lower = [-4.0]
//! upper = [4.0]
//! cells = [256]
//!
//! [[species]]
//! energy = "entropy"
//! initial = { profile = "gaussian", mean = [0.0], sigma = 0.3 }
//!
//! [scheme]
//! h = 2e-3
//! T = 0.25
//! solver = "exact1d"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use gradflow_core::diagnostics::Baseline;
use gradflow_core::grid::{cell_of, gaussian_density};
use gradflow_core::{
    Density, ExternalPotential, Grid, InteractionSpec, InternalEnergy, Kernel, Solver, SpeciesSystem,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::output;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub species: Vec<SpeciesConfig>,
    #[serde(default)]
    pub interaction: InteractionConfig,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    pub baseline: Option<BaselineConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyName {
    Entropy,
    Power,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub name: Option<String>,
    pub energy: EnergyName,
    /// Exponent, power energies only.
    pub m: Option<f64>,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    pub initial: InitialConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian {
        mean: Vec<f64>,
        sigma: f64,
    },
    /// Uniform on a box, one `[lo, hi]` per axis.
    Uniform {
        support: Vec<[f64; 2]>,
    },
    /// `(1 − |x − center|²/radius²)₊²` at cell centres.
    Bump {
        center: Vec<f64>,
        radius: f64,
    },
    Barenblatt {
        t0: f64,
    },
    Gibbs {
        radius: f64,
    },
    /// All mass in the cell containing `at`.
    Point {
        at: Vec<f64>,
    },
    /// A snapshot file, relative to the config file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Zero,
    Constant { amplitude: f64 },
    Gaussian { amplitude: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Confining { radius: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    /// `kernels[i][j]` is `Wᵢⱼ`; omitted means no interaction.
    pub kernels: Option<Vec<Vec<KernelConfig>>>,
    /// One per species; omitted means none.
    pub external: Option<Vec<PotentialConfig>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Exact1d,
    Entropic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub h: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverName,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_solver() -> SolverName {
    SolverName::Exact1d
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("output")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

/// Analytic reference for a single-species run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// `heat`, `barenblatt` or `gibbs`.
    pub name: String,
    /// `σ₀`, `t₀` or the confinement radius.
    pub parameter: f64,
    /// Bound on the final L¹ error.
    pub l1_tolerance: Option<f64>,
    /// Bound on the largest W₂ error over the run.
    pub w2_tolerance: Option<f64>,
}

/// A configuration turned into solver objects.
#[derive(Debug, Clone)]
pub struct Setup {
    pub system: SpeciesSystem,
    pub initial: Vec<Density>,
    pub names: Vec<String>,
    pub solver: Solver,
    pub h: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    pub baseline: Option<(Baseline, BaselineConfig)>,
}

impl Setup {
    pub fn grid(&self) -> &Grid {
        self.system.grid()
    }

    pub fn writes(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Reads and builds a config file; relative paths inside it resolve against
/// its directory, except the output directory, which resolves against the
/// working directory.
pub fn load(path: &Path) -> CliResult<Setup> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    cfg.build(base)
}

impl RunConfig {
    pub fn build(&self, base: &Path) -> CliResult<Setup> {
        let g = &self.grid;
        let grid = Grid::new(&g.lower, &g.upper, &g.cells)?;
        let l = self.species.len();
        if l == 0 {
            return Err(bad("at least one [[species]] is required"));
        }
        let energies = self
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| energy(s).map_err(|e| bad(format!("species {i}: {e}"))))
            .collect::<CliResult<Vec<_>>>()?;
        let interaction = self.interaction.build(l)?;
        let system = SpeciesSystem::new(grid, energies, interaction)?;
        let initial = self
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| {
                initial(&s.initial, &grid, base).map_err(|e| bad(format!("species {i} initial data: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let names = self
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| s.name.clone().unwrap_or_else(|| format!("species{i}")))
            .collect();
        let sc = &self.scheme;
        if !(sc.h > 0.0 && sc.h.is_finite()) {
            return Err(bad(format!("scheme.h must be positive, got {}", sc.h)));
        }
        if !(sc.t_end >= sc.h && sc.t_end.is_finite()) {
            return Err(bad(format!("scheme.T must be at least h, got {}", sc.t_end)));
        }
        if sc.record_every == 0 {
            return Err(bad("scheme.record_every must be at least 1"));
        }
        let solver = match sc.solver {
            SolverName::Exact1d => {
                if sc.epsilon.is_some() {
                    return Err(bad("scheme.epsilon applies to the entropic solver only"));
                }
                if grid.dim() != 1 {
                    return Err(bad("the exact1d solver needs a 1-D grid"));
                }
                Solver::Exact1d {
                    tol: sc.tol.unwrap_or(1e-10),
                }
            }
            SolverName::Entropic => {
                let Solver::Entropic { tol, max_iter, .. } = Solver::entropic(None) else {
                    unreachable!()
                };
                Solver::Entropic {
                    epsilon: sc.epsilon,
                    tol: sc.tol.unwrap_or(tol),
                    max_iter: sc.max_iter.unwrap_or(max_iter),
                }
            }
        };
        for (what, v) in [
            ("scheme.tol", Some(solver.tolerance())),
            ("scheme.epsilon", sc.epsilon),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(bad(format!("{what} must be positive, got {v}")));
                }
            }
        }
        if self.outputs.formats.is_empty() {
            return Err(bad("outputs.formats is empty"));
        }
        let baseline = match &self.baseline {
            None => None,
            Some(b) => Some((self.check_baseline(b, &system, &initial)?, b.clone())),
        };
        Ok(Setup {
            system,
            initial,
            names,
            solver,
            h: sc.h,
            t_end: sc.t_end,
            record_every: sc.record_every,
            directory: self.outputs.directory.clone(),
            formats: self.outputs.formats.clone(),
            baseline,
        })
    }

    fn check_baseline(
        &self,
        b: &BaselineConfig,
        sys: &SpeciesSystem,
        initial: &[Density],
    ) -> CliResult<Baseline> {
        let baseline = Baseline::from_name(&b.name, b.parameter)?;
        if sys.species_count() != 1 || sys.grid().dim() != 1 {
            return Err(bad("baselines are single-species 1-D problems"));
        }
        if *sys.energy(0) != baseline.energy() || *sys.interaction() != baseline.interaction() {
            return Err(bad(format!(
                "energy or interaction do not match the {} baseline",
                baseline.name()
            )));
        }
        let start = baseline.exact(sys.grid(), 0.0)?;
        if start.l1_distance(&initial[0])? > 1e-9 {
            return Err(bad(format!(
                "initial data do not match the {} baseline at t = 0",
                baseline.name()
            )));
        }
        for (what, v) in [("l1_tolerance", b.l1_tolerance), ("w2_tolerance", b.w2_tolerance)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(bad(format!("baseline.{what} must be positive, got {v}")));
                }
            }
        }
        Ok(baseline)
    }
}

fn energy(s: &SpeciesConfig) -> Result<InternalEnergy, String> {
    let e = match (s.energy, s.m) {
        (EnergyName::Entropy, None) => InternalEnergy::entropy(),
        (EnergyName::Entropy, Some(_)) => return Err("`m` is only used by power energies".into()),
        (EnergyName::Power, None) => return Err("power energy needs `m`".into()),
        (EnergyName::Power, Some(m)) => InternalEnergy::power(m, s.c).map_err(|e| e.to_string())?,
    };
    if s.energy == EnergyName::Entropy && s.c != 1.0 {
        return Err("`c` is only used by power energies".into());
    }
    e.with_alpha(s.alpha).map_err(|e| e.to_string())
}

impl InteractionConfig {
    fn build(&self, l: usize) -> CliResult<InteractionSpec> {
        let kernels = match &self.kernels {
            None => vec![vec![Kernel::Zero; l]; l],
            Some(rows) => {
                if rows.len() != l || rows.iter().any(|r| r.len() != l) {
                    return Err(bad(format!("interaction.kernels must be {l}×{l}")));
                }
                rows.iter()
                    .map(|r| r.iter().map(|k| k.build()).collect::<CliResult<Vec<_>>>())
                    .collect::<CliResult<Vec<_>>>()?
            }
        };
        let external = match &self.external {
            None => vec![ExternalPotential::Zero; l],
            Some(v) => {
                if v.len() != l {
                    return Err(bad(format!("interaction.external needs {l} entries")));
                }
                v.iter().map(|p| p.build()).collect::<CliResult<Vec<_>>>()?
            }
        };
        Ok(InteractionSpec::new(kernels, external)?)
    }
}

impl KernelConfig {
    fn build(&self) -> CliResult<Kernel> {
        Ok(match *self {
            KernelConfig::Zero => Kernel::Zero,
            KernelConfig::Constant { amplitude } => Kernel::constant(amplitude)?,
            KernelConfig::Gaussian { amplitude, sigma } => Kernel::gaussian(amplitude, sigma)?,
        })
    }
}

impl PotentialConfig {
    fn build(&self) -> CliResult<ExternalPotential> {
        Ok(match *self {
            PotentialConfig::Zero => ExternalPotential::Zero,
            PotentialConfig::Confining { radius } => ExternalPotential::confining(radius)?,
        })
    }
}

fn point(v: &[f64], grid: &Grid, what: &str) -> Result<[f64; 2], String> {
    if v.len() != grid.dim() {
        return Err(format!("`{what}` needs {} coordinates", grid.dim()));
    }
    Ok([v[0], v.get(1).copied().unwrap_or(0.0)])
}

fn initial(cfg: &InitialConfig, grid: &Grid, base: &Path) -> Result<Density, String> {
    let d = match cfg {
        InitialConfig::Gaussian { mean, sigma } => gaussian_density(grid, point(mean, grid, "mean")?, *sigma),
        InitialConfig::Uniform { support } => {
            if support.len() != grid.dim() {
                return Err(format!("`support` needs {} intervals", grid.dim()));
            }
            let cover = |axis: usize, k: usize| {
                let [a, b] = support[axis];
                let lo = grid.lower(axis) + k as f64 * grid.spacing(axis);
                let hi = lo + grid.spacing(axis);
                (b.min(hi) - a.max(lo)).max(0.0)
            };
            if support.iter().any(|[a, b]| !(b > a)) {
                return Err("empty `support` interval".into());
            }
            let values = (0..grid.len())
                .map(|c| {
                    let (i, j) = grid.unflatten(c);
                    if grid.dim() == 1 {
                        cover(0, i)
                    } else {
                        cover(0, i) * cover(1, j)
                    }
                })
                .collect();
            Density::normalized(*grid, values)
        }
        InitialConfig::Bump { center, radius } => {
            let c = point(center, grid, "center")?;
            if !(*radius > 0.0) {
                return Err(format!("bump radius must be positive, got {radius}"));
            }
            let values = (0..grid.len())
                .map(|k| {
                    let x = grid.center(k);
                    let r2 = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (radius * radius);
                    (1.0 - r2).max(0.0).powi(2)
                })
                .collect();
            Density::normalized(*grid, values)
        }
        InitialConfig::Barenblatt { t0 } => {
            Baseline::from_name("barenblatt", *t0).and_then(|b| b.exact(grid, 0.0))
        }
        InitialConfig::Gibbs { radius } => {
            Baseline::from_name("gibbs", *radius).and_then(|b| b.exact(grid, 0.0))
        }
        InitialConfig::Point { at } => {
            let p = point(at, grid, "at")?;
            let i = cell_of(grid, 0, p[0]);
            let j = if grid.dim() == 2 {
                cell_of(grid, 1, p[1])
            } else {
                0
            };
            Density::point_mass(*grid, grid.flatten(i, j))
        }
        InitialConfig::File { path } => {
            let full = base.join(path);
            let d = output::read_snapshot(&full).map_err(|e| e.to_string())?;
            if d.grid() != grid {
                return Err(format!("{} was written on a different grid", full.display()));
            }
            Ok(d)
        }
    };
    d.map_err(|e| e.to_string())
}
