//! Uniform cell-centred grids on a box, densities and discrete calculus.
//!
//! Cells are indexed row-major: in 2-D the flat index of cell `(i, j)` is
//! `i * cells[1] + j`, axis 0 varying slowest. Cell `j` on an axis has
//! centre `lower + (j + ½) Δx`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Boundary treatment of the box. Only the no-flux box is supported;
/// whole-space problems are approximated by a box large enough that the
/// walls carry negligible mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    NoFlux,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lower: [f64; 2],
    upper: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
    boundary: Boundary,
}

impl Grid {
    pub fn new_1d(lower: f64, upper: f64, cells: usize) -> Result<Self> {
        Self::build(1, [lower, 0.0], [upper, 1.0], [cells, 1])
    }

    pub fn new_2d(lower: [f64; 2], upper: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        Self::build(2, lower, upper, cells)
    }

    /// Generic constructor; `lower`, `upper`, `cells` must have `dim` entries.
    pub fn new(lower: &[f64], upper: &[f64], cells: &[usize]) -> Result<Self> {
        let dim = cells.len();
        if lower.len() != dim || upper.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "bounds have {} / {} entries for {} axes",
                lower.len(),
                upper.len(),
                dim
            )));
        }
        match dim {
            1 => Self::new_1d(lower[0], upper[0], cells[0]),
            2 => Self::new_2d([lower[0], lower[1]], [upper[0], upper[1]], [cells[0], cells[1]]),
            _ => Err(Error::InvalidGrid(format!("dimension {dim} not supported"))),
        }
    }

    fn build(dim: usize, lower: [f64; 2], upper: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        let mut spacing = [1.0; 2];
        for axis in 0..dim {
            if !(lower[axis].is_finite() && upper[axis].is_finite()) {
                return Err(Error::InvalidGrid(format!("non-finite bounds on axis {axis}")));
            }
            if cells[axis] == 0 {
                return Err(Error::InvalidGrid(format!("zero cells on axis {axis}")));
            }
            let dx = (upper[axis] - lower[axis]) / cells[axis] as f64;
            if !(dx > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "upper bound must exceed lower bound on axis {axis}"
                )));
            }
            spacing[axis] = dx;
        }
        Ok(Self {
            dim,
            lower,
            upper,
            cells,
            spacing,
            boundary: Boundary::NoFlux,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.upper[axis]
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lebesgue measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    /// Largest spacing over the axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing[..self.dim].iter().copied().fold(0.0, f64::max)
    }

    /// Centre coordinate of cell `j` along `axis`.
    pub fn center_1d(&self, axis: usize, j: usize) -> f64 {
        self.lower[axis] + (j as f64 + 0.5) * self.spacing[axis]
    }

    /// Centre of the cell with flat index `index`; unused axes are 0.
    pub fn center(&self, index: usize) -> [f64; 2] {
        let (i, j) = self.unflatten(index);
        if self.dim == 1 {
            [self.center_1d(0, i), 0.0]
        } else {
            [self.center_1d(0, i), self.center_1d(1, j)]
        }
    }

    /// All cell centres along axis 0 (the 1-D centres when `dim == 1`).
    pub fn centers_1d(&self) -> Vec<f64> {
        (0..self.cells[0]).map(|j| self.center_1d(0, j)).collect()
    }

    /// The `cells + 1` cell edges along axis 0.
    pub fn edges_1d(&self) -> Vec<f64> {
        let n = self.cells[0];
        (0..=n)
            .map(|j| {
                if j == n {
                    self.upper[0]
                } else {
                    self.lower[0] + j as f64 * self.spacing[0]
                }
            })
            .collect()
    }

    pub fn flatten(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            i * self.cells[1] + j
        }
    }

    pub fn unflatten(&self, index: usize) -> (usize, usize) {
        if self.dim == 1 {
            (index, 0)
        } else {
            (index / self.cells[1], index % self.cells[1])
        }
    }

    pub(crate) fn require_1d(&self) -> Result<()> {
        if self.dim != 1 {
            return Err(Error::DimensionUnsupported {
                expected: 1,
                found: self.dim,
            });
        }
        Ok(())
    }
}

/// A probability density, piecewise constant on the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: Grid,
    values: Vec<f64>,
}

/// Tolerated mass defect before a density is rejected.
pub const MASS_TOLERANCE: f64 = 1e-6;

impl Density {
    /// Validates values and rescales them to unit mass.
    ///
    /// Fails when a value is negative or non-finite, or when the discrete
    /// mass differs from one by more than [`MASS_TOLERANCE`].
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mass = Self::check_values(&grid, &values)?;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!("mass {mass} is not 1")));
        }
        Ok(Self::rescaled(grid, values, mass))
    }

    /// Builds a density from nonnegative weights of any positive mass.
    pub fn normalized(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mass = Self::check_values(&grid, &values)?;
        if !(mass > 0.0) {
            return Err(Error::InvalidDensity("zero total mass".into()));
        }
        Ok(Self::rescaled(grid, values, mass))
    }

    pub fn uniform(grid: Grid) -> Self {
        let v = 1.0 / (grid.len() as f64 * grid.cell_volume());
        Self {
            values: alloc::vec![v; grid.len()],
            grid,
        }
    }

    /// All mass in one cell.
    pub fn point_mass(grid: Grid, cell: usize) -> Result<Self> {
        if cell >= grid.len() {
            return Err(Error::InvalidArgument(format!("cell {cell} out of range")));
        }
        let mut values = alloc::vec![0.0; grid.len()];
        values[cell] = 1.0 / grid.cell_volume();
        Ok(Self { grid, values })
    }

    fn check_values(grid: &Grid, values: &[f64]) -> Result<f64> {
        if values.len() != grid.len() {
            return Err(Error::InvalidDensity(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some((c, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidDensity(format!("value {v} in cell {c}")));
        }
        Ok(values.iter().sum::<f64>() * grid.cell_volume())
    }

    fn rescaled(grid: Grid, mut values: Vec<f64>, mass: f64) -> Self {
        if mass != 1.0 {
            let s = 1.0 / mass;
            values.iter_mut().for_each(|v| *v *= s);
        }
        Self { grid, values }
    }

    /// Rescales arbitrary nonnegative values to unit mass, returning the
    /// applied factor. Used by solvers to absorb round-off mass drift.
    pub(crate) fn renormalize(grid: Grid, mut values: Vec<f64>) -> (Self, f64) {
        for v in values.iter_mut() {
            if !(*v > 0.0) {
                *v = 0.0;
            }
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        let factor = 1.0 / mass;
        values.iter_mut().for_each(|v| *v *= factor);
        (Self { grid, values }, factor)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Mass carried by each cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let w = self.grid.cell_volume();
        self.values.iter().map(|v| v * w).collect()
    }

    /// L¹ distance to another density on the same grid.
    pub fn l1_distance(&self, other: &Density) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume())
    }
}

/// Scalar value per cell (potentials, pressures, test functions).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            values: alloc::vec![c; grid.len()],
            grid,
        }
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|c| f(grid.center(c))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One vector per cell; the second component is zero on 1-D grids.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, v: [f64; 2]) -> Self {
        Self {
            values: alloc::vec![v; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn component(&self, axis: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[axis]).collect()
    }

    /// Euclidean norm in cell `c`.
    pub fn norm_at(&self, c: usize) -> f64 {
        let [a, b] = self.values[c];
        math::sqrt(a * a + b * b)
    }

    /// `max_c |v_c|` with the Euclidean norm per cell.
    pub fn max_norm(&self) -> f64 {
        (0..self.values.len()).fold(0.0, |m, c| m.max(self.norm_at(c)))
    }
}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `Σ_c f_c ρ_c |cell|`, the pairing `∫ f ρ` under midpoint quadrature.
pub fn integrate(f: &ScalarField, rho: &Density) -> Result<f64> {
    same_grid(&f.grid, &rho.grid)?;
    Ok(f.values.iter().zip(&rho.values).map(|(a, b)| a * b).sum::<f64>() * rho.grid.cell_volume())
}

/// Second moment `∫ |x|² ρ`.
pub fn second_moment(rho: &Density) -> f64 {
    let g = &rho.grid;
    rho.values
        .iter()
        .enumerate()
        .map(|(c, v)| {
            let [x, y] = g.center(c);
            (x * x + y * y) * v
        })
        .sum::<f64>()
        * g.cell_volume()
}

/// Central differences inside, first-order one-sided differences on the
/// boundary cells. Exact for affine fields. An axis with a single cell has
/// zero derivative.
pub fn discrete_gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let mut out = alloc::vec![[0.0; 2]; g.len()];
    for axis in 0..g.dim() {
        let n = g.cells(axis);
        if n < 2 {
            continue;
        }
        let dx = g.spacing(axis);
        for (c, slot) in out.iter_mut().enumerate() {
            let (i, j) = g.unflatten(c);
            let pos = if axis == 0 { i } else { j };
            let at = |p: usize| {
                let idx = if axis == 0 {
                    g.flatten(p, j)
                } else {
                    g.flatten(i, p)
                };
                f.values[idx]
            };
            slot[axis] = if pos == 0 {
                (at(1) - at(0)) / dx
            } else if pos == n - 1 {
                (at(n - 1) - at(n - 2)) / dx
            } else {
                (at(pos + 1) - at(pos - 1)) / (2.0 * dx)
            };
        }
    }
    VectorField { grid: g, values: out }
}

/// A translation-invariant kernel `W(x − y)` evaluated at an offset.
pub trait OffsetKernel {
    fn at_offset(&self, offset: [f64; 2]) -> f64;
}

impl<F: Fn([f64; 2]) -> f64> OffsetKernel for F {
    fn at_offset(&self, offset: [f64; 2]) -> f64 {
        self(offset)
    }
}

/// `(W ∗ ρ)(x_c) = Σ_{c'} W(x_c − x_{c'}) ρ_{c'} |cell|` by direct summation.
///
/// The box is not periodised: mass outside the box does not exist, so the
/// sum runs over the box cells only.
pub fn convolve<K: OffsetKernel + ?Sized>(kernel: &K, rho: &Density) -> ScalarField {
    let g = rho.grid;
    let w = g.cell_volume();
    let values = (0..g.len())
        .map(|c| {
            let xc = g.center(c);
            rho.values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(d, v)| {
                    let xd = g.center(d);
                    kernel.at_offset([xc[0] - xd[0], xc[1] - xd[1]]) * v
                })
                .sum::<f64>()
                * w
        })
        .collect();
    ScalarField { grid: g, values }
}

/// Offset table `W(k Δx)` for all whole-cell offsets `k` in
/// `-(n-1)..=(n-1)` per axis.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid,
    table: Vec<f64>,
    width: [usize; 2],
}

impl KernelTable {
    pub fn new<K: OffsetKernel + ?Sized>(kernel: &K, grid: &Grid) -> Self {
        let n0 = grid.cells(0);
        let n1 = if grid.dim() == 2 { grid.cells(1) } else { 1 };
        let width = [2 * n0 - 1, 2 * n1 - 1];
        let mut table = Vec::with_capacity(width[0] * width[1]);
        for a in 0..width[0] {
            let k0 = a as f64 - (n0 - 1) as f64;
            for b in 0..width[1] {
                let k1 = b as f64 - (n1 - 1) as f64;
                let off = if grid.dim() == 2 {
                    [k0 * grid.spacing(0), k1 * grid.spacing(1)]
                } else {
                    [k0 * grid.spacing(0), 0.0]
                };
                table.push(kernel.at_offset(off));
            }
        }
        Self {
            grid: *grid,
            table,
            width,
        }
    }

    /// Convolution against the tabulated kernel; same result as
    /// [`convolve`] up to round-off in the offsets.
    pub fn convolve(&self, rho: &Density) -> Result<ScalarField> {
        same_grid(&self.grid, &rho.grid)?;
        let g = self.grid;
        let (n0, n1) = (g.cells(0), if g.dim() == 2 { g.cells(1) } else { 1 });
        let w = g.cell_volume();
        let mut values = alloc::vec![0.0; g.len()];
        for (c, out) in values.iter_mut().enumerate() {
            let (i, j) = g.unflatten(c);
            let mut acc = 0.0;
            for d in 0..g.len() {
                let v = rho.values[d];
                if v == 0.0 {
                    continue;
                }
                let (p, q) = g.unflatten(d);
                let a = i + n0 - 1 - p;
                let b = j + n1 - 1 - q;
                acc += self.table[a * self.width[1] + b] * v;
            }
            *out = acc * w;
        }
        Ok(ScalarField { grid: g, values })
    }
}

/// Convolution through a [`KernelTable`] built on the fly.
pub fn convolve_tabulated<K: OffsetKernel + ?Sized>(kernel: &K, rho: &Density) -> ScalarField {
    KernelTable::new(kernel, &rho.grid)
        .convolve(rho)
        .expect("table built on the density grid")
}

/// Cell averages of `∫ f` over each cell of a 1-D grid, given the
/// antiderivative `cdf`.
pub fn cell_averages_1d(grid: &Grid, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    let edges = grid.edges_1d();
    let dx = grid.spacing(0);
    edges.windows(2).map(|e| (cdf(e[1]) - cdf(e[0])) / dx).collect()
}

/// Gaussian of standard deviation `sigma` centred at `mean`, as exact cell
/// averages (a product of 1-D averages in 2-D), normalized on the box.
pub fn gaussian_density(grid: &Grid, mean: [f64; 2], sigma: f64) -> Result<Density> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "gaussian width",
            value: sigma,
        });
    }
    let s = math::sqrt(2.0) * sigma;
    let axis = |a: usize| {
        let g = Grid::new_1d(grid.lower(a), grid.upper(a), grid.cells(a)).unwrap();
        cell_averages_1d(&g, |x| 0.5 * math::erf((x - mean[a]) / s))
    };
    let values = if grid.dim() == 1 {
        axis(0)
    } else {
        let (ax, ay) = (axis(0), axis(1));
        (0..grid.len())
            .map(|c| {
                let (i, j) = grid.unflatten(c);
                ax[i] * ay[j]
            })
            .collect()
    };
    Density::normalized(*grid, values)
}

/// Index of the cell containing coordinate `x` on axis `axis`, clamped to
/// the box.
pub fn cell_of(grid: &Grid, axis: usize, x: f64) -> usize {
    let t = math::floor((x - grid.lower(axis)) / grid.spacing(axis));
    if t < 0.0 {
        0
    } else {
        (t as usize).min(grid.cells(axis) - 1)
    }
}

/// Adds mass `m` spread uniformly over `[a, b]` to the cells of `g`.
pub(crate) fn deposit_uniform_1d(g: &Grid, masses: &mut [f64], a: f64, b: f64, m: f64) {
    let width = b - a;
    if width <= 1e-14 * g.spacing(0) {
        masses[cell_of(g, 0, 0.5 * (a + b))] += m;
        return;
    }
    let (first, last) = (cell_of(g, 0, a), cell_of(g, 0, b));
    let edges = |c: usize| {
        let l = g.lower(0) + c as f64 * g.spacing(0);
        (l, l + g.spacing(0))
    };
    for c in first..=last {
        let (l, r) = edges(c);
        let overlap = b.min(r) - a.max(l);
        if overlap > 0.0 {
            masses[c] += m * overlap / width;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::new_1d(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn spacing_and_centers() {
        let g = Grid::new_1d(-1.0, 3.0, 8).unwrap();
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.center_1d(0, 0), -0.75);
        assert_eq!(g.center_1d(0, 7), 2.75);
        assert_eq!(g.edges_1d().len(), 9);
        assert!(Grid::new_1d(1.0, 1.0, 4).is_err());
        assert!(Grid::new_1d(0.0, 1.0, 0).is_err());
        let g2 = Grid::new_2d([0.0, 0.0], [1.0, 2.0], [4, 8]).unwrap();
        assert_eq!(g2.len(), 32);
        assert_eq!(g2.cell_volume(), 0.25 * 0.25);
        assert_eq!(g2.center(g2.flatten(1, 2)), [0.375, 0.625]);
    }

    #[test]
    fn density_validation() {
        let g = unit_grid(4);
        assert!(Density::new(g, vec![1.0, 1.0, 1.0, -0.1]).is_err());
        assert!(Density::new(g, vec![1.0, 1.0, 1.0, f64::NAN]).is_err());
        assert!(Density::new(g, vec![2.0, 2.0, 2.0, 2.0]).is_err());
        let near = Density::new(g, vec![1.0 + 1e-7, 1.0, 1.0, 1.0]).unwrap();
        assert!((near.mass() - 1.0).abs() < 1e-15);
        let d = Density::normalized(g, vec![3.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-15);
        assert!(Density::normalized(g, vec![0.0; 4]).is_err());
    }

    #[test]
    fn integrate_constants_and_linear() {
        let g = unit_grid(64);
        let rho = Density::uniform(g);
        let one = ScalarField::constant(g, 1.0);
        assert!((integrate(&one, &rho).unwrap() - 1.0).abs() < 1e-12);
        let c = ScalarField::constant(g, -2.5);
        assert!((integrate(&c, &rho).unwrap() + 2.5).abs() < 1e-12);
        let x = ScalarField::from_fn(g, |p| p[0]);
        assert!((integrate(&x, &rho).unwrap() - 0.5).abs() < 1e-12);
        let other = ScalarField::constant(unit_grid(32), 1.0);
        assert_eq!(integrate(&other, &rho), Err(Error::GridMismatch));
    }

    #[test]
    fn second_moment_cases() {
        let g = Grid::new_1d(-1.0, 1.0, 101).unwrap();
        let atom = Density::point_mass(g, 50).unwrap();
        assert!(second_moment(&atom).abs() < 1e-24);

        let n = 128;
        let u = Density::uniform(unit_grid(n));
        let dx = 1.0 / n as f64;
        assert!((second_moment(&u) - 1.0 / 3.0).abs() <= dx * dx);
    }

    #[test]
    fn second_moment_shift_identity() {
        // M(ρ(·−a)) = M(ρ) + 2a·mean + a², shifting by whole cells.
        let g = Grid::new_1d(-2.0, 2.0, 40).unwrap();
        let mut vals = vec![0.0; 40];
        for (j, v) in vals.iter_mut().enumerate().take(22).skip(10) {
            *v = 1.0 + (j as f64 * 0.7).sin().abs();
        }
        let rho = Density::normalized(g, vals.clone()).unwrap();
        let shift = 5;
        let mut shifted = vec![0.0; 40];
        shifted[shift..].copy_from_slice(&vals[..40 - shift]);
        let mu = Density::normalized(g, shifted).unwrap();
        let a = shift as f64 * g.spacing(0);
        let mean = integrate(&ScalarField::from_fn(g, |p| p[0]), &rho).unwrap();
        let lhs = second_moment(&mu) - second_moment(&rho);
        assert!((lhs - (a * a + 2.0 * a * mean)).abs() < 1e-12);
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = unit_grid(16);
        let c = discrete_gradient(&ScalarField::constant(g, 3.0));
        assert!(c.max_norm() == 0.0);
        let lin = discrete_gradient(&ScalarField::from_fn(g, |p| 2.0 * p[0] - 1.0));
        for v in lin.values() {
            assert!((v[0] - 2.0).abs() < 1e-12);
        }
        let g2 = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [5, 7]).unwrap();
        let aff = discrete_gradient(&ScalarField::from_fn(g2, |p| 3.0 * p[0] - 0.5 * p[1] + 1.0));
        for v in aff.values() {
            assert!((v[0] - 3.0).abs() < 1e-12 && (v[1] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_second_order_interior() {
        // Taylor: central difference of x² is exact, so interior error is
        // round-off only; the one-sided boundary stencils are O(Δx).
        let g = unit_grid(64);
        let dx = g.spacing(0);
        let grad = discrete_gradient(&ScalarField::from_fn(g, |p| p[0] * p[0]));
        for j in 1..63 {
            let x = g.center_1d(0, j);
            assert!((grad.values()[j][0] - 2.0 * x).abs() <= dx * dx);
        }
        assert!((grad.values()[0][0] - 2.0 * g.center_1d(0, 0)).abs() <= 1.01 * dx);
        // x³: interior error is exactly Δx².
        let cub = discrete_gradient(&ScalarField::from_fn(g, |p| p[0] * p[0] * p[0]));
        for j in 1..63 {
            let x = g.center_1d(0, j);
            assert!((cub.values()[j][0] - 3.0 * x * x).abs() <= 1.0001 * dx * dx);
        }
    }

    #[test]
    fn convolution_basic_cases() {
        let g = Grid::new_1d(-2.0, 2.0, 32).unwrap();
        let rho = Density::uniform(g);
        let field = convolve(&|_: [f64; 2]| 0.7, &rho);
        for v in field.values() {
            assert!((v - 0.7).abs() < 1e-12);
        }
        let atom = Density::point_mass(g, 10).unwrap();
        let x0 = g.center_1d(0, 10);
        let w = |o: [f64; 2]| libm::exp(-o[0] * o[0]);
        let field = convolve(&w, &atom);
        for (c, v) in field.values().iter().enumerate() {
            let x = g.center_1d(0, c);
            assert!((v - libm::exp(-(x - x0) * (x - x0))).abs() < 1e-14);
        }
    }

    #[test]
    fn tabulated_matches_direct() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = Grid::new_1d(-3.0, 3.0, 50).unwrap();
        let vals: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let rho = Density::normalized(g, vals).unwrap();
        let w = |o: [f64; 2]| 1.3 * libm::exp(-(o[0] * o[0]) / (2.0 * 0.4 * 0.4));
        let a = convolve(&w, &rho);
        let b = convolve_tabulated(&w, &rho);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-10);
        }

        let g2 = Grid::new_2d([-1.0, -1.0], [1.0, 1.5], [9, 11]).unwrap();
        let vals: Vec<f64> = (0..g2.len()).map(|_| rng.gen::<f64>()).collect();
        let rho = Density::normalized(g2, vals).unwrap();
        let w2 = |o: [f64; 2]| libm::exp(-(o[0] * o[0] + o[1] * o[1]) / 0.5);
        let a = convolve(&w2, &rho);
        let b = convolve_tabulated(&w2, &rho);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn convolution_commutes_with_whole_cell_translation() {
        let g = Grid::new_1d(-4.0, 4.0, 64).unwrap();
        let mut vals = vec![0.0; 64];
        for (j, v) in vals.iter_mut().enumerate().take(30).skip(20) {
            *v = (j - 19) as f64;
        }
        let rho = Density::normalized(g, vals.clone()).unwrap();
        let s = 6;
        let mut shifted = vec![0.0; 64];
        shifted[s..].copy_from_slice(&vals[..64 - s]);
        let mu = Density::normalized(g, shifted).unwrap();
        let w = |o: [f64; 2]| libm::exp(-o[0] * o[0]);
        let a = convolve(&w, &rho);
        let b = convolve(&w, &mu);
        for j in 0..64 - s {
            assert!((a.values()[j] - b.values()[j + s]).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_cell_averages_have_the_right_moments() {
        let g = Grid::new_1d(-6.0, 6.0, 240).unwrap();
        let d = gaussian_density(&g, [0.5, 0.0], 0.7).unwrap();
        let mean: f64 = d
            .cell_masses()
            .iter()
            .zip(g.centers_1d())
            .map(|(m, x)| m * x)
            .sum();
        assert!((mean - 0.5).abs() < 1e-12);
        // cell averaging adds Δx²/12 to the variance at the centres
        let var = second_moment(&d) - mean * mean;
        assert!((var - (0.49 + g.spacing(0).powi(2) / 12.0)).abs() < 1e-9, "{var}");
        let g2 = Grid::new_2d([-3.0, -3.0], [3.0, 3.0], [20, 30]).unwrap();
        let d2 = gaussian_density(&g2, [0.0, 1.0], 0.5).unwrap();
        assert!((d2.mass() - 1.0).abs() < 1e-12);
        assert!(gaussian_density(&g, [0.0, 0.0], 0.0).is_err());
    }
}
