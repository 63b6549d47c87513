//! Interaction potentials `Vᵢ[ρ] = Uᵢ + Σⱼ Wᵢⱼ ∗ ρⱼ`.
//!
//! Kernels and external potentials are evaluated analytically, so their
//! derivative bounds are exact and certified at construction.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{self, same_grid, Density, KernelTable, OffsetKernel, ScalarField, VectorField};
use crate::math;
use crate::transport;

/// Radially symmetric, nonnegative interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Zero,
    /// `W ≡ A`.
    Constant {
        amplitude: f64,
    },
    /// `W(z) = A exp(−|z|²/2σ²)`.
    Gaussian {
        amplitude: f64,
        sigma: f64,
    },
}

impl Kernel {
    pub fn constant(amplitude: f64) -> Result<Self> {
        let k = Kernel::Constant { amplitude };
        k.validate()?;
        Ok(k)
    }

    pub fn gaussian(amplitude: f64, sigma: f64) -> Result<Self> {
        let k = Kernel::Gaussian { amplitude, sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Zero => Ok(()),
            Kernel::Constant { amplitude } => check_amplitude(amplitude),
            Kernel::Gaussian { amplitude, sigma } => {
                check_amplitude(amplitude)?;
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidKernel(format!(
                        "width must be positive, got {sigma}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Kernel::Zero => true,
            Kernel::Constant { amplitude } | Kernel::Gaussian { amplitude, .. } => amplitude == 0.0,
        }
    }

    pub fn value(&self, z: [f64; 2]) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Constant { amplitude } => amplitude,
            Kernel::Gaussian { amplitude, sigma } => {
                amplitude * math::exp(-(z[0] * z[0] + z[1] * z[1]) / (2.0 * sigma * sigma))
            }
        }
    }

    pub fn gradient(&self, z: [f64; 2]) -> [f64; 2] {
        match *self {
            Kernel::Gaussian { sigma, .. } => {
                let s = -self.value(z) / (sigma * sigma);
                [s * z[0], s * z[1]]
            }
            _ => [0.0, 0.0],
        }
    }

    /// `W''(z)` along the first axis (1-D use).
    pub fn second_derivative_1d(&self, z: f64) -> f64 {
        match *self {
            Kernel::Gaussian { sigma, .. } => {
                let s2 = sigma * sigma;
                self.value([z, 0.0]) * (z * z / (s2 * s2) - 1.0 / s2)
            }
            _ => 0.0,
        }
    }

    /// `‖∇W‖_∞`.
    pub fn gradient_bound(&self) -> f64 {
        match *self {
            Kernel::Gaussian { amplitude, sigma } => amplitude * math::exp(-0.5) / sigma,
            _ => 0.0,
        }
    }

    /// `‖D²W‖_∞` (operator norm), attained at the origin for the Gaussian.
    pub fn hessian_bound(&self) -> f64 {
        match *self {
            Kernel::Gaussian { amplitude, sigma } => amplitude / (sigma * sigma),
            _ => 0.0,
        }
    }
}

impl OffsetKernel for Kernel {
    fn at_offset(&self, offset: [f64; 2]) -> f64 {
        self.value(offset)
    }
}

fn check_amplitude(a: f64) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidKernel(format!(
            "amplitude must be nonnegative, got {a}"
        )));
    }
    Ok(())
}

/// Density-independent potential `Uᵢ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExternalPotential {
    Zero,
    /// Quadratic well `|x|²/2` continued linearly beyond `|x| = R`:
    /// `U(x) = min(|x|²/2, R²/2 + R(|x| − R))`.
    Confining {
        radius: f64,
    },
}

impl ExternalPotential {
    pub fn confining(radius: f64) -> Result<Self> {
        let u = ExternalPotential::Confining { radius };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if let ExternalPotential::Confining { radius } = *self {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidKernel(format!(
                    "confinement radius must be positive, got {radius}"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            ExternalPotential::Zero => 0.0,
            ExternalPotential::Confining { radius } => {
                let r = math::sqrt(x[0] * x[0] + x[1] * x[1]);
                if r <= radius {
                    0.5 * r * r
                } else {
                    0.5 * radius * radius + radius * (r - radius)
                }
            }
        }
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            ExternalPotential::Zero => [0.0, 0.0],
            ExternalPotential::Confining { radius } => {
                let r = math::sqrt(x[0] * x[0] + x[1] * x[1]);
                if r <= radius {
                    x
                } else {
                    [radius * x[0] / r, radius * x[1] / r]
                }
            }
        }
    }

    /// `U''(x)` in 1-D.
    pub fn second_derivative_1d(&self, x: f64) -> f64 {
        match *self {
            ExternalPotential::Confining { radius } if x.abs() <= radius => 1.0,
            _ => 0.0,
        }
    }

    pub fn gradient_bound(&self) -> f64 {
        match *self {
            ExternalPotential::Zero => 0.0,
            ExternalPotential::Confining { radius } => radius,
        }
    }

    pub fn hessian_bound(&self) -> f64 {
        match *self {
            ExternalPotential::Zero => 0.0,
            ExternalPotential::Confining { .. } => 1.0,
        }
    }
}

/// Kernel matrix and external potentials for `l` species.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    count: usize,
    kernels: Vec<Kernel>,
    external: Vec<ExternalPotential>,
}

/// Outcome of [`InteractionSpec::certify_hypotheses`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub c_lip: f64,
    pub c_hess: f64,
    /// `‖∇Vᵢ[ν] − ∇Vᵢ[σ]‖_∞ / W₂(ν, σ)` for every species and kept pair.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// `C_hess √n + C_hess Δx`.
    pub bound: f64,
    /// Pairs skipped because `W₂ = 0`.
    pub skipped: usize,
    /// Every assembled potential was nonnegative.
    pub nonnegative: bool,
    /// Regularization used for W₂ on 2-D grids, if any.
    pub epsilon: Option<f64>,
    pub pass: bool,
}

impl InteractionSpec {
    /// `kernels[i][j]` is `Wᵢⱼ`; `external[i]` is `Uᵢ`.
    pub fn new(kernels: Vec<Vec<Kernel>>, external: Vec<ExternalPotential>) -> Result<Self> {
        let count = external.len();
        if count == 0 {
            return Err(Error::InvalidKernel("no species".into()));
        }
        if kernels.len() != count || kernels.iter().any(|row| row.len() != count) {
            return Err(Error::InvalidKernel(format!(
                "kernel matrix must be {count}×{count}"
            )));
        }
        for k in kernels.iter().flatten() {
            k.validate()?;
        }
        for u in &external {
            u.validate()?;
        }
        Ok(Self {
            count,
            kernels: kernels.into_iter().flatten().collect(),
            external,
        })
    }

    /// No interaction at all.
    pub fn none(count: usize) -> Self {
        Self {
            count,
            kernels: alloc::vec![Kernel::Zero; count * count],
            external: alloc::vec![ExternalPotential::Zero; count],
        }
    }

    pub fn species_count(&self) -> usize {
        self.count
    }

    pub fn kernel(&self, i: usize, j: usize) -> Kernel {
        self.kernels[i * self.count + j]
    }

    pub fn external(&self, i: usize) -> ExternalPotential {
        self.external[i]
    }

    /// Whether species `i` feels any potential.
    pub fn is_trivial(&self, i: usize) -> bool {
        self.external[i] == ExternalPotential::Zero && (0..self.count).all(|j| self.kernel(i, j).is_zero())
    }

    /// `max_i (‖∇Uᵢ‖ + Σⱼ ‖∇Wᵢⱼ‖)`.
    pub fn c_lip(&self) -> f64 {
        (0..self.count)
            .map(|i| {
                self.external[i].gradient_bound()
                    + (0..self.count)
                        .map(|j| self.kernel(i, j).gradient_bound())
                        .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `max_i (‖D²Uᵢ‖ + Σⱼ ‖D²Wᵢⱼ‖)`.
    pub fn c_hess(&self) -> f64 {
        (0..self.count)
            .map(|i| {
                self.external[i].hessian_bound()
                    + (0..self.count)
                        .map(|j| self.kernel(i, j).hessian_bound())
                        .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `C_lip + C_hess`, the constant bounding `‖∇V‖ + ‖D²V‖`.
    pub fn c_cert(&self) -> f64 {
        self.c_lip() + self.c_hess()
    }

    fn check(&self, i: usize, rho: &[Density]) -> Result<()> {
        if i >= self.count {
            return Err(Error::SpeciesOutOfRange {
                index: i,
                count: self.count,
            });
        }
        if rho.len() != self.count {
            return Err(Error::InvalidArgument(format!(
                "{} densities for {} species",
                rho.len(),
                self.count
            )));
        }
        for r in &rho[1..] {
            same_grid(rho[0].grid(), r.grid())?;
        }
        Ok(())
    }

    /// `Vᵢ[ρ](x_c) = Uᵢ(x_c) + Σⱼ (Wᵢⱼ ∗ ρⱼ)(x_c)`.
    pub fn assemble_potential(&self, i: usize, rho: &[Density]) -> Result<ScalarField> {
        self.check(i, rho)?;
        let g = *rho[0].grid();
        let u = self.external[i];
        let mut values: Vec<f64> = (0..g.len()).map(|c| u.value(g.center(c))).collect();
        for (j, r) in rho.iter().enumerate() {
            match self.kernel(i, j) {
                Kernel::Zero => {}
                Kernel::Constant { amplitude } => {
                    let m = r.mass();
                    values.iter_mut().for_each(|v| *v += amplitude * m);
                }
                k @ Kernel::Gaussian { .. } => {
                    let conv = KernelTable::new(&k, &g).convolve(r)?;
                    values.iter_mut().zip(conv.values()).for_each(|(v, c)| *v += c);
                }
            }
        }
        ScalarField::new(g, values)
    }

    /// `∇Vᵢ[ρ]` at cell centres, from the analytic kernel gradients.
    pub fn potential_gradient(&self, i: usize, rho: &[Density]) -> Result<VectorField> {
        self.check(i, rho)?;
        let g = *rho[0].grid();
        let u = self.external[i];
        let mut values: Vec<[f64; 2]> = (0..g.len()).map(|c| u.gradient(g.center(c))).collect();
        for (j, r) in rho.iter().enumerate() {
            let k = self.kernel(i, j);
            if !matches!(k, Kernel::Gaussian { .. }) {
                continue;
            }
            let masses = r.cell_masses();
            for (c, out) in values.iter_mut().enumerate() {
                let x = g.center(c);
                for (d, m) in masses.iter().enumerate() {
                    if *m == 0.0 {
                        continue;
                    }
                    let y = g.center(d);
                    let gr = k.gradient([x[0] - y[0], x[1] - y[1]]);
                    out[0] += gr[0] * m;
                    out[1] += gr[1] * m;
                }
            }
        }
        VectorField::new(g, values)
    }

    /// `𝓥ᵢ(ρ | μ) = ∫ Vᵢ[μ] ρ`.
    pub fn eval_interaction_functional(&self, i: usize, rho: &Density, mu: &[Density]) -> Result<f64> {
        let v = self.assemble_potential(i, mu)?;
        grid::integrate(&v, rho)
    }

    /// `Vᵢ[ρ]` as a function of position on a 1-D grid, for solvers that
    /// move mass off the cell centres.
    pub fn frozen_1d(&self, i: usize, rho: &[Density]) -> Result<FrozenPotential> {
        self.check(i, rho)?;
        let g = *rho[0].grid();
        g.require_1d()?;
        let nodes = g.edges_1d();
        let mut values = alloc::vec![0.0; nodes.len()];
        let mut slopes = alloc::vec![0.0; nodes.len()];
        let mut has_table = false;
        for (j, r) in rho.iter().enumerate() {
            match self.kernel(i, j) {
                Kernel::Zero => {}
                Kernel::Constant { amplitude } => {
                    let m = r.mass();
                    values.iter_mut().for_each(|v| *v += amplitude * m);
                    has_table = true;
                }
                k @ Kernel::Gaussian { .. } => {
                    has_table = true;
                    let masses = r.cell_masses();
                    for (n, x) in nodes.iter().enumerate() {
                        for (c, m) in masses.iter().enumerate() {
                            if *m == 0.0 {
                                continue;
                            }
                            let z = x - g.center_1d(0, c);
                            values[n] += k.value([z, 0.0]) * m;
                            slopes[n] += k.gradient([z, 0.0])[0] * m;
                        }
                    }
                }
            }
        }
        Ok(FrozenPotential {
            external: self.external[i],
            lower: g.lower(0),
            dx: g.spacing(0),
            values: if has_table { values } else { Vec::new() },
            slopes,
        })
    }

    /// Checks nonnegativity and the W₂-Lipschitz bound on `∇Vᵢ` over trial
    /// pairs; each density of a pair is used for every species.
    pub fn certify_hypotheses(&self, pairs: &[(Density, Density)]) -> Result<Certification> {
        if pairs.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "certification needs at least 3 trial pairs, got {}",
                pairs.len()
            )));
        }
        let (c_lip, c_hess) = (self.c_lip(), self.c_hess());
        let g = *pairs[0].0.grid();
        let n = g.dim() as f64;
        let epsilon = (g.dim() == 2).then(|| g.max_spacing() * g.max_spacing());
        let mut tol = c_hess * g.max_spacing();
        if let Some(eps) = epsilon {
            tol += c_hess * math::sqrt(eps);
        }
        let bound = c_hess * math::sqrt(n) + tol;
        let mut ratios = Vec::new();
        let mut skipped = 0;
        let mut nonnegative = true;
        for (a, b) in pairs {
            same_grid(&g, a.grid())?;
            same_grid(&g, b.grid())?;
            let va = alloc::vec![a.clone(); self.count];
            let vb = alloc::vec![b.clone(); self.count];
            let w2 = match epsilon {
                None => transport::w2_exact_1d(a, b)?.distance(),
                Some(eps) => {
                    let d = transport::sinkhorn_divergence(a, b, eps, transport::DEFAULT_TOL, 100_000)?;
                    math::sqrt(d.max(0.0))
                }
            };
            for i in 0..self.count {
                for v in [&va, &vb] {
                    let pot = self.assemble_potential(i, v)?;
                    nonnegative &= pot.values().iter().all(|&x| x >= 0.0);
                }
            }
            if w2 <= 1e-14 {
                skipped += 1;
                continue;
            }
            for i in 0..self.count {
                let ga = self.potential_gradient(i, &va)?;
                let gb = self.potential_gradient(i, &vb)?;
                let diff = ga
                    .values()
                    .iter()
                    .zip(gb.values())
                    .map(|(p, q)| math::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1])))
                    .fold(0.0, f64::max);
                ratios.push(diff / w2);
            }
        }
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        Ok(Certification {
            c_lip,
            c_hess,
            pass: nonnegative && max_ratio <= bound && c_lip.is_finite() && c_hess.is_finite(),
            ratios,
            max_ratio,
            bound,
            skipped,
            nonnegative,
            epsilon,
        })
    }
}

/// A frozen 1-D potential `x ↦ Vᵢ[ρ](x)`.
///
/// The external part is exact; the convolution part is a cubic Hermite
/// interpolant of the exact values and slopes at the cell edges, so it is
/// C¹ with accuracy `O(Δx⁴)`.
#[derive(Debug, Clone)]
pub struct FrozenPotential {
    external: ExternalPotential,
    lower: f64,
    dx: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl FrozenPotential {
    /// Whether the potential vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.external == ExternalPotential::Zero && self.values.is_empty()
    }

    /// `(V, V', V'')` at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let u = self.external;
        let mut out = [
            u.value([x, 0.0]),
            u.gradient([x, 0.0])[0],
            u.second_derivative_1d(x),
        ];
        if self.values.is_empty() {
            return out;
        }
        let last = self.values.len() - 2;
        let pos = (x - self.lower) / self.dx;
        let k = if pos <= 0.0 {
            0
        } else {
            (math::floor(pos) as usize).min(last)
        };
        let t = pos - k as f64;
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k] * self.dx, self.slopes[k + 1] * self.dx);
        let (t2, t3) = (t * t, t * t * t);
        out[0] += (2.0 * t3 - 3.0 * t2 + 1.0) * v0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * v1
            + (t3 - t2) * d1;
        out[1] += ((6.0 * t2 - 6.0 * t) * v0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * v1
            + (3.0 * t2 - 2.0 * t) * d1)
            / self.dx;
        out[2] +=
            ((12.0 * t - 6.0) * v0 + (6.0 * t - 4.0) * d0 + (-12.0 * t + 6.0) * v1 + (6.0 * t - 2.0) * d1)
                / (self.dx * self.dx);
        out
    }
}

/// Convenience: `Vᵢ` for every species.
pub fn assemble_all(spec: &InteractionSpec, rho: &[Density]) -> Result<Vec<ScalarField>> {
    (0..spec.species_count())
        .map(|i| spec.assemble_potential(i, rho))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cell_averages_1d, discrete_gradient, integrate, Grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new_1d(-4.0, 4.0, 64).unwrap()
    }

    fn random_density(g: Grid, rng: &mut ChaCha8Rng) -> Density {
        let v: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>()).collect();
        Density::normalized(g, v).unwrap()
    }

    fn gaussian_density(g: Grid, m: f64, s: f64) -> Density {
        let v = cell_averages_1d(&g, |x| 0.5 * libm::erf((x - m) / (s * core::f64::consts::SQRT_2)));
        Density::normalized(g, v).unwrap()
    }

    fn gaussian_pair() -> InteractionSpec {
        let k = Kernel::gaussian(1.0, 1.0).unwrap();
        InteractionSpec::new(
            alloc::vec![
                alloc::vec![k, Kernel::gaussian(0.5, 0.7).unwrap()],
                alloc::vec![Kernel::Zero, k]
            ],
            alloc::vec![
                ExternalPotential::Zero,
                ExternalPotential::confining(2.0).unwrap()
            ],
        )
        .unwrap()
    }

    #[test]
    fn construction_rejects_bad_specs() {
        assert!(Kernel::gaussian(-1.0, 1.0).is_err());
        assert!(Kernel::gaussian(1.0, 0.0).is_err());
        assert!(Kernel::constant(f64::NAN).is_err());
        assert!(ExternalPotential::confining(0.0).is_err());
        assert!(InteractionSpec::new(alloc::vec![alloc::vec![Kernel::Zero]], alloc::vec![]).is_err());
        assert!(InteractionSpec::new(
            alloc::vec![alloc::vec![Kernel::Gaussian {
                amplitude: -1.0,
                sigma: 1.0
            }]],
            alloc::vec![ExternalPotential::Zero]
        )
        .is_err());
    }

    #[test]
    fn trivial_specs() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = random_density(g, &mut rng);
        let zero = InteractionSpec::none(1);
        assert!(
            zero.assemble_potential(0, std::slice::from_ref(&r))
                .unwrap()
                .max_abs()
                == 0.0
        );
        assert_eq!(
            zero.eval_interaction_functional(0, &r, std::slice::from_ref(&r))
                .unwrap(),
            0.0
        );
        let c = InteractionSpec::new(
            alloc::vec![alloc::vec![Kernel::constant(2.5).unwrap()]],
            alloc::vec![ExternalPotential::Zero],
        )
        .unwrap();
        let v = c.assemble_potential(0, std::slice::from_ref(&r)).unwrap();
        assert!(v.values().iter().all(|x| (x - 2.5).abs() < 1e-12));
        assert!(
            (c.eval_interaction_functional(0, &r, std::slice::from_ref(&r))
                .unwrap()
                - 2.5)
                .abs()
                < 1e-12
        );
        assert!(matches!(
            zero.assemble_potential(1, &[r]),
            Err(Error::SpeciesOutOfRange { index: 1, count: 1 })
        ));
    }

    #[test]
    fn point_mass_convolution() {
        let g = grid();
        let spec = InteractionSpec::new(
            alloc::vec![alloc::vec![Kernel::gaussian(1.3, 0.8).unwrap()]],
            alloc::vec![ExternalPotential::Zero],
        )
        .unwrap();
        let x0 = g.center_1d(0, 20);
        let v = spec
            .assemble_potential(0, &[Density::point_mass(g, 20).unwrap()])
            .unwrap();
        let k = spec.kernel(0, 0);
        for c in 0..g.len() {
            let exact = 1.3 * libm::exp(-(g.center_1d(0, c) - x0).powi(2) / (2.0 * 0.64));
            assert!((v.values()[c] - exact).abs() <= g.spacing(0) * k.gradient_bound() + 1e-12);
        }
    }

    #[test]
    fn functional_matches_double_sum() {
        let g = grid();
        let spec = gaussian_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(g, &mut rng);
        let mu = alloc::vec![random_density(g, &mut rng), random_density(g, &mut rng)];
        let w = g.cell_volume();
        for i in 0..2 {
            let mut oracle = 0.0;
            for x in 0..g.len() {
                let xc = g.center_1d(0, x);
                oracle += spec.external(i).value([xc, 0.0]) * rho.values()[x] * w;
                for j in 0..2 {
                    for y in 0..g.len() {
                        let z = xc - g.center_1d(0, y);
                        oracle +=
                            spec.kernel(i, j).value([z, 0.0]) * rho.values()[x] * mu[j].values()[y] * w * w;
                    }
                }
            }
            let got = spec.eval_interaction_functional(i, &rho, &mu).unwrap();
            assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
            assert!(got >= 0.0);
        }
    }

    #[test]
    fn analytic_constants() {
        let spec = InteractionSpec::new(
            alloc::vec![alloc::vec![Kernel::gaussian(1.0, 1.0).unwrap()]],
            alloc::vec![ExternalPotential::Zero],
        )
        .unwrap();
        assert!((spec.c_lip() - 0.6065306597126334).abs() < 1e-15);
        assert_eq!(spec.c_hess(), 1.0);
        let zero = InteractionSpec::none(2);
        assert_eq!((zero.c_lip(), zero.c_hess()), (0.0, 0.0));
        // constants are the maxima of |W'| and |W''| on a fine sample
        let k = Kernel::gaussian(2.0, 0.6).unwrap();
        let (mut g1, mut g2) = (0.0f64, 0.0f64);
        for i in 0..=200_000 {
            let z = -5.0 + i as f64 * 5e-5;
            g1 = g1.max(k.gradient([z, 0.0])[0].abs());
            g2 = g2.max(k.second_derivative_1d(z).abs());
        }
        assert!((g1 - k.gradient_bound()).abs() < 1e-8);
        assert!((g2 - k.hessian_bound()).abs() < 1e-8);
    }

    #[test]
    fn certification_zero_and_gaussian() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<(Density, Density)> = (0..4)
            .map(|_| (random_density(g, &mut rng), random_density(g, &mut rng)))
            .collect();
        let zero = InteractionSpec::none(1).certify_hypotheses(&pairs).unwrap();
        assert!(zero.pass && zero.max_ratio == 0.0 && zero.c_lip == 0.0);
        let cert = gaussian_pair().certify_hypotheses(&pairs).unwrap();
        assert!(cert.pass, "{cert:?}");
        assert!(InteractionSpec::none(1).certify_hypotheses(&pairs[..2]).is_err());
        let same = alloc::vec![(pairs[0].0.clone(), pairs[0].0.clone()); 3];
        assert_eq!(
            InteractionSpec::none(1)
                .certify_hypotheses(&same)
                .unwrap()
                .skipped,
            3
        );
    }

    #[test]
    fn translated_pair_ratio_below_hessian_bound() {
        let g = Grid::new_1d(-6.0, 6.0, 240).unwrap();
        let spec = InteractionSpec::new(
            alloc::vec![alloc::vec![Kernel::gaussian(1.0, 0.5).unwrap()]],
            alloc::vec![ExternalPotential::Zero],
        )
        .unwrap();
        let pairs: Vec<(Density, Density)> = [0.2, 0.5, 1.0]
            .iter()
            .map(|&a| {
                (
                    gaussian_density(g, -a / 2.0, 0.4),
                    gaussian_density(g, a / 2.0, 0.4),
                )
            })
            .collect();
        let cert = spec.certify_hypotheses(&pairs).unwrap();
        for r in &cert.ratios {
            assert!(*r <= spec.c_hess() + 1e-6, "{r}");
        }
    }

    #[test]
    fn potential_gradient_close_to_discrete_gradient() {
        let g = Grid::new_1d(-4.0, 4.0, 256).unwrap();
        let spec = gaussian_pair();
        let rho = alloc::vec![gaussian_density(g, 0.3, 0.6), gaussian_density(g, -0.5, 0.9)];
        for i in 0..2 {
            let v = spec.assemble_potential(i, &rho).unwrap();
            let dg = discrete_gradient(&v);
            let ag = spec.potential_gradient(i, &rho).unwrap();
            assert!(dg.max_norm() <= spec.c_lip() + g.spacing(0));
            for c in 1..g.len() - 1 {
                assert!(
                    (dg.values()[c][0] - ag.values()[c][0]).abs()
                        < 5.0 * g.spacing(0).powi(2) * (1.0 + spec.c_hess())
                );
            }
        }
    }

    #[test]
    fn frozen_potential_interpolates() {
        let g = Grid::new_1d(-4.0, 4.0, 64).unwrap();
        let spec = gaussian_pair();
        let rho = alloc::vec![gaussian_density(g, 0.3, 0.6), gaussian_density(g, -0.5, 0.9)];
        for i in 0..2 {
            let f = spec.frozen_1d(i, &rho).unwrap();
            let v = spec.assemble_potential(i, &rho).unwrap();
            for c in 0..g.len() {
                assert!((f.eval(g.center_1d(0, c))[0] - v.values()[c]).abs() < 1e-6);
            }
            // slope consistent with values
            let h = 1e-6;
            for x in [-3.1, -0.2, 0.77, 2.9] {
                let fd = (f.eval(x + h)[0] - f.eval(x - h)[0]) / (2.0 * h);
                assert!((fd - f.eval(x)[1]).abs() < 1e-6);
            }
        }
        assert!(InteractionSpec::none(1)
            .frozen_1d(0, &rho[..1])
            .unwrap()
            .is_zero());
    }

    proptest! {
        #[test]
        fn assembly_is_linear_and_nonnegative(seed in 0u64..5000, t in 0.0f64..1.0) {
            let g = Grid::new_1d(-2.0, 2.0, 24).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = gaussian_pair();
            let a = random_density(g, &mut rng);
            let b = random_density(g, &mut rng);
            let other = random_density(g, &mut rng);
            let mix: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| (1.0 - t) * x + t * y).collect();
            let mix = Density::new(g, mix).unwrap();
            for i in 0..2 {
                let va = spec.assemble_potential(i, &[a.clone(), other.clone()]).unwrap();
                let vb = spec.assemble_potential(i, &[b.clone(), other.clone()]).unwrap();
                let vm = spec.assemble_potential(i, &[mix.clone(), other.clone()]).unwrap();
                for c in 0..g.len() {
                    let lin = (1.0 - t) * va.values()[c] + t * vb.values()[c];
                    prop_assert!((vm.values()[c] - lin).abs() < 1e-12);
                    prop_assert!(vm.values()[c] >= 0.0);
                }
                prop_assert!(integrate(&vm, &mix).unwrap() >= 0.0);
            }
        }
    }
}
