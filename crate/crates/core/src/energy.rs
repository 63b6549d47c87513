//! Internal energies `𝓕(ρ) = ∫ F(ρ)` of class 𝓗ₘ.
//!
//! Two families are provided:
//!
//! - entropy, `F(x) = α x log x` (m = 1), pressure `P(x) = α x`;
//! - power law, `F(x) = α c x^m / (m − 1)` (m > 1), pressure `P(x) = α c x^m`.
//!
//! The diffusion weight `α` is folded into `F`; every derived quantity
//! (derivatives, pressure, proximal map) therefore carries it.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Density;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    Entropy,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalEnergy {
    kind: EnergyKind,
    m: f64,
    c: f64,
    alpha: f64,
}

/// A convex energy density on `[0, ∞)` with its class-𝓗ₘ constants.
///
/// Implemented by [`InternalEnergy`]; test code implements it for energies
/// outside the class to exercise the checkers.
pub trait EnergyDensity {
    /// The exponent `m` of the class the energy claims to belong to.
    fn exponent(&self) -> f64;
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;
    /// `P(x) = x F'(x) − F(x)`.
    fn pressure(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        x * self.derivative(x) - self.value(x)
    }
    /// Certified `(C_lower, C_upper)` with `F'' ≥ C_lower x^{m−2}` and
    /// `P(x) ≤ C_upper (x + x^m)`.
    fn certified_constants(&self) -> (f64, f64);
}

impl InternalEnergy {
    pub fn new(kind: EnergyKind, m: f64, c: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidEnergy(alloc::format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        match kind {
            EnergyKind::Entropy => {
                if m != 1.0 {
                    return Err(Error::InvalidEnergy(alloc::format!(
                        "entropy requires m = 1, got {m}"
                    )));
                }
                Ok(Self {
                    kind,
                    m: 1.0,
                    c: 1.0,
                    alpha,
                })
            }
            EnergyKind::Power => {
                if !(m > 1.0 && m.is_finite()) {
                    return Err(Error::InvalidEnergy(alloc::format!(
                        "power law requires m > 1, got {m}"
                    )));
                }
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidEnergy(alloc::format!(
                        "power law requires c > 0, got {c}"
                    )));
                }
                Ok(Self { kind, m, c, alpha })
            }
        }
    }

    /// `x log x`.
    pub fn entropy() -> Self {
        Self {
            kind: EnergyKind::Entropy,
            m: 1.0,
            c: 1.0,
            alpha: 1.0,
        }
    }

    /// `c x^m / (m − 1)`.
    pub fn power(m: f64, c: f64) -> Result<Self> {
        Self::new(EnergyKind::Power, m, c, 1.0)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(self.kind, self.m, self.c, alpha)
    }

    pub fn kind(&self) -> EnergyKind {
        self.kind
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn check_nonneg(what: &'static str, x: f64) -> Result<()> {
        if !(x >= 0.0) {
            return Err(Error::Domain { what, value: x });
        }
        Ok(())
    }

    /// `F(x)`, rejecting negative arguments.
    pub fn eval_f(&self, x: f64) -> Result<f64> {
        Self::check_nonneg("energy argument", x)?;
        Ok(self.value(x))
    }

    /// `P(x)`, rejecting negative arguments.
    pub fn eval_pressure(&self, x: f64) -> Result<f64> {
        Self::check_nonneg("pressure argument", x)?;
        Ok(self.pressure(x))
    }

    /// `𝓕(ρ) = Σ_c F(ρ_c) |cell|`.
    pub fn functional(&self, rho: &Density) -> f64 {
        rho.values().iter().map(|&v| self.value(v)).sum::<f64>() * rho.grid().cell_volume()
    }

    /// Cell-wise KL proximal map
    /// `argmin_{s ≥ 0} τ F(s) + s log(s/z) − s + z`.
    pub fn kl_prox(&self, tau: f64, z: f64) -> Result<f64> {
        Self::check_nonneg("prox argument", z)?;
        if z == 0.0 {
            return Ok(0.0);
        }
        Ok(math::exp(self.kl_prox_log(tau, math::ln(z))?))
    }

    /// [`kl_prox`](Self::kl_prox) in log variables: maps `log z` to `log s`.
    ///
    /// The stationarity condition `τ F'(s) + log s − log z = 0` is strictly
    /// increasing in `u = log s`. The entropy case is solved in closed form;
    /// the power law uses Newton on `u`, safeguarded by bisection on a
    /// bracket `[u_lo, log z]`.
    pub fn kl_prox_log(&self, tau: f64, log_z: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::Domain {
                what: "prox step",
                value: tau,
            });
        }
        if log_z == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        if log_z.is_nan() || log_z == f64::INFINITY {
            return Err(Error::Domain {
                what: "prox log-argument",
                value: log_z,
            });
        }
        match self.kind {
            EnergyKind::Entropy => {
                let ta = tau * self.alpha;
                Ok((log_z - ta) / (1.0 + ta))
            }
            EnergyKind::Power => self.power_prox_log(tau, log_z),
        }
    }

    fn power_prox_log(&self, tau: f64, log_z: f64) -> Result<f64> {
        let k = self.alpha * self.c * self.m / (self.m - 1.0);
        let p = self.m - 1.0;
        let log_tk = math::ln(tau * k);
        // τ k e^{p u} = log z − u, taken in logs: φ is increasing and convex
        // on u < log z, so Newton from either side of the root is safe.
        let phi = |u: f64| p * u + log_tk - math::ln(log_z - u);
        let dphi = |u: f64| p + 1.0 / (log_z - u);

        let hi = log_z;
        let mut width = 1.0;
        let mut lo = log_z - width;
        while phi(lo) > 0.0 {
            width *= 2.0;
            lo = hi - width;
            if width > 1e12 {
                return Err(Error::NoConvergence {
                    solver: "kl_prox bracket",
                    iterations: 0,
                    residual: phi(lo),
                });
            }
        }
        let (mut a, mut b) = (lo, hi);
        let mut u = lo;
        for _ in 0..200 {
            let f = phi(u);
            if f.abs() * (1.0 + (log_z - u)) <= 1e-13 * (1.0 + log_z.abs()) {
                return Ok(u);
            }
            if f > 0.0 {
                b = u;
            } else {
                a = u;
            }
            let newton = u - f / dphi(u);
            u = if newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 1e-15 * (1.0 + u.abs()) {
                return Ok(u);
            }
        }
        Err(Error::NoConvergence {
            solver: "kl_prox",
            iterations: 200,
            residual: phi(u),
        })
    }
}

impl EnergyDensity for InternalEnergy {
    fn exponent(&self) -> f64 {
        self.m
    }

    fn value(&self, x: f64) -> f64 {
        match self.kind {
            EnergyKind::Entropy => self.alpha * math::xlogx(x),
            EnergyKind::Power => {
                if x <= 0.0 {
                    0.0
                } else {
                    self.alpha * self.c * math::powf(x, self.m) / (self.m - 1.0)
                }
            }
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            EnergyKind::Entropy => self.alpha * (math::ln(x) + 1.0),
            EnergyKind::Power => {
                if x <= 0.0 {
                    0.0
                } else {
                    self.alpha * self.c * self.m * math::powf(x, self.m - 1.0) / (self.m - 1.0)
                }
            }
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        match self.kind {
            EnergyKind::Entropy => self.alpha / x,
            EnergyKind::Power => self.alpha * self.c * self.m * math::powf(x, self.m - 2.0),
        }
    }

    fn pressure(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.kind {
            EnergyKind::Entropy => self.alpha * x,
            EnergyKind::Power => self.alpha * self.c * math::powf(x, self.m),
        }
    }

    fn certified_constants(&self) -> (f64, f64) {
        match self.kind {
            EnergyKind::Entropy => (self.alpha, self.alpha),
            EnergyKind::Power => (self.alpha * self.c * self.m, self.alpha * self.c),
        }
    }
}

/// Outcome of one pointwise inequality over the sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Sample with the largest (relative) violation, or the tightest one.
    pub worst_x: f64,
    /// Largest relative violation; nonpositive when the check passes.
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub samples: usize,
    pub certified_lower: Option<f64>,
    pub certified_upper: Option<f64>,
    /// Tightest constants supported by the samples.
    pub empirical_lower: Option<f64>,
    pub empirical_upper: Option<f64>,
    pub checks: Vec<InequalityCheck>,
    /// Conjunction of all check flags.
    pub pass: bool,
}

impl EnergyReport {
    fn finish(mut self) -> Self {
        self.pass = self.checks.iter().all(|c| c.pass);
        self
    }
}

const REL_TOL: f64 = 1e-12;

/// Verifies the 𝓗ₘ inequalities `F'' ≥ C x^{m−2}`, `P ≤ C (x + x^m)` and,
/// for m > 1, `F(0) = F'(0) = 0`, at every sample.
///
/// For m = 1 only the pressure bound is checked.
pub fn check_class_hm<E: EnergyDensity + ?Sized>(e: &E, samples: &[f64]) -> EnergyReport {
    let m = e.exponent();
    let (c_lo, c_up) = e.certified_constants();
    let mut checks = Vec::new();

    if m > 1.0 {
        let f0 = e.value(0.0);
        let df0 = e.derivative(0.0);
        checks.push(InequalityCheck {
            name: "F(0) = 0",
            pass: f0.abs() <= REL_TOL,
            worst_x: 0.0,
            worst_violation: f0.abs(),
        });
        checks.push(InequalityCheck {
            name: "F'(0) = 0",
            pass: df0.abs() <= REL_TOL,
            worst_x: 0.0,
            worst_violation: df0.abs(),
        });
    }

    let mut emp_lower = f64::INFINITY;
    let mut lower = InequalityCheck {
        name: "F'' >= C x^(m-2)",
        pass: true,
        worst_x: f64::NAN,
        worst_violation: f64::NEG_INFINITY,
    };
    let mut emp_upper: f64 = 0.0;
    let mut upper = InequalityCheck {
        name: "P <= C (x + x^m)",
        pass: true,
        worst_x: f64::NAN,
        worst_violation: f64::NEG_INFINITY,
    };
    for &x in samples {
        let xm2 = math::powf(x, m - 2.0);
        let ratio = e.second_derivative(x) / xm2;
        emp_lower = emp_lower.min(ratio);
        // relative shortfall (c_lo − ratio)/c_lo
        let v = (c_lo - ratio) / c_lo.abs().max(f64::MIN_POSITIVE);
        if v > lower.worst_violation {
            lower.worst_violation = v;
            lower.worst_x = x;
        }

        let bound = x + math::powf(x, m);
        let pr = e.pressure(x) / bound;
        emp_upper = emp_upper.max(pr);
        let v = (pr - c_up) / c_up.abs().max(f64::MIN_POSITIVE);
        if v > upper.worst_violation {
            upper.worst_violation = v;
            upper.worst_x = x;
        }
    }
    lower.pass = !(lower.worst_violation > REL_TOL) && !lower.worst_violation.is_nan();
    upper.pass = !(upper.worst_violation > REL_TOL) && !upper.worst_violation.is_nan();
    let m_is_one = m == 1.0;
    if !m_is_one {
        checks.push(lower);
    }
    checks.push(upper);

    EnergyReport {
        samples: samples.len(),
        certified_lower: (!m_is_one).then_some(c_lo),
        certified_upper: Some(c_up),
        empirical_lower: (!m_is_one && !samples.is_empty()).then_some(emp_lower),
        empirical_upper: (!samples.is_empty()).then_some(emp_upper),
        checks,
        pass: false,
    }
    .finish()
}

/// Checks that `G(x) = xⁿ F(x⁻ⁿ)` is nonincreasing and convex on an
/// increasing positive sample sequence, using first and second divided
/// differences with a `1e−10` relative tolerance.
pub fn check_mccann<E: EnergyDensity + ?Sized>(e: &E, n: usize, samples: &[f64]) -> EnergyReport {
    let nf = n as f64;
    let g: Vec<f64> = samples
        .iter()
        .map(|&x| math::powf(x, nf) * e.value(math::powf(x, -nf)))
        .collect();

    let mut mono = InequalityCheck {
        name: "x^n F(x^-n) nonincreasing",
        pass: true,
        worst_x: f64::NAN,
        worst_violation: f64::NEG_INFINITY,
    };
    let mut slopes = Vec::with_capacity(samples.len().saturating_sub(1));
    for k in 0..samples.len().saturating_sub(1) {
        let dx = samples[k + 1] - samples[k];
        let slope = (g[k + 1] - g[k]) / dx;
        let v = (g[k + 1] - g[k]) / (1.0 + g[k].abs().max(g[k + 1].abs()));
        if v > mono.worst_violation || v.is_nan() {
            mono.worst_violation = v;
            mono.worst_x = samples[k];
        }
        slopes.push(slope);
    }
    mono.pass = !(mono.worst_violation > 1e-10) && !mono.worst_violation.is_nan();

    let mut convex = InequalityCheck {
        name: "x^n F(x^-n) convex",
        pass: true,
        worst_x: f64::NAN,
        worst_violation: f64::NEG_INFINITY,
    };
    for k in 0..slopes.len().saturating_sub(1) {
        let v = (slopes[k] - slopes[k + 1]) / (1.0 + slopes[k].abs() + slopes[k + 1].abs());
        if v > convex.worst_violation || v.is_nan() {
            convex.worst_violation = v;
            convex.worst_x = samples[k + 1];
        }
    }
    convex.pass = !(convex.worst_violation > 1e-10) && !convex.worst_violation.is_nan();
    let samples_ok = samples.windows(2).all(|w| w[1] > w[0]) && samples.iter().all(|&x| x > 0.0);

    EnergyReport {
        samples: samples.len(),
        certified_lower: None,
        certified_upper: None,
        empirical_lower: None,
        empirical_upper: None,
        checks: alloc::vec![
            mono,
            convex,
            InequalityCheck {
                name: "samples increasing and positive",
                pass: samples_ok,
                worst_x: f64::NAN,
                worst_violation: 0.0,
            }
        ],
        pass: false,
    }
    .finish()
}

/// `count` points geometrically spaced on `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (math::ln(lo), math::ln(hi));
    (0..count)
        .map(|k| math::exp(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}
