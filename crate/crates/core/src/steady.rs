//! Steady states by monotone iteration between ordered lower and upper
//! solutions: scalar problems on bounded intervals and the truncated half
//! line, the weighted half-line problem, the coupled cooperative system, and
//! the alternating scalar-solve ("sandwich") sequence that brackets the
//! half-line coexistence pair.
//!
//! The damped iteration map for a scalar equation with growth `alpha` and
//! crowding weight `k(x)` is
//!
//! ```text
//! Gamma(u) = u + (d K u - d u + u (alpha - k u)) / omega,   omega = d + alpha + 1
//! ```
//!
//! which is order preserving on `[0, alpha/inf k]`: iterates from a lower
//! solution increase, iterates from an upper solution decrease, and both
//! converge to the unique positive steady state. Half-line problems replace
//! the unknown beyond the truncation length by its analytic far-field limit
//! inside the convolution (tail substitution) and verify the truncation by a
//! doubling check.

use crate::error::{Error, Result};
use crate::grid::{sup_diff, sup_norm, Grid};
use crate::kernels::{banded_apply_into, trapezoid_weighted, SampledKernel};
use crate::reaction::{coexistence_root, CoopParams};
use crate::spectral::principal_eigenvalue;

/// Iteration cap for every damped monotone loop.
const ITERATION_CAP: usize = 100_000;

/// Default stopping residuals from the module contract.
pub const TOL_BOUNDED: f64 = 1e-10;
pub const TOL_HALFLINE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    BoundedInterval,
    TruncatedHalfline,
}

/// A nonnegative steady profile on `[0, L]`.
#[derive(Debug, Clone)]
pub struct SteadyProfile {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Analytic far-field value substituted beyond the grid (half-line kind).
    pub tail_limit: f64,
    pub kind: ProfileKind,
    /// Sup-norm of the discrete steady equation at the returned profile.
    pub residual: f64,
    pub iterations: usize,
}

impl SteadyProfile {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn sup(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn zero(grid: Grid, kind: ProfileKind) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n],
            tail_limit: 0.0,
            kind,
            residual: 0.0,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyClass {
    Trivial,
    SemitrivialU,
    SemitrivialV,
    Coexistence,
}

/// A pair of steady profiles on a shared grid.
#[derive(Debug, Clone)]
pub struct SteadyPair {
    pub u: SteadyProfile,
    pub v: SteadyProfile,
    pub classification: SteadyClass,
    /// Principal eigenvalues that decided the classification.
    pub lambda1: f64,
    pub lambda2: f64,
}

/// A nonincreasing crowding weight `k(x) >= k_inf > 0` sampled on a grid.
#[derive(Debug, Clone)]
pub struct Weight {
    samples: Vec<f64>,
    k_inf: f64,
}

impl Weight {
    pub fn constant(beta: f64, grid: &Grid) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("constant weight beta = {beta}")));
        }
        Ok(Self {
            samples: vec![beta; grid.n],
            k_inf: beta,
        })
    }

    pub fn from_samples(mut samples: Vec<f64>, k_inf: f64) -> Result<Self> {
        if !(k_inf > 0.0) {
            return Err(Error::WeightNotMonotone(format!("limit k_inf = {k_inf} not positive")));
        }
        // Wiggle at the solver-roundoff scale is clamped away; anything
        // larger signals a non-monotone upstream profile, which is a bug.
        let slack = 1e-6 * (1.0 + sup_norm(&samples));
        for w in samples.windows(2) {
            if w[1] > w[0] + slack {
                return Err(Error::WeightNotMonotone(format!(
                    "samples increase from {} to {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = samples.last() {
            if last < k_inf - slack {
                return Err(Error::WeightNotMonotone(format!(
                    "final sample {last} below the declared limit {k_inf}"
                )));
            }
        }
        for i in 1..samples.len() {
            if samples[i] > samples[i - 1] {
                samples[i] = samples[i - 1];
            }
        }
        Ok(Self { samples, k_inf })
    }

    pub fn from_fn(f: impl Fn(f64) -> f64, grid: &Grid, k_inf: f64) -> Result<Self> {
        Self::from_samples(grid.xs().map(f).collect(), k_inf)
    }

    pub fn k0(&self) -> f64 {
        self.samples[0]
    }

    pub fn k_inf(&self) -> f64 {
        self.k_inf
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Discrete scalar steady equation `d K u - d u + u (alpha - k(x) u) = 0`
/// on `[0, L]`, optionally with tail substitution beyond `L`.
pub struct ScalarEquation<'a> {
    pub d: f64,
    pub alpha: f64,
    kernel: &'a SampledKernel,
    pub grid: Grid,
    weight: Weight,
    /// Far-field value substituted for `u(y)`, `y > L`; `None` on bounded
    /// intervals (homogeneous beyond the domain).
    tail_value: Option<f64>,
    /// Precomputed `tail_cdf(L - x_i)` when tail substitution is active.
    tail_cdf: Vec<f64>,
    omega: f64,
}

impl<'a> ScalarEquation<'a> {
    pub fn new(
        d: f64,
        alpha: f64,
        kernel: &'a SampledKernel,
        grid: Grid,
        weight: Weight,
        tail_value: Option<f64>,
    ) -> Result<Self> {
        if weight.samples.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "weight has {} samples for a {}-node grid",
                weight.samples.len(),
                grid.n
            )));
        }
        let tail_cdf = match tail_value {
            Some(_) => {
                let last = grid.last_x();
                grid.xs().map(|x| kernel.tail_cdf(last - x)).collect()
            }
            None => Vec::new(),
        };
        Ok(Self {
            d,
            alpha,
            kernel,
            grid,
            weight,
            tail_value,
            tail_cdf,
            omega: d + alpha + 1.0,
        })
    }

    /// The convolution term `K u` including the tail substitution.
    fn convolution(&self, u: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        trapezoid_weighted(u, scratch);
        banded_apply_into(self.kernel.taps(), self.kernel.half_band(), scratch, 0, out);
        if let Some(tail) = self.tail_value {
            for (o, c) in out.iter_mut().zip(&self.tail_cdf) {
                *o += tail * c;
            }
        }
    }

    /// Steady-equation defect `G(u)` at every node.
    pub fn defect(&self, u: &[f64]) -> Vec<f64> {
        let mut scratch = Vec::new();
        let mut conv = vec![0.0; u.len()];
        self.convolution(u, &mut scratch, &mut conv);
        u.iter()
            .zip(&conv)
            .zip(&self.weight.samples)
            .map(|((&ui, &ci), &ki)| self.d * ci - self.d * ui + ui * (self.alpha - ki * ui))
            .collect()
    }

    /// One damped step `u <- u + G(u)/omega`; returns the defect sup-norm
    /// before the step. Order preserving on the relevant box.
    pub fn damped_step(&self, u: &mut [f64]) -> f64 {
        let g = self.defect(u);
        let res = sup_norm(&g);
        for (ui, gi) in u.iter_mut().zip(&g) {
            *ui += gi / self.omega;
        }
        res
    }

    /// Iterates from `start` until the defect sup-norm drops to `tol`.
    pub fn solve_from(&self, mut u: Vec<f64>, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
        let mut scratch = Vec::new();
        let mut conv = vec![0.0; u.len()];
        for it in 0..ITERATION_CAP {
            self.convolution(&u, &mut scratch, &mut conv);
            let mut res = 0.0f64;
            for i in 0..u.len() {
                let g = self.d * conv[i] - self.d * u[i]
                    + u[i] * (self.alpha - self.weight.samples[i] * u[i]);
                res = res.max(g.abs());
                u[i] += g / self.omega;
            }
            if res <= tol {
                return Ok((u, it + 1, res));
            }
        }
        Err(Error::NoConvergence {
            context: "scalar monotone iteration",
            iterations: ITERATION_CAP,
            metric: sup_norm(&self.defect(&u)),
        })
    }
}

fn check_length(l: f64, h: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidParameter(format!("interval length {l}")));
    }
    if l < 2.0 * h {
        return Err(Error::GridTooCoarse(format!(
            "length {l} below two grid cells (h = {h})"
        )));
    }
    Ok(())
}

/// Lower-solution seed: a small multiple of the principal eigenfunction,
/// shrunk until the lower-solution inequality holds at every node.
fn eigen_seed(eq: &ScalarEquation<'_>, lambda: f64, phi: &[f64], beta_sup: f64) -> Vec<f64> {
    let mut eps = (0.1 * eq.alpha / beta_sup).min(0.9 * lambda / beta_sup);
    for _ in 0..60 {
        let candidate: Vec<f64> = phi.iter().map(|&p| eps * p).collect();
        let g = eq.defect(&candidate);
        if g.iter().all(|&gi| gi >= -1e-14 * (1.0 + eq.alpha)) {
            return candidate;
        }
        eps *= 0.5;
    }
    phi.iter().map(|&p| eps * p).collect()
}

/// Unique nonnegative steady state of the scalar equation on `[0, l]`:
/// the zero profile when the principal eigenvalue is nonpositive, otherwise
/// the positive solution obtained by iterating up from a small multiple of
/// the principal eigenfunction.
pub fn scalar_steady_bounded(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    beta: f64,
    l: f64,
    tol: f64,
) -> Result<SteadyProfile> {
    check_length(l, kernel.h())?;
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("crowding beta = {beta}")));
    }
    let eig = principal_eigenvalue(d, kernel, alpha, l)?;
    let grid = eig.grid;
    if eig.lambda <= 0.0 {
        return Ok(SteadyProfile::zero(grid, ProfileKind::BoundedInterval));
    }
    let weight = Weight::constant(beta, &grid)?;
    let eq = ScalarEquation::new(d, alpha, kernel, grid, weight, None)?;
    let seed = eigen_seed(&eq, eig.lambda, &eig.eigenfunction, beta);
    let (values, iterations, residual) = eq.solve_from(seed, tol)?;
    Ok(SteadyProfile {
        grid,
        values,
        tail_limit: 0.0,
        kind: ProfileKind::BoundedInterval,
        residual,
        iterations,
    })
}

/// Same problem iterated downward from the constant upper solution
/// `alpha/beta`; used to confirm uniqueness of the positive steady state.
pub fn scalar_steady_bounded_from_above(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    beta: f64,
    l: f64,
    tol: f64,
) -> Result<SteadyProfile> {
    check_length(l, kernel.h())?;
    let grid = Grid::covering(0.0, l, kernel.h())?;
    let weight = Weight::constant(beta, &grid)?;
    let eq = ScalarEquation::new(d, alpha, kernel, grid, weight, None)?;
    let (values, iterations, residual) = eq.solve_from(vec![alpha / beta; grid.n], tol)?;
    Ok(SteadyProfile {
        grid,
        values,
        tail_limit: 0.0,
        kind: ProfileKind::BoundedInterval,
        residual,
        iterations,
    })
}

fn halfline_profile(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    weight: Weight,
    tail_value: f64,
    grid: Grid,
    tol: f64,
    seed: Option<Vec<f64>>,
) -> Result<SteadyProfile> {
    let eq = ScalarEquation::new(d, alpha, kernel, grid, weight, Some(tail_value))?;
    let seed = match seed {
        Some(s) => s,
        None => {
            let eig = principal_eigenvalue(d, kernel, alpha, grid.span())?;
            if eig.lambda <= 0.0 {
                // the half-line solution exists for every alpha > 0, but a
                // truncation this short cannot represent it
                return Err(Error::TruncationUnstable(format!(
                    "principal eigenvalue {:.3e} nonpositive at truncation length {}; \
                     enlarge the domain",
                    eig.lambda,
                    grid.span()
                )));
            }
            let beta_sup = sup_norm(eq.weight.samples());
            eigen_seed(&eq, eig.lambda, &eig.eigenfunction, beta_sup)
        }
    };
    let (values, iterations, residual) = eq.solve_from(seed, tol)?;
    Ok(SteadyProfile {
        grid,
        values,
        tail_limit: tail_value,
        kind: ProfileKind::TruncatedHalfline,
        residual,
        iterations,
    })
}

fn verify_doubling(
    reference: &SteadyProfile,
    solve_double: impl FnOnce() -> Result<SteadyProfile>,
    tol: f64,
    kernel_floor: f64,
) -> Result<()> {
    let doubled = solve_double()?;
    let n = reference.values.len();
    let diff = sup_diff(&reference.values, &doubled.values[..n]);
    // the analytic tail CDF carries the kernel mass the sampled taps dropped,
    // so solutions at different truncation lengths can never agree below the
    // kernel's own neglected-mass scale
    if diff > 10.0 * tol + kernel_floor {
        return Err(Error::TruncationUnstable(format!(
            "doubling the truncation length moved the solution by {diff:.3e} (> 10 tol)"
        )));
    }
    Ok(())
}

/// Unique bounded positive steady state on the half line (strictly
/// increasing to `alpha/beta`), computed on `[0, L]` with the far-field
/// value substituted beyond `L` and verified by a doubling check.
pub fn scalar_steady_halfline(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    beta: f64,
    l_trunc: f64,
    tol: f64,
) -> Result<SteadyProfile> {
    check_length(l_trunc, kernel.h())?;
    let grid = Grid::covering(0.0, l_trunc, kernel.h())?;
    let weight = Weight::constant(beta, &grid)?;
    let profile = halfline_profile(d, kernel, alpha, weight, alpha / beta, grid, tol, None)?;
    verify_doubling(
        &profile,
        || {
            let grid2 = Grid::covering(0.0, 2.0 * l_trunc, kernel.h())?;
            let w2 = Weight::constant(beta, &grid2)?;
            let seed = extend_with_tail(&profile, &grid2);
            halfline_profile(d, kernel, alpha, w2, alpha / beta, grid2, tol, Some(seed))
        },
        tol,
        20.0 * d * 2.0 * kernel.tail_mass() * (alpha / beta),
    )?;
    Ok(profile)
}

/// Extends a half-line profile to a longer grid by its tail value (a valid
/// lower seed because the profile increases toward the tail).
fn extend_with_tail(profile: &SteadyProfile, grid: &Grid) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.n);
    out.extend_from_slice(&profile.values);
    out.resize(grid.n, profile.tail_limit);
    // keep the seed a lower solution: never exceed the tail value
    let cap = profile.tail_limit;
    for v in &mut out {
        *v = v.min(cap);
    }
    out
}

/// Unique bounded positive solution of the weighted half-line problem
/// `d K U - d U + U (alpha - k(x) U) = 0`, nondecreasing with far-field
/// limit `alpha / k_inf`.
pub fn weighted_steady(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    weight: &Weight,
    l_trunc: f64,
    tol: f64,
) -> Result<SteadyProfile> {
    check_length(l_trunc, kernel.h())?;
    let grid = Grid::covering(0.0, l_trunc, kernel.h())?;
    if weight.samples.len() != grid.n {
        return Err(Error::GridMismatch(format!(
            "weight sampled on {} nodes, grid has {}",
            weight.samples.len(),
            grid.n
        )));
    }
    // lower solution: the constant-k(0) problem (heaviest crowding)
    let lower = scalar_steady_halfline(d, kernel, alpha, weight.k0(), l_trunc, tol)?;
    weighted_steady_from(d, kernel, alpha, weight, grid, tol, lower.values)
}

/// Weighted solve from a caller-supplied lower solution (used by the
/// sandwich sequence to warm start successive problems).
fn weighted_steady_from(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    weight: &Weight,
    grid: Grid,
    tol: f64,
    lower: Vec<f64>,
) -> Result<SteadyProfile> {
    let tail_value = alpha / weight.k_inf();
    halfline_profile(
        d,
        kernel,
        alpha,
        weight.clone(),
        tail_value,
        grid,
        tol,
        Some(lower),
    )
}

/// Coupled cooperative steady equations on a shared grid, damped per
/// component. The damping must dominate the reaction's own-species slope on
/// the order box (which `d + alpha + 1` does not once `3 alpha > 1`), so the
/// system map uses `omega_i = d_i + 3 alpha_i + 1`.
pub struct SystemEquation<'a> {
    params: &'a CoopParams,
    j1: &'a SampledKernel,
    j2: &'a SampledKernel,
    pub grid: Grid,
    tail: Option<(f64, f64)>,
    tail_cdf1: Vec<f64>,
    tail_cdf2: Vec<f64>,
    omega1: f64,
    omega2: f64,
}

impl<'a> SystemEquation<'a> {
    pub fn new(
        params: &'a CoopParams,
        j1: &'a SampledKernel,
        j2: &'a SampledKernel,
        grid: Grid,
        tail: Option<(f64, f64)>,
    ) -> Result<Self> {
        let scale = j1.h().max(1.0);
        if (j1.h() - j2.h()).abs() > 1e-9 * scale {
            return Err(Error::GridMismatch(format!(
                "kernel spacings differ: {} vs {}",
                j1.h(),
                j2.h()
            )));
        }
        let last = grid.last_x();
        let (tail_cdf1, tail_cdf2) = match tail {
            Some(_) => (
                grid.xs().map(|x| j1.tail_cdf(last - x)).collect(),
                grid.xs().map(|x| j2.tail_cdf(last - x)).collect(),
            ),
            None => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            params,
            j1,
            j2,
            grid,
            tail,
            tail_cdf1,
            tail_cdf2,
            omega1: params.d1 + 3.0 * params.alpha1() + 1.0,
            omega2: params.d2 + 3.0 * params.alpha2() + 1.0,
        })
    }

    /// Defects of both equations at `(u, v)`.
    pub fn defect(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.params;
        let n = self.grid.n;
        let mut scratch = Vec::new();
        let mut conv_u = vec![0.0; n];
        let mut conv_v = vec![0.0; n];
        trapezoid_weighted(u, &mut scratch);
        banded_apply_into(self.j1.taps(), self.j1.half_band(), &scratch, 0, &mut conv_u);
        trapezoid_weighted(v, &mut scratch);
        banded_apply_into(self.j2.taps(), self.j2.half_band(), &scratch, 0, &mut conv_v);
        if let Some((tu, tv)) = self.tail {
            for i in 0..n {
                conv_u[i] += tu * self.tail_cdf1[i];
                conv_v[i] += tv * self.tail_cdf2[i];
            }
        }
        let mut gu = vec![0.0; n];
        let mut gv = vec![0.0; n];
        for i in 0..n {
            let f1 = p.r1 * u[i] * (p.a - u[i] - u[i] / (1.0 + p.b * v[i]));
            let f2 = p.r2 * v[i] * (1.0 - v[i] - v[i] / (1.0 + p.q * u[i]));
            gu[i] = p.d1 * conv_u[i] - p.d1 * u[i] + f1;
            gv[i] = p.d2 * conv_v[i] - p.d2 * v[i] + f2;
        }
        (gu, gv)
    }

    /// One damped Jacobi step on both components; returns the joint defect
    /// sup-norm before the step.
    pub fn damped_step(&self, u: &mut [f64], v: &mut [f64]) -> f64 {
        let (gu, gv) = self.defect(u, v);
        let res = sup_norm(&gu).max(sup_norm(&gv));
        for (ui, gi) in u.iter_mut().zip(&gu) {
            *ui += gi / self.omega1;
        }
        for (vi, gi) in v.iter_mut().zip(&gv) {
            *vi += gi / self.omega2;
        }
        res
    }

    pub fn solve_from(
        &self,
        mut u: Vec<f64>,
        mut v: Vec<f64>,
        tol: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, usize, f64)> {
        for it in 0..ITERATION_CAP {
            let (gu, gv) = self.defect(&u, &v);
            let res = sup_norm(&gu).max(sup_norm(&gv));
            for (ui, gi) in u.iter_mut().zip(&gu) {
                *ui += gi / self.omega1;
            }
            for (vi, gi) in v.iter_mut().zip(&gv) {
                *vi += gi / self.omega2;
            }
            if res <= tol {
                return Ok((u, v, it + 1, res));
            }
        }
        Err(Error::NoConvergence {
            context: "system monotone iteration",
            iterations: ITERATION_CAP,
            metric: tol,
        })
    }
}

/// Classification and solution of the coupled steady system on `[0, l]`:
/// trivial when both principal eigenvalues are nonpositive, semitrivial when
/// exactly one is positive, and the unique coexistence pair (sandwiched
/// between the semitrivial profiles and the coexistence constants) when both
/// are positive.
pub fn system_steady_bounded(
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
    l: f64,
    tol: f64,
) -> Result<SteadyPair> {
    check_length(l, j1.h())?;
    let lambda1 = principal_eigenvalue(params.d1, j1, params.alpha1(), l)?.lambda;
    let lambda2 = principal_eigenvalue(params.d2, j2, params.alpha2(), l)?.lambda;
    let grid = Grid::covering(0.0, l, j1.h())?;

    let theta1 = || scalar_steady_bounded(params.d1, j1, params.alpha1(), 2.0 * params.r1, l, tol);
    let theta2 = || scalar_steady_bounded(params.d2, j2, params.alpha2(), 2.0 * params.r2, l, tol);

    let (u, v, classification) = match (lambda1 > 0.0, lambda2 > 0.0) {
        (false, false) => (
            SteadyProfile::zero(grid, ProfileKind::BoundedInterval),
            SteadyProfile::zero(grid, ProfileKind::BoundedInterval),
            SteadyClass::Trivial,
        ),
        (true, false) => (
            theta1()?,
            SteadyProfile::zero(grid, ProfileKind::BoundedInterval),
            SteadyClass::SemitrivialU,
        ),
        (false, true) => (
            SteadyProfile::zero(grid, ProfileKind::BoundedInterval),
            theta2()?,
            SteadyClass::SemitrivialV,
        ),
        (true, true) => {
            let t1 = theta1()?;
            let t2 = theta2()?;
            let eq = SystemEquation::new(params, j1, j2, grid, None)?;
            let (uv, vv, iterations, residual) = eq.solve_from(t1.values, t2.values, tol)?;
            let u = SteadyProfile {
                grid,
                values: uv,
                tail_limit: 0.0,
                kind: ProfileKind::BoundedInterval,
                residual,
                iterations,
            };
            let v = SteadyProfile {
                grid,
                values: vv,
                tail_limit: 0.0,
                kind: ProfileKind::BoundedInterval,
                residual,
                iterations,
            };
            (u, v, SteadyClass::Coexistence)
        }
    };
    Ok(SteadyPair {
        u,
        v,
        classification,
        lambda1,
        lambda2,
    })
}

/// Unique positive steady pair on the half line, strictly increasing with
/// far-field limit at the coexistence state; computed on `[0, L]` with the
/// coexistence constants substituted beyond `L`, then verified by doubling.
pub fn system_steady_halfline(
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
    l_trunc: f64,
    tol: f64,
) -> Result<SteadyPair> {
    let pair = system_steady_halfline_unchecked(params, j1, j2, l_trunc, tol)?;
    let n = pair.u.grid.n;
    let doubled = system_steady_halfline_unchecked(params, j1, j2, 2.0 * l_trunc, tol)?;
    let diff = sup_diff(&pair.u.values, &doubled.u.values[..n])
        .max(sup_diff(&pair.v.values, &doubled.v.values[..n]));
    let kernel_floor = 20.0
        * (params.d1 * 2.0 * j1.tail_mass() * pair.u.tail_limit)
            .max(params.d2 * 2.0 * j2.tail_mass() * pair.v.tail_limit);
    if diff > 10.0 * tol + kernel_floor {
        return Err(Error::TruncationUnstable(format!(
            "doubling the truncation length moved the pair by {diff:.3e} (> 10 tol)"
        )));
    }
    Ok(pair)
}

pub fn system_steady_halfline_unchecked(
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
    l_trunc: f64,
    tol: f64,
) -> Result<SteadyPair> {
    check_length(l_trunc, j1.h())?;
    let lambda1 = principal_eigenvalue(params.d1, j1, params.alpha1(), l_trunc)?.lambda;
    let lambda2 = principal_eigenvalue(params.d2, j2, params.alpha2(), l_trunc)?.lambda;
    if lambda1 <= 0.0 || lambda2 <= 0.0 {
        return Err(Error::TruncationUnstable(format!(
            "truncation length {l_trunc} too short: principal eigenvalues {lambda1:.3e}, {lambda2:.3e}"
        )));
    }
    let grid = Grid::covering(0.0, l_trunc, j1.h())?;
    let root = coexistence_root(params)?;

    // lower pair: the scalar half-line states of each species alone
    let theta1 = scalar_steady_halfline(
        params.d1,
        j1,
        params.alpha1(),
        2.0 * params.r1,
        l_trunc,
        tol,
    )?;
    let theta2 = scalar_steady_halfline(
        params.d2,
        j2,
        params.alpha2(),
        2.0 * params.r2,
        l_trunc,
        tol,
    )?;

    let eq = SystemEquation::new(params, j1, j2, grid, Some((root.u_star, root.v_star)))?;
    let (uv, vv, iterations, residual) = eq.solve_from(theta1.values, theta2.values, tol)?;
    let u = SteadyProfile {
        grid,
        values: uv,
        tail_limit: root.u_star,
        kind: ProfileKind::TruncatedHalfline,
        residual,
        iterations,
    };
    let v = SteadyProfile {
        grid,
        values: vv,
        tail_limit: root.v_star,
        kind: ProfileKind::TruncatedHalfline,
        residual,
        iterations,
    };
    Ok(SteadyPair {
        u,
        v,
        classification: SteadyClass::Coexistence,
        lambda1,
        lambda2,
    })
}

/// The alternating scalar-solve sequence bracketing the half-line pair from
/// below, with its per-step sup-norm increments.
#[derive(Debug, Clone)]
pub struct SandwichSequence {
    /// `(U_n, V_n)` for `n = 1, 2, ...`.
    pub pairs: Vec<(SteadyProfile, SteadyProfile)>,
    /// Sup-norm increments `(sup(U_{n+1} - U_n), sup(V_{n+1} - V_n))`.
    pub increments: Vec<(f64, f64)>,
    pub converged: bool,
}

impl SandwichSequence {
    pub fn last(&self) -> &(SteadyProfile, SteadyProfile) {
        self.pairs.last().expect("sequence holds at least one pair")
    }
}

/// Builds the sandwich sequence: `U_1` is the heaviest-crowding scalar state
/// of the first species; then alternately solve the second species' weighted
/// problem against `U_n` and the first species' against `V_n`. The sequence
/// increases toward the half-line coexistence pair.
pub fn sandwich_iteration(
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
    l_trunc: f64,
    n_max: usize,
    tol: f64,
) -> Result<SandwichSequence> {
    check_length(l_trunc, j1.h())?;
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max = 0".into()));
    }
    let lambda1 = principal_eigenvalue(params.d1, j1, params.alpha1(), l_trunc)?.lambda;
    let lambda2 = principal_eigenvalue(params.d2, j2, params.alpha2(), l_trunc)?.lambda;
    if lambda1 <= 0.0 || lambda2 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sandwich iteration requires the spreading regime at length {l_trunc} \
             (principal eigenvalues {lambda1:.3e}, {lambda2:.3e})"
        )));
    }
    let grid = Grid::covering(0.0, l_trunc, j1.h())?;

    // solve the scalar subproblems well below the outer increment tolerance
    // so measured increments are not polluted by solver wiggle
    let inner_tol = (tol * 1e-4).clamp(1e-13, 1e-10);

    let mut u_n = scalar_steady_halfline(
        params.d1,
        j1,
        params.alpha1(),
        2.0 * params.r1,
        l_trunc,
        inner_tol,
    )?;
    let mut u_tail = 0.5 * params.a;
    let mut v_prev: Option<SteadyProfile> = None;

    let mut pairs: Vec<(SteadyProfile, SteadyProfile)> = Vec::new();
    let mut increments: Vec<(f64, f64)> = Vec::new();
    let mut converged = false;

    for _ in 0..n_max {
        // crowding weight seen by the second species against U_n
        let k_v_inf = params.r2 * (1.0 + 1.0 / (1.0 + params.q * u_tail));
        let k_v = Weight::from_samples(
            u_n.values
                .iter()
                .map(|&u| params.r2 * (1.0 + 1.0 / (1.0 + params.q * u)))
                .collect(),
            k_v_inf,
        )?;
        let v_seed = match &v_prev {
            Some(v) => v.values.clone(),
            None => {
                scalar_steady_halfline(params.d2, j2, params.alpha2(), k_v.k0(), l_trunc, inner_tol)?
                    .values
            }
        };
        let v_n =
            weighted_steady_from(params.d2, j2, params.alpha2(), &k_v, grid, inner_tol, v_seed)?;
        let v_tail = v_n.tail_limit;

        let inc_v = match &v_prev {
            Some(prev) => signed_sup_increase(&prev.values, &v_n.values),
            None => sup_norm(&v_n.values),
        };

        // crowding weight seen by the first species against V_n
        let k_u_inf = params.r1 * (1.0 + 1.0 / (1.0 + params.b * v_tail));
        let k_u = Weight::from_samples(
            v_n.values
                .iter()
                .map(|&v| params.r1 * (1.0 + 1.0 / (1.0 + params.b * v)))
                .collect(),
            k_u_inf,
        )?;
        let u_next = weighted_steady_from(
            params.d1,
            j1,
            params.alpha1(),
            &k_u,
            grid,
            inner_tol,
            u_n.values.clone(),
        )?;
        let inc_u = signed_sup_increase(&u_n.values, &u_next.values);

        pairs.push((u_n.clone(), v_n.clone()));
        increments.push((inc_u, inc_v));

        u_tail = u_next.tail_limit;
        u_n = u_next;
        v_prev = Some(v_n);

        if inc_u.abs() + inc_v.abs() < tol {
            converged = true;
            break;
        }
    }

    Ok(SandwichSequence {
        pairs,
        increments,
        converged,
    })
}

/// Largest pointwise increase from `a` to `b` (negative if `b` dips below).
fn signed_sup_increase(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| y - x)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{sample_kernel, KernelSpec};

    fn laplace(h: f64) -> SampledKernel {
        sample_kernel(&KernelSpec::Laplace { sigma: 1.0 }, h, 1e-8).unwrap()
    }

    #[test]
    fn subcritical_interval_gives_the_zero_profile() {
        let k = laplace(0.05);
        // alpha < d and a short interval: eigenvalue negative
        let p = scalar_steady_bounded(1.0, &k, 0.5, 1.0, 1.0, TOL_BOUNDED).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn supercritical_profile_is_positive_below_carrying_value() {
        let k = laplace(0.05);
        let (alpha, beta) = (1.0, 2.0);
        let p = scalar_steady_bounded(1.0, &k, alpha, beta, 20.0, TOL_BOUNDED).unwrap();
        assert!(!p.is_zero());
        assert!(p.min() > 0.0, "strong maximum principle: min {}", p.min());
        assert!(p.sup() < alpha / beta);
        assert!(p.residual <= TOL_BOUNDED);
    }

    #[test]
    fn bounded_solutions_from_below_and_above_agree() {
        let k = laplace(0.05);
        let tol = 1e-10;
        let lo = scalar_steady_bounded(1.0, &k, 1.0, 2.0, 15.0, tol).unwrap();
        let hi = scalar_steady_bounded_from_above(1.0, &k, 1.0, 2.0, 15.0, tol).unwrap();
        assert!(sup_diff(&lo.values, &hi.values) <= 10.0 * tol);
    }

    #[test]
    fn damped_steps_are_monotone_from_both_sides() {
        let k = laplace(0.05);
        let grid = Grid::covering(0.0, 15.0, 0.05).unwrap();
        let eq = ScalarEquation::new(
            1.0,
            1.0,
            &k,
            grid,
            Weight::constant(2.0, &grid).unwrap(),
            None,
        )
        .unwrap();
        let eig = principal_eigenvalue(1.0, &k, 1.0, 15.0).unwrap();
        let mut lower = eigen_seed(&eq, eig.lambda, &eig.eigenfunction, 2.0);
        let mut upper = vec![0.5; grid.n];
        for _ in 0..25 {
            let prev_lo = lower.clone();
            let prev_hi = upper.clone();
            eq.damped_step(&mut lower);
            eq.damped_step(&mut upper);
            for i in 0..grid.n {
                assert!(lower[i] >= prev_lo[i] - 1e-14);
                assert!(upper[i] <= prev_hi[i] + 1e-14);
                assert!(lower[i] <= upper[i] + 1e-14);
            }
        }
    }

    #[test]
    fn halfline_profile_increases_to_its_tail_value() {
        let k = laplace(0.05);
        let (alpha, beta) = (1.0, 1.0);
        let p = scalar_steady_halfline(1.0, &k, alpha, beta, 100.0, TOL_HALFLINE).unwrap();
        let target = alpha / beta;
        let last = *p.values.last().unwrap();
        assert!(last <= target && last >= 0.99 * target, "tail {last}");
        // strictly increasing wherever the gap to the discrete plateau is
        // clearly above the solver tolerance; flat (to solver resolution)
        // after that
        for (i, w) in p.values.windows(2).enumerate() {
            if w[0] < last * (1.0 - 1e-6) {
                assert!(w[1] > w[0], "not increasing at node {i}");
            } else {
                assert!(w[1] >= w[0] - 1e-9);
            }
        }
    }

    #[test]
    fn heavier_crowding_lowers_the_halfline_profile_everywhere() {
        let k = laplace(0.05);
        let mut prev: Option<SteadyProfile> = None;
        for beta in [0.5, 1.0, 2.0, 4.0] {
            let p = scalar_steady_halfline(1.0, &k, 1.0, beta, 80.0, TOL_HALFLINE).unwrap();
            if let Some(q) = &prev {
                for (hi, lo) in q.values.iter().zip(&p.values) {
                    assert!(hi > lo, "profiles must decrease strictly in beta");
                }
            }
            prev = Some(p);
        }
    }

    #[test]
    fn constant_weight_reduces_to_the_scalar_halfline_problem() {
        let k = laplace(0.05);
        let grid = Grid::covering(0.0, 60.0, 0.05).unwrap();
        let tol = 1e-12;
        let w = Weight::constant(1.5, &grid).unwrap();
        let a = weighted_steady(1.0, &k, 1.0, &w, 60.0, tol).unwrap();
        let b = scalar_steady_halfline(1.0, &k, 1.0, 1.5, 60.0, tol).unwrap();
        assert!(sup_diff(&a.values, &b.values) < 1e-10);
    }

    #[test]
    fn weighted_profile_reaches_the_farfield_limit_and_orders_in_k() {
        let k = laplace(0.05);
        let l = 80.0;
        let grid = Grid::covering(0.0, l, 0.05).unwrap();
        let k1 = Weight::from_fn(|x| 1.0 + (-0.2 * x).exp(), &grid, 1.0).unwrap();
        let k2 = Weight::from_fn(|x| 1.2 + 1.3 * (-0.1 * x).exp(), &grid, 1.2).unwrap();
        let u1 = weighted_steady(1.0, &k, 1.0, &k1, l, TOL_HALFLINE).unwrap();
        let u2 = weighted_steady(1.0, &k, 1.0, &k2, l, TOL_HALFLINE).unwrap();
        assert!((u1.values.last().unwrap() - 1.0).abs() < 0.01);
        assert!((u1.tail_limit - 1.0).abs() < 1e-12);
        // k1 <= k2 pointwise, so U_{k1} >= U_{k2}
        for (a, b) in u1.values.iter().zip(&u2.values) {
            assert!(a >= b);
        }
    }

    #[test]
    fn weight_monotonicity_is_enforced() {
        let grid = Grid::covering(0.0, 5.0, 0.5).unwrap();
        assert!(matches!(
            Weight::from_fn(|x| 1.0 + 0.1 * x, &grid, 1.0),
            Err(Error::WeightNotMonotone(_))
        ));
    }

    fn bench_params() -> CoopParams {
        CoopParams {
            d1: 1.0,
            d2: 1.0,
            r1: 1.0,
            r2: 1.0,
            a: 1.0,
            b: 1.0,
            q: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            s10: 1.0,
            s20: 1.0,
        }
    }

    #[test]
    fn system_classification_follows_the_eigenvalue_signs() {
        let h = 0.05;
        let j = laplace(h);
        // growth below diffusion for both species and a short interval
        let mut p = bench_params();
        p.d1 = 2.0;
        p.d2 = 2.0;
        let pair = system_steady_bounded(&p, &j, &j, 1.0, TOL_BOUNDED).unwrap();
        assert_eq!(pair.classification, SteadyClass::Trivial);
        assert!(pair.u.is_zero() && pair.v.is_zero());

        // u supercritical, v subcritical on a mid-size interval
        let mut p = bench_params();
        p.a = 2.0;
        p.d2 = 2.0;
        p.r2 = 0.4;
        let pair = system_steady_bounded(&p, &j, &j, 4.0, TOL_BOUNDED).unwrap();
        assert_eq!(pair.classification, SteadyClass::SemitrivialU);
        assert!(!pair.u.is_zero() && pair.v.is_zero());

        // both supercritical on a long interval
        let p = bench_params();
        let pair = system_steady_bounded(&p, &j, &j, 40.0, TOL_BOUNDED).unwrap();
        assert_eq!(pair.classification, SteadyClass::Coexistence);
        let root = coexistence_root(&p).unwrap();
        let t1 = scalar_steady_bounded(p.d1, &j, p.alpha1(), 2.0 * p.r1, 40.0, TOL_BOUNDED).unwrap();
        let t2 = scalar_steady_bounded(p.d2, &j, p.alpha2(), 2.0 * p.r2, 40.0, TOL_BOUNDED).unwrap();
        for i in 0..pair.u.grid.n {
            assert!(pair.u.values[i] >= t1.values[i] - 1e-9);
            assert!(pair.v.values[i] >= t2.values[i] - 1e-9);
            assert!(pair.u.values[i] <= root.u_star + 1e-9);
            assert!(pair.v.values[i] <= root.v_star + 1e-9);
        }
    }

    #[test]
    fn halfline_pair_increases_to_the_coexistence_state() {
        let j = laplace(0.05);
        let p = bench_params();
        let pair = system_steady_halfline_unchecked(&p, &j, &j, 80.0, TOL_HALFLINE).unwrap();
        let root = coexistence_root(&p).unwrap();
        for w in pair.u.values.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in pair.v.values.windows(2) {
            assert!(w[1] > w[0]);
        }
        let lu = *pair.u.values.last().unwrap();
        let lv = *pair.v.values.last().unwrap();
        assert!((lu - root.u_star).abs() < 0.01 * root.u_star);
        assert!((lv - root.v_star).abs() < 0.01 * root.v_star);
        // cooperation lifts each species above its solo profile
        let t1 = scalar_steady_halfline(p.d1, &j, p.alpha1(), 2.0 * p.r1, 80.0, TOL_HALFLINE).unwrap();
        for (a, b) in pair.u.values.iter().zip(&t1.values) {
            assert!(a >= b);
        }
    }

    #[test]
    fn domain_growth_raises_the_bounded_pair() {
        let j = laplace(0.05);
        let p = bench_params();
        let small = system_steady_bounded(&p, &j, &j, 20.0, TOL_BOUNDED).unwrap();
        let large = system_steady_bounded(&p, &j, &j, 40.0, TOL_BOUNDED).unwrap();
        for i in 0..small.u.grid.n {
            assert!(large.u.values[i] >= small.u.values[i] - 1e-9);
            assert!(large.v.values[i] >= small.v.values[i] - 1e-9);
        }
    }

    #[test]
    fn sandwich_sequence_increases_and_approaches_the_pair() {
        let j = laplace(0.05);
        let p = bench_params();
        let l = 60.0;
        let seq = sandwich_iteration(&p, &j, &j, l, 30, 1e-6).unwrap();
        assert!(seq.converged);
        let root = coexistence_root(&p).unwrap();
        for (inc_u, inc_v) in &seq.increments {
            assert!(*inc_u >= -1e-9 && *inc_v >= -1e-9, "increments {inc_u} {inc_v}");
        }
        for (u, v) in &seq.pairs {
            assert!(u.sup() <= root.u_star + 1e-9);
            assert!(v.sup() <= root.v_star + 1e-9);
        }
        // first iterate is the solo state of the first species (re-solved at
        // the same inner tolerance the sequence used)
        let t1 = scalar_steady_halfline(p.d1, &j, p.alpha1(), 2.0 * p.r1, l, 1e-10).unwrap();
        assert!(sup_diff(&seq.pairs[0].0.values, &t1.values) < 1e-9);
        assert!((seq.pairs[0].0.tail_limit - 0.5 * p.a).abs() < 1e-12);
        // tail of V_1 solves its scalar far-field relation
        let v1_tail = seq.pairs[0].1.tail_limit;
        let residual = 1.0 - v1_tail - v1_tail / (1.0 + p.q * 0.5 * p.a);
        assert!(residual.abs() < 1e-12);
        // the sequence approaches the half-line pair
        let pair = system_steady_halfline_unchecked(&p, &j, &j, l, 1e-8).unwrap();
        let (un, vn) = seq.last();
        let gap = sup_diff(&un.values, &pair.u.values) + sup_diff(&vn.values, &pair.v.values);
        assert!(gap < 1e-4, "gap {gap}");
    }

    #[test]
    fn too_short_intervals_are_refused() {
        let k = laplace(0.05);
        assert!(matches!(
            scalar_steady_bounded(1.0, &k, 1.0, 1.0, 0.06, TOL_BOUNDED),
            Err(Error::GridTooCoarse(_))
        ));
    }
}
