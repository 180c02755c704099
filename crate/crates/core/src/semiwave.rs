//! Minimal traveling-wave speeds from the dispersion relation and semi-wave
//! speed/profile pairs for the free-boundary flux law.
//!
//! For thin-tailed kernels the minimal speed is
//!
//! ```text
//! C* = min_{lambda > 0} (d M(lambda) - d + alpha) / lambda
//! ```
//!
//! with `M` the exponential moment. The semi-wave problem couples a monotone
//! profile `phi` on `(-inf, 0]` with `phi(0) = 0`, `phi(-inf) = alpha/beta`
//! to a speed `c` through `c = mu * double integral of J(x-y) phi(x)` over
//! `x < 0 < y`; it is solvable exactly when the kernel has a finite first
//! moment. The inner integral collapses through the kernel tail CDF.

use crate::error::{Error, Result};
use crate::grid::{trapezoid_weight, Grid};
use crate::kernels::{banded_apply_into, trapezoid_weighted, KernelSpec, SampledKernel};
use crate::reaction::CoopParams;

/// Minimal traveling-wave speed and its dispersion argmin.
#[derive(Debug, Clone, Copy)]
pub struct DispersionResult {
    pub c_star: f64,
    pub lambda_star: f64,
    /// Dispersion-function evaluations spent.
    pub evaluations: usize,
}

/// Semi-wave solution: speed, monotone profile on `[-L_w, 0]`, and the
/// closure residual of the speed integral.
#[derive(Debug, Clone)]
pub struct SemiWaveResult {
    pub c: f64,
    /// Profile on `grid` (last node is `x = 0` where the profile vanishes).
    pub profile: Vec<f64>,
    pub grid: Grid,
    pub beta: f64,
    pub mu: f64,
    /// `|c - mu * flux integral(profile)|` at the returned pair.
    pub c_residual: f64,
    pub iterations: usize,
}

/// The four semi-wave speeds bounding the coupled system's fronts: each
/// species solved at heaviest crowding (`2 r`) and lightest (`r`).
#[derive(Debug, Clone, Copy)]
pub struct SpeedBounds {
    pub c1_lo: f64,
    pub c1_hi: f64,
    pub c2_lo: f64,
    pub c2_hi: f64,
}

/// Dispersion function `(d (M(lambda) - 1) + alpha) / lambda`.
fn dispersion(spec: &KernelSpec, d: f64, alpha: f64, lambda: f64) -> Result<f64> {
    Ok((d * (spec.exp_moment(lambda)? - 1.0) + alpha) / lambda)
}

/// Minimal speed by golden-section search on the (unimodal) dispersion
/// function, bracketed on a logarithmic axis. The function blows up at both
/// ends of its domain, so a bracket always exists.
pub fn minimal_speed(d: f64, spec: &KernelSpec, alpha: f64) -> Result<DispersionResult> {
    if !(d > 0.0 && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("d = {d}, alpha = {alpha}")));
    }
    let report = spec.moment_report()?;
    if report.exp_abscissa == 0.0 {
        return Err(Error::ThinTailViolated);
    }
    let mut evaluations = 0usize;
    let mut f = |lambda: f64| -> Result<f64> {
        evaluations += 1;
        dispersion(spec, d, alpha, lambda)
    };

    // bracket [lo, hi] enclosing the minimum
    let (lo, hi) = if report.exp_abscissa.is_finite() {
        let a = report.exp_abscissa;
        (a * 1e-9, a * (1.0 - 1e-12))
    } else {
        let mut hi = 1.0;
        let mut prev = f(hi)?;
        loop {
            let next = f(2.0 * hi)?;
            if next > prev {
                break;
            }
            prev = next;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NoConvergence {
                    context: "dispersion bracketing",
                    iterations: evaluations,
                    metric: hi,
                });
            }
        }
        (1e-12, 2.0 * hi)
    };

    // golden section on t = ln(lambda)
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - inv_phi * (b - a);
    let mut g = a + inv_phi * (b - a);
    let mut fc = f(c.exp())?;
    let mut fg = f(g.exp())?;
    for _ in 0..300 {
        if b - a < 1e-12 {
            break;
        }
        if fc < fg {
            b = g;
            g = c;
            fg = fc;
            c = b - inv_phi * (b - a);
            fc = f(c.exp())?;
        } else {
            a = c;
            c = g;
            fc = fg;
            g = a + inv_phi * (b - a);
            fg = f(g.exp())?;
        }
    }
    let lambda_star = (0.5 * (a + b)).exp();
    let c_star = f(lambda_star)?;
    Ok(DispersionResult {
        c_star,
        lambda_star,
        evaluations,
    })
}

/// Semi-wave discretization on `[-L_w, 0]` for a fixed speed: the advection
/// term uses the downwind one-sided difference (information enters from the
/// vanishing right boundary for positive speeds), and each relaxation sweep
/// solves the local quadratic exactly while lagging the nonlocal term.
struct SemiWaveGrid<'a> {
    kernel: &'a SampledKernel,
    d: f64,
    alpha: f64,
    beta: f64,
    grid: Grid,
    /// `tail_cdf(x_i + L_w)`: kernel mass reaching node `i` from the
    /// substituted far field.
    tail_in: Vec<f64>,
    /// `tail_cdf(-x_i)`: kernel mass crossing the front from node `i`.
    cross_out: Vec<f64>,
    /// Analytic far-field part of the flux integral.
    flux_tail: f64,
}

impl<'a> SemiWaveGrid<'a> {
    fn new(kernel: &'a SampledKernel, d: f64, alpha: f64, beta: f64, l_wave: f64) -> Result<Self> {
        let grid = Grid::covering(-l_wave, l_wave, kernel.h())?;
        let span = grid.span();
        let plateau = alpha / beta;
        let tail_in = grid.xs().map(|x| kernel.tail_cdf(x + span)).collect();
        let cross_out = grid.xs().map(|x| kernel.tail_cdf(-x)).collect();
        let flux_tail = plateau * kernel.tail_cdf_integral(span)?;
        Ok(Self {
            kernel,
            d,
            alpha,
            beta,
            grid,
            tail_in,
            cross_out,
            flux_tail,
        })
    }

    fn convolution(&self, phi: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
        trapezoid_weighted(phi, scratch);
        banded_apply_into(self.kernel.taps(), self.kernel.half_band(), scratch, 0, out);
        let plateau = self.alpha / self.beta;
        for (o, t) in out.iter_mut().zip(&self.tail_in) {
            *o += plateau * t;
        }
    }

    /// One right-to-left sweep at speed `c`; returns the sup change.
    fn sweep(&self, c: f64, phi: &mut [f64], conv: &[f64]) -> f64 {
        let n = phi.len();
        let h = self.grid.h;
        let b_coef = self.d + c / h - self.alpha;
        let mut change = 0.0f64;
        phi[n - 1] = 0.0;
        for i in (0..n - 1).rev() {
            let rhs = self.d * conv[i] + (c / h) * phi[i + 1];
            let disc = b_coef * b_coef + 4.0 * self.beta * rhs;
            let new = (disc.sqrt() - b_coef) / (2.0 * self.beta);
            change = change.max((new - phi[i]).abs());
            phi[i] = new;
        }
        change
    }

    /// Relaxes the profile at fixed speed until sweeps stop moving it.
    fn relax(&self, c: f64, phi: &mut Vec<f64>, tol: f64) -> Result<usize> {
        let mut scratch = Vec::new();
        let mut conv = vec![0.0; phi.len()];
        for it in 0..50_000 {
            self.convolution(phi, &mut scratch, &mut conv);
            let change = self.sweep(c, phi, &conv);
            if change <= tol {
                return Ok(it + 1);
            }
        }
        Err(Error::NoConvergence {
            context: "semi-wave profile relaxation",
            iterations: 50_000,
            metric: tol,
        })
    }

    /// Flux integral `mu`-free part: `sum phi(x) tail_cdf(-x) h + far tail`.
    fn flux(&self, phi: &[f64]) -> f64 {
        let n = phi.len();
        let h = self.grid.h;
        let mut acc = 0.0;
        for i in 0..n {
            acc += trapezoid_weight(i, n) * phi[i] * self.cross_out[i];
        }
        acc * h + self.flux_tail
    }

    /// Steady-equation defect including the advection term (diagnostics).
    fn defect_sup(&self, c: f64, phi: &[f64]) -> f64 {
        let n = phi.len();
        let h = self.grid.h;
        let mut scratch = Vec::new();
        let mut conv = vec![0.0; n];
        self.convolution(phi, &mut scratch, &mut conv);
        let mut sup = 0.0f64;
        for i in 0..n - 1 {
            let dphi = (phi[i + 1] - phi[i]) / h;
            let g = self.d * conv[i] - self.d * phi[i]
                + c * dphi
                + phi[i] * (self.alpha - self.beta * phi[i]);
            sup = sup.max(g.abs());
        }
        sup
    }
}

/// Solves the semi-wave problem: alternate profile relaxation at fixed speed
/// with under-relaxed updates of the speed from the flux integral.
pub fn solve_semiwave(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    beta: f64,
    mu: f64,
    l_wave: f64,
    tol: f64,
) -> Result<SemiWaveResult> {
    if !(d > 0.0 && alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "d = {d}, alpha = {alpha}, beta = {beta}"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu = {mu}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol = {tol}")));
    }
    let report = kernel.moment_report();
    if !report.first_moment_finite {
        return Err(Error::FatTailViolatesJ1);
    }

    let sw = SemiWaveGrid::new(kernel, d, alpha, beta, l_wave)?;
    let plateau = alpha / beta;

    let c0 = if report.exp_abscissa > 0.0 {
        minimal_speed(d, kernel.spec(), alpha)?.c_star
    } else {
        1.0
    };
    // start from the plateau sloping to zero at the front
    let n = sw.grid.n;
    let mut phi: Vec<f64> = (0..n)
        .map(|i| plateau * (1.0 - i as f64 / (n - 1) as f64))
        .collect();

    // The speed closure g(c) = mu * flux(phi_c) - c is strictly decreasing
    // (faster waves carry lower profiles), so its unique zero is found by
    // bracketing and bisection. Profiles warm start across evaluations.
    let inner_tol = (tol * 1e-2).clamp(1e-13, 1e-9);
    let mut iterations = 0usize;
    let closure = |c: f64, phi: &mut Vec<f64>, iters: &mut usize| -> Result<f64> {
        *iters += sw.relax(c, phi, inner_tol)?;
        Ok(mu * sw.flux(phi) - c)
    };

    let mut c_lo;
    let mut c_hi;
    let g0 = closure(c0, &mut phi, &mut iterations)?;
    if g0 >= 0.0 {
        c_lo = c0;
        c_hi = 2.0 * c0.max(0.5);
        while closure(c_hi, &mut phi, &mut iterations)? > 0.0 {
            c_lo = c_hi;
            c_hi *= 2.0;
            if c_hi > 1e9 {
                return Err(Error::NoConvergence {
                    context: "semi-wave speed bracketing",
                    iterations,
                    metric: c_hi,
                });
            }
        }
    } else {
        c_hi = c0;
        c_lo = 0.5 * c0;
        while closure(c_lo, &mut phi, &mut iterations)? < 0.0 {
            c_hi = c_lo;
            c_lo *= 0.5;
            if c_lo < 1e-12 {
                break;
            }
        }
    }

    let mut c = 0.5 * (c_lo + c_hi);
    let mut c_residual = f64::INFINITY;
    for _ in 0..200 {
        c = 0.5 * (c_lo + c_hi);
        let g = closure(c, &mut phi, &mut iterations)?;
        c_residual = g.abs();
        if c_residual <= tol * c.max(1.0) {
            break;
        }
        if g > 0.0 {
            c_lo = c;
        } else {
            c_hi = c;
        }
        if c_hi - c_lo < 1e-15 * c.max(1.0) {
            break;
        }
    }
    if c_residual > tol * c.max(1.0) {
        return Err(Error::NoConvergence {
            context: "semi-wave speed bisection",
            iterations,
            metric: c_residual,
        });
    }
    iterations += sw.relax(c, &mut phi, inner_tol)?;
    let c_residual = (c - mu * sw.flux(&phi)).abs();

    // the profile must fall strictly toward the front and sit near its
    // far-field plateau at the truncation end
    let back = phi[0];
    if back < 0.98 * plateau {
        return Err(Error::TruncationUnstable(format!(
            "profile reaches only {back:.6} of plateau {plateau:.6} at the wave-domain end; \
             enlarge the wave domain"
        )));
    }
    for w in phi.windows(2) {
        if w[1] > w[0] + 1e-12 * plateau {
            return Err(Error::NoConvergence {
                context: "semi-wave profile monotonicity",
                iterations,
                metric: w[1] - w[0],
            });
        }
    }

    Ok(SemiWaveResult {
        c,
        profile: phi,
        grid: sw.grid,
        beta,
        mu,
        c_residual,
        iterations,
    })
}

/// Sup-norm of the semi-wave equation defect at a solved pair (diagnostics).
pub fn semiwave_defect_sup(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    result: &SemiWaveResult,
) -> Result<f64> {
    let sw = SemiWaveGrid::new(kernel, d, alpha, result.beta, result.grid.span())?;
    Ok(sw.defect_sup(result.c, &result.profile))
}

/// The four bounding semi-wave speeds for the coupled system.
pub fn speed_bounds(
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
    l_wave: f64,
    tol: f64,
) -> Result<SpeedBounds> {
    let c1_lo = solve_semiwave(
        params.d1,
        j1,
        params.alpha1(),
        2.0 * params.r1,
        params.mu1,
        l_wave,
        tol,
    )?
    .c;
    let c1_hi = solve_semiwave(params.d1, j1, params.alpha1(), params.r1, params.mu1, l_wave, tol)?.c;
    let c2_lo = solve_semiwave(
        params.d2,
        j2,
        params.alpha2(),
        2.0 * params.r2,
        params.mu2,
        l_wave,
        tol,
    )?
    .c;
    let c2_hi = solve_semiwave(params.d2, j2, params.alpha2(), params.r2, params.mu2, l_wave, tol)?.c;
    Ok(SpeedBounds {
        c1_lo,
        c1_hi,
        c2_lo,
        c2_hi,
    })
}
