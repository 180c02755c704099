//! Dispersal kernels: analytic families, moment classification, sampling,
//! and the nonlocal convolution operator on gridded fields.
//!
//! A kernel `J` is an even, continuous, bounded probability density with
//! `J(0) > 0`. Two tail conditions drive the qualitative theory:
//!
//! * finite first moment: a finite spreading speed exists;
//! * finite exponential moment ("thin tail"): a finite minimal traveling-wave
//!   speed exists.
//!
//! Sampled kernels carry their analytic tail CDF so that front-flux integrals
//! and half-line tail substitutions stay exact beyond the truncation radius.

use crate::error::{Error, Result};
use crate::grid::{dot, trapezoid, Field, Grid};
use serde::{Deserialize, Serialize};

/// Default cap on the truncation radius for slowly decaying kernels.
pub const DEFAULT_R_MAX: f64 = 400.0;

/// Analytic kernel family with positive shape parameters.
///
/// Densities:
/// * `laplace`:   (sigma/2) exp(-sigma |x|)
/// * `gaussian`:  (sigma/sqrt(pi)) exp(-(sigma x)^2)
/// * `tent`:      (1/w) max(0, 1 - |x|/w)
/// * `algebraic`: ((p-1)/2) (1 + |x|)^(-p), requires p > 1
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Laplace { sigma: f64 },
    Gaussian { sigma: f64 },
    Tent { half_width: f64 },
    Algebraic { exponent: f64 },
}

/// Moment classification of a kernel family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    /// Total mass (1 for every valid spec).
    pub mass: f64,
    /// Whether the first tail moment is finite.
    pub first_moment_finite: bool,
    /// Supremum of rates with a finite exponential moment
    /// (`f64::INFINITY` for compactly supported or Gaussian tails).
    pub exp_abscissa: f64,
}

impl KernelSpec {
    /// Checks shape-parameter positivity. Normalizability of the algebraic
    /// family is a separate failure mode reported by [`sample_kernel`].
    pub fn validate(&self) -> Result<()> {
        let (name, value) = match *self {
            KernelSpec::Laplace { sigma } => ("laplace sigma", sigma),
            KernelSpec::Gaussian { sigma } => ("gaussian sigma", sigma),
            KernelSpec::Tent { half_width } => ("tent half_width", half_width),
            KernelSpec::Algebraic { exponent } => ("algebraic exponent", exponent),
        };
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} = {value}, must be positive")));
        }
        Ok(())
    }

    fn check_normalizable(&self) -> Result<()> {
        self.validate()?;
        if let KernelSpec::Algebraic { exponent } = *self {
            if exponent <= 1.0 {
                return Err(Error::NonNormalizable(format!(
                    "algebraic exponent {exponent} <= 1 gives divergent mass"
                )));
            }
        }
        Ok(())
    }

    /// Density value at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            KernelSpec::Laplace { sigma } => 0.5 * sigma * (-sigma * ax).exp(),
            KernelSpec::Gaussian { sigma } => {
                sigma / core::f64::consts::PI.sqrt() * (-(sigma * ax).powi(2)).exp()
            }
            KernelSpec::Tent { half_width } => (1.0 - ax / half_width).max(0.0) / half_width,
            KernelSpec::Algebraic { exponent } => {
                0.5 * (exponent - 1.0) * (1.0 + ax).powf(-exponent)
            }
        }
    }

    /// One-sided tail mass `P(z) = integral of J over [z, inf)` for `z >= 0` (closed form).
    pub fn tail_cdf(&self, z: f64) -> f64 {
        debug_assert!(z >= 0.0);
        match *self {
            KernelSpec::Laplace { sigma } => 0.5 * (-sigma * z).exp(),
            KernelSpec::Gaussian { sigma } => 0.5 * libm::erfc(sigma * z),
            KernelSpec::Tent { half_width } => {
                if z >= half_width {
                    0.0
                } else {
                    (half_width - z).powi(2) / (2.0 * half_width * half_width)
                }
            }
            KernelSpec::Algebraic { exponent } => 0.5 * (1.0 + z).powf(1.0 - exponent),
        }
    }

    /// Second tail antiderivative `integral of tail_cdf over [z, inf)` for `z >= 0`.
    /// Finite only when the first moment is finite.
    pub fn tail_cdf_integral(&self, z: f64) -> Result<f64> {
        debug_assert!(z >= 0.0);
        match *self {
            KernelSpec::Laplace { sigma } => Ok(0.5 / sigma * (-sigma * z).exp()),
            KernelSpec::Gaussian { sigma } => {
                let u = sigma * z;
                let ierfc = (-u * u).exp() / core::f64::consts::PI.sqrt() - u * libm::erfc(u);
                Ok(0.5 / sigma * ierfc)
            }
            KernelSpec::Tent { half_width } => {
                if z >= half_width {
                    Ok(0.0)
                } else {
                    Ok((half_width - z).powi(3) / (6.0 * half_width * half_width))
                }
            }
            KernelSpec::Algebraic { exponent } => {
                if exponent <= 2.0 {
                    Err(Error::FatTailViolatesJ1)
                } else {
                    Ok(0.5 * (1.0 + z).powf(2.0 - exponent) / (exponent - 2.0))
                }
            }
        }
    }

    /// Analytic moment classification.
    pub fn moment_report(&self) -> Result<MomentReport> {
        self.check_normalizable()?;
        let (first, abscissa) = match *self {
            KernelSpec::Laplace { sigma } => (true, sigma),
            KernelSpec::Gaussian { .. } => (true, f64::INFINITY),
            KernelSpec::Tent { .. } => (true, f64::INFINITY),
            KernelSpec::Algebraic { exponent } => (exponent > 2.0, 0.0),
        };
        Ok(MomentReport {
            mass: 1.0,
            first_moment_finite: first,
            exp_abscissa: abscissa,
        })
    }

    /// Exponential moment `M(lambda) = \int J(x) e^{lambda x} dx` in closed
    /// form. `M(0) = 1` and `M` is strictly increasing for `lambda >= 0`.
    pub fn exp_moment(&self, lambda: f64) -> Result<f64> {
        let report = self.moment_report()?;
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda = {lambda}, must be >= 0")));
        }
        if lambda >= report.exp_abscissa {
            return Err(Error::DivergentMoment {
                lambda,
                abscissa: report.exp_abscissa,
            });
        }
        Ok(match *self {
            KernelSpec::Laplace { sigma } => sigma * sigma / (sigma * sigma - lambda * lambda),
            KernelSpec::Gaussian { sigma } => (lambda * lambda / (4.0 * sigma * sigma)).exp(),
            KernelSpec::Tent { half_width } => {
                let lw = lambda * half_width;
                if lw.abs() < 1e-6 {
                    // series: 1 + (lw)^2/12 + O(lw^4)
                    1.0 + lw * lw / 12.0
                } else {
                    2.0 * (lw.cosh() - 1.0) / (lw * lw)
                }
            }
            KernelSpec::Algebraic { .. } => unreachable!("abscissa 0 rejected above"),
        })
    }
}

/// Moment classification of a kernel family (operation form).
pub fn moment_report(spec: &KernelSpec) -> Result<MomentReport> {
    spec.moment_report()
}

/// Exponential moment of a kernel family (operation form).
pub fn exp_moment(spec: &KernelSpec, lambda: f64) -> Result<f64> {
    spec.exp_moment(lambda)
}

/// A kernel sampled on the lattice `{-R, ..., -h, 0, h, ..., R}` and
/// rescaled so that sampled trapezoid mass plus the analytic two-sided tail
/// mass is exactly 1.
#[derive(Debug, Clone)]
pub struct SampledKernel {
    spec: KernelSpec,
    h: f64,
    /// Density samples at `k h` for `k = -nb ..= nb` (length `2 nb + 1`).
    values: Vec<f64>,
    /// `h * values`, the ready-to-dot quadrature taps.
    taps: Vec<f64>,
    nb: usize,
    tail_mass: f64,
    capped: bool,
    cap_radius: f64,
}

impl SampledKernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Truncation radius `R = nb * h`.
    pub fn radius(&self) -> f64 {
        self.nb as f64 * self.h
    }

    pub fn half_band(&self) -> usize {
        self.nb
    }

    /// Density samples, symmetric about the center index `nb`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One-sided analytic mass beyond the truncation radius.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Whether the truncation radius hit the configured cap; when true the
    /// two-sided `2 * tail_mass` is neglected inside field convolutions and
    /// should be surfaced in run metadata.
    pub fn capped(&self) -> bool {
        self.capped
    }

    /// Sampled trapezoid mass plus the analytic tail mass.
    pub fn total_mass(&self) -> f64 {
        trapezoid(&self.values, self.h) + 2.0 * self.tail_mass
    }

    /// One-sided tail mass `integral of J over [z, inf)` for `z >= 0`, analytic.
    pub fn tail_cdf(&self, z: f64) -> f64 {
        self.spec.tail_cdf(z)
    }

    /// `integral of tail_cdf over [z, inf)` for `z >= 0`, analytic.
    pub fn tail_cdf_integral(&self, z: f64) -> Result<f64> {
        self.spec.tail_cdf_integral(z)
    }

    pub fn moment_report(&self) -> MomentReport {
        // the spec was validated at sampling time
        self.spec.moment_report().expect("validated at sampling")
    }

    /// Resamples the same family at a different spacing (same tolerance and
    /// cap); used by multilevel solvers.
    pub fn resample(&self, h: f64, eps_tail: f64) -> Result<SampledKernel> {
        sample_kernel_capped(&self.spec, h, eps_tail, self.cap_radius)
    }
}

impl SampledKernel {
    fn build(spec: KernelSpec, h: f64, nb: usize, capped: bool, cap_radius: f64) -> Self {
        let radius = nb as f64 * h;
        let tail_mass = spec.tail_cdf(radius);
        let mut values: Vec<f64> = (0..=2 * nb)
            .map(|k| {
                let x = (k as isize - nb as isize) as f64 * h;
                spec.density(x)
            })
            .collect();
        let raw_mass = trapezoid(&values, h);
        let target = 1.0 - 2.0 * tail_mass;
        let scale = target / raw_mass;
        for v in &mut values {
            *v *= scale;
        }
        let taps = values.iter().map(|v| v * h).collect();
        Self {
            spec,
            h,
            values,
            taps,
            nb,
            tail_mass,
            capped,
            cap_radius,
        }
    }
}

/// Samples a kernel with the default truncation cap.
pub fn sample_kernel(spec: &KernelSpec, h: f64, eps_tail: f64) -> Result<SampledKernel> {
    sample_kernel_capped(spec, h, eps_tail, DEFAULT_R_MAX)
}

/// Samples a kernel, truncating where the two-sided analytic tail mass drops
/// below `eps_tail`, or at `r_max` for heavy tails (the neglected mass is
/// then recorded on the kernel and handled analytically where a tail CDF is
/// integrable).
pub fn sample_kernel_capped(
    spec: &KernelSpec,
    h: f64,
    eps_tail: f64,
    r_max: f64,
) -> Result<SampledKernel> {
    spec.check_normalizable()?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("spacing h = {h}")));
    }
    if !(eps_tail > 0.0 && eps_tail <= 1e-4) {
        return Err(Error::InvalidParameter(format!(
            "eps_tail = {eps_tail}, must lie in (0, 1e-4]"
        )));
    }
    if !(r_max >= h) {
        return Err(Error::InvalidParameter(format!("r_max = {r_max} below spacing {h}")));
    }

    let nb_cap = (r_max / h).floor().max(1.0) as usize;
    // smallest nb with two-sided tail mass <= eps_tail, found by doubling
    // then bisecting on the analytic tail CDF
    let tail2 = |nb: usize| 2.0 * spec.tail_cdf(nb as f64 * h);
    let nb = if tail2(nb_cap) > eps_tail {
        return Ok(SampledKernel::build(*spec, h, nb_cap, true, r_max));
    } else {
        let mut hi = 1usize;
        while tail2(hi) > eps_tail {
            hi *= 2;
        }
        let mut lo = hi / 2; // tail2(lo) > eps_tail (or lo == 0)
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if tail2(mid) > eps_tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi.min(nb_cap)
    };
    Ok(SampledKernel::build(*spec, h, nb, false, r_max))
}

/// Applies the banded quadrature operator `y_i = sum_j taps[(i - j) + nb] * src[j]`
/// where destination node `i` sits at lattice index `i + dst_offset` on the
/// source lattice. Kernel evenness lets the tap window run forward in `j`.
pub(crate) fn banded_apply_into(
    taps: &[f64],
    nb: usize,
    src: &[f64],
    dst_offset: isize,
    dst: &mut [f64],
) {
    let m = src.len() as isize;
    let nbi = nb as isize;
    for (i, out) in dst.iter_mut().enumerate() {
        let p = i as isize + dst_offset;
        let j0 = (p - nbi).max(0);
        let j1 = (p + nbi).min(m - 1);
        if j1 < j0 {
            *out = 0.0;
            continue;
        }
        let base = (j0 - p + nbi) as usize;
        let len = (j1 - j0 + 1) as usize;
        *out = dot(&taps[base..base + len], &src[j0 as usize..j0 as usize + len]);
    }
}

/// Weighted copy of a field for trapezoid quadrature over its domain
/// (endpoint samples halved).
pub(crate) fn trapezoid_weighted(values: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(values);
    let n = out.len();
    if n >= 1 {
        out[0] *= 0.5;
    }
    if n >= 2 {
        out[n - 1] *= 0.5;
    }
}

/// Convolution `\int_D J(x - y) w(y) dy` of a sampled kernel against a field
/// on domain `D = [grid start, grid end]`, evaluated at the nodes of `eval`
/// (which must share the field's lattice), by composite trapezoid quadrature.
pub fn convolve(kernel: &SampledKernel, field: &Field, eval: &Grid) -> Result<Vec<f64>> {
    let scale = field.grid.h.max(1.0);
    if (kernel.h - field.grid.h).abs() > 1e-9 * scale {
        return Err(Error::GridMismatch(format!(
            "kernel spacing {} vs field spacing {}",
            kernel.h, field.grid.h
        )));
    }
    let offset = field.grid.lattice_offset(eval)?;
    let mut weighted = Vec::new();
    trapezoid_weighted(&field.values, &mut weighted);
    let mut out = vec![0.0; eval.n];
    banded_apply_into(&kernel.taps, kernel.nb, &weighted, offset, &mut out);
    Ok(out)
}

impl SampledKernel {
    pub(crate) fn taps(&self) -> &[f64] {
        &self.taps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn tent_trapezoid_mass_is_exact() {
        let spec = KernelSpec::Tent { half_width: 1.0 };
        for h in [0.5, 0.25, 0.125, 0.1] {
            let k = sample_kernel(&spec, h, 1e-8).unwrap();
            assert!((k.total_mass() - 1.0).abs() < 1e-12, "h = {h}");
            assert_eq!(k.tail_mass(), 0.0);
            assert!((k.radius() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_truncation_radius_matches_closed_form() {
        // two-sided tail of (1/2) e^{-|x|} beyond R is e^{-R}
        let spec = KernelSpec::Laplace { sigma: 1.0 };
        let k = sample_kernel(&spec, 0.01, 1e-8).unwrap();
        let r_expected = -(1e-8f64).ln();
        assert!((k.radius() - r_expected).abs() <= 0.01 + 1e-12);
        assert!(2.0 * k.tail_cdf(k.radius()) <= 1e-8);
        assert!((k.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn algebraic_mass_divergence_is_rejected() {
        let spec = KernelSpec::Algebraic { exponent: 1.0 };
        assert!(matches!(
            sample_kernel(&spec, 0.05, 1e-6),
            Err(Error::NonNormalizable(_))
        ));
    }

    #[test]
    fn algebraic_truncation_is_capped() {
        let spec = KernelSpec::Algebraic { exponent: 2.0 };
        let k = sample_kernel_capped(&spec, 0.05, 1e-8, 50.0).unwrap();
        assert!(k.capped());
        assert!((k.radius() - 50.0).abs() < 0.05 + 1e-12);
        // neglected mass is recorded, and bookkeeping still sums to 1
        assert!(k.tail_mass() > 0.0);
        assert!((k.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_reports_match_family_tails() {
        let lap = moment_report(&KernelSpec::Laplace { sigma: 1.0 }).unwrap();
        assert!(lap.first_moment_finite);
        assert_eq!(lap.exp_abscissa, 1.0);

        let alg2 = moment_report(&KernelSpec::Algebraic { exponent: 2.0 }).unwrap();
        assert!(!alg2.first_moment_finite);
        assert_eq!(alg2.exp_abscissa, 0.0);

        let alg3 = moment_report(&KernelSpec::Algebraic { exponent: 3.0 }).unwrap();
        assert!(alg3.first_moment_finite);
        assert_eq!(alg3.exp_abscissa, 0.0);

        let tent = moment_report(&KernelSpec::Tent { half_width: 2.0 }).unwrap();
        assert!(tent.first_moment_finite);
        assert!(tent.exp_abscissa.is_infinite());

        let gauss = moment_report(&KernelSpec::Gaussian { sigma: 0.7 }).unwrap();
        assert!(gauss.first_moment_finite);
        assert!(gauss.exp_abscissa.is_infinite());

        assert!(lap.first_moment_finite || lap.exp_abscissa == 0.0);
    }

    #[test]
    fn exp_moment_closed_forms() {
        let lap = KernelSpec::Laplace { sigma: 1.0 };
        assert!((exp_moment(&lap, 0.5).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!((exp_moment(&lap, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            exp_moment(&lap, 1.0),
            Err(Error::DivergentMoment { .. })
        ));
        assert!(matches!(
            exp_moment(&KernelSpec::Algebraic { exponent: 3.0 }, 0.1),
            Err(Error::DivergentMoment { .. })
        ));
        // quadrature cross-check for the tent closed form
        let tent = KernelSpec::Tent { half_width: 1.5 };
        let lam = 0.8;
        let h = 1e-4;
        let n = (3.0 / h) as usize;
        let quad: f64 = (0..=n)
            .map(|i| {
                let x = -1.5 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * tent.density(x) * (lam * x).exp() * h
            })
            .sum();
        assert!((exp_moment(&tent, lam).unwrap() - quad).abs() < 1e-7);
    }

    #[test]
    fn exp_moment_strictly_increasing() {
        let spec = KernelSpec::Gaussian { sigma: 1.3 };
        let mut prev = exp_moment(&spec, 0.0).unwrap();
        for i in 1..20 {
            let m = exp_moment(&spec, 0.1 * i as f64).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn convolve_zero_field_is_zero() {
        let k = sample_kernel(&KernelSpec::Laplace { sigma: 1.0 }, 0.1, 1e-6).unwrap();
        let grid = Grid::covering(0.0, 5.0, 0.1).unwrap();
        let field = Field::constant(grid, 0.0);
        let out = convolve(&k, &field, &grid).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convolve_unit_field_inside_tent_support_is_one() {
        let h = 0.25;
        let k = sample_kernel(&KernelSpec::Tent { half_width: 1.0 }, h, 1e-8).unwrap();
        let grid = Grid::covering(0.0, 4.0, h).unwrap();
        let field = Field::constant(grid, 1.0);
        let out = convolve(&k, &field, &grid).unwrap();
        let mid = grid.n / 2; // x = 2, support [1, 3] inside (0, 4)
        assert!((out[mid] - 1.0).abs() < 1e-12);
        // and never above 1 anywhere (sub-stochastic)
        assert!(out.iter().all(|&v| v <= 1.0 + 1e-12));
    }

    #[test]
    fn convolve_boundary_value_matches_fine_quadrature() {
        // w = 1 on (0, l), laplace kernel, evaluated at x = 0: exact value is
        // 1/2 - tail_cdf(l); compare the h quadrature against h/10
        let l = 6.0;
        let spec = KernelSpec::Laplace { sigma: 1.0 };
        let h = 0.05;
        let k = sample_kernel(&spec, h, 1e-10).unwrap();
        let grid = Grid::covering(0.0, l, h).unwrap();
        let out = convolve(&k, &Field::constant(grid, 1.0), &grid).unwrap();

        let hf = h / 10.0;
        let kf = sample_kernel(&spec, hf, 1e-10).unwrap();
        let gridf = Grid::covering(0.0, l, hf).unwrap();
        let outf = convolve(&kf, &Field::constant(gridf, 1.0), &gridf).unwrap();

        assert!((out[0] - outf[0]).abs() < 5e-4);
        let exact = 0.5 - spec.tail_cdf(l);
        assert!((outf[0] - exact).abs() < 5e-6);
        assert!((out[0] - exact).abs() < 5e-4);
    }

    #[test]
    fn convolve_rejects_mismatched_spacing() {
        let k = sample_kernel(&KernelSpec::Laplace { sigma: 1.0 }, 0.1, 1e-6).unwrap();
        let grid = Grid::covering(0.0, 5.0, 0.2).unwrap();
        let field = Field::constant(grid, 1.0);
        assert!(matches!(
            convolve(&k, &field, &grid),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn convolve_refinement_is_second_order() {
        // smooth gaussian bump field; halving h shrinks the quadrature error
        // by about 4 (trapezoid order)
        let spec = KernelSpec::Gaussian { sigma: 1.0 };
        let l = 10.0;
        let value_at = |h: f64| -> f64 {
            let k = sample_kernel(&spec, h, 1e-10).unwrap();
            let grid = Grid::covering(0.0, l, h).unwrap();
            let vals: Vec<f64> = grid.xs().map(|x| (-(x - 5.0f64).powi(2)).exp()).collect();
            let field = Field::new(grid, vals).unwrap();
            convolve(&k, &field, &grid).unwrap()[(5.0 / h) as usize]
        };
        let reference = value_at(0.0125);
        let e1 = (value_at(0.1) - reference).abs();
        let e2 = (value_at(0.05) - reference).abs();
        let ratio = e1 / e2;
        assert!(
            (3.0..6.0).contains(&ratio),
            "refinement ratio {ratio}, errors {e1:.3e} {e2:.3e}"
        );
    }
}
