//! Run scenarios: model parameters, kernel specs, numerics, and initial
//! data bundled so that simulations can be launched, re-launched with a
//! varied parameter, and classified, all deterministically.

use crate::error::{Error, Result};
use crate::evolve::{
    classify, covered_nodes, simulate_free_boundary, CriticalMu, Outcome, SimOptions, SimOutput,
    Species, Verdict,
};
use crate::kernels::{sample_kernel_capped, KernelSpec, SampledKernel, DEFAULT_R_MAX};
use crate::reaction::CoopParams;
use crate::spectral::threshold_length;
use serde::{Deserialize, Serialize};

/// Named initial-profile family, positive on `[0, s0)` and zero at the
/// front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialProfile {
    /// Constant plateau at `amplitude`.
    Plateau { amplitude: f64 },
    /// Triangular bump `amplitude * (1 - x/s0)`.
    Triangle { amplitude: f64 },
}

impl InitialProfile {
    pub fn amplitude(&self) -> f64 {
        match *self {
            InitialProfile::Plateau { amplitude } => amplitude,
            InitialProfile::Triangle { amplitude } => amplitude,
        }
    }

    /// Samples the profile on the nodes covering `[0, s0]`.
    pub fn build(&self, s0: f64, h: f64) -> Vec<f64> {
        let n = covered_nodes(s0, h);
        let mut values: Vec<f64> = (0..n)
            .map(|j| {
                let x = j as f64 * h;
                match *self {
                    InitialProfile::Plateau { amplitude } => amplitude,
                    InitialProfile::Triangle { amplitude } => amplitude * (1.0 - x / s0).max(0.0),
                }
            })
            .collect();
        // the datum vanishes at the front
        if let Some(last) = values.last_mut() {
            let x_last = (n - 1) as f64 * h;
            if (x_last - s0).abs() < 1e-9 * h.max(1.0) {
                *last = 0.0;
            }
        }
        values
    }
}

/// Grid, horizon, and tolerance choices for a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Numerics {
    pub h: f64,
    /// Explicit step; defaults to the stability bound when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Truncation length for half-line steady problems.
    #[serde(default = "default_l_halfline")]
    pub l_halfline: f64,
    #[serde(default = "default_eps_tail")]
    pub eps_tail: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: f64,
    #[serde(default = "default_max_extent")]
    pub max_extent: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_l_halfline() -> f64 {
    150.0
}
fn default_eps_tail() -> f64 {
    1e-8
}
fn default_r_max() -> f64 {
    DEFAULT_R_MAX
}
fn default_sample_every() -> f64 {
    0.5
}
fn default_max_extent() -> f64 {
    1e4
}
fn default_tol() -> f64 {
    1e-8
}

/// A complete, deterministic run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub params: CoopParams,
    pub j1: KernelSpec,
    pub j2: KernelSpec,
    pub numerics: Numerics,
    pub init_u: InitialProfile,
    pub init_v: InitialProfile,
    /// Relaxes positivity of `b`, `q` and of the initial amplitudes, which
    /// unlocks decoupled scalar baselines.
    #[serde(default)]
    pub test_mode: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate(self.test_mode)?;
        self.j1.validate()?;
        self.j2.validate()?;
        let n = &self.numerics;
        for (name, v) in [
            ("h", n.h),
            ("t_final", n.t_final),
            ("l_halfline", n.l_halfline),
            ("eps_tail", n.eps_tail),
            ("r_max", n.r_max),
            ("sample_every", n.sample_every),
            ("max_extent", n.max_extent),
            ("tol", n.tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("numerics.{name} = {v}")));
            }
        }
        if let Some(dt) = n.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::InvalidParameter(format!("numerics.dt = {dt}")));
            }
        }
        if self.params.s10 < 2.0 * n.h || self.params.s20 < 2.0 * n.h {
            return Err(Error::InvalidParameter(format!(
                "initial fronts ({}, {}) must be at least 2h = {}",
                self.params.s10,
                self.params.s20,
                2.0 * n.h
            )));
        }
        for (name, profile) in [("init_u", self.init_u), ("init_v", self.init_v)] {
            let amp = profile.amplitude();
            let ok = if self.test_mode { amp >= 0.0 } else { amp > 0.0 };
            if !ok || !amp.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} amplitude = {amp} (zero data needs test_mode)"
                )));
            }
        }
        Ok(())
    }

    pub fn sample_kernels(&self) -> Result<(SampledKernel, SampledKernel)> {
        let n = &self.numerics;
        Ok((
            sample_kernel_capped(&self.j1, n.h, n.eps_tail, n.r_max)?,
            sample_kernel_capped(&self.j2, n.h, n.eps_tail, n.r_max)?,
        ))
    }

    pub fn initial_fields(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.init_u.build(self.params.s10, self.numerics.h),
            self.init_v.build(self.params.s20, self.numerics.h),
        )
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            dt: self.numerics.dt,
            t_final: self.numerics.t_final,
            sample_every: self.numerics.sample_every,
            max_extent: self.numerics.max_extent,
            early_stop: None,
        }
    }

    /// Runs the free-boundary system described by this scenario.
    pub fn run(&self) -> Result<(SimOutput, Outcome, SampledKernel, SampledKernel)> {
        self.validate()?;
        let (j1, j2) = self.sample_kernels()?;
        let (u0, v0) = self.initial_fields();
        let out = simulate_free_boundary(&self.params, &j1, &j2, u0, v0, &self.sim_options())?;
        let outcome = classify(&out.history, &out.final_state, &self.params, &j1, &j2)?;
        Ok((out, outcome, j1, j2))
    }
}

/// Parameters that make the two-species stepper integrate the scalar
/// free-boundary problem `(d, P, alpha, beta, mu)` as its first species;
/// the second species is zero in test mode.
pub fn scalar_as_system(d: f64, alpha: f64, beta: f64, mu: f64, s0: f64) -> CoopParams {
    CoopParams {
        d1: d,
        d2: 1.0,
        r1: 0.5 * beta,
        r2: 1.0,
        a: 2.0 * alpha / beta,
        b: 0.0,
        q: 0.0,
        mu1: mu,
        mu2: 1.0,
        s10: s0,
        s20: s0,
    }
}

/// Verdict of one species after a run, extending the horizon (doubling, up
/// to `extensions` times) while the outcome stays undecided.
fn verdict_with_extension(
    scenario: &Scenario,
    species: Species,
    ell: Option<f64>,
    extensions: usize,
) -> Result<Verdict> {
    let mut sc = scenario.clone();
    for _ in 0..=extensions {
        let (j1, j2) = sc.sample_kernels()?;
        let (u0, v0) = sc.initial_fields();
        let mut opts = sc.sim_options();
        opts.early_stop = Some(match species {
            Species::U => (ell, None),
            Species::V => (None, ell),
        });
        let out = simulate_free_boundary(&sc.params, &j1, &j2, u0, v0, &opts)?;
        let outcome = classify(&out.history, &out.final_state, &sc.params, &j1, &j2)?;
        match outcome.verdict(species) {
            Verdict::Undecided => {
                sc.numerics.t_final *= 2.0;
            }
            decided => return Ok(decided),
        }
    }
    Ok(Verdict::Undecided)
}

/// Number of horizon doublings attempted before giving up on a verdict.
const HORIZON_EXTENSIONS: usize = 3;

/// Bisects the expansion coefficient of one species between a vanishing and
/// a spreading verdict. Requires the regime where the critical coefficient
/// exists: growth below diffusion and the initial front below the critical
/// length.
pub fn critical_mu(
    scenario: &Scenario,
    species: Species,
    bracket: (f64, f64),
    tol: f64,
) -> Result<CriticalMu> {
    scenario.validate()?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("relative tolerance {tol}")));
    }
    let (mut mu_lo, mut mu_hi) = bracket;
    if !(mu_lo > 0.0 && mu_hi > mu_lo) {
        return Err(Error::InvalidParameter(format!(
            "bracket ({mu_lo}, {mu_hi}) must be increasing and positive"
        )));
    }
    let p = &scenario.params;
    let (d, alpha, s0) = match species {
        Species::U => (p.d1, p.alpha1(), p.s10),
        Species::V => (p.d2, p.alpha2(), p.s20),
    };
    if alpha >= d {
        return Err(Error::NoRegime(format!(
            "growth {alpha} >= diffusion {d}: spreading happens for every expansion rate"
        )));
    }
    let (j_s, _) = scenario.sample_kernels()?;
    let kernel = match species {
        Species::U => j_s,
        Species::V => scenario.sample_kernels()?.1,
    };
    let ell = threshold_length(d, &kernel, alpha, kernel.h())?.ell;
    if s0 >= ell {
        return Err(Error::NoRegime(format!(
            "initial front {s0} already at or beyond the critical length {ell:.4}"
        )));
    }
    // stop runs only once the front is clearly supercritical, so the
    // classifier can witness a strictly nonnegative eigenvalue there
    let ell_stop = ell * 1.05 + 10.0 * kernel.h();

    let with_mu = |mu: f64| -> Scenario {
        let mut sc = scenario.clone();
        match species {
            Species::U => sc.params.mu1 = mu,
            Species::V => sc.params.mu2 = mu,
        }
        sc
    };
    let verdict_at = |mu: f64| -> Result<Verdict> {
        match verdict_with_extension(&with_mu(mu), species, Some(ell_stop), HORIZON_EXTENSIONS)? {
            Verdict::Undecided => Err(Error::UndecidedAtMidpoint { mu }),
            v => Ok(v),
        }
    };

    let v_lo = verdict_at(mu_lo)?;
    let v_hi = verdict_at(mu_hi)?;
    if v_lo != Verdict::Vanishing || v_hi != Verdict::Spreading {
        return Err(Error::InvalidParameter(format!(
            "bracket verdicts must be (vanishing, spreading), got ({v_lo:?}, {v_hi:?})"
        )));
    }

    while mu_hi - mu_lo > tol * 0.5 * (mu_hi + mu_lo) {
        let mid = 0.5 * (mu_lo + mu_hi);
        match verdict_at(mid)? {
            Verdict::Spreading => mu_hi = mid,
            Verdict::Vanishing => mu_lo = mid,
            Verdict::Undecided => unreachable!("undecided midpoints error out"),
        }
    }
    Ok(CriticalMu {
        mu_star: 0.5 * (mu_lo + mu_hi),
        bracket: (mu_lo, mu_hi),
        verdicts: (Verdict::Vanishing, Verdict::Spreading),
        tolerance: tol,
    })
}
