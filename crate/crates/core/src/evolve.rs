//! Explicit front-tracking time integration of the free-boundary system,
//! fixed-domain and prescribed-front variants, front speed estimation,
//! spreading/vanishing classification, and the critical expansion rate.
//!
//! The stepper is explicit Euler with `dt <= 0.5 / (max d_i + L_f)` where
//! `L_f` bounds the reaction slopes on the invariant box; this keeps every
//! field nonnegative and below its box bound at every accepted step. Fronts
//! are continuous scalars advanced by the dispersal flux across them, with
//! the inner integral collapsed through the analytic kernel tail CDF; a grid
//! node activates (at value zero) when its front crosses it.

use crate::error::{Error, Result};
use crate::grid::{sup_norm, trapezoid_weight, Grid};
use crate::kernels::{banded_apply_into, trapezoid_weighted, SampledKernel};
use crate::reaction::{coexistence_root, CoopParams};
use crate::spectral::{principal_eigenvalue, threshold_length};
use crate::steady::SteadyClass;
use serde::{Deserialize, Serialize};

/// Slack for invariant-box clamping; larger excursions are hard errors.
const BOX_SLACK: f64 = 1e-12;

/// Front-stall threshold: gain over the trailing fifth of the horizon.
pub const STALL_GAIN: f64 = 1e-4;
/// Mass-decay threshold on the species sup-norm.
pub const DECAY_SUP: f64 = 1e-5;
/// Fraction of the horizon used for the stall metric.
pub const STALL_WINDOW: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Species {
    U,
    V,
}

/// Instantaneous simulation state: fields on their supports plus continuous
/// front positions (not grid-snapped).
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub h: f64,
    /// `u` at nodes `0, h, ..., floor(s1/h) h`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub s1: f64,
    pub s2: f64,
}

impl SimState {
    pub fn new(h: f64, u0: Vec<f64>, v0: Vec<f64>, s10: f64, s20: f64) -> Result<Self> {
        let expect1 = covered_nodes(s10, h);
        let expect2 = covered_nodes(s20, h);
        if u0.len() != expect1 || v0.len() != expect2 {
            return Err(Error::GridMismatch(format!(
                "initial fields must cover their fronts: got {} and {} nodes, need {} and {}",
                u0.len(),
                v0.len(),
                expect1,
                expect2
            )));
        }
        Ok(Self {
            t: 0.0,
            h,
            u: u0,
            v: v0,
            s1: s10,
            s2: s20,
        })
    }

    pub fn sup_u(&self) -> f64 {
        sup_norm(&self.u)
    }

    pub fn sup_v(&self) -> f64 {
        sup_norm(&self.v)
    }
}

/// Nodes `x = 0, h, ..., <= s` (front included when on-lattice).
pub fn covered_nodes(s: f64, h: f64) -> usize {
    (s / h + 1e-9).floor() as usize + 1
}

/// One sampled instant of the front trajectories.
#[derive(Debug, Clone, Copy)]
pub struct FrontSample {
    pub t: f64,
    pub s1: f64,
    pub s2: f64,
    pub sup_u: f64,
    pub sup_v: f64,
}

/// Sampled front trajectories with derived speed diagnostics.
#[derive(Debug, Clone, Default)]
pub struct FrontHistory {
    pub samples: Vec<FrontSample>,
}

impl FrontHistory {
    pub fn series(&self, species: Species) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().map(move |s| match species {
            Species::U => (s.t, s.s1),
            Species::V => (s.t, s.s2),
        })
    }

    pub fn sup_series(&self, species: Species) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().map(move |s| match species {
            Species::U => (s.t, s.sup_u),
            Species::V => (s.t, s.sup_v),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }
}

/// Reaction-slope bound on the invariant box `[0, bu] x [0, bv]`.
pub fn lipschitz_bound(params: &CoopParams, bu: f64, bv: f64) -> f64 {
    let l1 = params.r1 * (params.a + 4.0 * bu) + params.r1 * params.b * bu * bu;
    let l2 = params.r2 * (1.0 + 4.0 * bv) + params.r2 * params.q * bv * bv;
    l1.max(l2)
}

/// Largest stable explicit step for fields bounded by `(bu, bv)`.
pub fn dt_max(params: &CoopParams, bu: f64, bv: f64) -> f64 {
    0.5 / (params.d1.max(params.d2) + lipschitz_bound(params, bu, bv))
}

/// Explicit Euler stepper owning its scratch buffers.
pub struct Stepper<'a> {
    params: &'a CoopParams,
    j1: &'a SampledKernel,
    j2: &'a SampledKernel,
    dt: f64,
    box_u: f64,
    box_v: f64,
    weighted: Vec<f64>,
    conv: Vec<f64>,
    u_old: Vec<f64>,
    /// Values clamped back into the box (within slack) so far.
    pub clamp_count: u64,
}

impl<'a> Stepper<'a> {
    /// `dt = None` picks the stability bound for the given initial sups.
    pub fn new(
        params: &'a CoopParams,
        j1: &'a SampledKernel,
        j2: &'a SampledKernel,
        sup_u0: f64,
        sup_v0: f64,
        dt: Option<f64>,
    ) -> Result<Self> {
        let scale = j1.h().max(1.0);
        if (j1.h() - j2.h()).abs() > 1e-9 * scale {
            return Err(Error::GridMismatch(format!(
                "kernel spacings differ: {} vs {}",
                j1.h(),
                j2.h()
            )));
        }
        let root = coexistence_root(params)?;
        let box_u = sup_u0.max(root.u_star);
        let box_v = sup_v0.max(root.v_star);
        let bound = dt_max(params, box_u, box_v);
        let dt = match dt {
            Some(dt) => {
                if !(dt > 0.0 && dt <= bound) {
                    return Err(Error::InvalidParameter(format!(
                        "dt = {dt} outside (0, {bound:.6}]"
                    )));
                }
                dt
            }
            None => bound,
        };
        Ok(Self {
            params,
            j1,
            j2,
            dt,
            box_u,
            box_v,
            weighted: Vec::new(),
            conv: Vec::new(),
            u_old: Vec::new(),
            clamp_count: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn invariant_box(&self) -> (f64, f64) {
        (self.box_u, self.box_v)
    }

    /// Dispersal flux of a field across its front at `s`.
    fn front_flux(kernel: &SampledKernel, field: &[f64], s: f64, h: f64, mu: f64) -> f64 {
        let n = field.len();
        let mut acc = 0.0;
        for (j, &value) in field.iter().enumerate() {
            let x = j as f64 * h;
            acc += trapezoid_weight(j, n) * value * kernel.tail_cdf(s - x);
        }
        mu * acc * h
    }

    fn clamp(value: &mut f64, lo: f64, hi: f64, t: f64, count: &mut u64) -> Result<()> {
        if *value < lo - BOX_SLACK || *value > hi + BOX_SLACK {
            return Err(Error::StabilityViolated {
                t,
                detail: format!("field value {value} left the box [0, {hi}]"),
            });
        }
        if *value < lo {
            *value = lo;
            *count += 1;
        } else if *value > hi {
            *value = hi;
            *count += 1;
        }
        Ok(())
    }

    /// Advances the state by one step: Euler on both fields restricted to
    /// their supports, then the front ODEs, then node activation.
    pub fn step(&mut self, state: &mut SimState) -> Result<()> {
        let p = self.params;
        let h = state.h;
        let dt = self.dt;
        let n1 = state.u.len();
        let n2 = state.v.len();

        // fluxes use the pre-update fields (synchronous update)
        let flux1 = Self::front_flux(self.j1, &state.u, state.s1, h, p.mu1);
        let flux2 = Self::front_flux(self.j2, &state.v, state.s2, h, p.mu2);

        // stash the pre-update u values the v reaction reads
        let shared = n1.min(n2);
        self.u_old.clear();
        self.u_old.extend_from_slice(&state.u[..shared]);

        // species u (reads the pre-update v)
        trapezoid_weighted(&state.u, &mut self.weighted);
        self.conv.clear();
        self.conv.resize(n1, 0.0);
        banded_apply_into(self.j1.taps(), self.j1.half_band(), &self.weighted, 0, &mut self.conv);
        for j in 0..n1 {
            let u = state.u[j];
            let v_here = if j < n2 { state.v[j] } else { 0.0 };
            let f1 = p.r1 * u * (p.a - u - u / (1.0 + p.b * v_here));
            let mut next = u + dt * (p.d1 * self.conv[j] - p.d1 * u + f1);
            Self::clamp(&mut next, 0.0, self.box_u, state.t, &mut self.clamp_count)?;
            state.u[j] = next;
        }

        // species v (reads the stashed pre-update u)
        trapezoid_weighted(&state.v, &mut self.weighted);
        self.conv.clear();
        self.conv.resize(n2, 0.0);
        banded_apply_into(self.j2.taps(), self.j2.half_band(), &self.weighted, 0, &mut self.conv);
        for j in 0..n2 {
            let v = state.v[j];
            let u_here = if j < shared { self.u_old[j] } else { 0.0 };
            let f2 = p.r2 * v * (1.0 - v - v / (1.0 + p.q * u_here));
            let mut next = v + dt * (p.d2 * self.conv[j] - p.d2 * v + f2);
            Self::clamp(&mut next, 0.0, self.box_v, state.t, &mut self.clamp_count)?;
            state.v[j] = next;
        }

        state.s1 += dt * flux1;
        state.s2 += dt * flux2;
        state.t += dt;

        // activate nodes the fronts crossed, at value zero
        while (state.u.len() as f64) * h <= state.s1 + 1e-9 * h {
            state.u.push(0.0);
        }
        while (state.v.len() as f64) * h <= state.s2 + 1e-9 * h {
            state.v.push(0.0);
        }
        Ok(())
    }
}

/// Options for a free-boundary run.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Sampling cadence for the front history.
    pub sample_every: f64,
    /// Hard cap on front positions; exceeding it truncates the run.
    pub max_extent: f64,
    /// Optional per-species threshold lengths: once every species has either
    /// crossed its threshold or decayed to numerical zero, the run may stop
    /// early (used by the critical-rate bisection).
    pub early_stop: Option<(Option<f64>, Option<f64>)>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: None,
            t_final: 100.0,
            sample_every: 0.5,
            max_extent: 1e4,
            early_stop: None,
        }
    }
}

/// A finished free-boundary run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub history: FrontHistory,
    pub final_state: SimState,
    /// Whether the extent cap cut the run short.
    pub truncated: bool,
    pub chosen_dt: f64,
    pub clamp_count: u64,
}

/// Runs the free-boundary system to the horizon, sampling fronts and sups.
pub fn simulate_free_boundary(
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
    u0: Vec<f64>,
    v0: Vec<f64>,
    opts: &SimOptions,
) -> Result<SimOutput> {
    if !(opts.t_final > 0.0 && opts.sample_every > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon {} and cadence {} must be positive",
            opts.t_final, opts.sample_every
        )));
    }
    let h = j1.h();
    let mut state = SimState::new(h, u0, v0, params.s10, params.s20)?;
    let mut stepper = Stepper::new(params, j1, j2, state.sup_u(), state.sup_v(), opts.dt)?;
    let chosen_dt = stepper.dt();

    let mut history = FrontHistory::default();
    let mut next_sample = 0.0;
    let mut truncated = false;

    let decided = |state: &SimState| -> bool {
        match opts.early_stop {
            None => false,
            Some((ell1, ell2)) => {
                let u_done = match ell1 {
                    Some(l) => state.s1 >= l || state.sup_u() < 1e-8,
                    None => true,
                };
                let v_done = match ell2 {
                    Some(l) => state.s2 >= l || state.sup_v() < 1e-8,
                    None => true,
                };
                u_done && v_done
            }
        }
    };

    loop {
        if state.t + 1e-12 >= next_sample {
            history.samples.push(FrontSample {
                t: state.t,
                s1: state.s1,
                s2: state.s2,
                sup_u: state.sup_u(),
                sup_v: state.sup_v(),
            });
            next_sample += opts.sample_every;
        }
        if state.t + 1e-12 >= opts.t_final {
            break;
        }
        if state.s1.max(state.s2) > opts.max_extent {
            truncated = true;
            break;
        }
        if decided(&state) {
            break;
        }
        stepper.step(&mut state)?;
    }
    // always record the final instant
    if history
        .samples
        .last()
        .map(|s| (s.t - state.t).abs() > 1e-12)
        .unwrap_or(true)
    {
        history.samples.push(FrontSample {
            t: state.t,
            s1: state.s1,
            s2: state.s2,
            sup_u: state.sup_u(),
            sup_v: state.sup_v(),
        });
    }
    Ok(SimOutput {
        history,
        final_state: state,
        truncated,
        chosen_dt,
        clamp_count: stepper.clamp_count,
    })
}

/// Fixed-domain run: both species on `[0, l]` with no fronts.
#[derive(Debug, Clone)]
pub struct FixedDomainOutput {
    pub grid: Grid,
    pub final_u: Vec<f64>,
    pub final_v: Vec<f64>,
    /// Classification implied by the interval eigenvalues.
    pub classification: SteadyClass,
    pub lambda1: f64,
    pub lambda2: f64,
    pub chosen_dt: f64,
}

pub fn simulate_fixed_domain(
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
    l: f64,
    u0: Vec<f64>,
    v0: Vec<f64>,
    t_final: f64,
    dt: Option<f64>,
) -> Result<FixedDomainOutput> {
    let grid = Grid::covering(0.0, l, j1.h())?;
    if l < 2.0 * j1.h() {
        return Err(Error::GridTooCoarse(format!("domain length {l}")));
    }
    if u0.len() != grid.n || v0.len() != grid.n {
        return Err(Error::GridMismatch(format!(
            "initial fields must have {} nodes",
            grid.n
        )));
    }
    let p = params;
    let root = coexistence_root(p)?;
    let box_u = sup_norm(&u0).max(root.u_star);
    let box_v = sup_norm(&v0).max(root.v_star);
    let bound = dt_max(p, box_u, box_v);
    let dt = match dt {
        Some(d) if d > 0.0 && d <= bound => d,
        None => bound,
        Some(d) => {
            return Err(Error::InvalidParameter(format!("dt = {d} outside (0, {bound:.6}]")))
        }
    };

    let mut u = u0;
    let mut v = v0;
    let mut weighted = Vec::new();
    let mut conv_u = vec![0.0; grid.n];
    let mut conv_v = vec![0.0; grid.n];
    let steps = (t_final / dt).ceil() as usize;
    for _ in 0..steps {
        trapezoid_weighted(&u, &mut weighted);
        banded_apply_into(j1.taps(), j1.half_band(), &weighted, 0, &mut conv_u);
        trapezoid_weighted(&v, &mut weighted);
        banded_apply_into(j2.taps(), j2.half_band(), &weighted, 0, &mut conv_v);
        for i in 0..grid.n {
            let f1 = p.r1 * u[i] * (p.a - u[i] - u[i] / (1.0 + p.b * v[i]));
            let f2 = p.r2 * v[i] * (1.0 - v[i] - v[i] / (1.0 + p.q * u[i]));
            let un = u[i] + dt * (p.d1 * conv_u[i] - p.d1 * u[i] + f1);
            let vn = v[i] + dt * (p.d2 * conv_v[i] - p.d2 * v[i] + f2);
            u[i] = un.clamp(0.0, box_u);
            v[i] = vn.clamp(0.0, box_v);
        }
    }

    let lambda1 = principal_eigenvalue(p.d1, j1, p.alpha1(), l)?.lambda;
    let lambda2 = principal_eigenvalue(p.d2, j2, p.alpha2(), l)?.lambda;
    let classification = match (lambda1 > 0.0, lambda2 > 0.0) {
        (false, false) => SteadyClass::Trivial,
        (true, false) => SteadyClass::SemitrivialU,
        (false, true) => SteadyClass::SemitrivialV,
        (true, true) => SteadyClass::Coexistence,
    };
    Ok(FixedDomainOutput {
        grid,
        final_u: u,
        final_v: v,
        classification,
        lambda1,
        lambda2,
        chosen_dt: dt,
    })
}

/// Scalar equation on a domain bounded by a prescribed moving front.
#[derive(Debug, Clone)]
pub struct PrescribedFrontOutput {
    pub h: f64,
    pub final_field: Vec<f64>,
    pub final_t: f64,
    pub front_at_end: f64,
}

/// Steps `u_t = d K u - d u + u (alpha - k(x) u)` on `[0, s(t)]` for a given
/// strictly increasing front `s`. Newly covered nodes activate at zero.
pub fn simulate_prescribed_front(
    d: f64,
    kernel: &SampledKernel,
    alpha: f64,
    crowding: impl Fn(f64) -> f64,
    front: impl Fn(f64) -> f64,
    u0: Vec<f64>,
    t_final: f64,
    dt: Option<f64>,
) -> Result<PrescribedFrontOutput> {
    let h = kernel.h();
    let s0 = front(0.0);
    if !(s0 >= 2.0 * h) {
        return Err(Error::InvalidParameter(format!("front(0) = {s0} below 2h")));
    }
    if u0.len() != covered_nodes(s0, h) {
        return Err(Error::GridMismatch(format!(
            "initial field must cover [0, {s0}]: need {} nodes, got {}",
            covered_nodes(s0, h),
            u0.len()
        )));
    }
    // slope bound of u(alpha - k u) on [0, box]: k(0) is the largest weight
    let k0 = crowding(0.0);
    let k_min_guard = 1e-12;
    if !(k0 > k_min_guard) {
        return Err(Error::InvalidParameter(format!("crowding weight k(0) = {k0}")));
    }
    let box_u = sup_norm(&u0).max(alpha * 1.0001 / crowding_min(&crowding, &front, t_final));
    let lip = alpha + 2.0 * k0 * box_u;
    let bound = 0.5 / (d + lip);
    let dt = match dt {
        Some(v) if v > 0.0 && v <= bound => v,
        None => bound,
        Some(v) => {
            return Err(Error::InvalidParameter(format!("dt = {v} outside (0, {bound:.6}]")))
        }
    };

    let mut u = u0;
    let mut t = 0.0;
    let mut weighted = Vec::new();
    let mut conv = Vec::new();
    while t + 1e-12 < t_final {
        let n = u.len();
        trapezoid_weighted(&u, &mut weighted);
        conv.clear();
        conv.resize(n, 0.0);
        banded_apply_into(kernel.taps(), kernel.half_band(), &weighted, 0, &mut conv);
        for (j, uj) in u.iter_mut().enumerate() {
            let k = crowding(j as f64 * h);
            let f = *uj * (alpha - k * *uj);
            *uj += dt * (d * conv[j] - d * *uj + f);
            *uj = uj.clamp(0.0, box_u);
        }
        t += dt;
        let s = front(t);
        while (u.len() as f64) * h <= s + 1e-9 * h {
            u.push(0.0);
        }
    }
    let front_at_end = front(t);
    Ok(PrescribedFrontOutput {
        h,
        final_field: u,
        final_t: t,
        front_at_end,
    })
}

fn crowding_min(crowding: &impl Fn(f64) -> f64, front: &impl Fn(f64) -> f64, t_final: f64) -> f64 {
    // nonincreasing weight: the minimum over the reachable domain is at the
    // final front position
    crowding(front(t_final)).max(1e-12)
}

/// Trailing-window least-squares front speed plus an acceleration flag.
#[derive(Debug, Clone, Copy)]
pub struct SpeedEstimate {
    pub speed: f64,
    /// Set when `s/t` keeps growing across dyadic windows (no finite limit).
    pub accelerated: bool,
    /// Mean `s/t` over `(T/4, T/2]` and `(T/2, T]`.
    pub ratio_windows: (f64, f64),
}

pub fn estimate_speed(
    history: &FrontHistory,
    species: Species,
    window: f64,
) -> Result<SpeedEstimate> {
    if !(window > 0.0 && window < 1.0) {
        return Err(Error::InvalidParameter(format!("window fraction {window}")));
    }
    let pts: Vec<(f64, f64)> = history.series(species).collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientHistory(format!(
            "{} samples, need at least 10",
            pts.len()
        )));
    }
    let t_end = pts.last().unwrap().0;
    let t_start = (1.0 - window) * t_end;
    let tail: Vec<(f64, f64)> = pts.iter().copied().filter(|(t, _)| *t >= t_start).collect();
    if tail.len() < 2 {
        return Err(Error::InsufficientHistory(
            "fewer than 2 samples in the trailing window".into(),
        ));
    }
    let n = tail.len() as f64;
    let mean_t = tail.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_s = tail.iter().map(|(_, s)| s).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, s) in &tail {
        num += (t - mean_t) * (s - mean_s);
        den += (t - mean_t) * (t - mean_t);
    }
    if den == 0.0 {
        return Err(Error::InsufficientHistory("degenerate time window".into()));
    }
    let speed = num / den;

    let mean_ratio = |lo: f64, hi: f64| -> Option<f64> {
        let vals: Vec<f64> = pts
            .iter()
            .filter(|(t, _)| *t > lo && *t <= hi && *t > 0.0)
            .map(|(t, s)| s / t)
            .collect();
        if vals.len() < 2 {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let w1 = mean_ratio(0.25 * t_end, 0.5 * t_end);
    let w2 = mean_ratio(0.5 * t_end, t_end);
    let (r1, r2, accelerated) = match (w1, w2) {
        (Some(a), Some(b)) => (a, b, b >= 1.2 * a),
        _ => (f64::NAN, f64::NAN, false),
    };
    Ok(SpeedEstimate {
        speed,
        accelerated,
        ratio_windows: (r1, r2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Spreading,
    Vanishing,
    Undecided,
}

/// Per-species classification evidence.
#[derive(Debug, Clone)]
pub struct SpeciesEvidence {
    pub verdict: Verdict,
    /// Eigenvalue at the final front position (length capped once the front
    /// is far past the threshold: the eigenvalue saturates at the growth
    /// rate and longer intervals only cost time).
    pub lambda_at_final_front: f64,
    /// Critical length, when growth is below diffusion.
    pub threshold: Option<f64>,
    /// `(t, s, lambda)` certifying spreading at a recorded sample.
    pub witness: Option<(f64, f64, f64)>,
    pub trailing_front_gain: f64,
    pub final_sup: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub u: SpeciesEvidence,
    pub v: SpeciesEvidence,
}

impl Outcome {
    pub fn verdict(&self, species: Species) -> Verdict {
        match species {
            Species::U => self.u.verdict,
            Species::V => self.v.verdict,
        }
    }
}

/// Classifies a finished run: spreading is certified by a nonnegative
/// interval eigenvalue at a recorded front position; vanishing needs a
/// negative eigenvalue at the final front AND a stalled front AND a decayed
/// field. Anything else stays undecided (extend the horizon).
pub fn classify(
    history: &FrontHistory,
    final_state: &SimState,
    params: &CoopParams,
    j1: &SampledKernel,
    j2: &SampledKernel,
) -> Result<Outcome> {
    let u = classify_species(history, final_state, params, j1, Species::U)?;
    let v = classify_species(history, final_state, params, j2, Species::V)?;
    Ok(Outcome { u, v })
}

fn classify_species(
    history: &FrontHistory,
    final_state: &SimState,
    params: &CoopParams,
    kernel: &SampledKernel,
    species: Species,
) -> Result<SpeciesEvidence> {
    let (d, alpha) = match species {
        Species::U => (params.d1, params.alpha1()),
        Species::V => (params.d2, params.alpha2()),
    };
    let (s_final, final_sup) = match species {
        Species::U => (final_state.s1, final_state.sup_u()),
        Species::V => (final_state.s2, final_state.sup_v()),
    };
    let ever_positive = history.sup_series(species).any(|(_, sup)| sup > 0.0) || final_sup > 0.0;

    let horizon = history.horizon();
    let trailing_from = (1.0 - STALL_WINDOW) * horizon;
    let series: Vec<(f64, f64)> = history.series(species).collect();
    let s_at_trailing = series
        .iter()
        .filter(|(t, _)| *t <= trailing_from)
        .map(|(_, s)| *s)
        .last()
        .unwrap_or(series.first().map(|(_, s)| *s).unwrap_or(s_final));
    let trailing_front_gain = s_final - s_at_trailing;

    let threshold = if alpha < d {
        Some(threshold_length(d, kernel, alpha, kernel.h())?.ell)
    } else {
        None
    };

    // a species that was never seeded sits at the zero equilibrium
    if !ever_positive {
        return Ok(SpeciesEvidence {
            verdict: Verdict::Vanishing,
            lambda_at_final_front: principal_eigenvalue(d, kernel, alpha, s_final)?.lambda,
            threshold,
            witness: None,
            trailing_front_gain,
            final_sup,
        });
    }

    // the eigenvalue saturates at alpha within a few threshold lengths;
    // cap the evidence interval so accelerated runs stay cheap
    let evidence_cap = threshold.map(|l| (4.0 * l).max(50.0)).unwrap_or(50.0);
    let lambda_final =
        principal_eigenvalue(d, kernel, alpha, s_final.min(evidence_cap))?.lambda;

    let crossed = match threshold {
        None => Some(0),
        Some(ell) => series.iter().position(|(_, s)| *s >= ell),
    };
    if let Some(idx) = crossed {
        // walk recorded samples until the eigenvalue is provably nonnegative
        for (t, s) in series.iter().skip(idx) {
            let lambda = principal_eigenvalue(d, kernel, alpha, s.min(evidence_cap))?.lambda;
            if lambda >= 0.0 {
                return Ok(SpeciesEvidence {
                    verdict: Verdict::Spreading,
                    lambda_at_final_front: lambda_final,
                    threshold,
                    witness: Some((*t, *s, lambda)),
                    trailing_front_gain,
                    final_sup,
                });
            }
        }
    }

    let stalled = trailing_front_gain < STALL_GAIN;
    let decayed = final_sup < DECAY_SUP;
    let verdict = if lambda_final < 0.0 && stalled && decayed {
        Verdict::Vanishing
    } else {
        Verdict::Undecided
    };
    Ok(SpeciesEvidence {
        verdict,
        lambda_at_final_front: lambda_final,
        threshold,
        witness: None,
        trailing_front_gain,
        final_sup,
    })
}

/// Critical expansion coefficient with a verdict-separating bracket.
#[derive(Debug, Clone, Copy)]
pub struct CriticalMu {
    pub mu_star: f64,
    pub bracket: (f64, f64),
    /// Verdicts at the bracket ends: (low end, high end).
    pub verdicts: (Verdict, Verdict),
    pub tolerance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{sample_kernel, KernelSpec};

    fn tent(h: f64) -> SampledKernel {
        sample_kernel(&KernelSpec::Tent { half_width: 1.0 }, h, 1e-8).unwrap()
    }

    fn base_params() -> CoopParams {
        CoopParams {
            d1: 1.0,
            d2: 1.0,
            r1: 1.0,
            r2: 1.0,
            a: 1.0,
            b: 1.0,
            q: 1.0,
            mu1: 2.0,
            mu2: 2.0,
            s10: 2.0,
            s20: 2.0,
        }
    }

    fn plateau(s0: f64, h: f64, amplitude: f64) -> Vec<f64> {
        let n = covered_nodes(s0, h);
        let mut out = vec![amplitude; n];
        out[n - 1] = 0.0;
        out
    }

    #[test]
    fn zero_data_is_an_equilibrium_with_static_fronts() {
        let h = 0.1;
        let k = tent(h);
        let p = base_params();
        let u0 = vec![0.0; covered_nodes(p.s10, h)];
        let v0 = vec![0.0; covered_nodes(p.s20, h)];
        let opts = SimOptions {
            t_final: 5.0,
            ..Default::default()
        };
        let out = simulate_free_boundary(&p, &k, &k, u0, v0, &opts).unwrap();
        assert_eq!(out.final_state.s1, p.s10);
        assert_eq!(out.final_state.s2, p.s20);
        assert_eq!(out.final_state.sup_u(), 0.0);
        assert_eq!(out.final_state.sup_v(), 0.0);
    }

    #[test]
    fn fronts_increase_strictly_and_fields_stay_in_the_box() {
        let h = 0.1;
        let k = tent(h);
        let p = base_params();
        let u0 = plateau(p.s10, h, 0.8);
        let v0 = plateau(p.s20, h, 0.6);
        let opts = SimOptions {
            t_final: 10.0,
            sample_every: 0.25,
            ..Default::default()
        };
        let out = simulate_free_boundary(&p, &k, &k, u0, v0, &opts).unwrap();
        let root = coexistence_root(&p).unwrap();
        let box_u = 0.8f64.max(root.u_star);
        let box_v = 0.6f64.max(root.v_star);
        for w in out.history.samples.windows(2) {
            assert!(w[1].s1 > w[0].s1, "front 1 must advance");
            assert!(w[1].s2 > w[0].s2, "front 2 must advance");
            assert!(w[1].sup_u <= box_u + 1e-12);
            assert!(w[1].sup_v <= box_v + 1e-12);
        }
        assert!(out.final_state.u.iter().all(|&x| x >= 0.0));
        assert!(out.final_state.v.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn synthetic_linear_front_gives_exact_speed_and_no_flag() {
        let mut history = FrontHistory::default();
        for i in 0..=100 {
            let t = i as f64;
            history.samples.push(FrontSample {
                t,
                s1: 3.0 * t + 7.0,
                s2: 1.0 * t + 2.0,
                sup_u: 1.0,
                sup_v: 1.0,
            });
        }
        let est = estimate_speed(&history, Species::U, 0.5).unwrap();
        assert!((est.speed - 3.0).abs() < 1e-12);
        assert!(!est.accelerated);
    }

    #[test]
    fn speed_estimation_requires_history() {
        let mut history = FrontHistory::default();
        for i in 0..5 {
            history.samples.push(FrontSample {
                t: i as f64,
                s1: i as f64,
                s2: i as f64,
                sup_u: 1.0,
                sup_v: 1.0,
            });
        }
        assert!(matches!(
            estimate_speed(&history, Species::U, 0.5),
            Err(Error::InsufficientHistory(_))
        ));
    }

    #[test]
    fn growth_at_or_above_diffusion_classifies_as_spreading() {
        let h = 0.1;
        let k = tent(h);
        let p = base_params(); // r1 a = 1 = d1
        let u0 = plateau(p.s10, h, 0.5);
        let v0 = plateau(p.s20, h, 0.5);
        let opts = SimOptions {
            t_final: 10.0,
            ..Default::default()
        };
        let out = simulate_free_boundary(&p, &k, &k, u0, v0, &opts).unwrap();
        let outcome = classify(&out.history, &out.final_state, &p, &k, &k).unwrap();
        assert_eq!(outcome.u.verdict, Verdict::Spreading);
        assert_eq!(outcome.v.verdict, Verdict::Spreading);
        assert!(outcome.u.witness.is_some());
    }

    #[test]
    fn subcritical_short_fronts_with_tiny_expansion_vanish() {
        let h = 0.05;
        let k = sample_kernel(&KernelSpec::Laplace { sigma: 1.0 }, h, 1e-8).unwrap();
        let mut p = base_params();
        p.d1 = 1.5;
        p.d2 = 1.5;
        p.b = 0.0;
        p.q = 0.0;
        p.mu1 = 0.01;
        p.mu2 = 0.01;
        p.s10 = 0.5;
        p.s20 = 0.5;
        let u0 = plateau(p.s10, h, 0.2);
        let v0 = plateau(p.s20, h, 0.2);
        let opts = SimOptions {
            t_final: 150.0,
            ..Default::default()
        };
        let out = simulate_free_boundary(&p, &k, &k, u0, v0, &opts).unwrap();
        let outcome = classify(&out.history, &out.final_state, &p, &k, &k).unwrap();
        assert_eq!(outcome.u.verdict, Verdict::Vanishing);
        assert!(outcome.u.lambda_at_final_front < 0.0);
        assert!(outcome.u.final_sup < DECAY_SUP);
        assert!(outcome.u.trailing_front_gain < STALL_GAIN);
    }

    #[test]
    fn short_horizons_near_the_balance_stay_undecided() {
        let h = 0.05;
        let k = sample_kernel(&KernelSpec::Laplace { sigma: 1.0 }, h, 1e-8).unwrap();
        let mut p = base_params();
        p.d1 = 2.0;
        p.d2 = 2.0;
        p.b = 0.0;
        p.q = 0.0;
        p.mu1 = 0.05;
        p.mu2 = 0.05;
        p.s10 = 0.5;
        p.s20 = 0.5;
        let u0 = plateau(p.s10, h, 0.3);
        let v0 = plateau(p.s20, h, 0.3);
        let opts = SimOptions {
            t_final: 3.0,
            sample_every: 0.2,
            ..Default::default()
        };
        let out = simulate_free_boundary(&p, &k, &k, u0, v0, &opts).unwrap();
        let outcome = classify(&out.history, &out.final_state, &p, &k, &k).unwrap();
        assert_eq!(outcome.u.verdict, Verdict::Undecided);
    }

    #[test]
    fn enlarged_initial_data_dominates_pointwise_and_in_the_fronts() {
        let h = 0.1;
        let k = tent(h);
        let p = base_params();
        let u0_small = plateau(p.s10, h, 0.4);
        let u0_big = plateau(p.s10, h, 0.8);
        let v0 = plateau(p.s20, h, 0.5);
        let opts = SimOptions {
            t_final: 8.0,
            sample_every: 0.5,
            ..Default::default()
        };
        let small = simulate_free_boundary(&p, &k, &k, u0_small, v0.clone(), &opts).unwrap();
        let big = simulate_free_boundary(&p, &k, &k, u0_big, v0, &opts).unwrap();
        for (a, b) in small.history.samples.iter().zip(&big.history.samples) {
            assert!(b.s1 >= a.s1 - 1e-12);
        }
        let n = small.final_state.u.len();
        for j in 0..n {
            assert!(big.final_state.u[j] >= small.final_state.u[j] - 1e-12);
        }
    }

    #[test]
    fn larger_expansion_coefficient_dominates_the_front() {
        let h = 0.1;
        let k = tent(h);
        let mut p_small = base_params();
        p_small.mu1 = 1.0;
        let mut p_big = base_params();
        p_big.mu1 = 3.0;
        let u0 = plateau(p_small.s10, h, 0.5);
        let v0 = plateau(p_small.s20, h, 0.5);
        let opts = SimOptions {
            t_final: 8.0,
            sample_every: 0.5,
            ..Default::default()
        };
        let small = simulate_free_boundary(&p_small, &k, &k, u0.clone(), v0.clone(), &opts).unwrap();
        let big = simulate_free_boundary(&p_big, &k, &k, u0, v0, &opts).unwrap();
        for (a, b) in small.history.samples.iter().zip(&big.history.samples) {
            assert!(b.s1 >= a.s1 - 1e-12);
        }
    }

    #[test]
    fn fixed_domain_subcritical_dies_uniformly() {
        let h = 0.05;
        let k = sample_kernel(&KernelSpec::Laplace { sigma: 1.0 }, h, 1e-8).unwrap();
        let mut p = base_params();
        p.d1 = 2.0;
        p.d2 = 2.0;
        let l = 1.0;
        let grid = Grid::covering(0.0, l, h).unwrap();
        let u0 = vec![0.3; grid.n];
        let v0 = vec![0.3; grid.n];
        let out = simulate_fixed_domain(&p, &k, &k, l, u0, v0, 400.0, None).unwrap();
        assert_eq!(out.classification, SteadyClass::Trivial);
        assert!(sup_norm(&out.final_u) <= 1e-6, "sup {}", sup_norm(&out.final_u));
        assert!(sup_norm(&out.final_v) <= 1e-6);
    }

    #[test]
    fn prescribed_front_zero_datum_stays_zero() {
        let h = 0.1;
        let k = tent(h);
        let u0 = vec![0.0; covered_nodes(1.0, h)];
        let out = simulate_prescribed_front(
            1.0,
            &k,
            1.0,
            |_| 1.0,
            |t| 1.0 + 0.5 * t,
            u0,
            10.0,
            None,
        )
        .unwrap();
        assert_eq!(sup_norm(&out.final_field), 0.0);
    }
}
