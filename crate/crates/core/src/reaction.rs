//! Cooperative reaction terms and their unique positive coexistence root.
//!
//! The two species interact through
//!
//! ```text
//! f1(u, v) = r1 u (a - u - u / (1 + b v))
//! f2(u, v) = r2 v (1 - v - v / (1 + q u))
//! ```
//!
//! Mutualism enters through the saturating terms: more of the partner means
//! less self-limitation. The coexistence state solves `f1 = f2 = 0` with both
//! components positive and is unique.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Model constants and initial front positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoopParams {
    pub d1: f64,
    pub d2: f64,
    pub r1: f64,
    pub r2: f64,
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub s10: f64,
    pub s20: f64,
}

impl CoopParams {
    /// All parameters strictly positive. With `test_mode` the mutualism
    /// strengths `b`, `q` may be zero, which decouples the species and
    /// unlocks scalar baselines.
    pub fn validate(&self, test_mode: bool) -> Result<()> {
        let strict = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("a", self.a),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("s10", self.s10),
            ("s20", self.s20),
        ];
        for (name, v) in strict {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v}, must be positive")));
            }
        }
        for (name, v) in [("b", self.b), ("q", self.q)] {
            let ok = if test_mode { v >= 0.0 } else { v > 0.0 };
            if !ok || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v}, must be {}",
                    if test_mode { ">= 0" } else { "positive" }
                )));
            }
        }
        Ok(())
    }

    /// Linear growth rates seen by each species alone at low density.
    pub fn alpha1(&self) -> f64 {
        self.r1 * self.a
    }

    pub fn alpha2(&self) -> f64 {
        self.r2
    }
}

/// The unique positive root of `f1 = f2 = 0`.
#[derive(Debug, Clone, Copy)]
pub struct CoexistenceRoot {
    pub u_star: f64,
    pub v_star: f64,
    /// `(|f1|, |f2|)` at the root.
    pub residuals: (f64, f64),
    pub iterations: usize,
}

/// Reaction terms at a state `(u, v)`.
pub fn eval_reaction(p: &CoopParams, u: f64, v: f64) -> (f64, f64) {
    let f1 = p.r1 * u * (p.a - u - u / (1.0 + p.b * v));
    let f2 = p.r2 * v * (1.0 - v - v / (1.0 + p.q * u));
    (f1, f2)
}

/// Solves the coexistence system by the monotone fixed point
/// `u <- a(1+bv)/(2+bv)`, `v <- (1+qu)/(2+qu)` from `(a/2, 1/2)`, then one
/// Newton polish. The iterates are componentwise nondecreasing and bounded
/// by `(a, 1)`, so convergence is guaranteed for positive parameters.
pub fn coexistence_root(p: &CoopParams) -> Result<CoexistenceRoot> {
    let (a, b, q) = (p.a, p.b, p.q);
    let mut u = 0.5 * a;
    let mut v = 0.5;
    let mut iterations = 0usize;
    let cap = 10_000;
    loop {
        let un = a * (1.0 + b * v) / (2.0 + b * v);
        let vn = (1.0 + q * un) / (2.0 + q * un);
        let delta = (un - u).abs().max((vn - v).abs());
        u = un;
        v = vn;
        iterations += 1;
        if delta < 1e-15 * (1.0 + a) {
            break;
        }
        if iterations >= cap {
            return Err(Error::NoConvergence {
                context: "coexistence fixed point",
                iterations,
                metric: delta,
            });
        }
    }

    // one Newton step on the reduced system
    //   g1 = a - u - u/(1+bv),  g2 = 1 - v - v/(1+qu)
    let bv = 1.0 + b * v;
    let qu = 1.0 + q * u;
    let g1 = a - u - u / bv;
    let g2 = 1.0 - v - v / qu;
    let j11 = -1.0 - 1.0 / bv;
    let j12 = u * b / (bv * bv);
    let j21 = v * q / (qu * qu);
    let j22 = -1.0 - 1.0 / qu;
    let det = j11 * j22 - j12 * j21;
    if det.abs() > 1e-300 {
        u -= (g1 * j22 - g2 * j12) / det;
        v -= (j11 * g2 - j21 * g1) / det;
    }

    let (f1, f2) = eval_reaction(p, u, v);
    Ok(CoexistenceRoot {
        u_star: u,
        v_star: v,
        residuals: (f1.abs(), f2.abs()),
        iterations,
    })
}
