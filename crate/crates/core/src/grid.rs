//! Uniform one-dimensional grids and gridded fields.
//!
//! Every discretized object in this crate (kernel samples, eigenfunctions,
//! steady profiles, simulation fields) lives on a uniform lattice with a
//! single global spacing `h`. Quadrature is composite trapezoid throughout.

use crate::error::{Error, Result};

/// Relative slack when comparing spacings or checking lattice alignment.
const GRID_EPS: f64 = 1e-9;

/// A uniform grid of `n` nodes starting at `x0` with spacing `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x0: f64, h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("grid spacing h = {h}")));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid needs >= 2 nodes, got {n}")));
        }
        Ok(Self { x0, h, n })
    }

    /// Grid covering `[x0, x0 + length]` with endpoints included:
    /// `ceil(length/h) + 1` nodes, so the span is at least `length`.
    pub fn covering(x0: f64, length: f64, h: f64) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidParameter(format!("interval length = {length}")));
        }
        let cells = (length / h - GRID_EPS).ceil().max(1.0) as usize;
        Self::new(x0, h, cells + 1)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn last_x(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn span(&self) -> f64 {
        (self.n - 1) as f64 * self.h
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    /// Checks shared spacing and that `other`'s origin lies on this lattice;
    /// returns the integer offset of `other.x0` relative to `self.x0`.
    pub fn lattice_offset(&self, other: &Grid) -> Result<isize> {
        let scale = self.h.max(1.0);
        if (self.h - other.h).abs() > GRID_EPS * scale {
            return Err(Error::GridMismatch(format!(
                "spacings differ: {} vs {}",
                self.h, other.h
            )));
        }
        let off = (other.x0 - self.x0) / self.h;
        let rounded = off.round();
        if (off - rounded).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!(
                "origins not on a shared lattice: {} vs {} (h = {})",
                self.x0, other.x0, self.h
            )));
        }
        Ok(rounded as isize)
    }
}

/// A field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "field has {} values for a {}-node grid",
                values.len(),
                grid.n
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let values = vec![value; grid.n];
        Self { grid, values }
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
}

#[inline]
pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Composite trapezoid rule over equally spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => {
            let interior: f64 = values[1..n - 1].iter().sum();
            h * (0.5 * (values[0] + values[n - 1]) + interior)
        }
    }
}

/// Trapezoid weight of node `i` on an `n`-node grid (1/2 at the ends).
#[inline]
pub fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Dot product with four-way accumulation (hot path of every convolution).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n4 = a.len() / 4 * 4;
    let (a4, ar) = a.split_at(n4);
    let (b4, br) = b.split_at(n4);
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for (ca, cb) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        s0 += ca[0] * cb[0];
        s1 += ca[1] * cb[1];
        s2 += ca[2] * cb[2];
        s3 += ca[3] * cb[3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for (x, y) in ar.iter().zip(br.iter()) {
        s += x * y;
    }
    s
}

/// Linear interpolation of `(grid, values)` onto `target` nodes, clamped at
/// the ends. Used for prolongation between refinement levels.
pub fn interpolate_linear(grid: &Grid, values: &[f64], target: &Grid) -> Vec<f64> {
    let mut out = Vec::with_capacity(target.n);
    let last = grid.n - 1;
    for x in target.xs() {
        let s = (x - grid.x0) / grid.h;
        if s <= 0.0 {
            out.push(values[0]);
        } else if s >= last as f64 {
            out.push(values[last]);
        } else {
            let j = s.floor() as usize;
            let frac = s - j as f64;
            out.push(values[j] * (1.0 - frac) + values[j + 1] * frac);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_includes_endpoints() {
        let g = Grid::covering(0.0, 200.0, 0.01).unwrap();
        assert_eq!(g.n, 20001);
        assert!((g.last_x() - 200.0).abs() < 1e-9);

        let g = Grid::covering(0.0, 0.01, 0.01).unwrap();
        assert_eq!(g.n, 2);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let h = 0.25;
        let vals: Vec<f64> = (0..5).map(|i| 1.0 + 2.0 * (i as f64) * h).collect();
        // integral of 1 + 2x over [0,1] = 2
        assert!((trapezoid(&vals, h) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lattice_offset_detects_mismatch() {
        let a = Grid::new(0.0, 0.1, 10).unwrap();
        let b = Grid::new(0.05, 0.1, 10).unwrap();
        assert!(a.lattice_offset(&b).is_err());
        let c = Grid::new(-0.5, 0.1, 10).unwrap();
        assert_eq!(a.lattice_offset(&c).unwrap(), -5);
    }

    #[test]
    fn interpolation_reproduces_linear_data() {
        let coarse = Grid::new(0.0, 0.2, 6).unwrap();
        let vals: Vec<f64> = coarse.xs().map(|x| 3.0 * x - 1.0).collect();
        let fine = Grid::new(0.0, 0.1, 11).unwrap();
        let out = interpolate_linear(&coarse, &vals, &fine);
        for (x, y) in fine.xs().zip(&out) {
            assert!((y - (3.0 * x - 1.0)).abs() < 1e-12);
        }
    }
}
