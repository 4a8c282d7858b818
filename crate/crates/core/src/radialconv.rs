//! Radial convolution kernel and its discretization on equidistant grids.
//!
//! For radial densities the convolution with a radial potential reduces to
//! `(W * rho)(r) = int Psi(r, s) rho(s) ds`. Both kernels are evaluated in
//! closed form: the 2D one through the addition theorem
//! `(1/2pi) int K0(k|x - y|) dtheta = I0(k r<) K0(k r>)`, the 3D one through
//! the elementary shell integral of `e^{-kd}/d`. The angular integral is kept
//! as [`psi_kernel_angular`] for cross-checking.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{omega, quasi_morse_u, PotentialParams};
use crate::quad;
use crate::specfun::{i0e, k0, k0e};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_min: f64,
    pub dr: f64,
    /// Number of intervals; there are `intervals + 1` nodes.
    pub intervals: usize,
}

impl RadialGrid {
    /// Grid on `[r_min, r_max]` with spacing as close to `dr` as divides the interval.
    pub fn new(r_min: f64, r_max: f64, dr: f64) -> Result<Self> {
        if !(r_min >= 0.0 && r_max > r_min && dr > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "bad grid r_min={r_min} r_max={r_max} dr={dr}"
            )));
        }
        let intervals = ((r_max - r_min) / dr).round().max(1.0) as usize;
        Ok(RadialGrid {
            r_min,
            dr: (r_max - r_min) / intervals as f64,
            intervals,
        })
    }

    /// Grid with exact spacing `dr` and `intervals` intervals starting at `r_min`.
    pub fn with_intervals(r_min: f64, dr: f64, intervals: usize) -> Self {
        RadialGrid {
            r_min,
            dr,
            intervals,
        }
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r_max(&self) -> f64 {
        self.node(self.intervals)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.dr
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Composite trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.dr; self.len()];
        w[0] *= 0.5;
        w[self.intervals] *= 0.5;
        w
    }
}

/// `I0(x) K0(y)` for `0 <= x <= y`, y > 0, without overflow.
#[inline]
fn i0k0(x: f64, y: f64) -> f64 {
    i0e(x) * k0e(y) * (x - y).exp()
}

/// `e^{-y} sinh(x)` for `0 <= x <= y`.
#[inline]
fn exp_sinh(x: f64, y: f64) -> f64 {
    0.5 * ((x - y).exp() - (-(x + y)).exp())
}

/// Kernel value including the limits at `r = 0` and `s = 0`.
pub(crate) fn psi_value(p: &PotentialParams, r: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let k = p.k;
    let k2 = p.k / p.l;
    match p.n {
        2 => {
            if r <= 0.0 {
                return p.lambda * s * (-k0(k * s) + p.c * k0(k2 * s));
            }
            let (lo, hi) = if r < s { (r, s) } else { (s, r) };
            p.lambda * s * (-i0k0(k * lo, k * hi) + p.c * i0k0(k2 * lo, k2 * hi))
        }
        3 => {
            if r <= 0.0 {
                return p.lambda * s * (p.c * p.l * (-k2 * s).exp() - (-k * s).exp());
            }
            let (lo, hi) = if r < s { (r, s) } else { (s, r) };
            p.lambda * s / (r * k)
                * (p.c * p.l * p.l * exp_sinh(k2 * lo, k2 * hi) - exp_sinh(k * lo, k * hi))
        }
        _ => f64::NAN,
    }
}

fn check_dim(p: &PotentialParams) -> Result<()> {
    if p.n == 2 || p.n == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "radial convolution needs n = 2 or 3, got {}",
            p.n
        )))
    }
}

/// `Psi(r, s)` such that `(W * rho)(r) = int_0^inf Psi(r, s) rho(s) ds`.
pub fn psi_kernel(p: &PotentialParams, r: f64, s: f64) -> Result<f64> {
    check_dim(p)?;
    if !(r > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!("kernel needs r, s > 0, got ({r}, {s})")));
    }
    Ok(psi_value(p, r, s))
}

/// `Psi(r, s)` by adaptive quadrature of the angular integral of U.
pub fn psi_kernel_angular(p: &PotentialParams, r: f64, s: f64) -> Result<f64> {
    check_dim(p)?;
    if !(r > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!("kernel needs r, s > 0, got ({r}, {s})")));
    }
    let dist = |th: f64| {
        // r^2 + s^2 - 2 r s cos = (r - s)^2 + 4 r s sin^2(th/2)
        let h = (0.5 * th).sin();
        ((r - s) * (r - s) + 4.0 * r * s * h * h).sqrt()
    };
    let u = |d: f64| {
        if d > 0.0 {
            quasi_morse_u(p, d).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    let val = if p.n == 2 {
        let f = |th: f64| u(dist(th));
        2.0 * s * quad::integrate(f, 0.0, PI, 1e-14, 1e-13, 4000).value
    } else {
        let f = |th: f64| u(dist(th)) * th.sin();
        2.0 * PI * s * s * quad::integrate(f, 0.0, PI, 1e-14, 1e-13, 4000).value
    };
    Ok(val)
}

/// Discrete operator `H` with `(H rho)_i = sum_j w_j Psi(r_i, r_j) rho_j`.
#[derive(Debug, Clone)]
pub struct ConvolutionOperator {
    pub params: PotentialParams,
    pub grid: RadialGrid,
    /// Row-major kernel values `Psi(r_i, r_j)`.
    kernel: Vec<f64>,
    weights: Vec<f64>,
}

/// Tabulates `Psi(r_i, r_j)` on all grid node pairs.
pub(crate) fn kernel_matrix(p: &PotentialParams, grid: &RadialGrid) -> Vec<f64> {
    let nodes = grid.nodes();
    let m = nodes.len();
    let mut kernel = vec![0.0; m * m];
    kernel
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = psi_value(p, nodes[i], nodes[j]);
            }
        });
    kernel
}

/// Assembles the trapezoid-rule operator on `grid`.
pub fn build_operator(p: &PotentialParams, grid: RadialGrid) -> Result<ConvolutionOperator> {
    check_dim(p)?;
    p.validate()?;
    if grid.len() < 4 {
        return Err(Error::InvalidParams(format!(
            "grid has {} nodes, at least 4 required",
            grid.len()
        )));
    }
    Ok(ConvolutionOperator {
        params: *p,
        grid,
        kernel: kernel_matrix(p, &grid),
        weights: grid.weights(),
    })
}

impl ConvolutionOperator {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        self.kernel[i * self.len() + j]
    }

    /// Matrix entry `H_ij`.
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.kernel(i, j) * self.weights[j]
    }

    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        assert_eq!(rho.len(), self.len(), "density length does not match grid");
        let m = self.len();
        self.kernel
            .chunks(m)
            .map(|row| {
                row.iter()
                    .zip(&self.weights)
                    .zip(rho)
                    .map(|((k, w), x)| k * w * x)
                    .sum()
            })
            .collect()
    }

    /// Operator for the sub-interval of nodes `i0..=i1`, with trapezoid
    /// weights recomputed for the shorter support. No kernel re-evaluation.
    pub fn restrict(&self, i0: usize, i1: usize) -> Result<ConvolutionOperator> {
        if i1 >= self.len() || i1 < i0 + 3 {
            return Err(Error::InvalidParams(format!(
                "cannot restrict to nodes {i0}..={i1} of {}",
                self.len()
            )));
        }
        let m = self.len();
        let sub = i1 - i0 + 1;
        let mut kernel = Vec::with_capacity(sub * sub);
        for i in i0..=i1 {
            kernel.extend_from_slice(&self.kernel[i * m + i0..=i * m + i1]);
        }
        let grid = RadialGrid::with_intervals(self.grid.node(i0), self.grid.dr, i1 - i0);
        Ok(ConvolutionOperator {
            params: self.params,
            grid,
            kernel,
            weights: grid.weights(),
        })
    }
}

/// Trapezoid approximation of `int rho(r) omega_n r^{n-1} dr` over the grid.
pub fn radial_mass(n: usize, grid: &RadialGrid, rho: &[f64]) -> f64 {
    let om = omega(n);
    grid.weights()
        .iter()
        .zip(rho)
        .enumerate()
        .map(|(i, (w, v))| w * v * om * grid.node(i).powi(n as i32 - 1))
        .sum()
}
