//! Flock and mill steady states: basis families, collocation fits and the
//! coarse-to-fine support search.
//!
//! A steady density is an affine combination of two (flock) or three (mill)
//! radial functions on its support. The coefficients are fixed by requiring
//! `W * rho` to match the target profile at the support endpoints (and the
//! midpoint for mills) plus unit mass; the support itself is the minimizer of
//! the remaining deviation over all candidate supports.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::MotionParams;
use crate::potential::{omega, regime, PotentialParams, Regime};
use crate::radialconv::{build_operator, kernel_matrix, ConvolutionOperator, RadialGrid};
use crate::specfun;

/// Slack below zero tolerated in a fitted density.
pub const EPS_NEG: f64 = 1e-9;

/// Smallest number of nodes a mill candidate support may have.
pub const DEFAULT_MIN_MILL_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Flock,
    Mill,
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pattern::Flock => "flock",
            Pattern::Mill => "mill",
        })
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flock" => Ok(Pattern::Flock),
            "mill" => Ok(Pattern::Mill),
            other => Err(Error::InvalidParams(format!("unknown pattern '{other}'"))),
        }
    }
}

/// One radial basis function; the payload is the frequency `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "a")]
pub enum BasisFn {
    J0(f64),
    Y0(f64),
    I0(f64),
    K0(f64),
    SinOverR(f64),
    SinhOverR(f64),
    R2,
    LogR,
    One,
}

impl BasisFn {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            BasisFn::J0(a) => specfun::j0(a * r),
            BasisFn::Y0(a) => specfun::y0(a * r),
            BasisFn::I0(a) => specfun::i0(a * r),
            BasisFn::K0(a) => specfun::k0(a * r),
            BasisFn::SinOverR(a) => {
                if r == 0.0 {
                    a
                } else {
                    (a * r).sin() / r
                }
            }
            BasisFn::SinhOverR(a) => {
                if r == 0.0 {
                    a
                } else {
                    (a * r).sinh() / r
                }
            }
            BasisFn::R2 => r * r,
            BasisFn::LogR => r.ln(),
            BasisFn::One => 1.0,
        }
    }

    /// Writes `b(f r)` as `factor * b~(r) + shift` where `b~` is the same
    /// family with frequency `a f`.
    fn dilation(&self, f: f64) -> (BasisFn, f64, f64) {
        match *self {
            BasisFn::J0(a) => (BasisFn::J0(a * f), 1.0, 0.0),
            BasisFn::Y0(a) => (BasisFn::Y0(a * f), 1.0, 0.0),
            BasisFn::I0(a) => (BasisFn::I0(a * f), 1.0, 0.0),
            BasisFn::K0(a) => (BasisFn::K0(a * f), 1.0, 0.0),
            BasisFn::SinOverR(a) => (BasisFn::SinOverR(a * f), 1.0 / f, 0.0),
            BasisFn::SinhOverR(a) => (BasisFn::SinhOverR(a * f), 1.0 / f, 0.0),
            BasisFn::R2 => (BasisFn::R2, f * f, 0.0),
            BasisFn::LogR => (BasisFn::LogR, 1.0, f.ln()),
            BasisFn::One => (BasisFn::One, 1.0, 0.0),
        }
    }
}

impl std::fmt::Display for BasisFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisFn::J0(a) => write!(f, "J0({a}r)"),
            BasisFn::Y0(a) => write!(f, "Y0({a}r)"),
            BasisFn::I0(a) => write!(f, "I0({a}r)"),
            BasisFn::K0(a) => write!(f, "K0({a}r)"),
            BasisFn::SinOverR(a) => write!(f, "sin({a}r)/r"),
            BasisFn::SinhOverR(a) => write!(f, "sinh({a}r)/r"),
            BasisFn::R2 => f.write_str("r^2"),
            BasisFn::LogR => f.write_str("log r"),
            BasisFn::One => f.write_str("1"),
        }
    }
}

/// Basis of the homogeneous steady-state equation, constant last.
pub fn basis(p: &PotentialParams, pattern: Pattern, regime: &Regime) -> Result<Vec<BasisFn>> {
    let a = regime.a;
    let sign = if regime.a_const > 0.0 {
        1
    } else if regime.a_const < 0.0 {
        -1
    } else {
        0
    };
    use BasisFn::*;
    Ok(match (p.n, pattern, sign) {
        (2, Pattern::Flock, 1) => vec![J0(a), One],
        (2, Pattern::Flock, 0) => vec![R2, One],
        (2, Pattern::Flock, _) => vec![I0(a), One],
        (2, Pattern::Mill, 1) => vec![J0(a), Y0(a), One],
        (2, Pattern::Mill, 0) => vec![R2, LogR, One],
        (2, Pattern::Mill, _) => vec![I0(a), K0(a), One],
        (3, Pattern::Flock, 1) => vec![SinOverR(a), One],
        (3, Pattern::Flock, 0) => vec![R2, One],
        (3, Pattern::Flock, _) => vec![SinhOverR(a), One],
        (n, pat, _) => {
            return Err(Error::InvalidParams(format!(
                "no {pat} basis in dimension {n}"
            )))
        }
    })
}

/// Particular solution carrying the `(alpha/beta) log r` mill target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "c")]
pub enum Inhomogeneity {
    /// `c log r`
    Log(f64),
    /// `c r^2 (log r - 1)`, used when A = 0
    R2LogR(f64),
}

impl Inhomogeneity {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Inhomogeneity::Log(c) => c * r.ln(),
            Inhomogeneity::R2LogR(c) => c * r * r * (r.ln() - 1.0),
        }
    }

    pub fn coefficient(&self) -> f64 {
        match *self {
            Inhomogeneity::Log(c) | Inhomogeneity::R2LogR(c) => c,
        }
    }
}

/// Inhomogeneous part of the 2D mill density.
///
/// With `b = (alpha/beta) k^4 / (lambda l^2 (1 - C))` the density solves
/// `Delta rho + A rho = b log r + const` on its support, so the log term
/// needs `c = b / A` (and `b/4 r^2 (log r - 1)` when A = 0).
pub fn mill_inhomogeneity(p: &PotentialParams, motion: &MotionParams) -> Result<Inhomogeneity> {
    if p.n != 2 {
        return Err(Error::InvalidParams(format!("mills need n = 2, got {}", p.n)));
    }
    motion.validate()?;
    if p.c == 1.0 {
        return Err(Error::InvalidParams("C = 1 makes the mill inhomogeneity singular".into()));
    }
    let reg = regime(p)?;
    let b = motion.alpha / motion.beta * p.k.powi(4) / (p.lambda * p.l * p.l * (1.0 - p.c));
    Ok(if reg.a_const == 0.0 {
        Inhomogeneity::R2LogR(0.25 * b)
    } else {
        Inhomogeneity::Log(b / reg.a_const)
    })
}

// ---------------------------------------------------------------------------
// penalties

fn trapz(v: &[f64], dr: f64) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    dr * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

fn deviation_uniform(values: &[f64], dr: f64) -> f64 {
    let len = dr * (values.len() - 1) as f64;
    let mean = trapz(values, dr) / len;
    let n = values.len();
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * (v - mean).abs();
    }
    acc * dr / len
}

fn convexity_uniform(values: &[f64], dr: f64) -> f64 {
    values
        .windows(3)
        .map(|w| ((w[2] - 2.0 * w[1] + w[0]) / (dr * dr)).max(0.0))
        .sum::<f64>()
        * dr
}

/// Mean absolute deviation `(1/L) int |v - mean(v)| dr` on the grid.
pub fn deviation_error(values: &[f64], grid: &RadialGrid) -> f64 {
    assert_eq!(values.len(), grid.len());
    deviation_uniform(values, grid.dr)
}

/// `int max(v'', 0) dr` with central second differences.
pub fn convexity_penalty(values: &[f64], grid: &RadialGrid) -> f64 {
    assert_eq!(values.len(), grid.len());
    convexity_uniform(values, grid.dr)
}

// ---------------------------------------------------------------------------
// small dense solves

fn solve2(m: [[f64; 2]; 2], rhs: [f64; 2]) -> Result<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|v| v * v).sum::<f64>();
    if !(det.abs() > 1e-14 * scale) {
        return Err(Error::Singular(format!("2x2 collocation determinant {det:e}")));
    }
    Ok([
        (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - rhs[0] * m[1][0]) / det,
    ])
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Result<[f64; 3]> {
    let mut a = [[0.0; 4]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&m[i]);
        a[i][3] = rhs[i];
    }
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        if !(a[col][col].abs() > 1e-14 * scale) {
            return Err(Error::Singular("3x3 collocation matrix is rank deficient".into()));
        }
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..4 {
                a[row][c] -= f * a[col][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = a[i][3];
        for j in i + 1..3 {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// fits from precomputed operator columns

fn weighted_mass(n: usize, r: &[f64], dr: f64, f: impl Fn(usize) -> f64) -> f64 {
    let om = omega(n);
    let last = r.len() - 1;
    let mut acc = 0.0;
    for (i, &ri) in r.iter().enumerate() {
        let w = if i == 0 || i == last { 0.5 } else { 1.0 };
        acc += w * f(i) * ri.powi(n as i32 - 1);
    }
    acc * dr * om
}

struct FlockFit {
    mu: [f64; 2],
    rho: Vec<f64>,
    conv: Vec<f64>,
    target: f64,
    e: f64,
}

fn flock_from_columns(
    n: usize,
    r: &[f64],
    dr: f64,
    b: &[f64],
    g1: &[f64],
    g2: &[f64],
) -> Result<FlockFit> {
    let last = r.len() - 1;
    let raw = solve2([[g1[0], g2[0]], [g1[last], g2[last]]], [1.0, 1.0])?;
    let mass = weighted_mass(n, r, dr, |i| raw[0] * b[i] + raw[1]);
    // the raw fit targets D = 1, so its mass has the sign of D
    if !(mass.abs() > 1e-300 && mass.is_finite()) {
        return Err(Error::ZeroMassBasis(format!("flock mass {mass:e}")));
    }
    let mu = [raw[0] / mass, raw[1] / mass];
    let rho: Vec<f64> = b.iter().map(|bi| mu[0] * bi + mu[1]).collect();
    let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -EPS_NEG {
        return Err(Error::NegativeDensity(format!("min density {min:e}")));
    }
    let conv: Vec<f64> = g1.iter().zip(g2).map(|(x, y)| mu[0] * x + mu[1] * y).collect();
    let e = deviation_uniform(&conv, dr);
    Ok(FlockFit {
        mu,
        rho,
        conv,
        target: 1.0 / mass,
        e,
    })
}

struct MillFit {
    mu: [f64; 3],
    gamma: f64,
    rho: Vec<f64>,
    conv: Vec<f64>,
    target: Vec<f64>,
    e1: f64,
    e2: f64,
}

#[allow(clippy::too_many_arguments)]
fn mill_from_columns(
    r: &[f64],
    dr: f64,
    b: [&[f64]; 3],
    inh: &[f64],
    g: [&[f64]; 3],
    g_inh: &[f64],
    ab: f64,
) -> Result<MillFit> {
    let last = r.len() - 1;
    let idx = [0, last / 2, last];
    let s: Vec<f64> = r.iter().map(|ri| ab * ri.ln()).collect();
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (row, &i) in idx.iter().enumerate() {
        for col in 0..3 {
            m[row][col] = g[col][i];
        }
        rhs[row] = s[i] - g_inh[i];
    }
    let mu_rem = solve3(m, rhs)?;
    let mu_const = solve3(m, [1.0; 3])?;
    let combo = |mu: &[f64; 3], i: usize| mu[0] * b[0][i] + mu[1] * b[1][i] + mu[2] * b[2][i];
    let m_rem = weighted_mass(2, r, dr, |i| combo(&mu_rem, i));
    let m_inh = weighted_mass(2, r, dr, |i| inh[i]);
    let m_const = weighted_mass(2, r, dr, |i| combo(&mu_const, i));
    if !(m_const.abs() > 1e-14 * (1.0 + m_rem.abs() + m_inh.abs())) {
        return Err(Error::ZeroMassBasis(format!("constant-target mass {m_const:e}")));
    }
    let gamma = (1.0 - m_rem - m_inh) / m_const;
    let mu = [
        mu_rem[0] + gamma * mu_const[0],
        mu_rem[1] + gamma * mu_const[1],
        mu_rem[2] + gamma * mu_const[2],
    ];
    let rho: Vec<f64> = (0..r.len()).map(|i| inh[i] + combo(&mu, i)).collect();
    let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min >= -EPS_NEG) {
        return Err(Error::NegativeDensity(format!("min density {min:e}")));
    }
    let conv: Vec<f64> = (0..r.len())
        .map(|i| g_inh[i] + mu[0] * g[0][i] + mu[1] * g[1][i] + mu[2] * g[2][i])
        .collect();
    let resid: Vec<f64> = conv.iter().zip(&s).map(|(c, t)| c - t).collect();
    let e1 = deviation_uniform(&resid, dr);
    let e2 = convexity_uniform(&conv, dr);
    let target = s.iter().map(|t| t + gamma).collect();
    Ok(MillFit {
        mu,
        gamma,
        rho,
        conv,
        target,
        e1,
        e2,
    })
}

// ---------------------------------------------------------------------------
// public fits

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub pattern: Pattern,
    pub params: PotentialParams,
    pub regime: Regime,
    pub motion: Option<MotionParams>,
    pub basis: Vec<BasisFn>,
    pub inhomogeneity: Option<Inhomogeneity>,
    /// `(R_m, R_M)`; `R_m = 0` for flocks.
    pub support: (f64, f64),
    pub mu: Vec<f64>,
    pub gamma: Option<f64>,
    pub dr: f64,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    /// `H rho` on the grid.
    pub conv: Vec<f64>,
    /// Target profile `s(r)` with the fitted constant.
    pub target: Vec<f64>,
    pub e: f64,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub mass: f64,
}

impl SteadyState {
    /// Density from the closed form, zero outside the support.
    pub fn density_at(&self, r: f64) -> f64 {
        if r < self.support.0 || r > self.support.1 {
            return 0.0;
        }
        let hom: f64 = self.basis.iter().zip(&self.mu).map(|(b, m)| m * b.eval(r)).sum();
        hom + self.inhomogeneity.map(|h| h.eval(r)).unwrap_or(0.0)
    }

    pub fn grid(&self) -> RadialGrid {
        RadialGrid::with_intervals(self.support.0, self.dr, self.r.len() - 1)
    }

    /// Same state for the potential with wavenumber `k_new`.
    pub fn rescaled(&self, k_new: f64) -> Result<SteadyState> {
        if !(k_new > 0.0 && k_new.is_finite()) {
            return Err(Error::InvalidParams(format!("k_new must be positive, got {k_new}")));
        }
        let f = k_new / self.params.k;
        let n = self.params.n as i32;
        let amp = match self.pattern {
            Pattern::Flock => f.powi(n),
            Pattern::Mill => f * f,
        };
        let mut out = self.clone();
        out.params = self.params.with_k(k_new);
        out.regime = regime(&out.params)?;
        out.support = (self.support.0 / f, self.support.1 / f);
        out.dr = self.dr / f;
        out.r = self.r.iter().map(|r| r / f).collect();
        out.rho = self.rho.iter().map(|v| v * amp).collect();
        let const_idx = self.basis.len() - 1;
        let mut shift = 0.0;
        for (i, b) in self.basis.iter().enumerate() {
            let (nb, factor, s) = b.dilation(f);
            out.basis[i] = nb;
            out.mu[i] = amp * self.mu[i] * factor;
            shift += amp * self.mu[i] * s;
        }
        out.mu[const_idx] += shift;
        match self.pattern {
            Pattern::Flock => {
                // W~ * rho~ (x) = f^{n-2} (W * rho)(f x)
                let cf = f.powi(n - 2);
                out.conv = self.conv.iter().map(|v| v * cf).collect();
                out.target = self.target.iter().map(|v| v * cf).collect();
                out.e = self.e * cf;
            }
            Pattern::Mill => {
                // W~ * rho~ (x) = (W * rho)(f x): values carry over node by node
                let ab = self.motion.map(|m| m.alpha / m.beta).unwrap_or(0.0);
                out.gamma = self.gamma.map(|g| g + ab * f.ln());
                match self.inhomogeneity {
                    Some(Inhomogeneity::Log(c)) => {
                        let c_new = amp * c;
                        out.inhomogeneity = Some(Inhomogeneity::Log(c_new));
                        out.mu[const_idx] += c_new * f.ln();
                    }
                    Some(Inhomogeneity::R2LogR(c)) => {
                        let c_new = amp * c * f * f;
                        out.inhomogeneity = Some(Inhomogeneity::R2LogR(c_new));
                        if let Some(i) = self.basis.iter().position(|b| *b == BasisFn::R2) {
                            out.mu[i] += c_new * f.ln();
                        }
                    }
                    None => {}
                }
                let e2 = self.e2.map(|v| v * f);
                out.e2 = e2;
                out.e = self.e1.unwrap_or(0.0) + e2.unwrap_or(0.0);
            }
        }
        Ok(out)
    }
}

fn eval_columns(basis: &[BasisFn], r: &[f64]) -> Vec<Vec<f64>> {
    basis
        .iter()
        .map(|b| r.iter().map(|&x| b.eval(x)).collect())
        .collect()
}

/// Fits a flock on the operator's support `[0, R]`.
pub fn fit_flock(op: &ConvolutionOperator, regime: &Regime) -> Result<SteadyState> {
    let p = op.params;
    if op.grid.r_min.abs() > 1e-12 {
        return Err(Error::InvalidParams("flock support must start at r = 0".into()));
    }
    let basis = basis(&p, Pattern::Flock, regime)?;
    let r = op.grid.nodes();
    let cols = eval_columns(&basis, &r);
    let g1 = op.apply(&cols[0]);
    let g2 = op.apply(&cols[1]);
    let fit = flock_from_columns(p.n, &r, op.grid.dr, &cols[0], &g1, &g2)?;
    let mass = weighted_mass(p.n, &r, op.grid.dr, |i| fit.rho[i]);
    Ok(SteadyState {
        pattern: Pattern::Flock,
        params: p,
        regime: *regime,
        motion: None,
        basis,
        inhomogeneity: None,
        support: (0.0, op.grid.r_max()),
        mu: fit.mu.to_vec(),
        gamma: None,
        dr: op.grid.dr,
        target: vec![fit.target; r.len()],
        r,
        rho: fit.rho,
        conv: fit.conv,
        e: fit.e,
        e1: None,
        e2: None,
        mass,
    })
}

/// Fits a 2D mill on the operator's support `[R_m, R_M]`, `R_m > 0`.
pub fn fit_mill(op: &ConvolutionOperator, regime: &Regime, motion: &MotionParams) -> Result<SteadyState> {
    let p = op.params;
    if !(op.grid.r_min > 0.0) {
        return Err(Error::InvalidParams("mill support must have R_m > 0".into()));
    }
    let basis = basis(&p, Pattern::Mill, regime)?;
    let inh = mill_inhomogeneity(&p, motion)?;
    let r = op.grid.nodes();
    let cols = eval_columns(&basis, &r);
    let inh_col: Vec<f64> = r.iter().map(|&x| inh.eval(x)).collect();
    let g: Vec<Vec<f64>> = cols.iter().map(|c| op.apply(c)).collect();
    let g_inh = op.apply(&inh_col);
    let fit = mill_from_columns(
        &r,
        op.grid.dr,
        [&cols[0], &cols[1], &cols[2]],
        &inh_col,
        [&g[0], &g[1], &g[2]],
        &g_inh,
        motion.alpha / motion.beta,
    )?;
    let mass = weighted_mass(2, &r, op.grid.dr, |i| fit.rho[i]);
    Ok(SteadyState {
        pattern: Pattern::Mill,
        params: p,
        regime: *regime,
        motion: Some(*motion),
        basis,
        inhomogeneity: Some(inh),
        support: (op.grid.r_min, op.grid.r_max()),
        mu: fit.mu.to_vec(),
        gamma: Some(fit.gamma),
        dr: op.grid.dr,
        r,
        rho: fit.rho,
        conv: fit.conv,
        target: fit.target,
        e: fit.e1 + fit.e2,
        e1: Some(fit.e1),
        e2: Some(fit.e2),
        mass,
    })
}

// ---------------------------------------------------------------------------
// support search

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub dr_fine: f64,
    pub dr_coarse: f64,
    pub r_max: f64,
    /// Half-width of the refinement window around the coarse minimizer.
    pub window: f64,
    pub min_mill_nodes: usize,
    /// Refine the flock radius off the grid after the scan.
    pub polish: bool,
}

impl SearchConfig {
    /// `R_max = 10/k`, `dr_coarse = 10 dr_fine`, window three coarse steps.
    pub fn defaults(p: &PotentialParams, dr_fine: f64) -> Self {
        SearchConfig {
            dr_fine,
            dr_coarse: 10.0 * dr_fine,
            r_max: 10.0 / p.k,
            window: 30.0 * dr_fine,
            min_mill_nodes: DEFAULT_MIN_MILL_NODES,
            polish: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.dr_fine) && ok(self.dr_coarse) && ok(self.r_max) && ok(self.window)) {
            return Err(Error::InvalidParams(format!("search config has a nonpositive field: {self:?}")));
        }
        if self.dr_fine > self.dr_coarse {
            return Err(Error::InvalidParams("dr_fine must not exceed dr_coarse".into()));
        }
        if self.r_max < 4.0 * self.dr_coarse {
            return Err(Error::InvalidParams("r_max spans fewer than 4 coarse steps".into()));
        }
        if self.min_mill_nodes < 4 {
            return Err(Error::InvalidParams("min_mill_nodes must be at least 4".into()));
        }
        Ok(())
    }
}

/// Running sums `acc_c[i] = sum_{j=lo}^{hi} K_ij f_c(r_j)` for a support
/// growing at its upper end, giving each candidate in O(N).
struct Accumulator<'a> {
    kernel: &'a [f64],
    m: usize,
    cols: &'a [Vec<f64>],
    lo: usize,
    hi: usize,
    acc: Vec<Vec<f64>>,
}

impl<'a> Accumulator<'a> {
    fn new(kernel: &'a [f64], m: usize, cols: &'a [Vec<f64>], lo: usize) -> Self {
        let acc = cols
            .iter()
            .map(|c| {
                let mut v = vec![0.0; m];
                v[lo] = kernel[lo * m + lo] * c[lo];
                v
            })
            .collect();
        Accumulator {
            kernel,
            m,
            cols,
            lo,
            hi: lo,
            acc,
        }
    }

    fn grow(&mut self) {
        let q = self.hi + 1;
        let m = self.m;
        for (c, acc) in self.cols.iter().zip(self.acc.iter_mut()) {
            let fq = c[q];
            for (i, a) in acc.iter_mut().enumerate().take(q).skip(self.lo) {
                *a += self.kernel[i * m + q] * fq;
            }
            let row = &self.kernel[q * m..q * m + m];
            acc[q] = (self.lo..=q).map(|j| row[j] * c[j]).sum();
        }
        self.hi = q;
    }

    /// `H f_c` on the current support with trapezoid weights.
    fn column(&self, c: usize, dr: f64) -> Vec<f64> {
        let (lo, hi, m) = (self.lo, self.hi, self.m);
        let f = &self.cols[c];
        (lo..=hi)
            .map(|i| {
                dr * (self.acc[c][i]
                    - 0.5 * self.kernel[i * m + lo] * f[lo]
                    - 0.5 * self.kernel[i * m + hi] * f[hi])
            })
            .collect()
    }
}

fn key_cmp(a: &(f64, usize, usize), b: &(f64, usize, usize)) -> Ordering {
    // smaller penalty, then smaller R_M, then smaller R_m
    a.0.total_cmp(&b.0)
        .then(a.2.cmp(&b.2))
        .then(a.1.cmp(&b.1))
}

/// Best flock candidate `(e, 0, N)` with support `[0, r_N]`, `N in cand`.
fn scan_flock(
    p: &PotentialParams,
    hom: BasisFn,
    grid: &RadialGrid,
    cand: (usize, usize),
) -> Option<(f64, usize, usize)> {
    let r = grid.nodes();
    let m = r.len();
    let kernel = kernel_matrix(p, grid);
    let cols = vec![
        r.iter().map(|&x| hom.eval(x)).collect::<Vec<_>>(),
        vec![1.0; m],
    ];
    let mut acc = Accumulator::new(&kernel, m, &cols, 0);
    let mut best: Option<(f64, usize, usize)> = None;
    let first = cand.0.max(3);
    for q in 1..=cand.1.min(m - 1) {
        acc.grow();
        if q < first {
            continue;
        }
        let g1 = acc.column(0, grid.dr);
        let g2 = acc.column(1, grid.dr);
        if let Ok(fit) = flock_from_columns(p.n, &r[..=q], grid.dr, &cols[0][..=q], &g1, &g2) {
            let key = (fit.e, 0, q);
            if fit.e.is_finite() && best.map_or(true, |b| key_cmp(&key, &b) == Ordering::Less) {
                best = Some(key);
            }
        }
    }
    best
}

/// Best mill candidate `(e, p, q)` with support `[r_p, r_q]`.
#[allow(clippy::too_many_arguments)]
fn scan_mill(
    p: &PotentialParams,
    basis: &[BasisFn],
    inh: Inhomogeneity,
    ab: f64,
    grid: &RadialGrid,
    p_range: (usize, usize),
    q_range: (usize, usize),
    min_nodes: usize,
) -> Option<(f64, usize, usize)> {
    let r = grid.nodes();
    let m = r.len();
    let kernel = kernel_matrix(p, grid);
    let mut cols: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| r.iter().map(|&x| if x > 0.0 { b.eval(x) } else { 0.0 }).collect())
        .collect();
    cols.push(r.iter().map(|&x| if x > 0.0 { inh.eval(x) } else { 0.0 }).collect());
    let q_hi = q_range.1.min(m - 1);
    let p_lo = p_range.0.max(usize::from(r[0] <= 0.0));
    (p_lo..=p_range.1)
        .into_par_iter()
        .filter_map(|lo| {
            let mut acc = Accumulator::new(&kernel, m, &cols, lo);
            let mut best: Option<(f64, usize, usize)> = None;
            let q_first = q_range.0.max(lo + min_nodes - 1);
            for q in lo + 1..=q_hi {
                acc.grow();
                if q < q_first {
                    continue;
                }
                let g: Vec<Vec<f64>> = (0..4).map(|c| acc.column(c, grid.dr)).collect();
                let fit = mill_from_columns(
                    &r[lo..=q],
                    grid.dr,
                    [&cols[0][lo..=q], &cols[1][lo..=q], &cols[2][lo..=q]],
                    &cols[3][lo..=q],
                    [&g[0], &g[1], &g[2]],
                    &g[3],
                    ab,
                );
                if let Ok(fit) = fit {
                    let e = fit.e1 + fit.e2;
                    let key = (e, lo, q);
                    if e.is_finite() && best.map_or(true, |b| key_cmp(&key, &b) == Ordering::Less) {
                        best = Some(key);
                    }
                }
            }
            best
        })
        .min_by(key_cmp)
}

/// Index range of nodes `i * dr` inside `[lo, hi]`.
fn index_window(lo: f64, hi: f64, dr: f64) -> (usize, usize) {
    let a = (lo / dr - 1e-9).ceil().max(0.0) as usize;
    let b = (hi / dr + 1e-9).floor().max(0.0) as usize;
    (a, b)
}

const MAX_RECENTER: usize = 6;

fn no_compact(what: &str, r: f64, cfg: &SearchConfig) -> Error {
    Error::NoCompactSolution(format!(
        "{what} minimizer R = {r} within one coarse step of R_max = {}",
        cfg.r_max
    ))
}

/// Golden-section refinement of the flock radius between the neighbouring
/// grid candidates. The node count stays fixed, so `e(R)` varies
/// continuously; the grid fit is kept if the refinement does not beat it.
fn polish_flock(p: &PotentialParams, reg: &Regime, m: usize, dr: f64, grid_fit: SteadyState) -> SteadyState {
    let fit = |r: f64| build_operator(p, RadialGrid::with_intervals(0.0, r / m as f64, m)).and_then(|op| fit_flock(&op, reg));
    let e = |r: f64| fit(r).map(|s| s.e).unwrap_or(f64::INFINITY);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let r0 = m as f64 * dr;
    let (mut a, mut b) = (r0 - dr, r0 + dr);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (e(c), e(d));
    for _ in 0..30 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = e(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = e(d);
        }
    }
    match fit(0.5 * (a + b)) {
        Ok(s) if s.e <= grid_fit.e => s,
        _ => grid_fit,
    }
}

/// Coarse-to-fine search for the support minimizing the fit penalty.
pub fn search_support(
    p: &PotentialParams,
    pattern: Pattern,
    motion: Option<&MotionParams>,
    cfg: &SearchConfig,
) -> Result<SteadyState> {
    p.validate()?;
    cfg.validate()?;
    let reg = regime(p)?;
    let basis = basis(p, pattern, &reg)?;
    let at_rmax = |r: f64| r >= cfg.r_max - cfg.dr_coarse * (1.0 + 1e-9);
    match pattern {
        Pattern::Flock => {
            let m = (cfg.r_max / cfg.dr_coarse).round() as usize;
            let coarse = RadialGrid::with_intervals(0.0, cfg.dr_coarse, m);
            let (_, _, nc) = scan_flock(p, basis[0], &coarse, (3, m))
                .ok_or_else(|| Error::NoCompactSolution("no admissible flock candidate".into()))?;
            let mut center = nc as f64 * cfg.dr_coarse;
            if at_rmax(center) {
                return Err(no_compact("flock", center, cfg));
            }
            let mut best_q = 0;
            for _ in 0..MAX_RECENTER {
                let hi = (center + cfg.window).min(cfg.r_max);
                let (a, b) = index_window(center - cfg.window, hi, cfg.dr_fine);
                let grid = RadialGrid::with_intervals(0.0, cfg.dr_fine, b);
                let (_, _, q) = scan_flock(p, basis[0], &grid, (a, b)).ok_or_else(|| {
                    Error::NoCompactSolution("no admissible flock candidate in refinement".into())
                })?;
                best_q = q;
                let r = q as f64 * cfg.dr_fine;
                let on_edge = (q == b && hi < cfg.r_max) || (q == a.max(3) && a > 3);
                if !on_edge || (r - center).abs() < 0.5 * cfg.dr_fine {
                    break;
                }
                center = r;
            }
            let r_f = best_q as f64 * cfg.dr_fine;
            if at_rmax(r_f) {
                return Err(no_compact("flock", r_f, cfg));
            }
            let op = build_operator(p, RadialGrid::with_intervals(0.0, cfg.dr_fine, best_q))?;
            let grid_fit = fit_flock(&op, &reg)?;
            Ok(if cfg.polish {
                polish_flock(p, &reg, best_q, cfg.dr_fine, grid_fit)
            } else {
                grid_fit
            })
        }
        Pattern::Mill => {
            let motion = motion.ok_or_else(|| {
                Error::InvalidParams("mill search needs motion parameters".into())
            })?;
            let inh = mill_inhomogeneity(p, motion)?;
            let ab = motion.alpha / motion.beta;
            let m = (cfg.r_max / cfg.dr_coarse).round() as usize;
            let coarse = RadialGrid::with_intervals(0.0, cfg.dr_coarse, m);
            let (_, pc, qc) = scan_mill(p, &basis, inh, ab, &coarse, (1, m), (1, m), cfg.min_mill_nodes)
                .ok_or_else(|| Error::NoCompactSolution("no admissible mill candidate".into()))?;
            let mut c_in = pc as f64 * cfg.dr_coarse;
            let mut c_out = qc as f64 * cfg.dr_coarse;
            if at_rmax(c_out) {
                return Err(no_compact("mill", c_out, cfg));
            }
            let df = cfg.dr_fine;
            let mut best = (pc, qc, 0usize);
            for _ in 0..MAX_RECENTER {
                let (pa, pb) = index_window((c_in - cfg.window).max(df), c_in + cfg.window, df);
                let (qa, qb) = index_window(c_out - cfg.window, (c_out + cfg.window).min(cfg.r_max), df);
                let start = pa.max(1);
                let grid = RadialGrid::with_intervals(start as f64 * df, df, qb - start);
                let (_, lo, hi) = scan_mill(
                    p,
                    &basis,
                    inh,
                    ab,
                    &grid,
                    (0, pb - start),
                    (qa.saturating_sub(start), qb - start),
                    cfg.min_mill_nodes,
                )
                .ok_or_else(|| {
                    Error::NoCompactSolution("no admissible mill candidate in refinement".into())
                })?;
                let (gp, gq) = (lo + start, hi + start);
                best = (gp, gq, 1);
                let r_in = gp as f64 * df;
                let r_out = gq as f64 * df;
                let edge_in = (gp == pa && pa > 1) || gp == pb;
                let edge_out = gq == qa || (gq == qb && c_out + cfg.window < cfg.r_max);
                let moved = (r_in - c_in).abs() + (r_out - c_out).abs() >= 0.5 * df;
                c_in = r_in;
                c_out = r_out;
                if !(edge_in || edge_out) || !moved {
                    break;
                }
            }
            let (gp, gq, _) = best;
            let r_out = gq as f64 * df;
            if at_rmax(r_out) {
                return Err(no_compact("mill", r_out, cfg));
            }
            let op = build_operator(p, RadialGrid::with_intervals(gp as f64 * df, df, gq - gp))?;
            fit_mill(&op, &reg, motion)
        }
    }
}

// ---------------------------------------------------------------------------
// 3D flocks in closed form

/// Root of the 3D flock condition with its nullspace coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flock3DCertificate {
    pub r: f64,
    pub lambda_cl: f64,
    pub lambda_11: f64,
    pub det: f64,
    /// Frobenius norm of the 2x2 matrix at `r`.
    pub matrix_norm: f64,
    /// Unit-mass coefficients of `sin(ar)/r` and 1.
    pub mu: [f64; 2],
    /// Density nonnegative on `[0, r]`.
    pub valid: bool,
}

fn flock3d_matrix(k: f64, a: f64, l: f64, r: f64) -> [[f64; 2]; 2] {
    let (s, c) = (r * a).sin_cos();
    let (k2, k3, a2) = (k * k, k * k * k, a * a);
    [
        [
            k2 * a * l * c + k3 * s,
            k * a2 * l * l * r + a2 * l * l * l + l * k2 + k3 * r,
        ],
        [k2 * a * c + k3 * s, k * a2 * r + a2 + k2 + k3 * r],
    ]
}

/// Right-hand side of `tan(aR) = g(R)`, the vanishing-determinant condition
/// divided through by `cos(aR)` and the common factor `1 - l`.
pub fn flock3d_tan_rhs(k: f64, a: f64, l: f64, r: f64) -> f64 {
    let a2 = a * a;
    let num = k * k * k * r - a2 * l * (1.0 + l) - k * a2 * l * r;
    let den = k * a2 * r * (1.0 + l) + a2 * (1.0 + l + l * l) + k * k;
    a / k * num / den
}

/// All roots of the 3D flock condition in `(0, r_max]`.
pub fn flock_radius_3d(p: &PotentialParams, r_max: f64) -> Result<Vec<Flock3DCertificate>> {
    p.validate()?;
    let reg = regime(p)?;
    if p.n != 3 || reg.a_const <= 0.0 {
        return Err(Error::InvalidParams(
            "closed-form flock radius needs n = 3 and A > 0".into(),
        ));
    }
    if p.l == 1.0 {
        return Err(Error::InvalidParams("l = 1 makes the flock condition degenerate".into()));
    }
    let (k, a, l) = (p.k, reg.a, p.l);
    let f = |r: f64| (a * r).tan() - flock3d_tan_rhs(k, a, l, r);
    let mut roots = Vec::new();
    let mut lo = 0.0;
    let mut branch = 0;
    while lo < r_max {
        let pole = (0.5 + branch as f64) * PI / a;
        let hi = pole.min(r_max);
        let width = hi - lo;
        let eps = 1e-9 * width;
        let samples = 256;
        let mut x0 = lo + eps;
        let mut f0 = f(x0);
        for i in 1..=samples {
            let x1 = if i == samples && hi < pole {
                hi
            } else {
                lo + eps + (width - 2.0 * eps) * i as f64 / samples as f64
            };
            let f1 = f(x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut u, mut v, mut fu) = (x0, x1, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (u + v);
                    let fm = f(mid);
                    if (fm < 0.0) == (fu < 0.0) {
                        u = mid;
                        fu = fm;
                    } else {
                        v = mid;
                    }
                    if v - u <= 1e-15 * v {
                        break;
                    }
                }
                roots.push(0.5 * (u + v));
            }
            x0 = x1;
            f0 = f1;
        }
        lo = pole;
        branch += 1;
    }
    let mut out = Vec::new();
    for r in roots {
        let mat = flock3d_matrix(k, a, l, r);
        let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
        let norm = mat.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let row = if mat[0][0].hypot(mat[0][1]) >= mat[1][0].hypot(mat[1][1]) {
            mat[0]
        } else {
            mat[1]
        };
        let raw = [-row[1], row[0]];
        let mass = 4.0 * PI
            * (raw[0] * ((a * r).sin() - a * r * (a * r).cos()) / (a * a) + raw[1] * r.powi(3) / 3.0);
        if !(mass.abs() > 0.0 && mass.is_finite()) {
            continue;
        }
        let mu = [raw[0] / mass, raw[1] / mass];
        let valid = (0..=400).all(|i| {
            let x = r * i as f64 / 400.0;
            mu[0] * BasisFn::SinOverR(a).eval(x) + mu[1] >= -EPS_NEG
        });
        out.push(Flock3DCertificate {
            r,
            lambda_cl: mat[0][0] * mu[0] + mat[0][1] * mu[1],
            lambda_11: mat[1][0] * mu[0] + mat[1][1] * mu[1],
            det,
            matrix_norm: norm,
            mu,
            valid,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radialconv::radial_mass;

    fn base_2d() -> PotentialParams {
        PotentialParams::new(2, 10.0 / 9.0, 0.75, 0.5, 1.0).unwrap()
    }

    fn base_3d() -> PotentialParams {
        PotentialParams::new(3, 1.255, 0.8, 0.2, 1.0).unwrap()
    }

    #[test]
    fn basis_rows() {
        let p = base_2d();
        let reg = regime(&p).unwrap();
        let a = reg.a;
        assert_eq!(basis(&p, Pattern::Flock, &reg).unwrap(), vec![BasisFn::J0(a), BasisFn::One]);
        let sep = PotentialParams { c: 1.0 / 0.5625, ..p };
        let rs = regime(&sep).unwrap();
        assert_eq!(
            basis(&sep, Pattern::Mill, &rs).unwrap(),
            vec![BasisFn::R2, BasisFn::LogR, BasisFn::One]
        );
        let m = MotionParams::new(1.0, 5.0).unwrap();
        assert!(matches!(mill_inhomogeneity(&sep, &m).unwrap(), Inhomogeneity::R2LogR(_)));
        let p3 = PotentialParams::new(3, 2.0, 0.9, 1.0, 1.0).unwrap();
        let r3 = regime(&p3).unwrap();
        assert!(r3.a_const < 0.0);
        assert_eq!(
            basis(&p3, Pattern::Flock, &r3).unwrap(),
            vec![BasisFn::SinhOverR(r3.a), BasisFn::One]
        );
        assert!(basis(&p3, Pattern::Mill, &r3).is_err());
    }

    #[test]
    fn mill_inhomogeneity_value() {
        let p = PotentialParams::new(2, 10.0 / 9.0, 0.75, 0.5, 100.0).unwrap();
        let m = MotionParams::new(1.0, 5.0).unwrap();
        let c = mill_inhomogeneity(&p, &m).unwrap().coefficient();
        // (1/5)(1/16) / (100 * 1.5 * 0.5625 * (-1/9))
        assert!((c + 0.0125 / 9.375).abs() < 1e-15);
        assert!(mill_inhomogeneity(&PotentialParams { c: 1.0, ..p }, &m).is_err());
        let sep = PotentialParams { c: 1.0 / 0.5625, ..p };
        let h = mill_inhomogeneity(&sep, &m).unwrap();
        let want = -0.2 * 0.0625 / (4.0 * 100.0 * 0.5625 * (1.0 - 1.0 / 0.5625));
        assert!((h.eval(1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn penalties_trivial_cases() {
        let g = RadialGrid::new(0.0, 1.0, 0.01).unwrap();
        assert_eq!(deviation_error(&vec![3.0; g.len()], &g), 0.0);
        let affine: Vec<f64> = g.nodes().iter().map(|r| 2.0 - 3.0 * r).collect();
        assert!(convexity_penalty(&affine, &g).abs() < 1e-9);
        let fine = RadialGrid::new(0.0, 1.0, 1e-4).unwrap();
        let sq: Vec<f64> = fine.nodes().iter().map(|r| r * r).collect();
        assert!((convexity_penalty(&sq, &fine) - 2.0).abs() < 1e-3);
        let concave: Vec<f64> = g.nodes().iter().map(|r| -r * r).collect();
        assert_eq!(convexity_penalty(&concave, &g), 0.0);
    }

    #[test]
    fn fit_flock_on_known_support() {
        let p = base_2d();
        let reg = regime(&p).unwrap();
        let op = build_operator(&p, RadialGrid::new(0.0, 1.31, 0.0025).unwrap()).unwrap();
        let s = fit_flock(&op, &reg).unwrap();
        assert!((s.mu[0] / 0.2356 - 1.0).abs() < 0.05, "{:?}", s.mu);
        assert!((s.mu[1] / 0.018 - 1.0).abs() < 0.05, "{:?}", s.mu);
        assert!(s.e <= 5e-6, "{}", s.e);
        assert!((radial_mass(2, &op.grid, &s.rho) - 1.0).abs() < 1e-8);
        assert!((s.density_at(0.7) - (s.mu[0] * specfun::j0(reg.a * 0.7) + s.mu[1])).abs() < 1e-15);
    }

    #[test]
    fn fit_mill_mass_is_one() {
        let p = PotentialParams::new(2, 10.0 / 9.0, 0.75, 0.5, 100.0).unwrap();
        let reg = regime(&p).unwrap();
        let op = build_operator(&p, RadialGrid::new(0.47, 1.57, 0.01).unwrap()).unwrap();
        let m = MotionParams::new(1.0, 5.0).unwrap();
        let s = fit_mill(&op, &reg, &m).unwrap();
        assert!((s.mass - 1.0).abs() < 1e-12);
        assert_eq!(s.mu.len(), 3);
        assert!(s.support.0 > 0.0);
        let zero_start = build_operator(&p, RadialGrid::new(0.0, 1.0, 0.01).unwrap()).unwrap();
        assert!(fit_mill(&zero_start, &reg, &m).is_err());
    }

    #[test]
    fn incremental_scan_matches_direct_fits() {
        let p = base_2d();
        let reg = regime(&p).unwrap();
        let b = basis(&p, Pattern::Flock, &reg).unwrap();
        let grid = RadialGrid::with_intervals(0.0, 0.05, 40);
        let (e, _, q) = scan_flock(&p, b[0], &grid, (3, 40)).unwrap();
        let op = build_operator(&p, RadialGrid::with_intervals(0.0, 0.05, q)).unwrap();
        let direct = fit_flock(&op, &reg).unwrap();
        assert!((direct.e - e).abs() <= 1e-9 * e.abs().max(1e-12), "{} vs {e}", direct.e);
        // every candidate, not just the winner
        for n in [17usize, 24, 26, 30] {
            let (en, _, qn) = scan_flock(&p, b[0], &grid, (n, n)).unwrap();
            assert_eq!(qn, n);
            let op = build_operator(&p, RadialGrid::with_intervals(0.0, 0.05, n)).unwrap();
            let d = fit_flock(&op, &reg).unwrap().e;
            assert!((d - en).abs() <= 1e-9 * d.abs(), "N={n}: {d} vs {en}");
        }

        let pm = PotentialParams { lambda: 100.0, ..p };
        let mo = MotionParams::new(1.0, 5.0).unwrap();
        let bm = basis(&pm, Pattern::Mill, &reg).unwrap();
        let inh = mill_inhomogeneity(&pm, &mo).unwrap();
        let grid = RadialGrid::with_intervals(0.0, 0.05, 40);
        for (lo, hi) in [(9usize, 31usize), (10, 32)] {
            let (e, pp, qq) = scan_mill(&pm, &bm, inh, 0.2, &grid, (lo, lo), (hi, hi), 8).unwrap();
            assert_eq!((pp, qq), (lo, hi));
            let op = build_operator(&pm, RadialGrid::with_intervals(lo as f64 * 0.05, 0.05, hi - lo))
                .unwrap();
            let d = fit_mill(&op, &reg, &mo).unwrap().e;
            assert!((d - e).abs() <= 1e-8 * d.abs(), "{d} vs {e}");
        }
    }

    #[test]
    fn flock3d_roots() {
        let certs = flock_radius_3d(&base_3d(), 20.0).unwrap();
        let first = certs.iter().find(|c| c.valid).unwrap();
        assert!((first.r - 0.7266).abs() < 1e-3, "{first:?}");
        for c in &certs {
            assert!(c.det.abs() <= 1e-8 * c.matrix_norm, "{c:?}");
            assert!(c.lambda_cl.abs() <= 1e-6 && c.lambda_11.abs() <= 1e-6, "{c:?}");
        }
        assert!(flock_radius_3d(&base_2d(), 5.0).is_err());
    }

    #[test]
    fn rescale_identity_and_flock_scaling() {
        let p = base_2d().with_k(1.0);
        let reg = regime(&p).unwrap();
        let op = build_operator(&p, RadialGrid::new(0.0, 0.65, 0.005).unwrap()).unwrap();
        let s = fit_flock(&op, &reg).unwrap();
        assert_eq!(s.rescaled(1.0).unwrap(), s);
        let t = s.rescaled(2.0).unwrap();
        assert!((t.support.1 - s.support.1 / 2.0).abs() < 1e-15);
        assert!((t.rho[3] - 4.0 * s.rho[3]).abs() < 1e-12);
        assert!((radial_mass(2, &t.grid(), &t.rho) - 1.0).abs() < 1e-8);
        for (i, &r) in t.r.iter().enumerate() {
            assert!((t.density_at(r) - t.rho[i]).abs() < 1e-10);
        }
    }
}
