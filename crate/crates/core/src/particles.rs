//! Direct N-body simulation of self-propelled particles with Quasi-Morse forces.
//!
//! `dx_i/dt = v_i`, `dv_i/dt = v_i (alpha - beta |v_i|^2) - (1/N) sum_j grad U(|x_i - x_j|)`,
//! integrated with classical fourth-order Runge-Kutta at a fixed step.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{omega, quasi_morse_d2u, quasi_morse_du, PotentialParams};
use crate::steadystate::SteadyState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MotionParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let m = MotionParams { alpha, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha and beta must be positive, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn cruise_speed(&self) -> f64 {
        (self.alpha / self.beta).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub dim: usize,
    /// Positions, `dim` consecutive coordinates per particle.
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl ParticleState {
    pub fn new(dim: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let s = ParticleState { dim, x, v, t: 0.0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 2 || self.dim == 3) {
            return Err(Error::InvalidParams(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if self.x.len() != self.v.len() || self.x.len() % self.dim != 0 {
            return Err(Error::InvalidParams("position/velocity arrays disagree".into()));
        }
        if self.x.iter().chain(&self.v).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("non-finite coordinate".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn pos(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vel(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut c = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (cd, xd) in c.iter_mut().zip(self.pos(i)) {
                *cd += xd;
            }
        }
        c.iter_mut().for_each(|v| *v /= n);
        c
    }
}

/// Distance below which pair separations are clamped.
pub fn regularization_radius(p: &PotentialParams) -> f64 {
    1e-4 / p.k
}

/// Force on a particle at offset `dx` from its partner, `-U'(|dx|) dx/|dx|`.
pub fn pair_force(p: &PotentialParams, dx: &[f64]) -> Vec<f64> {
    let r = dx.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 {
        return vec![0.0; dx.len()];
    }
    let du = quasi_morse_du(p, r.max(regularization_radius(p))).unwrap_or(0.0);
    dx.iter().map(|c| -du * c / r).collect()
}

/// Piecewise cubic Hermite table of `r^(n-1) U'(r)` on `[0.01/k, 40/k]`,
/// stored as per-interval polynomial coefficients; `U'(r)/r` is recovered by
/// dividing by `r^n`. Outside that range U' is evaluated directly.
#[derive(Debug, Clone)]
pub struct ForceTable {
    params: PotentialParams,
    eps: f64,
    dim: i32,
    r0: f64,
    inv_h: f64,
    r_end: f64,
    coef: Vec<[f64; 4]>,
}

impl ForceTable {
    pub fn new(p: &PotentialParams) -> Self {
        let eps = regularization_radius(p);
        let h = 2e-3 / p.k;
        let r0 = 0.01 / p.k;
        let m = ((40.0 / p.k - r0) / h).ceil() as usize;
        let dim = p.n as i32;
        // g(r) = r^(n-1) U'(r) stays bounded at the origin, unlike U'/r
        let node = |i: usize| {
            let r = r0 + i as f64 * h;
            let du = quasi_morse_du(p, r).unwrap_or(0.0);
            let d2u = quasi_morse_d2u(p, r).unwrap_or(0.0);
            let w = r.powi(dim - 2);
            (w * r * du, h * w * ((dim - 1) as f64 * du + r * d2u))
        };
        let mut coef = Vec::with_capacity(m);
        let mut left = node(0);
        for i in 0..m {
            let right = node(i + 1);
            let (q0, d0) = left;
            let (q1, d1) = right;
            coef.push([
                q0,
                d0,
                3.0 * (q1 - q0) - 2.0 * d0 - d1,
                2.0 * (q0 - q1) + d0 + d1,
            ]);
            left = right;
        }
        ForceTable {
            params: *p,
            eps,
            dim,
            r0,
            inv_h: 1.0 / h,
            r_end: r0 + m as f64 * h,
            coef,
        }
    }

    /// `U'(r) / r` with `r` clamped below at the regularization radius.
    #[inline]
    pub fn du_over_r(&self, r: f64) -> f64 {
        if r < self.r0 || r >= self.r_end {
            let r = r.max(self.eps);
            return quasi_morse_du(&self.params, r).unwrap_or(0.0) / r;
        }
        let s = (r - self.r0) * self.inv_h;
        let i = (s as usize).min(self.coef.len() - 1);
        let t = s - i as f64;
        let c = &self.coef[i];
        let rn = if self.dim == 2 { r * r } else { r * r * r };
        (c[0] + t * (c[1] + t * (c[2] + t * c[3]))) / rn
    }
}

/// Default step `min(0.01, 0.1 / sqrt(alpha lambda))`.
pub fn default_dt(p: &PotentialParams, motion: &MotionParams) -> f64 {
    0.01f64.min(0.1 / (motion.alpha * p.lambda).sqrt())
}

fn accelerations<const D: usize>(
    table: &ForceTable,
    motion: &MotionParams,
    x: &[f64],
    v: &[f64],
    out: &mut [f64],
) {
    let n = x.len() / D;
    let inv_n = 1.0 / n as f64;
    let pos: Vec<[f64; D]> = x.chunks_exact(D).map(|c| std::array::from_fn(|d| c[d])).collect();
    let mut acc: Vec<[f64; D]> = vec![[0.0; D]; n];
    for i in 0..n {
        let xi = pos[i];
        let mut ai = [0.0; D];
        let (_, rest) = acc.split_at_mut(i + 1);
        for (xj, aj) in pos[i + 1..].iter().zip(rest.iter_mut()) {
            let mut dx = [0.0; D];
            let mut r2 = 0.0;
            for d in 0..D {
                dx[d] = xi[d] - xj[d];
                r2 += dx[d] * dx[d];
            }
            let f = table.du_over_r(r2.sqrt()) * inv_n;
            for d in 0..D {
                let c = f * dx[d];
                ai[d] -= c;
                aj[d] += c;
            }
        }
        for d in 0..D {
            acc[i][d] += ai[d];
        }
    }
    for (o, a) in out.chunks_exact_mut(D).zip(&acc) {
        o.copy_from_slice(a);
    }
    for i in 0..n {
        let vi = &v[i * D..(i + 1) * D];
        let s2: f64 = vi.iter().map(|c| c * c).sum();
        let g = motion.alpha - motion.beta * s2;
        for d in 0..D {
            out[i * D + d] += vi[d] * g;
        }
    }
}

struct Rk4Buffers {
    xs: Vec<f64>,
    vs: Vec<f64>,
    kx: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
}

impl Rk4Buffers {
    fn new(m: usize) -> Self {
        Rk4Buffers {
            xs: vec![0.0; m],
            vs: vec![0.0; m],
            kx: std::array::from_fn(|_| vec![0.0; m]),
            kv: std::array::from_fn(|_| vec![0.0; m]),
        }
    }
}

fn rk4_step<const D: usize>(
    table: &ForceTable,
    motion: &MotionParams,
    state: &mut ParticleState,
    dt: f64,
    b: &mut Rk4Buffers,
) {
    let m = state.x.len();
    for stage in 0..4 {
        let c = match stage {
            0 => 0.0,
            3 => dt,
            _ => 0.5 * dt,
        };
        if stage == 0 {
            b.xs.copy_from_slice(&state.x);
            b.vs.copy_from_slice(&state.v);
        } else {
            for q in 0..m {
                b.xs[q] = state.x[q] + c * b.kx[stage - 1][q];
                b.vs[q] = state.v[q] + c * b.kv[stage - 1][q];
            }
        }
        b.kx[stage].copy_from_slice(&b.vs);
        let (xs, kv) = (&b.xs, &mut b.kv[stage]);
        accelerations::<D>(table, motion, xs, &b.vs, kv);
    }
    let w = dt / 6.0;
    for q in 0..m {
        state.x[q] += w * (b.kx[0][q] + 2.0 * b.kx[1][q] + 2.0 * b.kx[2][q] + b.kx[3][q]);
        state.v[q] += w * (b.kv[0][q] + 2.0 * b.kv[1][q] + 2.0 * b.kv[2][q] + b.kv[3][q]);
    }
    state.t += dt;
}

/// Integrates to `t_end` (absolute time), calling `observe` every
/// `observe_every` steps and after the final step.
pub fn simulate_observed(
    mut state: ParticleState,
    p: &PotentialParams,
    motion: &MotionParams,
    dt: f64,
    t_end: f64,
    observe_every: usize,
    observe: &mut dyn FnMut(&ParticleState),
) -> Result<ParticleState> {
    state.validate()?;
    p.validate()?;
    motion.validate()?;
    if p.n != state.dim {
        return Err(Error::InvalidParams(format!(
            "potential is {}D but particles live in {}D",
            p.n, state.dim
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
    }
    let steps = ((t_end - state.t) / dt).round().max(0.0) as usize;
    let table = ForceTable::new(p);
    let guard = 1e3 * motion.cruise_speed();
    let mut buf = Rk4Buffers::new(state.x.len());
    for step in 1..=steps {
        match state.dim {
            2 => rk4_step::<2>(&table, motion, &mut state, dt, &mut buf),
            _ => rk4_step::<3>(&table, motion, &mut state, dt, &mut buf),
        }
        let dim = state.dim;
        let worst = state
            .v
            .chunks(dim)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
        if !(worst <= guard) {
            return Err(Error::BlowUp(format!(
                "speed {worst:e} exceeds {guard:e} at t = {}",
                state.t
            )));
        }
        if observe_every > 0 && (step % observe_every == 0 || step == steps) {
            observe(&state);
        }
    }
    Ok(state)
}

pub fn simulate(
    state: ParticleState,
    p: &PotentialParams,
    motion: &MotionParams,
    dt: f64,
    t_end: f64,
) -> Result<ParticleState> {
    simulate_observed(state, p, motion, dt, t_end, 0, &mut |_| {})
}

fn unit_ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return p;
        }
    }
}

/// Uniform positions in a ball, velocities along +x at cruise speed with 5% jitter.
pub fn flock_initial(
    dim: usize,
    count: usize,
    radius: f64,
    motion: &MotionParams,
    seed: u64,
) -> Result<ParticleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = motion.cruise_speed();
    let mut x = Vec::with_capacity(dim * count);
    let mut v = Vec::with_capacity(dim * count);
    for _ in 0..count {
        x.extend(unit_ball_point(&mut rng, dim).iter().map(|u| radius * u));
        for d in 0..dim {
            let base = if d == 0 { c } else { 0.0 };
            v.push(base + 0.05 * c * rng.gen_range(-1.0..1.0));
        }
    }
    ParticleState::new(dim, x, v)
}

/// Uniform positions in a planar annulus with counter-clockwise tangential
/// velocities at cruise speed, 20% jitter.
pub fn mill_initial(
    count: usize,
    r_in: f64,
    r_out: f64,
    motion: &MotionParams,
    seed: u64,
) -> Result<ParticleState> {
    if !(r_out > r_in && r_in >= 0.0) {
        return Err(Error::InvalidParams(format!("bad annulus ({r_in}, {r_out})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = motion.cruise_speed();
    let mut x = Vec::with_capacity(2 * count);
    let mut v = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let r = rng.gen_range(r_in * r_in..r_out * r_out).sqrt();
        let th = rng.gen_range(0.0..2.0 * PI);
        let (s, co) = th.sin_cos();
        x.extend([r * co, r * s]);
        v.extend([
            c * (-s + 0.2 * rng.gen_range(-1.0..1.0)),
            c * (co + 0.2 * rng.gen_range(-1.0..1.0)),
        ]);
    }
    ParticleState::new(2, x, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    CenterOfMass,
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDensity {
    pub dim: usize,
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
    pub frame: Frame,
}

impl EmpiricalDensity {
    /// Histogram mass, `sum rho_i omega_n rbar_i^{n-1} dr`.
    pub fn mass(&self) -> f64 {
        let om = omega(self.dim);
        self.centers
            .iter()
            .zip(&self.density)
            .zip(self.edges.windows(2))
            .map(|((c, d), e)| d * om * c.powi(self.dim as i32 - 1) * (e[1] - e[0]))
            .sum()
    }

    /// Bin-wise mean of several histograms on the same bins; the result
    /// covers the longest of them.
    pub fn average(list: &[EmpiricalDensity]) -> Result<EmpiricalDensity> {
        let longest = list
            .iter()
            .max_by_key(|d| d.centers.len())
            .ok_or_else(|| Error::InvalidParams("no histograms to average".into()))?;
        let mut out = longest.clone();
        out.density.iter_mut().for_each(|v| *v = 0.0);
        for d in list {
            for (o, v) in out.density.iter_mut().zip(&d.density) {
                *o += v;
            }
        }
        let n = list.len() as f64;
        out.density.iter_mut().for_each(|v| *v /= n);
        Ok(out)
    }
}

/// Radial histogram `count_i / (N omega_n rbar_i^{n-1} dr)`.
pub fn empirical_density(state: &ParticleState, dr_bin: f64, frame: Frame) -> Result<EmpiricalDensity> {
    if state.is_empty() {
        return Err(Error::InvalidParams("empty particle state".into()));
    }
    if !(dr_bin > 0.0) {
        return Err(Error::InvalidParams(format!("bin width must be positive, got {dr_bin}")));
    }
    let center = match frame {
        Frame::CenterOfMass => state.center_of_mass(),
        Frame::Origin => vec![0.0; state.dim],
    };
    let radii: Vec<f64> = (0..state.len())
        .map(|i| {
            state
                .pos(i)
                .iter()
                .zip(&center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let bins = ((r_max / dr_bin).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; bins];
    for r in &radii {
        counts[((r / dr_bin) as usize).min(bins - 1)] += 1;
    }
    let n = state.len() as f64;
    let om = omega(state.dim);
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * dr_bin).collect();
    let centers: Vec<f64> = (0..bins).map(|i| (i as f64 + 0.5) * dr_bin).collect();
    let density = counts
        .iter()
        .zip(&centers)
        .map(|(&c, rb)| c as f64 / (n * om * rb.powi(state.dim as i32 - 1) * dr_bin))
        .collect();
    Ok(EmpiricalDensity {
        dim: state.dim,
        edges,
        centers,
        density,
        frame,
    })
}

/// `(polarization, normalized angular momentum)`, both in `[0, 1]`.
/// Particles with zero speed (or at the center) are skipped.
pub fn order_parameters(state: &ParticleState) -> (f64, f64) {
    let dim = state.dim;
    let com = state.center_of_mass();
    let mut pol = vec![0.0; dim];
    let mut ang = [0.0; 3];
    let n = state.len() as f64;
    for i in 0..state.len() {
        let v = state.vel(i);
        let s = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if s == 0.0 {
            continue;
        }
        let vh: Vec<f64> = v.iter().map(|c| c / s).collect();
        for (p, c) in pol.iter_mut().zip(&vh) {
            *p += c;
        }
        let rel: Vec<f64> = state.pos(i).iter().zip(&com).map(|(a, b)| a - b).collect();
        let rn = rel.iter().map(|c| c * c).sum::<f64>().sqrt();
        if rn == 0.0 {
            continue;
        }
        let rh: Vec<f64> = rel.iter().map(|c| c / rn).collect();
        if dim == 2 {
            ang[2] += rh[0] * vh[1] - rh[1] * vh[0];
        } else {
            ang[0] += rh[1] * vh[2] - rh[2] * vh[1];
            ang[1] += rh[2] * vh[0] - rh[0] * vh[2];
            ang[2] += rh[0] * vh[1] - rh[1] * vh[0];
        }
    }
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    (norm(&pol) / n, norm(&ang) / n)
}

/// Shell-volume weighted relative L1 distance between a histogram and a
/// continuum profile sampled at the bin centers.
pub fn relative_l1(emp: &EmpiricalDensity, continuum: &SteadyState) -> f64 {
    let om = omega(emp.dim);
    let mut diff = 0.0;
    let mut norm = 0.0;
    for ((c, d), e) in emp.centers.iter().zip(&emp.density).zip(emp.edges.windows(2)) {
        let w = om * c.powi(emp.dim as i32 - 1) * (e[1] - e[0]);
        let rho = continuum.density_at(*c);
        diff += (d - rho).abs() * w;
        norm += rho.abs() * w;
    }
    // bins past the histogram range contribute the continuum mass they miss
    let last = emp.edges.last().copied().unwrap_or(0.0);
    if last < continuum.support.1 {
        let steps = 200;
        let h = (continuum.support.1 - last) / steps as f64;
        for i in 0..steps {
            let r = last + (i as f64 + 0.5) * h;
            let m = continuum.density_at(r).abs() * om * r.powi(emp.dim as i32 - 1) * h;
            diff += m;
            norm += m;
        }
    }
    diff / norm
}
