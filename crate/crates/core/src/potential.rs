//! Morse and Quasi-Morse potentials, regime classification and k-rescaling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun;
use crate::steadystate::{Pattern, SteadyState};

/// Tolerance under which `C l^n` is treated as exactly 1.
pub const SEPARATRIX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub l: f64,
    pub k: f64,
    pub lambda: f64,
}

impl PotentialParams {
    pub fn new(n: usize, c: f64, l: f64, k: f64, lambda: f64) -> Result<Self> {
        let p = PotentialParams { n, c, l, k, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(Error::InvalidParams(format!("n must be 1, 2 or 3, got {}", self.n)));
        }
        for (name, v) in [("C", self.c), ("l", self.l), ("k", self.k), ("lambda", self.lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `C l^n`, the quantity whose distance from 1 decides the regime.
    pub fn c_ln(&self) -> f64 {
        self.c * self.l.powi(self.n as i32)
    }

    pub fn with_k(&self, k: f64) -> Self {
        PotentialParams { k, ..*self }
    }
}

/// Surface area of the unit sphere in R^n (the 1D value counts both sides).
pub fn omega(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be positive, got {r}")))
    }
}

/// Radial fundamental solution of `(Delta - k^2) V = delta_0` decaying at infinity.
pub fn fundamental_v(n: usize, k: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(match n {
        1 => -(-k * r).exp() / (2.0 * k),
        2 => -specfun::k0(k * r) / (2.0 * PI),
        3 => -(-k * r).exp() / (4.0 * PI * r),
        _ => return Err(Error::InvalidParams(format!("unsupported dimension {n}"))),
    })
}

/// dV/dr. Positive for every dimension since V increases towards zero.
pub fn fundamental_dv(n: usize, k: f64, r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(match n {
        1 => 0.5 * (-k * r).exp(),
        2 => k * specfun::k1(k * r) / (2.0 * PI),
        3 => (-k * r).exp() * (1.0 + k * r) / (4.0 * PI * r * r),
        _ => return Err(Error::InvalidParams(format!("unsupported dimension {n}"))),
    })
}

/// d²V/dr² from the radial equation `V'' = k^2 V - (n-1) V'/r`.
pub fn fundamental_d2v(n: usize, k: f64, r: f64) -> Result<f64> {
    let v = fundamental_v(n, k, r)?;
    let dv = fundamental_dv(n, k, r)?;
    Ok(k * k * v - (n as f64 - 1.0) * dv / r)
}

/// `U(r) = lambda (V(r) - C V(r/l))`.
pub fn quasi_morse_u(p: &PotentialParams, r: f64) -> Result<f64> {
    let v1 = fundamental_v(p.n, p.k, r)?;
    let v2 = fundamental_v(p.n, p.k, r / p.l)?;
    Ok(p.lambda * (v1 - p.c * v2))
}

pub fn quasi_morse_du(p: &PotentialParams, r: f64) -> Result<f64> {
    let d1 = fundamental_dv(p.n, p.k, r)?;
    let d2 = fundamental_dv(p.n, p.k, r / p.l)?;
    Ok(p.lambda * (d1 - p.c / p.l * d2))
}

pub fn quasi_morse_d2u(p: &PotentialParams, r: f64) -> Result<f64> {
    let d1 = fundamental_d2v(p.n, p.k, r)?;
    let d2 = fundamental_d2v(p.n, p.k, r / p.l)?;
    Ok(p.lambda * (d1 - p.c / (p.l * p.l) * d2))
}

/// Reduced Morse potential `strength (-e^{-r} + C e^{-r/l})`.
pub fn morse_u(c: f64, l: f64, strength: f64, r: f64) -> f64 {
    strength * (-(-r).exp() + c * (-r / l).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
    #[serde(rename = "separatrix")]
    Separatrix,
    #[serde(rename = "not_biological")]
    NotBiological,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::I => "I",
            Region::II => "II",
            Region::Separatrix => "separatrix",
            Region::NotBiological => "not_biological",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    #[serde(rename = "A")]
    pub a_const: f64,
    pub a: f64,
    pub unique_min: bool,
    pub catastrophic: bool,
    pub region: Region,
    pub u_integral: f64,
}

/// Classifies the potential and returns the steady-state constant A.
pub fn regime(p: &PotentialParams) -> Result<Regime> {
    p.validate()?;
    let cln = p.c_ln();
    let l2 = p.l * p.l;
    let den = l2 - cln;
    if den.abs() <= 1e-14 * l2.max(cln) {
        return Err(Error::Singular(format!(
            "l^2 = C l^n (l = {}, C = {}): A undefined",
            p.l, p.c
        )));
    }
    let on_separatrix = (cln - 1.0).abs() <= SEPARATRIX_TOL;
    let a_const = if on_separatrix {
        0.0
    } else {
        p.k * p.k * (cln - 1.0) / den
    };
    let unique_min = p.l < 1.0 && p.c * p.l.powi(p.n as i32 - 2) > 1.0;
    let region = if !unique_min {
        Region::NotBiological
    } else if on_separatrix {
        Region::Separatrix
    } else if cln < 1.0 {
        Region::I
    } else {
        Region::II
    };
    let u_integral = if on_separatrix {
        0.0
    } else {
        p.lambda * (cln - 1.0) / (p.k * p.k)
    };
    Ok(Regime {
        a_const,
        a: a_const.abs().sqrt(),
        unique_min,
        catastrophic: cln < 1.0 && !on_separatrix,
        region,
        u_integral,
    })
}

/// `h(r) = (C/l) V'(r/l) / V'(r)`; U'(r) = 0 exactly where h(r) = 1.
pub fn ratio_h(p: &PotentialParams, r: f64) -> Result<f64> {
    let d1 = fundamental_dv(p.n, p.k, r)?;
    let d2 = fundamental_dv(p.n, p.k, r / p.l)?;
    Ok(p.c / p.l * d2 / d1)
}

/// Fourier transform of U with the convention `V^(xi) = -1/(|xi|^2 + k^2)`.
pub fn fourier_symbol(p: &PotentialParams, xi: f64) -> f64 {
    let x2 = xi * xi;
    let k2 = p.k * p.k;
    p.lambda * (-1.0 / (x2 + k2) + p.c_ln() / (p.l * p.l * x2 + k2))
}

/// Location of the minimum of U via golden-section search on `[1e-6, 50/k]`,
/// polished by bisection on U'.
pub fn potential_minimum(p: &PotentialParams) -> Result<f64> {
    let f = |r: f64| quasi_morse_u(p, r).unwrap_or(f64::INFINITY);
    let (mut a, mut b) = (1e-6, 50.0 / p.k);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
        if b - a < 1e-7 * (1.0 + a) {
            break;
        }
    }
    let r0 = 0.5 * (a + b);
    if r0 < 1e-5 || r0 > 49.0 / p.k {
        return Err(Error::Domain(format!(
            "no interior minimum of U on [1e-6, 50/k] (search ended at {r0})"
        )));
    }
    // the bracket [a, b] straddles the sign change of U'
    let du = |r: f64| quasi_morse_du(p, r).unwrap_or(f64::NAN);
    let (mut lo, mut hi) = (0.5 * r0, 1.5 * r0);
    if du(lo) >= 0.0 || du(hi) <= 0.0 {
        return Ok(r0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if du(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Transforms a solution computed at wavenumber `k` to the potential with
/// wavenumber `k_new`, all other parameters unchanged.
///
/// With `f = k_new / k`, flocks map to `f^n rho(f x)` and mills to
/// `f^2 rho(f x)`; supports shrink by `f`.
pub fn rescale_solution(sol: &SteadyState, pattern: Pattern, k_new: f64) -> Result<SteadyState> {
    if sol.pattern != pattern {
        return Err(Error::InvalidParams(format!(
            "solution is a {}, not a {pattern}",
            sol.pattern
        )));
    }
    sol.rescaled(k_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base_2d() -> PotentialParams {
        PotentialParams::new(2, 10.0 / 9.0, 0.75, 0.5, 4.0).unwrap()
    }

    #[test]
    fn v_closed_forms() {
        let v = fundamental_v(3, 1.0, 1.0).unwrap();
        assert!((v + (-1f64).exp() / (4.0 * PI)).abs() < 1e-16);
        assert!(fundamental_v(2, 1.0, 50.0).unwrap().abs() < 1e-12);
        assert_eq!(
            fundamental_v(2, 2.0, 0.5).unwrap(),
            fundamental_v(2, 1.0, 1.0).unwrap()
        );
        assert!(fundamental_v(2, 1.0, 0.0).is_err());
        assert!(quasi_morse_u(&base_2d(), -1.0).is_err());
    }

    #[test]
    fn v_solves_screened_poisson_away_from_origin() {
        for n in 1..=3usize {
            for &r in &[0.3, 1.0, 4.0] {
                let k = 0.7;
                let h = 1e-4;
                let v = |x| fundamental_v(n, k, x).unwrap();
                let d2 = (v(r + h) - 2.0 * v(r) + v(r - h)) / (h * h);
                let d1 = (v(r + h) - v(r - h)) / (2.0 * h);
                let lap = d2 + (n as f64 - 1.0) / r * d1;
                assert!((lap - k * k * v(r)).abs() < 1e-5 * v(r).abs(), "n={n} r={r}");
                assert!((d1 - fundamental_dv(n, k, r).unwrap()).abs() < 1e-6 * d1.abs());
                assert!((d2 - fundamental_d2v(n, k, r).unwrap()).abs() < 1e-5 * d2.abs());
            }
        }
    }

    #[test]
    fn trivial_cancellations() {
        let p = PotentialParams { c: 1.0, l: 1.0, ..base_2d() };
        assert_eq!(quasi_morse_u(&p, 0.7).unwrap(), 0.0);
        let p0 = PotentialParams { c: 0.0, ..base_2d() };
        let v = fundamental_v(2, 0.5, 0.7).unwrap();
        assert_eq!(quasi_morse_u(&p0, 0.7).unwrap(), 4.0 * v);
        assert_eq!(morse_u(1.0, 1.0, 3.0, 0.4), 0.0);
        assert!((morse_u(10.0 / 9.0, 0.75, 2.0, 0.0) - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn regime_constants() {
        let r = regime(&base_2d()).unwrap();
        assert!((r.a_const - 1.5).abs() < 1e-12);
        assert_eq!(r.region, Region::I);
        assert!(r.catastrophic && r.unique_min);
        let p3 = PotentialParams::new(3, 1.255, 0.8, 0.2, 1.0).unwrap();
        assert!((regime(&p3).unwrap().a_const - 5.585).abs() < 1e-12);
        let sep = PotentialParams::new(2, 1.0 / 0.5625, 0.75, 1.0, 1.0).unwrap();
        let rs = regime(&sep).unwrap();
        assert_eq!(rs.a_const, 0.0);
        assert_eq!(rs.region, Region::Separatrix);
        assert_eq!(rs.u_integral, 0.0);
        let ii = PotentialParams::new(2, 2.0, 0.9, 1.0, 1.0).unwrap();
        assert_eq!(regime(&ii).unwrap().region, Region::II);
        assert!(regime(&ii).unwrap().a_const < 0.0);
        // l^2 = C l^n with n = 3 means C l = 1
        let sing = PotentialParams::new(3, 2.0, 0.5, 1.0, 1.0).unwrap();
        assert!(matches!(regime(&sing), Err(Error::Singular(_))));
    }

    #[test]
    fn minimum_of_reference_potential() {
        let p = base_2d();
        let rmin = potential_minimum(&p).unwrap();
        assert!(quasi_morse_du(&p, rmin).unwrap().abs() < 1e-8);
        let h = 1e-5;
        let fd = (quasi_morse_u(&p, rmin + h).unwrap() - quasi_morse_u(&p, rmin - h).unwrap())
            / (2.0 * h);
        assert!(fd.abs() < 1e-8);
        assert!(quasi_morse_u(&p, 1e-8).unwrap() > 0.0);
        // strictly decreasing before, increasing after
        for i in 1..100 {
            let r = rmin * i as f64 / 100.0;
            assert!(quasi_morse_du(&p, r).unwrap() < 0.0);
            assert!(quasi_morse_du(&p, rmin + 0.2 * i as f64).unwrap() > 0.0);
        }
        assert!(potential_minimum(&PotentialParams { c: 0.5, ..p }).is_err());
    }

    #[test]
    fn morse_reference_has_unique_minimum() {
        let f = |r: f64| -(-r).exp() + 10.0 / 9.0 / 0.75 * (-r / 0.75).exp();
        let mut sign_changes = 0;
        let mut prev = f(0.0);
        for i in 1..4000 {
            let d = f(i as f64 * 0.005);
            if (d > 0.0) != (prev > 0.0) {
                sign_changes += 1;
            }
            prev = d;
        }
        // -dU/dr of the Morse form, one sign change means one minimum
        assert_eq!(sign_changes, 1);
    }

    #[test]
    fn u_integral_matches_quadrature() {
        for p in [
            base_2d(),
            PotentialParams::new(3, 1.255, 0.8, 0.2, 1.0).unwrap(),
            PotentialParams::new(1, 1.5, 0.6, 1.3, 2.0).unwrap(),
        ] {
            let n = p.n;
            let q = crate::quad::integrate_to_inf(
                |r| {
                    if r <= 0.0 {
                        0.0
                    } else {
                        omega(n) * r.powi(n as i32 - 1) * quasi_morse_u(&p, r).unwrap()
                    }
                },
                0.0,
                1e-13,
                1e-11,
                2000,
            );
            let want = regime(&p).unwrap().u_integral;
            assert!(((q.value - want) / want).abs() < 1e-6, "n={n}: {} vs {want}", q.value);
        }
    }

    #[test]
    fn log_convexity_of_minus_v() {
        for n in 1..=3usize {
            let h = 0.01;
            let g = |r: f64| (-fundamental_v(n, 1.0, r).unwrap()).ln();
            let mut r = 0.02;
            while r < 20.0 {
                assert!(g(r + h) - 2.0 * g(r) + g(r - h) >= -1e-8, "n={n} r={r}");
                r += h;
            }
        }
    }

    proptest! {
        #[test]
        fn ratio_h_monotone(n in 2usize..=3, l in 0.2f64..0.9, extra in 1.01f64..3.0, k in 0.2f64..2.0) {
            // C l^{n-2} > 1 by construction
            let c = extra / l.powi(n as i32 - 2);
            let p = PotentialParams::new(n, c, l, k, 1.0).unwrap();
            let mut prev = f64::INFINITY;
            for i in 1..400 {
                let r = 1e-3 * 1.025f64.powi(i) / k;
                let h = ratio_h(&p, r).unwrap();
                prop_assert!(h < prev);
                prev = h;
            }
            let h0 = ratio_h(&p, 1e-7 / k).unwrap();
            prop_assert!((h0 - c * l.powi(n as i32 - 2)).abs() < 1e-2 * h0);
            prop_assert!(ratio_h(&p, 30.0 / (k * (1.0 / l - 1.0))).unwrap() < 1e-6);
        }

        #[test]
        fn fourier_positive_in_region_ii(n in 2usize..=3, l in 0.2f64..0.95, extra in 1.01f64..3.0, xi in 0.0f64..100.0) {
            let c = extra / l.powi(n as i32);
            let p = PotentialParams::new(n, c, l, 1.0, 1.0).unwrap();
            prop_assert!(fourier_symbol(&p, xi) > 0.0);
        }

        #[test]
        fn scaling_identity(n in 1usize..=3, k in 0.1f64..5.0, r in 0.01f64..10.0) {
            let lhs = fundamental_v(n, k, r).unwrap();
            let rhs = k.powi(n as i32 - 2) * fundamental_v(n, 1.0, k * r).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
        }

        #[test]
        fn u_integral_sign(n in 1usize..=3, c in 0.1f64..5.0, l in 0.1f64..2.0) {
            let p = PotentialParams::new(n, c, l, 1.0, 1.0).unwrap();
            if let Ok(r) = regime(&p) {
                prop_assert_eq!(r.u_integral > 0.0, p.c_ln() > 1.0 + SEPARATRIX_TOL);
                prop_assert!((r.a * r.a - r.a_const.abs()).abs() <= 1e-12 * (1.0 + r.a_const.abs()));
            }
        }
    }
}
