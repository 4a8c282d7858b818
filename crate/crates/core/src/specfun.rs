//! Cylindrical Bessel functions of order zero (plus K1, K2) for real arguments.
//!
//! Evaluation strategy per kind:
//!
//! * `J0`, `Y0`: ascending series for `x < 20`, summed in double-double
//!   arithmetic so the alternating terms do not lose precision; Hankel
//!   asymptotic expansion for `x >= 20`.
//! * `I0`: ascending series for `x < 20`, asymptotic expansion beyond.
//! * `K0`, `K1`: ascending series for `x <= 2`, Steed's continued fraction on
//!   `(2, 25)`, asymptotic expansion for `x >= 25`.
//! * `K2`: forward recurrence `K2 = K0 + 2 K1 / x`.
//!
//! All routines target 1e-10 relative accuracy on `[1e-6, 100]`.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover between series and asymptotic forms for `J0`, `Y0` and `I0`.
const OSC_CROSSOVER: f64 = 20.0;
/// Upper end of the series region for `K0`, `K1`.
const K_SERIES_MAX: f64 = 2.0;
/// Start of the asymptotic region for `K0`, `K1`.
const K_ASYMPTOTIC_MIN: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BesselKind {
    J0,
    Y0,
    I0,
    K0,
    K1,
    K2,
}

impl BesselKind {
    pub const ALL: [BesselKind; 6] = [
        BesselKind::J0,
        BesselKind::Y0,
        BesselKind::I0,
        BesselKind::K0,
        BesselKind::K1,
        BesselKind::K2,
    ];

    /// Kinds singular at the origin.
    pub fn is_singular_at_zero(self) -> bool {
        matches!(
            self,
            BesselKind::Y0 | BesselKind::K0 | BesselKind::K1 | BesselKind::K2
        )
    }
}

/// Checked evaluation of the Bessel function of the given kind at `x`.
pub fn bessel(kind: BesselKind, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain(format!("{kind:?} at NaN")));
    }
    if kind.is_singular_at_zero() {
        if x <= 0.0 {
            return Err(Error::Domain(format!("{kind:?} requires x > 0, got {x}")));
        }
    } else if x < 0.0 {
        return Err(Error::Domain(format!("{kind:?} requires x >= 0, got {x}")));
    }
    let v = match kind {
        BesselKind::J0 => j0(x),
        BesselKind::Y0 => y0(x),
        BesselKind::I0 => i0(x),
        BesselKind::K0 => k0(x),
        BesselKind::K1 => k1(x),
        BesselKind::K2 => k2(x),
    };
    if v.is_infinite() {
        return Err(Error::Overflow(format!("{kind:?}({x})")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// double-double helpers

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn of(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn pair((hi, lo): (f64, f64)) -> Dd {
        Dd { hi, lo }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        Dd::pair(quick_two_sum(s, e))
    }

    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        Dd::pair(quick_two_sum(p, e))
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = ((self.hi - p) - e + self.lo) / d;
        Dd::pair(quick_two_sum(q1, r))
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `x^2 / 4` exactly as a double-double.
fn quarter_square(x: f64) -> Dd {
    Dd::pair(two_prod(x, x)).div_f64(4.0)
}

// ---------------------------------------------------------------------------
// J0, Y0

/// Returns (sum_m (-z)^m/(m!)^2, sum_{m>=1} (-1)^{m+1} H_m z^m/(m!)^2) for z = x^2/4.
fn j0_y0_series(x: f64) -> (f64, f64) {
    let z = quarter_square(x);
    let mut term = Dd::of(1.0);
    let mut j_sum = Dd::of(1.0);
    let mut y_sum = Dd::ZERO;
    let mut harmonic = Dd::ZERO;
    let mut m = 1u32;
    loop {
        let mf = f64::from(m);
        term = term.mul(z).div_f64(mf * mf).neg();
        harmonic = harmonic.add(Dd::of(1.0).div_f64(mf));
        j_sum = j_sum.add(term);
        y_sum = y_sum.add(term.mul(harmonic).neg());
        if mf > z.hi && term.hi.abs() < 1e-34 * (1.0 + j_sum.hi.abs()) {
            break;
        }
        m += 1;
        if m > 500 {
            break;
        }
    }
    (j_sum.to_f64(), y_sum.to_f64())
}

/// Hankel asymptotic factors (P0, Q0).
fn hankel_pq(x: f64) -> (f64, f64) {
    // a_k(0) = (-1)^k prod_{j=1..k} (2j-1)^2 / (k! 8^k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0; // a_k / x^k including sign
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = f64::from(k);
        let odd = 2.0 * kf - 1.0;
        a *= -(odd * odd) / (kf * 8.0 * x);
        if a.abs() > prev {
            break;
        }
        prev = a.abs();
        // P uses even k with sign (-1)^(k/2), Q uses odd k with sign (-1)^((k-1)/2)
        let contrib = if k % 2 == 0 {
            if (k / 2) % 2 == 0 {
                a
            } else {
                -a
            }
        } else if ((k - 1) / 2) % 2 == 0 {
            a
        } else {
            -a
        };
        if k % 2 == 0 {
            p += contrib;
        } else {
            q += contrib;
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

/// Bessel function of the first kind, order zero.
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x < OSC_CROSSOVER {
        j0_y0_series(x).0
    } else {
        let (p, q) = hankel_pq(x);
        let (s, c) = x.sin_cos();
        let cos_chi = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
        let sin_chi = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
        (FRAC_2_PI / x).sqrt() * (p * cos_chi - q * sin_chi)
    }
}

/// Bessel function of the second kind, order zero. Requires `x > 0`.
pub fn y0(x: f64) -> f64 {
    if x < OSC_CROSSOVER {
        let (js, ys) = j0_y0_series(x);
        FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * js + ys)
    } else {
        let (p, q) = hankel_pq(x);
        let (s, c) = x.sin_cos();
        let cos_chi = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
        let sin_chi = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
        (FRAC_2_PI / x).sqrt() * (p * sin_chi + q * cos_chi)
    }
}

// ---------------------------------------------------------------------------
// I0

fn i0_series(x: f64) -> f64 {
    let z = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 1.0;
    loop {
        term *= z / (m * m);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        m += 1.0;
    }
    sum
}

/// Asymptotic series for e^{-x} sqrt(2 pi x) I0(x) (sign = -1) or
/// e^{x} sqrt(2x/pi) K_nu(x) (sign = +1, nu^2 given).
fn modified_asymptotic(x: f64, four_nu_sq: f64, alternate: bool) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = f64::from(k);
        let odd = 2.0 * kf - 1.0;
        term *= (four_nu_sq - odd * odd) / (kf * 8.0 * x);
        let t = if alternate && k % 2 == 1 { -term } else { term };
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        sum += t;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind, order zero.
pub fn i0(x: f64) -> f64 {
    let x = x.abs();
    if x < OSC_CROSSOVER {
        i0_series(x)
    } else {
        i0e(x) * x.exp()
    }
}

/// Exponentially scaled `e^{-x} I0(x)`.
pub fn i0e(x: f64) -> f64 {
    let x = x.abs();
    if x < OSC_CROSSOVER {
        i0_series(x) * (-x).exp()
    } else {
        modified_asymptotic(x, 0.0, true) / (2.0 * PI * x).sqrt()
    }
}

// ---------------------------------------------------------------------------
// K0, K1, K2

/// Ascending series for (K0, K1) at small x.
fn k01_series(x: f64) -> (f64, f64) {
    let z = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    // I0, I1 and the harmonic sums
    let mut t0 = 1.0; // z^m / (m!)^2
    let mut t1 = 1.0; // z^m / (m! (m+1)!)
    let mut h_m = 0.0; // H_m
    let mut i0s = 1.0;
    let mut i1s = 1.0;
    let mut k0_tail = 0.0;
    let mut k1_tail = 1.0 - 2.0 * EULER_GAMMA; // (H_0 + H_1 - 2 gamma) at m = 0
    let mut m = 1.0;
    loop {
        t0 *= z / (m * m);
        t1 *= z / (m * (m + 1.0));
        h_m += 1.0 / m;
        let h_next = h_m + 1.0 / (m + 1.0);
        i0s += t0;
        i1s += t1;
        k0_tail += h_m * t0;
        k1_tail += (h_m + h_next - 2.0 * EULER_GAMMA) * t1;
        if t0 < 1e-18 * i0s && m > 2.0 {
            break;
        }
        m += 1.0;
    }
    let k0 = -(log_half + EULER_GAMMA) * i0s + k0_tail;
    let i1 = 0.5 * x * i1s;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_tail;
    (k0, k1)
}

/// Steed's continued fraction for exponentially scaled (K0, K1), x > ~1.
fn k01_scaled_cf(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = f64::from(i);
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0e = (PI / (2.0 * x)).sqrt() / s;
    let k1e = k0e * (x + 0.5 - h) / x;
    (k0e, k1e)
}

/// Exponentially scaled (e^x K0(x), e^x K1(x)) for x > 0.
pub fn k01e(x: f64) -> (f64, f64) {
    if x <= K_SERIES_MAX {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else if x < K_ASYMPTOTIC_MIN {
        k01_scaled_cf(x)
    } else {
        let pre = (PI / (2.0 * x)).sqrt();
        (
            pre * modified_asymptotic(x, 0.0, false),
            pre * modified_asymptotic(x, 4.0, false),
        )
    }
}

/// Exponentially scaled `e^x K0(x)`.
pub fn k0e(x: f64) -> f64 {
    k01e(x).0
}

/// Modified Bessel function of the second kind, order zero. Requires `x > 0`.
pub fn k0(x: f64) -> f64 {
    if x <= K_SERIES_MAX {
        k01_series(x).0
    } else {
        k0e(x) * (-x).exp()
    }
}

/// Modified Bessel function of the second kind, order one. Requires `x > 0`.
pub fn k1(x: f64) -> f64 {
    if x <= K_SERIES_MAX {
        k01_series(x).1
    } else {
        k01e(x).1 * (-x).exp()
    }
}

/// Modified Bessel function of the second kind, order two. Requires `x > 0`.
pub fn k2(x: f64) -> f64 {
    let (a, b) = if x <= K_SERIES_MAX {
        k01_series(x)
    } else {
        let (a, b) = k01e(x);
        let e = (-x).exp();
        (a * e, b * e)
    };
    a + 2.0 * b / x
}
