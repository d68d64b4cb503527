//! Residuals of classical theta identities, used as consistency checks.
//!
//! Every function returns log2 of an absolute residual (`-inf` when exact).
//! Products are formed at the precision of the inputs plus a few bits so that
//! the residual reflects the inputs, not the check.

use rug::Complex;

use crate::bundle::{ThetaBundle, ThetaIndex};
use crate::error::Result;
use crate::mpcx::{exp_c, i_pi_times, log2_abs, log2_dist, prec_of};
use crate::naive::theta_direct;

fn work(b: &ThetaBundle) -> u32 {
    b.six().iter().map(|v| prec_of(v)).max().unwrap_or(64) + 16
}

fn pow(v: &Complex, k: u32, p: u32) -> Complex {
    let sq = Complex::with_val(p, v.square_ref());
    match k {
        2 => sq,
        4 => Complex::with_val(p, sq.square_ref()),
        _ => unreachable!("only squares and fourth powers are used"),
    }
}

/// `theta00(0)^4 - theta01(0)^4 - theta10(0)^4`.
pub fn jacobi_residual(b: &ThetaBundle) -> f64 {
    let p = work(b);
    let mut r = pow(&b.th00_0, 4, p);
    r -= pow(&b.th01_0, 4, p);
    r -= pow(&b.th10_0, 4, p);
    log2_abs(&r)
}

/// `theta00^2(z) theta00^2(0) - theta01^2(z) theta01^2(0) - theta10^2(z) theta10^2(0)`.
pub fn variety_residual(b: &ThetaBundle) -> f64 {
    let p = work(b);
    let term = |x: &Complex, y: &Complex| Complex::with_val(p, pow(x, 2, p) * pow(y, 2, p));
    let mut r = term(&b.th00_z, &b.th00_0);
    r -= term(&b.th01_z, &b.th01_0);
    r -= term(&b.th10_z, &b.th10_0);
    log2_abs(&r)
}

/// Quasi-periodicity `theta_i(z + tau) = s_i exp(-i pi tau - 2 i pi z) theta_i(z)`
/// with `s_01 = -1`, checked against an independent term-by-term summation
/// at `z + tau`. The exponential is moved to the summation side so the
/// residual is on the scale of `theta(z)`. Maximum over 00, 01, 10.
pub fn quasi_periodicity_residual(
    b: &ThetaBundle,
    z: &Complex,
    tau: &Complex,
    bits: u32,
) -> Result<f64> {
    let p = work(b).max(bits + 32);
    let shifted = Complex::with_val(p, z + tau);
    // exp(i pi tau + 2 i pi z)
    let mut x = Complex::with_val(p, z * 2u32);
    x += tau;
    let factor = exp_c(&i_pi_times(&x));
    let gain = -log2_abs(&factor);
    let mut worst = f64::NEG_INFINITY;
    for i in ThetaIndex::EVEN {
        let v = b.at_z(i).expect("even values are present");
        let mag = log2_abs(v) + gain;
        let rel = bits + 24 + mag.max(0.0).ceil() as u32;
        let d = theta_direct(i, &shifted, tau, rel, Some(mag))?;
        let mut lhs = Complex::with_val(p, &d * &factor);
        if i == ThetaIndex::T01 {
            lhs = -lhs;
        }
        worst = worst.max(log2_dist(&lhs, v));
    }
    Ok(worst)
}

/// z-duplication: values at `2u` from values at `u`,
///
/// ```text
/// theta00(2u) theta00(0)^3 = theta01(u)^4 + theta10(u)^4
/// theta01(2u) theta01(0)^3 = theta00(u)^4 - theta10(u)^4
/// theta10(2u) theta10(0)^3 = theta00(u)^4 - theta01(u)^4
/// ```
///
/// `at_2u` and `at_u` must share `tau`. Maximum over the three lines.
pub fn z_duplication_residual(at_2u: &ThetaBundle, at_u: &ThetaBundle) -> f64 {
    let p = work(at_2u).max(work(at_u));
    let f = |v: &Complex| pow(v, 4, p);
    let (f00, f01, f10) = (f(&at_u.th00_z), f(&at_u.th01_z), f(&at_u.th10_z));
    let cube = |c: &Complex| Complex::with_val(p, pow(c, 2, p) * c);
    let line = |lhs: &Complex, c: &Complex, a: &Complex, b: &Complex, plus: bool| {
        let mut r = Complex::with_val(p, lhs * cube(c));
        if plus {
            r -= a;
            r -= b;
        } else {
            r -= a;
            r += b;
        }
        log2_abs(&r)
    };
    let r0 = line(&at_2u.th00_z, &at_2u.th00_0, &f01, &f10, true);
    let r1 = line(&at_2u.th01_z, &at_2u.th01_0, &f00, &f10, false);
    let r2 = line(&at_2u.th10_z, &at_2u.th10_0, &f00, &f01, false);
    r0.max(r1).max(r2)
}

/// `theta11^2(z) theta00^2(0) - (theta01^2(z) theta10^2(0) - theta10^2(z) theta01^2(0))`;
/// `None` when the bundle has no theta11.
pub fn theta11_residual(b: &ThetaBundle) -> Option<f64> {
    let t11 = b.th11_z.as_ref()?;
    let p = work(b);
    let sq = |v: &Complex| pow(v, 2, p);
    let mut r = Complex::with_val(p, sq(t11) * sq(&b.th00_0));
    r -= Complex::with_val(p, sq(&b.th01_z) * sq(&b.th10_0));
    r += Complex::with_val(p, sq(&b.th10_z) * sq(&b.th01_0));
    Some(log2_abs(&r))
}

/// All bundle-only residuals at once: Jacobi, variety and (when present) theta11.
pub fn bundle_residual(b: &ThetaBundle) -> f64 {
    let mut r = jacobi_residual(b).max(variety_residual(b));
    if let Some(t) = theta11_residual(b) {
        r = r.max(t);
    }
    r
}
