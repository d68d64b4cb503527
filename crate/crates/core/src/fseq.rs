//! Complex AGM with good sign choices, the F map and its homogenized limit.
//!
//! The F map acts on quadruples of squares,
//!
//! ```text
//! F(x, y, z, t) = ((sx sz + sy st) / 2, (sx st + sy sz) / 2, (z + t) / 2, sz st)
//! ```
//!
//! where `(sx, sy)` and `(sz, st)` are square roots with good sign choices.
//! Applied to `(theta00^2(z,tau), theta01^2(z,tau), theta00^2(0,tau),
//! theta01^2(0,tau))` it returns the same squares at `2 tau`. Iterating it
//! gives a sequence whose homogenized limit `F^inf` is the building block of
//! the Newton inversion in [`crate::fast`].

use rug::ops::NegAssign;
use rug::{Assign, Complex, Float};

use crate::error::{Result, ThetaError};
use crate::mpcx::{log2_abs, prec_of, sqrt_principal, with_prec};

/// Guard bits in the `F^inf` stopping threshold.
pub const DEFAULT_C1: u32 = 55;

/// Extra iterations allowed beyond `log2 P` before giving up.
pub const ITERATION_SLACK: u32 = 64;

pub(crate) fn floor_log2(p: u32) -> u32 {
    31 - p.max(1).leading_zeros()
}

pub(crate) fn iteration_cap(target_bits: u32) -> u32 {
    floor_log2(target_bits) + ITERATION_SLACK
}

/// Square roots `(su, sv)` of `(u, v)` with `su` principal and `sv` signed so
/// that `Re(sv / su) >= 0`, ties broken by `Im(sv / su) > 0`.
///
/// Equivalently `|su - sv| <= |su + sv|`.
pub fn good_sqrt_pair(u: &Complex, v: &Complex) -> Result<(Complex, Complex)> {
    if u.is_zero() {
        return Err(ThetaError::domain("good square root pair needs u != 0"));
    }
    let su = sqrt_principal(u);
    let mut sv = sqrt_principal(v);
    if align_sign(&su, &sv) {
        sv.neg_assign();
    }
    Ok((su, sv))
}

/// Whether `sv` must be negated so that `Re(sv / su) >= 0` (tie: `Im > 0`).
fn align_sign(su: &Complex, sv: &Complex) -> bool {
    // sign of sv * conj(su), computed exactly enough at doubled precision
    let p = 2 * prec_of(su).max(prec_of(sv)) + 2;
    let (a, b) = (su.real(), su.imag());
    let (c, d) = (sv.real(), sv.imag());
    let re = Float::with_val(p, c * a) + Float::with_val(p, d * b);
    let im = Float::with_val(p, d * a) - Float::with_val(p, c * b);
    if re.is_zero() {
        im.is_sign_negative() && !im.is_zero()
    } else {
        re.is_sign_negative()
    }
}

/// Result of [`agm_optimal_counted`].
#[derive(Debug, Clone)]
pub struct AgmResult {
    pub value: Complex,
    pub iterations: u32,
}

/// Limit of the optimal AGM sequence of `(a, b)` to absolute precision `P`.
pub fn agm_optimal(a: &Complex, b: &Complex, target_bits: u32) -> Result<Complex> {
    agm_optimal_counted(a, b, target_bits).map(|r| r.value)
}

/// [`agm_optimal`] also reporting the number of AGM steps taken.
pub fn agm_optimal_counted(a: &Complex, b: &Complex, target_bits: u32) -> Result<AgmResult> {
    if a.is_zero() || b.is_zero() {
        return Err(ThetaError::domain("AGM needs nonzero arguments"));
    }
    let work = prec_of(a)
        .max(prec_of(b))
        .max(target_bits + 2 * floor_log2(target_bits) + 16);
    let mut a = with_prec(a, work);
    let mut b = with_prec(b, work);
    {
        let r = Complex::with_val(work, &b / &a);
        if r.imag().is_zero() && r.real().is_sign_negative() {
            return Err(ThetaError::domain("AGM needs b/a not real negative"));
        }
    }
    let cap = iteration_cap(target_bits);
    let tol = -(target_bits as f64) - 2.0;
    let mut diff = Complex::new(work);
    let mut sum = Complex::new(work);
    for n in 0..=cap {
        diff.assign(&a - &b);
        let ld = log2_abs(&diff);
        if ld <= tol {
            return Ok(AgmResult {
                value: a,
                iterations: n,
            });
        }
        // at the resolution of the working precision nothing more can be gained
        if ld <= log2_abs(&a) - work as f64 + 4.0 {
            return Err(ThetaError::exhausted(format!(
                "AGM stalled at 2^{ld:.1} with {work} working bits"
            )));
        }
        sum.assign(&a + &b);
        debug_assert!(
            log2_abs(&diff) <= log2_abs(&sum) + 1e-9,
            "AGM sign choice is not good at step {n}"
        );
        let mut prod = Complex::with_val(work, &a * &b);
        sum >>= 1u32;
        prod = sqrt_principal(&prod);
        if align_sign(&sum, &prod) {
            prod.neg_assign();
        }
        a.assign(&sum);
        b = prod;
    }
    Err(ThetaError::NonConvergence {
        what: "optimal AGM".into(),
        iterations: cap,
    })
}

/// A point of an F sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FState {
    pub x: Complex,
    pub y: Complex,
    pub z: Complex,
    pub t: Complex,
    pub n: u32,
}

impl FState {
    pub fn new(x: Complex, y: Complex, z: Complex, t: Complex) -> Self {
        FState { x, y, z, t, n: 0 }
    }

    fn work(&self) -> u32 {
        prec_of(&self.x)
            .max(prec_of(&self.y))
            .max(prec_of(&self.z))
            .max(prec_of(&self.t))
    }
}

/// One application of F with good sign choices, in the products-of-sums form
/// (two full multiplications for the first two coordinates).
pub fn f_step(s: &FState) -> Result<FState> {
    let p = s.work();
    let (sx, sy) = good_sqrt_pair(&s.x, &s.y)?;
    let (sz, st) = good_sqrt_pair(&s.z, &s.t)?;
    let mut a = Complex::with_val(p, &sx + &sy);
    a *= Complex::with_val(p, &sz + &st);
    let mut b = Complex::with_val(p, &sx - &sy);
    b *= Complex::with_val(p, &sz - &st);
    let mut x = Complex::with_val(p, &a + &b);
    let mut y = Complex::with_val(p, &a - &b);
    x >>= 2u32;
    y >>= 2u32;
    let mut z = Complex::with_val(p, &s.z + &s.t);
    z >>= 1u32;
    let t = Complex::with_val(p, &sz * &st);
    Ok(FState {
        x,
        y,
        z,
        t,
        n: s.n + 1,
    })
}

/// Result of [`f_infinity`].
#[derive(Debug, Clone)]
pub struct FInfinity {
    pub lambda: Complex,
    pub mu: Complex,
    /// Number of F applications, including the final one after the loop.
    pub iterations: u32,
}

/// Working precision that lets [`f_infinity`] reach absolute precision `P`.
pub fn f_infinity_work_bits(target_bits: u32, c1: u32) -> u32 {
    target_bits + c1 + 4 * floor_log2(target_bits) + 32
}

/// `F^inf(x, y, z, t)` to absolute precision `P`, computed at the precision
/// of the inputs.
///
/// Iterates F until `|z_n - t_n| <= 2^(-P-n-c1)`, applies F once more and
/// returns `((x/z)^(2^(n+1)) z, z)`.
pub fn f_infinity(
    x: &Complex,
    y: &Complex,
    z: &Complex,
    t: &Complex,
    target_bits: u32,
    c1: u32,
) -> Result<FInfinity> {
    let work = prec_of(x).max(prec_of(y)).max(prec_of(z)).max(prec_of(t));
    if work < target_bits + c1 + 8 {
        return Err(ThetaError::exhausted(format!(
            "F^inf needs at least {} working bits for P = {target_bits}, c1 = {c1}; have {work}",
            target_bits + c1 + 8
        )));
    }
    let mut s = FState::new(
        with_prec(x, work),
        with_prec(y, work),
        with_prec(z, work),
        with_prec(t, work),
    );
    let cap = iteration_cap(target_bits);
    let floor = -(work as f64) / 4.0;
    let mut diff = Complex::new(work);
    loop {
        for v in [&s.x, &s.y, &s.z, &s.t] {
            if log2_abs(v) < floor {
                return Err(ThetaError::domain(format!(
                    "F sequence term fell below 2^{floor:.0} at step {}",
                    s.n
                )));
            }
        }
        diff.assign(&s.z - &s.t);
        let ld = log2_abs(&diff);
        let threshold = -(target_bits as f64) - s.n as f64 - c1 as f64;
        if ld <= threshold {
            break;
        }
        if ld <= log2_abs(&s.z) - work as f64 + 4.0 {
            return Err(ThetaError::exhausted(format!(
                "|z_n - t_n| stalled at 2^{ld:.1}, threshold 2^{threshold:.1}"
            )));
        }
        if s.n >= cap {
            return Err(ThetaError::NonConvergence {
                what: "F^inf".into(),
                iterations: s.n,
            });
        }
        s = f_step(&s)?;
    }
    let n = s.n;
    s = f_step(&s)?;
    let mut r = Complex::with_val(work, &s.x / &s.z);
    for _ in 0..=n {
        r.square_mut();
    }
    r *= &s.z;
    Ok(FInfinity {
        lambda: r,
        mu: s.z,
        iterations: s.n,
    })
}
