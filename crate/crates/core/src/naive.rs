//! Partial summation of the theta series.
//!
//! `theta_naive` sums the series for theta00 and theta01 at z and at 0 in one
//! pass, generating the terms `v_n = q^(n^2) (w^(2n) + w^(-2n))` through the
//! three-term recurrence `v_(n+1) = q^(2n) v_1 v_n - q^(4n) v_(n-1)`. The
//! exponentials `w^(-2n)` are never formed on their own, so every stored
//! quantity stays bounded by a small constant and `P + 2` bits suffice for
//! absolute precision `P`.
//!
//! theta10 and theta11 get their own half-integer series with the same
//! recurrence shape; they are never recovered through the quartic relation.

use rug::{Assign, Complex};

use crate::bundle::{Method, ThetaBundle, ThetaIndex};
use crate::error::{Result, ThetaError};
use crate::mpcx::{exp_c, i_pi_times, with_prec};

/// Smallest Im(tau) accepted by the series bound.
pub const MIN_TAU_IM: f64 = 0.35;

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const PI: f64 = std::f64::consts::PI;

/// Requested precision, series bound and working precision of one summation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionPlan {
    pub target_bits: u32,
    pub bound: u32,
    pub work_bits: u32,
}

impl PrecisionPlan {
    /// Plan for theta00/theta01: `work = P + ceil(log2 B) + 7`.
    pub fn for_theta(target_bits: u32, tau: &Complex) -> Result<Self> {
        let bound = series_bound(target_bits, tau)?;
        Ok(PrecisionPlan {
            target_bits,
            bound,
            work_bits: target_bits + ceil_log2(bound) + 7,
        })
    }

    /// Plan for the half-integer series: one more term, `log2 B` more guard
    /// bits, and room for the integer part of `|theta10(z)|`, which can reach
    /// `exp(pi (Im z - Im tau / 4))`.
    pub fn for_half_series(target_bits: u32, z: &Complex, tau: &Complex) -> Result<Self> {
        let base = series_bound(target_bits, tau)?;
        let bound = base + 1;
        let tau_im = tau.imag().to_f64();
        let z_im = z.imag().to_f64().abs();
        let size = (PI * LOG2_E * (z_im - tau_im / 4.0)).max(0.0).ceil() as u32 + 1;
        Ok(PrecisionPlan {
            target_bits,
            bound,
            work_bits: target_bits + 2 * ceil_log2(bound) + 7 + size,
        })
    }
}

fn ceil_log2(b: u32) -> u32 {
    if b <= 1 {
        0
    } else {
        32 - (b - 1).leading_zeros()
    }
}

/// Number of terms `B = ceil(sqrt((P + 2) / (pi Im(tau) log2 e))) + 1`
/// guaranteeing `4 |q|^((B-1)^2) <= 2^-P`.
pub fn series_bound(target_bits: u32, tau: &Complex) -> Result<u32> {
    let im = tau.imag().to_f64();
    if !(im >= MIN_TAU_IM) {
        return Err(ThetaError::domain(format!(
            "series bound needs Im(tau) >= {MIN_TAU_IM}, got {im}"
        )));
    }
    let r = ((target_bits as f64 + 2.0) / (PI * im * LOG2_E)).sqrt();
    Ok(r.ceil() as u32 + 1)
}

fn check_domain(z: &Complex, tau: &Complex) -> Result<()> {
    let tau_im = tau.imag().to_f64();
    if !(tau_im >= MIN_TAU_IM) {
        return Err(ThetaError::domain(format!(
            "naive summation needs Im(tau) >= {MIN_TAU_IM}, got {tau_im}"
        )));
    }
    let z_im = z.imag().to_f64();
    if !z_im.is_finite() || z_im.abs() > tau_im / 2.0 * (1.0 + 1e-12) {
        return Err(ThetaError::domain(format!(
            "naive summation needs |Im z| <= Im(tau)/2, got Im z = {z_im}"
        )));
    }
    Ok(())
}

/// theta00 and theta01 at z and at 0, from one pass of the series.
#[derive(Debug, Clone)]
pub struct NaiveValues {
    pub th00_z: Complex,
    pub th01_z: Complex,
    pub th00_0: Complex,
    pub th01_0: Complex,
    pub plan: PrecisionPlan,
}

/// exp(i pi (a tau + b z)) at precision `p`, for small rational-free multipliers.
fn e_ipi(z: &Complex, tau: &Complex, a: f64, b: f64, p: u32) -> Complex {
    let mut arg = Complex::with_val(p, tau * a);
    if b != 0.0 {
        arg += Complex::with_val(p, z * b);
    }
    exp_c(&i_pi_times(&arg))
}

/// Absolute precision `P` evaluation of theta00(z), theta01(z), theta00(0),
/// theta01(0) for `Im(tau) >= 0.35` and `|Im z| <= Im(tau)/2`.
pub fn theta_naive(z: &Complex, tau: &Complex, target_bits: u32) -> Result<NaiveValues> {
    check_domain(z, tau)?;
    let plan = PrecisionPlan::for_theta(target_bits, tau)?;
    let (th00_z, th01_z, th00_0, th01_0) = sum_integer_series(z, tau, &plan);
    Ok(NaiveValues {
        th00_z,
        th01_z,
        th00_0,
        th01_0,
        plan,
    })
}

fn sum_integer_series(
    z: &Complex,
    tau: &Complex,
    plan: &PrecisionPlan,
) -> (Complex, Complex, Complex, Complex) {
    let p = plan.work_bits;
    let z = with_prec(z, p);
    let tau = with_prec(tau, p);

    let q = e_ipi(&z, &tau, 1.0, 0.0, p);
    // v1 = q (w^2 + w^-2) = e^(i pi (tau + 2z)) + e^(i pi (tau - 2z))
    let v1 = Complex::with_val(
        p,
        e_ipi(&z, &tau, 1.0, 2.0, p) + e_ipi(&z, &tau, 1.0, -2.0, p),
    );

    let one = Complex::with_val(p, 1);
    let (mut th0z, mut th1z, mut th00, mut th01) = (one.clone(), one.clone(), one.clone(), one);
    let mut q1 = q.clone();
    let mut q2 = q.clone();
    let mut v = v1.clone();
    let mut v_prev = Complex::with_val(p, 2);
    let mut q1sq = Complex::new(p);
    let mut tmp = Complex::new(p);

    for n in 1..=plan.bound {
        let odd = n % 2 == 1;
        th0z += &v;
        tmp.assign(&q2 << 1u32);
        th00 += &tmp;
        if odd {
            th1z -= &v;
            th01 -= &tmp;
        } else {
            th1z += &v;
            th01 += &tmp;
        }
        debug_check_partial(&[&th0z, &th1z, &th00, &th01]);
        debug_check_powers(&q, &q1, &q2, n);

        // q1 = q^n, q2 = q^(n^2), v = v_n, v_prev = v_(n-1)
        q1sq.assign(q1.square_ref());
        q2 *= &q1sq;
        q2 *= &q;
        tmp.assign(&q1sq * &v1);
        tmp *= &v;
        q1sq.square_mut();
        q1sq *= &v_prev;
        tmp -= &q1sq;
        std::mem::swap(&mut v_prev, &mut v);
        std::mem::swap(&mut v, &mut tmp);
        q1 *= &q;
    }
    (th0z, th1z, th00, th01)
}

#[cfg(debug_assertions)]
fn debug_check_partial(sums: &[&Complex]) {
    for s in sums {
        let m = crate::mpcx::abs_f64(s);
        debug_assert!(m <= 4.0 + 1e-9, "partial sum {m} exceeds 4");
    }
}

#[cfg(not(debug_assertions))]
fn debug_check_partial(_: &[&Complex]) {}

#[cfg(debug_assertions)]
fn debug_check_powers(q: &Complex, q1: &Complex, q2: &Complex, n: u32) {
    use rug::ops::Pow;
    // Low precision replay of the loop invariant q1 = q^n, q2 = q^(n^2).
    if n > 12 {
        return;
    }
    let lq = Complex::with_val(53, q);
    let e1 = Complex::with_val(53, lq.clone().pow(n));
    let e2 = Complex::with_val(53, lq.pow(n * n));
    for (got, want) in [(q1, e1), (q2, e2)] {
        let scale = crate::mpcx::abs_f64(&want);
        if scale < 1e-250 {
            continue;
        }
        let d = crate::mpcx::abs_f64(&Complex::with_val(53, got - &want));
        debug_assert!(d <= 1e-9 * scale, "power invariant broken at n = {n}");
    }
}

#[cfg(not(debug_assertions))]
fn debug_check_powers(_: &Complex, _: &Complex, _: &Complex, _: u32) {}

/// Sum of the half-integer series
/// `sum_(n>=0) q^((n+1/2)^2) (w^(2n+1) + s w^-(2n+1))` with `s = +1` (even)
/// or `s = -1` (odd, alternating in n). Returns the value at z and, for the
/// even series, the value at 0.
fn sum_half_series(
    z: &Complex,
    tau: &Complex,
    plan: &PrecisionPlan,
    odd: bool,
) -> (Complex, Complex) {
    let p = plan.work_bits;
    let z = with_prec(z, p);
    let tau = with_prec(tau, p);

    let q = e_ipi(&z, &tau, 1.0, 0.0, p);
    let q_quarter = e_ipi(&z, &tau, 0.25, 0.0, p);
    let v1 = Complex::with_val(
        p,
        e_ipi(&z, &tau, 1.0, 2.0, p) + e_ipi(&z, &tau, 1.0, -2.0, p),
    );
    let a = e_ipi(&z, &tau, 0.25, 1.0, p);
    let b = e_ipi(&z, &tau, 0.25, -1.0, p);

    // m_n = q^(1/4) q^(n^2+n) (w^(2n+1) +- w^-(2n+1)),
    // m_(n+1) = q^(2n+1) v1 m_n - q^(4n+2) m_(n-1).
    let mut m = if odd {
        Complex::with_val(p, &a - &b)
    } else {
        Complex::with_val(p, &a + &b)
    };
    let mut m_prev = if odd {
        Complex::with_val(p, -&m)
    } else {
        m.clone()
    };
    let q_sq = Complex::with_val(p, q.square_ref());
    let mut r = q.clone(); // q^(2n+1)
    let mut c = q_quarter.clone(); // q^(1/4) q^(n^2+n)
    let mut sum_z = Complex::new(p);
    let mut sum_0 = Complex::new(p);
    let mut tmp = Complex::new(p);
    let mut rsq = Complex::new(p);

    for n in 0..=plan.bound {
        if odd && n % 2 == 1 {
            sum_z -= &m;
        } else {
            sum_z += &m;
        }
        if !odd {
            sum_0 += &c;
        }
        c *= &r;
        c *= &q;
        tmp.assign(&r * &v1);
        tmp *= &m;
        rsq.assign(r.square_ref());
        rsq *= &m_prev;
        tmp -= &rsq;
        std::mem::swap(&mut m_prev, &mut m);
        std::mem::swap(&mut m, &mut tmp);
        r *= &q_sq;
    }
    if odd {
        sum_z.mul_i_mut(false);
    } else {
        sum_0 <<= 1u32;
    }
    (sum_z, sum_0)
}

/// theta10(z, tau) and theta10(0, tau) by direct summation.
pub fn theta10_naive(z: &Complex, tau: &Complex, target_bits: u32) -> Result<(Complex, Complex)> {
    check_domain(z, tau)?;
    let plan = PrecisionPlan::for_half_series(target_bits, z, tau)?;
    Ok(sum_half_series(z, tau, &plan, false))
}

/// theta11(z, tau) by direct summation of its odd series.
pub fn theta11_naive(z: &Complex, tau: &Complex, target_bits: u32) -> Result<Complex> {
    check_domain(z, tau)?;
    let plan = PrecisionPlan::for_half_series(target_bits, z, tau)?;
    Ok(sum_half_series(z, tau, &plan, true).0)
}

/// theta00, theta01, theta10 at z and 0 as a [`ThetaBundle`] certified to `P`
/// bits. theta11 is left out.
pub fn theta_bundle_naive(z: &Complex, tau: &Complex, target_bits: u32) -> Result<ThetaBundle> {
    let v = theta_naive(z, tau, target_bits)?;
    let plan = PrecisionPlan::for_half_series(target_bits, z, tau)?;
    let (th10_z, th10_0) = sum_half_series(z, tau, &plan, false);
    let work = v.plan.work_bits.max(plan.work_bits);
    Ok(ThetaBundle {
        th00_z: v.th00_z,
        th01_z: v.th01_z,
        th10_z,
        th11_z: None,
        th00_0: v.th00_0,
        th01_0: v.th01_0,
        th10_0,
        achieved_bits: target_bits,
        work_bits: work,
        guard_bits_used: work - target_bits,
        method: Method::Naive,
    })
}

/// theta_i(z, tau) by summing its series term by term with no domain
/// restriction beyond `Im(tau) > 0`, to about `rel_bits` relative bits.
///
/// Meant for low-precision probes. `mag_hint` is the expected log2 of the
/// result; when the largest term is much bigger (cancellation near a cusp)
/// the working precision is raised accordingly.
pub fn theta_direct(
    i: ThetaIndex,
    z: &Complex,
    tau: &Complex,
    rel_bits: u32,
    mag_hint: Option<f64>,
) -> Result<Complex> {
    let ti = tau.imag().to_f64();
    if !(ti > 0.0) {
        return Err(ThetaError::domain("theta needs Im(tau) > 0"));
    }
    let zi = z.imag().to_f64();
    let (a, b) = i.characteristic();
    let h = a as f64 / 2.0;
    // log2 |term| = -pi log2(e) (m^2 Im tau + 2 m Im z) with m = n + h
    let c = PI * LOG2_E;
    let log_term = |m: f64| -c * (m * m * ti + 2.0 * m * zi);
    let m_star = -zi / ti;
    let top = log_term(m_star);
    let hint = mag_hint.unwrap_or(top).min(top);
    let mut prec = rel_bits + (top - hint).max(0.0).ceil() as u32 + 16;
    let mut width = ((prec as f64 + 8.0) / (c * ti)).sqrt() + 1.0;
    prec += (2.0 * width + 2.0).log2().ceil() as u32;
    width = ((prec as f64 + 8.0) / (c * ti)).sqrt() + 1.0;
    let lo = (m_star - width - h).floor() as i64;
    let hi = (m_star + width - h).ceil() as i64;

    let zb = Complex::with_val(prec, z + b as f64 / 2.0);
    let mut sum = Complex::new(prec);
    for n in lo..=hi {
        let m = n as f64 + h;
        // i pi (m^2 tau + 2 m (z + b/2)), m is an exact binary fraction
        let mut arg = Complex::with_val(prec, tau * (m * m));
        arg += Complex::with_val(prec, &zb * (2.0 * m));
        sum += exp_c(&i_pi_times(&arg));
    }
    Ok(sum)
}
