//! Quasi-optimal evaluation.
//!
//! The map [`frak_f`] recovers `(z, tau)` from the theta quotients
//! `s = theta01^2(z)/theta00^2(z)` and `t = theta01^2(0)/theta00^2(0)` using
//! two `F^inf` evaluations and a logarithm. Newton's method on that map, with
//! working precision roughly doubling at each step, computes the quotients
//! (hence the squares of the thetas) in `O(M(P) log P)` for arguments in a
//! compact region. [`theta_uniform`] brings any reduced argument into that
//! region by halving `tau` and `z`, then climbs back with tau-duplication and
//! z-duplication formulas.
//!
//! Rounding errors of the climbing phase are tracked with [`Tracked`] values;
//! the resulting estimate is reported as `guard_bits_used`.

use rug::{Assign, Complex};

use crate::bundle::{Method, ThetaBundle};
use crate::error::{Result, ThetaError};
use crate::fseq::{f_infinity, f_infinity_work_bits, DEFAULT_C1};
use crate::mpcx::{log2_abs, log2_dist, log_c, pi_const, prec_of, sqrt_principal, with_prec};
use crate::naive::{theta11_naive, theta_bundle_naive, theta_naive};
use crate::tracked::{log2_sum, Tracked};

/// The naive series is used whenever `P <= NAIVE_RATIO * Im(tau)`.
pub const NAIVE_RATIO: f64 = 25.0;

/// Bits one Newton step may lose with respect to exact doubling.
pub const DELTA: u32 = 4;

/// Default largest precision of the naive Newton seed.
pub const DEFAULT_P0: u32 = 30000;

/// Seed precision small enough to exercise several Newton steps in tests.
pub const TEST_P0: u32 = 256;

/// Extra bits asked of the naive seed on top of the schedule's needs.
const SEED_GUARD: u32 = 8;

fn ceil_log2(p: u32) -> u32 {
    if p <= 1 {
        0
    } else {
        32 - (p - 1).leading_zeros()
    }
}

/// Tunables of the fast path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastConfig {
    /// Largest precision at which the Newton seed is computed by the naive series.
    pub p0: u32,
    /// Guard bits of the `F^inf` stopping rule.
    pub c1: u32,
    /// Newton target is `2P + newton_g * ceil(log2 P) + newton_h`.
    pub newton_g: u32,
    pub newton_h: u32,
    /// The naive series is used when `P <= naive_ratio * Im(tau)`; zero forces
    /// the Newton path.
    pub naive_ratio: f64,
}

impl Default for FastConfig {
    fn default() -> Self {
        FastConfig {
            p0: DEFAULT_P0,
            c1: DEFAULT_C1,
            newton_g: 4,
            newton_h: 64,
            naive_ratio: NAIVE_RATIO,
        }
    }
}

impl FastConfig {
    pub fn with_p0(p0: u32) -> Self {
        FastConfig {
            p0,
            ..FastConfig::default()
        }
    }
}

/// `s = theta01^2(z)/theta00^2(z)` and `t = theta01^2(0)/theta00^2(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientPair {
    pub s: Complex,
    pub t: Complex,
}

impl QuotientPair {
    /// Quotients from theta00/theta01 values at z and 0.
    pub fn from_thetas(
        th00_z: &Complex,
        th01_z: &Complex,
        th00_0: &Complex,
        th01_0: &Complex,
        prec: u32,
    ) -> Self {
        let sq = |a: &Complex| Complex::with_val(prec, a.square_ref());
        let s = Complex::with_val(prec, sq(th01_z) / sq(th00_z));
        let t = Complex::with_val(prec, sq(th01_0) / sq(th00_0));
        QuotientPair { s, t }
    }
}

/// Output of [`frak_f_squared`].
#[derive(Debug, Clone)]
pub struct FrakOutput {
    pub z_sq: Complex,
    pub tau: Complex,
    /// F steps taken by the two `F^inf` evaluations together.
    pub iterations: u32,
}

/// `(z^2, tau)` from the quotients `(s, t)`, targeting absolute precision `p`.
///
/// Working on `z^2` avoids both the sign ambiguity of `z` (the quotients are
/// even in `z`) and the square-root singularity at `z = 0`.
pub fn frak_f_squared(s: &Complex, t: &Complex, p: u32, c1: u32) -> Result<FrakOutput> {
    let w = f_infinity_work_bits(p, c1);
    let s = with_prec(s, w);
    let t = with_prec(t, w);
    let one = Complex::with_val(w, 1);

    let mut b = Complex::with_val(w, t.square_ref());
    b = Complex::with_val(w, &one - &b);
    if b.is_zero() {
        return Err(ThetaError::domain("1 - t^2 vanishes"));
    }
    let b = sqrt_principal(&b);
    let mut a = Complex::with_val(w, &s * &t);
    a = Complex::with_val(w, &one - &a);
    a /= &b;

    let xy = f_infinity(&one, &a, &one, &b, p, c1)?;
    let qq = f_infinity(&one, &s, &one, &t, p, c1)?;
    let (x, y) = (&xy.lambda, &xy.mu);
    let (q1, q2) = (&qq.lambda, &qq.mu);

    let mut num = Complex::with_val(w, q2 * x);
    num /= Complex::with_val(w, q1 * y);
    let l = log_c(&num)?;
    let ratio = Complex::with_val(w, q2 / y);
    let mut z_sq = Complex::with_val(w, &l * &ratio);
    z_sq /= pi_const(w + 8);
    z_sq >>= 1u32;
    z_sq = -z_sq;
    let mut tau = ratio;
    tau.mul_i_mut(false);
    Ok(FrakOutput {
        z_sq,
        tau,
        iterations: xy.iterations + qq.iterations,
    })
}

/// `(z, tau)` from the quotients; the root `z` is taken with `Im(z) > 0`, or
/// `Re(z) >= 0` when `z` is real.
pub fn frak_f(s: &Complex, t: &Complex, p: u32, c1: u32) -> Result<(Complex, Complex)> {
    let out = frak_f_squared(s, t, p, c1)?;
    let mut z = sqrt_principal(&out.z_sq);
    if z.imag().is_sign_negative() && !z.imag().is_zero() {
        z = -z;
    }
    Ok((z, out.tau))
}

/// Bits added to the target of every map evaluation inside a Newton step.
pub fn newton_guard(p: u32) -> u32 {
    2 * ceil_log2(p) + 24
}

/// Accuracy a Newton step at precision `p` needs from its input.
fn newton_need(p: u32) -> u32 {
    (p + DELTA + 2).div_ceil(2) + 2
}

/// Working precisions of the Newton steps, ascending and ending at `target`.
///
/// Built from the top: each step's predecessor must deliver about half of its
/// precision plus `DELTA`, so the precisions roughly double. Empty when the
/// seed alone reaches `target` (`target <= p0`).
pub fn newton_schedule(p0: u32, target: u32) -> Vec<u32> {
    let mut v = Vec::new();
    if target <= p0 {
        return v;
    }
    let mut p = target;
    v.push(p);
    while newton_need(p) > p0 {
        p = newton_need(p);
        v.push(p);
    }
    v.reverse();
    v
}

/// Precision of the naive seed for a given schedule.
pub fn seed_bits(p0: u32, target: u32) -> u32 {
    match newton_schedule(p0, target).first() {
        None => target,
        Some(&p) => newton_need(p),
    }
}

/// One record of the Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStepInfo {
    pub prec: u32,
    /// log2 of the size of the correction applied at this step.
    pub correction_log2: f64,
    /// Bits lost by the previous step, `2k - k'`, where `k` and `k'` are the
    /// accuracies implied by two successive corrections.
    pub loss_estimate: Option<f64>,
}

/// Result of [`newton_quotients_traced`].
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub quotients: QuotientPair,
    pub seed_bits: u32,
    pub steps: Vec<NewtonStepInfo>,
    /// Estimated log2 of the absolute error of the returned quotients.
    pub error_log2: f64,
}

/// Naive quotients at `(z, tau)` to about `bits` bits.
pub fn seed_quotients(z: &Complex, tau: &Complex, bits: u32) -> Result<QuotientPair> {
    let v = theta_naive(z, tau, bits + SEED_GUARD)?;
    Ok(QuotientPair::from_thetas(
        &v.th00_z,
        &v.th01_z,
        &v.th00_0,
        &v.th01_0,
        bits + SEED_GUARD + 8,
    ))
}

/// One Newton step at precision `p` towards `frak_f_squared(s, t) = (z_sq, tau)`.
///
/// Jacobian entries come from forward differences with step `2^(-p/2)`. The
/// Jacobian is upper triangular: the tau-output depends on `t` only.
/// Returns the updated pair and log2 of the correction size.
pub fn newton_step(
    q: &QuotientPair,
    z_sq: &Complex,
    tau: &Complex,
    p: u32,
    c1: u32,
) -> Result<(QuotientPair, f64)> {
    let fp = p + newton_guard(p);
    let s = with_prec(&q.s, fp);
    let t = with_prec(&q.t, fp);
    let mut h = Complex::with_val(fp, 1);
    h >>= p / 2;

    let g0 = frak_f_squared(&s, &t, fp, c1)?;
    let gs = frak_f_squared(&Complex::with_val(fp, &s + &h), &t, fp, c1)?;
    let gt = frak_f_squared(&s, &Complex::with_val(fp, &t + &h), fp, c1)?;

    let diff = |a: &Complex, b: &Complex| {
        let mut d = Complex::with_val(fp, a - b);
        d <<= p / 2;
        d
    };
    let a11 = diff(&gs.z_sq, &g0.z_sq);
    let a12 = diff(&gt.z_sq, &g0.z_sq);
    let a22 = diff(&gt.tau, &g0.tau);
    if a11.is_zero() || a22.is_zero() {
        return Err(ThetaError::NonConvergence {
            what: "singular Newton Jacobian".into(),
            iterations: 0,
        });
    }
    let rx = Complex::with_val(fp, &g0.z_sq - z_sq);
    let ry = Complex::with_val(fp, &g0.tau - tau);
    let dt = Complex::with_val(fp, &ry / &a22);
    let mut ds = Complex::with_val(fp, &a12 * &dt);
    ds = Complex::with_val(fp, &rx - &ds);
    ds /= &a11;
    let corr = log2_abs(&ds).max(log2_abs(&dt));
    let s = Complex::with_val(fp, &s - &ds);
    let t = Complex::with_val(fp, &t - &dt);
    Ok((QuotientPair { s, t }, corr))
}

/// Quotients at `(z, tau)` accurate to about `P` bits, by Newton's method from
/// a naive seed of at most `P0` bits.
pub fn newton_quotients(
    z: &Complex,
    tau: &Complex,
    target_bits: u32,
    p0: u32,
) -> Result<QuotientPair> {
    newton_quotients_traced(z, tau, target_bits, p0, DEFAULT_C1).map(|r| r.quotients)
}

/// [`newton_quotients`] with the per-step record.
pub fn newton_quotients_traced(
    z: &Complex,
    tau: &Complex,
    target_bits: u32,
    p0: u32,
    c1: u32,
) -> Result<NewtonReport> {
    let schedule = newton_schedule(p0, target_bits);
    let seed = seed_bits(p0, target_bits);
    let mut q = seed_quotients(z, tau, seed)?;
    if schedule.is_empty() {
        return Ok(NewtonReport {
            quotients: q,
            seed_bits: seed,
            steps: Vec::new(),
            error_log2: -(seed as f64) + 2.0,
        });
    }
    let top = *schedule.last().unwrap();
    let wz = top + newton_guard(top) + 64;
    let z_sq = Complex::with_val(wz, z.square_ref());
    let tau = with_prec(tau, wz);

    let mut steps: Vec<NewtonStepInfo> = Vec::with_capacity(schedule.len());
    let mut stalls = 0;
    for &p in &schedule {
        let (next, corr) = newton_step(&q, &z_sq, &tau, p, c1)?;
        let loss = steps.last().map(|prev| corr - 2.0 * prev.correction_log2);
        if let Some(prev) = steps.last() {
            if corr >= prev.correction_log2 && corr > -(prev.prec as f64) + 8.0 {
                stalls += 1;
                if stalls >= 3 {
                    return Err(ThetaError::NonConvergence {
                        what: "Newton corrections stopped contracting".into(),
                        iterations: steps.len() as u32 + 1,
                    });
                }
            } else {
                stalls = 0;
            }
        }
        steps.push(NewtonStepInfo {
            prec: p,
            correction_log2: corr,
            loss_estimate: loss,
        });
        q = next;
    }
    let last = steps.last().unwrap();
    let loss = last.loss_estimate.unwrap_or(DELTA as f64).max(0.0);
    let quadratic = 2.0 * last.correction_log2 + loss;
    let error_log2 = log2_sum(&[quadratic, -(top as f64) + 4.0]);
    Ok(NewtonReport {
        quotients: q,
        seed_bits: seed,
        steps,
        error_log2,
    })
}

/// Squares `(theta00^2(z), theta01^2(z), theta00^2(0), theta01^2(0))` from the
/// quotients, through `F^inf(1, s, 1, t) = (1/theta00^2(z), 1/theta00^2(0))`.
pub fn squares_from_quotients(q: &QuotientPair, p: u32, c1: u32) -> Result<[Complex; 4]> {
    let w = f_infinity_work_bits(p, c1);
    let one = Complex::with_val(w, 1);
    let s = with_prec(&q.s, w);
    let t = with_prec(&q.t, w);
    let r = f_infinity(&one, &s, &one, &t, p, c1)?;
    let a = Complex::with_val(w, r.lambda.recip_ref());
    let b = Complex::with_val(w, r.mu.recip_ref());
    let sa = Complex::with_val(w, &s * &a);
    let tb = Complex::with_val(w, &t * &b);
    Ok([a, sa, b, tb])
}

/// Squares of theta00, theta01, theta10 at `(z, tau)` and at `(0, tau)`.
#[derive(Debug, Clone)]
pub struct SquareBundle {
    pub sq00_z: Complex,
    pub sq01_z: Complex,
    pub sq10_z: Complex,
    pub sq00_0: Complex,
    pub sq01_0: Complex,
    pub sq10_0: Complex,
}

/// Squares at `(z, 2 tau)` from squares at `(z, tau)`.
///
/// The square roots of theta00 and theta01 are principal; this is the right
/// branch whenever the real parts of those values are positive, which holds on
/// the compact region the uniform algorithm works in. Only the theta00 and
/// theta01 inputs are used.
pub fn tau_duplicate(b: &SquareBundle) -> SquareBundle {
    let t = |v: &Complex| Tracked::exact(v.clone());
    let r = tau_dup_step(
        &t(&b.sq00_z).sqrt(),
        &t(&b.sq01_z).sqrt(),
        &t(&b.sq00_0),
        &t(&b.sq01_0),
    );
    SquareBundle {
        sq00_z: r[0].v.clone(),
        sq01_z: r[1].v.clone(),
        sq10_z: r[2].v.clone(),
        sq00_0: r[3].v.clone(),
        sq01_0: r[4].v.clone(),
        sq10_0: r[5].v.clone(),
    }
}

/// Tau-duplication on values `theta00(u), theta01(u)` and squared constants.
/// Returns squares at `2 tau` in the order of [`SquareBundle`].
fn tau_dup_step(v00: &Tracked, v01: &Tracked, csq00: &Tracked, csq01: &Tracked) -> [Tracked; 6] {
    let c00 = csq00.sqrt();
    let c01 = csq01.sqrt();
    let a = v00.mul(&c00);
    let b = v01.mul(&c01);
    let sq00_z = a.add(&b).shr(1);
    let sq10_z = a.sub(&b).shr(1);
    let sq01_z = v00.mul(&c01).add(&v01.mul(&c00)).shr(1);
    let sq00_0 = csq00.add(csq01).shr(1);
    let sq01_0 = c00.mul(&c01);
    let sq10_0 = csq00.sub(csq01).shr(1);
    [sq00_z, sq01_z, sq10_z, sq00_0, sq01_0, sq10_0]
}

/// theta00, theta01 (and theta10 when its constant is given) at `(2u, tau)`
/// from squares at `(u, tau)` and the constants at `(0, tau)`:
///
/// ```text
/// theta00(2u) theta00(0)^3 = theta01(u)^4 + theta10(u)^4
/// theta01(2u) theta01(0)^3 = theta00(u)^4 - theta10(u)^4
/// theta10(2u) theta10(0)^3 = theta00(u)^4 - theta01(u)^4
/// ```
pub fn z_duplicate(
    sq00_u: &Complex,
    sq01_u: &Complex,
    sq10_u: &Complex,
    c00: &Complex,
    c01: &Complex,
    c10: Option<&Complex>,
) -> Result<(Complex, Complex, Option<Complex>)> {
    let t = |v: &Complex| Tracked::exact(v.clone());
    let (a, b, c) = z_dup_step(
        &t(sq00_u),
        &t(sq01_u),
        &t(sq10_u),
        &t(c00),
        &t(c01),
        c10.map(t).as_ref(),
    )?;
    Ok((a.v, b.v, c.map(|c| c.v)))
}

fn check_constant(c: &Tracked, floor: f64, what: &str) -> Result<()> {
    if !(c.mag() >= floor) {
        return Err(ThetaError::domain(format!(
            "{what} has modulus 2^{:.1}, below its floor 2^{floor:.1}",
            c.mag()
        )));
    }
    Ok(())
}

fn z_dup_step(
    sq00: &Tracked,
    sq01: &Tracked,
    sq10: &Tracked,
    c00: &Tracked,
    c01: &Tracked,
    c10: Option<&Tracked>,
) -> Result<(Tracked, Tracked, Option<Tracked>)> {
    // |theta00(0)|, |theta01(0)| >= 0.859 for Im(tau) > sqrt(3)/2
    let floor = 0.859f64.log2() - 0.01;
    check_constant(c00, floor, "theta00(0)")?;
    check_constant(c01, floor, "theta01(0)")?;
    let f00 = sq00.square();
    let f01 = sq01.square();
    let f10 = sq10.square();
    let cube = |c: &Tracked| c.square().mul(c);
    let v00 = f01.add(&f10).div(&cube(c00));
    let v01 = f00.sub(&f10).div(&cube(c01));
    let v10 = match c10 {
        Some(c) => {
            if c.v.is_zero() {
                return Err(ThetaError::domain("theta10(0) vanishes"));
            }
            Some(f00.sub(&f01).div(&cube(c)))
        }
        None => None,
    };
    Ok((v00, v01, v10))
}

/// Split of a reduced argument into the compact region of the Newton step.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformParams {
    /// `s` with `1 <= |tau| / 2^s < 2`.
    pub s_split: u32,
    pub z2: Complex,
    pub tau2: Complex,
    pub naive_threshold_ratio: f64,
    /// Working precision of the duplication phase, `2P`.
    pub work_bits: u32,
    /// Target of the Newton phase.
    pub newton_bits: u32,
    pub newton_p0: u32,
}

impl UniformParams {
    pub fn new(z: &Complex, tau: &Complex, target_bits: u32, cfg: &FastConfig) -> Self {
        let abs = Complex::with_val(64, tau).abs().real().to_f64();
        let mut s = abs.log2().floor().max(0.0) as u32;
        while s > 0 && (s as f64).exp2() > abs {
            s -= 1;
        }
        while abs / (s as f64).exp2() >= 2.0 {
            s += 1;
        }
        let mut z2 = z.clone();
        z2 >>= s + 2;
        let mut tau2 = tau.clone();
        tau2 >>= s + 1;
        let work = 2 * target_bits;
        UniformParams {
            s_split: s,
            z2,
            tau2,
            naive_threshold_ratio: cfg.naive_ratio,
            work_bits: work,
            newton_bits: work + cfg.newton_g * ceil_log2(target_bits) + cfg.newton_h,
            newton_p0: cfg.p0,
        }
    }

    /// Whether `(z2, tau2)` lies in the compact region the Newton phase assumes.
    pub fn in_compact_region(&self) -> bool {
        compact_region_contains(&self.z2, &self.tau2)
    }
}

/// `|Re tau| <= 1/4`, `sqrt(3)/4 <= Im tau <= 1`, `|tau| >= 1/2`,
/// `|Re z| <= 1/8`, `0 <= Im z <= Im(tau)/4`, up to a relative slack of 1e-9.
pub fn compact_region_contains(z: &Complex, tau: &Complex) -> bool {
    let e = 1e-9;
    let (tr, ti) = (tau.real().to_f64(), tau.imag().to_f64());
    let (zr, zi) = (z.real().to_f64(), z.imag().to_f64());
    tr.abs() <= 0.25 + e
        && ti >= 3f64.sqrt() / 4.0 - e
        && ti <= 1.0 + e
        && (tr * tr + ti * ti).sqrt() >= 0.5 - e
        && zr.abs() <= 0.125 + e
        && zi >= -e
        && zi <= ti / 4.0 + e
}

/// Whether `(z, tau)` is reduced: `tau` in the closed fundamental domain,
/// `|Re z| <= 1/2` and `0 <= Im z <= Im(tau)/2` (small slack for rounding).
pub fn is_reduced(z: &Complex, tau: &Complex) -> bool {
    let e = 1e-12;
    let (tr, ti) = (tau.real().to_f64(), tau.imag().to_f64());
    let (zr, zi) = (z.real().to_f64(), z.imag().to_f64());
    let abs2 = Complex::with_val(64, tau.norm_ref()).real().to_f64();
    ti > 0.0
        && tr.abs() <= 0.5 + e
        && abs2 >= 1.0 - e
        && zr.abs() <= 0.5 + e
        && zi >= -e * ti.max(1.0)
        && zi <= ti / 2.0 * (1.0 + e)
}

/// Diagnostics of one uniform evaluation.
#[derive(Debug, Clone)]
pub struct FastTrace {
    /// `None` when the naive branch was taken.
    pub params: Option<UniformParams>,
    pub newton: Option<NewtonReport>,
    /// Estimated error of the Newton phase output, in bits below `2^0`.
    pub newton_error_log2: f64,
    /// Per-output first-order error estimates (log2, absolute) in the order of
    /// [`ThetaBundle::six`].
    pub output_error_log2: [f64; 6],
    pub guard_bits_used: u32,
}

/// theta00, theta01, theta10 at `(z, tau)` and `(0, tau)` to absolute
/// precision `P`, for reduced `(z, tau)`.
pub fn theta_uniform(z: &Complex, tau: &Complex, target_bits: u32) -> Result<ThetaBundle> {
    theta_uniform_with(z, tau, target_bits, &FastConfig::default())
}

pub fn theta_uniform_with(
    z: &Complex,
    tau: &Complex,
    target_bits: u32,
    cfg: &FastConfig,
) -> Result<ThetaBundle> {
    theta_uniform_traced(z, tau, target_bits, cfg).map(|r| r.0)
}

#[cfg(debug_assertions)]
fn debug_envelope(v: &Tracked, lo: f64, hi: f64, what: &str) {
    let m = v.mag().exp2();
    debug_assert!(
        m >= lo * 0.999 && m <= hi * 1.001,
        "{what} = {m} outside [{lo}, {hi}]"
    );
}

#[cfg(not(debug_assertions))]
fn debug_envelope(_: &Tracked, _: f64, _: f64, _: &str) {}

/// [`theta_uniform_with`] also returning its diagnostics.
pub fn theta_uniform_traced(
    z: &Complex,
    tau: &Complex,
    target_bits: u32,
    cfg: &FastConfig,
) -> Result<(ThetaBundle, FastTrace)> {
    if !is_reduced(z, tau) {
        return Err(ThetaError::domain(
            "uniform evaluation needs tau in the fundamental domain, |Re z| <= 1/2, 0 <= Im z <= Im(tau)/2",
        ));
    }
    let tau_im = tau.imag().to_f64();
    if target_bits as f64 <= cfg.naive_ratio * tau_im {
        let b = theta_bundle_naive(z, tau, target_bits)?;
        let err = -(target_bits as f64);
        let trace = FastTrace {
            params: None,
            newton: None,
            newton_error_log2: f64::NEG_INFINITY,
            output_error_log2: [err; 6],
            guard_bits_used: b.guard_bits_used,
        };
        return Ok((b, trace));
    }

    let params = UniformParams::new(z, tau, target_bits, cfg);
    debug_assert!(
        params.in_compact_region(),
        "(z2, tau2) left the compact region"
    );
    let w = params.work_bits;
    let s = params.s_split;

    // Newton phase: squares at (z2, tau2)
    let newton =
        newton_quotients_traced(&params.z2, &params.tau2, params.newton_bits, cfg.p0, cfg.c1)?;
    let sq = squares_from_quotients(&newton.quotients, params.newton_bits, cfg.c1)?;
    // error of the squares in units of 2^-w; the quotient-to-square map is tame
    let newton_err = log2_sum(&[newton.error_log2 + 3.0, -(params.newton_bits as f64) + 8.0]);
    let lk0 = newton_err + w as f64;
    let tr = |v: &Complex| Tracked::new(with_prec(v, w), lk0);
    let (s00z, s01z, s00, s01) = (tr(&sq[0]), tr(&sq[1]), tr(&sq[2]), tr(&sq[3]));

    // up to tau1 = 2 tau2
    let [sq00z, sq01z, sq10z, csq00, csq01, csq10] =
        tau_dup_step(&s00z.sqrt(), &s01z.sqrt(), &s00, &s01);
    let mut c00 = csq00.sqrt();
    let mut c01 = csq01.sqrt();
    let mut csq00 = csq00;
    let mut csq01 = csq01;
    let mut csq10 = csq10;
    let mut c10 = if s == 0 { Some(csq10.sqrt()) } else { None };
    // values at (z1/2, tau1)
    let (mut v00, mut v01, _) = z_dup_step(&sq00z, &sq01z, &sq10z, &c00, &c01, None)?;
    debug_envelope(&v00, 0.8038, 1.1962, "theta00(z1/2, tau1)");
    debug_envelope(&v01, 0.8038, 1.1962, "theta01(z1/2, tau1)");

    for i in 1..=s {
        let [sqz00, sqz01, sqz10, nsq00, nsq01, nsq10] = tau_dup_step(&v00, &v01, &csq00, &csq01);
        if i == s {
            csq10 = nsq10;
            c10 = Some(csq10.sqrt());
        }
        csq00 = nsq00;
        csq01 = nsq01;
        c00 = csq00.sqrt();
        c01 = csq01.sqrt();
        let (a, b, _) = z_dup_step(&sqz00, &sqz01, &sqz10, &c00, &c01, None)?;
        v00 = a;
        v01 = b;
        if i < s {
            debug_envelope(&v00, 0.8038, 1.1962, "theta00 in the duplication loop");
            debug_envelope(&v01, 0.8038, 1.1962, "theta01 in the duplication loop");
        }
    }
    let c10 = c10.expect("theta10(0, tau) is set on the last level");
    debug_envelope(&v00, 0.6772, 1.3228, "theta00(z/2, tau)");
    debug_envelope(&v01, 0.6772, 1.3228, "theta01(z/2, tau)");

    // theta10^2(z/2) from the variety relation, then the final z-duplication
    let sq00u = v00.square();
    let sq01u = v01.square();
    let sq10u = sq00u.mul(&csq00).sub(&sq01u.mul(&csq01)).div(&csq10);
    let (t00, t01, t10) = z_dup_step(&sq00u, &sq01u, &sq10u, &c00, &c01, Some(&c10))?;
    let t10 = t10.expect("theta10 line requested");

    let outs = [&t00, &t01, &t10, &c00, &c01, &c10];
    let mut output_error_log2 = [0.0; 6];
    for (e, o) in output_error_log2.iter_mut().zip(outs.iter()) {
        *e = o.lk - w as f64;
    }
    let guard = outs.iter().map(|o| o.bits()).max().unwrap_or(0);
    if guard > w - target_bits {
        return Err(ThetaError::exhausted(format!(
            "guard budget {guard} exceeds the {} spare bits of the working precision",
            w - target_bits
        )));
    }
    let bundle = ThetaBundle {
        th00_z: t00.v,
        th01_z: t01.v,
        th10_z: t10.v,
        th11_z: None,
        th00_0: c00.v,
        th01_0: c01.v,
        th10_0: c10.v,
        achieved_bits: w - guard,
        work_bits: w,
        guard_bits_used: guard,
        method: Method::Fast,
    };
    let trace = FastTrace {
        params: Some(params),
        newton: Some(newton),
        newton_error_log2: newton_err,
        output_error_log2,
        guard_bits_used: guard,
    };
    Ok((bundle, trace))
}

/// theta11(z, tau) from a complete bundle through
/// `theta11^2 = (theta01^2(z) theta10^2(0) - theta10^2(z) theta01^2(0)) / theta00^2(0)`,
/// with the sign of the square root fixed by a low-precision series probe.
///
/// Returns the value and the absolute precision it carries.
pub fn theta11_fast(bundle: &ThetaBundle, z: &Complex, tau: &Complex) -> Result<(Complex, u32)> {
    let w = bundle.work_bits;
    let lk = bundle.guard_bits_used as f64;
    let t = |v: &Complex| Tracked::new(with_prec(v, w), lk);
    let sq = |v: &Complex| t(v).square();
    let num = sq(&bundle.th01_z)
        .mul(&sq(&bundle.th10_0))
        .sub(&sq(&bundle.th10_z).mul(&sq(&bundle.th01_0)));
    let sq11 = num.div(&sq(&bundle.th00_0));
    let err_sq = sq11.lk - w as f64;
    let m = sq11.mag();
    let root = sq11.sqrt();
    // error of the root: linearised when the square is well above its error,
    // square-root of the error otherwise
    let err = if m >= err_sq + 4.0 {
        err_sq - (1.0 + m / 2.0) + 1.0
    } else {
        (err_sq + 1.0) / 2.0 + 1.0
    };
    let achieved = if err >= 0.0 { 0 } else { (-err).floor() as u32 };
    let mut v = root.v;
    let vm = log2_abs(&v);
    if vm <= err + 1.0 {
        // |theta11| is within its own error: either sign is as good
        return Ok((v, achieved));
    }
    let mut bits = ((-vm).ceil().max(0.0) as u32 + 16).max(32);
    for _ in 0..3 {
        let probe = theta11_naive(z, tau, bits)?;
        let d_plus = log2_dist(&v, &probe);
        let neg = Complex::with_val(prec_of(&v), -&v);
        let d_minus = log2_dist(&neg, &probe);
        let margin = vm - 1.0;
        if d_plus.min(d_minus) < margin && d_plus.max(d_minus) >= margin {
            if d_minus < d_plus {
                v.assign(&neg);
            }
            return Ok((v, achieved));
        }
        bits *= 2;
    }
    Err(ThetaError::exhausted("theta11 sign probe stayed ambiguous"))
}

/// Uniform evaluation including theta11. When the square root in
/// [`theta11_fast`] costs too many bits the bundle is recomputed at a higher
/// precision.
pub fn theta_uniform_full(
    z: &Complex,
    tau: &Complex,
    target_bits: u32,
    cfg: &FastConfig,
) -> Result<ThetaBundle> {
    let tau_im = tau.imag().to_f64();
    if target_bits as f64 <= cfg.naive_ratio * tau_im {
        let mut b = theta_bundle_naive(z, tau, target_bits)?;
        b.th11_z = Some(theta11_naive(z, tau, target_bits)?);
        return Ok(b);
    }
    let mut p = target_bits;
    for _ in 0..3 {
        let mut b = theta_uniform_with(z, tau, p, cfg)?;
        let (v, achieved) = theta11_fast(&b, z, tau)?;
        if achieved >= target_bits {
            b.th11_z = Some(v);
            b.achieved_bits = b.achieved_bits.min(achieved);
            return Ok(b);
        }
        p += target_bits - achieved + 8;
    }
    Err(ThetaError::exhausted("theta11 recovery lost too many bits"))
}
