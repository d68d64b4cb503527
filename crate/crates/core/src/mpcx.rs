//! Multiprecision complex kernel.
//!
//! Values are `rug::Complex` (MPC) numbers whose real and imaginary parts carry
//! the same binary precision and are rounded to nearest, ties to even. All the
//! elementary operations used here (add, mul, sqrt, exp, log) are correctly
//! rounded by MPC, so each part is within half an ulp of the exact result.
//!
//! Error accounting is absolute: an approximation `z~` of `z` has budget `k`
//! when `|z - z~| <= k * 2^-P`. [`propagate_error`] implements the propagation
//! rules for the operations the theta algorithms are built from.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use rug::float::Constant;
use rug::ops::NegAssign;
pub use rug::{Complex, Float};

use crate::error::{Result, ThetaError};

/// Maximum error of `exp_c`, `log_c` and `pi_const`, in ulps of each part.
pub const TRANSCENDENTAL_ULPS: f64 = 0.5;

/// Smallest precision accepted anywhere in the crate.
pub const MIN_PREC: u32 = 2;

/// Complex number from two doubles at the given precision (exact conversion).
pub fn cx(prec: u32, re: f64, im: f64) -> Complex {
    Complex::with_val(prec.max(MIN_PREC), (re, im))
}

/// Copy of `a` re-rounded to `prec` bits.
pub fn with_prec(a: &Complex, prec: u32) -> Complex {
    Complex::with_val(prec.max(MIN_PREC), a)
}

/// Working precision of a value (the larger of the two parts).
pub fn prec_of(a: &Complex) -> u32 {
    let (r, i) = a.prec();
    r.max(i)
}

pub fn is_finite(a: &Complex) -> bool {
    a.real().is_finite() && a.imag().is_finite()
}

/// log2 |a|, valid far outside the double exponent range. Returns `-inf` for zero.
pub fn log2_abs(a: &Complex) -> f64 {
    if a.is_zero() {
        return f64::NEG_INFINITY;
    }
    let m = Float::with_val(64, a.abs_ref());
    let (mant, exp) = m.to_f64_exp();
    mant.log2() + exp as f64
}

/// |a| as a double (saturating).
pub fn abs_f64(a: &Complex) -> f64 {
    Float::with_val(64, a.abs_ref()).to_f64()
}

/// log2 of the absolute distance `|a - b|`, computed at the larger precision.
pub fn log2_dist(a: &Complex, b: &Complex) -> f64 {
    let p = prec_of(a).max(prec_of(b));
    let d = Complex::with_val(p, a - b);
    log2_abs(&d)
}

/// Principal square root: `Re(s) >= 0`, and `Im(s) >= 0` whenever `Re(s) = 0`.
pub fn sqrt_principal(a: &Complex) -> Complex {
    if a.is_zero() {
        return Complex::new(prec_of(a));
    }
    let mut s = a.clone();
    // MPC honours signed zeros on the branch cut; fold -0 to +0 first.
    if s.imag().is_zero() {
        s.mut_imag().assign_zero_pos();
    }
    s.sqrt_mut();
    if s.real().is_zero() && s.imag().is_sign_negative() {
        s.neg_assign();
    }
    s
}

/// exp(a) at the precision of `a`.
pub fn exp_c(a: &Complex) -> Complex {
    Complex::with_val(prec_of(a), a.exp_ref())
}

/// Principal logarithm, imaginary part in (-pi, pi].
pub fn log_c(a: &Complex) -> Result<Complex> {
    if a.is_zero() {
        return Err(ThetaError::domain("log of zero"));
    }
    let mut b = a.clone();
    if b.imag().is_zero() {
        b.mut_imag().assign_zero_pos();
    }
    Ok(Complex::with_val(prec_of(a), b.ln_ref()))
}

fn pi_cache() -> &'static RwLock<HashMap<u32, Float>> {
    static CACHE: OnceLock<RwLock<HashMap<u32, Float>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// pi rounded to `prec` bits. Cached per precision.
pub fn pi_const(prec: u32) -> Float {
    let prec = prec.max(MIN_PREC);
    if let Some(v) = pi_cache().read().expect("pi cache poisoned").get(&prec) {
        return v.clone();
    }
    let v = Float::with_val(prec, Constant::Pi);
    let mut w = pi_cache().write().expect("pi cache poisoned");
    // The cache only serves repeated precisions; keep it bounded.
    if w.len() > 256 {
        w.clear();
    }
    w.insert(prec, v.clone());
    v
}

/// `i * pi * a` at the precision of `a`.
pub fn i_pi_times(a: &Complex) -> Complex {
    let p = prec_of(a);
    let pi = pi_const(p + 8);
    let mut r = Complex::with_val(p, a * &pi);
    r.mul_i_mut(false);
    r
}

trait ZeroExt {
    fn assign_zero_pos(&mut self);
}

impl ZeroExt for Float {
    fn assign_zero_pos(&mut self) {
        *self = Float::new(self.prec());
    }
}

/// Absolute error budget in units of `2^-P`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ErrorBudget {
    pub k: f64,
}

impl ErrorBudget {
    pub const EXACT: ErrorBudget = ErrorBudget { k: 0.0 };

    pub fn new(k: f64) -> Self {
        ErrorBudget { k }
    }

    /// Number of low-order bits the budget consumes, `ceil(log2 k)` (0 when k <= 1).
    pub fn bits(&self) -> u32 {
        if self.k <= 1.0 {
            0
        } else {
            self.k.log2().ceil() as u32
        }
    }
}

/// The operations covered by [`propagate_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Add,
    Mul,
    Square,
    Exp,
    Div,
    Sqrt,
}

/// An operand of a propagated operation: a bound on its magnitude and its budget.
///
/// For [`OpKind::Exp`] the magnitude is `|exp(z)|` rather than `|z|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operand {
    pub magnitude: f64,
    pub budget: ErrorBudget,
}

impl Operand {
    pub fn new(magnitude: f64, k: f64) -> Self {
        Operand {
            magnitude,
            budget: ErrorBudget::new(k),
        }
    }
}

/// Budget of the result of `op` applied to `operands` computed at absolute
/// precision `prec` bits.
///
/// For add, mul, square and div the bound holds for the real and imaginary
/// parts separately; for exp and sqrt it bounds the modulus of the error.
pub fn propagate_error(op: OpKind, operands: &[Operand], prec: u32) -> Result<ErrorBudget> {
    let arity = match op {
        OpKind::Add | OpKind::Mul | OpKind::Div => 2,
        OpKind::Square | OpKind::Exp | OpKind::Sqrt => 1,
    };
    if operands.len() != arity {
        return Err(ThetaError::PreconditionViolated(format!(
            "{op:?} takes {arity} operands, got {}",
            operands.len()
        )));
    }
    let half_prec = 2f64.powf(prec as f64 / 2.0);
    let ulp = 2f64.powi(-(prec as i32));
    for o in operands {
        if !(o.budget.k >= 0.0) || o.budget.k > half_prec {
            return Err(ThetaError::PreconditionViolated(format!(
                "budget {} outside [0, 2^(P/2)]",
                o.budget.k
            )));
        }
        if !(o.magnitude >= 0.0) || !o.magnitude.is_finite() {
            return Err(ThetaError::PreconditionViolated(format!(
                "magnitude {} is not a finite nonnegative bound",
                o.magnitude
            )));
        }
        if matches!(op, OpKind::Div | OpKind::Sqrt) && o.magnitude < 2.0 * o.budget.k * ulp {
            return Err(ThetaError::PreconditionViolated(format!(
                "|z| = {} below 2k 2^-P for {op:?}",
                o.magnitude
            )));
        }
    }
    let k = match op {
        OpKind::Add => operands[0].budget.k + operands[1].budget.k,
        OpKind::Mul => {
            let (z1, k1) = (operands[0].magnitude, operands[0].budget.k);
            let (z2, k2) = (operands[1].magnitude, operands[1].budget.k);
            2.0 + 2.0 * k1 * z2 + 2.0 * k2 * z1
        }
        OpKind::Square => 2.0 + 4.0 * operands[0].budget.k * operands[0].magnitude,
        OpKind::Exp => operands[0].magnitude * (7.0 * operands[0].budget.k + 8.5) / 2.0,
        OpKind::Div => {
            let (z1, k1) = (operands[0].magnitude, operands[0].budget.k);
            let (z2, k2) = (operands[1].magnitude, operands[1].budget.k);
            6.0 * (2.0 + 2.0 * k1 * z2 + 2.0 * k2 * z1) / (z2 * z2)
                + (2.0 * (4.0 + 8.0 * k2 * z2) * (2.0 * z1 * z2 + 1.0) + 2.0) / z2.powi(4)
        }
        OpKind::Sqrt => operands[0].budget.k / operands[0].magnitude.sqrt(),
    };
    Ok(ErrorBudget::new(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 128;

    fn close(a: &Complex, re: f64, im: f64, tol: f64) -> bool {
        let d = Complex::with_val(P, a - cx(P, re, im));
        abs_f64(&d) <= tol
    }

    #[test]
    fn sqrt_examples() {
        assert!(close(&sqrt_principal(&cx(P, 4.0, 0.0)), 2.0, 0.0, 0.0));
        assert!(close(&sqrt_principal(&cx(P, -1.0, 0.0)), 0.0, 1.0, 0.0));
        assert!(close(&sqrt_principal(&cx(P, -1.0, -0.0)), 0.0, 1.0, 0.0));
        assert!(close(&sqrt_principal(&cx(P, 0.0, 2.0)), 1.0, 1.0, 1e-35));
        assert!(sqrt_principal(&cx(P, 0.0, 0.0)).is_zero());
        // (1+i)^2 = 2i by direct multiplication
        let w = cx(P, 1.0, 1.0);
        assert!(close(&Complex::with_val(P, &w * &w), 0.0, 2.0, 0.0));
    }

    #[test]
    fn sqrt_branch_negative_imag() {
        let s = sqrt_principal(&cx(P, -4.0, -1e-30));
        assert!(s.real().is_sign_positive());
        assert!(s.imag().is_sign_negative());
    }

    #[test]
    fn exp_log_examples() {
        assert!(close(&exp_c(&cx(P, 0.0, 0.0)), 1.0, 0.0, 0.0));
        assert!(close(&log_c(&cx(P, 1.0, 0.0)).unwrap(), 0.0, 0.0, 0.0));
        assert!(matches!(
            log_c(&cx(P, 0.0, 0.0)),
            Err(ThetaError::Domain(_))
        ));
        let l = log_c(&cx(P, -1.0, -0.0)).unwrap();
        assert!(l.imag().is_sign_positive());
    }

    #[test]
    fn exp_of_i_pi_one_plus_i() {
        // Independent e^-pi via its Taylor series at 400 bits.
        let wp = 400;
        let pi = Float::with_val(wp, Constant::Pi);
        let x = Float::with_val(wp, -&pi);
        let mut term = Float::with_val(wp, 1);
        let mut sum = Float::with_val(wp, 1);
        for k in 1..400u32 {
            term *= &x;
            term /= k;
            sum += &term;
        }
        let arg = i_pi_times(&cx(P, 1.0, 1.0));
        let e = exp_c(&arg);
        let expect = Complex::with_val(P, (-sum, 0));
        assert!(log2_dist(&e, &expect) < -(P as f64) + 4.0);
        assert!((e.real().to_f64() + 0.0432139182637722).abs() < 1e-15);
    }

    #[test]
    fn pi_cached_matches_constant() {
        let a = pi_const(300);
        let b = pi_const(300);
        assert_eq!(a, b);
        assert_eq!(a, Float::with_val(300, Constant::Pi));
    }

    #[test]
    fn log2_abs_handles_tiny_values() {
        let mut a = cx(64, 1.0, 0.0);
        a >>= 5000;
        assert!((log2_abs(&a) + 5000.0).abs() < 1e-9);
    }

    #[test]
    fn propagate_examples() {
        let add = propagate_error(
            OpKind::Add,
            &[Operand::new(1.0, 1.0), Operand::new(1.0, 2.0)],
            64,
        );
        assert_eq!(add.unwrap().k, 3.0);
        let sq = propagate_error(OpKind::Square, &[Operand::new(1.0, 0.0)], 64);
        assert_eq!(sq.unwrap().k, 2.0);
        let ex = propagate_error(OpKind::Exp, &[Operand::new(1.0, 0.5)], 64);
        assert_eq!(ex.unwrap().k, 6.0);
    }

    #[test]
    fn propagate_all_six_clauses() {
        let (z1, k1, z2, k2) = (1.5, 3.0, 0.75, 5.0);
        let a = Operand::new(z1, k1);
        let b = Operand::new(z2, k2);
        let mul = propagate_error(OpKind::Mul, &[a, b], 64).unwrap().k;
        assert_eq!(mul, 2.0 + 2.0 * k1 * z2 + 2.0 * k2 * z1);
        let sq = propagate_error(OpKind::Square, &[a], 64).unwrap().k;
        assert_eq!(sq, 2.0 + 4.0 * k1 * z1);
        let ex = propagate_error(OpKind::Exp, &[Operand::new(2.0, k1)], 64)
            .unwrap()
            .k;
        assert_eq!(ex, 2.0 * (7.0 * k1 + 8.5) / 2.0);
        let dv = propagate_error(OpKind::Div, &[a, b], 64).unwrap().k;
        let expect = 6.0 * (2.0 + 2.0 * k1 * z2 + 2.0 * k2 * z1) / (z2 * z2)
            + (2.0 * (4.0 + 8.0 * k2 * z2) * (2.0 * z1 * z2 + 1.0) + 2.0) / z2.powi(4);
        assert_eq!(dv, expect);
        let sr = propagate_error(OpKind::Sqrt, &[Operand::new(4.0, k1)], 64)
            .unwrap()
            .k;
        assert_eq!(sr, k1 / 2.0);
        let ad = propagate_error(OpKind::Add, &[a, b], 64).unwrap().k;
        assert_eq!(ad, k1 + k2);
    }

    #[test]
    fn propagate_preconditions() {
        let big = 2f64.powi(40);
        let r = propagate_error(
            OpKind::Add,
            &[Operand::new(1.0, big), Operand::new(1.0, 0.0)],
            64,
        );
        assert!(matches!(r, Err(ThetaError::PreconditionViolated(_))));
        let tiny = 2f64.powi(-70);
        let r = propagate_error(OpKind::Sqrt, &[Operand::new(tiny, 1.0)], 64);
        assert!(matches!(r, Err(ThetaError::PreconditionViolated(_))));
        let r = propagate_error(OpKind::Div, &[Operand::new(1.0, 1.0)], 64);
        assert!(matches!(r, Err(ThetaError::PreconditionViolated(_))));
    }

    #[test]
    fn budget_bits() {
        assert_eq!(ErrorBudget::new(0.3).bits(), 0);
        assert_eq!(ErrorBudget::new(8.0).bits(), 3);
        assert_eq!(ErrorBudget::new(9.0).bits(), 4);
    }
}
