//! Values carrying a running absolute error budget.
//!
//! A [`Tracked`] value `v` at working precision `P` comes with `lk` such that
//! `|v - exact| <= 2^lk * 2^-P` is the propagated first-order estimate. The
//! rules are those of [`crate::mpcx::propagate_error`] evaluated on the actual
//! magnitudes of the operands, kept in the log domain so budgets of thousands
//! of bits do not overflow. Division uses the first-order rule
//! `2 + 2 (k1 + |z1/z2| k2) / |z2|` instead of the worst-case bound.

use rug::Complex;

use crate::mpcx::{log2_abs, sqrt_principal};

/// `log2(sum 2^x)` over the finite entries; `-inf` when all are `-inf`.
pub fn log2_sum(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp2()).sum::<f64>().log2()
}

/// Relative slack added to magnitudes read back from computed values.
const MAG_SLACK: f64 = 1e-9;

/// Rounding charge of a freshly computed value: one unit of `2^-P` for values
/// of modulus at most 1, scaled up with the exponent otherwise.
fn rounding(v: &Complex) -> f64 {
    log2_abs(v).max(0.0)
}

#[derive(Debug, Clone)]
pub struct Tracked {
    pub v: Complex,
    /// log2 of the error budget in units of `2^-P`; `-inf` for exact values.
    pub lk: f64,
}

impl Tracked {
    pub fn exact(v: Complex) -> Self {
        Tracked {
            v,
            lk: f64::NEG_INFINITY,
        }
    }

    pub fn new(v: Complex, lk: f64) -> Self {
        Tracked { v, lk }
    }

    fn prec(&self) -> u32 {
        let (a, b) = self.v.prec();
        a.max(b)
    }

    /// log2 |v|, slightly inflated.
    pub fn mag(&self) -> f64 {
        log2_abs(&self.v) + MAG_SLACK
    }

    /// Bits of the working precision consumed by the budget, `ceil(lk)`.
    pub fn bits(&self) -> u32 {
        if self.lk <= 0.0 {
            0
        } else {
            self.lk.ceil() as u32
        }
    }

    pub fn add(&self, o: &Tracked) -> Tracked {
        let p = self.prec().max(o.prec());
        let v = Complex::with_val(p, &self.v + &o.v);
        let lk = log2_sum(&[self.lk, o.lk, rounding(&v)]);
        Tracked::new(v, lk)
    }

    pub fn sub(&self, o: &Tracked) -> Tracked {
        let p = self.prec().max(o.prec());
        let v = Complex::with_val(p, &self.v - &o.v);
        let lk = log2_sum(&[self.lk, o.lk, rounding(&v)]);
        Tracked::new(v, lk)
    }

    pub fn mul(&self, o: &Tracked) -> Tracked {
        let p = self.prec().max(o.prec());
        let v = Complex::with_val(p, &self.v * &o.v);
        let lk = log2_sum(&[
            1.0 + rounding(&v),
            1.0 + self.lk + o.mag(),
            1.0 + o.lk + self.mag(),
        ]);
        Tracked::new(v, lk)
    }

    pub fn square(&self) -> Tracked {
        let p = self.prec();
        let v = Complex::with_val(p, self.v.square_ref());
        let lk = log2_sum(&[1.0 + rounding(&v), 2.0 + self.lk + self.mag()]);
        Tracked::new(v, lk)
    }

    pub fn sqrt(&self) -> Tracked {
        let v = sqrt_principal(&self.v);
        let lk = log2_sum(&[self.lk - self.mag() / 2.0, rounding(&v)]);
        Tracked::new(v, lk)
    }

    pub fn div(&self, o: &Tracked) -> Tracked {
        let p = self.prec().max(o.prec());
        let v = Complex::with_val(p, &self.v / &o.v);
        let m2 = log2_abs(&o.v) - MAG_SLACK;
        let lk = log2_sum(&[
            1.0 + rounding(&v),
            1.0 + self.lk - m2,
            1.0 + o.lk + self.mag() - 2.0 * m2,
        ]);
        Tracked::new(v, lk)
    }

    /// Exact division by `2^n`.
    pub fn shr(&self, n: u32) -> Tracked {
        let mut v = self.v.clone();
        v >>= n;
        Tracked::new(v, self.lk - n as f64)
    }

    pub fn neg(&self) -> Tracked {
        Tracked::new(Complex::with_val(self.prec(), -&self.v), self.lk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpcx::{cx, propagate_error, OpKind, Operand};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-6
    }

    #[test]
    fn matches_kernel_rules() {
        let p = 128;
        let a = Tracked::new(cx(p, 1.5, 0.0), 3f64.log2());
        let b = Tracked::new(cx(p, 0.0, 0.75), 5f64.log2());
        let ops = [Operand::new(1.5, 3.0), Operand::new(0.75, 5.0)];
        // the rounding term grows with the modulus of the result
        let k = propagate_error(OpKind::Mul, &ops, p).unwrap().k;
        let prod = a.mul(&b);
        assert!(close(prod.lk, (k + 2.0 * (1.125 - 1.0)).log2()));
        let k = propagate_error(OpKind::Square, &ops[..1], p).unwrap().k;
        assert!(close(a.square().lk, (k + 2.0 * (2.25 - 1.0)).log2()));
        let k = propagate_error(OpKind::Add, &ops, p).unwrap().k;
        // the tracker also charges one rounding of the result, |1.5 + 0.75i| > 1
        let sum_mag = (1.5f64 * 1.5 + 0.75 * 0.75).sqrt();
        assert!(close(a.add(&b).lk, (k + sum_mag).log2()));
        let k = propagate_error(OpKind::Sqrt, &ops[..1], p).unwrap().k;
        assert!(close(a.sqrt().lk, (k + 1.5f64.sqrt()).log2()));
    }

    #[test]
    fn exact_values_stay_cheap() {
        let a = Tracked::exact(cx(64, 2.0, 0.0));
        assert_eq!(a.shr(1).lk, f64::NEG_INFINITY);
        assert_eq!(a.mul(&a).lk, 3.0);
        assert_eq!(a.bits(), 0);
    }

    #[test]
    fn division_by_small_values_is_charged() {
        let num = Tracked::new(cx(128, 1.0, 0.0), 0.0);
        let den = Tracked::new(cx(128, 1.0 / 1024.0, 0.0), 0.0);
        let q = num.div(&den);
        // about 2 |z1| k2 / |z2|^2 = 2^21
        assert!(q.lk > 20.0 && q.lk < 22.0);
    }

    #[test]
    fn log2_sum_basics() {
        assert_eq!(log2_sum(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!(close(log2_sum(&[1.0, 1.0]), 2.0));
        assert!(close(log2_sum(&[0.0, f64::NEG_INFINITY]), 0.0));
    }
}
