//! Argument reduction and lifting.
//!
//! `tau` is brought into the fundamental domain by an element of `SL2(Z)`
//! found with Gauss's lattice reduction, then `z / (c tau + d)` is reduced
//! modulo the lattice `Z + tau Z` and by parity to `|Re z| <= 1/2`,
//! `0 <= Im z <= Im(tau)/2`. Values computed at the reduced point are lifted
//! back with the quasi-periodicity factors and the modular transformation
//!
//! ```text
//! theta_i(z/(c tau + d), gamma tau) = zeta sqrt(c tau + d) exp(i pi c z^2/(c tau + d)) theta_sigma(i)(z, tau)
//! ```
//!
//! where the eighth root of unity `zeta` is found by a low-precision probe.

use rug::{Assign, Complex, Float};

use crate::bundle::{ThetaBundle, ThetaIndex};
use crate::error::{Result, ThetaError};
use crate::mpcx::{exp_c, i_pi_times, log2_abs, prec_of, sqrt_principal, with_prec};
use crate::naive::{theta11_naive, theta_direct};

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const PI: f64 = std::f64::consts::PI;

/// Upper bound on reduction steps; each S step at least doubles `Im(tau)`
/// after a few rounds, so this is never reached for finite inputs.
const MAX_REDUCTION_STEPS: u32 = 100_000;

/// Relative bits of the first eighth-root probe; retried at 64 and 128.
pub const PROBE_BITS: u32 = 32;

/// Integer matrix `[[a, b], [c, d]]` with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Matrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

fn overflow() -> ThetaError {
    ThetaError::domain("reduction matrix entries overflow 64 bits")
}

impl Matrix {
    pub const IDENTITY: Matrix = Matrix {
        a: 1,
        b: 0,
        c: 0,
        d: 1,
    };
    pub const S: Matrix = Matrix {
        a: 0,
        b: -1,
        c: 1,
        d: 0,
    };
    pub const T: Matrix = Matrix {
        a: 1,
        b: 1,
        c: 0,
        d: 1,
    };

    pub fn det(&self) -> i128 {
        self.a as i128 * self.d as i128 - self.b as i128 * self.c as i128
    }

    pub fn checked_mul(&self, o: &Matrix) -> Option<Matrix> {
        let dot = |x: i64, y: i64, u: i64, v: i64| x.checked_mul(y)?.checked_add(u.checked_mul(v)?);
        Some(Matrix {
            a: dot(self.a, o.a, self.b, o.c)?,
            b: dot(self.a, o.b, self.b, o.d)?,
            c: dot(self.c, o.a, self.d, o.c)?,
            d: dot(self.c, o.b, self.d, o.d)?,
        })
    }

    pub fn neg(&self) -> Matrix {
        Matrix {
            a: -self.a,
            b: -self.b,
            c: -self.c,
            d: -self.d,
        }
    }

    /// `-M` when needed so that `c > 0`, or `c = 0` and `d > 0`.
    pub fn normalized(&self) -> Matrix {
        if self.c < 0 || (self.c == 0 && self.d < 0) {
            self.neg()
        } else {
            *self
        }
    }

    /// `(a tau + b) / (c tau + d)` at precision `p`.
    pub fn act(&self, tau: &Complex, p: u32) -> Complex {
        let num = Complex::with_val(p, tau * self.a) + self.b;
        let den = self.automorphy(tau, p);
        Complex::with_val(p, num / den)
    }

    /// `c tau + d` at precision `p`.
    pub fn automorphy(&self, tau: &Complex, p: u32) -> Complex {
        Complex::with_val(p, Complex::with_val(p, tau * self.c) + self.d)
    }

    fn parity(&self) -> [u8; 4] {
        [self.a, self.b, self.c, self.d].map(|x| x.rem_euclid(2) as u8)
    }
}

/// The permutation `sigma` of (00, 01, 10) attached to each class of
/// `SL2(Z)` modulo 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigmaTable;

use ThetaIndex::{T00, T01, T10};

/// Rows `(a, b, c, d) mod 2 -> (sigma(00), sigma(01), sigma(10))`.
const SIGMA_ROWS: [([u8; 4], [ThetaIndex; 3]); 6] = [
    ([1, 0, 0, 1], [T00, T01, T10]),
    ([1, 1, 0, 1], [T01, T00, T10]),
    ([1, 0, 1, 1], [T10, T01, T00]),
    ([0, 1, 1, 0], [T00, T10, T01]),
    ([1, 1, 1, 0], [T10, T00, T01]),
    ([0, 1, 1, 1], [T01, T10, T00]),
];

impl SigmaTable {
    pub fn rows() -> &'static [([u8; 4], [ThetaIndex; 3]); 6] {
        &SIGMA_ROWS
    }

    /// `(sigma(00), sigma(01), sigma(10))` for `m`.
    pub fn lookup(m: &Matrix) -> [ThetaIndex; 3] {
        let p = m.parity();
        SIGMA_ROWS
            .iter()
            .find(|r| r.0 == p)
            .map(|r| r.1)
            .expect("every determinant-one matrix has one of the six parity classes")
    }

    /// `sigma(i)`; theta11 is fixed.
    pub fn apply(m: &Matrix, i: ThetaIndex) -> ThetaIndex {
        match i.even_pos() {
            Some(k) => Self::lookup(m)[k],
            None => ThetaIndex::T11,
        }
    }
}

/// Everything needed to lift values from the reduced point back to `(z, tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionCertificate {
    /// Normalized: `c > 0`, or `c = 0` and `d > 0`.
    pub matrix: Matrix,
    pub shift_a: i64,
    pub shift_b: i64,
    pub z_red: Complex,
    pub tau_red: Complex,
    /// `z / (c tau + d) = (-1)^negated (z_red) + shift_a tau_red + shift_b`.
    pub negated_z: bool,
    /// The original arguments, from which `sqrt(c tau + d)` and
    /// `exp(i pi c z^2 / (c tau + d))` are computed at lift time.
    pub z: Complex,
    pub tau: Complex,
}

fn floor_half_up(x: &Float) -> Result<i64> {
    let mut f = Float::with_val(x.prec(), x + 0.5f64);
    f.floor_mut();
    f.to_integer()
        .and_then(|i| i.to_i64())
        .ok_or_else(|| ThetaError::domain("reduction shift does not fit in 64 bits"))
}

/// `tau_red = M tau` in the closed fundamental domain, with `M` normalized.
///
/// Ties follow the classical convention: `Re = 1/2` goes to `-1/2`, and points
/// on the unit circle with positive real part are sent through S. `tau_red`
/// carries the precision of `tau`.
pub fn reduce_tau(tau: &Complex) -> Result<(Complex, Matrix)> {
    reduce_tau_prec(tau, prec_of(tau))
}

/// [`reduce_tau`] with `tau_red` computed at precision `out_prec`.
pub fn reduce_tau_prec(tau: &Complex, out_prec: u32) -> Result<(Complex, Matrix)> {
    if !(tau.imag().is_finite() && tau.real().is_finite()) || !(tau.imag().to_f64() > 0.0) {
        return Err(ThetaError::domain("tau must have positive imaginary part"));
    }
    let wp = prec_of(tau) + 64;
    let mut t = with_prec(tau, wp);
    let mut m = Matrix::IDENTITY;
    for _ in 0..MAX_REDUCTION_STEPS {
        let n = floor_half_up(t.real())?;
        if n != 0 {
            t -= n;
            let shift = Matrix {
                a: 1,
                b: n.checked_neg().ok_or_else(overflow)?,
                c: 0,
                d: 1,
            };
            m = shift.checked_mul(&m).ok_or_else(overflow)?;
        }
        // points within rounding of the unit circle count as on it, otherwise
        // S could bounce between x + iy and -x + iy forever
        let mut r2 = Float::with_val(wp, t.norm_ref());
        r2 -= 1u32;
        let on_circle = r2.is_zero() || r2.get_exp().is_some_and(|e| e < -(wp as i32) + 32);
        let flip = if on_circle {
            t.real().to_f64() > (-(wp as f64) + 32.0).exp2()
        } else {
            r2.is_sign_negative()
        };
        if !flip {
            let m = m.normalized();
            let red = m.act(tau, out_prec.max(wp));
            return Ok((with_prec(&red, out_prec), m));
        }
        t = Complex::with_val(wp, t.recip_ref());
        t = -t;
        m = Matrix::S.checked_mul(&m).ok_or_else(overflow)?;
    }
    Err(ThetaError::NonConvergence {
        what: "lattice reduction".into(),
        iterations: MAX_REDUCTION_STEPS,
    })
}

/// `z = (-1)^negated z_red + shift_a tau + shift_b` with `|Re z_red| <= 1/2`
/// and `0 <= Im z_red <= Im(tau)/2`. Returns `(z_red, shift_a, shift_b, negated)`.
pub fn reduce_z(z: &Complex, tau: &Complex) -> Result<(Complex, i64, i64, bool)> {
    let p = prec_of(z).max(prec_of(tau));
    let ratio = Float::with_val(p, z.imag() / tau.imag());
    let a = floor_half_up(&ratio)?;
    let mut r = Complex::with_val(p, z - Complex::with_val(p, tau * a));
    let b = floor_half_up(r.real())?;
    r -= b;
    let negated = r.imag().is_sign_negative() && !r.imag().is_zero();
    if negated {
        r = -r;
    }
    Ok((r, a, b, negated))
}

/// Reduce `(z, tau)` completely; the reduced arguments are computed at
/// precision `out` (treating `z` and `tau` as exact).
pub fn reduce(z: &Complex, tau: &Complex, out: u32) -> Result<ReductionCertificate> {
    let p = out + 64;
    let (tau_red, m) = reduce_tau_prec(tau, p)?;
    let zm = Complex::with_val(p, z / m.automorphy(tau, p));
    let (z_red, a, b, negated) = reduce_z(&zm, &tau_red)?;
    Ok(ReductionCertificate {
        matrix: m,
        shift_a: a,
        shift_b: b,
        z_red: with_prec(&z_red, out),
        tau_red: with_prec(&tau_red, out),
        negated_z: negated,
        z: z.clone(),
        tau: tau.clone(),
    })
}

impl ReductionCertificate {
    pub fn is_trivial(&self) -> bool {
        self.matrix == Matrix::IDENTITY && self.shift_a == 0 && self.shift_b == 0 && !self.negated_z
    }

    /// log2 of the factor multiplying theta_i(z_red, tau_red) to give
    /// theta_sigma(i)(z, tau), up to the eighth root of unity.
    pub fn log2_gain_z(&self) -> f64 {
        let c = PI * LOG2_E;
        let a = self.shift_a as f64;
        let s = if self.negated_z { -1.0 } else { 1.0 };
        let quasi =
            c * (a * a * self.tau_red.imag().to_f64() + 2.0 * a * s * self.z_red.imag().to_f64());
        quasi + self.log2_gain_modular(true)
    }

    /// log2 of the factor taking theta-constants at `tau_red` to `tau`.
    pub fn log2_gain_0(&self) -> f64 {
        self.log2_gain_modular(false)
    }

    fn log2_gain_modular(&self, with_z: bool) -> f64 {
        if self.matrix == Matrix::IDENTITY {
            return 0.0;
        }
        let p = 64;
        let e = self.matrix.automorphy(&self.tau, p);
        let mut g = -log2_abs(&e) / 2.0;
        if with_z && self.matrix.c != 0 {
            let x = Complex::with_val(p, self.z.square_ref()) * self.matrix.c;
            let x = Complex::with_val(p, x / &e);
            // |exp(i pi x)|^-1 = exp(pi Im x)
            g += PI * LOG2_E * x.imag().to_f64();
        }
        g
    }

    /// Extra bits the reduced values need so that lifted values reach a given
    /// absolute precision: the integer part of the lifted values plus 4.
    pub fn guard_bits(&self) -> u32 {
        let g = self.log2_gain_z().max(self.log2_gain_0()).max(0.0);
        g.ceil() as u32 + 4
    }
}

/// Sign picked up under `z -> z + a tau + b` beyond the common exponential
/// factor: theta01 gets `(-1)^a`, theta10 `(-1)^b`, theta11 both.
fn shift_sign(i: ThetaIndex, a: i64, b: i64) -> bool {
    let (ca, cb) = i.characteristic();
    let e = (cb as i64 * a + ca as i64 * b).rem_euclid(2);
    e == 1
}

fn eighth_root(k: i32, p: u32) -> Complex {
    let mut arg = Complex::with_val(p, (k as f64) / 4.0);
    arg = i_pi_times(&arg);
    exp_c(&arg)
}

/// Index `k` with `ratio ~ exp(i pi k / 4)`, provided the match is clean:
/// the modulus is close to 1 and the angle close to a multiple of pi/4.
fn nearest_eighth_root(ratio: &Complex, tol: f64) -> Option<i32> {
    let re = ratio.real().to_f64();
    let im = ratio.imag().to_f64();
    let m = (re * re + im * im).sqrt();
    if !((m - 1.0).abs() <= tol) {
        return None;
    }
    let ang = im.atan2(re) / (PI / 4.0);
    let k = ang.round();
    if (ang - k).abs() * PI / 4.0 > tol {
        return None;
    }
    Some((k as i32).rem_euclid(8))
}

/// `zeta` with `expected = zeta * probe`, where `probe(bits)` approximates the
/// value at the original argument to `bits` relative bits.
fn find_zeta(expected: &Complex, mut probe: impl FnMut(u32) -> Result<Complex>) -> Result<i32> {
    for bits in [PROBE_BITS, 2 * PROBE_BITS, 4 * PROBE_BITS] {
        let pr = probe(bits)?;
        if pr.is_zero() {
            continue;
        }
        let r = Complex::with_val(64, expected / &pr);
        // the probe is good to 2^-bits; accept only with a wide margin to the
        // neighbouring roots, which sit 0.76 away
        let tol = ((-(bits as f64) + 8.0).exp2()).min(0.19);
        if let Some(k) = nearest_eighth_root(&r, tol) {
            return Ok(k);
        }
    }
    Err(ThetaError::exhausted(
        "eighth-root probe could not separate the candidates",
    ))
}

/// Lift a bundle computed at `(cert.z_red, cert.tau_red)` back to
/// `(cert.z, cert.tau)`.
///
/// The reduced values must be accurate to `target_bits + cert.guard_bits()`;
/// the returned `achieved_bits` accounts for the amplification.
pub fn lift_theta(
    red: &ThetaBundle,
    cert: &ReductionCertificate,
    target_bits: u32,
) -> Result<ThetaBundle> {
    if cert.is_trivial() {
        return Ok(red.clone());
    }
    let gz = cert.log2_gain_z();
    let g0 = cert.log2_gain_0();
    let w = red
        .work_bits
        .max(target_bits + gz.max(g0).max(0.0).ceil() as u32 + 32)
        + 16;
    let (a, b) = (cert.shift_a, cert.shift_b);
    let s_neg = cert.negated_z;

    // values at z' = z / (c tau + d), tau' = tau_red
    let zs = if s_neg {
        Complex::with_val(w, -&cert.z_red)
    } else {
        with_prec(&cert.z_red, w)
    };
    let tau_r = with_prec(&cert.tau_red, w);
    let quasi = if a != 0 {
        // exp(-i pi a^2 tau' - 2 i pi a zs)
        let mut x = Complex::with_val(w, &tau_r * ((a as f64) * (a as f64)));
        x += Complex::with_val(w, &zs * (2.0 * a as f64));
        x = -x;
        Some(exp_c(&i_pi_times(&x)))
    } else {
        None
    };
    let at_zprime = |i: ThetaIndex| -> Option<Complex> {
        let v = red.at_z(i)?;
        let mut v = with_prec(v, w);
        if i == ThetaIndex::T11 && s_neg {
            v = -v;
        }
        if let Some(q) = &quasi {
            v *= q;
        }
        if shift_sign(i, a, b) {
            v = -v;
        }
        Some(v)
    };

    let m = cert.matrix;
    let mut out = red.clone();
    out.work_bits = w;
    if m == Matrix::IDENTITY {
        for i in ThetaIndex::EVEN {
            let v = at_zprime(i).expect("even values are always present");
            set_z(&mut out, i, v);
            let c = with_prec(red.constant(i).unwrap(), w);
            set_0(&mut out, i, c);
        }
        out.th11_z = at_zprime(ThetaIndex::T11);
    } else {
        let tau = with_prec(&cert.tau, w);
        let z = with_prec(&cert.z, w);
        let e = m.automorphy(&tau, w);
        let sqrt_e = sqrt_principal(&e);
        // exp(i pi c z^2 / (c tau + d))
        let mut x = Complex::with_val(w, z.square_ref()) * m.c;
        x = Complex::with_val(w, x / &e);
        let f = exp_c(&i_pi_times(&x));
        let sf = Complex::with_val(w, &sqrt_e * &f);
        let sigma = SigmaTable::lookup(&m);
        for (pos, i) in ThetaIndex::EVEN.iter().enumerate() {
            let j = sigma[pos];
            let c_red = with_prec(red.constant(*i).unwrap(), w);
            let cand = Complex::with_val(w, &c_red / &sqrt_e);
            let mag = log2_abs(&cand);
            let k = find_zeta(&cand, |bits| {
                theta_direct(j, &Complex::new(64), &cert.tau, bits, Some(mag))
            })?;
            let zeta = eighth_root(k, w);
            let den0 = Complex::with_val(w, &zeta * &sqrt_e);
            set_0(&mut out, j, Complex::with_val(w, &c_red / &den0));
            let den = Complex::with_val(w, &zeta * &sf);
            let v = at_zprime(*i).expect("even values are always present");
            set_z(&mut out, j, Complex::with_val(w, &v / &den));
        }
        if let Some(v) = at_zprime(ThetaIndex::T11) {
            let k = theta11_zeta(cert, &e, &sqrt_e)?;
            let zeta = eighth_root(k, w);
            let den = Complex::with_val(w, &zeta * &sf);
            out.th11_z = Some(Complex::with_val(w, &v / &den));
        }
    }
    let loss = gz.max(g0).max(0.0).ceil() as u32 + 2;
    out.achieved_bits = red.achieved_bits.saturating_sub(loss);
    out.guard_bits_used = red.guard_bits_used + loss;
    Ok(out)
}

/// The eighth root for theta11 does not depend on `z`; it is read off at the
/// point mapping to `z' = 1/4`, where theta11 is far from zero.
fn theta11_zeta(cert: &ReductionCertificate, e: &Complex, sqrt_e: &Complex) -> Result<i32> {
    let p = 128;
    let quarter = Complex::with_val(p, 0.25);
    let tau_r = with_prec(&cert.tau_red, p);
    let at_red = theta11_naive(&quarter, &tau_r, p)?;
    let e = with_prec(e, p);
    let zp = Complex::with_val(p, &e * 0.25f64);
    // f(zp) = exp(i pi c zp^2 / e) = exp(i pi c e / 16)
    let x = Complex::with_val(p, &e * cert.matrix.c) / 16u32;
    let f = exp_c(&i_pi_times(&Complex::with_val(p, x)));
    let mut cand = Complex::with_val(p, &at_red / &with_prec(sqrt_e, p));
    cand /= &f;
    let mag = log2_abs(&cand);
    find_zeta(&cand, |bits| {
        theta_direct(ThetaIndex::T11, &zp, &cert.tau, bits, Some(mag))
    })
}

fn set_z(b: &mut ThetaBundle, i: ThetaIndex, v: Complex) {
    match i {
        ThetaIndex::T00 => b.th00_z = v,
        ThetaIndex::T01 => b.th01_z = v,
        ThetaIndex::T10 => b.th10_z = v,
        ThetaIndex::T11 => b.th11_z = Some(v),
    }
}

fn set_0(b: &mut ThetaBundle, i: ThetaIndex, v: Complex) {
    match i {
        ThetaIndex::T00 => b.th00_0.assign(&v),
        ThetaIndex::T01 => b.th01_0.assign(&v),
        ThetaIndex::T10 => b.th10_0.assign(&v),
        ThetaIndex::T11 => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::ThetaBundle;
    use crate::mpcx::{cx, log2_dist};
    use crate::naive::{theta10_naive, theta_bundle_naive, theta_naive};

    fn parity_mul(x: [u8; 4], y: [u8; 4]) -> [u8; 4] {
        let m = |u: [u8; 4]| Matrix {
            a: u[0] as i64,
            b: u[1] as i64,
            c: u[2] as i64,
            d: u[3] as i64,
        };
        m(x).checked_mul(&m(y)).unwrap().parity()
    }

    fn index_pos(i: ThetaIndex) -> usize {
        i.even_pos().unwrap()
    }

    #[test]
    fn sigma_table_composes() {
        // theta_i(g1 g2 tau) ~ theta_sigma1(i)(g2 tau) ~ theta_sigma2(sigma1(i))(tau)
        for (p1, s1) in SigmaTable::rows() {
            for (p2, s2) in SigmaTable::rows() {
                let p = parity_mul(*p1, *p2);
                let row = SigmaTable::rows().iter().find(|r| r.0 == p).unwrap();
                for k in 0..3 {
                    assert_eq!(row.1[k], s2[index_pos(s1[k])]);
                }
            }
        }
    }

    #[test]
    fn sigma_of_generators() {
        assert_eq!(SigmaTable::lookup(&Matrix::T), [T01, T00, T10]);
        assert_eq!(SigmaTable::lookup(&Matrix::S), [T00, T10, T01]);
        assert_eq!(SigmaTable::lookup(&Matrix::S.neg()), [T00, T10, T01]);
        assert_eq!(
            SigmaTable::apply(&Matrix::S, ThetaIndex::T11),
            ThetaIndex::T11
        );
    }

    #[test]
    fn reduce_tau_examples() {
        let (t, m) = reduce_tau(&cx(64, 0.0, 2.0)).unwrap();
        assert_eq!(m, Matrix::IDENTITY);
        assert_eq!(t, cx(64, 0.0, 2.0));
        let (t, m) = reduce_tau(&cx(64, 0.75, 2.0)).unwrap();
        assert_eq!(
            m,
            Matrix {
                a: 1,
                b: -1,
                c: 0,
                d: 1
            }
        );
        assert_eq!(t, cx(64, -0.25, 2.0));
        let tau = cx(128, 0.1, 0.1);
        let (t, m) = reduce_tau(&tau).unwrap();
        assert_eq!(m.det(), 1);
        assert!(log2_dist(&t, &m.act(&tau, 128)) < -120.0);
        assert!(t.real().to_f64().abs() <= 0.5);
        assert!(Complex::with_val(64, t.abs_ref()).real().to_f64() >= 1.0);
        // hand reduction: S gives -5 + 5i, T^5 gives 5i
        assert!(log2_dist(&t, &cx(128, 0.0, 5.0)) < -40.0);
        assert!(matches!(
            reduce_tau(&cx(64, 0.3, 0.0)),
            Err(ThetaError::Domain(_))
        ));
        assert!(matches!(
            reduce_tau(&cx(64, 0.3, -1.0)),
            Err(ThetaError::Domain(_))
        ));
    }

    #[test]
    fn reduce_tau_ties() {
        let (t, _) = reduce_tau(&cx(64, 0.5, 2.0)).unwrap();
        assert_eq!(t, cx(64, -0.5, 2.0));
        let (t, _) = reduce_tau(&cx(64, -0.5, 2.0)).unwrap();
        assert_eq!(t, cx(64, -0.5, 2.0));
        // i is a fixed point of S and stays put
        let (t, m) = reduce_tau(&cx(64, 0.0, 1.0)).unwrap();
        assert_eq!(m, Matrix::IDENTITY);
        assert_eq!(t, cx(64, 0.0, 1.0));
        // on the unit circle, S maps x + iy to -x + iy
        let (t, m) = reduce_tau(&cx(64, 0.28, 0.96)).unwrap();
        assert!(t.real().to_f64() <= 0.0 || m == Matrix::IDENTITY);
        assert!(log2_dist(&t, &cx(64, -0.28, 0.96)) < -50.0 || m == Matrix::IDENTITY);
    }

    #[test]
    fn reduce_z_examples() {
        let i = cx(64, 0.0, 1.0);
        let (r, a, b, n) = reduce_z(&cx(64, 0.6, 0.0), &i).unwrap();
        assert_eq!((a, b, n), (0, 1, false));
        assert!(log2_dist(&r, &cx(64, -0.4, 0.0)) < -50.0);
        let (r, a, b, n) = reduce_z(&cx(64, 0.0, 0.0), &i).unwrap();
        assert_eq!((a, b, n), (0, 0, false));
        assert!(r.is_zero());
        let (r, a, b, n) = reduce_z(&cx(64, 0.3, 1.4), &cx(64, 0.0, 2.0)).unwrap();
        assert_eq!((a, b, n), (1, 0, true));
        assert!(log2_dist(&r, &cx(64, -0.3, 0.6)) < -50.0);
    }

    #[test]
    fn quasi_periodicity_residual() {
        // theta(z + tau, tau) = exp(-i pi tau - 2 i pi z) theta(z, tau) at 128 bits
        let p = 128;
        let tau = cx(p, 0.0, 2.0);
        let z = cx(p, 0.3, 1.4);
        let (zr, a, _, neg) = reduce_z(&z, &tau).unwrap();
        assert_eq!(a, 1);
        let zs = if neg { Complex::with_val(p, -&zr) } else { zr };
        let direct = theta_direct(ThetaIndex::T00, &z, &tau, 120, None).unwrap();
        let at_red = theta_naive(&zs, &tau, p).unwrap().th00_z;
        let mut x = Complex::with_val(p, &tau + Complex::with_val(p, &zs * 2u32));
        x = -x;
        let lifted = Complex::with_val(p, at_red * exp_c(&i_pi_times(&x)));
        assert!(log2_dist(&lifted, &direct) - log2_abs(&direct) < -110.0);
    }

    #[test]
    fn modular_relation_under_s() {
        // theta00(0, -1/tau)^2 = -i tau theta00(0, tau)^2
        let p = 256;
        let tau = cx(p, 0.1, 1.2);
        let st = Matrix::S.act(&tau, p);
        let a = theta_naive(&cx(p, 0.0, 0.0), &st, p).unwrap().th00_0;
        let b = theta_naive(&cx(p, 0.0, 0.0), &tau, p).unwrap().th00_0;
        let lhs = Complex::with_val(p, a.square_ref());
        let mut rhs = Complex::with_val(p, b.square_ref()) * &tau;
        rhs.mul_i_mut(true);
        assert!(log2_dist(&lhs, &Complex::with_val(p, rhs)) < -(p as f64) + 8.0);
    }

    fn full_naive(z: &Complex, tau: &Complex, p: u32) -> ThetaBundle {
        let mut b = theta_bundle_naive(z, tau, p).unwrap();
        b.th11_z = Some(theta11_naive(z, tau, p).unwrap());
        b
    }

    /// Term-by-term summation at the unreduced point.
    fn direct(i: ThetaIndex, z: &Complex, tau: &Complex, p: u32, like: &Complex) -> Complex {
        let mag = log2_abs(like);
        theta_direct(i, z, tau, p + 32 + mag.max(0.0) as u32, Some(mag)).unwrap()
    }

    fn check_lift(z: &Complex, tau: &Complex, p: u32) {
        let cert = reduce(z, tau, 2 * p).unwrap();
        let red = full_naive(&cert.z_red, &cert.tau_red, p + cert.guard_bits());
        let lifted = lift_theta(&red, &cert, p).unwrap();
        assert!(lifted.achieved_bits >= p);
        let zero = Complex::new(64);
        for i in [
            ThetaIndex::T00,
            ThetaIndex::T01,
            ThetaIndex::T10,
            ThetaIndex::T11,
        ] {
            let g = lifted.at_z(i).unwrap();
            let w = direct(i, z, tau, p, g);
            assert!(
                log2_dist(g, &w) <= -(p as f64),
                "{i} at z, {:?} got {} want {}",
                cert.matrix,
                Complex::with_val(40, g),
                Complex::with_val(40, &w)
            );
            if let Some(g) = lifted.constant(i) {
                let w = direct(i, &zero, tau, p, g);
                assert!(
                    log2_dist(g, &w) <= -(p as f64),
                    "{i} at 0, {:?}",
                    cert.matrix
                );
            }
        }
    }

    #[test]
    fn lift_identity_is_unchanged() {
        let z = cx(64, 0.1, 0.2);
        let tau = cx(64, 0.2, 1.3);
        let cert = reduce(&z, &tau, 128).unwrap();
        assert!(cert.is_trivial());
        let b = full_naive(&z, &tau, 128);
        assert_eq!(lift_theta(&b, &cert, 128).unwrap(), b);
    }

    #[test]
    fn lift_matches_direct_naive() {
        // a = 1 shift at tau = 2i
        check_lift(&cx(64, 0.1, 1.9), &cx(64, 0.0, 2.0), 256);
        // pure integer and parity shifts
        check_lift(&cx(64, 0.7, -0.3), &cx(64, 0.3, 1.1), 256);
        // nontrivial modular transformations whose source stays in the naive domain
        check_lift(&cx(64, 0.1, 0.05), &cx(64, 0.45, 0.6), 256);
        check_lift(&cx(64, -0.2, 0.1), &cx(64, 0.2, 0.5), 256);
        check_lift(&cx(64, 0.3, 0.2), &cx(64, 1.4, 0.8), 256);
        check_lift(&cx(64, 0.05, 0.0), &cx(64, -0.5, 0.4), 256);
    }

    #[test]
    fn theta10_constants_at_i() {
        // theta10(0, i) = theta01(0, i) through S
        let p = 256;
        let i = cx(p, 0.0, 1.0);
        let (_, t10_0) = theta10_naive(&cx(p, 0.0, 0.0), &i, p).unwrap();
        let v = theta_naive(&cx(p, 0.0, 0.0), &i, p).unwrap();
        assert!(log2_dist(&t10_0, &v.th01_0) < -(p as f64) + 2.0);
    }
}
