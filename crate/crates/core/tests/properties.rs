//! Randomised invariants.

use proptest::prelude::*;
use rug::{Complex, Float};

use jtheta::bundle::ThetaIndex;
use jtheta::fast::is_reduced;
use jtheta::fseq::{agm_optimal_counted, f_infinity, f_infinity_work_bits, f_step, FState, DEFAULT_C1};
use jtheta::mpcx::{
    cx, exp_c, i_pi_times, log2_abs, log2_dist, propagate_error, sqrt_principal, OpKind, Operand,
};
use jtheta::naive::{theta_direct, theta_naive};
use jtheta::reduction::{reduce, Matrix, SigmaTable};

const P: u32 = 128;

/// `x` perturbed by at most `(k - 1/2) 2^-P` per part, then rounded to `P`
/// bits, so the result is within `k 2^-P` of `x` (requires `|x| < 1`).
fn approx(x: &Complex, k: f64, u: (f64, f64)) -> Complex {
    if k == 0.0 {
        return Complex::with_val(P, x);
    }
    let scale = (k - 0.5) * 2f64.powi(-(P as i32));
    let mut e = cx(4 * P, u.0 * scale, u.1 * scale);
    e += x;
    Complex::with_val(P, &e)
}

fn part_error(a: &Complex, b: &Complex) -> f64 {
    let d = Complex::with_val(4 * P, a - b);
    let re = d.real().to_f64().abs();
    let im = d.imag().to_f64().abs();
    re.max(im)
}

fn mod_error(a: &Complex, b: &Complex) -> f64 {
    log2_dist(a, b).exp2()
}

fn unit() -> impl Strategy<Value = (f64, f64)> {
    (-1.0..=1.0f64, -1.0..=1.0f64)
}

fn budget() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1.0..1024.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn propagated_budgets_bound_the_actual_error(
        op in 0usize..6,
        a in (-0.7..0.7f64, -0.7..0.7f64),
        b in (0.4..0.7f64, -0.3..0.3f64),
        k1 in budget(),
        k2 in budget(),
        u1 in unit(),
        u2 in unit(),
    ) {
        let hi = 4 * P;
        let ulp = 2f64.powi(-(P as i32));
        // exact operands carry bits below 2^-P
        let tail = Complex::with_val(hi, (Float::with_val(hi, 3).sqrt(), Float::with_val(hi, 5).sqrt())) >> (P + 3);
        let x = Complex::with_val(hi, cx(hi, a.0, a.1) + &tail);
        let y = Complex::with_val(hi, cx(hi, b.0, b.1) - &tail);
        let (k1, k2) = if k1 == 0.0 { (0.0, k2) } else { (k1, k2) };
        let x = if k1 == 0.0 { Complex::with_val(P, &x) } else { x };
        let y = if k2 == 0.0 { Complex::with_val(P, &y) } else { y };
        let xa = approx(&x, k1, u1);
        let ya = approx(&y, k2, u2);
        let mag = |v: &Complex, w: &Complex| log2_abs(v).max(log2_abs(w)).exp2() * (1.0 + 1e-12);
        let ox = Operand::new(mag(&x, &xa), k1);
        let oy = Operand::new(mag(&y, &ya), k2);
        let (kind, got, want, per_part) = match op {
            0 => (OpKind::Add, Complex::with_val(2 * P + 8, &xa + &ya), Complex::with_val(hi, &x + &y), true),
            1 => (OpKind::Mul, Complex::with_val(P, &xa * &ya), Complex::with_val(hi, &x * &y), true),
            2 => (OpKind::Square, Complex::with_val(P, xa.square_ref()), Complex::with_val(hi, x.square_ref()), true),
            3 => (OpKind::Div, Complex::with_val(P, &xa / &ya), Complex::with_val(hi, &x / &y), true),
            4 => (OpKind::Exp, exp_c(&xa), exp_c(&x), false),
            _ => (OpKind::Sqrt, sqrt_principal(&ya), sqrt_principal(&y), false),
        };
        let operands = match kind {
            OpKind::Add | OpKind::Mul | OpKind::Div => vec![ox, oy],
            OpKind::Square => vec![ox],
            OpKind::Exp => vec![Operand::new(mag(&exp_c(&x), &exp_c(&xa)), k1)],
            OpKind::Sqrt => vec![oy],
        };
        let k = propagate_error(kind, &operands, P).unwrap().k;
        let err = if per_part { part_error(&got, &want) } else { mod_error(&got, &want) };
        prop_assert!(err <= k * ulp, "{kind:?}: error {err:e} > {k} ulp");
    }
}

fn reduced_naive_point() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-0.5..=0.5f64, 0.0..=1.0f64, -0.5..=0.5f64, 0.9..6.0f64)
        .prop_filter("tau in the fundamental domain", |&(_, _, tr, ti)| tr * tr + ti * ti >= 1.0)
        .prop_map(|(zr, f, tr, ti)| (zr, f * ti / 2.0, tr, ti))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn naive_series_matches_term_by_term_sum(
        (zr, zi, tr, ti) in reduced_naive_point(),
        p in prop_oneof![Just(64u32), Just(256), Just(700)],
    ) {
        let z = cx(64, zr, zi);
        let tau = cx(64, tr, ti);
        let v = theta_naive(&z, &tau, p).unwrap();
        let pairs = [
            (ThetaIndex::T00, &z, &v.th00_z),
            (ThetaIndex::T01, &z, &v.th01_z),
            (ThetaIndex::T00, &cx(64, 0.0, 0.0), &v.th00_0),
            (ThetaIndex::T01, &cx(64, 0.0, 0.0), &v.th01_0),
        ];
        for (i, at, got) in pairs {
            let m = log2_abs(got);
            let want = theta_direct(i, at, &tau, p + 32 + m.max(0.0) as u32, Some(m)).unwrap();
            prop_assert!(log2_dist(got, &want) <= -(p as f64), "{i} at {z}, {tau}");
        }
    }

    #[test]
    fn reduction_lands_in_the_reduced_domain(
        zr in -30.0..30.0f64,
        zi in -10.0..10.0f64,
        tr in -20.0..20.0f64,
        ti in 0.02..5.0f64,
    ) {
        let z = cx(64, zr, zi);
        let tau = cx(64, tr, ti);
        let c = reduce(&z, &tau, 200).unwrap();
        prop_assert!(is_reduced(&c.z_red, &c.tau_red), "{} {}", c.z_red, c.tau_red);
        prop_assert_eq!(c.matrix.det(), 1);
        let acted = c.matrix.act(&tau, 200);
        prop_assert!(log2_dist(&acted, &c.tau_red) <= -100.0);
    }

    #[test]
    fn sigma_composes_along_products(word in proptest::collection::vec(0u8..3, 1..10)) {
        let gens = [Matrix::S, Matrix::T, Matrix::T.checked_mul(&Matrix::S).unwrap()];
        let mut g = Matrix::IDENTITY;
        for &w in &word {
            let h = gens[w as usize];
            let prod = g.checked_mul(&h).unwrap();
            for i in ThetaIndex::EVEN {
                let composed = SigmaTable::apply(&h, SigmaTable::apply(&g, i));
                prop_assert_eq!(SigmaTable::apply(&prod, i), composed);
            }
            g = prod;
        }
    }

    #[test]
    fn theta10_constant_is_its_leading_term_for_large_im_tau(tr in -0.5..=0.5f64) {
        // theta10(0, tau) = 2 q^(1/4) (1 + q^2 + ...), q = exp(i pi tau)
        let p = 256;
        let tau = cx(p, tr, 40.0);
        let v = jtheta::naive::theta10_naive(&cx(p, 0.0, 0.0), &tau, p).unwrap().1;
        let mut quarter = i_pi_times(&tau);
        quarter >>= 2u32;
        let lead = Complex::with_val(p + 32, exp_c(&quarter) * 2u32);
        prop_assert!(log2_dist(&v, &lead) <= -(p as f64));
    }

    #[test]
    fn iteration_counts_stay_below_the_cap(
        br in 0.3..1.0f64,
        bi in -0.5..0.5f64,
        k in prop_oneof![Just(8u32), Just(10), Just(12)],
    ) {
        let p = 1u32 << k;
        let w = f_infinity_work_bits(p, DEFAULT_C1);
        let cap = k + 64;
        let agm = agm_optimal_counted(&cx(w, 1.0, 0.0), &cx(w, br, bi), p).unwrap();
        prop_assert!(agm.iterations <= cap);
        let f = f_infinity(&cx(w, 1.0, 0.0), &cx(w, br, -bi), &cx(w, 1.0, 0.0), &cx(w, br, bi), p, DEFAULT_C1).unwrap();
        prop_assert!(f.iterations <= cap);
    }

    #[test]
    fn f_sequence_converges_quadratically(br in 0.3..1.0f64, bi in -0.5..0.5f64) {
        // z' - t' = (sqrt z - sqrt t)^2 / 2 = (z - t)^2 / (2 (sqrt z + sqrt t)^2)
        let w = 600;
        let mut s = FState::new(cx(w, 1.0, 0.0), cx(w, br, bi), cx(w, 1.0, 0.0), cx(w, br, bi));
        let gap = |s: &FState| log2_dist(&s.z, &s.t);
        for _ in 0..8 {
            let before = gap(&s);
            s = f_step(&s).unwrap();
            let after = gap(&s);
            if before < -2.0 && before > -250.0 {
                prop_assert!(after <= 2.0 * before - 2.0, "{before} -> {after}");
            }
        }
    }
}
