//! Seeded random arguments in the reduced domain.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::Complex;

use crate::mpcx::cx;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(z, tau)` with `tau` in the fundamental domain, `Im(tau)` in
/// `[im_lo, im_hi]`, `|Re z| <= 1/2` and `0 <= Im z <= Im(tau)/2`. The values
/// are doubles, stored exactly at precision `prec >= 53`.
pub fn reduced_point<R: Rng>(rng: &mut R, im_lo: f64, im_hi: f64, prec: u32) -> (Complex, Complex) {
    let tr: f64 = rng.gen_range(-0.5..=0.5);
    let lo = im_lo.max((1.0 - tr * tr).sqrt() * (1.0 + 1e-12));
    let ti: f64 = if lo < im_hi {
        rng.gen_range(lo..=im_hi)
    } else {
        lo
    };
    let zr: f64 = rng.gen_range(-0.5..=0.5);
    let zi: f64 = rng.gen_range(0.0..=ti / 2.0);
    (cx(prec, zr, zi), cx(prec, tr, ti))
}
