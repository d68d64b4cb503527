//! The set of theta values produced by one evaluation.

use std::fmt;

use rug::Complex;

/// Characteristic of a theta function, `theta_ab` with `a, b` in {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ThetaIndex {
    T00,
    T01,
    T10,
    T11,
}

impl ThetaIndex {
    /// The three indices with nonzero theta-constants.
    pub const EVEN: [ThetaIndex; 3] = [ThetaIndex::T00, ThetaIndex::T01, ThetaIndex::T10];

    /// `(a, b)` as halves: the series is `sum exp(i pi (n + a/2)^2 tau + 2 i pi (n + a/2)(z + b/2))`.
    pub fn characteristic(self) -> (u8, u8) {
        match self {
            ThetaIndex::T00 => (0, 0),
            ThetaIndex::T01 => (0, 1),
            ThetaIndex::T10 => (1, 0),
            ThetaIndex::T11 => (1, 1),
        }
    }

    /// Position among [`ThetaIndex::EVEN`]; `None` for theta11.
    pub fn even_pos(self) -> Option<usize> {
        match self {
            ThetaIndex::T00 => Some(0),
            ThetaIndex::T01 => Some(1),
            ThetaIndex::T10 => Some(2),
            ThetaIndex::T11 => None,
        }
    }
}

impl fmt::Display for ThetaIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.characteristic();
        write!(f, "theta{a}{b}")
    }
}

/// How a bundle was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Naive,
    Fast,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::Fast => "fast",
        })
    }
}

/// theta00, theta01, theta10 (and optionally theta11) at `(z, tau)` and the
/// three nonzero theta-constants at `(0, tau)`.
///
/// `achieved_bits` is the absolute precision the producer certifies for every
/// value present. `work_bits` is the internal working precision and
/// `guard_bits_used` the part of it consumed by rounding-error growth.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaBundle {
    pub th00_z: Complex,
    pub th01_z: Complex,
    pub th10_z: Complex,
    pub th11_z: Option<Complex>,
    pub th00_0: Complex,
    pub th01_0: Complex,
    pub th10_0: Complex,
    pub achieved_bits: u32,
    pub work_bits: u32,
    pub guard_bits_used: u32,
    pub method: Method,
}

impl ThetaBundle {
    /// The six theta00/01/10 values in the order
    /// `th00_z, th01_z, th10_z, th00_0, th01_0, th10_0`.
    pub fn six(&self) -> [&Complex; 6] {
        [
            &self.th00_z,
            &self.th01_z,
            &self.th10_z,
            &self.th00_0,
            &self.th01_0,
            &self.th10_0,
        ]
    }

    /// theta_i(z) for `i` in 00, 01, 10.
    pub fn at_z(&self, i: ThetaIndex) -> Option<&Complex> {
        match i {
            ThetaIndex::T00 => Some(&self.th00_z),
            ThetaIndex::T01 => Some(&self.th01_z),
            ThetaIndex::T10 => Some(&self.th10_z),
            ThetaIndex::T11 => self.th11_z.as_ref(),
        }
    }

    /// theta_i(0); theta11(0) is identically zero and not stored.
    pub fn constant(&self, i: ThetaIndex) -> Option<&Complex> {
        match i {
            ThetaIndex::T00 => Some(&self.th00_0),
            ThetaIndex::T01 => Some(&self.th01_0),
            ThetaIndex::T10 => Some(&self.th10_0),
            ThetaIndex::T11 => None,
        }
    }

    pub fn six_mut(&mut self) -> [&mut Complex; 6] {
        [
            &mut self.th00_z,
            &mut self.th01_z,
            &mut self.th10_z,
            &mut self.th00_0,
            &mut self.th01_0,
            &mut self.th10_0,
        ]
    }
}

/// Names of the six values returned by [`ThetaBundle::six`].
pub const SIX_NAMES: [&str; 6] = ["th00_z", "th01_z", "th10_z", "th00_0", "th01_0", "th10_0"];
