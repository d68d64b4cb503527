//! Full evaluation: reduce, compute at the reduced point, lift back.

use std::fmt;
use std::str::FromStr;

use rug::Complex;
use serde::{Deserialize, Serialize};

use crate::bundle::ThetaBundle;
use crate::error::{Result, ThetaError};
use crate::fast::{theta_uniform_full, theta_uniform_with, FastConfig};
use crate::mpcx::is_finite;
use crate::naive::{theta11_naive, theta_bundle_naive};
use crate::reduction::{lift_theta, reduce, ReductionCertificate};

/// Which algorithm evaluates the reduced point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    /// The uniform algorithm, which itself falls back to the series when
    /// `P` is small compared with `Im(tau)`.
    #[default]
    Auto,
    Naive,
    /// The Newton/duplication path even where the series would be cheaper.
    Fast,
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MethodChoice::Auto => "auto",
            MethodChoice::Naive => "naive",
            MethodChoice::Fast => "fast",
        })
    }
}

impl FromStr for MethodChoice {
    type Err = ThetaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MethodChoice::Auto),
            "naive" => Ok(MethodChoice::Naive),
            "fast" => Ok(MethodChoice::Fast),
            _ => Err(ThetaError::Parse(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub method: MethodChoice,
    pub fast: FastConfig,
    pub theta11: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            method: MethodChoice::Auto,
            fast: FastConfig::default(),
            theta11: false,
        }
    }
}

/// Values at the reduced point of `cert`, accurate to `bits`.
pub fn evaluate_reduced(
    cert: &ReductionCertificate,
    bits: u32,
    opts: &EvalOptions,
) -> Result<ThetaBundle> {
    let (z, tau) = (&cert.z_red, &cert.tau_red);
    match opts.method {
        MethodChoice::Naive => {
            let mut b = theta_bundle_naive(z, tau, bits)?;
            if opts.theta11 {
                b.th11_z = Some(theta11_naive(z, tau, bits)?);
            }
            Ok(b)
        }
        MethodChoice::Auto | MethodChoice::Fast => {
            let cfg = if opts.method == MethodChoice::Fast {
                FastConfig {
                    naive_ratio: 0.0,
                    ..opts.fast
                }
            } else {
                opts.fast
            };
            if opts.theta11 {
                theta_uniform_full(z, tau, bits, &cfg)
            } else {
                theta_uniform_with(z, tau, bits, &cfg)
            }
        }
    }
}

/// theta00, theta01, theta10 (and theta11 on request) at `(z, tau)` and the
/// theta-constants at `tau`, to absolute precision `P`, for any `z` and any
/// `tau` with positive imaginary part.
pub fn evaluate(
    z: &Complex,
    tau: &Complex,
    target_bits: u32,
    opts: &EvalOptions,
) -> Result<ThetaBundle> {
    evaluate_certified(z, tau, target_bits, opts).map(|r| r.0)
}

/// [`evaluate`] also returning the reduction that was applied.
pub fn evaluate_certified(
    z: &Complex,
    tau: &Complex,
    target_bits: u32,
    opts: &EvalOptions,
) -> Result<(ThetaBundle, ReductionCertificate)> {
    if target_bits < 2 {
        return Err(ThetaError::domain("precision must be at least 2 bits"));
    }
    if !is_finite(z) || !is_finite(tau) {
        return Err(ThetaError::domain("arguments must be finite"));
    }
    let mut cert = reduce(z, tau, target_bits + 128)?;
    let guard = cert.guard_bits();
    if guard > 64 {
        cert = reduce(z, tau, target_bits + guard + 128)?;
    }
    let red = evaluate_reduced(&cert, target_bits + cert.guard_bits(), opts)?;
    let out = lift_theta(&red, &cert, target_bits)?;
    if out.achieved_bits < target_bits {
        return Err(ThetaError::exhausted(format!(
            "reached {} of {target_bits} requested bits",
            out.achieved_bits
        )));
    }
    Ok((out, cert))
}
