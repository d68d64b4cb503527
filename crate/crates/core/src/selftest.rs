//! Self-verification on seeded random reduced points.
//!
//! Each case runs the fast path (forced, even where the series would be
//! chosen) and checks it against the naive series, against the classical
//! identities, and against the iteration bounds of the AGM and `F^inf`.
//! The report contains no timings, so a fixed seed gives identical text.

use std::fmt::Write as _;

use rug::Complex;

use crate::batch::{map_points, map_points_sequential};
use crate::bundle::ThetaBundle;
use crate::error::Result;
use crate::fast::{
    frak_f_squared, seed_quotients, theta_uniform_traced, FastConfig, UniformParams,
};
use crate::fseq::{agm_optimal_counted, DEFAULT_C1, ITERATION_SLACK};
use crate::identities::{jacobi_residual, quasi_periodicity_residual, variety_residual};
use crate::mpcx::{log2_abs, log2_dist};
use crate::naive::theta_bundle_naive;
use crate::sample::{reduced_point, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestConfig {
    pub seed: u64,
    pub cases: u32,
    /// Target precision `P` in bits.
    pub prec: u32,
    pub fast: FastConfig,
    /// Run the cases on the rayon pool (only with the `parallel` feature).
    pub parallel: bool,
    /// Add `2^-P` to `theta00(0, tau)` before the identity checks.
    pub inject_fault: bool,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            seed: 1,
            cases: 8,
            prec: 256,
            fast: FastConfig::with_p0(crate::fast::TEST_P0),
            parallel: false,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// log2 of the measured quantity (a residual or an iteration count).
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, bound: f64) -> Self {
        Check {
            name,
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub index: u32,
    pub z: Complex,
    pub tau: Complex,
    /// Checks in a fixed order; an evaluation error is recorded instead.
    pub outcome: std::result::Result<Vec<Check>, String>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(c) if c.iter().all(|c| c.pass))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub config: SelftestConfig,
    pub cases: Vec<CaseReport>,
}

impl SelftestReport {
    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| !c.passed()).count()
    }

    pub fn render(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "selftest seed={} cases={} prec={} p0={} fault={}",
            c.seed, c.cases, c.prec, c.fast.p0, c.inject_fault
        );
        for case in &self.cases {
            let _ = writeln!(
                s,
                "case {}: z = {}, tau = {}",
                case.index,
                Complex::with_val(53, &case.z),
                Complex::with_val(53, &case.tau)
            );
            match &case.outcome {
                Ok(checks) => {
                    for ch in checks {
                        let _ = writeln!(
                            s,
                            "  {:<22} {:>10.2} <= {:>10.2}  {}",
                            ch.name,
                            ch.value,
                            ch.bound,
                            if ch.pass { "ok" } else { "FAIL" }
                        );
                    }
                }
                Err(e) => {
                    let _ = writeln!(s, "  error: {e}");
                }
            }
        }
        let _ = writeln!(
            s,
            "{} of {} cases failed",
            self.failures(),
            self.cases.len()
        );
        s
    }
}

fn run_case(z: &Complex, tau: &Complex, cfg: &SelftestConfig) -> Result<Vec<Check>> {
    let p = cfg.prec;
    let pf = p as f64;
    let forced = FastConfig {
        naive_ratio: 0.0,
        ..cfg.fast
    };
    let (mut fast, _) = theta_uniform_traced(z, tau, p, &forced)?;
    let oracle = theta_bundle_naive(z, tau, p + 64)?;
    let mut checks = Vec::new();

    let agree = fast
        .six()
        .iter()
        .zip(oracle.six().iter())
        .map(|(a, b)| log2_dist(a, b))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("fast vs naive", agree, -pf));

    if cfg.inject_fault {
        inject(&mut fast, p);
    }
    // identities are checked at the precision the fast path claims
    let claimed = fast.achieved_bits as f64;
    checks.push(Check::at_most(
        "jacobi",
        jacobi_residual(&fast),
        -claimed + 8.0,
    ));
    checks.push(Check::at_most(
        "variety",
        variety_residual(&fast),
        -claimed + 8.0,
    ));
    checks.push(Check::at_most(
        "quasi-periodicity",
        quasi_periodicity_residual(&fast, z, tau, p)?,
        -pf + 8.0,
    ));

    let cap = (pf.log2() + ITERATION_SLACK as f64).floor();
    let a = Complex::with_val(fast.work_bits, fast.th00_0.square_ref());
    let b = Complex::with_val(fast.work_bits, fast.th01_0.square_ref());
    let agm = agm_optimal_counted(&a, &b, p)?;
    let mut d = agm.value;
    d -= 1u32;
    checks.push(Check::at_most(
        "agm(th00^2, th01^2) - 1",
        log2_abs(&d),
        -pf + 8.0,
    ));
    checks.push(Check::at_most("agm iterations", agm.iterations as f64, cap));

    let params = UniformParams::new(z, tau, p, &forced);
    let q = seed_quotients(&params.z2, &params.tau2, p + 32)?;
    let out = frak_f_squared(&q.s, &q.t, p, DEFAULT_C1)?;
    let z_sq = Complex::with_val(p + 32, params.z2.square_ref());
    let frak_err = log2_dist(&out.z_sq, &z_sq).max(log2_dist(&out.tau, &params.tau2));
    checks.push(Check::at_most("frak round trip", frak_err, -pf + 16.0));
    // two F^inf evaluations
    checks.push(Check::at_most(
        "F^inf iterations",
        out.iterations as f64,
        2.0 * cap,
    ));
    Ok(checks)
}

/// One ulp at absolute precision `P` added to `theta00(0, tau)`.
pub fn inject(b: &mut ThetaBundle, p: u32) {
    let mut eps = Complex::with_val(b.work_bits.max(p + 8), 1);
    eps >>= p;
    b.th00_0 += &eps;
}

pub fn run_selftest(cfg: &SelftestConfig) -> SelftestReport {
    let mut r = rng(cfg.seed);
    let points: Vec<(u32, Complex, Complex)> = (0..cfg.cases)
        .map(|i| {
            let (z, tau) = reduced_point(&mut r, 0.9, 6.0, 64);
            (i, z, tau)
        })
        .collect();
    let one = |(i, z, tau): &(u32, Complex, Complex)| CaseReport {
        index: *i,
        z: z.clone(),
        tau: tau.clone(),
        outcome: run_case(z, tau, cfg).map_err(|e| e.to_string()),
    };
    let cases = if cfg.parallel {
        map_points(&points, one)
    } else {
        map_points_sequential(&points, one)
    };
    SelftestReport {
        config: cfg.clone(),
        cases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SelftestConfig {
        SelftestConfig {
            cases: 3,
            prec: 192,
            ..SelftestConfig::default()
        }
    }

    #[test]
    fn default_cases_pass() {
        let r = run_selftest(&small());
        assert_eq!(r.failures(), 0, "{}", r.render());
    }

    #[test]
    fn fault_is_caught_by_jacobi() {
        let r = run_selftest(&SelftestConfig {
            inject_fault: true,
            ..small()
        });
        for case in &r.cases {
            let checks = case.outcome.as_ref().unwrap();
            let j = checks.iter().find(|c| c.name == "jacobi").unwrap();
            assert!(!j.pass, "{}", r.render());
            assert!(
                checks
                    .iter()
                    .find(|c| c.name == "fast vs naive")
                    .unwrap()
                    .pass
            );
        }
        assert_eq!(r.failures(), 3);
    }

    #[test]
    fn report_is_deterministic_and_order_stable() {
        let a = run_selftest(&small()).render();
        let b = run_selftest(&SelftestConfig {
            parallel: true,
            ..small()
        })
        .render();
        assert_eq!(a, b);
    }
}
