//! Timing harness: naive series against the fast path over a precision ladder.
//!
//! Each precision is timed `repetitions` times per method, alternating
//! between the methods, and the median wall time kept. The ratio naive/fast and the log-log slopes of both columns
//! describe the crossover behaviour on the machine at hand.

use std::fmt::Write as _;
use std::time::Instant;

use rug::Complex;
use serde::{Deserialize, Serialize};

use crate::bundle::ThetaBundle;
use crate::error::{Result, ThetaError};
use crate::fast::{is_reduced, theta_uniform_traced, FastConfig};
use crate::identities::bundle_residual;
use crate::mpcx::cx;
use crate::naive::{series_bound, theta_bundle_naive};

/// Default benchmark argument.
pub fn default_point() -> (Complex, Complex) {
    (
        cx(64, 0.123456789, 0.123456789),
        cx(64, 0.23456789, 1.23456789),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    /// Bits.
    pub precision: u32,
    pub method: String,
    /// Median seconds.
    pub wall_time: f64,
    /// Series terms for the naive method, Newton steps for the fast one.
    pub iterations: u32,
    pub guard_bits_used: u32,
    /// log2 of the largest Jacobi/variety residual, relative to `2^-precision`
    /// (negative means better than the target).
    pub residuals: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Ascending, in bits.
    pub precisions: Vec<u32>,
    pub repetitions: u32,
    pub fast: FastConfig,
    pub z: Complex,
    pub tau: Complex,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let (z, tau) = default_point();
        BenchConfig {
            precisions: Vec::new(),
            repetitions: 3,
            fast: FastConfig::default(),
            z,
            tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// First precision where the fast path was quicker, if any.
    pub crossover: Option<u32>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn stopwatch<T>(f: impl FnOnce() -> Result<T>) -> Result<(f64, T)> {
    let t0 = Instant::now();
    let v = f()?;
    Ok((t0.elapsed().as_secs_f64().max(1e-9), v))
}

fn residual_rel(b: &ThetaBundle, p: u32) -> f64 {
    let r = bundle_residual(b);
    // an exact zero residual is reported at the bottom of the working precision
    let floor = -(b.work_bits as f64);
    r.max(floor) + p as f64
}

/// Time both methods at every precision of `cfg`.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.precisions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ThetaError::PreconditionViolated(
            "precision list must be strictly ascending".into(),
        ));
    }
    if !is_reduced(&cfg.z, &cfg.tau) {
        return Err(ThetaError::domain("benchmark point must be reduced"));
    }
    let forced = FastConfig {
        naive_ratio: 0.0,
        ..cfg.fast
    };
    let mut records = Vec::new();
    let mut crossover = None;
    for &p in &cfg.precisions {
        // the two methods alternate so slow drifts of the machine hit both
        let (mut naive_t, mut fast_t) = (Vec::new(), Vec::new());
        let mut last = None;
        for _ in 0..cfg.repetitions.max(1) {
            let (tn, bn) = stopwatch(|| theta_bundle_naive(&cfg.z, &cfg.tau, p))?;
            let (tf, fast) = stopwatch(|| theta_uniform_traced(&cfg.z, &cfg.tau, p, &forced))?;
            naive_t.push(tn);
            fast_t.push(tf);
            last = Some((bn, fast));
        }
        let (bn, (bf, trace)) = last.expect("at least one repetition");
        let (tn, tf) = (median(naive_t), median(fast_t));
        records.push(BenchRecord {
            precision: p,
            method: "naive".into(),
            wall_time: tn,
            iterations: series_bound(p, &cfg.tau)?,
            guard_bits_used: bn.guard_bits_used,
            residuals: residual_rel(&bn, p),
        });
        records.push(BenchRecord {
            precision: p,
            method: "fast".into(),
            wall_time: tf,
            iterations: trace.newton.as_ref().map_or(0, |n| n.steps.len() as u32),
            guard_bits_used: trace.guard_bits_used,
            residuals: residual_rel(&bf, p),
        });
        if crossover.is_none() && tf < tn {
            crossover = Some(p);
        }
    }
    Ok(BenchReport { records, crossover })
}

impl BenchReport {
    fn times(&self, method: &str) -> Vec<(u32, f64)> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.precision, r.wall_time))
            .collect()
    }

    /// `(precision, naive_time / fast_time)` per precision.
    pub fn ratios(&self) -> Vec<(u32, f64)> {
        self.times("naive")
            .into_iter()
            .zip(self.times("fast"))
            .map(|((p, n), (_, f))| (p, n / f))
            .collect()
    }

    /// Log-log slope of `method` between its last two precisions.
    pub fn top_slope(&self, method: &str) -> Option<f64> {
        self.fitted_slope(method, 2)
    }

    /// Least-squares log-log slope of `method` over its last `n` precisions.
    /// Less sensitive to a single noisy timing than [`Self::top_slope`].
    pub fn fitted_slope(&self, method: &str, n: usize) -> Option<f64> {
        let t = self.times(method);
        if n < 2 || t.len() < n {
            return None;
        }
        let pts: Vec<(f64, f64)> = t[t.len() - n..]
            .iter()
            .map(|&(p, s)| ((p as f64).log2(), s.log2()))
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        Some(sxy / sxx)
    }

    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("precision,method,wall_time,iterations,guard_bits_used,residuals\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{:.6},{},{},{:.1}",
                r.precision, r.method, r.wall_time, r.iterations, r.guard_bits_used, r.residuals
            );
        }
        let _ = writeln!(
            s,
            "# crossover: {}",
            self.crossover
                .map_or("none in range".to_string(), |p| format!("{p} bits"))
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fast::TEST_P0;

    #[test]
    fn small_ladder_runs() {
        let cfg = BenchConfig {
            precisions: vec![128, 256, 512],
            repetitions: 1,
            fast: FastConfig::with_p0(TEST_P0),
            ..BenchConfig::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.records.len(), 6);
        for rec in &r.records {
            assert!(rec.wall_time > 0.0);
            assert!(rec.residuals.is_finite());
            assert!(rec.residuals <= 8.0, "{rec:?}");
        }
        assert_eq!(r.ratios().len(), 3);
        assert!(r.top_slope("naive").is_some());
        assert!(r.fitted_slope("fast", 4).is_none());
        let csv = r.to_csv();
        assert!(csv.starts_with("precision,method,wall_time,iterations,guard_bits_used,residuals"));
        assert_eq!(csv.lines().count(), 8);
    }

    #[test]
    fn rejects_unsorted_list() {
        let cfg = BenchConfig {
            precisions: vec![256, 128],
            ..BenchConfig::default()
        };
        assert!(matches!(
            run_bench(&cfg),
            Err(ThetaError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let records = [1u32 << 10, 1 << 11, 1 << 12]
            .iter()
            .map(|&p| BenchRecord {
                precision: p,
                method: "naive".into(),
                wall_time: (p as f64).powf(1.5),
                iterations: 1,
                guard_bits_used: 0,
                residuals: 0.0,
            })
            .collect();
        let r = BenchReport {
            records,
            crossover: None,
        };
        assert!((r.top_slope("naive").unwrap() - 1.5).abs() < 1e-12);
        assert!((r.fitted_slope("naive", 3).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
