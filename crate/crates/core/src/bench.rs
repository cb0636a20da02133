//! Random-matrix benchmarks and runtime scaling.

use std::fmt::Write as _;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cse::{solve_with, SolveOptions};
use crate::{Error, Matrix, QInterval};

/// `m x m` matrix with entries uniform over `[2^(bw-1) + 1, 2^bw - 1]`.
pub fn random_matrix(m: usize, bw: u32, seed: u64) -> Matrix {
    assert!(bw >= 2, "bw must be at least 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = (1i64 << (bw - 1)) + 1;
    let hi = (1i64 << bw) - 1;
    let rows: Vec<Vec<i64>> = (0..m).map(|_| (0..m).map(|_| rng.gen_range(lo..=hi)).collect()).collect();
    Matrix::from_i64(&rows)
}

/// Seed of trial `t` at size `m`.
pub fn trial_seed(seed: u64, m: usize, t: usize) -> u64 {
    let mut z = seed ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (t as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub size: usize,
    pub trial: usize,
    pub seed: u64,
    pub adders: usize,
    pub depth: u32,
    pub cost: u64,
    pub cpu_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeSummary {
    pub size: usize,
    pub bw: u32,
    pub dc: i32,
    pub trials: usize,
    pub mean_depth: f64,
    pub mean_adders: f64,
    pub std_adders: f64,
    pub mean_cost: f64,
    pub mean_cpu_ms: f64,
    pub records: Vec<TrialRecord>,
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub sizes: Vec<usize>,
    pub bw: u32,
    pub opts: SolveOptions,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { sizes: vec![8], bw: 8, opts: SolveOptions::with_dc(-1), trials: 25, seed: 0 }
    }
}

fn run_trial(m: usize, bw: u32, opts: &SolveOptions, seed: u64, t: usize) -> Result<TrialRecord, Error> {
    let s = trial_seed(seed, m, t);
    let mat = random_matrix(m, bw, s);
    let qints = vec![QInterval::int(-128, 127); m];
    let sol = solve_with(&mat, &qints, &vec![0; m], opts)?;
    Ok(TrialRecord {
        size: m,
        trial: t,
        seed: s,
        adders: sol.stats.adders,
        depth: sol.stats.depth,
        cost: sol.stats.cost,
        cpu_ms: sol.elapsed.as_secs_f64() * 1e3,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Solve `trials` random matrices per size. Trials run on the rayon pool;
/// records come back in trial order.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<SizeSummary>, Error> {
    cfg.sizes
        .iter()
        .map(|&m| {
            let records = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(m, cfg.bw, &cfg.opts, cfg.seed, t))
                .collect::<Result<Vec<_>, _>>()?;
            let mean_adders = mean(records.iter().map(|r| r.adders as f64));
            let var = mean(records.iter().map(|r| (r.adders as f64 - mean_adders).powi(2)));
            Ok(SizeSummary {
                size: m,
                bw: cfg.bw,
                dc: cfg.opts.dc,
                trials: cfg.trials,
                mean_depth: mean(records.iter().map(|r| r.depth as f64)),
                mean_adders,
                std_adders: var.sqrt(),
                mean_cost: mean(records.iter().map(|r| r.cost as f64)),
                mean_cpu_ms: mean(records.iter().map(|r| r.cpu_ms)),
                records,
            })
        })
        .collect()
}

pub fn summaries_csv(rows: &[SizeSummary]) -> String {
    let mut out = String::from("size,bw,dc,trials,mean_depth,mean_adders,std_adders,mean_cost,mean_cpu_ms\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.size, r.bw, r.dc, r.trials, r.mean_depth, r.mean_adders, r.std_adders, r.mean_cost, r.mean_cpu_ms
        );
    }
    out
}

pub fn summaries_json(rows: &[SizeSummary]) -> String {
    serde_json::to_string_pretty(rows).expect("plain data serializes")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub size: usize,
    pub n: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln(seconds)` against `ln(N)`, `N = m^2 * bw`,
    /// over sizes `m >= 8`.
    pub slope: f64,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs.iter().copied());
    let my = mean(ys.iter().copied());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean single-threaded solve time over `trials` matrices per size.
pub fn scaling_study(sizes: &[usize], bw: u32, trials: usize, seed: u64) -> Result<ScalingReport, Error> {
    let opts = SolveOptions::with_dc(-1);
    let mut points = Vec::new();
    for &m in sizes {
        let mut total = Duration::ZERO;
        for t in 0..trials.max(1) {
            let mat = random_matrix(m, bw, trial_seed(seed, m, t));
            let sol = solve_with(&mat, &vec![QInterval::int(-128, 127); m], &vec![0; m], &opts)?;
            total += sol.elapsed;
        }
        let seconds = total.as_secs_f64() / trials.max(1) as f64;
        points.push(ScalingPoint { size: m, n: (m * m) as f64 * bw as f64, seconds });
    }
    let fit: Vec<_> = points.iter().filter(|p| p.size >= 8).collect();
    let xs: Vec<f64> = fit.iter().map(|p| p.n.ln()).collect();
    let ys: Vec<f64> = fit.iter().map(|p| p.seconds.ln()).collect();
    let slope = if fit.len() >= 2 { fit_slope(&xs, &ys) } else { f64::NAN };
    Ok(ScalingReport { points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Dyadic;

    #[test]
    fn entry_range() {
        let m = random_matrix(8, 8, 1);
        assert!(m.iter().all(|v| *v >= Dyadic::from_int(129) && *v <= Dyadic::from_int(255)));
        assert!(random_matrix(3, 2, 7).iter().all(|v| *v == Dyadic::from_int(3)));
    }

    #[test]
    fn seeded() {
        assert_eq!(random_matrix(5, 8, 42), random_matrix(5, 8, 42));
        assert_ne!(random_matrix(5, 8, 42), random_matrix(5, 8, 43));
        assert_ne!(trial_seed(0, 8, 0), trial_seed(0, 8, 1));
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [1.0f64, 4.0, 16.0, 64.0].iter().map(|y| y.ln()).collect();
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn suite_is_reproducible() {
        let cfg = SuiteConfig { sizes: vec![4], trials: 4, ..SuiteConfig::default() };
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a[0].records.iter().map(|r| r.adders).collect::<Vec<_>>(), b[0].records.iter().map(|r| r.adders).collect::<Vec<_>>());
        assert!(summaries_csv(&a).starts_with("size,bw,dc"));
    }
}
