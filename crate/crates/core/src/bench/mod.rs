//! Speedup measurement: serial versus threshold-gated parallel timings of
//! kernels, operators and an aggregate Weibull workload.

mod analysis;
mod weibull;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

pub use analysis::{
    compute_speedup, speedup_curves, write_curve_csv, write_records_csv, SpeedupCurve, SpeedupPoint,
};
pub use weibull::{weibull_eval, WeibullParams};

use crate::array::{NdArray, Value};
use crate::engine::{BinaryOp, Engine, ExecConfig, Mode};
use crate::error::{Error, Result};

/// Mean after dropping one highest and one lowest trial.
pub fn trimmed_mean(times: &[f64]) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::Usage(format!(
            "trimmed mean needs at least 3 trials, got {}",
            times.len()
        )));
    }
    let max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = times.iter().sum();
    Ok((sum - max - min) / (times.len() - 2) as f64)
}

pub fn mean(times: &[f64]) -> f64 {
    times.iter().sum::<f64>() / times.len() as f64
}

/// One benchmarked computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Workload {
    Kernel(&'static str),
    Op(BinaryOp),
    Weibull,
}

const KERNELS: [&str; 6] = ["sin", "cos", "exp", "log", "hypot", "atof"];

impl Workload {
    pub fn name(&self) -> String {
        match self {
            Workload::Kernel(k) => k.to_string(),
            Workload::Op(op) => format!("op:{}", op.name()),
            Workload::Weibull => "weibull".into(),
        }
    }

    /// Weibull timings are averaged without trimming.
    pub fn trims(&self) -> bool {
        *self != Workload::Weibull
    }

    /// Deterministic inputs with `size` elements.
    pub fn inputs(&self, size: usize, seed: u64) -> Vec<Value> {
        let mut rng = StdRng::seed_from_u64(seed ^ size as u64);
        let mut reals = |lo: f64, hi: f64| -> Value {
            let d: Vec<f64> = (0..size).map(|_| rng.gen_range(lo..hi)).collect();
            Value::Real(NdArray::vector(d).expect("size >= 1"))
        };
        match self {
            Workload::Kernel("log") => vec![reals(1e-3, 1e3)],
            Workload::Kernel("exp") => vec![reals(-20.0, 20.0)],
            Workload::Kernel("hypot") => vec![reals(-1e3, 1e3), reals(-1e3, 1e3)],
            Workload::Kernel("atof") => {
                let d: Vec<String> = (0..size)
                    .map(|_| format!("{:.6e}", rng.gen_range(-1e6..1e6)))
                    .collect();
                vec![Value::Str(NdArray::vector(d).expect("size >= 1"))]
            }
            Workload::Kernel(_) => vec![reals(-10.0, 10.0)],
            Workload::Op(BinaryOp::Pow) => vec![reals(0.0, 10.0), reals(-3.0, 3.0)],
            Workload::Op(_) => vec![reals(-100.0, 100.0), reals(0.5, 100.0)],
            Workload::Weibull => {
                let lo: Vec<f64> = (0..size).map(|i| i as f64 * 0.01).collect();
                let hi: Vec<f64> = lo.iter().map(|l| l + 0.01).collect();
                vec![
                    Value::Real(NdArray::vector(lo).expect("size >= 1")),
                    Value::Real(NdArray::vector(hi).expect("size >= 1")),
                ]
            }
        }
    }

    pub fn execute(
        &self,
        engine: &Engine,
        inputs: &[Value],
        cfg: &ExecConfig,
    ) -> Result<Vec<Value>> {
        match self {
            Workload::Kernel(k) => engine.call(k, inputs, cfg),
            Workload::Op(op) => Ok(vec![engine.elementwise(*op, &inputs[0], &inputs[1], cfg)?]),
            Workload::Weibull => {
                let (Some(lo), Some(hi)) = (inputs[0].as_real(), inputs[1].as_real()) else {
                    return Err(Error::Usage("weibull takes two Real64 arrays".into()));
                };
                let out = weibull_eval(engine, lo, hi, &WeibullParams::default(), cfg)?;
                Ok(vec![Value::Real(out)])
            }
        }
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses a comma-separated workload list; `ops` expands to every operator.
pub fn parse_workloads(spec: &str) -> Result<Vec<Workload>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "ops" => out.extend(BinaryOp::ALL.map(Workload::Op)),
            "weibull" => out.push(Workload::Weibull),
            k => {
                if let Some(name) = KERNELS.iter().find(|&&n| n == k) {
                    out.push(Workload::Kernel(name));
                } else if let Some(op) = k.strip_prefix("op:") {
                    out.push(Workload::Op(op.parse()?));
                } else {
                    return Err(Error::Usage(format!("unknown benchmark kernel '{k}'")));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("no benchmark kernels given".into()));
    }
    Ok(out)
}

/// Parses `lo:hi:Nlog`, `lo:hi:Nlin` or a comma list of sizes.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Usage(format!("invalid size spec '{spec}'"));
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 1.0)
            .ok_or_else(bad)
    };
    let mut sizes: Vec<usize> = match spec.split(':').collect::<Vec<_>>().as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let (count, log) = if let Some(c) = n.strip_suffix("log") {
                (c, true)
            } else if let Some(c) = n.strip_suffix("lin") {
                (c, false)
            } else {
                (*n, true)
            };
            let count: usize = count.parse().map_err(|_| bad())?;
            if count == 0 || hi < lo {
                return Err(bad());
            }
            (0..count)
                .map(|i| {
                    let t = if count == 1 {
                        0.0
                    } else {
                        i as f64 / (count - 1) as f64
                    };
                    let v = if log {
                        (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                    } else {
                        lo + t * (hi - lo)
                    };
                    v.round() as usize
                })
                .collect()
        }
        [list] => list
            .split(',')
            .map(|s| num(s).map(|v| v.round() as usize))
            .collect::<Result<_>>()?,
        _ => return Err(bad()),
    };
    sizes.sort_unstable();
    sizes.dedup();
    Ok(sizes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Serial,
    Parallel,
}

impl FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(BenchMode::Serial),
            "parallel" => Ok(BenchMode::Parallel),
            _ => Err(Error::Usage(format!("unknown bench mode '{s}'"))),
        }
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::Serial => "serial",
            BenchMode::Parallel => "parallel",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub kernel: String,
    pub array_size: usize,
    pub mode: BenchMode,
    pub threshold: usize,
    pub workers: usize,
    /// Seconds per trial.
    pub times: Vec<f64>,
    /// Trimmed mean (plain mean for untrimmed workloads).
    pub summary: f64,
    /// Some trial was too short for the timer to resolve reliably.
    pub flagged: bool,
}

impl BenchRecord {
    pub fn min(&self) -> f64 {
        self.times.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.times.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub workloads: Vec<Workload>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub thresholds: Vec<usize>,
    pub workers: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// Workloads whose serial and parallel outputs differed, with the size.
    pub failures: Vec<String>,
}

/// Smallest positive interval observed between consecutive clock reads.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

/// Bitwise equality of outputs, so NaNs compare equal to themselves.
pub fn outputs_identical(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (Value::Real(x), Value::Real(y)) => {
                x.shape() == y.shape()
                    && x.data()
                        .iter()
                        .zip(y.data())
                        .all(|(p, q)| p.to_bits() == q.to_bits())
            }
            _ => x == y,
        })
}

fn time_trials(
    engine: &Engine,
    w: &Workload,
    inputs: &[Value],
    cfg: &ExecConfig,
    trials: usize,
) -> Result<Vec<f64>> {
    (0..trials)
        .map(|_| {
            let start = Instant::now();
            let out = w.execute(engine, inputs, cfg)?;
            let elapsed = start.elapsed().as_secs_f64();
            drop(out);
            Ok(elapsed)
        })
        .collect()
}

/// Median of a nonempty sample (mean of the middle pair for even sizes).
pub fn median(times: &[f64]) -> f64 {
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    let n = t.len();
    if n % 2 == 1 {
        t[n / 2]
    } else {
        (t[n / 2 - 1] + t[n / 2]) / 2.0
    }
}

/// Serial dispatch cost of `sin` through the engine against a direct loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overhead {
    pub engine_median: f64,
    pub direct_median: f64,
}

impl Overhead {
    pub fn ratio(&self) -> f64 {
        self.engine_median / self.direct_median
    }
}

/// Times `sin` over `size` elements, serially, both through the engine and
/// as a plain loop writing a fresh vector; trials alternate between the two.
pub fn measure_overhead(engine: &Engine, size: usize, trials: usize) -> Result<Overhead> {
    if trials == 0 {
        return Err(Error::Usage("at least one trial is needed".into()));
    }
    let input = Workload::Kernel("sin").inputs(size, 1);
    let data = input[0]
        .as_real()
        .expect("sin inputs are real")
        .data()
        .to_vec();
    let cfg = ExecConfig::serial();
    let (mut via_engine, mut direct) = (Vec::new(), Vec::new());
    for _ in 0..trials {
        let start = Instant::now();
        let out = engine.call("sin", &input, &cfg)?;
        via_engine.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);

        let start = Instant::now();
        let out: Vec<f64> = std::hint::black_box(&data)
            .iter()
            .map(|x| x.sin())
            .collect();
        direct.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    Ok(Overhead {
        engine_median: median(&via_engine),
        direct_median: median(&direct),
    })
}

/// Times every (workload, size, threshold, mode) combination.
///
/// Before timing a size, the serial and parallel outputs are compared; a
/// mismatch drops that workload's records and is reported in `failures`.
pub fn run_benchmark(engine: &Engine, opts: &BenchOptions) -> Result<BenchReport> {
    if opts.sizes.is_empty() {
        return Err(Error::Usage("no array sizes given".into()));
    }
    if opts.trials < 3 {
        return Err(Error::Usage(format!(
            "at least 3 trials are needed, got {}",
            opts.trials
        )));
    }
    let resolution = timer_resolution().as_secs_f64();
    let serial = ExecConfig::serial().with_workers(opts.workers);
    let mut report = BenchReport::default();
    'workload: for w in &opts.workloads {
        let mut records = Vec::new();
        for &size in &opts.sizes {
            let inputs = w.inputs(size, opts.seed);
            let forced = ExecConfig::parallel(opts.workers);
            let s = w.execute(engine, &inputs, &serial)?;
            let p = w.execute(engine, &inputs, &forced)?;
            if !outputs_identical(&s, &p) {
                report.failures.push(format!(
                    "{w}: serial and parallel outputs differ at size {size}"
                ));
                continue 'workload;
            }
            for &threshold in &opts.thresholds {
                for mode in [BenchMode::Serial, BenchMode::Parallel] {
                    let cfg = match mode {
                        BenchMode::Serial => serial.clone(),
                        BenchMode::Parallel => ExecConfig {
                            mode: Mode::Auto,
                            min_elements: threshold,
                            num_workers: opts.workers,
                        },
                    };
                    let times = time_trials(engine, w, &inputs, &cfg, opts.trials)?;
                    let summary = if w.trims() {
                        trimmed_mean(&times)?
                    } else {
                        mean(&times)
                    };
                    let flagged = times.iter().any(|&t| t < 10.0 * resolution);
                    records.push(BenchRecord {
                        kernel: w.name(),
                        array_size: size,
                        mode,
                        threshold,
                        workers: opts.workers,
                        times,
                        summary,
                        flagged,
                    });
                }
            }
        }
        report.records.extend(records);
    }
    Ok(report)
}
