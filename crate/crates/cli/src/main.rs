use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use vecbind::bench::{self, BenchOptions};
use vecbind::decl::{build_plans, parse_annotations, parse_declarations, unparse, WrapperPlan};
use vecbind::dispatch::explain;
use vecbind::engine::{builtins, kernel_from_plan, BENCH_THRESHOLDS};
use vecbind::gen::{plan_to_json, plans_from_json, write_plan_files, Variant};
use vecbind::{make_array, ElemType, Elements, Engine, ExecConfig, Mode, Shape, Value};

#[derive(Parser)]
#[command(
    name = "vecbind",
    version,
    about = "Vectorizing wrappers for C-declared kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a header and print each declaration with its caller-facing usage.
    Parse {
        header: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Write the wrapper plans as a JSON array.
        #[arg(long)]
        emit_plan: Option<PathBuf>,
    },
    /// Dry-run validation of a call with the given argument shapes.
    Explain {
        header: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Function to explain; required when the header declares several.
        #[arg(long)]
        function: Option<String>,
        /// Comma-separated shapes, e.g. "2x3, 3"; "-" or "scalar" for rank 0.
        #[arg(long)]
        call: String,
    },
    /// Execute a builtin kernel through a plan file on generated inputs.
    Run {
        plan: PathBuf,
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        call: String,
        #[arg(long, default_value = "auto")]
        mode: String,
        #[arg(long)]
        threshold: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write <fn>.plan.json and <fn>.wrapper.txt for every declared function.
    Gen {
        header: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Render the parallel wrapper variant.
        #[arg(long)]
        parallel: bool,
        #[arg(short = 'o', long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Time serial against threshold-gated parallel execution.
    Bench {
        #[arg(long, default_value = "sin,cos,exp,log,hypot,atof,ops,weibull")]
        kernels: String,
        #[arg(long, default_value = "1:1e6:31log")]
        sizes: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<usize>>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_plans(header: &Path, annotations: Option<&Path>) -> Result<Vec<WrapperPlan>> {
    let decls = parse_declarations(&read(header)?)?;
    let anns = match annotations {
        Some(p) => parse_annotations(&read(p)?)?,
        None => Vec::new(),
    };
    Ok(build_plans(&decls, &anns)?)
}

fn pick(plans: Vec<WrapperPlan>, function: Option<&str>) -> Result<WrapperPlan> {
    match function {
        Some(name) => plans
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| anyhow!("no function named '{name}'")),
        None if plans.len() == 1 => Ok(plans.into_iter().next().expect("one plan")),
        None if plans.is_empty() => bail!("no functions declared"),
        None => bail!("several functions declared; choose one with --function"),
    }
}

fn parse_shapes(spec: &str) -> Result<Vec<Shape>> {
    spec.split(',')
        .map(str::trim)
        .map(|s| {
            if s.is_empty() || s == "-" || s == "scalar" {
                return Ok(Shape::scalar());
            }
            let dims = s
                .split('x')
                .map(|d| d.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .with_context(|| format!("invalid shape '{s}'"))?;
            Ok(Shape::new(dims)?)
        })
        .collect()
}

/// Deterministic argument data: element `i` is `1 + i/2`.
fn sample(base: ElemType, shape: Shape) -> Result<Value> {
    let n = shape.element_count();
    let data = match base {
        ElemType::Real64 => Elements::Real((0..n).map(|i| 1.0 + i as f64 * 0.5).collect()),
        ElemType::Int64 => Elements::Int((0..n).map(|i| 1 + i as i64).collect()),
        ElemType::Str => Elements::Str(
            (0..n)
                .map(|i| format!("{}", 1.0 + i as f64 * 0.5))
                .collect(),
        ),
    };
    Ok(make_array(base, shape, data)?)
}

fn summarize(v: &Value) -> String {
    const SHOWN: usize = 8;
    let (sum, head): (String, Vec<String>) = match v {
        Value::Real(a) => (
            format!("{}", a.data().iter().sum::<f64>()),
            a.data().iter().take(SHOWN).map(|x| x.to_string()).collect(),
        ),
        Value::Int(a) => (
            format!("{}", a.data().iter().sum::<i64>()),
            a.data().iter().take(SHOWN).map(|x| x.to_string()).collect(),
        ),
        Value::Str(a) => (
            "-".into(),
            a.data()
                .iter()
                .take(SHOWN)
                .map(|x| format!("{x:?}"))
                .collect(),
        ),
    };
    let more = if v.len() > SHOWN { ", ..." } else { "" };
    format!(
        "{:?} shape {} sum {sum} values [{}{more}]",
        v.etype(),
        v.shape(),
        head.join(", ")
    )
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Parse {
            header,
            annotations,
            emit_plan,
        } => {
            let plans = load_plans(&header, annotations.as_deref())?;
            for p in &plans {
                println!("{}", unparse(&p.decl));
                println!("    usage: {}", p.usage());
            }
            if let Some(out) = emit_plan {
                let docs: Vec<&WrapperPlan> = plans.iter().collect();
                let mut json = plans_json(&docs);
                json.push('\n');
                fs::write(&out, json).with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Explain {
            header,
            annotations,
            function,
            call,
        } => {
            let plan = pick(
                load_plans(&header, annotations.as_deref())?,
                function.as_deref(),
            )?;
            let report = explain(&plan, &parse_shapes(&call)?);
            println!("{report}");
            if report.failure.is_some() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Run {
            plan,
            function,
            call,
            mode,
            threshold,
            workers,
        } => {
            let plan = pick(plans_from_json(&read(&plan)?)?, function.as_deref())?;
            let body = builtins::body(plan.name())
                .ok_or_else(|| anyhow!("'{}' is not a builtin kernel", plan.name()))?;
            let kernel = kernel_from_plan(plan, body)?;
            let mut cfg = ExecConfig::from_env()?.with_mode(mode.parse::<Mode>()?);
            if let Some(t) = threshold {
                cfg = cfg.with_threshold(t);
            }
            if let Some(w) = workers {
                cfg = cfg.with_workers(w);
            }
            let shapes = parse_shapes(&call)?;
            if shapes.len() != kernel.plan.visible_params.len() {
                bail!("Usage: {}", kernel.plan.usage());
            }
            let args = kernel
                .plan
                .visible_params
                .iter()
                .zip(shapes)
                .map(|(p, s)| sample(p.base, s))
                .collect::<Result<Vec<_>>>()?;
            let engine = Engine::new();
            let outputs = engine.call_kernel(&kernel, &args, &cfg)?;
            println!("function: {}", kernel.name);
            if let Some(path) = engine.last_path() {
                println!("path: {path:?}");
            }
            for (i, v) in outputs.iter().enumerate() {
                println!("output {i}: {}", summarize(v));
            }
        }
        Command::Gen {
            header,
            annotations,
            parallel,
            out_dir,
        } => {
            let variant = if parallel {
                Variant::Parallel
            } else {
                Variant::Serial
            };
            for plan in load_plans(&header, annotations.as_deref())? {
                for path in write_plan_files(&plan, variant, &out_dir)? {
                    println!("{}", path.display());
                }
            }
        }
        Command::Bench {
            kernels,
            sizes,
            trials,
            thresholds,
            workers,
            seed,
            out,
        } => {
            let env = ExecConfig::from_env()?;
            let opts = BenchOptions {
                workloads: bench::parse_workloads(&kernels)?,
                sizes: bench::parse_sizes(&sizes)?,
                trials,
                thresholds: thresholds.unwrap_or_else(|| BENCH_THRESHOLDS.to_vec()),
                workers: workers.unwrap_or(env.num_workers).max(1),
                seed,
            };
            let engine = Engine::with_builtins();
            let report = bench::run_benchmark(&engine, &opts)?;
            bench::write_records_csv(&report.records, &out)?;
            write_meta(&out, &opts, &report)?;
            for curve in bench::speedup_curves(&report.records)? {
                let at = curve
                    .inflection
                    .map_or("none".to_string(), |s| s.to_string());
                println!(
                    "{} threshold {}: inflection {at}",
                    curve.kernel, curve.threshold
                );
            }
            for f in &report.failures {
                eprintln!("verification failed: {f}");
            }
            if !report.failures.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn plans_json(plans: &[&WrapperPlan]) -> String {
    let parts: Vec<String> = plans
        .iter()
        .map(|p| plan_to_json(p).trim_end().to_string())
        .collect();
    format!("[\n{}\n]", parts.join(",\n"))
}

/// Sidecar describing how the CSV means were computed.
fn write_meta(out: &Path, opts: &BenchOptions, report: &bench::BenchReport) -> Result<()> {
    let mut path = out.as_os_str().to_owned();
    path.push(".meta");
    let flagged = report.records.iter().filter(|r| r.flagged).count();
    let text = format!(
        "trials: {}\n\
         workers: {}\n\
         seed: {}\n\
         timer_resolution_s: {:e}\n\
         mean_s: trimmed mean dropping one highest and one lowest trial\n\
         mean_s[weibull]: untrimmed mean over all trials\n\
         flagged_records: {flagged} (some trial under 10x the timer resolution)\n\
         verification_failures: {}\n",
        opts.trials,
        opts.workers,
        opts.seed,
        bench::timer_resolution().as_secs_f64(),
        report.failures.len(),
    );
    fs::write(&path, text).with_context(|| format!("writing {}", Path::new(&path).display()))?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("vecbind: {e:#}");
            ExitCode::from(2)
        }
    }
}
