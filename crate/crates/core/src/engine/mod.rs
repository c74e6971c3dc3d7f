//! Execution of vectored calls and parallel array operators.
//!
//! A call is validated into a [`VecSpec`], then the iteration range
//! `0..num_iterations` runs either as one serial chunk or split into
//! contiguous chunks, one per worker. Each chunk writes only its own part of
//! the pre-allocated output buffers, so both paths produce identical results.

pub mod builtins;
mod kernel;
mod ops;
mod partition;

use std::borrow::Cow;
use std::collections::HashMap;
use std::ops::Range;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

pub use kernel::{kernel_from_plan, register_kernel, Kernel, KernelBody, KernelFault, Ret, Slot};
pub use ops::BinaryOp;
pub use partition::partition;

use crate::array::{ElemType, NdArray, Value};
use crate::decl::{HiddenRole, OutputSource, WrapperPlan};
use crate::dispatch::{validate, VecSpec};
use crate::error::{Error, Result};
use partition::split_by_ranges;

/// Default parallel threshold when `VECBIND_MIN_ELEMENTS` is unset.
pub const DEFAULT_MIN_ELEMENTS: usize = 1000;

/// Threshold values swept by the benchmark harness.
pub const BENCH_THRESHOLDS: [usize; 7] = [0, 500, 1000, 5000, 10000, 50000, 100000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Serial,
    /// Parallel whenever the call is eligible.
    Parallel,
    /// Parallel only when the work size exceeds `min_elements`.
    Auto,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(Mode::Serial),
            "parallel" => Ok(Mode::Parallel),
            "auto" => Ok(Mode::Auto),
            _ => Err(Error::Usage(format!(
                "unknown mode '{s}' (expected auto, serial or parallel)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecConfig {
    pub mode: Mode,
    pub min_elements: usize,
    pub num_workers: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            mode: Mode::Auto,
            min_elements: DEFAULT_MIN_ELEMENTS,
            num_workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl ExecConfig {
    pub fn serial() -> Self {
        ExecConfig {
            mode: Mode::Serial,
            ..Default::default()
        }
    }

    pub fn parallel(num_workers: usize) -> Self {
        ExecConfig {
            mode: Mode::Parallel,
            num_workers: num_workers.max(1),
            ..Default::default()
        }
    }

    /// Defaults overridden by `VECBIND_MIN_ELEMENTS` and `VECBIND_NUM_WORKERS`.
    pub fn from_env() -> Result<Self> {
        Self::from_vars(|k| std::env::var(k).ok())
    }

    pub fn from_vars(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut cfg = ExecConfig::default();
        if let Some(v) = get("VECBIND_MIN_ELEMENTS") {
            cfg.min_elements = v
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("VECBIND_MIN_ELEMENTS: invalid value '{v}'")))?;
        }
        if let Some(v) = get("VECBIND_NUM_WORKERS") {
            cfg.num_workers =
                v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
                    Error::Usage(format!("VECBIND_NUM_WORKERS: invalid value '{v}'"))
                })?;
        }
        Ok(cfg)
    }

    pub fn with_threshold(mut self, min_elements: usize) -> Self {
        self.min_elements = min_elements;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_workers(mut self, num_workers: usize) -> Self {
        self.num_workers = num_workers.max(1);
        self
    }

    /// Whether work of `size` units should take the parallel path.
    pub fn wants_parallel(&self, size: usize) -> bool {
        match self.mode {
            Mode::Serial => false,
            Mode::Parallel => true,
            Mode::Auto => size > self.min_elements,
        }
    }
}

pub fn set_threshold(cfg: &ExecConfig, value: usize) -> ExecConfig {
    cfg.clone().with_threshold(value)
}

/// Path taken by the most recent engine operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPath {
    Serial,
    Parallel { chunks: usize },
}

/// Kernel registry plus worker pools.
///
/// Calls may be issued from one thread at a time per engine; workers only
/// write their own output partitions.
#[derive(Default)]
pub struct Engine {
    kernels: HashMap<String, Kernel>,
    pools: Mutex<HashMap<usize, Arc<ThreadPool>>>,
    last_path: Mutex<Option<ExecPath>>,
}

enum Input<'a> {
    Real(Cow<'a, [f64]>),
    Int(&'a [i64]),
    Str(&'a [String]),
}

#[derive(Clone, Copy)]
enum SlotSource {
    Arg(usize),
    Len(usize),
    Out(usize),
}

enum Buffer {
    Real(Vec<f64>),
    Int(Vec<i64>),
}

enum OutBuf<'a> {
    Real(&'a mut [f64]),
    Int(&'a mut [i64]),
}

enum OutIter<'a> {
    Real(std::slice::ChunksMut<'a, f64>),
    Int(std::slice::ChunksMut<'a, i64>),
}

struct Frame<'a> {
    kernel: &'a Kernel,
    spec: &'a VecSpec,
    inputs: &'a [Input<'a>],
    layout: &'a [SlotSource],
    has_return: bool,
}

type ChunkResult = std::result::Result<(), (usize, String)>;

impl Engine {
    pub fn new() -> Self {
        Engine::default()
    }

    /// Engine with the demo kernels of [`builtins`] registered.
    pub fn with_builtins() -> Self {
        let mut e = Engine::new();
        for k in builtins::kernels() {
            e.register(k);
        }
        e
    }

    /// Adds `kernel`, replacing any kernel of the same name.
    pub fn register(&mut self, kernel: Kernel) -> Option<Kernel> {
        self.kernels.insert(kernel.name.clone(), kernel)
    }

    pub fn kernel(&self, name: &str) -> Option<&Kernel> {
        self.kernels.get(name)
    }

    pub fn kernel_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.kernels.keys().map(String::as_str).collect();
        names.sort();
        names
    }

    pub fn last_path(&self) -> Option<ExecPath> {
        *self.last_path.lock().unwrap()
    }

    fn set_path(&self, path: ExecPath) {
        *self.last_path.lock().unwrap() = Some(path);
    }

    fn pool(&self, workers: usize) -> Result<Arc<ThreadPool>> {
        let mut pools = self.pools.lock().unwrap();
        if let Some(p) = pools.get(&workers) {
            return Ok(p.clone());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("vecbind-worker-{i}"))
            .build()
            .map_err(|e| Error::Capacity(format!("cannot start {workers} workers: {e}")))?;
        let pool = Arc::new(pool);
        pools.insert(workers, pool.clone());
        Ok(pool)
    }

    /// Maps `f` over `items` on the worker pool, preserving order.
    pub(crate) fn run_parallel<I, R, F>(
        &self,
        workers: usize,
        items: Vec<I>,
        f: F,
    ) -> Result<Vec<R>>
    where
        I: Send,
        R: Send,
        F: Fn(I) -> R + Sync + Send,
    {
        let pool = self.pool(workers)?;
        Ok(pool.install(|| items.into_par_iter().map(f).collect()))
    }

    /// Calls the registered kernel `name`.
    pub fn call(&self, name: &str, args: &[Value], cfg: &ExecConfig) -> Result<Vec<Value>> {
        let kernel = self
            .kernel(name)
            .ok_or_else(|| Error::Usage(format!("no kernel named '{name}'")))?;
        self.call_kernel(kernel, args, cfg)
    }

    /// Runs a vectored call of `kernel` and returns its outputs: the return
    /// value first, then lifted out-parameters in declaration order.
    pub fn call_kernel(
        &self,
        kernel: &Kernel,
        args: &[Value],
        cfg: &ExecConfig,
    ) -> Result<Vec<Value>> {
        let plan = &kernel.plan;
        let spec = validate(args, plan)?;
        let inputs: Vec<Input<'_>> = args
            .iter()
            .zip(&plan.visible_params)
            .map(|(a, p)| match (a, p.base) {
                (Value::Real(x), _) => Input::Real(Cow::Borrowed(x.data())),
                (Value::Int(x), ElemType::Real64) => {
                    Input::Real(Cow::Owned(x.data().iter().map(|&v| v as f64).collect()))
                }
                (Value::Int(x), _) => Input::Int(x.data()),
                (Value::Str(x), _) => Input::Str(x.data()),
            })
            .collect();
        let layout = slot_layout(plan);

        let n = spec.num_iterations;
        let mut buffers = Vec::with_capacity(plan.output_spec.len());
        for (o, &w) in plan.output_spec.iter().zip(&spec.output_widths) {
            buffers.push(match o.base {
                ElemType::Real64 => Buffer::Real(vec![0.0; n * w]),
                ElemType::Int64 => Buffer::Int(vec![0; n * w]),
                ElemType::Str => {
                    return Err(Error::Usage(format!(
                        "{}: string outputs are not supported",
                        kernel.name
                    )))
                }
            });
        }

        let parallel = kernel.pure && spec.vectored && spec.isomorphic() && cfg.wants_parallel(n);
        let ranges: Vec<Range<usize>> = if parallel {
            partition(n, cfg.num_workers)
        } else {
            partition(n, 1)
        };
        let mut chunks: Vec<(Range<usize>, Vec<OutBuf<'_>>)> =
            ranges.iter().map(|r| (r.clone(), Vec::new())).collect();
        for (buf, &w) in buffers.iter_mut().zip(&spec.output_widths) {
            match buf {
                Buffer::Real(v) => {
                    for (c, piece) in split_by_ranges(v, &ranges, w).into_iter().enumerate() {
                        chunks[c].1.push(OutBuf::Real(piece));
                    }
                }
                Buffer::Int(v) => {
                    for (c, piece) in split_by_ranges(v, &ranges, w).into_iter().enumerate() {
                        chunks[c].1.push(OutBuf::Int(piece));
                    }
                }
            }
        }

        let frame = Frame {
            kernel,
            spec: &spec,
            inputs: &inputs,
            layout: &layout,
            has_return: matches!(
                plan.output_spec.first().map(|o| &o.source),
                Some(OutputSource::Return)
            ),
        };
        let results: Vec<ChunkResult> = if parallel {
            let path = ExecPath::Parallel {
                chunks: chunks.len(),
            };
            let r = self.run_parallel(cfg.num_workers, chunks, |(r, outs)| frame.run(r, outs))?;
            self.set_path(path);
            r
        } else {
            self.set_path(ExecPath::Serial);
            chunks
                .into_iter()
                .map(|(r, outs)| frame.run(r, outs))
                .collect()
        };
        if let Some((iteration, message)) = results
            .into_iter()
            .filter_map(|r| r.err())
            .min_by_key(|(i, _)| *i)
        {
            return Err(Error::Kernel {
                kernel: kernel.name.clone(),
                iteration,
                message,
            });
        }

        buffers
            .into_iter()
            .zip(spec.output_shapes.iter().cloned())
            .map(|(b, shape)| match b {
                Buffer::Real(v) => NdArray::new(shape, v).map(Value::Real),
                Buffer::Int(v) => NdArray::new(shape, v).map(Value::Int),
            })
            .collect()
    }
}

fn slot_layout(plan: &WrapperPlan) -> Vec<SlotSource> {
    let mut layout = vec![SlotSource::Len(0); plan.decl.params.len()];
    for (a, p) in plan.visible_params.iter().enumerate() {
        layout[p.decl_index] = SlotSource::Arg(a);
    }
    for (h, p) in plan.hidden_params.iter().enumerate() {
        layout[p.decl_index] = match &p.role {
            HiddenRole::LenOf(_) => SlotSource::Len(h),
            HiddenRole::AllocOut => {
                let o = plan
                    .output_spec
                    .iter()
                    .position(|o| o.source == OutputSource::Param(p.name.clone()))
                    .expect("every AllocOut parameter has an output");
                SlotSource::Out(o)
            }
        };
    }
    layout
}

impl Frame<'_> {
    fn run<'b>(&'b self, range: Range<usize>, outs: Vec<OutBuf<'b>>) -> ChunkResult {
        let mut ret: Option<OutBuf<'b>> = None;
        let mut iters: Vec<Option<OutIter<'b>>> = Vec::with_capacity(outs.len());
        for (o, buf) in outs.into_iter().enumerate() {
            if o == 0 && self.has_return {
                ret = Some(buf);
                iters.push(None);
                continue;
            }
            let w = self.spec.output_widths[o];
            iters.push(Some(match buf {
                OutBuf::Real(b) => OutIter::Real(b.chunks_mut(w)),
                OutBuf::Int(b) => OutIter::Int(b.chunks_mut(w)),
            }));
        }

        let spec = self.spec;
        if let (Some(f), Some(OutBuf::Real(out)), [SlotSource::Arg(0)], [Input::Real(d)]) = (
            self.kernel.body.as_unary(),
            ret.as_mut(),
            self.layout,
            self.inputs,
        ) {
            // Scalar-to-scalar body over contiguous input: no slot marshaling.
            if spec.strides[0] == 1 {
                for (o, &x) in out.iter_mut().zip(&d[range]) {
                    *o = f(x);
                }
                return Ok(());
            }
        }
        let mut slots: Vec<Slot<'b>> = Vec::with_capacity(self.layout.len());
        for (k, i) in range.enumerate() {
            slots.clear();
            for &src in self.layout {
                slots.push(match src {
                    SlotSource::Arg(a) => {
                        let start = i * spec.strides[a];
                        let end = start + spec.views[a];
                        match &self.inputs[a] {
                            Input::Real(d) => Slot::Real(&d[start..end]),
                            Input::Int(d) => Slot::Int(&d[start..end]),
                            Input::Str(d) => Slot::Str(&d[start..end]),
                        }
                    }
                    SlotSource::Len(h) => Slot::Len(spec.hidden_values[h]),
                    SlotSource::Out(o) => match iters[o].as_mut() {
                        Some(OutIter::Real(it)) => {
                            Slot::OutReal(it.next().expect("sized per iteration"))
                        }
                        Some(OutIter::Int(it)) => {
                            Slot::OutInt(it.next().expect("sized per iteration"))
                        }
                        None => unreachable!("return buffer is not a parameter"),
                    },
                });
            }
            let r = self.kernel.body.invoke(&mut slots).map_err(|e| (i, e.0))?;
            match (&mut ret, r) {
                (None, _) => {}
                (Some(OutBuf::Real(b)), Ret::Real(v)) => b[k] = v,
                (Some(OutBuf::Int(b)), Ret::Int(v)) => b[k] = v,
                (Some(_), other) => {
                    return Err((
                        i,
                        format!("return value {other:?} does not match the declaration"),
                    ))
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Shape;
    use crate::decl::{parse_declarations, Annotation};

    fn real(dims: &[usize], data: &[f64]) -> Value {
        Value::Real(NdArray::from_slice(dims, data).unwrap())
    }

    #[test]
    fn vmult_oracle_cases() {
        let e = Engine::with_builtins();
        let cfg = ExecConfig::serial();
        let out = e
            .call(
                "vmult",
                &[real(&[3], &[1., 2., 3.]), real(&[3], &[5., 5., 5.])],
                &cfg,
            )
            .unwrap();
        assert_eq!(out, [real(&[3], &[5., 10., 15.])]);

        let arr = real(&[2, 3], &[5., 5., 5., 100., 100., 100.]);
        let out = e
            .call("vmult", &[arr, real(&[3], &[3., 4., 5.])], &cfg)
            .unwrap();
        assert_eq!(out, [real(&[2, 3], &[15., 20., 25., 300., 400., 500.])]);

        let err = e
            .call(
                "vmult",
                &[real(&[3], &[1., 2., 3.]), real(&[2], &[3., 4.])],
                &cfg,
            )
            .unwrap_err();
        assert_eq!(err.to_string(), "Array shape or length mismatch");
    }

    #[test]
    fn integer_literals_widen() {
        let e = Engine::with_builtins();
        let x = Value::Int(NdArray::vector(vec![1, 2, 3]).unwrap());
        let y = Value::Int(NdArray::vector(vec![5, 5, 5]).unwrap());
        let out = e.call("vmult", &[x, y], &ExecConfig::serial()).unwrap();
        assert_eq!(out, [real(&[3], &[5., 10., 15.])]);
    }

    #[test]
    fn hypot_triple() {
        let e = Engine::with_builtins();
        let out = e
            .call(
                "hypot",
                &[real(&[1], &[3.]), real(&[1], &[4.])],
                &ExecConfig::serial(),
            )
            .unwrap();
        assert_eq!(out, [real(&[1], &[5.])]);
        let out = e
            .call(
                "hypot",
                &[real(&[], &[3.]), real(&[], &[4.])],
                &ExecConfig::parallel(4),
            )
            .unwrap();
        assert_eq!(out, [real(&[], &[5.])]);
        // Not vectored, so never parallel.
        assert_eq!(e.last_path(), Some(ExecPath::Serial));
    }

    #[test]
    fn stride_zero_forces_serial() {
        let e = Engine::with_builtins();
        let x = real(&[4], &[3., 6., 9., 12.]);
        let out = e
            .call(
                "hypot",
                &[x.clone(), real(&[], &[4.])],
                &ExecConfig::parallel(2),
            )
            .unwrap();
        assert_eq!(
            out,
            [real(
                &[4],
                &[5., 7.211102550927978, 9.848857801796104, 12.649110640673518]
            )]
        );
        assert_eq!(e.last_path(), Some(ExecPath::Serial));
        e.call("hypot", &[x.clone(), x], &ExecConfig::parallel(2))
            .unwrap();
        assert_eq!(e.last_path(), Some(ExecPath::Parallel { chunks: 2 }));
    }

    #[test]
    fn threshold_is_strict() {
        let e = Engine::with_builtins();
        let x = Value::Real(NdArray::new(Shape::new([1000]).unwrap(), vec![0.5; 1000]).unwrap());
        let cfg = ExecConfig::default().with_workers(2);
        e.call("sin", std::slice::from_ref(&x), &set_threshold(&cfg, 1000))
            .unwrap();
        assert_eq!(e.last_path(), Some(ExecPath::Serial));
        e.call(
            "sin",
            std::slice::from_ref(&x),
            &set_threshold(&cfg, 100000),
        )
        .unwrap();
        assert_eq!(e.last_path(), Some(ExecPath::Serial));
        e.call("sin", &[x], &set_threshold(&cfg, 999)).unwrap();
        assert_eq!(e.last_path(), Some(ExecPath::Parallel { chunks: 2 }));
    }

    #[test]
    fn registration() {
        let d = parse_declarations("double hypot(double x, double y);")
            .unwrap()
            .remove(0);
        let bad = KernelBody::unary(f64::sin);
        assert!(matches!(
            register_kernel(&d, &Annotation::empty("hypot"), bad),
            Err(Error::Registration(_))
        ));

        // Re-registration replaces the binding.
        let mut e = Engine::with_builtins();
        let body = KernelBody::new(2, |s| {
            Ok(Ret::Real(s[0].real_scalar()? + s[1].real_scalar()?))
        });
        let k = register_kernel(&d, &Annotation::empty("hypot"), body).unwrap();
        assert!(e.register(k).is_some());
        let out = e
            .call(
                "hypot",
                &[real(&[], &[3.]), real(&[], &[4.])],
                &ExecConfig::serial(),
            )
            .unwrap();
        assert_eq!(out, [real(&[], &[7.])]);
    }

    #[test]
    fn kernel_error_reports_first_failing_iteration() {
        let d = parse_declarations("double inv(double x);")
            .unwrap()
            .remove(0);
        let body = KernelBody::new(1, |s| {
            let x = s[0].real_scalar()?;
            if x < 0.0 {
                Err(KernelFault(format!("negative input {x}")))
            } else {
                Ok(Ret::Real(1.0 / x))
            }
        });
        let k = register_kernel(&d, &Annotation::empty("inv"), body).unwrap();
        let e = Engine::new();
        let mut data = vec![1.0; 100];
        data[37] = -1.0;
        data[80] = -2.0;
        let x = real(&[100], &data);
        for cfg in [ExecConfig::serial(), ExecConfig::parallel(4)] {
            match e.call_kernel(&k, std::slice::from_ref(&x), &cfg) {
                Err(Error::Kernel { iteration, .. }) => assert_eq!(iteration, 37),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn impure_kernels_stay_serial() {
        let e = Engine::with_builtins();
        let k = e.kernel("sin").unwrap().clone().impure();
        let x = real(&[8], &[0.; 8]);
        e.call_kernel(&k, &[x], &ExecConfig::parallel(4)).unwrap();
        assert_eq!(e.last_path(), Some(ExecPath::Serial));
    }

    #[test]
    fn env_overrides() {
        let cfg = ExecConfig::from_vars(|k| match k {
            "VECBIND_MIN_ELEMENTS" => Some("5000".into()),
            "VECBIND_NUM_WORKERS" => Some("3".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(
            (cfg.min_elements, cfg.num_workers, cfg.mode),
            (5000, 3, Mode::Auto)
        );
        assert!(
            ExecConfig::from_vars(|k| (k == "VECBIND_NUM_WORKERS").then(|| "0".into())).is_err()
        );
        assert!(
            ExecConfig::from_vars(|k| (k == "VECBIND_MIN_ELEMENTS").then(|| "x".into())).is_err()
        );
    }

    #[test]
    fn int_return_and_visible_int_param() {
        let e = Engine::with_builtins();
        let s =
            Value::Str(NdArray::from_slice(&[2], &["abc".to_string(), "".to_string()]).unwrap());
        let out = e.call("strlen", &[s], &ExecConfig::serial()).unwrap();
        assert_eq!(out, [Value::Int(NdArray::vector(vec![3, 0]).unwrap())]);
    }
}
