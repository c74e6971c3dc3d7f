//! Parameters of vectorization.
//!
//! Given a [`WrapperPlan`] and the shapes of the actual arguments, pick the
//! master argument (highest excess rank, leftmost on ties), derive the
//! iteration count from its excess dims and the per-argument strides from the
//! expected dims, and check that every argument can be addressed each
//! iteration.

use std::fmt;

use serde::Serialize;

use crate::array::{checked_product, ElemType, Shape, Value};
use crate::decl::{HiddenRole, OutputSource, OutputSpec, WrapperPlan};
use crate::error::{Error, Result};

pub use crate::decl::expected_rank;

/// Largest iteration count a wrapper loop may run, matching a signed loop index.
pub const MAX_ITERATIONS: usize = isize::MAX as usize;

/// Resolved vectorization of one call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VecSpec {
    /// Index of the master among the visible arguments.
    pub master: usize,
    pub num_iterations: usize,
    /// Per visible argument; 0 means the argument is reused every iteration.
    pub strides: Vec<usize>,
    pub out_excess_dims: Vec<usize>,
    pub vectored: bool,
    /// Elements of each visible argument the kernel sees per iteration.
    pub views: Vec<usize>,
    /// Value of each hidden length parameter, in `hidden_params` order (0 for buffers).
    pub hidden_values: Vec<usize>,
    pub output_shapes: Vec<Shape>,
    /// Elements of each output written per iteration.
    pub output_widths: Vec<usize>,
}

impl VecSpec {
    /// True when every argument advances in lockstep with the master.
    pub fn isomorphic(&self) -> bool {
        self.strides.iter().all(|&s| s > 0)
    }
}

/// Number of times the kernel runs for an argument of shape `actual` whose
/// parameter expects `expected_rank` indices.
pub fn num_iterations(actual: &Shape, expected_rank: usize) -> Result<usize> {
    let (excess, _) = split(actual, expected_rank)?;
    let n = checked_product(excess).filter(|&n| n <= MAX_ITERATIONS);
    n.ok_or_else(|| {
        Error::Capacity(format!(
            "{} iterations exceed the signed index range",
            excess.iter().map(|&d| d as f64).product::<f64>()
        ))
    })
}

/// Elements covered by the expected dims: the per-iteration advance.
pub fn stride(actual: &Shape, expected_rank: usize) -> Result<usize> {
    let (_, inner) = split(actual, expected_rank)?;
    Ok(inner.iter().product())
}

fn split(actual: &Shape, expected_rank: usize) -> Result<(&[usize], &[usize])> {
    actual.split_trailing(expected_rank).ok_or(Error::Rank {
        actual: actual.rank(),
        expected: expected_rank,
    })
}

fn excess_rank(shape: &Shape, expected: usize) -> usize {
    shape.rank().saturating_sub(expected)
}

/// Index of the argument with the greatest excess rank, leftmost on ties.
pub fn select_master_by_shape(shapes: &[&Shape], expected: &[usize]) -> usize {
    let mut best = 0;
    for (i, (s, &e)) in shapes.iter().zip(expected).enumerate() {
        if excess_rank(s, e) > excess_rank(shapes[best], expected[best]) {
            best = i;
        }
    }
    best
}

pub fn select_master(args: &[Value], plan: &WrapperPlan) -> usize {
    let shapes: Vec<&Shape> = args.iter().map(Value::shape).collect();
    let expected: Vec<usize> = plan
        .visible_params
        .iter()
        .map(|p| p.expected_rank)
        .collect();
    select_master_by_shape(&shapes, &expected)
}

/// Shape of one output: the master's excess dims followed by the trailing
/// `prescribed_rank` dims of `extent_source`.
pub fn output_shape(spec: &VecSpec, out: &OutputSpec, extent_source: &Shape) -> Shape {
    let dims = extent_source.dims();
    let trailing = &dims[dims.len().saturating_sub(out.prescribed_rank)..];
    let mut all = spec.out_excess_dims.clone();
    all.extend_from_slice(trailing);
    Shape::new(all).expect("dims come from valid shapes")
}

fn usage(plan: &WrapperPlan) -> Error {
    Error::Usage(format!("Usage: {}", plan.usage()))
}

/// Checks the actual arguments of a call and derives its [`VecSpec`].
pub fn validate(args: &[Value], plan: &WrapperPlan) -> Result<VecSpec> {
    let meta: Vec<(ElemType, &Shape)> = args.iter().map(|a| (a.etype(), a.shape())).collect();
    validate_shapes(&meta, plan)
}

/// [`validate`] over element types and shapes alone.
pub fn validate_shapes(args: &[(ElemType, &Shape)], plan: &WrapperPlan) -> Result<VecSpec> {
    let params = &plan.visible_params;
    if args.len() != params.len() {
        return Err(usage(plan));
    }
    for (i, ((etype, _), p)) in args.iter().zip(params).enumerate() {
        if !etype.coercible_to(p.base) {
            return Err(Error::Usage(format!(
                "argument {} of {}: cannot pass {etype} as {}",
                i + 1,
                plan.name(),
                p.base
            )));
        }
    }

    let shapes: Vec<&Shape> = args.iter().map(|(_, s)| *s).collect();
    let expected: Vec<usize> = params.iter().map(|p| p.expected_rank).collect();
    // Rank errors take precedence over shape conflicts.
    let mut per_iter = Vec::with_capacity(args.len());
    for (s, &e) in shapes.iter().zip(&expected) {
        per_iter.push(stride(s, e)?);
    }

    let master = select_master_by_shape(&shapes, &expected);
    let master_rank = expected[master];
    let num_iterations = num_iterations(shapes[master], master_rank)?;
    let (master_excess, _) = split(shapes[master], master_rank)?;

    let mut strides = Vec::with_capacity(args.len());
    for (i, (s, &e)) in shapes.iter().zip(&expected).enumerate() {
        let (excess, _) = split(s, e)?;
        if excess == master_excess {
            strides.push(per_iter[i]);
        } else if excess.is_empty() {
            // Reused every iteration; must hold exactly one iteration's worth.
            if e == master_rank && per_iter[i] != per_iter[master] {
                return Err(Error::Vector);
            }
            strides.push(0);
        } else {
            return Err(Error::Vector);
        }
    }

    // Length parameters: each array is bound to the length parameter it
    // feeds, otherwise to the first one; bound arrays must agree with it.
    let lens: Vec<(usize, usize)> = plan
        .hidden_params
        .iter()
        .enumerate()
        .filter_map(|(h, hp)| match &hp.role {
            HiddenRole::LenOf(src) => {
                let i = params.iter().position(|p| &p.name == src)?;
                Some((h, i))
            }
            HiddenRole::AllocOut => None,
        })
        .collect();
    if lens.len()
        != plan
            .hidden_params
            .iter()
            .filter(|h| matches!(h.role, HiddenRole::LenOf(_)))
            .count()
    {
        return Err(Error::Usage(format!(
            "{}: length parameter bound to an unknown argument",
            plan.name()
        )));
    }
    let mut hidden_values = vec![0; plan.hidden_params.len()];
    for &(h, src) in &lens {
        hidden_values[h] = per_iter[src];
    }
    let bound_len = |arg: usize| -> Option<usize> {
        lens.iter()
            .find(|&&(_, src)| src == arg)
            .or_else(|| lens.first())
            .map(|&(h, _)| hidden_values[h])
    };
    for (i, &e) in expected.iter().enumerate() {
        if e >= 1 {
            if let Some(len) = bound_len(i) {
                if per_iter[i] != len {
                    return Err(Error::Vector);
                }
            }
        }
    }

    let mut spec = VecSpec {
        master,
        num_iterations,
        strides,
        out_excess_dims: master_excess.to_vec(),
        vectored: shapes
            .iter()
            .zip(&expected)
            .any(|(s, &e)| excess_rank(s, e) > 0),
        views: per_iter.clone(),
        hidden_values,
        output_shapes: Vec::new(),
        output_widths: Vec::new(),
    };

    for out in &plan.output_spec {
        let r = out.prescribed_rank;
        let source = if r <= master_rank {
            Some(master)
        } else {
            expected.iter().position(|&e| e >= r)
        };
        let Some(source) = source else {
            return Err(Error::Usage(format!(
                "{}: no argument determines the extent of a rank-{r} output",
                plan.name()
            )));
        };
        let shape = output_shape(&spec, out, shapes[source]);
        let width: usize = shape.dims()[spec.out_excess_dims.len()..].iter().product();
        if r >= 1 && matches!(out.source, OutputSource::Param(_)) {
            if let Some(len) = lens.first().map(|&(h, _)| spec.hidden_values[h]) {
                if width != len {
                    return Err(Error::Vector);
                }
            }
        }
        spec.output_shapes.push(shape);
        spec.output_widths.push(width);
    }
    Ok(spec)
}

/// Per-argument diagnostics for a dry-run call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgReport {
    pub name: String,
    pub expected_rank: usize,
    pub actual_rank: usize,
    pub excess_dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub function: String,
    pub args: Vec<ArgReport>,
    pub master: Option<usize>,
    pub spec: Option<VecSpec>,
    pub failure: Option<String>,
}

/// Runs validation on shapes only and reports what a call would do.
pub fn explain(plan: &WrapperPlan, shapes: &[Shape]) -> ShapeReport {
    let args = plan
        .visible_params
        .iter()
        .zip(shapes)
        .map(|(p, s)| ArgReport {
            name: p.name.clone(),
            expected_rank: p.expected_rank,
            actual_rank: s.rank(),
            excess_dims: s
                .split_trailing(p.expected_rank)
                .map(|(lead, _)| lead.to_vec())
                .unwrap_or_default(),
        })
        .collect();
    let meta: Vec<(ElemType, &Shape)> = plan
        .visible_params
        .iter()
        .zip(shapes)
        .map(|(p, s)| (p.base, s))
        .chain(
            shapes
                .iter()
                .skip(plan.visible_params.len())
                .map(|s| (ElemType::Real64, s)),
        )
        .collect();
    let (spec, failure) = match validate_shapes(&meta, plan) {
        Ok(spec) => (Some(spec), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let master = spec.as_ref().map(|s| s.master).or_else(|| {
        (shapes.len() == plan.visible_params.len() && !shapes.is_empty()).then(|| {
            let refs: Vec<&Shape> = shapes.iter().collect();
            let expected: Vec<usize> = plan
                .visible_params
                .iter()
                .map(|p| p.expected_rank)
                .collect();
            select_master_by_shape(&refs, &expected)
        })
    });
    ShapeReport {
        function: plan.name().to_string(),
        args,
        master,
        spec,
        failure,
    }
}

impl fmt::Display for ShapeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "function: {}", self.function)?;
        for (i, a) in self.args.iter().enumerate() {
            let marker = if self.master == Some(i) {
                " (master)"
            } else {
                ""
            };
            writeln!(
                f,
                "  arg {i} {}: expected rank {}, actual rank {}, excess dims {:?}{marker}",
                a.name, a.expected_rank, a.actual_rank, a.excess_dims
            )?;
        }
        match (&self.spec, &self.failure) {
            (Some(s), _) => {
                writeln!(f, "iterations: {}", s.num_iterations)?;
                writeln!(f, "strides: {:?}", s.strides)?;
                writeln!(f, "vectored: {}", s.vectored)?;
                let shapes: Vec<String> = s.output_shapes.iter().map(|s| s.to_string()).collect();
                write!(f, "outputs: [{}]", shapes.join(", "))
            }
            (None, Some(msg)) => write!(f, "invalid: {msg}"),
            (None, None) => Ok(()),
        }
    }
}
