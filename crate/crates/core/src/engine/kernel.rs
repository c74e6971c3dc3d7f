use std::fmt;
use std::sync::Arc;

use crate::decl::{apply_annotations, Annotation, FuncDecl, WrapperPlan};
use crate::error::{Error, Result};

/// One parameter of a single kernel invocation, in declaration order.
///
/// Input slots borrow the argument at `base + iteration * stride`; output
/// slots borrow the part of the result buffer owned by this iteration.
#[derive(Debug)]
pub enum Slot<'a> {
    Real(&'a [f64]),
    Int(&'a [i64]),
    Str(&'a [String]),
    OutReal(&'a mut [f64]),
    OutInt(&'a mut [i64]),
    Len(usize),
}

impl<'a> Slot<'a> {
    pub fn real(&self) -> Result<&'a [f64], KernelFault> {
        match self {
            Slot::Real(s) => Ok(*s),
            other => Err(KernelFault::slot("double input", other)),
        }
    }

    pub fn real_scalar(&self) -> Result<f64, KernelFault> {
        Ok(self.real()?[0])
    }

    pub fn int(&self) -> Result<&'a [i64], KernelFault> {
        match self {
            Slot::Int(s) => Ok(*s),
            other => Err(KernelFault::slot("int input", other)),
        }
    }

    pub fn str_scalar(&self) -> Result<&'a str, KernelFault> {
        match self {
            Slot::Str(s) => Ok(&s[0]),
            other => Err(KernelFault::slot("string input", other)),
        }
    }

    pub fn len_value(&self) -> Result<usize, KernelFault> {
        match self {
            Slot::Len(n) => Ok(*n),
            other => Err(KernelFault::slot("length", other)),
        }
    }

    pub fn out_real(&mut self) -> Result<&mut [f64], KernelFault> {
        match self {
            Slot::OutReal(s) => Ok(s),
            other => Err(KernelFault::slot("double output", other)),
        }
    }

    pub fn out_int(&mut self) -> Result<&mut [i64], KernelFault> {
        match self {
            Slot::OutInt(s) => Ok(s),
            other => Err(KernelFault::slot("int output", other)),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Slot::Real(_) => "double input",
            Slot::Int(_) => "int input",
            Slot::Str(_) => "string input",
            Slot::OutReal(_) => "double output",
            Slot::OutInt(_) => "int output",
            Slot::Len(_) => "length",
        }
    }
}

/// Scalar return value of one invocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ret {
    Void,
    Real(f64),
    Int(i64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelFault(pub String);

impl KernelFault {
    fn slot(wanted: &str, got: &Slot<'_>) -> Self {
        KernelFault(format!("expected {wanted} slot, found {}", got.kind()))
    }
}

impl fmt::Display for KernelFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

type BodyFn = dyn Fn(&mut [Slot<'_>]) -> Result<Ret, KernelFault> + Send + Sync;

/// Host function called once per iteration with one slot per declared parameter.
#[derive(Clone)]
pub struct KernelBody {
    arity: usize,
    f: Arc<BodyFn>,
    unary: Option<fn(f64) -> f64>,
}

impl KernelBody {
    pub fn new<F>(arity: usize, f: F) -> Self
    where
        F: Fn(&mut [Slot<'_>]) -> Result<Ret, KernelFault> + Send + Sync + 'static,
    {
        KernelBody {
            arity,
            f: Arc::new(f),
            unary: None,
        }
    }

    /// Body of a `double f(double)` function.
    pub fn unary(f: fn(f64) -> f64) -> Self {
        KernelBody {
            unary: Some(f),
            ..KernelBody::new(1, move |s| Ok(Ret::Real(f(s[0].real_scalar()?))))
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// The scalar function when the body came from [`KernelBody::unary`].
    pub(crate) fn as_unary(&self) -> Option<fn(f64) -> f64> {
        self.unary
    }

    #[inline]
    pub(crate) fn invoke(&self, slots: &mut [Slot<'_>]) -> Result<Ret, KernelFault> {
        (self.f)(slots)
    }
}

impl fmt::Debug for KernelBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelBody")
            .field("arity", &self.arity)
            .finish()
    }
}

/// A wrapped function: its plan plus the body that computes one iteration.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub name: String,
    pub plan: WrapperPlan,
    pub body: KernelBody,
    /// Only pure kernels run on the parallel path.
    pub pure: bool,
}

impl Kernel {
    pub fn impure(mut self) -> Self {
        self.pure = false;
        self
    }
}

/// Binds `body` to the plan of `decl` under `ann`.
pub fn register_kernel(decl: &FuncDecl, ann: &Annotation, body: KernelBody) -> Result<Kernel> {
    let plan = apply_annotations(decl, ann)?;
    kernel_from_plan(plan, body)
}

pub fn kernel_from_plan(plan: WrapperPlan, body: KernelBody) -> Result<Kernel> {
    if body.arity() != plan.decl.params.len() {
        return Err(Error::Registration(format!(
            "body of '{}' takes {} parameters, declaration has {}",
            plan.name(),
            body.arity(),
            plan.decl.params.len()
        )));
    }
    Ok(Kernel {
        name: plan.name().to_string(),
        plan,
        body,
        pure: true,
    })
}
