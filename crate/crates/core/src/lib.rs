//! Vectorizing wrappers for scalar and low-rank kernels.
//!
//! Kernels are declared with C-like prototypes ([`decl`]), lifted to accept
//! arguments of any higher rank ([`dispatch`]), and executed serially or in
//! parallel over contiguous iteration chunks ([`engine`]). [`gen`] renders the
//! generated wrapper for inspection and [`bench`] measures speedups.

pub mod array;
pub mod bench;
pub mod decl;
pub mod dispatch;
pub mod engine;
pub mod error;
pub mod gen;
pub mod scalar;

pub use array::{make_array, ElemType, Elements, NdArray, Shape, Value};
pub use decl::{
    apply_annotations, build_plans, parse_annotations, parse_declarations, Annotation, FuncDecl,
    ParamDecl, WrapperPlan,
};
pub use dispatch::{validate, VecSpec};
pub use engine::{BinaryOp, Engine, ExecConfig, ExecPath, Kernel, KernelBody, Mode};
pub use error::{Error, Result};
pub use scalar::{Element, Real};

/// Double-precision array, the element type of every wrapped kernel.
pub type RealArray = NdArray<f64>;
pub type IntArray = NdArray<i64>;
pub type StrArray = NdArray<String>;
/// Single-precision array for the generic operators.
pub type Real32Array = NdArray<f32>;
