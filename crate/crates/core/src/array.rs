//! Dense row-major n-dimensional arrays.
//!
//! Scalars are rank-0 arrays: an empty dimension list holding exactly one
//! element. Storage is always contiguous; there are no views.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Element;

/// Element type tag of a dynamically typed array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElemType {
    Real64,
    Int64,
    Str,
}

impl ElemType {
    /// Whether a value of type `self` may be passed where `target` is declared.
    pub fn coercible_to(self, target: ElemType) -> bool {
        self == target || (self == ElemType::Int64 && target == ElemType::Real64)
    }

    /// C spelling used in renderings and unparsed declarations.
    pub fn c_name(self) -> &'static str {
        match self {
            ElemType::Real64 => "double",
            ElemType::Int64 => "int",
            ElemType::Str => "char *",
        }
    }
}

impl fmt::Display for ElemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElemType::Real64 => "Real64",
            ElemType::Int64 => "Int64",
            ElemType::Str => "Str",
        };
        f.write_str(s)
    }
}

/// Row-major dimension list, outermost first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    /// Every dim must be at least 1 and the element count must fit in `usize`.
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Shape(format!("dimension {pos} has extent 0")));
        }
        checked_product(&dims)
            .ok_or_else(|| Error::Shape(format!("element count of {dims:?} overflows")))?;
        Ok(Shape { dims })
    }

    pub fn scalar() -> Self {
        Shape { dims: Vec::new() }
    }

    pub fn vector(len: usize) -> Result<Self> {
        Shape::new(vec![len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Offset of `index` in the flat row-major data.
    pub fn linear_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.rank() || index.iter().zip(&self.dims).any(|(&i, &d)| i >= d) {
            return Err(Error::Index {
                index: index.to_vec(),
                dims: self.dims.clone(),
            });
        }
        Ok(index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i))
    }

    /// Inverse of [`Shape::linear_index`].
    pub fn multi_index(&self, mut offset: usize) -> Result<Vec<usize>> {
        if offset >= self.element_count() {
            return Err(Error::Index {
                index: vec![offset],
                dims: self.dims.clone(),
            });
        }
        let mut index = vec![0; self.rank()];
        for (slot, &d) in index.iter_mut().zip(&self.dims).rev() {
            *slot = offset % d;
            offset /= d;
        }
        Ok(index)
    }

    /// Splits into the leading `rank - trailing` dims and the last `trailing` dims.
    pub fn split_trailing(&self, trailing: usize) -> Option<(&[usize], &[usize])> {
        let lead = self.rank().checked_sub(trailing)?;
        Some(self.dims.split_at(lead))
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.dims
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dims.is_empty() {
            return f.write_str("scalar");
        }
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

pub(crate) fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

/// Typed n-dimensional array with contiguous row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Element> NdArray<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.element_count() {
            return Err(Error::Shape(format!(
                "{} elements supplied for shape {shape} ({} expected)",
                data.len(),
                shape.element_count()
            )));
        }
        Ok(NdArray { shape, data })
    }

    /// Copies `data` into a new array of the given dims.
    pub fn from_slice(dims: &[usize], data: &[T]) -> Result<Self> {
        NdArray::new(Shape::new(dims)?, data.to_vec())
    }

    pub fn scalar(value: T) -> Self {
        NdArray {
            shape: Shape::scalar(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<T>) -> Result<Self> {
        NdArray::new(Shape::vector(data.len())?, data)
    }

    /// Rank-1 array that may have zero length. Only index results use this.
    pub(crate) fn index_list(data: Vec<T>) -> Self {
        NdArray {
            shape: Shape {
                dims: vec![data.len()],
            },
            data,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<&T> {
        Ok(&self.data[self.shape.linear_index(index)?])
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        NdArray::new(shape, self.data)
    }

    pub fn map<U: Element>(&self, f: impl Fn(&T) -> U) -> NdArray<U> {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

/// Dynamically typed array, the argument and result carrier of wrapped calls.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(NdArray<f64>),
    Int(NdArray<i64>),
    Str(NdArray<String>),
}

impl Value {
    pub fn etype(&self) -> ElemType {
        match self {
            Value::Real(_) => ElemType::Real64,
            Value::Int(_) => ElemType::Int64,
            Value::Str(_) => ElemType::Str,
        }
    }

    pub fn shape(&self) -> &Shape {
        match self {
            Value::Real(a) => a.shape(),
            Value::Int(a) => a.shape(),
            Value::Str(a) => a.shape(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape().element_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_real(&self) -> Option<&NdArray<f64>> {
        match self {
            Value::Real(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&NdArray<i64>> {
        match self {
            Value::Int(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&NdArray<String>> {
        match self {
            Value::Str(a) => Some(a),
            _ => None,
        }
    }

    /// Real64 view of a numeric value, widening Int64 elements.
    pub fn to_real(&self) -> Option<NdArray<f64>> {
        match self {
            Value::Real(a) => Some(a.clone()),
            Value::Int(a) => Some(a.map(|&v| v as f64)),
            Value::Str(_) => None,
        }
    }
}

impl From<NdArray<f64>> for Value {
    fn from(a: NdArray<f64>) -> Self {
        Value::Real(a)
    }
}

impl From<NdArray<i64>> for Value {
    fn from(a: NdArray<i64>) -> Self {
        Value::Int(a)
    }
}

impl From<NdArray<String>> for Value {
    fn from(a: NdArray<String>) -> Self {
        Value::Str(a)
    }
}

/// Builds a dynamically typed array, checking the element count.
pub fn make_array(etype: ElemType, shape: Shape, data: Elements) -> Result<Value> {
    match (etype, data) {
        (ElemType::Real64, Elements::Real(d)) => Ok(Value::Real(NdArray::new(shape, d)?)),
        (ElemType::Real64, Elements::Int(d)) => Ok(Value::Real(NdArray::new(
            shape,
            d.into_iter().map(|v| v as f64).collect(),
        )?)),
        (ElemType::Int64, Elements::Int(d)) => Ok(Value::Int(NdArray::new(shape, d)?)),
        (ElemType::Str, Elements::Str(d)) => Ok(Value::Str(NdArray::new(shape, d)?)),
        (etype, data) => Err(Error::Shape(format!(
            "{} elements cannot populate a {etype} array",
            data.etype()
        ))),
    }
}

/// Flat element sequence for [`make_array`].
#[derive(Debug, Clone, PartialEq)]
pub enum Elements {
    Real(Vec<f64>),
    Int(Vec<i64>),
    Str(Vec<String>),
}

impl Elements {
    pub fn etype(&self) -> ElemType {
        match self {
            Elements::Real(_) => ElemType::Real64,
            Elements::Int(_) => ElemType::Int64,
            Elements::Str(_) => ElemType::Str,
        }
    }
}
