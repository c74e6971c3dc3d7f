//! Elementwise binary operators and `where`, gated by the parallel threshold.

use std::fmt;
use std::mem::MaybeUninit;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::partition::partition;
use super::{Engine, ExecConfig, ExecPath};
use crate::array::{NdArray, Shape, Value};
use crate::error::{Error, Result};
use crate::scalar::{Element, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Le,
    Gt,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 7] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Pow,
    ];

    pub fn is_relational(self) -> bool {
        matches!(self, BinaryOp::Le | BinaryOp::Gt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Pow => "^",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::Le => "le",
            BinaryOp::Gt => "gt",
            BinaryOp::Pow => "pow",
        }
    }

    /// Arithmetic result, or 0/1 for relational operators.
    #[inline]
    pub fn apply<T: Real>(self, a: T, b: T) -> T {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Le => bool_to(a <= b),
            BinaryOp::Gt => bool_to(a > b),
            BinaryOp::Pow => a.powf(b),
        }
    }
}

fn bool_to<T: Real>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

impl FromStr for BinaryOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BinaryOp::ALL
            .into_iter()
            .find(|op| op.symbol() == s || op.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown operator '{s}'")))
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Result shape of a binary operator: equal shapes, or one side rank 0.
fn result_shape(a: &Shape, b: &Shape) -> Result<Shape> {
    if a == b || b.rank() == 0 {
        Ok(a.clone())
    } else if a.rank() == 0 {
        Ok(b.clone())
    } else {
        Err(Error::Vector)
    }
}

#[inline]
fn at<T: Copy>(d: &[T], i: usize) -> T {
    if d.len() == 1 {
        d[0]
    } else {
        d[i]
    }
}

impl Engine {
    /// Fills `n` outputs with `f(i)`, in parallel chunks when `parallel`.
    fn fill<O, F>(&self, n: usize, cfg: &ExecConfig, f: F) -> Result<Vec<O>>
    where
        O: Send,
        F: Fn(usize) -> O + Sync + Send,
    {
        if !cfg.wants_parallel(n) {
            self.set_path(ExecPath::Serial);
            return Ok((0..n).map(f).collect());
        }
        let ranges = partition(n, cfg.num_workers);
        let mut out: Vec<O> = Vec::with_capacity(n);
        let mut pieces = Vec::with_capacity(ranges.len());
        let mut spare: &mut [MaybeUninit<O>] = &mut out.spare_capacity_mut()[..n];
        for r in &ranges {
            let (head, tail) = spare.split_at_mut(r.len());
            pieces.push((r.clone(), head));
            spare = tail;
        }
        let chunks = pieces.len();
        self.run_parallel(cfg.num_workers, pieces, |(r, slots)| {
            for (slot, i) in slots.iter_mut().zip(r) {
                slot.write(f(i));
            }
        })?;
        // SAFETY: the chunks cover 0..n and every chunk wrote all of its
        // slots; a panicking worker propagates before this point.
        unsafe { out.set_len(n) };
        self.set_path(ExecPath::Parallel { chunks });
        Ok(out)
    }

    /// Typed arithmetic or relational operator (relational yields 0/1 in `T`).
    pub fn binary<T: Real>(
        &self,
        op: BinaryOp,
        a: &NdArray<T>,
        b: &NdArray<T>,
        cfg: &ExecConfig,
    ) -> Result<NdArray<T>> {
        let shape = result_shape(a.shape(), b.shape())?;
        let (x, y) = (a.data(), b.data());
        let data = self.fill(shape.element_count(), cfg, |i| op.apply(at(x, i), at(y, i)))?;
        NdArray::new(shape, data)
    }

    /// Relational operator producing an Int64 0/1 array.
    pub fn compare<T: Real>(
        &self,
        op: BinaryOp,
        a: &NdArray<T>,
        b: &NdArray<T>,
        cfg: &ExecConfig,
    ) -> Result<NdArray<i64>> {
        if !op.is_relational() {
            return Err(Error::Usage(format!("'{op}' is not a relational operator")));
        }
        let shape = result_shape(a.shape(), b.shape())?;
        let (x, y) = (a.data(), b.data());
        let data = self.fill(shape.element_count(), cfg, |i| {
            let (u, v) = (at(x, i), at(y, i));
            i64::from(if op == BinaryOp::Le { u <= v } else { u > v })
        })?;
        NdArray::new(shape, data)
    }

    /// Operator on dynamically typed values. Int64 operands are widened to
    /// Real64; relational operators return Int64 0/1.
    pub fn elementwise(
        &self,
        op: BinaryOp,
        a: &Value,
        b: &Value,
        cfg: &ExecConfig,
    ) -> Result<Value> {
        let (Some(x), Some(y)) = (a.to_real(), b.to_real()) else {
            return Err(Error::Usage(format!(
                "operator '{op}' is not defined for strings"
            )));
        };
        if op.is_relational() {
            Ok(Value::Int(self.compare(op, &x, &y, cfg)?))
        } else {
            Ok(Value::Real(self.binary(op, &x, &y, cfg)?))
        }
    }

    /// Ascending flat indices of the nonzero elements of `mask`.
    ///
    /// The parallel path counts nonzeros per chunk, turns the counts into
    /// output offsets, then lets each chunk fill its own range.
    pub fn where_nonzero<T>(&self, mask: &NdArray<T>, cfg: &ExecConfig) -> Result<NdArray<i64>>
    where
        T: Element + Zero,
    {
        let data = mask.data();
        let n = data.len();
        let nonzero = |v: &T| !v.is_zero();
        if !cfg.wants_parallel(n) {
            self.set_path(ExecPath::Serial);
            let idx = (0..n)
                .filter(|&i| nonzero(&data[i]))
                .map(|i| i as i64)
                .collect();
            return Ok(NdArray::index_list(idx));
        }
        let ranges = partition(n, cfg.num_workers);
        let counts = self.run_parallel(cfg.num_workers, ranges.clone(), |r| {
            data[r].iter().filter(|v| nonzero(v)).count()
        })?;
        let total: usize = counts.iter().sum();
        let mut out = vec![0i64; total];
        let mut pieces = Vec::with_capacity(ranges.len());
        let mut rest = out.as_mut_slice();
        for (r, &c) in ranges.iter().zip(&counts) {
            let (head, tail) = rest.split_at_mut(c);
            pieces.push((r.clone(), head));
            rest = tail;
        }
        let chunks = pieces.len();
        self.run_parallel(cfg.num_workers, pieces, |(r, dst)| {
            let hits = r.filter(|&i| nonzero(&data[i]));
            for (d, i) in dst.iter_mut().zip(hits) {
                *d = i as i64;
            }
        })?;
        self.set_path(ExecPath::Parallel { chunks });
        Ok(NdArray::index_list(out))
    }

    /// [`Engine::where_nonzero`] over a numeric value.
    pub fn where_(&self, mask: &Value, cfg: &ExecConfig) -> Result<NdArray<i64>> {
        match mask {
            Value::Real(m) => self.where_nonzero(m, cfg),
            Value::Int(m) => self.where_nonzero(m, cfg),
            Value::Str(_) => Err(Error::Usage("where: mask must be numeric".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Mode;

    fn v(data: &[f64]) -> NdArray<f64> {
        NdArray::vector(data.to_vec()).unwrap()
    }

    #[test]
    fn multiply() {
        let e = Engine::new();
        let r = e
            .binary(
                BinaryOp::Mul,
                &v(&[1., 2., 3.]),
                &v(&[3., 4., 5.]),
                &ExecConfig::serial(),
            )
            .unwrap();
        assert_eq!(r.data(), &[3., 8., 15.]);
    }

    #[test]
    fn pow_with_scalar() {
        let e = Engine::new();
        let two = NdArray::scalar(2.0);
        let r = e
            .binary(BinaryOp::Pow, &v(&[2., 3.]), &two, &ExecConfig::parallel(2))
            .unwrap();
        assert_eq!(r.data(), &[4., 9.]);
        assert_eq!(e.last_path(), Some(ExecPath::Parallel { chunks: 2 }));
        let r = e
            .binary(BinaryOp::Mul, &two, &v(&[2., 3.]), &ExecConfig::serial())
            .unwrap();
        assert_eq!(r.data(), &[4., 6.]);
    }

    #[test]
    fn generic_over_f32() {
        let e = Engine::new();
        let a = NdArray::vector(vec![1.5f32, -2.0]).unwrap();
        let r = e
            .binary(BinaryOp::Add, &a, &a, &ExecConfig::parallel(2))
            .unwrap();
        assert_eq!(r.data(), &[3.0f32, -4.0]);
    }

    #[test]
    fn relational_returns_ints() {
        let e = Engine::new();
        let a = Value::Real(v(&[1., 2., 3.]));
        let b = Value::Int(NdArray::scalar(2));
        let le = e
            .elementwise(BinaryOp::Le, &a, &b, &ExecConfig::serial())
            .unwrap();
        assert_eq!(le, Value::Int(NdArray::vector(vec![1, 1, 0]).unwrap()));
        let gt = e
            .elementwise(BinaryOp::Gt, &a, &b, &ExecConfig::serial())
            .unwrap();
        assert_eq!(gt, Value::Int(NdArray::vector(vec![0, 0, 1]).unwrap()));
    }

    #[test]
    fn shape_mismatch() {
        let e = Engine::new();
        let err = e
            .binary(
                BinaryOp::Add,
                &v(&[1., 2.]),
                &v(&[1., 2., 3.]),
                &ExecConfig::serial(),
            )
            .unwrap_err();
        assert_eq!(err.to_string(), "Array shape or length mismatch");
    }

    #[test]
    fn ieee_division() {
        let e = Engine::new();
        let r = e
            .binary(
                BinaryOp::Div,
                &v(&[1., -1., 0.]),
                &NdArray::scalar(0.0),
                &ExecConfig::serial(),
            )
            .unwrap();
        assert_eq!(r.data()[0], f64::INFINITY);
        assert_eq!(r.data()[1], f64::NEG_INFINITY);
        assert!(r.data()[2].is_nan());
    }

    #[test]
    fn discriminant_matches_scalar_loop() {
        let e = Engine::new();
        let n = 5000;
        let a: Vec<f64> = (0..n).map(|i| 0.5 + (i % 7) as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 10.0 + (i % 13) as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| (i % 5) as f64 - 2.0).collect();
        let oracle: Vec<f64> = (0..n)
            .map(|i| (b[i] * b[i] - 4.0 * a[i] * c[i]).sqrt())
            .collect();

        for cfg in [ExecConfig::serial(), ExecConfig::parallel(3)] {
            let (av, bv, cv) = (v(&a), v(&b), v(&c));
            let bb = e.binary(BinaryOp::Mul, &bv, &bv, &cfg).unwrap();
            let four_a = e
                .binary(BinaryOp::Mul, &NdArray::scalar(4.0), &av, &cfg)
                .unwrap();
            let four_ac = e.binary(BinaryOp::Mul, &four_a, &cv, &cfg).unwrap();
            let disc = e.binary(BinaryOp::Sub, &bb, &four_ac, &cfg).unwrap();
            let root = e
                .binary(BinaryOp::Pow, &disc, &NdArray::scalar(0.5), &cfg)
                .unwrap();
            for (got, want) in root.data().iter().zip(&oracle) {
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "{got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn where_examples() {
        let e = Engine::new();
        let m = NdArray::vector(vec![0i64, 1, 0, 2]).unwrap();
        assert_eq!(
            e.where_nonzero(&m, &ExecConfig::serial()).unwrap().data(),
            &[1, 3]
        );
        assert_eq!(
            e.where_nonzero(&m, &ExecConfig::parallel(3))
                .unwrap()
                .data(),
            &[1, 3]
        );
        let z = NdArray::vector(vec![0.0f64; 10]).unwrap();
        let r = e.where_nonzero(&z, &ExecConfig::parallel(4)).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.dims(), &[0]);
    }

    #[test]
    fn gating_on_element_count() {
        let e = Engine::new();
        let cfg = ExecConfig {
            mode: Mode::Auto,
            min_elements: 4,
            num_workers: 2,
        };
        e.binary(BinaryOp::Add, &v(&[1.; 4]), &v(&[1.; 4]), &cfg)
            .unwrap();
        assert_eq!(e.last_path(), Some(ExecPath::Serial));
        e.binary(BinaryOp::Add, &v(&[1.; 5]), &v(&[1.; 5]), &cfg)
            .unwrap();
        assert_eq!(e.last_path(), Some(ExecPath::Parallel { chunks: 2 }));
    }
}
