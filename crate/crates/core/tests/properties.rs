use proptest::prelude::*;

use vecbind::dispatch::{num_iterations, stride, validate};
use vecbind::engine::builtins;
use vecbind::{Engine, Error, ExecConfig, NdArray, Shape, Value, WrapperPlan};

fn plan(name: &str) -> WrapperPlan {
    builtins::kernels()
        .into_iter()
        .find(|k| k.name == name)
        .unwrap()
        .plan
}

fn filled(dims: &[usize], seed: f64) -> Value {
    let n: usize = dims.iter().product();
    let d: Vec<f64> = (0..n).map(|i| seed + i as f64 * 0.75).collect();
    Value::Real(NdArray::from_slice(dims, &d).unwrap())
}

fn dims(max_rank: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=4, 0..=max_rank)
}

/// Reference evaluation of `vmult(x, y)` by explicit slicing.
fn vmult_by_slices(x: &[usize], y: &[usize]) -> Option<(Vec<usize>, Vec<f64>)> {
    let (xl, yl) = (*x.last()?, *y.last()?);
    let (xe, ye) = (&x[..x.len() - 1], &y[..y.len() - 1]);
    if xl != yl {
        return None;
    }
    let master = if ye.len() > xe.len() { ye } else { xe };
    let broadcast = |e: &[usize]| e.is_empty() || e == master;
    if !broadcast(xe) || !broadcast(ye) {
        return None;
    }
    let iters: usize = master.iter().product();
    let (Value::Real(xv), Value::Real(yv)) = (filled(x, 1.0), filled(y, -2.0)) else {
        unreachable!()
    };
    let mut out = Vec::with_capacity(iters * xl);
    for i in 0..iters {
        let xi = if xe.is_empty() { 0 } else { i };
        let yi = if ye.is_empty() { 0 } else { i };
        for j in 0..xl {
            out.push(xv.data()[xi * xl + j] * yv.data()[yi * xl + j]);
        }
    }
    let mut shape = master.to_vec();
    shape.push(xl);
    Some((shape, out))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn iterations_times_stride_is_count(d in dims(4), pick in 0usize..5) {
        let e = pick % (d.len() + 1);
        let shape = Shape::new(d.clone()).unwrap();
        let n = num_iterations(&shape, e).unwrap();
        let s = stride(&shape, e).unwrap();
        prop_assert_eq!(n * s, shape.element_count());
        prop_assert_eq!(s, d[d.len() - e..].iter().product::<usize>());
    }

    #[test]
    fn rank_below_expected_is_rejected(d in dims(2), extra in 1usize..3) {
        let shape = Shape::new(d.clone()).unwrap();
        let e = d.len() + extra;
        let is_rank_error = matches!(num_iterations(&shape, e), Err(Error::Rank { .. }));
        prop_assert!(is_rank_error);
    }

    #[test]
    fn vmult_matches_slice_reference(
        x in prop::collection::vec(1usize..=3, 1..=3),
        y in prop::collection::vec(1usize..=3, 1..=3),
    ) {
        let e = Engine::with_builtins();
        let args = [filled(&x, 1.0), filled(&y, -2.0)];
        let valid = validate(&args, &plan("vmult")).is_ok();
        let reference = vmult_by_slices(&x, &y);
        prop_assert_eq!(valid, reference.is_some());
        match (e.call("vmult", &args, &ExecConfig::serial()), reference) {
            (Ok(out), Some((shape, data))) => {
                let expected = Value::Real(NdArray::from_slice(&shape, &data).unwrap());
                prop_assert_eq!(&out[0], &expected);
            }
            (Err(err), None) => prop_assert_eq!(err, Error::Vector),
            (got, want) => prop_assert!(false, "engine {:?}, reference {:?}", got, want),
        }
    }

    #[test]
    fn hypot_symmetric_under_master_choice(a in dims(3), scalar_b in any::<bool>()) {
        let e = Engine::with_builtins();
        let b: Vec<usize> = if scalar_b { vec![] } else { a.clone() };
        let (x, y) = (filled(&a, 0.5), filled(&b, 3.0));
        let cfg = ExecConfig::serial();
        let xy = e.call("hypot", &[x.clone(), y.clone()], &cfg).unwrap();
        let yx = e.call("hypot", &[y, x], &cfg).unwrap();
        prop_assert_eq!(xy[0].shape().dims(), &a[..]);
        prop_assert_eq!(xy, yx);
    }

    #[test]
    fn deterministic_across_workers(
        rows in 1usize..300,
        len in 1usize..40,
        workers in 1usize..=16,
    ) {
        let e = Engine::with_builtins();
        let args = [filled(&[rows, len], 0.25), filled(&[rows, len], -1.5)];
        let serial = e.call("vmult", &args, &ExecConfig::serial()).unwrap();
        let par = e.call("vmult", &args, &ExecConfig::parallel(workers)).unwrap();
        prop_assert_eq!(&serial, &par);
        let flat = [filled(&[rows * len], 0.1)];
        let serial = e.call("cos", &flat, &ExecConfig::serial()).unwrap();
        let par = e.call("cos", &flat, &ExecConfig::parallel(workers)).unwrap();
        prop_assert_eq!(serial, par);
    }
}
