use crate::array::{NdArray, Value};
use crate::engine::{BinaryOp, Engine, ExecConfig};
use crate::error::{Error, Result};

/// Three-parameter Weibull distribution scaled by `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub amplitude: f64,
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl Default for WeibullParams {
    fn default() -> Self {
        WeibullParams {
            amplitude: 1.0,
            location: 0.0,
            scale: 1.0,
            shape: 1.5,
        }
    }
}

/// Probability mass of each bin `[lo[i], hi[i])`, scaled by the amplitude:
/// `A * (exp(-z(lo)^k) - exp(-z(hi)^k))` with `z(x) = max(x - mu, 0) / lambda`.
///
/// Every step runs through engine operators or the `exp` kernel so the whole
/// expression follows the configured execution mode.
pub fn weibull_eval(
    engine: &Engine,
    lo: &NdArray<f64>,
    hi: &NdArray<f64>,
    p: &WeibullParams,
    cfg: &ExecConfig,
) -> Result<NdArray<f64>> {
    if lo.shape() != hi.shape() {
        return Err(Error::Vector);
    }
    let s = NdArray::scalar;
    let survival = |x: &NdArray<f64>| -> Result<NdArray<f64>> {
        let d = engine.binary(BinaryOp::Sub, x, &s(p.location), cfg)?;
        let positive = engine.binary(BinaryOp::Gt, &d, &s(0.0), cfg)?;
        let d = engine.binary(BinaryOp::Mul, &d, &positive, cfg)?;
        let z = engine.binary(BinaryOp::Div, &d, &s(p.scale), cfg)?;
        let zk = engine.binary(BinaryOp::Pow, &z, &s(p.shape), cfg)?;
        let neg = engine.binary(BinaryOp::Sub, &s(0.0), &zk, cfg)?;
        match engine.call("exp", &[Value::Real(neg)], cfg)?.pop() {
            Some(Value::Real(e)) => Ok(e),
            _ => Err(Error::Usage("exp kernel returned no Real64 array".into())),
        }
    };
    let diff = engine.binary(BinaryOp::Sub, &survival(lo)?, &survival(hi)?, cfg)?;
    engine.binary(BinaryOp::Mul, &s(p.amplitude), &diff, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bins(n: usize) -> (NdArray<f64>, NdArray<f64>) {
        let lo: Vec<f64> = (0..n).map(|i| i as f64 * 0.1 - 0.5).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + 0.1).collect();
        (NdArray::vector(lo).unwrap(), NdArray::vector(hi).unwrap())
    }

    #[test]
    fn zero_amplitude() {
        let e = Engine::with_builtins();
        let (lo, hi) = bins(50);
        let p = WeibullParams {
            amplitude: 0.0,
            ..Default::default()
        };
        let out = weibull_eval(&e, &lo, &hi, &p, &ExecConfig::serial()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_closed_form() {
        let e = Engine::with_builtins();
        let (lo, hi) = bins(40);
        let p = WeibullParams {
            amplitude: 2.0,
            location: 0.3,
            scale: 0.7,
            shape: 1.0,
        };
        let out = weibull_eval(&e, &lo, &hi, &p, &ExecConfig::serial()).unwrap();
        let cdf = |x: f64| 1.0 - (-((x - 0.3).max(0.0)) / 0.7).exp();
        for ((&a, &b), &v) in lo.data().iter().zip(hi.data()).zip(out.data()) {
            assert!((v - 2.0 * (cdf(b) - cdf(a))).abs() < 1e-12, "{a}: {v}");
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let e = Engine::with_builtins();
        let (lo, hi) = bins(3001);
        let p = WeibullParams::default();
        let a = weibull_eval(&e, &lo, &hi, &p, &ExecConfig::serial()).unwrap();
        for w in [2, 3, 7] {
            let b = weibull_eval(&e, &lo, &hi, &p, &ExecConfig::parallel(w)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn mismatched_bins() {
        let e = Engine::with_builtins();
        let (lo, _) = bins(4);
        let (_, hi) = bins(5);
        let r = weibull_eval(
            &e,
            &lo,
            &hi,
            &WeibullParams::default(),
            &ExecConfig::serial(),
        );
        assert_eq!(r, Err(Error::Vector));
    }
}
