//! Demo kernels: C math intrinsics, string conversion and `vmult`.

use super::kernel::{kernel_from_plan, Kernel, KernelBody, KernelFault, Ret};
use crate::decl::{build_plans, parse_annotations, parse_declarations};

pub const HEADER: &str = "\
double sin(double x);
double cos(double x);
double exp(double x);
double log(double x);
double hypot(double x, double y);
double atof(const char *s);
int strlen(const char *s);
void vmult(double *x, double *y, double *result, int len);
";

pub const ANNOTATIONS: &str = "\
function vmult
out result
omit_len len from x
";

/// Body for a builtin function name.
pub fn body(name: &str) -> Option<KernelBody> {
    Some(match name {
        "sin" => KernelBody::unary(f64::sin),
        "cos" => KernelBody::unary(f64::cos),
        "exp" => KernelBody::unary(f64::exp),
        "log" => KernelBody::unary(f64::ln),
        "hypot" => KernelBody::new(2, |s| {
            Ok(Ret::Real(s[0].real_scalar()?.hypot(s[1].real_scalar()?)))
        }),
        "atof" => KernelBody::new(1, |s| Ok(Ret::Real(atof(s[0].str_scalar()?)))),
        "strlen" => KernelBody::new(1, |s| Ok(Ret::Int(s[0].str_scalar()?.len() as i64))),
        "vmult" => KernelBody::new(4, |s| {
            let x = s[0].real()?;
            let y = s[1].real()?;
            let len = s[3].len_value()?;
            let out = s[2].out_real()?;
            if x.len() < len || y.len() < len || out.len() < len {
                return Err(KernelFault(format!("vectors shorter than len {len}")));
            }
            for ((o, a), b) in out[..len].iter_mut().zip(x).zip(y) {
                *o = a * b;
            }
            Ok(Ret::Void)
        }),
        _ => return None,
    })
}

/// All builtin kernels, in header order.
pub fn kernels() -> Vec<Kernel> {
    let decls = parse_declarations(HEADER).expect("builtin header parses");
    let anns = parse_annotations(ANNOTATIONS).expect("builtin annotations parse");
    build_plans(&decls, &anns)
        .expect("builtin annotations apply")
        .into_iter()
        .map(|plan| {
            let body = body(plan.name()).expect("every builtin has a body");
            kernel_from_plan(plan, body).expect("builtin arity matches")
        })
        .collect()
}

/// C `atof`: leading whitespace skipped, longest numeric prefix converted,
/// 0.0 when nothing converts.
pub fn atof(s: &str) -> f64 {
    let s = s.trim_start_matches([' ', '\t', '\n', '\r', '\x0b', '\x0c']);
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let rest = &s[i..];
    let lower = rest.get(..8).unwrap_or(rest).to_ascii_lowercase();
    let negative = b.first() == Some(&b'-');
    if lower.starts_with("inf") {
        return if negative {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    if lower.starts_with("nan") {
        return f64::NAN;
    }

    let digits = |mut j: usize| {
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        j
    };
    let int_end = digits(i);
    let mut end = int_end;
    let mut mantissa_digits = int_end - i;
    if end < b.len() && b[end] == b'.' {
        let frac_end = digits(end + 1);
        mantissa_digits += frac_end - end - 1;
        end = frac_end;
    }
    if mantissa_digits == 0 {
        return 0.0;
    }
    if end < b.len() && (b[end] == b'e' || b[end] == b'E') {
        let mut j = end + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_end = digits(j);
        if exp_end > j {
            end = exp_end;
        }
    }
    s[..end].parse().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atof_like_c() {
        assert_eq!(atof("3.25"), 3.25);
        assert_eq!(atof("  \t-12.5e2xyz"), -1250.0);
        assert_eq!(atof("+.5"), 0.5);
        assert_eq!(atof("7."), 7.0);
        assert_eq!(atof("1e"), 1.0);
        assert_eq!(atof("1e+"), 1.0);
        assert_eq!(atof("abc"), 0.0);
        assert_eq!(atof(""), 0.0);
        assert_eq!(atof("-"), 0.0);
        assert_eq!(atof("."), 0.0);
        assert_eq!(atof("-inf"), f64::NEG_INFINITY);
        assert_eq!(atof("Infinity"), f64::INFINITY);
        assert!(atof("nan").is_nan());
        assert_eq!(atof("42 17"), 42.0);
    }

    #[test]
    fn builtins_register() {
        let names: Vec<String> = kernels().into_iter().map(|k| k.name).collect();
        assert_eq!(
            names,
            ["sin", "cos", "exp", "log", "hypot", "atof", "strlen", "vmult"]
        );
    }
}
