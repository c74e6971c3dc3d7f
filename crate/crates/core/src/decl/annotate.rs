//! Annotations and the wrapper plans they produce.
//!
//! Annotation file format, one directive per line (`#` starts a comment):
//!
//! ```text
//! function vmult
//! out result
//! omit_len len from x
//! ```
//!
//! `out` lifts a pointer parameter to a return value. `omit_len` hides an
//! `int` length parameter and fills it from the per-iteration extent of the
//! named array (or the first visible array when `from` is absent).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{DeclForm, FuncDecl, ReturnType};
use crate::array::ElemType;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmitLen {
    pub param: String,
    pub from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Annotation {
    pub target: String,
    pub out_params: Vec<String>,
    pub omitted_len_params: Vec<OmitLen>,
}

impl Annotation {
    /// The identity annotation for `target`.
    pub fn empty(target: impl Into<String>) -> Self {
        Annotation {
            target: target.into(),
            ..Default::default()
        }
    }

    pub fn out(mut self, param: impl Into<String>) -> Self {
        self.out_params.push(param.into());
        self
    }

    pub fn omit_len(mut self, param: impl Into<String>, from: Option<&str>) -> Self {
        self.omitted_len_params.push(OmitLen {
            param: param.into(),
            from: from.map(str::to_string),
        });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.out_params.is_empty() && self.omitted_len_params.is_empty()
    }
}

/// Parses an annotation file into one [`Annotation`] per `function` block.
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>> {
    let mut out: Vec<Annotation> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| Error::Annotation(format!("line {}: {msg}: '{line}'", lineno + 1));
        match words.as_slice() {
            ["function", name] => out.push(Annotation::empty(*name)),
            ["out", param] => out
                .last_mut()
                .ok_or_else(|| err("directive outside a function block"))?
                .out_params
                .push(param.to_string()),
            ["omit_len", param] | ["omit_len", param, "from", _] => {
                let from = words.get(3).map(|s| s.to_string());
                out.last_mut()
                    .ok_or_else(|| err("directive outside a function block"))?
                    .omitted_len_params
                    .push(OmitLen {
                        param: param.to_string(),
                        from,
                    })
            }
            [d, ..] if ["function", "out", "omit_len"].contains(d) => {
                return Err(err("malformed directive"))
            }
            _ => return Err(err("unknown directive")),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intent {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleParam {
    pub name: String,
    pub base: ElemType,
    pub expected_rank: usize,
    pub intent: Intent,
    /// Position in the underlying declaration.
    pub decl_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HiddenRole {
    /// Filled with the per-iteration element count of the named visible parameter.
    LenOf(String),
    /// Buffer allocated by the wrapper and returned as an output.
    AllocOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenParam {
    pub name: String,
    pub role: HiddenRole,
    pub decl_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputSource {
    Return,
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub base: ElemType,
    pub prescribed_rank: usize,
    pub source: OutputSource,
}

/// Call contract binding a declaration and its annotation to the dispatcher.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapperPlan {
    pub decl: FuncDecl,
    pub visible_params: Vec<VisibleParam>,
    pub hidden_params: Vec<HiddenParam>,
    pub output_spec: Vec<OutputSpec>,
}

impl WrapperPlan {
    pub fn name(&self) -> &str {
        &self.decl.name
    }

    /// Caller-facing signature, e.g. `double[] = vmult(double[], double[])`.
    pub fn usage(&self) -> String {
        fn ty(base: ElemType, rank: usize) -> String {
            let b = match base {
                ElemType::Real64 => "double",
                ElemType::Int64 => "int",
                ElemType::Str => "String",
            };
            if rank == 0 {
                b.to_string()
            } else {
                format!("{b}{}", "[]".repeat(rank))
            }
        }
        let args: Vec<String> = self
            .visible_params
            .iter()
            .map(|p| ty(p.base, p.expected_rank))
            .collect();
        let outs: Vec<String> = self
            .output_spec
            .iter()
            .map(|o| ty(o.base, o.prescribed_rank))
            .collect();
        let call = format!("{}({})", self.decl.name, args.join(", "));
        match outs.len() {
            0 => call,
            1 => format!("{} = {call}", outs[0]),
            _ => format!("({}) = {call}", outs.join(", ")),
        }
    }
}

/// Produces the wrapper plan of `decl` under `ann`.
pub fn apply_annotations(decl: &FuncDecl, ann: &Annotation) -> Result<WrapperPlan> {
    if ann.target != decl.name {
        return Err(Error::Annotation(format!(
            "annotation for '{}' applied to '{}'",
            ann.target, decl.name
        )));
    }
    let mut named = HashSet::new();
    let all = ann
        .out_params
        .iter()
        .chain(ann.omitted_len_params.iter().map(|o| &o.param));
    for name in all {
        if decl.param(name).is_none() {
            return Err(Error::Annotation(format!(
                "'{}' has no parameter '{name}'",
                decl.name
            )));
        }
        if !named.insert(name.as_str()) {
            return Err(Error::Annotation(format!(
                "parameter '{name}' of '{}' annotated more than once",
                decl.name
            )));
        }
    }

    for name in &ann.out_params {
        let (_, p) = decl.param(name).expect("checked above");
        if p.decl_form == DeclForm::Scalar {
            return Err(Error::Annotation(format!(
                "out parameter '{name}' is not a pointer or array"
            )));
        }
        if p.base == ElemType::Str {
            return Err(Error::Annotation(format!(
                "out parameter '{name}' has string type"
            )));
        }
    }
    for o in &ann.omitted_len_params {
        let (_, p) = decl.param(&o.param).expect("checked above");
        if p.base != ElemType::Int64 || p.decl_form != DeclForm::Scalar {
            return Err(Error::Annotation(format!(
                "length parameter '{}' must be a scalar int",
                o.param
            )));
        }
    }

    let visible_params: Vec<VisibleParam> = decl
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| !named.contains(p.name.as_str()))
        .map(|(i, p)| VisibleParam {
            name: p.name.clone(),
            base: p.base,
            expected_rank: p.declared_rank,
            intent: Intent::In,
            decl_index: i,
        })
        .collect();

    let mut hidden_params = Vec::new();
    for (i, p) in decl.params.iter().enumerate() {
        let role = if ann.out_params.contains(&p.name) {
            HiddenRole::AllocOut
        } else if let Some(o) = ann.omitted_len_params.iter().find(|o| o.param == p.name) {
            let source = match &o.from {
                Some(src) => {
                    let v = visible_params
                        .iter()
                        .find(|v| &v.name == src)
                        .ok_or_else(|| {
                            Error::Annotation(format!(
                                "length source '{src}' is not a visible parameter of '{}'",
                                decl.name
                            ))
                        })?;
                    if v.expected_rank == 0 {
                        return Err(Error::Annotation(format!(
                            "length source '{src}' is not an array"
                        )));
                    }
                    v.name.clone()
                }
                None => visible_params
                    .iter()
                    .find(|v| v.expected_rank >= 1)
                    .map(|v| v.name.clone())
                    .ok_or_else(|| {
                        Error::Annotation(format!(
                            "no visible array of '{}' can supply '{}'",
                            decl.name, o.param
                        ))
                    })?,
            };
            HiddenRole::LenOf(source)
        } else {
            continue;
        };
        hidden_params.push(HiddenParam {
            name: p.name.clone(),
            role,
            decl_index: i,
        });
    }

    let max_visible_rank = visible_params.iter().map(|v| v.expected_rank).max();
    let mut output_spec = Vec::new();
    if let ReturnType::Value(base) = decl.return_type {
        output_spec.push(OutputSpec {
            base,
            prescribed_rank: 0,
            source: OutputSource::Return,
        });
    }
    for p in &decl.params {
        if !ann.out_params.contains(&p.name) {
            continue;
        }
        let prescribed_rank = if max_visible_rank.is_some_and(|r| r >= p.declared_rank) {
            p.declared_rank
        } else if p.decl_form == DeclForm::PointerChain(1) {
            // Nothing to size it from: a single-element result slot.
            0
        } else {
            return Err(Error::Annotation(format!(
                "no visible parameter of '{}' determines the extent of '{}'",
                decl.name, p.name
            )));
        };
        output_spec.push(OutputSpec {
            base: p.base,
            prescribed_rank,
            source: OutputSource::Param(p.name.clone()),
        });
    }

    Ok(WrapperPlan {
        decl: decl.clone(),
        visible_params,
        hidden_params,
        output_spec,
    })
}

/// Plans for every declaration; functions without an annotation get the
/// empty one. An annotation naming an undeclared function is an error.
pub fn build_plans(decls: &[FuncDecl], anns: &[Annotation]) -> Result<Vec<WrapperPlan>> {
    if let Some(a) = anns
        .iter()
        .find(|a| !decls.iter().any(|d| d.name == a.target))
    {
        return Err(Error::Annotation(format!(
            "annotation for undeclared function '{}'",
            a.target
        )));
    }
    decls
        .iter()
        .map(|d| {
            let ann = anns
                .iter()
                .find(|a| a.target == d.name)
                .cloned()
                .unwrap_or_else(|| Annotation::empty(d.name.clone()));
            apply_annotations(d, &ann)
        })
        .collect()
}
