//! Pseudo-source renderings of generated wrappers and plan serialization.
//!
//! A rendering mirrors the anatomy of a vectorized wrapper: reference
//! declarations, argument marshaling, validation, output allocation, the
//! vectorization loop and the return. It is for inspection and golden-file
//! tests; it is not compilable C.
//!
//! The serial and parallel variants share everything except four sections
//! (see [`DiffCategory`]): the loop index type, the usage message, the loop
//! construct, and how arguments are addressed inside the loop.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::ElemType;
use crate::decl::{HiddenRole, OutputSource, WrapperPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Serial,
    Parallel,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Serial => "serial",
            Variant::Parallel => "parallel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiffCategory {
    IndexType,
    UsageMessage,
    LoopConstruct,
    AccessPattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Section {
    Common,
    Varying(DiffCategory),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrapperRendering {
    pub function: String,
    pub variant: Variant,
    sections: Vec<(Section, String)>,
}

impl WrapperRendering {
    pub fn text(&self) -> String {
        self.sections.iter().map(|(_, s)| s.as_str()).collect()
    }

    fn category_text(&self, cat: DiffCategory) -> String {
        self.sections
            .iter()
            .filter(|(s, _)| *s == Section::Varying(cat))
            .map(|(_, t)| t.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariantDiff {
    pub category: DiffCategory,
    pub left: String,
    pub right: String,
}

fn c_type(base: ElemType) -> &'static str {
    match base {
        ElemType::Real64 => "double",
        ElemType::Int64 => "int",
        ElemType::Str => "char*",
    }
}

/// Renders the wrapper of `plan` in the given variant.
pub fn render(plan: &WrapperPlan, variant: Variant) -> WrapperRendering {
    let parallel = variant == Variant::Parallel;
    let decl = &plan.decl;
    let mut sections: Vec<(Section, String)> = Vec::new();
    let mut common = String::new();

    // Caller-visible arguments are numbered arg1..argN as the wrapper pops them.
    let arg_name = |a: usize| format!("arg{}", a + 1);
    let has_return = matches!(
        plan.output_spec.first().map(|o| &o.source),
        Some(OutputSource::Return)
    );
    let out_index = |name: &str| {
        plan.output_spec
            .iter()
            .position(|o| o.source == OutputSource::Param(name.to_string()))
            .expect("AllocOut parameter has an output")
    };

    let _ = writeln!(common, "/* {} : vectorized wrapper */", plan.usage());
    let _ = writeln!(common, "static void sl_{} (void)", decl.name);
    common.push_str("{\n");
    if let Some(o) = plan.output_spec.first().filter(|_| has_return) {
        let _ = writeln!(common, "   {}* retval;", c_type(o.base));
    }
    for p in &decl.params {
        if let Some(a) = plan.visible_params.iter().position(|v| v.name == p.name) {
            let v = &plan.visible_params[a];
            let n = arg_name(a);
            let _ = writeln!(common, "   {}* {n};", c_type(v.base));
            let _ = writeln!(
                common,
                "   Ref *{n}_r = ref_new({}, {}, &{n});   /* {} */",
                v.base, v.expected_rank, v.name
            );
        } else {
            let h = plan
                .hidden_params
                .iter()
                .find(|h| h.name == p.name)
                .expect("hidden");
            match &h.role {
                HiddenRole::AllocOut => {
                    let _ = writeln!(
                        common,
                        "   {}* {};   /* omitted: returned */",
                        c_type(p.base),
                        p.name
                    );
                }
                HiddenRole::LenOf(src) => {
                    let _ = writeln!(
                        common,
                        "   int {};   /* omitted: extent of {src} */",
                        p.name
                    );
                }
            }
        }
    }
    sections.push((Section::Common, std::mem::take(&mut common)));

    let index = if parallel {
        "   int _viter;\n"
    } else {
        "   unsigned int _viter;\n"
    };
    sections.push((Section::Varying(DiffCategory::IndexType), index.to_string()));

    common.push_str("   VecSpec vs;\n\n");
    let _ = write!(common, "   if (num_args != {}", plan.visible_params.len());
    for a in (0..plan.visible_params.len()).rev() {
        let _ = write!(common, " ||\n\tvec_pop({}_r, &vs) == -1", arg_name(a));
    }
    common.push_str(")\n");
    sections.push((Section::Common, std::mem::take(&mut common)));

    let usage = format!(
        "\t{{ usage(\"{}\", \"{}\"); finalize_refs(); return; }}\n",
        plan.usage(),
        variant.name()
    );
    sections.push((Section::Varying(DiffCategory::UsageMessage), usage));

    let refs: Vec<String> = (0..plan.visible_params.len())
        .map(|a| format!("{}_r", arg_name(a)))
        .collect();
    let mut validate_args = String::from("&vs");
    for r in &refs {
        validate_args.push_str(", ");
        validate_args.push_str(r);
    }
    let _ = writeln!(
        common,
        "\n   if (vec_validate({validate_args}) == -1) {{ finalize_refs(); return; }}"
    );
    for h in &plan.hidden_params {
        if let HiddenRole::LenOf(src) = &h.role {
            let a = plan
                .visible_params
                .iter()
                .position(|v| &v.name == src)
                .unwrap_or(0);
            let _ = writeln!(common, "   {} = vs.extent[{a}];", h.name);
        }
    }
    for (k, o) in plan.output_spec.iter().enumerate() {
        let target = match &o.source {
            OutputSource::Return => "retval".to_string(),
            OutputSource::Param(p) => p.clone(),
        };
        let _ = writeln!(
            common,
            "   {target} = alloc_output({}, vs.num_iters, vs.out_width[{k}]);",
            c_type(o.base)
        );
    }
    sections.push((Section::Common, std::mem::take(&mut common)));

    let mut loop_head = String::new();
    if parallel {
        loop_head.push_str("   #pragma omp parallel for if (vs.num_iters > min_elements)\n");
    }
    loop_head.push_str("   for (_viter = 0; _viter < vs.num_iters; _viter++) {\n");
    sections.push((Section::Varying(DiffCategory::LoopConstruct), loop_head));

    let call_args: Vec<String> = decl
        .params
        .iter()
        .map(|p| {
            if let Some(a) = plan.visible_params.iter().position(|v| v.name == p.name) {
                let n = arg_name(a);
                let rank = plan.visible_params[a].expected_rank;
                match (parallel, rank) {
                    (false, 0) => format!("*{n}"),
                    (false, _) => n,
                    (true, 0) => format!("{n}[_viter]"),
                    (true, _) => format!("&{n}[_viter * vs.stride[{a}]]"),
                }
            } else {
                let h = plan
                    .hidden_params
                    .iter()
                    .find(|h| h.name == p.name)
                    .expect("hidden");
                match (&h.role, parallel) {
                    (HiddenRole::LenOf(_), _) => p.name.clone(),
                    (HiddenRole::AllocOut, false) => p.name.clone(),
                    (HiddenRole::AllocOut, true) => {
                        format!("&{}[_viter * vs.out_width[{}]]", p.name, out_index(&p.name))
                    }
                }
            }
        })
        .collect();
    let call = format!("{}({})", decl.name, call_args.join(", "));
    let mut body = String::new();
    if has_return {
        let _ = writeln!(body, "\tretval[_viter] = {call};");
    } else {
        let _ = writeln!(body, "\t{call};");
    }
    if !parallel {
        for a in 0..plan.visible_params.len() {
            let _ = writeln!(body, "\t{} += vs.stride[{a}];", arg_name(a));
        }
        for h in &plan.hidden_params {
            if h.role == HiddenRole::AllocOut {
                let _ = writeln!(
                    body,
                    "\t{} += vs.out_width[{}];",
                    h.name,
                    out_index(&h.name)
                );
            }
        }
    }
    sections.push((Section::Varying(DiffCategory::AccessPattern), body));

    common.push_str("   }\n");
    let outs: Vec<String> = plan
        .output_spec
        .iter()
        .map(|o| match &o.source {
            OutputSource::Return => "retval".to_string(),
            OutputSource::Param(p) => p.clone(),
        })
        .collect();
    if !outs.is_empty() {
        let _ = writeln!(common, "   return_outputs({});", outs.join(", "));
    }
    common.push_str("   finalize_refs();\n}\n");
    sections.push((Section::Common, common));

    WrapperRendering {
        function: decl.name.clone(),
        variant,
        sections,
    }
}

/// Sections in which two renderings differ, in category order.
pub fn diff_renderings(left: &WrapperRendering, right: &WrapperRendering) -> Vec<VariantDiff> {
    [
        DiffCategory::IndexType,
        DiffCategory::UsageMessage,
        DiffCategory::LoopConstruct,
        DiffCategory::AccessPattern,
    ]
    .into_iter()
    .filter_map(|category| {
        let (l, r) = (left.category_text(category), right.category_text(category));
        (l != r).then_some(VariantDiff {
            category,
            left: l,
            right: r,
        })
    })
    .collect()
}

/// Differences between the serial (left) and parallel (right) wrappers of `plan`.
pub fn diff_variants(plan: &WrapperPlan) -> Vec<VariantDiff> {
    diff_renderings(
        &render(plan, Variant::Serial),
        &render(plan, Variant::Parallel),
    )
}

pub fn plan_to_json(plan: &WrapperPlan) -> String {
    let mut s = serde_json::to_string_pretty(plan).expect("plans always serialize");
    s.push('\n');
    s
}

pub fn plan_from_json(text: &str) -> Result<WrapperPlan> {
    serde_json::from_str(text).map_err(|e| Error::Usage(format!("invalid plan document: {e}")))
}

/// Reads a plan document holding either one plan or an array of plans.
pub fn plans_from_json(text: &str) -> Result<Vec<WrapperPlan>> {
    if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("invalid plan document: {e}")))
    } else {
        Ok(vec![plan_from_json(text)?])
    }
}

/// Rendering plus serialized plan for one function.
pub fn emit_plan(plan: &WrapperPlan, variant: Variant) -> (WrapperRendering, String) {
    (render(plan, variant), plan_to_json(plan))
}

/// Writes `<fn>.plan.json` and `<fn>.wrapper.txt` into `dir`.
pub fn write_plan_files(plan: &WrapperPlan, variant: Variant, dir: &Path) -> Result<[PathBuf; 2]> {
    std::fs::create_dir_all(dir)?;
    let (rendering, json) = emit_plan(plan, variant);
    let plan_path = dir.join(format!("{}.plan.json", plan.name()));
    let text_path = dir.join(format!("{}.wrapper.txt", plan.name()));
    std::fs::write(&plan_path, json)?;
    std::fs::write(&text_path, rendering.text())?;
    Ok([plan_path, text_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::builtins;

    fn plan(name: &str) -> WrapperPlan {
        builtins::kernels()
            .into_iter()
            .find(|k| k.name == name)
            .unwrap()
            .plan
    }

    #[test]
    fn serial_hypot_advances_pointers() {
        let text = render(&plan("hypot"), Variant::Serial).text();
        assert!(text.contains("for (_viter = 0; _viter < vs.num_iters; _viter++)"));
        assert!(text.contains("retval[_viter] = hypot(*arg1, *arg2);"));
        assert!(text.contains("arg1 += vs.stride[0];"));
        assert!(!text.contains("#pragma"));
    }

    #[test]
    fn parallel_hypot_indexes() {
        let text = render(&plan("hypot"), Variant::Parallel).text();
        assert!(text.contains("#pragma omp parallel for"));
        assert!(text.contains("retval[_viter] = hypot(arg1[_viter], arg2[_viter]);"));
        assert!(text.contains("   int _viter;"));
        assert!(!text.contains("+= vs.stride"));
    }

    #[test]
    fn four_categories_and_symmetry() {
        for name in ["hypot", "vmult", "atof", "sin"] {
            let p = plan(name);
            let d = diff_variants(&p);
            let cats: Vec<DiffCategory> = d.iter().map(|x| x.category).collect();
            assert_eq!(
                cats,
                [
                    DiffCategory::IndexType,
                    DiffCategory::UsageMessage,
                    DiffCategory::LoopConstruct,
                    DiffCategory::AccessPattern
                ]
            );
            let s = render(&p, Variant::Serial);
            let par = render(&p, Variant::Parallel);
            let back = diff_renderings(&par, &s);
            for (a, b) in d.iter().zip(&back) {
                assert_eq!(a.category, b.category);
                assert_eq!((&a.left, &a.right), (&b.right, &b.left));
            }
            assert!(diff_renderings(&s, &s).is_empty());
        }
    }

    #[test]
    fn plan_json_round_trip() {
        for k in builtins::kernels() {
            let json = plan_to_json(&k.plan);
            assert_eq!(plan_from_json(&json).unwrap(), k.plan);
            assert_eq!(plan_to_json(&k.plan), json);
        }
    }
}
