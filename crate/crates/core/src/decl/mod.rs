//! C prototype subset: parsing, rank assignment and unparsing.
//!
//! Accepted grammar:
//!
//! ```text
//! decl   := type IDENT '(' params ')' ';'
//! type   := ['const'] ('double' | 'int' | 'void' | 'char' '*') ['const']
//! params := 'void' | param (',' param)* | <empty>
//! param  := ['const'] base ['const'] '*'* IDENT ('[' INT ']')*
//! ```
//!
//! `char *` is a single string (rank 0). Any pointer chain over a base type
//! has rank 1; a parameter with `k` bracketed dimensions has rank `k`.

mod annotate;
mod lexer;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use annotate::{
    apply_annotations, build_plans, parse_annotations, Annotation, HiddenParam, HiddenRole, Intent,
    OmitLen, OutputSource, OutputSpec, VisibleParam, WrapperPlan,
};

use crate::array::ElemType;
use crate::error::{Error, Result};
use lexer::{Lexer, Tok, Token};

/// How a parameter was declared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeclForm {
    Scalar,
    /// `n` levels of indirection over the base type.
    PointerChain(usize),
    DimensionedArray(Vec<usize>),
}

impl DeclForm {
    pub fn rank(&self) -> usize {
        match self {
            DeclForm::Scalar => 0,
            DeclForm::PointerChain(_) => 1,
            DeclForm::DimensionedArray(dims) => dims.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    pub base: ElemType,
    pub declared_rank: usize,
    pub decl_form: DeclForm,
}

impl ParamDecl {
    pub fn new(name: impl Into<String>, base: ElemType, decl_form: DeclForm) -> Self {
        ParamDecl {
            name: name.into(),
            base,
            declared_rank: decl_form.rank(),
            decl_form,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnType {
    Void,
    Value(ElemType),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuncDecl {
    pub name: String,
    pub return_type: ReturnType,
    pub params: Vec<ParamDecl>,
}

impl FuncDecl {
    pub fn param(&self, name: &str) -> Option<(usize, &ParamDecl)> {
        self.params.iter().enumerate().find(|(_, p)| p.name == name)
    }
}

/// Number of indices needed to address one element of the parameter.
pub fn expected_rank(param: &ParamDecl) -> usize {
    param.decl_form.rank()
}

/// Parses every prototype in `source`, preserving order.
pub fn parse_declarations(source: &str) -> Result<Vec<FuncDecl>> {
    let tokens = Lexer::new(source).tokenize()?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut decls = Vec::new();
    while !parser.at_end() {
        decls.push(parser.decl()?);
    }
    Ok(decls)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

enum Base {
    Double,
    Int,
    Char,
    Void,
}

impl Parser {
    fn at_end(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, t: &Token, message: impl Into<String>) -> Error {
        Error::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn unsupported(&self, t: &Token, construct: impl Into<String>) -> Error {
        Error::UnsupportedDecl {
            line: t.line,
            column: t.column,
            construct: construct.into(),
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<Token> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(t)
        } else {
            Err(self.syntax(&t, format!("expected '{c}', found {}", t.tok)))
        }
    }

    fn skip_const(&mut self) {
        while self.peek().tok == Tok::Ident("const".into()) {
            self.next();
        }
    }

    fn base(&mut self) -> Result<(Base, Token)> {
        self.skip_const();
        let t = self.next();
        let base = match &t.tok {
            Tok::Ident(s) => match s.as_str() {
                "double" => Base::Double,
                "int" => Base::Int,
                "char" => Base::Char,
                "void" => Base::Void,
                "struct" | "union" | "enum" => {
                    return Err(self.unsupported(&t, format!("{s} type")))
                }
                "typedef" => return Err(self.unsupported(&t, "typedef")),
                "unsigned" | "signed" | "long" | "short" | "float" | "size_t" => {
                    return Err(self.unsupported(&t, format!("type '{s}'")))
                }
                _ => return Err(self.unsupported(&t, format!("type '{s}'"))),
            },
            Tok::Ellipsis => return Err(self.unsupported(&t, "varargs")),
            other => return Err(self.syntax(&t, format!("expected a type, found {other}"))),
        };
        self.skip_const();
        Ok((base, t))
    }

    fn stars(&mut self) -> usize {
        let mut n = 0;
        loop {
            match self.peek().tok {
                Tok::Punct('*') => {
                    self.next();
                    n += 1;
                }
                Tok::Ident(ref s) if s == "const" => {
                    self.next();
                }
                _ => return n,
            }
        }
    }

    fn ident(&mut self, what: &str) -> Result<Token> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(_) => Ok(t),
            Tok::Punct('(') => Err(self.unsupported(&t, "function pointer")),
            other => Err(self.syntax(&t, format!("expected {what}, found {other}"))),
        }
    }

    fn decl(&mut self) -> Result<FuncDecl> {
        let (base, base_tok) = self.base()?;
        let stars = self.stars();
        let return_type = match (base, stars) {
            (Base::Double, 0) => ReturnType::Value(ElemType::Real64),
            (Base::Int, 0) => ReturnType::Value(ElemType::Int64),
            (Base::Void, 0) => ReturnType::Void,
            (Base::Char, 1) => {
                return Err(self.unsupported(&base_tok, "string return type"));
            }
            _ => return Err(self.unsupported(&base_tok, "pointer return type")),
        };
        let name_tok = self.ident("function name")?;
        let name = name_tok.tok.ident().to_string();
        self.expect_punct('(')?;
        let params = self.params()?;
        self.expect_punct(')')?;
        self.expect_punct(';')?;

        let mut seen = HashSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(self.syntax(
                    &name_tok,
                    format!("duplicate parameter '{}' in {name}", p.name),
                ));
            }
        }
        Ok(FuncDecl {
            name,
            return_type,
            params,
        })
    }

    fn params(&mut self) -> Result<Vec<ParamDecl>> {
        if self.peek().tok == Tok::Punct(')') {
            return Ok(Vec::new());
        }
        // `(void)`
        if self.peek().tok == Tok::Ident("void".into())
            && self.tokens.get(self.pos + 1).map(|t| &t.tok) == Some(&Tok::Punct(')'))
        {
            self.next();
            return Ok(Vec::new());
        }
        let mut params = vec![self.param()?];
        while self.peek().tok == Tok::Punct(',') {
            self.next();
            params.push(self.param()?);
        }
        Ok(params)
    }

    fn param(&mut self) -> Result<ParamDecl> {
        let (base, base_tok) = self.base()?;
        let stars = self.stars();
        let name_tok = self.ident("parameter name")?;
        let mut dims = Vec::new();
        while self.peek().tok == Tok::Punct('[') {
            let open = self.next();
            let t = self.next();
            match t.tok {
                Tok::Int(n) if n > 0 => dims.push(n),
                Tok::Int(_) => return Err(self.syntax(&t, "array dimension must be positive")),
                Tok::Punct(']') => return Err(self.unsupported(&open, "unsized array dimension")),
                ref other => {
                    return Err(self.syntax(&t, format!("expected dimension, found {other}")))
                }
            }
            self.expect_punct(']')?;
        }

        let (base, stars) = match base {
            Base::Double => (ElemType::Real64, stars),
            Base::Int => (ElemType::Int64, stars),
            Base::Char if stars >= 1 => (ElemType::Str, stars - 1),
            Base::Char => return Err(self.unsupported(&base_tok, "char scalar or char array")),
            Base::Void => return Err(self.unsupported(&base_tok, "void parameter")),
        };
        let form = match (stars, dims.is_empty()) {
            (0, true) => DeclForm::Scalar,
            (n, true) => DeclForm::PointerChain(n),
            (0, false) => DeclForm::DimensionedArray(dims),
            _ => return Err(self.unsupported(&name_tok, "array of pointers")),
        };
        Ok(ParamDecl::new(name_tok.tok.ident(), base, form))
    }
}

fn unparse_param(p: &ParamDecl) -> String {
    let (ty, extra_stars) = match p.base {
        ElemType::Real64 => ("double", 0),
        ElemType::Int64 => ("int", 0),
        ElemType::Str => ("char", 1),
    };
    match &p.decl_form {
        DeclForm::Scalar => format!("{ty} {}{}", "*".repeat(extra_stars), p.name),
        DeclForm::PointerChain(n) => format!("{ty} {}{}", "*".repeat(n + extra_stars), p.name),
        DeclForm::DimensionedArray(dims) => {
            let dims: String = dims.iter().map(|d| format!("[{d}]")).collect();
            format!("{ty} {}{}{dims}", "*".repeat(extra_stars), p.name)
        }
    }
}

/// Renders a declaration back to prototype text.
pub fn unparse(decl: &FuncDecl) -> String {
    let ret = match decl.return_type {
        ReturnType::Void => "void",
        ReturnType::Value(ElemType::Real64) => "double",
        ReturnType::Value(ElemType::Int64) => "int",
        ReturnType::Value(ElemType::Str) => "char *",
    };
    let params: Vec<String> = decl.params.iter().map(unparse_param).collect();
    let params = if params.is_empty() {
        "void".to_string()
    } else {
        params.join(", ")
    };
    format!("{ret} {}({params});", decl.name)
}

impl fmt::Display for FuncDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&unparse(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranks(src: &str) -> Vec<usize> {
        parse_declarations(src).unwrap()[0]
            .params
            .iter()
            .map(|p| p.declared_rank)
            .collect()
    }

    #[test]
    fn hypot() {
        let d = parse_declarations("double hypot(double x, double y);").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].name, "hypot");
        assert_eq!(d[0].return_type, ReturnType::Value(ElemType::Real64));
        assert_eq!(d[0].params[0].name, "x");
        assert_eq!(ranks("double hypot(double x, double y);"), [0, 0]);
    }

    #[test]
    fn vmult_ranks() {
        let src = "void vmult(double *x, double *y, double *result, int len);";
        assert_eq!(ranks(src), [1, 1, 1, 0]);
        let d = &parse_declarations(src).unwrap()[0];
        assert_eq!(d.return_type, ReturnType::Void);
        assert_eq!(d.params[3].base, ElemType::Int64);
    }

    #[test]
    fn dimensioned_vs_pointer_chain() {
        let d = &parse_declarations("void f(double x[3][5], double **y);").unwrap()[0];
        assert_eq!(
            d.params[0].decl_form,
            DeclForm::DimensionedArray(vec![3, 5])
        );
        assert_eq!(d.params[1].decl_form, DeclForm::PointerChain(2));
        assert_eq!(expected_rank(&d.params[0]), 2);
        assert_eq!(expected_rank(&d.params[1]), 1);
        assert_eq!(ranks("void g(double x);"), [0]);
    }

    #[test]
    fn strings_are_scalars() {
        let d = &parse_declarations("double atof(const char *s);").unwrap()[0];
        assert_eq!(d.params[0].base, ElemType::Str);
        assert_eq!(d.params[0].declared_rank, 0);
        let d = &parse_declarations("int count(char **names);").unwrap()[0];
        assert_eq!(d.params[0].base, ElemType::Str);
        assert_eq!(d.params[0].declared_rank, 1);
    }

    #[test]
    fn comments_and_order() {
        let src =
            "/* math */\n double sin(double x); // sine\n double cos(double x);\nint zero(void);";
        let d = parse_declarations(src).unwrap();
        let names: Vec<_> = d.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["sin", "cos", "zero"]);
        assert!(d[2].params.is_empty());
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_declarations("double sin(double x);\ndouble cos(double x)\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                column: 1,
                message: "expected ';', found end of input".into()
            }
        );
        let err = parse_declarations("double f(double 3x);").unwrap_err();
        assert!(
            matches!(
                err,
                Error::Parse {
                    line: 1,
                    column: 17,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn unsupported_constructs() {
        for (src, needle) in [
            ("void f(struct point p);", "struct"),
            ("int printf(const char *fmt, ...);", "varargs"),
            ("void f(double (*cb)(double));", "function pointer"),
            ("double *f(double x);", "pointer return"),
            ("void f(float x);", "float"),
            ("void f(double *x[3]);", "array of pointers"),
        ] {
            match parse_declarations(src) {
                Err(Error::UnsupportedDecl { construct, .. }) => {
                    assert!(construct.contains(needle), "{src}: {construct}")
                }
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_param_names() {
        assert!(matches!(
            parse_declarations("void f(double x, int x);"),
            Err(Error::Parse { .. })
        ));
    }

    fn arb_param() -> impl Strategy<Value = (ElemType, DeclForm)> {
        let base = prop_oneof![
            Just(ElemType::Real64),
            Just(ElemType::Int64),
            Just(ElemType::Str)
        ];
        let form = prop_oneof![
            Just(DeclForm::Scalar),
            (1usize..4).prop_map(DeclForm::PointerChain),
            prop::collection::vec(1usize..20, 1..4).prop_map(DeclForm::DimensionedArray),
        ];
        (base, form).prop_filter("char arrays are not declarable", |(b, f)| {
            !(*b == ElemType::Str && matches!(f, DeclForm::DimensionedArray(_)))
        })
    }

    fn arb_decl() -> impl Strategy<Value = FuncDecl> {
        let ret = prop_oneof![
            Just(ReturnType::Void),
            Just(ReturnType::Value(ElemType::Real64)),
            Just(ReturnType::Value(ElemType::Int64))
        ];
        (ret, prop::collection::vec(arb_param(), 0..6)).prop_map(|(return_type, ps)| FuncDecl {
            name: "fn_under_test".into(),
            return_type,
            params: ps
                .into_iter()
                .enumerate()
                .map(|(i, (b, f))| ParamDecl::new(format!("p{i}"), b, f))
                .collect(),
        })
    }

    proptest! {
        #[test]
        fn unparse_round_trips(decl in arb_decl()) {
            let text = unparse(&decl);
            let parsed = parse_declarations(&text).unwrap();
            prop_assert_eq!(parsed, vec![decl]);
        }

        #[test]
        fn rank_rule_holds(decl in arb_decl()) {
            for p in &decl.params {
                let want = match &p.decl_form {
                    DeclForm::Scalar => 0,
                    DeclForm::PointerChain(_) => 1,
                    DeclForm::DimensionedArray(d) => d.len(),
                };
                prop_assert_eq!(p.declared_rank, want);
            }
        }
    }
}
