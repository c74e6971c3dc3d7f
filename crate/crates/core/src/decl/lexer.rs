use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    Ident(String),
    Int(usize),
    Punct(char),
    Ellipsis,
    Eof,
}

impl Tok {
    pub(super) fn ident(&self) -> &str {
        match self {
            Tok::Ident(s) => s,
            _ => "",
        }
    }
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(n) => write!(f, "'{n}'"),
            Tok::Punct(c) => write!(f, "'{c}'"),
            Tok::Ellipsis => f.write_str("'...'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(super) struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    pub(super) fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub(super) fn tokenize(mut self) -> Result<Vec<Token>> {
        let mut out = Vec::new();
        loop {
            let (line, column) = (self.line, self.column);
            let Some(&c) = self.chars.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    column,
                });
                return Ok(out);
            };
            let tok = if c.is_whitespace() {
                self.bump();
                continue;
            } else if c == '/' {
                self.bump();
                match self.chars.peek() {
                    Some('/') => {
                        while let Some(c) = self.bump() {
                            if c == '\n' {
                                break;
                            }
                        }
                        continue;
                    }
                    Some('*') => {
                        self.bump();
                        let mut prev = '\0';
                        loop {
                            match self.bump() {
                                Some('/') if prev == '*' => break,
                                Some(c) => prev = c,
                                None => {
                                    return Err(self.error(line, column, "unterminated comment"))
                                }
                            }
                        }
                        continue;
                    }
                    _ => return Err(self.error(line, column, "unexpected '/'")),
                }
            } else if c == '#' {
                return Err(Error::UnsupportedDecl {
                    line,
                    column,
                    construct: "preprocessor directive".into(),
                });
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            } else if c.is_ascii_digit() {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_alphanumeric() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                let n = s
                    .parse()
                    .map_err(|_| self.error(line, column, format!("invalid integer '{s}'")))?;
                Tok::Int(n)
            } else if c == '.' {
                for _ in 0..3 {
                    if self.bump() != Some('.') {
                        return Err(self.error(line, column, "unexpected '.'"));
                    }
                }
                Tok::Ellipsis
            } else if "()[],;*".contains(c) {
                self.bump();
                Tok::Punct(c)
            } else {
                return Err(self.error(line, column, format!("unexpected character '{c}'")));
            };
            out.push(Token { tok, line, column });
        }
    }
}
