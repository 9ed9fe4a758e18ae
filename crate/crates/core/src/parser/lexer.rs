use super::diagnostic::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Eq,
    Prime,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Eq => "=",
            Tok::Prime => "'",
            _ => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

const MAX_NUMBER_LEN: usize = 400;

pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    let end_of = |j: usize| bytes.get(j).map(|(b, _)| *b).unwrap_or(src.len());
    while i < bytes.len() {
        let (start, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].1.is_ascii_alphanumeric() || bytes[j].1 == '_') {
                j += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..end_of(j)].to_string()), start, end: end_of(j) });
            i = j;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|(_, d)| d.is_ascii_digit())) {
            let mut j = i;
            let mut seen_dot = false;
            while j < bytes.len() {
                let d = bytes[j].1;
                if d.is_ascii_digit() {
                    j += 1;
                } else if d == '.' && !seen_dot {
                    seen_dot = true;
                    j += 1;
                } else {
                    break;
                }
            }
            let text = &src[start..end_of(j)];
            if text.len() > MAX_NUMBER_LEN {
                return Err(Diagnostic::error(Span::new(src, start, end_of(j)), "numeric literal too long"));
            }
            out.push(Token { tok: Tok::Number(text.to_string()), start, end: end_of(j) });
            i = j;
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].1 != '"' && bytes[j].1 != '\n' {
                j += 1;
            }
            if j >= bytes.len() || bytes[j].1 != '"' {
                return Err(Diagnostic::error(Span::new(src, start, end_of(j)), "unterminated string literal"));
            }
            out.push(Token {
                tok: Tok::Str(src[end_of(i + 1)..end_of(j)].to_string()),
                start,
                end: end_of(j + 1),
            });
            i = j + 1;
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '=' => Tok::Eq,
            '\'' => Tok::Prime,
            _ => {
                return Err(Diagnostic::error(
                    Span::new(src, start, end_of(i + 1)),
                    format!("unexpected character `{}`", c.escape_debug()),
                ))
            }
        };
        out.push(Token { tok, start, end: end_of(i + 1) });
        i += 1;
    }
    out.push(Token { tok: Tok::Eof, start: src.len(), end: src.len() });
    Ok(out)
}
