use std::iter::Peekable;
use std::str::Chars;

use crate::model::Pos;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    Eq,
    Arrow,
    Dollar,
    At,
    Dot,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Real(r) => format!("number {r}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Dollar => "`$`".into(),
            Tok::At => "`@`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub(crate) struct LexError {
    pub message: String,
    pub pos: Pos,
}

struct Cursor<'a> {
    chars: Peekable<Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
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

    fn second(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }
}

pub(crate) fn lex(src: &str) -> (Vec<Token>, Vec<LexError>) {
    let mut cur = Cursor { chars: src.chars().peekable(), line: 1, column: 1 };
    let mut tokens = Vec::new();
    let mut errors = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        let at = |length: u32| Pos { line, column, length: length.max(1) };
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.second() == Some('/') {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(c) = cur.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    cur.bump();
                } else {
                    break;
                }
            }
            let len = s.len() as u32;
            tokens.push(Token { tok: Tok::Ident(s), pos: at(len) });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && cur.second().is_some_and(|d| d.is_ascii_digit())) {
            match lex_number(&mut cur) {
                Ok((tok, len)) => tokens.push(Token { tok, pos: at(len) }),
                Err((message, len)) => errors.push(LexError { message, pos: at(len) }),
            }
            continue;
        }
        if c == '"' {
            cur.bump();
            let mut s = String::new();
            let mut len = 1;
            let mut closed = false;
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
                len += 1;
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => {
                        len += 1;
                        match cur.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            other => {
                                errors.push(LexError {
                                    message: format!("unknown escape `\\{}`", other.unwrap_or(' ')),
                                    pos: at(len),
                                });
                            }
                        }
                    }
                    c => s.push(c),
                }
            }
            if closed {
                tokens.push(Token { tok: Tok::Str(s), pos: at(len) });
            } else {
                errors.push(LexError { message: "unterminated string literal".into(), pos: at(len) });
            }
            continue;
        }
        cur.bump();
        let tok = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '=' => Tok::Eq,
            '$' => Tok::Dollar,
            '@' => Tok::At,
            '.' => Tok::Dot,
            '-' if cur.peek() == Some('>') => {
                cur.bump();
                tokens.push(Token { tok: Tok::Arrow, pos: at(2) });
                continue;
            }
            other => {
                errors.push(LexError { message: format!("unexpected character `{other}`"), pos: at(1) });
                continue;
            }
        };
        tokens.push(Token { tok, pos: at(1) });
    }
    tokens.push(Token { tok: Tok::Eof, pos: Pos { line: cur.line, column: cur.column, length: 1 } });
    (tokens, errors)
}

fn lex_number(cur: &mut Cursor<'_>) -> Result<(Tok, u32), (String, u32)> {
    let mut text = String::new();
    if cur.peek() == Some('-') {
        text.push('-');
        cur.bump();
    }
    let mut real = false;
    let digits = |cur: &mut Cursor<'_>, text: &mut String| {
        while let Some(d) = cur.peek().filter(|d| d.is_ascii_digit()) {
            text.push(d);
            cur.bump();
        }
    };
    digits(cur, &mut text);
    if cur.peek() == Some('.') && cur.second().is_some_and(|d| d.is_ascii_digit()) {
        real = true;
        text.push('.');
        cur.bump();
        digits(cur, &mut text);
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let mut ahead = cur.chars.clone();
        ahead.next();
        let next = ahead.next();
        let exp_ok = match next {
            Some(d) if d.is_ascii_digit() => true,
            Some('+' | '-') => ahead.next().is_some_and(|d| d.is_ascii_digit()),
            _ => false,
        };
        if exp_ok {
            real = true;
            text.push('e');
            cur.bump();
            if let Some(sign @ ('+' | '-')) = cur.peek() {
                text.push(sign);
                cur.bump();
            }
            digits(cur, &mut text);
        }
    }
    let len = text.len() as u32;
    if real {
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(|v| (Tok::Real(v), len))
            .ok_or_else(|| (format!("number `{text}` out of range"), len))
    } else {
        text.parse::<i64>()
            .map(|v| (Tok::Int(v), len))
            .map_err(|_| (format!("integer `{text}` out of range"), len))
    }
}
