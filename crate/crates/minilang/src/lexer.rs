use crate::ast::Line;
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Int(i64),
    Ident(String),
    // keywords
    Record,
    Extends,
    Fn,
    Test,
    Let,
    If,
    Else,
    While,
    Return,
    Assert,
    ExpectError,
    True,
    False,
    IntTy,
    BoolTy,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Dot,
    Arrow,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: Line,
    pub col: u32,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "record" => Tok::Record,
        "extends" => Tok::Extends,
        "fn" => Tok::Fn,
        "test" => Tok::Test,
        "let" => Tok::Let,
        "if" => Tok::If,
        "else" => Tok::Else,
        "while" => Tok::While,
        "return" => Tok::Return,
        "assert" => Tok::Assert,
        "expect_error" => Tok::ExpectError,
        "true" => Tok::True,
        "false" => Tok::False,
        "int" => Tok::IntTy,
        "bool" => Tok::BoolTy,
        _ => return None,
    })
}

pub fn is_keyword(word: &str) -> bool {
    keyword(word).is_some()
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line: Line = 1;
    let mut line_start = 0;

    while i < bytes.len() {
        let c = bytes[i];
        let col = (src[line_start..i].chars().count() + 1) as u32;
        match c {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
                continue;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            _ => {}
        }

        let start = i;
        let tok = if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            let value = text.parse::<i64>().map_err(|_| {
                ParseError::new(line, col, format!("integer literal '{text}' out of range"))
            })?;
            Tok::Int(value)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            keyword(word).unwrap_or_else(|| Tok::Ident(word.to_string()))
        } else {
            let two = bytes.get(i + 1).copied();
            let (tok, len) = match (c, two) {
                (b'-', Some(b'>')) => (Tok::Arrow, 2),
                (b'=', Some(b'=')) => (Tok::EqEq, 2),
                (b'!', Some(b'=')) => (Tok::NotEq, 2),
                (b'<', Some(b'=')) => (Tok::Le, 2),
                (b'>', Some(b'=')) => (Tok::Ge, 2),
                (b'&', Some(b'&')) => (Tok::AndAnd, 2),
                (b'|', Some(b'|')) => (Tok::OrOr, 2),
                (b'(', _) => (Tok::LParen, 1),
                (b')', _) => (Tok::RParen, 1),
                (b'{', _) => (Tok::LBrace, 1),
                (b'}', _) => (Tok::RBrace, 1),
                (b'[', _) => (Tok::LBracket, 1),
                (b']', _) => (Tok::RBracket, 1),
                (b',', _) => (Tok::Comma, 1),
                (b':', _) => (Tok::Colon, 1),
                (b';', _) => (Tok::Semi, 1),
                (b'.', _) => (Tok::Dot, 1),
                (b'=', _) => (Tok::Assign, 1),
                (b'+', _) => (Tok::Plus, 1),
                (b'-', _) => (Tok::Minus, 1),
                (b'*', _) => (Tok::Star, 1),
                (b'/', _) => (Tok::Slash, 1),
                (b'%', _) => (Tok::Percent, 1),
                (b'<', _) => (Tok::Lt, 1),
                (b'>', _) => (Tok::Gt, 1),
                (b'!', _) => (Tok::Bang, 1),
                _ => {
                    let ch = src[i..].chars().next().unwrap_or('?');
                    return Err(ParseError::new(
                        line,
                        col,
                        format!("unexpected character '{ch}'"),
                    ));
                }
            };
            i += len;
            tok
        };
        tokens.push(Token {
            tok,
            line,
            col,
            start,
            end: i,
        });
    }

    let col = (src[line_start..].chars().count() + 1) as u32;
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        col,
        start: bytes.len(),
        end: bytes.len(),
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_positions() {
        let toks = tokenize("// header\nfn  f() -> int[] { }").unwrap();
        assert_eq!(toks[0].tok, Tok::Fn);
        assert_eq!((toks[0].line, toks[0].col), (2, 1));
        assert_eq!(toks[1].tok, Tok::Ident("f".into()));
        assert_eq!(toks[1].col, 5);
        assert!(toks.iter().any(|t| t.tok == Tok::Arrow));
    }

    #[test]
    fn integer_overflow_is_an_error() {
        let err = tokenize("99999999999999999999").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("out of range"));
    }

    #[test]
    fn stray_character() {
        let err = tokenize("fn f() {\n  \"s\" }").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
    }
}
