//! Tokenizer for `.lt` sources.

use alloc::string::String;
use alloc::vec::Vec;

use super::parser::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
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
    Assign,
    EqEq,
    Plus,
    PlusPlus,
    AndAnd,
    Arrow,
    FatArrow,
    LArrow,
    At,
    Lambda,
    BigLambda,
    Pipe,
    Caret,
    Minus,
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let err = |line, col, msg: &str| ParseError { line, col, message: String::from(msg) };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            col += i - start;
            let s: String = chars[start..i].iter().collect();
            push(&mut out, Tok::Ident(s));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let s: String = chars[start..i].iter().collect();
            let v: i64 = s.parse().map_err(|_| err(tl, tc, "integer literal out of range"))?;
            push(&mut out, Tok::Int(v));
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated string literal")),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let e = chars.get(i + 1).copied();
                        let ch = match e {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => return Err(err(line, col, "unknown escape in string literal")),
                        };
                        s.push(ch);
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            push(&mut out, Tok::Str(s));
            continue;
        }
        let (tok, n) = match (c, next) {
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (',', _) => (Tok::Comma, 1),
            (':', _) => (Tok::Colon, 1),
            (';', _) => (Tok::Semi, 1),
            ('.', _) => (Tok::Dot, 1),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('=', Some('>')) => (Tok::FatArrow, 2),
            ('=', _) => (Tok::Assign, 1),
            ('+', Some('+')) => (Tok::PlusPlus, 2),
            ('+', _) => (Tok::Plus, 1),
            ('&', Some('&')) => (Tok::AndAnd, 2),
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('-', _) => (Tok::Minus, 1),
            ('<', Some('-')) => (Tok::LArrow, 2),
            ('@', _) => (Tok::At, 1),
            ('\\', _) => (Tok::Lambda, 1),
            ('/', Some('\\')) => (Tok::BigLambda, 2),
            ('|', _) => (Tok::Pipe, 1),
            ('^', _) => (Tok::Caret, 1),
            ('λ', _) => (Tok::Lambda, 1),
            ('Λ', _) => (Tok::BigLambda, 1),
            ('→', _) => (Tok::Arrow, 1),
            ('←', _) => (Tok::LArrow, 1),
            ('⇒', _) => (Tok::FatArrow, 1),
            ('∀', _) => (Tok::Ident(String::from("forall")), 1),
            _ => return Err(err(tl, tc, "unexpected character")),
        };
        push(&mut out, tok);
        advance(n, &mut i, &mut col);
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn symbols_and_comments() {
        assert_eq!(
            toks("x ++ y # tail\n-> <- => == ="),
            [
                Tok::Ident("x".into()),
                Tok::PlusPlus,
                Tok::Ident("y".into()),
                Tok::Arrow,
                Tok::LArrow,
                Tok::FatArrow,
                Tok::EqEq,
                Tok::Assign,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn strings_with_escapes() {
        assert_eq!(toks(r#""Burns\"s""#), [Tok::Str("Burns\"s".into()), Tok::Eof]);
    }

    #[test]
    fn positions() {
        let t = lex("a\n  b").unwrap();
        assert_eq!((t[1].line, t[1].col), (2, 3));
    }
}
