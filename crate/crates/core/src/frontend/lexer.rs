//! Hand-written scanner. KRL is line oriented, so newlines are tokens.

use super::token::{Keyword, Span, Sym, Token, TokenKind};
use crate::diag::Diagnostic;

struct Scanner<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
    line_start: bool,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, lo: usize, line: u32, col: u32) -> Span {
        Span::new(lo as u32, self.pos as u32, line, col)
    }

    fn skip_to_eol(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' || (c == '\r' && self.peek2() == Some('\n')) {
                break;
            }
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Tokenize `source`. The result always ends with an `Eof` token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut s = Scanner {
        src: source,
        pos: 0,
        line: 1,
        col: 1,
        line_start: true,
    };
    let mut out = Vec::new();

    loop {
        // horizontal whitespace
        while let Some(c) = s.peek() {
            if c == ' ' || c == '\t' || (c == '\r' && s.peek2() != Some('\n')) || c == '\u{feff}' {
                s.bump();
            } else {
                break;
            }
        }
        let lo = s.pos;
        let (line, col) = (s.line, s.col);
        let Some(c) = s.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                lexeme: String::new(),
                span: s.span_from(lo, line, col),
            });
            return Ok(out);
        };

        if c == '&' && s.line_start {
            s.skip_to_eol();
            continue;
        }
        if c == ';' {
            s.skip_to_eol();
            continue;
        }
        if c == '\n' || c == '\r' {
            if c == '\r' {
                s.bump();
            }
            s.bump();
            out.push(Token {
                kind: TokenKind::Eol,
                lexeme: "\n".into(),
                span: Span::new(lo as u32, s.pos as u32, line, col),
            });
            s.line_start = true;
            continue;
        }
        s.line_start = false;

        let kind = if is_ident_start(c) {
            while s.peek().is_some_and(is_ident_char) {
                s.bump();
            }
            let upper = s.src[lo..s.pos].to_ascii_uppercase();
            let kind = match Keyword::from_upper(&upper) {
                Some(kw) => TokenKind::Keyword(kw),
                None => TokenKind::Ident,
            };
            out.push(Token {
                kind,
                lexeme: upper,
                span: s.span_from(lo, line, col),
            });
            continue;
        } else if c == '$' {
            s.bump();
            if !s.peek().is_some_and(is_ident_start) {
                return Err(Diagnostic::error(
                    s.span_from(lo, line, col),
                    "'$' must be followed by a system variable name",
                ));
            }
            while s.peek().is_some_and(is_ident_char) {
                s.bump();
            }
            out.push(Token {
                kind: TokenKind::SysVar,
                lexeme: s.src[lo..s.pos].to_ascii_uppercase(),
                span: s.span_from(lo, line, col),
            });
            continue;
        } else if c.is_ascii_digit() {
            scan_number(&mut s, lo, line, col)?
        } else if c == '"' {
            s.bump();
            let mut text = String::new();
            loop {
                match s.peek() {
                    Some('"') => {
                        s.bump();
                        break;
                    }
                    None | Some('\n') | Some('\r') => {
                        return Err(Diagnostic::error(
                            s.span_from(lo, line, col),
                            "unterminated string literal",
                        ))
                    }
                    Some(ch) if !ch.is_ascii() => {
                        let clo = s.pos;
                        let (cl, cc) = (s.line, s.col);
                        s.bump();
                        return Err(Diagnostic::error(
                            s.span_from(clo, cl, cc),
                            format!("non-ASCII character {ch:?} in string literal"),
                        ));
                    }
                    Some(ch) => {
                        text.push(ch);
                        s.bump();
                    }
                }
            }
            TokenKind::Str(text)
        } else {
            s.bump();
            let next = s.peek();
            let sym = match (c, next) {
                ('=', Some('=')) => {
                    s.bump();
                    Sym::EqEq
                }
                ('<', Some('>')) => {
                    s.bump();
                    Sym::Ne
                }
                ('<', Some('=')) => {
                    s.bump();
                    Sym::Le
                }
                ('>', Some('=')) => {
                    s.bump();
                    Sym::Ge
                }
                ('=', _) => Sym::Assign,
                ('<', _) => Sym::Lt,
                ('>', _) => Sym::Gt,
                ('+', _) => Sym::Plus,
                ('-', _) => Sym::Minus,
                ('*', _) => Sym::Star,
                ('/', _) => Sym::Slash,
                ('(', _) => Sym::LParen,
                (')', _) => Sym::RParen,
                ('[', _) => Sym::LBracket,
                (']', _) => Sym::RBracket,
                ('{', _) => Sym::LBrace,
                ('}', _) => Sym::RBrace,
                (',', _) => Sym::Comma,
                (':', _) => Sym::Colon,
                ('.', _) => Sym::Dot,
                _ => {
                    return Err(Diagnostic::error(
                        s.span_from(lo, line, col),
                        format!("illegal character {c:?}"),
                    ))
                }
            };
            TokenKind::Sym(sym)
        };
        out.push(Token {
            kind,
            lexeme: s.src[lo..s.pos].to_string(),
            span: s.span_from(lo, line, col),
        });
    }
}

fn scan_number(s: &mut Scanner<'_>, lo: usize, line: u32, col: u32) -> Result<TokenKind, Diagnostic> {
    while s.peek().is_some_and(|c| c.is_ascii_digit()) {
        s.bump();
    }
    let mut is_real = false;
    if s.peek() == Some('.') {
        is_real = true;
        s.bump();
        if !s.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(Diagnostic::error(
                s.span_from(lo, line, col),
                "malformed real literal: expected digits after '.'",
            ));
        }
        while s.peek().is_some_and(|c| c.is_ascii_digit()) {
            s.bump();
        }
    }
    if matches!(s.peek(), Some('e') | Some('E')) {
        let after = s.peek2();
        let exp_ok = after.is_some_and(|c| c.is_ascii_digit() || c == '+' || c == '-');
        if exp_ok {
            is_real = true;
            s.bump();
            if matches!(s.peek(), Some('+') | Some('-')) {
                s.bump();
            }
            if !s.peek().is_some_and(|c| c.is_ascii_digit()) {
                return Err(Diagnostic::error(
                    s.span_from(lo, line, col),
                    "malformed real literal: missing exponent digits",
                ));
            }
            while s.peek().is_some_and(|c| c.is_ascii_digit()) {
                s.bump();
            }
        }
    }
    if s.peek().is_some_and(is_ident_char) {
        while s.peek().is_some_and(is_ident_char) {
            s.bump();
        }
        return Err(Diagnostic::error(
            s.span_from(lo, line, col),
            format!("malformed numeric literal '{}'", &s.src[lo..s.pos]),
        ));
    }
    let text = &s.src[lo..s.pos];
    if is_real {
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(TokenKind::Real)
            .ok_or_else(|| Diagnostic::error(s.span_from(lo, line, col), format!("malformed real literal '{text}'")))
    } else {
        text.parse::<i32>().map(TokenKind::Int).map_err(|_| {
            Diagnostic::error(
                s.span_from(lo, line, col),
                format!("integer literal '{text}' out of range"),
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn motion_statement() {
        let toks = tokenize("PTP jpos").unwrap();
        assert_eq!(toks.len(), 3);
        assert!(toks[0].is_kw(Keyword::Ptp));
        assert_eq!(toks[1].kind, TokenKind::Ident);
        assert_eq!(toks[1].lexeme, "JPOS");
        assert_eq!(toks[2].kind, TokenKind::Eof);
    }

    #[test]
    fn empty_input() {
        assert_eq!(kinds(""), vec![TokenKind::Eof]);
    }

    #[test]
    fn system_variable_indexing() {
        let toks = tokenize("$VEL_AXIS[i]=60").unwrap();
        let k: Vec<_> = toks.iter().map(|t| t.kind.clone()).collect();
        assert_eq!(
            k,
            vec![
                TokenKind::SysVar,
                TokenKind::Sym(Sym::LBracket),
                TokenKind::Ident,
                TokenKind::Sym(Sym::RBracket),
                TokenKind::Sym(Sym::Assign),
                TokenKind::Int(60),
                TokenKind::Eof
            ]
        );
        assert_eq!(toks[0].lexeme, "$VEL_AXIS");
        assert_eq!(toks[2].lexeme, "I");
    }

    #[test]
    fn comments_and_headers_skipped() {
        let k = kinds("&ACCESS RVP\n&REL 1\nDEF a() ; hello\nEND");
        assert_eq!(
            k,
            vec![
                TokenKind::Eol,
                TokenKind::Eol,
                TokenKind::Keyword(Keyword::Def),
                TokenKind::Ident,
                TokenKind::Sym(Sym::LParen),
                TokenKind::Sym(Sym::RParen),
                TokenKind::Eol,
                TokenKind::Keyword(Keyword::End),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn case_insensitive_keywords() {
        assert_eq!(kinds("endfor")[0], TokenKind::Keyword(Keyword::EndFor));
        assert_eq!(kinds("EndFor")[0], TokenKind::Keyword(Keyword::EndFor));
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("1.5")[0], TokenKind::Real(1.5));
        assert_eq!(kinds("2E3")[0], TokenKind::Real(2000.0));
        assert_eq!(kinds("42")[0], TokenKind::Int(42));
        assert!(tokenize("1.").is_err());
        assert!(tokenize("12abc").is_err());
        assert!(tokenize("99999999999").is_err());
    }

    #[test]
    fn operators() {
        let k = kinds("a<>b<=c>=d==e");
        assert_eq!(k[1], TokenKind::Sym(Sym::Ne));
        assert_eq!(k[3], TokenKind::Sym(Sym::Le));
        assert_eq!(k[5], TokenKind::Sym(Sym::Ge));
        assert_eq!(k[7], TokenKind::Sym(Sym::EqEq));
    }

    #[test]
    fn illegal_character_positioned() {
        let err = tokenize("DEF a()\n  x = 1 # 2").unwrap_err();
        assert_eq!(err.span.line, 2);
        assert_eq!(err.span.col, 9);
    }

    #[test]
    fn spans_ordered_and_in_bounds() {
        let src = "DEF p()\n  DECL INT i\n  i = i + 1 ; c\nEND\n";
        let toks = tokenize(src).unwrap();
        let mut prev_hi = 0;
        for t in &toks {
            assert!(t.span.lo >= prev_hi);
            assert!(t.span.hi as usize <= src.len());
            prev_hi = t.span.hi;
        }
    }
}
