use std::fmt;

/// Source range. `lo..hi` are byte offsets; `line`/`col` locate `lo` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Span {
    pub lo: u32,
    pub hi: u32,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(lo: u32, hi: u32, line: u32, col: u32) -> Self {
        Span { lo, hi, line, col }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: Span) -> Span {
        let (first, last) = if self.lo <= other.lo { (self, other) } else { (other, self) };
        Span {
            lo: first.lo,
            hi: last.hi.max(first.hi),
            line: first.line,
            col: first.col,
        }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

macro_rules! keywords {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Keyword {
            $($variant),*
        }

        impl Keyword {
            pub fn from_upper(s: &str) -> Option<Keyword> {
                match s {
                    $($text => Some(Keyword::$variant),)*
                    _ => None,
                }
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Keyword::$variant => $text),*
                }
            }
        }
    };
}

keywords! {
    Def => "DEF",
    End => "END",
    DefFct => "DEFFCT",
    EndFct => "ENDFCT",
    Global => "GLOBAL",
    Decl => "DECL",
    Struc => "STRUC",
    Int => "INT",
    Real => "REAL",
    Bool => "BOOL",
    Char => "CHAR",
    If => "IF",
    Then => "THEN",
    Else => "ELSE",
    EndIf => "ENDIF",
    Switch => "SWITCH",
    Case => "CASE",
    Default => "DEFAULT",
    EndSwitch => "ENDSWITCH",
    For => "FOR",
    To => "TO",
    Step => "STEP",
    EndFor => "ENDFOR",
    While => "WHILE",
    EndWhile => "ENDWHILE",
    Repeat => "REPEAT",
    Until => "UNTIL",
    Loop => "LOOP",
    EndLoop => "ENDLOOP",
    Exit => "EXIT",
    Goto => "GOTO",
    Return => "RETURN",
    Ptp => "PTP",
    Lin => "LIN",
    CDis => "C_DIS",
    CPtp => "C_PTP",
    Trigger => "TRIGGER",
    When => "WHEN",
    Distance => "DISTANCE",
    Delay => "DELAY",
    Do => "DO",
    Interrupt => "INTERRUPT",
    On => "ON",
    Off => "OFF",
    Brake => "BRAKE",
    Wait => "WAIT",
    Sec => "SEC",
    Halt => "HALT",
    True => "TRUE",
    False => "FALSE",
    Not => "NOT",
    And => "AND",
    Or => "OR",
    Exor => "EXOR",
    In => "IN",
    Out => "OUT",
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    Plus,
    Minus,
    Star,
    Slash,
    Assign,
    EqEq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
}

impl Sym {
    pub fn as_str(self) -> &'static str {
        match self {
            Sym::Plus => "+",
            Sym::Minus => "-",
            Sym::Star => "*",
            Sym::Slash => "/",
            Sym::Assign => "=",
            Sym::EqEq => "==",
            Sym::Ne => "<>",
            Sym::Lt => "<",
            Sym::Gt => ">",
            Sym::Le => "<=",
            Sym::Ge => ">=",
            Sym::LParen => "(",
            Sym::RParen => ")",
            Sym::LBracket => "[",
            Sym::RBracket => "]",
            Sym::LBrace => "{",
            Sym::RBrace => "}",
            Sym::Comma => ",",
            Sym::Colon => ":",
            Sym::Dot => ".",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident,
    SysVar,
    Int(i32),
    Real(f64),
    Str(String),
    Sym(Sym),
    Eol,
    Eof,
}

impl TokenKind {
    /// Token class name used in "expected ..." diagnostics.
    pub fn class_name(&self) -> String {
        match self {
            TokenKind::Keyword(k) => k.as_str().to_string(),
            TokenKind::Ident => "identifier".into(),
            TokenKind::SysVar => "system variable".into(),
            TokenKind::Int(_) => "integer literal".into(),
            TokenKind::Real(_) => "real literal".into(),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::Sym(s) => format!("'{}'", s.as_str()),
            TokenKind::Eol => "end of line".into(),
            TokenKind::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text; uppercased for keywords, identifiers and system variables.
    pub lexeme: String,
    pub span: Span,
}

impl Token {
    pub fn is_kw(&self, kw: Keyword) -> bool {
        self.kind == TokenKind::Keyword(kw)
    }

    pub fn is_sym(&self, s: Sym) -> bool {
        self.kind == TokenKind::Sym(s)
    }
}
