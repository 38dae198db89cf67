//! Tokenizer for the supported JavaScript subset.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("lex error at offset {offset}: {reason}")]
pub struct LexError {
    pub offset: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Keyword(Keyword),
    Number(f64),
    /// String literal contents as UTF-16 code units, escapes already decoded.
    Str(Vec<u16>),
    Regex {
        pattern: String,
        flags: String,
    },
    Punct(Punct),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character of the token.
    pub offset: usize,
    /// A line terminator appeared between the previous token and this one.
    pub newline_before: bool,
}

macro_rules! keywords {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Keyword { $($variant),* }

        impl Keyword {
            pub fn from_word(s: &str) -> Option<Keyword> {
                match s {
                    $($text => Some(Keyword::$variant),)*
                    _ => None,
                }
            }

            pub fn as_str(self) -> &'static str {
                match self { $(Keyword::$variant => $text),* }
            }
        }
    };
}

keywords! {
    Break => "break", Case => "case", Catch => "catch", Class => "class",
    Const => "const", Continue => "continue", Debugger => "debugger",
    Default => "default", Delete => "delete", Do => "do", Else => "else",
    Export => "export", Extends => "extends", False => "false",
    Finally => "finally", For => "for", Function => "function", If => "if",
    Import => "import", In => "in", Instanceof => "instanceof", Let => "let",
    New => "new", Null => "null", Return => "return", Super => "super",
    Switch => "switch", This => "this", Throw => "throw", True => "true",
    Try => "try", Typeof => "typeof", Var => "var", Void => "void",
    While => "while", With => "with", Yield => "yield",
}

macro_rules! puncts {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Punct { $($variant),* }

        impl Punct {
            pub fn as_str(self) -> &'static str {
                match self { $(Punct::$variant => $text),* }
            }
        }

        // Longest first so that maximal munch works by linear scan.
        const PUNCT_TABLE: &[(&str, Punct)] = &[$(($text, Punct::$variant)),*];
    };
}

puncts! {
    UShrAssign => ">>>=", StrictEq => "===", StrictNe => "!==", UShr => ">>>",
    ShlAssign => "<<=", ShrAssign => ">>=",
    Eq => "==", Ne => "!=", Le => "<=", Ge => ">=", And => "&&", Or => "||",
    Inc => "++", Dec => "--", Shl => "<<", Shr => ">>",
    AddAssign => "+=", SubAssign => "-=", MulAssign => "*=", DivAssign => "/=",
    ModAssign => "%=", AndAssign => "&=", OrAssign => "|=", XorAssign => "^=",
    LBrace => "{", RBrace => "}", LParen => "(", RParen => ")", LBracket => "[",
    RBracket => "]", Dot => ".", Semi => ";", Comma => ",", Lt => "<", Gt => ">",
    Plus => "+", Minus => "-", Star => "*", Slash => "/", Percent => "%",
    Amp => "&", Pipe => "|", Caret => "^", Bang => "!", Tilde => "~",
    Question => "?", Colon => ":", Assign => "=",
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(name) => write!(f, "identifier `{name}`"),
            TokenKind::Keyword(k) => write!(f, "`{}`", k.as_str()),
            TokenKind::Number(n) => write!(f, "number {n}"),
            TokenKind::Str(_) => f.write_str("string literal"),
            TokenKind::Regex { .. } => f.write_str("regular expression"),
            TokenKind::Punct(p) => write!(f, "`{}`", p.as_str()),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

fn is_id_start(c: char) -> bool {
    c == '$' || c == '_' || c.is_alphabetic()
}

fn is_id_part(c: char) -> bool {
    is_id_start(c)
        || c.is_ascii_digit()
        || c == '\u{200c}'
        || c == '\u{200d}'
        || c.is_alphanumeric()
}

fn is_line_terminator(c: char) -> bool {
    matches!(c, '\n' | '\r' | '\u{2028}' | '\u{2029}')
}

fn is_js_whitespace(c: char) -> bool {
    matches!(c, '\t' | '\u{b}' | '\u{c}' | ' ' | '\u{a0}' | '\u{feff}')
        || (c.is_whitespace() && !is_line_terminator(c))
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn err(&self, offset: usize, reason: impl Into<String>) -> LexError {
        LexError {
            offset,
            reason: reason.into(),
        }
    }

    /// Skips whitespace and comments; reports whether a line terminator was crossed.
    fn skip_trivia(&mut self) -> Result<bool, LexError> {
        let mut newline = false;
        loop {
            match self.peek() {
                Some(c) if is_line_terminator(c) => {
                    newline = true;
                    self.bump();
                }
                Some(c) if is_js_whitespace(c) => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while let Some(c) = self.peek() {
                        if is_line_terminator(c) {
                            break;
                        }
                        self.bump();
                    }
                }
                Some('/') if self.peek_at(1) == Some('*') => {
                    let start = self.pos;
                    self.pos += 2;
                    match self.src[self.pos..].find("*/") {
                        Some(end) => {
                            if self.src[self.pos..self.pos + end]
                                .chars()
                                .any(is_line_terminator)
                            {
                                newline = true;
                            }
                            self.pos += end + 2;
                        }
                        None => return Err(self.err(start, "unterminated comment")),
                    }
                }
                // HTML-like comment openers show up in scripts lifted out of pages.
                Some('<') if self.src[self.pos..].starts_with("<!--") => {
                    while let Some(c) = self.peek() {
                        if is_line_terminator(c) {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return Ok(newline),
            }
        }
    }

    fn hex_digits(&mut self, count: usize, start: usize) -> Result<u32, LexError> {
        let mut value = 0u32;
        for _ in 0..count {
            match self.peek().and_then(|c| c.to_digit(16)) {
                Some(d) => {
                    value = value * 16 + d;
                    self.bump();
                }
                None => return Err(self.err(start, "malformed escape sequence")),
            }
        }
        Ok(value)
    }

    fn string(&mut self, quote: char) -> Result<Vec<u16>, LexError> {
        let start = self.pos;
        self.bump();
        let mut out: Vec<u16> = Vec::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(start, "unterminated string"));
            };
            if c == quote {
                return Ok(out);
            }
            if c == '\n' || c == '\r' {
                return Err(self.err(start, "unterminated string"));
            }
            if c != '\\' {
                let mut buf = [0u16; 2];
                out.extend_from_slice(c.encode_utf16(&mut buf));
                continue;
            }
            let Some(esc) = self.bump() else {
                return Err(self.err(start, "unterminated string"));
            };
            match esc {
                'n' => out.push(0x0a),
                't' => out.push(0x09),
                'r' => out.push(0x0d),
                'b' => out.push(0x08),
                'f' => out.push(0x0c),
                'v' => out.push(0x0b),
                '0'..='7' => {
                    // Legacy octal escapes: up to three digits, value < 256.
                    let mut value = esc.to_digit(8).unwrap();
                    for _ in 0..2 {
                        match self.peek().and_then(|c| c.to_digit(8)) {
                            Some(d) if value * 8 + d < 256 => {
                                value = value * 8 + d;
                                self.bump();
                            }
                            _ => break,
                        }
                    }
                    out.push(value as u16);
                }
                'x' => {
                    let v = self.hex_digits(2, start)?;
                    out.push(v as u16);
                }
                'u' => {
                    if self.peek() == Some('{') {
                        self.bump();
                        let mut v = 0u32;
                        loop {
                            match self.bump() {
                                Some('}') => break,
                                Some(c) if c.is_ascii_hexdigit() => {
                                    v = v
                                        .saturating_mul(16)
                                        .saturating_add(c.to_digit(16).unwrap());
                                }
                                _ => return Err(self.err(start, "malformed escape sequence")),
                            }
                        }
                        match char::from_u32(v) {
                            Some(ch) => {
                                let mut buf = [0u16; 2];
                                out.extend_from_slice(ch.encode_utf16(&mut buf));
                            }
                            None => return Err(self.err(start, "malformed escape sequence")),
                        }
                    } else {
                        let v = self.hex_digits(4, start)?;
                        out.push(v as u16);
                    }
                }
                '\r' => {
                    if self.peek() == Some('\n') {
                        self.bump();
                    }
                }
                '\n' | '\u{2028}' | '\u{2029}' => {}
                other => {
                    let mut buf = [0u16; 2];
                    out.extend_from_slice(other.encode_utf16(&mut buf));
                }
            }
        }
    }

    fn number(&mut self) -> Result<f64, LexError> {
        let start = self.pos;
        let rest = &self.src[self.pos..];
        if rest.starts_with("0x") || rest.starts_with("0X") {
            self.pos += 2;
            let digits_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                self.bump();
            }
            if self.pos == digits_start {
                return Err(self.err(start, "malformed hexadecimal literal"));
            }
            let digits = &self.src[digits_start..self.pos];
            let value = digits
                .chars()
                .fold(0f64, |acc, c| acc * 16.0 + c.to_digit(16).unwrap() as f64);
            self.reject_ident_tail(start)?;
            return Ok(value);
        }
        // Legacy octal: 0 followed only by octal digits.
        if rest.len() > 1 && rest.starts_with('0') && rest.as_bytes()[1].is_ascii_digit() {
            let digits: String = rest[1..]
                .chars()
                .take_while(|c| c.is_ascii_digit())
                .collect();
            if digits.chars().all(|c| c < '8') {
                self.pos += 1 + digits.len();
                self.reject_ident_tail(start)?;
                return Ok(digits
                    .chars()
                    .fold(0f64, |acc, c| acc * 8.0 + c.to_digit(8).unwrap() as f64));
            }
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') {
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            } else {
                self.pos = save;
                return Err(self.err(start, "malformed exponent"));
            }
        }
        self.reject_ident_tail(start)?;
        self.src[start..self.pos]
            .parse::<f64>()
            .map_err(|_| self.err(start, "malformed number"))
    }

    fn reject_ident_tail(&self, start: usize) -> Result<(), LexError> {
        match self.peek() {
            Some(c) if is_id_start(c) || c.is_ascii_digit() => {
                Err(self.err(start, "identifier starts immediately after numeric literal"))
            }
            _ => Ok(()),
        }
    }

    fn regex(&mut self) -> Result<TokenKind, LexError> {
        let start = self.pos;
        self.bump();
        let mut pattern = String::new();
        let mut in_class = false;
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(start, "unterminated regular expression"));
            };
            if is_line_terminator(c) {
                return Err(self.err(start, "unterminated regular expression"));
            }
            match c {
                '\\' => {
                    pattern.push(c);
                    match self.bump() {
                        Some(n) if !is_line_terminator(n) => pattern.push(n),
                        _ => return Err(self.err(start, "unterminated regular expression")),
                    }
                    continue;
                }
                '[' => in_class = true,
                ']' => in_class = false,
                '/' if !in_class => break,
                _ => {}
            }
            pattern.push(c);
        }
        let mut flags = String::new();
        while let Some(c) = self.peek().filter(|&c| is_id_part(c)) {
            flags.push(c);
            self.bump();
        }
        Ok(TokenKind::Regex { pattern, flags })
    }

    fn ident(&mut self) -> Result<String, LexError> {
        let start = self.pos;
        let mut name = String::new();
        loop {
            match self.peek() {
                Some('\\') => {
                    self.bump();
                    if self.bump() != Some('u') {
                        return Err(self.err(start, "malformed identifier escape"));
                    }
                    let v = self.hex_digits(4, start)?;
                    match char::from_u32(v) {
                        Some(c) => name.push(c),
                        None => return Err(self.err(start, "malformed identifier escape")),
                    }
                }
                Some(c) if is_id_part(c) => {
                    name.push(c);
                    self.bump();
                }
                _ => return Ok(name),
            }
        }
    }
}

/// True when a `/` following a token of this kind starts a regular expression
/// rather than a division operator.
fn regex_allowed_after(prev: Option<&TokenKind>) -> bool {
    match prev {
        None => true,
        Some(
            TokenKind::Number(_)
            | TokenKind::Str(_)
            | TokenKind::Ident(_)
            | TokenKind::Regex { .. },
        ) => false,
        Some(TokenKind::Keyword(k)) => !matches!(
            k,
            Keyword::This | Keyword::Null | Keyword::True | Keyword::False | Keyword::Super
        ),
        Some(TokenKind::Punct(p)) => !matches!(
            p,
            Punct::RParen | Punct::RBracket | Punct::RBrace | Punct::Inc | Punct::Dec
        ),
        Some(TokenKind::Eof) => false,
    }
}

/// Splits `source` into tokens. The returned vector always ends with an `Eof` token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        src: source,
        pos: 0,
    };
    let mut tokens: Vec<Token> = Vec::new();
    // Leading hashbang is tolerated.
    if source.starts_with("#!") {
        while let Some(c) = lx.peek() {
            if is_line_terminator(c) {
                break;
            }
            lx.bump();
        }
    }
    loop {
        let newline_before = lx.skip_trivia()?;
        let offset = lx.pos;
        let Some(c) = lx.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                offset,
                newline_before: true,
            });
            return Ok(tokens);
        };
        let kind = if c == '"' || c == '\'' {
            TokenKind::Str(lx.string(c)?)
        } else if c.is_ascii_digit()
            || (c == '.' && lx.peek_at(1).is_some_and(|d| d.is_ascii_digit()))
        {
            TokenKind::Number(lx.number()?)
        } else if is_id_start(c) || c == '\\' {
            let name = lx.ident()?;
            match Keyword::from_word(&name) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(name),
            }
        } else if c == '/' && regex_allowed_after(tokens.last().map(|t| &t.kind)) {
            lx.regex()?
        } else {
            let rest = &source[lx.pos..];
            match PUNCT_TABLE.iter().find(|(text, _)| rest.starts_with(text)) {
                Some((text, p)) => {
                    lx.pos += text.len();
                    TokenKind::Punct(*p)
                }
                None => return Err(lx.err(offset, format!("illegal character {c:?}"))),
            }
        };
        tokens.push(Token {
            kind,
            offset,
            newline_before,
        });
    }
}

/// Decodes raw bytes as UTF-8, replacing invalid sequences.
pub fn decode_source(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn s(text: &str) -> TokenKind {
        TokenKind::Str(text.encode_utf16().collect())
    }

    #[test]
    fn keyword_statement() {
        assert_eq!(
            kinds("var a = null;"),
            vec![
                TokenKind::Keyword(Keyword::Var),
                TokenKind::Ident("a".into()),
                TokenKind::Punct(Punct::Assign),
                TokenKind::Keyword(Keyword::Null),
                TokenKind::Punct(Punct::Semi),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn hex_escapes_decode() {
        assert_eq!(
            kinds(r"'\x25' + 'u9'"),
            vec![
                s("%"),
                TokenKind::Punct(Punct::Plus),
                s("u9"),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn unterminated_string_reports_start() {
        let err = tokenize("\"abc").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(err.reason.contains("unterminated string"));
    }

    #[test]
    fn unterminated_comment() {
        let err = tokenize("a /* b").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn illegal_character() {
        let err = tokenize("a @ b").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn regex_versus_division() {
        assert_eq!(
            kinds("a / b"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct(Punct::Slash),
                TokenKind::Ident("b".into()),
                TokenKind::Eof
            ]
        );
        assert_eq!(
            kinds("x = /a[/]b/gi"),
            vec![
                TokenKind::Ident("x".into()),
                TokenKind::Punct(Punct::Assign),
                TokenKind::Regex {
                    pattern: "a[/]b".into(),
                    flags: "gi".into()
                },
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(
            kinds("0x1F 010 1.5e2 .5"),
            vec![
                TokenKind::Number(31.0),
                TokenKind::Number(8.0),
                TokenKind::Number(150.0),
                TokenKind::Number(0.5),
                TokenKind::Eof
            ]
        );
    }

    #[test]
    fn newline_flag_and_offsets() {
        let toks = tokenize("a\n  b").unwrap();
        assert!(!toks[0].newline_before);
        assert!(toks[1].newline_before);
        assert_eq!(toks[1].offset, 4);
    }

    #[test]
    fn unicode_escape_in_string() {
        assert_eq!(
            kinds(r#""\u9090\u{41}""#),
            vec![TokenKind::Str(vec![0x9090, 0x41]), TokenKind::Eof]
        );
    }

    #[test]
    fn maximal_munch_punctuators() {
        assert_eq!(
            kinds("a >>>= b !== c"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct(Punct::UShrAssign),
                TokenKind::Ident("b".into()),
                TokenKind::Punct(Punct::StrictNe),
                TokenKind::Ident("c".into()),
                TokenKind::Eof
            ]
        );
    }
}
