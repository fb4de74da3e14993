use super::{ParseError, ParseErrorKind, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Assign,
    Lt,
    Le,
    Ge,
    Gt,
    EqEq,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    AndAnd,
    OrOr,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(v) => format!("number {v}"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Assign => "=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::EqEq => "==",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            _ => "",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
    /// First token on its line.
    pub line_start: bool,
}

/// Splits `text` into tokens. Bad characters are reported and skipped.
pub(crate) fn tokenize(text: &str) -> (Vec<Token>, Vec<ParseError>) {
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let mut line_has_token = false;

    let span_of = |start: usize, end: usize, line: usize, col: usize| SourceSpan {
        line,
        column: col,
        length: end - start,
        offset: chars.get(start).map_or(text.len(), |c| c.0),
    };

    while i < chars.len() {
        let c = chars[i].1;
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            line_has_token = false;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }

        let start = i;
        let start_col = col;
        let peek = chars.get(i + 1).map(|c| c.1);
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            Some(Tok::Ident(chars[start..i].iter().map(|c| c.1).collect()))
        } else if c.is_ascii_digit() {
            i = scan_number(&chars, i);
            let s: String = chars[start..i].iter().map(|c| c.1).collect();
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(Tok::Number(v)),
                _ => {
                    errors.push(ParseError::new(
                        ParseErrorKind::Syntax,
                        span_of(start, i, line, start_col),
                        format!("malformed number `{s}`"),
                    ));
                    None
                }
            }
        } else {
            let (tok, width) = match (c, peek) {
                ('<', Some('=')) => (Some(Tok::Le), 2),
                ('>', Some('=')) => (Some(Tok::Ge), 2),
                ('=', Some('=')) => (Some(Tok::EqEq), 2),
                ('&', Some('&')) => (Some(Tok::AndAnd), 2),
                ('|', Some('|')) => (Some(Tok::OrOr), 2),
                ('{', _) => (Some(Tok::LBrace), 1),
                ('}', _) => (Some(Tok::RBrace), 1),
                ('(', _) => (Some(Tok::LParen), 1),
                (')', _) => (Some(Tok::RParen), 1),
                (',', _) => (Some(Tok::Comma), 1),
                (':', _) => (Some(Tok::Colon), 1),
                (';', _) => (Some(Tok::Semi), 1),
                ('=', _) => (Some(Tok::Assign), 1),
                ('<', _) => (Some(Tok::Lt), 1),
                ('>', _) => (Some(Tok::Gt), 1),
                ('≤', _) => (Some(Tok::Le), 1),
                ('≥', _) => (Some(Tok::Ge), 1),
                ('+', _) => (Some(Tok::Plus), 1),
                ('-', _) => (Some(Tok::Minus), 1),
                ('*', _) => (Some(Tok::Star), 1),
                ('/', _) => (Some(Tok::Slash), 1),
                ('%', _) => (Some(Tok::Percent), 1),
                ('!', _) => (Some(Tok::Bang), 1),
                _ => (None, 1),
            };
            i += width;
            if tok.is_none() {
                errors.push(ParseError::new(
                    ParseErrorKind::Syntax,
                    span_of(start, i, line, start_col),
                    format!("unexpected character `{c}`"),
                ));
            }
            tok
        };
        col += i - start;
        if let Some(tok) = tok {
            tokens.push(Token {
                tok,
                span: span_of(start, i, line, start_col),
                line_start: !line_has_token,
            });
            line_has_token = true;
        }
    }

    tokens.push(Token {
        tok: Tok::Eof,
        span: SourceSpan {
            line,
            column: col,
            length: 0,
            offset: text.len(),
        },
        line_start: true,
    });
    (tokens, errors)
}

/// digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ]
fn scan_number(chars: &[(usize, char)], mut i: usize) -> usize {
    let digit_at = |i: usize| chars.get(i).is_some_and(|c| c.1.is_ascii_digit());
    while digit_at(i) {
        i += 1;
    }
    if chars.get(i).is_some_and(|c| c.1 == '.') && digit_at(i + 1) {
        i += 1;
        while digit_at(i) {
            i += 1;
        }
    }
    if chars.get(i).is_some_and(|c| c.1 == 'e' || c.1 == 'E') {
        let mut j = i + 1;
        if chars.get(j).is_some_and(|c| c.1 == '+' || c.1 == '-') {
            j += 1;
        }
        if digit_at(j) {
            i = j;
            while digit_at(i) {
                i += 1;
            }
        }
    }
    i
}
