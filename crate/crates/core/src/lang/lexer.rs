use super::parser::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Lower(String),
    Upper(String),
    Int(i64),
    Str(String),
    Eq,
    Bar,
    Colon,
    Comma,
    LParen,
    RParen,
    Arrow,
    PragmaOpen,
    PragmaClose,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Lower(s) | Tok::Upper(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Eq => "`=`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::PragmaOpen => "`{-#`".into(),
            Tok::PragmaClose => "`#-}`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    /// First token on its line.
    pub bol: bool,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut last_line = 0u32;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tline, tcol) = (line, col);
        let err = |msg: String| ParseError { line: tline, col: tcol, msg };
        let start = i;
        let tok = if c == '{' && chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'#') {
            i += 3;
            Tok::PragmaOpen
        } else if c == '#' && chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'}') {
            i += 3;
            Tok::PragmaClose
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            Tok::Arrow
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            Tok::Int(text.parse().map_err(|_| err(format!("integer literal `{text}` out of range")))?)
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err("unterminated string literal".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => match chars.get(i + 1) {
                        Some('"') => {
                            s.push('"');
                            i += 2;
                        }
                        Some('\\') => {
                            s.push('\\');
                            i += 2;
                        }
                        _ => return Err(err("unsupported escape; only \\\" and \\\\ are allowed".into())),
                    },
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            if c.is_uppercase() {
                Tok::Upper(text)
            } else {
                Tok::Lower(text)
            }
        } else {
            i += 1;
            match c {
                '=' => Tok::Eq,
                '|' => Tok::Bar,
                ':' => Tok::Colon,
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(format!("unexpected character `{c}`"))),
            }
        };
        col += (i - start) as u32;
        out.push(Token { tok, line: tline, col: tcol, bol: tline != last_line });
        last_line = tline;
    }
    out.push(Token { tok: Tok::Eof, line, col, bol: true });
    Ok(out)
}
