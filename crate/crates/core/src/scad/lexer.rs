use super::error::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Token {
    Number(f64),
    Ident(String),
    Module,
    For,
    True,
    False,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Assign,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    /// Raw comment text including its delimiters.
    Comment(String),
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        match self {
            Token::Number(n) => format!("number {n}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Module => "`module`".into(),
            Token::For => "`for`".into(),
            Token::True => "`true`".into(),
            Token::False => "`false`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::LBrace => "`{`".into(),
            Token::RBrace => "`}`".into(),
            Token::LBracket => "`[`".into(),
            Token::RBracket => "`]`".into(),
            Token::Comma => "`,`".into(),
            Token::Semi => "`;`".into(),
            Token::Assign => "`=`".into(),
            Token::Colon => "`:`".into(),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Comment(_) => "comment".into(),
            Token::Eof => "end of file".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub line: u32,
    pub col: u32,
    /// Last line touched by the token (differs from `line` for block comments).
    pub end_line: u32,
}

pub fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        let (start_line, start_col) = (line, col);
        let single = |t: Token| Spanned {
            token: t,
            line: start_line,
            col: start_col,
            end_line: start_line,
        };

        if c == '/' && chars.get(i + 1) == Some(&'/') {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            let raw: String = chars[start..i].iter().collect();
            out.push(single(Token::Comment(raw.trim_end().to_string())));
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = i;
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(ParseError::Lex {
                        line: start_line,
                        col: start_col,
                        message: "unterminated block comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            let raw: String = chars[start..i].iter().collect();
            out.push(Spanned {
                token: Token::Comment(raw),
                line: start_line,
                col: start_col,
                end_line: line,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                bump!();
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = (i, line, col);
                bump!();
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    bump!();
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                } else {
                    (i, line, col) = save;
                }
            }
            let raw: String = chars[start..i].iter().collect();
            let value: f64 = raw.parse().map_err(|_| ParseError::Lex {
                line: start_line,
                col: start_col,
                message: format!("malformed number `{raw}`"),
            })?;
            out.push(single(Token::Number(value)));
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let token = match word.as_str() {
                "module" => Token::Module,
                "for" => Token::For,
                "true" => Token::True,
                "false" => Token::False,
                _ => Token::Ident(word),
            };
            out.push(single(token));
            continue;
        }
        let token = match c {
            '(' => Token::LParen,
            ')' => Token::RParen,
            '{' => Token::LBrace,
            '}' => Token::RBrace,
            '[' => Token::LBracket,
            ']' => Token::RBracket,
            ',' => Token::Comma,
            ';' => Token::Semi,
            '=' => Token::Assign,
            ':' => Token::Colon,
            '+' => Token::Plus,
            '-' => Token::Minus,
            '*' => Token::Star,
            '/' => Token::Slash,
            other => {
                return Err(ParseError::Lex {
                    line,
                    col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        bump!();
        out.push(single(token));
    }
    out.push(Spanned {
        token: Token::Eof,
        line,
        col,
        end_line: line,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Token> {
        lex(text).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn numbers_and_exponents() {
        assert_eq!(
            kinds("1 2.5 .5 1e3 2E-2"),
            vec![
                Token::Number(1.0),
                Token::Number(2.5),
                Token::Number(0.5),
                Token::Number(1000.0),
                Token::Number(0.02),
                Token::Eof
            ]
        );
    }

    #[test]
    fn comments_carry_lines() {
        let toks = lex("// a\n/* b\n c */ cube").unwrap();
        assert_eq!(toks[0].token, Token::Comment("// a".into()));
        assert_eq!((toks[1].line, toks[1].end_line), (2, 3));
        assert_eq!(toks[2].token, Token::Ident("cube".into()));
        assert_eq!((toks[2].line, toks[2].col), (3, 7));
    }

    #[test]
    fn rejects_stray_characters() {
        let err = lex("cube(1);\n  @").unwrap_err();
        assert_eq!(
            err,
            ParseError::Lex {
                line: 2,
                col: 3,
                message: "unexpected character `@`".into()
            }
        );
        assert!(matches!(lex("/* open"), Err(ParseError::Lex { line: 1, .. })));
    }

    #[test]
    fn special_variables_are_identifiers() {
        assert_eq!(kinds("$fn")[0], Token::Ident("$fn".into()));
    }
}
