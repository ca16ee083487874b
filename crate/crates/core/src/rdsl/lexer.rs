use std::fmt;

use super::{Span, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    KwFlow,
    KwModifier,
    KwStream,
    KwGuarded,
    KwFirst,
    KwIn,
    KwOut,
    KwType,
    KwTrue,
    KwEmpty,
    Ident(String),
    Int(i64),
    Str(String),
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Comma,
    /// `=`
    Eq,
    /// `---`
    Separator,
    Ne,
    EqEq,
    Le,
    Lt,
    Ge,
    Gt,
    Plus,
    Minus,
    Star,
    Slash,
    At,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::KwFlow => "`flow`",
            TokenKind::KwModifier => "`modifier`",
            TokenKind::KwStream => "`stream`",
            TokenKind::KwGuarded => "`guarded`",
            TokenKind::KwFirst => "`first`",
            TokenKind::KwIn => "`in`",
            TokenKind::KwOut => "`out`",
            TokenKind::KwType => "`type`",
            TokenKind::KwTrue => "`TRUE`",
            TokenKind::KwEmpty => "`EMPTY`",
            TokenKind::Ident(name) => return write!(f, "identifier `{name}`"),
            TokenKind::Int(v) => return write!(f, "integer {v}"),
            TokenKind::Str(_) => "string literal",
            TokenKind::LBracket => "`[`",
            TokenKind::RBracket => "`]`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::Colon => "`:`",
            TokenKind::Comma => "`,`",
            TokenKind::Eq => "`=`",
            TokenKind::Separator => "`---`",
            TokenKind::Ne => "`!=`",
            TokenKind::EqEq => "`==`",
            TokenKind::Le => "`<=`",
            TokenKind::Lt => "`<`",
            TokenKind::Ge => "`>=`",
            TokenKind::Gt => "`>`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::Slash => "`/`",
            TokenKind::At => "`@`",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// Text of a `%` comment that follows this token on the same line.
    pub trailing_comment: Option<String>,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        // the flow keyword is accepted in any case (`Flow` appears in the wild)
        w if w.eq_ignore_ascii_case("flow") => TokenKind::KwFlow,
        "modifier" => TokenKind::KwModifier,
        "stream" => TokenKind::KwStream,
        "guarded" => TokenKind::KwGuarded,
        "first" => TokenKind::KwFirst,
        "in" => TokenKind::KwIn,
        "out" => TokenKind::KwOut,
        "type" => TokenKind::KwType,
        "TRUE" => TokenKind::KwTrue,
        "EMPTY" => TokenKind::KwEmpty,
        _ => return None,
    })
}

fn is_banner(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 5 && t.bytes().all(|b| b == b'*')
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut tokens: Vec<Token> = Vec::new();
    for (line_idx, line) in text.split('\n').enumerate() {
        let line_no = line_idx as u32 + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if is_banner(line) {
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        let line_start = tokens.len();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let span = Span::new(line_no, i as u32 + 1);
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '%' {
                let comment: String = chars[i + 1..].iter().collect();
                if tokens.len() > line_start {
                    if let Some(last) = tokens.last_mut() {
                        last.trailing_comment = Some(comment.trim().to_string());
                    }
                }
                break;
            }
            let push = |tokens: &mut Vec<Token>, kind| {
                tokens.push(Token {
                    kind,
                    span,
                    trailing_comment: None,
                })
            };
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let kind = keyword(&word).unwrap_or(TokenKind::Ident(word));
                push(&mut tokens, kind);
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let value = digits
                    .parse::<i64>()
                    .map_err(|_| SyntaxError::new(span, "integer literal out of range"))?;
                push(&mut tokens, TokenKind::Int(value));
                continue;
            }
            if c == '"' {
                let mut value = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(SyntaxError::new(span, "unterminated string literal"))
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = match chars.get(i + 1) {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('\\') => '\\',
                                Some('"') => '"',
                                _ => {
                                    return Err(SyntaxError::new(
                                        Span::new(line_no, i as u32 + 1),
                                        "invalid escape sequence",
                                    ))
                                }
                            };
                            value.push(esc);
                            i += 2;
                        }
                        Some(&ch) => {
                            value.push(ch);
                            i += 1;
                        }
                    }
                }
                push(&mut tokens, TokenKind::Str(value));
                continue;
            }
            let next = chars.get(i + 1).copied();
            let (kind, width) = match (c, next) {
                ('-', Some('-')) if chars.get(i + 2) == Some(&'-') => (TokenKind::Separator, 3),
                ('!', Some('=')) => (TokenKind::Ne, 2),
                ('=', Some('=')) => (TokenKind::EqEq, 2),
                ('<', Some('=')) => (TokenKind::Le, 2),
                ('>', Some('=')) => (TokenKind::Ge, 2),
                ('<', _) => (TokenKind::Lt, 1),
                ('>', _) => (TokenKind::Gt, 1),
                ('=', _) => (TokenKind::Eq, 1),
                ('[', _) => (TokenKind::LBracket, 1),
                (']', _) => (TokenKind::RBracket, 1),
                ('{', _) => (TokenKind::LBrace, 1),
                ('}', _) => (TokenKind::RBrace, 1),
                ('(', _) => (TokenKind::LParen, 1),
                (')', _) => (TokenKind::RParen, 1),
                (':', _) => (TokenKind::Colon, 1),
                (',', _) => (TokenKind::Comma, 1),
                ('+', _) => (TokenKind::Plus, 1),
                ('-', _) => (TokenKind::Minus, 1),
                ('*', _) => (TokenKind::Star, 1),
                ('/', _) => (TokenKind::Slash, 1),
                ('@', _) => (TokenKind::At, 1),
                _ => {
                    return Err(SyntaxError::new(
                        span,
                        format!("illegal character `{c}`"),
                    ))
                }
            };
            push(&mut tokens, kind);
            i += width;
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn stream_declaration_line() {
        assert_eq!(
            kinds("srsIOSymbols : stream[MAX_NUM_RX_ANT]{type = in}"),
            vec![
                Ident("srsIOSymbols".into()),
                Colon,
                KwStream,
                LBracket,
                Ident("MAX_NUM_RX_ANT".into()),
                RBracket,
                LBrace,
                KwType,
                Eq,
                KwIn,
                RBrace
            ]
        );
    }

    #[test]
    fn comment_only_line_is_empty() {
        assert!(kinds("% comment").is_empty());
    }

    #[test]
    fn banner_lines_are_comments() {
        assert!(kinds("*****\n  *******  \n").is_empty());
        // but a lone star is an operator
        assert_eq!(kinds("*"), vec![Star]);
    }

    #[test]
    fn illegal_character_position() {
        let err = tokenize("flow f§").unwrap_err();
        assert_eq!(err.span, Span::new(1, 7));
        assert!(err.message.contains('§'));
    }

    #[test]
    fn trailing_comment_attaches_to_last_token() {
        let toks = tokenize("x : stream % note here\n% standalone\ny").unwrap();
        assert_eq!(toks[2].trailing_comment.as_deref(), Some("note here"));
        assert!(toks[3].trailing_comment.is_none());
    }

    #[test]
    fn operators_and_strings() {
        assert_eq!(
            kinds(r#"!= == <= < >= > --- @-1 "a\n""#),
            vec![Ne, EqEq, Le, Lt, Ge, Gt, Separator, At, Minus, Int(1), Str("a\n".into())]
        );
    }

    #[test]
    fn flow_keyword_any_case() {
        assert_eq!(kinds("Flow flow FLOW"), vec![KwFlow, KwFlow, KwFlow]);
        assert_eq!(kinds("Modifier"), vec![Ident("Modifier".into())]);
    }
}
