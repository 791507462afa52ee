//! Java tokenizer. Comments and whitespace are skipped; every token carries
//! its byte span in the original source.

use super::ast::Span;
use super::JavaError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Keyword,
    IntLit,
    FloatLit,
    CharLit,
    StringLit,
    /// Operators and separators, longest-match except `>`-combinations,
    /// which are emitted as individual `>` tokens so generics stay parseable.
    Punct,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_punct(&self, s: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == s
    }
    pub fn is_keyword(&self, s: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == s
    }
    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "float",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "int",
    "interface",
    "long",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "short",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "void",
    "volatile",
    "while",
];

// Multi-character operators, longest first. `>>`, `>>=`, `>>>`, `>>>=` are
// deliberately absent: adjacent `>` tokens are recombined by the expression
// parser where shifts are legal, keeping `List<List<String>>` lexable.
const MULTI_PUNCT: &[&str] = &[
    "<<=", "...", "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "<<",
];

pub fn lex(source: &str) -> Result<Vec<Token>, JavaError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // comments
        if c == b'/' && i + 1 < bytes.len() {
            if bytes[i + 1] == b'/' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            if bytes[i + 1] == b'*' {
                let start = i;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(JavaError::Lex {
                            offset: start,
                            message: "unterminated block comment".into(),
                        });
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
                continue;
            }
        }
        // identifiers and keywords
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' || c >= 0x80 {
            let start = i;
            while i < bytes.len() {
                let b = bytes[i];
                if b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80 {
                    i += 1;
                } else {
                    break;
                }
            }
            let text = &source[start..i];
            let kind = if KEYWORDS.contains(&text) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
            tokens.push(Token {
                kind,
                text: text.to_string(),
                span: Span { start, end: i },
            });
            continue;
        }
        // numeric literals
        if c.is_ascii_digit() || (c == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            let mut is_float = c == b'.';
            if c == b'0' && i + 1 < bytes.len() && (bytes[i + 1] | 0x20) == b'x' {
                i += 2;
                while i < bytes.len() && (bytes[i].is_ascii_hexdigit() || bytes[i] == b'_') {
                    i += 1;
                }
            } else if c == b'0' && i + 1 < bytes.len() && (bytes[i + 1] | 0x20) == b'b' {
                i += 2;
                while i < bytes.len() && (bytes[i] == b'0' || bytes[i] == b'1' || bytes[i] == b'_')
                {
                    i += 1;
                }
            } else {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    // a trailing `.` only joins the number when digits follow
                    if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                        is_float = true;
                        i += 1;
                        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                            i += 1;
                        }
                    }
                }
                if i < bytes.len() && (bytes[i] | 0x20) == b'e' {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        is_float = true;
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
            }
            if i < bytes.len() {
                let suf = bytes[i] | 0x20;
                if suf == b'f' || suf == b'd' {
                    is_float = true;
                    i += 1;
                } else if suf == b'l' {
                    i += 1;
                }
            }
            tokens.push(Token {
                kind: if is_float {
                    TokenKind::FloatLit
                } else {
                    TokenKind::IntLit
                },
                text: source[start..i].to_string(),
                span: Span { start, end: i },
            });
            continue;
        }
        // char and string literals
        if c == b'\'' || c == b'"' {
            let quote = c;
            let start = i;
            i += 1;
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(JavaError::Lex {
                        offset: start,
                        message: if quote == b'"' {
                            "unterminated string literal".into()
                        } else {
                            "unterminated char literal".into()
                        },
                    });
                }
                if bytes[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if bytes[i] == quote {
                    i += 1;
                    break;
                }
                i += 1;
            }
            tokens.push(Token {
                kind: if quote == b'"' {
                    TokenKind::StringLit
                } else {
                    TokenKind::CharLit
                },
                text: source[start..i].to_string(),
                span: Span { start, end: i },
            });
            continue;
        }
        // punctuation
        let rest = &source[i..];
        let mut matched = None;
        for p in MULTI_PUNCT {
            if rest.starts_with(p) {
                matched = Some(*p);
                break;
            }
        }
        if let Some(p) = matched {
            tokens.push(Token {
                kind: TokenKind::Punct,
                text: p.to_string(),
                span: Span {
                    start: i,
                    end: i + p.len(),
                },
            });
            i += p.len();
            continue;
        }
        if b"+-*/%=<>!&|^~?:;,.(){}[]@".contains(&c) {
            tokens.push(Token {
                kind: TokenKind::Punct,
                text: (c as char).to_string(),
                span: Span {
                    start: i,
                    end: i + 1,
                },
            });
            i += 1;
            continue;
        }
        return Err(JavaError::Lex {
            offset: i,
            message: format!("illegal character {:?}", c as char),
        });
    }
    Ok(tokens)
}
