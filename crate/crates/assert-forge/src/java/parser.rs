//! Structural parsing: compilation units, type declarations, methods,
//! statement trees, and invocation scanning.
//!
//! Expressions are not fully parsed here; statements are delimited by
//! tracking nesting depth, which is all mining needs. A file with unbalanced
//! delimiters is rejected outright rather than producing a partial result.

use super::ast::*;
use super::lexer::{lex, Token, TokenKind};
use super::JavaError;

const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "static",
    "final",
    "abstract",
    "synchronized",
    "native",
    "strictfp",
    "transient",
    "volatile",
    "default",
];

/// Parse a full compilation unit into its classes and methods.
pub fn parse_compilation_unit(source: &str) -> Result<CompilationUnit, JavaError> {
    let tokens = lex(source)?;
    check_balance(&tokens)?;
    let mut p = Parser {
        src: source,
        toks: &tokens,
        pos: 0,
    };
    let mut classes = Vec::new();
    // package and import headers
    while !p.eof() {
        if p.peek_keyword("package") || p.peek_keyword("import") {
            p.consume_until_semi()?;
        } else {
            break;
        }
    }
    while !p.eof() {
        if p.peek_punct(";") {
            p.pos += 1;
            continue;
        }
        p.parse_type_decl(&mut classes)?;
    }
    Ok(CompilationUnit { classes })
}

/// Parse a standalone method declaration (optionally preceded by
/// annotations), as produced by mining or found in augmentation inputs.
pub fn parse_method_source(source: &str) -> Result<JavaMethod, JavaError> {
    let tokens = lex(source)?;
    check_balance(&tokens)?;
    let mut p = Parser {
        src: source,
        toks: &tokens,
        pos: 0,
    };
    let annotations = p.parse_annotations()?;
    let method = p.parse_method(annotations)?;
    if !p.eof() {
        return Err(p.err("trailing tokens after method declaration"));
    }
    Ok(method)
}

fn check_balance(tokens: &[Token]) -> Result<(), JavaError> {
    let mut stack: Vec<(&str, usize)> = Vec::new();
    for t in tokens {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => stack.push((t.text.as_str(), t.span.start)),
            ")" | "]" | "}" => {
                let want = match t.text.as_str() {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    _ => {
                        return Err(JavaError::Unbalanced(format!(
                            "unexpected `{}` at byte {}",
                            t.text, t.span.start
                        )))
                    }
                }
            }
            _ => {}
        }
    }
    if let Some((open, at)) = stack.pop() {
        return Err(JavaError::Unbalanced(format!(
            "unclosed `{open}` at byte {at}"
        )));
    }
    Ok(())
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn cur(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_punct(&self, s: &str) -> bool {
        self.cur().map(|t| t.is_punct(s)).unwrap_or(false)
    }

    fn peek_keyword(&self, s: &str) -> bool {
        self.cur().map(|t| t.is_keyword(s)).unwrap_or(false)
    }

    fn err(&self, message: &str) -> JavaError {
        let offset = self.cur().map(|t| t.span.start).unwrap_or(self.src.len());
        JavaError::Parse {
            offset,
            message: message.to_string(),
        }
    }

    /// Advance past a balanced `(`/`[`/`{` group; `pos` must sit on the opener.
    fn skip_group(&mut self) -> Result<usize, JavaError> {
        let mut depth = 0usize;
        while let Some(t) = self.cur() {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        depth -= 1;
                        if depth == 0 {
                            let end = self.pos;
                            self.pos += 1;
                            return Ok(end);
                        }
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
        Err(self.err("unexpected end of input inside group"))
    }

    /// Consume tokens through the next `;` at depth zero. Returns the index
    /// of the semicolon token.
    fn consume_until_semi(&mut self) -> Result<usize, JavaError> {
        let mut depth = 0usize;
        while let Some(t) = self.cur() {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        if depth == 0 {
                            return Err(self.err("unexpected closing delimiter"));
                        }
                        depth -= 1;
                    }
                    ";" if depth == 0 => {
                        let idx = self.pos;
                        self.pos += 1;
                        return Ok(idx);
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
        Err(self.err("unexpected end of input, expected `;`"))
    }

    fn parse_annotations(&mut self) -> Result<Vec<String>, JavaError> {
        let mut names = Vec::new();
        while self.peek_punct("@") {
            self.pos += 1;
            let mut name;
            loop {
                let t = self.cur().ok_or_else(|| self.err("annotation name"))?;
                if t.is_ident() || t.is_keyword("interface") {
                    name = t.text.clone();
                    self.pos += 1;
                } else {
                    return Err(self.err("expected annotation name"));
                }
                if self.peek_punct(".") {
                    self.pos += 1;
                    continue;
                }
                break;
            }
            if self.peek_punct("(") {
                self.skip_group()?;
            }
            names.push(name);
        }
        Ok(names)
    }

    fn skip_modifiers(&mut self) {
        while let Some(t) = self.cur() {
            if t.kind == TokenKind::Keyword && MODIFIERS.contains(&t.text.as_str()) {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn parse_type_decl(&mut self, classes: &mut Vec<ParsedClass>) -> Result<(), JavaError> {
        let decl_start = self.cur().map(|t| t.span.start).unwrap_or(0);
        self.parse_annotations()?;
        self.skip_modifiers();
        // annotation type declaration: `@interface Name { ... }`
        if self.peek_punct("@") {
            self.pos += 1;
            if !self.peek_keyword("interface") {
                return Err(self.err("expected `interface` after `@`"));
            }
        }
        let kind = self
            .cur()
            .filter(|t| t.is_keyword("class") || t.is_keyword("interface") || t.is_keyword("enum"))
            .map(|t| t.text.clone())
            .ok_or_else(|| self.err("expected type declaration"))?;
        self.pos += 1;
        let name = self
            .cur()
            .filter(|t| t.is_ident())
            .map(|t| t.text.clone())
            .ok_or_else(|| self.err("expected type name"))?;
        self.pos += 1;
        // header (generics, extends, implements) runs to the opening brace
        while let Some(t) = self.cur() {
            if t.is_punct("{") {
                break;
            }
            self.pos += 1;
        }
        if !self.peek_punct("{") {
            return Err(self.err("expected type body"));
        }
        self.pos += 1; // `{`
        if kind == "enum" {
            self.skip_enum_constants()?;
        }
        let mut methods = Vec::new();
        loop {
            let t = self
                .cur()
                .ok_or_else(|| self.err("unterminated type body"))?;
            if t.is_punct("}") {
                let end = t.span.end;
                self.pos += 1;
                classes.push(ParsedClass {
                    name,
                    methods,
                    span: Span {
                        start: decl_start,
                        end,
                    },
                });
                return Ok(());
            }
            self.parse_member(classes, &mut methods)?;
        }
    }

    /// Consume enum constants up to the member separator `;` or stop at the
    /// closing brace when the enum has no members.
    fn skip_enum_constants(&mut self) -> Result<(), JavaError> {
        let mut depth = 0usize;
        while let Some(t) = self.cur() {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" => depth = depth.saturating_sub(1),
                    "}" => {
                        if depth == 0 {
                            return Ok(()); // no member section; leave `}` for caller
                        }
                        depth -= 1;
                    }
                    ";" if depth == 0 => {
                        self.pos += 1;
                        return Ok(());
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
        Err(self.err("unterminated enum body"))
    }

    fn parse_member(
        &mut self,
        classes: &mut Vec<ParsedClass>,
        methods: &mut Vec<JavaMethod>,
    ) -> Result<(), JavaError> {
        if self.peek_punct(";") {
            self.pos += 1;
            return Ok(());
        }
        let annotations = self.parse_annotations()?;
        let member_start = self.pos;
        self.skip_modifiers();
        // initializer block
        if self.peek_punct("{") {
            self.skip_group()?;
            return Ok(());
        }
        // nested type
        if self.peek_keyword("class") || self.peek_keyword("interface") || self.peek_keyword("enum")
        {
            return self.parse_nested_type(classes);
        }
        if self.peek_punct("@") {
            // `@interface` nested annotation type
            return self.parse_nested_type(classes);
        }
        // generic method type parameters
        if self.peek_punct("<") {
            self.skip_angles()?;
        }
        // decide field vs method by the first structural token at depth zero
        let mut look = self.pos;
        let mut depth = 0usize;
        let member_kind = loop {
            let t = self
                .toks
                .get(look)
                .ok_or_else(|| self.err("unterminated member declaration"))?;
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" if depth == 0 => break '(',
                    "=" | ";" if depth == 0 => break ';',
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth = depth.saturating_sub(1),
                    _ => {}
                }
            }
            look += 1;
        };
        if member_kind == ';' {
            self.consume_until_semi()?;
            return Ok(());
        }
        self.pos = member_start;
        let method = self.parse_method(annotations)?;
        methods.push(method);
        Ok(())
    }

    fn parse_nested_type(&mut self, classes: &mut Vec<ParsedClass>) -> Result<(), JavaError> {
        self.parse_type_decl(classes)
    }

    fn skip_angles(&mut self) -> Result<(), JavaError> {
        let mut depth = 0usize;
        while let Some(t) = self.cur() {
            if t.is_punct("<") {
                depth += 1;
            } else if t.is_punct(">") {
                depth -= 1;
                if depth == 0 {
                    self.pos += 1;
                    return Ok(());
                }
            }
            self.pos += 1;
        }
        Err(self.err("unterminated type parameter list"))
    }

    /// Parse a method (or constructor) starting at its first modifier or
    /// return-type token. Annotations must already be consumed.
    fn parse_method(&mut self, annotations: Vec<String>) -> Result<JavaMethod, JavaError> {
        let decl_start_tok = self.pos;
        self.skip_modifiers();
        if self.peek_punct("<") {
            self.skip_angles()?;
        }
        // the method name is the identifier directly before the parameter list
        let mut look = self.pos;
        let mut depth = 0usize;
        let name_idx = loop {
            let t = self
                .toks
                .get(look)
                .ok_or_else(|| self.err("expected method declaration"))?;
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" if depth == 0 => {
                        break look
                            .checked_sub(1)
                            .ok_or_else(|| self.err("parameter list without method name"))?
                    }
                    "(" | "[" | "{" | "<" => depth += 1,
                    ")" | "]" | "}" | ">" => depth = depth.saturating_sub(1),
                    _ => {}
                }
            }
            look += 1;
        };
        let name_tok = &self.toks[name_idx];
        if !name_tok.is_ident() {
            return Err(self.err("expected method name before parameter list"));
        }
        let name = name_tok.text.clone();
        let is_constructor = name_idx == decl_start_tok;
        self.pos = name_idx + 1; // at `(`
        self.skip_group()?; // parameters
                            // throws clause and anything else up to the body or `;`
        loop {
            let t = self
                .cur()
                .ok_or_else(|| self.err("expected method body or `;`"))?;
            if t.is_punct("{") || t.is_punct(";") {
                break;
            }
            self.pos += 1;
        }
        let (body, end) = if self.peek_punct(";") {
            let end = self.toks[self.pos].span.end;
            self.pos += 1;
            (None, end)
        } else {
            let body_start_tok = self.pos;
            let block = self.parse_block()?;
            let body_end_tok = self.pos - 1;
            let end = block.span.end;
            let span_base = self.toks[decl_start_tok].span.start;
            let mut rebased = block;
            rebase_block(&mut rebased, span_base);
            let invocations = scan_invocations(
                self.src,
                &self.toks[body_start_tok..=body_end_tok],
                span_base,
            );
            return Ok(JavaMethod {
                name,
                annotations,
                body_text: self.src[span_base..end].to_string(),
                invocations,
                span: Span {
                    start: span_base,
                    end,
                },
                is_constructor,
                body: Some(rebased),
            });
        };
        let span_base = self.toks[decl_start_tok].span.start;
        Ok(JavaMethod {
            name,
            annotations,
            body_text: self.src[span_base..end].to_string(),
            invocations: Vec::new(),
            span: Span {
                start: span_base,
                end,
            },
            is_constructor,
            body,
        })
    }

    fn parse_block(&mut self) -> Result<BlockStmt, JavaError> {
        let open = self
            .cur()
            .filter(|t| t.is_punct("{"))
            .ok_or_else(|| self.err("expected `{`"))?
            .span
            .start;
        self.pos += 1;
        let mut stmts = Vec::new();
        loop {
            let t = self.cur().ok_or_else(|| self.err("unterminated block"))?;
            if t.is_punct("}") {
                let end = t.span.end;
                self.pos += 1;
                return Ok(BlockStmt {
                    span: Span { start: open, end },
                    stmts,
                });
            }
            stmts.push(self.parse_statement()?);
        }
    }

    /// Parse a statement body that may or may not be braced, normalizing the
    /// result to a block so nested statements stay reachable.
    fn parse_body_as_block(&mut self) -> Result<BlockStmt, JavaError> {
        if self.peek_punct("{") {
            self.parse_block()
        } else {
            let stmt = self.parse_statement()?;
            Ok(BlockStmt {
                span: stmt.span,
                stmts: vec![stmt],
            })
        }
    }

    fn parse_statement(&mut self) -> Result<Stmt, JavaError> {
        let t = self
            .cur()
            .ok_or_else(|| self.err("expected statement"))?
            .clone();
        let start = t.span.start;
        if t.is_punct("{") {
            let block = self.parse_block()?;
            return Ok(Stmt {
                kind: StmtKind::Block,
                span: block.span,
                blocks: vec![block],
            });
        }
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(Stmt {
                kind: StmtKind::Empty,
                span: Span {
                    start,
                    end: t.span.end,
                },
                blocks: Vec::new(),
            });
        }
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "if" => {
                    self.pos += 1;
                    self.expect_group("(")?;
                    let mut blocks = vec![self.parse_body_as_block()?];
                    if self.peek_keyword("else") {
                        self.pos += 1;
                        blocks.push(self.parse_body_as_block()?);
                    }
                    let end = blocks.last().map(|b| b.span.end).unwrap_or(start);
                    return Ok(Stmt {
                        kind: StmtKind::If,
                        span: Span { start, end },
                        blocks,
                    });
                }
                "while" => {
                    self.pos += 1;
                    self.expect_group("(")?;
                    let body = self.parse_body_as_block()?;
                    let end = body.span.end;
                    return Ok(Stmt {
                        kind: StmtKind::While,
                        span: Span { start, end },
                        blocks: vec![body],
                    });
                }
                "do" => {
                    self.pos += 1;
                    let body = self.parse_body_as_block()?;
                    if !self.peek_keyword("while") {
                        return Err(self.err("expected `while` after do-body"));
                    }
                    self.pos += 1;
                    self.expect_group("(")?;
                    let semi = self.expect_semi()?;
                    return Ok(Stmt {
                        kind: StmtKind::DoWhile,
                        span: Span { start, end: semi },
                        blocks: vec![body],
                    });
                }
                "for" => {
                    self.pos += 1;
                    self.expect_group("(")?;
                    let body = self.parse_body_as_block()?;
                    let end = body.span.end;
                    return Ok(Stmt {
                        kind: StmtKind::For,
                        span: Span { start, end },
                        blocks: vec![body],
                    });
                }
                "try" => {
                    self.pos += 1;
                    if self.peek_punct("(") {
                        self.skip_group()?; // try-with-resources
                    }
                    let mut blocks = vec![self.parse_block()?];
                    while self.peek_keyword("catch") {
                        self.pos += 1;
                        self.expect_group("(")?;
                        blocks.push(self.parse_block()?);
                    }
                    if self.peek_keyword("finally") {
                        self.pos += 1;
                        blocks.push(self.parse_block()?);
                    }
                    let end = blocks.last().map(|b| b.span.end).unwrap_or(start);
                    return Ok(Stmt {
                        kind: StmtKind::Try,
                        span: Span { start, end },
                        blocks,
                    });
                }
                "switch" => {
                    self.pos += 1;
                    self.expect_group("(")?;
                    let body = self.parse_switch_body()?;
                    let end = body.span.end;
                    return Ok(Stmt {
                        kind: StmtKind::Switch,
                        span: Span { start, end },
                        blocks: vec![body],
                    });
                }
                "synchronized" => {
                    self.pos += 1;
                    self.expect_group("(")?;
                    let body = self.parse_block()?;
                    let end = body.span.end;
                    return Ok(Stmt {
                        kind: StmtKind::Synchronized,
                        span: Span { start, end },
                        blocks: vec![body],
                    });
                }
                "return" | "throw" => {
                    let kind = if t.text == "return" {
                        StmtKind::Return
                    } else {
                        StmtKind::Throw
                    };
                    self.pos += 1;
                    let semi = self.consume_until_semi()?;
                    return Ok(Stmt {
                        kind,
                        span: Span {
                            start,
                            end: self.toks[semi].span.end,
                        },
                        blocks: Vec::new(),
                    });
                }
                "break" | "continue" => {
                    let kind = if t.text == "break" {
                        StmtKind::Break
                    } else {
                        StmtKind::Continue
                    };
                    self.pos += 1;
                    let semi = self.consume_until_semi()?;
                    return Ok(Stmt {
                        kind,
                        span: Span {
                            start,
                            end: self.toks[semi].span.end,
                        },
                        blocks: Vec::new(),
                    });
                }
                "assert" => {
                    self.pos += 1;
                    let semi = self.consume_until_semi()?;
                    return Ok(Stmt {
                        kind: StmtKind::Assert,
                        span: Span {
                            start,
                            end: self.toks[semi].span.end,
                        },
                        blocks: Vec::new(),
                    });
                }
                "class" | "interface" | "enum" | "final" | "abstract" | "static"
                    // local type declarations and modifier-led locals
                    if (t.text == "class" || t.text == "interface" || t.text == "enum") => {
                        let mut sink = Vec::new();
                        self.parse_type_decl(&mut sink)?;
                        let end = sink.last().map(|c| c.span.end).unwrap_or(start);
                        return Ok(Stmt {
                            kind: StmtKind::LocalType,
                            span: Span { start, end },
                            blocks: Vec::new(),
                        });
                    }
                    // `final int x = 1;` falls through to the generic case
                _ => {}
            }
        }
        // labeled statement: `name: stmt`
        if t.is_ident()
            && self
                .toks
                .get(self.pos + 1)
                .map(|n| n.is_punct(":"))
                .unwrap_or(false)
        {
            self.pos += 2;
            let inner = self.parse_body_as_block()?;
            let end = inner.span.end;
            return Ok(Stmt {
                kind: StmtKind::Labeled,
                span: Span { start, end },
                blocks: vec![inner],
            });
        }
        // expression statement or local variable declaration
        let semi = self.consume_until_semi()?;
        Ok(Stmt {
            kind: StmtKind::Expr,
            span: Span {
                start,
                end: self.toks[semi].span.end,
            },
            blocks: Vec::new(),
        })
    }

    fn parse_switch_body(&mut self) -> Result<BlockStmt, JavaError> {
        let open = self
            .cur()
            .filter(|t| t.is_punct("{"))
            .ok_or_else(|| self.err("expected switch body"))?
            .span
            .start;
        self.pos += 1;
        let mut stmts = Vec::new();
        loop {
            let t = self.cur().ok_or_else(|| self.err("unterminated switch"))?;
            if t.is_punct("}") {
                let end = t.span.end;
                self.pos += 1;
                return Ok(BlockStmt {
                    span: Span { start: open, end },
                    stmts,
                });
            }
            if t.is_keyword("case") || t.is_keyword("default") {
                // consume the label through `:` or `->`
                let mut depth = 0usize;
                while let Some(n) = self.cur() {
                    if n.kind == TokenKind::Punct {
                        match n.text.as_str() {
                            "(" | "[" => depth += 1,
                            ")" | "]" => depth = depth.saturating_sub(1),
                            ":" | "->" if depth == 0 => {
                                self.pos += 1;
                                break;
                            }
                            _ => {}
                        }
                    }
                    self.pos += 1;
                }
                continue;
            }
            stmts.push(self.parse_statement()?);
        }
    }

    fn expect_group(&mut self, open: &str) -> Result<(), JavaError> {
        if !self.peek_punct(open) {
            return Err(self.err(&format!("expected `{open}`")));
        }
        self.skip_group()?;
        Ok(())
    }

    fn expect_semi(&mut self) -> Result<usize, JavaError> {
        let t = self
            .cur()
            .filter(|t| t.is_punct(";"))
            .ok_or_else(|| self.err("expected `;`"))?;
        let end = t.span.end;
        self.pos += 1;
        Ok(end)
    }
}

fn rebase_block(block: &mut BlockStmt, base: usize) {
    block.span.start -= base;
    block.span.end -= base;
    for stmt in &mut block.stmts {
        stmt.span.start -= base;
        stmt.span.end -= base;
        for b in &mut stmt.blocks {
            rebase_block(b, base);
        }
    }
}

/// Scan a token slice for method invocations in source order. Constructor
/// calls (`new Foo(...)`, including qualified `new a.b.Foo(...)`) are not
/// invocations. Spans are rebased by `base`.
pub fn scan_invocations(source: &str, tokens: &[Token], base: usize) -> Vec<Invocation> {
    let mut out = Vec::new();
    for i in 0..tokens.len() {
        if !tokens[i].is_ident() {
            continue;
        }
        let Some(next) = tokens.get(i + 1) else {
            continue;
        };
        if !next.is_punct("(") {
            continue;
        }
        if i > 0 && tokens[i - 1].is_keyword("new") {
            continue;
        }
        let (arg_count, close_idx) = match count_args(tokens, i + 1) {
            Some(v) => v,
            None => continue,
        };
        let mut receiver = String::new();
        if i > 0 && tokens[i - 1].is_punct(".") {
            let chain_start = walk_chain_back(tokens, i - 1);
            // a chain rooted under `new` is a qualified constructor call
            if chain_start > 0 && tokens[chain_start - 1].is_keyword("new") {
                continue;
            }
            receiver = source[tokens[chain_start].span.start..tokens[i - 1].span.start]
                .trim()
                .to_string();
        }
        out.push(Invocation {
            receiver,
            name: tokens[i].text.clone(),
            arg_count,
            span: Span {
                start: tokens[i].span.start - base,
                end: tokens[close_idx].span.end - base,
            },
        });
    }
    out
}

/// Count top-level arguments of the paren group opening at `open_idx`.
fn count_args(tokens: &[Token], open_idx: usize) -> Option<(usize, usize)> {
    let mut depth = 0usize;
    let mut commas = 0usize;
    let mut any = false;
    for (j, t) in tokens.iter().enumerate().skip(open_idx) {
        if t.kind == TokenKind::Punct {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth = depth.checked_sub(1)?;
                    if depth == 0 {
                        let n = if any { commas + 1 } else { 0 };
                        return Some((n, j));
                    }
                }
                "," if depth == 1 => {
                    commas += 1;
                }
                _ => {
                    if depth == 1 {
                        any = true;
                    }
                }
            }
            if depth == 1 && (t.text == "(" || t.text == "[" || t.text == "{") {
                any = true;
            }
        } else if depth == 1 {
            any = true;
        }
    }
    None
}

/// Walk a primary-expression chain backwards from the `.` at `dot_idx`,
/// returning the index of the chain's first token.
fn walk_chain_back(tokens: &[Token], dot_idx: usize) -> usize {
    let mut p = dot_idx as isize - 1;
    while p >= 0 {
        let t = &tokens[p as usize];
        if t.is_punct(")") || t.is_punct("]") {
            // jump to the matching opener
            let close = t.text.chars().next().unwrap();
            let open = if close == ')' { "(" } else { "[" };
            let closes = &t.text;
            let mut depth = 0usize;
            let mut q = p;
            while q >= 0 {
                let u = &tokens[q as usize];
                if u.is_punct(closes) {
                    depth += 1;
                } else if u.is_punct(open) {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                q -= 1;
            }
            if q < 0 {
                return (p + 1) as usize;
            }
            p = q - 1;
            continue;
        }
        if t.is_ident()
            || t.is_keyword("this")
            || t.is_keyword("super")
            || t.is_punct(".")
            || t.kind == TokenKind::StringLit
        {
            p -= 1;
            continue;
        }
        break;
    }
    (p + 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    const BITSET_CLASS: &str = r#"
public class ImmutableBitSetTest {
    @Test
    public void testLength() {
        BitSet bset = new BitSet();
        ImmutableBitSet ibset = new ImmutableBitSet(bset);
        Assert.assertEquals(bset.length(), ibset.length());
    }

    public int length() {
        return this.bitSet.length();
    }
}
"#;

    #[test]
    fn parses_two_methods() {
        let unit = parse_compilation_unit(BITSET_CLASS).unwrap();
        assert_eq!(unit.classes.len(), 1);
        let methods = &unit.classes[0].methods;
        assert_eq!(methods.len(), 2);
        assert_eq!(methods[0].name, "testLength");
        assert_eq!(methods[0].annotations, vec!["Test"]);
        assert_eq!(methods[1].name, "length");
        assert!(methods[1].annotations.is_empty());
    }

    #[test]
    fn empty_class_body_gives_no_methods() {
        let unit = parse_compilation_unit("class Empty { }").unwrap();
        assert_eq!(unit.classes.len(), 1);
        assert!(unit.classes[0].methods.is_empty());
    }

    #[test]
    fn unbalanced_braces_error() {
        assert!(parse_compilation_unit("class Broken { void m() { }").is_err());
    }

    #[test]
    fn invocation_order_and_receivers() {
        let unit = parse_compilation_unit(BITSET_CLASS).unwrap();
        let test = &unit.classes[0].methods[0];
        let names: Vec<(&str, &str)> = test
            .invocations
            .iter()
            .map(|i| (i.receiver.as_str(), i.name.as_str()))
            .collect();
        assert_eq!(
            names,
            vec![
                ("Assert", "assertEquals"),
                ("bset", "length"),
                ("ibset", "length"),
            ]
        );
        assert_eq!(test.invocations[0].arg_count, 2);
        // constructor calls are not invocations
        assert!(!test.invocations.iter().any(|i| i.name == "BitSet"));
    }

    #[test]
    fn body_spans_rebase_to_body_text() {
        let unit = parse_compilation_unit(BITSET_CLASS).unwrap();
        let test = &unit.classes[0].methods[0];
        assert!(test.body_text.starts_with("public void testLength()"));
        let body = test.body.as_ref().unwrap();
        assert_eq!(body.stmts.len(), 3);
        let assert_stmt = &body.stmts[2];
        let text = &test.body_text[assert_stmt.span.start..assert_stmt.span.end];
        assert_eq!(text, "Assert.assertEquals(bset.length(), ibset.length());");
    }

    #[test]
    fn statement_tree_reaches_loop_bodies() {
        let src = "class T { void m() { for (int i = 0; i < 3; i++) { check(i); } } }";
        let unit = parse_compilation_unit(src).unwrap();
        let m = &unit.classes[0].methods[0];
        let mut kinds = Vec::new();
        m.body.as_ref().unwrap().walk(&mut |s| kinds.push(s.kind));
        assert!(kinds.contains(&StmtKind::For));
        assert!(kinds.contains(&StmtKind::Expr));
    }

    #[test]
    fn method_source_reparses() {
        let unit = parse_compilation_unit(BITSET_CLASS).unwrap();
        let test = &unit.classes[0].methods[0];
        let again = parse_method_source(&test.body_text).unwrap();
        assert_eq!(again.name, test.name);
        assert_eq!(again.invocations, test.invocations);
    }

    #[test]
    fn chained_call_receiver_text() {
        let src = "class T { void m() { a.b().c(); } }";
        let unit = parse_compilation_unit(src).unwrap();
        let inv = &unit.classes[0].methods[0].invocations;
        assert_eq!(inv.len(), 2);
        assert_eq!(inv[1].name, "c");
        assert_eq!(inv[1].receiver, "a.b()");
    }
}
