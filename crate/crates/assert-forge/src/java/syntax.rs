//! Strict recursive-descent validation of Java statements and expressions.
//!
//! The structural parser in `parser.rs` delimits statements by nesting depth
//! and accepts anything balanced; this module actually parses expression
//! grammar, so it can reject token soup like `assertTrue(( status == 0`.

use super::lexer::{lex, Token, TokenKind};

/// True iff `statement` parses as a sequence of valid Java statements, i.e.
/// `class C { void m() { <statement> ; } }` would be syntactically valid.
pub fn statement_is_valid(statement: &str) -> bool {
    let wrapped = format!("{statement};");
    let Ok(tokens) = lex(&wrapped) else {
        return false;
    };
    let mut v = Validator {
        toks: &tokens,
        pos: 0,
    };
    while !v.eof() {
        if !v.statement() {
            return false;
        }
    }
    true
}

struct Validator<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Validator<'a> {
    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn cur(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn eat_punct(&mut self, s: &str) -> bool {
        if self.cur().map(|t| t.is_punct(s)).unwrap_or(false) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, s: &str) -> bool {
        if self.cur().map(|t| t.is_keyword(s)).unwrap_or(false) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn peek_punct(&self, s: &str) -> bool {
        self.cur().map(|t| t.is_punct(s)).unwrap_or(false)
    }

    fn eat_ident(&mut self) -> bool {
        if self.cur().map(|t| t.is_ident()).unwrap_or(false) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    // ---- statements ----

    fn statement(&mut self) -> bool {
        if self.eat_punct(";") {
            return true;
        }
        if self.peek_punct("{") {
            return self.block();
        }
        if self.eat_keyword("if") {
            if !(self.eat_punct("(") && self.expression() && self.eat_punct(")")) {
                return false;
            }
            if !self.statement() {
                return false;
            }
            if self.eat_keyword("else") {
                return self.statement();
            }
            return true;
        }
        if self.eat_keyword("while") {
            return self.eat_punct("(")
                && self.expression()
                && self.eat_punct(")")
                && self.statement();
        }
        if self.eat_keyword("do") {
            return self.statement()
                && self.eat_keyword("while")
                && self.eat_punct("(")
                && self.expression()
                && self.eat_punct(")")
                && self.eat_punct(";");
        }
        if self.eat_keyword("for") {
            return self.for_statement();
        }
        if self.eat_keyword("try") {
            return self.try_statement();
        }
        if self.eat_keyword("return") {
            if self.eat_punct(";") {
                return true;
            }
            return self.expression() && self.eat_punct(";");
        }
        if self.eat_keyword("throw") {
            return self.expression() && self.eat_punct(";");
        }
        if self.eat_keyword("break") || self.eat_keyword("continue") {
            self.eat_ident(); // optional label
            return self.eat_punct(";");
        }
        if self.eat_keyword("assert") {
            if !self.expression() {
                return false;
            }
            if self.eat_punct(":") && !self.expression() {
                return false;
            }
            return self.eat_punct(";");
        }
        if self.eat_keyword("synchronized") {
            return self.eat_punct("(") && self.expression() && self.eat_punct(")") && self.block();
        }
        if self.eat_keyword("switch") {
            return self.switch_statement();
        }
        // local variable declaration (with optional `final`), else expression
        let save = self.pos;
        self.eat_keyword("final");
        if self.local_var_decl() {
            return true;
        }
        self.pos = save;
        self.expression_statement()
    }

    fn block(&mut self) -> bool {
        if !self.eat_punct("{") {
            return false;
        }
        while !self.peek_punct("}") {
            if self.eof() || !self.statement() {
                return false;
            }
        }
        self.eat_punct("}")
    }

    fn for_statement(&mut self) -> bool {
        if !self.eat_punct("(") {
            return false;
        }
        // enhanced for: [final] Type name : expr
        let save = self.pos;
        self.eat_keyword("final");
        if self.parse_type() && self.eat_ident() && self.eat_punct(":") {
            if self.expression() && self.eat_punct(")") {
                return self.statement();
            }
            return false;
        }
        self.pos = save;
        // classic for: init ; cond ; update
        if !self.eat_punct(";") {
            let save2 = self.pos;
            self.eat_keyword("final");
            if !self.local_var_decl() {
                self.pos = save2;
                if !(self.statement_expression_list() && self.eat_punct(";")) {
                    return false;
                }
            }
        }
        if !self.eat_punct(";") && !(self.expression() && self.eat_punct(";")) {
            return false;
        }
        if !self.peek_punct(")") && !self.statement_expression_list() {
            return false;
        }
        self.eat_punct(")") && self.statement()
    }

    fn statement_expression_list(&mut self) -> bool {
        loop {
            if !self.expression() {
                return false;
            }
            if !self.eat_punct(",") {
                return true;
            }
        }
    }

    fn try_statement(&mut self) -> bool {
        if self.peek_punct("(") {
            // try-with-resources
            self.pos += 1;
            loop {
                let save = self.pos;
                self.eat_keyword("final");
                if !(self.parse_type()
                    && self.eat_ident()
                    && self.eat_punct("=")
                    && self.expression())
                {
                    self.pos = save;
                    if !self.expression() {
                        return false;
                    }
                }
                if self.eat_punct(";") {
                    if self.peek_punct(")") {
                        break;
                    }
                    continue;
                }
                break;
            }
            if !self.eat_punct(")") {
                return false;
            }
        }
        if !self.block() {
            return false;
        }
        let mut any_handler = false;
        while self.eat_keyword("catch") {
            any_handler = true;
            if !self.eat_punct("(") {
                return false;
            }
            self.eat_keyword("final");
            // catch type, possibly a union `A | B`
            loop {
                if !self.parse_type() {
                    return false;
                }
                if !self.eat_punct("|") {
                    break;
                }
            }
            if !(self.eat_ident() && self.eat_punct(")") && self.block()) {
                return false;
            }
        }
        if self.eat_keyword("finally") {
            any_handler = true;
            if !self.block() {
                return false;
            }
        }
        any_handler
    }

    fn switch_statement(&mut self) -> bool {
        if !(self.eat_punct("(") && self.expression() && self.eat_punct(")")) {
            return false;
        }
        if !self.eat_punct("{") {
            return false;
        }
        while !self.peek_punct("}") {
            if self.eof() {
                return false;
            }
            if self.eat_keyword("case") {
                if !self.expression() {
                    return false;
                }
                if !(self.eat_punct(":") || self.eat_punct("->")) {
                    return false;
                }
                continue;
            }
            if self.eat_keyword("default") {
                if !(self.eat_punct(":") || self.eat_punct("->")) {
                    return false;
                }
                continue;
            }
            if !self.statement() {
                return false;
            }
        }
        self.eat_punct("}")
    }

    fn local_var_decl(&mut self) -> bool {
        if !self.parse_type() {
            return false;
        }
        loop {
            if !self.eat_ident() {
                return false;
            }
            while self.eat_punct("[") {
                if !self.eat_punct("]") {
                    return false;
                }
            }
            if self.eat_punct("=") && !self.variable_initializer() {
                return false;
            }
            if self.eat_punct(",") {
                continue;
            }
            return self.eat_punct(";");
        }
    }

    fn variable_initializer(&mut self) -> bool {
        if self.peek_punct("{") {
            return self.array_initializer();
        }
        self.expression()
    }

    fn array_initializer(&mut self) -> bool {
        if !self.eat_punct("{") {
            return false;
        }
        if self.eat_punct("}") {
            return true;
        }
        loop {
            if !self.variable_initializer() {
                return false;
            }
            if self.eat_punct(",") {
                if self.eat_punct("}") {
                    return true; // trailing comma
                }
                continue;
            }
            return self.eat_punct("}");
        }
    }

    /// Expression statements must be statement expressions in Java:
    /// assignments, pre/post increment/decrement, invocations, or creations.
    fn expression_statement(&mut self) -> bool {
        let start = self.pos;
        if !self.expression() {
            return false;
        }
        if !self.eat_punct(";") {
            return false;
        }
        self.is_statement_expression(start, self.pos - 1)
    }

    fn is_statement_expression(&self, start: usize, semi: usize) -> bool {
        if semi <= start {
            return false;
        }
        let first = &self.toks[start];
        if first.is_punct("++") || first.is_punct("--") || first.is_keyword("new") {
            return true;
        }
        let last = &self.toks[semi - 1];
        if last.is_punct("++") || last.is_punct("--") || last.is_punct(")") {
            // postfix inc/dec or a trailing call
            return true;
        }
        // assignment operator at top level
        let mut depth = 0usize;
        for t in &self.toks[start..semi] {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth = depth.saturating_sub(1),
                    "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<="
                        if depth == 0 =>
                    {
                        return true
                    }
                    _ => {}
                }
            }
        }
        false
    }

    // ---- expressions (precedence climbing) ----

    fn expression(&mut self) -> bool {
        self.assignment()
    }

    fn assignment(&mut self) -> bool {
        // lambda lookahead: `x ->` or `(params) ->`
        if self.lambda() {
            return true;
        }
        if !self.ternary() {
            return false;
        }
        for op in ["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<="] {
            if self.peek_punct(op) {
                self.pos += 1;
                return self.assignment();
            }
        }
        // >>= and >>>= arrive as '>' '>' [...] '=' token runs
        if self.peek_shift_assign() {
            return self.assignment();
        }
        true
    }

    fn peek_shift_assign(&mut self) -> bool {
        let save = self.pos;
        let mut count = 0;
        while count < 3 && self.peek_punct(">") {
            if count > 0 && !self.adjacent_to_prev() {
                break;
            }
            self.pos += 1;
            count += 1;
        }
        if count >= 2 && self.peek_punct("=") && self.adjacent_to_prev() {
            self.pos += 1;
            return true;
        }
        self.pos = save;
        false
    }

    fn adjacent_to_prev(&self) -> bool {
        if self.pos == 0 {
            return false;
        }
        let prev = &self.toks[self.pos - 1];
        match self.cur() {
            Some(t) => prev.span.end == t.span.start,
            None => false,
        }
    }

    fn lambda(&mut self) -> bool {
        let save = self.pos;
        // ident ->
        if self.eat_ident() && self.eat_punct("->") {
            return self.lambda_body();
        }
        self.pos = save;
        // ( [params] ) ->
        if self.eat_punct("(") {
            loop {
                if self.peek_punct(")") {
                    break;
                }
                self.eat_keyword("final");
                let t_save = self.pos;
                if !(self.parse_type() && self.eat_ident()) {
                    self.pos = t_save;
                    if !self.eat_ident() {
                        self.pos = save;
                        return false;
                    }
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            if self.eat_punct(")") && self.eat_punct("->") {
                return self.lambda_body();
            }
        }
        self.pos = save;
        false
    }

    fn lambda_body(&mut self) -> bool {
        if self.peek_punct("{") {
            return self.block();
        }
        self.expression()
    }

    fn ternary(&mut self) -> bool {
        if !self.binary(0) {
            return false;
        }
        if self.eat_punct("?") {
            return self.expression() && self.eat_punct(":") && self.ternary();
        }
        true
    }

    /// Binary operators by precedence level, lowest first.
    fn binary(&mut self, level: usize) -> bool {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["|"],
            &["^"],
            &["&"],
            &["==", "!="],
            &["<", ">", "<=", ">=", "instanceof"],
            &["<<", ">>"], // >> is assembled from adjacent '>' tokens
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level >= LEVELS.len() {
            return self.unary();
        }
        if !self.binary(level + 1) {
            return false;
        }
        'outer: loop {
            for op in LEVELS[level] {
                if *op == "instanceof" {
                    if self.eat_keyword("instanceof") {
                        if !self.parse_type() {
                            return false;
                        }
                        self.eat_ident(); // pattern variable
                        continue 'outer;
                    }
                    continue;
                }
                if *op == ">>" {
                    // shift-right: two or three adjacent '>' tokens
                    let save = self.pos;
                    if self.peek_punct(">") {
                        self.pos += 1;
                        if self.peek_punct(">") && self.adjacent_to_prev() {
                            self.pos += 1;
                            if self.peek_punct(">") && self.adjacent_to_prev() {
                                self.pos += 1;
                            }
                            if self.binary(level + 1) {
                                continue 'outer;
                            }
                            return false;
                        }
                        self.pos = save;
                    }
                    continue;
                }
                if *op == ">" {
                    // plain greater-than: a single '>' not followed adjacently by '>' or '='
                    if self.peek_punct(">") {
                        let next_adj = self
                            .toks
                            .get(self.pos + 1)
                            .map(|n| {
                                (n.is_punct(">") || n.is_punct("="))
                                    && n.span.start == self.toks[self.pos].span.end
                            })
                            .unwrap_or(false);
                        if !next_adj {
                            self.pos += 1;
                            if self.binary(level + 1) {
                                continue 'outer;
                            }
                            return false;
                        }
                    }
                    continue;
                }
                if self.peek_punct(op) {
                    self.pos += 1;
                    if self.binary(level + 1) {
                        continue 'outer;
                    }
                    return false;
                }
            }
            return true;
        }
    }

    fn unary(&mut self) -> bool {
        for op in ["+", "-", "!", "~", "++", "--"] {
            if self.peek_punct(op) {
                self.pos += 1;
                return self.unary();
            }
        }
        // cast: `(Type) unary`
        let save = self.pos;
        if self.eat_punct("(") {
            if self.parse_type()
                && self.eat_punct(")")
                && self.cast_operand_follows()
                && self.unary()
            {
                return true;
            }
            self.pos = save;
        }
        self.postfix()
    }

    /// After a would-be cast `(T)`, only treat it as a cast when the next
    /// token can begin an operand; otherwise `(x)` is a parenthesized value.
    fn cast_operand_follows(&self) -> bool {
        match self.cur() {
            None => false,
            Some(t) => match t.kind {
                TokenKind::Ident
                | TokenKind::IntLit
                | TokenKind::FloatLit
                | TokenKind::CharLit
                | TokenKind::StringLit => true,
                TokenKind::Keyword => {
                    matches!(
                        t.text.as_str(),
                        "new" | "this" | "super" | "true" | "false" | "null"
                    ) || is_primitive(&t.text)
                }
                TokenKind::Punct => matches!(t.text.as_str(), "(" | "!" | "~"),
            },
        }
    }

    fn postfix(&mut self) -> bool {
        if !self.primary() {
            return false;
        }
        loop {
            if self.eat_punct(".") {
                // optional explicit type arguments: `.<T>method(...)`
                if self.peek_punct("<") && !self.skip_type_args() {
                    return false;
                }
                if self.eat_keyword("class") || self.eat_keyword("this") {
                    continue;
                }
                if self.eat_keyword("new") {
                    // qualified creation `outer.new Inner(...)`
                    if !(self.eat_ident() && self.arguments()) {
                        return false;
                    }
                    continue;
                }
                if !self.eat_ident() {
                    return false;
                }
                if self.peek_punct("(") && !self.arguments() {
                    return false;
                }
                continue;
            }
            if self.eat_punct("::") {
                if self.eat_keyword("new") || self.eat_ident() {
                    continue;
                }
                return false;
            }
            if self.eat_punct("[") {
                if self.eat_punct("]") {
                    // `Type[]::new` or `X[].class` style suffix
                    continue;
                }
                if !(self.expression() && self.eat_punct("]")) {
                    return false;
                }
                continue;
            }
            if self.peek_punct("++") || self.peek_punct("--") {
                self.pos += 1;
                continue;
            }
            return true;
        }
    }

    fn primary(&mut self) -> bool {
        let Some(t) = self.cur() else {
            return false;
        };
        match t.kind {
            TokenKind::IntLit | TokenKind::FloatLit | TokenKind::CharLit | TokenKind::StringLit => {
                self.pos += 1;
                true
            }
            TokenKind::Ident => {
                self.pos += 1;
                if self.peek_punct("(") {
                    return self.arguments();
                }
                true
            }
            TokenKind::Keyword => match t.text.as_str() {
                "true" | "false" | "null" => {
                    self.pos += 1;
                    true
                }
                "this" | "super" => {
                    self.pos += 1;
                    if self.peek_punct("(") {
                        return self.arguments();
                    }
                    true
                }
                "new" => {
                    self.pos += 1;
                    self.creator()
                }
                kw if is_primitive(kw) || kw == "void" => {
                    // `int.class`, `void.class`
                    self.pos += 1;
                    while self.eat_punct("[") {
                        if !self.eat_punct("]") {
                            return false;
                        }
                    }
                    self.eat_punct(".") && self.eat_keyword("class")
                }
                _ => false,
            },
            TokenKind::Punct => {
                if t.is_punct("(") {
                    self.pos += 1;
                    return self.expression() && self.eat_punct(")");
                }
                false
            }
        }
    }

    fn creator(&mut self) -> bool {
        if !self.parse_type_no_array() {
            return false;
        }
        if self.peek_punct("[") {
            // array creation
            let mut saw_dim_expr = false;
            while self.eat_punct("[") {
                if self.eat_punct("]") {
                    continue;
                }
                if !(self.expression() && self.eat_punct("]")) {
                    return false;
                }
                saw_dim_expr = true;
            }
            if self.peek_punct("{") {
                return self.array_initializer();
            }
            return saw_dim_expr;
        }
        if !self.arguments() {
            return false;
        }
        // anonymous class body
        if self.peek_punct("{") {
            return self.class_body_opaque();
        }
        true
    }

    /// Anonymous class bodies are validated only for balance, since member
    /// grammar is out of scope here.
    fn class_body_opaque(&mut self) -> bool {
        let mut depth = 0usize;
        while let Some(t) = self.cur() {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        if depth == 0 {
                            return false;
                        }
                        depth -= 1;
                        if depth == 0 {
                            self.pos += 1;
                            return true;
                        }
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
        false
    }

    fn arguments(&mut self) -> bool {
        if !self.eat_punct("(") {
            return false;
        }
        if self.eat_punct(")") {
            return true;
        }
        loop {
            if !self.expression() {
                return false;
            }
            if self.eat_punct(",") {
                continue;
            }
            return self.eat_punct(")");
        }
    }

    // ---- types ----

    fn parse_type(&mut self) -> bool {
        if !self.parse_type_no_array() {
            return false;
        }
        while self.peek_punct("[") {
            let save = self.pos;
            self.pos += 1;
            if !self.eat_punct("]") {
                self.pos = save;
                break;
            }
        }
        true
    }

    fn parse_type_no_array(&mut self) -> bool {
        let Some(t) = self.cur() else {
            return false;
        };
        if t.kind == TokenKind::Keyword && is_primitive(&t.text) {
            self.pos += 1;
            return true;
        }
        if t.is_keyword("var") {
            self.pos += 1;
            return true;
        }
        if !t.is_ident() {
            return false;
        }
        self.pos += 1;
        loop {
            if self.peek_punct("<") && !self.skip_type_args() {
                return false;
            }
            if self.eat_punct(".") {
                if !self.eat_ident() {
                    return false;
                }
                continue;
            }
            return true;
        }
    }

    fn skip_type_args(&mut self) -> bool {
        // `<` ... `>` where '>' tokens are single characters
        if !self.eat_punct("<") {
            return false;
        }
        if self.eat_punct(">") {
            return true; // diamond
        }
        loop {
            if self.eat_punct("?") {
                if (self.eat_keyword("extends") || self.eat_keyword("super")) && !self.parse_type()
                {
                    return false;
                }
            } else if !self.parse_type() {
                return false;
            }
            if self.eat_punct(",") {
                continue;
            }
            return self.eat_punct(">");
        }
    }
}

fn is_primitive(s: &str) -> bool {
    matches!(
        s,
        "int" | "long" | "short" | "byte" | "char" | "float" | "double" | "boolean"
    )
}
