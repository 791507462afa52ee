//! Structural AST for mined Java source. Bodies are kept as source text plus
//! statement/invocation structure; full expression trees only exist inside
//! the syntax validator.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// One method invocation, in source order: receiver text (empty for
/// unqualified calls), simple method name, and argument count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub receiver: String,
    pub name: String,
    pub arg_count: usize,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct JavaMethod {
    pub name: String,
    /// Simple annotation names (`Test` for `@org.junit.Test`).
    pub annotations: Vec<String>,
    /// Method source from the first modifier or return-type token through the
    /// closing brace. Annotations are not part of the body text.
    pub body_text: String,
    /// All invocations in the method, ordered by source position.
    pub invocations: Vec<Invocation>,
    /// Byte span of `body_text` within the original file.
    pub span: Span,
    pub is_constructor: bool,
    /// Top-level statements of the body, absent for abstract methods.
    pub body: Option<BlockStmt>,
}

#[derive(Debug, Clone)]
pub struct ParsedClass {
    pub name: String,
    pub methods: Vec<JavaMethod>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub struct CompilationUnit {
    pub classes: Vec<ParsedClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmtKind {
    Expr,
    Return,
    If,
    While,
    DoWhile,
    For,
    Try,
    Switch,
    Block,
    Throw,
    Break,
    Continue,
    Assert,
    Synchronized,
    LocalType,
    Labeled,
    Empty,
}

/// A statement with its full source span (including any trailing semicolon)
/// and the blocks nested directly under it.
#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    pub blocks: Vec<BlockStmt>,
}

/// A brace-delimited block; the span includes both braces.
#[derive(Debug, Clone)]
pub struct BlockStmt {
    pub span: Span,
    pub stmts: Vec<Stmt>,
}

impl BlockStmt {
    /// Depth-first walk over every statement in this block and its children.
    pub fn walk<'a>(&'a self, visit: &mut dyn FnMut(&'a Stmt)) {
        for stmt in &self.stmts {
            visit(stmt);
            for block in &stmt.blocks {
                block.walk(visit);
            }
        }
    }
}
