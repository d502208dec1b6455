//! Recursive-descent parser for MiniLang.

use std::path::PathBuf;

use crate::ast::*;
use crate::error::ParseError;
use crate::lexer::{tokenize, Tok, Token};

/// Parses a complete source file. The returned program has an empty
/// `source_file`; use [`parse_file`] to attach a path.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_file(source, PathBuf::new())
}

pub fn parse_file(source: &str, path: impl Into<PathBuf>) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        branch_counter: 0,
    };
    let mut program = Program::empty(path);
    while !parser.at(&Tok::Eof) {
        match parser.peek().tok {
            Tok::Record => program.records.push(parser.record()?),
            Tok::Fn => program.functions.push(parser.function()?),
            Tok::Test => program.tests.push(parser.test()?),
            _ => return Err(parser.unexpected("'record', 'fn' or 'test'")),
        }
    }
    Ok(program)
}

/// Parses a single expression, e.g. an entry call such as `inc(41)`.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        branch_counter: 0,
    };
    let expr = parser.expr()?;
    if !parser.at(&Tok::Eof) {
        return Err(parser.unexpected("end of input"));
    }
    Ok(expr)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    branch_counter: BranchId,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Int(n) => format!("integer '{n}'"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Eof => "end of input".to_string(),
        other => format!("'{}'", token_text(other)),
    }
}

fn token_text(tok: &Tok) -> &'static str {
    match tok {
        Tok::Record => "record",
        Tok::Extends => "extends",
        Tok::Fn => "fn",
        Tok::Test => "test",
        Tok::Let => "let",
        Tok::If => "if",
        Tok::Else => "else",
        Tok::While => "while",
        Tok::Return => "return",
        Tok::Assert => "assert",
        Tok::ExpectError => "expect_error",
        Tok::True => "true",
        Tok::False => "false",
        Tok::IntTy => "int",
        Tok::BoolTy => "bool",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::Comma => ",",
        Tok::Colon => ":",
        Tok::Semi => ";",
        Tok::Dot => ".",
        Tok::Arrow => "->",
        Tok::Assign => "=",
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Percent => "%",
        Tok::Lt => "<",
        Tok::Le => "<=",
        Tok::Gt => ">",
        Tok::Ge => ">=",
        Tok::EqEq => "==",
        Tok::NotEq => "!=",
        Tok::AndAnd => "&&",
        Tok::OrOr => "||",
        Tok::Bang => "!",
        Tok::Int(_) | Tok::Ident(_) | Tok::Eof => "?",
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError::new(
            t.line,
            t.col,
            format!("expected {expected}, found {}", describe(&t.tok)),
        )
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if self.at(&tok) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&format!("'{}'", token_text(&tok))))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        match self.peek().tok.clone() {
            Tok::IntTy => {
                self.bump();
                if self.at(&Tok::LBracket) && self.peek_at(1) == &Tok::RBracket {
                    self.bump();
                    self.bump();
                    Ok(Type::IntArray)
                } else {
                    Ok(Type::Int)
                }
            }
            Tok::BoolTy => {
                self.bump();
                Ok(Type::Bool)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Type::Record(name))
            }
            _ => Err(self.unexpected("type")),
        }
    }

    fn span_from(&self, start: &Token, end: &Token) -> Span {
        Span {
            start: start.start,
            end: end.end,
            first_line: start.line,
            last_line: end.line,
        }
    }

    fn record(&mut self) -> Result<RecordDecl, ParseError> {
        let start = self.expect(Tok::Record)?;
        let name = self.ident()?;
        let extends = if self.eat(&Tok::Extends) {
            Some(self.ident()?)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let mut fields = Vec::new();
        while !self.at(&Tok::RBrace) {
            let fname = self.ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.ty()?;
            self.expect(Tok::Semi)?;
            fields.push(Field { name: fname, ty });
        }
        let end = self.expect(Tok::RBrace)?;
        Ok(RecordDecl {
            name,
            extends,
            fields,
            span: self.span_from(&start, &end),
        })
    }

    fn function(&mut self) -> Result<FunctionDecl, ParseError> {
        let start = self.expect(Tok::Fn)?;
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                let pname = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Arrow)?;
        let return_type = self.ty()?;
        self.branch_counter = 0;
        let (body, end) = self.block()?;
        Ok(FunctionDecl {
            name,
            params,
            return_type,
            body,
            span: self.span_from(&start, &end),
        })
    }

    fn test(&mut self) -> Result<TestDecl, ParseError> {
        let start = self.expect(Tok::Test)?;
        self.expect(Tok::Fn)?;
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        self.expect(Tok::RParen)?;
        self.branch_counter = 0;
        let (body, end) = self.block()?;
        Ok(TestDecl {
            name,
            body,
            span: self.span_from(&start, &end),
        })
    }

    /// Returns the block and its closing brace token.
    fn block(&mut self) -> Result<(Block, Token), ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return Err(self.unexpected("'}'"));
            }
            stmts.push(self.stmt()?);
        }
        let end = self.expect(Tok::RBrace)?;
        Ok((Block { stmts }, end))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let line = self.peek().line;
        let kind = match self.peek().tok.clone() {
            Tok::Let => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                self.expect(Tok::Assign)?;
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Let { name, ty, value }
            }
            Tok::If => {
                self.bump();
                let branch = self.next_branch();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let (then_block, _) = self.block()?;
                let else_block = if self.eat(&Tok::Else) {
                    Some(self.block()?.0)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                    branch,
                }
            }
            Tok::While => {
                self.bump();
                let branch = self.next_branch();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let (body, _) = self.block()?;
                StmtKind::While { cond, body, branch }
            }
            Tok::Return => {
                self.bump();
                let value = if self.at(&Tok::Semi) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi)?;
                StmtKind::Return(value)
            }
            Tok::Assert => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Assert(e)
            }
            Tok::ExpectError => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::ExpectError(e)
            }
            Tok::Ident(name) if self.peek_at(1) == &Tok::Assign => {
                self.bump();
                self.bump();
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Assign { name, value }
            }
            _ => {
                let e = self.expr()?;
                if self.at(&Tok::Assign) {
                    match e.kind {
                        ExprKind::Index(base, index) if matches!(base.kind, ExprKind::Var(_)) => {
                            let ExprKind::Var(name) = base.kind else {
                                unreachable!()
                            };
                            self.bump();
                            let value = self.expr()?;
                            self.expect(Tok::Semi)?;
                            StmtKind::IndexAssign {
                                name,
                                index: *index,
                                value,
                            }
                        }
                        _ => return Err(self.unexpected("';'")),
                    }
                } else {
                    self.expect(Tok::Semi)?;
                    StmtKind::Expr(e)
                }
            }
        };
        Ok(Stmt { kind, line })
    }

    fn next_branch(&mut self) -> BranchId {
        let id = self.branch_counter;
        self.branch_counter += 1;
        id
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek().tok {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let line = lhs.line;
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), line);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let line = self.peek().line;
        let op = match self.peek().tok {
            Tok::Minus => UnaryOp::Neg,
            Tok::Bang => UnaryOp::Not,
            _ => return self.postfix(),
        };
        self.bump();
        let operand = self.unary()?;
        Ok(Expr::new(ExprKind::Unary(op, Box::new(operand)), line))
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            if self.eat(&Tok::Dot) {
                let field = self.ident()?;
                let line = e.line;
                e = Expr::new(ExprKind::Field(Box::new(e), field), line);
            } else if self.at(&Tok::LBracket) {
                self.bump();
                let idx = self.expr()?;
                self.expect(Tok::RBracket)?;
                let line = e.line;
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), line);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        let line = tok.line;
        let kind = match tok.tok {
            Tok::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            Tok::True => {
                self.bump();
                ExprKind::Bool(true)
            }
            Tok::False => {
                self.bump();
                ExprKind::Bool(false)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(e);
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if !self.at(&Tok::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket)?;
                ExprKind::Array(items)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.at(&Tok::LParen) {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen)?;
                    ExprKind::Call(name, args)
                } else if self.at(&Tok::LBrace) {
                    self.bump();
                    let mut fields = Vec::new();
                    if !self.at(&Tok::RBrace) {
                        loop {
                            let fname = self.ident()?;
                            self.expect(Tok::Colon)?;
                            let value = self.expr()?;
                            fields.push((fname, value));
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RBrace)?;
                    ExprKind::Record { name, fields }
                } else {
                    ExprKind::Var(name)
                }
            }
            _ => return Err(self.unexpected("expression")),
        };
        Ok(Expr::new(kind, line))
    }
}
