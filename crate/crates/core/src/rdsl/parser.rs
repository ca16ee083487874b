use std::collections::BTreeSet;

use crate::model::{BinOp, Expr, Rel};

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::{ParseError, Span, SyntaxError};

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        match self.tokens.get(self.pos) {
            Some(t) => t.span,
            None => self
                .tokens
                .last()
                .map(|t| Span::new(t.span.line, t.span.col + 1))
                .unwrap_or_default(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        let found = match self.peek() {
            Some(k) => k.to_string(),
            None => "end of input".to_string(),
        };
        SyntaxError::new(self.span(), format!("expected {expected}, found {found}"))
    }

    fn expect(&mut self, kind: &TokenKind) -> PResult<&'t Token> {
        if self.peek() == Some(kind) {
            Ok(self.bump().expect("peeked"))
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                Ok(name.clone())
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn unit(&mut self) -> Result<SourceUnit, ParseError> {
        let mut unit = SourceUnit::default();
        let mut names: BTreeSet<String> = BTreeSet::new();
        while let Some(kind) = self.peek() {
            let start = self.span();
            match kind {
                TokenKind::Separator => {
                    self.pos += 1;
                }
                TokenKind::KwFlow => {
                    let flow = self.flow()?;
                    if !names.insert(flow.name.clone()) {
                        return Err(ParseError::DuplicateName {
                            name: flow.name,
                            span: start,
                        });
                    }
                    unit.flows.push(flow);
                }
                TokenKind::KwModifier => {
                    let m = self.modifier()?;
                    if !names.insert(m.name.clone()) {
                        return Err(ParseError::DuplicateName {
                            name: m.name,
                            span: start,
                        });
                    }
                    unit.modifiers.push(m);
                }
                _ => return Err(self.unexpected("`flow` or `modifier`").into()),
            }
        }
        Ok(unit)
    }

    fn flow(&mut self) -> Result<FlowDef, ParseError> {
        let pos = NodePos(self.span());
        self.expect(&TokenKind::KwFlow)?;
        let name = self.ident()?;
        let mut formals = Vec::new();
        if self.eat(&TokenKind::LParen) {
            if !self.eat(&TokenKind::RParen) {
                loop {
                    formals.push(self.ident()?);
                    if self.eat(&TokenKind::RParen) {
                        break;
                    }
                    self.expect(&TokenKind::Comma)?;
                }
            }
        }
        let mut streams = Vec::new();
        let mut body = Vec::new();
        while let Some(TokenKind::Ident(_)) = self.peek() {
            match self.peek_at(1) {
                Some(TokenKind::Colon) => streams.push(self.stream_decl()?),
                Some(TokenKind::LParen) => body.push(self.call()?),
                _ => {
                    self.pos += 1;
                    return Err(self.unexpected("`:` or `(`").into());
                }
            }
        }
        Ok(FlowDef {
            name,
            formals,
            streams,
            body,
            pos,
        })
    }

    fn stream_decl(&mut self) -> PResult<StreamDecl> {
        let pos = NodePos(self.span());
        let name = self.ident()?;
        self.expect(&TokenKind::Colon)?;
        self.expect(&TokenKind::KwStream)?;
        let mut decl = StreamDecl {
            name,
            dims: Vec::new(),
            direction: Direction::Internal,
            label: None,
            comment: None,
            pos,
        };
        loop {
            match self.peek() {
                Some(TokenKind::LBracket) => {
                    self.pos += 1;
                    if self.at_attribute() {
                        self.attributes(&mut decl, &TokenKind::RBracket)?;
                    } else {
                        decl.dims.push(self.sum()?);
                        self.expect(&TokenKind::RBracket)?;
                    }
                }
                Some(TokenKind::LBrace) => {
                    self.pos += 1;
                    self.attributes(&mut decl, &TokenKind::RBrace)?;
                }
                Some(TokenKind::LParen) => {
                    self.pos += 1;
                    self.attributes(&mut decl, &TokenKind::RParen)?;
                }
                _ => break,
            }
        }
        decl.comment = self.tokens[self.pos - 1].trailing_comment.clone();
        Ok(decl)
    }

    fn at_attribute(&self) -> bool {
        matches!(
            (self.peek(), self.peek_at(1)),
            (Some(TokenKind::KwType), _) | (Some(TokenKind::Ident(_)), Some(TokenKind::Eq))
        )
    }

    fn attributes(&mut self, decl: &mut StreamDecl, close: &TokenKind) -> PResult<()> {
        loop {
            match self.peek() {
                Some(TokenKind::KwType) => {
                    self.pos += 1;
                    self.expect(&TokenKind::Eq)?;
                    decl.direction = match self.peek() {
                        Some(TokenKind::KwIn) => Direction::In,
                        Some(TokenKind::KwOut) => Direction::Out,
                        _ => return Err(self.unexpected("`in` or `out`")),
                    };
                    self.pos += 1;
                }
                Some(TokenKind::Ident(key)) if key == "label" => {
                    self.pos += 1;
                    self.expect(&TokenKind::Eq)?;
                    decl.label = Some(self.ident()?);
                }
                Some(TokenKind::Ident(key)) => {
                    return Err(SyntaxError::new(
                        self.span(),
                        format!("unknown stream attribute `{key}`"),
                    ))
                }
                _ => return Err(self.unexpected("stream attribute")),
            }
            if self.eat(close) {
                return Ok(());
            }
            self.expect(&TokenKind::Comma)?;
        }
    }

    fn call(&mut self) -> PResult<CallStmt> {
        let pos = NodePos(self.span());
        let callee = self.ident()?;
        self.expect(&TokenKind::LParen)?;
        let mut args = Vec::new();
        if !self.eat(&TokenKind::RParen) {
            loop {
                args.push(self.call_arg()?);
                if self.eat(&TokenKind::RParen) {
                    break;
                }
                self.expect(&TokenKind::Comma)?;
            }
        }
        Ok(CallStmt { callee, args, pos })
    }

    fn call_arg(&mut self) -> PResult<CallArg> {
        if let (Some(TokenKind::Ident(name)), Some(TokenKind::Eq)) = (self.peek(), self.peek_at(1))
        {
            let name = name.clone();
            self.pos += 2;
            let save = self.pos;
            if let Some(TokenKind::Ident(_)) = self.peek() {
                let stream = self.stream_ref()?;
                let is_expr = matches!(
                    self.peek(),
                    Some(
                        TokenKind::Colon
                            | TokenKind::Plus
                            | TokenKind::Minus
                            | TokenKind::Star
                            | TokenKind::Slash
                    )
                );
                if !is_expr {
                    return Ok(CallArg::Binding {
                        formal: name,
                        stream,
                    });
                }
                self.pos = save;
            }
            let lo = self.sum()?;
            self.expect(&TokenKind::Colon)?;
            let hi = self.sum()?;
            return Ok(CallArg::Range { var: name, lo, hi });
        }
        Ok(CallArg::Positional(self.stream_ref()?))
    }

    fn stream_ref(&mut self) -> PResult<StreamRef> {
        let pos = NodePos(self.span());
        let name = self.ident()?;
        let mut indices = Vec::new();
        while self.eat(&TokenKind::LBracket) {
            indices.push(self.sum()?);
            self.expect(&TokenKind::RBracket)?;
        }
        let mut delay = None;
        if self.eat(&TokenKind::At) {
            self.expect(&TokenKind::Minus)?;
            let span = self.span();
            match self.peek() {
                Some(TokenKind::Int(k)) if *k >= 1 && *k <= u32::MAX as i64 => {
                    delay = Some(*k as u32);
                    self.pos += 1;
                }
                _ => {
                    return Err(SyntaxError::new(
                        span,
                        "period offset after `@-` must be a positive integer",
                    ))
                }
            }
        }
        Ok(StreamRef {
            name,
            indices,
            delay,
            pos,
        })
    }

    fn modifier(&mut self) -> Result<ModifierDef, ParseError> {
        let pos = NodePos(self.span());
        self.expect(&TokenKind::KwModifier)?;
        let name = self.ident()?;
        self.expect(&TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&TokenKind::RParen) {
            loop {
                let dir = match self.peek() {
                    Some(TokenKind::KwIn) => ParamDir::In,
                    Some(TokenKind::KwOut) => ParamDir::Out,
                    _ => return Err(self.unexpected("`in` or `out`").into()),
                };
                self.pos += 1;
                params.push(Param {
                    dir,
                    name: self.ident()?,
                });
                if self.eat(&TokenKind::RParen) {
                    break;
                }
                self.expect(&TokenKind::Comma)?;
            }
        }
        let body = if self.peek() == Some(&TokenKind::KwGuarded) {
            let block = self.guarded()?;
            match block.arms.last() {
                Some(GuardArm {
                    cond: GuardCond::True,
                    ..
                }) => {}
                _ => {
                    return Err(ParseError::MissingTrueArm {
                        modifier: name,
                        span: pos.0,
                    })
                }
            }
            ModifierBody::Guarded(block)
        } else {
            let actions = self.actions()?;
            if actions.is_empty() {
                return Err(self.unexpected("modifier body").into());
            }
            ModifierBody::Actions(actions)
        };
        Ok(ModifierDef {
            name,
            params,
            body,
            pos,
        })
    }

    fn guarded(&mut self) -> PResult<GuardedBlock> {
        self.expect(&TokenKind::KwGuarded)?;
        self.expect(&TokenKind::LBrace)?;
        match self.peek() {
            Some(TokenKind::KwFirst) => self.pos += 1,
            Some(TokenKind::Ident(word)) => {
                return Err(SyntaxError::new(
                    self.span(),
                    format!("unsupported guard policy `{word}`; only `first` is defined"),
                ))
            }
            _ => return Err(self.unexpected("`first`")),
        }
        self.expect(&TokenKind::RBrace)?;
        self.expect(&TokenKind::LBrace)?;
        let mut arms = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            let pos = NodePos(self.span());
            let cond = match self.peek() {
                Some(TokenKind::KwTrue) => {
                    self.pos += 1;
                    GuardCond::True
                }
                Some(TokenKind::LParen) => {
                    self.pos += 1;
                    let cond = self.condition()?;
                    self.expect(&TokenKind::RParen)?;
                    cond
                }
                _ => return Err(self.unexpected("guard condition or `}`")),
            };
            self.expect(&TokenKind::Colon)?;
            let actions = self.actions()?;
            arms.push(GuardArm { cond, actions, pos });
        }
        Ok(GuardedBlock {
            policy: GuardPolicy::First,
            arms,
        })
    }

    fn condition(&mut self) -> PResult<GuardCond> {
        if self.eat(&TokenKind::KwTrue) {
            return Ok(GuardCond::True);
        }
        let name = self.ident()?;
        let negated = match self.peek() {
            Some(TokenKind::Ne) => true,
            Some(TokenKind::EqEq) => false,
            _ => return Err(self.unexpected("`!=` or `==`")),
        };
        self.pos += 1;
        self.expect(&TokenKind::KwEmpty)?;
        Ok(if negated {
            GuardCond::NotEmpty(name)
        } else {
            GuardCond::IsEmpty(name)
        })
    }

    fn actions(&mut self) -> PResult<Vec<Action>> {
        let mut out = Vec::new();
        while let (Some(TokenKind::Ident(name)), Some(next)) = (self.peek(), self.peek_at(1)) {
            match next {
                TokenKind::Eq => {
                    let target = name.clone();
                    self.pos += 2;
                    self.expect(&TokenKind::KwEmpty)?;
                    out.push(Action::AssignEmpty { target });
                }
                TokenKind::LParen if name == "error_message" => {
                    self.pos += 2;
                    let target = self.ident()?;
                    self.expect(&TokenKind::Comma)?;
                    let message = match self.peek() {
                        Some(TokenKind::Str(s)) => s.clone(),
                        _ => return Err(self.unexpected("string literal")),
                    };
                    self.pos += 1;
                    self.expect(&TokenKind::RParen)?;
                    out.push(Action::ErrorMessage { target, message });
                }
                TokenKind::LParen => {
                    let function = name.clone();
                    self.pos += 2;
                    let mut args = Vec::new();
                    if !self.eat(&TokenKind::RParen) {
                        loop {
                            args.push(self.ident()?);
                            if self.eat(&TokenKind::RParen) {
                                break;
                            }
                            self.expect(&TokenKind::Comma)?;
                        }
                    }
                    out.push(Action::Call { function, args });
                }
                _ => break,
            }
        }
        Ok(out)
    }

    fn chain(&mut self) -> PResult<Expr> {
        let first = self.sum()?;
        let mut rest = Vec::new();
        loop {
            let rel = match self.peek() {
                Some(TokenKind::Lt) => Rel::Lt,
                Some(TokenKind::Le) => Rel::Le,
                Some(TokenKind::Eq | TokenKind::EqEq) => Rel::Eq,
                Some(TokenKind::Ge) => Rel::Ge,
                Some(TokenKind::Gt) => Rel::Gt,
                _ => break,
            };
            self.pos += 1;
            rest.push((rel, self.sum()?));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Expr::Chain {
                first: Box::new(first),
                rest,
            })
        }
    }

    fn sum(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        match self.peek() {
            Some(TokenKind::Int(v)) => {
                self.pos += 1;
                Ok(Expr::Int(*v))
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                Ok(Expr::Ident(name.clone()))
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(&TokenKind::RParen)?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

pub fn parse_unit(tokens: &[Token]) -> Result<SourceUnit, ParseError> {
    Parser::new(tokens).unit()
}

pub(crate) fn parse_expr_tokens(tokens: &[Token]) -> PResult<Expr> {
    let mut p = Parser::new(tokens);
    let e = p.chain()?;
    if !p.at_end() {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}
