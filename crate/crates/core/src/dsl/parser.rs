use std::collections::{HashMap, HashSet};

use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind, SourceSpan, KEYWORDS};
use crate::expr::{ArithOp, CmpOp, GuardExpr, NumExpr, VarRef};
use crate::model::{
    Bond, BondGraph, ControlSpec, DecisionDef, Element, ElementKind, Junction, JunctionKind, Parameter, Probe,
    SignalDef, SwitchState,
};
use crate::validate::{validate_graph, DiagnosticKind};

const ITEM_KEYWORDS: &[&str] = &["element", "junction", "bond", "signal", "decision", "probe"];

/// Parses model source into a validated graph, or returns every error found.
pub fn parse_model(text: &str) -> Result<BondGraph, Vec<ParseError>> {
    let (toks, lex_errors) = tokenize(text);
    let mut p = Parser {
        toks,
        pos: 0,
        errors: lex_errors,
        graph: BondGraph::default(),
        decls: HashMap::new(),
        probe_decls: HashMap::new(),
        refs: HashMap::new(),
        failed: HashSet::new(),
        item: String::new(),
    };
    p.model();
    p.finish()
}

/// Expression tree before boolean/real typing.
#[derive(Debug, Clone)]
struct Ex {
    kind: ExKind,
    span: SourceSpan,
}

#[derive(Debug, Clone)]
enum ExKind {
    Num(f64),
    Time,
    Bool(bool),
    Ident(String),
    Var(VarRef),
    Not(Box<Ex>),
    Neg(Box<Ex>),
    And(Box<Ex>, Box<Ex>),
    Or(Box<Ex>, Box<Ex>),
    Cmp(CmpOp, Box<Ex>, Box<Ex>),
    Arith(ArithOp, Box<Ex>, Box<Ex>),
}

/// Error already recorded in `Parser::errors`.
struct Failed;

type PResult<T> = Result<T, Failed>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    errors: Vec<ParseError>,
    graph: BondGraph,
    decls: HashMap<String, Vec<SourceSpan>>,
    probe_decls: HashMap<String, Vec<SourceSpan>>,
    /// First occurrence of each (item, referenced name).
    refs: HashMap<(String, String), SourceSpan>,
    /// Names of items dropped by a syntax error.
    failed: HashSet<String>,
    /// Item being parsed, for reference bookkeeping.
    item: String,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&mut self, kind: ParseErrorKind, span: SourceSpan, message: String) -> PResult<T> {
        self.errors.push(ParseError::new(kind, span, message));
        Err(Failed)
    }

    fn unexpected<T>(&mut self, wanted: &str) -> PResult<T> {
        let found = self.peek().describe();
        self.error(
            ParseErrorKind::Syntax,
            self.span(),
            format!("expected {wanted}, found {found}"),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.unexpected(wanted)
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn expect_word(&mut self, word: &str) -> PResult<()> {
        if self.is_word(word) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{word}`"))
        }
    }

    fn skip_semi(&mut self) {
        if *self.peek() == Tok::Semi {
            self.bump();
        }
    }

    /// A name token (identifier that is not a keyword).
    fn name(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => {
                let span = self.span();
                self.error(
                    ParseErrorKind::Syntax,
                    span,
                    format!("`{s}` is a reserved word and cannot name a {what}"),
                )
            }
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => self.unexpected(&format!("{what} name")),
        }
    }

    fn declare(&mut self, what: &str) -> PResult<String> {
        let (name, span) = self.name(what)?;
        self.decls.entry(name.clone()).or_default().push(span);
        self.item = name.clone();
        Ok(name)
    }

    fn reference(&mut self, what: &str) -> PResult<String> {
        let (name, span) = self.name(what)?;
        self.refs.entry((self.item.clone(), name.clone())).or_insert(span);
        Ok(name)
    }

    fn model(&mut self) {
        if self.model_header().is_err() {
            return;
        }
        loop {
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    if *self.peek() != Tok::Eof {
                        let _ = self.unexpected::<()>("end of input after the model");
                    }
                    return;
                }
                Tok::Eof => {
                    let _ = self.unexpected::<()>("`}` closing the model");
                    return;
                }
                Tok::Ident(word) if ITEM_KEYWORDS.contains(&word.as_str()) => {
                    let start = self.pos;
                    self.item.clear();
                    if self.item_body(&word).is_err() {
                        if !self.item.is_empty() {
                            self.failed.insert(self.item.clone());
                        }
                        self.recover(start);
                    }
                }
                Tok::Ident(word) => {
                    let start = self.pos;
                    let span = self.span();
                    let _ = self.error::<()>(
                        ParseErrorKind::UnknownKeyword,
                        span,
                        format!(
                            "unknown item keyword `{word}`; expected one of {}",
                            ITEM_KEYWORDS.join(", ")
                        ),
                    );
                    self.recover(start);
                }
                _ => {
                    let start = self.pos;
                    let _ = self.unexpected::<()>("an item keyword");
                    self.recover(start);
                }
            }
        }
    }

    fn model_header(&mut self) -> PResult<()> {
        self.expect_word("bondgraph")?;
        let (name, _) = self.name("model")?;
        self.graph.name = name;
        self.expect(Tok::LBrace, "`{`")?;
        Ok(())
    }

    /// Skips to the next line-leading word or closing brace.
    fn recover(&mut self, start: usize) {
        if self.pos == start {
            self.bump();
        }
        loop {
            let t = &self.toks[self.pos];
            let at_word = matches!(&t.tok, Tok::Ident(_));
            if t.tok == Tok::Eof || (t.line_start && (at_word || t.tok == Tok::RBrace)) {
                return;
            }
            self.bump();
        }
    }

    fn item_body(&mut self, word: &str) -> PResult<()> {
        self.bump();
        match word {
            "element" => self.element(),
            "junction" => self.junction(),
            "bond" => self.bond(),
            "signal" => self.signal(),
            "decision" => self.decision(),
            "probe" => self.probe(),
            _ => unreachable!("checked against ITEM_KEYWORDS"),
        }?;
        self.skip_semi();
        Ok(())
    }

    fn element(&mut self) -> PResult<()> {
        let kind = match self.peek().clone() {
            Tok::Ident(k) => match ElementKind::from_keyword(&k) {
                Some(kind) => {
                    self.bump();
                    kind
                }
                None => {
                    let span = self.span();
                    return self.error(
                        ParseErrorKind::UnknownKeyword,
                        span,
                        format!("unknown element kind `{k}`; expected C, R, I, Sf, MSf or Se"),
                    );
                }
            },
            _ => return self.unexpected("element kind"),
        };
        let name = self.declare("element")?;
        self.expect(Tok::LBrace, "`{`")?;
        self.expect_word("value")?;
        self.expect(Tok::Assign, "`=`")?;
        let ex = self.expr()?;
        let parameter = match ex.kind {
            ExKind::Num(v) => Parameter::Constant(v),
            ExKind::Var(VarRef::Signal(s)) => Parameter::Signal(s),
            _ => Parameter::Modulation(self.num_of(&ex)?),
        };
        self.skip_semi();
        self.expect(Tok::RBrace, "`}`")?;
        self.graph.elements.push(Element { name, kind, parameter });
        Ok(())
    }

    fn junction(&mut self) -> PResult<()> {
        let kind = match self.peek() {
            Tok::Number(v) if *v == 0.0 => JunctionKind::Zero,
            Tok::Number(v) if *v == 1.0 => JunctionKind::One,
            _ => return self.unexpected("junction kind `0` or `1`"),
        };
        self.bump();
        let name = self.declare("junction")?;
        if !self.is_word("switched") {
            self.graph.junctions.push(Junction::plain(name, kind));
            return Ok(());
        }
        self.bump();
        let open = self.expect(Tok::LBrace, "`{`")?;
        let (mut on, mut off, mut init) = (None, None, None);
        while *self.peek() != Tok::RBrace {
            let field_span = self.span();
            let field = match self.peek().clone() {
                Tok::Ident(f) if ["on_guard", "off_guard", "init"].contains(&f.as_str()) => f,
                _ => return self.unexpected("`on_guard`, `off_guard`, `init` or `}`"),
            };
            self.bump();
            self.expect(Tok::Assign, "`=`")?;
            let duplicate = match field.as_str() {
                "on_guard" => on.replace(self.guard()?).is_some(),
                "off_guard" => off.replace(self.guard()?).is_some(),
                _ => {
                    let state = if self.is_word("on") {
                        SwitchState::On
                    } else if self.is_word("off") {
                        SwitchState::Off
                    } else {
                        return self.unexpected("`on` or `off`");
                    };
                    self.bump();
                    init.replace(state).is_some()
                }
            };
            if duplicate {
                return self.error(ParseErrorKind::Syntax, field_span, format!("`{field}` given twice"));
            }
            self.skip_semi();
        }
        let close = self.bump().span;
        let missing: Vec<&str> = [
            ("on_guard", on.is_none()),
            ("off_guard", off.is_none()),
            ("init", init.is_none()),
        ]
        .into_iter()
        .filter_map(|(f, m)| m.then_some(f))
        .collect();
        match (on, off, init) {
            (Some(on_guard), Some(off_guard), Some(initial_state)) => {
                self.graph.junctions.push(Junction::switched(
                    name,
                    kind,
                    ControlSpec {
                        on_guard,
                        off_guard,
                        initial_state,
                    },
                ));
                Ok(())
            }
            _ => self.error(
                ParseErrorKind::Syntax,
                SourceSpan {
                    length: close.offset + 1 - open.offset,
                    ..open
                },
                format!("switched junction `{name}` is missing {}", missing.join(", ")),
            ),
        }
    }

    fn bond(&mut self) -> PResult<()> {
        let name = self.declare("bond")?;
        self.expect_word("from")?;
        let from = self.reference("node")?;
        self.expect_word("to")?;
        let to = self.reference("node")?;
        self.graph.bonds.push(Bond { name, from, to });
        Ok(())
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        match *self.peek() {
            Tok::Number(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => self.unexpected("a number"),
        }
    }

    fn signal(&mut self) -> PResult<()> {
        let name = self.declare("signal")?;
        self.expect(Tok::Assign, "`=`")?;
        self.expect_word("piecewise")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut breakpoints = Vec::new();
        loop {
            let t = self.signed_number()?;
            self.expect(Tok::Colon, "`:`")?;
            let v = self.signed_number()?;
            breakpoints.push((t, v));
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => return self.unexpected("`,` or `)`"),
            }
        }
        self.graph.signals.push(SignalDef { name, breakpoints });
        Ok(())
    }

    fn decision(&mut self) -> PResult<()> {
        let name = self.declare("decision")?;
        self.expect(Tok::Assign, "`=`")?;
        let guard = self.guard()?;
        self.graph.decisions.push(DecisionDef { name, guard });
        Ok(())
    }

    fn probe(&mut self) -> PResult<()> {
        let labelled = matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Assign;
        let label = if labelled {
            let (label, span) = self.name("probe label")?;
            self.bump();
            self.probe_decls.entry(label.clone()).or_default().push(span);
            Some(label)
        } else {
            None
        };
        let start = self.span();
        self.item = label.clone().unwrap_or_default();
        let var = self.var_ref()?;
        let label = label.unwrap_or_else(|| {
            let l = var.to_string();
            self.probe_decls.entry(l.clone()).or_default().push(start);
            // references were recorded under an empty item; re-key them
            if let Some(span) = self.refs.remove(&(String::new(), var.name().to_string())) {
                self.refs.insert((l.clone(), var.name().to_string()), span);
            }
            l
        });
        self.graph.probes.push(Probe { label, var });
        Ok(())
    }

    fn var_ref(&mut self) -> PResult<VarRef> {
        let ex = self.primary()?;
        match ex.kind {
            ExKind::Var(v) => Ok(v),
            _ => self.error(
                ParseErrorKind::Syntax,
                ex.span,
                "expected `effort(..)`, `flow(..)` or `signal(..)`".into(),
            ),
        }
    }

    // ---- expressions ----

    fn guard(&mut self) -> PResult<GuardExpr> {
        let ex = self.expr()?;
        self.guard_of(&ex)
    }

    fn expr(&mut self) -> PResult<Ex> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Ex> {
        let mut lhs = self.and_expr()?;
        while self.is_word("or") || *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and_expr()?;
            let span = lhs.span;
            lhs = Ex {
                kind: ExKind::Or(Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Ex> {
        let mut lhs = self.not_expr()?;
        while self.is_word("and") || *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.not_expr()?;
            let span = lhs.span;
            lhs = Ex {
                kind: ExKind::And(Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Ex> {
        if self.is_word("not") || *self.peek() == Tok::Bang {
            let span = self.bump().span;
            let inner = self.not_expr()?;
            return Ok(Ex {
                kind: ExKind::Not(Box::new(inner)),
                span,
            });
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Ex> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            Tok::EqEq => CmpOp::Eq,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        let span = lhs.span;
        Ok(Ex {
            kind: ExKind::Cmp(op, Box::new(lhs), Box::new(rhs)),
            span,
        })
    }

    fn add_expr(&mut self) -> PResult<Ex> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            let span = lhs.span;
            lhs = Ex {
                kind: ExKind::Arith(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
    }

    fn mul_expr(&mut self) -> PResult<Ex> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                Tok::Percent => ArithOp::Rem,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let span = lhs.span;
            lhs = Ex {
                kind: ExKind::Arith(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
    }

    fn unary(&mut self) -> PResult<Ex> {
        if *self.peek() == Tok::Minus {
            let span = self.bump().span;
            let inner = self.unary()?;
            // negative literals stay literals
            let kind = match inner.kind {
                ExKind::Num(v) => ExKind::Num(-v),
                _ => ExKind::Neg(Box::new(inner)),
            };
            return Ok(Ex { kind, span });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Ex> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                ExKind::Num(v)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            Tok::Ident(w) => match w.as_str() {
                "time" => {
                    self.bump();
                    ExKind::Time
                }
                "true" | "false" => {
                    self.bump();
                    ExKind::Bool(w == "true")
                }
                "effort" | "flow" | "signal" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let target = self.reference(&w)?;
                    self.expect(Tok::RParen, "`)`")?;
                    ExKind::Var(match w.as_str() {
                        "effort" => VarRef::Effort(target),
                        "flow" => VarRef::Flow(target),
                        _ => VarRef::Signal(target),
                    })
                }
                _ if KEYWORDS.contains(&w.as_str()) => {
                    return self.unexpected("an expression");
                }
                _ => ExKind::Ident(self.reference("decision")?),
            },
            _ => return self.unexpected("an expression"),
        };
        Ok(Ex { kind, span })
    }

    fn mismatch<T>(&mut self, ex: &Ex, wanted: &str, found: &str) -> PResult<T> {
        self.error(
            ParseErrorKind::TypeMismatch,
            ex.span,
            format!("expected a {wanted} expression, found {found}"),
        )
    }

    fn guard_of(&mut self, ex: &Ex) -> PResult<GuardExpr> {
        Ok(match &ex.kind {
            ExKind::Bool(b) => GuardExpr::Const(*b),
            ExKind::Ident(d) => GuardExpr::Decision(d.clone()),
            ExKind::Var(VarRef::Signal(s)) => GuardExpr::Signal(s.clone()),
            ExKind::Not(a) => self.guard_of(a)?.not(),
            ExKind::And(a, b) => {
                let a = self.guard_of(a)?;
                a.and(self.guard_of(b)?)
            }
            ExKind::Or(a, b) => {
                let a = self.guard_of(a)?;
                a.or(self.guard_of(b)?)
            }
            ExKind::Cmp(op, a, b) => {
                let lhs = self.num_of(a)?;
                GuardExpr::cmp(lhs, *op, self.num_of(b)?)
            }
            ExKind::Num(_) => return self.mismatch(ex, "boolean", "a number"),
            ExKind::Time => return self.mismatch(ex, "boolean", "`time`"),
            ExKind::Var(v) => return self.mismatch(ex, "boolean", &format!("`{v}`")),
            ExKind::Neg(_) | ExKind::Arith(..) => return self.mismatch(ex, "boolean", "arithmetic"),
        })
    }

    fn num_of(&mut self, ex: &Ex) -> PResult<NumExpr> {
        Ok(match &ex.kind {
            ExKind::Num(v) => NumExpr::Const(*v),
            ExKind::Time => NumExpr::Time,
            ExKind::Var(v) => NumExpr::Var(v.clone()),
            ExKind::Neg(a) => NumExpr::binary(ArithOp::Mul, NumExpr::Const(-1.0), self.num_of(a)?),
            ExKind::Arith(op, a, b) => {
                let lhs = self.num_of(a)?;
                NumExpr::binary(*op, lhs, self.num_of(b)?)
            }
            ExKind::Bool(_) => return self.mismatch(ex, "numeric", "a boolean literal"),
            ExKind::Ident(d) => return self.mismatch(ex, "numeric", &format!("decision `{d}`")),
            ExKind::Not(_) | ExKind::And(..) | ExKind::Or(..) | ExKind::Cmp(..) => {
                return self.mismatch(ex, "numeric", "a boolean expression")
            }
        })
    }

    // ---- validation and error assembly ----

    fn finish(mut self) -> Result<BondGraph, Vec<ParseError>> {
        let mut dup_seen: HashMap<(bool, String), usize> = HashMap::new();
        for d in validate_graph(&self.graph) {
            if d.kind == DiagnosticKind::UnresolvedReference && self.failed.contains(&d.name) {
                continue;
            }
            let kind = match d.kind {
                DiagnosticKind::DuplicateName | DiagnosticKind::DuplicateProbeLabel => ParseErrorKind::DuplicateName,
                DiagnosticKind::UnresolvedReference => ParseErrorKind::UnresolvedReference,
                DiagnosticKind::InvalidVariable | DiagnosticKind::InvalidParameter => ParseErrorKind::TypeMismatch,
                other => ParseErrorKind::Invalid(other),
            };
            let probe = d.kind == DiagnosticKind::DuplicateProbeLabel;
            let span = match d.kind {
                DiagnosticKind::DuplicateName | DiagnosticKind::DuplicateProbeLabel => {
                    // the k-th duplicate diagnostic points at the (k+1)-th declaration
                    let k = dup_seen.entry((probe, d.item.clone())).or_insert(0);
                    *k += 1;
                    let table = if probe { &self.probe_decls } else { &self.decls };
                    table.get(&d.item).and_then(|v| v.get(*k).or(v.last())).copied()
                }
                _ => self
                    .refs
                    .get(&(d.item.clone(), d.name.clone()))
                    .or_else(|| self.decls.get(&d.item).and_then(|v| v.first()))
                    .or_else(|| self.probe_decls.get(&d.item).and_then(|v| v.first()))
                    .copied(),
            };
            let span = span.unwrap_or(self.toks[0].span);
            self.errors.push(ParseError::new(kind, span, d.message));
        }
        if self.errors.is_empty() {
            Ok(self.graph)
        } else {
            self.errors.sort_by_key(|e| (e.span.line, e.span.column));
            Err(self.errors)
        }
    }
}
