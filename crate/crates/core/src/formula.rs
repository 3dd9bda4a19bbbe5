//! First-order formulas over (naturals, +, <, =) extended with indexing into
//! automatic sequences (`VTM[k+n]`) and calls to named predicates
//! (`$dispo_pos(i)`).
//!
//! The concrete syntax is Walnut-flavored: `A`/`E` quantifier prefixes with
//! comma-separated variable lists, connectives `~ & | =>`, comparisons
//! `= != < <= > >=`, terms built from `+` and constant multiples (`2*n` is
//! expanded to `n+n` while parsing), and an optional leading `?msd_2`
//! numeration directive. Quantifiers take maximal scope.
//!
//! Besides the AST and parser, the module has a brute-force evaluator with
//! bounded quantifier ranges; it is the semantics oracle the automaton
//! compiler is tested against.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unsupported numeration directive ?{0} (only ?msd_2)")]
    Directive(String),
    #[error("variable {0} is bound more than once or is both bound and free")]
    Rebound(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("unknown sequence {0}")]
    UnknownSequence(String),
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("arithmetic overflow")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(u64),
    Add(Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Compare(Term, Cmp, Term),
    SeqCmp {
        left_seq: String,
        left: Term,
        cmp: Cmp,
        right_seq: String,
        right: Term,
    },
    Call {
        name: String,
        args: Vec<Term>,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
}

impl Formula {
    /// Free variables, sorted; these become the tracks of the compiled
    /// automaton and the parameter order of a stored predicate.
    pub fn free_variables(&self) -> Vec<String> {
        let mut free = BTreeSet::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut free);
        free.into_iter().collect()
    }
}

fn collect_free(f: &Formula, bound: &mut Vec<String>, free: &mut BTreeSet<String>) {
    let term = |t: &Term, bound: &Vec<String>, free: &mut BTreeSet<String>| {
        collect_term_vars(t, |v| {
            if !bound.iter().any(|b| b == v) {
                free.insert(v.to_string());
            }
        });
    };
    match f {
        Formula::Compare(a, _, b) => {
            term(a, bound, free);
            term(b, bound, free);
        }
        Formula::SeqCmp { left, right, .. } => {
            term(left, bound, free);
            term(right, bound, free);
        }
        Formula::Call { args, .. } => {
            for a in args {
                term(a, bound, free);
            }
        }
        Formula::Not(g) => collect_free(g, bound, free),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_free(a, bound, free);
            collect_free(b, bound, free);
        }
        Formula::Exists(vars, g) | Formula::Forall(vars, g) => {
            let depth = bound.len();
            bound.extend(vars.iter().cloned());
            collect_free(g, bound, free);
            bound.truncate(depth);
        }
    }
}

fn collect_term_vars(t: &Term, mut visit: impl FnMut(&str)) {
    fn rec(t: &Term, visit: &mut impl FnMut(&str)) {
        match t {
            Term::Var(v) => visit(v),
            Term::Const(_) => {}
            Term::Add(a, b) => {
                rec(a, visit);
                rec(b, visit);
            }
        }
    }
    rec(t, &mut visit);
}

fn collect_binders(f: &Formula, out: &mut Vec<String>) {
    match f {
        Formula::Compare(..) | Formula::SeqCmp { .. } | Formula::Call { .. } => {}
        Formula::Not(g) => collect_binders(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_binders(a, out);
            collect_binders(b, out);
        }
        Formula::Exists(vars, g) | Formula::Forall(vars, g) => {
            out.extend(vars.iter().cloned());
            collect_binders(g, out);
        }
    }
}

// ---------------------------------------------------------------- lexing

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    Directive(String),
    Dollar,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Star,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Not,
    Implies,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let err = |pos: usize, message: &str| FormulaError::Syntax {
        pos,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => toks.push((Tok::LParen, start)),
            b')' => toks.push((Tok::RParen, start)),
            b'[' => toks.push((Tok::LBracket, start)),
            b']' => toks.push((Tok::RBracket, start)),
            b',' => toks.push((Tok::Comma, start)),
            b'+' => toks.push((Tok::Plus, start)),
            b'*' => toks.push((Tok::Star, start)),
            b'&' => toks.push((Tok::And, start)),
            b'|' => toks.push((Tok::Or, start)),
            b'~' => toks.push((Tok::Not, start)),
            b'$' => toks.push((Tok::Dollar, start)),
            b'<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    toks.push((Tok::Le, start));
                } else {
                    toks.push((Tok::Lt, start));
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    toks.push((Tok::Ge, start));
                } else {
                    toks.push((Tok::Gt, start));
                }
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    i += 1;
                    toks.push((Tok::Implies, start));
                } else {
                    toks.push((Tok::Eq, start));
                }
            }
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    toks.push((Tok::Ne, start));
                } else {
                    return Err(err(start, "expected != after !"));
                }
            }
            b'?' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(err(start, "empty directive after ?"));
                }
                toks.push((Tok::Directive(text[i + 1..j].to_string()), start));
                i = j;
                continue;
            }
            b'0'..=b'9' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let n: u64 = text[i..j]
                    .parse()
                    .map_err(|_| err(start, "number out of range"))?;
                toks.push((Tok::Nat(n), start));
                i = j;
                continue;
            }
            _ if b.is_ascii_alphabetic() || b == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                toks.push((Tok::Ident(text[i..j].to_string()), start));
                i = j;
                continue;
            }
            _ => return Err(err(start, &format!("unexpected character {:?}", b as char))),
        }
        i += 1;
    }
    Ok(toks)
}

// --------------------------------------------------------------- parsing

/// Either a numeric term or a sequence letter; comparisons must not mix the
/// two kinds.
enum Operand {
    Num(Term),
    Seq(String, Term),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    text_len: usize,
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let mut toks = lex(text)?;
    if let Some((Tok::Directive(d), pos)) = toks.first().cloned() {
        if d != "msd_2" {
            return Err(FormulaError::Directive(d));
        }
        let _ = pos;
        toks.remove(0);
    }
    let mut p = Parser {
        toks,
        pos: 0,
        text_len: text.len(),
    };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(p.err_here("unexpected trailing input"));
    }

    let mut binders = Vec::new();
    collect_binders(&f, &mut binders);
    let mut seen = BTreeSet::new();
    for v in &binders {
        if !seen.insert(v.clone()) {
            return Err(FormulaError::Rebound(v.clone()));
        }
    }
    for v in f.free_variables() {
        if seen.contains(&v) {
            return Err(FormulaError::Rebound(v));
        }
    }
    Ok(f)
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, p)| p)
            .unwrap_or(self.text_len)
    }

    fn err_here(&self, message: &str) -> FormulaError {
        FormulaError::Syntax {
            pos: self.here(),
            message: message.to_string(),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), FormulaError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.err_here(&format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FormulaError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err_here(&format!("expected {what}"))),
        }
    }

    /// Splits a leading quantifier out of an identifier token: `Ek` is the
    /// quantifier E binding k, `A` alone takes its variables from the next
    /// tokens. Returns None if the token is not a quantifier prefix.
    fn quantifier_head(&self) -> Option<(bool, Option<String>)> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let universal = match s.chars().next() {
                    Some('A') => true,
                    Some('E') => false,
                    _ => return None,
                };
                let rest = &s[1..];
                if rest.is_empty() {
                    Some((universal, None))
                } else if rest.chars().next().is_some_and(|c| c.is_ascii_lowercase()) {
                    Some((universal, Some(rest.to_string())))
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        if let Some((universal, first)) = self.quantifier_head() {
            self.pos += 1;
            let mut vars = Vec::new();
            match first {
                Some(v) => vars.push(v),
                None => vars.push(self.ident("quantified variable")?),
            }
            while self.eat(&Tok::Comma) {
                vars.push(self.ident("quantified variable")?);
            }
            let body = Box::new(self.formula()?);
            return Ok(if universal {
                Formula::Forall(vars, body)
            } else {
                Formula::Exists(vars, body)
            });
        }
        self.implies()
    }

    fn implies(&mut self) -> Result<Formula, FormulaError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implies()?;
            Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::And) {
            let rhs = self.unary()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        if self.eat(&Tok::Not) {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.quantifier_head().is_some() {
            return self.formula();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, FormulaError> {
        // A comparison and a parenthesized formula can both start with `(`;
        // try the comparison first and backtrack on failure.
        let save = self.pos;
        let cmp_err = match self.comparison() {
            Ok(f) => return Ok(f),
            Err(e) => {
                self.pos = save;
                e
            }
        };
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(Tok::RParen, ")")?;
            return Ok(f);
        }
        if self.eat(&Tok::Dollar) {
            let name = self.ident("predicate name")?;
            self.expect(Tok::LParen, "( after predicate name")?;
            let mut args = vec![self.term()?];
            while self.eat(&Tok::Comma) {
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, ") after predicate arguments")?;
            return Ok(Formula::Call { name, args });
        }
        Err(cmp_err)
    }

    fn comparison(&mut self) -> Result<Formula, FormulaError> {
        let left = self.operand()?;
        let cmp = self.cmp_op()?;
        let right = self.operand()?;
        match (left, right) {
            (Operand::Num(a), Operand::Num(b)) => Ok(Formula::Compare(a, cmp, b)),
            (Operand::Seq(ls, li), Operand::Seq(rs, ri)) => Ok(Formula::SeqCmp {
                left_seq: ls,
                left: li,
                cmp,
                right_seq: rs,
                right: ri,
            }),
            _ => Err(self.err_here("cannot compare a sequence letter with a number")),
        }
    }

    fn cmp_op(&mut self) -> Result<Cmp, FormulaError> {
        let cmp = match self.peek() {
            Some(Tok::Eq) => Cmp::Eq,
            Some(Tok::Ne) => Cmp::Ne,
            Some(Tok::Lt) => Cmp::Lt,
            Some(Tok::Le) => Cmp::Le,
            Some(Tok::Gt) => Cmp::Gt,
            Some(Tok::Ge) => Cmp::Ge,
            _ => return Err(self.err_here("expected a comparison operator")),
        };
        self.pos += 1;
        Ok(cmp)
    }

    fn operand(&mut self) -> Result<Operand, FormulaError> {
        if let Some(Tok::Ident(name)) = self.peek() {
            if self.toks.get(self.pos + 1).map(|(t, _)| t) == Some(&Tok::LBracket) {
                let name = name.clone();
                self.pos += 2;
                let idx = self.term()?;
                self.expect(Tok::RBracket, "] after sequence index")?;
                return Ok(Operand::Seq(name, idx));
            }
        }
        Ok(Operand::Num(self.term()?))
    }

    fn term(&mut self) -> Result<Term, FormulaError> {
        let mut t = self.factor()?;
        while self.eat(&Tok::Plus) {
            let rhs = self.factor()?;
            t = Term::Add(Box::new(t), Box::new(rhs));
        }
        Ok(t)
    }

    fn factor(&mut self) -> Result<Term, FormulaError> {
        match self.peek().cloned() {
            Some(Tok::Nat(n)) => {
                self.pos += 1;
                if self.eat(&Tok::Star) {
                    let sub = self.factor()?;
                    Ok(expand_multiple(n, sub))
                } else {
                    Ok(Term::Const(n))
                }
            }
            Some(Tok::Ident(v)) => {
                self.pos += 1;
                Ok(Term::Var(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen, ") in term")?;
                Ok(t)
            }
            _ => Err(self.err_here("expected a term")),
        }
    }
}

/// Constant multiples become iterated sums: 2*n is n+n.
fn expand_multiple(k: u64, t: Term) -> Term {
    if k == 0 {
        return Term::Const(0);
    }
    let mut acc = t.clone();
    for _ in 1..k {
        acc = Term::Add(Box::new(acc), Box::new(t.clone()));
    }
    acc
}

// ------------------------------------------------------------ evaluation

/// Supplies sequence letters and named-predicate truth values to the
/// brute-force evaluator.
pub trait Interpretation {
    fn sequence(&self, name: &str, index: u64) -> Result<u8, EvalError>;
    fn predicate(&self, name: &str, args: &[u64]) -> Result<bool, EvalError>;
}

/// An interpretation with no sequences and no predicates.
pub struct EmptyInterpretation;

impl Interpretation for EmptyInterpretation {
    fn sequence(&self, name: &str, _index: u64) -> Result<u8, EvalError> {
        Err(EvalError::UnknownSequence(name.to_string()))
    }

    fn predicate(&self, name: &str, _args: &[u64]) -> Result<bool, EvalError> {
        Err(EvalError::UnknownPredicate(name.to_string()))
    }
}

/// Direct evaluation with quantifiers enumerated over `0..=quantifier_bound`
/// (with short-circuiting). `assignment` gives values for the free
/// variables. The reference semantics for the automaton compiler on tuples
/// small relative to the bound.
pub fn evaluate(
    f: &Formula,
    interp: &dyn Interpretation,
    assignment: &[(String, u64)],
    quantifier_bound: u64,
) -> Result<bool, EvalError> {
    let mut stack: Vec<(String, u64)> = assignment.to_vec();
    eval_rec(f, interp, &mut stack, quantifier_bound)
}

fn eval_rec(
    f: &Formula,
    interp: &dyn Interpretation,
    stack: &mut Vec<(String, u64)>,
    bound: u64,
) -> Result<bool, EvalError> {
    match f {
        Formula::Compare(a, c, b) => {
            Ok(c.holds(eval_term(a, stack)?, eval_term(b, stack)?))
        }
        Formula::SeqCmp {
            left_seq,
            left,
            cmp,
            right_seq,
            right,
        } => {
            let l = interp.sequence(left_seq, eval_term(left, stack)?)?;
            let r = interp.sequence(right_seq, eval_term(right, stack)?)?;
            Ok(cmp.holds(l, r))
        }
        Formula::Call { name, args } => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_term(a, stack)?);
            }
            interp.predicate(name, &vals)
        }
        Formula::Not(g) => Ok(!eval_rec(g, interp, stack, bound)?),
        Formula::And(a, b) => {
            Ok(eval_rec(a, interp, stack, bound)? && eval_rec(b, interp, stack, bound)?)
        }
        Formula::Or(a, b) => {
            Ok(eval_rec(a, interp, stack, bound)? || eval_rec(b, interp, stack, bound)?)
        }
        Formula::Implies(a, b) => {
            Ok(!eval_rec(a, interp, stack, bound)? || eval_rec(b, interp, stack, bound)?)
        }
        Formula::Exists(vars, g) => eval_quantified(vars, g, false, interp, stack, bound),
        Formula::Forall(vars, g) => eval_quantified(vars, g, true, interp, stack, bound),
    }
}

fn eval_quantified(
    vars: &[String],
    body: &Formula,
    universal: bool,
    interp: &dyn Interpretation,
    stack: &mut Vec<(String, u64)>,
    bound: u64,
) -> Result<bool, EvalError> {
    if vars.is_empty() {
        return eval_rec(body, interp, stack, bound);
    }
    stack.push((vars[0].clone(), 0));
    let result = (|| {
        for v in 0..=bound {
            stack.last_mut().unwrap().1 = v;
            let inner = eval_quantified(&vars[1..], body, universal, interp, stack, bound)?;
            if inner != universal {
                return Ok(!universal);
            }
        }
        Ok(universal)
    })();
    stack.pop();
    result
}

fn eval_term(t: &Term, stack: &[(String, u64)]) -> Result<u64, EvalError> {
    match t {
        Term::Var(v) => stack
            .iter()
            .rev()
            .find(|(name, _)| name == v)
            .map(|&(_, val)| val)
            .ok_or_else(|| EvalError::Unbound(v.clone())),
        Term::Const(c) => Ok(*c),
        Term::Add(a, b) => eval_term(a, stack)?
            .checked_add(eval_term(b, stack)?)
            .ok_or(EvalError::Overflow),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: &str) -> Term {
        Term::Var(v.to_string())
    }

    #[test]
    fn parses_trivial_atom() {
        let f = parse_formula("x = x").unwrap();
        assert_eq!(f, Formula::Compare(var("x"), Cmp::Eq, var("x")));
        assert_eq!(f.free_variables(), vec!["x"]);
    }

    #[test]
    fn parses_terms_with_constant_multiples() {
        let f = parse_formula("j < i+2*n").unwrap();
        let expect = Formula::Compare(
            var("j"),
            Cmp::Lt,
            Term::Add(
                Box::new(var("i")),
                Box::new(Term::Add(Box::new(var("n")), Box::new(var("n")))),
            ),
        );
        assert_eq!(f, expect);

        let f = parse_formula("3*x = y").unwrap();
        let triple = Term::Add(
            Box::new(Term::Add(Box::new(var("x")), Box::new(var("x")))),
            Box::new(var("x")),
        );
        assert_eq!(f, Formula::Compare(triple, Cmp::Eq, var("y")));
    }

    #[test]
    fn quantifier_prefix_splitting() {
        let f = parse_formula("Ai,n i < n").unwrap();
        match &f {
            Formula::Forall(vars, body) => {
                assert_eq!(vars, &["i", "n"]);
                assert_eq!(**body, Formula::Compare(var("i"), Cmp::Lt, var("n")));
            }
            other => panic!("unexpected {other:?}"),
        }
        let g = parse_formula("A i, n i < n").unwrap();
        assert_eq!(f, g);
        let h = parse_formula("Ek k = 5").unwrap();
        match h {
            Formula::Exists(vars, _) => assert_eq!(vars, ["k"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quantifiers_take_maximal_scope() {
        let f = parse_formula("x = 1 & Ek k = x | k = 2").unwrap();
        // E consumes the rest: x=1 & (Ek (k=x | k=2)).
        match f {
            Formula::And(_, rhs) => match *rhs {
                Formula::Exists(ref vars, ref body) => {
                    assert_eq!(vars, &["k"]);
                    assert!(matches!(**body, Formula::Or(..)));
                }
                ref other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn connective_precedence() {
        // => weakest, then |, then &, then ~.
        let f = parse_formula("~a = b & c = d | e = f => g = h").unwrap();
        match f {
            Formula::Implies(lhs, _) => match *lhs {
                Formula::Or(inner, _) => match *inner {
                    Formula::And(not_part, _) => {
                        assert!(matches!(*not_part, Formula::Not(_)));
                    }
                    other => panic!("unexpected {other:?}"),
                },
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_sequence_atoms_and_calls() {
        let f = parse_formula("VTM[k] != VTM[k+n]").unwrap();
        match &f {
            Formula::SeqCmp {
                left_seq,
                cmp,
                right_seq,
                ..
            } => {
                assert_eq!(left_seq, "VTM");
                assert_eq!(right_seq, "VTM");
                assert_eq!(*cmp, Cmp::Ne);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(f.free_variables(), vec!["k", "n"]);

        let f = parse_formula("$dispo_pos(i) & $dispo_pos(j)").unwrap();
        assert_eq!(f.free_variables(), vec!["i", "j"]);
    }

    #[test]
    fn parenthesized_formula_versus_term() {
        let f = parse_formula("(x + y) = z").unwrap();
        assert!(matches!(f, Formula::Compare(Term::Add(..), Cmp::Eq, _)));
        let f = parse_formula("(x = y)").unwrap();
        assert!(matches!(f, Formula::Compare(..)));
        let f = parse_formula("(Ek k = x) => y = 0").unwrap();
        assert!(matches!(f, Formula::Implies(..)));
    }

    #[test]
    fn directive_handling() {
        assert!(parse_formula("?msd_2 x = 0").is_ok());
        assert!(matches!(
            parse_formula("?lsd_3 x = 0"),
            Err(FormulaError::Directive(_))
        ));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_formula("x <") {
            Err(FormulaError::Syntax { pos, .. }) => assert_eq!(pos, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_formula("x ! y").is_err());
        assert!(parse_formula("x = y)").is_err());
        assert!(parse_formula("x * 2 = y").is_err());
    }

    #[test]
    fn rejects_rebinding() {
        assert!(matches!(
            parse_formula("Ex (Ex x = 0)"),
            Err(FormulaError::Rebound(_))
        ));
        assert!(matches!(
            parse_formula("(Ex x = 0) & (Ex x = 1)"),
            Err(FormulaError::Rebound(_))
        ));
        assert!(matches!(
            parse_formula("x = 1 & Ex x = 2"),
            Err(FormulaError::Rebound(_))
        ));
    }

    #[test]
    fn evaluates_arithmetic_and_quantifiers() {
        let interp = EmptyInterpretation;
        let even = parse_formula("Ek k+k = x").unwrap();
        for x in 0..=20u64 {
            let got = evaluate(&even, &interp, &[("x".to_string(), x)], 32).unwrap();
            assert_eq!(got, x % 2 == 0, "x = {x}");
        }

        let all_le = parse_formula("Ak k <= b").unwrap();
        // With bound 16 the formula holds only when b is at least the bound.
        assert!(evaluate(&all_le, &interp, &[("b".to_string(), 16)], 16).unwrap());
        assert!(!evaluate(&all_le, &interp, &[("b".to_string(), 15)], 16).unwrap());
    }

    #[test]
    fn evaluates_sequences_and_predicates() {
        struct Mod3;
        impl Interpretation for Mod3 {
            fn sequence(&self, name: &str, index: u64) -> Result<u8, EvalError> {
                if name == "M" {
                    Ok((index % 3) as u8)
                } else {
                    Err(EvalError::UnknownSequence(name.to_string()))
                }
            }
            fn predicate(&self, name: &str, args: &[u64]) -> Result<bool, EvalError> {
                if name == "small" {
                    Ok(args[0] < 5)
                } else {
                    Err(EvalError::UnknownPredicate(name.to_string()))
                }
            }
        }
        let f = parse_formula("M[x] = M[x+3] & $small(x)").unwrap();
        for x in 0..=10u64 {
            let got = evaluate(&f, &Mod3, &[("x".to_string(), x)], 8).unwrap();
            assert_eq!(got, x < 5, "x = {x}");
        }
        let g = parse_formula("M[x] != M[y]").unwrap();
        let assign = [("x".to_string(), 1), ("y".to_string(), 4)];
        assert!(!evaluate(&g, &Mod3, &assign, 8).unwrap());
    }

    #[test]
    fn unbound_variable_reported() {
        let f = parse_formula("x = y").unwrap();
        assert_eq!(
            evaluate(&f, &EmptyInterpretation, &[("x".to_string(), 1)], 4),
            Err(EvalError::Unbound("y".to_string()))
        );
    }
}
