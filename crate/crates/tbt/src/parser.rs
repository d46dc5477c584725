//! Recursive-descent parser for the `.tbt` specification DSL.
//!
//! ```text
//! spec      := {pred_decl} "formula" formula [";" "at" integer]
//! pred_decl := "pred" IDENT ":=" vector "*x" ">=" number "(" "delta" number ")" ";"
//! vector    := "[" number {"," number} "]"
//! formula   := IDENT
//!            | "not" "(" formula ")"
//!            | ("and"|"or"|"seq"|"sel") "(" formula {"," formula} ")"
//!            | ("G"|"F") "[" integer "," integer "]" formula
//! ```
//!
//! Whitespace-insensitive; `#` starts a line comment. `imp(x, y)` and
//! `iff(x, y)` are accepted and desugared into `or(not(x), y)` and the
//! conjunction of both implications.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::formula::{Formula, Predicate, SpecDocument};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    Expected(&'static str, String),
    UnknownPredicate(String),
    DuplicatePredicate(String),
    CoefficientLength { name: String, expected: usize, got: usize },
    InvertedInterval(u32, u32),
    NegativeDelta(String, f64),
    ZeroCoefficients(String),
    TrailingInput(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ParseErrorKind::*;
        match self {
            UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            Expected(what, got) => write!(f, "expected {what}, found {got}"),
            UnknownPredicate(n) => write!(f, "unknown predicate {n}"),
            DuplicatePredicate(n) => write!(f, "predicate {n} declared twice"),
            CoefficientLength { name, expected, got } => write!(
                f,
                "predicate {name}: expected {expected} coefficients, got {got}"
            ),
            InvertedInterval(a, b) => write!(f, "inverted interval [{a},{b}]"),
            NegativeDelta(n, d) => write!(f, "predicate {n}: delta {d} is negative"),
            ZeroCoefficients(n) => write!(f, "predicate {n}: all coefficients are zero"),
            TrailingInput(t) => write!(f, "trailing input starting at {t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Assign,  // :=
    Ge,      // >=
    Star,    // *
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s:?}"),
            Tok::Number(n) => write!(f, "{n}"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::Comma => f.write_str("','"),
            Tok::Semi => f.write_str("';'"),
            Tok::Assign => f.write_str("':='"),
            Tok::Ge => f.write_str("'>='"),
            Tok::Star => f.write_str("'*'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1, col: 1 }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, col: self.col, kind }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src[self.pos..].chars().next()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<Spanned, ParseError> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let spanned = |tok| Spanned { tok, line, col };
        let Some(c) = self.peek() else {
            return Ok(spanned(Tok::Eof));
        };
        match c {
            '(' => {
                self.bump();
                Ok(spanned(Tok::LParen))
            }
            ')' => {
                self.bump();
                Ok(spanned(Tok::RParen))
            }
            '[' => {
                self.bump();
                Ok(spanned(Tok::LBracket))
            }
            ']' => {
                self.bump();
                Ok(spanned(Tok::RBracket))
            }
            ',' => {
                self.bump();
                Ok(spanned(Tok::Comma))
            }
            ';' => {
                self.bump();
                Ok(spanned(Tok::Semi))
            }
            '*' => {
                self.bump();
                Ok(spanned(Tok::Star))
            }
            ':' => {
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    Ok(spanned(Tok::Assign))
                } else {
                    Err(self.err(ParseErrorKind::UnexpectedChar(':')))
                }
            }
            '>' => {
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    Ok(spanned(Tok::Ge))
                } else {
                    Err(self.err(ParseErrorKind::UnexpectedChar('>')))
                }
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = self.pos;
                self.bump();
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' {
                        self.bump();
                    } else if (c == '-' || c == '+')
                        && matches!(self.src.as_bytes().get(self.pos - 1), Some(b'e') | Some(b'E'))
                    {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let text = &self.src[start..self.pos];
                text.parse::<f64>()
                    .map(|n| spanned(Tok::Number(n)))
                    .map_err(|_| ParseError {
                        line,
                        col,
                        kind: ParseErrorKind::Expected("number", text.to_string()),
                    })
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                Ok(spanned(Tok::Ident(self.src[start..self.pos].to_string())))
            }
            other => Err(self.err(ParseErrorKind::UnexpectedChar(other))),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Spanned,
    state_dim: usize,
    predicates: BTreeMap<String, Arc<Predicate>>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, state_dim: usize) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let current = lexer.next()?;
        Ok(Parser { lexer, current, state_dim, predicates: BTreeMap::new() })
    }

    fn err_here(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.current.line, col: self.current.col, kind }
    }

    fn advance(&mut self) -> Result<Tok, ParseError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.current, next).tok)
    }

    fn expect(&mut self, want: &Tok, what: &'static str) -> Result<(), ParseError> {
        if &self.current.tok == want {
            self.advance()?;
            Ok(())
        } else {
            Err(self.err_here(ParseErrorKind::Expected(what, self.current.tok.to_string())))
        }
    }

    fn expect_ident(&mut self, what: &'static str) -> Result<String, ParseError> {
        match self.current.tok.clone() {
            Tok::Ident(s) => {
                self.advance()?;
                Ok(s)
            }
            other => Err(self.err_here(ParseErrorKind::Expected(what, other.to_string()))),
        }
    }

    fn expect_keyword(&mut self, kw: &'static str) -> Result<(), ParseError> {
        match &self.current.tok {
            Tok::Ident(s) if s == kw => {
                self.advance()?;
                Ok(())
            }
            other => Err(self.err_here(ParseErrorKind::Expected(kw, other.to_string()))),
        }
    }

    fn expect_number(&mut self, what: &'static str) -> Result<f64, ParseError> {
        match self.current.tok {
            Tok::Number(n) => {
                self.advance()?;
                Ok(n)
            }
            ref other => Err(self.err_here(ParseErrorKind::Expected(what, other.to_string()))),
        }
    }

    fn expect_uint(&mut self, what: &'static str) -> Result<u32, ParseError> {
        let loc = (self.current.line, self.current.col);
        let n = self.expect_number(what)?;
        if n < 0.0 || n.fract() != 0.0 || n > f64::from(u32::MAX) {
            return Err(ParseError {
                line: loc.0,
                col: loc.1,
                kind: ParseErrorKind::Expected("nonnegative integer", n.to_string()),
            });
        }
        Ok(n as u32)
    }

    fn spec(mut self) -> Result<SpecDocument, ParseError> {
        loop {
            match &self.current.tok {
                Tok::Ident(s) if s == "pred" => self.pred_decl()?,
                _ => break,
            }
        }
        self.expect_keyword("formula")?;
        let formula = self.formula()?;
        let mut t_star = 0;
        if self.current.tok == Tok::Semi {
            self.advance()?;
            self.expect_keyword("at")?;
            t_star = self.expect_uint("time step")?;
        }
        if self.current.tok != Tok::Eof {
            return Err(
                self.err_here(ParseErrorKind::TrailingInput(self.current.tok.to_string()))
            );
        }
        Ok(SpecDocument {
            predicates: self.predicates.into_values().collect(),
            formula,
            t_star,
        })
    }

    fn pred_decl(&mut self) -> Result<(), ParseError> {
        self.expect_keyword("pred")?;
        let name_loc = (self.current.line, self.current.col);
        let name = self.expect_ident("predicate name")?;
        let at = |kind| ParseError { line: name_loc.0, col: name_loc.1, kind };
        if self.predicates.contains_key(&name) {
            return Err(at(ParseErrorKind::DuplicatePredicate(name)));
        }
        self.expect(&Tok::Assign, "':='")?;
        let a = self.vector()?;
        self.expect(&Tok::Star, "'*x'")?;
        self.expect_keyword("x")?;
        self.expect(&Tok::Ge, "'>='")?;
        let b = self.expect_number("offset")?;
        self.expect(&Tok::LParen, "'(delta ...)'")?;
        self.expect_keyword("delta")?;
        let delta = self.expect_number("delta value")?;
        self.expect(&Tok::RParen, "')'")?;
        self.expect(&Tok::Semi, "';'")?;
        if a.len() != self.state_dim {
            return Err(at(ParseErrorKind::CoefficientLength {
                name,
                expected: self.state_dim,
                got: a.len(),
            }));
        }
        if delta < 0.0 {
            return Err(at(ParseErrorKind::NegativeDelta(name, delta)));
        }
        if !a.iter().any(|c| *c != 0.0) {
            return Err(at(ParseErrorKind::ZeroCoefficients(name)));
        }
        let pred = Predicate::new(name.clone(), a, b, delta)
            .expect("validated above");
        self.predicates.insert(name, Arc::new(pred));
        Ok(())
    }

    fn vector(&mut self) -> Result<Vec<f64>, ParseError> {
        self.expect(&Tok::LBracket, "'['")?;
        let mut out = vec![self.expect_number("coefficient")?];
        while self.current.tok == Tok::Comma {
            self.advance()?;
            out.push(self.expect_number("coefficient")?);
        }
        self.expect(&Tok::RBracket, "']'")?;
        Ok(out)
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let loc = (self.current.line, self.current.col);
        let head = self.expect_ident("formula")?;
        match head.as_str() {
            "not" => {
                self.expect(&Tok::LParen, "'('")?;
                let child = self.formula()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(Formula::not(child))
            }
            "and" | "or" | "seq" | "sel" => {
                let children = self.operand_list()?;
                Ok(match head.as_str() {
                    "and" => Formula::And(children),
                    "or" => Formula::Or(children),
                    "seq" => Formula::Seq(children),
                    _ => Formula::Sel(children),
                })
            }
            "imp" => {
                let mut children = self.operand_list()?;
                if children.len() != 2 {
                    return Err(ParseError {
                        line: loc.0,
                        col: loc.1,
                        kind: ParseErrorKind::Expected("two operands for imp", head),
                    });
                }
                let rhs = children.pop().unwrap();
                let lhs = children.pop().unwrap();
                Ok(Formula::Or(vec![Formula::not(lhs), rhs]))
            }
            "iff" => {
                let mut children = self.operand_list()?;
                if children.len() != 2 {
                    return Err(ParseError {
                        line: loc.0,
                        col: loc.1,
                        kind: ParseErrorKind::Expected("two operands for iff", head),
                    });
                }
                let rhs = children.pop().unwrap();
                let lhs = children.pop().unwrap();
                Ok(Formula::And(vec![
                    Formula::Or(vec![Formula::not(lhs.clone()), rhs.clone()]),
                    Formula::Or(vec![Formula::not(rhs), lhs]),
                ]))
            }
            "G" | "F" => {
                self.expect(&Tok::LBracket, "'['")?;
                let a = self.expect_uint("interval lower bound")?;
                self.expect(&Tok::Comma, "','")?;
                let b = self.expect_uint("interval upper bound")?;
                self.expect(&Tok::RBracket, "']'")?;
                if a > b {
                    return Err(ParseError {
                        line: loc.0,
                        col: loc.1,
                        kind: ParseErrorKind::InvertedInterval(a, b),
                    });
                }
                let child = self.formula()?;
                Ok(if head == "G" {
                    Formula::Always { lo: a, hi: b, child: Box::new(child) }
                } else {
                    Formula::Eventually { lo: a, hi: b, child: Box::new(child) }
                })
            }
            name => match self.predicates.get(name) {
                Some(p) => Ok(Formula::Pred(p.clone())),
                None => Err(ParseError {
                    line: loc.0,
                    col: loc.1,
                    kind: ParseErrorKind::UnknownPredicate(name.to_string()),
                }),
            },
        }
    }

    fn operand_list(&mut self) -> Result<Vec<Formula>, ParseError> {
        self.expect(&Tok::LParen, "'('")?;
        let mut out = vec![self.formula()?];
        while self.current.tok == Tok::Comma {
            self.advance()?;
            out.push(self.formula()?);
        }
        self.expect(&Tok::RParen, "')'")?;
        Ok(out)
    }
}

/// Parses a `.tbt` specification. `state_dim` is the declared state/output
/// dimension every predicate coefficient vector must match.
pub fn parse_spec(text: &str, state_dim: usize) -> Result<SpecDocument, ParseError> {
    Parser::new(text, state_dim)?.spec()
}

/// Renders a spec back to DSL text that reparses to an equal AST.
pub fn render_spec(doc: &SpecDocument) -> String {
    let mut out = String::new();
    for p in &doc.predicates {
        let coeffs: Vec<String> = p.a.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!(
            "pred {} := [{}]*x >= {} (delta {});\n",
            p.name,
            coeffs.join(","),
            p.b,
            p.delta
        ));
    }
    out.push_str(&format!("formula {}", doc.formula));
    if doc.t_star != 0 {
        out.push_str(&format!("; at {}", doc.t_star));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sequence_spec() {
        let doc = parse_spec(
            "pred pA := [1,0]*x >= 3 (delta 0.25); formula seq(F[0,5] pA, F[0,5] pA)",
            2,
        )
        .unwrap();
        let Formula::Seq(children) = &doc.formula else {
            panic!("expected seq, got {}", doc.formula);
        };
        assert_eq!(children.len(), 2);
        for c in children {
            assert!(
                matches!(c, Formula::Eventually { lo: 0, hi: 5, child }
                    if matches!(&**child, Formula::Pred(p) if p.name == "pA"))
            );
        }
        assert_eq!(doc.t_star, 0);
    }

    #[test]
    fn unknown_predicate_reported() {
        let err = parse_spec("formula sel(G[0,2] pZ)", 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnknownPredicate(ref n) if n == "pZ"));
    }

    #[test]
    fn inverted_interval_reported() {
        let err = parse_spec(
            "pred pA := [1]*x >= 0 (delta 0); formula F[3,1] pA",
            1,
        )
        .unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::InvertedInterval(3, 1));
    }

    #[test]
    fn negative_delta_and_length_mismatch() {
        let err = parse_spec("pred p := [1]*x >= 0 (delta -0.5); formula p", 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::NegativeDelta(..)));
        let err = parse_spec("pred p := [1]*x >= 0 (delta 0); formula p", 2).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::CoefficientLength { .. }));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_spec("formula\n  @", 1).unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
    }

    #[test]
    fn t_star_suffix_and_comments() {
        let doc = parse_spec(
            "# comment line\npred p := [1]*x >= 1 (delta 0.1);\nformula G[0,2] p; at 4\n",
            1,
        )
        .unwrap();
        assert_eq!(doc.t_star, 4);
    }

    #[test]
    fn implication_desugars() {
        let doc = parse_spec(
            "pred a := [1]*x >= 0 (delta 0); pred b := [1]*x >= 1 (delta 0); formula imp(a, b)",
            1,
        )
        .unwrap();
        assert!(matches!(doc.formula, Formula::Or(ref cs) if cs.len() == 2));
    }

    #[test]
    fn round_trip() {
        let src = "pred pA := [1,0]*x >= 3 (delta 0.25);\npred pB := [0,1]*x >= -2 (delta 0);\nformula sel(seq(F[0,5] pA, not(pB)), and(G[1,4] pB, or(pA, pB))); at 2";
        let doc = parse_spec(src, 2).unwrap();
        let rendered = render_spec(&doc);
        let doc2 = parse_spec(&rendered, 2).unwrap();
        assert_eq!(doc.formula, doc2.formula);
        assert_eq!(doc.t_star, doc2.t_star);
    }
}
