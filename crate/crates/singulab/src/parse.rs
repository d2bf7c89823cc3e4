//! Text syntax for mixed polynomials. The grammar is in `docs/grammar.md`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::mixedpoly::MixedPolynomial;
use crate::scalar::ComplexScalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax { expected: Vec<String>, found: String },
    UnknownIdentifier(String),
    NonIntegerExponent,
    Division,
    VariableIndex(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.column)?;
        match &self.kind {
            ParseErrorKind::Syntax { expected, found } => write!(f, "expected one of {}, found {}", expected.join(", "), found),
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::NonIntegerExponent => write!(f, "exponent must be a non-negative integer"),
            ParseErrorKind::Division => write!(f, "division is only allowed inside a rational literal"),
            ParseErrorKind::VariableIndex(j) => write!(f, "variable index {j} out of range"),
        }
    }
}

/// Parsed expression before lowering.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(ComplexScalar),
    Var(usize),
    ConjVar(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Conj(Box<Expr>),
}

impl Expr {
    /// Largest variable index plus one.
    pub fn variable_count(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(j) | Expr::ConjVar(j) => j + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.variable_count().max(b.variable_count()),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Conj(a) => a.variable_count(),
        }
    }

    pub fn lower(&self, n: usize) -> MixedPolynomial {
        match self {
            Expr::Const(c) => MixedPolynomial::constant(n, c.clone()),
            Expr::Var(j) => MixedPolynomial::var(n, *j),
            Expr::ConjVar(j) => MixedPolynomial::conj_var(n, *j),
            Expr::Add(a, b) => a.lower(n).add(&b.lower(n)),
            Expr::Sub(a, b) => a.lower(n).sub(&b.lower(n)),
            Expr::Mul(a, b) => a.lower(n).mul(&b.lower(n)),
            Expr::Neg(a) => a.lower(n).neg(),
            Expr::Pow(a, k) => a.lower(n).pow(*k),
            Expr::Conj(a) => a.lower(n).conj(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational, bool),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Tilde,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(..) => "number".into(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn digits_to_rational(int_part: &str, frac_part: &str) -> BigRational {
    let all = format!("{int_part}{frac_part}");
    let numer: BigInt = all.parse().unwrap_or_else(|_| BigInt::zero());
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    BigRational::new(numer, denom)
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut advance = |k: usize, i: &mut usize| {
            *i += k;
            col += k;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '~' => Some(Tok::Tilde),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            advance(1, &mut i);
            out.push(Spanned { tok, line: start_line, column: start_col });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let int_part: String = chars[i..j].iter().collect();
            let mut frac_part = String::new();
            if j < chars.len() && chars[j] == '.' {
                let k0 = j + 1;
                let mut k = k0;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                frac_part = chars[k0..k].iter().collect();
                j = k;
            }
            let mut value = digits_to_rational(&int_part, &frac_part);
            // `a/b` between two integer literals is a rational literal
            if frac_part.is_empty() && j < chars.len() && chars[j] == '/' {
                let k0 = j + 1;
                let mut k = k0;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                if k > k0 {
                    let den: BigInt = chars[k0..k].iter().collect::<String>().parse().expect("digits");
                    if den.is_zero() {
                        return Err(ParseError { line: start_line, column: start_col + (k0 - i), kind: ParseErrorKind::Division });
                    }
                    value = BigRational::new(value.numer().clone(), den);
                    j = k;
                }
            }
            let imaginary = j < chars.len() && chars[j] == 'i' && !chars.get(j + 1).is_some_and(|d| d.is_alphanumeric() || *d == '_');
            if imaginary {
                j += 1;
            }
            advance(j - i, &mut i);
            out.push(Spanned { tok: Tok::Num(value, imaginary), line: start_line, column: start_col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let name: String = chars[i..j].iter().collect();
            advance(j - i, &mut i);
            out.push(Spanned { tok: Tok::Ident(name), line: start_line, column: start_col });
            continue;
        }
        return Err(ParseError {
            line: start_line,
            column: start_col,
            kind: ParseErrorKind::Syntax { expected: vec!["expression".into()], found: format!("`{c}`") },
        });
    }
    out.push(Spanned { tok: Tok::End, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

const ATOM_START: [&str; 6] = ["number", "`i`", "variable", "`~`", "`conj`", "`(`"];

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        let s = self.peek();
        ParseError { line: s.line, column: s.column, kind }
    }

    fn expected(&self, expected: &[&str]) -> ParseError {
        self.error(ParseErrorKind::Syntax { expected: expected.iter().map(|s| s.to_string()).collect(), found: self.peek().tok.describe() })
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => return Err(self.error(ParseErrorKind::Division)),
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().tok {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exponent = self.exponent()?;
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn exponent(&mut self) -> Result<u32, ParseError> {
        let here = self.pos;
        let parenthesized = self.peek().tok == Tok::LParen;
        if parenthesized {
            self.bump();
        }
        let value = match self.bump() {
            Tok::Num(v, false) if v.is_integer() => v,
            Tok::Num(..) | Tok::Minus => {
                self.pos = here;
                return Err(self.error(ParseErrorKind::NonIntegerExponent));
            }
            _ => {
                self.pos = here + parenthesized as usize;
                return Err(self.expected(&["integer"]));
            }
        };
        if parenthesized {
            match self.peek().tok {
                Tok::RParen => {
                    self.bump();
                }
                Tok::Slash | Tok::Plus | Tok::Minus | Tok::Star => {
                    self.pos = here;
                    return Err(self.error(ParseErrorKind::NonIntegerExponent));
                }
                _ => return Err(self.expected(&["`)`"])),
            }
        }
        value.to_integer().try_into().map_err(|_| {
            self.pos = here;
            self.error(ParseErrorKind::NonIntegerExponent)
        })
    }

    fn variable(&mut self, name: &str) -> Result<Option<usize>, ParseError> {
        let Some(rest) = name.strip_prefix('z') else { return Ok(None) };
        if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_digit()) || rest.starts_with('0') {
            return Ok(None);
        }
        let index: usize = rest.parse().map_err(|_| self.error(ParseErrorKind::UnknownIdentifier(name.into())))?;
        if index > 64 {
            return Err(self.error(ParseErrorKind::VariableIndex(index)));
        }
        Ok(Some(index - 1))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().tok.clone() {
            Tok::Num(v, imaginary) => {
                self.bump();
                let c = if imaginary { ComplexScalar::new(BigRational::zero(), v) } else { ComplexScalar::real(v) };
                Ok(Expr::Const(c))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Tilde => {
                self.bump();
                match self.peek().tok.clone() {
                    Tok::Ident(name) => match self.variable(&name)? {
                        Some(j) => {
                            self.bump();
                            Ok(Expr::ConjVar(j))
                        }
                        None => Err(self.error(ParseErrorKind::UnknownIdentifier(name))),
                    },
                    _ => Err(self.expected(&["variable"])),
                }
            }
            Tok::Ident(name) => {
                if name == "i" {
                    self.bump();
                    return Ok(Expr::Const(ComplexScalar::i()));
                }
                if name == "conj" {
                    self.bump();
                    self.expect(Tok::LParen, "`(`")?;
                    let inner = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::Conj(Box::new(inner)));
                }
                match self.variable(&name)? {
                    Some(j) => {
                        self.bump();
                        Ok(Expr::Var(j))
                    }
                    None => Err(self.error(ParseErrorKind::UnknownIdentifier(name))),
                }
            }
            _ => Err(self.expected(&ATOM_START)),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser { toks: lex(text)?, pos: 0 };
    let expr = parser.expr()?;
    match parser.peek().tok {
        Tok::End => Ok(expr),
        Tok::Slash => Err(parser.error(ParseErrorKind::Division)),
        _ => Err(parser.expected(&["`+`", "`-`", "`*`", "`^`", "end of input"])),
    }
}

/// Parses into a polynomial in `n` variables, or in as many as the text mentions (at least 2).
pub fn parse_poly(text: &str, n: Option<usize>) -> Result<MixedPolynomial, ParseError> {
    let expr = parse_expr(text)?;
    let used = expr.variable_count();
    let n = match n {
        Some(n) if used > n => return Err(ParseError { line: 1, column: 1, kind: ParseErrorKind::VariableIndex(used) }),
        Some(n) => n,
        None => used.max(2),
    };
    Ok(expr.lower(n))
}

/// `3`, `-1/10`, `0.25`.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let expr = parse_expr(text.trim()).ok()?;
    let value = match expr {
        Expr::Const(c) if c.is_real() => c.re,
        Expr::Neg(inner) => match *inner {
            Expr::Const(c) if c.is_real() => -c.re,
            _ => return None,
        },
        _ => return None,
    };
    Some(value)
}

/// Any constant expression such as `1-2i` or `(1/2)*i`.
pub fn parse_scalar(text: &str) -> Option<ComplexScalar> {
    let poly = parse_poly(text, Some(0)).ok()?;
    if poly.is_zero() {
        return Some(ComplexScalar::zero());
    }
    let c = poly.coeff(&[], &[]);
    (poly.len() == 1 && !c.is_zero()).then_some(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn z(j: usize) -> MixedPolynomial {
        MixedPolynomial::var(2, j)
    }

    #[test]
    fn worked_f() {
        let f = parse_poly("z1^4 + z2^4", None).unwrap();
        assert_eq!(f, z(0).pow(4).add(&z(1).pow(4)));
    }

    #[test]
    fn product_with_conjugate_expands() {
        let p = parse_poly("(z1^4+z2^4)*conj(z1^2+z2^2)", None).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.to_string(), parse_poly("z1^4*~z1^2 + z1^4*~z2^2 + z2^4*~z1^2 + z2^4*~z2^2", None).unwrap().to_string());
    }

    #[test]
    fn fractional_exponent_rejected() {
        let err = parse_poly("z1^(1/2)", None).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonIntegerExponent);
        assert_eq!((err.line, err.column), (1, 4));
        assert_eq!(parse_poly("z1^0.5", None).unwrap_err().kind, ParseErrorKind::NonIntegerExponent);
        assert_eq!(parse_poly("z1^-1", None).unwrap_err().kind, ParseErrorKind::NonIntegerExponent);
    }

    #[test]
    fn literals() {
        assert_eq!(parse_scalar("1/10").unwrap(), ComplexScalar::from_ratio(1, 10));
        assert_eq!(parse_scalar("0.25 - 3i").unwrap(), ComplexScalar::new(rat(1, 4), rat(-3, 1)));
        assert_eq!(parse_scalar("-1+1/2i").unwrap(), ComplexScalar::new(rat(-1, 1), rat(1, 2)));
        assert_eq!(parse_scalar("2*i").unwrap(), ComplexScalar::from_ints(0, 2));
        assert_eq!(parse_rational("-3/4").unwrap(), rat(-3, 4));
        assert!(parse_rational("1+i").is_none());
    }

    #[test]
    fn conjugate_variables() {
        let p = parse_poly("z1*~z1", None).unwrap();
        assert_eq!(p, z(0).mul(&z(0).conj()));
        assert_eq!(parse_poly("conj(i*z2)", None).unwrap(), z(1).conj().scale(&-ComplexScalar::i()));
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_poly("z1 + w", None).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("w".into()));
        assert_eq!((err.line, err.column), (1, 6));
        let err = parse_poly("z1 +\n  * z2", None).unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        assert!(matches!(err.kind, ParseErrorKind::Syntax { ref expected, .. } if expected.contains(&"variable".to_string())));
        assert_eq!(parse_poly("z1/z2", None).unwrap_err().kind, ParseErrorKind::Division);
        assert!(matches!(parse_poly("(z1", None).unwrap_err().kind, ParseErrorKind::Syntax { .. }));
    }

    #[test]
    fn explicit_variable_count() {
        assert_eq!(parse_poly("z1", Some(3)).unwrap().n(), 3);
        assert!(parse_poly("z3", Some(2)).is_err());
    }
}
