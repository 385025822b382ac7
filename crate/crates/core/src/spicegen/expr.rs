//! Behavioral-source expressions reduced to a canonical sum of monomials, so
//! that algebraically equal expressions written differently compare equal.
//!
//! Only `+ - * /`, parentheses, numbers, identifiers and function calls are
//! understood. Function calls are opaque atoms whose arguments are themselves
//! canonicalized; division by anything but a constant becomes an atom too.

use std::collections::BTreeMap;

use crate::error::{Error, Location, Result};
use crate::netdsl::parse_value;

/// Monomial (sorted atom list) -> coefficient.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polynomial(BTreeMap<Vec<String>, f64>);

const ZERO_TOL: f64 = 1e-12;

impl Polynomial {
    pub fn constant(c: f64) -> Self {
        let mut m = BTreeMap::new();
        if c != 0.0 {
            m.insert(Vec::new(), c);
        }
        Self(m)
    }

    pub fn atom(name: String) -> Self {
        Self(BTreeMap::from([(vec![name], 1.0)]))
    }

    pub fn add(&self, other: &Self, sign: f64) -> Self {
        let mut out = self.0.clone();
        for (k, v) in &other.0 {
            *out.entry(k.clone()).or_insert(0.0) += sign * v;
        }
        Self(out).pruned()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        for (ka, va) in &self.0 {
            for (kb, vb) in &other.0 {
                let mut k: Vec<String> = ka.iter().chain(kb).cloned().collect();
                k.sort();
                *out.entry(k).or_insert(0.0) += va * vb;
            }
        }
        Self(out).pruned()
    }

    fn scale(&self, c: f64) -> Self {
        Self(self.0.iter().map(|(k, v)| (k.clone(), v * c)).collect()).pruned()
    }

    fn pruned(mut self) -> Self {
        let scale = self.0.values().fold(0.0f64, |m, v| m.max(v.abs()));
        self.0.retain(|_, v| v.abs() > ZERO_TOL * scale.max(1.0));
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn as_constant(&self) -> Option<f64> {
        match self.0.len() {
            0 => Some(0.0),
            1 => self.0.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    /// Same monomials, coefficients equal to a relative `1e-9`.
    pub fn approx_eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().all(|(k, a)| other.0.get(k).is_some_and(|b| (a - b).abs() <= 1e-9 * a.abs().max(b.abs())))
    }

    /// Deterministic text form, used for atoms built from sub-expressions.
    pub fn canonical(&self) -> String {
        if self.0.is_empty() {
            return "0".into();
        }
        self.0
            .iter()
            .map(|(k, v)| {
                let mut s = format!("{v:e}");
                for a in k {
                    s.push('*');
                    s.push_str(a);
                }
                s
            })
            .collect::<Vec<_>>()
            .join("+")
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

pub fn parse_expression(text: &str) -> Result<Polynomial> {
    let lower = text.to_ascii_lowercase();
    let mut p = Parser { src: lower.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse { location: Location { line: 1, column: self.pos + 1 }, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = acc.add(&rhs, if c == b'+' { 1.0 } else { -1.0 });
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    if self.src.get(self.pos) == Some(&b'*') {
                        return Err(self.error("`**` is not multiplication"));
                    }
                    acc = acc.mul(&self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.unary()?;
                    acc = match d.as_constant() {
                        Some(c) if c != 0.0 => acc.scale(1.0 / c),
                        _ => acc.mul(&Polynomial::atom(format!("inv({})", d.canonical()))),
                    };
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.scale(-1.0))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    let exp_sign = (c == b'+' || c == b'-') && self.src[self.pos - 1] == b'e';
                    if c.is_ascii_alphanumeric() || c == b'.' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let tok = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                parse_value(tok).map(Polynomial::constant).map_err(|_| self.error("bad number"))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii").to_string();
                if self.peek() != Some(b'(') {
                    return Ok(Polynomial::atom(name));
                }
                self.pos += 1;
                let mut args = Vec::new();
                if self.peek() == Some(b')') {
                    self.pos += 1;
                } else {
                    loop {
                        args.push(self.call_arg()?);
                        match self.peek() {
                            Some(b',') => self.pos += 1,
                            Some(b')') => {
                                self.pos += 1;
                                break;
                            }
                            _ => return Err(self.error("expected `,` or `)`")),
                        }
                    }
                }
                Ok(Polynomial::atom(format!("{name}({})", args.join(","))))
            }
            _ => Err(self.error("expected an operand")),
        }
    }

    /// Node references inside `v(...)`/`i(...)` are names, not expressions.
    fn call_arg(&mut self) -> Result<String> {
        Ok(self.expr()?.canonical())
    }
}
