//! Structural lint and semantic comparison of emitted netlists.

use std::collections::{BTreeSet, HashMap};

use super::expr::{parse_expression, Polynomial};
use crate::error::{Error, Result};
use crate::netdsl::parse_value;

/// One netlist statement, lowercased, split on whitespace.
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub tokens: Vec<String>,
}

impl Statement {
    fn keyword(&self) -> &str {
        &self.tokens[0]
    }

    fn is_behavioral(&self) -> bool {
        self.keyword().starts_with('b')
    }

    /// Expression text of `B... I=expr`.
    fn behavioral_expr(&self) -> Option<String> {
        if !self.is_behavioral() || self.tokens.len() < 4 {
            return None;
        }
        self.tokens[3..].join("").strip_prefix("i=").map(str::to_string)
    }
}

/// Statements of a netlist with comment and blank lines dropped. `.param`
/// lines are exploded into one statement per assignment.
pub fn parse_netlist(text: &str) -> Vec<Statement> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let tokens: Vec<String> = lower.split_whitespace().map(str::to_string).collect();
        if tokens[0] == ".param" {
            for assignment in &tokens[1..] {
                out.push(Statement { tokens: vec![".param".into(), assignment.clone()] });
            }
        } else {
            out.push(Statement { tokens });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Text(String),
    Expr(Polynomial),
    Args(Vec<f64>),
}

fn numeric(tok: &str) -> Option<f64> {
    parse_value(tok).ok()
}

fn normalize(st: &Statement) -> Result<Vec<Token>> {
    if let Some(expr) = st.behavioral_expr() {
        let mut out: Vec<Token> = st.tokens[..3].iter().map(|t| Token::Text(t.clone())).collect();
        out.push(Token::Expr(parse_expression(&expr)?));
        return Ok(out);
    }
    // rejoin parenthesized argument lists split on whitespace
    let mut merged: Vec<String> = Vec::new();
    let mut depth = 0i32;
    for t in &st.tokens {
        if depth > 0 {
            let last = merged.last_mut().expect("open group");
            last.push(' ');
            last.push_str(t);
        } else {
            merged.push(t.clone());
        }
        depth += t.matches('(').count() as i32 - t.matches(')').count() as i32;
    }
    let mut out = Vec::new();
    for t in &merged {
        if let Some(inner) = t.strip_prefix("sine(").and_then(|r| r.strip_suffix(')')) {
            out.push(Token::Text("sine".into()));
            let mut args = Vec::new();
            for a in inner.split([' ', ',']).filter(|a| !a.is_empty()) {
                args.push(numeric(a).ok_or_else(|| Error::Emission(format!("bad SINE argument {a}")))?);
            }
            while args.last() == Some(&0.0) {
                args.pop();
            }
            out.push(Token::Args(args));
        } else if let Some((k, v)) = t.split_once('=') {
            out.push(Token::Text(format!("{k}=")));
            out.push(match numeric(v) {
                Some(x) => Token::Number(x),
                None => Token::Text(v.to_string()),
            });
        } else {
            out.push(match numeric(t) {
                Some(x) => Token::Number(x),
                None => Token::Text(t.clone()),
            });
        }
    }
    Ok(out)
}

fn tokens_equal(a: &[Token], b: &[Token]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (Token::Number(p), Token::Number(q)) => (p - q).abs() <= 1e-12 * p.abs().max(q.abs()),
            (Token::Expr(p), Token::Expr(q)) => p.approx_eq(q),
            (Token::Args(p), Token::Args(q)) => {
                p.len() == q.len() && p.iter().zip(q).all(|(p, q)| (p - q).abs() <= 1e-12 * p.abs().max(q.abs()))
            }
            (Token::Text(p), Token::Text(q)) => p == q,
            _ => false,
        })
}

/// Whether two netlists contain the same statements up to order, case,
/// whitespace, comments, numeric spelling (`.05` vs `5E-2`, trailing zero
/// SINE arguments) and algebraic rearrangement of behavioral expressions.
pub fn netlists_equivalent(a: &str, b: &str) -> Result<bool> {
    let na: Vec<Vec<Token>> = parse_netlist(a).iter().map(normalize).collect::<Result<_>>()?;
    let nb: Vec<Vec<Token>> = parse_netlist(b).iter().map(normalize).collect::<Result<_>>()?;
    if na.len() != nb.len() {
        return Ok(false);
    }
    let mut used = vec![false; nb.len()];
    for x in &na {
        match nb.iter().enumerate().position(|(j, y)| !used[j] && tokens_equal(x, y)) {
            Some(j) => used[j] = true,
            None => return Ok(false),
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintIssue(pub String);

impl std::fmt::Display for LintIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Symbols passed as the first two arguments of every `gm(...)` call.
fn gm_symbols(expr: &str, out: &mut BTreeSet<String>) {
    let mut rest = expr;
    while let Some(i) = rest.find("gm(") {
        let args = &rest[i + 3..];
        let mut parts = args.splitn(3, ',');
        for _ in 0..2 {
            if let Some(p) = parts.next() {
                out.insert(p.trim().to_string());
            }
        }
        rest = &rest[i + 3..];
    }
}

/// Structural checks on a master-equation netlist.
pub fn lint(text: &str) -> Vec<LintIssue> {
    let mut issues = Vec::new();
    let mut issue = |s: String| issues.push(LintIssue(s));
    let statements = parse_netlist(text);

    for directive in [".tran", ".func", ".backanno", ".end"] {
        let n = statements.iter().filter(|s| s.keyword() == directive).count();
        if n != 1 {
            issue(format!("expected exactly one {directive}, found {n}"));
        }
    }
    if statements.last().is_some_and(|s| s.keyword() != ".end") {
        issue(".end is not the last statement".into());
    }

    let mut names: HashMap<&str, usize> = HashMap::new();
    for s in statements.iter().filter(|s| !s.keyword().starts_with('.')) {
        *names.entry(s.keyword()).or_default() += 1;
    }
    for (name, n) in &names {
        if *n > 1 {
            issue(format!("element {name} defined {n} times"));
        }
    }

    // probability nodes: p<k>
    let is_p = |n: &str| n.len() > 1 && n.starts_with('p') && n[1..].bytes().all(|b| b.is_ascii_digit());
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    let mut caps: HashMap<String, usize> = HashMap::new();
    let mut sources: HashMap<String, usize> = HashMap::new();
    let mut ic_total = 0.0;
    let mut total = Polynomial::default();
    let mut used = BTreeSet::new();
    for s in &statements {
        let t = &s.tokens;
        match t[0].as_bytes()[0] {
            b'c' if t.len() >= 4 && is_p(&t[1]) && t[2] == "0" => {
                nodes.insert(t[1].clone());
                *caps.entry(t[1].clone()).or_default() += 1;
                if parse_value(&t[3]).ok() != Some(1.0) {
                    issue(format!("{} is not 1 F", t[0]));
                }
                match t.iter().find_map(|x| x.strip_prefix("ic=")).map(parse_value) {
                    Some(Ok(v)) => ic_total += v,
                    _ => issue(format!("{} has no initial condition", t[0])),
                }
            }
            b'b' => {
                let Some(expr) = s.behavioral_expr() else {
                    issue(format!("{} has no current expression", t[0]));
                    continue;
                };
                gm_symbols(&expr, &mut used);
                if is_p(&t[2]) && t[1] == "0" {
                    nodes.insert(t[2].clone());
                    *sources.entry(t[2].clone()).or_default() += 1;
                    match parse_expression(&expr) {
                        Ok(p) => total = total.add(&p, 1.0),
                        Err(e) => issue(format!("{}: {e}", t[0])),
                    }
                } else if let Err(e) = parse_expression(&expr) {
                    issue(format!("{}: {e}", t[0]));
                }
            }
            _ => {}
        }
    }
    for n in &nodes {
        let (c, b) = (caps.get(n).copied().unwrap_or(0), sources.get(n).copied().unwrap_or(0));
        if c != 1 || b != 1 {
            issue(format!("node {n} has {c} capacitors and {b} sources"));
        }
    }
    if !nodes.is_empty() && (ic_total - 1.0).abs() > 1e-12 {
        issue(format!("initial conditions sum to {ic_total}"));
    }
    if !total.is_zero() {
        issue(format!("probability sources do not sum to zero: {}", total.canonical()));
    }
    let defined: BTreeSet<String> = statements
        .iter()
        .filter(|s| s.keyword() == ".param")
        .filter_map(|s| s.tokens[1].split_once('=').map(|(k, _)| k.to_string()))
        .collect();
    for missing in used.difference(&defined) {
        issue(format!("parameter {missing} is used but not defined"));
    }
    for unused in defined.difference(&used) {
        issue(format!("parameter {unused} is defined but not used"));
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
* demo
B1 0 p0 I=(-gm(tau01,V01,V(Va))*V(p0))*u(V(Va))+(gm(tau10,V10,-V(Va))*V(p1))*u(-V(Va))
B2 0 p1 I=(gm(tau01,V01,V(Va))*V(p0))*u(V(Va))+(-gm(tau10,V10,-V(Va))*V(p1))*u(-V(Va))
R1 Va 0 10k
R2 Va 0 1k
R3 VI 0 1k
C1 p0 0 1 IC=1
C2 p1 0 1 IC=0
B3 0 VI I=I(R1)*V(p0)+I(R2)*V(p1)
V1 Va 0 SINE(0 1 200)
.func gm(x,y,z){1/(x*exp(-z/y))}
.param tau01=3E5 V01=.05
.param tau10=3E5 V10=.05
.tran 0 .1 .05 1E-6
.backanno
.end
";

    #[test]
    fn clean_netlist_passes() {
        assert_eq!(lint(GOOD), vec![]);
    }

    #[test]
    fn each_rule_fires() {
        let broken = GOOD.replace("IC=1", "IC=0.5");
        assert!(lint(&broken).iter().any(|i| i.0.contains("initial conditions")));
        let broken = GOOD.replace("(-gm(tau10,V10,-V(Va))*V(p1))", "(-gm(tau10,V10,-V(Va))*V(p0))");
        assert!(lint(&broken).iter().any(|i| i.0.contains("sum to zero")));
        let broken = GOOD.replace(".param tau10=3E5 V10=.05\n", "");
        assert!(lint(&broken).iter().any(|i| i.0.contains("tau10 is used")));
        let broken = GOOD.replace(".backanno\n", ".backanno\n.backanno\n");
        assert!(lint(&broken).iter().any(|i| i.0.contains(".backanno")));
        let broken = GOOD.replace("C2 p1 0 1 IC=0\n", "");
        assert!(lint(&broken).iter().any(|i| i.0.contains("node p1")));
        let broken = GOOD.replace("R2 Va", "R1 Va");
        assert!(lint(&broken).iter().any(|i| i.0.contains("defined 2 times")));
        let broken = format!("{GOOD}.param extra=1\n").replace(".end\n.param extra=1", ".param extra=1\n.end");
        assert!(lint(&broken).iter().any(|i| i.0.contains("extra is defined")));
    }

    #[test]
    fn equivalence_ignores_spelling_but_not_content() {
        let respelled = GOOD
            .replace("SINE(0 1 200)", "SINE(0 1 200 0 0 0 0)")
            .replace(".05 1E-6", "0.05 10E-7")
            .replace(".func", ".FUNC")
            .replace("R1 Va 0 10k\nR2 Va 0 1k", "R2 Va 0 1k\nR1 Va 0 10k");
        assert!(netlists_equivalent(GOOD, &respelled).unwrap());
        assert!(!netlists_equivalent(GOOD, &GOOD.replace("R1 Va 0 10k", "R1 Va 0 9k")).unwrap());
        assert!(!netlists_equivalent(GOOD, &GOOD.replace("V1 Va 0 SINE(0 1 200)\n", "")).unwrap());
        assert!(!netlists_equivalent(GOOD, &GOOD.replace("*V(p0))*u(V(Va))+(gm", "*V(p1))*u(V(Va))+(gm")).unwrap());
    }
}
