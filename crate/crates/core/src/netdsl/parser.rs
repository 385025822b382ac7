use indexmap::IndexMap;

use super::value::parse_value;
use super::{CircuitSpec, Instance, TopologyNode, Waveform};
use crate::device::{MemristorModel, RateEdgeParams};
use crate::error::{Error, Location, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Literal(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    at: Location,
}

fn err<T>(at: Location, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse { location: at, message: message.into() })
}

fn lex_line(line: &str, lineno: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = line.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let at = Location { line: lineno, column: i + 1 };
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let after_value_sep =
            matches!(out.last().map(|t| &t.tok), Some(Tok::Sym('=')) | Some(Tok::Sym(',')) | Some(Tok::Sym('[')));
        let starts_number = c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit))
            || ((c == '-' || c == '+')
                && after_value_sep
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == '.'));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() {
                let ch = chars[i];
                let exp_sign = (ch == '+' || ch == '-')
                    && matches!(chars[i - 1], 'e' | 'E')
                    && i >= 2
                    && (chars[i - 2].is_ascii_digit() || chars[i - 2] == '.');
                if ch.is_ascii_alphanumeric() || ch == '.' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Literal(chars[start..i].iter().collect()), at });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), at });
        } else if "=[],()+|:".contains(c) {
            out.push(Token { tok: Tok::Sym(c), at });
            i += 1;
        } else {
            return err(at, format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

/// Cursor over one statement's tokens.
struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    eol: Location,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> Location {
        self.peek().map_or(self.eol, |t| t.at)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn is_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c)
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.is_sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            err(self.here(), format!("expected `{c}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Location)> {
        match self.next() {
            Some(Token { tok: Tok::Ident(s), at }) => Ok((s.clone(), *at)),
            Some(t) => err(t.at, format!("expected {what}")),
            None => err(self.eol, format!("expected {what}")),
        }
    }

    fn number(&mut self) -> Result<(f64, Location)> {
        match self.next() {
            Some(Token { tok: Tok::Literal(s), at }) => match parse_value(s) {
                Ok(v) => Ok((v, *at)),
                Err(_) => err(*at, format!("malformed numeric literal `{s}`")),
            },
            Some(t) => err(t.at, "expected a number"),
            None => err(self.eol, "expected a number"),
        }
    }

    fn done(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => err(t.at, "unexpected trailing input"),
        }
    }
}

#[derive(Debug, Clone)]
enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

/// `key=value` pairs; values are numbers or `[a, b, ...]` lists.
fn key_values(cur: &mut Cursor) -> Result<Vec<(String, Location, Value)>> {
    let mut out: Vec<(String, Location, Value)> = Vec::new();
    while cur.peek().is_some() {
        let (key, at) = cur.ident("a key")?;
        if out.iter().any(|(k, _, _)| k.eq_ignore_ascii_case(&key)) {
            return err(at, format!("duplicate key {key}"));
        }
        cur.expect_sym('=')?;
        let value = if cur.is_sym('[') {
            cur.next();
            let mut items = vec![cur.number()?.0];
            while cur.is_sym(',') {
                cur.next();
                items.push(cur.number()?.0);
            }
            cur.expect_sym(']')?;
            Value::List(items)
        } else {
            Value::Scalar(cur.number()?.0)
        };
        out.push((key, at, value));
    }
    Ok(out)
}

#[derive(Debug)]
enum RawNode {
    Leaf { name: String, model: Option<(String, Location)>, at: Location },
    Series(Vec<RawNode>),
    Parallel(Vec<RawNode>),
}

fn parse_expr(cur: &mut Cursor) -> Result<RawNode> {
    let mut terms = vec![parse_term(cur)?];
    while cur.is_sym('+') {
        cur.next();
        terms.push(parse_term(cur)?);
    }
    Ok(if terms.len() == 1 { terms.pop().unwrap() } else { RawNode::Series(terms) })
}

fn parse_term(cur: &mut Cursor) -> Result<RawNode> {
    let mut factors = vec![parse_factor(cur)?];
    while cur.is_sym('|') {
        cur.next();
        factors.push(parse_factor(cur)?);
    }
    Ok(if factors.len() == 1 { factors.pop().unwrap() } else { RawNode::Parallel(factors) })
}

fn parse_factor(cur: &mut Cursor) -> Result<RawNode> {
    if cur.is_sym('(') {
        cur.next();
        let e = parse_expr(cur)?;
        cur.expect_sym(')')?;
        return Ok(e);
    }
    let (name, at) = cur.ident("an element name or `(`")?;
    let model = if cur.is_sym(':') {
        cur.next();
        Some(cur.ident("a model name")?)
    } else {
        None
    };
    Ok(RawNode::Leaf { name, model, at })
}

struct ModelDecl {
    at: Location,
    kv: Vec<(String, Location, Value)>,
    name: String,
}

fn build_model(decl: &ModelDecl) -> Result<MemristorModel> {
    let get =
        |key: &str| decl.kv.iter().find(|(k, _, _)| k.eq_ignore_ascii_case(key)).map(|(_, at, v)| (*at, v.clone()));
    for (k, at, _) in &decl.kv {
        let known = ["states", "R", "tau", "V", "tau_up", "V_up", "tau_down", "V_down"];
        if !known.iter().any(|n| n.eq_ignore_ascii_case(k)) {
            return err(*at, format!("unknown model parameter {k}"));
        }
    }
    let resistances = match get("R") {
        Some((_, Value::List(v))) => v,
        Some((at, Value::Scalar(_))) => return err(at, "R must be a list of resistances"),
        None => return err(decl.at, format!("model {} needs R=[...]", decl.name)),
    };
    let k = resistances.len();
    if let Some((at, v)) = get("states") {
        match v {
            Value::Scalar(s) if s == k as f64 => {}
            _ => return err(at, format!("states does not match the {k} listed resistances")),
        }
    }
    if k < 2 {
        return err(decl.at, format!("model {} needs at least two states", decl.name));
    }
    let edges = k - 1;
    let list = |key: &str, fallback: &str| -> Result<Vec<f64>> {
        let found = get(key).or_else(|| get(fallback));
        match found {
            Some((_, Value::Scalar(s))) => Ok(vec![s; edges]),
            Some((at, Value::List(v))) => {
                if v.len() == edges {
                    Ok(v)
                } else {
                    err(at, format!("{key} needs {edges} entries, got {}", v.len()))
                }
            }
            None => err(decl.at, format!("model {} is missing {key}", decl.name)),
        }
    };
    let zip = |tau: Vec<f64>, v: Vec<f64>| -> Vec<RateEdgeParams> {
        tau.into_iter().zip(v).map(|(t, v)| RateEdgeParams::new(t, v)).collect()
    };
    let model = MemristorModel {
        name: decl.name.clone(),
        resistances,
        up_edges: zip(list("tau_up", "tau")?, list("V_up", "V")?),
        down_edges: zip(list("tau_down", "tau")?, list("V_down", "V")?),
    };
    if let Some(v) = model.validate().first() {
        return err(decl.at, format!("model {}: {v}", decl.name));
    }
    Ok(model)
}

fn build_source(kind: &str, at: Location, kv: &[(String, Location, Value)]) -> Result<Waveform> {
    let scalar = |names: &[&str]| -> Result<Option<f64>> {
        for (k, at, v) in kv {
            if names.iter().any(|n| n.eq_ignore_ascii_case(k)) {
                return match v {
                    Value::Scalar(s) => Ok(Some(*s)),
                    Value::List(_) => err(*at, format!("{k} must be a single value")),
                };
            }
        }
        Ok(None)
    };
    let check_keys = |allowed: &[&str]| -> Result<()> {
        for (k, at, _) in kv {
            if !allowed.iter().any(|n| n.eq_ignore_ascii_case(k)) {
                return err(*at, format!("unknown {kind} source parameter {k}"));
            }
        }
        Ok(())
    };
    match kind.to_ascii_lowercase().as_str() {
        "dc" => {
            check_keys(&["V", "amp"])?;
            let amplitude = scalar(&["V", "amp"])?.map_or_else(|| err(at, "dc source needs V=<volts>"), Ok)?;
            Ok(Waveform::Dc { amplitude })
        }
        "sine" | "sin" => {
            check_keys(&["amp", "freq", "phase"])?;
            let amplitude = scalar(&["amp"])?.map_or_else(|| err(at, "sine source needs amp="), Ok)?;
            let frequency = scalar(&["freq"])?.map_or_else(|| err(at, "sine source needs freq="), Ok)?;
            if frequency <= 0.0 {
                return err(at, "sine frequency must be positive");
            }
            let phase = scalar(&["phase"])?.unwrap_or(0.0);
            Ok(Waveform::Sine { amplitude, frequency, phase })
        }
        other => err(at, format!("unknown source kind {other}")),
    }
}

/// Parse `.mn` text into a validated [`CircuitSpec`].
pub fn parse_circuit(text: &str) -> Result<CircuitSpec> {
    let mut model_decls: Vec<ModelDecl> = Vec::new();
    let mut fixed_resistors: IndexMap<String, f64> = IndexMap::new();
    let mut resistor_at: Vec<Location> = Vec::new();
    let mut source: Option<Waveform> = None;
    let mut net: Option<(RawNode, Location)> = None;
    let mut inits: Vec<(String, Location, f64, Location)> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = lex_line(line, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let eol = Location { line: lineno, column: line.chars().count() + 1 };
        let mut cur = Cursor { toks: &toks, pos: 0, eol };
        let (kw, kw_at) = cur.ident("a statement keyword")?;
        match kw.to_ascii_lowercase().as_str() {
            "model" => {
                let (name, at) = cur.ident("a model name")?;
                if model_decls.iter().any(|m| m.name == name) {
                    return err(at, format!("duplicate model {name}"));
                }
                let kv = key_values(&mut cur)?;
                model_decls.push(ModelDecl { at, kv, name });
            }
            "res" => {
                let (name, at) = cur.ident("a resistor name")?;
                if fixed_resistors.contains_key(&name) {
                    return err(at, format!("duplicate name {name}"));
                }
                let (value, vat) = cur.number()?;
                if !(value > 0.0) {
                    return err(vat, "resistance must be positive");
                }
                cur.done()?;
                fixed_resistors.insert(name, value);
                resistor_at.push(at);
            }
            "source" => {
                if source.is_some() {
                    return err(kw_at, "only one source statement is allowed");
                }
                let (kind, at) = cur.ident("a source kind (dc or sine)")?;
                let kv = key_values(&mut cur)?;
                source = Some(build_source(&kind, at, &kv)?);
            }
            "net" => {
                if net.is_some() {
                    return err(kw_at, "only one net statement is allowed");
                }
                let e = parse_expr(&mut cur)?;
                cur.done()?;
                net = Some((e, kw_at));
            }
            "init" => {
                if cur.peek().is_none() {
                    return err(cur.here(), "expected name=state");
                }
                while cur.peek().is_some() {
                    let (name, at) = cur.ident("an instance name")?;
                    cur.expect_sym('=')?;
                    let (v, vat) = cur.number()?;
                    inits.push((name, at, v, vat));
                }
            }
            _ => return err(kw_at, format!("unknown statement {kw}")),
        }
    }

    let end = Location { line: text.lines().count().max(1), column: 1 };
    let mut models: IndexMap<String, MemristorModel> = IndexMap::new();
    for decl in &model_decls {
        models.insert(decl.name.clone(), build_model(decl)?);
    }
    let (raw, net_at) = net.ok_or_else(|| Error::Parse { location: end, message: "missing net statement".into() })?;
    let source = source.ok_or_else(|| Error::Parse { location: end, message: "missing source statement".into() })?;

    let mut instances: IndexMap<String, Instance> = IndexMap::new();
    let mut used: std::collections::HashSet<String> = Default::default();
    let topology = resolve(&raw, &models, &fixed_resistors, &mut instances, &mut used)?;
    for (i, name) in fixed_resistors.keys().enumerate() {
        if !used.contains(name) {
            return err(resistor_at[i], format!("resistor {name} is not part of the net"));
        }
    }
    if instances.is_empty() {
        return err(net_at, "the net contains no memristor");
    }

    for (name, at, v, vat) in inits {
        let Some(inst) = instances.get_mut(&name) else {
            return err(at, format!("unknown instance {name}"));
        };
        let k = models[&inst.model].states();
        if v.fract() != 0.0 || v < 0.0 || v >= k as f64 {
            return err(vat, format!("initial state {v} out of range for {name} ({k} states)"));
        }
        inst.initial_state = v as usize;
    }

    let spec = CircuitSpec { models, instances, fixed_resistors, topology, source };
    spec.validate().map_err(|e| Error::Parse { location: net_at, message: e.to_string() })?;
    Ok(spec)
}

fn resolve(
    node: &RawNode,
    models: &IndexMap<String, MemristorModel>,
    resistors: &IndexMap<String, f64>,
    instances: &mut IndexMap<String, Instance>,
    used: &mut std::collections::HashSet<String>,
) -> Result<TopologyNode> {
    let mut children = |c: &[RawNode]| -> Result<Vec<TopologyNode>> {
        c.iter().map(|n| resolve(n, models, resistors, instances, used)).collect()
    };
    match node {
        RawNode::Series(c) => Ok(TopologyNode::Series(children(c)?)),
        RawNode::Parallel(c) => Ok(TopologyNode::Parallel(children(c)?)),
        RawNode::Leaf { name, model, at } => {
            if !used.insert(name.clone()) {
                return err(*at, format!("duplicate name {name}"));
            }
            match model {
                Some((m, mat)) => {
                    if resistors.contains_key(name) {
                        return err(*at, format!("duplicate name {name}"));
                    }
                    if !models.contains_key(m) {
                        return err(*mat, format!("unknown model {m}"));
                    }
                    instances.insert(name.clone(), Instance { model: m.clone(), initial_state: 0 });
                }
                None if resistors.contains_key(name) => {}
                None if models.len() == 1 => {
                    let m = models.keys().next().unwrap().clone();
                    instances.insert(name.clone(), Instance { model: m, initial_state: 0 });
                }
                None => {
                    return err(*at, format!("unknown element {name}"));
                }
            }
            Ok(TopologyNode::Leaf(name.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2A: &str = "\
# ac-driven binary memristor
model B states=2 R=[10k,1k] tau=3e5 V=0.05
source sine amp=1 freq=200
net (m1:B)
";

    #[test]
    fn single_memristor_circuit() {
        let spec = parse_circuit(FIG2A).unwrap();
        assert_eq!(spec.instances.len(), 1);
        assert_eq!(spec.instances["m1"].model, "B");
        assert_eq!(spec.instances["m1"].initial_state, 0);
        assert_eq!(spec.topology, TopologyNode::Leaf("m1".into()));
        assert_eq!(spec.source, Waveform::Sine { amplitude: 1.0, frequency: 200.0, phase: 0.0 });
        let m = &spec.models["B"];
        assert_eq!(m.resistances, vec![10e3, 1e3]);
        assert_eq!(m.up_edges, vec![RateEdgeParams::new(3e5, 0.05)]);
        assert_eq!(m.down_edges, vec![RateEdgeParams::new(3e5, 0.05)]);
    }

    #[test]
    fn five_in_series_with_default_model() {
        let spec =
            parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=5\nnet (m1 + m2 + m3 + m4 + m5)\n").unwrap();
        assert_eq!(spec.instances.len(), 5);
        assert_eq!(spec.source, Waveform::Dc { amplitude: 5.0 });
        match &spec.topology {
            TopologyNode::Series(c) => assert_eq!(c.len(), 5),
            t => panic!("expected series, got {t:?}"),
        }
        let names: Vec<_> = spec.instances.keys().cloned().collect();
        assert_eq!(names, ["m1", "m2", "m3", "m4", "m5"]);
    }

    #[test]
    fn precedence_parallel_binds_tighter() {
        let spec =
            parse_circuit("model B R=[10k,1k] tau=3e5 V=.05\nres R1 1k\nsource dc V=1\nnet a + b | R1 + (c + d)\n")
                .unwrap();
        let leaf = |s: &str| TopologyNode::Leaf(s.to_string());
        assert_eq!(
            spec.topology,
            TopologyNode::Series(vec![
                leaf("a"),
                TopologyNode::Parallel(vec![leaf("b"), leaf("R1")]),
                TopologyNode::Series(vec![leaf("c"), leaf("d")]),
            ])
        );
    }

    #[test]
    fn multistate_model_and_init() {
        let spec = parse_circuit(
            "model T states=3 R=[10k,3k,1k] tau_up=[3e5,3e5] V_up=[0.05,0.07] tau_down=[3e5,3e5] V_down=[0.05,0.07]\n\
             source dc V=1.5\nnet m1:T + m2:T\ninit m2=2\n",
        )
        .unwrap();
        assert_eq!(spec.instances["m2"].initial_state, 2);
        assert_eq!(spec.models["T"].up_edges[1], RateEdgeParams::new(3e5, 0.07));
    }

    fn location(text: &str) -> (Location, String) {
        match parse_circuit(text) {
            Err(Error::Parse { location, message }) => (location, message),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_model_is_located() {
        let (at, msg) = location("model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1:X\n");
        assert_eq!(msg, "unknown model X");
        assert_eq!(at, Location { line: 3, column: 8 });
    }

    #[test]
    fn error_paths() {
        let base = "model B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\n";
        let cases = [
            (format!("{base}net m1 + m1\n"), "duplicate name m1"),
            (format!("{base}net m1:B\ninit m1=2\n"), "out of range"),
            (format!("{base}net m1:B\ninit m9=1\n"), "unknown instance"),
            (format!("{base}net m1:B +\n"), "expected an element name"),
            (format!("{base}net (m1:B\n"), "expected `)`"),
            (format!("{base}net m1:B\nnet m2:B\n"), "only one net"),
            (format!("{base}source dc V=2\nnet m1:B\n"), "only one source"),
            (format!("{base}net m1:B $\n"), "unexpected character"),
            (format!("{base}bogus x\nnet m1:B\n"), "unknown statement"),
            ("model B R=[10k,1k] tau=3e5 V=.05\nnet m1:B\n".to_string(), "missing source"),
            ("model B R=[1k,10k] tau=3e5 V=.05\nsource dc V=1\nnet m1:B\n".into(), "strictly decrease"),
            ("model B R=[10k,1k] tau=3e5 V=1x\nsource dc V=1\nnet m1:B\n".into(), "malformed numeric"),
            (
                "model B R=[10k,1k,5] tau_up=[1,1] V=1 tau_down=[1] \nsource dc V=1\nnet m1:B\n".into(),
                "needs 2 entries",
            ),
        ];
        for (text, needle) in cases {
            let (at, msg) = location(&text);
            assert!(at.line >= 1);
            assert!(msg.contains(needle), "`{msg}` should mention `{needle}`");
        }
    }

    #[test]
    fn bare_name_needs_single_model() {
        let text = "model A R=[10k,1k] tau=3e5 V=.05\nmodel B R=[10k,1k] tau=3e5 V=.05\nsource dc V=1\nnet m1\n";
        let (_, msg) = location(text);
        assert!(msg.contains("unknown element m1"));
    }
}
