//! Model configuration files and the built-in model catalog.
//!
//! A configuration is a list of statements separated by newlines or `;`:
//!
//! ```text
//! label = "heisenberg by hand"
//! g11 = 2; g22 = 2; g33 = 0
//! w = [-2*y, 2*x, 1]
//! ```
//!
//! Keys: `label`, `dim`, `coords = [..]`, upper-triangle metric entries
//! `gIJ` (or `g_I_J` beyond nine coordinates), `w = [..]` or `wI`, and for
//! rescaled CR models `cr = n` with `upsilon = expr`. Missing metric and
//! 1-form entries are zero. Default coordinates are `x1..xn`; in dimension 3
//! `x, y, t` are accepted as well.

use std::fmt;

use crate::cr::{coordinate_names, rescaled_kropina, CRModelSpec};
use crate::error::{Error, Result};
use crate::expr::{describe, tokenize, Expr, Parser, Tok, Token};
use crate::geometry::{euclidean, ExprModel, KropinaStructure};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub coords: Vec<String>,
    pub label: Option<String>,
    /// Row-major upper triangle; `None` entries are zero.
    pub metric: Vec<Option<Expr>>,
    pub oneform: Vec<Option<Expr>>,
    /// CR dimension and conformal factor of a rescaled Heisenberg model.
    pub upsilon: Option<(usize, Expr)>,
}

struct Statement {
    key: Token,
    name: String,
    body: Vec<Token>,
}

fn split_statements(toks: &[Token]) -> Result<Vec<Statement>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur: Vec<Token> = Vec::new();
    let mut flush = |cur: &mut Vec<Token>, end: &Token| -> Result<()> {
        if cur.is_empty() {
            return Ok(());
        }
        let key = cur[0].clone();
        let Tok::Ident(name) = key.tok.clone() else {
            return Err(Parser::syntax(&key, format!("expected a key, found {}", describe(&key.tok))));
        };
        match cur.get(1) {
            Some(t) if t.tok == Tok::Op('=') => {}
            Some(t) => return Err(Parser::syntax(t, format!("expected `=`, found {}", describe(&t.tok)))),
            None => return Err(Parser::syntax(end, "expected `=`")),
        }
        let mut body: Vec<Token> = cur.drain(..).skip(2).collect();
        body.push(Token { tok: Tok::Eof, line: end.line, col: end.col });
        out.push(Statement { key, name, body });
        Ok(())
    };
    for t in toks {
        match t.tok {
            Tok::Op('(') | Tok::Op('[') => depth += 1,
            Tok::Op(')') | Tok::Op(']') => depth = depth.saturating_sub(1),
            _ => {}
        }
        let separator = t.tok == Tok::Eof || (depth == 0 && matches!(t.tok, Tok::Newline | Tok::Op(';')));
        if separator {
            flush(&mut cur, t)?;
        } else if t.tok != Tok::Newline {
            cur.push(t.clone());
        }
    }
    Ok(out)
}

/// `g12` / `g_1_2` → `(0, 1)`; `w3` / `w_3` → `2`.
fn indices(name: &str, prefix: char, count: usize) -> Option<Vec<usize>> {
    let rest = name.strip_prefix(prefix)?;
    let parts: Vec<&str> = if let Some(r) = rest.strip_prefix('_') {
        r.split('_').collect()
    } else if rest.len() == count && rest.chars().all(|c| c.is_ascii_digit()) {
        (0..count).map(|k| &rest[k..k + 1]).collect()
    } else {
        return None;
    };
    if parts.len() != count {
        return None;
    }
    parts.iter().map(|p| p.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1)).collect()
}

fn list_len(body: &[Token]) -> usize {
    let mut depth = 0i32;
    let mut commas = 0;
    for t in body {
        match t.tok {
            Tok::Op('(') | Tok::Op('[') => depth += 1,
            Tok::Op(')') | Tok::Op(']') => depth -= 1,
            Tok::Op(',') if depth == 1 => commas += 1,
            _ => {}
        }
    }
    commas + 1
}

fn dimension_error(t: &Token, msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(format!("line {}, column {}: {}", t.line, t.col, msg.into()))
}

/// Parses `[e1, e2, ...]` with a fresh parser over `body`.
fn parse_list<T>(body: &[Token], names: &[String], mut item: impl FnMut(&mut Parser) -> Result<T>) -> Result<Vec<T>> {
    let mut p = Parser::new(body, names);
    p.expect_op('[')?;
    p.enter();
    let mut out = vec![item(&mut p)?];
    loop {
        let t = p.next();
        match t.tok {
            Tok::Op(',') => out.push(item(&mut p)?),
            Tok::Op(']') => break,
            _ => return Err(Parser::syntax(&t, format!("expected `,` or `]`, found {}", describe(&t.tok)))),
        }
    }
    p.leave();
    finish(&mut p)?;
    Ok(out)
}

fn finish(p: &mut Parser) -> Result<()> {
    let t = p.next();
    if t.tok != Tok::Eof {
        return Err(Parser::syntax(&t, format!("unexpected {}", describe(&t.tok))));
    }
    Ok(())
}

fn parse_single(body: &[Token], names: &[String]) -> Result<Expr> {
    let mut p = Parser::new(body, names);
    let e = p.expr()?;
    finish(&mut p)?;
    Ok(e)
}

fn default_coords(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Accepted names: the declared coordinates, or `x1..xn` plus `x, y, t`
/// when `n = 3`. Returns names in index order and aliases.
fn resolution_names(coords: &[String], declared: bool) -> Vec<Vec<String>> {
    let mut sets = vec![coords.to_vec()];
    if !declared && coords.len() == 3 {
        sets.push(vec!["x".into(), "y".into(), "t".into()]);
    }
    sets
}

/// Tries each name set in turn, keeping the first error for reporting.
fn parse_with(body: &[Token], sets: &[Vec<String>]) -> Result<Expr> {
    let mut first_err = None;
    for names in sets {
        match parse_single(body, names) {
            Ok(e) => return Ok(e),
            Err(e @ Error::UnknownSymbol { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(first_err.expect("at least one name set"))
}

fn parse_list_with(body: &[Token], sets: &[Vec<String>]) -> Result<Vec<Expr>> {
    let mut first_err = None;
    for names in sets {
        match parse_list(body, names, |p| p.expr()) {
            Ok(e) => return Ok(e),
            Err(e @ Error::UnknownSymbol { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(first_err.expect("at least one name set"))
}

pub fn parse_model_config(text: &str) -> Result<ModelConfig> {
    let toks = tokenize(text)?;
    let stmts = split_statements(&toks)?;
    if stmts.is_empty() {
        return Err(Error::Syntax { line: 1, column: 1, message: "empty model configuration".into() });
    }

    // first pass: dimension and coordinate names
    let mut dim: Option<(usize, Token)> = None;
    let mut coords: Option<Vec<String>> = None;
    let mut cr: Option<usize> = None;
    let mut w_len: Option<usize> = None;
    let mut max_index = 0usize;
    for st in &stmts {
        match st.name.as_str() {
            "dim" | "cr" => {
                let mut p = Parser::new(&st.body, &[]);
                let t = p.next();
                let Tok::Num(v) = t.tok else {
                    return Err(Parser::syntax(&t, format!("expected an integer, found {}", describe(&t.tok))));
                };
                if v.fract() != 0.0 || v < 1.0 {
                    return Err(Parser::syntax(&t, format!("expected a positive integer, found {v}")));
                }
                finish(&mut p)?;
                if st.name == "dim" {
                    dim = Some((v as usize, st.key.clone()));
                } else {
                    cr = Some(v as usize);
                }
            }
            "coords" => {
                let names = parse_list(&st.body, &[], |p| {
                    let t = p.next();
                    match &t.tok {
                        Tok::Ident(s) => Ok(s.clone()),
                        other => Err(Parser::syntax(&t, format!("expected a coordinate name, found {}", describe(other)))),
                    }
                })?;
                coords = Some(names);
            }
            "w" => w_len = Some(list_len(&st.body)),
            other => {
                if let Some(ix) = indices(other, 'g', 2).or_else(|| indices(other, 'w', 1)) {
                    max_index = max_index.max(ix.iter().max().copied().unwrap_or(0) + 1);
                }
            }
        }
    }
    let n = if let Some((d, _)) = &dim {
        *d
    } else if let Some(c) = &coords {
        c.len()
    } else if let Some(m) = cr {
        2 * m + 1
    } else if let Some(l) = w_len {
        l
    } else if max_index > 0 {
        max_index
    } else {
        return Err(Error::DimensionMismatch("cannot infer the dimension; add `dim = n`".into()));
    };
    if let Some(m) = cr {
        if n != 2 * m + 1 {
            return Err(Error::DimensionMismatch(format!("cr = {m} needs dimension {}, found {n}", 2 * m + 1)));
        }
    }
    let declared = coords.is_some();
    let coords = match coords {
        Some(c) => {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!("{} coordinates declared for dimension {n}", c.len())));
            }
            c
        }
        None if cr.is_some() => coordinate_names(cr.unwrap_or(1)),
        None => default_coords(n),
    };
    let sets = resolution_names(&coords, declared || cr.is_some());

    // second pass: expressions
    let mut cfg = ModelConfig {
        dim: n,
        coords,
        label: None,
        metric: vec![None; n * n],
        oneform: vec![None; n],
        upsilon: None,
    };
    let mut seen_w = false;
    for st in &stmts {
        match st.name.as_str() {
            "dim" | "cr" | "coords" => {}
            "label" => {
                let mut p = Parser::new(&st.body, &[]);
                let t = p.next();
                let Tok::Str(s) = t.tok else {
                    return Err(Parser::syntax(&t, format!("expected a quoted label, found {}", describe(&t.tok))));
                };
                finish(&mut p)?;
                cfg.label = Some(s);
            }
            "upsilon" => {
                let m = cr.ok_or_else(|| Parser::syntax(&st.key, "`upsilon` needs `cr = n`"))?;
                cfg.upsilon = Some((m, parse_with(&st.body, &sets)?));
            }
            "w" => {
                let items = parse_list_with(&st.body, &sets)?;
                if items.len() != n {
                    return Err(dimension_error(&st.key, format!("w has {} entries, dimension is {n}", items.len())));
                }
                if seen_w || cfg.oneform.iter().any(Option::is_some) {
                    return Err(Parser::syntax(&st.key, "1-form given more than once"));
                }
                seen_w = true;
                cfg.oneform = items.into_iter().map(Some).collect();
            }
            other => {
                if let Some(ix) = indices(other, 'g', 2) {
                    let (i, j) = (ix[0].min(ix[1]), ix[0].max(ix[1]));
                    if j >= n {
                        return Err(dimension_error(&st.key, format!("`{other}` exceeds dimension {n}")));
                    }
                    if cfg.metric[i * n + j].is_some() {
                        return Err(Parser::syntax(&st.key, format!("metric entry ({}, {}) given more than once", i + 1, j + 1)));
                    }
                    cfg.metric[i * n + j] = Some(parse_with(&st.body, &sets)?);
                } else if let Some(ix) = indices(other, 'w', 1) {
                    if ix[0] >= n {
                        return Err(dimension_error(&st.key, format!("`{other}` exceeds dimension {n}")));
                    }
                    if seen_w || cfg.oneform[ix[0]].is_some() {
                        return Err(Parser::syntax(&st.key, format!("1-form entry {} given more than once", ix[0] + 1)));
                    }
                    cfg.oneform[ix[0]] = Some(parse_with(&st.body, &sets)?);
                } else {
                    return Err(Parser::syntax(&st.key, format!("unknown key `{other}`")));
                }
            }
        }
    }
    if cfg.upsilon.is_some() && (cfg.metric.iter().any(Option::is_some) || cfg.oneform.iter().any(Option::is_some)) {
        return Err(Error::Syntax { line: 1, column: 1, message: "give either `upsilon` or g and w, not both".into() });
    }
    if cfg.upsilon.is_none() && cfg.oneform.iter().all(Option::is_none) {
        return Err(Error::Syntax { line: 1, column: 1, message: "missing 1-form `w`".into() });
    }
    Ok(cfg)
}

impl ModelConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| "config".into())
    }

    /// Full row-major metric with the lower triangle mirrored.
    pub fn metric_exprs(&self) -> Vec<Expr> {
        let n = self.dim;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (i.min(j), i.max(j));
                out.push(self.metric[a * n + b].clone().unwrap_or(Expr::Const(0.0)));
            }
        }
        out
    }

    pub fn oneform_exprs(&self) -> Vec<Expr> {
        self.oneform.iter().map(|e| e.clone().unwrap_or(Expr::Const(0.0))).collect()
    }

    pub fn cr_spec(&self) -> Result<Option<CRModelSpec>> {
        match &self.upsilon {
            Some((m, u)) => Ok(Some(CRModelSpec::new(*m, u.clone(), self.label())?)),
            None => Ok(None),
        }
    }

    pub fn to_structure(&self) -> Result<KropinaStructure> {
        if let Some(spec) = self.cr_spec()? {
            return Ok(rescaled_kropina(&spec));
        }
        let model = ExprModel { metric: self.metric_exprs(), oneform: self.oneform_exprs() };
        Ok(KropinaStructure::new(model, self.label()))
    }
}

/// Canonical text; parsing it yields an equal configuration.
impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim;
        if let Some(l) = &self.label {
            writeln!(f, "label = \"{l}\"")?;
        }
        if let Some((m, u)) = &self.upsilon {
            writeln!(f, "cr = {m}")?;
            writeln!(f, "coords = [{}]", self.coords.join(", "))?;
            return writeln!(f, "upsilon = {}", u.display(&self.coords));
        }
        writeln!(f, "dim = {n}")?;
        writeln!(f, "coords = [{}]", self.coords.join(", "))?;
        for i in 0..n {
            for j in i..n {
                if let Some(e) = &self.metric[i * n + j] {
                    if n <= 9 {
                        writeln!(f, "g{}{} = {}", i + 1, j + 1, e.display(&self.coords))?;
                    } else {
                        writeln!(f, "g_{}_{} = {}", i + 1, j + 1, e.display(&self.coords))?;
                    }
                }
            }
        }
        let w: Vec<String> = self.oneform_exprs().iter().map(|e| e.display(&self.coords).to_string()).collect();
        writeln!(f, "w = [{}]", w.join(", "))
    }
}

/// A resolved `--model` argument.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub structure: KropinaStructure,
    pub cr: Option<CRModelSpec>,
    /// Canonical configuration text for file-based models.
    pub config: Option<String>,
}

/// Built-in models: `heisenberg:n`, `burns-shnider:n`, `euclidean:n`
/// (`g = δ`, `ω = dx¹`) and `rescaled:n:<Υ>`.
pub fn catalog_model(id: &str) -> Result<LoadedModel> {
    let parts: Vec<&str> = id.splitn(3, ':').collect();
    let dim_arg = |s: Option<&&str>| -> Result<usize> {
        s.and_then(|v| v.parse::<usize>().ok())
            .filter(|&v| v >= 1)
            .ok_or_else(|| Error::InvalidInput(format!("model `{id}` needs a positive dimension, e.g. `heisenberg:1`")))
    };
    let cr_model = |spec: CRModelSpec| LoadedModel { structure: rescaled_kropina(&spec), cr: Some(spec), config: None };
    match parts[0] {
        "heisenberg" if parts.len() == 2 => {
            let n = dim_arg(parts.get(1))?;
            Ok(LoadedModel {
                structure: crate::cr::heisenberg_kropina(n),
                cr: Some(CRModelSpec::flat(n)),
                config: None,
            })
        }
        "burns-shnider" if parts.len() == 2 => Ok(cr_model(CRModelSpec::burns_shnider(dim_arg(parts.get(1))?))),
        "euclidean" if parts.len() == 2 => {
            let n = dim_arg(parts.get(1))?;
            Ok(LoadedModel { structure: euclidean(n, 0), cr: None, config: None })
        }
        "rescaled" if parts.len() == 3 => {
            let n = dim_arg(parts.get(1))?;
            let u = crate::expr::parse_expr(parts[2], &coordinate_names(n))?;
            Ok(cr_model(CRModelSpec::new(n, u, id)?))
        }
        _ => Err(Error::InvalidInput(format!(
            "unknown model `{id}` (expected heisenberg:n, burns-shnider:n, euclidean:n, rescaled:n:<expr> or a config file)"
        ))),
    }
}

/// Catalog id, or a path to a configuration file.
pub fn load_model(spec: &str) -> Result<LoadedModel> {
    let path = std::path::Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let cfg = parse_model_config(&text)?;
        return Ok(LoadedModel { structure: cfg.to_structure()?, cr: cfg.cr_spec()?, config: Some(cfg.to_string()) });
    }
    catalog_model(spec)
}
