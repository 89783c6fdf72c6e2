//! Satisfiability backend: either the built-in linear-arithmetic
//! procedure or an external SMT-LIB 2 solver process reached over
//! standard input/output, with one persistent session and push/pop
//! scoping. Results are cached by predicate.

use super::lia;
use crate::syntax::{BExpr, CmpOp, Expr};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

pub type Model = BTreeMap<String, BigInt>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

/// A failed query is a verification-budget event, never silently
/// interpreted as unsatisfiable.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("solver returned unknown: {0}")]
    Unknown(String),
    #[error("solver protocol failure: {0}")]
    Protocol(String),
    #[error("solver process failure: {0}")]
    Process(String),
}

impl From<lia::LiaError> for SolverError {
    fn from(e: lia::LiaError) -> Self {
        SolverError::Unknown(e.to_string())
    }
}

/// How to reach a solver.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SolverConfig {
    /// Built-in decision procedure for linear integer arithmetic.
    #[default]
    Builtin,
    /// SMT-LIB-2-conformant process; `interpolation` advertises support
    /// for the sequence-interpolant command.
    External {
        path: String,
        args: Vec<String>,
        interpolation: bool,
    },
}

/// One exclusively-owned solver session with a query cache.
pub struct Solver {
    config: SolverConfig,
    session: Option<ExternalSession>,
    cache: HashMap<BExpr, Result<SatResult, SolverError>>,
    pub queries: u64,
    pub cache_hits: u64,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Solver {
        Solver {
            config,
            session: None,
            cache: HashMap::new(),
            queries: 0,
            cache_hits: 0,
        }
    }

    pub fn supports_interpolation(&self) -> bool {
        matches!(
            self.config,
            SolverConfig::External {
                interpolation: true,
                ..
            }
        )
    }

    pub fn check_sat(&mut self, p: &BExpr) -> Result<SatResult, SolverError> {
        let key = crate::logic::light_simplify(p);
        if let Some(hit) = self.cache.get(&key) {
            self.cache_hits += 1;
            return hit.clone();
        }
        self.queries += 1;
        let result = match &key {
            BExpr::Lit(true) => Ok(SatResult::Sat(Model::new())),
            BExpr::Lit(false) => Ok(SatResult::Unsat),
            _ => match &self.config {
                SolverConfig::Builtin => match lia::check_sat(&key) {
                    Ok(lia::Sat::Sat(model)) => Ok(SatResult::Sat(model)),
                    Ok(lia::Sat::Unsat) => Ok(SatResult::Unsat),
                    Err(e) => Err(e.into()),
                },
                SolverConfig::External { .. } => self.check_sat_external(&key),
            },
        };
        self.cache.insert(key, result.clone());
        result
    }

    pub fn is_unsat(&mut self, p: &BExpr) -> Result<bool, SolverError> {
        Ok(!self.check_sat(p)?.is_sat())
    }

    /// `a => b` is valid iff `a && !b` is unsatisfiable.
    pub fn implies(&mut self, a: &BExpr, b: &BExpr) -> Result<bool, SolverError> {
        self.is_unsat(&BExpr::and(a.clone(), BExpr::not(b.clone())))
    }

    pub fn equivalent(&mut self, a: &BExpr, b: &BExpr) -> Result<bool, SolverError> {
        Ok(self.implies(a, b)? && self.implies(b, a)?)
    }

    // ---- external process ----

    fn session(&mut self) -> Result<&mut ExternalSession, SolverError> {
        if self.session.is_none() {
            let SolverConfig::External { path, args, .. } = &self.config else {
                return Err(SolverError::Protocol("no external solver configured".into()));
            };
            self.session = Some(ExternalSession::spawn(path, args)?);
        }
        Ok(self.session.as_mut().expect("session just created"))
    }

    fn check_sat_external(&mut self, p: &BExpr) -> Result<SatResult, SolverError> {
        let vars = p.vars();
        let formula = smtlib_bexpr(p);
        let session = self.session()?;
        session.command("(push 1)")?;
        let run = (|| {
            for v in &vars {
                session.command(&format!("(declare-fun {v} () Int)"))?;
            }
            session.command(&format!("(assert {formula})"))?;
            match session.query("(check-sat)")?.as_str() {
                "sat" => {
                    let text = session.query_sexpr("(get-model)")?;
                    let model = parse_model(&text, &vars)?;
                    Ok(SatResult::Sat(model))
                }
                "unsat" => Ok(SatResult::Unsat),
                other => Err(SolverError::Unknown(format!(
                    "check-sat answered `{other}`"
                ))),
            }
        })();
        // restore the scope even on failure so the session stays usable
        let popped = self
            .session
            .as_mut()
            .expect("session exists")
            .command("(pop 1)");
        run.and_then(|r| popped.map(|()| r))
    }

    /// Sequence interpolants for a path formula split into `groups`,
    /// using the solver's interpolation command. Returns one formula per
    /// cut between adjacent groups.
    pub fn sequence_interpolants_external(
        &mut self,
        groups: &[BExpr],
    ) -> Result<Vec<BExpr>, SolverError> {
        if !self.supports_interpolation() {
            return Err(SolverError::Protocol(
                "configured solver does not advertise interpolation".into(),
            ));
        }
        let mut vars = BTreeSet::new();
        for g in groups {
            g.collect_vars(&mut vars);
        }
        let session = self.session()?;
        session.command("(push 1)")?;
        let run = (|| {
            for v in &vars {
                session.command(&format!("(declare-fun {v} () Int)"))?;
            }
            for (i, g) in groups.iter().enumerate() {
                session.command(&format!("(assert (! {} :named IP{i}))", smtlib_bexpr(g)))?;
            }
            match session.query("(check-sat)")?.as_str() {
                "unsat" => {}
                other => {
                    return Err(SolverError::Protocol(format!(
                        "interpolation requested on a path that is `{other}`"
                    )))
                }
            }
            let names: Vec<String> = (0..groups.len()).map(|i| format!("IP{i}")).collect();
            let reply = session.query_sexpr(&format!("(get-interpolants {})", names.join(" ")))?;
            let sexpr = SExpr::parse(&reply)?;
            let items = match sexpr {
                SExpr::List(items) => items,
                SExpr::Atom(a) => {
                    return Err(SolverError::Protocol(format!(
                        "expected interpolant list, got atom `{a}`"
                    )))
                }
            };
            items.iter().map(bexpr_from_sexpr).collect()
        })();
        let popped = self
            .session
            .as_mut()
            .expect("session exists")
            .command("(pop 1)");
        run.and_then(|r| popped.map(|()| r))
    }
}

// ---- SMT-LIB 2 rendering ----

pub fn smtlib_expr(e: &Expr) -> String {
    match e {
        Expr::Lit(n) => {
            if n.sign() == num_bigint::Sign::Minus {
                format!("(- {})", -n)
            } else {
                n.to_string()
            }
        }
        Expr::Var(x) => x.clone(),
        Expr::Add(a, b) => format!("(+ {} {})", smtlib_expr(a), smtlib_expr(b)),
        Expr::Sub(a, b) => format!("(- {} {})", smtlib_expr(a), smtlib_expr(b)),
        Expr::Mul(a, b) => format!("(* {} {})", smtlib_expr(a), smtlib_expr(b)),
    }
}

pub fn smtlib_bexpr(b: &BExpr) -> String {
    match b {
        BExpr::Lit(true) => "true".into(),
        BExpr::Lit(false) => "false".into(),
        BExpr::Cmp(op, a, c) => {
            let (a, c) = (smtlib_expr(a), smtlib_expr(c));
            match op {
                CmpOp::Eq => format!("(= {a} {c})"),
                CmpOp::Ne => format!("(not (= {a} {c}))"),
                CmpOp::Lt => format!("(< {a} {c})"),
                CmpOp::Le => format!("(<= {a} {c})"),
                CmpOp::Gt => format!("(> {a} {c})"),
                CmpOp::Ge => format!("(>= {a} {c})"),
            }
        }
        BExpr::Not(x) => format!("(not {})", smtlib_bexpr(x)),
        BExpr::And(a, c) => format!("(and {} {})", smtlib_bexpr(a), smtlib_bexpr(c)),
        BExpr::Or(a, c) => format!("(or {} {})", smtlib_bexpr(a), smtlib_bexpr(c)),
    }
}

// ---- s-expressions ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn parse(text: &str) -> Result<SExpr, SolverError> {
        let mut toks = Vec::new();
        let mut cur = String::new();
        for ch in text.chars() {
            match ch {
                '(' | ')' => {
                    if !cur.is_empty() {
                        toks.push(std::mem::take(&mut cur));
                    }
                    toks.push(ch.to_string());
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        toks.push(std::mem::take(&mut cur));
                    }
                }
                c => cur.push(c),
            }
        }
        if !cur.is_empty() {
            toks.push(cur);
        }
        let mut at = 0usize;
        let parsed = Self::parse_at(&toks, &mut at)?;
        if at != toks.len() {
            return Err(SolverError::Protocol(format!(
                "trailing tokens in solver reply: {text}"
            )));
        }
        Ok(parsed)
    }

    fn parse_at(toks: &[String], at: &mut usize) -> Result<SExpr, SolverError> {
        match toks.get(*at) {
            None => Err(SolverError::Protocol("unexpected end of reply".into())),
            Some(t) if t == "(" => {
                *at += 1;
                let mut items = Vec::new();
                loop {
                    match toks.get(*at) {
                        None => {
                            return Err(SolverError::Protocol("unbalanced parentheses".into()))
                        }
                        Some(t) if t == ")" => {
                            *at += 1;
                            return Ok(SExpr::List(items));
                        }
                        _ => items.push(Self::parse_at(toks, at)?),
                    }
                }
            }
            Some(t) if t == ")" => Err(SolverError::Protocol("unbalanced parentheses".into())),
            Some(atom) => {
                *at += 1;
                Ok(SExpr::Atom(atom.clone()))
            }
        }
    }
}

fn int_from_sexpr(s: &SExpr) -> Result<BigInt, SolverError> {
    match s {
        SExpr::Atom(a) => a
            .parse::<BigInt>()
            .map_err(|_| SolverError::Protocol(format!("expected integer, got `{a}`"))),
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(minus), inner] if minus == "-" => Ok(-int_from_sexpr(inner)?),
            _ => Err(SolverError::Protocol(format!(
                "expected integer literal, got {s:?}"
            ))),
        },
    }
}

fn expr_from_sexpr(s: &SExpr) -> Result<Expr, SolverError> {
    match s {
        SExpr::Atom(a) => {
            if a.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                Ok(Expr::Lit(a.parse::<BigInt>().map_err(|_| {
                    SolverError::Protocol(format!("bad numeral `{a}`"))
                })?))
            } else {
                Ok(Expr::Var(a.clone()))
            }
        }
        SExpr::List(items) => {
            let (head, rest) = items
                .split_first()
                .ok_or_else(|| SolverError::Protocol("empty term".into()))?;
            let SExpr::Atom(op) = head else {
                return Err(SolverError::Protocol("term head is not an atom".into()));
            };
            let args: Vec<Expr> = rest
                .iter()
                .map(expr_from_sexpr)
                .collect::<Result<_, _>>()?;
            let fold = |op: fn(Expr, Expr) -> Expr, args: Vec<Expr>| {
                let mut it = args.into_iter();
                let first = it.next();
                first.map(|f| it.fold(f, op))
            };
            match (op.as_str(), args.len()) {
                ("-", 1) => Ok(Expr::sub(Expr::lit(0), rest.first().map(expr_from_sexpr).expect("one arg")?)),
                ("+", _) => fold(Expr::add, args)
                    .ok_or_else(|| SolverError::Protocol("empty +".into())),
                ("-", _) => fold(Expr::sub, args)
                    .ok_or_else(|| SolverError::Protocol("empty -".into())),
                ("*", _) => fold(Expr::mul, args)
                    .ok_or_else(|| SolverError::Protocol("empty *".into())),
                _ => Err(SolverError::Protocol(format!("unsupported term `{op}`"))),
            }
        }
    }
}

fn bexpr_from_sexpr(s: &SExpr) -> Result<BExpr, SolverError> {
    match s {
        SExpr::Atom(a) => match a.as_str() {
            "true" => Ok(BExpr::TRUE),
            "false" => Ok(BExpr::FALSE),
            other => Err(SolverError::Protocol(format!(
                "expected formula, got atom `{other}`"
            ))),
        },
        SExpr::List(items) => {
            let (head, rest) = items
                .split_first()
                .ok_or_else(|| SolverError::Protocol("empty formula".into()))?;
            let SExpr::Atom(op) = head else {
                return Err(SolverError::Protocol("formula head is not an atom".into()));
            };
            let cmp = |op: CmpOp| -> Result<BExpr, SolverError> {
                if rest.len() != 2 {
                    return Err(SolverError::Protocol("comparison arity".into()));
                }
                Ok(BExpr::cmp(
                    op,
                    expr_from_sexpr(&rest[0])?,
                    expr_from_sexpr(&rest[1])?,
                ))
            };
            match op.as_str() {
                "=" => cmp(CmpOp::Eq),
                "<" => cmp(CmpOp::Lt),
                "<=" => cmp(CmpOp::Le),
                ">" => cmp(CmpOp::Gt),
                ">=" => cmp(CmpOp::Ge),
                "not" => Ok(BExpr::not(bexpr_from_sexpr(&rest[0])?)),
                "and" | "or" => {
                    let parts: Vec<BExpr> = rest
                        .iter()
                        .map(bexpr_from_sexpr)
                        .collect::<Result<_, _>>()?;
                    let mut it = parts.into_iter();
                    let first = it
                        .next()
                        .ok_or_else(|| SolverError::Protocol("empty connective".into()))?;
                    Ok(if op == "and" {
                        it.fold(first, BExpr::and)
                    } else {
                        it.fold(first, BExpr::or)
                    })
                }
                other => Err(SolverError::Protocol(format!(
                    "unsupported connective `{other}`"
                ))),
            }
        }
    }
}

fn parse_model(text: &str, vars: &BTreeSet<String>) -> Result<Model, SolverError> {
    let sexpr = SExpr::parse(text)?;
    let items = match sexpr {
        SExpr::List(items) => items,
        _ => return Err(SolverError::Protocol("model is not a list".into())),
    };
    // some solvers wrap the definitions in (model ...)
    let defs: Vec<&SExpr> = match items.as_slice() {
        [SExpr::Atom(kw), rest @ ..] if kw == "model" => rest.iter().collect(),
        _ => items.iter().collect(),
    };
    let mut model = Model::new();
    for def in defs {
        let SExpr::List(parts) = def else { continue };
        if let [SExpr::Atom(kw), SExpr::Atom(name), SExpr::List(_), SExpr::Atom(_sort), value] =
            parts.as_slice()
        {
            if kw == "define-fun" && vars.contains(name) {
                model.insert(name.clone(), int_from_sexpr(value)?);
            }
        }
    }
    // every free variable gets a value; unconstrained ones default to 0
    for v in vars {
        model.entry(v.clone()).or_insert_with(|| BigInt::from(0u32));
    }
    Ok(model)
}

// ---- the child process ----

struct ExternalSession {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalSession {
    fn spawn(path: &str, args: &[String]) -> Result<ExternalSession, SolverError> {
        let mut child = Command::new(path)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Process(format!("failed to spawn `{path}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut session = ExternalSession {
            child,
            stdin,
            stdout,
        };
        session.command("(set-option :print-success false)")?;
        session.command("(set-logic QF_LIA)")?;
        Ok(session)
    }

    fn send(&mut self, line: &str) -> Result<(), SolverError> {
        writeln!(self.stdin, "{line}")
            .and_then(|()| self.stdin.flush())
            .map_err(|e| SolverError::Process(format!("write to solver failed: {e}")))
    }

    /// Sends a command that produces no reply under :print-success false.
    fn command(&mut self, line: &str) -> Result<(), SolverError> {
        self.send(line)
    }

    /// Sends a command and reads a single-line reply.
    fn query(&mut self, line: &str) -> Result<String, SolverError> {
        self.send(line)?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| SolverError::Process(format!("read from solver failed: {e}")))?;
        if n == 0 {
            return Err(SolverError::Process("solver closed its output".into()));
        }
        Ok(reply.trim().to_string())
    }

    /// Sends a command and reads until the parentheses balance.
    fn query_sexpr(&mut self, line: &str) -> Result<String, SolverError> {
        self.send(line)?;
        let mut text = String::new();
        let mut depth: i64 = 0;
        let mut seen_any = false;
        loop {
            let mut chunk = String::new();
            let n = self
                .stdout
                .read_line(&mut chunk)
                .map_err(|e| SolverError::Process(format!("read from solver failed: {e}")))?;
            if n == 0 {
                return Err(SolverError::Process("solver closed its output".into()));
            }
            for ch in chunk.chars() {
                if ch == '(' {
                    depth += 1;
                    seen_any = true;
                }
                if ch == ')' {
                    depth -= 1;
                }
            }
            text.push_str(&chunk);
            if seen_any && depth <= 0 {
                return Ok(text);
            }
            if !seen_any && !text.trim().is_empty() {
                // single-atom reply such as an error message
                return Ok(text);
            }
        }
    }
}

impl Drop for ExternalSession {
    fn drop(&mut self) {
        let _ = self.send("(exit)");
        let _ = self.child.wait();
    }
}
