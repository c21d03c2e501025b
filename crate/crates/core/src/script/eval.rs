//! Evaluator for test files. Definition forms go through [`crate::dsl`],
//! so a script and a Rust caller talk to the runner identically.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use super::read::{Datum, Node};
use crate::dsl;
use crate::error::{Error, Raised, Result};
use crate::model::{make_assertion, Metadata, SourceLocation, SuiteNode, Value};
use crate::reporting::report;
use crate::runner::TestDefinition;

#[derive(Clone)]
pub enum Obj {
    Val(Value),
    Proc(Arc<Lambda>),
    Builtin(Builtin),
    Suite(SuiteNode),
}

impl Obj {
    fn unspecified() -> Obj {
        Obj::Val(Value::Absent)
    }

    /// The data view of an object; procedures render as opaque symbols.
    pub fn into_value(self) -> Value {
        match self {
            Obj::Val(v) => v,
            other => Value::Symbol(other.to_string()),
        }
    }

    fn is_truthy(&self) -> bool {
        match self {
            Obj::Val(v) => v.is_truthy(),
            _ => true,
        }
    }
}

impl fmt::Display for Obj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obj::Val(v) => write!(f, "{v}"),
            Obj::Proc(l) => write!(f, "#<procedure {}>", l.name.as_deref().unwrap_or("anonymous")),
            Obj::Builtin(b) => write!(f, "#<procedure {}>", b.name),
            Obj::Suite(s) => write!(f, "#<test-suite {}>", s.description),
        }
    }
}

pub struct Lambda {
    name: Option<String>,
    params: Vec<String>,
    rest: Option<String>,
    body: Arc<[Node]>,
    env: Env,
}

type BuiltinFn = fn(&[Obj]) -> std::result::Result<Obj, Raised>;

#[derive(Clone, Copy)]
pub struct Builtin {
    name: &'static str,
    f: BuiltinFn,
}

struct Frame {
    vars: Mutex<HashMap<String, Obj>>,
    parent: Option<Env>,
}

#[derive(Clone)]
pub struct Env(Arc<Frame>);

impl Env {
    pub fn global() -> Env {
        let env = Env(Arc::new(Frame { vars: Mutex::new(HashMap::new()), parent: None }));
        for b in BUILTINS {
            env.define(b.name, Obj::Builtin(*b));
        }
        env
    }

    fn child(&self) -> Env {
        Env(Arc::new(Frame { vars: Mutex::new(HashMap::new()), parent: Some(self.clone()) }))
    }

    pub fn define(&self, name: &str, value: Obj) {
        self.0.vars.lock().unwrap_or_else(|e| e.into_inner()).insert(name.to_owned(), value);
    }

    pub fn lookup(&self, name: &str) -> Option<Obj> {
        let mut env = Some(self);
        while let Some(e) = env {
            if let Some(v) = e.0.vars.lock().unwrap_or_else(|e| e.into_inner()).get(name) {
                return Some(v.clone());
            }
            env = e.0.parent.as_ref();
        }
        None
    }

    fn set(&self, name: &str, value: Obj) -> bool {
        let mut env = Some(self);
        while let Some(e) = env {
            let mut vars = e.0.vars.lock().unwrap_or_else(|e| e.into_inner());
            if let Some(slot) = vars.get_mut(name) {
                *slot = value;
                return true;
            }
            drop(vars);
            env = e.0.parent.as_ref();
        }
        false
    }
}

/// Per-file evaluation context shared by every closure the file creates.
pub struct Ctx {
    pub file: Arc<str>,
    pub source: Arc<str>,
}

const SPECIAL_FORMS: &[&str] = &[
    "quote",
    "if",
    "define",
    "set!",
    "lambda",
    "let",
    "let*",
    "begin",
    "and",
    "or",
    "when",
    "unless",
    "cond",
    "is",
    "test",
    "test-suite",
    "test-suite-thunk",
    "define-test-suite",
    "throws-exception?",
    "with-description",
];

pub fn is_special_form(name: &str) -> bool {
    SPECIAL_FORMS.contains(&name)
}

impl Ctx {
    fn error(&self, node: &Node, message: impl Into<String>) -> Error {
        Error::Script { path: self.file.to_string().into(), line: node.line, message: message.into() }
    }

    fn location(&self, node: &Node) -> SourceLocation {
        SourceLocation::new(self.file.to_string(), node.line as u32)
    }

    pub fn eval(self: &Arc<Self>, node: &Node, env: &Env) -> Result<Obj> {
        match &node.datum {
            Datum::Int(i) => Ok(Obj::Val(Value::Int(*i))),
            Datum::Float(x) => Ok(Obj::Val(Value::Float(*x))),
            Datum::Str(s) => Ok(Obj::Val(Value::Str(s.clone()))),
            Datum::Bool(b) => Ok(Obj::Val(Value::Bool(*b))),
            Datum::Keyword(k) => Err(self.error(node, format!("unexpected keyword #:{k}"))),
            Datum::Symbol(name) => {
                env.lookup(name).ok_or_else(|| self.error(node, format!("unbound variable: {name}")))
            }
            Datum::Quote(inner) => self.quote(inner).map(Obj::Val),
            Datum::List(_, Some(_)) => Err(self.error(node, "cannot evaluate a dotted list")),
            Datum::List(items, None) => {
                let Some((head, args)) = items.split_first() else {
                    return Err(self.error(node, "cannot evaluate an empty combination"));
                };
                if let Some(name) = head.symbol() {
                    if is_special_form(name) && env.lookup(name).is_none() {
                        return self.special(name, node, args, env);
                    }
                }
                let f = self.eval(head, env)?;
                let args = args.iter().map(|a| self.eval(a, env)).collect::<Result<Vec<_>>>()?;
                self.apply(node, &f, args)
            }
        }
    }

    /// Evaluate one top-level form of a test module. Suite definitions are
    /// returned for registration instead of being run; bare calls of a
    /// suite are skipped, since loading happens afterwards anyway.
    pub fn eval_module_form(self: &Arc<Self>, node: &Node, env: &Env) -> Result<Option<SuiteNode>> {
        let items = match node.items() {
            Some(items) if !items.is_empty() => items,
            _ => {
                self.eval(node, env)?;
                return Ok(None);
            }
        };
        let head = items[0].symbol().filter(|h| env.lookup(h).is_none() || !is_special_form(h));
        match head {
            Some("test-suite") if env.lookup("test-suite").is_none() => {
                self.suite(node, &items[1..], env, None).map(Some)
            }
            Some("test") if env.lookup("test").is_none() => {
                Err(self
                    .error(node, "a test at the top level of a test module would run while loading; put it in a suite"))
            }
            Some("define") | Some("define-test-suite") => {
                self.eval(node, env)?;
                let name = match items.get(1).map(|n| &n.datum) {
                    Some(Datum::Symbol(name)) => name.clone(),
                    _ => return Ok(None),
                };
                Ok(match env.lookup(&name) {
                    Some(Obj::Suite(suite)) => Some(suite),
                    _ => None,
                })
            }
            Some(name) if items.len() == 1 && matches!(env.lookup(name), Some(Obj::Suite(_))) => Ok(None),
            _ => {
                self.eval(node, env)?;
                Ok(None)
            }
        }
    }

    fn quote(&self, node: &Node) -> Result<Value> {
        Ok(match &node.datum {
            Datum::Int(i) => Value::Int(*i),
            Datum::Float(x) => Value::Float(*x),
            Datum::Str(s) => Value::Str(s.clone()),
            Datum::Bool(b) => Value::Bool(*b),
            Datum::Symbol(s) => Value::Symbol(s.clone()),
            Datum::Keyword(k) => Value::Symbol(format!("#:{k}")),
            Datum::Quote(inner) => Value::list([Value::symbol("quote"), self.quote(inner)?]),
            Datum::List(items, None) => Value::List(items.iter().map(|i| self.quote(i)).collect::<Result<_>>()?),
            Datum::List(_, Some(_)) => return Err(self.error(node, "dotted pairs are only supported in metadata")),
        })
    }

    pub fn apply(self: &Arc<Self>, at: &Node, f: &Obj, args: Vec<Obj>) -> Result<Obj> {
        match f {
            Obj::Builtin(b) => (b.f)(&args).map_err(|e| {
                if e.message.starts_with(b.name) || b.name == "error" || b.name == "raise" {
                    e.into()
                } else {
                    Raised::new(format!("{}: {}", b.name, e.message)).into()
                }
            }),
            Obj::Proc(lambda) => {
                let arity_ok = match &lambda.rest {
                    None => args.len() == lambda.params.len(),
                    Some(_) => args.len() >= lambda.params.len(),
                };
                if !arity_ok {
                    return Err(self.error(
                        at,
                        format!(
                            "{} expects {} argument(s), got {}",
                            Obj::Proc(lambda.clone()),
                            lambda.params.len(),
                            args.len()
                        ),
                    ));
                }
                let env = lambda.env.child();
                let mut args = args.into_iter();
                for p in &lambda.params {
                    env.define(p, args.next().unwrap_or_else(Obj::unspecified));
                }
                if let Some(rest) = &lambda.rest {
                    env.define(rest, Obj::Val(Value::List(args.map(Obj::into_value).collect())));
                }
                self.body(&lambda.body, &env)
            }
            Obj::Suite(suite) => {
                if !args.is_empty() {
                    return Err(self.error(at, "a test suite takes no arguments"));
                }
                suite.call()?;
                Ok(Obj::unspecified())
            }
            Obj::Val(v) => Err(self.error(at, format!("not a procedure: {v}"))),
        }
    }

    fn body(self: &Arc<Self>, forms: &[Node], env: &Env) -> Result<Obj> {
        let mut last = Obj::unspecified();
        for form in forms {
            last = self.eval(form, env)?;
        }
        Ok(last)
    }

    fn expect_args(&self, node: &Node, args: &[Node], min: usize) -> Result<()> {
        if args.len() < min {
            let head = node.items().and_then(|i| i.first()).and_then(Node::symbol).unwrap_or("form");
            return Err(self.error(node, format!("{head}: expected at least {min} operand(s)")));
        }
        Ok(())
    }

    fn lambda(&self, node: &Node, name: Option<String>, formals: &Node, body: &[Node], env: &Env) -> Result<Obj> {
        let symbol =
            |n: &Node| n.symbol().map(str::to_owned).ok_or_else(|| self.error(n, "parameter names must be symbols"));
        let (params, rest) = match &formals.datum {
            Datum::Symbol(s) => (Vec::new(), Some(s.clone())),
            Datum::List(items, tail) => {
                (items.iter().map(symbol).collect::<Result<Vec<_>>>()?, tail.as_deref().map(symbol).transpose()?)
            }
            _ => return Err(self.error(node, "malformed parameter list")),
        };
        Ok(Obj::Proc(Arc::new(Lambda { name, params, rest, body: body.to_vec().into(), env: env.clone() })))
    }

    fn special(self: &Arc<Self>, name: &str, node: &Node, args: &[Node], env: &Env) -> Result<Obj> {
        match name {
            "quote" => {
                self.expect_args(node, args, 1)?;
                self.quote(&args[0]).map(Obj::Val)
            }
            "if" => {
                self.expect_args(node, args, 2)?;
                if self.eval(&args[0], env)?.is_truthy() {
                    self.eval(&args[1], env)
                } else {
                    args.get(2).map_or(Ok(Obj::unspecified()), |e| self.eval(e, env))
                }
            }
            "when" | "unless" => {
                self.expect_args(node, args, 1)?;
                if self.eval(&args[0], env)?.is_truthy() == (name == "when") {
                    self.body(&args[1..], env)
                } else {
                    Ok(Obj::unspecified())
                }
            }
            "cond" => {
                for clause in args {
                    let items = clause
                        .items()
                        .filter(|i| !i.is_empty())
                        .ok_or_else(|| self.error(clause, "malformed cond clause"))?;
                    let hit = match items[0].symbol() {
                        Some("else") => Obj::Val(Value::Bool(true)),
                        _ => self.eval(&items[0], env)?,
                    };
                    if hit.is_truthy() {
                        return if items.len() == 1 { Ok(hit) } else { self.body(&items[1..], env) };
                    }
                }
                Ok(Obj::unspecified())
            }
            "begin" => self.body(args, env),
            "and" => {
                let mut last = Obj::Val(Value::Bool(true));
                for a in args {
                    last = self.eval(a, env)?;
                    if !last.is_truthy() {
                        break;
                    }
                }
                Ok(last)
            }
            "or" => {
                for a in args {
                    let v = self.eval(a, env)?;
                    if v.is_truthy() {
                        return Ok(v);
                    }
                }
                Ok(Obj::Val(Value::Bool(false)))
            }
            "define" => {
                self.expect_args(node, args, 1)?;
                match &args[0].datum {
                    Datum::Symbol(var) => {
                        let value = match args.get(1) {
                            Some(e) => self.eval(e, env)?,
                            None => Obj::unspecified(),
                        };
                        env.define(var, value);
                    }
                    Datum::List(items, tail) if !items.is_empty() => {
                        let fname = items[0]
                            .symbol()
                            .ok_or_else(|| self.error(&items[0], "procedure name must be a symbol"))?;
                        let formals = Node { datum: Datum::List(items[1..].to_vec(), tail.clone()), ..args[0].clone() };
                        let f = self.lambda(node, Some(fname.to_owned()), &formals, &args[1..], env)?;
                        env.define(fname, f);
                    }
                    _ => return Err(self.error(node, "malformed define")),
                }
                Ok(Obj::unspecified())
            }
            "set!" => {
                self.expect_args(node, args, 2)?;
                let var = args[0].symbol().ok_or_else(|| self.error(node, "set!: expected a variable"))?;
                let value = self.eval(&args[1], env)?;
                if !env.set(var, value) {
                    return Err(self.error(node, format!("set!: unbound variable: {var}")));
                }
                Ok(Obj::unspecified())
            }
            "lambda" => {
                self.expect_args(node, args, 2)?;
                self.lambda(node, None, &args[0], &args[1..], env)
            }
            "let" | "let*" => {
                self.expect_args(node, args, 2)?;
                let bindings = args[0].items().ok_or_else(|| self.error(node, "malformed bindings"))?;
                let scope = env.child();
                for binding in bindings {
                    let pair = binding
                        .items()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| self.error(binding, "malformed binding"))?;
                    let var = pair[0].symbol().ok_or_else(|| self.error(binding, "binding name must be a symbol"))?;
                    let value = self.eval(&pair[1], if name == "let" { env } else { &scope })?;
                    scope.define(var, value);
                }
                self.body(&args[1..], &scope)
            }
            "throws-exception?" => {
                self.expect_args(node, args, 1)?;
                let thrown = match self.eval(&args[0], env) {
                    Ok(_) => false,
                    Err(e) if e.is_nesting() => return Err(e),
                    Err(_) => true,
                };
                Ok(Obj::Val(Value::Bool(thrown)))
            }
            "with-description" => {
                self.expect_args(node, args, 1)?;
                self.eval(&args[0], env)
            }
            "is" => self.assertion(node, args, env),
            "test" => self.test(node, args, env),
            "test-suite" => {
                let suite = self.suite(node, args, env, None)?;
                suite.call()?;
                Ok(Obj::unspecified())
            }
            "test-suite-thunk" => self.suite(node, args, env, None).map(Obj::Suite),
            "define-test-suite" => {
                self.expect_args(node, args, 1)?;
                let var = args[0].symbol().ok_or_else(|| self.error(node, "define-test-suite: expected a name"))?;
                let suite = self.suite(node, &args[1..], env, Some(var.to_owned()))?;
                env.define(var, Obj::Suite(suite));
                Ok(Obj::unspecified())
            }
            _ => unreachable!("special form list and dispatch agree"),
        }
    }

    /// Description, then `#:key value` options, then the body.
    fn definition_parts<'n>(
        self: &Arc<Self>,
        node: &Node,
        args: &'n [Node],
        env: &Env,
        description: Option<String>,
    ) -> Result<(String, Metadata, &'n [Node])> {
        let (description, mut rest) = match description {
            Some(d) => (d, args),
            None => {
                self.expect_args(node, args, 1)?;
                let d = match self.eval(&args[0], env)? {
                    Obj::Val(Value::Str(s)) => s,
                    other => return Err(self.error(&args[0], format!("description must be a string, got {other}"))),
                };
                (d, &args[1..])
            }
        };
        let mut metadata = Metadata::new();
        while let Some(Datum::Keyword(k)) = rest.first().map(|n| &n.datum) {
            let value = rest.get(1).ok_or_else(|| self.error(&rest[0], format!("#:{k} needs a value")))?;
            match k.as_str() {
                "metadata" => metadata = self.metadata(value, env)?,
                other => return Err(self.error(&rest[0], format!("unknown option #:{other}"))),
            }
            rest = &rest[2..];
        }
        Ok((description, metadata, rest))
    }

    /// `'((key . value) ...)`, or any expression producing a list of
    /// two-element lists.
    fn metadata(self: &Arc<Self>, node: &Node, env: &Env) -> Result<Metadata> {
        let mut metadata = Metadata::new();
        if let Datum::Quote(inner) = &node.datum {
            if let Datum::List(entries, None) = &inner.datum {
                for entry in entries {
                    let (key, value) = match &entry.datum {
                        Datum::List(head, Some(tail)) if head.len() == 1 => (&head[0], self.quote(tail)?),
                        Datum::List(pair, None) if pair.len() == 2 => (&pair[0], self.quote(&pair[1])?),
                        _ => return Err(self.error(entry, "metadata entries are (key . value) pairs")),
                    };
                    let key = key.symbol().ok_or_else(|| self.error(entry, "metadata keys must be symbols"))?;
                    metadata.insert(key.to_owned(), value);
                }
                return Ok(metadata);
            }
        }
        match self.eval(node, env)?.into_value() {
            Value::List(entries) => {
                for entry in entries {
                    match entry {
                        Value::List(mut pair) if pair.len() == 2 => {
                            let value = pair.pop().unwrap_or_default();
                            let key = pair.pop().unwrap_or_default();
                            let key = key
                                .as_str()
                                .ok_or_else(|| self.error(node, "metadata keys must be symbols"))?
                                .to_owned();
                            metadata.insert(key, value);
                        }
                        other => return Err(self.error(node, format!("malformed metadata entry {other}"))),
                    }
                }
                Ok(metadata)
            }
            other => Err(self.error(node, format!("metadata must be a list, got {other}"))),
        }
    }

    fn test(self: &Arc<Self>, node: &Node, args: &[Node], env: &Env) -> Result<Obj> {
        let (description, metadata, body) = self.definition_parts(node, args, env, None)?;
        let (ctx, env, body): (Arc<Ctx>, Env, Arc<[Node]>) = (self.clone(), env.clone(), body.to_vec().into());
        let definition = TestDefinition::new(description, metadata, move || ctx.body(&body, &env.child()).map(|_| ()))
            .at(self.location(node));
        dsl::test_definition(definition)?;
        Ok(Obj::unspecified())
    }

    fn suite(self: &Arc<Self>, node: &Node, args: &[Node], env: &Env, name: Option<String>) -> Result<SuiteNode> {
        let (description, metadata, body) = self.definition_parts(node, args, env, name)?;
        let (ctx, env, body): (Arc<Ctx>, Env, Arc<[Node]>) = (self.clone(), env.clone(), body.to_vec().into());
        Ok(SuiteNode::new(description, metadata, move || ctx.body(&body, &env.child()).map(|_| ()))?
            .at(self.location(node)))
    }

    fn assertion(self: &Arc<Self>, node: &Node, args: &[Node], env: &Env) -> Result<Obj> {
        if args.len() != 1 {
            return Err(self.error(node, "is: expected exactly one expression"));
        }
        let mut expr = &args[0];
        let mut description = None;
        if let Some(items) = expr.items() {
            if items.first().and_then(Node::symbol) == Some("with-description") && items.len() == 3 {
                description = match self.eval(&items[2], env)? {
                    Obj::Val(Value::Str(s)) => Some(s),
                    other => Some(other.to_string()),
                };
                expr = &items[1];
            }
        }
        let as_raised = |e: Error| match e {
            Error::Raised(r) => r,
            other => Raised::new(other.to_string()),
        };
        let operands: &[Node] = match expr.items() {
            Some([head, rest @ ..]) if head.symbol().is_some_and(|h| !is_special_form(h)) => rest,
            _ => &[],
        };
        let spec = make_assertion(
            expr.text(&self.source),
            || self.eval(expr, env).map(Obj::into_value).map_err(as_raised),
            || operands.iter().map(|o| self.eval(o, env).map(Obj::into_value).map_err(as_raised)).collect(),
            description,
        )?
        .at(self.location(expr));
        dsl::is(spec).map(Obj::Val)
    }
}

fn raised(message: impl Into<String>) -> Raised {
    Raised::new(message)
}

fn value(o: &Obj) -> std::result::Result<&Value, Raised> {
    match o {
        Obj::Val(v) => Ok(v),
        other => Err(raised(format!("expected a value, got {other}"))),
    }
}

#[derive(Clone, Copy)]
enum Num {
    I(i64),
    F(f64),
}

impl Num {
    fn f(self) -> f64 {
        match self {
            Num::I(i) => i as f64,
            Num::F(x) => x,
        }
    }

    fn obj(self) -> Obj {
        Obj::Val(match self {
            Num::I(i) => Value::Int(i),
            Num::F(x) => Value::Float(x),
        })
    }
}

fn num(o: &Obj) -> std::result::Result<Num, Raised> {
    match value(o)? {
        Value::Int(i) => Ok(Num::I(*i)),
        Value::Float(x) => Ok(Num::F(*x)),
        other => Err(raised(format!("expected a number, got {other}"))),
    }
}

fn fold(
    start: Num,
    rest: &[Obj],
    op: fn(i64, i64) -> Option<i64>,
    fop: fn(f64, f64) -> f64,
) -> std::result::Result<Obj, Raised> {
    let mut acc = start;
    for a in rest {
        acc = match (acc, num(a)?) {
            (Num::I(x), Num::I(y)) => Num::I(op(x, y).ok_or_else(|| raised("integer overflow"))?),
            (x, y) => Num::F(fop(x.f(), y.f())),
        };
    }
    Ok(acc.obj())
}

fn compare(args: &[Obj], holds: fn(f64, f64) -> bool) -> std::result::Result<Obj, Raised> {
    let nums = args.iter().map(num).collect::<std::result::Result<Vec<_>, _>>()?;
    let ok = nums.windows(2).all(|w| match (w[0], w[1]) {
        // Compare integers exactly: the sign of the ordering against zero.
        (Num::I(a), Num::I(b)) => holds(a.cmp(&b) as i64 as f64, 0.0),
        (a, b) => holds(a.f(), b.f()),
    });
    Ok(Obj::Val(Value::Bool(ok)))
}

fn arity(args: &[Obj], n: usize) -> std::result::Result<(), Raised> {
    if args.len() == n {
        Ok(())
    } else {
        Err(raised(format!("expected {n} argument(s), got {}", args.len())))
    }
}

fn list_of(o: &Obj) -> std::result::Result<&[Value], Raised> {
    match value(o)? {
        Value::List(items) => Ok(items),
        other => Err(raised(format!("expected a list, got {other}"))),
    }
}

fn boolean(b: bool) -> std::result::Result<Obj, Raised> {
    Ok(Obj::Val(Value::Bool(b)))
}

fn display_text(o: &Obj) -> String {
    match o {
        Obj::Val(Value::Str(s)) => s.clone(),
        other => other.to_string(),
    }
}

macro_rules! builtin {
    ($name:literal, |$args:ident| $body:expr) => {
        Builtin { name: $name, f: |$args: &[Obj]| -> std::result::Result<Obj, Raised> { $body } }
    };
}

const BUILTINS: &[Builtin] = &[
    builtin!("+", |a| fold(Num::I(0), a, i64::checked_add, |x, y| x + y)),
    builtin!("*", |a| fold(Num::I(1), a, i64::checked_mul, |x, y| x * y)),
    builtin!("-", |a| match a {
        [] => Err(raised("expected at least 1 argument")),
        [only] => fold(Num::I(0), std::slice::from_ref(only), i64::checked_sub, |x, y| x - y),
        [first, rest @ ..] => fold(num(first)?, rest, i64::checked_sub, |x, y| x - y),
    }),
    builtin!("/", |a| {
        if a.is_empty() {
            return Err(raised("expected at least 1 argument"));
        }
        let nums = a.iter().map(num).collect::<std::result::Result<Vec<_>, _>>()?;
        let (first, rest) = if nums.len() == 1 { (Num::I(1), &nums[..]) } else { (nums[0], &nums[1..]) };
        let mut acc = first;
        for n in rest {
            acc = match (acc, *n) {
                (_, Num::I(0)) => return Err(raised("division by zero")),
                (Num::I(x), Num::I(y)) if x % y == 0 => Num::I(x / y),
                (x, y) => Num::F(x.f() / y.f()),
            };
        }
        Ok(acc.obj())
    }),
    builtin!("=", |a| compare(a, |x, y| x == y)),
    builtin!("<", |a| compare(a, |x, y| x < y)),
    builtin!(">", |a| compare(a, |x, y| x > y)),
    builtin!("<=", |a| compare(a, |x, y| x <= y)),
    builtin!(">=", |a| compare(a, |x, y| x >= y)),
    builtin!("equal?", |a| {
        arity(a, 2)?;
        boolean(value(&a[0])? == value(&a[1])?)
    }),
    builtin!("eq?", |a| {
        arity(a, 2)?;
        boolean(value(&a[0])? == value(&a[1])?)
    }),
    builtin!("eqv?", |a| {
        arity(a, 2)?;
        boolean(value(&a[0])? == value(&a[1])?)
    }),
    builtin!("not", |a| {
        arity(a, 1)?;
        boolean(!a[0].is_truthy())
    }),
    builtin!("null?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::List(l) if l.is_empty()))
    }),
    builtin!("pair?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::List(l) if !l.is_empty()))
    }),
    builtin!("list?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::List(_)))
    }),
    builtin!("number?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::Int(_) | Value::Float(_)))
    }),
    builtin!("integer?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::Int(_)))
    }),
    builtin!("string?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::Str(_)))
    }),
    builtin!("symbol?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::Symbol(_)))
    }),
    builtin!("boolean?", |a| {
        arity(a, 1)?;
        boolean(matches!(value(&a[0])?, Value::Bool(_)))
    }),
    builtin!("procedure?", |a| {
        arity(a, 1)?;
        boolean(!matches!(a[0], Obj::Val(_)))
    }),
    builtin!("zero?", |a| {
        arity(a, 1)?;
        boolean(num(&a[0])?.f() == 0.0)
    }),
    builtin!("even?", |a| {
        arity(a, 1)?;
        match num(&a[0])? {
            Num::I(i) => boolean(i % 2 == 0),
            Num::F(_) => Err(raised("expected an integer")),
        }
    }),
    builtin!("odd?", |a| {
        arity(a, 1)?;
        match num(&a[0])? {
            Num::I(i) => boolean(i % 2 != 0),
            Num::F(_) => Err(raised("expected an integer")),
        }
    }),
    builtin!("abs", |a| {
        arity(a, 1)?;
        Ok(match num(&a[0])? {
            Num::I(i) => Num::I(i.checked_abs().ok_or_else(|| raised("integer overflow"))?),
            Num::F(x) => Num::F(x.abs()),
        }
        .obj())
    }),
    builtin!("min", |a| {
        let nums = a.iter().map(num).collect::<std::result::Result<Vec<_>, _>>()?;
        nums.into_iter()
            .reduce(|x, y| if y.f() < x.f() { y } else { x })
            .map(Num::obj)
            .ok_or_else(|| raised("expected at least 1 argument"))
    }),
    builtin!("max", |a| {
        let nums = a.iter().map(num).collect::<std::result::Result<Vec<_>, _>>()?;
        nums.into_iter()
            .reduce(|x, y| if y.f() > x.f() { y } else { x })
            .map(Num::obj)
            .ok_or_else(|| raised("expected at least 1 argument"))
    }),
    builtin!("list", |a| Ok(Obj::Val(Value::List(a.iter().cloned().map(Obj::into_value).collect())))),
    builtin!("cons", |a| {
        arity(a, 2)?;
        let mut items = vec![a[0].clone().into_value()];
        items.extend_from_slice(list_of(&a[1]).map_err(|_| raised("improper lists are not supported"))?);
        Ok(Obj::Val(Value::List(items)))
    }),
    builtin!("car", |a| {
        arity(a, 1)?;
        list_of(&a[0])?.first().cloned().map(Obj::Val).ok_or_else(|| raised("empty list"))
    }),
    builtin!("cdr", |a| {
        arity(a, 1)?;
        match list_of(&a[0])? {
            [] => Err(raised("empty list")),
            [_, rest @ ..] => Ok(Obj::Val(Value::List(rest.to_vec()))),
        }
    }),
    builtin!("length", |a| {
        arity(a, 1)?;
        Ok(Obj::Val(Value::Int(list_of(&a[0])?.len() as i64)))
    }),
    builtin!("append", |a| {
        let mut items = Vec::new();
        for l in a {
            items.extend_from_slice(list_of(l)?);
        }
        Ok(Obj::Val(Value::List(items)))
    }),
    builtin!("reverse", |a| {
        arity(a, 1)?;
        Ok(Obj::Val(Value::List(list_of(&a[0])?.iter().rev().cloned().collect())))
    }),
    builtin!("string-append", |a| {
        let mut s = String::new();
        for part in a {
            match value(part)? {
                Value::Str(p) => s.push_str(p),
                other => return Err(raised(format!("expected a string, got {other}"))),
            }
        }
        Ok(Obj::Val(Value::Str(s)))
    }),
    builtin!("string-length", |a| {
        arity(a, 1)?;
        match value(&a[0])? {
            Value::Str(s) => Ok(Obj::Val(Value::Int(s.chars().count() as i64))),
            other => Err(raised(format!("expected a string, got {other}"))),
        }
    }),
    builtin!("string=?", |a| {
        arity(a, 2)?;
        boolean(matches!((value(&a[0])?, value(&a[1])?), (Value::Str(x), Value::Str(y)) if x == y))
    }),
    builtin!("number->string", |a| {
        arity(a, 1)?;
        num(&a[0])?;
        Ok(Obj::Val(Value::Str(a[0].to_string())))
    }),
    builtin!("symbol->string", |a| {
        arity(a, 1)?;
        match value(&a[0])? {
            Value::Symbol(s) => Ok(Obj::Val(Value::Str(s.clone()))),
            other => Err(raised(format!("expected a symbol, got {other}"))),
        }
    }),
    builtin!("display", |a| {
        arity(a, 1)?;
        report(&display_text(&a[0]));
        Ok(Obj::unspecified())
    }),
    builtin!("newline", |a| {
        arity(a, 0)?;
        report("\n");
        Ok(Obj::unspecified())
    }),
    builtin!("sleep-ms", |a| {
        arity(a, 1)?;
        match value(&a[0])? {
            Value::Int(ms) if *ms >= 0 => {
                std::thread::sleep(std::time::Duration::from_millis(*ms as u64));
                Ok(Obj::unspecified())
            }
            other => Err(raised(format!("expected a non-negative integer, got {other}"))),
        }
    }),
    builtin!("error", |a| {
        let mut parts = a.iter().map(display_text);
        let mut message = parts.next().unwrap_or_else(|| "error".to_owned());
        for p in parts {
            message.push(' ');
            message.push_str(&p);
        }
        Err(raised(message))
    }),
    builtin!("raise", |a| {
        arity(a, 1)?;
        Err(raised(display_text(&a[0])))
    }),
];
