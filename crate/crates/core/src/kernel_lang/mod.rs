//! Kernel expression language.
//!
//! Every user-supplied function of the model (the free term, the memory
//! kernels, the impulse kernels and the moving impulse times) is a
//! [`KernelExpr`]: a small arithmetic expression over a declared, ordered list
//! of variable names. Expressions are immutable once parsed and evaluate
//! positionally against that list.

mod lipschitz;
mod parser;

pub use lipschitz::{estimate_lipschitz, Interval, LipschitzError, LipschitzSet, DEFAULT_SAFETY_FACTOR};
pub use parser::{ParseError, ParseErrorKind};

use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Func1 {
    Exp,
    Log,
    Sin,
    Cos,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Func2 {
    Min,
    Max,
}

impl Func1 {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func1::Exp,
            "log" => Func1::Log,
            "sin" => Func1::Sin,
            "cos" => Func1::Cos,
            "abs" => Func1::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func1::Exp => "exp",
            Func1::Log => "log",
            Func1::Sin => "sin",
            Func1::Cos => "cos",
            Func1::Abs => "abs",
        }
    }
}

impl Func2 {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "min" => Some(Func2::Min),
            "max" => Some(Func2::Max),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func2::Min => "min",
            Func2::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call1(Func1, Box<Node>),
    Call2(Func2, Box<Node>, Box<Node>),
}

/// Runtime evaluation failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive argument {0}")]
    LogDomain(f64),
    #[error("power {base}^{exponent} is undefined")]
    PowDomain { base: f64, exponent: f64 },
    #[error("non-finite result")]
    NonFinite,
    #[error("expected {expected} argument(s), got {found}")]
    ArgCount { expected: usize, found: usize },
    #[error("no binding for variable '{0}'")]
    MissingBinding(String),
}

impl Node {
    fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Node::Const(v) => *v,
            Node::Var(i) => args[*i],
            Node::Neg(a) => -a.eval(args)?,
            Node::Bin(op, a, b) => {
                let x = a.eval(args)?;
                let y = b.eval(args)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        let r = x.powf(y);
                        if !r.is_finite() {
                            return Err(EvalError::PowDomain {
                                base: x,
                                exponent: y,
                            });
                        }
                        r
                    }
                }
            }
            Node::Call1(f, a) => {
                let x = a.eval(args)?;
                match f {
                    Func1::Exp => x.exp(),
                    Func1::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::LogDomain(x));
                        }
                        x.ln()
                    }
                    Func1::Sin => x.sin(),
                    Func1::Cos => x.cos(),
                    Func1::Abs => x.abs(),
                }
            }
            Node::Call2(f, a, b) => {
                let x = a.eval(args)?;
                let y = b.eval(args)?;
                match f {
                    Func2::Min => x.min(y),
                    Func2::Max => x.max(y),
                }
            }
        })
    }

    fn references(&self, var: usize) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(i) => *i == var,
            Node::Neg(a) | Node::Call1(_, a) => a.references(var),
            Node::Bin(_, a, b) | Node::Call2(_, a, b) => a.references(var) || b.references(var),
        }
    }

    /// Rewrite variable indices through `map` (old index -> new index).
    fn remap(&self, map: &[usize]) -> Node {
        match self {
            Node::Const(v) => Node::Const(*v),
            Node::Var(i) => Node::Var(map[*i]),
            Node::Neg(a) => Node::Neg(Box::new(a.remap(map))),
            Node::Bin(op, a, b) => Node::Bin(*op, Box::new(a.remap(map)), Box::new(b.remap(map))),
            Node::Call1(f, a) => Node::Call1(*f, Box::new(a.remap(map))),
            Node::Call2(f, a, b) => Node::Call2(*f, Box::new(a.remap(map)), Box::new(b.remap(map))),
        }
    }

    // Binding strength used by the printer.
    fn prec(&self) -> u8 {
        match self {
            Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Node::Neg(_) => 3,
            Node::Const(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            Node::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn print(&self, names: &[String], out: &mut String) {
        let wrap = |n: &Node, paren: bool, out: &mut String| {
            if paren {
                out.push('(');
                n.print(names, out);
                out.push(')');
            } else {
                n.print(names, out);
            }
        };
        match self {
            Node::Const(v) => {
                if self.prec() == 3 {
                    out.push_str(&format!("(-{:?})", -v));
                } else {
                    out.push_str(&format!("{v:?}"));
                }
            }
            Node::Var(i) => out.push_str(&names[*i]),
            Node::Neg(a) => {
                out.push('-');
                wrap(a, a.prec() < 3, out);
            }
            Node::Bin(op, a, b) => {
                let (sym, p) = match op {
                    BinOp::Add => (" + ", 1),
                    BinOp::Sub => (" - ", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    wrap(a, a.prec() <= 4, out);
                    out.push('^');
                    wrap(b, b.prec() < 3, out);
                } else {
                    wrap(a, a.prec() < p, out);
                    out.push_str(sym);
                    wrap(b, b.prec() <= p, out);
                }
            }
            Node::Call1(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.print(names, out);
                out.push(')');
            }
            Node::Call2(f, a, b) => {
                out.push_str(f.name());
                out.push('(');
                a.print(names, out);
                out.push_str(", ");
                b.print(names, out);
                out.push(')');
            }
        }
    }
}

/// A parsed kernel expression with a fixed, ordered variable list.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExpr {
    source: String,
    arity: Vec<String>,
    root: Node,
}

impl KernelExpr {
    pub fn parse<S: AsRef<str>>(source: &str, arity: &[S]) -> Result<Self, ParseError> {
        let arity: Vec<String> = arity.iter().map(|s| s.as_ref().to_string()).collect();
        let root = parser::parse(source, &arity)?;
        Ok(KernelExpr {
            source: source.to_string(),
            arity,
            root,
        })
    }

    /// The identically-zero kernel over `arity`.
    pub fn zero<S: AsRef<str>>(arity: &[S]) -> Self {
        KernelExpr {
            source: "0".to_string(),
            arity: arity.iter().map(|s| s.as_ref().to_string()).collect(),
            root: Node::Const(0.0),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn arity(&self) -> &[String] {
        &self.arity
    }

    /// Evaluate with positional arguments ordered as [`Self::arity`].
    #[inline]
    pub fn eval(&self, args: &[f64]) -> Result<f64, EvalError> {
        if args.len() != self.arity.len() {
            return Err(EvalError::ArgCount {
                expected: self.arity.len(),
                found: args.len(),
            });
        }
        let v = self.root.eval(args)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluate against named bindings; every arity variable must be bound.
    pub fn eval_bindings(&self, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
        let args = self
            .arity
            .iter()
            .map(|n| {
                bindings
                    .get(n)
                    .copied()
                    .ok_or_else(|| EvalError::MissingBinding(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.eval(&args)
    }

    /// Whether the tree mentions the named variable at all.
    pub fn references(&self, name: &str) -> bool {
        self.arity
            .iter()
            .position(|n| n == name)
            .is_some_and(|i| self.root.references(i))
    }

    pub fn is_constant_zero(&self) -> bool {
        matches!(self.root, Node::Const(v) if v == 0.0)
    }

    /// Canonical text form. Stable across runs and re-parses to a tree that
    /// evaluates identically.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.root.print(&self.arity, &mut s);
        s
    }

    fn from_root(root: Node, arity: Vec<String>) -> Self {
        let mut e = KernelExpr {
            source: String::new(),
            arity,
            root,
        };
        e.source = e.canonical();
        e
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SymmetrizeError {
    #[error("expected arity {expected:?}, got {found:?}")]
    WrongArity { expected: Vec<String>, found: Vec<String> },
    #[error("order {0} is too large to enumerate permutations")]
    OrderTooLarge(usize),
}

/// Variable names of an order-`n` series kernel: `t, s1..sn, x1..xn`.
pub fn series_arity(n: usize) -> Vec<String> {
    let mut names = vec!["t".to_string()];
    names.extend((1..=n).map(|i| format!("s{i}")));
    names.extend((1..=n).map(|i| format!("x{i}")));
    names
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Average of `f` over all permutations of its `(s_i, x_i)` pairs.
///
/// `f` must have the series arity `t, s1..sn, x1..xn`.
pub fn symmetrize(f: &KernelExpr, n: usize) -> Result<KernelExpr, SymmetrizeError> {
    let expected = series_arity(n);
    if f.arity != expected {
        return Err(SymmetrizeError::WrongArity {
            expected,
            found: f.arity.clone(),
        });
    }
    if n > 6 {
        return Err(SymmetrizeError::OrderTooLarge(n));
    }
    let perms = permutations(n);
    let count = perms.len();
    let mut terms = perms.into_iter().map(|p| {
        let mut map = vec![0usize; 1 + 2 * n];
        for (i, &pi) in p.iter().enumerate() {
            map[1 + i] = 1 + pi;
            map[1 + n + i] = 1 + n + pi;
        }
        f.root.remap(&map)
    });
    let first = terms.next().expect("at least one permutation");
    let sum = terms.fold(first, |acc, t| Node::Bin(BinOp::Add, Box::new(acc), Box::new(t)));
    let root = if count == 1 {
        sum
    } else {
        Node::Bin(
            BinOp::Mul,
            Box::new(Node::Const(1.0 / count as f64)),
            Box::new(sum),
        )
    };
    Ok(KernelExpr::from_root(root, expected))
}

/// Symmetrization of a second-order kernel `f(t, s1, s2, x1, x2)`:
/// `(f(t,s1,s2,x1,x2) + f(t,s2,s1,x2,x1)) / 2`.
pub fn symmetrize2(f2: &KernelExpr) -> Result<KernelExpr, SymmetrizeError> {
    symmetrize(f2, 2)
}
