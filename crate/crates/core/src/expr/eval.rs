use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Var};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{}` has no value", .0.name())]
    MissingVariable(Var),
    #[error("{message} in `{node}`")]
    Domain { message: String, node: String },
}

/// Values for the variables an expression may reference.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env {
    values: [f64; 5],
    present: u8,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var.index()] = value;
        self.present |= 1 << var.index();
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        (self.present & (1 << var.index()) != 0).then(|| self.values[var.index()])
    }

    /// Environment for nonlinearities of the form `f(t, u, v)`.
    pub fn tuv(t: f64, u: f64, v: f64) -> Self {
        Env::new().with(Var::T, t).with(Var::U, u).with(Var::V, v)
    }
}

fn domain(message: impl Into<String>, node: &Expr) -> EvalError {
    EvalError::Domain {
        message: message.into(),
        node: node.to_string(),
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> Result<f64, EvalError> {
        match self {
            Expr::Num(x) => Ok(*x),
            Expr::Var(v) => env.get(*v).ok_or(EvalError::MissingVariable(*v)),
            Expr::Neg(e) => Ok(-e.eval(env)?),
            Expr::Bin(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                match op {
                    BinOp::Add => Ok(x + y),
                    BinOp::Sub => Ok(x - y),
                    BinOp::Mul => Ok(x * y),
                    BinOp::Div => {
                        if y == 0.0 {
                            Err(domain("division by zero", self))
                        } else {
                            Ok(x / y)
                        }
                    }
                    BinOp::Pow => pow(x, y).ok_or_else(|| {
                        domain(format!("{x} ^ {y} is undefined over the reals"), self)
                    }),
                }
            }
            Expr::Call(func, args) => {
                let x = args[0].eval(env)?;
                match func {
                    Func::Abs => Ok(x.abs()),
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Sqrt => {
                        if x < 0.0 {
                            Err(domain(format!("square root of negative value {x}"), self))
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    Func::Sign => Ok(sign(x)),
                    Func::Min => Ok(x.min(args[1].eval(env)?)),
                    Func::Max => Ok(x.max(args[1].eval(env)?)),
                    Func::PowAbs => {
                        let e = args[1].eval(env)?;
                        powabs(x, e).ok_or_else(|| {
                            domain(format!("powabs({x}, {e}) is undefined"), self)
                        })
                    }
                }
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn pow(x: f64, y: f64) -> Option<f64> {
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        if x == 0.0 && y < 0.0 {
            return None;
        }
        return Some(x.powi(y as i32));
    }
    if x < 0.0 || (x == 0.0 && y < 0.0) {
        return None;
    }
    Some(x.powf(y))
}

/// `|x|^(e-1) x`, written as `sign(x) |x|^e` so that `x = 0` is finite for
/// every positive `e`.
pub(crate) fn powabs(x: f64, e: f64) -> Option<f64> {
    if x == 0.0 {
        return (e > 0.0).then_some(0.0);
    }
    Some(sign(x) * x.abs().powf(e))
}
