use std::collections::HashMap;

use super::ast::{BinaryOp, Expr};
use super::error::EvalError;

const MAX_RANGE_LEN: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Number(f64),
    Bool(bool),
    Vector(Vec<Value>),
}

impl Value {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Number(n) => Some(*n != 0.0),
            _ => None,
        }
    }

    pub fn as_vec3(&self) -> Option<[f64; 3]> {
        match self {
            Value::Vector(items) if items.len() == 3 => Some([
                items[0].as_number()?,
                items[1].as_number()?,
                items[2].as_number()?,
            ]),
            _ => None,
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            Value::Number(n) => Expr::Number(*n),
            Value::Bool(b) => Expr::Bool(*b),
            Value::Vector(items) => Expr::Vector(items.iter().map(Value::to_expr).collect()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Number(n) => serde_json::json!(n),
            Value::Bool(b) => serde_json::json!(b),
            Value::Vector(items) => serde_json::Value::Array(items.iter().map(Value::to_json).collect()),
        }
    }
}

/// Lexically scoped variable bindings.
#[derive(Clone, Debug, Default)]
pub struct Env {
    vars: HashMap<String, Value>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(&self, name: &str, value: Value) -> Self {
        let mut next = self.clone();
        next.vars.insert(name.to_string(), value);
        next
    }

    pub fn set(&mut self, name: &str, value: Value) {
        self.vars.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }
}

impl FromIterator<(String, Value)> for Env {
    fn from_iter<T: IntoIterator<Item = (String, Value)>>(iter: T) -> Self {
        Self {
            vars: iter.into_iter().collect(),
        }
    }
}

pub fn eval(expr: &Expr, env: &Env, line: u32) -> Result<Value, EvalError> {
    let v = match expr {
        Expr::Number(n) => Value::Number(*n),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Ident(name) => env
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::new(line, format!("unknown variable `{name}`")))?,
        Expr::Vector(items) => Value::Vector(
            items
                .iter()
                .map(|e| eval(e, env, line))
                .collect::<Result<_, _>>()?,
        ),
        Expr::Range { .. } => Value::Vector(range_values(expr, env, line)?.into_iter().map(Value::Number).collect()),
        Expr::Neg(inner) => negate(eval(inner, env, line)?, line)?,
        Expr::Binary { op, lhs, rhs } => {
            binary(*op, eval(lhs, env, line)?, eval(rhs, env, line)?, line)?
        }
    };
    check_finite(&v, line)?;
    Ok(v)
}

fn check_finite(v: &Value, line: u32) -> Result<(), EvalError> {
    match v {
        Value::Number(n) if !n.is_finite() => Err(EvalError::new(line, "non-finite number")),
        Value::Vector(items) => items.iter().try_for_each(|i| check_finite(i, line)),
        _ => Ok(()),
    }
}

/// Values produced by a `[start : step : end]` range or a literal list.
pub fn range_values(expr: &Expr, env: &Env, line: u32) -> Result<Vec<f64>, EvalError> {
    let Expr::Range { start, step, end } = expr else {
        return match eval(expr, env, line)? {
            Value::Vector(items) => items
                .iter()
                .map(|i| i.as_number().ok_or_else(|| EvalError::new(line, "loop list must contain numbers")))
                .collect(),
            Value::Number(n) => Ok(vec![n]),
            Value::Bool(_) => Err(EvalError::new(line, "non-numeric loop range")),
        };
    };
    let number = |e: &Expr| -> Result<f64, EvalError> {
        eval(e, env, line)?
            .as_number()
            .ok_or_else(|| EvalError::new(line, "non-numeric range bound"))
    };
    let (a, b) = (number(start)?, number(end)?);
    let s = match step {
        Some(s) => number(s)?,
        None => 1.0,
    };
    if s == 0.0 {
        return Err(EvalError::new(line, "range step is zero"));
    }
    let mut out = Vec::new();
    let count = ((b - a) / s).floor();
    if count < 0.0 {
        return Ok(out);
    }
    if count as usize >= MAX_RANGE_LEN {
        return Err(EvalError::new(line, "range too long"));
    }
    // Index-based stepping avoids accumulated drift.
    for k in 0..=(count as usize) {
        out.push(a + s * k as f64);
    }
    Ok(out)
}

fn negate(v: Value, line: u32) -> Result<Value, EvalError> {
    match v {
        Value::Number(n) => Ok(Value::Number(-n)),
        Value::Vector(items) => Ok(Value::Vector(
            items.into_iter().map(|i| negate(i, line)).collect::<Result<_, _>>()?,
        )),
        Value::Bool(_) => Err(EvalError::new(line, "cannot negate a boolean")),
    }
}

fn binary(op: BinaryOp, a: Value, b: Value, line: u32) -> Result<Value, EvalError> {
    use Value::{Number as N, Vector as V};
    match (op, a, b) {
        (BinaryOp::Div, _, N(d)) if d == 0.0 => Err(EvalError::new(line, "division by zero")),
        (op, N(x), N(y)) => Ok(N(match op {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div => x / y,
        })),
        (BinaryOp::Add | BinaryOp::Sub, V(xs), V(ys)) => {
            if xs.len() != ys.len() {
                return Err(EvalError::new(line, "vector length mismatch"));
            }
            Ok(V(xs
                .into_iter()
                .zip(ys)
                .map(|(x, y)| binary(op, x, y, line))
                .collect::<Result<_, _>>()?))
        }
        (BinaryOp::Mul | BinaryOp::Div, V(xs), N(y)) => Ok(V(xs
            .into_iter()
            .map(|x| binary(op, x, N(y), line))
            .collect::<Result<_, _>>()?)),
        (BinaryOp::Mul, N(x), V(ys)) => Ok(V(ys
            .into_iter()
            .map(|y| binary(op, N(x), y, line))
            .collect::<Result<_, _>>()?)),
        (op, _, _) => Err(EvalError::new(
            line,
            format!("unsupported operands for `{}`", op.symbol()),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scad::parser::parse_str;
    use crate::scad::ast::NodeKind;

    fn eval_src(expr: &str, env: &Env) -> Result<Value, EvalError> {
        let tree = parse_str(&format!("x = {expr};")).unwrap();
        let NodeKind::Assign { value, .. } = &tree.node(tree.root().children[0]).kind else {
            panic!()
        };
        eval(value, env, 1)
    }

    #[test]
    fn arithmetic() {
        let env = Env::new().with("a", Value::Number(2.0));
        assert_eq!(eval_src("a*3 + 1", &env).unwrap(), Value::Number(7.0));
        assert_eq!(eval_src("-(a - 5)", &env).unwrap(), Value::Number(3.0));
        assert_eq!(
            eval_src("[1,2,3] * a - [0,1,0]", &env).unwrap(),
            Value::Vector(vec![Value::Number(2.0), Value::Number(3.0), Value::Number(6.0)])
        );
    }

    #[test]
    fn division_by_zero_is_error() {
        let err = eval_src("1 / (2 - 2)", &Env::new()).unwrap_err();
        assert_eq!(err.message, "division by zero");
    }

    #[test]
    fn range_semantics() {
        let env = Env::new();
        let tree = parse_str("for (i = [0:2]) cube(1); for (j = [10:-5:0]) cube(1); for (k = [3:1]) cube(1);").unwrap();
        let mut all = Vec::new();
        for &c in &tree.root().children {
            let NodeKind::For { bindings } = &tree.node(c).kind else { panic!() };
            all.push(range_values(&bindings[0].1, &env, 1).unwrap());
        }
        assert_eq!(all[0], vec![0.0, 1.0, 2.0]);
        assert_eq!(all[1], vec![10.0, 5.0, 0.0]);
        assert!(all[2].is_empty());
    }

    #[test]
    fn unknown_variable() {
        assert!(eval_src("y + 1", &Env::new()).unwrap_err().message.contains("`y`"));
    }
}
