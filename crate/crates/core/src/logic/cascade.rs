//! Expression trees over the device gate set, evaluated bottom-up on a pool
//! of scratch units so any operator of the complete set can be synthesized.

use std::collections::HashMap;

use crate::codec::LevelCodec;
use crate::device::{spawn_unit, ModelParams, UnitState};
use crate::error::{Error, Result};

use super::{mvl_max, mvl_min, mvl_threshold, reset_to_logic0, xor_gate, LogicValue};

#[derive(Debug, Clone, PartialEq)]
pub enum CascadeExpr {
    Const(u8),
    Var(String),
    Max(Box<CascadeExpr>, Box<CascadeExpr>),
    Min(Box<CascadeExpr>, Box<CascadeExpr>),
    /// Threshold comparison against the constant k.
    Threshold(u8, Box<CascadeExpr>),
    Xor(Box<CascadeExpr>, Box<CascadeExpr>),
    Not(Box<CascadeExpr>),
}

/// Prefix grammar: `(max (min 2 p) q)`, `(thr 1 x)`, `(xor p q)`, `(not p)`.
pub fn parse_expr(text: &str) -> Result<CascadeExpr> {
    let mut tokens = tokenize(text);
    tokens.reverse();
    let expr = parse_tokens(&mut tokens)?;
    if !tokens.is_empty() {
        return Err(Error::Parse { offset: 0, msg: format!("trailing tokens: {tokens:?}") });
    }
    Ok(expr)
}

fn tokenize(text: &str) -> Vec<String> {
    text.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(|s| s.to_string())
        .collect()
}

fn parse_tokens(tokens: &mut Vec<String>) -> Result<CascadeExpr> {
    let tok = tokens.pop().ok_or(Error::Parse { offset: 0, msg: "unexpected end of expression".into() })?;
    if tok == "(" {
        let op = tokens.pop().ok_or(Error::Parse { offset: 0, msg: "missing operator".into() })?;
        let expr = match op.as_str() {
            "max" | "min" | "xor" => {
                let a = parse_tokens(tokens)?;
                let b = parse_tokens(tokens)?;
                match op.as_str() {
                    "max" => CascadeExpr::Max(Box::new(a), Box::new(b)),
                    "min" => CascadeExpr::Min(Box::new(a), Box::new(b)),
                    _ => CascadeExpr::Xor(Box::new(a), Box::new(b)),
                }
            }
            "not" => CascadeExpr::Not(Box::new(parse_tokens(tokens)?)),
            "thr" | "threshold" => {
                let k = match parse_tokens(tokens)? {
                    CascadeExpr::Const(k) => k,
                    other => {
                        return Err(Error::Parse { offset: 0, msg: format!("thr needs a constant k, got {other:?}") })
                    }
                };
                CascadeExpr::Threshold(k, Box::new(parse_tokens(tokens)?))
            }
            other => return Err(Error::Parse { offset: 0, msg: format!("unknown operator {other:?}") }),
        };
        match tokens.pop() {
            Some(t) if t == ")" => Ok(expr),
            other => Err(Error::Parse { offset: 0, msg: format!("expected ')', got {other:?}") }),
        }
    } else if tok == ")" {
        Err(Error::Parse { offset: 0, msg: "unexpected ')'".into() })
    } else if let Ok(v) = tok.parse::<u8>() {
        Ok(CascadeExpr::Const(v))
    } else {
        Ok(CascadeExpr::Var(tok))
    }
}

impl CascadeExpr {
    /// Pure arithmetic evaluation (the oracle the device result must match).
    pub fn eval_arith(&self, radix: u8, vars: &HashMap<String, u8>) -> Result<u8> {
        let v = match self {
            CascadeExpr::Const(v) => *v,
            CascadeExpr::Var(name) => *vars
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unbound variable {name:?}")))?,
            CascadeExpr::Max(a, b) => a.eval_arith(radix, vars)?.max(b.eval_arith(radix, vars)?),
            CascadeExpr::Min(a, b) => a.eval_arith(radix, vars)?.min(b.eval_arith(radix, vars)?),
            CascadeExpr::Threshold(k, a) => {
                if a.eval_arith(radix, vars)? == *k {
                    radix - 1
                } else {
                    0
                }
            }
            CascadeExpr::Xor(a, b) => {
                if radix != 2 {
                    return Err(Error::InvalidArgument("xor requires radix 2".into()));
                }
                a.eval_arith(radix, vars)? ^ b.eval_arith(radix, vars)?
            }
            CascadeExpr::Not(a) => {
                if radix != 2 {
                    return Err(Error::InvalidArgument("not requires radix 2".into()));
                }
                1 - a.eval_arith(radix, vars)?
            }
        };
        if v >= radix {
            return Err(Error::OutOfRange { what: "expression value", value: v as f64 });
        }
        Ok(v)
    }
}

/// Scratch units for intermediate gate results.
pub struct UnitPool {
    units: Vec<UnitState>,
    next: usize,
    seed: u64,
    cap: usize,
}

impl UnitPool {
    pub fn new(cap: usize, params: &ModelParams, seed: u64) -> Self {
        let _ = params;
        UnitPool { units: Vec::new(), next: 0, seed, cap }
    }

    fn acquire(&mut self, params: &ModelParams) -> Result<UnitState> {
        if self.next >= self.cap {
            return Err(Error::PoolExhausted);
        }
        let u = if self.next < self.units.len() {
            self.units[self.next].clone()
        } else {
            let u = spawn_unit(params, self.seed.wrapping_add(self.next as u64));
            self.units.push(u.clone());
            u
        };
        self.next += 1;
        Ok(u)
    }

    pub fn used(&self) -> usize {
        self.next
    }
}

/// Device-backed bottom-up evaluation; every gate node runs on its own pool
/// unit, and the result must equal the arithmetic evaluation.
pub fn cascade_eval(
    expr: &CascadeExpr,
    vars: &HashMap<String, u8>,
    radix: u8,
    pool: &mut UnitPool,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<LogicValue> {
    let value = eval_node(expr, vars, radix, pool, codec, params)?;
    LogicValue::new(radix, value)
}

fn eval_node(
    expr: &CascadeExpr,
    vars: &HashMap<String, u8>,
    radix: u8,
    pool: &mut UnitPool,
    codec: &LevelCodec,
    params: &ModelParams,
) -> Result<u8> {
    match expr {
        CascadeExpr::Const(v) => {
            if *v >= radix {
                return Err(Error::OutOfRange { what: "constant", value: *v as f64 });
            }
            Ok(*v)
        }
        CascadeExpr::Var(name) => {
            let v = *vars
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("unbound variable {name:?}")))?;
            if v >= radix {
                return Err(Error::OutOfRange { what: "variable", value: v as f64 });
            }
            Ok(v)
        }
        CascadeExpr::Max(a, b) | CascadeExpr::Min(a, b) => {
            let av = eval_node(a, vars, radix, pool, codec, params)?;
            let bv = eval_node(b, vars, radix, pool, codec, params)?;
            let unit = pool.acquire(params)?;
            let (out, _) = match expr {
                CascadeExpr::Max(..) => {
                    mvl_max(&unit, LogicValue::new(radix, av)?, LogicValue::new(radix, bv)?, codec, params)?
                }
                _ => mvl_min(&unit, LogicValue::new(radix, av)?, LogicValue::new(radix, bv)?, codec, params)?,
            };
            Ok(out.value)
        }
        CascadeExpr::Threshold(k, a) => {
            if *k >= radix {
                return Err(Error::OutOfRange { what: "threshold k", value: *k as f64 });
            }
            let av = eval_node(a, vars, radix, pool, codec, params)?;
            let unit = pool.acquire(params)?;
            let (out, _) =
                mvl_threshold(&unit, LogicValue::new(radix, av)?, LogicValue::new(radix, *k)?, codec, params)?;
            Ok(out.value)
        }
        CascadeExpr::Xor(a, b) => {
            if radix != 2 {
                return Err(Error::InvalidArgument("xor cascade requires radix 2".into()));
            }
            let av = eval_node(a, vars, radix, pool, codec, params)?;
            let bv = eval_node(b, vars, radix, pool, codec, params)?;
            let unit = pool.acquire(params)?;
            let unit = reset_to_logic0(&unit, params)?;
            Ok(xor_gate(&unit, av == 1, bv == 1, params)?.output)
        }
        CascadeExpr::Not(a) => {
            if radix != 2 {
                return Err(Error::InvalidArgument("not cascade requires radix 2".into()));
            }
            let av = eval_node(a, vars, radix, pool, codec, params)?;
            let unit = pool.acquire(params)?;
            let spec = super::gate_spec_by_name("not").expect("shipped gate");
            Ok(super::boolean_gate(&spec, &unit, av == 1, false, codec, params)?.output)
        }
    }
}
