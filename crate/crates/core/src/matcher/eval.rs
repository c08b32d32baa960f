use crate::event::{EventUpdate, Value};
use crate::types::{Gas, Height};

use super::parser::{CmpOp, Expr, Term};

/// Inputs visible to a constraint.
#[derive(Clone, Copy, Debug)]
pub struct MatchContext<'a> {
    pub update: &'a EventUpdate,
    pub block_number: Height,
    /// Seconds.
    pub block_time: i64,
}

enum Scalar {
    Int(i64),
    Bytes(Vec<u8>),
    Bool(bool),
}

fn resolve(term: &Term, ctx: &MatchContext<'_>) -> Scalar {
    match term {
        Term::Int(v) => Scalar::Int(*v),
        Term::Bytes(b) => Scalar::Bytes(b.clone()),
        Term::Bool(b) => Scalar::Bool(*b),
        Term::BlockNumber => Scalar::Int(i64::try_from(ctx.block_number).unwrap_or(i64::MAX)),
        Term::BlockTime => Scalar::Int(ctx.block_time),
        Term::Publisher => Scalar::Bytes(ctx.update.publisher_key.raw_bytes()),
        Term::Field { index, .. } => match &ctx.update.payload[*index] {
            Value::Int(v) => Scalar::Int(*v),
            Value::Bytes(b) => Scalar::Bytes(b.clone()),
            Value::Address(a) => Scalar::Bytes(a.0.to_vec()),
            Value::Bool(b) => Scalar::Bool(*b),
        },
    }
}

fn compare(op: CmpOp, l: Scalar, r: Scalar) -> bool {
    use std::cmp::Ordering;
    let ord = match (l, r) {
        (Scalar::Int(a), Scalar::Int(b)) => a.cmp(&b),
        (Scalar::Bytes(a), Scalar::Bytes(b)) => {
            if a == b {
                Ordering::Equal
            } else {
                Ordering::Less
            }
        }
        (Scalar::Bool(a), Scalar::Bool(b)) => {
            if a == b {
                Ordering::Equal
            } else {
                Ordering::Less
            }
        }
        // Rejected by the type checker.
        _ => return false,
    };
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

fn eval_nodes(expr: &Expr, ctx: &MatchContext<'_>, visited: &mut u64) -> bool {
    match expr {
        Expr::Lit(b) => {
            *visited += 1;
            *b
        }
        Expr::Test(t) => {
            *visited += 2;
            matches!(resolve(t, ctx), Scalar::Bool(true))
        }
        Expr::Cmp(op, l, r) => {
            *visited += 3;
            compare(*op, resolve(l, ctx), resolve(r, ctx))
        }
        Expr::And(a, b) => {
            *visited += 1;
            eval_nodes(a, ctx, visited) && eval_nodes(b, ctx, visited)
        }
        Expr::Or(a, b) => {
            *visited += 1;
            eval_nodes(a, ctx, visited) || eval_nodes(b, ctx, visited)
        }
        Expr::Not(a) => {
            *visited += 1;
            !eval_nodes(a, ctx, visited)
        }
    }
}

/// Evaluates with short-circuiting. Returns the truth value and the gas for
/// the nodes actually visited.
pub fn evaluate(expr: &Expr, ctx: &MatchContext<'_>, gas_per_node: Gas) -> (bool, Gas) {
    let mut visited = 0;
    let result = eval_nodes(expr, ctx, &mut visited);
    (result, visited * gas_per_node)
}
