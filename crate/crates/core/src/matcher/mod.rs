//! Gas-metered subscription matching.

mod eval;
mod parser;

pub use eval::{evaluate, MatchContext};
pub use parser::{parse_constraint, CmpOp, ConstraintError, Expr, Term, TermType, MAX_DEPTH, MAX_NODES};

use serde::{Deserialize, Serialize};

use crate::event_state::Subscription;
use crate::types::Gas;

/// Default gas per visited constraint node.
pub const EVAL_GAS_PER_NODE: Gas = 3;

/// The gate that decided a match, in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Pass,
    PublisherFilter,
    SubscriptionFee,
    BlockRate,
    EventRate,
    Constraint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub trigger: bool,
    pub eval_gas: Gas,
    pub reason: Gate,
}

impl Decision {
    /// Whether this update counts as an observed instance (the publisher
    /// gate passed).
    pub fn counts_instance(&self) -> bool {
        self.reason != Gate::PublisherFilter
    }

    fn fail(reason: Gate) -> Self {
        Self { trigger: false, eval_gas: 0, reason }
    }
}

/// Runs the gates in their fixed order: publisher filter, fee ceiling,
/// block rate, event rate, constraint. Only the constraint costs gas.
pub fn should_trigger(sub: &Subscription, ctx: &MatchContext<'_>, gas_per_node: Gas) -> Decision {
    let p = &sub.params;
    if !p.publisher_filter.is_empty() && !p.publisher_filter.contains(&ctx.update.publisher_key) {
        return Decision::fail(Gate::PublisherFilter);
    }
    if p.max_subscription_fee < ctx.update.subscription_fee {
        return Decision::fail(Gate::SubscriptionFee);
    }
    if p.block_rate > 0 {
        if let Some(last) = sub.last_trigger_block {
            if ctx.block_number.saturating_sub(last) < p.block_rate {
                return Decision::fail(Gate::BlockRate);
            }
        }
    }
    if p.event_rate > 0 && !(sub.instance_counter + 1).is_multiple_of(p.event_rate) {
        return Decision::fail(Gate::EventRate);
    }
    let (ok, eval_gas) = evaluate(&sub.constraint, ctx, gas_per_node);
    Decision { trigger: ok, eval_gas, reason: if ok { Gate::Pass } else { Gate::Constraint } }
}
