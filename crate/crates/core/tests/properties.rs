mod common;

use common::*;
use edsc_core::event_manager::EventBuffer;
use edsc_core::ledger::{build_block, candidate_order, validate_block, LedgerConfig, LedgerState, TxPool};
use edsc_core::merkle;
use edsc_core::message::{Action, ScriptPredicate, SubscriptionParams};
use edsc_core::{Address, HashDigest};
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Sub {
    price: u128,
    limit: u64,
    burn: u64,
    revert_per_mille: u32,
}

fn sub_strategy() -> impl Strategy<Value = Sub> {
    (1u128..6, 20_000u64..60_000, 0u64..40_000, 0u32..1000)
        .prop_map(|(price, limit, burn, revert_per_mille)| Sub { price: price * 10, limit, burn, revert_per_mille })
}

fn fixture(subs: &[Sub]) -> (LedgerState, Address) {
    let (mut g, ev) = genesis();
    for (i, s) in subs.iter().enumerate() {
        let a = Address::from_label(&format!("sub{i}"));
        install(
            &mut g,
            a,
            vec![
                Action::ConsumeGas(s.burn),
                Action::Transfer { to: edsc_core::message::Target::TriggerPublisher, amount: 3, memo: vec![] },
                Action::RevertIf(ScriptPredicate::DigestChance(s.revert_per_mille)),
            ],
            1_000_000_000,
        );
        g.subscribe(ev, a, SubscriptionParams::new(s.price, s.limit));
    }
    (g.build(), ev)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn merkle_root_ignores_entry_order(mut entries in prop::collection::btree_map(any::<[u8; 4]>(), any::<u64>(), 0..20)
        .prop_map(|m| m.into_iter().map(|(k, v)| (k.to_vec(), v.to_be_bytes().to_vec())).collect::<Vec<_>>()),
        seed in any::<u64>())
    {
        let a = merkle::root_of_entries(&entries);
        let n = entries.len().max(1);
        entries.rotate_left((seed as usize) % n);
        prop_assert_eq!(a, merkle::root_of_entries(&entries));
    }

    #[test]
    fn chained_blocks_conserve_order_and_validate(
        subs in prop::collection::vec(sub_strategy(), 1..8),
        updates_per_block in prop::collection::vec(0usize..4, 1..5),
        gas_limit in 60_000u64..400_000,
    ) {
        let (mut state, ev) = fixture(&subs);
        let cfg = LedgerConfig::default();
        let supply = state.chain.total_supply();
        let mut nonce = 0;
        let mut parent = HashDigest::default();
        for (h, n) in updates_per_block.iter().enumerate() {
            let number = h as u64 + 1;
            let mut buf = EventBuffer::new(64);
            for _ in 0..*n {
                nonce += 1;
                buf.ingest(price_update(ev, nonce, nonce as i64), &state.events).unwrap();
            }
            let p = params(number, parent, gas_limit);
            let built = build_block(&state, &TxPool::default(), &buf, &p, &cfg);
            let again = build_block(&state, &TxPool::default(), &buf, &p, &cfg);
            prop_assert_eq!(&built.block, &again.block);

            let b = &built.block;
            prop_assert!(b.gas_used <= b.gas_limit);
            for w in 0..b.executions.len().saturating_sub(1) {
                if b.execution_rounds[w] == b.execution_rounds[w + 1] {
                    prop_assert!(candidate_order(&b.executions[w], &b.executions[w + 1]).is_lt());
                }
            }
            prop_assert_eq!(built.post.chain.total_supply(), supply);

            let v = validate_block(&state, parent, number - 1, b, &cfg);
            prop_assert!(v.is_ok(), "{:?}", v.err());
            parent = b.hash();
            state = built.post;
        }
    }
}
