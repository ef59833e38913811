use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use vahr_core::broker::Broker;
use vahr_core::metrics::{level_percent, TaskId};
use vahr_core::scenario::{run, Scenario};
use vahr_core::shadow::{compute_delta, ShadowStore, StatePatch};
use vahr_core::voice_link::recognize;
use vahr_core::{Scalar, StateMap};

fn scalar() -> impl Strategy<Value = Scalar> {
    prop_oneof![
        any::<bool>().prop_map(Scalar::Bool),
        (-3i64..3).prop_map(Scalar::Int),
        "[ab]".prop_map(Scalar::Str),
    ]
}

fn patch() -> impl Strategy<Value = (StateMap, BTreeSet<String>)> {
    (
        prop::collection::btree_map("[a-d]", scalar(), 0..3),
        prop::collection::btree_set("[a-d]", 0..2),
    )
        .prop_map(|(entries, tombs)| {
            let tombs = tombs.into_iter().filter(|k| !entries.contains_key(k)).collect();
            (entries, tombs)
        })
}

proptest! {
    #[test]
    fn shadow_matches_sequential_merge(steps in prop::collection::vec((any::<bool>(), patch()), 0..20)) {
        let mut store = ShadowStore::new();
        store.register("t").unwrap();
        let (mut desired, mut reported) = (StateMap::new(), StateMap::new());
        let start = store.peek("t").unwrap().version;
        for (i, (to_desired, (entries, tombs))) in steps.iter().enumerate() {
            let target = if *to_desired { &mut desired } else { &mut reported };
            for k in tombs {
                target.remove(k);
            }
            target.extend(entries.clone());
            let p = StatePatch::new(entries.clone(), tombs.clone()).unwrap();
            let doc = if *to_desired {
                store.update_desired("t", &p).unwrap()
            } else {
                store.update_reported("t", &p).unwrap()
            };
            prop_assert_eq!(&doc.desired, &desired);
            prop_assert_eq!(&doc.reported, &reported);
            prop_assert_eq!(doc.delta, compute_delta(&desired, &reported));
            prop_assert_eq!(doc.version, start + i as u64 + 1);
        }
        prop_assert_eq!(store.total_requests().writes, steps.len() as u64);
    }

    #[test]
    fn broker_drains_in_time_publisher_seq_order(
        publishes in prop::collection::vec((0u64..50, 0usize..3), 1..30),
        latency in 0u64..20,
    ) {
        let mut broker = Broker::new(latency);
        broker.subscribe("s", "#").unwrap();
        let mut sorted = publishes.clone();
        sorted.sort_by_key(|(t, _)| *t);
        let mut sent = Vec::new();
        for (t, p) in &sorted {
            broker.set_time(*t).unwrap();
            let r = broker.publish(&format!("p{p}"), "x/y", StateMap::new()).unwrap();
            sent.push((r.message.sim_time, r.message.publisher_id.clone(), r.message.seq));
        }
        let last = sorted.last().unwrap().0;
        broker.set_time(last + latency).unwrap();
        let got: Vec<_> = broker
            .drain("s")
            .unwrap()
            .into_iter()
            .map(|m| (m.sim_time, m.publisher_id, m.seq))
            .collect();
        let mut expected = sent.clone();
        expected.sort();
        prop_assert_eq!(&got, &expected);
        for pid in 0..3 {
            let seqs: Vec<u64> = got.iter().filter(|m| m.1 == format!("p{pid}")).map(|m| m.2).collect();
            prop_assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn messages_stay_hidden_until_latency_elapses(t in 0u64..100, latency in 1u64..50) {
        let mut broker = Broker::new(latency);
        broker.subscribe("s", "a/+").unwrap();
        broker.set_time(t).unwrap();
        broker.publish("p", "a/b", StateMap::new()).unwrap();
        broker.set_time(t + latency - 1).unwrap();
        prop_assert!(broker.drain("s").unwrap().is_empty());
        broker.set_time(t + latency).unwrap();
        prop_assert_eq!(broker.drain("s").unwrap().len(), 1);
    }

    #[test]
    fn recognition_drops_at_most_one_word(words in prop::collection::vec("[a-z]{1,6}", 1..8), p in 0.0f64..=1.0, seed: u64) {
        let text = words.join(" ");
        let heard = recognize(&text, p, &mut ChaCha8Rng::seed_from_u64(seed));
        let heard_words: Vec<&str> = heard.split_whitespace().collect();
        if heard != text {
            prop_assert_eq!(heard_words.len() + 1, words.len());
            let dropped = (0..words.len()).any(|i| {
                let mut w: Vec<&str> = words.iter().map(String::as_str).collect();
                w.remove(i);
                w == heard_words
            });
            prop_assert!(dropped);
        }
    }

    #[test]
    fn tlx_percent_is_linear_in_level(level in 1u8..=21) {
        prop_assert_eq!(level_percent("mental", level).unwrap(), f64::from(level - 1) * 5.0);
    }

    #[test]
    fn tlx_rejects_out_of_range_levels(level in prop_oneof![Just(0u8), 22u8..=255]) {
        prop_assert!(level_percent("effort", level).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scripted_runs_succeed_for_any_seed(seed: u64) {
        let out = run(&Scenario::bundled_full(), seed).unwrap();
        prop_assert!(out.report.complete);
        prop_assert_eq!(out.report.task_outcomes.len(), 3);
        prop_assert!(out.report.task_outcomes[&TaskId::III]);
        prop_assert!(out.report.metrics.unpaired_events.is_empty());
    }
}
