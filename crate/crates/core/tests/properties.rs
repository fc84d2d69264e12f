//! Property tests against simple reference models.

use std::collections::HashMap;

use parfilter::gqf::encoding::CountGroup;
use parfilter::{BulkTcf, BulkTcfParams, Gqf, QfParams, Tcf, TcfParams};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum QfOp {
    Insert(u64, u64),
    Delete(u64, u64),
}

fn qf_op(universe: u64) -> impl Strategy<Value = QfOp> {
    prop_oneof![
        3 => (0..universe, 1..300u64).prop_map(|(k, d)| QfOp::Insert(k, d)),
        1 => (0..universe, 1..300u64).prop_map(|(k, d)| QfOp::Delete(k, d)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With 64-bit remainders collisions are practically impossible, so
    /// counts must match a hash map exactly.
    #[test]
    fn gqf_matches_multiset(ops in prop::collection::vec(qf_op(500), 1..400), r in prop::sample::select(vec![8u32, 16, 64])) {
        let g = Gqf::new(QfParams::new(10, r)).unwrap();
        let mut model: HashMap<u64, u64> = HashMap::new();
        for op in &ops {
            match *op {
                QfOp::Insert(k, d) => {
                    g.insert(k, d).unwrap();
                    *model.entry(k).or_default() += d;
                }
                QfOp::Delete(k, d) => {
                    let had = model.get(&k).copied().unwrap_or(0);
                    let hit = g.delete(k, d).unwrap();
                    if had > 0 {
                        prop_assert!(hit);
                        model.insert(k, had.saturating_sub(d));
                    }
                }
            }
        }
        g.validate().unwrap();
        for (&k, &c) in &model {
            if r == 64 {
                prop_assert_eq!(g.count(k), c);
            } else {
                prop_assert!(g.count(k) >= c);
            }
        }
        if r == 64 {
            prop_assert_eq!(g.len(), model.values().sum::<u64>());
        }
    }

    #[test]
    fn gqf_bulk_equals_point(keys in prop::collection::vec(0..3000u64, 0..3000), workers in 1..5usize) {
        let p = QfParams::new(14, 8);
        let point = Gqf::new(p.clone()).unwrap();
        for &k in &keys {
            point.insert(k, 1).unwrap();
        }
        let mut bulk = Gqf::new(p).unwrap();
        bulk.bulk_insert(&keys, workers).unwrap();
        bulk.validate().unwrap();
        prop_assert_eq!(point.enumerate().unwrap(), bulk.enumerate().unwrap());
        let stats = bulk.bulk_delete(&keys, workers).unwrap();
        prop_assert_eq!(stats.absent, 0);
        prop_assert!(bulk.is_bit_empty());
    }

    #[test]
    fn count_group_round_trip(head in any::<u64>(), count in 1..u64::MAX, r in prop::sample::select(vec![8u32, 16, 32, 64])) {
        let head = if r == 64 { head } else { head & ((1 << r) - 1) };
        let g = CountGroup::new(head, count);
        let enc = g.encode(r);
        prop_assert_eq!(enc.len(), g.encoded_len(r));
        prop_assert_eq!(CountGroup::decode(&enc, r).unwrap(), (g, enc.len()));
    }

    /// Inserted keys are always found. Removing every key empties the table,
    /// except that a remove can take another key's entry with the same tag
    /// from a shared block; the owner's later remove then misses, and each
    /// such miss leaves exactly one entry behind.
    #[test]
    fn tcf_no_false_negatives(keys in prop::collection::hash_set(any::<u64>(), 0..3000), seed in any::<u64>()) {
        let t = Tcf::new(TcfParams { num_blocks: 1 << 8, seed, ..TcfParams::default() }).unwrap();
        for &k in &keys {
            t.insert(k, 0).unwrap();
        }
        t.validate().unwrap();
        for &k in &keys {
            prop_assert!(t.contains(k));
        }
        let misses = keys.iter().filter(|&&k| !t.remove(k)).count();
        prop_assert_eq!(t.len(), misses);
        prop_assert!(misses * 100 <= keys.len().max(100));
        t.validate().unwrap();
    }

    #[test]
    fn bulk_tcf_batches(batches in prop::collection::vec(prop::collection::vec(any::<u64>(), 0..800), 1..6), workers in 1..4usize) {
        let mut p = BulkTcfParams::with_log_slots(13).unwrap();
        p.seed = 9;
        let mut b = BulkTcf::new(p).unwrap();
        let mut held = 0;
        for batch in &batches {
            let s = b.bulk_insert(batch, workers);
            prop_assert_eq!(s.failed, 0);
            held += batch.len();
            b.validate().unwrap();
            prop_assert!(b.bulk_query(batch, workers).iter().all(|&x| x));
        }
        prop_assert_eq!(b.len(), held);
        let all: Vec<u64> = batches.concat();
        prop_assert_eq!(b.bulk_delete(&all), all.len());
        prop_assert_eq!(b.len(), 0);
        b.validate().unwrap();
    }
}
