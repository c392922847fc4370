mod common;

use std::collections::BTreeSet;

use common::OracleCase;
use gridrep::mining::{
    mine_mfcp, parse_transactions, BinaryContext, MiningError, MiningThresholds,
};
use proptest::prelude::*;

fn case() -> impl Strategy<Value = OracleCase> {
    (1u32..=8)
        .prop_flat_map(|items| {
            (
                Just(items),
                prop::collection::vec(prop::collection::vec(any::<bool>(), items as usize), 1..=20),
                1u32..=70,
                0u32..=100,
            )
        })
        .prop_map(|(items, rows, minsupp_pct, min_conf_pct)| OracleCase {
            items,
            rows: rows
                .into_iter()
                .map(|r| (0..items).filter(|&i| r[i as usize]).collect())
                .collect(),
            minsupp_pct,
            min_conf_pct,
        })
}

fn mined(c: &OracleCase) -> Vec<gridrep::Pattern> {
    let t = MiningThresholds::new(c.minsupp(), c.min_conf()).unwrap();
    mine_mfcp(&BinaryContext::from_transactions(&c.rows), &t).unwrap()
}

proptest! {
    #[test]
    fn matches_brute_force(c in case()) {
        let got: BTreeSet<Vec<u32>> = mined(&c).into_iter().map(|p| p.items).collect();
        prop_assert_eq!(got, c.maximal());
    }

    #[test]
    fn reported_supports_are_exact(c in case()) {
        for p in mined(&c) {
            prop_assert_eq!(p.support.count, c.count(&p.items));
            prop_assert_eq!(p.support.total, c.rows.len());
            let max_item = p.items.iter().map(|&i| c.count(&[i])).max().unwrap();
            prop_assert_eq!(p.almax.count, max_item);
        }
    }

    #[test]
    fn every_subset_of_a_result_passes(c in case()) {
        for p in mined(&c) {
            for mask in 1u32..(1 << p.len()) {
                let sub: Vec<u32> = p.items.iter().enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect();
                prop_assert!(c.passes(&sub), "{:?} from {:?}", sub, p.items);
            }
        }
    }

    #[test]
    fn results_are_sorted_and_antichain(c in case()) {
        let ps = mined(&c);
        for w in ps.windows(2) {
            prop_assert!(w[0].len() > w[1].len() || (w[0].len() == w[1].len() && w[0].items < w[1].items));
        }
        for a in &ps {
            for b in &ps {
                if a.items != b.items {
                    prop_assert!(!a.items.iter().all(|i| b.items.contains(i)));
                }
            }
        }
    }

    #[test]
    fn empty_transactions_do_not_change_results_at_fixed_count(c in case(), extra in 1usize..20) {
        let ctx = BinaryContext::from_transactions(&c.rows);
        let n = c.rows.len();
        let t = MiningThresholds::new(c.minsupp(), c.min_conf()).unwrap();
        let count = t.min_count(n);
        let padded_t = MiningThresholds::new(count as f64 / (n + extra) as f64, c.min_conf()).unwrap();
        prop_assert_eq!(padded_t.min_count(n + extra), count);
        let strip = |ps: Vec<gridrep::Pattern>| ps.into_iter().map(|p| (p.items, p.support.count)).collect::<Vec<_>>();
        let base = strip(mine_mfcp(&ctx, &t).unwrap());
        let padded = strip(mine_mfcp(&ctx.padded(extra), &padded_t).unwrap());
        prop_assert_eq!(base, padded);
    }
}

#[test]
fn candidate_guard_aborts() {
    let rows: Vec<Vec<u32>> = (0..4).map(|_| (0..12).collect()).collect();
    let t = MiningThresholds::new(0.5, 0.5)
        .unwrap()
        .with_max_candidates(10);
    let err = mine_mfcp(&BinaryContext::from_transactions(&rows), &t).unwrap_err();
    assert!(matches!(
        err,
        MiningError::CandidateExplosion {
            level: 2,
            limit: 10
        }
    ));
}

#[test]
fn transaction_file_parsing() {
    let rows = parse_transactions("# c\n1 2\n\n3\n").unwrap();
    assert_eq!(rows, vec![vec![1, 2], vec![], vec![3]]);
    assert!(matches!(
        parse_transactions("1 x"),
        Err(MiningError::BadItem { line: 1, .. })
    ));
}
