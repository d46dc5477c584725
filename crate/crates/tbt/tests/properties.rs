//! Randomized semantic laws of the partial-trajectory monitor.

use std::sync::Arc;

use proptest::prelude::*;
use tbt::formula::NodeTable;
use tbt::monitor::{self, MemoEval};
use tbt::{Formula, Predicate, Ternary, Trace};

const DIM: usize = 2;

fn arb_predicate() -> impl Strategy<Value = Formula> {
    (
        proptest::sample::select(vec![
            (1.0, 0.0),
            (0.0, 1.0),
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 0.0),
        ]),
        -4i32..=4,
        prop_oneof![Just(0.0), Just(0.25), Just(0.5)],
    )
        .prop_map(|((a0, a1), b4, delta)| {
            let b = f64::from(b4) * 0.25;
            let name = format!("p_{a0}_{a1}_{b4}_{delta}");
            Formula::Pred(Arc::new(Predicate::new(name, vec![a0, a1], b, delta).unwrap()))
        })
}

/// Formulas from the STL fragment only: no Sequence/Selector, so verdicts
/// are monotone in the knowledge order as the partial horizon grows.
fn arb_stl() -> impl Strategy<Value = Formula> {
    arb_predicate().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::Or),
            (0u32..=2, 0u32..=4, inner.clone())
                .prop_map(|(lo, w, c)| Formula::always(lo, lo + w, c).unwrap()),
            (0u32..=2, 0u32..=4, inner)
                .prop_map(|(lo, w, c)| Formula::eventually(lo, lo + w, c).unwrap()),
        ]
    })
}

/// Full TBT formulas, Sequence/Selector included.
fn arb_tbt() -> impl Strategy<Value = Formula> {
    arb_stl().prop_recursive(2, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::Seq),
            prop::collection::vec(inner, 2..=3).prop_map(Formula::Sel),
        ]
    })
}

fn arb_trace() -> impl Strategy<Value = Trace> {
    prop::collection::vec(prop::collection::vec(-8i32..=8, DIM), 3..=12).prop_map(|rows| {
        let samples = rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| f64::from(v) * 0.25).collect())
            .collect();
        Trace::new(samples, 1.0).unwrap()
    })
}

proptest! {
    /// STL verdicts refine monotonically: once a prefix decides T or F,
    /// every longer prefix agrees.
    #[test]
    fn stl_verdicts_monotone_in_horizon(f in arb_stl(), x in arb_trace()) {
        let last = x.last_index();
        for t1 in 0..=last {
            let mut decided: Option<Ternary> = None;
            for t2 in t1..=last {
                let v = monitor::eval(&f, &x, t1, t2).unwrap();
                if let Some(d) = decided {
                    prop_assert_eq!(v, d, "verdict flipped after deciding at t1={}", t1);
                } else if v != Ternary::Unknown {
                    decided = Some(v);
                }
            }
        }
    }

    /// Binary Sequence and Selector are associative at every pair.
    #[test]
    fn seq_sel_associative(
        a in arb_stl(), b in arb_stl(), c in arb_stl(),
        x in arb_trace(),
        seq in any::<bool>(),
    ) {
        let join = |l: Formula, r: Formula| if seq {
            Formula::Seq(vec![l, r])
        } else {
            Formula::Sel(vec![l, r])
        };
        let left = join(join(a.clone(), b.clone()), c.clone());
        let right = join(a, join(b, c));
        let last = x.last_index();
        for t1 in 0..=last {
            for t2 in t1..=last {
                prop_assert_eq!(
                    monitor::eval(&left, &x, t1, t2).unwrap(),
                    monitor::eval(&right, &x, t1, t2).unwrap(),
                    "t1={} t2={}", t1, t2
                );
            }
        }
    }

    /// Right-folding k-ary Sequence/Selector does not change any verdict.
    #[test]
    fn normalize_kary_preserves_verdicts(f in arb_tbt(), x in arb_trace()) {
        let norm = f.normalize_kary();
        let last = x.last_index();
        for t1 in 0..=last {
            for t2 in t1..=last {
                prop_assert_eq!(
                    monitor::eval(&f, &x, t1, t2).unwrap(),
                    monitor::eval(&norm, &x, t1, t2).unwrap(),
                );
            }
        }
    }

    /// The memoized DAG evaluator agrees with the direct recursion.
    #[test]
    fn memoized_eval_matches_direct(f in arb_tbt(), x in arb_trace()) {
        let norm = f.normalize_kary();
        let (table, root) = NodeTable::build(&norm);
        let mut memo = MemoEval::new(&table, &x);
        let last = x.last_index();
        for t1 in 0..=last {
            for t2 in t1..=last {
                prop_assert_eq!(
                    memo.eval(root, t1, t2).unwrap(),
                    monitor::eval(&f, &x, t1, t2).unwrap(),
                );
            }
        }
    }

    /// Double negation is the identity at every pair.
    #[test]
    fn double_negation(f in arb_tbt(), x in arb_trace()) {
        let nn = Formula::not(Formula::not(f.clone()));
        let last = x.last_index();
        for t1 in 0..=last {
            for t2 in t1..=last {
                prop_assert_eq!(
                    monitor::eval(&nn, &x, t1, t2).unwrap(),
                    monitor::eval(&f, &x, t1, t2).unwrap(),
                );
            }
        }
    }

    /// De Morgan over the K3 fold: not(and) == or(not).
    #[test]
    fn de_morgan(fs in prop::collection::vec(arb_stl(), 2..=3), x in arb_trace()) {
        let lhs = Formula::not(Formula::And(fs.clone()));
        let rhs = Formula::Or(fs.into_iter().map(Formula::not).collect());
        let last = x.last_index();
        for t1 in 0..=last {
            for t2 in t1..=last {
                prop_assert_eq!(
                    monitor::eval(&lhs, &x, t1, t2).unwrap(),
                    monitor::eval(&rhs, &x, t1, t2).unwrap(),
                );
            }
        }
    }
}
