//! Partial-trajectory ternary semantics for STL/TBT formulas.
//!
//! This module is the semantic reference: the mixed-integer encoder is
//! cross-validated against it, and the CLI exposes it as a standalone trace
//! checker. Two evaluation paths exist on purpose — a direct recursive
//! evaluator over the AST and a memoized evaluator over the shared
//! [`NodeTable`] DAG — and the test suite holds them equal.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::formula::{Formula, FormulaError, Node, NodeId, NodeTable, Predicate};
use crate::ternary::Ternary;
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MonitorError {
    #[error("evaluation pair (t1={t1}, t2={t2}) out of range for trace ending at {last}")]
    IndexOutOfRange { t1: usize, t2: usize, last: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Ternary valuation of a predicate at a single state.
pub fn eval_predicate(mu: &Predicate, x: &[f64]) -> Result<Ternary, MonitorError> {
    Ok(mu.eval(x)?)
}

/// Verdict of `f` at evaluation step `t1` over the partial trajectory
/// ending at `t2`.
///
/// Timed operators evaluate their search window against the partial
/// horizon: a complete window folds plainly, a truncated window is capped
/// at `U` unless it short-circuits, and a window starting past the horizon
/// is `U` outright. Sequence quantifies a split point over `[t1, t2-1]`
/// with disjoint segments; the empty split range (`t1 = t2`) yields `F`,
/// the identity of the outer disjunction. Selector quantifies over
/// `[t1, t2]` with segments sharing the split step, so it has no empty
/// case. Both choices make the operators associative at the verdict level.
pub fn eval(f: &Formula, x: &Trace, t1: usize, t2: usize) -> Result<Ternary, MonitorError> {
    check_range(x, t1, t2)?;
    eval_unchecked(f, x, t1, t2)
}

fn check_range(x: &Trace, t1: usize, t2: usize) -> Result<(), MonitorError> {
    if t1 > t2 || t2 > x.last_index() {
        return Err(MonitorError::IndexOutOfRange { t1, t2, last: x.last_index() });
    }
    Ok(())
}

fn eval_unchecked(f: &Formula, x: &Trace, t1: usize, t2: usize) -> Result<Ternary, MonitorError> {
    match f {
        Formula::Pred(p) => eval_predicate(p, x.sample(t1)),
        Formula::Not(c) => Ok(eval_unchecked(c, x, t1, t2)?.not()),
        Formula::And(cs) => {
            let mut acc = Ternary::True;
            for c in cs {
                acc = acc.and(eval_unchecked(c, x, t1, t2)?);
                if acc == Ternary::False {
                    break;
                }
            }
            Ok(acc)
        }
        Formula::Or(cs) => {
            let mut acc = Ternary::False;
            for c in cs {
                acc = acc.or(eval_unchecked(c, x, t1, t2)?);
                if acc == Ternary::True {
                    break;
                }
            }
            Ok(acc)
        }
        Formula::Always { lo, hi, child } => {
            eval_timed(t1, t2, *lo, *hi, true, |tau, t2| eval_unchecked(child, x, tau, t2))
        }
        Formula::Eventually { lo, hi, child } => {
            eval_timed(t1, t2, *lo, *hi, false, |tau, t2| eval_unchecked(child, x, tau, t2))
        }
        Formula::Seq(cs) => eval_chain(cs, x, t1, t2, true),
        Formula::Sel(cs) => eval_chain(cs, x, t1, t2, false),
    }
}

fn eval_timed(
    t1: usize,
    t2: usize,
    lo: u32,
    hi: u32,
    conjunctive: bool,
    mut child: impl FnMut(usize, usize) -> Result<Ternary, MonitorError>,
) -> Result<Ternary, MonitorError> {
    let win_lo = t1 + lo as usize;
    let win_hi = t1 + hi as usize;
    let complete = win_hi <= t2;
    let upper = win_hi.min(t2);
    let mut acc = if complete {
        if conjunctive { Ternary::True } else { Ternary::False }
    } else {
        // Truncated window: U bounds the verdict unless a short-circuit
        // drives the fold past it.
        Ternary::Unknown
    };
    let mut tau = win_lo;
    while tau <= upper {
        let v = child(tau, t2)?;
        acc = if conjunctive { acc.and(v) } else { acc.or(v) };
        let stop = if conjunctive { Ternary::False } else { Ternary::True };
        if acc == stop {
            break;
        }
        tau += 1;
    }
    Ok(acc)
}

/// Right-nested evaluation of a k-ary Sequence (`conjunctive` inner
/// connective) or Selector chain; equivalent to normalizing first.
fn eval_chain(
    cs: &[Formula],
    x: &Trace,
    t1: usize,
    t2: usize,
    seq: bool,
) -> Result<Ternary, MonitorError> {
    match cs {
        [] => unreachable!("Seq/Sel operand lists are nonempty"),
        [only] => eval_unchecked(only, x, t1, t2),
        [head, rest @ ..] => {
            let mut acc = Ternary::False;
            if seq {
                for tau in t1..t2 {
                    let left = eval_unchecked(head, x, t1, tau)?;
                    acc = acc.or(left.and(eval_chain(rest, x, tau + 1, t2, seq)?));
                    if acc == Ternary::True {
                        break;
                    }
                }
            } else {
                for tau in t1..=t2 {
                    let left = eval_unchecked(head, x, t1, tau)?;
                    acc = acc.or(left.or(eval_chain(rest, x, tau, t2, seq)?));
                    if acc == Ternary::True {
                        break;
                    }
                }
            }
            Ok(acc)
        }
    }
}

/// Memoized evaluator over a [`NodeTable`]. Untimed nodes collapse their
/// memo key to `(id, t1, t1)`, mirroring the encoder's variable sharing.
pub struct MemoEval<'a> {
    table: &'a NodeTable,
    trace: &'a Trace,
    memo: HashMap<(NodeId, usize, usize), Ternary>,
}

impl<'a> MemoEval<'a> {
    pub fn new(table: &'a NodeTable, trace: &'a Trace) -> Self {
        MemoEval { table, trace, memo: HashMap::new() }
    }

    pub fn eval(&mut self, id: NodeId, t1: usize, t2: usize) -> Result<Ternary, MonitorError> {
        check_range(self.trace, t1, t2)?;
        self.eval_inner(id, t1, t2)
    }

    fn eval_inner(&mut self, id: NodeId, t1: usize, t2: usize) -> Result<Ternary, MonitorError> {
        let t2_key = if self.table.is_untimed(id) { t1 } else { t2 };
        if let Some(&v) = self.memo.get(&(id, t1, t2_key)) {
            return Ok(v);
        }
        let v = match self.table.node(id).clone() {
            Node::Pred(i) => eval_predicate(&self.table.predicates[i], self.trace.sample(t1))?,
            Node::Not(c) => self.eval_inner(c, t1, t2)?.not(),
            Node::And(cs) => {
                let mut acc = Ternary::True;
                for c in cs {
                    acc = acc.and(self.eval_inner(c, t1, t2)?);
                }
                acc
            }
            Node::Or(cs) => {
                let mut acc = Ternary::False;
                for c in cs {
                    acc = acc.or(self.eval_inner(c, t1, t2)?);
                }
                acc
            }
            Node::Always { lo, hi, child } => {
                eval_timed(t1, t2, lo, hi, true, |tau, t2| {
                    self.eval_inner(child, tau, t2)
                })?
            }
            Node::Eventually { lo, hi, child } => {
                eval_timed(t1, t2, lo, hi, false, |tau, t2| {
                    self.eval_inner(child, tau, t2)
                })?
            }
            Node::Seq(l, r) => self.eval_split(l, r, t1, t2, true)?,
            Node::Sel(l, r) => self.eval_split(l, r, t1, t2, false)?,
        };
        self.memo.insert((id, t1, t2_key), v);
        Ok(v)
    }

    fn eval_split(
        &mut self,
        left: NodeId,
        right: NodeId,
        t1: usize,
        t2: usize,
        seq: bool,
    ) -> Result<Ternary, MonitorError> {
        let mut acc = Ternary::False;
        if seq {
            for tau in t1..t2 {
                let l = self.eval_inner(left, t1, tau)?;
                let r = self.eval_inner(right, tau + 1, t2)?;
                acc = acc.or(l.and(r));
            }
        } else {
            for tau in t1..=t2 {
                let l = self.eval_inner(left, t1, tau)?;
                let r = self.eval_inner(right, tau, t2)?;
                acc = acc.or(l.or(r));
            }
        }
        Ok(acc)
    }
}

/// Upper-triangular map `(t1, t2) -> verdict` over every pair with
/// `0 <= t1 <= t2 <= last index`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictMatrix {
    entries: Vec<((usize, usize), Ternary)>,
    pub formula_hash: u64,
}

impl VerdictMatrix {
    pub fn get(&self, t1: usize, t2: usize) -> Option<Ternary> {
        self.entries
            .binary_search_by_key(&(t1, t2), |(k, _)| *k)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn entries(&self) -> &[((usize, usize), Ternary)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV rendering with header `t1,t2,verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t1,t2,verdict\n");
        for ((t1, t2), v) in &self.entries {
            let _ = writeln!(out, "{t1},{t2},{v}");
        }
        out
    }
}

/// Evaluates `f` at every upper-triangular pair of the trace. Dispatches to
/// the data-parallel implementation when the `parallel` feature is enabled.
pub fn verdict_matrix(f: &Formula, x: &Trace) -> Result<VerdictMatrix, MonitorError> {
    #[cfg(feature = "parallel")]
    {
        verdict_matrix_par(f, x)
    }
    #[cfg(not(feature = "parallel"))]
    {
        verdict_matrix_seq(f, x)
    }
}

/// Sequential verdict matrix: one memo table shared across all pairs.
pub fn verdict_matrix_seq(f: &Formula, x: &Trace) -> Result<VerdictMatrix, MonitorError> {
    let (table, root) = NodeTable::build(f);
    let mut eval = MemoEval::new(&table, x);
    let last = x.last_index();
    let mut entries = Vec::with_capacity((last + 1) * (last + 2) / 2);
    for t1 in 0..=last {
        for t2 in t1..=last {
            entries.push(((t1, t2), eval.eval(root, t1, t2)?));
        }
    }
    Ok(VerdictMatrix { entries, formula_hash: f.normalize_kary().structural_hash() })
}

/// Parallel verdict matrix: one memoized column per partial horizon t2,
/// columns evaluated independently on the rayon pool.
#[cfg(feature = "parallel")]
pub fn verdict_matrix_par(f: &Formula, x: &Trace) -> Result<VerdictMatrix, MonitorError> {
    use rayon::prelude::*;

    let (table, root) = NodeTable::build(f);
    let last = x.last_index();
    let columns: Result<Vec<Vec<((usize, usize), Ternary)>>, MonitorError> = (0..=last)
        .into_par_iter()
        .map(|t2| {
            let mut eval = MemoEval::new(&table, x);
            (0..=t2)
                .map(|t1| Ok(((t1, t2), eval.eval(root, t1, t2)?)))
                .collect()
        })
        .collect();
    let mut entries: Vec<((usize, usize), Ternary)> = columns?.into_iter().flatten().collect();
    entries.sort_by_key(|(k, _)| *k);
    Ok(VerdictMatrix { entries, formula_hash: f.normalize_kary().structural_hash() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Formula;
    use std::sync::Arc;

    fn pred(name: &str, a: Vec<f64>, b: f64, delta: f64) -> Formula {
        Formula::Pred(Arc::new(Predicate::new(name, a, b, delta).unwrap()))
    }

    fn trace1(vals: &[f64]) -> Trace {
        Trace::new(vals.iter().map(|v| vec![*v]).collect(), 1.0).unwrap()
    }

    #[test]
    fn predicate_cases() {
        let mu = Predicate::new("m", vec![1.0], 0.0, 0.25).unwrap();
        assert_eq!(eval_predicate(&mu, &[0.5]).unwrap(), Ternary::True);
        assert_eq!(eval_predicate(&mu, &[0.0]).unwrap(), Ternary::Unknown);
        assert_eq!(eval_predicate(&mu, &[-0.5]).unwrap(), Ternary::False);
        // Boundaries are definite, not Unknown.
        assert_eq!(eval_predicate(&mu, &[0.25]).unwrap(), Ternary::True);
        assert_eq!(eval_predicate(&mu, &[-0.25]).unwrap(), Ternary::False);
        let classical = Predicate::new("c", vec![1.0], 0.0, 0.0).unwrap();
        assert_eq!(eval_predicate(&classical, &[0.0]).unwrap(), Ternary::True);
        assert_eq!(eval_predicate(&classical, &[-0.1]).unwrap(), Ternary::False);
        assert!(eval_predicate(&mu, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn truncated_always_is_unknown() {
        let f = Formula::always(0, 3, pred("m", vec![1.0], 0.0, 0.5)).unwrap();
        let x = trace1(&[1.0, 1.0]);
        assert_eq!(eval(&f, &x, 0, 1).unwrap(), Ternary::Unknown);
    }

    #[test]
    fn truncated_always_short_circuits_to_false() {
        let f = Formula::always(0, 3, pred("m", vec![1.0], 0.0, 0.5)).unwrap();
        let x = trace1(&[1.0, -1.0]);
        assert_eq!(eval(&f, &x, 0, 1).unwrap(), Ternary::False);
    }

    #[test]
    fn truncated_eventually_short_circuits_to_true() {
        let f = Formula::eventually(0, 9, pred("m", vec![1.0], 0.0, 0.5)).unwrap();
        let x = trace1(&[-1.0, 1.0]);
        assert_eq!(eval(&f, &x, 0, 1).unwrap(), Ternary::True);
    }

    #[test]
    fn window_past_horizon_is_unknown() {
        let f = Formula::always(3, 4, pred("m", vec![1.0], 0.0, 0.5)).unwrap();
        let x = trace1(&[-5.0, -5.0, -5.0]);
        assert_eq!(eval(&f, &x, 0, 2).unwrap(), Ternary::Unknown);
        let f = Formula::eventually(3, 4, pred("m", vec![1.0], 0.0, 0.5)).unwrap();
        assert_eq!(eval(&f, &x, 0, 2).unwrap(), Ternary::Unknown);
    }

    #[test]
    fn sequence_brute_force_example() {
        // seq(F[0,2] x >= 1, F[0,2] -x >= 1) over (2, 0, -2): split at 0 works.
        let f = Formula::Seq(vec![
            Formula::eventually(0, 2, pred("pos", vec![1.0], 1.0, 0.5)).unwrap(),
            Formula::eventually(0, 2, pred("neg", vec![-1.0], 1.0, 0.5)).unwrap(),
        ]);
        let x = trace1(&[2.0, 0.0, -2.0]);
        assert_eq!(eval(&f, &x, 0, 2).unwrap(), Ternary::True);
    }

    #[test]
    fn degenerate_split_ranges() {
        // Seq needs two disjoint segments, impossible on one sample: F.
        let f = Formula::Seq(vec![
            pred("a", vec![1.0], 0.0, 0.0),
            pred("b", vec![1.0], 0.0, 0.0),
        ]);
        let x = trace1(&[5.0]);
        assert_eq!(eval(&f, &x, 0, 0).unwrap(), Ternary::False);
        // Sel's segments share the split step: either operand can decide.
        let g = Formula::Sel(vec![
            pred("a", vec![1.0], 0.0, 0.0),
            pred("b", vec![1.0], -9.0, 0.0),
        ]);
        assert_eq!(eval(&g, &x, 0, 0).unwrap(), Ternary::True);
        let h = Formula::Sel(vec![
            pred("a", vec![1.0], 9.0, 0.0),
            pred("b", vec![1.0], 9.0, 0.0),
        ]);
        assert_eq!(eval(&h, &x, 0, 0).unwrap(), Ternary::False);
    }

    #[test]
    fn out_of_range_rejected() {
        let f = pred("a", vec![1.0], 0.0, 0.0);
        let x = trace1(&[1.0, 2.0]);
        assert!(matches!(eval(&f, &x, 1, 0), Err(MonitorError::IndexOutOfRange { .. })));
        assert!(matches!(eval(&f, &x, 0, 5), Err(MonitorError::IndexOutOfRange { .. })));
    }

    #[test]
    fn matrix_shape_and_untimed_rows() {
        let f = pred("a", vec![1.0], 0.5, 0.25);
        let x = trace1(&[1.0, 0.5, 0.0, -1.0]);
        let m = verdict_matrix_seq(&f, &x).unwrap();
        assert_eq!(m.len(), 10); // (T+2)(T+1)/2 with T = 3
        for ((t1, t2), v) in m.entries() {
            assert_eq!(Some(*v), m.get(*t1, *t1), "untimed rows constant in t2 ({t1},{t2})");
        }
    }

    #[test]
    fn single_sample_matrix() {
        let mu = Predicate::new("m", vec![1.0], 0.0, 0.25).unwrap();
        let f = Formula::Pred(Arc::new(mu.clone()));
        let x = trace1(&[0.7]);
        let m = verdict_matrix_seq(&f, &x).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(0, 0), Some(eval_predicate(&mu, &[0.7]).unwrap()));
    }

    #[test]
    fn complete_window_equals_plain_fold() {
        let f = Formula::always(1, 2, pred("m", vec![1.0], 0.0, 0.5)).unwrap();
        let x = trace1(&[-9.0, 1.0, 1.0, 0.2]);
        assert_eq!(eval(&f, &x, 0, 3).unwrap(), Ternary::True);
        let g = Formula::always(1, 3, pred("m", vec![1.0], 0.0, 0.5)).unwrap();
        assert_eq!(eval(&g, &x, 0, 3).unwrap(), Ternary::Unknown); // x_3 in the band
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let f = Formula::Seq(vec![
            Formula::eventually(0, 3, pred("p", vec![1.0], 1.0, 0.25)).unwrap(),
            Formula::always(0, 1, pred("q", vec![-1.0], -2.0, 0.25)).unwrap(),
        ]);
        let x = trace1(&[0.0, 1.5, 2.0, 1.0, 0.5, 1.2]);
        assert_eq!(verdict_matrix_seq(&f, &x).unwrap(), verdict_matrix_par(&f, &x).unwrap());
    }
}
