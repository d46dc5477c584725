//! Formula AST for ternary STL extended with the behavior-tree Sequence and
//! Selector operators, plus structural utilities shared by the monitor and
//! the encoder.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::ternary::Ternary;

/// Affine ternary predicate `a^T x - b` with uncertainty half-width `delta`.
///
/// Evaluates to `T` when the margin is at least `delta`, `F` when it is at
/// most `-delta`, and `U` in the open band in between. `delta = 0` selects
/// the classical two-valued reading (`T` iff the margin is nonnegative).
#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub a: Vec<f64>,
    pub b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormulaError {
    #[error("predicate {0}: coefficient vector must have a nonzero entry")]
    ZeroCoefficients(String),
    #[error("predicate {0}: delta must be nonnegative, got {1}")]
    NegativeDelta(String, f64),
    #[error("predicate {name}: expected {expected} coefficients, got {got}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("interval [{0},{1}] is inverted")]
    InvertedInterval(u32, u32),
    #[error("{0} requires at least one operand")]
    EmptyOperands(&'static str),
}

impl Predicate {
    pub fn new(name: impl Into<String>, a: Vec<f64>, b: f64, delta: f64) -> Result<Self, FormulaError> {
        let name = name.into();
        if !a.iter().any(|c| *c != 0.0) {
            return Err(FormulaError::ZeroCoefficients(name));
        }
        if delta < 0.0 {
            return Err(FormulaError::NegativeDelta(name, delta));
        }
        Ok(Predicate { name, a, b, delta })
    }

    /// Margin `a^T x - b` of a state vector.
    pub fn margin(&self, x: &[f64]) -> Result<f64, FormulaError> {
        if x.len() != self.a.len() {
            return Err(FormulaError::DimensionMismatch {
                name: self.name.clone(),
                expected: self.a.len(),
                got: x.len(),
            });
        }
        Ok(self.a.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() - self.b)
    }

    /// Ternary valuation of the predicate at a state.
    pub fn eval(&self, x: &[f64]) -> Result<Ternary, FormulaError> {
        let f = self.margin(x)?;
        Ok(if self.delta == 0.0 {
            if f >= 0.0 {
                Ternary::True
            } else {
                Ternary::False
            }
        } else if f >= self.delta {
            Ternary::True
        } else if f <= -self.delta {
            Ternary::False
        } else {
            Ternary::Unknown
        })
    }
}

/// A TBT formula: ternary STL plus k-ary Sequence and Selector nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Pred(Arc<Predicate>),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Always { lo: u32, hi: u32, child: Box<Formula> },
    Eventually { lo: u32, hi: u32, child: Box<Formula> },
    Seq(Vec<Formula>),
    Sel(Vec<Formula>),
}

/// Maximum future time offset needed to decide a formula at one time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    Bounded(u32),
    Unbounded,
}

impl Formula {
    pub fn pred(p: Arc<Predicate>) -> Formula {
        Formula::Pred(p)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn always(lo: u32, hi: u32, child: Formula) -> Result<Formula, FormulaError> {
        if lo > hi {
            return Err(FormulaError::InvertedInterval(lo, hi));
        }
        Ok(Formula::Always { lo, hi, child: Box::new(child) })
    }

    pub fn eventually(lo: u32, hi: u32, child: Formula) -> Result<Formula, FormulaError> {
        if lo > hi {
            return Err(FormulaError::InvertedInterval(lo, hi));
        }
        Ok(Formula::Eventually { lo, hi, child: Box::new(child) })
    }

    /// Rewrites every k-ary Sequence/Selector into a right-nested chain of
    /// binary nodes and collapses unary ones into their child. Idempotent.
    pub fn normalize_kary(&self) -> Formula {
        match self {
            Formula::Pred(p) => Formula::Pred(p.clone()),
            Formula::Not(f) => Formula::not(f.normalize_kary()),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.normalize_kary()).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.normalize_kary()).collect()),
            Formula::Always { lo, hi, child } => Formula::Always {
                lo: *lo,
                hi: *hi,
                child: Box::new(child.normalize_kary()),
            },
            Formula::Eventually { lo, hi, child } => Formula::Eventually {
                lo: *lo,
                hi: *hi,
                child: Box::new(child.normalize_kary()),
            },
            Formula::Seq(fs) => fold_right(fs, |l, r| Formula::Seq(vec![l, r])),
            Formula::Sel(fs) => fold_right(fs, |l, r| Formula::Sel(vec![l, r])),
        }
    }

    /// Horizon per the recursive offset definition: predicates need 0 future
    /// steps, a timed operator adds its upper bound, Sequence/Selector split
    /// points range over the whole partial horizon and are unbounded.
    pub fn horizon(&self) -> Horizon {
        use Horizon::*;
        match self {
            Formula::Pred(_) => Bounded(0),
            Formula::Not(f) => f.horizon(),
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().map(|f| f.horizon()).fold(Bounded(0), |acc, h| match (acc, h) {
                    (Bounded(a), Bounded(b)) => Bounded(a.max(b)),
                    _ => Unbounded,
                })
            }
            Formula::Always { hi, child, .. } | Formula::Eventually { hi, child, .. } => {
                match child.horizon() {
                    Bounded(h) => Bounded(hi + h),
                    Unbounded => Unbounded,
                }
            }
            Formula::Seq(_) | Formula::Sel(_) => Unbounded,
        }
    }

    /// A formula is untimed when its verdict at `t1` does not depend on the
    /// partial horizon `t2`.
    pub fn is_untimed(&self) -> bool {
        match self {
            Formula::Pred(_) => true,
            Formula::Not(f) => f.is_untimed(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(|f| f.is_untimed()),
            _ => false,
        }
    }

    /// Stable 64-bit structural digest. Equal ASTs hash equal; the digest
    /// does not change across runs or platforms.
    pub fn structural_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        hash_formula(self, &mut h);
        h.finish()
    }

    /// All predicates referenced by the formula, deduplicated by name.
    pub fn predicates(&self) -> Vec<Arc<Predicate>> {
        let mut out: Vec<Arc<Predicate>> = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Pred(p) = f {
                if !out.iter().any(|q| q.name == p.name) {
                    out.push(p.clone());
                }
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Pred(_) => {}
            Formula::Not(c) => c.visit(f),
            Formula::And(cs) | Formula::Or(cs) | Formula::Seq(cs) | Formula::Sel(cs) => {
                for c in cs {
                    c.visit(f);
                }
            }
            Formula::Always { child, .. } | Formula::Eventually { child, .. } => child.visit(f),
        }
    }
}

fn fold_right(fs: &[Formula], join: impl Fn(Formula, Formula) -> Formula + Copy) -> Formula {
    let fs: Vec<Formula> = fs.iter().map(|f| f.normalize_kary()).collect();
    let mut it = fs.into_iter().rev();
    let last = it.next().expect("Seq/Sel operand list is nonempty");
    it.fold(last, |acc, f| join(f, acc))
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pred(p) => f.write_str(&p.name),
            Formula::Not(c) => write!(f, "not({c})"),
            Formula::And(cs) => write_list(f, "and", cs),
            Formula::Or(cs) => write_list(f, "or", cs),
            Formula::Seq(cs) => write_list(f, "seq", cs),
            Formula::Sel(cs) => write_list(f, "sel", cs),
            Formula::Always { lo, hi, child } => write!(f, "G[{lo},{hi}] {child}"),
            Formula::Eventually { lo, hi, child } => write!(f, "F[{lo},{hi}] {child}"),
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, name: &str, cs: &[Formula]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{c}")?;
    }
    f.write_str(")")
}

/// A parsed specification: predicate table, formula, and the evaluation
/// start step `t*`.
#[derive(Clone, Debug)]
pub struct SpecDocument {
    pub predicates: Vec<Arc<Predicate>>,
    pub formula: Formula,
    pub t_star: u32,
}

// FNV-1a; chosen over the std hasher so digests are stable across runs.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

fn hash_formula(f: &Formula, h: &mut Fnv1a) {
    match f {
        Formula::Pred(p) => {
            h.write(&[0]);
            h.write(p.name.as_bytes());
            h.write(&[0xff]);
            for c in &p.a {
                h.write_u64(c.to_bits());
            }
            h.write_u64(p.b.to_bits());
            h.write_u64(p.delta.to_bits());
        }
        Formula::Not(c) => {
            h.write(&[1]);
            hash_formula(c, h);
        }
        Formula::And(cs) => hash_list(2, cs, h),
        Formula::Or(cs) => hash_list(3, cs, h),
        Formula::Always { lo, hi, child } => {
            h.write(&[4]);
            h.write_u64(u64::from(*lo));
            h.write_u64(u64::from(*hi));
            hash_formula(child, h);
        }
        Formula::Eventually { lo, hi, child } => {
            h.write(&[5]);
            h.write_u64(u64::from(*lo));
            h.write_u64(u64::from(*hi));
            hash_formula(child, h);
        }
        Formula::Seq(cs) => hash_list(6, cs, h),
        Formula::Sel(cs) => hash_list(7, cs, h),
    }
}

fn hash_list(tag: u8, cs: &[Formula], h: &mut Fnv1a) {
    h.write(&[tag]);
    h.write_u64(cs.len() as u64);
    for c in cs {
        hash_formula(c, h);
    }
}

/// Node of a [`NodeTable`]: a normalized formula flattened into an indexed
/// DAG with structurally identical subformulas shared.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Pred(usize),
    Not(NodeId),
    And(Vec<NodeId>),
    Or(Vec<NodeId>),
    Always { lo: u32, hi: u32, child: NodeId },
    Eventually { lo: u32, hi: u32, child: NodeId },
    Seq(NodeId, NodeId),
    Sel(NodeId, NodeId),
}

pub type NodeId = usize;

/// Structurally deduplicated DAG view of a normalized formula. Both the
/// memoized monitor and the encoder key their caches by `NodeId`, which is
/// what makes variable sharing across identical subformulas total.
#[derive(Clone, Debug, Default)]
pub struct NodeTable {
    nodes: Vec<Node>,
    hashes: Vec<u64>,
    untimed: Vec<bool>,
    by_hash: HashMap<u64, NodeId>,
    pub predicates: Vec<Arc<Predicate>>,
}

impl NodeTable {
    /// Builds the DAG from a formula. The formula is normalized first, so
    /// every Seq/Sel node in the table is binary.
    pub fn build(f: &Formula) -> (NodeTable, NodeId) {
        let mut table = NodeTable::default();
        let norm = f.normalize_kary();
        let root = table.intern(&norm);
        (table, root)
    }

    fn intern(&mut self, f: &Formula) -> NodeId {
        let hash = f.structural_hash();
        if let Some(&id) = self.by_hash.get(&hash) {
            return id;
        }
        let node = match f {
            Formula::Pred(p) => {
                let idx = match self.predicates.iter().position(|q| {
                    q.name == p.name && q.a == p.a && q.b == p.b && q.delta == p.delta
                }) {
                    Some(i) => i,
                    None => {
                        self.predicates.push(p.clone());
                        self.predicates.len() - 1
                    }
                };
                Node::Pred(idx)
            }
            Formula::Not(c) => Node::Not(self.intern(c)),
            Formula::And(cs) => Node::And(cs.iter().map(|c| self.intern(c)).collect()),
            Formula::Or(cs) => Node::Or(cs.iter().map(|c| self.intern(c)).collect()),
            Formula::Always { lo, hi, child } => Node::Always {
                lo: *lo,
                hi: *hi,
                child: self.intern(child),
            },
            Formula::Eventually { lo, hi, child } => Node::Eventually {
                lo: *lo,
                hi: *hi,
                child: self.intern(child),
            },
            Formula::Seq(cs) => {
                assert_eq!(cs.len(), 2, "NodeTable expects normalized Seq");
                Node::Seq(self.intern(&cs[0]), self.intern(&cs[1]))
            }
            Formula::Sel(cs) => {
                assert_eq!(cs.len(), 2, "NodeTable expects normalized Sel");
                Node::Sel(self.intern(&cs[0]), self.intern(&cs[1]))
            }
        };
        let untimed = match &node {
            Node::Pred(_) => true,
            Node::Not(c) => self.untimed[*c],
            Node::And(cs) | Node::Or(cs) => cs.iter().all(|c| self.untimed[*c]),
            _ => false,
        };
        let id = self.nodes.len();
        self.nodes.push(node);
        self.hashes.push(hash);
        self.untimed.push(untimed);
        self.by_hash.insert(hash, id);
        id
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn hash(&self, id: NodeId) -> u64 {
        self.hashes[id]
    }

    pub fn is_untimed(&self, id: NodeId) -> bool {
        self.untimed[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Short human-readable label for diagnostics.
    pub fn describe(&self, id: NodeId) -> String {
        match self.node(id) {
            Node::Pred(i) => self.predicates[*i].name.clone(),
            Node::Not(_) => "not".into(),
            Node::And(cs) => format!("and/{}", cs.len()),
            Node::Or(cs) => format!("or/{}", cs.len()),
            Node::Always { lo, hi, .. } => format!("G[{lo},{hi}]"),
            Node::Eventually { lo, hi, .. } => format!("F[{lo},{hi}]"),
            Node::Seq(..) => "seq".into(),
            Node::Sel(..) => "sel".into(),
        }
    }
}
