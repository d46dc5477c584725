//! Mixed-integer encoding of TBT formulas over the two-dimensional
//! `(t1, t2)` lattice of evaluation step and partial horizon.
//!
//! Every formula node at a reachable `(t1, t2)` pair becomes one trit
//! variable in `[-1, +1]`. Predicates expand into the binary-indicator
//! big-M block; conjunction and disjunction use the min/max selection
//! schema; timed operators fold their search window, inserting a constant
//! `U` bound when the window is truncated by the partial horizon; Sequence
//! and Selector expand their split-point disjunction. Materialization is
//! demand-driven from the root pair and fully shared through a memo keyed
//! by `(node, t1, t2)` (untimed nodes collapse to `(node, t1)`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::formula::{Formula, Node, NodeId, NodeTable, Predicate};
use crate::milp::{MilpModel, ModelError, Sense, VarId, VarKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("no big-M bound registered for predicate {0:?}")]
    MissingBigM(String),
    #[error("time step {t} exceeds horizon {horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },
    #[error("invalid evaluation pair (t1={t1}, t2={t2}) for horizon {horizon}")]
    BadRange { t1: usize, t2: usize, horizon: usize },
    #[error(
        "predicate {name}: delta {delta} lies in (0, 2*epsilon) with epsilon {epsilon}; \
         the Unknown band would be empty"
    )]
    DeltaEpsilonWindow { name: String, delta: f64, epsilon: f64 },
    #[error("empty operand list")]
    EmptyOperands,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Operand of a conjunction/disjunction schema: a trit variable or the
/// folded constant `U` bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Operand {
    Var(VarId),
    U,
}

/// How top-level satisfaction is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnforceMode {
    /// `z_{t*,T} = 1` — the relaxed single-equality form.
    AtFinal,
    /// Some partial horizon in `[t*+1, T]` reaches `+1`.
    AnyHorizon,
}

pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Encoding state for one model build. Single-threaded by design: it
/// mutates the model and the memo; run distinct contexts concurrently
/// instead.
pub struct EncodingContext<'m> {
    pub model: &'m mut MilpModel,
    state_vars: HashMap<(usize, usize), VarId>,
    horizon: usize,
    big_m: HashMap<String, f64>,
    epsilon: f64,
    memo: HashMap<(NodeId, usize, usize), VarId>,
    pred_memo: HashMap<(String, usize), VarId>,
    materialized: Vec<(NodeId, usize, usize, VarId)>,
    seq_leaf_groups: usize,
    sel_leaf_groups: usize,
}

impl<'m> EncodingContext<'m> {
    pub fn new(
        model: &'m mut MilpModel,
        state_vars: HashMap<(usize, usize), VarId>,
        horizon: usize,
        big_m: HashMap<String, f64>,
        epsilon: f64,
    ) -> Self {
        EncodingContext {
            model,
            state_vars,
            horizon,
            big_m,
            epsilon,
            memo: HashMap::new(),
            pred_memo: HashMap::new(),
            materialized: Vec::new(),
            seq_leaf_groups: 0,
            sel_leaf_groups: 0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of innermost Sequence conjunction groups materialized so
    /// far; for a right-folded k-ary Sequence at `(t1, t2)` this is the
    /// binomial `C(t2-t1, k-1)`.
    pub fn seq_leaf_groups(&self) -> usize {
        self.seq_leaf_groups
    }

    pub fn sel_leaf_groups(&self) -> usize {
        self.sel_leaf_groups
    }

    /// Every `(node, t1, t2, trit)` quadruple materialized by this context,
    /// in creation order.
    pub fn materialized(&self) -> &[(NodeId, usize, usize, VarId)] {
        &self.materialized
    }

    pub fn state_var(&self, t: usize, i: usize) -> Option<VarId> {
        self.state_vars.get(&(t, i)).copied()
    }

    /// Encodes the valuation trit of a ternary predicate at time `t`.
    /// Memoized per `(predicate, t)`.
    pub fn encode_predicate(&mut self, mu: &Predicate, t: usize) -> Result<VarId, EncodeError> {
        if t > self.horizon {
            return Err(EncodeError::TimeOutOfRange { t, horizon: self.horizon });
        }
        if let Some(&v) = self.pred_memo.get(&(mu.name.clone(), t)) {
            return Ok(v);
        }
        let big_m = *self
            .big_m
            .get(&mu.name)
            .ok_or_else(|| EncodeError::MissingBigM(mu.name.clone()))?;
        let eps = self.epsilon;
        if mu.delta > 0.0 && mu.delta < 2.0 * eps {
            return Err(EncodeError::DeltaEpsilonWindow {
                name: mu.name.clone(),
                delta: mu.delta,
                epsilon: eps,
            });
        }
        let hash = Formula::Pred(Arc::new(mu.clone())).structural_hash();
        let z = self
            .model
            .add_variable(&format!("z_{:08x}_{t}_{t}", hash as u32), VarKind::Trit)?;
        // a^T x_t terms, shared by every big-M row.
        let mut affine: Vec<(VarId, f64)> = Vec::new();
        for (i, c) in mu.a.iter().enumerate() {
            if *c != 0.0 {
                let x = self.state_vars.get(&(t, i)).copied().ok_or(
                    EncodeError::TimeOutOfRange { t, horizon: self.horizon },
                )?;
                affine.push((x, *c));
            }
        }
        let up = self
            .model
            .add_variable(&format!("zp_{}_{t}_p", mu.name), VarKind::Binary)?;
        let um = self
            .model
            .add_variable(&format!("zp_{}_{t}_m", mu.name), VarKind::Binary)?;
        if mu.delta > 0.0 {
            let u0 = self
                .model
                .add_variable(&format!("zp_{}_{t}_z", mu.name), VarKind::Binary)?;
            self.model.add_linear_constraint(
                vec![(up, 1.0), (u0, 1.0), (um, 1.0)],
                Sense::Eq,
                1.0,
            )?;
            self.model
                .add_linear_constraint(vec![(z, 1.0), (up, -1.0), (um, 1.0)], Sense::Eq, 0.0)?;
            // a^T x - b >= delta - M (1 - up)
            let mut row = affine.clone();
            row.push((up, -big_m));
            self.model
                .add_linear_constraint(row, Sense::Ge, mu.b + mu.delta - big_m)?;
            // a^T x - b <= -delta + M (1 - um)
            let mut row = affine.clone();
            row.push((um, big_m));
            self.model
                .add_linear_constraint(row, Sense::Le, mu.b - mu.delta + big_m)?;
            // a^T x - b <= delta - eps + M (1 - u0)
            let mut row = affine.clone();
            row.push((u0, big_m));
            self.model
                .add_linear_constraint(row, Sense::Le, mu.b + mu.delta - eps + big_m)?;
            // a^T x - b >= -delta + eps - M (1 - u0)
            let mut row = affine;
            row.push((u0, -big_m));
            self.model
                .add_linear_constraint(row, Sense::Ge, mu.b - mu.delta + eps - big_m)?;
        } else {
            self.model
                .add_linear_constraint(vec![(up, 1.0), (um, 1.0)], Sense::Eq, 1.0)?;
            self.model
                .add_linear_constraint(vec![(z, 1.0), (up, -1.0), (um, 1.0)], Sense::Eq, 0.0)?;
            // a^T x - b >= -M (1 - up)
            let mut row = affine.clone();
            row.push((up, -big_m));
            self.model.add_linear_constraint(row, Sense::Ge, mu.b - big_m)?;
            // a^T x - b <= -eps + M (1 - um)
            let mut row = affine;
            row.push((um, big_m));
            self.model
                .add_linear_constraint(row, Sense::Le, mu.b - eps + big_m)?;
        }
        self.pred_memo.insert((mu.name.clone(), t), z);
        Ok(z)
    }

    /// Fresh trit constrained to the negation of `child`.
    pub fn encode_not(&mut self, child: VarId, name: &str) -> Result<VarId, EncodeError> {
        let z = self.model.add_variable(name, VarKind::Trit)?;
        self.model
            .add_linear_constraint(vec![(z, 1.0), (child, 1.0)], Sense::Eq, 0.0)?;
        Ok(z)
    }

    /// K3 conjunction (minimum) of the operands via the selection-binary
    /// schema. A single variable operand is returned as-is.
    pub fn encode_and(&mut self, operands: &[Operand], name: &str) -> Result<VarId, EncodeError> {
        self.encode_min_max(operands, name, true)
    }

    /// K3 disjunction (maximum), dual of [`Self::encode_and`].
    pub fn encode_or(&mut self, operands: &[Operand], name: &str) -> Result<VarId, EncodeError> {
        self.encode_min_max(operands, name, false)
    }

    fn encode_min_max(
        &mut self,
        operands: &[Operand],
        name: &str,
        conjunctive: bool,
    ) -> Result<VarId, EncodeError> {
        match operands {
            [] => Err(EncodeError::EmptyOperands),
            [Operand::Var(v)] => Ok(*v),
            _ => {
                let z = self.model.add_variable(name, VarKind::Trit)?;
                let mut selectors = Vec::with_capacity(operands.len());
                for (j, op) in operands.iter().enumerate() {
                    let b = self
                        .model
                        .add_variable(&format!("{name}_b{j}"), VarKind::Binary)?;
                    match (op, conjunctive) {
                        (Operand::Var(v), true) => {
                            // z <= z_j and z >= z_j - 2 (1 - b_j)
                            self.model.add_linear_constraint(
                                vec![(z, 1.0), (*v, -1.0)],
                                Sense::Le,
                                0.0,
                            )?;
                            self.model.add_linear_constraint(
                                vec![(z, 1.0), (*v, -1.0), (b, -2.0)],
                                Sense::Ge,
                                -2.0,
                            )?;
                        }
                        (Operand::Var(v), false) => {
                            // z >= z_j and z <= z_j + 2 (1 - b_j)
                            self.model.add_linear_constraint(
                                vec![(z, 1.0), (*v, -1.0)],
                                Sense::Ge,
                                0.0,
                            )?;
                            self.model.add_linear_constraint(
                                vec![(z, 1.0), (*v, -1.0), (b, 2.0)],
                                Sense::Le,
                                2.0,
                            )?;
                        }
                        (Operand::U, true) => {
                            self.model
                                .add_linear_constraint(vec![(z, 1.0)], Sense::Le, 0.0)?;
                            self.model.add_linear_constraint(
                                vec![(z, 1.0), (b, -2.0)],
                                Sense::Ge,
                                -2.0,
                            )?;
                        }
                        (Operand::U, false) => {
                            self.model
                                .add_linear_constraint(vec![(z, 1.0)], Sense::Ge, 0.0)?;
                            self.model.add_linear_constraint(
                                vec![(z, 1.0), (b, 2.0)],
                                Sense::Le,
                                2.0,
                            )?;
                        }
                    }
                    selectors.push((b, 1.0));
                }
                self.model.add_linear_constraint(selectors, Sense::Eq, 1.0)?;
                Ok(z)
            }
        }
    }

    fn fixed_trit(&mut self, name: &str, value: f64) -> Result<VarId, EncodeError> {
        let z = self.model.add_variable(name, VarKind::Trit)?;
        self.model.add_linear_constraint(vec![(z, 1.0)], Sense::Eq, value)?;
        Ok(z)
    }

    fn node_name(&self, table: &NodeTable, id: NodeId, t1: usize, t2: usize) -> String {
        format!("z_{:08x}_{t1}_{t2}", table.hash(id) as u32)
    }

    /// Demand-driven encoding of `id` at `(t1, t2)`; returns the trit
    /// carrying its verdict. Expects a normalized table (binary Seq/Sel).
    pub fn encode_node(
        &mut self,
        table: &NodeTable,
        id: NodeId,
        t1: usize,
        t2: usize,
    ) -> Result<VarId, EncodeError> {
        if t1 > t2 || t2 > self.horizon {
            return Err(EncodeError::BadRange { t1, t2, horizon: self.horizon });
        }
        let t2e = if table.is_untimed(id) { t1 } else { t2 };
        if let Some(&v) = self.memo.get(&(id, t1, t2e)) {
            return Ok(v);
        }
        let name = self.node_name(table, id, t1, t2e);
        let z = match table.node(id).clone() {
            Node::Pred(i) => {
                let mu = table.predicates[i].clone();
                self.encode_predicate(&mu, t1)?
            }
            Node::Not(c) => {
                let child = self.encode_node(table, c, t1, t2)?;
                self.encode_not(child, &name)?
            }
            Node::And(cs) => {
                let ops = cs
                    .iter()
                    .map(|c| Ok(Operand::Var(self.encode_node(table, *c, t1, t2)?)))
                    .collect::<Result<Vec<_>, EncodeError>>()?;
                self.encode_and(&ops, &name)?
            }
            Node::Or(cs) => {
                let ops = cs
                    .iter()
                    .map(|c| Ok(Operand::Var(self.encode_node(table, *c, t1, t2)?)))
                    .collect::<Result<Vec<_>, EncodeError>>()?;
                self.encode_or(&ops, &name)?
            }
            Node::Always { lo, hi, child } => {
                self.encode_temporal(table, child, lo, hi, t1, t2, true, &name)?
            }
            Node::Eventually { lo, hi, child } => {
                self.encode_temporal(table, child, lo, hi, t1, t2, false, &name)?
            }
            Node::Seq(l, r) => self.encode_split(table, id, l, r, t1, t2, true, &name)?,
            Node::Sel(l, r) => self.encode_split(table, id, l, r, t1, t2, false, &name)?,
        };
        self.memo.insert((id, t1, t2e), z);
        self.materialized.push((id, t1, t2e, z));
        Ok(z)
    }

    #[allow(clippy::too_many_arguments)]
    fn encode_temporal(
        &mut self,
        table: &NodeTable,
        child: NodeId,
        lo: u32,
        hi: u32,
        t1: usize,
        t2: usize,
        conjunctive: bool,
        name: &str,
    ) -> Result<VarId, EncodeError> {
        let win_lo = t1 + lo as usize;
        let win_hi = t1 + hi as usize;
        if win_lo > t2 {
            // Window starts past the partial horizon: Unknown by default.
            return self.fixed_trit(name, 0.0);
        }
        let truncated = win_hi > t2;
        let mut ops = Vec::new();
        if truncated {
            ops.push(Operand::U);
        }
        for j in win_lo..=win_hi.min(t2) {
            ops.push(Operand::Var(self.encode_node(table, child, j, t2)?));
        }
        if conjunctive {
            self.encode_and(&ops, name)
        } else {
            self.encode_or(&ops, name)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn encode_split(
        &mut self,
        table: &NodeTable,
        _id: NodeId,
        left: NodeId,
        right: NodeId,
        t1: usize,
        t2: usize,
        seq: bool,
        name: &str,
    ) -> Result<VarId, EncodeError> {
        if seq && t1 == t2 {
            // Empty split range; mirrors the monitor's False verdict (the
            // identity of the outer disjunction, keeping Seq associative).
            return self.fixed_trit(name, -1.0);
        }
        let right_is_chain = matches!(
            table.node(right),
            Node::Seq(..) if seq
        ) || matches!(table.node(right), Node::Sel(..) if !seq);
        // Sequence splits into disjoint segments; Selector's segments share
        // the split step, which is what makes it associative.
        let split_hi = if seq { t2 - 1 } else { t2 };
        let mut groups = Vec::with_capacity(split_hi + 1 - t1);
        for tau in t1..=split_hi {
            let l = self.encode_node(table, left, t1, tau)?;
            let r = self.encode_node(table, right, if seq { tau + 1 } else { tau }, t2)?;
            let group_name = format!("{name}_s{tau}");
            let group = if seq {
                self.encode_and(&[Operand::Var(l), Operand::Var(r)], &group_name)?
            } else {
                self.encode_or(&[Operand::Var(l), Operand::Var(r)], &group_name)?
            };
            if !right_is_chain {
                if seq {
                    self.seq_leaf_groups += 1;
                } else {
                    self.sel_leaf_groups += 1;
                }
            }
            groups.push(Operand::Var(group));
        }
        self.encode_or(&groups, name)
    }

    /// Encodes the whole (normalized) formula demand-driven from the root
    /// pair `(t_star, T)` and returns the root trit.
    pub fn encode_formula(
        &mut self,
        table: &NodeTable,
        root: NodeId,
        t_star: usize,
    ) -> Result<VarId, EncodeError> {
        let horizon = self.horizon;
        self.encode_node(table, root, t_star, horizon)
    }

    /// Adds the top-level satisfaction constraint for the root formula.
    pub fn enforce_satisfaction(
        &mut self,
        table: &NodeTable,
        root: NodeId,
        mode: EnforceMode,
        t_star: usize,
    ) -> Result<(), EncodeError> {
        match mode {
            EnforceMode::AtFinal => {
                let z = self.encode_formula(table, root, t_star)?;
                self.model.add_linear_constraint(vec![(z, 1.0)], Sense::Eq, 1.0)?;
            }
            EnforceMode::AnyHorizon => {
                let mut selectors = Vec::new();
                for tau in (t_star + 1)..=self.horizon {
                    let z = self.encode_node(table, root, t_star, tau)?;
                    let b = self
                        .model
                        .add_variable(&format!("sat_b{tau}"), VarKind::Binary)?;
                    // b_tau = 1 forces z_{t*,tau} = 1.
                    self.model.add_linear_constraint(
                        vec![(z, 1.0), (b, -2.0)],
                        Sense::Ge,
                        -1.0,
                    )?;
                    selectors.push((b, 1.0));
                }
                self.model.add_linear_constraint(selectors, Sense::Ge, 1.0)?;
            }
        }
        Ok(())
    }

    /// Text report mapping each materialized node and pair to its variable.
    pub fn explain(&self, table: &NodeTable) -> String {
        let mut out = String::new();
        for (id, t1, t2, v) in &self.materialized {
            let _ = writeln!(
                out,
                "{:>10} @ ({t1},{t2}) -> {} [{:08x}]",
                table.describe(*id),
                self.model.var_name(*v),
                table.hash(*id) as u32,
            );
        }
        out
    }
}

/// Predicted size of the formula part of an encoding, computed analytically
/// without touching a model. Used by the scaling benchmark and the counting
/// acceptance checks, which hold these numbers exactly equal to the stats of
/// an actual build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PredictedSize {
    pub trit_vars: usize,
    pub binary_vars: usize,
    pub linear_constraints: usize,
}

/// Analytic accounting of the demand-driven encoding of `root` from
/// `(t_star, T)`: walks the same reachable `(node, t1, t2)` lattice as
/// [`EncodingContext::encode_node`] and sums the per-schema sizes
/// (predicate block, negation row, min/max selection schema, split-point
/// disjunction, satisfaction constraint) instead of emitting them.
pub fn predict_size(
    table: &NodeTable,
    root: NodeId,
    t_star: usize,
    horizon: usize,
    mode: EnforceMode,
) -> PredictedSize {
    let mut acc = SizeWalker {
        table,
        size: PredictedSize::default(),
        memo: std::collections::HashSet::new(),
        pred_memo: std::collections::HashSet::new(),
    };
    match mode {
        EnforceMode::AtFinal => {
            acc.node(root, t_star, horizon);
            acc.size.linear_constraints += 1;
        }
        EnforceMode::AnyHorizon => {
            for tau in (t_star + 1)..=horizon {
                acc.node(root, t_star, tau);
                acc.size.binary_vars += 1;
                acc.size.linear_constraints += 1;
            }
            acc.size.linear_constraints += 1;
        }
    }
    acc.size
}

struct SizeWalker<'a> {
    table: &'a NodeTable,
    size: PredictedSize,
    memo: std::collections::HashSet<(NodeId, usize, usize)>,
    pred_memo: std::collections::HashSet<(usize, usize)>,
}

impl SizeWalker<'_> {
    /// Min/max schema over `m` operands, `u_const` of them the fixed `U`
    /// bound: one trit, one selector binary per operand, and 2m+1 rows.
    /// A single variable operand aliases and adds nothing. A fixed constant
    /// (empty Seq split, out-of-horizon window) costs one trit and one row.
    fn min_max(&mut self, m: usize, u_const: usize) {
        if m == 1 && u_const == 0 {
            return;
        }
        self.size.trit_vars += 1;
        self.size.binary_vars += m;
        self.size.linear_constraints += 2 * m + 1;
    }

    fn fixed_u(&mut self) {
        self.size.trit_vars += 1;
        self.size.linear_constraints += 1;
    }

    fn node(&mut self, id: NodeId, t1: usize, t2: usize) {
        let t2e = if self.table.is_untimed(id) { t1 } else { t2 };
        if !self.memo.insert((id, t1, t2e)) {
            return;
        }
        match self.table.node(id).clone() {
            Node::Pred(i) => {
                if self.pred_memo.insert((i, t1)) {
                    let classical = self.table.predicates[i].delta == 0.0;
                    self.size.trit_vars += 1;
                    self.size.binary_vars += if classical { 2 } else { 3 };
                    self.size.linear_constraints += if classical { 4 } else { 6 };
                }
            }
            Node::Not(c) => {
                self.node(c, t1, t2);
                self.size.trit_vars += 1;
                self.size.linear_constraints += 1;
            }
            Node::And(cs) | Node::Or(cs) => {
                for c in &cs {
                    self.node(*c, t1, t2);
                }
                self.min_max(cs.len(), 0);
            }
            Node::Always { lo, hi, child } | Node::Eventually { lo, hi, child } => {
                let win_lo = t1 + lo as usize;
                let win_hi = t1 + hi as usize;
                if win_lo > t2 {
                    self.fixed_u();
                } else {
                    let upper = win_hi.min(t2);
                    for j in win_lo..=upper {
                        self.node(child, j, t2);
                    }
                    let truncated = win_hi > t2;
                    self.min_max(upper - win_lo + 1 + usize::from(truncated), usize::from(truncated));
                }
            }
            Node::Seq(l, r) => {
                if t1 == t2 {
                    self.fixed_u();
                } else {
                    for tau in t1..t2 {
                        self.node(l, t1, tau);
                        self.node(r, tau + 1, t2);
                        self.min_max(2, 0);
                    }
                    self.min_max(t2 - t1, 0);
                }
            }
            Node::Sel(l, r) => {
                for tau in t1..=t2 {
                    self.node(l, t1, tau);
                    self.node(r, tau, t2);
                    self.min_max(2, 0);
                }
                self.min_max(t2 - t1 + 1, 0);
            }
        }
    }
}

/// Pins a fixed trace into a model: one bounded continuous variable per
/// state coordinate and time step, each fixed by an equality. Used by
/// monitor-agreement checks and infeasibility probes.
pub fn pin_trace_states(
    model: &mut MilpModel,
    trace: &crate::trace::Trace,
) -> Result<HashMap<(usize, usize), VarId>, ModelError> {
    let mut vars = HashMap::new();
    for (t, x) in trace.samples().iter().enumerate() {
        for (i, v) in x.iter().enumerate() {
            let id = model.add_variable(
                &format!("x_{t}_{i}"),
                VarKind::Continuous { lb: v - 1.0, ub: v + 1.0 },
            )?;
            model.add_linear_constraint(vec![(id, 1.0)], Sense::Eq, *v)?;
            vars.insert((t, i), id);
        }
    }
    Ok(vars)
}
