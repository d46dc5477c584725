//! Solver-agnostic mixed-integer model container: variable registry,
//! linear constraints, diagonal quadratic objective, CPLEX-LP serialization
//! and solution-file ingestion.
//!
//! The wire formats are deliberately plain text so big-M logic stays
//! auditable:
//!
//! * LP file — CPLEX LP dialect with a `[ ... ] / 2` quadratic block,
//!   `Subject To`, `Bounds`, `Binary`, `Generals` sections, variables
//!   ordered by id.
//! * Solution file — first line `status <word>`, then `name value` pairs,
//!   one per line.

use std::collections::HashMap;
use std::fmt::Write as _;

/// Handle to a model variable. Indices are dense and allocation-ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarKind {
    Continuous { lb: f64, ub: f64 },
    Binary,
    /// Integer variable with bounds [-1, +1]; carries one K3 truth value.
    Trit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn lp_symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate variable name {0:?}")]
    DuplicateName(String),
    #[error("unknown variable id {0:?}")]
    UnknownVar(usize),
    #[error("unknown variable name {0:?}")]
    UnknownName(String),
    #[error("constraint must have at least one term")]
    EmptyConstraint,
    #[error("non-finite coefficient {value} on variable {name}")]
    NonFiniteCoefficient { name: String, value: f64 },
    #[error("quadratic objective terms must reference continuous variables, got {0:?}")]
    QuadraticOnInteger(String),
    #[error("solution line {line}: {msg}")]
    Solution { line: usize, msg: String },
    #[error("variable {name} value {value} violates integrality (tol {tol})")]
    Integrality { name: String, value: f64, tol: f64 },
    #[error("solution file missing status line")]
    MissingStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    Error,
}

impl SolutionStatus {
    pub fn is_feasible(self) -> bool {
        matches!(self, SolutionStatus::Optimal | SolutionStatus::Feasible)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: SolutionStatus,
    pub values: HashMap<VarId, f64>,
    pub objective: f64,
}

impl Solution {
    pub fn value(&self, id: VarId) -> f64 {
        self.values.get(&id).copied().unwrap_or(0.0)
    }
}

/// Exact model size accounting; used by benchmark reports and the
/// constraint-counting acceptance checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModelStats {
    pub continuous_vars: usize,
    pub binary_vars: usize,
    pub trit_vars: usize,
    pub linear_constraints: usize,
    pub quadratic_terms: usize,
}

impl ModelStats {
    pub fn integer_vars(&self) -> usize {
        self.binary_vars + self.trit_vars
    }
}

/// Mixed-integer model with a minimized objective. Single-writer while
/// under construction, read-only afterwards.
#[derive(Clone, Debug, Default)]
pub struct MilpModel {
    names: Vec<String>,
    kinds: Vec<VarKind>,
    by_name: HashMap<String, VarId>,
    constraints: Vec<LinearConstraint>,
    /// Diagonal quadratic objective terms (var, var, coefficient).
    quad_objective: Vec<(VarId, VarId, f64)>,
    linear_objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: &str, kind: VarKind) -> Result<VarId, ModelError> {
        if self.by_name.contains_key(name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        let id = VarId(self.names.len());
        self.names.push(name.to_string());
        self.kinds.push(kind);
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_linear_constraint(
        &mut self,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, ModelError> {
        if terms.is_empty() {
            return Err(ModelError::EmptyConstraint);
        }
        for (id, coeff) in &terms {
            if id.0 >= self.names.len() {
                return Err(ModelError::UnknownVar(id.0));
            }
            if !coeff.is_finite() {
                return Err(ModelError::NonFiniteCoefficient {
                    name: self.names[id.0].clone(),
                    value: *coeff,
                });
            }
        }
        self.constraints.push(LinearConstraint { terms, sense, rhs });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// Adds `coeff * v^2` to the objective. Restricted to continuous
    /// variables; the objective weighs control effort only.
    pub fn add_quadratic_objective(&mut self, v: VarId, coeff: f64) -> Result<(), ModelError> {
        if v.0 >= self.names.len() {
            return Err(ModelError::UnknownVar(v.0));
        }
        if !matches!(self.kinds[v.0], VarKind::Continuous { .. }) {
            return Err(ModelError::QuadraticOnInteger(self.names[v.0].clone()));
        }
        self.quad_objective.push((v, v, coeff));
        Ok(())
    }

    pub fn add_linear_objective(&mut self, v: VarId, coeff: f64) -> Result<(), ModelError> {
        if v.0 >= self.names.len() {
            return Err(ModelError::UnknownVar(v.0));
        }
        self.linear_objective.push((v, coeff));
        Ok(())
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.names[id.0]
    }

    pub fn var_kind(&self, id: VarId) -> VarKind {
        self.kinds[id.0]
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn stats(&self) -> ModelStats {
        let mut s = ModelStats {
            linear_constraints: self.constraints.len(),
            quadratic_terms: self.quad_objective.len(),
            ..Default::default()
        };
        for kind in &self.kinds {
            match kind {
                VarKind::Continuous { .. } => s.continuous_vars += 1,
                VarKind::Binary => s.binary_vars += 1,
                VarKind::Trit => s.trit_vars += 1,
            }
        }
        s
    }

    /// Serializes the model as CPLEX LP text. Output is deterministic:
    /// variables appear in id order, constraints in insertion order.
    pub fn write_lp(&self) -> String {
        let mut out = String::from("Minimize\n obj: ");
        let mut wrote_any = false;
        for (v, c) in &self.linear_objective {
            push_term(&mut out, *c, &self.names[v.0], &mut wrote_any);
        }
        if !self.quad_objective.is_empty() {
            if wrote_any {
                out.push(' ');
            }
            out.push_str("[ ");
            let mut wrote_q = false;
            for (v, w, c) in &self.quad_objective {
                debug_assert_eq!(v, w, "objective is diagonal by construction");
                // LP convention divides the bracket by two, so double here.
                push_term(&mut out, 2.0 * c, &self.names[v.0], &mut wrote_q);
                out.push_str(" ^2");
            }
            out.push_str(" ] / 2");
            wrote_any = true;
        }
        if self.objective_constant != 0.0 || !wrote_any {
            push_term(
                &mut out,
                if wrote_any || self.objective_constant != 0.0 {
                    self.objective_constant
                } else {
                    0.0
                },
                "",
                &mut wrote_any,
            );
        }
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            let mut wrote = false;
            for (v, coeff) in &c.terms {
                out.push(' ');
                let mut tmp = String::new();
                push_term(&mut tmp, *coeff, &self.names[v.0], &mut wrote);
                out.push_str(&tmp);
            }
            let _ = writeln!(out, " {} {}", c.sense.lp_symbol(), fmt_num(c.rhs));
        }
        out.push_str("Bounds\n");
        for (i, kind) in self.kinds.iter().enumerate() {
            match kind {
                VarKind::Continuous { lb, ub } => {
                    let _ = writeln!(out, " {} <= {} <= {}", fmt_num(*lb), self.names[i], fmt_num(*ub));
                }
                VarKind::Trit => {
                    let _ = writeln!(out, " -1 <= {} <= 1", self.names[i]);
                }
                VarKind::Binary => {}
            }
        }
        let binaries: Vec<&String> = self
            .names
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| matches!(k, VarKind::Binary))
            .map(|(n, _)| n)
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binary\n");
            for n in binaries {
                let _ = writeln!(out, " {n}");
            }
        }
        let generals: Vec<&String> = self
            .names
            .iter()
            .zip(&self.kinds)
            .filter(|(_, k)| matches!(k, VarKind::Trit))
            .map(|(n, _)| n)
            .collect();
        if !generals.is_empty() {
            out.push_str("Generals\n");
            for n in generals {
                let _ = writeln!(out, " {n}");
            }
        }
        out.push_str("End\n");
        out
    }

    /// Parses a solver solution file (`status <word>` then `name value`
    /// lines). Integer-kind values are rounded when within `tol_int` of an
    /// integer and rejected otherwise.
    pub fn load_solution(&self, text: &str, tol_int: f64) -> Result<Solution, ModelError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, status_line) = lines.next().ok_or(ModelError::MissingStatus)?;
        let mut parts = status_line.split_whitespace();
        let status = match (parts.next(), parts.next()) {
            (Some("status"), Some(word)) => match word {
                "optimal" => SolutionStatus::Optimal,
                "feasible" => SolutionStatus::Feasible,
                "infeasible" => SolutionStatus::Infeasible,
                "unbounded" => SolutionStatus::Unbounded,
                _ => SolutionStatus::Error,
            },
            _ => return Err(ModelError::MissingStatus),
        };
        let mut values = HashMap::new();
        let mut objective = 0.0;
        for (lineno, line) in lines {
            let mut parts = line.split_whitespace();
            let (Some(name), Some(value)) = (parts.next(), parts.next()) else {
                return Err(ModelError::Solution {
                    line: lineno + 1,
                    msg: format!("expected 'name value', got {line:?}"),
                });
            };
            let value: f64 = value.parse().map_err(|_| ModelError::Solution {
                line: lineno + 1,
                msg: format!("bad value {value:?}"),
            })?;
            if name == "objective" {
                objective = value;
                continue;
            }
            let id = self
                .lookup(name)
                .ok_or_else(|| ModelError::UnknownName(name.to_string()))?;
            let value = match self.kinds[id.0] {
                VarKind::Continuous { .. } => value,
                VarKind::Binary | VarKind::Trit => {
                    let rounded = value.round();
                    if (value - rounded).abs() > tol_int {
                        return Err(ModelError::Integrality {
                            name: name.to_string(),
                            value,
                            tol: tol_int,
                        });
                    }
                    rounded
                }
            };
            values.insert(id, value);
        }
        Ok(Solution { status, values, objective })
    }
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn push_term(out: &mut String, coeff: f64, name: &str, wrote_any: &mut bool) {
    if *wrote_any {
        if coeff < 0.0 {
            let _ = write!(out, "- {} {name}", fmt_num(-coeff));
        } else {
            let _ = write!(out, "+ {} {name}", fmt_num(coeff));
        }
    } else {
        let _ = write!(out, "{} {name}", fmt_num(coeff));
        *wrote_any = true;
    }
}

/// Default tolerance for accepting near-integer solver values.
pub const DEFAULT_TOL_INT: f64 = 1e-5;
