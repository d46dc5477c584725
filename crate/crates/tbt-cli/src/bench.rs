//! Built-in benchmark problems: the single-robot battery-branching mission,
//! the two-agent swap with minimum separation, and the encoding-size
//! scaling sweep.

use std::sync::Arc;

use tbt::encoder::{predict_size, EnforceMode, PredictedSize};
use tbt::formula::SpecDocument;
use tbt::synthesis::{
    block_diag, box_region_formula, build_problem, double_integrator, l1_separation_formula,
    BuiltProblem, ControlBounds, LinearSystem, SynthesisError, SynthesisProblem,
};
use tbt::{Formula, Predicate, Trace};

pub const GOAL_DELTA: f64 = 0.25;

/// Axis-aligned box over the two position coordinates of one agent.
#[derive(Clone, Copy, Debug)]
pub struct Box2 {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Box2 {
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![self.x, self.y]
    }

    /// Membership test used by route-order checks: strictly inside with the
    /// goal margin, i.e. the box's `inside` formula holds definitely.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x.0 + GOAL_DELTA
            && px <= self.x.1 - GOAL_DELTA
            && py >= self.y.0 + GOAL_DELTA
            && py <= self.y.1 - GOAL_DELTA
    }
}

/// Geometry of the battery mission. Positions are coordinates 0 (x) and
/// 2 (y) of the 5-state system (double integrator + battery level).
#[derive(Clone, Debug)]
pub struct Case1 {
    pub horizon: usize,
    pub goal_a: Box2,
    pub goal_b: Box2,
    pub goal_c: Box2,
    pub obstacles: Vec<Box2>,
    pub battery: f64,
}

impl Case1 {
    /// Full-scale mission: T = 25, dt = 0.5 s, two obstacles.
    pub fn full(battery: f64) -> Case1 {
        Case1 {
            horizon: 25,
            goal_a: Box2 { x: (1.25, 2.0), y: (1.25, 2.0) },
            goal_b: Box2 { x: (3.0, 3.75), y: (1.25, 2.0) },
            goal_c: Box2 { x: (1.75, 2.5), y: (-0.5, 0.25) },
            obstacles: vec![
                Box2 { x: (0.4, 0.9), y: (0.4, 0.9) },
                Box2 { x: (2.4, 2.9), y: (0.7, 1.2) },
            ],
            battery,
        }
    }

    /// Reduced mission: T = 15, one obstacle, goals drawn in tighter.
    pub fn reduced(battery: f64) -> Case1 {
        Case1 {
            horizon: 15,
            goal_a: Box2 { x: (0.6, 1.35), y: (0.6, 1.35) },
            goal_b: Box2 { x: (1.8, 2.55), y: (0.6, 1.35) },
            goal_c: Box2 { x: (0.9, 1.65), y: (-0.45, 0.3) },
            obstacles: vec![Box2 { x: (0.3, 0.7), y: (0.3, 0.7) }],
            battery,
        }
    }

    pub fn system(&self) -> LinearSystem {
        let (di_a, di_b) = double_integrator(0.5);
        // 5th state: battery level, constant over time, no control input.
        let mut a = vec![vec![0.0; 5]; 5];
        let mut b = vec![vec![0.0; 2]; 5];
        for i in 0..4 {
            a[i][..4].copy_from_slice(&di_a[i]);
            b[i].copy_from_slice(&di_b[i]);
        }
        a[4][4] = 1.0;
        let mut state_box = vec![(-6.0, 6.0), (-3.0, 3.0), (-6.0, 6.0), (-3.0, 3.0)];
        state_box.push((0.0, 1.0));
        LinearSystem { n: 5, m: 2, a, b, dt: 0.5, state_box }
    }

    pub fn spec(&self) -> Result<SpecDocument, SynthesisError> {
        let coords = [0usize, 2];
        let goal = |b: &Box2, name: &str| {
            box_region_formula(&coords, &b.bounds(), GOAL_DELTA, true, 5, name)
        };
        let t = self.horizon as u32;
        let phi_a = Formula::eventually(0, t, goal(&self.goal_a, "A")?).unwrap();
        let phi_b = Formula::eventually(0, t, goal(&self.goal_b, "B")?).unwrap();
        let phi_c = Formula::eventually(0, t, goal(&self.goal_c, "C")?).unwrap();
        let batt = Formula::Pred(Arc::new(
            Predicate::new("batt_hi", vec![0.0, 0.0, 0.0, 0.0, 1.0], 0.8, 0.0).unwrap(),
        ));
        let mission = Formula::Seq(vec![
            phi_a,
            Formula::Seq(vec![Formula::Sel(vec![batt, phi_c]), phi_b]),
        ]);
        let mut conjuncts = vec![mission];
        for (k, o) in self.obstacles.iter().enumerate() {
            let avoid = box_region_formula(
                &coords,
                &o.bounds(),
                GOAL_DELTA,
                false,
                5,
                &format!("O{}", k + 1),
            )?;
            conjuncts.push(Formula::always(0, t, avoid).unwrap());
        }
        let formula = Formula::And(conjuncts).normalize_kary();
        let predicates = formula.predicates();
        Ok(SpecDocument { predicates, formula, t_star: 0 })
    }

    pub fn problem(&self, r: f64, epsilon: f64) -> Result<SynthesisProblem, SynthesisError> {
        Ok(SynthesisProblem {
            system: self.system(),
            bounds: ControlBounds { bounds: vec![(-1.0, 1.0); 2] },
            x0: vec![0.0, 0.0, 0.0, 0.0, self.battery],
            spec: self.spec()?,
            horizon: self.horizon,
            r: vec![r; 2],
            enforce: EnforceMode::AtFinal,
            epsilon,
        })
    }

    /// First time step at which the trajectory is strictly inside a box,
    /// if any.
    pub fn first_entry(&self, trace: &Trace, b: &Box2) -> Option<usize> {
        trace
            .samples()
            .iter()
            .position(|x| b.contains(x[0], x[2]))
    }
}

/// Two double-integrator agents swapping goal regions under a Manhattan
/// minimum-separation invariant.
#[derive(Clone, Debug)]
pub struct Case2 {
    pub horizon: usize,
    pub goal_a: Box2,
    pub goal_b: Box2,
    pub d_min: f64,
}

impl Case2 {
    pub fn desk() -> Case2 {
        Case2 {
            horizon: 14,
            goal_a: Box2 { x: (-0.5, 0.25), y: (1.25, 2.0) },
            goal_b: Box2 { x: (1.75, 2.5), y: (1.25, 2.0) },
            d_min: 0.6,
        }
    }

    pub fn system(&self) -> LinearSystem {
        let (a, b) = double_integrator(0.5);
        let agent = LinearSystem {
            n: 4,
            m: 2,
            a,
            b,
            dt: 0.5,
            state_box: vec![(-5.0, 5.0), (-3.0, 3.0), (-5.0, 5.0), (-3.0, 3.0)],
        };
        block_diag(&[agent.clone(), agent]).expect("agent blocks are consistent")
    }

    pub fn spec(&self) -> Result<SpecDocument, SynthesisError> {
        let t = self.horizon as u32;
        // Agent 1 occupies coordinates 0/2, agent 2 coordinates 4/6.
        let goal = |coords: [usize; 2], b: &Box2, name: &str| {
            box_region_formula(&coords, &b.bounds(), GOAL_DELTA, true, 8, name)
        };
        let phase1 = Formula::And(vec![
            Formula::eventually(0, t, goal([0, 2], &self.goal_b, "a1_B")?).unwrap(),
            Formula::eventually(0, t, goal([4, 6], &self.goal_a, "a2_A")?).unwrap(),
        ]);
        let phase2 = Formula::And(vec![
            Formula::eventually(0, t, goal([0, 2], &self.goal_a, "a1_A")?).unwrap(),
            Formula::eventually(0, t, goal([4, 6], &self.goal_b, "a2_B")?).unwrap(),
        ]);
        let sep = l1_separation_formula((0, 2), (4, 6), self.d_min, 8, "sep")?;
        let formula = Formula::And(vec![
            Formula::Seq(vec![phase1, phase2]),
            Formula::always(0, t, sep).unwrap(),
        ])
        .normalize_kary();
        let predicates = formula.predicates();
        Ok(SpecDocument { predicates, formula, t_star: 0 })
    }

    pub fn problem(&self, r: f64, epsilon: f64) -> Result<SynthesisProblem, SynthesisError> {
        Ok(SynthesisProblem {
            system: self.system(),
            bounds: ControlBounds { bounds: vec![(-1.0, 1.0); 4] },
            x0: vec![0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
            spec: self.spec()?,
            horizon: self.horizon,
            r: vec![r; 4],
            enforce: EnforceMode::AtFinal,
            epsilon,
        })
    }

    /// Minimum over time of the Manhattan inter-agent distance.
    pub fn min_l1_distance(trace: &Trace) -> f64 {
        trace
            .samples()
            .iter()
            .map(|x| (x[0] - x[4]).abs() + (x[2] - x[6]).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// One row of the scaling sweep: a two-stage Sequence of full-horizon
/// reaches over a single integrator, encoded at growing horizons.
pub struct ScalingRow {
    pub horizon: usize,
    pub stats: tbt::milp::ModelStats,
    pub predicted: PredictedSize,
    pub formula_trits: usize,
    pub formula_binaries: usize,
    pub formula_constraints: usize,
    pub build_seconds: f64,
}

pub fn scaling_problem(horizon: usize, epsilon: f64) -> SynthesisProblem {
    let t = horizon as u32;
    let pred = |name: &str, b: f64| {
        Formula::Pred(Arc::new(Predicate::new(name, vec![1.0], b, 0.25).unwrap()))
    };
    let formula = Formula::Seq(vec![
        Formula::eventually(0, t, pred("stage1", 1.0)).unwrap(),
        Formula::eventually(0, t, pred("stage2", -1.0)).unwrap(),
    ])
    .normalize_kary();
    let predicates = formula.predicates();
    SynthesisProblem {
        system: LinearSystem {
            n: 1,
            m: 1,
            a: vec![vec![1.0]],
            b: vec![vec![1.0]],
            dt: 1.0,
            state_box: vec![(-10.0, 10.0)],
        },
        bounds: ControlBounds { bounds: vec![(-1.0, 1.0)] },
        x0: vec![0.0],
        spec: SpecDocument { predicates, formula, t_star: 0 },
        horizon,
        r: vec![0.0],
        enforce: EnforceMode::AtFinal,
        epsilon,
    }
}

/// Builds the scaling sweep and checks the analytic size prediction against
/// each materialized model. The dynamics part is subtracted exactly: the
/// formula encoding adds only trits, binaries, and rows on top of it.
pub fn scaling_sweep(
    horizons: &[usize],
    epsilon: f64,
) -> Result<Vec<ScalingRow>, SynthesisError> {
    let mut rows = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let p = scaling_problem(horizon, epsilon);
        let start = std::time::Instant::now();
        let built: BuiltProblem = build_problem(&p)?;
        let build_seconds = start.elapsed().as_secs_f64();
        let stats = built.model.stats();
        let norm = p.spec.formula.normalize_kary();
        let (table, root) = tbt::formula::NodeTable::build(&norm);
        let predicted = predict_size(&table, root, 0, horizon, p.enforce);
        // Dynamics contribute n initial rows plus n per step; everything
        // integer-valued belongs to the formula encoding.
        let dynamics_rows = p.system.n * (horizon + 1);
        rows.push(ScalingRow {
            horizon,
            stats,
            predicted,
            formula_trits: stats.trit_vars,
            formula_binaries: stats.binary_vars,
            formula_constraints: stats.linear_constraints - dynamics_rows,
            build_seconds,
        });
    }
    Ok(rows)
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from(
        "T,trit_vars,binary_vars,formula_constraints,predicted_trits,predicted_binaries,predicted_constraints,total_constraints,build_seconds\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6}\n",
            r.horizon,
            r.formula_trits,
            r.formula_binaries,
            r.formula_constraints,
            r.predicted.trit_vars,
            r.predicted.binary_vars,
            r.predicted.linear_constraints,
            r.stats.linear_constraints,
            r.build_seconds,
        ));
    }
    out
}
