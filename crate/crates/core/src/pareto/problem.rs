use std::sync::{Arc, OnceLock};

use nalgebra::DVector;

use super::ParetoError;
use crate::feasible::{Constraint, ConstraintKind, ConstraintSet, ReducedModel, ReducedSpace, RegimeKind, RegimeSpec};
use crate::model::{Allocation, Instance};
use crate::solver::{self, ConvexProgram, SharedFn, SolverOptions};

/// Weight of the strictly feasible phase-I point in warm starts.
pub(crate) const INTERIOR_PULL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub gee: f64,
    pub tp: f64,
    /// `P_0 + sum_k phi_k p_k`.
    pub consumed_power: f64,
}

/// Minimum transmit cost for a throughput target.
#[derive(Debug, Clone)]
pub struct ThroughputCost {
    pub t: f64,
    pub z: DVector<f64>,
    /// `sum_k phi_k p_k`.
    pub cost: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct MaxThroughput {
    pub z: DVector<f64>,
    pub tp: f64,
    pub newton_iters: usize,
}

/// One reduced allocation problem: the constraint set of a regime (or a
/// pinned-bandwidth subspace), a strictly feasible start, and cached
/// single-objective optima.
#[derive(Debug)]
pub struct RegimeProblem {
    instance: Arc<Instance>,
    set: ConstraintSet,
    start: DVector<f64>,
    solver: SolverOptions,
    max_tp: OnceLock<Result<MaxThroughput, ParetoError>>,
}

impl RegimeProblem {
    /// Builds the constraint set and finds a strictly feasible point.
    pub fn new(instance: Arc<Instance>, space: ReducedSpace, solver: SolverOptions) -> Result<Self, ParetoError> {
        let set = ConstraintSet::build(ReducedModel::new(instance.clone(), space))?;
        let start = set.strictly_feasible_point(&solver)?.0;
        Ok(Self {
            instance,
            set,
            start,
            solver,
            max_tp: OnceLock::new(),
        })
    }

    pub fn for_regime(
        instance: Arc<Instance>,
        regime: &RegimeSpec,
        solver: SolverOptions,
    ) -> Result<Self, ParetoError> {
        let space = ReducedSpace::for_regime(&instance.scenario, regime)?;
        Self::new(instance, space, solver)
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn model(&self) -> &Arc<ReducedModel> {
        self.set.model()
    }

    pub fn regime(&self) -> Option<RegimeKind> {
        self.model().space.regime_kind()
    }

    pub fn solver_options(&self) -> &SolverOptions {
        &self.solver
    }

    /// The strictly feasible phase-I point.
    pub fn start(&self) -> &DVector<f64> {
        &self.start
    }

    pub fn allocation(&self, z: &DVector<f64>) -> Allocation {
        self.model().space.expand_vec(z)
    }

    pub fn metrics(&self, z: &DVector<f64>) -> Metrics {
        let alloc = self.allocation(z);
        Metrics {
            gee: self.instance.gee(&alloc),
            tp: self.instance.tp(&alloc),
            consumed_power: self.instance.consumed_power(&alloc),
        }
    }

    /// `(1 - w) z + w start`: strictly feasible whenever `z` is feasible.
    pub(crate) fn pull_inside(&self, z: &DVector<f64>) -> DVector<f64> {
        z * (1.0 - INTERIOR_PULL) + &self.start * INTERIOR_PULL
    }

    pub(crate) fn barrier_constraints(&self) -> Vec<SharedFn> {
        self.set.barrier_functions()
    }

    /// Maximum system throughput over the feasible set (cached).
    pub(crate) fn max_throughput(&self) -> Result<&MaxThroughput, ParetoError> {
        self.max_tp
            .get_or_init(|| {
                let model = self.model();
                let program = ConvexProgram {
                    objective: model.function(model.throughput_form(-1.0)),
                    constraints: self.barrier_constraints(),
                    x0: self.start.clone(),
                };
                let sol = solver::solve(&program, &self.solver)?.ensure_optimal()?;
                let tp = self.metrics(&sol.x).tp;
                Ok(MaxThroughput {
                    z: sol.x,
                    tp,
                    newton_iters: sol.newton_total_iters,
                })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Maximum system throughput and a maximizing reduced point.
    pub fn maximize_tp(&self) -> Result<(DVector<f64>, f64), ParetoError> {
        self.max_throughput().map(|m| (m.z.clone(), m.tp))
    }

    /// Minimizes `sum_k phi_k p_k` subject to the feasible set and
    /// `TP >= t`.
    pub fn min_power_for_throughput(&self, t: f64) -> Result<ThroughputCost, ParetoError> {
        let model = self.model();
        let cost_form = model.transmit_cost_form(0..self.instance.scenario.num_users());
        let max = self.max_throughput()?;
        let cost_of = |z: &DVector<f64>| {
            let alloc = self.allocation(z);
            self.instance
                .transmit_cost(&alloc, 0..self.instance.scenario.num_users())
        };
        if t >= max.tp {
            // nothing has throughput strictly above the maximum
            return Ok(ThroughputCost {
                t,
                cost: cost_of(&max.z),
                z: max.z.clone(),
                newton_iters: 0,
            });
        }
        let mut set = self.set.clone();
        let mut x0 = self.start.clone();
        if t > 0.0 {
            set.push(Constraint {
                kind: ConstraintKind::ThroughputFloor,
                form: model.throughput_form(-1.0).with_constant(t),
                scale: t.max(1.0),
            });
            let tp0 = self.metrics(&self.start).tp;
            if tp0 <= t {
                // TP is concave, so along the segment it stays above the
                // chord; aim halfway between the chord crossing and max.z.
                let theta = (t - tp0) / (max.tp - tp0);
                let theta = theta + (1.0 - theta) / 2.0;
                x0 = &max.z * theta + &self.start * (1.0 - theta);
            }
        }
        let program = ConvexProgram {
            objective: model.function(cost_form),
            constraints: set.barrier_functions(),
            x0,
        };
        let sol = solver::solve(&program, &self.solver)?.ensure_optimal()?;
        Ok(ThroughputCost {
            t,
            cost: cost_of(&sol.x),
            z: sol.x,
            newton_iters: sol.newton_total_iters,
        })
    }
}
