//! Pareto boundary of (GEE, TP): the utility-profile approach through the
//! generalized Dinkelbach algorithm, and the scalarization approach through
//! a line search over throughput targets.

mod filter;
mod problem;
mod profile;
mod scalarization;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::feasible::{FeasibleError, RegimeKind};
use crate::model::{Allocation, ModelError};
use crate::solver::SolverError;

pub use filter::{convex_hull_upper_indices, distance_to_polyline, dominates, pareto_filter_indices, TIE_TOL};
pub use problem::{Metrics, RegimeProblem, ThroughputCost};
pub use profile::{gda_point, utility_profile_sweep, GdaOptions, GdaOutcome, InnerForm, LambdaUpdate, SweepOptions};
pub use scalarization::{
    scalarization_point, scalarization_point_with, scalarization_sweep, GridEntry, LineSearchOptions, LineSearchTable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feasible(#[from] FeasibleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("alpha = {0} is outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("throughput range is empty: lower bound {t_lower} exceeds maximum {t_upper}")]
    EmptyThroughputRange { t_lower: f64, t_upper: f64 },
    #[error("Dinkelbach iteration did not reach F <= {epsilon:e} in {iterations} iterations (last F = {last_f:e})")]
    NonConvergent {
        iterations: usize,
        epsilon: f64,
        last_f: f64,
    },
    #[error("no throughput target in the line search could be solved")]
    LineSearchFailed,
    #[error("{count} PRB assignments exceed the enumeration cap {cap}")]
    EnumerationCapExceeded { count: u64, cap: u64 },
}

impl ParetoError {
    /// True when the error states that no allocation meets the constraints.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            ParetoError::Feasible(FeasibleError::Infeasible { .. })
                | ParetoError::Feasible(FeasibleError::FixedConstraintViolated { .. })
                | ParetoError::EmptyThroughputRange { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    UtilityProfile,
    Scalarization,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::UtilityProfile => "utility_profile",
            Method::Scalarization => "scalarization",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    Gda {
        iterations: usize,
        /// `lambda^j` for every iteration.
        lambdas: Vec<f64>,
        /// `F(b^j, p^j; lambda^j)` for every iteration.
        f_values: Vec<f64>,
    },
    LineSearch {
        /// Index of the best coarse grid point.
        grid_index: usize,
        /// Throughput target of the returned point.
        t: f64,
        /// Number of power-minimization solves spent on this point,
        /// including the shared grid.
        evaluations: usize,
    },
}

impl Diagnostics {
    /// Outer iteration count reported in result tables.
    pub fn iterations(&self) -> usize {
        match self {
            Diagnostics::Gda { iterations, .. } => *iterations,
            Diagnostics::LineSearch { evaluations, .. } => *evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub gee: f64,
    pub tp: f64,
    pub allocation: Allocation,
    /// `alpha` of the ray or of the weighted sum.
    pub sweep_param: f64,
    pub method: Method,
    /// `t*` of the utility profile, or the weighted sum `gamma(t)`.
    pub value: f64,
    pub diagnostics: Diagnostics,
    pub feasible: bool,
}

impl ParetoPoint {
    pub fn pair(&self) -> (f64, f64) {
        (self.gee, self.tp)
    }
}

/// Nondominated points of a sweep, sorted by ascending TP.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoBoundary {
    pub points: Vec<ParetoPoint>,
    pub regime: Option<RegimeKind>,
    pub scenario_hash: u64,
}

impl ParetoBoundary {
    /// Filters `points` down to the boundary.
    pub fn from_points(points: &[ParetoPoint], regime: Option<RegimeKind>, scenario_hash: u64) -> Self {
        Self {
            points: pareto_filter(points),
            regime,
            scenario_hash,
        }
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(ParetoPoint::pair).collect()
    }

    /// Vertices of the Pareto-relevant convex hull arc.
    pub fn convex_hull(&self) -> Vec<ParetoPoint> {
        convex_hull_upper(&self.points)
    }
}

/// Removes every point weakly dominated by another; see
/// [`pareto_filter_indices`].
pub fn pareto_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let pairs: Vec<_> = points.iter().map(ParetoPoint::pair).collect();
    pareto_filter_indices(&pairs)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

pub fn convex_hull_upper(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let pairs: Vec<_> = points.iter().map(ParetoPoint::pair).collect();
    convex_hull_upper_indices(&pairs)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

/// Result of one sweep parameter.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub sweep_param: f64,
    pub result: Result<ParetoPoint, ParetoError>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub method: Method,
    pub outcomes: Vec<PointOutcome>,
    pub boundary: ParetoBoundary,
}

impl Sweep {
    fn assemble(method: Method, outcomes: Vec<PointOutcome>, regime: Option<RegimeKind>, scenario_hash: u64) -> Self {
        let points: Vec<ParetoPoint> = outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok().cloned())
            .collect();
        Self {
            method,
            boundary: ParetoBoundary::from_points(&points, regime, scenario_hash),
            outcomes,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = &ParetoPoint> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), ParetoError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ParetoError::InvalidAlpha(alpha))
    }
}
