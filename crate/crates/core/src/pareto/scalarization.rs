use std::time::Instant;

use super::problem::{RegimeProblem, ThroughputCost};
use super::{check_alpha, Diagnostics, Method, ParetoError, ParetoPoint, PointOutcome, Sweep};
use crate::par::{self, Execution};

/// 1/phi, the golden-section contraction factor.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOptions {
    /// Number of uniformly spaced throughput targets, endpoints included.
    pub grid_size: usize,
    /// Golden-section refinement inside the best grid bracket.
    pub refine: bool,
    /// Refinement stops once the bracket is this fraction of the range.
    pub refine_tol: f64,
    pub execution: Execution,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self {
            grid_size: 200,
            refine: true,
            refine_tol: 1e-6,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridEntry {
    pub t: f64,
    /// `None` when the power minimization failed for this target.
    pub solution: Option<ThroughputCost>,
}

/// Minimum transmit cost on a uniform grid of throughput targets. The grid
/// does not depend on the weight, so one table serves a whole sweep.
#[derive(Debug, Clone)]
pub struct LineSearchTable {
    pub t_lower: f64,
    pub t_upper: f64,
    pub static_power: f64,
    pub entries: Vec<GridEntry>,
}

impl LineSearchTable {
    pub fn build(problem: &RegimeProblem, opts: &LineSearchOptions) -> Result<Self, ParetoError> {
        assert!(opts.grid_size >= 2, "line search needs at least two grid points");
        let sc = &problem.instance().scenario;
        let t_upper = problem.max_throughput()?.tp;
        let rate_sum: f64 = sc.users.iter().map(|u| u.rate_min).sum();
        let slice_sum: f64 = sc.slices.iter().map(|s| s.tp_min).sum();
        let t_lower = rate_sum.max(slice_sum).max(sc.system_qos.tp_min);
        if t_lower > t_upper {
            return Err(ParetoError::EmptyThroughputRange { t_lower, t_upper });
        }
        let n = opts.grid_size;
        let ts: Vec<f64> = (0..n)
            .map(|j| {
                if j + 1 == n {
                    t_upper
                } else {
                    t_lower + (t_upper - t_lower) * j as f64 / (n - 1) as f64
                }
            })
            .collect();
        let entries = par::map(opts.execution, &ts, |&t| GridEntry {
            t,
            solution: solve_target(problem, t),
        });
        if entries.iter().all(|e| e.solution.is_none()) {
            return Err(ParetoError::LineSearchFailed);
        }
        Ok(Self {
            t_lower,
            t_upper,
            static_power: sc.static_power_total(),
            entries,
        })
    }

    /// `alpha t / (P_0 + cost) + (1 - alpha) t`.
    pub fn gamma(&self, alpha: f64, t: f64, cost: f64) -> f64 {
        alpha * t / (self.static_power + cost) + (1.0 - alpha) * t
    }

    fn entry_gamma(&self, alpha: f64, e: &GridEntry) -> f64 {
        e.solution
            .as_ref()
            .map_or(f64::NEG_INFINITY, |s| self.gamma(alpha, e.t, s.cost))
    }
}

fn solve_target(problem: &RegimeProblem, t: f64) -> Option<ThroughputCost> {
    match problem.min_power_for_throughput(t) {
        Ok(s) => Some(s),
        Err(err) => {
            log::warn!("skipping throughput target {t}: {err}");
            None
        }
    }
}

/// Maximizes `alpha GEE + (1 - alpha) TP` by a line search over throughput
/// targets, using a prebuilt table.
pub fn scalarization_point_with(
    problem: &RegimeProblem,
    table: &LineSearchTable,
    alpha: f64,
    opts: &LineSearchOptions,
) -> Result<ParetoPoint, ParetoError> {
    check_alpha(alpha)?;
    let last = table.entries.len() - 1;
    let mut grid_index = last;
    if alpha > 0.0 {
        let mut best = f64::NEG_INFINITY;
        for (j, e) in table.entries.iter().enumerate() {
            let g = table.entry_gamma(alpha, e);
            if g >= best && g > f64::NEG_INFINITY {
                best = g;
                grid_index = j;
            }
        }
    }
    let grid_best = &table.entries[grid_index];
    let mut best = grid_best.solution.clone().ok_or(ParetoError::LineSearchFailed)?;
    let mut best_gamma = table.gamma(alpha, best.t, best.cost);
    let mut evaluations = table.entries.len();

    let range = table.t_upper - table.t_lower;
    if opts.refine && alpha > 0.0 && range > 0.0 {
        let mut lo = table.entries[grid_index.saturating_sub(1)].t;
        let mut hi = table.entries[(grid_index + 1).min(last)].t;
        let mut eval = |t: f64| -> f64 {
            evaluations += 1;
            match solve_target(problem, t) {
                Some(s) => {
                    let g = table.gamma(alpha, t, s.cost);
                    if g >= best_gamma {
                        best_gamma = g;
                        best = s;
                    }
                    g
                }
                None => f64::NEG_INFINITY,
            }
        };
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        while hi - lo > opts.refine_tol * range {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = eval(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = eval(x1);
            }
        }
    }

    let m = problem.metrics(&best.z);
    Ok(ParetoPoint {
        gee: m.gee,
        tp: m.tp,
        allocation: problem.allocation(&best.z),
        sweep_param: alpha,
        method: Method::Scalarization,
        value: best_gamma,
        diagnostics: Diagnostics::LineSearch {
            grid_index,
            t: best.t,
            evaluations,
        },
        feasible: true,
    })
}

/// Builds the line-search table and returns the weighted-sum maximizer.
pub fn scalarization_point(
    problem: &RegimeProblem,
    alpha: f64,
    opts: &LineSearchOptions,
) -> Result<ParetoPoint, ParetoError> {
    let table = LineSearchTable::build(problem, opts)?;
    scalarization_point_with(problem, &table, alpha, opts)
}

/// One scalarization point per weight, sharing the grid of power
/// minimizations.
pub fn scalarization_sweep(
    problem: &RegimeProblem,
    alphas: &[f64],
    opts: &LineSearchOptions,
) -> Result<Sweep, ParetoError> {
    let started = Instant::now();
    let table = LineSearchTable::build(problem, opts)?;
    let table_time = started.elapsed() / alphas.len().max(1) as u32;
    let outcomes = par::map(opts.execution, alphas, |&alpha| {
        let started = Instant::now();
        let result = scalarization_point_with(problem, &table, alpha, opts);
        PointOutcome {
            sweep_param: alpha,
            result,
            wall_time: started.elapsed() + table_time,
        }
    });
    Ok(Sweep::assemble(
        Method::Scalarization,
        outcomes,
        problem.regime(),
        problem.instance().scenario.fingerprint(),
    ))
}
