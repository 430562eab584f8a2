//! Bandwidths restricted to whole physical resource blocks: `b_i = xi_i B_PRB`
//! with integer `xi_i`. For a fixed assignment the problem stays convex in
//! the powers, so the optimum is found by enumerating assignments.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::feasible::{FeasibleError, ReducedSpace};
use crate::model::{Instance, Scenario};
use crate::par::{self, Execution};
use crate::pareto::{GdaOptions, ParetoError, ParetoPoint, RegimeProblem};
use crate::solver::SolverOptions;

pub const DEFAULT_MAX_ENUMERATION: u64 = 100_000;

/// Relative slack in the incumbent test, so near-ties are always solved.
const PRUNE_RTOL: f64 = 1e-6;
const PRUNE_ATOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrbConfig {
    /// Bandwidth of one resource block (Hz).
    pub prb_size: f64,
    #[serde(default = "default_cap")]
    pub max_enumeration: u64,
}

fn default_cap() -> u64 {
    DEFAULT_MAX_ENUMERATION
}

impl PrbConfig {
    pub fn new(prb_size: f64) -> Self {
        Self {
            prb_size,
            max_enumeration: DEFAULT_MAX_ENUMERATION,
        }
    }

    /// `floor(B / B_PRB)`.
    pub fn num_blocks(&self, scenario: &Scenario) -> u64 {
        blocks_within(scenario.total_bandwidth, self.prb_size)
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<(), ParetoError> {
        if !(self.prb_size > 0.0) || self.prb_size > scenario.total_bandwidth * (1.0 + 1e-12) {
            return Err(ParetoError::Model(crate::model::ModelError::InvalidScenario(format!(
                "prb_size {} must lie in (0, B = {}]",
                self.prb_size, scenario.total_bandwidth
            ))));
        }
        Ok(())
    }
}

/// Whole blocks of size `size` that fit in `bandwidth`, forgiving round-off
/// in the ratio.
fn blocks_within(bandwidth: f64, size: f64) -> u64 {
    (bandwidth / size * (1.0 + 1e-12)).floor() as u64
}

/// Per-slice block ranges `[lo_i, hi_i]` and the total budget.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Bounds {
    lo: Vec<u64>,
    hi: Vec<u64>,
    total: u64,
}

impl Bounds {
    fn new(scenario: &Scenario, config: &PrbConfig) -> Self {
        let total = config.num_blocks(scenario);
        let lo = scenario
            .slices
            .iter()
            .map(|s| {
                let floor =
                    s.has_positive_floor() || s.user_indices.iter().any(|&k| scenario.users[k].has_positive_floor());
                u64::from(floor)
            })
            .collect();
        let hi = scenario
            .slices
            .iter()
            .map(|s| blocks_within(s.bandwidth_cap, config.prb_size).min(total))
            .collect();
        Self { lo, hi, total }
    }

    /// Number of vectors with `lo <= xi <= hi` and `sum xi <= total`,
    /// saturating at `u64::MAX`.
    fn count(&self) -> u64 {
        // ways[s] = number of prefixes with sum s
        let n = self.total as usize;
        let mut ways = vec![0u64; n + 1];
        ways[0] = 1;
        for (&lo, &hi) in self.lo.iter().zip(&self.hi) {
            let mut next = vec![0u64; n + 1];
            for (s, &w) in ways.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                for x in lo..=hi {
                    let t = s + x as usize;
                    if t > n {
                        break;
                    }
                    next[t] = next[t].saturating_add(w);
                }
            }
            ways = next;
        }
        ways.iter().fold(0u64, |a, &w| a.saturating_add(w))
    }
}

/// Lexicographic iterator over block assignments.
#[derive(Debug, Clone)]
pub struct Assignments {
    bounds: Bounds,
    next: Option<Vec<u64>>,
}

impl Iterator for Assignments {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let current = self.next.take()?;
        let b = &self.bounds;
        // advance the last coordinate that can grow; reset the ones after it
        let mut cand = current.clone();
        let mut pos = cand.len();
        while pos > 0 {
            pos -= 1;
            let tail_lo: u64 = b.lo[pos + 1..].iter().sum();
            let head: u64 = cand[..pos].iter().sum();
            if cand[pos] < b.hi[pos] && head + cand[pos] + 1 + tail_lo <= b.total {
                cand[pos] += 1;
                for j in pos + 1..cand.len() {
                    cand[j] = b.lo[j];
                }
                self.next = Some(cand);
                break;
            }
        }
        Some(current)
    }
}

/// All block assignments `xi` with `sum xi <= N_PRB` and `xi_i B_PRB <= B_i`.
/// Slices that carry a positive throughput, rate or efficiency floor get at
/// least one block.
pub fn enumerate_assignments(scenario: &Scenario, config: &PrbConfig) -> Result<Assignments, ParetoError> {
    config.validate(scenario)?;
    let bounds = Bounds::new(scenario, config);
    let count = bounds.count();
    if count > config.max_enumeration {
        return Err(ParetoError::EnumerationCapExceeded {
            count,
            cap: config.max_enumeration,
        });
    }
    let start = bounds.lo.clone();
    let feasible = start.iter().sum::<u64>() <= bounds.total && start.iter().zip(&bounds.hi).all(|(l, h)| l <= h);
    Ok(Assignments {
        bounds,
        next: feasible.then_some(start),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrbOptions {
    pub gda: GdaOptions,
    pub solver: SolverOptions,
    pub execution: Execution,
}

#[derive(Debug, Clone)]
pub struct PrbPoint {
    pub point: ParetoPoint,
    /// Blocks per slice of the returned allocation.
    pub assignment: Vec<u64>,
    /// Assignments with no room to add a block.
    pub maximal_assignments: usize,
    /// Maximal assignments actually solved.
    pub solved: usize,
}

fn is_maximal(xi: &[u64], bounds: &Bounds) -> bool {
    xi.iter().sum::<u64>() == bounds.total || xi.iter().zip(&bounds.hi).all(|(x, h)| x == h)
}

/// Records `value` into `incumbent` (f64 bits, values are nonnegative).
fn raise(incumbent: &AtomicU64, value: f64) {
    if value.is_finite() && value >= 0.0 {
        incumbent.fetch_max(value.to_bits(), Ordering::Relaxed);
    }
}

fn read(incumbent: &AtomicU64) -> f64 {
    f64::from_bits(incumbent.load(Ordering::Relaxed))
}

fn prunable(bound: f64, incumbent: f64) -> bool {
    bound < incumbent * (1.0 - PRUNE_RTOL) - PRUNE_ATOL
}

enum Leaf {
    Solved(Vec<u64>, ParetoPoint),
    Infeasible(f64),
    Pruned,
    Failed(ParetoError),
}

/// Boundary point on the ray `(alpha, 1 - alpha)` with whole-block
/// bandwidths. Every quantity is nondecreasing in each bandwidth, so only
/// assignments with no room for another block are solved. Assignments are
/// grouped by the first slice's block count; a group is skipped when its
/// continuous relaxation cannot beat the incumbent.
pub fn gda_point_prb(
    instance: &Arc<Instance>,
    alpha: f64,
    config: &PrbConfig,
    opts: &PrbOptions,
) -> Result<PrbPoint, ParetoError> {
    let scenario = &instance.scenario;
    let assignments = enumerate_assignments(scenario, config)?;
    let bounds = assignments.bounds.clone();
    let maximal: Vec<Vec<u64>> = assignments.filter(|xi| is_maximal(xi, &bounds)).collect();
    if maximal.is_empty() {
        return Err(FeasibleError::Infeasible {
            certificate: f64::INFINITY,
        }
        .into());
    }
    let mut groups: Vec<Vec<Vec<u64>>> = Vec::new();
    for xi in &maximal {
        match groups.last_mut() {
            Some(g) if g[0][0] == xi[0] => g.push(xi.clone()),
            _ => groups.push(vec![xi.clone()]),
        }
    }

    let incumbent = AtomicU64::new(0.0f64.to_bits());
    let solve_leaf = |xi: &Vec<u64>| -> Leaf {
        if xi.iter().all(|&x| x == 0) {
            // no bandwidth at all: nothing to optimize
            return Leaf::Infeasible(0.0);
        }
        let pinned: Vec<Option<f64>> = xi.iter().map(|&x| Some(x as f64 * config.prb_size)).collect();
        let space = ReducedSpace::pinned(scenario, &pinned);
        let result = RegimeProblem::new(instance.clone(), space, opts.solver)
            .and_then(|p| crate::pareto::gda_point(&p, alpha, &opts.gda));
        match result {
            Ok(point) => {
                raise(&incumbent, point.value);
                Leaf::Solved(xi.clone(), point)
            }
            Err(ParetoError::Feasible(FeasibleError::Infeasible { certificate })) => Leaf::Infeasible(certificate),
            Err(ParetoError::Feasible(FeasibleError::FixedConstraintViolated { value, .. })) => Leaf::Infeasible(value),
            Err(e) => Leaf::Failed(e),
        }
    };
    let relaxation_bound = |first: u64| -> Option<f64> {
        let mut pinned = vec![None; scenario.num_slices()];
        pinned[0] = Some(first as f64 * config.prb_size);
        let space = ReducedSpace::pinned(scenario, &pinned);
        RegimeProblem::new(instance.clone(), space, opts.solver)
            .and_then(|p| crate::pareto::gda_point(&p, alpha, &opts.gda))
            .ok()
            .map(|p| p.value)
    };

    let results: Vec<Vec<Leaf>> = par::map(opts.execution, &groups, |group| {
        if group.len() > 1 {
            match relaxation_bound(group[0][0]) {
                Some(bound) if prunable(bound, read(&incumbent)) => {
                    return group.iter().map(|_| Leaf::Pruned).collect();
                }
                // an unsolved relaxation gives no bound
                _ => {}
            }
        }
        group.iter().map(solve_leaf).collect()
    });

    let mut best: Option<(Vec<u64>, ParetoPoint)> = None;
    let mut solved = 0;
    let mut certificate = f64::INFINITY;
    let mut failure = None;
    for leaf in results.into_iter().flatten() {
        match leaf {
            Leaf::Solved(xi, point) => {
                solved += 1;
                let better = match &best {
                    None => true,
                    Some((bxi, bp)) => point.value > bp.value || (point.value == bp.value && xi < *bxi),
                };
                if better {
                    best = Some((xi, point));
                }
            }
            Leaf::Infeasible(c) => {
                solved += 1;
                certificate = certificate.min(c);
            }
            Leaf::Pruned => {}
            Leaf::Failed(e) => {
                solved += 1;
                failure.get_or_insert(e);
            }
        }
    }
    match best {
        Some((assignment, point)) => Ok(PrbPoint {
            point,
            assignment,
            maximal_assignments: maximal.len(),
            solved,
        }),
        None => Err(failure.unwrap_or(FeasibleError::Infeasible { certificate }.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasible::RegimeSpec;
    use crate::model::{Slice, SystemQos, User, C64};
    use std::collections::BTreeSet;

    fn scenario(num_slices: usize, bandwidth: f64) -> Scenario {
        let users = (0..num_slices)
            .map(|i| {
                let mut u = User::new(vec![C64::new(1.0 - 0.2 * i as f64, 0.1 * i as f64)], i);
                u.pa_inefficiency = 4.0;
                u
            })
            .collect();
        Scenario::new(
            1,
            bandwidth,
            10.0,
            1e-2,
            (0..num_slices).map(|_| Slice::new(10.0, bandwidth)).collect(),
            users,
            SystemQos::default(),
        )
        .unwrap()
    }

    fn collect(sc: &Scenario, size: f64) -> Vec<Vec<u64>> {
        enumerate_assignments(sc, &PrbConfig::new(size)).unwrap().collect()
    }

    #[test]
    fn assignment_counts() {
        assert_eq!(
            collect(&scenario(1, 3.0), 1.0),
            vec![vec![0], vec![1], vec![2], vec![3]]
        );
        let two: BTreeSet<Vec<u64>> = collect(&scenario(2, 2.0), 1.0).into_iter().collect();
        let expected: BTreeSet<Vec<u64>> = [[0, 0], [0, 1], [1, 0], [0, 2], [1, 1], [2, 0]]
            .iter()
            .map(|v| v.to_vec())
            .collect();
        assert_eq!(two, expected);
        let four = collect(&scenario(4, 10.0), 1.0);
        assert_eq!(four.len(), 1001);
        assert_eq!(four.iter().collect::<BTreeSet<_>>().len(), 1001);
        assert_eq!(Bounds::new(&scenario(4, 10.0), &PrbConfig::new(1.0)).count(), 1001);
    }

    #[test]
    fn caps_and_floors_shape_the_ranges() {
        let mut sc = scenario(2, 10.0);
        sc.slices[0].bandwidth_cap = 3.0;
        sc.users[1].rate_min = 1.0;
        let all = collect(&sc, 1.0);
        assert!(all.iter().all(|xi| xi[0] <= 3 && xi[1] >= 1 && xi[0] + xi[1] <= 10));
        assert_eq!(all.len(), (0..=3).map(|a| 10 - a).sum::<u64>() as usize);
    }

    #[test]
    fn cap_exceeded() {
        let sc = scenario(4, 100.0);
        let cfg = PrbConfig {
            prb_size: 1.0,
            max_enumeration: 1000,
        };
        assert!(matches!(
            enumerate_assignments(&sc, &cfg),
            Err(ParetoError::EnumerationCapExceeded { cap: 1000, .. })
        ));
    }

    #[test]
    fn whole_band_block_goes_to_the_only_slice() {
        let mut sc = scenario(1, 10.0);
        sc.users[0].rate_min = 1.0;
        let inst = Arc::new(Instance::new(sc.clone()).unwrap());
        assert_eq!(collect(&sc, 10.0), vec![vec![1]]);
        let res = gda_point_prb(&inst, 0.5, &PrbConfig::new(10.0), &PrbOptions::default()).unwrap();
        assert_eq!(res.assignment, vec![1]);
        assert_eq!(res.point.allocation.bandwidths, vec![10.0]);
    }

    #[test]
    fn matches_continuous_optimum_with_fine_blocks() {
        let sc = scenario(2, 10.0);
        let inst = Arc::new(Instance::new(sc).unwrap());
        let problem = RegimeProblem::for_regime(inst.clone(), &RegimeSpec::set_iv(), Default::default()).unwrap();
        for alpha in [0.0, 0.5, 1.0] {
            let cont = crate::pareto::gda_point(&problem, alpha, &GdaOptions::default())
                .unwrap()
                .value;
            let prb = gda_point_prb(&inst, alpha, &PrbConfig::new(0.5), &PrbOptions::default()).unwrap();
            assert!(prb.point.value <= cont * (1.0 + 1e-6));
            assert!(
                prb.point.value >= cont * 0.98,
                "alpha {alpha}: {} vs {cont}",
                prb.point.value
            );
        }
    }

    #[test]
    fn infeasible_under_every_assignment() {
        let mut sc = scenario(2, 10.0);
        sc.users[0].rate_min = 1e4;
        let inst = Arc::new(Instance::new(sc).unwrap());
        let err = gda_point_prb(&inst, 0.5, &PrbConfig::new(1.0), &PrbOptions::default()).unwrap_err();
        assert!(err.is_infeasible(), "{err}");
    }
}
