//! The feasible set of joint bandwidth/power allocations in its convex
//! (multiplied-out) form, the four allocation regimes, and strictly
//! feasible starting points.
//!
//! Every regime is an affine parameterization `x = A z + x_off` of the full
//! vector `x = (b_1..b_I, p_1..p_K)` by reduced variables `z`. All model
//! functions used by the optimizers have the shape
//!
//! ```text
//! f(z) = const + lin^T x(z) + sum_k w_k R_k(b_{s_k}(z), p_k(z))
//! ```
//!
//! which is convex whenever every `w_k <= 0` (each rate is jointly concave
//! in bandwidth and power).

use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Allocation, Instance, Scenario};
use crate::solver::{self, ConvexProgram, LinearFunction, SharedFn, SmoothFunction, SolverError, SolverOptions};

/// Relative slack required of starting points handed to the barrier solver.
pub const STRICTNESS_MARGIN: f64 = 1e-6;
/// Lower bound on every bandwidth variable, as a fraction of `B`.
pub const BANDWIDTH_FLOOR_FRACTION: f64 = 1e-9;
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeasibleError {
    #[error("invalid shares: {0}")]
    InvalidShares(String),
    #[error("QoS constraints cannot be met (phase-I certificate {certificate:e} >= 0)")]
    Infeasible { certificate: f64 },
    #[error("constraint {constraint} is fixed at {value:e} > 0")]
    FixedConstraintViolated { constraint: ConstraintKind, value: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeKind {
    /// Fixed power and bandwidth shares.
    SetI,
    /// Fixed power shares, free bandwidths.
    SetII,
    /// Fixed bandwidth shares, free powers.
    SetIII,
    /// Free bandwidths and powers.
    SetIV,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] = [Self::SetI, Self::SetII, Self::SetIII, Self::SetIV];

    pub fn name(self) -> &'static str {
        match self {
            Self::SetI => "SetI",
            Self::SetII => "SetII",
            Self::SetIII => "SetIII",
            Self::SetIV => "SetIV",
        }
    }

    pub fn fixed_power_shares(self) -> bool {
        matches!(self, Self::SetI | Self::SetII)
    }

    pub fn fixed_bandwidth_shares(self) -> bool {
        matches!(self, Self::SetI | Self::SetIII)
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSpec {
    pub kind: RegimeKind,
    /// `rho`, one entry per user; used by SetI and SetII.
    pub power_shares: Option<Vec<f64>>,
    /// `beta`, one entry per slice; used by SetI and SetIII.
    pub bandwidth_shares: Option<Vec<f64>>,
}

impl RegimeSpec {
    /// Regime with uniform shares wherever shares are needed.
    pub fn uniform(kind: RegimeKind, scenario: &Scenario) -> Self {
        let k = scenario.num_users();
        let i = scenario.num_slices();
        Self {
            kind,
            power_shares: kind.fixed_power_shares().then(|| vec![1.0 / k as f64; k]),
            bandwidth_shares: kind.fixed_bandwidth_shares().then(|| vec![1.0 / i as f64; i]),
        }
    }

    pub fn set_iv() -> Self {
        Self {
            kind: RegimeKind::SetIV,
            power_shares: None,
            bandwidth_shares: None,
        }
    }

    fn shares(
        name: &str,
        shares: &Option<Vec<f64>>,
        needed: bool,
        len: usize,
    ) -> Result<Option<Vec<f64>>, FeasibleError> {
        if !needed {
            return Ok(None);
        }
        let v = shares
            .as_ref()
            .ok_or_else(|| FeasibleError::InvalidShares(format!("{name} missing")))?;
        if v.len() != len {
            return Err(FeasibleError::InvalidShares(format!(
                "{name} has {} entries, expected {len}",
                v.len()
            )));
        }
        if v.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(FeasibleError::InvalidShares(format!(
                "{name} must be strictly positive"
            )));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(FeasibleError::InvalidShares(format!(
                "{name} sums to {sum}, expected 1"
            )));
        }
        Ok(Some(v.clone()))
    }

    /// Checks the shares against the scenario and returns `(rho, beta)`.
    pub fn validated(&self, scenario: &Scenario) -> Result<(Option<Vec<f64>>, Option<Vec<f64>>), FeasibleError> {
        let rho = Self::shares(
            "power_shares",
            &self.power_shares,
            self.kind.fixed_power_shares(),
            scenario.num_users(),
        )?;
        let beta = Self::shares(
            "bandwidth_shares",
            &self.bandwidth_shares,
            self.kind.fixed_bandwidth_shares(),
            scenario.num_slices(),
        )?;
        Ok((rho, beta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Bandwidth,
    Power,
}

/// Reduced variables of a regime: SetI `(B_tot, P_tot)`, SetII `(b, P_tot)`,
/// SetIII `(B_tot, p)`, SetIV `(b, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVariables(pub DVector<f64>);

impl ReducedVariables {
    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SpaceOrigin {
    Regime {
        kind: RegimeKind,
        rho: Option<Vec<f64>>,
        beta: Option<Vec<f64>>,
    },
    /// Some slice bandwidths pinned, the rest free; powers of users on a
    /// zero-bandwidth slice pinned to zero.
    Pinned { bandwidths: Vec<Option<f64>> },
}

/// Affine map from reduced variables to the full `(b, p)` vector.
#[derive(Debug, Clone)]
pub struct ReducedSpace {
    num_slices: usize,
    num_users: usize,
    map: DMatrix<f64>,
    offset: DVector<f64>,
    kinds: Vec<VarKind>,
    lower: DVector<f64>,
    origin: SpaceOrigin,
    /// Row `r` of `map`, cached as a column vector.
    rows: Vec<DVector<f64>>,
}

impl ReducedSpace {
    fn assemble(
        scenario: &Scenario,
        map: DMatrix<f64>,
        offset: DVector<f64>,
        kinds: Vec<VarKind>,
        origin: SpaceOrigin,
    ) -> Self {
        let floor = BANDWIDTH_FLOOR_FRACTION * scenario.total_bandwidth;
        let lower = DVector::from_iterator(
            kinds.len(),
            kinds.iter().map(|k| match k {
                VarKind::Bandwidth => floor,
                VarKind::Power => 0.0,
            }),
        );
        let rows = (0..map.nrows()).map(|r| map.row(r).transpose()).collect();
        Self {
            num_slices: scenario.num_slices(),
            num_users: scenario.num_users(),
            map,
            offset,
            kinds,
            lower,
            origin,
            rows,
        }
    }

    pub fn for_regime(scenario: &Scenario, regime: &RegimeSpec) -> Result<Self, FeasibleError> {
        let (rho, beta) = regime.validated(scenario)?;
        let ni = scenario.num_slices();
        let nk = scenario.num_users();
        let mut kinds = Vec::new();
        let nb = if beta.is_some() { 1 } else { ni };
        let np = if rho.is_some() { 1 } else { nk };
        kinds.extend(std::iter::repeat(VarKind::Bandwidth).take(nb));
        kinds.extend(std::iter::repeat(VarKind::Power).take(np));
        let mut map = DMatrix::zeros(ni + nk, nb + np);
        for i in 0..ni {
            match &beta {
                Some(beta) => map[(i, 0)] = beta[i],
                None => map[(i, i)] = 1.0,
            }
        }
        for k in 0..nk {
            match &rho {
                Some(rho) => map[(ni + k, nb)] = rho[k],
                None => map[(ni + k, nb + k)] = 1.0,
            }
        }
        Ok(Self::assemble(
            scenario,
            map,
            DVector::zeros(ni + nk),
            kinds,
            SpaceOrigin::Regime {
                kind: regime.kind,
                rho,
                beta,
            },
        ))
    }

    /// Joint bandwidth/power space with the given slice bandwidths pinned.
    /// Users of a slice pinned to zero bandwidth get zero power.
    pub fn pinned(scenario: &Scenario, bandwidths: &[Option<f64>]) -> Self {
        let ni = scenario.num_slices();
        let nk = scenario.num_users();
        assert_eq!(bandwidths.len(), ni);
        let free_b: Vec<usize> = (0..ni).filter(|&i| bandwidths[i].is_none()).collect();
        let free_p: Vec<usize> = (0..nk)
            .filter(|&k| bandwidths[scenario.users[k].slice_index] != Some(0.0))
            .collect();
        let n = free_b.len() + free_p.len();
        let mut map = DMatrix::zeros(ni + nk, n);
        let mut offset = DVector::zeros(ni + nk);
        let mut kinds = Vec::with_capacity(n);
        for (i, b) in bandwidths.iter().enumerate() {
            if let Some(b) = b {
                offset[i] = *b;
            }
        }
        for (col, &i) in free_b.iter().enumerate() {
            map[(i, col)] = 1.0;
            kinds.push(VarKind::Bandwidth);
        }
        for (j, &k) in free_p.iter().enumerate() {
            map[(ni + k, free_b.len() + j)] = 1.0;
            kinds.push(VarKind::Power);
        }
        Self::assemble(
            scenario,
            map,
            offset,
            kinds,
            SpaceOrigin::Pinned {
                bandwidths: bandwidths.to_vec(),
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn lower_bounds(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn regime_kind(&self) -> Option<RegimeKind> {
        match &self.origin {
            SpaceOrigin::Regime { kind, .. } => Some(*kind),
            SpaceOrigin::Pinned { .. } => None,
        }
    }

    pub fn full(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.map * z + &self.offset
    }

    pub fn expand(&self, z: &ReducedVariables) -> Allocation {
        self.expand_vec(&z.0)
    }

    pub fn expand_vec(&self, z: &DVector<f64>) -> Allocation {
        let x = self.full(z);
        Allocation::new(
            x.rows(0, self.num_slices).iter().copied().collect(),
            x.rows(self.num_slices, self.num_users).iter().copied().collect(),
        )
    }

    fn b_index(&self, i: usize) -> usize {
        i
    }

    fn p_index(&self, k: usize) -> usize {
        self.num_slices + k
    }

    fn row_is_zero(&self, r: usize) -> bool {
        self.rows[r].iter().all(|&v| v == 0.0)
    }

    /// Bandwidths `min(B_i, B/I)` and powers `min(P_i/|S_i|, P/K)`, shrunk
    /// by the strictness margin and pushed through the regime shares.
    pub fn uniform_point(&self, scenario: &Scenario) -> ReducedVariables {
        let shrink = 1.0 - STRICTNESS_MARGIN;
        let ni = scenario.num_slices();
        let nk = scenario.num_users();
        let b_uniform =
            |i: usize, budget: f64, count: usize| scenario.slices[i].bandwidth_cap.min(budget / count as f64) * shrink;
        let p_uniform = |k: usize, count: usize| {
            let s = &scenario.slices[scenario.users[k].slice_index];
            (s.power_cap / s.user_indices.len() as f64).min(scenario.total_power / count as f64) * shrink
        };
        let mut z = Vec::with_capacity(self.dim());
        match &self.origin {
            SpaceOrigin::Regime { rho, beta, .. } => {
                match beta {
                    Some(beta) => {
                        let cap = (0..ni)
                            .map(|i| scenario.slices[i].bandwidth_cap / beta[i])
                            .fold(scenario.total_bandwidth, f64::min);
                        z.push(cap * shrink);
                    }
                    None => z.extend((0..ni).map(|i| b_uniform(i, scenario.total_bandwidth, ni))),
                }
                match rho {
                    Some(rho) => {
                        let cap = scenario
                            .slices
                            .iter()
                            .map(|s| s.power_cap / s.user_indices.iter().map(|&k| rho[k]).sum::<f64>())
                            .fold(scenario.total_power, f64::min);
                        z.push(cap * shrink);
                    }
                    None => z.extend((0..nk).map(|k| p_uniform(k, nk))),
                }
            }
            SpaceOrigin::Pinned { bandwidths } => {
                let fixed: f64 = bandwidths.iter().flatten().sum();
                let free: Vec<usize> = (0..ni).filter(|&i| bandwidths[i].is_none()).collect();
                let rest = (scenario.total_bandwidth - fixed).max(0.0);
                z.extend(free.iter().map(|&i| b_uniform(i, rest, free.len())));
                let active: Vec<usize> = (0..nk)
                    .filter(|&k| bandwidths[scenario.users[k].slice_index] != Some(0.0))
                    .collect();
                z.extend(active.iter().map(|&k| p_uniform(k, active.len())));
            }
        }
        ReducedVariables(DVector::from_vec(z))
    }
}

/// Convenience wrapper: expands reduced variables of a regime into a full
/// allocation.
pub fn expand(scenario: &Scenario, regime: &RegimeSpec, vars: &ReducedVariables) -> Result<Allocation, FeasibleError> {
    Ok(ReducedSpace::for_regime(scenario, regime)?.expand(vars))
}

/// Channel data and parameterization shared by all functions of one
/// reduced problem.
#[derive(Debug)]
pub struct ReducedModel {
    pub instance: Arc<Instance>,
    pub space: ReducedSpace,
    /// `g_k / N0` per user.
    snr_scale: Vec<f64>,
}

impl ReducedModel {
    pub fn new(instance: Arc<Instance>, space: ReducedSpace) -> Arc<Self> {
        let n0 = instance.scenario.noise_density;
        let snr_scale = instance.gains().iter().map(|g| g / n0).collect();
        Arc::new(Self {
            instance,
            space,
            snr_scale,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.instance.scenario
    }

    pub fn full_dim(&self) -> usize {
        self.space.num_slices + self.space.num_users
    }

    /// `sum_k weight R_k` over all users.
    pub fn throughput_form(&self, weight: f64) -> RateForm {
        RateForm::rates(self.full_dim(), vec![weight; self.space.num_users])
    }

    /// `sum_{k in users} phi_k p_k`.
    pub fn transmit_cost_form(&self, users: impl IntoIterator<Item = usize>) -> RateForm {
        let mut form = RateForm::zero(self.full_dim(), self.space.num_users);
        for k in users {
            form.linear[self.space.p_index(k)] += self.scenario().users[k].pa_inefficiency;
        }
        form
    }

    pub fn function(self: &Arc<Self>, form: RateForm) -> SharedFn {
        Arc::new(ReducedFunction::new(self.clone(), form))
    }

    fn depends_on_variables(&self, form: &RateForm) -> bool {
        let lin_z = self.space.map.tr_mul(&form.linear);
        if lin_z.iter().any(|&v| v != 0.0) {
            return true;
        }
        form.weights.iter().enumerate().any(|(k, &w)| {
            let s = self.scenario().users[k].slice_index;
            w != 0.0
                && !(self.space.row_is_zero(self.space.b_index(s)) && self.space.row_is_zero(self.space.p_index(k)))
        })
    }
}

/// `constant + linear^T x + sum_k weights[k] * R_k(x)` on the full vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RateForm {
    pub constant: f64,
    pub linear: DVector<f64>,
    pub weights: Vec<f64>,
}

impl RateForm {
    pub fn zero(full_dim: usize, num_users: usize) -> Self {
        Self {
            constant: 0.0,
            linear: DVector::zeros(full_dim),
            weights: vec![0.0; num_users],
        }
    }

    pub fn rates(full_dim: usize, weights: Vec<f64>) -> Self {
        Self {
            constant: 0.0,
            linear: DVector::zeros(full_dim),
            weights,
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.constant *= factor;
        self.linear *= factor;
        for w in &mut self.weights {
            *w *= factor;
        }
        self
    }

    pub fn plus(mut self, other: &RateForm) -> Self {
        self.constant += other.constant;
        self.linear += &other.linear;
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += o;
        }
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

/// A [`RateForm`] composed with a reduced parameterization.
struct ReducedFunction {
    model: Arc<ReducedModel>,
    lin_z: DVector<f64>,
    const_z: f64,
    /// `(user, weight)` for nonzero weights.
    terms: Vec<(usize, f64)>,
}

/// Rate value and its partial derivatives at `(b, p)`, `b > 0`.
struct RatePoint {
    d_b: f64,
    d_p: f64,
    /// Hessian is `-kappa v v^T` with `v = (-u, c)` in `(b, p)` order.
    kappa: f64,
    u: f64,
    c: f64,
}

fn rate_point(b: f64, p: f64, c: f64) -> RatePoint {
    let u = c * p / b;
    let q = 1.0 + u;
    RatePoint {
        d_b: (u.ln_1p() - u / q) / LN_2,
        d_p: c / (q * LN_2),
        kappa: 1.0 / (b * q * q * LN_2),
        u,
        c,
    }
}

impl ReducedFunction {
    fn new(model: Arc<ReducedModel>, form: RateForm) -> Self {
        let lin_z = model.space.map.tr_mul(&form.linear);
        let const_z = form.constant + form.linear.dot(&model.space.offset);
        let terms = form
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(k, &w)| (k, w))
            .collect();
        Self {
            model,
            lin_z,
            const_z,
            terms,
        }
    }

    fn user_point(&self, x: &DVector<f64>, k: usize) -> (usize, usize, f64, f64) {
        let sp = &self.model.space;
        let s = self.model.scenario().users[k].slice_index;
        let (bi, pi) = (sp.b_index(s), sp.p_index(k));
        (bi, pi, x[bi], x[pi])
    }
}

impl SmoothFunction for ReducedFunction {
    fn dim(&self) -> usize {
        self.lin_z.len()
    }

    fn value(&self, z: &DVector<f64>) -> f64 {
        let x = self.model.space.full(z);
        let mut v = self.const_z + self.lin_z.dot(z);
        for &(k, w) in &self.terms {
            let (_, _, b, p) = self.user_point(&x, k);
            v += w * crate::model::rate(b, p, self.model.snr_scale[k], 1.0);
        }
        v
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let x = self.model.space.full(z);
        let sp = &self.model.space;
        let mut g = self.lin_z.clone();
        for &(k, w) in &self.terms {
            let (bi, pi, b, p) = self.user_point(&x, k);
            if b <= 0.0 {
                continue;
            }
            let r = rate_point(b, p, self.model.snr_scale[k]);
            g.axpy(w * r.d_b, &sp.rows[bi], 1.0);
            g.axpy(w * r.d_p, &sp.rows[pi], 1.0);
        }
        g
    }

    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        self.add_hessian(z, 1.0, &mut h);
        h
    }

    fn add_hessian(&self, z: &DVector<f64>, weight: f64, acc: &mut DMatrix<f64>) {
        let x = self.model.space.full(z);
        let sp = &self.model.space;
        for &(k, w) in &self.terms {
            let (bi, pi, b, p) = self.user_point(&x, k);
            if b <= 0.0 {
                continue;
            }
            let r = rate_point(b, p, self.model.snr_scale[k]);
            let v = &sp.rows[bi] * (-r.u) + &sp.rows[pi] * r.c;
            acc.ger(-weight * w * r.kappa, &v, &v, 1.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    BandwidthNonneg(usize),
    PowerNonneg(usize),
    BandwidthBudget,
    PowerBudget,
    SystemGee,
    SystemTp,
    SliceSee(usize),
    SliceTp(usize),
    SliceBandwidthCap(usize),
    SlicePowerCap(usize),
    UserEe(usize),
    UserRate(usize),
    /// `TP >= t`, added by the throughput-constrained power minimization.
    ThroughputFloor,
}

impl ConstraintKind {
    /// Constraint family, for grouping in reports.
    pub fn family(self) -> &'static str {
        use ConstraintKind::*;
        match self {
            BandwidthNonneg(_) | PowerNonneg(_) => "nonnegativity",
            BandwidthBudget | PowerBudget => "system-budget",
            SystemGee | SystemTp => "system-qos",
            SliceSee(_) | SliceTp(_) => "slice-qos",
            SliceBandwidthCap(_) | SlicePowerCap(_) => "slice-cap",
            UserEe(_) | UserRate(_) => "user-qos",
            ThroughputFloor => "throughput-floor",
        }
    }

    /// Unit of the constraint value.
    pub fn unit(self) -> &'static str {
        use ConstraintKind::*;
        match self {
            BandwidthNonneg(_) | BandwidthBudget | SliceBandwidthCap(_) => "Hz",
            PowerNonneg(_) | PowerBudget | SlicePowerCap(_) => "W",
            SystemGee | SliceSee(_) | UserEe(_) => "bit/s",
            SystemTp | SliceTp(_) | UserRate(_) | ThroughputFloor => "bit/s",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ConstraintKind::*;
        match self {
            BandwidthNonneg(i) => write!(f, "b_{} >= 0", i + 1),
            PowerNonneg(k) => write!(f, "p_{} >= 0", k + 1),
            BandwidthBudget => f.write_str("sum b <= B"),
            PowerBudget => f.write_str("sum p <= P"),
            SystemGee => f.write_str("GEE >= GEE*"),
            SystemTp => f.write_str("TP >= TP*"),
            SliceSee(i) => write!(f, "SEE_{0} >= SEE_{0}*", i + 1),
            SliceTp(i) => write!(f, "TP_{0} >= TP_{0}*", i + 1),
            SliceBandwidthCap(i) => write!(f, "b_{0} <= B_{0}", i + 1),
            SlicePowerCap(i) => write!(f, "sum p in slice {0} <= P_{0}", i + 1),
            UserEe(k) => write!(f, "EE_{0} >= EE_{0}*", k + 1),
            UserRate(k) => write!(f, "R_{0} >= R_{0}*", k + 1),
            ThroughputFloor => f.write_str("TP >= t"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub form: RateForm,
    /// Natural magnitude of the constraint, used to normalize slacks.
    pub scale: f64,
}

/// The model constraints `c_j(x) <= 0` of one reduced problem. Variable
/// lower bounds are kept separately and always enter the barrier.
#[derive(Clone)]
pub struct ConstraintSet {
    model: Arc<ReducedModel>,
    constraints: Vec<Constraint>,
    functions: Vec<SharedFn>,
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSet")
            .field("dim", &self.model.space.dim())
            .field(
                "constraints",
                &self.constraints.iter().map(|c| c.kind).collect::<Vec<_>>(),
            )
            .finish()
    }
}

/// Every model constraint of the scenario in full-vector form, QoS rows with
/// a zero floor omitted.
fn scenario_constraints(model: &ReducedModel) -> Vec<Constraint> {
    let sc = model.scenario();
    let sp = &model.space;
    let n = model.full_dim();
    let nk = sc.num_users();
    let mut out = Vec::new();

    let mut budget_b = RateForm::zero(n, nk);
    for i in 0..sc.num_slices() {
        budget_b.linear[sp.b_index(i)] = 1.0;
    }
    out.push(Constraint {
        kind: ConstraintKind::BandwidthBudget,
        form: budget_b.with_constant(-sc.total_bandwidth),
        scale: sc.total_bandwidth,
    });
    let mut budget_p = RateForm::zero(n, nk);
    for k in 0..nk {
        budget_p.linear[sp.p_index(k)] = 1.0;
    }
    out.push(Constraint {
        kind: ConstraintKind::PowerBudget,
        form: budget_p.with_constant(-sc.total_power),
        scale: sc.total_power,
    });

    let tp_neg = model.throughput_form(-1.0);
    let gee_min = sc.system_qos.gee_min;
    if gee_min > 0.0 {
        let p0 = sc.static_power_total();
        out.push(Constraint {
            kind: ConstraintKind::SystemGee,
            form: model
                .transmit_cost_form(0..nk)
                .with_constant(p0)
                .scaled(gee_min)
                .plus(&tp_neg),
            scale: gee_min * p0,
        });
    }
    let tp_min = sc.system_qos.tp_min;
    if tp_min > 0.0 {
        out.push(Constraint {
            kind: ConstraintKind::SystemTp,
            form: tp_neg.clone().with_constant(tp_min),
            scale: tp_min,
        });
    }

    for (i, slice) in sc.slices.iter().enumerate() {
        let mut weights = vec![0.0; nk];
        for &k in &slice.user_indices {
            weights[k] = -1.0;
        }
        let slice_tp_neg = RateForm::rates(n, weights);
        if slice.see_min > 0.0 {
            let p0 = sc.static_power_slice(i);
            out.push(Constraint {
                kind: ConstraintKind::SliceSee(i),
                form: model
                    .transmit_cost_form(slice.user_indices.iter().copied())
                    .with_constant(p0)
                    .scaled(slice.see_min)
                    .plus(&slice_tp_neg),
                scale: slice.see_min * p0,
            });
        }
        if slice.tp_min > 0.0 {
            out.push(Constraint {
                kind: ConstraintKind::SliceTp(i),
                form: slice_tp_neg.clone().with_constant(slice.tp_min),
                scale: slice.tp_min,
            });
        }
        let mut cap_b = RateForm::zero(n, nk);
        cap_b.linear[sp.b_index(i)] = 1.0;
        out.push(Constraint {
            kind: ConstraintKind::SliceBandwidthCap(i),
            form: cap_b.with_constant(-slice.bandwidth_cap),
            scale: slice.bandwidth_cap,
        });
        let mut cap_p = RateForm::zero(n, nk);
        for &k in &slice.user_indices {
            cap_p.linear[sp.p_index(k)] = 1.0;
        }
        out.push(Constraint {
            kind: ConstraintKind::SlicePowerCap(i),
            form: cap_p.with_constant(-slice.power_cap),
            scale: slice.power_cap,
        });
    }

    for (k, user) in sc.users.iter().enumerate() {
        let mut weights = vec![0.0; nk];
        weights[k] = -1.0;
        let rate_neg = RateForm::rates(n, weights);
        if user.ee_min > 0.0 {
            out.push(Constraint {
                kind: ConstraintKind::UserEe(k),
                form: model
                    .transmit_cost_form([k])
                    .with_constant(user.static_power)
                    .scaled(user.ee_min)
                    .plus(&rate_neg),
                scale: user.ee_min * user.static_power,
            });
        }
        if user.rate_min > 0.0 {
            out.push(Constraint {
                kind: ConstraintKind::UserRate(k),
                form: rate_neg.with_constant(user.rate_min),
                scale: user.rate_min,
            });
        }
    }
    out
}

impl ConstraintSet {
    /// Builds the constraint set of a reduced problem. Constraints that do
    /// not depend on any reduced variable are checked once and dropped.
    pub fn build(model: Arc<ReducedModel>) -> Result<Self, FeasibleError> {
        let mut set = Self {
            model: model.clone(),
            constraints: Vec::new(),
            functions: Vec::new(),
        };
        let zero = DVector::zeros(model.space.dim());
        for c in scenario_constraints(&model) {
            if model.depends_on_variables(&c.form) {
                set.push(c);
            } else {
                let value = model.function(c.form.clone()).value(&zero);
                if value > DEFAULT_FEASIBILITY_TOL * c.scale.max(1.0) {
                    return Err(FeasibleError::FixedConstraintViolated {
                        constraint: c.kind,
                        value,
                    });
                }
            }
        }
        Ok(set)
    }

    pub fn push(&mut self, c: Constraint) {
        self.functions.push(self.model.function(c.form.clone()));
        self.constraints.push(c);
    }

    /// Copy with one more constraint.
    pub fn with(&self, c: Constraint) -> Self {
        let mut out = self.clone();
        out.push(c);
        out
    }

    pub fn model(&self) -> &Arc<ReducedModel> {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Model constraints as solver oracles.
    pub fn functions(&self) -> &[SharedFn] {
        &self.functions
    }

    /// `lower_j - z_j <= 0` for every reduced variable.
    pub fn bound_functions(&self) -> Vec<SharedFn> {
        let n = self.model.space.dim();
        self.model
            .space
            .lower
            .iter()
            .enumerate()
            .map(|(j, &lb)| Arc::new(LinearFunction::lower_bound(n, j, lb)) as SharedFn)
            .collect()
    }

    /// Model constraints followed by variable bounds.
    pub fn barrier_functions(&self) -> Vec<SharedFn> {
        let mut all = self.functions.clone();
        all.extend(self.bound_functions());
        all
    }

    pub fn values(&self, z: &DVector<f64>) -> Vec<f64> {
        self.functions.iter().map(|f| f.value(z)).collect()
    }

    /// True when every constraint has normalized slack of at least
    /// `margin` and every bound holds strictly.
    pub fn has_slack(&self, z: &DVector<f64>, margin: f64) -> bool {
        let bounds_ok = z.iter().zip(self.model.space.lower.iter()).all(|(v, lb)| v > lb);
        bounds_ok
            && self
                .functions
                .iter()
                .zip(&self.constraints)
                .all(|(f, c)| f.value(z) <= -margin * c.scale)
    }

    /// Strictly feasible reduced point: the uniform point when it already
    /// has enough slack, otherwise the solution of the phase-I program
    /// `min s s.t. c_j(z) / scale_j <= s`.
    pub fn strictly_feasible_point(&self, opts: &SolverOptions) -> Result<ReducedVariables, FeasibleError> {
        let start = self.model.space.uniform_point(self.model.scenario());
        if self.has_slack(&start.0, 0.5 * STRICTNESS_MARGIN) {
            return Ok(start);
        }
        let (z, certificate) = self.phase1(&start.0, opts)?;
        if certificate < -STRICTNESS_MARGIN {
            Ok(ReducedVariables(z))
        } else {
            Err(FeasibleError::Infeasible { certificate })
        }
    }

    /// Solves the phase-I program from `start` and returns its minimizer
    /// and optimal value.
    pub fn phase1(&self, start: &DVector<f64>, opts: &SolverOptions) -> Result<(DVector<f64>, f64), FeasibleError> {
        let n = start.len();
        let mut cuts: Vec<SharedFn> = self
            .functions
            .iter()
            .zip(&self.constraints)
            .map(|(f, c)| {
                Arc::new(solver::ShiftedByLast {
                    inner: f.clone(),
                    factor: 1.0 / c.scale,
                    last_coeff: -1.0,
                }) as SharedFn
            })
            .collect();
        cuts.extend(self.bound_functions().into_iter().map(solver::lift));
        let worst = self
            .functions
            .iter()
            .zip(&self.constraints)
            .map(|(f, c)| f.value(start) / c.scale)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut y0 = DVector::zeros(n + 1);
        y0.rows_mut(0, n).copy_from(start);
        y0[n] = worst.max(-1.0) + 1.0;
        let mut coeffs = DVector::zeros(n + 1);
        coeffs[n] = 1.0;
        let program = ConvexProgram {
            objective: Arc::new(LinearFunction::new(coeffs, 0.0)),
            constraints: cuts,
            x0: y0,
        };
        let sol = solver::solve(&program, opts)?.ensure_optimal()?;
        let z = sol.x.rows(0, n).into_owned();
        Ok((z, sol.x[n]))
    }
}

/// Constraint set of a regime in its reduced variables.
pub fn build_constraints(instance: &Arc<Instance>, regime: &RegimeSpec) -> Result<ConstraintSet, FeasibleError> {
    let space = ReducedSpace::for_regime(&instance.scenario, regime)?;
    ConstraintSet::build(ReducedModel::new(instance.clone(), space))
}

/// Strictly feasible reduced point of a regime, or a certificate that the
/// QoS constraints cannot be met in it.
pub fn phase1_point(instance: &Arc<Instance>, regime: &RegimeSpec) -> Result<ReducedVariables, FeasibleError> {
    build_constraints(instance, regime)?.strictly_feasible_point(&SolverOptions::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintValue {
    pub kind: ConstraintKind,
    /// Constraint function value; positive means violated by that amount.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub tol: f64,
    pub entries: Vec<ConstraintValue>,
}

impl FeasibilityReport {
    pub fn violations(&self) -> impl Iterator<Item = &ConstraintValue> {
        self.entries.iter().filter(move |e| e.value > self.tol)
    }

    pub fn is_feasible(&self) -> bool {
        self.violations().next().is_none()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let flag = if e.value > self.tol { "VIOLATED" } else { "ok" };
            writeln!(
                f,
                "{:<28} {:>16.9e} {:<6} {}",
                e.kind.to_string(),
                e.value,
                e.kind.unit(),
                flag
            )?;
        }
        Ok(())
    }
}

/// Evaluates every constraint at a full allocation, using the model metrics
/// directly. Constraint values are in multiplied-out form, so the tolerance
/// is absolute in the units reported by [`ConstraintKind::unit`].
pub fn check_feasibility(instance: &Instance, alloc: &Allocation, tol: f64) -> FeasibilityReport {
    let sc = &instance.scenario;
    let mut entries = Vec::new();
    let mut push = |kind, value| entries.push(ConstraintValue { kind, value });
    for (i, &b) in alloc.bandwidths.iter().enumerate() {
        push(ConstraintKind::BandwidthNonneg(i), -b);
    }
    for (k, &p) in alloc.powers.iter().enumerate() {
        push(ConstraintKind::PowerNonneg(k), -p);
    }
    push(
        ConstraintKind::BandwidthBudget,
        alloc.bandwidths.iter().sum::<f64>() - sc.total_bandwidth,
    );
    push(
        ConstraintKind::PowerBudget,
        alloc.powers.iter().sum::<f64>() - sc.total_power,
    );
    let tp = instance.tp(alloc);
    if sc.system_qos.gee_min > 0.0 {
        push(
            ConstraintKind::SystemGee,
            sc.system_qos.gee_min * instance.consumed_power(alloc) - tp,
        );
    }
    if sc.system_qos.tp_min > 0.0 {
        push(ConstraintKind::SystemTp, sc.system_qos.tp_min - tp);
    }
    for (i, slice) in sc.slices.iter().enumerate() {
        let tp_i = instance.tp_slice(alloc, i);
        if slice.see_min > 0.0 {
            let power = sc.static_power_slice(i) + instance.transmit_cost(alloc, slice.user_indices.iter().copied());
            push(ConstraintKind::SliceSee(i), slice.see_min * power - tp_i);
        }
        if slice.tp_min > 0.0 {
            push(ConstraintKind::SliceTp(i), slice.tp_min - tp_i);
        }
        push(
            ConstraintKind::SliceBandwidthCap(i),
            alloc.bandwidths[i] - slice.bandwidth_cap,
        );
        push(
            ConstraintKind::SlicePowerCap(i),
            slice.user_indices.iter().map(|&k| alloc.powers[k]).sum::<f64>() - slice.power_cap,
        );
    }
    for (k, user) in sc.users.iter().enumerate() {
        let r = instance.user_rate(alloc, k);
        if user.ee_min > 0.0 {
            push(
                ConstraintKind::UserEe(k),
                user.ee_min * (user.static_power + user.pa_inefficiency * alloc.powers[k]) - r,
            );
        }
        if user.rate_min > 0.0 {
            push(ConstraintKind::UserRate(k), user.rate_min - r);
        }
    }
    FeasibilityReport { tol, entries }
}
