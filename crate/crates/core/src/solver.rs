//! Log-barrier interior-point solver with damped Newton centering.
//!
//! Every program is stated as `minimize f(x) s.t. c_j(x) <= 0` with convex,
//! twice differentiable `f` and `c_j` and a strictly feasible start. The
//! barrier weight starts at `t0` and grows by `mu` until the duality-gap
//! estimate `m / t` falls below the tolerance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A twice differentiable scalar function on `R^n`.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// `acc += weight * hessian(x)`. Implementors with structured Hessians
    /// override this to skip the dense temporary.
    fn add_hessian(&self, x: &DVector<f64>, weight: f64, acc: &mut DMatrix<f64>) {
        *acc += self.hessian(x) * weight;
    }
}

pub type SharedFn = Arc<dyn SmoothFunction>;

/// `a^T x + b`.
#[derive(Debug, Clone)]
pub struct LinearFunction {
    pub coeffs: DVector<f64>,
    pub constant: f64,
}

impl LinearFunction {
    pub fn new(coeffs: DVector<f64>, constant: f64) -> Self {
        Self { coeffs, constant }
    }

    /// `-x_index + bound`, i.e. the constraint `x_index >= bound`.
    pub fn lower_bound(dim: usize, index: usize, bound: f64) -> Self {
        let mut coeffs = DVector::zeros(dim);
        coeffs[index] = -1.0;
        Self::new(coeffs, bound)
    }
}

impl SmoothFunction for LinearFunction {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.coeffs.dot(x) + self.constant
    }
    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.coeffs.clone()
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.coeffs.len();
        DMatrix::zeros(n, n)
    }
    fn add_hessian(&self, _x: &DVector<f64>, _weight: f64, _acc: &mut DMatrix<f64>) {}
}

#[derive(Clone)]
pub struct ConvexProgram {
    pub objective: SharedFn,
    pub constraints: Vec<SharedFn>,
    pub x0: DVector<f64>,
}

impl std::fmt::Debug for ConvexProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexProgram")
            .field("dim", &self.x0.len())
            .field("constraints", &self.constraints.len())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Target for `m / t` plus the centering residual.
    pub tol: f64,
    pub t0: f64,
    pub mu: f64,
    pub armijo_alpha: f64,
    pub backtrack_beta: f64,
    /// Centering stops once `decrement^2 / 2` drops below this.
    pub newton_tol: f64,
    pub max_newton_per_center: usize,
    pub max_newton_total: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            t0: 1.0,
            mu: 10.0,
            armijo_alpha: 0.25,
            backtrack_beta: 0.5,
            newton_tol: 1e-10,
            max_newton_per_center: 200,
            max_newton_total: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    /// `m / t` at the last centered point.
    pub duality_gap: f64,
    pub barrier_outer_iters: usize,
    pub newton_total_iters: usize,
    pub status: SolveStatus,
    /// True objective after each outer iteration.
    pub objective_path: Vec<f64>,
}

impl Solution {
    pub fn ensure_optimal(self) -> Result<Self, SolverError> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::MaxIter => Err(SolverError::MaxIter {
                newton_iters: self.newton_total_iters,
            }),
            SolveStatus::NumericalFailure => Err(SolverError::NumericalFailure {
                newton_iters: self.newton_total_iters,
            }),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("start point is not strictly feasible: constraint {index} evaluates to {value:e}")]
    InfeasibleStart { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("numerical failure after {newton_iters} Newton iterations")]
    NumericalFailure { newton_iters: usize },
    #[error("iteration limit reached after {newton_iters} Newton iterations")]
    MaxIter { newton_iters: usize },
}

/// Looser centering threshold accepted when round-off stalls the line search.
const STALLED_NEWTON_TOL: f64 = 1e-6;

struct Barrier<'a> {
    program: &'a ConvexProgram,
    t: f64,
}

impl Barrier<'_> {
    /// Constraint values, or `None` outside the strict interior.
    fn slacks(&self, x: &DVector<f64>) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.program.constraints.len());
        for c in &self.program.constraints {
            let v = c.value(x);
            if !(v < 0.0) {
                return None;
            }
            out.push(v);
        }
        Some(out)
    }

    /// Barrier value together with a magnitude used to size round-off slack.
    fn value(&self, x: &DVector<f64>) -> Option<(f64, f64)> {
        let cs = self.slacks(x)?;
        let f = self.program.objective.value(x);
        if !f.is_finite() {
            return None;
        }
        let mut phi = self.t * f;
        let mut scale = phi.abs();
        for c in cs {
            let l = (-c).ln();
            phi -= l;
            scale += l.abs();
        }
        Some((phi, scale))
    }

    /// Directional derivative of the barrier at `x` along `dx`.
    fn slope(&self, x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
        let mut d = self.t * self.program.objective.gradient(x).dot(dx);
        for c in &self.program.constraints {
            d -= c.gradient(x).dot(dx) / c.value(x);
        }
        d
    }

    fn newton_system(&self, x: &DVector<f64>, cs: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let obj = &self.program.objective;
        let mut g = obj.gradient(x) * self.t;
        let mut h = DMatrix::zeros(x.len(), x.len());
        obj.add_hessian(x, self.t, &mut h);
        for (c, &v) in self.program.constraints.iter().zip(cs) {
            let d = -1.0 / v;
            let gc = c.gradient(x);
            g.axpy(d, &gc, 1.0);
            h.ger(d * d, &gc, &gc, 1.0);
            c.add_hessian(x, d, &mut h);
        }
        (g, h)
    }
}

fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    // Symmetric diagonal equilibration: near-active bounds put entries of
    // order 1/slack^2 on the diagonal.
    let n = h.nrows();
    let d = DVector::from_iterator(
        n,
        h.diagonal().iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }),
    );
    let mut hs = h.clone();
    for j in 0..n {
        for i in 0..n {
            hs[(i, j)] *= d[i] * d[j];
        }
    }
    let gs = g.component_mul(&d);
    let unscale = |y: DVector<f64>| -y.component_mul(&d);
    if let Some(ch) = hs.clone().cholesky() {
        return Some(unscale(ch.solve(&gs)));
    }
    let mut tau = 1e-12;
    for _ in 0..12 {
        let mut reg = hs.clone();
        for i in 0..n {
            reg[(i, i)] += tau;
        }
        if let Some(ch) = reg.cholesky() {
            return Some(unscale(ch.solve(&gs)));
        }
        tau *= 100.0;
    }
    None
}

enum CenterFailure {
    Numerical,
    MaxIter,
}

/// Newton centering for the current barrier weight. Returns the final
/// decrement squared.
fn center(
    barrier: &Barrier<'_>,
    x: &mut DVector<f64>,
    opts: &SolverOptions,
    newton_total: &mut usize,
) -> Result<f64, CenterFailure> {
    let mut iters = 0;
    loop {
        let cs = barrier.slacks(x).ok_or(CenterFailure::Numerical)?;
        let (g, h) = barrier.newton_system(x, &cs);
        let dx = newton_step(&h, &g).ok_or(CenterFailure::Numerical)?;
        let dec2 = -g.dot(&dx);
        if !dec2.is_finite() {
            return Err(CenterFailure::Numerical);
        }
        if dec2 / 2.0 <= opts.newton_tol {
            return Ok(dec2.max(0.0));
        }
        if iters >= opts.max_newton_per_center || *newton_total >= opts.max_newton_total {
            return Err(CenterFailure::MaxIter);
        }

        let (phi0, scale) = barrier.value(x).ok_or(CenterFailure::Numerical)?;
        let slack = 64.0 * f64::EPSILON * (scale + 1.0);
        // Backtracking along `dir` with predicted decrease `pred` per unit
        // step. Returns the trial point, whether the barrier value dropped,
        // and the step length.
        let search = |dir: &DVector<f64>, pred: f64| {
            let mut step = 1.0;
            while step > 1e-14 {
                let trial = &*x + dir * step;
                if let Some((phi, _)) = barrier.value(&trial) {
                    if phi <= phi0 - opts.armijo_alpha * step * pred + slack {
                        return Some((trial, phi < phi0, step));
                    }
                    // Barrier values lose precision near active constraints
                    // long before slopes do. The barrier is convex along
                    // dir, so a nonpositive slope at the trial point implies
                    // descent.
                    if barrier.slope(&trial, dir) <= 0.0 {
                        return Some((trial, phi < phi0, step));
                    }
                }
                step *= opts.backtrack_beta;
            }
            None
        };
        // A predicted decrease below the round-off in the barrier value
        // cannot be verified either.
        let stalled = dec2 / 2.0 <= STALLED_NEWTON_TOL.max(slack);
        let mut accepted = search(&dx, dec2);
        if accepted.is_none() && !stalled {
            // An ill-conditioned system can return a useless direction; fall
            // back to the diagonally scaled gradient.
            let dg = DVector::from_iterator(
                g.len(),
                g.iter()
                    .zip(h.diagonal().iter())
                    .map(|(&gi, &hii)| if hii > 0.0 { -gi / hii } else { -gi }),
            );
            accepted = search(&dg, -g.dot(&dg));
        }
        // Near the centre Newton takes full steps; a damped step or one
        // without a measurable decrease means round-off has stalled it.
        match accepted {
            Some((_, false, _)) if stalled => return Ok(dec2),
            Some((trial, _, step)) if stalled && step < 1.0 => {
                *x = trial;
                *newton_total += 1;
                return Ok(dec2);
            }
            Some((trial, _, _)) => {
                *x = trial;
                iters += 1;
                *newton_total += 1;
            }
            None if stalled => return Ok(dec2),
            None => return Err(CenterFailure::Numerical),
        }
    }
}

pub fn solve(program: &ConvexProgram, opts: &SolverOptions) -> Result<Solution, SolverError> {
    let n = program.x0.len();
    for f in std::iter::once(&program.objective).chain(&program.constraints) {
        if f.dim() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: f.dim(),
            });
        }
    }
    for (index, c) in program.constraints.iter().enumerate() {
        let value = c.value(&program.x0);
        if !(value < 0.0) {
            return Err(SolverError::InfeasibleStart { index, value });
        }
    }

    let m = program.constraints.len() as f64;
    let mut x = program.x0.clone();
    let mut t = opts.t0;
    let mut newton_total = 0;
    let mut outer = 0;
    let mut path = Vec::new();

    let finish = |x: DVector<f64>, status, residual, gap, outer, newton_total, path: Vec<f64>| Solution {
        objective: program.objective.value(&x),
        x,
        kkt_residual: residual,
        duality_gap: gap,
        barrier_outer_iters: outer,
        newton_total_iters: newton_total,
        status,
        objective_path: path,
    };

    loop {
        outer += 1;
        let barrier = Barrier { program, t };
        let dec2 = match center(&barrier, &mut x, opts, &mut newton_total) {
            Ok(d) => d,
            Err(fail) => {
                let status = match fail {
                    CenterFailure::Numerical => SolveStatus::NumericalFailure,
                    CenterFailure::MaxIter => SolveStatus::MaxIter,
                };
                log::debug!("barrier solve stopped at t = {t:e}: {status:?}");
                return Ok(finish(x, status, f64::INFINITY, m / t, outer, newton_total, path));
            }
        };
        path.push(program.objective.value(&x));
        let gap = m / t;
        let residual = gap + dec2 / (2.0 * t);
        if residual <= opts.tol {
            return Ok(finish(
                x,
                SolveStatus::Optimal,
                residual,
                gap,
                outer,
                newton_total,
                path,
            ));
        }
        if newton_total >= opts.max_newton_total {
            return Ok(finish(
                x,
                SolveStatus::MaxIter,
                residual,
                gap,
                outer,
                newton_total,
                path,
            ));
        }
        t *= opts.mu;
    }
}

/// `inner(x[..n])` for a vector with trailing extra coordinates.
struct Lifted {
    inner: SharedFn,
    dim: usize,
}

impl SmoothFunction for Lifted {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner.value(&x.rows(0, self.inner.dim()).into_owned())
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.inner.dim();
        let mut g = DVector::zeros(self.dim);
        g.rows_mut(0, n)
            .copy_from(&self.inner.gradient(&x.rows(0, n).into_owned()));
        g
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        self.add_hessian(x, 1.0, &mut h);
        h
    }
    fn add_hessian(&self, x: &DVector<f64>, weight: f64, acc: &mut DMatrix<f64>) {
        let n = self.inner.dim();
        let mut block = acc.view_mut((0, 0), (n, n)).into_owned();
        self.inner.add_hessian(&x.rows(0, n).into_owned(), weight, &mut block);
        acc.view_mut((0, 0), (n, n)).copy_from(&block);
    }
}

/// `factor * inner(x) + last_coeff * s` where `s` is the trailing coordinate.
pub(crate) struct ShiftedByLast {
    pub inner: SharedFn,
    /// Multiplier applied to `inner`.
    pub factor: f64,
    /// Multiplier applied to the last coordinate.
    pub last_coeff: f64,
}

impl SmoothFunction for ShiftedByLast {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let n = self.inner.dim();
        self.factor * self.inner.value(&x.rows(0, n).into_owned()) + self.last_coeff * x[n]
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.inner.dim();
        let mut g = DVector::zeros(n + 1);
        g.rows_mut(0, n)
            .copy_from(&(self.inner.gradient(&x.rows(0, n).into_owned()) * self.factor));
        g[n] = self.last_coeff;
        g
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim(), self.dim());
        self.add_hessian(x, 1.0, &mut h);
        h
    }
    fn add_hessian(&self, x: &DVector<f64>, weight: f64, acc: &mut DMatrix<f64>) {
        let n = self.inner.dim();
        let mut block = acc.view_mut((0, 0), (n, n)).into_owned();
        self.inner
            .add_hessian(&x.rows(0, n).into_owned(), weight * self.factor, &mut block);
        acc.view_mut((0, 0), (n, n)).copy_from(&block);
    }
}

pub(crate) fn lift(inner: SharedFn) -> SharedFn {
    let dim = inner.dim() + 1;
    Arc::new(Lifted { inner, dim })
}

#[derive(Debug, Clone)]
pub struct EpigraphSolution {
    pub x: DVector<f64>,
    /// `min_j piece_j(x)` at the returned point.
    pub value: f64,
    pub solution: Solution,
}

/// Maximizes `min_j piece_j(x)` over `{x : c(x) <= 0}` for concave pieces,
/// through the epigraph program `max s s.t. s <= piece_j(x)`.
pub fn epigraph_max_min(
    pieces: &[SharedFn],
    constraints: &[SharedFn],
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<EpigraphSolution, SolverError> {
    assert!(!pieces.is_empty(), "epigraph_max_min needs at least one piece");
    let n = x0.len();
    let min_piece = |x: &DVector<f64>| pieces.iter().map(|p| p.value(x)).fold(f64::INFINITY, f64::min);
    let start_min = min_piece(x0);
    if !start_min.is_finite() {
        return Err(SolverError::NumericalFailure { newton_iters: 0 });
    }
    let mut y0 = DVector::zeros(n + 1);
    y0.rows_mut(0, n).copy_from(x0);
    y0[n] = start_min - (1.0 + 0.1 * start_min.abs());

    let mut lifted: Vec<SharedFn> = constraints.iter().cloned().map(lift).collect();
    for p in pieces {
        lifted.push(Arc::new(ShiftedByLast {
            inner: p.clone(),
            factor: -1.0,
            last_coeff: 1.0,
        }));
    }
    let mut coeffs = DVector::zeros(n + 1);
    coeffs[n] = -1.0;
    let program = ConvexProgram {
        objective: Arc::new(LinearFunction::new(coeffs, 0.0)),
        constraints: lifted,
        x0: y0,
    };
    let solution = solve(&program, opts)?.ensure_optimal()?;
    let x = solution.x.rows(0, n).into_owned();
    let value = min_piece(&x);
    Ok(EpigraphSolution { x, value, solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `0.5 x^T Q x + q^T x`.
    struct Quadratic {
        q_mat: DMatrix<f64>,
        q_vec: DVector<f64>,
    }

    impl SmoothFunction for Quadratic {
        fn dim(&self) -> usize {
            self.q_vec.len()
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            0.5 * x.dot(&(&self.q_mat * x)) + self.q_vec.dot(x)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            &self.q_mat * x + &self.q_vec
        }
        fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            self.q_mat.clone()
        }
    }

    /// `-w x log2(1 + 1/x)`, convex for `x > 0`.
    struct NegPerspective;

    impl SmoothFunction for NegPerspective {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            -x[0] * (1.0 / x[0]).ln_1p() / std::f64::consts::LN_2
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            let v = x[0];
            let d = (1.0 / v).ln_1p() - 1.0 / (v + 1.0);
            DVector::from_element(1, -d / std::f64::consts::LN_2)
        }
        fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            let v = x[0];
            // d/dv [ln(1+1/v) - 1/(v+1)] = -1/(v(v+1)) + 1/(v+1)^2 = -1/(v (v+1)^2)
            let h = 1.0 / (v * (v + 1.0) * (v + 1.0));
            DMatrix::from_element(1, 1, h / std::f64::consts::LN_2)
        }
    }

    fn linear(coeffs: &[f64], constant: f64) -> SharedFn {
        Arc::new(LinearFunction::new(DVector::from_column_slice(coeffs), constant))
    }

    #[test]
    fn quadratic_with_lower_bound() {
        let program = ConvexProgram {
            objective: Arc::new(Quadratic {
                q_mat: DMatrix::from_element(1, 1, 2.0),
                q_vec: DVector::zeros(1),
            }),
            constraints: vec![linear(&[-1.0], 1.0)],
            x0: DVector::from_element(1, 2.0),
        };
        let sol = solve(&program, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn monotone_perspective_pins_upper_cap() {
        let program = ConvexProgram {
            objective: Arc::new(NegPerspective),
            constraints: vec![linear(&[-1.0], 0.1), linear(&[1.0], -10.0)],
            x0: DVector::from_element(1, 1.0),
        };
        let sol = solve(&program, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 10.0).abs() < 1e-6, "x = {}", sol.x[0]);
    }

    #[test]
    fn rejects_infeasible_start() {
        let program = ConvexProgram {
            objective: linear(&[1.0], 0.0),
            constraints: vec![linear(&[-1.0], 1.0)],
            x0: DVector::from_element(1, 0.5),
        };
        assert!(matches!(
            solve(&program, &SolverOptions::default()),
            Err(SolverError::InfeasibleStart { index: 0, .. })
        ));
    }

    /// Box-constrained QP with a planted solution: strictly complementary
    /// multipliers on the active bounds make the optimum unique and known.
    fn planted_box_qp(seed: u64) -> (Quadratic, DVector<f64>, DVector<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 5;
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q_mat = a.transpose() * &a + DMatrix::identity(n, n) * 0.5;
        let lo = DVector::from_element(n, -1.0);
        let hi = DVector::from_element(n, 1.0);
        let mut x_star = DVector::zeros(n);
        let mut mult = DVector::zeros(n); // positive: upper active, negative: lower active
        for i in 0..n {
            match i % 3 {
                0 => {
                    x_star[i] = hi[i];
                    mult[i] = rng.gen_range(0.5..2.0);
                }
                1 => {
                    x_star[i] = lo[i];
                    mult[i] = -rng.gen_range(0.5..2.0);
                }
                _ => x_star[i] = rng.gen_range(-0.5..0.5),
            }
        }
        // Stationarity: Q x* + q + mult = 0.
        let q_vec = -(&q_mat * &x_star) - &mult;
        (Quadratic { q_mat, q_vec }, lo, hi, x_star)
    }

    fn projected_gradient(qp: &Quadratic, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
        let lmax = qp.q_mat.clone().symmetric_eigen().eigenvalues.max();
        let step = 1.0 / lmax;
        let mut x = DVector::zeros(qp.dim());
        for _ in 0..200_000 {
            let g = qp.gradient(&x);
            let next = (&x - g * step).zip_zip_map(lo, hi, |v, l, h| v.clamp(l, h));
            let moved = (&next - &x).amax();
            x = next;
            if moved < 1e-15 {
                break;
            }
        }
        x
    }

    #[test]
    fn box_qp_matches_projected_gradient() {
        for seed in 0..4 {
            let (qp, lo, hi, x_star) = planted_box_qp(seed);
            let oracle = projected_gradient(&qp, &lo, &hi);
            assert!((&oracle - &x_star).amax() < 1e-9);

            let n = qp.dim();
            let mut constraints: Vec<SharedFn> = Vec::new();
            for i in 0..n {
                constraints.push(Arc::new(LinearFunction::lower_bound(n, i, lo[i])));
                let mut c = DVector::zeros(n);
                c[i] = 1.0;
                constraints.push(Arc::new(LinearFunction::new(c, -hi[i])));
            }
            let program = ConvexProgram {
                objective: Arc::new(qp),
                constraints,
                x0: DVector::zeros(n),
            };
            let opts = SolverOptions {
                tol: 1e-10,
                ..Default::default()
            };
            let sol = solve(&program, &opts).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            let err = (&sol.x - &oracle).amax();
            assert!(err < 1e-8, "seed {seed}: max deviation {err:e}");
        }
    }

    #[test]
    fn barrier_path_objective_is_nonincreasing() {
        for seed in 0..4 {
            let (qp, lo, hi, _) = planted_box_qp(seed + 10);
            let n = qp.dim();
            let mut constraints: Vec<SharedFn> = Vec::new();
            for i in 0..n {
                constraints.push(Arc::new(LinearFunction::lower_bound(n, i, lo[i])));
                let mut c = DVector::zeros(n);
                c[i] = 1.0;
                constraints.push(Arc::new(LinearFunction::new(c, -hi[i])));
            }
            let program = ConvexProgram {
                objective: Arc::new(qp),
                constraints,
                x0: DVector::zeros(n),
            };
            let sol = solve(&program, &SolverOptions::default()).unwrap();
            for w in sol.objective_path.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{:?}", sol.objective_path);
            }
        }
    }

    #[test]
    fn epigraph_symmetric_crossing() {
        // pieces x and 2 - x on [0, 2]
        let pieces = vec![linear(&[1.0], 0.0), linear(&[-1.0], 2.0)];
        let constraints = vec![linear(&[-1.0], 0.0), linear(&[1.0], -2.0)];
        let sol = epigraph_max_min(
            &pieces,
            &constraints,
            &DVector::from_element(1, 0.3),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
        assert!((sol.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn epigraph_single_and_duplicate_pieces_agree() {
        let concave: SharedFn = Arc::new(NegPerspectiveNeg);
        let constraints = vec![linear(&[-1.0], 0.1), linear(&[1.0], -10.0)];
        let x0 = DVector::from_element(1, 1.0);
        let one = epigraph_max_min(&[concave.clone()], &constraints, &x0, &SolverOptions::default()).unwrap();
        let two = epigraph_max_min(
            &[concave.clone(), concave],
            &constraints,
            &x0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((one.x[0] - 10.0).abs() < 1e-6);
        assert_relative_eq!(one.value, two.value, epsilon = 1e-7);
        assert_relative_eq!(one.value, 10.0 * 1.1f64.log2(), epsilon = 1e-7);
    }

    /// `x log2(1 + 1/x)`, concave.
    struct NegPerspectiveNeg;

    impl SmoothFunction for NegPerspectiveNeg {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &DVector<f64>) -> f64 {
            -NegPerspective.value(x)
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            -NegPerspective.gradient(x)
        }
        fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            -NegPerspective.hessian(x)
        }
    }
}
