use std::time::Instant;

use nalgebra::DVector;

use super::problem::RegimeProblem;
use super::{check_alpha, Diagnostics, Method, ParetoError, ParetoPoint, PointOutcome, Sweep};
use crate::feasible::RateForm;
use crate::par::{self, Execution};
use crate::solver::{self, ConvexProgram, SharedFn};

/// How `lambda^j` is computed from the previous iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaUpdate {
    /// `min{GEE/alpha, TP/(1-alpha)}`, the ratios of the max-min program.
    #[default]
    Scaled,
    /// `min{GEE, TP}` without the ray scaling. Its fixed point is not a root
    /// of `F`, so it only terminates where the scaling is immaterial.
    Literal,
}

/// Shape of the pieces maximized at each Dinkelbach iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerForm {
    /// `(N_i - lambda D_i) / D_i(previous iterate)`. Same root and stopping
    /// rule as the plain form, with superlinear instead of linear
    /// convergence when the denominators differ widely.
    #[default]
    Normalized,
    /// `N_i - lambda D_i`.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdaOptions {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub lambda_update: LambdaUpdate,
    pub inner_form: InnerForm,
}

impl Default for GdaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 100,
            lambda_update: LambdaUpdate::Scaled,
            inner_form: InnerForm::Normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepOptions {
    pub gda: GdaOptions,
    /// Start each ray from the previous ray's optimum. Forces sequential
    /// execution within the sweep.
    pub warm_start: bool,
    pub execution: Execution,
}

#[derive(Debug, Clone)]
pub struct GdaOutcome {
    pub z: DVector<f64>,
    /// `min{GEE/alpha, TP/(1-alpha)}` at `z`.
    pub t_star: f64,
    pub iterations: usize,
    pub lambdas: Vec<f64>,
    pub f_values: Vec<f64>,
    pub newton_iters: usize,
}

/// `N_i / D_i` ratios of the max-min program for a ray.
struct Ratios {
    alpha: f64,
    /// `(numerator, denominator)` forms.
    forms: Vec<(RateForm, RateForm)>,
}

impl Ratios {
    fn new(problem: &RegimeProblem, alpha: f64) -> Self {
        let model = problem.model();
        let sc = &problem.instance().scenario;
        let n = model.full_dim();
        let k = sc.num_users();
        let one = RateForm::zero(n, k).with_constant(1.0);
        let power = model.transmit_cost_form(0..k).with_constant(sc.static_power_total());
        let mut forms = Vec::new();
        if alpha < 1.0 {
            forms.push((model.throughput_form(1.0 / (1.0 - alpha)), one));
        }
        forms.push((model.throughput_form(1.0 / alpha), power));
        Self { alpha, forms }
    }

    /// Ratio values from the model metrics, in the order of `forms`.
    fn values(&self, problem: &RegimeProblem, z: &DVector<f64>) -> Vec<f64> {
        let m = problem.metrics(z);
        let mut v = Vec::new();
        if self.alpha < 1.0 {
            v.push(m.tp / (1.0 - self.alpha));
        }
        v.push(m.gee / self.alpha);
        v
    }

    /// `min_i (N_i - lambda D_i)` from the model metrics.
    fn f_value(&self, problem: &RegimeProblem, z: &DVector<f64>, lambda: f64) -> f64 {
        let m = problem.metrics(z);
        let mut f = m.tp / self.alpha - lambda * m.consumed_power;
        if self.alpha < 1.0 {
            f = f.min(m.tp / (1.0 - self.alpha) - lambda);
        }
        f
    }

    /// `(N_i - lambda D_i) / w_i`.
    fn pieces(&self, lambda: f64, weights: &[f64]) -> Vec<RateForm> {
        self.forms
            .iter()
            .zip(weights)
            .map(|((num, den), w)| num.clone().plus(&den.clone().scaled(-lambda)).scaled(1.0 / w))
            .collect()
    }

    /// Denominator values at `z`.
    fn denominators(&self, problem: &RegimeProblem, z: &DVector<f64>) -> Vec<f64> {
        let pc = problem.metrics(z).consumed_power;
        if self.alpha < 1.0 {
            vec![1.0, pc]
        } else {
            vec![pc]
        }
    }
}

fn literal_lambda(problem: &RegimeProblem, z: &DVector<f64>) -> f64 {
    let m = problem.metrics(z);
    m.gee.min(m.tp)
}

impl RegimeProblem {
    /// Generalized Dinkelbach iteration for the ray `(alpha, 1 - alpha)`,
    /// started from `warm` when given (which must be feasible).
    pub fn gda(&self, alpha: f64, opts: &GdaOptions, warm: Option<&DVector<f64>>) -> Result<GdaOutcome, ParetoError> {
        check_alpha(alpha)?;
        if alpha == 0.0 {
            let max = self.max_throughput()?;
            return Ok(GdaOutcome {
                z: max.z.clone(),
                t_star: max.tp,
                iterations: 0,
                lambdas: Vec::new(),
                f_values: Vec::new(),
                newton_iters: max.newton_iters,
            });
        }
        let ratios = Ratios::new(self, alpha);
        let lambda_of = |z: &DVector<f64>| match opts.lambda_update {
            LambdaUpdate::Scaled => ratios.values(self, z).into_iter().fold(f64::INFINITY, f64::min),
            LambdaUpdate::Literal => literal_lambda(self, z),
        };
        let constraints = self.barrier_constraints();
        let mut z = match warm {
            Some(w) => self.pull_inside(w),
            None => self.start().clone(),
        };
        let mut lambdas = Vec::new();
        let mut f_values = Vec::new();
        let mut newton_iters = 0;
        for iteration in 1..=opts.max_iterations {
            let lambda = lambda_of(&z);
            let x0 = self.pull_inside(&z);
            let weights = match opts.inner_form {
                InnerForm::Normalized => ratios.denominators(self, &z),
                InnerForm::Plain => vec![1.0; ratios.forms.len()],
            };
            let mut pieces = ratios.pieces(lambda, &weights);
            let x = if pieces.len() == 1 {
                let program = ConvexProgram {
                    objective: self.model().function(pieces.pop().unwrap().scaled(-1.0)),
                    constraints: constraints.clone(),
                    x0,
                };
                let sol = solver::solve(&program, self.solver_options())?.ensure_optimal()?;
                newton_iters += sol.newton_total_iters;
                sol.x
            } else {
                let pieces: Vec<SharedFn> = pieces.into_iter().map(|p| self.model().function(p)).collect();
                let sol = solver::epigraph_max_min(&pieces, &constraints, &x0, self.solver_options())?;
                newton_iters += sol.solution.newton_total_iters;
                sol.x
            };
            let f = ratios.f_value(self, &x, lambda);
            lambdas.push(lambda);
            f_values.push(f);
            z = x;
            if f <= opts.epsilon {
                let t_star = ratios.values(self, &z).into_iter().fold(f64::INFINITY, f64::min);
                return Ok(GdaOutcome {
                    z,
                    t_star,
                    iterations: iteration,
                    lambdas,
                    f_values,
                    newton_iters,
                });
            }
        }
        Err(ParetoError::NonConvergent {
            iterations: opts.max_iterations,
            epsilon: opts.epsilon,
            last_f: f_values.last().copied().unwrap_or(f64::NAN),
        })
    }

    pub(crate) fn utility_point(&self, alpha: f64, outcome: GdaOutcome) -> ParetoPoint {
        let m = self.metrics(&outcome.z);
        ParetoPoint {
            gee: m.gee,
            tp: m.tp,
            allocation: self.allocation(&outcome.z),
            sweep_param: alpha,
            method: Method::UtilityProfile,
            value: outcome.t_star,
            diagnostics: Diagnostics::Gda {
                iterations: outcome.iterations,
                lambdas: outcome.lambdas,
                f_values: outcome.f_values,
            },
            feasible: true,
        }
    }
}

/// The boundary point on the ray `(alpha, 1 - alpha)`.
pub fn gda_point(problem: &RegimeProblem, alpha: f64, opts: &GdaOptions) -> Result<ParetoPoint, ParetoError> {
    let outcome = problem.gda(alpha, opts, None)?;
    Ok(problem.utility_point(alpha, outcome))
}

/// One [`gda_point`] per ray, filtered to the boundary. Per-ray failures are
/// recorded in the outcomes and the sweep continues.
pub fn utility_profile_sweep(problem: &RegimeProblem, alphas: &[f64], opts: &SweepOptions) -> Sweep {
    let outcomes = if opts.warm_start {
        let mut warm: Option<DVector<f64>> = None;
        alphas
            .iter()
            .map(|&alpha| {
                let started = Instant::now();
                let result = problem.gda(alpha, &opts.gda, warm.as_ref()).map(|o| {
                    warm = Some(o.z.clone());
                    problem.utility_point(alpha, o)
                });
                PointOutcome {
                    sweep_param: alpha,
                    result,
                    wall_time: started.elapsed(),
                }
            })
            .collect()
    } else {
        par::map(opts.execution, alphas, |&alpha| {
            let started = Instant::now();
            let result = gda_point(problem, alpha, &opts.gda);
            PointOutcome {
                sweep_param: alpha,
                result,
                wall_time: started.elapsed(),
            }
        })
    };
    Sweep::assemble(
        Method::UtilityProfile,
        outcomes,
        problem.regime(),
        problem.instance().scenario.fingerprint(),
    )
}
