use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use crate::feasible::{self, check_feasibility, FeasibleError, RegimeKind, DEFAULT_FEASIBILITY_TOL};
use crate::model::Allocation;
use crate::pareto::{
    scalarization_sweep, utility_profile_sweep, Method, ParetoError, ParetoPoint, PointOutcome, RegimeProblem,
};
use crate::prb::gda_point_prb;
use crate::solver::SolverError;

use super::scenario_file::Study;

pub const PRB_METHOD: &str = "utility_profile_prb";
pub const OPTIMAL: &str = "Optimal";

/// One line of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: &'static str,
    pub regime: RegimeKind,
    pub sweep_param: f64,
    pub gee: f64,
    pub tp: f64,
    pub bandwidths: Vec<f64>,
    pub powers: Vec<f64>,
    pub status: &'static str,
    pub iterations: usize,
    pub wall_time_ms: f64,
}

impl ResultRow {
    fn optimal(method: &'static str, regime: RegimeKind, p: &ParetoPoint, wall_time: Duration) -> Self {
        Self {
            method,
            regime,
            sweep_param: p.sweep_param,
            gee: p.gee,
            tp: p.tp,
            bandwidths: p.allocation.bandwidths.clone(),
            powers: p.allocation.powers.clone(),
            status: OPTIMAL,
            iterations: p.diagnostics.iterations(),
            wall_time_ms: ms(wall_time),
        }
    }

    fn failed(
        method: &'static str,
        regime: RegimeKind,
        alpha: f64,
        err: &ParetoError,
        shape: (usize, usize),
        wall_time: Duration,
    ) -> Self {
        let iterations = match err {
            ParetoError::NonConvergent { iterations, .. } => *iterations,
            _ => 0,
        };
        Self {
            method,
            regime,
            sweep_param: alpha,
            gee: f64::NAN,
            tp: f64::NAN,
            bandwidths: vec![f64::NAN; shape.0],
            powers: vec![f64::NAN; shape.1],
            status: status_of(err),
            iterations,
            wall_time_ms: ms(wall_time),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == OPTIMAL
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::new(self.bandwidths.clone(), self.powers.clone())
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn status_of(err: &ParetoError) -> &'static str {
    fn solver(e: &SolverError) -> &'static str {
        match e {
            SolverError::MaxIter { .. } => "MaxIter",
            SolverError::NumericalFailure { .. } => "NumericalFailure",
            _ => "SolverError",
        }
    }
    match err {
        e if e.is_infeasible() => "Infeasible",
        ParetoError::NonConvergent { .. } => "NonConvergent",
        ParetoError::Solver(e) | ParetoError::Feasible(FeasibleError::Solver(e)) => solver(e),
        ParetoError::LineSearchFailed => "LineSearchFailed",
        ParetoError::EnumerationCapExceeded { .. } => "EnumerationCapExceeded",
        ParetoError::InvalidAlpha(_) => "InvalidAlpha",
        ParetoError::Model(_) | ParetoError::Feasible(_) => "InvalidInput",
        _ => "Failed",
    }
}

/// Runs every regime and method of the study, one row per sweep point, in
/// the order regime, method, alpha.
pub fn run_study(study: &Study) -> Vec<ResultRow> {
    let sc = &study.instance.scenario;
    let shape = (sc.num_slices(), sc.num_users());
    let mut rows = Vec::new();
    let push_outcomes = |rows: &mut Vec<ResultRow>, method: Method, regime, outcomes: &[PointOutcome]| {
        for o in outcomes {
            rows.push(match &o.result {
                Ok(p) => ResultRow::optimal(method.name(), regime, p, o.wall_time),
                Err(e) => ResultRow::failed(method.name(), regime, o.sweep_param, e, shape, o.wall_time),
            });
        }
    };
    let fail_all = |rows: &mut Vec<ResultRow>, method: &'static str, regime, err: &ParetoError, elapsed: Duration| {
        log::warn!("{regime} {method}: {err}");
        for &alpha in &study.alphas {
            rows.push(ResultRow::failed(method, regime, alpha, err, shape, elapsed));
        }
    };

    for spec in &study.regimes {
        let regime = spec.kind;
        log::info!("{regime}: building problem");
        let started = Instant::now();
        let problem = match RegimeProblem::for_regime(study.instance.clone(), spec, study.solver) {
            Ok(p) => p,
            Err(err) => {
                let elapsed = started.elapsed() / study.alphas.len().max(1) as u32;
                for method in methods(study) {
                    fail_all(&mut rows, method.name(), regime, &err, elapsed);
                }
                continue;
            }
        };
        if study.method.utility_profile() {
            log::info!("{regime}: utility profile over {} rays", study.alphas.len());
            let sweep = utility_profile_sweep(&problem, &study.alphas, &study.sweep);
            push_outcomes(&mut rows, Method::UtilityProfile, regime, &sweep.outcomes);
        }
        if study.method.scalarization() {
            log::info!("{regime}: scalarization over {} weights", study.alphas.len());
            let started = Instant::now();
            match scalarization_sweep(&problem, &study.alphas, &study.line_search) {
                Ok(sweep) => push_outcomes(&mut rows, Method::Scalarization, regime, &sweep.outcomes),
                Err(err) => {
                    let elapsed = started.elapsed() / study.alphas.len().max(1) as u32;
                    fail_all(&mut rows, Method::Scalarization.name(), regime, &err, elapsed);
                }
            }
        }
    }

    if let Some(prb) = &study.prb {
        log::info!("whole-block bandwidths, block size {}", prb.prb_size);
        let opts = study.prb_options();
        for &alpha in &study.alphas {
            let started = Instant::now();
            let row = match gda_point_prb(&study.instance, alpha, prb, &opts) {
                Ok(p) => ResultRow::optimal(PRB_METHOD, RegimeKind::SetIV, &p.point, started.elapsed()),
                Err(e) => {
                    log::warn!("{PRB_METHOD} alpha {alpha}: {e}");
                    ResultRow::failed(PRB_METHOD, RegimeKind::SetIV, alpha, &e, shape, started.elapsed())
                }
            };
            rows.push(row);
        }
    }
    rows
}

fn methods(study: &Study) -> Vec<Method> {
    let mut m = Vec::new();
    if study.method.utility_profile() {
        m.push(Method::UtilityProfile);
    }
    if study.method.scalarization() {
        m.push(Method::Scalarization);
    }
    m
}

/// Rounds to 9 significant digits and prints the shortest decimal form of
/// the rounded value.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn csv_header(num_slices: usize, num_users: usize) -> String {
    let mut h = String::from("method,regime,sweep_param,gee,tp");
    for i in 1..=num_slices {
        write!(h, ",b_{i}").unwrap();
    }
    for k in 1..=num_users {
        write!(h, ",p_{k}").unwrap();
    }
    h.push_str(",status,iterations,wall_time_ms");
    h
}

pub fn csv_line(row: &ResultRow) -> String {
    let mut line = format!(
        "{},{},{},{},{}",
        row.method,
        row.regime,
        format_number(row.sweep_param),
        format_number(row.gee),
        format_number(row.tp)
    );
    for &v in row.bandwidths.iter().chain(&row.powers) {
        line.push(',');
        line.push_str(&format_number(v));
    }
    write!(
        line,
        ",{},{},{}",
        row.status,
        row.iterations,
        format_number(row.wall_time_ms)
    )
    .unwrap();
    line
}

pub fn write_csv<W: Write>(mut out: W, num_slices: usize, num_users: usize, rows: &[ResultRow]) -> io::Result<()> {
    writeln!(out, "{}", csv_header(num_slices, num_users))?;
    for row in rows {
        writeln!(out, "{}", csv_line(row))?;
    }
    out.flush()
}

/// Outcome of the `feasible` subcommand for one regime or allocation.
#[derive(Debug, Clone)]
pub struct FeasibilityOutcome {
    pub label: String,
    pub feasible: bool,
    pub text: String,
}

/// Checks the study's allocation when it has one, otherwise looks for a
/// strictly feasible point in every regime.
pub fn feasibility(study: &Study) -> Result<Vec<FeasibilityOutcome>, FeasibleError> {
    let inst = &study.instance;
    let describe = |alloc: &Allocation| {
        let report = check_feasibility(inst, alloc, DEFAULT_FEASIBILITY_TOL);
        let mut text = format!(
            "TP = {} bit/s, GEE = {} bit/J\nb = {:?}\np = {:?}\n",
            format_number(inst.tp(alloc)),
            format_number(inst.gee(alloc)),
            alloc.bandwidths,
            alloc.powers
        );
        text.push_str(&report.to_string());
        (report.is_feasible(), text)
    };
    if let Some(alloc) = &study.allocation {
        let (feasible, text) = describe(alloc);
        return Ok(vec![FeasibilityOutcome {
            label: "allocation".into(),
            feasible,
            text,
        }]);
    }
    let mut out = Vec::new();
    for spec in &study.regimes {
        let label = spec.kind.to_string();
        match feasible::phase1_point(inst, spec) {
            Ok(z) => {
                let alloc = feasible::expand(&inst.scenario, spec, &z)?;
                let (feasible, text) = describe(&alloc);
                out.push(FeasibilityOutcome { label, feasible, text });
            }
            Err(FeasibleError::Infeasible { certificate }) => out.push(FeasibilityOutcome {
                label,
                feasible: false,
                text: format!("infeasible: phase-I optimum {certificate:e} is not negative\n"),
            }),
            Err(e @ FeasibleError::FixedConstraintViolated { .. }) => out.push(FeasibilityOutcome {
                label,
                feasible: false,
                text: format!("infeasible: {e}\n"),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
