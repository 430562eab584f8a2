//! The TOML scenario format.
//!
//! ```toml
//! num_antennas = 4
//! total_bandwidth = 100.0      # Hz
//! total_power = 10.0           # W
//! noise_density = 1e-2         # W/Hz
//! regimes = ["SetI", "SetIV"]  # default: all four
//! method = "both"              # utility_profile | scalarization | both
//!
//! [channels]
//! source = "seeded_gaussian"   # or "explicit" with vectors = [[[re, im], ...], ...]
//! seed = 1
//!
//! [system_qos]                 # optional
//! gee_min = 40.0
//! tp_min = 0.0
//!
//! [user_defaults]              # optional
//! pa_inefficiency = 4.0
//! static_power = 0.1
//!
//! [[slices]]
//! power_cap = 10.0
//! bandwidth_cap = 100.0
//! see_min = 0.0
//! tp_min = 0.0
//! num_users = 2                # or users = [{ rate_min = 5.0 }, ...]
//!
//! [shares]                     # optional, uniform when omitted
//! power = [0.5, 0.5]           # one per user (SetI, SetII)
//! bandwidth = [1.0]            # one per slice (SetI, SetIII)
//!
//! [sweep]
//! alpha_count = 21             # or alpha_list = [0.0, 0.5, 1.0]
//!
//! [prb]                        # optional, adds whole-block SetIV rows
//! prb_size = 1.0
//! max_enumeration = 100000
//!
//! [solver]                     # optional overrides
//! tol = 1e-8
//! gda_epsilon = 1e-6
//! gda_max_iterations = 100
//! lambda_update = "scaled"     # or "literal"
//! inner_form = "normalized"    # or "plain"
//! warm_start = false
//! grid_size = 200
//! refine_tol = 1e-6
//!
//! [allocation]                 # optional, checked by `feasible`
//! bandwidths = [50.0]
//! powers = [1.0, 1.0]
//! ```
//!
//! Users are numbered slice by slice in file order. Unknown keys are
//! rejected.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;

use super::channels::generate_channels;
use crate::feasible::{RegimeKind, RegimeSpec};
use crate::model::{Allocation, Instance, Scenario, Slice, SystemQos, User, C64};
use crate::pareto::{GdaOptions, InnerForm, LambdaUpdate, LineSearchOptions, SweepOptions};
use crate::prb::{PrbConfig, PrbOptions};
use crate::solver::SolverOptions;

pub const DEFAULT_ALPHA_COUNT: usize = 21;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub num_antennas: usize,
    pub total_bandwidth: f64,
    pub total_power: f64,
    pub noise_density: f64,
    pub channels: ChannelSource,
    pub slices: Vec<SliceSpec>,
    #[serde(default)]
    pub system_qos: QosSpec,
    #[serde(default)]
    pub user_defaults: UserDefaults,
    #[serde(default = "all_regimes")]
    pub regimes: Vec<RegimeKind>,
    #[serde(default)]
    pub shares: SharesSpec,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default)]
    pub sweep: SweepSpec,
    pub prb: Option<PrbConfig>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub allocation: Option<AllocationSpec>,
}

fn all_regimes() -> Vec<RegimeKind> {
    RegimeKind::ALL.to_vec()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    SeededGaussian {
        seed: u64,
    },
    /// One vector per user of `[re, im]` pairs.
    Explicit {
        vectors: Vec<Vec<[f64; 2]>>,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSpec {
    #[serde(default)]
    pub gee_min: f64,
    #[serde(default)]
    pub tp_min: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserDefaults {
    pub pa_inefficiency: f64,
    pub static_power: f64,
    pub rate_min: f64,
    pub ee_min: f64,
}

impl Default for UserDefaults {
    fn default() -> Self {
        Self {
            pa_inefficiency: 1.0,
            static_power: 0.1,
            rate_min: 0.0,
            ee_min: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub pa_inefficiency: Option<f64>,
    pub static_power: Option<f64>,
    pub rate_min: Option<f64>,
    pub ee_min: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub power_cap: f64,
    pub bandwidth_cap: f64,
    #[serde(default)]
    pub tp_min: f64,
    #[serde(default)]
    pub see_min: f64,
    pub num_users: Option<usize>,
    pub users: Option<Vec<UserSpec>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharesSpec {
    pub power: Option<Vec<f64>>,
    pub bandwidth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    UtilityProfile,
    Scalarization,
    #[default]
    Both,
}

impl MethodChoice {
    pub fn utility_profile(self) -> bool {
        self != MethodChoice::Scalarization
    }

    pub fn scalarization(self) -> bool {
        self != MethodChoice::UtilityProfile
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub alpha_list: Option<Vec<f64>>,
    pub alpha_count: Option<usize>,
}

impl SweepSpec {
    pub fn alphas(&self) -> Result<Vec<f64>> {
        match (&self.alpha_list, self.alpha_count) {
            (Some(_), Some(_)) => bail!("sweep: give either alpha_list or alpha_count, not both"),
            (Some(list), None) => {
                ensure!(!list.is_empty(), "sweep.alpha_list is empty");
                for (j, a) in list.iter().enumerate() {
                    ensure!((0.0..=1.0).contains(a), "sweep.alpha_list[{j}] = {a} is outside [0, 1]");
                }
                Ok(list.clone())
            }
            (None, count) => {
                let n = count.unwrap_or(DEFAULT_ALPHA_COUNT);
                ensure!(n >= 2, "sweep.alpha_count must be at least 2, got {n}");
                Ok((0..n).map(|j| j as f64 / (n - 1) as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaUpdateSpec {
    #[default]
    Scaled,
    Literal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerFormSpec {
    #[default]
    Normalized,
    Plain,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: Option<f64>,
    pub newton_tol: Option<f64>,
    pub max_newton_total: Option<usize>,
    pub gda_epsilon: Option<f64>,
    pub gda_max_iterations: Option<usize>,
    #[serde(default)]
    pub lambda_update: LambdaUpdateSpec,
    #[serde(default)]
    pub inner_form: InnerFormSpec,
    #[serde(default)]
    pub warm_start: bool,
    pub grid_size: Option<usize>,
    pub refine_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSpec {
    pub bandwidths: Vec<f64>,
    pub powers: Vec<f64>,
}

/// A parsed and validated scenario file, ready to run.
#[derive(Debug, Clone)]
pub struct Study {
    pub instance: Arc<Instance>,
    pub regimes: Vec<RegimeSpec>,
    pub method: MethodChoice,
    pub alphas: Vec<f64>,
    pub prb: Option<PrbConfig>,
    pub solver: SolverOptions,
    pub sweep: SweepOptions,
    pub line_search: LineSearchOptions,
    pub allocation: Option<Allocation>,
}

impl Study {
    pub fn prb_options(&self) -> PrbOptions {
        PrbOptions {
            gda: self.sweep.gda,
            solver: self.solver,
            execution: self.sweep.execution,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let d = &self.user_defaults;
        let mut slices = Vec::with_capacity(self.slices.len());
        let mut users = Vec::new();
        for (i, s) in self.slices.iter().enumerate() {
            let specs = match (s.num_users, &s.users) {
                (Some(_), Some(_)) => bail!("slices[{i}]: give either num_users or users, not both"),
                (None, None) => bail!("slices[{i}]: missing num_users or users"),
                (Some(n), None) => vec![UserSpec::default(); n],
                (None, Some(list)) => list.clone(),
            };
            ensure!(!specs.is_empty(), "slices[{i}] has no users");
            for u in specs {
                let mut user = User::new(Vec::new(), i);
                user.pa_inefficiency = u.pa_inefficiency.unwrap_or(d.pa_inefficiency);
                user.static_power = u.static_power.unwrap_or(d.static_power);
                user.rate_min = u.rate_min.unwrap_or(d.rate_min);
                user.ee_min = u.ee_min.unwrap_or(d.ee_min);
                users.push(user);
            }
            let mut slice = Slice::new(s.power_cap, s.bandwidth_cap);
            slice.tp_min = s.tp_min;
            slice.see_min = s.see_min;
            slices.push(slice);
        }
        let channels = match &self.channels {
            ChannelSource::SeededGaussian { seed } => generate_channels(*seed, self.num_antennas, users.len()),
            ChannelSource::Explicit { vectors } => {
                ensure!(
                    vectors.len() == users.len(),
                    "channels.vectors has {} entries for {} users",
                    vectors.len(),
                    users.len()
                );
                vectors
                    .iter()
                    .map(|v| v.iter().map(|&[re, im]| C64::new(re, im)).collect())
                    .collect()
            }
        };
        for (u, h) in users.iter_mut().zip(channels) {
            u.channel = h;
        }
        let qos = SystemQos {
            gee_min: self.system_qos.gee_min,
            tp_min: self.system_qos.tp_min,
        };
        Ok(Scenario::new(
            self.num_antennas,
            self.total_bandwidth,
            self.total_power,
            self.noise_density,
            slices,
            users,
            qos,
        )?)
    }

    pub fn study(&self) -> Result<Study> {
        let scenario = self.scenario()?;
        let instance = Arc::new(Instance::new(scenario)?);
        let sc = &instance.scenario;
        ensure!(!self.regimes.is_empty(), "regimes is empty");
        let mut regimes = Vec::new();
        for &kind in &self.regimes {
            let mut spec = RegimeSpec::uniform(kind, sc);
            if kind.fixed_power_shares() {
                if let Some(rho) = &self.shares.power {
                    spec.power_shares = Some(rho.clone());
                }
            }
            if kind.fixed_bandwidth_shares() {
                if let Some(beta) = &self.shares.bandwidth {
                    spec.bandwidth_shares = Some(beta.clone());
                }
            }
            spec.validated(sc).with_context(|| format!("shares for {kind}"))?;
            regimes.push(spec);
        }
        if let Some(prb) = &self.prb {
            prb.validate(sc).context("prb")?;
        }
        let allocation = match &self.allocation {
            None => None,
            Some(a) => {
                ensure!(
                    a.bandwidths.len() == sc.num_slices() && a.powers.len() == sc.num_users(),
                    "allocation needs {} bandwidths and {} powers, got {} and {}",
                    sc.num_slices(),
                    sc.num_users(),
                    a.bandwidths.len(),
                    a.powers.len()
                );
                Some(Allocation::new(a.bandwidths.clone(), a.powers.clone()))
            }
        };

        let s = &self.solver;
        let mut solver = SolverOptions::default();
        if let Some(v) = s.tol {
            solver.tol = v;
        }
        if let Some(v) = s.newton_tol {
            solver.newton_tol = v;
        }
        if let Some(v) = s.max_newton_total {
            solver.max_newton_total = v;
        }
        let mut gda = GdaOptions::default();
        if let Some(v) = s.gda_epsilon {
            gda.epsilon = v;
        }
        if let Some(v) = s.gda_max_iterations {
            gda.max_iterations = v;
        }
        gda.lambda_update = match s.lambda_update {
            LambdaUpdateSpec::Scaled => LambdaUpdate::Scaled,
            LambdaUpdateSpec::Literal => LambdaUpdate::Literal,
        };
        gda.inner_form = match s.inner_form {
            InnerFormSpec::Normalized => InnerForm::Normalized,
            InnerFormSpec::Plain => InnerForm::Plain,
        };
        let sweep = SweepOptions {
            gda,
            warm_start: s.warm_start,
            ..Default::default()
        };
        let mut line_search = LineSearchOptions::default();
        if let Some(v) = s.grid_size {
            ensure!(v >= 2, "solver.grid_size must be at least 2");
            line_search.grid_size = v;
        }
        if let Some(v) = s.refine_tol {
            line_search.refine_tol = v;
        }

        Ok(Study {
            alphas: self.sweep.alphas()?,
            instance,
            regimes,
            method: self.method,
            prb: self.prb,
            solver,
            sweep,
            line_search,
            allocation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
num_antennas = 2
total_bandwidth = 10.0
total_power = 1.0
noise_density = 0.01

[channels]
source = "seeded_gaussian"
seed = 3

[[slices]]
power_cap = 1.0
bandwidth_cap = 10.0
num_users = 2
"#;

    #[test]
    fn defaults() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        let study = f.study().unwrap();
        assert_eq!(study.regimes.len(), 4);
        assert_eq!(study.method, MethodChoice::Both);
        assert_eq!(study.alphas.len(), DEFAULT_ALPHA_COUNT);
        assert_eq!(study.alphas[10], 0.5);
        let sc = &study.instance.scenario;
        assert_eq!(sc.users[1].static_power, 0.1);
        assert_eq!(sc.users[0].channel, generate_channels(3, 2, 2)[0]);
    }

    #[test]
    fn unknown_field_is_reported_with_its_line() {
        let text = MINIMAL.replace("num_users = 2", "num_users = 2\nbandwith_cap = 3.0");
        let err = format!("{:#}", ScenarioFile::parse(&text).unwrap_err());
        assert!(err.contains("bandwith_cap"), "{err}");
        assert!(err.contains("line 15"), "{err}");
    }

    #[test]
    fn inconsistent_inputs() {
        let both = MINIMAL.replace("num_users = 2", "num_users = 2\nusers = [{}, {}]");
        assert!(ScenarioFile::parse(&both).unwrap().study().is_err());
        let sweep = format!("{MINIMAL}\n[sweep]\nalpha_list = [0.5]\nalpha_count = 3\n");
        assert!(ScenarioFile::parse(&sweep).unwrap().study().is_err());
        let alpha = format!("{MINIMAL}\n[sweep]\nalpha_list = [1.5]\n");
        assert!(ScenarioFile::parse(&alpha).unwrap().study().is_err());
        let shares = format!("{MINIMAL}\n[shares]\npower = [0.9, 0.9]\n");
        assert!(ScenarioFile::parse(&shares).unwrap().study().is_err());
        let explicit = MINIMAL.replace(
            "source = \"seeded_gaussian\"\nseed = 3",
            "source = \"explicit\"\nvectors = [[[1.0, 0.0], [0.0, 0.0]]]",
        );
        assert!(ScenarioFile::parse(&explicit).unwrap().study().is_err());
    }
}
