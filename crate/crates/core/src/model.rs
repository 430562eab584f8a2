//! Physical-layer model of the sliced MISO downlink: scenario data,
//! per-slice zero-forcing beamformers and the rate, throughput and
//! energy-efficiency metrics built on top of them.
//!
//! All rates are in bit/s (base-2 logarithm), powers in W, bandwidths in Hz.

use std::f64::consts::LN_2;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Largest admissible condition number of a slice Gram matrix `H H^H`.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("slice {slice}: channel Gram matrix is numerically singular (condition number {condition:e})")]
    RankDeficient { slice: usize, condition: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SystemQos {
    /// Minimum global energy efficiency (bit/J).
    pub gee_min: f64,
    /// Minimum system throughput (bit/s).
    pub tp_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    /// Members of the slice. Recomputed from the users' slice indices by
    /// [`Scenario::new`].
    pub user_indices: Vec<usize>,
    pub power_cap: f64,
    pub bandwidth_cap: f64,
    pub tp_min: f64,
    pub see_min: f64,
}

impl Slice {
    pub fn new(power_cap: f64, bandwidth_cap: f64) -> Self {
        Self {
            user_indices: Vec::new(),
            power_cap,
            bandwidth_cap,
            tp_min: 0.0,
            see_min: 0.0,
        }
    }

    pub fn has_positive_floor(&self) -> bool {
        self.tp_min > 0.0 || self.see_min > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub channel: Vec<C64>,
    /// Power-amplifier inefficiency factor.
    pub pa_inefficiency: f64,
    /// Static circuit power (W).
    pub static_power: f64,
    pub rate_min: f64,
    pub ee_min: f64,
    /// Zero-based slice index.
    pub slice_index: usize,
}

impl User {
    pub fn new(channel: Vec<C64>, slice_index: usize) -> Self {
        Self {
            channel,
            pa_inefficiency: 1.0,
            static_power: 0.1,
            rate_min: 0.0,
            ee_min: 0.0,
            slice_index,
        }
    }

    pub fn has_positive_floor(&self) -> bool {
        self.rate_min > 0.0 || self.ee_min > 0.0
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub num_antennas: usize,
    pub total_bandwidth: f64,
    pub total_power: f64,
    pub noise_density: f64,
    pub slices: Vec<Slice>,
    pub users: Vec<User>,
    pub system_qos: SystemQos,
}

fn positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidScenario(format!("{name} must be positive, got {v}")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidScenario(format!(
            "{name} must be nonnegative, got {v}"
        )))
    }
}

impl Scenario {
    /// Builds and validates a scenario. Slice membership is derived from
    /// `users[k].slice_index`.
    pub fn new(
        num_antennas: usize,
        total_bandwidth: f64,
        total_power: f64,
        noise_density: f64,
        mut slices: Vec<Slice>,
        users: Vec<User>,
        system_qos: SystemQos,
    ) -> Result<Self, ModelError> {
        let n_slices = slices.len();
        for s in &mut slices {
            s.user_indices.clear();
        }
        for (k, u) in users.iter().enumerate() {
            let s = slices.get_mut(u.slice_index).ok_or_else(|| {
                ModelError::InvalidScenario(format!(
                    "user {} references slice {} but only {} slices exist",
                    k + 1,
                    u.slice_index + 1,
                    n_slices
                ))
            })?;
            s.user_indices.push(k);
        }
        let scenario = Self {
            num_antennas,
            total_bandwidth,
            total_power,
            noise_density,
            slices,
            users,
            system_qos,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_antennas == 0 {
            return Err(ModelError::InvalidScenario("num_antennas must be positive".into()));
        }
        positive("total_bandwidth", self.total_bandwidth)?;
        positive("total_power", self.total_power)?;
        positive("noise_density", self.noise_density)?;
        nonneg("system_qos.gee_min", self.system_qos.gee_min)?;
        nonneg("system_qos.tp_min", self.system_qos.tp_min)?;
        if self.slices.is_empty() || self.users.is_empty() {
            return Err(ModelError::InvalidScenario(
                "need at least one slice and one user".into(),
            ));
        }
        for (i, s) in self.slices.iter().enumerate() {
            let n = i + 1;
            if s.user_indices.is_empty() {
                return Err(ModelError::InvalidScenario(format!("slice {n} has no users")));
            }
            if s.user_indices.len() > self.num_antennas {
                return Err(ModelError::InvalidScenario(format!(
                    "slice {n} serves {} users but only {} antennas are available",
                    s.user_indices.len(),
                    self.num_antennas
                )));
            }
            positive(&format!("slice {n} power_cap"), s.power_cap)?;
            positive(&format!("slice {n} bandwidth_cap"), s.bandwidth_cap)?;
            nonneg(&format!("slice {n} tp_min"), s.tp_min)?;
            nonneg(&format!("slice {n} see_min"), s.see_min)?;
            for &k in &s.user_indices {
                if self.users.get(k).map(|u| u.slice_index) != Some(i) {
                    return Err(ModelError::InvalidScenario(format!(
                        "slice {n} lists user {} which does not belong to it",
                        k + 1
                    )));
                }
            }
        }
        for (k, u) in self.users.iter().enumerate() {
            let n = k + 1;
            if u.channel.len() != self.num_antennas {
                return Err(ModelError::InvalidScenario(format!(
                    "user {n} channel has {} entries, expected {}",
                    u.channel.len(),
                    self.num_antennas
                )));
            }
            if u.channel.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(ModelError::InvalidScenario(format!("user {n} channel is not finite")));
            }
            positive(&format!("user {n} pa_inefficiency"), u.pa_inefficiency)?;
            positive(&format!("user {n} static_power"), u.static_power)?;
            nonneg(&format!("user {n} rate_min"), u.rate_min)?;
            nonneg(&format!("user {n} ee_min"), u.ee_min)?;
            if !self
                .slices
                .get(u.slice_index)
                .is_some_and(|s| s.user_indices.contains(&k))
            {
                return Err(ModelError::InvalidScenario(format!(
                    "user {n} is not listed in slice {}",
                    u.slice_index + 1
                )));
            }
        }
        Ok(())
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Circuit power of slice `i`, the sum of its members' static powers.
    pub fn static_power_slice(&self, i: usize) -> f64 {
        self.slices[i]
            .user_indices
            .iter()
            .map(|&k| self.users[k].static_power)
            .sum()
    }

    pub fn static_power_total(&self) -> f64 {
        self.users.iter().map(|u| u.static_power).sum()
    }

    /// Stable 64-bit fingerprint over every numeric field.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut h = DefaultHasher::new();
        self.num_antennas.hash(&mut h);
        for v in [
            self.total_bandwidth,
            self.total_power,
            self.noise_density,
            self.system_qos.gee_min,
            self.system_qos.tp_min,
        ] {
            v.to_bits().hash(&mut h);
        }
        for s in &self.slices {
            s.user_indices.hash(&mut h);
            for v in [s.power_cap, s.bandwidth_cap, s.tp_min, s.see_min] {
                v.to_bits().hash(&mut h);
            }
        }
        for u in &self.users {
            u.slice_index.hash(&mut h);
            for c in &u.channel {
                c.re.to_bits().hash(&mut h);
                c.im.to_bits().hash(&mut h);
            }
            for v in [u.pa_inefficiency, u.static_power, u.rate_min, u.ee_min] {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

/// Decision variables: one bandwidth per slice and one power per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub bandwidths: Vec<f64>,
    pub powers: Vec<f64>,
}

impl Allocation {
    pub fn new(bandwidths: Vec<f64>, powers: Vec<f64>) -> Self {
        Self { bandwidths, powers }
    }

    pub fn zeros(num_slices: usize, num_users: usize) -> Self {
        Self::new(vec![0.0; num_slices], vec![0.0; num_users])
    }

    pub fn is_nonnegative(&self) -> bool {
        self.bandwidths.iter().chain(&self.powers).all(|&v| v >= 0.0)
    }
}

/// Beamformers of one slice: column `j` serves the `j`-th member.
#[derive(Debug, Clone)]
pub struct SliceBeamformers {
    pub columns: DMatrix<C64>,
    pub gains: Vec<f64>,
}

/// Zero-forcing beamformers `H^H (H H^H)^{-1}` with unit-norm columns for
/// the users whose channels are given, plus their effective gains
/// `|h_k^H w_k|^2`.
pub fn zf_beamformers(channels: &[&[C64]]) -> Result<SliceBeamformers, ModelError> {
    let rows = channels.len();
    assert!(rows > 0, "zf_beamformers needs at least one channel");
    let m = channels[0].len();
    // Row k of H is h_k^H.
    let h = DMatrix::from_fn(rows, m, |r, c| channels[r][c].conj());
    let gram = &h * h.adjoint();

    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(ModelError::RankDeficient { slice: 0, condition });
    }
    let chol = gram
        .cholesky()
        .ok_or(ModelError::RankDeficient { slice: 0, condition })?;
    // (H H^H)^{-1} H, whose adjoint is H^H (H H^H)^{-1}.
    let solved = chol.solve(&h);
    let mut columns = solved.adjoint();
    for mut col in columns.column_iter_mut() {
        let n = col.norm();
        col /= Complex::new(n, 0.0);
    }
    let gains = (0..rows)
        .map(|k| (h.row(k) * columns.column(k))[(0, 0)].norm_sqr())
        .collect();
    Ok(SliceBeamformers { columns, gains })
}

/// Per-user effective channel gains under per-slice zero forcing.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    pub gains: Vec<f64>,
    pub beamformers: Vec<SliceBeamformers>,
}

impl EffectiveChannels {
    pub fn compute(scenario: &Scenario) -> Result<Self, ModelError> {
        let mut gains = vec![0.0; scenario.num_users()];
        let mut beamformers = Vec::with_capacity(scenario.num_slices());
        for (i, slice) in scenario.slices.iter().enumerate() {
            let chans: Vec<&[C64]> = slice
                .user_indices
                .iter()
                .map(|&k| scenario.users[k].channel.as_slice())
                .collect();
            let bf = zf_beamformers(&chans).map_err(|e| match e {
                ModelError::RankDeficient { condition, .. } => ModelError::RankDeficient {
                    slice: i + 1,
                    condition,
                },
                other => other,
            })?;
            for (j, &k) in slice.user_indices.iter().enumerate() {
                gains[k] = bf.gains[j];
            }
            beamformers.push(bf);
        }
        Ok(Self { gains, beamformers })
    }
}

/// Achievable rate `b log2(1 + g p / (N0 b))`, extended by 0 at `b = 0`.
pub fn rate(bandwidth: f64, power: f64, gain: f64, noise_density: f64) -> f64 {
    if bandwidth <= 0.0 {
        return 0.0;
    }
    bandwidth * (gain * power / (noise_density * bandwidth)).ln_1p() / LN_2
}

/// Bit-per-Joule efficiency of a throughput over a consumed power.
pub fn energy_efficiency(throughput: f64, static_power: f64, transmit_cost: f64) -> f64 {
    throughput / (static_power + transmit_cost)
}

/// A scenario together with its effective channels. This is what every
/// optimizer works on.
#[derive(Debug, Clone)]
pub struct Instance {
    pub scenario: Scenario,
    pub channels: EffectiveChannels,
}

impl Instance {
    pub fn new(scenario: Scenario) -> Result<Self, ModelError> {
        scenario.validate()?;
        let channels = EffectiveChannels::compute(&scenario)?;
        Ok(Self { scenario, channels })
    }

    pub fn gains(&self) -> &[f64] {
        &self.channels.gains
    }

    pub fn user_rate(&self, alloc: &Allocation, k: usize) -> f64 {
        let s = self.scenario.users[k].slice_index;
        rate(
            alloc.bandwidths[s],
            alloc.powers[k],
            self.channels.gains[k],
            self.scenario.noise_density,
        )
    }

    pub fn tp_slice(&self, alloc: &Allocation, i: usize) -> f64 {
        self.scenario.slices[i]
            .user_indices
            .iter()
            .map(|&k| self.user_rate(alloc, k))
            .sum()
    }

    pub fn tp(&self, alloc: &Allocation) -> f64 {
        (0..self.scenario.num_slices()).map(|i| self.tp_slice(alloc, i)).sum()
    }

    /// Amplifier-scaled transmit power `sum phi_k p_k` over the given users.
    pub fn transmit_cost<I: IntoIterator<Item = usize>>(&self, alloc: &Allocation, users: I) -> f64 {
        users
            .into_iter()
            .map(|k| self.scenario.users[k].pa_inefficiency * alloc.powers[k])
            .sum()
    }

    /// Total consumed power `P_0 + sum phi_k p_k`.
    pub fn consumed_power(&self, alloc: &Allocation) -> f64 {
        self.scenario.static_power_total() + self.transmit_cost(alloc, 0..self.scenario.num_users())
    }

    pub fn ee_user(&self, alloc: &Allocation, k: usize) -> f64 {
        let u = &self.scenario.users[k];
        energy_efficiency(
            self.user_rate(alloc, k),
            u.static_power,
            u.pa_inefficiency * alloc.powers[k],
        )
    }

    pub fn see_slice(&self, alloc: &Allocation, i: usize) -> f64 {
        let members = self.scenario.slices[i].user_indices.iter().copied();
        energy_efficiency(
            self.tp_slice(alloc, i),
            self.scenario.static_power_slice(i),
            self.transmit_cost(alloc, members),
        )
    }

    pub fn gee(&self, alloc: &Allocation) -> f64 {
        self.tp(alloc) / self.consumed_power(alloc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single_user_scenario(gain_amp: f64) -> Scenario {
        Scenario::new(
            1,
            1.0,
            1.0,
            1e-2,
            vec![Slice::new(1.0, 1.0)],
            vec![User {
                pa_inefficiency: 4.0,
                ..User::new(vec![c(gain_amp, 0.0)], 0)
            }],
            SystemQos::default(),
        )
        .unwrap()
    }

    #[test]
    fn zf_orthonormal_channels_is_identity() {
        let h1 = [c(1.0, 0.0), c(0.0, 0.0)];
        let h2 = [c(0.0, 0.0), c(1.0, 0.0)];
        let bf = zf_beamformers(&[&h1, &h2]).unwrap();
        assert_relative_eq!(bf.columns[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(bf.columns[(1, 1)].re, 1.0, epsilon = 1e-12);
        assert!(bf.columns[(1, 0)].norm() < 1e-12);
        assert!(bf.columns[(0, 1)].norm() < 1e-12);
        assert_relative_eq!(bf.gains[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(bf.gains[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zf_oblique_pair_by_hand() {
        // H = [[1, 0], [s, s]] with s = 1/sqrt(2); H^{-1} = [[1, 0], [-1, sqrt(2)]].
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h1 = [c(1.0, 0.0), c(0.0, 0.0)];
        let h2 = [c(s, 0.0), c(s, 0.0)];
        let bf = zf_beamformers(&[&h1, &h2]).unwrap();
        let expected = [[s, -s], [0.0, 1.0]];
        for (k, w) in expected.iter().enumerate() {
            for (j, &v) in w.iter().enumerate() {
                assert!((bf.columns[(j, k)] - c(v, 0.0)).norm() < 1e-12, "w_{k}[{j}]");
            }
        }
        assert_relative_eq!(bf.gains[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(bf.gains[1], 0.5, epsilon = 1e-12);
        let cross =
            |h: &[C64], k: usize| -> C64 { h.iter().enumerate().map(|(j, v)| v.conj() * bf.columns[(j, k)]).sum() };
        assert!(cross(&h1, 1).norm() < 1e-12);
        assert!(cross(&h2, 0).norm() < 1e-12);
    }

    #[test]
    fn zf_single_user_is_matched_filter() {
        let h = [c(0.3, -1.2), c(2.0, 0.5), c(-0.7, 0.1)];
        let bf = zf_beamformers(&[&h]).unwrap();
        let norm2: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(bf.gains[0], norm2, epsilon = 1e-12);
        for (j, hj) in h.iter().enumerate() {
            let expected = hj / norm2.sqrt();
            assert!((bf.columns[(j, 0)] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn zf_rejects_collinear_channels() {
        let h1 = [c(1.0, 0.0), c(1.0, 0.0)];
        let h2 = [c(2.0, 0.0), c(2.0, 0.0)];
        assert!(matches!(
            zf_beamformers(&[&h1, &h2]),
            Err(ModelError::RankDeficient { .. })
        ));
    }

    #[test]
    fn rate_examples() {
        assert_relative_eq!(rate(1.0, 0.03, 1.0, 1e-2), 2.0, epsilon = 1e-12);
        assert_eq!(rate(0.0, 5.0, 1.0, 1e-2), 0.0);
        assert_relative_eq!(rate(2.0, 0.03, 1.0, 1e-2), 2.643_856_189_774_724, epsilon = 1e-12);
    }

    #[test]
    fn user_ee_example() {
        let inst = Instance::new(single_user_scenario(1.0)).unwrap();
        let alloc = Allocation::new(vec![1.0], vec![0.03]);
        assert_relative_eq!(inst.tp(&alloc), 2.0, epsilon = 1e-12);
        assert_relative_eq!(inst.ee_user(&alloc, 0), 2.0 / 0.22, epsilon = 1e-12);
        assert_relative_eq!(inst.see_slice(&alloc, 0), inst.gee(&alloc), epsilon = 1e-15);
    }

    #[test]
    fn zero_power_gives_zero_throughput_and_gee() {
        let inst = Instance::new(single_user_scenario(1.3)).unwrap();
        let alloc = Allocation::new(vec![1.0], vec![0.0]);
        assert_eq!(inst.tp(&alloc), 0.0);
        assert_eq!(inst.gee(&alloc), 0.0);
    }

    #[test]
    fn two_slices_throughput_is_additive() {
        let scenario = Scenario::new(
            2,
            10.0,
            1.0,
            1e-2,
            vec![Slice::new(1.0, 10.0), Slice::new(1.0, 10.0)],
            vec![
                User::new(vec![c(1.0, 0.0), c(0.0, 0.0)], 0),
                User::new(vec![c(0.0, 0.0), c(1.0, 0.0)], 1),
            ],
            SystemQos::default(),
        )
        .unwrap();
        let inst = Instance::new(scenario).unwrap();
        let alloc = Allocation::new(vec![1.0, 2.0], vec![0.03, 0.03]);
        assert_relative_eq!(inst.tp_slice(&alloc, 0), 2.0, epsilon = 1e-12);
        assert_relative_eq!(inst.tp(&alloc), 2.0 + 2.643_856_189_774_724, epsilon = 1e-12);
    }

    #[test]
    fn scenario_rejects_overfull_slice() {
        let err = Scenario::new(
            1,
            1.0,
            1.0,
            1e-2,
            vec![Slice::new(1.0, 1.0)],
            vec![User::new(vec![c(1.0, 0.0)], 0), User::new(vec![c(0.5, 0.0)], 0)],
            SystemQos::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::InvalidScenario(_)));
    }

    #[test]
    fn scenario_rejects_empty_slice_and_bad_channel_length() {
        let err = Scenario::new(
            1,
            1.0,
            1.0,
            1e-2,
            vec![Slice::new(1.0, 1.0), Slice::new(1.0, 1.0)],
            vec![User::new(vec![c(1.0, 0.0)], 0)],
            SystemQos::default(),
        );
        assert!(err.is_err());
        let err = Scenario::new(
            2,
            1.0,
            1.0,
            1e-2,
            vec![Slice::new(1.0, 1.0)],
            vec![User::new(vec![c(1.0, 0.0)], 0)],
            SystemQos::default(),
        );
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn rate_is_perspective_homogeneous(
            b in 1e-3..1e4f64,
            p in 1e-6..1e2f64,
            g in 1e-3..10.0f64,
            n0 in 1e-4..1.0f64,
            s in 1e-2..1e2f64,
        ) {
            let r = rate(b, p, g, n0);
            prop_assert!((rate(s * b, s * p, g, n0) - s * r).abs() <= 1e-12 * s * r);
            prop_assert_eq!(rate(2.0 * b, 2.0 * p, g, n0), 2.0 * r);
        }

        #[test]
        fn rate_grows_with_bandwidth_and_power(
            b in 1e-3..1e4f64,
            p in 1e-6..1e2f64,
            g in 1e-3..10.0f64,
            step in 1e-3..1.0f64,
        ) {
            let r = rate(b, p, g, 1e-2);
            prop_assert!(rate(b * (1.0 + step), p, g, 1e-2) >= r);
            prop_assert!(rate(b, p * (1.0 + step), g, 1e-2) > r);
            // concave in bandwidth
            let mid = rate(b * (1.0 + step / 2.0), p, g, 1e-2);
            let hi = rate(b * (1.0 + step), p, g, 1e-2);
            prop_assert!(mid >= 0.5 * (r + hi) - 1e-12 * hi);
        }
    }
}
