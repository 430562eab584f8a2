//! Scenario files shipped with the binary.

use anyhow::Result;

use super::scenario_file::ScenarioFile;

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const ALL: [Preset; 4] = [
    Preset {
        name: "fig2",
        summary: "4 antennas, 10 users in 4 slices, B = 100 Hz, all regimes, both methods",
        text: include_str!("presets/fig2.toml"),
    },
    Preset {
        name: "fig3",
        summary: "as fig2 with B = 1000 Hz",
        text: include_str!("presets/fig3.toml"),
    },
    Preset {
        name: "fig3_qos",
        summary: "fig3 with GEE, EE, SEE, rate and slice-throughput floors",
        text: include_str!("presets/fig3_qos.toml"),
    },
    Preset {
        name: "two_user_orthogonal",
        summary: "two users on orthogonal channels with a hand-checkable allocation",
        text: include_str!("presets/two_user_orthogonal.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    ALL.iter().find(|p| p.name == name)
}

impl Preset {
    pub fn parse(&self) -> Result<ScenarioFile> {
        ScenarioFile::parse(self.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasible::RegimeKind;

    #[test]
    fn every_preset_parses() {
        for p in ALL {
            let study = p
                .parse()
                .and_then(|f| f.study())
                .unwrap_or_else(|e| panic!("{}: {e:#}", p.name));
            assert!(!study.alphas.is_empty(), "{}", p.name);
        }
    }

    #[test]
    fn reference_layout() {
        let study = find("fig2").unwrap().parse().unwrap().study().unwrap();
        let sc = &study.instance.scenario;
        assert_eq!(sc.num_antennas, 4);
        assert_eq!(sc.num_users(), 10);
        let sizes: Vec<usize> = sc.slices.iter().map(|s| s.user_indices.len()).collect();
        assert_eq!(sizes, vec![1, 2, 3, 4]);
        assert_eq!(sc.total_bandwidth, 100.0);
        assert_eq!(study.alphas.len(), 21);
        assert_eq!(
            study.regimes.iter().map(|r| r.kind).collect::<Vec<_>>(),
            RegimeKind::ALL.to_vec()
        );
        assert!(sc
            .users
            .iter()
            .all(|u| u.pa_inefficiency == 4.0 && u.static_power == 0.1));

        let qos = find("fig3_qos").unwrap().parse().unwrap().scenario().unwrap();
        assert_eq!(qos.system_qos.gee_min, 40.0);
        assert_eq!(qos.total_bandwidth, 1000.0);
        let ee: Vec<f64> = qos.users.iter().map(|u| u.ee_min).collect();
        assert_eq!(ee, vec![0.0, 15.0, 15.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let r: Vec<f64> = qos.users.iter().map(|u| u.rate_min).collect();
        assert_eq!(r, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0]);
        assert_eq!(qos.slices[2].see_min, 15.0);
        assert_eq!(qos.slices[3].tp_min, 50.0);
    }
}
