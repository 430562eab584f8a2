use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netslice::cli::{presets, ScenarioFile, EXIT_ERROR, EXIT_OK, OPTIMAL, PRB_METHOD};
use netslice::model::Allocation;

fn netslice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netslice"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_preset(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let text = format!("{}{extra}", presets::find(name).unwrap().text);
    std::fs::write(&path, text).unwrap();
    path
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Self {
        let mut lines = text
            .lines()
            .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
        let header = lines.next().unwrap();
        let rows: Vec<_> = lines.collect();
        assert!(rows.iter().all(|r| r.len() == header.len()));
        Self { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }

    fn values(&self, row: &[String], prefix: &str) -> Vec<f64> {
        self.header
            .iter()
            .zip(row)
            .filter(|(h, _)| h.starts_with(prefix))
            .map(|(_, v)| v.parse().unwrap())
            .collect()
    }
}

#[test]
fn presets_list_and_emit() {
    let out = netslice(&["presets", "list"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = stdout(&out);
    for p in presets::ALL {
        assert!(text.contains(p.name), "{text}");
    }
    let out = netslice(&["presets", "emit", "fig3"]);
    assert_eq!(stdout(&out), presets::find("fig3").unwrap().text);

    let out = netslice(&["presets", "emit", "fig9"]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("available: fig2"));
}

#[test]
fn feasible_reports_hand_computed_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_preset(dir.path(), "two_user_orthogonal", "");
    let out = netslice(&["feasible", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = stdout(&out);
    // rate log2(1 + 0.03 / 0.01) = 2 per user; power 2 * 0.1 + 4 * 0.06
    assert!(text.contains("TP = 4 bit/s, GEE = 9.09090909 bit/J"), "{text}");
    assert!(text.starts_with("== allocation: feasible"), "{text}");
}

#[test]
fn feasible_without_allocation_checks_each_regime() {
    let dir = tempfile::tempdir().unwrap();
    let text = presets::find("two_user_orthogonal").unwrap().text;
    let cut = text.find("[allocation]").unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, &text[..cut]).unwrap();
    let out = netslice(&["feasible", path.to_str().unwrap()]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{text}");
    assert!(
        text.contains("== SetI: feasible") && text.contains("== SetIV: feasible"),
        "{text}"
    );
}

#[test]
fn unreadable_scenario_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "num_antennas = 2\nbogus = 1\n").unwrap();
    let out = netslice(&["run", path.to_str().unwrap(), "-o", "-"]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(out.stdout.is_empty());
    let out = netslice(&["feasible", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
}

#[test]
fn fig2_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_preset(dir.path(), "fig2", "");
    let csv_path = dir.path().join("fig2.csv");
    let out = netslice(&["run", scenario.to_str().unwrap(), "-o", csv_path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = Csv::parse(&std::fs::read_to_string(&csv_path).unwrap());
    assert_eq!(csv.rows.len(), 4 * 21 * 2);
    assert_eq!(csv.header.len(), 5 + 4 + 10 + 3);

    let inst = ScenarioFile::load(&scenario).unwrap().study().unwrap().instance;
    let (gee, tp, status) = (csv.col("gee"), csv.col("tp"), csv.col("status"));
    for row in &csv.rows {
        assert_eq!(row[status], OPTIMAL);
        let alloc = Allocation::new(csv.values(row, "b_"), csv.values(row, "p_"));
        let want_tp: f64 = row[tp].parse().unwrap();
        let want_gee: f64 = row[gee].parse().unwrap();
        assert!((inst.tp(&alloc) - want_tp).abs() <= 1e-6 * want_tp.max(1.0), "{row:?}");
        assert!(
            (inst.gee(&alloc) - want_gee).abs() <= 1e-6 * want_gee.max(1.0),
            "{row:?}"
        );
    }
}

#[test]
fn fig3_qos_rows_are_optimal_or_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [1, 5] {
        let text = presets::find("fig3_qos")
            .unwrap()
            .text
            .replace("seed = 1", &format!("seed = {seed}"));
        let path = dir.path().join(format!("qos{seed}.toml"));
        std::fs::write(&path, text).unwrap();
        let out = netslice(&["run", path.to_str().unwrap(), "-o", "-"]);
        let csv = Csv::parse(&stdout(&out));
        let status = csv.col("status");
        let statuses: Vec<&str> = csv.rows.iter().map(|r| r[status].as_str()).collect();
        assert_eq!(statuses.len(), 4 * 21 * 2);
        assert!(
            statuses.iter().all(|s| *s == OPTIMAL || *s == "Infeasible"),
            "{statuses:?}"
        );
        let expected = if statuses.iter().all(|s| *s == OPTIMAL) {
            EXIT_OK
        } else {
            2
        };
        assert_eq!(out.status.code(), Some(expected));
        if seed == 5 {
            // a slice-2 user's gain is below the EE floor's threshold
            assert!(statuses.iter().all(|s| *s == "Infeasible"));
            let row = &csv.rows[0];
            assert_eq!(row[csv.col("gee")], "NaN");
            assert!(csv.values(row, "p_").iter().all(|v| v.is_nan()));
        }
    }
}

#[test]
fn whole_block_rows_use_block_multiples() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_preset(dir.path(), "two_user_orthogonal", "\n[prb]\nprb_size = 2.5\n");
    let out = netslice(&["run", path.to_str().unwrap(), "-o", "-"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let csv = Csv::parse(&stdout(&out));
    let method = csv.col("method");
    let prb: Vec<_> = csv.rows.iter().filter(|r| r[method] == PRB_METHOD).collect();
    assert_eq!(prb.len(), 5);
    for row in prb {
        assert_eq!(row[csv.col("regime")], "SetIV");
        let b = csv.values(row, "b_")[0];
        assert!((b / 2.5 - (b / 2.5).round()).abs() < 1e-9, "{b}");
    }
}

#[test]
fn repeated_runs_match_except_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_preset(dir.path(), "two_user_orthogonal", "");
    let strip = |out: Output| -> Vec<String> {
        stdout(&out)
            .lines()
            .map(|l| l[..l.rfind(',').unwrap()].to_string())
            .collect()
    };
    let a = strip(netslice(&["run", path.to_str().unwrap(), "-o", "-"]));
    let b = strip(netslice(&["run", path.to_str().unwrap(), "-o", "-"]));
    assert_eq!(a.len(), 1 + 2 * 5 * 2);
    assert_eq!(a, b);
}
