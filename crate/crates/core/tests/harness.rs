use std::path::{Path, PathBuf};

use nearfocus::harness::{
    design, load_scenario, place_users, rate_curve_for, read_csv, run_outputs, run_sum_rate_sweep,
    true_sum_rate, Output, ProbeLine,
};
use nearfocus::{Architecture, Scenario};

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
        .0
}

fn nearest(z: &[f64], target: f64) -> usize {
    z.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, &x)| if (x - target).abs() < b.1 { (i, (x - target).abs()) } else { b })
        .0
}

#[test]
fn shipped_scenarios_parse() {
    for name in ["single_user.toml", "two_user.toml", "sweep.toml"] {
        let s = load_scenario(shipped(name)).unwrap();
        assert_eq!(s.element_counts(Architecture::FullyDigital).0, s.element_counts(Architecture::Dma).0);
    }
}

#[test]
fn two_user_curves_peak_at_their_focal_points() {
    let s = load_scenario(shipped("two_user.toml")).unwrap();
    let probe = ProbeLine::from_scenario(&s);
    let designs = vec![design(&s, Architecture::FullyDigital, false).unwrap()];
    let curve = rate_curve_for(&designs, &s, &probe).unwrap();
    for (m, u) in s.users.iter().enumerate() {
        let rates = &curve.series("fd", m).unwrap().rates;
        let k = argmax(rates);
        let focal = nearest(&probe.z, u.position()[2]);
        assert!(k.abs_diff(focal) <= 1, "user {m}: peak {} vs focus {}", probe.z[k], u.position()[2]);
    }
}

#[test]
fn fully_digital_sum_rate_dominates_hybrid() {
    let s = load_scenario(shipped("two_user.toml")).unwrap();
    let fd = true_sum_rate(&design(&s, Architecture::FullyDigital, false).unwrap(), &s).unwrap();
    let hy = true_sum_rate(&design(&s, Architecture::Hybrid, false).unwrap(), &s).unwrap();
    assert!(fd >= hy - 1e-6, "{fd} vs {hy}");
}

fn sweep_scenario() -> Scenario {
    let mut s = load_scenario(shipped("sweep.toml")).unwrap();
    s.architectures = vec![Architecture::FullyDigital, Architecture::Hybrid];
    s.far_field_baseline = false;
    s
}

#[test]
fn sweep_grows_with_users_and_matches_single_user_solve() {
    let s = sweep_scenario();
    let table = run_sum_rate_sweep(&s, &[1, 2, 3]).unwrap();
    for label in ["fd", "hybrid"] {
        let col = table.column(label);
        assert_eq!(col.iter().map(|c| c.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(col.windows(2).all(|w| w[1].1 > w[0].1), "{label}: {col:?}");
    }
    let one = s.with_users(place_users(&s, 1, s.seed).unwrap());
    let direct = true_sum_rate(&design(&one, Architecture::FullyDigital, false).unwrap(), &one).unwrap();
    assert_eq!(table.column("fd")[0].1, direct);
}

#[test]
fn run_writes_reloadable_artifacts() {
    let mut s = load_scenario(shipped("two_user.toml")).unwrap();
    s.architectures = vec![Architecture::FullyDigital];
    s.power_map.nx = 21;
    s.power_map.nz = 21;
    let text = std::fs::read(shipped("two_user.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, written) = run_outputs(&s, &text, &[Output::RateCurve, Output::PowerMap], dir.path()).unwrap();
    let names: Vec<_> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["rate_curve.csv", "power_map.csv", "report.txt", "manifest.json"]);

    let map = read_csv(dir.path().join("power_map.csv")).unwrap();
    assert_eq!(map.records.len(), 2 * 2 * 21 * 21);
    assert!(map.float_column("normalized_power").unwrap().iter().all(|v| v.is_finite() && *v >= 0.0));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["scenario_sha256"].as_str().unwrap().len(), 64);
}
