//! Scenario-driven experiments and their on-disk artifacts.

pub mod experiments;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use experiments::{
    design, place_users, power_maps_for, rate_curve_for, rates_at, run_power_map, run_rate_curve,
    run_sum_rate_sweep, scenario_designs, true_sum_rate, Design, PowerMap, ProbeLine, RateCurve,
    RateSeries, SumRateTable, SweepRow,
};
pub use output::{emit_csv, emit_report, read_csv, LoadedCsv, Manifest, PowerMaps, RunResults, Tabular};
pub use scenario::{dbm_to_watts, load_scenario, parse_scenario, Architecture, Output, Scenario};

use crate::error::Result;

pub const RATE_CURVE_FILE: &str = "rate_curve.csv";
pub const POWER_MAP_FILE: &str = "power_map.csv";
pub const SUM_RATE_FILE: &str = "sum_rate.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

fn context(scenario: &Scenario, scenario_hash: &str) -> Vec<(String, String)> {
    vec![
        ("scenario".into(), scenario.name.clone()),
        ("scenario_sha256".into(), scenario_hash.into()),
        ("seed".into(), scenario.seed.to_string()),
    ]
}

/// Runs the requested outputs of `scenario` and writes their CSVs, a text
/// report and a manifest into `out_dir`. Returns the written paths.
pub fn run_outputs(
    scenario: &Scenario,
    scenario_text: &[u8],
    outputs: &[Output],
    out_dir: impl AsRef<Path>,
) -> Result<(RunResults, Vec<PathBuf>)> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let hash = output::sha256_hex(scenario_text);
    let ctx = context(scenario, &hash);
    let mut results = RunResults::default();
    let mut written = Vec::new();

    if outputs.contains(&Output::RateCurve) {
        let curve = run_rate_curve(scenario, &ProbeLine::from_scenario(scenario))?;
        let path = out_dir.join(RATE_CURVE_FILE);
        emit_csv(&curve, &ctx, &path)?;
        written.push(path);
        results.rate_curve = Some(curve);
    }
    if outputs.contains(&Output::PowerMap) {
        let maps = run_power_map(scenario)?;
        let path = out_dir.join(POWER_MAP_FILE);
        emit_csv(&PowerMaps(&maps), &ctx, &path)?;
        written.push(path);
        results.power_maps = Some(maps);
    }
    if outputs.contains(&Output::SumRateTable) {
        let table = run_sum_rate_sweep(scenario, &scenario.sweep.user_counts)?;
        let path = out_dir.join(SUM_RATE_FILE);
        emit_csv(&table, &ctx, &path)?;
        written.push(path);
        results.sum_rates = Some(table);
    }

    let report = out_dir.join(REPORT_FILE);
    emit_report(scenario, &results, &report)?;
    written.push(report);

    let names = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = out_dir.join(MANIFEST_FILE);
    Manifest::new(scenario, scenario_text, names).write(&manifest)?;
    written.push(manifest);
    Ok((results, written))
}

/// Runs every output listed in the scenario, or a rate curve if none is.
pub fn run_scenario(scenario: &Scenario, scenario_text: &[u8], out_dir: impl AsRef<Path>) -> Result<(RunResults, Vec<PathBuf>)> {
    let outputs = if scenario.outputs.is_empty() {
        vec![Output::RateCurve]
    } else {
        scenario.outputs.clone()
    };
    run_outputs(scenario, scenario_text, &outputs, out_dir)
}
