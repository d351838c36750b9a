//! CSV artifacts, text reports and run manifests.
//!
//! Every CSV starts with `#` comment rows describing its contents, followed by
//! a header row. Floats are written as `{:.9e}`, which is locale-independent
//! and reloads to within 1e-9 relative.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::experiments::{PowerMap, RateCurve, SumRateTable};
use super::scenario::{Architecture, Scenario};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.9e}")
}

/// Anything that can be written as a CSV artifact.
pub trait Tabular {
    /// Free-text lines emitted as `# ...` before the header.
    fn description(&self) -> Vec<String>;
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<Cell>>;
}

impl Tabular for RateCurve {
    fn description(&self) -> Vec<String> {
        vec![
            "rate curve: achievable rate per user stream along a probe line".into(),
            format!("probe x [m] = {}, y [m] = {}", format_float(self.probe.x), format_float(self.probe.y)),
            "units: z [m], rates [bit/s/Hz]".into(),
        ]
    }

    fn header(&self) -> Vec<String> {
        std::iter::once("z_m".to_string())
            .chain(self.series.iter().map(|s| format!("{}_user{}", s.design, s.user)))
            .collect()
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.probe
            .z
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                std::iter::once(Cell::Float(z))
                    .chain(self.series.iter().map(|s| Cell::Float(s.rates[k])))
                    .collect()
            })
            .collect()
    }
}

/// All users' maps in long format.
pub struct PowerMaps<'a>(pub &'a [PowerMap]);

impl Tabular for PowerMaps<'_> {
    fn description(&self) -> Vec<String> {
        vec![
            "power map: |a(p)^H w_m|^2 / ||a(p)||^2 on the y = 0 plane".into(),
            "units: x [m], z [m], normalized power [W]".into(),
        ]
    }

    fn header(&self) -> Vec<String> {
        ["design", "user", "x_m", "z_m", "normalized_power"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.0
            .iter()
            .flat_map(|map| {
                map.z.iter().enumerate().flat_map(move |(iz, &z)| {
                    map.x.iter().enumerate().map(move |(ix, &x)| {
                        vec![
                            Cell::Text(map.design.clone()),
                            Cell::Int(map.user),
                            Cell::Float(x),
                            Cell::Float(z),
                            Cell::Float(map.value(ix, iz)),
                        ]
                    })
                })
            })
            .collect()
    }
}

impl Tabular for SumRateTable {
    fn description(&self) -> Vec<String> {
        vec![
            "sum-rate sweep: users added in a fixed seeded order".into(),
            "units: sum_rate [bit/s/Hz]".into(),
        ]
    }

    fn header(&self) -> Vec<String> {
        ["users", "design", "sum_rate"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.rows
            .iter()
            .map(|r| vec![Cell::Int(r.users), Cell::Text(r.design.clone()), Cell::Float(r.sum_rate)])
            .collect()
    }
}

/// Writes `table` to `path`, preceded by `# key: value` context lines.
pub fn emit_csv(table: &impl Tabular, context: &[(String, String)], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    for line in table.description() {
        writeln!(out, "# {line}")?;
    }
    for (k, v) in context {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(table.header())?;
    for row in table.rows() {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV artifact read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedCsv {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl LoadedCsv {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn float_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::Domain(format!("no column `{name}`")))?;
        self.records
            .iter()
            .map(|r| {
                r[idx]
                    .parse::<f64>()
                    .map_err(|e| Error::Domain(format!("column `{name}`: {e}")))
            })
            .collect()
    }
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<LoadedCsv> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let comments = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.iter().map(String::from).collect();
    let records = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(LoadedCsv {
        comments,
        header,
        records,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub architectures: Vec<Architecture>,
    pub far_field_baseline: bool,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(scenario: &Scenario, scenario_text: &[u8], artifacts: Vec<String>) -> Self {
        Manifest {
            tool: "nearfocus",
            version: env!("CARGO_PKG_VERSION"),
            scenario: scenario.name.clone(),
            scenario_sha256: sha256_hex(scenario_text),
            seed: scenario.seed,
            architectures: scenario.architectures.clone(),
            far_field_baseline: scenario.far_field_baseline,
            artifacts,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Domain(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Results of one scenario run, for the text report.
#[derive(Clone, Debug, Default)]
pub struct RunResults {
    pub rate_curve: Option<RateCurve>,
    pub power_maps: Option<Vec<PowerMap>>,
    pub sum_rates: Option<SumRateTable>,
}

/// Writes a plain-text summary of a run.
pub fn emit_report(scenario: &Scenario, results: &RunResults, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "scenario: {}", scenario.name)?;
    writeln!(out, "carrier frequency [Hz]: {}", format_float(scenario.carrier_frequency))?;
    writeln!(out, "wavelength [m]: {}", format_float(scenario.wavelength()))?;
    writeln!(out, "aperture diameter [m]: {}", format_float(scenario.aperture_diameter()))?;
    writeln!(out, "fresnel distance d_N [m]: {}", format_float(scenario.fresnel_distance()))?;
    writeln!(out, "fraunhofer distance d_F [m]: {}", format_float(scenario.fraunhofer_distance()))?;
    for arch in &scenario.architectures {
        let (r, c) = scenario.element_counts(*arch);
        writeln!(out, "{arch} elements: {r} x {c}")?;
    }
    for (m, u) in scenario.users.iter().enumerate() {
        let p = u.position();
        writeln!(
            out,
            "user {m} at [m]: ({}, {}, {})",
            format_float(p[0]),
            format_float(p[1]),
            format_float(p[2])
        )?;
    }

    if let Some(curve) = &results.rate_curve {
        writeln!(out, "\nrate curve peaks:")?;
        for s in &curve.series {
            let (k, r) = s
                .rates
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
            writeln!(
                out,
                "  {} user {}: {} bit/s/Hz at z = {} m",
                s.design,
                s.user,
                format_float(r),
                format_float(curve.probe.z[k])
            )?;
        }
    }
    if let Some(maps) = &results.power_maps {
        writeln!(out, "\npower map peaks:")?;
        for m in maps {
            let (ix, iz) = m.argmax();
            writeln!(
                out,
                "  {} user {}: {} at x = {} m, z = {} m",
                m.design,
                m.user,
                format_float(m.max()),
                format_float(m.x[ix]),
                format_float(m.z[iz])
            )?;
        }
    }
    if let Some(table) = &results.sum_rates {
        writeln!(out, "\nsum-rate sweep [bit/s/Hz]:")?;
        for r in &table.rows {
            writeln!(out, "  M = {:>3}  {:<16} {}", r.users, r.design, format_float(r.sum_rate))?;
        }
    }
    out.flush()?;
    Ok(())
}
