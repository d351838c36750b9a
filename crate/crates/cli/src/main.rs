use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nearfocus::harness::{self, Output};
use nearfocus::{Architecture, Scenario};

#[derive(Parser)]
#[command(name = "nearfocus", version, about = "Near-field beam focusing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every output listed in the scenario file.
    Run(RunArgs),
    /// Sum-rate versus number of randomly placed users.
    Sweep(SweepArgs),
    /// Normalized power maps on the xz-plane.
    Map(RunArgs),
    /// Print region boundaries and element counts.
    Info { scenario: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Directory for CSV artifacts, report and manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    arch: Option<ArchArg>,
    /// Also design every architecture from planar-wavefront channels.
    #[arg(long)]
    far_field_baseline: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated user counts, overriding the scenario.
    #[arg(long, value_delimiter = ',')]
    users: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Fd,
    Hybrid,
    Dma,
    All,
}

impl ArchArg {
    fn architectures(self) -> Vec<Architecture> {
        match self {
            ArchArg::Fd => vec![Architecture::FullyDigital],
            ArchArg::Hybrid => vec![Architecture::Hybrid],
            ArchArg::Dma => vec![Architecture::Dma],
            ArchArg::All => Architecture::ALL.to_vec(),
        }
    }
}

fn load(path: &Path) -> Result<(Scenario, Vec<u8>)> {
    let text = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let scenario = harness::load_scenario(path)?;
    Ok((scenario, text))
}

fn apply_overrides(mut s: Scenario, args: &RunArgs) -> Scenario {
    if let Some(seed) = args.seed {
        s = s.with_seed(seed);
    }
    if let Some(arch) = args.arch {
        s.architectures = arch.architectures();
        if let [single] = s.architectures[..] {
            s.power_map.architecture = single;
        }
    }
    s.far_field_baseline |= args.far_field_baseline;
    s
}

fn execute(args: &RunArgs, outputs: Option<Vec<Output>>, users: Option<Vec<usize>>) -> Result<()> {
    let (scenario, text) = load(&args.scenario)?;
    let mut scenario = apply_overrides(scenario, args);
    if let Some(counts) = users {
        if counts.is_empty() || counts.contains(&0) {
            bail!("--users needs positive counts");
        }
        scenario.sweep.user_counts = counts;
    }
    let needs_users = outputs
        .as_deref()
        .unwrap_or(&scenario.outputs)
        .iter()
        .any(|o| *o != Output::SumRateTable);
    if needs_users && scenario.users.is_empty() {
        bail!("{} lists no users", args.scenario.display());
    }
    let (_, written) = match outputs {
        Some(o) => harness::run_outputs(&scenario, &text, &o, &args.out)?,
        None => harness::run_scenario(&scenario, &text, &args.out)?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn info(path: &Path) -> Result<()> {
    let (s, _) = load(path)?;
    println!("scenario: {}", s.name);
    println!("wavelength: {:.6e} m", s.wavelength());
    println!("aperture diameter: {:.6e} m", s.aperture_diameter());
    println!("fresnel distance d_N: {:.6e} m", s.fresnel_distance());
    println!("fraunhofer distance d_F: {:.6e} m", s.fraunhofer_distance());
    for arch in Architecture::ALL {
        let (rows, cols) = s.element_counts(arch);
        println!("{arch}: {rows} x {cols} = {} elements", rows * cols);
    }
    println!("hybrid rf chains: {}", s.n_rf);
    println!("users: {}", s.users.len());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => execute(&args, None, None),
        Command::Sweep(args) => execute(&args.run, Some(vec![Output::SumRateTable]), args.users),
        Command::Map(args) => execute(&args, Some(vec![Output::PowerMap]), None),
        Command::Info { scenario } => info(&scenario),
    }
}
