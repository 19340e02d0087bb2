use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use splatflow::arch::{ContentionModel, InterfaceKind, KernelCostProfile, Method, PlioSpec, ProfileSource};
use splatflow::kernels::CameraParams;
use splatflow::sim::{RunSettings, SimMode, Workload};
use splatflow::workload::{
    find_presets, generate, load_camera, run_presets, verify, ExperimentOptions, ExperimentPreset, ExperimentReport,
    GaussianFile, SWEEP_PRESET,
};

#[derive(Parser)]
#[command(name = "splatflow", version, about = "Gaussian feature kernels on a simulated tile mesh")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a file of random Gaussians.
    Gen {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the staged kernels against the scalar reference on every record.
    Verify {
        file: PathBuf,
        /// Camera JSON; the built-in view when omitted.
        #[arg(long)]
        camera: Option<PathBuf>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Simulate one preset or an explicit method/unit configuration.
    Run(RunArgs),
    /// Simulate the full preset grid.
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value = "sweep")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reformat a JSON experiment report.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Shipped preset such as `window-8`, or `sweep`.
    #[arg(long, conflicts_with_all = ["method", "units"])]
    preset: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    /// Unit counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    units: Vec<usize>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// `calibrated`, `analytic`, or a TOML profile file for the run's method.
    #[arg(long, default_value = "calibrated")]
    profile: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    /// Stream FIFO depth in 32-bit words.
    #[arg(long)]
    fifo_depth: Option<usize>,
    /// Input bandwidth cap in MB/s.
    #[arg(long)]
    external_cap: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussians per unit.
    #[arg(long, default_value_t = 100)]
    gaussians: usize,
    /// Force an interface instead of the method's own.
    #[arg(long)]
    interface: Option<InterfaceKind>,
    /// Draw kernel costs from each kernel's min-max range.
    #[arg(long)]
    jitter: bool,
    /// Ignore interface transfer cycles.
    #[arg(long)]
    no_transfer: bool,
    /// Disable the contention model beyond saturation.
    #[arg(long)]
    no_contention: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Event,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Markdown,
    Csv,
    KernelsCsv,
    Json,
}

impl SimArgs {
    fn modes(&self) -> Vec<SimMode> {
        match self.mode {
            ModeArg::Analytic => vec![SimMode::Analytic],
            ModeArg::Event => vec![SimMode::Event],
            ModeArg::Both => vec![SimMode::Analytic, SimMode::Event],
        }
    }

    /// Shared options; a TOML `--profile` replaces the profile of the method
    /// it covers.
    fn options(&self, presets: &mut [ExperimentPreset]) -> Result<ExperimentOptions> {
        let mut base = RunSettings::calibrated();
        base.fifo_depth_words = self.fifo_depth;
        base.interface = self.interface;
        base.jitter = self.jitter;
        base.charge_transfer = !self.no_transfer;
        if self.no_contention {
            base.contention = ContentionModel::none();
        }
        if let Some(cap) = self.external_cap {
            if cap.is_nan() || cap <= 0.0 {
                bail!("--external-cap must be positive");
            }
            base.plio = PlioSpec { external_cap_bytes_per_sec: Some(cap * 1e6), ..base.plio };
        }
        let mut options = ExperimentOptions { base, modes: self.modes(), ..ExperimentOptions::default() };
        let source = match self.profile.parse::<ProfileSource>() {
            Ok(source) => source,
            Err(_) => {
                let path = Path::new(&self.profile);
                let text = fs::read_to_string(path).with_context(|| format!("reading profile {}", path.display()))?;
                let profile = KernelCostProfile::from_toml(&text)?;
                let method = presets
                    .iter()
                    .map(|p| p.method)
                    .find(|m| profile.covers(m.graph()).is_ok())
                    .with_context(|| format!("profile {} covers none of the requested methods", path.display()))?;
                options.profile_overrides.insert(method, profile);
                ProfileSource::Calibrated
            }
        };
        for p in presets.iter_mut() {
            p.profile = source;
            p.seed = self.seed;
            p.workload = Workload::PerUnit(self.gaussians);
        }
        Ok(options)
    }
}

fn run_with(name: &str, mut presets: Vec<ExperimentPreset>, sim: &SimArgs, out: Option<&Path>) -> Result<()> {
    if sim.gaussians == 0 {
        bail!("--gaussians must be at least 1");
    }
    let options = sim.options(&mut presets)?;
    let report = run_presets(name, &presets, &options)?;
    print!("{}\n{}", report.kernel_table_markdown(), report.summary_markdown());
    if let Some(dir) = out {
        for path in report.write_to(dir)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { count, seed, out } => {
            if count == 0 {
                bail!("--count must be at least 1");
            }
            generate(count, seed).write(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {count} Gaussians to {}", out.display());
        }
        Command::Verify { file, camera, json } => {
            let data = GaussianFile::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let cam = match camera {
                Some(path) => load_camera(&path).with_context(|| format!("reading {}", path.display()))?,
                None => CameraParams::default_view(),
            };
            let report = verify(&data, &cam);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for bad in &report.invalid {
                    println!("record {} (byte {}): invalid input: {}", bad.index, bad.offset, bad.error);
                }
                for f in &report.fields {
                    println!("{:<10} max deviation {:.3e}", f.field, f.max_deviation);
                }
                println!(
                    "{}: {} of {} records checked, max deviation {:.3e} (tolerance {:.0e}), {} flag mismatches",
                    if report.passed { "PASS" } else { "FAIL" },
                    report.checked,
                    report.records,
                    report.max_deviation,
                    report.tolerance,
                    report.flag_mismatches
                );
            }
            if !report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Run(args) => {
            let (name, presets) = match (&args.preset, args.method) {
                (Some(name), _) => (name.clone(), find_presets(name)?),
                (None, Some(method)) => {
                    let mut preset = ExperimentPreset::new(method, args.units[0]);
                    preset.unit_counts = args.units.clone();
                    if args.units.len() > 1 {
                        preset.name = method.to_string();
                    }
                    (preset.name.clone(), vec![preset])
                }
                (None, None) => bail!("give either --preset or --method"),
            };
            run_with(&name, presets, &args.sim, args.out.as_deref())?;
        }
        Command::Sweep { sim, name, out } => {
            run_with(&name, find_presets(SWEEP_PRESET)?, &sim, out.as_deref())?;
        }
        Command::Report { input, format } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let report = ExperimentReport::from_json(&text).with_context(|| format!("parsing {}", input.display()))?;
            match format {
                ReportFormat::Markdown => print!("{}\n{}", report.kernel_table_markdown(), report.summary_markdown()),
                ReportFormat::Csv => print!("{}", report.summary_csv()?),
                ReportFormat::KernelsCsv => print!("{}", report.kernels_csv()?),
                ReportFormat::Json => println!("{}", report.to_json()?),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
