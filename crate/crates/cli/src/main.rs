use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gridsched_cli::config::{ExperimentConfig, ReportFormat};
use gridsched_cli::study;
use gridsched_core::scheduler::{CaesMode, Variant};
use gridsched_core::{load_case, load_scenarios, validate_case};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gridsched",
    about = "Day-ahead energy and reserve scheduling over a linearized AC network with wind and CAES",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Dc,
    LacLossless,
    LacFull,
    TlLac,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Dc => Variant::Dc,
            VariantArg::LacLossless => Variant::LacLossless,
            VariantArg::LacFull => Variant::LacFull,
            VariantArg::TlLac => Variant::TlLac,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CaesModeArg {
    None,
    Gm,
    Tbm,
}

impl From<CaesModeArg> for CaesMode {
    fn from(m: CaesModeArg) -> Self {
        match m {
            CaesModeArg::None => CaesMode::None,
            CaesModeArg::Gm => CaesMode::Gm,
            CaesModeArg::Tbm => CaesMode::Tbm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Both => ReportFormat::Both,
        }
    }
}

#[derive(Args)]
struct CommonOpts {
    /// Case file.
    case: PathBuf,
    /// Wind scenario file.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Storage treatment for the case's CAES units.
    #[arg(long, value_enum, default_value = "tbm")]
    caes_mode: CaesModeArg,
    /// Loss blocks per line (L).
    #[arg(long, default_value_t = 2)]
    loss_blocks: usize,
    /// Apparent-power polygon segments (R).
    #[arg(long, default_value_t = 12)]
    polygon: usize,
    /// Global angle cap, radians.
    #[arg(long, default_value_t = 0.6)]
    theta_max: f64,
    /// Sign-ambiguity tolerance for the two-level extraction, radians.
    #[arg(long, default_value_t = 1e-4)]
    sign_tolerance: f64,
    /// Margin multiplier on first-level |theta| for adaptive caps.
    #[arg(long, default_value_t = 1.25)]
    margin: f64,
    /// Floor for adaptive caps, radians.
    #[arg(long, default_value_t = 0.05)]
    floor: f64,
    /// Fix scenario-scope signs too (not only day-ahead ones).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    fix_scenario_signs: bool,
    /// Relative MIP gap.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Solver time limit per solve, seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    /// Solver threads.
    #[arg(long, default_value_t = 1)]
    threads: u32,
    /// Report directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Seed for the synthetic load perturbation.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative amplitude of the load perturbation (e.g. 0.05 for +-5%).
    #[arg(long)]
    perturb: Option<f64>,
    /// Omit wall-clock data so repeated runs emit identical bytes.
    #[arg(long, default_value_t = false)]
    redact_timings: bool,
}

impl CommonOpts {
    fn to_config(&self, variants: Vec<Variant>) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(&self.case);
        config.scenario_path = self.scenarios.clone();
        config.variants = variants;
        config.caes_mode = self.caes_mode.into();
        config.lin.loss_blocks = self.loss_blocks;
        config.lin.polygon_segments = self.polygon;
        config.lin.theta_max = self.theta_max;
        config.lin.sign_tolerance = self.sign_tolerance;
        config.lin.theta_max_margin = self.margin;
        config.lin.theta_max_floor = self.floor;
        config.lin.fix_scenario_signs = self.fix_scenario_signs;
        config.limits.mip_gap = self.gap;
        config.limits.time_limit = self.time_limit;
        config.limits.threads = self.threads;
        config.out_dir = self.out_dir.clone();
        config.format = self.format.into();
        config.seed = self.seed;
        config.perturb_loads = self.perturb;
        config.redact_timings = self.redact_timings;
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a case (and optionally a scenario file) against every invariant.
    Validate {
        case: PathBuf,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Solve one variant and write a single-run report.
    Solve {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_enum, default_value = "tl-lac")]
        variant: VariantArg,
    },
    /// Run one of the study designs.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Export the assembled model as CPLEX-LP text.
    ExportLp {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_enum, default_value = "lac-full")]
        variant: VariantArg,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Solve several network variants on identical data and compare them.
    Variants {
        #[command(flatten)]
        common: CommonOpts,
        /// Variants to run, in order.
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = [VariantArg::Dc, VariantArg::LacFull, VariantArg::TlLac])]
        variants: Vec<VariantArg>,
    },
    /// No-storage vs generic vs thermodynamic storage, same variant.
    Caes {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_enum, default_value = "tl-lac")]
        variant: VariantArg,
    },
    /// Re-price the generic-model storage plan under the step curves.
    Replay {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_enum, default_value = "tl-lac")]
        variant: VariantArg,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(all_pass) => std::process::exit(if all_pass { 0 } else { 1 }),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { case, scenarios } => {
            let loaded = load_case(&case)?;
            let diagnostics = validate_case(&loaded);
            for d in &diagnostics {
                println!("diagnostic: {d}");
            }
            if let Some(path) = scenarios {
                let set = load_scenarios(&path, &loaded)?;
                println!(
                    "scenarios: {} loaded, renormalization factor {}",
                    set.len(),
                    set.renormalization
                );
            }
            if diagnostics.is_empty() {
                println!("{}: ok", loaded.name);
                Ok(true)
            } else {
                Ok(false)
            }
        }
        Command::Solve { common, variant } => {
            let config = common.to_config(vec![variant.into()]);
            let ctx = study::load_context(&config)?;
            let report = study::run_solve(&ctx);
            finish(report, "solve")
        }
        Command::Study(study_cmd) => match study_cmd {
            StudyCommand::Variants { common, variants } => {
                if variants.len() < 2 {
                    bail!("a variant study needs at least two variants");
                }
                let config = common.to_config(variants.into_iter().map(Into::into).collect());
                let ctx = study::load_context(&config)?;
                let report = study::run_variant_study(&ctx);
                finish(report, "study_variants")
            }
            StudyCommand::Caes { common, variant } => {
                let config = common.to_config(vec![variant.into()]);
                let ctx = study::load_context(&config)?;
                let report = study::run_caes_study(&ctx)?;
                finish(report, "study_caes")
            }
            StudyCommand::Replay { common, variant } => {
                let config = common.to_config(vec![variant.into()]);
                let ctx = study::load_context(&config)?;
                let report = study::run_gm_replay(&ctx)?;
                finish(report, "study_replay")
            }
        },
        Command::ExportLp {
            common,
            variant,
            out,
        } => {
            let config = common.to_config(vec![variant.into()]);
            let ctx = study::load_context(&config)?;
            study::run_export_lp(&ctx, &out)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn finish(report: gridsched_cli::Report, stem: &str) -> Result<bool> {
    let paths = report.emit(stem)?;
    for run in &report.runs {
        println!(
            "run {}: {} objective {} audits {}",
            run.label,
            run.status,
            run.objective
                .map(|o| format!("{o:.1}"))
                .unwrap_or_else(|| "-".into()),
            if run.audits_pass { "pass" } else { "FAIL" },
        );
    }
    for check in &report.checks {
        println!(
            "check {}: {} ({})",
            check.name,
            if check.pass { "pass" } else { "FAIL" },
            check.detail
        );
    }
    for path in paths {
        println!("report: {}", path.display());
    }
    Ok(report.all_pass())
}
