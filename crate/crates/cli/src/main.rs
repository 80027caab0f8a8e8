//! Command-line front end: reproduce the built-in reference results, average
//! ensembles, solve inverse temperatures, compare the two ensembles, and run
//! family sweeps. Results go to stdout as a table and, on request, to JSON
//! (`--json`) and CSV (`--csv`) files.
//!
//! Exit codes: 0 success, 1 domain/feasibility/tolerance failure, 2 internal
//! or usage error.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ensembles::canonical::solve_beta;
use ensembles::compare::{
    compare, convergence_sweep, ComparisonReport, EnergyRule, SpectrumFamily,
};
use ensembles::microcanonical::{
    analytic_average_3, grid_average_oracle, mcmc_average, microcanonical_average, sample_manifold,
    AverageMethod, EnsembleAverage, EnsembleSpec, Measure, SamplerSettings,
};
use ensembles::reference::{run_all_reference_cases, CaseReport, CheckKind};
use ensembles::spectrum::Spectrum;
use ensembles::EnsembleError;

const SCHEMA_VERSION: u32 = 1;
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "ensembles",
    version,
    about = "Microcanonical vs canonical ensemble averaging for discrete spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the full result as JSON to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Write a CSV summary to this path.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Seed for stochastic commands; defaulted and echoed in every output.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Suppress the human-readable report on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Recompute the built-in three-level reference cases and verify every
    /// value against its frozen tolerance.
    Reproduce {
        /// Scale factor on all tolerances (0 turns every check exact).
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// Microcanonical ensemble average of the occupation probabilities.
    Average {
        #[command(flatten)]
        target: TargetArgs,
        /// Averaging route; auto dispatches on the spectrum size.
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = MeasureArg::AmplitudeUniform)]
        measure: MeasureArg,
        /// Grid points per axis (grid method only).
        #[arg(long, default_value_t = 1000)]
        resolution: usize,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// Also dump the retained sample stream as CSV, one row per sample.
        #[arg(long, value_name = "PATH")]
        dump_samples: Option<PathBuf>,
    },
    /// Solve the inverse temperature whose canonical mean energy matches.
    Beta {
        #[command(flatten)]
        target: TargetArgs,
    },
    /// Average both ensembles at one energy and report their agreement.
    Compare {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, value_enum, default_value_t = MeasureArg::AmplitudeUniform)]
        measure: MeasureArg,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Run a comparison sweep over a spectrum family described by a JSON
    /// config file (family, n_values, energy_rule, optional measure and
    /// sampler settings).
    Sweep {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
}

#[derive(Args)]
struct TargetArgs {
    /// Energy levels, comma separated (e.g. 0,5,8).
    #[arg(
        short = 's',
        long = "spectrum",
        value_parser = parse_levels,
        required_unless_present = "spec_file",
        conflicts_with = "spec_file"
    )]
    spectrum: Option<Levels>,

    /// JSON file holding the levels as an array of numbers.
    #[arg(long, value_name = "PATH")]
    spec_file: Option<PathBuf>,

    /// Total energy.
    #[arg(short = 'e', long)]
    energy: f64,
}

impl TargetArgs {
    fn levels(&self) -> anyhow::Result<Vec<f64>> {
        if let Some(Levels(levels)) = &self.spectrum {
            return Ok(levels.clone());
        }
        let path = self.spec_file.as_ref().expect("clap enforces one source");
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Args)]
struct SamplerArgs {
    /// Independent chains.
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Discarded steps per chain before retention starts.
    #[arg(long, default_value_t = 10_000)]
    burn_in: usize,
    /// Retained samples per chain.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Raw steps between retained samples.
    #[arg(long, default_value_t = 10)]
    thinning: usize,
}

impl SamplerArgs {
    fn settings(&self, seed: u64) -> SamplerSettings {
        SamplerSettings {
            seed,
            chains: self.chains,
            burn_in: self.burn_in,
            samples: self.samples,
            thinning: self.thinning,
        }
    }
}

#[derive(Clone)]
struct Levels(Vec<f64>);

fn parse_levels(s: &str) -> Result<Levels, String> {
    let levels: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match levels {
        Ok(v) if v.len() >= 2 => Ok(Levels(v)),
        Ok(v) => Err(format!("need at least 2 levels, got {}", v.len())),
        Err(e) => Err(format!("invalid level list {s:?}: {e}")),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Auto,
    #[value(name = "analytic3")]
    Analytic3,
    Grid,
    Mcmc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    AmplitudeUniform,
    ProbabilityUniform,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::AmplitudeUniform => Measure::AmplitudeUniform,
            MeasureArg::ProbabilityUniform => Measure::ProbabilityUniform,
        }
    }
}

enum RunError {
    /// Infeasible input or a failed tolerance gate: exit 1.
    Domain(EnsembleError),
    /// Everything else (I/O, malformed files): exit 2.
    Internal(anyhow::Error),
}

impl From<EnsembleError> for RunError {
    fn from(e: EnsembleError) -> Self {
        RunError::Domain(e)
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Internal(e)
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Internal(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(RunError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(RunError::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

struct Sink<'a> {
    json: Option<&'a PathBuf>,
    csv: Option<&'a PathBuf>,
    quiet: bool,
}

impl Sink<'_> {
    fn emit<T: Serialize>(&self, value: &T, csv: &str) -> Result<(), RunError> {
        if let Some(path) = self.json {
            let text = output::json_string(value).map_err(RunError::Internal)?;
            output::write_text(path, &text).map_err(RunError::Internal)?;
        }
        if let Some(path) = self.csv {
            output::write_text(path, csv).map_err(RunError::Internal)?;
        }
        Ok(())
    }

    fn say(&self, text: &str) {
        if !self.quiet {
            println!("{text}");
        }
    }
}

fn run(cli: Cli) -> Result<bool, RunError> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let sink = Sink {
        json: cli.json.as_ref(),
        csv: cli.csv.as_ref(),
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Reproduce { tol_scale } => cmd_reproduce(&sink, tol_scale, seed),
        Command::Average {
            target,
            method,
            measure,
            resolution,
            sampler,
            dump_samples,
        } => cmd_average(
            &sink,
            &target,
            method,
            measure.into(),
            resolution,
            sampler.settings(seed),
            dump_samples.as_deref(),
        ),
        Command::Beta { target } => cmd_beta(&sink, &target, seed),
        Command::Compare {
            target,
            measure,
            sampler,
        } => cmd_compare(&sink, &target, measure.into(), sampler.settings(seed)),
        Command::Sweep { config } => cmd_sweep(&sink, &config, cli.seed),
    }
}

// ---------------------------------------------------------------- reproduce

#[derive(Serialize)]
struct ReproduceOutput {
    schema: u32,
    command: &'static str,
    config: ReproduceConfig,
    cases: Vec<CaseReport>,
    all_pass: bool,
}

#[derive(Serialize)]
struct ReproduceConfig {
    tol_scale: f64,
    seed: u64,
}

fn cmd_reproduce(sink: &Sink, tol_scale: f64, seed: u64) -> Result<bool, RunError> {
    let cases = run_all_reference_cases(tol_scale)?;
    let all_pass = cases.iter().all(|c| c.all_pass);

    sink.say(&format!("config: tol_scale = {tol_scale}, seed = {seed}"));
    for case in &cases {
        sink.say(&format!("\nreference case {} (levels 0, 5, 8)", case.name));
        sink.say(&format!(
            "  {:<14} {:>12} {:>12} {:>11}  status",
            "check", "computed", "reference", "tolerance"
        ));
        for line in &case.lines {
            let gate = match line.kind {
                CheckKind::Within => format!("{:>11.6}", line.tolerance),
                CheckKind::AtMost => format!("{:>11}", "(bound)"),
            };
            sink.say(&format!(
                "  {:<14} {:>12.6} {:>12.6} {}  {}",
                line.label,
                line.computed,
                line.reference,
                gate,
                if line.pass { "pass" } else { "FAIL" }
            ));
        }
    }
    sink.say(if all_pass {
        "\nall reference checks passed"
    } else {
        "\nreference checks FAILED"
    });

    let mut csv = String::from("case,check,kind,computed,reference,tolerance,pass\n");
    for case in &cases {
        for line in &case.lines {
            let kind = match line.kind {
                CheckKind::Within => "within",
                CheckKind::AtMost => "at_most",
            };
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                case.name,
                line.label,
                kind,
                line.computed,
                line.reference,
                line.tolerance,
                line.pass
            ));
        }
    }
    sink.emit(
        &ReproduceOutput {
            schema: SCHEMA_VERSION,
            command: "reproduce",
            config: ReproduceConfig { tol_scale, seed },
            cases,
            all_pass,
        },
        &csv,
    )?;
    Ok(all_pass)
}

// ------------------------------------------------------------------ average

#[derive(Serialize)]
struct AverageOutput {
    schema: u32,
    command: &'static str,
    config: AverageConfig,
    result: AverageResult,
}

#[derive(Serialize)]
struct AverageConfig {
    spectrum: Vec<f64>,
    energy: f64,
    measure: Measure,
    method: &'static str,
    resolution: Option<usize>,
    sampler: SamplerSettings,
    seed: u64,
}

#[derive(Serialize)]
struct AverageResult {
    mean: Vec<f64>,
    stderr: Vec<f64>,
    method: AverageMethod,
    chain_disagreement: bool,
}

#[allow(clippy::too_many_arguments)]
fn cmd_average(
    sink: &Sink,
    target: &TargetArgs,
    method: MethodArg,
    measure: Measure,
    resolution: usize,
    sampler: SamplerSettings,
    dump_samples: Option<&std::path::Path>,
) -> Result<bool, RunError> {
    let levels = target.levels().map_err(RunError::Internal)?;
    let spectrum = Spectrum::new(levels.clone())?;
    let spec = EnsembleSpec::new(spectrum, target.energy, measure, sampler.clone())?;

    let avg: EnsembleAverage = match method {
        MethodArg::Auto => microcanonical_average(&spec)?,
        MethodArg::Analytic3 => analytic_average_3(&spec)?,
        MethodArg::Grid => grid_average_oracle(&spec, resolution)?,
        MethodArg::Mcmc => mcmc_average(&spec)?,
    };

    if let Some(path) = dump_samples {
        let mut csv = String::new();
        let n = spec.spectrum().len();
        csv.push_str(
            &(1..=n)
                .map(|i| format!("p_{i}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        csv.push('\n');
        for sample in sample_manifold(&spec)? {
            let user = spec.spectrum().to_user_order(sample.probs());
            csv.push_str(
                &user
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            csv.push('\n');
        }
        output::write_text(path, &csv).map_err(RunError::Internal)?;
    }

    let method_name = match method {
        MethodArg::Auto => "auto",
        MethodArg::Analytic3 => "analytic3",
        MethodArg::Grid => "grid",
        MethodArg::Mcmc => "mcmc",
    };
    let mean_user = spec.spectrum().to_user_order(avg.mean_probs.probs());
    let stderr_user = spec.spectrum().to_user_order(&avg.stderr);

    sink.say(&format!(
        "config: levels = {levels:?}, E = {}, measure = {}, method = {method_name}, {}",
        target.energy,
        measure_name(measure),
        sampler_summary(&sampler)
    ));
    sink.say(&format!("route: {:?}", avg.method));
    if avg.chain_disagreement {
        sink.say("warning: chains disagree beyond five pooled standard errors");
    }
    sink.say(&format!(
        "  {:<12} {:>12} {:>12}",
        "level", "mean", "stderr"
    ));
    for ((level, mean), stderr) in levels.iter().zip(&mean_user).zip(&stderr_user) {
        sink.say(&format!("  {level:<12} {mean:>12.6} {stderr:>12.2e}"));
    }

    let mut csv = String::from("level,mean,stderr\n");
    for ((level, mean), stderr) in levels.iter().zip(&mean_user).zip(&stderr_user) {
        csv.push_str(&format!("{level},{mean},{stderr}\n"));
    }
    sink.emit(
        &AverageOutput {
            schema: SCHEMA_VERSION,
            command: "average",
            config: AverageConfig {
                spectrum: levels,
                energy: target.energy,
                measure,
                method: method_name,
                resolution: (method == MethodArg::Grid).then_some(resolution),
                sampler: sampler.clone(),
                seed: sampler.seed,
            },
            result: AverageResult {
                mean: mean_user,
                stderr: stderr_user,
                method: avg.method,
                chain_disagreement: avg.chain_disagreement,
            },
        },
        &csv,
    )?;
    Ok(true)
}

fn measure_name(measure: Measure) -> &'static str {
    match measure {
        Measure::AmplitudeUniform => "amplitude_uniform",
        Measure::ProbabilityUniform => "probability_uniform",
    }
}

fn sampler_summary(s: &SamplerSettings) -> String {
    format!(
        "seed = {}, chains = {}, burn_in = {}, samples = {}, thinning = {}",
        s.seed, s.chains, s.burn_in, s.samples, s.thinning
    )
}

// --------------------------------------------------------------------- beta

#[derive(Serialize)]
struct BetaOutput {
    schema: u32,
    command: &'static str,
    config: BetaConfig,
    result: BetaResult,
}

#[derive(Serialize)]
struct BetaConfig {
    spectrum: Vec<f64>,
    energy: f64,
    seed: u64,
}

#[derive(Serialize)]
struct BetaResult {
    beta: f64,
    z: f64,
    probs: Vec<f64>,
    free_energy: Option<f64>,
}

fn cmd_beta(sink: &Sink, target: &TargetArgs, seed: u64) -> Result<bool, RunError> {
    let levels = target.levels().map_err(RunError::Internal)?;
    let spectrum = Spectrum::new(levels.clone())?;
    let sol = solve_beta(&spectrum, target.energy)?;
    let probs_user = spectrum.to_user_order(sol.probs.probs());

    sink.say(&format!(
        "config: levels = {levels:?}, E = {}, seed = {seed}",
        target.energy
    ));
    match sol.free_energy {
        Some(a) => sink.say(&format!(
            "beta = {:.6}   Z = {:.6}   A = {a:.6}",
            sol.beta, sol.z
        )),
        None => sink.say(&format!(
            "beta = {:.6}   Z = {:.6}   A undefined at beta = 0",
            sol.beta, sol.z
        )),
    }
    sink.say(&format!("  {:<12} {:>12}", "level", "prob"));
    for (level, p) in levels.iter().zip(&probs_user) {
        sink.say(&format!("  {level:<12} {p:>12.6}"));
    }

    let csv = format!(
        "beta,z,free_energy\n{},{},{}\n",
        sol.beta,
        sol.z,
        sol.free_energy.map_or(String::new(), |a| a.to_string())
    );
    sink.emit(
        &BetaOutput {
            schema: SCHEMA_VERSION,
            command: "beta",
            config: BetaConfig {
                spectrum: levels,
                energy: target.energy,
                seed,
            },
            result: BetaResult {
                beta: sol.beta,
                z: sol.z,
                probs: probs_user,
                free_energy: sol.free_energy,
            },
        },
        &csv,
    )?;
    Ok(true)
}

// ------------------------------------------------------------------ compare

#[derive(Serialize)]
struct CompareOutput {
    schema: u32,
    command: &'static str,
    config: CompareConfig,
    report: ComparisonReport,
}

#[derive(Serialize)]
struct CompareConfig {
    spectrum: Vec<f64>,
    energy: f64,
    measure: Measure,
    sampler: SamplerSettings,
    seed: u64,
}

fn comparison_csv(reports: &[&ComparisonReport]) -> String {
    let mut csv = String::from("n,max_rel_diff,l1_diff,beta,stderr_max\n");
    for r in reports {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.spectrum.len(),
            r.max_rel_diff,
            r.l1_diff,
            r.canon.beta,
            r.micro.stderr_max()
        ));
    }
    csv
}

fn print_report(sink: &Sink, r: &ComparisonReport) {
    let s = &r.spectrum;
    let levels = s.user_levels();
    let micro = s.to_user_order(r.micro.mean_probs.probs());
    let stderr = s.to_user_order(&r.micro.stderr);
    let canon = s.to_user_order(r.canon.probs.probs());
    sink.say(&format!(
        "  {:<10} {:>12} {:>10} {:>12} {:>10}",
        "level", "micro", "stderr", "canonical", "rel_diff"
    ));
    let mut rel_user: Vec<Option<f64>> = vec![None; levels.len()];
    for (sorted_pos, &rel) in r.per_component_rel.iter().enumerate() {
        rel_user[s.user_position(sorted_pos)] = rel;
    }
    for i in 0..levels.len() {
        let rel = rel_user[i].map_or("excluded".to_string(), |v| format!("{v:.6}"));
        sink.say(&format!(
            "  {:<10} {:>12.6} {:>10.2e} {:>12.6} {:>10}",
            levels[i], micro[i], stderr[i], canon[i], rel
        ));
    }
    sink.say(&format!(
        "  beta = {:.6}   max_rel_diff = {:.6}   l1_diff = {:.6}{}",
        r.canon.beta,
        r.max_rel_diff,
        r.l1_diff,
        if r.micro.chain_disagreement {
            "   [chain disagreement]"
        } else {
            ""
        }
    ));
}

fn cmd_compare(
    sink: &Sink,
    target: &TargetArgs,
    measure: Measure,
    sampler: SamplerSettings,
) -> Result<bool, RunError> {
    let levels = target.levels().map_err(RunError::Internal)?;
    let spectrum = Spectrum::new(levels.clone())?;
    let spec = EnsembleSpec::new(spectrum, target.energy, measure, sampler.clone())?;
    let report = compare(&spec)?;

    sink.say(&format!(
        "config: levels = {levels:?}, E = {}, measure = {}, {}",
        target.energy,
        measure_name(measure),
        sampler_summary(&sampler)
    ));
    print_report(sink, &report);

    let csv = comparison_csv(&[&report]);
    sink.emit(
        &CompareOutput {
            schema: SCHEMA_VERSION,
            command: "compare",
            config: CompareConfig {
                spectrum: levels,
                energy: target.energy,
                measure,
                sampler: sampler.clone(),
                seed: sampler.seed,
            },
            report,
        },
        &csv,
    )?;
    Ok(true)
}

// -------------------------------------------------------------------- sweep

#[derive(Serialize, Deserialize)]
struct SweepConfig {
    family: SpectrumFamily,
    n_values: Vec<usize>,
    energy_rule: EnergyRule,
    #[serde(default)]
    measure: Measure,
    #[serde(default)]
    sampler: SamplerSettings,
}

#[derive(Serialize)]
struct SweepOutput {
    schema: u32,
    command: &'static str,
    config: SweepConfig,
    reports: Vec<ComparisonReport>,
}

fn cmd_sweep(sink: &Sink, config_path: &PathBuf, seed: Option<u64>) -> Result<bool, RunError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", config_path.display()))
        .map_err(RunError::Internal)?;
    let mut config: SweepConfig = serde_json::from_str(&text)?;
    // An explicit --seed overrides the config file's sampler seed.
    if let Some(seed) = seed {
        config.sampler.seed = seed;
    }

    let reports = convergence_sweep(
        &config.family,
        &config.n_values,
        config.energy_rule,
        config.measure,
        &config.sampler,
    )?;

    sink.say(&format!(
        "config: family = {:?}, n = {:?}, rule = {:?}, measure = {}, seed = {}",
        config.family,
        config.n_values,
        config.energy_rule,
        measure_name(config.measure),
        config.sampler.seed
    ));
    for r in &reports {
        sink.say(&format!(
            "N = {}: max_rel_diff = {:.6}, l1_diff = {:.6}, beta = {:.6}, stderr_max = {:.2e}{}",
            r.spectrum.len(),
            r.max_rel_diff,
            r.l1_diff,
            r.canon.beta,
            r.micro.stderr_max(),
            if r.micro.chain_disagreement {
                " [chain disagreement]"
            } else {
                ""
            }
        ));
    }

    let csv = comparison_csv(&reports.iter().collect::<Vec<_>>());
    sink.emit(
        &SweepOutput {
            schema: SCHEMA_VERSION,
            command: "sweep",
            config,
            reports,
        },
        &csv,
    )?;
    Ok(true)
}
