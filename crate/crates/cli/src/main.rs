mod validate;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use esta::config::{Format, Overrides, RunConfig};
use esta::esta::correct;
use esta::experiments::{run_case, sweep_tf, threshold_time, Column, Selection, SweepResult, SweepRow, Threshold};
use esta::models::CaseId;
use esta::output::{emit_results, Sidecar};
use esta::EstaError;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

#[derive(Parser)]
#[command(name = "esta", version, about = "Shortcut-to-adiabaticity schemes and their first-order corrections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    case: Option<CaseArg>,
    #[arg(long, global = true)]
    tf_min: Option<f64>,
    #[arg(long, global = true)]
    tf_max: Option<f64>,
    #[arg(long, global = true)]
    tf_steps: Option<usize>,
    /// Number of excited modes in the correction.
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Print baseline, correction and corrected control vectors for every final time.
    Correct,
    /// Simulate STA and eSTA at the first final time of the grid.
    Simulate,
    /// Fidelities over the final-time grid.
    Sweep,
    /// Shortest final times beyond which STA and eSTA stay above the threshold fidelity.
    Threshold,
    /// Run the built-in consistency checks.
    Validate {
        #[arg(long, value_enum, default_value = "fast")]
        validate_level: validate::Level,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum CaseArg {
    TwoLevel,
    SingleTransport,
    TwoIon,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

enum Failure {
    Error(EstaError),
    Assertion(String),
}

impl From<EstaError> for Failure {
    fn from(e: EstaError) -> Self {
        Failure::Error(e)
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        case: cli.case.map(|c| match c {
            CaseArg::TwoLevel => CaseId::TwoLevel,
            CaseArg::SingleTransport => CaseId::SingleTransport,
            CaseArg::TwoIon => CaseId::TwoIon,
        }),
        tf_min: cli.tf_min,
        tf_max: cli.tf_max,
        tf_steps: cli.tf_steps,
        modes: cli.modes,
        out: cli.out.clone(),
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
    }
}

fn write_text(config: &RunConfig, text: &str) -> Result<(), Failure> {
    match &config.output.path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| EstaError::Io { path: p.display().to_string(), message: e.to_string() }.into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_correct(config: &RunConfig) -> Result<(), Failure> {
    let model = config.model();
    let mut records = Vec::new();
    for t_f in config.tf_values()? {
        records.push((t_f, correct(&model, t_f, config.modes, &config.quadrature)?));
    }
    let text = match config.output.format {
        Format::Json => {
            let rows: Vec<_> = records
                .iter()
                .map(|(t_f, terms)| {
                    serde_json::json!({
                        "t_f": t_f,
                        "lambda0": terms.lambda0,
                        "eps": terms.eps,
                        "lambda_s": terms.lambda_s,
                        "f_estimate": terms.f_estimate,
                        "degenerate": terms.degenerate,
                    })
                })
                .collect();
            let doc = serde_json::json!({ "config": config, "corrections": rows });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"))
        }
        Format::Csv => {
            let mut s = String::from("t_f,k,lambda0,eps,lambda_s\n");
            for (t_f, terms) in &records {
                for k in 0..terms.eps.dim() {
                    s.push_str(&format!(
                        "{t_f:.16e},{},{:.16e},{:.16e},{:.16e}\n",
                        k + 1,
                        terms.lambda0.0[k],
                        terms.eps.0[k],
                        terms.lambda_s.0[k]
                    ));
                }
            }
            s
        }
    };
    write_text(config, &text)
}

fn row_errors(result: &SweepResult) -> Result<(), Failure> {
    let failed: Vec<String> =
        result.rows.iter().filter_map(|r| r.error.as_ref().map(|e| format!("t_f = {}: {e}", r.t_f))).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(EstaError::accuracy(failed.join("; ")).into())
    }
}

fn cmd_sweep(config: &RunConfig, single: bool) -> Result<(), Failure> {
    let start = Instant::now();
    let result = if single {
        let t_f = config.sweep.tf_min;
        let record = run_case(&config.case_config(), t_f, Selection::ALL)?;
        SweepResult { config: config.case_config(), rows: vec![SweepRow { t_f, record: Some(record), error: None }] }
    } else {
        sweep_tf(&config.case_config(), &config.tf_values()?, Selection::ALL)?
    };
    let sidecar = Sidecar::new(config, &result, start.elapsed().as_secs_f64());
    for path in emit_results(config, &result, &sidecar)? {
        log::info!("wrote {}", path.display());
    }
    row_errors(&result)
}

fn cmd_threshold(config: &RunConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let result = sweep_tf(&config.case_config(), &config.tf_values()?, Selection::SYSTEM)?;
    let level = config.sweep.threshold;
    let entries: Vec<(String, f64, Threshold)> = [("F_sta", Column::Sta), ("F_esta", Column::Esta)]
        .into_iter()
        .map(|(name, col)| (name.to_string(), level, threshold_time(&result, col, level)))
        .collect();
    for (name, _, t) in &entries {
        match t.time() {
            Some(t) => eprintln!("{name} >= {level} from t_f = {t}"),
            None => eprintln!("{name} does not stay above {level} within the sweep"),
        }
    }
    let sidecar = Sidecar::new(config, &result, start.elapsed().as_secs_f64()).with_thresholds(entries);
    emit_results(config, &result, &sidecar)?;
    row_errors(&result)
}

fn cmd_validate(level: validate::Level) -> Result<(), Failure> {
    let checks = validate::run(level)?;
    let mut failed = Vec::new();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            failed.push(c.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("failed checks: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match RunConfig::load(cli.config.as_deref(), &overrides(&cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    env_logger::Builder::new().filter_level(config.verbosity.level()).init();
    let outcome = match cli.command {
        Command::Correct => cmd_correct(&config),
        Command::Simulate => cmd_sweep(&config, true),
        Command::Sweep => cmd_sweep(&config, false),
        Command::Threshold => cmd_threshold(&config),
        Command::Validate { validate_level } => cmd_validate(validate_level),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ASSERTION)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
    }
}
