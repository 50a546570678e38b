use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use primech_cli::config::{parse_policy, FamilyName, Seeds};
use primech_cli::report::write_report;
use primech_cli::{
    execute, CliError, Command, ExperimentConfig, ReportFormat, SearchTarget, VerifyTarget,
};

#[derive(Parser, Debug)]
#[command(
    name = "primech",
    version,
    about = "Run and verify the second-bid task delegation mechanism"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Play one game per seed and tabulate the outcomes.
    Run,
    /// Exhaustively check a property over the configured scenario family.
    Verify {
        #[arg(value_enum)]
        property: VerifyArg,
    },
    /// Check the second-bid payment conditions on the theta and gamma grids.
    PaymentCheck,
    /// Find the first witness against a property, within the budget.
    Counterexample {
        #[arg(value_enum)]
        property: SearchArg,
    },
    /// Run the configured parameter sweep.
    Sweep,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VerifyArg {
    Ic,
    Ir,
    So,
    Selection,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SearchArg {
    Ic,
    Ir,
    So,
    Payment,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyArg {
    Grid,
    Seeded,
}

#[derive(Args, Debug)]
struct Overrides {
    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Use seeds base..base+N.
    #[arg(long, global = true, value_name = "N", conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Comma-separated explicit seeds.
    #[arg(long, global = true, value_name = "S1,S2,..", value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Payment scheme, e.g. SecondPriceLinear, VCGStyle, RealizationOnly(1,-1).
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Effort cost: Linear, Quadratic or Power(p).
    #[arg(long, global = true)]
    cost: Option<String>,
    /// Profit: QuadraticDecreasing(s0,c) or LinearDecreasing(s0,a).
    #[arg(long, global = true)]
    profit: Option<String>,
    /// Winner tie-break: ProSocial, Adversarial, MaxAlignment or Lazy.
    #[arg(long, global = true)]
    tiebreak: Option<String>,
    /// Agent policies, one per agent (Truthful, Strategic, Fixed(r), ...).
    #[arg(long, global = true, value_delimiter = ';')]
    policies: Option<Vec<String>>,
    /// Scenario family for verify and counterexample.
    #[arg(long, global = true, value_enum)]
    family: Option<FamilyArg>,
    /// Evaluation budget for counterexample.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Smallest violation counted by counterexample.
    #[arg(long, global = true)]
    min_violation: Option<f64>,
    /// Report path; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

fn load_config(opts: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let parse_err = |key: &'static str| {
        move |e: priority_mechanism::MechError| CliError::config(key, e.to_string())
    };
    if let Some(n) = opts.seeds {
        cfg.seeds = Seeds::Count(n);
    }
    if let Some(list) = &opts.seed_list {
        cfg.seeds = Seeds::List(list.clone());
    }
    if let Some(s) = &opts.scheme {
        cfg.scheme = s.parse().map_err(parse_err("--scheme"))?;
    }
    if let Some(s) = &opts.cost {
        cfg.cost = s.parse().map_err(parse_err("--cost"))?;
    }
    if let Some(s) = &opts.profit {
        cfg.profit = s.parse().map_err(parse_err("--profit"))?;
    }
    if let Some(s) = &opts.tiebreak {
        cfg.tie_break = s.parse().map_err(parse_err("--tiebreak"))?;
    }
    if let Some(list) = &opts.policies {
        cfg.policies = list
            .iter()
            .map(|p| parse_policy(p).map_err(|e| CliError::config("--policies", e)))
            .collect::<Result<_, _>>()?;
    }
    if let Some(f) = opts.family {
        cfg.family = match f {
            FamilyArg::Grid => FamilyName::Grid,
            FamilyArg::Seeded => FamilyName::Seeded,
        };
    }
    if let Some(b) = opts.budget {
        cfg.budget = b;
    }
    if let Some(m) = opts.min_violation {
        cfg.min_violation = m;
    }
    if let Some(out) = &opts.out {
        cfg.out = Some(out.clone());
    }
    if let Some(f) = opts.format {
        cfg.format = match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_of(cmd: &Cmd) -> Command {
    match cmd {
        Cmd::Run => Command::Run,
        Cmd::Verify { property } => Command::Verify(match property {
            VerifyArg::Ic => VerifyTarget::Ic,
            VerifyArg::Ir => VerifyTarget::Ir,
            VerifyArg::So => VerifyTarget::So,
            VerifyArg::Selection => VerifyTarget::Selection,
        }),
        Cmd::PaymentCheck => Command::PaymentCheck,
        Cmd::Counterexample { property } => Command::Counterexample(match property {
            SearchArg::Ic => SearchTarget::Ic,
            SearchArg::Ir => SearchTarget::Ir,
            SearchArg::So => SearchTarget::So,
            SearchArg::Payment => SearchTarget::Payment,
        }),
        Cmd::Sweep => Command::Sweep,
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = load_config(&cli.opts)?;
    let command = command_of(&cli.command);
    let execution = match cli.opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(|| execute(command, &cfg))?,
        None => execute(command, &cfg)?,
    };
    write_report(&execution.text, cfg.out.as_deref())?;
    Ok(execution.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("primech: {e}");
            ExitCode::from(2)
        }
    }
}
