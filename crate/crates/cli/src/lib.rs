//! Experiment runner behind the `primech` binary.
//!
//! Exit-status contract: 0 when every checked property holds, 1 when one
//! fails (the report is still written), 2 for usage, configuration or I/O
//! errors.

pub mod config;
pub mod error;
pub mod report;

use priority_mechanism::verify::{
    check_incentive_compatibility, check_individual_rationality, check_selection_efficiency,
    check_social_optimality, search_counterexample, Property, SearchOutcome,
};
use priority_mechanism::{check_payment_property, run_batch};

pub use config::{ExperimentConfig, ReportFormat};
pub use error::CliError;
use report::{outcomes_csv, to_json, OutcomeRecord, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyTarget {
    Ic,
    Ir,
    So,
    Selection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchTarget {
    Ic,
    Ir,
    So,
    Payment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Verify(VerifyTarget),
    PaymentCheck,
    Counterexample(SearchTarget),
    Sweep,
}

/// A rendered report and whether everything it checked held.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub passed: bool,
    pub text: String,
}

impl Execution {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Execution, CliError> {
    cfg.validate()?;
    match command {
        Command::Run => {
            let records = run_records(cfg)?;
            let text = match cfg.format {
                ReportFormat::Csv => outcomes_csv(&records),
                ReportFormat::Json => to_json(&records)?,
            };
            Ok(Execution { passed: true, text })
        }
        Command::Verify(target) => {
            let setup = cfg.check_setup()?;
            let report = match target {
                VerifyTarget::Ic => check_incentive_compatibility(&setup)?,
                VerifyTarget::Ir => check_individual_rationality(&setup)?,
                VerifyTarget::So => check_social_optimality(&setup)?,
                VerifyTarget::Selection => check_selection_efficiency(&setup)?,
            };
            Ok(Execution {
                passed: report.passed,
                text: to_json(&report)?,
            })
        }
        Command::PaymentCheck => {
            let env = cfg.environment()?;
            let report = check_payment_property(
                &env.scheme,
                env.cost,
                Some(env.profit),
                &cfg.theta_grid()?,
                &env.gamma_grid,
            )?;
            Ok(Execution {
                passed: report.passed(),
                text: to_json(&report)?,
            })
        }
        Command::Counterexample(target) => {
            let property = match target {
                SearchTarget::Ic => Property::IncentiveCompatibility,
                SearchTarget::Ir => Property::IndividualRationality,
                SearchTarget::So => Property::SocialOptimality,
                SearchTarget::Payment => Property::PaymentProperty,
            };
            let outcome =
                search_counterexample(&cfg.check_setup()?, property, cfg.search_budget())?;
            Ok(Execution {
                passed: matches!(outcome, SearchOutcome::NoneFound { .. }),
                text: to_json(&outcome)?,
            })
        }
        Command::Sweep => {
            let table = sweep(cfg)?;
            let text = match cfg.format {
                ReportFormat::Csv => table.to_csv(),
                ReportFormat::Json => table.to_json()?,
            };
            Ok(Execution { passed: true, text })
        }
    }
}

pub fn run_records(cfg: &ExperimentConfig) -> Result<Vec<OutcomeRecord>, CliError> {
    let scenario_config = cfg.scenario_config()?;
    run_batch(&scenario_config, &cfg.seed_list())?
        .into_iter()
        .map(|(scenario, outcome)| OutcomeRecord::new(&scenario, outcome))
        .collect()
}

const SWEEP_METRICS: [&str; 8] = [
    "scenarios",
    "mean_social_welfare",
    "mean_pi_star",
    "mean_welfare_gap",
    "max_welfare_gap",
    "mean_winner_utility",
    "mean_principal_utility",
    "principal_losses",
];

/// Cartesian product of the configured axes; one row of seed-averaged
/// metrics per point, first axis varying slowest.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    if cfg.sweep.is_empty() {
        return Err(CliError::Usage(
            "sweep needs at least one axis in `sweep`".into(),
        ));
    }
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &cfg.sweep {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }

    let mut columns: Vec<String> = cfg
        .sweep
        .iter()
        .map(|s| {
            serde_json::to_value(s.axis)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        })
        .collect();
    columns.extend(SWEEP_METRICS.iter().map(|s| s.to_string()));

    let mut rows = Vec::with_capacity(points.len());
    for point in points {
        let mut point_cfg = cfg.clone();
        for (axis, &value) in cfg.sweep.iter().zip(&point) {
            point_cfg = point_cfg.with_axis(axis.axis, value)?;
        }
        let records = run_records(&point_cfg)?;
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&OutcomeRecord) -> f64| {
            if records.is_empty() {
                f64::NAN
            } else {
                records.iter().map(f).sum::<f64>() / n
            }
        };
        let mut row = point;
        row.extend([
            n,
            mean(&|r| r.outcome.social_welfare),
            mean(&|r| r.pi_star),
            mean(&|r| r.welfare_gap),
            records
                .iter()
                .map(|r| r.welfare_gap)
                .fold(f64::NAN, f64::max),
            mean(&|r| r.outcome.winner_utility()),
            mean(&|r| r.outcome.principal_utility),
            records
                .iter()
                .filter(|r| r.outcome.principal_utility < 0.0)
                .count() as f64,
        ]);
        rows.push(row);
    }
    Ok(Table { columns, rows })
}
