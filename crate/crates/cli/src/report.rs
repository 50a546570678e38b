//! CSV and JSON renderings of outcomes, sweeps and verification reports.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use priority_mechanism::verify::oracle::{efficient_agent, social_optimum};
use priority_mechanism::{Outcome, Scenario};
use serde::Serialize;

use crate::error::CliError;

pub const OUTCOME_COLUMNS: [&str; 10] = [
    "seed",
    "winner_id",
    "theta_bar",
    "gamma_realized",
    "payment_w",
    "utility_w",
    "principal_utility",
    "social_welfare",
    "pi_star",
    "welfare_gap",
];

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e12)`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    strip_zeros(&format!("{:.*}", (11 - exp) as usize, x)).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One outcome with the welfare benchmark attached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub seed: u64,
    pub outcome: Outcome,
    /// Best welfare any agent could realize, from the grid oracle.
    pub pi_star: f64,
    pub welfare_gap: f64,
}

impl OutcomeRecord {
    pub fn new(scenario: &Scenario, outcome: Outcome) -> Result<Self, CliError> {
        let env = &scenario.env;
        let thetas = scenario.true_thetas();
        let best = efficient_agent(&thetas, env.profit, env.cost, &env.gamma_grid)?;
        let (_, pi_star) = social_optimum(thetas[best], env.profit, env.cost, &env.gamma_grid)?;
        Ok(Self {
            seed: scenario.seed,
            welfare_gap: pi_star - outcome.social_welfare,
            pi_star,
            outcome,
        })
    }
}

pub fn outcomes_csv(records: &[OutcomeRecord]) -> String {
    let mut out = OUTCOME_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let o = &r.outcome;
        let floats = [
            o.theta_bar,
            o.gamma_realized,
            o.winner_payment(),
            o.winner_utility(),
            o.principal_utility,
            o.social_welfare,
            r.pi_star,
            r.welfare_gap,
        ];
        let _ = write!(out, "{},{}", r.seed, o.winner_id);
        for f in floats {
            out.push(',');
            out.push_str(&format_float(f));
        }
        out.push('\n');
    }
    out
}

/// Rows of a named-column table; every value is a float.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let records: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(|&v| serde_json::Value::from(v)))
                    .collect()
            })
            .collect();
        Ok(serde_json::to_string_pretty(&records)? + "\n")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes to `path`, or to stdout when there is none.
pub fn write_report(text: &str, path: Option<&str>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(Path::new(p), text).map_err(|source| CliError::Io {
            path: p.to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_float(3.0), "3");
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(2.25), "2.25");
        assert_eq!(format_float(-1.0), "-1");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_float(123456.789), "123456.789");
        assert_eq!(format_float(4.440892098500626e-16), "4.4408920985e-16");
        assert_eq!(format_float(1.5e-5), "1.5e-05");
        assert_eq!(format_float(1e12), "1e+12");
        assert_eq!(format_float(999999999999.9), "1e+12");
        assert_eq!(format_float(0.1 + 0.2), "0.3");
    }

    #[test]
    fn empty_outcome_list_is_header_only() {
        assert_eq!(outcomes_csv(&[]), OUTCOME_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn table_renders_both_formats() {
        let t = Table {
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![1.0, 0.25]],
        };
        assert_eq!(t.to_csv(), "a,b\n1,0.25\n");
        let json: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(json[0]["b"], 0.25);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = write_report("x", Some("/nonexistent-dir/for/sure/report.csv")).unwrap_err();
        assert!(matches!(err, CliError::Io { .. }));
    }
}
