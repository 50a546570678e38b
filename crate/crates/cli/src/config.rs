//! JSON experiment configuration. Every key is optional and unknown keys
//! are rejected; errors name the offending key path.

use std::str::FromStr;

use priority_mechanism::verify::{CheckSetup, ScenarioFamily, SearchBudget};
use priority_mechanism::{
    CostModel, Environment, Grid, MisalignmentMetric, PaymentScheme, Policy, ProfitModel,
    RealizationRule, ScenarioConfig, ScenarioMode, SchemeKind, TieBreakPolicy,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CliError::config(
                "format",
                format!("expected csv or json, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Scalar,
    Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    /// Every grid assignment of misalignments to agents.
    #[default]
    Grid,
    /// The configured seeds.
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SweepAxis {
    NAgents,
    ThetaMax,
    ThetaStep,
    GammaStep,
    CostPower,
    ProfitS0,
    ProfitRate,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// The document as written, before defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawConfig {
    n_agents: Option<usize>,
    mode: Option<ModeName>,
    theta_max: Option<f64>,
    dimension: Option<usize>,
    metric: Option<String>,
    theta_grid: Option<GridSpec>,
    gamma_grid: Option<GridSpec>,
    scheme: Option<String>,
    realization_cap: Option<bool>,
    cost: Option<String>,
    profit: Option<String>,
    tie_break: Option<String>,
    policies: Option<Vec<String>>,
    seeds: Option<Seeds>,
    seed_base: Option<u64>,
    family: Option<FamilyName>,
    budget: Option<usize>,
    min_violation: Option<f64>,
    out: Option<String>,
    format: Option<ReportFormat>,
    sweep: Option<Vec<SweepSpec>>,
}

/// Validated experiment configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_agents: usize,
    pub mode: ModeName,
    pub theta_max: f64,
    pub dimension: usize,
    pub metric: MisalignmentMetric,
    pub theta_grid: GridSpec,
    pub gamma_grid: GridSpec,
    pub scheme: SchemeKind,
    pub realization_cap: bool,
    pub cost: CostModel,
    pub profit: ProfitModel,
    pub tie_break: TieBreakPolicy,
    pub policies: Vec<Policy>,
    pub seeds: Seeds,
    pub seed_base: u64,
    pub family: FamilyName,
    pub budget: usize,
    pub min_violation: f64,
    pub out: Option<String>,
    pub format: ReportFormat,
    pub sweep: Vec<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_agents: 3,
            mode: ModeName::Scalar,
            theta_max: 4.0,
            dimension: 5,
            metric: MisalignmentMetric::L1,
            theta_grid: GridSpec::default(),
            gamma_grid: GridSpec::default(),
            scheme: SchemeKind::SecondPriceLinear,
            realization_cap: true,
            cost: CostModel::Linear,
            profit: ProfitModel::default(),
            tie_break: TieBreakPolicy::ProSocial,
            policies: Vec::new(),
            seeds: Seeds::Count(10),
            seed_base: 0,
            family: FamilyName::Grid,
            budget: SearchBudget::default().max_evaluations,
            min_violation: SearchBudget::default().min_violation,
            out: None,
            format: ReportFormat::Csv,
            sweep: Vec::new(),
        }
    }
}

pub const DEFAULT_THETA_STEP: f64 = 0.25;
pub const DEFAULT_GAMMA_STEP: f64 = 0.05;

fn parse_named<T: FromStr>(key: &str, text: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    text.parse()
        .map_err(|e: T::Err| CliError::config(key, e.to_string()))
}

/// `Truthful`, `Strategic`, `Fixed(r)`, `FixedNoEffort(r)`,
/// `FixedFullAlignment(r)` or `FixedAt(r, gamma)`.
pub fn parse_policy(text: &str) -> Result<Policy, String> {
    let text = text.trim();
    let (name, args) = match text.find('(') {
        None => (text, Vec::new()),
        Some(open) => {
            let inner = text[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| format!("unbalanced parentheses in `{text}`"))?;
            let args = inner
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("bad number `{a}` in `{text}`"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            (&text[..open], args)
        }
    };
    let fixed = |realization| -> Result<Policy, String> {
        match args.first() {
            Some(&report) if report >= 0.0 => Ok(Policy::Fixed {
                report,
                realization,
            }),
            _ => Err(format!("`{name}` needs a nonnegative report")),
        }
    };
    match (name, args.len()) {
        ("Truthful", 0) => Ok(Policy::Truthful),
        ("Strategic", 0) => Ok(Policy::Strategic),
        ("Fixed", 1) => fixed(RealizationRule::Optimize),
        ("FixedNoEffort", 1) => fixed(RealizationRule::NoEffort),
        ("FixedFullAlignment", 1) => fixed(RealizationRule::FullAlignment),
        ("FixedAt", 2) => fixed(RealizationRule::At(args[1])),
        _ => Err(format!("unknown policy `{text}`")),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { String::new() } else { path };
            CliError::config(&key, e.inner().to_string())
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let d = Self::default();
        let cfg = Self {
            n_agents: raw.n_agents.unwrap_or(d.n_agents),
            mode: raw.mode.unwrap_or(d.mode),
            theta_max: raw.theta_max.unwrap_or(d.theta_max),
            dimension: raw.dimension.unwrap_or(d.dimension),
            metric: raw
                .metric
                .as_deref()
                .map(|m| parse_named("metric", m))
                .transpose()?
                .unwrap_or(d.metric),
            theta_grid: raw.theta_grid.unwrap_or_default(),
            gamma_grid: raw.gamma_grid.unwrap_or_default(),
            scheme: raw
                .scheme
                .as_deref()
                .map(|s| parse_named("scheme", s))
                .transpose()?
                .unwrap_or(d.scheme),
            realization_cap: raw.realization_cap.unwrap_or(d.realization_cap),
            cost: raw
                .cost
                .as_deref()
                .map(|s| parse_named("cost", s))
                .transpose()?
                .unwrap_or(d.cost),
            profit: raw
                .profit
                .as_deref()
                .map(|s| parse_named("profit", s))
                .transpose()?
                .unwrap_or(d.profit),
            tie_break: raw
                .tie_break
                .as_deref()
                .map(|s| parse_named("tieBreak", s))
                .transpose()?
                .unwrap_or(d.tie_break),
            policies: raw
                .policies
                .unwrap_or_default()
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    parse_policy(p).map_err(|e| CliError::config(&format!("policies[{i}]"), e))
                })
                .collect::<Result<_, _>>()?,
            seeds: raw.seeds.unwrap_or(d.seeds),
            seed_base: raw.seed_base.unwrap_or(d.seed_base),
            family: raw.family.unwrap_or(d.family),
            budget: raw.budget.unwrap_or(d.budget),
            min_violation: raw.min_violation.unwrap_or(d.min_violation),
            out: raw.out,
            format: raw.format.unwrap_or(d.format),
            sweep: raw.sweep.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every cross-field constraint; called after parsing and again
    /// after command-line overrides.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_agents < 2 {
            return Err(CliError::config(
                "nAgents",
                format!("need at least 2 agents, got {}", self.n_agents),
            ));
        }
        if !(self.theta_max.is_finite() && self.theta_max >= 0.0) {
            return Err(CliError::config(
                "thetaMax",
                format!("must be a nonnegative number, got {}", self.theta_max),
            ));
        }
        if self.dimension == 0 {
            return Err(CliError::config("dimension", "must be >= 1"));
        }
        if !self.policies.is_empty() && self.policies.len() != self.n_agents {
            return Err(CliError::config(
                "policies",
                format!(
                    "{} policies for {} agents",
                    self.policies.len(),
                    self.n_agents
                ),
            ));
        }
        if !(self.min_violation.is_finite() && self.min_violation >= 0.0) {
            return Err(CliError::config(
                "minViolation",
                "must be a nonnegative number",
            ));
        }
        self.theta_grid()?;
        self.gamma_grid()?;
        for (i, s) in self.sweep.iter().enumerate() {
            if s.values.is_empty() {
                return Err(CliError::config(
                    &format!("sweep[{i}].values"),
                    "needs at least one value",
                ));
            }
        }
        Ok(())
    }

    fn build_grid(&self, key: &str, spec: GridSpec, default_step: f64) -> Result<Grid, CliError> {
        let lo = spec.lo.unwrap_or(0.0);
        let hi = spec.hi.unwrap_or(self.theta_max);
        let step = spec.step.unwrap_or(default_step);
        if !(step.is_finite() && step > 0.0) {
            return Err(CliError::config(
                &format!("{key}.step"),
                format!("must be > 0, got {step}"),
            ));
        }
        if !(lo.is_finite() && lo >= 0.0) {
            return Err(CliError::config(
                &format!("{key}.lo"),
                format!("must be a nonnegative number, got {lo}"),
            ));
        }
        if !(hi.is_finite() && hi >= lo) {
            return Err(CliError::config(
                &format!("{key}.hi"),
                format!("must be >= lo ({lo}), got {hi}"),
            ));
        }
        Grid::new(lo, hi, step).map_err(|e| CliError::config(key, e.to_string()))
    }

    pub fn theta_grid(&self) -> Result<Grid, CliError> {
        self.build_grid("thetaGrid", self.theta_grid, DEFAULT_THETA_STEP)
    }

    pub fn gamma_grid(&self) -> Result<Grid, CliError> {
        self.build_grid("gammaGrid", self.gamma_grid, DEFAULT_GAMMA_STEP)
    }

    pub fn environment(&self) -> Result<Environment, CliError> {
        Ok(Environment {
            scheme: PaymentScheme {
                kind: self.scheme,
                enforce_realization_cap: self.realization_cap,
            },
            cost: self.cost,
            profit: self.profit,
            gamma_grid: self.gamma_grid()?,
            tie_break: self.tie_break,
        })
    }

    pub fn scenario_mode(&self) -> ScenarioMode {
        match self.mode {
            ModeName::Scalar => ScenarioMode::Scalar {
                theta_max: self.theta_max,
            },
            ModeName::Vector => ScenarioMode::Vector {
                dimension: self.dimension,
                metric: self.metric,
            },
        }
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig, CliError> {
        Ok(ScenarioConfig {
            n_agents: self.n_agents,
            mode: self.scenario_mode(),
            env: self.environment()?,
            theta_grid: self.theta_grid()?,
            policies: self.policies.clone(),
        })
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Seeds::Count(n) => (0..*n).map(|i| self.seed_base.wrapping_add(i)).collect(),
            Seeds::List(list) => list.clone(),
        }
    }

    pub fn check_setup(&self) -> Result<CheckSetup, CliError> {
        let family = match self.family {
            FamilyName::Grid => ScenarioFamily::Grid {
                n_agents: self.n_agents,
                theta_grid: self.theta_grid()?,
            },
            FamilyName::Seeded => ScenarioFamily::Seeded {
                n_agents: self.n_agents,
                mode: self.scenario_mode(),
                seeds: self.seed_list(),
            },
        };
        Ok(CheckSetup {
            family,
            env: self.environment()?,
            report_grid: self.theta_grid()?,
        })
    }

    pub fn search_budget(&self) -> SearchBudget {
        SearchBudget {
            max_evaluations: self.budget,
            min_violation: self.min_violation,
        }
    }

    /// A copy with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self, CliError> {
        let mut cfg = self.clone();
        match axis {
            SweepAxis::NAgents => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(CliError::config(
                        "sweep.values",
                        format!("nAgents must be an integer, got {value}"),
                    ));
                }
                cfg.n_agents = value as usize;
                if !cfg.policies.is_empty() {
                    cfg.policies.resize(cfg.n_agents, Policy::Truthful);
                }
            }
            SweepAxis::ThetaMax => cfg.theta_max = value,
            SweepAxis::ThetaStep => cfg.theta_grid.step = Some(value),
            SweepAxis::GammaStep => cfg.gamma_grid.step = Some(value),
            SweepAxis::CostPower => cfg.cost = CostModel::Power(value),
            SweepAxis::ProfitS0 => {
                cfg.profit = match cfg.profit {
                    ProfitModel::LinearDecreasing { slope, .. } => {
                        ProfitModel::LinearDecreasing { s0: value, slope }
                    }
                    ProfitModel::QuadraticDecreasing { curvature, .. } => {
                        ProfitModel::QuadraticDecreasing {
                            s0: value,
                            curvature,
                        }
                    }
                }
            }
            SweepAxis::ProfitRate => {
                cfg.profit = match cfg.profit {
                    ProfitModel::LinearDecreasing { s0, .. } => {
                        ProfitModel::LinearDecreasing { s0, slope: value }
                    }
                    ProfitModel::QuadraticDecreasing { s0, .. } => {
                        ProfitModel::QuadraticDecreasing {
                            s0,
                            curvature: value,
                        }
                    }
                }
            }
        }
        cfg.cost
            .validate()
            .map_err(|e| CliError::config("sweep.values", e.to_string()))?;
        cfg.profit
            .validate()
            .map_err(|e| CliError::config("sweep.values", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(err: CliError) -> String {
        match err {
            CliError::Config { key, .. } => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::parse("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(
            cfg.theta_grid().unwrap(),
            Grid::new(0.0, 4.0, 0.25).unwrap()
        );
        assert_eq!(
            cfg.gamma_grid().unwrap(),
            Grid::new(0.0, 4.0, 0.05).unwrap()
        );
        assert_eq!(
            cfg.profit,
            ProfitModel::QuadraticDecreasing {
                s0: 4.0,
                curvature: 1.0
            }
        );
        assert_eq!(cfg.tie_break, TieBreakPolicy::ProSocial);
        assert_eq!(cfg.seed_list(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn zero_step_names_the_key() {
        let err = ExperimentConfig::parse(r#"{"gammaGrid": {"step": 0}}"#).unwrap_err();
        assert_eq!(key_of(err), "gammaGrid.step");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse(r#"{"gammaGrid": {"stp": 0.1}}"#).unwrap_err();
        assert!(err.to_string().contains("stp"), "{err}");
        let err = ExperimentConfig::parse(r#"{"nAgent": 3}"#).unwrap_err();
        assert!(err.to_string().contains("nAgent"), "{err}");
    }

    #[test]
    fn type_errors_name_the_key() {
        let err = ExperimentConfig::parse(r#"{"thetaGrid": {"hi": "four"}}"#).unwrap_err();
        assert_eq!(key_of(err), "thetaGrid.hi");
        assert!(ExperimentConfig::parse("{not json").is_err());
    }

    #[test]
    fn vcg_scheme_keeps_default_profit() {
        let cfg = ExperimentConfig::parse(r#"{"scheme": "VCGStyle"}"#).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::VcgStyle);
        assert_eq!(cfg.profit, ProfitModel::default());
    }

    #[test]
    fn bad_model_names_the_key() {
        assert_eq!(
            key_of(ExperimentConfig::parse(r#"{"cost": "Cubic"}"#).unwrap_err()),
            "cost"
        );
        assert_eq!(
            key_of(ExperimentConfig::parse(r#"{"nAgents": 1}"#).unwrap_err()),
            "nAgents"
        );
        assert_eq!(
            key_of(
                ExperimentConfig::parse(r#"{"policies": ["Truthful", "Sneaky", "Truthful"]}"#)
                    .unwrap_err()
            ),
            "policies[1]"
        );
    }

    #[test]
    fn seeds_as_count_or_list() {
        let cfg = ExperimentConfig::parse(r#"{"seeds": 3, "seedBase": 100}"#).unwrap();
        assert_eq!(cfg.seed_list(), vec![100, 101, 102]);
        let cfg = ExperimentConfig::parse(r#"{"seeds": [5, 1]}"#).unwrap();
        assert_eq!(cfg.seed_list(), vec![5, 1]);
    }

    #[test]
    fn policies_parse() {
        assert_eq!(parse_policy("Strategic").unwrap(), Policy::Strategic);
        assert_eq!(
            parse_policy("FixedAt(2, 0.5)").unwrap(),
            Policy::Fixed {
                report: 2.0,
                realization: RealizationRule::At(0.5)
            }
        );
        assert!(parse_policy("Fixed(-1)").is_err());
    }

    #[test]
    fn grids_follow_theta_max() {
        let cfg =
            ExperimentConfig::parse(r#"{"thetaMax": 2, "thetaGrid": {"step": 0.5}}"#).unwrap();
        assert_eq!(
            cfg.theta_grid().unwrap().points(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0]
        );
        assert_eq!(cfg.gamma_grid().unwrap().hi(), 2.0);
    }

    #[test]
    fn sweep_axes_apply() {
        let cfg =
            ExperimentConfig::parse(r#"{"sweep": [{"axis": "costPower", "values": [1, 2]}]}"#)
                .unwrap();
        let c2 = cfg.with_axis(SweepAxis::CostPower, 2.0).unwrap();
        assert_eq!(c2.cost, CostModel::Power(2.0));
        assert!(cfg.with_axis(SweepAxis::CostPower, 0.5).is_err());
        assert!(cfg.with_axis(SweepAxis::NAgents, 2.5).is_err());
    }
}
