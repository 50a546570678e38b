//! Agent behavior: which realizations are feasible, which one a winner
//! picks, and which report an agent would submit given everyone else's.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonneg, MechError, Result};
use crate::grid::Grid;
use crate::mechanism::{select_winner, PaymentScheme, PreparedPayment};
use crate::model::{string_serde, AgentId, Bid, CostModel, ProfitModel};
use crate::DECISION_MARGIN;

const SNAP: f64 = 1e-9;
const WELFARE_TIE: f64 = 1e-12;

/// How a winner chooses among realizations that all give it (nearly) the
/// same utility.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TieBreakPolicy {
    /// Highest social welfare.
    #[default]
    ProSocial,
    /// Lowest social welfare.
    Adversarial,
    /// Smallest realized misalignment.
    MaxAlignment,
    /// Largest realized misalignment.
    Lazy,
}

impl fmt::Display for TieBreakPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ProSocial => "ProSocial",
            Self::Adversarial => "Adversarial",
            Self::MaxAlignment => "MaxAlignment",
            Self::Lazy => "Lazy",
        })
    }
}

impl FromStr for TieBreakPolicy {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ProSocial" => Ok(Self::ProSocial),
            "Adversarial" => Ok(Self::Adversarial),
            "MaxAlignment" => Ok(Self::MaxAlignment),
            "Lazy" => Ok(Self::Lazy),
            other => Err(MechError::Config(format!("unknown tie-break `{other}`"))),
        }
    }
}
string_serde!(TieBreakPolicy);

/// Everything about the game that is fixed before bids arrive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Environment {
    pub scheme: PaymentScheme,
    pub cost: CostModel,
    pub profit: ProfitModel,
    pub gamma_grid: Grid,
    pub tie_break: TieBreakPolicy,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        self.profit.validate()
    }

    pub fn with_tie_break(self, tie_break: TieBreakPolicy) -> Self {
        Self { tie_break, ..self }
    }

    pub fn welfare(&self, theta: f64, gamma: f64) -> f64 {
        self.profit.eval_unchecked(gamma) - self.cost.eval_unchecked(theta, gamma)
    }

    pub(crate) fn prepare_payment(
        &self,
        theta_bar: f64,
        reported_theta: f64,
    ) -> Result<PreparedPayment> {
        PreparedPayment::new(
            &self.scheme,
            theta_bar,
            reported_theta,
            Some(self.profit),
            self.cost,
            &self.gamma_grid,
        )
    }
}

/// Grid realizations in `[0, min(theta, theta')]`, ascending. Zero and the
/// cap itself are always included.
pub fn feasible_realizations(
    true_theta: f64,
    reported_theta: f64,
    gamma_grid: &Grid,
) -> Result<Vec<f64>> {
    ensure_nonneg("true theta", true_theta)?;
    ensure_nonneg("reported theta", reported_theta)?;
    let cap = true_theta.min(reported_theta);
    let mut out = vec![0.0];
    out.extend(
        gamma_grid
            .points()
            .into_iter()
            .filter(|&g| g > SNAP && g < cap - SNAP),
    );
    if cap > 0.0 {
        out.push(cap);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RealizationChoice {
    pub gamma: f64,
    pub payment: f64,
    pub effort_cost: f64,
    pub utility: f64,
}

/// The winner's realization: maximize `P - h` over feasible grid points,
/// resolving near-ties (within 1e-9) by the environment's tie-break.
pub fn best_realization(
    true_theta: f64,
    reported_theta: f64,
    theta_bar: f64,
    env: &Environment,
) -> Result<RealizationChoice> {
    let gammas = feasible_realizations(true_theta, reported_theta, &env.gamma_grid)?;
    let payment = env.prepare_payment(theta_bar, reported_theta)?;
    let evaluated: Vec<RealizationChoice> = gammas
        .into_iter()
        .map(|gamma| {
            let payment = payment.at(gamma);
            let effort_cost = env.cost.eval_unchecked(true_theta, gamma);
            RealizationChoice {
                gamma,
                payment,
                effort_cost,
                utility: payment - effort_cost,
            }
        })
        .collect();
    Ok(resolve_ties(&evaluated, true_theta, env))
}

fn resolve_ties(
    evaluated: &[RealizationChoice],
    true_theta: f64,
    env: &Environment,
) -> RealizationChoice {
    let best = evaluated
        .iter()
        .map(|c| c.utility)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut tied = evaluated
        .iter()
        .filter(|c| c.utility >= best - DECISION_MARGIN);
    let first = *tied.next().expect("zero is always feasible");
    let welfare = |c: &RealizationChoice| env.welfare(true_theta, c.gamma);
    match env.tie_break {
        TieBreakPolicy::MaxAlignment => first,
        TieBreakPolicy::Lazy => tied.next_back().copied().unwrap_or(first),
        TieBreakPolicy::ProSocial => tied.fold(first, |acc, c| {
            if welfare(c) > welfare(&acc) + WELFARE_TIE {
                *c
            } else {
                acc
            }
        }),
        TieBreakPolicy::Adversarial => tied.fold(first, |acc, c| {
            if welfare(c) < welfare(&acc) - WELFARE_TIE {
                *c
            } else {
                acc
            }
        }),
    }
}

/// What a single report would earn an agent, holding the other bids fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportEvaluation {
    pub reported_theta: f64,
    pub wins: bool,
    pub theta_bar: f64,
    /// Present only when the report wins.
    pub realization: Option<RealizationChoice>,
    pub utility: f64,
}

pub fn evaluate_report(
    agent_id: AgentId,
    true_theta: f64,
    reported_theta: f64,
    other_bids: &[Bid],
    env: &Environment,
) -> Result<ReportEvaluation> {
    let mut bids = Vec::with_capacity(other_bids.len() + 1);
    bids.extend_from_slice(other_bids);
    bids.push(Bid::new(agent_id, reported_theta)?);
    let (winner, theta_bar) = select_winner(&bids)?;
    if winner != agent_id {
        return Ok(ReportEvaluation {
            reported_theta,
            wins: false,
            theta_bar,
            realization: None,
            utility: 0.0,
        });
    }
    let choice = best_realization(true_theta, reported_theta, theta_bar, env)?;
    Ok(ReportEvaluation {
        reported_theta,
        wins: true,
        theta_bar,
        realization: Some(choice),
        utility: choice.utility,
    })
}

/// Utility-maximizing report over `theta_grid` plus the truthful report.
///
/// Reports range over the whole grid regardless of the agent's true
/// misalignment, so over-reporting is considered. Among maximizers the
/// truthful report is preferred, then the lowest one.
pub fn best_response_bid(
    agent_id: AgentId,
    true_theta: f64,
    other_bids: &[Bid],
    theta_grid: &Grid,
    env: &Environment,
) -> Result<ReportEvaluation> {
    let truthful = evaluate_report(agent_id, true_theta, true_theta, other_bids, env)?;
    let mut candidates = vec![truthful];
    for report in theta_grid.points() {
        if report < 0.0 || report == true_theta {
            continue;
        }
        candidates.push(evaluate_report(
            agent_id, true_theta, report, other_bids, env,
        )?);
    }
    let best = candidates
        .iter()
        .map(|c| c.utility)
        .fold(f64::NEG_INFINITY, f64::max);
    if truthful.utility >= best - DECISION_MARGIN {
        return Ok(truthful);
    }
    let chosen = candidates
        .into_iter()
        .filter(|c| c.utility >= best - DECISION_MARGIN)
        .min_by(|a, b| a.reported_theta.total_cmp(&b.reported_theta))
        .expect("nonempty");
    Ok(chosen)
}
