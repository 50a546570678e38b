//! Exhaustive checkers for incentive compatibility, individual rationality,
//! social optimality and selection efficiency.
//!
//! Every check enumerates a declared scenario family and, where agents
//! deviate, a declared report grid. A pass certifies the property on those
//! grids only, and each report carries the grids it used.

pub mod oracle;
mod search;

pub use search::{search_counterexample, SearchBudget, SearchOutcome};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{evaluate_report, feasible_realizations, Environment, ReportEvaluation};
use crate::engine::{generate_scenario, run_game, Scenario, ScenarioConfig, ScenarioMode};
use crate::error::{MechError, Result};
use crate::grid::Grid;
use crate::mechanism::PaymentWitness;
use crate::model::{AgentId, Bid};
use crate::DECISION_MARGIN;
use oracle::{efficient_agent, social_optimum};

/// Agents' utilities may dip this far below zero before IR counts as broken.
pub const PARTICIPATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "IC")]
    IncentiveCompatibility,
    #[serde(rename = "IR")]
    IndividualRationality,
    #[serde(rename = "SO")]
    SocialOptimality,
    PaymentProperty,
    SelectionEfficiency,
}

/// The set of true-misalignment profiles a check ranges over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum ScenarioFamily {
    /// Every assignment of grid points to agent positions, in lexicographic
    /// order (last agent varies fastest).
    Grid { n_agents: usize, theta_grid: Grid },
    /// One generated scenario per seed.
    Seeded {
        n_agents: usize,
        mode: ScenarioMode,
        seeds: Vec<u64>,
    },
}

impl ScenarioFamily {
    pub fn n_agents(&self) -> usize {
        match self {
            Self::Grid { n_agents, .. } | Self::Seeded { n_agents, .. } => *n_agents,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Grid {
                n_agents,
                theta_grid,
            } => theta_grid.len().pow(*n_agents as u32),
            Self::Seeded { seeds, .. } => seeds.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.n_agents() < 2 {
            return Err(MechError::Validation(format!(
                "need at least 2 agents, got {}",
                self.n_agents()
            )));
        }
        if let Self::Grid { theta_grid, .. } = self {
            if theta_grid.lo() < 0.0 {
                return Err(MechError::Validation(
                    "theta grid must be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// The `index`-th profile.
    pub fn profile(&self, index: usize, env: &Environment, report_grid: &Grid) -> Result<Profile> {
        match self {
            Self::Grid {
                n_agents,
                theta_grid,
            } => {
                let base = theta_grid.len();
                let mut digits = vec![0; *n_agents];
                let mut rest = index;
                for d in digits.iter_mut().rev() {
                    *d = rest % base;
                    rest /= base;
                }
                Ok(Profile {
                    index,
                    seed: None,
                    thetas: digits.into_iter().map(|d| theta_grid.point(d)).collect(),
                })
            }
            Self::Seeded {
                n_agents,
                mode,
                seeds,
            } => {
                let config = ScenarioConfig {
                    n_agents: *n_agents,
                    mode: *mode,
                    env: *env,
                    theta_grid: *report_grid,
                    policies: Vec::new(),
                };
                let seed = seeds[index];
                Ok(Profile {
                    index,
                    seed: Some(seed),
                    thetas: generate_scenario(&config, seed)?.true_thetas(),
                })
            }
        }
    }
}

/// One true-misalignment profile of a family. Agent `i` (0-based) has id
/// `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Profile {
    pub index: usize,
    pub seed: Option<u64>,
    pub thetas: Vec<f64>,
}

impl Profile {
    fn truthful_bids_except(&self, skip: usize) -> Vec<Bid> {
        self.thetas
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != skip)
            .map(|(j, &t)| Bid {
                agent_id: j + 1,
                reported_theta: t,
            })
            .collect()
    }

    fn truthful_scenario(&self, env: &Environment, report_grid: &Grid) -> Result<Scenario> {
        let mut scenario = Scenario::from_thetas(&self.thetas, &[], *env, *report_grid)?;
        scenario.seed = self.seed.unwrap_or(0);
        Ok(scenario)
    }
}

/// Everything a check needs besides the property itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckSetup {
    pub family: ScenarioFamily,
    pub env: Environment,
    /// Reports an agent may deviate to.
    pub report_grid: Grid,
}

impl CheckSetup {
    /// Grid family over `theta_grid` with deviations over the same grid.
    pub fn grid(n_agents: usize, theta_grid: Grid, env: Environment) -> Self {
        Self {
            family: ScenarioFamily::Grid {
                n_agents,
                theta_grid,
            },
            env,
            report_grid: theta_grid,
        }
    }

    fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.env.validate()
    }

    fn profiles(&self) -> Result<Vec<Profile>> {
        (0..self.family.len())
            .into_par_iter()
            .map(|i| self.family.profile(i, &self.env, &self.report_grid))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
#[serde(tag = "kind")]
pub enum Counterexample {
    /// A unilateral misreport that strictly beats the truthful report.
    ProfitableDeviation {
        profile: Profile,
        agent_id: AgentId,
        true_theta: f64,
        truthful: ReportEvaluation,
        deviation: ReportEvaluation,
        gain: f64,
    },
    /// Negative agent utility under truthful play. `chosen` marks the
    /// realization the winner actually picks; otherwise `gamma` is the worst
    /// feasible realization the winner could be held to.
    NegativeAgentUtility {
        profile: Profile,
        agent_id: AgentId,
        gamma: f64,
        utility: f64,
        chosen: bool,
    },
    NegativePrincipalUtility {
        profile: Profile,
        winner_id: AgentId,
        gamma: f64,
        principal_utility: f64,
    },
    WelfareGap {
        profile: Profile,
        winner_id: AgentId,
        gamma: f64,
        welfare: f64,
        efficient_agent_id: AgentId,
        optimal_gamma: f64,
        optimal_welfare: f64,
        gap: f64,
    },
    InefficientSelection {
        profile: Profile,
        selected_id: AgentId,
        efficient_id: AgentId,
    },
    Payment(PaymentWitness),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub property: Property,
    pub passed: bool,
    pub counterexamples: Vec<Counterexample>,
    /// Principal participation is reported but does not affect `passed`.
    pub principal_ir_violations: Vec<Counterexample>,
    pub scenarios_checked: usize,
    pub setup: CheckSetup,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn new(
        property: Property,
        setup: &CheckSetup,
        tolerance: f64,
        counterexamples: Vec<Counterexample>,
    ) -> Self {
        Self {
            property,
            passed: counterexamples.is_empty(),
            counterexamples,
            principal_ir_violations: Vec::new(),
            scenarios_checked: setup.family.len(),
            setup: setup.clone(),
            tolerance,
            notes: Vec::new(),
        }
    }
}

/// All strictly profitable deviations of one agent in one profile, in
/// increasing report order.
pub(crate) fn deviations_for(
    profile: &Profile,
    agent: usize,
    setup: &CheckSetup,
) -> Result<Vec<Counterexample>> {
    let theta = profile.thetas[agent];
    let others = profile.truthful_bids_except(agent);
    let truthful = evaluate_report(agent + 1, theta, theta, &others, &setup.env)?;
    let mut found = Vec::new();
    for report in setup.report_grid.points() {
        if report == theta || report < 0.0 {
            continue;
        }
        let deviation = evaluate_report(agent + 1, theta, report, &others, &setup.env)?;
        let gain = deviation.utility - truthful.utility;
        if gain > DECISION_MARGIN {
            found.push(Counterexample::ProfitableDeviation {
                profile: profile.clone(),
                agent_id: agent + 1,
                true_theta: theta,
                truthful,
                deviation,
                gain,
            });
        }
    }
    Ok(found)
}

fn gain_of(c: &Counterexample) -> f64 {
    match c {
        Counterexample::ProfitableDeviation { gain, .. } => *gain,
        _ => f64::NAN,
    }
}

/// Dominant-strategy check: with everyone else truthful, no report on the
/// report grid beats the truthful one by more than 1e-9. One witness (the
/// most profitable deviation) is kept per profile and agent.
pub fn check_incentive_compatibility(setup: &CheckSetup) -> Result<VerificationReport> {
    setup.validate()?;
    let profiles = setup.profiles()?;
    let found: Vec<Vec<Counterexample>> = profiles
        .par_iter()
        .map(|profile| {
            let mut out = Vec::new();
            for agent in 0..profile.thetas.len() {
                let devs = deviations_for(profile, agent, setup)?;
                let best = devs
                    .into_iter()
                    .fold(None::<Counterexample>, |best, c| match best {
                        Some(b) if gain_of(&b) >= gain_of(&c) => Some(b),
                        _ => Some(c),
                    });
                out.extend(best);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport::new(
        Property::IncentiveCompatibility,
        setup,
        DECISION_MARGIN,
        found.into_iter().flatten().collect(),
    ))
}

pub(crate) struct ParticipationFindings {
    pub agents: Vec<Counterexample>,
    pub principal: Option<Counterexample>,
}

pub(crate) fn participation_for(
    profile: &Profile,
    setup: &CheckSetup,
) -> Result<ParticipationFindings> {
    let outcome = run_game(&profile.truthful_scenario(&setup.env, &setup.report_grid)?)?;
    let w = outcome.winner_id - 1;
    let theta_w = profile.thetas[w];
    let mut agents = Vec::new();

    for (i, &u) in outcome.agent_utilities.iter().enumerate() {
        if u < -PARTICIPATION_TOL {
            agents.push(Counterexample::NegativeAgentUtility {
                profile: profile.clone(),
                agent_id: i + 1,
                gamma: outcome.gamma_realized,
                utility: u,
                chosen: true,
            });
        }
    }

    // The winner must also break even at every realization it could be
    // held to, not just the one it prefers.
    let payment = setup.env.prepare_payment(outcome.theta_bar, theta_w)?;
    let worst = feasible_realizations(theta_w, theta_w, &setup.env.gamma_grid)?
        .into_iter()
        .map(|g| (g, payment.at(g) - setup.env.cost.eval_unchecked(theta_w, g)))
        .fold((f64::NAN, f64::INFINITY), |acc, cur| {
            if cur.1 < acc.1 {
                cur
            } else {
                acc
            }
        });
    if worst.1 < -PARTICIPATION_TOL && agents.is_empty() {
        agents.push(Counterexample::NegativeAgentUtility {
            profile: profile.clone(),
            agent_id: outcome.winner_id,
            gamma: worst.0,
            utility: worst.1,
            chosen: false,
        });
    }

    let principal = (outcome.principal_utility < -PARTICIPATION_TOL).then(|| {
        Counterexample::NegativePrincipalUtility {
            profile: profile.clone(),
            winner_id: outcome.winner_id,
            gamma: outcome.gamma_realized,
            principal_utility: outcome.principal_utility,
        }
    });
    Ok(ParticipationFindings { agents, principal })
}

/// Agent participation under truthful play: every utility is at least
/// -1e-12, both at the winner's chosen realization and at every feasible
/// realization. Principal losses are listed separately and do not fail the
/// report.
pub fn check_individual_rationality(setup: &CheckSetup) -> Result<VerificationReport> {
    setup.validate()?;
    let profiles = setup.profiles()?;
    let findings: Vec<ParticipationFindings> = profiles
        .par_iter()
        .map(|p| participation_for(p, setup))
        .collect::<Result<_>>()?;
    let mut agents = Vec::new();
    let mut principal = Vec::new();
    for f in findings {
        agents.extend(f.agents);
        principal.extend(f.principal);
    }
    let mut report = VerificationReport::new(
        Property::IndividualRationality,
        setup,
        PARTICIPATION_TOL,
        agents,
    );
    report.principal_ir_violations = principal;
    if !report.principal_ir_violations.is_empty() {
        report.notes.push(format!(
            "principal participation fails in {} scenario(s); not covered by the agent IR guarantee",
            report.principal_ir_violations.len()
        ));
    }
    Ok(report)
}

pub(crate) fn welfare_gap_for(
    profile: &Profile,
    setup: &CheckSetup,
) -> Result<Option<Counterexample>> {
    let outcome = run_game(&profile.truthful_scenario(&setup.env, &setup.report_grid)?)?;
    let env = &setup.env;
    let efficient = efficient_agent(&profile.thetas, env.profit, env.cost, &env.gamma_grid)?;
    let (optimal_gamma, optimal_welfare) = social_optimum(
        profile.thetas[efficient],
        env.profit,
        env.cost,
        &env.gamma_grid,
    )?;
    let gap = optimal_welfare - outcome.social_welfare;
    Ok(
        (gap.abs() > DECISION_MARGIN).then(|| Counterexample::WelfareGap {
            profile: profile.clone(),
            winner_id: outcome.winner_id,
            gamma: outcome.gamma_realized,
            welfare: outcome.social_welfare,
            efficient_agent_id: efficient + 1,
            optimal_gamma,
            optimal_welfare,
            gap,
        }),
    )
}

/// Truthful play realizes the best welfare any agent could produce, within
/// 1e-9, on every profile.
pub fn check_social_optimality(setup: &CheckSetup) -> Result<VerificationReport> {
    setup.validate()?;
    let profiles = setup.profiles()?;
    let gaps: Vec<Option<Counterexample>> = profiles
        .par_iter()
        .map(|p| welfare_gap_for(p, setup))
        .collect::<Result<_>>()?;
    Ok(VerificationReport::new(
        Property::SocialOptimality,
        setup,
        DECISION_MARGIN,
        gaps.into_iter().flatten().collect(),
    ))
}

/// The mechanism's winner under truthful bids coincides with the
/// welfare-maximizing agent.
pub fn check_selection_efficiency(setup: &CheckSetup) -> Result<VerificationReport> {
    setup.validate()?;
    let profiles = setup.profiles()?;
    let env = &setup.env;
    let found: Vec<Option<Counterexample>> = profiles
        .par_iter()
        .map(|profile| {
            let bids: Vec<Bid> = profile
                .thetas
                .iter()
                .enumerate()
                .map(|(i, &t)| Bid::new(i + 1, t))
                .collect::<Result<_>>()?;
            let (selected_id, _) = crate::mechanism::select_winner(&bids)?;
            let efficient_id =
                efficient_agent(&profile.thetas, env.profit, env.cost, &env.gamma_grid)? + 1;
            Ok(
                (selected_id != efficient_id).then(|| Counterexample::InefficientSelection {
                    profile: profile.clone(),
                    selected_id,
                    efficient_id,
                }),
            )
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport::new(
        Property::SelectionEfficiency,
        setup,
        0.0,
        found.into_iter().flatten().collect(),
    ))
}
