//! Runs one game instance through the full timeline: bids, winner
//! selection, realization, payment, accounting.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{best_realization, best_response_bid, Environment};
use crate::error::{ensure_nonneg, MechError, Result};
use crate::grid::Grid;
use crate::mechanism::select_winner;
use crate::model::{
    AgentId, AgentProfile, Bid, MisalignmentMetric, Policy, PriorityVector, Realization,
    RealizationRule,
};

/// Iterated best response stops after this many rounds.
pub const MAX_BID_ROUNDS: usize = 20;
/// A bid profile is a fixed point when no bid moved by more than this.
pub const BID_FIXED_POINT_TOL: f64 = 1e-9;

/// Uniform double in `[0, 1)` from the top 53 bits of a 64-bit draw.
pub fn unit_f64(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum ScenarioMode {
    /// True misalignments drawn uniformly from `[0, theta_max]`.
    Scalar { theta_max: f64 },
    /// Principal and agent priorities drawn uniformly from `[0, 1]^dimension`,
    /// misalignments derived with `metric`.
    Vector {
        dimension: usize,
        metric: MisalignmentMetric,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub mode: ScenarioMode,
    pub env: Environment,
    /// Report grid used by strategic agents.
    pub theta_grid: Grid,
    /// One policy per agent; empty means everyone is truthful.
    pub policies: Vec<Policy>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(MechError::Validation(format!(
                "need at least 2 agents, got {}",
                self.n_agents
            )));
        }
        if !self.policies.is_empty() && self.policies.len() != self.n_agents {
            return Err(MechError::Validation(format!(
                "{} policies given for {} agents",
                self.policies.len(),
                self.n_agents
            )));
        }
        match self.mode {
            ScenarioMode::Scalar { theta_max } => ensure_nonneg("theta max", theta_max)?,
            ScenarioMode::Vector { dimension: 0, .. } => {
                return Err(MechError::Validation(
                    "priority dimension must be >= 1".into(),
                ))
            }
            ScenarioMode::Vector { .. } => {}
        }
        self.env.validate()
    }

    fn policy(&self, index: usize) -> Policy {
        self.policies
            .get(index)
            .copied()
            .unwrap_or(Policy::Truthful)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub seed: u64,
    pub principal_priority: Option<PriorityVector>,
    pub agents: Vec<AgentProfile>,
    pub metric: Option<MisalignmentMetric>,
    pub env: Environment,
    pub theta_grid: Grid,
}

impl Scenario {
    /// A scalar-mode scenario with agents numbered `1..=N`.
    pub fn from_thetas(
        thetas: &[f64],
        policies: &[Policy],
        env: Environment,
        theta_grid: Grid,
    ) -> Result<Self> {
        let agents = thetas
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let policy = policies.get(i).copied().unwrap_or(Policy::Truthful);
                AgentProfile::scalar(i + 1, t, policy)
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = Self {
            seed: 0,
            principal_priority: None,
            agents,
            metric: None,
            env,
            theta_grid,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.len() < 2 {
            return Err(MechError::Validation(format!(
                "need at least 2 agents, got {}",
                self.agents.len()
            )));
        }
        if let Some(x) = &self.principal_priority {
            for agent in &self.agents {
                if let Some(y) = agent.true_priority() {
                    if y.len() != x.len() {
                        return Err(MechError::Dimension {
                            left: x.len(),
                            right: y.len(),
                        });
                    }
                }
            }
        }
        self.env.validate()
    }

    pub fn true_thetas(&self) -> Vec<f64> {
        self.agents.iter().map(AgentProfile::true_theta).collect()
    }

    fn index_of(&self, id: AgentId) -> usize {
        self.agents
            .iter()
            .position(|a| a.id == id)
            .expect("winner is one of the bidders")
    }
}

/// Deterministic in `(config, seed)`. Scalar draws are one per agent in id
/// order; vector draws fill the principal's priorities first, then each
/// agent's.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let (principal_priority, agents, metric) = match config.mode {
        ScenarioMode::Scalar { theta_max } => {
            let agents = (0..config.n_agents)
                .map(|i| {
                    AgentProfile::scalar(i + 1, unit_f64(&mut rng) * theta_max, config.policy(i))
                })
                .collect::<Result<Vec<_>>>()?;
            (None, agents, None)
        }
        ScenarioMode::Vector { dimension, metric } => {
            let mut draw =
                || PriorityVector::new((0..dimension).map(|_| unit_f64(&mut rng)).collect());
            let x = draw()?;
            let agents = (0..config.n_agents)
                .map(|i| {
                    AgentProfile::from_priorities(i + 1, metric, &x, draw()?, config.policy(i))
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(x), agents, Some(metric))
        }
    };
    Ok(Scenario {
        seed,
        principal_priority,
        agents,
        metric,
        env: config.env,
        theta_grid: config.theta_grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Outcome {
    pub seed: u64,
    pub winner_id: AgentId,
    pub winner_true_theta: f64,
    pub theta_bar: f64,
    pub bids: Vec<Bid>,
    pub gamma_realized: f64,
    pub profit: f64,
    pub effort_cost: f64,
    /// Indexed like the scenario's agents.
    pub payments: Vec<f64>,
    pub agent_utilities: Vec<f64>,
    pub principal_utility: f64,
    pub social_welfare: f64,
    /// Rounds of iterated best response; 0 when nobody is strategic.
    pub bid_rounds: usize,
    pub bids_converged: bool,
}

impl Outcome {
    pub fn winner_payment(&self) -> f64 {
        self.payments.iter().sum()
    }

    pub fn winner_utility(&self) -> f64 {
        self.agent_utilities.iter().sum()
    }
}

/// `S(gamma_w) - h(theta_w, gamma_w)`.
pub fn social_welfare(profit: f64, effort_cost: f64) -> f64 {
    profit - effort_cost
}

struct BidProfile {
    bids: Vec<Bid>,
    rounds: usize,
    converged: bool,
}

fn collect_bids(scenario: &Scenario) -> Result<BidProfile> {
    let mut bids = scenario
        .agents
        .iter()
        .map(|a| {
            let report = match a.policy {
                Policy::Fixed { report, .. } => report,
                Policy::Truthful | Policy::Strategic => a.true_theta(),
            };
            Bid::new(a.id, report)
        })
        .collect::<Result<Vec<_>>>()?;

    let strategic: Vec<usize> = scenario
        .agents
        .iter()
        .enumerate()
        .filter(|(_, a)| a.policy == Policy::Strategic)
        .map(|(i, _)| i)
        .collect();
    if strategic.is_empty() {
        return Ok(BidProfile {
            bids,
            rounds: 0,
            converged: true,
        });
    }

    // Sequential best responses from the truthful profile.
    for round in 1..=MAX_BID_ROUNDS {
        let mut moved: f64 = 0.0;
        for &i in &strategic {
            let agent = &scenario.agents[i];
            let others: Vec<Bid> = bids
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| *b)
                .collect();
            let response = best_response_bid(
                agent.id,
                agent.true_theta(),
                &others,
                &scenario.theta_grid,
                &scenario.env,
            )?;
            moved = moved.max((response.reported_theta - bids[i].reported_theta).abs());
            bids[i].reported_theta = response.reported_theta;
        }
        if moved <= BID_FIXED_POINT_TOL {
            return Ok(BidProfile {
                bids,
                rounds: round,
                converged: true,
            });
        }
    }
    Ok(BidProfile {
        bids,
        rounds: MAX_BID_ROUNDS,
        converged: false,
    })
}

pub fn run_game(scenario: &Scenario) -> Result<Outcome> {
    scenario.validate()?;
    let env = &scenario.env;
    let profile = collect_bids(scenario)?;
    let (winner_id, theta_bar) = select_winner(&profile.bids)?;
    let w = scenario.index_of(winner_id);
    let winner = &scenario.agents[w];
    let theta_w = winner.true_theta();
    let reported_w = profile.bids[w].reported_theta;

    let rule = match winner.policy {
        Policy::Fixed { realization, .. } => realization,
        _ => RealizationRule::Optimize,
    };
    let gamma = match rule {
        RealizationRule::Optimize => best_realization(theta_w, reported_w, theta_bar, env)?.gamma,
        RealizationRule::NoEffort => theta_w.min(reported_w),
        RealizationRule::FullAlignment => 0.0,
        RealizationRule::At(g) => g,
    };
    let realization = Realization::new(winner_id, gamma, theta_w, reported_w)?;

    let payment = env
        .prepare_payment(theta_bar, reported_w)?
        .at(realization.gamma);
    let effort_cost = env.cost.eval_unchecked(theta_w, realization.gamma);
    let profit = env.profit.eval_unchecked(realization.gamma);

    let n = scenario.agents.len();
    let mut payments = vec![0.0; n];
    let mut agent_utilities = vec![0.0; n];
    payments[w] = payment;
    agent_utilities[w] = payment - effort_cost;

    Ok(Outcome {
        seed: scenario.seed,
        winner_id,
        winner_true_theta: theta_w,
        theta_bar,
        bids: profile.bids,
        gamma_realized: realization.gamma,
        profit,
        effort_cost,
        payments,
        agent_utilities,
        principal_utility: profit - payment,
        social_welfare: social_welfare(profit, effort_cost),
        bid_rounds: profile.rounds,
        bids_converged: profile.converged,
    })
}

/// Generates and plays one scenario per seed. Output order follows `seeds`
/// whatever the size of the current rayon pool.
pub fn run_batch(config: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<(Scenario, Outcome)>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let scenario = generate_scenario(config, seed)?;
            let outcome = run_game(&scenario)?;
            Ok((scenario, outcome))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::TieBreakPolicy;
    use crate::mechanism::PaymentScheme;
    use crate::model::{CostModel, ProfitModel};

    fn env(tie_break: TieBreakPolicy) -> Environment {
        Environment {
            scheme: PaymentScheme::second_price_linear(),
            cost: CostModel::Linear,
            profit: ProfitModel::default(),
            gamma_grid: Grid::new(0.0, 4.0, 0.05).unwrap(),
            tie_break,
        }
    }

    fn theta_grid() -> Grid {
        Grid::new(0.0, 4.0, 0.25).unwrap()
    }

    fn config(n: usize, theta_max: f64) -> ScenarioConfig {
        ScenarioConfig {
            n_agents: n,
            mode: ScenarioMode::Scalar { theta_max },
            env: env(TieBreakPolicy::ProSocial),
            theta_grid: theta_grid(),
            policies: vec![],
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn splitmix_matches_reference_stream() {
        // first outputs of the reference splitmix64.c for seed 0
        let mut rng = SplitMix64::seed_from_u64(0);
        assert_eq!(rng.next_u64(), 0xe220a8397b1dcdaf);
        assert_eq!(rng.next_u64(), 0x6e789e6aa1b965f4);
    }

    #[test]
    fn unit_draws_are_in_range() {
        let mut rng = SplitMix64::seed_from_u64(42);
        for _ in 0..1000 {
            let u = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn worked_example_prosocial() {
        let s = Scenario::from_thetas(
            &[2.0, 3.0, 4.0],
            &[],
            env(TieBreakPolicy::ProSocial),
            theta_grid(),
        )
        .unwrap();
        let o = run_game(&s).unwrap();
        assert_eq!(o.winner_id, 1);
        assert_eq!(o.theta_bar, 3.0);
        assert!(close(o.gamma_realized, 0.5));
        assert!(close(o.payments[0], 2.5));
        assert_eq!(&o.payments[1..], &[0.0, 0.0]);
        assert!(close(o.agent_utilities[0], 1.0));
        assert_eq!(&o.agent_utilities[1..], &[0.0, 0.0]);
        assert!(close(o.principal_utility, 1.25));
        assert!(close(o.social_welfare, 2.25));
    }

    #[test]
    fn worked_example_lazy() {
        let s = Scenario::from_thetas(
            &[2.0, 3.0, 4.0],
            &[],
            env(TieBreakPolicy::Lazy),
            theta_grid(),
        )
        .unwrap();
        let o = run_game(&s).unwrap();
        assert_eq!(o.gamma_realized, 2.0);
        assert!(close(o.agent_utilities[0], 1.0));
        assert!(close(o.social_welfare, 0.0));
        assert!(close(o.principal_utility, -1.0));
    }

    #[test]
    fn lone_strategic_agent_plays_truthfully() {
        let e = env(TieBreakPolicy::ProSocial);
        let truthful =
            run_game(&Scenario::from_thetas(&[2.0, 3.0, 4.0], &[], e, theta_grid()).unwrap())
                .unwrap();
        for k in 0..3 {
            let mut policies = vec![Policy::Truthful; 3];
            policies[k] = Policy::Strategic;
            let strategic = run_game(
                &Scenario::from_thetas(&[2.0, 3.0, 4.0], &policies, e, theta_grid()).unwrap(),
            )
            .unwrap();
            assert_eq!(strategic.bids, truthful.bids);
            assert_eq!(strategic.winner_id, truthful.winner_id);
            assert_eq!(strategic.gamma_realized, truthful.gamma_realized);
            assert_eq!(strategic.social_welfare, truthful.social_welfare);
            assert!(strategic.bids_converged);
            assert_eq!(strategic.bid_rounds, 1);
        }
    }

    #[test]
    fn fixed_policy_realization_rules() {
        let e = env(TieBreakPolicy::ProSocial);
        let fixed = |realization| Policy::Fixed {
            report: 2.5,
            realization,
        };
        let run = |p: Policy| {
            run_game(
                &Scenario::from_thetas(&[2.0, 3.0], &[p, Policy::Truthful], e, theta_grid())
                    .unwrap(),
            )
        };
        assert_eq!(
            run(fixed(RealizationRule::NoEffort))
                .unwrap()
                .gamma_realized,
            2.0
        );
        assert_eq!(
            run(fixed(RealizationRule::FullAlignment))
                .unwrap()
                .gamma_realized,
            0.0
        );
        assert_eq!(
            run(fixed(RealizationRule::At(1.0))).unwrap().gamma_realized,
            1.0
        );
        assert!(matches!(
            run(fixed(RealizationRule::At(2.2))),
            Err(MechError::Feasibility { .. })
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let c = config(3, 4.0);
        assert_eq!(
            generate_scenario(&c, 7).unwrap(),
            generate_scenario(&c, 7).unwrap()
        );
        assert_ne!(
            generate_scenario(&c, 7).unwrap(),
            generate_scenario(&c, 8).unwrap()
        );
        for t in generate_scenario(&c, 7).unwrap().true_thetas() {
            assert!((0.0..4.0).contains(&t));
        }
    }

    #[test]
    fn vector_mode_thetas_are_metric_values() {
        let c = ScenarioConfig {
            mode: ScenarioMode::Vector {
                dimension: 5,
                metric: MisalignmentMetric::L1,
            },
            ..config(3, 4.0)
        };
        let s = generate_scenario(&c, 11).unwrap();
        let x = s.principal_priority.as_ref().unwrap();
        assert_eq!(x.len(), 5);
        for a in &s.agents {
            let y = a.true_priority().unwrap();
            let m = crate::model::misalignment(MisalignmentMetric::L1, x, y).unwrap();
            assert_eq!(a.true_theta(), m);
        }
    }

    #[test]
    fn zero_range_gives_zero_thetas() {
        let s = generate_scenario(&config(2, 0.0), 3).unwrap();
        assert_eq!(s.true_thetas(), vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_single_agent() {
        assert!(generate_scenario(&config(1, 4.0), 3).is_err());
        assert!(
            Scenario::from_thetas(&[1.0], &[], env(TieBreakPolicy::ProSocial), theta_grid())
                .is_err()
        );
    }

    #[test]
    fn equal_bids_go_to_agent_one_with_zero_utility() {
        let s = Scenario::from_thetas(
            &[1.5, 1.5, 1.5],
            &[],
            env(TieBreakPolicy::ProSocial),
            theta_grid(),
        )
        .unwrap();
        let o = run_game(&s).unwrap();
        assert_eq!(o.winner_id, 1);
        assert_eq!(o.theta_bar, 1.5);
        assert!(o.agent_utilities[0].abs() < 1e-12);
    }

    #[test]
    fn social_welfare_examples() {
        assert_eq!(social_welfare(3.75, 1.5), 2.25);
        assert_eq!(social_welfare(4.0, 2.0), 2.0);
        let s_theta = 4.0 - 1.5 * 1.5;
        assert_eq!(social_welfare(s_theta, 0.0), s_theta);
    }

    #[test]
    fn batch_is_ordered_and_reproducible() {
        let c = config(3, 4.0);
        let seeds: Vec<u64> = (0..32).collect();
        let a = run_batch(&c, &seeds).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_batch(&c, &seeds).unwrap());
        assert_eq!(a, b);
        assert!(a.iter().zip(&seeds).all(|((_, o), s)| o.seed == *s));
    }
}
