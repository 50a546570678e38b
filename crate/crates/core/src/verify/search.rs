use serde::{Deserialize, Serialize};

use super::{
    deviations_for, participation_for, welfare_gap_for, CheckSetup, Counterexample, Property,
};
use crate::error::{MechError, Result};
use crate::mechanism::{payment_witnesses_at, SchemeKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchBudget {
    /// Upper bound on grid evaluations: candidate reports for IC, profiles
    /// for IR and SO, `(theta_w, theta_bar)` pairs for the payment property.
    pub max_evaluations: usize,
    /// Only witnesses whose violation exceeds this count (utility gain for
    /// IC, shortfall for IR, welfare gap for SO). Ignored for the payment
    /// property.
    pub min_violation: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_evaluations: 10_000_000,
            min_violation: crate::DECISION_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
#[serde(tag = "result")]
pub enum SearchOutcome {
    Found {
        witness: Box<Counterexample>,
        evaluations: usize,
    },
    /// Whole grid covered, no witness.
    NoneFound { evaluations: usize },
    /// Budget ran out first; nothing is claimed about the rest of the grid.
    Inconclusive { evaluations: usize, required: usize },
}

impl SearchOutcome {
    pub fn witness(&self) -> Option<&Counterexample> {
        match self {
            Self::Found { witness, .. } => Some(witness),
            _ => None,
        }
    }
}

fn violation(c: &Counterexample) -> f64 {
    match c {
        Counterexample::ProfitableDeviation { gain, .. } => *gain,
        Counterexample::NegativeAgentUtility { utility, .. } => -utility,
        Counterexample::WelfareGap { gap, .. } => gap.abs(),
        _ => f64::INFINITY,
    }
}

/// Sequential scan for the lexicographically first witness against
/// `property`: profiles in family order, then agents by id, then reports in
/// increasing order.
pub fn search_counterexample(
    setup: &CheckSetup,
    property: Property,
    budget: SearchBudget,
) -> Result<SearchOutcome> {
    setup.validate()?;
    match property {
        Property::PaymentProperty => return search_payment(setup, budget),
        Property::SelectionEfficiency => {
            return Err(MechError::Config(
                "selection efficiency has no counterexample search; use the check".into(),
            ))
        }
        _ => {}
    }
    let n = setup.family.n_agents();
    let per_profile = match property {
        Property::IncentiveCompatibility => n * (setup.report_grid.len() + 1),
        _ => 1,
    };
    let required = setup.family.len() * per_profile;
    let mut evaluations = 0;
    for index in 0..setup.family.len() {
        if evaluations + per_profile > budget.max_evaluations {
            return Ok(SearchOutcome::Inconclusive {
                evaluations,
                required,
            });
        }
        evaluations += per_profile;
        let profile = setup
            .family
            .profile(index, &setup.env, &setup.report_grid)?;
        let candidates = match property {
            Property::IncentiveCompatibility => {
                let mut all = Vec::new();
                for agent in 0..n {
                    all.extend(deviations_for(&profile, agent, setup)?);
                }
                all
            }
            Property::IndividualRationality => participation_for(&profile, setup)?.agents,
            Property::SocialOptimality => welfare_gap_for(&profile, setup)?.into_iter().collect(),
            _ => unreachable!(),
        };
        if let Some(w) = candidates
            .into_iter()
            .find(|c| violation(c) > budget.min_violation)
        {
            return Ok(SearchOutcome::Found {
                witness: Box::new(w),
                evaluations,
            });
        }
    }
    Ok(SearchOutcome::NoneFound { evaluations })
}

fn search_payment(setup: &CheckSetup, budget: SearchBudget) -> Result<SearchOutcome> {
    let scheme = setup.env.scheme;
    if matches!(
        scheme.kind,
        SchemeKind::ReportOnly(_) | SchemeKind::ClaimedEffort
    ) {
        return Err(MechError::UnsupportedScheme(format!(
            "{scheme} depends on the winner's own report"
        )));
    }
    let thetas = setup.report_grid.points();
    let required = thetas.len() * thetas.len();
    let mut evaluations = 0;
    for &theta_w in &thetas {
        if evaluations + thetas.len() > budget.max_evaluations {
            return Ok(SearchOutcome::Inconclusive {
                evaluations,
                required,
            });
        }
        evaluations += thetas.len();
        let found = payment_witnesses_at(
            &scheme,
            setup.env.cost,
            Some(setup.env.profit),
            theta_w,
            &thetas,
            &setup.env.gamma_grid,
        )?;
        if let Some(w) = found.into_iter().next() {
            return Ok(SearchOutcome::Found {
                witness: Box::new(Counterexample::Payment(w)),
                evaluations,
            });
        }
    }
    Ok(SearchOutcome::NoneFound { evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Environment, TieBreakPolicy};
    use crate::grid::Grid;
    use crate::mechanism::{PaymentCondition, PaymentScheme};
    use crate::model::{CostModel, ProfitModel};

    fn setup(kind: SchemeKind) -> CheckSetup {
        CheckSetup::grid(
            3,
            Grid::new(0.0, 4.0, 0.5).unwrap(),
            Environment {
                scheme: PaymentScheme::new(kind),
                cost: CostModel::Linear,
                profit: ProfitModel::default(),
                gamma_grid: Grid::new(0.0, 4.0, 0.25).unwrap(),
                tie_break: TieBreakPolicy::ProSocial,
            },
        )
    }

    #[test]
    fn claimed_effort_witness_has_no_effort() {
        let out = search_counterexample(
            &setup(SchemeKind::ClaimedEffort),
            Property::IncentiveCompatibility,
            SearchBudget::default(),
        )
        .unwrap();
        let Some(Counterexample::ProfitableDeviation {
            true_theta,
            deviation,
            ..
        }) = out.witness()
        else {
            panic!("expected a deviation, got {out:?}");
        };
        let r = deviation.realization.unwrap();
        assert_eq!(r.gamma, *true_theta);
        assert!(r.payment > 0.0);
    }

    #[test]
    fn second_price_linear_has_no_ic_witness() {
        let out = search_counterexample(
            &setup(SchemeKind::SecondPriceLinear),
            Property::IncentiveCompatibility,
            SearchBudget::default(),
        )
        .unwrap();
        assert!(matches!(out, SearchOutcome::NoneFound { .. }));
    }

    #[test]
    fn vcg_payment_witness_is_condition_two() {
        let out = search_counterexample(
            &setup(SchemeKind::VcgStyle),
            Property::PaymentProperty,
            SearchBudget::default(),
        )
        .unwrap();
        let Some(Counterexample::Payment(w)) = out.witness() else {
            panic!()
        };
        assert_eq!(w.condition, PaymentCondition::ProfitableBelowSecondBid);
        assert!(w.theta_w < w.theta_bar);
    }

    #[test]
    fn small_budget_is_inconclusive_not_pass() {
        let budget = SearchBudget {
            max_evaluations: 10,
            ..SearchBudget::default()
        };
        let out = search_counterexample(
            &setup(SchemeKind::SecondPriceLinear),
            Property::IncentiveCompatibility,
            budget,
        )
        .unwrap();
        assert!(matches!(out, SearchOutcome::Inconclusive { .. }));
    }

    #[test]
    fn search_is_deterministic() {
        let s = setup(SchemeKind::VcgStyle);
        let a = search_counterexample(
            &s,
            Property::IncentiveCompatibility,
            SearchBudget::default(),
        )
        .unwrap();
        let b = search_counterexample(
            &s,
            Property::IncentiveCompatibility,
            SearchBudget::default(),
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.witness().is_some());
    }
}
