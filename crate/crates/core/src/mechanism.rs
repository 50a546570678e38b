//! The principal's side: pick the lowest reported misalignment, pay the
//! winner according to a payment scheme, pay nobody else.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::feasible_realizations;
use crate::error::{ensure_finite, ensure_nonneg, MechError, Result};
use crate::grid::Grid;
use crate::model::{string_serde, AgentId, Bid, CostModel, ProfitModel, Realization};
use crate::notation::{expect_args, split_call};
use crate::verify::oracle::social_optimum;
use crate::DECISION_MARGIN;

/// Winner selection. Only the argmin-of-reports rule with lowest-id
/// tie-breaking is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionRule {
    #[default]
    ArgminReportedLowestId,
}

/// `p(x) = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Affine {
    pub intercept: f64,
    pub slope: f64,
}

impl Affine {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SchemeKind {
    /// `P = theta_bar - gamma`.
    SecondPriceLinear,
    /// `P = p(theta')`, blind to the realization.
    ReportOnly(Affine),
    /// `P = p(gamma)`, blind to the reports.
    RealizationOnly(Affine),
    /// `P = h(theta', gamma)`: reimburse the effort the winner claims.
    ClaimedEffort,
    /// `P = S(gamma) - Pi*(theta')`, with the optimum evaluated at the
    /// winner's report since the true misalignment is never observed.
    VcgStyle,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SecondPriceLinear => f.write_str("SecondPriceLinear"),
            Self::ReportOnly(p) => write!(f, "ReportOnly({},{})", p.intercept, p.slope),
            Self::RealizationOnly(p) => write!(f, "RealizationOnly({},{})", p.intercept, p.slope),
            Self::ClaimedEffort => f.write_str("ClaimedEffort"),
            Self::VcgStyle => f.write_str("VCGStyle"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s)?;
        let affine = |args: &[f64]| -> Result<Affine> {
            expect_args(name, args, 2)?;
            Ok(Affine {
                intercept: args[0],
                slope: args[1],
            })
        };
        match name {
            "SecondPriceLinear" => expect_args(name, &args, 0).map(|_| Self::SecondPriceLinear),
            "ReportOnly" => affine(&args).map(Self::ReportOnly),
            "RealizationOnly" => affine(&args).map(Self::RealizationOnly),
            "ClaimedEffort" => expect_args(name, &args, 0).map(|_| Self::ClaimedEffort),
            "VCGStyle" => expect_args(name, &args, 0).map(|_| Self::VcgStyle),
            other => Err(MechError::Config(format!(
                "unknown payment scheme `{other}`"
            ))),
        }
    }
}
string_serde!(SchemeKind);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PaymentScheme {
    pub kind: SchemeKind,
    /// Pay nothing when the winner realizes more misalignment than reported.
    pub enforce_realization_cap: bool,
}

impl PaymentScheme {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            enforce_realization_cap: true,
        }
    }

    pub fn second_price_linear() -> Self {
        Self::new(SchemeKind::SecondPriceLinear)
    }

    pub fn reads_report(&self) -> bool {
        matches!(
            self.kind,
            SchemeKind::ReportOnly(_) | SchemeKind::ClaimedEffort | SchemeKind::VcgStyle
        )
    }

    pub fn reads_second_bid(&self) -> bool {
        matches!(self.kind, SchemeKind::SecondPriceLinear)
    }
}

impl Default for PaymentScheme {
    fn default() -> Self {
        Self::second_price_linear()
    }
}

impl fmt::Display for PaymentScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

/// Returns the winner and the second-lowest bid `theta_bar`.
///
/// The winner is the lowest report; equal reports go to the lowest agent id,
/// so the result does not depend on the order of `bids`.
pub fn select_winner(bids: &[Bid]) -> Result<(AgentId, f64)> {
    if bids.len() < 2 {
        return Err(MechError::Arity {
            required: 2,
            got: bids.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for bid in bids {
        ensure_nonneg("reported theta", bid.reported_theta)?;
        if !seen.insert(bid.agent_id) {
            return Err(MechError::Validation(format!(
                "duplicate bid from agent {}",
                bid.agent_id
            )));
        }
    }
    let key = |b: &Bid| (b.reported_theta, b.agent_id);
    let winner = bids
        .iter()
        .min_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite bids"))
        .expect("at least two bids");
    let theta_bar = bids
        .iter()
        .filter(|b| b.agent_id != winner.agent_id)
        .map(|b| b.reported_theta)
        .fold(f64::INFINITY, f64::min);
    Ok((winner.agent_id, theta_bar))
}

/// Payment to the winner. Losers are never paid, so there is no loser path.
///
/// `ClaimedEffort` pays nothing for a realization above the report even when
/// the cap is disabled, as no effort can be claimed there.
pub fn compute_payment(
    scheme: &PaymentScheme,
    theta_bar: f64,
    realization: &Realization,
    reported_theta: f64,
    profit_model: Option<ProfitModel>,
    cost_model: CostModel,
    gamma_grid: &Grid,
) -> Result<f64> {
    ensure_nonneg("gamma", realization.gamma)?;
    let payment = PreparedPayment::new(
        scheme,
        theta_bar,
        reported_theta,
        profit_model,
        cost_model,
        gamma_grid,
    )?;
    Ok(payment.at(realization.gamma))
}

/// A payment scheme with the bids fixed, as a function of the realization
/// only. Anything that depends on the bids alone is computed once here.
#[derive(Debug, Clone, Copy)]
pub struct PreparedPayment {
    scheme: PaymentScheme,
    theta_bar: f64,
    reported_theta: f64,
    cost_model: CostModel,
    profit_model: Option<ProfitModel>,
    reported_optimum: f64,
}

impl PreparedPayment {
    pub fn new(
        scheme: &PaymentScheme,
        theta_bar: f64,
        reported_theta: f64,
        profit_model: Option<ProfitModel>,
        cost_model: CostModel,
        gamma_grid: &Grid,
    ) -> Result<Self> {
        ensure_finite("theta bar", theta_bar)?;
        ensure_nonneg("reported theta", reported_theta)?;
        cost_model.validate()?;
        let mut reported_optimum = f64::NAN;
        if scheme.kind == SchemeKind::VcgStyle {
            let profit = profit_model
                .ok_or_else(|| MechError::Config("VCGStyle payment needs a profit model".into()))?;
            profit.validate()?;
            reported_optimum = social_optimum(reported_theta, profit, cost_model, gamma_grid)?.1;
        }
        Ok(Self {
            scheme: *scheme,
            theta_bar,
            reported_theta,
            cost_model,
            profit_model,
            reported_optimum,
        })
    }

    /// Payment for realized misalignment `gamma >= 0`.
    pub fn at(&self, gamma: f64) -> f64 {
        if self.scheme.enforce_realization_cap && gamma > self.reported_theta {
            return 0.0;
        }
        match self.scheme.kind {
            SchemeKind::SecondPriceLinear => self.theta_bar - gamma,
            SchemeKind::ReportOnly(p) => p.eval(self.reported_theta),
            SchemeKind::RealizationOnly(p) => p.eval(gamma),
            SchemeKind::ClaimedEffort => {
                if gamma > self.reported_theta {
                    0.0
                } else {
                    self.cost_model.eval_unchecked(self.reported_theta, gamma)
                }
            }
            SchemeKind::VcgStyle => {
                let profit = self.profit_model.expect("checked in new");
                profit.eval_unchecked(gamma) - self.reported_optimum
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaymentCondition {
    /// Winner at or above the second bid: payment never exceeds effort cost.
    NeverProfitableAboveSecondBid,
    /// Winner strictly below the second bid: some realization is profitable.
    ProfitableBelowSecondBid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PaymentWitness {
    pub condition: PaymentCondition,
    pub theta_w: f64,
    pub theta_bar: f64,
    /// For the first condition the offending realization; for the second
    /// the realization that came closest to being profitable.
    pub gamma: f64,
    /// `P - h` at `gamma`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PaymentPropertyReport {
    pub scheme: PaymentScheme,
    pub cost_model: CostModel,
    pub condition1_holds: bool,
    pub condition2_holds: bool,
    pub violations: Vec<PaymentWitness>,
    pub theta_grid: Grid,
    pub gamma_grid: Grid,
    pub margin: f64,
}

impl PaymentPropertyReport {
    pub fn passed(&self) -> bool {
        self.condition1_holds && self.condition2_holds
    }
}

/// Grid certificate for the two conditions a second-bid payment must meet
/// to make truthful bidding dominant.
///
/// Only schemes that are a function of `(theta_bar, gamma)` qualify;
/// `VCGStyle` is admitted by evaluating its optimum at a truthful winner's
/// report. A failed second condition means no grid witness exists, not
/// that none exists off the grid.
pub fn check_payment_property(
    scheme: &PaymentScheme,
    cost_model: CostModel,
    profit_model: Option<ProfitModel>,
    theta_grid: &Grid,
    gamma_grid: &Grid,
) -> Result<PaymentPropertyReport> {
    if matches!(
        scheme.kind,
        SchemeKind::ReportOnly(_) | SchemeKind::ClaimedEffort
    ) {
        return Err(MechError::UnsupportedScheme(format!(
            "{scheme} depends on the winner's own report"
        )));
    }
    cost_model.validate()?;
    let thetas = theta_grid.points();
    if thetas.iter().any(|t| *t < 0.0) {
        return Err(MechError::Validation(
            "theta grid must be nonnegative".into(),
        ));
    }

    let per_theta: Vec<Result<Vec<PaymentWitness>>> = thetas
        .par_iter()
        .map(|&theta_w| {
            payment_witnesses_at(
                scheme,
                cost_model,
                profit_model,
                theta_w,
                &thetas,
                gamma_grid,
            )
        })
        .collect();

    let mut violations = Vec::new();
    for chunk in per_theta {
        violations.extend(chunk?);
    }
    let holds = |c: PaymentCondition| !violations.iter().any(|w| w.condition == c);
    Ok(PaymentPropertyReport {
        scheme: *scheme,
        cost_model,
        condition1_holds: holds(PaymentCondition::NeverProfitableAboveSecondBid),
        condition2_holds: holds(PaymentCondition::ProfitableBelowSecondBid),
        violations,
        theta_grid: *theta_grid,
        gamma_grid: *gamma_grid,
        margin: DECISION_MARGIN,
    })
}

/// Violations of both conditions for one winner misalignment, in
/// `theta_bar` order.
pub(crate) fn payment_witnesses_at(
    scheme: &PaymentScheme,
    cost_model: CostModel,
    profit_model: Option<ProfitModel>,
    theta_w: f64,
    second_bids: &[f64],
    gamma_grid: &Grid,
) -> Result<Vec<PaymentWitness>> {
    let gammas = feasible_realizations(theta_w, theta_w, gamma_grid)?;
    let mut found = Vec::new();
    for &theta_bar in second_bids {
        let payment = PreparedPayment::new(
            scheme,
            theta_bar,
            theta_w,
            profit_model,
            cost_model,
            gamma_grid,
        )?;
        let margins = gammas.iter().map(|&gamma| {
            (
                gamma,
                payment.at(gamma) - cost_model.eval_unchecked(theta_w, gamma),
            )
        });
        if theta_w >= theta_bar {
            found.extend(
                margins
                    .filter(|(_, m)| *m > DECISION_MARGIN)
                    .map(|(gamma, margin)| PaymentWitness {
                        condition: PaymentCondition::NeverProfitableAboveSecondBid,
                        theta_w,
                        theta_bar,
                        gamma,
                        margin,
                    }),
            );
        } else {
            let (gamma, margin) = margins.fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
            if margin <= DECISION_MARGIN {
                found.push(PaymentWitness {
                    condition: PaymentCondition::ProfitableBelowSecondBid,
                    theta_w,
                    theta_bar,
                    gamma,
                    margin,
                });
            }
        }
    }
    Ok(found)
}
