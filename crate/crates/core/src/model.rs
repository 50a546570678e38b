//! Domain types for priorities, misalignment and the cost/profit families.
//!
//! Priorities are dimensionless real weights, one per task. Everything
//! downstream of [`misalignment`] works on scalar misalignments: the true
//! one (`theta`), the reported one (`theta'`) and the realized one
//! (`gamma`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonneg, MechError, Result};
use crate::notation::{expect_args, split_call};

pub type AgentId = usize;

macro_rules! string_serde {
    ($ty:ty) => {
        impl From<$ty> for String {
            fn from(value: $ty) -> String {
                value.to_string()
            }
        }

        impl TryFrom<String> for $ty {
            type Error = MechError;

            fn try_from(value: String) -> Result<Self> {
                value.parse()
            }
        }
    };
}
pub(crate) use string_serde;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityVector(Vec<f64>);

impl PriorityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MechError::Validation(
                "priority vector needs at least one task".into(),
            ));
        }
        for (k, v) in values.iter().enumerate() {
            ensure_finite(&format!("priority[{k}]"), *v)?;
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MisalignmentMetric {
    L1,
    L2,
    Linf,
}

impl fmt::Display for MisalignmentMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L1 => "L1",
            Self::L2 => "L2",
            Self::Linf => "Linf",
        })
    }
}

impl FromStr for MisalignmentMetric {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "L1" => Ok(Self::L1),
            "L2" => Ok(Self::L2),
            "Linf" => Ok(Self::Linf),
            other => Err(MechError::Config(format!("unknown metric `{other}`"))),
        }
    }
}
string_serde!(MisalignmentMetric);

/// Norm of `a - b` under the chosen metric.
pub fn misalignment(
    metric: MisalignmentMetric,
    a: &PriorityVector,
    b: &PriorityVector,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MechError::Dimension {
            left: a.len(),
            right: b.len(),
        });
    }
    let diffs = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs());
    let value = match metric {
        MisalignmentMetric::L1 => diffs.sum(),
        MisalignmentMetric::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        MisalignmentMetric::Linf => diffs.fold(0.0, f64::max),
    };
    Ok(value)
}

/// Effort cost `h(theta, gamma)` of moving from misalignment `theta` down to
/// `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CostModel {
    Linear,
    Quadratic,
    Power(f64),
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if let Self::Power(p) = *self {
            if !p.is_finite() || p < 1.0 {
                return Err(MechError::Validation(format!(
                    "cost exponent must be >= 1, got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear) || matches!(self, Self::Power(p) if *p == 1.0)
    }

    // Caller guarantees 0 <= gamma <= theta.
    pub(crate) fn eval_unchecked(&self, theta: f64, gamma: f64) -> f64 {
        let d = theta - gamma;
        match *self {
            Self::Linear => d,
            Self::Quadratic => d * d,
            Self::Power(p) => d.powf(p),
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear => f.write_str("Linear"),
            Self::Quadratic => f.write_str("Quadratic"),
            Self::Power(p) => write!(f, "Power({p})"),
        }
    }
}

impl FromStr for CostModel {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s)?;
        let model = match name {
            "Linear" => {
                expect_args(name, &args, 0)?;
                Self::Linear
            }
            "Quadratic" => {
                expect_args(name, &args, 0)?;
                Self::Quadratic
            }
            "Power" => {
                expect_args(name, &args, 1)?;
                Self::Power(args[0])
            }
            other => return Err(MechError::Config(format!("unknown cost model `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}
string_serde!(CostModel);

/// `h(theta, gamma)`; rejects `gamma > theta` since an agent never increases
/// its own misalignment.
pub fn effort_cost(model: CostModel, theta: f64, gamma: f64) -> Result<f64> {
    model.validate()?;
    ensure_nonneg("theta", theta)?;
    ensure_nonneg("gamma", gamma)?;
    if gamma > theta {
        return Err(MechError::Feasibility {
            gamma,
            bound: theta,
            bound_name: "true misalignment",
        });
    }
    Ok(model.eval_unchecked(theta, gamma))
}

/// Principal's profit `S(gamma)`, strictly decreasing in the realized
/// misalignment. Not clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ProfitModel {
    LinearDecreasing { s0: f64, slope: f64 },
    QuadraticDecreasing { s0: f64, curvature: f64 },
}

impl ProfitModel {
    pub fn validate(&self) -> Result<()> {
        let (s0, rate, what) = match *self {
            Self::LinearDecreasing { s0, slope } => (s0, slope, "slope"),
            Self::QuadraticDecreasing { s0, curvature } => (s0, curvature, "curvature"),
        };
        ensure_nonneg("profit s0", s0)?;
        ensure_finite(what, rate)?;
        if rate <= 0.0 {
            return Err(MechError::Validation(format!(
                "profit {what} must be > 0, got {rate}"
            )));
        }
        Ok(())
    }

    pub(crate) fn eval_unchecked(&self, gamma: f64) -> f64 {
        match *self {
            Self::LinearDecreasing { s0, slope } => s0 - slope * gamma,
            Self::QuadraticDecreasing { s0, curvature } => s0 - curvature * gamma * gamma,
        }
    }
}

impl Default for ProfitModel {
    fn default() -> Self {
        Self::QuadraticDecreasing {
            s0: 4.0,
            curvature: 1.0,
        }
    }
}

impl fmt::Display for ProfitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LinearDecreasing { s0, slope } => write!(f, "LinearDecreasing({s0},{slope})"),
            Self::QuadraticDecreasing { s0, curvature } => {
                write!(f, "QuadraticDecreasing({s0},{curvature})")
            }
        }
    }
}

impl FromStr for ProfitModel {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_call(s)?;
        let model = match name {
            "LinearDecreasing" => {
                expect_args(name, &args, 2)?;
                Self::LinearDecreasing {
                    s0: args[0],
                    slope: args[1],
                }
            }
            "QuadraticDecreasing" => {
                expect_args(name, &args, 2)?;
                Self::QuadraticDecreasing {
                    s0: args[0],
                    curvature: args[1],
                }
            }
            other => return Err(MechError::Config(format!("unknown profit model `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}
string_serde!(ProfitModel);

pub fn profit(model: ProfitModel, gamma: f64) -> Result<f64> {
    model.validate()?;
    ensure_nonneg("gamma", gamma)?;
    Ok(model.eval_unchecked(gamma))
}

/// How a winner that does not optimize picks its realized misalignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RealizationRule {
    /// Maximize own utility, resolving ties with the scenario's tie-break.
    Optimize,
    /// Keep the largest feasible misalignment.
    NoEffort,
    /// Realize zero misalignment.
    FullAlignment,
    /// Realize exactly this misalignment; must be feasible.
    At(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum Policy {
    Truthful,
    Strategic,
    Fixed {
        report: f64,
        realization: RealizationRule,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentProfile {
    pub id: AgentId,
    true_theta: f64,
    true_priority: Option<PriorityVector>,
    pub policy: Policy,
}

impl AgentProfile {
    pub fn scalar(id: AgentId, true_theta: f64, policy: Policy) -> Result<Self> {
        ensure_nonneg("true theta", true_theta)?;
        Self::check_policy(&policy)?;
        Ok(Self {
            id,
            true_theta,
            true_priority: None,
            policy,
        })
    }

    /// Vector-mode agent; its true misalignment is derived from the
    /// principal's priorities and never set independently.
    pub fn from_priorities(
        id: AgentId,
        metric: MisalignmentMetric,
        principal: &PriorityVector,
        own: PriorityVector,
        policy: Policy,
    ) -> Result<Self> {
        let true_theta = misalignment(metric, principal, &own)?;
        Self::check_policy(&policy)?;
        Ok(Self {
            id,
            true_theta,
            true_priority: Some(own),
            policy,
        })
    }

    fn check_policy(policy: &Policy) -> Result<()> {
        if let Policy::Fixed {
            report,
            realization,
        } = policy
        {
            ensure_nonneg("fixed report", *report)?;
            if let RealizationRule::At(g) = realization {
                ensure_nonneg("fixed realization", *g)?;
            }
        }
        Ok(())
    }

    pub fn true_theta(&self) -> f64 {
        self.true_theta
    }

    pub fn true_priority(&self) -> Option<&PriorityVector> {
        self.true_priority.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bid {
    pub agent_id: AgentId,
    pub reported_theta: f64,
}

impl Bid {
    pub fn new(agent_id: AgentId, reported_theta: f64) -> Result<Self> {
        ensure_nonneg("reported theta", reported_theta)?;
        Ok(Self {
            agent_id,
            reported_theta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Realization {
    pub agent_id: AgentId,
    pub gamma: f64,
}

impl Realization {
    /// Checks `0 <= gamma <= min(true theta, reported theta)`.
    pub fn new(
        agent_id: AgentId,
        gamma: f64,
        true_theta: f64,
        reported_theta: f64,
    ) -> Result<Self> {
        ensure_nonneg("gamma", gamma)?;
        if gamma > true_theta {
            return Err(MechError::Feasibility {
                gamma,
                bound: true_theta,
                bound_name: "true misalignment",
            });
        }
        if gamma > reported_theta {
            return Err(MechError::Feasibility {
                gamma,
                bound: reported_theta,
                bound_name: "reported misalignment",
            });
        }
        Ok(Self { agent_id, gamma })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> PriorityVector {
        PriorityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn misalignment_examples() {
        use MisalignmentMetric::*;
        assert_eq!(
            misalignment(L1, &pv(&[1., 2., 3.]), &pv(&[1., 2., 3.])).unwrap(),
            0.0
        );
        assert_eq!(
            misalignment(L1, &pv(&[3., 1., 2.]), &pv(&[1., 2., 3.])).unwrap(),
            4.0
        );
        assert_eq!(
            misalignment(L2, &pv(&[0., 3.]), &pv(&[4., 0.])).unwrap(),
            5.0
        );
        assert_eq!(
            misalignment(Linf, &pv(&[0., 3.]), &pv(&[4., 0.])).unwrap(),
            4.0
        );
    }

    #[test]
    fn misalignment_rejects_length_mismatch() {
        let err = misalignment(MisalignmentMetric::L1, &pv(&[1.]), &pv(&[1., 2.])).unwrap_err();
        assert_eq!(err, MechError::Dimension { left: 1, right: 2 });
    }

    #[test]
    fn priority_vector_rejects_non_finite_and_empty() {
        assert!(PriorityVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(PriorityVector::new(vec![f64::NAN]).is_err());
        assert!(PriorityVector::new(vec![]).is_err());
    }

    #[test]
    fn effort_cost_examples() {
        assert_eq!(effort_cost(CostModel::Linear, 3.0, 1.0).unwrap(), 2.0);
        assert_eq!(effort_cost(CostModel::Quadratic, 3.0, 1.0).unwrap(), 4.0);
        assert_eq!(effort_cost(CostModel::Linear, 2.5, 2.5).unwrap(), 0.0);
        assert_eq!(effort_cost(CostModel::Power(3.0), 3.0, 1.0).unwrap(), 8.0);
    }

    #[test]
    fn effort_cost_errors() {
        assert!(matches!(
            effort_cost(CostModel::Linear, 1.0, 2.0),
            Err(MechError::Feasibility { .. })
        ));
        assert!(matches!(
            effort_cost(CostModel::Linear, -1.0, -2.0),
            Err(MechError::Validation(_))
        ));
        assert!(effort_cost(CostModel::Power(0.5), 1.0, 0.0).is_err());
    }

    #[test]
    fn profit_examples() {
        let quad = ProfitModel::QuadraticDecreasing {
            s0: 4.0,
            curvature: 1.0,
        };
        assert_eq!(profit(quad, 0.0).unwrap(), 4.0);
        assert_eq!(profit(quad, 0.5).unwrap(), 3.75);
        let lin = ProfitModel::LinearDecreasing {
            s0: 10.0,
            slope: 2.0,
        };
        assert_eq!(profit(lin, 3.0).unwrap(), 4.0);
        // not clamped
        assert_eq!(profit(lin, 6.0).unwrap(), -2.0);
        assert!(profit(lin, -0.1).is_err());
    }

    #[test]
    fn string_forms_round_trip() {
        for s in ["Linear", "Quadratic", "Power(1.5)"] {
            assert_eq!(s.parse::<CostModel>().unwrap().to_string(), s);
        }
        for s in ["LinearDecreasing(10,2)", "QuadraticDecreasing(4,1)"] {
            assert_eq!(s.parse::<ProfitModel>().unwrap().to_string(), s);
        }
        assert!("QuadraticDecreasing(4,0)".parse::<ProfitModel>().is_err());
        assert!("Cubic".parse::<CostModel>().is_err());
    }

    #[test]
    fn vector_mode_theta_is_derived() {
        let x = pv(&[0.1, 0.5, 0.9]);
        let y = pv(&[0.2, 0.1, 0.9]);
        let a = AgentProfile::from_priorities(1, MisalignmentMetric::L1, &x, y, Policy::Truthful)
            .unwrap();
        assert!((a.true_theta() - 0.5).abs() < 1e-12);
        assert!(a.true_priority().is_some());
    }

    #[test]
    fn realization_enforces_both_caps() {
        assert!(Realization::new(1, 1.0, 2.0, 3.0).is_ok());
        assert!(Realization::new(1, 2.5, 2.0, 3.0).is_err());
        assert!(Realization::new(1, 1.5, 2.0, 1.0).is_err());
        assert!(Realization::new(1, -0.1, 2.0, 1.0).is_err());
    }
}
