//! Brute-force welfare oracles. These enumerate the grid directly and share
//! no code with the agent's optimization path.

use crate::error::{ensure_nonneg, MechError, Result};
use crate::grid::Grid;
use crate::model::{CostModel, ProfitModel};

/// Welfare-maximizing realization for an agent with true misalignment
/// `theta`: the argmax of `S(g) - h(theta, g)` over grid points in
/// `[0, theta]` plus both endpoints. Ties go to the smallest `g`.
pub fn social_optimum(
    theta: f64,
    profit_model: ProfitModel,
    cost_model: CostModel,
    gamma_grid: &Grid,
) -> Result<(f64, f64)> {
    ensure_nonneg("theta", theta)?;
    profit_model.validate()?;
    cost_model.validate()?;
    let mut candidates: Vec<f64> = gamma_grid
        .points()
        .into_iter()
        .filter(|&g| (0.0..=theta).contains(&g))
        .collect();
    candidates.push(0.0);
    candidates.push(theta);
    candidates.sort_by(f64::total_cmp);

    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for g in candidates {
        let value = profit_model.eval_unchecked(g) - cost_model.eval_unchecked(theta, g);
        if value > best.1 {
            best = (g, value);
        }
    }
    Ok(best)
}

/// Index of the agent whose optimal welfare is highest; ties go to the
/// lowest index.
pub fn efficient_agent(
    thetas: &[f64],
    profit_model: ProfitModel,
    cost_model: CostModel,
    gamma_grid: &Grid,
) -> Result<usize> {
    if thetas.len() < 2 {
        return Err(MechError::Arity {
            required: 2,
            got: thetas.len(),
        });
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &theta) in thetas.iter().enumerate() {
        let (_, value) = social_optimum(theta, profit_model, cost_model, gamma_grid)?;
        if value > best.1 {
            best = (i, value);
        }
    }
    Ok(best.0)
}
