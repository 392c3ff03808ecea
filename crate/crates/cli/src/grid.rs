//! Budget-grid parsing and enumeration.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use ctcrd_core::{DistortionBudget, FidelityCriterion};

/// One per-criterion axis of the budget grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub id: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        (0..self.steps)
            .map(|i| {
                self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
            })
            .collect()
    }
}

/// Parses `id=min:max:steps`.
pub fn parse_axis(text: &str) -> Result<GridAxis> {
    let (id, rest) = text
        .split_once('=')
        .with_context(|| format!("budget grid `{text}` lacks `id=`"))?;
    let parts: Vec<&str> = rest.split(':').collect();
    if parts.len() != 3 {
        bail!("budget grid `{text}` must be id=min:max:steps");
    }
    let min: f64 = parts[0].parse().context("grid min")?;
    let max: f64 = parts[1].parse().context("grid max")?;
    let steps: usize = parts[2].parse().context("grid steps")?;
    if steps < 1 {
        bail!("grid steps must be at least 1");
    }
    if !(min.is_finite() && max.is_finite()) || min < 0.0 || max < min {
        bail!("grid range [{min}, {max}] is invalid");
    }
    Ok(GridAxis {
        id: id.to_string(),
        min,
        max,
        steps,
    })
}

/// Expands per-criterion axes into the full cartesian budget grid, with the
/// first criterion as the slowest-varying coordinate.
pub fn budgets_from_axes(
    criteria: &[FidelityCriterion],
    axes: &[GridAxis],
) -> Result<Vec<DistortionBudget>> {
    let mut per_criterion = Vec::with_capacity(criteria.len());
    for c in criteria {
        let axis = axes
            .iter()
            .find(|a| a.id == c.id())
            .with_context(|| format!("no budget grid for criterion `{}`", c.id()))?;
        per_criterion.push(axis.values());
    }
    for axis in axes {
        if !criteria.iter().any(|c| c.id() == axis.id) {
            bail!("budget grid names unknown criterion `{}`", axis.id);
        }
    }
    let mut budgets = vec![BTreeMap::new()];
    for (c, values) in criteria.iter().zip(&per_criterion) {
        let mut next = Vec::with_capacity(budgets.len() * values.len());
        for partial in &budgets {
            for &v in values {
                let mut with = partial.clone();
                with.insert(c.id().to_string(), v);
                next.push(with);
            }
        }
        budgets = next;
    }
    budgets
        .into_iter()
        .map(|levels| DistortionBudget::new(levels).map_err(Into::into))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_axis_syntax() {
        let axis = parse_axis("0=0:0.5:11").unwrap();
        assert_eq!(axis.id, "0");
        assert_eq!(axis.steps, 11);
        let values = axis.values();
        assert_eq!(values.len(), 11);
        assert!((values[10] - 0.5).abs() < 1e-15);
        assert!(parse_axis("0=0:.5").is_err());
        assert!(parse_axis("junk").is_err());
        assert!(parse_axis("0=0.5:0.1:3").is_err());
    }

    #[test]
    fn single_step_axis_is_the_minimum() {
        let axis = parse_axis("a=0.25:0.9:1").unwrap();
        assert_eq!(axis.values(), vec![0.25]);
    }
}
