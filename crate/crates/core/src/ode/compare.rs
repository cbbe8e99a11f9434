use serde::Serialize;

use super::{MonotoneCubic, Trajectory};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    F,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ComparisonVerdict {
    Pass { nodes_checked: usize },
    Violation { index: usize, t: f64, component: Component, sub: f64, sup: f64 },
}

impl ComparisonVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Pass { .. })
    }
}

/// Checks `sub < super` componentwise at every node of the merged time grid
/// over the common time range. Off-grid values come from monotone cubic
/// interpolation of each trajectory.
pub fn check_comparison(sub: &Trajectory, sup: &Trajectory) -> Result<ComparisonVerdict> {
    let (a0, b0) = (sub.times()[0], sup.times()[0]);
    if (a0 - b0).abs() > 1e-12 * a0.abs().max(b0.abs()).max(1.0) {
        return Err(invalid("trajectories start at different times"));
    }
    let start = a0.max(b0);
    let end = sub.final_time().min(sup.final_time());
    if end < start {
        return Err(invalid("trajectories share no common time range"));
    }
    let mut grid: Vec<f64> = sub
        .times()
        .iter()
        .chain(sup.times())
        .copied()
        .filter(|t| *t >= start && *t <= end)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let resample = |traj: &Trajectory| -> Result<[MonotoneCubic; 2]> {
        let fs: Vec<f64> = traj.values().iter().map(|v| v[0]).collect();
        let gs: Vec<f64> = traj.values().iter().map(|v| v[1]).collect();
        Ok([MonotoneCubic::new(traj.times(), &fs)?, MonotoneCubic::new(traj.times(), &gs)?])
    };
    let lo = resample(sub)?;
    let hi = resample(sup)?;

    for (index, &t) in grid.iter().enumerate() {
        for (k, component) in [(0, Component::F), (1, Component::G)] {
            let (s, u) = (lo[k].eval(t), hi[k].eval(t));
            if !(s < u) {
                return Ok(ComparisonVerdict::Violation { index, t, component, sub: s, sup: u });
            }
        }
    }
    Ok(ComparisonVerdict::Pass { nodes_checked: grid.len() })
}
