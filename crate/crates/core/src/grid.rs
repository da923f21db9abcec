use serde::Serialize;

use crate::error::{Error, Result};

/// Environment variable overriding the default number of grid points.
pub const GRID_POINTS_ENV: &str = "SMDP_GRID_POINTS";

/// Time bounds at which cylinder probabilities are compared.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeGrid {
    /// `t_max / points, 2 t_max / points, ..., t_max`.
    Linear { t_max: f64, points: usize },
    /// Half linear, half geometric from `t_max * 1e-3`.
    Mixed { t_max: f64, points: usize },
    Explicit { times: Vec<f64> },
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::Linear {
            t_max: 10.0,
            points: default_points(20),
        }
    }
}

/// Reads [`GRID_POINTS_ENV`], falling back to `fallback`.
pub fn default_points(fallback: usize) -> usize {
    std::env::var(GRID_POINTS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or(fallback)
}

impl TimeGrid {
    pub fn linear(t_max: f64, points: usize) -> Result<Self> {
        let g = TimeGrid::Linear { t_max, points };
        g.check()?;
        Ok(g)
    }

    pub fn explicit(times: Vec<f64>) -> Result<Self> {
        let g = TimeGrid::Explicit { times };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<()> {
        let bad = match self {
            TimeGrid::Linear { t_max, points } | TimeGrid::Mixed { t_max, points } => {
                !(t_max.is_finite() && *t_max > 0.0) || *points == 0
            }
            TimeGrid::Explicit { times } => {
                times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
            }
        };
        if bad {
            Err(Error::InvalidArgument(format!("invalid time grid {self:?}")))
        } else {
            Ok(())
        }
    }

    /// Sorted, deduplicated time points.
    pub fn points(&self) -> Vec<f64> {
        let mut pts = match self {
            TimeGrid::Linear { t_max, points } => (1..=*points)
                .map(|k| t_max * k as f64 / *points as f64)
                .collect(),
            TimeGrid::Mixed { t_max, points } => {
                let half = (points / 2).max(1);
                let mut v: Vec<f64> = (1..=half).map(|k| t_max * k as f64 / half as f64).collect();
                let geo = points.saturating_sub(half).max(1);
                let lo = t_max * 1e-3;
                for k in 0..geo {
                    v.push(lo * (t_max / lo).powf(k as f64 / geo as f64));
                }
                v
            }
            TimeGrid::Explicit { times } => times.clone(),
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}
