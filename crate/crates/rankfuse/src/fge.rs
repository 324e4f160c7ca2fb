//! Cyclical learning-rate schedules with mid-cycle checkpoint placement,
//! plus a standalone triplet hinge loss.
//!
//! The rate starts each cycle at `alpha1`, descends linearly to `alpha2` at
//! the cycle midpoint (where a checkpoint is collected), and climbs back to
//! `alpha1` by the cycle end. Iterations are abstract 1-based mini-batch
//! indices; converting epoch-denominated settings is the caller's job.

use serde::Serialize;

use crate::{Error, Result};

/// Parameters of a cyclical schedule.
///
/// `cycle_iters` must be even so the midpoint falls on an integer
/// iteration; `alpha1` and `alpha2` must be positive and distinct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgeScheduleConfig {
    /// Rate at each cycle endpoint.
    pub alpha1: f64,
    /// Rate at each cycle midpoint, where checkpoints are collected.
    pub alpha2: f64,
    pub cycle_iters: u64,
    pub total_iters: u64,
}

impl FgeScheduleConfig {
    pub fn new(alpha1: f64, alpha2: f64, cycle_iters: u64, total_iters: u64) -> Result<Self> {
        if !(alpha1.is_finite() && alpha1 > 0.0) || !(alpha2.is_finite() && alpha2 > 0.0) {
            return Err(Error::InvalidConfig(
                "alpha1 and alpha2 must be positive finite reals".to_string(),
            ));
        }
        if alpha1 == alpha2 {
            return Err(Error::InvalidConfig("alpha1 must differ from alpha2".to_string()));
        }
        if cycle_iters < 2 || !cycle_iters.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "cycle_iters must be an even integer >= 2, got {cycle_iters}"
            )));
        }
        if total_iters == 0 {
            return Err(Error::InvalidConfig("total_iters must be >= 1".to_string()));
        }
        Ok(FgeScheduleConfig {
            alpha1,
            alpha2,
            cycle_iters,
            total_iters,
        })
    }
}

/// A generated schedule: one rate per iteration plus the iterations at
/// which checkpoints are collected (cycle midpoints, ascending).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FgeSchedule {
    /// `rates[i - 1]` is the rate at 1-based iteration `i`.
    pub rates: Vec<f64>,
    pub checkpoints: Vec<u64>,
}

/// Position of iteration `i` within its cycle, in `(0, 1]`.
///
/// `(mod(i - 1, c) + 1) / c`, so iteration `c` maps to 1.0 and iteration
/// `c + 1` wraps back to `1/c`.
pub fn cycle_position(i: u64, c: u64) -> Result<f64> {
    if i < 1 {
        return Err(Error::InvalidConfig("iteration index must be >= 1".to_string()));
    }
    if c < 1 {
        return Err(Error::InvalidConfig("cycle length must be >= 1".to_string()));
    }
    Ok(((i - 1) % c + 1) as f64 / c as f64)
}

/// Learning rate at 1-based iteration `i`.
///
/// Piecewise linear in the cycle position `t`: descending from `alpha1` to
/// `alpha2` over `t in (0, 0.5]`, ascending back over `t in (0.5, 1]`.
/// Both branches give exactly `alpha2` at `t = 0.5`.
pub fn learning_rate(i: u64, cfg: &FgeScheduleConfig) -> Result<f64> {
    let t = cycle_position(i, cfg.cycle_iters)?;
    let rate = if t <= 0.5 {
        (1.0 - 2.0 * t) * cfg.alpha1 + 2.0 * t * cfg.alpha2
    } else {
        (2.0 - 2.0 * t) * cfg.alpha2 + (2.0 * t - 1.0) * cfg.alpha1
    };
    Ok(rate)
}

/// Generate the full schedule for a config.
///
/// Checkpoints are exactly the iterations whose cycle position is 0.5,
/// i.e. `i` with `mod(i - 1, c) + 1 = c / 2`.
pub fn build_schedule(cfg: &FgeScheduleConfig) -> FgeSchedule {
    let half = cfg.cycle_iters / 2;
    let mut rates = Vec::with_capacity(cfg.total_iters as usize);
    let mut checkpoints = Vec::new();
    for i in 1..=cfg.total_iters {
        rates.push(learning_rate(i, cfg).expect("i >= 1 by construction"));
        if (i - 1) % cfg.cycle_iters + 1 == half {
            checkpoints.push(i);
        }
    }
    FgeSchedule { rates, checkpoints }
}

fn hinge(p: f64, n: f64) -> f64 {
    (1.0 - p + n).max(0.0)
}

/// Triplet hinge loss over a positive score and two negative scores drawn
/// from different depth strata of a candidate list.
///
/// `hinge(p, n25) + hinge(p, n975) + 0.25 * hinge(n25, n975)` with
/// `hinge(a, b) = max(0, 1 - a + b)`. Non-finite inputs are rejected.
pub fn triplet_hinge_loss(p: f64, n25: f64, n975: f64) -> Result<f64> {
    if !(p.is_finite() && n25.is_finite() && n975.is_finite()) {
        return Err(Error::InvalidConfig(
            "triplet loss inputs must be finite".to_string(),
        ));
    }
    Ok(hinge(p, n25) + hinge(p, n975) + 0.25 * hinge(n25, n975))
}
