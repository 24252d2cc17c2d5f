//! Annealing schedules: piecewise-constant scaling of the refractory mean.
//!
//! The refractory period acts as an inverse temperature. Scaling it up makes
//! cells sit out longer after firing, so rivals get to fire and the network
//! hops between states; scaling it back down lets low-energy states persist.
//! A schedule is a list of equal-length segments, each with a scale factor
//! applied to every refractory duration sampled while the segment is active.

use serde::{Deserialize, Serialize};

use crate::analysis::{bin_spikes, energy_trace, EnergyTrace};
use crate::csp::CspProblem;
use crate::error::{Error, Result};
use crate::net::NetworkSpec;
use crate::sim::{run_segmented, SimParams, SpikeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Every segment uses `start_scale`.
    Constant,
    /// Arithmetic interpolation from `start_scale` to `end_scale` inclusive.
    Linear,
    /// Multiplicative interpolation from `start_scale` to `end_scale`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub start_scale: f64,
    pub end_scale: f64,
    pub num_segments: u32,
    pub segment_length_ms: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.num_segments == 0 {
            return Err(Error::InvalidSchedule("num_segments must be > 0".into()));
        }
        if !self.segment_length_ms.is_finite() || self.segment_length_ms <= 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "segment_length_ms must be positive, got {}",
                self.segment_length_ms
            )));
        }
        for (name, v) in [("start_scale", self.start_scale), ("end_scale", self.end_scale)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Total time the schedule spans.
    pub fn span_ms(&self) -> f64 {
        self.num_segments as f64 * self.segment_length_ms
    }

    /// Scale of segment `i` out of `n`. With a single segment only the
    /// start value is used, so every kind degenerates to constant.
    fn scale_at(&self, i: u32) -> f64 {
        let n = self.num_segments;
        if n == 1 || i == 0 {
            return self.start_scale;
        }
        let frac = i as f64 / (n - 1) as f64;
        match self.kind {
            ScheduleKind::Constant => self.start_scale,
            ScheduleKind::Linear => {
                self.start_scale + (self.end_scale - self.start_scale) * frac
            }
            ScheduleKind::Geometric => {
                self.start_scale * (self.end_scale / self.start_scale).powf(frac)
            }
        }
    }
}

/// Expands a schedule into `(start_ms, scale)` segment boundaries, first
/// segment starting at 0.
pub fn schedule_to_overrides(schedule: &Schedule) -> Result<Vec<(f64, f64)>> {
    schedule.validate()?;
    Ok((0..schedule.num_segments)
        .map(|i| (i as f64 * schedule.segment_length_ms, schedule.scale_at(i)))
        .collect())
}

/// Runs the network under a schedule and bins the spikes in one go. The
/// schedule must fit inside the simulated span.
pub fn run_annealed(
    problem: &CspProblem,
    network: &NetworkSpec,
    params: &SimParams,
    schedule: &Schedule,
    bin_width: f64,
) -> Result<(SpikeRecord, EnergyTrace)> {
    schedule.validate()?;
    if schedule.span_ms() > params.t_end {
        return Err(Error::InvalidSchedule(format!(
            "schedule spans {} ms but the run ends at {} ms",
            schedule.span_ms(),
            params.t_end
        )));
    }
    let overrides = schedule_to_overrides(schedule)?;
    let record = run_segmented(network, params, &overrides)?;
    let states = bin_spikes(&record, problem, bin_width)?;
    let trace = energy_trace(problem, states, bin_width)?;
    Ok((record, trace))
}
