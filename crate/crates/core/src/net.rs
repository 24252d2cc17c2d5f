//! Compilation of a CSP into a network of pulse-coupled cells.
//!
//! One cell per (variable, value). Within a variable every ordered cell pair
//! gets an inhibitory synapse (the winner-take-all circuit); every forbidden
//! value pair of every constraint gets an inhibitory synapse in both
//! directions. Duplicate (pre, post) demands collapse into one synapse.
//! Durations are stored per element so that fabrication-style mismatch can
//! be modeled by fixed per-element offsets.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::csp::CspProblem;
use crate::error::{Error, Result};

/// Mismatch offsets are clipped so every effective mean duration stays at or
/// above this fraction of its nominal value.
pub const MISMATCH_FLOOR_FRACTION: f64 = 0.1;

/// Mean durations used when compiling a problem, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompileParams {
    /// Mean refractory duration of every cell.
    pub tau_ref: f64,
    /// Mean duration of every inhibitory pulse.
    pub tau_inh: f64,
    /// Mean delay of the stochastic drive race (exponential).
    pub drive_delay: f64,
}

impl Default for CompileParams {
    fn default() -> Self {
        CompileParams {
            tau_ref: 100.0,
            tau_inh: 110.0,
            drive_delay: 2.0,
        }
    }
}

impl CompileParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_ref", self.tau_ref),
            ("tau_inh", self.tau_inh),
            ("drive_delay", self.drive_delay),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronSpec {
    pub cell_id: u32,
    pub variable: u32,
    pub value: u32,
    /// Mean refractory duration in ms; jitter and annealing scale it at
    /// sampling time.
    pub tau_ref_mean: f64,
    /// Mean of the exponential drive delay in ms.
    pub drive_delay_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynapseKind {
    Inhibitory,
    Excitatory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseSpec {
    pub pre: u32,
    pub post: u32,
    pub kind: SynapseKind,
    /// Mean pulse duration in ms before mismatch.
    pub duration_mean: f64,
    /// Fixed per-synapse offset added to the mean at sampling time.
    #[serde(default)]
    pub mismatch_offset: f64,
}

impl SynapseSpec {
    /// Mean duration actually sampled from: nominal plus mismatch.
    pub fn effective_mean(&self) -> f64 {
        self.duration_mean + self.mismatch_offset
    }
}

/// A compiled network. Neurons are dense: `neurons[i].cell_id == i`.
/// Synapses are kept in a deterministic (pre, post) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub neurons: Vec<NeuronSpec>,
    pub synapses: Vec<SynapseSpec>,
    /// Cells that fire at their natural rate, immune to inhibition.
    pub clamped_cells: BTreeSet<u32>,
    /// Cells that never fire.
    pub disabled_cells: BTreeSet<u32>,
}

impl NetworkSpec {
    pub fn num_cells(&self) -> u32 {
        self.neurons.len() as u32
    }

    /// Structural sanity: dense ids, unique (variable, value) pairs, synapse
    /// endpoints in range and distinct, positive effective durations, and
    /// disjoint clamped/disabled sets.
    pub fn validate(&self) -> Result<()> {
        let n = self.neurons.len() as u32;
        let mut seen = HashSet::new();
        for (i, neuron) in self.neurons.iter().enumerate() {
            if neuron.cell_id != i as u32 {
                return Err(Error::InvalidNetwork(format!(
                    "neuron at index {i} has cell_id {}, ids must be dense",
                    neuron.cell_id
                )));
            }
            if !seen.insert((neuron.variable, neuron.value)) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate (variable, value) pair ({}, {})",
                    neuron.variable, neuron.value
                )));
            }
            if !neuron.tau_ref_mean.is_finite() || neuron.tau_ref_mean <= 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "cell {i} has non-positive tau_ref_mean"
                )));
            }
            if !neuron.drive_delay_mean.is_finite() || neuron.drive_delay_mean <= 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "cell {i} has non-positive drive_delay_mean"
                )));
            }
        }
        for s in &self.synapses {
            if s.pre >= n || s.post >= n {
                return Err(Error::InvalidNetwork(format!(
                    "synapse ({}, {}) references a missing neuron",
                    s.pre, s.post
                )));
            }
            if s.pre == s.post {
                return Err(Error::InvalidNetwork(format!(
                    "synapse ({}, {}) is a self-loop",
                    s.pre, s.post
                )));
            }
            if !s.effective_mean().is_finite() || s.effective_mean() <= 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "synapse ({}, {}) has non-positive effective duration",
                    s.pre, s.post
                )));
            }
        }
        for c in self.clamped_cells.union(&self.disabled_cells) {
            if *c >= n {
                return Err(Error::InvalidNetwork(format!("cell {c} does not exist")));
            }
        }
        if let Some(c) = self.clamped_cells.intersection(&self.disabled_cells).next() {
            return Err(Error::InvalidNetwork(format!(
                "cell {c} is both clamped and disabled"
            )));
        }
        Ok(())
    }

    /// Returns a copy with the clue cells clamped and their same-variable
    /// siblings disabled. Clues are `(variable, value index)` pairs; at most
    /// one clue per variable.
    pub fn clamp_clues(&self, clues: &[(u32, u32)]) -> Result<NetworkSpec> {
        let mut by_pair = BTreeMap::new();
        let mut by_var: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for neuron in &self.neurons {
            by_pair.insert((neuron.variable, neuron.value), neuron.cell_id);
            by_var.entry(neuron.variable).or_default().push(neuron.cell_id);
        }
        let mut out = self.clone();
        let mut clued_vars = HashSet::new();
        for &(var, value) in clues {
            if !clued_vars.insert(var) {
                return Err(Error::ConflictingClues { variable: var });
            }
            let &cell = by_pair.get(&(var, value)).ok_or_else(|| {
                Error::InvalidClue(format!("no cell for variable {var} value {value}"))
            })?;
            out.clamped_cells.insert(cell);
            for &sibling in &by_var[&var] {
                if sibling != cell {
                    out.disabled_cells.insert(sibling);
                }
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Returns a copy with fixed Gaussian offsets applied to every neuron's
    /// refractory mean and every synapse's duration, clipped so effective
    /// means stay at or above [`MISMATCH_FLOOR_FRACTION`] of nominal.
    /// `sigma = 0` returns the network unchanged. Offsets are drawn from a
    /// dedicated stream (stream 1) of the seeded generator, neurons first,
    /// then synapses, each in stored order.
    pub fn apply_mismatch(&self, sigma: f64, seed: u64) -> Result<NetworkSpec> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParam(format!(
                "mismatch sigma must be non-negative, got {sigma}"
            )));
        }
        let mut out = self.clone();
        if sigma == 0.0 {
            return Ok(out);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let normal = Normal::new(0.0, sigma).expect("sigma checked above");
        for neuron in &mut out.neurons {
            let clip = -(1.0 - MISMATCH_FLOOR_FRACTION) * neuron.tau_ref_mean;
            neuron.tau_ref_mean += normal.sample(&mut rng).max(clip);
        }
        for synapse in &mut out.synapses {
            let clip = -(1.0 - MISMATCH_FLOOR_FRACTION) * synapse.duration_mean;
            synapse.mismatch_offset = normal.sample(&mut rng).max(clip);
        }
        Ok(out)
    }
}

/// Compiles a problem into its winner-take-all network. Deterministic:
/// neurons in cell-id order, synapses sorted by (pre, post).
pub fn compile(problem: &CspProblem, params: &CompileParams) -> Result<NetworkSpec> {
    params.validate()?;
    let mut neurons = Vec::with_capacity(problem.total_cells() as usize);
    for var in 0..problem.num_vars() {
        for value in 0..problem.domain_size(var) {
            neurons.push(NeuronSpec {
                cell_id: problem.cell_id(var, value),
                variable: var,
                value,
                tau_ref_mean: params.tau_ref,
                drive_delay_mean: params.drive_delay,
            });
        }
    }

    let mut synapses: BTreeMap<(u32, u32), SynapseSpec> = BTreeMap::new();
    let mut add = |pre: u32, post: u32| {
        synapses.entry((pre, post)).or_insert(SynapseSpec {
            pre,
            post,
            kind: SynapseKind::Inhibitory,
            duration_mean: params.tau_inh,
            mismatch_offset: 0.0,
        });
    };
    for var in 0..problem.num_vars() {
        for v1 in 0..problem.domain_size(var) {
            for v2 in 0..problem.domain_size(var) {
                if v1 != v2 {
                    add(problem.cell_id(var, v1), problem.cell_id(var, v2));
                }
            }
        }
    }
    for c in problem.constraints() {
        for &(a, b) in c.forbidden() {
            let cell_a = problem.cell_id(c.var_a(), a);
            let cell_b = problem.cell_id(c.var_b(), b);
            add(cell_a, cell_b);
            add(cell_b, cell_a);
        }
    }

    let network = NetworkSpec {
        neurons,
        synapses: synapses.into_values().collect(),
        clamped_cells: BTreeSet::new(),
        disabled_cells: BTreeSet::new(),
    };
    network.validate()?;
    Ok(network)
}
