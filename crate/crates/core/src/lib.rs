//! Stochastic constraint solving on spiking winner-take-all networks.
//!
//! A finite-domain CSP is compiled, one cell per (variable, value) pair,
//! into a network of pulse-coupled binary cells: mutual inhibition inside
//! each variable pushes it toward a one-hot state, inhibition between
//! forbidden value pairs suppresses constraint violations, and jitter on
//! the pulse durations turns the otherwise deterministic dynamics into a
//! stochastic search. Binning the emitted spike stream yields a sequence
//! of candidate states whose violation counts ("energy") can be traced,
//! histogrammed, fitted, and mined for exact solutions. Scaling the
//! refractory period over time anneals the search temperature.
//!
//! Module map:
//! - [`csp`]: problems, assignments, binned states, energies, enumeration
//! - [`net`]: compilation of a problem into a cell/synapse network
//! - [`sim`]: the event-driven simulator
//! - [`analysis`]: binning, traces, histograms, model fits, solution mining
//! - [`anneal`]: refractory-scaling schedules and annealed runs

pub mod analysis;
pub mod anneal;
pub mod csp;
pub mod error;
pub mod net;
pub mod sim;

pub use error::{Error, Result};
