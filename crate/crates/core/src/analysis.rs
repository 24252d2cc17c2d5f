//! From spike streams to states, energies, histograms and model fits.
//!
//! Spikes are quantized into consecutive half-open bins `[k*w, (k+1)*w)`:
//! a cell's bit is set if it spiked at least once in the bin. The energy of
//! each binned state (violations plus one-hot penalties) gives a trace whose
//! histogram characterizes the sampling regime: concentrated regimes are
//! captured by `log f = alpha - beta * exp(gamma * E)` (double exponential),
//! explorative ones by `log f = alpha - beta * E` (exponential). Both fits
//! work on (E, log count) points, skipping empty levels.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::csp::{clean_assignment, Assignment, BinnedState, CspProblem};
use crate::error::{Error, Result};
use crate::sim::SpikeRecord;

/// Iteration cap for the nonlinear fit; hitting it flags the result.
pub const FIT_MAX_ITERATIONS: usize = 500;

/// Quantizes a spike record into binned states. The bin count is
/// `ceil(t_end / bin_width)`, so trailing silent bins are kept and a spike
/// exactly on a boundary belongs to the later bin.
pub fn bin_spikes(
    record: &SpikeRecord,
    problem: &CspProblem,
    bin_width: f64,
) -> Result<Vec<BinnedState>> {
    if !bin_width.is_finite() || bin_width <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if !record.t_end.is_finite() || record.t_end < 0.0 {
        return Err(Error::InvalidParam(format!(
            "record span must be non-negative, got {}",
            record.t_end
        )));
    }
    let cells = problem.total_cells() as usize;
    let num_bins = (record.t_end / bin_width).ceil() as usize;
    let mut bins = vec![BinnedState::new(vec![false; cells]); num_bins];
    for e in &record.events {
        if e.cell >= problem.total_cells() {
            return Err(Error::InvalidProblem(format!(
                "spike references cell {} outside the problem's {cells} cells",
                e.cell
            )));
        }
        // Guard the edge where t/width rounds up to the bin count.
        let idx = ((e.t / bin_width) as usize).min(num_bins.saturating_sub(1));
        bins[idx].bits[e.cell as usize] = true;
    }
    Ok(bins)
}

/// A binned run scored bin by bin.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub bin_width: f64,
    pub states: Vec<BinnedState>,
    pub energies: Vec<u32>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

/// Scores every binned state against the problem.
pub fn energy_trace(
    problem: &CspProblem,
    states: Vec<BinnedState>,
    bin_width: f64,
) -> Result<EnergyTrace> {
    let energies = states
        .iter()
        .map(|s| problem.state_energy(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyTrace {
        bin_width,
        states,
        energies,
    })
}

/// How often each energy level occurred.
pub fn energy_histogram(trace: &EnergyTrace) -> BTreeMap<u32, u64> {
    let mut hist = BTreeMap::new();
    for &e in &trace.energies {
        *hist.entry(e).or_insert(0) += 1;
    }
    hist
}

/// Histogram of consecutive energy differences `E[i+1] - E[i]`.
pub fn jump_histogram(trace: &EnergyTrace) -> Result<BTreeMap<i64, u64>> {
    if trace.energies.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "jump histogram needs at least 2 bins, got {}",
            trace.energies.len()
        )));
    }
    let mut hist = BTreeMap::new();
    for w in trace.energies.windows(2) {
        let jump = w[1] as i64 - w[0] as i64;
        *hist.entry(jump).or_insert(0) += 1;
    }
    Ok(hist)
}

/// Bins with a clean one-hot, violation-free decoding, with their
/// assignments, in bin order.
pub fn find_solutions(problem: &CspProblem, trace: &EnergyTrace) -> Result<Vec<(usize, Assignment)>> {
    let mut out = Vec::new();
    for (i, state) in trace.states.iter().enumerate() {
        let outcomes = problem.decode_state(state)?;
        if let Some(assignment) = clean_assignment(&outcomes) {
            if problem.count_violations(&assignment)? == 0 {
                out.push((i, assignment));
            }
        }
    }
    Ok(out)
}

/// Histogram converted to positive-count fit points `(level, count)`.
pub fn histogram_points<K: Copy + Into<i64>>(hist: &BTreeMap<K, u64>) -> Vec<(f64, f64)> {
    hist.iter()
        .filter(|&(_, &c)| c > 0)
        .map(|(&k, &c)| (k.into() as f64, c as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `log f = alpha - beta * E`
    Exponential,
    /// `log f = alpha - beta * exp(gamma * E)`
    DoubleExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    /// `[alpha, beta]` or `[alpha, beta, gamma]`.
    pub params: Vec<f64>,
    /// Residual sum of squares in log-count space.
    pub rss: f64,
    pub n_points: usize,
    /// False when the iteration cap was hit; params are then best-so-far.
    pub converged: bool,
}

/// Fits a decay model to `(energy level, count)` points. Counts must be
/// positive (levels with zero counts are simply omitted from `points`);
/// fitting happens in log-count space. The exponential model needs at least
/// 3 distinct levels, the double-exponential 4.
pub fn fit_energy_model(points: &[(f64, f64)], model: FitModel) -> Result<FitResult> {
    let mut data: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, c)| c > 0.0)
        .map(|&(e, c)| (e, c.ln()))
        .collect();
    data.sort_by(|a, b| a.0.total_cmp(&b.0));
    data.dedup_by(|a, b| a.0 == b.0);
    let needed = match model {
        FitModel::Exponential => 3,
        FitModel::DoubleExponential => 4,
    };
    if data.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{model:?} fit needs {needed} populated levels, got {}",
            data.len()
        )));
    }
    match model {
        FitModel::Exponential => Ok(fit_exponential(&data)),
        FitModel::DoubleExponential => Ok(fit_double_exponential(&data)),
    }
}

/// Closed-form least squares for `y = alpha - beta * E`.
fn fit_exponential(data: &[(f64, f64)]) -> FitResult {
    let n = data.len() as f64;
    let sx: f64 = data.iter().map(|p| p.0).sum();
    let sy: f64 = data.iter().map(|p| p.1).sum();
    let sxx: f64 = data.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = data.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let alpha = (sy - slope * sx) / n;
    let beta = -slope;
    let rss = data
        .iter()
        .map(|&(e, y)| {
            let r = y - (alpha - beta * e);
            r * r
        })
        .sum();
    FitResult {
        model: FitModel::Exponential,
        params: vec![alpha, beta],
        rss,
        n_points: data.len(),
        converged: true,
    }
}

/// `y = alpha - beta * exp(gamma * E)` residual sum, infinite on overflow so
/// runaway steps are rejected rather than poisoning the fit.
fn double_exp_rss(data: &[(f64, f64)], alpha: f64, beta: f64, gamma: f64) -> f64 {
    let mut rss = 0.0;
    for &(e, y) in data {
        let arg = gamma * e;
        if arg > 700.0 {
            return f64::INFINITY;
        }
        let r = y - (alpha - beta * arg.exp());
        if !r.is_finite() {
            return f64::INFINITY;
        }
        rss += r * r;
    }
    rss
}

/// Double-exponential fit. The primary start puts alpha at the first
/// populated level's log count, gamma at 0.5, and matches beta so the model
/// passes near the second level; a Levenberg-style descent runs from there.
/// Because the model degenerates into the plain exponential as gamma -> 0
/// (a curved valley the descent can stall in), a second start is taken from
/// a coarse profile scan: for each gamma on a fixed grid, (alpha, beta) has
/// a closed-form least-squares solution on the regressor exp(gamma * E).
/// The better of the two descents wins.
fn fit_double_exponential(data: &[(f64, f64)]) -> FitResult {
    let (e0, y0) = data[0];
    let (e1, y1) = data[1];
    let gamma0 = 0.5;
    let beta0 = ((y0 - y1) * (-gamma0 * (e1 - e0)).exp()).max(1e-6);
    let (mut rss, mut params, mut converged) = lm_descend(data, [y0, beta0, gamma0]);

    if let Some(start) = best_profiled_start(data) {
        let (p_rss, p_params, p_converged) = lm_descend(data, start);
        if p_rss < rss {
            rss = p_rss;
            params = p_params;
            converged = p_converged;
        }
    }

    FitResult {
        model: FitModel::DoubleExponential,
        params: params.to_vec(),
        rss,
        n_points: data.len(),
        converged,
    }
}

/// Scans gamma over a fixed grid, solving the linear-in-(alpha, beta)
/// subproblem exactly at each point, and returns the best full start.
fn best_profiled_start(data: &[(f64, f64)]) -> Option<[f64; 3]> {
    let mut best: Option<(f64, [f64; 3])> = None;
    for i in 0..=120 {
        let gamma = i as f64 * 0.05 - 3.0;
        let n = data.len() as f64;
        let mut su = 0.0;
        let mut suu = 0.0;
        let mut sy = 0.0;
        let mut suy = 0.0;
        for &(e, y) in data {
            let arg = gamma * e;
            if arg.abs() > 700.0 {
                su = f64::NAN;
                break;
            }
            let u = arg.exp();
            su += u;
            suu += u * u;
            sy += y;
            suy += u * y;
        }
        let denom = n * suu - su * su;
        if !denom.is_finite() || denom.abs() < 1e-12 {
            continue;
        }
        // y = alpha - beta * u by least squares.
        let beta = -(n * suy - su * sy) / denom;
        let alpha = (sy + beta * su) / n;
        let rss = double_exp_rss(data, alpha, beta, gamma);
        if best.is_none_or(|(b, _)| rss < b) {
            best = Some((rss, [alpha, beta, gamma]));
        }
    }
    best.map(|(_, p)| p)
}

/// Damped Gauss-Newton (Levenberg style) descent from one starting point.
/// Returns best-so-far parameters when the iteration cap is hit, flagged
/// through the `converged` component.
fn lm_descend(data: &[(f64, f64)], start: [f64; 3]) -> (f64, [f64; 3], bool) {
    let [mut alpha, mut beta, mut gamma] = start;
    let mut rss = double_exp_rss(data, alpha, beta, gamma);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut best = (rss, alpha, beta, gamma);

    for _ in 0..FIT_MAX_ITERATIONS {
        // Normal equations J^T J delta = J^T r for residuals
        // r = y - (alpha - beta * exp(gamma E)); columns (alpha, beta, gamma).
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for &(e, y) in data {
            let g = (gamma * e).min(700.0).exp();
            let r = y - (alpha - beta * g);
            let j = [1.0, -g, -beta * e * g];
            for a in 0..3 {
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
                jtr[a] += j[a] * r;
            }
        }

        let mut accepted = false;
        for _ in 0..12 {
            let mut m = jtj;
            for d in 0..3 {
                m[d][d] += lambda * jtj[d][d].max(1e-12);
            }
            let Some(delta) = solve3(m, jtr) else {
                lambda *= 4.0;
                continue;
            };
            let candidate = (
                alpha + delta[0],
                beta + delta[1],
                (gamma + delta[2]).clamp(-20.0, 20.0),
            );
            let new_rss = double_exp_rss(data, candidate.0, candidate.1, candidate.2);
            if new_rss < rss {
                let step = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                let improvement = rss - new_rss;
                alpha = candidate.0;
                beta = candidate.1;
                gamma = candidate.2;
                rss = new_rss;
                lambda = (lambda * 0.25).max(1e-14);
                accepted = true;
                if rss < best.0 {
                    best = (rss, alpha, beta, gamma);
                }
                if step < 1e-12 || improvement < 1e-16 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step at any damping: a (possibly local) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    if rss < best.0 {
        best = (rss, alpha, beta, gamma);
    }
    (best.0, [best.1, best.2, best.3], converged)
}

/// 3x3 linear solve by Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let lead = m[col];
        for row in (col + 1)..3 {
            let f = m[row][col] / lead[col];
            for (mk, lk) in m[row].iter_mut().zip(lead).skip(col) {
                *mk -= f * lk;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

// --- Exports ---------------------------------------------------------------

/// `bin_index,t_start_ms,energy` rows.
pub fn write_trace_csv<W: Write>(trace: &EnergyTrace, mut w: W) -> std::io::Result<()> {
    writeln!(w, "bin_index,t_start_ms,energy")?;
    for (i, &e) in trace.energies.iter().enumerate() {
        writeln!(w, "{i},{},{e}", i as f64 * trace.bin_width)?;
    }
    Ok(())
}

/// `bin_index,t_start_ms,bits` rows; bits is a 0/1 string, cell 0 first.
pub fn write_states_csv<W: Write>(trace: &EnergyTrace, mut w: W) -> std::io::Result<()> {
    writeln!(w, "bin_index,t_start_ms,bits")?;
    for (i, s) in trace.states.iter().enumerate() {
        writeln!(w, "{i},{},{}", i as f64 * trace.bin_width, s.to_bit_string())?;
    }
    Ok(())
}

/// Two-column CSV with the given header names.
pub fn write_histogram_csv<W: Write, K: std::fmt::Display + Copy>(
    hist: &BTreeMap<K, u64>,
    level_header: &str,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{level_header},count")?;
    for (k, c) in hist {
        writeln!(w, "{k},{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{build_sudoku, CspProblem};
    use crate::sim::SpikeEvent;

    fn record(events: Vec<(f64, u32)>, t_end: f64) -> SpikeRecord {
        SpikeRecord {
            events: events
                .into_iter()
                .map(|(t, cell)| SpikeEvent { t, cell })
                .collect(),
            t_end,
        }
    }

    fn trace_of(energies: Vec<u32>) -> EnergyTrace {
        EnergyTrace {
            bin_width: 100.0,
            states: Vec::new(),
            energies,
        }
    }

    #[test]
    fn bins_are_half_open() {
        let p = CspProblem::new(vec![2], vec![]).unwrap();
        let rec = record(vec![(50.0, 0), (100.0, 1)], 200.0);
        let bins = bin_spikes(&rec, &p, 100.0).unwrap();
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].bits, vec![true, false]);
        assert_eq!(bins[1].bits, vec![false, true]);
    }

    #[test]
    fn repeat_spikes_set_one_bit_and_silent_tail_bins_survive() {
        let p = CspProblem::new(vec![2], vec![]).unwrap();
        let rec = record(vec![(10.0, 0), (20.0, 0), (30.0, 0)], 1000.0);
        let bins = bin_spikes(&rec, &p, 100.0).unwrap();
        assert_eq!(bins.len(), 10);
        assert_eq!(bins[0].bits, vec![true, false]);
        assert!(bins[1..].iter().all(|b| b.bits.iter().all(|&x| !x)));
    }

    #[test]
    fn bin_count_rounds_up() {
        let p = CspProblem::new(vec![1], vec![]).unwrap();
        let rec = record(vec![], 250.0);
        assert_eq!(bin_spikes(&rec, &p, 100.0).unwrap().len(), 3);
        let rec = record(vec![], 0.0);
        assert!(bin_spikes(&rec, &p, 100.0).unwrap().is_empty());
        assert!(bin_spikes(&record(vec![], 10.0), &p, 0.0).is_err());
    }

    #[test]
    fn binning_rejects_foreign_cells() {
        let p = CspProblem::new(vec![2], vec![]).unwrap();
        let rec = record(vec![(1.0, 5)], 100.0);
        assert!(bin_spikes(&rec, &p, 100.0).is_err());
    }

    #[test]
    fn binning_ignores_event_order_within_a_bin() {
        let p = CspProblem::new(vec![3], vec![]).unwrap();
        let a = record(vec![(10.0, 0), (10.0, 2), (20.0, 1)], 100.0);
        let b = record(vec![(20.0, 1), (10.0, 2), (10.0, 0)], 100.0);
        assert_eq!(
            bin_spikes(&a, &p, 100.0).unwrap(),
            bin_spikes(&b, &p, 100.0).unwrap()
        );
    }

    #[test]
    fn trace_scores_each_bin() {
        let p = build_sudoku(2).unwrap();
        let rec = record(vec![(5.0, 0), (15.0, 4)], 200.0);
        let states = bin_spikes(&rec, &p, 100.0).unwrap();
        let trace = energy_trace(&p, states, 100.0).unwrap();
        // Bin 0: vars 0 and 1 both at value 0 (same row: violation) plus 14
        // silent variables; bin 1: all 16 silent.
        assert_eq!(trace.energies, vec![1 + 14, 16]);
    }

    #[test]
    fn jump_histogram_example() {
        let t = trace_of(vec![3, 1, 1, 4]);
        let hist = jump_histogram(&t).unwrap();
        let expected: BTreeMap<i64, u64> = [(-2, 1), (0, 1), (3, 1)].into();
        assert_eq!(hist, expected);
        assert!(jump_histogram(&trace_of(vec![3])).is_err());
        let flat = jump_histogram(&trace_of(vec![2; 10])).unwrap();
        assert_eq!(flat, [(0i64, 9u64)].into());
    }

    #[test]
    fn histogram_counts_sum_to_bins() {
        let t = trace_of(vec![0, 1, 1, 2, 0, 0]);
        let hist = energy_histogram(&t);
        assert_eq!(hist, [(0u32, 3u64), (1, 2), (2, 1)].into());
        assert_eq!(hist.values().sum::<u64>() as usize, t.len());
        let jumps = jump_histogram(&t).unwrap();
        assert_eq!(jumps.values().sum::<u64>() as usize, t.len() - 1);
    }

    #[test]
    fn solutions_are_clean_zero_energy_bins() {
        let p = build_sudoku(2).unwrap();
        let solved = Assignment::new(vec![0, 1, 2, 3, 2, 3, 0, 1, 1, 0, 3, 2, 3, 2, 1, 0]);
        let one_hot = p.encode_assignment(&solved).unwrap();
        let empty = BinnedState::new(vec![false; 64]);
        let trace = energy_trace(&p, vec![empty, one_hot], 100.0).unwrap();
        let sols = find_solutions(&p, &trace).unwrap();
        assert_eq!(sols, vec![(1, solved)]);
    }

    #[test]
    fn exponential_fit_recovers_noiseless_parameters() {
        let points: Vec<(f64, f64)> = (0..=5)
            .map(|e| {
                let e = e as f64;
                (e, 1000.0 * (-1.2 * e).exp())
            })
            .collect();
        let fit = fit_energy_model(&points, FitModel::Exponential).unwrap();
        assert!(fit.converged);
        assert!((fit.params[0] - 1000.0f64.ln()).abs() < 1e-9);
        assert!((fit.params[1] - 1.2).abs() < 1e-6, "beta {}", fit.params[1]);
        assert!(fit.rss < 1e-18);
        assert_eq!(fit.n_points, 6);
    }

    #[test]
    fn double_exponential_fit_recovers_noiseless_parameters() {
        let (alpha, beta, gamma) = (7.0, 0.5, 0.8);
        let points: Vec<(f64, f64)> = (0..=5)
            .map(|e| {
                let e = e as f64;
                (e, (alpha - beta * (gamma * e).exp()).exp())
            })
            .collect();
        let fit = fit_energy_model(&points, FitModel::DoubleExponential).unwrap();
        assert!((fit.params[0] - alpha).abs() < 1e-3, "alpha {}", fit.params[0]);
        assert!((fit.params[1] - beta).abs() < 1e-3, "beta {}", fit.params[1]);
        assert!((fit.params[2] - gamma).abs() < 1e-3, "gamma {}", fit.params[2]);
        assert!(fit.rss < 1e-6, "rss {}", fit.rss);
    }

    #[test]
    fn fits_require_enough_levels() {
        let two = [(0.0, 10.0), (1.0, 5.0)];
        assert!(fit_energy_model(&two, FitModel::Exponential).is_err());
        let three = [(0.0, 10.0), (1.0, 5.0), (2.0, 2.0)];
        assert!(fit_energy_model(&three, FitModel::Exponential).is_ok());
        assert!(fit_energy_model(&three, FitModel::DoubleExponential).is_err());
        // Zero-count levels are dropped before the threshold check.
        let padded = [(0.0, 10.0), (1.0, 5.0), (2.0, 0.0), (3.0, 2.0)];
        assert!(fit_energy_model(&padded, FitModel::DoubleExponential).is_err());
    }

    #[test]
    fn double_exponential_stays_finite_on_wide_flat_data() {
        // Purely exponential data over a wide energy range is the model's
        // degenerate corner (it only matches a straight line as gamma -> 0
        // with beta blowing up), and large E would overflow exp(gamma * E)
        // for careless steps. The fit must stay finite and keep improving on
        // its starting point rather than diverge.
        let points: Vec<(f64, f64)> = (0..=50)
            .map(|e| {
                let e = e as f64;
                (e, 1e6 * (-0.2 * e).exp())
            })
            .collect();
        let fit = fit_energy_model(&points, FitModel::DoubleExponential).unwrap();
        assert!(fit.params.iter().all(|p| p.is_finite()), "{:?}", fit.params);
        assert!(fit.rss.is_finite());
        assert_eq!(fit.n_points, 51);
        // Initial guess: alpha = y(0), gamma = 0.5, beta from the second
        // point; its rss is astronomically bad on this data.
        let y0 = points[0].1.ln();
        let y1 = points[1].1.ln();
        let beta0 = ((y0 - y1) * (-0.5f64).exp()).max(1e-6);
        let start_rss: f64 = points
            .iter()
            .map(|&(e, c)| {
                let r = c.ln() - (y0 - beta0 * (0.5 * e).exp());
                r * r
            })
            .sum();
        assert!(fit.rss < start_rss * 1e-6, "rss {} vs start {start_rss}", fit.rss);
    }

    #[test]
    fn histogram_points_drop_zeros() {
        let hist: BTreeMap<u32, u64> = [(0, 5), (1, 0), (2, 7)].into();
        assert_eq!(histogram_points(&hist), vec![(0.0, 5.0), (2.0, 7.0)]);
        let jumps: BTreeMap<i64, u64> = [(-1, 2), (3, 4)].into();
        assert_eq!(histogram_points(&jumps), vec![(-1.0, 2.0), (3.0, 4.0)]);
    }

    #[test]
    fn csv_exports_match_expected_shape() {
        let p = CspProblem::new(vec![2], vec![]).unwrap();
        let rec = record(vec![(50.0, 1)], 200.0);
        let states = bin_spikes(&rec, &p, 100.0).unwrap();
        let trace = energy_trace(&p, states, 100.0).unwrap();

        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin_index,t_start_ms,energy\n0,0,0\n1,100,1\n"
        );

        let mut buf = Vec::new();
        write_states_csv(&trace, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin_index,t_start_ms,bits\n0,0,01\n1,100,00\n"
        );

        let mut buf = Vec::new();
        write_histogram_csv(&energy_histogram(&trace), "E", &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "E,count\n0,1\n1,1\n");
    }

    #[test]
    fn fit_results_serialize_with_short_names() {
        let points: Vec<(f64, f64)> = (0..=5)
            .map(|e| (e as f64, 100.0 * (-0.5 * e as f64).exp()))
            .collect();
        let fit = fit_energy_model(&points, FitModel::Exponential).unwrap();
        let json = serde_json::to_string(&fit).unwrap();
        assert!(json.contains("\"model\":\"exponential\""));
        assert!(json.contains("\"params\""));
        assert!(json.contains("\"n_points\""));
    }
}
