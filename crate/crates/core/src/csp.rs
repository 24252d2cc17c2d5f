//! Finite-domain constraint problems over binary forbidden-pair constraints.
//!
//! Every variable is backed by one binary cell per value it can take
//! ("one-hot" coding). Cell ids run variable-major, value-minor: variable 0
//! owns cells `0..d_0`, variable 1 owns the next `d_1` ids, and so on.
//! A [`BinnedState`] is a snapshot of all cells; [`CspProblem::state_energy`]
//! scores it by violated constraints plus penalties for variables that are
//! not cleanly one-hot.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `Π d_i` above which exhaustive enumeration is refused.
/// Covers a blank 4x4 grid puzzle (`4^16 ≈ 4.3e9`) while still refusing
/// hopeless spaces like a blank 9x9 grid (`9^81`).
pub const DEFAULT_ENUMERATION_BOUND: u128 = 10_000_000_000;

/// A binary constraint listing the forbidden value combinations of two
/// distinct variables. Stored canonically with `var_a < var_b`; pairs are
/// `(value of var_a, value of var_b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    var_a: u32,
    var_b: u32,
    forbidden: BTreeSet<(u32, u32)>,
}

impl Constraint {
    /// Builds a constraint, swapping the variables (and mirroring the pairs)
    /// if needed so that `var_a < var_b`.
    pub fn new(
        var_a: u32,
        var_b: u32,
        forbidden: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        if var_a == var_b {
            return Err(Error::InvalidProblem(format!(
                "constraint references variable {var_a} twice"
            )));
        }
        let (a, b, flip) = if var_a < var_b {
            (var_a, var_b, false)
        } else {
            (var_b, var_a, true)
        };
        let forbidden = forbidden
            .into_iter()
            .map(|(x, y)| if flip { (y, x) } else { (x, y) })
            .collect();
        Ok(Constraint {
            var_a: a,
            var_b: b,
            forbidden,
        })
    }

    /// The classic inequality constraint over a shared domain of size
    /// `domain`: forbids `(v, v)` for every `v`.
    pub fn not_equal(var_a: u32, var_b: u32, domain: u32) -> Result<Self> {
        Self::new(var_a, var_b, (0..domain).map(|v| (v, v)))
    }

    pub fn var_a(&self) -> u32 {
        self.var_a
    }

    pub fn var_b(&self) -> u32 {
        self.var_b
    }

    pub fn forbidden(&self) -> &BTreeSet<(u32, u32)> {
        &self.forbidden
    }
}

/// A complete assignment: one chosen value index per variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    pub values: Vec<u32>,
}

impl Assignment {
    pub fn new(values: Vec<u32>) -> Self {
        Assignment { values }
    }
}

/// One bit per cell, indexed by cell id (variable-major, value-minor).
/// Represents "did this cell spike at least once in the bin".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedState {
    pub bits: Vec<bool>,
}

impl BinnedState {
    pub fn new(bits: Vec<bool>) -> Self {
        BinnedState { bits }
    }

    /// Bits rendered as a compact `0`/`1` string, cell 0 first.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// What a binned state says about one variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VariableOutcome {
    /// Exactly one cell of the variable is active.
    Value(u32),
    /// No cell of the variable is active.
    Undefined,
    /// More than one cell is active; carries the active value indices.
    Ambiguous(Vec<u32>),
}

/// Collapses per-variable outcomes into an assignment if every variable is
/// cleanly one-hot, otherwise `None`.
pub fn clean_assignment(outcomes: &[VariableOutcome]) -> Option<Assignment> {
    let mut values = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            VariableOutcome::Value(v) => values.push(*v),
            _ => return None,
        }
    }
    Some(Assignment::new(values))
}

/// A finite-domain CSP with binary forbidden-pair constraints.
///
/// Immutable after construction. Exact duplicate constraints (same variable
/// pair, same forbidden set) are merged at construction; distinct constraints
/// over the same variable pair are kept and count separately toward energies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProblemFile", into = "ProblemFile")]
pub struct CspProblem {
    domain_sizes: Vec<u32>,
    constraints: Vec<Constraint>,
    // Prefix sums of domain sizes; cell_offsets[v] is the first cell id of
    // variable v, cell_offsets[num_vars] the total cell count.
    cell_offsets: Vec<u32>,
}

/// Per-variable list of (earlier variable, forbidden pairs) to check while
/// backtracking.
type LowerChecks<'a> = Vec<(usize, &'a BTreeSet<(u32, u32)>)>;

impl CspProblem {
    pub fn new(domain_sizes: Vec<u32>, constraints: Vec<Constraint>) -> Result<Self> {
        if domain_sizes.is_empty() {
            return Err(Error::InvalidProblem("no variables".into()));
        }
        let num_vars = domain_sizes.len() as u32;
        let mut cell_offsets = Vec::with_capacity(domain_sizes.len() + 1);
        let mut total: u32 = 0;
        cell_offsets.push(0);
        for (v, &d) in domain_sizes.iter().enumerate() {
            if d == 0 {
                return Err(Error::InvalidProblem(format!("variable {v} has an empty domain")));
            }
            total = total
                .checked_add(d)
                .ok_or_else(|| Error::InvalidProblem("cell count overflow".into()))?;
            cell_offsets.push(total);
        }
        let mut seen: HashSet<Constraint> = HashSet::new();
        let mut kept = Vec::with_capacity(constraints.len());
        for c in constraints {
            if c.var_b >= num_vars {
                return Err(Error::InvalidProblem(format!(
                    "constraint references variable {} but there are only {num_vars} variables",
                    c.var_b
                )));
            }
            for &(a, b) in &c.forbidden {
                if a >= domain_sizes[c.var_a as usize] || b >= domain_sizes[c.var_b as usize] {
                    return Err(Error::InvalidProblem(format!(
                        "forbidden pair ({a}, {b}) is outside the domains of variables {} and {}",
                        c.var_a, c.var_b
                    )));
                }
            }
            if seen.insert(c.clone()) {
                kept.push(c);
            }
        }
        Ok(CspProblem {
            domain_sizes,
            constraints: kept,
            cell_offsets,
        })
    }

    pub fn num_vars(&self) -> u32 {
        self.domain_sizes.len() as u32
    }

    pub fn domain_size(&self, var: u32) -> u32 {
        self.domain_sizes[var as usize]
    }

    pub fn domain_sizes(&self) -> &[u32] {
        &self.domain_sizes
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn total_cells(&self) -> u32 {
        *self.cell_offsets.last().unwrap()
    }

    /// Flat id of the cell backing `(var, value)`.
    pub fn cell_id(&self, var: u32, value: u32) -> u32 {
        debug_assert!(value < self.domain_sizes[var as usize]);
        self.cell_offsets[var as usize] + value
    }

    /// Inverse of [`cell_id`](Self::cell_id).
    pub fn cell_var_value(&self, cell: u32) -> (u32, u32) {
        debug_assert!(cell < self.total_cells());
        // partition_point returns the first offset > cell; its predecessor
        // is the owning variable.
        let var = self.cell_offsets.partition_point(|&off| off <= cell) - 1;
        (var as u32, cell - self.cell_offsets[var])
    }

    /// Number of constraints whose forbidden set contains the assigned pair.
    pub fn count_violations(&self, assignment: &Assignment) -> Result<u32> {
        if assignment.values.len() != self.domain_sizes.len() {
            return Err(Error::LengthMismatch {
                what: "assignment",
                expected: self.domain_sizes.len(),
                got: assignment.values.len(),
            });
        }
        for (v, &val) in assignment.values.iter().enumerate() {
            if val >= self.domain_sizes[v] {
                return Err(Error::InvalidProblem(format!(
                    "assignment value {val} is outside the domain of variable {v}"
                )));
            }
        }
        let n = self
            .constraints
            .iter()
            .filter(|c| {
                c.forbidden
                    .contains(&(assignment.values[c.var_a as usize], assignment.values[c.var_b as usize]))
            })
            .count();
        Ok(n as u32)
    }

    /// Number of constraints with any forbidden pair doubly active, counted
    /// once per constraint. This is the violated-constraint reading of an
    /// arbitrary binary state; it ignores how well-formed the one-hot groups
    /// are.
    pub fn state_violations(&self, state: &BinnedState) -> Result<u32> {
        if state.bits.len() != self.total_cells() as usize {
            return Err(Error::LengthMismatch {
                what: "state",
                expected: self.total_cells() as usize,
                got: state.bits.len(),
            });
        }
        let n = self
            .constraints
            .iter()
            .filter(|c| {
                c.forbidden.iter().any(|&(a, b)| {
                    state.bits[self.cell_id(c.var_a, a) as usize]
                        && state.bits[self.cell_id(c.var_b, b) as usize]
                })
            })
            .count();
        Ok(n as u32)
    }

    /// Energy of an arbitrary binary state: [`state_violations`] plus
    /// one-hot penalties, one per variable with no active cell and one per
    /// unordered pair of active cells inside the same variable. Zero exactly
    /// on clean solution states.
    ///
    /// [`state_violations`]: Self::state_violations
    pub fn state_energy(&self, state: &BinnedState) -> Result<u32> {
        let mut energy = self.state_violations(state)?;
        for v in 0..self.num_vars() {
            let lo = self.cell_offsets[v as usize] as usize;
            let hi = self.cell_offsets[v as usize + 1] as usize;
            let active = state.bits[lo..hi].iter().filter(|&&b| b).count() as u32;
            if active == 0 {
                energy += 1;
            } else {
                energy += active * (active - 1) / 2;
            }
        }
        Ok(energy)
    }

    /// Per-variable reading of a binary state.
    pub fn decode_state(&self, state: &BinnedState) -> Result<Vec<VariableOutcome>> {
        if state.bits.len() != self.total_cells() as usize {
            return Err(Error::LengthMismatch {
                what: "state",
                expected: self.total_cells() as usize,
                got: state.bits.len(),
            });
        }
        let mut out = Vec::with_capacity(self.domain_sizes.len());
        for v in 0..self.num_vars() {
            let lo = self.cell_offsets[v as usize];
            let hi = self.cell_offsets[v as usize + 1];
            let active: Vec<u32> = (lo..hi)
                .filter(|&c| state.bits[c as usize])
                .map(|c| c - lo)
                .collect();
            out.push(match active.len() {
                0 => VariableOutcome::Undefined,
                1 => VariableOutcome::Value(active[0]),
                _ => VariableOutcome::Ambiguous(active),
            });
        }
        Ok(out)
    }

    /// Exact one-hot state of an assignment.
    pub fn encode_assignment(&self, assignment: &Assignment) -> Result<BinnedState> {
        if assignment.values.len() != self.domain_sizes.len() {
            return Err(Error::LengthMismatch {
                what: "assignment",
                expected: self.domain_sizes.len(),
                got: assignment.values.len(),
            });
        }
        let mut bits = vec![false; self.total_cells() as usize];
        for (v, &val) in assignment.values.iter().enumerate() {
            if val >= self.domain_sizes[v] {
                return Err(Error::InvalidProblem(format!(
                    "assignment value {val} is outside the domain of variable {v}"
                )));
            }
            bits[self.cell_id(v as u32, val) as usize] = true;
        }
        Ok(BinnedState::new(bits))
    }

    /// All solutions (violation count zero), in lexicographic assignment
    /// order, stopping after `cap` solutions. Uses the default search-space
    /// bound of [`DEFAULT_ENUMERATION_BOUND`].
    pub fn enumerate_solutions(&self, cap: usize) -> Result<Vec<Assignment>> {
        self.enumerate_solutions_bounded(cap, DEFAULT_ENUMERATION_BOUND)
    }

    /// [`enumerate_solutions`](Self::enumerate_solutions) with an explicit
    /// bound on `Π d_i`; refuses larger spaces instead of hanging.
    pub fn enumerate_solutions_bounded(&self, cap: usize, bound: u128) -> Result<Vec<Assignment>> {
        let product = self
            .domain_sizes
            .iter()
            .fold(1u128, |p, &d| p.saturating_mul(d as u128));
        if product > bound {
            return Err(Error::SearchSpaceExceeded { product, bound });
        }
        // Constraints are canonical (var_a < var_b), so grouping them by
        // var_b gives, for each variable, the checks against already-assigned
        // lower variables.
        let n = self.domain_sizes.len();
        let mut lower: Vec<LowerChecks<'_>> = vec![Vec::new(); n];
        for c in &self.constraints {
            lower[c.var_b as usize].push((c.var_a as usize, &c.forbidden));
        }
        let mut solutions = Vec::new();
        let mut values = vec![0u32; n];
        self.backtrack(0, &mut values, &lower, cap, &mut solutions);
        Ok(solutions)
    }

    fn backtrack(
        &self,
        var: usize,
        values: &mut Vec<u32>,
        lower: &[LowerChecks<'_>],
        cap: usize,
        solutions: &mut Vec<Assignment>,
    ) {
        if solutions.len() >= cap {
            return;
        }
        if var == self.domain_sizes.len() {
            solutions.push(Assignment::new(values.clone()));
            return;
        }
        'candidates: for val in 0..self.domain_sizes[var] {
            for &(u, forbidden) in &lower[var] {
                if forbidden.contains(&(values[u], val)) {
                    continue 'candidates;
                }
            }
            values[var] = val;
            self.backtrack(var + 1, values, lower, cap, solutions);
            if solutions.len() >= cap {
                return;
            }
        }
    }
}

/// A k²×k² grid puzzle as a CSP: one variable per cell, domain size k²,
/// inequality constraints over each row, column and k×k block, one per
/// unordered variable pair (pairs covered by several groups appear once).
pub fn build_sudoku(order: u32) -> Result<CspProblem> {
    if order < 2 {
        return Err(Error::InvalidParam(format!(
            "grid order must be at least 2, got {order}"
        )));
    }
    let side = order * order;
    let n = side * side;
    let row = |i: u32| i / side;
    let col = |i: u32| i % side;
    let block = |i: u32| (row(i) / order, col(i) / order);
    let mut constraints = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if row(i) == row(j) || col(i) == col(j) || block(i) == block(j) {
                constraints.push(Constraint::not_equal(i, j, side)?);
            }
        }
    }
    CspProblem::new(vec![side; n as usize], constraints)
}

/// Variable index of the grid cell at `(row, col)` for a puzzle of the given
/// order (rows and columns are 0-based).
pub fn sudoku_variable(order: u32, row: u32, col: u32) -> u32 {
    row * order * order + col
}

/// Clues for a grid puzzle: `(row, col, printed value)` triples with 0-based
/// rows/columns and 1-based values, as puzzles are printed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SudokuClues {
    pub order: u32,
    pub clues: Vec<(u32, u32, u32)>,
}

impl SudokuClues {
    /// Resolves clues into `(variable, value index)` pairs for the matching
    /// [`build_sudoku`] problem. Rejects out-of-range coordinates or values
    /// and any variable clued more than once.
    pub fn to_cell_clues(&self) -> Result<Vec<(u32, u32)>> {
        if self.order < 2 {
            return Err(Error::InvalidClue(format!(
                "grid order must be at least 2, got {}",
                self.order
            )));
        }
        let side = self.order * self.order;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(self.clues.len());
        for &(row, col, value) in &self.clues {
            if row >= side || col >= side {
                return Err(Error::InvalidClue(format!(
                    "cell ({row}, {col}) is outside a {side}x{side} grid"
                )));
            }
            if value == 0 || value > side {
                return Err(Error::InvalidClue(format!(
                    "value {value} is outside 1..={side}"
                )));
            }
            let var = sudoku_variable(self.order, row, col);
            if !seen.insert(var) {
                return Err(Error::ConflictingClues { variable: var });
            }
            out.push((var, value - 1));
        }
        Ok(out)
    }
}

// --- JSON wire form -------------------------------------------------------

/// Problem file schema: explicit forbidden tables or `"kind": "not_equal"`.
#[derive(Serialize, Deserialize)]
struct ProblemFile {
    num_vars: u32,
    domain_sizes: Vec<u32>,
    constraints: Vec<ConstraintFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ConstraintFile {
    NotEqual { a: u32, b: u32, kind: NotEqualKind },
    Table { a: u32, b: u32, forbidden: Vec<(u32, u32)> },
}

#[derive(Serialize, Deserialize)]
enum NotEqualKind {
    #[serde(rename = "not_equal")]
    NotEqual,
}

impl TryFrom<ProblemFile> for CspProblem {
    type Error = Error;

    fn try_from(file: ProblemFile) -> Result<Self> {
        if file.num_vars as usize != file.domain_sizes.len() {
            return Err(Error::InvalidProblem(format!(
                "num_vars is {} but {} domain sizes are listed",
                file.num_vars,
                file.domain_sizes.len()
            )));
        }
        let mut constraints = Vec::with_capacity(file.constraints.len());
        for c in file.constraints {
            constraints.push(match c {
                ConstraintFile::NotEqual { a, b, .. } => {
                    let bounds_ok = (a as usize) < file.domain_sizes.len()
                        && (b as usize) < file.domain_sizes.len();
                    if !bounds_ok {
                        return Err(Error::InvalidProblem(format!(
                            "constraint references variable {} but there are only {} variables",
                            a.max(b),
                            file.domain_sizes.len()
                        )));
                    }
                    let shared = file.domain_sizes[a as usize].min(file.domain_sizes[b as usize]);
                    Constraint::not_equal(a, b, shared)?
                }
                ConstraintFile::Table { a, b, forbidden } => Constraint::new(a, b, forbidden)?,
            });
        }
        CspProblem::new(file.domain_sizes, constraints)
    }
}

impl From<CspProblem> for ProblemFile {
    fn from(p: CspProblem) -> Self {
        let constraints = p
            .constraints
            .iter()
            .map(|c| {
                let shared = p.domain_sizes[c.var_a as usize].min(p.domain_sizes[c.var_b as usize]);
                let is_not_equal = c.forbidden.len() == shared as usize
                    && (0..shared).all(|v| c.forbidden.contains(&(v, v)));
                if is_not_equal {
                    ConstraintFile::NotEqual {
                        a: c.var_a,
                        b: c.var_b,
                        kind: NotEqualKind::NotEqual,
                    }
                } else {
                    ConstraintFile::Table {
                        a: c.var_a,
                        b: c.var_b,
                        forbidden: c.forbidden.iter().copied().collect(),
                    }
                }
            })
            .collect();
        ProblemFile {
            num_vars: p.domain_sizes.len() as u32,
            domain_sizes: p.domain_sizes,
            constraints,
        }
    }
}
