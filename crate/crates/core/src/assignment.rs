//! Maximum-weight bipartite assignment with "at most" semantics.
//!
//! Rows are matched at most once, column `c` at most `col_multiplicity[c]`
//! times, and pairs with weight `<= 0` are never matched. Column
//! multiplicities are expanded into replicated unit columns and the result
//! is padded to a square matrix of zero-weight dummies, then solved with the
//! O(n^3) Hungarian method.
//!
//! Ties between equal-weight optima are broken towards the lexicographically
//! smallest matching, compared as the row-sorted list of `(row, col)` pairs.
//! The solver carries a secondary integer key next to every weight so that
//! the tie-break happens inside the same Hungarian pass.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub weights: Array2<f64>,
    pub col_multiplicity: Vec<usize>,
}

impl AssignmentProblem {
    /// Every column available once.
    pub fn unit(weights: Array2<f64>) -> Self {
        let cols = weights.ncols();
        AssignmentProblem {
            weights,
            col_multiplicity: vec![1; cols],
        }
    }

    pub fn with_multiplicity(weights: Array2<f64>, col_multiplicity: Vec<usize>) -> Self {
        assert_eq!(
            weights.ncols(),
            col_multiplicity.len(),
            "one multiplicity per column"
        );
        AssignmentProblem {
            weights,
            col_multiplicity,
        }
    }

    fn expanded_columns(&self) -> Vec<usize> {
        self.col_multiplicity
            .iter()
            .enumerate()
            .flat_map(|(c, &m)| std::iter::repeat_n(c, m))
            .collect()
    }

    /// Weight a pair contributes if matched, or `None` when it may not be.
    fn usable(&self, r: usize, c: usize) -> Option<f64> {
        let w = self.weights[[r, c]];
        (w.is_finite() && w > 0.0).then_some(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Matched `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

impl Assignment {
    fn from_pairs(problem: &AssignmentProblem, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let total_weight = pairs.iter().map(|&(r, c)| problem.weights[[r, c]]).sum();
        Assignment { pairs, total_weight }
    }

    /// Dense 0/1 view of the matching.
    pub fn indicator(&self, rows: usize, cols: usize) -> Array2<bool> {
        let mut out = Array2::from_elem((rows, cols), false);
        for &(r, c) in &self.pairs {
            out[[r, c]] = true;
        }
        out
    }
}

/// Lexicographic (weight, tie-break) key; ordered on the weight first.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    primary: f64,
    secondary: i128,
}

impl Key {
    const ZERO: Key = Key {
        primary: 0.0,
        secondary: 0,
    };
    const INF: Key = Key {
        primary: f64::INFINITY,
        secondary: 0,
    };
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.primary.partial_cmp(&other.primary)? {
            Ordering::Equal => Some(self.secondary.cmp(&other.secondary)),
            ord => Some(ord),
        }
    }
}

impl Add for Key {
    type Output = Key;
    fn add(self, rhs: Key) -> Key {
        Key {
            primary: self.primary + rhs.primary,
            secondary: self.secondary + rhs.secondary,
        }
    }
}

impl Sub for Key {
    type Output = Key;
    fn sub(self, rhs: Key) -> Key {
        Key {
            primary: self.primary - rhs.primary,
            secondary: self.secondary - rhs.secondary,
        }
    }
}

impl AddAssign for Key {
    fn add_assign(&mut self, rhs: Key) {
        *self = *self + rhs;
    }
}

impl SubAssign for Key {
    fn sub_assign(&mut self, rhs: Key) {
        *self = *self - rhs;
    }
}

/// Tie-break bonus of matching `row` to original column `col`. Earlier rows
/// dominate later ones and smaller columns earn more; `None` if the keys
/// (or the potentials built from them, at `n x n`) would not fit in an `i128`.
fn tie_bonus_table(rows: usize, cols: usize, n: usize) -> Option<Vec<i128>> {
    let base = i128::try_from(cols).ok()?.checked_add(2)?;
    let exponent = u32::try_from(rows).ok()?;
    let headroom = i128::try_from(n).ok()?.checked_add(1)?.checked_mul(4)?;
    base.checked_pow(exponent)?.checked_mul(headroom)?;
    let mut scale = vec![0i128; rows];
    let mut acc: i128 = 1;
    for r in (0..rows).rev() {
        scale[r] = acc;
        acc = acc.checked_mul(base)?;
    }
    let mut table = Vec::with_capacity(rows * cols);
    for s in &scale {
        for c in 0..cols {
            table.push((cols as i128 + 1 - c as i128) * s);
        }
    }
    Some(table)
}

/// Exact maximum-weight assignment.
pub fn max_weight_assignment(problem: &AssignmentProblem) -> Assignment {
    let rows = problem.weights.nrows();
    let cols = problem.weights.ncols();
    let expanded = problem.expanded_columns();
    if rows == 0 || expanded.is_empty() {
        return Assignment::from_pairs(problem, Vec::new());
    }
    let any_usable = (0..rows).any(|r| (0..cols).any(|c| problem.usable(r, c).is_some()));
    if !any_usable {
        return Assignment::from_pairs(problem, Vec::new());
    }

    let n = rows.max(expanded.len());
    let bonus = tie_bonus_table(rows, cols, n);
    // Costs are negated keys: the Hungarian pass minimises.
    let mut cost = vec![Key::ZERO; n * n];
    for r in 0..rows {
        for (j, &c) in expanded.iter().enumerate() {
            if let Some(w) = problem.usable(r, c) {
                let secondary = bonus.as_ref().map_or(0, |b| b[r * cols + c]);
                cost[r * n + j] = Key {
                    primary: -w,
                    secondary: -secondary,
                };
            }
        }
    }

    let col_of_row = hungarian_min(&cost, n);
    let pairs = col_of_row
        .iter()
        .enumerate()
        .filter(|&(r, &j)| r < rows && j < expanded.len())
        .map(|(r, &j)| (r, expanded[j]))
        .filter(|&(r, c)| problem.usable(r, c).is_some())
        .collect();
    Assignment::from_pairs(problem, pairs)
}

/// Square assignment minimising total cost; returns the column of each row.
fn hungarian_min(cost: &[Key], n: usize) -> Vec<usize> {
    // Potentials and augmenting-path bookkeeping, 1-indexed with a sentinel.
    let mut u = vec![Key::ZERO; n + 1];
    let mut v = vec![Key::ZERO; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![Key::INF; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.fill(Key::INF);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = Key::INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            col_of_row[owner[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Largest instance the enumeration oracle accepts, in rows and in distinct
/// columns. Multiplicities are enumerated directly and do not count.
pub const ORACLE_CAP: usize = 8;

/// Exact optimum by enumerating every partial assignment. Ties resolve to
/// the lexicographically smallest matching, like [`max_weight_assignment`].
pub fn brute_force_assignment(problem: &AssignmentProblem) -> Result<Assignment> {
    let rows = problem.weights.nrows();
    let cols = problem.weights.ncols();
    if rows > ORACLE_CAP || cols > ORACLE_CAP {
        return Err(Error::OracleSize(format!(
            "{rows} x {cols} exceeds {ORACLE_CAP} x {ORACLE_CAP}"
        )));
    }

    struct Search<'a> {
        problem: &'a AssignmentProblem,
        remaining: Vec<usize>,
        current: Vec<(usize, usize)>,
        best: Vec<(usize, usize)>,
        best_weight: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, row: usize) {
            if row == self.problem.weights.nrows() {
                let weight: f64 = self
                    .current
                    .iter()
                    .map(|&(r, c)| self.problem.weights[[r, c]])
                    .sum();
                if weight > self.best_weight
                    || (weight == self.best_weight && self.current < self.best)
                {
                    self.best_weight = weight;
                    self.best = self.current.clone();
                }
                return;
            }
            for c in 0..self.remaining.len() {
                if self.remaining[c] == 0 || self.problem.usable(row, c).is_none() {
                    continue;
                }
                self.remaining[c] -= 1;
                self.current.push((row, c));
                self.visit(row + 1);
                self.current.pop();
                self.remaining[c] += 1;
            }
            self.visit(row + 1);
        }
    }

    let mut search = Search {
        problem,
        remaining: problem.col_multiplicity.clone(),
        current: Vec::new(),
        best: Vec::new(),
        best_weight: 0.0,
    };
    search.visit(0);
    Ok(Assignment::from_pairs(problem, search.best))
}
