//! Rectangular linear assignment with an explicit forbidden mask.
//!
//! The solver is a shortest-augmenting-path Hungarian method (Jonker–Volgenant
//! style, O(n²·m)). Each row gets a private "stay unmatched" column so every
//! row can always be placed; costs are compared lexicographically as
//! `(unmatched rows, total cost)`, which makes the result a maximum-cardinality
//! matching over allowed pairs with minimum total cost, without sentinel costs.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Sub, SubAssign};

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    forbidden: Vec<bool>,
}

impl CostMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            forbidden: vec![false; rows * cols],
        }
    }

    /// Builds from row vectors. All rows must have `cols` entries.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged cost matrix");
            m.values[r * cols..(r + 1) * cols].copy_from_slice(row);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn is_forbidden(&self, r: usize, c: usize) -> bool {
        self.forbidden[r * self.cols + c]
    }

    pub fn forbid(&mut self, r: usize, c: usize) {
        self.forbidden[r * self.cols + c] = true;
    }

    /// Sum of the costs of `matches`, accumulated in row order.
    pub fn total(&self, matches: &[(usize, usize)]) -> f64 {
        let mut sorted = matches.to_vec();
        sorted.sort_unstable();
        sorted.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Minimum-cost maximum-cardinality assignment respecting the forbidden mask.
pub fn solve_lap(costs: &CostMatrix) -> Assignment {
    let row_of = solve_lex(costs.rows, costs.cols, Lex::new(1, 0.0), |r, c| {
        (!costs.is_forbidden(r, c)).then(|| costs.get(r, c))
    });
    finish(costs.rows, costs.cols, row_of)
}

/// Maximum-weight matching (not necessarily maximum cardinality) over pairs
/// where `allowed` holds.
pub fn solve_max_weight(
    weights: &[Vec<f64>],
    cols: usize,
    allowed: impl Fn(usize, usize) -> bool,
) -> Assignment {
    let rows = weights.len();
    let row_of = solve_lex(rows, cols, Lex::new(0, 0.0), |r, c| {
        allowed(r, c).then(|| -weights[r][c])
    });
    finish(rows, cols, row_of)
}

/// Cost matrix `1 - similarity`, forbidding pairs below `threshold`.
pub fn gate_by_riou(similarity: &[Vec<f64>], cols: usize, threshold: f64) -> CostMatrix {
    let mut m = CostMatrix::zeros(similarity.len(), cols);
    for (r, row) in similarity.iter().enumerate() {
        for (c, &s) in row.iter().enumerate() {
            m.set(r, c, 1.0 - s);
            if s < threshold {
                m.forbid(r, c);
            }
        }
    }
    m
}

fn finish(rows: usize, cols: usize, col_of_row: Vec<Option<usize>>) -> Assignment {
    let mut used = vec![false; cols];
    let mut out = Assignment::default();
    for (r, c) in col_of_row.into_iter().enumerate() {
        match c {
            Some(c) => {
                used[c] = true;
                out.matches.push((r, c));
            }
            None => out.unmatched_rows.push(r),
        }
    }
    debug_assert_eq!(out.unmatched_rows.len() + out.matches.len(), rows);
    out.unmatched_cols = (0..cols).filter(|&c| !used[c]).collect();
    out
}

/// Lexicographic cost `(major, minor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex {
    major: i64,
    minor: f64,
}

impl Lex {
    const ZERO: Lex = Lex::new(0, 0.0);
    const INF: Lex = Lex::new(i64::MAX / 4, f64::INFINITY);

    const fn new(major: i64, minor: f64) -> Self {
        Self { major, minor }
    }

    fn is_inf(&self) -> bool {
        self.major >= i64::MAX / 4
    }
}

impl PartialOrd for Lex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(
            self.major
                .cmp(&other.major)
                .then(self.minor.total_cmp(&other.minor)),
        )
    }
}

impl Add for Lex {
    type Output = Lex;
    fn add(self, o: Lex) -> Lex {
        Lex::new(self.major + o.major, self.minor + o.minor)
    }
}

impl Sub for Lex {
    type Output = Lex;
    fn sub(self, o: Lex) -> Lex {
        Lex::new(self.major - o.major, self.minor - o.minor)
    }
}

impl AddAssign for Lex {
    fn add_assign(&mut self, o: Lex) {
        *self = *self + o;
    }
}

impl SubAssign for Lex {
    fn sub_assign(&mut self, o: Lex) {
        *self = *self - o;
    }
}

/// Core solver. Columns `cols..cols+rows` are the per-row unmatched slots,
/// each reachable only from its own row at cost `unmatched`.
fn solve_lex(
    rows: usize,
    cols: usize,
    unmatched: Lex,
    edge: impl Fn(usize, usize) -> Option<f64>,
) -> Vec<Option<usize>> {
    let m = cols + rows;
    let cost = |i: usize, j: usize| -> Option<Lex> {
        if j < cols {
            edge(i, j).map(|c| Lex::new(0, c))
        } else if j - cols == i {
            Some(unmatched)
        } else {
            None
        }
    };

    // 1-based rows/cols; index 0 is the virtual root
    let mut u = vec![Lex::ZERO; rows + 1];
    let mut v = vec![Lex::ZERO; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![Lex::INF; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(Lex::INF);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = Lex::INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                if let Some(c) = cost(i0 - 1, j - 1) {
                    let cur = c - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            // the row's own unmatched slot is always reachable
            debug_assert!(!delta.is_inf());
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else if !minv[j].is_inf() {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![None; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            col_of_row[p[j] - 1] = Some(j - 1);
        }
    }
    col_of_row
}
