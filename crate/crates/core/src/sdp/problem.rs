use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// One PSD block `sum_i x_i F_i >= 0`, linear (no constant term) in the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub side: usize,
    /// For every decision variable, the entries `(row, col, coef)` of its
    /// coefficient matrix `F_i`. Both triangles are listed.
    pub terms: Vec<Vec<(usize, usize, f64)>>,
    pub label: String,
}

impl PsdBlock {
    pub fn assemble(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.side, self.side);
        for (xi, entries) in x.iter().zip(&self.terms) {
            if *xi == 0.0 {
                continue;
            }
            for &(r, c, v) in entries {
                m[(r, c)] += xi * v;
            }
        }
        m
    }

    /// Adjoint map: `<F_i, Z>` for every decision variable `i`.
    pub fn adjoint(&self, z: &DMatrix<f64>) -> Vec<f64> {
        self.terms
            .iter()
            .map(|entries| entries.iter().map(|&(r, c, v)| v * z[(r, c)]).sum())
            .collect()
    }
}

/// Standard-form conic problem over a free decision vector `x`:
///
/// ```text
///   min/max  c'x   s.t.  A x = b,   F_j(x) >= 0  for every PSD block j
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    /// Sparse equality rows `(variable, coef)`.
    pub eq_rows: Vec<Vec<(usize, f64)>>,
    pub eq_rhs: Vec<f64>,
    pub blocks: Vec<PsdBlock>,
    /// `(n, k)` when the decision vector is a moment vector over degree `2k`.
    pub moment_shape: Option<(usize, usize)>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.blocks.is_empty() {
            return Err(Error::invalid("conic problem needs at least one PSD block"));
        }
        if self.eq_rows.len() != self.eq_rhs.len() {
            return Err(Error::invalid("equality rows and right-hand side differ in length"));
        }
        if self.eq_rhs.iter().any(|b| !b.is_finite()) || self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite problem data"));
        }
        for row in &self.eq_rows {
            if row.iter().any(|&(j, _)| j >= n) {
                return Err(Error::invalid("equality row references an unknown variable"));
            }
        }
        for b in &self.blocks {
            if b.terms.len() != n {
                return Err(Error::invalid(format!(
                    "block '{}' lists {} variables, problem has {n}",
                    b.label,
                    b.terms.len()
                )));
            }
            if b.terms.iter().flatten().any(|&(r, c, _)| r >= b.side || c >= b.side) {
                return Err(Error::invalid(format!("block '{}' entry out of range", b.label)));
            }
        }
        Ok(())
    }

    /// Dense equality matrix.
    pub fn eq_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.num_eq(), self.num_vars());
        for (i, row) in self.eq_rows.iter().enumerate() {
            for &(j, v) in row {
                a[(i, j)] += v;
            }
        }
        a
    }

    /// Text dump for cross-checking with external solvers.
    ///
    /// Layout: a `sense` line, `vars N`, the objective as `c j value` lines,
    /// `eq i j value` triplets with `rhs i value`, then one `block side label`
    /// header per PSD block followed by `f var row col value` lines (upper triangle,
    /// 0-based).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        let _ = writeln!(out, "sense {sense}");
        let _ = writeln!(out, "vars {}", self.num_vars());
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "c {j} {c:?}");
            }
        }
        let _ = writeln!(out, "equalities {}", self.num_eq());
        for (i, row) in self.eq_rows.iter().enumerate() {
            for (j, v) in row {
                let _ = writeln!(out, "eq {i} {j} {v:?}");
            }
            let _ = writeln!(out, "rhs {i} {:?}", self.eq_rhs[i]);
        }
        let _ = writeln!(out, "blocks {}", self.blocks.len());
        for b in &self.blocks {
            let _ = writeln!(out, "block {} {}", b.side, b.label);
            for (var, entries) in b.terms.iter().enumerate() {
                for &(r, c, v) in entries {
                    if r <= c {
                        let _ = writeln!(out, "f {var} {r} {c} {v:?}");
                    }
                }
            }
        }
        out
    }
}
