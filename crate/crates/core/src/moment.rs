//! Moment vectors, localizing matrices, and assembly of moment relaxations.
//!
//! A relaxation of order `k` uses the moment vector `y` over all monomials of
//! degree at most `2k` directly as the conic decision vector. Polynomial
//! equalities `h = 0` become scalar rows `L_h(y) = 0`, and inequalities
//! `g >= 0` become PSD blocks `L_g(y) >= 0` next to the moment matrix `M_k(y)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::poly::{basis_size, monomial_rank, monomial_vector, monomials_up_to, Monomial, Polynomial};
pub use crate::sdp::{ConicProblem, PsdBlock, Sense};

/// Relative threshold for dropping numerically dependent equality rows.
pub const ROW_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    n: usize,
    order: usize,
    values: Vec<f64>,
}

impl MomentVector {
    /// `values` are indexed by the graded order over degree `2 * order`.
    pub fn new(n: usize, order: usize, values: Vec<f64>) -> Result<Self> {
        let len = basis_size(n, 2 * order);
        if values.len() != len {
            return Err(Error::invalid(format!(
                "moment vector of order {order} in {n} variables needs {len} values, got {}",
                values.len()
            )));
        }
        Ok(MomentVector { n, order, values })
    }

    /// The Dirac moment vector `[u]_{2k}`.
    pub fn from_point(u: &[f64], order: usize) -> Self {
        MomentVector {
            n: u.len(),
            order,
            values: monomial_vector(u, 2 * order),
        }
    }

    /// Convex combination of Dirac moment vectors.
    pub fn from_atoms(atoms: &[(Vec<f64>, f64)], order: usize) -> Result<Self> {
        let n = atoms
            .first()
            .map(|(u, _)| u.len())
            .ok_or_else(|| Error::invalid("no atoms given"))?;
        let mut values = vec![0.0; basis_size(n, 2 * order)];
        for (u, w) in atoms {
            if u.len() != n {
                return Err(Error::invalid("atoms of different dimension"));
            }
            for (v, m) in values.iter_mut().zip(monomial_vector(u, 2 * order)) {
                *v += w * m;
            }
        }
        Ok(MomentVector { n, order, values })
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, alpha: &Monomial) -> Option<f64> {
        self.values.get(monomial_rank(alpha)).copied()
    }

    /// `y|_{2t}`: the moments of degree at most `2t`.
    pub fn truncated(&self, t: usize) -> Result<MomentVector> {
        if t > self.order {
            return Err(Error::invalid(format!(
                "cannot truncate order {} to {t}",
                self.order
            )));
        }
        Ok(MomentVector {
            n: self.n,
            order: t,
            values: self.values[..basis_size(self.n, 2 * t)].to_vec(),
        })
    }

    /// The Riesz functional `<f, y> = sum_a f_a y_a`.
    pub fn pair(&self, f: &Polynomial) -> Result<f64> {
        if f.nvars() != self.n {
            return Err(Error::invalid("polynomial and moment vector differ in variables"));
        }
        if f.degree() > 2 * self.order {
            return Err(Error::invalid("polynomial degree exceeds moment order"));
        }
        Ok(f.terms().map(|(m, c)| c * self.values[monomial_rank(m)]).sum())
    }

    /// The moment matrix `M_t(y)`.
    pub fn moment_matrix(&self, t: usize) -> Result<DMatrix<f64>> {
        LocalizingStructure::new(&Polynomial::constant(self.n, 1.0), t)?.assemble(self)
    }
}

/// Symbolic form of `L_q^{(k)}(y)`: every cell lists the moments it combines.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizingStructure {
    n: usize,
    order: usize,
    side: usize,
    /// Row/column monomials.
    basis: Vec<Monomial>,
    /// Row-major `side x side` cells of `(moment index, coefficient)`.
    cells: Vec<Vec<(usize, f64)>>,
}

impl LocalizingStructure {
    pub fn new(q: &Polynomial, order: usize) -> Result<Self> {
        let n = q.nvars();
        let deg = q.degree();
        if deg > 2 * order {
            return Err(Error::invalid(format!(
                "localizing polynomial of degree {deg} exceeds 2k = {}",
                2 * order
            )));
        }
        let half = deg.div_ceil(2);
        let basis = monomials_up_to(n, order - half);
        let side = basis.len();
        let terms: Vec<(Monomial, f64)> = q.terms().map(|(m, c)| (m.clone(), c)).collect();
        let mut cells = vec![Vec::new(); side * side];
        for i in 0..side {
            for j in i..side {
                let bg = basis[i].mul(&basis[j]);
                let cell: Vec<(usize, f64)> = terms
                    .iter()
                    .map(|(a, c)| (monomial_rank(&a.mul(&bg)), *c))
                    .collect();
                cells[j * side + i] = cell.clone();
                cells[i * side + j] = cell;
            }
        }
        Ok(LocalizingStructure {
            n,
            order,
            side,
            basis,
            cells,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn cell(&self, i: usize, j: usize) -> &[(usize, f64)] {
        &self.cells[i * self.side + j]
    }

    pub fn assemble(&self, y: &MomentVector) -> Result<DMatrix<f64>> {
        if y.n != self.n || y.order < self.order {
            return Err(Error::invalid(format!(
                "moment vector (n = {}, k = {}) too small for structure (n = {}, k = {})",
                y.n, y.order, self.n, self.order
            )));
        }
        let mut m = DMatrix::zeros(self.side, self.side);
        for i in 0..self.side {
            for j in 0..self.side {
                let mut v = 0.0;
                for &(idx, c) in self.cell(i, j) {
                    v += c * y
                        .values
                        .get(idx)
                        .ok_or_else(|| Error::Internal(format!("moment index {idx} out of range")))?;
                }
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Per-moment coefficient matrices as a PSD block over `num_vars` moments.
    pub fn to_block(&self, num_vars: usize, label: impl Into<String>) -> PsdBlock {
        let mut terms = vec![Vec::new(); num_vars];
        for i in 0..self.side {
            for j in 0..self.side {
                for &(idx, c) in self.cell(i, j) {
                    terms[idx].push((i, j, c));
                }
            }
        }
        PsdBlock {
            side: self.side,
            terms,
            label: label.into(),
        }
    }
}

/// Relaxation of `min f` subject to `eqs = 0`, `ineqs >= 0` at order `k`.
pub fn build_min_relaxation(
    f: &Polynomial,
    eqs: &[Polynomial],
    ineqs: &[Polynomial],
    k: usize,
) -> Result<ConicProblem> {
    build_relaxation(f, eqs, ineqs, k, Sense::Minimize)
}

/// Relaxation of `max f` subject to `eqs = 0`, `ineqs >= 0` at order `k`.
///
/// An upper bound `f <= b` is passed as the inequality `b - f >= 0`.
pub fn build_max_relaxation(
    f: &Polynomial,
    eqs: &[Polynomial],
    ineqs: &[Polynomial],
    k: usize,
) -> Result<ConicProblem> {
    build_relaxation(f, eqs, ineqs, k, Sense::Maximize)
}

fn build_relaxation(
    f: &Polynomial,
    eqs: &[Polynomial],
    ineqs: &[Polynomial],
    k: usize,
    sense: Sense,
) -> Result<ConicProblem> {
    let n = f.nvars();
    if k == 0 {
        return Err(Error::invalid("relaxation order must be positive"));
    }
    for p in std::iter::once(f).chain(eqs).chain(ineqs) {
        if p.nvars() != n {
            return Err(Error::invalid("polynomials differ in number of variables"));
        }
        if p.degree() > 2 * k {
            return Err(Error::invalid(format!(
                "degree {} exceeds twice the relaxation order {k}",
                p.degree()
            )));
        }
    }
    let num_vars = basis_size(n, 2 * k);

    let mut objective = vec![0.0; num_vars];
    for (m, c) in f.terms() {
        objective[monomial_rank(m)] = c;
    }

    let mut rows: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)]];
    let mut rhs = vec![1.0];
    for h in eqs.iter().filter(|h| !h.is_zero()) {
        let s = LocalizingStructure::new(h, k)?;
        for i in 0..s.side() {
            for j in i..s.side() {
                rows.push(s.cell(i, j).to_vec());
                rhs.push(0.0);
            }
        }
    }
    let (eq_rows, eq_rhs) = reduce_rows(rows, rhs, num_vars);

    let mut blocks = vec![LocalizingStructure::new(&Polynomial::constant(n, 1.0), k)?
        .to_block(num_vars, format!("moment M_{k}"))];
    for (i, g) in ineqs.iter().enumerate() {
        blocks.push(LocalizingStructure::new(g, k)?.to_block(num_vars, format!("localizing g{i}")));
    }

    Ok(ConicProblem {
        sense,
        objective,
        eq_rows,
        eq_rhs,
        blocks,
        moment_shape: Some((n, k)),
    })
}

/// Normalizes rows and keeps a numerically independent subset, chosen by
/// Gram-Schmidt with column pivoting on the transposed system.
fn reduce_rows(
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    num_vars: usize,
) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut scaled_rows = Vec::with_capacity(rows.len());
    let mut scaled_rhs = Vec::with_capacity(rows.len());
    for (row, b) in rows.into_iter().zip(rhs) {
        let mut d = vec![0.0; num_vars];
        for &(j, v) in &row {
            d[j] += v;
        }
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        d.iter_mut().for_each(|v| *v /= norm);
        let sparse: Vec<(usize, f64)> = d
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        dense.push(d);
        scaled_rows.push(sparse);
        scaled_rhs.push(b / norm);
    }

    let keep = pivoted_independent_set(&dense, ROW_RANK_TOL);
    let rows = keep.iter().map(|&i| scaled_rows[i].clone()).collect();
    let rhs = keep.iter().map(|&i| scaled_rhs[i]).collect();
    (rows, rhs)
}

/// Indices of a maximal numerically independent subset of `vectors`, in
/// their original order.
pub(crate) fn pivoted_independent_set(vectors: &[Vec<f64>], rel_tol: f64) -> Vec<usize> {
    let mut resid: Vec<Vec<f64>> = vectors.to_vec();
    let mut norms: Vec<f64> = resid.iter().map(|v| dot(v, v).sqrt()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let first = norms.iter().cloned().fold(0.0, f64::max);
    if first == 0.0 {
        return chosen;
    }
    let mut active: Vec<bool> = vec![true; vectors.len()];
    loop {
        let (best, best_norm) = norms
            .iter()
            .enumerate()
            .filter(|(i, _)| active[*i])
            .fold((usize::MAX, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if best == usize::MAX || best_norm <= rel_tol * first {
            break;
        }
        active[best] = false;
        // re-orthogonalize the pivot against the basis for stability
        let mut q = resid[best].clone();
        for b in &basis {
            let c = dot(&q, b);
            axpy(-c, b, &mut q);
        }
        let qn = dot(&q, &q).sqrt();
        if qn <= rel_tol * first {
            continue;
        }
        q.iter_mut().for_each(|v| *v /= qn);
        for i in 0..resid.len() {
            if active[i] {
                let c = dot(&resid[i], &q);
                axpy(-c, &q, &mut resid[i]);
                norms[i] = dot(&resid[i], &resid[i]).sqrt();
            }
        }
        basis.push(q);
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y_of(n: usize, order: usize, f: impl Fn(usize) -> f64) -> MomentVector {
        MomentVector::new(n, order, (0..basis_size(n, 2 * order)).map(f).collect()).unwrap()
    }

    fn idx(e: &[u32]) -> usize {
        monomial_rank(&Monomial::new(e.to_vec()))
    }

    #[test]
    fn localizing_structure_matches_displayed_matrix() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let q = x1.mul(&x2).unwrap().sub(&x1.pow(2)).unwrap().sub(&x2.pow(2)).unwrap();
        let s = LocalizingStructure::new(&q, 2).unwrap();
        assert_eq!(s.side(), 3);
        let sorted = |i, j| {
            let mut c = s.cell(i, j).to_vec();
            c.sort_by(|a, b| a.0.cmp(&b.0));
            c
        };
        // y11 - y20 - y02
        let mut expect = vec![(idx(&[1, 1]), 1.0), (idx(&[2, 0]), -1.0), (idx(&[0, 2]), -1.0)];
        expect.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(sorted(0, 0), expect);
        // y21 - y30 - y12
        let mut expect = vec![(idx(&[2, 1]), 1.0), (idx(&[3, 0]), -1.0), (idx(&[1, 2]), -1.0)];
        expect.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(sorted(0, 1), expect);
        assert_eq!(sorted(1, 0), expect);
        // y13 - y22 - y04
        let mut expect = vec![(idx(&[1, 3]), 1.0), (idx(&[2, 2]), -1.0), (idx(&[0, 4]), -1.0)];
        expect.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(sorted(2, 2), expect);
    }

    #[test]
    fn moment_matrix_matches_displayed_matrix() {
        let s = LocalizingStructure::new(&Polynomial::constant(2, 1.0), 2).unwrap();
        assert_eq!(s.side(), 6);
        let first_row: Vec<usize> = (0..6).map(|j| s.cell(0, j)[0].0).collect();
        let expect: Vec<usize> = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
            .iter()
            .map(|e| idx(e))
            .collect();
        assert_eq!(first_row, expect);
        let last_row: Vec<usize> = (0..6).map(|j| s.cell(5, j)[0].0).collect();
        let expect: Vec<usize> = [[0, 2], [1, 2], [0, 3], [2, 2], [1, 3], [0, 4]]
            .iter()
            .map(|e| idx(e))
            .collect();
        assert_eq!(last_row, expect);
    }

    #[test]
    fn dirac_moment_matrix_is_rank_one() {
        let u = [0.3, -1.2, 0.7];
        let y = MomentVector::from_point(&u, 2);
        let m = y.moment_matrix(2).unwrap();
        let v = monomial_vector(&u, 2);
        for i in 0..v.len() {
            for j in 0..v.len() {
                assert!((m[(i, j)] - v[i] * v[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_moment_only() {
        let y = y_of(2, 2, |i| if i == 0 { 1.0 } else { 0.0 });
        let m = y.moment_matrix(2).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn assemble_rejects_short_vectors() {
        let s = LocalizingStructure::new(&Polynomial::constant(2, 1.0), 3).unwrap();
        let y = MomentVector::from_point(&[1.0, 2.0], 2);
        assert!(s.assemble(&y).is_err());
        let q = Polynomial::var(2, 0).pow(5);
        assert!(LocalizingStructure::new(&q, 2).is_err());
    }

    #[test]
    fn pairing_with_dirac_is_evaluation() {
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let f = x1.pow(3).add(&x1.mul(&x2).unwrap().scale(-2.5)).unwrap();
        let u = [0.4, 1.7];
        let y = MomentVector::from_point(&u, 2);
        assert!((y.pair(&f).unwrap() - f.evaluate(&u).unwrap()).abs() < 1e-12);
        assert_eq!(y.truncated(1).unwrap().values().len(), 6);
    }

    #[test]
    fn min_relaxation_layout() {
        let x1 = Polynomial::var(1, 0);
        let f = x1.pow(2);
        let h = x1.pow(2).sub(&Polynomial::constant(1, 1.0)).unwrap();
        let p = build_min_relaxation(&f, &[h.clone()], &[], 1).unwrap();
        assert_eq!(p.num_vars(), 3);
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.blocks[0].side, 2);
        // <1,y> = 1 and y2 - y0 = 0
        assert_eq!(p.num_eq(), 2);
        assert_eq!(p.objective, vec![0.0, 0.0, 1.0]);

        let g = Polynomial::constant(1, 0.5).sub(&x1).unwrap();
        let p = build_max_relaxation(&x1, &[h], &[g], 1).unwrap();
        assert_eq!(p.sense, Sense::Maximize);
        assert_eq!(p.blocks.len(), 2);
        assert_eq!(p.blocks[1].side, 1);
        p.validate().unwrap();

        let too_big = x1.pow(3);
        assert!(build_min_relaxation(&too_big, &[], &[], 1).is_err());
    }

    #[test]
    fn dependent_rows_are_removed() {
        let rows = vec![
            vec![(0, 1.0), (1, 1.0)],
            vec![(0, 2.0), (1, 2.0)],
            vec![(1, 1.0)],
            vec![(0, 1.0)],
        ];
        let (kept, rhs) = reduce_rows(rows, vec![1.0, 2.0, 0.0, 1.0], 2);
        assert_eq!(kept.len(), 2);
        assert_eq!(rhs.len(), 2);
    }
}
