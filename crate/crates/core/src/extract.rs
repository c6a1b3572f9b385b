//! Numerical rank, flat truncation, and recovery of atoms from a flat moment vector.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::moment::MomentVector;
use crate::poly::{basis_size, monomial_rank, monomial_vector, monomials_up_to, Monomial};

/// Floor under the largest singular value in [`numerical_rank`].
pub const RANK_ABS_FLOOR: f64 = 1e-12;
/// Largest accepted `max |sum c_j [u_j] - y|`.
pub const RECONSTRUCTION_TOL: f64 = 1e-4;
const MAX_DRAWS: usize = 5;

/// Finitely atomic measure `sum_j c_j delta_{u_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    /// `(u_j, c_j)` pairs.
    pub atoms: Vec<(Vec<f64>, f64)>,
    /// Truncation order `t` the atoms were read from.
    pub order: usize,
    /// `max |sum_j c_j [u_j]_{2t} - y|_{2t}|`.
    pub residual: f64,
}

fn sorted_eigenvectors(m: &DMatrix<f64>) -> DMatrix<f64> {
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])])
}

/// Number of singular values above `tol * max(sigma_1, RANK_ABS_FLOOR)`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = (m + m.transpose()) * 0.5;
    let sv: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().map(|v| v.abs()).collect();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let cut = tol * top.max(RANK_ABS_FLOOR);
    sv.iter().filter(|&&v| v > cut).count()
}

/// Smallest `t` in `[k0, k]` with `rank M_{t-k0}(y) = rank M_t(y)`.
pub fn flat_truncation(y: &MomentVector, k0: usize, k: usize, tol: f64) -> Option<usize> {
    (k0..=k.min(y.order())).find(|&t| {
        match (y.moment_matrix(t - k0), y.moment_matrix(t)) {
            (Ok(lo), Ok(hi)) => numerical_rank(&lo, tol) == numerical_rank(&hi, tol),
            _ => false,
        }
    })
}

/// Column echelon form of the orthonormal range basis `v` (rows = monomials).
///
/// Returns the pivot rows and `u` with `u[pivots[j], :] = e_j`.
fn column_echelon(v: &DMatrix<f64>) -> Option<(Vec<usize>, DMatrix<f64>)> {
    let r = v.ncols();
    let mut a = v.transpose();
    let scale = a.amax().max(RANK_ABS_FLOOR);
    let cut = 1e-6 * scale;
    let mut pivots = Vec::with_capacity(r);
    for col in 0..a.ncols() {
        let row = pivots.len();
        if row == r {
            break;
        }
        let (best, val) = (row..r)
            .map(|i| (i, a[(i, col)].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= cut {
            continue;
        }
        a.swap_rows(row, best);
        let p = a[(row, col)];
        let prow = a.row(row) / p;
        a.set_row(row, &prow);
        for i in 0..r {
            if i != row {
                let f = a[(i, col)];
                if f != 0.0 {
                    let upd = a.row(i) - &prow * f;
                    a.set_row(i, &upd);
                }
            }
        }
        pivots.push(col);
    }
    (pivots.len() == r).then(|| (pivots, a.transpose()))
}

/// Recovers the atoms of a moment vector that is flat at order `t`.
///
/// `seed` drives the random combination of multiplication matrices.
pub fn extract_atoms(y: &MomentVector, t: usize, tol: f64, seed: u64) -> Result<AtomicMeasure> {
    let n = y.nvars();
    let m = y.moment_matrix(t)?;
    let vecs = sorted_eigenvectors(&m);
    let r = numerical_rank(&m, tol);
    if r == 0 {
        return Err(Error::Extraction("moment matrix is numerically zero".into()));
    }
    let range = vecs.columns(0, r).into_owned();
    let (pivots, u) = column_echelon(&range)
        .ok_or_else(|| Error::Extraction("column echelon form lost rank".into()))?;
    let basis = monomials_up_to(n, t);
    let mut mult = Vec::with_capacity(n);
    for i in 0..n {
        let mut ni = DMatrix::zeros(r, r);
        for (j, &p) in pivots.iter().enumerate() {
            let shifted = basis[p].mul(&Monomial::var(n, i));
            if shifted.degree() > t {
                return Err(Error::Extraction(format!(
                    "basis monomial of degree {} cannot be shifted within order {t}",
                    basis[p].degree()
                )));
            }
            ni.set_row(j, &u.row(monomial_rank(&shifted)));
        }
        mult.push(ni);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = None;
    for _ in 0..MAX_DRAWS {
        let mut xi: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = xi.iter().sum();
        xi.iter_mut().for_each(|v| *v /= total);
        let comb = mult
            .iter()
            .zip(&xi)
            .fold(DMatrix::zeros(r, r), |acc, (ni, w)| acc + ni * *w);
        let Some(schur) = Schur::try_new(comb, f64::EPSILON, 1000) else {
            continue;
        };
        let (q, tri) = schur.unpack();
        // a 2x2 bump means a complex pair
        if (0..r.saturating_sub(1)).any(|j| tri[(j + 1, j)].abs() > 1e-8 * (1.0 + tri.amax())) {
            continue;
        }
        let mut diag: Vec<f64> = (0..r).map(|j| tri[(j, j)]).collect();
        diag.sort_by(f64::total_cmp);
        let spread = 1.0 + diag.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if diag.windows(2).any(|w| w[1] - w[0] <= 1e-6 * spread) {
            continue;
        }
        let pts: Vec<Vec<f64>> = (0..r)
            .map(|j| {
                let qj = q.column(j);
                mult.iter().map(|ni| qj.dot(&(ni * qj))).collect()
            })
            .collect();
        points = Some(pts);
        break;
    }
    let points = points.ok_or_else(|| {
        Error::Extraction(format!(
            "no simple real spectrum after {MAX_DRAWS} random combinations"
        ))
    })?;

    let yt = y.truncated(t)?;
    let target = DVector::from_column_slice(yt.values());
    let len = basis_size(n, 2 * t);
    let vander = DMatrix::from_fn(len, r, |row, col| monomial_vector(&points[col], 2 * t)[row]);
    let weights = vander
        .clone()
        .svd(true, true)
        .solve(&target, 1e-14)
        .map_err(|e| Error::Extraction(e.to_string()))?;
    let residual = (&vander * &weights - &target).amax();
    if !(residual <= RECONSTRUCTION_TOL) {
        return Err(Error::Extraction(format!(
            "reconstruction residual {residual:.3e} above {RECONSTRUCTION_TOL:.0e}"
        )));
    }
    if weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::Extraction("non-positive atom weight".into()));
    }
    Ok(AtomicMeasure {
        atoms: points.into_iter().zip(weights.iter().cloned()).collect(),
        order: t,
        residual,
    })
}
