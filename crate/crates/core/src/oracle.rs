//! Brute-force real eigenpairs of two-dimensional tensors.
//!
//! For `n = 2` eliminating `lambda` leaves a binary form whose real roots are
//! the eigenvector directions. The form is dehomogenized at `x = (1, t)`, its
//! roots come from a companion matrix, and the direction `(0, 1)` is tested
//! on its own.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Residual gate for oracle eigenpairs.
pub const ORACLE_RES_TOL: f64 = 1e-9;
const TRIM_REL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Z,
    H,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePair {
    pub lambda: f64,
    pub vector: [f64; 2],
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub eigenpairs: Vec<OraclePair>,
    /// `false` if the eliminated form vanished identically or a root failed the residual gate.
    pub complete: bool,
    pub note: Option<String>,
}

impl OracleResult {
    /// Distinct eigenvalues in increasing order.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eigenpairs.iter().map(|p| p.lambda).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-8 * (1.0 + b.abs()));
        v
    }
}

/// Roots of `sum_i coeffs[i] t^i`, or `None` if every coefficient is zero.
///
/// Leading coefficients below `1e-12 * max |coeffs|` are trimmed first.
pub fn companion_roots(coeffs: &[f64]) -> Option<Vec<Complex<f64>>> {
    let big = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if big == 0.0 || !big.is_finite() {
        return None;
    }
    let mut deg = coeffs.len() - 1;
    while coeffs[deg].abs() <= TRIM_REL * big {
        deg -= 1;
    }
    if deg == 0 {
        return Some(Vec::new());
    }
    let lead = coeffs[deg];
    let mut c = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        c[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        c[(i, deg - 1)] = -coeffs[i] / lead;
    }
    Some(c.complex_eigenvalues().iter().cloned().collect())
}

fn horner(coeffs: &[f64], t: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp)
}

/// Real roots of `sum_i coeffs[i] t^i`, Newton polished, or `None` for the zero polynomial.
pub fn real_roots(coeffs: &[f64]) -> Option<Vec<f64>> {
    let roots = companion_roots(coeffs)?;
    let mut out = Vec::new();
    for z in roots {
        if z.im.abs() > IMAG_TOL * (1.0 + z.re.abs()) {
            continue;
        }
        let mut t = z.re;
        for _ in 0..50 {
            let (p, dp) = horner(coeffs, t);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            let next = t - step;
            // keep the companion value when Newton wanders off a multiple root
            if !next.is_finite() || (next - z.re).abs() > 1e-3 * (1.0 + z.re.abs()) {
                break;
            }
            t = next;
            if step.abs() <= 1e-16 * (1.0 + t.abs()) {
                break;
            }
        }
        out.push(t);
    }
    out.sort_by(f64::total_cmp);
    Some(out)
}

fn check_dim(a: &Tensor) -> Result<()> {
    if a.dim() != 2 {
        return Err(Error::invalid(format!("oracle needs dimension 2, got {}", a.dim())));
    }
    Ok(())
}

/// Coefficients in `t` of `(A x^{m-1})_i` at `x = (1, t)`.
fn dehomogenized_rows(a: &Tensor) -> [Vec<f64>; 2] {
    let m = a.order();
    let mut rows = [vec![0.0; m], vec![0.0; m]];
    for (idx, v) in a.nonzeros() {
        let deg = idx[1..].iter().filter(|&&i| i == 1).count();
        rows[idx[0]][deg] += v;
    }
    rows
}

fn powers(kind: OracleKind, m: usize) -> (i32, i32) {
    match kind {
        OracleKind::Z => (1, 2),
        OracleKind::H => {
            let m0 = 2 * (m - 1).div_ceil(2);
            ((m - 1) as i32, m0 as i32)
        }
    }
}

/// `x2^p g1(t) - x1^p g2(t)` at `x = (1, t)`.
fn eliminated(kind: OracleKind, a: &Tensor) -> Vec<f64> {
    let m = a.order();
    let (p, _) = powers(kind, m);
    let [g1, g2] = dehomogenized_rows(a);
    let mut out = vec![0.0; m + p as usize];
    for (i, c) in g1.iter().enumerate() {
        out[i + p as usize] += c;
    }
    for (i, c) in g2.iter().enumerate() {
        out[i] -= c;
    }
    out
}

fn eigen_parts(kind: OracleKind, a: &Tensor, u: [f64; 2]) -> Result<(f64, f64)> {
    let m = a.order();
    let (p, q) = powers(kind, m);
    let ax = a.contract_partial(&u)?;
    let e = match kind {
        OracleKind::Z => 1,
        OracleKind::H => q - (m as i32) + 1,
    };
    let lambda = ax[0] * u[0].powi(e) + ax[1] * u[1].powi(e);
    let norm = u[0].powi(q) + u[1].powi(q);
    let res = (0..2)
        .map(|i| (ax[i] - lambda * u[i].powi(p)).abs())
        .fold((norm - 1.0).abs(), f64::max);
    Ok((lambda, res))
}

fn normalize(kind: OracleKind, m: usize, x: [f64; 2]) -> [f64; 2] {
    let (_, q) = powers(kind, m);
    let s = (x[0].abs().powi(q) + x[1].abs().powi(q)).powf(1.0 / q as f64);
    [x[0] / s, x[1] / s]
}

/// Newton on the full eigen system in `(x, lambda)`.
fn refine(kind: OracleKind, a: &Tensor, u: [f64; 2], lambda: f64) -> Result<([f64; 2], f64)> {
    let m = a.order();
    let (p, q) = powers(kind, m);
    let mut x = DVector::from_vec(vec![u[0], u[1], lambda]);
    for _ in 0..30 {
        let xv = [x[0], x[1]];
        let ax = a.contract_partial(&xv)?;
        let ja = a.partial_jacobian(&xv)?;
        let l = x[2];
        let f = DVector::from_vec(vec![
            ax[0] - l * xv[0].powi(p),
            ax[1] - l * xv[1].powi(p),
            xv[0].powi(q) + xv[1].powi(q) - 1.0,
        ]);
        let mut j = DMatrix::zeros(3, 3);
        for i in 0..2 {
            for c in 0..2 {
                j[(i, c)] = ja[i * 2 + c];
            }
            j[(i, i)] -= l * p as f64 * xv[i].powi(p - 1);
            j[(i, 2)] = -xv[i].powi(p);
            j[(2, i)] = q as f64 * xv[i].powi(q - 1);
        }
        let Some(step) = j.lu().solve(&f) else { break };
        x -= &step;
        if step.amax() <= 1e-15 {
            break;
        }
    }
    Ok(([x[0], x[1]], x[2]))
}

fn brute(kind: OracleKind, a: &Tensor) -> Result<OracleResult> {
    check_dim(a)?;
    let m = a.order();
    let Some(roots) = real_roots(&eliminated(kind, a)) else {
        return Ok(OracleResult {
            eigenpairs: Vec::new(),
            complete: false,
            note: Some("identically zero: continuum".into()),
        });
    };
    let mut dirs: Vec<[f64; 2]> = roots.iter().map(|&t| [1.0, t]).collect();
    dirs.push([0.0, 1.0]);
    let mut complete = true;
    let mut pairs: Vec<OraclePair> = Vec::new();
    for d in dirs {
        for sign in [1.0, -1.0] {
            let mut u = normalize(kind, m, [sign * d[0], sign * d[1]]).map(|v| if v.abs() < 1e-14 { 0.0 } else { v });
            let (mut lambda, mut res) = eigen_parts(kind, a, u)?;
            if d[0] == 0.0 && res > ORACLE_RES_TOL {
                // (0, 1) only counts if it is exactly an eigenvector
                continue;
            }
            if res > ORACLE_RES_TOL {
                let (v, l) = refine(kind, a, u, lambda)?;
                let v = normalize(kind, m, v);
                let (l2, r2) = eigen_parts(kind, a, v)?;
                if r2 <= ORACLE_RES_TOL && (l2 - l).abs() <= 1e-6 * (1.0 + l.abs()) {
                    u = v;
                    lambda = l2;
                    res = r2;
                } else {
                    complete = false;
                    continue;
                }
            }
            let dup = pairs
                .iter()
                .any(|p| (p.vector[0] - u[0]).abs().max((p.vector[1] - u[1]).abs()) <= 1e-6);
            if !dup {
                pairs.push(OraclePair {
                    lambda,
                    vector: u,
                    residual: res,
                });
            }
        }
    }
    pairs.sort_by(|x, y| x.lambda.total_cmp(&y.lambda).then(x.vector[0].total_cmp(&y.vector[0])));
    Ok(OracleResult {
        eigenpairs: pairs,
        complete,
        note: (!complete).then(|| "a real root failed the residual gate".into()),
    })
}

/// All real Z-eigenpairs of a tensor of dimension 2.
pub fn brute_z_n2(a: &Tensor) -> Result<OracleResult> {
    brute(OracleKind::Z, a)
}

/// All real H-eigenpairs of a tensor of dimension 2.
pub fn brute_h_n2(a: &Tensor) -> Result<OracleResult> {
    brute(OracleKind::H, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn quadratic_roots() {
        assert!(close(&real_roots(&[-1.0, 0.0, 1.0]).unwrap(), &[-1.0, 1.0], 1e-14));
        assert!(real_roots(&[1.0, 0.0, 1.0]).unwrap().is_empty());
        assert!(companion_roots(&[0.0, 0.0]).is_none());
    }

    #[test]
    fn trims_negligible_leading_terms() {
        let r = real_roots(&[-2.0, 1.0, 1e-15]).unwrap();
        assert!(close(&r, &[2.0], 1e-12));
    }

    #[test]
    fn cubic_with_known_roots() {
        // (t - 1)(t + 2)(t - 3)
        let r = real_roots(&[6.0, -5.0, -2.0, 1.0]).unwrap();
        assert!(close(&r, &[-2.0, 1.0, 3.0], 1e-12));
    }

    #[test]
    fn rejects_other_dimensions() {
        let a = Tensor::identity(3, 3).unwrap();
        assert!(brute_z_n2(&a).is_err());
    }

    #[test]
    fn diagonal_cubic() {
        let a = Tensor::from_sparse(3, 2, &[(&[1, 1, 1], 2.0), (&[2, 2, 2], 3.0)]).unwrap();
        let z = brute_z_n2(&a).unwrap();
        assert!(z.complete);
        for p in &z.eigenpairs {
            assert!(p.residual <= ORACLE_RES_TOL);
        }
        let v = z.values();
        // odd order: the spectrum is symmetric about zero
        for x in &v {
            assert!(v.iter().any(|y| (x + y).abs() < 1e-9));
        }
        assert!(v.iter().any(|x| (x - 2.0).abs() < 1e-12));
        assert!(v.iter().any(|x| (x - 3.0).abs() < 1e-12));
    }
}
