use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::problem::{ConicProblem, Sense};
use super::{ConicSolution, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, value: f64, threshold: f64) {
        self.checks.push(Check {
            name,
            value,
            threshold,
            passed: value.is_finite() && value <= threshold,
        });
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn scale_of(m: &DMatrix<f64>) -> f64 {
    1.0 + m.amax()
}

/// Recomputes feasibility from the raw problem data, independently of the solver.
///
/// For an optimal point: equality residual, PSD margin of every block, and the
/// duality gap against the reported dual multipliers. For an infeasibility claim:
/// the Farkas conditions `A'mu + F*(Z) = 0`, `Z >= 0`, `b'mu = 1`.
pub fn verify_solution(p: &ConicProblem, sol: &ConicSolution, tol: f64) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let a = p.eq_matrix();
    let b = DVector::from_vec(p.eq_rhs.clone());
    match sol.status {
        SolveStatus::PrimalInfeasible => {
            let Some(cert) = &sol.certificate else {
                rep.push("certificate-present", 1.0, 0.0);
                return rep;
            };
            let mu = DVector::from_vec(cert.eq_mult.clone());
            let mut ray = a.transpose() * &mu;
            for (blk, z) in p.blocks.iter().zip(&cert.blocks) {
                for (r, v) in ray.iter_mut().zip(blk.adjoint(z)) {
                    *r += v;
                }
            }
            let scale = 1.0 + mu.amax() + cert.blocks.iter().map(|z| z.amax()).fold(0.0, f64::max);
            rep.push("farkas-stationarity", ray.amax() / scale, tol);
            let worst = cert
                .blocks
                .iter()
                .map(|z| -min_eig(z) / scale_of(z))
                .fold(f64::NEG_INFINITY, f64::max);
            rep.push("farkas-psd", worst, tol);
            rep.push("farkas-normalization", (b.dot(&mu) - 1.0).abs(), tol);
        }
        _ if sol.has_point() => {
            let x = DVector::from_vec(sol.x.clone());
            let ax = &a * &x - &b;
            rep.push("equality-residual", ax.amax() / (1.0 + b.amax()), tol);
            let worst = p
                .blocks
                .iter()
                .map(|blk| {
                    let m = blk.assemble(&sol.x);
                    -min_eig(&m) / scale_of(&m)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            rep.push("psd-margin", worst, tol);
            let c = DVector::from_vec(p.objective.clone());
            let obj = c.dot(&x);
            rep.push(
                "objective-consistency",
                (obj - sol.objective).abs() / (1.0 + obj.abs()),
                tol,
            );
            // dual feasibility in minimization form
            let sign = if p.sense == Sense::Maximize { -1.0 } else { 1.0 };
            let mu = DVector::from_vec(sol.eq_duals.clone());
            let mut rd = a.transpose() * &mu - &c * sign;
            for (blk, z) in p.blocks.iter().zip(&sol.block_duals) {
                for (r, v) in rd.iter_mut().zip(blk.adjoint(z)) {
                    *r += v;
                }
            }
            rep.push("dual-residual", rd.amax() / (1.0 + c.amax()), tol.sqrt());
            let dobj = sign * b.dot(&mu);
            rep.push("duality-gap", (obj - dobj).abs() / (1.0 + obj.abs()), tol.sqrt());
        }
        _ => {}
    }
    rep
}
