//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling.
//!
//! Internally the problem is written as `min c'x  s.t.  A x = b,  G x + s = 0,
//! s >= 0` with `G = -F`, and embedded as
//!
//! ```text
//!   A'y + G'z + c tau = 0
//!   A x - b tau       = 0
//!   G x + s           = 0
//!   kappa + c'x + b'y = 0,     s, z >= 0,  tau, kappa >= 0
//! ```
//!
//! Each iteration solves the reduced KKT system
//! `[H A'; A 0]` with `H = F*(W^-1 F(.) W^-1)` twice (Mehrotra predictor and
//! corrector), plus once per iteration for the `tau` column.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::problem::{ConicProblem, Sense};
use super::{
    ConicSolution, ConicSolver, FarkasCertificate, SolveMetrics, SolveStatus, SolverOptions,
};

/// Dense primal-dual interior-point solver; deterministic and single-threaded.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPointSolver;

impl ConicSolver for InteriorPointSolver {
    fn solve(&self, problem: &ConicProblem, opts: &SolverOptions) -> ConicSolution {
        if problem.validate().is_err() {
            return failed(problem, SolveStatus::Inaccurate);
        }
        Ipm::new(problem, opts).run()
    }
}

fn failed(problem: &ConicProblem, status: SolveStatus) -> ConicSolution {
    ConicSolution {
        status,
        x: vec![0.0; problem.num_vars()],
        objective: f64::NAN,
        dual_objective: f64::NAN,
        eq_duals: vec![0.0; problem.num_eq()],
        block_duals: problem.blocks.iter().map(|b| DMatrix::zeros(b.side, b.side)).collect(),
        certificate: None,
        metrics: SolveMetrics::default(),
    }
}

/// NT scaling of one block: `R' Z R = R^-1 S R^-T = diag(lambda)`.
struct Scaling {
    r: DMatrix<f64>,
    lambda: DVector<f64>,
    /// `W^-1 = R^-T R^-1`.
    winv: DMatrix<f64>,
}

fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let ls = Cholesky::new(s.clone())?.l();
    let lz = Cholesky::new(z.clone())?.l();
    let prod = lz.transpose() * &ls;
    let svd = prod.svd(false, true);
    let v = svd.v_t?.transpose();
    let lambda = svd.singular_values;
    if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return None;
    }
    let inv_sqrt = lambda.map(|l| 1.0 / l.sqrt());
    let sqrt = lambda.map(f64::sqrt);
    let r = &ls * &v * DMatrix::from_diagonal(&inv_sqrt);
    let ls_inv = ls.solve_lower_triangular(&DMatrix::identity(s.nrows(), s.nrows()))?;
    let rinv = DMatrix::from_diagonal(&sqrt) * v.transpose() * ls_inv;
    let winv = rinv.transpose() * &rinv;
    Some(Scaling {
        r,
        lambda,
        winv,
    })
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// `X` solving `lambda o X = r` for the Jordan product `(LX + XL) / 2`.
fn jordan_div(lambda: &DVector<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (lambda[i] + lambda[j]))
}

fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    (a * b + b * a) * 0.5
}

/// Largest `alpha` with `diag(lambda) + alpha d >= 0`.
fn max_step(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| d[(i, j)] / (lambda[i] * lambda[j]).sqrt());
    let eig = SymmetricEigen::new(sym(&scaled));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

/// Cholesky of a Jacobi-equilibrated SPD matrix `D M D + reg I`, `D = diag(M)^-1/2`.
struct ScaledCholesky {
    d: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ScaledCholesky {
    fn new(mut m: DMatrix<f64>, reg: f64) -> Option<Self> {
        let n = m.nrows();
        let max_diag = m.diagonal().iter().cloned().fold(0.0, f64::max);
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return None;
        }
        let d = m.diagonal().map(|v| 1.0 / v.max(1e-14 * max_diag).sqrt());
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] *= d[i] * d[j];
            }
        }
        let mut reg = reg;
        loop {
            let mut mr = m.clone();
            for i in 0..n {
                mr[(i, i)] += reg;
            }
            if let Some(chol) = Cholesky::new(mr) {
                return Some(ScaledCholesky { d, chol });
            }
            reg *= 100.0;
            if reg > 1e-2 {
                return None;
            }
        }
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut v = r.component_mul(&self.d);
        self.chol.solve_mut(&mut v);
        v.component_mul(&self.d)
    }

    fn solve_mat(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = r.clone();
        for mut col in out.column_iter_mut() {
            let v = self.solve(&col.clone_owned());
            col.copy_from(&v);
        }
        out
    }
}

struct Kkt {
    chol_h: ScaledCholesky,
    /// `H^-1 A'`
    hinv_at: DMatrix<f64>,
    chol_s: Option<ScaledCholesky>,
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    /// Scaled `R^-1 ds R^-T` and `R' dz R`, per block.
    ds_t: Vec<DMatrix<f64>>,
    dz_t: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dtau: f64,
    dkappa: f64,
}

struct Ipm<'a> {
    p: &'a ConicProblem,
    opts: &'a SolverOptions,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    x: DVector<f64>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    tau: f64,
    kappa: f64,
    degree: f64,
}

struct Residuals {
    rx: DVector<f64>,
    ry: DVector<f64>,
    rz: Vec<DMatrix<f64>>,
    rtau: f64,
    mu: f64,
    pres: f64,
    dres: f64,
    pcost: f64,
    dcost: f64,
    gap: f64,
    rel_gap: f64,
    pinf: Option<f64>,
    dinf: Option<f64>,
}

impl<'a> Ipm<'a> {
    fn new(p: &'a ConicProblem, opts: &'a SolverOptions) -> Self {
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let c = DVector::from_iterator(p.num_vars(), p.objective.iter().map(|v| sign * v));
        let s: Vec<DMatrix<f64>> = p.blocks.iter().map(|b| DMatrix::identity(b.side, b.side)).collect();
        let degree = p.blocks.iter().map(|b| b.side as f64).sum::<f64>() + 1.0;
        Ipm {
            p,
            opts,
            a: p.eq_matrix(),
            b: DVector::from_vec(p.eq_rhs.clone()),
            c,
            x: DVector::zeros(p.num_vars()),
            y: DVector::zeros(p.num_eq()),
            z: s.clone(),
            s,
            tau: 1.0,
            kappa: 1.0,
            degree,
        }
    }

    fn f_apply(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.p.blocks.iter().map(|b| b.assemble(x.as_slice())).collect()
    }

    fn f_adjoint(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.p.num_vars());
        for (b, zb) in self.p.blocks.iter().zip(z) {
            for (o, v) in out.iter_mut().zip(b.adjoint(zb)) {
                *o += v;
            }
        }
        out
    }

    fn residuals(&self) -> Residuals {
        let fz = self.f_adjoint(&self.z);
        let rx = self.a.transpose() * &self.y - &fz + &self.c * self.tau;
        let ry = &self.a * &self.x - &self.b * self.tau;
        let fx = self.f_apply(&self.x);
        let rz: Vec<DMatrix<f64>> = self.s.iter().zip(&fx).map(|(s, f)| s - f).collect();
        let cx = self.c.dot(&self.x);
        let by = self.b.dot(&self.y);
        let rtau = self.kappa + cx + by;
        let sz: f64 = self.s.iter().zip(&self.z).map(|(s, z)| inner(s, z)).sum();
        let mu = (sz + self.tau * self.kappa) / self.degree;

        let nb = 1.0 + self.b.norm();
        let nc = 1.0 + self.c.norm();
        let rz_norm = rz.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let pres = (ry.norm() / nb).max(rz_norm) / self.tau;
        let dres = rx.norm() / nc / self.tau;
        let pcost = cx / self.tau;
        let dcost = -by / self.tau;
        let gap = sz / (self.tau * self.tau);
        let rel_gap = (pcost - dcost).abs().max(gap) / (1.0 + pcost.abs());

        let pinf = if by < 0.0 {
            let ray = self.a.transpose() * &self.y - &fz;
            Some(ray.norm() / nc / (-by))
        } else {
            None
        };
        let dinf = if cx < 0.0 {
            let ax = (&self.a * &self.x).norm() / nb;
            let gs = fx
                .iter()
                .zip(&self.s)
                .map(|(f, s)| (s - f).norm_squared())
                .sum::<f64>()
                .sqrt();
            Some(ax.max(gs) / (-cx))
        } else {
            None
        };
        Residuals {
            rx,
            ry,
            rz,
            rtau,
            mu,
            pres,
            dres,
            pcost,
            dcost,
            gap,
            rel_gap,
            pinf,
            dinf,
        }
    }

    fn factor(&self, sc: &[Scaling]) -> Option<Kkt> {
        let nv = self.p.num_vars();
        let mut h = DMatrix::<f64>::zeros(nv, nv);
        for (blk, scale) in self.p.blocks.iter().zip(sc) {
            let winv = &scale.winv;
            let n = blk.side;
            let active: Vec<usize> = (0..nv).filter(|&v| !blk.terms[v].is_empty()).collect();
            let mut t = DMatrix::<f64>::zeros(n, n);
            for &beta in &active {
                t.fill(0.0);
                for &(k, l, c) in &blk.terms[beta] {
                    // t += c * winv[:, k] * winv[l, :]
                    for j in 0..n {
                        let f = c * winv[(l, j)];
                        if f == 0.0 {
                            continue;
                        }
                        let col_k = winv.column(k);
                        let mut col_j = t.column_mut(j);
                        col_j.axpy(f, &col_k, 1.0);
                    }
                }
                for &alpha in &active {
                    if alpha > beta {
                        continue;
                    }
                    let v: f64 = blk.terms[alpha].iter().map(|&(i, j, c)| c * t[(i, j)]).sum();
                    h[(alpha, beta)] += v;
                }
            }
        }
        for j in 0..nv {
            for i in 0..j {
                h[(j, i)] = h[(i, j)];
            }
        }
        let chol_h = ScaledCholesky::new(h, self.opts.static_reg)?;
        let hinv_at = chol_h.solve_mat(&self.a.transpose());
        let chol_s = if self.p.num_eq() > 0 {
            Some(ScaledCholesky::new(sym(&(&self.a * &hinv_at)), self.opts.static_reg)?)
        } else {
            None
        };
        Some(Kkt {
            chol_h,
            hinv_at,
            chol_s,
        })
    }

    /// Solves `A'dy + G'dz = rx`, `A dx = ry`, `G dx - W dz W = rz`.
    fn kkt_solve_once(
        &self,
        kkt: &Kkt,
        sc: &[Scaling],
        rx: &DVector<f64>,
        ry: &DVector<f64>,
        rz: &[DMatrix<f64>],
    ) -> (DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>) {
        let wrw: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(rz)
            .map(|(s, r)| &s.winv * r * &s.winv)
            .collect();
        let r1 = rx - self.f_adjoint(&wrw);
        let hr1 = kkt.chol_h.solve(&r1);
        let (dx, dy) = match &kkt.chol_s {
            Some(cs) => {
                let rhs = &self.a * &hr1 - ry;
                let dy = cs.solve(&rhs);
                let dx = hr1 - &kkt.hinv_at * &dy;
                (dx, dy)
            }
            None => (hr1, DVector::zeros(0)),
        };
        let fdx = self.f_apply(&dx);
        let dz: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(fdx.iter().zip(rz))
            .map(|(s, (f, r))| -(&s.winv * (f + r) * &s.winv))
            .collect();
        (dx, dy, dz)
    }

    fn kkt_solve(
        &self,
        kkt: &Kkt,
        sc: &[Scaling],
        rx: &DVector<f64>,
        ry: &DVector<f64>,
        rz: &[DMatrix<f64>],
    ) -> (DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>) {
        let (mut dx, mut dy, mut dz) = self.kkt_solve_once(kkt, sc, rx, ry, rz);
        for _ in 0..3 {
            // residual of the unregularized system
            let ex = rx - (self.a.transpose() * &dy - self.f_adjoint(&dz));
            let ey = ry - &self.a * &dx;
            let fdx = self.f_apply(&dx);
            let ez: Vec<DMatrix<f64>> = sc
                .iter()
                .zip(rz.iter().zip(fdx.iter().zip(&dz)))
                .map(|(s, (r, (f, d)))| {
                    let w = s.r.clone() * s.r.transpose();
                    r + f + &w * d * &w
                })
                .collect();
            let (cx, cy, cz) = self.kkt_solve_once(kkt, sc, &ex, &ey, &ez);
            dx += cx;
            dy += cy;
            for (d, c) in dz.iter_mut().zip(cz) {
                *d += c;
            }
        }
        (dx, dy, dz)
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        kkt: &Kkt,
        sc: &[Scaling],
        res: &Residuals,
        u1: &(DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>),
        sigma: f64,
        corr: Option<&Direction>,
    ) -> Direction {
        let eta = 1.0 - sigma;
        let mu = res.mu;
        let r1 = &res.rx * -eta;
        let r2 = &res.ry * -eta;
        let r4 = -eta * res.rtau;
        let mut t5 = Vec::with_capacity(sc.len());
        let mut r3 = Vec::with_capacity(sc.len());
        for (k, s) in sc.iter().enumerate() {
            let n = s.lambda.len();
            let mut r5 = DMatrix::from_diagonal(&s.lambda.map(|l| -l * l + sigma * mu));
            if let Some(c) = corr {
                r5 -= jordan(&c.ds_t[k], &c.dz_t[k]);
            }
            let t = jordan_div(&s.lambda, &r5);
            let back = &s.r * &t * s.r.transpose();
            r3.push(&res.rz[k] * -eta - back);
            t5.push(t);
            debug_assert_eq!(t5[k].nrows(), n);
        }
        let mut r6 = -self.tau * self.kappa + sigma * mu;
        if let Some(c) = corr {
            r6 -= c.dtau * c.dkappa;
        }
        let (x2, y2, z2) = self.kkt_solve(kkt, sc, &r1, &r2, &r3);
        let (x1, y1, _z1) = u1;
        let num = r4 - r6 / self.tau - self.c.dot(&x2) - self.b.dot(&y2);
        let den = -self.kappa / self.tau + self.c.dot(x1) + self.b.dot(y1);
        let dtau = num / den;
        let dx = x2 + x1 * dtau;
        let dy = y2 + y1 * dtau;
        let dz: Vec<DMatrix<f64>> = z2
            .iter()
            .zip(&u1.2)
            .map(|(a, b)| a + b * dtau)
            .collect();
        let dz_t: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(&dz)
            .map(|(s, d)| sym(&(s.r.transpose() * d * &s.r)))
            .collect();
        let ds_t: Vec<DMatrix<f64>> = t5.iter().zip(&dz_t).map(|(t, d)| t - d).collect();
        let ds: Vec<DMatrix<f64>> = sc
            .iter()
            .zip(&ds_t)
            .map(|(s, d)| sym(&(&s.r * d * s.r.transpose())))
            .collect();
        let dkappa = (r6 - self.kappa * dtau) / self.tau;
        Direction {
            dx,
            dy,
            ds_t,
            dz_t,
            dz,
            ds,
            dtau,
            dkappa,
        }
    }

    fn step_length(&self, sc: &[Scaling], d: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        for (k, s) in sc.iter().enumerate() {
            alpha = alpha.min(max_step(&s.lambda, &d.ds_t[k]));
            alpha = alpha.min(max_step(&s.lambda, &d.dz_t[k]));
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        alpha
    }

    fn run(mut self) -> ConicSolution {
        let opts = self.opts;
        let mut iter = 0usize;
        let mut last = self.residuals();
        let status = loop {
            let res = &last;
            if res.pres <= opts.eps_feas && res.dres <= opts.eps_feas && res.rel_gap <= opts.eps_gap {
                break SolveStatus::Optimal;
            }
            if let Some(pinf) = res.pinf {
                if pinf <= opts.eps_feas && self.tau / self.kappa <= opts.infeas_ratio {
                    break SolveStatus::PrimalInfeasible;
                }
            }
            if let Some(dinf) = res.dinf {
                if dinf <= opts.eps_feas && self.tau / self.kappa <= opts.infeas_ratio {
                    break SolveStatus::DualInfeasible;
                }
            }
            if iter >= opts.max_iter {
                break SolveStatus::IterationLimit;
            }

            let sc: Option<Vec<Scaling>> = self
                .s
                .iter()
                .zip(&self.z)
                .map(|(s, z)| nt_scaling(s, z))
                .collect();
            let Some(sc) = sc else {
                break SolveStatus::Inaccurate;
            };
            let Some(kkt) = self.factor(&sc) else {
                break SolveStatus::Inaccurate;
            };
            let zero_rz: Vec<DMatrix<f64>> = self
                .p
                .blocks
                .iter()
                .map(|b| DMatrix::zeros(b.side, b.side))
                .collect();
            let u1 = self.kkt_solve(&kkt, &sc, &(-&self.c), &self.b, &zero_rz);

            let aff = self.direction(&kkt, &sc, res, &u1, 0.0, None);
            let alpha_aff = self.step_length(&sc, &aff).min(1.0);
            let sigma = (1.0 - alpha_aff).clamp(0.0, 1.0).powi(3);
            let comb = self.direction(&kkt, &sc, res, &u1, sigma, Some(&aff));
            let alpha = (opts.step_fraction * self.step_length(&sc, &comb)).min(1.0);
            if !(alpha > 1e-12) || !alpha.is_finite() {
                break SolveStatus::Inaccurate;
            }

            self.x += &comb.dx * alpha;
            self.y += &comb.dy * alpha;
            for k in 0..self.s.len() {
                self.s[k] = sym(&(&self.s[k] + &comb.ds[k] * alpha));
                self.z[k] = sym(&(&self.z[k] + &comb.dz[k] * alpha));
            }
            self.tau += alpha * comb.dtau;
            self.kappa += alpha * comb.dkappa;
            iter += 1;
            let next = self.residuals();
            if !next.mu.is_finite() {
                break SolveStatus::Inaccurate;
            }
            last = next;
        };

        let res = last;
        let status = match status {
            SolveStatus::Inaccurate | SolveStatus::IterationLimit => {
                if res.pres <= 1e-4 && res.dres <= 1e-4 && res.rel_gap <= 1e-4 {
                    SolveStatus::Inaccurate
                } else if let (Some(pinf), true) = (res.pinf, self.tau / self.kappa <= 1e-4) {
                    if pinf <= opts.eps_feas {
                        SolveStatus::PrimalInfeasible
                    } else {
                        status
                    }
                } else {
                    status
                }
            }
            s => s,
        };
        self.finish(status, res, iter)
    }

    fn finish(self, status: SolveStatus, res: Residuals, iterations: usize) -> ConicSolution {
        let sign = match self.p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let metrics = SolveMetrics {
            primal_residual: res.pres,
            dual_residual: res.dres,
            gap: res.gap,
            rel_gap: res.rel_gap,
            iterations,
            tau: self.tau,
            kappa: self.kappa,
        };
        let certificate = if status == SolveStatus::PrimalInfeasible {
            let by = self.b.dot(&self.y);
            let scale = -1.0 / by;
            Some(FarkasCertificate {
                eq_mult: self.y.iter().map(|v| -v * scale).collect(),
                blocks: self.z.iter().map(|z| z * scale).collect(),
            })
        } else {
            None
        };
        let t = self.tau;
        ConicSolution {
            status,
            x: (&self.x / t).iter().cloned().collect(),
            objective: sign * res.pcost,
            dual_objective: sign * res.dcost,
            eq_duals: self.y.iter().map(|v| -v / t).collect(),
            block_duals: self.z.iter().map(|z| z / t).collect(),
            certificate,
            metrics,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_identities() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let z = DMatrix::from_row_slice(3, 3, &[1.0, -0.3, 0.1, -0.3, 2.0, 0.4, 0.1, 0.4, 1.5]);
        let sc = nt_scaling(&s, &z).unwrap();
        let lam = DMatrix::from_diagonal(&sc.lambda);
        let zt = sc.r.transpose() * &z * &sc.r;
        assert!((zt - &lam).norm() < 1e-10);
        let rinv = sc.r.clone().try_inverse().unwrap();
        assert!((&rinv * &s * rinv.transpose() - &lam).norm() < 1e-10);
        // W z W = s with W = R R'
        let w = &sc.r * sc.r.transpose();
        assert!((&w * &z * &w - &s).norm() < 1e-10);
    }

    #[test]
    fn jordan_division_inverts_product() {
        let lam = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 0.0, 1.0, 3.0, 1.0, -1.0]);
        let r = jordan(&DMatrix::from_diagonal(&lam), &x);
        assert!((jordan_div(&lam, &r) - x).norm() < 1e-12);
    }
}
