//! Z- and H-eigenvalue sweeps.
//!
//! The smallest eigenvalue is the minimum of `f` on the variety `h = 0` and is
//! computed by the moment hierarchy. Each further eigenvalue is the minimum of
//! `f` subject to `f >= lambda_i + delta`, after a backward check that no
//! eigenvalue lies in `(lambda_i, lambda_i + delta]`. An infeasible shifted
//! relaxation proves that `lambda_i` is the largest one.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::extract::{extract_atoms, flat_truncation};
use crate::moment::{build_max_relaxation, build_min_relaxation, MomentVector};
use crate::poly::{tensor_to_poly, tensor_to_poly_vector, Monomial, Polynomial};
use crate::sdp::{
    verify_solution, ConicProblem, ConicSolution, ConicSolver, InteriorPointSolver, SolveStatus,
    SolverOptions, VerificationReport,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EigKind {
    Z,
    H,
}

impl EigKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EigKind::Z => "Z",
            EigKind::H => "H",
        }
    }
}

impl fmt::Display for EigKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `m0 = 2 ceil((m - 1) / 2)`.
pub fn h_degree(m: usize) -> usize {
    2 * m.saturating_sub(1).div_ceil(2)
}

/// Starting relaxation order for the given kind and tensor order.
pub fn start_order(kind: EigKind, m: usize) -> usize {
    match kind {
        EigKind::Z => (m + 1).div_ceil(2),
        EigKind::H => (h_degree(m) + m - 1).div_ceil(2),
    }
}

/// Number of complex H-eigenvalues, `n (m - 1)^(n - 1)`.
pub fn h_count_bound(m: usize, n: usize) -> u128 {
    n as u128 * ((m as u128).saturating_sub(1)).pow(n.saturating_sub(1) as u32)
}

fn check_order(a: &Tensor) -> Result<()> {
    if a.order() < 2 {
        return Err(Error::invalid(format!("tensor order {} below 2", a.order())));
    }
    Ok(())
}

fn power(n: usize, i: usize, e: usize) -> Polynomial {
    let mut exps = vec![0u32; n];
    exps[i] = e as u32;
    Polynomial::monomial(Monomial::new(exps), 1.0)
}

/// `f = A x^m` and `h = (A x^{m-1} - f x, x'x - 1)`.
pub fn z_system(a: &Tensor) -> Result<(Polynomial, Vec<Polynomial>)> {
    check_order(a)?;
    let n = a.dim();
    let f = tensor_to_poly(a);
    let mut h = Vec::with_capacity(n + 1);
    for (i, row) in tensor_to_poly_vector(a).into_iter().enumerate() {
        h.push(row.sub(&f.mul(&Polynomial::var(n, i))?)?);
    }
    let mut norm = Polynomial::constant(n, -1.0);
    for i in 0..n {
        norm = norm.add(&power(n, i, 2))?;
    }
    h.push(norm);
    Ok((f, h))
}

/// `f = (x^[m0-m+1])' A x^{m-1}`, `h = (A x^{m-1} - f x^[m-1], sum x_i^m0 - 1)` and `m0`.
pub fn h_system(a: &Tensor) -> Result<(Polynomial, Vec<Polynomial>, usize)> {
    check_order(a)?;
    let n = a.dim();
    let m = a.order();
    let m0 = h_degree(m);
    let rows = tensor_to_poly_vector(a);
    let mut f = Polynomial::zero(n);
    for (i, row) in rows.iter().enumerate() {
        f = f.add(&row.mul(&power(n, i, m0 + 1 - m))?)?;
    }
    let mut h = Vec::with_capacity(n + 1);
    for (i, row) in rows.iter().enumerate() {
        h.push(row.sub(&f.mul(&power(n, i, m - 1))?)?);
    }
    let mut norm = Polynomial::constant(n, -1.0);
    for i in 0..n {
        norm = norm.add(&power(n, i, m0))?;
    }
    h.push(norm);
    Ok((f, h, m0))
}

/// Exponent `p` in `A x^{m-1} = lambda x^[p]`.
fn rhs_power(kind: EigKind, m: usize) -> usize {
    match kind {
        EigKind::Z => 1,
        EigKind::H => m - 1,
    }
}

fn norm_power(kind: EigKind, m: usize) -> usize {
    match kind {
        EigKind::Z => 2,
        EigKind::H => h_degree(m),
    }
}

/// `F(lambda, x) = [normalization - 1; A x^{m-1} - lambda x^[p]]`.
fn system_value(kind: EigKind, a: &Tensor, lambda: f64, x: &[f64]) -> Result<DVector<f64>> {
    let m = a.order();
    let p = rhs_power(kind, m) as i32;
    let q = norm_power(kind, m) as i32;
    let ax = a.contract_partial(x)?;
    let mut out = DVector::zeros(x.len() + 1);
    out[0] = x.iter().map(|v| v.powi(q)).sum::<f64>() - 1.0;
    for i in 0..x.len() {
        out[i + 1] = ax[i] - lambda * x[i].powi(p);
    }
    Ok(out)
}

/// Jacobian of `F` with respect to `(lambda, x)`.
pub fn jacobian(kind: EigKind, a: &Tensor, lambda: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let m = a.order();
    let p = rhs_power(kind, m) as i32;
    let q = norm_power(kind, m) as i32;
    let ja = a.partial_jacobian(x)?;
    let mut j = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        j[(0, i + 1)] = q as f64 * x[i].powi(q - 1);
        j[(i + 1, 0)] = -x[i].powi(p);
        for c in 0..n {
            j[(i + 1, c + 1)] = ja[i * n + c];
        }
        j[(i + 1, i + 1)] -= lambda * p as f64 * x[i].powi(p - 1);
    }
    Ok(j)
}

/// `max(|normalization - 1|, |A u^{m-1} - lambda u^[p]|_inf)`.
pub fn eigen_residual(kind: EigKind, a: &Tensor, lambda: f64, u: &[f64]) -> Result<f64> {
    Ok(system_value(kind, a, lambda, u)?.amax())
}

/// The eigenvalue belonging to a normalized eigenvector.
pub fn rayleigh_value(kind: EigKind, a: &Tensor, u: &[f64]) -> Result<f64> {
    let ax = a.contract_partial(u)?;
    let m = a.order();
    let e = match kind {
        EigKind::Z => 1,
        EigKind::H => (h_degree(m) + 1 - m) as i32,
    };
    Ok(ax.iter().zip(u).map(|(v, x)| v * x.powi(e)).sum())
}

fn singular_ratio(j: &DMatrix<f64>) -> f64 {
    let sv = j.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polished {
    pub lambda: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    /// `false` when the input came back unchanged (singular Jacobian or divergence).
    pub converged: bool,
}

/// Jacobian conditioning below which Newton polishing is refused.
pub const POLISH_COND: f64 = 1e-10;

/// Newton refinement of an approximate eigenpair on `F(lambda, x) = 0`.
pub fn polish_eigenpair(kind: EigKind, a: &Tensor, lambda: f64, u: &[f64]) -> Result<Polished> {
    let r0 = eigen_residual(kind, a, lambda, u)?;
    let unchanged = Polished {
        lambda,
        vector: u.to_vec(),
        residual: r0,
        converged: false,
    };
    if !r0.is_finite() || singular_ratio(&jacobian(kind, a, lambda, u)?) < POLISH_COND {
        return Ok(unchanged);
    }
    let mut lam = lambda;
    let mut x = u.to_vec();
    let mut res = r0;
    for _ in 0..50 {
        if res <= 1e-15 {
            break;
        }
        let j = jacobian(kind, a, lam, &x)?;
        if singular_ratio(&j) < POLISH_COND {
            return Ok(unchanged);
        }
        let fval = system_value(kind, a, lam, &x)?;
        let Some(step) = j.lu().solve(&(-fval)) else {
            return Ok(unchanged);
        };
        lam += step[0];
        for (xi, d) in x.iter_mut().zip(step.iter().skip(1)) {
            *xi += d;
        }
        let next = eigen_residual(kind, a, lam, &x)?;
        let small_step = step.amax() <= 1e-15 * (1.0 + lam.abs());
        res = next;
        if small_step {
            break;
        }
    }
    if !(res <= r0.max(1e-10)) || !res.is_finite() {
        return Ok(unchanged);
    }
    Ok(Polished {
        lambda: lam,
        vector: x,
        residual: res,
        converged: true,
    })
}

/// Minimum-norm Gauss-Newton steps, used where the Jacobian is singular.
fn refine_singular(kind: EigKind, a: &Tensor, lambda: f64, u: &[f64]) -> Result<Polished> {
    let r0 = eigen_residual(kind, a, lambda, u)?;
    let mut best = Polished {
        lambda,
        vector: u.to_vec(),
        residual: r0,
        converged: false,
    };
    let mut lam = lambda;
    let mut x = u.to_vec();
    for _ in 0..30 {
        let j = jacobian(kind, a, lam, &x)?;
        let fval = system_value(kind, a, lam, &x)?;
        let svd = j.svd(true, true);
        let cut = 1e-8 * svd.singular_values.max();
        let Ok(step) = svd.solve(&(-fval), cut) else {
            break;
        };
        lam += step[0];
        for (xi, d) in x.iter_mut().zip(step.iter().skip(1)) {
            *xi += d;
        }
        let res = eigen_residual(kind, a, lam, &x)?;
        if !res.is_finite() {
            break;
        }
        if res < best.residual {
            best = Polished {
                lambda: lam,
                vector: x.clone(),
                residual: res,
                converged: false,
            };
        }
        if res <= 1e-14 {
            break;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Isolation {
    Isolated,
    Inconclusive,
}

/// Isolated iff `sigma_min(J) > jac_tol * sigma_max(J)`.
pub fn check_isolated(kind: EigKind, a: &Tensor, lambda: f64, u: &[f64], jac_tol: f64) -> Result<Isolation> {
    let j = jacobian(kind, a, lambda, u)?;
    Ok(if singular_ratio(&j) > jac_tol {
        Isolation::Isolated
    } else {
        Isolation::Inconclusive
    })
}

#[derive(Clone)]
pub struct SweepOptions {
    pub delta0: f64,
    pub delta_min: f64,
    pub shrink: f64,
    /// Tolerance of the backward test `nu_i = lambda_i`.
    pub eps_eq: f64,
    pub eps_res: f64,
    pub eps_dedup: f64,
    /// Max-abs distance under which two eigenvectors are the same.
    pub vector_merge: f64,
    pub rank_tol: f64,
    pub jac_tol: f64,
    /// `k_max = k0 + kmax_offset`.
    pub kmax_offset: usize,
    /// Adds `f >= 0` to the first relaxation.
    pub nonneg: bool,
    pub seed: u64,
    pub solver_options: SolverOptions,
    pub solver: Arc<dyn ConicSolver>,
    /// Every assembled relaxation is written here when set.
    pub dump_dir: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            delta0: 0.05,
            delta_min: 1e-6,
            shrink: 5.0,
            eps_eq: 1e-4,
            eps_res: 1e-7,
            eps_dedup: 1e-6,
            vector_merge: 1e-5,
            rank_tol: 1e-6,
            jac_tol: 1e-6,
            kmax_offset: 3,
            nonneg: false,
            seed: 0,
            solver_options: SolverOptions::default(),
            solver: Arc::new(InteriorPointSolver),
            dump_dir: None,
        }
    }
}

impl fmt::Debug for SweepOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SweepOptions")
            .field("delta0", &self.delta0)
            .field("delta_min", &self.delta_min)
            .field("shrink", &self.shrink)
            .field("eps_eq", &self.eps_eq)
            .field("eps_res", &self.eps_res)
            .field("eps_dedup", &self.eps_dedup)
            .field("vector_merge", &self.vector_merge)
            .field("rank_tol", &self.rank_tol)
            .field("jac_tol", &self.jac_tol)
            .field("kmax_offset", &self.kmax_offset)
            .field("nonneg", &self.nonneg)
            .field("seed", &self.seed)
            .field("solver_options", &self.solver_options)
            .field("dump_dir", &self.dump_dir)
            .finish_non_exhaustive()
    }
}

impl SweepOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta0", self.delta0),
            ("delta-min", self.delta_min),
            ("eps-eq", self.eps_eq),
            ("tol-res", self.eps_res),
            ("eps-dedup", self.eps_dedup),
            ("vector-merge", self.vector_merge),
            ("rank-tol", self.rank_tol),
            ("jac-tol", self.jac_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.delta0 <= self.delta_min {
            return Err(Error::invalid("delta must exceed delta-min"));
        }
        if !(self.shrink > 1.0) {
            return Err(Error::invalid("shrink factor must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub kind: EigKind,
    pub value: f64,
    pub vectors: Vec<Vec<f64>>,
    pub residual: f64,
    pub isolated: bool,
    /// Relaxation order at acceptance.
    pub order: usize,
}

/// A verified infeasibility proof of a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub order: usize,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SmallestOutcome {
    NoRealEigenvalue(Certificate),
    Found(Eigenpair),
    /// Order cap reached; carries the last lower bound when one was solved.
    Unresolved(Option<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextOutcome {
    NoMore(Certificate),
    Found(Eigenpair, f64),
    NonIsolatedSuspected,
    Unresolved(Option<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CertifiedComplete,
    ContinuumSuspected,
    Budget,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::CertifiedComplete => "certified-complete",
            Termination::ContinuumSuspected => "continuum-suspected",
            Termination::Budget => "budget",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Smallest,
    Backward,
    Shifted,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Smallest => "smallest",
            Stage::Backward => "backward",
            Stage::Shifted => "shifted",
        }
    }
}

/// One relaxation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub stage: Stage,
    pub order: usize,
    pub delta: Option<f64>,
    pub status: SolveStatus,
    pub value: Option<f64>,
    pub flat: Option<usize>,
    pub iterations: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub kind: EigKind,
    pub eigenpairs: Vec<Eigenpair>,
    pub termination: Termination,
    /// Proof attached to `CertifiedComplete`.
    pub certificate: Option<Certificate>,
    pub log: Vec<StepRecord>,
}

impl Spectrum {
    pub fn values(&self) -> Vec<f64> {
        self.eigenpairs.iter().map(|e| e.value).collect()
    }

    pub fn solves(&self) -> usize {
        self.log.len()
    }

    pub fn solver_iterations(&self) -> usize {
        self.log.iter().map(|s| s.iterations).sum()
    }
}

struct Sweep<'a> {
    kind: EigKind,
    a: &'a Tensor,
    opts: &'a SweepOptions,
    f: Polynomial,
    h: Vec<Polynomial>,
    k0: usize,
    log: Vec<StepRecord>,
    /// Eigenpairs read off with the last accepted one, above it.
    pending: Vec<Eigenpair>,
    /// Eigenvalue above the current one seen by a backward check.
    above: Option<f64>,
}

enum Accept {
    Pairs(Vec<Eigenpair>),
    Rejected(String),
}

impl<'a> Sweep<'a> {
    fn new(kind: EigKind, a: &'a Tensor, opts: &'a SweepOptions) -> Result<Self> {
        opts.validate()?;
        let (f, h) = match kind {
            EigKind::Z => z_system(a)?,
            EigKind::H => {
                let (f, h, _) = h_system(a)?;
                (f, h)
            }
        };
        Ok(Sweep {
            kind,
            a,
            opts,
            f,
            h,
            k0: start_order(kind, a.order()),
            log: Vec::new(),
            pending: Vec::new(),
            above: None,
        })
    }

    fn kmax(&self) -> usize {
        self.k0 + self.opts.kmax_offset
    }

    fn solve(&mut self, p: &ConicProblem, stage: Stage, k: usize) -> Result<ConicSolution> {
        if let Some(dir) = &self.opts.dump_dir {
            std::fs::create_dir_all(dir)?;
            let name = format!(
                "{}-{:04}-{}-k{k}.sdp",
                self.kind.as_str().to_lowercase(),
                self.log.len(),
                stage.as_str()
            );
            std::fs::write(dir.join(name), p.dump())?;
        }
        Ok(self.opts.solver.solve(p, &self.opts.solver_options))
    }

    fn record(&mut self, stage: Stage, k: usize, delta: Option<f64>, sol: &ConicSolution, flat: Option<usize>, note: String) {
        self.log.push(StepRecord {
            stage,
            order: k,
            delta,
            status: sol.status,
            value: sol.has_point().then_some(sol.objective),
            flat,
            iterations: sol.metrics.iterations,
            note,
        });
    }

    fn certificate(&self, p: &ConicProblem, sol: &ConicSolution, k: usize) -> Option<Certificate> {
        let report = verify_solution(p, sol, CERT_TOL);
        report.passed().then_some(Certificate { order: k, report })
    }

    fn moments(&self, sol: &ConicSolution, k: usize) -> Result<MomentVector> {
        MomentVector::new(self.a.dim(), k, sol.x.clone())
    }

    /// Extraction, polishing and the residual gate for a minimizing moment vector.
    fn accept(&self, y: &MomentVector, t: usize, k: usize, floor: f64) -> Result<Accept> {
        let seed = self.opts.seed.wrapping_add(self.log.len() as u64);
        let measure = match extract_atoms(y, t, self.opts.rank_tol, seed) {
            Ok(mu) => mu,
            Err(e) => return Ok(Accept::Rejected(e.to_string())),
        };
        let mut pairs: Vec<(f64, Vec<f64>, f64, bool)> = Vec::new();
        for (u, _) in &measure.atoms {
            let lam = rayleigh_value(self.kind, self.a, u)?;
            let mut pol = polish_eigenpair(self.kind, self.a, lam, u)?;
            if !pol.converged {
                pol = refine_singular(self.kind, self.a, lam, u)?;
            }
            snap_zeros(&mut pol.vector);
            pol.residual = eigen_residual(self.kind, self.a, pol.lambda, &pol.vector)?;
            if pol.residual <= self.opts.eps_res {
                let iso = check_isolated(self.kind, self.a, pol.lambda, &pol.vector, self.opts.jac_tol)?;
                pairs.push((pol.lambda, pol.vector, pol.residual, iso == Isolation::Isolated));
            }
        }
        if pairs.is_empty() {
            return Ok(Accept::Rejected(format!(
                "{} atoms, none passes the residual gate",
                measure.atoms.len()
            )));
        }
        // the lowest verified value in range; objectives of inaccurate solves drift
        let lo = floor - self.opts.eps_res * (1.0 + floor.abs());
        pairs.retain(|p| p.0 >= lo);
        if pairs.is_empty() {
            return Ok(Accept::Rejected("no verified atom in range".into()));
        }
        let anchor = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let window = 1e-5 * (1.0 + anchor.abs());
        pairs.retain(|p| (p.0 - anchor).abs() <= window);
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut groups: Vec<Vec<(f64, Vec<f64>, f64, bool)>> = Vec::new();
        for p in pairs {
            match groups.last_mut() {
                Some(g) if p.0 - g[0].0 <= self.opts.eps_dedup => g.push(p),
                _ => groups.push(vec![p]),
            }
        }
        let mut out = Vec::with_capacity(groups.len());
        for g in groups {
            let rep = g.iter().min_by(|p, q| p.2.total_cmp(&q.2)).expect("nonempty group");
            let value = rep.0;
            let mut vectors: Vec<Vec<f64>> = Vec::new();
            let mut residual: f64 = 0.0;
            let mut isolated = true;
            for (_, v, _, iso) in &g {
                let r = eigen_residual(self.kind, self.a, value, v)?;
                if r <= self.opts.eps_res {
                    residual = residual.max(r);
                    isolated &= *iso;
                    push_vector(&mut vectors, v.clone(), self.opts.vector_merge);
                }
            }
            sort_vectors(&mut vectors);
            out.push(Eigenpair {
                kind: self.kind,
                value,
                residual,
                isolated,
                vectors,
                order: k,
            });
        }
        Ok(Accept::Pairs(out))
    }

    fn smallest(&mut self) -> Result<SmallestOutcome> {
        let ineqs = if self.opts.nonneg { vec![self.f.clone()] } else { Vec::new() };
        let floor = if self.opts.nonneg { 0.0 } else { f64::NEG_INFINITY };
        let mut bound = None;
        for k in self.k0..=self.kmax() {
            let p = build_min_relaxation(&self.f, &self.h, &ineqs, k)?;
            let sol = self.solve(&p, Stage::Smallest, k)?;
            match self.resolve_min(&p, &sol, k, floor)? {
                MinStep::Infeasible(cert) => {
                    self.record(Stage::Smallest, k, None, &sol, None, "certified infeasible".into());
                    return Ok(SmallestOutcome::NoRealEigenvalue(cert));
                }
                MinStep::Found(mut pairs, t) => {
                    let pair = pairs.remove(0);
                    self.record(Stage::Smallest, k, None, &sol, Some(t), format!("eigenvalue {:.6}", pair.value));
                    self.pending = pairs;
                    return Ok(SmallestOutcome::Found(pair));
                }
                MinStep::Escalate(flat, note) => {
                    if sol.status == SolveStatus::Optimal {
                        bound = Some(sol.objective);
                    }
                    self.record(Stage::Smallest, k, None, &sol, flat, note);
                }
            }
        }
        Ok(SmallestOutcome::Unresolved(bound))
    }

    fn resolve_min(&self, p: &ConicProblem, sol: &ConicSolution, k: usize, floor: f64) -> Result<MinStep> {
        match sol.status {
            SolveStatus::PrimalInfeasible => Ok(match self.certificate(p, sol, k) {
                Some(c) => MinStep::Infeasible(c),
                None => MinStep::Escalate(None, "infeasibility certificate failed verification".into()),
            }),
            _ if sol.has_point() => {
                let y = self.moments(sol, k)?;
                let Some(t) = flat_truncation(&y, self.k0, k, self.opts.rank_tol) else {
                    return Ok(MinStep::Escalate(None, "not flat".into()));
                };
                Ok(match self.accept(&y, t, k, floor)? {
                    Accept::Pairs(pairs) => MinStep::Found(pairs, t),
                    Accept::Rejected(why) => MinStep::Escalate(Some(t), why),
                })
            }
            s => Ok(MinStep::Escalate(None, format!("solver status {}", s.as_str()))),
        }
    }

    /// `nu_i = lambda_i` test; `None` when no order settles it.
    fn backward_passes(&mut self, lambda: f64, delta: f64) -> Result<Option<bool>> {
        let bound = Polynomial::constant(self.a.dim(), lambda + delta).sub(&self.f)?;
        let tol = self.opts.eps_eq.min(0.5 * delta);
        let mut within = false;
        for k in self.k0..=self.kmax() {
            let p = build_max_relaxation(&self.f, &self.h, std::slice::from_ref(&bound), k)?;
            let sol = self.solve(&p, Stage::Backward, k)?;
            if !sol.has_point() {
                let note = format!("solver status {}", sol.status.as_str());
                self.record(Stage::Backward, k, Some(delta), &sol, None, note);
                continue;
            }
            let nu = sol.objective;
            if nu - lambda <= self.opts.eps_dedup {
                self.record(Stage::Backward, k, Some(delta), &sol, None, format!("nu {nu:.8} matches"));
                return Ok(Some(true));
            }
            if nu - lambda <= tol {
                match self.eigenvalue_above(&sol, k, lambda, delta)? {
                    Above::Eigenvalue(mu) => {
                        self.above = Some(mu);
                        let note = format!("nu {nu:.8} is the eigenvalue {mu:.8}");
                        self.record(Stage::Backward, k, Some(delta), &sol, None, note);
                        return Ok(Some(false));
                    }
                    Above::None => {
                        self.record(Stage::Backward, k, Some(delta), &sol, None, format!("nu {nu:.8} matches"));
                        return Ok(Some(true));
                    }
                    Above::Unresolved => {
                        within = true;
                        self.record(Stage::Backward, k, Some(delta), &sol, None, format!("nu {nu:.8} within tolerance, unresolved"));
                        continue;
                    }
                }
            }
            if sol.status != SolveStatus::Optimal {
                self.record(Stage::Backward, k, Some(delta), &sol, None, format!("nu {nu:.8} inaccurate"));
                continue;
            }
            let y = self.moments(&sol, k)?;
            let flat = flat_truncation(&y, self.k0, k, self.opts.rank_tol);
            self.record(Stage::Backward, k, Some(delta), &sol, flat, format!("nu {nu:.8} above"));
            if flat.is_some() {
                return Ok(Some(false));
            }
        }
        // no order resolved it; the tolerance test decides unless a value is known to sit there
        let slack = self.opts.eps_res * (1.0 + lambda.abs());
        let known = self.above.is_some_and(|mu| mu <= lambda + delta + slack);
        Ok((within && !known).then_some(true))
    }

    /// A verified eigenvalue in `(lambda + eps_dedup, lambda + delta]` read off a backward solution.
    fn eigenvalue_above(&self, sol: &ConicSolution, k: usize, lambda: f64, delta: f64) -> Result<Above> {
        let y = self.moments(sol, k)?;
        let Some(t) = flat_truncation(&y, self.k0, k, self.opts.rank_tol) else {
            return Ok(Above::Unresolved);
        };
        let Accept::Pairs(pairs) = self.accept(&y, t, k, lambda + self.opts.eps_dedup)? else {
            return Ok(Above::Unresolved);
        };
        let slack = self.opts.eps_res * (1.0 + lambda.abs());
        Ok(pairs
            .iter()
            .map(|p| p.value)
            .find(|&v| v - lambda > self.opts.eps_dedup && v <= lambda + delta + slack)
            .map_or(Above::None, Above::Eigenvalue))
    }

    fn next(&mut self, lambda: f64, delta0: f64) -> Result<NextOutcome> {
        let mut delta = delta0;
        self.above = None;
        loop {
            if delta < self.opts.delta_min {
                return Ok(NextOutcome::NonIsolatedSuspected);
            }
            match self.backward_passes(lambda, delta)? {
                Some(true) => break,
                _ => delta /= self.opts.shrink,
            }
        }
        let shifted = self
            .f
            .sub(&Polynomial::constant(self.a.dim(), lambda + delta))?;
        let mut bound = None;
        for k in self.k0..=self.kmax() {
            let p = build_min_relaxation(&self.f, &self.h, std::slice::from_ref(&shifted), k)?;
            let sol = self.solve(&p, Stage::Shifted, k)?;
            match self.resolve_min(&p, &sol, k, lambda + delta)? {
                MinStep::Infeasible(cert) => {
                    self.record(Stage::Shifted, k, Some(delta), &sol, None, "certified infeasible".into());
                    return Ok(NextOutcome::NoMore(cert));
                }
                MinStep::Found(mut pairs, t) => {
                    let pair = pairs.remove(0);
                    let note = format!("eigenvalue {:.6}", pair.value);
                    self.record(Stage::Shifted, k, Some(delta), &sol, Some(t), note);
                    self.pending = pairs;
                    return Ok(NextOutcome::Found(pair, delta));
                }
                MinStep::Escalate(flat, note) => {
                    if sol.status == SolveStatus::Optimal {
                        bound = Some(sol.objective);
                    }
                    self.record(Stage::Shifted, k, Some(delta), &sol, flat, note);
                }
            }
        }
        Ok(NextOutcome::Unresolved(bound))
    }

    fn finish(self, eigenpairs: Vec<Eigenpair>, termination: Termination, certificate: Option<Certificate>) -> Result<Spectrum> {
        let termination = if termination == Termination::CertifiedComplete && eigenpairs.iter().any(|e| !e.isolated) {
            Termination::ContinuumSuspected
        } else {
            termination
        };
        if self.kind == EigKind::H {
            let bound = h_count_bound(self.a.order(), self.a.dim());
            if eigenpairs.len() as u128 > bound {
                return Err(Error::Internal(format!(
                    "{} H-eigenvalues exceed the bound {bound}",
                    eigenpairs.len()
                )));
            }
        }
        Ok(Spectrum {
            kind: self.kind,
            eigenpairs,
            termination,
            certificate,
            log: self.log,
        })
    }
}

/// Certificate checks use this tolerance on the normalized Farkas conditions.
pub const CERT_TOL: f64 = 1e-6;

enum Above {
    Eigenvalue(f64),
    None,
    Unresolved,
}

enum MinStep {
    Infeasible(Certificate),
    Found(Vec<Eigenpair>, usize),
    Escalate(Option<usize>, String),
}

/// Clears coordinates that are zero up to rounding.
fn snap_zeros(v: &mut [f64]) {
    for x in v.iter_mut() {
        if x.abs() < 1e-14 {
            *x = 0.0;
        }
    }
}

fn vec_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn push_vector(vs: &mut Vec<Vec<f64>>, v: Vec<f64>, tol: f64) {
    if !vs.iter().any(|w| vec_dist(w, &v) <= tol) {
        vs.push(v);
    }
}

fn sort_vectors(vs: &mut [Vec<f64>]) {
    vs.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| y.total_cmp(x))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Smallest real eigenvalue, or a certificate that there is none.
pub fn smallest_eigenvalue(kind: EigKind, a: &Tensor, opts: &SweepOptions) -> Result<SmallestOutcome> {
    Sweep::new(kind, a, opts)?.smallest()
}

/// The eigenvalue following the certified eigenvalue `lambda`.
pub fn next_eigenvalue(kind: EigKind, a: &Tensor, lambda: f64, delta: f64, opts: &SweepOptions) -> Result<NextOutcome> {
    Sweep::new(kind, a, opts)?.next(lambda, delta)
}

/// All real eigenvalues of the given kind, in increasing order.
pub fn full_sweep(kind: EigKind, a: &Tensor, opts: &SweepOptions) -> Result<Spectrum> {
    let mut sw = Sweep::new(kind, a, opts)?;
    let first = match sw.smallest()? {
        SmallestOutcome::NoRealEigenvalue(cert) => {
            return sw.finish(Vec::new(), Termination::CertifiedComplete, Some(cert));
        }
        SmallestOutcome::Unresolved(_) => return sw.finish(Vec::new(), Termination::Budget, None),
        SmallestOutcome::Found(p) => p,
    };
    let mut pairs = vec![first];
    pairs.append(&mut sw.pending);
    let bound = h_count_bound(a.order(), a.dim());
    loop {
        let last = pairs.last().expect("at least one eigenvalue").value;
        match sw.next(last, opts.delta0)? {
            NextOutcome::NoMore(cert) => {
                return sw.finish(pairs, Termination::CertifiedComplete, Some(cert));
            }
            NextOutcome::NonIsolatedSuspected => {
                return sw.finish(pairs, Termination::ContinuumSuspected, None);
            }
            NextOutcome::Unresolved(_) => return sw.finish(pairs, Termination::Budget, None),
            NextOutcome::Found(p, _) => {
                let mut found = vec![p];
                found.append(&mut sw.pending);
                for p in found {
                    merge_into(kind, a, opts, &mut pairs, p)?;
                }
                if kind == EigKind::H && pairs.len() as u128 > bound {
                    return sw.finish(pairs, Termination::Budget, None);
                }
            }
        }
    }
}

/// Appends `p`, or folds it into the last pair when the values coincide.
fn merge_into(kind: EigKind, a: &Tensor, opts: &SweepOptions, pairs: &mut Vec<Eigenpair>, p: Eigenpair) -> Result<()> {
    let prev = pairs.last_mut().expect("at least one eigenvalue");
    if (p.value - prev.value).abs() > opts.eps_dedup {
        pairs.push(p);
        return Ok(());
    }
    for v in p.vectors {
        let r = eigen_residual(kind, a, prev.value, &v)?;
        if r <= opts.eps_res {
            prev.residual = prev.residual.max(r);
            push_vector(&mut prev.vectors, v, opts.vector_merge);
        }
    }
    sort_vectors(&mut prev.vectors);
    prev.isolated &= p.isolated;
    Ok(())
}
