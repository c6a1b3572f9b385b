//! Sparse multivariate polynomials and the graded lexicographic monomial order.
//!
//! Monomials of `n` variables with total degree at most `d` are numbered
//! degree-major, and lexicographically with `x1 > x2 > ...` inside each
//! degree: `1, x1, ..., xn, x1^2, x1 x2, ..., xn^2, ...`. Every moment vector
//! and moment matrix in the crate is indexed through this numbering.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Coefficients smaller than this are dropped after arithmetic.
pub const COEFF_DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

/// `binomial(a, b)` for the small arguments used here.
pub fn binomial(a: usize, b: usize) -> usize {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut r: u128 = 1;
    for i in 0..b {
        r = r * (a - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// Number of monomials in `n` variables of total degree at most `d`.
pub fn basis_size(n: usize, d: usize) -> usize {
    binomial(n + d, d)
}

/// Number of monomials in `n` variables of total degree exactly `d`.
fn count_exact(n: usize, d: usize) -> usize {
    if n == 0 {
        return usize::from(d == 0);
    }
    binomial(d + n - 1, n - 1)
}

/// Position of a monomial in the graded lexicographic order.
pub fn monomial_rank(alpha: &Monomial) -> usize {
    let n = alpha.nvars();
    let d = alpha.degree();
    if n == 0 {
        return 0;
    }
    let mut rank = basis_size(n, d) - count_exact(n, d);
    let mut remaining = d;
    for (i, &e) in alpha.exponents().iter().enumerate().take(n - 1) {
        let e = e as usize;
        // monomials whose i-th exponent is larger come first
        for v in (e + 1)..=remaining {
            rank += count_exact(n - i - 1, remaining - v);
        }
        remaining -= e;
    }
    rank
}

/// Inverse of [`monomial_rank`] restricted to degree at most `d`.
pub fn monomial_unrank(n: usize, d: usize, rank: usize) -> Result<Monomial> {
    let total = basis_size(n, d);
    if rank >= total {
        return Err(Error::invalid(format!(
            "rank {rank} out of range for n = {n}, d = {d} (size {total})"
        )));
    }
    let mut deg = 0;
    while basis_size(n, deg) <= rank {
        deg += 1;
    }
    let mut r = rank - (basis_size(n, deg) - count_exact(n, deg));
    let mut exps = vec![0u32; n];
    let mut remaining = deg;
    for i in 0..n.saturating_sub(1) {
        let mut v = remaining;
        loop {
            let block = count_exact(n - i - 1, remaining - v);
            if r < block {
                break;
            }
            r -= block;
            v -= 1;
        }
        exps[i] = v as u32;
        remaining -= v;
    }
    if n > 0 {
        exps[n - 1] = remaining as u32;
    }
    Ok(Monomial(exps))
}

/// All monomials of degree at most `d`, in graded lexicographic order.
pub fn monomials_up_to(n: usize, d: usize) -> Vec<Monomial> {
    let mut out = Vec::with_capacity(basis_size(n, d));
    for deg in 0..=d {
        let mut cur = vec![0u32; n];
        push_degree(&mut out, &mut cur, 0, deg);
    }
    out
}

fn push_degree(out: &mut Vec<Monomial>, cur: &mut Vec<u32>, i: usize, remaining: usize) {
    let n = cur.len();
    if i + 1 == n {
        cur[i] = remaining as u32;
        out.push(Monomial(cur.clone()));
        cur[i] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        cur[i] = v as u32;
        push_degree(out, cur, i + 1, remaining - v);
    }
    cur[i] = 0;
}

/// The monomial vector `[x]_d` evaluated at a point.
pub fn monomial_vector(x: &[f64], d: usize) -> Vec<f64> {
    monomials_up_to(x.len(), d).iter().map(|m| m.eval(x)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Polynomial::from_terms(n, [(Monomial::one(n), c)]).expect("constant term is well formed")
    }

    /// The coordinate polynomial `x_i` (0-based).
    pub fn var(n: usize, i: usize) -> Self {
        Polynomial::from_terms(n, [(Monomial::var(n, i), 1.0)]).expect("variable is well formed")
    }

    pub fn monomial(alpha: Monomial, c: f64) -> Self {
        let n = alpha.nvars();
        Polynomial::from_terms(n, [(alpha, c)]).expect("single term is well formed")
    }

    /// Sums repeated monomials and drops negligible coefficients.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if m.nvars() != n {
                return Err(Error::invalid(format!(
                    "monomial has {} variables, polynomial has {n}",
                    m.nvars()
                )));
            }
            *map.entry(m).or_insert(0.0) += c;
        }
        let mut p = Polynomial { n, terms: map };
        p.cleanup();
        Ok(p)
    }

    fn cleanup(&mut self) {
        self.terms.retain(|_, c| c.abs() >= COEFF_DROP_TOL);
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn coeff(&self, alpha: &Monomial) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    fn check_same(&self, other: &Polynomial) -> Result<()> {
        if self.n != other.n {
            return Err(Error::invalid(format!(
                "polynomials in {} and {} variables",
                self.n, other.n
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            *out.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        out.cleanup();
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let mut out = Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        };
        out.cleanup();
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same(other)?;
        let mut map: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                *map.entry(a.mul(b)).or_insert(0.0) += ca * cb;
            }
        }
        let mut out = Polynomial {
            n: self.n,
            terms: map,
        };
        out.cleanup();
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.n, 1.0);
        for _ in 0..e {
            out = out.mul(self).expect("same variable count");
        }
        out
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "point has {} coordinates, polynomial has {} variables",
                x.len(),
                self.n
            )));
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(x)).sum())
    }

    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut map = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut d = m.0.clone();
            d[i] -= 1;
            *map.entry(Monomial(d)).or_insert(0.0) += c * e as f64;
        }
        let mut out = Polynomial {
            n: self.n,
            terms: map,
        };
        out.cleanup();
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n).map(|i| self.derivative(i)).collect()
    }

    /// Largest absolute coefficient.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut sorted: Vec<_> = self.terms.iter().collect();
        sorted.sort_by_key(|(m, _)| monomial_rank(m));
        for (k, (m, c)) in sorted.into_iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            write!(f, "{}", c.abs())?;
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

/// `A x^m` as a polynomial of degree `m`.
pub fn tensor_to_poly(a: &Tensor) -> Polynomial {
    let n = a.dim();
    let terms = a.nonzeros().map(|(idx, v)| (index_monomial(n, &idx), v));
    Polynomial::from_terms(n, terms).expect("exponent vectors have length n")
}

/// The `n` polynomials of `A x^{m-1}`, each of degree `m - 1`.
pub fn tensor_to_poly_vector(a: &Tensor) -> Vec<Polynomial> {
    let n = a.dim();
    let mut rows: Vec<Vec<(Monomial, f64)>> = vec![Vec::new(); n];
    for (idx, v) in a.nonzeros() {
        rows[idx[0]].push((index_monomial(n, &idx[1..]), v));
    }
    rows.into_iter()
        .map(|t| Polynomial::from_terms(n, t).expect("exponent vectors have length n"))
        .collect()
}

fn index_monomial(n: usize, idx: &[usize]) -> Monomial {
    let mut e = vec![0u32; n];
    for &i in idx {
        e[i] += 1;
    }
    Monomial(e)
}
