//! Dense cubical tensors of order `m` and dimension `n`.
//!
//! Storage is row-major with the last index fastest. External indices (file
//! format, [`Tensor::from_fn`]) are 1-based; everything else is 0-based.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl Tensor {
    pub fn new(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid(format!("tensor order must be >= 2, got {order}")));
        }
        if dim < 1 {
            return Err(Error::invalid("tensor dimension must be >= 1"));
        }
        let len = checked_len(order, dim)?;
        if entries.len() != len {
            return Err(Error::invalid(format!(
                "expected {len} entries for order {order}, dimension {dim}; got {}",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("entry {pos} is not finite")));
        }
        Ok(Tensor {
            order,
            dim,
            entries,
        })
    }

    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        let len = checked_len(order.max(2), dim.max(1))?;
        Tensor::new(order, dim, vec![0.0; len])
    }

    /// Builds a tensor from a function of the 1-based index tuple.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = checked_len(order.max(2), dim.max(1))?;
        let mut idx = vec![1usize; order];
        let mut entries = Vec::with_capacity(len);
        for _ in 0..len {
            entries.push(f(&idx));
            for slot in idx.iter_mut().rev() {
                if *slot < dim {
                    *slot += 1;
                    break;
                }
                *slot = 1;
            }
        }
        Tensor::new(order, dim, entries)
    }

    /// Builds a tensor from 1-based `(index tuple, value)` pairs; other entries are zero.
    pub fn from_sparse(order: usize, dim: usize, items: &[(&[usize], f64)]) -> Result<Self> {
        let mut t = Tensor::zeros(order, dim)?;
        for (idx, v) in items {
            if idx.len() != order || idx.iter().any(|&i| i < 1 || i > dim) {
                return Err(Error::invalid(format!("bad index {idx:?}")));
            }
            let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
            let off = t.offset(&zero_based);
            t.entries[off] = *v;
        }
        Tensor::new(order, dim, t.entries)
    }

    /// The identity tensor: ones on the superdiagonal `(i, i, ..., i)`.
    pub fn identity(order: usize, dim: usize) -> Result<Self> {
        Tensor::from_fn(order, dim, |idx| {
            if idx.iter().all(|&i| i == idx[0]) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry at a 0-based index tuple.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.offset(idx)]
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    /// Iterates over nonzero entries as (0-based index tuple, value).
    pub fn nonzeros(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(off, v)| (self.unravel(off), *v))
    }

    fn unravel(&self, mut off: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order];
        for slot in idx.iter_mut().rev() {
            *slot = off % self.dim;
            off /= self.dim;
        }
        idx
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector length {} does not match tensor dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// The vector `A x^{m-1}`: all indices but the first contracted with `x`.
    pub fn contract_partial(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let n = self.dim;
        let mut cur = self.entries.clone();
        while cur.len() > n {
            cur = cur
                .chunks_exact(n)
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect();
        }
        Ok(cur)
    }

    /// The scalar `A x^m`.
    pub fn contract_full(&self, x: &[f64]) -> Result<f64> {
        let v = self.contract_partial(x)?;
        Ok(v.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// Jacobian of `x -> A x^{m-1}`, row-major `n x n`.
    pub fn partial_jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let n = self.dim;
        let m = self.order;
        let mut jac = vec![0.0; n * n];
        for (idx, a) in self.nonzeros() {
            // d/dx_l of a * x_{i2} ... x_{im}
            for p in 1..m {
                let mut prod = a;
                for (q, &i) in idx.iter().enumerate().skip(1) {
                    if q != p {
                        prod *= x[i];
                    }
                }
                jac[idx[0] * n + idx[p]] += prod;
            }
        }
        Ok(jac)
    }

    /// Parses the text tensor format (see [`Tensor::to_text`]).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header \"m n [dense|sparse]\""))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(hline, "malformed header, expected \"m n [dense|sparse]\""));
        }
        let order: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(hline, format!("invalid order '{}'", fields[0])))?;
        let dim: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(hline, format!("invalid dimension '{}'", fields[1])))?;
        if order < 2 || dim < 1 {
            return Err(Error::parse(hline, "order must be >= 2 and dimension >= 1"));
        }
        let dense = match fields.get(2).copied() {
            None | Some("sparse") => false,
            Some("dense") => true,
            Some(other) => {
                return Err(Error::parse(hline, format!("unknown storage '{other}'")));
            }
        };
        let len = checked_len(order, dim).map_err(|e| Error::parse(hline, e.to_string()))?;
        let mut entries = vec![0.0; len];

        if dense {
            let mut filled = 0usize;
            let mut last_line = hline;
            for (ln, line) in lines {
                last_line = ln;
                for tok in line.split_whitespace() {
                    let v = parse_value(tok, ln)?;
                    if filled >= len {
                        return Err(Error::parse(ln, format!("more than {len} values")));
                    }
                    entries[filled] = v;
                    filled += 1;
                }
            }
            if filled != len {
                return Err(Error::parse(
                    last_line,
                    format!("expected {len} values, found {filled}"),
                ));
            }
        } else {
            let mut seen = vec![false; len];
            for (ln, line) in lines {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != order + 1 {
                    return Err(Error::parse(
                        ln,
                        format!("expected {} indices and a value", order),
                    ));
                }
                let mut off = 0usize;
                for tok in &toks[..order] {
                    let i: usize = tok
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("invalid index '{tok}'")))?;
                    if i < 1 || i > dim {
                        return Err(Error::parse(ln, format!("index out of range: {i}")));
                    }
                    off = off * dim + (i - 1);
                }
                if seen[off] {
                    return Err(Error::parse(ln, "duplicate entry"));
                }
                seen[off] = true;
                entries[off] = parse_value(toks[order], ln)?;
            }
        }
        Tensor::new(order, dim, entries)
    }

    /// Sparse text form: header line, then one `i1 .. im value` line per nonzero.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} sparse\n", self.order, self.dim);
        for (idx, v) in self.nonzeros() {
            for i in idx {
                let _ = write!(out, "{} ", i + 1);
            }
            let _ = writeln!(out, "{v:?}");
        }
        out
    }

    /// Dense text form, one row of `n` values per line.
    pub fn to_dense_text(&self) -> String {
        let mut out = format!("{} {} dense\n", self.order, self.dim);
        for row in self.entries.chunks(self.dim) {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("non-numeric value '{tok}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value '{tok}'")));
    }
    Ok(v)
}

fn checked_len(order: usize, dim: usize) -> Result<usize> {
    let mut len = 1usize;
    for _ in 0..order {
        len = len
            .checked_mul(dim)
            .filter(|&l| l <= 1 << 26)
            .ok_or_else(|| Error::invalid("tensor too large"))?;
    }
    Ok(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex51() -> Tensor {
        Tensor::from_sparse(
            4,
            2,
            &[
                (&[1, 1, 1, 1], 25.1),
                (&[1, 2, 1, 2], 25.6),
                (&[2, 1, 2, 1], 24.8),
                (&[2, 2, 2, 2], 23.0),
            ],
        )
        .unwrap()
    }

    fn ex13() -> Tensor {
        Tensor::from_sparse(
            4,
            2,
            &[
                (&[1, 1, 1, 2], 1.0),
                (&[1, 2, 2, 2], 1.0),
                (&[2, 1, 1, 1], -1.0),
                (&[2, 1, 2, 2], -1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_contractions() {
        let id = Tensor::identity(3, 2).unwrap();
        let (a, b) = (0.7, -1.3);
        assert!((id.contract_full(&[a, b]).unwrap() - (a * a * a + b * b * b)).abs() < 1e-14);
        let v = id.contract_partial(&[a, b]).unwrap();
        assert!((v[0] - a * a).abs() < 1e-14 && (v[1] - b * b).abs() < 1e-14);
        let nz: Vec<_> = id.nonzeros().map(|(i, _)| i).collect();
        assert_eq!(nz, vec![vec![0, 0, 0], vec![1, 1, 1]]);

        let mat = Tensor::identity(2, 3).unwrap();
        assert_eq!(
            mat.entries(),
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn example_contractions() {
        assert_eq!(ex51().contract_full(&[1.0, 0.0]).unwrap(), 25.1);
        assert_eq!(ex13().contract_full(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ex13().contract_partial(&[1.0, 0.0]).unwrap(), vec![0.0, -1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let err = ex51().contract_full(&[1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn partial_jacobian_matches_finite_differences() {
        let t = Tensor::from_fn(3, 3, |i| ((i[0] * 7 + i[1] * 3 + i[2]) as f64).sin()).unwrap();
        let x = [0.3, -0.8, 0.5];
        let jac = t.partial_jacobian(&x).unwrap();
        let h = 1e-6;
        for l in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[l] += h;
            xm[l] -= h;
            let fp = t.contract_partial(&xp).unwrap();
            let fm = t.contract_partial(&xm).unwrap();
            for j in 0..3 {
                let fd = (fp[j] - fm[j]) / (2.0 * h);
                assert!((fd - jac[j * 3 + l]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn parse_sparse_example() {
        let text = "# Example tensor\n4 2 sparse\n1 1 1 1 25.1\n1 2 1 2 25.6\n2 1 2 1 24.8\n2 2 2 2 23\n";
        let t = Tensor::parse(text).unwrap();
        assert_eq!(t, ex51());
        assert_eq!(t.nonzeros().count(), 4);
    }

    #[test]
    fn parse_dense_equals_sparse() {
        let t = ex51();
        let dense = Tensor::parse(&t.to_dense_text()).unwrap();
        assert_eq!(dense, t);
        let header_only = "4 2\n1 1 1 1 25.1\n1 2 1 2 25.6\n2 1 2 1 24.8\n2 2 2 2 23\n";
        assert_eq!(Tensor::parse(header_only).unwrap(), t);
    }

    #[test]
    fn parse_errors_name_lines() {
        let err = Tensor::parse("4 2 sparse\n1 3 1 1 5.0\n").unwrap_err();
        assert_eq!(err, Error::parse(2, "index out of range: 3"));
        assert!(err.to_string().contains("index out of range"));

        let err = Tensor::parse("4 2\n1 1 1 1 1.0\n1 1 1 1 2.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));

        let err = Tensor::parse("4 2\n1 1 1 1 abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));

        let err = Tensor::parse("four 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let err = Tensor::parse("2 2 dense\n1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));

        let err = Tensor::parse("# only comments\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn text_round_trip_is_idempotent() {
        let t = Tensor::from_fn(3, 3, |i| ((i[0] + 2 * i[1] + 3 * i[2]) as f64).tan()).unwrap();
        let once = t.to_text();
        let parsed = Tensor::parse(&once).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.to_text(), once);
    }
}
