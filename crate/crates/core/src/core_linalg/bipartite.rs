//! Bipartite operators and their JSON wire format.

use super::matrix::{c, unitary_deviation, zeros, CMatrix, C64};
use crate::error::{Error, Result};
use serde_json::Value;

/// A square operator on `H_A ⊗ H_B` with the composite index convention
/// `i = a*dB + b`, zero-based and A-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteOp {
    pub d_a: usize,
    pub d_b: usize,
    pub matrix: CMatrix,
}

impl BipartiteOp {
    pub fn new(d_a: usize, d_b: usize, matrix: CMatrix) -> Result<Self> {
        let d = d_a * d_b;
        if d == 0 || matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, expected {d}x{d} for dA={d_a}, dB={d_b}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadInput("matrix contains non-finite entries".into()));
        }
        Ok(Self { d_a, d_b, matrix })
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.d_b
    }

    /// Composite index of `|a⟩_A |b⟩_B`.
    pub fn idx(&self, a: usize, b: usize) -> usize {
        a * self.d_b + b
    }

    /// The `dB×dB` block `⟨y|_A U |x⟩_A`.
    pub fn block(&self, y: usize, x: usize) -> CMatrix {
        let mut m = zeros(self.d_b, self.d_b);
        for r in 0..self.d_b {
            for cc in 0..self.d_b {
                m[(r, cc)] = self.matrix[(self.idx(y, r), self.idx(x, cc))];
            }
        }
        m
    }

    pub fn block_norm(&self, y: usize, x: usize) -> f64 {
        let mut s = 0.0;
        for r in 0..self.d_b {
            for cc in 0..self.d_b {
                s += self.matrix[(self.idx(y, r), self.idx(x, cc))].norm_sqr();
            }
        }
        s.sqrt()
    }

    /// The operator with the roles of A and B exchanged (conjugation by SWAP).
    pub fn swap_sides(&self) -> BipartiteOp {
        let d = self.dim();
        let mut m = zeros(d, d);
        for a in 0..self.d_a {
            for b in 0..self.d_b {
                for a2 in 0..self.d_a {
                    for b2 in 0..self.d_b {
                        m[(b * self.d_a + a, b2 * self.d_a + a2)] =
                            self.matrix[(self.idx(a, b), self.idx(a2, b2))];
                    }
                }
            }
        }
        BipartiteOp { d_a: self.d_b, d_b: self.d_a, matrix: m }
    }

    /// Partial transpose on the B factor.
    pub fn partial_transpose_b(&self) -> BipartiteOp {
        let d = self.dim();
        let mut m = zeros(d, d);
        for a in 0..self.d_a {
            for b in 0..self.d_b {
                for a2 in 0..self.d_a {
                    for b2 in 0..self.d_b {
                        m[(self.idx(a, b2), self.idx(a2, b))] =
                            self.matrix[(self.idx(a, b), self.idx(a2, b2))];
                    }
                }
            }
        }
        BipartiteOp { d_a: self.d_a, d_b: self.d_b, matrix: m }
    }

    pub fn unitary_deviation(&self) -> f64 {
        unitary_deviation(&self.matrix)
    }

    pub fn check_unitary(&self, tol: f64) -> Result<()> {
        let dev = self.unitary_deviation();
        if dev > tol * (self.dim() as f64).sqrt() {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Ok(())
    }

    /// True when every entry is 0 or 1 (to `tol`) and the matrix is a
    /// permutation of the basis.
    pub fn is_permutation(&self, tol: f64) -> bool {
        self.is_complex_permutation(tol)
            && self
                .matrix
                .iter()
                .all(|z| z.norm() <= tol || ((z.re - 1.0).abs() <= tol && z.im.abs() <= tol))
    }

    /// True when there is exactly one nonzero (unimodular) entry in each row
    /// and column.
    pub fn is_complex_permutation(&self, tol: f64) -> bool {
        let d = self.dim();
        let mut col_seen = vec![false; d];
        for r in 0..d {
            let mut found = 0usize;
            for cc in 0..d {
                let z = self.matrix[(r, cc)];
                if z.norm() > tol {
                    if (z.norm() - 1.0).abs() > 100.0 * tol {
                        return false;
                    }
                    if col_seen[cc] {
                        return false;
                    }
                    col_seen[cc] = true;
                    found += 1;
                }
            }
            if found != 1 {
                return false;
            }
        }
        col_seen.iter().all(|&x| x)
    }

    /// For a (complex) permutation unitary: the column index and phase of the
    /// single nonzero entry in row `r`.
    pub fn perm_image(&self, tol: f64) -> Option<Vec<(usize, C64)>> {
        if !self.is_complex_permutation(tol) {
            return None;
        }
        let d = self.dim();
        let mut out = vec![(0usize, c(0.0, 0.0)); d];
        for cc in 0..d {
            for r in 0..d {
                let z = self.matrix[(r, cc)];
                if z.norm() > tol {
                    out[cc] = (r, z);
                }
            }
        }
        Some(out)
    }

    // ---- JSON wire format -------------------------------------------------

    /// Parses the dense `{"dA","dB","matrix"}` or sparse `{"dA","dB","perm"}`
    /// format.
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Parse("expected a JSON object".into()))?;
        let d_a = obj
            .get("dA")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing integer field \"dA\"".into()))? as usize;
        let d_b = obj
            .get("dB")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing integer field \"dB\"".into()))? as usize;
        let d = d_a * d_b;
        if let Some(rows) = obj.get("matrix") {
            let rows = rows.as_array().ok_or_else(|| Error::Parse("\"matrix\" must be an array".into()))?;
            if rows.len() != d {
                return Err(Error::Parse(format!("\"matrix\" has {} rows, expected {d}", rows.len())));
            }
            let mut m = zeros(d, d);
            for (i, row) in rows.iter().enumerate() {
                let row = row
                    .as_array()
                    .ok_or_else(|| Error::Parse(format!("matrix row {i} is not an array")))?;
                if row.len() != d {
                    return Err(Error::Parse(format!("matrix row {i} has {} entries, expected {d}", row.len())));
                }
                for (j, e) in row.iter().enumerate() {
                    m[(i, j)] = parse_complex(e)
                        .ok_or_else(|| Error::Parse(format!("matrix entry ({i},{j}) is not [re,im]")))?;
                }
            }
            Self::new(d_a, d_b, m)
        } else if let Some(perm) = obj.get("perm") {
            let entries = perm.as_array().ok_or_else(|| Error::Parse("\"perm\" must be an array".into()))?;
            let mut m = zeros(d, d);
            for (k, e) in entries.iter().enumerate() {
                let eo = e
                    .as_object()
                    .ok_or_else(|| Error::Parse(format!("perm entry {k} is not an object")))?;
                let col = eo
                    .get("col")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Parse(format!("perm entry {k}: missing \"col\"")))? as usize;
                let row = eo
                    .get("row")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::Parse(format!("perm entry {k}: missing \"row\"")))? as usize;
                if col >= d || row >= d {
                    return Err(Error::Parse(format!("perm entry {k}: index out of range")));
                }
                let phase = match eo.get("phase") {
                    None => c(1.0, 0.0),
                    Some(p) => parse_complex(p)
                        .ok_or_else(|| Error::Parse(format!("perm entry {k}: \"phase\" is not [re,im]")))?,
                };
                m[(row, col)] = phase;
            }
            Self::new(d_a, d_b, m)
        } else {
            Err(Error::Parse("expected a \"matrix\" or \"perm\" field".into()))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn to_json(&self) -> Value {
        let d = self.dim();
        let rows: Vec<Value> = (0..d)
            .map(|i| {
                Value::Array(
                    (0..d)
                        .map(|j| {
                            let z = self.matrix[(i, j)];
                            Value::Array(vec![json_f64(z.re), json_f64(z.im)])
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({ "dA": self.d_a, "dB": self.d_b, "matrix": rows })
    }

    /// Sparse serialization; only valid for complex permutation matrices.
    pub fn to_json_sparse(&self, tol: f64) -> Result<Value> {
        let images = self.perm_image(tol).ok_or(Error::NotPermutation)?;
        let entries: Vec<Value> = images
            .iter()
            .enumerate()
            .map(|(col, (row, phase))| {
                if (phase - c(1.0, 0.0)).norm() <= tol {
                    serde_json::json!({ "col": col, "row": row })
                } else {
                    serde_json::json!({ "col": col, "row": row, "phase": [json_f64(phase.re), json_f64(phase.im)] })
                }
            })
            .collect();
        Ok(serde_json::json!({ "dA": self.d_a, "dB": self.d_b, "perm": entries }))
    }
}

fn json_f64(x: f64) -> Value {
    Value::from(x)
}

fn parse_complex(v: &Value) -> Option<C64> {
    let arr = v.as_array()?;
    if arr.len() != 2 {
        return None;
    }
    Some(c(arr[0].as_f64()?, arr[1].as_f64()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::fixtures;

    #[test]
    fn json_round_trip_dense_and_sparse() {
        let u = fixtures::cnot();
        let dense = BipartiteOp::from_json(&u.to_json()).unwrap();
        assert!((u.matrix.clone() - dense.matrix).norm() < 1e-12);
        let sparse = BipartiteOp::from_json(&u.to_json_sparse(1e-9).unwrap()).unwrap();
        assert!((u.matrix.clone() - sparse.matrix).norm() < 1e-12);
    }

    #[test]
    fn swap_sides_involutive() {
        let u = fixtures::example4();
        let back = u.swap_sides().swap_sides();
        assert!((u.matrix - back.matrix).norm() < 1e-12);
    }

    #[test]
    fn permutation_flags() {
        let u = fixtures::swap2();
        assert!(u.is_permutation(1e-9));
        let mut m = u.matrix.clone();
        m *= c(0.0, 1.0);
        let v = BipartiteOp::new(2, 2, m).unwrap();
        assert!(!v.is_permutation(1e-9));
        assert!(v.is_complex_permutation(1e-9));
    }
}
