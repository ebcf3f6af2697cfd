//! Dense multilinear operations `V^{⊗n} → V` on a finite-dimensional real
//! space, the carrier of the endomorphism operad.
//!
//! An operation of dimension `d` and arity `n` stores `d^(n+1)` coefficients
//! `f^i_{j1…jn}`. The flat layout is row-major with the output index most
//! significant: `((i·d + j1)·d + j2)·d + …`, all indices zero-based. Display
//! labels such as `mu_112` use one-based indices in the same order.
//!
//! Arity 0 (constants `C^0`) is not representable; every operation has at
//! least one input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Dimension("vector must have dim >= 1".into()));
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("vector entry {pos} is not finite")));
        }
        Ok(Self(entries))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        Self(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.0
    }

    pub fn axpby(a: f64, x: &Vector, b: f64, y: &Vector) -> Result<Vector> {
        if x.dim() != y.dim() {
            return Err(Error::Dimension(format!(
                "vector dims {} and {} differ",
                x.dim(),
                y.dim()
            )));
        }
        Ok(Vector(
            x.0.iter().zip(&y.0).map(|(u, v)| a * u + b * v).collect(),
        ))
    }
}

/// A multilinear map `V^{⊗arity} → V` with `dim V = dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperation", into = "RawOperation")]
pub struct Operation {
    dim: usize,
    arity: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperation {
    dim: usize,
    arity: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<RawOperation> for Operation {
    type Error = Error;

    fn try_from(raw: RawOperation) -> Result<Self> {
        Operation::new(raw.dim, raw.arity, raw.coeffs)
    }
}

impl From<Operation> for RawOperation {
    fn from(op: Operation) -> Self {
        RawOperation {
            dim: op.dim,
            arity: op.arity,
            coeffs: op.coeffs,
        }
    }
}

fn tensor_len(dim: usize, arity: usize) -> Result<usize> {
    dim.checked_pow(arity as u32 + 1)
        .ok_or_else(|| Error::Dimension(format!("dim {dim}, arity {arity} overflows")))
}

impl Operation {
    /// Builds an operation from its flat coefficient array.
    pub fn new(dim: usize, arity: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dim must be >= 1".into()));
        }
        if arity == 0 {
            return Err(Error::Dimension(
                "arity must be >= 1 (nullary operations are not supported)".into(),
            ));
        }
        let expected = tensor_len(dim, arity)?;
        if coeffs.len() != expected {
            return Err(Error::Dimension(format!(
                "dim {dim}, arity {arity} needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(pos) = coeffs.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("coefficient {pos} is not finite")));
        }
        Ok(Self { dim, arity, coeffs })
    }

    pub fn zeros(dim: usize, arity: usize) -> Result<Self> {
        let len = tensor_len(dim, arity)?;
        Self::new(dim, arity, vec![0.0; len])
    }

    /// The unit `𝕀 ∈ C^1`, i.e. the identity matrix.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut op = Self::zeros(dim, 1)?;
        for i in 0..dim {
            op.coeffs[i * dim + i] = 1.0;
        }
        Ok(op)
    }

    /// Arity-1 operation from a row-major square matrix (`rows[i][j] = f^i_j`).
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("matrix must be square".into()));
        }
        Self::new(dim, 1, rows.concat())
    }

    /// Builds coefficients from a function of the multi-index `[i, j1, …, jn]`.
    pub fn from_fn(dim: usize, arity: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = tensor_len(dim, arity)?;
        let mut idx = vec![0usize; arity + 1];
        let mut coeffs = Vec::with_capacity(len);
        for flat in 0..len {
            unflatten(flat, dim, &mut idx);
            coeffs.push(f(&idx));
        }
        Self::new(dim, arity, coeffs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `|f| = arity − 1`.
    pub fn reduced_degree(&self) -> usize {
        self.arity - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient at the zero-based multi-index `[i, j1, …, jn]`.
    pub fn get(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.arity + 1);
        self.coeffs[flatten(index, self.dim)]
    }

    /// `result[i] = Σ f^i_{j1…jn} · x1[j1] ⋯ xn[jn]`.
    pub fn evaluate(&self, args: &[Vector]) -> Result<Vector> {
        if args.len() != self.arity {
            return Err(Error::Dimension(format!(
                "operation of arity {} applied to {} arguments",
                self.arity,
                args.len()
            )));
        }
        if let Some(bad) = args.iter().find(|a| a.dim() != self.dim) {
            return Err(Error::Dimension(format!(
                "argument of dim {} for operation of dim {}",
                bad.dim(),
                self.dim
            )));
        }
        // Contract the trailing (last-input) axis first; each pass shrinks the
        // tensor by one factor of d.
        let mut work = self.coeffs.clone();
        for arg in args.iter().rev() {
            let x = arg.entries();
            work = work
                .chunks_exact(self.dim)
                .map(|row| row.iter().zip(x).map(|(c, xi)| c * xi).sum())
                .collect();
        }
        Ok(Vector(work))
    }

    /// Coefficient-wise `a·f + b·g`.
    pub fn linear_combine(a: f64, f: &Operation, b: f64, g: &Operation) -> Result<Operation> {
        f.check_same_shape(g)?;
        Operation::new(
            f.dim,
            f.arity,
            f.coeffs
                .iter()
                .zip(&g.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Operation {
        Operation {
            dim: self.dim,
            arity: self.arity,
            coeffs: self.coeffs.iter().map(|x| a * x).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Operation) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
    }

    pub fn check_same_shape(&self, other: &Operation) -> Result<()> {
        if self.dim != other.dim || self.arity != other.arity {
            return Err(Error::Dimension(format!(
                "shape (dim {}, arity {}) differs from (dim {}, arity {})",
                self.dim, self.arity, other.dim, other.arity
            )));
        }
        Ok(())
    }

    pub fn check_same_dim(&self, other: &Operation) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "dims {} and {} differ",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("operation serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One-based label of a coefficient, e.g. `[0, 0, 1]` → `"112"`.
pub fn index_label(index: &[usize]) -> String {
    index.iter().map(|k| (k + 1).to_string()).collect()
}

pub(crate) fn flatten(index: &[usize], dim: usize) -> usize {
    index.iter().fold(0, |acc, &k| acc * dim + k)
}

pub(crate) fn unflatten(mut flat: usize, dim: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
}
