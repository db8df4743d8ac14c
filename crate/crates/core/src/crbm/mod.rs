//! Conditional restricted Boltzmann machines as policies.
//!
//! A CRBM with `k` input bits `y`, `n` output bits `x` and `m` hidden bits
//! `z` defines
//!
//! ```text
//! p(x|y) ∝ exp(b·x) · Π_j (1 + exp(W_j·x + V_j·y + c_j))
//! ```
//!
//! after summing out the hidden layer. Bit vectors are stored as `u8`
//! values in `{0, 1}`, most significant bit first when converted to and
//! from integer indices.

mod bounds;
mod code;
mod construct;
mod inference;
mod policy;
mod train;

pub use bounds::{
    bound_embodied, bound_joint, bound_joint_log2, bound_lower, bound_lower_log2, bound_nonembodied,
    bound_nonembodied_log2,
};
pub use code::{bits_to_index, index_to_bits, BinaryCode};
pub use construct::{conditional_kl, construct_sparse_crbm, support_points_from_policy, SupportPoint};
pub use inference::{exact_conditional, gibbs_sample, gibbs_sample_with, log_unnormalized, MAX_ENUM_OUTPUTS};
pub use policy::CrbmPolicy;
pub use train::{cd_train, TrainConfig, TrainingData};

#[cfg(test)]
use inference::{gibbs_sweep, sigmoid, softplus};
#[cfg(test)]
use train::{cd_gradient, Gradient};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Weights and biases of a CRBM.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbmParams {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    /// Hidden-input weights, `m × k`.
    pub v: DMatrix<f64>,
    /// Hidden-output weights, `m × n`.
    pub w: DMatrix<f64>,
    /// Output biases.
    pub b: DVector<f64>,
    /// Hidden biases.
    pub c: DVector<f64>,
}

impl CrbmParams {
    pub fn zeros(k: usize, n: usize, m: usize) -> Self {
        CrbmParams {
            k,
            n,
            m,
            v: DMatrix::zeros(m, k),
            w: DMatrix::zeros(m, n),
            b: DVector::zeros(n),
            c: DVector::zeros(m),
        }
    }

    /// Weights drawn from `N(0, sd²)`, biases zero.
    pub fn random<R: Rng + ?Sized>(k: usize, n: usize, m: usize, sd: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, sd).map_err(|e| Error::config(format!("weight scale: {e}")))?;
        let mut p = Self::zeros(k, n, m);
        // row-major fill so the draw order does not depend on storage layout
        for j in 0..m {
            for i in 0..k {
                p.v[(j, i)] = normal.sample(rng);
            }
            for i in 0..n {
                p.w[(j, i)] = normal.sample(rng);
            }
        }
        Ok(p)
    }

    pub fn parameter_count(&self) -> usize {
        self.m * self.k + self.m * self.n + self.m + self.n
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(self.w.iter()).chain(self.b.iter()).chain(self.c.iter()).all(|x| x.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.shape() != (self.m, self.k)
            || self.w.shape() != (self.m, self.n)
            || self.b.len() != self.n
            || self.c.len() != self.m
        {
            return Err(Error::config(format!(
                "inconsistent CRBM shapes for k={}, n={}, m={}",
                self.k, self.n, self.m
            )));
        }
        if !self.is_finite() {
            return Err(Error::Numeric("non-finite CRBM parameter".into()));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, y: &[u8]) -> Result<()> {
        if y.len() != self.k {
            return Err(Error::config(format!("input has {} bits, expected {}", y.len(), self.k)));
        }
        if y.iter().any(|&b| b > 1) {
            return Err(Error::config("input bits must be 0 or 1"));
        }
        Ok(())
    }

    /// `V y + c`, the input drive of each hidden unit.
    pub(crate) fn hidden_drive(&self, y: &[u8]) -> Vec<f64> {
        (0..self.m)
            .map(|j| self.c[j] + y.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| self.v[(j, i)]).sum::<f64>())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("CRBM parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: CrbmParams = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    k: usize,
    n: usize,
    m: usize,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn matrix_from(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> std::result::Result<DMatrix<f64>, String> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{name} must be {nrows}×{ncols}"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl Serialize for CrbmParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsFile {
            k: self.k,
            n: self.n,
            m: self.m,
            v: rows_of(&self.v),
            w: rows_of(&self.w),
            b: self.b.iter().copied().collect(),
            c: self.c.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CrbmParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = ParamsFile::deserialize(d)?;
        let v = matrix_from(&f.v, f.m, f.k, "V").map_err(D::Error::custom)?;
        let w = matrix_from(&f.w, f.m, f.n, "W").map_err(D::Error::custom)?;
        if f.b.len() != f.n || f.c.len() != f.m {
            return Err(D::Error::custom("bias lengths do not match n and m"));
        }
        Ok(CrbmParams { k: f.k, n: f.n, m: f.m, v, w, b: DVector::from_vec(f.b), c: DVector::from_vec(f.c) })
    }
}
