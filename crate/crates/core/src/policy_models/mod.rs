//! Low-dimensional policy models that reach every behavior of a loop.
//!
//! Two complementary constructions:
//! - the exponential family `pi_theta(s;a) ∝ exp(theta · E(s,a))` whose
//!   sufficient statistics are the coordinates of the policy-behavior map
//!   (maximum-entropy representatives), and
//! - sparse policies on low-dimensional faces of the policy polytope
//!   (minimum-entropy representatives), extracted as basic feasible
//!   solutions of the behavior-matching linear system.

mod expfam;
mod faces;
mod simplex;
mod sparse;

pub use expfam::{expfam_policy, fit_expfam, FitReport};
pub use faces::{enumerate_faces, FaceIter, FacePattern};
pub use simplex::{find_basic_feasible, BasicSolution};
pub use sparse::{sparse_representative, support_worlds};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::behavior_dim::basis_images_on;
use crate::error::{Error, Result};
use crate::kernels::{SmlSystem, StochasticKernel};
use crate::linalg;

/// Coordinates of the policy-behavior map in an orthonormal basis of its
/// image directions: column `(s, a)` holds the coordinates of the image of
/// the point mass on `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbodimentMatrix {
    pub n_sensor: usize,
    pub n_actuator: usize,
    /// Sensor states owning the columns, in order.
    pub sensors: Vec<usize>,
    /// `d × (sensors.len() · |A|)`.
    pub e: DMatrix<f64>,
}

impl EmbodimentMatrix {
    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    #[inline]
    pub fn column_index(&self, local_s: usize, a: usize) -> usize {
        local_s * self.n_actuator + a
    }

    /// `E · vec(pi)` over the owned sensor rows.
    pub fn moments(&self, pi: &StochasticKernel) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (ls, &s) in self.sensors.iter().enumerate() {
            for a in 0..self.n_actuator {
                let p = pi.get(s, a);
                if p == 0.0 {
                    continue;
                }
                let col = self.e.column(self.column_index(ls, a));
                for (mi, &c) in m.iter_mut().zip(col.iter()) {
                    *mi += p * c;
                }
            }
        }
        m
    }
}

/// Serializable view of a natural parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    pub theta: Vec<f64>,
}

pub(crate) fn embodiment_matrix_on(
    sys: &SmlSystem,
    worlds: &[usize],
    sensors: &[usize],
    tol: f64,
) -> EmbodimentMatrix {
    let n_w = sys.n_world();
    let n_a = sys.n_actuator();
    let images = basis_images_on(sys, worlds, sensors, 0);
    let (basis, _) = linalg::row_space_basis(&images.rows, tol);
    // linear image of each point mass, flattened over (w in worlds, w')
    let mut point_images = DMatrix::zeros(worlds.len() * n_w, sensors.len() * n_a);
    for (ls, &s) in sensors.iter().enumerate() {
        for a in 0..n_a {
            let col = ls * n_a + a;
            for (i, &w) in worlds.iter().enumerate() {
                let b = sys.beta.get(w, s);
                if b == 0.0 {
                    continue;
                }
                for (w2, &p) in sys.alpha_row(w, a).iter().enumerate() {
                    point_images[(i * n_w + w2, col)] = b * p;
                }
            }
        }
    }
    let e = if basis.nrows() == 0 {
        DMatrix::zeros(0, sensors.len() * n_a)
    } else {
        &basis * point_images
    };
    EmbodimentMatrix { n_sensor: sys.n_sensor(), n_actuator: n_a, sensors: sensors.to_vec(), e }
}

/// Embodiment matrix of the full loop; its row count is the embodied
/// behavior dimension.
pub fn embodiment_matrix(sys: &SmlSystem, tol: f64) -> Result<EmbodimentMatrix> {
    if !(tol > 0.0) {
        return Err(Error::config("rank tolerance must be positive"));
    }
    let worlds: Vec<usize> = (0..sys.n_world()).collect();
    let sensors: Vec<usize> = (0..sys.n_sensor()).collect();
    Ok(embodiment_matrix_on(sys, &worlds, &sensors, tol))
}

#[cfg(test)]
mod tests;
