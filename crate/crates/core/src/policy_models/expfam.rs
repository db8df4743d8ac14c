use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EmbodimentMatrix;
use crate::error::{Error, Result};
use crate::kernels::{behavior_map, SmlSystem, StochasticKernel};

/// Outcome of moment matching. `converged == false` means the target sits on
/// (or numerically near) the boundary and `theta` is the best iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub theta: Vec<f64>,
    /// Sup-norm of `E vec(pi_theta) - E vec(target)`.
    pub residual: f64,
    /// Sup-norm distance between the two behaviors.
    pub behavior_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn logits(e: &EmbodimentMatrix, theta: &[f64]) -> Vec<f64> {
    let cols = e.e.ncols();
    let mut out = vec![0.0; cols];
    for (j, o) in out.iter_mut().enumerate() {
        *o = e.e.column(j).iter().zip(theta).map(|(c, t)| c * t).sum();
    }
    out
}

/// Row-wise softmax over the owned sensors; returns the flattened
/// probabilities and the summed log-partition.
fn softmax_rows(e: &EmbodimentMatrix, theta: &[f64]) -> (Vec<f64>, f64) {
    let n_a = e.n_actuator;
    let z = logits(e, theta);
    let mut p = vec![0.0; z.len()];
    let mut log_partition = 0.0;
    for (zr, pr) in z.chunks(n_a).zip(p.chunks_mut(n_a)) {
        let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (pi, &zi) in pr.iter_mut().zip(zr) {
            *pi = (zi - max).exp();
            sum += *pi;
        }
        for pi in pr.iter_mut() {
            *pi /= sum;
        }
        log_partition += max + sum.ln();
    }
    (p, log_partition)
}

/// Member of the exponential family with natural parameter `theta`. Sensor
/// states not owned by `e` get uniform rows.
pub fn expfam_policy(e: &EmbodimentMatrix, theta: &[f64]) -> Result<StochasticKernel> {
    if theta.len() != e.dim() {
        return Err(Error::config(format!("theta has length {}, expected {}", theta.len(), e.dim())));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("non-finite natural parameter".into()));
    }
    let n_a = e.n_actuator;
    let (p, _) = softmax_rows(e, theta);
    let mut probs = vec![1.0 / n_a as f64; e.n_sensor * n_a];
    for (ls, &s) in e.sensors.iter().enumerate() {
        probs[s * n_a..(s + 1) * n_a].copy_from_slice(&p[ls * n_a..(ls + 1) * n_a]);
    }
    StochasticKernel::new(e.n_sensor, n_a, probs)
}

struct Objective<'a> {
    e: &'a EmbodimentMatrix,
    target: Vec<f64>,
}

impl Objective<'_> {
    fn value(&self, theta: &[f64]) -> f64 {
        let (_, lp) = softmax_rows(self.e, theta);
        lp - theta.iter().zip(&self.target).map(|(t, m)| t * m).sum::<f64>()
    }

    fn gradient_hessian(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.e.dim();
        let n_a = self.e.n_actuator;
        let (p, _) = softmax_rows(self.e, theta);
        let mut grad = DVector::from_iterator(d, self.target.iter().map(|m| -m));
        let mut hess = DMatrix::zeros(d, d);
        for ls in 0..self.e.sensors.len() {
            let mut mu = DVector::zeros(d);
            for a in 0..n_a {
                let j = ls * n_a + a;
                let col = self.e.e.column(j);
                mu.axpy(p[j], &col, 1.0);
                hess.ger(p[j], &col, &col, 1.0);
            }
            hess.ger(-1.0, &mu, &mu, 1.0);
            grad += &mu;
        }
        (grad, hess)
    }
}

/// Moment matching: finds `theta` with `E vec(pi_theta) = E vec(target)` by
/// damped Newton on the convex log-partition gap.
pub fn fit_expfam(
    sys: &SmlSystem,
    e: &EmbodimentMatrix,
    target: &StochasticKernel,
    tol: f64,
    max_iters: usize,
) -> Result<FitReport> {
    sys.check_policy(target)?;
    if !(tol > 0.0) {
        return Err(Error::config("fit tolerance must be positive"));
    }
    if e.n_sensor != sys.n_sensor() || e.n_actuator != sys.n_actuator() {
        return Err(Error::config("embodiment matrix does not match the system"));
    }
    let d = e.dim();
    let obj = Objective { e, target: e.moments(target) };
    let mut theta = vec![0.0; d];
    let mut value = obj.value(&theta);
    let mut iterations = 0;
    let mut residual;
    loop {
        let (grad, hess) = obj.gradient_hessian(&theta);
        residual = grad.amax();
        if residual <= tol || iterations >= max_iters {
            break;
        }
        iterations += 1;
        let step = newton_step(&grad, hess);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            let v = obj.value(&cand);
            if v.is_finite() && v <= value + 1e-4 * t * slope {
                theta = cand;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            log::debug!("line search stalled at residual {residual:e}");
            break;
        }
    }
    let fitted = expfam_policy(e, &theta)?;
    let gap = behavior_gap(sys, &fitted, target)?;
    Ok(FitReport { theta, residual, behavior_gap: gap, iterations, converged: residual <= tol })
}

fn newton_step(grad: &DVector<f64>, hess: DMatrix<f64>) -> DVector<f64> {
    let d = grad.len();
    let scale = hess.diagonal().amax().max(1e-300);
    let mut damping = 0.0;
    loop {
        let mut h = hess.clone();
        for i in 0..d {
            h[(i, i)] += damping;
        }
        if let Some(ch) = h.cholesky() {
            return -ch.solve(grad);
        }
        damping = if damping == 0.0 { 1e-10 * scale } else { damping * 10.0 };
        if damping > 1e6 * scale {
            return -grad.clone();
        }
    }
}

pub(crate) fn behavior_gap(sys: &SmlSystem, a: &StochasticKernel, b: &StochasticKernel) -> Result<f64> {
    let ka = behavior_map(sys, a)?;
    let kb = behavior_map(sys, b)?;
    Ok(crate::linalg::max_abs_diff(ka.probs(), kb.probs()))
}
