use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::code::BinaryCode;
use super::inference::{gibbs_sweep, sigmoid};
use super::CrbmParams;
use crate::error::{Error, Result};
use crate::rng::{self, SmlRng};

/// Contrastive-divergence hyperparameters. Defaults are the full-scale
/// experiment values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_cost: f64,
    pub cd_steps: usize,
    pub input_noise_sd: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20_000,
            batch_size: 50,
            learning_rate: 1.0,
            momentum: 0.1,
            weight_cost: 0.001,
            cd_steps: 10,
            input_noise_sd: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.cd_steps == 0 {
            return Err(Error::config("batch_size and cd_steps must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.weight_cost >= 0.0 && self.input_noise_sd >= 0.0) {
            return Err(Error::config("weight_cost and input_noise_sd must be non-negative"));
        }
        Ok(())
    }
}

/// Training pairs `(y, x)`. Continuous inputs are perturbed with Gaussian
/// noise and then binned on every pass.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingData {
    Binary(Vec<(Vec<u8>, Vec<u8>)>),
    Continuous { samples: Vec<(Vec<f64>, Vec<u8>)>, code: BinaryCode },
}

impl TrainingData {
    pub fn len(&self) -> usize {
        match self {
            TrainingData::Binary(d) => d.len(),
            TrainingData::Continuous { samples, .. } => samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, params: &CrbmParams) -> Result<()> {
        if self.is_empty() {
            return Err(Error::config("training data is empty"));
        }
        let bad = |i: usize, what: &str| Err(Error::Row { row: i, msg: format!("{what} does not match the model") });
        match self {
            TrainingData::Binary(d) => {
                for (i, (y, x)) in d.iter().enumerate() {
                    if y.len() != params.k || y.iter().any(|&b| b > 1) {
                        return bad(i, "input");
                    }
                    if x.len() != params.n || x.iter().any(|&b| b > 1) {
                        return bad(i, "output");
                    }
                }
            }
            TrainingData::Continuous { samples, code } => {
                if code.total_bits() != params.k {
                    return Err(Error::config(format!(
                        "input code has {} bits, model expects {}",
                        code.total_bits(),
                        params.k
                    )));
                }
                for (i, (y, x)) in samples.iter().enumerate() {
                    if y.len() != code.channels || y.iter().any(|v| !v.is_finite()) {
                        return bad(i, "input");
                    }
                    if x.len() != params.n || x.iter().any(|&b| b > 1) {
                        return bad(i, "output");
                    }
                }
            }
        }
        Ok(())
    }

    fn pair<R: Rng + ?Sized>(&self, i: usize, noise: Option<&Normal<f64>>, rng: &mut R) -> Result<(Vec<u8>, Vec<u8>)> {
        match self {
            TrainingData::Binary(d) => Ok(d[i].clone()),
            TrainingData::Continuous { samples, code } => {
                let (y, x) = &samples[i];
                let noisy: Vec<f64> = match noise {
                    Some(n) => y.iter().map(|v| v + n.sample(rng)).collect(),
                    None => y.clone(),
                };
                Ok((code.encode(&noisy)?.0, x.clone()))
            }
        }
    }
}

/// Parameter-shaped update direction.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Gradient {
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl Gradient {
    fn zeros(p: &CrbmParams) -> Self {
        Gradient {
            v: DMatrix::zeros(p.m, p.k),
            w: DMatrix::zeros(p.m, p.n),
            b: DVector::zeros(p.n),
            c: DVector::zeros(p.m),
        }
    }

    #[cfg(test)]
    pub fn dot(&self, other: &Gradient) -> f64 {
        self.v.dot(&other.v) + self.w.dot(&other.w) + self.b.dot(&other.b) + self.c.dot(&other.c)
    }
}

fn hidden_probs(params: &CrbmParams, drive: &[f64], x: &[u8], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        let mut a = drive[j];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                a += params.w[(j, i)];
            }
        }
        *o = sigmoid(a);
    }
}

/// CD-k estimate of the conditional log-likelihood gradient, averaged over
/// the batch. The negative chain starts at the data and keeps `y` clamped.
pub(crate) fn cd_gradient<R: Rng + ?Sized>(
    params: &CrbmParams,
    batch: &[(Vec<u8>, Vec<u8>)],
    cd_steps: usize,
    rng: &mut R,
) -> Gradient {
    let mut g = Gradient::zeros(params);
    let mut h_pos = vec![0.0; params.m];
    let mut h_neg = vec![0.0; params.m];
    let mut z = vec![0u8; params.m];
    for (y, x) in batch {
        let drive = params.hidden_drive(y);
        hidden_probs(params, &drive, x, &mut h_pos);
        let mut xn = x.clone();
        for _ in 0..cd_steps {
            gibbs_sweep(params, &drive, &mut xn, &mut z, rng);
        }
        hidden_probs(params, &drive, &xn, &mut h_neg);
        for j in 0..params.m {
            let dh = h_pos[j] - h_neg[j];
            g.c[j] += dh;
            for (i, &yi) in y.iter().enumerate() {
                if yi == 1 {
                    g.v[(j, i)] += dh;
                }
            }
            for i in 0..params.n {
                g.w[(j, i)] += h_pos[j] * x[i] as f64 - h_neg[j] * xn[i] as f64;
            }
        }
        for i in 0..params.n {
            g.b[i] += x[i] as f64 - xn[i] as f64;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    g.v *= scale;
    g.w *= scale;
    g.b *= scale;
    g.c *= scale;
    g
}

/// Contrastive-divergence training with momentum and weight decay on the
/// interaction weights. Returns the trained copy; the input is untouched.
pub fn cd_train(params: &CrbmParams, data: &TrainingData, cfg: &TrainConfig) -> Result<CrbmParams> {
    params.validate()?;
    cfg.validate()?;
    data.check(params)?;
    let mut p = params.clone();
    if cfg.epochs == 0 {
        return Ok(p);
    }
    let mut r: SmlRng = rng::stream(cfg.seed, rng::streams::CRBM_TRAIN);
    let noise = if cfg.input_noise_sd > 0.0 {
        Some(Normal::new(0.0, cfg.input_noise_sd).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };
    let mut vel = Gradient::zeros(&p);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut r);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            for &i in chunk {
                batch.push(data.pair(i, noise.as_ref(), &mut r)?);
            }
            let g = cd_gradient(&p, &batch, cfg.cd_steps, &mut r);
            let lr = cfg.learning_rate;
            vel.v = &vel.v * cfg.momentum + (g.v - &p.v * cfg.weight_cost) * lr;
            vel.w = &vel.w * cfg.momentum + (g.w - &p.w * cfg.weight_cost) * lr;
            vel.b = &vel.b * cfg.momentum + g.b * lr;
            vel.c = &vel.c * cfg.momentum + g.c * lr;
            p.v += &vel.v;
            p.w += &vel.w;
            p.b += &vel.b;
            p.c += &vel.c;
        }
        if !p.is_finite() {
            return Err(Error::Numeric(format!("training diverged in epoch {epoch}")));
        }
    }
    Ok(p)
}
