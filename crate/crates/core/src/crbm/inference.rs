use rand::Rng;

use super::code::index_to_bits;
use super::CrbmParams;
use crate::error::{Error, Result};
use crate::rng::{self, SmlRng};

/// Largest output width for which the conditional is enumerated.
pub const MAX_ENUM_OUTPUTS: usize = 20;

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log` of the unnormalized conditional mass of `x` given the hidden
/// drive `V y + c`.
fn log_mass(params: &CrbmParams, drive: &[f64], x: &[u8]) -> f64 {
    let mut total = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        if xi == 1 {
            total += params.b[i];
        }
    }
    for (j, &dj) in drive.iter().enumerate() {
        let mut a = dj;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                a += params.w[(j, i)];
            }
        }
        total += softplus(a);
    }
    total
}

/// Unnormalized log-probability `b·x + Σ_j softplus(W_j·x + V_j·y + c_j)`.
pub fn log_unnormalized(params: &CrbmParams, y: &[u8], x: &[u8]) -> Result<f64> {
    params.check_input(y)?;
    if x.len() != params.n {
        return Err(Error::config(format!("output has {} bits, expected {}", x.len(), params.n)));
    }
    Ok(log_mass(params, &params.hidden_drive(y), x))
}

/// `p(·|y)` over all `2^n` outputs, indexed most-significant-bit first.
pub fn exact_conditional(params: &CrbmParams, y: &[u8]) -> Result<Vec<f64>> {
    params.check_input(y)?;
    if params.n > MAX_ENUM_OUTPUTS {
        return Err(Error::Capacity(format!(
            "cannot enumerate 2^{} outputs (limit 2^{MAX_ENUM_OUTPUTS})",
            params.n
        )));
    }
    let drive = params.hidden_drive(y);
    let size = 1usize << params.n;
    let logs: Vec<f64> = (0..size).map(|idx| log_mass(params, &drive, &index_to_bits(idx, params.n))).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric("non-finite conditional energy".into()));
    }
    let mut probs: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    Ok(probs)
}

/// One blocked sweep: `z ~ p(z|x,y)` then `x ~ p(x|z)`. The hidden sample
/// is left in `z`.
pub(crate) fn gibbs_sweep<R: Rng + ?Sized>(params: &CrbmParams, drive: &[f64], x: &mut [u8], z: &mut [u8], rng: &mut R) {
    for (j, zj) in z.iter_mut().enumerate() {
        let mut a = drive[j];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 1 {
                a += params.w[(j, i)];
            }
        }
        *zj = u8::from(rng.random::<f64>() < sigmoid(a));
    }
    for (i, xi) in x.iter_mut().enumerate() {
        let mut a = params.b[i];
        for (j, &zj) in z.iter().enumerate() {
            if zj == 1 {
                a += params.w[(j, i)];
            }
        }
        *xi = u8::from(rng.random::<f64>() < sigmoid(a));
    }
}

/// Approximate sample of `x ~ p(·|y)` after `sweeps` blocked Gibbs sweeps
/// from a uniformly random start.
pub fn gibbs_sample_with<R: Rng + ?Sized>(params: &CrbmParams, y: &[u8], sweeps: usize, rng: &mut R) -> Result<Vec<u8>> {
    params.check_input(y)?;
    if sweeps == 0 {
        return Err(Error::config("at least one Gibbs sweep is required"));
    }
    let drive = params.hidden_drive(y);
    let mut x: Vec<u8> = (0..params.n).map(|_| u8::from(rng.random::<bool>())).collect();
    let mut z = vec![0u8; params.m];
    for _ in 0..sweeps {
        gibbs_sweep(params, &drive, &mut x, &mut z, rng);
    }
    Ok(x)
}

pub fn gibbs_sample(params: &CrbmParams, y: &[u8], sweeps: usize, seed: u64) -> Result<Vec<u8>> {
    let mut r: SmlRng = rng::stream(seed, rng::streams::GIBBS);
    gibbs_sample_with(params, y, sweeps, &mut r)
}
