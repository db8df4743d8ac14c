use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::code::{bits_to_index, index_to_bits};
use super::inference::exact_conditional;
use super::CrbmParams;
use crate::error::{Error, Result};
use crate::kernels::StochasticKernel;

/// One input/output pattern with its conditional probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub y: Vec<u8>,
    pub x: Vec<u8>,
    pub p: f64,
}

const ROW_SUM_TOL: f64 = 1e-9;

/// Groups points by input, keeping first-appearance order.
fn rows_of(support: &[SupportPoint]) -> Vec<(Vec<u8>, Vec<usize>)> {
    let mut rows: Vec<(Vec<u8>, Vec<usize>)> = Vec::new();
    for (i, pt) in support.iter().enumerate() {
        match rows.iter_mut().find(|(y, _)| *y == pt.y) {
            Some((_, members)) => members.push(i),
            None => rows.push((pt.y.clone(), vec![i])),
        }
    }
    rows
}

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn ones(a: &[u8]) -> f64 {
    a.iter().filter(|&&v| v == 1).count() as f64
}

/// Activation `A` with `softplus(A) = t`, for `t > 0`.
fn inverse_softplus(t: f64) -> f64 {
    let t = t.max(1e-300);
    t + (-(-t).exp_m1()).ln()
}

fn validate(support: &[SupportPoint]) -> Result<(usize, usize)> {
    let first = support.first().ok_or_else(|| Error::config("support is empty"))?;
    let (k, n) = (first.y.len(), first.x.len());
    let mut seen = HashSet::new();
    for (i, pt) in support.iter().enumerate() {
        if pt.y.len() != k || pt.x.len() != n {
            return Err(Error::Row { row: i, msg: "pattern width differs from the first point".into() });
        }
        if pt.y.iter().chain(&pt.x).any(|&b| b > 1) {
            return Err(Error::Row { row: i, msg: "bits must be 0 or 1".into() });
        }
        if !(pt.p > 0.0 && pt.p <= 1.0 + ROW_SUM_TOL) {
            return Err(Error::Row { row: i, msg: format!("probability {} not in (0, 1]", pt.p) });
        }
        if !seen.insert((&pt.y, &pt.x)) {
            return Err(Error::Row { row: i, msg: "duplicate support pattern".into() });
        }
    }
    for (y, members) in rows_of(support) {
        let sum: f64 = members.iter().map(|&i| support[i].p).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::config(format!("probabilities for input {y:?} sum to {sum}")));
        }
    }
    Ok((k, n))
}

/// CRBM with one hidden unit per support point beyond the first whose
/// conditionals approach the target as the sharpness `lambda` grows.
///
/// The output bias singles out a base pattern. Each hidden unit is gated on
/// its input pattern by a large input weight. A unit for the only point of
/// its input row fires for every output and drags all bits to its pattern;
/// a unit sharing its row with other points fires only near its own output
/// and carries the log-probability offset of its point.
pub fn construct_sparse_crbm(support: &[SupportPoint], lambda: f64) -> Result<CrbmParams> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config("sharpness must be positive and finite"));
    }
    let (k, n) = validate(support)?;
    let rows = rows_of(support);
    let m = support.len() - 1;
    let mut params = CrbmParams::zeros(k, n, m);

    let (_, base_members) = &rows[0];
    let base = *base_members
        .iter()
        .reduce(|best, i| if support[*i].p > support[*best].p { i } else { best })
        .expect("rows are non-empty");
    let x0 = &support[base].x;
    if m == 0 {
        for i in 0..n {
            params.b[i] = lambda * (2.0 * x0[i] as f64 - 1.0);
        }
        return Ok(params);
    }

    let g = lambda / 4.0;
    let lambda_b = g;
    let kappa = g * (n as f64 + 2.0);
    let lambda_y = kappa * n as f64 + 2.0 * g;
    for i in 0..n {
        params.b[i] = lambda_b * (2.0 * x0[i] as f64 - 1.0);
    }

    let mut j = 0;
    for (r, (y, members)) in rows.iter().enumerate() {
        let p_ref = if r == 0 { support[base].p } else { members.iter().map(|&i| support[i].p).fold(0.0, f64::max) };
        let gain = if r == 0 { 0.0 } else { g };
        for &i in members {
            if i == base {
                continue;
            }
            let pt = &support[i];
            let activation = if r != 0 && members.len() == 1 {
                kappa * n as f64 + g
            } else {
                let h = hamming(&pt.x, x0) as f64;
                inverse_softplus(lambda_b * h + gain + (pt.p / p_ref).ln())
            };
            for (c, &bit) in pt.x.iter().enumerate() {
                params.w[(j, c)] = kappa * (2.0 * bit as f64 - 1.0);
            }
            for (c, &bit) in y.iter().enumerate() {
                params.v[(j, c)] = lambda_y * (2.0 * bit as f64 - 1.0);
            }
            params.c[j] = activation - kappa * ones(&pt.x) - lambda_y * ones(y);
            j += 1;
        }
    }
    debug_assert_eq!(j, m);
    params.validate()?;
    Ok(params)
}

/// Mean over represented inputs of `KL(target(·|y) ‖ p(·|y))`.
pub fn conditional_kl(params: &CrbmParams, support: &[SupportPoint]) -> Result<f64> {
    validate(support)?;
    let rows = rows_of(support);
    let mut total = 0.0;
    for (y, members) in &rows {
        let q = exact_conditional(params, y)?;
        for &i in members {
            let pt = &support[i];
            if pt.x.len() != params.n {
                return Err(Error::config("support output width differs from the model"));
            }
            let qi = q[bits_to_index(&pt.x)];
            total += if qi > 0.0 { pt.p * (pt.p / qi).ln() } else { f64::INFINITY };
        }
    }
    Ok(total / rows.len() as f64)
}

/// Support points of `pi` on the given sensor rows, with sensor `s` encoded
/// as the `k`-bit binary code of `s` and action `a` as the `n`-bit code of
/// `a`.
pub fn support_points_from_policy(pi: &StochasticKernel, rows: &[usize], k: usize, n: usize) -> Result<Vec<SupportPoint>> {
    let fits = |count: usize, bits: usize| bits >= usize::BITS as usize || count <= 1usize << bits;
    if !fits(pi.codomain(), n) {
        return Err(Error::config(format!("{} actions do not fit in {n} bits", pi.codomain())));
    }
    let mut out = Vec::new();
    for &s in rows {
        if s >= pi.domain() || !fits(s + 1, k) {
            return Err(Error::config(format!("sensor state {s} cannot be encoded in {k} bits")));
        }
        for (a, &p) in pi.row(s).iter().enumerate() {
            if p > 0.0 {
                out.push(SupportPoint { y: index_to_bits(s, k), x: index_to_bits(a, n), p });
            }
        }
    }
    Ok(out)
}
