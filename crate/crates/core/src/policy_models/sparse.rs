use nalgebra::DMatrix;

use super::embodiment_matrix_on;
use super::simplex::{find_basic_feasible, polish};
use crate::behavior_dim::{SupportSet, EXACT_RANK_TOL};
use crate::error::{Error, Result};
use crate::kernels::{behavior_map, SmlSystem, StochasticKernel};

/// Worlds whose sensor distribution is concentrated on `support`.
pub fn support_worlds(sys: &SmlSystem, support: &SupportSet) -> Vec<usize> {
    (0..sys.n_world())
        .filter(|&w| sys.beta.row(w).iter().enumerate().all(|(s, &p)| p == 0.0 || support.contains(s)))
        .collect()
}

/// A policy with the same behavior as `target` on the worlds observed
/// through `support` whose support rows carry at most `|S| + d^S` nonzero
/// entries. Rows outside the support are copied from the target.
pub fn sparse_representative(
    sys: &SmlSystem,
    target: &StochasticKernel,
    support: &SupportSet,
    tol: f64,
) -> Result<StochasticKernel> {
    sys.check_policy(target)?;
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    if let Some(&s) = support.sensor_indices.iter().find(|&&s| s >= sys.n_sensor()) {
        return Err(Error::config(format!("support index {s} out of range {}", sys.n_sensor())));
    }
    let n_a = sys.n_actuator();
    let worlds = support_worlds(sys, support);
    let sensors = support.sensor_indices.clone();
    let e = embodiment_matrix_on(sys, &worlds, &sensors, EXACT_RANK_TOL);
    let d = e.dim();

    // only entries already charged by the target, so the result lies on its face
    let vars: Vec<(usize, usize, usize)> = sensors
        .iter()
        .enumerate()
        .flat_map(|(ls, &s)| (0..n_a).map(move |a| (ls, s, a)))
        .filter(|&(_, s, a)| target.get(s, a) > 0.0)
        .collect();
    let n_rows = d + sensors.len();
    let mut a_mat = DMatrix::zeros(n_rows, vars.len());
    let mut b = vec![0.0; n_rows];
    for (j, &(ls, s, a)) in vars.iter().enumerate() {
        let col = e.e.column(e.column_index(ls, a));
        let p = target.get(s, a);
        for i in 0..d {
            a_mat[(i, j)] = col[i];
            b[i] += p * col[i];
        }
        a_mat[(d + ls, j)] = 1.0;
    }
    for bi in b.iter_mut().skip(d) {
        *bi = 1.0;
    }

    let mut sol = find_basic_feasible(&a_mat, &b, 1e-9)
        .map_err(|err| Error::Numeric(format!("sparse representative: {err}")))?;
    polish(&a_mat, &b, &mut sol);

    let mut probs = target.probs().to_vec();
    for &s in &sensors {
        probs[s * n_a..(s + 1) * n_a].fill(0.0);
    }
    for (j, &(_, s, a)) in vars.iter().enumerate() {
        probs[s * n_a + a] = sol.x[j];
    }
    for &s in &sensors {
        let row = &mut probs[s * n_a..(s + 1) * n_a];
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!("sparse representative row {s} sums to {sum}")));
        }
        row.iter_mut().for_each(|p| *p /= sum);
    }
    let pi = StochasticKernel::new(sys.n_sensor(), n_a, probs)?;

    let budget = sensors.len() + d;
    let nnz = pi.nonzeros_in(&sensors);
    if nnz > budget {
        return Err(Error::Numeric(format!("representative has {nnz} nonzeros, budget {budget}")));
    }
    let gap = restricted_gap(sys, &pi, target, &worlds)?;
    if gap > tol {
        return Err(Error::Numeric(format!("representative behavior gap {gap:e} exceeds {tol:e}")));
    }
    Ok(pi)
}

fn restricted_gap(sys: &SmlSystem, a: &StochasticKernel, b: &StochasticKernel, worlds: &[usize]) -> Result<f64> {
    let ka = behavior_map(sys, a)?;
    let kb = behavior_map(sys, b)?;
    Ok(worlds
        .iter()
        .flat_map(|&w| ka.row(w).iter().zip(kb.row(w)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max))
}
