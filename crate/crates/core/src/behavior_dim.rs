//! Embodied behavior dimension.
//!
//! The policy-behavior map is affine, so the dimension of its image equals
//! the rank of the images of a basis of the policy polytope's affine hull.
//! With a reference action `a0`, that basis consists of the differences
//! between the constant-`a0` deterministic policy and the policies that
//! switch a single sensor state `s` to action `a != a0`; their images are
//! `beta(w;s) * (alpha(w,a0;w') - alpha(w,a;w'))`.
//!
//! When the agent only sees its own sensor stream, the same quantity can be
//! estimated from the internal world model `gamma(s,a;s')` (counted
//! transitions), as the sum over sensor states of the per-state affine rank.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{EmpiricalKernel, SmlSystem, Trajectory};
use crate::linalg::{self, rank_from_singular_values, rank_with_scale, singular_values};

/// Default relative rank tolerance for exactly known kernels.
pub const EXACT_RANK_TOL: f64 = 1e-9;
/// Default relative rank tolerance for count-estimated kernels.
pub const EMPIRICAL_RANK_TOL: f64 = 0.05;

/// Images of the affine basis `e_(s,a)`, one row per `(s, a)` with `a != a0`.
#[derive(Debug, Clone)]
pub struct BasisImageMatrix {
    pub reference_action: usize,
    /// `(s, a)` label of each row.
    pub pairs: Vec<(usize, usize)>,
    /// World states indexing the row blocks of each image.
    pub worlds: Vec<usize>,
    /// `pairs.len() × (worlds.len() · |W|)`; column `i·|W| + w'` is
    /// the entry for `(worlds[i], w')`.
    pub rows: DMatrix<f64>,
}

impl BasisImageMatrix {
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub d: usize,
    pub rank_beta: usize,
    pub rank_alpha: usize,
    pub upper_bound: usize,
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
}

/// Sensor states retained after pruning, with the data mass they cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    pub sensor_indices: Vec<usize>,
    pub kept_mass: f64,
}

impl SupportSet {
    pub fn full(n_sensor: usize) -> Self {
        Self { sensor_indices: (0..n_sensor).collect(), kept_mass: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.sensor_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensor_indices.is_empty()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.sensor_indices.binary_search(&s).is_ok()
    }
}

fn check_action(sys: &SmlSystem, a0: usize) -> Result<()> {
    if a0 >= sys.n_actuator() {
        return Err(Error::config(format!("reference action {a0} out of range {}", sys.n_actuator())));
    }
    Ok(())
}

pub(crate) fn basis_images_on(
    sys: &SmlSystem,
    worlds: &[usize],
    sensors: &[usize],
    a0: usize,
) -> BasisImageMatrix {
    let n_w = sys.n_world();
    let n_a = sys.n_actuator();
    let pairs: Vec<(usize, usize)> = sensors
        .iter()
        .flat_map(|&s| (0..n_a).filter(move |&a| a != a0).map(move |a| (s, a)))
        .collect();
    let mut rows = DMatrix::zeros(pairs.len(), worlds.len() * n_w);
    for (r, &(s, a)) in pairs.iter().enumerate() {
        for (i, &w) in worlds.iter().enumerate() {
            let b = sys.beta.get(w, s);
            if b == 0.0 {
                continue;
            }
            let ref_row = sys.alpha_row(w, a0);
            let alt_row = sys.alpha_row(w, a);
            for w2 in 0..n_w {
                rows[(r, i * n_w + w2)] = b * (ref_row[w2] - alt_row[w2]);
            }
        }
    }
    BasisImageMatrix { reference_action: a0, pairs, worlds: worlds.to_vec(), rows }
}

/// Images of the affine basis of the policy polytope under the
/// policy-behavior map.
pub fn basis_images(sys: &SmlSystem, a0: usize) -> Result<BasisImageMatrix> {
    check_action(sys, a0)?;
    let worlds: Vec<usize> = (0..sys.n_world()).collect();
    let sensors: Vec<usize> = (0..sys.n_sensor()).collect();
    Ok(basis_images_on(sys, &worlds, &sensors, a0))
}

/// Matrix rank of `beta` as a `|W| × |S|` matrix.
pub fn beta_rank(sys: &SmlSystem, tol: f64) -> usize {
    let m = DMatrix::from_row_slice(sys.n_world(), sys.n_sensor(), sys.beta.probs());
    linalg::numerical_rank(&m, tol)
}

/// Affine rank of `alpha`: rank of the matrix with rows indexed by
/// `a != a0` and columns by `(w, w')`, entries
/// `alpha(w,a0;w') - alpha(w,a;w')`.
pub fn alpha_affine_rank(sys: &SmlSystem, a0: usize, tol: f64) -> usize {
    let n_w = sys.n_world();
    let others: Vec<usize> = (0..sys.n_actuator()).filter(|&a| a != a0).collect();
    let mut m = DMatrix::zeros(others.len(), n_w * n_w);
    for (r, &a) in others.iter().enumerate() {
        for w in 0..n_w {
            for w2 in 0..n_w {
                m[(r, w * n_w + w2)] = sys.alpha_at(w, a0, w2) - sys.alpha_at(w, a, w2);
            }
        }
    }
    linalg::numerical_rank(&m, tol)
}

/// Embodied behavior dimension with reference action 0.
pub fn embodied_dimension(sys: &SmlSystem, tol: f64) -> Result<DimensionReport> {
    embodied_dimension_with(sys, 0, tol)
}

pub fn embodied_dimension_with(sys: &SmlSystem, a0: usize, tol: f64) -> Result<DimensionReport> {
    if !(tol > 0.0) {
        return Err(Error::config("rank tolerance must be positive"));
    }
    let images = basis_images(sys, a0)?;
    let sv = singular_values(&images.rows);
    let d = rank_from_singular_values(&sv, tol);
    let rank_beta = beta_rank(sys, tol);
    let rank_alpha = alpha_affine_rank(sys, a0, tol);
    Ok(DimensionReport {
        d,
        rank_beta,
        rank_alpha,
        upper_bound: rank_beta * rank_alpha,
        tolerance: tol,
        singular_values: sv,
    })
}

/// Sensor states reachable from `worlds` under `beta`, sorted.
pub fn sensor_support_of(sys: &SmlSystem, worlds: &[usize]) -> Vec<usize> {
    (0..sys.n_sensor())
        .filter(|&s| worlds.iter().any(|&w| sys.beta.get(w, s) > 0.0))
        .collect()
}

/// Behavior dimension of the policy-behavior map restricted to the world
/// states in `world_subset`, together with the sensor states those worlds
/// can emit.
pub fn restricted_dimension(sys: &SmlSystem, world_subset: &[usize], tol: f64) -> Result<(SupportSet, usize)> {
    restricted_dimension_with(sys, world_subset, 0, tol)
}

pub fn restricted_dimension_with(
    sys: &SmlSystem,
    world_subset: &[usize],
    a0: usize,
    tol: f64,
) -> Result<(SupportSet, usize)> {
    check_action(sys, a0)?;
    let mut worlds = world_subset.to_vec();
    worlds.sort_unstable();
    worlds.dedup();
    if worlds.is_empty() {
        return Err(Error::config("world subset must be non-empty"));
    }
    if let Some(&w) = worlds.iter().find(|&&w| w >= sys.n_world()) {
        return Err(Error::config(format!("world {w} out of range")));
    }
    let sensors = sensor_support_of(sys, &worlds);
    let images = basis_images_on(sys, &worlds, &sensors, a0);
    let d = linalg::numerical_rank(&images.rows, tol);
    Ok((SupportSet { sensor_indices: sensors, kept_mass: 1.0 }, d))
}

/// Minimal set of most frequent sensor states covering at least
/// `keep_fraction` of the observations. Ties in frequency go to the lower
/// index.
pub fn estimate_support(histogram: &[u64], keep_fraction: f64) -> Result<SupportSet> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::config("keep_fraction must lie in (0, 1]"));
    }
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::config("histogram has no observations"));
    }
    let mut order: Vec<usize> = (0..histogram.len()).filter(|&s| histogram[s] > 0).collect();
    order.sort_by(|&a, &b| histogram[b].cmp(&histogram[a]).then(a.cmp(&b)));
    let mut kept = Vec::new();
    let mut cum = 0u64;
    for s in order {
        kept.push(s);
        cum += histogram[s];
        // slack absorbs the decimal representation of keep_fraction
        if cum as f64 / total as f64 >= keep_fraction - 1e-12 {
            break;
        }
    }
    kept.sort_unstable();
    Ok(SupportSet { sensor_indices: kept, kept_mass: cum as f64 / total as f64 })
}

/// Count `(s^t, a^t) -> s^{t+1}` transitions with `s^t` in the support and
/// normalize per row. Rows are indexed `s * |A| + a`, columns by `s'`.
pub fn estimate_gamma(
    traj: &Trajectory,
    support: &SupportSet,
    n_sensor: usize,
    n_actuator: usize,
) -> Result<EmpiricalKernel> {
    if support.is_empty() {
        return Err(Error::config("empty support set"));
    }
    if traj.steps.len() < 2 {
        return Err(Error::config("need at least two steps to count a transition"));
    }
    let mut counts = vec![0u64; n_sensor * n_actuator * n_sensor];
    for pair in traj.steps.windows(2) {
        let (cur, next) = (pair[0], pair[1]);
        if cur.s >= n_sensor || next.s >= n_sensor || cur.a >= n_actuator {
            return Err(Error::Parse("trajectory index outside declared state spaces".into()));
        }
        if !support.contains(cur.s) {
            continue;
        }
        counts[(cur.s * n_actuator + cur.a) * n_sensor + next.s] += 1;
    }
    EmpiricalKernel::from_counts(n_sensor * n_actuator, n_sensor, &counts)
}

fn gamma_difference_block(gamma: &EmpiricalKernel, support: &SupportSet, s: usize, a0: usize) -> DMatrix<f64> {
    let n_a = gamma.domain() / gamma.codomain();
    let others: Vec<usize> = (0..n_a).filter(|&a| a != a0).collect();
    let cols = &support.sensor_indices;
    let mut m = DMatrix::zeros(others.len(), cols.len());
    let ref_row = gamma.row(s * n_a + a0);
    for (r, &a) in others.iter().enumerate() {
        let row = gamma.row(s * n_a + a);
        for (c, &s2) in cols.iter().enumerate() {
            m[(r, c)] = ref_row[s2] - row[s2];
        }
    }
    m
}

/// Per-sensor-state affine ranks of `gamma` (restricted to support columns).
///
/// The threshold is `tol` times the largest singular value found across all
/// per-state blocks, so blocks that only carry sampling noise fall below it.
pub fn gamma_affine_ranks(gamma: &EmpiricalKernel, support: &SupportSet, a0: usize, tol: f64) -> Result<Vec<(usize, usize)>> {
    let n_s = gamma.codomain();
    if gamma.domain() % n_s != 0 {
        return Err(Error::config("gamma rows must be indexed by (s, a)"));
    }
    let n_a = gamma.domain() / n_s;
    if a0 >= n_a {
        return Err(Error::config(format!("reference action {a0} out of range {n_a}")));
    }
    if let Some(&s) = support.sensor_indices.iter().find(|&&s| s >= n_s) {
        return Err(Error::config(format!("support state {s} out of range")));
    }
    let blocks: Vec<Vec<f64>> = support
        .sensor_indices
        .iter()
        .map(|&s| singular_values(&gamma_difference_block(gamma, support, s, a0)))
        .collect();
    let scale = blocks.iter().flatten().copied().fold(0.0_f64, f64::max);
    Ok(support
        .sensor_indices
        .iter()
        .zip(&blocks)
        .map(|(&s, sv)| (s, rank_with_scale(sv, tol, scale)))
        .collect())
}

/// `d^S = Σ_{s ∈ S} rank(gamma(s,a0;s') - gamma(s,a;s'))`.
pub fn gamma_affine_rank(gamma: &EmpiricalKernel, support: &SupportSet, a0: usize, tol: f64) -> Result<usize> {
    Ok(gamma_affine_ranks(gamma, support, a0, tol)?.iter().map(|(_, r)| r).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{behavior_map, Step, StochasticKernel};
    use crate::rng;
    use proptest::prelude::*;

    fn random_system(seed: u64, n_w: usize, n_s: usize, n_a: usize) -> SmlSystem {
        let mut r = rng::stream(seed, 50);
        let beta = StochasticKernel::random(n_w, n_s, &mut r).unwrap();
        let alpha = StochasticKernel::random(n_w * n_a, n_w, &mut r).unwrap();
        let mut init = vec![0.0; n_w];
        init[0] = 1.0;
        SmlSystem::new(beta, alpha, init).unwrap()
    }

    fn switch_system() -> SmlSystem {
        // beta identity, alpha(w, a; .) = delta_a
        let beta = StochasticKernel::deterministic(&[0, 1], 2).unwrap();
        let alpha = StochasticKernel::deterministic(&[0, 1, 0, 1], 2).unwrap();
        SmlSystem::new(beta, alpha, vec![1.0, 0.0]).unwrap()
    }

    fn action_independent(seed: u64) -> SmlSystem {
        let mut r = rng::stream(seed, 51);
        let beta = StochasticKernel::random(3, 3, &mut r).unwrap();
        let base = StochasticKernel::random(3, 3, &mut r).unwrap();
        let rows: Vec<Vec<f64>> = (0..3).flat_map(|w| vec![base.row(w).to_vec(); 2]).collect();
        SmlSystem::new(beta, StochasticKernel::from_rows(&rows).unwrap(), vec![1.0, 0.0, 0.0]).unwrap()
    }

    fn constant_plus_switch(n_s: usize, n_a: usize, a0: usize, s: usize, a: usize) -> StochasticKernel {
        let mut map = vec![a0; n_s];
        map[s] = a;
        StochasticKernel::deterministic(&map, n_a).unwrap()
    }

    #[test]
    fn action_independent_world_has_zero_images() {
        let sys = action_independent(1);
        let b = basis_images(&sys, 0).unwrap();
        assert_eq!(b.pairs.len(), 3);
        assert!(b.rows.iter().all(|&x| x == 0.0));
        let rep = embodied_dimension(&sys, EXACT_RANK_TOL).unwrap();
        assert_eq!(rep.d, 0);
        assert_eq!(rep.rank_alpha, 0);
    }

    #[test]
    fn switch_system_images_match_deterministic_policies() {
        let sys = switch_system();
        let b = basis_images(&sys, 0).unwrap();
        for (i, &(s, a)) in b.pairs.iter().enumerate() {
            let base = behavior_map(&sys, &StochasticKernel::deterministic(&[0, 0], 2).unwrap()).unwrap();
            let alt = behavior_map(&sys, &constant_plus_switch(2, 2, 0, s, a)).unwrap();
            let oracle: Vec<f64> = base.probs().iter().zip(alt.probs()).map(|(x, y)| x - y).collect();
            assert_eq!(b.row(i), oracle);
        }
        // rows are +/- indicator differences
        assert_eq!(b.row(0), vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(b.row(1), vec![0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn switch_system_dimension_is_full() {
        // brute-force rank of the 2x4 image matrix above: two non-overlapping
        // supports, so rank 2
        let rep = embodied_dimension(&switch_system(), EXACT_RANK_TOL).unwrap();
        assert_eq!(rep.d, 2);
        assert_eq!(rep.rank_beta, 2);
        assert_eq!(rep.rank_alpha, 1);
        assert_eq!(rep.upper_bound, 2);
    }

    #[test]
    fn images_match_behavior_differences_on_random_systems() {
        for seed in 0..20 {
            let (n_w, n_s, n_a) = (2 + seed as usize % 3, 1 + seed as usize % 4, 2 + seed as usize % 3);
            let sys = random_system(seed, n_w, n_s, n_a);
            let a0 = seed as usize % n_a;
            let b = basis_images(&sys, a0).unwrap();
            let base = behavior_map(&sys, &StochasticKernel::deterministic(&vec![a0; n_s], n_a).unwrap()).unwrap();
            for (i, &(s, a)) in b.pairs.iter().enumerate() {
                let alt = behavior_map(&sys, &constant_plus_switch(n_s, n_a, a0, s, a)).unwrap();
                let oracle: Vec<f64> = base.probs().iter().zip(alt.probs()).map(|(x, y)| x - y).collect();
                assert!(linalg::max_abs_diff(&b.row(i), &oracle) <= 1e-13);
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        let sys = switch_system();
        assert!(basis_images(&sys, 2).is_err());
        assert!(embodied_dimension(&sys, 0.0).is_err());
        assert!(restricted_dimension(&sys, &[], 1e-9).is_err());
        assert!(restricted_dimension(&sys, &[5], 1e-9).is_err());
    }

    #[test]
    fn restriction_to_all_worlds_is_the_full_dimension() {
        for seed in 0..10 {
            let sys = random_system(seed, 4, 3, 3);
            let all: Vec<usize> = (0..4).collect();
            let (sup, d) = restricted_dimension(&sys, &all, EXACT_RANK_TOL).unwrap();
            assert_eq!(d, embodied_dimension(&sys, EXACT_RANK_TOL).unwrap().d);
            assert_eq!(sup.sensor_indices, vec![0, 1, 2]);
        }
    }

    #[test]
    fn single_sensor_restriction() {
        let mut r = rng::stream(3, 0);
        let beta = StochasticKernel::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.5, 0.0, 0.5], vec![0.2, 0.3, 0.5]]).unwrap();
        let alpha = StochasticKernel::random(3 * 4, 3, &mut r).unwrap();
        let sys = SmlSystem::new(beta, alpha, vec![1.0, 0.0, 0.0]).unwrap();
        let (sup, d) = restricted_dimension(&sys, &[0], EXACT_RANK_TOL).unwrap();
        assert_eq!(sup.sensor_indices, vec![1]);
        assert!(d <= 3);
    }

    #[test]
    fn support_point_mass() {
        for f in [0.1, 0.8, 1.0] {
            let s = estimate_support(&[0, 12, 0, 0], f).unwrap();
            assert_eq!(s.sensor_indices, vec![1]);
            assert_eq!(s.kept_mass, 1.0);
        }
    }

    #[test]
    fn support_prefix_exactly_at_threshold() {
        let s = estimate_support(&[50, 30, 15, 5], 0.8).unwrap();
        assert_eq!(s.sensor_indices, vec![0, 1]);
        assert!((s.kept_mass - 0.8).abs() < 1e-15);
        // order by frequency, not index
        let s = estimate_support(&[5, 30, 15, 50], 0.8).unwrap();
        assert_eq!(s.sensor_indices, vec![1, 3]);
    }

    #[test]
    fn support_full_fraction_keeps_all_observed() {
        let s = estimate_support(&[3, 0, 1, 7], 1.0).unwrap();
        assert_eq!(s.sensor_indices, vec![0, 2, 3]);
    }

    #[test]
    fn support_ties_prefer_lower_index() {
        let s = estimate_support(&[10, 10, 10, 10], 0.5).unwrap();
        assert_eq!(s.sensor_indices, vec![0, 1]);
    }

    #[test]
    fn support_errors() {
        assert!(estimate_support(&[0, 0], 0.8).is_err());
        assert!(estimate_support(&[], 0.8).is_err());
        assert!(estimate_support(&[1], 0.0).is_err());
        assert!(estimate_support(&[1], 1.5).is_err());
    }

    fn traj(steps: &[(usize, usize)]) -> Trajectory {
        Trajectory {
            seed: 0,
            steps: steps.iter().map(|&(s, a)| Step { w: s, s, a }).collect(),
            final_world: 0,
        }
    }

    #[test]
    fn gamma_single_transition() {
        let t = traj(&[(1, 0), (2, 1)]);
        let g = estimate_gamma(&t, &SupportSet::full(3), 3, 2).unwrap();
        let nonzero: Vec<usize> = (0..6).filter(|&r| !g.is_zero_row(r)).collect();
        assert_eq!(nonzero, vec![2]);
        assert_eq!(g.row(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn gamma_from_deterministic_data_is_indicator() {
        // s' = (s + a) mod 3
        let mut steps = Vec::new();
        let mut s = 0;
        for t in 0..200 {
            let a = (t / 3) % 2;
            steps.push((s, a));
            s = (s + a) % 3;
        }
        let g = estimate_gamma(&traj(&steps), &SupportSet::full(3), 3, 2).unwrap();
        for r in 0..6 {
            if !g.is_zero_row(r) {
                assert!(g.row(r).iter().all(|&p| p == 0.0 || p == 1.0));
                let (s, a) = (r / 2, r % 2);
                assert_eq!(g.get(r, (s + a) % 3), 1.0);
            }
        }
    }

    #[test]
    fn gamma_skips_states_outside_support() {
        let t = traj(&[(0, 0), (1, 0), (0, 1), (1, 1)]);
        let sup = SupportSet { sensor_indices: vec![1], kept_mass: 0.5 };
        let g = estimate_gamma(&t, &sup, 2, 2).unwrap();
        assert!(g.is_zero_row(0) && g.is_zero_row(1));
        assert_eq!(g.row(2), &[1.0, 0.0]);
        let empty = SupportSet { sensor_indices: vec![], kept_mass: 0.0 };
        assert!(estimate_gamma(&t, &empty, 2, 2).is_err());
        assert!(estimate_gamma(&traj(&[(0, 0)]), &sup, 2, 2).is_err());
    }

    #[test]
    fn gamma_rank_of_action_independent_model_is_zero() {
        let rows = vec![vec![0.2, 0.3, 0.5]; 6];
        let g: EmpiricalKernel = StochasticKernel::from_rows(&rows).unwrap().into();
        assert_eq!(gamma_affine_rank(&g, &SupportSet::full(3), 0, EMPIRICAL_RANK_TOL).unwrap(), 0);
    }

    #[test]
    fn gamma_rank_ignores_noise_below_global_scale() {
        // state 0 has a real action effect, state 1 only a tiny perturbation
        let rows = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![0.51, 0.49],
        ];
        let g: EmpiricalKernel = StochasticKernel::from_rows(&rows).unwrap().into();
        let ranks = gamma_affine_ranks(&g, &SupportSet::full(2), 0, 0.05).unwrap();
        assert_eq!(ranks, vec![(0, 1), (1, 0)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn dimension_respects_rank_product_bound(seed in any::<u64>(), n_w in 1usize..6, n_s in 1usize..6, n_a in 1usize..6) {
            let sys = random_system(seed, n_w, n_s, n_a);
            let rep = embodied_dimension(&sys, EXACT_RANK_TOL).unwrap();
            prop_assert!(rep.d <= rep.upper_bound);
            prop_assert!(rep.d <= n_s * (n_a - 1));
        }

        #[test]
        fn dimension_independent_of_reference_action(seed in any::<u64>(), n_w in 1usize..5, n_s in 1usize..5, n_a in 2usize..5) {
            let sys = random_system(seed, n_w, n_s, n_a);
            let d0 = embodied_dimension_with(&sys, 0, EXACT_RANK_TOL).unwrap().d;
            for a0 in 1..n_a {
                prop_assert_eq!(embodied_dimension_with(&sys, a0, EXACT_RANK_TOL).unwrap().d, d0);
            }
        }

        #[test]
        fn restriction_never_increases_dimension(seed in any::<u64>(), mask in 1u32..31) {
            let sys = random_system(seed, 5, 4, 3);
            let subset: Vec<usize> = (0..5).filter(|w| mask & (1 << w) != 0).collect();
            let (_, ds) = restricted_dimension(&sys, &subset, EXACT_RANK_TOL).unwrap();
            let d = embodied_dimension(&sys, EXACT_RANK_TOL).unwrap().d;
            prop_assert!(ds <= d);
        }

        #[test]
        fn support_is_monotone_in_keep_fraction(hist in proptest::collection::vec(0u64..50, 1..12), f1 in 0.01f64..=1.0, f2 in 0.01f64..=1.0) {
            prop_assume!(hist.iter().sum::<u64>() > 0);
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            let a = estimate_support(&hist, lo).unwrap();
            let b = estimate_support(&hist, hi).unwrap();
            prop_assert!(a.len() <= b.len());
            prop_assert!(a.sensor_indices.iter().all(|s| b.contains(*s)));
            prop_assert!(b.kept_mass >= hi - 1e-12);
        }

        #[test]
        fn small_perturbations_keep_the_rank(seed in any::<u64>()) {
            let sys = random_system(seed, 3, 2, 3);
            let b = basis_images(&sys, 0).unwrap();
            let sv = singular_values(&b.rows);
            let d = rank_from_singular_values(&sv, EXACT_RANK_TOL);
            // skip badly conditioned draws
            prop_assume!(sv[d - 1] > 1e-3 * sv[0]);
            let mut r = rng::stream(seed, 52);
            let eps = EXACT_RANK_TOL * sv[0] / 10.0;
            let noisy = b.rows.map(|x| {
                use rand::Rng;
                x + eps * (2.0 * r.random::<f64>() - 1.0) / (b.rows.len() as f64).sqrt()
            });
            prop_assert_eq!(linalg::numerical_rank(&noisy, EXACT_RANK_TOL), d);
        }
    }
}
