//! Built-in loop instances: a cyclic walker with a scripted gait and random
//! systems with prescribed kernel ranks.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::behavior_dim::{alpha_affine_rank, beta_rank, EXACT_RANK_TOL};
use crate::error::{Error, Result};
use crate::kernels::{random_simplex_point, SmlSystem, StochasticKernel, Trajectory};
use crate::rng::{self, streams};

/// A walker whose body cycles through `phases` joint configurations. The
/// phase is observed directly; the position on a circular track of
/// `track_length` cells is hidden and advances by one stride every time the
/// phase wraps from the last phase back to phase 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicWalkerConfig {
    pub phases: usize,
    pub actions: usize,
    pub track_length: usize,
    /// Action that advances each phase; defaults to `phase mod actions`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait: Option<Vec<usize>>,
    #[serde(default)]
    pub slip_prob: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CyclicWalkerConfig {
    fn default() -> Self {
        CyclicWalkerConfig { phases: 6, actions: 3, track_length: 100, gait: None, slip_prob: 0.0, seed: 0 }
    }
}

impl CyclicWalkerConfig {
    pub fn gait(&self) -> Vec<usize> {
        match &self.gait {
            Some(g) => g.clone(),
            None => (0..self.phases).map(|p| p % self.actions.max(1)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases < 2 || self.actions < 2 || self.track_length < 2 {
            return Err(Error::config("phases, actions and track_length must each be at least 2"));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::config(format!("slip_prob {} not in [0, 1)", self.slip_prob)));
        }
        let gait = self.gait();
        if gait.len() != self.phases {
            return Err(Error::config(format!("gait has {} entries for {} phases", gait.len(), self.phases)));
        }
        if let Some(&a) = gait.iter().find(|&&a| a >= self.actions) {
            return Err(Error::config(format!("gait action {a} out of range {}", self.actions)));
        }
        self.phases
            .checked_mul(self.track_length)
            .and_then(|w| w.checked_mul(self.actions))
            .ok_or_else(|| Error::Capacity("walker state space too large".into()))?;
        Ok(())
    }

    /// Parses `P=6,A=3,L=100[,slip=0.1][,seed=7]`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let mut cfg = CyclicWalkerConfig::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("expected key=value, got '{part}'")))?;
            let int = || value.parse::<usize>().map_err(|e| Error::config(format!("{key}: {e}")));
            match key {
                "P" | "phases" => cfg.phases = int()?,
                "A" | "actions" => cfg.actions = int()?,
                "L" | "track_length" => cfg.track_length = int()?,
                "slip" | "slip_prob" => {
                    cfg.slip_prob = value.parse().map_err(|e| Error::config(format!("{key}: {e}")))?
                }
                "seed" => cfg.seed = value.parse().map_err(|e| Error::config(format!("{key}: {e}")))?,
                _ => return Err(Error::config(format!("unknown walker field '{key}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The assembled walker with its ground-truth sensor dynamics and gait.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerSystem {
    pub config: CyclicWalkerConfig,
    pub sml: SmlSystem,
    /// Phase dynamics `(p, a) -> p'`, rows indexed `p * |A| + a`.
    pub alpha_s: StochasticKernel,
    pub scripted_policy: StochasticKernel,
    pub optimal_distance_per_cycle: u64,
}

impl WalkerSystem {
    #[inline]
    pub fn world_index(&self, phase: usize, position: usize) -> usize {
        phase * self.config.track_length + position
    }

    #[inline]
    pub fn position_of(&self, w: usize) -> usize {
        w % self.config.track_length
    }

    #[inline]
    pub fn phase_of(&self, w: usize) -> usize {
        w / self.config.track_length
    }

    /// Sum over phases of the number of distinct next-phase distributions
    /// the actions can produce, minus one per phase.
    pub fn symbolic_dimension(&self) -> usize {
        let (p_n, a_n) = (self.config.phases, self.config.actions);
        (0..p_n)
            .map(|p| {
                let mut distinct: Vec<&[f64]> = Vec::new();
                for a in 0..a_n {
                    let row = self.alpha_s.row(p * a_n + a);
                    if !distinct.contains(&row) {
                        distinct.push(row);
                    }
                }
                distinct.len() - 1
            })
            .sum()
    }

    /// Strides completed by the scripted gait in `steps` steps without slip.
    pub fn scripted_distance(&self, steps: usize) -> i64 {
        (steps / self.config.phases) as i64 * self.optimal_distance_per_cycle as i64
    }
}

/// Builds the walker from its factorized dynamics: the phase evolves by
/// `alpha_s`, and the position moves one cell exactly on the wrap from the
/// last phase to phase 0.
pub fn make_cyclic_walker(cfg: &CyclicWalkerConfig) -> Result<WalkerSystem> {
    cfg.validate()?;
    let (p_n, a_n, l_n) = (cfg.phases, cfg.actions, cfg.track_length);
    let gait = cfg.gait();
    let mut alpha_s = vec![0.0; p_n * a_n * p_n];
    for p in 0..p_n {
        for a in 0..a_n {
            let row = &mut alpha_s[(p * a_n + a) * p_n..(p * a_n + a + 1) * p_n];
            if a == gait[p] {
                row[(p + 1) % p_n] += 1.0 - cfg.slip_prob;
                row[p] += cfg.slip_prob;
            } else {
                row[p] = 1.0;
            }
        }
    }
    let alpha_s = StochasticKernel::new(p_n * a_n, p_n, alpha_s)?;

    let n_w = p_n * l_n;
    let mut beta = vec![0.0; n_w * p_n];
    let mut alpha = vec![0.0; n_w * a_n * n_w];
    for p in 0..p_n {
        for x in 0..l_n {
            let w = p * l_n + x;
            beta[w * p_n + p] = 1.0;
            for a in 0..a_n {
                let row = &mut alpha[(w * a_n + a) * n_w..(w * a_n + a + 1) * n_w];
                for (p2, &q) in alpha_s.row(p * a_n + a).iter().enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    let x2 = if p == p_n - 1 && p2 == 0 { (x + 1) % l_n } else { x };
                    row[p2 * l_n + x2] += q;
                }
            }
        }
    }
    let mut init = vec![0.0; n_w];
    init[0] = 1.0;
    let sml = SmlSystem::new(
        StochasticKernel::new(n_w, p_n, beta)?,
        StochasticKernel::new(n_w * a_n, n_w, alpha)?,
        init,
    )?;
    let scripted_policy = StochasticKernel::deterministic(&gait, a_n)?;
    Ok(WalkerSystem { config: cfg.clone(), sml, alpha_s, scripted_policy, optimal_distance_per_cycle: 1 })
}

/// Net forward strides over a trajectory, unwrapping the circular track.
pub fn walker_performance(traj: &Trajectory, walker: &WalkerSystem) -> i64 {
    let l = walker.config.track_length as i64;
    let mut worlds = traj.worlds().map(|w| walker.position_of(w) as i64);
    let Some(mut prev) = worlds.next() else {
        return 0;
    };
    let mut total = 0;
    for pos in worlds {
        let delta = (pos - prev).rem_euclid(l);
        total += if delta <= l / 2 { delta } else { delta - l };
        prev = pos;
    }
    total
}

/// Worlds reachable from the initial distribution under some action
/// sequence.
pub fn reachable_worlds(sys: &SmlSystem) -> Vec<usize> {
    let n_w = sys.n_world();
    let mut seen = vec![false; n_w];
    let mut queue: VecDeque<usize> = (0..n_w).filter(|&w| sys.init_world[w] > 0.0).collect();
    for &w in &queue {
        seen[w] = true;
    }
    while let Some(w) = queue.pop_front() {
        for a in 0..sys.n_actuator() {
            for (w2, &p) in sys.alpha_row(w, a).iter().enumerate() {
                if p > 0.0 && !seen[w2] {
                    seen[w2] = true;
                    queue.push_back(w2);
                }
            }
        }
    }
    (0..n_w).filter(|&w| seen[w]).collect()
}

fn stochastic_product(a: &StochasticKernel, b: &StochasticKernel) -> Result<StochasticKernel> {
    let am = DMatrix::from_row_slice(a.domain(), a.codomain(), a.probs());
    let bm = DMatrix::from_row_slice(b.domain(), b.codomain(), b.probs());
    let prod = am * bm;
    let probs: Vec<f64> = (0..prod.nrows()).flat_map(|i| prod.row(i).iter().copied().collect::<Vec<_>>()).collect();
    StochasticKernel::with_tolerance(a.domain(), b.codomain(), probs, 1e-10)
}

const RANDOM_SML_ATTEMPTS: u64 = 100;

/// A random loop whose sensor kernel has rank `rank_beta` and whose action
/// effects have affine rank `rank_alpha`. Ranks are verified numerically;
/// unlucky draws are retried from derived seeds.
pub fn make_random_sml(
    n_world: usize,
    n_sensor: usize,
    n_actuator: usize,
    rank_beta: usize,
    rank_alpha: usize,
    seed: u64,
) -> Result<SmlSystem> {
    if n_world == 0 || n_sensor == 0 || n_actuator == 0 {
        return Err(Error::config("state spaces must be non-empty"));
    }
    if rank_beta == 0 || rank_beta > n_world.min(n_sensor) {
        return Err(Error::config(format!("rank_beta {rank_beta} infeasible for {n_world}x{n_sensor}")));
    }
    let max_alpha = (n_actuator - 1).min(n_world * (n_world - 1));
    if rank_alpha > max_alpha {
        return Err(Error::config(format!("rank_alpha {rank_alpha} infeasible (at most {max_alpha})")));
    }
    for attempt in 0..RANDOM_SML_ATTEMPTS {
        let mut r = rng::substream(seed, streams::WORLD_GEN, &[attempt]);
        let m = StochasticKernel::random(n_world, rank_beta, &mut r)?;
        let q = StochasticKernel::random(rank_beta, n_sensor, &mut r)?;
        let beta = stochastic_product(&m, &q)?;

        let components: Vec<StochasticKernel> = (0..=rank_alpha)
            .map(|_| StochasticKernel::random(n_world, n_world, &mut r))
            .collect::<Result<_>>()?;
        let weights: Vec<Vec<f64>> = (0..n_actuator).map(|_| random_simplex_point(rank_alpha + 1, &mut r)).collect();
        let mut alpha = vec![0.0; n_world * n_actuator * n_world];
        for w in 0..n_world {
            for (a, lam) in weights.iter().enumerate() {
                let row = &mut alpha[(w * n_actuator + a) * n_world..(w * n_actuator + a + 1) * n_world];
                for (k, comp) in components.iter().enumerate() {
                    for (dst, &p) in row.iter_mut().zip(comp.row(w)) {
                        *dst += lam[k] * p;
                    }
                }
            }
        }
        let alpha = StochasticKernel::with_tolerance(n_world * n_actuator, n_world, alpha, 1e-10)?;
        let init = random_simplex_point(n_world, &mut r);
        let sys = SmlSystem::new(beta, alpha, init)?;
        let got = (beta_rank(&sys, EXACT_RANK_TOL), alpha_affine_rank(&sys, 0, EXACT_RANK_TOL));
        if got == (rank_beta, rank_alpha) {
            return Ok(sys);
        }
        log::debug!("random system attempt {attempt} reached ranks {got:?}, retrying");
    }
    Err(Error::Numeric(format!(
        "no draw reached ranks ({rank_beta}, {rank_alpha}) in {RANDOM_SML_ATTEMPTS} attempts"
    )))
}
