//! End-to-end experiment: collect exploration data, prune the sensor
//! support, estimate the internal world model and its affine rank, derive
//! the hidden-unit bound, then scan CRBM policies of increasing size and
//! score them in closed loop.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior_dim::{
    estimate_gamma, estimate_support, gamma_affine_ranks, SupportSet, EMPIRICAL_RANK_TOL,
};
use crate::crbm::{
    bound_embodied, cd_train, construct_sparse_crbm, index_to_bits, support_points_from_policy, CrbmParams,
    CrbmPolicy, TrainConfig, TrainingData,
};
use crate::error::{Error, Result};
use crate::kernels::{load_kernel, load_system, simulate_with, ActionSampler, SmlSystem, StochasticKernel, Trajectory};
use crate::rng::{self, streams};
use crate::worlds::{make_cyclic_walker, walker_performance, CyclicWalkerConfig, WalkerSystem};

/// Where the loop comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldSource {
    Walker(CyclicWalkerConfig),
    File { system: PathBuf, reference_policy: Option<PathBuf> },
}

/// Inclusive range of hidden-unit counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MRange {
    pub start: usize,
    pub end: usize,
}

impl MRange {
    /// Parses `a..b` (inclusive) or a single count.
    pub fn parse(text: &str) -> Result<Self> {
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::config(format!("bad m range '{text}': {e}")));
        let r = match text.split_once("..") {
            Some((a, b)) => MRange { start: parse(a)?, end: parse(b.trim_start_matches('='))? },
            None => {
                let v = parse(text)?;
                MRange { start: v, end: v }
            }
        };
        if r.start > r.end {
            return Err(Error::config(format!("empty m range '{text}'")));
        }
        Ok(r)
    }

    pub fn values(&self) -> impl Iterator<Item = usize> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSource,
    /// Exploration steps for support and world-model estimation.
    pub data_steps: usize,
    /// Demonstration steps of the reference policy used for training.
    pub train_steps: usize,
    pub keep_fraction: f64,
    /// Weight of the uniform policy in the exploration mixture.
    pub exploration: f64,
    pub rank_tol: f64,
    /// Defaults to `1..=2·m_bound` when absent.
    pub m_range: Option<MRange>,
    pub restarts: usize,
    pub evals_per_model: usize,
    pub eval_steps: usize,
    pub gibbs_sweeps: usize,
    pub init_weight_sd: f64,
    pub construct_sharpness: f64,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldSource::Walker(CyclicWalkerConfig::default()),
            data_steps: 20_000,
            train_steps: 10_000,
            keep_fraction: 0.8,
            exploration: 0.2,
            rank_tol: EMPIRICAL_RANK_TOL,
            m_range: None,
            restarts: 20,
            evals_per_model: 10,
            eval_steps: 600,
            gibbs_sweeps: 10,
            init_weight_sd: 0.01,
            construct_sharpness: 100.0,
            train: TrainConfig { epochs: 20, weight_cost: 1e-4, ..TrainConfig::default() },
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale walker run: every phase is kept since the phase histogram
    /// is flat.
    pub fn walker_preset() -> Self {
        ExperimentConfig { keep_fraction: 1.0, ..Default::default() }
    }

    /// Full-scale protocol counts.
    pub fn full_scale(mut self) -> Self {
        self.data_steps = 100_000;
        self.train_steps = 10_000;
        self.m_range = Some(MRange { start: 1, end: 100 });
        self.restarts = 100;
        self.evals_per_model = 10;
        self.train = TrainConfig { seed: self.train.seed, ..TrainConfig::default() };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_steps < 2 || self.train_steps == 0 || self.eval_steps == 0 {
            return Err(Error::config("data_steps, train_steps and eval_steps must be positive"));
        }
        if self.restarts == 0 || self.evals_per_model == 0 || self.gibbs_sweeps == 0 {
            return Err(Error::config("restarts, evals_per_model and gibbs_sweeps must be positive"));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::config(format!("keep_fraction {} not in (0, 1]", self.keep_fraction)));
        }
        if !(0.0..=1.0).contains(&self.exploration) {
            return Err(Error::config("exploration must lie in [0, 1]"));
        }
        if !(self.rank_tol > 0.0) || !(self.construct_sharpness > 0.0) || !(self.init_weight_sd >= 0.0) {
            return Err(Error::config("rank_tol and construct_sharpness must be positive"));
        }
        if let WorldSource::Walker(w) = &self.world {
            w.validate()?;
        }
        self.train.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A loop ready for experiments, with its reference behavior.
#[derive(Debug, Clone)]
pub struct World {
    pub sys: SmlSystem,
    pub reference: StochasticKernel,
    pub walker: Option<WalkerSystem>,
}

impl World {
    pub fn load(source: &WorldSource) -> Result<Self> {
        match source {
            WorldSource::Walker(cfg) => {
                let w = make_cyclic_walker(cfg)?;
                Ok(World { sys: w.sml.clone(), reference: w.scripted_policy.clone(), walker: Some(w) })
            }
            WorldSource::File { system, reference_policy } => {
                let sys = load_system(system)?;
                let reference = match reference_policy {
                    Some(p) => load_kernel(p)?,
                    None => StochasticKernel::uniform(sys.n_sensor(), sys.n_actuator())?,
                };
                if reference.domain() != sys.n_sensor() || reference.codomain() != sys.n_actuator() {
                    return Err(Error::config("reference policy does not match the system"));
                }
                Ok(World { sys, reference, walker: None })
            }
        }
    }

    pub fn exploration_policy(&self, epsilon: f64) -> Result<StochasticKernel> {
        let uniform = StochasticKernel::uniform(self.sys.n_sensor(), self.sys.n_actuator())?;
        self.reference.mix(&uniform, 1.0 - epsilon)
    }

    /// Input and output widths of a CRBM policy for this loop.
    pub fn code_widths(&self) -> (usize, usize) {
        (bits_for(self.sys.n_sensor()), bits_for(self.sys.n_actuator()).max(1))
    }

    fn walker(&self) -> Result<&WalkerSystem> {
        self.walker.as_ref().ok_or_else(|| Error::config("closed-loop scoring needs a walker world"))
    }
}

/// Bits needed to give each of `count` states its own code.
pub fn bits_for(count: usize) -> usize {
    (usize::BITS - count.saturating_sub(1).leading_zeros()) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportStage {
    pub histogram: Vec<u64>,
    pub support: SupportSet,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

pub fn run_support_stage(cfg: &ExperimentConfig, world: &World) -> Result<SupportStage> {
    let explore = world.exploration_policy(cfg.exploration)?;
    let mut r = rng::stream(cfg.seed, streams::SUPPORT_DATA);
    let traj = simulate_with(&world.sys, &explore, cfg.data_steps, &mut r, cfg.seed)?;
    let histogram = traj.sensor_histogram(world.sys.n_sensor());
    let support = estimate_support(&histogram, cfg.keep_fraction)?;
    Ok(SupportStage { histogram, support, trajectory: Some(traj) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionStage {
    pub support_cardinality: usize,
    pub d_s: usize,
    /// `(s, rank)` contribution of each support state.
    pub per_state: Vec<(usize, usize)>,
    pub m_bound: u64,
    /// Rows `s·|A| + a` of the estimated world model on the support.
    pub gamma: Vec<Vec<f64>>,
}

pub fn run_dimension_stage(cfg: &ExperimentConfig, world: &World, support: &SupportStage) -> Result<DimensionStage> {
    let traj = match &support.trajectory {
        Some(t) => t.clone(),
        None => run_support_stage(cfg, world)?.trajectory.expect("support stage records its run"),
    };
    let (n_s, n_a) = (world.sys.n_sensor(), world.sys.n_actuator());
    let gamma = estimate_gamma(&traj, &support.support, n_s, n_a)?;
    let per_state = gamma_affine_ranks(&gamma, &support.support, 0, cfg.rank_tol)?;
    let d_s: usize = per_state.iter().map(|(_, r)| r).sum();
    let m_bound = bound_embodied(support.support.len() as u64, d_s as u64)?;
    let rows = support
        .support
        .sensor_indices
        .iter()
        .flat_map(|&s| (0..n_a).map(move |a| s * n_a + a))
        .map(|row| gamma.row(row).to_vec())
        .collect();
    Ok(DimensionStage { support_cardinality: support.support.len(), d_s, per_state, m_bound, gamma: rows })
}

/// Demonstration pairs from the reference policy, encoded as bit vectors.
pub fn training_data(cfg: &ExperimentConfig, world: &World) -> Result<TrainingData> {
    let mut r = rng::stream(cfg.seed, streams::TRAIN_DATA);
    let traj = simulate_with(&world.sys, &world.reference, cfg.train_steps, &mut r, cfg.seed)?;
    let (k, n) = world.code_widths();
    Ok(TrainingData::Binary(traj.steps.iter().map(|st| (index_to_bits(st.s, k), index_to_bits(st.a, n))).collect()))
}

fn evaluate<P: ActionSampler + ?Sized>(
    world: &World,
    policy: &P,
    cfg: &ExperimentConfig,
    keys: &[u64],
) -> Result<Vec<i64>> {
    let walker = world.walker()?;
    (0..cfg.evals_per_model as u64)
        .map(|e| {
            let mut k = keys.to_vec();
            k.push(e);
            let mut r = rng::substream(cfg.seed, streams::CRBM_EVAL, &k);
            let traj = simulate_with(&world.sys, policy, cfg.eval_steps, &mut r, cfg.seed)?;
            Ok(walker_performance(&traj, walker))
        })
        .collect()
}

/// Mean closed-loop distance of the reference policy.
pub fn baseline_distance(cfg: &ExperimentConfig, world: &World) -> Result<f64> {
    let d = evaluate(world, &world.reference, cfg, &[u64::MAX])?;
    Ok(mean(&d))
}

fn mean(xs: &[i64]) -> f64 {
    xs.iter().sum::<i64>() as f64 / xs.len() as f64
}

fn std_dev(xs: &[i64]) -> f64 {
    let mu = mean(xs);
    (xs.iter().map(|&x| (x as f64 - mu).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructedCheck {
    pub m: usize,
    pub sharpness: f64,
    pub distances: Vec<i64>,
    pub mean: f64,
    pub baseline: f64,
    pub ratio: f64,
}

/// Scores the CRBM built directly from the reference policy's support.
pub fn run_constructed_check(cfg: &ExperimentConfig, world: &World, support: &SupportSet) -> Result<ConstructedCheck> {
    let (k, n) = world.code_widths();
    let points = support_points_from_policy(&world.reference, &support.sensor_indices, k, n)?;
    let params = construct_sparse_crbm(&points, cfg.construct_sharpness)?;
    let m = params.m;
    let policy = CrbmPolicy::new(params, world.sys.n_actuator(), cfg.gibbs_sweeps)?;
    let distances = evaluate(world, &policy, cfg, &[u64::MAX - 1])?;
    let baseline = baseline_distance(cfg, world)?;
    let mu = mean(&distances);
    let ratio = if baseline > 0.0 { mu / baseline } else { f64::NAN };
    Ok(ConstructedCheck { m, sharpness: cfg.construct_sharpness, distances, mean: mu, baseline, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub m: usize,
    /// `None` when every restart diverged.
    pub best: Option<i64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub diverged: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub support_cardinality: usize,
    pub d_s: usize,
    pub m_bound: u64,
    pub baseline: f64,
    pub rows: Vec<ScanRow>,
}

impl ScanReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,best,mean,std\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let best = r.best.map(|b| b.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.m, best, opt(r.mean), opt(r.std)).expect("writing to a string");
        }
        out
    }
}

/// Trains `restarts` CRBMs per hidden-unit count and scores each in closed
/// loop. Cells run in parallel; each owns a stream keyed by `(m, restart)`.
pub fn run_scan_stage(
    cfg: &ExperimentConfig,
    world: &World,
    data: &TrainingData,
    dims: &DimensionStage,
    m_range: MRange,
) -> Result<ScanReport> {
    world.walker()?;
    let (k, n) = world.code_widths();
    let cells: Vec<(usize, usize)> = m_range.values().flat_map(|m| (0..cfg.restarts).map(move |r| (m, r))).collect();
    let results: Vec<Result<Option<Vec<i64>>>> = cells
        .par_iter()
        .map(|&(m, r)| {
            let keys = [m as u64, r as u64];
            let mut init_rng = rng::substream(cfg.seed, streams::CRBM_TRAIN, &keys);
            let init = CrbmParams::random(k, n, m, cfg.init_weight_sd, &mut init_rng)?;
            let train = TrainConfig { seed: init_rng.next_u64(), ..cfg.train.clone() };
            match cd_train(&init, data, &train) {
                Ok(params) => {
                    let policy = CrbmPolicy::new(params, world.sys.n_actuator(), cfg.gibbs_sweeps)?;
                    Ok(Some(evaluate(world, &policy, cfg, &keys)?))
                }
                Err(Error::Numeric(msg)) => {
                    log::warn!("m={m} restart={r}: {msg}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut it = cells.iter().zip(results);
    for m in m_range.values() {
        let mut all = Vec::new();
        let mut diverged = 0;
        for _ in 0..cfg.restarts {
            let (&(cm, _), res) = it.next().expect("one result per cell");
            debug_assert_eq!(cm, m);
            match res? {
                Some(d) => all.extend(d),
                None => diverged += 1,
            }
        }
        let (best, mu, sd) = if all.is_empty() {
            (None, None, None)
        } else {
            (all.iter().copied().max(), Some(mean(&all)), Some(std_dev(&all)))
        };
        rows.push(ScanRow { m, best, mean: mu, std: sd, diverged, evaluations: all.len() });
    }
    Ok(ScanReport {
        support_cardinality: dims.support_cardinality,
        d_s: dims.d_s,
        m_bound: dims.m_bound,
        baseline: baseline_distance(cfg, world)?,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub n_world: usize,
    pub n_sensor: usize,
    pub n_actuator: usize,
    pub support: SupportStage,
    pub dimension: DimensionStage,
    /// Exact structural dimension, when the world is a walker.
    pub symbolic_dimension: Option<usize>,
    pub constructed: Option<ConstructedCheck>,
    pub scan: Option<ScanReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// Runs every stage. Closed-loop stages are skipped for worlds without a
/// performance measure.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let world = World::load(&cfg.world)?;
    let support = run_support_stage(cfg, &world)?;
    let dimension = run_dimension_stage(cfg, &world, &support)?;
    let (constructed, scan) = if world.walker.is_some() {
        let constructed = run_constructed_check(cfg, &world, &support.support)?;
        let m_range = cfg.m_range.unwrap_or(MRange { start: 1, end: (2 * dimension.m_bound as usize).max(1) });
        let data = training_data(cfg, &world)?;
        (Some(constructed), Some(run_scan_stage(cfg, &world, &data, &dimension, m_range)?))
    } else {
        (None, None)
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        n_world: world.sys.n_world(),
        n_sensor: world.sys.n_sensor(),
        n_actuator: world.sys.n_actuator(),
        symbolic_dimension: world.walker.as_ref().map(|w| w.symbolic_dimension()),
        support,
        dimension,
        constructed,
        scan,
    })
}

#[cfg(test)]
mod tests;
