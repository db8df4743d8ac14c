//! Finite Markov kernels and the reactive sensorimotor loop.
//!
//! A loop is described by a sensor kernel `beta: W -> Δ_S`, a policy
//! `pi: S -> Δ_A` and a world kernel `alpha: W×A -> Δ_W`. All state spaces
//! are index sets `0..card`; kernels are dense row-major matrices. The world
//! kernel stores its rows in `(w, a)` order with `w` major, i.e. row
//! `w * |A| + a`.

mod io;

pub use io::{
    kernel_from_json, kernel_to_json, load_kernel, load_system, save_kernel, save_system,
    system_from_json, system_to_json, FILE_ROW_TOLERANCE,
};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SmlRng};

/// Row-sum tolerance for kernels built in memory.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// A named finite state set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub name: String,
    pub cardinality: usize,
}

impl StateSpace {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Result<Self> {
        if cardinality == 0 {
            return Err(Error::config("state space cardinality must be at least 1"));
        }
        Ok(Self { name: name.into(), cardinality })
    }
}

/// Row-stochastic matrix `domain × codomain`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel {
    domain: usize,
    codomain: usize,
    probs: Vec<f64>,
}

fn check_shape(domain: usize, codomain: usize, len: usize) -> Result<()> {
    if domain == 0 || codomain == 0 {
        return Err(Error::InvalidKernel("kernel dimensions must be positive".into()));
    }
    if len != domain * codomain {
        return Err(Error::InvalidKernel(format!(
            "expected {} entries for a {domain}x{codomain} kernel, got {len}",
            domain * codomain
        )));
    }
    Ok(())
}

fn check_rows(codomain: usize, probs: &[f64], tol: f64, allow_zero_rows: bool) -> Result<()> {
    for (row, chunk) in probs.chunks(codomain).enumerate() {
        if let Some(&bad) = chunk.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0 + tol) {
            return Err(Error::Row { row, msg: format!("entry {bad} outside [0, 1]") });
        }
        let sum: f64 = chunk.iter().sum();
        if allow_zero_rows && sum == 0.0 {
            continue;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::Row { row, msg: format!("row sums to {sum}") });
        }
    }
    Ok(())
}

impl StochasticKernel {
    /// Build from row-major entries; rows must sum to one within
    /// [`ROW_TOLERANCE`].
    pub fn new(domain: usize, codomain: usize, probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(domain, codomain, probs, ROW_TOLERANCE)
    }

    pub fn with_tolerance(domain: usize, codomain: usize, probs: Vec<f64>, tol: f64) -> Result<Self> {
        check_shape(domain, codomain, probs.len())?;
        check_rows(codomain, &probs, tol, false)?;
        Ok(Self { domain, codomain, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let domain = rows.len();
        let codomain = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != codomain) {
            return Err(Error::InvalidKernel("ragged rows".into()));
        }
        Self::new(domain, codomain, rows.concat())
    }

    pub fn uniform(domain: usize, codomain: usize) -> Result<Self> {
        Self::new(domain, codomain, vec![1.0 / codomain as f64; domain * codomain])
    }

    /// Deterministic kernel sending row `i` to `map[i]`.
    pub fn deterministic(map: &[usize], codomain: usize) -> Result<Self> {
        let mut probs = vec![0.0; map.len() * codomain];
        for (i, &j) in map.iter().enumerate() {
            if j >= codomain {
                return Err(Error::config(format!("target {j} out of range {codomain}")));
            }
            probs[i * codomain + j] = 1.0;
        }
        Self::new(map.len(), codomain, probs)
    }

    /// Rows drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(domain: usize, codomain: usize, rng: &mut R) -> Result<Self> {
        let mut probs = Vec::with_capacity(domain * codomain);
        for _ in 0..domain {
            probs.extend(random_simplex_point(codomain, rng));
        }
        Self::new(domain, codomain, probs)
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.codomain + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.codomain..(i + 1) * self.codomain]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.codomain)
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(Error::config("cannot mix kernels of different shapes"));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::config("mixing weight must lie in [0, 1]"));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Self::new(self.domain, self.codomain, probs)
    }

    /// Number of strictly positive entries in the given rows.
    pub fn nonzeros_in(&self, rows: &[usize]) -> usize {
        rows.iter().map(|&r| self.row(r).iter().filter(|&&p| p > 0.0).count()).sum()
    }

    /// Draw a column index from row `i`.
    pub fn sample_row<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        sample_categorical(self.row(i), rng)
    }
}

/// Kernel estimated from counts: rows either sum to one or are all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalKernel {
    domain: usize,
    codomain: usize,
    probs: Vec<f64>,
}

impl EmpiricalKernel {
    pub fn new(domain: usize, codomain: usize, probs: Vec<f64>) -> Result<Self> {
        check_shape(domain, codomain, probs.len())?;
        check_rows(codomain, &probs, ROW_TOLERANCE, true)?;
        Ok(Self { domain, codomain, probs })
    }

    /// Normalize each row of a count table; empty rows stay zero.
    pub fn from_counts(domain: usize, codomain: usize, counts: &[u64]) -> Result<Self> {
        check_shape(domain, codomain, counts.len())?;
        let mut probs = vec![0.0; counts.len()];
        for (out, row) in probs.chunks_mut(codomain).zip(counts.chunks(codomain)) {
            let total: u64 = row.iter().sum();
            if total > 0 {
                for (p, &c) in out.iter_mut().zip(row) {
                    *p = c as f64 / total as f64;
                }
            }
        }
        Self::new(domain, codomain, probs)
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.codomain + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.codomain..(i + 1) * self.codomain]
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row(i).iter().all(|&p| p == 0.0)
    }
}

impl From<StochasticKernel> for EmpiricalKernel {
    fn from(k: StochasticKernel) -> Self {
        Self { domain: k.domain, codomain: k.codomain, probs: k.probs }
    }
}

/// A finite reactive sensorimotor loop: the agent's fixed embodiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SmlSystem {
    pub world: StateSpace,
    pub sensor: StateSpace,
    pub actuator: StateSpace,
    pub beta: StochasticKernel,
    pub alpha: StochasticKernel,
    pub init_world: Vec<f64>,
}

impl SmlSystem {
    pub fn new(beta: StochasticKernel, alpha: StochasticKernel, init_world: Vec<f64>) -> Result<Self> {
        let n_w = beta.domain();
        let n_s = beta.codomain();
        if alpha.codomain() != n_w || alpha.domain() % n_w != 0 {
            return Err(Error::config(format!(
                "alpha is {}x{}, expected (|W|*|A|)x{n_w}",
                alpha.domain(),
                alpha.codomain()
            )));
        }
        let n_a = alpha.domain() / n_w;
        Self::from_parts(
            StateSpace::new("world", n_w)?,
            StateSpace::new("sensor", n_s)?,
            StateSpace::new("actuator", n_a)?,
            beta,
            alpha,
            init_world,
        )
    }

    pub fn from_parts(
        world: StateSpace,
        sensor: StateSpace,
        actuator: StateSpace,
        beta: StochasticKernel,
        alpha: StochasticKernel,
        init_world: Vec<f64>,
    ) -> Result<Self> {
        let (n_w, n_s, n_a) = (world.cardinality, sensor.cardinality, actuator.cardinality);
        if beta.domain() != n_w || beta.codomain() != n_s {
            return Err(Error::config(format!(
                "beta is {}x{}, expected {n_w}x{n_s}",
                beta.domain(),
                beta.codomain()
            )));
        }
        if alpha.domain() != n_w * n_a || alpha.codomain() != n_w {
            return Err(Error::config(format!(
                "alpha is {}x{}, expected {}x{n_w}",
                alpha.domain(),
                alpha.codomain(),
                n_w * n_a
            )));
        }
        if init_world.len() != n_w {
            return Err(Error::config("init_world length differs from |W|"));
        }
        if init_world.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("init_world entries must lie in [0, 1]"));
        }
        let s: f64 = init_world.iter().sum();
        if (s - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::config(format!("init_world sums to {s}")));
        }
        Ok(Self { world, sensor, actuator, beta, alpha, init_world })
    }

    pub fn n_world(&self) -> usize {
        self.world.cardinality
    }

    pub fn n_sensor(&self) -> usize {
        self.sensor.cardinality
    }

    pub fn n_actuator(&self) -> usize {
        self.actuator.cardinality
    }

    /// `alpha(w, a; w')`.
    #[inline]
    pub fn alpha_at(&self, w: usize, a: usize, w_next: usize) -> f64 {
        self.alpha.get(w * self.n_actuator() + a, w_next)
    }

    pub fn alpha_row(&self, w: usize, a: usize) -> &[f64] {
        self.alpha.row(w * self.n_actuator() + a)
    }

    pub(crate) fn check_policy(&self, pi: &StochasticKernel) -> Result<()> {
        if pi.domain() != self.n_sensor() || pi.codomain() != self.n_actuator() {
            return Err(Error::config(format!(
                "policy is {}x{}, expected {}x{}",
                pi.domain(),
                pi.codomain(),
                self.n_sensor(),
                self.n_actuator()
            )));
        }
        Ok(())
    }
}

/// The one-step joint mechanism `P(w; s, a, w')`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMechanism {
    n_world: usize,
    n_sensor: usize,
    n_actuator: usize,
    probs: Vec<f64>,
}

impl JointMechanism {
    #[inline]
    fn index(&self, w: usize, s: usize, a: usize, w_next: usize) -> usize {
        ((w * self.n_sensor + s) * self.n_actuator + a) * self.n_world + w_next
    }

    pub fn get(&self, w: usize, s: usize, a: usize, w_next: usize) -> f64 {
        self.probs[self.index(w, s, a, w_next)]
    }

    /// Entries of row `w`, ordered `(s, a, w')`.
    pub fn row(&self, w: usize) -> &[f64] {
        let len = self.n_sensor * self.n_actuator * self.n_world;
        &self.probs[w * len..(w + 1) * len]
    }

    /// Sum over `(s, a)`: the behavior kernel.
    pub fn marginalize(&self) -> Result<StochasticKernel> {
        let n_w = self.n_world;
        let mut out = vec![0.0; n_w * n_w];
        for w in 0..n_w {
            for s in 0..self.n_sensor {
                for a in 0..self.n_actuator {
                    for w2 in 0..n_w {
                        out[w * n_w + w2] += self.get(w, s, a, w2);
                    }
                }
            }
        }
        StochasticKernel::with_tolerance(n_w, n_w, out, 1e-10)
    }
}

/// `P(w; s, a, w') = beta(w; s) pi(s; a) alpha(w, a; w')`.
pub fn one_step_mechanism(sys: &SmlSystem, pi: &StochasticKernel) -> Result<JointMechanism> {
    sys.check_policy(pi)?;
    let (n_w, n_s, n_a) = (sys.n_world(), sys.n_sensor(), sys.n_actuator());
    let mut probs = Vec::with_capacity(n_w * n_s * n_a * n_w);
    for w in 0..n_w {
        for s in 0..n_s {
            let b = sys.beta.get(w, s);
            for a in 0..n_a {
                let ba = b * pi.get(s, a);
                probs.extend(sys.alpha_row(w, a).iter().map(|&p| ba * p));
            }
        }
    }
    Ok(JointMechanism { n_world: n_w, n_sensor: n_s, n_actuator: n_a, probs })
}

/// The one-step behavior `P^pi(w; w') = Σ_s Σ_a beta(w;s) pi(s;a) alpha(w,a;w')`.
///
/// Computed as `(beta · pi)(w; a)` followed by the `alpha` contraction.
pub fn behavior_map(sys: &SmlSystem, pi: &StochasticKernel) -> Result<StochasticKernel> {
    sys.check_policy(pi)?;
    let (n_w, n_s, n_a) = (sys.n_world(), sys.n_sensor(), sys.n_actuator());
    let mut out = vec![0.0; n_w * n_w];
    let mut act = vec![0.0; n_a];
    for w in 0..n_w {
        act.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n_s {
            let b = sys.beta.get(w, s);
            if b == 0.0 {
                continue;
            }
            for (a, x) in act.iter_mut().enumerate() {
                *x += b * pi.get(s, a);
            }
        }
        let row = &mut out[w * n_w..(w + 1) * n_w];
        for (a, &pa) in act.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (o, &p) in row.iter_mut().zip(sys.alpha_row(w, a)) {
                *o += pa * p;
            }
        }
    }
    StochasticKernel::with_tolerance(n_w, n_w, out, 1e-10)
}

/// Distribution of `w^t` for `t = 0..=horizon`, starting from `init`.
pub fn world_marginals(behavior: &StochasticKernel, init: &[f64], horizon: usize) -> Vec<Vec<f64>> {
    let n = behavior.codomain();
    let mut out = Vec::with_capacity(horizon + 1);
    let mut cur = init.to_vec();
    out.push(cur.clone());
    for _ in 0..horizon {
        let mut next = vec![0.0; n];
        for (w, &p) in cur.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (x, &q) in next.iter_mut().zip(behavior.row(w)) {
                *x += p * q;
            }
        }
        out.push(next.clone());
        cur = next;
    }
    out
}

/// One step `(w^t, s^t, a^t)` of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub w: usize,
    pub s: usize,
    pub a: usize,
}

/// A sampled run `w^0, s^0, a^0, w^1, …, a^{T-1}, w^T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<Step>,
    pub final_world: usize,
}

impl Trajectory {
    /// Successive world states including the final one.
    pub fn worlds(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.w).chain(std::iter::once(self.final_world))
    }

    /// Count of sensor states visited during the recorded steps.
    pub fn sensor_histogram(&self, n_sensor: usize) -> Vec<u64> {
        let mut h = vec![0; n_sensor];
        for st in &self.steps {
            h[st.s] += 1;
        }
        h
    }

    pub fn validate(&self, sys: &SmlSystem) -> Result<()> {
        let ok = self.steps.iter().all(|st| {
            st.w < sys.n_world() && st.s < sys.n_sensor() && st.a < sys.n_actuator()
        }) && self.final_world < sys.n_world();
        if ok {
            Ok(())
        } else {
            Err(Error::Parse("trajectory index outside the system's state spaces".into()))
        }
    }
}

/// Anything that can pick an action from a sensor reading.
pub trait ActionSampler {
    fn sample_action(&self, sensor: usize, rng: &mut SmlRng) -> usize;
}

impl ActionSampler for StochasticKernel {
    fn sample_action(&self, sensor: usize, rng: &mut SmlRng) -> usize {
        self.sample_row(sensor, rng)
    }
}

/// Run the loop for `steps` steps with an arbitrary action sampler.
pub fn simulate_with<P: ActionSampler + ?Sized>(
    sys: &SmlSystem,
    policy: &P,
    steps: usize,
    rng: &mut SmlRng,
    seed: u64,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::config("simulation needs at least one step"));
    }
    let mut w = sample_categorical(&sys.init_world, rng);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let s = sys.beta.sample_row(w, rng);
        let a = policy.sample_action(s, rng);
        if a >= sys.n_actuator() {
            return Err(Error::config(format!("policy produced action {a} out of range")));
        }
        out.push(Step { w, s, a });
        w = sample_categorical(sys.alpha_row(w, a), rng);
    }
    Ok(Trajectory { seed, steps: out, final_world: w })
}

/// Sample a `steps`-step trajectory; identical seeds give identical runs.
pub fn simulate(sys: &SmlSystem, pi: &StochasticKernel, steps: usize, seed: u64) -> Result<Trajectory> {
    sys.check_policy(pi)?;
    let mut rng = rng::stream(seed, rng::streams::SIMULATE);
    simulate_with(sys, pi, steps, &mut rng, seed)
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

pub(crate) fn random_simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    // force an exact row sum
    let head: f64 = v[..n - 1].iter().sum();
    v[n - 1] = (1.0 - head).max(0.0);
    v
}
