use super::code::{bits_to_index, index_to_bits};
use super::inference::{exact_conditional, gibbs_sample_with};
use super::CrbmParams;
use crate::error::{Error, Result};
use crate::kernels::{ActionSampler, StochasticKernel};
use crate::rng::SmlRng;

/// A CRBM acting as a policy on integer sensor and actuator states. Sensor
/// `s` is fed as the binary code of `s`; an output code `x` selects action
/// `index(x) mod |A|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbmPolicy {
    pub params: CrbmParams,
    pub n_actuator: usize,
    pub sweeps: usize,
}

impl CrbmPolicy {
    pub fn new(params: CrbmParams, n_actuator: usize, sweeps: usize) -> Result<Self> {
        params.validate()?;
        if n_actuator == 0 || sweeps == 0 {
            return Err(Error::config("need at least one action and one Gibbs sweep"));
        }
        Ok(CrbmPolicy { params, n_actuator, sweeps })
    }

    pub fn input_bits(&self, sensor: usize) -> Vec<u8> {
        index_to_bits(sensor, self.params.k)
    }

    pub fn action_of(&self, x: &[u8]) -> usize {
        bits_to_index(x) % self.n_actuator
    }

    /// The exact policy kernel implied by the conditionals (infinitely many
    /// sweeps).
    pub fn exact_policy(&self, n_sensor: usize) -> Result<StochasticKernel> {
        let mut probs = vec![0.0; n_sensor * self.n_actuator];
        for s in 0..n_sensor {
            let q = exact_conditional(&self.params, &self.input_bits(s))?;
            for (idx, p) in q.into_iter().enumerate() {
                probs[s * self.n_actuator + idx % self.n_actuator] += p;
            }
        }
        StochasticKernel::with_tolerance(n_sensor, self.n_actuator, probs, 1e-9)
    }
}

impl ActionSampler for CrbmPolicy {
    fn sample_action(&self, sensor: usize, rng: &mut SmlRng) -> usize {
        let y = self.input_bits(sensor);
        let x = gibbs_sample_with(&self.params, &y, self.sweeps, rng).expect("sensor codes match the input width");
        self.action_of(&x)
    }
}
