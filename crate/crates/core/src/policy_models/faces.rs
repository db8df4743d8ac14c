use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::StochasticKernel;

/// A face of the policy polytope: the product over sensor states of the
/// simplices spanned by the allowed actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FacePattern {
    pub n_actuator: usize,
    /// Sorted, non-empty action subsets, one per sensor state.
    pub allowed: Vec<Vec<usize>>,
}

impl FacePattern {
    pub fn dim(&self) -> usize {
        self.allowed.iter().map(|a| a.len() - 1).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.allowed.iter().map(Vec::len).product()
    }

    /// Deterministic policies that are vertices of this face, in
    /// lexicographic order of the chosen actions.
    pub fn vertices(&self) -> impl Iterator<Item = StochasticKernel> + '_ {
        let total = self.vertex_count();
        (0..total).map(move |mut idx| {
            let mut map = vec![0; self.allowed.len()];
            for (s, acts) in self.allowed.iter().enumerate().rev() {
                map[s] = acts[idx % acts.len()];
                idx /= acts.len();
            }
            StochasticKernel::deterministic(&map, self.n_actuator).expect("vertex actions are in range")
        })
    }

    pub fn contains(&self, pi: &StochasticKernel) -> bool {
        pi.rows()
            .zip(&self.allowed)
            .all(|(row, acts)| row.iter().enumerate().all(|(a, &p)| p == 0.0 || acts.contains(&a)))
    }
}

/// Lazily enumerates faces of a given dimension in lexicographic order of
/// their per-sensor subsets.
#[derive(Debug, Clone)]
pub struct FaceIter {
    n_sensor: usize,
    n_actuator: usize,
    dim: usize,
    /// All non-empty subsets of the actions, sorted lexicographically.
    subsets: Vec<Vec<usize>>,
    stack: Vec<usize>,
    used: usize,
    started: bool,
    done: bool,
}

fn nonempty_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u64..(1u64 << n))
        .map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

impl FaceIter {
    fn feasible(&self, pos: usize, k: usize) -> bool {
        let used = self.used + k;
        used <= self.dim && self.dim - used <= (self.n_sensor - pos - 1) * (self.n_actuator - 1)
    }

    fn push(&mut self, j: usize) {
        self.used += self.subsets[j].len() - 1;
        self.stack.push(j);
    }

    fn pop(&mut self) -> Option<usize> {
        let j = self.stack.pop()?;
        self.used -= self.subsets[j].len() - 1;
        Some(j)
    }

    fn first_feasible_from(&self, pos: usize, from: usize) -> Option<usize> {
        (from..self.subsets.len()).find(|&j| self.feasible(pos, self.subsets[j].len() - 1))
    }

    /// Extends the stack to a full pattern, backtracking as needed.
    fn descend(&mut self) -> bool {
        let mut from = 0;
        loop {
            if self.stack.len() == self.n_sensor {
                return true;
            }
            match self.first_feasible_from(self.stack.len(), from) {
                Some(j) => {
                    self.push(j);
                    from = 0;
                }
                None => match self.pop() {
                    Some(j) => from = j + 1,
                    None => return false,
                },
            }
        }
    }

    fn current(&self) -> FacePattern {
        FacePattern {
            n_actuator: self.n_actuator,
            allowed: self.stack.iter().map(|&j| self.subsets[j].clone()).collect(),
        }
    }
}

impl Iterator for FaceIter {
    type Item = FacePattern;

    fn next(&mut self) -> Option<FacePattern> {
        if self.done {
            return None;
        }
        let found = if !self.started {
            self.started = true;
            self.descend()
        } else {
            let mut ok = false;
            while let Some(p) = self.pop() {
                if let Some(next) = self.first_feasible_from(self.stack.len(), p + 1) {
                    self.push(next);
                    ok = self.descend();
                    break;
                }
            }
            ok
        };
        if found {
            Some(self.current())
        } else {
            self.done = true;
            None
        }
    }
}

/// All faces of dimension `dim` of the policy polytope with the given
/// sensor and actuator cardinalities.
pub fn enumerate_faces(n_sensor: usize, n_actuator: usize, dim: usize) -> Result<FaceIter> {
    if n_actuator == 0 || n_actuator > 20 {
        return Err(Error::config(format!("actuator cardinality {n_actuator} outside 1..=20")));
    }
    if dim > n_sensor * (n_actuator - 1) {
        return Err(Error::config(format!(
            "face dimension {dim} exceeds polytope dimension {}",
            n_sensor * (n_actuator - 1)
        )));
    }
    Ok(FaceIter {
        n_sensor,
        n_actuator,
        dim,
        subsets: nonempty_subsets(n_actuator),
        stack: Vec::with_capacity(n_sensor),
        used: 0,
        started: false,
        done: false,
    })
}
