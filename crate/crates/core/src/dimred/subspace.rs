use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate selection `x ↦ (x_{i_1}, …, x_{i_q})`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceModel {
    pub indices: Vec<usize>,
    pub n: usize,
}

impl SubspaceModel {
    pub fn new(n: usize, indices: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "attribute index {i} out of range for {n} attributes"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("attribute {i} selected twice")));
            }
        }
        Ok(SubspaceModel { indices, n })
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Arity {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.indices.iter().map(|&i| x[i]).collect())
    }
}

/// `q` distinct attributes drawn uniformly without replacement.
pub fn fit_random_subspace<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Result<SubspaceModel> {
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {q} of {n} attributes"
        )));
    }
    let indices = rand::seq::index::sample(rng, n, q).into_vec();
    SubspaceModel::new(n, indices)
}
