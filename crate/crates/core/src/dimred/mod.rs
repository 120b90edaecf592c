//! Dimensionality reducers and their out-of-sample extensions.
//!
//! Every reducer is fitted once on a training set and afterwards embeds
//! arbitrary points of the original space:
//!
//! * [`DiffusionMapModel`]: Gaussian-kernel diffusion map on a sample of at
//!   most `sample_size` unique points, extended with the Nyström scheme.
//! * [`ProjectionModel`]: `x ↦ R·x` for a random `q×n` matrix with unit
//!   columns.
//! * [`SubspaceModel`]: selection of `q` random coordinates.

mod diffusion;
mod projection;
mod subspace;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Matrix;

pub use diffusion::{
    diffusion_distance_direct, diffusion_distance_spectral, diffusion_spectrum,
    fit_diffusion_map, gaussian_kernel, markov_normalize, select_epsilon, DiffusionMapModel,
    DiffusionSpectrum, DmParams,
};
pub use projection::{fit_random_projection, ProjectionMode, ProjectionModel};
pub use subspace::{fit_random_subspace, SubspaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducerKind {
    Dm,
    Rp,
    Rs,
}

/// A fitted reducer of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReducerModel {
    DiffusionMap(Box<DiffusionMapModel>),
    Projection(ProjectionModel),
    Subspace(SubspaceModel),
}

impl ReducerModel {
    pub fn input_dim(&self) -> usize {
        match self {
            ReducerModel::DiffusionMap(m) => m.input_dim(),
            ReducerModel::Projection(m) => m.input_dim(),
            ReducerModel::Subspace(m) => m.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ReducerModel::DiffusionMap(m) => m.q,
            ReducerModel::Projection(m) => m.output_dim(),
            ReducerModel::Subspace(m) => m.indices.len(),
        }
    }

    /// Out-of-sample embedding of one point.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ReducerModel::DiffusionMap(m) => m.nystrom_embed(x),
            ReducerModel::Projection(m) => m.embed(x),
            ReducerModel::Subspace(m) => m.embed(x),
        }
    }

    /// Embeds the rows of a training set. Diffusion maps reuse the fitted
    /// coordinates for sample points and extend to the rest.
    pub fn embed_training(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            ReducerModel::DiffusionMap(m) => m.embed_training(x),
            _ => self.embed_rows(x),
        }
    }

    pub fn embed_rows(&self, x: &Matrix) -> Result<Matrix> {
        let rows = x
            .row_iter()
            .map(|r| self.embed(r))
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.output_dim()));
        }
        Matrix::from_rows(&rows)
    }
}
