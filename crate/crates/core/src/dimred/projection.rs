use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Entry distribution of the random projection matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// Standard normal entries, column-normalized (uniform on the sphere).
    #[default]
    Gaussian,
    /// ±1 entries, column-normalized to ±1/√q.
    Bernoulli,
}

/// Linear map `x ↦ R·x` with a `q×n` matrix whose columns have unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub r: Matrix,
    pub mode: ProjectionMode,
    /// Seed the matrix entries were generated from.
    pub seed: u64,
}

impl ProjectionModel {
    /// Regenerates the projection matrix from a seed.
    pub fn from_seed(n: usize, q: usize, mode: ProjectionMode, seed: u64) -> Result<Self> {
        if n == 0 || q == 0 {
            return Err(Error::InvalidArgument(format!(
                "projection needs n >= 1 and q >= 1, got n={n}, q={q}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = Matrix::zeros(q, n);
        for j in 0..n {
            let col: Vec<f64> = match mode {
                ProjectionMode::Gaussian => {
                    // a zero column has probability zero; redraw regardless
                    loop {
                        let c: Vec<f64> = (0..q).map(|_| StandardNormal.sample(&mut rng)).collect();
                        if c.iter().any(|v: &f64| *v != 0.0) {
                            break c;
                        }
                    }
                }
                ProjectionMode::Bernoulli => (0..q)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect(),
            };
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (i, v) in col.iter().enumerate() {
                r.set(i, j, v / norm);
            }
        }
        Ok(ProjectionModel { r, mode, seed })
    }

    pub fn input_dim(&self) -> usize {
        self.r.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.r.rows()
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Arity {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        self.r.matvec(x)
    }
}

/// Draws a projection seed from `rng` and builds the `q×n` matrix from it.
pub fn fit_random_projection<R: Rng + ?Sized>(
    n: usize,
    q: usize,
    mode: ProjectionMode,
    rng: &mut R,
) -> Result<ProjectionModel> {
    ProjectionModel::from_seed(n, q, mode, rng.random())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bernoulli_entries_are_scaled_signs() {
        let m = fit_random_projection(7, 5, ProjectionMode::Bernoulli, &mut rng(1)).unwrap();
        let s = 1.0 / 5f64.sqrt();
        assert!(m.r.as_slice().iter().all(|v| (v.abs() - s).abs() < 1e-15));
    }

    #[test]
    fn columns_have_unit_norm() {
        for mode in [ProjectionMode::Gaussian, ProjectionMode::Bernoulli] {
            let m = fit_random_projection(12, 4, mode, &mut rng(2)).unwrap();
            for j in 0..12 {
                let n: f64 = m.r.column(j).iter().map(|v| v * v).sum();
                assert!((n.sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn basis_vector_maps_to_column() {
        let m = fit_random_projection(6, 3, ProjectionMode::Gaussian, &mut rng(3)).unwrap();
        let mut e = vec![0.0; 6];
        e[4] = 1.0;
        assert_eq!(m.embed(&e).unwrap(), m.r.column(4));
        assert!(m.embed(&[1.0; 5]).is_err());
    }

    #[test]
    fn seed_reproduces_matrix() {
        let m = fit_random_projection(9, 4, ProjectionMode::Gaussian, &mut rng(4)).unwrap();
        let again = ProjectionModel::from_seed(9, 4, ProjectionMode::Gaussian, m.seed).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn distance_ratios_concentrate() {
        let (n, q) = (100, 50);
        let mut r = rng(5);
        let m = fit_random_projection(n, q, ProjectionMode::Gaussian, &mut r).unwrap();
        let mut ratios: Vec<f64> = (0..200)
            .map(|_| {
                let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
                let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
                let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let pd = m.embed(&d).unwrap();
                let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
                norm(&pd) / norm(&d)
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        let median = 0.5 * (ratios[99] + ratios[100]);
        let within = ratios.iter().filter(|r| (*r / median - 1.0).abs() <= 0.3).count();
        assert!(within >= 180, "{within}/200 within 30% of median {median}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn embedding_is_linear(
                seed in any::<u64>(),
                x in proptest::collection::vec(-10.0f64..10.0, 8),
                y in proptest::collection::vec(-10.0f64..10.0, 8),
                a in -3.0f64..3.0,
                b in -3.0f64..3.0,
            ) {
                let m = fit_random_projection(8, 3, ProjectionMode::Gaussian, &mut rng(seed)).unwrap();
                let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
                let lhs = m.embed(&combo).unwrap();
                let ex = m.embed(&x).unwrap();
                let ey = m.embed(&y).unwrap();
                for i in 0..3 {
                    prop_assert!((lhs[i] - (a * ex[i] + b * ey[i])).abs() < 1e-10);
                }
            }
        }
    }
}
