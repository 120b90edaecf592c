use std::collections::HashMap;
use std::sync::OnceLock;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sq_dists, sq_dist, sym_eig, Matrix};

/// Settings for [`fit_diffusion_map`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmParams {
    /// Upper bound on the number of unique points the spectrum is computed on.
    pub sample_size: usize,
    /// Nyström cutoff: kernel eigenpairs with `λ̂_l < delta·λ̂_0` are dropped.
    pub delta: f64,
    /// Diffusion time; coordinates are scaled by `λ^t`.
    pub t: u32,
}

impl Default for DmParams {
    fn default() -> Self {
        DmParams {
            sample_size: 600,
            delta: 1e-8,
            t: 1,
        }
    }
}

impl DmParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "diffusion-map sample size must be at least 2, got {}",
                self.sample_size
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Nyström cutoff delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.t == 0 {
            return Err(Error::InvalidArgument("diffusion time t must be >= 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn kernel(sq_dist: f64, epsilon: f64) -> f64 {
    (-sq_dist / (2.0 * epsilon)).exp()
}

/// `w(x_i, x_j) = exp(−‖x_i − x_j‖² / 2ε)` over all pairs of rows.
pub fn gaussian_kernel(points: &Matrix, epsilon: f64) -> Result<Matrix> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "kernel width must be positive, got {epsilon}"
        )));
    }
    let mut w = pairwise_sq_dists(points)?;
    let n = w.rows();
    for i in 0..n {
        for j in 0..n {
            w.set(i, j, kernel(w.get(i, j), epsilon));
        }
    }
    Ok(w)
}

/// Row-normalizes a kernel matrix into a Markov transition matrix.
/// Returns the matrix and the row sums (degrees).
pub fn markov_normalize(w: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if !w.is_square() {
        return Err(Error::Shape(format!(
            "kernel must be square, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let degrees = degrees(w)?;
    let mut m = w.clone();
    for (i, d) in degrees.iter().enumerate() {
        m.row_mut(i).iter_mut().for_each(|v| *v /= d);
    }
    Ok((m, degrees))
}

fn degrees(w: &Matrix) -> Result<Vec<f64>> {
    w.row_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "kernel row {i} has negative entries"
                )));
            }
            let d: f64 = row.iter().sum();
            if d > 0.0 {
                Ok(d)
            } else {
                Err(Error::Degenerate(format!("kernel row {i} has zero degree")))
            }
        })
        .collect()
}

/// Eigen-structure of the Markov matrix `M = D⁻¹W`.
///
/// Obtained from the symmetric conjugate `A = D^{1/2} M D^{-1/2}` with
/// orthonormal eigenvectors `v_l`: the left eigenvectors are
/// `φ_l = D^{1/2} v_l`, the right ones `ψ_l = D^{-1/2} v_l`, and the two
/// families are bi-orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpectrum {
    /// Descending; the first is 1 up to round-off.
    pub eigenvalues: Vec<f64>,
    /// Column `l` is `ψ_l`.
    pub psi: Matrix,
    /// Column `l` is `φ_l`.
    pub phi: Matrix,
    pub degrees: Vec<f64>,
}

impl DiffusionSpectrum {
    /// Stationary distribution of the walk, `d / Σd`.
    pub fn stationary(&self) -> Vec<f64> {
        let vol: f64 = self.degrees.iter().sum();
        self.degrees.iter().map(|d| d / vol).collect()
    }

    pub fn volume(&self) -> f64 {
        self.degrees.iter().sum()
    }

    /// Largest `|⟨φ_m, ψ_l⟩ − δ_ml|`.
    pub fn biorthonormality_residual(&self) -> f64 {
        let gram = self.phi.transpose().matmul(&self.psi).expect("square factors");
        let n = gram.rows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(i, j) - target).abs());
            }
        }
        worst
    }
}

pub fn diffusion_spectrum(w: &Matrix) -> Result<DiffusionSpectrum> {
    let (_, degrees) = markov_normalize(w)?;
    let root: Vec<f64> = degrees.iter().map(|d| d.sqrt()).collect();
    let n = w.rows();
    let a = Matrix::from_fn(n, n, |i, j| w.get(i, j) / (root[i] * root[j]));
    let eig = sym_eig(&a)?;
    let phi = Matrix::from_fn(n, n, |i, l| root[i] * eig.vectors.get(i, l));
    let psi = Matrix::from_fn(n, n, |i, l| eig.vectors.get(i, l) / root[i]);
    Ok(DiffusionSpectrum {
        eigenvalues: eig.values,
        psi,
        phi,
        degrees,
    })
}

/// Diffusion distance from transition-matrix rows:
/// `D²(x_i, x_j) = Σ_z (m(x_i,z) − m(x_j,z))² / φ₀(z)` with `φ₀` the
/// stationary distribution. Returns `D²`.
pub fn diffusion_distance_direct(m: &Matrix, stationary: &[f64], i: usize, j: usize) -> Result<f64> {
    let n = m.rows();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "indices ({i}, {j}) out of range for {n} points"
        )));
    }
    if stationary.len() != m.cols() {
        return Err(Error::Arity {
            expected: m.cols(),
            got: stationary.len(),
        });
    }
    Ok(m.row(i)
        .iter()
        .zip(m.row(j))
        .zip(stationary)
        .map(|((a, b), p)| (a - b) * (a - b) / p)
        .sum())
}

/// Spectral form of the diffusion distance, `Σ_{l≥1} λ_l² (ψ_l(x_i) − ψ_l(x_j))²`,
/// with `ψ` rescaled to unit norm under the stationary measure (so that
/// `ψ_0 ≡ 1`). Returns `D²`; equals [`diffusion_distance_direct`] when the
/// whole spectrum is used.
pub fn diffusion_distance_spectral(spectrum: &DiffusionSpectrum, i: usize, j: usize) -> f64 {
    let vol = spectrum.volume();
    let psi = &spectrum.psi;
    spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .skip(1)
        .map(|(l, lam)| {
            let diff = psi.get(i, l) - psi.get(j, l);
            lam * lam * diff * diff
        })
        .sum::<f64>()
        * vol
}

/// Draws a kernel width uniformly from the multiset of non-zero pairwise
/// Euclidean distances between rows of `points`.
pub fn select_epsilon<R: Rng + ?Sized>(points: &Matrix, rng: &mut R) -> Result<f64> {
    let n = points.rows();
    let mut candidates = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(points.row(i), points.row(j));
            if d > 0.0 {
                candidates.push(d.sqrt());
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Degenerate(
            "all pairwise distances are zero; cannot choose a kernel width".into(),
        ));
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// A diffusion map fitted on a sample of the training set, with everything
/// needed to extend it to new points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffusionMapModel {
    /// The `m` unique sample points the spectrum was computed on.
    pub sample_points: Matrix,
    /// Row indices of the sample points in the fitting data.
    pub sample_indices: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub t: u32,
    /// Embedding dimension after clamping to `m − 1`.
    pub q: usize,
    pub requested_q: usize,
    /// Eigenvalues `λ̂_l` of the kernel matrix, descending.
    pub kernel_eigvals: Vec<f64>,
    /// Orthonormal kernel eigenvectors `φ_l` (columns), the Nyström basis.
    pub kernel_eigvecs: Matrix,
    /// Eigenvalues of the Markov matrix, descending.
    pub markov_eigvals: Vec<f64>,
    /// Row `j` holds `(λ_2^t ψ_2(x_j), …, λ_{q+1}^t ψ_{q+1}(x_j))`.
    pub embed_coords: Matrix,
    /// `coeffs[i][l] = ⟨φ_l, ψ_{i+2}⟩`, a `q×m` matrix.
    pub coeffs: Matrix,
    #[serde(skip)]
    extension: OnceLock<Matrix>,
}

impl PartialEq for DiffusionMapModel {
    fn eq(&self, other: &Self) -> bool {
        self.sample_points == other.sample_points
            && self.sample_indices == other.sample_indices
            && self.epsilon == other.epsilon
            && self.delta == other.delta
            && self.t == other.t
            && self.q == other.q
            && self.requested_q == other.requested_q
            && self.kernel_eigvals == other.kernel_eigvals
            && self.kernel_eigvecs == other.kernel_eigvecs
            && self.markov_eigvals == other.markov_eigvals
            && self.embed_coords == other.embed_coords
            && self.coeffs == other.coeffs
    }
}

/// Indices of the first occurrence of every distinct row.
fn unique_rows(x: &Matrix) -> Vec<usize> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out = Vec::new();
    for (i, row) in x.row_iter().enumerate() {
        // +0.0 and -0.0 are the same point
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(key) {
            e.insert(i);
            out.push(i);
        }
    }
    out
}

/// Fits a diffusion map on (a sample of) the rows of `features`.
///
/// Duplicate rows are collapsed, then at most `params.sample_size` unique
/// rows are drawn without replacement. The kernel width is drawn from the
/// sample's pairwise distances. The embedding uses eigenpairs 2..=q+1 of
/// the Markov matrix; `q` is clamped to `m − 1` with a warning.
pub fn fit_diffusion_map<R: Rng + ?Sized>(
    features: &Matrix,
    q: usize,
    params: &DmParams,
    rng: &mut R,
) -> Result<DiffusionMapModel> {
    params.validate()?;
    if q == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    if features.rows() < 2 {
        return Err(Error::InvalidArgument(
            "diffusion maps need at least two points".into(),
        ));
    }
    let unique = unique_rows(features);
    if unique.len() < 2 {
        return Err(Error::Degenerate(
            "all points are identical; cannot choose a kernel width".into(),
        ));
    }
    let sample_indices: Vec<usize> = if unique.len() <= params.sample_size {
        unique
    } else {
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, unique.len(), params.sample_size)
            .into_iter()
            .map(|i| unique[i])
            .collect();
        picked.sort_unstable();
        picked
    };
    let sample_points = features.select_rows(&sample_indices);
    let m = sample_points.rows();

    let epsilon = select_epsilon(&sample_points, rng)?;
    let w = gaussian_kernel(&sample_points, epsilon)?;
    let kernel_eig = sym_eig(&w)?;
    let spectrum = diffusion_spectrum(&w)?;

    let q_eff = q.min(m - 1);
    if q_eff < q {
        warn!("diffusion-map dimension {q} clamped to {q_eff} for a {m}-point sample");
    }

    let t = params.t as i32;
    let embed_coords = Matrix::from_fn(m, q_eff, |j, i| {
        spectrum.eigenvalues[i + 1].powi(t) * spectrum.psi.get(j, i + 1)
    });
    let coeffs = Matrix::from_fn(q_eff, m, |i, l| {
        (0..m)
            .map(|y| kernel_eig.vectors.get(y, l) * spectrum.psi.get(y, i + 1))
            .sum()
    });

    Ok(DiffusionMapModel {
        sample_points,
        sample_indices,
        epsilon,
        delta: params.delta,
        t: params.t,
        q: q_eff,
        requested_q: q,
        kernel_eigvals: kernel_eig.values,
        kernel_eigvecs: kernel_eig.vectors,
        markov_eigvals: spectrum.eigenvalues,
        embed_coords,
        coeffs,
        extension: OnceLock::new(),
    })
}

impl DiffusionMapModel {
    pub fn input_dim(&self) -> usize {
        self.sample_points.cols()
    }

    pub fn sample_len(&self) -> usize {
        self.sample_points.rows()
    }

    /// Number of kernel eigenpairs kept by cutoff `delta`.
    pub fn retained(&self, delta: f64) -> usize {
        let top = self.kernel_eigvals[0];
        self.kernel_eigvals
            .iter()
            .take_while(|&&l| l > 0.0 && l >= delta * top)
            .count()
    }

    /// Folds the truncated Nyström sum into one `q×m` operator:
    /// `B[i][y] = λ_{i+2}^t Σ_{l kept} ⟨φ_l, ψ_{i+2}⟩ φ_l(y) / λ̂_l`.
    fn extension_operator(&self, delta: f64) -> Matrix {
        let m = self.sample_len();
        let kept = self.retained(delta);
        let t = self.t as i32;
        let mut b = Matrix::zeros(self.q, m);
        for i in 0..self.q {
            let scale = self.markov_eigvals[i + 1].powi(t);
            let row = b.row_mut(i);
            for l in 0..kept {
                let c = scale * self.coeffs.get(i, l) / self.kernel_eigvals[l];
                for (y, out) in row.iter_mut().enumerate() {
                    *out += c * self.kernel_eigvecs.get(y, l);
                }
            }
        }
        b
    }

    fn kernel_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Arity {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self
            .sample_points
            .row_iter()
            .map(|y| kernel(sq_dist(x, y), self.epsilon))
            .collect())
    }

    /// Nyström embedding of an arbitrary point using the model's cutoff.
    pub fn nystrom_embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.kernel_row(x)?;
        let b = self.extension.get_or_init(|| self.extension_operator(self.delta));
        b.matvec(&k)
    }

    /// Nyström embedding with an explicit cutoff.
    pub fn nystrom_embed_with_delta(&self, x: &[f64], delta: f64) -> Result<Vec<f64>> {
        let k = self.kernel_row(x)?;
        self.extension_operator(delta).matvec(&k)
    }

    /// Embeds training rows: rows equal to a sample point take its fitted
    /// coordinates, all others are extended.
    pub fn embed_training(&self, x: &Matrix) -> Result<Matrix> {
        let lookup: HashMap<Vec<u64>, usize> = self
            .sample_points
            .row_iter()
            .enumerate()
            .map(|(j, r)| (r.iter().map(|v| (v + 0.0).to_bits()).collect(), j))
            .collect();
        let mut out = Matrix::zeros(x.rows(), self.q);
        for (i, row) in x.row_iter().enumerate() {
            let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            let coords = match lookup.get(&key) {
                Some(&j) => self.embed_coords.row(j).to_vec(),
                None => self.nystrom_embed(row)?,
            };
            out.row_mut(i).copy_from_slice(&coords);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_gaussian_blobs;
    use crate::linalg::sym_eig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_points(m: usize, n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn kernel_values() {
        let eps: f64 = 0.7;
        // ‖x_i − x_j‖² = 2ε
        let p = Matrix::from_rows(&[[0.0, 0.0], [(2.0 * eps).sqrt(), 0.0]]).unwrap();
        let w = gaussian_kernel(&p, eps).unwrap();
        assert_eq!(w.get(0, 0), 1.0);
        assert!((w.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((w.get(0, 1) - 0.367879).abs() < 1e-6);
        assert!(gaussian_kernel(&p, 0.0).is_err());
        assert!(gaussian_kernel(&p, -1.0).is_err());
    }

    #[test]
    fn kernel_is_positive_semidefinite() {
        let w = gaussian_kernel(&random_points(4, 3, 2), 0.3).unwrap();
        let e = sym_eig(&w).unwrap();
        assert!(*e.values.last().unwrap() >= -1e-8);
    }

    #[test]
    fn markov_small_cases() {
        let w = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let (m, d) = markov_normalize(&w).unwrap();
        assert!((m.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d, vec![1.5, 1.5]);
        let (m, _) = markov_normalize(&Matrix::identity(3)).unwrap();
        assert_eq!(m, Matrix::identity(3));
        let z = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(markov_normalize(&z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn markov_rows_sum_to_one() {
        let w = gaussian_kernel(&random_points(6, 2, 8), 0.5).unwrap();
        let (m, _) = markov_normalize(&w).unwrap();
        for r in m.row_iter() {
            let s: f64 = r.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_spectrum() {
        let a = 0.3;
        let w = Matrix::from_rows(&[[1.0, a], [a, 1.0]]).unwrap();
        let s = diffusion_spectrum(&w).unwrap();
        // brute-force 2x2: M = [[1, a], [a, 1]] / (1 + a)
        let m00 = 1.0 / (1.0 + a);
        let m01 = a / (1.0 + a);
        let tr = 2.0 * m00;
        let det = m00 * m00 - m01 * m01;
        let disc = (tr * tr / 4.0 - det).sqrt();
        assert!((s.eigenvalues[0] - (tr / 2.0 + disc)).abs() < 1e-14);
        assert!((s.eigenvalues[1] - (tr / 2.0 - disc)).abs() < 1e-14);
        assert!((s.eigenvalues[1] - (1.0 - a) / (1.0 + a)).abs() < 1e-14);
        assert!((s.psi.get(0, 1) + s.psi.get(1, 1)).abs() < 1e-14);
        assert!((s.psi.get(0, 0) - s.psi.get(1, 0)).abs() < 1e-14);
    }

    #[test]
    fn top_eigenvector_is_constant() {
        let w = gaussian_kernel(&random_points(12, 3, 4), 0.4).unwrap();
        let s = diffusion_spectrum(&w).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-8);
        let c = s.psi.get(0, 0);
        assert!((0..12).all(|i| (s.psi.get(i, 0) - c).abs() < 1e-10));
    }

    #[test]
    fn spectrum_is_biorthonormal_and_right_eigen() {
        let w = gaussian_kernel(&random_points(10, 2, 6), 0.25).unwrap();
        let s = diffusion_spectrum(&w).unwrap();
        assert!(s.biorthonormality_residual() < 1e-8);
        let (m, _) = markov_normalize(&w).unwrap();
        for l in 0..10 {
            let psi = s.psi.column(l);
            let mp = m.matvec(&psi).unwrap();
            for (a, b) in mp.iter().zip(&psi) {
                assert!((a - s.eigenvalues[l] * b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn diffusion_distance_forms_agree() {
        let w = gaussian_kernel(&random_points(8, 3, 10), 0.6).unwrap();
        let (m, _) = markov_normalize(&w).unwrap();
        let s = diffusion_spectrum(&w).unwrap();
        let pi = s.stationary();
        for i in 0..8 {
            assert_eq!(diffusion_distance_direct(&m, &pi, i, i).unwrap(), 0.0);
            for j in 0..8 {
                let direct = diffusion_distance_direct(&m, &pi, i, j).unwrap();
                let spectral = diffusion_distance_spectral(&s, i, j);
                assert!((direct - spectral).abs() < 1e-8, "{i},{j}: {direct} vs {spectral}");
            }
        }
        assert!(diffusion_distance_direct(&m, &pi, 0, 8).is_err());
    }

    #[test]
    fn two_point_distance_closed_form() {
        let a: f64 = 0.4;
        let w = Matrix::from_rows(&[[1.0, a], [a, 1.0]]).unwrap();
        let (m, _) = markov_normalize(&w).unwrap();
        let s = diffusion_spectrum(&w).unwrap();
        let direct = diffusion_distance_direct(&m, &s.stationary(), 0, 1).unwrap();
        // rows differ by ±(1−a)/(1+a) in both entries, stationary mass 1/2 each
        let diff = (1.0 - a) / (1.0 + a);
        assert!((direct - 4.0 * diff * diff).abs() < 1e-14);
        assert!((diffusion_distance_spectral(&s, 0, 1) - direct).abs() < 1e-12);
    }

    #[test]
    fn epsilon_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let two = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(select_epsilon(&two, &mut rng).unwrap(), 5.0);
        let line = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        for _ in 0..20 {
            let e = select_epsilon(&line, &mut rng).unwrap();
            assert!(e == 1.0 || e == 2.0);
        }
        let same = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert!(matches!(select_epsilon(&same, &mut rng), Err(Error::Degenerate(_))));
    }

    #[test]
    fn epsilon_draws_are_uniform_over_distances() {
        // 5 points on a line: distances 1 (x4), 2 (x3), 3 (x2), 4 (x1)
        let pts = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let e = select_epsilon(&pts, &mut rng).unwrap();
            counts[e as usize - 1] += 1;
        }
        let expected = [4.0, 3.0, 2.0, 1.0].map(|c| c / 10.0 * draws as f64);
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&o, e)| (o as f64 - e).powi(2) / e)
            .sum();
        // 3 degrees of freedom, 0.999 quantile
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn small_sets_use_every_point() {
        let x = random_points(40, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = fit_diffusion_map(&x, 2, &DmParams::default(), &mut rng).unwrap();
        assert_eq!(model.sample_indices, (0..40).collect::<Vec<_>>());
        assert_eq!(model.embed_training(&x).unwrap(), model.embed_coords);
    }

    #[test]
    fn sampling_caps_and_dedups() {
        let mut x = random_points(30, 2, 5);
        for i in 0..10 {
            let r = x.row(i).to_vec();
            x.row_mut(i + 10).copy_from_slice(&r);
        }
        let params = DmParams {
            sample_size: 12,
            ..DmParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = fit_diffusion_map(&x, 3, &params, &mut rng).unwrap();
        assert_eq!(model.sample_len(), 12);
        assert!(model.sample_indices.iter().all(|&i| !(10..20).contains(&i)));
    }

    #[test]
    fn q_is_clamped() {
        let x = random_points(4, 6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = fit_diffusion_map(&x, 10, &DmParams::default(), &mut rng).unwrap();
        assert_eq!((model.q, model.requested_q), (3, 10));
    }

    #[test]
    fn identical_points_are_degenerate() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = fit_diffusion_map(&x, 1, &DmParams::default(), &mut rng).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn nystrom_reproduces_sample_points() {
        let x = random_points(25, 3, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = fit_diffusion_map(&x, 3, &DmParams::default(), &mut rng).unwrap();
        let tiny = f64::MIN_POSITIVE;
        for j in 0..model.sample_len() {
            let got = model.nystrom_embed_with_delta(model.sample_points.row(j), tiny).unwrap();
            let want = model.embed_coords.row(j);
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() <= 1e-6 * scale, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn nystrom_of_duplicate_point_matches_either_copy() {
        let x = random_points(20, 2, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = fit_diffusion_map(&x, 2, &DmParams::default(), &mut rng).unwrap();
        let p = model.sample_points.row(3).to_vec();
        let mid: Vec<f64> = p.iter().zip(&p).map(|(a, b)| 0.5 * (a + b)).collect();
        assert_eq!(model.nystrom_embed(&mid).unwrap(), model.nystrom_embed(&p).unwrap());
        assert!(matches!(model.nystrom_embed(&[1.0]), Err(Error::Arity { expected: 2, got: 1 })));
    }

    #[test]
    fn first_coordinate_separates_blobs() {
        let d = make_gaussian_blobs(60, 4, 2, 0.2, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = fit_diffusion_map(&d.features, 1, &DmParams::default(), &mut rng).unwrap();
        let emb = model.embed_training(&d.features).unwrap();
        let agree = (0..d.len())
            .filter(|&i| (emb.get(i, 0) > 0.0) == (d.labels[i] == 1))
            .count();
        let frac = agree.max(d.len() - agree) as f64 / d.len() as f64;
        assert!(frac >= 0.95, "separation {frac}");
    }

    #[test]
    fn serialization_is_deterministic() {
        let x = random_points(30, 3, 2);
        let fit = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            serde_json::to_string(&fit_diffusion_map(&x, 2, &DmParams::default(), &mut rng).unwrap())
                .unwrap()
        };
        assert_eq!(fit(8), fit(8));
        let back: DiffusionMapModel = serde_json::from_str(&fit(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert_eq!(back, fit_diffusion_map(&x, 2, &DmParams::default(), &mut rng).unwrap());
    }
}
