//! Laplacian eigenvectors used as positional features by the denoiser.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSample;

/// Which degree normalization builds the Laplacian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianForm {
    /// `I - D^{-1/2} A D^{-1/2}`.
    #[default]
    Normalized,
    /// `I - D^{1/2} A D^{1/2}`, kept for comparison runs.
    Literal,
}

/// Eigenvectors of the `k` smallest Laplacian eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFeatures {
    pub n: usize,
    pub k: usize,
    /// `n x k`, row-major; column `c` is the eigenvector for `eigenvalues[c]`.
    pub basis: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl SpectralFeatures {
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.basis[r * self.k + c]).collect()
    }

    /// The projector `U U^T` onto the retained eigenspace, `n x n` row-major.
    pub fn projector(&self) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for c in 0..k {
                    acc += self.basis[i * k + c] * self.basis[j * k + c];
                }
                p[i * n + j] = acc;
            }
        }
        p
    }
}

/// Dense Laplacian of `g`, `n x n` row-major. Isolated nodes get a zero
/// normalization entry, so their row is the identity row.
pub fn laplacian(g: &GraphSample, form: LaplacianForm) -> Vec<f64> {
    let n = g.n();
    let deg = g.degree_sequence();
    let scale: Vec<f64> = deg
        .iter()
        .map(|&d| match (d, form) {
            (0, _) => 0.0,
            (d, LaplacianForm::Normalized) => 1.0 / (d as f64).sqrt(),
            (d, LaplacianForm::Literal) => (d as f64).sqrt(),
        })
        .collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        l[i * n + i] = 1.0;
    }
    for [i, j] in g.edge_list() {
        let v = -scale[i] * scale[j];
        l[i * n + j] = v;
        l[j * n + i] = v;
    }
    l
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric `n x n` matrix.
/// Returns eigenvalues ascending and the matching eigenvectors as columns
/// of an `n x n` row-major matrix.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
        }
        if off.sqrt() < JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericFailure(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps (n = {n})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (c, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + c] = v[r * n + src];
        }
    }
    Ok((values, vectors))
}

/// Flips each column so its largest-magnitude entry is positive; ties go to
/// the lowest row index.
fn canonicalize_signs(basis: &mut [f64], n: usize, k: usize) {
    for c in 0..k {
        let max = (0..n).map(|r| basis[r * k + c].abs()).fold(0.0, f64::max);
        let pivot = (0..n).find(|&r| basis[r * k + c].abs() >= max - 1e-12).unwrap_or(0);
        if basis[pivot * k + c] < 0.0 {
            for r in 0..n {
                basis[r * k + c] = -basis[r * k + c];
            }
        }
    }
}

/// Eigenvectors for the `min(k, n)` smallest eigenvalues of the Laplacian.
pub fn spectral_features(g: &GraphSample, k: usize, form: LaplacianForm) -> Result<SpectralFeatures> {
    let n = g.n();
    let k = k.min(n);
    let (values, vectors) = symmetric_eigen(&laplacian(g, form), n)?;
    let mut basis = vec![0.0; n * k];
    for r in 0..n {
        basis[r * k..(r + 1) * k].copy_from_slice(&vectors[r * n..r * n + k]);
    }
    canonicalize_signs(&mut basis, n, k);
    Ok(SpectralFeatures { n, k, basis, eigenvalues: values[..k].to_vec() })
}
