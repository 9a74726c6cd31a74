//! Appearance vectors and the eigenspace they are projected onto.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::segmentation::PartialActionImage;

/// Flow components of one image in raster order, `vx` before `vy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppearanceVector(pub Vec<f64>);

impl AppearanceVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Coordinates of an appearance vector in the eigenspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

/// Lays the image out row-major from the top-left cell, `vx` then `vy` per
/// cell. Cells without flow contribute `(0, 0)`.
pub fn vectorize(img: &PartialActionImage) -> AppearanceVector {
    AppearanceVector(img.field().vectors().iter().flatten().copied().collect())
}

/// Mean appearance vector plus the top-`k` eigenvectors of the centered
/// covariance, eigenvalues descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EigFile", into = "EigFile")]
pub struct EigenspaceModel {
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// One entry per eigenvector.
    basis: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EigFile {
    k: usize,
    mean: Vec<f64>,
    eigenvalues: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl From<EigenspaceModel> for EigFile {
    fn from(m: EigenspaceModel) -> Self {
        EigFile {
            k: m.k(),
            mean: m.mean,
            eigenvalues: m.eigenvalues,
            basis: m.basis,
        }
    }
}

impl TryFrom<EigFile> for EigenspaceModel {
    type Error = Error;

    fn try_from(f: EigFile) -> Result<Self> {
        if f.k != f.basis.len() {
            return Err(Error::invalid(format!(
                "k = {} but {} basis vectors stored",
                f.k,
                f.basis.len()
            )));
        }
        EigenspaceModel::from_parts(f.mean, f.eigenvalues, f.basis)
    }
}

const ORTHONORMAL_TOL: f64 = 1e-8;

impl EigenspaceModel {
    /// Assembles a model, checking its invariants.
    pub fn from_parts(mean: Vec<f64>, eigenvalues: Vec<f64>, basis: Vec<Vec<f64>>) -> Result<Self> {
        let k = basis.len();
        if k == 0 || eigenvalues.len() != k {
            return Err(Error::invalid(format!(
                "need k >= 1 basis vectors with one eigenvalue each, got {k} and {}",
                eigenvalues.len()
            )));
        }
        if basis.iter().any(|e| e.len() != mean.len()) {
            return Err(Error::invalid("basis vector length differs from mean length"));
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0 && l.is_finite())) || eigenvalues.windows(2).any(|p| p[0] < p[1]) {
            return Err(Error::invalid("eigenvalues must be non-negative and descending"));
        }
        for i in 0..k {
            for j in i..k {
                let dot: f64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if !((dot - want).abs() <= ORTHONORMAL_TOL) {
                    return Err(Error::invalid(format!(
                        "basis vectors {i} and {j} are not orthonormal (dot = {dot})"
                    )));
                }
            }
        }
        Ok(EigenspaceModel {
            mean,
            eigenvalues,
            basis,
        })
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    /// Length of the appearance vectors this model accepts.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// `basisᵀ · (v − mean)`.
    pub fn project(&self, v: &AppearanceVector) -> Result<FeatureVector> {
        if v.len() != self.dim() {
            return Err(Error::invalid(format!(
                "appearance vector has length {}, eigenspace expects {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(FeatureVector(
            self.basis
                .iter()
                .map(|e| e.iter().zip(&v.0).zip(&self.mean).map(|((e, x), m)| e * (x - m)).sum())
                .collect(),
        ))
    }

    /// `mean + basis · u`.
    pub fn reconstruct(&self, u: &FeatureVector) -> Result<AppearanceVector> {
        if u.dim() != self.k() {
            return Err(Error::invalid(format!(
                "feature vector has dimension {}, eigenspace has k = {}",
                u.dim(),
                self.k()
            )));
        }
        let mut out = self.mean.clone();
        for (e, &c) in self.basis.iter().zip(&u.0) {
            for (o, b) in out.iter_mut().zip(e) {
                *o += c * b;
            }
        }
        Ok(AppearanceVector(out))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        json::write(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        json::read(path)
    }
}

/// Fits an eigenspace of dimension `k` to the columns `vectors`.
///
/// Covariance is normalized by `1/N`. When the vectors are longer than they
/// are numerous, the `N×N` Gram matrix is decomposed instead of the `D×D`
/// covariance and its eigenvectors are mapped back. Each eigenvector's first
/// nonzero component is made positive.
pub fn fit(vectors: &[AppearanceVector], k: usize) -> Result<EigenspaceModel> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 vectors, got {n}")));
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().position(|v| v.len() != d) {
        return Err(Error::invalid(format!(
            "vector {bad} has length {}, expected {d}",
            vectors[bad].len()
        )));
    }
    if k < 1 || k > (n - 1).min(d) {
        return Err(Error::invalid(format!(
            "k = {k} outside [1, min(N-1, D)] = [1, {}]",
            (n - 1).min(d)
        )));
    }

    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(&v.0) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(d, n, |r, c| vectors[c].0[r] - mean[r]);

    let (eigenvalues, basis): (Vec<f64>, Vec<DVector<f64>>) = if d <= n {
        let cov = (&centered * centered.transpose()) / n as f64;
        let (vals, vecs) = top_eigenpairs(cov, k);
        (vals, vecs)
    } else {
        let gram = (centered.transpose() * &centered) / n as f64;
        let (vals, small) = top_eigenpairs(gram, k);
        let vecs = small
            .into_iter()
            .map(|g| {
                let e = &centered * g;
                let norm = e.norm();
                e / norm
            })
            .collect();
        (vals, vecs)
    };

    let top = eigenvalues[0];
    if !(top > 0.0) {
        return Err(Error::degenerate("all vectors are identical; covariance is zero"));
    }
    if let Some(i) = eigenvalues.iter().position(|&l| l <= top * 1e-12) {
        return Err(Error::degenerate(format!(
            "eigenspace of dimension {k} exceeds the data rank ({i} nonzero eigenvalues)"
        )));
    }

    let basis = basis
        .into_iter()
        .map(|e| {
            let flip = e.iter().find(|c| c.abs() > 1e-9).is_some_and(|&c| c < 0.0);
            e.iter().map(|&c| if flip { -c } else { c }).collect()
        })
        .collect();
    EigenspaceModel::from_parts(mean, eigenvalues, basis)
}

/// Top `k` eigenpairs of a symmetric matrix, eigenvalues descending and
/// clamped at zero.
fn top_eigenpairs(m: DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(k)
        .map(|i| (eig.eigenvalues[i].max(0.0), eig.eigenvectors.column(i).into_owned()))
        .unzip()
}
