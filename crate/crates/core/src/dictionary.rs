//! The gesture dictionary: one Gaussian cluster per partial action.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigenspace::{EigenspaceModel, FeatureVector};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const INVERSE_TOL: f64 = 1e-8;

/// Default match threshold on the Mahalanobis distance.
pub const DEFAULT_TAU: f64 = 3.0;

/// A k-dimensional normal distribution over feature vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ClusterFile", into = "ClusterFile")]
pub struct Cluster {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    log_det: f64,
}

impl PartialEq for Cluster {
    fn eq(&self, other: &Self) -> bool {
        // the cached fields are functions of these two
        self.mean == other.mean && self.covariance == other.covariance
    }
}

#[derive(Serialize, Deserialize)]
struct ClusterFile {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl From<Cluster> for ClusterFile {
    fn from(c: Cluster) -> Self {
        let k = c.dim();
        ClusterFile {
            mean: c.mean.iter().copied().collect(),
            cov: (0..k)
                .map(|r| (0..k).map(|col| c.covariance[(r, col)]).collect())
                .collect(),
        }
    }
}

impl TryFrom<ClusterFile> for Cluster {
    type Error = Error;

    fn try_from(f: ClusterFile) -> Result<Self> {
        let k = f.mean.len();
        if f.cov.len() != k || f.cov.iter().any(|row| row.len() != k) {
            return Err(Error::invalid(format!("covariance must be {k}x{k}")));
        }
        let cov = DMatrix::from_fn(k, k, |r, c| f.cov[r][c]);
        Cluster::new(DVector::from_vec(f.mean), cov)
    }
}

impl Cluster {
    /// Builds a cluster from its mean and covariance, caching the precision
    /// matrix, Cholesky factor and log-determinant.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if k == 0 || covariance.shape() != (k, k) {
            return Err(Error::invalid(format!(
                "mean has dimension {k}, covariance is {:?}",
                covariance.shape()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("cluster parameters must be finite"));
        }
        for r in 0..k {
            for c in r + 1..k {
                if (covariance[(r, c)] - covariance[(c, r)]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid("covariance is not symmetric"));
                }
            }
        }
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::degenerate("covariance is not positive definite"))?;
        let chol_l = chol.l();
        let log_det = 2.0 * chol_l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let precision = chol.inverse();
        let residual = (&precision * &covariance - DMatrix::identity(k, k)).amax();
        if !(residual <= INVERSE_TOL) {
            return Err(Error::degenerate(format!(
                "covariance is too ill-conditioned to invert (residual {residual:e})"
            )));
        }
        Ok(Cluster {
            mean,
            covariance,
            precision,
            chol_l,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `ln |Σ|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "feature has dimension {}, cluster has {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn squared_distance(&self, x: &FeatureVector) -> f64 {
        let diff = DVector::from_column_slice(x.as_slice()) - &self.mean;
        let z = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    /// `√((x − μ)ᵀ Σ⁻¹ (x − μ))`.
    pub fn mahalanobis(&self, x: &FeatureVector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.squared_distance(x).sqrt())
    }

    /// Normal density at `x`.
    pub fn density(&self, x: &FeatureVector) -> Result<f64> {
        self.check_dim(x)?;
        let k = self.dim() as f64;
        Ok((-0.5 * (k * (2.0 * PI).ln() + self.log_det + self.squared_distance(x))).exp())
    }
}

/// Fits a cluster to at least two feature vectors: sample mean, `1/N` sample
/// covariance plus `ridge · I`.
pub fn fit_cluster(features: &[FeatureVector], ridge: f64) -> Result<Cluster> {
    let (mean, scatter) = moments(features)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!("ridge must be >= 0, got {ridge}")));
    }
    let k = mean.len();
    Cluster::new(mean, scatter + DMatrix::identity(k, k) * ridge)
}

/// [`fit_cluster`] with the default ridge `1e-6 · trace(Σ) / k`.
pub fn fit_cluster_default(features: &[FeatureVector]) -> Result<Cluster> {
    let (_, scatter) = moments(features)?;
    fit_cluster(features, default_ridge(&scatter))
}

pub(crate) fn default_ridge(cov: &DMatrix<f64>) -> f64 {
    1e-6 * cov.trace() / cov.nrows() as f64
}

fn moments(features: &[FeatureVector]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if features.len() < 2 {
        return Err(Error::invalid(format!(
            "a cluster needs at least 2 features, got {}",
            features.len()
        )));
    }
    let k = features[0].dim();
    if k == 0 || features.iter().any(|f| f.dim() != k) {
        return Err(Error::invalid("features must share one nonzero dimension"));
    }
    let n = features.len() as f64;
    let mut mean = DVector::zeros(k);
    for f in features {
        mean += DVector::from_column_slice(f.as_slice());
    }
    mean /= n;
    let mut cov = DMatrix::zeros(k, k);
    for f in features {
        let d = DVector::from_column_slice(f.as_slice()) - &mean;
        cov += &d * d.transpose();
    }
    cov /= n;
    Ok((mean, cov))
}

/// A named cluster sequence with its important positions (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEntry {
    pub name: String,
    #[serde(default)]
    pub important: BTreeSet<usize>,
    pub clusters: Vec<Cluster>,
}

impl GestureEntry {
    pub fn new(name: impl Into<String>, clusters: Vec<Cluster>, important: BTreeSet<usize>) -> Result<Self> {
        let entry = GestureEntry {
            name: name.into(),
            important,
            clusters,
        };
        entry.validate()?;
        Ok(entry)
    }

    fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::invalid(format!("entry `{}` has no clusters", self.name)));
        }
        if let Some(&i) = self.important.iter().find(|&&i| i < 1 || i > self.clusters.len()) {
            return Err(Error::invalid(format!(
                "entry `{}`: important index {i} outside [1, {}]",
                self.name,
                self.clusters.len()
            )));
        }
        Ok(())
    }
}

/// Shared eigenspace, gesture entries and the Mahalanobis match threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureDictionary {
    eigenspace: EigenspaceModel,
    entries: Vec<GestureEntry>,
    tau: f64,
}

#[derive(Serialize, Deserialize)]
struct DictFile {
    tau: f64,
    eigenspace: EigenspaceModel,
    entries: Vec<GestureEntry>,
}

impl GestureDictionary {
    pub fn new(eigenspace: EigenspaceModel, entries: Vec<GestureEntry>, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        let mut names = HashSet::new();
        for e in &entries {
            e.validate()?;
            if !names.insert(e.name.as_str()) {
                return Err(Error::invalid(format!("duplicate entry name `{}`", e.name)));
            }
            if let Some(c) = e.clusters.iter().find(|c| c.dim() != eigenspace.k()) {
                return Err(Error::invalid(format!(
                    "entry `{}` has a cluster of dimension {}, eigenspace k = {}",
                    e.name,
                    c.dim(),
                    eigenspace.k()
                )));
            }
        }
        Ok(GestureDictionary {
            eigenspace,
            entries,
            tau,
        })
    }

    pub fn eigenspace(&self) -> &EigenspaceModel {
        &self.eigenspace
    }

    pub fn entries(&self) -> &[GestureEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&GestureEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn k(&self) -> usize {
        self.eigenspace.k()
    }

    /// The same dictionary with every important set emptied.
    pub fn without_focus(&self) -> GestureDictionary {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|e| e.important.clear());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DictFile {
            tau: self.tau,
            eigenspace: self.eigenspace.clone(),
            entries: self.entries.clone(),
        })
        .expect("dictionary serializes")
    }

    /// Parses `.gdict` JSON; any parse or invariant failure is reported as a
    /// corrupt dictionary.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: DictFile = serde_json::from_str(text).map_err(|e| Error::corrupt(e.to_string()))?;
        GestureDictionary::new(file.eigenspace, file.entries, file.tau).map_err(|e| match e {
            Error::InvalidInput(m) | Error::DegenerateData(m) => Error::corrupt(m),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        GestureDictionary::from_json(&text).map_err(|e| match e {
            Error::CorruptDictionary(m) => Error::corrupt(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
