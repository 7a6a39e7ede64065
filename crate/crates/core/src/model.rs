//! Block-diagonal linear mixed model data and mixed-parameter evaluation.
//!
//! Every cluster carries a single random intercept (`Z_d = 1_{n_d}`), so the
//! marginal covariance of cluster `d` is `V_d = R_d + sigma2_u * J_{n_d}` with
//! `R_d = sigma2_e * I` (nested error regression) or `R_d = sigma2_{e_d}`
//! (Fay-Herriot, one unit per area, known sampling variance).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every variance component.
pub const VARIANCE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Nested error regression model (unit level).
    Nerm,
    /// Fay-Herriot model (area level, known error variances).
    Fhm,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Nerm => "nerm",
            ModelKind::Fhm => "fhm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBlock {
    pub id: String,
    pub y: Vec<f64>,
    /// `n_d x (p + 1)` design block; the first column is the intercept.
    pub x: DMatrix<f64>,
    /// Known sampling variance, Fay-Herriot areas only.
    pub error_var: Option<f64>,
}

impl ClusterBlock {
    pub fn new(id: impl Into<String>, y: Vec<f64>, x: DMatrix<f64>) -> Self {
        Self {
            id: id.into(),
            y,
            x,
            error_var: None,
        }
    }

    pub fn with_error_var(mut self, error_var: f64) -> Self {
        self.error_var = Some(error_var);
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Column means of `X_d`.
    pub fn covariate_means(&self) -> DVector<f64> {
        let n = self.x.nrows() as f64;
        DVector::from_iterator(self.x.ncols(), self.x.column_iter().map(|c| c.sum() / n))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockLmmData {
    model: ModelKind,
    clusters: Vec<ClusterBlock>,
    p: usize,
    n_total: usize,
}

impl BlockLmmData {
    /// Builds and validates a dataset.
    pub fn new(model: ModelKind, clusters: Vec<ClusterBlock>) -> Result<Self> {
        let p = clusters.first().map(|c| c.x.ncols().saturating_sub(1)).unwrap_or(0);
        let n_total = clusters.iter().map(ClusterBlock::n).sum();
        let data = Self {
            model,
            clusters,
            p,
            n_total,
        };
        validate(&data)?;
        Ok(data)
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn clusters(&self) -> &[ClusterBlock] {
        &self.clusters
    }

    /// Number of non-intercept covariates.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of fixed-effect coefficients, `p + 1`.
    pub fn n_fixed(&self) -> usize {
        self.p + 1
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(ClusterBlock::n).collect()
    }

    /// All responses, cluster by cluster.
    pub fn stacked_y(&self) -> Vec<f64> {
        self.clusters.iter().flat_map(|c| c.y.iter().copied()).collect()
    }

    /// Stacked `n_total x (p + 1)` design matrix.
    pub fn stacked_x(&self) -> DMatrix<f64> {
        let k = self.n_fixed();
        let mut x = DMatrix::zeros(self.n_total, k);
        let mut row = 0;
        for c in &self.clusters {
            x.rows_mut(row, c.n()).copy_from(&c.x);
            row += c.n();
        }
        x
    }

    /// Same design, new responses. `y` is stacked in cluster order.
    ///
    /// The design is already known to be valid, so only the length is checked.
    pub fn with_stacked_y(&self, y: &[f64]) -> Result<Self> {
        if y.len() != self.n_total {
            return Err(Error::ShapeMismatch(format!(
                "response length {} != {} units",
                y.len(),
                self.n_total
            )));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for c in &mut out.clusters {
            let n = c.y.len();
            c.y.copy_from_slice(&y[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }
}

/// Checks every structural invariant of the data model.
pub fn validate(data: &BlockLmmData) -> Result<()> {
    let clusters = &data.clusters;
    if clusters.is_empty() {
        return Err(Error::ShapeMismatch("no clusters".into()));
    }
    let k = clusters[0].x.ncols();
    if k == 0 {
        return Err(Error::ShapeMismatch("design has no columns".into()));
    }
    for c in clusters {
        if c.y.is_empty() {
            return Err(Error::ShapeMismatch(format!("cluster `{}` is empty", c.id)));
        }
        if c.x.nrows() != c.y.len() {
            return Err(Error::ShapeMismatch(format!(
                "cluster `{}`: y has {} rows but X has {}",
                c.id,
                c.y.len(),
                c.x.nrows()
            )));
        }
        if c.x.ncols() != k {
            return Err(Error::ShapeMismatch(format!(
                "cluster `{}`: X has {} columns, expected {}",
                c.id,
                c.x.ncols(),
                k
            )));
        }
        if c.x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::ShapeMismatch(format!(
                "cluster `{}`: first design column must be all ones",
                c.id
            )));
        }
        if c.y.iter().chain(c.x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "cluster `{}` contains non-finite values",
                c.id
            )));
        }
        match (data.model, c.error_var) {
            (ModelKind::Fhm, None) => return Err(Error::MissingErrorVariance(c.id.clone())),
            (ModelKind::Fhm, Some(v)) if !(v > 0.0 && v.is_finite()) => {
                return Err(Error::InvalidVariance(format!(
                    "cluster `{}`: error variance {v} must be positive",
                    c.id
                )))
            }
            (ModelKind::Fhm, Some(_)) if c.y.len() != 1 => {
                return Err(Error::ShapeMismatch(format!(
                    "Fay-Herriot area `{}` has {} units, expected 1",
                    c.id,
                    c.y.len()
                )))
            }
            (ModelKind::Nerm, Some(_)) => {
                return Err(Error::ShapeMismatch(format!(
                    "cluster `{}`: known error variance given for a unit-level model",
                    c.id
                )))
            }
            _ => {}
        }
    }

    let mut xtx = DMatrix::<f64>::zeros(k, k);
    for c in clusters {
        xtx += c.x.transpose() * &c.x;
    }
    let svd = xtx.svd(false, false);
    let smax = svd.singular_values.max();
    let tol = smax * (k as f64) * 1e-12;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, cols: k });
    }
    Ok(())
}

/// Per-cluster weights `(k_d, m_d)` defining `mu_d = k_d' beta + m_d u_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedParameterSpec {
    pub k: Vec<DVector<f64>>,
    pub m: Vec<f64>,
}

impl MixedParameterSpec {
    pub fn new(k: Vec<DVector<f64>>, m: Vec<f64>) -> Result<Self> {
        if k.len() != m.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} fixed-part weight vectors but {} random-part weights",
                k.len(),
                m.len()
            )));
        }
        Ok(Self { k, m })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub(crate) fn check_against(&self, data: &BlockLmmData) -> Result<()> {
        if self.len() != data.n_clusters() {
            return Err(Error::ShapeMismatch(format!(
                "spec covers {} clusters, data has {}",
                self.len(),
                data.n_clusters()
            )));
        }
        if let Some(bad) = self.k.iter().position(|k| k.len() != data.n_fixed()) {
            return Err(Error::ShapeMismatch(format!(
                "k_{bad} has length {}, expected {}",
                self.k[bad].len(),
                data.n_fixed()
            )));
        }
        Ok(())
    }
}

/// `mu_d = k_d' beta + m_d u_d` for every cluster, in cluster order.
pub fn eval_mixed_parameters(
    data: &BlockLmmData,
    spec: &MixedParameterSpec,
    beta: &DVector<f64>,
    u: &[f64],
) -> Result<Vec<f64>> {
    spec.check_against(data)?;
    if beta.len() != data.n_fixed() {
        return Err(Error::ShapeMismatch(format!(
            "beta has length {}, expected {}",
            beta.len(),
            data.n_fixed()
        )));
    }
    if u.len() != data.n_clusters() {
        return Err(Error::ShapeMismatch(format!(
            "u has length {}, expected {}",
            u.len(),
            data.n_clusters()
        )));
    }
    Ok(spec
        .k
        .iter()
        .zip(&spec.m)
        .zip(u)
        .map(|((k, m), u)| k.dot(beta) + m * u)
        .collect())
}

/// Cluster means: `k_d = mean of the rows of X_d`, `m_d = 1`.
pub fn cluster_mean_spec(data: &BlockLmmData) -> MixedParameterSpec {
    MixedParameterSpec {
        k: data.clusters.iter().map(ClusterBlock::covariate_means).collect(),
        m: vec![1.0; data.n_clusters()],
    }
}
