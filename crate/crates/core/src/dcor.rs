//! Sample distance covariance and distance correlation.
//!
//! All statistics are the V-statistic forms: pairwise distances are
//! double-centered, and the distance covariance is the mean of the
//! elementwise product of two centered matrices,
//!
//! ```text
//! dCov²(X,Y) = 1/n² Σ_kl A_kl B_kl
//! dCor(X,Y)  = sqrt( dCov²(X,Y) / sqrt(dVar²(X) dVar²(Y)) )
//! ```
//!
//! with dCor defined as 0 when either distance variance vanishes.
//! Rows of a [`SampleMatrix`] are observations; columns are coordinates.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// An n×d matrix of finite observations, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Array2<f64>,
}

impl SampleMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "sample matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at flat index {pos}"
            )));
        }
        Ok(Self { data })
    }

    pub fn from_view(view: ArrayView2<'_, f64>) -> Result<Self> {
        Self::new(view.to_owned())
    }

    /// Builds an n×1 sample from scalar observations.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("n x 1"))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// A double-centered pairwise distance matrix: rows and columns sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDistanceMatrix {
    values: Array2<f64>,
}

impl CenteredDistanceMatrix {
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn source_n(&self) -> usize {
        self.values.nrows()
    }

    /// Mean of the elementwise product with another centered matrix.
    pub fn inner(&self, other: &CenteredDistanceMatrix) -> f64 {
        let n = self.source_n() as f64;
        let sum: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum();
        sum / (n * n)
    }
}

fn p_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, p: f64) -> f64 {
    if p == 2.0 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    } else if p == 1.0 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
    } else if p.is_infinite() {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    } else {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Pairwise p-norm distances between the rows of `x`.
///
/// `p` must be at least 1; `f64::INFINITY` selects the max norm.
pub fn pairwise_distance_matrix(x: &SampleMatrix, p: f64) -> Result<Array2<f64>> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidInput(format!("norm order must be >= 1, got {p}")));
    }
    let n = x.n();
    let data = x.data();
    let mut out = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        for l in (k + 1)..n {
            let d = p_distance(data.row(k), data.row(l), p);
            out[[k, l]] = d;
            out[[l, k]] = d;
        }
    }
    Ok(out)
}

/// Subtracts row and column means and adds back the grand mean.
pub fn double_center(d: ArrayView2<'_, f64>) -> Result<CenteredDistanceMatrix> {
    let n = d.nrows();
    if n == 0 || d.ncols() != n {
        return Err(Error::Dimension(format!(
            "distance matrix must be square and non-empty, got {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite distance".into()));
    }
    let nf = n as f64;
    let row_means: Vec<f64> = d.rows().into_iter().map(|r| r.sum() / nf).collect();
    let col_means: Vec<f64> = d.columns().into_iter().map(|c| c.sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    let mut values = d.to_owned();
    for ((k, l), v) in values.indexed_iter_mut() {
        *v = *v - row_means[k] - col_means[l] + grand;
    }
    Ok(CenteredDistanceMatrix { values })
}

/// Double-centered Euclidean distance matrix of the rows of `x`.
pub fn centered_distances(x: &SampleMatrix) -> CenteredDistanceMatrix {
    let d = pairwise_distance_matrix(x, 2.0).expect("p = 2 is valid");
    double_center(d.view()).expect("square finite matrix")
}

fn check_paired(x: &SampleMatrix, y: &SampleMatrix) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::Dimension(format!(
            "paired samples need equal counts, got {} and {}",
            x.n(),
            y.n()
        )));
    }
    Ok(())
}

/// Squared sample distance covariance, clamped at 0 from below.
pub fn dcov2(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    check_paired(x, y)?;
    let a = centered_distances(x);
    let b = centered_distances(y);
    Ok(a.inner(&b).max(0.0))
}

/// Squared sample distance variance, `dcov2(x, x)`.
pub fn dvar2(x: &SampleMatrix) -> f64 {
    let a = centered_distances(x);
    a.inner(&a).max(0.0)
}

/// The three second moments behind one distance correlation value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcorStats {
    pub dcov2: f64,
    pub dvar2_x: f64,
    pub dvar2_y: f64,
    pub dcor: f64,
}

impl DcorStats {
    fn from_centered(a: &CenteredDistanceMatrix, b: &CenteredDistanceMatrix) -> Self {
        let dcov2 = a.inner(b).max(0.0);
        let dvar2_x = a.inner(a).max(0.0);
        let dvar2_y = b.inner(b).max(0.0);
        let denom = dvar2_x * dvar2_y;
        let dcor = if denom > 0.0 {
            (dcov2 / denom.sqrt()).sqrt().clamp(0.0, 1.0)
        } else {
            0.0
        };
        Self {
            dcov2,
            dvar2_x,
            dvar2_y,
            dcor,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.dvar2_x > 0.0 && self.dvar2_y > 0.0)
    }
}

pub fn dcor_stats(x: &SampleMatrix, y: &SampleMatrix) -> Result<DcorStats> {
    check_paired(x, y)?;
    if x.n() < 2 {
        return Err(Error::DegenerateSample(format!(
            "distance correlation needs at least 2 samples, got {}",
            x.n()
        )));
    }
    Ok(DcorStats::from_centered(
        &centered_distances(x),
        &centered_distances(y),
    ))
}

/// Sample distance correlation in [0, 1].
pub fn dcor(x: &SampleMatrix, y: &SampleMatrix) -> Result<f64> {
    dcor_stats(x, y).map(|s| s.dcor)
}

/// Gradient of `dcor(x, y)` with respect to every entry of `y`, `x` held fixed.
///
/// Centering is a linear projection, so `Σ A_kl B_kl = Σ A_kl b_kl` and the
/// derivative with respect to a raw distance `b_kl` is
///
/// ```text
/// ∂R/∂b_kl = (A_kl / sqrt(vx vy) − R² B_kl / vy) / (2 R n²)
/// ```
///
/// which is pushed through `b_kl = |y_k − y_l|`. Pairs of coincident rows
/// contribute nothing. When the distance covariance is exactly zero the
/// square root has no derivative and the returned gradient is zero.
pub fn dcor_gradient(x: &SampleMatrix, y: &SampleMatrix) -> Result<Array2<f64>> {
    dcor_with_gradient(x, y).map(|(_, g)| g)
}

/// `dcor(x, y)` together with its gradient in `y`.
pub fn dcor_with_gradient(x: &SampleMatrix, y: &SampleMatrix) -> Result<(f64, Array2<f64>)> {
    check_paired(x, y)?;
    let n = y.n();
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "distance correlation needs at least 2 samples, got {n}"
        )));
    }
    let a = centered_distances(x);
    let b_raw = pairwise_distance_matrix(y, 2.0)?;
    let b = double_center(b_raw.view())?;
    let stats = DcorStats::from_centered(&a, &b);
    if stats.dvar2_x <= 0.0 {
        return Err(Error::DegenerateGradient(
            "fixed argument has zero distance variance".into(),
        ));
    }
    if stats.dvar2_y <= 0.0 {
        return Err(Error::DegenerateGradient(
            "variable argument has zero distance variance".into(),
        ));
    }

    let mut grad = Array2::<f64>::zeros(y.data().raw_dim());
    if stats.dcov2 <= 0.0 {
        return Ok((stats.dcor, grad));
    }

    let nf = n as f64;
    let r2 = stats.dcov2 / (stats.dvar2_x * stats.dvar2_y).sqrt();
    let r = r2.sqrt();
    let inv_sqrt_vv = 1.0 / (stats.dvar2_x * stats.dvar2_y).sqrt();
    let scale = 1.0 / (2.0 * r * nf * nf);
    let av = a.values();
    let bv = b.values();
    let yd = y.data();
    let q = y.dim();

    for k in 0..n {
        for l in (k + 1)..n {
            let dist = b_raw[[k, l]];
            if dist <= 0.0 {
                continue;
            }
            let g = scale * (av[[k, l]] * inv_sqrt_vv - r2 * bv[[k, l]] / stats.dvar2_y);
            // b_kl and b_lk are the same distance; both entries of the sum land here.
            let coeff = 2.0 * g / dist;
            for j in 0..q {
                let diff = coeff * (yd[[k, j]] - yd[[l, j]]);
                grad[[k, j]] += diff;
                grad[[l, j]] -= diff;
            }
        }
    }
    Ok((stats.dcor, grad))
}

/// Row sums and column sums of a centered matrix, for invariant checks.
pub fn margin_sums(c: &CenteredDistanceMatrix) -> (Vec<f64>, Vec<f64>) {
    let v = c.values();
    (
        v.sum_axis(Axis(1)).to_vec(),
        v.sum_axis(Axis(0)).to_vec(),
    )
}
