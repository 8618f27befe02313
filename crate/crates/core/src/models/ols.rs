use serde::{Deserialize, Serialize};

use crate::models::ModelError;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsConfig {
    /// Ridge penalty on standardized coefficients, used when there are fewer
    /// rows than features + 1. `None` makes that case a `SingularSystem`.
    pub ridge_fallback: Option<f64>,
}

impl Default for OlsConfig {
    fn default() -> Self {
        Self {
            ridge_fallback: Some(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsModel<T> {
    pub intercept: T,
    pub coefficients: Vec<T>,
    /// Penalty actually applied, if the fallback engaged.
    pub ridge: Option<f64>,
}

/// Least squares with intercept. Columns are standardized and the target
/// centred before a Householder QR solve; constant columns get a zero
/// coefficient.
pub fn ols_fit<T: Scalar>(
    features: &[Vec<T>],
    targets: &[T],
    config: &OlsConfig,
) -> Result<OlsModel<T>, ModelError> {
    let n = features.len();
    if n == 0 || targets.len() != n {
        return Err(ModelError::EmptyTable);
    }
    let p = features[0].len();
    if features.iter().any(|f| f.len() != p) {
        return Err(ModelError::ShapeMismatch("ragged feature rows".into()));
    }
    let nf = T::of(n as f64);
    let y_mean = targets.iter().copied().sum::<T>() / nf;
    let mut means = vec![T::zero(); p];
    let mut stds = vec![T::zero(); p];
    for j in 0..p {
        let m = features.iter().map(|f| f[j]).sum::<T>() / nf;
        let v = features.iter().map(|f| (f[j] - m) * (f[j] - m)).sum::<T>() / nf;
        means[j] = m;
        stds[j] = v.sqrt();
    }
    let active: Vec<usize> = (0..p).filter(|&j| stds[j] > T::zero()).collect();
    let k = active.len();
    let ridge = if n < k + 1 {
        Some(config.ridge_fallback.ok_or(ModelError::SingularSystem)?)
    } else {
        None
    };
    let rows = n + if ridge.is_some() { k } else { 0 };
    // column-major design matrix
    let mut a = vec![T::zero(); rows * k];
    let mut b = vec![T::zero(); rows];
    for (c, &j) in active.iter().enumerate() {
        for i in 0..n {
            a[c * rows + i] = (features[i][j] - means[j]) / stds[j];
        }
        if let Some(lambda) = ridge {
            a[c * rows + n + c] = T::of(lambda.sqrt());
        }
    }
    for i in 0..n {
        b[i] = targets[i] - y_mean;
    }
    let beta = householder_solve(&mut a, &mut b, rows, k)?;
    let mut coefficients = vec![T::zero(); p];
    let mut intercept = y_mean;
    for (c, &j) in active.iter().enumerate() {
        coefficients[j] = beta[c] / stds[j];
        intercept -= coefficients[j] * means[j];
    }
    Ok(OlsModel {
        intercept,
        coefficients,
        ridge,
    })
}

/// Least-squares solution of the column-major `rows x k` system.
fn householder_solve<T: Scalar>(
    a: &mut [T],
    b: &mut [T],
    rows: usize,
    k: usize,
) -> Result<Vec<T>, ModelError> {
    let mut diag = vec![T::zero(); k];
    for c in 0..k {
        let col = &mut a[c * rows..(c + 1) * rows];
        let norm = col[c..].iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(ModelError::SingularSystem);
        }
        let alpha = if col[c] > T::zero() { -norm } else { norm };
        col[c] -= alpha;
        let vnorm2 = col[c..].iter().map(|v| *v * *v).sum::<T>();
        diag[c] = alpha;
        let v: Vec<T> = col[c..].to_vec();
        for cc in c + 1..k {
            let other = &mut a[cc * rows..(cc + 1) * rows];
            let dot = v.iter().zip(&other[c..]).map(|(x, y)| *x * *y).sum::<T>();
            let s = T::of(2.0) * dot / vnorm2;
            for (o, vi) in other[c..].iter_mut().zip(&v) {
                *o -= s * *vi;
            }
        }
        let dot = v.iter().zip(&b[c..]).map(|(x, y)| *x * *y).sum::<T>();
        let s = T::of(2.0) * dot / vnorm2;
        for (o, vi) in b[c..].iter_mut().zip(&v) {
            *o -= s * *vi;
        }
    }
    let scale = diag.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= scale * T::of(1e-12)) {
        return Err(ModelError::SingularSystem);
    }
    let mut x = vec![T::zero(); k];
    for c in (0..k).rev() {
        let mut s = b[c];
        for cc in c + 1..k {
            s -= a[cc * rows + c] * x[cc];
        }
        x[c] = s / diag[c];
    }
    Ok(x)
}

pub fn ols_predict<T: Scalar>(model: &OlsModel<T>, features: &[T]) -> T {
    model
        .coefficients
        .iter()
        .zip(features)
        .fold(model.intercept, |acc, (c, x)| acc + *c * *x)
}
