use crate::evaluation::EvalError;
use crate::scalar::Scalar;

/// Which RMSE-percentage formula to apply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseConvention {
    /// `sqrt((100 / n) * sum(((obs - pred) / obs)^2))`, factor inside the radical.
    #[default]
    Printed,
    /// `100 * sqrt((1 / n) * sum(((obs - pred) / obs)^2))`.
    Conventional,
}

impl std::str::FromStr for RmseConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "printed" => Ok(Self::Printed),
            "conventional" => Ok(Self::Conventional),
            other => Err(format!(
                "unknown rmse convention {other:?} (expected printed|conventional)"
            )),
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// Relative root-mean-square error in percent.
pub fn rmse_percent<T: Scalar>(obs: &[T], pred: &[T]) -> Result<T, EvalError> {
    rmse_percent_with(obs, pred, RmseConvention::Printed)
}

pub fn rmse_percent_with<T: Scalar>(
    obs: &[T],
    pred: &[T],
    convention: RmseConvention,
) -> Result<T, EvalError> {
    check_lengths(obs.len(), pred.len())?;
    if obs.is_empty() {
        return Err(EvalError::DegenerateN { n: 0, min: 1 });
    }
    if let Some(i) = obs.iter().position(|o| o.is_zero()) {
        return Err(EvalError::ZeroObservation { index: i });
    }
    let sum_sq: T = obs
        .iter()
        .zip(pred)
        .map(|(&o, &p)| {
            let r = (o - p) / o;
            r * r
        })
        .sum();
    let n = T::of(obs.len() as f64);
    let hundred = T::of(100.0);
    Ok(match convention {
        RmseConvention::Printed => (hundred / n * sum_sq).sqrt(),
        RmseConvention::Conventional => hundred * (sum_sq / n).sqrt(),
    })
}

/// Ascending ranks starting at 1; ties share the mean of their positions.
pub fn rank<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("rank of NaN"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean((i+1)..=(j+1))
        let shared = T::of((i + j) as f64 / 2.0 + 1.0);
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation `1 - 6 * sum(d^2) / (n^3 - n)` on average ranks.
pub fn spearman<T: Scalar>(obs: &[T], pred: &[T]) -> Result<T, EvalError> {
    check_lengths(obs.len(), pred.len())?;
    let n = obs.len();
    if n < 2 {
        return Err(EvalError::DegenerateN { n, min: 2 });
    }
    let (ro, rp) = (rank(obs), rank(pred));
    let d2: T = ro.iter().zip(&rp).map(|(&a, &b)| (a - b) * (a - b)).sum();
    let nf = T::of(n as f64);
    let rho = T::one() - T::of(6.0) * d2 / (nf * nf * nf - nf);
    Ok(rho.max(-T::one()).min(T::one()))
}
