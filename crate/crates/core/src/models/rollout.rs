use serde::Serialize;

use crate::features::{Channel, ScalerParams, YearRecord};
use crate::ingest::JJAS_DAYS;
use crate::models::{ModelError, Network};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeasonForecast {
    pub year: i32,
    /// Daily rain in mm, clamped at zero.
    pub daily: Vec<f64>,
    pub total: f64,
}

fn check_record(record: &YearRecord, channels: usize) -> Result<&[f64], ModelError> {
    if record.daily.len() != channels {
        return Err(ModelError::MissingExogenous(format!(
            "year {}: model reads {channels} channels, record has {}",
            record.year,
            record.daily.len()
        )));
    }
    record
        .prior_season
        .as_deref()
        .ok_or(ModelError::MissingSeed(record.year))
}

/// Day-major `[w, channels]` input ending the day before `day`. Rain before
/// June 1 comes from the prior season; exogenous channels come from the
/// target year, with days before June 1 taking the June 1 value.
fn window_at(
    record: &YearRecord,
    prior: &[f64],
    predicted: &[f64],
    day: usize,
    w: usize,
    out: &mut Vec<f64>,
) {
    for j in 0..w {
        let d = day as isize - w as isize + j as isize;
        let rain = if d < 0 {
            prior[(JJAS_DAYS as isize + d) as usize]
        } else {
            predicted[d as usize]
        };
        out.push(rain);
        let di = d.max(0) as usize;
        out.extend(record.daily[1..].iter().map(|ch| ch[di]));
    }
}

/// Model input at June 1: last `w` days of the prior season plus the target
/// year's exogenous channels. `record` must be in scaled units.
pub fn seed_window(record: &YearRecord, w: usize) -> Result<Vec<f64>, ModelError> {
    let prior = record
        .prior_season
        .as_deref()
        .ok_or(ModelError::MissingSeed(record.year))?;
    if w > JJAS_DAYS {
        return Err(ModelError::ShapeMismatch(format!(
            "window {w} longer than a season"
        )));
    }
    let mut out = Vec::with_capacity(w * record.daily.len());
    window_at(record, prior, &[], 0, w, &mut out);
    Ok(out)
}

/// Forecasts all 122 days of each record's season by feeding predictions
/// back as the rain channel, `horizon` days per step. Records must be scaled.
pub fn rollout_season<T: Scalar, N: Network<T>>(
    net: &N,
    scaler: &ScalerParams,
    records: &[&YearRecord],
) -> Result<Vec<SeasonForecast>, ModelError> {
    let (w, h, c) = (net.steps(), net.horizon(), net.channels());
    let priors: Vec<&[f64]> = records
        .iter()
        .map(|r| check_record(r, c))
        .collect::<Result<_, _>>()?;
    let rain = scaler.get(Channel::Rain)?;
    let mut scaled: Vec<Vec<f64>> = vec![Vec::with_capacity(JJAS_DAYS + h); records.len()];
    let mut mm: Vec<Vec<f64>> = vec![Vec::with_capacity(JJAS_DAYS + h); records.len()];
    let mut day = 0;
    while day < JJAS_DAYS {
        let mut inputs = Vec::with_capacity(records.len() * w * c);
        for (i, r) in records.iter().enumerate() {
            window_at(r, priors[i], &scaled[i], day, w, &mut inputs);
        }
        let inputs: Vec<T> = inputs.into_iter().map(T::of).collect();
        let out = net.predict(&inputs, records.len())?;
        let take = h.min(JJAS_DAYS - day);
        for i in 0..records.len() {
            for z in &out[i * h..i * h + take] {
                let v = (z.as_f64() * rain.std + rain.mean).max(0.0);
                mm[i].push(v);
                scaled[i].push((v - rain.mean) / rain.std);
            }
        }
        day += take;
    }
    Ok(records
        .iter()
        .zip(mm)
        .map(|(r, daily)| SeasonForecast {
            year: r.year,
            total: daily.iter().sum(),
            daily,
        })
        .collect())
}

/// Seed windows of `records`, flattened, for direct total regression.
pub fn direct_inputs(records: &[&YearRecord], w: usize) -> Result<Vec<f64>, ModelError> {
    let mut out = Vec::new();
    for r in records {
        out.extend(seed_window(r, w)?);
    }
    Ok(out)
}

/// Seasonal total from a direct-mode output, which is the season's mean
/// daily rain in scaled rain units.
pub fn direct_total_from_output(scaler: &ScalerParams, z: f64) -> Result<f64, ModelError> {
    let rain = scaler.get(Channel::Rain)?;
    Ok((z * rain.std + rain.mean).max(0.0) * JJAS_DAYS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{ParamSet, Tape, Tensor, Var};
    use crate::features::{ChannelStats, Split};
    use crate::models::{Mode, PatchConfig, PatchTst};

    /// Always outputs `value`, ignoring its input.
    struct Constant {
        params: ParamSet<f64>,
        channels: usize,
    }

    impl Constant {
        fn new(value: f64, channels: usize) -> Self {
            let mut params = ParamSet::new();
            params.insert("b", Tensor::from_f64(vec![1], &[value]).unwrap());
            Self { params, channels }
        }
    }

    impl Network<f64> for Constant {
        fn params(&self) -> &ParamSet<f64> {
            &self.params
        }
        fn params_mut(&mut self) -> &mut ParamSet<f64> {
            &mut self.params
        }
        fn steps(&self) -> usize {
            30
        }
        fn channels(&self) -> usize {
            self.channels
        }
        fn horizon(&self) -> usize {
            1
        }
        fn forward(
            &self,
            tape: &Tape<f64>,
            p: &[Var],
            x: Var,
            _: &mut Mode<'_>,
        ) -> Result<Var, ModelError> {
            let n = tape.shape(x)[0];
            let zero = tape.mul_scalar(
                tape.slice(tape.reshape(x, &[n, 30 * self.channels])?, 1, 0, 1)?,
                0.0,
            )?;
            Ok(tape.add(zero, p[0])?)
        }
    }

    fn scaler() -> ScalerParams {
        ScalerParams {
            stats: vec![
                ChannelStats {
                    channel: Channel::Rain,
                    mean: 7.0,
                    std: 4.0,
                },
                ChannelStats {
                    channel: Channel::Nino34,
                    mean: 0.0,
                    std: 1.0,
                },
                ChannelStats {
                    channel: Channel::Iod,
                    mean: 0.0,
                    std: 1.0,
                },
            ],
        }
    }

    fn record(channels: usize, exo: f64) -> YearRecord {
        YearRecord {
            year: 2015,
            split: Split::Test,
            daily: (0..channels)
                .map(|c| vec![if c == 0 { 0.3 } else { exo }; 122])
                .collect(),
            nino_window: None,
            iod_window: None,
            prior_season: Some((0..122).map(|i| (i as f64 * 0.37).sin()).collect()),
            seasonal_total: 0.0,
        }
    }

    #[test]
    fn constant_five_mm_gives_610() {
        let net = Constant::new((5.0 - 7.0) / 4.0, 1);
        let r = record(1, 0.0);
        let f = rollout_season(&net, &scaler(), &[&r]).unwrap();
        assert_eq!(f[0].daily.len(), 122);
        assert!((f[0].total - 610.0).abs() < 1e-9);
    }

    #[test]
    fn negative_forecasts_clamp_to_zero() {
        let net = Constant::new((-1.0 - 7.0) / 4.0, 1);
        let f = rollout_season(&net, &scaler(), &[&record(1, 0.0)]).unwrap();
        assert_eq!(f[0].total, 0.0);
    }

    #[test]
    fn single_channel_model_ignores_exogenous_values() {
        let net = PatchTst::<f64>::new(PatchConfig::default(), 1, 11).unwrap();
        let a = record(1, 0.0);
        let mut b = a.clone();
        b.nino_window = Some(vec![3.0; 13]);
        b.iod_window = Some(vec![1.0; 12]);
        let fa = rollout_season(&net, &scaler(), &[&a]).unwrap();
        let fb = rollout_season(&net, &scaler(), &[&b]).unwrap();
        assert_eq!(fa, fb);
        assert!(fa[0].daily.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn multi_step_horizon_is_truncated_to_the_season() {
        let cfg = PatchConfig {
            horizon: 5,
            ..Default::default()
        };
        let net = PatchTst::<f64>::new(cfg, 3, 0).unwrap();
        let f = rollout_season(&net, &scaler(), &[&record(3, 0.5), &record(3, -0.5)]).unwrap();
        assert!(f.iter().all(|s| s.daily.len() == 122));
        assert_ne!(f[0].daily, f[1].daily);
    }

    #[test]
    fn channel_mismatch_and_missing_seed() {
        let net = PatchTst::<f64>::new(PatchConfig::default(), 3, 0).unwrap();
        assert!(matches!(
            rollout_season(&net, &scaler(), &[&record(1, 0.0)]),
            Err(ModelError::MissingExogenous(_))
        ));
        let mut r = record(3, 0.0);
        r.prior_season = None;
        assert_eq!(
            rollout_season(&net, &scaler(), &[&r]),
            Err(ModelError::MissingSeed(2015))
        );
    }

    #[test]
    fn seed_window_layout() {
        let r = record(2, 0.25);
        let s = seed_window(&r, 30).unwrap();
        assert_eq!(s.len(), 60);
        assert_eq!(s[0], r.prior_season.as_ref().unwrap()[92]);
        assert_eq!(s[58], r.prior_season.as_ref().unwrap()[121]);
        assert!(s.iter().skip(1).step_by(2).all(|&v| v == 0.25));
        assert!((direct_total_from_output(&scaler(), -0.5).unwrap() - 5.0 * 122.0).abs() < 1e-9);
    }
}
