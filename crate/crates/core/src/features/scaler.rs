use serde::{Deserialize, Serialize};

use crate::features::{Channel, FeatureError, SeasonDataset, Split};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channel: Channel,
    pub mean: f64,
    pub std: f64,
}

/// Per-channel standardization parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub stats: Vec<ChannelStats>,
}

impl ScalerParams {
    pub fn get(&self, channel: Channel) -> Result<ChannelStats, FeatureError> {
        self.stats
            .iter()
            .find(|s| s.channel == channel)
            .copied()
            .ok_or_else(|| FeatureError::UnknownChannel(channel.name().to_string()))
    }

    pub fn scale(&self, channel: Channel, x: f64) -> Result<f64, FeatureError> {
        let s = self.get(channel)?;
        Ok((x - s.mean) / s.std)
    }

    pub fn unscale(&self, channel: Channel, z: f64) -> Result<f64, FeatureError> {
        let s = self.get(channel)?;
        Ok(z * s.std + s.mean)
    }
}

/// Mean and population standard deviation of every channel over the
/// training years. The categorical IOD channel gets the identity transform.
pub fn fit_scaler(dataset: &SeasonDataset) -> Result<ScalerParams, FeatureError> {
    let train: Vec<_> = dataset
        .records
        .iter()
        .filter(|r| r.split == Split::Train)
        .collect();
    if train.is_empty() {
        return Err(FeatureError::EmptyTrainSplit);
    }
    let mut stats = Vec::with_capacity(dataset.channels.len());
    for (ci, &channel) in dataset.channels.iter().enumerate() {
        if channel == Channel::Iod {
            stats.push(ChannelStats {
                channel,
                mean: 0.0,
                std: 1.0,
            });
            continue;
        }
        let values = || train.iter().flat_map(|r| r.daily[ci].iter().copied());
        let n = values().count() as f64;
        let mean = values().sum::<f64>() / n;
        let var = values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(FeatureError::DegenerateChannel(channel.name().to_string()));
        }
        stats.push(ChannelStats { channel, mean, std });
    }
    Ok(ScalerParams { stats })
}

/// Standardizes every daily channel and the stored prior seasons.
/// Seasonal totals stay in millimetres.
pub fn apply_scaler(
    params: &ScalerParams,
    dataset: &SeasonDataset,
) -> Result<SeasonDataset, FeatureError> {
    if dataset.scaled {
        return Ok(dataset.clone());
    }
    let stats: Vec<ChannelStats> = dataset
        .channels
        .iter()
        .map(|&c| params.get(c))
        .collect::<Result<_, _>>()?;
    let rain = params.get(Channel::Rain)?;
    let mut out = dataset.clone();
    for r in &mut out.records {
        for (s, series) in stats.iter().zip(&mut r.daily) {
            series.iter_mut().for_each(|x| *x = (*x - s.mean) / s.std);
        }
        if let Some(p) = &mut r.prior_season {
            p.iter_mut().for_each(|x| *x = (*x - rain.mean) / rain.std);
        }
    }
    out.scaled = true;
    Ok(out)
}

/// Maps standardized values of `channel` back to original units.
pub fn invert_scaler(
    params: &ScalerParams,
    channel: Channel,
    values: &[f64],
) -> Result<Vec<f64>, FeatureError> {
    let s = params.get(channel)?;
    Ok(values.iter().map(|z| z * s.std + s.mean).collect())
}
