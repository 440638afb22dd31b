use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Attribution, Granularity, PlayerPartition};
use crate::features::FeatureTensor;
use crate::{Error, Result};

pub const ATTRIBUTION_MAGIC: &[u8; 8] = b"PHIV0001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RecordMeta {
    sample_index: usize,
    class_index: usize,
    phi0: f64,
    base_value: f64,
    prediction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std_error: Option<Vec<f64>>,
}

/// Header of an attribution file; `φ` values follow as `f32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionHeader {
    pub input_shape: [usize; 5],
    pub granularity: Granularity,
    pub players: usize,
    pub sample_ids: Vec<String>,
    #[serde(default)]
    pub extra: serde_json::Value,
    records: Vec<RecordMeta>,
}

/// `PHIV0001`, `u32` header length, JSON header, then `players` `f32`
/// values per record.
pub fn write_attributions<W: Write>(
    mut w: W,
    input_shape: [usize; 5],
    sample_ids: &[String],
    attributions: &[Attribution],
    extra: serde_json::Value,
) -> Result<()> {
    let granularity = attributions.first().map_or(Granularity::PerKeypoint, |a| a.granularity);
    let players = PlayerPartition::new(granularity, input_shape[0], input_shape[3])?.n_players();
    let mut payload = Vec::with_capacity(attributions.len() * players * 4);
    let mut records = Vec::with_capacity(attributions.len());
    for a in attributions {
        if a.granularity != granularity || a.phi.len() != players {
            return Err(Error::Shape("attributions in one file must share a player layout".into()));
        }
        for &v in &a.phi {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
        records.push(RecordMeta {
            sample_index: a.sample_index,
            class_index: a.class_index,
            phi0: a.phi0,
            base_value: a.base_value,
            prediction: a.prediction,
            std_error: a.std_error.clone(),
        });
    }
    let header =
        AttributionHeader { input_shape, granularity, players, sample_ids: sample_ids.to_vec(), extra, records };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Config("attribution header too large".into()))?;
    w.write_all(ATTRIBUTION_MAGIC)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_attributions<R: Read>(mut r: R) -> Result<(AttributionHeader, Vec<Attribution>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..8] != ATTRIBUTION_MAGIC {
        return Err(Error::corrupt("attribution file", "missing or bad magic"));
    }
    let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(Error::corrupt("attribution file", "truncated header"));
    }
    let header: AttributionHeader = serde_json::from_slice(&body[..len])
        .map_err(|e| Error::corrupt("attribution file", format!("unreadable header: {e}")))?;
    let data = &body[len..];
    if data.len() != header.records.len() * header.players * 4 {
        return Err(Error::corrupt("attribution file", "payload length does not match header"));
    }
    let values: Vec<f64> = data.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    let attrs = header
        .records
        .iter()
        .enumerate()
        .map(|(i, m)| Attribution {
            sample_index: m.sample_index,
            class_index: m.class_index,
            granularity: header.granularity,
            phi: values[i * header.players..(i + 1) * header.players].to_vec(),
            phi0: m.phi0,
            base_value: m.base_value,
            prediction: m.prediction,
            std_error: m.std_error.clone(),
        })
        .collect();
    Ok((header, attrs))
}

/// Mean raw feature value over the cells a player owns.
fn player_feature_means(x: &FeatureTensor, partition: &PlayerPartition) -> Vec<f64> {
    let owners = partition.owner_map(x.shape());
    let mut sum = vec![0.0; partition.n_players()];
    let mut count = vec![0usize; partition.n_players()];
    for (&p, &v) in owners.iter().zip(x.data()) {
        sum[p] += v as f64;
        count[p] += 1;
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect()
}

/// Beeswarm rows `(keypoint, group, sample_id, shap_value, feature_value)`,
/// one per explained sample and player. Players spanning every group use
/// group `all`; players spanning every key point leave `keypoint` empty.
pub fn write_beeswarm<W: Write>(
    w: W,
    attributions: &[Attribution],
    samples: &[FeatureTensor],
    sample_ids: &[String],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["keypoint", "group", "sample_id", "shap_value", "feature_value"])?;
    for a in attributions {
        let x = samples
            .get(a.sample_index)
            .ok_or_else(|| Error::Data(format!("no features for sample {}", a.sample_index)))?;
        let partition = PlayerPartition::for_tensor(a.granularity, x);
        let features = player_feature_means(x, &partition);
        let id = sample_ids.get(a.sample_index).cloned().unwrap_or_else(|| a.sample_index.to_string());
        for (p, &phi) in a.phi.iter().enumerate() {
            let keypoint = partition.keypoint_of(p).map(|k| k.to_string()).unwrap_or_default();
            let group = partition.group_of(p).map_or("all", |g| g.name());
            out.write_record([
                keypoint,
                group.to_string(),
                id.clone(),
                format!("{phi:.9e}"),
                format!("{:.9e}", features[p]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Local explanations: one row per sample, class and player.
pub fn write_local<W: Write>(
    w: W,
    attributions: &[Attribution],
    sample_ids: &[String],
    groups: usize,
    keypoints: usize,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["sample_id", "class", "player", "shap_value", "std_error", "phi0", "prediction"])?;
    for a in attributions {
        let partition = PlayerPartition::new(a.granularity, groups, keypoints)?;
        let id = sample_ids.get(a.sample_index).cloned().unwrap_or_else(|| a.sample_index.to_string());
        for (p, &phi) in a.phi.iter().enumerate() {
            let se = a.std_error.as_ref().map(|s| format!("{:.9e}", s[p])).unwrap_or_default();
            out.write_record([
                id.clone(),
                a.class_index.to_string(),
                partition.label(p),
                format!("{phi:.9e}"),
                se,
                format!("{:.9e}", a.phi0),
                format!("{:.9e}", a.prediction),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
