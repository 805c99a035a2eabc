//! Threshold persistence: a small JSON document binding the decision
//! threshold to the stats file that produced the calibration scores.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ontopic_core::calibrate::{Threshold, ThresholdMethod};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub delta: f64,
    /// "eer" or "quantile".
    pub method: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, serde_json::Value>,
    /// Hex SHA-256 of the stats file used for calibration; empty for
    /// head-score models that need no stats.
    #[serde(default)]
    pub source_stats_hash: String,
}

impl ThresholdFile {
    pub fn from_eer(report: &ontopic_core::calibrate::EerReport, stats_hash: &str) -> Self {
        let mut params = serde_json::Map::new();
        params.insert("fpr".into(), report.fpr.into());
        params.insert("fnr".into(), report.fnr.into());
        Self {
            delta: report.threshold.delta,
            method: "eer".into(),
            params,
            source_stats_hash: stats_hash.to_string(),
        }
    }

    pub fn from_quantile(threshold: &Threshold, stats_hash: &str) -> Self {
        let mut params = serde_json::Map::new();
        if let ThresholdMethod::Quantile { q } = threshold.method {
            params.insert("q".into(), q.into());
        }
        Self {
            delta: threshold.delta,
            method: "quantile".into(),
            params,
            source_stats_hash: stats_hash.to_string(),
        }
    }

    pub fn threshold(&self) -> anyhow::Result<Threshold> {
        let method = match self.method.as_str() {
            "eer" => ThresholdMethod::Eer,
            "quantile" => {
                let q = self
                    .params
                    .get("q")
                    .and_then(serde_json::Value::as_f64)
                    .ok_or_else(|| anyhow::anyhow!("quantile threshold missing param q"))?;
                ThresholdMethod::Quantile { q }
            }
            other => anyhow::bail!("unknown threshold method '{other}'"),
        };
        if !self.delta.is_finite() {
            anyhow::bail!("threshold delta is not finite");
        }
        Ok(Threshold { delta: self.delta, method })
    }
}

pub fn write(path: &Path, file: &ThresholdFile) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read(path: &Path) -> anyhow::Result<ThresholdFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read threshold {}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
