use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::DatasetConfig;
use crate::handover::HandoverConfig;
use crate::network::ModelConfig;
use crate::training::TrainConfig;
use crate::{Error, Result};

/// Every setting of a run. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub handover: HandoverConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.handover.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Canonical JSON: fields in declaration order, every default spelled out.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Serialises a flag as `"on"` / `"off"`.
pub(crate) mod on_off {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(if *v { "on" } else { "off" })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match String::deserialize(d)?.as_str() {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(serde::de::Error::custom(format!("expected \"on\" or \"off\", got \"{other}\""))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::HandFeatureMode;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.weights.depth, 200.0);
        assert_eq!(c.train.weights.prob, 10.0);
        assert_eq!(c.train.weights.norm, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_depth() {
        for text in [r#"{"extra": 1}"#, r#"{"model": {"width": 3}}"#, r#"{"train": {"weights": {"smooth": 1}}}"#] {
            assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn ablation_switches_parse() {
        let c =
            RunConfig::from_json(r#"{"model": {"hand_feature": "2d", "point_fusion": "off", "multiscale": "off"}}"#)
                .unwrap();
        assert_eq!(c.model.hand_feature, HandFeatureMode::TwoD);
        assert!(!c.model.point_fusion && !c.model.multiscale);
        assert!(RunConfig::from_json(r#"{"model": {"point_fusion": true}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model": {"hand_feature": "4d"}}"#).is_err());
    }

    #[test]
    fn canonical_form_round_trips_and_hash_tracks_content() {
        let c = RunConfig::default();
        let back = RunConfig::from_json(&c.canonical_json()).unwrap();
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        let mut d = c.clone();
        d.train.seed = 1;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(RunConfig::from_json(r#"{"train": {"lr": -1.0}}"#), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"dataset": {"scenes": 0}}"#), Err(Error::Config(_))));
    }
}
