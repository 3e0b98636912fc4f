//! JSON documents bundling a subspace, a scene and an observation.
//!
//! Complex numbers are `[re, im]` pairs, shifts are `[tau, f]` pairs, D is
//! stored row by row for l = −N…N and y in ascending p.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Observation, Scene, Subspace};
use crate::{Error, Result};

pub const DOCUMENT_SCHEMA: &str = "bdsr-document";
pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub schema: String,
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub rng: Option<String>,
    #[serde(default)]
    pub subspace: Option<Subspace>,
    #[serde(default)]
    pub scene: Option<Scene>,
    #[serde(default)]
    pub observation: Option<Observation>,
}

impl Document {
    pub fn new(seed: Option<u64>) -> Self {
        Document {
            schema: DOCUMENT_SCHEMA.into(),
            version: DOCUMENT_VERSION,
            seed,
            rng: Some(crate::rng::ALGORITHM.into()),
            subspace: None,
            scene: None,
            observation: None,
        }
    }

    /// Structural checks beyond what deserialisation enforces.
    pub fn validate(&self) -> Result<()> {
        if self.schema != DOCUMENT_SCHEMA || self.version != DOCUMENT_VERSION {
            return Err(Error::Invalid(format!("unsupported document {} v{}", self.schema, self.version)));
        }
        if let Some(s) = &self.subspace {
            s.validate()?;
        }
        if let Some(sc) = &self.scene {
            sc.validate(self.subspace.as_ref().map(|s| s.k))?;
        }
        if let (Some(o), Some(s)) = (&self.observation, &self.subspace) {
            if o.y.len() != s.l {
                return Err(Error::Dimension(format!("y has length {}, subspace has L={}", o.y.len(), s.l)));
            }
        }
        if let Some(o) = &self.observation {
            if o.y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Invalid("y has non-finite entries".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialise")
    }
}

pub fn parse_document(bytes: &[u8]) -> Result<Document> {
    let d: Document = serde_json::from_slice(bytes)?;
    d.validate()?;
    Ok(d)
}

/// SHA-256 of the compact JSON form.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serialisable");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
