use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

/// Which pipeline stage a request serves. Each role maps to a configured model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Planner,
    BlockGenerator,
    Merger,
    Scorer,
    Extractor,
    Prober,
    /// Yes/No judgments during evaluation (matching, failure analysis).
    Judge,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Planner,
        Role::BlockGenerator,
        Role::Merger,
        Role::Scorer,
        Role::Extractor,
        Role::Prober,
        Role::Judge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::BlockGenerator => "block-generator",
            Role::Merger => "merger",
            Role::Scorer => "scorer",
            Role::Extractor => "extractor",
            Role::Prober => "prober",
            Role::Judge => "judge",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Sampling {
    pub fn greedy(max_tokens: u32) -> Self {
        Self { temperature: 0.0, max_tokens, seed: None }
    }
}

impl Default for Sampling {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: 4096, seed: None }
    }
}

/// An image sent alongside a prompt. Identity is the content digest; the
/// label is informational only.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageAttachment {
    pub label: String,
    pub media_type: String,
    pub digest: String,
    data: Arc<[u8]>,
}

impl ImageAttachment {
    pub fn new(label: impl Into<String>, media_type: impl Into<String>, data: Vec<u8>) -> Self {
        Self {
            label: label.into(),
            media_type: media_type.into(),
            digest: sha256_hex(&data),
            data: data.into(),
        }
    }

    pub fn png(label: impl Into<String>, data: Vec<u8>) -> Self {
        Self::new(label, "image/png", data)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

impl fmt::Debug for ImageAttachment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageAttachment")
            .field("label", &self.label)
            .field("media_type", &self.media_type)
            .field("digest", &self.digest)
            .field("len", &self.data.len())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub role: Role,
    pub model: String,
    pub prompt: String,
    pub images: Vec<ImageAttachment>,
    pub sampling: Sampling,
    /// Answer tokens whose logits are wanted. Scorer requests name exactly two.
    pub targets: Vec<String>,
}

impl ModelRequest {
    pub fn new(role: Role, model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            role,
            model: model.into(),
            prompt: prompt.into(),
            images: Vec::new(),
            sampling: Sampling::default(),
            targets: Vec::new(),
        }
    }

    pub fn with_sampling(mut self, sampling: Sampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_image(mut self, image: ImageAttachment) -> Self {
        self.images.push(image);
        self
    }

    pub fn with_targets<I, S>(mut self, targets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.targets = targets.into_iter().map(Into::into).collect();
        self
    }

    /// Checks the structural preconditions shared by every operation.
    pub fn validate(&self, max_images: usize) -> Result<(), String> {
        if self.prompt.trim().is_empty() {
            return Err("prompt is empty".into());
        }
        if !(self.sampling.temperature.is_finite() && self.sampling.temperature >= 0.0) {
            return Err(format!("temperature must be a finite value >= 0, got {}", self.sampling.temperature));
        }
        if self.sampling.max_tokens == 0 {
            return Err("max output length must be > 0".into());
        }
        if self.images.len() > max_images {
            return Err(format!(
                "{} images attached but the screenshot budget allows {max_images}",
                self.images.len()
            ));
        }
        if self.role == Role::Scorer && self.targets.len() != 2 {
            return Err(format!(
                "scorer requests must name exactly two answer tokens, got {}",
                self.targets.len()
            ));
        }
        Ok(())
    }
}

/// Which gateway operation a key addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Completion,
    Logits,
}

/// Content address of a request: SHA-256 over a canonical JSON encoding of
/// every request field (images by digest).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplayKey(String);

#[derive(Serialize)]
struct KeyMaterial<'a> {
    op: Operation,
    role: Role,
    model: &'a str,
    prompt: &'a str,
    images: Vec<&'a str>,
    temperature: f64,
    max_tokens: u32,
    seed: Option<u64>,
    targets: &'a [String],
}

impl ReplayKey {
    pub fn new(op: Operation, req: &ModelRequest) -> Self {
        let material = KeyMaterial {
            op,
            role: req.role,
            model: &req.model,
            prompt: &req.prompt,
            images: req.images.iter().map(|i| i.digest.as_str()).collect(),
            temperature: req.sampling.temperature,
            max_tokens: req.sampling.max_tokens,
            seed: req.sampling.seed,
            targets: &req.targets,
        };
        let encoded = serde_json::to_vec(&material).expect("key material serializes");
        ReplayKey(sha256_hex(&encoded))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ReplayKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelRequest {
        ModelRequest::new(Role::Scorer, "vlm-small", "Is this complete?")
            .with_image(ImageAttachment::png("shot", vec![1, 2, 3]))
            .with_targets(["Yes", "No"])
    }

    #[test]
    fn identical_requests_share_a_key() {
        assert_eq!(ReplayKey::new(Operation::Logits, &base()), ReplayKey::new(Operation::Logits, &base()));
    }

    #[test]
    fn every_field_perturbation_changes_the_key() {
        let k0 = ReplayKey::new(Operation::Logits, &base());
        let mut variants: Vec<ModelRequest> = Vec::new();
        let mut r = base();
        r.role = Role::Prober;
        variants.push(r);
        let mut r = base();
        r.model.push('x');
        variants.push(r);
        let mut r = base();
        r.prompt.push(' ');
        variants.push(r);
        let mut r = base();
        r.images = vec![ImageAttachment::png("shot", vec![1, 2, 4])];
        variants.push(r);
        let mut r = base();
        r.images.clear();
        variants.push(r);
        let mut r = base();
        r.sampling.temperature = 0.5;
        variants.push(r);
        let mut r = base();
        r.sampling.max_tokens += 1;
        variants.push(r);
        let mut r = base();
        r.sampling.seed = Some(1);
        variants.push(r);
        let mut r = base();
        r.targets = vec!["yes".into(), "No".into()];
        variants.push(r);
        for v in &variants {
            assert_ne!(ReplayKey::new(Operation::Logits, v), k0, "{v:?}");
        }
        assert_ne!(ReplayKey::new(Operation::Completion, &base()), k0);
    }

    #[test]
    fn image_label_is_not_identity() {
        let mut r = base();
        r.images = vec![ImageAttachment::png("renamed", vec![1, 2, 3])];
        assert_eq!(ReplayKey::new(Operation::Logits, &r), ReplayKey::new(Operation::Logits, &base()));
    }

    #[test]
    fn validation() {
        assert!(base().validate(1).is_ok());
        assert!(base().validate(0).unwrap_err().contains("screenshot budget"));
        let mut r = base();
        r.prompt = "  ".into();
        assert!(r.validate(4).is_err());
        let mut r = base();
        r.targets.pop();
        assert!(r.validate(4).unwrap_err().contains("exactly two"));
        let mut r = base();
        r.sampling.temperature = -0.1;
        assert!(r.validate(4).is_err());
        let mut r = base();
        r.sampling.max_tokens = 0;
        assert!(r.validate(4).is_err());
    }
}
