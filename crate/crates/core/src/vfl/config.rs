use serde::{Deserialize, Serialize};

use super::{Result, VflError};
use crate::dp::DpParams;
use crate::nn::{Activation, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Party-local attribute GANs plus feature extractors and a server-side
    /// shared discriminator.
    #[default]
    Vfl,
    /// One central discriminator over the raw concatenated attributes.
    Centralized,
    /// Party-local attribute GANs only, each party with its own latent
    /// stream; no server.
    LocalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// Minimize `E[log(1 − D(G(z)))]`.
    #[default]
    Saturating,
    /// Minimize `−E[log D(G(z))]`.
    NonSaturating,
}

/// Objective of the feature extractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorLoss {
    /// `β₂ E[log(1 − D_S([f̃₁ … f̃_M]))]`, minimized.
    #[default]
    Literal,
    /// `β₂ L_DS`: the extractors join the shared discriminator in telling
    /// real from synthetic feature vectors.
    SharedDiscriminator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    #[default]
    Mlp,
    /// Frozen identity map (features are the raw local attributes). Only
    /// meaningful for comparing topologies; it sends raw data to the server.
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub extractor_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub shared_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub extractor: ExtractorKind,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            generator_hidden: vec![128, 128],
            discriminator_hidden: vec![128, 64],
            extractor_hidden: vec![128],
            feature_dim: 32,
            shared_hidden: vec![128],
            leaky_slope: 0.2,
            extractor: ExtractorKind::Mlp,
        }
    }
}

impl Architecture {
    pub fn hidden_activation(&self) -> Activation {
        Activation::leaky(self.leaky_slope)
    }

    /// Width of one party's features for `local_attributes · steps` inputs.
    pub fn feature_width(&self, local_attributes: usize, steps: usize) -> usize {
        match self.extractor {
            ExtractorKind::Mlp => self.feature_dim,
            ExtractorKind::Passthrough => local_attributes * steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub topology: Topology,
    pub latent_dim: usize,
    pub batch_size: usize,
    /// `T_max`, counted in iterations (one mini-batch each).
    pub iterations: usize,
    /// Weight of the shared-discriminator term in each generator loss.
    pub beta1: f64,
    /// Scale of the feature-extractor loss.
    pub beta2: f64,
    /// Weight of the central-discriminator term (centralized topology).
    pub lambda: f64,
    pub adam: AdamConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpParams>,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// Synthetic samples drawn for each checkpoint score; `0` means as many as
    /// the training set.
    pub eval_samples: usize,
    pub generator_loss: GeneratorLoss,
    pub extractor_loss: ExtractorLoss,
    pub architecture: Architecture,
    /// Keep a copy of every message payload in the log.
    pub record_payloads: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            topology: Topology::Vfl,
            latent_dim: 16,
            batch_size: 64,
            iterations: 2000,
            beta1: 1.0,
            beta2: 1.0,
            lambda: 1.0,
            adam: AdamConfig::default(),
            dp: None,
            seed: 0,
            checkpoint_every: 50,
            eval_samples: 0,
            generator_loss: GeneratorLoss::Saturating,
            extractor_loss: ExtractorLoss::Literal,
            architecture: Architecture::default(),
            record_payloads: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(VflError::Config(m));
        if self.latent_dim == 0 || self.batch_size == 0 || self.iterations == 0 {
            return fail("latent_dim, batch_size and iterations must be ≥ 1".into());
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("lambda", self.lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and ≥ 0, got {v}"));
            }
        }
        if self.checkpoint_every == 0 {
            return fail("checkpoint_every must be ≥ 1".into());
        }
        let a = &self.architecture;
        if a.feature_dim == 0 || !(a.leaky_slope.is_finite() && a.leaky_slope >= 0.0) {
            return fail("feature_dim must be ≥ 1 and leaky_slope finite and ≥ 0".into());
        }
        let widths = [&a.generator_hidden, &a.discriminator_hidden, &a.extractor_hidden, &a.shared_hidden];
        if widths.iter().any(|w| w.contains(&0)) {
            return fail("hidden widths must be ≥ 1".into());
        }
        self.adam.validate().map_err(|e| VflError::Config(e.to_string()))?;
        if let Some(dp) = &self.dp {
            dp.validate().map_err(|e| VflError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| VflError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
