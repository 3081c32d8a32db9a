use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Head, Mlp};
use super::params::{init_linear, BlockInfo, LayoutBuilder, Linear};
use crate::features::EmbeddingLayout;
use crate::{Error, Result};

/// Which hand information reaches the decoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HandFeatureMode {
    /// Hand features are zeroed.
    Off,
    /// Keypoint depth (z) is zeroed before feature construction.
    #[serde(rename = "2d")]
    TwoD,
    #[default]
    #[serde(rename = "3d")]
    ThreeD,
}

/// Architecture and ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Channels of the first pyramid level; level `i` has `i * base_channels`.
    pub base_channels: usize,
    pub dense_channels: usize,
    pub point_xyz_dim: usize,
    pub point_rgb_dim: usize,
    pub voxel_hidden: usize,
    pub voxel_dim: usize,
    pub decoder_hidden: Vec<usize>,
    pub pe_octaves: usize,
    pub grid_resolution: usize,
    pub grid_margin: f64,
    pub hand_feature: HandFeatureMode,
    #[serde(with = "crate::io::on_off")]
    pub point_fusion: bool,
    #[serde(with = "crate::io::on_off")]
    pub multiscale: bool,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            base_channels: 16,
            dense_channels: 32,
            point_xyz_dim: 16,
            point_rgb_dim: 16,
            voxel_hidden: 32,
            voxel_dim: 64,
            decoder_hidden: vec![256, 128],
            pe_octaves: 5,
            grid_resolution: 8,
            grid_margin: 0.05,
            hand_feature: HandFeatureMode::ThreeD,
            point_fusion: true,
            multiscale: true,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn embedding_layout(&self) -> EmbeddingLayout {
        EmbeddingLayout::new(4 * self.dense_channels, self.voxel_dim, self.pe_octaves)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.base_channels,
            self.dense_channels,
            self.point_xyz_dim,
            self.point_rgb_dim,
            self.voxel_hidden,
            self.voxel_dim,
            self.pe_octaves,
            self.grid_resolution,
        ];
        if positive.contains(&0) || self.decoder_hidden.contains(&0) {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !(self.grid_margin >= 0.0) {
            return Err(Error::Config("grid margin must be non-negative".into()));
        }
        Ok(())
    }
}

/// Image pyramid: a 4x4 patch embedding followed by three 2x2 patch merges,
/// then a 1x1 reduction of the aggregated levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderLayout {
    pub levels: [Linear; 4],
    pub reduce: Linear,
}

/// Where every learnable block lives in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub blocks: Vec<BlockInfo>,
    pub total: usize,
    pub encoder: EncoderLayout,
    pub fuse_xyz: Linear,
    pub fuse_rgb: Linear,
    pub voxel1: Linear,
    pub voxel2: Linear,
    pub offset_mlp: Mlp,
    pub prob_mlp: Mlp,
}

impl Layout {
    pub fn new(c: &ModelConfig) -> Self {
        let mut b = LayoutBuilder::default();
        let ch = |i: usize| i * c.base_channels;
        let levels = [
            b.linear("encoder.level1", 4 * 4 * 3, ch(1)),
            b.linear("encoder.level2", 2 * 2 * ch(1), ch(2)),
            b.linear("encoder.level3", 2 * 2 * ch(2), ch(3)),
            b.linear("encoder.level4", 2 * 2 * ch(3), ch(4)),
        ];
        let reduce = b.linear("encoder.reduce", ch(1) + ch(2) + ch(3) + ch(4), c.dense_channels);
        let fuse_xyz = b.linear("fusion.xyz", 3, c.point_xyz_dim);
        let fuse_rgb = b.linear("fusion.rgb", c.dense_channels, c.point_rgb_dim);
        let voxel1 = b.linear("voxel.stage1", c.point_xyz_dim + c.point_rgb_dim, c.voxel_hidden);
        let voxel2 = b.linear("voxel.stage2", 2 * c.voxel_hidden, c.voxel_dim);
        let emb = c.embedding_layout().total;
        let mut dims = vec![emb];
        dims.extend(&c.decoder_hidden);
        dims.push(1);
        let offset_mlp = Mlp::build(&mut b, "decoder.offset", &dims, Head::Logistic);
        let prob_mlp = Mlp::build(&mut b, "decoder.prob", &dims, Head::Identity);
        Self {
            blocks: b.blocks,
            total: b.total,
            encoder: EncoderLayout { levels, reduce },
            fuse_xyz,
            fuse_rgb,
            voxel1,
            voxel2,
            offset_mlp,
            prob_mlp,
        }
    }

    fn linears(&self) -> Vec<Linear> {
        let mut v: Vec<Linear> = self.encoder.levels.to_vec();
        v.extend([self.encoder.reduce, self.fuse_xyz, self.fuse_rgb, self.voxel1, self.voxel2]);
        v.extend(&self.offset_mlp.layers);
        v.extend(&self.prob_mlp.layers);
        v
    }
}

/// All learnable parameters, stored flat in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
}

impl Model {
    /// Glorot-uniform initialisation seeded by `config.init_seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(m.config.init_seed);
        for l in m.layout.linears() {
            init_linear(&l, &mut m.params, &mut rng);
        }
        Ok(m)
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let params = vec![0.0; layout.total];
        Ok(Self { config, layout, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn flat(&self) -> &[f64] {
        &self.params
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a model of {}",
                flat.len(),
                self.params.len()
            )));
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.blocks.iter().find(|b| b.name == name).map(|b| &self.params[b.range()])
    }
}
