use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What each refinement block uses as its attention query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryMode {
    /// Block `j` queries with the extractor layer of matching depth, deepest first.
    #[default]
    MultiScale,
    /// Every block queries with the deepest extractor layer.
    Deepest,
    /// Every block attends from its own pool (no extractor features).
    SelfAttention,
}

impl QueryMode {
    pub fn name(self) -> &'static str {
        match self {
            QueryMode::MultiScale => "multi-scale",
            QueryMode::Deepest => "deepest",
            QueryMode::SelfAttention => "self-attention",
        }
    }
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [QueryMode::MultiScale, QueryMode::Deepest, QueryMode::SelfAttention]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown query mode {s:?}")))
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Points per input patch.
    pub points: usize,
    /// Upsampling ratio.
    pub ratio: usize,
    /// Extractor layers and refinement blocks.
    pub depth: usize,
    /// Extractor base width; layer `h` has `channels · expansion^(h−1)`.
    pub channels: usize,
    pub expansion: usize,
    /// Coarse generator base width and expansion.
    pub coarse_channels: usize,
    pub coarse_expansion: usize,
    pub heads: usize,
    /// Neighbors per point in every point transformer layer.
    pub patch_size: usize,
    /// Residual self-attention blocks in the global feature stage.
    pub sab_depth: usize,
    pub query_mode: QueryMode,
    /// Seed for weight initialization.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            points: 256,
            ratio: 4,
            depth: 4,
            channels: 16,
            expansion: 4,
            coarse_channels: 32,
            coarse_expansion: 8,
            heads: 8,
            patch_size: 20,
            sab_depth: 1,
            query_mode: QueryMode::MultiScale,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Narrow variant for CPU training runs of a few minutes.
    pub fn desk() -> Self {
        ModelConfig {
            channels: 8,
            expansion: 2,
            coarse_channels: 16,
            coarse_expansion: 4,
            heads: 4,
            patch_size: 16,
            ..ModelConfig::default()
        }
    }

    /// Width of extractor layer `h` (1-based).
    pub fn feature_width(&self, h: usize) -> usize {
        self.channels * self.expansion.pow(h as u32 - 1)
    }

    /// Width of the global features and of the first refinement pool.
    pub fn global_width(&self) -> usize {
        self.coarse_channels * self.coarse_expansion
    }

    /// Channel plan of the coarse generator, input width first.
    pub fn coarse_plan(&self) -> [usize; 5] {
        let wide = self.global_width();
        [3, self.coarse_channels, wide, (wide / 4).max(3 * self.ratio), 3 * self.ratio]
    }

    /// Output width of refinement block `j` (1-based): the extractor width one
    /// level below its query, `channels · expansion^(h−2)` with `h = depth − j + 1`,
    /// except the last block, which emits `3·ratio`.
    pub fn context_width(&self, j: usize) -> usize {
        if j == self.depth {
            3 * self.ratio
        } else {
            let h = self.depth - j + 1;
            self.channels * self.expansion.pow(h as u32 - 2)
        }
    }

    /// Pool width consumed by refinement block `j`.
    pub fn pool_width(&self, j: usize) -> usize {
        if j == 1 {
            self.global_width()
        } else {
            self.context_width(j - 1)
        }
    }

    /// Query width of refinement block `j`.
    pub fn query_width(&self, j: usize) -> usize {
        match self.query_mode {
            QueryMode::MultiScale => self.feature_width(self.depth - j + 1),
            QueryMode::Deepest => self.feature_width(self.depth),
            QueryMode::SelfAttention => self.pool_width(j),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("points", self.points),
            ("ratio", self.ratio),
            ("depth", self.depth),
            ("channels", self.channels),
            ("expansion", self.expansion),
            ("coarse_channels", self.coarse_channels),
            ("coarse_expansion", self.coarse_expansion),
            ("heads", self.heads),
            ("patch_size", self.patch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("model {name} must be positive")));
        }
        if self.patch_size > self.points {
            return Err(Error::InvalidArgument(format!(
                "patch_size {} exceeds points per patch {}",
                self.patch_size, self.points
            )));
        }
        if self.global_width() < 4 {
            return Err(Error::InvalidArgument("coarse_channels · coarse_expansion must be at least 4".into()));
        }
        let widths = (1..=self.depth).map(|j| ("refinement pool", self.pool_width(j)));
        for (what, w) in std::iter::once(("global feature", self.global_width())).chain(widths) {
            if w % self.heads != 0 {
                return Err(Error::InvalidArgument(format!("{what} width {w} is not divisible by {} heads", self.heads)));
            }
        }
        Ok(())
    }

    /// `key=value` pairs, in declaration order, for echoing and checkpoints.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("points", self.points.to_string()),
            ("ratio", self.ratio.to_string()),
            ("depth", self.depth.to_string()),
            ("channels", self.channels.to_string()),
            ("expansion", self.expansion.to_string()),
            ("coarse_channels", self.coarse_channels.to_string()),
            ("coarse_expansion", self.coarse_expansion.to_string()),
            ("heads", self.heads.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("sab_depth", self.sab_depth.to_string()),
            ("query_mode", self.query_mode.to_string()),
            ("init_seed", self.init_seed.to_string()),
        ]
    }

    /// Inverse of [`ModelConfig::entries`]; every key must be present.
    pub fn from_entries(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        fn parse<T: FromStr>(get: &dyn Fn(&str) -> Option<String>, key: &str) -> Result<T> {
            let raw = get(key).ok_or_else(|| Error::InvalidArgument(format!("model config lacks {key}")))?;
            raw.parse().map_err(|_| Error::InvalidArgument(format!("model config {key}={raw:?} is malformed")))
        }
        let get: &dyn Fn(&str) -> Option<String> = &get;
        let config = ModelConfig {
            points: parse(get, "points")?,
            ratio: parse(get, "ratio")?,
            depth: parse(get, "depth")?,
            channels: parse(get, "channels")?,
            expansion: parse(get, "expansion")?,
            coarse_channels: parse(get, "coarse_channels")?,
            coarse_expansion: parse(get, "coarse_expansion")?,
            heads: parse(get, "heads")?,
            patch_size: parse(get, "patch_size")?,
            sab_depth: parse(get, "sab_depth")?,
            query_mode: parse(get, "query_mode")?,
            init_seed: parse(get, "init_seed")?,
        };
        config.validate()?;
        Ok(config)
    }
}
