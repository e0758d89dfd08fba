//! Dataset generation, training, inference, evaluation and attention dumps.

pub mod attention;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod inference;
pub mod train;

pub use attention::{dump_attention, AttentionReport};
pub use config::{DataConfig, EvalConfig, PipelineConfig, Profile, TrainConfig};
pub use dataset::{generate_dataset, load_meshes, read_dataset, write_dataset};
pub use evaluate::{evaluate, EvalReport, EvalRow};
pub use inference::{upsample_cloud, upsample_to_ratio};
pub use train::{StepRecord, Trainer};

/// Independent 64-bit stream for `(seed, a, b)`.
pub fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ a) ^ b)
}
