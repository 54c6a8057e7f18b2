//! Test phantom, noise models and image-quality metrics.

pub mod metrics;
pub mod noise;
pub mod phantom;

pub use metrics::{mae, metrics, psnr, ssim, ssim_with_range, MetricsRecord, PSNR_CAP};
pub use noise::{
    add_gaussian, add_salt_pepper, add_speckle, add_split_noise, noise_level, split_indices, NoiseModel,
};
pub use phantom::generate_phantom;
