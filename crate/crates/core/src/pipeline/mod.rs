//! Degradation, augmentation, metrics, training and evaluation.

mod color;
mod data;
mod eval;
mod metrics;
mod resize;
mod toy;
mod train;

pub use color::{luma, rgb_to_y, to_luma};
pub use data::{
    asr_input_views, asr_patch_pairs, augment_pair, crop_patches, make_asr_pair, make_ssr_pair, patch_origins,
    random_augment, ssr_patch_pairs, Pair, ASR_DENSE, ASR_STRIDE,
};
pub use eval::{evaluate, predict_tiled, reflect_index, reflect_pad, Bicubic, EvalProtocol, Identity, Predictor, Tiling};
pub use metrics::{
    gaussian_window, mse, psnr, score_scene, ssim, ssim_window_len, MetricReport, SceneScore, ViewScore, PSNR_CAP,
    SSIM_SIGMA, SSIM_WINDOW,
};
pub use resize::{bicubic_resize, bicubic_scale, cubic_kernel, resize_lf, scaled_len};
pub use toy::{mean_psnr, ToyDataset};
pub use train::*;
