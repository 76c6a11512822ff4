//! Image buffers, PPM I/O, synthetic datasets and steganalysis metrics.

mod image;
mod metrics;
mod synth;

pub use image::{load_ppm, load_ppm_dir, nearest_index, read_ppm, save_ppm, write_ppm, ImageBuffer};
pub use metrics::{
    adjacent_correlation, histogram, image_similarity, mean_abs_correlation, metrics_csv,
    mse_per_pixel, pearson, residual_enhance, Histogram, MetricsRecord, METRICS_CSV_HEADER,
};
pub use synth::{synth_dataset, synth_image, SynthKind};
