//! Unsupervised segmentation of bright lesions in 2D grayscale images.
//!
//! Three segmenters share one preprocessing path (ROI crop, optional CLAHE):
//!
//! * [`kmeans`]: Lloyd's k-means on intensities, farthest-point seeded.
//! * [`gmm`]: a one-dimensional Gaussian mixture fitted by EM.
//! * [`watershed`]: marker-controlled watershed over the morphological
//!   gradient, seeded by the brightest pixels.
//!
//! For clustering methods the lesion is the cluster with the highest mean
//! intensity. [`metrics`] scores masks against ground truth (Dice, Jaccard,
//! Hausdorff, precision, recall) and [`phantom`] produces synthetic cases.
//!
//! With the default `parallel` feature the per-pixel kernels run on rayon;
//! results are identical with the feature disabled.

pub mod error;
pub mod gmm;
pub mod image;
pub mod io;
pub mod kmeans;
pub mod metrics;
pub mod morphology;
pub mod par;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod watershed;

pub use error::{Error, Result};
pub use image::{
    crop_roi, select_lesion_cluster, BinaryMask, GrayImage, LabelMap, PixelSpacing,
    RegionOfInterest,
};
pub use pipeline::{segment, Enhancement, Method, MethodKind, PipelineConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
