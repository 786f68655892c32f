//! File formats: MNIST IDX, network documents, and result tables.

mod document;
mod idx;
mod results;

pub use document::{
    load_network, load_network_file, network_from_json, network_to_json, save_network, save_network_file,
    ActivationDoc, LayerDoc, NetworkDocument, DOCUMENT_VERSION,
};
pub use idx::{
    load_idx, load_mnist, mnist_dir, parse_idx_images, parse_idx_labels, IdxImages, IdxLabels, MnistSplit,
    IMAGES_MAGIC, LABELS_MAGIC,
};
pub use results::{
    format_float, parse_float, results_to_string, write_results, write_results_file, EpochRow, LayerCrashRow,
    LearningCostRecord, ResultRow, RobustnessRow, Schema, ROBUSTNESS_HEADER,
};
