//! Binarized localisation CNN: model definition, file container, and the two
//! inference routes (emulated array vs exact integer reference).

mod format;
mod infer;
mod model;

pub use format::{load_model, read_model, save_model, write_model, FormatError, MODEL_MAGIC};
pub use infer::{
    infer_ppa, infer_reference, plane_agreement, score_agreement, InferenceResult,
};
pub use model::{
    argmax_low, BnnModel, ConvKernel, ModelError, PredictionDistribution, CHANNELS, FEATURE_LEN,
    HEAD_OUTPUTS, INPUT_SIZE, KERNEL_SIZE, POOLED_SIZE, POOL_WINDOW,
};
