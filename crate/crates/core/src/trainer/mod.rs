//! Parameter initialization, dropout, optimization, the training loop, and
//! checkpoints.

mod checkpoint;
mod config;
mod dropout;
mod init;
mod optimizer;
mod train;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_VERSION,
};
pub use config::{TrainConfig, TRAIN_KEYS};
pub use dropout::{derive_seed, make_dropout_masks, sentence_dropout_masks};
pub use init::{apply_pretrained, glorot_limit, init_params};
pub use optimizer::{adadelta_step, AdaDelta, OptimizerState};
pub use train::{
    batch_gradients, initial_model, train, train_with_progress, EarlyStopping, EpochRecord,
    History, TrainOutcome, Verdict,
};
