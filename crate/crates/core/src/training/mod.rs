//! Question-generation pretraining, task fine-tuning and the
//! sample-efficiency sweep.

mod config;
mod optimize;
mod tasks;

pub use config::TrainingConfig;
pub use optimize::{batch_gradients, clip_global_norm, epoch_batches, train, Trainer, TrainingReport};
pub use tasks::{
    evaluate_on, finetune, pretrain_question_generation, write_sweep_csv, Sweep, SweepRow, Task, TaskData,
};
