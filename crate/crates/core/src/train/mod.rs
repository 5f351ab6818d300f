//! VAR+GAN, unconditional BEGAN and cBiGAN training with deterministic,
//! resumable state.

mod config;
mod run;
mod state;
mod step;

pub use config::{Method, TrainerConfig};
pub use run::{run, train_until};
pub use state::{telemetry_columns, TelemetryRow, TrainingState, CHECKPOINT_VERSION, MAGIC};
pub use step::{
    cbigan_step, discriminator_update, generate, generator_grads, generator_input, mse, oracle_step,
    regressor_update, sample_batch, step, vargan_step, Batch,
};
