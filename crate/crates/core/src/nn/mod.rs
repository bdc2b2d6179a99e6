//! The spatio-sequential CNN, its optimizer, training loop and weight files.

mod adam;
mod arch;
mod config;
mod gradcheck;
mod io;
mod model;
mod train;

pub use adam::AdamState;
pub use arch::{count_parameters, Architecture, LayerCount, Layout, ParameterCount, Tensor};
pub use config::TrainConfig;
pub use gradcheck::{
    gradient_check, gradient_check_with, GradCheckOptions, GradCheckReport, TensorCheck,
};
pub use io::{load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use model::{build_spsq_cnn, Mode, RunningStats, SpsqModel};
pub use train::{train, train_step, train_with, EpochStats, StepOutcome, Trained};
