//! Ground-truth synthetic generator: a known temporal model drives latent
//! codes, a fixed basis maps codes to velocity fields, and the exponentiated
//! fields deform a phantom reference image. Because every intermediate
//! quantity is known, imputation, forecasting, and online-learning
//! experiments can be scored against exact ground truth at desk scale.

mod experiments;
mod phantom;
mod scenario;

pub use experiments::{
    online_preset_cfg, run_imputation_batch, run_imputation_experiment, run_online_batch,
    run_online_experiment, ImputationReport, OnlineReport, ONLINE_STREAM_STEPS,
};
pub use phantom::make_phantom;
pub use scenario::{synth_sequence, RegimeShift, SynthOutput, SynthScenario, ONLINE_SHIFT_STEP};
