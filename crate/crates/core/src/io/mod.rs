//! File formats: the MSEQ binary tensor container and the plain-text
//! parameter file. Both round-trip bit-exactly.

mod mseq;
mod params_file;

pub use mseq::{Tensor, TensorData};
pub use params_file::{read_params, read_params_file, write_params, write_params_file};
