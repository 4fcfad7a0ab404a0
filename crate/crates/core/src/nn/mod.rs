//! Small fully connected networks with hand-written forward and reverse
//! passes, an Adam optimizer and a binary model format.

mod adam;
mod io;
mod network;

pub use adam::{adam_step, AdamState};
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use network::{input_gradients, param_gradients, Activation, Dense, Gradients, Network, Tape};
