pub mod checkpoint;
pub mod embed;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod gat;
pub mod graph;
pub mod model;
pub mod params;
pub mod pca;
pub mod rng;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod text;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
