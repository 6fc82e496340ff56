pub mod error;
pub mod linalg;
pub mod system;
pub mod discretization;
pub mod roots;
pub mod predictor;
pub mod corrector;
pub mod grid;
pub mod io;
pub mod pipeline;
