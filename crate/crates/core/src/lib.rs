pub mod boundary;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod output;
pub mod postprocess;
pub mod scenario;
pub mod timestepper;
