pub mod adaptivity;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod forms;
pub mod mesh;
pub mod problem;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod verify;
