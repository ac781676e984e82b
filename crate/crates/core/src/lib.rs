//! Unsupervised cycle-consistent motion retargeting between skeletons with
//! different joint counts.

pub mod autodiff;
pub mod bvh;
pub mod eval;
pub mod fixtures;
pub mod gradient_suite;
pub mod kinematics;
pub mod motion;
pub mod net;
pub mod skeleton;
pub mod training;
