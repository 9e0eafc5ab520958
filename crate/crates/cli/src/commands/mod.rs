pub mod budget;
pub mod calibrate;
pub mod drive;
pub mod hom;
pub mod metrics;
pub mod mode_fit;
pub mod stack;
