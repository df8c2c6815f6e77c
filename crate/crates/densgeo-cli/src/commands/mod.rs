pub mod compare;
pub mod evaluate;
pub mod generate;
pub mod render;
pub mod report;
pub mod reverse;
pub mod sweep;
