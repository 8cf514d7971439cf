pub mod campaign;
pub mod commands;
pub mod description;
pub mod gen;
pub mod report;
