//! Configuration files, field dumps, result tables and the experiment runner.

pub mod config;
pub mod dump;
pub mod run;
pub mod table;

pub use config::{parse_config, Experiment, InitialState, RunConfig, Vary, WallOptions};
pub use dump::{decode_dump, encode_dump, read_dump, write_dump, write_vtk, Dump};
pub use run::{execute, CellVerdict, Outcome};
pub use table::{Cell, Table};
