//! Weakly-supervised semantic parsing over tables with active learning.

pub mod active;
pub mod buffer;
pub mod decimal;
pub mod dataset;
pub mod executor;
pub mod experiment;
pub mod features;
pub mod generator;
pub mod grammar;
pub mod model;
pub mod mr;
pub mod scalar;
pub mod supervision;
pub mod table;
pub mod text;
pub mod train;

pub use decimal::Decimal;
pub use executor::{answers_match, execute, Answer, ExecError, Value};
pub use grammar::{count_spurious, enumerate_programs, has_spurious, Action, ActionSpace};
pub use mr::{parse_program, parse_sketch, print_program, sketch_of, FuncName, Program, Sketch, MAX_PROGRAM_LEN};
pub use table::{Cell, Column, ColumnKind, TableEnv};
pub use model::{Hyper, ParserModel};

pub type Model = ParserModel<f64>;
pub type Model32 = ParserModel<f32>;
pub use buffer::{BufferEntry, BufferSet, MemoryBuffer};
pub use train::{train, Instance, Mode, Prepared, TrainOptions, TrainReport};
