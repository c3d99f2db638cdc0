//! Experiment driver: configuration, the end-to-end pipeline and output files.

pub mod config;
pub mod fielddump;
mod pipeline;

pub use config::{parse_config, ObservationKind, PriorKind, RunConfig};
pub use fielddump::{decode_field, dump_field, encode_field, load_field, FieldDims};
pub use pipeline::{
    run_experiment, run_pipeline, write_outputs, Bases, ErrorCurve, ErrorRow, Experiment, Fig1Maps,
};
