//! File formats: Touchstone two-port, spectrum CSV, model configuration and
//! sweep exports. Everything works on in-memory text; callers own the files.

mod config;
mod csv;
mod export;
mod touchstone;

pub use config::{CalibrationConfig, ModeConfig, ModelConfig, SweepConfig};
pub use csv::{read_spectrum_csv, write_spectrum_csv, SPECTRUM_HEADER};
pub use export::{
    export_sweep, read_sweep_matrix, read_sweep_metadata, SweepExport, SweepMatrix, SweepMetadata, LONG_HEADER,
    MATRIX_CORNER,
};
pub use touchstone::{
    parse_touchstone, write_touchstone, DataFormat, FreqUnit, SParam, TouchstoneData, TouchstoneRow,
};
