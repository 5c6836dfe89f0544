//! Config schema, CSV tables, run manifests and a minimal SVG plotter.

mod config;
mod manifest;
mod svg;
mod table;

pub use config::{
    load_config, parse_config, BathPreset, ConstantsConfig, ProjectConfig, SequencePreset, SpinSystemConfig,
    SCHEMA_VERSION,
};
pub use manifest::{sha256_hex, RunManifest};
pub use svg::{svg_plot, PlotSeries};
pub use table::{
    read_curve_csv, read_stim_echo_csv, read_t1_csv, read_table, write_curve_csv, write_table, Table,
};
