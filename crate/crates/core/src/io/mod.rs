//! Run configuration and CSV files.
//!
//! Field columns in files are always millitesla; the library works in tesla.

mod config;
mod table;

pub use config::{parse_config, parse_config_str, ParsedConfig, RunConfig};
pub use table::{
    format_float, parse_spectrum, read_curie_data, read_spectrum, render_table, units_tag,
    write_curve, write_table, SpectrumFile, Table,
};
