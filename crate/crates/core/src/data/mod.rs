//! Data ingestion, panel encodings and synthetic data.

mod hmd;
mod panel_io;
mod synthetic;

pub use hmd::{crude_rates, initial_exposure, q_from_m, tables_from_panel, RawVitalTable, Sex, TableKind, VitalRow};
pub use panel_io::{panel_from_json, panel_to_json, read_panel_csv, write_panel_csv};
pub use synthetic::{simulate_panel, stationary_initial_state, truth_from_json, SyntheticTruth};
