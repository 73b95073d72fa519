//! File formats: delimited matrices, the binary fit archive, text reports,
//! plot-data export and dataset simulation.

pub mod archive;
pub mod plot;
pub mod simulate;
pub mod summary;
pub mod table;

pub use archive::{load_fit, save_fit};
pub use plot::{load_groups, plot_data, GroupMap};
pub use simulate::{simulate, write_simulated, Simulated, SimulateSpec};
pub use summary::{render_summary, PIP_CUTOFFS};
pub use table::{load_matrix, load_vector, write_text, Table};
