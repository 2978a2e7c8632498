//! Model-level types: the age/year window, parameters, latent state paths,
//! system matrices and identification constraints.

mod constraints;
mod params;
mod state;
mod system;
mod window;

pub use constraints::{apply_constraints, center_states, constraint_residuals, normalize_sum};
pub use params::{
    Hyperpriors, InvGammaPrior, ModelKind, ModelSpec, NormalPrior, StatePrior, StaticParams,
};
pub use state::{StatePath, SHIFT_TOLERANCE};
pub use system::{build_system, SystemMatrices};
pub use window::{AgeYearWindow, DataPanel};
