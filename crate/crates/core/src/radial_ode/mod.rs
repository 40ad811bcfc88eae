//! The radial ODE for the coefficient profile of an equivariant Green's form.

pub mod frobenius;
pub mod levinson;
pub mod profile;
pub mod series;
pub mod solve;
pub mod stepper;
pub mod system;

pub use frobenius::{frobenius_init, FrobeniusSeries, SingularData};
pub use levinson::LevinsonForm;
pub use profile::{ProfileDocument, ProfileSample, RadialProfile, SolveDiagnostics};
pub use solve::{decaying_solution, integrate, integrate_singular, GridSpec, ShootingConfig};
pub use system::{assemble_matrix_system, assemble_system, block_layout, Block, Layout, RadialSystem};
