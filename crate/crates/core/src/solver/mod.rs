//! Method-of-lines time stepper for the shear-flow problem
//! `v_t = d/dx sigma + f` with the hereditary stress
//! `sigma = -g(u_x(t)) a(t) + int_0^t g(u_x(t) - u_x(s)) a'(t - s) ds`.

mod data;
mod integrator;
mod memory;
mod oracle;
mod remainder;
mod state;

pub use data::{
    Forcing, InitialData, Manufactured, Profile, SpatialGrid, Table1d, Table2d, TimeProfile,
    MIN_INTERIOR_NODES,
};
pub use integrator::{
    compute_stress, stable_dt, BreachPolicy, BreachRecord, MemoryMethod, Solver, SolverOptions,
    StepStats, StressField, Termination,
};
pub use memory::{MemoryWeights, RecursiveMemory};
pub use oracle::mode_amplitude;
pub use remainder::{
    field_relative_l2, integrate_in_time, reconstruct_uxx, reconstruct_vxx, remainder,
    remainder_g, remainder_g_t, Reconstruction, Remainder,
};
pub use state::ShearState;
