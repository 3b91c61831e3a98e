//! Experiment drivers: accuracy studies, thin-film stability and energy runs, domain walls.

pub mod convergence;
pub mod dynamics;
pub mod manufactured;
pub mod oracle;
pub mod thinfilm;
pub mod wall;

pub use convergence::{
    fit_order, run_efficiency_sweep, run_manufactured, run_spatial_convergence, run_temporal_convergence,
    ConvergenceReport, EfficiencyRow, ErrorRow, ManufacturedCase, Mode, Orders,
};
pub use dynamics::{run_dynamics, DynamicsRun, EnergyRule, EnergySample, RunSettings, Verdict};
pub use manufactured::ManufacturedSolution;
pub use thinfilm::{angle_field, run_energy_comparison, run_stability_matrix, run_thin_film, ThinFilmRun, ThinFilmSetup};
pub use wall::{init_neel_wall, run_wall_velocity, wall_position, WallRun, WallSample, WallSetup};
