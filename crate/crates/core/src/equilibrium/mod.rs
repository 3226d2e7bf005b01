//! Strategy profiles, beliefs, equilibrium checks and solvers.

mod closed_form;
mod grid;
pub mod io;
mod profile;
mod solver;
mod verify;

pub use closed_form::{restricted_threshold, solve_anonymous_restricted, solve_anonymous_unrestricted, unrestricted_threshold};
pub use grid::{Cell, TGrid, DEFAULT_RESOLUTION};
pub use profile::{
    expected_earnings, extract_threshold_l, liar_mass, liar_set, posterior_beliefs, BeliefMap, StrategyProfile,
    NORMALIZATION_TOLERANCE,
};
pub use solver::{seed_profile, solve_fixed_point, FixedPoint, Seed, SolverOptions};
pub use verify::{
    best_response, check_equilibrium, example1_beliefs, verify_example2, Deviation, EquilibriumReport, Example2Report,
};
