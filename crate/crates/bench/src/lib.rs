//! Benchmark fixtures shared by the criterion targets.

use spikelab_core::ground_state::{compute_moments, solve_ground_state, GroundState, GroundStateMoments};

/// Ground state on the reference grid used by the reduced and NLEP benches.
pub fn reference_ground_state() -> GroundState {
    solve_ground_state(20.0, 2000, 1e-12).expect("reference ground state")
}

pub fn reference_moments() -> GroundStateMoments {
    compute_moments(&solve_ground_state(25.0, 4000, 1e-12).expect("ground state")).expect("moments")
}
