//! Numerical laboratory for multipartite correlation Bell inequalities.
//!
//! * [`tensor_core`]: functionals, observables, states and Bell operators.
//! * [`classical_value`]: exact and heuristic local-hidden-variable values.
//! * [`quantum_value`]: see-saw lower bounds on the quantum value.
//! * [`random_states`]: Haar unitaries, random tripartite states, ε-norm estimates.
//! * [`bounds_lab`]: closed-form bounds and the experiments that check them.
//! * [`noise_robustness`]: white-noise mixing and critical visibility.
//! * [`comm_game`]: the broadcast communication-complexity game.

pub mod bounds_lab;
pub mod classical_value;
pub mod comm_game;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod noise_robustness;
pub mod quantum_value;
pub mod random_states;
pub mod rng;
pub mod tensor_core;
pub mod wire;

pub use error::{Error, Result};
pub use tensor_core::{BellFunctional, Observable, ObservableSet, QuantumState};
