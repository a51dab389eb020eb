//! White-noise mixing `ρ' = pρ + (1−p)𝟙/D` and the resulting `K' = pK` law
//! for traceless observables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum_value::classical_reference;
use crate::tensor_core::{bell_operator, expectation, BellFunctional, ObservableSet, QuantumState};

pub const TRACELESS_TOL: f64 = 1e-10;
pub const NOISE_LAW_TOL: f64 = 1e-9;

pub fn mix_white_noise(rho: &QuantumState, p: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "visibility p = {p} is outside [0, 1]"
        )));
    }
    let d = rho.total_dim();
    let mixed = rho.density().scale(p) + linalg::identity(d).scale((1.0 - p) / d as f64);
    QuantumState::mixed(rho.dims().to_vec(), linalg::hermitian_part(&mixed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub p: f64,
    pub clean_value: f64,
    pub noisy_value: f64,
    pub predicted: f64,
    pub classical_value: f64,
    /// Visibility at which the noisy value drops to the classical value.
    pub critical_p: f64,
}

pub fn check_traceless(obs: &ObservableSet) -> Result<()> {
    for (party, list) in obs.parties().iter().enumerate() {
        for (setting, a) in list.iter().enumerate() {
            let trace = a.trace().norm();
            if trace > TRACELESS_TOL {
                return Err(Error::NotTraceless {
                    party,
                    setting,
                    trace,
                });
            }
        }
    }
    Ok(())
}

/// Value of `(T, obs)` on the noisy state, computed against the mixed state
/// and checked against `p · clean`.
pub fn noisy_violation(t: &BellFunctional, state: &QuantumState, obs: &ObservableSet, p: f64) -> Result<NoiseReport> {
    let (classical, _) = classical_reference(t, 0)?;
    noisy_violation_with_classical(t, state, obs, p, classical)
}

pub fn noisy_violation_with_classical(
    t: &BellFunctional,
    state: &QuantumState,
    obs: &ObservableSet,
    p: f64,
    classical_value: f64,
) -> Result<NoiseReport> {
    check_traceless(obs)?;
    let b = bell_operator(t, obs)?;
    let clean = expectation(state, &b)?.value;
    let noisy = expectation(&mix_white_noise(state, p)?, &b)?.value;
    let predicted = p * clean;
    if (noisy - predicted).abs() > NOISE_LAW_TOL * clean.abs().max(1.0) {
        return Err(Error::Consistency(format!(
            "noisy value {noisy} differs from p·clean = {predicted}"
        )));
    }
    Ok(NoiseReport {
        p,
        clean_value: clean,
        noisy_value: noisy,
        predicted,
        classical_value,
        critical_p: classical_value / clean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds_lab::ghz_state;
    use crate::functionals;
    use crate::linalg::pauli_z;
    use crate::tensor_core::Observable;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    #[test]
    fn endpoints() {
        let s = ghz_state(2, 3).unwrap();
        let same = mix_white_noise(&s, 1.0).unwrap();
        assert!(linalg::max_abs_diff(&same.density(), &s.density()) < 1e-15);
        let flat = mix_white_noise(&s, 0.0).unwrap();
        assert!(linalg::max_abs_diff(&flat.density(), &linalg::identity(8).unscale(8.0)) < 1e-15);
        assert!(mix_white_noise(&s, 1.5).is_err());
        assert!(mix_white_noise(&s, -0.1).is_err());
    }

    #[test]
    fn ghz_half_noise_spectrum() {
        // p|GHZ⟩⟨GHZ| + (1−p)𝟙/8 at p = ½: one eigenvalue ½ + 1/16, seven of 1/16
        let s = mix_white_noise(&ghz_state(2, 3).unwrap(), 0.5).unwrap();
        let e = linalg::eigh(&s.density());
        assert!((e.values[0] - (0.5 + 0.0625)).abs() < 1e-12);
        for v in &e.values[1..] {
            assert!((v - 0.0625).abs() < 1e-12);
        }
    }

    #[test]
    fn chsh_critical_visibility() {
        let (state, obs) = functionals::chsh_witness();
        let r = noisy_violation(&functionals::chsh(), &state, &obs, FRAC_1_SQRT_2).unwrap();
        assert!((r.noisy_value - 2.0).abs() < 1e-9);
        assert!((r.critical_p - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((r.clean_value - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn mermin_half_visibility() {
        let (state, obs) = functionals::mermin3_witness();
        let r = noisy_violation(&functionals::mermin3(), &state, &obs, 0.5).unwrap();
        assert!((r.noisy_value - 2.0).abs() < 1e-9);
        assert!((r.critical_p - 0.5).abs() < 1e-12);
        let full = noisy_violation(&functionals::mermin3(), &state, &obs, 1.0).unwrap();
        assert!((full.noisy_value - full.clean_value).abs() < 1e-12);
    }

    #[test]
    fn non_traceless_rejected_with_index() {
        let (state, _) = functionals::chsh_witness();
        let z = Observable::new(pauli_z()).unwrap();
        let obs = ObservableSet::new(vec![
            vec![z.clone(), z.clone()],
            vec![z, Observable::identity(2)],
        ])
        .unwrap();
        match noisy_violation(&functionals::chsh(), &state, &obs, 0.5) {
            Err(Error::NotTraceless { party: 1, setting: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
