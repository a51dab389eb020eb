//! Bell functionals, local observables, shared states and the Bell operator.
//!
//! Multi-indices are row-major in party order: the last party's setting (or
//! the last tensor factor) varies fastest. The same convention is used for
//! coefficient tensors, state vectors and Kronecker products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};

/// Largest total Hilbert space dimension for which dense operators are built.
pub const DEFAULT_BUDGET_DIM: usize = 4096;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const CONTRACTION_TOL: f64 = 1e-9;
pub const PURE_NORM_TOL: f64 = 1e-12;
pub const MIXED_TRACE_TOL: f64 = 1e-12;
pub const MIXED_PSD_TOL: f64 = 1e-10;

/// Real coefficient tensor `T` of a full-correlation Bell inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::wire::FunctionalJson", into = "crate::wire::FunctionalJson")]
pub struct BellFunctional {
    settings: Vec<usize>,
    coeffs: Vec<f64>,
}

impl BellFunctional {
    pub fn new(settings: Vec<usize>, coeffs: Vec<f64>) -> Result<Self> {
        if settings.len() < 2 {
            return Err(Error::InvalidFunctional(format!(
                "need at least 2 parties, got {}",
                settings.len()
            )));
        }
        if let Some(j) = settings.iter().position(|&m| m == 0) {
            return Err(Error::InvalidFunctional(format!(
                "party {j} has zero settings"
            )));
        }
        let size: usize = settings.iter().product();
        if coeffs.len() != size {
            return Err(Error::InvalidFunctional(format!(
                "settings {settings:?} require {size} coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidFunctional(format!(
                "coefficient {k} is not finite"
            )));
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidFunctional(
                "all coefficients are zero".into(),
            ));
        }
        Ok(Self { settings, coeffs })
    }

    pub fn num_parties(&self) -> usize {
        self.settings.len()
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.settings)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let offset: usize = index
            .iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum();
        self.coeffs[offset]
    }

    /// Sum of absolute values of the coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.settings.clone(),
            self.coeffs.iter().map(|c| c * factor).collect(),
        )
    }

    /// Reorder parties: party `j` of the result is party `perm[j]` of `self`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_parties();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter(format!(
                "{perm:?} is not a permutation of {n} parties"
            )));
        }
        let settings: Vec<usize> = perm.iter().map(|&p| self.settings[p]).collect();
        let old_strides = self.strides();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for_each_index(&settings, |idx| {
            let offset: usize = idx
                .iter()
                .zip(perm)
                .map(|(&i, &p)| i * old_strides[p])
                .sum();
            coeffs.push(self.coeffs[offset]);
        });
        Self::new(settings, coeffs)
    }

    /// Permute the settings of one party: new setting `k` is old setting `perm[k]`.
    pub fn permute_settings(&self, party: usize, perm: &[usize]) -> Result<Self> {
        let m = self.settings[party];
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != (0..m).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(format!(
                "{perm:?} is not a permutation of {m} settings"
            )));
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for_each_index(&self.settings, |idx| {
            let mut src = idx.to_vec();
            src[party] = perm[idx[party]];
            coeffs.push(self.get(&src));
        });
        Self::new(self.settings.clone(), coeffs)
    }

    /// Append a party with a single setting carrying coefficient 1, e.g. to
    /// run a bipartite functional through tripartite machinery.
    pub fn with_trivial_party(&self) -> Self {
        let mut settings = self.settings.clone();
        settings.push(1);
        Self {
            settings,
            coeffs: self.coeffs.clone(),
        }
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for j in (0..shape.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * shape[j + 1];
    }
    s
}

/// Visit every multi-index of `shape` in row-major order.
pub(crate) fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.iter().any(|&m| m == 0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut j = shape.len();
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < shape[j] {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// A Hermitian contraction on one party's local space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::wire::MatrixJson", into = "crate::wire::MatrixJson")]
pub struct Observable {
    matrix: CMatrix,
}

impl Observable {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "observable must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let deviation = linalg::hermiticity_defect(&matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let norm = linalg::op_norm(&matrix);
        if norm > 1.0 + CONTRACTION_TOL {
            return Err(Error::NotContraction { norm });
        }
        Ok(Self { matrix })
    }

    /// Caller guarantees the invariants (e.g. output of an eigen-sign map).
    pub(crate) fn new_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new_unchecked(linalg::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Eigenvalues all within `tol` of ±1.
    pub fn is_dichotomic(&self, tol: f64) -> bool {
        linalg::eigh(&self.matrix)
            .values
            .iter()
            .all(|v| (v.abs() - 1.0).abs() <= tol)
    }
}

/// Split `A = A0 + alpha·𝟙` with `tr(A0) = 0`. `A0` may have norm up to 2.
pub fn make_traceless(a: &Observable) -> (CMatrix, f64) {
    let d = a.dim();
    let alpha = a.trace().re / d as f64;
    let mut a0 = a.matrix.clone();
    for k in 0..d {
        a0[(k, k)] -= C64::new(alpha, 0.0);
    }
    (a0, alpha)
}

/// Observables of every party, indexed `[party][setting]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "crate::wire::ObservableSetJson",
    into = "crate::wire::ObservableSetJson"
)]
pub struct ObservableSet {
    parties: Vec<Vec<Observable>>,
}

impl ObservableSet {
    pub fn new(parties: Vec<Vec<Observable>>) -> Result<Self> {
        for (j, obs) in parties.iter().enumerate() {
            let first = obs.first().ok_or_else(|| {
                Error::ShapeMismatch(format!("party {j} has no observables"))
            })?;
            if let Some(k) = obs.iter().position(|a| a.dim() != first.dim()) {
                return Err(Error::ShapeMismatch(format!(
                    "party {j}: observable {k} has dimension {}, expected {}",
                    obs[k].dim(),
                    first.dim()
                )));
            }
        }
        Ok(Self { parties })
    }

    pub fn num_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn party(&self, j: usize) -> &[Observable] {
        &self.parties[j]
    }

    pub fn parties(&self) -> &[Vec<Observable>] {
        &self.parties
    }

    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p[0].dim()).collect()
    }

    pub fn settings(&self) -> Vec<usize> {
        self.parties.iter().map(Vec::len).collect()
    }

    pub fn check_matches(&self, t: &BellFunctional) -> Result<()> {
        if self.settings() != t.settings() {
            return Err(Error::ShapeMismatch(format!(
                "observable settings {:?} do not match functional settings {:?}",
                self.settings(),
                t.settings()
            )));
        }
        Ok(())
    }

    pub(crate) fn set_party(&mut self, j: usize, obs: Vec<Observable>) {
        self.parties[j] = obs;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateRepr {
    Pure(CVector),
    Mixed(CMatrix),
}

/// Pure or mixed state on `⊗_j C^{d_j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::wire::StateJson", into = "crate::wire::StateJson")]
pub struct QuantumState {
    dims: Vec<usize>,
    repr: StateRepr,
}

impl QuantumState {
    pub fn pure(dims: Vec<usize>, psi: CVector) -> Result<Self> {
        check_dims(&dims)?;
        let total: usize = dims.iter().product();
        if psi.len() != total {
            return Err(Error::InvalidState(format!(
                "vector length {} does not match dims {dims:?}",
                psi.len()
            )));
        }
        let norm_sq = psi.norm_squared();
        if (norm_sq - 1.0).abs() > PURE_NORM_TOL {
            return Err(Error::InvalidState(format!(
                "squared norm {norm_sq:.15} differs from 1 by more than {PURE_NORM_TOL:e}"
            )));
        }
        Ok(Self {
            dims,
            repr: StateRepr::Pure(psi),
        })
    }

    /// Normalizes `psi` before validation.
    pub fn pure_normalized(dims: Vec<usize>, psi: CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite vector".into()));
        }
        Self::pure(dims, psi.unscale(norm))
    }

    pub fn mixed(dims: Vec<usize>, rho: CMatrix) -> Result<Self> {
        check_dims(&dims)?;
        let total: usize = dims.iter().product();
        if rho.nrows() != total || rho.ncols() != total {
            return Err(Error::InvalidState(format!(
                "density operator is {}x{}, dims {dims:?} need {total}x{total}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let deviation = linalg::hermiticity_defect(&rho);
        if deviation > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "density operator not Hermitian (deviation {deviation:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > MIXED_TRACE_TOL || tr.im.abs() > MIXED_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_eig = linalg::eigh(&rho).values.last().copied().unwrap_or(0.0);
        if min_eig < -MIXED_PSD_TOL {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min_eig:.3e} is negative"
            )));
        }
        Ok(Self {
            dims,
            repr: StateRepr::Mixed(rho),
        })
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        Self::mixed(dims, linalg::identity(total).unscale(total as f64))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn as_pure(&self) -> Option<&CVector> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> CMatrix {
        match &self.repr {
            StateRepr::Pure(v) => v * v.adjoint(),
            StateRepr::Mixed(rho) => rho.clone(),
        }
    }

    /// Convex decomposition into weighted pure vectors (the spectral
    /// decomposition for mixed states, dropping negligible weights).
    pub fn components(&self) -> Vec<(f64, CVector)> {
        match &self.repr {
            StateRepr::Pure(v) => vec![(1.0, v.clone())],
            StateRepr::Mixed(rho) => {
                let eig = linalg::eigh(rho);
                eig.values
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 1e-14)
                    .map(|(k, &w)| (w, eig.vectors.column(k).into_owned()))
                    .collect()
            }
        }
    }

    /// Reduced density operator on the parties in `keep` (ascending order).
    pub fn reduced(&self, keep: &[usize]) -> Result<CMatrix> {
        let n = self.dims.len();
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= n) {
            return Err(Error::InvalidParameter(format!(
                "parties to keep {keep:?} must be ascending and below {n}"
            )));
        }
        let keep_dims: Vec<usize> = keep.iter().map(|&k| self.dims[k]).collect();
        let rest: Vec<usize> = (0..n).filter(|j| !keep.contains(j)).collect();
        let rest_dims: Vec<usize> = rest.iter().map(|&k| self.dims[k]).collect();
        let dk: usize = keep_dims.iter().product();
        let dr: usize = rest_dims.iter().product();
        let ks = strides(&keep_dims);
        let rs = strides(&rest_dims);
        // full index -> (keep index, rest index)
        let mut split = Vec::with_capacity(self.total_dim());
        for_each_index(&self.dims, |idx| {
            let a: usize = keep.iter().zip(&ks).map(|(&p, s)| idx[p] * s).sum();
            let b: usize = rest.iter().zip(&rs).map(|(&p, s)| idx[p] * s).sum();
            split.push((a, b));
        });
        match &self.repr {
            StateRepr::Pure(psi) => {
                let mut m = CMatrix::zeros(dk, dr);
                for (full, &(a, b)) in split.iter().enumerate() {
                    m[(a, b)] = psi[full];
                }
                Ok(&m * m.adjoint())
            }
            StateRepr::Mixed(rho) => {
                let mut out = CMatrix::zeros(dk, dk);
                for (x, &(a, r1)) in split.iter().enumerate() {
                    for (y, &(b, r2)) in split.iter().enumerate() {
                        if r1 == r2 {
                            out[(a, b)] += rho[(x, y)];
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidState(format!(
            "local dimensions must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

/// Checks `obs` against `t`, and the total dimension against `budget`.
fn check_operator_inputs(t: &BellFunctional, obs: &ObservableSet, budget: usize) -> Result<usize> {
    obs.check_matches(t)?;
    let dim = obs
        .dims()
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .unwrap_or(usize::MAX);
    if dim > budget {
        return Err(Error::BudgetExceeded { dim, budget });
    }
    Ok(dim)
}

/// `Σ_i T_i A^1_{i_1} ⊗ ⋯ ⊗ A^N_{i_N}` with the default dimension budget.
pub fn bell_operator(t: &BellFunctional, obs: &ObservableSet) -> Result<CMatrix> {
    bell_operator_with_budget(t, obs, DEFAULT_BUDGET_DIM)
}

pub fn bell_operator_with_budget(
    t: &BellFunctional,
    obs: &ObservableSet,
    budget: usize,
) -> Result<CMatrix> {
    check_operator_inputs(t, obs, budget)?;
    Ok(partial_operator(t.coeffs(), t.settings(), obs.parties()))
}

// Factorized form: Σ_{i_1} A_{i_1} ⊗ (operator of the slice T[i_1, ...]).
fn partial_operator(coeffs: &[f64], settings: &[usize], parties: &[Vec<Observable>]) -> CMatrix {
    let obs = &parties[0];
    let d = obs[0].dim();
    if parties.len() == 1 {
        let mut acc = CMatrix::zeros(d, d);
        for (c, a) in coeffs.iter().zip(obs) {
            if *c != 0.0 {
                acc += a.matrix().scale(*c);
            }
        }
        return acc;
    }
    let slice: usize = settings[1..].iter().product();
    let rest_dim: usize = parties[1..].iter().map(|p| p[0].dim()).product();
    let mut acc = CMatrix::zeros(d * rest_dim, d * rest_dim);
    for (i, a) in obs.iter().enumerate() {
        let sub = &coeffs[i * slice..(i + 1) * slice];
        if sub.iter().all(|&c| c == 0.0) {
            continue;
        }
        let inner = partial_operator(sub, &settings[1..], &parties[1..]);
        acc += linalg::kron(a.matrix(), &inner);
    }
    acc
}

/// `tr(ρB)`; `imag` carries the imaginary part, which is nonzero only when
/// `B` is not Hermitian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub imag: f64,
}

impl Expectation {
    pub const IMAG_REPORT_TOL: f64 = 1e-9;

    pub fn imaginary_residual(&self) -> Option<f64> {
        (self.imag.abs() > Self::IMAG_REPORT_TOL).then_some(self.imag)
    }
}

pub fn expectation(state: &QuantumState, b: &CMatrix) -> Result<Expectation> {
    let n = state.total_dim();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "operator is {}x{}, state dimension is {n}",
            b.nrows(),
            b.ncols()
        )));
    }
    let z = match state.repr() {
        StateRepr::Pure(psi) => psi.dotc(&(b * psi)),
        StateRepr::Mixed(rho) => {
            let mut acc = ZERO;
            for i in 0..n {
                for j in 0..n {
                    acc += rho[(i, j)] * b[(j, i)];
                }
            }
            acc
        }
    };
    Ok(Expectation {
        value: z.re,
        imag: z.im,
    })
}

/// Apply `op` to tensor factor `party` of `v`.
pub fn apply_local(v: &CVector, dims: &[usize], party: usize, op: &CMatrix) -> CVector {
    let d = dims[party];
    let inner: usize = dims[party + 1..].iter().product();
    let outer: usize = dims[..party].iter().product();
    let mut out = CVector::zeros(v.len());
    for o in 0..outer {
        let base = o * d * inner;
        for a in 0..d {
            for b in 0..d {
                let w = op[(a, b)];
                if w == ZERO {
                    continue;
                }
                let src = base + b * inner;
                let dst = base + a * inner;
                for i in 0..inner {
                    out[dst + i] += w * v[src + i];
                }
            }
        }
    }
    out
}

/// `X[p,q] = Σ phi[.., p, ..] conj(psi[.., q, ..])` over all factors except
/// `party`, so that `⟨psi|A_party ⊗ 𝟙|phi⟩ = tr(A X)`.
pub(crate) fn local_gram(phi: &CVector, psi: &CVector, dims: &[usize], party: usize) -> CMatrix {
    let d = dims[party];
    let inner: usize = dims[party + 1..].iter().product();
    let outer: usize = dims[..party].iter().product();
    let mut x = CMatrix::zeros(d, d);
    for o in 0..outer {
        let base = o * d * inner;
        for p in 0..d {
            for q in 0..d {
                let mut acc = ZERO;
                let (rp, rq) = (base + p * inner, base + q * inner);
                for i in 0..inner {
                    acc += phi[rp + i] * psi[rq + i].conj();
                }
                x[(p, q)] += acc;
            }
        }
    }
    x
}

/// `Σ_i T_i tr(ρ A^1_{i_1} ⊗ ⋯ ⊗ A^N_{i_N})` evaluated term by term on the
/// state's pure components, without forming the Bell operator.
pub fn contracted_value(t: &BellFunctional, state: &QuantumState, obs: &ObservableSet) -> Result<f64> {
    obs.check_matches(t)?;
    if obs.dims() != state.dims() {
        return Err(Error::ShapeMismatch(format!(
            "observable dims {:?} do not match state dims {:?}",
            obs.dims(),
            state.dims()
        )));
    }
    let dims = state.dims().to_vec();
    let mut total = 0.0;
    for (w, psi) in state.components() {
        let mut acc = 0.0;
        contract_dfs(t, obs, &dims, &psi, &psi, 0, 0, &mut acc);
        total += w * acc;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn contract_dfs(
    t: &BellFunctional,
    obs: &ObservableSet,
    dims: &[usize],
    psi: &CVector,
    current: &CVector,
    party: usize,
    offset: usize,
    acc: &mut f64,
) {
    let n = dims.len();
    let stride: usize = t.settings()[party + 1..].iter().product();
    for (i, a) in obs.party(party).iter().enumerate() {
        let off = offset + i * stride;
        let block = &t.coeffs()[off..off + stride];
        if block.iter().all(|&c| c == 0.0) {
            continue;
        }
        let next = apply_local(current, dims, party, a.matrix());
        if party + 1 == n {
            *acc += t.coeffs()[off] * psi.dotc(&next).re;
        } else {
            contract_dfs(t, obs, dims, psi, &next, party + 1, off, acc);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals;
    use crate::linalg::{c, pauli_x, pauli_y, pauli_z, ONE};

    fn obs(m: CMatrix) -> Observable {
        Observable::new(m).unwrap()
    }

    fn basis(dim: usize, k: usize) -> CVector {
        let mut v = CVector::zeros(dim);
        v[k] = ONE;
        v
    }

    #[test]
    fn chsh_with_pauli_z_is_diagonal_and_gives_two_on_00() {
        let t = functionals::chsh();
        let z = obs(pauli_z());
        let set = ObservableSet::new(vec![vec![z.clone(), z.clone()], vec![z.clone(), z]]).unwrap();
        let b = bell_operator(&t, &set).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(b[(i, j)].norm() < 1e-15);
                }
            }
        }
        // 1 + 1 + 1 - 1 on |00>; the ZZ factor is +1 there
        let state = QuantumState::pure(vec![2, 2], basis(4, 0)).unwrap();
        let e = expectation(&state, &b).unwrap();
        assert!((e.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_coefficient_with_identities_is_identity() {
        let t = BellFunctional::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let set = ObservableSet::new(vec![
            vec![Observable::identity(2)],
            vec![Observable::identity(3)],
            vec![Observable::identity(2)],
        ])
        .unwrap();
        let b = bell_operator(&t, &set).unwrap();
        assert!(linalg::max_abs_diff(&b, &linalg::identity(12)) < 1e-15);
        let psi = CVector::from_fn(12, |k, _| c(k as f64, 1.0));
        let state = QuantumState::pure_normalized(vec![2, 3, 2], psi).unwrap();
        assert!((expectation(&state, &b).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_functional_rejected() {
        assert!(matches!(
            BellFunctional::new(vec![2, 2], vec![0.0; 4]),
            Err(Error::InvalidFunctional(_))
        ));
        assert!(BellFunctional::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(BellFunctional::new(vec![2], vec![1.0; 2]).is_err());
        assert!(BellFunctional::new(vec![2, 2], vec![1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn mermin_on_ghz_is_four_two_ways() {
        let t = functionals::mermin3();
        let (state, set) = functionals::mermin3_witness();
        let b = bell_operator(&t, &set).unwrap();
        let e = expectation(&state, &b).unwrap();
        assert!((e.value - 4.0).abs() < 1e-12, "{}", e.value);
        assert!(e.imaginary_residual().is_none());
        let direct = contracted_value(&t, &state, &set).unwrap();
        assert!((direct - 4.0).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_kills_traceless_operators() {
        let t = functionals::chsh();
        let set = ObservableSet::new(vec![
            vec![obs(pauli_x()), obs(pauli_z())],
            vec![obs(pauli_y()), obs(pauli_z())],
        ])
        .unwrap();
        let b = bell_operator(&t, &set).unwrap();
        let rho = QuantumState::maximally_mixed(vec![2, 2]).unwrap();
        assert!(expectation(&rho, &b).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn expectation_reports_imaginary_part() {
        let state = QuantumState::pure_normalized(vec![2], CVector::from_vec(vec![ONE, c(0.0, 1.0)])).unwrap();
        let mut b = CMatrix::zeros(2, 2);
        b[(0, 1)] = ONE;
        let e = expectation(&state, &b).unwrap();
        assert!(e.imaginary_residual().is_some());
        assert!(expectation(&state, &linalg::identity(3)).is_err());
    }

    #[test]
    fn make_traceless_cases() {
        let (a0, alpha) = make_traceless(&Observable::identity(3));
        assert!(a0.norm() < 1e-15);
        assert_eq!(alpha, 1.0);

        let z = obs(pauli_z());
        let (a0, alpha) = make_traceless(&z);
        assert_eq!(alpha, 0.0);
        assert!(linalg::max_abs_diff(&a0, &pauli_z()) < 1e-15);

        let p = obs(CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, linalg::ZERO])));
        let (a0, alpha) = make_traceless(&p);
        assert!((alpha - 0.5).abs() < 1e-15);
        assert!((a0[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((a0[(1, 1)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!(a0.trace().norm() < 1e-12);
    }

    #[test]
    fn observable_validation() {
        let mut m = pauli_x();
        m[(0, 1)] = c(1.0, 1e-6);
        assert!(matches!(Observable::new(m), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            Observable::new(pauli_x().scale(1.5)),
            Err(Error::NotContraction { .. })
        ));
        assert!(Observable::new(CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn shape_mismatch_and_budget() {
        let t = functionals::chsh();
        let one = ObservableSet::new(vec![vec![obs(pauli_z())], vec![obs(pauli_z())]]).unwrap();
        assert!(matches!(bell_operator(&t, &one), Err(Error::ShapeMismatch(_))));
        let big = ObservableSet::new(vec![
            vec![Observable::identity(100); 2],
            vec![Observable::identity(100); 2],
        ])
        .unwrap();
        assert!(matches!(
            bell_operator(&t, &big),
            Err(Error::BudgetExceeded { dim: 10000, budget: 4096 })
        ));
    }

    #[test]
    fn state_validation() {
        assert!(QuantumState::pure(vec![2], CVector::from_vec(vec![ONE, ONE])).is_err());
        assert!(QuantumState::pure(vec![3], basis(2, 0)).is_err());
        let mut rho = linalg::identity(2).unscale(2.0);
        rho[(0, 0)] = c(1.2, 0.0);
        rho[(1, 1)] = c(-0.2, 0.0);
        assert!(QuantumState::mixed(vec![2], rho).is_err());
    }

    #[test]
    fn reduced_states_of_bell_pair() {
        let mut v = CVector::zeros(4);
        v[0] = ONE;
        v[3] = ONE;
        let s = QuantumState::pure_normalized(vec![2, 2], v).unwrap();
        let r = s.reduced(&[0]).unwrap();
        assert!(linalg::max_abs_diff(&r, &linalg::identity(2).unscale(2.0)) < 1e-15);
        let mixed = QuantumState::mixed(vec![2, 2], s.density()).unwrap();
        let r2 = mixed.reduced(&[1]).unwrap();
        assert!(linalg::max_abs_diff(&r2, &linalg::identity(2).unscale(2.0)) < 1e-15);
    }

    #[test]
    fn permutations_preserve_entries() {
        let t = functionals::random_gaussian(3, 2, 5).unwrap();
        let p = t.permute_parties(&[2, 0, 1]).unwrap();
        assert_eq!(p.get(&[1, 0, 1]), t.get(&[0, 1, 1]));
        let s = t.permute_settings(1, &[1, 0]).unwrap();
        assert_eq!(s.get(&[0, 0, 1]), t.get(&[0, 1, 1]));
        assert!(t.permute_parties(&[0, 0, 1]).is_err());
    }
}
