//! Haar-random unitaries, the random tripartite state built from them, and
//! Monte Carlo estimates of `sup_{|λ|_2 ≤ 1} ||Σ λ_i U_i||`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, ONE, ZERO};
use crate::rng::{derive_seed, stream_rng, Rng};
use crate::tensor_core::QuantumState;

pub const UNITARITY_TOL: f64 = 1e-10;
pub const DEFAULT_EPS_RESTARTS: usize = 16;
const EPS_WARMUP_ITERS: usize = 3000;
const EPS_WARMUP_TOL: f64 = 1e-12;
const EPS_MAX_ITERS: usize = 200;
const EPS_REL_TOL: f64 = 1e-13;

/// Haar-distributed `dim × dim` unitary: QR of a complex Ginibre matrix with
/// each column of `Q` multiplied by the phase of the matching diagonal entry
/// of `R`. Without the phase fix the result is not Haar.
pub fn haar_unitary(dim: usize, rng: &mut Rng) -> CMatrix {
    let g = linalg::complex_gaussian_matrix(dim, dim, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        q.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

pub fn haar_unitary_seeded(dim: usize, seed: u64) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
    }
    Ok(haar_unitary(dim, &mut stream_rng(seed, 0)))
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    linalg::max_abs_diff(&(u.adjoint() * u), &linalg::identity(u.ncols()))
}

/// `n` unitaries of size `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryFamily {
    pub n: usize,
    pub dim: usize,
    #[serde(with = "matrices_json")]
    pub matrices: Vec<CMatrix>,
    pub seed: Option<u64>,
}

impl UnitaryFamily {
    pub fn new(matrices: Vec<CMatrix>) -> Result<Self> {
        let dim = matrices.first().map(|m| m.nrows()).ok_or_else(|| {
            Error::InvalidParameter("unitary family must be non-empty".into())
        })?;
        for (i, u) in matrices.iter().enumerate() {
            if u.nrows() != dim || u.ncols() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "unitary {i} is {}x{}, expected {dim}x{dim}",
                    u.nrows(),
                    u.ncols()
                )));
            }
            let defect = unitarity_defect(u);
            if defect > UNITARITY_TOL {
                return Err(Error::InvalidParameter(format!(
                    "matrix {i} is not unitary (|U†U − 𝟙| = {defect:.3e})"
                )));
            }
        }
        Ok(Self {
            n: matrices.len(),
            dim,
            matrices,
            seed: None,
        })
    }

    pub fn sample(n: usize, dim: usize, seed: u64) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidParameter("n and N must be ≥ 1".into()));
        }
        let mut rng = stream_rng(seed, 0);
        let matrices = (0..n).map(|_| haar_unitary(dim, &mut rng)).collect();
        let mut f = Self::new(matrices)?;
        f.seed = Some(seed);
        Ok(f)
    }
}

mod matrices_json {
    use super::CMatrix;
    use crate::wire::MatrixJson;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(MatrixJson::from_matrix).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        Vec::<MatrixJson>::deserialize(d)?
            .iter()
            .map(|m| m.to_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `ψ_{ijk} = ⟨j|U_i†|k⟩ / √(nN)` on `C^n ⊗ C^N ⊗ C^N`.
pub fn tripartite_state(family: &UnitaryFamily) -> Result<QuantumState> {
    let (n, dim) = (family.n, family.dim);
    let scale = 1.0 / ((n * dim) as f64).sqrt();
    let mut psi = CVector::zeros(n * dim * dim);
    for (i, u) in family.matrices.iter().enumerate() {
        // ⟨j|U†|k⟩ = conj(U[k, j])
        for j in 0..dim {
            for k in 0..dim {
                psi[(i * dim + j) * dim + k] = u[(k, j)].conj() * scale;
            }
        }
    }
    QuantumState::pure(vec![n, dim, dim], psi)
}

pub fn random_tripartite_state(n: usize, dim: usize, seed: u64) -> Result<(QuantumState, UnitaryFamily)> {
    let family = UnitaryFamily::sample(n, dim, seed)?;
    Ok((tripartite_state(&family)?, family))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsNormEstimate {
    pub value: f64,
    #[serde(with = "cvec_json")]
    pub lambda: CVector,
    #[serde(with = "cvec_json")]
    pub left: CVector,
    #[serde(with = "cvec_json")]
    pub right: CVector,
    pub restarts: usize,
}

mod cvec_json {
    use super::CVector;
    use crate::wire::VectorJson;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        VectorJson::from_vector(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        VectorJson::deserialize(d)?.to_vector().map_err(serde::de::Error::custom)
    }
}

impl EpsNormEstimate {
    /// `|⟨left| Σ λ_i U_i |right⟩|` recomputed from the witness.
    pub fn witness_value(&self, family: &UnitaryFamily) -> f64 {
        let m = combination(family, &self.lambda);
        self.left.dotc(&(m * &self.right)).norm()
    }
}

fn combination(family: &UnitaryFamily, lambda: &CVector) -> CMatrix {
    let mut m = CMatrix::zeros(family.dim, family.dim);
    let out = m.as_mut_slice();
    for (l, u) in lambda.iter().zip(&family.matrices) {
        for (o, a) in out.iter_mut().zip(u.as_slice()) {
            *o += a * l;
        }
    }
    m
}

fn top_singular_pair(m: &CMatrix) -> (f64, CVector, CVector) {
    let svd = m.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut k = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > svd.singular_values[k] {
            k = i;
        }
    }
    let left = u.column(k).into_owned();
    let right = v_t.row(k).adjoint();
    (svd.singular_values[k], left, right)
}

/// `λ_i ∝ conj(⟨y|U_i|x⟩)`, normalized; `e_0` when every overlap vanishes.
fn lambda_step(family: &UnitaryFamily, x: &CVector, y: &CVector) -> CVector {
    // ⟨y|U|x⟩ = Σ_{r,c} conj(y_r) U_rc x_c over column-major storage
    let dim = family.dim;
    let coeffs = CVector::from_iterator(
        family.n,
        family.matrices.iter().map(|u| {
            u.as_slice()
                .chunks_exact(dim)
                .zip(x.iter())
                .fold(ZERO, |acc, (col, xc)| {
                    acc + col.iter().zip(y.iter()).fold(ZERO, |a, (u_rc, yr)| a + yr.conj() * u_rc) * xc
                })
        }),
    );
    let norm = coeffs.norm();
    if norm > 0.0 {
        coeffs.map(|z| z.conj()).unscale(norm)
    } else {
        let mut e = CVector::zeros(family.n);
        e[0] = c(1.0, 0.0);
        e
    }
}

/// Alternating maximization of `|⟨y|Σ λ_i U_i|x⟩|` over unit `λ, x, y`.
/// The result is a lower bound on the supremum.
pub fn eps_norm(family: &UnitaryFamily, restarts: usize, seed: u64) -> Result<EpsNormEstimate> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be ≥ 1".into()));
    }
    let runs: Vec<EpsNormEstimate> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut x = linalg::random_unit_vector(family.dim, &mut rng);
            let mut y = linalg::random_unit_vector(family.dim, &mut rng);
            let mut lambda = lambda_step(family, &x, &y);
            // warm-up: with W_i = U_i x, y ∝ Σ λ_i W_i, λ_i ∝ conj⟨y|W_i⟩,
            // x ∝ Σ conj(λ_i) U_i† y; each update is an ascent step
            let mut value = 0.0;
            for _ in 0..EPS_WARMUP_ITERS {
                let w: Vec<CVector> = family.matrices.iter().map(|u| u * &x).collect();
                let mut my = CVector::zeros(family.dim);
                for (l, wi) in lambda.iter().zip(&w) {
                    my.axpy(*l, wi, ONE);
                }
                let norm = my.norm();
                if norm == 0.0 {
                    break;
                }
                y = my.unscale(norm);
                let coeffs = CVector::from_iterator(family.n, w.iter().map(|wi| y.dotc(wi)));
                let cn = coeffs.norm();
                if cn == 0.0 {
                    break;
                }
                lambda = coeffs.map(|z| z.conj()).unscale(cn);
                let mut mx = CVector::zeros(family.dim);
                for (l, u) in lambda.iter().zip(&family.matrices) {
                    mx.axpy(l.conj(), &u.ad_mul(&y), ONE);
                }
                let prev = value;
                value = mx.norm();
                if value == 0.0 {
                    break;
                }
                x = mx.unscale(value);
                if (value - prev).abs() <= EPS_WARMUP_TOL * value {
                    break;
                }
            }
            lambda = lambda_step(family, &x, &y);
            value = 0.0;
            for _ in 0..EPS_MAX_ITERS {
                let (s, left, right) = top_singular_pair(&combination(family, &lambda));
                y = left;
                x = right;
                lambda = lambda_step(family, &x, &y);
                let prev = value;
                value = s;
                if (value - prev).abs() <= EPS_REL_TOL * value {
                    break;
                }
            }
            EpsNormEstimate {
                value,
                lambda,
                left: y,
                right: x,
                restarts,
            }
        })
        .collect();
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = k;
        }
    }
    let mut out = runs.into_iter().nth(best).expect("restarts ≥ 1");
    out.value = out.witness_value(family);
    Ok(out)
}

/// `32π (1 + √(n / 4N))`.
pub fn chevet_bound(n: usize, dim: usize) -> f64 {
    32.0 * std::f64::consts::PI * (1.0 + (n as f64 / (4.0 * dim as f64)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChevetSummary {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub restarts: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    pub std: f64,
    pub bound: f64,
}

/// ε-norm estimates over `samples` independent Haar families.
pub fn chevet_montecarlo(n: usize, dim: usize, samples: usize, seed: u64) -> Result<ChevetSummary> {
    chevet_montecarlo_with(n, dim, samples, seed, DEFAULT_EPS_RESTARTS)
}

pub fn chevet_montecarlo_with(
    n: usize,
    dim: usize,
    samples: usize,
    seed: u64,
    restarts: usize,
) -> Result<ChevetSummary> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be ≥ 1".into()));
    }
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let fam = UnitaryFamily::sample(n, dim, derive_seed(seed, 2 * s))?;
            Ok(eps_norm(&fam, restarts, derive_seed(seed, 2 * s + 1))?.value)
        })
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / samples as f64;
    Ok(ChevetSummary {
        n,
        dim,
        seed,
        restarts,
        max: values.iter().cloned().fold(f64::MIN, f64::max),
        mean,
        std: var.sqrt(),
        bound: chevet_bound(n, dim),
        values,
    })
}

/// `tr(U_j† U_i)`, which sets the off-diagonal entry `(i, j)` of the
/// first party's reduced state of [`tripartite_state`] (times `1/(nN)`).
pub fn frobenius_overlap(u_i: &CMatrix, u_j: &CMatrix) -> C64 {
    u_i.iter().zip(u_j.iter()).fold(ZERO, |acc, (a, b)| acc + a * b.conj())
}
