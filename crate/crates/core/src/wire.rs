//! JSON shapes of the core data types. Complex arrays are stored as separate
//! real and imaginary nested arrays.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};
use crate::tensor_core::{BellFunctional, Observable, ObservableSet, QuantumState, StateRepr};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalJson {
    pub parties: usize,
    pub settings: Vec<usize>,
    pub coeffs: Value,
}

impl TryFrom<FunctionalJson> for BellFunctional {
    type Error = Error;

    fn try_from(raw: FunctionalJson) -> Result<Self> {
        if raw.parties != raw.settings.len() {
            return Err(Error::InvalidFunctional(format!(
                "\"parties\" is {} but \"settings\" lists {} parties",
                raw.parties,
                raw.settings.len()
            )));
        }
        let mut flat = Vec::new();
        flatten(&raw.coeffs, &raw.settings, &mut flat)?;
        BellFunctional::new(raw.settings, flat)
    }
}

fn flatten(v: &Value, shape: &[usize], out: &mut Vec<f64>) -> Result<()> {
    match shape.split_first() {
        None => {
            let x = v.as_f64().ok_or_else(|| {
                Error::InvalidFunctional(format!("expected a number, found {v}"))
            })?;
            out.push(x);
            Ok(())
        }
        Some((&m, rest)) => {
            let arr = v.as_array().ok_or_else(|| {
                Error::InvalidFunctional(format!("expected an array of length {m}"))
            })?;
            if arr.len() != m {
                return Err(Error::InvalidFunctional(format!(
                    "expected an array of length {m}, found length {}",
                    arr.len()
                )));
            }
            arr.iter().try_for_each(|x| flatten(x, rest, out))
        }
    }
}

fn nest(flat: &[f64], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => Value::from(flat[0]),
        Some((&m, rest)) => {
            let chunk = flat.len() / m;
            Value::Array((0..m).map(|i| nest(&flat[i * chunk..(i + 1) * chunk], rest)).collect())
        }
    }
}

impl From<BellFunctional> for FunctionalJson {
    fn from(t: BellFunctional) -> Self {
        Self {
            parties: t.num_parties(),
            settings: t.settings().to_vec(),
            coeffs: nest(t.coeffs(), t.settings()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&crate::linalg::C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let r = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        if self.im.len() != r
            || self.re.iter().chain(&self.im).any(|row| row.len() != cols)
        {
            return Err(Error::ShapeMismatch(
                "real and imaginary parts must be rectangular arrays of the same shape".into(),
            ));
        }
        Ok(CMatrix::from_fn(r, cols, |i, j| c(self.re[i][j], self.im[i][j])))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl VectorJson {
    pub fn from_vector(v: &CVector) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_vector(&self) -> Result<CVector> {
        if self.re.len() != self.im.len() {
            return Err(Error::ShapeMismatch(
                "real and imaginary parts differ in length".into(),
            ));
        }
        Ok(CVector::from_iterator(
            self.re.len(),
            self.re.iter().zip(&self.im).map(|(&a, &b)| c(a, b)),
        ))
    }
}

impl TryFrom<MatrixJson> for Observable {
    type Error = Error;

    fn try_from(raw: MatrixJson) -> Result<Self> {
        Observable::new(raw.to_matrix()?)
    }
}

impl From<Observable> for MatrixJson {
    fn from(a: Observable) -> Self {
        MatrixJson::from_matrix(a.matrix())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservableSetJson {
    pub dims: Vec<usize>,
    pub observables: Vec<Vec<Observable>>,
}

impl TryFrom<ObservableSetJson> for ObservableSet {
    type Error = Error;

    fn try_from(raw: ObservableSetJson) -> Result<Self> {
        let set = ObservableSet::new(raw.observables)?;
        if set.dims() != raw.dims {
            return Err(Error::ShapeMismatch(format!(
                "declared dims {:?} do not match observable dims {:?}",
                raw.dims,
                set.dims()
            )));
        }
        Ok(set)
    }
}

impl From<ObservableSet> for ObservableSetJson {
    fn from(s: ObservableSet) -> Self {
        Self {
            dims: s.dims(),
            observables: s.parties().to_vec(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateJson {
    Pure {
        dims: Vec<usize>,
        #[serde(flatten)]
        amplitudes: VectorJson,
    },
    Mixed {
        dims: Vec<usize>,
        #[serde(flatten)]
        density: MatrixJson,
    },
}

impl TryFrom<StateJson> for QuantumState {
    type Error = Error;

    fn try_from(raw: StateJson) -> Result<Self> {
        match raw {
            StateJson::Pure { dims, amplitudes } => QuantumState::pure(dims, amplitudes.to_vector()?),
            StateJson::Mixed { dims, density } => QuantumState::mixed(dims, density.to_matrix()?),
        }
    }
}

impl From<QuantumState> for StateJson {
    fn from(s: QuantumState) -> Self {
        let dims = s.dims().to_vec();
        match s.repr() {
            StateRepr::Pure(v) => StateJson::Pure {
                dims,
                amplitudes: VectorJson::from_vector(v),
            },
            StateRepr::Mixed(m) => StateJson::Mixed {
                dims,
                density: MatrixJson::from_matrix(m),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals;

    #[test]
    fn functional_json_layout() {
        let json = serde_json::to_value(functionals::chsh()).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"parties": 2, "settings": [2, 2], "coeffs": [[1.0, 1.0], [1.0, -1.0]]})
        );
    }

    #[test]
    fn malformed_functionals_rejected() {
        let bad = [
            r#"{"parties": 3, "settings": [2, 2], "coeffs": [[1, 1], [1, -1]]}"#,
            r#"{"parties": 2, "settings": [2, 2], "coeffs": [[1, 1], [1]]}"#,
            r#"{"parties": 2, "settings": [2, 2], "coeffs": [[1, 1], [1, "x"]]}"#,
            r#"{"parties": 2, "settings": [2, 2], "coeffs": [[0, 0], [0, 0]]}"#,
        ];
        for s in bad {
            assert!(serde_json::from_str::<BellFunctional>(s).is_err(), "{s}");
        }
    }

    #[test]
    fn witness_round_trips() {
        let (state, obs) = functionals::mermin3_witness();
        let s2: QuantumState = serde_json::from_str(&serde_json::to_string(&state).unwrap()).unwrap();
        let o2: ObservableSet = serde_json::from_str(&serde_json::to_string(&obs).unwrap()).unwrap();
        assert_eq!(state, s2);
        assert_eq!(obs, o2);
        let mixed = QuantumState::mixed(state.dims().to_vec(), state.density()).unwrap();
        let m2: QuantumState = serde_json::from_str(&serde_json::to_string(&mixed).unwrap()).unwrap();
        assert_eq!(mixed, m2);
    }
}
