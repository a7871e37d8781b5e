//! Scenario file schema: a strict JSON document holding the initial states,
//! the Hamiltonian blocks (complex entries as [re, im] pairs), the time grid
//! and run options. Unknown fields are rejected.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use negtrans_core::dynamics::{TotalHamiltonian, TripartiteScenario};
use negtrans_core::error::{Error, Result};
use negtrans_core::qmat::CMat;
use negtrans_core::states::DensityMatrix;

pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub d_a: usize,
    pub d_b: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenvaluesSpec {
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixStateSpec {
    pub matrix: MatrixSpec,
}

/// A state given by its spectrum, a full matrix, or the string "pure:k" for
/// the k-th basis state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Pure(String),
    Eigenvalues(EigenvaluesSpec),
    Matrix(MatrixStateSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub a: MatrixSpec,
    pub b: MatrixSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub dims: Dims,
    pub rho_a: StateSpec,
    pub rho_b: StateSpec,
    pub hamiltonian: HamiltonianSpec,
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_tol: Option<f64>,
}

pub fn matrix_from_spec(spec: &MatrixSpec, dim: usize, name: &str) -> Result<CMat> {
    if spec.len() != dim || spec.iter().any(|row| row.len() != dim) {
        return Err(Error::Shape(format!("{name} must be a {dim}x{dim} matrix")));
    }
    let mut m = Array2::zeros((dim, dim));
    for (i, row) in spec.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

pub fn matrix_to_spec(m: &CMat) -> MatrixSpec {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn state_from_spec(spec: &StateSpec, dim: usize, name: &str) -> Result<DensityMatrix> {
    match spec {
        StateSpec::Pure(s) => {
            let k = s
                .strip_prefix("pure:")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| {
                    Error::InvalidDensity(format!(
                        "{name}: expected \"pure:<index>\", got {s:?}"
                    ))
                })?;
            DensityMatrix::pure_basis(dim, k)
        }
        StateSpec::Eigenvalues(e) => {
            if e.eigenvalues.len() != dim {
                return Err(Error::Shape(format!(
                    "{name}: {} eigenvalues for dimension {dim}",
                    e.eigenvalues.len()
                )));
            }
            DensityMatrix::from_eigenvalues(&e.eigenvalues)
        }
        StateSpec::Matrix(m) => DensityMatrix::new(matrix_from_spec(&m.matrix, dim, name)?),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidDensity(format!("scenario parse error: {e}")))?;
        if file.schema_version != 1 {
            return Err(Error::Domain(format!(
                "unsupported schema_version {}",
                file.schema_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Domain(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_scenario(&self) -> Result<TripartiteScenario> {
        let (da, db) = (self.dims.d_a, self.dims.d_b);
        let rho_a = state_from_spec(&self.rho_a, da, "rho_a")?;
        let rho_b = state_from_spec(&self.rho_b, db, "rho_b")?;
        let mut terms = Vec::with_capacity(self.hamiltonian.terms.len());
        for (k, term) in self.hamiltonian.terms.iter().enumerate() {
            terms.push((
                matrix_from_spec(&term.a, da, &format!("terms[{k}].a"))?,
                matrix_from_spec(&term.b, db, &format!("terms[{k}].b"))?,
            ));
        }
        let c = self
            .hamiltonian
            .c
            .as_ref()
            .map(|m| matrix_from_spec(m, da, "hamiltonian.c"))
            .transpose()?;
        let d = self
            .hamiltonian
            .d
            .as_ref()
            .map(|m| matrix_from_spec(m, db, "hamiltonian.d"))
            .transpose()?;
        let e = self
            .hamiltonian
            .e
            .as_ref()
            .map(|m| matrix_from_spec(m, da, "hamiltonian.e"))
            .transpose()?;
        let ham = TotalHamiltonian::new(da, db, terms, c, d, e)?;
        TripartiteScenario::new(rho_a, rho_b, ham, self.zero_tol)
    }

    pub fn grid(&self) -> Vec<f64> {
        negtrans_core::dynamics::linspace(
            self.time_grid.start,
            self.time_grid.stop,
            self.time_grid.points.max(1),
        )
    }
}
