use std::fmt;
use std::path::Path;

use bilinear_dyson::{DMatrix, DVector, Error, Field, LinearOperator, PiecewiseConstantControl};
use serde::{Deserialize, Serialize};

/// Failure classes, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 2).
    Input(String),
    /// The requested accuracy cannot be certified (exit 3).
    Certificate(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Certificate(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Certificate(m) => write!(f, "certificate error: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } => {
                CliError::Input(e.to_string())
            }
            Error::CertificateUnreachable { .. } => CliError::Certificate(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

/// A matrix or vector entry: a bare number, or `[re, im]` for complex problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn from_field<T: Field>(z: T) -> Self {
        let (re, im) = z.parts();
        if T::COMPLEX {
            Scalar::Complex([re, im])
        } else {
            Scalar::Real(re)
        }
    }

    fn parts(self) -> (f64, f64) {
        match self {
            Scalar::Real(re) => (re, 0.0),
            Scalar::Complex([re, im]) => (re, im),
        }
    }
}

/// Problem file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dim: usize,
    pub field: FieldKind,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Scalar>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Scalar>>,
    pub psi0: Vec<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<PiecewiseConstantControl>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub l1_budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

pub struct Instance<T: Field> {
    pub a: LinearOperator<T>,
    pub b: LinearOperator<T>,
    pub psi0: DVector<T>,
    pub control: PiecewiseConstantControl,
}

impl ProblemSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let spec: ProblemSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem specs always serialize")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.dim;
        if n == 0 {
            return Err(CliError::Input("dim must be at least 1".into()));
        }
        for (name, m) in [("A", &self.a), ("B", &self.b)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(CliError::Input(format!("{name} must be {n}x{n}")));
            }
        }
        if self.psi0.len() != n {
            return Err(CliError::Input(format!("psi0 must have length {n}")));
        }
        let entries = self.a.iter().chain(&self.b).flatten().chain(&self.psi0);
        for s in entries {
            let (re, im) = s.parts();
            if !re.is_finite() || !im.is_finite() {
                return Err(CliError::Input("non-finite entry".into()));
            }
            if self.field == FieldKind::Real && matches!(s, Scalar::Complex(_)) {
                return Err(CliError::Input("complex entry in a real problem".into()));
            }
        }
        for (name, v) in [
            ("T", self.horizon),
            ("K", self.l1_budget),
            ("eps", self.eps),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(CliError::Input(format!("{name} must be finite and >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn instance<T: Field>(&self) -> Result<Instance<T>, CliError> {
        let n = self.dim;
        let matrix = |m: &[Vec<Scalar>]| -> Result<LinearOperator<T>, CliError> {
            Ok(LinearOperator::new(DMatrix::from_fn(n, n, |r, c| {
                let (x, y) = m[r][c].parts();
                T::from_parts(x, y)
            }))?)
        };
        Ok(Instance {
            a: matrix(&self.a)?,
            b: matrix(&self.b)?,
            psi0: DVector::from_iterator(
                n,
                self.psi0.iter().map(|s| {
                    let (x, y) = s.parts();
                    T::from_parts(x, y)
                }),
            ),
            control: self
                .control
                .clone()
                .unwrap_or_else(PiecewiseConstantControl::zero),
        })
    }

    /// Embedded (real) dimension of the state space.
    pub fn embedded_dim(&self) -> usize {
        match self.field {
            FieldKind::Real => self.dim,
            FieldKind::Complex => 2 * self.dim,
        }
    }
}

pub fn matrix_entries<T: Field>(m: &DMatrix<T>) -> Vec<Vec<Scalar>> {
    m.row_iter()
        .map(|row| row.iter().map(|&z| Scalar::from_field(z)).collect())
        .collect()
}

pub fn vector_entries<T: Field>(v: &DVector<T>) -> Vec<Scalar> {
    v.iter().map(|&z| Scalar::from_field(z)).collect()
}
