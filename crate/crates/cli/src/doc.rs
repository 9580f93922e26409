//! JSON matrix documents and named built-in inputs.

use std::fs;

use coherence_core::channels::{conjugation_example, maximally_coherent, omega_materialize, rho_p, DensityMatrix};
use coherence_core::matcore::ComplexMatrix;
use coherence_core::{Complex64, Error};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// `{"dim": d, "entries": [[[re, im], ...], ...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub dim: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl MatrixDocument {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let d = m.dim();
        Self {
            dim: d,
            entries: (0..d)
                .map(|i| (0..d).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix, Error> {
        if self.entries.len() != self.dim {
            return Err(Error::BadShape {
                expected: self.dim,
                found: self.entries.len(),
            });
        }
        let mut flat = Vec::with_capacity(self.dim * self.dim);
        for row in &self.entries {
            if row.len() != self.dim {
                return Err(Error::BadShape {
                    expected: self.dim,
                    found: row.len(),
                });
            }
            flat.extend(row.iter().map(|[re, im]| Complex64::new(*re, *im)));
        }
        ComplexMatrix::new(self.dim, flat)
    }
}

/// A resolved command-line input: where it came from, its content hash and
/// the matrix it denotes.
#[derive(Debug, Clone)]
pub struct Input {
    pub source: String,
    pub sha256: String,
    pub matrix: ComplexMatrix,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_builtin(arg: &str, default_dim: Option<usize>) -> Option<Result<ComplexMatrix, Error>> {
    let parts: Vec<&str> = arg.split(':').collect();
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::InvalidInput(format!("bad dimension '{s}' in '{arg}'")))
    };
    let built = match parts.as_slice() {
        ["psi-plus"] => match default_dim {
            Some(d) => maximally_coherent(d).map(DensityMatrix::into_matrix),
            None => Err(Error::InvalidInput("psi-plus needs a dimension here: psi-plus:d".into())),
        },
        ["psi-plus", d] => dim(d).and_then(|d| maximally_coherent(d).map(DensityMatrix::into_matrix)),
        ["rho-p", d, p] => dim(d).and_then(|d| {
            let p = p
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad mixing parameter '{p}' in '{arg}'")))?;
            rho_p(d, p).map(DensityMatrix::into_matrix)
        }),
        ["example"] => omega_materialize(&conjugation_example(), 3),
        ["example-conj"] => omega_materialize(&conjugation_example(), 3).map(|m| m.map(|z| z.conj())),
        _ => return None,
    };
    Some(built)
}

/// Resolves a built-in name (`psi-plus[:d]`, `rho-p:d:p`, `example`,
/// `example-conj`) or reads a [`MatrixDocument`] file. `default_dim` fills
/// in a bare `psi-plus`.
pub fn load(arg: &str, default_dim: Option<usize>) -> Result<Input, Error> {
    if let Some(built) = parse_builtin(arg, default_dim) {
        let matrix = built?;
        return Ok(Input {
            source: format!("builtin:{arg}"),
            sha256: digest(arg.as_bytes()),
            matrix,
        });
    }
    let bytes = fs::read(arg).map_err(|e| Error::InvalidInput(format!("cannot read '{arg}': {e}")))?;
    let doc: MatrixDocument = serde_json::from_slice(&bytes)
        .map_err(|e| Error::InvalidInput(format!("'{arg}' is not a matrix document: {e}")))?;
    Ok(Input {
        source: arg.to_string(),
        sha256: digest(&bytes),
        matrix: doc.to_matrix()?,
    })
}

pub fn load_density(arg: &str) -> Result<(Input, DensityMatrix), Error> {
    let input = load(arg, None)?;
    let rho = DensityMatrix::new(input.matrix.clone())?;
    Ok((input, rho))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trip() {
        let m = ComplexMatrix::new(
            2,
            vec![
                Complex64::new(0.1, 0.0),
                Complex64::new(1.0 / 3.0, -0.2),
                Complex64::new(1.0 / 3.0, 0.2),
                Complex64::new(0.9, 0.0),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&MatrixDocument::from_matrix(&m)).unwrap();
        let back: MatrixDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
    }

    #[test]
    fn ragged_document_rejected() {
        let doc: MatrixDocument = serde_json::from_str(r#"{"dim":2,"entries":[[[1,0],[0,0]],[[0,0]]]}"#).unwrap();
        assert!(doc.to_matrix().is_err());
    }

    #[test]
    fn builtins() {
        assert_eq!(load("psi-plus:3", None).unwrap().matrix.dim(), 3);
        assert_eq!(load("psi-plus", Some(4)).unwrap().matrix.dim(), 4);
        assert!(load("psi-plus", None).is_err());
        let r = load("rho-p:3:0.5", None).unwrap().matrix;
        assert!((r[(0, 1)].re - 0.5 / 3.0).abs() < 1e-15);
        assert!(load("rho-p:3:x", None).is_err());
        let m = load("example", None).unwrap().matrix;
        let mc = load("example-conj", None).unwrap().matrix;
        assert_eq!(m[(0, 1)].conj(), mc[(0, 1)]);
    }
}
