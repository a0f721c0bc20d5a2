//! JSON system files: dense matrices as nested rows, complex entries as
//! `[re, im]` pairs.

use std::path::Path;

use phsoc::linalg::{CVector, Mat, C64};
use phsoc::pencil::AnalysisOptions;
use phsoc::{CostPerturbation, Field, PHSystem};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A matrix or vector entry: a plain number or an `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> C64 {
        match self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }

    fn encode(z: C64, field: Field) -> Self {
        match field {
            Field::Real => Entry::Real(z.re),
            Field::Complex => Entry::Complex([z.re, z.im]),
        }
    }
}

pub type Rows = Vec<Vec<Entry>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bvp {
    pub x0: Vec<Entry>,
    pub x1: Vec<Entry>,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_hint: Option<Entry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub field: Field,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "J")]
    pub j: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bvp: Option<Bvp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Options>,
}

pub fn encode_matrix(m: &Mat, field: Field) -> Rows {
    m.row_iter()
        .map(|row| row.iter().map(|&z| Entry::encode(z, field)).collect())
        .collect()
}

pub fn encode_vector(v: &CVector, field: Field) -> Vec<Entry> {
    v.iter().map(|&z| Entry::encode(z, field)).collect()
}

fn decode_matrix(name: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<Mat, CliError> {
    if rows.len() != nrows {
        return Err(CliError::input(format!(
            "{name}: expected {nrows} rows, got {}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(CliError::input(format!(
                "{name}: row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j].value()))
}

fn decode_vector(name: &str, v: &[Entry], len: usize) -> Result<CVector, CliError> {
    if v.len() != len {
        return Err(CliError::input(format!(
            "{name}: expected {len} entries, got {}",
            v.len()
        )));
    }
    Ok(CVector::from_iterator(len, v.iter().map(|e| e.value())))
}

fn check_real(name: &str, m: &Mat) -> Result<(), CliError> {
    if m.iter().any(|z| z.im != 0.0) {
        return Err(CliError::input(format!(
            "{name}: complex entry in a real system"
        )));
    }
    Ok(())
}

/// Decoded boundary data.
pub struct BoundaryData {
    pub x0: CVector,
    pub x1: CVector,
    pub t0: f64,
    pub t1: f64,
}

impl SystemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Errors carry the JSON path of the offending field and the line/column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." || path == "?" {
                CliError::input(e.inner().to_string())
            } else {
                CliError::input(format!("at `{path}`: {}", e.inner()))
            }
        })
    }

    pub fn from_system(sys: &PHSystem) -> Self {
        let field = sys.field();
        SystemFile {
            field,
            n: sys.n(),
            m: sys.m(),
            j: encode_matrix(sys.j(), field),
            r: encode_matrix(sys.r(), field),
            q: encode_matrix(sys.q(), field),
            b: encode_matrix(sys.b(), field),
            s: None,
            bvp: None,
            options: None,
        }
    }

    pub fn system(&self) -> Result<PHSystem, CliError> {
        let (n, m) = (self.n, self.m);
        let j = decode_matrix("J", &self.j, n, n)?;
        let r = decode_matrix("R", &self.r, n, n)?;
        let q = decode_matrix("Q", &self.q, n, n)?;
        let b = decode_matrix("B", &self.b, n, m)?;
        if self.field == Field::Real {
            for (name, x) in [("J", &j), ("R", &r), ("Q", &q), ("B", &b)] {
                check_real(name, x)?;
            }
        }
        Ok(PHSystem::validate(j, r, q, b)?)
    }

    pub fn cost(&self) -> Result<CostPerturbation, CliError> {
        match &self.s {
            None => Ok(CostPerturbation::zero(self.m)),
            Some(rows) => {
                let s = decode_matrix("S", rows, self.m, self.m)?;
                if self.field == Field::Real {
                    check_real("S", &s)?;
                }
                Ok(CostPerturbation::new(s)?)
            }
        }
    }

    pub fn boundary(&self) -> Result<BoundaryData, CliError> {
        let bvp = self
            .bvp
            .as_ref()
            .ok_or_else(|| CliError::input("no `bvp` block in the system file"))?;
        Ok(BoundaryData {
            x0: decode_vector("bvp.x0", &bvp.x0, self.n)?,
            x1: decode_vector("bvp.x1", &bvp.x1, self.n)?,
            t0: bvp.t0,
            t1: bvp.t1,
        })
    }

    pub fn options(&self) -> Options {
        self.options.clone().unwrap_or_default()
    }

    /// Analysis options with flags taking precedence over the file.
    pub fn analysis_options(&self, tol: Option<f64>, omega_grid: Option<usize>) -> AnalysisOptions {
        let opts = self.options();
        let mut out = AnalysisOptions::default();
        if let Some(t) = tol.or(opts.tol_rel) {
            out.tol_rel = t;
        }
        out.omega_grid_size = omega_grid.or(opts.omega_grid_size);
        out
    }
}
