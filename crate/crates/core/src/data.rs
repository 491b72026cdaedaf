//! Tabular input, validation and covariate standardization.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a covariance is treated as singular.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Column labels of a [`Dataset`], grouped by role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub y: String,
    pub x: Vec<String>,
    pub w: Vec<String>,
}

/// Response `y`, index covariates `x` (n×p1) and nonparametric covariates `w` (n×p2).
///
/// `p2 == 0` means W is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    names: ColumnNames,
}

impl Dataset {
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        w: DMatrix<f64>,
        names: ColumnNames,
    ) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || w.nrows() != n {
            return Err(Error::Dimension(format!(
                "y has {n} rows, x has {}, w has {}",
                x.nrows(),
                w.nrows()
            )));
        }
        if n < 3 {
            return Err(Error::InvalidData(format!("need at least 3 rows, got {n}")));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidData("x must have at least one column".into()));
        }
        if names.x.len() != x.ncols() || names.w.len() != w.ncols() {
            return Err(Error::Dimension("column names do not match matrix widths".into()));
        }
        let finite = y.iter().chain(x.iter()).chain(w.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("dataset entries must be finite".into()));
        }
        Ok(Dataset { y, x, w, names })
    }

    /// Builds a dataset with generated column names (`x1..`, `w1..`).
    pub fn from_parts(y: DVector<f64>, x: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let names = ColumnNames {
            y: "y".into(),
            x: (1..=x.ncols()).map(|j| format!("x{j}")).collect(),
            w: (1..=w.ncols()).map(|j| format!("w{j}")).collect(),
        };
        Dataset::new(y, x, w, names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p1(&self) -> usize {
        self.x.ncols()
    }

    pub fn p2(&self) -> usize {
        self.w.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn names(&self) -> &ColumnNames {
        &self.names
    }

    /// Returns the column with the given label, whatever its role.
    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        if self.names.y == name {
            return Some(self.y.clone());
        }
        if let Some(j) = self.names.x.iter().position(|c| c == name) {
            return Some(self.x.column(j).into_owned());
        }
        self.names
            .w
            .iter()
            .position(|c| c == name)
            .map(|j| self.w.column(j).into_owned())
    }

    /// Reorders rows; `perm[k]` is the source row of output row `k`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Dataset> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::Dimension("permutation length differs from n".into()));
        }
        let y = DVector::from_fn(n, |k, _| self.y[perm[k]]);
        let x = DMatrix::from_fn(n, self.p1(), |k, j| self.x[(perm[k], j)]);
        let w = DMatrix::from_fn(n, self.p2(), |k, j| self.w[(perm[k], j)]);
        Dataset::new(y, x, w, self.names.clone())
    }
}

/// Column roles used when reading a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub y: String,
    pub x: Vec<String>,
    #[serde(default)]
    pub w: Vec<String>,
}

/// Result of [`load_csv`]: the dataset plus how many rows were discarded.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

/// Reads a header-bearing CSV file and extracts the schema columns.
///
/// Rows with a missing or non-numeric cell in any schema column are dropped
/// and counted; rows keep their file order.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Same as [`load_csv`] for any reader.
pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim_matches('"').to_string())
        .collect();
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let y_col = index_of(&schema.y)?;
    let x_cols = schema.x.iter().map(|c| index_of(c)).collect::<Result<Vec<_>>>()?;
    let w_cols = schema.w.iter().map(|c| index_of(c)).collect::<Result<Vec<_>>>()?;
    if x_cols.is_empty() {
        return Err(Error::Config("schema needs at least one x column".into()));
    }

    let parse = |rec: &csv::StringRecord, idx: usize| -> Option<f64> {
        rec.get(idx)
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite())
    };

    let (mut ys, mut xs, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    let mut dropped = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let y = parse(&rec, y_col);
        let xr: Option<Vec<f64>> = x_cols.iter().map(|&c| parse(&rec, c)).collect();
        let wr: Option<Vec<f64>> = w_cols.iter().map(|&c| parse(&rec, c)).collect();
        match (y, xr, wr) {
            (Some(y), Some(xr), Some(wr)) => {
                ys.push(y);
                xs.extend(xr);
                ws.extend(wr);
            }
            _ => dropped += 1,
        }
    }
    let n = ys.len();
    if n == 0 {
        return Err(Error::InvalidData("no usable rows".into()));
    }
    if dropped > 0 {
        log::warn!("{dropped} row(s) dropped for missing or non-numeric cells");
    }
    let dataset = Dataset::new(
        DVector::from_vec(ys),
        DMatrix::from_row_slice(n, x_cols.len(), &xs),
        DMatrix::from_row_slice(n, w_cols.len(), &ws),
        ColumnNames {
            y: schema.y.clone(),
            x: schema.x.clone(),
            w: schema.w.clone(),
        },
    )?;
    Ok(LoadReport {
        dataset,
        dropped_rows: dropped,
    })
}

/// Writes `ds` as CSV with its column names as the header.
pub fn write_csv<W: std::io::Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(writer);
    let names = ds.names();
    let header = std::iter::once(&names.y).chain(&names.x).chain(&names.w);
    wr.write_record(header)?;
    for i in 0..ds.n() {
        let mut row = vec![ds.y()[i].to_string()];
        row.extend(ds.x().row(i).iter().map(|v| v.to_string()));
        row.extend(ds.w().row(i).iter().map(|v| v.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Centering and whitening transform `z = (x - center) * whitener`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub center: DVector<f64>,
    /// Inverse symmetric square root of the sample covariance.
    pub whitener: DMatrix<f64>,
    pub scale_only: bool,
}

impl Standardization {
    /// Maps a direction in standardized scale back to the original X scale.
    pub fn to_original(&self, eta: &DVector<f64>) -> DVector<f64> {
        &self.whitener * eta
    }
}

fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

fn centered(x: &DMatrix<f64>, center: &DVector<f64>) -> DMatrix<f64> {
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-center[j]);
    }
    xc
}

/// Sample covariance with divisor n.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let xc = centered(x, &column_means(x));
    let mut s = xc.tr_mul(&xc) / x.nrows() as f64;
    symmetrize(&mut s);
    s
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Centers `x` and whitens it with the inverse symmetric square root of its
/// sample covariance (divisor n).
pub fn standardize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    if x.nrows() < 2 || x.ncols() == 0 {
        return Err(Error::InvalidData("need at least two rows and one column".into()));
    }
    let center = column_means(x);
    let xc = centered(x, &center);
    let mut cov = xc.tr_mul(&xc) / x.nrows() as f64;
    symmetrize(&mut cov);
    let eig = SymmetricEigen::new(cov);
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    if !(largest > 0.0) || smallest <= EIGEN_FLOOR * largest {
        return Err(Error::SingularCovariance {
            eigenvalue: smallest,
            largest,
        });
    }
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let v = &eig.eigenvectors;
    let mut whitener = v * DMatrix::from_diagonal(&inv_sqrt) * v.transpose();
    symmetrize(&mut whitener);
    let z = &xc * &whitener;
    Ok((
        z,
        Standardization {
            center,
            whitener,
            scale_only: false,
        },
    ))
}

/// Per-column standardization to mean 0 and variance 1 (divisor n).
pub fn standardize_columns(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if !(sd > 0.0) {
            return Err(Error::InvalidData(format!("column {j} is constant")));
        }
        col /= sd;
    }
    Ok(out)
}

/// The Boston housing variables, in the order of the classic file.
pub const BOSTON_COLUMNS: [&str; 14] = [
    "CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS", "RAD", "TAX", "PTRATIO", "B",
    "LSTAT", "MEDV",
];

/// Schema that reads all 14 Boston variables (MEDV as y, the rest as x).
pub fn boston_raw_schema() -> Schema {
    Schema {
        y: "MEDV".into(),
        x: BOSTON_COLUMNS[..13].iter().map(|s| s.to_string()).collect(),
        w: Vec::new(),
    }
}

/// Builds the Boston analysis dataset: y = ln(MEDV), W = CRIM, X = the other
/// eleven predictors (CHAS dropped), all predictors standardized per column.
pub fn prepare_boston(raw: &Dataset) -> Result<Dataset> {
    let get = |name: &str| {
        raw.column(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let medv = get("MEDV")?;
    if let Some(bad) = medv.iter().find(|&&v| v <= 0.0) {
        return Err(Error::InvalidData(format!(
            "MEDV must be positive to take logs, found {bad}"
        )));
    }
    let y = medv.map(f64::ln);
    let x_names: Vec<String> = BOSTON_COLUMNS
        .iter()
        .filter(|c| !matches!(**c, "MEDV" | "CRIM" | "CHAS"))
        .map(|c| c.to_string())
        .collect();
    // CHAS must exist even though it is discarded.
    get("CHAS")?;
    let x_cols = x_names.iter().map(|c| get(c)).collect::<Result<Vec<_>>>()?;
    let x = DMatrix::from_columns(&x_cols);
    let w = DMatrix::from_columns(&[get("CRIM")?]);
    Dataset::new(
        y,
        standardize_columns(&x)?,
        standardize_columns(&w)?,
        ColumnNames {
            y: "log(MEDV)".into(),
            x: x_names,
            w: vec!["CRIM".into()],
        },
    )
}
