//! Partial sufficient dimension reduction.
//!
//! Candidate matrices are built from sliced inverse regression on the
//! standardized covariates `z`. Without W the response is discretized at every
//! observed value (DEE); with W the W covariates are discretized at every
//! observed point and SIR runs inside each resulting cell (PDEE). The
//! structural dimension comes from a ridge-type eigenvalue ratio.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, symmetrize, Dataset, Standardization};
use crate::error::{Error, Result};

/// Minimum members per Y-slice inside a PDEE cell.
pub const H_MIN: usize = 5;
/// Maximum number of Y-slices inside a PDEE cell.
pub const H_MAX: usize = 5;
/// Cells smaller than this are skipped.
pub const MIN_CELL: usize = 4;

const THRESHOLD_CHUNK: usize = 32;

/// Symmetric PSD candidate matrix with its sorted spectrum (standardized scale).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMatrix {
    pub m: DMatrix<f64>,
    /// Descending, clamped at zero.
    pub eigenvalues: DVector<f64>,
    /// Columns aligned with `eigenvalues`; largest-magnitude entry positive.
    pub eigenvectors: DMatrix<f64>,
}

impl CandidateMatrix {
    pub fn from_matrix(mut m: DMatrix<f64>) -> Self {
        symmetrize(&mut m);
        let eig = SymmetricEigen::new(m.clone());
        let p = m.nrows();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k].max(0.0)));
        let mut eigenvectors = DMatrix::from_columns(
            &order
                .iter()
                .map(|&k| eig.eigenvectors.column(k).into_owned())
                .collect::<Vec<_>>(),
        );
        for mut col in eigenvectors.column_iter_mut() {
            let mut v = col.clone_owned();
            fix_sign(&mut v);
            col.copy_from(&v);
        }
        CandidateMatrix {
            m,
            eigenvalues,
            eigenvectors,
        }
    }
}

/// Flips `v` so that its largest-magnitude entry (first one on ties) is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// SIR candidate `sum_h p_h zbar_h zbar_h'` for slice labels `0..H`.
pub fn sir_candidate(z: &DMatrix<f64>, labels: &[usize]) -> Result<DMatrix<f64>> {
    let (n, p) = z.shape();
    if n == 0 || p == 0 {
        return Err(Error::InvalidData("empty input".into()));
    }
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} rows", labels.len())));
    }
    let h = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = DMatrix::<f64>::zeros(p, h);
    let mut counts = vec![0usize; h];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..p {
            sums[(j, l)] += z[(i, j)];
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptySlice(empty));
    }
    let mut m = DMatrix::zeros(p, p);
    for (l, &c) in counts.iter().enumerate() {
        let mean = sums.column(l) / c as f64;
        m.ger(c as f64 / n as f64, &mean, &mean, 1.0);
    }
    symmetrize(&mut m);
    Ok(m)
}

/// Row indices sorted by response, ties by index.
fn order_by(y: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    order
}

/// DEE candidate: the average of binary-slice SIR matrices over thresholds
/// `I(y <= y_i)`, i = 1..n.
pub fn dee_matrix(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<CandidateMatrix> {
    let (n, p) = z.shape();
    if y.len() != n {
        return Err(Error::Dimension("z and y row counts differ".into()));
    }
    if n < 3 {
        return Err(Error::InvalidData("need at least 3 rows".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::ConstantResponse);
    }
    let order = order_by(y);
    let total = DVector::from_iterator(p, z.column_iter().map(|c| c.sum()));
    let nf = n as f64;
    let mut m = DMatrix::zeros(p, p);
    let mut prefix = DVector::zeros(p);
    let mut k = 0;
    while k < n {
        // Extend over the tie group so that the class is {y <= y_i}.
        let start = k;
        while k < n && y[order[k]] == y[order[start]] {
            prefix += z.row(order[k]).transpose();
            k += 1;
        }
        if k == n {
            // Every row falls below the largest value: one class, zero matrix.
            break;
        }
        let mult = (k - start) as f64;
        let below = k as f64;
        let rest = &total - &prefix;
        m.ger(mult / (nf * below), &prefix, &prefix, 1.0);
        m.ger(mult / (nf * (nf - below)), &rest, &rest, 1.0);
    }
    m /= nf;
    Ok(CandidateMatrix::from_matrix(m))
}

/// Number of Y-slices used in a PDEE cell of the given size.
pub fn slice_count(cell_size: usize) -> Option<usize> {
    if cell_size >= 2 * H_MIN {
        Some(H_MAX.min(cell_size / H_MIN))
    } else if cell_size >= MIN_CELL {
        Some(2)
    } else {
        None
    }
}

/// Within-cell SIR for `members` given in increasing-y order. Tied responses
/// always share a slice.
fn cell_sir(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    members: &[usize],
    slices: usize,
) -> DMatrix<f64> {
    let p = z.ncols();
    let size = members.len();
    let mut cell_mean = DVector::zeros(p);
    for &i in members {
        cell_mean += z.row(i).transpose();
    }
    cell_mean /= size as f64;

    let mut sums = DMatrix::<f64>::zeros(p, slices);
    let mut counts = vec![0usize; slices];
    let mut first_of_tie = 0;
    for (r, &i) in members.iter().enumerate() {
        if r > 0 && y[i] != y[members[r - 1]] {
            first_of_tie = r;
        }
        let h = first_of_tie * slices / size;
        counts[h] += 1;
        for j in 0..p {
            sums[(j, h)] += z[(i, j)] - cell_mean[j];
        }
    }
    let mut m = DMatrix::zeros(p, p);
    for (h, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let dev = sums.column(h) / c as f64;
        m.ger(c as f64 / size as f64, &dev, &dev, 1.0);
    }
    m
}

/// Partial SIR matrix for the W-discretization at threshold `t`. Returns
/// `None` when every cell is undersized.
fn pdee_at(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    order: &[usize],
    t: usize,
) -> Option<DMatrix<f64>> {
    let p2 = w.ncols();
    let mut cells: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for &i in order {
        let code = (0..p2).fold(0u64, |acc, k| {
            (acc << 1) | u64::from(w[(i, k)] <= w[(t, k)])
        });
        cells.entry(code).or_default().push(i);
    }
    let p = z.ncols();
    let mut acc = DMatrix::zeros(p, p);
    let mut used = 0usize;
    for members in cells.values() {
        let Some(h) = slice_count(members.len()) else {
            continue;
        };
        acc += cell_sir(z, y, members, h) * members.len() as f64;
        used += members.len();
    }
    (used > 0).then(|| acc / used as f64)
}

/// PDEE candidate: average over thresholds `t = w_i` of the cell-frequency
/// weighted within-cell SIR matrices.
pub fn pdee_matrix(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
) -> Result<CandidateMatrix> {
    let (n, p) = z.shape();
    if y.len() != n || w.nrows() != n {
        return Err(Error::Dimension("z, y and w row counts differ".into()));
    }
    if w.ncols() == 0 {
        return Err(Error::InvalidData("PDEE needs at least one W column".into()));
    }
    if w.ncols() > 63 {
        return Err(Error::InvalidData("at most 63 W columns are supported".into()));
    }
    let order = order_by(y);
    let chunks: Vec<(DMatrix<f64>, usize)> = (0..n.div_ceil(THRESHOLD_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = DMatrix::zeros(p, p);
            let mut usable = 0;
            for t in (c * THRESHOLD_CHUNK)..((c + 1) * THRESHOLD_CHUNK).min(n) {
                if let Some(m) = pdee_at(z, y, w, &order, t) {
                    acc += m;
                    usable += 1;
                }
            }
            (acc, usable)
        })
        .collect();
    let mut m = DMatrix::zeros(p, p);
    let mut usable = 0;
    for (c, u) in chunks {
        m += c;
        usable += u;
    }
    if usable == 0 {
        return Err(Error::NoUsableCells);
    }
    m /= n as f64;
    Ok(CandidateMatrix::from_matrix(m))
}

/// Ridge ratios `(l_{j+1}^2 + c) / (l_j^2 + c)` for j = 1..p-1.
pub fn ridge_ratios(eigenvalues: &[f64], ridge: f64) -> Vec<f64> {
    eigenvalues
        .windows(2)
        .map(|w| (w[1] * w[1] + ridge) / (w[0] * w[0] + ridge))
        .collect()
}

/// Ridge-type eigenvalue ratio estimate of the structural dimension.
///
/// Minimizes the ridge ratio over j in 1..p-1 (ties to the smallest j);
/// a single eigenvalue gives 1.
pub fn rere(eigenvalues: &[f64], ridge: f64) -> usize {
    let ratios = ridge_ratios(eigenvalues, ridge);
    let mut best = 0;
    for (j, r) in ratios.iter().enumerate() {
        if *r < ratios[best] {
            best = j;
        }
    }
    best + 1
}

/// Default ridge `log(n) / n`.
pub fn default_ridge(n: usize) -> f64 {
    (n as f64).ln() / n as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SdrConfig {
    /// Overrides the default ridge `log(n)/n`.
    pub ridge: Option<f64>,
}

/// Estimated basis of the partial central subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEstimate {
    pub q_hat: usize,
    /// p1×q_hat, original X scale, unit-length columns.
    pub b: DMatrix<f64>,
    pub b_first: DVector<f64>,
    pub eigenvalues: DVector<f64>,
    pub ratios: Vec<f64>,
    pub ridge: f64,
    pub candidate: CandidateMatrix,
    pub standardization: Standardization,
}

/// Standardizes X, builds the DEE (no W) or PDEE candidate matrix, picks
/// q_hat by RERE and back-transforms the leading eigenvectors.
pub fn estimate_basis(ds: &Dataset, cfg: &SdrConfig) -> Result<BasisEstimate> {
    let (z, std) = standardize(ds.x())?;
    let candidate = if ds.p2() == 0 {
        dee_matrix(&z, ds.y())?
    } else {
        pdee_matrix(&z, ds.y(), ds.w())?
    };
    let ridge = cfg.ridge.unwrap_or_else(|| default_ridge(ds.n()));
    if !(ridge > 0.0) {
        return Err(Error::Config(format!("ridge must be positive, got {ridge}")));
    }
    let lambda = candidate.eigenvalues.as_slice();
    let q_hat = rere(lambda, ridge);
    let ratios = ridge_ratios(lambda, ridge);
    let cols: Vec<DVector<f64>> = (0..q_hat)
        .map(|k| {
            let mut v = std.to_original(&candidate.eigenvectors.column(k).into_owned());
            v /= v.norm();
            fix_sign(&mut v);
            v
        })
        .collect();
    let b = DMatrix::from_columns(&cols);
    Ok(BasisEstimate {
        q_hat,
        b_first: cols[0].clone(),
        b,
        eigenvalues: candidate.eigenvalues.clone(),
        ratios,
        ridge,
        candidate,
        standardization: std,
    })
}
