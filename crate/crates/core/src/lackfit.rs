//! Residual-marked empirical-process statistic and its multiplier Monte Carlo
//! calibration.
//!
//! With `P_i` the projected covariates `(B'x_i, w_i)` and `I[i][j] = 1{P_i <= P_j}`
//! (componentwise, inclusive):
//!
//! * `V_j = n^{-1/2} sum_i e_i I[i][j]` and `T_n = n^{-1} sum_j V_j^2`;
//! * `A[i][j] = e_i I1[i][j] - G_j' v_i`, where `I1` uses only the leading
//!   direction and `G_j = n^{-1} sum_i m_i I1[i][j]`;
//! * each replicate draws `U ~ N(0, I_n)` and evaluates
//!   `n^{-1} sum_j (n^{-1/2} sum_i A[i][j] U_i)^2`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnNames, Dataset};
use crate::error::{Error, Result};
use crate::model::{default_init, influence_vectors, nls_fit, FitResult, ModelFamily};
use crate::rng::stream;
use crate::sdr::{estimate_basis, BasisEstimate, SdrConfig};

/// Replicates per GEMM batch. Fixed so results do not depend on thread count.
const REPLICATE_BATCH: usize = 64;
/// Above this sample size the influence matrix is streamed in column blocks.
pub const DENSE_LIMIT: usize = 20_000;
const COLUMN_BLOCK: usize = 2048;

/// Dense n×n boolean matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    n: usize,
    cells: Vec<bool>,
}

impl IndicatorMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.n + j]
    }
}

/// Sample points projected on the estimated directions, concatenated with W.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSample {
    n: usize,
    /// Row-major n×(q+p2): projections on all q_hat directions, then w.
    full: Vec<f64>,
    full_dim: usize,
    /// Row-major n×(1+p2): projection on the leading direction, then w.
    first: Vec<f64>,
    first_dim: usize,
    s: DMatrix<f64>,
}

#[inline]
fn dominated(points: &[f64], dim: usize, i: usize, j: usize) -> bool {
    let a = &points[i * dim..(i + 1) * dim];
    let b = &points[j * dim..(j + 1) * dim];
    a.iter().zip(b).all(|(u, v)| u <= v)
}

impl ProjectedSample {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Projections `B'x_i` (n×q_hat).
    pub fn projections(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// `1{(B'x_i, w_i) <= (B'x_j, w_j)}`.
    #[inline]
    pub fn full_le(&self, i: usize, j: usize) -> bool {
        dominated(&self.full, self.full_dim, i, j)
    }

    /// Same as [`full_le`](Self::full_le) using only the leading direction.
    #[inline]
    pub fn first_le(&self, i: usize, j: usize) -> bool {
        dominated(&self.first, self.first_dim, i, j)
    }

    pub fn ind_full(&self) -> IndicatorMatrix {
        self.materialize(|i, j| self.full_le(i, j))
    }

    pub fn ind_first(&self) -> IndicatorMatrix {
        self.materialize(|i, j| self.first_le(i, j))
    }

    fn materialize(&self, f: impl Fn(usize, usize) -> bool) -> IndicatorMatrix {
        let n = self.n;
        let cells = (0..n * n).map(|k| f(k / n, k % n)).collect();
        IndicatorMatrix { n, cells }
    }
}

/// Projects the covariates on the basis and appends W.
pub fn build_projected(ds: &Dataset, basis: &BasisEstimate) -> Result<ProjectedSample> {
    if basis.b.nrows() != ds.p1() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, data has p1={}",
            basis.b.nrows(),
            ds.p1()
        )));
    }
    Ok(project(&(ds.x() * &basis.b), ds.w()))
}

/// Builds a projected sample from explicit projections `s` (n×q) and `w`.
pub fn project(s: &DMatrix<f64>, w: &DMatrix<f64>) -> ProjectedSample {
    let (n, q) = s.shape();
    let p2 = w.ncols();
    let mut full = Vec::with_capacity(n * (q + p2));
    let mut first = Vec::with_capacity(n * (1 + p2));
    for i in 0..n {
        full.extend(s.row(i).iter());
        full.extend(w.row(i).iter());
        first.push(s[(i, 0)]);
        first.extend(w.row(i).iter());
    }
    ProjectedSample {
        n,
        full,
        full_dim: q + p2,
        first,
        first_dim: 1 + p2,
        s: s.clone(),
    }
}

/// Cramér-von Mises type statistic of the residual-marked process evaluated
/// at the projected sample points.
pub fn tn_statistic(residuals: &DVector<f64>, proj: &ProjectedSample) -> Result<f64> {
    let n = proj.n();
    if residuals.len() != n {
        return Err(Error::Dimension("residual and sample lengths differ".into()));
    }
    let nf = n as f64;
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut v = 0.0;
            for i in 0..n {
                if proj.full_le(i, j) {
                    v += residuals[i];
                }
            }
            v * v / nf
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total / nf)
}

/// Columns `cols` of the influence-corrected matrix `A`.
pub fn rho_block(
    fit: &FitResult,
    v_hat: &DMatrix<f64>,
    proj: &ProjectedSample,
    cols: Range<usize>,
) -> Result<DMatrix<f64>> {
    let n = proj.n();
    let k = fit.score.ncols();
    if fit.residuals.len() != n || v_hat.nrows() != n || v_hat.ncols() != k || cols.end > n {
        return Err(Error::Dimension("fit, influence rows and sample disagree".into()));
    }
    let width = cols.len();
    // G_j for the requested evaluation points (k × width).
    let mut g = DMatrix::zeros(k, width);
    for (c, j) in cols.clone().enumerate() {
        for i in 0..n {
            if proj.first_le(i, j) {
                for l in 0..k {
                    g[(l, c)] += fit.score[(i, l)];
                }
            }
        }
    }
    g /= n as f64;
    let mut a = -(v_hat * &g);
    for (c, j) in cols.enumerate() {
        let mut col = a.column_mut(c);
        for i in 0..n {
            if proj.first_le(i, j) {
                col[i] += fit.residuals[i];
            }
        }
    }
    Ok(a)
}

/// The full n×n matrix `A[i][j] = e_i I1[i][j] - G_j' v_i`.
pub fn rho_matrix(fit: &FitResult, v_hat: &DMatrix<f64>, proj: &ProjectedSample) -> Result<DMatrix<f64>> {
    rho_block(fit, v_hat, proj, 0..proj.n())
}

/// One Monte Carlo value for multipliers `u`.
pub fn mc_replicate(a: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let n = a.nrows() as f64;
    let delta = a.tr_mul(u);
    delta.norm_squared() / (n * n)
}

/// Standard-normal multipliers for replicate `index`.
pub fn multipliers(seed: u64, index: u64, n: usize) -> DVector<f64> {
    let mut rng = stream(seed, index);
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn multiplier_batch(seed: u64, range: Range<usize>, n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, range.len());
    for (c, r) in range.enumerate() {
        let mut rng = stream(seed, r as u64);
        for i in 0..n {
            u[(i, c)] = rng.sample(StandardNormal);
        }
    }
    u
}

fn batches(m: usize) -> Vec<Range<usize>> {
    (0..m.div_ceil(REPLICATE_BATCH))
        .map(|b| b * REPLICATE_BATCH..((b + 1) * REPLICATE_BATCH).min(m))
        .collect()
}

/// Replicate values `T~(U_1..U_m)` for a precomputed `A`.
pub fn mc_replicates(a: &DMatrix<f64>, m: usize, seed: u64) -> Vec<f64> {
    let n = a.nrows();
    let nn = (n * n) as f64;
    batches(m)
        .into_par_iter()
        .map(|range| {
            let u = multiplier_batch(seed, range, n);
            let delta = a.tr_mul(&u);
            delta.column_iter().map(|c| c.norm_squared() / nn).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Same replicates as [`mc_replicates`] without holding `A` in memory: `A` is
/// rebuilt in column blocks and multipliers are regenerated from their
/// streams for each block.
pub fn mc_replicates_blocked(
    fit: &FitResult,
    v_hat: &DMatrix<f64>,
    proj: &ProjectedSample,
    m: usize,
    seed: u64,
    block: usize,
) -> Result<Vec<f64>> {
    let n = proj.n();
    let nn = (n * n) as f64;
    let block = block.max(1);
    let mut acc = vec![0.0; m];
    for start in (0..n).step_by(block) {
        let a = rho_block(fit, v_hat, proj, start..(start + block).min(n))?;
        let parts: Vec<Vec<f64>> = batches(m)
            .into_par_iter()
            .map(|range| {
                let u = multiplier_batch(seed, range, n);
                let delta = a.tr_mul(&u);
                delta.column_iter().map(|c| c.norm_squared()).collect()
            })
            .collect();
        for (slot, v) in acc.iter_mut().zip(parts.concat()) {
            *slot += v;
        }
    }
    Ok(acc.into_iter().map(|s| s / nn).collect())
}

/// `p = m^{-1} #{j : T~_j >= t_n}`.
pub fn pvalue_from_replicates(t_n: f64, replicates: &[f64]) -> f64 {
    if replicates.is_empty() {
        return f64::NAN;
    }
    let hits = replicates.iter().filter(|&&t| t >= t_n).count();
    hits as f64 / replicates.len() as f64
}

/// Summary of the Monte Carlo replicate values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub m: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl McSummary {
    pub fn of(values: &[f64]) -> McSummary {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        let median = if m == 0 {
            f64::NAN
        } else if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        };
        McSummary {
            m,
            min: v.first().copied().unwrap_or(f64::NAN),
            median,
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Monte Carlo p-value with `m` replicates drawn from the streams of `seed`.
pub fn mc_pvalue(t_n: f64, a: &DMatrix<f64>, m: usize, seed: u64) -> Result<(f64, McSummary, Vec<f64>)> {
    if m == 0 {
        return Err(Error::Config("need at least one Monte Carlo replicate".into()));
    }
    let reps = mc_replicates(a, m, seed);
    Ok((pvalue_from_replicates(t_n, &reps), McSummary::of(&reps), reps))
}

/// Settings for [`run_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub mc_reps: usize,
    /// Overrides the default ridge `log(n)/n`.
    pub ridge: Option<f64>,
    pub seed: u64,
    pub alpha: f64,
    /// Starting point for the fit; defaults to OLS for beta and zeros for theta.
    #[serde(skip)]
    pub init: Option<DVector<f64>>,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            mc_reps: 2000,
            ridge: None,
            seed: 0,
            alpha: 0.05,
            init: None,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_reps == 0 {
            return Err(Error::Config("mc_reps must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(r) = self.ridge {
            if !(r > 0.0) {
                return Err(Error::Config(format!("ridge must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one lack-of-fit test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub family: String,
    pub columns: ColumnNames,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub t_n: f64,
    pub p_hat: f64,
    pub q_hat: usize,
    pub b: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub ratios: Vec<f64>,
    pub ridge: f64,
    pub mc: McSummary,
    pub replicates: Vec<f64>,
    pub fit: FitResult,
    pub seed: u64,
    pub alpha: f64,
    pub reject: bool,
    pub warnings: Vec<String>,
}

/// Full pipeline: basis estimate, NLS fit, `T_n`, influence-corrected
/// multiplier replicates and the Monte Carlo p-value.
pub fn run_test(ds: &Dataset, family: &ModelFamily, cfg: &TestConfig) -> Result<TestReport> {
    cfg.validate()?;
    let basis = estimate_basis(ds, &SdrConfig { ridge: cfg.ridge })?;
    let init = match &cfg.init {
        Some(init) => init.clone(),
        None => default_init(ds, family)?,
    };
    let fit = nls_fit(ds, family, &init)?;
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!("fit did not converge in {} iterations", fit.iterations));
    }
    let proj = build_projected(ds, &basis)?;
    let t_n = tn_statistic(&fit.residuals, &proj)?;
    let v_hat = influence_vectors(&fit)?;
    let replicates = if ds.n() <= DENSE_LIMIT {
        let a = rho_matrix(&fit, &v_hat, &proj)?;
        mc_replicates(&a, cfg.mc_reps, cfg.seed)
    } else {
        mc_replicates_blocked(&fit, &v_hat, &proj, cfg.mc_reps, cfg.seed, COLUMN_BLOCK)?
    };
    let p_hat = pvalue_from_replicates(t_n, &replicates);
    Ok(TestReport {
        family: family.name().to_string(),
        columns: ds.names().clone(),
        n: ds.n(),
        p1: ds.p1(),
        p2: ds.p2(),
        t_n,
        p_hat,
        q_hat: basis.q_hat,
        b: basis.b,
        eigenvalues: basis.eigenvalues,
        ratios: basis.ratios,
        ridge: basis.ridge,
        mc: McSummary::of(&replicates),
        replicates,
        fit,
        seed: cfg.seed,
        alpha: cfg.alpha,
        reject: p_hat <= cfg.alpha,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelFamily;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))
    }

    fn fit_with(residuals: DVector<f64>, score: DMatrix<f64>) -> FitResult {
        FitResult {
            beta: DVector::zeros(score.ncols()),
            theta: DVector::zeros(0),
            sse: residuals.norm_squared(),
            residuals,
            score,
            converged: true,
            iterations: 1,
        }
    }

    /// Triple-loop evaluation of A straight from its definition.
    fn rho_brute(fit: &FitResult, v: &DMatrix<f64>, s1: &[Vec<f64>]) -> DMatrix<f64> {
        let n = s1.len();
        let k = fit.score.ncols();
        let le = |i: usize, j: usize| s1[i].iter().zip(&s1[j]).all(|(a, b)| a <= b);
        DMatrix::from_fn(n, n, |i, j| {
            let mut gv = 0.0;
            for l in 0..k {
                let mut g = 0.0;
                for r in 0..n {
                    if le(r, j) {
                        g += fit.score[(r, l)];
                    }
                }
                gv += g / n as f64 * v[(i, l)];
            }
            let ind = if le(i, j) { 1.0 } else { 0.0 };
            fit.residuals[i] * ind - gv
        })
    }

    #[test]
    fn two_point_ordering() {
        let p = project(&DMatrix::from_column_slice(2, 1, &[1.0, 2.0]), &DMatrix::zeros(2, 0));
        let ind = p.ind_full();
        assert!(ind.get(0, 0) && ind.get(0, 1) && !ind.get(1, 0) && ind.get(1, 1));
    }

    #[test]
    fn ties_dominate_mutually() {
        let p = project(&DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 2.0]), &DMatrix::zeros(3, 0));
        let ind = p.ind_full();
        assert!(ind.get(0, 1) && ind.get(1, 0));
    }

    #[test]
    fn indicators_match_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = uniform_matrix(&mut rng, 10, 2);
        let w = uniform_matrix(&mut rng, 10, 1);
        let p = project(&s, &w);
        let (full, first) = (p.ind_full(), p.ind_first());
        for i in 0..10 {
            assert!(full.get(i, i) && first.get(i, i));
            for j in 0..10 {
                let mut le = true;
                for c in 0..2 {
                    le &= s[(i, c)] <= s[(j, c)];
                }
                le &= w[(i, 0)] <= w[(j, 0)];
                assert_eq!(full.get(i, j), le);
                let le1 = s[(i, 0)] <= s[(j, 0)] && w[(i, 0)] <= w[(j, 0)];
                assert_eq!(first.get(i, j), le1);
                if full.get(i, j) {
                    assert!(first.get(i, j));
                }
            }
        }
    }

    #[test]
    fn statistic_edge_cases() {
        let p = project(&DMatrix::from_column_slice(2, 1, &[0.3, 0.9]), &DMatrix::zeros(2, 0));
        assert_eq!(tn_statistic(&DVector::zeros(2), &p).unwrap(), 0.0);
        let t = tn_statistic(&DVector::from_vec(vec![1.0, -1.0]), &p).unwrap();
        assert!((t - 0.25).abs() < 1e-15);
        let single = project(&DMatrix::from_element(1, 1, 2.0), &DMatrix::zeros(1, 0));
        assert!((tn_statistic(&DVector::from_element(1, -1.5), &single).unwrap() - 2.25).abs() < 1e-15);
        assert!(tn_statistic(&DVector::zeros(3), &p).is_err());
    }

    #[test]
    fn statistic_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = uniform_matrix(&mut rng, 15, 2);
        let w = uniform_matrix(&mut rng, 15, 1);
        let e = DVector::from_fn(15, |_, _| rng.random_range(-1.0..1.0));
        let p = project(&s, &w);
        let mut want = 0.0;
        for j in 0..15 {
            let mut v = 0.0;
            for i in 0..15 {
                if s[(i, 0)] <= s[(j, 0)] && s[(i, 1)] <= s[(j, 1)] && w[(i, 0)] <= w[(j, 0)] {
                    v += e[i];
                }
            }
            want += (v / 15f64.sqrt()).powi(2);
        }
        want /= 15.0;
        assert!((tn_statistic(&e, &p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn rho_zero_with_zero_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = project(&uniform_matrix(&mut rng, 6, 1), &DMatrix::zeros(6, 0));
        let fit = fit_with(DVector::zeros(6), uniform_matrix(&mut rng, 6, 2));
        let v = influence_vectors(&fit).unwrap();
        assert_eq!(rho_matrix(&fit, &v, &p).unwrap().amax(), 0.0);
    }

    #[test]
    fn rho_at_maximal_point_uses_full_score_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = uniform_matrix(&mut rng, 8, 1);
        s[(5, 0)] = 10.0;
        let p = project(&s, &DMatrix::zeros(8, 0));
        let e = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let fit = fit_with(e.clone(), uniform_matrix(&mut rng, 8, 2));
        let v = influence_vectors(&fit).unwrap();
        let a = rho_matrix(&fit, &v, &p).unwrap();
        let gbar = DVector::from_iterator(2, fit.score.column_iter().map(|c| c.mean()));
        for i in 0..8 {
            let want = e[i] - gbar.dot(&v.row(i).transpose());
            assert!((a[(i, 5)] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = uniform_matrix(&mut rng, 8, 2);
        let w = uniform_matrix(&mut rng, 8, 1);
        let p = project(&s, &w);
        let fit = fit_with(
            DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0)),
            uniform_matrix(&mut rng, 8, 3),
        );
        let v = influence_vectors(&fit).unwrap();
        let s1: Vec<Vec<f64>> = (0..8).map(|i| vec![s[(i, 0)], w[(i, 0)]]).collect();
        let a = rho_matrix(&fit, &v, &p).unwrap();
        assert!((a - rho_brute(&fit, &v, &s1)).amax() < 1e-12);
    }

    #[test]
    fn replicate_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = uniform_matrix(&mut rng, 5, 5);
        assert_eq!(mc_replicate(&a, &DVector::zeros(5)), 0.0);
        let u = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let id = mc_replicate(&DMatrix::identity(5, 5), &u);
        assert!((id - u.norm_squared() / 25.0).abs() < 1e-15);
    }

    #[test]
    fn replicate_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = uniform_matrix(&mut rng, 8, 8);
        let u = DVector::from_fn(8, |_, _| rng.random_range(-2.0..2.0));
        let mut want = 0.0;
        for j in 0..8 {
            let mut d = 0.0;
            for i in 0..8 {
                d += a[(i, j)] * u[i];
            }
            want += (d / 8f64.sqrt()).powi(2) / 8.0;
        }
        assert!((mc_replicate(&a, &u) - want).abs() < 1e-12);
    }

    #[test]
    fn pvalue_counting() {
        assert!((pvalue_from_replicates(2.5, &[1.0, 2.0, 3.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pvalue_from_replicates(2.0, &[1.0, 2.0, 3.0]), 2.0 / 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = uniform_matrix(&mut rng, 6, 6);
        let (p, summary, reps) = mc_pvalue(0.0, &a, 25, 1).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(summary.m, 25);
        assert_eq!(reps.len(), 25);
        assert!(mc_pvalue(0.0, &a, 0, 1).is_err());
    }

    #[test]
    fn batched_replicates_agree_with_single_replicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = uniform_matrix(&mut rng, 12, 12);
        let reps = mc_replicates(&a, 130, 44);
        for (j, r) in reps.iter().enumerate() {
            let single = mc_replicate(&a, &multipliers(44, j as u64, 12));
            assert!((r - single).abs() < 1e-12);
        }
    }

    #[test]
    fn blocked_replicates_agree_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = uniform_matrix(&mut rng, 30, 1);
        let p = project(&s, &uniform_matrix(&mut rng, 30, 1));
        let fit = fit_with(
            DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0)),
            uniform_matrix(&mut rng, 30, 2),
        );
        let v = influence_vectors(&fit).unwrap();
        let dense = mc_replicates(&rho_matrix(&fit, &v, &p).unwrap(), 70, 3);
        let blocked = mc_replicates_blocked(&fit, &v, &p, 70, 3, 7).unwrap();
        for (a, b) in dense.iter().zip(&blocked) {
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn summary_statistics() {
        let s = McSummary::of(&[3.0, 1.0, 2.0, 10.0]);
        assert_eq!((s.m, s.min, s.median, s.max), (4, 1.0, 2.5, 10.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TestConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.05;
        cfg.mc_reps = 0;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn pvalue_is_scale_invariant(
            reps in proptest::collection::vec(0.0f64..10.0, 1..50),
            t in 0.0f64..10.0,
            k in -20i32..20,
        ) {
            let c = 2f64.powi(k);
            let scaled: Vec<f64> = reps.iter().map(|r| r * c).collect();
            prop_assert_eq!(pvalue_from_replicates(t, &reps), pvalue_from_replicates(t * c, &scaled));
        }

        #[test]
        fn replicate_is_a_quadratic_form(seed in 0u64..500, n in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = uniform_matrix(&mut rng, n, n);
            let u = multipliers(seed, 0, n);
            let q = (&a * a.transpose()) / (n * n) as f64;
            let form = (u.transpose() * q * &u)[(0, 0)];
            prop_assert!((mc_replicate(&a, &u) - form).abs() < 1e-10);
        }
    }

    #[test]
    fn pipeline_is_deterministic_and_zero_residual_safe() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(60, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(60, |i, _| {
            x[(i, 0)] - x[(i, 1)] + 0.5 * rng.sample::<f64, _>(StandardNormal)
        });
        let ds = Dataset::from_parts(y, x, DMatrix::zeros(60, 0)).unwrap();
        let f = ModelFamily::from_name("linear", 3, 0).unwrap();
        let cfg = TestConfig { mc_reps: 200, seed: 9, ..TestConfig::default() };
        let a = run_test(&ds, &f, &cfg).unwrap();
        let b = run_test(&ds, &f, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.t_n >= 0.0);
        assert_eq!(a.reject, a.p_hat <= 0.05);
        assert!((a.p_hat * 200.0).fract() == 0.0);
    }
}
