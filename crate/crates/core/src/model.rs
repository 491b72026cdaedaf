//! Hypothesized mean functions and their nonlinear least-squares fit.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// `G(x, w, beta, theta)`.
pub type MeanFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
/// Writes the gradient of `G` in `(beta, theta)` into the output slice.
pub type GradFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;

pub const MAX_ITERATIONS: usize = 200;
const SSE_TOL: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-8;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
const MAX_CONDITION: f64 = 1e12;
const GRADIENT_PROBES: usize = 10;
pub const GRADIENT_RTOL: f64 = 1e-5;

/// Registered family names, usable with an optional `+const` suffix.
pub const FAMILY_NAMES: [&str; 4] = ["linear", "linear+w", "linear+sinw", "linear+cosw"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WTerm {
    None,
    Identity,
    Sin,
    Cos,
}

/// A hypothesized mean function `G(beta'x, w, theta)` for fixed dimensions.
#[derive(Clone)]
pub struct ModelFamily {
    name: String,
    p1: usize,
    p2: usize,
    d: usize,
    mean: MeanFn,
    grad: Option<GradFn>,
}

impl fmt::Debug for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelFamily")
            .field("name", &self.name)
            .field("p1", &self.p1)
            .field("p2", &self.p2)
            .field("d", &self.d)
            .field("analytic_grad", &self.grad.is_some())
            .finish()
    }
}

impl ModelFamily {
    /// Looks up a registered family: `linear`, `linear+w`, `linear+sinw`,
    /// `linear+cosw`, each optionally suffixed with `+const` for an intercept.
    ///
    /// W terms enter as `sum_k theta_k f(w_k)`; the intercept, when present,
    /// is the first entry of theta.
    pub fn from_name(name: &str, p1: usize, p2: usize) -> Result<ModelFamily> {
        let (base, intercept) = match name.strip_suffix("+const") {
            Some(b) => (b, true),
            None => (name, false),
        };
        let term = match base {
            "linear" => WTerm::None,
            "linear+w" => WTerm::Identity,
            "linear+sinw" => WTerm::Sin,
            "linear+cosw" => WTerm::Cos,
            _ => return Err(Error::UnknownFamily(name.to_string())),
        };
        if term != WTerm::None && p2 == 0 {
            return Err(Error::Config(format!("family `{name}` needs W covariates")));
        }
        if p1 == 0 {
            return Err(Error::Config("p1 must be at least 1".into()));
        }
        let w_terms = if term == WTerm::None { 0 } else { p2 };
        let d = w_terms + usize::from(intercept);
        let features = move |x: &[f64], w: &[f64], out: &mut [f64]| {
            out[..p1].copy_from_slice(x);
            let mut k = p1;
            if intercept {
                out[k] = 1.0;
                k += 1;
            }
            for j in 0..w_terms {
                out[k + j] = match term {
                    WTerm::Identity => w[j],
                    WTerm::Sin => w[j].sin(),
                    WTerm::Cos => w[j].cos(),
                    WTerm::None => unreachable!(),
                };
            }
        };
        let k = p1 + d;
        let mean: MeanFn = Arc::new(move |x, w, beta, theta| {
            let mut phi = vec![0.0; k];
            features(x, w, &mut phi);
            beta.iter()
                .chain(theta)
                .zip(&phi)
                .map(|(a, b)| a * b)
                .sum()
        });
        let grad: GradFn = Arc::new(move |x, w, _beta, _theta, out| features(x, w, out));
        Ok(ModelFamily {
            name: name.to_string(),
            p1,
            p2,
            d,
            mean,
            grad: Some(grad),
        })
    }

    /// Registers a user-supplied family. An analytic gradient, when given, is
    /// checked against central finite differences on random probes.
    pub fn custom(
        name: impl Into<String>,
        p1: usize,
        p2: usize,
        d: usize,
        mean: MeanFn,
        grad: Option<GradFn>,
    ) -> Result<ModelFamily> {
        let family = ModelFamily {
            name: name.into(),
            p1,
            p2,
            d,
            mean,
            grad,
        };
        if family.grad.is_some() {
            let err = family.gradient_check(GRADIENT_PROBES, 0x5eed)?;
            if err > GRADIENT_RTOL {
                return Err(Error::GradientMismatch {
                    family: family.name,
                    error: err,
                });
            }
        }
        Ok(family)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Total parameter count `p1 + d`.
    pub fn n_params(&self) -> usize {
        self.p1 + self.d
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn mean(&self, x: &[f64], w: &[f64], params: &[f64]) -> f64 {
        let (beta, theta) = params.split_at(self.p1);
        (self.mean)(x, w, beta, theta)
    }

    /// Gradient in `(beta, theta)`; falls back to finite differences.
    pub fn gradient(&self, x: &[f64], w: &[f64], params: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.grad {
            Some(g) => {
                let (beta, theta) = params.split_at(self.p1);
                g(x, w, beta, theta, out);
                Ok(())
            }
            None => {
                out.copy_from_slice(&finite_diff_grad(self, x, w, params)?);
                Ok(())
            }
        }
    }

    /// Largest relative discrepancy between the analytic gradient and central
    /// differences over `probes` random points (0 without an analytic gradient).
    pub fn gradient_check(&self, probes: usize, seed: u64) -> Result<f64> {
        let Some(grad) = &self.grad else {
            return Ok(0.0);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.n_params();
        let mut worst = 0.0f64;
        for _ in 0..probes {
            let x: Vec<f64> = (0..self.p1).map(|_| rng.sample(StandardNormal)).collect();
            let w: Vec<f64> = (0..self.p2).map(|_| rng.sample(StandardNormal)).collect();
            let params: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let mut analytic = vec![0.0; k];
            let (beta, theta) = params.split_at(self.p1);
            grad(&x, &w, beta, theta, &mut analytic);
            let numeric = finite_diff_grad(self, &x, &w, &params)?;
            let scale = analytic.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let diff = analytic
                .iter()
                .zip(&numeric)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(diff / scale);
        }
        Ok(worst)
    }
}

/// Central-difference gradient of the family mean in `(beta, theta)` with
/// step `1e-6 * (1 + |coordinate|)`.
pub fn finite_diff_grad(family: &ModelFamily, x: &[f64], w: &[f64], params: &[f64]) -> Result<Vec<f64>> {
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let orig = p[k];
        let h = 1e-6 * (1.0 + orig.abs());
        p[k] = orig + h;
        let up = family.mean(x, w, &p);
        p[k] = orig - h;
        let down = family.mean(x, w, &p);
        p[k] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!(
                "mean of `{}` is not finite near parameter {k}",
                family.name
            )));
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Nonlinear least-squares estimates and per-observation quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub theta: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Row i is the gradient of G at observation i.
    pub score: DMatrix<f64>,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn params(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.beta.len() + self.theta.len(),
            self.beta.iter().chain(self.theta.iter()).copied(),
        )
    }
}

/// Row-major copies of the covariates so rows can be handed out as slices.
struct Rows {
    x: Vec<f64>,
    w: Vec<f64>,
    p1: usize,
    p2: usize,
}

impl Rows {
    fn new(ds: &Dataset) -> Rows {
        let (p1, p2) = (ds.p1(), ds.p2());
        let x = ds.x().transpose().as_slice().to_vec();
        let w = ds.w().transpose().as_slice().to_vec();
        Rows { x, w, p1, p2 }
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p1..(i + 1) * self.p1]
    }

    fn w(&self, i: usize) -> &[f64] {
        &self.w[i * self.p2..(i + 1) * self.p2]
    }
}

fn check_dims(ds: &Dataset, family: &ModelFamily) -> Result<()> {
    if ds.p1() != family.p1 || ds.p2() != family.p2 {
        return Err(Error::Dimension(format!(
            "family `{}` expects p1={}, p2={}; data has p1={}, p2={}",
            family.name,
            family.p1,
            family.p2,
            ds.p1(),
            ds.p2()
        )));
    }
    Ok(())
}

fn residuals(ds: &Dataset, rows: &Rows, family: &ModelFamily, params: &[f64]) -> DVector<f64> {
    DVector::from_fn(ds.n(), |i, _| ds.y()[i] - family.mean(rows.x(i), rows.w(i), params))
}

fn score(ds: &Dataset, rows: &Rows, family: &ModelFamily, params: &[f64]) -> Result<DMatrix<f64>> {
    let k = family.n_params();
    let mut buf = vec![0.0; k];
    let mut s = DMatrix::zeros(ds.n(), k);
    for i in 0..ds.n() {
        family.gradient(rows.x(i), rows.w(i), params, &mut buf)?;
        for j in 0..k {
            s[(i, j)] = buf[j];
        }
    }
    Ok(s)
}

/// Default starting point: least squares of y on x for beta, zeros for theta.
pub fn default_init(ds: &Dataset, family: &ModelFamily) -> Result<DVector<f64>> {
    check_dims(ds, family)?;
    let x = ds.x();
    let xtx = x.tr_mul(x);
    let xty = x.tr_mul(ds.y());
    let beta = xtx
        .clone()
        .cholesky()
        .map(|c| c.solve(&xty))
        .or_else(|| xtx.lu().solve(&xty))
        .unwrap_or_else(|| DVector::zeros(ds.p1()));
    let mut init = DVector::zeros(family.n_params());
    init.rows_mut(0, ds.p1()).copy_from(&beta);
    Ok(init)
}

/// Minimizes `sum (y_i - G(x_i, w_i; beta, theta))^2` with Levenberg-Marquardt
/// damping. Hitting the iteration cap is not an error: the result comes back
/// with `converged == false`.
pub fn nls_fit(ds: &Dataset, family: &ModelFamily, init: &DVector<f64>) -> Result<FitResult> {
    check_dims(ds, family)?;
    let k = family.n_params();
    if init.len() != k {
        return Err(Error::Dimension(format!("init has {} entries, family needs {k}", init.len())));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial parameters".into()));
    }
    let rows = Rows::new(ds);
    let mut params = init.clone();
    let mut r = residuals(ds, &rows, family, params.as_slice());
    let mut sse = r.norm_squared();
    if !sse.is_finite() {
        return Err(Error::NonFinite("objective at the initial parameters".into()));
    }

    let mut lambda = LAMBDA_INIT;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = score(ds, &rows, family, params.as_slice())?;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if sse == 0.0 {
            converged = true;
            break;
        }
        let g = jac.tr_mul(&r);
        if g.amax() < GRAD_TOL {
            converged = true;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let mut improved = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for j in 0..k {
                a[(j, j)] += lambda * jtj[(j, j)].max(f64::MIN_POSITIVE);
            }
            let step = match a.cholesky() {
                Some(c) => c.solve(&g),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial = &params + &step;
            let r_trial = residuals(ds, &rows, family, trial.as_slice());
            let sse_trial = r_trial.norm_squared();
            if sse_trial.is_finite() && sse_trial < sse {
                let rel = (sse - sse_trial) / sse;
                params = trial;
                r = r_trial;
                sse = sse_trial;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                converged = rel < SSE_TOL;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No damped step lowers the objective: a numerical minimum.
            converged = true;
            break;
        }
        jac = score(ds, &rows, family, params.as_slice())?;
        if converged {
            break;
        }
    }
    if !converged {
        log::warn!("`{}` fit stopped after {iterations} iterations without converging", family.name);
    }
    let score = score(ds, &rows, family, params.as_slice())?;
    Ok(FitResult {
        beta: params.rows(0, family.p1).into_owned(),
        theta: params.rows(family.p1, family.d).into_owned(),
        residuals: r,
        score,
        sse,
        converged,
        iterations,
    })
}

/// Influence rows `v_i = S^{-1} m_i e_i` with `S = score'score / n`.
pub fn influence_vectors(fit: &FitResult) -> Result<DMatrix<f64>> {
    let n = fit.score.nrows();
    let s = fit.score.tr_mul(&fit.score) / n as f64;
    let eig = SymmetricEigen::new(s);
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lo > 0.0) || hi / lo >= MAX_CONDITION {
        return Err(Error::SingularScore(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    let v = &eig.eigenvectors;
    let s_inv = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l)) * v.transpose();
    let mut weighted = fit.score.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= fit.residuals[i];
    }
    Ok(weighted * s_inv)
}
