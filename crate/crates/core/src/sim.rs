//! Benchmark data-generating processes and size/power experiments.

use std::fmt;
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lackfit::{run_test, TestConfig};
use crate::model::ModelFamily;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CaseId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5c1,
    Ex5c2,
    Ex5c3,
    Ex5c4,
}

impl CaseId {
    pub const ALL: [CaseId; 8] = [
        CaseId::Ex1,
        CaseId::Ex2,
        CaseId::Ex3,
        CaseId::Ex4,
        CaseId::Ex5c1,
        CaseId::Ex5c2,
        CaseId::Ex5c3,
        CaseId::Ex5c4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::Ex1 => "ex1",
            CaseId::Ex2 => "ex2",
            CaseId::Ex3 => "ex3",
            CaseId::Ex4 => "ex4",
            CaseId::Ex5c1 => "ex5c1",
            CaseId::Ex5c2 => "ex5c2",
            CaseId::Ex5c3 => "ex5c3",
            CaseId::Ex5c4 => "ex5c4",
        }
    }

    fn code(self) -> u64 {
        CaseId::ALL.iter().position(|&c| c == self).unwrap() as u64 + 1
    }

    /// Family fitted under the null hypothesis.
    pub fn null_family(self) -> &'static str {
        match self {
            CaseId::Ex1 | CaseId::Ex2 | CaseId::Ex3 | CaseId::Ex4 => "linear",
            CaseId::Ex5c1 => "linear+w",
            CaseId::Ex5c2 | CaseId::Ex5c4 => "linear+sinw",
            CaseId::Ex5c3 => "linear+cosw",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCase(s.to_string()))
    }
}

impl TryFrom<String> for CaseId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CaseId> for String {
    fn from(c: CaseId) -> String {
        c.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorDist {
    Normal,
    StudentT4,
}

/// A fully specified data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub case: CaseId,
    pub n: usize,
    pub a: f64,
    pub p1: usize,
    pub p2: usize,
    pub beta0: DVector<f64>,
    pub beta1: Option<DVector<f64>>,
    /// Lower Cholesky factor of Cov(X); `None` means identity.
    pub sigma_chol: Option<DMatrix<f64>>,
    pub error_dist: ErrorDist,
    /// Multiplier on the error term.
    pub noise_scale: f64,
    pub null_family: String,
}

fn unit(v: &[f64]) -> DVector<f64> {
    let v = DVector::from_column_slice(v);
    let norm = v.norm();
    v / norm
}

/// `Sigma_ij = 1{i=j} + rho^|i-j| 1{i!=j}`.
pub fn ar_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            rho.powi((i as i32 - j as i32).abs())
        }
    })
}

impl SimDesign {
    pub fn new(case: CaseId, n: usize, a: f64) -> SimDesign {
        let b4_0 = unit(&[1.0, 1.0, 0.0, 0.0]);
        let b4_1 = unit(&[0.0, 0.0, 1.0, 1.0]);
        let b8_0 = unit(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let b8_1 = unit(&[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let b_ex4 = unit(&[1.0, 1.0, -1.0, -1.0]);
        let (p1, beta0, beta1) = match case {
            CaseId::Ex1 | CaseId::Ex5c1 => (4, b4_1.clone(), None),
            CaseId::Ex2 | CaseId::Ex5c2 => (4, b4_0, Some(b4_1)),
            CaseId::Ex3 | CaseId::Ex5c3 => (8, b8_0, Some(b8_1)),
            CaseId::Ex4 | CaseId::Ex5c4 => (4, b_ex4, None),
        };
        let correlated = matches!(case, CaseId::Ex4 | CaseId::Ex5c4);
        let sigma_chol = correlated.then(|| {
            ar_covariance(p1, 0.5)
                .cholesky()
                .expect("AR covariance is positive definite")
                .l()
        });
        let p2 = usize::from(matches!(
            case,
            CaseId::Ex5c1 | CaseId::Ex5c2 | CaseId::Ex5c3 | CaseId::Ex5c4
        ));
        SimDesign {
            case,
            n,
            a,
            p1,
            p2,
            beta0,
            beta1,
            sigma_chol,
            error_dist: if correlated { ErrorDist::StudentT4 } else { ErrorDist::Normal },
            noise_scale: 0.5,
            null_family: case.null_family().to_string(),
        }
    }

    /// Conditional mean of Y at one observation.
    pub fn mean(&self, x: &[f64], w: &[f64]) -> f64 {
        let dot = |b: &DVector<f64>| b.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
        let s0 = dot(&self.beta0);
        let s1 = self.beta1.as_ref().map(dot).unwrap_or(0.0);
        let a = self.a;
        let pi = std::f64::consts::PI;
        match self.case {
            CaseId::Ex1 => s0 + a * (0.6 * pi * s0).cos(),
            CaseId::Ex2 => s0 + a * 0.125 * (0.3 * s1).exp(),
            CaseId::Ex3 => s0 + a * (0.3 * s1.powi(3) + 0.3 * s1.powi(2)),
            CaseId::Ex4 => s0 + a * (-s0 * s0 / 2.0).exp() / 2.0,
            CaseId::Ex5c1 => s0 + w[0] + a * (0.6 * pi * s0).cos(),
            CaseId::Ex5c2 => s0 + w[0].sin() + a * (0.5 * s1 * s1 + 2.0 * w[0].sin()),
            CaseId::Ex5c3 => s0 + w[0].cos() + a * (0.3 * s1.powi(3) + 0.3 * s1.powi(2)),
            CaseId::Ex5c4 => s0 + w[0].sin() + a * (-s0 * s0 / 2.0).exp() * w[0],
        }
    }
}

/// Draws one dataset: X rows, then W, then errors.
pub fn generate<R: Rng + ?Sized>(design: &SimDesign, rng: &mut R) -> Result<Dataset> {
    let (n, p1, p2) = (design.n, design.p1, design.p2);
    let mut x = DMatrix::from_fn(n, p1, |_, _| 0.0);
    for i in 0..n {
        for j in 0..p1 {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    if let Some(l) = &design.sigma_chol {
        x *= l.transpose();
    }
    let mut w = DMatrix::zeros(n, p2);
    for i in 0..n {
        for j in 0..p2 {
            w[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let t4 = StudentT::new(4.0).expect("valid degrees of freedom");
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = match design.error_dist {
            ErrorDist::Normal => rng.sample(StandardNormal),
            ErrorDist::StudentT4 => rng.sample(t4),
        };
        let xi: Vec<f64> = x.row(i).iter().copied().collect();
        let wi: Vec<f64> = w.row(i).iter().copied().collect();
        design.mean(&xi, &wi) + design.noise_scale * e
    });
    Dataset::from_parts(y, x, w)
}

/// One grid point of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub case: CaseId,
    pub n: usize,
    pub a: f64,
    pub reps: usize,
}

/// One row of an empirical size/power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub case: CaseId,
    pub n: usize,
    pub a: f64,
    pub reps: usize,
    pub mc_reps: usize,
    pub alpha: f64,
    pub rejection_rate: f64,
    pub seed: u64,
}

/// Per-cell counts that do not appear in the CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellDiagnostics {
    pub rejections: usize,
    pub failures: usize,
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
    pub diagnostics: Vec<CellDiagnostics>,
    pub version: String,
    pub timestamp: u64,
}

/// Seed of replicate `rep` at a grid point.
pub fn replicate_seed(master: u64, case: CaseId, n: usize, a: f64, rep: usize) -> u64 {
    derive_seed(&[master, case.code(), n as u64, a.to_bits(), rep as u64])
}

enum Outcome {
    Decided { reject: bool, converged: bool },
    Failed,
}

fn one_replicate(point: &GridPoint, rep: usize, mc_reps: usize, alpha: f64, master: u64) -> Outcome {
    let seed = replicate_seed(master, point.case, point.n, point.a, rep);
    let design = SimDesign::new(point.case, point.n, point.a);
    let run = || -> Result<(bool, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = generate(&design, &mut rng)?;
        let family = ModelFamily::from_name(&design.null_family, ds.p1(), ds.p2())?;
        let cfg = TestConfig {
            mc_reps,
            ridge: None,
            seed: derive_seed(&[seed, 1]),
            alpha,
            init: None,
        };
        let report = run_test(&ds, &family, &cfg)?;
        Ok((report.reject, report.fit.converged))
    };
    match run() {
        Ok((reject, converged)) => {
            if !converged {
                log::warn!("{} n={} a={} rep {rep}: fit did not converge", point.case, point.n, point.a);
            }
            Outcome::Decided { reject, converged }
        }
        Err(e) => {
            log::warn!("{} n={} a={} rep {rep}: {e}", point.case, point.n, point.a);
            Outcome::Failed
        }
    }
}

/// Runs the test on fresh data `reps` times per grid point. Failed replicates
/// count as non-rejections.
pub fn power_experiment(grid: &[GridPoint], mc_reps: usize, alpha: f64, seed: u64) -> Result<PowerTable> {
    if grid.iter().any(|g| g.reps == 0) {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    TestConfig { mc_reps, alpha, ..TestConfig::default() }.validate()?;
    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(g, p)| (0..p.reps).map(move |r| (g, r)))
        .collect();
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(g, r)| one_replicate(&grid[g], r, mc_reps, alpha, seed))
        .collect();
    let mut diagnostics = vec![CellDiagnostics::default(); grid.len()];
    for (&(g, _), outcome) in jobs.iter().zip(&outcomes) {
        let d = &mut diagnostics[g];
        match outcome {
            Outcome::Decided { reject, converged } => {
                d.rejections += usize::from(*reject);
                d.nonconverged += usize::from(!converged);
            }
            Outcome::Failed => d.failures += 1,
        }
    }
    let rows = grid
        .iter()
        .zip(&diagnostics)
        .map(|(p, d)| PowerRow {
            case: p.case,
            n: p.n,
            a: p.a,
            reps: p.reps,
            mc_reps,
            alpha,
            rejection_rate: d.rejections as f64 / p.reps as f64,
            seed,
        })
        .collect();
    Ok(PowerTable {
        rows,
        diagnostics,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}

impl PowerTable {
    pub fn from_rows(rows: Vec<PowerRow>) -> PowerTable {
        PowerTable {
            diagnostics: vec![CellDiagnostics::default(); rows.len()],
            rows,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: 0,
        }
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        for row in &self.rows {
            wr.serialize(row)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<PowerTable> {
        let mut rd = csv::Reader::from_reader(input);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<PowerRow>, _>>()?;
        Ok(PowerTable::from_rows(rows))
    }

    /// `case,n,a,rejection_rate`, ordered by case, n and a.
    pub fn power_curve_csv(&self) -> Result<String> {
        let mut rows: Vec<&PowerRow> = self.rows.iter().collect();
        rows.sort_by(|x, y| (x.case, x.n).cmp(&(y.case, y.n)).then(x.a.total_cmp(&y.a)));
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record(["case", "n", "a", "rejection_rate"])?;
        for r in rows {
            wr.write_record([
                r.case.to_string(),
                r.n.to_string(),
                r.a.to_string(),
                r.rejection_rate.to_string(),
            ])?;
        }
        let buf = wr.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Aligned plain-text table with a metadata header.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# adaptest {}  generated at unix time {}", self.version, self.timestamp);
        let _ = writeln!(
            out,
            "{:<6} {:>6} {:>6} {:>6} {:>7} {:>6} {:>9} {:>20}",
            "case", "n", "a", "reps", "mc_reps", "alpha", "rate", "seed"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<6} {:>6} {:>6} {:>6} {:>7} {:>6} {:>9.4} {:>20}",
                r.case.as_str(),
                r.n,
                r.a,
                r.reps,
                r.mc_reps,
                r.alpha,
                r.rejection_rate,
                r.seed
            );
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Experiment specification, read from TOML.
///
/// ```toml
/// case = "ex3"
/// n = [50, 100, 200]
/// a = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
/// mc_reps = 300
/// seed = 20240101
/// output = "table1.csv"
/// ```
///
/// `reps` sets the replication count for every cell; otherwise `size_reps`
/// applies at `a = 0` and `power_reps` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub case: OneOrMany<CaseId>,
    pub n: OneOrMany<usize>,
    pub a: OneOrMany<f64>,
    pub reps: Option<usize>,
    #[serde(default = "default_size_reps")]
    pub size_reps: usize,
    #[serde(default = "default_power_reps")]
    pub power_reps: usize,
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: Option<u64>,
    pub output: Option<String>,
}

fn default_size_reps() -> usize {
    500
}
fn default_power_reps() -> usize {
    200
}
fn default_mc_reps() -> usize {
    300
}
fn default_alpha() -> f64 {
    0.05
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<ExperimentSpec> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentSpec::parse(&text)
    }

    /// Cells in case, n, a order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for case in self.case.to_vec() {
            for n in self.n.to_vec() {
                for a in self.a.to_vec() {
                    let reps = self
                        .reps
                        .unwrap_or(if a == 0.0 { self.size_reps } else { self.power_reps });
                    out.push(GridPoint { case, n, a, reps });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_covariance;

    #[test]
    fn directions_are_unit_length() {
        for case in CaseId::ALL {
            let d = SimDesign::new(case, 10, 0.5);
            assert!((d.beta0.norm() - 1.0).abs() < 1e-12);
            if let Some(b1) = &d.beta1 {
                assert!((b1.norm() - 1.0).abs() < 1e-12);
            }
            assert_eq!(d.beta0.len(), d.p1);
        }
    }

    #[test]
    fn case_names_round_trip() {
        for case in CaseId::ALL {
            assert_eq!(case.as_str().parse::<CaseId>().unwrap(), case);
        }
        assert!(matches!("ex6".parse::<CaseId>(), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn noiseless_null_is_linear() {
        let mut d = SimDesign::new(CaseId::Ex1, 50, 0.0);
        d.noise_scale = 0.0;
        let ds = generate(&d, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let fitted = ds.x() * &d.beta0;
        assert!((ds.y() - fitted).amax() < 1e-12);
    }

    #[test]
    fn null_data_lie_in_null_family() {
        for case in CaseId::ALL {
            let mut d = SimDesign::new(case, 20, 0.0);
            d.noise_scale = 0.0;
            let ds = generate(&d, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            let f = ModelFamily::from_name(&d.null_family, d.p1, d.p2).unwrap();
            let mut params: Vec<f64> = d.beta0.iter().copied().collect();
            params.extend(std::iter::repeat_n(1.0, d.p2));
            for i in 0..20 {
                let xi: Vec<f64> = ds.x().row(i).iter().copied().collect();
                let wi: Vec<f64> = ds.w().row(i).iter().copied().collect();
                assert!((f.mean(&xi, &wi, &params) - ds.y()[i]).abs() < 1e-12, "{case}");
            }
        }
    }

    #[test]
    fn correlated_covariance_matches_target() {
        let d = SimDesign::new(CaseId::Ex4, 5000, 0.0);
        let ds = generate(&d, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let diff = sample_covariance(ds.x()) - ar_covariance(4, 0.5);
        assert!(diff.amax() < 0.05, "{diff}");
    }

    #[test]
    fn ex2_departure_mean_matches_lognormal_moment() {
        let mut d = SimDesign::new(CaseId::Ex2, 20000, 1.0);
        d.noise_scale = 0.0;
        let ds = generate(&d, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let departure = (ds.y() - ds.x() * &d.beta0).mean();
        assert!((departure - 0.125 * 0.045f64.exp()).abs() < 0.01);
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let a = replicate_seed(1, CaseId::Ex1, 100, 0.0, 0);
        assert_ne!(a, replicate_seed(1, CaseId::Ex1, 100, 0.0, 1));
        assert_ne!(a, replicate_seed(1, CaseId::Ex1, 100, 0.2, 0));
        assert_ne!(a, replicate_seed(1, CaseId::Ex2, 100, 0.0, 0));
        assert_ne!(a, replicate_seed(2, CaseId::Ex1, 100, 0.0, 0));
    }

    #[test]
    fn single_replicate_rate_is_binary_and_deterministic() {
        let grid = [GridPoint { case: CaseId::Ex1, n: 40, a: 0.5, reps: 1 }];
        let t1 = power_experiment(&grid, 30, 0.05, 5).unwrap();
        let t2 = power_experiment(&grid, 30, 0.05, 5).unwrap();
        assert!(t1.rows[0].rejection_rate == 0.0 || t1.rows[0].rejection_rate == 1.0);
        assert_eq!(t1.rows, t2.rows);
        assert!(power_experiment(&[GridPoint { reps: 0, ..grid[0] }], 30, 0.05, 5).is_err());
    }

    fn table_one_spec() -> ExperimentSpec {
        ExperimentSpec::parse(
            r#"
            case = "ex3"
            n = [50, 100, 200]
            a = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
            mc_reps = 300
            seed = 7
            "#,
        )
        .unwrap()
    }

    #[test]
    fn spec_grid_cardinality_and_reps() {
        let grid = table_one_spec().grid();
        assert_eq!(grid.len(), 18);
        assert_eq!(grid[0].reps, 500);
        assert_eq!(grid[1].reps, 200);
        let spec = ExperimentSpec::parse("case = [\"ex1\", \"ex2\"]\nn = 100\na = 0\nreps = 3").unwrap();
        assert!(spec.grid().iter().all(|g| g.reps == 3));
        assert_eq!(spec.grid().len(), 2);
        assert!(ExperimentSpec::parse("case = \"ex9\"\nn = 1\na = 0").is_err());
        assert!(ExperimentSpec::parse("case = \"ex1\"\nn = 1\na = 0\nbogus = 1").is_err());
    }

    fn sample_table(k: usize) -> PowerTable {
        PowerTable::from_rows(
            table_one_spec()
                .grid()
                .into_iter()
                .take(k)
                .enumerate()
                .map(|(i, g)| PowerRow {
                    case: g.case,
                    n: g.n,
                    a: g.a,
                    reps: g.reps,
                    mc_reps: 300,
                    alpha: 0.05,
                    rejection_rate: i as f64 / 7.0,
                    seed: 7,
                })
                .collect(),
        )
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let one = sample_table(1).to_csv().unwrap();
        assert_eq!(one.lines().count(), 2);
        assert_eq!(one.lines().next().unwrap(), "case,n,a,reps,mc_reps,alpha,rejection_rate,seed");
        let full = sample_table(18);
        let back = PowerTable::read_csv(full.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(back.rows, full.rows);
        assert_eq!(full.to_csv().unwrap().lines().count(), 19);
    }

    #[test]
    fn text_and_curve_renderings() {
        let t = sample_table(4);
        let text = t.to_text();
        assert!(text.starts_with("# adaptest"));
        assert_eq!(text.lines().count(), 6);
        let curve = t.power_curve_csv().unwrap();
        assert_eq!(curve.lines().next().unwrap(), "case,n,a,rejection_rate");
        assert_eq!(curve.lines().count(), 5);
    }
}
