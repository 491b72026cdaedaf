//! JSON and flat key-value renderings of a [`TestReport`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lackfit::TestReport;

/// Everything needed to rerun a test exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub family: String,
    pub y: String,
    pub x: Vec<String>,
    pub w: Vec<String>,
    pub mc_reps: usize,
    pub ridge: f64,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prepare: Option<String>,
}

/// Machine-readable form of a [`TestReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub t_n: f64,
    pub p_hat: f64,
    pub q_hat: usize,
    pub m: usize,
    pub seed: u64,
    pub converged: bool,
    pub eigenvalues: Vec<f64>,
    pub b_columns: Vec<Vec<f64>>,
    pub ratios: Vec<f64>,
    pub reject: bool,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub mc_min: f64,
    pub mc_median: f64,
    pub mc_max: f64,
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub config: ResolvedConfig,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ReportRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One `key = value` line per field, vectors comma-separated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("t_n", self.t_n.to_string());
        line("p_hat", self.p_hat.to_string());
        line("q_hat", self.q_hat.to_string());
        line("reject", self.reject.to_string());
        line("alpha", self.config.alpha.to_string());
        line("eigenvalues", join(&self.eigenvalues));
        line("ratios", join(&self.ratios));
        for (k, col) in self.b_columns.iter().enumerate() {
            line(&format!("b_column_{}", k + 1), join(col));
        }
        line("m", self.m.to_string());
        line("mc_min", self.mc_min.to_string());
        line("mc_median", self.mc_median.to_string());
        line("mc_max", self.mc_max.to_string());
        line("n", self.n.to_string());
        line("p1", self.p1.to_string());
        line("p2", self.p2.to_string());
        line("converged", self.converged.to_string());
        line("iterations", self.iterations.to_string());
        line("sse", self.sse.to_string());
        line("beta", join(&self.beta));
        line("theta", join(&self.theta));
        line("family", self.config.family.clone());
        line("y", self.config.y.clone());
        line("x", self.config.x.join(","));
        line("w", self.config.w.join(","));
        line("mc_reps", self.config.mc_reps.to_string());
        line("ridge", self.config.ridge.to_string());
        line("seed", self.seed.to_string());
        if let Some(d) = &self.config.data {
            line("data", d.clone());
        }
        if let Some(p) = &self.config.prepare {
            line("prepare", p.clone());
        }
        for w in &self.warnings {
            line("warning", w.clone());
        }
        out
    }
}

impl TestReport {
    pub fn record(&self) -> ReportRecord {
        ReportRecord {
            t_n: self.t_n,
            p_hat: self.p_hat,
            q_hat: self.q_hat,
            m: self.mc.m,
            seed: self.seed,
            converged: self.fit.converged,
            eigenvalues: self.eigenvalues.iter().copied().collect(),
            b_columns: self.b.column_iter().map(|c| c.iter().copied().collect()).collect(),
            ratios: self.ratios.clone(),
            reject: self.reject,
            n: self.n,
            p1: self.p1,
            p2: self.p2,
            mc_min: self.mc.min,
            mc_median: self.mc.median,
            mc_max: self.mc.max,
            beta: self.fit.beta.iter().copied().collect(),
            theta: self.fit.theta.iter().copied().collect(),
            sse: self.fit.sse,
            iterations: self.fit.iterations,
            warnings: self.warnings.clone(),
            config: ResolvedConfig {
                family: self.family.clone(),
                y: self.columns.y.clone(),
                x: self.columns.x.clone(),
                w: self.columns.w.clone(),
                mc_reps: self.mc.m,
                ridge: self.ridge,
                alpha: self.alpha,
                seed: self.seed,
                data: None,
                prepare: None,
            },
        }
    }

    pub fn to_json(&self) -> String {
        self.record().to_json()
    }

    pub fn to_text(&self) -> String {
        self.record().to_text()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::lackfit::{run_test, TestConfig};
    use crate::model::ModelFamily;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::collections::HashMap;

    fn report() -> TestReport {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(50, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let w = DMatrix::from_fn(50, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(50, |i, _| x[(i, 0)] + w[(i, 0)] + 0.3 * rng.sample::<f64, _>(StandardNormal));
        let ds = Dataset::from_parts(y, x, w).unwrap();
        let f = ModelFamily::from_name("linear+w", 2, 1).unwrap();
        run_test(&ds, &f, &TestConfig { mc_reps: 50, seed: 4, ..TestConfig::default() }).unwrap()
    }

    #[test]
    fn json_round_trips_and_has_required_fields() {
        let rec = report().record();
        let json = rec.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["t_n", "p_hat", "q_hat", "m", "seed", "converged", "eigenvalues", "b_columns"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        let back: ReportRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn text_and_json_carry_identical_numbers() {
        let rec = report().record();
        let text = rec.to_text();
        let kv: HashMap<&str, &str> = text.lines().filter_map(|l| l.split_once(" = ")).collect();
        assert_eq!(kv["t_n"].parse::<f64>().unwrap(), rec.t_n);
        assert_eq!(kv["p_hat"].parse::<f64>().unwrap(), rec.p_hat);
        assert_eq!(kv["q_hat"].parse::<usize>().unwrap(), rec.q_hat);
        let eig: Vec<f64> = kv["eigenvalues"].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(eig, rec.eigenvalues);
        let b1: Vec<f64> = kv["b_column_1"].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(b1, rec.b_columns[0]);
        assert_eq!(kv["seed"], "4");
        assert_eq!(kv["family"], "linear+w");
    }
}
